use std::path::PathBuf;

use chordgen_core::dataset::{load_kern_corpus, read_jsonl, write_jsonl, DatasetRecord};
use chordgen_core::kern::{parse_kern, write_kern};
use chordgen_core::midi::to_midi;
use chordgen_core::reduction::reduce_phrase;
use chordgen_core::tokenizer::{decode_interleaved, decode_voice};
use chordgen_core::{PitchClass, Voice};

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/kern")
}

fn records() -> Vec<DatasetRecord> {
    let load = load_kern_corpus(&fixtures()).unwrap();
    assert!(load.failures.is_empty(), "{:?}", load.failures);
    load.records
}

#[test]
fn every_fixture_loads_in_c() {
    let recs = records();
    assert_eq!(recs.len(), 24);
    let sets: std::collections::BTreeSet<_> = recs.iter().map(|r| r.set.as_str()).collect();
    assert_eq!(sets.into_iter().collect::<Vec<_>>(), ["set_a", "set_b", "set_c"]);
    for r in &recs {
        assert_eq!(r.phrase.key_root, PitchClass::C, "{}", r.id);
        assert!(!r.phrase.sonorities.is_empty());
        assert_eq!(r.chords.content().len(), r.phrase.sonorities.len());
    }
}

#[test]
fn token_sequences_decode_to_the_reduced_lines() {
    for r in records() {
        for voice in [Voice::Bass, Voice::Melody] {
            let d = decode_voice(r.voice(voice).content());
            assert_eq!(d.repairs, 0, "{} {voice:?}", r.id);
            assert_eq!(d.events, r.phrase.line(voice), "{} {voice:?}", r.id);
        }
        let pair = decode_interleaved(r.interleaved.content());
        assert_eq!(pair.repairs, 0, "{}", r.id);
        assert_eq!(pair.bass, r.phrase.line(Voice::Bass));
        assert_eq!(pair.melody, r.phrase.line(Voice::Melody));
    }
}

#[test]
fn reduced_phrases_survive_a_kern_round_trip() {
    for r in records() {
        let mut raw = parse_kern(&write_kern(&r.phrase)).unwrap();
        raw.id = r.id.clone();
        assert_eq!(reduce_phrase(&raw).unwrap(), r.phrase, "{}", r.id);
    }
}

#[test]
fn jsonl_round_trip() {
    let recs = records();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("all.jsonl");
    write_jsonl(&path, &recs).unwrap();
    let back: Vec<DatasetRecord> = read_jsonl(&path).unwrap();
    assert_eq!(back, recs);
}

#[test]
fn midi_files_hold_one_note_per_sounding_event() {
    for r in records() {
        for voice in [Voice::Bass, Voice::Melody] {
            let bytes = to_midi(&r.phrase, voice);
            let smf = midly::Smf::parse(&bytes).unwrap();
            let mut pitches = Vec::new();
            for track in &smf.tracks {
                for ev in track {
                    if let midly::TrackEventKind::Midi {
                        message: midly::MidiMessage::NoteOn { key, vel },
                        ..
                    } = ev.kind
                    {
                        if vel.as_int() > 0 {
                            pitches.push(key.as_int());
                        }
                    }
                }
            }
            let expected: Vec<u8> = r.phrase.line(voice).iter().filter_map(|e| e.pitch.map(|p| p.midi())).collect();
            assert_eq!(pitches, expected, "{} {voice:?}", r.id);
        }
    }
}
