//! Skeleton reduction: one quarter note per annotated chord span, lowest
//! sounding pitch for the bass and highest for the melody, with quarter rests
//! for silent spans.

use thiserror::Error;

use crate::kern::{chord_to_roman, kern_pitch_to_midi, midi_to_kern, KernError, RawPhrase, RawRecord};
use crate::score::{ChordSymbol, NoteEvent, Phrase, Pitch, PitchClass, Sonority};

#[derive(Debug, Error)]
pub enum ReductionError {
    #[error("phrase {0:?} has no annotated chord spans")]
    EmptyPhrase(String),
    #[error(transparent)]
    Kern(#[from] KernError),
}

/// Records grouped under one harmonic annotation.
struct Span<'a> {
    chord: ChordSymbol,
    records: Vec<&'a RawRecord>,
}

fn chord_spans(raw: &RawPhrase) -> Result<Vec<Span<'_>>, ReductionError> {
    let mut spans: Vec<Span<'_>> = Vec::new();
    // Rows ahead of the first annotation (pickups) join the first span.
    let mut leading = Vec::new();
    for rec in &raw.records {
        if rec.harmonic == "." {
            match spans.last_mut() {
                Some(span) => span.records.push(rec),
                None => leading.push(rec),
            }
            continue;
        }
        let chord = crate::kern::roman_numeral_to_chord(&rec.harmonic, rec.key.root, rec.key.mode)?;
        let mut records = std::mem::take(&mut leading);
        records.push(rec);
        spans.push(Span { chord, records });
    }
    Ok(spans)
}

fn parse_notes(tokens: &[String]) -> Result<Vec<Pitch>, KernError> {
    let mut out = Vec::new();
    for t in tokens {
        if let Some(p) = kern_pitch_to_midi(t)?.pitch() {
            out.push(p);
        }
    }
    Ok(out)
}

#[derive(Clone, Copy)]
enum Pick {
    Lowest,
    Highest,
}

/// Selects one pitch per span from one voice.
///
/// A span whose first row carries a null token inherits the notes still
/// sounding from the previous attack; every attack inside the span is a
/// candidate as well.
fn reduce_voice(
    spans: &[Span<'_>],
    voice_tokens: impl Fn(&RawRecord) -> &Vec<String>,
    pick: Pick,
) -> Result<Vec<NoteEvent>, KernError> {
    let mut sounding: Vec<Pitch> = Vec::new();
    let mut out = Vec::with_capacity(spans.len());
    for span in spans {
        let mut candidates: Vec<Pitch> = Vec::new();
        for (i, rec) in span.records.iter().enumerate() {
            let toks = voice_tokens(rec);
            if toks.len() == 1 && toks[0] == "." {
                if i == 0 {
                    candidates.extend(&sounding);
                }
                continue;
            }
            sounding = parse_notes(toks)?;
            candidates.extend(&sounding);
        }
        // min_by_key/max_by_key differ in which tie they keep; both equal-pitch
        // candidates produce the same event, so the first onset is kept explicitly.
        let chosen = candidates.iter().copied().reduce(|best, p| match pick {
            Pick::Lowest if p < best => p,
            Pick::Highest if p > best => p,
            _ => best,
        });
        out.push(chosen.map_or_else(NoteEvent::rest, NoteEvent::note));
    }
    Ok(out)
}

/// Reduces a raw phrase to one sonority per annotated chord.
pub fn reduce_phrase(raw: &RawPhrase) -> Result<Phrase, ReductionError> {
    let spans = chord_spans(raw)?;
    if spans.is_empty() {
        return Err(ReductionError::EmptyPhrase(raw.id.clone()));
    }
    let bass = reduce_voice(&spans, |r| &r.bass_tokens, Pick::Lowest)?;
    let melody = reduce_voice(&spans, |r| &r.melody_tokens, Pick::Highest)?;
    let sonorities = spans
        .iter()
        .zip(bass.into_iter().zip(melody))
        .map(|(span, (bass, melody))| Sonority {
            chord: span.chord,
            bass,
            melody,
        })
        .collect();
    Ok(Phrase {
        id: raw.id.clone(),
        key_root: raw.key_root,
        mode: raw.mode,
        sonorities,
    })
}

/// Renders a reduced phrase back into raw records, one row per sonority.
pub fn to_raw_phrase(p: &Phrase) -> RawPhrase {
    let key = p.key();
    let tok = |e: NoteEvent| vec![e.pitch.map_or_else(|| "4r".to_string(), midi_to_kern)];
    RawPhrase {
        id: p.id.clone(),
        key_root: p.key_root,
        mode: p.mode,
        records: p
            .sonorities
            .iter()
            .map(|s| RawRecord {
                function: ".".to_string(),
                harmonic: chord_to_roman(s.chord, key),
                bass_tokens: tok(s.bass),
                melody_tokens: tok(s.melody),
                key,
            })
            .collect(),
    }
}

fn shift_pitch(p: Pitch, semitones: i32) -> Pitch {
    let mut m = p.midi() as i32 + semitones;
    while m > 127 {
        m -= 12;
    }
    while m < 0 {
        m += 12;
    }
    Pitch::new(m).expect("folded into range")
}

fn shift_event(e: NoteEvent, semitones: i32) -> NoteEvent {
    NoteEvent {
        pitch: e.pitch.map(|p| shift_pitch(p, semitones)),
        ..e
    }
}

/// Transposes every pitch, chord root and the key by `semitones`.
/// Pitches pushed outside MIDI range fold back by octaves.
pub fn transpose(p: &Phrase, semitones: i32) -> Phrase {
    Phrase {
        id: p.id.clone(),
        key_root: p.key_root.transpose(semitones),
        mode: p.mode,
        sonorities: p
            .sonorities
            .iter()
            .map(|s| Sonority {
                chord: s.chord.transpose(semitones),
                bass: shift_event(s.bass, semitones),
                melody: shift_event(s.melody, semitones),
            })
            .collect(),
    }
}

/// Semitone shift taking `key_root` to C, in [-6, 5].
pub fn shift_to_c(key_root: PitchClass) -> i32 {
    let up = (-(key_root.value() as i32)).rem_euclid(12);
    if up > 5 {
        up - 12
    } else {
        up
    }
}

pub fn transpose_to_c(p: &Phrase) -> Phrase {
    transpose(p, shift_to_c(p.key_root))
}
