//! Format-0 Standard MIDI File export for reduced voices.

use crate::score::{NoteEvent, Phrase, Voice};

pub const TICKS_PER_QUARTER: u16 = 480;
/// 120 BPM.
pub const MICROS_PER_QUARTER: u32 = 500_000;

fn push_vlq(out: &mut Vec<u8>, mut value: u32) {
    let mut stack = [0u8; 5];
    let mut n = 0;
    loop {
        stack[n] = (value & 0x7f) as u8;
        n += 1;
        value >>= 7;
        if value == 0 {
            break;
        }
    }
    for i in (0..n).rev() {
        let cont = if i > 0 { 0x80 } else { 0 };
        out.push(stack[i] | cont);
    }
}

/// Encodes a line of quarter-grid events as a single-track file. Rests leave
/// gaps; trailing rests extend the end-of-track delta.
pub fn line_to_midi(line: &[NoteEvent]) -> Vec<u8> {
    let mut track = Vec::new();
    push_vlq(&mut track, 0);
    track.extend_from_slice(&[0xff, 0x51, 0x03]);
    track.extend_from_slice(&MICROS_PER_QUARTER.to_be_bytes()[1..]);

    let tpq = TICKS_PER_QUARTER as u32;
    let mut pending: u32 = 0;
    for ev in line {
        let length = tpq * ev.duration as u32;
        match ev.pitch {
            Some(p) => {
                push_vlq(&mut track, pending);
                track.extend_from_slice(&[0x90, p.midi(), ev.velocity]);
                push_vlq(&mut track, length);
                track.extend_from_slice(&[0x80, p.midi(), 0]);
                pending = 0;
            }
            None => pending += length,
        }
    }
    push_vlq(&mut track, pending);
    track.extend_from_slice(&[0xff, 0x2f, 0x00]);

    let mut out = Vec::with_capacity(track.len() + 22);
    out.extend_from_slice(b"MThd");
    out.extend_from_slice(&6u32.to_be_bytes());
    out.extend_from_slice(&0u16.to_be_bytes());
    out.extend_from_slice(&1u16.to_be_bytes());
    out.extend_from_slice(&TICKS_PER_QUARTER.to_be_bytes());
    out.extend_from_slice(b"MTrk");
    out.extend_from_slice(&(track.len() as u32).to_be_bytes());
    out.extend_from_slice(&track);
    out
}

pub fn to_midi(p: &Phrase, voice: Voice) -> Vec<u8> {
    line_to_midi(&p.line(voice))
}

/// Sidecar chord file contents: the Harte progression on one line.
pub fn chord_file(p: &Phrase) -> String {
    let mut s = p.harte_progression();
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::score::{ChordSymbol, Mode, Pitch, PitchClass, Sonority};
    use midly::{MidiMessage, Smf, Timing, TrackEventKind};

    /// (onset tick, pitch, velocity) triples read back by an independent parser.
    fn reread(bytes: &[u8]) -> Vec<(u32, u8, u8)> {
        let smf = Smf::parse(bytes).expect("valid SMF");
        assert_eq!(smf.header.timing, Timing::Metrical(480.into()));
        assert_eq!(smf.tracks.len(), 1);
        let mut t = 0u32;
        let mut notes = Vec::new();
        for ev in &smf.tracks[0] {
            t += ev.delta.as_int();
            if let TrackEventKind::Midi {
                message: MidiMessage::NoteOn { key, vel },
                ..
            } = ev.kind
            {
                if vel.as_int() > 0 {
                    notes.push((t, key.as_int(), vel.as_int()));
                }
            }
        }
        notes
    }

    fn line(pitches: &[Option<i32>]) -> Vec<NoteEvent> {
        pitches
            .iter()
            .map(|p| p.map_or_else(NoteEvent::rest, |m| NoteEvent::note(Pitch::new(m).unwrap())))
            .collect()
    }

    #[test]
    fn four_notes() {
        let notes = reread(&line_to_midi(&line(&[Some(60), Some(62), Some(64), Some(65)])));
        assert_eq!(notes.len(), 4);
    }

    #[test]
    fn rests_leave_gaps() {
        let notes = reread(&line_to_midi(&line(&[Some(60), None, Some(67), None])));
        assert_eq!(notes, vec![(0, 60, 64), (960, 67, 64)]);
    }

    #[test]
    fn all_rests_is_valid_and_empty() {
        let bytes = line_to_midi(&line(&[None, None]));
        assert!(reread(&bytes).is_empty());
        let bytes = line_to_midi(&[]);
        assert!(reread(&bytes).is_empty());
    }

    #[test]
    fn round_trip_pitches_and_onsets() {
        let pitches: Vec<Option<i32>> = (0..40)
            .map(|i| if i % 7 == 3 { None } else { Some(30 + (i * 5) % 60) })
            .collect();
        let notes = reread(&line_to_midi(&line(&pitches)));
        let expected: Vec<(u32, u8, u8)> = pitches
            .iter()
            .enumerate()
            .filter_map(|(i, p)| p.map(|m| (i as u32 * 480, m as u8, 64)))
            .collect();
        assert_eq!(notes, expected);
    }

    #[test]
    fn long_deltas_use_multibyte_vlq() {
        let mut pitches = vec![None; 300];
        pitches.push(Some(60));
        assert_eq!(reread(&line_to_midi(&line(&pitches))), vec![(300 * 480, 60, 64)]);
    }

    #[test]
    fn chord_sidecar() {
        let p = Phrase {
            id: "a".into(),
            key_root: PitchClass::C,
            mode: Mode::Minor,
            sonorities: [ChordSymbol::min(0), ChordSymbol::maj(7), ChordSymbol::maj(7), ChordSymbol::min(0)]
                .into_iter()
                .map(|chord| Sonority { chord, bass: NoteEvent::rest(), melody: NoteEvent::rest() })
                .collect(),
        };
        assert_eq!(chord_file(&p), "C:min G:maj G:maj C:min\n");
    }
}
