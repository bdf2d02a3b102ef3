//! Pitches, chords, sonorities and phrases.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Velocity carried by every reduced note event.
pub const DEFAULT_VELOCITY: u8 = 64;

const NOTE_NAMES: [&str; 12] = [
    "C", "C#", "D", "Eb", "E", "F", "F#", "G", "Ab", "A", "Bb", "B",
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScoreError {
    #[error("MIDI note {0} is outside 0..=127")]
    PitchOutOfRange(i32),
    #[error("unparseable chord symbol {0:?}")]
    UnparseableChord(String),
    #[error("unknown note name {0:?}")]
    UnknownNoteName(String),
}

/// Semitone class, 0 = C.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PitchClass(u8);

impl PitchClass {
    pub const C: PitchClass = PitchClass(0);

    /// Wraps any integer into 0..12.
    pub fn new(value: i32) -> Self {
        PitchClass(value.rem_euclid(12) as u8)
    }

    pub fn value(self) -> u8 {
        self.0
    }

    pub fn transpose(self, semitones: i32) -> Self {
        PitchClass::new(self.0 as i32 + semitones)
    }

    pub fn name(self) -> &'static str {
        NOTE_NAMES[self.0 as usize]
    }

    /// Parses a note name such as `C`, `F#`, `Bb` or `Db` (enharmonics accepted).
    pub fn from_name(name: &str) -> Result<Self, ScoreError> {
        let mut chars = name.chars();
        let letter = chars
            .next()
            .ok_or_else(|| ScoreError::UnknownNoteName(name.to_string()))?;
        let base = match letter {
            'C' => 0,
            'D' => 2,
            'E' => 4,
            'F' => 5,
            'G' => 7,
            'A' => 9,
            'B' => 11,
            _ => return Err(ScoreError::UnknownNoteName(name.to_string())),
        };
        let mut shift: i32 = 0;
        for c in chars {
            match c {
                '#' => shift += 1,
                'b' => shift -= 1,
                _ => return Err(ScoreError::UnknownNoteName(name.to_string())),
            }
        }
        if shift.abs() > 2 {
            return Err(ScoreError::UnknownNoteName(name.to_string()));
        }
        Ok(PitchClass::new(base + shift))
    }
}

impl fmt::Display for PitchClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// MIDI note number, 0..=127.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "i32", into = "i32")]
pub struct Pitch(u8);

impl Pitch {
    pub fn new(midi: i32) -> Result<Self, ScoreError> {
        if (0..=127).contains(&midi) {
            Ok(Pitch(midi as u8))
        } else {
            Err(ScoreError::PitchOutOfRange(midi))
        }
    }

    pub fn midi(self) -> u8 {
        self.0
    }

    pub fn pitch_class(self) -> PitchClass {
        PitchClass::new(self.0 as i32)
    }

    pub fn transpose(self, semitones: i32) -> Result<Self, ScoreError> {
        Pitch::new(self.0 as i32 + semitones)
    }
}

impl TryFrom<i32> for Pitch {
    type Error = ScoreError;
    fn try_from(v: i32) -> Result<Self, Self::Error> {
        Pitch::new(v)
    }
}

impl From<Pitch> for i32 {
    fn from(p: Pitch) -> i32 {
        p.0 as i32
    }
}

pub fn pitch_class(p: Pitch) -> PitchClass {
    p.pitch_class()
}

pub fn interval_semitones(a: Pitch, b: Pitch) -> u8 {
    a.0.abs_diff(b.0)
}

/// A quarter-grid note or rest. `pitch` is `None` for rests.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NoteEvent {
    pub pitch: Option<Pitch>,
    pub duration: u8,
    pub velocity: u8,
}

impl NoteEvent {
    pub fn note(pitch: Pitch) -> Self {
        NoteEvent {
            pitch: Some(pitch),
            duration: 1,
            velocity: DEFAULT_VELOCITY,
        }
    }

    pub fn rest() -> Self {
        NoteEvent {
            pitch: None,
            duration: 1,
            velocity: DEFAULT_VELOCITY,
        }
    }

    pub fn is_rest(&self) -> bool {
        self.pitch.is_none()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quality {
    Maj,
    Min,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Major,
    Minor,
}

/// A key: tonic pitch class plus mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Key {
    pub root: PitchClass,
    pub mode: Mode,
}

impl Key {
    pub fn new(root: PitchClass, mode: Mode) -> Self {
        Key { root, mode }
    }
}

/// Root plus major/minor quality: one of exactly 24 values.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ChordSymbol {
    pub root: PitchClass,
    pub quality: Quality,
}

impl ChordSymbol {
    pub fn new(root: PitchClass, quality: Quality) -> Self {
        ChordSymbol { root, quality }
    }

    pub fn maj(root: i32) -> Self {
        ChordSymbol::new(PitchClass::new(root), Quality::Maj)
    }

    pub fn min(root: i32) -> Self {
        ChordSymbol::new(PitchClass::new(root), Quality::Min)
    }

    pub fn transpose(self, semitones: i32) -> Self {
        ChordSymbol::new(self.root.transpose(semitones), self.quality)
    }

    /// All 24 symbols in vocabulary order (C:maj, C:min, C#:maj, ...).
    pub fn all() -> impl Iterator<Item = ChordSymbol> {
        (0..12).flat_map(|r| [ChordSymbol::maj(r), ChordSymbol::min(r)])
    }
}

impl fmt::Display for ChordSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let q = match self.quality {
            Quality::Maj => "maj",
            Quality::Min => "min",
        };
        write!(f, "{}:{}", self.root, q)
    }
}

impl FromStr for ChordSymbol {
    type Err = ScoreError;

    /// Harte `ROOT:QUALITY` with QUALITY in {maj, min}.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ScoreError::UnparseableChord(s.to_string());
        let (root, quality) = s.split_once(':').ok_or_else(bad)?;
        let root = PitchClass::from_name(root).map_err(|_| bad())?;
        let quality = match quality {
            "maj" => Quality::Maj,
            "min" => Quality::Min,
            _ => return Err(bad()),
        };
        Ok(ChordSymbol::new(root, quality))
    }
}

impl TryFrom<String> for ChordSymbol {
    type Error = ScoreError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<ChordSymbol> for String {
    fn from(c: ChordSymbol) -> String {
        c.to_string()
    }
}

/// Triad pitch classes, root first.
pub fn chord_tones(c: ChordSymbol) -> [PitchClass; 3] {
    let third = match c.quality {
        Quality::Maj => 4,
        Quality::Min => 3,
    };
    [c.root, c.root.transpose(third), c.root.transpose(7)]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Voice {
    Bass,
    Melody,
}

impl Voice {
    pub const BOTH: [Voice; 2] = [Voice::Bass, Voice::Melody];

    pub fn name(self) -> &'static str {
        match self {
            Voice::Bass => "bass",
            Voice::Melody => "melody",
        }
    }
}

/// One annotated chord with its aligned bass and melody events.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Sonority {
    pub chord: ChordSymbol,
    pub bass: NoteEvent,
    pub melody: NoteEvent,
}

impl Sonority {
    pub fn voice(&self, voice: Voice) -> NoteEvent {
        match voice {
            Voice::Bass => self.bass,
            Voice::Melody => self.melody,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Phrase {
    pub id: String,
    pub key_root: PitchClass,
    pub mode: Mode,
    pub sonorities: Vec<Sonority>,
}

impl Phrase {
    pub fn key(&self) -> Key {
        Key::new(self.key_root, self.mode)
    }

    pub fn line(&self, voice: Voice) -> Vec<NoteEvent> {
        self.sonorities.iter().map(|s| s.voice(voice)).collect()
    }

    pub fn chords(&self) -> Vec<ChordSymbol> {
        self.sonorities.iter().map(|s| s.chord).collect()
    }

    /// Space-separated Harte progression, e.g. `C:min G:maj G:maj C:min`.
    pub fn harte_progression(&self) -> String {
        self.chords()
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join(" ")
    }
}
