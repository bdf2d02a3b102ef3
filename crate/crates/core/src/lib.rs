//! Symbolic-score plumbing for chord-conditioned melody and bass generation.
//!
//! The pipeline runs kern phrase files through [`kern`] (parsing and Roman
//! numeral resolution), [`reduction`] (one quarter note per annotated chord,
//! transposition to C, MIDI export) and [`tokenizer`] (chord ids and REMI-style
//! token sequences). [`metrics`] and [`stats`] evaluate reduced phrases.

pub mod dataset;
pub mod kern;
pub mod metrics;
pub mod midi;
pub mod reduction;
pub mod score;
pub mod stats;
pub mod tokenizer;

pub use score::{
    chord_tones, interval_semitones, pitch_class, ChordSymbol, Key, Mode, NoteEvent, Phrase, Pitch,
    PitchClass, Quality, Sonority, Voice,
};
