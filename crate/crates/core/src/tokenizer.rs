//! Chord-id and REMI-style token encodings.
//!
//! Chords use their own 25-symbol vocabulary (PAD plus 24 triads) that feeds
//! only the chord encoder. Voices use [`RemiVocab`]: special tokens, 128
//! pitches, 8 velocity bins and 4 quarter-multiple durations. There are no
//! bar or position tokens; the reduced grid is uniform.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::score::{ChordSymbol, NoteEvent, Phrase, Pitch, PitchClass, Quality, Voice};

/// Fixed sequence length for every encoder and decoder input.
pub const MAX_LEN: usize = 128;
pub const CHORD_PAD: u32 = 0;
pub const CHORD_VOCAB_SIZE: usize = 25;

pub const PAD: u32 = 0;
pub const BOS: u32 = 1;
pub const EOS: u32 = 2;
pub const REST: u32 = 3;
pub const VOICE_BASS: u32 = 4;
pub const VOICE_MEL: u32 = 5;
const PITCH_BASE: u32 = 6;
const VELOCITY_BASE: u32 = PITCH_BASE + 128;
pub const VELOCITY_BINS: u32 = 8;
const DURATION_BASE: u32 = VELOCITY_BASE + VELOCITY_BINS;
pub const MAX_DURATION: u32 = 4;
pub const REMI_VOCAB_SIZE: usize = (DURATION_BASE + MAX_DURATION) as usize;

const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum TokenizerError {
    #[error("unparseable chord {0:?}")]
    UnparseableChord(String),
    #[error("invalid vocabulary manifest: {0}")]
    InvalidManifest(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Token {
    Pad,
    Bos,
    Eos,
    Rest,
    VoiceBass,
    VoiceMel,
    Pitch(u8),
    Velocity(u8),
    Duration(u8),
}

impl Token {
    pub fn id(self) -> u32 {
        match self {
            Token::Pad => PAD,
            Token::Bos => BOS,
            Token::Eos => EOS,
            Token::Rest => REST,
            Token::VoiceBass => VOICE_BASS,
            Token::VoiceMel => VOICE_MEL,
            Token::Pitch(p) => PITCH_BASE + p as u32,
            Token::Velocity(b) => VELOCITY_BASE + b as u32,
            Token::Duration(d) => DURATION_BASE + d as u32 - 1,
        }
    }

    pub fn from_id(id: u32) -> Option<Token> {
        Some(match id {
            PAD => Token::Pad,
            BOS => Token::Bos,
            EOS => Token::Eos,
            REST => Token::Rest,
            VOICE_BASS => Token::VoiceBass,
            VOICE_MEL => Token::VoiceMel,
            i if i < VELOCITY_BASE => Token::Pitch((i - PITCH_BASE) as u8),
            i if i < DURATION_BASE => Token::Velocity((i - VELOCITY_BASE) as u8),
            i if i < REMI_VOCAB_SIZE as u32 => Token::Duration((i - DURATION_BASE + 1) as u8),
            _ => return None,
        })
    }

    pub fn name(self) -> String {
        match self {
            Token::Pad => "PAD".into(),
            Token::Bos => "BOS".into(),
            Token::Eos => "EOS".into(),
            Token::Rest => "REST".into(),
            Token::VoiceBass => "VOICE_BASS".into(),
            Token::VoiceMel => "VOICE_MEL".into(),
            Token::Pitch(p) => format!("Pitch_{p}"),
            Token::Velocity(b) => format!("Velocity_{b}"),
            Token::Duration(d) => format!("Duration_{d}"),
        }
    }
}

pub fn velocity_bin(velocity: u8) -> u8 {
    (velocity / 16).min(VELOCITY_BINS as u8 - 1)
}

/// Representative velocity of a bin (bin 4 → 64).
pub fn bin_velocity(bin: u8) -> u8 {
    (bin * 16).max(1)
}

/// REMI vocabulary description, serialized next to datasets and checkpoints.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemiVocab {
    pub version: u32,
    pub tokens: Vec<String>,
}

impl Default for RemiVocab {
    fn default() -> Self {
        RemiVocab {
            version: MANIFEST_VERSION,
            tokens: (0..REMI_VOCAB_SIZE as u32)
                .map(|i| Token::from_id(i).expect("dense ids").name())
                .collect(),
        }
    }
}

impl RemiVocab {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("vocab serializes")
    }

    /// Parses a manifest and checks it describes the layout this build encodes.
    pub fn from_json(s: &str) -> Result<Self, TokenizerError> {
        let v: RemiVocab =
            serde_json::from_str(s).map_err(|e| TokenizerError::InvalidManifest(e.to_string()))?;
        if v != RemiVocab::default() {
            return Err(TokenizerError::InvalidManifest(format!(
                "manifest version {} with {} tokens does not match the built-in layout",
                v.version,
                v.tokens.len()
            )));
        }
        Ok(v)
    }
}

/// Chord vocabulary manifest: index i + 1 is the id of `chords[i]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChordVocab {
    pub pad: u32,
    pub chords: Vec<ChordSymbol>,
}

impl Default for ChordVocab {
    fn default() -> Self {
        ChordVocab {
            pad: CHORD_PAD,
            chords: (1..=24).map(|i| id_to_chord(i).expect("valid id")).collect(),
        }
    }
}

/// Token ids padded or truncated to [`MAX_LEN`].
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenSequence(pub Vec<u32>);

impl TokenSequence {
    pub fn ids(&self) -> &[u32] {
        &self.0
    }

    /// Length without trailing padding.
    pub fn content_len(&self) -> usize {
        self.0.iter().rposition(|&t| t != PAD).map_or(0, |i| i + 1)
    }

    pub fn content(&self) -> &[u32] {
        &self.0[..self.content_len()]
    }
}

/// Chord ids in 1..=24 followed by PAD.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ChordTokenSequence(pub Vec<u32>);

impl ChordTokenSequence {
    pub fn ids(&self) -> &[u32] {
        &self.0
    }

    pub fn content(&self) -> &[u32] {
        let n = self.0.iter().take_while(|&&t| t != CHORD_PAD).count();
        &self.0[..n]
    }

    pub fn chords(&self) -> Vec<ChordSymbol> {
        self.content().iter().filter_map(|&i| id_to_chord(i)).collect()
    }
}

pub fn parse_harte(s: &str) -> Result<ChordSymbol, TokenizerError> {
    s.parse()
        .map_err(|_| TokenizerError::UnparseableChord(s.to_string()))
}

/// Parses a whitespace-separated progression such as `C:min G:maj G:maj C:min`.
pub fn parse_progression(s: &str) -> Result<Vec<ChordSymbol>, TokenizerError> {
    s.split_whitespace().map(parse_harte).collect()
}

pub fn chord_to_id(c: ChordSymbol) -> u32 {
    let q = match c.quality {
        Quality::Maj => 0,
        Quality::Min => 1,
    };
    2 * c.root.value() as u32 + q + 1
}

pub fn id_to_chord(id: u32) -> Option<ChordSymbol> {
    if !(1..=24).contains(&id) {
        return None;
    }
    let k = id - 1;
    let quality = if k % 2 == 0 { Quality::Maj } else { Quality::Min };
    Some(ChordSymbol::new(PitchClass::new((k / 2) as i32), quality))
}

fn fit(mut ids: Vec<u32>, what: &str) -> Vec<u32> {
    if ids.len() > MAX_LEN {
        log::debug!("truncating {what} sequence from {} to {MAX_LEN} tokens", ids.len());
        ids.truncate(MAX_LEN);
    }
    ids.resize(MAX_LEN, PAD);
    ids
}

pub fn encode_chords(chords: &[ChordSymbol]) -> ChordTokenSequence {
    ChordTokenSequence(fit(chords.iter().map(|&c| chord_to_id(c)).collect(), "chord"))
}

fn push_event(out: &mut Vec<u32>, e: NoteEvent) {
    match e.pitch {
        Some(p) => {
            out.push(Token::Pitch(p.midi()).id());
            out.push(Token::Velocity(velocity_bin(e.velocity)).id());
            out.push(Token::Duration(e.duration.clamp(1, MAX_DURATION as u8)).id());
        }
        None => out.push(REST),
    }
}

/// BOS, one (Pitch, Velocity, Duration) triple or REST per sonority, EOS.
pub fn encode_line(line: &[NoteEvent]) -> TokenSequence {
    let mut ids = vec![BOS];
    for &e in line {
        push_event(&mut ids, e);
    }
    ids.push(EOS);
    TokenSequence(fit(ids, "voice"))
}

pub fn encode_voice(p: &Phrase, voice: Voice) -> TokenSequence {
    encode_line(&p.line(voice))
}

/// BOS, then per sonority VOICE_BASS + bass event + VOICE_MEL + melody event, EOS.
pub fn encode_interleaved(p: &Phrase) -> TokenSequence {
    let mut ids = vec![BOS];
    for s in &p.sonorities {
        ids.push(VOICE_BASS);
        push_event(&mut ids, s.bass);
        ids.push(VOICE_MEL);
        push_event(&mut ids, s.melody);
    }
    ids.push(EOS);
    TokenSequence(fit(ids, "interleaved"))
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DecodedLine {
    pub events: Vec<NoteEvent>,
    /// Malformed fragments that were patched or dropped.
    pub repairs: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DecodedPair {
    pub bass: Vec<NoteEvent>,
    pub melody: Vec<NoteEvent>,
    pub repairs: usize,
}

enum Item {
    Event(NoteEvent),
    Marker(Voice),
}

/// Shared scanner: yields events and voice markers, counting repairs.
/// Stops at EOS or PAD.
fn scan(ids: &[u32], repairs: &mut usize) -> Vec<Item> {
    let mut items = Vec::new();
    let mut i = 0;
    if ids.first() == Some(&BOS) {
        i = 1;
    } else {
        *repairs += 1;
    }
    while i < ids.len() {
        let tok = Token::from_id(ids[i]);
        i += 1;
        match tok {
            Some(Token::Eos) | Some(Token::Pad) => break,
            Some(Token::Rest) => items.push(Item::Event(NoteEvent::rest())),
            Some(Token::VoiceBass) => items.push(Item::Marker(Voice::Bass)),
            Some(Token::VoiceMel) => items.push(Item::Marker(Voice::Melody)),
            Some(Token::Pitch(p)) => {
                let mut ev = NoteEvent::note(Pitch::new(p as i32).expect("pitch token in range"));
                let mut repaired = false;
                match ids.get(i).and_then(|&t| Token::from_id(t)) {
                    Some(Token::Velocity(b)) => {
                        ev.velocity = bin_velocity(b);
                        i += 1;
                    }
                    _ => repaired = true,
                }
                match ids.get(i).and_then(|&t| Token::from_id(t)) {
                    Some(Token::Duration(d)) => {
                        ev.duration = d;
                        i += 1;
                    }
                    _ => repaired = true,
                }
                if repaired {
                    *repairs += 1;
                }
                items.push(Item::Event(ev));
            }
            // Stray BOS, velocity or duration tokens and out-of-vocabulary ids.
            _ => *repairs += 1,
        }
    }
    items
}

pub fn decode_voice(ids: &[u32]) -> DecodedLine {
    let mut out = DecodedLine::default();
    for item in scan(ids, &mut out.repairs) {
        match item {
            Item::Event(e) => out.events.push(e),
            Item::Marker(_) => out.repairs += 1,
        }
    }
    out
}

/// Splits an interleaved sequence by voice markers. Each marker should be
/// followed by exactly one event; anything else counts as a repair.
pub fn decode_interleaved(ids: &[u32]) -> DecodedPair {
    let mut out = DecodedPair::default();
    let mut current: Option<(Voice, usize)> = None;
    let items = scan(ids, &mut out.repairs);
    let close = |cur: Option<(Voice, usize)>, repairs: &mut usize| {
        if let Some((_, n)) = cur {
            if n != 1 {
                *repairs += 1;
            }
        }
    };
    for item in items {
        match item {
            Item::Marker(v) => {
                close(current, &mut out.repairs);
                current = Some((v, 0));
            }
            Item::Event(e) => match current.as_mut() {
                Some((v, n)) => {
                    *n += 1;
                    match v {
                        Voice::Bass => out.bass.push(e),
                        Voice::Melody => out.melody.push(e),
                    }
                }
                None => out.repairs += 1,
            },
        }
    }
    close(current, &mut out.repairs);
    out
}
