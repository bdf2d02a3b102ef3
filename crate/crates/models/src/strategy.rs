use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ModelError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    NoChord,
    ChordIndependent,
    ChordBassFirst,
    ChordMelodyFirst,
    #[serde(rename = "chord_cogen")]
    ChordCoGen,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 5] = [
        StrategyKind::NoChord,
        StrategyKind::ChordIndependent,
        StrategyKind::ChordBassFirst,
        StrategyKind::ChordMelodyFirst,
        StrategyKind::ChordCoGen,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::NoChord => "no_chord",
            StrategyKind::ChordIndependent => "chord_independent",
            StrategyKind::ChordBassFirst => "chord_bass_first",
            StrategyKind::ChordMelodyFirst => "chord_melody_first",
            StrategyKind::ChordCoGen => "chord_cogen",
        }
    }

    /// Column heading used in reports.
    pub fn label(self) -> &'static str {
        match self {
            StrategyKind::NoChord => "No Chord",
            StrategyKind::ChordIndependent => "Chord Independent",
            StrategyKind::ChordBassFirst => "Chord Bass-1st",
            StrategyKind::ChordMelodyFirst => "Chord Melody-1st",
            StrategyKind::ChordCoGen => "Chord Co-Gen",
        }
    }

    pub fn uses_chords(self) -> bool {
        self != StrategyKind::NoChord
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyKind {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        StrategyKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = StrategyKind::ALL.iter().map(|k| k.name()).collect();
                ModelError::InvalidConfig(format!(
                    "unknown strategy `{s}`; expected one of {}",
                    names.join(", ")
                ))
            })
    }
}
