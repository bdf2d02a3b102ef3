//! Line-delimited JSON dataset files: one tokenized phrase per line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kern::{read_kern_dir, KernError};
use crate::reduction::{reduce_phrase, transpose_to_c};
use crate::score::Phrase;
use crate::tokenizer::{
    encode_chords, encode_interleaved, encode_voice, ChordTokenSequence, TokenSequence,
};
use crate::Voice;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {source}")]
    Parse {
        path: String,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub id: String,
    pub set: String,
    pub chords: ChordTokenSequence,
    pub bass: TokenSequence,
    pub melody: TokenSequence,
    pub interleaved: TokenSequence,
    /// The reduced, transposed phrase the sequences were built from.
    pub phrase: Phrase,
}

impl DatasetRecord {
    pub fn from_phrase(set: &str, phrase: Phrase) -> Self {
        DatasetRecord {
            id: phrase.id.clone(),
            set: set.to_string(),
            chords: encode_chords(&phrase.chords()),
            bass: encode_voice(&phrase, Voice::Bass),
            melody: encode_voice(&phrase, Voice::Melody),
            interleaved: encode_interleaved(&phrase),
            phrase,
        }
    }

    pub fn voice(&self, voice: Voice) -> &TokenSequence {
        match voice {
            Voice::Bass => &self.bass,
            Voice::Melody => &self.melody,
        }
    }
}

/// Records built from a kern corpus plus the files that could not be used.
#[derive(Debug, Default)]
pub struct CorpusLoad {
    pub records: Vec<DatasetRecord>,
    /// `(phrase id, reason)` per rejected file.
    pub failures: Vec<(String, String)>,
}

/// Parses, reduces, transposes to C and tokenizes every phrase under
/// `root/<set>/`.
pub fn load_kern_corpus(root: &Path) -> Result<CorpusLoad, KernError> {
    let mut out = CorpusLoad::default();
    for entry in read_kern_dir(root)? {
        let phrase = entry
            .phrase
            .map_err(|e| e.to_string())
            .and_then(|raw| reduce_phrase(&raw).map_err(|e| e.to_string()));
        match phrase {
            Ok(p) => out
                .records
                .push(DatasetRecord::from_phrase(&entry.set, transpose_to_c(&p))),
            Err(reason) => out.failures.push((entry.id, reason)),
        }
    }
    Ok(out)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), DatasetError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    for r in rows {
        let line = serde_json::to_string(r).expect("dataset rows serialize");
        writeln!(w, "{line}").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, DatasetError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut rows = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        rows.push(serde_json::from_str(&line).map_err(|source| DatasetError::Parse {
            path: path.display().to_string(),
            line: i + 1,
            source,
        })?);
    }
    Ok(rows)
}
