use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use chordgen_core::dataset::{load_kern_corpus, write_jsonl, DatasetRecord};
use chordgen_core::tokenizer::{ChordVocab, RemiVocab};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const TRAIN_FILE: &str = "train.jsonl";
pub const TEST_FILE: &str = "test.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug)]
pub struct PrepareArgs {
    pub kern_dir: PathBuf,
    pub out_dir: PathBuf,
    pub test_sets: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Failure {
    pub id: String,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub train_sets: Vec<String>,
    pub test_sets: Vec<String>,
    pub train_phrases: usize,
    pub test_phrases: usize,
    pub failures: Vec<Failure>,
    pub remi_vocab_size: usize,
    pub chord_vocab_size: usize,
}

/// Parses, reduces and tokenizes a kern corpus and writes a set-level
/// train/test split.
pub fn prepare(args: &PrepareArgs) -> Result<Manifest, CliError> {
    if !args.kern_dir.is_dir() {
        return Err(CliError::Data(format!("{} is not a directory", args.kern_dir.display())));
    }
    let load = load_kern_corpus(&args.kern_dir).map_err(|e| CliError::Data(e.to_string()))?;
    let failures: Vec<Failure> = load
        .failures
        .into_iter()
        .map(|(id, reason)| Failure { id, reason })
        .collect();
    for f in &failures {
        log::warn!("skipping {}: {}", f.id, f.reason);
    }
    if load.records.is_empty() {
        return Err(match failures.len() {
            0 => CliError::EmptyDataset(format!("no kern phrases under {}", args.kern_dir.display())),
            n => CliError::Data(format!("all {n} kern files failed; first: {}: {}", failures[0].id, failures[0].reason)),
        });
    }

    let found: BTreeSet<String> = load.records.iter().map(|r| r.set.clone()).collect();
    let held: BTreeSet<&str> = args.test_sets.iter().map(String::as_str).collect();
    if let Some(missing) = held.iter().find(|s| !found.contains(**s)) {
        return Err(CliError::InvalidConfig(format!(
            "test set `{missing}` not found; available sets: {}",
            found.iter().cloned().collect::<Vec<_>>().join(", ")
        )));
    }
    let (test, train): (Vec<DatasetRecord>, Vec<DatasetRecord>) =
        load.records.into_iter().partition(|r| held.contains(r.set.as_str()));

    let manifest = Manifest {
        train_sets: found.iter().filter(|s| !held.contains(s.as_str())).cloned().collect(),
        test_sets: held.iter().map(|s| s.to_string()).collect(),
        train_phrases: train.len(),
        test_phrases: test.len(),
        failures,
        remi_vocab_size: RemiVocab::default().len(),
        chord_vocab_size: ChordVocab::default().chords.len() + 1,
    };

    let out = &args.out_dir;
    std::fs::create_dir_all(out).map_err(CliError::io(out))?;
    write_jsonl(&out.join(TRAIN_FILE), &train)?;
    write_jsonl(&out.join(TEST_FILE), &test)?;
    write_json(&out.join(MANIFEST_FILE), &manifest)?;
    write_text(&out.join("remi_vocab.json"), &RemiVocab::default().to_json())?;
    write_json(&out.join("chord_vocab.json"), &ChordVocab::default())?;
    Ok(manifest)
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    write_text(path, &(text + "\n"))
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(CliError::io(parent))?;
    }
    std::fs::write(path, text).map_err(CliError::io(path))
}

/// Accepts either a dataset file or a prepared directory (using `default`).
pub fn resolve_dataset(path: &Path, default: &str) -> PathBuf {
    if path.is_dir() {
        path.join(default)
    } else {
        path.to_path_buf()
    }
}
