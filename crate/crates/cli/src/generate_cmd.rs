use std::path::{Path, PathBuf};

use chordgen_core::dataset::{read_jsonl, write_jsonl, DatasetRecord};
use chordgen_core::midi::to_midi;
use chordgen_core::score::{ChordSymbol, Phrase};
use chordgen_core::tokenizer::{encode_chords, parse_harte, Token};
use chordgen_core::Voice;
use chordgen_models::{assemble_phrase, generate, load_bundle, GenerationConfig, StrategyKind};
use serde::{Deserialize, Serialize};

use crate::prepare::{write_json, write_text};
use crate::CliError;

pub const GENERATED_FILE: &str = "generated.jsonl";
pub const RUN_FILE: &str = "generate.json";

#[derive(Clone, Debug)]
pub enum ChordSource {
    /// One whitespace-separated Harte progression per line.
    File(PathBuf),
    /// Progressions of a prepared dataset, keeping its phrase ids.
    Dataset(PathBuf),
}

#[derive(Clone, Debug)]
pub struct GenerateArgs {
    pub checkpoint: PathBuf,
    pub source: ChordSource,
    pub out_dir: PathBuf,
    pub config: GenerationConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratedRecord {
    pub id: String,
    pub strategy: StrategyKind,
    pub seed: u64,
    pub bass_tokens: Vec<u32>,
    pub melody_tokens: Vec<u32>,
    pub interleaved_tokens: Option<Vec<u32>>,
    pub repairs: usize,
    pub phrase: Phrase,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerateRun {
    pub strategy: StrategyKind,
    pub checkpoint: PathBuf,
    pub config: GenerationConfig,
    pub count: usize,
}

/// Reads a progression file; blank lines and `#` comments are skipped.
pub fn read_progressions(path: &Path) -> Result<Vec<(String, Vec<ChordSymbol>)>, CliError> {
    let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let chords = line
            .split_whitespace()
            .map(|tok| {
                parse_harte(tok).map_err(|_| CliError::UnparseableChord {
                    chord: tok.to_string(),
                    location: format!("{}:{}", path.display(), i + 1),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        out.push((format!("line{:04}", i + 1), chords));
    }
    Ok(out)
}

fn phrase_seed(base: u64, id: &str) -> u64 {
    // FNV-1a keeps per-phrase streams independent of input order.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in id.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h ^ base
}

fn token_text(ids: &[u32]) -> String {
    ids.iter()
        .map(|&i| Token::from_id(i).map_or_else(|| format!("?{i}"), Token::name))
        .collect::<Vec<_>>()
        .join(" ")
}

fn id_path(root: &Path, id: &str, suffix: &str) -> PathBuf {
    let mut p = root.to_path_buf();
    for part in id.split('/') {
        p.push(part);
    }
    let name = format!("{}{suffix}", p.file_name().map(|s| s.to_string_lossy()).unwrap_or_default());
    p.set_file_name(name);
    p
}

pub fn generate_cmd(args: &GenerateArgs) -> Result<GenerateRun, CliError> {
    args.config.validate()?;
    let progressions = match &args.source {
        ChordSource::File(p) => read_progressions(p)?,
        ChordSource::Dataset(p) => read_jsonl::<DatasetRecord>(p)?
            .into_iter()
            .map(|r| (r.id, r.phrase.chords()))
            .collect(),
    };
    if progressions.is_empty() {
        return Err(CliError::EmptyDataset("no chord progressions to generate from".into()));
    }
    if let Some((id, _)) = progressions.iter().find(|(_, c)| c.is_empty()) {
        return Err(CliError::Data(format!("progression {id} has no chords")));
    }
    let loaded = load_bundle(&args.checkpoint)?;
    let bundle = loaded.bundle;

    let mut records = Vec::with_capacity(progressions.len());
    for (id, chords) in &progressions {
        let seed = phrase_seed(args.config.seed, id);
        let cfg = GenerationConfig { seed, ..args.config.clone() };
        let ids = encode_chords(chords);
        let out = generate(&bundle, ids.content(), &cfg)?;
        let pair = out.decode();
        records.push(GeneratedRecord {
            id: id.clone(),
            strategy: bundle.kind,
            seed,
            phrase: assemble_phrase(id, chords, &pair),
            repairs: pair.repairs,
            bass_tokens: out.bass,
            melody_tokens: out.melody,
            interleaved_tokens: out.interleaved,
        });
    }

    let out = &args.out_dir;
    std::fs::create_dir_all(out).map_err(CliError::io(out))?;
    write_jsonl(&out.join(GENERATED_FILE), &records)?;
    for r in &records {
        for voice in Voice::BOTH {
            let path = id_path(&out.join("midi"), &r.id, &format!(".{}.mid", voice.name()));
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent).map_err(CliError::io(parent))?;
            }
            std::fs::write(&path, to_midi(&r.phrase, voice)).map_err(CliError::io(&path))?;
        }
        let mut dump = format!("chords: {}\n", r.phrase.harte_progression());
        dump += &format!("bass: {}\n", token_text(&r.bass_tokens));
        dump += &format!("melody: {}\n", token_text(&r.melody_tokens));
        if let Some(ids) = &r.interleaved_tokens {
            dump += &format!("interleaved: {}\n", token_text(ids));
        }
        write_text(&id_path(&out.join("tokens"), &r.id, ".txt"), &dump)?;
    }
    let run = GenerateRun {
        strategy: bundle.kind,
        checkpoint: args.checkpoint.clone(),
        config: args.config.clone(),
        count: records.len(),
    };
    write_json(&out.join(RUN_FILE), &run)?;
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn progression_file_parsing() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.txt");
        std::fs::write(&p, "# comment\nC:min G:maj G:maj C:min\n\nF:maj C:maj\n").unwrap();
        let progs = read_progressions(&p).unwrap();
        assert_eq!(progs.len(), 2);
        assert_eq!(progs[0].0, "line0002");
        assert_eq!(progs[0].1.len(), 4);
        std::fs::write(&p, "C:min G:dom7\n").unwrap();
        match read_progressions(&p) {
            Err(CliError::UnparseableChord { chord, location }) => {
                assert_eq!(chord, "G:dom7");
                assert!(location.ends_with(":1"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn ids_map_to_nested_paths() {
        let p = id_path(Path::new("/o"), "set_a/phrase01", ".bass.mid");
        assert_eq!(p, PathBuf::from("/o/set_a/phrase01.bass.mid"));
    }
}
