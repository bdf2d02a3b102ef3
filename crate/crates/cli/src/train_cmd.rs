use std::path::PathBuf;

use chordgen_core::dataset::{read_jsonl, DatasetRecord};
use chordgen_models::{build_model, load_bundle, save_bundle, train, write_loss_csv, StrategyKind};
use serde::Serialize;

use crate::config::Config;
use crate::prepare::{resolve_dataset, TRAIN_FILE};
use crate::CliError;

pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const LOSS_FILE: &str = "loss.csv";

#[derive(Clone, Debug)]
pub struct TrainArgs {
    pub dataset: PathBuf,
    pub strategy: String,
    pub out_dir: PathBuf,
    pub config: Config,
    pub resume: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize)]
pub struct TrainSummary {
    pub strategy: StrategyKind,
    pub first_step: u64,
    /// Updates applied in total, including any resumed ones.
    pub total_steps: u64,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub reached_target: bool,
    pub parameters: usize,
    pub checkpoint: PathBuf,
}

pub fn train_cmd(args: &TrainArgs) -> Result<TrainSummary, CliError> {
    let kind: StrategyKind = args.strategy.parse()?;
    args.config.model.validate()?;
    args.config.train.validate()?;
    let path = resolve_dataset(&args.dataset, TRAIN_FILE);
    let data: Vec<DatasetRecord> = read_jsonl(&path)?;
    if data.is_empty() {
        return Err(CliError::EmptyDataset(path.display().to_string()));
    }

    let (mut bundle, adam) = match &args.resume {
        Some(ckpt) => {
            let loaded = load_bundle(ckpt)?;
            if loaded.bundle.kind != kind {
                return Err(CliError::InvalidConfig(format!(
                    "checkpoint holds {}, not {kind}",
                    loaded.bundle.kind
                )));
            }
            if loaded.adam.is_none() {
                return Err(CliError::InvalidConfig("checkpoint has no optimizer state to resume".into()));
            }
            (loaded.bundle, loaded.adam)
        }
        None => (build_model(kind, &args.config.model, args.config.train.seed)?, None),
    };

    let outcome = train(&mut bundle, &data, &args.config.train, adam)?;
    let (Some(first), Some(last)) = (outcome.history.first(), outcome.history.last()) else {
        return Err(CliError::InvalidConfig("no training steps left to run".into()));
    };
    let summary = TrainSummary {
        strategy: kind,
        first_step: first.step,
        total_steps: outcome.adam.step,
        initial_loss: first.loss,
        final_loss: last.loss,
        reached_target: outcome.reached_target,
        parameters: bundle.num_parameters(),
        checkpoint: args.out_dir.join(CHECKPOINT_FILE),
    };

    std::fs::create_dir_all(&args.out_dir).map_err(CliError::io(&args.out_dir))?;
    let extra = serde_json::json!({ "train": args.config.train, "dataset": path });
    save_bundle(&summary.checkpoint, &bundle, Some(&outcome.adam), extra)?;
    write_loss_csv(&args.out_dir.join(LOSS_FILE), &outcome.history)?;
    Ok(summary)
}
