use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chordgen_core::dataset::{read_jsonl, DatasetRecord};
use chordgen_core::metrics::{phrase_metrics, table_rows, PhraseMetrics};
use chordgen_core::score::Phrase;
use chordgen_core::stats::{significance_table, SignificanceTable, VariantInput};
use chordgen_models::StrategyKind;
use serde::{Deserialize, Serialize};

use crate::config::EvaluateConfig;
use crate::generate_cmd::{GenerateRun, GeneratedRecord, GENERATED_FILE, RUN_FILE};
use crate::prepare::{write_json, write_text};
use crate::report::{csv_line, render_csv, render_markdown, render_text};
use crate::CliError;

pub const REPORT_FILE: &str = "report.json";

#[derive(Clone, Debug)]
pub struct EvaluateArgs {
    pub ground_truth: PathBuf,
    pub generated: Vec<PathBuf>,
    pub out_dir: PathBuf,
    pub config: EvaluateConfig,
}

/// A generated corpus tagged with the strategy that produced it.
#[derive(Clone, Debug)]
pub struct VariantPhrases {
    pub strategy: StrategyKind,
    pub phrases: Vec<Phrase>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub entropy_base: f64,
    pub phrases: usize,
    pub table: SignificanceTable,
    pub ground_truth_metrics: Vec<PhraseMetrics>,
    pub variant_metrics: BTreeMap<String, Vec<PhraseMetrics>>,
}

/// Aligns each variant to the ground-truth ids and builds the table. Variant
/// columns follow the canonical strategy order.
pub fn evaluate_phrases(
    ground_truth: &[Phrase],
    variants: &[VariantPhrases],
    cfg: &EvaluateConfig,
) -> Result<Evaluation, CliError> {
    cfg.validate()?;
    if ground_truth.is_empty() {
        return Err(CliError::EmptyDataset("ground truth has no phrases".into()));
    }
    let gt_metrics: Vec<PhraseMetrics> =
        ground_truth.iter().map(|p| phrase_metrics(p, true, cfg.entropy_base)).collect();

    let mut ordered: Vec<&VariantPhrases> = variants.iter().collect();
    ordered.sort_by_key(|v| StrategyKind::ALL.iter().position(|k| *k == v.strategy));
    if let Some(w) = ordered.windows(2).find(|w| w[0].strategy == w[1].strategy) {
        return Err(CliError::InvalidConfig(format!("strategy {} given twice", w[0].strategy)));
    }

    let mut aligned = Vec::with_capacity(ordered.len());
    for v in &ordered {
        let by_id: BTreeMap<&str, &Phrase> = v.phrases.iter().map(|p| (p.id.as_str(), p)).collect();
        if by_id.len() != v.phrases.len() {
            return Err(CliError::Alignment(format!("{} has duplicate phrase ids", v.strategy)));
        }
        let mut metrics = Vec::with_capacity(ground_truth.len());
        for gt in ground_truth {
            let p = by_id.get(gt.id.as_str()).ok_or_else(|| {
                CliError::Alignment(format!("{} is missing phrase {}", v.strategy, gt.id))
            })?;
            metrics.push(phrase_metrics(p, v.strategy.uses_chords(), cfg.entropy_base));
        }
        if v.phrases.len() != ground_truth.len() {
            let extra = v
                .phrases
                .iter()
                .find(|p| !ground_truth.iter().any(|g| g.id == p.id))
                .map_or_else(String::new, |p| p.id.clone());
            return Err(CliError::Alignment(format!("{} has extra phrase {extra}", v.strategy)));
        }
        aligned.push((v.strategy, metrics));
    }

    let inputs: Vec<VariantInput<'_>> = aligned
        .iter()
        .map(|(k, m)| VariantInput {
            name: k.label(),
            chord_conditioned: k.uses_chords(),
            metrics: m,
        })
        .collect();
    let table = significance_table(&gt_metrics, &inputs, cfg.alpha);
    Ok(Evaluation {
        entropy_base: cfg.entropy_base,
        phrases: ground_truth.len(),
        table,
        variant_metrics: aligned.into_iter().map(|(k, m)| (k.name().to_string(), m)).collect(),
        ground_truth_metrics: gt_metrics,
    })
}

pub fn metrics_csv(rows: &[PhraseMetrics]) -> String {
    let cols = table_rows();
    let mut head = vec!["id".to_string()];
    head.extend(cols.iter().map(|r| r.label()));
    let mut out = csv_line(&head);
    for m in rows {
        let mut r = vec![m.id.clone()];
        r.extend(cols.iter().map(|c| c.value(m).map_or_else(|| "NA".to_string(), |v| v.to_string())));
        out += &csv_line(&r);
    }
    out
}

fn load_generated(dir: &Path) -> Result<VariantPhrases, CliError> {
    let run_path = dir.join(RUN_FILE);
    let text = std::fs::read_to_string(&run_path).map_err(CliError::io(&run_path))?;
    let run: GenerateRun = serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", run_path.display())))?;
    let records: Vec<GeneratedRecord> = read_jsonl(&dir.join(GENERATED_FILE))?;
    Ok(VariantPhrases {
        strategy: run.strategy,
        phrases: records.into_iter().map(|r| r.phrase).collect(),
    })
}

pub fn evaluate_cmd(args: &EvaluateArgs) -> Result<Evaluation, CliError> {
    args.config.validate()?;
    let gt: Vec<DatasetRecord> = read_jsonl(&args.ground_truth)?;
    let gt: Vec<Phrase> = gt.into_iter().map(|r| r.phrase).collect();
    let variants = args
        .generated
        .iter()
        .map(|d| load_generated(d))
        .collect::<Result<Vec<_>, _>>()?;
    let eval = evaluate_phrases(&gt, &variants, &args.config)?;
    write_evaluation(&args.out_dir, &eval)?;
    Ok(eval)
}

pub fn write_evaluation(out: &Path, eval: &Evaluation) -> Result<(), CliError> {
    std::fs::create_dir_all(out).map_err(CliError::io(out))?;
    write_text(&out.join("metrics").join("ground_truth.csv"), &metrics_csv(&eval.ground_truth_metrics))?;
    for (name, m) in &eval.variant_metrics {
        write_text(&out.join("metrics").join(format!("{name}.csv")), &metrics_csv(m))?;
    }
    write_text(&out.join("table.txt"), &render_text(&eval.table))?;
    write_text(&out.join("table.md"), &render_markdown(&eval.table))?;
    write_text(&out.join("table.csv"), &render_csv(&eval.table))?;
    write_json(&out.join(REPORT_FILE), eval)
}

pub fn read_evaluation(dir: &Path) -> Result<Evaluation, CliError> {
    let path = if dir.is_dir() { dir.join(REPORT_FILE) } else { dir.to_path_buf() };
    let text = std::fs::read_to_string(&path).map_err(CliError::io(&path))?;
    serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}
