use std::io::Write;
use std::path::Path;

use chordgen_core::dataset::DatasetRecord;
use chordgen_nn::{adam_step, lr_at, AdamState, Graph};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{ModelBundle, ModelError, TrainConfig};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    /// Zero-based update index.
    pub step: u64,
    pub lr: f64,
    /// Per-token batch loss before the update.
    pub loss: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub history: Vec<LossRecord>,
    pub adam: AdamState<f32>,
    pub reached_target: bool,
}

/// Per-token cross-entropy over a batch without touching parameters.
pub fn batch_loss(bundle: &ModelBundle, batch: &[&DatasetRecord]) -> Result<f64, ModelError> {
    let mut g = Graph::new(&bundle.store).no_grad();
    let mut total = 0.0;
    let mut count = 0;
    for r in batch {
        let (l, n) = bundle.record_loss(&mut g, r)?;
        total += g.scalar(l) as f64;
        count += n;
    }
    if count == 0 {
        return Err(ModelError::EmptyDataset);
    }
    Ok(total / count as f64)
}

fn step_seed(seed: u64, step: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ step.wrapping_add(1).wrapping_mul(0xBF58_476D_1CE4_E5B9)
}

/// Teacher-forced training with Adam and linear warmup. Pass the optimizer
/// state of an earlier run to resume; its step counter continues.
pub fn train(
    bundle: &mut ModelBundle,
    data: &[DatasetRecord],
    cfg: &TrainConfig,
    resume: Option<AdamState<f32>>,
) -> Result<TrainOutcome, ModelError> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    let mut adam = match resume {
        Some(st) => {
            if st.m.len() != bundle.store.len() {
                return Err(ModelError::InvalidConfig("optimizer state does not match the model".into()));
            }
            st
        }
        None => AdamState::new(&bundle.store),
    };
    let steps_per_epoch = data.len().div_ceil(cfg.batch_size) as u64;
    let mut total_steps = cfg.epochs * steps_per_epoch;
    if let Some(max) = cfg.max_steps {
        total_steps = total_steps.min(max);
    }
    let dropout = bundle.dims.dropout;
    let mut history = Vec::new();
    let mut reached_target = false;
    let mut order: Vec<usize> = (0..data.len()).collect();

    while adam.step < total_steps {
        let step = adam.step;
        let epoch = step / steps_per_epoch;
        let offset = (step % steps_per_epoch) as usize * cfg.batch_size;
        // Derived from the epoch alone so resumed runs see the same order.
        order.sort_unstable();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed ^ epoch.wrapping_mul(0xD6E8_FEB8_6659_FD93)));
        let batch = &order[offset..(offset + cfg.batch_size).min(data.len())];
        let lr = lr_at(cfg.base_lr, cfg.warmup, step);

        let (loss, grads) = {
            let mut g = Graph::new(&bundle.store).with_dropout(dropout, step_seed(cfg.seed, step));
            let mut sum = None;
            let mut count = 0usize;
            for &i in batch {
                let (l, n) = bundle.record_loss(&mut g, &data[i])?;
                sum = Some(match sum {
                    Some(s) => g.add(s, l),
                    None => l,
                });
                count += n;
            }
            let loss = g.scale(sum.expect("non-empty batch"), 1.0 / count as f32);
            g.backward(loss);
            (g.scalar(loss) as f64, g.param_grads())
        };
        history.push(LossRecord { step, lr, loss });
        log::debug!("step {step} lr {lr:.3e} loss {loss:.4}");
        if !loss.is_finite() {
            return Err(ModelError::InvalidConfig(format!("loss diverged at step {step}")));
        }
        if cfg.target_loss.is_some_and(|t| loss < t) {
            reached_target = true;
            break;
        }
        adam_step(&mut bundle.store, &grads, &mut adam, lr);
    }
    Ok(TrainOutcome { history, adam, reached_target })
}

pub fn write_loss_csv(path: &Path, history: &[LossRecord]) -> Result<(), ModelError> {
    let io = |source| ModelError::Io { path: path.display().to_string(), source };
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    writeln!(f, "step,lr,loss").map_err(io)?;
    for r in history {
        writeln!(f, "{},{:e},{}", r.step, r.lr, r.loss).map_err(io)?;
    }
    f.flush().map_err(io)
}
