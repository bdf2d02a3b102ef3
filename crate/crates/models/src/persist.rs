use std::collections::BTreeSet;
use std::path::Path;

use chordgen_core::tokenizer::{ChordVocab, RemiVocab};
use chordgen_nn::checkpoint;
use chordgen_nn::{AdamState, NnError};
use serde::{Deserialize, Serialize};

use crate::{build_model, ModelBundle, ModelDims, ModelError, StrategyKind};

#[derive(Debug, Serialize, Deserialize)]
struct Meta {
    kind: StrategyKind,
    dims: ModelDims,
    remi_vocab: RemiVocab,
    chord_vocab: ChordVocab,
    #[serde(default)]
    extra: serde_json::Value,
}

fn invalid(msg: impl Into<String>) -> ModelError {
    ModelError::Nn(NnError::InvalidCheckpoint(msg.into()))
}

/// Writes parameters, configuration, vocabularies and (optionally) the
/// optimizer state; `extra` is stored verbatim.
pub fn save_bundle(
    path: &Path,
    bundle: &ModelBundle,
    adam: Option<&AdamState<f32>>,
    extra: serde_json::Value,
) -> Result<(), ModelError> {
    let meta = Meta {
        kind: bundle.kind,
        dims: bundle.dims.clone(),
        remi_vocab: RemiVocab::default(),
        chord_vocab: ChordVocab::default(),
        extra,
    };
    let meta = serde_json::to_value(&meta).map_err(|e| invalid(e.to_string()))?;
    let step = adam.map_or(0, |a| a.step);
    checkpoint::save(path, &meta, step, &bundle.store, adam)?;
    Ok(())
}

#[derive(Debug)]
pub struct LoadedBundle {
    pub bundle: ModelBundle,
    pub adam: Option<AdamState<f32>>,
    pub step: u64,
    pub extra: serde_json::Value,
}

fn read_meta(value: serde_json::Value) -> Result<Meta, ModelError> {
    let meta: Meta = serde_json::from_value(value).map_err(|e| invalid(format!("metadata: {e}")))?;
    if meta.remi_vocab != RemiVocab::default() || meta.chord_vocab != ChordVocab::default() {
        return Err(invalid("checkpoint vocabulary differs from this build"));
    }
    Ok(meta)
}

pub fn load_bundle(path: &Path) -> Result<LoadedBundle, ModelError> {
    let ck = checkpoint::load::<f32>(path)?;
    let meta = read_meta(ck.meta.clone())?;
    let mut bundle = build_model(meta.kind, &meta.dims, 0)?;
    checkpoint::load_into(&ck, &mut bundle.store)?;
    Ok(LoadedBundle {
        bundle,
        adam: ck.adam,
        step: ck.step,
        extra: meta.extra,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DecoderInfo {
    pub name: String,
    pub layers: usize,
    pub heads: usize,
    pub cross_attention: bool,
    pub conditioned: bool,
}

/// Structure recovered from a checkpoint's parameter names.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Architecture {
    pub kind: StrategyKind,
    pub encoders: usize,
    pub encoder_layers: usize,
    pub encoder_heads: usize,
    pub decoders: Vec<DecoderInfo>,
}

fn layer_indices<'a>(names: impl Iterator<Item = &'a str>, prefix: &str) -> BTreeSet<usize> {
    names
        .filter_map(|n| n.strip_prefix(prefix))
        .filter_map(|rest| rest.strip_prefix("layer"))
        .filter_map(|rest| rest.split('.').next()?.parse().ok())
        .collect()
}

pub fn inspect(path: &Path) -> Result<Architecture, ModelError> {
    let ck = checkpoint::load::<f32>(path)?;
    let meta = read_meta(ck.meta)?;
    let names: Vec<&str> = ck.params.iter().map(|(n, _)| n).collect();
    let encoders = names
        .iter()
        .filter_map(|n| n.strip_prefix("chord_encoder.embed"))
        .count();
    let encoder_layers = layer_indices(names.iter().copied(), "chord_encoder.").len();
    let mut decoder_names: Vec<String> = Vec::new();
    for n in &names {
        if let Some(rest) = n.strip_prefix("decoder.") {
            let d = rest.split('.').next().unwrap_or_default().to_string();
            if !decoder_names.contains(&d) {
                decoder_names.push(d);
            }
        }
    }
    let decoders = decoder_names
        .into_iter()
        .map(|d| {
            let prefix = format!("decoder.{d}.");
            DecoderInfo {
                layers: layer_indices(names.iter().copied(), &prefix).len(),
                heads: meta.dims.decoder_heads,
                cross_attention: names.iter().any(|n| n.starts_with(&prefix) && n.contains(".cross_attn.")),
                conditioned: names.iter().any(|n| n.starts_with(&format!("{prefix}condition."))),
                name: d,
            }
        })
        .collect();
    Ok(Architecture {
        kind: meta.kind,
        encoders,
        encoder_layers,
        encoder_heads: if encoders > 0 { meta.dims.encoder_heads } else { 0 },
        decoders,
    })
}
