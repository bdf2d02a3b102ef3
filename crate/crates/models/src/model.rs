use chordgen_core::dataset::DatasetRecord;
use chordgen_core::tokenizer::{CHORD_VOCAB_SIZE, REMI_VOCAB_SIZE};
use chordgen_core::Voice;
use chordgen_nn::layers::{Decoder, Embedding, Encoder, Linear};
use chordgen_nn::{Graph, ParamStore, Var};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{ModelDims, ModelError, StrategyKind};

const HEAD_INIT_STD: f64 = 0.02;

/// Which token stream a decoder emits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Bass,
    Melody,
    Interleaved,
}

impl Target {
    pub fn name(self) -> &'static str {
        match self {
            Target::Bass => "bass",
            Target::Melody => "melody",
            Target::Interleaved => "interleaved",
        }
    }

    pub fn sequence(self, r: &DatasetRecord) -> &[u32] {
        match self {
            Target::Bass => r.voice(Voice::Bass).content(),
            Target::Melody => r.voice(Voice::Melody).content(),
            Target::Interleaved => r.interleaved.content(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ChordEncoder {
    pub embed: Embedding,
    pub encoder: Encoder,
}

#[derive(Clone, Debug)]
pub struct VoiceDecoder {
    pub target: Target,
    pub embed: Embedding,
    pub decoder: Decoder,
    pub head: Linear,
    /// Embedding of the previously generated voice, appended to the memory.
    pub condition: Option<Embedding>,
}

/// Parameters and wiring for one strategy. Decoders are listed in
/// generation order.
#[derive(Clone, Debug)]
pub struct ModelBundle {
    pub kind: StrategyKind,
    pub dims: ModelDims,
    pub store: ParamStore<f32>,
    pub chord_encoder: Option<ChordEncoder>,
    pub decoders: Vec<VoiceDecoder>,
}

pub fn build_model(kind: StrategyKind, dims: &ModelDims, seed: u64) -> Result<ModelBundle, ModelError> {
    dims.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParamStore::new();
    let d = dims.d_model;

    let chord_encoder = kind.uses_chords().then(|| ChordEncoder {
        embed: Embedding::new(&mut store, "chord_encoder.embed", CHORD_VOCAB_SIZE, d, &mut rng),
        encoder: Encoder::new(
            &mut store,
            "chord_encoder",
            dims.encoder_layers,
            d,
            dims.encoder_heads,
            dims.d_ff,
            &mut rng,
        ),
    });

    let plan: &[(Target, bool)] = match kind {
        StrategyKind::NoChord | StrategyKind::ChordIndependent => {
            &[(Target::Bass, false), (Target::Melody, false)]
        }
        StrategyKind::ChordBassFirst => &[(Target::Bass, false), (Target::Melody, true)],
        StrategyKind::ChordMelodyFirst => &[(Target::Melody, false), (Target::Bass, true)],
        StrategyKind::ChordCoGen => &[(Target::Interleaved, false)],
    };
    let cross = kind.uses_chords();
    let decoders = plan
        .iter()
        .map(|&(target, conditioned)| {
            let name = format!("decoder.{}", target.name());
            VoiceDecoder {
                target,
                embed: Embedding::new(&mut store, &format!("{name}.embed"), REMI_VOCAB_SIZE, d, &mut rng),
                decoder: Decoder::new(
                    &mut store,
                    &name,
                    dims.decoder_layers,
                    d,
                    dims.decoder_heads,
                    dims.d_ff,
                    cross,
                    &mut rng,
                ),
                head: Linear::with_normal_init(
                    &mut store,
                    &format!("{name}.head"),
                    d,
                    REMI_VOCAB_SIZE,
                    HEAD_INIT_STD,
                    &mut rng,
                ),
                condition: conditioned.then(|| {
                    Embedding::new(&mut store, &format!("{name}.condition"), REMI_VOCAB_SIZE, d, &mut rng)
                }),
            }
        })
        .collect();

    Ok(ModelBundle {
        kind,
        dims: dims.clone(),
        store,
        chord_encoder,
        decoders,
    })
}

impl ModelBundle {
    pub fn num_parameters(&self) -> usize {
        self.store.num_scalars()
    }

    /// Encoded chord sequence, or `None` for the unconditioned variant.
    pub fn chord_memory(&self, g: &mut Graph<'_, f32>, chords: &[u32]) -> Result<Option<Var>, ModelError> {
        let Some(enc) = &self.chord_encoder else {
            return Ok(None);
        };
        if chords.is_empty() {
            return Err(ModelError::EmptyChords);
        }
        let chords = &chords[..chords.len().min(self.dims.max_len)];
        let x = enc.embed.forward_with_positions(g, chords)?;
        let x = g.dropout(x);
        Ok(Some(enc.encoder.forward(g, x)?))
    }

    /// Cross-attention memory for decoder `idx`: the chord encoding, followed
    /// by the embedded `prior` voice for a staged second decoder.
    pub fn decoder_memory(
        &self,
        g: &mut Graph<'_, f32>,
        idx: usize,
        chord_mem: Option<Var>,
        prior: Option<&[u32]>,
    ) -> Result<Option<Var>, ModelError> {
        let dec = &self.decoders[idx];
        let Some(cond) = &dec.condition else {
            return Ok(chord_mem);
        };
        let prior = prior.ok_or_else(|| {
            ModelError::InvalidConfig(format!("{} decoder needs the prior voice", dec.target.name()))
        })?;
        let mem = chord_mem.ok_or(ModelError::EmptyChords)?;
        let prior = &prior[..prior.len().min(self.dims.max_len)];
        if prior.is_empty() {
            return Ok(Some(mem));
        }
        let c = cond.forward_with_positions(g, prior)?;
        Ok(Some(g.concat_rows(&[mem, c])))
    }

    /// Next-token logits (`len(input) × vocab`) from decoder `idx`.
    pub fn decoder_logits(
        &self,
        g: &mut Graph<'_, f32>,
        idx: usize,
        input: &[u32],
        memory: Option<Var>,
    ) -> Result<Var, ModelError> {
        let dec = &self.decoders[idx];
        let x = dec.embed.forward_with_positions(g, input)?;
        let x = g.dropout(x);
        let h = dec.decoder.forward(g, x, memory)?;
        Ok(dec.head.forward(g, h)?)
    }

    /// Summed token cross-entropy of one record under teacher forcing, and
    /// the number of predicted tokens.
    pub fn record_loss(&self, g: &mut Graph<'_, f32>, r: &DatasetRecord) -> Result<(Var, usize), ModelError> {
        let chord_mem = self.chord_memory(g, r.chords.content())?;
        let mut total: Option<Var> = None;
        let mut count = 0;
        for (idx, dec) in self.decoders.iter().enumerate() {
            let seq = dec.target.sequence(r);
            if seq.len() < 2 {
                return Err(ModelError::SequenceTooShort(r.id.clone()));
            }
            let prior = (idx > 0).then(|| self.decoders[0].target.sequence(r));
            let memory = self.decoder_memory(g, idx, chord_mem, prior)?;
            let logits = self.decoder_logits(g, idx, &seq[..seq.len() - 1], memory)?;
            let targets: Vec<usize> = seq[1..].iter().map(|t| *t as usize).collect();
            let mask = vec![true; targets.len()];
            let ce = g.cross_entropy(logits, &targets, &mask)?;
            let summed = g.scale(ce, targets.len() as f32);
            total = Some(match total {
                Some(t) => g.add(t, summed),
                None => summed,
            });
            count += targets.len();
        }
        Ok((total.expect("at least one decoder"), count))
    }
}
