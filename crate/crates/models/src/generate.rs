use chordgen_core::score::{ChordSymbol, Mode, NoteEvent, Phrase, PitchClass, Sonority};
use chordgen_core::tokenizer::{decode_interleaved, decode_voice, DecodedPair, BOS, EOS, PAD, VOICE_BASS, VOICE_MEL};
use chordgen_nn::Graph;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::sample::top_p_sample;
use crate::{GenerationConfig, ModelBundle, ModelError, Target};

/// Sampled token streams, each starting with BOS.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Generated {
    pub bass: Vec<u32>,
    pub melody: Vec<u32>,
    /// Raw output of the single-decoder variant.
    pub interleaved: Option<Vec<u32>>,
}

impl Generated {
    pub fn decode(&self) -> DecodedPair {
        match &self.interleaved {
            Some(ids) => decode_interleaved(ids),
            None => {
                let b = decode_voice(&self.bass);
                let m = decode_voice(&self.melody);
                DecodedPair {
                    bass: b.events,
                    melody: m.events,
                    repairs: b.repairs + m.repairs,
                }
            }
        }
    }
}

/// Splits an interleaved stream at its voice markers into two single-voice
/// streams framed by BOS and EOS.
pub fn split_interleaved(ids: &[u32]) -> (Vec<u32>, Vec<u32>) {
    let mut bass = vec![BOS];
    let mut melody = vec![BOS];
    let mut current: Option<&mut Vec<u32>> = None;
    for &t in ids {
        match t {
            EOS => break,
            BOS | PAD => {}
            VOICE_BASS => current = Some(&mut bass),
            VOICE_MEL => current = Some(&mut melody),
            _ => {
                if let Some(v) = current.as_deref_mut() {
                    v.push(t);
                }
            }
        }
    }
    bass.push(EOS);
    melody.push(EOS);
    (bass, melody)
}

/// Pairs decoded lines with the chords they were generated for. Events past
/// the last chord are dropped; missing events become rests.
pub fn assemble_phrase(id: &str, chords: &[ChordSymbol], pair: &DecodedPair) -> Phrase {
    let at = |line: &[NoteEvent], i: usize| line.get(i).copied().unwrap_or_else(NoteEvent::rest);
    Phrase {
        id: id.to_string(),
        key_root: PitchClass::new(0),
        mode: Mode::Major,
        sonorities: chords
            .iter()
            .enumerate()
            .map(|(i, &chord)| Sonority {
                chord,
                bass: at(&pair.bass, i),
                melody: at(&pair.melody, i),
            })
            .collect(),
    }
}

struct Memory {
    rows: usize,
    cols: usize,
    data: Vec<f32>,
}

fn sample_line(
    bundle: &ModelBundle,
    idx: usize,
    memory: Option<&Memory>,
    cfg: &GenerationConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<u32>, ModelError> {
    let mut tokens = vec![BOS];
    while tokens.len() < cfg.max_tokens {
        let mut g = Graph::new(&bundle.store).no_grad();
        let mem = memory.map(|m| g.constant(m.rows, m.cols, m.data.clone()));
        let logits = bundle.decoder_logits(&mut g, idx, &tokens, mem)?;
        let (rows, cols) = g.shape(logits);
        let last = &g.value(logits)[(rows - 1) * cols..];
        let max = last.iter().copied().fold(f32::NEG_INFINITY, f32::max) as f64;
        let probs: Vec<f64> = last.iter().map(|x| (*x as f64 - max).exp()).collect();
        let next = top_p_sample(&probs, cfg.top_p, rng)? as u32;
        tokens.push(next);
        if next == EOS {
            break;
        }
    }
    Ok(tokens)
}

/// Samples both lines for one chord progression (chord ids without PAD).
/// The unconditioned variant ignores `chords`.
pub fn generate(bundle: &ModelBundle, chords: &[u32], cfg: &GenerationConfig) -> Result<Generated, ModelError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut lines: Vec<(Target, Vec<u32>)> = Vec::new();
    for idx in 0..bundle.decoders.len() {
        let memory = {
            let mut g = Graph::new(&bundle.store).no_grad();
            let chord_mem = bundle.chord_memory(&mut g, chords)?;
            let prior = lines.first().map(|(_, l)| l.as_slice());
            bundle.decoder_memory(&mut g, idx, chord_mem, prior)?.map(|v| {
                let (rows, cols) = g.shape(v);
                Memory { rows, cols, data: g.value(v).to_vec() }
            })
        };
        let line = sample_line(bundle, idx, memory.as_ref(), cfg, &mut rng)?;
        lines.push((bundle.decoders[idx].target, line));
    }
    let take = |t: Target| lines.iter().find(|(x, _)| *x == t).map(|(_, l)| l.clone());
    Ok(match take(Target::Interleaved) {
        Some(ids) => {
            let (bass, melody) = split_interleaved(&ids);
            Generated { bass, melody, interleaved: Some(ids) }
        }
        None => Generated {
            bass: take(Target::Bass).expect("bass decoder"),
            melody: take(Target::Melody).expect("melody decoder"),
            interleaved: None,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_follows_markers() {
        let ids = [BOS, VOICE_BASS, 54, 138, 142, VOICE_MEL, 3, VOICE_BASS, 3, VOICE_MEL, 78, 138, 142, EOS, 9];
        let (b, m) = split_interleaved(&ids);
        assert_eq!(b, vec![BOS, 54, 138, 142, 3, EOS]);
        assert_eq!(m, vec![BOS, 3, 78, 138, 142, EOS]);
    }

    #[test]
    fn assembly_truncates_and_pads() {
        let note = |m| NoteEvent::note(chordgen_core::Pitch::new(m).unwrap());
        let pair = DecodedPair {
            bass: vec![note(48), note(43), note(48)],
            melody: vec![note(72)],
            repairs: 0,
        };
        let chords = [ChordSymbol::maj(0), ChordSymbol::maj(7)];
        let p = assemble_phrase("x", &chords, &pair);
        assert_eq!(p.sonorities.len(), 2);
        assert_eq!(p.sonorities[1].bass, note(43));
        assert!(p.sonorities[1].melody.is_rest());
    }

    #[test]
    fn split_drops_unmarked_prefix() {
        let (b, m) = split_interleaved(&[BOS, 60, VOICE_MEL, 3]);
        assert_eq!(b, vec![BOS, EOS]);
        assert_eq!(m, vec![BOS, 3, EOS]);
    }
}
