//! Transformer building blocks over [`Graph`].
//!
//! Layers own only [`ParamId`]s; values live in the [`ParamStore`]. The
//! block layout is pre-norm: `x + f(norm(x))`.

use rand::Rng;
use rand_distr::{Distribution, Uniform};

use crate::graph::{Graph, Var};
use crate::params::{normal, ParamId, ParamStore};
use crate::scalar::Float;
use crate::tensor::Tensor;
use crate::NnError;

fn check_cols<T: Float>(g: &Graph<'_, T>, x: Var, cols: usize, what: &str) -> Result<(), NnError> {
    let (r, c) = g.shape(x);
    if c != cols {
        return Err(NnError::ShapeMismatch(format!("{what}: expected {cols} columns, got {r}x{c}")));
    }
    Ok(())
}

fn xavier<T: Float>(fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Tensor<T> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let dist = Uniform::new_inclusive(-limit, limit).expect("finite bounds");
    let data = (0..fan_in * fan_out).map(|_| T::from_f64(dist.sample(rng))).collect();
    Tensor::new(vec![fan_in, fan_out], data)
}

/// `y = x·W + b` with `W` stored `in × out`.
#[derive(Clone, Debug)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: Option<ParamId>,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Linear {
    pub fn new<T: Float>(
        store: &mut ParamStore<T>,
        name: &str,
        in_dim: usize,
        out_dim: usize,
        bias: bool,
        rng: &mut impl Rng,
    ) -> Self {
        let weight = store.add(format!("{name}.weight"), xavier(in_dim, out_dim, rng));
        let bias = bias.then(|| store.add(format!("{name}.bias"), Tensor::zeros(vec![1, out_dim])));
        Linear { weight, bias, in_dim, out_dim }
    }

    /// Weight drawn from N(0, std²) instead of the Xavier range.
    pub fn with_normal_init<T: Float>(
        store: &mut ParamStore<T>,
        name: &str,
        in_dim: usize,
        out_dim: usize,
        std: f64,
        rng: &mut impl Rng,
    ) -> Self {
        let weight = store.add(format!("{name}.weight"), normal(vec![in_dim, out_dim], std, rng));
        let bias = Some(store.add(format!("{name}.bias"), Tensor::zeros(vec![1, out_dim])));
        Linear { weight, bias, in_dim, out_dim }
    }

    pub fn forward<T: Float>(&self, g: &mut Graph<'_, T>, x: Var) -> Result<Var, NnError> {
        check_cols(g, x, self.in_dim, "linear")?;
        let w = g.param(self.weight);
        let y = g.matmul(x, w);
        Ok(match self.bias {
            Some(b) => {
                let b = g.param(b);
                g.add_row(y, b)
            }
            None => y,
        })
    }
}

#[derive(Clone, Debug)]
pub struct LayerNorm {
    pub gamma: ParamId,
    pub beta: ParamId,
    pub dim: usize,
}

impl LayerNorm {
    pub fn new<T: Float>(store: &mut ParamStore<T>, name: &str, dim: usize) -> Self {
        LayerNorm {
            gamma: store.add(format!("{name}.gamma"), Tensor::full(vec![1, dim], T::one())),
            beta: store.add(format!("{name}.beta"), Tensor::zeros(vec![1, dim])),
            dim,
        }
    }

    pub fn forward<T: Float>(&self, g: &mut Graph<'_, T>, x: Var) -> Result<Var, NnError> {
        check_cols(g, x, self.dim, "layer norm")?;
        let gamma = g.param(self.gamma);
        let beta = g.param(self.beta);
        Ok(g.layer_norm(x, gamma, beta))
    }
}

/// Additive `n × m` mask hiding key positions after each query position.
pub fn causal_mask<T: Float>(n: usize, m: usize) -> Vec<T> {
    let mut mask = vec![T::zero(); n * m];
    for i in 0..n {
        for j in (i + 1)..m {
            mask[i * m + j] = T::neg_infinity();
        }
    }
    mask
}

/// `softmax(q·kᵀ / √d + mask) · v` for a single head.
pub fn scaled_dot_attention<T: Float>(
    g: &mut Graph<'_, T>,
    q: Var,
    k: Var,
    v: Var,
    mask: Option<&[T]>,
) -> Result<Var, NnError> {
    let (nq, d) = g.shape(q);
    let (nk, dk) = g.shape(k);
    let (nv, _) = g.shape(v);
    if dk != d || nv != nk {
        return Err(NnError::ShapeMismatch(format!(
            "attention: q {nq}x{d}, k {nk}x{dk}, v rows {nv}"
        )));
    }
    if let Some(m) = mask {
        if m.len() != nq * nk {
            return Err(NnError::ShapeMismatch(format!(
                "attention mask has {} entries for {nq}x{nk} scores",
                m.len()
            )));
        }
    }
    let scores = g.matmul_t(q, k);
    let scores = g.scale(scores, T::from_f64(1.0 / (d as f64).sqrt()));
    let weights = g.softmax(scores, mask);
    Ok(g.matmul(weights, v))
}

#[derive(Clone, Debug)]
pub struct MultiHeadAttention {
    pub q: Linear,
    pub k: Linear,
    pub v: Linear,
    pub out: Linear,
    pub heads: usize,
    pub d_model: usize,
}

impl MultiHeadAttention {
    pub fn new<T: Float>(
        store: &mut ParamStore<T>,
        name: &str,
        d_model: usize,
        heads: usize,
        rng: &mut impl Rng,
    ) -> Self {
        assert!(heads > 0 && d_model % heads == 0, "d_model must divide into heads");
        MultiHeadAttention {
            q: Linear::new(store, &format!("{name}.q"), d_model, d_model, true, rng),
            k: Linear::new(store, &format!("{name}.k"), d_model, d_model, true, rng),
            v: Linear::new(store, &format!("{name}.v"), d_model, d_model, true, rng),
            out: Linear::new(store, &format!("{name}.out"), d_model, d_model, true, rng),
            heads,
            d_model,
        }
    }

    /// Queries from `x`, keys and values from `context`.
    pub fn forward<T: Float>(
        &self,
        g: &mut Graph<'_, T>,
        x: Var,
        context: Var,
        causal: bool,
    ) -> Result<Var, NnError> {
        let q = self.q.forward(g, x)?;
        let k = self.k.forward(g, context)?;
        let v = self.v.forward(g, context)?;
        let mask = causal.then(|| causal_mask::<T>(g.shape(x).0, g.shape(context).0));
        let dh = self.d_model / self.heads;
        let mut outs = Vec::with_capacity(self.heads);
        for h in 0..self.heads {
            let qh = g.slice_cols(q, h * dh, dh);
            let kh = g.slice_cols(k, h * dh, dh);
            let vh = g.slice_cols(v, h * dh, dh);
            outs.push(scaled_dot_attention(g, qh, kh, vh, mask.as_deref())?);
        }
        let joined = if outs.len() == 1 { outs[0] } else { g.concat_cols(&outs) };
        self.out.forward(g, joined)
    }
}

#[derive(Clone, Debug)]
pub struct FeedForward {
    pub up: Linear,
    pub down: Linear,
}

impl FeedForward {
    pub fn new<T: Float>(store: &mut ParamStore<T>, name: &str, d_model: usize, d_ff: usize, rng: &mut impl Rng) -> Self {
        FeedForward {
            up: Linear::new(store, &format!("{name}.up"), d_model, d_ff, true, rng),
            down: Linear::new(store, &format!("{name}.down"), d_ff, d_model, true, rng),
        }
    }

    pub fn forward<T: Float>(&self, g: &mut Graph<'_, T>, x: Var) -> Result<Var, NnError> {
        let h = self.up.forward(g, x)?;
        let h = g.relu(h);
        let h = g.dropout(h);
        self.down.forward(g, h)
    }
}

#[derive(Clone, Debug)]
pub struct EncoderLayer {
    pub norm1: LayerNorm,
    pub attn: MultiHeadAttention,
    pub norm2: LayerNorm,
    pub ff: FeedForward,
}

impl EncoderLayer {
    pub fn new<T: Float>(
        store: &mut ParamStore<T>,
        name: &str,
        d_model: usize,
        heads: usize,
        d_ff: usize,
        rng: &mut impl Rng,
    ) -> Self {
        EncoderLayer {
            norm1: LayerNorm::new(store, &format!("{name}.norm1"), d_model),
            attn: MultiHeadAttention::new(store, &format!("{name}.attn"), d_model, heads, rng),
            norm2: LayerNorm::new(store, &format!("{name}.norm2"), d_model),
            ff: FeedForward::new(store, &format!("{name}.ff"), d_model, d_ff, rng),
        }
    }

    pub fn forward<T: Float>(&self, g: &mut Graph<'_, T>, x: Var) -> Result<Var, NnError> {
        let h = self.norm1.forward(g, x)?;
        let h = self.attn.forward(g, h, h, false)?;
        let h = g.dropout(h);
        let x = g.add(x, h);
        let h = self.norm2.forward(g, x)?;
        let h = self.ff.forward(g, h)?;
        let h = g.dropout(h);
        Ok(g.add(x, h))
    }
}

/// Causal self-attention, optional cross-attention, feed-forward.
#[derive(Clone, Debug)]
pub struct DecoderLayer {
    pub norm1: LayerNorm,
    pub self_attn: MultiHeadAttention,
    pub cross: Option<(LayerNorm, MultiHeadAttention)>,
    pub norm3: LayerNorm,
    pub ff: FeedForward,
}

impl DecoderLayer {
    pub fn new<T: Float>(
        store: &mut ParamStore<T>,
        name: &str,
        d_model: usize,
        heads: usize,
        d_ff: usize,
        cross_attention: bool,
        rng: &mut impl Rng,
    ) -> Self {
        let norm1 = LayerNorm::new(store, &format!("{name}.norm1"), d_model);
        let self_attn = MultiHeadAttention::new(store, &format!("{name}.self_attn"), d_model, heads, rng);
        let cross = cross_attention.then(|| {
            (
                LayerNorm::new(store, &format!("{name}.norm2"), d_model),
                MultiHeadAttention::new(store, &format!("{name}.cross_attn"), d_model, heads, rng),
            )
        });
        DecoderLayer {
            norm1,
            self_attn,
            cross,
            norm3: LayerNorm::new(store, &format!("{name}.norm3"), d_model),
            ff: FeedForward::new(store, &format!("{name}.ff"), d_model, d_ff, rng),
        }
    }

    pub fn forward<T: Float>(&self, g: &mut Graph<'_, T>, x: Var, memory: Option<Var>) -> Result<Var, NnError> {
        let h = self.norm1.forward(g, x)?;
        let h = self.self_attn.forward(g, h, h, true)?;
        let h = g.dropout(h);
        let mut x = g.add(x, h);
        match (&self.cross, memory) {
            (Some((norm, attn)), Some(mem)) => {
                let h = norm.forward(g, x)?;
                let h = attn.forward(g, h, mem, false)?;
                let h = g.dropout(h);
                x = g.add(x, h);
            }
            (Some(_), None) => {
                return Err(NnError::ShapeMismatch("decoder layer expects a memory".into()));
            }
            (None, Some(_)) => {
                return Err(NnError::ShapeMismatch("decoder layer has no cross-attention".into()));
            }
            (None, None) => {}
        }
        let h = self.norm3.forward(g, x)?;
        let h = self.ff.forward(g, h)?;
        let h = g.dropout(h);
        Ok(g.add(x, h))
    }
}

/// Token table scaled by √d on lookup.
#[derive(Clone, Debug)]
pub struct Embedding {
    pub table: ParamId,
    pub vocab: usize,
    pub dim: usize,
}

impl Embedding {
    pub fn new<T: Float>(store: &mut ParamStore<T>, name: &str, vocab: usize, dim: usize, rng: &mut impl Rng) -> Self {
        let std = (dim as f64).powf(-0.5);
        Embedding {
            table: store.add(format!("{name}.table"), normal(vec![vocab, dim], std, rng)),
            vocab,
            dim,
        }
    }

    pub fn forward<T: Float>(&self, g: &mut Graph<'_, T>, ids: &[u32]) -> Result<Var, NnError> {
        if let Some(bad) = ids.iter().find(|i| **i as usize >= self.vocab) {
            return Err(NnError::ShapeMismatch(format!(
                "token {bad} outside vocabulary of {}",
                self.vocab
            )));
        }
        let idx: Vec<usize> = ids.iter().map(|i| *i as usize).collect();
        let t = g.param(self.table);
        let e = g.gather(t, &idx);
        Ok(g.scale(e, T::from_f64((self.dim as f64).sqrt())))
    }

    /// Lookup plus sinusoidal positions.
    pub fn forward_with_positions<T: Float>(&self, g: &mut Graph<'_, T>, ids: &[u32]) -> Result<Var, NnError> {
        let e = self.forward(g, ids)?;
        let pe = g.constant(ids.len(), self.dim, sinusoidal_positions(ids.len(), self.dim));
        Ok(g.add(e, pe))
    }
}

/// `PE[p, 2i] = sin(p / 10000^(2i/d))`, `PE[p, 2i+1] = cos(…)`.
pub fn sinusoidal_positions<T: Float>(len: usize, dim: usize) -> Vec<T> {
    let mut out = vec![T::zero(); len * dim];
    for p in 0..len {
        for i in 0..dim {
            let pair = (i / 2 * 2) as f64;
            let angle = p as f64 / 10000f64.powf(pair / dim as f64);
            out[p * dim + i] = T::from_f64(if i % 2 == 0 { angle.sin() } else { angle.cos() });
        }
    }
    out
}

#[derive(Clone, Debug)]
pub struct Encoder {
    pub layers: Vec<EncoderLayer>,
    pub norm: LayerNorm,
}

impl Encoder {
    #[allow(clippy::too_many_arguments)]
    pub fn new<T: Float>(
        store: &mut ParamStore<T>,
        name: &str,
        layers: usize,
        d_model: usize,
        heads: usize,
        d_ff: usize,
        rng: &mut impl Rng,
    ) -> Self {
        Encoder {
            layers: (0..layers)
                .map(|i| EncoderLayer::new(store, &format!("{name}.layer{i}"), d_model, heads, d_ff, rng))
                .collect(),
            norm: LayerNorm::new(store, &format!("{name}.norm"), d_model),
        }
    }

    pub fn forward<T: Float>(&self, g: &mut Graph<'_, T>, mut x: Var) -> Result<Var, NnError> {
        for layer in &self.layers {
            x = layer.forward(g, x)?;
        }
        self.norm.forward(g, x)
    }
}

#[derive(Clone, Debug)]
pub struct Decoder {
    pub layers: Vec<DecoderLayer>,
    pub norm: LayerNorm,
}

impl Decoder {
    #[allow(clippy::too_many_arguments)]
    pub fn new<T: Float>(
        store: &mut ParamStore<T>,
        name: &str,
        layers: usize,
        d_model: usize,
        heads: usize,
        d_ff: usize,
        cross_attention: bool,
        rng: &mut impl Rng,
    ) -> Self {
        Decoder {
            layers: (0..layers)
                .map(|i| {
                    DecoderLayer::new(store, &format!("{name}.layer{i}"), d_model, heads, d_ff, cross_attention, rng)
                })
                .collect(),
            norm: LayerNorm::new(store, &format!("{name}.norm"), d_model),
        }
    }

    pub fn forward<T: Float>(&self, g: &mut Graph<'_, T>, mut x: Var, memory: Option<Var>) -> Result<Var, NnError> {
        for layer in &self.layers {
            x = layer.forward(g, x, memory)?;
        }
        self.norm.forward(g, x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn randn(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        normal::<f64>(vec![n], 1.0, rng).data
    }

    /// Attention written as explicit loops.
    fn naive_attention(q: &[f64], k: &[f64], v: &[f64], nq: usize, nk: usize, d: usize, dv: usize, causal: bool) -> Vec<f64> {
        let mut out = vec![0.0; nq * dv];
        for i in 0..nq {
            let mut s = vec![f64::NEG_INFINITY; nk];
            for j in 0..nk {
                if causal && j > i {
                    continue;
                }
                s[j] = (0..d).map(|t| q[i * d + t] * k[j * d + t]).sum::<f64>() / (d as f64).sqrt();
            }
            let m = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = s.iter().map(|x| (x - m).exp()).collect();
            let z: f64 = e.iter().sum();
            for j in 0..nk {
                for t in 0..dv {
                    out[i * dv + t] += e[j] / z * v[j * dv + t];
                }
            }
        }
        out
    }

    #[test]
    fn attention_matches_loops() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (nq, nk, d, dv) = (5, 7, 4, 3);
        let (q, k, v) = (randn(nq * d, &mut rng), randn(nk * d, &mut rng), randn(nk * dv, &mut rng));
        for causal in [false, true] {
            let mut g = Graph::<f64>::detached();
            let (qv, kv, vv) = (
                g.constant(nq, d, q.clone()),
                g.constant(nk, d, k.clone()),
                g.constant(nk, dv, v.clone()),
            );
            let mask = causal.then(|| causal_mask::<f64>(nq, nk));
            let out = scaled_dot_attention(&mut g, qv, kv, vv, mask.as_deref()).unwrap();
            let expected = naive_attention(&q, &k, &v, nq, nk, d, dv, causal);
            for (a, b) in g.value(out).iter().zip(&expected) {
                assert!((a - b).abs() < 1e-12, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn causal_self_attention_ignores_future_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut store = ParamStore::<f64>::new();
        let layer = DecoderLayer::new(&mut store, "dec", 8, 2, 16, false, &mut rng);
        let x = randn(6 * 8, &mut rng);
        let run = |x: Vec<f64>| {
            let mut g = Graph::new(&store);
            let xv = g.constant(6, 8, x);
            let y = layer.forward(&mut g, xv, None).unwrap();
            g.value(y).to_vec()
        };
        let base = run(x.clone());
        let mut changed = x.clone();
        for v in &mut changed[4 * 8..] {
            *v += 3.0;
        }
        let perturbed = run(changed);
        for i in 0..4 * 8 {
            assert!((base[i] - perturbed[i]).abs() < 1e-12);
        }
        assert!(base[4 * 8..].iter().zip(&perturbed[4 * 8..]).any(|(a, b)| (a - b).abs() > 1e-6));
    }

    #[test]
    fn shape_errors_are_reported() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut store = ParamStore::<f64>::new();
        let lin = Linear::new(&mut store, "l", 4, 2, true, &mut rng);
        let mut g = Graph::new(&store);
        let x = g.constant(3, 5, vec![0.0; 15]);
        assert!(matches!(lin.forward(&mut g, x), Err(NnError::ShapeMismatch(_))));
        let mut s2 = ParamStore::<f64>::new();
        let emb = Embedding::new(&mut s2, "e", 4, 2, &mut rng);
        let mut g2 = Graph::new(&s2);
        assert!(emb.forward(&mut g2, &[1, 9]).is_err());
    }

    #[test]
    fn positions_follow_sin_cos_pairs() {
        let pe = sinusoidal_positions::<f64>(3, 4);
        assert_eq!(&pe[0..4], &[0.0, 1.0, 0.0, 1.0]);
        assert!((pe[4] - 1f64.sin()).abs() < 1e-15);
        assert!((pe[5] - 1f64.cos()).abs() < 1e-15);
        assert!((pe[6] - (1.0 / 100.0f64).sin()).abs() < 1e-15);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn attention_over_one_key_returns_its_value(d in 1usize..8, q in proptest::collection::vec(-5.0f64..5.0, 8), kv in proptest::collection::vec(-5.0f64..5.0, 16)) {
                let mut g = Graph::<f64>::detached();
                let qv = g.constant(1, d, q[..d].to_vec());
                let kk = g.constant(1, d, kv[..d].to_vec());
                let vv = g.constant(1, d, kv[8..8 + d].to_vec());
                let out = scaled_dot_attention(&mut g, qv, kk, vv, None).unwrap();
                prop_assert_eq!(g.value(out), &kv[8..8 + d]);
            }

            #[test]
            fn causal_attention_ignores_the_future(t in 2usize..6, seed in any::<u64>()) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut store = ParamStore::<f64>::new();
                let mha = MultiHeadAttention::new(&mut store, "a", 4, 2, &mut rng);
                let x = randn(t * 4, &mut rng);
                let mut y = x.clone();
                let last = (t - 1) * 4;
                y[last..].iter_mut().for_each(|v| *v += 3.0);
                let run = |data: Vec<f64>| {
                    let mut g = Graph::new(&store);
                    let xv = g.constant(t, 4, data);
                    let o = mha.forward(&mut g, xv, xv, true).unwrap();
                    g.value(o).to_vec()
                };
                let (a, b) = (run(x), run(y));
                prop_assert_eq!(&a[..last], &b[..last]);
            }
        }
    }
}
