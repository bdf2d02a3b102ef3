//! Central finite-difference checks of the reverse pass, in f64.
//!
//! [`standard_cases`] exercises every differentiable operation and the
//! attention, encoder and decoder blocks on shapes drawn from a seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::layers::{causal_mask, DecoderLayer, Embedding, EncoderLayer, LayerNorm, Linear, MultiHeadAttention};
use crate::params::normal;
use crate::{Graph, ParamStore, Var};

pub const STEP: f64 = 1e-5;

/// Worst normwise relative error over the inputs or parameters of one case.
#[derive(Clone, Debug, PartialEq)]
pub struct GradReport {
    pub name: String,
    pub max_error: f64,
}

/// `‖a − b‖ / (‖a‖ + ‖b‖)`, or the absolute difference when both sides are
/// zero up to rounding.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let scale = norm(a) + norm(b);
    if scale < 1e-8 {
        diff
    } else {
        diff / scale
    }
}

fn randn(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    normal::<f64>(vec![n], 1.0, rng).data
}

/// Projects a matrix onto a scalar with fixed weights so each entry carries
/// a distinct coefficient.
fn reduce(g: &mut Graph<'_, f64>, out: Var) -> Var {
    let (r, c) = g.shape(out);
    if (r, c) == (1, 1) {
        return out;
    }
    let w = normal::<f64>(vec![r * c], 1.0, &mut ChaCha8Rng::seed_from_u64(999)).data;
    let w = g.constant(r, c, w);
    let p = g.mul(out, w);
    g.sum(p)
}

pub type Inputs = Vec<(usize, usize, Vec<f64>)>;

/// Differentiates `f` with respect to each input matrix.
pub fn check_inputs(name: &str, inputs: &Inputs, f: impl Fn(&mut Graph<'_, f64>, &[Var]) -> Var) -> GradReport {
    check_inputs_on(name, inputs, Graph::detached, f)
}

/// As [`check_inputs`], with every evaluation on a fresh graph from `make`.
pub fn check_inputs_on<'s>(
    name: &str,
    inputs: &Inputs,
    make: impl Fn() -> Graph<'s, f64>,
    f: impl Fn(&mut Graph<'s, f64>, &[Var]) -> Var,
) -> GradReport {
    let eval = |vals: &Inputs| {
        let mut g = make();
        let vs: Vec<Var> = vals.iter().map(|(r, c, d)| g.constant(*r, *c, d.clone())).collect();
        let out = f(&mut g, &vs);
        let s = reduce(&mut g, out);
        g.scalar(s)
    };
    let mut g = make();
    let vs: Vec<Var> = inputs.iter().map(|(r, c, d)| g.input(*r, *c, d.clone())).collect();
    let out = f(&mut g, &vs);
    let s = reduce(&mut g, out);
    g.backward(s);
    let mut worst: f64 = 0.0;
    for (k, v) in vs.iter().enumerate() {
        let n = inputs[k].2.len();
        let analytic = g.grad(*v).map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
        let mut vals = inputs.clone();
        let numeric: Vec<f64> = (0..n)
            .map(|j| {
                let orig = vals[k].2[j];
                vals[k].2[j] = orig + STEP;
                let up = eval(&vals);
                vals[k].2[j] = orig - STEP;
                let down = eval(&vals);
                vals[k].2[j] = orig;
                (up - down) / (2.0 * STEP)
            })
            .collect();
        worst = worst.max(relative_error(&analytic, &numeric));
    }
    GradReport { name: name.to_string(), max_error: worst }
}

/// Differentiates `f` with respect to every parameter in `store`.
pub fn check_params(name: &str, mut store: ParamStore<f64>, f: impl Fn(&mut Graph<'_, f64>) -> Var) -> GradReport {
    let grads = {
        let mut g = Graph::new(&store);
        let out = f(&mut g);
        let s = reduce(&mut g, out);
        g.backward(s);
        g.param_grads()
    };
    let eval = |store: &ParamStore<f64>| {
        let mut g = Graph::new(store);
        let out = f(&mut g);
        let s = reduce(&mut g, out);
        g.scalar(s)
    };
    let mut worst: f64 = 0.0;
    let ids: Vec<_> = store.ids().collect();
    for id in ids {
        let n = store.get(id).numel();
        let mut numeric = Vec::with_capacity(n);
        for j in 0..n {
            let orig = store.get(id).data[j];
            store.get_mut(id).data[j] = orig + STEP;
            let up = eval(&store);
            store.get_mut(id).data[j] = orig - STEP;
            let down = eval(&store);
            store.get_mut(id).data[j] = orig;
            numeric.push((up - down) / (2.0 * STEP));
        }
        let analytic = grads[id.index()].clone().unwrap_or_else(|| vec![0.0; n]);
        worst = worst.max(relative_error(&analytic, &numeric));
    }
    GradReport { name: name.to_string(), max_error: worst }
}

/// Moves every parameter away from its initial value so zero-initialised
/// biases and unit gains are exercised too.
fn jitter(store: &mut ParamStore<f64>, rng: &mut ChaCha8Rng) {
    for t in store.tensors_mut() {
        let noise = randn(t.numel(), rng);
        t.data.iter_mut().zip(noise).for_each(|(x, n)| *x += 0.3 * n);
    }
}

/// All operation and block checks for one seed.
pub fn standard_cases(seed: u64) -> Vec<GradReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = |lo: usize, hi: usize, rng: &mut ChaCha8Rng| rng.random_range(lo..=hi);
    let (r, k, c) = (dim(1, 4, &mut rng), dim(1, 5, &mut rng), dim(1, 5, &mut rng));
    let m = |rows: usize, cols: usize, rng: &mut ChaCha8Rng| (rows, cols, randn(rows * cols, rng));
    let mut out = Vec::new();

    let (a, b, bt) = (m(r, k, &mut rng), m(k, c, &mut rng), m(c, k, &mut rng));
    out.push(check_inputs("matmul", &vec![a.clone(), b], |g, v| g.matmul(v[0], v[1])));
    out.push(check_inputs("matmul_t", &vec![a.clone(), bt], |g, v| g.matmul_t(v[0], v[1])));
    out.push(check_inputs("matmul_t self", &vec![a.clone()], |g, v| g.matmul_t(v[0], v[0])));

    let a2 = m(r, k, &mut rng);
    let row = m(1, k, &mut rng);
    out.push(check_inputs("add", &vec![a.clone(), a2.clone()], |g, v| g.add(v[0], v[1])));
    out.push(check_inputs("mul", &vec![a.clone(), a2.clone()], |g, v| g.mul(v[0], v[1])));
    out.push(check_inputs("scale", &vec![a.clone()], |g, v| g.scale(v[0], -1.7)));
    out.push(check_inputs("relu", &vec![a.clone()], |g, v| g.relu(v[0])));
    out.push(check_inputs("add_row", &vec![a.clone(), row], |g, v| g.add_row(v[0], v[1])));
    out.push(check_inputs("sum", &vec![a.clone()], |g, v| g.sum(v[0])));
    let drop_seed = rng.random();
    out.push(check_inputs_on(
        "dropout",
        &vec![a.clone()],
        || Graph::detached().with_dropout(0.3, drop_seed),
        |g, v| g.dropout(v[0]),
    ));

    out.push(check_inputs("softmax", &vec![a.clone()], |g, v| g.softmax(v[0], None)));
    let sq = m(r, r, &mut rng);
    let mask = causal_mask::<f64>(r, r);
    out.push(check_inputs("softmax causal", &vec![sq], move |g, v| g.softmax(v[0], Some(&mask))));

    // Two or fewer features leave the normalised output nearly flat, where
    // finite differences lose their accuracy.
    let w = dim(3, 6, &mut rng);
    let x = m(r, w, &mut rng);
    let gamma = (1, w, randn(w, &mut rng).iter().map(|x| 1.0 + 0.3 * x).collect());
    let beta = m(1, w, &mut rng);
    out.push(check_inputs("layer_norm", &vec![x, gamma, beta], |g, v| g.layer_norm(v[0], v[1], v[2])));

    let start = rng.random_range(0..k);
    let len = rng.random_range(1..=k - start);
    out.push(check_inputs("slice_cols", &vec![a.clone()], move |g, v| g.slice_cols(v[0], start, len)));
    let side = m(r, c, &mut rng);
    out.push(check_inputs("concat_cols", &vec![a.clone(), side], |g, v| g.concat_cols(&[v[0], v[1], v[0]])));
    let below = m(c, k, &mut rng);
    out.push(check_inputs("concat_rows", &vec![a.clone(), below], |g, v| g.concat_rows(&[v[1], v[0]])));
    let ids: Vec<usize> = (0..dim(1, 5, &mut rng)).map(|_| rng.random_range(0..r)).collect();
    out.push(check_inputs("gather", &vec![a.clone()], move |g, v| g.gather(v[0], &ids)));

    let classes = dim(2, 6, &mut rng);
    let logits = m(r + 1, classes, &mut rng);
    let targets: Vec<usize> = (0..=r).map(|_| rng.random_range(0..classes)).collect();
    let mut keep: Vec<bool> = (0..=r).map(|_| rng.random_bool(0.7)).collect();
    keep[0] = true;
    out.push(check_inputs("cross_entropy masked", &vec![logits], move |g, v| {
        g.cross_entropy(v[0], &targets, &keep).expect("one target kept")
    }));

    let heads = dim(1, 2, &mut rng);
    let d = heads * if heads == 1 { dim(4, 6, &mut rng) } else { dim(2, 3, &mut rng) };
    let ff = dim(2, 6, &mut rng);
    let (t, s) = (dim(1, 4, &mut rng), dim(1, 3, &mut rng));

    let mut store = ParamStore::<f64>::new();
    let mha = MultiHeadAttention::new(&mut store, "mha", d, heads, &mut rng);
    jitter(&mut store, &mut rng);
    let (x, mem) = (randn(t * d, &mut rng), randn(s * d, &mut rng));
    let (xc, mc, mha_self) = (x.clone(), mem.clone(), mha.clone());
    out.push(check_params("multi-head self-attention", store.clone(), move |g| {
        let xv = g.constant(t, d, xc.clone());
        mha.forward(g, xv, xv, true).expect("shapes")
    }));
    let mha = mha_self.clone();
    out.push(check_params("multi-head cross-attention", store, move |g| {
        let xv = g.constant(t, d, x.clone());
        let mv = g.constant(s, d, mc.clone());
        mha.forward(g, xv, mv, false).expect("shapes")
    }));

    let mut store = ParamStore::<f64>::new();
    let enc = EncoderLayer::new(&mut store, "enc", d, heads, ff, &mut rng);
    jitter(&mut store, &mut rng);
    let x = randn(t * d, &mut rng);
    out.push(check_params("encoder layer", store, move |g| {
        let xv = g.constant(t, d, x.clone());
        enc.forward(g, xv).expect("shapes")
    }));

    let mut store = ParamStore::<f64>::new();
    let dec = DecoderLayer::new(&mut store, "dec", d, heads, ff, true, &mut rng);
    jitter(&mut store, &mut rng);
    let x = randn(t * d, &mut rng);
    out.push(check_params("decoder layer", store, move |g| {
        let xv = g.constant(t, d, x.clone());
        let mv = g.constant(s, d, mem.clone());
        dec.forward(g, xv, Some(mv)).expect("shapes")
    }));

    let vocab = dim(3, 8, &mut rng);
    let mut store = ParamStore::<f64>::new();
    let emb = Embedding::new(&mut store, "emb", vocab, d, &mut rng);
    let norm = LayerNorm::new(&mut store, "norm", d);
    let head = Linear::new(&mut store, "head", d, vocab, true, &mut rng);
    jitter(&mut store, &mut rng);
    let tokens: Vec<u32> = (0..t).map(|_| rng.random_range(0..vocab as u32)).collect();
    let targets: Vec<usize> = (0..t).map(|_| rng.random_range(0..vocab)).collect();
    out.push(check_params("embedding, norm, head, loss", store, move |g| {
        let x = emb.forward_with_positions(g, &tokens).expect("in range");
        let x = norm.forward(g, x).expect("shapes");
        let logits = head.forward(g, x).expect("shapes");
        g.cross_entropy(logits, &targets, &vec![true; targets.len()]).expect("non-empty")
    }));
    out
}
