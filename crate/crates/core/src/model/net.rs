//! The encoder network: parameters, forward pass, exact backward pass.
//!
//! Pre-norm transformer blocks. Everything is generic over the scalar so
//! the same code runs in f32 for training/inference and in f64 for
//! finite-difference gradient checks.

use ndarray::{s, Array1, Array2, ArrayViewD, ArrayViewMutD, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{ModelConfig, Scalar};

/// y = x·W + b.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear<F> {
    pub w: Array2<F>,
    pub b: Array1<F>,
}

impl<F: Scalar> Linear<F> {
    fn init(rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize) -> Linear<F> {
        let std = (2.0 / (fan_in + fan_out) as f64).sqrt();
        let dist = Normal::new(0.0, std).expect("positive std");
        Linear {
            w: Array2::from_shape_fn((fan_in, fan_out), |_| F::of(dist.sample(rng))),
            b: Array1::zeros(fan_out),
        }
    }

    fn zeros_like(other: &Linear<F>) -> Linear<F> {
        Linear {
            w: Array2::zeros(other.w.raw_dim()),
            b: Array1::zeros(other.b.raw_dim()),
        }
    }

    fn forward(&self, x: &Array2<F>) -> Array2<F> {
        x.dot(&self.w) + &self.b
    }

    /// Returns dx; accumulates dW and db into `grad`.
    fn backward(&self, x: &Array2<F>, dy: &Array2<F>, grad: &mut Linear<F>) -> Array2<F> {
        grad.w += &x.t().dot(dy);
        grad.b += &dy.sum_axis(Axis(0));
        dy.dot(&self.w.t())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerNorm<F> {
    pub gamma: Array1<F>,
    pub beta: Array1<F>,
}

struct LnCache<F> {
    xhat: Array2<F>,
    inv_std: Array1<F>,
    out: Array2<F>,
}

impl<F: Scalar> LayerNorm<F> {
    fn init(dim: usize) -> LayerNorm<F> {
        LayerNorm {
            gamma: Array1::ones(dim),
            beta: Array1::zeros(dim),
        }
    }

    fn zeros_like(other: &LayerNorm<F>) -> LayerNorm<F> {
        LayerNorm {
            gamma: Array1::zeros(other.gamma.raw_dim()),
            beta: Array1::zeros(other.beta.raw_dim()),
        }
    }

    fn forward(&self, x: &Array2<F>) -> LnCache<F> {
        let eps = F::of(1e-5);
        let d = F::of(x.ncols() as f64);
        let mut xhat = Array2::zeros(x.raw_dim());
        let mut inv_std = Array1::zeros(x.nrows());
        for (i, row) in x.outer_iter().enumerate() {
            let mean = row.sum() / d;
            let var = row
                .iter()
                .fold(F::zero(), |acc, &v| acc + (v - mean) * (v - mean))
                / d;
            let is = F::one() / (var + eps).sqrt();
            inv_std[i] = is;
            for (j, &v) in row.iter().enumerate() {
                xhat[[i, j]] = (v - mean) * is;
            }
        }
        let out = &xhat * &self.gamma + &self.beta;
        LnCache { xhat, inv_std, out }
    }

    /// Returns dx; accumulates dgamma/dbeta.
    fn backward(&self, cache: &LnCache<F>, dy: &Array2<F>, grad: &mut LayerNorm<F>) -> Array2<F> {
        let d = F::of(dy.ncols() as f64);
        for (dy_row, xh_row) in dy.outer_iter().zip(cache.xhat.outer_iter()) {
            for (j, (&g, &xh)) in dy_row.iter().zip(xh_row.iter()).enumerate() {
                grad.gamma[j] = grad.gamma[j] + g * xh;
                grad.beta[j] = grad.beta[j] + g;
            }
        }
        let mut dx = Array2::zeros(dy.raw_dim());
        for i in 0..dy.nrows() {
            let mut mean_dxhat = F::zero();
            let mut mean_dxhat_xhat = F::zero();
            for j in 0..dy.ncols() {
                let dxhat = dy[[i, j]] * self.gamma[j];
                mean_dxhat = mean_dxhat + dxhat;
                mean_dxhat_xhat = mean_dxhat_xhat + dxhat * cache.xhat[[i, j]];
            }
            mean_dxhat = mean_dxhat / d;
            mean_dxhat_xhat = mean_dxhat_xhat / d;
            for j in 0..dy.ncols() {
                let dxhat = dy[[i, j]] * self.gamma[j];
                dx[[i, j]] =
                    (dxhat - mean_dxhat - cache.xhat[[i, j]] * mean_dxhat_xhat) * cache.inv_std[i];
            }
        }
        dx
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderLayer<F> {
    pub ln1: LayerNorm<F>,
    pub q: Linear<F>,
    pub k: Linear<F>,
    pub v: Linear<F>,
    pub o: Linear<F>,
    pub ln2: LayerNorm<F>,
    pub ff1: Linear<F>,
    pub ff2: Linear<F>,
}

impl<F: Scalar> EncoderLayer<F> {
    fn init(rng: &mut ChaCha8Rng, d: usize, ff: usize) -> EncoderLayer<F> {
        EncoderLayer {
            ln1: LayerNorm::init(d),
            q: Linear::init(rng, d, d),
            k: Linear::init(rng, d, d),
            v: Linear::init(rng, d, d),
            o: Linear::init(rng, d, d),
            ln2: LayerNorm::init(d),
            ff1: Linear::init(rng, d, ff),
            ff2: Linear::init(rng, ff, d),
        }
    }

    fn zeros_like(other: &EncoderLayer<F>) -> EncoderLayer<F> {
        EncoderLayer {
            ln1: LayerNorm::zeros_like(&other.ln1),
            q: Linear::zeros_like(&other.q),
            k: Linear::zeros_like(&other.k),
            v: Linear::zeros_like(&other.v),
            o: Linear::zeros_like(&other.o),
            ln2: LayerNorm::zeros_like(&other.ln2),
            ff1: Linear::zeros_like(&other.ff1),
            ff2: Linear::zeros_like(&other.ff2),
        }
    }
}

/// All trainable tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct Params<F> {
    pub tok_emb: Array2<F>,
    pub pos_emb: Array2<F>,
    pub layers: Vec<EncoderLayer<F>>,
    pub final_ln: LayerNorm<F>,
    pub head: Linear<F>,
}

impl<F: Scalar> Params<F> {
    pub fn init(config: &ModelConfig, rng: &mut ChaCha8Rng) -> Params<F> {
        let d = config.model_dim;
        let emb_dist = Normal::new(0.0, 0.02).expect("positive std");
        Params {
            tok_emb: Array2::from_shape_fn((config.vocab_size, d), |_| {
                F::of(emb_dist.sample(rng))
            }),
            pos_emb: Array2::from_shape_fn((config.max_len, d), |_| F::of(emb_dist.sample(rng))),
            layers: (0..config.layers)
                .map(|_| EncoderLayer::init(rng, d, config.ff()))
                .collect(),
            final_ln: LayerNorm::init(d),
            head: Linear::init(rng, d, 1),
        }
    }

    pub fn zeros_like(other: &Params<F>) -> Params<F> {
        Params {
            tok_emb: Array2::zeros(other.tok_emb.raw_dim()),
            pos_emb: Array2::zeros(other.pos_emb.raw_dim()),
            layers: other.layers.iter().map(EncoderLayer::zeros_like).collect(),
            final_ln: LayerNorm::zeros_like(&other.final_ln),
            head: Linear::zeros_like(&other.head),
        }
    }

    /// Visit every tensor in a fixed order with a stable name.
    pub fn visit(&self, f: &mut impl FnMut(String, ArrayViewD<'_, F>)) {
        f("tok_emb".into(), self.tok_emb.view().into_dyn());
        f("pos_emb".into(), self.pos_emb.view().into_dyn());
        for (i, l) in self.layers.iter().enumerate() {
            f(format!("layer{i}.ln1.gamma"), l.ln1.gamma.view().into_dyn());
            f(format!("layer{i}.ln1.beta"), l.ln1.beta.view().into_dyn());
            for (n, lin) in [("q", &l.q), ("k", &l.k), ("v", &l.v), ("o", &l.o)] {
                f(format!("layer{i}.{n}.w"), lin.w.view().into_dyn());
                f(format!("layer{i}.{n}.b"), lin.b.view().into_dyn());
            }
            f(format!("layer{i}.ln2.gamma"), l.ln2.gamma.view().into_dyn());
            f(format!("layer{i}.ln2.beta"), l.ln2.beta.view().into_dyn());
            f(format!("layer{i}.ff1.w"), l.ff1.w.view().into_dyn());
            f(format!("layer{i}.ff1.b"), l.ff1.b.view().into_dyn());
            f(format!("layer{i}.ff2.w"), l.ff2.w.view().into_dyn());
            f(format!("layer{i}.ff2.b"), l.ff2.b.view().into_dyn());
        }
        f("final_ln.gamma".into(), self.final_ln.gamma.view().into_dyn());
        f("final_ln.beta".into(), self.final_ln.beta.view().into_dyn());
        f("head.w".into(), self.head.w.view().into_dyn());
        f("head.b".into(), self.head.b.view().into_dyn());
    }

    pub fn visit_mut(&mut self, f: &mut impl FnMut(String, ArrayViewMutD<'_, F>)) {
        f("tok_emb".into(), self.tok_emb.view_mut().into_dyn());
        f("pos_emb".into(), self.pos_emb.view_mut().into_dyn());
        for (i, l) in self.layers.iter_mut().enumerate() {
            f(
                format!("layer{i}.ln1.gamma"),
                l.ln1.gamma.view_mut().into_dyn(),
            );
            f(
                format!("layer{i}.ln1.beta"),
                l.ln1.beta.view_mut().into_dyn(),
            );
            for (n, lin) in [
                ("q", &mut l.q),
                ("k", &mut l.k),
                ("v", &mut l.v),
                ("o", &mut l.o),
            ] {
                f(format!("layer{i}.{n}.w"), lin.w.view_mut().into_dyn());
                f(format!("layer{i}.{n}.b"), lin.b.view_mut().into_dyn());
            }
            f(
                format!("layer{i}.ln2.gamma"),
                l.ln2.gamma.view_mut().into_dyn(),
            );
            f(
                format!("layer{i}.ln2.beta"),
                l.ln2.beta.view_mut().into_dyn(),
            );
            f(format!("layer{i}.ff1.w"), l.ff1.w.view_mut().into_dyn());
            f(format!("layer{i}.ff1.b"), l.ff1.b.view_mut().into_dyn());
            f(format!("layer{i}.ff2.w"), l.ff2.w.view_mut().into_dyn());
            f(format!("layer{i}.ff2.b"), l.ff2.b.view_mut().into_dyn());
        }
        f(
            "final_ln.gamma".into(),
            self.final_ln.gamma.view_mut().into_dyn(),
        );
        f(
            "final_ln.beta".into(),
            self.final_ln.beta.view_mut().into_dyn(),
        );
        f("head.w".into(), self.head.w.view_mut().into_dyn());
        f("head.b".into(), self.head.b.view_mut().into_dyn());
    }

    pub fn tensor_count(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |_, _| n += 1);
        n
    }
}

/// Forward mode: dropout is live only while training.
pub enum Mode<'r> {
    Eval,
    Train(&'r mut ChaCha8Rng),
}

struct AttnCache<F> {
    ln1: LnCache<F>,
    q: Array2<F>,
    k: Array2<F>,
    v: Array2<F>,
    probs: Vec<Array2<F>>,
    ctx: Array2<F>,
    drop: Option<Array2<F>>,
}

struct FfnCache<F> {
    ln2: LnCache<F>,
    hidden: Array2<F>,
    drop: Option<Array2<F>>,
}

struct LayerCache<F> {
    attn: AttnCache<F>,
    ffn: FfnCache<F>,
}

/// Everything the backward pass needs for one sample.
pub struct SampleCache<F> {
    pub ids: Vec<u32>,
    /// Token-embedding output, the attribution interpolation target.
    pub emb: Array2<F>,
    emb_drop: Option<Array2<F>>,
    layers: Vec<LayerCache<F>>,
    final_ln: LnCache<F>,
}

fn dropout_mask<F: Scalar>(
    rng: &mut ChaCha8Rng,
    p: f64,
    shape: (usize, usize),
) -> Option<Array2<F>> {
    if p <= 0.0 {
        return None;
    }
    let keep = F::of(1.0 / (1.0 - p));
    Some(Array2::from_shape_fn(shape, |_| {
        if rng.gen::<f64>() < p {
            F::zero()
        } else {
            keep
        }
    }))
}

fn apply_mask<F: Scalar>(x: &Array2<F>, mask: &Option<Array2<F>>) -> Array2<F> {
    match mask {
        Some(m) => x * m,
        None => x.clone(),
    }
}

/// Run one sample through the encoder starting from a given embedding
/// output. `emb` is `[len, d]`; `mask` marks real tokens.
pub fn forward_sample<F: Scalar>(
    params: &Params<F>,
    config: &ModelConfig,
    ids: &[u32],
    mask: &[bool],
    emb: Array2<F>,
    mode: &mut Mode<'_>,
) -> (F, SampleCache<F>) {
    let len = emb.nrows();
    let d = config.model_dim;
    let heads = config.heads;
    let dh = d / heads;
    let scale = F::of(1.0 / (dh as f64).sqrt());
    let p = config.dropout_p;

    let mut rng_drop = |shape: (usize, usize)| -> Option<Array2<F>> {
        match mode {
            Mode::Eval => None,
            Mode::Train(rng) => dropout_mask(rng, p, shape),
        }
    };

    // Embedding output plus learned positions.
    let mut x0 = emb.clone();
    x0 += &params.pos_emb.slice(s![0..len, ..]);
    let emb_drop = rng_drop((len, d));
    let x0 = apply_mask(&x0, &emb_drop);

    let neg = F::of(-1e30);
    let mut x = x0.clone();
    let mut layer_caches = Vec::with_capacity(params.layers.len());
    for layer in &params.layers {
        let x_in = x.clone();
        // Attention sublayer (pre-norm).
        let ln1 = layer.ln1.forward(&x);
        let q = layer.q.forward(&ln1.out);
        let k = layer.k.forward(&ln1.out);
        let v = layer.v.forward(&ln1.out);
        let mut ctx = Array2::zeros((len, d));
        let mut probs = Vec::with_capacity(heads);
        for h in 0..heads {
            let cols = s![.., h * dh..(h + 1) * dh];
            let qh = q.slice(cols);
            let kh = k.slice(cols);
            let vh = v.slice(cols);
            let mut scores = qh.dot(&kh.t());
            scores.mapv_inplace(|v| v * scale);
            for ((_, j), val) in scores.indexed_iter_mut() {
                if !mask[j] {
                    *val = neg;
                }
            }
            let ph = softmax_rows(&scores);
            ctx.slice_mut(cols).assign(&ph.dot(&vh));
            probs.push(ph);
        }
        let attn_out = layer.o.forward(&ctx);
        let drop1 = rng_drop((len, d));
        let x_mid = &x_in + &apply_mask(&attn_out, &drop1);

        // Feed-forward sublayer (pre-norm).
        let ln2 = layer.ln2.forward(&x_mid);
        let mut hidden = layer.ff1.forward(&ln2.out);
        hidden.mapv_inplace(|v| if v > F::zero() { v } else { F::zero() });
        let ff_out = layer.ff2.forward(&hidden);
        let drop2 = rng_drop((len, d));
        let x_out = &x_mid + &apply_mask(&ff_out, &drop2);

        layer_caches.push(LayerCache {
            attn: AttnCache {
                ln1,
                q,
                k,
                v,
                probs,
                ctx,
                drop: drop1,
            },
            ffn: FfnCache {
                ln2,
                hidden,
                drop: drop2,
            },
        });
        x = x_out;
    }
    let final_ln = params.final_ln.forward(&x);
    // Classification reads the [CLS] position.
    let cls = final_ln.out.row(0);
    let logit = cls.dot(&params.head.w.column(0)) + params.head.b[0];

    (
        logit,
        SampleCache {
            ids: ids.to_vec(),
            emb,
            emb_drop,
            layers: layer_caches,
            final_ln,
        },
    )
}

/// Gather token embeddings for one sample.
pub fn embed<F: Scalar>(params: &Params<F>, ids: &[u32]) -> Array2<F> {
    let d = params.tok_emb.ncols();
    let mut emb = Array2::zeros((ids.len(), d));
    for (i, &id) in ids.iter().enumerate() {
        emb.row_mut(i).assign(&params.tok_emb.row(id as usize));
    }
    emb
}

/// Backward from `dlogit` for one sample. Accumulates parameter
/// gradients into `grad` and returns the gradient at the embedding
/// output (the hook the attribution module uses).
pub fn backward_sample<F: Scalar>(
    params: &Params<F>,
    config: &ModelConfig,
    cache: &SampleCache<F>,
    dlogit: F,
    grad: &mut Params<F>,
) -> Array2<F> {
    let len = cache.emb.nrows();
    let d = config.model_dim;
    let heads = config.heads;
    let dh = d / heads;
    let scale = F::of(1.0 / (dh as f64).sqrt());

    // Head: logit = final_ln.out[0] · w + b.
    let cls = cache.final_ln.out.row(0);
    for j in 0..d {
        grad.head.w[[j, 0]] = grad.head.w[[j, 0]] + dlogit * cls[j];
    }
    grad.head.b[0] = grad.head.b[0] + dlogit;
    let mut dfinal = Array2::zeros((len, d));
    for j in 0..d {
        dfinal[[0, j]] = dlogit * params.head.w[[j, 0]];
    }

    let mut dx = params
        .final_ln
        .backward(&cache.final_ln, &dfinal, &mut grad.final_ln);

    for i in (0..params.layers.len()).rev() {
        let layer = &params.layers[i];
        let lc = &cache.layers[i];
        let glayer = &mut grad.layers[i];

        // x_out = x_mid + drop2 ⊙ ff2(relu(ff1(ln2(x_mid)))).
        let dff_out = apply_mask(&dx, &lc.ffn.drop);
        let mut dhidden = layer.ff2.backward(&lc.ffn.hidden, &dff_out, &mut glayer.ff2);
        for (dv, &h) in dhidden.iter_mut().zip(lc.ffn.hidden.iter()) {
            if h <= F::zero() {
                *dv = F::zero();
            }
        }
        let dln2_out = layer.ff1.backward(&lc.ffn.ln2.out, &dhidden, &mut glayer.ff1);
        let dx_from_ln2 = layer.ln2.backward(&lc.ffn.ln2, &dln2_out, &mut glayer.ln2);
        let dx_mid = &dx + &dx_from_ln2;

        // x_mid = x_in + drop1 ⊙ O(attention(ln1(x_in))).
        let dattn_out = apply_mask(&dx_mid, &lc.attn.drop);
        let dctx = layer.o.backward(&lc.attn.ctx, &dattn_out, &mut glayer.o);
        let mut dq: Array2<F> = Array2::zeros((len, d));
        let mut dk: Array2<F> = Array2::zeros((len, d));
        let mut dv: Array2<F> = Array2::zeros((len, d));
        for h in 0..heads {
            let cols = s![.., h * dh..(h + 1) * dh];
            let ph = &lc.attn.probs[h];
            let qh = lc.attn.q.slice(cols);
            let kh = lc.attn.k.slice(cols);
            let vh = lc.attn.v.slice(cols);
            let dctx_h = dctx.slice(cols);
            // ctx_h = p·v_h
            let dp = dctx_h.dot(&vh.t());
            dv.slice_mut(cols).assign(&ph.t().dot(&dctx_h));
            // Softmax rows; masked keys have p = 0 so their q/k grads
            // vanish on their own.
            let mut ds = Array2::zeros((len, len));
            for r in 0..len {
                let mut dot = F::zero();
                for c in 0..len {
                    dot = dot + dp[[r, c]] * ph[[r, c]];
                }
                for c in 0..len {
                    ds[[r, c]] = ph[[r, c]] * (dp[[r, c]] - dot);
                }
            }
            // scores = scale · q_h · k_h^T
            dq.slice_mut(cols).scaled_add(scale, &ds.dot(&kh));
            dk.slice_mut(cols).scaled_add(scale, &ds.t().dot(&qh));
        }
        let h_in = &lc.attn.ln1.out;
        let mut dln1_out = layer.q.backward(h_in, &dq, &mut glayer.q);
        dln1_out += &layer.k.backward(h_in, &dk, &mut glayer.k);
        dln1_out += &layer.v.backward(h_in, &dv, &mut glayer.v);
        let dx_from_ln1 = layer.ln1.backward(&lc.attn.ln1, &dln1_out, &mut glayer.ln1);
        dx = &dx_mid + &dx_from_ln1;
    }

    // x0 = drop0 ⊙ (emb + pos).
    let demb = apply_mask(&dx, &cache.emb_drop);
    for i in 0..len {
        for j in 0..d {
            grad.pos_emb[[i, j]] = grad.pos_emb[[i, j]] + demb[[i, j]];
        }
    }
    for (i, &id) in cache.ids.iter().enumerate() {
        let mut row = grad.tok_emb.row_mut(id as usize);
        row += &demb.row(i);
    }
    demb
}

fn softmax_rows<F: Scalar>(scores: &Array2<F>) -> Array2<F> {
    let mut out = scores.clone();
    for mut row in out.outer_iter_mut() {
        let max = row.iter().copied().fold(F::neg_infinity(), F::max);
        let mut sum = F::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum = sum + *v;
        }
        for v in row.iter_mut() {
            *v = *v / sum;
        }
    }
    out
}
