//! Decoder-only transformer over a flat parameter vector.
//!
//! Pre-norm blocks (layernorm, causal multi-head attention, layernorm,
//! tanh-GELU MLP), learned positional embeddings, and an output head tied to
//! the token embedding. Backward passes are written out by hand.

use super::linalg::{gemm, softmax_in_place, Scalar, View};
use super::ModelConfig;

const LN_EPS: f64 = 1e-5;

/// Offsets of every parameter tensor inside the flat vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Layout {
    pub v: usize,
    pub tmax: usize,
    pub c: usize,
    pub l: usize,
    pub h: usize,
    pub wte: usize,
    pub wpe: usize,
    pub ln1w: usize,
    pub ln1b: usize,
    pub qkvw: usize,
    pub qkvb: usize,
    pub attw: usize,
    pub attb: usize,
    pub ln2w: usize,
    pub ln2b: usize,
    pub fcw: usize,
    pub fcb: usize,
    pub fcpw: usize,
    pub fcpb: usize,
    pub lnfw: usize,
    pub lnfb: usize,
    pub total: usize,
}

impl Layout {
    pub fn new(cfg: &ModelConfig) -> Self {
        let (v, tmax, c, l) = (cfg.vocab_size, cfg.max_context, cfg.embed_dim, cfg.layers);
        let mut off = 0;
        let mut take = |n: usize| {
            let o = off;
            off += n;
            o
        };
        let wte = take(v * c);
        let wpe = take(tmax * c);
        let ln1w = take(l * c);
        let ln1b = take(l * c);
        let qkvw = take(l * c * 3 * c);
        let qkvb = take(l * 3 * c);
        let attw = take(l * c * c);
        let attb = take(l * c);
        let ln2w = take(l * c);
        let ln2b = take(l * c);
        let fcw = take(l * c * 4 * c);
        let fcb = take(l * 4 * c);
        let fcpw = take(l * 4 * c * c);
        let fcpb = take(l * c);
        let lnfw = take(c);
        let lnfb = take(c);
        Layout {
            v,
            tmax,
            c,
            l,
            h: cfg.heads,
            wte,
            wpe,
            ln1w,
            ln1b,
            qkvw,
            qkvb,
            attw,
            attb,
            ln2w,
            ln2b,
            fcw,
            fcb,
            fcpw,
            fcpb,
            lnfw,
            lnfb,
            total: off,
        }
    }

    /// Per-layer offsets: (ln1w, ln1b, qkvw, qkvb, attw, attb, ln2w, ln2b, fcw, fcb, fcpw, fcpb).
    fn layer(&self, l: usize) -> LayerOffsets {
        let c = self.c;
        LayerOffsets {
            ln1w: self.ln1w + l * c,
            ln1b: self.ln1b + l * c,
            qkvw: self.qkvw + l * c * 3 * c,
            qkvb: self.qkvb + l * 3 * c,
            attw: self.attw + l * c * c,
            attb: self.attb + l * c,
            ln2w: self.ln2w + l * c,
            ln2b: self.ln2b + l * c,
            fcw: self.fcw + l * c * 4 * c,
            fcb: self.fcb + l * 4 * c,
            fcpw: self.fcpw + l * 4 * c * c,
            fcpb: self.fcpb + l * c,
        }
    }

    /// Ranges initialized as residual-branch output projections.
    pub fn projection_ranges(&self) -> [std::ops::Range<usize>; 2] {
        let c = self.c;
        [self.attw..self.attw + self.l * c * c, self.fcpw..self.fcpw + self.l * 4 * c * c]
    }

    /// Ranges holding layernorm gains (initialized to one).
    pub fn gain_ranges(&self) -> [std::ops::Range<usize>; 3] {
        let c = self.c;
        [
            self.ln1w..self.ln1w + self.l * c,
            self.ln2w..self.ln2w + self.l * c,
            self.lnfw..self.lnfw + c,
        ]
    }

    /// Ranges holding biases (initialized to zero).
    pub fn bias_ranges(&self) -> Vec<std::ops::Range<usize>> {
        let c = self.c;
        let l = self.l;
        vec![
            self.ln1b..self.ln1b + l * c,
            self.qkvb..self.qkvb + l * 3 * c,
            self.attb..self.attb + l * c,
            self.ln2b..self.ln2b + l * c,
            self.fcb..self.fcb + l * 4 * c,
            self.fcpb..self.fcpb + l * c,
            self.lnfb..self.lnfb + c,
        ]
    }
}

#[derive(Debug, Clone, Copy)]
struct LayerOffsets {
    ln1w: usize,
    ln1b: usize,
    qkvw: usize,
    qkvb: usize,
    attw: usize,
    attb: usize,
    ln2w: usize,
    ln2b: usize,
    fcw: usize,
    fcb: usize,
    fcpw: usize,
    fcpb: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct LayerActs<T> {
    ln1: Vec<T>,
    ln1_mean: Vec<T>,
    ln1_rstd: Vec<T>,
    qkv: Vec<T>,
    att: Vec<T>,
    atty: Vec<T>,
    res2: Vec<T>,
    ln2: Vec<T>,
    ln2_mean: Vec<T>,
    ln2_rstd: Vec<T>,
    fch: Vec<T>,
    fch_gelu: Vec<T>,
    res3: Vec<T>,
}

/// Everything the backward pass needs from one forward pass.
#[derive(Debug, Clone)]
pub(crate) struct Acts<T> {
    pub t: usize,
    encoded: Vec<T>,
    layers: Vec<LayerActs<T>>,
    lnf: Vec<T>,
    lnf_mean: Vec<T>,
    lnf_rstd: Vec<T>,
    pub logits: Vec<T>,
    pub probs: Vec<T>,
}

fn layernorm_fwd<T: Scalar>(
    out: &mut [T],
    mean: &mut [T],
    rstd: &mut [T],
    inp: &[T],
    w: &[T],
    b: &[T],
    c: usize,
) {
    let inv_c = T::one() / T::of(c as f64);
    for (t, row) in inp.chunks_exact(c).enumerate() {
        let m = row.iter().copied().sum::<T>() * inv_c;
        let var = row.iter().map(|x| (*x - m) * (*x - m)).sum::<T>() * inv_c;
        let s = T::one() / (var + T::of(LN_EPS)).sqrt();
        for i in 0..c {
            out[t * c + i] = (row[i] - m) * s * w[i] + b[i];
        }
        mean[t] = m;
        rstd[t] = s;
    }
}

#[allow(clippy::too_many_arguments)]
fn layernorm_bwd<T: Scalar>(
    dinp: &mut [T],
    dw: &mut [T],
    db: &mut [T],
    dout: &[T],
    inp: &[T],
    w: &[T],
    mean: &[T],
    rstd: &[T],
    c: usize,
) {
    let inv_c = T::one() / T::of(c as f64);
    for t in 0..mean.len() {
        let row = &inp[t * c..(t + 1) * c];
        let drow = &dout[t * c..(t + 1) * c];
        let (m, s) = (mean[t], rstd[t]);
        let mut dnorm_mean = T::zero();
        let mut dnorm_norm_mean = T::zero();
        for i in 0..c {
            let norm = (row[i] - m) * s;
            let dnorm = w[i] * drow[i];
            dnorm_mean = dnorm_mean + dnorm;
            dnorm_norm_mean = dnorm_norm_mean + dnorm * norm;
        }
        dnorm_mean = dnorm_mean * inv_c;
        dnorm_norm_mean = dnorm_norm_mean * inv_c;
        for i in 0..c {
            let norm = (row[i] - m) * s;
            let dnorm = w[i] * drow[i];
            db[i] = db[i] + drow[i];
            dw[i] = dw[i] + norm * drow[i];
            dinp[t * c + i] = dinp[t * c + i] + (dnorm - dnorm_mean - norm * dnorm_norm_mean) * s;
        }
    }
}

/// `out[t x oc] = inp[t x c] * W[c x oc] + bias`.
fn matmul_fwd<T: Scalar>(out: &mut [T], inp: &[T], p: &[T], w: usize, b: usize, t: usize, c: usize, oc: usize) {
    gemm(t, c, oc, inp, View::rows(0, c), p, View::rows(w, oc), T::zero(), out, View::rows(0, oc));
    let bias = &p[b..b + oc];
    for row in out[..t * oc].chunks_exact_mut(oc) {
        for (o, bv) in row.iter_mut().zip(bias) {
            *o = *o + *bv;
        }
    }
}

/// Accumulates `dinp += dout W^T`, `dW += inp^T dout`, `db += colsum(dout)`.
#[allow(clippy::too_many_arguments)]
fn matmul_bwd<T: Scalar>(
    dinp: &mut [T],
    g: &mut [T],
    dout: &[T],
    inp: &[T],
    p: &[T],
    w: usize,
    b: usize,
    t: usize,
    c: usize,
    oc: usize,
) {
    gemm(t, oc, c, dout, View::rows(0, oc), p, View::t(w, oc), T::one(), dinp, View::rows(0, c));
    gemm(c, t, oc, inp, View::t(0, c), dout, View::rows(0, oc), T::one(), g, View::rows(w, oc));
    for row in dout[..t * oc].chunks_exact(oc) {
        for (gb, d) in g[b..b + oc].iter_mut().zip(row) {
            *gb = *gb + *d;
        }
    }
}

fn gelu_consts<T: Scalar>() -> (T, T) {
    (T::of((2.0 / std::f64::consts::PI).sqrt()), T::of(0.044715))
}

fn gelu_fwd<T: Scalar>(out: &mut [T], inp: &[T]) {
    let (s, k) = gelu_consts::<T>();
    let half = T::of(0.5);
    for (o, &x) in out.iter_mut().zip(inp) {
        *o = half * x * (T::one() + (s * (x + k * x * x * x)).tanh());
    }
}

fn gelu_bwd<T: Scalar>(dinp: &mut [T], inp: &[T], dout: &[T]) {
    let (s, k) = gelu_consts::<T>();
    let half = T::of(0.5);
    let three = T::of(3.0);
    for ((di, &x), &d) in dinp.iter_mut().zip(inp).zip(dout) {
        let th = (s * (x + k * x * x * x)).tanh();
        let sech2 = T::one() - th * th;
        let local = half * (T::one() + th) + half * x * sech2 * s * (T::one() + three * k * x * x);
        *di = local * d;
    }
}

/// Causal attention for all heads. `att` holds `h` row-major `t x t` blocks.
fn attention_fwd<T: Scalar>(atty: &mut [T], att: &mut [T], qkv: &[T], t: usize, c: usize, h: usize) {
    let hs = c / h;
    let scale = T::one() / T::of(hs as f64).sqrt();
    for head in 0..h {
        let a0 = head * t * t;
        gemm(
            t,
            hs,
            t,
            qkv,
            View::rows(head * hs, 3 * c),
            qkv,
            View::t(c + head * hs, 3 * c),
            T::zero(),
            att,
            View::rows(a0, t),
        );
        for i in 0..t {
            let row = &mut att[a0 + i * t..a0 + (i + 1) * t];
            for v in row[..=i].iter_mut() {
                *v = *v * scale;
            }
            softmax_in_place(&mut row[..=i]);
            for v in row[i + 1..].iter_mut() {
                *v = T::zero();
            }
        }
        gemm(
            t,
            t,
            hs,
            att,
            View::rows(a0, t),
            qkv,
            View::rows(2 * c + head * hs, 3 * c),
            T::zero(),
            atty,
            View::rows(head * hs, c),
        );
    }
}

#[allow(clippy::too_many_arguments)]
fn attention_bwd<T: Scalar>(
    dqkv: &mut [T],
    scratch: &mut [T],
    datty: &[T],
    qkv: &[T],
    att: &[T],
    t: usize,
    c: usize,
    h: usize,
) {
    let hs = c / h;
    let scale = T::one() / T::of(hs as f64).sqrt();
    for head in 0..h {
        let a0 = head * t * t;
        gemm(
            t,
            hs,
            t,
            datty,
            View::rows(head * hs, c),
            qkv,
            View::t(2 * c + head * hs, 3 * c),
            T::zero(),
            scratch,
            View::rows(0, t),
        );
        gemm(
            t,
            t,
            hs,
            att,
            View::t(a0, t),
            datty,
            View::rows(head * hs, c),
            T::one(),
            dqkv,
            View::rows(2 * c + head * hs, 3 * c),
        );
        for i in 0..t {
            let a = &att[a0 + i * t..a0 + (i + 1) * t];
            let d = &mut scratch[i * t..(i + 1) * t];
            let dot: T = (0..=i).map(|j| a[j] * d[j]).sum();
            for j in 0..=i {
                d[j] = a[j] * (d[j] - dot) * scale;
            }
            for v in d[i + 1..].iter_mut() {
                *v = T::zero();
            }
        }
        gemm(
            t,
            t,
            hs,
            scratch,
            View::rows(0, t),
            qkv,
            View::rows(c + head * hs, 3 * c),
            T::one(),
            dqkv,
            View::rows(head * hs, 3 * c),
        );
        gemm(
            t,
            t,
            hs,
            scratch,
            View::t(0, t),
            qkv,
            View::rows(head * hs, 3 * c),
            T::one(),
            dqkv,
            View::rows(c + head * hs, 3 * c),
        );
    }
}

pub(crate) fn forward<T: Scalar>(lay: &Layout, p: &[T], tokens: &[u32]) -> Acts<T> {
    let (t, c, v, h) = (tokens.len(), lay.c, lay.v, lay.h);
    assert!(t >= 1 && t <= lay.tmax, "sequence length {t} outside [1, {}]", lay.tmax);
    let z = |n: usize| vec![T::zero(); n];

    let mut encoded = z(t * c);
    for (i, &tok) in tokens.iter().enumerate() {
        let te = &p[lay.wte + tok as usize * c..lay.wte + (tok as usize + 1) * c];
        let pe = &p[lay.wpe + i * c..lay.wpe + (i + 1) * c];
        for j in 0..c {
            encoded[i * c + j] = te[j] + pe[j];
        }
    }

    let mut layers: Vec<LayerActs<T>> = Vec::with_capacity(lay.l);
    for l in 0..lay.l {
        let o = lay.layer(l);
        let inp = if l == 0 { &encoded } else { &layers[l - 1].res3 };
        let mut a = LayerActs {
            ln1: z(t * c),
            ln1_mean: z(t),
            ln1_rstd: z(t),
            qkv: z(t * 3 * c),
            att: z(h * t * t),
            atty: z(t * c),
            res2: z(t * c),
            ln2: z(t * c),
            ln2_mean: z(t),
            ln2_rstd: z(t),
            fch: z(t * 4 * c),
            fch_gelu: z(t * 4 * c),
            res3: z(t * c),
        };
        layernorm_fwd(&mut a.ln1, &mut a.ln1_mean, &mut a.ln1_rstd, inp, &p[o.ln1w..], &p[o.ln1b..], c);
        matmul_fwd(&mut a.qkv, &a.ln1, p, o.qkvw, o.qkvb, t, c, 3 * c);
        attention_fwd(&mut a.atty, &mut a.att, &a.qkv, t, c, h);
        matmul_fwd(&mut a.res2, &a.atty, p, o.attw, o.attb, t, c, c);
        for (r, x) in a.res2.iter_mut().zip(inp.iter()) {
            *r = *r + *x;
        }
        layernorm_fwd(&mut a.ln2, &mut a.ln2_mean, &mut a.ln2_rstd, &a.res2, &p[o.ln2w..], &p[o.ln2b..], c);
        matmul_fwd(&mut a.fch, &a.ln2, p, o.fcw, o.fcb, t, c, 4 * c);
        gelu_fwd(&mut a.fch_gelu, &a.fch);
        matmul_fwd(&mut a.res3, &a.fch_gelu, p, o.fcpw, o.fcpb, t, 4 * c, c);
        for (r, x) in a.res3.iter_mut().zip(a.res2.iter()) {
            *r = *r + *x;
        }
        layers.push(a);
    }

    let last = layers.last().map(|a| &a.res3).unwrap_or(&encoded);
    let (mut lnf, mut lnf_mean, mut lnf_rstd) = (z(t * c), z(t), z(t));
    layernorm_fwd(&mut lnf, &mut lnf_mean, &mut lnf_rstd, last, &p[lay.lnfw..], &p[lay.lnfb..], c);
    let mut logits = z(t * v);
    gemm(t, c, v, &lnf, View::rows(0, c), p, View::t(lay.wte, c), T::zero(), &mut logits, View::rows(0, v));
    let mut probs = logits.clone();
    for row in probs.chunks_exact_mut(v) {
        softmax_in_place(row);
    }
    Acts { t, encoded, layers, lnf, lnf_mean, lnf_rstd, logits, probs }
}

/// Summed cross-entropy of `tokens[i + 1]` under position `i`'s distribution,
/// over positions whose target is flagged in `mask`, and the count of them.
pub(crate) fn masked_loss<T: Scalar>(acts: &Acts<T>, v: usize, tokens: &[u32], mask: &[bool]) -> (f64, usize) {
    let mut sum = 0.0;
    let mut n = 0;
    for i in 0..acts.t.saturating_sub(1) {
        if mask[i + 1] {
            let p = acts.probs[i * v + tokens[i + 1] as usize].to_f64().expect("finite");
            sum -= p.max(f64::MIN_POSITIVE).ln();
            n += 1;
        }
    }
    (sum, n)
}

/// Accumulates into `g` the gradient of `scale * masked_loss` for one
/// sequence.
pub(crate) fn backward<T: Scalar>(
    lay: &Layout,
    p: &[T],
    g: &mut [T],
    acts: &Acts<T>,
    tokens: &[u32],
    mask: &[bool],
    scale: T,
) {
    let (t, c, v, h) = (acts.t, lay.c, lay.v, lay.h);
    let z = |n: usize| vec![T::zero(); n];

    let mut dlogits = z(t * v);
    for i in 0..t.saturating_sub(1) {
        if mask[i + 1] {
            let row = &mut dlogits[i * v..(i + 1) * v];
            row.copy_from_slice(&acts.probs[i * v..(i + 1) * v]);
            row[tokens[i + 1] as usize] = row[tokens[i + 1] as usize] - T::one();
            for d in row.iter_mut() {
                *d = *d * scale;
            }
        }
    }
    let mut dlnf = z(t * c);
    gemm(t, v, c, &dlogits, View::rows(0, v), p, View::rows(lay.wte, c), T::zero(), &mut dlnf, View::rows(0, c));
    gemm(v, t, c, &dlogits, View::t(0, v), &acts.lnf, View::rows(0, c), T::one(), g, View::rows(lay.wte, c));

    let mut dres = z(t * c);
    {
        let last = acts.layers.last().map(|a| &a.res3).unwrap_or(&acts.encoded);
        let (gw, gb) = split_pair(g, lay.lnfw, lay.lnfb, c);
        layernorm_bwd(&mut dres, gw, gb, &dlnf, last, &p[lay.lnfw..], &acts.lnf_mean, &acts.lnf_rstd, c);
    }

    let mut dln = z(t * c);
    let mut dgelu = z(t * 4 * c);
    let mut dfch = z(t * 4 * c);
    let mut datty = z(t * c);
    let mut dqkv = z(t * 3 * c);
    let mut scratch = z(t * t);
    for l in (0..lay.l).rev() {
        let o = lay.layer(l);
        let a = &acts.layers[l];
        let inp = if l == 0 { &acts.encoded } else { &acts.layers[l - 1].res3 };

        dgelu.fill(T::zero());
        matmul_bwd(&mut dgelu, g, &dres, &a.fch_gelu, p, o.fcpw, o.fcpb, t, 4 * c, c);
        gelu_bwd(&mut dfch, &a.fch, &dgelu);
        dln.fill(T::zero());
        matmul_bwd(&mut dln, g, &dfch, &a.ln2, p, o.fcw, o.fcb, t, c, 4 * c);
        {
            let (gw, gb) = split_pair(g, o.ln2w, o.ln2b, c);
            layernorm_bwd(&mut dres, gw, gb, &dln, &a.res2, &p[o.ln2w..], &a.ln2_mean, &a.ln2_rstd, c);
        }

        datty.fill(T::zero());
        matmul_bwd(&mut datty, g, &dres, &a.atty, p, o.attw, o.attb, t, c, c);
        dqkv.fill(T::zero());
        attention_bwd(&mut dqkv, &mut scratch, &datty, &a.qkv, &a.att, t, c, h);
        dln.fill(T::zero());
        matmul_bwd(&mut dln, g, &dqkv, &a.ln1, p, o.qkvw, o.qkvb, t, c, 3 * c);
        {
            let (gw, gb) = split_pair(g, o.ln1w, o.ln1b, c);
            layernorm_bwd(&mut dres, gw, gb, &dln, inp, &p[o.ln1w..], &a.ln1_mean, &a.ln1_rstd, c);
        }
    }

    for (i, &tok) in tokens.iter().enumerate() {
        let d = &dres[i * c..(i + 1) * c];
        for j in 0..c {
            let te = lay.wte + tok as usize * c + j;
            g[te] = g[te] + d[j];
            let pe = lay.wpe + i * c + j;
            g[pe] = g[pe] + d[j];
        }
    }
}

/// Two disjoint `c`-long mutable windows of `g`, `a < b`.
fn split_pair<T>(g: &mut [T], a: usize, b: usize, c: usize) -> (&mut [T], &mut [T]) {
    debug_assert!(a + c <= b);
    let (lo, hi) = g.split_at_mut(b);
    (&mut lo[a..a + c], &mut hi[..c])
}

/// Per-layer key/value rows for incremental decoding.
#[derive(Debug, Clone)]
pub(crate) struct KvCache<T> {
    k: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
    pub len: usize,
}

/// Runs the prompt through the batched forward pass, returning the cache and
/// the logits at the last position.
pub(crate) fn prefill<T: Scalar>(lay: &Layout, p: &[T], tokens: &[u32]) -> (KvCache<T>, Vec<T>) {
    let acts = forward(lay, p, tokens);
    let (t, c, v) = (acts.t, lay.c, lay.v);
    let mut cache = KvCache { k: Vec::with_capacity(lay.l), v: Vec::with_capacity(lay.l), len: t };
    for a in &acts.layers {
        let mut k = Vec::with_capacity(lay.tmax * c);
        let mut vv = Vec::with_capacity(lay.tmax * c);
        for row in a.qkv.chunks_exact(3 * c) {
            k.extend_from_slice(&row[c..2 * c]);
            vv.extend_from_slice(&row[2 * c..]);
        }
        cache.k.push(k);
        cache.v.push(vv);
    }
    let logits = acts.logits[(t - 1) * v..t * v].to_vec();
    (cache, logits)
}

/// Appends `token` at position `cache.len` and returns its next-token logits.
pub(crate) fn step<T: Scalar>(lay: &Layout, p: &[T], cache: &mut KvCache<T>, token: u32) -> Vec<T> {
    let (c, v, h) = (lay.c, lay.v, lay.h);
    let hs = c / h;
    let pos = cache.len;
    assert!(pos < lay.tmax, "context of {} tokens exhausted", lay.tmax);
    let scale = T::one() / T::of(hs as f64).sqrt();
    let z = |n: usize| vec![T::zero(); n];

    let mut x = z(c);
    for j in 0..c {
        x[j] = p[lay.wte + token as usize * c + j] + p[lay.wpe + pos * c + j];
    }
    let (mut ln, mut mean, mut rstd) = (z(c), z(1), z(1));
    let mut qkv = z(3 * c);
    let mut atty = z(c);
    let mut proj = z(c);
    let mut fch = z(4 * c);
    let mut fch_gelu = z(4 * c);
    let mut scores = z(pos + 1);
    for l in 0..lay.l {
        let o = lay.layer(l);
        layernorm_fwd(&mut ln, &mut mean, &mut rstd, &x, &p[o.ln1w..], &p[o.ln1b..], c);
        matmul_fwd(&mut qkv, &ln, p, o.qkvw, o.qkvb, 1, c, 3 * c);
        cache.k[l].extend_from_slice(&qkv[c..2 * c]);
        cache.v[l].extend_from_slice(&qkv[2 * c..]);
        for head in 0..h {
            let q = &qkv[head * hs..(head + 1) * hs];
            for (j, s) in scores.iter_mut().enumerate() {
                let k = &cache.k[l][j * c + head * hs..j * c + (head + 1) * hs];
                *s = q.iter().zip(k).map(|(a, b)| *a * *b).sum::<T>() * scale;
            }
            softmax_in_place(&mut scores);
            let y = &mut atty[head * hs..(head + 1) * hs];
            y.fill(T::zero());
            for (j, &w) in scores.iter().enumerate() {
                let vv = &cache.v[l][j * c + head * hs..j * c + (head + 1) * hs];
                for (yi, vi) in y.iter_mut().zip(vv) {
                    *yi = *yi + w * *vi;
                }
            }
        }
        matmul_fwd(&mut proj, &atty, p, o.attw, o.attb, 1, c, c);
        for (xi, pi) in x.iter_mut().zip(&proj) {
            *xi = *xi + *pi;
        }
        layernorm_fwd(&mut ln, &mut mean, &mut rstd, &x, &p[o.ln2w..], &p[o.ln2b..], c);
        matmul_fwd(&mut fch, &ln, p, o.fcw, o.fcb, 1, c, 4 * c);
        gelu_fwd(&mut fch_gelu, &fch);
        matmul_fwd(&mut proj, &fch_gelu, p, o.fcpw, o.fcpb, 1, 4 * c, c);
        for (xi, pi) in x.iter_mut().zip(&proj) {
            *xi = *xi + *pi;
        }
    }
    cache.len += 1;
    layernorm_fwd(&mut ln, &mut mean, &mut rstd, &x, &p[lay.lnfw..], &p[lay.lnfb..], c);
    let mut logits = z(v);
    gemm(1, c, v, &ln, View::rows(0, c), p, View::t(lay.wte, c), T::zero(), &mut logits, View::rows(0, v));
    logits
}
