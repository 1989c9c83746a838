//! Linear Q/K auto-encoder along the head axis: a learnable compressor
//! that trades off-chip traffic for a little decode compute, plus a
//! full-batch gradient-descent trainer and a closed-form rank oracle.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::tensor::DenseTensor;

/// Per-head activation tensor: `h` heads of `n` tokens with `d_k` features.
/// Layout is head-major: `data[(head * n + token) * d_k + feat]`.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadTensor {
    pub h: usize,
    pub n: usize,
    pub d_k: usize,
    data: Vec<f64>,
}

impl HeadTensor {
    pub fn new(h: usize, n: usize, d_k: usize, data: Vec<f64>) -> Result<Self> {
        if h == 0 || n == 0 || d_k == 0 {
            return Err(Error::Shape("HeadTensor axes must be positive".into()));
        }
        if data.len() != h * n * d_k {
            return Err(Error::Shape(format!(
                "data length {} != h*n*d_k = {}",
                data.len(),
                h * n * d_k
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain("non-finite entry".into()));
        }
        Ok(Self { h, n, d_k, data })
    }

    pub fn zeros(h: usize, n: usize, d_k: usize) -> Self {
        Self {
            h,
            n,
            d_k,
            data: vec![0.0; h * n * d_k],
        }
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, head: usize, token: usize, feat: usize) -> f64 {
        self.data[(head * self.n + token) * self.d_k + feat]
    }

    pub fn set(&mut self, head: usize, token: usize, feat: usize, v: f64) {
        self.data[(head * self.n + token) * self.d_k + feat] = v;
    }

    /// Positions per head (token x feature count).
    pub fn positions(&self) -> usize {
        self.n * self.d_k
    }

    pub fn from_tensor(t: &DenseTensor) -> Result<Self> {
        match t.shape() {
            [h, n, d_k] => Self::new(*h, *n, *d_k, t.data().to_vec()),
            s => Err(Error::Shape(format!(
                "expected [h, n, d_k] tensor, got {s:?}"
            ))),
        }
    }

    pub fn to_tensor(&self) -> DenseTensor {
        DenseTensor::new(vec![self.h, self.n, self.d_k], self.data.clone())
            .expect("valid by construction")
    }
}

/// Encoder/decoder weight pair. `w_enc` is `h x h_c` row-major, `w_dec`
/// is `h_c x h` row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AeModule {
    pub h: usize,
    pub h_c: usize,
    pub w_enc: Vec<f64>,
    pub w_dec: Vec<f64>,
}

impl AeModule {
    pub fn new(h: usize, h_c: usize, w_enc: Vec<f64>, w_dec: Vec<f64>) -> Result<Self> {
        if h_c == 0 || h_c > h {
            return Err(Error::Argument(format!("h_c {h_c} must be in 1..={h}")));
        }
        if w_enc.len() != h * h_c || w_dec.len() != h_c * h {
            return Err(Error::Shape("weight shapes must be h*h_c".into()));
        }
        if w_enc.iter().chain(&w_dec).any(|x| !x.is_finite()) {
            return Err(Error::Domain("non-finite weight".into()));
        }
        Ok(Self {
            h,
            h_c,
            w_enc,
            w_dec,
        })
    }

    /// Seeded uniform init in [-1/sqrt(h), 1/sqrt(h)].
    pub fn init_uniform(h: usize, h_c: usize, seed: u64) -> Result<Self> {
        let bound = 1.0 / (h as f64).sqrt();
        let mut rng = SplitMix64::new(seed);
        let w_enc: Vec<f64> = (0..h * h_c)
            .map(|_| rng.next_range(-bound, bound))
            .collect();
        let w_dec: Vec<f64> = (0..h_c * h)
            .map(|_| rng.next_range(-bound, bound))
            .collect();
        Self::new(h, h_c, w_enc, w_dec)
    }

    /// Identity-selector init: the encoder keeps the first `h_c` heads and
    /// the decoder writes them back. Gives zero loss when `h_c == h`.
    pub fn init_identity(h: usize, h_c: usize) -> Result<Self> {
        let mut w_enc = vec![0.0; h * h_c];
        let mut w_dec = vec![0.0; h_c * h];
        for c in 0..h_c {
            w_enc[c * h_c + c] = 1.0;
            w_dec[c * h + c] = 1.0;
        }
        Self::new(h, h_c, w_enc, w_dec)
    }

    /// Encoded byte volume relative to the original.
    pub fn compression_ratio(&self) -> f64 {
        self.h_c as f64 / self.h as f64
    }
}

/// Compresses along the head axis: `out[:, t, f] = w_enc^T x[:, t, f]`.
pub fn encode(x: &HeadTensor, ae: &AeModule) -> Result<HeadTensor> {
    if x.h != ae.h {
        return Err(Error::Shape(format!(
            "input has {} heads, module expects {}",
            x.h, ae.h
        )));
    }
    let mut out = HeadTensor::zeros(ae.h_c, x.n, x.d_k);
    for t in 0..x.n {
        for f in 0..x.d_k {
            for c in 0..ae.h_c {
                let mut acc = 0.0;
                for i in 0..ae.h {
                    acc += ae.w_enc[i * ae.h_c + c] * x.get(i, t, f);
                }
                out.set(c, t, f, acc);
            }
        }
    }
    Ok(out)
}

/// Recovers the head axis: `out[:, t, f] = w_dec^T xc[:, t, f]`.
pub fn decode(xc: &HeadTensor, ae: &AeModule) -> Result<HeadTensor> {
    if xc.h != ae.h_c {
        return Err(Error::Shape(format!(
            "input has {} heads, module decodes from {}",
            xc.h, ae.h_c
        )));
    }
    let mut out = HeadTensor::zeros(ae.h, xc.n, xc.d_k);
    for t in 0..xc.n {
        for f in 0..xc.d_k {
            for i in 0..ae.h {
                let mut acc = 0.0;
                for c in 0..ae.h_c {
                    acc += ae.w_dec[c * ae.h + i] * xc.get(c, t, f);
                }
                out.set(i, t, f, acc);
            }
        }
    }
    Ok(out)
}

/// Mean squared error over all elements.
pub fn reconstruction_error(x: &HeadTensor, x_rec: &HeadTensor) -> Result<f64> {
    if (x.h, x.n, x.d_k) != (x_rec.h, x_rec.n, x_rec.d_k) {
        return Err(Error::Shape("tensors must have identical shapes".into()));
    }
    let sum: f64 = x
        .data
        .iter()
        .zip(&x_rec.data)
        .map(|(a, b)| {
            let d = a - b;
            d * d
        })
        .sum();
    Ok(sum / x.data.len() as f64)
}

/// Trainer settings. The trainer runs full-batch gradient descent; when
/// `batch_size` is set, each epoch instead sweeps the samples in fixed
/// order in chunks of that size.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: Option<usize>,
    pub seed: u64,
    pub lambda_recon: f64,
    pub identity_init: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 2000,
            lr: 0.05,
            batch_size: None,
            seed: 0,
            lambda_recon: 1.0,
            identity_init: false,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Argument("epochs must be positive".into()));
        }
        if self.lr <= 0.0 {
            return Err(Error::Argument("learning rate must be positive".into()));
        }
        if self.lambda_recon <= 0.0 {
            return Err(Error::Argument("lambda_recon must be positive".into()));
        }
        Ok(())
    }
}

/// Synthetic head tensor whose first `base` heads are random and whose
/// remaining heads are exact linear mixtures of them, plus optional
/// additive noise of standard deviation `sigma`. Tensors sharing
/// `coeff_seed` live in the same rank-`base` head subspace, so a shared
/// module can reconstruct a noiseless pair exactly.
pub fn gen_mixture_tensor(
    h: usize,
    base: usize,
    n: usize,
    d_k: usize,
    sigma: f64,
    seed: u64,
    coeff_seed: u64,
) -> Result<HeadTensor> {
    if base == 0 || base > h {
        return Err(Error::Argument(format!("base {base} must be in 1..={h}")));
    }
    let mut rng = SplitMix64::new(seed);
    let mut t = HeadTensor::zeros(h, n, d_k);
    for head in 0..base {
        for tok in 0..n {
            for f in 0..d_k {
                t.set(head, tok, f, rng.next_range(-1.0, 1.0));
            }
        }
    }
    let mut coeff_rng = SplitMix64::new(coeff_seed);
    let coeffs: Vec<f64> = (0..(h - base) * base)
        .map(|_| coeff_rng.next_range(-1.0, 1.0))
        .collect();
    for head in base..h {
        for tok in 0..n {
            for f in 0..d_k {
                let mut acc = 0.0;
                for b in 0..base {
                    acc += coeffs[(head - base) * base + b] * t.get(b, tok, f);
                }
                t.set(head, tok, f, acc);
            }
        }
    }
    if sigma > 0.0 {
        for head in 0..h {
            for tok in 0..n {
                for f in 0..d_k {
                    // Sum of 12 uniforms, shifted: approximately normal.
                    let g: f64 = (0..12).map(|_| rng.next_f64()).sum::<f64>() - 6.0;
                    t.set(head, tok, f, t.get(head, tok, f) + sigma * g);
                }
            }
        }
    }
    Ok(t)
}

/// Head-major unfold: each tensor becomes an `h x (n*d_k)` matrix whose
/// columns are the per-position head vectors.
fn unfold(x: &HeadTensor) -> (usize, usize, Vec<f64>) {
    let p = x.positions();
    let mut m = vec![0.0; x.h * p];
    for head in 0..x.h {
        for t in 0..x.n {
            for f in 0..x.d_k {
                m[head * p + t * x.d_k + f] = x.get(head, t, f);
            }
        }
    }
    (x.h, p, m)
}

struct Gd {
    w_enc: Vec<f64>,
    w_dec: Vec<f64>,
    h: usize,
    h_c: usize,
}

impl Gd {
    /// Loss and gradient contribution of one unfolded matrix. Returns the
    /// summed squared residual; gradients accumulate into the buffers.
    fn accumulate(
        &self,
        m: &[f64],
        p: usize,
        grad_enc: &mut [f64],
        grad_dec: &mut [f64],
        scale: f64,
    ) -> f64 {
        let (h, h_c) = (self.h, self.h_c);
        // enc = W_e^T M  (h_c x p)
        let mut enc = vec![0.0; h_c * p];
        for c in 0..h_c {
            for i in 0..h {
                let w = self.w_enc[i * h_c + c];
                if w == 0.0 {
                    continue;
                }
                let row = &m[i * p..(i + 1) * p];
                let out = &mut enc[c * p..(c + 1) * p];
                for (o, &v) in out.iter_mut().zip(row) {
                    *o += w * v;
                }
            }
        }
        // rec = W_d^T enc  (h x p); residual r = rec - m
        let mut resid = vec![0.0; h * p];
        for i in 0..h {
            let out = &mut resid[i * p..(i + 1) * p];
            for c in 0..h_c {
                let w = self.w_dec[c * h + i];
                if w == 0.0 {
                    continue;
                }
                let row = &enc[c * p..(c + 1) * p];
                for (o, &v) in out.iter_mut().zip(row) {
                    *o += w * v;
                }
            }
            let row = &m[i * p..(i + 1) * p];
            for (o, &v) in out.iter_mut().zip(row) {
                *o -= v;
            }
        }
        let sq_err: f64 = resid.iter().map(|r| r * r).sum();
        if scale == 0.0 {
            return sq_err; // loss-only evaluation
        }

        // grad_dec += scale * enc * resid^T  (h_c x h)
        for c in 0..h_c {
            for i in 0..h {
                let mut acc = 0.0;
                let er = &enc[c * p..(c + 1) * p];
                let rr = &resid[i * p..(i + 1) * p];
                for (e, r) in er.iter().zip(rr) {
                    acc += e * r;
                }
                grad_dec[c * h + i] += scale * acc;
            }
        }
        // grad_enc += scale * M * (W_d resid ... )  -> M (resid^T W_d^T):
        // g_enc[i][c] = sum_pos m[i,pos] * (sum_j w_dec[c][j] * resid[j,pos])
        let mut dr = vec![0.0; h_c * p]; // W_d resid  (h_c x p)
        for c in 0..h_c {
            let out = &mut dr[c * p..(c + 1) * p];
            for j in 0..h {
                let w = self.w_dec[c * h + j];
                if w == 0.0 {
                    continue;
                }
                let row = &resid[j * p..(j + 1) * p];
                for (o, &v) in out.iter_mut().zip(row) {
                    *o += w * v;
                }
            }
        }
        for i in 0..h {
            for c in 0..h_c {
                let mut acc = 0.0;
                let mr = &m[i * p..(i + 1) * p];
                let dr_row = &dr[c * p..(c + 1) * p];
                for (a, b) in mr.iter().zip(dr_row) {
                    acc += a * b;
                }
                grad_enc[i * h_c + c] += scale * acc;
            }
        }
        sq_err
    }
}

/// Trains one shared module by gradient descent over every stream in
/// `streams`; the loss is the element-wise MSE across all of them,
/// weighted by `lambda_recon`.
fn train_streams(
    streams: &[&HeadTensor],
    h_c: usize,
    cfg: &TrainConfig,
) -> Result<(AeModule, Vec<f64>)> {
    cfg.validate()?;
    let first = streams
        .first()
        .ok_or_else(|| Error::Argument("need at least one sample".into()))?;
    let h = first.h;
    if h_c == 0 || h_c > h {
        return Err(Error::Argument(format!("h_c {h_c} must be in 1..={h}")));
    }
    for s in streams {
        if (s.h, s.n, s.d_k) != (first.h, first.n, first.d_k) {
            return Err(Error::Shape("all samples must share one shape".into()));
        }
    }

    let unfolded: Vec<(usize, usize, Vec<f64>)> = streams.iter().map(|s| unfold(s)).collect();
    let total_elems: usize = unfolded.iter().map(|(h, p, _)| h * p).sum();

    let mut gd = {
        let module = if cfg.identity_init {
            AeModule::init_identity(h, h_c)?
        } else {
            AeModule::init_uniform(h, h_c, cfg.seed)?
        };
        Gd {
            w_enc: module.w_enc,
            w_dec: module.w_dec,
            h,
            h_c,
        }
    };

    let batch = cfg.batch_size.unwrap_or(unfolded.len()).max(1);
    let mut grad_enc = vec![0.0; h * h_c];
    let mut grad_dec = vec![0.0; h_c * h];

    let loss_of = |gd: &Gd| -> f64 {
        let mut scratch_e = vec![0.0; h * h_c];
        let mut scratch_d = vec![0.0; h_c * h];
        let mut sq = 0.0;
        for (_, p, m) in &unfolded {
            sq += gd.accumulate(m, *p, &mut scratch_e, &mut scratch_d, 0.0);
        }
        cfg.lambda_recon * sq / total_elems as f64
    };

    let initial = loss_of(&gd);
    let mut trajectory = Vec::with_capacity(cfg.epochs + 1);
    trajectory.push(initial);

    for _epoch in 0..cfg.epochs {
        for chunk in unfolded.chunks(batch) {
            grad_enc.iter_mut().for_each(|g| *g = 0.0);
            grad_dec.iter_mut().for_each(|g| *g = 0.0);
            let chunk_elems: usize = chunk.iter().map(|(h, p, _)| h * p).sum();
            let scale = 2.0 * cfg.lambda_recon / chunk_elems as f64;
            for (_, p, m) in chunk {
                gd.accumulate(m, *p, &mut grad_enc, &mut grad_dec, scale);
            }
            for (w, g) in gd.w_enc.iter_mut().zip(&grad_enc) {
                *w -= cfg.lr * g;
            }
            for (w, g) in gd.w_dec.iter_mut().zip(&grad_dec) {
                *w -= cfg.lr * g;
            }
        }
        let loss = loss_of(&gd);
        if !loss.is_finite() || (initial > 0.0 && loss > 1e6 * initial) {
            return Err(Error::Divergence(format!(
                "loss {loss:.3e} exceeds 1e6x the initial {initial:.3e}; lower the learning rate"
            )));
        }
        trajectory.push(loss);
    }

    let module = AeModule::new(h, h_c, gd.w_enc, gd.w_dec)?;
    Ok((module, trajectory))
}

/// Trains one shared module on paired (Q, K) samples: full-batch gradient
/// descent on `MSE(Q, Q') + MSE(K, K')` (element-wise across both streams).
pub fn train_ae(
    samples: &[(HeadTensor, HeadTensor)],
    h_c: usize,
    cfg: &TrainConfig,
) -> Result<(AeModule, Vec<f64>)> {
    let streams: Vec<&HeadTensor> = samples.iter().flat_map(|(q, k)| [q, k]).collect();
    train_streams(&streams, h_c, cfg)
}

/// Trains a module on a single tensor stream (used for the separate
/// per-tensor modules that are the default in the pipeline).
pub fn train_ae_single(
    samples: &[HeadTensor],
    h_c: usize,
    cfg: &TrainConfig,
) -> Result<(AeModule, Vec<f64>)> {
    let streams: Vec<&HeadTensor> = samples.iter().collect();
    train_streams(&streams, h_c, cfg)
}

/// Best rank-`h_c` module in the least-squares sense, from the top
/// eigenvectors of the head-covariance of the stacked unfoldings. Serves
/// as the trainer's quality oracle: no module can reconstruct better.
pub fn optimal_ae(samples: &[(HeadTensor, HeadTensor)], h_c: usize) -> Result<(AeModule, f64)> {
    let streams: Vec<&HeadTensor> = samples.iter().flat_map(|(q, k)| [q, k]).collect();
    optimal_streams(&streams, h_c)
}

/// Single-stream variant of [`optimal_ae`].
pub fn optimal_ae_single(samples: &[HeadTensor], h_c: usize) -> Result<(AeModule, f64)> {
    let streams: Vec<&HeadTensor> = samples.iter().collect();
    optimal_streams(&streams, h_c)
}

fn optimal_streams(streams: &[&HeadTensor], h_c: usize) -> Result<(AeModule, f64)> {
    let first = streams
        .first()
        .ok_or_else(|| Error::Argument("need at least one sample".into()))?;
    let h = first.h;
    if h_c == 0 || h_c > h {
        return Err(Error::Argument(format!("h_c {h_c} must be in 1..={h}")));
    }

    // Head covariance C = sum of M M^T over all unfolded samples.
    let mut cov = vec![0.0; h * h];
    let mut total_elems = 0usize;
    for s in streams {
        if s.h != h {
            return Err(Error::Shape("all samples must share one head count".into()));
        }
        let (_, p, m) = unfold(s);
        total_elems += h * p;
        for i in 0..h {
            for j in i..h {
                let mut acc = 0.0;
                let ri = &m[i * p..(i + 1) * p];
                let rj = &m[j * p..(j + 1) * p];
                for (a, b) in ri.iter().zip(rj) {
                    acc += a * b;
                }
                cov[i * h + j] += acc;
                if i != j {
                    cov[j * h + i] += acc;
                }
            }
        }
    }

    let trace: f64 = (0..h).map(|i| cov[i * h + i]).sum();
    if trace == 0.0 {
        // Degenerate all-zero input: a zero module reconstructs it exactly.
        let module = AeModule::new(h, h_c, vec![0.0; h * h_c], vec![0.0; h_c * h])?;
        return Ok((module, 0.0));
    }

    let (eigvals, eigvecs) = jacobi_eigen(&cov, h);
    // Indices sorted by eigenvalue, descending.
    let mut order: Vec<usize> = (0..h).collect();
    order.sort_by(|&a, &b| eigvals[b].partial_cmp(&eigvals[a]).unwrap());

    let mut w_enc = vec![0.0; h * h_c];
    let mut w_dec = vec![0.0; h_c * h];
    let mut captured = 0.0;
    for (c, &k) in order.iter().take(h_c).enumerate() {
        captured += eigvals[k];
        for i in 0..h {
            let v = eigvecs[i * h + k];
            w_enc[i * h_c + c] = v;
            w_dec[c * h + i] = v;
        }
    }
    let residual = (trace - captured).max(0.0);
    let module = AeModule::new(h, h_c, w_enc, w_dec)?;
    Ok((module, residual / total_elems as f64))
}

/// Cyclic Jacobi eigen-decomposition of a symmetric matrix. Returns the
/// eigenvalues (diagonal) and the column-eigenvector matrix.
fn jacobi_eigen(sym: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut a = sym.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += a[i * n + j] * a[i * n + j];
            }
        }
        if off <= 1e-24 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let eigvals: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
    (eigvals, v)
}
