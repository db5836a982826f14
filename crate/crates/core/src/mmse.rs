//! Posterior statistics and MMSE matrices for `Y = H·X + N` with `N`
//! standard Gaussian and `X` a Gaussian mixture.

use std::num::NonZeroUsize;

use gauss_quad::GaussHermite;
use nalgebra::DMatrix;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::input::{ConditionalInput, MixtureInput};
use crate::linalg::SymMatrix;
use crate::path::DiagonalChannel;
use crate::rng::{self, Moments};

pub const LN_2PI: f64 = 1.837_877_066_409_345_5;
pub const MAX_QUAD_DIM: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    Auto,
    ClosedForm,
    Quadrature,
    MonteCarlo,
}

impl Method {
    fn rank(self) -> u8 {
        match self {
            Method::Auto => 0,
            Method::ClosedForm => 1,
            Method::Quadrature => 2,
            Method::MonteCarlo => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimatorConfig {
    pub method: Method,
    pub samples: usize,
    pub seed: u64,
    pub quad_order: usize,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            method: Method::Auto,
            samples: 200_000,
            seed: 0,
            quad_order: 64,
        }
    }
}

impl EstimatorConfig {
    pub fn monte_carlo(samples: usize, seed: u64) -> Self {
        Self {
            method: Method::MonteCarlo,
            samples,
            seed,
            ..Self::default()
        }
    }

    pub fn quadrature(order: usize) -> Self {
        Self {
            method: Method::Quadrature,
            quad_order: order,
            ..Self::default()
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn with_method(self, method: Method) -> Self {
        Self { method, ..self }
    }

    /// Concrete method for a mixture observed in `out_dim` dimensions.
    pub fn resolve(&self, input: &MixtureInput, out_dim: usize) -> Result<Method> {
        match self.method {
            Method::Auto => Ok(if input.is_single_gaussian() {
                Method::ClosedForm
            } else if out_dim <= 2 {
                Method::Quadrature
            } else {
                Method::MonteCarlo
            }),
            Method::ClosedForm if !input.is_single_gaussian() => Err(Error::InvalidInput(
                "closed form requires a single Gaussian component".into(),
            )),
            Method::Quadrature if out_dim > MAX_QUAD_DIM => Err(Error::QuadratureDimension(out_dim)),
            Method::MonteCarlo if self.samples < 2 => {
                Err(Error::InvalidInput("Monte Carlo needs at least 2 samples".into()))
            }
            m => Ok(m),
        }
    }
}

impl DiagonalChannel {
    pub fn matrix(&self) -> DMatrix<f64> {
        crate::linalg::diag_matrix(&self.gains)
    }
}

/// `(Σ⁻¹ + HᵀH)⁻¹`, or `Σ − ΣHᵀ(HΣHᵀ + I)⁻¹HΣ` when `Σ` is singular.
pub fn gaussian_mmse(cov: &SymMatrix, h: &DMatrix<f64>) -> Result<SymMatrix> {
    if h.ncols() != cov.dim() {
        return Err(Error::DimensionMismatch {
            expected: cov.dim(),
            found: h.ncols(),
        });
    }
    if let Ok(prec) = cov.inverse_pd() {
        if prec.matrix().iter().all(|v| v.is_finite()) && cov.min_eigenvalue() > 1e-9 * (1.0 + cov.trace()) {
            let info = SymMatrix::symmetrized(h.transpose() * h);
            return prec.add(&info).inverse_pd();
        }
    }
    let m = SymMatrix::symmetrized(h * cov.matrix() * h.transpose())
        .add(&SymMatrix::identity(h.nrows()));
    let minv = m.inverse_pd()?;
    let sh = cov.matrix() * h.transpose();
    Ok(SymMatrix::symmetrized(cov.matrix() - &sh * minv.matrix() * sh.transpose()))
}

/// `I − (Σ + I)⁻¹`, the linear-estimator MMSE at the identity channel.
pub fn linear_mmse(cov: &SymMatrix) -> Result<SymMatrix> {
    let n = cov.dim();
    Ok(SymMatrix::identity(n).sub(&cov.add(&SymMatrix::identity(n)).inverse_pd()?))
}

/// Posterior of `X` given one observation `y`.
#[derive(Debug, Clone, Serialize)]
pub struct PosteriorStats {
    pub mean: Vec<f64>,
    pub cov: SymMatrix,
    pub responsibilities: Vec<f64>,
}

#[derive(Debug, Clone)]
struct PostComp {
    weight: f64,
    log_norm: f64,
    mu: Vec<f64>,
    hmu: Vec<f64>,
    /// `M⁻¹` with `M = H S Hᵀ + I`, column-major `m × m`.
    minv: Vec<f64>,
    /// `G = S Hᵀ M⁻¹`, column-major `n × m`.
    gain: Vec<f64>,
    /// Conditional covariance `S − G H S`, column-major `n × n`.
    cpost: Vec<f64>,
    chol: DMatrix<f64>,
    zero_gain: bool,
}

/// Per-component Gaussian conditioning data for a fixed `(input, H)` pair.
#[derive(Debug, Clone)]
pub struct PosteriorModel {
    n: usize,
    m: usize,
    h: DMatrix<f64>,
    comps: Vec<PostComp>,
}

/// Scratch buffers for [`PosteriorModel::evaluate`].
#[derive(Debug, Clone)]
pub struct Workspace {
    diff: Vec<f64>,
    logs: Vec<f64>,
    pub resp: Vec<f64>,
    /// Conditional means `m_k`, row `k` of length `n`.
    means: Vec<f64>,
    pub mean: Vec<f64>,
    pub log_fy: f64,
}

impl PosteriorModel {
    pub fn new(input: &MixtureInput, h: &DMatrix<f64>) -> Result<Self> {
        let n = input.dim();
        if h.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: h.ncols(),
            });
        }
        let m = h.nrows();
        let comps = input
            .components()
            .iter()
            .map(|c| {
                let s = c.cov.matrix();
                let mm = h * s * h.transpose() + DMatrix::identity(m, m);
                let chol = mm
                    .clone()
                    .cholesky()
                    .ok_or_else(|| Error::Numerical("H S Hᵀ + I not positive definite".into()))?;
                let log_det = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
                let minv = chol.inverse();
                let gain = s * h.transpose() * &minv;
                let cpost = s - &gain * h * s;
                let zero_gain = gain.iter().all(|&v| v == 0.0);
                let mu = c.mean.clone();
                let hmu = (h * nalgebra::DVector::from_column_slice(&mu)).iter().copied().collect();
                Ok(PostComp {
                    weight: c.weight,
                    log_norm: c.weight.ln() - 0.5 * log_det - 0.5 * m as f64 * LN_2PI,
                    mu,
                    hmu,
                    minv: minv.iter().copied().collect(),
                    gain: gain.iter().copied().collect(),
                    cpost: SymMatrix::symmetrized(cpost).matrix().iter().copied().collect(),
                    chol: chol.l(),
                    zero_gain,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            n,
            m,
            h: h.clone(),
            comps,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.n
    }

    pub fn out_dim(&self) -> usize {
        self.m
    }

    pub fn channel(&self) -> &DMatrix<f64> {
        &self.h
    }

    pub fn workspace(&self) -> Workspace {
        let k = self.comps.len();
        Workspace {
            diff: vec![0.0; self.m],
            logs: vec![0.0; k],
            resp: vec![0.0; k],
            means: vec![0.0; k * self.n],
            mean: vec![0.0; self.n],
            log_fy: 0.0,
        }
    }

    /// Fills responsibilities, conditional means, the posterior mean and
    /// `log f_Y(y)` in `ws`.
    pub fn evaluate(&self, y: &[f64], ws: &mut Workspace) {
        let (n, m) = (self.n, self.m);
        for (k, c) in self.comps.iter().enumerate() {
            for i in 0..m {
                ws.diff[i] = y[i] - c.hmu[i];
            }
            let mut q = 0.0;
            for j in 0..m {
                let col = &c.minv[j * m..(j + 1) * m];
                let mut row = 0.0;
                for i in 0..m {
                    row += col[i] * ws.diff[i];
                }
                q += ws.diff[j] * row;
            }
            ws.logs[k] = c.log_norm - 0.5 * q;
            let mk = &mut ws.means[k * n..(k + 1) * n];
            mk.copy_from_slice(&c.mu);
            if !c.zero_gain {
                for j in 0..m {
                    let d = ws.diff[j];
                    let col = &c.gain[j * n..(j + 1) * n];
                    for i in 0..n {
                        mk[i] += col[i] * d;
                    }
                }
            }
        }
        let mx = ws.logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for (r, l) in ws.resp.iter_mut().zip(&ws.logs) {
            *r = (l - mx).exp();
            total += *r;
        }
        for r in ws.resp.iter_mut() {
            *r /= total;
        }
        ws.log_fy = mx + total.ln();
        ws.mean.iter_mut().for_each(|v| *v = 0.0);
        for (k, r) in ws.resp.iter().enumerate() {
            let mk = &ws.means[k * n..(k + 1) * n];
            for i in 0..n {
                ws.mean[i] += r * mk[i];
            }
        }
    }

    /// Writes the column-major posterior covariance `Φ(y)` into `out`
    /// (length `n²`); call after [`evaluate`](Self::evaluate).
    pub fn posterior_cov(&self, ws: &Workspace, out: &mut [f64]) {
        let n = self.n;
        out.iter_mut().for_each(|v| *v = 0.0);
        for (k, c) in self.comps.iter().enumerate() {
            let r = ws.resp[k];
            if r == 0.0 {
                continue;
            }
            let mk = &ws.means[k * n..(k + 1) * n];
            for j in 0..n {
                let dj = mk[j] - ws.mean[j];
                for i in 0..n {
                    out[i + j * n] += r * (c.cpost[i + j * n] + (mk[i] - ws.mean[i]) * dj);
                }
            }
        }
    }

    /// `Tr(A·Φ(y))` for a column-major symmetric `A`; call after `evaluate`.
    pub fn weighted_trace(&self, ws: &Workspace, a: &[f64]) -> f64 {
        let n = self.n;
        let mut total = 0.0;
        for (k, c) in self.comps.iter().enumerate() {
            let r = ws.resp[k];
            if r == 0.0 {
                continue;
            }
            let mk = &ws.means[k * n..(k + 1) * n];
            let mut t = 0.0;
            for j in 0..n {
                let dj = mk[j] - ws.mean[j];
                for i in 0..n {
                    t += a[i + j * n] * (c.cpost[i + j * n] + (mk[i] - ws.mean[i]) * dj);
                }
            }
            total += r * t;
        }
        total
    }

    pub fn posterior(&self, y: &[f64]) -> Result<PosteriorStats> {
        if y.len() != self.m {
            return Err(Error::DimensionMismatch {
                expected: self.m,
                found: y.len(),
            });
        }
        let mut ws = self.workspace();
        self.evaluate(y, &mut ws);
        let mut cov = vec![0.0; self.n * self.n];
        self.posterior_cov(&ws, &mut cov);
        Ok(PosteriorStats {
            mean: ws.mean.clone(),
            cov: SymMatrix::symmetrized(DMatrix::from_column_slice(self.n, self.n, &cov)),
            responsibilities: ws.resp.clone(),
        })
    }
}

pub fn posterior(input: &MixtureInput, h: &DMatrix<f64>, y: &[f64]) -> Result<PosteriorStats> {
    PosteriorModel::new(input, h)?.posterior(y)
}

/// Monte Carlo average of a per-sample statistic. For every draw
/// `(k, x, z)` with `x ~ X`, `z ~ N(0, I)`, the closure sees `y_i = H_i x + z`
/// for each channel in `hs`, together with `x` and `z`.
pub fn mc_statistic<S, I, F>(
    input: &MixtureInput,
    hs: &[DMatrix<f64>],
    samples: usize,
    seed: u64,
    len: usize,
    init: I,
    f: F,
) -> Moments
where
    I: Fn() -> S + Sync,
    F: Fn(&mut S, &[Vec<f64>], &[f64], &[f64], &mut [f64]) + Sync,
{
    let n = input.dim();
    let m = hs[0].nrows();
    let sampler = input.sampler();
    rng::par_chunks(
        samples,
        seed,
        |rng: &mut ChaCha8Rng, count| {
            let mut acc = Moments::new(len);
            let mut x = vec![0.0; n];
            let mut zx = vec![0.0; n];
            let mut z = vec![0.0; m];
            let mut ys = vec![vec![0.0; m]; hs.len()];
            let mut out = vec![0.0; len];
            let mut state = init();
            for _ in 0..count {
                sampler.sample_into(rng, &mut x, &mut zx);
                for v in z.iter_mut() {
                    *v = <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng);
                }
                for (h, y) in hs.iter().zip(ys.iter_mut()) {
                    for i in 0..m {
                        let mut s = z[i];
                        for j in 0..n {
                            s += h[(i, j)] * x[j];
                        }
                        y[i] = s;
                    }
                }
                f(&mut state, &ys, &x, &z, &mut out);
                acc.push(&out);
            }
            acc
        },
        Moments::merge,
    )
    .unwrap_or_else(|| Moments::new(len))
}

/// Tensor Gauss–Hermite nodes `(z, weight)` for a standard normal in `dim`
/// dimensions, weights summing to one.
pub fn gauss_hermite_nodes(dim: usize, order: usize) -> Vec<(Vec<f64>, f64)> {
    let order = NonZeroUsize::new(order.max(1)).expect("nonzero");
    let rule = GaussHermite::new(order);
    let pairs: Vec<(f64, f64)> = rule
        .as_node_weight_pairs()
        .iter()
        .map(|&(x, w)| (x * std::f64::consts::SQRT_2, w / std::f64::consts::PI.sqrt()))
        .collect();
    let mut out = vec![(Vec::with_capacity(dim), 1.0)];
    for _ in 0..dim {
        let mut next = Vec::with_capacity(out.len() * pairs.len());
        for (z, w) in &out {
            for &(x, wx) in &pairs {
                if w * wx < 1e-300 {
                    continue;
                }
                let mut zz = z.clone();
                zz.push(x);
                next.push((zz, w * wx));
            }
        }
        out = next;
    }
    out
}

/// Quadrature expectation of a statistic of `y` alone:
/// `Σ_k p_k ∫ N(y; Hμ_k, M_k) f(y) dy`.
/// [`quad_statistic`] at `order` with a per-entry error bar: the change from
/// the rule of half the order.
pub fn quad_estimate<F>(model: &PosteriorModel, order: usize, len: usize, f: F) -> Result<(Vec<f64>, Vec<f64>)>
where
    F: Fn(&[f64], &mut Workspace, &mut [f64]),
{
    let fine = quad_statistic(model, order, len, &f)?;
    let coarse = quad_statistic(model, (order / 2).max(2), len, &f)?;
    let err = fine.iter().zip(&coarse).map(|(a, b)| (a - b).abs()).collect();
    Ok((fine, err))
}

pub fn quad_statistic<F>(model: &PosteriorModel, order: usize, len: usize, f: F) -> Result<Vec<f64>>
where
    F: Fn(&[f64], &mut Workspace, &mut [f64]),
{
    let m = model.m;
    if m > MAX_QUAD_DIM {
        return Err(Error::QuadratureDimension(m));
    }
    let nodes = gauss_hermite_nodes(m, order);
    let mut ws = model.workspace();
    let mut acc = vec![0.0; len];
    let mut out = vec![0.0; len];
    let mut y = vec![0.0; m];
    for c in &model.comps {
        let p = c.weight;
        for (z, w) in &nodes {
            for i in 0..m {
                let mut s = c.hmu[i];
                for j in 0..=i {
                    s += c.chol[(i, j)] * z[j];
                }
                y[i] = s;
            }
            f(&y, &mut ws, &mut out);
            for (a, o) in acc.iter_mut().zip(&out) {
                *a += p * w * o;
            }
        }
    }
    Ok(acc)
}

/// MMSE matrix estimate with per-entry standard errors.
#[derive(Debug, Clone, Serialize)]
pub struct MmseEstimate {
    pub matrix: SymMatrix,
    pub std_err: SymMatrix,
    pub method: Method,
    pub samples: usize,
    pub seed: u64,
}

impl MmseEstimate {
    /// Frobenius norm of the error matrix; bounds eigenvalue errors (Weyl).
    pub fn err_norm(&self) -> f64 {
        self.std_err.frobenius()
    }

    fn exact(matrix: SymMatrix, method: Method, seed: u64) -> Self {
        let n = matrix.dim();
        Self {
            matrix,
            std_err: SymMatrix::zeros(n),
            method,
            samples: 0,
            seed,
        }
    }
}

fn from_flat(n: usize, v: &[f64]) -> SymMatrix {
    SymMatrix::symmetrized(DMatrix::from_column_slice(n, n, v))
}

pub fn mmse_matrix(input: &MixtureInput, h: &DMatrix<f64>, cfg: &EstimatorConfig) -> Result<MmseEstimate> {
    let n = input.dim();
    let method = cfg.resolve(input, h.nrows())?;
    match method {
        Method::ClosedForm => Ok(MmseEstimate::exact(
            gaussian_mmse(&input.components()[0].cov, h)?,
            method,
            cfg.seed,
        )),
        Method::Quadrature => {
            let model = PosteriorModel::new(input, h)?;
            let (v, e) = quad_estimate(&model, cfg.quad_order, n * n, |y, ws, out| {
                model.evaluate(y, ws);
                model.posterior_cov(ws, out);
            })?;
            Ok(MmseEstimate {
                matrix: from_flat(n, &v),
                std_err: from_flat(n, &e),
                method,
                samples: 0,
                seed: cfg.seed,
            })
        }
        _ => {
            let model = PosteriorModel::new(input, h)?;
            let mom = mc_statistic(
                input,
                std::slice::from_ref(h),
                cfg.samples,
                cfg.seed,
                n * n,
                || model.workspace(),
                |ws, ys, _, _, out| {
                    model.evaluate(&ys[0], ws);
                    model.posterior_cov(ws, out);
                },
            );
            Ok(MmseEstimate {
                matrix: from_flat(n, &mom.mean()),
                std_err: from_flat(n, &mom.std_err()),
                method,
                samples: cfg.samples,
                seed: cfg.seed,
            })
        }
    }
}

/// Seed for branch `u`; a single branch keeps the parent seed.
pub fn branch_seed(seed: u64, u: usize, branches: usize) -> u64 {
    if branches == 1 {
        seed
    } else {
        rng::mix(seed, u as u64 + 1)
    }
}

/// `E_u[E_{x|u}]` with standard errors combined in quadrature.
pub fn conditional_mmse(cond: &ConditionalInput, h: &DMatrix<f64>, cfg: &EstimatorConfig) -> Result<MmseEstimate> {
    let n = cond.dim();
    let nb = cond.branches().len();
    let mut mat = DMatrix::zeros(n, n);
    let mut var = DMatrix::zeros(n, n);
    let mut method = Method::Auto;
    let mut samples = 0;
    for (u, b) in cond.branches().iter().enumerate() {
        let est = mmse_matrix(&b.input, h, &cfg.with_seed(branch_seed(cfg.seed, u, nb)))?;
        mat += est.matrix.matrix() * b.q;
        var += est.std_err.matrix().map(|e| e * e) * (b.q * b.q);
        if est.method.rank() > method.rank() {
            method = est.method;
        }
        samples += est.samples;
    }
    Ok(MmseEstimate {
        matrix: SymMatrix::symmetrized(mat),
        std_err: SymMatrix::symmetrized(var.map(f64::sqrt)),
        method,
        samples,
        seed: cfg.seed,
    })
}

/// `Tr(A·E)` with a standard error that accounts for entry correlations.
pub fn weighted_trace(
    cond: &ConditionalInput,
    h: &DMatrix<f64>,
    a: &SymMatrix,
    cfg: &EstimatorConfig,
) -> Result<(f64, f64)> {
    let nb = cond.branches().len();
    let a_flat: Vec<f64> = a.matrix().iter().copied().collect();
    let mut value = 0.0;
    let mut var = 0.0;
    for (u, b) in cond.branches().iter().enumerate() {
        let bcfg = cfg.with_seed(branch_seed(cfg.seed, u, nb));
        let (v, e) = match bcfg.resolve(&b.input, h.nrows())? {
            Method::ClosedForm => {
                let e = gaussian_mmse(&b.input.components()[0].cov, h)?;
                ((a.matrix().component_mul(e.matrix())).sum(), 0.0)
            }
            Method::Quadrature => {
                let model = PosteriorModel::new(&b.input, h)?;
                let (v, e) = quad_estimate(&model, bcfg.quad_order, 1, |y, ws, out| {
                    model.evaluate(y, ws);
                    out[0] = model.weighted_trace(ws, &a_flat);
                })?;
                (v[0], e[0])
            }
            _ => {
                let model = PosteriorModel::new(&b.input, h)?;
                let mom = mc_statistic(
                    &b.input,
                    std::slice::from_ref(h),
                    bcfg.samples,
                    bcfg.seed,
                    1,
                    || model.workspace(),
                    |ws, ys, _, _, out| {
                        model.evaluate(&ys[0], ws);
                        out[0] = model.weighted_trace(ws, &a_flat);
                    },
                );
                (mom.mean()[0], mom.std_err()[0])
            }
        };
        value += b.q * v;
        var += (b.q * e).powi(2);
    }
    Ok((value, var.sqrt()))
}

/// `mmse(x, snr) = Tr E_x(√snr·I)` with its standard error.
pub fn scalar_mmse_trace(input: &MixtureInput, snr: f64, cfg: &EstimatorConfig) -> Result<(f64, f64)> {
    if !(snr >= 0.0) {
        return Err(Error::InvalidInput(format!("snr must be nonnegative, got {snr}")));
    }
    let n = input.dim();
    let h = DMatrix::identity(n, n) * snr.sqrt();
    weighted_trace(&input.clone().into(), &h, &SymMatrix::identity(n), cfg)
}

/// `E(H1) − E(H2)` from paired samples (common random numbers), with
/// per-entry standard errors of the difference. Exact methods return
/// zero errors.
pub fn mmse_difference(
    cond: &ConditionalInput,
    h1: &DMatrix<f64>,
    h2: &DMatrix<f64>,
    cfg: &EstimatorConfig,
) -> Result<(SymMatrix, SymMatrix)> {
    let n = cond.dim();
    let nb = cond.branches().len();
    let mut mat = DMatrix::zeros(n, n);
    let mut var = DMatrix::zeros(n, n);
    for (u, b) in cond.branches().iter().enumerate() {
        let bcfg = cfg.with_seed(branch_seed(cfg.seed, u, nb));
        match bcfg.resolve(&b.input, h1.nrows())? {
            Method::MonteCarlo => {
                let m1 = PosteriorModel::new(&b.input, h1)?;
                let m2 = PosteriorModel::new(&b.input, h2)?;
                let hs = [h1.clone(), h2.clone()];
                let mom = mc_statistic(
                    &b.input,
                    &hs,
                    bcfg.samples,
                    bcfg.seed,
                    n * n,
                    || (m1.workspace(), m2.workspace(), vec![0.0; n * n]),
                    |(w1, w2, c2), ys, _, _, out| {
                        m1.evaluate(&ys[0], w1);
                        m2.evaluate(&ys[1], w2);
                        m1.posterior_cov(w1, out);
                        m2.posterior_cov(w2, c2);
                        for (o, c) in out.iter_mut().zip(c2.iter()) {
                            *o -= c;
                        }
                    },
                );
                mat += DMatrix::from_column_slice(n, n, &mom.mean()) * b.q;
                var += DMatrix::from_column_slice(n, n, &mom.std_err()).map(|e| e * e) * (b.q * b.q);
            }
            _ => {
                let e1 = mmse_matrix(&b.input, h1, &bcfg)?;
                let e2 = mmse_matrix(&b.input, h2, &bcfg)?;
                mat += (e1.matrix.matrix() - e2.matrix.matrix()) * b.q;
            }
        }
    }
    Ok((SymMatrix::symmetrized(mat), SymMatrix::symmetrized(var.map(f64::sqrt))))
}
