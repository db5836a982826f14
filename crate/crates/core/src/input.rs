//! Input laws: zero-mean Gaussians, finite Gaussian mixtures and
//! conditional families `X | U = u` over a finite alphabet.

use nalgebra::{DMatrix, DVector};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SymMatrix;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianInput {
    pub cov: SymMatrix,
}

impl GaussianInput {
    pub fn new(cov: SymMatrix) -> Result<Self> {
        cov.require_psd()?;
        Ok(Self { cov })
    }

    pub fn iid(n: usize, var: f64) -> Result<Self> {
        Self::new(SymMatrix::scaled_identity(n, var))
    }

    pub fn diagonal(d: &[f64]) -> Result<Self> {
        Self::new(SymMatrix::from_diagonal(d))
    }

    pub fn dim(&self) -> usize {
        self.cov.dim()
    }

    pub fn is_diagonal(&self) -> bool {
        self.cov.is_diagonal()
    }

    pub fn to_mixture(&self) -> MixtureInput {
        MixtureInput::gaussian(self.cov.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    #[serde(rename = "w")]
    pub weight: f64,
    pub mean: Vec<f64>,
    pub cov: SymMatrix,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct MixtureDoc {
    dim: usize,
    components: Vec<Component>,
}

/// Finite Gaussian mixture. Discrete constellations use zero covariances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MixtureDoc", into = "MixtureDoc")]
pub struct MixtureInput {
    dim: usize,
    components: Vec<Component>,
}

impl TryFrom<MixtureDoc> for MixtureInput {
    type Error = Error;
    fn try_from(doc: MixtureDoc) -> Result<Self> {
        let m = MixtureInput::new(doc.components)?;
        if m.dim != doc.dim {
            return Err(Error::DimensionMismatch {
                expected: doc.dim,
                found: m.dim,
            });
        }
        Ok(m)
    }
}

impl From<MixtureInput> for MixtureDoc {
    fn from(m: MixtureInput) -> Self {
        MixtureDoc {
            dim: m.dim,
            components: m.components,
        }
    }
}

impl MixtureInput {
    /// Validates weights (positive, summing to one within `1e-9`, then
    /// renormalized), dimensions and component PSD-ness.
    pub fn new(components: Vec<Component>) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| Error::InvalidInput("mixture needs at least one component".into()))?;
        let dim = first.mean.len();
        if dim == 0 {
            return Err(Error::InvalidInput("mixture dimension must be at least 1".into()));
        }
        let mut total = 0.0;
        for c in &components {
            if !(c.weight.is_finite() && c.weight > 0.0) {
                return Err(Error::InvalidInput(format!("weight {} must be positive", c.weight)));
            }
            if c.mean.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: c.mean.len(),
                });
            }
            if c.cov.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: c.cov.dim(),
                });
            }
            if c.mean.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput("component mean is not finite".into()));
            }
            c.cov.require_psd()?;
            total += c.weight;
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!("weights sum to {total}, expected 1")));
        }
        let components = components
            .into_iter()
            .map(|c| Component {
                weight: c.weight / total,
                ..c
            })
            .collect();
        Ok(Self { dim, components })
    }

    pub fn gaussian(cov: SymMatrix) -> Self {
        let dim = cov.dim();
        Self {
            dim,
            components: vec![Component {
                weight: 1.0,
                mean: vec![0.0; dim],
                cov,
            }],
        }
    }

    /// Equiprobable points with zero covariance.
    pub fn constellation(points: &[Vec<f64>]) -> Result<Self> {
        let w = 1.0 / points.len().max(1) as f64;
        Self::new(
            points
                .iter()
                .map(|p| Component {
                    weight: w,
                    mean: p.clone(),
                    cov: SymMatrix::zeros(p.len().max(1)),
                })
                .collect(),
        )
    }

    pub fn bpsk() -> Self {
        Self::constellation(&[vec![-1.0], vec![1.0]]).expect("valid constellation")
    }

    /// Product of `n` independent BPSK coordinates (`2^n` points).
    pub fn qpsk_parallel(n: usize) -> Self {
        let points: Vec<Vec<f64>> = (0..(1usize << n))
            .map(|bits| {
                (0..n)
                    .map(|i| if bits >> i & 1 == 1 { 1.0 } else { -1.0 })
                    .collect()
            })
            .collect();
        Self::constellation(&points).expect("valid constellation")
    }

    pub fn seeded_random_mixture(n: usize, k: usize, seed: u64) -> Self {
        RandomMixtureSpec::new(n, k).build(seed)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn is_single_gaussian(&self) -> bool {
        self.components.len() == 1
    }

    pub fn has_pd_components(&self) -> bool {
        self.components
            .iter()
            .all(|c| c.cov.min_eigenvalue() > 1e-12 * (1.0 + c.cov.trace()))
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut mu = vec![0.0; self.dim];
        for c in &self.components {
            for (m, v) in mu.iter_mut().zip(&c.mean) {
                *m += c.weight * v;
            }
        }
        mu
    }

    /// `Σ p_k (S_k + μ_k μ_kᵀ) − μ μᵀ`.
    pub fn overall_covariance(&self) -> SymMatrix {
        let n = self.dim;
        let mu = self.mean();
        let mut s = DMatrix::zeros(n, n);
        for c in &self.components {
            let d = DVector::from_iterator(n, c.mean.iter().zip(&mu).map(|(a, b)| a - b));
            s += (c.cov.matrix() + &d * d.transpose()) * c.weight;
        }
        SymMatrix::symmetrized(s)
    }

    /// Law of `T·X` for a `m × n` matrix `T`.
    pub fn transform(&self, t: &DMatrix<f64>) -> Result<Self> {
        if t.ncols() != self.dim || t.nrows() == 0 {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: t.ncols(),
            });
        }
        Ok(Self {
            dim: t.nrows(),
            components: self
                .components
                .iter()
                .map(|c| Component {
                    weight: c.weight,
                    mean: (t * DVector::from_column_slice(&c.mean)).iter().copied().collect(),
                    cov: c.cov.congruence(t),
                })
                .collect(),
        })
    }

    /// Law of `X + N` with `N ~ N(0, noise)` independent.
    pub fn add_gaussian(&self, noise: &SymMatrix) -> Result<Self> {
        if noise.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: noise.dim(),
            });
        }
        Ok(Self {
            dim: self.dim,
            components: self
                .components
                .iter()
                .map(|c| Component {
                    cov: c.cov.add(noise),
                    ..c.clone()
                })
                .collect(),
        })
    }

    pub fn sampler(&self) -> Sampler {
        Sampler::new(self)
    }

    /// Exact log-density of `X`; needs positive definite components.
    pub fn density(&self) -> Result<MixtureDensity> {
        MixtureDensity::new(
            self.components.iter().map(|c| c.weight).collect(),
            self.components.iter().map(|c| c.mean.clone()).collect(),
            self.components.iter().map(|c| c.cov.clone()).collect(),
        )
    }
}

/// Parameters of the seeded random mixture generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomMixtureSpec {
    pub n: usize,
    pub k: usize,
    /// Standard deviation of each mean coordinate.
    pub mean_scale: f64,
    /// Component covariances are `scale · G Gᵀ / n + floor · I`, with `scale`
    /// uniform on this range and `G` standard normal.
    pub cov_scale: (f64, f64),
    pub cov_floor: f64,
    /// Means closer than this are redrawn.
    #[serde(default)]
    pub min_separation: f64,
}

impl RandomMixtureSpec {
    pub fn new(n: usize, k: usize) -> Self {
        Self {
            n,
            k,
            mean_scale: 1.0,
            cov_scale: (0.0, 0.5),
            cov_floor: 0.0,
            min_separation: 0.25,
        }
    }

    pub fn discrete(n: usize, k: usize) -> Self {
        Self {
            cov_scale: (0.0, 0.0),
            ..Self::new(n, k)
        }
    }

    pub fn build(&self, seed: u64) -> MixtureInput {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.n.max(1);
        let k = self.k.max(1);
        let raw: Vec<f64> = (0..k).map(|_| 0.25 + rng.random::<f64>()).collect();
        let total: f64 = raw.iter().sum();
        let mut means: Vec<Vec<f64>> = Vec::with_capacity(k);
        let components = raw
            .iter()
            .map(|w| {
                let mean = loop {
                    let m: Vec<f64> = (0..n)
                        .map(|_| {
                            let z: f64 = StandardNormal.sample(&mut rng);
                            self.mean_scale * z
                        })
                        .collect();
                    let far = means.iter().all(|o| {
                        o.iter().zip(&m).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() >= self.min_separation
                    });
                    if far {
                        break m;
                    }
                };
                means.push(mean.clone());
                let (lo, hi) = self.cov_scale;
                let scale = lo + (hi - lo) * rng.random::<f64>();
                let g = DMatrix::<f64>::from_fn(n, n, |_, _| StandardNormal.sample(&mut rng));
                let cov = SymMatrix::symmetrized(
                    &g * g.transpose() * (scale / n as f64)
                        + DMatrix::identity(n, n) * self.cov_floor,
                );
                Component {
                    weight: w / total,
                    mean,
                    cov,
                }
            })
            .collect();
        MixtureInput::new(components).expect("generator produces a valid mixture")
    }
}

/// Draws `(component, x)` pairs from a mixture.
#[derive(Debug, Clone)]
pub struct Sampler {
    dim: usize,
    cumulative: Vec<f64>,
    means: Vec<Vec<f64>>,
    factors: Vec<Option<DMatrix<f64>>>,
}

impl Sampler {
    fn new(m: &MixtureInput) -> Self {
        let mut acc = 0.0;
        let cumulative = m
            .components
            .iter()
            .map(|c| {
                acc += c.weight;
                acc
            })
            .collect();
        Self {
            dim: m.dim,
            cumulative,
            means: m.components.iter().map(|c| c.mean.clone()).collect(),
            factors: m
                .components
                .iter()
                .map(|c| {
                    if c.cov.matrix().iter().all(|&v| v == 0.0) {
                        None
                    } else {
                        Some(c.cov.psd_factor())
                    }
                })
                .collect(),
        }
    }

    pub fn pick<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random::<f64>() * self.cumulative.last().copied().unwrap_or(1.0);
        self.cumulative
            .partition_point(|&c| c <= u)
            .min(self.cumulative.len() - 1)
    }

    /// Writes a sample into `x` and returns its component index. `z` is
    /// scratch space of length `dim`.
    pub fn sample_into<R: rand::Rng + ?Sized>(&self, rng: &mut R, x: &mut [f64], z: &mut [f64]) -> usize {
        let k = self.pick(rng);
        x.copy_from_slice(&self.means[k]);
        if let Some(l) = &self.factors[k] {
            for zi in z.iter_mut() {
                *zi = <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng);
            }
            for i in 0..self.dim {
                let mut s = 0.0;
                for j in 0..self.dim {
                    s += l[(i, j)] * z[j];
                }
                x[i] += s;
            }
        }
        k
    }
}

/// Log-density of a Gaussian mixture with positive definite covariances,
/// stored in flat arrays for fast repeated evaluation.
#[derive(Debug, Clone)]
pub struct MixtureDensity {
    dim: usize,
    log_norm: Vec<f64>,
    means: Vec<Vec<f64>>,
    precisions: Vec<Vec<f64>>,
}

impl MixtureDensity {
    pub fn new(weights: Vec<f64>, means: Vec<Vec<f64>>, covs: Vec<SymMatrix>) -> Result<Self> {
        let dim = covs[0].dim();
        let mut log_norm = Vec::with_capacity(covs.len());
        let mut precisions = Vec::with_capacity(covs.len());
        for (w, c) in weights.iter().zip(&covs) {
            let ld = c.log_det_pd()?;
            log_norm.push(w.ln() - 0.5 * ld - 0.5 * dim as f64 * LN_2PI);
            precisions.push(c.inverse_pd()?.matrix().iter().copied().collect());
        }
        Ok(Self {
            dim,
            log_norm,
            means,
            precisions,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.log_norm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_norm.is_empty()
    }

    /// Per-component log terms `log p_k + log N(y; m_k, M_k)` written to `out`;
    /// `diff` is scratch of length `dim`.
    pub fn component_logs(&self, y: &[f64], diff: &mut [f64], out: &mut [f64]) {
        let n = self.dim;
        for k in 0..self.log_norm.len() {
            for i in 0..n {
                diff[i] = y[i] - self.means[k][i];
            }
            let p = &self.precisions[k];
            let mut q = 0.0;
            for i in 0..n {
                let mut row = 0.0;
                for j in 0..n {
                    row += p[i + j * n] * diff[j];
                }
                q += diff[i] * row;
            }
            out[k] = self.log_norm[k] - 0.5 * q;
        }
    }

    /// `∇ log f(y)` written to `out`; `diff` and `logs` are scratch.
    pub fn score(&self, y: &[f64], diff: &mut [f64], logs: &mut [f64], out: &mut [f64]) {
        let n = self.dim;
        self.component_logs(y, diff, logs);
        let lse = log_sum_exp(logs);
        out.iter_mut().for_each(|v| *v = 0.0);
        for k in 0..self.log_norm.len() {
            let r = (logs[k] - lse).exp();
            if r == 0.0 {
                continue;
            }
            let p = &self.precisions[k];
            for i in 0..n {
                let mut row = 0.0;
                for j in 0..n {
                    row += p[i + j * n] * (y[j] - self.means[k][j]);
                }
                out[i] -= r * row;
            }
        }
    }

    pub fn log_density(&self, y: &[f64]) -> f64 {
        let mut diff = vec![0.0; self.dim];
        let mut logs = vec![0.0; self.len()];
        self.component_logs(y, &mut diff, &mut logs);
        log_sum_exp(&logs)
    }
}

pub fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub q: f64,
    pub input: MixtureInput,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ConditionalDoc {
    u: Vec<Branch>,
}

/// `X | U = u` for a finite alphabet of `u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ConditionalDoc", into = "ConditionalDoc")]
pub struct ConditionalInput {
    branches: Vec<Branch>,
}

impl TryFrom<ConditionalDoc> for ConditionalInput {
    type Error = Error;
    fn try_from(doc: ConditionalDoc) -> Result<Self> {
        ConditionalInput::new(doc.u)
    }
}

impl From<ConditionalInput> for ConditionalDoc {
    fn from(c: ConditionalInput) -> Self {
        ConditionalDoc { u: c.branches }
    }
}

impl From<MixtureInput> for ConditionalInput {
    fn from(m: MixtureInput) -> Self {
        Self::trivial(m)
    }
}

impl ConditionalInput {
    pub fn new(branches: Vec<Branch>) -> Result<Self> {
        let first = branches
            .first()
            .ok_or_else(|| Error::InvalidInput("conditional family needs at least one branch".into()))?;
        let dim = first.input.dim();
        let mut total = 0.0;
        for b in &branches {
            if !(b.q.is_finite() && b.q > 0.0) {
                return Err(Error::InvalidInput(format!("branch weight {} must be positive", b.q)));
            }
            if b.input.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: b.input.dim(),
                });
            }
            total += b.q;
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!("branch weights sum to {total}, expected 1")));
        }
        Ok(Self {
            branches: branches
                .into_iter()
                .map(|b| Branch {
                    q: b.q / total,
                    input: b.input,
                })
                .collect(),
        })
    }

    pub fn trivial(m: MixtureInput) -> Self {
        Self {
            branches: vec![Branch { q: 1.0, input: m }],
        }
    }

    /// `U` equal to the component index of `m`.
    pub fn revealing(m: &MixtureInput) -> Self {
        Self {
            branches: m
                .components()
                .iter()
                .map(|c| Branch {
                    q: c.weight,
                    input: MixtureInput::new(vec![Component {
                        weight: 1.0,
                        ..c.clone()
                    }])
                    .expect("single component is valid"),
                })
                .collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.branches[0].input.dim()
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn is_trivial(&self) -> bool {
        self.branches.len() == 1
    }

    /// Flat mixture with weights `q_u · p_{k|u}`.
    pub fn marginalize(&self) -> MixtureInput {
        if self.is_trivial() {
            return self.branches[0].input.clone();
        }
        let components = self
            .branches
            .iter()
            .flat_map(|b| {
                b.input.components().iter().map(move |c| Component {
                    weight: b.q * c.weight,
                    ..c.clone()
                })
            })
            .collect();
        MixtureInput {
            dim: self.dim(),
            components,
        }
    }

    pub fn overall_covariance(&self) -> SymMatrix {
        self.marginalize().overall_covariance()
    }

    pub fn transform(&self, t: &DMatrix<f64>) -> Result<Self> {
        Ok(Self {
            branches: self
                .branches
                .iter()
                .map(|b| {
                    Ok(Branch {
                        q: b.q,
                        input: b.input.transform(t)?,
                    })
                })
                .collect::<Result<_>>()?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn covariance_examples() {
        let s = SymMatrix::from_rows(&[vec![2.0, 0.3], vec![0.3, 1.0]]).unwrap();
        assert_eq!(MixtureInput::gaussian(s.clone()).overall_covariance(), s);
        assert!((MixtureInput::bpsk().overall_covariance().get(0, 0) - 1.0).abs() < 1e-15);

        let mu = [0.7, -0.4];
        let s2 = SymMatrix::scaled_identity(2, 0.25);
        let m = MixtureInput::new(vec![
            Component { weight: 0.5, mean: mu.to_vec(), cov: s2.clone() },
            Component { weight: 0.5, mean: mu.iter().map(|v| -v).collect(), cov: s2.clone() },
        ])
        .unwrap();
        let expect = DMatrix::from_fn(2, 2, |i, j| s2.get(i, j) + mu[i] * mu[j]);
        assert!((m.overall_covariance().matrix() - expect).norm() < 1e-14);
    }

    #[test]
    fn constructors() {
        let b = MixtureInput::bpsk();
        assert_eq!(b.dim(), 1);
        assert_eq!(b.components().len(), 2);
        let q = MixtureInput::qpsk_parallel(2);
        assert_eq!(q.components().len(), 4);
        assert!(q.components().iter().all(|c| (c.weight - 0.25).abs() < 1e-15));
        assert_eq!(
            MixtureInput::seeded_random_mixture(2, 3, 7),
            MixtureInput::seeded_random_mixture(2, 3, 7)
        );
        assert_ne!(
            MixtureInput::seeded_random_mixture(2, 3, 7),
            MixtureInput::seeded_random_mixture(2, 3, 8)
        );
    }

    #[test]
    fn validation() {
        let bad = MixtureInput::new(vec![Component {
            weight: 0.5,
            mean: vec![0.0],
            cov: SymMatrix::zeros(1),
        }]);
        assert!(bad.is_err());
        let neg = MixtureInput::new(vec![Component {
            weight: 1.0,
            mean: vec![0.0],
            cov: SymMatrix::from_diagonal(&[-1.0]),
        }]);
        assert!(matches!(neg, Err(Error::NotPsd { .. })));
    }

    #[test]
    fn marginalize_examples() {
        let m = MixtureInput::seeded_random_mixture(2, 3, 1);
        assert_eq!(ConditionalInput::trivial(m.clone()).marginalize(), m);
        let rev = ConditionalInput::revealing(&m);
        let back = rev.marginalize();
        assert!(back.overall_covariance().max_abs_diff(&m.overall_covariance()) < 1e-12);
        let two = ConditionalInput::new(vec![
            Branch { q: 0.5, input: m.clone() },
            Branch { q: 0.5, input: m.clone() },
        ])
        .unwrap();
        assert!(two.overall_covariance().max_abs_diff(&m.overall_covariance()) < 1e-12);
    }

    #[test]
    fn json_round_trip() {
        let m = MixtureInput::seeded_random_mixture(2, 2, 3);
        let s = serde_json::to_string(&m).unwrap();
        assert!(s.contains("\"components\"") && s.contains("\"w\""));
        let back: MixtureInput = serde_json::from_str(&s).unwrap();
        assert!(back.overall_covariance().max_abs_diff(&m.overall_covariance()) < 1e-12);
        let c = ConditionalInput::revealing(&MixtureInput::bpsk());
        let s = serde_json::to_string(&c).unwrap();
        assert!(s.starts_with("{\"u\":"));
        let back: ConditionalInput = serde_json::from_str(&s).unwrap();
        assert_eq!(back, c);
        assert!(serde_json::from_str::<MixtureInput>(r#"{"dim":2,"components":[{"w":1,"mean":[0],"cov":[[1]]}]}"#).is_err());
    }

    #[test]
    fn sampling_matches_covariance() {
        let m = MixtureInput::seeded_random_mixture(2, 3, 5);
        let s = m.sampler();
        let sums = crate::rng::par_chunks(
            1_000_000,
            99,
            |rng, count| {
                let mut x = [0.0; 2];
                let mut z = [0.0; 2];
                let mut acc = crate::rng::Moments::new(5);
                for _ in 0..count {
                    s.sample_into(rng, &mut x, &mut z);
                    acc.push(&[x[0], x[1], x[0] * x[0], x[0] * x[1], x[1] * x[1]]);
                }
                acc
            },
            crate::rng::Moments::merge,
        )
        .unwrap();
        let mean = sums.mean();
        let err = sums.std_err();
        let cov = m.overall_covariance();
        let mu = m.mean();
        let emp = [
            mean[2] - mean[0] * mean[0],
            mean[3] - mean[0] * mean[1],
            mean[4] - mean[1] * mean[1],
        ];
        let exact = [cov.get(0, 0), cov.get(0, 1), cov.get(1, 1)];
        for e in 0..3 {
            assert!((emp[e] - exact[e]).abs() <= 4.0 * err[2 + e] + 1e-3, "entry {e}");
        }
        for i in 0..2 {
            assert!((mean[i] - mu[i]).abs() <= 4.0 * err[i]);
        }
    }

    #[test]
    fn density_of_standard_normal() {
        let d = MixtureInput::gaussian(SymMatrix::identity(1)).density().unwrap();
        assert!((d.log_density(&[0.0]) + 0.5 * LN_2PI).abs() < 1e-14);
        assert!(MixtureInput::bpsk().density().is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn marginal_covariance_matches(seed in 0u64..1000, n in 1usize..4, k in 1usize..4) {
                let a = MixtureInput::seeded_random_mixture(n, k, seed);
                let b = MixtureInput::seeded_random_mixture(n, k + 1, seed + 1);
                let c = ConditionalInput::new(vec![
                    Branch { q: 0.3, input: a },
                    Branch { q: 0.7, input: b },
                ]).unwrap();
                prop_assert!(c.marginalize().overall_covariance().max_abs_diff(&c.overall_covariance()) < 1e-12);
                prop_assert!(c.overall_covariance().is_psd(1e-10));
            }
        }
    }
}
