//! Seeded instance families and the property suites run over them.
//!
//! Each suite returns a [`SuiteOutcome`] listing every failed check. The
//! outcomes contain no timing information, so serialized results are
//! reproducible byte for byte.

use nalgebra::DMatrix;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bc::{
    achievable_point, inside_outer_bound, random_covariance_splits, random_discrete_chain, random_per_antenna_splits,
    region_compound, region_covariance, region_per_antenna, superposition_input, BcInstance, CompoundBcInstance,
    Constraint,
};
use crate::crossing::{
    check_derivative_bound, d_reports, diagonal_reports, eigen_reports, fisher, q_series, scan_weighted,
    spectrum_scan, bq_sign_mismatches, CrossingReport, Sign, Verdict,
};
use crate::error::Result;
use crate::immse::{epi_check, mi_direct, mi_gaussian, mi_immse, EpiSpec, IntegrationConfig};
use crate::input::{Branch, ConditionalInput, GaussianInput, MixtureInput, RandomMixtureSpec};
use crate::linalg::{loewner_leq, SymMatrix};
use crate::matcher::{match_general, match_independent, MatchOptions};
use crate::mmse::{gaussian_mmse, mmse_matrix, EstimatorConfig, Method};
use crate::path::{make_path, snr_path, ChannelPath, DiagonalChannel, GainScanGrid};
use crate::rng::mix;
use sha2::{Digest, Sha256};

/// Instance counts and sample sizes for a corpus run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusScale {
    pub gaussian: usize,
    pub weighted: usize,
    pub weighted_grid: usize,
    pub diagonal: usize,
    pub eigen: usize,
    pub scan_grid: usize,
    pub derivative: usize,
    pub derivative_points: usize,
    pub epi: usize,
    pub epi_grid: usize,
    pub matcher: usize,
    pub bc: usize,
    /// Samples for Monte Carlo estimates in dimension 3 and above.
    pub samples: usize,
}

impl Default for CorpusScale {
    fn default() -> Self {
        Self::full()
    }
}

impl CorpusScale {
    pub fn full() -> Self {
        Self {
            gaussian: 20,
            weighted: 100,
            weighted_grid: 50,
            diagonal: 50,
            eigen: 50,
            scan_grid: 60,
            derivative: 20,
            derivative_points: 10,
            epi: 20,
            epi_grid: 12,
            matcher: 20,
            bc: 50,
            samples: 200_000,
        }
    }

    pub fn quick() -> Self {
        Self {
            gaussian: 3,
            weighted: 6,
            weighted_grid: 20,
            diagonal: 4,
            eigen: 4,
            scan_grid: 20,
            derivative: 3,
            derivative_points: 3,
            epi: 3,
            epi_grid: 6,
            matcher: 3,
            bc: 5,
            samples: 20_000,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct SuiteOutcome {
    pub name: String,
    pub instances: usize,
    pub checks: usize,
    /// Series with a confirmed violation of the single-crossing pattern.
    pub violations: usize,
    pub inconclusive: usize,
    pub failures: Vec<String>,
    /// Running SHA-256 over every value the suite computed.
    #[serde(skip)]
    digest: Vec<u8>,
}

impl SuiteOutcome {
    fn new(name: &str) -> Self {
        Self {
            name: name.into(),
            ..Default::default()
        }
    }

    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }

    /// Hex digest of the computed values and of the outcome counts.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(&self.digest);
        h.update(format!("{}|{}|{}|{}|{:?}", self.instances, self.checks, self.violations, self.inconclusive, self.failures));
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    fn record(&mut self, xs: &[f64]) {
        let mut h = Sha256::new();
        h.update(&self.digest);
        for x in xs {
            h.update(x.to_bits().to_le_bytes());
        }
        self.digest = h.finalize().to_vec();
    }

    fn check(&mut self, pass: bool, what: impl FnOnce() -> String) {
        self.checks += 1;
        if !pass {
            self.failures.push(what());
        }
    }

    fn report(&mut self, label: &str, r: &CrossingReport) {
        self.record(&r.values);
        self.record(&r.errs);
        match r.verdict {
            Verdict::Violation => self.violations += 1,
            Verdict::Inconclusive => self.inconclusive += 1,
            Verdict::Consistent => {}
        }
        self.check(r.passes(), || {
            format!("{label} {:?}: verdict {:?}, items {:?}", r.kind, r.verdict, r.items)
        });
    }

    fn absorb(&mut self, other: SuiteOutcome) {
        self.instances += other.instances;
        self.checks += other.checks;
        self.violations += other.violations;
        self.inconclusive += other.inconclusive;
        self.failures.extend(other.failures);
        let d = other.digest;
        let mut h = Sha256::new();
        h.update(&self.digest);
        h.update(&d);
        self.digest = h.finalize().to_vec();
    }

    fn error(&mut self, label: &str, e: crate::Error) {
        self.checks += 1;
        self.failures.push(format!("{label}: {e}"));
    }
}

fn rng_for(seed: u64, i: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(seed, i as u64))
}

pub fn random_psd(n: usize, rng: &mut ChaCha8Rng, scale: f64) -> SymMatrix {
    let g = DMatrix::from_fn(n, n, |_, _| rng.random::<f64>() * 2.0 - 1.0);
    SymMatrix::new(&g * g.transpose() * (scale / n as f64)).expect("square")
}

/// Two-anchor path with gains in `[0.3, 1.5]` growing by up to a factor 2.
pub fn random_path(n: usize, rng: &mut ChaCha8Rng) -> ChannelPath {
    let g1: Vec<f64> = (0..n).map(|_| 0.3 + 1.2 * rng.random::<f64>()).collect();
    let g2: Vec<f64> = g1.iter().map(|g| g * (1.0 + rng.random::<f64>())).collect();
    make_path(&[DiagonalChannel::new(g1).expect("valid"), DiagonalChannel::new(g2).expect("valid")])
        .expect("increasing anchors")
}

/// Continuous or discrete mixture, alternating with `i`.
pub fn random_mixture(n: usize, i: usize, rng: &mut ChaCha8Rng) -> MixtureInput {
    let k = 2 + rng.random_range(0..3usize);
    let seed = rng.random::<u64>();
    if i.is_multiple_of(2) {
        RandomMixtureSpec::new(n, k).build(seed)
    } else {
        RandomMixtureSpec::discrete(n, k).build(seed)
    }
}

pub fn random_conditional(n: usize, i: usize, rng: &mut ChaCha8Rng) -> ConditionalInput {
    let nb = 2 + rng.random_range(0..2usize);
    let raw: Vec<f64> = (0..nb).map(|_| 0.3 + rng.random::<f64>()).collect();
    let total: f64 = raw.iter().sum();
    let branches = raw
        .iter()
        .enumerate()
        .map(|(u, q)| Branch {
            q: q / total,
            input: random_mixture(n, i + u, rng),
        })
        .collect();
    ConditionalInput::new(branches).expect("valid branches")
}

/// Dimension schedule `1, 2, …, max_n` cycling with the instance index.
fn dim_for(i: usize, max_n: usize) -> usize {
    1 + i % max_n
}

fn cfg_for(seed: u64, i: usize, scale: &CorpusScale) -> EstimatorConfig {
    EstimatorConfig::monte_carlo(scale.samples, mix(seed, 1000 + i as u64)).with_method(Method::Auto)
}

/// Monte Carlo MMSE of single Gaussians against the closed form, 3 errors per entry.
pub fn gaussian_suite(scale: &CorpusScale, seed: u64) -> SuiteOutcome {
    let mut out = SuiteOutcome::new("gaussian_closed_form");
    let parts: Vec<SuiteOutcome> = (0..scale.gaussian)
        .into_par_iter()
        .map(|i| {
            let mut o = SuiteOutcome::new("");
            o.instances = 1;
            let mut rng = rng_for(seed, i);
            let n = dim_for(i, 4);
            let cov = random_psd(n, &mut rng, 1.5);
            let h = crate::linalg::diag_matrix(&(0..n).map(|_| 0.2 + 2.0 * rng.random::<f64>()).collect::<Vec<_>>());
            let cfg = EstimatorConfig::monte_carlo(scale.samples, mix(seed, i as u64)).with_method(Method::MonteCarlo);
            match (mmse_matrix(&MixtureInput::gaussian(cov.clone()), &h, &cfg), gaussian_mmse(&cov, &h)) {
                (Ok(mc), Ok(cf)) => {
                    o.record(mc.matrix.matrix().as_slice());
                    o.record(mc.std_err.matrix().as_slice());
                    for a in 0..n {
                        for b in 0..n {
                            let d = (mc.matrix.get(a, b) - cf.get(a, b)).abs();
                            let tol = 3.0 * mc.std_err.get(a, b)
                                + 64.0 * f64::EPSILON * (scale.samples as f64).sqrt() * (1.0 + cf.frobenius());
                            o.check(d <= tol, || format!("instance {i} entry ({a},{b}): |diff| {d:e} > {tol:e}"));
                        }
                    }
                }
                (Err(e), _) | (_, Err(e)) => o.error(&format!("instance {i}"), e),
            }
            o
        })
        .collect();
    parts.into_iter().for_each(|p| out.absorb(p));
    out
}

/// `q_A` scans for random mixtures and PSD weights.
pub fn weighted_suite(scale: &CorpusScale, seed: u64) -> SuiteOutcome {
    let mut out = SuiteOutcome::new("weighted_trace");
    for i in 0..scale.weighted {
        out.instances += 1;
        let mut rng = rng_for(seed, i);
        let n = dim_for(i, 4);
        let input: ConditionalInput = random_mixture(n, i, &mut rng).into();
        let a = random_psd(n, &mut rng, 1.0);
        let sx = input.overall_covariance();
        let ratio = 0.2 + 1.3 * rng.random::<f64>();
        let sigma2 = ratio * sx.trace() / n as f64;
        // push the top out until the Gaussian term `Tr A / γ` is small next to the scale
        let size = sigma2 * a.trace() + a.matrix().component_mul(sx.matrix()).sum();
        let mut hi = 1e3;
        while a.trace() / hi > 1e-3 * size {
            hi *= 2.0;
        }
        let grid = GainScanGrid::log_with_zero(1e-2, hi, scale.weighted_grid).expect("grid");
        match scan_weighted(&input, sigma2.max(1e-6), &a, &grid, &cfg_for(seed, i, scale)) {
            Ok(r) => out.report(&format!("instance {i}"), &r),
            Err(e) => out.error(&format!("instance {i}"), e),
        }
    }
    out
}

/// Log grid on the path parameter with the anchor times inserted. The top
/// of the grid is where every gain has reached `10³`, and at least `t = 10³`.
fn scan_grid(path: &ChannelPath, points: usize) -> GainScanGrid {
    let mut hi = 1e3;
    while path.gains(hi).gains.iter().any(|&g| g < 1e3) {
        hi *= 2.0;
    }
    GainScanGrid::log_with_zero(1e-2, hi, points)
        .expect("grid")
        .with_anchors(path)
}

/// Per-diagonal and `d_i` scans with diagonal `Λ`; odd instances are conditioned.
pub fn diagonal_suite(scale: &CorpusScale, seed: u64) -> SuiteOutcome {
    let mut out = SuiteOutcome::new("diagonal");
    for i in 0..scale.diagonal {
        out.instances += 1;
        let mut rng = rng_for(seed ^ 0xD1A6, i);
        let n = dim_for(i, 3);
        let cond = if i % 2 == 1 {
            random_conditional(n, i / 2, &mut rng)
        } else {
            random_mixture(n, i / 2, &mut rng).into()
        };
        let sx = cond.overall_covariance().diagonal();
        let matched = i % 5 == 4;
        let lam: Vec<f64> = if matched {
            sx.clone()
        } else {
            sx.iter().map(|s| s * (0.3 + 1.2 * rng.random::<f64>())).collect()
        };
        let lambda = GaussianInput::diagonal(&lam).expect("diagonal");
        let path = random_path(n, &mut rng);
        let grid = scan_grid(&path, scale.scan_grid);
        let label = format!("instance {i}");
        match q_series(&cond, &lambda, &path, &grid, &cfg_for(seed, i, scale)) {
            Ok(series) => {
                for r in diagonal_reports(&series, true) {
                    out.report(&label, &r);
                }
                let (per, sum) = d_reports(&series, &path);
                for r in per.iter().chain(std::iter::once(&sum)) {
                    out.report(&label, r);
                    out.check(r.values[0] == 0.0, || format!("{label} {:?}: d(0) = {}", r.kind, r.values[0]));
                    if matched {
                        let neg = r.signs().contains(&Sign::Neg);
                        out.check(!neg, || format!("{label} {:?}: negative with matched variances", r.kind));
                    }
                }
            }
            Err(e) => out.error(&label, e),
        }
    }
    out
}

/// Per-eigenvalue scans with a general Gaussian reference, plus the sign
/// relation between the spectra of `B·Q` and `Q`.
pub fn eigen_suite(scale: &CorpusScale, seed: u64) -> (SuiteOutcome, SuiteOutcome) {
    let mut out = SuiteOutcome::new("eigenvalue");
    let mut signs = SuiteOutcome::new("bq_sign_relation");
    for i in 0..scale.eigen {
        out.instances += 1;
        signs.instances += 1;
        let mut rng = rng_for(seed ^ 0xE16E, i);
        let n = dim_for(i, 3);
        let cond = if i % 3 == 2 {
            random_conditional(n, i, &mut rng)
        } else {
            random_mixture(n, i, &mut rng).into()
        };
        let sx = cond.overall_covariance();
        let gauss = GaussianInput::new(random_psd(n, &mut rng, 0.4 + 1.2 * sx.trace() / n as f64)).expect("psd");
        let path = random_path(n, &mut rng);
        let grid = scan_grid(&path, scale.scan_grid);
        let label = format!("instance {i}");
        match spectrum_scan(&cond, &gauss, &path, &grid, &cfg_for(seed, i, scale), scale.scan_grid) {
            Ok((_, scan)) => {
                for r in eigen_reports(&scan, false) {
                    out.report(&label, &r);
                }
                let bad = bq_sign_mismatches(&scan);
                signs.checks += scan.grid.len();
                if !bad.is_empty() {
                    signs.failures.push(format!("{label}: sign mismatches at {bad:?}"));
                }
            }
            Err(e) => out.error(&label, e),
        }
    }
    (out, signs)
}

/// Finite-difference derivative bound at interior points; every fourth
/// instance is Gaussian and must meet the bound with equality.
pub fn derivative_suite(scale: &CorpusScale, seed: u64) -> SuiteOutcome {
    let mut out = SuiteOutcome::new("derivative_bound");
    for i in 0..scale.derivative {
        out.instances += 1;
        let mut rng = rng_for(seed ^ 0xDE71, i);
        let n = dim_for(i, 3);
        let gaussian_case = i % 4 == 0;
        let cond: ConditionalInput = if gaussian_case {
            MixtureInput::gaussian(random_psd(n, &mut rng, 1.0)).into()
        } else if i % 4 == 3 {
            random_conditional(n, i, &mut rng)
        } else {
            random_mixture(n, i, &mut rng).into()
        };
        let gauss = GaussianInput::new(random_psd(n, &mut rng, 1.0)).expect("psd");
        let path = random_path(n, &mut rng);
        let k = scale.derivative_points.max(1);
        let ts: Vec<f64> = (0..k).map(|j| 0.2 + 2.8 * j as f64 / (k.max(2) - 1) as f64).collect();
        let cfg = cfg_for(seed, i, scale);
        let results: Vec<_> = ts
            .par_iter()
            .map(|&t| check_derivative_bound(&cond, &gauss, &path, t, &cfg))
            .collect();
        for (t, r) in ts.iter().zip(results) {
            match r {
                Ok(b) => {
                    out.record(&[b.min_gap, b.tolerance]);
                    out.check(b.holds, || {
                        format!("instance {i} t={t}: min gap {:e} below -{:e}", b.min_gap, b.tolerance)
                    });
                    if gaussian_case {
                        let gap = b.lhs.sub(&b.rhs).frobenius();
                        out.check(gap <= b.tolerance, || {
                            format!("instance {i} t={t}: Gaussian equality off by {gap:e} (tol {:e})", b.tolerance)
                        });
                    }
                }
                Err(e) => out.error(&format!("instance {i} t={t}"), e),
            }
        }
    }
    out
}

/// A named instance of the shared corpus.
#[derive(Debug, Clone)]
pub struct CorpusInstance {
    pub name: String,
    pub cond: ConditionalInput,
    pub path: ChannelPath,
    pub t_end: f64,
}

/// Fixed families plus seeded random instances in dimensions 1 to 3.
pub fn standard_corpus(seed: u64) -> Vec<CorpusInstance> {
    let mut v = vec![
        CorpusInstance {
            name: "bpsk_snr".into(),
            cond: MixtureInput::bpsk().into(),
            path: snr_path(1, 4.0).expect("path"),
            t_end: 1.0,
        },
        CorpusInstance {
            name: "bpsk2_snr".into(),
            cond: MixtureInput::qpsk_parallel(2).into(),
            path: snr_path(2, 4.0).expect("path"),
            t_end: 2.0,
        },
        CorpusInstance {
            name: "gaussian2".into(),
            cond: MixtureInput::gaussian(SymMatrix::from_rows(&[vec![1.0, 0.4], vec![0.4, 0.7]]).expect("sym"))
                .into(),
            path: snr_path(2, 4.0).expect("path"),
            t_end: 1.5,
        },
        CorpusInstance {
            name: "bpsk2_revealing".into(),
            cond: ConditionalInput::revealing(&MixtureInput::qpsk_parallel(2)),
            path: snr_path(2, 4.0).expect("path"),
            t_end: 1.0,
        },
    ];
    for i in 0..12 {
        let mut rng = rng_for(seed ^ 0xC0C0, i);
        let n = dim_for(i, 3);
        let cond = if i % 3 == 2 {
            random_conditional(n, i, &mut rng)
        } else {
            random_mixture(n, i, &mut rng).into()
        };
        let path = random_path(n, &mut rng);
        v.push(CorpusInstance {
            name: format!("random_{i}_n{n}"),
            cond,
            path,
            t_end: 0.5 + 2.0 * rng.random::<f64>(),
        });
    }
    v
}

/// `I(X; Y(t) | U)` in closed form when every branch is a single Gaussian.
fn mi_closed_form(cond: &ConditionalInput, h: &DMatrix<f64>) -> Result<Option<f64>> {
    if !cond.branches().iter().all(|b| b.input.is_single_gaussian()) {
        return Ok(None);
    }
    let mut v = 0.0;
    for b in cond.branches() {
        v += b.q * mi_gaussian(&b.input.components()[0].cov, h)?;
    }
    Ok(Some(v))
}

/// Closed form, direct and I-MMSE values agree within 3 combined errors;
/// also checks the chain rule and monotonicity along the path.
pub fn mi_suite(scale: &CorpusScale, seed: u64) -> SuiteOutcome {
    let mut out = SuiteOutcome::new("mutual_information");
    let icfg = IntegrationConfig::default();
    for (i, inst) in standard_corpus(seed).iter().enumerate() {
        out.instances += 1;
        let cfg = cfg_for(seed, i, scale);
        let h = inst.path.gains(inst.t_end).matrix();
        let label = &inst.name;
        let mut run = || -> Result<()> {
            let direct = mi_direct(&inst.cond, &h, &cfg)?;
            let integral = mi_immse(&inst.cond, &inst.path, inst.t_end, &cfg, &icfg)?;
            out.record(&[direct.value, direct.std_err, integral.value, integral.std_err]);
            let comb = direct.std_err.hypot(integral.std_err);
            let d = (direct.value - integral.value).abs();
            out.check(d <= 3.0 * comb + 1e-9, || {
                format!("{label}: direct {} vs integral {} (combined err {comb:e})", direct.value, integral.value)
            });
            if let Some(cf) = mi_closed_form(&inst.cond, &h)? {
                let d1 = (cf - direct.value).abs();
                let d2 = (cf - integral.value).abs();
                out.check(d1 <= 3.0 * direct.std_err + 1e-9, || format!("{label}: closed form {cf} vs direct {}", direct.value));
                out.check(d2 <= 3.0 * integral.std_err + 1e-9, || {
                    format!("{label}: closed form {cf} vs integral {}", integral.value)
                });
            }
            out.check(direct.value >= -4.0 * direct.std_err, || format!("{label}: negative MI {}", direct.value));
            if !inst.cond.is_trivial() {
                let marginal: ConditionalInput = inst.cond.marginalize().into();
                let full = mi_direct(&marginal, &h, &cfg)?;
                let gap = full.value - direct.value;
                let err = full.std_err.hypot(direct.std_err);
                out.check(gap >= -3.0 * err - 1e-9, || format!("{label}: chain rule gap {gap} (err {err:e})"));
            }
            let early = mi_direct(&inst.cond, &inst.path.gains(0.5 * inst.t_end).matrix(), &cfg)?;
            let err = early.std_err.hypot(direct.std_err);
            out.check(early.value <= direct.value + 3.0 * err + 1e-9, || {
                format!("{label}: MI decreased from {} to {}", early.value, direct.value)
            });
            Ok(())
        };
        if let Err(e) = run() {
            out.error(label, e);
        }
    }
    out
}

/// Vector EPI check for PD-component mixtures in one and two dimensions.
pub fn epi_suite(scale: &CorpusScale, seed: u64) -> SuiteOutcome {
    let mut out = SuiteOutcome::new("epi");
    let mut snrs = GainScanGrid::log_with_zero(1e-2, 1e3, scale.epi_grid + 1).expect("grid").t_values;
    snrs.remove(0);
    let grid = GainScanGrid::new(snrs).expect("grid");
    for i in 0..scale.epi {
        out.instances += 1;
        let mut rng = rng_for(seed ^ 0xE91, i);
        let n = dim_for(i, 2);
        let k = 2 + rng.random_range(0..2usize);
        let input = RandomMixtureSpec {
            cov_scale: (0.2, 0.8),
            cov_floor: 0.25,
            ..RandomMixtureSpec::new(n, k)
        }
        .build(rng.random::<u64>());
        let noise = random_psd(n, &mut rng, 1.0).add(&SymMatrix::scaled_identity(n, 0.2));
        let spec = EpiSpec {
            input,
            noise_cov: noise,
            snr_grid: grid.clone(),
        };
        match epi_check(&spec, &cfg_for(seed, i, scale)) {
            Ok(r) => {
                out.record(&[r.tail_gap, r.epi_slack, r.epi_slack_err]);
                out.check(r.all_nonpositive(), || format!("instance {i}: positive Δ𝗜 in {:?}", r.points));
                out.check(r.tail_gap <= 2e-2, || format!("instance {i}: |Δ𝗜| at the top of the grid is {}", r.tail_gap));
                out.check(r.epi_holds, || {
                    format!("instance {i}: EPI slack {} (err {:e})", r.epi_slack, r.epi_slack_err)
                });
            }
            Err(e) => out.error(&format!("instance {i}"), e),
        }
    }
    out
}

/// General and independent matchers: every post-condition, plus strict
/// monotonicity of `r(ν)` on a 20-point grid.
pub fn matcher_suite(scale: &CorpusScale, seed: u64) -> (SuiteOutcome, SuiteOutcome) {
    let opts = MatchOptions::default();
    let mut general = SuiteOutcome::new("match_general");
    let mut independent = SuiteOutcome::new("match_independent");
    for i in 0..scale.matcher {
        let mut rng = rng_for(seed ^ 0x3A7C, i);
        let n = dim_for(i, 3);
        let cond = if i % 2 == 1 {
            random_conditional(n, i, &mut rng)
        } else {
            let m = random_mixture(n, 1, &mut rng);
            m.into()
        };
        let path = if i % 3 == 0 {
            snr_path(n, 4.0).expect("path")
        } else {
            random_path(n, &mut rng)
        };
        let t_e = 0.5 + 1.5 * rng.random::<f64>();
        let cfg = cfg_for(seed, i, scale);
        let label = format!("instance {i}");
        general.instances += 1;
        match match_general(&cond, &path, t_e, &cfg, &opts) {
            Ok(r) => {
                general.check(r.passes(), || format!("{label}: checks {:?}", r.checks));
                general.record(r.sigma_star.matrix().as_slice());
                general.record(&[r.alpha.value, r.alpha.err, r.achieved]);
                let rs: Result<Vec<f64>> = (0..20).map(|k| r.r(k as f64 / 19.0)).collect();
                // a gap inside the MMSE noise band only pins r(ν) down to non-increasing
                let resolved = r
                    .c_matrix
                    .as_ref()
                    .is_some_and(|c| c.max_eigenvalue() > 4.0 * r.diagnostics.mmse_err);
                if let Ok(rs) = &rs {
                    general.record(rs);
                }
                match rs {
                    Ok(rs) if resolved => general.check(rs.windows(2).all(|w| w[1] < w[0]), || {
                        format!("{label}: r(ν) not strictly decreasing {rs:?}")
                    }),
                    Ok(rs) => {
                        general.inconclusive += 1;
                        general.check(rs.windows(2).all(|w| w[1] <= w[0] + 1e-12), || {
                            format!("{label}: r(ν) increasing {rs:?}")
                        })
                    }
                    Err(e) => general.error(&label, e),
                }
                let sx = cond.overall_covariance();
                let tol = r.checks.anchor_tol / path.gains(t_e).gains.iter().fold(f64::INFINITY, |a, g| a.min(g * g));
                match loewner_leq(&r.sigma_star, &sx, tol) {
                    Ok(b) => general.check(b, || format!("{label}: Σ* not below Σ_x")),
                    Err(e) => general.error(&label, e),
                }
            }
            Err(e) => general.error(&label, e),
        }
        independent.instances += 1;
        match match_independent(&cond, &path, t_e, &cfg, &opts) {
            Ok(r) => {
                independent.check(r.passes(), || format!("{label}: checks {:?}", r.checks));
                let eta = r.eta.clone().unwrap_or_default();
                independent.record(&eta);
                independent.record(r.sigma_star.matrix().as_slice());
                independent.check(eta.iter().all(|e| (0.0..=1.0).contains(e)), || format!("{label}: η {eta:?}"));
            }
            Err(e) => independent.error(&label, e),
        }
    }
    (general, independent)
}

fn random_users(n: usize, m: usize, rng: &mut ChaCha8Rng) -> Vec<DiagonalChannel> {
    let mut g: Vec<f64> = (0..n).map(|_| 0.3 + 0.7 * rng.random::<f64>()).collect();
    (0..m)
        .map(|_| {
            let h = DiagonalChannel::new(g.clone()).expect("valid");
            g = g.iter().map(|v| v * (1.0 + rng.random::<f64>())).collect();
            h
        })
        .collect()
}

/// Superposition rates, containment of discrete-chain rates, the compound
/// degenerate case and sum-rate telescoping.
pub fn bc_suite(scale: &CorpusScale, seed: u64) -> SuiteOutcome {
    let mut out = SuiteOutcome::new("broadcast");
    for i in 0..scale.bc {
        out.instances += 1;
        let mut rng = rng_for(seed ^ 0xBC, i);
        let n = dim_for(i, 3);
        let m = 2 + (i % 2);
        let label = format!("instance {i}");
        let users = random_users(n, m, &mut rng);
        let s = random_psd(n, &mut rng, 1.0).add(&SymMatrix::scaled_identity(n, 0.1));
        let p: Vec<f64> = (0..n).map(|_| 0.2 + 1.5 * rng.random::<f64>()).collect();
        let mc = EstimatorConfig::monte_carlo(scale.samples / 4, mix(seed, 5000 + i as u64)).with_method(Method::MonteCarlo);
        let mut run = || -> Result<()> {
            let cov_inst = BcInstance::new(users.clone(), Constraint::Covariance(s.clone()))?;
            let splits = random_covariance_splits(&s, m, rng.random::<u64>())?;
            let exact = region_covariance(&cov_inst, &splits)?;
            let est = achievable_point(&superposition_input(&splits)?, &cov_inst, &mc)?;
            out.record(&est.rates);
            out.record(&est.errs);
            for j in 0..m {
                let d = (est.rates[j] - exact.rates[j]).abs();
                out.check(d <= 3.0 * est.errs[j] + 1e-12, || {
                    format!("{label}: superposition R{} = {} vs {} (err {:e})", j + 1, est.rates[j], exact.rates[j], est.errs[j])
                });
            }
            let compound = CompoundBcInstance::new(users.iter().map(|u| vec![u.clone()]).collect(), s.clone())?;
            let cr = region_compound(&compound, &splits)?;
            out.check(cr.rates == exact.rates, || format!("{label}: compound {:?} vs {:?}", cr.rates, exact.rates));

            let same = BcInstance::new(vec![users[m - 1].clone(); m], Constraint::Covariance(s.clone()))?;
            let total = splits.iter().fold(SymMatrix::zeros(n), |a, g| a.add(g));
            let sum = region_covariance(&same, &splits)?.sum_rate();
            let single = mi_gaussian(&total, &users[m - 1].matrix())?;
            out.check((sum - single).abs() <= 1e-12, || format!("{label}: telescoping {sum} vs {single}"));

            let pa_inst = BcInstance::new(users.clone(), Constraint::PerAntenna(p.clone()))?;
            let lambdas = random_per_antenna_splits(&p, m, rng.random::<u64>());
            let pa = region_per_antenna(&pa_inst, &lambdas)?;
            out.check(pa.rates.iter().all(|r| *r >= 0.0), || format!("{label}: negative per-antenna rate"));

            let pair = [users[0].clone(), users[m - 1].clone()];
            let k = 2 + rng.random_range(0..2usize);
            for constraint in [Constraint::PerAntenna(p.clone()), Constraint::Covariance(s.clone())] {
                let inst = BcInstance::new(pair.to_vec(), constraint.clone())?;
                let chain = random_discrete_chain(&constraint, 2, k, rng.random::<u64>())?;
                let cfg = EstimatorConfig::monte_carlo(scale.samples / 4, mix(seed, 7000 + i as u64));
                let pt = achievable_point(&chain, &inst, &cfg)?;
                out.record(&pt.rates);
                out.record(&pt.errs);
                let inside = inside_outer_bound(&inst, &pt, 33)?;
                out.check(inside.inside, || {
                    format!("{label}: discrete chain outside the outer bound by {:e}", inside.worst_excess)
                });
            }
            Ok(())
        };
        if let Err(e) = run() {
            out.error(&label, e);
        }
    }
    out
}

/// `J = I − H·E·Hᵀ` against a score-sampling estimate, and `W = H·Q·Hᵀ`,
/// at three points of each unconditioned corpus instance.
pub fn fisher_suite(scale: &CorpusScale, seed: u64) -> SuiteOutcome {
    let mut out = SuiteOutcome::new("fisher");
    for (i, inst) in standard_corpus(seed).iter().enumerate() {
        if !inst.cond.is_trivial() {
            continue;
        }
        out.instances += 1;
        let input = inst.cond.marginalize();
        let n = input.dim();
        let gauss = GaussianInput::new(SymMatrix::from_diagonal(&input.overall_covariance().diagonal())).expect("psd");
        let cfg = cfg_for(seed, i, scale);
        for t in [0.25 * inst.t_end, inst.t_end, 2.0 * inst.t_end] {
            match fisher(&input, &gauss, &inst.path, t, &cfg) {
                Ok(r) => {
                    out.record(r.j_score.matrix().as_slice());
                    out.record(r.j.matrix().as_slice());
                    out.check(r.agrees(4.0), || {
                        format!("{} t={t}: J off by {} combined errors (n={n})", inst.name, r.j_score_z)
                    });
                }
                Err(e) => out.error(&format!("{} t={t}", inst.name), e),
            }
        }
    }
    out
}

/// Every suite at the given scale.
pub fn run_all(scale: &CorpusScale, seed: u64) -> Vec<SuiteOutcome> {
    let (eig, signs) = eigen_suite(scale, seed);
    let (general, independent) = matcher_suite(scale, seed);
    vec![
        gaussian_suite(scale, seed),
        weighted_suite(scale, seed),
        diagonal_suite(scale, seed),
        eig,
        signs,
        derivative_suite(scale, seed),
        mi_suite(scale, seed),
        epi_suite(scale, seed),
        general,
        independent,
        bc_suite(scale, seed),
        fisher_suite(scale, seed),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quick_corpus_passes() {
        let scale = CorpusScale::quick();
        for s in run_all(&scale, 11) {
            assert!(s.ok(), "{}: {:?}", s.name, s.failures);
            assert_eq!(s.violations, 0);
        }
    }

    #[test]
    fn corpus_is_reproducible() {
        let a: Vec<String> = standard_corpus(3).iter().map(|c| format!("{:?}", c.cond)).collect();
        let b: Vec<String> = standard_corpus(3).iter().map(|c| format!("{:?}", c.cond)).collect();
        assert_eq!(a, b);
    }
}
