//! Gaussian inputs that reproduce a given conditional mutual information at
//! a point `t_e` of a channel path while staying below a reference
//! covariance and keeping the MMSE gap nonnegative there.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::crossing::{q_matrix, Estimate};
use crate::error::{Error, Result};
use crate::immse::{b_within, integrate_vec, mi_direct, mi_gaussian, IntegrationConfig};
use crate::input::{ConditionalInput, GaussianInput};
use crate::linalg::SymMatrix;
use crate::mmse::{conditional_mmse, EstimatorConfig};
use crate::path::ChannelPath;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchKind {
    Independent,
    General,
    Minimal,
    Extension,
}

/// Tolerances and sampling for the post-condition checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(default)]
pub struct MatchOptions {
    /// Absolute MI tolerance added to the Monte Carlo error.
    pub mi_tol: f64,
    pub bisect_tol: f64,
    /// Number of sampled points in `[t_e, beyond_factor·t_e]`.
    pub beyond_points: usize,
    pub beyond_factor: f64,
    pub integration: IntegrationConfig,
}

impl Default for MatchOptions {
    fn default() -> Self {
        Self {
            mi_tol: 1e-3,
            bisect_tol: 1e-10,
            beyond_points: 8,
            beyond_factor: 3.0,
            integration: IntegrationConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MatchDiagnostics {
    /// `(r(1), r(0))` for the ν bisection.
    pub bracket: Option<(f64, f64)>,
    pub iterations: usize,
    /// Coordinates with nonzero gain at `t_e`.
    pub observed: Vec<usize>,
    /// Frobenius norm of the MMSE standard errors at `t_e`.
    pub mmse_err: f64,
    /// Per-coordinate integrals `∫ B_ii·[E]_ii` (independent matcher).
    pub coordinate_targets: Option<Vec<Estimate>>,
}

/// Smallest value of the gap function at a sampled `t ≥ t_e`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BeyondPoint {
    pub t: f64,
    pub min_value: f64,
    pub tol: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MatchChecks {
    /// MI equality within `mi_tol` (an upper bound for the minimal match).
    pub mi_ok: bool,
    pub mi_tol: f64,
    /// Smallest eigenvalue of `anchor − Σ*` (normalized coordinates).
    pub anchor_gap: f64,
    pub anchor_tol: f64,
    pub below_anchor: bool,
    /// Smallest eigenvalue of `Q(t_e)`, or the smallest `d_i(t_e)`.
    pub q_min: f64,
    pub q_tol: f64,
    pub q_psd: bool,
    pub beyond: Vec<BeyondPoint>,
    pub beyond_ok: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct MatchResult {
    pub kind: MatchKind,
    pub t_e: f64,
    /// Matched covariance (diagonal `Λ` for the independent matcher).
    pub sigma_star: SymMatrix,
    pub nu_star: Option<f64>,
    pub eta: Option<Vec<f64>>,
    /// `C = E_anchor − E_{x|u}` at the identity channel of the normalized problem.
    pub c_matrix: Option<SymMatrix>,
    /// Anchor covariance in normalized coordinates.
    pub anchor_normalized: Option<SymMatrix>,
    /// Target `I(X; Y(t_e) | U)`.
    pub alpha: Estimate,
    /// `I_G(Σ*, t_e)`.
    pub achieved: f64,
    pub residual: f64,
    pub diagnostics: MatchDiagnostics,
    pub checks: MatchChecks,
}

impl MatchResult {
    pub fn passes(&self) -> bool {
        let c = &self.checks;
        c.mi_ok && c.below_anchor && c.q_psd && c.beyond_ok
    }

    /// `r(ν)` for this result's anchor and `C`.
    pub fn r(&self, nu: f64) -> Result<f64> {
        match (&self.anchor_normalized, &self.c_matrix) {
            (Some(a), Some(c)) => r_of_nu(&anchor_precision(a)?, c, nu),
            _ => Err(Error::InvalidInput("result carries no r(ν) data".into())),
        }
    }
}

/// `(Σ + I)⁻¹`.
pub fn anchor_precision(sigma: &SymMatrix) -> Result<SymMatrix> {
    sigma.add(&SymMatrix::identity(sigma.dim())).inverse_pd()
}

/// `r(ν) = −½·log det(P + ν·C)`.
pub fn r_of_nu(precision: &SymMatrix, c: &SymMatrix, nu: f64) -> Result<f64> {
    Ok(-0.5 * precision.add(&c.scale(nu)).log_det_pd()?)
}

struct Normalized {
    observed: Vec<usize>,
    gains: Vec<f64>,
    cond: ConditionalInput,
}

fn normalize(cond: &ConditionalInput, path: &ChannelPath, t_e: f64) -> Result<Normalized> {
    if !(t_e > 0.0) {
        return Err(Error::InvalidInput(format!("t_e must be positive, got {t_e}")));
    }
    if cond.dim() != path.dim() {
        return Err(Error::DimensionMismatch {
            expected: cond.dim(),
            found: path.dim(),
        });
    }
    let g = path.gains(t_e).gains;
    let observed: Vec<usize> = (0..g.len()).filter(|&i| g[i] != 0.0).collect();
    if observed.is_empty() {
        return Err(Error::InvalidInput("every gain vanishes at t_e".into()));
    }
    let gains: Vec<f64> = observed.iter().map(|&i| g[i]).collect();
    let mut t = DMatrix::zeros(observed.len(), g.len());
    for (k, &i) in observed.iter().enumerate() {
        t[(k, i)] = g[i];
    }
    Ok(Normalized {
        cond: cond.transform(&t)?,
        observed,
        gains,
    })
}

impl Normalized {
    fn to_normalized(&self, s: &SymMatrix) -> SymMatrix {
        s.select(&self.observed).diag_congruence(&self.gains)
    }

    /// Covariance in original coordinates whose observed block is
    /// `D⁻¹·S·D⁻¹` and whose gap to `anchor` is `R·(A_oo − S_oo)·Rᵀ` with
    /// `R = A[:, o]·A_oo⁺`.
    fn embed(&self, s: &SymMatrix, anchor: &SymMatrix) -> Result<SymMatrix> {
        let inv: Vec<f64> = self.gains.iter().map(|g| 1.0 / g).collect();
        let s_oo = s.diag_congruence(&inv);
        let n = anchor.dim();
        let m = self.observed.len();
        if m == n {
            return Ok(s_oo);
        }
        let a_oo = anchor.select(&self.observed);
        let pinv = a_oo
            .matrix()
            .clone()
            .pseudo_inverse(1e-12 * (1.0 + a_oo.max_eigenvalue()))
            .map_err(|e| Error::Numerical(e.to_string()))?;
        let mut a_no = DMatrix::zeros(n, m);
        for (k, &j) in self.observed.iter().enumerate() {
            a_no.set_column(k, &anchor.matrix().column(j));
        }
        let r = a_no * pinv;
        Ok(anchor.sub(&a_oo.sub(&s_oo).congruence(&r)))
    }
}

fn beyond_grid(t_e: f64, opts: &MatchOptions) -> Vec<f64> {
    let k = opts.beyond_points.max(1);
    (1..=k)
        .map(|j| t_e * (1.0 + (opts.beyond_factor - 1.0) * j as f64 / k as f64))
        .collect()
}

/// Gap check `Q(t) ⪰ −4·‖err‖` for `t` beyond `t_e`.
fn q_beyond(
    cond: &ConditionalInput,
    sigma: &SymMatrix,
    path: &ChannelPath,
    t_e: f64,
    cfg: &EstimatorConfig,
    opts: &MatchOptions,
) -> Result<Vec<BeyondPoint>> {
    let g = GaussianInput::new(sigma.clip_psd())?;
    beyond_grid(t_e, opts)
        .par_iter()
        .map(|&t| {
            let q = q_matrix(cond, &g, path, t, cfg)?;
            Ok(BeyondPoint {
                t,
                min_value: q.value.min_eigenvalue(),
                tol: 4.0 * q.err_norm() + 1e-9,
            })
        })
        .collect()
}

fn anchored_match(
    kind: MatchKind,
    cond: &ConditionalInput,
    path: &ChannelPath,
    t_e: f64,
    anchor: &SymMatrix,
    cfg: &EstimatorConfig,
    opts: &MatchOptions,
) -> Result<MatchResult> {
    let norm = normalize(cond, path, t_e)?;
    let m = norm.observed.len();
    let ident = DMatrix::identity(m, m);
    let alpha = mi_direct(&norm.cond, &ident, cfg)?;
    let e = conditional_mmse(&norm.cond, &ident, cfg)?;
    let err = e.err_norm();
    let a_norm = norm.to_normalized(anchor);
    let p = anchor_precision(&a_norm)?;
    let c_raw = SymMatrix::identity(m).sub(&p).sub(&e.matrix);
    // `E ⪯ I − P` holds exactly; sampling noise can leave tiny negative eigenvalues.
    let c = c_raw.clip_psd();
    let i_minus_e = SymMatrix::identity(m).sub(&e.matrix);
    let ime_inv = i_minus_e.inverse_pd().map_err(|_| {
        Error::Numerical("I − E is not positive definite; the MMSE estimate is broken".into())
    })?;
    let r_tol = 4.0 * (alpha.std_err + 0.5 * ime_inv.frobenius() * err) + 1e-9;
    let r0 = r_of_nu(&p, &c, 0.0)?;
    let r1 = r_of_nu(&p, &c, 1.0)?;

    if kind == MatchKind::Extension {
        if alpha.value > r0 + r_tol {
            return Err(Error::Hypothesis(format!(
                "I(X;Y|U) = {} exceeds the bound's Gaussian MI {}",
                alpha.value, r0
            )));
        }
        let cmin = c_raw.min_eigenvalue();
        if cmin < -(4.0 * err + 1e-9) {
            return Err(Error::Hypothesis(format!(
                "the bound's MMSE gap is not PSD at t_e (min eigenvalue {cmin})"
            )));
        }
    }

    let (sigma_norm, nu, iterations) = if kind == MatchKind::Minimal {
        (ime_inv.sub(&SymMatrix::identity(m)), Some(1.0), 0)
    } else {
        if alpha.value > r0 + r_tol || alpha.value < r1 - r_tol {
            return Err(Error::Bracket(format!(
                "target {} outside [r(1), r(0)] = [{r1}, {r0}] beyond tolerance {r_tol}",
                alpha.value
            )));
        }
        let target = alpha.value.min(r0).max(r1.min(r0));
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        let mut it = 0;
        while hi - lo > opts.bisect_tol {
            let mid = 0.5 * (lo + hi);
            if r_of_nu(&p, &c, mid)? > target {
                lo = mid;
            } else {
                hi = mid;
            }
            it += 1;
        }
        let nu = 0.5 * (lo + hi);
        let s = p.add(&c.scale(nu)).inverse_pd()?.sub(&SymMatrix::identity(m));
        (s, Some(nu), it)
    };

    let sigma_star = norm.embed(&sigma_norm, anchor)?;
    let h = path.gains(t_e).matrix();
    let achieved = mi_gaussian(&sigma_star.clip_psd(), &h)?;
    let residual = (achieved - alpha.value).abs();
    let mi_tol = opts.mi_tol + 3.0 * alpha.std_err;
    let mi_ok = match kind {
        MatchKind::Minimal => achieved <= alpha.value + mi_tol,
        _ => residual <= mi_tol,
    };

    let nu_v = nu.unwrap_or(0.0);
    let sp = sigma_norm.add(&SymMatrix::identity(m));
    let anchor_tol = 4.0 * nu_v * sp.frobenius().powi(2) * err + 1e-9 * (1.0 + a_norm.max_eigenvalue());
    let anchor_gap = a_norm.sub(&sigma_norm).min_eigenvalue();
    let psd_tol = anchor_tol;
    let below_anchor = anchor_gap >= -anchor_tol && sigma_norm.min_eigenvalue() >= -psd_tol;

    let q = q_matrix(cond, &GaussianInput::new(sigma_star.clip_psd())?, path, t_e, cfg)?;
    let q_min = q.value.min_eigenvalue();
    let q_tol = 4.0 * q.err_norm() + 1e-9;
    let beyond = if kind == MatchKind::Minimal {
        Vec::new()
    } else {
        q_beyond(cond, &sigma_star, path, t_e, cfg, opts)?
    };
    let beyond_ok = beyond.iter().all(|b| b.min_value >= -b.tol);

    Ok(MatchResult {
        kind,
        t_e,
        sigma_star,
        nu_star: nu,
        eta: None,
        c_matrix: Some(c),
        anchor_normalized: Some(a_norm),
        alpha: Estimate {
            value: alpha.value,
            err: alpha.std_err,
        },
        achieved,
        residual,
        diagnostics: MatchDiagnostics {
            bracket: Some((r1, r0)),
            iterations,
            observed: norm.observed,
            mmse_err: err,
            coordinate_targets: None,
        },
        checks: MatchChecks {
            mi_ok,
            mi_tol,
            anchor_gap,
            anchor_tol,
            below_anchor,
            q_min,
            q_tol,
            q_psd: q_min >= -q_tol,
            beyond,
            beyond_ok,
        },
    })
}

/// General covariance matcher: bisects `ν` so that `r(ν)` equals the
/// conditional MI at `t_e`, anchored at the linear MMSE of `X`.
pub fn match_general(
    cond: &ConditionalInput,
    path: &ChannelPath,
    t_e: f64,
    cfg: &EstimatorConfig,
    opts: &MatchOptions,
) -> Result<MatchResult> {
    let anchor = cond.overall_covariance();
    anchored_match(MatchKind::General, cond, path, t_e, &anchor, cfg, opts)
}

/// `Σ_g = (I − E_{x|u})⁻¹ − I` in normalized coordinates.
pub fn minimal_match(
    cond: &ConditionalInput,
    path: &ChannelPath,
    t_e: f64,
    cfg: &EstimatorConfig,
    opts: &MatchOptions,
) -> Result<MatchResult> {
    let anchor = cond.overall_covariance();
    anchored_match(MatchKind::Minimal, cond, path, t_e, &anchor, cfg, opts)
}

/// Same construction as [`match_general`] with the anchor replaced by a
/// caller-supplied Gaussian upper bound.
pub fn match_extension(
    cond: &ConditionalInput,
    path: &ChannelPath,
    t_e: f64,
    ub: &GaussianInput,
    cfg: &EstimatorConfig,
    opts: &MatchOptions,
) -> Result<MatchResult> {
    if ub.dim() != cond.dim() {
        return Err(Error::DimensionMismatch {
            expected: cond.dim(),
            found: ub.dim(),
        });
    }
    anchored_match(MatchKind::Extension, cond, path, t_e, &ub.cov, cfg, opts)
}

/// Independent Gaussian matcher: per coordinate, `Λ_ii = η_i·[Σ_x]_ii`
/// with `∫₀^{t_e} d_i dτ = 0`.
pub fn match_independent(
    cond: &ConditionalInput,
    path: &ChannelPath,
    t_e: f64,
    cfg: &EstimatorConfig,
    opts: &MatchOptions,
) -> Result<MatchResult> {
    if !(t_e > 0.0) {
        return Err(Error::InvalidInput(format!("t_e must be positive, got {t_e}")));
    }
    let n = cond.dim();
    if path.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: path.dim(),
        });
    }
    let sx = cond.overall_covariance().diagonal();
    let (c, c_err) = integrate_vec(path, t_e, &opts.integration, n, |t, lo, hi| {
        let b = b_within(path, t, lo, hi);
        let e = conditional_mmse(cond, &path.gains(t).matrix(), cfg)?;
        Ok((
            (0..n).map(|i| b[i] * e.matrix.get(i, i)).collect(),
            (0..n).map(|i| b[i].abs() * e.std_err.get(i, i)).collect(),
        ))
    })?;
    let g = path.gains(t_e).gains;
    let mut eta = vec![0.0; n];
    let mut iterations = 0;
    for i in 0..n {
        let f = |e: f64| 0.5 * (g[i] * g[i] * e * sx[i]).ln_1p() - c[i];
        let tol_i = 4.0 * c_err[i] + 1e-9;
        if g[i] == 0.0 || sx[i] == 0.0 {
            if c[i].abs() > tol_i {
                return Err(Error::Bracket(format!(
                    "coordinate {i} carries no Gaussian information but its target is {}",
                    c[i]
                )));
            }
            continue;
        }
        if f(1.0) < -tol_i || f(0.0) > tol_i {
            return Err(Error::Bracket(format!(
                "coordinate {i}: F(0) = {}, F(1) = {} do not bracket zero (tolerance {tol_i})",
                f(0.0),
                f(1.0)
            )));
        }
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        while hi - lo > opts.bisect_tol {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            iterations += 1;
        }
        eta[i] = 0.5 * (lo + hi);
    }
    let lambda: Vec<f64> = (0..n).map(|i| eta[i] * sx[i]).collect();
    let sigma_star = SymMatrix::from_diagonal(&lambda);
    let h = path.gains(t_e).matrix();
    let achieved = mi_gaussian(&sigma_star, &h)?;
    let alpha = mi_direct(cond, &h, cfg)?;
    let residual = (achieved - alpha.value).abs();
    let mi_tol = opts.mi_tol + 3.0 * (alpha.std_err + c_err.iter().sum::<f64>());

    let lam = GaussianInput::new(sigma_star.clone())?;
    let d_at = |t: f64| -> Result<(f64, f64)> {
        let q = q_matrix(cond, &lam, path, t, cfg)?;
        let b = path.b_diag(t);
        let d: f64 = (0..n).map(|i| b[i] * q.value.get(i, i)).sum();
        let e: f64 = (0..n).map(|i| b[i].abs() * q.err.get(i, i)).sum();
        Ok((d, 4.0 * e + 1e-9))
    };
    let (q_min, q_tol) = d_at(t_e)?;
    let beyond: Vec<BeyondPoint> = beyond_grid(t_e, opts)
        .par_iter()
        .map(|&t| {
            let (v, tol) = d_at(t)?;
            Ok(BeyondPoint { t, min_value: v, tol })
        })
        .collect::<Result<_>>()?;
    let beyond_ok = beyond.iter().all(|b| b.min_value >= -b.tol);
    let anchor_gap = (0..n).map(|i| sx[i] - lambda[i]).fold(f64::INFINITY, f64::min);

    Ok(MatchResult {
        kind: MatchKind::Independent,
        t_e,
        sigma_star,
        nu_star: None,
        eta: Some(eta),
        c_matrix: None,
        anchor_normalized: None,
        alpha: Estimate {
            value: alpha.value,
            err: alpha.std_err,
        },
        achieved,
        residual,
        diagnostics: MatchDiagnostics {
            bracket: None,
            iterations,
            observed: (0..n).filter(|&i| g[i] != 0.0).collect(),
            mmse_err: c_err.iter().map(|e| e * e).sum::<f64>().sqrt(),
            coordinate_targets: Some(
                c.iter()
                    .zip(&c_err)
                    .map(|(&value, &err)| Estimate { value, err })
                    .collect(),
            ),
        },
        checks: MatchChecks {
            mi_ok: residual <= mi_tol,
            mi_tol,
            anchor_gap,
            anchor_tol: 0.0,
            below_anchor: anchor_gap >= 0.0,
            q_min,
            q_tol,
            q_psd: q_min >= -q_tol,
            beyond,
            beyond_ok,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::input::MixtureInput;
    use crate::path::{make_path, snr_path, DiagonalChannel};

    fn bpsk2() -> ConditionalInput {
        MixtureInput::qpsk_parallel(2).into()
    }

    #[test]
    fn gaussian_input_matches_itself() {
        let s = SymMatrix::from_rows(&[vec![1.0, 0.3], vec![0.3, 0.6]]).unwrap();
        let cond: ConditionalInput = MixtureInput::gaussian(s.clone()).into();
        let p = snr_path(2, 4.0).unwrap();
        let r = match_general(&cond, &p, 1.5, &EstimatorConfig::default(), &MatchOptions::default()).unwrap();
        assert!(r.sigma_star.max_abs_diff(&s) < 1e-8);
        assert!(r.nu_star.unwrap() < 1e-9);
        assert!(r.residual < 1e-9);
        assert!(r.passes());
        let m = minimal_match(&cond, &p, 1.5, &EstimatorConfig::default(), &MatchOptions::default()).unwrap();
        assert!(m.sigma_star.max_abs_diff(&s) < 1e-8);
    }

    #[test]
    fn revealing_input_matches_zero() {
        let cond = ConditionalInput::revealing(&MixtureInput::qpsk_parallel(2));
        let p = snr_path(2, 4.0).unwrap();
        let r = match_general(&cond, &p, 1.0, &EstimatorConfig::default(), &MatchOptions::default()).unwrap();
        assert!(r.alpha.value.abs() < 1e-12);
        assert!(r.sigma_star.frobenius() < 1e-8);
        assert!((r.nu_star.unwrap() - 1.0).abs() < 1e-8);
        let i = match_independent(&cond, &p, 1.0, &EstimatorConfig::default(), &MatchOptions::default()).unwrap();
        assert!(i.eta.unwrap().iter().all(|&e| e < 1e-8));
    }

    #[test]
    fn bpsk_general_match_posts() {
        let p = snr_path(2, 4.0).unwrap();
        let r = match_general(&bpsk2(), &p, 1.0, &EstimatorConfig::default(), &MatchOptions::default()).unwrap();
        let nu = r.nu_star.unwrap();
        assert!(nu > 0.0 && nu < 1.0);
        assert!(r.passes(), "{:?}", r.checks);
        let rs: Vec<f64> = (0..20).map(|k| r.r(k as f64 / 19.0).unwrap()).collect();
        assert!(rs.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn bpsk_independent_match_posts() {
        let p = snr_path(2, 4.0).unwrap();
        let r = match_independent(&bpsk2(), &p, 1.0, &EstimatorConfig::default(), &MatchOptions::default()).unwrap();
        let eta = r.eta.clone().unwrap();
        assert!(eta.iter().all(|&e| e > 0.0 && e < 1.0));
        assert!(r.residual < 1e-3, "{}", r.residual);
        assert!(r.passes(), "{:?}", r.checks);
    }

    #[test]
    fn independent_gaussian_gives_eta_one() {
        let s = SymMatrix::from_diagonal(&[0.7, 1.3]);
        let cond: ConditionalInput = MixtureInput::gaussian(s).into();
        let p = make_path(&[
            DiagonalChannel::new(vec![0.5, 1.0]).unwrap(),
            DiagonalChannel::new(vec![1.5, 1.2]).unwrap(),
        ])
        .unwrap();
        let r = match_independent(&cond, &p, 1.7, &EstimatorConfig::default(), &MatchOptions::default()).unwrap();
        assert!(r.eta.unwrap().iter().all(|&e| (e - 1.0).abs() < 1e-6));
    }

    #[test]
    fn extension_fixed_point_and_chain() {
        let p = snr_path(2, 4.0).unwrap();
        let cfg = EstimatorConfig::default();
        let opts = MatchOptions::default();
        let g = match_general(&bpsk2(), &p, 1.0, &cfg, &opts).unwrap();
        let ub = GaussianInput::new(g.sigma_star.clone()).unwrap();
        let e = match_extension(&bpsk2(), &p, 1.0, &ub, &cfg, &opts).unwrap();
        assert!(e.sigma_star.max_abs_diff(&g.sigma_star) < 1e-6);
        let too_small = GaussianInput::new(g.sigma_star.scale(0.5)).unwrap();
        assert!(matches!(
            match_extension(&bpsk2(), &p, 1.0, &too_small, &cfg, &opts),
            Err(Error::Hypothesis(_))
        ));
    }

    #[test]
    fn zero_gain_coordinate_is_embedded() {
        let p = make_path(&[
            DiagonalChannel::new(vec![1.0, 0.0]).unwrap(),
            DiagonalChannel::new(vec![1.0, 1.0]).unwrap(),
        ])
        .unwrap();
        let cond = bpsk2();
        let r = match_general(&cond, &p, 1.0, &EstimatorConfig::default(), &MatchOptions::default()).unwrap();
        assert_eq!(r.diagnostics.observed, vec![0]);
        assert!(r.sigma_star.min_eigenvalue() >= -1e-9);
        assert!(crate::linalg::loewner_leq(&r.sigma_star, &cond.overall_covariance(), 1e-9).unwrap());
        assert!(r.residual < 1e-6);
    }
}
