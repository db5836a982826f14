//! Mutual information by closed form, direct estimation and line integrals
//! of the MMSE along a channel path; the Δ𝗜 gap and the vector EPI check.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::crossing::Estimate;
use crate::error::{Error, Result};
use crate::input::{ConditionalInput, MixtureInput};
use crate::linalg::SymMatrix;
use crate::mmse::{
    branch_seed, gauss_hermite_nodes, gaussian_mmse, mc_statistic, quad_estimate, weighted_trace, EstimatorConfig,
    Method, PosteriorModel, LN_2PI,
};
use crate::path::{ChannelPath, GainScanGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MiMethod {
    ClosedForm,
    DirectQuadrature,
    DirectMc,
    ImmseIntegral,
}

/// Mutual information in nats.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MiEstimate {
    pub value: f64,
    pub std_err: f64,
    pub method: MiMethod,
}

/// `½·log det(I + H·Σ·Hᵀ)`.
pub fn mi_gaussian(cov: &SymMatrix, h: &DMatrix<f64>) -> Result<f64> {
    if h.ncols() != cov.dim() {
        return Err(Error::DimensionMismatch {
            expected: cov.dim(),
            found: h.ncols(),
        });
    }
    let m = cov.congruence(h).add(&SymMatrix::identity(h.nrows()));
    Ok(0.5 * m.log_det_pd()?)
}

fn mi_direct_single(input: &MixtureInput, h: &DMatrix<f64>, cfg: &EstimatorConfig) -> Result<MiEstimate> {
    let m = h.nrows();
    match cfg.resolve(input, m)? {
        Method::ClosedForm => Ok(MiEstimate {
            value: mi_gaussian(&input.components()[0].cov, h)?,
            std_err: 0.0,
            method: MiMethod::ClosedForm,
        }),
        Method::Quadrature => {
            let model = PosteriorModel::new(input, h)?;
            let (v, e) = quad_estimate(&model, cfg.quad_order, 1, |y, ws, out| {
                model.evaluate(y, ws);
                out[0] = ws.log_fy;
            })?;
            Ok(MiEstimate {
                value: -v[0] - 0.5 * m as f64 * (1.0 + LN_2PI),
                std_err: e[0],
                method: MiMethod::DirectQuadrature,
            })
        }
        _ => {
            let model = PosteriorModel::new(input, h)?;
            let mom = mc_statistic(
                input,
                std::slice::from_ref(h),
                cfg.samples,
                cfg.seed,
                1,
                || model.workspace(),
                |ws, ys, _, z, out| {
                    model.evaluate(&ys[0], ws);
                    let zz: f64 = z.iter().map(|v| v * v).sum();
                    out[0] = -0.5 * zz - 0.5 * m as f64 * LN_2PI - ws.log_fy;
                },
            );
            Ok(MiEstimate {
                value: mom.mean()[0],
                std_err: mom.std_err()[0],
                method: MiMethod::DirectMc,
            })
        }
    }
}

/// `I(X; Y | U)` from the exact output density, averaged over `U`.
/// Monte Carlo uses the per-sample value `log f(y|x) − log f_Y(y)`.
pub fn mi_direct(cond: &ConditionalInput, h: &DMatrix<f64>, cfg: &EstimatorConfig) -> Result<MiEstimate> {
    let nb = cond.branches().len();
    let mut value = 0.0;
    let mut var = 0.0;
    let mut method = MiMethod::ClosedForm;
    for (u, b) in cond.branches().iter().enumerate() {
        let est = mi_direct_single(&b.input, h, &cfg.with_seed(branch_seed(cfg.seed, u, nb)))?;
        value += b.q * est.value;
        var += (b.q * est.std_err).powi(2);
        method = match (method, est.method) {
            (_, MiMethod::DirectMc) | (MiMethod::DirectMc, _) => MiMethod::DirectMc,
            (_, MiMethod::DirectQuadrature) | (MiMethod::DirectQuadrature, _) => MiMethod::DirectQuadrature,
            _ => MiMethod::ClosedForm,
        };
    }
    Ok(MiEstimate {
        value,
        std_err: var.sqrt(),
        method,
    })
}

/// Diagonal of `B` on the open segment `(lo, hi)`, continuous up to both ends.
pub(crate) fn b_within(path: &ChannelPath, t: f64, lo: f64, hi: f64) -> Vec<f64> {
    if path.is_snr_path() {
        return path.b_diag(t);
    }
    let g = path.gains(t).gains;
    let slope = path.derivative(0.5 * (lo + hi));
    g.iter().zip(slope).map(|(g, s)| g * s).collect()
}

fn segments(path: &ChannelPath, t_end: f64) -> Vec<(f64, f64)> {
    let mut cuts: Vec<f64> = path.breakpoints().into_iter().filter(|&t| t > 0.0 && t < t_end).collect();
    for j in 1..=10 {
        cuts.push(t_end / f64::powi(2.0, j));
    }
    cuts.push(0.0);
    cuts.push(t_end);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * t_end);
    cuts.windows(2).map(|w| (w[0], w[1])).collect()
}

/// Options for the adaptive Simpson rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegrationConfig {
    /// Absolute convergence floor for successive estimates.
    pub abs_tol: f64,
    /// Cap on Simpson intervals per segment.
    pub max_intervals: usize,
}

impl Default for IntegrationConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-4,
            max_intervals: 512,
        }
    }
}

/// Composite Simpson over the path segments with interval doubling, for a
/// vector integrand returning `(values, errs)`. Node values are cached
/// across levels. Returns the integrals and their error bars.
pub(crate) fn integrate_vec<F>(
    path: &ChannelPath,
    t_end: f64,
    icfg: &IntegrationConfig,
    len: usize,
    f: F,
) -> Result<(Vec<f64>, Vec<f64>)>
where
    F: Fn(f64, f64, f64) -> Result<(Vec<f64>, Vec<f64>)> + Sync,
{
    let segs = segments(path, t_end);
    let mut cache: BTreeMap<(usize, u64), (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    let mut intervals = 2usize;
    let mut prev: Option<Vec<f64>> = None;
    let mut prev_change: Option<Vec<f64>> = None;
    loop {
        let mut wanted = Vec::new();
        for (s, &(lo, hi)) in segs.iter().enumerate() {
            for k in 0..=intervals {
                let t = lo + (hi - lo) * k as f64 / intervals as f64;
                if !cache.contains_key(&(s, t.to_bits())) {
                    wanted.push((s, t, lo, hi));
                }
            }
        }
        let vals: Vec<_> = wanted
            .par_iter()
            .map(|&(s, t, lo, hi)| Ok(((s, t.to_bits()), f(t, lo, hi)?)))
            .collect::<Result<_>>()?;
        cache.extend(vals);
        let mut total = vec![0.0; len];
        let mut err = vec![0.0; len];
        for (s, &(lo, hi)) in segs.iter().enumerate() {
            let h = (hi - lo) / intervals as f64;
            for k in 0..=intervals {
                let t = lo + (hi - lo) * k as f64 / intervals as f64;
                let c = if k == 0 || k == intervals {
                    1.0
                } else if k % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                let w = c * h / 3.0;
                let (v, e) = &cache[&(s, t.to_bits())];
                for j in 0..len {
                    total[j] += w * v[j];
                    err[j] += w * e[j];
                }
            }
        }
        if let Some(p) = &prev {
            let change: Vec<f64> = total.iter().zip(p).map(|(a, b)| (a - b).abs()).collect();
            // A change is trusted once it shrinks at close to the Simpson
            // rate, sits inside the noise, or is at roundoff level.
            let settled: Vec<bool> = (0..len)
                .map(|j| {
                    let c = change[j];
                    c <= 0.5 * err[j]
                        || c <= 1e-14 * (1.0 + total[j].abs())
                        || prev_change.as_ref().is_some_and(|pc: &Vec<f64>| pc[j] >= 8.0 * c)
                })
                .collect();
            let done = (0..len).all(|j| settled[j] && change[j] < icfg.abs_tol.max(0.5 * err[j]));
            if done || intervals >= icfg.max_intervals {
                for j in 0..len {
                    err[j] += if settled[j] { change[j] / 15.0 } else { change[j] };
                }
                return Ok((total, err));
            }
            prev_change = Some(change);
        }
        prev = Some(total);
        intervals *= 2;
    }
}

fn integrate<F>(path: &ChannelPath, t_end: f64, icfg: &IntegrationConfig, f: F) -> Result<(f64, f64)>
where
    F: Fn(f64, f64, f64) -> Result<(f64, f64)> + Sync,
{
    let (v, e) = integrate_vec(path, t_end, icfg, 1, |t, lo, hi| {
        let (v, e) = f(t, lo, hi)?;
        Ok((vec![v], vec![e]))
    })?;
    Ok((v[0], e[0]))
}

/// `∫₀^t_end Tr(B(τ)·E(τ)) dτ`.
pub fn mi_immse(
    cond: &ConditionalInput,
    path: &ChannelPath,
    t_end: f64,
    cfg: &EstimatorConfig,
    icfg: &IntegrationConfig,
) -> Result<MiEstimate> {
    if t_end < 0.0 {
        return Err(Error::InvalidInput("t_end must be nonnegative".into()));
    }
    if t_end == 0.0 {
        return Ok(MiEstimate {
            value: 0.0,
            std_err: 0.0,
            method: MiMethod::ImmseIntegral,
        });
    }
    let (value, std_err) = integrate(path, t_end, icfg, |t, lo, hi| {
        let b = SymMatrix::from_diagonal(&b_within(path, t, lo, hi));
        weighted_trace(cond, &path.gains(t).matrix(), &b, cfg)
    })?;
    Ok(MiEstimate {
        value,
        std_err,
        method: MiMethod::ImmseIntegral,
    })
}

/// `I_G − I_x` at `H(t)`, by difference of MI values and by integrating
/// `Tr(B·Q)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DeltaI {
    pub t: f64,
    pub difference: MiEstimate,
    pub integral: MiEstimate,
}

pub fn delta_i(
    cond: &ConditionalInput,
    gaussian_cov: &SymMatrix,
    path: &ChannelPath,
    t: f64,
    cfg: &EstimatorConfig,
    icfg: &IntegrationConfig,
) -> Result<DeltaI> {
    let h = path.gains(t).matrix();
    let ig = mi_gaussian(gaussian_cov, &h)?;
    let ix = mi_direct(cond, &h, cfg)?;
    let difference = MiEstimate {
        value: ig - ix.value,
        std_err: ix.std_err,
        method: ix.method,
    };
    let integral = if t == 0.0 {
        MiEstimate {
            value: 0.0,
            std_err: 0.0,
            method: MiMethod::ImmseIntegral,
        }
    } else {
        let (value, std_err) = integrate(path, t, icfg, |tau, lo, hi| {
            let bd = b_within(path, tau, lo, hi);
            let hm = path.gains(tau).matrix();
            let eg = gaussian_mmse(gaussian_cov, &hm)?;
            let b = SymMatrix::from_diagonal(&bd);
            let (tr, err) = weighted_trace(cond, &hm, &b, cfg)?;
            let trg: f64 = bd.iter().enumerate().map(|(i, v)| v * eg.get(i, i)).sum();
            Ok((trg - tr, err))
        })?;
        MiEstimate {
            value,
            std_err,
            method: MiMethod::ImmseIntegral,
        }
    };
    Ok(DeltaI {
        t,
        difference,
        integral,
    })
}

/// `h(X)` in nats for a mixture with positive definite components.
pub fn differential_entropy(input: &MixtureInput, cfg: &EstimatorConfig) -> Result<Estimate> {
    if !input.has_pd_components() {
        return Err(Error::InvalidInput(
            "differential entropy needs positive definite component covariances".into(),
        ));
    }
    let n = input.dim();
    if input.is_single_gaussian() {
        let ld = input.components()[0].cov.log_det_pd()?;
        return Ok(Estimate::exact(0.5 * (n as f64 * (1.0 + LN_2PI) + ld)));
    }
    let density = input.density()?;
    let method = cfg.resolve(input, n)?;
    if method == Method::Quadrature {
        let rule = |order: usize| {
            let nodes = gauss_hermite_nodes(n, order);
            let mut diff = vec![0.0; n];
            let mut logs = vec![0.0; density.len()];
            let mut x = vec![0.0; n];
            let mut total = 0.0;
            for c in input.components() {
                let l = c.cov.psd_factor();
                for (z, w) in &nodes {
                    for i in 0..n {
                        x[i] = c.mean[i] + (0..=i).map(|j| l[(i, j)] * z[j]).sum::<f64>();
                    }
                    density.component_logs(&x, &mut diff, &mut logs);
                    total += c.weight * w * crate::input::log_sum_exp(&logs);
                }
            }
            -total
        };
        let fine = rule(cfg.quad_order);
        return Ok(Estimate {
            value: fine,
            err: (fine - rule((cfg.quad_order / 2).max(2))).abs(),
        });
    }
    let zero = DMatrix::zeros(n, n);
    let mom = mc_statistic(
        input,
        std::slice::from_ref(&zero),
        cfg.samples,
        cfg.seed,
        1,
        || (vec![0.0; n], vec![0.0; density.len()]),
        |(diff, logs), _, x, _, out| {
            density.component_logs(x, diff, logs);
            out[0] = -crate::input::log_sum_exp(logs);
        },
    );
    Ok(Estimate {
        value: mom.mean()[0],
        err: mom.std_err()[0],
    })
}

/// Inputs of the vector EPI check against Gaussian noise.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpiSpec {
    pub input: MixtureInput,
    pub noise_cov: SymMatrix,
    pub snr_grid: GainScanGrid,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct EpiPoint {
    pub snr: f64,
    pub delta: f64,
    pub err: f64,
    pub nonpositive: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct EpiReport {
    pub entropy_x: Estimate,
    pub alpha: f64,
    pub points: Vec<EpiPoint>,
    /// `|Δ𝗜|` at the largest grid SNR.
    pub tail_gap: f64,
    pub entropy_sum: Estimate,
    /// `exp(2h(X+N)/n) − exp(2h(X)/n) − 2πe·|Σ_N|^{1/n}`.
    pub epi_slack: f64,
    pub epi_slack_err: f64,
    pub epi_holds: bool,
}

impl EpiReport {
    pub fn all_nonpositive(&self) -> bool {
        self.points.iter().all(|p| p.nonpositive)
    }
}

pub fn epi_check(spec: &EpiSpec, cfg: &EstimatorConfig) -> Result<EpiReport> {
    let n = spec.input.dim();
    if spec.noise_cov.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: spec.noise_cov.dim(),
        });
    }
    let nf = n as f64;
    let two_pi_e = std::f64::consts::TAU * std::f64::consts::E;
    let ld_noise = spec.noise_cov.log_det_pd()?;
    let hx = differential_entropy(&spec.input, cfg)?;
    let alpha = (hx.value / nf).exp() / (two_pi_e * (ld_noise / nf).exp()).sqrt();

    let v = spec.noise_cov.psd_factor();
    let v_inv = v
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Numerical("noise factor is singular".into()))?;
    let whitened: ConditionalInput = spec.input.transform(&v_inv)?.into();
    let points: Vec<EpiPoint> = spec
        .snr_grid
        .t_values
        .par_iter()
        .map(|&snr| {
            let h = DMatrix::identity(n, n) * snr.sqrt();
            let ix = mi_direct(&whitened, &h, cfg)?;
            let sa = snr * alpha * alpha;
            let ig = 0.5 * nf * sa.ln_1p();
            let err = ix.std_err + sa / (1.0 + sa) * hx.err;
            let delta = ig - ix.value;
            Ok(EpiPoint {
                snr,
                delta,
                err,
                nonpositive: delta <= 3.0 * err + 1e-9,
            })
        })
        .collect::<Result<_>>()?;
    let tail_gap = points.last().map_or(0.0, |p| p.delta.abs());

    let sum = spec.input.add_gaussian(&spec.noise_cov)?;
    let hs = differential_entropy(&sum, &cfg.with_seed(crate::rng::mix(cfg.seed, 0xE91)))?;
    let lhs = (2.0 * hs.value / nf).exp();
    let px = (2.0 * hx.value / nf).exp();
    let pn = two_pi_e * (ld_noise / nf).exp();
    let slack = lhs - px - pn;
    let slack_err = 2.0 / nf * (lhs * hs.err + px * hx.err);
    Ok(EpiReport {
        entropy_x: hx,
        alpha,
        points,
        tail_gap,
        entropy_sum: hs,
        epi_slack: slack,
        epi_slack_err: slack_err,
        epi_holds: slack >= -3.0 * slack_err - 1e-9 * (1.0 + lhs),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::path::{make_path, snr_path, DiagonalChannel};

    #[test]
    fn gaussian_mi_examples() {
        assert_eq!(mi_gaussian(&SymMatrix::zeros(2), &DMatrix::identity(2, 2)).unwrap(), 0.0);
        let v = mi_gaussian(&SymMatrix::from_diagonal(&[3.0]), &DMatrix::from_element(1, 1, 2f64.sqrt())).unwrap();
        assert!((v - 0.5 * 7f64.ln()).abs() < 1e-14);
        let v = mi_gaussian(&SymMatrix::identity(2), &DMatrix::identity(2, 2)).unwrap();
        assert!((v - 2f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn direct_mi_consistency() {
        let s = SymMatrix::from_rows(&[vec![1.0, 0.3, 0.0], vec![0.3, 0.7, 0.1], vec![0.0, 0.1, 0.4]]).unwrap();
        let h = crate::linalg::diag_matrix(&[1.0, 0.5, 2.0]);
        let g: ConditionalInput = MixtureInput::gaussian(s.clone()).into();
        let cf = mi_direct(&g, &h, &EstimatorConfig::default()).unwrap();
        let mc = mi_direct(&g, &h, &EstimatorConfig::monte_carlo(100_000, 1)).unwrap();
        assert!((cf.value - mc.value).abs() <= 3.0 * mc.std_err);
        let z = mi_direct(&MixtureInput::qpsk_parallel(3).into(), &DMatrix::zeros(3, 3), &EstimatorConfig::monte_carlo(20_000, 2)).unwrap();
        assert!(z.value.abs() <= 1e-12 + 3.0 * z.std_err);
    }

    #[test]
    fn immse_matches_closed_form_for_gaussian() {
        let s = SymMatrix::from_rows(&[vec![1.0, 0.4], vec![0.4, 0.8]]).unwrap();
        let g: ConditionalInput = MixtureInput::gaussian(s.clone()).into();
        let p = make_path(&[
            DiagonalChannel::new(vec![0.5, 1.0]).unwrap(),
            DiagonalChannel::new(vec![1.5, 1.0]).unwrap(),
        ])
        .unwrap();
        let icfg = IntegrationConfig {
            abs_tol: 1e-7,
            ..Default::default()
        };
        let v = mi_immse(&g, &p, 2.5, &EstimatorConfig::default(), &icfg).unwrap();
        let exact = mi_gaussian(&s, &p.gains(2.5).matrix()).unwrap();
        assert!((v.value - exact).abs() < 1e-3 * exact, "{} vs {}", v.value, exact);
        assert_eq!(mi_immse(&g, &p, 0.0, &EstimatorConfig::default(), &icfg).unwrap().value, 0.0);
    }

    #[test]
    fn immse_matches_direct_for_bpsk() {
        let b: ConditionalInput = MixtureInput::bpsk().into();
        let p = snr_path(1, 1.0).unwrap();
        let cfg = EstimatorConfig::default();
        let i1 = mi_immse(&b, &p, 1.0, &cfg, &IntegrationConfig::default()).unwrap();
        let i2 = mi_direct(&b, &p.gains(1.0).matrix(), &cfg).unwrap();
        assert!((i1.value - i2.value).abs() < 3.0 * (i1.std_err + i2.std_err) + 2e-4);
    }

    #[test]
    fn delta_i_trivial_cases() {
        let s = SymMatrix::from_diagonal(&[0.8, 1.2]);
        let g: ConditionalInput = MixtureInput::gaussian(s.clone()).into();
        let p = snr_path(2, 4.0).unwrap();
        let d = delta_i(&g, &s, &p, 2.0, &EstimatorConfig::default(), &IntegrationConfig::default()).unwrap();
        assert!(d.difference.value.abs() < 1e-12);
        assert!(d.integral.value.abs() < 1e-12);
        let d0 = delta_i(&g, &s, &p, 0.0, &EstimatorConfig::default(), &IntegrationConfig::default()).unwrap();
        assert_eq!(d0.integral.value, 0.0);
        assert!(d0.difference.value.abs() < 1e-15);
    }

    #[test]
    fn epi_matched_gaussian_is_tight() {
        let noise = SymMatrix::from_rows(&[vec![1.0, 0.3], vec![0.3, 0.5]]).unwrap();
        let c = 2.5;
        let spec = EpiSpec {
            input: MixtureInput::gaussian(noise.scale(c)),
            noise_cov: noise,
            snr_grid: GainScanGrid::new(vec![0.1, 1.0, 10.0]).unwrap(),
        };
        let r = epi_check(&spec, &EstimatorConfig::default()).unwrap();
        assert!((r.alpha - c.sqrt()).abs() < 1e-12);
        assert!(r.points.iter().all(|p| p.delta.abs() < 1e-12));
        assert!(r.epi_slack.abs() < 1e-9 && r.epi_holds);
    }

    #[test]
    fn epi_rejects_discrete_input() {
        let spec = EpiSpec {
            input: MixtureInput::bpsk(),
            noise_cov: SymMatrix::identity(1),
            snr_grid: GainScanGrid::new(vec![1.0]).unwrap(),
        };
        assert!(epi_check(&spec, &EstimatorConfig::default()).is_err());
    }

    #[test]
    fn entropy_quadrature_vs_monte_carlo() {
        let m = crate::input::RandomMixtureSpec {
            cov_floor: 0.3,
            ..crate::input::RandomMixtureSpec::new(2, 3)
        }
        .build(3);
        let q = differential_entropy(&m, &EstimatorConfig::quadrature(40)).unwrap();
        let mc = differential_entropy(&m, &EstimatorConfig::monte_carlo(100_000, 4)).unwrap();
        assert!((q.value - mc.value).abs() < 4.0 * mc.err);
    }
}
