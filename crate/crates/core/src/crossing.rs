//! Q matrices, the weighted gap `q_A`, and sign-pattern scans over a grid.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::input::{ConditionalInput, GaussianInput, MixtureInput};
use crate::linalg::SymMatrix;
use crate::mmse::{
    conditional_mmse, gaussian_mmse, mc_statistic, mmse_difference, quad_estimate, weighted_trace, EstimatorConfig,
    Method, PosteriorModel,
};
use crate::path::{ChannelPath, GainScanGrid};

/// Scalar estimate with a one-sigma error bar.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub err: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self { value, err: 0.0 }
    }
}

/// `E_G(Σ_G, t) − E_{x(|u)}(t)` with per-entry errors.
#[derive(Debug, Clone, Serialize)]
pub struct QMatrix {
    pub t: f64,
    pub value: SymMatrix,
    pub err: SymMatrix,
    /// `E_{x(|u)}(t)` used to form `value`.
    pub mmse: SymMatrix,
    pub gaussian_mmse: SymMatrix,
    pub gaussian_cov: SymMatrix,
    pub conditioned: bool,
}

impl QMatrix {
    pub fn err_norm(&self) -> f64 {
        self.err.frobenius()
    }
}

pub fn q_matrix(
    cond: &ConditionalInput,
    gaussian: &GaussianInput,
    path: &ChannelPath,
    t: f64,
    cfg: &EstimatorConfig,
) -> Result<QMatrix> {
    if cond.dim() != gaussian.dim() || cond.dim() != path.dim() {
        return Err(Error::DimensionMismatch {
            expected: cond.dim(),
            found: if gaussian.dim() != cond.dim() {
                gaussian.dim()
            } else {
                path.dim()
            },
        });
    }
    let h = path.gains(t).matrix();
    let eg = gaussian_mmse(&gaussian.cov, &h)?;
    let e = conditional_mmse(cond, &h, cfg)?;
    Ok(QMatrix {
        t,
        value: eg.sub(&e.matrix),
        err: e.std_err,
        mmse: e.matrix,
        gaussian_mmse: eg,
        gaussian_cov: gaussian.cov.clone(),
        conditioned: !cond.is_trivial(),
    })
}

/// `Q(t)` at every grid point, evaluated in parallel and returned in grid order.
pub fn q_series(
    cond: &ConditionalInput,
    gaussian: &GaussianInput,
    path: &ChannelPath,
    grid: &GainScanGrid,
    cfg: &EstimatorConfig,
) -> Result<Vec<QMatrix>> {
    grid.t_values
        .par_iter()
        .map(|&t| q_matrix(cond, gaussian, path, t, cfg))
        .collect()
}

fn check_weight(a: &SymMatrix) -> Result<(bool, SymMatrix)> {
    let eig = a.eigenvalues();
    let (lo, hi) = (eig[0], *eig.last().expect("dim >= 1"));
    let tol = a.default_psd_tol().max(1e-12 * hi.abs().max(lo.abs()));
    if lo >= -tol {
        Ok((false, a.clone()))
    } else if hi <= tol {
        Ok((true, a.scale(-1.0)))
    } else {
        Err(Error::IndefiniteWeight {
            min_eig: lo,
            max_eig: hi,
        })
    }
}

/// `q_A = σ²/(1+σ²γ)·Tr A − Tr(A·E_x(γ))` on the path `H = √γ·I`.
/// Negative semidefinite `A` is evaluated as `−q_{−A}`.
pub fn q_weighted(
    cond: &ConditionalInput,
    sigma2: f64,
    gamma: f64,
    a: &SymMatrix,
    cfg: &EstimatorConfig,
) -> Result<Estimate> {
    if !(sigma2 > 0.0) || !(gamma >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "need sigma2 > 0 and gamma >= 0 (got {sigma2}, {gamma})"
        )));
    }
    if a.dim() != cond.dim() {
        return Err(Error::DimensionMismatch {
            expected: cond.dim(),
            found: a.dim(),
        });
    }
    let (negated, a_psd) = check_weight(a)?;
    let n = cond.dim();
    let h = DMatrix::identity(n, n) * gamma.sqrt();
    let (tr, err) = weighted_trace(cond, &h, &a_psd, cfg)?;
    let v = sigma2 / (1.0 + sigma2 * gamma) * a_psd.trace() - tr;
    Ok(Estimate {
        value: if negated { -v } else { v },
        err,
    })
}

/// Factorization `A = α·Ā·Āᵀ` with `Tr(Ā·Āᵀ) = n` and the law of `x̂ = Āᵀx`.
#[derive(Debug, Clone)]
pub struct WeightReduction {
    pub alpha: f64,
    pub a_bar: DMatrix<f64>,
    pub transformed: MixtureInput,
}

pub fn reduce_weighted(a: &SymMatrix, input: &MixtureInput) -> Result<WeightReduction> {
    let (negated, a_psd) = check_weight(a)?;
    if negated {
        return Err(Error::InvalidInput("reduction needs a positive semidefinite weight".into()));
    }
    let n = a.dim();
    let tr = a_psd.trace();
    if tr <= 0.0 {
        return Err(Error::InvalidInput("weight matrix is zero; q is identically zero".into()));
    }
    let alpha = tr / n as f64;
    let a_bar = a_psd.scale(1.0 / alpha).sqrt_psd().into_matrix();
    let transformed = input.transform(&a_bar.transpose())?;
    Ok(WeightReduction {
        alpha,
        a_bar,
        transformed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesKind {
    WeightedTrace,
    Diagonal(usize),
    Eigenvalue(usize),
    BqEigenvalue(usize),
    D(usize),
    DSum,
    DeltaI,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    NegToNonneg,
    NonnegToNeg,
    NegativeZeroPositive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Consistent,
    Violation,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Crossing {
    pub bracket: [f64; 2],
    pub direction: Direction,
}

/// Pass/fail of the four single-crossing shape properties; `None` when a
/// property does not apply to the series.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ItemChecks {
    pub nonpositive_at_zero: Option<bool>,
    pub increasing_before: Option<bool>,
    pub nonnegative_after: Option<bool>,
    pub vanishes_at_end: Option<bool>,
}

impl ItemChecks {
    pub fn all_pass(&self) -> bool {
        [
            self.nonpositive_at_zero,
            self.increasing_before,
            self.nonnegative_after,
            self.vanishes_at_end,
        ]
        .iter()
        .all(|c| c.unwrap_or(true))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CrossingReport {
    pub kind: SeriesKind,
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub errs: Vec<f64>,
    pub crossings: Vec<Crossing>,
    pub verdict: Verdict,
    pub items: ItemChecks,
    pub notes: Vec<String>,
}

/// Sign classification at one grid point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Neg,
    Zero,
    Pos,
}

impl Sign {
    pub fn as_i8(self) -> i8 {
        match self {
            Sign::Neg => -1,
            Sign::Zero => 0,
            Sign::Pos => 1,
        }
    }
}

pub fn zero_band(err: f64) -> f64 {
    (4.0 * err).max(1e-9)
}

pub fn classify(value: f64, err: f64) -> Sign {
    let b = zero_band(err);
    if value > b {
        Sign::Pos
    } else if value < -b {
        Sign::Neg
    } else {
        Sign::Zero
    }
}

/// Optional shape checks applied while classifying.
#[derive(Debug, Clone, Copy, Default)]
pub struct ShapeChecks {
    /// Check that the series is increasing up to its crossing.
    pub increasing: bool,
    /// Tolerance for `|value| → 0` at the last grid point.
    pub tail_tol: Option<f64>,
}

impl CrossingReport {
    pub fn new(kind: SeriesKind, grid: &[f64], values: Vec<f64>, errs: Vec<f64>, shape: ShapeChecks) -> Self {
        let mut report = Self {
            kind,
            grid: grid.to_vec(),
            values,
            errs,
            crossings: Vec::new(),
            verdict: Verdict::Consistent,
            items: ItemChecks::default(),
            notes: Vec::new(),
        };
        report.analyse(shape);
        report
    }

    /// Report for a series that must be nonnegative from grid index `settle`
    /// on. Crossings are recorded but their count is not constrained; with
    /// `settle = None` only the value at `t = 0` is checked.
    pub fn eventually_nonneg(
        kind: SeriesKind,
        grid: &[f64],
        values: Vec<f64>,
        errs: Vec<f64>,
        settle: Option<usize>,
    ) -> Self {
        let mut report = Self::new(kind, grid, values, errs, ShapeChecks::default());
        report.notes.clear();
        report.items = ItemChecks::default();
        let signs = report.signs();
        report.items.nonpositive_at_zero = Some(signs[0] != Sign::Pos);
        report.verdict = Verdict::Consistent;
        match settle {
            Some(k) => {
                let bad: Vec<f64> = (k..signs.len()).filter(|&i| signs[i] == Sign::Neg).map(|i| grid[i]).collect();
                report.items.nonnegative_after = Some(bad.is_empty());
                if !bad.is_empty() {
                    report.verdict = Verdict::Violation;
                    report.notes.push(format!(
                        "negative after every term has settled (from t = {}) at t = {bad:?}",
                        grid[k.min(grid.len() - 1)]
                    ));
                }
            }
            None => report
                .notes
                .push("a term is still negative at the end of the grid; eventual sign not testable".into()),
        }
        report
    }

    pub fn signs(&self) -> Vec<Sign> {
        self.values
            .iter()
            .zip(&self.errs)
            .map(|(&v, &e)| classify(v, e))
            .collect()
    }

    fn analyse(&mut self, shape: ShapeChecks) {
        let signs = self.signs();
        let confirmed: Vec<(usize, Sign)> = signs
            .iter()
            .copied()
            .enumerate()
            .filter(|(_, s)| *s != Sign::Zero)
            .collect();
        if confirmed.is_empty() {
            self.notes.push(
                "series lies in the zero band at every grid point; classified as consistent with a crossing at the first grid point"
                    .into(),
            );
            self.items.vanishes_at_end = shape.tail_tol.map(|tol| {
                self.values.last().is_none_or(|v| v.abs() <= tol + zero_band(*self.errs.last().unwrap_or(&0.0)))
            });
            return;
        }

        // runs of equal confirmed sign: (sign, first idx, last idx, length)
        let mut runs: Vec<(Sign, usize, usize, usize)> = Vec::new();
        for &(i, s) in &confirmed {
            match runs.last_mut() {
                Some(r) if r.0 == s => {
                    r.2 = i;
                    r.3 += 1;
                }
                _ => runs.push((s, i, i, 1)),
            }
        }
        // isolated single-point runs flanked by the opposite sign
        let mut isolated = false;
        let mut cleaned: Vec<(Sign, usize, usize, usize)> = Vec::new();
        for (k, r) in runs.iter().enumerate() {
            let flanked = k > 0 && k + 1 < runs.len() && r.3 == 1;
            let tail_flip = k > 0 && k + 1 == runs.len() && r.3 == 1 && r.0 == Sign::Neg;
            if flanked || tail_flip {
                isolated = true;
                self.notes.push(format!(
                    "isolated single-point sign flip at t = {}",
                    self.grid[r.1]
                ));
                continue;
            }
            match cleaned.last_mut() {
                Some(c) if c.0 == r.0 => {
                    c.2 = r.2;
                    c.3 += r.3;
                }
                _ => cleaned.push(*r),
            }
        }

        for w in cleaned.windows(2) {
            let zeros_between = signs[w[0].2 + 1..w[1].1].contains(&Sign::Zero);
            let direction = if w[0].0 == Sign::Pos {
                Direction::NonnegToNeg
            } else if zeros_between {
                Direction::NegativeZeroPositive
            } else {
                Direction::NegToNonneg
            };
            self.crossings.push(Crossing {
                bracket: [self.grid[w[0].2], self.grid[w[1].1]],
                direction,
            });
        }
        if cleaned[0].0 == Sign::Pos && cleaned[0].1 > 0 {
            self.crossings.insert(
                0,
                Crossing {
                    bracket: [self.grid[0], self.grid[cleaned[0].1]],
                    direction: Direction::NegToNonneg,
                },
            );
        }
        let up = cleaned.windows(2).filter(|w| w[0].0 == Sign::Neg).count();
        let down = cleaned.windows(2).filter(|w| w[0].0 == Sign::Pos).count();
        let violation = down > 0 || up > 1;
        if violation {
            self.notes.push(format!(
                "{down} nonnegative-to-negative and {up} negative-to-nonnegative transitions at 4-sigma confidence"
            ));
        }
        self.verdict = if violation {
            Verdict::Violation
        } else if isolated {
            Verdict::Inconclusive
        } else {
            Verdict::Consistent
        };

        let first_pos = cleaned.iter().find(|r| r.0 == Sign::Pos).map(|r| r.1);
        if let Some(end) = first_pos {
            if cleaned[0].0 == Sign::Neg || end > 0 {
                self.items.nonpositive_at_zero = Some(signs[0] != Sign::Pos);
                if shape.increasing {
                    let ok = (0..end).all(|i| {
                        let tol = 4.0 * (self.errs[i].powi(2) + self.errs[i + 1].powi(2)).sqrt() + 1e-9;
                        self.values[i + 1] - self.values[i] >= -tol
                    });
                    self.items.increasing_before = Some(ok);
                }
                let negatives_after = signs[end..].iter().filter(|s| **s == Sign::Neg).count();
                self.items.nonnegative_after = Some(negatives_after == 0 || (isolated && !violation && negatives_after == 1));
            }
        }
        if let Some(tol) = shape.tail_tol {
            let last = self.values.len() - 1;
            self.items.vanishes_at_end = Some(self.values[last].abs() <= tol + zero_band(self.errs[last]));
        }
    }

    /// CSV rows `t,value,err,sign`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,value,err,sign\n");
        for ((t, v), (e, sg)) in self
            .grid
            .iter()
            .zip(&self.values)
            .zip(self.errs.iter().zip(self.signs()))
        {
            s.push_str(&format!("{t},{v},{e},{}\n", sg.as_i8()));
        }
        s
    }

    pub fn passes(&self) -> bool {
        self.verdict != Verdict::Violation && self.items.all_pass()
    }
}

/// `q_A` over an SNR grid with the crossing discipline applied.
pub fn scan_weighted(
    cond: &ConditionalInput,
    sigma2: f64,
    a: &SymMatrix,
    grid: &GainScanGrid,
    cfg: &EstimatorConfig,
) -> Result<CrossingReport> {
    let est: Vec<Estimate> = grid
        .t_values
        .par_iter()
        .map(|&g| q_weighted(cond, sigma2, g, a, cfg))
        .collect::<Result<_>>()?;
    let (negated, a_psd) = check_weight(a)?;
    let scale = sigma2 * a_psd.trace() + a_psd.matrix().component_mul(cond.overall_covariance().matrix()).sum();
    let max_err = est.last().map_or(0.0, |e| e.err);
    let mut report = CrossingReport::new(
        SeriesKind::WeightedTrace,
        &grid.t_values,
        est.iter().map(|e| if negated { -e.value } else { e.value }).collect(),
        est.iter().map(|e| e.err).collect(),
        ShapeChecks {
            increasing: true,
            tail_tol: Some(0.01 * scale + 4.0 * max_err),
        },
    );
    if negated {
        report.values.iter_mut().for_each(|v| *v = -*v);
        report.notes.push("negative semidefinite weight: series is the mirror of the q_{-A} scan".into());
    }
    Ok(report)
}

/// Per-diagonal reports of `[Q]_ii` from a precomputed series.
pub fn diagonal_reports(series: &[QMatrix], tail_zero: bool) -> Vec<CrossingReport> {
    let n = series[0].value.dim();
    let grid: Vec<f64> = series.iter().map(|q| q.t).collect();
    (0..n)
        .map(|i| {
            let last = series.last().expect("nonempty");
            let scale = last.gaussian_cov.get(i, i) + series[0].mmse.get(i, i);
            CrossingReport::new(
                SeriesKind::Diagonal(i),
                &grid,
                series.iter().map(|q| q.value.get(i, i)).collect(),
                series.iter().map(|q| q.err.get(i, i)).collect(),
                ShapeChecks {
                    increasing: true,
                    tail_tol: tail_zero.then_some(0.01 * scale),
                },
            )
        })
        .collect()
}

pub fn scan_diagonals(
    cond: &ConditionalInput,
    lambda: &GaussianInput,
    path: &ChannelPath,
    grid: &GainScanGrid,
    cfg: &EstimatorConfig,
) -> Result<Vec<CrossingReport>> {
    if !lambda.is_diagonal() {
        return Err(Error::InvalidInput("diagonal scan needs a diagonal Gaussian covariance".into()));
    }
    Ok(diagonal_reports(&q_series(cond, lambda, path, grid, cfg)?, false))
}

/// Reports for `d_i = [B]_ii·[Q]_ii` and `d = Σ d_i`.
pub fn d_reports(series: &[QMatrix], path: &ChannelPath) -> (Vec<CrossingReport>, CrossingReport) {
    let n = series[0].value.dim();
    let grid: Vec<f64> = series.iter().map(|q| q.t).collect();
    let bs: Vec<Vec<f64>> = grid.iter().map(|&t| path.b_diag(t)).collect();
    let per: Vec<CrossingReport> = (0..n)
        .map(|i| {
            CrossingReport::new(
                SeriesKind::D(i),
                &grid,
                series.iter().zip(&bs).map(|(q, b)| b[i] * q.value.get(i, i)).collect(),
                series.iter().zip(&bs).map(|(q, b)| b[i] * q.err.get(i, i)).collect(),
                ShapeChecks::default(),
            )
        })
        .collect();
    let settle = per.iter().try_fold(0usize, |acc, r| {
        let signs = r.signs();
        match signs.iter().rposition(|s| *s == Sign::Neg) {
            Some(k) if k + 1 == signs.len() => None,
            Some(k) => Some(acc.max(k + 1)),
            None => Some(acc),
        }
    });
    let sum = CrossingReport::eventually_nonneg(
        SeriesKind::DSum,
        &grid,
        (0..grid.len()).map(|k| per.iter().map(|r| r.values[k]).sum()).collect(),
        (0..grid.len()).map(|k| per.iter().map(|r| r.errs[k]).sum()).collect(),
        settle,
    );
    (per, sum)
}

pub fn d_functions(
    cond: &ConditionalInput,
    lambda: &GaussianInput,
    path: &ChannelPath,
    grid: &GainScanGrid,
    cfg: &EstimatorConfig,
) -> Result<(Vec<CrossingReport>, CrossingReport)> {
    if !lambda.is_diagonal() {
        return Err(Error::InvalidInput("d functions need a diagonal Gaussian covariance".into()));
    }
    Ok(d_reports(&q_series(cond, lambda, path, grid, cfg)?, path))
}

/// Sorted spectra of `Q` and of `B^½·Q·B^½` at each grid point, with
/// Weyl error bars.
#[derive(Debug, Clone, Serialize)]
pub struct SpectrumScan {
    pub grid: Vec<f64>,
    pub q_eigs: Vec<Vec<f64>>,
    pub q_errs: Vec<f64>,
    pub bq_eigs: Vec<Vec<f64>>,
    pub bq_errs: Vec<f64>,
    pub refinements: usize,
}

fn spectra_of(q: &QMatrix, path: &ChannelPath) -> (Vec<f64>, f64, Vec<f64>, f64) {
    let b = path.b_diag(q.t);
    let root: Vec<f64> = b.iter().map(|v| v.max(0.0).sqrt()).collect();
    let bq = q.value.diag_congruence(&root);
    let bmax = b.iter().copied().fold(0.0, f64::max);
    let err = q.err_norm();
    (q.value.eigenvalues(), err, bq.eigenvalues(), bmax * err)
}

/// Evaluates `Q` on the grid and inserts midpoints wherever consecutive
/// spectra move by more than 10% of the spectral range (at most
/// `max_refine` insertions in total).
pub fn spectrum_scan(
    cond: &ConditionalInput,
    gaussian: &GaussianInput,
    path: &ChannelPath,
    grid: &GainScanGrid,
    cfg: &EstimatorConfig,
    max_refine: usize,
) -> Result<(Vec<QMatrix>, SpectrumScan)> {
    let mut series = q_series(cond, gaussian, path, grid, cfg)?;
    let mut refinements = 0;
    loop {
        let eigs: Vec<Vec<f64>> = series.iter().map(|q| q.value.eigenvalues()).collect();
        let lo = eigs.iter().flatten().copied().fold(f64::INFINITY, f64::min);
        let hi = eigs.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
        let range = (hi - lo).max(1e-12);
        let jumps: Vec<f64> = (0..series.len() - 1)
            .filter(|&k| {
                eigs[k]
                    .iter()
                    .zip(&eigs[k + 1])
                    .any(|(a, b)| (a - b).abs() > 0.1 * range)
            })
            .map(|k| 0.5 * (series[k].t + series[k + 1].t))
            .collect();
        let budget = max_refine - refinements;
        if jumps.is_empty() || budget == 0 {
            break;
        }
        let new_ts: Vec<f64> = jumps.into_iter().take(budget).collect();
        refinements += new_ts.len();
        let extra: Vec<QMatrix> = new_ts
            .par_iter()
            .map(|&t| q_matrix(cond, gaussian, path, t, cfg))
            .collect::<Result<_>>()?;
        series.extend(extra);
        series.sort_by(|a, b| a.t.total_cmp(&b.t));
    }
    let mut scan = SpectrumScan {
        grid: series.iter().map(|q| q.t).collect(),
        q_eigs: Vec::new(),
        q_errs: Vec::new(),
        bq_eigs: Vec::new(),
        bq_errs: Vec::new(),
        refinements,
    };
    for q in &series {
        let (qe, qerr, bqe, bqerr) = spectra_of(q, path);
        scan.q_eigs.push(qe);
        scan.q_errs.push(qerr);
        scan.bq_eigs.push(bqe);
        scan.bq_errs.push(bqerr);
    }
    Ok((series, scan))
}

/// Per-branch reports; branch `i` is the `i`-th smallest eigenvalue.
pub fn eigen_reports(scan: &SpectrumScan, bq: bool) -> Vec<CrossingReport> {
    let (eigs, errs) = if bq {
        (&scan.bq_eigs, &scan.bq_errs)
    } else {
        (&scan.q_eigs, &scan.q_errs)
    };
    let n = eigs[0].len();
    (0..n)
        .map(|i| {
            CrossingReport::new(
                if bq {
                    SeriesKind::BqEigenvalue(i)
                } else {
                    SeriesKind::Eigenvalue(i)
                },
                &scan.grid,
                eigs.iter().map(|e| e[i]).collect(),
                errs.clone(),
                ShapeChecks::default(),
            )
        })
        .collect()
}

pub fn scan_eigenvalues(
    cond: &ConditionalInput,
    gaussian: &GaussianInput,
    path: &ChannelPath,
    grid: &GainScanGrid,
    cfg: &EstimatorConfig,
) -> Result<Vec<CrossingReport>> {
    let (_, scan) = spectrum_scan(cond, gaussian, path, grid, cfg, grid.len())?;
    Ok(eigen_reports(&scan, false))
}

/// Grid points and branches where a confirmed eigenvalue sign of `B·Q`
/// opposes the paired eigenvalue sign of `Q`.
pub fn bq_sign_mismatches(scan: &SpectrumScan) -> Vec<(f64, usize)> {
    let mut bad = Vec::new();
    for (k, t) in scan.grid.iter().enumerate() {
        for (i, (&bq, &q)) in scan.bq_eigs[k].iter().zip(&scan.q_eigs[k]).enumerate() {
            let sb = classify(bq, scan.bq_errs[k]);
            let sq = classify(q, scan.q_errs[k]);
            if sb != Sign::Zero && sq != Sign::Zero && sb != sq {
                bad.push((*t, i));
            }
        }
    }
    bad
}

pub fn scan_bq_eigenvalues(
    cond: &ConditionalInput,
    gaussian: &GaussianInput,
    path: &ChannelPath,
    grid: &GainScanGrid,
    cfg: &EstimatorConfig,
) -> Result<(Vec<CrossingReport>, Vec<(f64, usize)>)> {
    let (_, scan) = spectrum_scan(cond, gaussian, path, grid, cfg, grid.len())?;
    Ok((eigen_reports(&scan, true), bq_sign_mismatches(&scan)))
}

#[derive(Debug, Clone, Serialize)]
pub struct DerivativeBound {
    pub t: f64,
    pub lhs: SymMatrix,
    pub rhs: SymMatrix,
    /// `λ_min(lhs − rhs)`.
    pub min_gap: f64,
    pub tolerance: f64,
    pub holds: bool,
}

fn central_difference(
    cond: &ConditionalInput,
    gaussian: &GaussianInput,
    path: &ChannelPath,
    t: f64,
    delta: f64,
    cfg: &EstimatorConfig,
) -> Result<(SymMatrix, f64)> {
    let hp = path.gains(t + delta).matrix();
    let hm = path.gains(t - delta).matrix();
    let (de, err) = mmse_difference(cond, &hp, &hm, cfg)?;
    let dg = gaussian_mmse(&gaussian.cov, &hp)?.sub(&gaussian_mmse(&gaussian.cov, &hm)?);
    let s = 1.0 / (2.0 * delta);
    Ok((dg.sub(&de).scale(s), err.frobenius() * s))
}

/// Central-difference `D_t Q` against `2(E·B·E − E_G·B·E_G)`.
pub fn check_derivative_bound(
    cond: &ConditionalInput,
    gaussian: &GaussianInput,
    path: &ChannelPath,
    t: f64,
    cfg: &EstimatorConfig,
) -> Result<DerivativeBound> {
    let delta = 1e-3;
    if t <= 2.0 * delta {
        return Err(Error::InvalidInput(format!("t = {t} is too close to 0 for a central difference")));
    }
    let (lhs, lhs_err) = central_difference(cond, gaussian, path, t, delta, cfg)?;
    let (lhs2, lhs2_err) = central_difference(cond, gaussian, path, t, 2.0 * delta, cfg)?;
    let discretization = lhs.sub(&lhs2).frobenius();

    let h = path.gains(t).matrix();
    let e = conditional_mmse(cond, &h, cfg)?;
    let eg = gaussian_mmse(&gaussian.cov, &h)?;
    let b = path.b_diag(t);
    let bm = crate::linalg::diag_matrix(&b);
    let quad = |m: &SymMatrix| SymMatrix::symmetrized(m.matrix() * &bm * m.matrix());
    let rhs = quad(&e.matrix).sub(&quad(&eg)).scale(2.0);
    let bmax = b.iter().copied().fold(0.0, f64::max);
    let rhs_err = 4.0 * bmax * e.matrix.frobenius() * e.err_norm();
    let min_gap = lhs.sub(&rhs).min_eigenvalue();
    let tolerance = discretization + 4.0 * (lhs_err + lhs2_err + rhs_err) + 1e-7 * (1.0 + rhs.frobenius());
    Ok(DerivativeBound {
        t,
        holds: min_gap >= -tolerance,
        lhs,
        rhs,
        min_gap,
        tolerance,
    })
}

/// `J(Y) = E[∇log f_Y · ∇log f_Yᵀ]` from the exact output density, with
/// per-entry standard errors. Samples use a stream independent of the MMSE
/// estimates.
pub fn score_fisher(input: &MixtureInput, h: &DMatrix<f64>, cfg: &EstimatorConfig) -> Result<(SymMatrix, SymMatrix)> {
    let m = h.nrows();
    let out_law = input.transform(h)?.add_gaussian(&SymMatrix::identity(m))?;
    if input.is_single_gaussian() && cfg.method != Method::MonteCarlo {
        let j = out_law.components()[0].cov.inverse_pd()?;
        return Ok((j, SymMatrix::zeros(m)));
    }
    let density = out_law.density()?;
    let k = density.len();
    let outer = |y: &[f64], scratch: &mut (Vec<f64>, Vec<f64>, Vec<f64>), out: &mut [f64]| {
        let (diff, logs, s) = scratch;
        density.score(y, diff, logs, s);
        for i in 0..m {
            for j in 0..m {
                out[i + j * m] = s[i] * s[j];
            }
        }
    };
    let scratch = || (vec![0.0; m], vec![0.0; k], vec![0.0; m]);
    let flat = |v: &[f64]| SymMatrix::symmetrized(DMatrix::from_column_slice(m, m, v));
    if cfg.resolve(input, m)? == Method::Quadrature {
        let model = PosteriorModel::new(input, h)?;
        let sc = std::cell::RefCell::new(scratch());
        let (v, e) = quad_estimate(&model, cfg.quad_order, m * m, |y, _, out| outer(y, &mut sc.borrow_mut(), out))?;
        return Ok((flat(&v), flat(&e)));
    }
    let mom = mc_statistic(
        input,
        std::slice::from_ref(h),
        cfg.samples,
        crate::rng::mix(cfg.seed, 0x5C0E),
        m * m,
        scratch,
        |sc, ys, _, _, out| outer(&ys[0], sc, out),
    );
    Ok((flat(&mom.mean()), flat(&mom.std_err())))
}

#[derive(Debug, Clone, Serialize)]
pub struct FisherReport {
    pub t: f64,
    /// `J = I − H·E·Hᵀ`.
    pub j: SymMatrix,
    pub j_err: SymMatrix,
    /// `J_G = I − H·E_G·Hᵀ`.
    pub j_gaussian: SymMatrix,
    /// `W = J − J_G`, equal to `H·Q·Hᵀ`.
    pub w: SymMatrix,
    /// `max |W − H·Q·Hᵀ|`.
    pub w_residual: f64,
    /// Score-sampling estimate of `J`.
    pub j_score: SymMatrix,
    pub j_score_err: SymMatrix,
    /// Largest `|J − J_score|` in units of the combined error (entries
    /// with zero error are compared against a `1e-8` floor).
    pub j_score_z: f64,
    /// `max |(J_score − J_G) − H·Q·Hᵀ|`.
    pub w_score_residual: f64,
}

impl FisherReport {
    /// Both identities hold with `z` combined errors on every entry.
    pub fn agrees(&self, z: f64) -> bool {
        self.j_score_z <= z && self.w_residual <= 1e-12 * (1.0 + self.j.frobenius())
    }
}

pub fn fisher(
    input: &MixtureInput,
    gaussian: &GaussianInput,
    path: &ChannelPath,
    t: f64,
    cfg: &EstimatorConfig,
) -> Result<FisherReport> {
    let g = path.gains(t);
    let n = g.dim();
    let q = q_matrix(&input.clone().into(), gaussian, path, t, cfg)?;
    let eye = SymMatrix::identity(n);
    let j = eye.sub(&q.mmse.diag_congruence(&g.gains));
    let j_gaussian = eye.sub(&q.gaussian_mmse.diag_congruence(&g.gains));
    let w = j.sub(&j_gaussian);
    let hqh = q.value.diag_congruence(&g.gains);
    let j_err = q.err.diag_congruence(&g.gains.iter().map(|v| v.abs()).collect::<Vec<_>>());
    let (j_score, j_score_err) = score_fisher(input, &g.matrix(), cfg)?;
    let floor = 1e-8 * (1.0 + j.frobenius());
    let mut z: f64 = 0.0;
    for a in 0..n {
        for b in 0..n {
            let d = (j.get(a, b) - j_score.get(a, b)).abs();
            let e = j_err.get(a, b).hypot(j_score_err.get(a, b));
            z = z.max(if e > 0.0 { (d - floor).max(0.0) / e } else if d <= floor { 0.0 } else { f64::INFINITY });
        }
    }
    Ok(FisherReport {
        t,
        w_residual: w.max_abs_diff(&hqh),
        w_score_residual: j_score.sub(&j_gaussian).max_abs_diff(&hqh),
        j_err,
        j,
        j_gaussian,
        w,
        j_score,
        j_score_err,
        j_score_z: z,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::path::snr_path;

    fn series(values: &[f64]) -> CrossingReport {
        let grid: Vec<f64> = (0..values.len()).map(|k| k as f64).collect();
        CrossingReport::new(
            SeriesKind::WeightedTrace,
            &grid,
            values.to_vec(),
            vec![0.01; values.len()],
            ShapeChecks {
                increasing: true,
                tail_tol: None,
            },
        )
    }

    #[test]
    fn classification_rules() {
        let r = series(&[-1.0, -0.5, 0.2, 0.5, 0.3]);
        assert_eq!(r.verdict, Verdict::Consistent);
        assert_eq!(r.crossings.len(), 1);
        assert_eq!(r.crossings[0].bracket, [1.0, 2.0]);
        assert_eq!(series(&[-1.0, 0.5, 0.5, -1.0, -1.0]).verdict, Verdict::Violation);
        assert_eq!(series(&[-1.0, 0.5, -1.0, -1.0]).verdict, Verdict::Inconclusive);
        assert_eq!(series(&[1.0, 1.0, -0.5, -0.5]).verdict, Verdict::Violation);
        assert_eq!(series(&[-1.0, -1.0, 1.0, -0.5, 1.0, 1.0]).verdict, Verdict::Inconclusive);
        let z = series(&[0.0, 0.0, 0.0]);
        assert_eq!(z.verdict, Verdict::Consistent);
        assert!(!z.notes.is_empty());
        let nzp = series(&[-1.0, 0.0, 0.0, 1.0]);
        assert_eq!(nzp.crossings[0].direction, Direction::NegativeZeroPositive);
        let zp = series(&[0.0, 0.5, 0.7]);
        assert_eq!(zp.crossings[0].bracket, [0.0, 1.0]);
        assert_eq!(zp.items.nonpositive_at_zero, Some(true));
        assert_eq!(series(&[-1.0, -1.2, 0.5]).items.increasing_before, Some(false));
    }

    #[test]
    fn q_weighted_cases() {
        let cfg = EstimatorConfig::default();
        let g: ConditionalInput = MixtureInput::gaussian(SymMatrix::scaled_identity(2, 1.5)).into();
        let a = SymMatrix::from_rows(&[vec![2.0, 0.5], vec![0.5, 1.0]]).unwrap();
        for gamma in [0.0, 0.3, 4.0] {
            assert!(q_weighted(&g, 1.5, gamma, &a, &cfg).unwrap().value.abs() < 1e-12);
        }
        let m: ConditionalInput = MixtureInput::seeded_random_mixture(2, 3, 2).into();
        let q0 = q_weighted(&m, 0.7, 0.0, &SymMatrix::identity(2), &cfg).unwrap();
        assert!((q0.value - (1.4 - m.overall_covariance().trace())).abs() < 1e-9);
        let bad = SymMatrix::from_diagonal(&[1.0, -1.0]);
        assert!(matches!(q_weighted(&m, 1.0, 1.0, &bad, &cfg), Err(Error::IndefiniteWeight { .. })));
        let qa = q_weighted(&m, 1.0, 0.8, &a, &cfg).unwrap();
        let qna = q_weighted(&m, 1.0, 0.8, &a.scale(-1.0), &cfg).unwrap();
        assert_eq!(qa.value, -qna.value);
    }

    #[test]
    fn reduce_weighted_examples() {
        let m = MixtureInput::qpsk_parallel(2);
        let r = reduce_weighted(&SymMatrix::identity(2), &m).unwrap();
        assert!((r.alpha - 1.0).abs() < 1e-15);
        assert!((r.a_bar.clone() - DMatrix::<f64>::identity(2, 2)).norm() < 1e-12);
        let r = reduce_weighted(&SymMatrix::scaled_identity(2, 4.0), &m).unwrap();
        assert!((r.alpha - 4.0).abs() < 1e-15);
        assert!(reduce_weighted(&SymMatrix::zeros(2), &m).is_err());
    }

    #[test]
    fn q_matrix_cases() {
        let cfg = EstimatorConfig::default();
        let s = SymMatrix::from_rows(&[vec![1.0, 0.2], vec![0.2, 0.6]]).unwrap();
        let g = GaussianInput::new(s.clone()).unwrap();
        let p = snr_path(2, 10.0).unwrap();
        let q = q_matrix(&MixtureInput::gaussian(s).into(), &g, &p, 2.0, &cfg).unwrap();
        assert!(q.value.frobenius() < 1e-12);
        let m = MixtureInput::qpsk_parallel(2);
        let lam = GaussianInput::iid(2, 1.0).unwrap();
        let q0 = q_matrix(&m.clone().into(), &lam, &p, 0.0, &cfg).unwrap();
        assert!(q0.value.max_abs_diff(&SymMatrix::identity(2).sub(&m.overall_covariance())) < 1e-12);
        let q1 = q_matrix(&m.into(), &lam, &p, 1.0, &cfg).unwrap();
        assert!(q1.value.is_psd(1e-9));
    }

    #[test]
    fn matched_gaussian_has_flat_zero_scans() {
        let cfg = EstimatorConfig::default();
        let lam = GaussianInput::diagonal(&[1.0, 0.5]).unwrap();
        let p = snr_path(2, 10.0).unwrap();
        let grid = GainScanGrid::linear(0.0, 5.0, 6).unwrap();
        let input: ConditionalInput = lam.to_mixture().into();
        for r in scan_diagonals(&input, &lam, &p, &grid, &cfg).unwrap() {
            assert!(r.crossings.is_empty());
            assert!(r.values.iter().all(|v| v.abs() < 1e-12));
        }
        let (_, d) = d_functions(&input, &lam, &p, &grid, &cfg).unwrap();
        assert!(d.values.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn small_lambda_stays_negative() {
        let cfg = EstimatorConfig::default();
        let lam = GaussianInput::diagonal(&[0.01]).unwrap();
        let input: ConditionalInput = MixtureInput::gaussian(SymMatrix::from_diagonal(&[5.0])).into();
        let p = snr_path(1, 10.0).unwrap();
        let r = &scan_diagonals(&input, &lam, &p, &GainScanGrid::linear(0.0, 10.0, 11).unwrap(), &cfg).unwrap()[0];
        assert!(r.values.iter().all(|v| *v < 0.0));
        assert!(r.crossings.is_empty());
    }

    #[test]
    fn bq_with_singular_and_scalar_b() {
        let q = SymMatrix::from_rows(&[vec![-1.0, 0.3], vec![0.3, 2.0]]).unwrap();
        let pinned = q.diag_congruence(&[0.0, 1.0]).eigenvalues();
        assert!(pinned.iter().any(|v| v.abs() < 1e-15));
        let c = 0.7_f64;
        let scaled = q.diag_congruence(&[c.sqrt(), c.sqrt()]).eigenvalues();
        let base = q.eigenvalues();
        for (a, b) in scaled.iter().zip(&base) {
            assert!((a - c * b).abs() < 1e-12);
        }
    }

    #[test]
    fn derivative_bound_equality_for_gaussians() {
        let cfg = EstimatorConfig::default();
        let s = SymMatrix::from_rows(&[vec![1.0, 0.2], vec![0.2, 0.6]]).unwrap();
        let g = GaussianInput::new(SymMatrix::from_diagonal(&[0.8, 1.1])).unwrap();
        let p = crate::path::make_path(&[crate::path::DiagonalChannel::new(vec![1.0, 0.5]).unwrap()]).unwrap();
        let r = check_derivative_bound(&MixtureInput::gaussian(s).into(), &g, &p, 0.6, &cfg).unwrap();
        assert!(r.holds);
        assert!(r.lhs.sub(&r.rhs).frobenius() < 1e-5);
    }

    #[test]
    fn fisher_examples() {
        let cfg = EstimatorConfig::default();
        let g = GaussianInput::iid(2, 1.0).unwrap();
        let p = crate::path::make_path(&[crate::path::DiagonalChannel::new(vec![1.0, 1.0]).unwrap()]).unwrap();
        let f0 = fisher(&g.to_mixture(), &g, &p, 0.0, &cfg).unwrap();
        assert!(f0.j.max_abs_diff(&SymMatrix::identity(2)) < 1e-15);
        let f1 = fisher(&g.to_mixture(), &g, &p, 1.0, &cfg).unwrap();
        assert!(f1.j.max_abs_diff(&SymMatrix::scaled_identity(2, 0.5)) < 1e-14);
        assert!(f1.w_residual < 1e-14);
        assert!(f1.agrees(3.0));
    }

    #[test]
    fn score_fisher_matches_identity() {
        let p = crate::path::snr_path(2, 4.0).unwrap();
        let lam = GaussianInput::iid(2, 1.0).unwrap();
        let q = fisher(&MixtureInput::qpsk_parallel(2), &lam, &p, 1.0, &EstimatorConfig::default()).unwrap();
        assert!(q.agrees(3.0), "{}", q.j_score_z);
        let mc = fisher(&MixtureInput::qpsk_parallel(2), &lam, &p, 1.0, &EstimatorConfig::monte_carlo(100_000, 9)).unwrap();
        assert!(mc.agrees(4.0), "{}", mc.j_score_z);
        let g = MixtureInput::gaussian(SymMatrix::from_rows(&[vec![1.0, 0.3], vec![0.3, 0.5]]).unwrap());
        let gmc = fisher(&g, &lam, &p, 2.0, &EstimatorConfig::monte_carlo(50_000, 2)).unwrap();
        assert!(gmc.agrees(4.0), "{}", gmc.j_score_z);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]
            #[test]
            fn negated_weight_mirrors_series(seed in 0u64..500, gamma in 0.0f64..5.0) {
                let cfg = EstimatorConfig::quadrature(24);
                let m: ConditionalInput = MixtureInput::seeded_random_mixture(2, 2, seed).into();
                let a = SymMatrix::from_rows(&[vec![1.0, 0.4], vec![0.4, 0.5]]).unwrap();
                let pos = q_weighted(&m, 1.0, gamma, &a, &cfg).unwrap();
                let neg = q_weighted(&m, 1.0, gamma, &a.scale(-1.0), &cfg).unwrap();
                prop_assert_eq!(pos.value, -neg.value);
            }
        }
    }
}
