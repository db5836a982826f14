//! Degraded parallel Gaussian broadcast channels: closed-form rate points,
//! compound regions, single-letter rates of layered inputs and the
//! two-user converse witness.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::crossing::{q_matrix, Estimate};
use crate::error::{Error, Result};
use crate::immse::{mi_direct, mi_gaussian};
use crate::input::{Branch, ConditionalInput, GaussianInput, MixtureInput};
use crate::linalg::{loewner_leq, SymMatrix};
use crate::matcher::{match_general, match_independent, MatchOptions, MatchResult};
use crate::mmse::EstimatorConfig;
use crate::path::{make_path, DiagonalChannel, GainScanGrid};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constraint {
    PerAntenna(Vec<f64>),
    Covariance(SymMatrix),
}

impl Constraint {
    fn dim(&self) -> usize {
        match self {
            Constraint::PerAntenna(p) => p.len(),
            Constraint::Covariance(s) => s.dim(),
        }
    }

    /// The largest admissible input covariance.
    pub fn full(&self) -> SymMatrix {
        match self {
            Constraint::PerAntenna(p) => SymMatrix::from_diagonal(p),
            Constraint::Covariance(s) => s.clone(),
        }
    }

    pub fn admits(&self, cov: &SymMatrix, tol: f64) -> Result<bool> {
        match self {
            Constraint::PerAntenna(p) => Ok(cov.diagonal().iter().zip(p).all(|(c, p)| *c <= p + tol)),
            Constraint::Covariance(s) => loewner_leq(cov, s, tol),
        }
    }
}

/// Users ordered from weakest to strongest, `H₁ ⪯ … ⪯ H_M`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "BcDoc")]
pub struct BcInstance {
    pub users: Vec<DiagonalChannel>,
    pub constraint: Constraint,
}

#[derive(Deserialize)]
struct BcDoc {
    users: Vec<DiagonalChannel>,
    constraint: Constraint,
}

impl TryFrom<BcDoc> for BcInstance {
    type Error = Error;
    fn try_from(d: BcDoc) -> Result<Self> {
        BcInstance::new(d.users, d.constraint)
    }
}

fn check_chain(users: &[DiagonalChannel]) -> Result<usize> {
    if users.is_empty() {
        return Err(Error::InvalidInput("broadcast channel needs at least one user".into()));
    }
    let n = users[0].dim();
    for u in users {
        DiagonalChannel::new(u.gains.clone())?;
        if u.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: u.dim(),
            });
        }
    }
    for (j, w) in users.windows(2).enumerate() {
        if w[0].gains.iter().zip(&w[1].gains).any(|(a, b)| a > b) {
            return Err(Error::Ordering(format!("user {} is not degraded with respect to user {}", j + 1, j + 2)));
        }
    }
    Ok(n)
}

fn check_constraint(c: &Constraint, n: usize) -> Result<()> {
    if c.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: c.dim(),
        });
    }
    match c {
        Constraint::PerAntenna(p) if p.iter().any(|v| !(v.is_finite() && *v >= 0.0)) => {
            Err(Error::InvalidInput("per-antenna powers must be finite and nonnegative".into()))
        }
        Constraint::Covariance(s) => s.require_psd(),
        _ => Ok(()),
    }
}

impl BcInstance {
    pub fn new(users: Vec<DiagonalChannel>, constraint: Constraint) -> Result<Self> {
        let n = check_chain(&users)?;
        check_constraint(&constraint, n)?;
        Ok(Self { users, constraint })
    }

    pub fn dim(&self) -> usize {
        self.users[0].dim()
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }
}

/// Rates in nats with one-sigma errors, and the covariances that generate them.
#[derive(Debug, Clone, Serialize)]
pub struct RatePoint {
    pub rates: Vec<f64>,
    pub errs: Vec<f64>,
    pub splits: Vec<SymMatrix>,
}

impl RatePoint {
    pub fn sum_rate(&self) -> f64 {
        self.rates.iter().sum()
    }

    pub fn csv_header(m: usize) -> String {
        let mut cols: Vec<String> = (1..=m).map(|j| format!("R{j}")).collect();
        cols.push("splits".into());
        cols.join(",")
    }

    /// `R1,…,RM,` followed by the split entries separated by `;`.
    pub fn csv_row(&self) -> String {
        let mut cols: Vec<String> = self.rates.iter().map(|r| format!("{r:.12e}")).collect();
        let splits: Vec<String> = self
            .splits
            .iter()
            .map(|s| {
                s.matrix()
                    .iter()
                    .map(|v| format!("{v:.6e}"))
                    .collect::<Vec<_>>()
                    .join(" ")
            })
            .collect();
        cols.push(splits.join(";"));
        cols.join(",")
    }
}

/// `R_j = I(H_j; K_{j−1}) − I(H_j; K_j)` for the cumulative chain `K_0 ⪰ … ⪰ K_M = 0`.
fn rates_from_chain(users: &[DiagonalChannel], cumulative: &[SymMatrix]) -> Result<Vec<f64>> {
    let n = users[0].dim();
    let zero = SymMatrix::zeros(n);
    users
        .iter()
        .enumerate()
        .map(|(j, u)| {
            let h = u.matrix();
            let above = &cumulative[j];
            let below = cumulative.get(j + 1).unwrap_or(&zero);
            Ok((mi_gaussian(above, &h)? - mi_gaussian(below, &h)?).max(0.0))
        })
        .collect()
}

/// Per-antenna region point for the diagonal chain `P ⪰ Λ₁ ⪰ … ⪰ Λ_{M−1} ⪰ 0`.
pub fn region_per_antenna(inst: &BcInstance, lambdas: &[Vec<f64>]) -> Result<RatePoint> {
    let Constraint::PerAntenna(p) = &inst.constraint else {
        return Err(Error::InvalidInput("instance does not have a per-antenna constraint".into()));
    };
    let m = inst.num_users();
    if lambdas.len() + 1 != m {
        return Err(Error::InvalidInput(format!("{m} users need {} splits, got {}", m - 1, lambdas.len())));
    }
    let mut cumulative = vec![SymMatrix::from_diagonal(p)];
    let mut prev = p.clone();
    for (j, l) in lambdas.iter().enumerate() {
        if l.len() != p.len() {
            return Err(Error::DimensionMismatch {
                expected: p.len(),
                found: l.len(),
            });
        }
        if l.iter().zip(&prev).any(|(a, b)| !(*a >= 0.0 && *a <= *b)) {
            return Err(Error::Infeasible(format!("split {} breaks the chain P ⪰ Λ₁ ⪰ … ⪰ 0", j + 1)));
        }
        prev = l.clone();
        cumulative.push(SymMatrix::from_diagonal(l));
    }
    Ok(RatePoint {
        rates: rates_from_chain(&inst.users, &cumulative)?,
        errs: vec![0.0; m],
        splits: cumulative[1..].to_vec(),
    })
}

fn covariance_cumulative(splits: &[SymMatrix], s: &SymMatrix) -> Result<Vec<SymMatrix>> {
    let n = s.dim();
    for g in splits {
        if g.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: g.dim(),
            });
        }
        if !g.is_psd(g.default_psd_tol()) {
            return Err(Error::Infeasible("split is not positive semidefinite".into()));
        }
    }
    let mut cumulative = vec![SymMatrix::zeros(n); splits.len()];
    let mut acc = SymMatrix::zeros(n);
    for j in (0..splits.len()).rev() {
        acc = acc.add(&splits[j]);
        cumulative[j] = acc.clone();
    }
    if !loewner_leq(&acc, s, 1e-10 * (1.0 + s.trace()))? {
        return Err(Error::Infeasible("splits sum above the covariance constraint".into()));
    }
    Ok(cumulative)
}

/// Covariance region point for splits `Σg₁, …, Σg_M` with `Σ Σg_j ⪯ S`.
pub fn region_covariance(inst: &BcInstance, splits: &[SymMatrix]) -> Result<RatePoint> {
    let Constraint::Covariance(s) = &inst.constraint else {
        return Err(Error::InvalidInput("instance does not have a covariance constraint".into()));
    };
    let m = inst.num_users();
    if splits.len() != m {
        return Err(Error::InvalidInput(format!("{m} users need {m} splits, got {}", splits.len())));
    }
    let cumulative = covariance_cumulative(splits, s)?;
    Ok(RatePoint {
        rates: rates_from_chain(&inst.users, &cumulative)?,
        errs: vec![0.0; m],
        splits: splits.to_vec(),
    })
}

/// Each user has finitely many diagonal realizations; every realization of
/// user `j` lies below every realization of user `j+1`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "CompoundDoc")]
pub struct CompoundBcInstance {
    pub groups: Vec<Vec<DiagonalChannel>>,
    pub covariance: SymMatrix,
    /// `H*_{(j+1)j}` between consecutive groups.
    #[serde(skip_deserializing)]
    pub bridges: Vec<DiagonalChannel>,
}

#[derive(Deserialize)]
struct CompoundDoc {
    groups: Vec<Vec<DiagonalChannel>>,
    covariance: SymMatrix,
}

impl TryFrom<CompoundDoc> for CompoundBcInstance {
    type Error = Error;
    fn try_from(d: CompoundDoc) -> Result<Self> {
        CompoundBcInstance::new(d.groups, d.covariance)
    }
}

impl CompoundBcInstance {
    pub fn new(groups: Vec<Vec<DiagonalChannel>>, covariance: SymMatrix) -> Result<Self> {
        if groups.is_empty() || groups.iter().any(|g| g.is_empty()) {
            return Err(Error::InvalidInput("every user needs at least one realization".into()));
        }
        let all: Vec<DiagonalChannel> = groups.iter().flatten().cloned().collect();
        let n = all[0].dim();
        for h in &all {
            if DiagonalChannel::new(h.gains.clone())?.dim() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: h.dim(),
                });
            }
        }
        check_constraint(&Constraint::Covariance(covariance.clone()), n)?;
        let mut bridges = Vec::new();
        for j in 0..groups.len() - 1 {
            let hi_low: Vec<f64> = (0..n)
                .map(|i| groups[j].iter().map(|h| h.gains[i]).fold(f64::NEG_INFINITY, f64::max))
                .collect();
            let lo_up: Vec<f64> = (0..n)
                .map(|i| groups[j + 1].iter().map(|h| h.gains[i]).fold(f64::INFINITY, f64::min))
                .collect();
            if let Some(i) = (0..n).find(|&i| hi_low[i] > lo_up[i]) {
                return Err(Error::Ordering(format!(
                    "not a degraded compound channel: coordinate {i} of user {} exceeds user {}",
                    j + 1,
                    j + 2
                )));
            }
            bridges.push(DiagonalChannel::new((0..n).map(|i| 0.5 * (hi_low[i] + lo_up[i])).collect())?);
        }
        Ok(Self {
            groups,
            covariance,
            bridges,
        })
    }

    pub fn dim(&self) -> usize {
        self.covariance.dim()
    }
}

/// Each rate is the minimum over the user's realizations of the covariance
/// region formula.
pub fn region_compound(inst: &CompoundBcInstance, splits: &[SymMatrix]) -> Result<RatePoint> {
    let m = inst.groups.len();
    if splits.len() != m {
        return Err(Error::InvalidInput(format!("{m} users need {m} splits, got {}", splits.len())));
    }
    let cumulative = covariance_cumulative(splits, &inst.covariance)?;
    let zero = SymMatrix::zeros(inst.dim());
    let rates = inst
        .groups
        .iter()
        .enumerate()
        .map(|(j, group)| {
            let below = cumulative.get(j + 1).unwrap_or(&zero);
            group.iter().try_fold(f64::INFINITY, |acc, h| {
                let hm = h.matrix();
                let r = mi_gaussian(&cumulative[j], &hm)? - mi_gaussian(below, &hm)?;
                Ok::<f64, Error>(acc.min(r.max(0.0)))
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(RatePoint {
        rates,
        errs: vec![0.0; m],
        splits: splits.to_vec(),
    })
}

/// The law of `X` and, for `j = 1, …, M−1`, the law of `X` given `V_j`.
/// Branch `u` of layer `j` is the law of `X` given one value of `V_j`; any
/// translation of it is equivalent since conditional mutual information
/// does not see shifts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InputChain {
    pub x: MixtureInput,
    pub layers: Vec<ConditionalInput>,
}

impl InputChain {
    pub fn new(x: MixtureInput, layers: Vec<ConditionalInput>) -> Result<Self> {
        if let Some(l) = layers.iter().find(|l| l.dim() != x.dim()) {
            return Err(Error::DimensionMismatch {
                expected: x.dim(),
                found: l.dim(),
            });
        }
        Ok(Self { x, layers })
    }

    /// Two-user chain from a conditional law of `X` given `U`.
    pub fn two_user(cond: ConditionalInput) -> Self {
        Self {
            x: cond.marginalize(),
            layers: vec![cond],
        }
    }

    pub fn num_users(&self) -> usize {
        self.layers.len() + 1
    }

    pub fn dim(&self) -> usize {
        self.x.dim()
    }
}

/// Gaussian layers `V_j = V_{j−1} + U_j`, `U_j ~ N(0, Σg_j)`, so that
/// `X | V_j ~ V_j + N(0, Σ_{l>j} Σg_l)`.
pub fn superposition_input(splits: &[SymMatrix]) -> Result<InputChain> {
    if splits.is_empty() {
        return Err(Error::InvalidInput("need at least one split".into()));
    }
    let n = splits[0].dim();
    for g in splits {
        if g.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: g.dim(),
            });
        }
        g.require_psd()?;
    }
    let tail = |j: usize| splits[j..].iter().fold(SymMatrix::zeros(n), |a, g| a.add(g));
    Ok(InputChain {
        x: MixtureInput::gaussian(tail(0)),
        layers: (1..splits.len()).map(|j| MixtureInput::gaussian(tail(j)).into()).collect(),
    })
}

/// `R_j = I(X; Y_j | V_{j−1}) − I(X; Y_j | V_j)` with `V_0` empty and `V_M = X`.
pub fn achievable_point(chain: &InputChain, inst: &BcInstance, cfg: &EstimatorConfig) -> Result<RatePoint> {
    let m = inst.num_users();
    if chain.num_users() != m {
        return Err(Error::InvalidInput(format!(
            "chain has {} users, instance has {m}",
            chain.num_users()
        )));
    }
    if chain.dim() != inst.dim() {
        return Err(Error::DimensionMismatch {
            expected: inst.dim(),
            found: chain.dim(),
        });
    }
    let cov = chain.x.overall_covariance();
    if !inst.constraint.admits(&cov, 1e-9 * (1.0 + cov.trace()))? {
        return Err(Error::Infeasible("input covariance violates the power constraint".into()));
    }
    let x: ConditionalInput = chain.x.clone().into();
    let level = |j: usize| if j == 0 { &x } else { &chain.layers[j - 1] };
    let terms: Vec<(f64, f64, f64, f64)> = (0..m)
        .into_par_iter()
        .map(|j| {
            let h = inst.users[j].matrix();
            let a = mi_direct(level(j), &h, cfg)?;
            let (b, be) = if j + 1 < m {
                let e = mi_direct(level(j + 1), &h, cfg)?;
                (e.value, e.std_err)
            } else {
                (0.0, 0.0)
            };
            Ok((a.value, a.std_err, b, be))
        })
        .collect::<Result<_>>()?;
    Ok(RatePoint {
        rates: terms.iter().map(|t| t.0 - t.2).collect(),
        errs: terms.iter().map(|t| (t.1 * t.1 + t.3 * t.3).sqrt()).collect(),
        splits: std::iter::once(cov)
            .chain(chain.layers.iter().map(|l| l.overall_covariance()))
            .collect(),
    })
}

/// `max_{split} μ₁·R₁ + μ₂·R₂` over the two-user outer bound, with the maximizing split.
pub fn weighted_outer_bound(inst: &BcInstance, mu: (f64, f64)) -> Result<(f64, SymMatrix)> {
    if inst.num_users() != 2 {
        return Err(Error::InvalidInput("weighted outer bound is implemented for two users".into()));
    }
    let (m1, m2) = mu;
    let h1 = &inst.users[0];
    let h2 = &inst.users[1];
    let full = inst.constraint.full();
    let base = m1 * mi_gaussian(&full, &h1.matrix())?;
    match &inst.constraint {
        Constraint::PerAntenna(p) => {
            let mut total = base;
            let mut lam = Vec::with_capacity(p.len());
            for i in 0..p.len() {
                let (a, b) = (h1.gains[i].powi(2), h2.gains[i].powi(2));
                let phi = |l: f64| 0.5 * (m2 * (b * l).ln_1p() - m1 * (a * l).ln_1p());
                let mut cands = vec![0.0, p[i]];
                if a > 0.0 && b > 0.0 && m2 != m1 {
                    let l = (m1 * a - m2 * b) / (a * b * (m2 - m1));
                    if l > 0.0 && l < p[i] {
                        cands.push(l);
                    }
                }
                let best = cands
                    .into_iter()
                    .max_by(|x, y| phi(*x).total_cmp(&phi(*y)))
                    .expect("candidates");
                total += phi(best);
                lam.push(best);
            }
            Ok((total, SymMatrix::from_diagonal(&lam)))
        }
        Constraint::Covariance(s) => {
            let root = s.sqrt_psd();
            let n = s.dim();
            let objective = |w: &SymMatrix| -> Result<f64> {
                let k = w.congruence(root.matrix());
                Ok(base + m2 * mi_gaussian(&k, &h2.matrix())? - m1 * mi_gaussian(&k, &h1.matrix())?)
            };
            let grad = |w: &SymMatrix| -> Result<SymMatrix> {
                let k = w.congruence(root.matrix());
                let g = |h: &DiagonalChannel| -> Result<SymMatrix> {
                    let inner = k.congruence(&h.matrix()).add(&SymMatrix::identity(n)).inverse_pd()?;
                    Ok(inner.congruence(&h.matrix().transpose()).scale(0.5))
                };
                let gk = g(h2)?.scale(m2).sub(&g(h1)?.scale(m1));
                Ok(gk.congruence(&root.matrix().transpose()))
            };
            let project = |w: &SymMatrix| w.map_spectrum(|v| v.clamp(0.0, 1.0));
            let mut rng = ChaCha8Rng::seed_from_u64(0x0B0B);
            let mut starts = vec![SymMatrix::zeros(n), SymMatrix::identity(n), SymMatrix::scaled_identity(n, 0.5)];
            for _ in 0..4 {
                let a = nalgebra::DMatrix::from_fn(n, n, |_, _| rng.random::<f64>() - 0.5);
                starts.push(project(&SymMatrix::new(&a * a.transpose())?));
            }
            let mut best = (f64::NEG_INFINITY, SymMatrix::zeros(n));
            for w0 in starts {
                let mut w = w0;
                let mut f = objective(&w)?;
                let mut step = 1.0;
                for _ in 0..400 {
                    let g = grad(&w)?;
                    let cand = project(&w.add(&g.scale(step)));
                    let fc = objective(&cand)?;
                    if fc > f {
                        w = cand;
                        f = fc;
                        step *= 1.2;
                    } else {
                        step *= 0.5;
                        if step < 1e-12 {
                            break;
                        }
                    }
                }
                if f > best.0 {
                    best = (f, w.congruence(root.matrix()));
                }
            }
            Ok(best)
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ContainmentReport {
    /// Largest `μ·R − max μ·R_bound − 4·μ·σ` over the sampled directions.
    pub worst_excess: f64,
    pub directions: usize,
    pub inside: bool,
}

/// Checks a two-user point against the outer bound along sampled weight directions.
pub fn inside_outer_bound(inst: &BcInstance, point: &RatePoint, directions: usize) -> Result<ContainmentReport> {
    let k = directions.max(2);
    let excess: Vec<f64> = (0..k)
        .into_par_iter()
        .map(|d| {
            let th = std::f64::consts::FRAC_PI_2 * d as f64 / (k - 1) as f64;
            let mu = (th.cos(), th.sin());
            let (bound, _) = weighted_outer_bound(inst, mu)?;
            let v = mu.0 * point.rates[0] + mu.1 * point.rates[1];
            let slack = 4.0 * (mu.0 * point.errs[0] + mu.1 * point.errs[1]) + 1e-9;
            Ok(v - bound - slack)
        })
        .collect::<Result<_>>()?;
    let worst = excess.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(ContainmentReport {
        worst_excess: worst,
        directions: k,
        inside: worst <= 0.0,
    })
}

/// `(t, value, tol)` of the dominance integrand on `[t₁, t₂]`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DominancePoint {
    pub t: f64,
    pub value: f64,
    pub tol: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct WitnessReport {
    pub matched: MatchResult,
    pub achievable: RatePoint,
    /// `(I(H₁;K₀) − I_G(Σ*, H₁), I_G(Σ*, H₂))`.
    pub bound: Vec<f64>,
    pub equality: bool,
    pub dominance_grid: Vec<DominancePoint>,
    /// `I(X; Y₂ | U)` and `I_G(Σ*, H₂)`.
    pub dominance_direct: (Estimate, f64),
    pub dominance: bool,
    pub contains: bool,
    pub feasible: bool,
}

impl WitnessReport {
    pub fn certified(&self) -> bool {
        self.equality && self.dominance && self.contains && self.feasible
    }
}

/// Runs the matching pipeline at user 1 and certifies the two-user converse
/// bound for the given chain.
pub fn converse_witness(
    chain: &InputChain,
    inst: &BcInstance,
    cfg: &EstimatorConfig,
    opts: &MatchOptions,
) -> Result<WitnessReport> {
    if inst.num_users() != 2 || chain.num_users() != 2 {
        return Err(Error::InvalidInput("the converse witness is implemented for two users".into()));
    }
    let path = make_path(&inst.users)?;
    let (t1, t2) = (1.0, 2.0);
    let cond = &chain.layers[0];
    let per_antenna = matches!(inst.constraint, Constraint::PerAntenna(_));
    let matched = if per_antenna {
        match_independent(cond, &path, t1, cfg, opts)?
    } else {
        match_general(cond, &path, t1, cfg, opts)?
    };
    let sigma = matched.sigma_star.clip_psd();
    let h1 = inst.users[0].matrix();
    let h2 = inst.users[1].matrix();
    let full = inst.constraint.full();
    let bound = vec![
        mi_gaussian(&full, &h1)? - mi_gaussian(&sigma, &h1)?,
        mi_gaussian(&sigma, &h2)?,
    ];
    let achievable = achievable_point(chain, inst, cfg)?;

    let gauss = GaussianInput::new(sigma.clone())?;
    let grid = GainScanGrid::linear(t1, t2, 20)?;
    let dominance_grid: Vec<DominancePoint> = grid
        .t_values
        .par_iter()
        .map(|&t| {
            let q = q_matrix(cond, &gauss, &path, t, cfg)?;
            let b = path.b_diag(t);
            let n = b.len();
            let value: f64 = (0..n).map(|i| b[i] * q.value.get(i, i)).sum();
            let err: f64 = (0..n).map(|i| b[i].abs() * q.err.get(i, i)).sum();
            Ok(DominancePoint {
                t,
                value,
                tol: 4.0 * err + 1e-9,
            })
        })
        .collect::<Result<_>>()?;
    let i2 = mi_direct(cond, &h2, cfg)?;
    let direct_ok = i2.value <= bound[1] + 4.0 * i2.std_err + opts.mi_tol;
    let dominance = direct_ok && dominance_grid.iter().all(|p| p.value >= -p.tol);
    let contains = (0..2).all(|j| achievable.rates[j] <= bound[j] + 4.0 * achievable.errs[j] + opts.mi_tol);
    let feasible = inst.constraint.admits(&sigma, 1e-9 + 4.0 * matched.diagnostics.mmse_err)?;
    let dominance_direct = (
        Estimate {
            value: i2.value,
            err: i2.std_err,
        },
        bound[1],
    );
    Ok(WitnessReport {
        equality: matched.checks.mi_ok,
        matched,
        achievable,
        bound,
        dominance_grid,
        dominance_direct,
        dominance,
        contains,
        feasible,
    })
}

/// Random feasible covariance splits `Σg_1, …, Σg_M` with `Σ Σg_j ⪯ S`.
pub fn random_covariance_splits(s: &SymMatrix, m: usize, seed: u64) -> Result<Vec<SymMatrix>> {
    let n = s.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let root = s.sqrt_psd();
    let parts: Vec<SymMatrix> = (0..m)
        .map(|_| {
            let a = nalgebra::DMatrix::from_fn(n, n, |_, _| rng.random::<f64>() * 2.0 - 1.0);
            SymMatrix::new(&a * a.transpose())
        })
        .collect::<Result<_>>()?;
    let total = parts.iter().fold(SymMatrix::zeros(n), |a, p| a.add(p));
    let scale = rng.random_range(0.5..=1.0) / total.max_eigenvalue().max(1e-300);
    Ok(parts.iter().map(|p| p.scale(scale).congruence(root.matrix())).collect())
}

/// Random diagonal chain `P ⪰ Λ₁ ⪰ … ⪰ Λ_{M−1} ⪰ 0`.
pub fn random_per_antenna_splits(p: &[f64], m: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fracs: Vec<Vec<f64>> = p
        .iter()
        .map(|_| {
            let mut f: Vec<f64> = (1..m).map(|_| rng.random::<f64>()).collect();
            f.sort_by(|a, b| b.total_cmp(a));
            f
        })
        .collect();
    (0..m - 1)
        .map(|j| p.iter().zip(fracs.iter_mut()).map(|(pi, f)| pi * f[j]).collect())
        .collect()
}

/// Two-user discrete chain: `U` uniform on `n_u` values and `X | U = u`
/// uniform on `k` points, rescaled to meet the constraint.
pub fn random_discrete_chain(constraint: &Constraint, n_u: usize, k: usize, seed: u64) -> Result<InputChain> {
    let n = constraint.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut clouds: Vec<Vec<Vec<f64>>> = (0..n_u)
        .map(|_| {
            let centre: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            (0..k)
                .map(|_| centre.iter().map(|c| c + 0.6 * (rng.random::<f64>() * 2.0 - 1.0)).collect())
                .collect()
        })
        .collect();
    let all: Vec<Vec<f64>> = clouds.iter().flatten().cloned().collect();
    let mean: Vec<f64> = (0..n).map(|i| all.iter().map(|p| p[i]).sum::<f64>() / all.len() as f64).collect();
    for p in clouds.iter_mut().flatten() {
        for i in 0..n {
            p[i] -= mean[i];
        }
    }
    let cond = |clouds: &[Vec<Vec<f64>>]| -> Result<ConditionalInput> {
        ConditionalInput::new(
            clouds
                .iter()
                .map(|c| {
                    Ok(Branch {
                        q: 1.0 / n_u as f64,
                        input: MixtureInput::constellation(c)?,
                    })
                })
                .collect::<Result<_>>()?,
        )
    };
    let cov = cond(&clouds)?.overall_covariance();
    let fill = rng.random_range(0.6..=1.0);
    let ratio = match constraint {
        Constraint::PerAntenna(p) => cov.diagonal().iter().zip(p).map(|(c, p)| c / p).fold(0.0, f64::max),
        Constraint::Covariance(s) => {
            let w = s.sqrt_psd().inverse()?;
            cov.congruence(w.matrix()).max_eigenvalue()
        }
    };
    let scale = (fill / ratio.max(1e-300)).sqrt();
    for p in clouds.iter_mut().flatten() {
        for v in p.iter_mut() {
            *v *= scale;
        }
    }
    Ok(InputChain::two_user(cond(&clouds)?))
}
