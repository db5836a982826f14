//! JSON scenario configs and the command runner behind the binary.
//!
//! A scenario names one command and carries everything it needs. Running it
//! yields a list of named text artifacts; every artifact embeds the SHA-256
//! of the canonical config and the seed.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::bc::{
    achievable_point, converse_witness, random_covariance_splits, random_per_antenna_splits, region_compound,
    region_covariance, region_per_antenna, BcInstance, CompoundBcInstance, Constraint, InputChain, RatePoint,
};
use crate::corpus::{run_all, CorpusScale};
use crate::crossing::{
    d_reports, diagonal_reports, eigen_reports, fisher, q_series, scan_weighted, spectrum_scan, bq_sign_mismatches,
    CrossingReport, SeriesKind, Verdict,
};
use crate::error::{Error, Result};
use crate::immse::{epi_check, mi_direct, mi_gaussian, mi_immse, EpiSpec, IntegrationConfig, MiEstimate, MiMethod};
use crate::input::{ConditionalInput, GaussianInput, MixtureInput};
use crate::linalg::SymMatrix;
use crate::matcher::{match_extension, match_general, match_independent, minimal_match, MatchOptions};
use crate::mmse::{conditional_mmse, EstimatorConfig, Method};
use crate::path::{ChannelPath, GainScanGrid};
use crate::rng::mix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    MmseScan,
    Crossing,
    EigCrossing,
    Mi,
    Epi,
    Match,
    BcRegion,
    BcWitness,
    Fisher,
    Corpus,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::MmseScan => "mmse-scan",
            Command::Crossing => "crossing",
            Command::EigCrossing => "eig-crossing",
            Command::Mi => "mi",
            Command::Epi => "epi",
            Command::Match => "match",
            Command::BcRegion => "bc-region",
            Command::BcWitness => "bc-witness",
            Command::Fisher => "fisher",
            Command::Corpus => "corpus",
        }
    }

    fn needs_seed(self) -> bool {
        !matches!(self, Command::BcRegion)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Units {
    #[default]
    Nats,
    Bits,
}

impl Units {
    fn factor(self) -> f64 {
        match self {
            Units::Nats => 1.0,
            Units::Bits => std::f64::consts::LOG2_E,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum GridSpec {
    Values(Vec<f64>),
    Linear { lo: f64, hi: f64, points: usize },
    /// `0` followed by `points − 1` log-spaced values in `[lo, hi]`.
    Log { lo: f64, hi: f64, points: usize },
}

impl GridSpec {
    pub fn build(&self) -> Result<GainScanGrid> {
        match self {
            GridSpec::Values(v) => GainScanGrid::new(v.clone()),
            GridSpec::Linear { lo, hi, points } => GainScanGrid::linear(*lo, *hi, *points),
            GridSpec::Log { lo, hi, points } => GainScanGrid::log_with_zero(*lo, *hi, *points),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchChoice {
    #[default]
    General,
    Independent,
    Minimal,
    Extension,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScaleSpec {
    Named(String),
    Custom(CorpusScale),
}

/// Command-specific settings. Each command reads only the fields it uses.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    /// Evaluation point on the path (`mi`).
    pub t: Option<f64>,
    /// Matching point (`match`).
    pub t_e: Option<f64>,
    pub kind: MatchChoice,
    /// Gaussian upper bound for extension matching.
    pub upper: Option<SymMatrix>,
    /// PSD weight `A` for a scalar-channel `q_A` scan (`crossing`).
    pub weight: Option<SymMatrix>,
    pub sigma2: Option<f64>,
    /// Require diagonal series to vanish at the end of the grid.
    pub tail_zero: Option<bool>,
    pub max_refine: Option<usize>,
    pub noise_cov: Option<SymMatrix>,
    pub bc: Option<BcInstance>,
    pub compound: Option<CompoundBcInstance>,
    /// Explicit covariance split sets, one per region point.
    pub splits: Option<Vec<Vec<SymMatrix>>>,
    /// Explicit per-antenna power split sets, one per region point.
    pub lambdas: Option<Vec<Vec<Vec<f64>>>>,
    /// Number of seeded random split sets.
    pub random_points: Option<usize>,
    pub chain: Option<InputChain>,
    pub scale: Option<ScaleSpec>,
}

/// A parsed scenario with `input_file` already inlined.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub command: Command,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub estimator: EstimatorConfig,
    #[serde(default)]
    pub integration: IntegrationConfig,
    #[serde(default)]
    pub matching: MatchOptions,
    #[serde(default)]
    pub input: Option<Value>,
    #[serde(default)]
    pub input_file: Option<PathBuf>,
    #[serde(default)]
    pub gaussian: Option<SymMatrix>,
    #[serde(default)]
    pub path: Option<ChannelPath>,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub anchors_in_grid: bool,
    #[serde(default)]
    pub params: Params,
    #[serde(default)]
    pub units: Units,
}

/// One output file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub artifacts: Vec<Artifact>,
    /// A theorem-level property failed.
    pub violation: bool,
    pub summary: String,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.violation {
            3
        } else {
            0
        }
    }
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl Scenario {
    /// Reads a config file; `input_file` resolves relative to its directory.
    pub fn load(path: &Path) -> Result<(Self, Value)> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Parses a config document and returns it with its canonical JSON form.
    pub fn parse(text: &str, base: &Path) -> Result<(Self, Value)> {
        let mut raw: Value = serde_json::from_str(text).map_err(|e| config_err(format!("invalid JSON: {e}")))?;
        if let Some(file) = raw.get("input_file").and_then(Value::as_str).map(PathBuf::from) {
            if raw.get("input").is_some() {
                return Err(config_err("give either `input` or `input_file`, not both"));
            }
            let full = if file.is_absolute() { file } else { base.join(file) };
            let text = std::fs::read_to_string(&full)
                .map_err(|e| config_err(format!("cannot read input file {}: {e}", full.display())))?;
            let input: Value =
                serde_json::from_str(&text).map_err(|e| config_err(format!("input file {}: {e}", full.display())))?;
            let obj = raw.as_object_mut().ok_or_else(|| config_err("config must be a JSON object"))?;
            obj.remove("input_file");
            obj.insert("input".into(), input);
        }
        let scenario: Scenario =
            serde_json::from_value(raw.clone()).map_err(|e| config_err(format!("config: {e}")))?;
        scenario.validate()?;
        Ok((scenario, raw))
    }

    fn validate(&self) -> Result<()> {
        if self.command.needs_seed() && self.seed.is_none() {
            return Err(config_err(format!("`seed` is required for `{}`", self.command.name())));
        }
        if let (Some(p), Some(n)) = (&self.path, self.input_dim()?) {
            if p.dim() != n {
                return Err(config_err(format!("path dimension {} does not match input dimension {n}", p.dim())));
            }
        }
        Ok(())
    }

    fn input_dim(&self) -> Result<Option<usize>> {
        Ok(match &self.input {
            Some(_) => Some(self.conditional()?.dim()),
            None => None,
        })
    }

    fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    fn cfg(&self) -> EstimatorConfig {
        self.estimator.with_seed(self.seed())
    }

    /// The input as `X | U`; a plain mixture becomes a single branch.
    pub fn conditional(&self) -> Result<ConditionalInput> {
        let v = self.input.as_ref().ok_or_else(|| config_err("`input` is required"))?;
        if v.get("u").is_some() {
            serde_json::from_value(v.clone()).map_err(|e| config_err(format!("input: {e}")))
        } else {
            let m: MixtureInput = serde_json::from_value(v.clone()).map_err(|e| config_err(format!("input: {e}")))?;
            Ok(m.into())
        }
    }

    fn mixture(&self) -> Result<MixtureInput> {
        let c = self.conditional()?;
        if !c.is_trivial() {
            return Err(config_err(format!("`{}` needs an unconditioned input", self.command.name())));
        }
        Ok(c.marginalize())
    }

    fn path(&self) -> Result<&ChannelPath> {
        self.path.as_ref().ok_or_else(|| config_err("`path` is required"))
    }

    fn grid(&self) -> Result<GainScanGrid> {
        let g = self.grid.as_ref().ok_or_else(|| config_err("`grid` is required"))?.build()?;
        Ok(match (&self.path, self.anchors_in_grid) {
            (Some(p), true) => g.with_anchors(p),
            _ => g,
        })
    }

    fn gaussian_or_diag(&self, cond: &ConditionalInput) -> Result<GaussianInput> {
        match &self.gaussian {
            Some(c) => GaussianInput::new(c.clone()),
            None => GaussianInput::diagonal(&cond.overall_covariance().diagonal()),
        }
    }
}

/// SHA-256 of the compact JSON with keys in sorted order.
pub fn config_hash(canonical: &Value) -> String {
    let text = serde_json::to_string(canonical).expect("value serializes");
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

struct Table {
    header: String,
    rows: Vec<String>,
}

impl Table {
    fn new(header: &str) -> Self {
        Self {
            header: header.into(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: String) {
        self.rows.push(row);
    }
}

struct Results {
    json: Value,
    tables: Vec<(String, Table)>,
    extra: Vec<(String, Value)>,
    violation: bool,
    summary: String,
}

fn kind_label(kind: SeriesKind) -> (String, String) {
    let (name, idx) = match kind {
        SeriesKind::WeightedTrace => ("weighted_trace", None),
        SeriesKind::Diagonal(i) => ("diagonal", Some(i)),
        SeriesKind::Eigenvalue(i) => ("eigenvalue", Some(i)),
        SeriesKind::BqEigenvalue(i) => ("bq_eigenvalue", Some(i)),
        SeriesKind::D(i) => ("d", Some(i)),
        SeriesKind::DSum => ("d_sum", None),
        SeriesKind::DeltaI => ("delta_i", None),
    };
    (name.into(), idx.map_or(String::new(), |i| i.to_string()))
}

fn series_table(reports: &[CrossingReport]) -> Table {
    let mut t = Table::new("series,index,t,value,err,sign");
    for r in reports {
        let (name, idx) = kind_label(r.kind);
        for (((x, v), e), s) in r.grid.iter().zip(&r.values).zip(&r.errs).zip(r.signs()) {
            t.push(format!("{name},{idx},{x},{v},{e},{}", s.as_i8()));
        }
    }
    t
}

fn overall_verdict(reports: &[CrossingReport]) -> Verdict {
    if reports.iter().any(|r| r.verdict == Verdict::Violation) {
        Verdict::Violation
    } else if reports.iter().any(|r| r.verdict == Verdict::Inconclusive) {
        Verdict::Inconclusive
    } else {
        Verdict::Consistent
    }
}

fn verdict_doc(reports: &[CrossingReport], extra: Value) -> Value {
    let series: Vec<Value> = reports
        .iter()
        .map(|r| {
            json!({
                "kind": r.kind,
                "verdict": r.verdict,
                "crossings": r.crossings,
                "items": r.items,
                "notes": r.notes,
            })
        })
        .collect();
    json!({
        "verdict": overall_verdict(reports),
        "all_checks_pass": reports.iter().all(|r| r.passes()),
        "series": series,
        "extra": extra,
    })
}

fn crossing_results(reports: Vec<CrossingReport>, extra: Value, sign_ok: bool) -> Results {
    let verdict = overall_verdict(&reports);
    let doc = verdict_doc(&reports, extra);
    let violation = verdict == Verdict::Violation || !sign_ok;
    Results {
        summary: format!(
            "{} series, verdict {}",
            reports.len(),
            serde_json::to_value(verdict).expect("verdict").as_str().unwrap_or("")
        ),
        tables: vec![(String::new(), series_table(&reports))],
        json: serde_json::to_value(&reports).expect("reports serialize"),
        extra: vec![("verdict".into(), doc)],
        violation,
    }
}

fn run_mmse_scan(s: &Scenario) -> Result<Results> {
    let cond = s.conditional()?;
    let path = s.path()?;
    let grid = s.grid()?;
    let cfg = s.cfg();
    let mut table = Table::new("t,i,j,value,err");
    let mut out = Vec::new();
    for &t in &grid.t_values {
        let est = conditional_mmse(&cond, &path.gains(t).matrix(), &cfg)?;
        let n = est.matrix.dim();
        for i in 0..n {
            for j in i..n {
                table.push(format!("{t},{i},{j},{},{}", est.matrix.get(i, j), est.std_err.get(i, j)));
            }
        }
        out.push(json!({"t": t, "mmse": est.matrix, "std_err": est.std_err}));
    }
    Ok(Results {
        summary: format!("{} grid points", grid.len()),
        json: Value::Array(out),
        tables: vec![(String::new(), table)],
        extra: vec![],
        violation: false,
    })
}

fn run_crossing(s: &Scenario) -> Result<Results> {
    let cond = s.conditional()?;
    let grid = s.grid()?;
    let cfg = s.cfg();
    if let Some(a) = &s.params.weight {
        let sigma2 = s.params.sigma2.ok_or_else(|| config_err("`params.sigma2` is required with `weight`"))?;
        let r = scan_weighted(&cond, sigma2, a, &grid, &cfg)?;
        return Ok(crossing_results(vec![r], json!({"sigma2": sigma2}), true));
    }
    let path = s.path()?;
    let gauss = s.gaussian_or_diag(&cond)?;
    if !gauss.cov.is_diagonal() {
        return Err(config_err("`crossing` needs a diagonal Gaussian reference; use `eig-crossing`"));
    }
    let series = q_series(&cond, &gauss, path, &grid, &cfg)?;
    let mut reports = diagonal_reports(&series, s.params.tail_zero.unwrap_or(true));
    let (per, sum) = d_reports(&series, path);
    reports.extend(per);
    reports.push(sum);
    Ok(crossing_results(reports, json!({"gaussian": gauss.cov}), true))
}

fn run_eig_crossing(s: &Scenario) -> Result<Results> {
    let cond = s.conditional()?;
    let path = s.path()?;
    let grid = s.grid()?;
    let gauss = s.gaussian_or_diag(&cond)?;
    let (_, scan) = spectrum_scan(&cond, &gauss, path, &grid, &s.cfg(), s.params.max_refine.unwrap_or(grid.len()))?;
    let mut reports = eigen_reports(&scan, false);
    reports.extend(eigen_reports(&scan, true));
    let mismatches = bq_sign_mismatches(&scan);
    let extra = json!({"bq_sign_mismatches": mismatches, "refinements": scan.refinements});
    Ok(crossing_results(reports, extra, mismatches.is_empty()))
}

fn closed_form_mi(cond: &ConditionalInput, h: &nalgebra::DMatrix<f64>) -> Result<Option<f64>> {
    if !cond.branches().iter().all(|b| b.input.is_single_gaussian()) {
        return Ok(None);
    }
    let mut v = 0.0;
    for b in cond.branches() {
        v += b.q * mi_gaussian(&b.input.components()[0].cov, h)?;
    }
    Ok(Some(v))
}

fn run_mi(s: &Scenario) -> Result<Results> {
    let cond = s.conditional()?;
    let path = s.path()?;
    let t = s.params.t.ok_or_else(|| config_err("`params.t` is required"))?;
    let cfg = s.cfg();
    let h = path.gains(t).matrix();
    let k = s.units.factor();
    let direct = mi_direct(&cond, &h, &cfg)?;
    let integral = mi_immse(&cond, path, t, &cfg, &s.integration)?;
    let closed = closed_form_mi(&cond, &h)?;
    let mut rows: Vec<MiEstimate> = vec![direct, integral];
    if let Some(v) = closed {
        rows.insert(
            0,
            MiEstimate {
                value: v,
                std_err: 0.0,
                method: MiMethod::ClosedForm,
            },
        );
    }
    let mut table = Table::new("method,value,std_err");
    for r in &rows {
        let m = serde_json::to_value(r.method).expect("method");
        table.push(format!("{},{},{}", m.as_str().unwrap_or(""), k * r.value, k * r.std_err));
    }
    let mut max_z: f64 = 0.0;
    for (i, a) in rows.iter().enumerate() {
        for b in &rows[i + 1..] {
            let e = a.std_err.hypot(b.std_err);
            let d = (a.value - b.value).abs();
            max_z = max_z.max(if e > 0.0 { d / e } else if d <= 1e-9 { 0.0 } else { f64::INFINITY });
        }
    }
    let agree = max_z <= 3.0;
    let json_rows: Vec<Value> = rows
        .iter()
        .map(|r| json!({"method": r.method, "value": k * r.value, "std_err": k * r.std_err}))
        .collect();
    Ok(Results {
        summary: format!(
            "MI at t={t}: {} (max pairwise deviation {max_z:.3} combined errors, tolerance 3)",
            rows.iter().map(|r| format!("{:.6}", k * r.value)).collect::<Vec<_>>().join(" / ")
        ),
        json: json!({"t": t, "units": s.units, "estimates": json_rows, "max_deviation": max_z, "agree": agree}),
        tables: vec![(String::new(), table)],
        extra: vec![],
        violation: false,
    })
}

fn run_epi(s: &Scenario) -> Result<Results> {
    let input = s.mixture()?;
    let noise = s.params.noise_cov.clone().ok_or_else(|| config_err("`params.noise_cov` is required"))?;
    let grid = s.grid.as_ref().ok_or_else(|| config_err("`grid` is required"))?.build()?;
    let spec = EpiSpec {
        input,
        noise_cov: noise,
        snr_grid: grid,
    };
    let r = epi_check(&spec, &s.cfg())?;
    let k = s.units.factor();
    let mut table = Table::new("snr,delta,err,nonpositive");
    for p in &r.points {
        table.push(format!("{},{},{},{}", p.snr, k * p.delta, k * p.err, p.nonpositive));
    }
    Ok(Results {
        summary: format!(
            "EPI: Δ nonpositive on grid: {}, tail gap {:.3e}, slack {:.4e}",
            r.all_nonpositive(),
            r.tail_gap,
            r.epi_slack
        ),
        violation: !(r.all_nonpositive() && r.epi_holds),
        json: serde_json::to_value(&r).expect("report"),
        tables: vec![(String::new(), table)],
        extra: vec![],
    })
}

fn run_match(s: &Scenario) -> Result<Results> {
    let cond = s.conditional()?;
    let path = s.path()?;
    let t_e = s.params.t_e.ok_or_else(|| config_err("`params.t_e` is required"))?;
    let cfg = s.cfg();
    let o = &s.matching;
    let r = match s.params.kind {
        MatchChoice::General => match_general(&cond, path, t_e, &cfg, o)?,
        MatchChoice::Independent => match_independent(&cond, path, t_e, &cfg, o)?,
        MatchChoice::Minimal => minimal_match(&cond, path, t_e, &cfg, o)?,
        MatchChoice::Extension => {
            let ub = s.params.upper.clone().ok_or_else(|| config_err("`params.upper` is required"))?;
            match_extension(&cond, path, t_e, &GaussianInput::new(ub)?, &cfg, o)?
        }
    };
    let mut table = Table::new("i,j,sigma_star");
    let n = r.sigma_star.dim();
    for i in 0..n {
        for j in i..n {
            table.push(format!("{i},{j},{}", r.sigma_star.get(i, j)));
        }
    }
    Ok(Results {
        summary: format!("match at t_e={t_e}: all checks pass: {}", r.passes()),
        json: serde_json::to_value(&r).expect("match result"),
        tables: vec![(String::new(), table)],
        extra: vec![],
        violation: false,
    })
}

fn scaled(p: RatePoint, k: f64) -> RatePoint {
    RatePoint {
        rates: p.rates.iter().map(|r| k * r).collect(),
        errs: p.errs.iter().map(|e| k * e).collect(),
        splits: p.splits,
    }
}

fn run_bc_region(s: &Scenario) -> Result<Results> {
    let k = s.units.factor();
    let count = s.params.random_points;
    let seed = |i: usize| -> Result<u64> {
        s.seed
            .map(|v| mix(v, i as u64))
            .ok_or_else(|| config_err("`seed` is required for random region points"))
    };
    let points: Vec<RatePoint> = if let Some(c) = &s.params.compound {
        let m = c.groups.len();
        let sets = match (&s.params.splits, count) {
            (Some(v), _) => v.clone(),
            (None, Some(n)) => (0..n)
                .map(|i| random_covariance_splits(&c.covariance, m, seed(i)?))
                .collect::<Result<_>>()?,
            (None, None) => return Err(config_err("give `params.splits` or `params.random_points`")),
        };
        sets.iter().map(|sp| region_compound(c, sp)).collect::<Result<_>>()?
    } else {
        let inst = s.params.bc.as_ref().ok_or_else(|| config_err("`params.bc` or `params.compound` is required"))?;
        let m = inst.num_users();
        match &inst.constraint {
            Constraint::Covariance(cov) => {
                let sets = match (&s.params.splits, count) {
                    (Some(v), _) => v.clone(),
                    (None, Some(n)) => (0..n)
                        .map(|i| random_covariance_splits(cov, m, seed(i)?))
                        .collect::<Result<_>>()?,
                    (None, None) => return Err(config_err("give `params.splits` or `params.random_points`")),
                };
                sets.iter().map(|sp| region_covariance(inst, sp)).collect::<Result<_>>()?
            }
            Constraint::PerAntenna(p) => {
                let sets = match (&s.params.lambdas, count) {
                    (Some(v), _) => v.clone(),
                    (None, Some(n)) => (0..n)
                        .map(|i| Ok(random_per_antenna_splits(p, m, seed(i)?)))
                        .collect::<Result<_>>()?,
                    (None, None) => return Err(config_err("give `params.lambdas` or `params.random_points`")),
                };
                sets.iter().map(|l| region_per_antenna(inst, l)).collect::<Result<_>>()?
            }
        }
    };
    let points: Vec<RatePoint> = points.into_iter().map(|p| scaled(p, k)).collect();
    let m = points.first().map_or(0, |p| p.rates.len());
    let mut table = Table::new(&RatePoint::csv_header(m));
    for p in &points {
        table.push(p.csv_row());
    }
    Ok(Results {
        summary: format!("{} region points", points.len()),
        json: json!({"units": s.units, "points": points}),
        tables: vec![(String::new(), table)],
        extra: vec![],
        violation: false,
    })
}

fn run_bc_witness(s: &Scenario) -> Result<Results> {
    let inst = s.params.bc.as_ref().ok_or_else(|| config_err("`params.bc` is required"))?;
    let chain = match &s.params.chain {
        Some(c) => c.clone(),
        None => InputChain::two_user(s.conditional()?),
    };
    let cfg = s.cfg();
    let r = converse_witness(&chain, inst, &cfg, &s.matching)?;
    let point = scaled(achievable_point(&chain, inst, &cfg)?, s.units.factor());
    let mut table = Table::new("t,value,tol");
    for p in &r.dominance_grid {
        table.push(format!("{},{},{}", p.t, p.value, p.tol));
    }
    Ok(Results {
        summary: format!("converse witness certified: {}", r.certified()),
        violation: !r.certified(),
        json: json!({"units": s.units, "rates": point, "witness": r}),
        tables: vec![(String::new(), table)],
        extra: vec![],
    })
}

fn run_fisher(s: &Scenario) -> Result<Results> {
    let input = s.mixture()?;
    let path = s.path()?;
    let grid = s.grid()?;
    let gauss = s.gaussian_or_diag(&input.clone().into())?;
    let cfg = s.cfg();
    let mut table = Table::new("t,w_residual,w_score_residual,j_score_z,agrees");
    let mut out = Vec::new();
    let mut all = true;
    for &t in &grid.t_values {
        let r = fisher(&input, &gauss, path, t, &cfg)?;
        let ok = r.agrees(3.0);
        all &= ok;
        table.push(format!("{t},{},{},{},{ok}", r.w_residual, r.w_score_residual, r.j_score_z));
        out.push(r);
    }
    Ok(Results {
        summary: format!("Fisher identities agree at every grid point: {all}"),
        json: serde_json::to_value(&out).expect("reports"),
        tables: vec![(String::new(), table)],
        extra: vec![],
        violation: false,
    })
}

fn run_corpus(s: &Scenario) -> Result<Results> {
    let scale = match &s.params.scale {
        None => CorpusScale::full(),
        Some(ScaleSpec::Named(n)) if n == "full" => CorpusScale::full(),
        Some(ScaleSpec::Named(n)) if n == "quick" => CorpusScale::quick(),
        Some(ScaleSpec::Named(n)) => return Err(config_err(format!("unknown corpus scale `{n}`"))),
        Some(ScaleSpec::Custom(c)) => *c,
    };
    let suites = run_all(&scale, s.seed());
    let mut table = Table::new("suite,instances,checks,violations,inconclusive,failures");
    for o in &suites {
        table.push(format!(
            "{},{},{},{},{},{}",
            o.name,
            o.instances,
            o.checks,
            o.violations,
            o.inconclusive,
            o.failures.len()
        ));
    }
    let failed: Vec<&str> = suites.iter().filter(|o| !o.ok()).map(|o| o.name.as_str()).collect();
    Ok(Results {
        summary: if failed.is_empty() {
            format!("{} suites, all checks pass", suites.len())
        } else {
            format!("failing suites: {}", failed.join(", "))
        },
        violation: suites.iter().any(|o| !o.ok() || o.violations > 0),
        json: serde_json::to_value(&suites).expect("suites"),
        tables: vec![(String::new(), table)],
        extra: vec![],
    })
}

fn header_block(hash: &str, s: &Scenario) -> String {
    let mut h = format!("# command: {}\n# config_hash: {hash}\n", s.command.name());
    match s.seed {
        Some(v) => {
            let _ = writeln!(h, "# seed: {v}");
        }
        None => h.push_str("# seed: none\n"),
    }
    let _ = writeln!(h, "# units: {}", if s.units == Units::Bits { "bits" } else { "nats" });
    h
}

fn envelope(hash: &str, s: &Scenario, results: Value) -> String {
    let doc = json!({"config_hash": hash, "seed": s.seed, "results": results});
    let mut text = serde_json::to_string_pretty(&doc).expect("document serializes");
    text.push('\n');
    text
}

/// Runs one scenario. `canonical` is the config document returned by
/// [`Scenario::parse`] and feeds the config hash.
pub fn run(s: &Scenario, canonical: &Value, format: Format) -> Result<Outcome> {
    if s.estimator.method == Method::MonteCarlo && s.seed.is_none() {
        return Err(config_err("`seed` is required for Monte Carlo estimation"));
    }
    let res = match s.command {
        Command::MmseScan => run_mmse_scan(s),
        Command::Crossing => run_crossing(s),
        Command::EigCrossing => run_eig_crossing(s),
        Command::Mi => run_mi(s),
        Command::Epi => run_epi(s),
        Command::Match => run_match(s),
        Command::BcRegion => run_bc_region(s),
        Command::BcWitness => run_bc_witness(s),
        Command::Fisher => run_fisher(s),
        Command::Corpus => run_corpus(s),
    }?;
    let hash = config_hash(canonical);
    let base = s.command.name();
    let mut artifacts = Vec::new();
    match format {
        Format::Json => artifacts.push(Artifact {
            name: format!("{base}.json"),
            contents: envelope(&hash, s, res.json),
        }),
        Format::Csv => {
            for (suffix, table) in res.tables {
                let mut text = header_block(&hash, s);
                text.push_str(&table.header);
                text.push('\n');
                for r in table.rows {
                    text.push_str(&r);
                    text.push('\n');
                }
                artifacts.push(Artifact {
                    name: format!("{base}{suffix}.csv"),
                    contents: text,
                });
            }
        }
    }
    for (name, value) in res.extra {
        artifacts.push(Artifact {
            name: format!("{name}.json"),
            contents: envelope(&hash, s, value),
        });
    }
    Ok(Outcome {
        artifacts,
        violation: res.violation,
        summary: res.summary,
    })
}

/// Writes artifacts into `dir`, creating it if needed.
pub fn write_artifacts(dir: &Path, artifacts: &[Artifact]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    artifacts
        .iter()
        .map(|a| {
            let p = dir.join(&a.name);
            std::fs::write(&p, &a.contents)?;
            Ok(p)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> (Scenario, Value) {
        Scenario::parse(text, Path::new(".")).unwrap()
    }

    #[test]
    fn seed_is_mandatory() {
        let err = Scenario::parse(r#"{"command": "mi"}"#, Path::new(".")).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert!(err.to_string().contains("seed"));
    }

    #[test]
    fn unknown_fields_rejected() {
        let err = Scenario::parse(r#"{"command": "mi", "seed": 1, "sed": 2}"#, Path::new(".")).unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn hash_ignores_key_order() {
        let (_, a) = parse(r#"{"command": "corpus", "seed": 4, "units": "bits"}"#);
        let (_, b) = parse(r#"{"units": "bits", "seed": 4, "command": "corpus"}"#);
        assert_eq!(config_hash(&a), config_hash(&b));
        let (_, c) = parse(r#"{"units": "bits", "seed": 5, "command": "corpus"}"#);
        assert_ne!(config_hash(&a), config_hash(&c));
    }

    #[test]
    fn mi_gaussian_three_way() {
        let (s, v) = parse(
            r#"{"command": "mi", "seed": 3,
                "estimator": {"samples": 20000},
                "input": {"dim": 2, "components": [{"w": 1.0, "mean": [0.0, 0.0], "cov": [[1.0, 0.3], [0.3, 0.8]]}]},
                "path": {"dim": 2, "snr_max": 4.0},
                "params": {"t": 1.0}}"#,
        );
        let out = run(&s, &v, Format::Json).unwrap();
        let doc: Value = serde_json::from_str(&out.artifacts[0].contents).unwrap();
        assert_eq!(doc["results"]["estimates"].as_array().unwrap().len(), 3);
        assert_eq!(doc["results"]["agree"], Value::Bool(true));
        assert_eq!(doc["seed"], json!(3));
    }

    #[test]
    fn bits_scale_rates() {
        let base = r#"{"command": "bc-region", "seed": 1, "params": {"random_points": 3,
            "bc": {"users": [{"gains": [1.0, 0.5]}, {"gains": [2.0, 1.0]}], "constraint": {"per_antenna": [1.0, 2.0]}}}"#;
        let (s, v) = parse(&format!("{base}}}"));
        let (sb, vb) = parse(&format!("{base}, \"units\": \"bits\"}}"));
        let a: Value = serde_json::from_str(&run(&s, &v, Format::Json).unwrap().artifacts[0].contents).unwrap();
        let b: Value = serde_json::from_str(&run(&sb, &vb, Format::Json).unwrap().artifacts[0].contents).unwrap();
        let ra = a["results"]["points"][0]["rates"][0].as_f64().unwrap();
        let rb = b["results"]["points"][0]["rates"][0].as_f64().unwrap();
        assert!((rb - ra / std::f64::consts::LN_2).abs() < 1e-12);
    }
}
