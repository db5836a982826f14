//! Acceptance criteria 1 to 12. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any criterion fails.

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use mimo_crossing::corpus::*;
use mimo_crossing::crossing::score_fisher;
use mimo_crossing::input::MixtureInput;
use mimo_crossing::linalg::diag_matrix;
use mimo_crossing::mmse::{mmse_matrix, EstimatorConfig, Method};
use nalgebra::{DMatrix, SymmetricEigen};

const SEED: u64 = 2026;
const GAMMAS: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 4.0];

struct Line {
    id: usize,
    title: &'static str,
    pass: bool,
    detail: String,
}

/// Probabilists' Gauss–Hermite rule from the eigen-decomposition of the
/// Jacobi matrix of the Hermite recurrence.
fn golub_welsch(order: usize) -> Vec<(f64, f64)> {
    let mut j = DMatrix::<f64>::zeros(order, order);
    for k in 1..order {
        let b = (k as f64).sqrt();
        j[(k, k - 1)] = b;
        j[(k - 1, k)] = b;
    }
    let eig = SymmetricEigen::new(j);
    (0..order)
        .map(|k| (eig.eigenvalues[k], eig.eigenvectors[(0, k)].powi(2)))
        .collect()
}

/// `1 − E[tanh(γ + √γ·Z)]` and its order-halving error.
fn bpsk_oracle(gamma: f64) -> (f64, f64) {
    let rule = |order| -> f64 {
        1.0 - golub_welsch(order)
            .iter()
            .map(|(z, w)| w * (gamma + gamma.sqrt() * z).tanh())
            .sum::<f64>()
    };
    let v = rule(64);
    (v, (v - rule(32)).abs())
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t0 = Instant::now();
    let v = f();
    (v, t0.elapsed())
}

fn budget(elapsed: Duration, limit_s: u64) -> (bool, String) {
    (elapsed.as_secs_f64() <= limit_s as f64, format!("{:.1} s of {limit_s} s", elapsed.as_secs_f64()))
}

fn suite_detail(suites: &[&SuiteOutcome]) -> String {
    suites
        .iter()
        .map(|s| {
            let mut d = format!(
                "{}: {} instances, {} checks, {} violations, {} inconclusive",
                s.name,
                s.instances,
                s.checks,
                s.violations,
                s.inconclusive
            );
            if !s.failures.is_empty() {
                d.push_str(&format!(", first failure: {}", s.failures[0]));
            }
            d
        })
        .collect::<Vec<_>>()
        .join("; ")
}

struct Suites {
    gaussian: (SuiteOutcome, Duration),
    weighted: (SuiteOutcome, Duration),
    diagonal: (SuiteOutcome, Duration),
    eigen: ((SuiteOutcome, SuiteOutcome), Duration),
    derivative: (SuiteOutcome, Duration),
    mi: (SuiteOutcome, Duration),
    epi: (SuiteOutcome, Duration),
    matcher: ((SuiteOutcome, SuiteOutcome), Duration),
    bc: (SuiteOutcome, Duration),
    fisher: (SuiteOutcome, Duration),
    bpsk: (Vec<BpskPoint>, Duration),
}

struct BpskPoint {
    gamma: f64,
    oracle: (f64, f64),
    mc: (f64, f64),
    j_score: (f64, f64),
}

fn bpsk_points() -> Vec<BpskPoint> {
    let bpsk = MixtureInput::bpsk();
    GAMMAS
        .iter()
        .enumerate()
        .map(|(k, &gamma)| {
            let h = diag_matrix(&[gamma.sqrt()]);
            let cfg = EstimatorConfig::monte_carlo(200_000, SEED + k as u64).with_method(Method::MonteCarlo);
            let est = mmse_matrix(&bpsk, &h, &cfg).expect("bpsk mmse");
            let (j, je) = score_fisher(&bpsk, &h, &cfg).expect("score fisher");
            BpskPoint {
                gamma,
                oracle: bpsk_oracle(gamma),
                mc: (est.matrix.get(0, 0), est.std_err.get(0, 0)),
                j_score: (j.get(0, 0), je.get(0, 0)),
            }
        })
        .collect()
}

fn run_suites(scale: &CorpusScale) -> Suites {
    Suites {
        gaussian: timed(|| gaussian_suite(scale, SEED)),
        bpsk: timed(bpsk_points),
        weighted: timed(|| weighted_suite(scale, SEED)),
        diagonal: timed(|| diagonal_suite(scale, SEED)),
        eigen: timed(|| eigen_suite(scale, SEED)),
        derivative: timed(|| derivative_suite(scale, SEED)),
        mi: timed(|| mi_suite(scale, SEED)),
        epi: timed(|| epi_suite(scale, SEED)),
        matcher: timed(|| matcher_suite(scale, SEED)),
        bc: timed(|| bc_suite(scale, SEED)),
        fisher: timed(|| fisher_suite(scale, SEED)),
    }
}

fn fingerprints(s: &Suites) -> Vec<String> {
    let mut v: Vec<String> = [
        &s.gaussian.0,
        &s.weighted.0,
        &s.diagonal.0,
        &s.eigen.0 .0,
        &s.eigen.0 .1,
        &s.derivative.0,
        &s.mi.0,
        &s.epi.0,
        &s.matcher.0 .0,
        &s.matcher.0 .1,
        &s.bc.0,
        &s.fisher.0,
    ]
    .iter()
    .map(|o| format!("{} {}", o.name, o.fingerprint()))
    .collect();
    v.extend(s.bpsk.0.iter().map(|p| {
        format!(
            "bpsk {} {:016x} {:016x} {:016x} {:016x}",
            p.gamma,
            p.mc.0.to_bits(),
            p.mc.1.to_bits(),
            p.j_score.0.to_bits(),
            p.j_score.1.to_bits()
        )
    }));
    v
}

fn criteria(s: &Suites) -> Vec<Line> {
    let mut lines = Vec::new();
    let mut push = |id, title, pass, detail: String| lines.push(Line { id, title, pass, detail });

    let (o, t) = &s.gaussian;
    let (in_time, tm) = budget(*t, 60);
    push(1, "Gaussian closed-form equivalence", o.ok() && in_time, format!("{tm}; {}", suite_detail(&[o])));

    let (pts, t) = &s.bpsk;
    let (in_time, tm) = budget(*t, 10);
    let mut worst: f64 = 0.0;
    let bpsk_ok = pts.iter().all(|p| {
        let z = (p.mc.0 - p.oracle.0).abs() / p.mc.1.hypot(p.oracle.1);
        worst = worst.max(z);
        z <= 3.0
    });
    push(2, "BPSK quadrature oracle", bpsk_ok && in_time, format!("{tm}; worst |MC − oracle| = {worst:.2} combined errors"));

    let (o, t) = &s.weighted;
    let (in_time, tm) = budget(*t, 15 * 60);
    push(3, "weighted-trace single crossing", o.ok() && o.violations == 0 && in_time, format!("{tm}; {}", suite_detail(&[o])));

    let ((eig, _), te) = &s.eigen;
    let (diag, td) = &s.diagonal;
    let (in_time, tm) = budget(*td + *te, 30 * 60);
    push(
        4,
        "per-diagonal and per-eigenvalue single crossing",
        diag.ok() && eig.ok() && diag.violations == 0 && eig.violations == 0 && in_time,
        format!("{tm}; {}", suite_detail(&[diag, eig])),
    );

    let ((_, signs), _) = &s.eigen;
    push(5, "B·Q and Q eigenvalue sign relation", signs.ok(), suite_detail(&[signs]));

    let (o, t) = &s.derivative;
    let (in_time, tm) = budget(*t, 5 * 60);
    push(6, "derivative lower bound", o.ok() && in_time, format!("{tm}; {}", suite_detail(&[o])));

    let (o, t) = &s.mi;
    let (in_time, tm) = budget(*t, 10 * 60);
    push(7, "three-way mutual information agreement", o.ok() && in_time, format!("{tm}; {}", suite_detail(&[o])));

    let (o, t) = &s.epi;
    let (in_time, tm) = budget(*t, 10 * 60);
    push(8, "vector EPI", o.ok() && in_time, format!("{tm}; {}", suite_detail(&[o])));

    let ((general, independent), t) = &s.matcher;
    let (in_time, tm) = budget(*t, 15 * 60);
    push(
        9,
        "Gaussian matchers",
        general.ok() && independent.ok() && general.inconclusive == 0 && in_time,
        format!("{tm}; {}", suite_detail(&[general, independent])),
    );

    let (o, t) = &s.bc;
    let (in_time, tm) = budget(*t, 20 * 60);
    push(10, "broadcast regions", o.ok() && in_time, format!("{tm}; {}", suite_detail(&[o])));

    let (o, t) = &s.fisher;
    let (in_time, tm) = budget(*t + s.bpsk.1, 5 * 60);
    let mut worst: f64 = 0.0;
    let score_ok = s.bpsk.0.iter().all(|p| {
        let j = 1.0 - p.gamma * p.oracle.0;
        let z = (p.j_score.0 - j).abs() / p.j_score.1.hypot(p.gamma * p.oracle.1);
        worst = worst.max(z);
        z <= 3.0
    });
    push(
        11,
        "Fisher information identities",
        o.ok() && score_ok && in_time,
        format!("{tm}; BPSK score oracle worst {worst:.2} errors; {}", suite_detail(&[o])),
    );
    lines
}

fn pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("thread pool")
        .install(f)
}

/// Runs every shipped config through the binary with one and with three
/// worker threads and compares the output trees byte for byte.
fn cli_determinism() -> Result<usize, String> {
    let bin = env!("CARGO_BIN_EXE_mimo-crossing");
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut entries: Vec<_> = std::fs::read_dir(&configs)
        .map_err(|e| format!("{}: {e}", configs.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    entries.sort();
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut runs = 0;
    for cfg in &entries {
        let text = std::fs::read_to_string(cfg).map_err(|e| e.to_string())?;
        if !text.contains("\"command\"") {
            continue;
        }
        let name = cfg.file_stem().unwrap().to_string_lossy().into_owned();
        let mut outputs = Vec::new();
        for threads in ["1", "3"] {
            let dir = tmp.path().join(format!("{name}-{threads}"));
            let status = Command::new(bin)
                .args(["--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap(), "--threads", threads])
                .output()
                .map_err(|e| e.to_string())?;
            if !matches!(status.status.code(), Some(0) | Some(3)) {
                return Err(format!("{name}: exit {:?}: {}", status.status.code(), String::from_utf8_lossy(&status.stderr)));
            }
            let mut files: Vec<_> = std::fs::read_dir(&dir)
                .map_err(|e| e.to_string())?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .collect();
            files.sort();
            let contents: Vec<(String, Vec<u8>)> = files
                .iter()
                .map(|f| (f.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(f).unwrap_or_default()))
                .collect();
            outputs.push(contents);
        }
        if outputs[0] != outputs[1] {
            return Err(format!("{name}: outputs differ between 1 and 3 threads"));
        }
        runs += 1;
    }
    Ok(runs)
}

fn main() -> ExitCode {
    let scale = CorpusScale::full();
    eprintln!("acceptance: seed {SEED}, full-scale corpus");
    let first = pool(1, || run_suites(&scale));
    let mut lines = criteria(&first);

    let (second, t) = timed(|| pool(4, || run_suites(&scale)));
    let (a, b) = (fingerprints(&first), fingerprints(&second));
    let differing: Vec<&String> = a.iter().zip(&b).filter(|(x, y)| x != y).map(|(x, _)| x).collect();
    let cli = cli_determinism();
    let pass = differing.is_empty() && cli.is_ok();
    let detail = format!(
        "{} suite fingerprints compared between 1 and 4 threads ({:.1} s rerun), {} differ; CLI: {}",
        a.len(),
        t.as_secs_f64(),
        differing.len(),
        match &cli {
            Ok(n) => format!("{n} configs byte-identical at 1 and 3 threads"),
            Err(e) => e.clone(),
        }
    );
    lines.push(Line {
        id: 12,
        title: "determinism across thread counts",
        pass,
        detail,
    });

    let mut failed = 0;
    for l in &lines {
        println!("criterion {:>2} {}: {} ({})", l.id, l.title, if l.pass { "PASS" } else { "FAIL" }, l.detail);
        failed += usize::from(!l.pass);
    }
    println!("acceptance: {} passed, {failed} failed", lines.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
