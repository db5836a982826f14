//! Compiles a small C program against the generated header and the static
//! library. Skipped when no C compiler is on the path.

use std::path::{Path, PathBuf};
use std::process::Command;

const PROGRAM: &str = r#"
#include <stdio.h>
#include <string.h>
#include "mimo_crossing.h"

int main(void) {
    McxInput *in = NULL;
    McxPath *path = NULL;
    double gain = 1.0, v = 0.0, e = 0.0;
    if (mcx_input_bpsk(1, &in) != MCX_OK) return 1;
    if (mcx_mmse_matrix(in, &gain, 20000, 3, &v, &e) != MCX_OK) return 2;
    if (v < 0.44 || v > 0.46) return 3;
    if (mcx_path_snr(1, 0.0 - 1.0, &path) == MCX_OK) return 4;
    if (strlen(mcx_last_error()) == 0) return 5;
    mcx_input_free(in);
    printf("%.6f\n", v);
    return 0;
}
"#;

/// The static library sits next to the test binary in `target/<profile>/deps`,
/// or one level up after a plain `cargo build`.
fn static_lib() -> Option<PathBuf> {
    let exe = std::env::current_exe().ok()?;
    let deps = exe.parent()?;
    [deps, deps.parent()?]
        .iter()
        .map(|d| d.join("libmimo_crossing_ffi.a"))
        .find(|p| p.exists())
}

#[test]
fn c_program_links_against_the_static_library() {
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    if Command::new(&cc).arg("--version").output().is_err() {
        eprintln!("no C compiler; skipping");
        return;
    }
    let lib = static_lib().expect("libmimo_crossing_ffi.a next to the test binary");
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("smoke.c");
    let exe = tmp.path().join("smoke");
    std::fs::write(&src, PROGRAM).unwrap();
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let out = Command::new(&cc)
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(&include)
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = Command::new(&exe).output().unwrap();
    assert!(run.status.success(), "exit {:?}", run.status.code());
    let v: f64 = String::from_utf8_lossy(&run.stdout).trim().parse().unwrap();
    assert!((v - 0.4496).abs() < 0.01);
}
