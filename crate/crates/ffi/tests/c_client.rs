//! Compiles and runs a small C program against the static library.

use std::path::PathBuf;
use std::process::Command;

const PROGRAM: &str = r#"
#include <math.h>
#include <stdio.h>
#include "mscbf.h"

#define CHECK(cond) do { if (!(cond)) { fprintf(stderr, "line %d\n", __LINE__); return 1; } } while (0)

int main(void) {
    MscbfBasis *b = NULL;
    CHECK(mscbf_basis_new(4, 24, 3, &b) == MSCBF_STATUS_OK);
    CHECK(mscbf_basis_len(b) == 80);

    MscbfField *u = NULL, *g = NULL;
    CHECK(mscbf_field_unit_mode(b, 1, 1, &u) == MSCBF_STATUS_OK);
    CHECK(mscbf_apply_g(u, 1.0, 0.0, 3.0, &g) == MSCBF_STATUS_OK);
    double x = 0.0;
    CHECK(mscbf_field_inner(g, u, &x) == MSCBF_STATUS_OK);
    CHECK(fabs(x - 2.0) < 1e-12);

    MscbfBasis *bad = NULL;
    CHECK(mscbf_basis_new(4, 8, 3, &bad) == MSCBF_STATUS_DEALIAS);
    char msg[128];
    CHECK(mscbf_last_error_message(msg, sizeof msg) > 0);

    MscbfParams p = {1.0, 0.0, 3.0, 0.1, 0.45, 0.3};
    MscbfGaps gaps;
    CHECK(mscbf_validate(&p, &gaps) == MSCBF_STATUS_DISSIPATIVITY_GAP);
    CHECK(gaps.admissible == 0);

    mscbf_field_free(g);
    mscbf_field_free(u);
    mscbf_basis_free(b);
    printf("ok %s\n", mscbf_version());
    return 0;
}
"#;

fn static_lib() -> Option<PathBuf> {
    let exe = std::env::current_exe().ok()?;
    let profile_dir = exe.parent()?.parent()?;
    [
        profile_dir.join("libmscbf_ffi.a"),
        profile_dir.join("deps/libmscbf_ffi.a"),
    ]
    .into_iter()
    .find(|p| p.exists())
}

#[test]
fn c_program_links_and_runs() {
    let Some(lib) = static_lib() else {
        eprintln!("static library not built; skipping");
        return;
    };
    if Command::new("cc").arg("--version").output().is_err() {
        eprintln!("no C compiler; skipping");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("client.c");
    let bin = dir.path().join("client");
    std::fs::write(&src, PROGRAM).unwrap();
    let include = concat!(env!("CARGO_MANIFEST_DIR"), "/include");
    let out = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-I", include])
        .arg(&src)
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&bin)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let run = Command::new(&bin).output().unwrap();
    assert!(
        run.status.success(),
        "{}",
        String::from_utf8_lossy(&run.stderr)
    );
    assert!(String::from_utf8_lossy(&run.stdout).starts_with("ok "));
}
