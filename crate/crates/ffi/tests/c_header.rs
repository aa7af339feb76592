//! Compiles and runs a C program against the generated header and the shared library.

use std::path::{Path, PathBuf};
use std::process::Command;

const PROGRAM: &str = r#"
#include <stdio.h>
#include <math.h>
#include "fracnodal.h"

int main(void) {
    FnodParams *p = NULL;
    FnodExponents e;
    if (fnod_params_new(0.25, 1.0, 1.0, 1.0, &p) != FNOD_STATUS_OK) return 1;
    if (fnod_params_exponents(p, &e) != FNOD_STATUS_OK) return 2;
    if (fabs(e.k_q - 0.5) > 1e-14 || e.beta_q != 0) return 3;
    FnodProfile *prof = NULL;
    if (fnod_profile_antisymmetric(p, &prof) != FNOD_STATUS_OK) return 4;
    double phi, w;
    if (fnod_profile_eval(prof, 0.0, &phi, &w) != FNOD_STATUS_OK) return 5;
    fnod_profile_free(prof);
    fnod_params_free(p);
    if (fnod_params_new(2.0, 1.0, 1.0, 1.0, &p) != FNOD_STATUS_INVALID_ARGUMENT) return 6;
    char msg[256];
    size_t need = fnod_last_error(msg, sizeof msg);
    if (need == 0 || need > sizeof msg) return 7;
    printf("%s %.3f %s\n", fnod_version(), phi, msg);
    return 0;
}
"#;

fn target_dir() -> PathBuf {
    // tests run from target/<profile>/deps
    std::env::current_exe()
        .unwrap()
        .parent()
        .unwrap()
        .parent()
        .unwrap()
        .to_path_buf()
}

#[test]
fn c_program_links_and_runs() {
    let dir = target_dir();
    assert!(
        dir.join("libfracnodal_ffi.so").exists(),
        "shared library missing in {}",
        dir.display()
    );
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("main.c");
    std::fs::write(&src, PROGRAM).unwrap();
    let exe = tmp.path().join("main");
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let status = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-o"])
        .arg(&exe)
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg("-L")
        .arg(&dir)
        .arg(format!("-Wl,-rpath,{}", dir.display()))
        .args(["-lfracnodal_ffi", "-lm"])
        .status()
        .expect("cc available");
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    let line = String::from_utf8(out.stdout).unwrap();
    assert!(line.starts_with(env!("CARGO_PKG_VERSION")), "{line}");
}
