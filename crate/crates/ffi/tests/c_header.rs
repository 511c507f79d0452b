use std::path::{Path, PathBuf};
use std::process::Command;

fn manifest_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(manifest_dir().join("include/respen.h")).unwrap();
    let src = std::fs::read_to_string(manifest_dir().join("src/lib.rs")).unwrap();
    let exports: Vec<&str> = src
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(exports.len() > 10);
    for name in exports {
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
    }
}

fn staticlib() -> Option<PathBuf> {
    let exe = std::env::current_exe().ok()?;
    let profile_dir = exe.parent()?.parent()?;
    let lib = profile_dir.join("librespen_ffi.a");
    lib.exists().then_some(lib)
}

fn have_cc() -> bool {
    Command::new("cc").arg("--version").output().map(|o| o.status.success()).unwrap_or(false)
}

#[test]
fn c_program_links_and_runs() {
    let (Some(lib), true) = (staticlib(), have_cc()) else {
        eprintln!("skipping: no C compiler or static library");
        return;
    };
    let dir = std::env::temp_dir().join(format!("respen-ffi-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let src = dir.join("smoke.c");
    std::fs::write(&src, C_SMOKE).unwrap();
    let bin = dir.join("smoke");
    let include = manifest_dir().join("include");
    let status = Command::new("cc")
        .arg(&src)
        .arg(format!("-I{}", include.display()))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success(), "C compilation failed");
    let out = Command::new(&bin).output().unwrap();
    let _ = std::fs::remove_dir_all(Path::new(&dir));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "ok");
}

const C_SMOKE: &str = r#"
#include <math.h>
#include <stdio.h>
#include "respen.h"

int main(void) {
    double x[4] = {0.1, 0.3, 0.5, 0.7};
    double y[4] = {0.0, 0.0, 2.0, 2.0};
    RespenDataset *d = NULL;
    RespenPartition *p = NULL;
    if (respen_dataset_new(x, y, 4, &d) != RESPEN_STATUS_OK) return 1;
    if (respen_partition_regular(1, &p) != RESPEN_STATUS_OK) return 2;
    RespenScheme loo = {RESPEN_SCHEME_KIND_LOO, 0.0};
    double pen = 0.0;
    if (respen_rp_penalty(d, p, loo, 3.0, &pen) != RESPEN_STATUS_OK) return 3;
    if (fabs(pen - 2.0 / 3.0) > 1e-15) return 4;
    double bad = 0.0;
    if (respen_einv_poisson(-1.0, &bad) != RESPEN_STATUS_INVALID_ARGUMENT) return 5;
    if (respen_last_error() == NULL) return 6;
    respen_partition_free(p);
    respen_dataset_free(d);
    printf("ok\n");
    return 0;
}
"#;
