//! End-to-end checks of the binary: subcommands, exit-code categories,
//! artifact layout, and byte-level determinism across repeated runs.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_kinetic-mc"))
}

fn tmp_dir(tag: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("kinetic_mc_cli_{tag}_{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn read_sorted(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    names
}

#[test]
fn list_experiments_names_all_six() {
    let out = bin().arg("list-experiments").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["fig1", "fig2", "cons_energy_sigma0", "two_vertex", "d2_contraction", "perron"] {
        assert!(text.lines().any(|l| l == name), "missing {name}");
    }
}

#[test]
fn config_errors_exit_2() {
    let dir = tmp_dir("cfg2");
    let cfg = dir.join("bad.conf");
    std::fs::write(&cfg, "experiment = fig1\n[regime]\neps = 0.05\n").unwrap();
    let out = bin().arg("validate").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let msg = String::from_utf8(out.stderr).unwrap();
    assert!(msg.contains("not admissible"), "{msg}");
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn runtime_errors_exit_3() {
    let dir = tmp_dir("cfg3");
    let cfg = dir.join("reducible.conf");
    // A reducible transition matrix has no strongly connected equilibrium.
    std::fs::write(
        &cfg,
        "experiment = perron\n[graph]\nn = 2\np_matrix = 1,0;0,1\n",
    )
    .unwrap();
    let out = bin().arg("run").arg(&cfg).arg("--out").arg(dir.join("o")).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn env_seed_override_is_recorded() {
    let dir = tmp_dir("envseed");
    let cfg = dir.join("p.conf");
    std::fs::write(&cfg, "experiment = perron\nseed = 6\n").unwrap();
    let out = bin()
        .arg("run")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("o"))
        .env("KINETIC_MC_SEED", "123")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = std::fs::read_to_string(dir.join("o/manifest.json")).unwrap();
    assert!(manifest.contains("\"seed\": 123"), "seed override not applied");
    assert!(manifest.contains("\"seed_source\": \"env\""));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn small_fig1_artifacts_and_rerun_determinism() {
    let dir = tmp_dir("fig1");
    let cfg = dir.join("fig1.conf");
    std::fs::write(
        &cfg,
        "experiment = fig1\nseed = 10\nn_particles = 2000\nt_final = 0.2\n\
         [regime]\neps_list = 0.001\n[histogram]\nsnapshots = 0,0.1,0.15,0.2\n",
    )
    .unwrap();
    for sub in ["a", "b"] {
        let out = bin().arg("run").arg(&cfg).arg("--out").arg(dir.join(sub)).output().unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let names = read_sorted(&dir.join("a"));
    // 4 snapshot histograms + overlay + moments + manifest + timings.
    for expected in [
        "hist_eps1e-3_t0.csv",
        "hist_eps1e-3_t0.1.csv",
        "hist_eps1e-3_t0.15.csv",
        "hist_eps1e-3_t0.2.csv",
        "overlay_inverse_gamma.csv",
        "moments_eps1e-3.csv",
        "manifest.json",
        "timings.json",
    ] {
        assert!(names.contains(&expected.to_string()), "missing {expected} in {names:?}");
    }
    for name in &names {
        if name == "timings.json" {
            continue;
        }
        let a = std::fs::read(dir.join("a").join(name)).unwrap();
        let b = std::fs::read(dir.join("b").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
    std::fs::remove_dir_all(&dir).ok();
}
