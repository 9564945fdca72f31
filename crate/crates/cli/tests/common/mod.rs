#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

/// Preset runs pinned by golden files: (golden name, preset, subcommand).
pub const GOLDEN_CASES: &[(&str, &str, &str)] = &[
    ("fig1-n2-20.theta-sweep.csv", "fig1-n2-20", "theta-sweep"),
    ("fig1-n2-30.theta-sweep.csv", "fig1-n2-30", "theta-sweep"),
    ("fig1-n2-60.theta-sweep.csv", "fig1-n2-60", "theta-sweep"),
    ("fig2-activity.activity-scan.csv", "fig2-activity", "activity-scan"),
    ("fig3-ion.ion.csv", "fig3-ion", "ion"),
    ("low-occupation.branch.csv", "low-occupation", "branch"),
    ("low-occupation.verify.csv", "low-occupation", "verify"),
    ("low-occupation.traj-dump.csv", "low-occupation", "traj-dump"),
    ("low-occupation.mc.csv", "low-occupation", "mc"),
    ("single-bath-net.theta-sweep.csv", "single-bath-net", "theta-sweep"),
    ("driven-poisson.theta-sweep.csv", "driven-poisson", "theta-sweep"),
];

pub fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").canonicalize().unwrap()
}

pub fn preset(name: &str) -> PathBuf {
    workspace_root().join("presets").join(format!("{name}.json"))
}

pub fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

pub fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qho-fcs")).args(args).output().expect("binary runs")
}

pub fn run_preset(preset_name: &str, command: &str, extra: &[&str]) -> Output {
    let config = preset(preset_name);
    let mut args = vec!["--config", config.to_str().unwrap(), command];
    args.extend_from_slice(extra);
    run(&args)
}

/// Compares a preset run against its golden file, or rewrites the file when
/// `update` is set.
pub fn check_golden(name: &str, preset_name: &str, command: &str, update: bool) -> Result<(), String> {
    let out = run_preset(preset_name, command, &[]);
    if !out.status.success() {
        return Err(format!("{command} on {preset_name} exited with {:?}", out.status.code()));
    }
    let path = golden(name);
    if update {
        std::fs::write(&path, &out.stdout).map_err(|e| e.to_string())?;
        return Ok(());
    }
    let expected = std::fs::read(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    if expected == out.stdout {
        Ok(())
    } else {
        Err(format!("{name} differs from the golden file"))
    }
}
