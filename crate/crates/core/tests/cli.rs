use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use multiamc::dataset::load_dataset;
use multiamc::harness::Config;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_multiamc"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const TINY: &str = "
[dataset]
schemes = BPSK, QPSK
snr_grid_db = 10
n_antennas = 2
frame_len = 64
examples_per_cell = 8

[train]
arch = mvcnn
n_antennas = 2
batch_size = 8
max_epochs = 1
width_multiplier = 0.125
validation_fraction = 0
";

#[test]
fn shipped_configs_parse() {
    for name in ["desk.cfg", "full.cfg"] {
        let c = Config::load(configs().join(name)).unwrap();
        assert!(c.manifest.examples_per_cell > 0, "{name}");
    }
    let desk = Config::load(configs().join("desk.cfg")).unwrap();
    assert_eq!(desk, Config::default());
}

#[test]
fn generate_writes_a_loadable_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d.mamc");
    let o = run(&["generate", "--config", configs().join("desk.cfg").to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let d = load_dataset(&out).unwrap();
    assert_eq!(d.len(), 4 * 3 * 400);
}

#[test]
fn train_then_eval() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tiny.cfg");
    std::fs::write(&cfg, TINY).unwrap();
    let model = dir.path().join("m.bin");
    let cfg = cfg.to_str().unwrap();
    let o = run(&["train", "--config", cfg, "--out", model.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = run(&["eval", "--config", cfg, "--model", model.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("mvcnn N_r=2 accuracy"));
}

#[test]
fn missing_config_is_named() {
    let o = run(&["train", "--config", "/no/such/dir/x.cfg", "--out", "/tmp/never.bin"]);
    assert_eq!(o.status.code(), Some(1));
    let e = stderr(&o);
    assert!(e.contains("/no/such/dir/x.cfg"), "{e}");
    assert!(e.starts_with("error["), "{e}");
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn gradcheck_passes() {
    let o = run(&["gradcheck"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(!String::from_utf8_lossy(&o.stdout).contains("FAIL"));
}
