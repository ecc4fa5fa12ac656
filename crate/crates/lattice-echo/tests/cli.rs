use std::path::Path;
use std::process::{Command, Output};

use lattice_echo::core::{exp_sum_grid, threshold_set, FrequencySet, Realization, RegularGrid, Sequential};
use lattice_echo::io::read_field;
use lattice_echo::{parse_config, RunConfig};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_lattice-echo"));
    c.env_remove("LATTICE_ECHO_WORKERS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn defaults_round_trip() {
    let out = run(&["defaults"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let cfg = parse_config(&text).unwrap();
    assert_eq!(cfg, RunConfig::default());
    assert_eq!(cfg.to_text(), text);
}

#[test]
fn unusual_config_round_trips() {
    let text = "\
lattice = [[2, 0.5], [0, 0.5]]
noise.kind = uniform_cell
noise.cell = [[2, 0.5], [0, 0.5]]
offset = [0.25, -1]
seed = 42
box = [-1, 1.5]
spacing = 0.01
lambdas = [[0.5, 0], [0, 2]]
recover.target_radius = 2.0
";
    let cfg = parse_config(text).unwrap();
    let again = parse_config(&cfg.to_text()).unwrap();
    assert_eq!(cfg, again);
    assert_eq!(again.to_text(), cfg.to_text());
}

#[test]
fn scan_file_rethresholds_like_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_text = "seed = 3\nradius = 20\nbox = [-1.2, 1.2]\nspacing = 0.02\nbeta = 0.05\n";
    let cfg_path = write(dir.path(), "scan.cfg", cfg_text);
    let csv = dir.path().join("field.csv");
    let out = run(&["scan", "--config", &cfg_path, "--out", csv.to_str().unwrap(), "--workers", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let field = read_field(std::fs::File::open(&csv).unwrap()).unwrap();
    let from_file = threshold_set(&field, 0.05);

    let cfg = parse_config(cfg_text).unwrap();
    let real = Realization::generate(&cfg.lattice_spec(), &cfg.noise, &cfg.offset, 3, 20.0, &Sequential).unwrap();
    let grid = RegularGrid::integer_box(2, -1.2, 1.2, 0.02).unwrap();
    let direct = exp_sum_grid(&real, 20.0, &FrequencySet::Regular(grid), &Sequential).unwrap();
    assert_eq!(field.values, direct.values);
    assert_eq!(from_file, threshold_set(&direct, 0.05));
    assert!(from_file.len() >= 5);
}

#[test]
fn workers_do_not_change_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for workers in ["1", "3"] {
        let a = dir.path().join(format!("sim{workers}.csv"));
        let b = dir.path().join(format!("scan{workers}.csv"));
        for (cmd, path) in [("simulate", &a), ("scan", &b)] {
            let out = run(&[cmd, "--radius", "15", "--box", "-1,1", "--spacing", "0.05", "--workers", workers, "--out", path.to_str().unwrap()]);
            assert!(out.status.success());
        }
        files.push((std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap()));
    }
    assert_eq!(files[0], files[1]);
    // The env var is the fallback for the flag.
    let env = bin().args(["simulate", "--radius", "15"]).env("LATTICE_ECHO_WORKERS", "2").output().unwrap();
    assert_eq!(env.stdout, files[0].0);
}

#[test]
fn recover_writes_the_report_fields() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "small.cfg",
        "recover.r_detect = 40\nrecover.r_verify = 80\nbox = [-1.6, 1.6]\nbeta = 0.03\nseed = 2\n",
    );
    let out = run(&["recover", "--config", &cfg]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let mut keys: Vec<&str> = json.as_object().unwrap().keys().map(String::as_str).collect();
    keys.sort_unstable();
    let mut expected = vec![
        "dim", "dual_basis", "primal_basis", "offset", "dispersion", "beta", "R_detect", "R_verify", "peaks",
        "verified_count", "cloaked", "seed",
    ];
    expected.sort_unstable();
    assert_eq!(keys, expected);
    assert_eq!(json["seed"], 2);
    assert_eq!(json["cloaked"], false);
    let peak = &json["peaks"][0];
    for k in ["lambda", "re", "im", "radius"] {
        assert!(peak.get(k).is_some(), "{k}");
    }
}

#[test]
fn invalid_input_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    for text in ["colour = blue\n", "beta = 1.5\n", "noise.kind = gaussian\nnoise.a = -1\n", "lattice = [[1, 2], [2, 4]]\n", "seed = \n"] {
        let cfg = write(dir.path(), "bad.cfg", text);
        let out = run(&["simulate", "--config", &cfg]);
        assert_eq!(out.status.code(), Some(2), "{text:?}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(!out.stderr.is_empty());
    }
    let out = run(&["simulate", "--beta", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

/// Box noise of half-width 1/2 kills every dual point with a nonzero first
/// coordinate, so the visible peaks lie on a line.
#[test]
fn collinear_peaks_exit_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "line.cfg",
        "lattice = [[1, 0], [0, 2]]\nnoise.kind = uniform_box\nnoise.h = 0.5\nbox = [-1, 1]\nrecover.r_detect = 60\nrecover.r_verify = 80\n",
    );
    let out = run(&["recover", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn sweep_and_verify_lemmas_run() {
    let out = run(&["sweep", "--seed", "4"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().next(), Some("lambda_1,lambda_2,radius,re,im"));
    assert_eq!(text.lines().count(), 5);

    let out = run(&["verify-lemmas"]);
    assert!(out.status.success());
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(json["pass"], true);
}
