use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn hopsim(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hopsim"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("HOPSIM_SEED")
        .output()
        .expect("binary runs")
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn read_points(path: &Path) -> Vec<(f64, f64)> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| {
            let (x, y) = l.split_once(',').unwrap();
            (x.parse().unwrap(), y.parse().unwrap())
        })
        .collect()
}

#[test]
fn ccdf_repeats_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let args = [
        "ccdf",
        "--trials",
        "100",
        "--seed",
        "7",
        "--beta-steps",
        "5",
    ];
    assert!(hopsim(&args, &a).status.success());
    assert!(hopsim(&args, &b).status.success());
    let ta = fs::read_to_string(a.join("ccdf.csv")).unwrap();
    assert_eq!(ta, fs::read_to_string(b.join("ccdf.csv")).unwrap());
    let lines: Vec<&str> = ta.lines().collect();
    assert_eq!(lines[0], "beta,ccdf,stderr");
    assert_eq!(lines.len(), 6);
    assert!(lines[1].starts_with("1.0000000000000001e-1,"));
}

#[test]
fn manifest_lists_outputs_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let args = [
        "ccdf",
        "--trials",
        "100",
        "--seed",
        "11",
        "--beta-steps",
        "3",
    ];
    assert!(hopsim(&args, &first).status.success());
    let m = manifest(&first);
    assert_eq!(m["master_seed"], 11);
    assert_eq!(m["outputs"].as_array().unwrap().len(), 1);
    assert_eq!(m["outputs"][0]["file"], "ccdf.csv");

    // rerun from the embedded configuration alone
    let cfg = dir.path().join("resolved.cfg");
    fs::write(&cfg, m["config"].as_str().unwrap()).unwrap();
    let second = dir.path().join("second");
    let out = hopsim(
        &[
            "ccdf",
            "--config",
            cfg.to_str().unwrap(),
            "--beta-steps",
            "3",
        ],
        &second,
    );
    assert!(out.status.success());
    assert_eq!(manifest(&second)["outputs"], m["outputs"]);
}

#[test]
fn seed_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let flag = dir.path().join("flag");
    let env = dir.path().join("env");
    assert!(hopsim(
        &[
            "ccdf",
            "--trials",
            "100",
            "--seed",
            "5",
            "--beta-steps",
            "3"
        ],
        &flag
    )
    .status
    .success());
    let out = Command::new(env!("CARGO_BIN_EXE_hopsim"))
        .args(["ccdf", "--trials", "100", "--beta-steps", "3", "--out"])
        .arg(&env)
        .env("HOPSIM_SEED", "5")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(
        fs::read(flag.join("ccdf.csv")).unwrap(),
        fs::read(env.join("ccdf.csv")).unwrap()
    );
}

#[test]
fn overrides_beat_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# hops per codeword\nL = 1\nlambda_bs = 0.1\n").unwrap();
    let out = dir.path().join("o");
    let res = hopsim(
        &[
            "topology",
            "--config",
            cfg.to_str().unwrap(),
            "--set",
            "L=4",
        ],
        &out,
    );
    assert!(res.status.success());
    let text = manifest(&out)["config"].as_str().unwrap().to_string();
    assert!(text.contains("L = 4\n"));
    assert!(text.contains("lambda_bs = 0.1\n"));
}

#[test]
fn topology_respects_packing_distance() {
    let dir = tempfile::tempdir().unwrap();
    assert!(hopsim(&["topology", "--seed", "3"], dir.path())
        .status
        .success());
    let bs = read_points(&dir.path().join("bs.csv"));
    assert_eq!(bs[0], (0.0, 0.0));
    for i in 0..bs.len() {
        for j in i + 1..bs.len() {
            let d = ((bs[i].0 - bs[j].0).powi(2) + (bs[i].1 - bs[j].1).powi(2)).sqrt();
            assert!(d >= 1.0, "stations {i} and {j} are {d} apart");
        }
    }
    let wedge = read_points(&dir.path().join("sector_wedge.csv"));
    assert_eq!(wedge.first(), Some(&(0.0, 0.0)));
    assert_eq!(wedge.last(), Some(&(0.0, 0.0)));
    for (name, r) in [("los_boundary.csv", 2.0), ("nlos_boundary.csv", 10.0)] {
        let pts = read_points(&dir.path().join(name));
        assert!(pts
            .iter()
            .all(|(x, y)| ((x * x + y * y).sqrt() - r).abs() < 1e-12));
    }
    let m = manifest(dir.path());
    assert_eq!(m["outputs"].as_array().unwrap().len(), 4);
}

#[test]
fn ase_csv_schema() {
    let dir = tempfile::tempdir().unwrap();
    let out = hopsim(
        &[
            "ase",
            "--trials",
            "100",
            "--lambda-bs",
            "0.2,0.1",
            "--beta-min",
            "1",
            "--beta-max",
            "2",
            "--beta-steps",
            "2",
            "--mode",
            "semi_analytic",
            "--set",
            "area_samples=2000",
            "--set",
            "ex_samples=500",
        ],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = fs::read_to_string(dir.path().join("ase.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "lambda_bs,beta,ase,stderr");
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("1.0000000000000001e-1,1.0000000000000000e0,"));
    assert_eq!(manifest(dir.path())["run"]["mode"], "semi_analytic");
}

#[test]
fn validate_reports_each_case() {
    let dir = tempfile::tempdir().unwrap();
    let out = hopsim(
        &[
            "validate",
            "--cases",
            "10",
            "--seed",
            "1",
            "--set",
            "oracle_draws=10000",
        ],
        dir.path(),
    );
    let code = out.status.code().unwrap();
    assert!(code == 0 || code == 3);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("case")).count(), 10);
    let csv = fs::read_to_string(dir.path().join("validate.csv")).unwrap();
    assert_eq!(csv.lines().count(), 11);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let code = |args: &[&str]| hopsim(args, dir.path()).status.code().unwrap();
    assert_eq!(code(&["ccdf", "--set", "n_ms_elements=15"]), 2);
    assert_eq!(code(&["ccdf", "--set", "no_such_key=1"]), 2);
    assert_eq!(code(&["ccdf", "--trials", "10"]), 2);
    assert_eq!(code(&["topology", "--set", "lambda_bs=5"]), 4);
    assert_eq!(code(&["ccdf", "--beta-min", "0"]), 2);
    let missing = dir.path().join("missing.cfg");
    assert_eq!(
        code(&["topology", "--config", missing.to_str().unwrap()]),
        2
    );
}
