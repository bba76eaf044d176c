use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn fairdg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fairdg"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn sweep_to(out: &Path, workers: &str) -> String {
    let o = fairdg(&[
        "sweep-norms",
        "--scenario",
        "recipient-opt-out",
        "--z",
        "12",
        "--norms",
        "[1,0,*,*;*,*,*,1]",
        "--workers",
        workers,
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    fs::read_to_string(out).unwrap()
}

#[test]
fn output_is_identical_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let one = sweep_to(&dir.path().join("w1.csv"), "1");
    let four = sweep_to(&dir.path().join("w4.csv"), "4");
    let eight = sweep_to(&dir.path().join("w8.csv"), "8");
    assert_eq!(one, four);
    assert_eq!(one, eight);
    let rows: Vec<&str> = one.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
    assert_eq!(rows.len(), 32);
    let labels: Vec<u8> = rows.iter().map(|r| r.split(',').next().unwrap().parse().unwrap()).collect();
    assert!(labels.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn resumed_run_equals_fresh_run() {
    let dir = tempfile::tempdir().unwrap();
    let fresh = sweep_to(&dir.path().join("fresh.csv"), "2");

    // Keep the header and a scattered subset of rows, the last one cut short.
    let partial = dir.path().join("partial.csv");
    let mut kept = String::new();
    let mut data = 0;
    for line in fresh.lines() {
        if line.starts_with('#') || line.starts_with("norm,") {
            kept.push_str(line);
            kept.push('\n');
        } else {
            data += 1;
            if data % 3 == 0 {
                kept.push_str(line);
                kept.push('\n');
            }
        }
    }
    let cut = fresh.lines().last().unwrap();
    kept.push_str(&cut[..cut.len() / 2]);
    fs::write(&partial, &kept).unwrap();

    assert_eq!(sweep_to(&partial, "3"), fresh);
    // A complete file is left untouched.
    assert_eq!(sweep_to(&partial, "1"), fresh);
}

#[test]
fn resume_refuses_file_from_other_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");
    sweep_to(&out, "1");
    let o = fairdg(&["sweep-norms", "--z", "13", "--norms", "165", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn param_sweep_is_sorted_by_grid_then_norm() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("p.csv");
    let o = fairdg(&[
        "sweep-param",
        "--scenario",
        "recipient-opt-out",
        "--z",
        "8",
        "--norms",
        "165,133",
        "--grid",
        "0:0.25:0.5",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("# schema=1\n"));
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "p2,norm,fairness,focus,phi_focus,ff_focus");
    let keys: Vec<String> = rows[1..].iter().map(|r| r.split(',').take(2).collect::<Vec<_>>().join(",")).collect();
    assert_eq!(keys, ["0,133", "0,165", "0.25,133", "0.25,165", "0.5,133", "0.5,165"]);
}

#[test]
fn config_file_values_are_echoed_and_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "scenario = \"dictator-opt-out\"\np1 = 0.25\nz = 9\nnorms = \"229\"\n").unwrap();
    let o = fairdg(&["sweep-norms", "--config", cfg.to_str().unwrap(), "--z", "7"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    for needle in ["# scenario=dictator-opt-out", "# p1=0.25", "# sigma=0.1", "# z=7", "# norms=229"] {
        assert!(text.contains(needle), "{needle} missing from\n{text}");
    }
    assert_eq!(text.lines().filter(|l| l.starts_with("229,")).count(), 1);
}

#[test]
fn norm_detail_writes_json_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let o = fairdg(&[
        "norm-detail",
        "--z",
        "6",
        "--norms",
        "[1,1,1,1;1,1,1,1]",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let json = fs::read_to_string(dir.path().join("norm_255.json")).unwrap();
    assert!(json.contains("\"favored\""));
    let csv = fs::read_to_string(dir.path().join("norm_255_monomorphic.csv")).unwrap();
    assert!(csv.ends_with("6,1,1,1,1\n"));
    assert_eq!(fairdg(&["norm-detail", "--norms", "[1,*,1,1;1,1,1,1]"]).status.code(), Some(1));
}

#[test]
fn exit_codes() {
    assert_eq!(fairdg(&["sweep-norms", "--eps", "2"]).status.code(), Some(1));
    assert_eq!(fairdg(&["sweep-param", "--norms", "1"]).status.code(), Some(1));
    assert_eq!(
        fairdg(&["sweep-param", "--norms", "1", "--grid", "0:0.1:0.2", "--axis", "p1"]).status.code(),
        Some(1)
    );
    // Far too little simulation to pass.
    let o = fairdg(&["validate", "--rounds", "200", "--replicates", "4"]);
    assert_eq!(o.status.code(), Some(2));
}
