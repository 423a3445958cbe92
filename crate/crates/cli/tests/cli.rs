use std::path::Path;
use std::process::{Command, Output};

fn gaussrot(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gaussrot"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn value_of(table: &str, bound: &str) -> f64 {
    table
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{bound},")))
        .unwrap_or_else(|| panic!("no row {bound} in\n{table}"))
        .parse()
        .unwrap()
}

#[test]
fn theory_values_for_d128() {
    let out = gaussrot(&["theory", "--dim", "128", "--ratio", "0.3679"]);
    assert!(out.status.success());
    let table = stdout(&out);
    assert_eq!(value_of(&table, "gaussianization-lower"), 64.5);
    // ln(0.3679) / ln(1 − 2/130)
    let oracle = 0.3679f64.ln() / (128.0f64 / 130.0).ln();
    assert!((value_of(&table, "iterative-rate") - oracle).abs() < 1e-12);
    assert!((value_of(&table, "iterative-rate") - 64.5).abs() < 0.05);
    let coupling = value_of(&table, "coupling-required-layers");
    assert!((coupling - 1.44).abs() < 0.005);
}

#[test]
fn theory_rate_factor_at_d2() {
    let table = stdout(&gaussrot(&["theory", "--dim", "2"]));
    assert_eq!(value_of(&table, "iterative-rate-factor"), 0.5);
}

#[test]
fn theory_json_is_tagged() {
    let out = gaussrot(&["theory", "--dim", "16", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let kinds: Vec<&str> = v.as_array().unwrap().iter().map(|b| b["kind"].as_str().unwrap()).collect();
    assert!(kinds.contains(&"iterative-rate"));
    assert!(kinds.contains(&"coupling-rate"));
}

#[test]
fn invalid_ranges_exit_with_usage_status() {
    assert_eq!(gaussrot(&["theory", "--dim", "0"]).status.code(), Some(2));
    assert_eq!(gaussrot(&["theory", "--dim", "8", "--ratio", "1.5"]).status.code(), Some(2));
    assert_eq!(gaussrot(&["simulate-gaussian", "--dims", "1,4"]).status.code(), Some(2));
    assert_eq!(gaussrot(&["train-toy", "--cases", "9"]).status.code(), Some(2));
}

#[test]
fn config_file_precedence_and_unknown_keys() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# theory settings\ndim = 6\nratio = 0.5\n").unwrap();
    let cfg_s = cfg.to_str().unwrap();

    let from_file = stdout(&gaussrot(&["theory", "--config", cfg_s]));
    assert_eq!(value_of(&from_file, "gaussianization-lower"), 3.5);
    let from_flag = stdout(&gaussrot(&["theory", "--config", cfg_s, "--dim", "9"]));
    assert_eq!(value_of(&from_flag, "gaussianization-lower"), 5.0);
    // ratio still comes from the file
    let oracle = 0.5f64.ln() / (1.0 - 2.0 / 11.0f64).ln();
    assert!((value_of(&from_flag, "iterative-rate") - oracle).abs() < 1e-12);

    std::fs::write(&cfg, "dim = 6\nlayers_per_moon = 3\n").unwrap();
    let out = gaussrot(&["theory", "--config", cfg_s]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("layers_per_moon"));
}

fn simulate(dir: &Path, jobs: &str) -> (Vec<u8>, Vec<u8>) {
    let csv = dir.join(format!("g{jobs}.csv"));
    let svg = dir.join(format!("g{jobs}.svg"));
    let out = gaussrot(&[
        "simulate-gaussian",
        "--dims",
        "5,9,14",
        "--rotations",
        "2",
        "--alphas-per-side",
        "2",
        "--random-draws",
        "2",
        "--seed",
        "3",
        "--jobs",
        jobs,
        "--out",
        csv.to_str().unwrap(),
        "--svg",
        svg.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    (std::fs::read(csv).unwrap(), std::fs::read(svg).unwrap())
}

#[test]
fn gaussian_output_is_independent_of_jobs() {
    let dir = tempfile::tempdir().unwrap();
    let (csv1, svg1) = simulate(dir.path(), "1");
    let (csv8, svg8) = simulate(dir.path(), "8");
    assert_eq!(csv1, csv8);
    assert_eq!(svg1, svg8);
    let text = String::from_utf8(csv1).unwrap();
    assert!(text.starts_with("experiment,case,dim,seed,layer,loss,gamma,required_layers\n"));
    assert!(text.lines().any(|l| l.contains(",-1,")));
}

#[test]
fn toy_output_is_independent_of_jobs() {
    let run = |jobs: &str| {
        let out = gaussrot(&[
            "train-toy", "--cases", "1,2", "--dims", "6,10", "--core", "3", "--seeds", "0,1", "--samples", "1500",
            "--layers", "3", "--bins", "16", "--jobs", jobs,
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        out.stdout
    };
    assert_eq!(run("1"), run("8"));
}

#[test]
fn plot_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, _) = simulate(dir.path(), "2");
    let input = dir.path().join("in.csv");
    std::fs::write(&input, csv).unwrap();
    let render = |name: &str| {
        let out = dir.path().join(name);
        let status = gaussrot(&["plot", "--input", input.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert!(status.status.success());
        std::fs::read_to_string(out).unwrap()
    };
    let a = render("a.svg");
    assert_eq!(a, render("b.svg"));
    assert!(a.starts_with("<svg"));
    assert!(a.contains("theory"));
}

#[test]
fn plot_rejects_csv_without_summaries() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("empty.csv");
    std::fs::write(&input, "experiment,case,dim,seed,layer,loss,gamma,required_layers\n").unwrap();
    let out = gaussrot(&["plot", "--input", input.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn spurious_reports_both_scales() {
    let dir = tempfile::tempdir().unwrap();
    let svg = dir.path().join("s.svg");
    let out = gaussrot(&[
        "spurious", "--samples", "1500", "--dim", "48", "--steps", "6", "--bins", "30", "--svg",
        svg.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let ms = v["w2_final"].as_f64().unwrap();
    assert!((v["w2_final_rms"].as_f64().unwrap() - ms.sqrt()).abs() < 1e-15);
    assert!(ms < v["w2_initial"].as_f64().unwrap());
    assert_eq!(v["histogram_optimized"]["counts"].as_array().unwrap().len(), 30);
    assert_eq!(v["trajectory"].as_array().unwrap().len(), 7);
    assert!(std::fs::read_to_string(svg).unwrap().contains("random direction"));
}
