use std::{fs, path::Path, process::Command};

use emstable_lab::config::{parse_dyadic_range, parse_grid, RunConfig};
use serde_json::Value;

fn emstable(args: &[&str]) -> std::process::Output {
    let out = Command::new(env!("CARGO_BIN_EXE_emstable")).args(args).output().unwrap();
    assert!(
        out.status.success(),
        "emstable {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(|v| v.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

#[test]
fn dyadic_ranges_and_grids() {
    assert_eq!(parse_dyadic_range("2^-4..2^-6").unwrap(), vec![0.0625, 0.03125, 0.015625]);
    assert_eq!(parse_dyadic_range("2^-6..2^-4").unwrap(), vec![0.0625, 0.03125, 0.015625]);
    assert_eq!(parse_dyadic_range("2^-3").unwrap(), vec![0.125]);
    assert!(parse_dyadic_range("4..8").is_err());
    let g = parse_grid("-3:3:0.25").unwrap();
    assert_eq!(g.len(), 25);
    assert_eq!((g[0], g[24]), (-3.0, 3.0));
    assert!(parse_grid("1:0:0.1").is_err());
}

#[test]
fn noise_test_writes_cf_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cf.csv");
    emstable(&["noise-test", "--alpha", "1.5", "--dim", "1", "--n", "20000", "--seed", "3", "--out", p(&out)]);
    let (header, rows) = read_csv(&out);
    assert_eq!(header, ["z", "re_cf", "im_cf", "analytic_cf", "abs_err"]);
    assert_eq!(rows.len(), 5);
    for r in rows {
        assert!((r[3] - (-r[0].powf(1.5)).exp()).abs() < 1e-15);
        assert!(r[4] < 4.0 * 3.0 / (20000f64).sqrt());
    }
}

#[test]
fn noise_test_isotropic() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cf.csv");
    emstable(&["noise-test", "--alpha", "1.2", "--dim", "3", "--n", "20000", "--out", p(&out)]);
    let (_, rows) = read_csv(&out);
    assert!(rows.iter().all(|r| r[4] < 0.05));
}

const SAMPLE_TOML: &str = r#"
[model]
name = "monotone_lipschitz"
alpha = 1.5
dim = 2
a = 2.0
c = 1.0

[noise]
scheme = "stable_em"

[em]
eta = 0.1
n_replicas = 300
burn_in_time = 5.0
x0 = [1.0, -1.0]
seed = 11
"#;

#[test]
fn sample_writes_points_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, SAMPLE_TOML).unwrap();
    for scheme in ["stable", "pareto"] {
        let out = dir.path().join(format!("{scheme}.csv"));
        emstable(&["sample", "--config", p(&cfg), "--out", p(&out), "--scheme", scheme]);
        let (header, rows) = read_csv(&out);
        assert_eq!(header, ["x1", "x2"]);
        assert_eq!(rows.len(), 300);
        let side: Value = serde_json::from_str(&fs::read_to_string(out.with_extension("provenance.json")).unwrap()).unwrap();
        assert_eq!(side["model"], "monotone_lipschitz");
        assert_eq!(side["alpha"], 1.5);
        assert_eq!(side["eta"], 0.1);
        assert_eq!(side["seed"], 11);
        assert_eq!(side["n_points"], 300);
        assert_eq!(side["burn_in_steps"], 50);
        assert_eq!(side["scheme"], format!("{scheme}_em"));
    }
}

#[test]
fn sample_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, SAMPLE_TOML).unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    emstable(&["sample", "--config", p(&cfg), "--out", p(&a)]);
    emstable(&["sample", "--config", p(&cfg), "--out", p(&b)]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn config_errors_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[model]\nname = \"monotone_lipschitz\"\nalpha = 1.5\n[em]\neta = 0.1\nn_replicas = 10\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_emstable"))
        .args(["sample", "--config", p(&cfg), "--out", p(&dir.path().join("x.csv"))])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("[model] a is required"));

    fs::write(&cfg, "[model]\nname = \"ou\"\nalpha = 1.5\nbogus = 1\n").unwrap();
    assert!(RunConfig::load(&cfg).is_err());
}

#[test]
fn distance_between_point_files() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    let pts = |shift: f64| {
        let mut s = String::from("x1\n");
        for i in 0..50 {
            s += &format!("{}\n", i as f64 * 0.1 + shift);
        }
        s
    };
    fs::write(&a, pts(0.0)).unwrap();
    fs::write(&b, pts(0.3)).unwrap();

    let out = dir.path().join("d.json");
    emstable(&["distance", "--a", p(&a), "--b", p(&b), "--cost", "euclidean", "--out", p(&out)]);
    let v: Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert!((v["estimate"]["value"].as_f64().unwrap() - 0.3).abs() < 1e-12);

    emstable(&["distance", "--a", p(&a), "--b", p(&b), "--cost", "hoelder-cut", "--gamma", "0.5", "--out", p(&out)]);
    let v: Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    let d = v["estimate"]["value"].as_f64().unwrap();
    // a pure shift: every pairing at most 0.3^0.5 apart, sorted pairing attains it
    assert!(d <= 0.3f64.sqrt() + 1e-12 && d >= v["dual_lower"].as_f64().unwrap());
    assert_eq!(v["cost"]["kind"], "hoelder_cut");
}

#[test]
fn distance_rejects_missing_gamma() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    fs::write(&a, "x1\n0\n1\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_emstable"))
        .args(["distance", "--a", p(&a), "--b", p(&a), "--cost", "hoelder-cut", "--out", p(&dir.path().join("d.json"))])
        .output()
        .unwrap();
    assert!(!out.status.success());
}

const STUDY_TOML: &str = r#"
[model]
name = "ou"
alpha = 1.5
dim = 1

[em]
burn_in_time = 8.0
seed = 5

[metric]
cost = "euclidean"

[study]
etas = "2^-2..2^-5"
samples_per_eta = 4000
reference = "ou_analytic"
n_boot = 50
"#;

#[test]
fn rate_study_report_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("study.toml");
    fs::write(&cfg, STUDY_TOML).unwrap();
    let (out, svg) = (dir.path().join("report.json"), dir.path().join("report.svg"));
    emstable(&["rate-study", "--config", p(&cfg), "--out", p(&out), "--plot", p(&svg)]);
    let v: Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["schema"], 1);
    assert_eq!(v["results"].as_array().unwrap().len(), 4);
    assert!(v["fit"]["slope"].as_f64().unwrap().is_finite());
    assert!(["consistent", "faster-than-bound", "violation"].contains(&v["verdict"].as_str().unwrap()));
    let svg = fs::read_to_string(&svg).unwrap();
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    assert_eq!(svg.matches("<circle").count(), 4);
    assert!(svg.contains("stroke-dasharray"));

    // identical config and seed give an identical report
    let again = dir.path().join("again.json");
    emstable(&["rate-study", "--config", p(&cfg), "--out", p(&again)]);
    assert_eq!(fs::read(&out).unwrap(), fs::read(&again).unwrap());
}

#[test]
fn rate_study_refuses_pareto_and_bad_metric() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("study.toml");
    fs::write(&cfg, STUDY_TOML.replace("[em]", "[noise]\nscheme = \"pareto_em\"\n\n[em]")).unwrap();
    assert!(RunConfig::load(&cfg).unwrap().rate_study().is_err());
    // W1 needs a finite mean
    fs::write(&cfg, STUDY_TOML.replace("alpha = 1.5", "alpha = 0.8")).unwrap();
    assert!(RunConfig::load(&cfg).unwrap().rate_study().is_err());
}

#[test]
fn ou_verify_small() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ou.json");
    emstable(&["ou-verify", "--alpha", "1.5", "--etas", "2^-2..2^-4", "--n", "3000", "--n-boot", "100", "--out", p(&out)]);
    let v: Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    assert!(v["limit_within_bracket"].as_bool().unwrap());
    for r in rows {
        let ratio = r["ratio_to_eta"].as_f64().unwrap();
        assert!((ratio - r["exact_w1"].as_f64().unwrap() / r["eta"].as_f64().unwrap()).abs() < 1e-12);
        assert!(r["exact_within_ci"].is_boolean());
    }
    assert!(v["lower_bound"].as_f64().unwrap() < v["upper_bound"].as_f64().unwrap());
}

#[test]
fn stein_check_small() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("res.csv");
    emstable(&[
        "stein-check",
        "--model",
        "ou",
        "--alpha",
        "1.5",
        "--g",
        "phi",
        "--grid",
        "-1:1:0.5",
        "--paths",
        "400",
        "--fine-eta",
        "0.01",
        "--horizon",
        "6",
        "--out",
        p(&out),
    ]);
    let (header, rows) = read_csv(&out);
    assert_eq!(header, ["x", "f", "f_se", "residual", "tol_budget"]);
    assert_eq!(rows.len(), 5);
    assert!(rows.iter().all(|r| r.iter().all(|v| v.is_finite()) && r[4] > 0.0));
}
