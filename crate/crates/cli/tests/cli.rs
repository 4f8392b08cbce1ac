use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gvm_core::pricing::{price_option, reliability_option_price, PriceReport, ReliabilityOptionPrice, ReliabilityOptionSpec};
use gvm_core::{CompletenessReport, DiscountCurve, KernelSpec, MarketSpec, OptionKind, VanillaOption, Verdict};
use tempfile::TempDir;

fn gvm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gvm")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn example12() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/example12_calendar.json")
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

const TWO_RL: &str = r#"{
  "market": {
    "factors": [{"type": "rl", "hurst": 0.3}, {"type": "rl", "hurst": 0.7}],
    "maturities": [1.0, 2.0],
    "seasonality": {"type": "constant", "level": 100.0},
    "theta": {"times": [0.0], "values": [[0.1, -0.2]]},
    "horizon": 2.0
  },
  "completeness": {"grid_points": 64}
}"#;

const TWIN_OU: &str = r#"{
  "market": {
    "factors": [{"type": "std_ou", "alpha": -1.0}, {"type": "std_ou", "alpha": -1.0}],
    "maturities": [1.0, 2.0],
    "seasonality": {"type": "constant", "level": 100.0},
    "theta": {"times": [0.0], "values": [[0.0, 0.0]]},
    "horizon": 2.0
  },
  "completeness": {"grid_points": 16}
}"#;

fn two_rl_market() -> MarketSpec {
    let v: serde_json::Value = serde_json::from_str(TWO_RL).unwrap();
    serde_json::from_value(v["market"].clone()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn zero_paths_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "c.json", TWO_RL);
    let out = dir.path().join("out");
    let o = gvm(&["--config", s(&cfg), "--out", s(&out), "--seed", "1", "simulate", "--paths", "0"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("simulation::sample_increments"));
    assert_eq!(code(&gvm(&["simulate", "--paths", "0"])), 2);
}

#[test]
fn stochastic_commands_need_a_seed() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "c.json", TWO_RL);
    let o = gvm(&["--config", s(&cfg), "--out", s(&dir.path().join("o")), "simulate", "--paths", "10"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("seed"));
}

#[test]
fn same_seed_gives_identical_json_across_thread_counts() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "c.json", TWO_RL);
    let run = |name: &str, threads: &str| {
        let out = dir.path().join(name);
        let o = gvm(&[
            "--config", s(&cfg), "--out", s(&out), "--seed", "7", "--threads", threads,
            "simulate", "--paths", "300", "--steps", "20", "--measure", "p",
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        fs::read(out.join("simulate.json")).unwrap()
    };
    let a = run("a", "1");
    assert_eq!(a, run("b", "4"));
    let other = dir.path().join("c");
    gvm(&["--config", s(&cfg), "--out", s(&other), "--seed", "8", "simulate", "--paths", "300", "--steps", "20"]);
    assert_ne!(a, fs::read(other.join("simulate.json")).unwrap());
}

#[test]
fn completeness_of_two_rough_factors() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "c.json", TWO_RL);
    let out = dir.path().join("out");
    let o = gvm(&["--config", s(&cfg), "--out", s(&out), "completeness"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out.join("completeness.json")).unwrap();
    let r: CompletenessReport = serde_json::from_str(&text).unwrap();
    assert_eq!(r.verdict, Verdict::Complete);
    assert_eq!(r.grid.len(), 64);
    assert_eq!(serde_json::to_string_pretty(&r).unwrap() + "\n", text);
    let csv = fs::read_to_string(out.join("completeness.csv")).unwrap();
    assert!(csv.starts_with("t,det\n"));
    assert_eq!(csv.lines().count(), 65);
}

#[test]
fn identical_factors_are_incomplete() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "c.json", TWIN_OU);
    let out = dir.path().join("out");
    let o = gvm(&["--config", s(&cfg), "--out", s(&out), "completeness"]);
    assert_eq!(code(&o), 3);
    let r: CompletenessReport = serde_json::from_str(&fs::read_to_string(out.join("completeness.json")).unwrap()).unwrap();
    assert_eq!(r.verdict, Verdict::Incomplete);
}

#[test]
fn price_matches_library_call() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "mkt.json", TWO_RL);
    let out = dir.path().join("out");
    let o = gvm(&["--config", s(&cfg), "--out", s(&out), "price", "--call", "--strike", "95", "--T", "1", "--Tj", "2"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let got: PriceReport = serde_json::from_str(&fs::read_to_string(out.join("price.json")).unwrap()).unwrap();
    let m = two_rl_market();
    let opt = VanillaOption::new(OptionKind::Call, 95.0, 1.0, 2.0).unwrap();
    let f0 = m.forward_initial(2.0).unwrap().price;
    let want = price_option(&m, &opt, 0.0, f0, &DiscountCurve::zero()).unwrap();
    assert_eq!(got, want);

    let o = gvm(&["--config", s(&cfg), "--out", s(&out), "price", "--put", "--strike", "95", "--T", "1", "--Tj", "2", "--t", "0.5"]);
    assert_eq!(code(&o), 2, "forward is required away from t = 0");
    let o = gvm(&["--config", s(&cfg), "--out", s(&out), "price", "--strike", "95", "--T", "2", "--Tj", "1"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn reliability_option_matches_library_call() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "mkt.json", TWO_RL);
    let out = dir.path().join("out");
    let o = gvm(&["--config", s(&cfg), "--out", s(&out), "price-ro", "--strike", "100.5", "--T1", "0.5", "--T2", "1.5"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let got: ReliabilityOptionPrice =
        serde_json::from_str(&fs::read_to_string(out.join("reliability_option.json")).unwrap()).unwrap();
    let want = reliability_option_price(&two_rl_market(), &ReliabilityOptionSpec { strike: 100.5, window: (0.5, 1.5) }).unwrap();
    assert_eq!(got, want);
}

#[test]
fn kernel_eval_without_config() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let k = r#"{"type":"fbm","hurst":0.3}"#;
    let o = gvm(&["--out", s(&out), "kernel-eval", "--t", "1", "--s", "0.25", "--kernel", k]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("kernel_eval.json")).unwrap()).unwrap();
    let want = KernelSpec::fbm(0.3).unwrap().eval(1.0, 0.25).unwrap();
    assert_eq!(v["factors"][0]["value"].as_f64().unwrap(), want);
    let o = gvm(&["--out", s(&out), "kernel-eval", "--t", "1", "--s", "0.25", "--kernel", r#"{"type":"fbm","hurst":0.5}"#]);
    assert_eq!(code(&o), 2);
}

#[test]
fn example12_calendar_runs_end_to_end() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let cfg = example12();
    for args in [
        vec!["completeness"],
        vec!["simulate", "--paths", "200", "--steps", "10"],
        vec!["price"],
        vec!["price-ro"],
        vec!["portfolio", "--paths", "200", "--steps", "8"],
        vec!["tracking-error"],
    ] {
        let mut full = vec!["--config", s(&cfg), "--out", s(&out), "--plots"];
        full.extend(args.iter());
        let o = gvm(&full);
        assert_eq!(code(&o), 0, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        assert_eq!(String::from_utf8_lossy(&o.stdout).lines().count(), 1);
    }
    let te: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("tracking_error.json")).unwrap()).unwrap();
    let names: Vec<&str> = te["entries"].as_array().unwrap().iter().map(|e| e["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["Jun/24", "Jul/24", "Aug/24", "Q3/24", "Q4/24", "Cal-25"]);
    let q3 = &te["entries"][3];
    assert_eq!(q3["tj"].as_f64().unwrap(), 61.0 / 365.0);
    assert_eq!(q3["tk"].as_f64().unwrap(), 153.0 / 365.0);
    let sim: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("simulate.json")).unwrap()).unwrap();
    assert_eq!(sim["contracts"].as_array().unwrap().len(), 6);
    assert_eq!(sim["forwards"].as_array().unwrap().len(), 7);
    for svg in ["completeness.svg", "forwards.svg", "forward_curve.svg", "portfolio.svg"] {
        let text = fs::read_to_string(out.join(svg)).unwrap();
        assert!(text.starts_with("<svg") && text.trim_end().ends_with("</svg>"), "{svg}");
    }
}

#[test]
fn json_artifacts_reparse_exactly() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let cfg = example12();
    for args in [vec!["simulate", "--paths", "50", "--steps", "5"], vec!["portfolio", "--paths", "50", "--steps", "4", "--replicate"]] {
        let mut full = vec!["--config", s(&cfg), "--out", s(&out)];
        full.extend(args.iter());
        assert_eq!(code(&gvm(&full)), 0);
    }
    for f in ["simulate.json", "portfolio.json"] {
        let text = fs::read_to_string(out.join(f)).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(serde_json::to_string_pretty(&v).unwrap() + "\n", text, "{f}");
    }
}

#[test]
fn config_errors_exit_with_usage_code() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let bad = write_config(dir.path(), "bad.json", "{\"market\": 3}");
    let o = gvm(&["--config", s(&bad), "--out", s(&out), "completeness"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error [market::parse]"));

    let text = fs::read_to_string(example12()).unwrap().replace("2024-10-01\", \"end\": \"2025-01-01", "2024-10-02\", \"end\": \"2025-01-01");
    let off = write_config(dir.path(), "off.json", &text);
    let o = gvm(&["--config", s(&off), "--out", s(&out), "tracking-error"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("config::calendar"));

    let o = gvm(&["--config", s(&dir.path().join("missing.json")), "completeness"]);
    assert_eq!(code(&o), 2);
    assert_eq!(code(&gvm(&["no-such-command"])), 2);
}

#[test]
fn market_file_reference_resolves_relative_to_config() {
    let dir = TempDir::new().unwrap();
    let v: serde_json::Value = serde_json::from_str(TWO_RL).unwrap();
    fs::write(dir.path().join("market.json"), v["market"].to_string()).unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"market": "market.json", "output_dir": "res"}"#);
    let o = gvm(&["--config", s(&cfg), "kernel-eval", "--t", "1", "--s", "0.5"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("res/kernel_eval.json").exists());
}
