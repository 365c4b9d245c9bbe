//! End-to-end CLI checks: schema stability, config handling, exit
//! codes, and output determinism.

use std::io::Write;
use std::process::{Command, Output};

use gwi_cli::config::ExperimentConfig;

const BASIC: &str = r#"
seed = 42
samples = 2000
alphas = [1.0, 2.0]
k_max = 6

[model]
d = 1

[[model.offspring]]
components = [ { family = "bernoulli", p = 0.5 } ]

[model.immigration]
components = [ { family = "poisson", lambda = 1.0 } ]
"#;

fn write_config(text: &str) -> tempfile::NamedTempFile {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    f.write_all(text.as_bytes()).unwrap();
    f.flush().unwrap();
    f
}

fn gwi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gwi"))
        .args(args)
        .output()
        .unwrap()
}

fn run_ok(args: &[&str]) -> String {
    let out = gwi(args);
    assert!(
        out.status.success(),
        "gwi {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn golden_headers() {
    let cfg = write_config(BASIC);
    let path = cfg.path().to_str().unwrap();
    let cases = [
        ("simulate", "generation,mean_0,var_0,extinct_fraction"),
        (
            "stationary",
            "alpha,moment,stderr,nonconvergent,mean_0,exact_mean_0",
        ),
        (
            "decay",
            "alpha,k,m_hat,stderr,kind,fitted_rate,rate_lo,rate_hi,fit_r2",
        ),
        ("certify", "alpha,k,bound,m_hat,stderr,sound"),
        ("tail", "k_frac,k,beta_hat,ci_lo,ci_hi,n,light_tailed"),
    ];
    for (cmd, header) in cases {
        let stdout = run_ok(&[cmd, "--config", path]);
        assert_eq!(stdout.lines().next().unwrap(), header, "{cmd}");
    }
}

#[test]
fn config_round_trip() {
    let cfg = ExperimentConfig::parse(BASIC).unwrap();
    let text = toml::to_string(&cfg).unwrap();
    let again = ExperimentConfig::parse(&text).unwrap();
    assert_eq!(cfg, again);
}

#[test]
fn invalid_configs_name_the_field() {
    let cases = [
        ("p = 0.5", "p = -0.5", "model.offspring[0]"),
        ("alphas = [1.0, 2.0]", "alphas = [1.0, -2.0]", "alphas[1]"),
        ("d = 1", "d = 2", "model.offspring"),
        ("samples = 2000", "samples = 10", "samples"),
    ];
    for (from, to, field) in cases {
        let text = BASIC.replace(from, to);
        let cfg = write_config(&text);
        let out = gwi(&["simulate", "--config", cfg.path().to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(2), "{field}");
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.contains(field), "{field}: {err}");
    }
}

#[test]
fn missing_config_is_usage_error() {
    let out = gwi(&["simulate"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn not_subcritical_is_runtime_error() {
    let text = BASIC.replace("p = 0.5", "p = 1.0");
    let cfg = write_config(&text);
    let out = gwi(&["stationary", "--config", cfg.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("subcritical"), "{err}");
}

#[test]
fn seed_and_format_overrides() {
    let cfg = write_config(BASIC);
    let path = cfg.path().to_str().unwrap();
    let a = run_ok(&["simulate", "--config", path, "--seed", "1"]);
    let b = run_ok(&["simulate", "--config", path, "--seed", "2"]);
    assert_ne!(a, b);

    let json = run_ok(&["simulate", "--config", path, "--format", "json"]);
    assert!(json.trim_start().starts_with('['));
    assert!(json.contains("\"generation\":0"));
}

#[test]
fn out_flag_writes_file() {
    let cfg = write_config(BASIC);
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("t.csv");
    let stdout = run_ok(&[
        "simulate",
        "--config",
        cfg.path().to_str().unwrap(),
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert!(stdout.is_empty());
    let written = std::fs::read_to_string(&out_path).unwrap();
    assert!(written.starts_with("generation,"));
}

#[test]
fn deterministic_across_runs_and_workers() {
    let cfg = write_config(BASIC);
    let path = cfg.path().to_str().unwrap();
    for cmd in ["simulate", "stationary", "decay", "certify", "tail"] {
        let one = run_ok(&[cmd, "--config", path, "--threads", "1"]);
        let eight = run_ok(&[cmd, "--config", path, "--threads", "8"]);
        let again = run_ok(&[cmd, "--config", path, "--threads", "8"]);
        assert_eq!(one, eight, "{cmd}: thread count changed output");
        assert_eq!(eight, again, "{cmd}: rerun changed output");
    }
}
