//! End-to-end checks of the installed binary: exit codes, output schemas,
//! determinism, and the config-file round trip.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rcm-lab"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf8 stdout")
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).expect("utf8 stderr")
}

/// Output body with the timestamp comment removed, for determinism
/// comparisons.
fn stable_body(text: &str) -> String {
    text.lines()
        .filter(|l| !l.starts_with("# generated"))
        .collect::<Vec<_>>()
        .join("\n")
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).expect("file readable")
}

#[test]
fn theory_prints_the_limit_values_at_b_zero() {
    let out = run(&["theory", "--b", "0"]);
    assert!(out.status.success(), "{}", stderr_of(&out));
    let text = stdout_of(&out);
    assert!(
        text.contains("mean_isolated_limit,1.00000000e0"),
        "{text}"
    );
    assert!(
        text.contains("p_connected_limit,3.67879441e-1"),
        "{text}"
    );
    assert!(text.contains("name,value,kind,params"), "{text}");
    for line in ["# version", "# seed", "# config-hash", "# generated"] {
        assert!(text.contains(line), "missing {line} in {text}");
    }
}

#[test]
fn theory_attaches_the_exact_mean_when_a_density_is_given() {
    let out = run(&["theory", "--b", "0", "--rho", "500", "--model", "unit-disk"]);
    assert!(out.status.success(), "{}", stderr_of(&out));
    let text = stdout_of(&out);
    let exact = text
        .lines()
        .find(|l| l.starts_with("mean_isolated_exact"))
        .expect("exact row present");
    assert!(exact.contains("ExactFiniteRho"), "{exact}");
    assert!(exact.contains("rho=500 b=0 model=unit-disk domain=torus"), "{exact}");
    // hard-disk profiles on the torus pin the exact mean to the limit
    assert!(exact.contains("1.00000000e0"), "{exact}");
}

#[test]
fn missing_seed_is_exit_2_naming_the_flag() {
    let out = run(&["simulate", "--rho", "100"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("--seed"), "{}", stderr_of(&out));
}

#[test]
fn negative_density_is_exit_2_naming_the_flag() {
    let out = run(&["simulate", "--rho", "-5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("--rho"), "{}", stderr_of(&out));
}

#[test]
fn unknown_flags_are_exit_2() {
    let out = run(&["simulate", "--rho", "100", "--seed", "1", "--bogus", "3"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("--bogus"), "{}", stderr_of(&out));
}

#[test]
fn help_documents_every_flag_and_exits_zero() {
    let out = run(&["simulate", "--help"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout_of(&out);
    for flag in [
        "--model", "--sigma", "--alpha", "--file", "--rho", "--rho-grid", "--b", "--epsilon",
        "--trials", "--seed", "--workers", "--M", "--domain", "--builder", "--eps-miss",
        "--out", "--format", "--dump-trials", "--emit-config", "--config",
    ] {
        assert!(text.contains(flag), "help misses {flag}");
    }
    let top = run(&["--help"]);
    assert_eq!(top.status.code(), Some(0));
    let text = stdout_of(&top);
    for sub in ["simulate", "theory", "chenstein", "sweep", "validate-model"] {
        assert!(text.contains(sub), "top help misses {sub}");
    }
}

#[test]
fn increasing_tabulated_knots_fail_validate_model_with_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let tab = dir.path().join("bad.tab");
    std::fs::write(&tab, "0.0 0.5\n1.0 0.9\n2.0 0.0\n").unwrap();
    let out = run(&[
        "validate-model",
        "--model",
        "tabulated",
        "--file",
        tab.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr_of(&out);
    assert!(err.contains("non-increasing"), "{err}");
    let text = stdout_of(&out);
    assert!(text.contains("profile_shape,fail"), "{text}");
}

#[test]
fn validate_model_passes_the_stock_profiles() {
    for model in ["unit-disk", "exponential", "rayleigh"] {
        let out = run(&["validate-model", "--model", model]);
        assert!(out.status.success(), "{model}: {}", stderr_of(&out));
        let text = stdout_of(&out);
        assert!(text.contains("check,outcome,detail"), "{text}");
        assert!(text.contains("spreading_constant,ok"), "{text}");
        assert!(text.contains("tail_decay,ok"), "{text}");
        assert!(!text.contains(",fail,"), "{text}");
    }
}

#[test]
fn repeated_runs_are_byte_identical_outside_the_timestamp() {
    let args = [
        "simulate", "--rho", "120", "--b", "0", "--trials", "200", "--seed", "9",
    ];
    let first = run(&args);
    let second = run(&args);
    assert!(first.status.success(), "{}", stderr_of(&first));
    assert_eq!(
        stable_body(&stdout_of(&first)),
        stable_body(&stdout_of(&second))
    );
}

#[test]
fn worker_count_and_env_fallback_do_not_change_the_body() {
    let base = [
        "sweep", "--rho-grid", "60,120", "--b", "0", "--trials", "150", "--seed", "4",
    ];
    let one = run(&[&base[..], &["--workers", "1"]].concat());
    let eight = run(&[&base[..], &["--workers", "8"]].concat());
    assert!(one.status.success(), "{}", stderr_of(&one));
    let body = stable_body(&stdout_of(&one));
    assert_eq!(body, stable_body(&stdout_of(&eight)));
    let env = bin()
        .args(base)
        .env("RCM_LAB_WORKERS", "3")
        .output()
        .unwrap();
    assert_eq!(body, stable_body(&stdout_of(&env)));
    let bad = bin()
        .args(base)
        .env("RCM_LAB_WORKERS", "many")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
    assert!(
        stderr_of(&bad).contains("RCM_LAB_WORKERS"),
        "{}",
        stderr_of(&bad)
    );
}

#[test]
fn simulate_csv_has_the_documented_schema() {
    let out = run(&[
        "simulate", "--rho", "90", "--b", "0", "--trials", "120", "--seed", "2",
    ]);
    assert!(out.status.success(), "{}", stderr_of(&out));
    let text = stdout_of(&out);
    assert!(!text.contains('\r'), "line endings must be bare newlines");
    let mut lines = text.lines();
    // comment header first, then the mandatory column row
    let header = lines
        .by_ref()
        .find(|l| !l.starts_with('#'))
        .expect("column header");
    assert_eq!(header, "rho,statistic,estimate,stderr,prediction");
    let mut statistics = Vec::new();
    for line in lines.filter(|l| !l.starts_with('#')) {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), 5, "bad row {line}");
        statistics.push(fields[1].to_string());
        let est: f64 = fields[2].parse().unwrap_or(f64::NAN);
        assert!(est.is_finite() || fields[2].is_empty(), "bad estimate in {line}");
    }
    for wanted in [
        "mean_w",
        "var_over_mean_w",
        "p_no_isolated",
        "p_connected",
        "tv_to_asymptotic",
        "xi_1",
        "prob_single_giant",
    ] {
        assert!(
            statistics.iter().any(|s| s == wanted),
            "schema misses {wanted}"
        );
    }
}

#[test]
fn jsonl_output_parses_line_by_line() {
    let out = run(&[
        "simulate", "--rho", "90", "--b", "0", "--trials", "120", "--seed", "2", "--format",
        "jsonl",
    ]);
    assert!(out.status.success(), "{}", stderr_of(&out));
    let text = stdout_of(&out);
    let mut lines = text.lines();
    let meta: serde_json::Value = serde_json::from_str(lines.next().unwrap()).unwrap();
    assert_eq!(meta["subcommand"], "simulate");
    assert_eq!(meta["seed"], 2);
    assert!(meta["config_hash"].is_string());
    let row: serde_json::Value = serde_json::from_str(lines.next().unwrap()).unwrap();
    assert_eq!(row["rho"], 90.0);
    assert!(row["mean_w"]["stderr"].is_number());
    assert!(row["census"]["order_counts"].is_array());
}

#[test]
fn dump_trials_writes_one_parseable_object_per_trial() {
    let dir = tempfile::tempdir().unwrap();
    let dump = dir.path().join("trials.jsonl");
    let out = run(&[
        "simulate", "--rho", "60", "--b", "0", "--trials", "40", "--seed", "6",
        "--dump-trials", dump.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr_of(&out));
    let text = read(&dump);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 40);
    for line in lines {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["w"].is_u64(), "{line}");
        assert!(v["connected"].is_boolean(), "{line}");
        assert!(v["sizes"].is_array(), "{line}");
        assert!(v["xi_gtm"].is_u64(), "{line}");
    }
}

#[test]
fn chenstein_reports_decay_over_the_grid() {
    let out = run(&["chenstein", "--rho-grid", "1000,10000", "--b", "0"]);
    assert!(out.status.success(), "{}", stderr_of(&out));
    let text = stdout_of(&out);
    let rows: Vec<Vec<f64>> = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("rho,"))
        .map(|l| l.split(',').map(|f| f.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 2);
    let total = |r: &Vec<f64>| r[7];
    assert!(total(&rows[0]).is_finite() && total(&rows[1]).is_finite());
    assert!(total(&rows[1]) < total(&rows[0]), "{rows:?}");
    assert!(
        text.contains("rho,b,epsilon,b1,b2_bound,b3_gap,eta,total"),
        "{text}"
    );
}

#[test]
fn config_files_drive_runs_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("lab.cfg");
    std::fs::write(
        &cfg,
        "\
# shared defaults
seed = 5
b = 1

[simulate]
rho = 70
trials = 50
",
    )
    .unwrap();
    let out_path = dir.path().join("a.csv");
    let out = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr_of(&out));
    let from_config = read(&out_path);
    assert!(from_config.contains("# seed 5"), "{from_config}");

    // the same run spelled out in flags gives the identical body, config
    // hash included: destination keys do not count as experiment input
    let direct = run(&[
        "simulate", "--rho", "70", "--b", "1", "--trials", "50", "--seed", "5",
    ]);
    assert_eq!(stable_body(&from_config), stable_body(&stdout_of(&direct)));

    // a flag overrides the file: b = 0 changes the predicted probability
    let out = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--b",
        "0",
        "--emit-config",
        out_path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr_of(&out));
    let emitted = read(&out_path);
    assert!(emitted.contains("b = 0"), "{emitted}");
    assert!(!emitted.contains("b = 1"), "{emitted}");
}

#[test]
fn emitted_configs_reparse_to_the_same_invocation() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first.cfg");
    let second = dir.path().join("second.cfg");
    let out = run(&[
        "sweep", "--rho-grid", "50,100", "--b", "0.5", "--trials", "30", "--seed", "12",
        "--emit-config", first.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr_of(&out));
    let out = run(&[
        "sweep",
        "--config",
        first.to_str().unwrap(),
        "--emit-config",
        second.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr_of(&out));
    assert_eq!(read(&first), read(&second));
}

#[test]
fn config_syntax_errors_are_exit_2_naming_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "speed = 7\n").unwrap();
    let out = run(&["sweep", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_of(&out);
    assert!(err.contains("bad.cfg"), "{err}");
    assert!(err.contains("unknown key `speed`"), "{err}");

    let out = run(&["sweep", "--config", dir.path().join("absent.cfg").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("--config"), "{}", stderr_of(&out));
}

#[test]
fn square_domain_rejects_the_torus_only_bound_subcommand() {
    let out = run(&[
        "chenstein", "--rho-grid", "1000", "--domain", "square",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr_of(&out);
    assert!(err.contains("chenstein::tv_bound_total"), "{err}");
    assert!(err.contains("torus"), "{err}");
}
