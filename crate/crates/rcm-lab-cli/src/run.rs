//! Executes a parsed invocation: config merging, experiment dispatch, and
//! reproducible CSV/JSONL output with metadata headers.
//!
//! Exit-code contract: flag and configuration problems surface before any
//! work starts and exit with 2; failures inside the numerical machinery
//! exit with 1 and name the failing operation. Output bodies depend only
//! on the effective configuration (the `# generated` timestamp line is the
//! one exception, and JSONL output omits it entirely).

use crate::config::{parse_config, render_config};
use crate::invocation::{
    check_applicability, parse_rho_grid, validate_values, CliError, CliInvocation, OutputFormat,
    SubcommandKind,
};
use rcm_lab::chenstein::{self, BoundReport, NeighborhoodSpec};
use rcm_lab::connfn::{self, ConnectionModel, DecayVerdict};
use rcm_lab::geometry::Domain;
use rcm_lab::montecarlo::{self, BuilderChoice, ExperimentConfig, SweepTable};
use rcm_lab::stats::sig9;
use rcm_lab::theory::{self, Prediction, PredictionKind};
use rcm_lab::stream;
use serde_json::json;
use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

/// Rows ready for either encoding, plus a deferred failure for checks that
/// must still produce output (validate-model writes its table before the
/// process reports the failing check).
struct OutputDoc {
    csv_schema: &'static str,
    csv_rows: Vec<String>,
    /// Comment-style lines after the rows (sweep trend flags).
    csv_footer: Vec<String>,
    json_rows: Vec<serde_json::Value>,
    failure: Option<CliError>,
}

/// Runs one invocation end to end. With `--emit-config` the effective
/// configuration is written instead of running the experiment.
pub fn execute(inv: &CliInvocation) -> Result<(), CliError> {
    let map = effective_map(inv)?;
    if let Some(path) = &inv.emit_config {
        let text = render_config(inv.subcommand.name(), &map);
        fs::write(path, text)
            .map_err(|e| CliError::run(&format!("writing --emit-config {}", path.display()), e))?;
        return Ok(());
    }
    let doc = match inv.subcommand {
        SubcommandKind::Simulate => run_simulate(&map)?,
        SubcommandKind::Theory => run_theory(&map)?,
        SubcommandKind::Chenstein => run_chenstein(&map)?,
        SubcommandKind::Sweep => run_sweep(&map)?,
        SubcommandKind::ValidateModel => run_validate(&map)?,
    };
    write_doc(inv.subcommand, &map, doc)
}

/// Merges the config file (global keys, then the subcommand's section)
/// under the command-line flags, then re-validates the merged map and the
/// subcommand's required keys.
fn effective_map(inv: &CliInvocation) -> Result<BTreeMap<String, String>, CliError> {
    let mut merged = BTreeMap::new();
    if let Some(path) = &inv.config_path {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::flags(format!("cannot read --config {}: {e}", path.display())))?;
        let cfg = parse_config(&text)
            .map_err(|msg| CliError::flags(format!("--config {}: {msg}", path.display())))?;
        if let Some(section) = cfg.sections.get(inv.subcommand.name()) {
            check_applicability(
                inv.subcommand,
                section.keys(),
                &format!("config section [{}]", inv.subcommand.name()),
            )?;
        }
        for (k, v) in cfg.effective(inv.subcommand.name()) {
            // global keys aimed at other subcommands are skipped silently,
            // so one file can drive several subcommands
            if inv.subcommand.allowed_keys().contains(&k.as_str()) {
                merged.insert(k, v);
            }
        }
    }
    for (k, v) in &inv.overrides {
        merged.insert(k.clone(), v.clone());
    }
    validate_values(&merged)?;
    for key in inv.subcommand.required_keys() {
        if !merged.contains_key(*key) {
            return Err(CliError::flags(format!(
                "missing required flag --{key} for `{}`",
                inv.subcommand.name()
            )));
        }
    }
    Ok(merged)
}

/// Typed access into the validated flag map.
struct Ctx<'a> {
    map: &'a BTreeMap<String, String>,
}

impl Ctx<'_> {
    fn str(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(String::as_str)
    }

    fn f64(&self, key: &str) -> Option<f64> {
        self.map.get(key).map(|v| v.parse().expect("validated"))
    }

    fn f64_or(&self, key: &str, default: f64) -> f64 {
        self.f64(key).unwrap_or(default)
    }

    fn usize_or(&self, key: &str, default: usize) -> usize {
        self.map
            .get(key)
            .map(|v| v.parse().expect("validated"))
            .unwrap_or(default)
    }

    fn u32_or(&self, key: &str, default: u32) -> u32 {
        self.map
            .get(key)
            .map(|v| v.parse().expect("validated"))
            .unwrap_or(default)
    }

    fn seed(&self) -> u64 {
        self.map
            .get("seed")
            .map(|v| v.parse().expect("validated"))
            .expect("required key checked")
    }

    fn domain(&self) -> Domain {
        match self.str("domain") {
            Some("square") => Domain::Square,
            _ => Domain::Torus,
        }
    }

    fn builder(&self) -> BuilderChoice {
        match self.str("builder") {
            Some("pruned") => BuilderChoice::Pruned {
                eps_miss: self.f64_or("eps-miss", 0.01),
            },
            _ => BuilderChoice::Exact,
        }
    }

    fn model(&self) -> Result<ConnectionModel, CliError> {
        build_model(self.map).map_err(|issue| match issue {
            ModelIssue::Flags(e) => e,
            ModelIssue::Content(msg) => CliError {
                code: 1,
                message: format!("model validation failed: {msg}"),
            },
        })
    }
}

/// Model construction failures split by blame: missing or unreadable flag
/// inputs versus profile data that fails its own rules.
enum ModelIssue {
    Flags(CliError),
    Content(String),
}

fn build_model(map: &BTreeMap<String, String>) -> Result<ConnectionModel, ModelIssue> {
    match map.get("model").map(String::as_str).unwrap_or("unit-disk") {
        "unit-disk" => Ok(ConnectionModel::UnitDisk),
        "exponential" => Ok(ConnectionModel::Exponential),
        "rayleigh" => Ok(ConnectionModel::Rayleigh),
        "lognormal" => {
            let need = |key: &str| {
                map.get(key).map(|v| v.parse::<f64>().expect("validated")).ok_or_else(|| {
                    ModelIssue::Flags(CliError::flags(format!(
                        "missing required flag --{key} for the lognormal model"
                    )))
                })
            };
            ConnectionModel::log_normal_shadow(need("sigma")?, need("alpha")?)
                .map_err(|e| ModelIssue::Content(e.to_string()))
        }
        "tabulated" => {
            let path = map.get("file").ok_or_else(|| {
                ModelIssue::Flags(CliError::flags(
                    "missing required flag --file for the tabulated model",
                ))
            })?;
            let text = fs::read_to_string(path).map_err(|e| {
                ModelIssue::Flags(CliError::flags(format!("cannot read --file {path}: {e}")))
            })?;
            ConnectionModel::tabulated_from_str(&text)
                .map_err(|e| ModelIssue::Content(e.to_string()))
        }
        other => unreachable!("model `{other}` slipped past validation"),
    }
}

/// Optional dedicated thread pool: `--workers`, then env `RCM_LAB_WORKERS`,
/// then the library default.
fn build_pool(ctx: &Ctx) -> Result<Option<rayon::ThreadPool>, CliError> {
    let n = match ctx.map.get("workers") {
        Some(v) => Some(v.parse::<usize>().expect("validated")),
        None => match std::env::var("RCM_LAB_WORKERS") {
            Ok(raw) => {
                let v: usize = raw.parse().map_err(|_| {
                    CliError::flags(format!(
                        "invalid value for RCM_LAB_WORKERS: `{raw}` is not a positive integer"
                    ))
                })?;
                if v == 0 {
                    return Err(CliError::flags(
                        "invalid value for RCM_LAB_WORKERS: must be at least 1",
                    ));
                }
                Some(v)
            }
            Err(_) => None,
        },
    };
    match n {
        Some(v) => rayon::ThreadPoolBuilder::new()
            .num_threads(v)
            .build()
            .map(Some)
            .map_err(|e| CliError::run("thread pool construction", e)),
        None => Ok(None),
    }
}

fn with_pool<T: Send>(pool: &Option<rayon::ThreadPool>, f: impl FnOnce() -> T + Send) -> T {
    match pool {
        Some(p) => p.install(f),
        None => f(),
    }
}

fn experiment_config(ctx: &Ctx, rho_grid: Vec<f64>) -> Result<ExperimentConfig, CliError> {
    Ok(ExperimentConfig {
        model: ctx.model()?,
        domain: ctx.domain(),
        rho_grid,
        b: ctx.f64_or("b", 0.0),
        trials: ctx.usize_or("trials", montecarlo::DEFAULT_TRIALS),
        seed: ctx.seed(),
        m: ctx.u32_or("M", 20),
        builder: ctx.builder(),
    })
}

fn doc_from_table(table: SweepTable) -> Result<OutputDoc, CliError> {
    let csv_rows = table.csv_rows();
    let csv_footer = table.trend_lines();
    let mut json_rows = Vec::with_capacity(table.rows.len() + table.trends.len());
    for row in &table.rows {
        json_rows.push(to_json(row)?);
    }
    for trend in &table.trends {
        json_rows.push(to_json(trend)?);
    }
    Ok(OutputDoc {
        csv_schema: SweepTable::csv_header(),
        csv_rows,
        csv_footer,
        json_rows,
        failure: None,
    })
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<serde_json::Value, CliError> {
    serde_json::to_value(value).map_err(|e| CliError::run("output serialization", e))
}

fn run_simulate(map: &BTreeMap<String, String>) -> Result<OutputDoc, CliError> {
    let ctx = Ctx { map };
    let rho = ctx.f64("rho").expect("required key checked");
    let cfg = experiment_config(&ctx, vec![rho])?;
    let pool = build_pool(&ctx)?;
    let trials = with_pool(&pool, || montecarlo::run_trials(&cfg, 0))
        .map_err(|e| CliError::run("montecarlo::run_trials", e))?;
    let row = montecarlo::sweep_row(&cfg, 0, &trials)
        .map_err(|e| CliError::run("montecarlo::sweep_row", e))?;
    if let Some(path) = ctx.str("dump-trials") {
        let mut text = String::new();
        for trial in &trials {
            text.push_str(
                &serde_json::to_string(trial)
                    .map_err(|e| CliError::run("trial serialization", e))?,
            );
            text.push('\n');
        }
        fs::write(path, text)
            .map_err(|e| CliError::run(&format!("writing --dump-trials {path}"), e))?;
    }
    doc_from_table(SweepTable {
        rows: vec![row],
        trends: Vec::new(),
    })
}

fn run_sweep(map: &BTreeMap<String, String>) -> Result<OutputDoc, CliError> {
    let ctx = Ctx { map };
    let grid = parse_rho_grid(ctx.str("rho-grid").expect("required key checked"))
        .expect("validated");
    let cfg = experiment_config(&ctx, grid)?;
    let pool = build_pool(&ctx)?;
    let table = with_pool(&pool, || montecarlo::convergence_sweep(&cfg))
        .map_err(|e| CliError::run("montecarlo::convergence_sweep", e))?;
    doc_from_table(table)
}

fn run_theory(map: &BTreeMap<String, String>) -> Result<OutputDoc, CliError> {
    let ctx = Ctx { map };
    let b = ctx.f64("b").expect("required key checked");
    let m = ctx.u32_or("M", 20);
    let wrap = |r: rcm_lab::Result<Prediction>| {
        r.map_err(|e| CliError::run("prediction assembly", e))
    };
    let params_b = format!("b={b}");
    let mut preds = vec![
        wrap(Prediction::quantity(
            "mean_isolated_limit",
            theory::mean_isolated_asymptotic(b),
            PredictionKind::Asymptotic,
            &params_b,
        ))?,
        wrap(Prediction::probability(
            "p_no_isolated_limit",
            theory::prob_no_isolated_asymptotic(b),
            PredictionKind::Asymptotic,
            &params_b,
        ))?,
        wrap(Prediction::probability(
            "p_connected_limit",
            theory::prob_connected_asymptotic(b),
            PredictionKind::Asymptotic,
            &params_b,
        ))?,
    ];
    if let Some(rho) = ctx.f64("rho") {
        let model = ctx.model()?;
        let domain = ctx.domain();
        let exact = theory::mean_isolated_exact(rho, b, &model, domain, 1e-9)
            .map_err(|e| CliError::run("theory::mean_isolated_exact", e))?;
        preds.push(wrap(Prediction::quantity(
            "mean_isolated_exact",
            exact.value,
            PredictionKind::ExactFiniteRho,
            &format!(
                "rho={rho} b={b} model={} domain={}",
                model.label(),
                domain.label()
            ),
        ))?);
    }
    let params_m = format!("M={m} b={b}");
    preds.push(wrap(Prediction::probability(
        "p_single_giant_lower",
        theory::xi_gtm_prob_lower_bound(m, b),
        PredictionKind::Bound,
        &params_m,
    ))?);
    preds.push(wrap(Prediction::quantity(
        "mean_xi_above_m_upper",
        theory::mean_xi_gtm_upper_bound(m, b),
        PredictionKind::Bound,
        &params_m,
    ))?);

    let mut csv_rows = Vec::with_capacity(preds.len());
    let mut json_rows = Vec::with_capacity(preds.len());
    for p in &preds {
        csv_rows.push(format!(
            "{},{},{:?},{}",
            csv_field(&p.name),
            sig9(p.value),
            p.kind,
            csv_field(&p.params)
        ));
        json_rows.push(to_json(p)?);
    }
    Ok(OutputDoc {
        csv_schema: "name,value,kind,params",
        csv_rows,
        csv_footer: Vec::new(),
        json_rows,
        failure: None,
    })
}

fn run_chenstein(map: &BTreeMap<String, String>) -> Result<OutputDoc, CliError> {
    let ctx = Ctx { map };
    let grid = parse_rho_grid(ctx.str("rho-grid").expect("required key checked"))
        .expect("validated");
    let b = ctx.f64_or("b", 0.0);
    let spec = match ctx.f64("epsilon") {
        Some(e) => NeighborhoodSpec::new(e).map_err(|e| CliError::run("neighborhood spec", e))?,
        None => NeighborhoodSpec::default(),
    };
    let model = ctx.model()?;
    let domain = ctx.domain();
    let mut csv_rows = Vec::with_capacity(grid.len());
    let mut json_rows = Vec::with_capacity(grid.len());
    for rho in grid {
        let report = chenstein::tv_bound_total(rho, b, spec, &model, domain)
            .map_err(|e| CliError::run("chenstein::tv_bound_total", e))?;
        csv_rows.push(
            [
                report.rho,
                report.b,
                report.epsilon,
                report.b1,
                report.b2_bound,
                report.b3_gap,
                report.eta,
                report.total,
            ]
            .map(sig9)
            .join(","),
        );
        json_rows.push(to_json(&report)?);
    }
    Ok(OutputDoc {
        csv_schema: BoundReport::csv_header(),
        csv_rows,
        csv_footer: Vec::new(),
        json_rows,
        failure: None,
    })
}

fn decay_grid() -> Vec<f64> {
    let (lo, hi, n) = (1e-2f64, 1e3f64, 160usize);
    (0..n)
        .map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64))
        .collect()
}

fn run_validate(map: &BTreeMap<String, String>) -> Result<OutputDoc, CliError> {
    let mut rows: Vec<(&'static str, &'static str, String)> = Vec::new();
    match build_model(map) {
        Err(ModelIssue::Flags(e)) => return Err(e),
        Err(ModelIssue::Content(msg)) => {
            rows.push(("profile_shape", "fail", msg));
        }
        Ok(model) => {
            rows.push(("profile_shape", "ok", model.label()));
            match connfn::spreading_constant(&model, 1e-10) {
                Ok(q) => rows.push((
                    "spreading_constant",
                    "ok",
                    format!("{} (quadrature error {})", sig9(q.value), sig9(q.abs_err)),
                )),
                Err(e) => rows.push(("spreading_constant", "fail", e.to_string())),
            }
            rows.push((
                "support_radius",
                "ok",
                model
                    .support_radius()
                    .map(sig9)
                    .unwrap_or_else(|| "unbounded".to_string()),
            ));
            match connfn::check_strict_decay(&model, &decay_grid()) {
                Ok(report) => match report.verdict {
                    DecayVerdict::Decaying => rows.push((
                        "tail_decay",
                        "ok",
                        "tail weight x^2 ln^2(x) g(x) falls across the grid tail".to_string(),
                    )),
                    DecayVerdict::Violated => rows.push((
                        "tail_decay",
                        "fail",
                        format!(
                            "tail weight x^2 ln^2(x) g(x) rises at x = {}",
                            report.witness.map(sig9).unwrap_or_else(|| "?".to_string())
                        ),
                    )),
                    DecayVerdict::Inconclusive => rows.push((
                        "tail_decay",
                        "inconclusive",
                        "the check grid ends before the tail can be judged".to_string(),
                    )),
                },
                Err(e) => rows.push(("tail_decay", "fail", e.to_string())),
            }
        }
    }
    let failure = rows
        .iter()
        .find(|(_, outcome, _)| *outcome == "fail")
        .map(|(check, _, detail)| CliError {
            code: 1,
            message: format!("validate-model: {check}: {detail}"),
        });
    let csv_rows = rows
        .iter()
        .map(|(check, outcome, detail)| format!("{check},{outcome},{}", csv_field(detail)))
        .collect();
    let json_rows = rows
        .iter()
        .map(|(check, outcome, detail)| {
            json!({ "check": check, "outcome": outcome, "detail": detail })
        })
        .collect();
    Ok(OutputDoc {
        csv_schema: "check,outcome,detail",
        csv_rows,
        csv_footer: Vec::new(),
        json_rows,
        failure,
    })
}

/// Keys that steer where and how results are written, or how many threads
/// compute them, without changing a single result value. They stay in
/// emitted config files but are left out of the config hash so that the
/// hash identifies the experiment itself.
const HARNESS_KEYS: [&str; 4] = ["workers", "out", "format", "dump-trials"];

fn experiment_hash(sub: SubcommandKind, map: &BTreeMap<String, String>) -> u64 {
    let filtered: BTreeMap<String, String> = map
        .iter()
        .filter(|(k, _)| !HARNESS_KEYS.contains(&k.as_str()))
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect();
    stream::hash_bytes(render_config(sub.name(), &filtered).as_bytes())
}

/// RFC-4180 quoting: wrap and double quotes only when the field needs it.
fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn write_doc(
    sub: SubcommandKind,
    map: &BTreeMap<String, String>,
    doc: OutputDoc,
) -> Result<(), CliError> {
    let format = map
        .get("format")
        .map(|v| OutputFormat::parse(v).expect("validated"))
        .unwrap_or(OutputFormat::Csv);
    let path = map.get("out").map(PathBuf::from);
    let hash = experiment_hash(sub, map);
    let seed: Option<u64> = map.get("seed").map(|v| v.parse().expect("validated"));
    let mut text = String::new();
    match format {
        OutputFormat::Csv => {
            text.push_str(&format!("# version {}\n", env!("CARGO_PKG_VERSION")));
            text.push_str(&format!("# subcommand {}\n", sub.name()));
            match seed {
                Some(s) => text.push_str(&format!("# seed {s}\n")),
                None => text.push_str("# seed none\n"),
            }
            text.push_str(&format!("# config-hash {hash:016x}\n"));
            text.push_str(&format!("# generated {}\n", unix_now()));
            text.push_str(doc.csv_schema);
            text.push('\n');
            for row in &doc.csv_rows {
                text.push_str(row);
                text.push('\n');
            }
            for line in &doc.csv_footer {
                text.push_str(line);
                text.push('\n');
            }
        }
        OutputFormat::Jsonl => {
            let meta = json!({
                "version": env!("CARGO_PKG_VERSION"),
                "subcommand": sub.name(),
                "seed": seed,
                "config_hash": format!("{hash:016x}"),
            });
            text.push_str(&meta.to_string());
            text.push('\n');
            for value in &doc.json_rows {
                text.push_str(&value.to_string());
                text.push('\n');
            }
        }
    }
    match path {
        Some(p) => fs::write(&p, text)
            .map_err(|e| CliError::run(&format!("writing --out {}", p.display()), e))?,
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::run("writing stdout", e))?,
    }
    match doc.failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}
