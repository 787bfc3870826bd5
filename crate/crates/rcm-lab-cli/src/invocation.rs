//! Command-line surface: subcommands, flags, and the parsed invocation.
//!
//! Parsing is purely syntactic and deterministic: it reads no files and
//! runs nothing. Every flag value is kept as a string in a flag map so
//! that command-line values and config-file values flow through one
//! validation path, with the command line winning on conflicts.

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;

/// A failure carrying the process exit code it should produce: 2 for
/// malformed flags or configuration, 1 for failures while running, 0 for
/// help and version requests (whose text still has to reach the user).
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    /// Flag or config problem; exits with code 2.
    pub fn flags(message: impl Into<String>) -> Self {
        CliError {
            code: 2,
            message: message.into(),
        }
    }

    /// Failure inside a named operation while running; exits with code 1.
    pub fn run(op: &str, err: impl fmt::Display) -> Self {
        CliError {
            code: 1,
            message: format!("{op} failed: {err}"),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SubcommandKind {
    Simulate,
    Theory,
    Chenstein,
    Sweep,
    ValidateModel,
}

impl SubcommandKind {
    pub fn name(self) -> &'static str {
        match self {
            SubcommandKind::Simulate => "simulate",
            SubcommandKind::Theory => "theory",
            SubcommandKind::Chenstein => "chenstein",
            SubcommandKind::Sweep => "sweep",
            SubcommandKind::ValidateModel => "validate-model",
        }
    }

    /// Keys this subcommand honors. Anything else on its command line or
    /// in its config section is an error; unknown *global* config keys are
    /// skipped so one file can serve several subcommands.
    pub fn allowed_keys(self) -> &'static [&'static str] {
        match self {
            SubcommandKind::Simulate => &[
                "model",
                "sigma",
                "alpha",
                "file",
                "rho",
                "b",
                "trials",
                "seed",
                "workers",
                "M",
                "domain",
                "builder",
                "eps-miss",
                "dump-trials",
                "out",
                "format",
            ],
            SubcommandKind::Theory => &[
                "model", "sigma", "alpha", "file", "rho", "b", "M", "domain", "out", "format",
            ],
            SubcommandKind::Chenstein => &[
                "model", "sigma", "alpha", "file", "rho-grid", "b", "epsilon", "domain", "out",
                "format",
            ],
            SubcommandKind::Sweep => &[
                "model",
                "sigma",
                "alpha",
                "file",
                "rho-grid",
                "b",
                "trials",
                "seed",
                "workers",
                "M",
                "domain",
                "builder",
                "eps-miss",
                "out",
                "format",
            ],
            SubcommandKind::ValidateModel => &["model", "sigma", "alpha", "file", "out", "format"],
        }
    }

    /// Keys that must be present (from flags or config) before running.
    pub fn required_keys(self) -> &'static [&'static str] {
        match self {
            SubcommandKind::Simulate => &["rho", "seed"],
            SubcommandKind::Theory => &["b"],
            SubcommandKind::Chenstein => &["rho-grid"],
            SubcommandKind::Sweep => &["rho-grid", "seed"],
            SubcommandKind::ValidateModel => &[],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Jsonl,
}

impl OutputFormat {
    pub fn parse(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "jsonl" => Ok(OutputFormat::Jsonl),
            other => Err(format!("got `{other}`, expected csv or jsonl")),
        }
    }
}

/// Where results go and how they are encoded.
#[derive(Clone, Debug, PartialEq)]
pub struct OutputSpec {
    /// Destination path; stdout when absent.
    pub path: Option<PathBuf>,
    pub format: OutputFormat,
}

/// One fully parsed command line.
#[derive(Clone, Debug, PartialEq)]
pub struct CliInvocation {
    pub subcommand: SubcommandKind,
    pub config_path: Option<PathBuf>,
    /// Flags given on the command line, as `key -> value` strings. These
    /// win over config-file values.
    pub overrides: BTreeMap<String, String>,
    /// Output destination as seen from the flags alone; a config file can
    /// still supply `out`/`format` when the flags leave them unset.
    pub output: OutputSpec,
    /// Write the effective configuration here and exit instead of running.
    pub emit_config: Option<PathBuf>,
}

const LONG_ABOUT: &str = "\
Random connection networks: Poisson points on the unit window link at \
probability g(distance / r), with r tied to the density so isolated nodes \
and connectivity settle to known laws. Subcommands estimate those laws by \
simulation (simulate, sweep), print their predicted values (theory), bound \
the Poisson-approximation error (chenstein), and sanity-check a connection \
profile (validate-model).";

const AFTER_HELP: &str = "\
Output schemas (CSV columns after `# key value` header lines):
  simulate, sweep   rho,statistic,estimate,stderr,prediction
  theory            name,value,kind,params
  chenstein         rho,b,epsilon,b1,b2_bound,b3_gap,eta,total
  validate-model    check,outcome,detail
Numbers print with 9 significant digits. With --format jsonl the same rows
are emitted as one JSON object per line after a meta line.

Config files are flat `key = value` text; keys match the long flags. Keys
before any `[section]` apply to every subcommand, `[simulate]`-style
sections to one. Command-line flags win over file values.";

#[derive(Parser)]
#[command(
    name = "rcm-lab",
    version,
    about = "Connectivity laboratory for random connection networks",
    long_about = LONG_ABOUT,
    after_help = AFTER_HELP,
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Estimate connectivity statistics at one density
    Simulate(FlagArgs),
    /// Print limit values, exact finite-density references, and census bounds
    Theory(FlagArgs),
    /// Print Poisson-approximation bound terms over a density grid
    Chenstein(FlagArgs),
    /// Estimate over a density grid and flag how each column moves
    Sweep(FlagArgs),
    /// Check a connection profile: shape, total mass, tail decay
    ValidateModel(FlagArgs),
}

#[derive(Args)]
struct FlagArgs {
    /// Connection profile: unit-disk, exponential, rayleigh, lognormal, tabulated
    #[arg(long)]
    model: Option<String>,

    /// Shadowing spread (lognormal model)
    #[arg(long, allow_negative_numbers = true)]
    sigma: Option<f64>,

    /// Distance exponent (lognormal model)
    #[arg(long, allow_negative_numbers = true)]
    alpha: Option<f64>,

    /// Two-column knot file (tabulated model); `#` starts a comment
    #[arg(long)]
    file: Option<PathBuf>,

    /// Node density: expected node count on the unit window
    #[arg(long, allow_negative_numbers = true)]
    rho: Option<f64>,

    /// Comma-separated strictly increasing densities, e.g. 200,800,3200
    #[arg(long, value_name = "a,b,c", allow_hyphen_values = true)]
    rho_grid: Option<String>,

    /// Connectivity offset in the critical radius sqrt((ln rho + b) / (C rho))
    #[arg(long, allow_negative_numbers = true)]
    b: Option<f64>,

    /// Neighborhood exponent for the Poisson-approximation bound, in (0, 0.5)
    #[arg(long, allow_negative_numbers = true)]
    epsilon: Option<f64>,

    /// Trials per density (default 10000)
    #[arg(long)]
    trials: Option<usize>,

    /// Master seed; every random stream in the run derives from it
    #[arg(long)]
    seed: Option<u64>,

    /// Worker threads; falls back to env RCM_LAB_WORKERS. Results do not
    /// depend on it.
    #[arg(long)]
    workers: Option<usize>,

    /// Component-order threshold for the larger-than-M census (default 20)
    #[arg(long = "M")]
    m: Option<u32>,

    /// square or torus (default torus)
    #[arg(long)]
    domain: Option<String>,

    /// Edge sampling: exact (every pair) or pruned (cell grid)
    #[arg(long)]
    builder: Option<String>,

    /// Expected missed-edge budget for the pruned builder (default 0.01)
    #[arg(long)]
    eps_miss: Option<f64>,

    /// Results path; stdout when absent
    #[arg(long)]
    out: Option<PathBuf>,

    /// csv or jsonl (default csv)
    #[arg(long)]
    format: Option<String>,

    /// Also write every trial as one JSON line to this path (simulate only)
    #[arg(long)]
    dump_trials: Option<PathBuf>,

    /// Write the effective configuration to this path and exit
    #[arg(long)]
    emit_config: Option<PathBuf>,

    /// Flat key = value configuration file; flags win over its values
    #[arg(long)]
    config: Option<PathBuf>,
}

impl FlagArgs {
    fn to_map(&self) -> BTreeMap<String, String> {
        let mut map = BTreeMap::new();
        let mut put = |key: &str, value: Option<String>| {
            if let Some(v) = value {
                map.insert(key.to_string(), v);
            }
        };
        put("model", self.model.clone());
        put("sigma", self.sigma.map(display_f64));
        put("alpha", self.alpha.map(display_f64));
        put("file", self.file.as_ref().map(display_path));
        put("rho", self.rho.map(display_f64));
        put("rho-grid", self.rho_grid.clone());
        put("b", self.b.map(display_f64));
        put("epsilon", self.epsilon.map(display_f64));
        put("trials", self.trials.map(|v| v.to_string()));
        put("seed", self.seed.map(|v| v.to_string()));
        put("workers", self.workers.map(|v| v.to_string()));
        put("M", self.m.map(|v| v.to_string()));
        put("domain", self.domain.clone());
        put("builder", self.builder.clone());
        put("eps-miss", self.eps_miss.map(display_f64));
        put("out", self.out.as_ref().map(display_path));
        put("format", self.format.clone());
        put("dump-trials", self.dump_trials.as_ref().map(display_path));
        map
    }
}

fn display_f64(x: f64) -> String {
    format!("{x}")
}

fn display_path(p: &PathBuf) -> String {
    p.display().to_string()
}

/// Splits a `--rho-grid` value into a validated density list.
pub fn parse_rho_grid(s: &str) -> Result<Vec<f64>, String> {
    let mut grid = Vec::new();
    for part in s.split(',') {
        let part = part.trim();
        let v: f64 = part
            .parse()
            .map_err(|_| format!("`{part}` is not a number"))?;
        if !(v.is_finite() && v > 0.0) {
            return Err(format!("density {v} must be finite and positive"));
        }
        grid.push(v);
    }
    if grid.is_empty() {
        return Err("the grid is empty".to_string());
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err("densities must be strictly increasing".to_string());
    }
    Ok(grid)
}

fn check_f64(key: &str, value: &str) -> Result<f64, CliError> {
    value.parse::<f64>().map_err(|_| {
        CliError::flags(format!(
            "invalid value for --{key}: `{value}` is not a number"
        ))
    })
}

fn check_unsigned(key: &str, value: &str) -> Result<u64, CliError> {
    value.parse::<u64>().map_err(|_| {
        CliError::flags(format!(
            "invalid value for --{key}: `{value}` is not a non-negative integer"
        ))
    })
}

/// Range- and shape-checks every value in a flag map. Used on the command
/// line at parse time and again on the merged flag + config map, so both
/// sources get identical diagnostics.
pub fn validate_values(map: &BTreeMap<String, String>) -> Result<(), CliError> {
    for (key, value) in map {
        match key.as_str() {
            "rho" => {
                let v = check_f64(key, value)?;
                if !(v.is_finite() && v > 0.0) {
                    return Err(CliError::flags(format!(
                        "invalid value for --rho: density must be finite and positive, got {v}"
                    )));
                }
            }
            "rho-grid" => {
                parse_rho_grid(value).map_err(|reason| {
                    CliError::flags(format!("invalid value for --rho-grid: {reason}"))
                })?;
            }
            "b" | "sigma" | "alpha" => {
                let v = check_f64(key, value)?;
                if !v.is_finite() {
                    return Err(CliError::flags(format!(
                        "invalid value for --{key}: must be finite, got {v}"
                    )));
                }
            }
            "epsilon" => {
                let v = check_f64(key, value)?;
                if !(v > 0.0 && v < 0.5) {
                    return Err(CliError::flags(format!(
                        "invalid value for --epsilon: must lie in (0, 0.5), got {v}"
                    )));
                }
            }
            "eps-miss" => {
                let v = check_f64(key, value)?;
                if !(v.is_finite() && v > 0.0) {
                    return Err(CliError::flags(format!(
                        "invalid value for --eps-miss: must be finite and positive, got {v}"
                    )));
                }
            }
            "trials" | "workers" => {
                let v = check_unsigned(key, value)?;
                if v == 0 {
                    return Err(CliError::flags(format!(
                        "invalid value for --{key}: must be at least 1"
                    )));
                }
            }
            "seed" => {
                check_unsigned(key, value)?;
            }
            "M" => {
                let v = check_unsigned(key, value)?;
                u32::try_from(v).map_err(|_| {
                    CliError::flags(format!("invalid value for --M: {v} is too large"))
                })?;
            }
            "model" => {
                const MODELS: [&str; 5] =
                    ["unit-disk", "exponential", "rayleigh", "lognormal", "tabulated"];
                if !MODELS.contains(&value.as_str()) {
                    return Err(CliError::flags(format!(
                        "invalid value for --model: got `{value}`, expected one of {}",
                        MODELS.join(", ")
                    )));
                }
            }
            "domain" => {
                if value != "square" && value != "torus" {
                    return Err(CliError::flags(format!(
                        "invalid value for --domain: got `{value}`, expected square or torus"
                    )));
                }
            }
            "builder" => {
                if value != "exact" && value != "pruned" {
                    return Err(CliError::flags(format!(
                        "invalid value for --builder: got `{value}`, expected exact or pruned"
                    )));
                }
            }
            "format" => {
                OutputFormat::parse(value).map_err(|reason| {
                    CliError::flags(format!("invalid value for --format: {reason}"))
                })?;
            }
            "file" | "out" | "dump-trials" => {}
            other => {
                return Err(CliError::flags(format!("unknown key `{other}`")));
            }
        }
    }
    Ok(())
}

/// Rejects map keys the subcommand cannot honor. `origin` names where the
/// keys came from for the diagnostic.
pub fn check_applicability(
    sub: SubcommandKind,
    keys: impl Iterator<Item = impl AsRef<str>>,
    origin: &str,
) -> Result<(), CliError> {
    for key in keys {
        let key = key.as_ref();
        if !sub.allowed_keys().contains(&key) {
            return Err(CliError::flags(format!(
                "--{key} ({origin}) does not apply to `{}`",
                sub.name()
            )));
        }
    }
    Ok(())
}

/// Parses a command line into an invocation without touching the
/// filesystem. Help and version requests surface as `CliError` with exit
/// code 0 so the caller can print them and stop.
pub fn parse_invocation<I, T>(argv: I) -> Result<CliInvocation, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(|e| {
        let code = match e.kind() {
            ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
            _ => 2,
        };
        CliError {
            code,
            message: e.render().to_string().trim_end().to_string(),
        }
    })?;
    let (subcommand, args) = match &cli.cmd {
        Cmd::Simulate(a) => (SubcommandKind::Simulate, a),
        Cmd::Theory(a) => (SubcommandKind::Theory, a),
        Cmd::Chenstein(a) => (SubcommandKind::Chenstein, a),
        Cmd::Sweep(a) => (SubcommandKind::Sweep, a),
        Cmd::ValidateModel(a) => (SubcommandKind::ValidateModel, a),
    };
    let overrides = args.to_map();
    check_applicability(subcommand, overrides.keys(), "command line")?;
    validate_values(&overrides)?;
    let format = match overrides.get("format") {
        Some(v) => OutputFormat::parse(v).expect("validated above"),
        None => OutputFormat::Csv,
    };
    Ok(CliInvocation {
        subcommand,
        config_path: args.config.clone(),
        output: OutputSpec {
            path: args.out.clone(),
            format,
        },
        emit_config: args.emit_config.clone(),
        overrides,
    })
}
