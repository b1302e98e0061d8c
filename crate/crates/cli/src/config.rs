//! Run configuration merged from flags (or their `POLARDUAL_*` variables),
//! an optional TOML file, and the defaults, in that order of precedence.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use polardual::gamma::Convention;
use polardual::Effort;
use serde::Deserialize;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
    Svg,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConventionArg {
    #[default]
    Standard,
    PaperLiteral,
}

impl From<ConventionArg> for Convention {
    fn from(c: ConventionArg) -> Self {
        match c {
            ConventionArg::Standard => Convention::Standard,
            ConventionArg::PaperLiteral => Convention::PaperLiteral,
        }
    }
}

/// Options shared by every subcommand.
#[derive(Clone, Debug, Default, Args)]
pub struct GlobalArgs {
    /// TOML file with default values for the options below.
    #[arg(long, global = true, env = "POLARDUAL_CONFIG", value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Seed for every randomized step.
    #[arg(long, global = true, env = "POLARDUAL_SEED")]
    pub seed: Option<u64>,
    /// Absolute tolerance for floating comparisons.
    #[arg(long, global = true, env = "POLARDUAL_ABS_TOL", allow_negative_numbers = true)]
    pub abs_tol: Option<f64>,
    /// Slack for inequalities between certified quantities.
    #[arg(long, global = true, env = "POLARDUAL_ETA", allow_negative_numbers = true)]
    pub eta: Option<f64>,
    /// Hard cap on lattice points in a candidate grid.
    #[arg(long, global = true, env = "POLARDUAL_GRID_BUDGET")]
    pub grid_budget: Option<u64>,
    /// Preferred grid cell radius as a fraction of the covering radius.
    #[arg(long, global = true, env = "POLARDUAL_CELL_FRAC", allow_negative_numbers = true)]
    pub cell_frac: Option<f64>,
    /// Soft cap on lattice points per grid.
    #[arg(long, global = true, env = "POLARDUAL_GRID_SOFT_POINTS")]
    pub grid_soft_points: Option<u64>,
    /// Candidate count up to which packings are solved exactly.
    #[arg(long, global = true, env = "POLARDUAL_EXACT_CUTOFF")]
    pub exact_cutoff: Option<usize>,
    /// Node limit for branch-and-bound searches.
    #[arg(long, global = true, env = "POLARDUAL_NODE_LIMIT")]
    pub node_limit: Option<u64>,
    /// Largest volume bound for which polytope covers are certified exactly.
    #[arg(long, global = true, env = "POLARDUAL_EXACT_POLYTOPE_MAX_COUNT")]
    pub exact_polytope_max_count: Option<u64>,
    /// Cutting rounds for exact polytope certificates.
    #[arg(long, global = true, env = "POLARDUAL_EXACT_POLYTOPE_ROUNDS")]
    pub exact_polytope_rounds: Option<usize>,
    /// Relative bisection tolerance on entropy numbers.
    #[arg(long, global = true, env = "POLARDUAL_BISECT_TOL", allow_negative_numbers = true)]
    pub bisect_tol: Option<f64>,
    /// Maximum bisection steps per entropy number.
    #[arg(long, global = true, env = "POLARDUAL_BISECT_MAX_STEPS")]
    pub bisect_max_steps: Option<usize>,
    /// Restarts for the convex-separation greedy search.
    #[arg(long, global = true, env = "POLARDUAL_RESTARTS")]
    pub restarts: Option<usize>,
    /// Chaining level-0 convention.
    #[arg(long, global = true, env = "POLARDUAL_CONVENTION", value_enum)]
    pub convention: Option<ConventionArg>,
    /// Output format of the primary report.
    #[arg(long, global = true, env = "POLARDUAL_FORMAT", value_enum)]
    pub format: Option<Format>,
    /// Write the primary report here instead of standard output.
    #[arg(short, long, global = true, env = "POLARDUAL_OUTPUT", value_name = "FILE")]
    pub output: Option<PathBuf>,
    /// Worker thread cap (default: all cores).
    #[arg(long, global = true, env = "POLARDUAL_THREADS")]
    pub threads: Option<usize>,
}

/// The TOML file layout; keys mirror the long flag names.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
struct FileConfig {
    seed: Option<u64>,
    abs_tol: Option<f64>,
    eta: Option<f64>,
    grid_budget: Option<u64>,
    cell_frac: Option<f64>,
    grid_soft_points: Option<u64>,
    exact_cutoff: Option<usize>,
    node_limit: Option<u64>,
    exact_polytope_max_count: Option<u64>,
    exact_polytope_rounds: Option<usize>,
    bisect_tol: Option<f64>,
    bisect_max_steps: Option<usize>,
    restarts: Option<usize>,
    convention: Option<ConventionArg>,
    format: Option<Format>,
    output: Option<PathBuf>,
    threads: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    pub effort: Effort,
    pub convention: ConventionArg,
    pub format: Format,
    pub output: Option<PathBuf>,
    pub threads: Option<usize>,
}

impl Config {
    pub fn seed(&self) -> u64 {
        self.effort.seed
    }
}

#[derive(Debug, PartialEq)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

fn read_file(path: &Path) -> Result<FileConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("cannot read config file {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| ConfigError(format!("config file {}: {}", path.display(), e.message())))
}

/// Merges `args` over the file named by `args.config` over `base`.
pub fn parse_config(args: &GlobalArgs, base: Effort) -> Result<Config, ConfigError> {
    let file = match &args.config {
        Some(path) => read_file(path)?,
        None => FileConfig::default(),
    };
    let mut effort = base;
    macro_rules! layer {
        ($($field:ident),*) => {
            $(if let Some(v) = args.$field.or(file.$field) {
                effort.$field = v;
            })*
        };
    }
    layer!(
        seed,
        abs_tol,
        eta,
        grid_budget,
        cell_frac,
        grid_soft_points,
        exact_cutoff,
        node_limit,
        exact_polytope_max_count,
        exact_polytope_rounds,
        bisect_tol,
        bisect_max_steps,
        restarts
    );
    for (key, v) in [
        ("abs-tol", effort.abs_tol),
        ("eta", effort.eta),
        ("cell-frac", effort.cell_frac),
        ("bisect-tol", effort.bisect_tol),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(ConfigError(format!("{key} must be positive, got {v}")));
        }
    }
    for (key, v) in [
        ("grid-budget", effort.grid_budget),
        ("grid-soft-points", effort.grid_soft_points),
        ("restarts", effort.restarts as u64),
        ("bisect-max-steps", effort.bisect_max_steps as u64),
    ] {
        if v == 0 {
            return Err(ConfigError(format!("{key} must be at least 1")));
        }
    }
    if effort.cell_frac >= 0.5 {
        return Err(ConfigError(format!("cell-frac must be below 0.5, got {}", effort.cell_frac)));
    }
    let threads = args.threads.or(file.threads);
    if threads == Some(0) {
        return Err(ConfigError("threads must be at least 1".into()));
    }
    effort.validate().map_err(|e| ConfigError(e.to_string()))?;
    Ok(Config {
        effort,
        convention: args.convention.or(file.convention).unwrap_or_default(),
        format: args.format.or(file.format).unwrap_or_default(),
        output: args.output.clone().or(file.output),
        threads,
    })
}
