//! Subcommand definitions and dispatch.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use polardual::certificate::{verify, CertificateFile, Claim};
use polardual::covering::{cover_bracket, entropy_sequence, tail_check, TailRow};
use polardual::duality_lab::{
    duality_scan, fit_constants, generate_family, rows_to_csv, rows_to_svg, ExperimentSpec, FitSummary,
};
use polardual::gamma::{gamma_duality_report, gamma_duality_to_csv, gamma_estimates, gamma_rows_to_csv};
use polardual::separation::{separation_duality_check, separation_upper};
use polardual::{selftest, ConvexBody, Effort};
use serde::Serialize;

use crate::config::{parse_config, Config, Format, GlobalArgs};

/// Certified covering, entropy, separation and chaining bounds for
/// symmetric convex bodies.
#[derive(Debug, Parser)]
#[command(name = "polardual", version)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

/// Bodies are JSON files or built-in names: `l1:n[:r]`, `linf:n[:r]`,
/// `ball:n[:r]`, `box:n:r`, `lp:p:n[:r]`.
#[derive(Clone, Debug, clap::Args)]
pub struct PairArgs {
    /// The covered body K.
    #[arg(long = "K", value_name = "BODY")]
    pub k: String,
    /// The covering body T.
    #[arg(long = "T", value_name = "BODY")]
    pub t: String,
}

#[derive(Clone, Debug, clap::Args)]
pub struct FamilyArgs {
    /// Experiment file (TOML or JSON); its effort and seed sit below the
    /// config file in precedence.
    #[arg(long, value_name = "FILE")]
    pub spec: Option<PathBuf>,
    /// Family id (ellipsoid, l1-linf, box-cross, vpoly-ball) or `all`.
    #[arg(long)]
    pub family: Option<String>,
    /// Dimension of the generated bodies.
    #[arg(long)]
    pub n: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Bracket the covering number N(K, ρT).
    Cover {
        #[command(flatten)]
        pair: PairArgs,
        /// Scale ρ of the covering body.
        #[arg(long, default_value_t = 1.0)]
        rho: f64,
        /// Require centers inside K.
        #[arg(long)]
        restricted: bool,
        /// Also write a certificate file for the bracket.
        #[arg(long, value_name = "FILE")]
        certificate: Option<PathBuf>,
    },
    /// Bracket the entropy numbers e_0..e_kmax, or check the entropy tail
    /// inequality against e_n.
    Entropy {
        #[command(flatten)]
        pair: PairArgs,
        /// Largest entropy index.
        #[arg(long, default_value_t = 8)]
        k_max: u32,
        /// Report the tail inequality relative to this index instead.
        #[arg(long, value_name = "N")]
        tail: Option<u32>,
    },
    /// Greedy convex-separation lower bound with its covering upper bound
    /// and the dual-cover comparison.
    Separation {
        #[command(flatten)]
        pair: PairArgs,
        /// Also write the separation certificate.
        #[arg(long, value_name = "FILE")]
        certificate: Option<PathBuf>,
    },
    /// Sudakov, Dudley and chaining estimates of the γ_p functional.
    Gamma {
        #[command(flatten)]
        pair: PairArgs,
        /// Exponents p, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "1,2")]
        p: Vec<f64>,
        /// Largest entropy index.
        #[arg(long, default_value_t = 8)]
        k_max: u32,
        /// Explicit chaining levels.
        #[arg(long, default_value_t = 3)]
        levels: u32,
    },
    /// Compare N(K,T) with N(T°, K°/a) over a seeded family of pairs and fit
    /// the duality constants.
    DualityScan {
        #[command(flatten)]
        family: FamilyArgs,
        /// Scales a, comma separated (default: the experiment's grid).
        #[arg(long, value_delimiter = ',')]
        a_grid: Option<Vec<f64>>,
    },
    /// Compare chaining upper bounds with dual Sudakov lower bounds over a
    /// seeded family.
    GammaDuality {
        #[command(flatten)]
        family: FamilyArgs,
        /// Exponent p (default: the experiment's first p).
        #[arg(long)]
        p: Option<f64>,
        /// Largest entropy index (default: the experiment's range end).
        #[arg(long)]
        k_max: Option<u32>,
        /// Explicit chaining levels.
        #[arg(long, default_value_t = 3)]
        levels: u32,
    },
    /// Re-check a certificate file from scratch.
    Verify {
        /// Certificate file.
        file: PathBuf,
    },
    /// Run the built-in known-answer suite.
    Selftest,
}

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Compute(String),
}

impl From<polardual::Error> for Failure {
    fn from(e: polardual::Error) -> Self {
        Failure::Compute(e.to_string())
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn parse_body(arg: &str) -> Result<ConvexBody, Failure> {
    let path = Path::new(arg);
    if path.is_file() {
        let text = std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read {arg}: {e}")))?;
        return ConvexBody::from_json(&text).map_err(|e| usage(format!("{arg}: {e}")));
    }
    ConvexBody::builtin(arg).map_err(|e| usage(format!("body `{arg}` is neither a file nor a built-in: {e}")))
}

fn parse_pair(pair: &PairArgs) -> Result<(ConvexBody, ConvexBody), Failure> {
    let (k, t) = (parse_body(&pair.k)?, parse_body(&pair.t)?);
    if k.dim() != t.dim() {
        return Err(usage(format!("K has dimension {} but T has dimension {}", k.dim(), t.dim())));
    }
    Ok((k, t))
}

fn load_spec(args: &FamilyArgs) -> Result<ExperimentSpec, Failure> {
    let mut spec = match &args.spec {
        None => ExperimentSpec::default(),
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
            let parsed = if path.extension().is_some_and(|e| e == "json") {
                serde_json::from_str(&text).map_err(|e| e.to_string())
            } else {
                toml::from_str(&text).map_err(|e| e.message().to_string())
            };
            parsed.map_err(|e| usage(format!("{}: {e}", path.display())))?
        }
    };
    if let Some(f) = &args.family {
        spec.family = f.clone();
    }
    if let Some(n) = args.n {
        spec.n = n;
    }
    Ok(spec)
}

fn emit(config: &Config, text: &str) -> Result<(), Failure> {
    match &config.output {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Failure::Compute(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

fn no_svg(command: &str) -> Failure {
    usage(format!("svg output is only available for duality-scan, not {command}"))
}

fn tail_csv(rows: &[TailRow]) -> String {
    let mut out = String::from("k,e_lo,e_hi,bound,status,implied_c\n");
    for r in rows {
        let status = serde_json::to_value(r.status).expect("status serializes");
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.k,
            r.e_k.lo,
            r.e_k.hi,
            r.bound,
            status.as_str().unwrap_or_default(),
            r.implied_c
        );
    }
    out
}

fn fit_report(fit: &FitSummary) -> String {
    let mut out = String::new();
    for g in &fit.groups {
        let _ = write!(out, "fit {}: a = {}, b = {}", g.group, g.a, g.b);
        if !g.loose.is_empty() {
            let _ = write!(out, " (loose brackets: {})", g.loose.join(" "));
        }
        out.push('\n');
    }
    out
}

pub fn run(cli: Cli) -> Result<(), Failure> {
    let base = match &cli.command {
        Command::DualityScan { family, .. } | Command::GammaDuality { family, .. } => {
            let spec = load_spec(family)?;
            Effort { seed: spec.seed, ..spec.effort }
        }
        _ => Effort::default(),
    };
    let config = parse_config(&cli.global, base).map_err(|e| usage(e.0))?;
    if let Some(threads) = config.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Failure::Compute(e.to_string()))?;
    }
    let effort = &config.effort;
    match cli.command {
        Command::Cover { pair, rho, restricted, certificate } => {
            if !(rho > 0.0 && rho.is_finite()) {
                return Err(usage(format!("rho must be positive, got {rho}")));
            }
            let (k, t) = parse_pair(&pair)?;
            let bracket = cover_bracket(&k, &t, rho, restricted, effort)?;
            eprintln!("N{}(K, {rho}T) in [{}, {}]", if restricted { "'" } else { "" }, bracket.lo, bracket.hi);
            let text = match config.format {
                Format::Csv => format!(
                    "rho,restricted,lo,hi,flags\n{rho},{restricted},{},{},{}\n",
                    bracket.lo,
                    bracket.hi,
                    bracket.flags.join(";")
                ),
                Format::Json => to_json(&bracket),
                Format::Svg => return Err(no_svg("cover")),
            };
            emit(&config, &text)?;
            if let Some(path) = certificate {
                let claim = Claim::CoverBracket { radius_factor: rho, bracket };
                CertificateFile::new(k, t, config.seed(), claim).write(&path)?;
            }
        }
        Command::Entropy { pair, k_max, tail } => {
            let (k, t) = parse_pair(&pair)?;
            let k_max = k_max.max(tail.map_or(0, |n| 3 * n));
            let id = format!("{}|{}", pair.k, pair.t);
            let seq = entropy_sequence(&k, &t, k_max, effort, &id)?;
            let text = match (tail, config.format) {
                (None, Format::Csv) => seq.to_csv(true),
                (None, Format::Json) => to_json(&seq),
                (Some(n), format) => {
                    let rows = tail_check(&seq, n, effort.eta)?;
                    match format {
                        Format::Csv => tail_csv(&rows),
                        Format::Json => to_json(&rows),
                        Format::Svg => return Err(no_svg("entropy")),
                    }
                }
                (None, Format::Svg) => return Err(no_svg("entropy")),
            };
            emit(&config, &text)?;
        }
        Command::Separation { pair, certificate } => {
            let (k, t) = parse_pair(&pair)?;
            let row = separation_duality_check(&k, &t, effort)?;
            let upper = separation_upper(&k, &t, effort)?;
            eprintln!("separation number of K in (1+eta)T: at least {}, at most {upper}", row.lower);
            let text = match config.format {
                Format::Csv => format!(
                    "lower,upper,dual_cover_hi,rhs,holds\n{},{upper},{},{},{}\n",
                    row.lower, row.dual_cover_hi, row.rhs, row.holds
                ),
                Format::Json => to_json(&serde_json::json!({ "upper": upper, "duality": &row })),
                Format::Svg => return Err(no_svg("separation")),
            };
            emit(&config, &text)?;
            if let Some(path) = certificate {
                let inflated = t.scaled(1.0 + effort.eta);
                let claim = Claim::Separation { certificate: row.certificate };
                CertificateFile::new(k, inflated, config.seed(), claim).write(&path)?;
            }
        }
        Command::Gamma { pair, p, k_max, levels } => {
            let (k, t) = parse_pair(&pair)?;
            let id = format!("{}|{}", pair.k, pair.t);
            let rows = p
                .iter()
                .map(|&p| gamma_estimates(&id, &k, &t, p, k_max, levels, config.convention.into(), effort))
                .collect::<polardual::Result<Vec<_>>>()?;
            let text = match config.format {
                Format::Csv => gamma_rows_to_csv(&rows),
                Format::Json => to_json(&rows),
                Format::Svg => return Err(no_svg("gamma")),
            };
            emit(&config, &text)?;
        }
        Command::DualityScan { family, a_grid } => {
            let mut spec = load_spec(&family)?;
            spec.effort = effort.clone();
            spec.seed = config.seed();
            if let Some(grid) = a_grid {
                spec.a_grid = grid;
            }
            let pairs = generate_family(&spec).map_err(|e| match e {
                polardual::Error::UnknownFamily(..) => usage(e.to_string()),
                e => e.into(),
            })?;
            let rows = duality_scan(&pairs, &spec.a_grid, effort)?;
            let fit = fit_constants(&rows);
            let text = match config.format {
                Format::Csv => rows_to_csv(&rows),
                Format::Json => to_json(&serde_json::json!({ "rows": &rows, "fit": fit.as_ref().ok() })),
                Format::Svg => rows_to_svg(&rows),
            };
            emit(&config, &text)?;
            eprint!("{}", fit_report(&fit?));
        }
        Command::GammaDuality { family, p, k_max, levels } => {
            let mut spec = load_spec(&family)?;
            spec.effort = effort.clone();
            spec.seed = config.seed();
            let p = p.or(spec.p_list.first().copied()).ok_or_else(|| usage("no exponent p given"))?;
            let pairs = generate_family(&spec).map_err(|e| match e {
                polardual::Error::UnknownFamily(..) => usage(e.to_string()),
                e => e.into(),
            })?;
            let k_max = k_max.unwrap_or(spec.k_range[1]);
            let rows = gamma_duality_report(&pairs, p, k_max, levels, config.convention.into(), effort)?;
            let text = match config.format {
                Format::Csv => gamma_duality_to_csv(&rows),
                Format::Json => to_json(&rows),
                Format::Svg => return Err(no_svg("gamma-duality")),
            };
            emit(&config, &text)?;
        }
        Command::Verify { file } => {
            let cert = CertificateFile::read(&file).map_err(|e| usage(format!("{}: {e}", file.display())))?;
            match verify(&cert, effort) {
                Ok(()) => println!("verified: {} certificate in {}", cert.claim.kind(), file.display()),
                Err(reason) => return Err(Failure::Compute(format!("refuted: {reason}"))),
            }
        }
        Command::Selftest => {
            let outcomes = selftest::run(effort);
            let mut failed = 0;
            for o in &outcomes {
                match &o.result {
                    Ok(()) => println!("PASS {} ({:.2} s)", o.name, o.seconds),
                    Err(reason) => {
                        failed += 1;
                        println!("FAIL {} ({:.2} s): {reason}", o.name, o.seconds);
                    }
                }
            }
            if failed > 0 {
                return Err(Failure::Compute(format!("{failed} of {} checks failed", outcomes.len())));
            }
        }
    }
    Ok(())
}
