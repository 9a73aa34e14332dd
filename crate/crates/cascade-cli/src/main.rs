//! `cascade-ns`: batch driver for the branching-cascade engine.
//!
//! Every subcommand resolves its parameters from flags, then a `--config`
//! key=value file, then environment fallbacks, runs inside a worker pool of
//! the requested size, writes one artifact (CSV or JSON) and prints a
//! one-line summary.  Exit codes: 0 ok, 1 usage, 2 invariant violation,
//! 3 I/O.

mod commands;
mod config;

use clap::{Args, Parser, Subcommand};
use config::{parse_num, CliError, Settings};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "cascade-ns",
    version,
    about = "Monte Carlo branching cascades and deterministic fixed-point checks \
             for frequency-space incompressible-flow models"
)]
struct Cli {
    /// Flat key=value config file; command-line flags override its entries.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Base RNG seed (fallbacks: config `seed`, $CASCADE_NS_SEED, then 0).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Substream index separating experiments that share a seed.
    #[arg(long, global = true)]
    stream: Option<u64>,
    /// Worker threads; defaults to the available parallelism. Results do
    /// not depend on this (randomness is keyed to tree indices).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Artifact file; default is stdout (summaries then go to stderr).
    #[arg(long, global = true, value_name = "FILE")]
    output: Option<PathBuf>,
    /// Artifact format: csv or json (audit/norms reports are JSON-only).
    #[arg(long, global = true)]
    format: Option<String>,
    /// Escalate failed statistical checks to exit code 2. Pathwise
    /// invariant violations always exit 2, strict or not.
    #[arg(long, global = true)]
    strict: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo mean of the cascade value at one frequency and horizon.
    Estimate(EstimateArgs),
    /// Survival probabilities P(no explosion by t at depth cap) over
    /// t/cap grids, coupled through shared randomness.
    Explosion(ExplosionArgs),
    /// Common-random-number sweep of the estimate over depth caps.
    Sweep(SweepArgs),
    /// Pathwise invariant audits on coupled trees.
    #[command(subcommand)]
    Audit(AuditCommand),
    /// Deterministic fixed-point iteration on an (r, t) grid.
    Picard(PicardArgs),
    /// Weighted dyadic-shell norms of radial data profiles.
    Norms(NormsArgs),
    /// Kernel self-tests: convolution identity and sampler goodness of fit.
    ValidateKernel(ValidateKernelArgs),
    /// Minimal vs thinned estimators of the same solution value.
    Compare(CompareArgs),
}

#[derive(Subcommand)]
enum AuditCommand {
    /// Coupled vector/scalar trees: |X| ≤ Y on every tree.
    Majorize(MajorizeArgs),
    /// Transformed cascades dominate the transform: f(Y) ≤ Z pathwise.
    Jensen(JensenArgs),
    /// Base cascade under the weighted geometric mean of factor cascades.
    Holder(HolderArgs),
    /// Dilation collapse of survival probabilities (λξ, t) vs (ξ, λ²t).
    Scaling(ScalingArgs),
}

#[derive(Args)]
struct EstimateArgs {
    /// Kernel family: scale-invariant or bessel.
    #[arg(long)]
    kernel: Option<String>,
    /// Equation: fms (scalar) or fns (vector).
    #[arg(long)]
    equation: Option<String>,
    /// Branching mode: minimal or thinned:p.
    #[arg(long)]
    mode: Option<String>,
    /// Initial data profile, e.g. constant:1, radial-exp:1,2,
    /// annulus:1,1,2, power-cap:1,4,1.
    #[arg(long)]
    data: Option<String>,
    /// Root frequency as x,y,z.
    #[arg(long)]
    xi: Option<String>,
    /// Time horizon.
    #[arg(long)]
    t: Option<f64>,
    /// Number of independent trees.
    #[arg(long = "N", visible_alias = "n")]
    n: Option<u64>,
    /// Depth cap; capped trees count as value 0.
    #[arg(long)]
    depth_cap: Option<u32>,
}

#[derive(Args)]
struct ExplosionArgs {
    #[arg(long)]
    kernel: Option<String>,
    #[arg(long)]
    xi: Option<String>,
    /// Horizon grid, comma-separated.
    #[arg(long)]
    t: Option<String>,
    /// Depth-cap grid, comma-separated.
    #[arg(long)]
    depth_cap: Option<String>,
    #[arg(long = "N", visible_alias = "n")]
    n: Option<u64>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    kernel: Option<String>,
    #[arg(long)]
    equation: Option<String>,
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    data: Option<String>,
    #[arg(long)]
    xi: Option<String>,
    #[arg(long)]
    t: Option<f64>,
    /// Strictly increasing depth caps, comma-separated.
    #[arg(long)]
    caps: Option<String>,
    #[arg(long = "N", visible_alias = "n")]
    n: Option<u64>,
}

#[derive(Args)]
struct MajorizeArgs {
    #[arg(long)]
    kernel: Option<String>,
    #[arg(long)]
    data: Option<String>,
    #[arg(long)]
    xi: Option<String>,
    #[arg(long)]
    t: Option<f64>,
    #[arg(long = "N", visible_alias = "n")]
    n: Option<u64>,
    #[arg(long)]
    depth_cap: Option<u32>,
}

#[derive(Args)]
struct JensenArgs {
    #[arg(long)]
    kernel: Option<String>,
    #[arg(long)]
    data: Option<String>,
    /// Scalar transforms, comma-separated: x2, x3, x2log, pow:α.
    #[arg(long)]
    maps: Option<String>,
    #[arg(long)]
    xi: Option<String>,
    #[arg(long)]
    t: Option<f64>,
    #[arg(long = "N", visible_alias = "n")]
    n: Option<u64>,
    #[arg(long)]
    depth_cap: Option<u32>,
}

#[derive(Args)]
struct HolderArgs {
    #[arg(long)]
    kernel: Option<String>,
    /// Base profile whose cascade is bounded by the factor cascades.
    #[arg(long)]
    base: Option<String>,
    /// Factor profiles, separated by semicolons.
    #[arg(long)]
    factors: Option<String>,
    /// Exponents αⱼ ∈ (0,1] with Σαⱼ ≤ 1, comma-separated.
    #[arg(long)]
    alphas: Option<String>,
    #[arg(long)]
    xi: Option<String>,
    #[arg(long)]
    t: Option<f64>,
    #[arg(long = "N", visible_alias = "n")]
    n: Option<u64>,
    #[arg(long)]
    depth_cap: Option<u32>,
}

#[derive(Args)]
struct ScalingArgs {
    #[arg(long)]
    kernel: Option<String>,
    /// Dilation factor λ > 0.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    xi: Option<String>,
    #[arg(long)]
    t: Option<f64>,
    #[arg(long = "N", visible_alias = "n")]
    n: Option<u64>,
    #[arg(long)]
    depth_cap: Option<u32>,
}

#[derive(Args)]
struct PicardArgs {
    #[arg(long)]
    kernel: Option<String>,
    /// Initial data profile ψ₀.
    #[arg(long)]
    data: Option<String>,
    /// Number of iterates to compute (from ψ⁽⁰⁾ ≡ 0).
    #[arg(long)]
    iterations: Option<usize>,
    /// Grid preset: standard (256×128) or coarse (96×32).
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    r_min: Option<f64>,
    #[arg(long)]
    r_max: Option<f64>,
    #[arg(long)]
    r_count: Option<usize>,
    #[arg(long)]
    t_max: Option<f64>,
    #[arg(long)]
    t_count: Option<usize>,
    /// Extension of iterates beyond r_max inside the branching integral:
    /// const or zero.
    #[arg(long)]
    tail: Option<String>,
    /// Stop once the sup-norm delta falls below this (0 disables).
    #[arg(long)]
    early_stop: Option<f64>,
    /// CSV dump scope: last (final iterate) or all iterates.
    #[arg(long)]
    dump: Option<String>,
    /// Run the iterate-ordering check for this transform instead of the
    /// plain iteration (pathwise grid check; violations exit 2).
    #[arg(long)]
    jensen_map: Option<String>,
}

#[derive(Args)]
struct NormsArgs {
    /// Radial profile to measure.
    #[arg(long)]
    profile: Option<String>,
    /// Weight exponent; defaults to the scale-critical value for p.
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<f64>,
    /// Shell integrability exponent in [1, ∞]; `inf` accepted.
    #[arg(long)]
    p: Option<String>,
    /// Shell summability exponent in [1, ∞]; defaults to p.
    #[arg(long)]
    q: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    k_min: Option<i32>,
    #[arg(long, allow_hyphen_values = true)]
    k_max: Option<i32>,
    /// Kernel used for normalization and the smallness threshold.
    #[arg(long)]
    kernel: Option<String>,
    /// Measure the normalized multiplier profile c₀·v₀/h instead of v₀.
    #[arg(long)]
    normalize: bool,
    /// Also report the data-smallness threshold ε(δ, p).
    #[arg(long)]
    with_threshold: bool,
    /// Contraction margin δ for the threshold (default 0.01 with a warning:
    /// no canonical numeric value exists).
    #[arg(long)]
    delta: Option<f64>,
}

#[derive(Args)]
struct ValidateKernelArgs {
    #[arg(long)]
    kernel: Option<String>,
    /// Radii at which to run both checks, comma-separated.
    #[arg(long)]
    radii: Option<String>,
    /// Sampler draws per radius.
    #[arg(long = "N", visible_alias = "n")]
    n: Option<u64>,
    /// χ² cell count.
    #[arg(long)]
    bins: Option<usize>,
    /// Run the deliberately biased sampler as a negative control.
    #[arg(long)]
    biased: bool,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    kernel: Option<String>,
    #[arg(long)]
    equation: Option<String>,
    #[arg(long)]
    data: Option<String>,
    /// Thinning probability p ∈ (0, 1/2].
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    xi: Option<String>,
    #[arg(long)]
    t: Option<f64>,
    #[arg(long = "N", visible_alias = "n")]
    n: Option<u64>,
    #[arg(long)]
    depth_cap: Option<u32>,
}

/// Output format of the artifact file.
#[derive(Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

fn parse_format(s: &str) -> Result<Format, CliError> {
    match s.trim() {
        "csv" => Ok(Format::Csv),
        "json" => Ok(Format::Json),
        other => Err(CliError::usage(format!(
            "unknown format `{other}` (csv, json)"
        ))),
    }
}

/// Settings shared by every subcommand, after flag/config/env merging.
pub struct GlobalOpts {
    pub seed: u64,
    pub stream: u64,
    pub workers: usize,
    pub output: Option<PathBuf>,
    pub format: Option<Format>,
    pub strict: bool,
}

impl GlobalOpts {
    fn resolve(cli: &Cli, settings: &Settings) -> Result<GlobalOpts, CliError> {
        let seed = match settings.opt("seed", cli.seed, parse_num::<u64>)? {
            Some(s) => s,
            None => match std::env::var("CASCADE_NS_SEED") {
                Ok(raw) => raw.parse::<u64>().map_err(|_| {
                    CliError::usage(format!("CASCADE_NS_SEED: bad number `{raw}`"))
                })?,
                Err(_) => 0,
            },
        };
        let workers = settings.num(
            "workers",
            cli.workers,
            std::thread::available_parallelism().map_or(1, |n| n.get()),
        )?;
        if workers == 0 {
            return Err(CliError::usage("--workers must be ≥ 1"));
        }
        let output = settings.get(
            "output",
            cli.output.clone().map(Some),
            |s| Ok(Some(PathBuf::from(s))),
            None,
        )?;
        let format = settings.opt(
            "format",
            cli.format.as_deref().map(parse_format).transpose()?,
            parse_format,
        )?;
        let strict = settings.flag("strict", cli.strict)?;
        Ok(GlobalOpts {
            seed,
            stream: settings.num("stream", cli.stream, 0)?,
            workers,
            output,
            format,
            strict,
        })
    }

    /// Format with a per-command default.
    pub fn format_or(&self, default: Format) -> Format {
        self.format.unwrap_or(default)
    }

    /// Commands whose artifact is a structured report, not a table.
    pub fn require_json(&self, what: &str) -> Result<(), CliError> {
        if self.format == Some(Format::Csv) {
            return Err(CliError::usage(format!("{what} reports are JSON-only")));
        }
        Ok(())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

fn run(cli: Cli) -> Result<u8, CliError> {
    let settings = match &cli.config {
        Some(path) => Settings::load(path)?,
        None => Settings::empty(),
    };
    let global = GlobalOpts::resolve(&cli, &settings)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(global.workers)
        .build()
        .map_err(|e| CliError::usage(format!("workers: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Estimate(args) => commands::estimate(args, &global, &settings),
        Command::Explosion(args) => commands::explosion(args, &global, &settings),
        Command::Sweep(args) => commands::sweep(args, &global, &settings),
        Command::Audit(AuditCommand::Majorize(args)) => {
            commands::audit_majorize(args, &global, &settings)
        }
        Command::Audit(AuditCommand::Jensen(args)) => {
            commands::audit_jensen(args, &global, &settings)
        }
        Command::Audit(AuditCommand::Holder(args)) => {
            commands::audit_holder(args, &global, &settings)
        }
        Command::Audit(AuditCommand::Scaling(args)) => {
            commands::audit_scaling(args, &global, &settings)
        }
        Command::Picard(args) => commands::picard(args, &global, &settings),
        Command::Norms(args) => commands::norms(args, &global, &settings),
        Command::ValidateKernel(args) => commands::validate_kernel(args, &global, &settings),
        Command::Compare(args) => commands::compare(args, &global, &settings),
    })
}
