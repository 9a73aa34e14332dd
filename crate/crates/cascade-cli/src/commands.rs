//! Subcommand execution: resolve parameters, run the engine inside the
//! ambient worker pool, emit one artifact plus a one-line summary.
//!
//! Pathwise invariants (coupled-tree bounds, exact monotone couplings) exit
//! with code 2 whenever violated; statistical gates (z-scores, goodness of
//! fit) do so only under `--strict`.

use crate::config::{parse_exponent, parse_num, parse_num_list, CliError, Settings};
use crate::{
    CompareArgs, EstimateArgs, ExplosionArgs, Format, GlobalOpts, HolderArgs, JensenArgs,
    MajorizeArgs, NormsArgs, PicardArgs, ScalingArgs, SweepArgs, ValidateKernelArgs,
};
use cascade_core::cascade::{Equation, Mode, SimConfig};
use cascade_core::data::{InitialDataSpec, Profile, ScalarMap};
use cascade_core::estimators::{self, fmt_f64, EstimateReport};
use cascade_core::freq::Frequency;
use cascade_core::herz::{self, HerzParams, RadialFn};
use cascade_core::kernels::{KernelFamily, KernelSpec, QuadSpec};
use cascade_core::picard::{self, PicardGridSpec, TailExtend, PICARD_CSV_SCHEMA};
use cascade_core::rng::TreeRandomness;
use cascade_core::CoreError;
use serde_json::json;
use std::path::Path;

pub const SWEEP_CSV_SCHEMA: &str = "cascade-sweep-v1";

/// Allowed relative error of the convolution identity per kernel family:
/// the exponential kernel has an exact closed form; the dilation-invariant
/// one is checked against tail-corrected quadrature.
fn convolution_gate(family: KernelFamily) -> f64 {
    match family {
        KernelFamily::Bessel => 1e-6,
        KernelFamily::ScaleInvariant => 1e-4,
    }
}

const SAMPLER_P_GATE: f64 = 1e-3;
const Z_GATE: f64 = 4.0;

/// Artifact/summary writer. With `--output` the artifact goes to the file
/// and the summary to stdout; otherwise the artifact occupies stdout and
/// the summary moves to stderr so pipelines stay parseable.
struct Emit<'a> {
    output: Option<&'a Path>,
}

impl<'a> Emit<'a> {
    fn new(global: &'a GlobalOpts) -> Emit<'a> {
        Emit {
            output: global.output.as_deref(),
        }
    }

    fn artifact(&self, text: &str) -> Result<(), CliError> {
        match self.output {
            Some(path) => std::fs::write(path, text)
                .map_err(|e| CliError::Io(format!("writing `{}`: {e}", path.display()))),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }

    fn json(&self, value: &serde_json::Value) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| CliError::Io(format!("serializing report: {e}")))?;
        text.push('\n');
        self.artifact(&text)
    }

    fn summary(&self, line: &str) {
        if self.output.is_some() {
            println!("{line}");
        } else {
            eprintln!("{line}");
        }
    }

    fn warn(&self, line: &str) {
        eprintln!("warning: {line}");
    }
}

fn parse_kernel(s: &str) -> Result<KernelFamily, CliError> {
    match s.trim() {
        "scale-invariant" | "si" => Ok(KernelFamily::ScaleInvariant),
        "bessel" => Ok(KernelFamily::Bessel),
        other => Err(CliError::usage(format!(
            "unknown kernel `{other}` (scale-invariant, bessel)"
        ))),
    }
}

fn parse_equation(s: &str) -> Result<Equation, CliError> {
    match s.trim() {
        "fms" => Ok(Equation::Fms),
        "fns" => Ok(Equation::Fns),
        other => Err(CliError::usage(format!(
            "unknown equation `{other}` (fms, fns)"
        ))),
    }
}

fn parse_mode(s: &str) -> Result<Mode, CliError> {
    Mode::parse(s).map_err(CliError::from)
}

fn parse_profile(s: &str) -> Result<Profile, CliError> {
    Profile::parse(s).map_err(CliError::from)
}

fn parse_xi(s: &str) -> Result<Frequency, CliError> {
    Frequency::new(parse_num_list::<f64>(s)?).map_err(CliError::from)
}

fn parse_maps(s: &str) -> Result<Vec<ScalarMap>, CliError> {
    s.split(',')
        .map(|m| ScalarMap::parse(m).map_err(CliError::from))
        .collect()
}

fn parse_profiles(s: &str) -> Result<Vec<Profile>, CliError> {
    s.split(';').map(parse_profile).collect()
}

/// Flag-or-config resolution for string-typed parameters: both sides go
/// through the same parser, so error messages match.
fn resolve<T>(
    settings: &Settings,
    key: &'static str,
    flag: &Option<String>,
    parse: impl Fn(&str) -> Result<T, CliError>,
    default: T,
) -> Result<T, CliError> {
    let flagged = flag
        .as_deref()
        .map(|raw| parse(raw).map_err(|e| CliError::usage(format!("--{key}: {e}"))))
        .transpose()?;
    settings.get(key, flagged, parse, default)
}

fn resolve_opt<T>(
    settings: &Settings,
    key: &'static str,
    flag: &Option<String>,
    parse: impl Fn(&str) -> Result<T, CliError>,
) -> Result<Option<T>, CliError> {
    let flagged = flag
        .as_deref()
        .map(|raw| parse(raw).map_err(|e| CliError::usage(format!("--{key}: {e}"))))
        .transpose()?;
    settings.opt(key, flagged, parse)
}

fn kernel_of(settings: &Settings, flag: &Option<String>) -> Result<KernelSpec, CliError> {
    let family = resolve(
        settings,
        "kernel",
        flag,
        parse_kernel,
        KernelFamily::ScaleInvariant,
    )?;
    KernelSpec::new(family, 3).map_err(CliError::from)
}

fn xi_of(settings: &Settings, flag: &Option<String>) -> Result<Frequency, CliError> {
    resolve(
        settings,
        "xi",
        flag,
        parse_xi,
        Frequency::new([1.0, 0.0, 0.0]).expect("unit frequency"),
    )
}

fn default_profile() -> Profile {
    Profile::Constant { kappa: 1.0 }
}

fn rand_of(global: &GlobalOpts) -> TreeRandomness {
    TreeRandomness::new(global.seed, global.stream)
}

fn fns_data(profile: Profile) -> Result<InitialDataSpec, CliError> {
    InitialDataSpec::along_first_axis(profile, 3).map_err(CliError::from)
}

pub fn estimate(
    args: &EstimateArgs,
    global: &GlobalOpts,
    settings: &Settings,
) -> Result<u8, CliError> {
    let kernel = kernel_of(settings, &args.kernel)?;
    let equation = resolve(settings, "equation", &args.equation, parse_equation, Equation::Fms)?;
    let mode = resolve(settings, "mode", &args.mode, parse_mode, Mode::Minimal)?;
    let profile = resolve(settings, "data", &args.data, parse_profile, default_profile())?;
    let root = xi_of(settings, &args.xi)?;
    let horizon = settings.num("t", args.t, 1.0)?;
    let n = settings.num("N", args.n, 10_000)?;
    let depth_cap = settings.num("depth-cap", args.depth_cap, 64)?;
    settings.finish()?;

    let cfg = SimConfig {
        kernel,
        root,
        horizon,
        depth_cap,
        mode,
        equation,
    };
    let data = fns_data(profile)?;
    let report = estimators::estimate_solution(&cfg, &data, n, &rand_of(global))?;

    let emit = Emit::new(global);
    match global.format_or(Format::Csv) {
        Format::Csv => emit.artifact(&format!(
            "{}\n{}\n",
            EstimateReport::csv_header(),
            report.csv_row()
        ))?,
        Format::Json => emit.json(&report.csv_mirror_json())?,
    }
    let value_part = match equation {
        Equation::Fms => format!(
            "mean={} se={}",
            fmt_f64(report.mean[0]),
            fmt_f64(report.stderr[0])
        ),
        Equation::Fns => {
            let norm = report.mean.iter().map(|m| m * m).sum::<f64>().sqrt();
            let max_se = report.stderr.iter().cloned().fold(0.0f64, f64::max);
            format!("|mean|={} max_se={}", fmt_f64(norm), fmt_f64(max_se))
        }
    };
    emit.summary(&format!(
        "estimate: {value_part} completed={} capped={} thinned_zero={}",
        fmt_f64(report.completed_frac),
        fmt_f64(report.capped_frac),
        fmt_f64(report.thinned_zero_frac)
    ));
    if report.heavy_tailed {
        emit.warn(
            "heavy-tailed sample (excess kurtosis > 10); stderr may be optimistic — \
             compare against median_of_means in the JSON report",
        );
    }
    Ok(0)
}

pub fn explosion(
    args: &ExplosionArgs,
    global: &GlobalOpts,
    settings: &Settings,
) -> Result<u8, CliError> {
    let kernel = kernel_of(settings, &args.kernel)?;
    let root = xi_of(settings, &args.xi)?;
    let mut horizons = resolve(settings, "t", &args.t, parse_num_list::<f64>, vec![1.0])?;
    let mut caps = resolve(
        settings,
        "depth-cap",
        &args.depth_cap,
        parse_num_list::<u32>,
        vec![64],
    )?;
    let n = settings.num("N", args.n, 10_000)?;
    settings.finish()?;

    horizons.sort_by(f64::total_cmp);
    horizons.dedup();
    caps.sort_unstable();
    caps.dedup();

    let rand = rand_of(global);
    let mut rows = Vec::new();
    // Node-keyed randomness means every (t, cap) cell replays the same
    // trees, so survival is exactly monotone across the grid — nonincreasing
    // in t, nondecreasing in cap. Any violation is an engine bug.
    let mut violations = 0u64;
    for (ci, &cap) in caps.iter().enumerate() {
        for (ti, &t) in horizons.iter().enumerate() {
            let cfg = SimConfig {
                kernel: kernel.clone(),
                root: root.clone(),
                horizon: t,
                depth_cap: cap,
                mode: Mode::Minimal,
                equation: Equation::Fms,
            };
            let report = estimators::explosion_probability(&cfg, n, &rand)?;
            if ti > 0 {
                let prev: &estimators::ExplosionReport = &rows[rows.len() - 1];
                if report.survival > prev.survival {
                    violations += 1;
                }
            }
            if ci > 0 {
                let below: &estimators::ExplosionReport =
                    &rows[(ci - 1) * horizons.len() + ti];
                if report.survival < below.survival {
                    violations += 1;
                }
            }
            rows.push(report);
        }
    }

    let emit = Emit::new(global);
    match global.format_or(Format::Csv) {
        Format::Csv => {
            let mut text = estimators::ExplosionReport::csv_header();
            text.push('\n');
            for row in &rows {
                text.push_str(&row.csv_row());
                text.push('\n');
            }
            emit.artifact(&text)?;
        }
        Format::Json => emit.json(&serde_json::to_value(&rows).expect("serializable"))?,
    }
    emit.summary(&format!(
        "explosion: {} rows, monotonicity violations: {violations}",
        rows.len()
    ));
    Ok(if violations > 0 { 2 } else { 0 })
}

pub fn sweep(args: &SweepArgs, global: &GlobalOpts, settings: &Settings) -> Result<u8, CliError> {
    let kernel = kernel_of(settings, &args.kernel)?;
    let equation = resolve(settings, "equation", &args.equation, parse_equation, Equation::Fms)?;
    let mode = resolve(settings, "mode", &args.mode, parse_mode, Mode::Minimal)?;
    let profile = resolve(settings, "data", &args.data, parse_profile, default_profile())?;
    let root = xi_of(settings, &args.xi)?;
    let horizon = settings.num("t", args.t, 1.0)?;
    let caps = resolve(
        settings,
        "caps",
        &args.caps,
        parse_num_list::<u32>,
        vec![1, 2, 4, 8, 16, 32, 64],
    )?;
    let n = settings.num("N", args.n, 10_000)?;
    settings.finish()?;

    let cfg = SimConfig {
        kernel,
        root,
        horizon,
        depth_cap: *caps.iter().max().expect("nonempty"),
        mode,
        equation,
    };
    let data = fns_data(profile)?;
    let report = estimators::depth_sweep(&cfg, &data, &caps, n, &rand_of(global))?;

    let emit = Emit::new(global);
    match global.format_or(Format::Csv) {
        Format::Csv => {
            let mut text = String::from(
                "schema,seed,kernel,mode,equation,xi_x,xi_y,xi_z,t,n,depth_cap,\
                 survival,survival_se,mean,stderr\n",
            );
            for e in &report.entries {
                let (mean, se) = match (&e.mean, &e.stderr) {
                    (Some(m), Some(s)) => (fmt_f64(m[0]), fmt_f64(s[0])),
                    _ => (String::new(), String::new()),
                };
                text.push_str(&format!(
                    "{SWEEP_CSV_SCHEMA},{},{},{},{},{},{},{},{},{},{},{},{},{mean},{se}\n",
                    report.seed,
                    report.kernel,
                    report.mode,
                    report.equation.name(),
                    fmt_f64(report.xi[0]),
                    fmt_f64(report.xi[1]),
                    fmt_f64(report.xi[2]),
                    fmt_f64(report.t),
                    report.n,
                    e.depth_cap,
                    fmt_f64(e.survival),
                    fmt_f64(e.survival_se),
                ));
            }
            emit.artifact(&text)?;
        }
        Format::Json => emit.json(&serde_json::to_value(&report).expect("serializable"))?,
    }
    let value_viol = report.value_violations.unwrap_or(0);
    emit.summary(&format!(
        "sweep: {} caps, survival_violations: {}, value_violations: {}",
        report.entries.len(),
        report.survival_violations,
        value_viol
    ));
    Ok(if report.survival_violations + value_viol > 0 {
        2
    } else {
        0
    })
}

pub fn audit_majorize(
    args: &MajorizeArgs,
    global: &GlobalOpts,
    settings: &Settings,
) -> Result<u8, CliError> {
    global.require_json("audit")?;
    let kernel = kernel_of(settings, &args.kernel)?;
    let profile = resolve(settings, "data", &args.data, parse_profile, default_profile())?;
    let root = xi_of(settings, &args.xi)?;
    let horizon = settings.num("t", args.t, 1.0)?;
    let n = settings.num("N", args.n, 10_000)?;
    let depth_cap = settings.num("depth-cap", args.depth_cap, 64)?;
    settings.finish()?;

    let cfg = SimConfig {
        kernel,
        root,
        horizon,
        depth_cap,
        mode: Mode::Minimal,
        equation: Equation::Fns,
    };
    let data = fns_data(profile)?;
    let report = estimators::majorize_audit(&cfg, &data, n, &rand_of(global))?;

    let emit = Emit::new(global);
    emit.json(&serde_json::to_value(&report).expect("serializable"))?;
    emit.summary(&format!("violations: {}/{}", report.violations, report.n));
    Ok(if report.violations > 0 { 2 } else { 0 })
}

pub fn audit_jensen(
    args: &JensenArgs,
    global: &GlobalOpts,
    settings: &Settings,
) -> Result<u8, CliError> {
    global.require_json("audit")?;
    let kernel = kernel_of(settings, &args.kernel)?;
    let profile = resolve(
        settings,
        "data",
        &args.data,
        parse_profile,
        Profile::Constant { kappa: 0.5 },
    )?;
    let maps = resolve(settings, "maps", &args.maps, parse_maps, vec![
        ScalarMap::Power { alpha: 2.0 },
        ScalarMap::Power { alpha: 3.0 },
        ScalarMap::PowerLog,
    ])?;
    let root = xi_of(settings, &args.xi)?;
    let horizon = settings.num("t", args.t, 1.0)?;
    let n = settings.num("N", args.n, 10_000)?;
    let depth_cap = settings.num("depth-cap", args.depth_cap, 64)?;
    settings.finish()?;

    let cfg = SimConfig {
        kernel,
        root,
        horizon,
        depth_cap,
        mode: Mode::Minimal,
        equation: Equation::Fms,
    };
    let report = estimators::jensen_order_check(&cfg, &profile, &maps, n, &rand_of(global))?;

    let emit = Emit::new(global);
    emit.json(&serde_json::to_value(&report).expect("serializable"))?;
    let pathwise: u64 = report.entries.iter().map(|e| e.pathwise_violations).sum();
    let checks = report.n * report.entries.len() as u64;
    emit.summary(&format!("violations: {pathwise}/{checks}"));
    if pathwise > 0 {
        return Ok(2);
    }
    if global.strict {
        if let Some(bad) = report.entries.iter().find(|e| !e.estimator_ok) {
            emit.summary(&format!(
                "strict: estimator ordering failed for map {} (z margin {:.2})",
                bad.map, bad.z_margin
            ));
            return Ok(2);
        }
    }
    Ok(0)
}

pub fn audit_holder(
    args: &HolderArgs,
    global: &GlobalOpts,
    settings: &Settings,
) -> Result<u8, CliError> {
    global.require_json("audit")?;
    let kernel = kernel_of(settings, &args.kernel)?;
    let base = resolve(
        settings,
        "base",
        &args.base,
        parse_profile,
        Profile::Constant { kappa: 0.25 },
    )?;
    let factors = resolve(settings, "factors", &args.factors, parse_profiles, vec![
        Profile::Constant { kappa: 0.5 },
        Profile::Constant { kappa: 0.5 },
    ])?;
    let alphas = resolve(
        settings,
        "alphas",
        &args.alphas,
        parse_num_list::<f64>,
        vec![0.5, 0.5],
    )?;
    let root = xi_of(settings, &args.xi)?;
    let horizon = settings.num("t", args.t, 1.0)?;
    let n = settings.num("N", args.n, 10_000)?;
    let depth_cap = settings.num("depth-cap", args.depth_cap, 64)?;
    settings.finish()?;

    let cfg = SimConfig {
        kernel,
        root,
        horizon,
        depth_cap,
        mode: Mode::Minimal,
        equation: Equation::Fms,
    };
    let report =
        estimators::holder_audit(&cfg, &base, &factors, &alphas, n, &rand_of(global))?;

    let emit = Emit::new(global);
    emit.json(&serde_json::to_value(&report).expect("serializable"))?;
    emit.summary(&format!(
        "violations: {}/{}",
        report.pathwise_violations, report.n
    ));
    if report.pathwise_violations > 0 {
        return Ok(2);
    }
    if global.strict && !report.estimator_ok {
        emit.summary(&format!(
            "strict: estimator-level bound failed (z margin {:.2})",
            report.z_margin
        ));
        return Ok(2);
    }
    Ok(0)
}

pub fn audit_scaling(
    args: &ScalingArgs,
    global: &GlobalOpts,
    settings: &Settings,
) -> Result<u8, CliError> {
    global.require_json("audit")?;
    let kernel = kernel_of(settings, &args.kernel)?;
    let lambda = settings.num("lambda", args.lambda, 2.0)?;
    let root = xi_of(settings, &args.xi)?;
    let horizon = settings.num("t", args.t, 1.0)?;
    let n = settings.num("N", args.n, 10_000)?;
    let depth_cap = settings.num("depth-cap", args.depth_cap, 64)?;
    settings.finish()?;

    let cfg = SimConfig {
        kernel,
        root,
        horizon,
        depth_cap,
        mode: Mode::Minimal,
        equation: Equation::Fms,
    };
    let report = estimators::scaling_check(&cfg, lambda, n, &rand_of(global))?;

    let emit = Emit::new(global);
    emit.json(&serde_json::to_value(&report).expect("serializable"))?;
    emit.summary(&format!(
        "scaling: lambda={} z={:.3}",
        fmt_f64(report.lambda),
        report.z
    ));
    if global.strict && report.z.abs() >= Z_GATE {
        emit.summary(&format!(
            "strict: collapse failed (|z| = {:.2} ≥ {Z_GATE})",
            report.z.abs()
        ));
        return Ok(2);
    }
    Ok(0)
}

fn parse_tail(s: &str) -> Result<TailExtend, CliError> {
    TailExtend::parse(s).map_err(CliError::from)
}

fn parse_scalar_map(s: &str) -> Result<ScalarMap, CliError> {
    ScalarMap::parse(s).map_err(CliError::from)
}

fn parse_grid_preset(s: &str) -> Result<PicardGridSpec, CliError> {
    match s.trim() {
        "standard" => Ok(PicardGridSpec::standard()),
        "coarse" => Ok(PicardGridSpec::coarse()),
        other => Err(CliError::usage(format!(
            "unknown grid preset `{other}` (standard, coarse)"
        ))),
    }
}

pub fn picard(
    args: &PicardArgs,
    global: &GlobalOpts,
    settings: &Settings,
) -> Result<u8, CliError> {
    let kernel = kernel_of(settings, &args.kernel)?;
    let profile = resolve(settings, "data", &args.data, parse_profile, default_profile())?;
    let iterations = settings.num("iterations", args.iterations, 64)?;
    let mut spec = resolve(
        settings,
        "grid",
        &args.grid,
        parse_grid_preset,
        PicardGridSpec::standard(),
    )?;
    if let Some(v) = settings.opt("r-min", args.r_min, parse_num::<f64>)? {
        spec.r_min = v;
    }
    if let Some(v) = settings.opt("r-max", args.r_max, parse_num::<f64>)? {
        spec.r_max = v;
    }
    if let Some(v) = settings.opt("r-count", args.r_count, parse_num::<usize>)? {
        spec.r_count = v;
    }
    if let Some(v) = settings.opt("t-max", args.t_max, parse_num::<f64>)? {
        spec.t_max = v;
    }
    if let Some(v) = settings.opt("t-count", args.t_count, parse_num::<usize>)? {
        spec.t_count = v;
    }
    if let Some(v) = resolve_opt(settings, "tail", &args.tail, parse_tail)? {
        spec.tail = v;
    }
    if let Some(v) = settings.opt("early-stop", args.early_stop, parse_num::<f64>)? {
        spec.early_stop = v;
    }
    let dump_all = match resolve_opt(settings, "dump", &args.dump, |s| match s.trim() {
        "last" => Ok(false),
        "all" => Ok(true),
        other => Err(CliError::usage(format!("unknown dump scope `{other}` (last, all)"))),
    })? {
        Some(v) => v,
        None => false,
    };
    let jensen_map = resolve_opt(settings, "jensen-map", &args.jensen_map, parse_scalar_map)?;
    settings.finish()?;

    let emit = Emit::new(global);

    if let Some(map) = jensen_map {
        global.require_json("iterate-ordering")?;
        let report = picard::jensen_iterate_check(&kernel, &profile, &map, &spec, iterations)
            .map_err(diverged_note)?;
        emit.json(&serde_json::to_value(&report).expect("serializable"))?;
        emit.summary(&format!(
            "iterate ordering: violations={}/{} worst_gap={}",
            report.violations,
            report.nodes_checked,
            fmt_f64(report.worst_gap)
        ));
        return Ok(if report.violations > 0 { 2 } else { 0 });
    }

    let run = picard::run_picard(&kernel, &profile, &spec, iterations).map_err(diverged_note)?;
    match global.format_or(Format::Csv) {
        Format::Csv => {
            let mut text = String::from("schema,r,t,iterate,value\n");
            let range = if dump_all { 1..=run.iterations() } else { run.iterations()..=run.iterations() };
            for it in range {
                let grid = run.iterate(it).expect("iterate within range");
                for (j, &t) in grid.times().iter().enumerate() {
                    for (i, &r) in grid.radii().iter().enumerate() {
                        text.push_str(&format!(
                            "{PICARD_CSV_SCHEMA},{},{},{it},{}\n",
                            fmt_f64(r),
                            fmt_f64(t),
                            fmt_f64(grid.value(j, i))
                        ));
                    }
                }
            }
            emit.artifact(&text)?;
        }
        Format::Json => {
            emit.json(&serde_json::to_value(run.summary(&kernel, &profile)).expect("serializable"))?
        }
    }
    let last_delta = run.deltas.last().copied().unwrap_or(0.0);
    emit.summary(&format!(
        "picard: iterations={} converged={} last_delta={} sup={}",
        run.iterations(),
        run.converged,
        fmt_f64(last_delta),
        fmt_f64(run.final_grid().max_value())
    ));
    Ok(0)
}

/// Divergence is an expected mathematical outcome for large data; annotate
/// the engine's diagnostic instead of presenting it as a plain error.
fn diverged_note(e: CoreError) -> CliError {
    match e {
        CoreError::Diverged { .. } => CliError::Assertion(format!(
            "{e}; the minimal solution may be infinite for this data"
        )),
        other => CliError::from(other),
    }
}

pub fn norms(args: &NormsArgs, global: &GlobalOpts, settings: &Settings) -> Result<u8, CliError> {
    global.require_json("norms")?;
    let profile = match resolve_opt(settings, "profile", &args.profile, parse_profile)? {
        Some(p) => p,
        None => return Err(CliError::usage("missing --profile")),
    };
    let p = resolve(settings, "p", &args.p, parse_exponent, 1.0)?;
    let q = resolve(settings, "q", &args.q, parse_exponent, p)?;
    let alpha = settings.num("alpha", args.alpha, HerzParams::scale_critical(p).alpha)?;
    let kernel = kernel_of(settings, &args.kernel)?;
    let normalize = settings.flag("normalize", args.normalize)?;
    let with_threshold = settings.flag("with-threshold", args.with_threshold)?;
    let delta = settings.opt("delta", args.delta, parse_num::<f64>)?;
    let mut params = HerzParams::new(alpha, p, q);
    params.k_min = settings.num("k-min", args.k_min, params.k_min)?;
    params.k_max = settings.num("k-max", args.k_max, params.k_max)?;
    settings.finish()?;

    let f = if normalize {
        herz::normalize_data(&kernel, &profile)?
    } else {
        RadialFn::from_profile(&profile)
    };
    let report = herz::herz_norm(&f, &params)?;

    let emit = Emit::new(global);
    let mut doc = serde_json::to_value(&report).expect("serializable");
    let obj = doc.as_object_mut().expect("object");
    obj.insert("profile".into(), json!(profile.describe()));
    obj.insert("normalized".into(), json!(normalize));
    obj.insert("kernel".into(), json!(kernel.family().name()));

    let mut line = if report.divergent {
        format!(
            "norm = inf (divergent; first offending shells {:?})",
            report.divergent_shells
        )
    } else {
        format!("norm = {}", fmt_f64(report.norm))
    };
    if with_threshold {
        let d = delta.unwrap_or(0.01);
        if delta.is_none() {
            emit.warn(
                "--delta not given; defaulting to 0.01 — the contraction margin has no \
                 canonical numeric value, so treat the threshold as illustrative",
            );
        }
        let eps = herz::smallness_threshold(&kernel, p, d)?;
        obj.insert("delta".into(), json!(d));
        obj.insert("epsilon".into(), json!(eps));
        line.push_str(&format!("; epsilon({}) = {}", fmt_f64(d), fmt_f64(eps)));
    }
    emit.json(&doc)?;
    emit.summary(&line);
    Ok(0)
}

pub fn validate_kernel(
    args: &ValidateKernelArgs,
    global: &GlobalOpts,
    settings: &Settings,
) -> Result<u8, CliError> {
    global.require_json("validate-kernel")?;
    let kernel = kernel_of(settings, &args.kernel)?;
    let radii = resolve(
        settings,
        "radii",
        &args.radii,
        parse_num_list::<f64>,
        vec![0.5, 1.0, 2.0],
    )?;
    let n = settings.num("N", args.n, 1_000_000)?;
    let bins = settings.num("bins", args.bins, 200)?;
    let biased = settings.flag("biased", args.biased)?;
    settings.finish()?;

    let quad = QuadSpec::default();
    let mut convolution = Vec::new();
    let mut sampler = Vec::new();
    for &r in &radii {
        if !(r > 0.0) || !r.is_finite() {
            return Err(CliError::usage(format!("--radii: need r > 0, got {r}")));
        }
        convolution.push(kernel.check_convolution_identity(r, &quad));
        let xi = Frequency::new([r, 0.0, 0.0]).map_err(CliError::from)?;
        sampler.push(kernel.validate_sampler(&xi, n, bins, global.seed, biased)?);
    }

    let max_conv = convolution
        .iter()
        .map(|c| c.rel_err)
        .fold(0.0f64, f64::max);
    let min_p = sampler.iter().map(|s| s.pvalue).fold(1.0f64, f64::min);

    let emit = Emit::new(global);
    emit.json(&json!({
        "kernel": kernel.family().name(),
        "n": n,
        "bins": bins,
        "biased": biased,
        "convolution": convolution,
        "sampler": sampler,
    }))?;
    emit.summary(&format!(
        "validate-kernel: max_conv_rel_err={} min_sampler_p={}",
        fmt_f64(max_conv),
        fmt_f64(min_p)
    ));
    if global.strict && !biased {
        let gate = convolution_gate(kernel.family());
        if max_conv > gate {
            emit.summary(&format!(
                "strict: convolution identity off by {max_conv:.2e} (gate {gate:.0e})"
            ));
            return Ok(2);
        }
        if min_p <= SAMPLER_P_GATE {
            emit.summary(&format!(
                "strict: sampler goodness-of-fit p = {min_p:.2e} ≤ {SAMPLER_P_GATE:.0e}"
            ));
            return Ok(2);
        }
    }
    Ok(0)
}

pub fn compare(
    args: &CompareArgs,
    global: &GlobalOpts,
    settings: &Settings,
) -> Result<u8, CliError> {
    let kernel = kernel_of(settings, &args.kernel)?;
    let equation = resolve(settings, "equation", &args.equation, parse_equation, Equation::Fms)?;
    let profile = resolve(
        settings,
        "data",
        &args.data,
        parse_profile,
        Profile::Constant { kappa: 0.5 },
    )?;
    let p = settings.num("p", args.p, 0.5)?;
    let root = xi_of(settings, &args.xi)?;
    let horizon = settings.num("t", args.t, 1.0)?;
    let n = settings.num("N", args.n, 10_000)?;
    let depth_cap = settings.num("depth-cap", args.depth_cap, 64)?;
    settings.finish()?;

    let cfg = SimConfig {
        kernel,
        root,
        horizon,
        depth_cap,
        mode: Mode::Minimal,
        equation,
    };
    let data = fns_data(profile)?;
    let report = estimators::compare_thinned_minimal(&cfg, p, &data, n, &rand_of(global))?;

    let emit = Emit::new(global);
    match global.format_or(Format::Csv) {
        Format::Csv => emit.artifact(&format!(
            "{}\n{}\n{}\n",
            EstimateReport::csv_header(),
            report.minimal.csv_row(),
            report.thinned.csv_row()
        ))?,
        Format::Json => emit.json(&serde_json::to_value(&report).expect("serializable"))?,
    }
    emit.summary(&format!("compare: max|z|={:.3}", report.max_abs_z));
    if global.strict && report.max_abs_z >= Z_GATE {
        emit.summary(&format!(
            "strict: estimators disagree (max |z| = {:.2} ≥ {Z_GATE})",
            report.max_abs_z
        ));
        return Ok(2);
    }
    Ok(0)
}
