//! Batch drivers over many trees: Monte Carlo means with error bars,
//! mode/scale comparisons, and the pathwise order audits.
//!
//! Parallel reduction is chunked and merged in index order, so every
//! statistic is bit-identical for any worker count: workers only decide
//! which chunks run where, never the order of floating-point additions.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;
use smallvec::SmallVec;

use crate::cascade::{self, Equation, SimConfig, TreeStatus, PATHWISE_REL_SLACK};
use crate::data::{InitialDataSpec, Profile, ScalarMap};
use crate::error::CoreError;
use crate::rng::TreeRandomness;

/// Trees per reduction chunk. Small enough to spread across workers, large
/// enough that scheduling noise is invisible.
const CHUNK: u64 = 4096;
const MEDIAN_BLOCKS: usize = 16;
/// Excess kurtosis above this flags the batch mean as heavy-tailed.
const KURTOSIS_FLAG: f64 = 10.0;

/// First field of every CSV header and row this crate writes.
pub const ESTIMATE_CSV_SCHEMA: &str = "cascade-estimate-v1";
pub const EXPLOSION_CSV_SCHEMA: &str = "cascade-explosion-v1";

/// One accumulator per chunk, folded left in chunk order.
fn par_chunk_fold<A, F>(n: u64, make: impl Fn() -> A + Sync, step: F) -> Vec<A>
where
    A: Send,
    F: Fn(&mut A, u64) + Sync,
{
    let chunks = n.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = make();
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(n);
            for i in lo..hi {
                step(&mut acc, i);
            }
            acc
        })
        .collect()
}

fn shifted(rand: &TreeRandomness, offset: u64) -> TreeRandomness {
    TreeRandomness::new(rand.seed, rand.stream.wrapping_add(offset))
}

/// (a - b) / sqrt(sa² + sb²), with 0/0 read as exact agreement.
pub fn z_score(a: f64, sa: f64, b: f64, sb: f64) -> f64 {
    let diff = a - b;
    if diff == 0.0 {
        return 0.0;
    }
    let s = (sa * sa + sb * sb).sqrt();
    if s == 0.0 {
        f64::INFINITY * diff.signum()
    } else {
        diff / s
    }
}

#[derive(Clone)]
struct MomentAccum {
    n: u64,
    sum: SmallVec<[f64; 6]>,
    sum2: SmallVec<[f64; 6]>,
    sum3: SmallVec<[f64; 6]>,
    sum4: SmallVec<[f64; 6]>,
    status: [u64; 3],
    height_sum: u64,
    hist: BTreeMap<u32, u64>,
    block_n: [u64; MEDIAN_BLOCKS],
    block_sum: Vec<SmallVec<[f64; 6]>>,
    nonfinite: u64,
}

impl MomentAccum {
    fn new(width: usize) -> Self {
        let zeros = || SmallVec::from_elem(0.0, width);
        MomentAccum {
            n: 0,
            sum: zeros(),
            sum2: zeros(),
            sum3: zeros(),
            sum4: zeros(),
            status: [0; 3],
            height_sum: 0,
            hist: BTreeMap::new(),
            block_n: [0; MEDIAN_BLOCKS],
            block_sum: (0..MEDIAN_BLOCKS).map(|_| zeros()).collect(),
            nonfinite: 0,
        }
    }

    fn push(&mut self, index: u64, comps: &[f64], status: TreeStatus, height: u32) {
        self.n += 1;
        let mut finite = true;
        for (k, &x) in comps.iter().enumerate() {
            finite &= x.is_finite();
            let x2 = x * x;
            self.sum[k] += x;
            self.sum2[k] += x2;
            self.sum3[k] += x2 * x;
            self.sum4[k] += x2 * x2;
        }
        if !finite {
            self.nonfinite += 1;
        }
        let s = match status {
            TreeStatus::Completed => 0,
            TreeStatus::DepthCapped => 1,
            TreeStatus::ThinnedZero => 2,
        };
        self.status[s] += 1;
        self.height_sum += height as u64;
        *self.hist.entry(height).or_insert(0) += 1;
        let b = (index as usize) % MEDIAN_BLOCKS;
        self.block_n[b] += 1;
        for (k, &x) in comps.iter().enumerate() {
            self.block_sum[b][k] += x;
        }
    }

    fn merge(mut self, other: MomentAccum) -> MomentAccum {
        self.n += other.n;
        for k in 0..self.sum.len() {
            self.sum[k] += other.sum[k];
            self.sum2[k] += other.sum2[k];
            self.sum3[k] += other.sum3[k];
            self.sum4[k] += other.sum4[k];
        }
        for s in 0..3 {
            self.status[s] += other.status[s];
        }
        self.height_sum += other.height_sum;
        for (h, c) in other.hist {
            *self.hist.entry(h).or_insert(0) += c;
        }
        for b in 0..MEDIAN_BLOCKS {
            self.block_n[b] += other.block_n[b];
            for k in 0..self.sum.len() {
                self.block_sum[b][k] += other.block_sum[b][k];
            }
        }
        self.nonfinite += other.nonfinite;
        self
    }

    fn mean(&self) -> Vec<f64> {
        self.sum.iter().map(|s| s / self.n as f64).collect()
    }

    fn stderr(&self) -> Vec<f64> {
        let n = self.n as f64;
        self.sum
            .iter()
            .zip(&self.sum2)
            .map(|(&s, &s2)| {
                if self.n < 2 {
                    return f64::NAN;
                }
                let var = ((s2 - s * s / n) / (n - 1.0)).max(0.0);
                (var / n).sqrt()
            })
            .collect()
    }

    fn excess_kurtosis(&self) -> Vec<f64> {
        let n = self.n as f64;
        (0..self.sum.len())
            .map(|k| {
                let m1 = self.sum[k] / n;
                let m2 = self.sum2[k] / n - m1 * m1;
                if !(m2 > 0.0) || !m2.is_finite() {
                    return 0.0;
                }
                let m4 = self.sum4[k] / n - 4.0 * m1 * self.sum3[k] / n
                    + 6.0 * m1 * m1 * self.sum2[k] / n
                    - 3.0 * m1 * m1 * m1 * m1;
                m4 / (m2 * m2) - 3.0
            })
            .collect()
    }

    fn median_of_means(&self) -> Vec<f64> {
        if self.block_n.iter().any(|&c| c == 0) {
            return self.mean();
        }
        (0..self.sum.len())
            .map(|k| {
                let mut means: Vec<f64> = (0..MEDIAN_BLOCKS)
                    .map(|b| self.block_sum[b][k] / self.block_n[b] as f64)
                    .collect();
                means.sort_by(|a, b| a.partial_cmp(b).unwrap());
                0.5 * (means[MEDIAN_BLOCKS / 2 - 1] + means[MEDIAN_BLOCKS / 2])
            })
            .collect()
    }
}

/// Batch mean of one cascade. `mean`/`stderr`/`median_of_means` hold the
/// scalar value for the scalar equation and [re₁..re_d, im₁..im_d] for the
/// vector one.
#[derive(Debug, Clone, Serialize)]
pub struct EstimateReport {
    pub seed: u64,
    pub stream: u64,
    pub kernel: String,
    pub mode: String,
    pub equation: Equation,
    pub xi: Vec<f64>,
    pub t: f64,
    pub depth_cap: u32,
    pub n: u64,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    pub completed_frac: f64,
    pub capped_frac: f64,
    pub thinned_zero_frac: f64,
    pub mean_height: f64,
    pub depth_histogram: BTreeMap<u32, u64>,
    pub excess_kurtosis: Vec<f64>,
    pub heavy_tailed: bool,
    pub median_of_means: Vec<f64>,
    pub nonfinite_count: u64,
}

/// Compact float formatting for CSV: round-trippable, no 300-digit
/// decimals for extreme magnitudes.
pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 {
        "0".to_string()
    } else if x.is_finite() && (1e-4..1e9).contains(&x.abs()) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

impl EstimateReport {
    fn layout(&self) -> ([f64; 3], [f64; 3], [f64; 6]) {
        let mut re = [0.0; 3];
        let mut im = [0.0; 3];
        let mut se = [0.0; 6];
        match self.equation {
            Equation::Fms => {
                re[0] = self.mean[0];
                se[0] = self.stderr[0];
            }
            Equation::Fns => {
                for k in 0..3 {
                    re[k] = self.mean[k];
                    im[k] = self.mean[3 + k];
                }
                se[..6].copy_from_slice(&self.stderr[..6]);
            }
        }
        (re, im, se)
    }

    pub fn csv_header() -> String {
        let mut cols = vec![
            "schema".into(),
            "seed".into(),
            "kernel".into(),
            "mode".into(),
            "equation".into(),
            "xi_x".into(),
            "xi_y".into(),
            "xi_z".into(),
            "t".into(),
            "depth_cap".into(),
            "n".into(),
        ];
        for k in 1..=3 {
            cols.push(format!("mean_re_{k}"));
        }
        for k in 1..=3 {
            cols.push(format!("mean_im_{k}"));
        }
        for k in 1..=6 {
            cols.push(format!("stderr_{k}"));
        }
        cols.push("completed_frac".into());
        cols.push("capped_frac".into());
        cols.push("thinned_zero_frac".into());
        cols.join(",")
    }

    pub fn csv_row(&self) -> String {
        let (re, im, se) = self.layout();
        let mut cols = vec![
            ESTIMATE_CSV_SCHEMA.to_string(),
            self.seed.to_string(),
            self.kernel.clone(),
            self.mode.clone(),
            self.equation.name().to_string(),
            fmt_f64(self.xi[0]),
            fmt_f64(self.xi[1]),
            fmt_f64(self.xi[2]),
            fmt_f64(self.t),
            self.depth_cap.to_string(),
            self.n.to_string(),
        ];
        cols.extend(re.iter().map(|&x| fmt_f64(x)));
        cols.extend(im.iter().map(|&x| fmt_f64(x)));
        cols.extend(se.iter().map(|&x| fmt_f64(x)));
        cols.push(fmt_f64(self.completed_frac));
        cols.push(fmt_f64(self.capped_frac));
        cols.push(fmt_f64(self.thinned_zero_frac));
        cols.join(",")
    }

    /// JSON object with exactly the CSV fields.
    pub fn csv_mirror_json(&self) -> serde_json::Value {
        let (re, im, se) = self.layout();
        serde_json::json!({
            "schema": ESTIMATE_CSV_SCHEMA,
            "seed": self.seed,
            "kernel": self.kernel,
            "mode": self.mode,
            "equation": self.equation.name(),
            "xi_x": self.xi[0],
            "xi_y": self.xi[1],
            "xi_z": self.xi[2],
            "t": self.t,
            "depth_cap": self.depth_cap,
            "n": self.n,
            "mean_re": re,
            "mean_im": im,
            "stderr": se,
            "completed_frac": self.completed_frac,
            "capped_frac": self.capped_frac,
            "thinned_zero_frac": self.thinned_zero_frac,
        })
    }
}

fn finish_report(
    cfg: &SimConfig,
    rand: &TreeRandomness,
    n: u64,
    acc: MomentAccum,
) -> Result<EstimateReport, CoreError> {
    if acc.status[1] == n {
        return Err(CoreError::DegenerateBatch(format!(
            "all {n} trees hit the depth cap {}; raise depth_cap or shorten the horizon",
            cfg.depth_cap
        )));
    }
    let kurt = acc.excess_kurtosis();
    let heavy = kurt.iter().any(|&g| g > KURTOSIS_FLAG);
    let mom = acc.median_of_means();
    Ok(EstimateReport {
        seed: rand.seed,
        stream: rand.stream,
        kernel: cfg.kernel.family().name().to_string(),
        mode: cfg.mode.describe(),
        equation: cfg.equation,
        xi: cfg.root.coords().to_vec(),
        t: cfg.horizon,
        depth_cap: cfg.depth_cap,
        n,
        mean: acc.mean(),
        stderr: acc.stderr(),
        completed_frac: acc.status[0] as f64 / n as f64,
        capped_frac: acc.status[1] as f64 / n as f64,
        thinned_zero_frac: acc.status[2] as f64 / n as f64,
        mean_height: acc.height_sum as f64 / n as f64,
        depth_histogram: acc.hist,
        excess_kurtosis: kurt,
        heavy_tailed: heavy,
        median_of_means: mom,
        nonfinite_count: acc.nonfinite,
    })
}

fn check_n(n: u64) -> Result<(), CoreError> {
    if n == 0 {
        return Err(CoreError::parameter("n", "need at least one tree"));
    }
    Ok(())
}

/// Monte Carlo mean of the configured cascade over `n` trees.
pub fn estimate_solution(
    cfg: &SimConfig,
    data: &InitialDataSpec,
    n: u64,
    rand: &TreeRandomness,
) -> Result<EstimateReport, CoreError> {
    cfg.validate()?;
    check_n(n)?;
    if data.dim() != cfg.root.dim() {
        return Err(CoreError::parameter(
            "data",
            "initial data dimension differs from the root frequency",
        ));
    }
    let width = match cfg.equation {
        Equation::Fms => 1,
        Equation::Fns => 2 * cfg.root.dim(),
    };
    let parts = par_chunk_fold(
        n,
        || MomentAccum::new(width),
        |acc, i| {
            let out = cascade::simulate(cfg, data, rand.tree(i));
            acc.push(i, &out.components_f64(), out.status(), out.height());
        },
    );
    let acc = parts
        .into_iter()
        .reduce(MomentAccum::merge)
        .expect("n ≥ 1");
    finish_report(cfg, rand, n, acc)
}

/// Per-tree value components in index order (scalar: one entry per tree).
/// Mostly useful to demonstrate worker-count invariance.
pub fn per_tree_components(
    cfg: &SimConfig,
    data: &InitialDataSpec,
    n: u64,
    rand: &TreeRandomness,
) -> Vec<SmallVec<[f64; 6]>> {
    let parts: Vec<Vec<SmallVec<[f64; 6]>>> = par_chunk_fold(
        n,
        Vec::new,
        |acc, i| {
            let out = cascade::simulate(cfg, data, rand.tree(i));
            acc.push(out.components_f64());
        },
    );
    parts.into_iter().flatten().collect()
}

/// Survival estimate for the depth-capped explosion time:
/// `survival` = fraction of trees whose every path crossed the horizon,
/// i.e. P̂(ζ_cap > t).
#[derive(Debug, Clone, Serialize)]
pub struct ExplosionReport {
    pub seed: u64,
    pub stream: u64,
    pub kernel: String,
    pub mode: String,
    pub xi: Vec<f64>,
    pub t: f64,
    pub depth_cap: u32,
    pub n: u64,
    pub survival: f64,
    pub se: f64,
    pub capped_frac: f64,
    pub thinned_zero_frac: f64,
    pub mean_height: f64,
    pub depth_histogram: BTreeMap<u32, u64>,
}

impl ExplosionReport {
    pub fn csv_header() -> String {
        [
            "schema",
            "seed",
            "kernel",
            "mode",
            "xi_x",
            "xi_y",
            "xi_z",
            "t",
            "depth_cap",
            "n",
            "survival",
            "se",
            "capped_frac",
            "thinned_zero_frac",
        ]
        .join(",")
    }

    pub fn csv_row(&self) -> String {
        [
            EXPLOSION_CSV_SCHEMA.to_string(),
            self.seed.to_string(),
            self.kernel.clone(),
            self.mode.clone(),
            fmt_f64(self.xi[0]),
            fmt_f64(self.xi[1]),
            fmt_f64(self.xi[2]),
            fmt_f64(self.t),
            self.depth_cap.to_string(),
            self.n.to_string(),
            fmt_f64(self.survival),
            fmt_f64(self.se),
            fmt_f64(self.capped_frac),
            fmt_f64(self.thinned_zero_frac),
        ]
        .join(",")
    }
}

#[derive(Clone)]
struct StatusAccum {
    status: [u64; 3],
    height_sum: u64,
    hist: BTreeMap<u32, u64>,
}

impl StatusAccum {
    fn new() -> Self {
        StatusAccum {
            status: [0; 3],
            height_sum: 0,
            hist: BTreeMap::new(),
        }
    }

    fn push(&mut self, status: TreeStatus, height: u32) {
        let s = match status {
            TreeStatus::Completed => 0,
            TreeStatus::DepthCapped => 1,
            TreeStatus::ThinnedZero => 2,
        };
        self.status[s] += 1;
        self.height_sum += height as u64;
        *self.hist.entry(height).or_insert(0) += 1;
    }

    fn merge(mut self, other: StatusAccum) -> StatusAccum {
        for s in 0..3 {
            self.status[s] += other.status[s];
        }
        self.height_sum += other.height_sum;
        for (h, c) in other.hist {
            *self.hist.entry(h).or_insert(0) += c;
        }
        self
    }
}

pub fn explosion_probability(
    cfg: &SimConfig,
    n: u64,
    rand: &TreeRandomness,
) -> Result<ExplosionReport, CoreError> {
    cfg.validate()?;
    check_n(n)?;
    let parts = par_chunk_fold(n, StatusAccum::new, |acc, i| {
        let out = cascade::explosion_indicator(cfg, rand.tree(i));
        acc.push(out.status, out.height);
    });
    let acc = parts.into_iter().reduce(StatusAccum::merge).expect("n ≥ 1");
    let p = acc.status[0] as f64 / n as f64;
    Ok(ExplosionReport {
        seed: rand.seed,
        stream: rand.stream,
        kernel: cfg.kernel.family().name().to_string(),
        mode: cfg.mode.describe(),
        xi: cfg.root.coords().to_vec(),
        t: cfg.horizon,
        depth_cap: cfg.depth_cap,
        n,
        survival: p,
        se: (p * (1.0 - p) / n as f64).sqrt(),
        capped_frac: acc.status[1] as f64 / n as f64,
        thinned_zero_frac: acc.status[2] as f64 / n as f64,
        mean_height: acc.height_sum as f64 / n as f64,
        depth_histogram: acc.hist,
    })
}

/// One depth cap inside a sweep.
#[derive(Debug, Clone, Serialize)]
pub struct SweepEntry {
    pub depth_cap: u32,
    pub survival: f64,
    pub survival_se: f64,
    pub mean: Option<Vec<f64>>,
    pub stderr: Option<Vec<f64>>,
}

/// Common-random-number sweep over depth caps. Because randomness is keyed
/// to tree nodes, each tree is evaluated under every cap on the *same*
/// clocks and frequencies, so completion is pathwise monotone in the cap —
/// and for the scalar equation the value is too. Violation counts are
/// exact checks of those facts, not statistical tests.
#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub seed: u64,
    pub stream: u64,
    pub kernel: String,
    pub mode: String,
    pub equation: Equation,
    pub xi: Vec<f64>,
    pub t: f64,
    pub n: u64,
    pub entries: Vec<SweepEntry>,
    pub survival_violations: u64,
    /// Scalar equation only: per-tree value regressions across caps.
    pub value_violations: Option<u64>,
}

#[derive(Clone)]
struct SweepAccum {
    completed: Vec<u64>,
    sum: Vec<f64>,
    sum2: Vec<f64>,
    survival_violations: u64,
    value_violations: u64,
}

pub fn depth_sweep(
    cfg: &SimConfig,
    data: &InitialDataSpec,
    caps: &[u32],
    n: u64,
    rand: &TreeRandomness,
) -> Result<SweepReport, CoreError> {
    cfg.validate()?;
    check_n(n)?;
    if caps.is_empty() {
        return Err(CoreError::parameter("caps", "need at least one depth cap"));
    }
    let mut caps_sorted = caps.to_vec();
    caps_sorted.sort_unstable();
    caps_sorted.dedup();
    if caps_sorted[0] == 0 {
        return Err(CoreError::parameter("caps", "depth caps must be ≥ 1"));
    }
    let k = caps_sorted.len();
    let scalar = cfg.equation == Equation::Fms;

    let parts = par_chunk_fold(
        n,
        || SweepAccum {
            completed: vec![0; k],
            sum: vec![0.0; k],
            sum2: vec![0.0; k],
            survival_violations: 0,
            value_violations: 0,
        },
        |acc, i| {
            let key = rand.tree(i);
            let mut prev_completed = false;
            let mut prev_value = f64::NEG_INFINITY;
            for (j, &cap) in caps_sorted.iter().enumerate() {
                let mut c = cfg.clone();
                c.depth_cap = cap;
                let out = cascade::simulate(&c, data, key);
                let completed = out.status() == TreeStatus::Completed;
                if completed {
                    acc.completed[j] += 1;
                }
                if prev_completed && !completed {
                    acc.survival_violations += 1;
                }
                if scalar {
                    let v = out.components_f64()[0];
                    acc.sum[j] += v;
                    acc.sum2[j] += v * v;
                    if j > 0 && v < prev_value {
                        acc.value_violations += 1;
                    }
                    prev_value = v;
                } else {
                    let comps = out.components_f64();
                    acc.sum[j] += comps[0];
                    acc.sum2[j] += comps[0] * comps[0];
                }
                prev_completed = completed;
            }
        },
    );
    let acc = parts
        .into_iter()
        .reduce(|mut a, b| {
            for j in 0..k {
                a.completed[j] += b.completed[j];
                a.sum[j] += b.sum[j];
                a.sum2[j] += b.sum2[j];
            }
            a.survival_violations += b.survival_violations;
            a.value_violations += b.value_violations;
            a
        })
        .expect("n ≥ 1");

    let nf = n as f64;
    let entries = caps_sorted
        .iter()
        .enumerate()
        .map(|(j, &cap)| {
            let p = acc.completed[j] as f64 / nf;
            let (mean, stderr) = if scalar {
                let m = acc.sum[j] / nf;
                let var = ((acc.sum2[j] - acc.sum[j] * acc.sum[j] / nf) / (nf - 1.0)).max(0.0);
                (Some(vec![m]), Some(vec![(var / nf).sqrt()]))
            } else {
                (None, None)
            };
            SweepEntry {
                depth_cap: cap,
                survival: p,
                survival_se: (p * (1.0 - p) / nf).sqrt(),
                mean,
                stderr,
            }
        })
        .collect();

    Ok(SweepReport {
        seed: rand.seed,
        stream: rand.stream,
        kernel: cfg.kernel.family().name().to_string(),
        mode: cfg.mode.describe(),
        equation: cfg.equation,
        xi: cfg.root.coords().to_vec(),
        t: cfg.horizon,
        n,
        entries,
        survival_violations: acc.survival_violations,
        value_violations: if scalar {
            Some(acc.value_violations)
        } else {
            None
        },
    })
}

/// Minimal vs thinned estimator over independent streams.
#[derive(Debug, Clone, Serialize)]
pub struct ModeComparison {
    pub minimal: EstimateReport,
    pub thinned: EstimateReport,
    pub z: Vec<f64>,
    pub max_abs_z: f64,
}

pub fn compare_thinned_minimal(
    cfg: &SimConfig,
    p: f64,
    data: &InitialDataSpec,
    n: u64,
    rand: &TreeRandomness,
) -> Result<ModeComparison, CoreError> {
    let minimal = estimate_solution(&cfg.minimal(), data, n, rand)?;
    let thinned = estimate_solution(&cfg.thinned(p), data, n, &shifted(rand, 1))?;
    let z: Vec<f64> = minimal
        .mean
        .iter()
        .zip(&minimal.stderr)
        .zip(thinned.mean.iter().zip(&thinned.stderr))
        .map(|((&ma, &sa), (&mb, &sb))| z_score(ma, sa, mb, sb))
        .collect();
    let max_abs_z = z.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    Ok(ModeComparison {
        minimal,
        thinned,
        z,
        max_abs_z,
    })
}

/// Scale-invariance diagnostic: survival at root λξ over horizon t against
/// survival at root ξ over horizon λ²t. For the dilation-invariant kernel
/// the two laws coincide; λ = 1 shares the stream, so the comparison
/// collapses exactly rather than statistically.
#[derive(Debug, Clone, Serialize)]
pub struct ScalingReport {
    pub lambda: f64,
    pub scaled_root: ExplosionReport,
    pub scaled_horizon: ExplosionReport,
    pub z: f64,
}

pub fn scaling_check(
    cfg: &SimConfig,
    lambda: f64,
    n: u64,
    rand: &TreeRandomness,
) -> Result<ScalingReport, CoreError> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(CoreError::parameter("lambda", "must be finite and > 0"));
    }
    let mut a_cfg = cfg.clone();
    a_cfg.root = cfg.root.scale(lambda)?;
    let mut b_cfg = cfg.clone();
    b_cfg.horizon = lambda * lambda * cfg.horizon;
    let b_rand = if lambda == 1.0 {
        rand.clone()
    } else {
        shifted(rand, 1)
    };
    let a = explosion_probability(&a_cfg, n, rand)?;
    let b = explosion_probability(&b_cfg, n, &b_rand)?;
    let z = z_score(a.survival, a.se, b.survival, b.se);
    Ok(ScalingReport {
        lambda,
        scaled_root: a,
        scaled_horizon: b,
        z,
    })
}

/// Coupled vector/scalar audit: |X| ≤ Y pathwise over one random field.
#[derive(Debug, Clone, Serialize)]
pub struct MajorizeReport {
    pub seed: u64,
    pub stream: u64,
    pub kernel: String,
    pub mode: String,
    pub xi: Vec<f64>,
    pub t: f64,
    pub depth_cap: u32,
    pub n: u64,
    pub violations: u64,
    /// Largest log₂(|X|/Y) observed; -∞ when every |X| was zero.
    pub worst_excess_log2: f64,
    pub completed_frac: f64,
    pub mean_abs_x: f64,
    pub mean_y: f64,
}

pub fn majorize_audit(
    cfg: &SimConfig,
    data: &InitialDataSpec,
    n: u64,
    rand: &TreeRandomness,
) -> Result<MajorizeReport, CoreError> {
    cfg.validate()?;
    check_n(n)?;
    if data.dim() != cfg.root.dim() {
        return Err(CoreError::parameter(
            "data",
            "initial data dimension differs from the root frequency",
        ));
    }
    #[derive(Clone)]
    struct Acc {
        violations: u64,
        worst: f64,
        completed: u64,
        sum_abs_x: f64,
        sum_y: f64,
    }
    let parts = par_chunk_fold(
        n,
        || Acc {
            violations: 0,
            worst: f64::NEG_INFINITY,
            completed: 0,
            sum_abs_x: 0.0,
            sum_y: 0.0,
        },
        |acc, i| {
            let c = cascade::simulate_coupled_fns_fms(cfg, data, rand.tree(i));
            if !c.bound_ok {
                acc.violations += 1;
            }
            acc.worst = acc.worst.max(c.excess_log2);
            if c.fns.status == TreeStatus::Completed {
                acc.completed += 1;
            }
            acc.sum_abs_x += c.fns.value.norm().to_f64();
            acc.sum_y += c.fms.value_f64();
        },
    );
    let acc = parts
        .into_iter()
        .reduce(|mut a, b| {
            a.violations += b.violations;
            a.worst = a.worst.max(b.worst);
            a.completed += b.completed;
            a.sum_abs_x += b.sum_abs_x;
            a.sum_y += b.sum_y;
            a
        })
        .expect("n ≥ 1");
    Ok(MajorizeReport {
        seed: rand.seed,
        stream: rand.stream,
        kernel: cfg.kernel.family().name().to_string(),
        mode: cfg.mode.describe(),
        xi: cfg.root.coords().to_vec(),
        t: cfg.horizon,
        depth_cap: cfg.depth_cap,
        n,
        violations: acc.violations,
        worst_excess_log2: acc.worst,
        completed_frac: acc.completed as f64 / n as f64,
        mean_abs_x: acc.sum_abs_x / n as f64,
        mean_y: acc.sum_y / n as f64,
    })
}

/// One transform inside a generalized-order audit.
#[derive(Debug, Clone, Serialize)]
pub struct JensenEntry {
    pub map: String,
    pub multiplicative: bool,
    /// Trees where f(Y) exceeded Z beyond the pathwise slack.
    pub pathwise_violations: u64,
    pub worst_excess_log2: f64,
    /// Multiplicative maps only: worst relative gap between Z and f(Y),
    /// which should be rounding-level since the two are algebraically equal.
    pub max_mult_rel_err: f64,
    pub mean_y: f64,
    pub se_y: f64,
    pub mean_z: f64,
    pub se_z: f64,
    pub f_of_mean_y: f64,
    /// f(E[Y]) ≤ E[Z] within three propagated standard errors.
    pub estimator_ok: bool,
    pub z_margin: f64,
}

/// Pathwise and estimator-level check that transformed cascades dominate
/// the transform of the base cascade, for submultiplicative convex maps.
#[derive(Debug, Clone, Serialize)]
pub struct JensenReport {
    pub seed: u64,
    pub stream: u64,
    pub kernel: String,
    pub mode: String,
    pub xi: Vec<f64>,
    pub t: f64,
    pub depth_cap: u32,
    pub n: u64,
    pub profile: String,
    pub entries: Vec<JensenEntry>,
}

pub fn jensen_order_check(
    cfg: &SimConfig,
    profile: &Profile,
    maps: &[ScalarMap],
    n: u64,
    rand: &TreeRandomness,
) -> Result<JensenReport, CoreError> {
    cfg.validate()?;
    check_n(n)?;
    if maps.is_empty() {
        return Err(CoreError::parameter("transforms", "need at least one"));
    }
    for m in maps {
        m.validate()?;
    }
    profile.validate()?;
    let k = maps.len();

    #[derive(Clone)]
    struct Acc {
        violations: Vec<u64>,
        worst: Vec<f64>,
        mult_err: Vec<f64>,
        sum_y: f64,
        sum2_y: f64,
        sum_z: Vec<f64>,
        sum2_z: Vec<f64>,
        n: u64,
    }
    let parts = par_chunk_fold(
        n,
        || Acc {
            violations: vec![0; k],
            worst: vec![f64::NEG_INFINITY; k],
            mult_err: vec![0.0; k],
            sum_y: 0.0,
            sum2_y: 0.0,
            sum_z: vec![0.0; k],
            sum2_z: vec![0.0; k],
            n: 0,
        },
        |acc, i| {
            let out = cascade::simulate_scalar_family(cfg, profile, maps, rand.tree(i));
            acc.n += 1;
            let y = out.value[0];
            let yf = y.to_f64();
            acc.sum_y += yf;
            acc.sum2_y += yf * yf;
            for (j, m) in maps.iter().enumerate() {
                let z = out.value[1 + j];
                let zf = z.to_f64();
                acc.sum_z[j] += zf;
                acc.sum2_z[j] += zf * zf;
                let fy = m.apply_scaled(y);
                if !fy.le_with_slack(&z, PATHWISE_REL_SLACK) {
                    acc.violations[j] += 1;
                }
                if !fy.is_zero() && !z.is_zero() {
                    acc.worst[j] = acc.worst[j].max(fy.log2() - z.log2());
                }
                if m.is_multiplicative() {
                    acc.mult_err[j] = acc.mult_err[j].max(z.rel_diff(&fy));
                }
            }
        },
    );
    let acc = parts
        .into_iter()
        .reduce(|mut a, b| {
            for j in 0..k {
                a.violations[j] += b.violations[j];
                a.worst[j] = a.worst[j].max(b.worst[j]);
                a.mult_err[j] = a.mult_err[j].max(b.mult_err[j]);
                a.sum_z[j] += b.sum_z[j];
                a.sum2_z[j] += b.sum2_z[j];
            }
            a.sum_y += b.sum_y;
            a.sum2_y += b.sum2_y;
            a.n += b.n;
            a
        })
        .expect("n ≥ 1");

    let nf = n as f64;
    let mean_y = acc.sum_y / nf;
    let se_y = (((acc.sum2_y - acc.sum_y * acc.sum_y / nf) / (nf - 1.0)).max(0.0) / nf).sqrt();
    let entries = maps
        .iter()
        .enumerate()
        .map(|(j, m)| {
            let mean_z = acc.sum_z[j] / nf;
            let se_z = (((acc.sum2_z[j] - acc.sum_z[j] * acc.sum_z[j] / nf) / (nf - 1.0))
                .max(0.0)
                / nf)
                .sqrt();
            let f_mean = m.apply(mean_y);
            let se_prop = (m.derivative(mean_y).abs() * se_y).hypot(se_z);
            let margin = if se_prop == 0.0 {
                if f_mean <= mean_z {
                    f64::INFINITY
                } else {
                    f64::NEG_INFINITY
                }
            } else {
                (mean_z - f_mean) / se_prop
            };
            JensenEntry {
                map: m.describe(),
                multiplicative: m.is_multiplicative(),
                pathwise_violations: acc.violations[j],
                worst_excess_log2: acc.worst[j],
                max_mult_rel_err: acc.mult_err[j],
                mean_y,
                se_y,
                mean_z,
                se_z,
                f_of_mean_y: f_mean,
                estimator_ok: f_mean <= mean_z + 3.0 * se_prop,
                z_margin: margin,
            }
        })
        .collect();

    Ok(JensenReport {
        seed: rand.seed,
        stream: rand.stream,
        kernel: cfg.kernel.family().name().to_string(),
        mode: cfg.mode.describe(),
        xi: cfg.root.coords().to_vec(),
        t: cfg.horizon,
        depth_cap: cfg.depth_cap,
        n,
        profile: profile.describe(),
        entries,
    })
}

/// Interpolation-inequality audit: base cascade against the α-weighted
/// geometric mean of factor cascades over one random field.
#[derive(Debug, Clone, Serialize)]
pub struct HolderReport {
    pub seed: u64,
    pub stream: u64,
    pub kernel: String,
    pub mode: String,
    pub xi: Vec<f64>,
    pub t: f64,
    pub depth_cap: u32,
    pub n: u64,
    pub base: String,
    pub factors: Vec<String>,
    pub alphas: Vec<f64>,
    pub pathwise_violations: u64,
    pub worst_excess_log2: f64,
    /// max |log₂ Y - Σ αⱼ log₂ Xⱼ| over trees with all values positive;
    /// rounding-level when the base factorizes exactly.
    pub max_abs_gap_log2: f64,
    pub mean_y: f64,
    pub se_y: f64,
    pub factor_means: Vec<f64>,
    pub rhs_product: f64,
    /// E[Y] ≤ Π E[Xⱼ]^αⱼ within three propagated standard errors.
    pub estimator_ok: bool,
    pub z_margin: f64,
}

pub fn holder_audit(
    cfg: &SimConfig,
    base: &Profile,
    factors: &[Profile],
    alphas: &[f64],
    n: u64,
    rand: &TreeRandomness,
) -> Result<HolderReport, CoreError> {
    cfg.validate()?;
    check_n(n)?;
    if factors.is_empty() || factors.len() != alphas.len() {
        return Err(CoreError::parameter(
            "factors",
            "need k ≥ 1 factors with matching exponents",
        ));
    }
    base.validate()?;
    for f in factors {
        f.validate()?;
    }
    let alpha_sum: f64 = alphas.iter().sum();
    if alphas.iter().any(|&a| !(a > 0.0 && a <= 1.0)) || alpha_sum > 1.0 + 1e-12 {
        return Err(CoreError::parameter(
            "alphas",
            "exponents must lie in (0, 1] and sum to at most 1",
        ));
    }

    // Pointwise precondition g ≤ Π fⱼ^αⱼ on a radius grid that brackets
    // every profile breakpoint.
    let mut radii: Vec<f64> = (0..512)
        .map(|i| 1e-3 * (1e6f64).powf(i as f64 / 511.0))
        .collect();
    for p in std::iter::once(base).chain(factors.iter()) {
        for b in p.breakpoints() {
            if b > 0.0 {
                radii.push(b * (1.0 - 1e-9));
                radii.push(b);
                radii.push(b * (1.0 + 1e-9));
            }
        }
    }
    for &r in &radii {
        let lhs = base.eval_scaled(r);
        let rhs = factors
            .iter()
            .zip(alphas)
            .fold(crate::scaled::ScaledScalar::ONE, |acc, (f, &a)| {
                acc.mul(f.eval_scaled(r).powf(a))
            });
        if !lhs.le_with_slack(&rhs, 1e-9) {
            return Err(CoreError::parameter(
                "base",
                format!(
                    "pointwise bound fails at r = {r}: log₂ g = {} > {}",
                    lhs.log2(),
                    rhs.log2()
                ),
            ));
        }
    }

    let k = factors.len();
    #[derive(Clone)]
    struct Acc {
        violations: u64,
        worst: f64,
        max_gap: f64,
        sum_y: f64,
        sum2_y: f64,
        sum_x: Vec<f64>,
        sum2_x: Vec<f64>,
    }
    let parts = par_chunk_fold(
        n,
        || Acc {
            violations: 0,
            worst: f64::NEG_INFINITY,
            max_gap: 0.0,
            sum_y: 0.0,
            sum2_y: 0.0,
            sum_x: vec![0.0; k],
            sum2_x: vec![0.0; k],
        },
        |acc, i| {
            let out = cascade::simulate_factor_family(cfg, base, factors, rand.tree(i));
            let y = out.value[0];
            let yf = y.to_f64();
            acc.sum_y += yf;
            acc.sum2_y += yf * yf;
            let mut rhs_log2 = 0.0;
            let mut any_zero = false;
            for j in 0..k {
                let x = out.value[1 + j];
                let xf = x.to_f64();
                acc.sum_x[j] += xf;
                acc.sum2_x[j] += xf * xf;
                if x.is_zero() {
                    any_zero = true;
                } else {
                    rhs_log2 += alphas[j] * x.log2();
                }
            }
            if any_zero {
                if !y.is_zero() {
                    acc.violations += 1;
                    acc.worst = f64::INFINITY;
                }
            } else if !y.is_zero() {
                let gap = y.log2() - rhs_log2;
                if gap > (1.0 + PATHWISE_REL_SLACK).log2() {
                    acc.violations += 1;
                }
                acc.worst = acc.worst.max(gap);
                acc.max_gap = acc.max_gap.max(gap.abs());
            }
        },
    );
    let acc = parts
        .into_iter()
        .reduce(|mut a, b| {
            a.violations += b.violations;
            a.worst = a.worst.max(b.worst);
            a.max_gap = a.max_gap.max(b.max_gap);
            a.sum_y += b.sum_y;
            a.sum2_y += b.sum2_y;
            for j in 0..k {
                a.sum_x[j] += b.sum_x[j];
                a.sum2_x[j] += b.sum2_x[j];
            }
            a
        })
        .expect("n ≥ 1");

    let nf = n as f64;
    let mean_y = acc.sum_y / nf;
    let se_y = (((acc.sum2_y - acc.sum_y * acc.sum_y / nf) / (nf - 1.0)).max(0.0) / nf).sqrt();
    let means: Vec<f64> = acc.sum_x.iter().map(|s| s / nf).collect();
    let ses: Vec<f64> = acc
        .sum_x
        .iter()
        .zip(&acc.sum2_x)
        .map(|(&s, &s2)| (((s2 - s * s / nf) / (nf - 1.0)).max(0.0) / nf).sqrt())
        .collect();
    let rhs: f64 = means
        .iter()
        .zip(alphas)
        .map(|(&m, &a)| m.powf(a))
        .product();
    // Delta method on Π mⱼ^αⱼ, plus the left side's own error.
    let mut var_rhs = 0.0;
    for j in 0..k {
        if means[j] > 0.0 {
            let d = alphas[j] * rhs / means[j];
            var_rhs += d * d * ses[j] * ses[j];
        }
    }
    let se_comb = (var_rhs + se_y * se_y).sqrt();
    let margin = if se_comb == 0.0 {
        if mean_y <= rhs {
            f64::INFINITY
        } else {
            f64::NEG_INFINITY
        }
    } else {
        (rhs - mean_y) / se_comb
    };

    Ok(HolderReport {
        seed: rand.seed,
        stream: rand.stream,
        kernel: cfg.kernel.family().name().to_string(),
        mode: cfg.mode.describe(),
        xi: cfg.root.coords().to_vec(),
        t: cfg.horizon,
        depth_cap: cfg.depth_cap,
        n,
        base: base.describe(),
        factors: factors.iter().map(|f| f.describe()).collect(),
        alphas: alphas.to_vec(),
        pathwise_violations: acc.violations,
        worst_excess_log2: acc.worst,
        max_abs_gap_log2: acc.max_gap,
        mean_y,
        se_y,
        factor_means: means,
        rhs_product: rhs,
        estimator_ok: mean_y <= rhs + 3.0 * se_comb,
        z_margin: margin,
    })
}
