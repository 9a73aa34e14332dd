//! The branching-cascade simulator.
//!
//! A tree is grown depth-first from the root frequency ξ. Each node v holds
//! a frequency W_v and an exponential clock T_v ~ Exp(|W_v|²). If the clock
//! overshoots the remaining horizon the node is a leaf and contributes the
//! initial data evaluated at W_v; otherwise the node splits into
//! W_{v1} ~ H(·|W_v) and W_{v2} = W_v - W_{v1}, and the subtree values are
//! merged — with the projected product for the vector equation, with a
//! plain product for its scalar majorant. The thinned variant kills the
//! branch with probability 1-p before splitting and weighs surviving
//! branches by 1/p, which keeps the estimator unbiased while forcing
//! almost-sure termination.
//!
//! A tree whose walk would descend past the depth cap contributes the value
//! zero (status `DepthCapped`), which makes the Monte Carlo mean an
//! unbiased estimate of the depth-capped fixed-point iterate rather than a
//! biased estimate of the full solution.
//!
//! Randomness is keyed to the node (see [`crate::rng`]): evaluating the
//! same tree index under different horizons, caps or valuations reuses the
//! identical clocks and frequencies. The walk itself uses an explicit work
//! stack — depths in the hundreds are routine near explosion.

use serde::Serialize;
use smallvec::SmallVec;

use crate::data::{InitialDataSpec, Profile, ScalarMap};
use crate::error::CoreError;
use crate::freq::Frequency;
use crate::kernels::KernelSpec;
use crate::rng::NodeKey;
use crate::scaled::{ScaledScalar, ScaledVec};

/// Relative slack allowed when checking pathwise majorization; covers the
/// different rounding of the two value routes, nothing more.
pub const PATHWISE_REL_SLACK: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Equation {
    /// Vector cascade with the projected product.
    Fns,
    /// Scalar majorant cascade with the ordinary product.
    Fms,
}

impl Equation {
    pub fn name(&self) -> &'static str {
        match self {
            Equation::Fns => "fns",
            Equation::Fms => "fms",
        }
    }
}

impl std::str::FromStr for Equation {
    type Err = CoreError;
    fn from_str(s: &str) -> Result<Self, CoreError> {
        match s.to_ascii_lowercase().as_str() {
            "fns" => Ok(Equation::Fns),
            "fms" => Ok(Equation::Fms),
            other => Err(CoreError::parameter(
                "equation",
                format!("unknown equation `{other}`"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode {
    Minimal,
    /// Branch survives with probability p ∈ (0, 1/2]; surviving branches
    /// are reweighted by 1/p.
    Thinned { p: f64 },
}

impl Mode {
    pub fn validate(&self) -> Result<(), CoreError> {
        if let Mode::Thinned { p } = self {
            if !(*p > 0.0 && *p <= 0.5) {
                return Err(CoreError::parameter(
                    "thinning",
                    format!("survival probability must lie in (0, 1/2], got {p}"),
                ));
            }
        }
        Ok(())
    }

    pub fn describe(&self) -> String {
        match self {
            Mode::Minimal => "minimal".into(),
            Mode::Thinned { p } => format!("thinned:{p}"),
        }
    }

    pub fn parse(s: &str) -> Result<Mode, CoreError> {
        let s = s.trim();
        if s == "minimal" {
            return Ok(Mode::Minimal);
        }
        if let Some(p) = s.strip_prefix("thinned:") {
            let p = p
                .parse::<f64>()
                .map_err(|_| CoreError::parameter("mode", format!("bad probability `{p}`")))?;
            let m = Mode::Thinned { p };
            m.validate()?;
            return Ok(m);
        }
        Err(CoreError::parameter(
            "mode",
            format!("unknown mode `{s}` (minimal | thinned:p)"),
        ))
    }
}

/// Everything a single tree needs besides data and randomness.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub kernel: KernelSpec,
    pub root: Frequency,
    pub horizon: f64,
    pub depth_cap: u32,
    pub mode: Mode,
    pub equation: Equation,
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), CoreError> {
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(CoreError::parameter("t", "horizon must be finite and > 0"));
        }
        if self.depth_cap == 0 {
            return Err(CoreError::parameter("depth_cap", "must be ≥ 1"));
        }
        if self.kernel.dim() != self.root.dim() {
            return Err(CoreError::parameter(
                "xi",
                "frequency dimension differs from kernel dimension",
            ));
        }
        self.mode.validate()
    }

    fn with_mode(&self, mode: Mode) -> SimConfig {
        let mut c = self.clone();
        c.mode = mode;
        c
    }

    pub fn minimal(&self) -> SimConfig {
        self.with_mode(Mode::Minimal)
    }

    pub fn thinned(&self, p: f64) -> SimConfig {
        self.with_mode(Mode::Thinned { p })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TreeStatus {
    /// Every path crossed the horizon before the cap.
    Completed,
    /// Some path was still alive at the depth cap; the value is zero.
    DepthCapped,
    /// A thinning coin killed the tree; the value is zero.
    ThinnedZero,
}

/// Result of one tree walk. `leaf_count`/`branch_count`/`height` describe
/// the visited portion (partial when the walk aborted early); `height` is
/// the maximal depth reached, i.e. the genealogical height for completed
/// trees.
#[derive(Debug, Clone)]
pub struct TreeOutcome<V> {
    pub value: V,
    pub status: TreeStatus,
    pub leaf_count: u64,
    pub branch_count: u64,
    pub height: u32,
}

pub type ScalarOutcome = TreeOutcome<ScaledScalar>;
pub type VectorOutcome = TreeOutcome<ScaledVec>;

impl<V> TreeOutcome<V> {
    pub fn completed(&self) -> bool {
        self.status == TreeStatus::Completed
    }

    fn map<W>(self, f: impl FnOnce(V) -> W) -> TreeOutcome<W> {
        TreeOutcome {
            value: f(self.value),
            status: self.status,
            leaf_count: self.leaf_count,
            branch_count: self.branch_count,
            height: self.height,
        }
    }
}

impl ScalarOutcome {
    /// Value collapsed to f64 (saturating far outside the double range).
    pub fn value_f64(&self) -> f64 {
        self.value.to_f64()
    }

    pub fn log2_scale(&self) -> i64 {
        self.value.exponent()
    }
}

impl VectorOutcome {
    pub fn log2_scale(&self) -> i64 {
        self.value.exponent()
    }
}

/// How one tree turns frequencies into a value. Implementations must be
/// pure: the walk calls them in a fixed depth-first order.
pub trait Valuation {
    type Value;
    fn leaf(&self, w: &Frequency) -> Self::Value;
    fn combine(&self, xi: &Frequency, left: Self::Value, right: Self::Value) -> Self::Value;
    fn scale(&self, v: Self::Value, factor: ScaledScalar) -> Self::Value;
    fn zero(&self) -> Self::Value;
}

/// Scalar cascade: value = ∏ g(|W_leaf|).
pub struct FmsValuation<'a> {
    pub profile: &'a Profile,
}

impl Valuation for FmsValuation<'_> {
    type Value = ScaledScalar;

    fn leaf(&self, w: &Frequency) -> ScaledScalar {
        self.profile.eval_scaled(w.norm())
    }

    fn combine(&self, _xi: &Frequency, l: ScaledScalar, r: ScaledScalar) -> ScaledScalar {
        l.mul(r)
    }

    fn scale(&self, v: ScaledScalar, factor: ScaledScalar) -> ScaledScalar {
        v.mul(factor)
    }

    fn zero(&self) -> ScaledScalar {
        ScaledScalar::ZERO
    }
}

/// Vector cascade: leaves carry g·dir, merges use the projected product of
/// the parent frequency (left operand is the sampled child W₁).
pub struct FnsValuation<'a> {
    pub data: &'a InitialDataSpec,
}

impl Valuation for FnsValuation<'_> {
    type Value = ScaledVec;

    fn leaf(&self, w: &Frequency) -> ScaledVec {
        let g = self.data.profile.eval_scaled(w.norm());
        let mut v = ScaledVec::from_components(&self.data.direction);
        v.scale(g);
        v
    }

    fn combine(&self, xi: &Frequency, l: ScaledVec, r: ScaledVec) -> ScaledVec {
        ScaledVec::circle_dot(xi, &l, &r)
    }

    fn scale(&self, mut v: ScaledVec, factor: ScaledScalar) -> ScaledVec {
        v.scale(factor);
        v
    }

    fn zero(&self) -> ScaledVec {
        ScaledVec::zero(self.data.dim())
    }
}

/// Vector and scalar cascade over the same random field.
struct PairValuation<'a> {
    fns: FnsValuation<'a>,
    fms: FmsValuation<'a>,
}

impl Valuation for PairValuation<'_> {
    type Value = (ScaledVec, ScaledScalar);

    fn leaf(&self, w: &Frequency) -> Self::Value {
        (self.fns.leaf(w), self.fms.leaf(w))
    }

    fn combine(&self, xi: &Frequency, l: Self::Value, r: Self::Value) -> Self::Value {
        (
            self.fns.combine(xi, l.0, r.0),
            self.fms.combine(xi, l.1, r.1),
        )
    }

    fn scale(&self, v: Self::Value, factor: ScaledScalar) -> Self::Value {
        (self.fns.scale(v.0, factor), self.fms.scale(v.1, factor))
    }

    fn zero(&self) -> Self::Value {
        (self.fns.zero(), self.fms.zero())
    }
}

type ScalarBundle = SmallVec<[ScaledScalar; 6]>;

/// Base scalar cascade plus transformed companions f∘g over one field.
struct FamilyValuation<'a> {
    profile: &'a Profile,
    maps: &'a [ScalarMap],
}

impl Valuation for FamilyValuation<'_> {
    type Value = ScalarBundle;

    fn leaf(&self, w: &Frequency) -> ScalarBundle {
        let g = self.profile.eval_scaled(w.norm());
        let mut out: ScalarBundle = SmallVec::with_capacity(self.maps.len() + 1);
        out.push(g);
        for m in self.maps {
            out.push(m.apply_scaled(g));
        }
        out
    }

    fn combine(&self, _xi: &Frequency, l: ScalarBundle, r: ScalarBundle) -> ScalarBundle {
        l.into_iter().zip(r).map(|(a, b)| a.mul(b)).collect()
    }

    fn scale(&self, v: ScalarBundle, factor: ScaledScalar) -> ScalarBundle {
        v.into_iter().map(|x| x.mul(factor)).collect()
    }

    fn zero(&self) -> ScalarBundle {
        (0..=self.maps.len()).map(|_| ScaledScalar::ZERO).collect()
    }
}

/// Base scalar cascade plus one cascade per factor profile (for the
/// interpolation-inequality audit).
struct FactorValuation<'a> {
    base: &'a Profile,
    factors: &'a [Profile],
}

impl Valuation for FactorValuation<'_> {
    type Value = ScalarBundle;

    fn leaf(&self, w: &Frequency) -> ScalarBundle {
        let r = w.norm();
        let mut out: ScalarBundle = SmallVec::with_capacity(self.factors.len() + 1);
        out.push(self.base.eval_scaled(r));
        for f in self.factors {
            out.push(f.eval_scaled(r));
        }
        out
    }

    fn combine(&self, _xi: &Frequency, l: ScalarBundle, r: ScalarBundle) -> ScalarBundle {
        l.into_iter().zip(r).map(|(a, b)| a.mul(b)).collect()
    }

    fn scale(&self, v: ScalarBundle, factor: ScaledScalar) -> ScalarBundle {
        v.into_iter().map(|x| x.mul(factor)).collect()
    }

    fn zero(&self) -> ScalarBundle {
        (0..=self.factors.len()).map(|_| ScaledScalar::ZERO).collect()
    }
}

/// Clock/branching skeleton only.
struct UnitValuation;

impl Valuation for UnitValuation {
    type Value = ();
    fn leaf(&self, _w: &Frequency) {}
    fn combine(&self, _xi: &Frequency, _l: (), _r: ()) {}
    fn scale(&self, _v: (), _f: ScaledScalar) {}
    fn zero(&self) {}
}

enum Task {
    Eval {
        w: Frequency,
        tau: f64,
        depth: u32,
        key: NodeKey,
    },
    Combine {
        xi: Frequency,
    },
}

/// Depth-first walk with an explicit stack. Per node the draws are, in
/// order: the clock, the thinning coin (thinned mode, pre-horizon only),
/// then the branch sample — all from the node's own stream, so the field
/// does not depend on what happens elsewhere in the tree.
pub fn simulate_tree<V: Valuation>(
    cfg: &SimConfig,
    val: &V,
    root: NodeKey,
) -> TreeOutcome<V::Value> {
    let mut tasks: Vec<Task> = Vec::with_capacity(64);
    let mut values: Vec<V::Value> = Vec::with_capacity(32);
    tasks.push(Task::Eval {
        w: cfg.root.clone(),
        tau: cfg.horizon,
        depth: 0,
        key: root,
    });

    let mut leaf_count = 0u64;
    let mut branch_count = 0u64;
    let mut height = 0u32;
    let inv_p = match cfg.mode {
        Mode::Minimal => None,
        Mode::Thinned { p } => Some(ScaledScalar::from_f64(1.0 / p)),
    };

    while let Some(task) = tasks.pop() {
        match task {
            Task::Eval { w, tau, depth, key } => {
                let mut rng = key.rng();
                height = height.max(depth);
                let norm2 = {
                    let n = w.norm();
                    n * n
                };
                let clock = rng.next_exp() / norm2;
                if clock >= tau {
                    leaf_count += 1;
                    values.push(val.leaf(&w));
                    continue;
                }
                if let Mode::Thinned { p } = cfg.mode {
                    if rng.next_f64() >= p {
                        // Killed: the whole product is zero.
                        return TreeOutcome {
                            value: val.zero(),
                            status: TreeStatus::ThinnedZero,
                            leaf_count,
                            branch_count,
                            height,
                        };
                    }
                }
                if depth + 1 >= cfg.depth_cap {
                    return TreeOutcome {
                        value: val.zero(),
                        status: TreeStatus::DepthCapped,
                        leaf_count,
                        branch_count,
                        height,
                    };
                }
                branch_count += 1;
                let branch = cfg.kernel.sample_branch(&w, &mut rng);
                let rest = tau - clock;
                tasks.push(Task::Combine { xi: w });
                tasks.push(Task::Eval {
                    w: branch.w2,
                    tau: rest,
                    depth: depth + 1,
                    key: key.child(2),
                });
                tasks.push(Task::Eval {
                    w: branch.w1,
                    tau: rest,
                    depth: depth + 1,
                    key: key.child(1),
                });
            }
            Task::Combine { xi } => {
                let right = values.pop().expect("combine without right value");
                let left = values.pop().expect("combine without left value");
                let mut merged = val.combine(&xi, left, right);
                if let Some(f) = inv_p {
                    merged = val.scale(merged, f);
                }
                values.push(merged);
            }
        }
    }

    let value = values.pop().expect("walk finished without a root value");
    debug_assert!(values.is_empty());
    TreeOutcome {
        value,
        status: TreeStatus::Completed,
        leaf_count,
        branch_count,
        height,
    }
}

/// Outcome of either equation.
#[derive(Debug, Clone)]
pub enum CascadeOutcome {
    Scalar(ScalarOutcome),
    Vector(VectorOutcome),
}

impl CascadeOutcome {
    pub fn status(&self) -> TreeStatus {
        match self {
            CascadeOutcome::Scalar(o) => o.status,
            CascadeOutcome::Vector(o) => o.status,
        }
    }

    pub fn height(&self) -> u32 {
        match self {
            CascadeOutcome::Scalar(o) => o.height,
            CascadeOutcome::Vector(o) => o.height,
        }
    }

    pub fn leaf_count(&self) -> u64 {
        match self {
            CascadeOutcome::Scalar(o) => o.leaf_count,
            CascadeOutcome::Vector(o) => o.leaf_count,
        }
    }

    pub fn branch_count(&self) -> u64 {
        match self {
            CascadeOutcome::Scalar(o) => o.branch_count,
            CascadeOutcome::Vector(o) => o.branch_count,
        }
    }

    /// Real components: [value] for the scalar equation,
    /// [re…, im…] for the vector one.
    pub fn components_f64(&self) -> SmallVec<[f64; 6]> {
        match self {
            CascadeOutcome::Scalar(o) => {
                let mut v = SmallVec::new();
                v.push(o.value_f64());
                v
            }
            CascadeOutcome::Vector(o) => {
                let comps = o.value.to_components_f64();
                let mut v = SmallVec::with_capacity(2 * comps.len());
                for c in &comps {
                    v.push(c.re);
                }
                for c in &comps {
                    v.push(c.im);
                }
                v
            }
        }
    }
}

/// One tree under the configured mode and equation.
pub fn simulate(cfg: &SimConfig, data: &InitialDataSpec, root: NodeKey) -> CascadeOutcome {
    match cfg.equation {
        Equation::Fms => CascadeOutcome::Scalar(simulate_tree(
            cfg,
            &FmsValuation {
                profile: &data.profile,
            },
            root,
        )),
        Equation::Fns => CascadeOutcome::Vector(simulate_tree(cfg, &FnsValuation { data }, root)),
    }
}

/// One tree of the minimal (unthinned) cascade, whatever `cfg.mode` says.
pub fn simulate_minimal(cfg: &SimConfig, data: &InitialDataSpec, root: NodeKey) -> CascadeOutcome {
    simulate(&cfg.minimal(), data, root)
}

/// One tree of the thinned cascade; `cfg.mode` must be thinned.
pub fn simulate_thinned(
    cfg: &SimConfig,
    data: &InitialDataSpec,
    root: NodeKey,
) -> Result<CascadeOutcome, CoreError> {
    match cfg.mode {
        Mode::Thinned { .. } => Ok(simulate(cfg, data, root)),
        Mode::Minimal => Err(CoreError::parameter(
            "mode",
            "simulate_thinned needs a thinned mode configuration",
        )),
    }
}

/// Vector and scalar walk over one random field, plus the pathwise
/// majorization check |X| ≤ Y (up to [`PATHWISE_REL_SLACK`]).
#[derive(Debug, Clone)]
pub struct CoupledOutcome {
    pub fns: VectorOutcome,
    pub fms: ScalarOutcome,
    /// |X| ≤ Y·(1 + slack) held for this tree.
    pub bound_ok: bool,
    /// log₂|X| - log₂ Y, positive means violation; -∞ when |X| = 0.
    pub excess_log2: f64,
}

pub fn simulate_coupled_fns_fms(
    cfg: &SimConfig,
    data: &InitialDataSpec,
    root: NodeKey,
) -> CoupledOutcome {
    let val = PairValuation {
        fns: FnsValuation { data },
        fms: FmsValuation {
            profile: &data.profile,
        },
    };
    let out = simulate_tree(cfg, &val, root);
    let (x, y) = out.value;
    let xn = x.norm();
    let bound_ok = xn.le_with_slack(&y, PATHWISE_REL_SLACK);
    let excess_log2 = if xn.is_zero() {
        f64::NEG_INFINITY
    } else if y.is_zero() {
        f64::INFINITY
    } else {
        xn.log2() - y.log2()
    };
    let status = out.status;
    let (leaf_count, branch_count, height) = (out.leaf_count, out.branch_count, out.height);
    CoupledOutcome {
        fns: TreeOutcome {
            value: x,
            status,
            leaf_count,
            branch_count,
            height,
        },
        fms: TreeOutcome {
            value: y,
            status,
            leaf_count,
            branch_count,
            height,
        },
        bound_ok,
        excess_log2,
    }
}

/// Scalar cascade and its transformed companions over one field: value[0]
/// is the base product Y, value[1+i] the product of `maps[i]`-transformed
/// leaf amplitudes.
pub fn simulate_scalar_family(
    cfg: &SimConfig,
    profile: &Profile,
    maps: &[ScalarMap],
    root: NodeKey,
) -> TreeOutcome<Vec<ScaledScalar>> {
    let val = FamilyValuation { profile, maps };
    simulate_tree(cfg, &val, root).map(|v| v.into_vec())
}

/// Base scalar cascade and per-factor cascades over one field.
pub fn simulate_factor_family(
    cfg: &SimConfig,
    base: &Profile,
    factors: &[Profile],
    root: NodeKey,
) -> TreeOutcome<Vec<ScaledScalar>> {
    let val = FactorValuation { base, factors };
    simulate_tree(cfg, &val, root).map(|v| v.into_vec())
}

/// Clock skeleton only: Completed means every path crossed the horizon
/// before the cap, i.e. the depth-capped explosion time exceeds t.
pub fn explosion_indicator(cfg: &SimConfig, root: NodeKey) -> TreeOutcome<()> {
    simulate_tree(cfg, &UnitValuation, root)
}
