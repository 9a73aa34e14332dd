//! Weighted shell norms for radial frequency profiles.
//!
//! The norm splits frequency space into dyadic shells A_k = [2^k, 2^{k+1}),
//! takes a power-weighted L^p norm on each shell,
//!
//! ```text
//! S_k(g)^p = ω_{d−1} ∫_{A_k} r^{αp + d − 1} g(r)^p dr        (p < ∞)
//! S_k(g)   = ess sup_{A_k} r^α g(r)                          (p = ∞)
//! ```
//!
//! and aggregates the shell values in ℓ^q over a finite window of shell
//! indices.  Shells outside the window are probed separately and reported as
//! a tail bound; if the probed values fail to decay the norm is +∞ and the
//! offending shells are listed.
//!
//! Profiles are carried symbolically as sums of pieces C·r^μ·e^{−cr} on
//! disjoint intervals, which is closed under the operations the checks need
//! (pointwise powers, multiplication by weights), so power-type shells are
//! exact and exponential ones go through adaptive quadrature.

use crate::data::Profile;
use crate::error::CoreError;
use crate::kernels::KernelSpec;
use crate::quad::adaptive_simpson;
use serde::{Serialize, Serializer};

/// Surface measure of the unit sphere in d = 3.
const OMEGA_2: f64 = 4.0 * std::f64::consts::PI;

/// (2π)^{−d/2} for d = 3: the Fourier-side amplitude normalizer.
pub fn fourier_amplitude_constant(dim: usize) -> Result<f64, CoreError> {
    if dim != 3 {
        return Err(CoreError::UnsupportedDimension {
            dim,
            reason: "amplitude normalizer tabulated for d = 3 only".into(),
        });
    }
    Ok((2.0 * std::f64::consts::PI).powf(-1.5))
}

fn ser_exponent<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_infinite() {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*v)
    }
}

/// Parameters of the shell norm.  `p`/`q` accept `f64::INFINITY`.
#[derive(Debug, Clone, Serialize)]
pub struct HerzParams {
    pub alpha: f64,
    #[serde(serialize_with = "ser_exponent")]
    pub p: f64,
    #[serde(serialize_with = "ser_exponent")]
    pub q: f64,
    pub dim: usize,
    /// Closed shell-index window [k_min, k_max] aggregated into the norm.
    pub k_min: i32,
    pub k_max: i32,
}

impl HerzParams {
    pub fn new(alpha: f64, p: f64, q: f64) -> Self {
        HerzParams { alpha, p, q, dim: 3, k_min: -64, k_max: 64 }
    }

    /// The scaling-critical weight for the cascade problem: α = d − 1 − d/p.
    pub fn scale_critical(p: f64) -> Self {
        let alpha = 2.0 - 3.0 / p;
        HerzParams::new(alpha, p, p)
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        if self.dim != 3 {
            return Err(CoreError::UnsupportedDimension {
                dim: self.dim,
                reason: "shell norms implemented for d = 3 only".into(),
            });
        }
        if !(self.p >= 1.0) {
            return Err(CoreError::parameter("p", "need p ∈ [1, ∞]"));
        }
        if !(self.q >= 1.0) {
            return Err(CoreError::parameter("q", "need q ∈ [1, ∞]"));
        }
        if !self.alpha.is_finite() {
            return Err(CoreError::parameter("alpha", "weight exponent must be finite"));
        }
        if self.k_min > self.k_max {
            return Err(CoreError::parameter("k_min", "empty shell window"));
        }
        Ok(())
    }
}

/// One symbolic piece C·r^μ·e^{−c·r} supported on [lo, hi).
#[derive(Debug, Clone, Copy)]
pub struct RadialPiece {
    pub coeff: f64,
    pub power: f64,
    pub rate: f64,
    pub lo: f64,
    pub hi: f64,
}

impl RadialPiece {
    fn eval(&self, r: f64) -> f64 {
        if r < self.lo || r >= self.hi {
            0.0
        } else {
            self.coeff * r.powf(self.power) * (-self.rate * r).exp()
        }
    }
}

/// A nonnegative radial profile as a sum of pieces on disjoint intervals.
#[derive(Debug, Clone)]
pub struct RadialFn {
    pieces: Vec<RadialPiece>,
}

impl RadialFn {
    /// Pieces must be nonnegative and supported on disjoint intervals; the
    /// symbolic pointwise operations below rely on no overlap.
    pub fn new(mut pieces: Vec<RadialPiece>) -> Result<RadialFn, CoreError> {
        pieces.retain(|p| p.coeff != 0.0 && p.hi > p.lo);
        for p in &pieces {
            if !(p.coeff >= 0.0 && p.coeff.is_finite()) {
                return Err(CoreError::parameter("coeff", "pieces must be finite, ≥ 0"));
            }
            if !(p.lo >= 0.0 && p.hi > p.lo) {
                return Err(CoreError::parameter("support", "need 0 ≤ lo < hi"));
            }
            if !p.power.is_finite() || !p.rate.is_finite() {
                return Err(CoreError::parameter("piece", "exponents must be finite"));
            }
        }
        pieces.sort_by(|a, b| a.lo.total_cmp(&b.lo));
        for w in pieces.windows(2) {
            if w[1].lo < w[0].hi {
                return Err(CoreError::parameter("support", "piece supports overlap"));
            }
        }
        Ok(RadialFn { pieces })
    }

    pub fn from_profile(profile: &Profile) -> RadialFn {
        let pieces = match *profile {
            Profile::Constant { kappa } => vec![RadialPiece {
                coeff: kappa,
                power: 0.0,
                rate: 0.0,
                lo: 0.0,
                hi: f64::INFINITY,
            }],
            Profile::RadialExp { kappa, a } => vec![RadialPiece {
                coeff: kappa,
                power: 0.0,
                rate: a,
                lo: 0.0,
                hi: f64::INFINITY,
            }],
            Profile::Annulus { kappa, r0, r1 } => vec![RadialPiece {
                coeff: kappa,
                power: 0.0,
                rate: 0.0,
                lo: r0,
                hi: r1,
            }],
            Profile::PowerCap { kappa, beta, r0 } => vec![
                RadialPiece { coeff: kappa, power: 0.0, rate: 0.0, lo: 0.0, hi: r0 },
                RadialPiece {
                    coeff: kappa * r0.powf(beta),
                    power: -beta,
                    rate: 0.0,
                    lo: r0,
                    hi: f64::INFINITY,
                },
            ],
        };
        RadialFn { pieces }
    }

    pub fn eval(&self, r: f64) -> f64 {
        self.pieces.iter().map(|p| p.eval(r)).sum()
    }

    /// Pointwise g ↦ g^e (valid because supports are disjoint).
    pub fn powf(&self, e: f64) -> RadialFn {
        RadialFn {
            pieces: self
                .pieces
                .iter()
                .map(|p| RadialPiece {
                    coeff: p.coeff.powf(e),
                    power: p.power * e,
                    rate: p.rate * e,
                    lo: p.lo,
                    hi: p.hi,
                })
                .collect(),
        }
    }

    /// Pointwise multiplication by C·r^μ·e^{−c·r}.
    pub fn scale(&self, coeff: f64, power: f64, rate: f64) -> RadialFn {
        RadialFn {
            pieces: self
                .pieces
                .iter()
                .map(|p| RadialPiece {
                    coeff: p.coeff * coeff,
                    power: p.power + power,
                    rate: p.rate + rate,
                    lo: p.lo,
                    hi: p.hi,
                })
                .collect(),
        }
    }
}

/// Shell value together with its index.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ShellValue {
    pub k: i32,
    pub value: f64,
}

/// Norm evaluation report (serialized by the CLI as JSON).
#[derive(Debug, Clone, Serialize)]
pub struct HerzReport {
    pub params: HerzParams,
    /// Shell values inside the window, skipping empty shells.
    #[serde(rename = "per_shell_values")]
    pub per_shell: Vec<ShellValue>,
    /// ℓ^q aggregate over the window; +∞ when divergent.
    pub norm: f64,
    /// ℓ^q aggregate of the probed shells outside the window.
    pub tail_bound: f64,
    pub divergent: bool,
    /// Probed shells whose values stopped decaying (evidence of divergence).
    pub divergent_shells: Vec<i32>,
}

/// ∫_a^b r^e dr, exact.
fn power_integral(e: f64, a: f64, b: f64) -> f64 {
    if (e + 1.0).abs() < 1e-12 {
        // Treat the near-log case by its limit; |e+1| below 1e-12 changes the
        // value by < 1e-12·ln²(b/a), beneath the quadrature reporting scale.
        (b / a).ln()
    } else {
        let s = e + 1.0;
        // Factored form stays finite far longer than b^s − a^s would.
        a.powf(s) * ((b / a).powf(s) - 1.0) / s
    }
}

/// ∫_a^b r^e e^{−c r} dr for c > 0, via adaptive quadrature on the shell.
fn exp_power_integral(e: f64, c: f64, a: f64, b: f64) -> f64 {
    // Beyond c·r ≈ 745 the integrand underflows; clip to keep Simpson finite.
    let b = b.min(745.0 / c);
    if b <= a {
        return 0.0;
    }
    let f = |r: f64| r.powf(e) * (-c * r).exp();
    let peak = f(a).max(f(b)).max({
        let rstar = e / c;
        if rstar > a && rstar < b {
            f(rstar)
        } else {
            0.0
        }
    });
    if peak == 0.0 {
        return 0.0;
    }
    adaptive_simpson(&f, a, b, 1e-14 * peak * (b - a))
}

/// S_k(g)^p restricted to one piece, already clipped to [a, b].
fn piece_shell_power(piece: &RadialPiece, params: &HerzParams, a: f64, b: f64) -> f64 {
    let p = params.p;
    let e = (params.alpha + piece.power) * p + (params.dim as f64 - 1.0);
    let c = piece.rate * p;
    let coeff = OMEGA_2 * piece.coeff.powf(p);
    if coeff == 0.0 {
        return 0.0;
    }
    if c == 0.0 {
        coeff * power_integral(e, a, b)
    } else if c > 0.0 {
        coeff * exp_power_integral(e, c, a, b)
    } else {
        // Growing pieces: saturate honestly once e^{|c|r} leaves f64 range.
        if -c * b > 700.0 {
            return f64::INFINITY;
        }
        coeff * exp_power_integral(e, c, a, b)
    }
}

/// sup over [a, b] of r^{α+μ}·e^{−c r} (times the coefficient).
fn piece_shell_sup(piece: &RadialPiece, alpha: f64, a: f64, b: f64) -> f64 {
    let e = alpha + piece.power;
    let c = piece.rate;
    let f = |r: f64| r.powf(e) * (-c * r).exp();
    let mut best = f(a).max(f(b));
    if c != 0.0 {
        let rstar = e / c;
        if rstar > a && rstar < b {
            best = best.max(f(rstar));
        }
    }
    piece.coeff * best
}

/// Shell value S_k(g) for shell [2^k, 2^{k+1}).
fn shell_value(f: &RadialFn, params: &HerzParams, k: i32) -> f64 {
    let lo = (k as f64).exp2();
    let hi = (k as f64 + 1.0).exp2();
    if params.p.is_infinite() {
        let mut sup = 0.0f64;
        for piece in &f.pieces {
            let a = piece.lo.max(lo);
            let b = piece.hi.min(hi);
            if b > a {
                sup = sup.max(piece_shell_sup(piece, params.alpha, a, b));
            }
        }
        sup
    } else {
        let mut acc = 0.0f64;
        for piece in &f.pieces {
            let a = piece.lo.max(lo);
            let b = piece.hi.min(hi);
            if b > a {
                acc += piece_shell_power(piece, params, a, b);
            }
        }
        acc.powf(1.0 / params.p)
    }
}

struct LqAccum {
    q: f64,
    sum: f64,
}

impl LqAccum {
    fn new(q: f64) -> Self {
        LqAccum { q, sum: 0.0 }
    }

    fn push(&mut self, v: f64) {
        if self.q.is_infinite() {
            self.sum = self.sum.max(v);
        } else {
            self.sum += v.powf(self.q);
        }
    }

    fn finish(&self) -> f64 {
        if self.q.is_infinite() {
            self.sum
        } else {
            self.sum.powf(1.0 / self.q)
        }
    }
}

/// Probes shells outward from the window edge in direction `step` until the
/// values are negligible, collecting them into `acc`.  Returns the shells at
/// which decay failed (non-empty means the ℓ^q tail diverges).
///
/// Shell values of the symbolic pieces are asymptotically geometric, so a
/// persistent plateau is a constant sequence: finite for q = ∞ (the sup is
/// already recorded), divergent otherwise.  Decay slower than ~1e-9 per
/// shell is reported as divergent because no finite probe can certify it.
fn probe_tail(
    f: &RadialFn,
    params: &HerzParams,
    start: i32,
    step: i32,
    acc: &mut LqAccum,
    peak: f64,
) -> Vec<i32> {
    let floor = (peak.max(1e-12)) * 1e-18;
    let sup_mode = params.q.is_infinite();
    let mut bad = Vec::new();
    let mut prev = f64::INFINITY;
    let mut last_ratio = 0.0f64;
    let mut stall = 0u32;
    let mut k = start;
    let mut exhausted = true;
    // 2^{±1040} covers the whole f64 range; anything alive past that has
    // either saturated to inf or entered its asymptotic geometric regime.
    for _ in 0..1040 {
        let v = shell_value(f, params, k);
        if !v.is_finite() {
            bad.push(k);
            exhausted = false;
            break;
        }
        if v <= floor {
            exhausted = false;
            break;
        }
        acc.push(v);
        last_ratio = if prev.is_finite() { v / prev } else { 0.0 };
        if last_ratio >= 1.0 - 1e-9 {
            stall += 1;
            if stall >= 8 {
                if !(sup_mode && last_ratio <= 1.0 + 1e-9) {
                    bad.push(k);
                }
                exhausted = false;
                break;
            }
        } else {
            stall = 0;
        }
        prev = v;
        k += step;
    }
    if exhausted && prev.is_finite() && prev > floor && last_ratio > 0.0 {
        // Soft geometric decay outlived the probe window: extrapolate the
        // remaining tail from the last observed per-shell ratio.
        if sup_mode {
            acc.push(prev * last_ratio);
        } else {
            let rq = last_ratio.powf(params.q);
            acc.push(prev * (rq / (1.0 - rq)).powf(1.0 / params.q));
        }
    }
    bad
}

/// Evaluates the shell norm of `f`.
pub fn herz_norm(f: &RadialFn, params: &HerzParams) -> Result<HerzReport, CoreError> {
    params.validate()?;
    let mut per_shell = Vec::new();
    let mut acc = LqAccum::new(params.q);
    let mut peak = 0.0f64;
    for k in params.k_min..=params.k_max {
        let v = shell_value(f, params, k);
        if !v.is_finite() {
            return Ok(HerzReport {
                params: params.clone(),
                per_shell,
                norm: f64::INFINITY,
                tail_bound: 0.0,
                divergent: true,
                divergent_shells: vec![k],
            });
        }
        if v > 0.0 {
            per_shell.push(ShellValue { k, value: v });
            acc.push(v);
            peak = peak.max(v);
        }
    }
    let mut tail = LqAccum::new(params.q);
    let mut bad = probe_tail(f, params, params.k_max + 1, 1, &mut tail, peak);
    bad.extend(probe_tail(f, params, params.k_min - 1, -1, &mut tail, peak));
    let divergent = !bad.is_empty();
    Ok(HerzReport {
        params: params.clone(),
        per_shell,
        norm: if divergent { f64::INFINITY } else { acc.finish() },
        tail_bound: tail.finish(),
        divergent,
        divergent_shells: bad,
    })
}

/// The multiplier profile χ₀ = c₀·v₀/h on the Fourier side: the shape whose
/// branching cascade the estimators simulate.  For the scale-invariant kernel
/// this multiplies by (c₀/c_d)·r²; for the exponential kernel by 2πc₀·r·e^{r}
/// (growth — its criticality shows up as a divergent shell norm).
pub fn normalize_data(kernel: &KernelSpec, v0: &Profile) -> Result<RadialFn, CoreError> {
    v0.validate()?;
    let c0 = fourier_amplitude_constant(kernel.dim())?;
    let f = RadialFn::from_profile(v0);
    Ok(match kernel.family() {
        crate::kernels::KernelFamily::ScaleInvariant => {
            f.scale(c0 / kernel.constant(), 2.0, 0.0)
        }
        crate::kernels::KernelFamily::Bessel => {
            f.scale(2.0 * std::f64::consts::PI * c0, 1.0, -1.0)
        }
    })
}

/// Data-smallness threshold ε(δ, p) = δ^{1/p} (c_d/c₀)^{1/p'}: constant data
/// below ε keeps the normalized cascade weight below δ.
pub fn smallness_threshold(kernel: &KernelSpec, p: f64, delta: f64) -> Result<f64, CoreError> {
    if !(p >= 1.0) {
        return Err(CoreError::parameter("p", "need p ∈ [1, ∞] (duality breaks below 1)"));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(CoreError::parameter("delta", "need a positive finite margin"));
    }
    let c0 = fourier_amplitude_constant(kernel.dim())?;
    let cd = kernel.constant();
    let inv_p = if p.is_infinite() { 0.0 } else { 1.0 / p };
    let inv_p_dual = 1.0 - inv_p;
    Ok(delta.powf(inv_p) * (cd / c0).powf(inv_p_dual))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelFamily;

    fn kernel(family: KernelFamily) -> KernelSpec {
        KernelSpec::new(family, 3).unwrap()
    }

    #[test]
    fn annulus_shell_norm_is_six_pi() {
        // g ≡ 1 on [1, 2) is exactly shell k = 0; with α = −1, p = 1 the
        // weight is r^{−1}·r² = r, so the norm is 4π·∫₁² r dr = 6π.
        let f = RadialFn::from_profile(&Profile::Annulus { kappa: 1.0, r0: 1.0, r1: 2.0 });
        let report = herz_norm(&f, &HerzParams::new(-1.0, 1.0, 1.0)).unwrap();
        assert!(!report.divergent);
        assert_eq!(report.per_shell.len(), 1);
        assert_eq!(report.per_shell[0].k, 0);
        let want = 6.0 * std::f64::consts::PI;
        assert!(
            (report.norm - want).abs() < 1e-10 * want,
            "norm {} vs 6π {}",
            report.norm,
            want
        );
        assert!(report.tail_bound == 0.0);
    }

    #[test]
    fn norm_is_homogeneous_in_amplitude() {
        let cases = [
            HerzParams::new(-1.0, 1.0, 1.0),
            HerzParams::new(0.5, 2.0, 3.0),
            HerzParams::new(1.0, 3.0, f64::INFINITY),
            HerzParams::new(0.25, f64::INFINITY, f64::INFINITY),
        ];
        let profiles = [
            Profile::Annulus { kappa: 1.0, r0: 0.7, r1: 5.3 },
            Profile::RadialExp { kappa: 1.0, a: 2.0 },
        ];
        for params in &cases {
            for profile in &profiles {
                let f1 = RadialFn::from_profile(profile);
                let f7 = RadialFn::from_profile(&profile.with_kappa(7.0));
                let n1 = herz_norm(&f1, params).unwrap();
                let n7 = herz_norm(&f7, params).unwrap();
                assert!(!n1.divergent && !n7.divergent);
                let rel = (n7.norm - 7.0 * n1.norm).abs() / (7.0 * n1.norm);
                assert!(rel < 1e-12, "{profile:?} {params:?}: {rel:.2e}");
            }
        }
    }

    #[test]
    fn shell_aggregation_is_nested_in_q() {
        // ℓ^{q₂} ≤ ℓ^{q₁} for q₂ ≥ q₁ on the same shell values.  The weight
        // is chosen per profile so every q gives a finite norm.
        let qs = [1.0, 1.5, 2.0, 4.0, f64::INFINITY];
        let cases = [
            (Profile::Annulus { kappa: 1.0, r0: 1.0, r1: 2.0 }, -0.5),
            (Profile::Annulus { kappa: 0.5, r0: 0.2, r1: 40.0 }, -0.5),
            (Profile::RadialExp { kappa: 2.0, a: 1.0 }, 0.5),
            (Profile::PowerCap { kappa: 1.0, beta: 4.0, r0: 1.0 }, 0.5),
        ];
        for (profile, alpha) in &cases {
            let f = RadialFn::from_profile(profile);
            let mut prev = f64::INFINITY;
            for &q in &qs {
                let params = HerzParams::new(*alpha, 2.0, q);
                let report = herz_norm(&f, &params).unwrap();
                assert!(!report.divergent, "{profile:?} q={q}: divergent");
                assert!(
                    report.norm <= prev * (1.0 + 1e-12),
                    "{profile:?}: q={q} norm {} above smaller-q norm {prev}",
                    report.norm
                );
                prev = report.norm;
            }
        }
    }

    #[test]
    fn full_support_constant_is_finite_only_in_sup_aggregation() {
        // κ ≡ 1 with the borderline weight α = −d/p makes every shell value
        // identical: ℓ^∞ picks that value out exactly, any finite q diverges.
        let f = RadialFn::from_profile(&Profile::Constant { kappa: 1.0 });
        let sup = herz_norm(&f, &HerzParams::new(-1.5, 2.0, f64::INFINITY)).unwrap();
        assert!(!sup.divergent, "constant sequence of shells is a finite sup");
        let want = (OMEGA_2 * std::f64::consts::LN_2).sqrt();
        assert!((sup.norm - want).abs() < 1e-12 * want, "{} vs {want}", sup.norm);
        for q in [1.0, 2.0] {
            let report = herz_norm(&f, &HerzParams::new(-1.5, 2.0, q)).unwrap();
            assert!(report.divergent && report.norm.is_infinite(), "q={q} must diverge");
        }
    }

    #[test]
    fn normalized_power_identity_connects_both_routes() {
        // For φ₀ = χ₀^p the weighted-1-norm of (h/c₀)·φ₀ equals
        // (c₀/c_d)^{p−1} times the p-th power of the scale-critical norm of
        // v₀ — two separate evaluation routes through different parameters.
        let k = kernel(KernelFamily::ScaleInvariant);
        let c0 = fourier_amplitude_constant(3).unwrap();
        let cd = k.constant();
        let profiles = [
            Profile::Annulus { kappa: 0.8, r0: 0.5, r1: 3.0 },
            Profile::RadialExp { kappa: 1.3, a: 1.0 },
        ];
        for profile in &profiles {
            for p in [1.0, 2.0, 3.0] {
                let chi0 = normalize_data(&k, profile).unwrap();
                let phi0 = chi0.powf(p);
                // Route A: weighted-1 norm of (h/c₀)·φ₀ = (c_d/c₀)·r^{−2}·φ₀.
                let a_fn = phi0.scale(cd / c0, -2.0, 0.0);
                let route_a = herz_norm(&a_fn, &HerzParams::new(-1.0, 1.0, 1.0)).unwrap();
                // Route B: scale-critical norm of v₀ itself.
                let route_b = herz_norm(
                    &RadialFn::from_profile(profile),
                    &HerzParams::scale_critical(p),
                )
                .unwrap();
                assert!(!route_a.divergent && !route_b.divergent);
                let want = (c0 / cd).powf(p - 1.0) * route_b.norm.powf(p);
                let rel = (route_a.norm - want).abs() / want;
                assert!(
                    rel < 1e-8,
                    "{profile:?} p={p}: route A {} vs route B {} (rel {rel:.2e})",
                    route_a.norm,
                    want
                );
            }
        }
    }

    #[test]
    fn slowly_decaying_power_tail_diverges() {
        let f = RadialFn::from_profile(&Profile::PowerCap { kappa: 1.0, beta: 0.5, r0: 1.0 });
        let report = herz_norm(&f, &HerzParams::new(-1.0, 1.0, 1.0)).unwrap();
        assert!(report.divergent, "r^{{−1/2}} tail must defeat the r² volume weight");
        assert!(report.norm.is_infinite());
        assert!(!report.divergent_shells.is_empty());
        assert!(report.divergent_shells[0] > 64);
    }

    #[test]
    fn sup_exponent_shells_are_analytic() {
        // p = ∞: S_k = sup r^α over the shell; for α = −1 on [1, 2) this is 1.
        let f = RadialFn::from_profile(&Profile::Annulus { kappa: 1.0, r0: 1.0, r1: 2.0 });
        let report = herz_norm(&f, &HerzParams::new(-1.0, f64::INFINITY, f64::INFINITY)).unwrap();
        assert!((report.norm - 1.0).abs() < 1e-14);
        // With α = +1 the sup sits at the right end: 2 (approached, not attained;
        // the closed form evaluates the endpoint).
        let report = herz_norm(&f, &HerzParams::new(1.0, f64::INFINITY, f64::INFINITY)).unwrap();
        assert!((report.norm - 2.0).abs() < 1e-14);
        // Interior stationary point: r·e^{−r} on shell [1, 2) peaks at r = 1.
        let g = RadialFn::from_profile(&Profile::RadialExp { kappa: 1.0, a: 1.0 });
        let report = herz_norm(&g, &HerzParams::new(1.0, f64::INFINITY, f64::INFINITY)).unwrap();
        let want = 1.0f64 * (-1.0f64).exp();
        assert!((report.norm - want).abs() < 1e-14, "{} vs {want}", report.norm);
    }

    #[test]
    fn exponential_shells_match_direct_quadrature() {
        let f = RadialFn::from_profile(&Profile::RadialExp { kappa: 2.0, a: 1.5 });
        let params = HerzParams::new(0.5, 2.0, 2.0);
        let report = herz_norm(&f, &params).unwrap();
        // Independent evaluation of the same norm: one global integral of
        // ω₂ r^{αp+2} g^p over (0, ∞) since q = p makes shells additive.
        let g = |r: f64| {
            OMEGA_2 * r.powf(0.5 * 2.0 + 2.0) * (2.0 * (-1.5 * r).exp()).powi(2)
        };
        let direct = adaptive_simpson(&g, 1e-12, 30.0, 1e-13).powf(0.5);
        let rel = (report.norm - direct).abs() / direct;
        assert!(rel < 1e-9, "norm {} vs direct {direct} ({rel:.2e})", report.norm);
        assert!(report.tail_bound < 1e-6 * report.norm);
    }

    #[test]
    fn growing_normalized_data_is_flagged_divergent() {
        // The exponential-kernel multiplier grows like r·e^{r}: no shell
        // window can hold it, and the norm must say so rather than truncate.
        let k = kernel(KernelFamily::Bessel);
        let chi0 = normalize_data(&k, &Profile::Constant { kappa: 1.0 }).unwrap();
        let report = herz_norm(&chi0, &HerzParams::new(-1.0, 1.0, 1.0)).unwrap();
        assert!(report.divergent);
        assert!(report.norm.is_infinite());
    }

    #[test]
    fn scale_invariant_normalization_shifts_powers() {
        let k = kernel(KernelFamily::ScaleInvariant);
        let chi0 = normalize_data(&k, &Profile::Constant { kappa: 2.0 }).unwrap();
        // χ₀ = (c₀/c_d)·r²·v₀.
        let c0 = fourier_amplitude_constant(3).unwrap();
        let want = (c0 / k.constant()) * 2.0 * 9.0;
        assert!((chi0.eval(3.0) - want).abs() < 1e-12 * want);
    }

    #[test]
    fn smallness_threshold_matches_the_duality_formula() {
        let k = kernel(KernelFamily::ScaleInvariant);
        let c0 = fourier_amplitude_constant(3).unwrap();
        let cd = k.constant();
        // p = 1 collapses to ε = δ.
        let eps = smallness_threshold(&k, 1.0, 0.01).unwrap();
        assert!((eps - 0.01).abs() < 1e-15);
        // p = 2: ε = δ^{1/2}·(c_d/c₀)^{1/2}.
        let eps = smallness_threshold(&k, 2.0, 0.01).unwrap();
        let want = 0.01f64.sqrt() * (cd / c0).sqrt();
        assert!((eps - want).abs() < 1e-15 * want);
        // p = ∞: ε = c_d/c₀ independent of δ.
        let eps = smallness_threshold(&k, f64::INFINITY, 0.5).unwrap();
        assert!((eps - cd / c0).abs() < 1e-15 * (cd / c0));
        assert!(smallness_threshold(&k, 0.5, 0.01).is_err());
    }

    #[test]
    fn scale_critical_weight_matches_the_exponent_formula() {
        assert!((HerzParams::scale_critical(1.0).alpha - (-1.0)).abs() < 1e-15);
        assert!((HerzParams::scale_critical(3.0).alpha - 1.0).abs() < 1e-15);
        let p = HerzParams::scale_critical(2.0);
        assert!((p.alpha - 0.5).abs() < 1e-15);
        assert_eq!(p.q, 2.0);
    }

    #[test]
    fn overlapping_pieces_are_rejected() {
        let bad = RadialFn::new(vec![
            RadialPiece { coeff: 1.0, power: 0.0, rate: 0.0, lo: 0.0, hi: 2.0 },
            RadialPiece { coeff: 1.0, power: 0.0, rate: 0.0, lo: 1.0, hi: 3.0 },
        ]);
        assert!(bad.is_err());
    }
}
