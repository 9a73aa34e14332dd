//! Initial data for the cascades and the scalar transforms used by the
//! order audits.
//!
//! Vector data is χ₀(ξ) = g(|ξ|)·dir with a radial amplitude g ≥ 0 from a
//! small family of profiles and a fixed complex unit direction; the scalar
//! cascade uses |χ₀| = g alone.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::CoreError;
use crate::freq::ComplexVec;

/// Radial amplitude profiles g(r) ≥ 0.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Profile {
    /// g(r) = κ.
    Constant { kappa: f64 },
    /// g(r) = κ e^{-a r}.
    RadialExp { kappa: f64, a: f64 },
    /// g(r) = κ on [r0, r1], zero elsewhere.
    Annulus { kappa: f64, r0: f64, r1: f64 },
    /// g(r) = κ min(1, (r/r0)^{-β}).
    PowerCap { kappa: f64, beta: f64, r0: f64 },
}

impl Profile {
    pub fn validate(&self) -> Result<(), CoreError> {
        let bad = |field, why: &str| Err(CoreError::parameter(field, why.to_string()));
        match *self {
            Profile::Constant { kappa } => {
                if !(kappa >= 0.0) || !kappa.is_finite() {
                    return bad("kappa", "must be finite and ≥ 0");
                }
            }
            Profile::RadialExp { kappa, a } => {
                if !(kappa >= 0.0) || !kappa.is_finite() {
                    return bad("kappa", "must be finite and ≥ 0");
                }
                if !(a > 0.0) || !a.is_finite() {
                    return bad("a", "must be finite and > 0");
                }
            }
            Profile::Annulus { kappa, r0, r1 } => {
                if !(kappa >= 0.0) || !kappa.is_finite() {
                    return bad("kappa", "must be finite and ≥ 0");
                }
                if !(r0 >= 0.0) || !(r1 > r0) || !r1.is_finite() {
                    return bad("r0/r1", "need 0 ≤ r0 < r1 < ∞");
                }
            }
            Profile::PowerCap { kappa, beta, r0 } => {
                if !(kappa >= 0.0) || !kappa.is_finite() {
                    return bad("kappa", "must be finite and ≥ 0");
                }
                if !(beta > 0.0) || !beta.is_finite() {
                    return bad("beta", "must be finite and > 0");
                }
                if !(r0 > 0.0) || !r0.is_finite() {
                    return bad("r0", "must be finite and > 0");
                }
            }
        }
        Ok(())
    }

    /// g(r) for r > 0.
    #[inline]
    pub fn eval(&self, r: f64) -> f64 {
        match *self {
            Profile::Constant { kappa } => kappa,
            Profile::RadialExp { kappa, a } => kappa * (-a * r).exp(),
            Profile::Annulus { kappa, r0, r1 } => {
                if r >= r0 && r <= r1 {
                    kappa
                } else {
                    0.0
                }
            }
            Profile::PowerCap { kappa, beta, r0 } => {
                if r <= r0 {
                    kappa
                } else {
                    kappa * (r / r0).powf(-beta)
                }
            }
        }
    }

    /// g(r) in the mantissa/exponent representation. Equal to `eval` where
    /// both are representable, but steep exponential tails keep their true
    /// magnitude instead of underflowing a plain double — deep cascades
    /// multiply thousands of such factors.
    pub fn eval_scaled(&self, r: f64) -> crate::scaled::ScaledScalar {
        use crate::scaled::ScaledScalar;
        match *self {
            Profile::Constant { kappa } => ScaledScalar::from_f64(kappa),
            Profile::RadialExp { kappa, a } => {
                if kappa == 0.0 {
                    ScaledScalar::ZERO
                } else {
                    ScaledScalar::from_f64(kappa)
                        .mul(ScaledScalar::exp2(-a * r * std::f64::consts::LOG2_E))
                }
            }
            Profile::Annulus { kappa, r0, r1 } => {
                if r >= r0 && r <= r1 {
                    ScaledScalar::from_f64(kappa)
                } else {
                    ScaledScalar::ZERO
                }
            }
            Profile::PowerCap { kappa, beta, r0 } => {
                if r <= r0 || kappa == 0.0 {
                    ScaledScalar::from_f64(kappa)
                } else {
                    ScaledScalar::from_f64(kappa)
                        .mul(ScaledScalar::exp2(-beta * (r / r0).log2()))
                }
            }
        }
    }

    /// Amplitude factor; scaling it scales the profile linearly.
    pub fn kappa(&self) -> f64 {
        match *self {
            Profile::Constant { kappa }
            | Profile::RadialExp { kappa, .. }
            | Profile::Annulus { kappa, .. }
            | Profile::PowerCap { kappa, .. } => kappa,
        }
    }

    pub fn with_kappa(&self, kappa: f64) -> Profile {
        let mut p = self.clone();
        match &mut p {
            Profile::Constant { kappa: k }
            | Profile::RadialExp { kappa: k, .. }
            | Profile::Annulus { kappa: k, .. }
            | Profile::PowerCap { kappa: k, .. } => *k = kappa,
        }
        p
    }

    /// sup_r g(r).
    pub fn sup(&self) -> f64 {
        self.kappa()
    }

    /// Whether g vanishes identically beyond some radius.
    pub fn has_compact_tail(&self) -> bool {
        matches!(self, Profile::Annulus { .. })
    }

    /// Radii where g is discontinuous or changes formula; pointwise checks
    /// should sample on both sides of these.
    pub fn breakpoints(&self) -> Vec<f64> {
        match *self {
            Profile::Constant { .. } | Profile::RadialExp { .. } => vec![],
            Profile::Annulus { r0, r1, .. } => vec![r0, r1],
            Profile::PowerCap { r0, .. } => vec![r0],
        }
    }

    /// Parse CLI/config syntax: `constant:κ`, `radial-exp:κ,a`,
    /// `annulus:κ,r0,r1`, `power-cap:κ,β,r0`.
    pub fn parse(s: &str) -> Result<Profile, CoreError> {
        let (name, rest) = s.split_once(':').unwrap_or((s, ""));
        let args: Vec<f64> = if rest.is_empty() {
            vec![]
        } else {
            rest.split(',')
                .map(|t| {
                    t.trim()
                        .parse::<f64>()
                        .map_err(|_| CoreError::parameter("data", format!("bad number `{t}`")))
                })
                .collect::<Result<_, _>>()?
        };
        let profile = match (name.trim(), args.len()) {
            ("constant", 1) => Profile::Constant { kappa: args[0] },
            ("radial-exp", 2) => Profile::RadialExp {
                kappa: args[0],
                a: args[1],
            },
            ("annulus", 3) => Profile::Annulus {
                kappa: args[0],
                r0: args[1],
                r1: args[2],
            },
            ("power-cap", 3) => Profile::PowerCap {
                kappa: args[0],
                beta: args[1],
                r0: args[2],
            },
            (other, n) => {
                return Err(CoreError::parameter(
                    "data",
                    format!("unknown profile `{other}` with {n} arguments"),
                ))
            }
        };
        profile.validate()?;
        Ok(profile)
    }

    pub fn describe(&self) -> String {
        match *self {
            Profile::Constant { kappa } => format!("constant:{kappa}"),
            Profile::RadialExp { kappa, a } => format!("radial-exp:{kappa},{a}"),
            Profile::Annulus { kappa, r0, r1 } => format!("annulus:{kappa},{r0},{r1}"),
            Profile::PowerCap { kappa, beta, r0 } => format!("power-cap:{kappa},{beta},{r0}"),
        }
    }
}

/// Full initial data: radial amplitude plus a fixed complex unit direction
/// for the vector cascade. The scalar cascade ignores the direction.
#[derive(Debug, Clone)]
pub struct InitialDataSpec {
    pub profile: Profile,
    pub direction: ComplexVec,
}

impl InitialDataSpec {
    pub fn new(profile: Profile, direction: ComplexVec) -> Result<Self, CoreError> {
        profile.validate()?;
        let direction = direction.normalized()?;
        Ok(InitialDataSpec { profile, direction })
    }

    /// Data with direction e₁ in dimension `dim`.
    pub fn along_first_axis(profile: Profile, dim: usize) -> Result<Self, CoreError> {
        let mut coords = vec![Complex64::new(0.0, 0.0); dim];
        coords[0] = Complex64::new(1.0, 0.0);
        InitialDataSpec::new(profile, ComplexVec::new(coords)?)
    }

    pub fn dim(&self) -> usize {
        self.direction.dim()
    }

    /// |χ₀|(ξ) = g(|ξ|).
    #[inline]
    pub fn amplitude(&self, r: f64) -> f64 {
        self.profile.eval(r)
    }
}

/// Scalar transforms admissible for the generalized order audits:
/// submultiplicative, convex, f(0) = 0, nondecreasing on [0, ∞).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "map", rename_all = "kebab-case")]
pub enum ScalarMap {
    /// x ↦ x^α with α ≥ 1 (multiplicative, so the transformed cascade is
    /// exactly the α-th power of the base one).
    Power { alpha: f64 },
    /// x ↦ x² ln(x² + e²), the canonical strictly submultiplicative member.
    PowerLog,
}

impl ScalarMap {
    pub fn validate(&self) -> Result<(), CoreError> {
        if let ScalarMap::Power { alpha } = self {
            if !(*alpha >= 1.0) || !alpha.is_finite() {
                return Err(CoreError::parameter("alpha", "power maps need α ≥ 1"));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        match *self {
            ScalarMap::Power { alpha } => x.powf(alpha),
            ScalarMap::PowerLog => {
                let x2 = x * x;
                x2 * (x2 + E2).ln()
            }
        }
    }

    /// f applied to a scaled value whose magnitude may be far outside the
    /// double range. Powers act exactly in the exponent algebra; the
    /// logarithmic map switches to ln(y²) once y² no longer fits in a
    /// double (the e² shift is then below resolution anyway).
    pub fn apply_scaled(&self, y: crate::scaled::ScaledScalar) -> crate::scaled::ScaledScalar {
        use crate::scaled::ScaledScalar;
        match *self {
            ScalarMap::Power { alpha } => y.powf(alpha),
            ScalarMap::PowerLog => {
                if y.is_zero() {
                    return ScaledScalar::ZERO;
                }
                let y2 = y.mul(y);
                let direct = y2.to_f64();
                if direct.is_finite() && direct > 1e-300 {
                    ScaledScalar::from_f64(direct * (direct + E2).ln())
                } else if y2.log2() > 0.0 {
                    // Huge: ln(y² + e²) ≈ ln(y²) = log₂(y²)·ln 2.
                    y2.mul(ScaledScalar::from_f64(
                        y2.log2() * std::f64::consts::LN_2,
                    ))
                } else {
                    // Tiny: ln(y² + e²) ≈ ln(e²) = 2.
                    y2.mul(ScaledScalar::from_f64(2.0))
                }
            }
        }
    }

    /// f'(x), used for delta-method error propagation.
    pub fn derivative(&self, x: f64) -> f64 {
        match *self {
            ScalarMap::Power { alpha } => alpha * x.powf(alpha - 1.0),
            ScalarMap::PowerLog => {
                let x2 = x * x;
                2.0 * x * (x2 + E2).ln() + 2.0 * x * x2 / (x2 + E2)
            }
        }
    }

    /// Multiplicative maps satisfy f(ab) = f(a)f(b) exactly.
    pub fn is_multiplicative(&self) -> bool {
        matches!(self, ScalarMap::Power { .. })
    }

    pub fn parse(s: &str) -> Result<ScalarMap, CoreError> {
        let m = match s.trim() {
            "x2" | "square" => ScalarMap::Power { alpha: 2.0 },
            "x3" | "cube" => ScalarMap::Power { alpha: 3.0 },
            "x2log" | "x2-log" => ScalarMap::PowerLog,
            other => {
                if let Some(a) = other.strip_prefix("pow:") {
                    let alpha = a.parse::<f64>().map_err(|_| {
                        CoreError::parameter("transform", format!("bad exponent `{a}`"))
                    })?;
                    ScalarMap::Power { alpha }
                } else {
                    return Err(CoreError::parameter(
                        "transform",
                        format!("unknown transform `{other}` (try x2, x3, x2log, pow:α)"),
                    ));
                }
            }
        };
        m.validate()?;
        Ok(m)
    }

    pub fn describe(&self) -> String {
        match *self {
            ScalarMap::Power { alpha } => format!("pow:{alpha}"),
            ScalarMap::PowerLog => "x2log".into(),
        }
    }
}

const E2: f64 = std::f64::consts::E * std::f64::consts::E;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profiles_evaluate() {
        let c = Profile::parse("constant:0.5").unwrap();
        assert_eq!(c.eval(3.0), 0.5);
        let e = Profile::parse("radial-exp:2,1.5").unwrap();
        assert!((e.eval(2.0) - 2.0 * (-3.0f64).exp()).abs() < 1e-15);
        let a = Profile::parse("annulus:1,1,2").unwrap();
        assert_eq!(a.eval(0.5), 0.0);
        assert_eq!(a.eval(1.5), 1.0);
        assert_eq!(a.eval(2.5), 0.0);
        let p = Profile::parse("power-cap:1,2,1").unwrap();
        assert_eq!(p.eval(0.5), 1.0);
        assert!((p.eval(2.0) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn profile_validation_rejects_bad_parameters() {
        assert!(Profile::parse("constant:-1").is_err());
        assert!(Profile::parse("radial-exp:1,0").is_err());
        assert!(Profile::parse("annulus:1,2,1").is_err());
        assert!(Profile::parse("power-cap:1,0,1").is_err());
        assert!(Profile::parse("mystery:1").is_err());
    }

    #[test]
    fn scalar_maps_behave() {
        let sq = ScalarMap::parse("x2").unwrap();
        assert_eq!(sq.apply(3.0), 9.0);
        assert!(sq.is_multiplicative());
        let pl = ScalarMap::parse("x2log").unwrap();
        assert!(!pl.is_multiplicative());
        assert_eq!(pl.apply(0.0), 0.0);
        // Submultiplicativity at a few points.
        for &(a, b) in &[(0.5, 0.5), (2.0, 3.0), (0.1, 7.0)] {
            assert!(pl.apply(a * b) <= pl.apply(a) * pl.apply(b) * (1.0 + 1e-12));
        }
        assert!(ScalarMap::parse("pow:0.5").is_err());
    }

    #[test]
    fn direction_is_normalized() {
        let data = InitialDataSpec::new(
            Profile::Constant { kappa: 1.0 },
            ComplexVec::from_real(&[3.0, 4.0, 0.0]),
        )
        .unwrap();
        assert!((data.direction.norm() - 1.0).abs() < 1e-15);
    }
}
