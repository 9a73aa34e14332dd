//! Mantissa × 2^exponent arithmetic for cascade values.
//!
//! Tree values are products over up to thousands of factors, so plain f64
//! under- or overflows long before the estimators are done with a value.
//! Products here carry an explicit base-2 integer exponent that composes
//! additively; mantissas are renormalized into [1, 2) after every
//! operation, and all rescalings are exact powers of two.

use num_complex::Complex64;
use smallvec::SmallVec;

use crate::freq::{circle_dot, ComplexVec, Frequency};

/// Exact power of two for exponents in the normal f64 range.
#[inline]
fn exp2i(e: i64) -> f64 {
    debug_assert!((-1022..=1023).contains(&e));
    f64::from_bits(((e + 1023) as u64) << 52)
}

/// Nonnegative scalar m·2^e with m ∈ [1, 2) (or exactly zero).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledScalar {
    m: f64,
    e: i64,
}

impl ScaledScalar {
    pub const ZERO: ScaledScalar = ScaledScalar { m: 0.0, e: 0 };
    pub const ONE: ScaledScalar = ScaledScalar { m: 1.0, e: 0 };

    pub fn from_f64(x: f64) -> ScaledScalar {
        assert!(x >= 0.0 && x.is_finite(), "scaled scalars are finite, ≥ 0");
        if x == 0.0 {
            return ScaledScalar::ZERO;
        }
        // Pull the binary exponent out of the bit pattern; subnormals are
        // renormalized by an exact 2^64 bump first.
        let (x, base) = if x < f64::MIN_POSITIVE {
            (x * exp2i(64), -64i64)
        } else {
            (x, 0i64)
        };
        let bits = x.to_bits();
        let raw_exp = ((bits >> 52) & 0x7ff) as i64 - 1023;
        ScaledScalar {
            m: x * exp2i(-raw_exp),
            e: raw_exp + base,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.m == 0.0
    }

    pub fn mantissa(&self) -> f64 {
        self.m
    }

    pub fn exponent(&self) -> i64 {
        self.e
    }

    pub fn mul(self, other: ScaledScalar) -> ScaledScalar {
        if self.is_zero() || other.is_zero() {
            return ScaledScalar::ZERO;
        }
        let mut m = self.m * other.m; // in [1, 4)
        let mut e = self.e + other.e;
        if m >= 2.0 {
            m *= 0.5;
            e += 1;
        }
        ScaledScalar { m, e }
    }

    /// log₂ of the value; -∞ for zero.
    pub fn log2(&self) -> f64 {
        if self.is_zero() {
            f64::NEG_INFINITY
        } else {
            self.e as f64 + self.m.log2()
        }
    }

    /// 2^l, however large or small; the inverse of [`log2`]. Lets
    /// amplitudes like e^{-a r} be formed without ever passing through
    /// (and underflowing) a plain double. Exponents below the i64 range
    /// collapse to zero; above it they are a genuine overflow.
    pub fn exp2(l: f64) -> ScaledScalar {
        assert!(!l.is_nan(), "exp2 exponent must not be NaN");
        if l < -4.0e18 {
            return ScaledScalar::ZERO;
        }
        assert!(l < 4.0e18, "exp2 exponent {l} exceeds the scaled range");
        let e = l.floor();
        ScaledScalar {
            m: (l - e).exp2(),
            e: e as i64,
        }
    }

    /// Value^α for α > 0 (zero stays zero).
    pub fn powf(self, alpha: f64) -> ScaledScalar {
        if self.is_zero() {
            return ScaledScalar::ZERO;
        }
        ScaledScalar::exp2(alpha * self.log2())
    }

    /// Collapse to f64, saturating to ±∞ / 0 outside the representable range.
    pub fn to_f64(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        if self.e > 1023 {
            return f64::INFINITY;
        }
        if self.e < -1070 {
            return 0.0;
        }
        if self.e >= -1022 {
            self.m * exp2i(self.e)
        } else {
            // Subnormal landing zone: split the scaling.
            self.m * exp2i(-511) * exp2i(self.e + 511)
        }
    }

    /// self ≤ other·(1 + slack), comparing in log space so that huge and
    /// tiny values are handled alike.
    pub fn le_with_slack(&self, other: &ScaledScalar, slack: f64) -> bool {
        if self.is_zero() {
            return true;
        }
        if other.is_zero() {
            return false;
        }
        self.log2() <= other.log2() + (1.0 + slack).log2()
    }

    /// Relative difference |self - other| / max(|other|, tiny) in a form
    /// that is meaningful across the whole exponent range.
    pub fn rel_diff(&self, other: &ScaledScalar) -> f64 {
        if self.is_zero() && other.is_zero() {
            return 0.0;
        }
        if self.is_zero() || other.is_zero() {
            return f64::INFINITY;
        }
        let d = self.log2() - other.log2();
        (d.abs().min(60.0).exp2() - 1.0).abs()
    }
}

type ComplexCoords = SmallVec<[Complex64; 4]>;

/// Complex vector v·2^e with max component magnitude kept near [1, 2).
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledVec {
    v: ComplexCoords,
    e: i64,
}

impl ScaledVec {
    pub fn zero(dim: usize) -> ScaledVec {
        ScaledVec {
            v: (0..dim).map(|_| Complex64::new(0.0, 0.0)).collect(),
            e: 0,
        }
    }

    pub fn from_components(v: &ComplexVec) -> ScaledVec {
        let mut out = ScaledVec {
            v: v.components().iter().copied().collect(),
            e: 0,
        };
        out.renorm();
        out
    }

    fn max_abs(&self) -> f64 {
        self.v
            .iter()
            .map(|c| c.re.abs().max(c.im.abs()))
            .fold(0.0, f64::max)
    }

    fn renorm(&mut self) {
        let m = self.max_abs();
        if m == 0.0 {
            self.e = 0;
            return;
        }
        let bits = m.to_bits();
        let raw = ((bits >> 52) & 0x7ff) as i64;
        // Subnormal mantissa: force everything up by an exact factor first.
        if raw == 0 {
            let f = exp2i(200);
            for c in self.v.iter_mut() {
                *c *= f;
            }
            self.e -= 200;
            return self.renorm();
        }
        let ex = raw - 1023;
        if ex != 0 {
            let f = exp2i(-ex);
            for c in self.v.iter_mut() {
                *c *= f;
            }
            self.e += ex;
        }
    }

    pub fn dim(&self) -> usize {
        self.v.len()
    }

    pub fn is_zero(&self) -> bool {
        self.max_abs() == 0.0
    }

    pub fn exponent(&self) -> i64 {
        self.e
    }

    pub fn mantissa(&self) -> ComplexVec {
        ComplexVec::new(self.v.iter().copied()).expect("mantissa is finite")
    }

    /// Euclidean norm as a scaled scalar.
    pub fn norm(&self) -> ScaledScalar {
        let n = self
            .v
            .iter()
            .map(|c| c.norm_sqr())
            .sum::<f64>()
            .sqrt();
        if n == 0.0 {
            return ScaledScalar::ZERO;
        }
        let mut s = ScaledScalar::from_f64(n);
        s.e += self.e;
        s
    }

    /// Projected product of two scaled vectors; exponents add.
    pub fn circle_dot(xi: &Frequency, a: &ScaledVec, b: &ScaledVec) -> ScaledVec {
        let av = ComplexVec::new(a.v.iter().copied()).expect("finite");
        let bv = ComplexVec::new(b.v.iter().copied()).expect("finite");
        let p = circle_dot(xi, &av, &bv);
        let mut out = ScaledVec {
            v: p.components().iter().copied().collect(),
            e: a.e + b.e,
        };
        out.renorm();
        out
    }

    pub fn scale(&mut self, factor: ScaledScalar) {
        if factor.is_zero() {
            *self = ScaledVec::zero(self.v.len());
            return;
        }
        for c in self.v.iter_mut() {
            *c *= factor.m;
        }
        self.e += factor.e;
        self.renorm();
    }

    /// Collapse each component to f64 (re/im interleaved by caller's choice).
    pub fn to_components_f64(&self) -> ComplexCoords {
        if self.e == 0 {
            return self.v.clone();
        }
        let f = if (-900..=900).contains(&self.e) {
            exp2i(self.e)
        } else if self.e > 900 {
            f64::INFINITY
        } else {
            0.0
        };
        self.v.iter().map(|c| c * f).collect()
    }
}
