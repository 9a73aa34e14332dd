//! Frequency-space vector algebra.
//!
//! The central operation is the projected bilinear product
//!
//! ```text
//! a ⊙_ξ b = -i (e_ξ · b) π_ξ⊥ a,      e_ξ = ξ/|ξ|,
//! ```
//!
//! where `π_ξ⊥ a = a - (e_ξ·a) e_ξ` removes the component along ξ and the
//! dot products are unconjugated. The product is what the Leray-projected
//! quadratic nonlinearity of the Navier-Stokes system looks like after a
//! Fourier transform; all we ever need from it here is bilinearity, the
//! bound `|a ⊙_ξ b| ≤ |a||b|`, and orthogonality of the result to ξ.

use num_complex::Complex64;
use smallvec::SmallVec;

use crate::error::CoreError;

type RealCoords = SmallVec<[f64; 4]>;
type ComplexCoords = SmallVec<[Complex64; 4]>;

/// Nonzero real frequency vector, dimension ≥ 3 fixed per run.
#[derive(Debug, Clone, PartialEq)]
pub struct Frequency {
    coords: RealCoords,
}

impl Frequency {
    pub fn new(coords: impl IntoIterator<Item = f64>) -> Result<Self, CoreError> {
        let coords: RealCoords = coords.into_iter().collect();
        if coords.len() < 3 {
            return Err(CoreError::Frequency(format!(
                "dimension {} < 3",
                coords.len()
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(CoreError::Frequency("non-finite coordinate".into()));
        }
        if coords.iter().all(|&c| c == 0.0) {
            return Err(CoreError::Frequency("zero vector excluded".into()));
        }
        Ok(Frequency { coords })
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn norm(&self) -> f64 {
        self.coords.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    /// e_ξ = ξ/|ξ|. Well defined because zero frequencies are excluded at
    /// construction.
    pub fn unit_direction(&self) -> RealCoords {
        let n = self.norm();
        self.coords.iter().map(|c| c / n).collect()
    }

    /// ξ - η, failing when the difference is exactly zero (degenerate branch).
    pub fn sub(&self, other: &Frequency) -> Result<Frequency, CoreError> {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch");
        let coords: RealCoords = self
            .coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| a - b)
            .collect();
        if coords.iter().all(|&c| c == 0.0) {
            return Err(CoreError::Frequency("zero difference".into()));
        }
        Ok(Frequency { coords })
    }

    pub fn scale(&self, lambda: f64) -> Result<Frequency, CoreError> {
        Frequency::new(self.coords.iter().map(|c| c * lambda))
    }
}

/// Complex amplitude vector of the same dimension as the frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexVec {
    components: ComplexCoords,
}

impl ComplexVec {
    pub fn new(components: impl IntoIterator<Item = Complex64>) -> Result<Self, CoreError> {
        let components: ComplexCoords = components.into_iter().collect();
        if components.len() < 3 {
            return Err(CoreError::Frequency(format!(
                "dimension {} < 3",
                components.len()
            )));
        }
        if components.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(CoreError::Frequency("non-finite component".into()));
        }
        Ok(ComplexVec { components })
    }

    pub fn from_real(coords: &[f64]) -> Self {
        ComplexVec {
            components: coords.iter().map(|&c| Complex64::new(c, 0.0)).collect(),
        }
    }

    pub fn zero(dim: usize) -> Self {
        ComplexVec {
            components: (0..dim).map(|_| Complex64::new(0.0, 0.0)).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[Complex64] {
        &self.components
    }

    /// Euclidean norm (|a|² = Σ |a_j|²).
    pub fn norm(&self) -> f64 {
        self.components
            .iter()
            .map(|c| c.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&self, lambda: f64) -> ComplexVec {
        ComplexVec {
            components: self.components.iter().map(|c| c * lambda).collect(),
        }
    }

    /// Normalize to unit Euclidean norm.
    pub fn normalized(&self) -> Result<ComplexVec, CoreError> {
        let n = self.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(CoreError::Frequency("cannot normalize zero vector".into()));
        }
        Ok(self.scale(1.0 / n))
    }
}

/// Unconjugated dot product of a real unit vector with a complex vector.
fn dot_real_complex(e: &[f64], a: &[Complex64]) -> Complex64 {
    e.iter().zip(a).map(|(&ei, &ai)| ai * ei).sum()
}

/// π_ξ⊥ a = a - (e_ξ·a) e_ξ, the projection of `a` onto the plane ⊥ ξ.
/// The dot product is unconjugated, so the projection is complex-linear.
pub fn project_perp(xi: &Frequency, a: &ComplexVec) -> ComplexVec {
    assert_eq!(xi.dim(), a.dim(), "dimension mismatch");
    let e = xi.unit_direction();
    let ea = dot_real_complex(&e, a.components());
    let components: ComplexCoords = a
        .components()
        .iter()
        .zip(&e)
        .map(|(&ai, &ei)| ai - ea * ei)
        .collect();
    ComplexVec { components }
}

/// The projected product a ⊙_ξ b = -i (e_ξ·b) π_ξ⊥ a.
///
/// Satisfies |a ⊙_ξ b| ≤ |a||b| and e_ξ · (a ⊙_ξ b) = 0; it is neither
/// commutative nor associative.
pub fn circle_dot(xi: &Frequency, a: &ComplexVec, b: &ComplexVec) -> ComplexVec {
    assert_eq!(xi.dim(), a.dim(), "dimension mismatch");
    assert_eq!(xi.dim(), b.dim(), "dimension mismatch");
    let e = xi.unit_direction();
    let eb = dot_real_complex(&e, b.components());
    let ea = dot_real_complex(&e, a.components());
    // -i (e·b) (a - (e·a) e), fused into one pass.
    let factor = Complex64::new(0.0, -1.0) * eb;
    let components: ComplexCoords = a
        .components()
        .iter()
        .zip(&e)
        .map(|(&ai, &ei)| factor * (ai - ea * ei))
        .collect();
    ComplexVec { components }
}
