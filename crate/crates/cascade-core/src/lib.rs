//! Monte Carlo engine and deterministic cross-checks for stochastic branching
//! cascades attached to the Fourier-transformed Navier-Stokes equations and
//! their scalar majorant.
//!
//! The pieces fit together like this:
//!
//! * [`freq`] — frequency vectors, complex amplitude vectors, and the
//!   projected bilinear product that encodes the Leray projection in
//!   frequency space.
//! * [`kernels`] — the two built-in majorizing kernels in dimension three,
//!   their branching densities, exact samplers, and validation harnesses
//!   (goodness of fit, convolution identity).
//! * [`data`] — radial initial-data profiles and the scalar transforms used
//!   by the order audits.
//! * [`cascade`] — the tree simulator itself: minimal, thinned, coupled and
//!   multi-valuation walks over a common random field.
//! * [`estimators`] — batch Monte Carlo estimates, depth sweeps, z-score
//!   comparisons and the pathwise order audits.
//! * [`picard`] — a deterministic radial fixed-point iteration on a grid,
//!   used as an independent oracle for the scalar cascade.
//! * [`herz`] — weighted shell norms, data normalization and smallness
//!   thresholds for the fixed-point smallness criterion.
//!
//! Everything is deterministic given a seed: randomness is keyed to tree
//! nodes, not to draw order, so coupled experiments (different horizons,
//! depth caps, or valuations) reuse identical clocks and frequencies.

pub mod cascade;
pub mod data;
pub mod error;
pub mod estimators;
pub mod freq;
pub mod herz;
pub mod kernels;
pub mod picard;
pub mod quad;
pub mod rng;
pub mod scaled;

pub use error::CoreError;
