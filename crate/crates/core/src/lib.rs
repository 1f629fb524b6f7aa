//! Smooth-maximum and Poisson-kernel tests of uniformity on the hypersphere `S^q`.
//!
//! The crate is organised bottom-up:
//!
//! * [`specfun`]: polynomials, scaled Bessel functions, sphere constants, quadrature.
//! * [`kernels`]: the two kernels and their Gegenbauer expansions.
//! * [`statistic`]: test statistics computed from a [`Sample`].
//! * [`nulldist`]: null moments, the weighted chi-square limit, gamma match, Monte Carlo tables.
//! * [`altdist`]: rotationally symmetric alternatives, moments under them, oracle parameters.
//! * [`sampling`]: random generation on the sphere.
//! * [`kfold`]: the K-fold test with harmonic-mean p-value aggregation.

pub mod altdist;
pub mod error;
pub mod grid;
pub mod kernels;
pub mod kfold;
pub mod nulldist;
pub mod rng;
pub mod sampling;
pub mod specfun;
pub mod statistic;

pub use error::{Error, Result};
pub use kernels::{Family, KernelSpec};
pub use specfun::Dimension;
pub use statistic::Sample;
