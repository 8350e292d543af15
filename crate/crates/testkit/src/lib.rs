//! Brute-force oracles for the gpcsolve test suites.
//!
//! Everything in this crate is deliberately independent of the production
//! code paths: integrals are done by adaptive quadrature instead of closed
//! forms, circuits by dense 8x8 matrix products instead of in-place bit
//! kernels, and density-matrix elements by literal second-quantized operator
//! application over determinant bitmasks. The point is that a bug in the
//! main crate and a bug here would have to be two *different* bugs that
//! agree numerically, which is how these serve as oracles.

pub mod quad;
pub mod gates;
pub mod secondq;
