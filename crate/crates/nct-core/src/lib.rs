//! Transport in media where the distance to the next collision depends on
//! the direction of flight and the path length since the last event.
//!
//! The crate provides four views of the same physics and the machinery to
//! check them against each other:
//!
//! * [`stats`] — free-path statistics per direction: survival, the
//!   distance-to-collision density and its inverse map back to the cross
//!   section, the equilibrium path-length spectrum, moments, and sampling.
//! * [`mc`] — an analog Monte Carlo simulator with track-length flux and
//!   collision-density tallies, reproducible for a fixed seed regardless of
//!   worker count.
//! * [`integral`] — a deterministic solver for the isotropic-scattering
//!   integral form: Picard iteration on the collision-rate density, then
//!   flux reconstruction.
//! * [`diffusion`] — the anisotropic diffusion limit: the vector Fredholm
//!   equation for tau(Omega), the six diffusion coefficients, a finite
//!   difference solve with mixed derivatives, and the leading-order angular
//!   flux.
//!
//! With a constant cross section every piece collapses to classical
//! transport, which the test suites exercise as an invariant.
//!
//! Compiled with the `parallel` feature (default) the hot loops run on
//! rayon; without it they fall back to sequential code. Either way results
//! are bitwise identical for identical inputs.

pub mod diffusion;
pub mod error;
pub(crate) mod exec;
pub mod geom;
pub mod integral;
pub mod mc;
pub mod numeric;
pub mod quadrature;
pub mod scatter;
pub mod stats;
pub mod xsection;

mod grid;

pub use error::{Result, TransportError};
pub use geom::Direction;
pub use grid::{Boundary, SpatialGrid};
pub use quadrature::AngularQuadrature;
