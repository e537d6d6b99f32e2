//! Monte Carlo construction, evolution and statistical verification of
//! infinite-energy solutions to the spatially homogeneous inelastic Boltzmann
//! equation for Maxwell molecules in dimension `d >= 3`.
//!
//! The crate is organised bottom-up:
//!
//! * [`rotations`]: elementary rotations, Haar sampling on SO(d), sphere sampling.
//! * [`collision`]: cross sections, scattering angles, the Fourier-side kernel
//!   `(r-, r+, R-, R+)` and the physical velocity collision rule.
//! * [`spectral`]: the convex function `S(s)`, the exponent `alpha`, stable-law constants.
//! * [`cascade`]: McKean-tree weight/rotation arrays and the fixed point `M_inf`.
//! * [`stablelaws`]: stable samplers, domain-of-attraction test data, stationary mixtures.
//! * [`evolution`]: time evolution through the Wild-tree route and a Nanbu DSMC route.
//! * [`diagnostics`]: empirical characteristic functions, tail estimators, KS tests.
//! * [`acceptance`]: the verification suite shared by tests and the `selfcheck` command.

pub mod acceptance;
pub mod cascade;
pub mod collision;
pub mod diagnostics;
mod error;
pub mod evolution;
pub mod quadrature;
mod rng;
pub mod rotations;
pub mod spectral;
pub mod stablelaws;

pub use error::{Error, Result};
pub use rng::RandomStream;
