//! Numerical core of the perturbed-KdV averaging laboratory.
//!
//! The crate is `no_std` (it needs `alloc`) and contains only pure
//! computation: the real trigonometric spectral layer, the integrating-factor
//! KdV integrator, the linearized Birkhoff map with a Hill-discriminant action
//! backend, the angle-averaging engine and admissible Gaussian measures on the
//! Birkhoff coordinates. Configuration, files, parallel ensembles and the
//! command line live in the `kdvlab` crate.
//!
//! Conventions used throughout:
//!
//! * the circle is `[0, 1)`; the real basis is `e_s = √2 cos(2πsx)` for `s > 0`
//!   and `e_s = √2 sin(2πsx)` for `s < 0`;
//! * the pair `(u_s, u_{-s})` of mode `s > 0` is identified with the complex
//!   number `u_s + i u_{-s}`; the linear KdV flow rotates it counterclockwise
//!   with angular speed `(2πs)³`;
//! * all weights use `2π|s|`, so that `‖u‖_p` is the homogeneous Sobolev norm.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod averaging;
pub mod birkhoff;
mod error;
pub mod fft;
pub mod flow;
pub mod measure;
pub mod quad;
pub mod rng;
pub mod roots;
pub mod spectral;

pub use error::{Error, Result};

pub use averaging::{
    ActionBackend, ActionFunctional, ActionRate, AveragedTrajectory, AveragingConfig, Estimate,
    QuadratureScheme,
};
pub use birkhoff::{ActionVector, AngleVector, BirkhoffState, FrequencyVector};
pub use flow::{FlowParams, PerturbationSpec, Trajectory};
pub use measure::{DensityRecord, MeasureSpec, SigmaRule};
pub use spectral::{SobolevIndex, SpectralField};

/// `2π`.
pub const TAU: f64 = core::f64::consts::TAU;
