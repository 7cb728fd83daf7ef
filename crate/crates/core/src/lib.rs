//! Recovery of spike trains on the torus from short-time Fourier
//! measurements by total-variation minimization, together with numerical
//! verification of the dual certificates behind exact recovery.

pub mod bench;
pub mod certificate;
pub mod error;
pub mod gabor;
pub mod io;
pub mod linalg;
pub mod measure;
pub mod recover;
pub mod sdpsolve;

pub use error::{Error, Result};
