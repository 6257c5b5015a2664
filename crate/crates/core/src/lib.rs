//! Design of Doppler-resilient complex sequences with a low weighted peak
//! sidelobe level (WPSL) of the local ambiguity function, subject to an
//! energy constraint, a PAPR bound and spectral stopband caps.
//!
//! Two optimizers are provided:
//!
//! - [`alamm`]: augmented-Lagrangian majorization-minimization with
//!   SQUAREM acceleration and a closed-form PAPR projection. Scales to
//!   hundreds of samples.
//! - [`amsdr`]: alternating minimization over a biconvex semidefinite
//!   relaxation with a pluggable conic backend. Desk scale only.
//!
//! Baseline generators (chirp, random and filtered polyphase) live in
//! [`waveform`]; metrics and dense test oracles in [`ambiguity`].

pub mod alamm;
pub mod ambiguity;
pub mod amsdr;
pub mod error;
pub mod io;
pub mod numerics;
pub mod waveform;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use waveform::{DesignConfig, Sequence, SpectralMask, ZoneOfOperation};
