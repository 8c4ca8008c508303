//! Recovery of spike trains from band-limited short-time Fourier
//! measurements by total-variation minimization.
//!
//! The crate is organized bottom-up:
//!
//! - [`kernels`] and [`measure`]: the Gaussian window, its Fourier
//!   coefficients and autocorrelation, the certificate kernels, and the
//!   discrete-measure type.
//! - [`stft`]: the forward STFT operator on the torus, its adjoint, and the
//!   reduction of STFT data to Fourier moments.
//! - [`certificate`]: explicit interpolating dual certificates and their
//!   verification.
//! - [`solver`]: the dual program, support extraction, amplitude fitting and
//!   duality diagnostics.
//! - [`bench`]: the Monte Carlo success-rate harness.

pub mod bench;
pub mod certificate;
pub mod error;
pub mod io;
pub mod kernels;
pub mod measure;
pub mod solver;
pub mod stft;
pub mod trigpoly;

pub use error::{Error, Result};
pub use kernels::{KernelJet, WindowParams};
pub use measure::{DiscreteMeasure, Domain};
pub use stft::{MomentVector, StftMeasurements};
pub use trigpoly::TrigPoly;
