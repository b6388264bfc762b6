//! Simulation and verification toolkit for the large-scale wavelet behavior of
//! nonlinear transforms of long-memory Gaussian sequences.
//!
//! The crate synthesizes stationary Gaussian inputs with a prescribed fractional
//! spectral density, pushes them through Hermite-type nonlinearities, computes
//! non-decimated wavelet coefficients with compliant filter banks, evaluates the
//! exact second-order structure of the large-scale limit field by singular
//! quadrature, and confirms the predicted variance scaling by Monte Carlo.
//!
//! Modules map onto the pipeline:
//!
//! - [`spectra`]: spectral densities, autocovariances, periodic self-convolution
//!   and the long/short-memory classification of Hermite transforms.
//! - [`hermite`]: Hermite polynomial algebra, chaos coefficients and rank of a
//!   nonlinear filter, subordination of series.
//! - [`synth`]: exact circulant-embedding synthesis and K-fold integration.
//! - [`filters`]: wavelet filter banks, vanishing moments, the difference-factor
//!   decomposition and the rescaled limit transfer function.
//! - [`transform`]: wavelet coefficients by both equivalent routes.
//! - [`limit`]: covariances of the limit field via one-dimensional reduction of
//!   the chaos integrals.
//! - [`mc`]: Monte Carlo scaling experiments and the log-scale regression
//!   estimator of the memory exponent.
//! - [`config`]: run configuration for the command-line front end.

pub mod config;
pub mod error;
pub mod filters;
pub mod hermite;
pub mod limit;
pub mod mc;
pub mod quad;
pub mod spectra;
pub mod synth;
pub mod transform;

pub use error::{Error, Result};
