//! Simulation and analysis of two-color Hong-Ou-Mandel interference, where a
//! pumped frequency converter plays the role of the beam splitter.
//!
//! The numerical modules are generic over [`Scalar`] (`f32`/`f64`); the
//! aliases below fix the scalar to `f64`, which is what the CLI and the
//! quoted tolerances use.
//!
//! * [`fockcore`]: two-mode Fock-space beam splitter algebra.
//! * [`spectra`]: frequency grids, spectral amplitude models, FWHM.
//! * [`converter`]: transition-probability profile and pump calibration.
//! * [`interference`]: coincidence dip and anti-dips versus delay, with an
//!   independent multimode Fock oracle.
//! * [`tagsim`]: synthetic detector time-tags, correlation, peak analysis.
//! * [`fitkit`]: damped least-squares Gaussian dip fitting.

// `!(x > 0)` is used on purpose: it also rejects NaN. Small matrix loops
// stay indexed to read like the algebra.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod converter;
pub mod error;
pub mod fitkit;
pub mod fockcore;
pub mod interference;
pub mod scalar;
pub mod spectra;
pub mod tagsim;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type BeamSplitter = fockcore::BeamSplitterMatrix<f64>;
pub type FockState = fockcore::TwoModeFockState<f64>;
pub type Grid = spectra::FrequencyGrid<f64>;
pub type Spectrum = spectra::SpectralAmplitude<f64>;
pub type SpectrumModel = spectra::SpectralModel<f64>;
pub type Converter = converter::ConverterModel<f64>;
pub type Calibration = converter::PumpCalibration<f64>;
pub type Experiment = interference::ExperimentModel<f64>;
pub type Scan = interference::DelayScan<f64>;
pub type DipFit = fitkit::GaussianDipFit<f64>;
