//! Simulation toolkit for snapshot Hadamard-transform spectrometry.
//!
//! A cyclic Hadamard-S mask codes the entrance aperture. A dispersive camera
//! records the overlapped spectra in one shot and a second, non-dispersive
//! camera records the coded aperture itself. The non-uniform aperture
//! illumination turns the binary S-matrix into a *sub*-S-matrix, which the
//! non-dispersive image lets us calibrate and invert.
//!
//! Modules, bottom-up:
//!
//! - [`codes`]: S-matrix construction, validation and closed-form inverse.
//! - [`scene`]: spectra, aperture intensity fields, the sub-S decomposition
//!   and the shift embedding of overlapped spectra.
//! - [`forward`]: slit, HTS, snapshot and MMS measurement models.
//! - [`recon`]: calibration, linear decoding, NNLS decoding, row extraction.
//! - [`analysis`]: SNR metrics, summaries and the sub-S SNR lower bound.
//! - [`harness`]: Monte Carlo sweeps, configuration and report files.

// Validation is written as `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod codes;
pub mod error;
pub mod forward;
pub mod harness;
pub mod io;
pub mod recon;
pub mod scene;
pub mod seed;

pub use analysis::{
    eval_bound, snr_db, summarize, theoretical_multiplex_gain, BoundReport, Method, RowTag,
    SnrSample, Summary,
};
pub use codes::{build_s_matrix, s_inverse, validate_s_matrix, SMatrix, ValidationReport};
pub use error::{Error, Result};
pub use forward::{
    add_noise, measure_hts, measure_mms, measure_slit, measure_snapshot, Architecture, Measurement,
    NoiseSpec, SnapshotFrame,
};
pub use harness::{emit_report, run_sweep, run_trial, ExperimentConfig, SweepResult};
pub use recon::{
    calibrate_sub_s, consensus_spectrum, decode_inverse, decode_nnls, shift_extract,
    EmbeddedEstimate, RowSpectra,
};
pub use scene::{
    load_spectrum, make_sub_s, sample_intensity, shift_embed, synth_spectrum, EmbeddedScene,
    IntensityField, Spectrum, SpectrumKind, SubSMatrix, SynthParams,
};

/// Dense real matrix used throughout the crate.
pub type Matrix = nalgebra::DMatrix<f64>;
