//! Measurement models for the slit, HTS, snapshot and MMS architectures.
//!
//! All noise is additive white Gaussian detector noise applied after
//! multiplexing. Every draw is a pure function of the [`NoiseSpec`] seed.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::codes::SMatrix;
use crate::scene::{EmbeddedScene, Spectrum, SubSMatrix};
use crate::{seed, Error, Matrix, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub sigma: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(sigma: f64, seed: u64) -> Result<Self> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "noise sigma must be finite and >= 0, got {sigma}"
            )));
        }
        Ok(NoiseSpec { sigma, seed })
    }

    pub fn noiseless() -> Self {
        NoiseSpec {
            sigma: 0.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    Slit,
    Hts,
    SnapshotDispersive,
}

/// Detector data. Slit measurements are `1×m`; HTS and dispersive snapshot
/// measurements are `n×(n+m−1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub data: Matrix,
    pub architecture: Architecture,
}

impl Measurement {
    pub fn shape(&self) -> (usize, usize) {
        self.data.shape()
    }
}

/// One exposure of the dual-path snapshot instrument.
#[derive(Debug, Clone)]
pub struct SnapshotFrame {
    pub dispersive: Measurement,
    /// Noisy image of the unnormalized coded aperture `S∘I`.
    pub non_dispersive: Matrix,
    /// The code actually applied. Oracle use only; decoders must calibrate.
    pub truth: SubSMatrix,
}

/// `signal + e`, `e` i.i.d. `N(0, σ²)` drawn row-major from one stream.
pub fn add_noise(signal: &Matrix, noise: &NoiseSpec) -> Matrix {
    let mut out = signal.clone();
    if noise.sigma == 0.0 {
        return out;
    }
    let mut rng = seed::rng(noise.seed);
    let (rows, cols) = out.shape();
    for i in 0..rows {
        for j in 0..cols {
            let e: f64 = StandardNormal.sample(&mut rng);
            out[(i, j)] += noise.sigma * e;
        }
    }
    out
}

/// Direct single-shot measurement of every spectral channel.
pub fn measure_slit(f: &Spectrum, noise: &NoiseSpec) -> Measurement {
    let signal = Matrix::from_row_slice(1, f.len(), f.values());
    Measurement {
        data: add_noise(&signal, noise),
        architecture: Architecture::Slit,
    }
}

fn check_order(order: usize, scene: &EmbeddedScene) -> Result<()> {
    if order != scene.order || scene.embedded.nrows() != order {
        return Err(Error::mismatch(
            format!("scene of order {order}"),
            format!("order {}", scene.order),
        ));
    }
    Ok(())
}

/// `n` sequential coded exposures: `S·F + E`. Exposure `i` draws its own
/// noise row from `derive(noise.seed, i)`.
pub fn measure_hts(s: &SMatrix, scene: &EmbeddedScene, noise: &NoiseSpec) -> Result<Measurement> {
    check_order(s.order(), scene)?;
    let mut data = s.as_real() * &scene.embedded;
    if noise.sigma > 0.0 {
        for (i, mut row) in data.row_iter_mut().enumerate() {
            let mut rng = seed::rng(seed::derive(noise.seed, i as u64));
            for v in row.iter_mut() {
                let e: f64 = StandardNormal.sample(&mut rng);
                *v += noise.sigma * e;
            }
        }
    }
    Ok(Measurement {
        data,
        architecture: Architecture::Hts,
    })
}

fn dispersive(sub: &SubSMatrix, scene: &EmbeddedScene, noise: &NoiseSpec) -> Result<Measurement> {
    check_order(sub.order(), scene)?;
    let signal = &sub.s_snap * &scene.embedded;
    Ok(Measurement {
        data: add_noise(&signal, noise),
        architecture: Architecture::SnapshotDispersive,
    })
}

/// Single-shot dual-path measurement: `S_snap·F + E₁` on the dispersive
/// camera and `S∘I + E₂` on the non-dispersive camera.
pub fn measure_snapshot(
    sub: &SubSMatrix,
    scene: &EmbeddedScene,
    dispersive_noise: &NoiseSpec,
    nondispersive_noise: &NoiseSpec,
) -> Result<SnapshotFrame> {
    let dispersive = dispersive(sub, scene, dispersive_noise)?;
    let coded = &sub.s_snap * sub.intensity_scale;
    Ok(SnapshotFrame {
        dispersive,
        non_dispersive: add_noise(&coded, nondispersive_noise),
        truth: sub.clone(),
    })
}

/// The MMS measurement: the same single-shot dispersive data, without the
/// aperture camera.
pub fn measure_mms(
    sub: &SubSMatrix,
    scene: &EmbeddedScene,
    noise: &NoiseSpec,
) -> Result<Measurement> {
    dispersive(sub, scene, noise)
}
