//! SNR metrics, interval summaries and the sub-S-matrix SNR bound.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::codes::s_inverse;
use crate::scene::SubSMatrix;
use crate::{Error, Matrix, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Slit,
    Hts,
    Snapshot,
    Mms,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Slit, Method::Hts, Method::Snapshot, Method::Mms];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Slit => "slit",
            Method::Hts => "hts",
            Method::Snapshot => "snapshot",
            Method::Mms => "mms",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "slit" => Ok(Method::Slit),
            "hts" => Ok(Method::Hts),
            "snapshot" => Ok(Method::Snapshot),
            "mms" => Ok(Method::Mms),
            other => Err(Error::InvalidParameter(format!("unknown method {other:?}"))),
        }
    }
}

/// Which reconstructed spectrum a sample belongs to. Orders rows before the
/// consensus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RowTag {
    Row(usize),
    Consensus,
}

impl fmt::Display for RowTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RowTag::Row(i) => write!(f, "{i}"),
            RowTag::Consensus => f.write_str("consensus"),
        }
    }
}

impl FromStr for RowTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "consensus" => Ok(RowTag::Consensus),
            other => other
                .parse()
                .map(RowTag::Row)
                .map_err(|_| Error::InvalidParameter(format!("bad row tag {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnrSample {
    pub method: Method,
    pub k: f64,
    pub trial: usize,
    pub row: RowTag,
    /// `+∞` marks an exact reconstruction.
    pub snr_db: f64,
}

/// Relative error at or below which a reconstruction counts as exact.
pub const EXACT_RELATIVE_ERROR: f64 = 1e-12;

/// `10·log10(‖f‖² / ‖f − f̂‖²)`.
///
/// Returns `+∞` when the relative error is at round-off level
/// ([`EXACT_RELATIVE_ERROR`]).
pub fn snr_db(truth: &[f64], estimate: &[f64]) -> Result<f64> {
    if truth.len() != estimate.len() {
        return Err(Error::mismatch(truth.len(), estimate.len()));
    }
    let signal: f64 = truth.iter().map(|v| v * v).sum();
    if signal == 0.0 {
        return Err(Error::InvalidParameter("SNR of an all-zero truth".into()));
    }
    let err: f64 = truth
        .iter()
        .zip(estimate)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    if err <= EXACT_RELATIVE_ERROR * EXACT_RELATIVE_ERROR * signal {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (signal / err).log10())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub p2_5: f64,
    pub p50: f64,
    pub p97_5: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean_db: f64,
    /// Sample standard deviation (N − 1 denominator).
    pub std_db: f64,
    /// `mean ± 1.96·std/√N`
    pub ci95_mean: Interval,
    /// `mean ± 1.96·std`
    pub population95: Interval,
    pub quantiles: Quantiles,
    /// Finite samples used.
    pub n: usize,
    /// Exact-reconstruction sentinels left out.
    pub excluded_infinite: usize,
}

const Z95: f64 = 1.96;

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Summarize raw dB values. Values are sorted before accumulation, so the
/// result is bit-identical for any input order.
pub fn summarize_values(values: &[f64]) -> Result<Summary> {
    let mut finite: Vec<f64> = values.iter().cloned().filter(|v| v.is_finite()).collect();
    let excluded_infinite = values.iter().filter(|v| **v == f64::INFINITY).count();
    if finite.len() < 2 {
        return Err(Error::TooFewSamples(finite.len()));
    }
    finite.sort_by(f64::total_cmp);
    let n = finite.len() as f64;
    let mean = finite.iter().sum::<f64>() / n;
    let var = finite.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    let std = var.sqrt();
    let half_mean = Z95 * std / n.sqrt();
    let half_pop = Z95 * std;
    Ok(Summary {
        mean_db: mean,
        std_db: std,
        ci95_mean: Interval {
            lo: mean - half_mean,
            hi: mean + half_mean,
        },
        population95: Interval {
            lo: mean - half_pop,
            hi: mean + half_pop,
        },
        quantiles: Quantiles {
            p2_5: quantile(&finite, 0.025),
            p50: quantile(&finite, 0.5),
            p97_5: quantile(&finite, 0.975),
        },
        n: finite.len(),
        excluded_infinite,
    })
}

pub fn summarize(samples: &[SnrSample]) -> Result<Summary> {
    let values: Vec<f64> = samples.iter().map(|s| s.snr_db).collect();
    summarize_values(&values)
}

/// Noise-power reduction of S-matrix inversion over one direct measurement,
/// `10·log10((n+1)²/(4n))`.
pub fn theoretical_multiplex_gain(order: usize) -> f64 {
    let n = order as f64;
    10.0 * ((n + 1.0) * (n + 1.0) / (4.0 * n)).log10()
}

/// `10·log10(1/(1−k))`
pub fn predicted_degradation_db(k: f64) -> f64 {
    -10.0 * (1.0 - k).log10()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub k: f64,
    pub alpha: f64,
    /// `S₁ᵀS₂ + S₂ᵀS₁ + ((2−k)/(1−k))·S₂ᵀS₂`; zero at `k = 0`.
    pub p_matrix: Matrix,
    /// `max |(S−S₁)ᵀ(S−S₁) − [(1−k)²SᵀS + ((1−k)/k)P]|`
    pub identity_residual: f64,
    /// `10·log10(Σ‖n‖² / Σ‖n'‖²)` with `n' = S_snap⁻¹ n`.
    pub empirical_snr_db: f64,
    /// `10·log10(Σ n'ᵀSᵀSn' / Σ‖n'‖²) + 10·log10(1−k)`
    pub bound_db: f64,
    /// Same noise decoded through the ideal S.
    pub hts_snr_db: f64,
    /// `hts_snr_db − empirical_snr_db`
    pub degradation_db: f64,
    pub predicted_degradation_db: f64,
}

/// Evaluate the sub-S SNR lower bound on realized noise vectors (one per
/// column of `noise`).
pub fn eval_bound(sub: &SubSMatrix, noise: &Matrix) -> Result<BoundReport> {
    let n = sub.order();
    let k = sub.k;
    if !(0.0..1.0).contains(&k) {
        return Err(Error::InvalidParameter(format!(
            "bound needs 0 <= k < 1, got {k}"
        )));
    }
    if noise.nrows() != n || noise.ncols() == 0 {
        return Err(Error::mismatch(
            format!("{n} x N noise samples"),
            format!("{:?}", noise.shape()),
        ));
    }
    let s = sub.base.as_real();
    let sts = s.transpose() * s;
    let snap_gram = sub.s_snap.transpose() * &sub.s_snap;

    let (p_matrix, identity_residual) = if k > 0.0 {
        let s1t = sub.s1.transpose();
        let s2t = sub.s2.transpose();
        let p = &s1t * &sub.s2 + &s2t * &sub.s1 + (&s2t * &sub.s2) * ((2.0 - k) / (1.0 - k));
        let rhs = &sts * ((1.0 - k) * (1.0 - k)) + &p * ((1.0 - k) / k);
        let residual = (&snap_gram - rhs).amax();
        (p, residual)
    } else {
        (Matrix::zeros(n, n), (&snap_gram - &sts).amax())
    };

    let lu = sub.s_snap.clone().lu();
    let transformed = lu.solve(noise).ok_or(Error::Singular {
        condition: f64::INFINITY,
    })?;
    let noise_energy = noise.norm_squared();
    let transformed_energy = transformed.norm_squared();
    let coded_energy = (s * &transformed).norm_squared();
    let hts_energy = (s_inverse(&sub.base) * noise).norm_squared();

    let empirical_snr_db = 10.0 * (noise_energy / transformed_energy).log10();
    let bound_db = 10.0 * (coded_energy / transformed_energy).log10() + 10.0 * (1.0 - k).log10();
    let hts_snr_db = 10.0 * (noise_energy / hts_energy).log10();
    Ok(BoundReport {
        k,
        alpha: sub.alpha,
        p_matrix,
        identity_residual,
        empirical_snr_db,
        bound_db,
        hts_snr_db,
        degradation_db: hts_snr_db - empirical_snr_db,
        predicted_degradation_db: predicted_degradation_db(k),
    })
}
