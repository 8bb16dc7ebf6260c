//! Decoding: code calibration, linear inversion, NNLS, row extraction.

pub mod nnls;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codes::{s_inverse, SMatrix};
use crate::scene::SubSMatrix;
use crate::{Error, Matrix, Result};

pub use nnls::{NnlsOptions, NnlsSolution, NnlsSolver};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecodeMethod {
    Inverse,
    Nnls,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolverDiagnostics {
    /// Per-column iteration counts (zero for direct solves).
    pub iterations: Vec<usize>,
    /// Per-column `‖coding·x − g‖₂`.
    pub residual_norms: Vec<f64>,
    /// Columns where NNLS stopped at its iteration cap.
    pub capped_columns: Vec<usize>,
    /// 1-norm condition number, when it was computed.
    pub condition: Option<f64>,
}

/// Estimated shift-embedded scene.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedEstimate {
    pub estimate: Matrix,
    pub method: DecodeMethod,
    pub diagnostics: SolverDiagnostics,
}

/// Extracted per-row spectra. Not renormalized.
#[derive(Debug, Clone, PartialEq)]
pub struct RowSpectra {
    pub rows: Vec<Vec<f64>>,
    pub source_rows: Vec<usize>,
}

/// Recover `S_snap` from the non-dispersive image: clamp negatives, zero the
/// closed mask positions, normalize by the peak, then decompose.
pub fn calibrate_sub_s(image: &Matrix, base: &SMatrix) -> Result<SubSMatrix> {
    let n = base.order();
    if image.shape() != (n, n) {
        return Err(Error::mismatch(
            format!("{n}x{n} image"),
            format!("{:?}", image.shape()),
        ));
    }
    let masked = Matrix::from_fn(n, n, |i, j| {
        if base.is_open(i, j) {
            image[(i, j)].max(0.0)
        } else {
            0.0
        }
    });
    let peak = masked.max();
    if !(peak > 0.0) {
        return Err(Error::DarkFrame);
    }
    SubSMatrix::from_normalized(base, masked / peak, peak)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverseOptions {
    /// Reject coding matrices whose 1-norm condition number exceeds this.
    pub max_condition: f64,
}

impl Default for InverseOptions {
    fn default() -> Self {
        InverseOptions { max_condition: 1e8 }
    }
}

fn check_shapes(coding: &Matrix, g: &Matrix) -> Result<()> {
    if !coding.is_square() {
        return Err(Error::mismatch(
            "square coding matrix",
            format!("{:?}", coding.shape()),
        ));
    }
    if g.nrows() != coding.nrows() {
        return Err(Error::mismatch(
            format!("{} measurement rows", coding.nrows()),
            g.nrows(),
        ));
    }
    Ok(())
}

fn column_residuals(coding: &Matrix, x: &Matrix, g: &Matrix) -> Vec<f64> {
    let r = coding * x - g;
    r.column_iter().map(|c| c.norm()).collect()
}

fn one_norm(m: &Matrix) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Solve `coding·X = g`.
///
/// An exact S-matrix goes through its closed-form inverse. Anything else is
/// LU-factorized with partial pivoting after a condition check.
pub fn decode_inverse(coding: &Matrix, g: &Matrix) -> Result<EmbeddedEstimate> {
    decode_inverse_with(coding, g, &InverseOptions::default())
}

pub fn decode_inverse_with(
    coding: &Matrix,
    g: &Matrix,
    opts: &InverseOptions,
) -> Result<EmbeddedEstimate> {
    check_shapes(coding, g)?;
    if let Some(s) = SMatrix::from_real(coding) {
        return Ok(decode_with_s(&s, g));
    }
    let lu = coding.clone().lu();
    let inverse = lu.try_inverse().ok_or(Error::Singular {
        condition: f64::INFINITY,
    })?;
    let condition = one_norm(coding) * one_norm(&inverse);
    if !(condition <= opts.max_condition) {
        return Err(Error::Singular { condition });
    }
    let estimate = lu.solve(g).ok_or(Error::Singular { condition })?;
    let residual_norms = column_residuals(coding, &estimate, g);
    Ok(EmbeddedEstimate {
        diagnostics: SolverDiagnostics {
            iterations: vec![0; g.ncols()],
            residual_norms,
            capped_columns: vec![],
            condition: Some(condition),
        },
        estimate,
        method: DecodeMethod::Inverse,
    })
}

/// Closed-form decode for a known S-matrix.
pub fn decode_with_s(s: &SMatrix, g: &Matrix) -> EmbeddedEstimate {
    let estimate = s_inverse(s) * g;
    let residual_norms = column_residuals(s.as_real(), &estimate, g);
    EmbeddedEstimate {
        diagnostics: SolverDiagnostics {
            iterations: vec![0; g.ncols()],
            residual_norms,
            capped_columns: vec![],
            condition: None,
        },
        estimate,
        method: DecodeMethod::Inverse,
    }
}

/// Column-wise NNLS, `argmin ‖coding·x − g[:, c]‖₂, x ≥ 0`, for every column.
pub fn decode_nnls(coding: &Matrix, g: &Matrix) -> Result<EmbeddedEstimate> {
    decode_nnls_with(coding, g, &NnlsOptions::default())
}

pub fn decode_nnls_with(
    coding: &Matrix,
    g: &Matrix,
    opts: &NnlsOptions,
) -> Result<EmbeddedEstimate> {
    check_shapes(coding, g)?;
    let solver = NnlsSolver::new(coding);
    let atb = coding.transpose() * g;
    let solutions: Vec<NnlsSolution> = (0..g.ncols())
        .into_par_iter()
        .map(|c| {
            let b: Vec<f64> = g.column(c).iter().cloned().collect();
            let atb_c: Vec<f64> = atb.column(c).iter().cloned().collect();
            solver.solve_with_atb(&b, &atb_c, opts)
        })
        .collect();

    let n = coding.ncols();
    let mut estimate = Matrix::zeros(n, g.ncols());
    let mut diagnostics = SolverDiagnostics::default();
    for (c, sol) in solutions.into_iter().enumerate() {
        for (i, v) in sol.x.into_iter().enumerate() {
            estimate[(i, c)] = v;
        }
        diagnostics.iterations.push(sol.iterations);
        diagnostics.residual_norms.push(sol.residual_norm);
        if sol.capped {
            diagnostics.capped_columns.push(c);
        }
    }
    Ok(EmbeddedEstimate {
        estimate,
        method: DecodeMethod::Nnls,
        diagnostics,
    })
}

/// Undo the shift embedding: row `j` is `estimate[j, j..j+m]`.
pub fn shift_extract(estimate: &Matrix) -> Result<RowSpectra> {
    let (n, w) = estimate.shape();
    if n == 0 || w < n {
        return Err(Error::mismatch(
            "n x (n+m-1) estimate with m >= 1",
            format!("{n}x{w}"),
        ));
    }
    let m = w - n + 1;
    let rows = (0..n)
        .map(|j| (j..j + m).map(|c| estimate[(j, c)]).collect())
        .collect();
    Ok(RowSpectra {
        rows,
        source_rows: (0..n).collect(),
    })
}

/// Mean of the extracted rows.
pub fn consensus_spectrum(rows: &RowSpectra) -> Vec<f64> {
    let Some(first) = rows.rows.first() else {
        return Vec::new();
    };
    let n = rows.rows.len() as f64;
    let mut acc = vec![0.0; first.len()];
    for r in &rows.rows {
        for (a, v) in acc.iter_mut().zip(r) {
            *a += v;
        }
    }
    acc.iter_mut().for_each(|a| *a /= n);
    acc
}
