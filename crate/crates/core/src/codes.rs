//! Cyclic Hadamard-S matrices.
//!
//! Orders are primes `n ≡ 3 (mod 4)`. The first row comes from the quadratic
//! residues mod `n`; every later row is the previous one rotated left by one
//! place, so `S[i][j] = r[(i + j) mod n]`.

use std::fmt;

use serde::Serialize;

use crate::{Error, Matrix, Result};

/// Binary cyclic S-matrix of odd order `n` with `(n+1)/2` ones per row.
#[derive(Debug, Clone, PartialEq)]
pub struct SMatrix {
    order: usize,
    bits: Vec<u8>,
    real: Matrix,
    complemented: bool,
}

impl SMatrix {
    /// Wrap an arbitrary 0/1 matrix, checking every S-matrix invariant.
    pub fn from_bits(order: usize, bits: Vec<u8>) -> Result<Self> {
        if bits.len() != order * order {
            return Err(Error::mismatch(order * order, bits.len()));
        }
        let real = Matrix::from_fn(order, order, |i, j| bits[i * order + j] as f64);
        let report = validate_s_matrix(&real);
        if !report.passed() {
            return Err(Error::InvalidParameter(format!(
                "not an S-matrix: {}",
                report.failures().collect::<Vec<_>>().join("; ")
            )));
        }
        Ok(SMatrix {
            order,
            bits,
            real,
            complemented: false,
        })
    }

    /// Try to read a real matrix as an S-matrix. `None` unless it passes
    /// every invariant.
    pub fn from_real(m: &Matrix) -> Option<Self> {
        if !m.is_square() || m.iter().any(|&v| v != 0.0 && v != 1.0) {
            return None;
        }
        let bits = (0..m.nrows())
            .flat_map(|i| (0..m.ncols()).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)] as u8)
            .collect();
        SMatrix::from_bits(m.nrows(), bits).ok()
    }

    pub fn order(&self) -> usize {
        self.order
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> u8 {
        self.bits[i * self.order + j]
    }

    pub fn is_open(&self, i: usize, j: usize) -> bool {
        self.get(i, j) == 1
    }

    pub fn row(&self, i: usize) -> &[u8] {
        &self.bits[i * self.order..(i + 1) * self.order]
    }

    /// The matrix as `f64`, cached at construction.
    pub fn as_real(&self) -> &Matrix {
        &self.real
    }

    /// Ones per row, `(n+1)/2`.
    pub fn weight(&self) -> usize {
        self.order.div_ceil(2)
    }

    pub fn validation_report(&self) -> ValidationReport {
        let mut report = validate_s_matrix(&self.real);
        report.convention = Some(if self.complemented {
            "first row r[j]=1 iff j=0 or j is a quadratic residue (complement of the non-residue rule); row i = row 0 rotated left i places".into()
        } else {
            "first row r[j]=1 iff j is a quadratic non-residue, r[0]=0; row i = row 0 rotated left i places".into()
        });
        report
    }
}

impl fmt::Display for SMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.order {
            let line: Vec<String> = self.row(i).iter().map(|b| b.to_string()).collect();
            writeln!(f, "{}", line.join(","))?;
        }
        Ok(())
    }
}

fn is_prime(n: usize) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

/// Build the quadratic-residue S-matrix of the given order.
pub fn build_s_matrix(order: usize) -> Result<SMatrix> {
    if order < 3 {
        return Err(Error::UnsupportedOrder {
            order,
            reason: "order must be at least 3",
        });
    }
    if order % 4 != 3 {
        return Err(Error::UnsupportedOrder {
            order,
            reason: "order must be congruent to 3 mod 4",
        });
    }
    if !is_prime(order) {
        return Err(Error::UnsupportedOrder {
            order,
            reason: "order must be prime",
        });
    }

    let mut residue = vec![false; order];
    for x in 1..order {
        residue[x * x % order] = true;
    }
    let mut first: Vec<u8> = (0..order)
        .map(|j| u8::from(j != 0 && !residue[j]))
        .collect();
    // The non-residue row has weight (n-1)/2; the S-matrix needs (n+1)/2.
    let mut complemented = false;
    if first.iter().map(|&b| b as usize).sum::<usize>() != order.div_ceil(2) {
        first.iter_mut().for_each(|b| *b = 1 - *b);
        complemented = true;
    }

    let bits: Vec<u8> = (0..order)
        .flat_map(|i| (0..order).map(move |j| (i + j) % order))
        .map(|idx| first[idx])
        .collect();
    let real = Matrix::from_fn(order, order, |i, j| bits[i * order + j] as f64);
    Ok(SMatrix {
        order,
        bits,
        real,
        complemented,
    })
}

/// Closed-form inverse `(2/(n+1)) (2Sᵀ − J)`.
pub fn s_inverse(s: &SMatrix) -> Matrix {
    let n = s.order;
    let scale = 2.0 / (n as f64 + 1.0);
    Matrix::from_fn(n, n, |i, j| scale * (2.0 * s.get(j, i) as f64 - 1.0))
}

/// One line of a [`ValidationReport`].
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    /// Offending `(row, col)` positions; for row/column checks the unused
    /// coordinate is `usize::MAX`.
    pub offending: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub order: usize,
    pub checks: Vec<Check>,
    pub convention: Option<String>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = String> + '_ {
        self.checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| format!("{}: {}", c.name, c.detail))
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "order {}", self.order)?;
        for c in &self.checks {
            writeln!(
                f,
                "  [{}] {:<12} {}",
                if c.passed { "pass" } else { "FAIL" },
                c.name,
                c.detail
            )?;
            if !c.offending.is_empty() {
                let shown: Vec<String> = c
                    .offending
                    .iter()
                    .take(8)
                    .map(|&(i, j)| match (i, j) {
                        (i, usize::MAX) => format!("row {i}"),
                        (usize::MAX, j) => format!("col {j}"),
                        (i, j) => format!("({i},{j})"),
                    })
                    .collect();
                let more = c.offending.len().saturating_sub(8);
                write!(f, "         at {}", shown.join(" "))?;
                if more > 0 {
                    write!(f, " (+{more} more)")?;
                }
                writeln!(f)?;
            }
        }
        if let Some(conv) = &self.convention {
            writeln!(f, "  convention: {conv}")?;
        }
        write!(
            f,
            "{}",
            if self.passed() {
                "valid S-matrix"
            } else {
                "not a valid S-matrix"
            }
        )
    }
}

const MAX_OFFENDERS: usize = 64;

/// Check a square real matrix against every S-matrix invariant.
///
/// Failures are report entries, never errors. Integer arithmetic is used for
/// the correlation check when the matrix is binary.
pub fn validate_s_matrix(m: &Matrix) -> ValidationReport {
    let n = m.nrows();
    let mut checks = Vec::new();

    if !m.is_square() || n == 0 {
        checks.push(Check {
            name: "square",
            passed: false,
            detail: format!("shape {}x{}", m.nrows(), m.ncols()),
            offending: vec![],
        });
        return ValidationReport {
            order: n,
            checks,
            convention: None,
        };
    }
    if n.is_multiple_of(2) {
        checks.push(Check {
            name: "order",
            passed: false,
            detail: format!("order {n} is even; S-matrices have odd order"),
            offending: vec![],
        });
    }

    let non_binary: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|&(i, j)| m[(i, j)] != 0.0 && m[(i, j)] != 1.0)
        .collect();
    let binary = non_binary.is_empty();
    checks.push(Check {
        name: "binarity",
        passed: binary,
        detail: if binary {
            "all entries are 0 or 1".into()
        } else {
            format!("{} entries not in {{0,1}}", non_binary.len())
        },
        offending: non_binary.into_iter().take(MAX_OFFENDERS).collect(),
    });

    let weight = (n + 1) as f64 / 2.0;
    let bad_rows: Vec<(usize, usize)> = (0..n)
        .filter(|&i| m.row(i).sum() != weight)
        .map(|i| (i, usize::MAX))
        .collect();
    checks.push(Check {
        name: "row-weight",
        passed: bad_rows.is_empty(),
        detail: match bad_rows.first() {
            None => format!("every row has weight {weight}"),
            Some(&(i, _)) => format!(
                "{} rows off; row {i} has weight {} != {weight}",
                bad_rows.len(),
                m.row(i).sum()
            ),
        },
        offending: bad_rows.into_iter().take(MAX_OFFENDERS).collect(),
    });

    let bad_cols: Vec<(usize, usize)> = (0..n)
        .filter(|&j| m.column(j).sum() != weight)
        .map(|j| (usize::MAX, j))
        .collect();
    checks.push(Check {
        name: "col-weight",
        passed: bad_cols.is_empty(),
        detail: match bad_cols.first() {
            None => format!("every column has weight {weight}"),
            Some(&(_, j)) => format!(
                "{} columns off; column {j} has weight {} != {weight}",
                bad_cols.len(),
                m.column(j).sum()
            ),
        },
        offending: bad_cols.into_iter().take(MAX_OFFENDERS).collect(),
    });

    // SᵀS = ((n+1)/4)(I + J); in integers, 4·(SᵀS)_ij = (n+1)(1 + δ_ij).
    let mut bad_corr = Vec::new();
    let mut worst = 0.0f64;
    if binary {
        let bits: Vec<Vec<u64>> = (0..n)
            .map(|j| (0..n).map(|i| m[(i, j)] as u64).collect())
            .collect();
        for a in 0..n {
            for b in a..n {
                let dot: u64 = bits[a].iter().zip(&bits[b]).map(|(x, y)| x & y).sum();
                let want = (n as u64 + 1) * if a == b { 2 } else { 1 };
                let dev = (4 * dot).abs_diff(want);
                if dev != 0 {
                    worst = worst.max(dev as f64 / 4.0);
                    bad_corr.push((a, b));
                }
            }
        }
    } else {
        let gram = m.transpose() * m;
        let c = (n + 1) as f64 / 4.0;
        for a in 0..n {
            for b in a..n {
                let want = if a == b { 2.0 * c } else { c };
                let dev = (gram[(a, b)] - want).abs();
                if dev > 1e-9 {
                    worst = worst.max(dev);
                    bad_corr.push((a, b));
                }
            }
        }
    }
    checks.push(Check {
        name: "correlation",
        passed: bad_corr.is_empty(),
        detail: if bad_corr.is_empty() {
            format!("S^T S = {}(I + J) exactly", (n + 1) as f64 / 4.0)
        } else {
            format!("{} Gram entries off, max deviation {worst}", bad_corr.len())
        },
        offending: bad_corr.into_iter().take(MAX_OFFENDERS).collect(),
    });

    let scale = 2.0 / (n as f64 + 1.0);
    let inv = Matrix::from_fn(n, n, |i, j| scale * (2.0 * m[(j, i)] - 1.0));
    let prod = m * &inv;
    let mut residual = 0.0f64;
    let mut bad_inv = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let dev = (prod[(i, j)] - if i == j { 1.0 } else { 0.0 }).abs();
            residual = residual.max(dev);
            if dev >= 1e-10 {
                bad_inv.push((i, j));
            }
        }
    }
    checks.push(Check {
        name: "inverse",
        passed: bad_inv.is_empty(),
        detail: format!("max |S S^-1 - I| = {residual:e}"),
        offending: bad_inv.into_iter().take(MAX_OFFENDERS).collect(),
    });

    ValidationReport {
        order: n,
        checks,
        convention: None,
    }
}

/// Primes `≡ 3 (mod 4)` up to `limit`, i.e. every order [`build_s_matrix`]
/// accepts.
pub fn supported_orders(limit: usize) -> impl Iterator<Item = usize> {
    (3..=limit).filter(|&n| n % 4 == 3 && is_prime(n))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix_from_rows(rows: &[&[u8]]) -> Matrix {
        let n = rows.len();
        Matrix::from_fn(n, rows[0].len(), |i, j| rows[i][j] as f64)
    }

    #[test]
    fn order_3_matches_normalized_hadamard_4() {
        // Sylvester H4, normalized; drop first row/col; map -1 -> 1, +1 -> 0.
        let h4 = [[1, 1, 1, 1], [1, -1, 1, -1], [1, 1, -1, -1], [1, -1, -1, 1]];
        let from_h: Vec<u8> = (1..4)
            .flat_map(|i| (1..4).map(move |j| u8::from(h4[i][j] == -1)))
            .collect();
        let reference = SMatrix::from_bits(3, from_h).unwrap();
        assert_eq!(reference.row(0), &[1, 0, 1]);
        assert_eq!(reference.row(1), &[0, 1, 1]);
        assert_eq!(reference.row(2), &[1, 1, 0]);

        // Our construction is the same matrix up to a cyclic phase.
        let s = build_s_matrix(3).unwrap();
        let rows: Vec<&[u8]> = (0..3).map(|i| s.row(i)).collect();
        for i in 0..3 {
            assert!(rows.contains(&reference.row(i)));
        }
        assert!(s.validation_report().passed());
    }

    #[test]
    fn order_7_gram_is_two_i_plus_j() {
        let s = build_s_matrix(7).unwrap();
        assert_eq!(s.weight(), 4);
        let gram = s.as_real().transpose() * s.as_real();
        for i in 0..7 {
            for j in 0..7 {
                assert_eq!(gram[(i, j)], if i == j { 4.0 } else { 2.0 });
            }
        }
        // Rows 0 and 1 of the quadratic-residue construction for n = 7.
        assert_eq!(s.row(0), &[1, 1, 1, 0, 1, 0, 0]);
        assert_eq!(s.row(1), &[1, 1, 0, 1, 0, 0, 1]);
    }

    #[test]
    fn rejects_unsupported_orders() {
        for bad in [0, 1, 2, 4, 5, 9, 15, 13, 21] {
            let err = build_s_matrix(bad).unwrap_err();
            assert!(
                err.to_string()
                    .contains(&format!("unsupported order {bad}")),
                "{err}"
            );
        }
    }

    #[test]
    fn inverse_of_symmetric_order_3() {
        let s = SMatrix::from_bits(3, vec![1, 0, 1, 0, 1, 1, 1, 1, 0]).unwrap();
        let inv = s_inverse(&s);
        assert_eq!(
            s.as_real(),
            &matrix_from_rows(&[&[1, 0, 1], &[0, 1, 1], &[1, 1, 0]])
        );
        let expect = [[1.0, -1.0, 1.0], [-1.0, 1.0, 1.0], [1.0, 1.0, -1.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(inv[(i, j)], 0.5 * expect[i][j]);
            }
        }
        let prod = s.as_real() * &inv;
        assert_eq!(prod, Matrix::identity(3, 3));
    }

    #[test]
    fn inverse_residual_small_for_supported_orders() {
        for n in [3, 7, 11, 19, 31, 127] {
            let s = build_s_matrix(n).unwrap();
            let inv = s_inverse(&s);
            let left = (&inv * s.as_real() - Matrix::identity(n, n)).amax();
            let right = (s.as_real() * &inv - Matrix::identity(n, n)).amax();
            assert!(left < 1e-10 && right < 1e-10, "n={n}: {left} {right}");
        }
    }

    #[test]
    fn every_supported_order_up_to_131_is_exact() {
        for n in supported_orders(131) {
            let s = build_s_matrix(n).unwrap();
            let report = s.validation_report();
            assert!(report.passed(), "n={n}\n{report}");
            for i in 0..n {
                let next = s.row((i + 1) % n);
                let cur = s.row(i);
                for j in 0..n {
                    assert_eq!(next[j], cur[(j + 1) % n]);
                }
            }
        }
    }

    #[test]
    fn identity_fails_row_weight() {
        let report = validate_s_matrix(&Matrix::identity(7, 7));
        assert!(!report.passed());
        let rw = report.check("row-weight").unwrap();
        assert!(!rw.passed);
        assert!(rw.detail.contains("weight 1 != 4"), "{}", rw.detail);
        assert_eq!(rw.offending.len(), 7);
    }

    #[test]
    fn flipped_entry_is_caught() {
        let s = build_s_matrix(7).unwrap();
        let mut m = s.as_real().clone();
        m[(1, 1)] = 1.0 - m[(1, 1)];
        let report = validate_s_matrix(&m);
        assert!(report.check("binarity").unwrap().passed);
        assert!(!report.check("correlation").unwrap().passed);
        assert!(!report.check("row-weight").unwrap().offending.is_empty());
        assert!(report
            .check("row-weight")
            .unwrap()
            .offending
            .contains(&(1, usize::MAX)));

        let mut m = s.as_real().clone();
        m[(1, 1)] = 0.5;
        let report = validate_s_matrix(&m);
        assert_eq!(report.check("binarity").unwrap().offending, vec![(1, 1)]);
    }

    #[test]
    fn non_square_is_reported() {
        let report = validate_s_matrix(&Matrix::zeros(3, 4));
        assert!(!report.passed());
        assert_eq!(report.checks[0].name, "square");
    }

    #[test]
    fn from_real_roundtrip() {
        let s = build_s_matrix(11).unwrap();
        let back = SMatrix::from_real(s.as_real()).unwrap();
        assert_eq!(back.as_real(), s.as_real());
        assert!(SMatrix::from_real(&Matrix::identity(11, 11)).is_none());
    }
}
