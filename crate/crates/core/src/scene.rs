//! Test spectra, aperture illumination and the sub-S-matrix.

use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::codes::SMatrix;
use crate::{seed, Error, Matrix, Result};

/// A peak-normalized spectrum of `m ≥ 2` nonnegative samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    values: Vec<f64>,
    wavelengths: Option<Vec<f64>>,
}

impl Spectrum {
    /// Normalize `values` to unit peak. Rejects negatives, non-finite values,
    /// an all-zero vector and fewer than two samples.
    pub fn normalized(values: Vec<f64>, wavelengths: Option<Vec<f64>>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "spectrum needs at least 2 samples, got {}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidParameter(format!(
                "spectrum value {} at index {i} is not a nonnegative number",
                values[i]
            )));
        }
        if let Some(wl) = &wavelengths {
            if wl.len() != values.len() {
                return Err(Error::mismatch(values.len(), wl.len()));
            }
            if let Some(i) = wl.windows(2).position(|w| !(w[1] > w[0])) {
                return Err(Error::InvalidParameter(format!(
                    "wavelengths not strictly increasing at index {}",
                    i + 1
                )));
            }
        }
        let peak = values.iter().cloned().fold(0.0, f64::max);
        if peak <= 0.0 {
            return Err(Error::InvalidParameter(
                "spectrum is identically zero".into(),
            ));
        }
        let values = values.into_iter().map(|v| v / peak).collect();
        Ok(Spectrum {
            values,
            wavelengths,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn wavelengths(&self) -> Option<&[f64]> {
        self.wavelengths.as_deref()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn energy(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumKind {
    SolarLike,
    GaussianLines,
    Flat,
}

impl FromStr for SpectrumKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "solar_like" | "solar" => Ok(SpectrumKind::SolarLike),
            "gaussian_lines" | "gaussian" => Ok(SpectrumKind::GaussianLines),
            "flat" => Ok(SpectrumKind::Flat),
            other => Err(Error::InvalidParameter(format!(
                "unknown spectrum kind {other:?} (expected solar_like, gaussian_lines or flat)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianLine {
    /// Sample index of the line center.
    pub center: f64,
    /// Standard deviation in samples.
    pub width: f64,
    pub amplitude: f64,
}

impl FromStr for GaussianLine {
    type Err = Error;

    /// `center:width:amplitude`
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let num = |p: &str| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidParameter(format!("bad line spec {s:?}")))
        };
        match parts.as_slice() {
            [c, w, a] => Ok(GaussianLine {
                center: num(c)?,
                width: num(w)?,
                amplitude: num(a)?,
            }),
            _ => Err(Error::InvalidParameter(format!(
                "line spec {s:?} is not center:width:amplitude"
            ))),
        }
    }
}

/// Generator parameters for [`synth_spectrum`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub lines: Vec<GaussianLine>,
    pub temperature_k: f64,
    pub lambda_min_nm: f64,
    pub lambda_max_nm: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            lines: Vec::new(),
            temperature_k: 5778.0,
            lambda_min_nm: 350.0,
            lambda_max_nm: 1000.0,
        }
    }
}

// Strong terrestrial/solar absorption features: (center nm, depth, width nm).
const ABSORPTION_BANDS: [(f64, f64, f64); 10] = [
    (393.4, 0.60, 2.0),
    (396.8, 0.50, 2.0),
    (430.8, 0.30, 2.0),
    (486.1, 0.30, 3.0),
    (518.4, 0.20, 3.0),
    (589.0, 0.30, 3.0),
    (656.3, 0.40, 3.0),
    (686.7, 0.30, 4.0),
    (760.5, 0.50, 4.0),
    (940.0, 0.60, 12.0),
];

fn planck(lambda_nm: f64, temperature_k: f64) -> f64 {
    const H: f64 = 6.626_070_15e-34;
    const C: f64 = 2.997_924_58e8;
    const KB: f64 = 1.380_649e-23;
    let l = lambda_nm * 1e-9;
    1.0 / (l.powi(5) * ((H * C / (l * KB * temperature_k)).exp() - 1.0))
}

/// Deterministic synthetic spectrum, peak-normalized to 1.
///
/// `SolarLike` is a blackbody envelope on a linear wavelength grid with
/// multiplicative Gaussian absorption dips. The seed jitters the dip depths
/// and adds a handful of weak random lines.
pub fn synth_spectrum(
    kind: SpectrumKind,
    length: usize,
    params: &SynthParams,
    seed: u64,
) -> Result<Spectrum> {
    if length < 2 {
        return Err(Error::InvalidParameter(format!(
            "spectrum length must be at least 2, got {length}"
        )));
    }
    match kind {
        SpectrumKind::Flat => Spectrum::normalized(vec![1.0; length], None),
        SpectrumKind::GaussianLines => {
            if params.lines.is_empty() {
                return Err(Error::InvalidParameter(
                    "gaussian_lines needs at least one line".into(),
                ));
            }
            for line in &params.lines {
                if !(0.0..length as f64).contains(&line.center) {
                    return Err(Error::InvalidParameter(format!(
                        "line center {} outside [0, {length})",
                        line.center
                    )));
                }
                if !(line.width > 0.0) || line.amplitude < 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "line {line:?} needs positive width and nonnegative amplitude"
                    )));
                }
            }
            let values = (0..length)
                .map(|i| {
                    params
                        .lines
                        .iter()
                        .map(|l| {
                            let d = (i as f64 - l.center) / l.width;
                            l.amplitude * (-0.5 * d * d).exp()
                        })
                        .sum()
                })
                .collect();
            Spectrum::normalized(values, None)
        }
        SpectrumKind::SolarLike => {
            let (lo, hi) = (params.lambda_min_nm, params.lambda_max_nm);
            if !(lo > 0.0 && hi > lo) || !(params.temperature_k > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "bad solar parameters: range [{lo}, {hi}] nm at {} K",
                    params.temperature_k
                )));
            }
            let mut rng = seed::rng(seed);
            let wl: Vec<f64> = (0..length)
                .map(|i| lo + (hi - lo) * i as f64 / (length - 1) as f64)
                .collect();
            let mut dips: Vec<(f64, f64, f64)> = ABSORPTION_BANDS
                .iter()
                .map(|&(c, d, w)| (c, (d * rng.random_range(0.8..1.2)).min(0.95), w))
                .collect();
            for _ in 0..6 {
                dips.push((
                    rng.random_range(lo..hi),
                    rng.random_range(0.05..0.2),
                    rng.random_range(1.0..4.0),
                ));
            }
            let values = wl
                .iter()
                .map(|&l| {
                    let absorb: f64 = dips
                        .iter()
                        .map(|&(c, d, w)| 1.0 - d * (-0.5 * ((l - c) / w).powi(2)).exp())
                        .product();
                    planck(l, params.temperature_k) * absorb
                })
                .collect();
            Spectrum::normalized(values, Some(wl))
        }
    }
}

/// Parse spectrum CSV text: one column (value) or two (wavelength_nm, value),
/// optional header line.
pub fn parse_spectrum(text: &str, source: &str) -> Result<Spectrum> {
    let perr = |line: usize, message: String| Error::Parse {
        path: source.to_string(),
        line,
        message,
    };
    let mut values = Vec::new();
    let mut wavelengths = Vec::new();
    let mut columns = None;
    let mut row = 0;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: std::result::Result<Vec<f64>, _> =
            fields.iter().map(|f| f.parse::<f64>()).collect();
        let nums = match parsed {
            Ok(nums) => nums,
            Err(_) if row == 0 && columns.is_none() => continue, // header
            Err(_) => return Err(perr(idx + 1, format!("not a number: {line:?}"))),
        };
        match (columns, nums.len()) {
            (_, 0) | (_, 3..) => {
                return Err(perr(
                    idx + 1,
                    format!("expected 1 or 2 columns, got {}", nums.len()),
                ))
            }
            (None, c) => columns = Some(c),
            (Some(c), got) if c != got => {
                return Err(perr(idx + 1, format!("expected {c} columns, got {got}")))
            }
            _ => {}
        }
        row += 1;
        let value = *nums.last().unwrap();
        if value < 0.0 || !value.is_finite() {
            return Err(perr(idx + 1, format!("negative value at row {row}")));
        }
        if nums.len() == 2 {
            if let Some(&prev) = wavelengths.last() {
                if !(nums[0] > prev) {
                    return Err(perr(
                        idx + 1,
                        format!("wavelengths not strictly increasing at row {row}"),
                    ));
                }
            }
            wavelengths.push(nums[0]);
        }
        values.push(value);
    }
    if values.len() < 2 {
        return Err(perr(
            0,
            format!("need at least 2 rows, got {}", values.len()),
        ));
    }
    let wl = (columns == Some(2)).then_some(wavelengths);
    Spectrum::normalized(values, wl).map_err(|e| perr(0, e.to_string()))
}

pub fn load_spectrum(path: impl AsRef<Path>) -> Result<Spectrum> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_spectrum(&text, &path.display().to_string())
}

/// Aperture illumination, one value in `(0, 1]` per mask element.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityField {
    pub order: usize,
    pub entries: Matrix,
    /// Disturbance the field was sampled with.
    pub k: f64,
}

fn check_k(k: f64) -> Result<()> {
    if !(0.0..1.0).contains(&k) {
        return Err(Error::InvalidParameter(format!(
            "disturbance k must lie in [0, 1), got {k}"
        )));
    }
    Ok(())
}

/// Draw each element independently from `Uniform[1−k, 1]`.
pub fn sample_intensity(order: usize, k: f64, seed: u64) -> Result<IntensityField> {
    check_k(k)?;
    if order == 0 {
        return Err(Error::InvalidParameter("order must be positive".into()));
    }
    let entries = if k == 0.0 {
        Matrix::from_element(order, order, 1.0)
    } else {
        let law = Uniform::new_inclusive(1.0 - k, 1.0).expect("valid interval");
        let mut rng = seed::rng(seed);
        // Row-major draw order.
        let draws: Vec<f64> = (0..order * order).map(|_| law.sample(&mut rng)).collect();
        Matrix::from_row_slice(order, order, &draws)
    };
    Ok(IntensityField { order, entries, k })
}

/// The intensity-modulated code `S_snap` and its decomposition
/// `S − S₁ = S_snap = αS + S₂`, `kS = S₁ + S₂`, `k = 1 − α`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubSMatrix {
    pub s_snap: Matrix,
    /// Minimum of `s_snap` over open mask positions.
    pub alpha: f64,
    pub k: f64,
    /// `S − s_snap`
    pub s1: Matrix,
    /// `s_snap − α·S`
    pub s2: Matrix,
    pub base: SMatrix,
    /// Peak of the unnormalized coded intensity `S∘I`; 1 for calibrated codes.
    pub intensity_scale: f64,
}

impl SubSMatrix {
    /// Decompose an already normalized code. Closed mask positions must be 0.
    pub(crate) fn from_normalized(
        base: &SMatrix,
        s_snap: Matrix,
        intensity_scale: f64,
    ) -> Result<Self> {
        let n = base.order();
        let s = base.as_real();
        let mut alpha = f64::INFINITY;
        for i in 0..n {
            for j in 0..n {
                if base.is_open(i, j) {
                    let v = s_snap[(i, j)];
                    if v <= 0.0 {
                        return Err(Error::DeadElement { row: i, col: j });
                    }
                    alpha = alpha.min(v);
                }
            }
        }
        let s1 = s - &s_snap;
        let s2 = &s_snap - s * alpha;
        Ok(SubSMatrix {
            s_snap,
            alpha,
            k: 1.0 - alpha,
            s1,
            s2,
            base: base.clone(),
            intensity_scale,
        })
    }

    pub fn order(&self) -> usize {
        self.base.order()
    }

    /// Largest deviation from the three decomposition identities.
    pub fn identity_residual(&self) -> f64 {
        let s = self.base.as_real();
        let a = (s - &self.s1 - &self.s_snap).amax();
        let b = (s * self.alpha + &self.s2 - &self.s_snap).amax();
        let c = (s * self.k - &self.s1 - &self.s2).amax();
        a.max(b).max(c)
    }
}

/// `S_snap = (S∘I) / max(S∘I)` with its decomposition.
pub fn make_sub_s(s: &SMatrix, field: &IntensityField) -> Result<SubSMatrix> {
    let n = s.order();
    if field.order != n || field.entries.shape() != (n, n) {
        return Err(Error::mismatch(
            format!("{n}x{n} intensity field"),
            format!("{:?}", field.entries.shape()),
        ));
    }
    let product = s.as_real().component_mul(&field.entries);
    let peak = product.max();
    if !(peak > 0.0) {
        return Err(Error::InvalidParameter(
            "coded intensity is all zero; cannot normalize".into(),
        ));
    }
    SubSMatrix::from_normalized(s, product / peak, peak)
}

/// `n` copies of a spectrum, copy `j` displaced right by `j` columns.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedScene {
    pub order: usize,
    pub spectrum_length: usize,
    pub embedded: Matrix,
}

impl EmbeddedScene {
    pub fn width(&self) -> usize {
        self.order + self.spectrum_length - 1
    }
}

pub fn shift_embed(f: &Spectrum, order: usize) -> Result<EmbeddedScene> {
    embed_values(f.values(), order)
}

/// [`shift_embed`] for a raw slice, used when the rows are not a normalized
/// spectrum.
pub fn embed_values(f: &[f64], order: usize) -> Result<EmbeddedScene> {
    let m = f.len();
    if order == 0 || m < 2 {
        return Err(Error::InvalidParameter(format!(
            "shift embedding needs order >= 1 and length >= 2 (order {order}, length {m})"
        )));
    }
    let mut embedded = Matrix::zeros(order, order + m - 1);
    for j in 0..order {
        for (c, &v) in f.iter().enumerate() {
            embedded[(j, j + c)] = v;
        }
    }
    Ok(EmbeddedScene {
        order,
        spectrum_length: m,
        embedded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codes::build_s_matrix;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn flat_spectrum() {
        let f = synth_spectrum(SpectrumKind::Flat, 5, &SynthParams::default(), 99).unwrap();
        assert_eq!(f.values(), &[1.0; 5]);
    }

    #[test]
    fn single_gaussian_line_matches_closed_form() {
        let params = SynthParams {
            lines: vec![GaussianLine {
                center: 50.0,
                width: 3.0,
                amplitude: 1.0,
            }],
            ..Default::default()
        };
        let f = synth_spectrum(SpectrumKind::GaussianLines, 100, &params, 7).unwrap();
        for (i, &v) in f.values().iter().enumerate() {
            let d = (i as f64 - 50.0) / 3.0;
            assert_abs_diff_eq!(v, (-0.5 * d * d).exp(), epsilon = 1e-15);
        }
        assert_eq!(f.values()[50], 1.0);
        let peak = f
            .values()
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert_eq!(peak, 50);
    }

    #[test]
    fn line_center_out_of_range() {
        let params = SynthParams {
            lines: vec!["100:3:1".parse().unwrap()],
            ..Default::default()
        };
        assert!(synth_spectrum(SpectrumKind::GaussianLines, 100, &params, 0).is_err());
        assert!(synth_spectrum(SpectrumKind::Flat, 1, &params, 0).is_err());
    }

    #[test]
    fn solar_like_is_deterministic_and_normalized() {
        let p = SynthParams::default();
        let a = synth_spectrum(SpectrumKind::SolarLike, 127, &p, 1).unwrap();
        let b = synth_spectrum(SpectrumKind::SolarLike, 127, &p, 1).unwrap();
        let c = synth_spectrum(SpectrumKind::SolarLike, 127, &p, 2).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.values().iter().cloned().fold(0.0, f64::max), 1.0);
        assert!(a.values().iter().all(|&v| v > 0.0));
        let wl = a.wavelengths().unwrap();
        assert_eq!((wl[0], wl[126]), (350.0, 1000.0));
    }

    #[test]
    fn csv_examples() {
        let f = parse_spectrum("0.5\n1.0\n0.25\n", "t").unwrap();
        assert_eq!(f.values(), &[0.5, 1.0, 0.25]);
        let f = parse_spectrum("2\n4\n", "t").unwrap();
        assert_eq!(f.values(), &[0.5, 1.0]);
        let err = parse_spectrum("1\n-1\n", "t").unwrap_err();
        assert!(err.to_string().contains("negative value at row 2"), "{err}");
    }

    #[test]
    fn csv_with_header_and_wavelengths() {
        let f = parse_spectrum("wavelength_nm,value\n400,1\n410,3\n420,1.5\n", "t").unwrap();
        assert_eq!(f.values(), &[1.0 / 3.0, 1.0, 0.5]);
        assert_eq!(f.wavelengths().unwrap(), &[400.0, 410.0, 420.0]);

        let err = parse_spectrum("400,1\n400,2\n", "t").unwrap_err();
        assert!(err.to_string().contains("strictly increasing"));
        let err = parse_spectrum("value\n1\n", "t").unwrap_err();
        assert!(err.to_string().contains("at least 2 rows"));
        assert!(parse_spectrum("1\n1,2\n", "t").is_err());
    }

    #[test]
    fn load_from_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        std::fs::write(&path, "1\n2\n").unwrap();
        assert_eq!(load_spectrum(&path).unwrap().values(), &[0.5, 1.0]);
        assert!(load_spectrum(dir.path().join("missing.csv"))
            .unwrap_err()
            .is_io());
    }

    #[test]
    fn intensity_support_and_mean() {
        let f = sample_intensity(7, 0.0, 5).unwrap();
        assert!(f.entries.iter().all(|&v| v == 1.0));

        let f = sample_intensity(127, 0.5, 3).unwrap();
        assert!(f.entries.min() >= 0.5 && f.entries.max() <= 1.0);
        // Uniform[0.5, 1] has mean 0.75.
        assert!((f.entries.mean() - 0.75).abs() < 0.01);
        assert_eq!(f, sample_intensity(127, 0.5, 3).unwrap());

        assert!(sample_intensity(7, -0.1, 0).is_err());
        assert!(sample_intensity(7, 1.0, 0).is_err());
    }

    #[test]
    fn uniform_field_gives_plain_s() {
        let s = build_s_matrix(7).unwrap();
        let sub = make_sub_s(&s, &sample_intensity(7, 0.0, 0).unwrap()).unwrap();
        assert_eq!(&sub.s_snap, s.as_real());
        assert_eq!((sub.alpha, sub.k), (1.0, 0.0));
        assert_eq!(sub.s1.amax(), 0.0);
        assert_eq!(sub.s2.amax(), 0.0);
    }

    #[test]
    fn hand_evaluated_order_3() {
        let s = SMatrix::from_bits(3, vec![1, 0, 1, 0, 1, 1, 1, 1, 0]).unwrap();
        let mut entries = Matrix::from_element(3, 3, 1.0);
        entries[(0, 0)] = 0.5;
        let field = IntensityField {
            order: 3,
            entries,
            k: 0.5,
        };
        let sub = make_sub_s(&s, &field).unwrap();
        let mut want = s.as_real().clone();
        want[(0, 0)] = 0.5;
        assert_eq!(sub.s_snap, want);
        assert_eq!((sub.alpha, sub.k), (0.5, 0.5));
    }

    #[test]
    fn dimension_mismatch() {
        let s = build_s_matrix(7).unwrap();
        assert!(make_sub_s(&s, &sample_intensity(3, 0.1, 0).unwrap()).is_err());
    }

    #[test]
    fn s1_s2_have_matching_means() {
        let s = build_s_matrix(127).unwrap();
        for (k, seed) in [(0.1, 11), (0.5, 12), (0.9, 13)] {
            let sub = make_sub_s(&s, &sample_intensity(127, k, seed).unwrap()).unwrap();
            let (mut m1, mut m2, mut cnt) = (0.0, 0.0, 0.0);
            for i in 0..127 {
                for j in 0..127 {
                    if s.is_open(i, j) {
                        m1 += sub.s1[(i, j)];
                        m2 += sub.s2[(i, j)];
                        cnt += 1.0;
                    }
                }
            }
            let (m1, m2) = (m1 / cnt, m2 / cnt);
            assert!((m1 - m2).abs() / m1.max(m2) < 0.1, "k={k}: {m1} vs {m2}");
        }
    }

    #[test]
    fn embedding_layout() {
        let f = Spectrum::normalized(vec![0.5, 1.0], None).unwrap();
        let e = shift_embed(&f, 3).unwrap();
        let want = Matrix::from_row_slice(
            3,
            4,
            &[0.5, 1.0, 0.0, 0.0, 0.0, 0.5, 1.0, 0.0, 0.0, 0.0, 0.5, 1.0],
        );
        assert_eq!(e.embedded, want);
        let one = shift_embed(&f, 1).unwrap();
        assert_eq!(
            one.embedded.row(0).iter().cloned().collect::<Vec<_>>(),
            f.values()
        );
    }

    #[test]
    fn embedding_column_sums_are_window_correlation() {
        let f = synth_spectrum(SpectrumKind::SolarLike, 9, &SynthParams::default(), 4).unwrap();
        let n = 5;
        let e = shift_embed(&f, n).unwrap();
        // Direct full correlation of f with a length-n box.
        for c in 0..(n + f.len() - 1) {
            let direct: f64 = (0..n)
                .filter_map(|j| c.checked_sub(j).and_then(|i| f.values().get(i)))
                .sum();
            assert_abs_diff_eq!(e.embedded.column(c).sum(), direct, epsilon = 1e-14);
        }
    }

    proptest! {
        #[test]
        fn decomposition_identities_hold(k in 0.0f64..0.99, seed in any::<u64>(), idx in 0usize..3) {
            let n = [7, 11, 31][idx];
            let s = build_s_matrix(n).unwrap();
            let sub = make_sub_s(&s, &sample_intensity(n, k, seed).unwrap()).unwrap();
            prop_assert!(sub.identity_residual() < 1e-12);
            for i in 0..n {
                for j in 0..n {
                    let v = sub.s_snap[(i, j)];
                    prop_assert!((0.0..=1.0).contains(&v));
                    prop_assert_eq!(v == 0.0, !s.is_open(i, j));
                    prop_assert!(sub.s1[(i, j)] >= 0.0 && sub.s1[(i, j)] < 1.0);
                    prop_assert!(sub.s2[(i, j)] >= -1e-15 && sub.s2[(i, j)] <= sub.k + 1e-15);
                }
            }
            prop_assert!(sub.k <= k + 1e-15);
        }
    }
}
