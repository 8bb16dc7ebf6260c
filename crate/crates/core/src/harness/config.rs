//! Experiment configuration, read from `key = value` files.
//!
//! ```text
//! # defaults shown
//! order = 127
//! synth = solar_like          # or: spectrum = path/to/file.csv
//! length = 127                # defaults to order
//! spectrum_seed = 1
//! lines = 40:3:1, 90:5:0.5    # gaussian_lines only, center:width:amplitude
//! sigma = auto                # or a number
//! target_slit_db = 6.45       # used by sigma = auto
//! nondispersive_sigma = 0
//! k = 0.01:0.99:0.01          # or a list: 0.1, 0.5
//! trials = 100
//! seed = 2024
//! methods = slit, hts, snapshot, mms
//! mms_coding = ideal          # or calibrated
//! bound_k = 0.1, 0.3, 0.5, 0.9
//! bound_trials = 20
//! bound_noise_columns = 32
//! example_k = 0.1, 0.5
//! out = results
//! threads = 0                 # 0 = all cores
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::Method;
use crate::codes::build_s_matrix;
use crate::scene::{GaussianLine, SpectrumKind, SynthParams};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumSource {
    Synthetic {
        kind: SpectrumKind,
        params: SynthParams,
        seed: u64,
    },
    File(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaSetting {
    /// Pick sigma so the slit baseline lands near this mean SNR.
    Auto {
        target_slit_db: f64,
    },
    Fixed(f64),
}

/// Which coding matrix the MMS decoder is handed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MmsCoding {
    /// The ideal binary S-matrix (model mismatch).
    Ideal,
    /// The calibrated sub-S-matrix (ablation).
    Calibrated,
}

pub const DEFAULT_TARGET_SLIT_DB: f64 = 6.45;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub order: usize,
    pub spectrum: SpectrumSource,
    /// Spectrum length for synthetic spectra; `None` means `order`.
    pub length: Option<usize>,
    pub sigma: SigmaSetting,
    pub nondispersive_sigma: f64,
    pub k_grid: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub methods: Vec<Method>,
    pub mms_coding: MmsCoding,
    pub bound_k: Vec<f64>,
    pub bound_trials: usize,
    pub bound_noise_columns: usize,
    pub example_k: Vec<f64>,
    pub out_dir: PathBuf,
    /// Worker threads; 0 uses every core.
    pub threads: usize,
}

/// `0.01, 0.02, ..., 0.99`
pub fn default_k_grid() -> Vec<f64> {
    (1..=99).map(|i| i as f64 / 100.0).collect()
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            order: 127,
            spectrum: SpectrumSource::Synthetic {
                kind: SpectrumKind::SolarLike,
                params: SynthParams::default(),
                seed: 1,
            },
            length: None,
            sigma: SigmaSetting::Auto {
                target_slit_db: DEFAULT_TARGET_SLIT_DB,
            },
            nondispersive_sigma: 0.0,
            k_grid: default_k_grid(),
            trials: 100,
            seed: 2024,
            methods: Method::ALL.to_vec(),
            mms_coding: MmsCoding::Ideal,
            bound_k: vec![0.1, 0.3, 0.5, 0.9],
            bound_trials: 20,
            bound_noise_columns: 32,
            example_k: vec![0.1, 0.5],
            out_dir: PathBuf::from("results"),
            threads: 0,
        }
    }
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    v.trim()
        .parse()
        .map_err(|_| Error::InvalidParameter(format!("{key}: not a number: {v:?}")))
}

fn parse_usize(key: &str, v: &str) -> Result<usize> {
    v.trim()
        .parse()
        .map_err(|_| Error::InvalidParameter(format!("{key}: not a non-negative integer: {v:?}")))
}

fn parse_list<T>(v: &str, item: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(item)
        .collect()
}

/// `start:stop:step` (inclusive, values rounded to 1e-12) or a comma list.
pub fn parse_k_grid(v: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = v.split(':').collect();
    if parts.len() == 3 {
        let (a, b, step) = (
            parse_f64("k", parts[0])?,
            parse_f64("k", parts[1])?,
            parse_f64("k", parts[2])?,
        );
        if !(step > 0.0) || b < a {
            return Err(Error::InvalidParameter(format!("k: bad range {v:?}")));
        }
        let count = ((b - a) / step + 1e-9).floor() as usize + 1;
        return Ok((0..count)
            .map(|i| ((a + i as f64 * step) * 1e12).round() / 1e12)
            .collect());
    }
    parse_list(v, |s| parse_f64("k", s))
}

impl ExperimentConfig {
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        let mut synth_kind = None;
        let mut synth_params = SynthParams::default();
        let mut spectrum_seed = 1;
        let mut spectrum_file = None;
        let mut target = DEFAULT_TARGET_SLIT_DB;
        let mut sigma_fixed = None;

        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let wrap = |e: Error| Error::Parse {
                path: source.to_string(),
                line: idx + 1,
                message: e.to_string(),
            };
            let (key, value) = line.split_once('=').ok_or_else(|| {
                wrap(Error::InvalidParameter(format!(
                    "expected key = value, got {line:?}"
                )))
            })?;
            let (key, value) = (key.trim(), value.trim());
            let applied: Result<()> = (|| {
                match key {
                    "order" => cfg.order = parse_usize(key, value)?,
                    "synth" => synth_kind = Some(value.parse::<SpectrumKind>()?),
                    "spectrum" => spectrum_file = Some(PathBuf::from(value)),
                    "length" => cfg.length = Some(parse_usize(key, value)?),
                    "spectrum_seed" => spectrum_seed = parse_usize(key, value)? as u64,
                    "lines" => {
                        synth_params.lines = parse_list(value, |s| s.parse::<GaussianLine>())?
                    }
                    "temperature_k" => synth_params.temperature_k = parse_f64(key, value)?,
                    "lambda_min_nm" => synth_params.lambda_min_nm = parse_f64(key, value)?,
                    "lambda_max_nm" => synth_params.lambda_max_nm = parse_f64(key, value)?,
                    "sigma" => {
                        sigma_fixed = if value.eq_ignore_ascii_case("auto") {
                            None
                        } else {
                            Some(parse_f64(key, value)?)
                        }
                    }
                    "target_slit_db" => target = parse_f64(key, value)?,
                    "nondispersive_sigma" => cfg.nondispersive_sigma = parse_f64(key, value)?,
                    "k" | "k_grid" => cfg.k_grid = parse_k_grid(value)?,
                    "trials" => cfg.trials = parse_usize(key, value)?,
                    "seed" => {
                        cfg.seed = value.parse().map_err(|_| {
                            Error::InvalidParameter(format!("seed: bad value {value:?}"))
                        })?
                    }
                    "methods" => cfg.methods = parse_list(value, |s| s.parse::<Method>())?,
                    "mms_coding" => {
                        cfg.mms_coding = match value {
                            "ideal" => MmsCoding::Ideal,
                            "calibrated" => MmsCoding::Calibrated,
                            other => {
                                return Err(Error::InvalidParameter(format!(
                                    "mms_coding: expected ideal or calibrated, got {other:?}"
                                )))
                            }
                        }
                    }
                    "bound_k" => cfg.bound_k = parse_list(value, |s| parse_f64(key, s))?,
                    "bound_trials" => cfg.bound_trials = parse_usize(key, value)?,
                    "bound_noise_columns" => cfg.bound_noise_columns = parse_usize(key, value)?,
                    "example_k" => cfg.example_k = parse_list(value, |s| parse_f64(key, s))?,
                    "out" => cfg.out_dir = PathBuf::from(value),
                    "threads" => cfg.threads = parse_usize(key, value)?,
                    other => return Err(Error::InvalidParameter(format!("unknown key {other:?}"))),
                }
                Ok(())
            })();
            applied.map_err(wrap)?;
        }

        cfg.spectrum = match (spectrum_file, synth_kind) {
            (Some(_), Some(_)) => {
                return Err(Error::InvalidParameter(
                    "set either spectrum or synth, not both".into(),
                ))
            }
            (Some(path), None) => SpectrumSource::File(path),
            (None, kind) => SpectrumSource::Synthetic {
                kind: kind.unwrap_or(SpectrumKind::SolarLike),
                params: synth_params,
                seed: spectrum_seed,
            },
        };
        cfg.sigma = match sigma_fixed {
            Some(s) => SigmaSetting::Fixed(s),
            None => SigmaSetting::Auto {
                target_slit_db: target,
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text, &path.display().to_string())?;
        // Relative spectrum paths resolve against the config file.
        if let SpectrumSource::File(p) = &mut cfg.spectrum {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        build_s_matrix(self.order)?;
        if let Some(k) = self.k_grid.iter().find(|k| !(0.0..1.0).contains(*k)) {
            return Err(Error::InvalidParameter(format!(
                "k grid value {k} outside [0, 1)"
            )));
        }
        if self.k_grid.is_empty() {
            return Err(Error::InvalidParameter("k grid is empty".into()));
        }
        if self.trials == 0 {
            return Err(Error::InvalidParameter("trials must be at least 1".into()));
        }
        if let SigmaSetting::Fixed(s) = self.sigma {
            if !(s >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "sigma must be >= 0, got {s}"
                )));
            }
        }
        if !(self.nondispersive_sigma >= 0.0) {
            return Err(Error::InvalidParameter(
                "nondispersive_sigma must be >= 0".into(),
            ));
        }
        if matches!(self.length, Some(m) if m < 2) {
            return Err(Error::InvalidParameter("length must be at least 2".into()));
        }
        Ok(())
    }

    /// Render back to the `key = value` format.
    pub fn to_text(&self) -> String {
        let list = |v: &[f64]| {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(", ")
        };
        let mut out = format!("order = {}\n", self.order);
        match &self.spectrum {
            SpectrumSource::File(p) => out += &format!("spectrum = {}\n", p.display()),
            SpectrumSource::Synthetic { kind, params, seed } => {
                let name = match kind {
                    SpectrumKind::SolarLike => "solar_like",
                    SpectrumKind::GaussianLines => "gaussian_lines",
                    SpectrumKind::Flat => "flat",
                };
                out += &format!("synth = {name}\nspectrum_seed = {seed}\n");
                if !params.lines.is_empty() {
                    let lines: Vec<String> = params
                        .lines
                        .iter()
                        .map(|l| format!("{}:{}:{}", l.center, l.width, l.amplitude))
                        .collect();
                    out += &format!("lines = {}\n", lines.join(", "));
                }
                out += &format!(
                    "temperature_k = {}\nlambda_min_nm = {}\nlambda_max_nm = {}\n",
                    params.temperature_k, params.lambda_min_nm, params.lambda_max_nm
                );
            }
        }
        if let Some(m) = self.length {
            out += &format!("length = {m}\n");
        }
        match self.sigma {
            SigmaSetting::Auto { target_slit_db } => {
                out += &format!("sigma = auto\ntarget_slit_db = {target_slit_db}\n")
            }
            SigmaSetting::Fixed(s) => out += &format!("sigma = {s}\n"),
        }
        let methods: Vec<&str> = self.methods.iter().map(|m| m.as_str()).collect();
        out += &format!(
            "nondispersive_sigma = {}\nk = {}\ntrials = {}\nseed = {}\nmethods = {}\nmms_coding = {}\n",
            self.nondispersive_sigma,
            list(&self.k_grid),
            self.trials,
            self.seed,
            methods.join(", "),
            match self.mms_coding {
                MmsCoding::Ideal => "ideal",
                MmsCoding::Calibrated => "calibrated",
            }
        );
        out += &format!(
            "bound_k = {}\nbound_trials = {}\nbound_noise_columns = {}\nexample_k = {}\nout = {}\nthreads = {}\n",
            list(&self.bound_k),
            self.bound_trials,
            self.bound_noise_columns,
            list(&self.example_k),
            self.out_dir.display(),
            self.threads
        );
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_protocol() {
        let cfg = ExperimentConfig::default();
        assert_eq!(cfg.order, 127);
        assert_eq!(cfg.trials, 100);
        assert_eq!(cfg.k_grid.len(), 99);
        assert_eq!(cfg.k_grid[0], 0.01);
        assert_eq!(cfg.k_grid[6], 0.07);
        assert_eq!(cfg.k_grid[98], 0.99);
        assert_eq!(cfg.methods.len(), 4);
    }

    #[test]
    fn parses_file_format() {
        let text = "# test\norder = 31\nk = 0.1, 0.5  # two values\ntrials=3\nseed = 9\nmethods = hts,snapshot\nsigma = 0.2\n";
        let cfg = ExperimentConfig::parse(text, "c").unwrap();
        assert_eq!(cfg.order, 31);
        assert_eq!(cfg.k_grid, vec![0.1, 0.5]);
        assert_eq!(cfg.trials, 3);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.methods, vec![Method::Hts, Method::Snapshot]);
        assert_eq!(cfg.sigma, SigmaSetting::Fixed(0.2));
    }

    #[test]
    fn range_grid_matches_default() {
        assert_eq!(parse_k_grid("0.01:0.99:0.01").unwrap(), default_k_grid());
        assert_eq!(parse_k_grid("0:0.5:0.25").unwrap(), vec![0.0, 0.25, 0.5]);
    }

    #[test]
    fn rejects_bad_input() {
        for bad in [
            "order = 8",
            "k = 1.0",
            "trials = 0",
            "bogus = 1",
            "no equals",
            "methods = foo",
            "sigma = -1",
        ] {
            assert!(ExperimentConfig::parse(bad, "c").is_err(), "{bad}");
        }
        let err = ExperimentConfig::parse("order = 7\nfoo = 1\n", "cfg.txt").unwrap_err();
        assert!(err.to_string().starts_with("cfg.txt: line 2"), "{err}");
    }

    #[test]
    fn text_round_trip() {
        let mut cfg = ExperimentConfig {
            order: 31,
            k_grid: vec![0.1, 0.25],
            sigma: SigmaSetting::Fixed(0.3),
            ..Default::default()
        };
        cfg.spectrum = SpectrumSource::Synthetic {
            kind: SpectrumKind::GaussianLines,
            params: SynthParams {
                lines: vec!["10:2:1".parse().unwrap()],
                ..Default::default()
            },
            seed: 4,
        };
        let back = ExperimentConfig::parse(&cfg.to_text(), "t").unwrap();
        assert_eq!(back, cfg);
    }
}
