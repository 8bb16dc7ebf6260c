//! Monte Carlo trials and k-sweeps.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, MmsCoding, SigmaSetting, SpectrumSource};
use crate::analysis::{eval_bound, snr_db, summarize_values, Method, RowTag, SnrSample, Summary};
use crate::codes::{build_s_matrix, SMatrix};
use crate::forward::{add_noise, measure_hts, measure_slit, measure_snapshot, NoiseSpec};
use crate::recon::{
    calibrate_sub_s, consensus_spectrum, decode_inverse, decode_nnls, decode_with_s, shift_extract,
    RowSpectra,
};
use crate::scene::{
    load_spectrum, make_sub_s, sample_intensity, shift_embed, synth_spectrum, EmbeddedScene,
    Spectrum,
};
use crate::seed::{self, Part};
use crate::{Error, Matrix, Result};

/// Detector sigma that puts the expected slit SNR at `target_db`:
/// `σ² = mean(f²) / 10^(target/10)`.
pub fn calibrate_sigma(f: &Spectrum, target_db: f64) -> f64 {
    let power = f.energy() / f.len() as f64;
    (power / 10f64.powf(target_db / 10.0)).sqrt()
}

/// Everything a trial needs that does not depend on `k` or the seed.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub s: SMatrix,
    pub spectrum: Spectrum,
    pub scene: EmbeddedScene,
    pub sigma: f64,
}

impl Experiment {
    pub fn prepare(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let s = build_s_matrix(config.order)?;
        let spectrum = match &config.spectrum {
            SpectrumSource::Synthetic { kind, params, seed } => {
                synth_spectrum(*kind, config.length.unwrap_or(config.order), params, *seed)?
            }
            SpectrumSource::File(path) => load_spectrum(path)?,
        };
        let scene = shift_embed(&spectrum, config.order)?;
        let sigma = match config.sigma {
            SigmaSetting::Fixed(s) => s,
            SigmaSetting::Auto { target_slit_db } => calibrate_sigma(&spectrum, target_slit_db),
        };
        Ok(Experiment {
            config: config.clone(),
            s,
            spectrum,
            scene,
            sigma,
        })
    }

    fn runs(&self, m: Method) -> bool {
        self.config.methods.contains(&m)
    }
}

/// Full output of one trial, including the reconstructed spectra.
#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub samples: Vec<SnrSample>,
    /// Extracted rows per method, in `Method` order.
    pub rows: Vec<(Method, RowSpectra)>,
    pub realized_k: f64,
    pub capped_nnls_columns: usize,
    /// Raw measurements by name; only filled by [`trial_measurements`].
    pub measurements: Vec<(&'static str, Matrix)>,
}

fn score(
    truth: &[f64],
    method: Method,
    k: f64,
    trial: usize,
    rows: &RowSpectra,
    out: &mut Vec<SnrSample>,
) -> Result<()> {
    for (j, r) in rows.rows.iter().enumerate() {
        out.push(SnrSample {
            method,
            k,
            trial,
            row: RowTag::Row(j),
            snr_db: snr_db(truth, r)?,
        });
    }
    out.push(SnrSample {
        method,
        k,
        trial,
        row: RowTag::Consensus,
        snr_db: snr_db(truth, &consensus_spectrum(rows))?,
    });
    Ok(())
}

/// One scene and noise realization evaluated under every configured method.
///
/// All methods share the spectrum and intensity field; snapshot and MMS
/// decode the very same dispersive frame.
pub fn run_trial_detailed(
    exp: &Experiment,
    k: f64,
    trial: usize,
    trial_seed: u64,
) -> Result<TrialOutcome> {
    trial_inner(exp, k, trial, trial_seed, false)
}

/// Re-run a trial and keep every measurement matrix, for debugging dumps.
pub fn trial_measurements(
    exp: &Experiment,
    k: f64,
    trial: usize,
    trial_seed: u64,
) -> Result<TrialOutcome> {
    trial_inner(exp, k, trial, trial_seed, true)
}

fn trial_inner(
    exp: &Experiment,
    k: f64,
    trial: usize,
    trial_seed: u64,
    keep: bool,
) -> Result<TrialOutcome> {
    let n = exp.s.order();
    let truth = exp.spectrum.values();
    let field = sample_intensity(n, k, seed::part_seed(trial_seed, Part::Intensity))?;
    let sub = make_sub_s(&exp.s, &field)?;
    let mut samples = Vec::with_capacity(4 * (n + 1));
    let mut rows_out = Vec::new();
    let mut capped = 0;
    let mut measurements = Vec::new();
    if keep {
        measurements.push(("s_snap_true", sub.s_snap.clone()));
    }

    if exp.runs(Method::Slit) {
        let base = seed::part_seed(trial_seed, Part::Slit);
        let rows = RowSpectra {
            rows: (0..n)
                .map(|j| {
                    let noise = NoiseSpec {
                        sigma: exp.sigma,
                        seed: seed::derive(base, j as u64),
                    };
                    measure_slit(&exp.spectrum, &noise)
                        .data
                        .iter()
                        .cloned()
                        .collect()
                })
                .collect::<Vec<Vec<f64>>>(),
            source_rows: (0..n).collect(),
        };
        if keep {
            let m = exp.spectrum.len();
            measurements.push(("slit", Matrix::from_fn(n, m, |i, j| rows.rows[i][j])));
        }
        score(truth, Method::Slit, k, trial, &rows, &mut samples)?;
        rows_out.push((Method::Slit, rows));
    }

    if exp.runs(Method::Hts) {
        let noise = NoiseSpec {
            sigma: exp.sigma,
            seed: seed::part_seed(trial_seed, Part::Hts),
        };
        let g = measure_hts(&exp.s, &exp.scene, &noise)?;
        if keep {
            measurements.push(("hts", g.data.clone()));
        }
        let rows = shift_extract(&decode_with_s(&exp.s, &g.data).estimate)?;
        score(truth, Method::Hts, k, trial, &rows, &mut samples)?;
        rows_out.push((Method::Hts, rows));
    }

    if exp.runs(Method::Snapshot) || exp.runs(Method::Mms) {
        let dispersive = NoiseSpec {
            sigma: exp.sigma,
            seed: seed::part_seed(trial_seed, Part::Dispersive),
        };
        let nondispersive = NoiseSpec {
            sigma: exp.config.nondispersive_sigma,
            seed: seed::part_seed(trial_seed, Part::NonDispersive),
        };
        let frame = measure_snapshot(&sub, &exp.scene, &dispersive, &nondispersive)?;
        let calibrated = calibrate_sub_s(&frame.non_dispersive, &exp.s)?;
        if keep {
            measurements.push(("dispersive", frame.dispersive.data.clone()));
            measurements.push(("non_dispersive", frame.non_dispersive.clone()));
            measurements.push(("s_snap_calibrated", calibrated.s_snap.clone()));
        }

        if exp.runs(Method::Snapshot) {
            let est = decode_inverse(&calibrated.s_snap, &frame.dispersive.data)?;
            let rows = shift_extract(&est.estimate)?;
            score(truth, Method::Snapshot, k, trial, &rows, &mut samples)?;
            rows_out.push((Method::Snapshot, rows));
        }
        if exp.runs(Method::Mms) {
            let coding = match exp.config.mms_coding {
                MmsCoding::Ideal => exp.s.as_real(),
                MmsCoding::Calibrated => &calibrated.s_snap,
            };
            let est = decode_nnls(coding, &frame.dispersive.data)?;
            capped += est.diagnostics.capped_columns.len();
            let rows = shift_extract(&est.estimate)?;
            score(truth, Method::Mms, k, trial, &rows, &mut samples)?;
            rows_out.push((Method::Mms, rows));
        }
    }

    Ok(TrialOutcome {
        samples,
        rows: rows_out,
        realized_k: sub.k,
        capped_nnls_columns: capped,
        measurements,
    })
}

/// Per-row and consensus SNR samples for one trial.
pub fn run_trial(
    exp: &Experiment,
    k: f64,
    trial: usize,
    trial_seed: u64,
) -> Result<Vec<SnrSample>> {
    run_trial_detailed(exp, k, trial, trial_seed)
        .map(|o| o.samples)
        .map_err(|e| Error::Trial {
            k,
            trial,
            source: Box::new(e),
        })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub k: f64,
    /// Over every extracted row of every trial.
    pub rows: Option<Summary>,
    /// Over the per-trial consensus spectra.
    pub consensus: Option<Summary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundAggregate {
    pub k: f64,
    pub instances: usize,
    pub mean_realized_k: f64,
    pub mean_empirical_snr_db: f64,
    pub mean_bound_db: f64,
    pub mean_degradation_db: f64,
    pub predicted_degradation_db: f64,
    pub max_identity_residual: f64,
}

/// Truth and per-method spectra from trial 0 at one `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleSpectra {
    pub k: f64,
    pub truth: Vec<f64>,
    pub wavelengths: Option<Vec<f64>>,
    /// Consensus spectrum for slit/HTS/snapshot; the median-SNR row for MMS.
    pub methods: Vec<(Method, Vec<f64>)>,
    pub mms_row: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialFailure {
    pub k: f64,
    pub trial: usize,
    pub message: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepResult {
    pub config: ExperimentConfig,
    pub sigma: f64,
    pub seed_rule: String,
    pub spectrum: Spectrum,
    /// Sorted by (method, k, trial, row). Persisted separately as CSV.
    #[serde(skip)]
    pub samples: Vec<SnrSample>,
    pub summaries: Vec<MethodSummary>,
    pub bounds: Vec<BoundAggregate>,
    pub examples: Vec<ExampleSpectra>,
    pub failures: Vec<TrialFailure>,
    pub capped_nnls_columns: usize,
    pub elapsed_secs: f64,
    pub threads: usize,
}

impl SweepResult {
    pub fn summary(&self, method: Method, k: f64) -> Option<&MethodSummary> {
        self.summaries
            .iter()
            .find(|s| s.method == method && s.k == k)
    }

    /// Finite and infinite per-row samples for one `(method, k)`.
    pub fn row_samples(&self, method: Method, k: f64) -> impl Iterator<Item = &SnrSample> {
        self.samples
            .iter()
            .filter(move |s| s.method == method && s.k == k && s.row != RowTag::Consensus)
    }
}

fn summarize_group(samples: &[SnrSample], method: Method, k: f64) -> MethodSummary {
    let pick = |consensus: bool| -> Vec<f64> {
        samples
            .iter()
            .filter(|s| s.method == method && s.k == k && (s.row == RowTag::Consensus) == consensus)
            .map(|s| s.snr_db)
            .collect()
    };
    MethodSummary {
        method,
        k,
        rows: summarize_values(&pick(false)).ok(),
        consensus: summarize_values(&pick(true)).ok(),
    }
}

fn median_row(outcome: &TrialOutcome, method: Method) -> Option<usize> {
    let mut scored: Vec<(f64, usize)> = outcome
        .samples
        .iter()
        .filter(|s| s.method == method)
        .filter_map(|s| match s.row {
            RowTag::Row(j) => Some((s.snr_db, j)),
            RowTag::Consensus => None,
        })
        .collect();
    if scored.is_empty() {
        return None;
    }
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    Some(scored[(scored.len() - 1) / 2].1)
}

fn example_from(exp: &Experiment, k: f64, outcome: &TrialOutcome) -> ExampleSpectra {
    let mms_row = median_row(outcome, Method::Mms);
    let methods = outcome
        .rows
        .iter()
        .map(|(m, rows)| {
            let spectrum = match (m, mms_row) {
                (Method::Mms, Some(j)) => rows.rows[j].clone(),
                _ => consensus_spectrum(rows),
            };
            (*m, spectrum)
        })
        .collect();
    ExampleSpectra {
        k,
        truth: exp.spectrum.values().to_vec(),
        wavelengths: exp.spectrum.wavelengths().map(<[f64]>::to_vec),
        methods,
        mms_row,
    }
}

fn bound_aggregate(exp: &Experiment, k_index: usize, k: f64) -> Result<BoundAggregate> {
    let cfg = &exp.config;
    let n = exp.s.order();
    let count = cfg.bound_trials.min(cfg.trials).max(1);
    let reports = (0..count)
        .into_par_iter()
        .map(|t| {
            let ts = seed::trial_seed(cfg.seed, k_index, cfg.trials, t);
            let field = sample_intensity(n, k, seed::part_seed(ts, Part::Intensity))?;
            let sub = make_sub_s(&exp.s, &field)?;
            let noise = add_noise(
                &Matrix::zeros(n, cfg.bound_noise_columns.max(1)),
                &NoiseSpec {
                    sigma: 1.0,
                    seed: seed::part_seed(ts, Part::Bound),
                },
            );
            eval_bound(&sub, &noise)
        })
        .collect::<Result<Vec<_>>>()?;
    let c = reports.len() as f64;
    let mean = |f: fn(&crate::analysis::BoundReport) -> f64| reports.iter().map(f).sum::<f64>() / c;
    Ok(BoundAggregate {
        k,
        instances: reports.len(),
        mean_realized_k: mean(|r| r.k),
        mean_empirical_snr_db: mean(|r| r.empirical_snr_db),
        mean_bound_db: mean(|r| r.bound_db),
        mean_degradation_db: mean(|r| r.degradation_db),
        predicted_degradation_db: crate::analysis::predicted_degradation_db(k),
        max_identity_residual: reports
            .iter()
            .map(|r| r.identity_residual)
            .fold(0.0, f64::max),
    })
}

/// A trial's samples, its example spectra if any, and capped NNLS columns.
type Reduced = (Vec<SnrSample>, Option<ExampleSpectra>, usize);

/// Run the configured k grid × trials.
///
/// Trial `t` at grid index `i` is seeded with
/// `seed::trial_seed(master, i, trials, t)`. Failed trials are recorded and
/// skipped.
pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepResult> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    pool.install(|| sweep_in_pool(config))
}

fn sweep_in_pool(config: &ExperimentConfig) -> Result<SweepResult> {
    let started = Instant::now();
    let exp = Experiment::prepare(config)?;
    let tasks: Vec<(usize, f64, usize)> = config
        .k_grid
        .iter()
        .enumerate()
        .flat_map(|(ki, &k)| (0..config.trials).map(move |t| (ki, k, t)))
        .collect();

    // Reduce each trial to its samples inside the parallel map; only the
    // example trials keep their spectra.
    let outcomes: Vec<(f64, usize, Result<Reduced>)> = tasks
        .into_par_iter()
        .map(|(ki, k, t)| {
            let ts = seed::trial_seed(config.seed, ki, config.trials, t);
            let reduced = run_trial_detailed(&exp, k, t, ts).map(|o| {
                let example =
                    (t == 0 && config.example_k.contains(&k)).then(|| example_from(&exp, k, &o));
                (o.samples, example, o.capped_nnls_columns)
            });
            (k, t, reduced)
        })
        .collect();

    let mut samples =
        Vec::with_capacity(outcomes.len() * config.methods.len() * (config.order + 1));
    let mut failures = Vec::new();
    let mut examples = Vec::new();
    let mut capped = 0;
    for (k, t, outcome) in outcomes {
        match outcome {
            Ok((s, example, c)) => {
                examples.extend(example);
                capped += c;
                samples.extend(s);
            }
            Err(e) => failures.push(TrialFailure {
                k,
                trial: t,
                message: e.to_string(),
            }),
        }
    }
    // Already in (k, trial, row) order; a stable sort on method completes
    // the (method, k, trial, row) ordering.
    samples.sort_by_key(|s| s.method);

    let mut summaries = Vec::new();
    for &method in Method::ALL.iter().filter(|m| config.methods.contains(m)) {
        let start = samples.partition_point(|s| s.method < method);
        let end = samples.partition_point(|s| s.method <= method);
        let group = &samples[start..end];
        for &k in &config.k_grid {
            let lo = group.partition_point(|s| s.k < k);
            let hi = group.partition_point(|s| s.k <= k);
            summaries.push(summarize_group(&group[lo..hi], method, k));
        }
    }

    let bounds = config
        .bound_k
        .iter()
        .filter_map(|k| config.k_grid.iter().position(|g| g == k).map(|i| (i, *k)))
        .map(|(i, k)| bound_aggregate(&exp, i, k))
        .collect::<Result<Vec<_>>>()?;

    Ok(SweepResult {
        config: config.clone(),
        sigma: exp.sigma,
        seed_rule: seed::RULE.to_string(),
        spectrum: exp.spectrum.clone(),
        samples,
        summaries,
        bounds,
        examples,
        failures,
        capped_nnls_columns: capped,
        elapsed_secs: started.elapsed().as_secs_f64(),
        threads: rayon::current_num_threads(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{SpectrumKind, SynthParams};

    fn small(order: usize) -> ExperimentConfig {
        ExperimentConfig {
            order,
            k_grid: vec![0.1, 0.5],
            trials: 3,
            bound_trials: 2,
            bound_noise_columns: 8,
            ..Default::default()
        }
    }

    #[test]
    fn sigma_calibration_formula() {
        let flat = synth_spectrum(SpectrumKind::Flat, 10, &SynthParams::default(), 0).unwrap();
        assert!((calibrate_sigma(&flat, 20.0) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn noiseless_undisturbed_trial_is_exact() {
        let cfg = ExperimentConfig {
            sigma: SigmaSetting::Fixed(0.0),
            ..small(31)
        };
        let exp = Experiment::prepare(&cfg).unwrap();
        let samples = run_trial(&exp, 0.0, 0, 17).unwrap();
        for s in &samples {
            match s.method {
                Method::Mms => assert!(s.snr_db > 150.0, "{s:?}"),
                _ => assert_eq!(s.snr_db, f64::INFINITY, "{s:?}"),
            }
        }
        assert_eq!(samples.len(), 4 * 32);
    }

    #[test]
    fn noiseless_disturbed_trial_separates_snapshot_from_mms() {
        let cfg = ExperimentConfig {
            sigma: SigmaSetting::Fixed(0.0),
            ..small(31)
        };
        let exp = Experiment::prepare(&cfg).unwrap();
        let samples = run_trial(&exp, 0.5, 0, 3).unwrap();
        let min = |m: Method| {
            samples
                .iter()
                .filter(|s| s.method == m)
                .map(|s| s.snr_db)
                .fold(f64::INFINITY, f64::min)
        };
        let max = |m: Method| {
            samples
                .iter()
                .filter(|s| s.method == m)
                .map(|s| s.snr_db)
                .fold(f64::NEG_INFINITY, f64::max)
        };
        assert!(min(Method::Snapshot) > 200.0);
        assert!(max(Method::Mms).is_finite() && max(Method::Mms) < 60.0);
    }

    #[test]
    fn trial_is_deterministic() {
        let exp = Experiment::prepare(&small(31)).unwrap();
        let a = run_trial(&exp, 0.3, 1, 99).unwrap();
        let b = run_trial(&exp, 0.3, 1, 99).unwrap();
        assert_eq!(a, b);
        let c = run_trial(&exp, 0.3, 1, 100).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn sweep_counts_and_order() {
        let r = run_sweep(&small(31)).unwrap();
        for m in Method::ALL {
            for k in [0.1, 0.5] {
                assert_eq!(r.row_samples(m, k).count(), 3 * 31);
                let s = r.summary(m, k).unwrap();
                assert_eq!(s.rows.unwrap().n, 3 * 31);
                assert_eq!(s.consensus.unwrap().n, 3);
            }
        }
        let keys: Vec<_> = r
            .samples
            .iter()
            .map(|s| (s.method, s.k.to_bits(), s.trial, s.row))
            .collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        assert_eq!(r.bounds.len(), 2);
        assert!(r.bounds.iter().all(|b| b.max_identity_residual < 1e-9));
        assert_eq!(r.examples.len(), 2);
        assert!(r.failures.is_empty());
    }

    #[test]
    fn thread_count_does_not_change_samples() {
        let one = run_sweep(&ExperimentConfig {
            threads: 1,
            ..small(11)
        })
        .unwrap();
        let many = run_sweep(&ExperimentConfig {
            threads: 3,
            ..small(11)
        })
        .unwrap();
        assert_eq!(one.samples, many.samples);
    }

    #[test]
    fn failing_trials_are_recorded() {
        let cfg = ExperimentConfig {
            spectrum: SpectrumSource::File("/nonexistent/spectrum.csv".into()),
            ..small(7)
        };
        assert!(run_sweep(&cfg).unwrap_err().is_io());
    }
}
