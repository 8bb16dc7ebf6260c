use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};

use hadamux::harness::{load_result, trial_measurements, Experiment, SigmaSetting, SpectrumSource};
use hadamux::io::{read_matrix, write_matrix, write_text};
use hadamux::scene::SynthParams;
use hadamux::seed;
use hadamux::{
    build_s_matrix, decode_inverse, decode_nnls, emit_report, run_sweep, validate_s_matrix,
    ExperimentConfig, SpectrumKind, SweepResult,
};

/// Snapshot Hadamard-transform spectrometry simulator.
#[derive(Parser)]
#[command(name = "hadamux", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write an S-matrix as CSV of 0/1.
    GenMatrix {
        #[arg(long, default_value_t = 127)]
        order: usize,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run trials at a single k and print per-method summaries.
    Simulate {
        #[arg(long)]
        k: f64,
        /// Detector noise sigma; calibrated from the spectrum when omitted.
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long, default_value_t = 127)]
        order: usize,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
        /// Spectrum file (one or two CSV columns).
        #[arg(long, conflicts_with = "synth")]
        spectrum: Option<PathBuf>,
        /// Synthetic spectrum kind: solar_like, gaussian_lines or flat.
        #[arg(long)]
        synth: Option<SpectrumKind>,
        /// Synthetic spectrum length; defaults to the order.
        #[arg(long)]
        length: Option<usize>,
        #[arg(long, default_value_t = 1)]
        trials: usize,
        /// Write the full report here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write trial 0's measurement matrices here as CSV.
        #[arg(long)]
        dump_measurements: Option<PathBuf>,
    },
    /// Run a configured k sweep and write its report.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Regenerate report files from a previous sweep directory.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a CSV matrix against the S-matrix invariants.
    Validate {
        #[arg(long)]
        matrix: PathBuf,
    },
    /// Decode a measurement matrix with a coding matrix.
    Decode {
        #[arg(long)]
        measurement: PathBuf,
        #[arg(long)]
        coding: PathBuf,
        #[arg(long, value_enum, default_value_t = DecodeKind::Inverse)]
        method: DecodeKind,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum DecodeKind {
    Inverse,
    Nnls,
}

/// Exit status for a failed command: 2 for I/O, 1 otherwise.
fn status_for(err: &anyhow::Error) -> u8 {
    let io = err.chain().any(|e| {
        e.downcast_ref::<hadamux::Error>()
            .is_some_and(hadamux::Error::is_io)
            || e.downcast_ref::<std::io::Error>().is_some()
    });
    if io {
        2
    } else {
        1
    }
}

/// The error chain, skipping causes already quoted by the message above.
fn describe(err: &anyhow::Error) -> String {
    let mut text = err.to_string();
    for cause in err.chain().skip(1) {
        let c = cause.to_string();
        if !text.contains(&c) {
            text.push_str(": ");
            text.push_str(&c);
        }
    }
    text
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(status_for(&e))
        }
    }
}

fn emit(text: &str, out: Option<&Path>) -> anyhow::Result<()> {
    match out {
        Some(p) => write_text(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn print_summaries(r: &SweepResult) {
    println!("sigma = {:.6}", r.sigma);
    println!(
        "{:<9} {:>6} {:>8} {:>7} {:>17} {:>10}",
        "method", "k", "mean_db", "std_db", "population95", "consensus"
    );
    for s in &r.summaries {
        let Some(rows) = s.rows else {
            println!("{:<9} {:>6} (no finite samples)", s.method.as_str(), s.k);
            continue;
        };
        let consensus = s
            .consensus
            .map_or("-".to_string(), |c| format!("{:.2}", c.mean_db));
        println!(
            "{:<9} {:>6} {:>8.2} {:>7.2} {:>8.2}..{:<7.2} {:>10}",
            s.method.as_str(),
            s.k,
            rows.mean_db,
            rows.std_db,
            rows.population95.lo,
            rows.population95.hi,
            consensus
        );
    }
    for f in &r.failures {
        eprintln!("trial failed: k={} trial={}: {}", f.k, f.trial, f.message);
    }
}

fn run(command: Command) -> anyhow::Result<ExitCode> {
    match command {
        Command::GenMatrix { order, out } => {
            let s = build_s_matrix(order)?;
            emit(&s.to_string(), out.as_deref())?;
        }
        Command::Simulate {
            k,
            sigma,
            order,
            seed: master,
            spectrum,
            synth,
            length,
            trials,
            out,
            dump_measurements,
        } => {
            let source = match spectrum {
                Some(path) => SpectrumSource::File(path),
                None => SpectrumSource::Synthetic {
                    kind: synth.unwrap_or(SpectrumKind::SolarLike),
                    params: SynthParams::default(),
                    seed: 1,
                },
            };
            let config = ExperimentConfig {
                order,
                spectrum: source,
                length,
                sigma: sigma.map_or(ExperimentConfig::default().sigma, SigmaSetting::Fixed),
                k_grid: vec![k],
                trials,
                seed: master,
                bound_k: vec![k],
                bound_trials: trials.min(20),
                example_k: vec![k],
                out_dir: out.clone().unwrap_or_else(|| "results".into()),
                ..ExperimentConfig::default()
            };
            config.validate()?;
            if let Some(dir) = dump_measurements {
                let exp = Experiment::prepare(&config)?;
                let ts = seed::trial_seed(master, 0, trials, 0);
                let outcome = trial_measurements(&exp, k, 0, ts)?;
                std::fs::create_dir_all(&dir)
                    .with_context(|| format!("creating {}", dir.display()))?;
                for (name, m) in &outcome.measurements {
                    write_matrix(dir.join(format!("{name}.csv")), m)?;
                }
                println!(
                    "wrote {} measurement files to {}",
                    outcome.measurements.len(),
                    dir.display()
                );
            }
            let result = run_sweep(&config)?;
            print_summaries(&result);
            if let Some(dir) = out {
                emit_report(&result, &dir)?;
                println!("report written to {}", dir.display());
            }
        }
        Command::Sweep { config, out } => {
            let mut config = ExperimentConfig::load(&config)?;
            if let Some(out) = out {
                config.out_dir = out;
            }
            let result = run_sweep(&config)?;
            let files = emit_report(&result, &config.out_dir)?;
            println!(
                "{} k values x {} trials in {:.1} s; {} files written to {}",
                config.k_grid.len(),
                config.trials,
                result.elapsed_secs,
                files.len(),
                config.out_dir.display()
            );
            if !result.failures.is_empty() {
                eprintln!("{} trials failed; see report.txt", result.failures.len());
            }
        }
        Command::Report { input, out } => {
            let result = load_result(&input)?;
            let files = emit_report(&result, &out)?;
            println!("{} files written to {}", files.len(), out.display());
        }
        Command::Validate { matrix } => {
            let m = read_matrix(&matrix)?;
            let report = validate_s_matrix(&m);
            println!("{report}");
            if !report.passed() {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Decode {
            measurement,
            coding,
            method,
            out,
        } => {
            let g = read_matrix(&measurement)?;
            let a = read_matrix(&coding)?;
            let est = match method {
                DecodeKind::Inverse => decode_inverse(&a, &g)?,
                DecodeKind::Nnls => decode_nnls(&a, &g)?,
            };
            emit(&hadamux::io::format_matrix(&est.estimate), out.as_deref())?;
            if !est.diagnostics.capped_columns.is_empty() {
                eprintln!(
                    "NNLS iteration cap hit on {} columns",
                    est.diagnostics.capped_columns.len()
                );
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
