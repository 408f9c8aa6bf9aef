//! Command line front end: scenario runs, one-shot DOA estimates, beam
//! pattern export, diversity reports, and the summary cross-check.
//!
//! Exit codes: 0 on success, 2 for configuration/validation errors, 3 for
//! runtime estimation failures.

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use num_complex::Complex64;

use smartap_core::array::{synthesize_snapshots, ArrayGeometry, SourceSpec};
use smartap_core::beam::{beam_pattern, null_steering_weights};
use smartap_core::diversity::{analyze, generate_correlated_rayleigh};
use smartap_core::doa::{estimate_doa, DoaMethod, DoaOptions};
use smartap_core::report::{emit_reports, recompute_from_dir, to_pretty_json};
use smartap_core::scenario::{run_scenario, Scenario};
use smartap_core::{Error, Result};

#[derive(Parser)]
#[command(
    name = "smartap",
    about = "Deterministic smart-antenna access point simulator",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and write events.log, power.csv, summary.json,
    /// and beam_snapshots.csv to the output directory.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Synthesize one noisy scene and estimate the source azimuth.
    Doa {
        /// Estimator: music or pencil.
        #[arg(long, value_parser = parse_method)]
        method: DoaMethod,
        #[arg(long, default_value_t = 8)]
        elements: usize,
        /// Element spacing in wavelengths.
        #[arg(long, default_value_t = 0.5)]
        spacing: f64,
        /// True source azimuth in degrees.
        #[arg(long)]
        theta: f64,
        /// Per-element SNR in dB.
        #[arg(long, default_value_t = 20.0)]
        snr: f64,
        #[arg(long, default_value_t = 256)]
        snapshots: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// MUSIC grid step in degrees.
        #[arg(long, default_value_t = 0.1)]
        grid_step: f64,
    },
    /// Print a beam pattern as CSV (azimuth_deg,gain_db) on stdout.
    Beam {
        #[arg(long, default_value_t = 8)]
        elements: usize,
        #[arg(long, default_value_t = 0.5)]
        spacing: f64,
        /// Beam target azimuth in degrees.
        #[arg(long)]
        target: f64,
        /// Null direction in degrees; repeat for several nulls.
        #[arg(long = "null")]
        nulls: Vec<f64>,
        /// Pattern grid step in degrees.
        #[arg(long, default_value_t = 0.01)]
        step: f64,
    },
    /// Generate a correlated Rayleigh pair and print its diversity report.
    Diversity {
        /// Target complex correlation magnitude (real-valued rho).
        #[arg(long)]
        rho: f64,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        /// Outage probability for the gain quantile.
        #[arg(long, default_value_t = 0.01)]
        outage: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also dump per-sample branch envelopes as CSV to this path.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Recompute a run summary from events.log + power.csv in a directory.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

fn parse_method(s: &str) -> std::result::Result<DoaMethod, String> {
    match s {
        "music" => Ok(DoaMethod::Music),
        "pencil" => Ok(DoaMethod::MatrixPencil),
        other => Err(format!("unknown method `{other}` (expected music|pencil)")),
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { scenario, out } => {
            let scenario = Scenario::from_json_file(&scenario)?;
            let result = run_scenario(&scenario)?;
            let paths = emit_reports(&result, &out)?;
            for p in paths {
                println!("wrote {}", p.display());
            }
            println!(
                "scenario={} ticks={} joins={} rejects={} updates={} beacons={} savings_ratio={:.6}",
                result.summary.name,
                result.summary.ticks,
                result.summary.joins,
                result.summary.rejects,
                result.summary.beam_updates,
                result.summary.beacons,
                result.summary.savings_ratio
            );
        }
        Command::Doa {
            method,
            elements,
            spacing,
            theta,
            snr,
            snapshots,
            seed,
            grid_step,
        } => {
            let geometry = ArrayGeometry::new(elements, spacing)?;
            let x = synthesize_snapshots(
                geometry,
                &[SourceSpec::gaussian(theta, snr)],
                snapshots,
                seed,
            )?;
            let options = DoaOptions {
                grid_step_deg: grid_step,
                ..DoaOptions::default()
            };
            let result = estimate_doa(&x, method, 1, options)?;
            let estimate = result.azimuths_deg[0];
            println!(
                "method={method} elements={elements} spacing={spacing} snr_db={snr} snapshots={snapshots} seed={seed} truth_deg={theta:.4} estimate_deg={estimate:.4} error_deg={:.4}{}",
                estimate - theta,
                if result.degraded { " degraded=true" } else { "" }
            );
        }
        Command::Beam {
            elements,
            spacing,
            target,
            nulls,
            step,
        } => {
            let geometry = ArrayGeometry::new(elements, spacing)?;
            let weights = null_steering_weights(geometry, target, &nulls)?;
            let pattern = beam_pattern(&weights, geometry, step)?;
            println!("azimuth_deg,gain_db");
            for (theta, gain) in pattern.azimuths_deg.iter().zip(&pattern.gain) {
                println!("{theta:.4},{:.4}", 10.0 * gain.max(1e-30).log10());
            }
            eprintln!(
                "target={target} nulls={nulls:?} beamwidth_3db_deg={:.4}",
                pattern.beamwidth_3db_deg
            );
        }
        Command::Diversity {
            rho,
            samples,
            outage,
            seed,
            csv,
        } => {
            let (x1, x2) =
                generate_correlated_rayleigh(samples, Complex64::new(rho, 0.0), seed)?;
            let report = analyze(&x1, &x2, outage)?;
            println!(
                "rho_target={rho} samples={samples} seed={seed} p1_w={:.4} p2_w={:.4} rho_c={:.4}{:+.4}i rho_e={:.4} gain_db={:.3} outage={outage}",
                report.p1_w, report.p2_w, report.rho_c_re, report.rho_c_im, report.rho_e, report.gain_db
            );
            if let Some(path) = csv {
                let mut out = String::from("sample,env1,env2\n");
                for (i, (a, b)) in x1.samples().iter().zip(x2.samples()).enumerate() {
                    out.push_str(&format!("{i},{:.6},{:.6}\n", a.norm(), b.norm()));
                }
                std::fs::write(&path, out).map_err(|e| Error::io(&path, e))?;
                println!("wrote {}", path.display());
            }
        }
        Command::Report { input } => {
            let recomputed = recompute_from_dir(&input)?;
            println!("{}", to_pretty_json(&recomputed)?.trim_end());
        }
    }
    Ok(())
}
