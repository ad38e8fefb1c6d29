//! Batch front-end for the adaptive-control laboratory.
//!
//! `crmlab run <config>` simulates one scenario and writes CSV,
//! certificate JSON, and SVG artifacts; `crmlab sweep` runs a scalar
//! parameter sweep in parallel; `crmlab report` aggregates a result
//! directory; `crmlab preset` materializes the shipped preset configs.
//!
//! Exit codes: 0 when every emitted certificate passes, 1 when any
//! certificate fails, 2 on configuration or I/O errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crm_core::experiment::{report, run_scenario, run_sweep};
use crm_core::scenario::{preset, preset_names, ScenarioConfig};

#[derive(Parser)]
#[command(
    name = "crmlab",
    about = "Simulation and certificate laboratory for adaptive control with closed-loop reference models",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario config; writes CSV + certificate JSON + SVG plots.
    Run {
        /// Scenario config file (TOML; .json accepted equivalently).
        config: PathBuf,
        /// Output directory for artifacts.
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Sweep one scalar-family parameter across a list of values.
    Sweep {
        /// Base scenario config (scalar families only).
        config: PathBuf,
        /// Parameter to sweep: `ell` or `gamma`.
        #[arg(long)]
        axis: String,
        /// Comma-separated axis values, e.g. `-10,-100,-1000`.
        #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
        values: Vec<f64>,
        /// Apply the gamma = |ell| coupling rule at each point.
        #[arg(long)]
        couple_gamma: bool,
        /// Output directory for the sweep manifest.
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Summarize every certificate/sweep artifact in a directory.
    Report {
        /// Directory containing `*.certificates.json` / `*-sweep.json`.
        dir: PathBuf,
    },
    /// Write the shipped preset configs as TOML files.
    Preset {
        /// Preset name, or `all`.
        name: String,
        /// Directory to write the TOML files into.
        #[arg(long, default_value = "presets")]
        dir: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(all_pass) => {
            if all_pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> crm_core::Result<bool> {
    match cli.command {
        Command::Run { config, out_dir } => {
            let cfg = ScenarioConfig::load(&config)?;
            let out = run_scenario(&cfg, &out_dir)?;
            println!(
                "run {} ({}): {} certificate(s), {}",
                out.name,
                out.family.as_str(),
                out.certificates.len(),
                if out.all_pass { "all pass" } else { "FAIL" }
            );
            for c in &out.certificates {
                if c.bound.is_finite() {
                    println!(
                        "  [{}] {}: measured {:.6e} vs bound {:.6e}",
                        if c.pass { "pass" } else { "FAIL" },
                        c.name,
                        c.measured,
                        c.bound
                    );
                } else {
                    println!("  [info] {}: measured {:.6e}", c.name, c.measured);
                }
            }
            println!("  wrote {}", out.csv_path.display());
            println!("  wrote {}", out.certificates_path.display());
            for p in &out.svg_paths {
                println!("  wrote {}", p.display());
            }
            Ok(out.all_pass)
        }
        Command::Sweep {
            config,
            axis,
            values,
            couple_gamma,
            out_dir,
        } => {
            let cfg = ScenarioConfig::load(&config)?;
            let out = run_sweep(&cfg, &axis, &values, couple_gamma, &out_dir)?;
            println!(
                "sweep {} over {axis} ({} point(s)){}",
                cfg.name,
                out.points.len(),
                if couple_gamma { ", gamma = |ell|" } else { "" }
            );
            for p in &out.points {
                match &p.error {
                    Some(e) => println!("  [FAIL] {} = {}: {e}", axis, p.value),
                    None => println!(
                        "  [{}] {} = {}: peak {:.6e}, tail-update-l2 {:.6e}",
                        if p.certificates_pass { "pass" } else { "FAIL" },
                        axis,
                        p.value,
                        p.peak_delta_x_m,
                        p.update_tail_l2
                    ),
                }
            }
            if let Some(fit) = &out.fit {
                println!("  peaking exponent: {:.4}", fit.exponent);
            }
            println!("  wrote {}", out.manifest_path.display());
            Ok(out.all_pass)
        }
        Command::Report { dir } => {
            let rep = report(&dir)?;
            for e in &rep.entries {
                println!(
                    "[{}] {} ({}): {}/{} pass",
                    if e.passed == e.total { "pass" } else { "FAIL" },
                    e.file,
                    e.scenario,
                    e.passed,
                    e.total
                );
            }
            println!(
                "{} artifact(s), {}",
                rep.entries.len(),
                if rep.all_pass { "all pass" } else { "FAILURES" }
            );
            Ok(rep.all_pass)
        }
        Command::Preset { name, dir } => {
            let names: Vec<&str> = if name == "all" {
                preset_names().to_vec()
            } else {
                vec![name.as_str()]
            };
            std::fs::create_dir_all(&dir)?;
            for n in names {
                let cfg = preset(n).ok_or_else(|| {
                    crm_core::Error::InvalidConfig(format!(
                        "unknown preset `{n}` (available: {})",
                        preset_names().join(", ")
                    ))
                })?;
                let path = dir.join(format!("{n}.toml"));
                std::fs::write(&path, cfg.to_toml_string()?)?;
                println!("wrote {}", path.display());
            }
            Ok(true)
        }
    }
}
