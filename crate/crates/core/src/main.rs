use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use soliton_rigidity::cache::Cache;
use soliton_rigidity::cli::csv::fmt_f64;
use soliton_rigidity::cli::{self, ConfigError, NumericsSpec, ScenarioSpec, SweepSpec};
use soliton_rigidity::geometry::gram_inequality_suite;
use soliton_rigidity::ground_state::profile_constants;
use soliton_rigidity::ModelParams;

#[derive(Parser)]
#[command(name = "soliton-rigidity", version, about = "Reduced (1,3) soliton-center dynamics and rigidity checks")]
struct Cli {
    /// Rebuild profiles and kernels instead of using the on-disk cache.
    #[arg(long, global = true)]
    no_cache: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for the ground state and write its table and constants.
    GroundState {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Build the interaction kernel and clock and write g, F and c_star.
    Kernel {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run a scenario: simulate, validate and write the trajectory CSV and report.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Validate a trajectory CSV against the checks of a scenario.
    Validate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        trajectory: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample unit-vector triples and check the Gram-angle inequalities in d = 2 and 3.
    Algebra {
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a list of scenarios and write a summary CSV.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 1)]
        parallel: usize,
        #[arg(long, default_value = "out/sweep")]
        out: PathBuf,
    },
}

/// The model part of any scenario file.
#[derive(Deserialize)]
struct ModelFile {
    model: ModelParams,
    #[serde(default)]
    numerics: NumericsSpec,
    #[serde(default)]
    simulation: Option<SimulationSpan>,
}

#[derive(Deserialize)]
struct SimulationSpan {
    s_max: Option<f64>,
}

fn load_model(path: &Path) -> Result<ModelFile> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    let m: ModelFile = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        ConfigError { path, message: e.into_inner().to_string() }
    })?;
    m.model.validate().map_err(|e| ConfigError { path: "model".into(), message: e.to_string() })?;
    Ok(m)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut w = BufWriter::new(fs::File::create(path).with_context(|| format!("creating {}", path.display()))?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    Ok(w.flush()?)
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn ground_state(config: &Path, out: &Path, cache: &Cache) -> Result<bool> {
    let m = load_model(config)?;
    let (profile, key) = cache.profile(m.model, m.numerics.shooting)?;
    fs::create_dir_all(out)?;
    let mut w = BufWriter::new(fs::File::create(out.join("profile.csv"))?);
    writeln!(w, "r,q,dq")?;
    for (i, r) in profile.grid().into_iter().enumerate() {
        writeln!(w, "{},{},{}", fmt_f64(r), fmt_f64(profile.q[i]), fmt_f64(profile.dq[i]))?;
    }
    w.flush()?;
    let summary = serde_json::json!({
        "params": profile.params,
        "q0": profile.q0(),
        "c_q": profile.c_q,
        "r_match": profile.r_match,
        "tail_constant": profile.tail_constant,
        "constants": profile_constants(&profile),
        "cache": key,
    });
    write_json(&out.join("profile.json"), &summary)?;
    print_json(&summary)?;
    Ok(true)
}

fn kernel(config: &Path, out: &Path, cache: &Cache) -> Result<bool> {
    let m = load_model(config)?;
    let s_max = m.simulation.and_then(|s| s.s_max).unwrap_or(1e4);
    let setup = cli::setup(m.model, &m.numerics, s_max, cache)?;
    let k = &setup.kernel;
    fs::create_dir_all(out)?;
    let mut w = BufWriter::new(fs::File::create(out.join("kernel.csv"))?);
    writeln!(w, "r,g,g_asym,ln_g,F,ln_F")?;
    for i in 0..=(2 * 40 * 10) {
        let r = 1.0 + 0.05 * i as f64;
        writeln!(
            w,
            "{},{},{},{},{},{}",
            fmt_f64(r),
            fmt_f64(k.g(r)),
            fmt_f64(k.g_leading(r)),
            fmt_f64(k.ln_g(r)),
            fmt_f64(k.force(r)),
            fmt_f64(k.ln_force(r))
        )?;
    }
    w.flush()?;
    let summary = serde_json::json!({
        "params": k.params,
        "c_g": k.c_g,
        "source_moment": k.source_moment,
        "r_switch": k.r_switch(),
        "force_denominator": k.force_denominator(),
        "overlap_constant": k.overlap_constant,
        "c_star": setup.clock.c_star,
        "c_star_limit": k.clock_constant_limit(),
        "clock_fit": setup.clock.fit,
        "cache": setup.cache_keys,
    });
    write_json(&out.join("kernel.json"), &summary)?;
    print_json(&summary)?;
    Ok(true)
}

fn run(cli: Cli) -> Result<bool> {
    let cache = if cli.no_cache { Cache::disabled() } else { Cache::from_env() };
    match cli.command {
        Command::GroundState { config, out } => ground_state(&config, &out, &cache),
        Command::Kernel { config, out } => kernel(&config, &out, &cache),
        Command::Simulate { config, out, seed } => {
            let mut spec = ScenarioSpec::load(&config)?;
            if let Some(seed) = seed {
                spec = spec.with_seed(seed);
            }
            let out = out.unwrap_or_else(|| spec.output_dir());
            let (artifacts, report) = cli::run_scenario(&spec, &cache, &out)?;
            print_json(&artifacts)?;
            for name in report.checks.iter().filter(|(_, ok)| !**ok).map(|(k, _)| k) {
                eprintln!("check failed: {name}");
            }
            for (name, e) in &report.errors {
                eprintln!("{name}: {e}");
            }
            Ok(report.passed)
        }
        Command::Validate { config, trajectory, out } => {
            let spec = ScenarioSpec::load(&config)?;
            let report = cli::validate_csv(&spec, &cache, &trajectory)?;
            match out {
                Some(dir) => write_json(&dir.join(&spec.output.report), &report)?,
                None => print_json(&report)?,
            }
            Ok(report.passed)
        }
        Command::Algebra { samples, seed, out } => {
            let mut reports = Vec::new();
            let mut ok = true;
            for d in [2, 3] {
                match gram_inequality_suite(samples, seed, d) {
                    Ok(r) => reports.push(serde_json::to_value(r)?),
                    Err(e) => {
                        ok = false;
                        reports.push(serde_json::json!({ "d": d, "error": e.to_string() }));
                    }
                }
            }
            match out {
                Some(dir) => write_json(&dir.join("algebra.json"), &reports)?,
                None => print_json(&reports)?,
            }
            Ok(ok)
        }
        Command::Sweep { config, parallel, out } => {
            let text = fs::read_to_string(&config).with_context(|| format!("reading {}", config.display()))?;
            let sweep = SweepSpec::from_json(&text)?;
            let rows = cli::sweep(&sweep.expand(), parallel, &cache, &out)?;
            let passed = rows.iter().filter(|r| r.status == "passed").count();
            eprintln!("{passed}/{} scenarios passed; summary in {}", rows.len(), out.join("summary.csv").display());
            Ok(passed == rows.len())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<ConfigError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}
