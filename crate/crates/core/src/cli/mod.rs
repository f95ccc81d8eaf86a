//! Scenario files, cached setup, runs, validation and sweeps behind the command line.

pub mod csv;

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use anyhow::{Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{
    decay_envelopes_in, fit_rigidity, ode_residuals, separation_hierarchy_check, two_body_report, DecayFit, EnvelopeWindow, HierarchyReport,
    OdeResidualReport, RigidityReport, TwoBodyReport,
};
use crate::cache::{Cache, CacheKey};
use crate::dynamics::{
    equilateral, perturbed_equilateral, project_to_rigid_manifold, simulate, two_body, CollisionEvent, IntegratorStats, ProjectionOptions,
    SimulationConfig, SolitonConfiguration, Trajectory,
};
use crate::ground_state::{RadialProfile, ShootingOptions};
use crate::kernel::{ClockFit, InteractionKernel, KernelOptions, ReferenceClock};
use crate::params::ModelParams;

/// Schema or range violation in a scenario file.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("config error at `{path}`: {message}")]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    fn at(path: &str, message: impl ToString) -> Self {
        ConfigError { path: path.to_string(), message: message.to_string() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub name: String,
    pub model: ModelParams,
    pub initial: InitialData,
    #[serde(default)]
    pub simulation: SimulationConfig,
    #[serde(default)]
    pub validation: ValidationSpec,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub numerics: NumericsSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialData {
    pub generator: Generator,
    /// Move the data onto the set whose frame becomes rigid before simulating.
    #[serde(default)]
    pub project: bool,
    #[serde(default)]
    pub projection: ProjectionOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Generator {
    Equilateral { r0: f64 },
    PerturbedEquilateral { r0: f64, eps: f64, seed: u64 },
    TwoBody { r0: f64, same_sign: bool },
    Explicit { centers: Vec<Vec<f64>>, signs: Vec<i8> },
}

impl Generator {
    pub fn seed(&self) -> Option<u64> {
        match self {
            Generator::PerturbedEquilateral { seed, .. } => Some(*seed),
            _ => None,
        }
    }

    pub fn build(&self, d: usize) -> crate::Result<SolitonConfiguration> {
        match self {
            Generator::Equilateral { r0 } => equilateral(d, *r0),
            Generator::PerturbedEquilateral { r0, eps, seed } => perturbed_equilateral(d, *r0, *eps, *seed),
            Generator::TwoBody { r0, same_sign } => two_body(d, *r0, *same_sign),
            Generator::Explicit { centers, signs } => {
                if centers.iter().any(|c| c.len() != d) {
                    return Err(crate::Error::InvalidSetup(format!("every center needs {d} coordinates")));
                }
                SolitonConfiguration::new(d, centers.clone(), signs.clone())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckKind {
    Rigidity,
    Envelopes,
    Hierarchy,
    Residuals,
    TwoBody,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidationSpec {
    /// Checks to run; absent selects rigidity, envelopes and hierarchy for (1,3)
    /// data and the two-body laws for two centers.
    pub checks: Option<Vec<CheckKind>>,
    pub burn_in: f64,
    pub envelope_window: EnvelopeWindow,
    /// First log time at which ODE residuals are compared.
    pub residual_from: f64,
    pub direction_tol: f64,
    pub constant_tol: f64,
    /// Keep the per-sample series of envelope and rigidity fits in the report.
    pub report_series: bool,
}

impl Default for ValidationSpec {
    fn default() -> Self {
        ValidationSpec {
            checks: None,
            burn_in: 20.0,
            envelope_window: EnvelopeWindow::TrailingHalf,
            residual_from: 5.0,
            direction_tol: 1e-10,
            constant_tol: 0.1,
            report_series: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    /// Output directory; defaults to `out/<name>`.
    pub dir: Option<PathBuf>,
    pub trajectory: String,
    pub report: String,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec { dir: None, trajectory: "trajectory.csv".into(), report: "report.json".into() }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NumericsSpec {
    pub shooting: ShootingOptions,
    pub kernel: KernelOptions,
}

impl ScenarioSpec {
    pub fn from_json(text: &str) -> std::result::Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let spec: ScenarioSpec = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            ConfigError::at(&path, e.into_inner())
        })?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Ok(Self::from_json(&text)?)
    }

    pub fn validate(&self) -> std::result::Result<(), ConfigError> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(ConfigError::at("name", "must be a non-empty file-name-safe string"));
        }
        self.model.validate().map_err(|e| ConfigError::at("model", e))?;
        self.simulation.validate(self.model.p).map_err(|e| ConfigError::at("simulation", e))?;
        let init = self.initial.generator.build(self.model.d).map_err(|e| ConfigError::at("initial.generator", e))?;
        if self.initial.project && !init.is_one_three() {
            return Err(ConfigError::at("initial.project", "projection needs (1,3) data"));
        }
        let v = &self.validation;
        if !(v.burn_in >= 0.0 && v.residual_from >= 0.0 && v.direction_tol > 0.0 && v.constant_tol > 0.0) {
            return Err(ConfigError::at("validation", "burn-in, residual start and tolerances must be non-negative"));
        }
        Ok(())
    }

    /// Replaces every seed in the scenario.
    pub fn with_seed(mut self, seed: u64) -> Self {
        if let Generator::PerturbedEquilateral { seed: s, .. } = &mut self.initial.generator {
            *s = seed;
        }
        if let Some(p) = &mut self.simulation.perturbation {
            p.seed = seed;
        }
        self
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output.dir.clone().unwrap_or_else(|| Path::new("out").join(&self.name))
    }

    pub fn checks(&self, init: &SolitonConfiguration) -> Vec<CheckKind> {
        if let Some(c) = &self.validation.checks {
            return c.clone();
        }
        if init.len() == 2 {
            vec![CheckKind::TwoBody]
        } else {
            vec![CheckKind::Rigidity, CheckKind::Envelopes, CheckKind::Hierarchy]
        }
    }
}

/// Profile, kernel and clock for one model.
#[derive(Clone)]
pub struct Setup {
    pub profile: Arc<RadialProfile>,
    pub kernel: Arc<InteractionKernel>,
    pub clock: ReferenceClock,
    pub cache_keys: Vec<CacheKey>,
}

pub fn setup(model: ModelParams, numerics: &NumericsSpec, s_max: f64, cache: &Cache) -> Result<Setup> {
    let (profile, pk) = cache.profile(model, numerics.shooting).context("building the ground state")?;
    let (kernel, kk) = cache.kernel(profile.clone(), model.alpha, numerics.kernel).context("building the interaction kernel")?;
    let clock = ReferenceClock::to_log_time(kernel.clone(), s_max);
    Ok(Setup { profile, kernel, clock, cache_keys: vec![pk, kk] })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectionSummary {
    pub residual: f64,
    pub iterations: usize,
    pub angles: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioReport {
    pub name: String,
    pub model: ModelParams,
    pub initial: InitialData,
    pub c_star: f64,
    pub clock_fit: ClockFit,
    pub c_g: f64,
    pub projection: Option<ProjectionSummary>,
    pub s_end: f64,
    pub frames: usize,
    pub collision: Option<CollisionEvent>,
    pub stats: IntegratorStats,
    pub rigidity: Option<RigidityReport>,
    pub envelopes: Option<Vec<DecayFit>>,
    pub hierarchy: Option<HierarchyReport>,
    pub residuals: Option<OdeResidualReport>,
    pub two_body: Option<TwoBodyReport>,
    /// Checks that could not be evaluated, with the reason.
    pub errors: BTreeMap<String, String>,
    pub checks: BTreeMap<String, bool>,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunArtifacts {
    pub trajectory_csv: PathBuf,
    pub report_json: PathBuf,
    pub cache_keys: Vec<CacheKey>,
    pub wall_seconds: f64,
    pub stats: IntegratorStats,
    pub passed: bool,
}

/// Builds the initial data, projecting it when requested.
pub fn initial_configuration(spec: &ScenarioSpec, kernel: &InteractionKernel) -> Result<(SolitonConfiguration, Option<ProjectionSummary>)> {
    let init = spec.initial.generator.build(spec.model.d).context("building initial data")?;
    if !spec.initial.project {
        return Ok((init, None));
    }
    let p = project_to_rigid_manifold(&init, kernel, &spec.simulation, &spec.initial.projection).context("projecting initial data")?;
    let summary = ProjectionSummary { residual: p.residual, iterations: p.iterations, angles: p.angles.clone() };
    Ok((p.config, Some(summary)))
}

/// Simulates a scenario without validating it.
pub fn simulate_scenario(spec: &ScenarioSpec, setup: &Setup) -> Result<(Trajectory, Option<ProjectionSummary>)> {
    let (init, projection) = initial_configuration(spec, &setup.kernel)?;
    let traj = simulate(&init, &setup.kernel, &spec.simulation).context("simulating")?;
    Ok((traj, projection))
}

/// Runs the configured checks on a trajectory.
pub fn validate_trajectory(spec: &ScenarioSpec, setup: &Setup, traj: &Trajectory, projection: Option<ProjectionSummary>) -> ScenarioReport {
    let v = &spec.validation;
    let clock = &setup.clock;
    let mut report = ScenarioReport {
        name: spec.name.clone(),
        model: spec.model,
        initial: spec.initial.clone(),
        c_star: clock.c_star,
        clock_fit: clock.fit,
        c_g: setup.kernel.c_g,
        projection,
        s_end: *traj.s.last().expect("non-empty trajectory"),
        frames: traj.len(),
        collision: traj.collision,
        stats: traj.stats,
        rigidity: None,
        envelopes: None,
        hierarchy: None,
        residuals: None,
        two_body: None,
        errors: BTreeMap::new(),
        checks: BTreeMap::new(),
        passed: false,
    };
    let fail = |report: &mut ScenarioReport, name: &str, e: String| {
        report.errors.insert(name.to_string(), e);
        report.checks.insert(name.to_string(), false);
    };
    for check in spec.checks(&traj.config(0)) {
        match check {
            CheckKind::Rigidity => match fit_rigidity(traj, clock) {
                Ok(mut r) => {
                    for (k, ok) in &r.checks {
                        report.checks.insert(format!("rigidity.{k}"), *ok);
                    }
                    if !v.report_series {
                        r.residual_series.clear();
                    }
                    report.rigidity = Some(r);
                }
                Err(e) => fail(&mut report, "rigidity", e.to_string()),
            },
            CheckKind::Envelopes => match decay_envelopes_in(traj, clock, v.envelope_window) {
                Ok(mut fits) => {
                    for f in &mut fits {
                        report.checks.insert(format!("envelopes.{}", f.name), f.pass);
                        if !v.report_series {
                            f.series.clear();
                        }
                    }
                    report.envelopes = Some(fits);
                }
                Err(e) => fail(&mut report, "envelopes", e.to_string()),
            },
            CheckKind::Hierarchy => match separation_hierarchy_check(traj, clock, v.burn_in) {
                Ok(h) => {
                    match &h {
                        HierarchyReport::Checked { checks, .. } => {
                            for c in checks {
                                report.checks.insert(format!("hierarchy.{}", c.name), c.violations == 0);
                            }
                        }
                        HierarchyReport::NotApplicable { reason } => {
                            report.errors.insert("hierarchy".into(), reason.clone());
                        }
                    }
                    report.hierarchy = Some(h);
                }
                Err(e) => fail(&mut report, "hierarchy", e.to_string()),
            },
            CheckKind::Residuals => match ode_residuals(traj, clock, v.residual_from) {
                Ok(r) => {
                    for s in &r.summaries {
                        report.checks.insert(format!("residuals.{}", s.name), s.pass);
                    }
                    report.residuals = Some(r);
                }
                Err(e) => fail(&mut report, "residuals", e.to_string()),
            },
            CheckKind::TwoBody => match two_body_report(traj) {
                Ok(t) => {
                    let same_sign = traj.signs[0] == traj.signs[1];
                    if same_sign {
                        report.checks.insert("two_body.collision".into(), t.collided);
                    } else {
                        report.checks.insert("two_body.direction".into(), !t.collided && t.direction_drift <= v.direction_tol);
                        let stable = t.window_constants.is_some_and(|(a, b)| (a - b).abs() <= v.constant_tol);
                        report.checks.insert("two_body.constant".into(), stable);
                    }
                    report.two_body = Some(t);
                }
                Err(e) => fail(&mut report, "two_body", e.to_string()),
            },
        }
    }
    report.passed = !report.checks.is_empty() && report.checks.values().all(|&ok| ok);
    report
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path).with_context(|| format!("creating {}", path.display()))?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn write_trajectory_csv(path: &Path, traj: &Trajectory, clock: &ReferenceClock) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path).with_context(|| format!("creating {}", path.display()))?);
    csv::write_trajectory(&mut w, traj, clock)?;
    w.flush()?;
    Ok(())
}

/// Builds or loads the caches, simulates, validates and writes the trajectory CSV
/// and report JSON into `out_dir`.
pub fn run_scenario(spec: &ScenarioSpec, cache: &Cache, out_dir: &Path) -> Result<(RunArtifacts, ScenarioReport)> {
    spec.validate()?;
    let start = Instant::now();
    let setup = setup(spec.model, &spec.numerics, spec.simulation.s_max, cache)?;
    let (traj, projection) = simulate_scenario(spec, &setup)?;
    let report = validate_trajectory(spec, &setup, &traj, projection);
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let trajectory_csv = out_dir.join(&spec.output.trajectory);
    let report_json = out_dir.join(&spec.output.report);
    write_trajectory_csv(&trajectory_csv, &traj, &setup.clock)?;
    write_json(&report_json, &report)?;
    let artifacts = RunArtifacts {
        trajectory_csv,
        report_json,
        cache_keys: setup.cache_keys,
        wall_seconds: start.elapsed().as_secs_f64(),
        stats: traj.stats,
        passed: report.passed,
    };
    Ok((artifacts, report))
}

/// Validates a trajectory CSV written by an earlier run of `spec`.
pub fn validate_csv(spec: &ScenarioSpec, cache: &Cache, csv_path: &Path) -> Result<ScenarioReport> {
    spec.validate()?;
    let init = spec.initial.generator.build(spec.model.d)?;
    let file = fs::File::open(csv_path).with_context(|| format!("opening {}", csv_path.display()))?;
    let mut traj = csv::read_trajectory(BufReader::new(file), spec.model.d, &init.signs)?;
    // The file has no collision column; a final frame below the collision threshold marks one.
    let (distance, i, j) = traj.last().min_distance();
    if distance < spec.simulation.d_min / 2.0 {
        traj.collision = Some(CollisionEvent { s: *traj.s.last().expect("non-empty trajectory"), i, j, distance });
    }
    let s_end = *traj.s.last().expect("non-empty trajectory");
    let setup = setup(spec.model, &spec.numerics, s_end.max(spec.simulation.s_max), cache)?;
    Ok(validate_trajectory(spec, &setup, &traj, None))
}

/// A list of scenarios, optionally expanded from a base over models and seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub name: String,
    pub base: Option<ScenarioSpec>,
    pub models: Vec<ModelParams>,
    pub seeds: Vec<u64>,
    pub scenarios: Vec<ScenarioSpec>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec { name: "sweep".into(), base: None, models: Vec::new(), seeds: Vec::new(), scenarios: Vec::new() }
    }
}

impl SweepSpec {
    pub fn from_json(text: &str) -> std::result::Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let spec: SweepSpec = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            ConfigError::at(&path, e.into_inner())
        })?;
        if spec.expand().is_empty() {
            return Err(ConfigError::at("scenarios", "sweep has no scenarios"));
        }
        Ok(spec)
    }

    /// Explicit scenarios followed by base × models × seeds.
    pub fn expand(&self) -> Vec<ScenarioSpec> {
        let mut out = self.scenarios.clone();
        if let Some(base) = &self.base {
            let models = if self.models.is_empty() { vec![base.model] } else { self.models.clone() };
            for m in &models {
                let seeds: Vec<Option<u64>> = if self.seeds.is_empty() { vec![None] } else { self.seeds.iter().copied().map(Some).collect() };
                for seed in seeds {
                    let mut s = base.clone();
                    s.model = *m;
                    if !self.models.is_empty() {
                        s.name = format!("{}-d{}-p{}-a{}", s.name, m.d, m.p, m.alpha);
                    }
                    if let Some(seed) = seed {
                        s = s.with_seed(seed);
                        s.name = format!("{}-seed{seed}", s.name);
                    }
                    out.push(s);
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub name: String,
    pub d: usize,
    pub p: f64,
    pub alpha: f64,
    pub seed: Option<u64>,
    /// `passed`, `failed` or `error`.
    pub status: String,
    pub c_star: Option<f64>,
    pub c0: Option<f64>,
    pub omega_sum_norm: Option<f64>,
    pub collision_s: Option<f64>,
    pub s_end: Option<f64>,
    pub message: String,
}

pub const SWEEP_COLUMNS: [&str; 12] =
    ["name", "d", "p", "alpha", "seed", "status", "c_star", "c0", "omega_sum_norm", "collision_s", "s_end", "message"];

impl SweepRow {
    fn csv_line(&self) -> String {
        let opt = |x: Option<f64>| x.map(csv::fmt_f64).unwrap_or_default();
        let msg = self.message.replace(['"', '\n'], "'");
        [
            self.name.clone(),
            self.d.to_string(),
            csv::fmt_f64(self.p),
            csv::fmt_f64(self.alpha),
            self.seed.map(|s| s.to_string()).unwrap_or_default(),
            self.status.clone(),
            opt(self.c_star),
            opt(self.c0),
            opt(self.omega_sum_norm),
            opt(self.collision_s),
            opt(self.s_end),
            format!("\"{msg}\""),
        ]
        .join(",")
    }
}

/// Runs every scenario of a sweep on `parallel` threads, each into `out_dir/<name>`,
/// and writes `out_dir/summary.csv`. Failures of one scenario do not stop the others.
pub fn sweep(specs: &[ScenarioSpec], parallel: usize, cache: &Cache, out_dir: &Path) -> Result<Vec<SweepRow>> {
    anyhow::ensure!(!specs.is_empty(), "sweep has no scenarios");
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    // Warm the caches once per model so parallel runs only read them.
    if cache.dir().is_some() {
        let mut seen = Vec::new();
        for s in specs {
            if s.validate().is_ok() && !seen.contains(&(s.model, s.numerics)) {
                seen.push((s.model, s.numerics));
                if let Err(e) = setup(s.model, &s.numerics, 10.0, cache) {
                    eprintln!("warning: cache warm-up for {} failed: {e:#}", s.name);
                }
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(parallel.max(1)).build()?;
    let rows: Vec<SweepRow> = pool.install(|| {
        specs
            .par_iter()
            .map(|spec| {
                let mut row = SweepRow {
                    name: spec.name.clone(),
                    d: spec.model.d,
                    p: spec.model.p,
                    alpha: spec.model.alpha,
                    seed: spec.initial.generator.seed(),
                    status: "error".into(),
                    c_star: None,
                    c0: None,
                    omega_sum_norm: None,
                    collision_s: None,
                    s_end: None,
                    message: String::new(),
                };
                match run_scenario(spec, cache, &out_dir.join(&spec.name)) {
                    Ok((_, report)) => {
                        row.status = if report.passed { "passed" } else { "failed" }.into();
                        row.c_star = Some(report.c_star);
                        row.c0 = report.rigidity.as_ref().map(|r| r.c0);
                        row.omega_sum_norm = report.rigidity.as_ref().map(|r| r.omega_sum_norm);
                        row.collision_s = report.collision.map(|c| c.s);
                        row.s_end = Some(report.s_end);
                        let failed: Vec<&str> = report.checks.iter().filter(|(_, ok)| !**ok).map(|(k, _)| k.as_str()).collect();
                        row.message = failed.join(" ");
                    }
                    Err(e) => row.message = format!("{e:#}"),
                }
                row
            })
            .collect()
    });
    let mut w = BufWriter::new(fs::File::create(out_dir.join("summary.csv"))?);
    writeln!(w, "{}", SWEEP_COLUMNS.join(","))?;
    for r in &rows {
        writeln!(w, "{}", r.csv_line())?;
    }
    w.flush()?;
    Ok(rows)
}
