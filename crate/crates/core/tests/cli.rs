mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use common::cache;
use soliton_rigidity::cache::Cache;
use soliton_rigidity::cli::csv::{fmt_f64, header, read_trajectory, write_trajectory};
use soliton_rigidity::cli::{run_scenario, setup, sweep, validate_csv, NumericsSpec, ScenarioSpec, SweepSpec, SWEEP_COLUMNS};
use soliton_rigidity::dynamics::{simulate, two_body, SimulationConfig};
use soliton_rigidity::ModelParams;
use tempfile::TempDir;

const TWO_BODY: &str = r#"{
  "name": "pair",
  "model": { "d": 2, "p": 3.0, "alpha": 1.0 },
  "initial": { "generator": { "name": "two-body", "r0": 12.0, "same_sign": false } },
  "simulation": { "s_max": 400.0, "stride": 1.0 }
}"#;

fn scenario(text: &str) -> ScenarioSpec {
    ScenarioSpec::from_json(text).unwrap()
}

fn with_sign(same: bool) -> ScenarioSpec {
    let mut s = scenario(TWO_BODY);
    s.initial.generator = soliton_rigidity::cli::Generator::TwoBody { r0: 12.0, same_sign: same };
    s.name = if same { "pair-same".into() } else { "pair-opposite".into() };
    s
}

fn binary() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_soliton-rigidity"));
    c.env("SOLITON_RIGIDITY_CACHE", PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("soliton-cache"));
    c
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn out_of_range_exponent_names_the_model() {
    let text = TWO_BODY.replace("\"p\": 3.0", "\"p\": 1.5");
    let e = ScenarioSpec::from_json(&text).unwrap_err();
    assert_eq!(e.path, "model");
    assert!(e.to_string().contains("model"));
}

#[test]
fn missing_generator_is_named() {
    let text = TWO_BODY.replace(r#""generator": { "name": "two-body", "r0": 12.0, "same_sign": false }"#, r#""project": false"#);
    let e = ScenarioSpec::from_json(&text).unwrap_err();
    assert_eq!(e.path, "initial");
    assert!(e.message.contains("generator"), "{e}");
}

#[test]
fn unknown_fields_and_bad_values_are_config_errors() {
    let e = ScenarioSpec::from_json(&TWO_BODY.replace("\"stride\": 1.0", "\"stride\": 1.0, \"bogus\": 1")).unwrap_err();
    assert_eq!(e.path, "simulation.bogus");
    let e = ScenarioSpec::from_json(&TWO_BODY.replace("\"stride\": 1.0", "\"stride\": -1.0")).unwrap_err();
    assert_eq!(e.path, "simulation");
    let e = ScenarioSpec::from_json(&TWO_BODY.replace("two-body", "three-body")).unwrap_err();
    assert!(e.path.starts_with("initial.generator"), "{e}");
    let projected = TWO_BODY.replace("\"same_sign\": false }", "\"same_sign\": false }, \"project\": true");
    assert_eq!(ScenarioSpec::from_json(&projected).unwrap_err().path, "initial.project");
    assert!(ScenarioSpec::from_json("{").is_err());
}

#[test]
fn cache_reuses_matching_entries_only() {
    let dir = TempDir::new().unwrap();
    let c = Cache::new(dir.path());
    let params = ModelParams::new(1, 3.0, 2.0).unwrap();
    let (a, k1) = c.profile(params, Default::default()).unwrap();
    assert!(!k1.hit);
    let (b, k2) = c.profile(ModelParams { alpha: 5.0, ..params }, Default::default()).unwrap();
    assert!(k2.hit && k1.digest == k2.digest);
    assert_eq!(a.q, b.q);

    let path = dir.path().join(format!("profile-{}.json", k1.digest));
    let text = fs::read_to_string(&path).unwrap();
    let (head, body) = text.split_once('\n').unwrap();
    fs::write(&path, format!("{head} stale\n{body}")).unwrap();
    let (_, k3) = c.profile(params, Default::default()).unwrap();
    assert!(!k3.hit);
    let (_, k4) = c.profile(params, Default::default()).unwrap();
    assert!(k4.hit);
}

#[test]
fn cached_and_fresh_builds_agree() {
    let model = ModelParams::new(2, 3.0, 1.0).unwrap();
    let cached = setup(model, &NumericsSpec::default(), 1e4, &cache()).unwrap();
    let again = setup(model, &NumericsSpec::default(), 1e4, &cache()).unwrap();
    assert!(again.cache_keys.iter().all(|k| k.hit));
    let fresh = setup(model, &NumericsSpec::default(), 1e4, &Cache::disabled()).unwrap();
    assert!((cached.clock.c_star - fresh.clock.c_star).abs() <= 1e-10);
    assert!((cached.kernel.c_g / fresh.kernel.c_g - 1.0).abs() <= 1e-10);
    for r in [2.0, 7.5, 19.0, 33.0] {
        assert!((cached.kernel.ln_force(r) - fresh.kernel.ln_force(r)).abs() <= 1e-10);
    }
}

#[test]
fn csv_round_trip_is_exact() {
    let s = setup(ModelParams::new(2, 3.0, 1.0).unwrap(), &NumericsSpec::default(), 1e4, &cache()).unwrap();
    let cfg = SimulationConfig { s_max: 30.0, stride: 0.5, ..SimulationConfig::default() };
    let traj = simulate(&two_body(2, 12.0, false).unwrap(), &s.kernel, &cfg).unwrap();
    let mut buf = Vec::new();
    write_trajectory(&mut buf, &traj, &s.clock).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert_eq!(text.lines().next().unwrap(), header(2, 2, false).join(","));
    let back = read_trajectory(&buf[..], 2, &traj.signs).unwrap();
    assert_eq!(back.s, traj.s);
    assert_eq!(back.frames, traj.frames);
    assert_eq!(fmt_f64(0.1), "0.1");
    assert_eq!(fmt_f64(f64::INFINITY), "inf");
    assert!(read_trajectory("s,z0_1\n1,2\n".as_bytes(), 2, &[1, -1]).is_err());
}

#[test]
fn runs_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let spec = scenario(
        &TWO_BODY.replace("two-body\", \"r0\": 12.0, \"same_sign\": false", "perturbed-equilateral\", \"r0\": 12.0, \"eps\": 0.2, \"seed\": 4"),
    )
    .with_seed(9);
    let spec = ScenarioSpec { simulation: SimulationConfig { s_max: 60.0, ..spec.simulation.clone() }, ..spec };
    let (a, _) = run_scenario(&spec, &cache(), &dir.path().join("a")).unwrap();
    let (b, _) = run_scenario(&spec, &cache(), &dir.path().join("b")).unwrap();
    assert_eq!(fs::read(&a.trajectory_csv).unwrap(), fs::read(&b.trajectory_csv).unwrap());
}

#[test]
fn scenario_writes_a_parseable_report_and_revalidates() {
    let dir = TempDir::new().unwrap();
    for same in [false, true] {
        let spec = with_sign(same);
        let (art, report) = run_scenario(&spec, &cache(), dir.path()).unwrap();
        assert!(report.passed, "{:?}", report.checks);
        let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(&art.report_json).unwrap()).unwrap();
        assert_eq!(json["passed"], true);
        let again = validate_csv(&spec, &cache(), &art.trajectory_csv).unwrap();
        assert_eq!(again.checks, report.checks);
    }
}

#[test]
fn sweep_isolates_failures_and_matches_single_runs() {
    let dir = TempDir::new().unwrap();
    let mut bad = with_sign(true);
    bad.name = "pair-rigidity".into();
    bad.validation.checks = Some(vec![soliton_rigidity::cli::CheckKind::Rigidity]);
    let specs = vec![with_sign(false), with_sign(true), bad];
    let rows = sweep(&specs, 2, &cache(), dir.path()).unwrap();
    let status: Vec<&str> = rows.iter().map(|r| r.status.as_str()).collect();
    assert_eq!(status, ["passed", "passed", "failed"]);
    let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(summary.lines().next().unwrap(), SWEEP_COLUMNS.join(","));
    assert_eq!(summary.lines().count(), 4);
    assert!(rows.iter().all(|r| r.c_star.is_some()));

    let single = dir.path().join("single");
    let (art, _) = run_scenario(&specs[0], &cache(), &single).unwrap();
    assert_eq!(fs::read(art.trajectory_csv).unwrap(), fs::read(dir.path().join("pair-opposite/trajectory.csv")).unwrap());
}

#[test]
fn sweep_expands_models_and_seeds() {
    let text = format!(
        r#"{{ "name": "grid", "base": {TWO_BODY}, "models": [{{"d": 2, "p": 3.0, "alpha": 1.0}}, {{"d": 3, "p": 2.5, "alpha": 1.0}}], "seeds": [1, 2] }}"#
    );
    let specs = SweepSpec::from_json(&text).unwrap().expand();
    assert_eq!(specs.len(), 4);
    assert_eq!(specs[3].name, "pair-d3-p2.5-a1-seed2");
    assert!(SweepSpec::from_json(r#"{ "name": "empty" }"#).is_err());
}

#[test]
fn binary_exit_codes() {
    let dir = TempDir::new().unwrap();
    let good = write(dir.path(), "good.json", TWO_BODY);
    let out = dir.path().join("run");
    let st = binary().args(["simulate", "--config"]).arg(&good).arg("--out").arg(&out).output().unwrap();
    assert_eq!(st.status.code(), Some(0), "{}", String::from_utf8_lossy(&st.stderr));
    assert!(out.join("trajectory.csv").exists() && out.join("report.json").exists());

    let st = binary().args(["validate", "--config"]).arg(&good).arg("--trajectory").arg(out.join("trajectory.csv")).output().unwrap();
    assert_eq!(st.status.code(), Some(0));

    let failing = write(
        dir.path(),
        "failing.json",
        &TWO_BODY.replace("\"stride\": 1.0 }", "\"stride\": 1.0 }, \"validation\": { \"checks\": [\"rigidity\"] }"),
    );
    let st = binary().args(["simulate", "--config"]).arg(&failing).arg("--out").arg(dir.path().join("f")).output().unwrap();
    assert_eq!(st.status.code(), Some(1));

    let bad = write(dir.path(), "bad.json", &TWO_BODY.replace("\"p\": 3.0", "\"p\": 1.5"));
    let st = binary().args(["simulate", "--config"]).arg(&bad).output().unwrap();
    assert_eq!(st.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&st.stderr).contains("`model`"));

    let st = binary().args(["simulate", "--config"]).arg(dir.path().join("missing.json")).output().unwrap();
    assert_eq!(st.status.code(), Some(3));
}

#[test]
fn binary_model_subcommands() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "m.json", TWO_BODY);
    let st = binary().args(["ground-state", "--config"]).arg(&cfg).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(st.status.code(), Some(0));
    let profile = fs::read_to_string(dir.path().join("profile.csv")).unwrap();
    assert!(profile.starts_with("r,q,dq\n0.0,"));
    let st = binary().args(["kernel", "--config"]).arg(&cfg).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(st.status.code(), Some(0));
    let k: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("kernel.json")).unwrap()).unwrap();
    assert!(k["c_star"].as_f64().unwrap().is_finite());
    assert_eq!(fs::read_to_string(dir.path().join("kernel.csv")).unwrap().lines().count(), 802);
    let st = binary().args(["algebra", "--samples", "2000", "--seed", "3", "--out"]).arg(dir.path()).output().unwrap();
    assert_eq!(st.status.code(), Some(0));
    let a: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("algebra.json")).unwrap()).unwrap();
    assert_eq!(a.as_array().unwrap().len(), 2);
}
