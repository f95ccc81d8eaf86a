//! Dormand-Prince 5(4) in the logarithmic time s = ln t with PI step control.

use serde::{Deserialize, Serialize};

use super::{add_perturbation, min_pair, scaled_velocities, PerturbationSpec, SolitonConfiguration};
use crate::error::{Error, Result};
use crate::kernel::InteractionKernel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    /// Initial time t0 ≥ 1.
    pub t0: f64,
    /// Final log time.
    pub s_max: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Output spacing in s.
    pub stride: f64,
    /// Collision is declared below d_min / 2.
    pub d_min: f64,
    pub perturbation: Option<PerturbationSpec>,
    pub max_steps: usize,
    /// Optional cap on the step size in s.
    pub h_max: Option<f64>,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            t0: 1.0,
            s_max: 10_000.0,
            rel_tol: 1e-9,
            abs_tol: 1e-12,
            stride: 1.0,
            d_min: 5.0,
            perturbation: None,
            max_steps: 50_000_000,
            h_max: None,
        }
    }
}

impl SimulationConfig {
    pub fn s0(&self) -> f64 {
        self.t0.ln()
    }

    pub fn validate(&self, p: f64) -> Result<()> {
        if !(self.t0 >= 1.0 && self.t0.is_finite()) {
            return Err(Error::InvalidSetup("t0 must be at least 1".into()));
        }
        if !(self.s_max > self.s0() && self.s_max.is_finite()) {
            return Err(Error::InvalidSetup("s_max must exceed ln t0".into()));
        }
        if !(self.rel_tol >= 1e-12 && self.rel_tol <= 1e-6) {
            return Err(Error::InvalidSetup(format!("rel_tol = {} outside [1e-12, 1e-6]", self.rel_tol)));
        }
        if !(self.abs_tol > 0.0) {
            return Err(Error::InvalidSetup("abs_tol must be positive".into()));
        }
        if !(self.stride > 0.0) {
            return Err(Error::InvalidSetup("stride must be positive".into()));
        }
        if !(self.d_min >= 2.0) {
            return Err(Error::InvalidSetup("d_min must be at least 2".into()));
        }
        if let Some(h) = self.h_max {
            if !(h > 0.0) {
                return Err(Error::InvalidSetup("h_max must be positive".into()));
            }
        }
        if let Some(pert) = &self.perturbation {
            pert.validate(p)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollisionEvent {
    pub s: f64,
    pub i: usize,
    pub j: usize,
    pub distance: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct IntegratorStats {
    pub accepted: u64,
    pub rejected: u64,
    pub rhs_evals: u64,
    pub h_min: f64,
    pub h_max: f64,
    /// Largest ratio |perturbation| / (C e^{-θ D}) seen at accepted steps.
    pub perturbation_ratio: f64,
    /// Stretches integrated in local time because s could not resolve them.
    pub fast_phases: u64,
}

/// Output frames at s0, s0 + stride, ..., s_max (or up to a collision).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub d: usize,
    pub signs: Vec<i8>,
    pub s: Vec<f64>,
    pub frames: Vec<Vec<f64>>,
    pub collision: Option<CollisionEvent>,
    pub stats: IntegratorStats,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    pub fn config(&self, n: usize) -> SolitonConfiguration {
        SolitonConfiguration { d: self.d, centers: self.frames[n].clone(), signs: self.signs.clone() }
    }

    pub fn last(&self) -> SolitonConfiguration {
        self.config(self.len() - 1)
    }
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [71.0 / 57600.0, 0.0, -71.0 / 16695.0, 71.0 / 1920.0, -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0];

struct System<'a> {
    signs: &'a [i8],
    d: usize,
    kernel: &'a InteractionKernel,
    pert: Option<PerturbationSpec>,
    evals: u64,
}

impl System<'_> {
    fn eval(&mut self, s: f64, y: &[f64], step: u64, out: &mut [f64]) -> Result<()> {
        self.evals += 1;
        scaled_velocities(y, self.signs, self.d, self.kernel, s, out)?;
        if let Some(p) = &self.pert {
            add_perturbation(y, self.d, p, step, s, out);
        }
        Ok(())
    }
}

/// Integrate the center dynamics from `init` at t0 to s_max.
pub fn simulate(init: &SolitonConfiguration, kernel: &InteractionKernel, cfg: &SimulationConfig) -> Result<Trajectory> {
    cfg.validate(kernel.params.p)?;
    if init.d != kernel.params.d {
        return Err(Error::InvalidSetup(format!("configuration in R^{} but kernel for d = {}", init.d, kernel.params.d)));
    }
    let d = init.d;
    let (dmin0, i0, j0) = init.min_distance();
    if init.len() > 1 && dmin0 < cfg.d_min {
        return Err(Error::InvalidSetup(format!("initial distance {dmin0} between centers {i0} and {j0} is below d_min = {}", cfg.d_min)));
    }
    let n = init.centers.len();
    let mut sys = System { signs: &init.signs, d, kernel, pert: cfg.perturbation, evals: 0 };
    let s0 = cfg.s0();
    let mut s = s0;
    let mut y = init.centers.clone();
    let mut traj = Trajectory {
        d,
        signs: init.signs.clone(),
        s: vec![s0],
        frames: vec![y.clone()],
        collision: None,
        stats: IntegratorStats { h_min: f64::INFINITY, ..Default::default() },
    };
    if init.len() < 2 {
        let mut k = 1.0;
        while s0 + k * cfg.stride < cfg.s_max {
            traj.s.push(s0 + k * cfg.stride);
            traj.frames.push(y.clone());
            k += 1.0;
        }
        traj.s.push(cfg.s_max);
        traj.frames.push(y);
        return Ok(traj);
    }

    let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; 7];
    let mut ytmp = vec![0.0; n];
    let mut ynew = vec![0.0; n];
    let mut step: u64 = 0;
    sys.eval(s, &y, step, &mut k[0])?;
    let h_cap = cfg.h_max.unwrap_or(f64::INFINITY).min(cfg.stride);
    let mut h = initial_step(&y, &k[0], cfg).min(h_cap);
    let mut err_prev: f64 = 1e-4;
    let mut rejected_last = false;
    let mut next_out = 1.0f64;
    let out_at = |m: f64| (s0 + m * cfg.stride).min(cfg.s_max);

    loop {
        let target = out_at(next_out);
        if traj.stats.accepted + traj.stats.rejected >= cfg.max_steps as u64 {
            return Err(Error::StepFailure { s, h });
        }
        let mut h_try = h;
        let mut landing = false;
        if s + h_try >= target - 1e-12 * target.abs().max(1.0) {
            h_try = target - s;
            landing = true;
        }
        if !(h_try > 1e-14 * s.abs().max(1.0)) {
            // The interaction time scale fell below the resolution of s. Follow
            // the fast phase in local time until contact or until s resolves it again.
            match fast_phase(&mut y, &init.signs, d, kernel, s, cfg.d_min / 2.0) {
                Some(FastPhase::Contact { log_tau, distance, i, j }) => {
                    let s_c = s + ln_1p_exp(log_tau);
                    traj.s.push(s_c);
                    traj.frames.push(y.clone());
                    traj.collision = Some(CollisionEvent { s: s_c, i, j, distance });
                    break;
                }
                Some(FastPhase::Resume { log_tau, h: h_s }) => {
                    traj.stats.fast_phases += 1;
                    s += ln_1p_exp(log_tau);
                    h = h_s;
                    sys.eval(s, &y, step, &mut k[0])?;
                    while out_at(next_out) <= s && next_out * cfg.stride + s0 < cfg.s_max {
                        traj.s.push(s);
                        traj.frames.push(y.clone());
                        next_out += 1.0;
                    }
                    continue;
                }
                None => {}
            }
            return Err(Error::StepFailure { s, h: h_try });
        }

        let stage_result = (|| -> Result<()> {
            for st in 1..7 {
                for i in 0..n {
                    let mut acc = 0.0;
                    for (j, kj) in k.iter().enumerate().take(st) {
                        acc += A[st][j] * kj[i];
                    }
                    ytmp[i] = y[i] + h_try * acc;
                }
                let (head, tail) = k.split_at_mut(st);
                let _ = head;
                sys.eval(s + C[st] * h_try, &ytmp, step, &mut tail[0])?;
            }
            Ok(())
        })();
        if let Err(e) = stage_result {
            if matches!(e, Error::TooClose { .. }) {
                traj.stats.rejected += 1;
                h = h_try * 0.25;
                rejected_last = true;
                continue;
            }
            return Err(e);
        }
        // stage 7 was evaluated at y_{n+1} (the 5th order solution)
        ynew.copy_from_slice(&ytmp);
        let mut err = 0.0;
        for i in 0..n {
            let mut e = 0.0;
            for (j, kj) in k.iter().enumerate() {
                e += E[j] * kj[i];
            }
            let sc = cfg.abs_tol + cfg.rel_tol * y[i].abs().max(ynew[i].abs());
            let r = h_try * e / sc;
            err += r * r;
        }
        let err = (err / n as f64).sqrt();
        let (dmin_now, _, _) = min_pair(&y, d);
        let max_move = y.chunks(d).zip(ynew.chunks(d)).map(|(a, b)| super::dist(a, b)).fold(0.0, f64::max);
        if !err.is_finite() || max_move > 0.1 * dmin_now {
            // no center may move more than a tenth of the closest distance in one step
            traj.stats.rejected += 1;
            h = h_try * 0.2;
            rejected_last = true;
            continue;
        }
        if err <= 1.0 {
            traj.stats.accepted += 1;
            traj.stats.h_min = traj.stats.h_min.min(h_try);
            traj.stats.h_max = traj.stats.h_max.max(h_try);
            s = if landing { target } else { s + h_try };
            std::mem::swap(&mut y, &mut ynew);
            if let Some(p) = cfg.perturbation.as_ref().filter(|p| p.amplitude > 0.0) {
                traj.stats.perturbation_ratio = traj.stats.perturbation_ratio.max(max_noise_norm(p, step, init.len(), d));
            }
            step += 1;
            let e = err.max(1e-10);
            let mut fac = 0.9 * e.powf(-0.17) * err_prev.powf(0.04);
            fac = fac.clamp(0.2, 10.0);
            if rejected_last {
                fac = fac.min(1.0);
            }
            let proposal = (h_try * fac).min(h_cap);
            // a landing step is usually shortened, keep the controller's own proposal
            h = if landing { proposal.max(h).min(h_cap) } else { proposal };
            err_prev = e;
            rejected_last = false;

            let (dmin, i, j) = min_pair(&y, d);
            if dmin < cfg.d_min / 2.0 {
                traj.s.push(s);
                traj.frames.push(y.clone());
                traj.collision = Some(CollisionEvent { s, i, j, distance: dmin });
                break;
            }
            if landing {
                traj.s.push(s);
                traj.frames.push(y.clone());
                if s >= cfg.s_max {
                    break;
                }
                next_out += 1.0;
            }
            if cfg.perturbation.is_some() {
                sys.eval(s, &y, step, &mut k[0])?;
            } else {
                let last = k[6].clone();
                k[0].copy_from_slice(&last);
            }
        } else {
            traj.stats.rejected += 1;
            let fac = (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
            h = h_try * fac;
            rejected_last = true;
        }
    }
    traj.stats.rhs_evals = sys.evals;
    Ok(traj)
}

enum FastPhase {
    Contact { log_tau: f64, distance: f64, i: usize, j: usize },
    Resume { log_tau: f64, h: f64 },
}

fn ln_1p_exp(x: f64) -> f64 {
    if x < -30.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Unperturbed flow in the local time τ = t/t_n - 1, where dz/dτ = t_n ż.
///
/// Each step is taken in σ = τ t_n F(D), which keeps velocities of order one,
/// and τ is accumulated through its logarithm.
fn fast_phase(y: &mut [f64], signs: &[i8], d: usize, kernel: &InteractionKernel, s_n: f64, threshold: f64) -> Option<FastPhase> {
    let n = y.len();
    let ln_resume = (1e-8 * s_n.abs().max(1.0)).ln();
    let mut log_tau = f64::NEG_INFINITY;
    let mut k = vec![vec![0.0; n]; 4];
    let mut tmp = vec![0.0; n];
    for _ in 0..2_000_000 {
        let (dmin, i, j) = min_pair(y, d);
        if dmin < threshold {
            return Some(FastPhase::Contact { log_tau, distance: dmin, i, j });
        }
        let a = s_n + kernel.ln_force(dmin);
        let shift = s_n - a;
        scaled_velocities(y, signs, d, kernel, shift, &mut k[0]).ok()?;
        let vmax = k[0].chunks(d).map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt()).fold(0.0, f64::max);
        if !(vmax > 0.0 && vmax.is_finite()) {
            return None;
        }
        // F varies on unit length, so bound the absolute displacement per step
        let h = 0.02 / vmax;
        let ln_h_tau = h.ln() - a;
        if ln_h_tau >= ln_resume + ln_1p_exp(log_tau) {
            return Some(FastPhase::Resume { log_tau, h: ln_h_tau.exp() / ln_1p_exp(log_tau).exp() });
        }
        for st in 1..4 {
            let c = if st == 3 { 1.0 } else { 0.5 };
            for m in 0..n {
                tmp[m] = y[m] + c * h * k[st - 1][m];
            }
            let (_, tail) = k.split_at_mut(st);
            scaled_velocities(&tmp, signs, d, kernel, shift, &mut tail[0]).ok()?;
        }
        for m in 0..n {
            y[m] += h / 6.0 * (k[0][m] + 2.0 * k[1][m] + 2.0 * k[2][m] + k[3][m]);
        }
        log_tau = log_add_exp(log_tau, ln_h_tau);
    }
    None
}

fn max_noise_norm(p: &PerturbationSpec, step: u64, k: usize, d: usize) -> f64 {
    (0..k).map(|i| p.noise(step, i, d).iter().map(|x| x * x).sum::<f64>().sqrt()).fold(0.0, f64::max)
}

fn initial_step(y: &[f64], f: &[f64], cfg: &SimulationConfig) -> f64 {
    let n = y.len() as f64;
    let mut d0 = 0.0;
    let mut d1 = 0.0;
    for (yi, fi) in y.iter().zip(f) {
        let sc = cfg.abs_tol + cfg.rel_tol * yi.abs();
        d0 += (yi / sc).powi(2);
        d1 += (fi / sc).powi(2);
    }
    let d0 = (d0 / n).sqrt();
    let d1 = (d1 / n).sqrt();
    if d1 <= 1e-5 || d0 <= 1e-5 {
        cfg.stride
    } else {
        (0.01 * d0 / d1).clamp(1e-6, cfg.stride)
    }
}
