//! Trajectory-level checks: the radial law and equilateral limit, decay envelopes,
//! consistency with the derived ODE identities, and the separation hierarchy.

mod envelopes;
mod residuals;

pub use envelopes::{
    decay_envelopes, decay_envelopes_in, fit_envelope, DecayFit, EnvelopeWindow, WindowExponent, EXPONENT_SLACK, NOISE_FLOOR, ZERO_THRESHOLD,
};
pub use residuals::{ode_residuals, OdeResidualReport, ResidualSummary, REMAINDER_CONSTANT};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::fit::least_squares;
use crate::geometry::{frame_observables_with_l, FrameObservables};
use crate::kernel::ReferenceClock;

/// Observables at every frame of a (1,3) trajectory.
pub fn observe(traj: &Trajectory, clock: &ReferenceClock) -> Result<Vec<FrameObservables>> {
    let kernel = clock.kernel();
    (0..traj.len()).map(|n| frame_observables_with_l(&traj.config(n), kernel, traj.s[n], clock.l_at_s(traj.s[n]))).collect()
}

/// log t - ((d-1)/2) log log t at s = log t.
pub fn radial_law(s: f64, d: usize) -> f64 {
    s - 0.5 * (d as f64 - 1.0) * s.ln()
}

fn require_long_one_three(traj: &Trajectory) -> Result<()> {
    if let Some(c) = traj.collision {
        return Err(Error::Collision { s: c.s });
    }
    if !traj.last().is_one_three() {
        return Err(Error::InvalidSetup("trajectory is not a (1,3) configuration".into()));
    }
    let s_end = *traj.s.last().expect("non-empty trajectory");
    if s_end < 100.0 || traj.len() < 16 {
        return Err(Error::InsufficientSpan(format!("need s_max >= 100 and 16 frames, got s_max = {s_end} with {} frames", traj.len())));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RigidityReport {
    pub s_end: f64,
    /// u_k at the final frame.
    pub omega: [Vec<f64>; 3],
    pub omega_norm_error: f64,
    pub omega_sum_norm: f64,
    /// Barycenter of the four centers at the final frame.
    pub z_infinity: Vec<f64>,
    pub z0_end_distance: f64,
    pub c0: f64,
    pub c0_fit_rms: f64,
    pub c_star: f64,
    /// 10 log log t / log t at the final frame.
    pub c0_tolerance: f64,
    /// (s, max_k |z_k - z_∞ - ω_k (log t - ((d-1)/2) log log t + c0)|).
    pub residual_series: Vec<(f64, f64)>,
    pub checks: BTreeMap<String, bool>,
}

/// Limit directions, limit center and radial constant of a (1,3) trajectory.
///
/// c0 is the intercept of ρ̄ - (log t - ((d-1)/2) log log t), with ρ̄ the mean
/// radius, regressed on [1, log log t / log t, 1/log t] over the trailing half.
pub fn fit_rigidity(traj: &Trajectory, clock: &ReferenceClock) -> Result<RigidityReport> {
    require_long_one_three(traj)?;
    let d = traj.d;
    let last = traj.last();
    let n_end = traj.len() - 1;
    let s_end = traj.s[n_end];
    let z0 = last.center(0).to_vec();
    let omega: [Vec<f64>; 3] = std::array::from_fn(|k| {
        let z: Vec<f64> = last.center(k + 1).iter().zip(&z0).map(|(a, b)| a - b).collect();
        let n = norm(&z);
        z.into_iter().map(|x| x / n).collect()
    });
    let omega_norm_error = omega.iter().map(|w| (norm(w) - 1.0).abs()).fold(0.0, f64::max);
    let sum: Vec<f64> = (0..d).map(|i| omega.iter().map(|w| w[i]).sum()).collect();
    let z_infinity: Vec<f64> = (0..d).map(|i| (0..4).map(|k| last.center(k)[i]).sum::<f64>() / 4.0).collect();

    let half = s_end / 2.0;
    let (mut x1, mut x2, mut y) = (Vec::new(), Vec::new(), Vec::new());
    for n in 0..traj.len() {
        let s = traj.s[n];
        if s < half || s <= 1.0 {
            continue;
        }
        let cfg = traj.config(n);
        let mean_rho = (1..4).map(|k| cfg.distance(0, k)).sum::<f64>() / 3.0;
        x1.push(s.ln() / s);
        x2.push(1.0 / s);
        y.push(mean_rho - radial_law(s, d));
    }
    let ones = vec![1.0; y.len()];
    let fit = least_squares(&[ones, x1, x2], &y).ok_or_else(|| Error::InsufficientSpan("radial constant fit is singular".into()))?;
    let c0 = fit.coef[0];
    let c0_tolerance = 10.0 * s_end.ln() / s_end;

    let residual_series = (0..traj.len())
        .map(|n| {
            let s = traj.s[n];
            let cfg = traj.config(n);
            let r = if s > 1.0 { radial_law(s, d) + c0 } else { f64::NAN };
            let worst = (0..3)
                .map(|k| {
                    let z = cfg.center(k + 1);
                    norm(&(0..d).map(|i| z[i] - z_infinity[i] - omega[k][i] * r).collect::<Vec<_>>())
                })
                .fold(0.0, f64::max);
            (s, worst)
        })
        .collect();

    let omega_sum_norm = norm(&sum);
    let z0_end_distance = norm(&(0..d).map(|i| z0[i] - z_infinity[i]).collect::<Vec<_>>());
    let mut checks = BTreeMap::new();
    checks.insert("omega_unit".to_string(), omega_norm_error <= 1e-10);
    checks.insert("omega_sum".to_string(), omega_sum_norm <= 1e-2);
    checks.insert("c0_matches_clock".to_string(), (c0 - clock.c_star).abs() <= c0_tolerance);
    Ok(RigidityReport {
        s_end,
        omega,
        omega_norm_error,
        omega_sum_norm,
        z_infinity,
        z0_end_distance,
        c0,
        c0_fit_rms: fit.rms_residual,
        c_star: clock.c_star,
        c0_tolerance,
        residual_series,
        checks,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchyCheck {
    pub name: String,
    pub frames_checked: usize,
    pub violations: usize,
    pub first_violation: Option<usize>,
    /// Smallest value of (left side - right side) over the checked frames.
    pub worst_margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum HierarchyReport {
    NotApplicable {
        reason: String,
    },
    Checked {
        burn_in: f64,
        /// max |D - (log t - ((d-1)/2) log log t)| after burn-in and s > 1.
        c_d: f64,
        /// Spread of D - (log t - ((d-1)/2) log log t) after burn-in.
        c_d_spread: f64,
        checks: Vec<HierarchyCheck>,
        passed: bool,
    },
}

/// Frame-wise separation and sign conditions after a burn-in time.
pub fn separation_hierarchy_check(traj: &Trajectory, clock: &ReferenceClock, burn_in: f64) -> Result<HierarchyReport> {
    if traj.signs.len() != 4 || !traj.config(0).is_one_three() {
        return Ok(HierarchyReport::NotApplicable { reason: "not a (1,3) configuration".into() });
    }
    let kernel = clock.kernel();
    let names = ["separation_gap", "interaction_sign", "gram_determinant", "solvability", "weights"];
    let mut checks: Vec<HierarchyCheck> = names
        .iter()
        .map(|n| HierarchyCheck { name: n.to_string(), frames_checked: 0, violations: 0, first_violation: None, worst_margin: f64::INFINITY })
        .collect();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut c_d: f64 = 0.0;
    for n in 0..traj.len() {
        let s = traj.s[n];
        if s < burn_in {
            continue;
        }
        let obs = frame_observables_with_l(&traj.config(n), kernel, s, clock.l_at_s(s))?;
        if s > 1.0 {
            let dev = obs.d_min - radial_law(s, traj.d);
            lo = lo.min(dev);
            hi = hi.max(dev);
            c_d = c_d.max(dev.abs());
        }
        let b_lo = obs.package.b.iter().copied().fold(f64::INFINITY, f64::min);
        let b_hi = obs.package.b.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let margins = [
            obs.d_tilde - obs.d_min - obs.d_min.powf(0.2),
            obs.v_over_fd + 0.01,
            obs.gram_a,
            (obs.package.cal_d - 4.0).min(10.0 - obs.package.cal_d),
            (b_lo - 0.05).min(3.75 - b_hi),
        ];
        for (c, m) in checks.iter_mut().zip(margins) {
            c.frames_checked += 1;
            c.worst_margin = c.worst_margin.min(m);
            let violated = match c.name.as_str() {
                "separation_gap" | "interaction_sign" => !(m > 0.0),
                "gram_determinant" => m < -1e-10,
                _ => m < 0.0,
            };
            if violated {
                c.violations += 1;
                c.first_violation.get_or_insert(n);
            }
        }
    }
    if checks[0].frames_checked == 0 {
        return Err(Error::InsufficientSpan(format!("no frames after burn-in s = {burn_in}")));
    }
    let passed = checks.iter().all(|c| c.violations == 0);
    let c_d_spread = if hi >= lo { hi - lo } else { 0.0 };
    Ok(HierarchyReport::Checked { burn_in, c_d, c_d_spread, checks, passed })
}

/// Direction drift and radial-law constants of a two-body run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoBodyReport {
    pub collided: bool,
    pub collision_s: Option<f64>,
    /// max over frames of |u(s) - u(0)|.
    pub direction_drift: f64,
    /// Mean of D - (log t - ((d-1)/2) log log t) over [s_end/4, s_end/2] and [s_end/2, s_end].
    pub window_constants: Option<(f64, f64)>,
}

pub fn two_body_report(traj: &Trajectory) -> Result<TwoBodyReport> {
    if traj.signs.len() != 2 {
        return Err(Error::InvalidSetup("two-body report needs exactly two centers".into()));
    }
    let d = traj.d;
    let dir = |n: usize| {
        let c = traj.config(n);
        let z: Vec<f64> = (0..d).map(|i| c.center(1)[i] - c.center(0)[i]).collect();
        let r = norm(&z);
        z.into_iter().map(|x| x / r).collect::<Vec<f64>>()
    };
    let u0 = dir(0);
    let direction_drift = (0..traj.len()).map(|n| norm(&dir(n).iter().zip(&u0).map(|(a, b)| a - b).collect::<Vec<_>>())).fold(0.0, f64::max);
    let s_end = *traj.s.last().expect("non-empty trajectory");
    let window_constants = if traj.collision.is_none() && s_end > 8.0 {
        let mean_in = |a: f64, b: f64| {
            let v: Vec<f64> = (0..traj.len())
                .filter(|&n| traj.s[n] >= a && traj.s[n] <= b)
                .map(|n| traj.config(n).distance(0, 1) - radial_law(traj.s[n], d))
                .collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        Some((mean_in(s_end / 4.0, s_end / 2.0), mean_in(s_end / 2.0, s_end)))
    } else {
        None
    };
    Ok(TwoBodyReport { collided: traj.collision.is_some(), collision_s: traj.collision.map(|c| c.s), direction_drift, window_constants })
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
