//! Central-difference derivatives of sampled observables against the closed-form
//! right-hand sides of the radial, pair-distance, angle and ξ equations.

use serde::{Deserialize, Serialize};

use super::observe;
use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::geometry::{angle_ode_coefficients, FrameObservables};
use crate::kernel::ReferenceClock;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualSummary {
    pub name: String,
    pub frames: usize,
    pub max_residual: f64,
    /// Largest residual / allowance.
    pub max_ratio: f64,
    pub worst_s: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdeResidualReport {
    pub stride: f64,
    pub summaries: Vec<ResidualSummary>,
}

/// Relative size of the trajectory error carried into differences.
const SAMPLE_NOISE: f64 = 1e-11;
/// Constant multiplying the remainder scales of the leading-order laws.
pub const REMAINDER_CONSTANT: f64 = 10.0;

/// Residuals in s-units (d/ds = t d/dt) at interior frames with s ≥ s_from.
///
/// The identities for ρ_k, ρ_jk and c_jk hold exactly for the center dynamics, so
/// their allowance is ten times the difference error estimate. The leading angle
/// and ξ laws are compared against their remainder scales t F(L) / L^{3/2} and
/// t F(L) (|a|² + |d|² + L^{-1/2}), each times [`REMAINDER_CONSTANT`].
/// A two-center trajectory is checked against the exact law Ḋ = -2σ₁σ₂F(D).
pub fn ode_residuals(traj: &Trajectory, clock: &ReferenceClock, s_from: f64) -> Result<OdeResidualReport> {
    if traj.len() < 5 {
        return Err(Error::InsufficientSpan("need at least five frames".into()));
    }
    let h = traj.s[1] - traj.s[0];
    let uniform = traj.s.windows(2).take(traj.len().saturating_sub(2)).all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h.max(1.0));
    if !(h <= 0.1 + 1e-12) || !uniform {
        return Err(Error::InsufficientSpan(format!("residuals need a uniform stride <= 0.1, got {h}")));
    }
    let kernel = clock.kernel();
    let lnf = |r: f64| kernel.ln_force(r);
    let ctx = Context { s: &traj.s, h, s_from };

    if traj.signs.len() == 2 {
        let dist: Vec<f64> = (0..traj.len()).map(|n| traj.config(n).distance(0, 1)).collect();
        let sign = -2.0 * f64::from(traj.signs[0] * traj.signs[1]);
        let summary = ctx.summarize("distance", &dist, true, |i| (sign * (traj.s[i] + lnf(dist[i])).exp(), 0.0));
        return Ok(OdeResidualReport { stride: h, summaries: vec![summary] });
    }
    if !traj.config(0).is_one_three() {
        return Err(Error::InvalidSetup("residuals need a (1,3) or two-center trajectory".into()));
    }
    let obs = observe(traj, clock)?;
    let series = |g: &dyn Fn(&FrameObservables) -> f64| obs.iter().map(g).collect::<Vec<f64>>();

    let mut summaries = Vec::new();
    for k in 0..3 {
        let f = series(&|o| o.rho[k]);
        summaries.push(ctx.summarize(&format!("rho_{}", k + 1), &f, true, |i| (rho_rate(&obs[i], k, &lnf), 0.0)));
    }
    for (p, tag) in ["12", "13", "23"].iter().enumerate() {
        let f = series(&|o| o.rho_pair[p]);
        summaries.push(ctx.summarize(&format!("rho_{tag}"), &f, true, |i| (pair_rate(&obs[i], p, &lnf), 0.0)));
    }
    for (p, tag) in ["12", "13", "23"].iter().enumerate() {
        let f = series(&|o| o.c.as_array()[p]);
        summaries.push(ctx.summarize(&format!("c_{tag}"), &f, true, |i| (angle_rate(&obs[i], p, &lnf), 0.0)));
    }
    for (p, tag) in ["12", "13", "23"].iter().enumerate() {
        let f = series(&|o| o.c.as_array()[p]);
        summaries.push(ctx.summarize(&format!("angle_law_{tag}"), &f, false, |i| {
            let o = &obs[i];
            let tfl = (o.s + lnf(o.l)).exp();
            (tfl / o.l * angle_ode_coefficients(o.c)[p], tfl / o.l.powf(1.5))
        }));
    }
    for k in 0..3 {
        let f = series(&|o| o.xi[k]);
        summaries.push(ctx.summarize(&format!("xi_law_{}", k + 1), &f, false, |i| {
            let o = &obs[i];
            let tfl = (o.s + lnf(o.l)).exp();
            let others: f64 = (0..3).filter(|&j| j != k).map(|j| o.xi[j]).sum();
            let a2: f64 = o.a.iter().map(|x| x * x).sum();
            let d2: f64 = o.d.iter().map(|x| x * x).sum();
            (tfl * (-2.0 * o.xi[k] + 0.5 * others), tfl * (a2 + d2 + o.l.powf(-0.5)))
        }));
    }
    Ok(OdeResidualReport { stride: h, summaries })
}

struct Context<'a> {
    s: &'a [f64],
    h: f64,
    s_from: f64,
}

impl Context<'_> {
    /// `rhs(i)` returns the predicted derivative and, for approximate laws, its remainder scale.
    fn summarize(&self, name: &str, f: &[f64], exact: bool, rhs: impl Fn(usize) -> (f64, f64)) -> ResidualSummary {
        let h = self.h;
        let mut sum = ResidualSummary { name: name.to_string(), frames: 0, max_residual: 0.0, max_ratio: 0.0, worst_s: f64::NAN, pass: true };
        for i in 2..f.len() - 2 {
            if self.s[i] < self.s_from {
                continue;
            }
            let measured = (f[i + 1] - f[i - 1]) / (2.0 * h);
            let third = (f[i + 2] - 2.0 * f[i + 1] + 2.0 * f[i - 1] - f[i - 2]) / (2.0 * h * h * h);
            let noise = SAMPLE_NOISE * f[i - 2..=i + 2].iter().fold(1.0f64, |m, x| m.max(x.abs())) / h;
            let difference_error = h * h / 6.0 * third.abs() + noise;
            let (value, remainder) = rhs(i);
            let residual = (measured - value).abs();
            let allowance = if exact { 10.0 * difference_error } else { difference_error + REMAINDER_CONSTANT * remainder };
            let ratio = residual / allowance;
            sum.frames += 1;
            sum.max_residual = sum.max_residual.max(residual);
            if ratio > sum.max_ratio || sum.worst_s.is_nan() {
                sum.max_ratio = sum.max_ratio.max(ratio);
                sum.worst_s = self.s[i];
            }
        }
        sum.pass = sum.frames > 0 && sum.max_ratio <= 1.0;
        sum
    }
}

/// t F(r) at the frame time.
fn tf(o: &FrameObservables, lnf: &dyn Fn(f64) -> f64, r: f64) -> f64 {
    (o.s + lnf(r)).exp()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Index of the like-signed pair {i, j} (0-based solitons 1..3) and the orientation sign of u_ij.
fn pair_index(i: usize, j: usize) -> (usize, f64) {
    match (i, j) {
        (0, 1) => (0, 1.0),
        (1, 0) => (0, -1.0),
        (0, 2) => (1, 1.0),
        (2, 0) => (1, -1.0),
        (1, 2) => (2, 1.0),
        (2, 1) => (2, -1.0),
        _ => unreachable!("pair of distinct like-signed solitons"),
    }
}

fn u_pair(o: &FrameObservables, i: usize, j: usize) -> Vec<f64> {
    let (p, sign) = pair_index(i, j);
    o.u_pair[p].iter().map(|x| sign * x).collect()
}

fn c_of(o: &FrameObservables, i: usize, j: usize) -> f64 {
    if i == j {
        return 1.0;
    }
    o.c.as_array()[pair_index(i, j).0]
}

/// ρ̇_k = 2F(ρ_k) + Σ_j F(ρ_j) c_jk + Σ_j F(ρ_kj) u_kj·u_k.
fn rho_rate(o: &FrameObservables, k: usize, lnf: &dyn Fn(f64) -> f64) -> f64 {
    let mut v = 2.0 * tf(o, lnf, o.rho[k]);
    for j in (0..3).filter(|&j| j != k) {
        v += tf(o, lnf, o.rho[j]) * c_of(o, j, k);
        v += tf(o, lnf, o.rho_pair[pair_index(k, j).0]) * dot(&u_pair(o, k, j), &o.u[k]);
    }
    v
}

/// ρ̇_ij = -2F(ρ_ij) + F(ρ_j) u_ij·u_j + F(ρ_i) u_i·u_ji - F(ρ_jl) u_ji·u_jl - F(ρ_il) u_ij·u_il.
fn pair_rate(o: &FrameObservables, p: usize, lnf: &dyn Fn(f64) -> f64) -> f64 {
    let (i, j) = crate::geometry::PAIRS[p];
    let (i, j) = (i - 1, j - 1);
    let l = 3 - i - j;
    let r = |a: usize, b: usize| o.rho_pair[pair_index(a, b).0];
    -2.0 * tf(o, lnf, r(i, j)) + tf(o, lnf, o.rho[j]) * dot(&u_pair(o, i, j), &o.u[j]) + tf(o, lnf, o.rho[i]) * dot(&o.u[i], &u_pair(o, j, i))
        - tf(o, lnf, r(j, l)) * dot(&u_pair(o, j, i), &u_pair(o, j, l))
        - tf(o, lnf, r(i, l)) * dot(&u_pair(o, i, j), &u_pair(o, i, l))
}

/// ċ_ij for the like-signed pair p, with l the remaining index.
fn angle_rate(o: &FrameObservables, p: usize, lnf: &dyn Fn(f64) -> f64) -> f64 {
    let (i, j) = crate::geometry::PAIRS[p];
    let (i, j) = (i - 1, j - 1);
    let l = 3 - i - j;
    let (ri, rj, rl) = (o.rho[i], o.rho[j], o.rho[l]);
    let r = |a: usize, b: usize| o.rho_pair[pair_index(a, b).0];
    let c = |a: usize, b: usize| c_of(o, a, b);
    let (cij, cil, cjl) = (c(i, j), c(i, l), c(j, l));
    let f = |x: f64| tf(o, lnf, x);
    (1.0 - cij * cij) * (f(ri) / rj + f(rj) / ri + f(r(i, j)) / r(i, j) * (rj / ri + ri / rj))
        + f(rl) * ((cjl - cil * cij) / ri + (cil - cjl * cij) / rj)
        + f(r(i, l)) / r(i, l) * rl * (cjl - cij * cil) / ri
        + f(r(j, l)) / r(j, l) * rl * (cil - cij * cjl) / rj
}
