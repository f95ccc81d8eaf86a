//! Radial ground state of -Δq + q - q^p = 0 by shooting on q(0).
//!
//! The forward shot is only trustworthy while the growing mode seeded by the
//! last-bit uncertainty in q(0) stays negligible. Beyond a junction radius the
//! table is continued by integrating the same ODE inward from r_max, starting
//! on the decaying far-field solution; that direction is stable.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::quadrature::{integrate_pieces_infallible, QuadOptions};
use crate::special::{bessel_k_series, sphere_measure};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShootingOptions {
    pub r_max: f64,
    pub step: f64,
    /// Initial bisection interval for q(0); a non-positive upper end selects
    /// the largest value the fixed step still resolves.
    pub q0_lo: f64,
    pub q0_hi: f64,
    /// Relative bisection tolerance on q(0); 0 bisects to adjacent floats.
    pub bisection_tol: f64,
    /// Relative agreement between table and far field that fixes r_match.
    pub match_tol: f64,
}

impl Default for ShootingOptions {
    fn default() -> Self {
        ShootingOptions { r_max: 30.0, step: 1e-3, q0_lo: 1.0 + 1e-9, q0_hi: 0.0, bisection_tol: 0.0, match_tol: 1e-8 }
    }
}

/// Tabulated ground state on the uniform grid r_i = i * step, i = 0..=N.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialProfile {
    pub params: ModelParams,
    pub opts: ShootingOptions,
    pub q: Vec<f64>,
    pub dq: Vec<f64>,
    pub c_q: f64,
    pub r_match: f64,
    /// Radius where the forward shot hands over to the inward tail.
    pub junction: f64,
    /// Fitted C in |q - c_q r^{-(d-1)/2} e^{-r}| <= C r^{-(d+1)/2} e^{-r} beyond r_match.
    pub tail_constant: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileConstants {
    pub c_q: f64,
    pub grad_component_norm_sq: f64,
    /// |S^{d-1}|.
    pub sphere_measure: f64,
    /// |S^{d-2}|, absent for d = 1.
    pub sphere_measure_lower: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Shot {
    Overshoot,
    Undershoot,
    Undecided,
}

fn nonlinearity(q: f64, p: f64) -> f64 {
    q.abs().powf(p - 1.0) * q
}

fn second_derivative(d: usize, p: f64, r: f64, q: f64, dq: f64) -> f64 {
    if r == 0.0 {
        (q - nonlinearity(q, p)) / d as f64
    } else {
        -(d as f64 - 1.0) / r * dq + q - nonlinearity(q, p)
    }
}

fn rk4_step(d: usize, p: f64, r: f64, h: f64, q: f64, dq: f64) -> (f64, f64) {
    let f = |r: f64, q: f64, dq: f64| (dq, second_derivative(d, p, r, q, dq));
    let (k1q, k1v) = f(r, q, dq);
    let (k2q, k2v) = f(r + 0.5 * h, q + 0.5 * h * k1q, dq + 0.5 * h * k1v);
    let (k3q, k3v) = f(r + 0.5 * h, q + 0.5 * h * k2q, dq + 0.5 * h * k2v);
    let (k4q, k4v) = f(r + h, q + h * k3q, dq + h * k3v);
    (q + h / 6.0 * (k1q + 2.0 * k2q + 2.0 * k3q + k4q), dq + h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v))
}

/// Regular expansion q0 + a r^2 + b r^4 at the first grid node.
fn series_start(d: usize, p: f64, q0: f64, r: f64) -> (f64, f64) {
    let a = (q0 - q0.powf(p)) / (2.0 * d as f64);
    let b = (1.0 - p * q0.powf(p - 1.0)) * a / (4.0 * (d as f64 + 2.0));
    (q0 + a * r * r + b * r.powi(4), 2.0 * a * r + 4.0 * b * r.powi(3))
}

/// Far-field shape r^{-(d-1)/2} e^{-r} S(r) and its derivative, the exact
/// decaying solution of the linearized equation normalized to unit amplitude.
pub fn far_field_shape(d: usize, r: f64) -> (f64, f64) {
    let nu = (d as f64 - 2.0) / 2.0;
    let base = (-(d as f64 - 1.0) / 2.0 * r.ln() - r).exp();
    (base * bessel_k_series(nu, r), -base * bessel_k_series(nu + 1.0, r))
}

/// Natural log of the leading far-field shape, for radii where e^{-r} underflows.
pub fn ln_far_field_shape(d: usize, r: f64) -> f64 {
    let nu = (d as f64 - 2.0) / 2.0;
    -(d as f64 - 1.0) / 2.0 * r.ln() - r + bessel_k_series(nu, r).ln()
}

struct Outward {
    shot: Shot,
    q: Vec<f64>,
    dq: Vec<f64>,
}

fn shoot(params: &ModelParams, opts: &ShootingOptions, q0: f64, record: bool) -> Outward {
    let (d, p, h) = (params.d, params.p, opts.step);
    let n = node_count(opts);
    let mut qs = Vec::new();
    let mut dqs = Vec::new();
    if record {
        qs.reserve(n + 1);
        dqs.reserve(n + 1);
        qs.push(q0);
        dqs.push(0.0);
    }
    let (mut q, mut dq) = series_start(d, p, q0, h);
    if q <= 0.0 {
        return Outward { shot: Shot::Overshoot, q: qs, dq: dqs };
    }
    if record {
        qs.push(q);
        dqs.push(dq);
    }
    for i in 1..n {
        let r = i as f64 * h;
        let next = rk4_step(d, p, r, h, q, dq);
        q = next.0;
        dq = next.1;
        if !(q.is_finite() && dq.is_finite()) || q <= 0.0 {
            return Outward { shot: Shot::Overshoot, q: qs, dq: dqs };
        }
        if dq > 0.0 {
            return Outward { shot: Shot::Undershoot, q: qs, dq: dqs };
        }
        if record {
            qs.push(q);
            dqs.push(dq);
        }
    }
    Outward { shot: Shot::Undecided, q: qs, dq: dqs }
}

fn node_count(opts: &ShootingOptions) -> usize {
    (opts.r_max / opts.step).round() as usize
}

fn inward(params: &ModelParams, opts: &ShootingOptions, amplitude: f64, stop: usize) -> (Vec<f64>, Vec<f64>) {
    let (d, p, h) = (params.d, params.p, opts.step);
    let n = node_count(opts);
    let (phi, dphi) = far_field_shape(d, n as f64 * h);
    let mut q = amplitude * phi;
    let mut dq = amplitude * dphi;
    let mut qs = vec![0.0; n + 1 - stop];
    let mut dqs = vec![0.0; n + 1 - stop];
    qs[n - stop] = q;
    dqs[n - stop] = dq;
    for i in (stop..n).rev() {
        let r = (i + 1) as f64 * h;
        let next = rk4_step(d, p, r, -h, q, dq);
        q = next.0;
        dq = next.1;
        qs[i - stop] = q;
        dqs[i - stop] = dq;
    }
    (qs, dqs)
}

/// Solves for the positive radial ground state.
pub fn solve_profile(params: ModelParams, opts: ShootingOptions) -> Result<RadialProfile> {
    params.validate()?;
    if !(opts.step > 0.0 && opts.r_max > 10.0 && opts.q0_lo > 0.0) {
        return Err(Error::InvalidParams("shooting options out of range".into()));
    }
    let n = node_count(&opts);
    if ((n as f64) * opts.step - opts.r_max).abs() > 1e-9 * opts.r_max {
        return Err(Error::InvalidParams("r_max must be a multiple of the step".into()));
    }
    let mut opts = opts;
    if opts.q0_hi <= 0.0 {
        opts.q0_hi = (0.05 / (params.p * opts.step * opts.step)).powf(1.0 / (params.p - 1.0)).min(1e3);
    }
    let (mut lo, mut hi) = (opts.q0_lo, opts.q0_hi);
    if shoot(&params, &opts, lo, false).shot != Shot::Undershoot || shoot(&params, &opts, hi, false).shot != Shot::Overshoot {
        return Err(Error::NonBracketedShoot { lo, hi });
    }
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= opts.bisection_tol * mid {
            break;
        }
        match shoot(&params, &opts, mid, false).shot {
            Shot::Overshoot => hi = mid,
            Shot::Undershoot => lo = mid,
            Shot::Undecided => {
                lo = mid;
                hi = mid;
                break;
            }
        }
    }
    let under = shoot(&params, &opts, lo, true);
    let over = shoot(&params, &opts, hi, true);
    let len = under.q.len().min(over.q.len());
    // Forward shot is trusted until the bracketing shots separate.
    let split = (1..len).find(|&i| (over.q[i] - under.q[i]).abs() > 1e-10 * under.q[i]).unwrap_or(len);
    let back_off = (1.0 / opts.step).round() as usize;
    if split < 3 * back_off {
        return Err(Error::BlowUp(format!("forward shot diverges already at r = {}", split as f64 * opts.step)));
    }
    let m = (split - back_off).min(n - 5 * back_off);
    let fwd_q: Vec<f64> = (0..=m).map(|i| 0.5 * (under.q[i] + over.q[i])).collect();
    let fwd_dq: Vec<f64> = (0..=m).map(|i| 0.5 * (under.dq[i] + over.dq[i])).collect();

    // Secant on the far-field amplitude so the inward tail meets the forward shot.
    let target = fwd_q[m];
    let r_m = m as f64 * opts.step;
    let mut c0 = target / far_field_shape(params.d, r_m).0;
    let mut c1 = c0 * (1.0 + 1e-3);
    let mut f0 = inward(&params, &opts, c0, m).0[0] - target;
    let mut f1 = inward(&params, &opts, c1, m).0[0] - target;
    for _ in 0..60 {
        if f1 == f0 || (c1 - c0).abs() <= 1e-16 * c1.abs() {
            break;
        }
        let c2 = c1 - f1 * (c1 - c0) / (f1 - f0);
        c0 = c1;
        f0 = f1;
        c1 = c2;
        f1 = inward(&params, &opts, c1, m).0[0] - target;
    }
    let c_q = c1;
    if !(c_q.is_finite() && c_q > 0.0) {
        return Err(Error::BlowUp("far-field amplitude did not converge".into()));
    }
    let (in_q, in_dq) = inward(&params, &opts, c_q, m);
    let slope_gap = (in_dq[0] - fwd_dq[m]).abs() / fwd_dq[m].abs();
    if slope_gap > 1e-6 {
        return Err(Error::BlowUp(format!("slope mismatch {slope_gap:e} at junction r = {r_m}")));
    }
    let mut q = fwd_q;
    let mut dq = fwd_dq;
    q.extend_from_slice(&in_q[1..]);
    dq.extend_from_slice(&in_dq[1..]);

    for i in 1..=n {
        if !(q[i] > 0.0 && q[i] < q[i - 1]) {
            return Err(Error::BlowUp(format!("monotone decay fails at r = {}", i as f64 * opts.step)));
        }
    }

    let rel_gap = |i: usize| {
        let r = i as f64 * opts.step;
        let (phi, dphi) = far_field_shape(params.d, r);
        (q[i] / (c_q * phi) - 1.0).abs().max((dq[i] / (c_q * dphi) - 1.0).abs())
    };
    let mut match_idx = n;
    while match_idx > m && rel_gap(match_idx - 1) <= opts.match_tol {
        match_idx -= 1;
    }
    let r_match = match_idx as f64 * opts.step;

    let nu_tail = params.tail_power();
    let mut tail_constant: f64 = 0.0;
    for i in match_idx..=n {
        let r = i as f64 * opts.step;
        let scaled = q[i] * (nu_tail * r.ln() + r).exp();
        tail_constant = tail_constant.max((scaled - c_q).abs() * r);
    }

    Ok(RadialProfile { params, opts, q, dq, c_q, r_match, junction: r_m, tail_constant })
}

fn hermite(t: f64, h: f64, y0: f64, y1: f64, m0: f64, m1: f64) -> f64 {
    let t2 = t * t;
    let t3 = t2 * t;
    (2.0 * t3 - 3.0 * t2 + 1.0) * y0 + (t3 - 2.0 * t2 + t) * h * m0 + (-2.0 * t3 + 3.0 * t2) * y1 + (t3 - t2) * h * m1
}

impl RadialProfile {
    pub fn step(&self) -> f64 {
        self.opts.step
    }

    pub fn r_max(&self) -> f64 {
        self.opts.r_max
    }

    pub fn q0(&self) -> f64 {
        self.q[0]
    }

    pub fn grid(&self) -> Vec<f64> {
        (0..self.q.len()).map(|i| i as f64 * self.opts.step).collect()
    }

    fn node_second(&self, i: usize) -> f64 {
        second_derivative(self.params.d, self.params.p, i as f64 * self.opts.step, self.q[i], self.dq[i])
    }

    /// Far-field continuation with the fitted amplitude.
    pub fn far_field(&self, r: f64) -> (f64, f64) {
        let (phi, dphi) = far_field_shape(self.params.d, r);
        (self.c_q * phi, self.c_q * dphi)
    }

    /// (q, q') at radius r >= 0.
    pub fn eval(&self, r: f64) -> (f64, f64) {
        let r = r.abs();
        if r > self.r_match {
            return self.far_field(r);
        }
        let h = self.opts.step;
        let n = self.q.len() - 1;
        let i = ((r / h) as usize).min(n - 1);
        let t = (r - i as f64 * h) / h;
        let q = hermite(t, h, self.q[i], self.q[i + 1], self.dq[i], self.dq[i + 1]);
        let dq = hermite(t, h, self.dq[i], self.dq[i + 1], self.node_second(i), self.node_second(i + 1));
        (q, dq)
    }

    pub fn value(&self, r: f64) -> f64 {
        let r = r.abs();
        if r > self.r_match {
            let d = self.params.d;
            let nu = (d as f64 - 2.0) / 2.0;
            let base = (-(d as f64 - 1.0) / 2.0 * r.ln() - r).exp();
            return self.c_q * base * bessel_k_series(nu, r);
        }
        let h = self.opts.step;
        let n = self.q.len() - 1;
        let i = ((r / h) as usize).min(n - 1);
        let t = (r - i as f64 * h) / h;
        hermite(t, h, self.q[i], self.q[i + 1], self.dq[i], self.dq[i + 1])
    }

    /// ln q(r), usable where q itself underflows.
    pub fn ln_value(&self, r: f64) -> f64 {
        if r > self.r_match {
            self.c_q.ln() + ln_far_field_shape(self.params.d, r)
        } else {
            self.value(r).ln()
        }
    }
}

pub fn eval_profile(profile: &RadialProfile, r: f64) -> (f64, f64) {
    profile.eval(r)
}

/// Norm of one gradient component and the sphere measures used by radial reductions.
pub fn profile_constants(profile: &RadialProfile) -> ProfileConstants {
    let d = profile.params.d;
    let r_max = profile.r_max();
    let mut breaks: Vec<f64> = (0..=(r_max.ceil() as usize)).map(|k| (k as f64).min(r_max)).collect();
    breaks.dedup();
    let opts = QuadOptions { rel_tol: 1e-12, ..Default::default() };
    let body = integrate_pieces_infallible(
        |r| {
            let dq = profile.eval(r).1;
            dq * dq * r.powi(d as i32 - 1)
        },
        &breaks,
        &opts,
    );
    // Tail beyond r_max from the far-field law, leading order.
    let tail = profile.c_q * profile.c_q * (-2.0 * r_max).exp() / 2.0;
    let s_d1 = sphere_measure(d);
    ProfileConstants {
        c_q: profile.c_q,
        grad_component_norm_sq: s_d1 / d as f64 * (body + tail),
        sphere_measure: s_d1,
        sphere_measure_lower: if d >= 2 { Some(sphere_measure(d - 1)) } else { None },
    }
}
