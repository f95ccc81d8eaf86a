//! Pair interaction g(r), the force law F(r) and the reference clock.

mod clock;

pub use clock::{reference_clock, ClockFit, ReferenceClock};

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ground_state::{profile_constants, ProfileConstants, RadialProfile};
use crate::params::ModelParams;
use crate::quadrature::{try_integrate, try_integrate_pieces, QuadOptions};
use crate::special::bessel_k_series;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelOptions {
    pub r_switch: f64,
    /// First tabulated radius; the force is only meaningful from r = 1 on.
    pub table_start: f64,
    pub table_step: f64,
    pub quad: QuadOptionsSerde,
}

/// Serializable mirror of [`QuadOptions`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadOptionsSerde {
    pub rel_tol: f64,
    pub abs_tol: f64,
}

impl From<QuadOptionsSerde> for QuadOptions {
    fn from(q: QuadOptionsSerde) -> Self {
        QuadOptions { rel_tol: q.rel_tol, abs_tol: q.abs_tol, ..Default::default() }
    }
}

impl Default for KernelOptions {
    fn default() -> Self {
        KernelOptions { r_switch: 20.0, table_start: 0.75, table_step: 0.05, quad: QuadOptionsSerde { rel_tol: 1e-9, abs_tol: 1e-30 } }
    }
}

/// Force law with a tabulated exact branch below `r_switch` and the far-field
/// law above it. The table stores h(r) = ln g(r) + r + ((d-1)/2) ln r and h'(r).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InteractionKernel {
    pub params: ModelParams,
    pub constants: ProfileConstants,
    #[serde(skip)]
    pub profile: Option<Arc<RadialProfile>>,
    pub alpha: f64,
    /// Integral of Q^p(x) e^{-x_1}.
    pub source_moment: f64,
    /// Far-field amplitude of g: c_q times `source_moment`.
    pub c_g: f64,
    pub opts: KernelOptions,
    pub table_h: Vec<f64>,
    pub table_dh: Vec<f64>,
    /// Fitted C in |g - c_g r^{-(d-1)/2} e^{-r}| <= C r^{-(d+1)/2} e^{-r} near r_switch.
    pub overlap_constant: f64,
}

fn tail_power(d: usize) -> f64 {
    (d as f64 - 1.0) / 2.0
}

fn outer_breaks(r: f64) -> Vec<f64> {
    let mut b = vec![0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, r, r + 2.0, r + 8.0, r + 30.0, 64.0];
    b.retain(|&x| x >= 0.0 && x <= (r + 30.0).max(64.0));
    b.sort_by(|a, c| a.partial_cmp(c).unwrap());
    b.dedup_by(|a, c| (*a - *c).abs() < 1e-12);
    b
}

fn angular_weight(d: usize, theta: f64) -> f64 {
    match d {
        2 => 1.0,
        3 => theta.sin(),
        _ => theta.sin().powi(d as i32 - 2),
    }
}

/// Source density p q^{p-1} q' of the radial derivative of Q^p.
fn source(profile: &RadialProfile, s: f64) -> f64 {
    let (q, dq) = profile.eval(s);
    profile.params.p * q.powf(profile.params.p - 1.0) * dq
}

/// g(r) = -∫ ∂_1(Q^p)(x) Q(x - r e_1) dx by direct quadrature.
pub fn interaction_g(profile: &RadialProfile, r: f64) -> Result<f64> {
    interaction_g_with(profile, r, &KernelOptions::default().quad.into(), false)
}

/// g'(r) by direct quadrature.
pub fn interaction_g_derivative(profile: &RadialProfile, r: f64) -> Result<f64> {
    interaction_g_with(profile, r, &KernelOptions::default().quad.into(), true)
}

fn interaction_g_with(profile: &RadialProfile, r: f64, quad: &QuadOptions, derivative: bool) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::InvalidParams(format!("interaction radius must be positive, got {r}")));
    }
    let d = profile.params.d;
    let partner = |rho: f64, along: f64| -> f64 {
        if derivative {
            // d/dr q(|x - r e_1|), with `along` = r - x_1.
            if rho == 0.0 {
                0.0
            } else {
                profile.eval(rho).1 * along / rho
            }
        } else {
            profile.value(rho)
        }
    };
    if d == 1 {
        let f = |x: f64| -> Result<f64> {
            let src = source(profile, x.abs()) * x.signum();
            Ok(-src * partner((x - r).abs(), r - x))
        };
        let mut breaks = vec![-40.0, -8.0, -2.0, 0.0, 0.5 * r, r, r + 2.0, r + 8.0, r + 40.0];
        breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
        breaks.dedup();
        return try_integrate_pieces(f, &breaks, quad);
    }
    let lower = crate::special::sphere_measure(d - 1);
    let inner_opts = *quad;
    let outer = |s: f64| -> Result<f64> {
        let src = source(profile, s);
        if src == 0.0 {
            return Ok(0.0);
        }
        let centre = partner(r, r);
        let scale = partner((r - s).abs().max(1e-300), r - s).abs().max(centre.abs());
        let opts = QuadOptions { abs_tol: (1e-12 * scale).max(quad.abs_tol), ..inner_opts };
        let inner = |th: f64| -> Result<f64> {
            let c = th.cos();
            let rho = (s * s + r * r - 2.0 * r * s * c).max(0.0).sqrt();
            Ok(c * angular_weight(d, th) * (partner(rho, r - s * c) - centre))
        };
        // The partner factor varies on the angular scale |r - s| / sqrt(r s) near θ = 0.
        let width = ((r - s).abs() / (r * s).sqrt()).clamp(1e-3, 0.5);
        let ang = try_integrate_pieces(inner, &[0.0, width, 4.0 * width, std::f64::consts::FRAC_PI_2, std::f64::consts::PI], &opts)?;
        Ok(s.powi(d as i32 - 1) * src * ang)
    };
    let v = try_integrate_pieces(outer, &outer_breaks(r), quad)?;
    Ok(-lower * v)
}

/// ∫ Q^p(x) e^{-x_1} dx via the radial-angular reduction.
pub fn source_moment(profile: &RadialProfile) -> Result<f64> {
    let d = profile.params.d;
    let p = profile.params.p;
    let quad = QuadOptions::default();
    let breaks = [0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0];
    if d == 1 {
        let v = try_integrate_pieces(|s| Ok(profile.value(s).powf(p) * s.cosh()), &breaks, &quad)?;
        return Ok(2.0 * v);
    }
    let lower = crate::special::sphere_measure(d - 1);
    let outer = |s: f64| -> Result<f64> {
        let qp = profile.value(s).powf(p);
        let ang = try_integrate(
            |th: f64| Ok((-s * th.cos()).exp() * angular_weight(d, th)),
            0.0,
            std::f64::consts::PI,
            &QuadOptions { rel_tol: 1e-11, ..quad },
        )?;
        Ok(qp * s.powi(d as i32 - 1) * ang)
    };
    Ok(lower * try_integrate_pieces(outer, &breaks, &quad)?)
}

/// Far-field amplitude c_g of g(r) ~ c_g r^{-(d-1)/2} e^{-r}.
pub fn asymptotic_constant_cg(profile: &RadialProfile) -> Result<f64> {
    Ok(profile.c_q * source_moment(profile)?)
}

/// ln of the far-field law of g, including its algebraic corrections.
fn ln_g_far(d: usize, c_g: f64, r: f64) -> f64 {
    c_g.ln() - tail_power(d) * r.ln() - r + bessel_k_series(d as f64 / 2.0, r).ln()
}

fn d_ln_g_far(d: usize, r: f64) -> f64 {
    let e = 1e-5 * r.max(1.0);
    (ln_g_far(d, 1.0, r + e) - ln_g_far(d, 1.0, r - e)) / (2.0 * e)
}

impl InteractionKernel {
    pub fn build(profile: Arc<RadialProfile>, alpha: f64, opts: KernelOptions) -> Result<Self> {
        let params = ModelParams { alpha, ..profile.params };
        params.validate()?;
        if !(opts.r_switch > opts.table_start + 1.0 && opts.table_step > 0.0) {
            return Err(Error::InvalidParams("kernel table range is empty".into()));
        }
        let constants = profile_constants(&profile);
        let moment = source_moment(&profile)?;
        let c_g = profile.c_q * moment;
        let quad: QuadOptions = opts.quad.into();
        let d = params.d;
        let nodes = ((opts.r_switch - opts.table_start) / opts.table_step).round() as usize;
        let rows: Vec<Result<(f64, f64)>> = (0..=nodes)
            .into_par_iter()
            .map(|i| {
                let r = opts.table_start + i as f64 * opts.table_step;
                let g = interaction_g_with(&profile, r, &quad, false)?;
                let dg = interaction_g_with(&profile, r, &quad, true)?;
                if !(g > 0.0) {
                    return Err(Error::QuadratureNonConverged(format!("g({r}) = {g} is not positive")));
                }
                Ok((g.ln() + r + tail_power(d) * r.ln(), dg / g + 1.0 + tail_power(d) / r))
            })
            .collect();
        let mut table_h = Vec::with_capacity(nodes + 1);
        let mut table_dh = Vec::with_capacity(nodes + 1);
        for row in rows {
            let (h, dh) = row?;
            table_h.push(h);
            table_dh.push(dh);
        }
        let mut kernel = InteractionKernel {
            params,
            constants,
            profile: Some(profile.clone()),
            alpha,
            source_moment: moment,
            c_g,
            opts,
            table_h,
            table_dh,
            overlap_constant: 0.0,
        };
        let mut c: f64 = 0.0;
        for k in 0..=8 {
            let r = opts.r_switch - 2.0 + 0.5 * k as f64;
            let g = interaction_g_with(&profile, r, &quad, false)?;
            let scaled = (g.ln() + r + tail_power(d) * r.ln()).exp();
            c = c.max((scaled - c_g).abs() * r);
        }
        kernel.overlap_constant = c;
        Ok(kernel)
    }

    pub fn r_switch(&self) -> f64 {
        self.opts.r_switch
    }

    /// 2 α ‖∂_1 Q‖², the denominator of the force law.
    pub fn force_denominator(&self) -> f64 {
        2.0 * self.alpha * self.constants.grad_component_norm_sq
    }

    /// ln g(r).
    pub fn ln_g(&self, r: f64) -> f64 {
        let d = self.params.d;
        if r > self.opts.r_switch {
            return ln_g_far(d, self.c_g, r);
        }
        let h = self.opts.table_step;
        let n = self.table_h.len() - 1;
        let x = ((r - self.opts.table_start) / h).max(0.0);
        let i = (x as usize).min(n - 1);
        let t = x - i as f64;
        let t2 = t * t;
        let t3 = t2 * t;
        let hv = (2.0 * t3 - 3.0 * t2 + 1.0) * self.table_h[i]
            + (t3 - 2.0 * t2 + t) * h * self.table_dh[i]
            + (-2.0 * t3 + 3.0 * t2) * self.table_h[i + 1]
            + (t3 - t2) * h * self.table_dh[i + 1];
        hv - r - tail_power(d) * r.ln()
    }

    /// d/dr ln g(r).
    pub fn d_ln_g(&self, r: f64) -> f64 {
        let d = self.params.d;
        if r > self.opts.r_switch {
            return d_ln_g_far(d, r);
        }
        let h = self.opts.table_step;
        let n = self.table_h.len() - 1;
        let x = ((r - self.opts.table_start) / h).max(0.0);
        let i = (x as usize).min(n - 1);
        let t = x - i as f64;
        let t2 = t * t;
        let dh = ((6.0 * t2 - 6.0 * t) * self.table_h[i]
            + (3.0 * t2 - 4.0 * t + 1.0) * h * self.table_dh[i]
            + (-6.0 * t2 + 6.0 * t) * self.table_h[i + 1]
            + (3.0 * t2 - 2.0 * t) * h * self.table_dh[i + 1])
            / h;
        dh - 1.0 - tail_power(d) / r
    }

    pub fn g(&self, r: f64) -> f64 {
        self.ln_g(r).exp()
    }

    /// Leading-order law c_g r^{-(d-1)/2} e^{-r}.
    pub fn g_leading(&self, r: f64) -> f64 {
        (self.c_g.ln() - tail_power(self.params.d) * r.ln() - r).exp()
    }

    /// ln F(r); finite for every r where F itself underflows.
    pub fn ln_force(&self, r: f64) -> f64 {
        self.ln_g(r) - self.force_denominator().ln()
    }

    /// F(r) = g(r) / (2 α ‖∂_1 Q‖²).
    pub fn force(&self, r: f64) -> f64 {
        self.ln_g(r).exp() / self.force_denominator()
    }

    /// Same kernel with a different damping coefficient.
    pub fn with_alpha(&self, alpha: f64) -> Self {
        InteractionKernel { alpha, params: ModelParams { alpha, ..self.params }, ..self.clone() }
    }

    /// Limit of L(t) - ln t + ((d-1)/2) ln ln t, fixed by the far-field amplitude of F.
    pub fn clock_constant_limit(&self) -> f64 {
        (self.c_g / self.force_denominator()).ln()
    }
}

pub fn force(kernel: &InteractionKernel, r: f64) -> f64 {
    kernel.force(r)
}
