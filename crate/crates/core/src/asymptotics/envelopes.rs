//! Power-law upper envelopes value ≲ C s^β of decaying observables.

use serde::{Deserialize, Serialize};

use super::{norm, observe, require_long_one_three};
use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::fit::least_squares;
use crate::kernel::ReferenceClock;

/// Values below 1e-14 times the series scale count as zero.
pub const ZERO_THRESHOLD: f64 = 1e-14;
/// Series whose peak stays below 1e-9 times the series scale are at the
/// resolution of the default integrator tolerance and are not fitted.
pub const NOISE_FLOOR: f64 = 1e-9;
/// Slack allowed above the bound exponent.
pub const EXPONENT_SLACK: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EnvelopeWindow {
    /// [s_end / 2, s_end].
    TrailingHalf,
    Between {
        s_lo: f64,
        s_hi: f64,
    },
    /// From `burn_in` to the first sample at or below the noise floor: the larger
    /// of `floor_factor` times the median magnitude over the last tenth of the run
    /// and [`NOISE_FLOOR`] times the series scale.
    Resolved {
        burn_in: f64,
        floor_factor: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowExponent {
    pub s_lo: f64,
    pub s_hi: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub name: String,
    /// Exponent of the proven upper bound in powers of log t.
    pub bound_exponent: f64,
    pub series: Vec<(f64, f64)>,
    pub window: (f64, f64),
    pub samples_in_window: usize,
    pub beta: Option<f64>,
    /// ln C with value ≤ C s^β on the window.
    pub log_constant: Option<f64>,
    pub rms_residual: Option<f64>,
    pub identically_zero: bool,
    /// The series sits at its noise floor throughout the window: below
    /// [`NOISE_FLOOR`] times its scale, or with too few samples left above it in a
    /// resolved window.
    pub at_noise_floor: bool,
    /// Exponents on three consecutive sub-windows of equal length in ln s.
    pub window_exponents: Vec<WindowExponent>,
    /// Later sub-windows never loosen by more than 0.05.
    pub monotone: bool,
    pub pass: bool,
}

/// Fits the envelope of one series.
pub fn fit_envelope(name: &str, bound_exponent: f64, scale: f64, series: Vec<(f64, f64)>, window: EnvelopeWindow) -> Result<DecayFit> {
    let s_end = series.last().map(|p| p.0).ok_or_else(|| Error::InsufficientSpan("empty series".into()))?;
    let (s_lo, s_hi) = match window {
        EnvelopeWindow::TrailingHalf => (s_end / 2.0, s_end),
        EnvelopeWindow::Between { s_lo, s_hi } => (s_lo, s_hi),
        EnvelopeWindow::Resolved { burn_in, floor_factor } => {
            let mut tail: Vec<f64> = series.iter().filter(|p| p.0 >= 0.9 * s_end).map(|p| p.1.abs()).collect();
            tail.sort_by(f64::total_cmp);
            let floor = (floor_factor * tail.get(tail.len() / 2).copied().unwrap_or(0.0)).max(NOISE_FLOOR * scale);
            let end = series.iter().find(|p| p.0 >= burn_in && p.1.abs() <= floor).map_or(s_end, |p| p.0);
            (burn_in, end)
        }
    };
    let pts: Vec<(f64, f64)> = series.iter().copied().filter(|p| p.0 >= s_lo && p.0 <= s_hi && p.0 > 0.0).collect();
    let peak = pts.iter().map(|p| p.1.abs()).fold(0.0, f64::max);
    let identically_zero = !pts.is_empty() && peak <= ZERO_THRESHOLD * scale;
    let usable: Vec<(f64, f64)> = pts.iter().copied().filter(|p| p.1.abs() > 0.0).collect();
    let at_noise_floor =
        !identically_zero && (peak <= NOISE_FLOOR * scale || (usable.len() < 8 && matches!(window, EnvelopeWindow::Resolved { .. })));
    let mut out = DecayFit {
        name: name.to_string(),
        bound_exponent,
        window: (s_lo, s_hi),
        samples_in_window: pts.len(),
        beta: None,
        log_constant: None,
        rms_residual: None,
        identically_zero,
        at_noise_floor,
        window_exponents: Vec::new(),
        monotone: true,
        pass: identically_zero || at_noise_floor,
        series,
    };
    if identically_zero || at_noise_floor {
        return Ok(out);
    }
    if usable.len() < 8 {
        return Err(Error::InsufficientSpan(format!("{name}: only {} usable samples in [{s_lo}, {s_hi}]", usable.len())));
    }
    let (beta, log_c, rms) = loglog_fit(&usable).ok_or_else(|| Error::InsufficientSpan(format!("{name}: degenerate fit")))?;
    out.beta = Some(beta);
    out.log_constant = Some(log_c);
    out.rms_residual = Some(rms);
    let (a, b) = (usable[0].0.ln(), usable[usable.len() - 1].0.ln());
    for j in 0..3 {
        let lo = (a + (b - a) * j as f64 / 3.0).exp();
        let hi = (a + (b - a) * (j + 1) as f64 / 3.0).exp();
        let sub: Vec<(f64, f64)> = usable.iter().copied().filter(|p| p.0 >= lo && p.0 <= hi).collect();
        if let Some((bj, _, _)) = (sub.len() >= 4).then(|| loglog_fit(&sub)).flatten() {
            out.window_exponents.push(WindowExponent { s_lo: lo, s_hi: hi, beta: bj });
        }
    }
    out.monotone = out.window_exponents.windows(2).all(|w| w[1].beta <= w[0].beta + 0.05);
    out.pass = beta <= bound_exponent + EXPONENT_SLACK;
    Ok(out)
}

/// (β, ln C, rms) with ln C chosen so that the envelope bounds every sample.
fn loglog_fit(pts: &[(f64, f64)]) -> Option<(f64, f64, f64)> {
    let x: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let y: Vec<f64> = pts.iter().map(|p| p.1.abs().ln()).collect();
    let fit = least_squares(&[vec![1.0; x.len()], x.clone()], &y)?;
    let beta = fit.coef[1];
    let log_c = x.iter().zip(&y).map(|(xi, yi)| yi - beta * xi).fold(f64::NEG_INFINITY, f64::max);
    Some((beta, log_c, fit.rms_residual))
}

/// Envelopes of every monitored series over the trailing half of the run.
pub fn decay_envelopes(traj: &Trajectory, clock: &ReferenceClock) -> Result<Vec<DecayFit>> {
    decay_envelopes_in(traj, clock, EnvelopeWindow::TrailingHalf)
}

/// Name, bound exponent, scale and samples of one monitored series.
type Monitored<'a> = (&'a str, f64, f64, Vec<(f64, f64)>);

pub fn decay_envelopes_in(traj: &Trajectory, clock: &ReferenceClock, window: EnvelopeWindow) -> Result<Vec<DecayFit>> {
    require_long_one_three(traj)?;
    let obs = observe(traj, clock)?;
    let d = traj.d;
    let last = traj.last();
    let z_inf: Vec<f64> = (0..d).map(|i| (0..4).map(|k| last.center(k)[i]).sum::<f64>() / 4.0).collect();
    let length = obs.iter().map(|o| o.rho[0].max(o.rho[1]).max(o.rho[2])).fold(1.0, f64::max);
    let mk = |f: &dyn Fn(usize) -> f64| (0..traj.len()).map(|n| (traj.s[n], f(n))).collect::<Vec<_>>();
    let dist_to_inf = |p: &[f64]| norm(&(0..d).map(|i| p[i] - z_inf[i]).collect::<Vec<_>>());
    let specs: Vec<Monitored> = vec![
        ("frak_c", -0.5, 1.0, mk(&|n| obs[n].frak_c)),
        ("abs_d", -3.0, 1.0, mk(&|n| norm(&obs[n].d))),
        ("abs_zeta", -0.5, length, mk(&|n| norm(&obs[n].zeta))),
        ("lyapunov", -1.0, 1.0, mk(&|n| obs[n].lyapunov)),
        ("abs_xi", -3.0, length, mk(&|n| norm(&obs[n].xi))),
        ("z0_drift", -2.0, length, mk(&|n| dist_to_inf(traj.config(n).center(0)))),
        ("cal_w", -2.0, length, mk(&|n| obs[n].cal_w)),
        (
            "barycenter_drift",
            -2.0,
            length,
            mk(&|n| {
                let c = traj.config(n);
                let b: Vec<f64> = (0..d).map(|i| (0..4).map(|k| c.center(k)[i]).sum::<f64>() / 4.0).collect();
                dist_to_inf(&b)
            }),
        ),
    ];
    specs.into_iter().map(|(name, e, scale, series)| fit_envelope(name, e, scale, series, window)).collect()
}
