use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::InteractionKernel;
use crate::fit::least_squares;
use crate::quadrature::fixed_kronrod;

/// Solution of L' = F(L), L(0) = 1, through the inverse map s(L) = ln ∫_1^L dx / F(x).
#[derive(Debug, Clone)]
pub struct ReferenceClock {
    kernel: Arc<InteractionKernel>,
    nodes_l: Vec<f64>,
    nodes_s: Vec<f64>,
    pub s_max: f64,
    pub c_star: f64,
    pub fit: ClockFit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClockFit {
    pub c_star: f64,
    pub s_lo: f64,
    pub s_hi: f64,
    pub slope: f64,
    pub rms_residual: f64,
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// ln ∫_a^b exp(-ln F(x)) dx on a short interval.
fn ln_segment(kernel: &InteractionKernel, a: f64, b: f64) -> f64 {
    if b <= a {
        return f64::NEG_INFINITY;
    }
    let top = -kernel.ln_force(b);
    let v = fixed_kronrod(|x| (-kernel.ln_force(x) - top).exp(), a, b);
    top + v.ln()
}

const FINE: f64 = 0.05;
const COARSE: f64 = 0.25;
const FINE_UNTIL: f64 = 40.0;

/// Builds the clock for clock times up to t_max.
pub fn reference_clock(kernel: Arc<InteractionKernel>, t_max: f64) -> ReferenceClock {
    ReferenceClock::to_log_time(kernel, t_max.ln())
}

impl ReferenceClock {
    /// Builds the clock up to s_max = ln t_max, usable when t_max overflows.
    pub fn to_log_time(kernel: Arc<InteractionKernel>, s_max: f64) -> ReferenceClock {
        let s_max = s_max.max(10f64.ln());
        let mut nodes_l = vec![1.0];
        let mut nodes_s = vec![f64::NEG_INFINITY];
        let target = s_max + 10.0;
        let mut k = 0usize;
        loop {
            let l = *nodes_l.last().unwrap();
            let s = *nodes_s.last().unwrap();
            if s > target {
                break;
            }
            k += 1;
            let next = if l < FINE_UNTIL { 1.0 + k as f64 * FINE } else { l + COARSE };
            nodes_s.push(log_add_exp(s, ln_segment(&kernel, l, next)));
            nodes_l.push(next);
        }
        let mut clock = ReferenceClock {
            kernel,
            nodes_l,
            nodes_s,
            s_max,
            c_star: f64::NAN,
            fit: ClockFit { c_star: f64::NAN, s_lo: 0.0, s_hi: 0.0, slope: 0.0, rms_residual: 0.0 },
        };
        let lo = (0.5 * s_max).max(3.0);
        clock.fit = clock.fit_c_star(lo, s_max.max(lo + 1.0));
        clock.c_star = clock.fit.c_star;
        clock
    }

    pub fn kernel(&self) -> &Arc<InteractionKernel> {
        &self.kernel
    }

    /// s(L) = ln t(L).
    pub fn log_time_at(&self, l: f64) -> f64 {
        if l <= 1.0 {
            return f64::NEG_INFINITY;
        }
        let i = self.nodes_l.partition_point(|&x| x <= l) - 1;
        let mut s = self.nodes_s[i];
        let mut a = self.nodes_l[i];
        while a < l {
            let b = (a + COARSE).min(l);
            s = log_add_exp(s, ln_segment(&self.kernel, a, b));
            a = b;
        }
        s
    }

    /// L at log-time s.
    pub fn l_at_s(&self, s: f64) -> f64 {
        if s == f64::NEG_INFINITY {
            return 1.0;
        }
        let n = self.nodes_s.len();
        let j = self.nodes_s.partition_point(|&x| x <= s);
        let (mut lo, mut hi) = if j == 0 {
            (1.0, self.nodes_l[1])
        } else if j >= n {
            let last = self.nodes_l[n - 1];
            (last, last + 2.0 * (s - self.nodes_s[n - 1]) + 1.0)
        } else {
            (self.nodes_l[j - 1], self.nodes_l[j])
        };
        let mut l = if j >= 1 && j < n && self.nodes_s[j - 1].is_finite() {
            let w = (s - self.nodes_s[j - 1]) / (self.nodes_s[j] - self.nodes_s[j - 1]);
            lo + w * (hi - lo)
        } else {
            0.5 * (lo + hi)
        };
        for _ in 0..100 {
            let sl = self.log_time_at(l);
            if sl > s {
                hi = l;
            } else {
                lo = l;
            }
            let slope = (sl + self.kernel.ln_force(l)).exp();
            let mut next = l - (sl - s) * slope;
            if !(next > lo && next < hi) || !sl.is_finite() {
                next = 0.5 * (lo + hi);
            }
            if (next - l).abs() <= 4.0 * f64::EPSILON * l {
                return next;
            }
            l = next;
        }
        l
    }

    /// L(t); L(0) = 1.
    pub fn l_at_t(&self, t: f64) -> f64 {
        if t <= 0.0 {
            1.0
        } else {
            self.l_at_s(t.ln())
        }
    }

    /// dL/ds = t F(L).
    pub fn dl_ds(&self, s: f64) -> f64 {
        (s + self.kernel.ln_force(self.l_at_s(s))).exp()
    }

    /// Intercept of L - s + ((d-1)/2) ln s regressed on (ln s / s, 1 / s) over [s_lo, s_hi].
    pub fn fit_c_star(&self, s_lo: f64, s_hi: f64) -> ClockFit {
        let nu = self.kernel.params.tail_power();
        let n = 200;
        let mut x1 = Vec::with_capacity(n);
        let mut x2 = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        for k in 0..n {
            let s = s_lo + (s_hi - s_lo) * k as f64 / (n - 1) as f64;
            x1.push(s.ln() / s);
            x2.push(1.0 / s);
            y.push(self.l_at_s(s) - s + nu * s.ln());
        }
        let fit = least_squares(&[vec![1.0; n], x1, x2], &y).expect("well-posed clock fit");
        ClockFit { c_star: fit.coef[0], s_lo, s_hi, slope: fit.coef[1], rms_residual: fit.rms_residual }
    }
}
