//! Frame geometry of a (1,3) configuration and the algebra of the angle system.

mod inequalities;

pub use inequalities::{gram_inequality_suite, triangle_angle_bounds, InequalityReport, TriangleReport};

use serde::{Deserialize, Serialize};

use crate::dynamics::SolitonConfiguration;
use crate::error::{Error, Result};
use crate::kernel::{InteractionKernel, ReferenceClock};

/// ln((4 + √3)/4).
pub fn c_heart() -> f64 {
    ((4.0 + 3f64.sqrt()) / 4.0).ln()
}

/// Like-signed pairs in reporting order: (1,2), (1,3), (2,3).
pub const PAIRS: [(usize, usize); 3] = [(1, 2), (1, 3), (2, 3)];

/// Second smallest of three values.
pub fn mid3(a: f64, b: f64, c: f64) -> f64 {
    a.min(b).max(a.max(b).min(c))
}

/// Inner products (c12, c13, c23) of three unit vectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GramAngles {
    pub c12: f64,
    pub c13: f64,
    pub c23: f64,
}

impl GramAngles {
    pub fn new(c12: f64, c13: f64, c23: f64) -> Self {
        GramAngles { c12, c13, c23 }
    }

    pub fn from_units(u1: &[f64], u2: &[f64], u3: &[f64]) -> Self {
        GramAngles { c12: dot(u1, u2), c13: dot(u1, u3), c23: dot(u2, u3) }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.c12, self.c13, self.c23]
    }

    /// Gram determinant 1 + 2 c12 c13 c23 - c12² - c13² - c23², unclamped.
    pub fn gram_determinant(&self) -> f64 {
        let GramAngles { c12, c13, c23 } = *self;
        1.0 + 2.0 * c12 * c13 * c23 - c12 * c12 - c13 * c13 - c23 * c23
    }

    /// Gram determinant with rounding-level negatives (down to -1e-10) clamped to zero.
    pub fn gram_determinant_clamped(&self) -> f64 {
        let a = self.gram_determinant();
        if (-1e-10..0.0).contains(&a) {
            0.0
        } else {
            a
        }
    }

    pub fn is_feasible(&self) -> bool {
        self.as_array().iter().all(|c| (-1.0..=1.0).contains(c)) && self.gram_determinant() >= -1e-10
    }

    /// Matrix with diagonal 2 and the inner products off the diagonal.
    pub fn c_matrix(&self) -> [[f64; 3]; 3] {
        let GramAngles { c12, c13, c23 } = *self;
        [[2.0, c12, c13], [c12, 2.0, c23], [c13, c23, 2.0]]
    }
}

/// Solvability data of C b = (1, 1, 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GramPackage {
    /// 𝒟 = det C.
    pub cal_d: f64,
    pub b: [f64; 3],
    /// ã_k = -ln b_k.
    pub a_tilde: [f64; 3],
    pub cal_n: f64,
}

pub fn gram_package(c: GramAngles) -> GramPackage {
    let GramAngles { c12, c13, c23 } = c;
    let cal_d = 2.0 * (4.0 + c12 * c13 * c23 - c12 * c12 - c23 * c23 - c13 * c13);
    let b =
        [(2.0 - c23) * (2.0 + c23 - c12 - c13) / cal_d, (2.0 - c13) * (2.0 + c13 - c12 - c23) / cal_d, (2.0 - c12) * (2.0 + c12 - c23 - c13) / cal_d];
    let cal_n = 8.0 + 4.0 * c12 * c23 * c13 - 3.0 * (c12 * c12 + c23 * c23 + c13 * c13) - c12 * c13 - c12 * c23 - c23 * c13 + 2.0 * (c12 + c23 + c13);
    GramPackage { cal_d, b, a_tilde: b.map(|x| -x.ln()), cal_n }
}

/// Leading factors of (ċ12, ċ13, ċ23) with the F(L)/L prefactor removed.
pub fn angle_ode_coefficients(c: GramAngles) -> [f64; 3] {
    let GramAngles { c12, c13, c23 } = c;
    let g = gram_package(c);
    let n = g.cal_n;
    [
        (1.0 - c12) * (n - c12 * c12 - c23 * c13 + 2.0 * c12) / g.cal_d,
        (1.0 - c13) * (n - c13 * c13 - c12 * c23 + 2.0 * c13) / g.cal_d,
        (1.0 - c23) * (n - c23 * c23 - c12 * c13 + 2.0 * c23) / g.cal_d,
    ]
}

/// ξ_k = a_k minus the fixed combination of angle defects d_jk.
pub fn xi_from(a: [f64; 3], d: [f64; 3]) -> [f64; 3] {
    let [d12, d13, d23] = d;
    [
        a[0] - (4.0 * d12 + 4.0 * d13 + 2.0 * d23) / 5.0,
        a[1] - (4.0 * d12 + 2.0 * d13 + 4.0 * d23) / 5.0,
        a[2] - (2.0 * d12 + 4.0 * d13 + 4.0 * d23) / 5.0,
    ]
}

/// Every derived quantity of one frame of a (1,3) configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameObservables {
    pub s: f64,
    /// L at this time.
    pub l: f64,
    pub big_z: [Vec<f64>; 3],
    pub rho: [f64; 3],
    pub u: [Vec<f64>; 3],
    /// Z_jk = z_k - z_j for (1,2), (1,3), (2,3).
    pub big_z_pair: [Vec<f64>; 3],
    pub rho_pair: [f64; 3],
    pub u_pair: [Vec<f64>; 3],
    pub c: GramAngles,
    pub gram_a: f64,
    pub d_min: f64,
    pub d_tilde: f64,
    pub d_hat: f64,
    pub d_mod: f64,
    /// Interaction energy; underflows to zero for well separated frames.
    pub v: f64,
    /// V / F(D), evaluated in log space.
    pub v_over_fd: f64,
    pub package: GramPackage,
    /// d_jk = c_jk + 1/2.
    pub d: [f64; 3],
    /// Sum of |d_jk|.
    pub frak_c: f64,
    /// a_k = ρ_k - L.
    pub a: [f64; 3],
    pub zeta: [f64; 3],
    pub lyapunov: f64,
    pub xi: [f64; 3],
    /// ρ12 + ρ13 + ρ23.
    pub cal_r: f64,
    pub w: Vec<f64>,
    pub cal_w: f64,
    /// 𝓡 / 𝒲, +∞ when 𝒲 is at rounding level.
    pub cal_x: f64,
}

/// Observables at log time s, with L taken from the clock.
pub fn frame_observables(config: &SolitonConfiguration, kernel: &InteractionKernel, clock: &ReferenceClock, s: f64) -> Result<FrameObservables> {
    frame_observables_with_l(config, kernel, s, clock.l_at_s(s))
}

/// Observables for a prescribed value of L.
pub fn frame_observables_with_l(config: &SolitonConfiguration, kernel: &InteractionKernel, s: f64, l: f64) -> Result<FrameObservables> {
    if !config.is_one_three() {
        return Err(Error::InvalidSetup("frame observables need four centers with signs (+,-,-,-) or (-,+,+,+)".into()));
    }
    let d = config.d;
    let z0 = config.center(0);
    let big_z: [Vec<f64>; 3] = std::array::from_fn(|k| sub(config.center(k + 1), z0));
    let rho = big_z.clone().map(|z| norm(&z));
    if rho.iter().any(|&r| !(r > 0.0)) {
        return Err(Error::DegenerateFrame("a negative center coincides with the positive one".into()));
    }
    let u: [Vec<f64>; 3] = std::array::from_fn(|k| scale(&big_z[k], 1.0 / rho[k]));
    let big_z_pair: [Vec<f64>; 3] = std::array::from_fn(|p| {
        let (j, k) = PAIRS[p];
        sub(config.center(k), config.center(j))
    });
    let rho_pair = big_z_pair.clone().map(|z| norm(&z));
    if rho_pair.iter().any(|&r| !(r > 0.0)) {
        return Err(Error::DegenerateFrame("two negative centers coincide".into()));
    }
    let u_pair: [Vec<f64>; 3] = std::array::from_fn(|p| scale(&big_z_pair[p], 1.0 / rho_pair[p]));
    let c = GramAngles::from_units(&u[0], &u[1], &u[2]);
    let gram_a = c.gram_determinant_clamped();
    let d_tilde = rho_pair[0].min(rho_pair[2]).min(rho_pair[1]);
    let d_hat = rho[0].min(rho[1]).min(rho[2]);
    let d_min = d_tilde.min(d_hat);
    let d_mod = rho[0].min(rho[1]).min(rho[2] + c_heart());

    // V = Σ_k F(ρ_k) - Σ_pairs F(ρ_jk)
    let ln_fd = kernel.ln_force(d_min);
    let mut v_over_fd = 0.0;
    for r in rho {
        v_over_fd += (kernel.ln_force(r) - ln_fd).exp();
    }
    for r in rho_pair {
        v_over_fd -= (kernel.ln_force(r) - ln_fd).exp();
    }
    let v = v_over_fd * ln_fd.exp();

    let package = gram_package(c);
    let dd = c.as_array().map(|x| x + 0.5);
    let frak_c = dd.iter().map(|x| x.abs()).sum();
    let a = rho.map(|r| r - l);
    let zeta: [f64; 3] = std::array::from_fn(|k| a[k] - package.a_tilde[k]);
    let lyapunov = (0..3).map(|k| package.b[k] * ((-zeta[k]).exp() + zeta[k] - 1.0)).sum();
    let xi = xi_from(a, dd);
    let cal_r = rho_pair.iter().sum();
    let w: Vec<f64> = (0..d).map(|i| big_z[0][i] + big_z[1][i] + big_z[2][i]).collect();
    let cal_w = norm(&w);
    let cal_x = if cal_w <= 64.0 * f64::EPSILON * rho.iter().sum::<f64>() { f64::INFINITY } else { cal_r / cal_w };

    Ok(FrameObservables {
        s,
        l,
        big_z,
        rho,
        u,
        big_z_pair,
        rho_pair,
        u_pair,
        c,
        gram_a,
        d_min,
        d_tilde,
        d_hat,
        d_mod,
        v,
        v_over_fd,
        package,
        d: dd,
        frak_c,
        a,
        zeta,
        lyapunov,
        xi,
        cal_r,
        w,
        cal_w,
        cal_x,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovPackage {
    pub zeta: [f64; 3],
    pub lyapunov: f64,
    pub xi: [f64; 3],
}

pub fn lyapunov_package(obs: &FrameObservables) -> LyapunovPackage {
    LyapunovPackage { zeta: obs.zeta, lyapunov: obs.lyapunov, xi: obs.xi }
}

/// 𝓛 for given weights and offsets.
pub fn lyapunov_value(b: [f64; 3], zeta: [f64; 3]) -> f64 {
    (0..3).map(|k| b[k] * ((-zeta[k]).exp() + zeta[k] - 1.0)).sum()
}

/// Scalar observable columns written after the center coordinates in trajectory CSVs.
pub const CSV_COLUMNS: [&str; 42] = [
    "L",
    "rho1",
    "rho2",
    "rho3",
    "rho12",
    "rho13",
    "rho23",
    "c12",
    "c13",
    "c23",
    "A",
    "D",
    "D_tilde",
    "D_hat",
    "D_mod",
    "V",
    "V_over_FD",
    "cal_D",
    "b1",
    "b2",
    "b3",
    "a_tilde1",
    "a_tilde2",
    "a_tilde3",
    "cal_N",
    "d12",
    "d13",
    "d23",
    "frak_C",
    "a1",
    "a2",
    "a3",
    "zeta1",
    "zeta2",
    "zeta3",
    "cal_L",
    "xi1",
    "xi2",
    "xi3",
    "cal_R",
    "cal_W",
    "cal_X",
];

impl FrameObservables {
    /// Values in [`CSV_COLUMNS`] order.
    pub fn csv_values(&self) -> Vec<f64> {
        let mut v = vec![self.l];
        v.extend(self.rho);
        v.extend(self.rho_pair);
        v.extend(self.c.as_array());
        v.extend([self.gram_a, self.d_min, self.d_tilde, self.d_hat, self.d_mod, self.v, self.v_over_fd, self.package.cal_d]);
        v.extend(self.package.b);
        v.extend(self.package.a_tilde);
        v.push(self.package.cal_n);
        v.extend(self.d);
        v.push(self.frak_c);
        v.extend(self.a);
        v.extend(self.zeta);
        v.push(self.lyapunov);
        v.extend(self.xi);
        v.extend([self.cal_r, self.cal_w, self.cal_x]);
        v
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn scale(a: &[f64], k: f64) -> Vec<f64> {
    a.iter().map(|x| x * k).collect()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
