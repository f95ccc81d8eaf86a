//! Initial data: equilateral (1,3) configurations, two-body setups, and the
//! projection of generic data onto the set of data converging to the rigid frame.

use serde::{Deserialize, Serialize};

use super::{simulate, SimulationConfig, SolitonConfiguration};
use crate::error::{Error, Result};
use crate::kernel::InteractionKernel;

/// z_0 = 0 with sign +1 and three -1 centers at radius r0 on the e1-e2 circle.
pub fn equilateral(d: usize, r0: f64) -> Result<SolitonConfiguration> {
    if d < 2 {
        return Err(Error::InvalidSetup("an equilateral frame needs d >= 2".into()));
    }
    let mut centers = vec![vec![0.0; d]];
    for k in 0..3 {
        let a = 2.0 * std::f64::consts::PI * k as f64 / 3.0;
        let mut z = vec![0.0; d];
        z[0] = r0 * a.cos();
        z[1] = r0 * a.sin();
        centers.push(z);
    }
    SolitonConfiguration::new(d, centers, vec![1, -1, -1, -1])
}

/// Equilateral frame with every center displaced by a uniform point of the ball of radius eps * r0.
pub fn perturbed_equilateral(d: usize, r0: f64, eps: f64, seed: u64) -> Result<SolitonConfiguration> {
    let mut cfg = equilateral(d, r0)?;
    let mut rng = crate::rng::seeded(seed);
    for k in 0..4 {
        let v = crate::rng::unit_ball(&mut rng, d);
        for c in 0..d {
            cfg.centers[k * d + c] += eps * r0 * v[c];
        }
    }
    Ok(cfg)
}

/// Two centers separated by r0 along e1.
pub fn two_body(d: usize, r0: f64, same_sign: bool) -> Result<SolitonConfiguration> {
    let mut z1 = vec![0.0; d];
    z1[0] = r0;
    let s1 = if same_sign { 1 } else { -1 };
    SolitonConfiguration::new(d, vec![vec![0.0; d], z1], vec![1, s1])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProjectionOptions {
    /// Continuation targets in s; entries beyond the final time are dropped and the final time is appended.
    pub stages: Vec<f64>,
    pub max_iter: usize,
    pub fd_step: f64,
    pub step_tol: f64,
    pub residual_tol: f64,
    pub max_step: f64,
    pub rel_tol: f64,
}

impl Default for ProjectionOptions {
    fn default() -> Self {
        ProjectionOptions {
            stages: vec![20.0, 25.0, 30.0, 40.0, 60.0, 100.0, 200.0, 500.0, 1000.0, 3000.0, 10000.0],
            max_iter: 30,
            fd_step: 1e-7,
            step_tol: 1e-13,
            residual_tol: 1e-14,
            max_step: 0.2,
            rel_tol: 1e-11,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub config: SolitonConfiguration,
    /// Tangent rotation parameters applied to Z_2 and Z_3.
    pub angles: Vec<f64>,
    /// |(c_12 + 1/2, c_13 + 1/2, c_23 + 1/2)| at the last stage target.
    pub residual: f64,
    pub iterations: usize,
    pub s_target: f64,
    pub history: Vec<ProjectionStage>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectionStage {
    pub s_target: f64,
    pub residual: f64,
    pub iterations: usize,
    /// Largest Jacobian entry at the last iteration; NaN when no iteration ran.
    pub jacobian_norm: f64,
}

/// Move generic (1,3) data onto the set of data whose frame becomes rigid.
///
/// For d >= 3 the centers are first projected onto their best-fit plane (see
/// [`planarize`]), since the out-of-plane mode of the frame is unstable. Then Z_2
/// and Z_3 are rotated about z_0 within the plane by Gauss-Newton with forward-difference Jacobians on the residual c_jk(s_T) + 1/2,
/// continued in s_T so that each stage starts inside the previous basin.
pub fn project_to_rigid_manifold(
    init: &SolitonConfiguration,
    kernel: &InteractionKernel,
    sim: &SimulationConfig,
    opts: &ProjectionOptions,
) -> Result<Projection> {
    if !init.is_one_three() {
        return Err(Error::InvalidSetup("projection needs a (1,3) configuration".into()));
    }
    let d = init.d;
    if d < 2 {
        return Err(Error::InvalidSetup("projection needs d >= 2".into()));
    }
    let init = &planarize(init);
    let bases: Vec<Vec<Vec<f64>>> = (2..4).map(|k| in_plane_tangent(&unit(&rel(init, k)))).collect();
    let m = 2 * bases[0].len();
    let mut theta = vec![0.0; m];
    let mut stages: Vec<f64> = opts.stages.iter().copied().filter(|&s| s < sim.s_max).collect();
    stages.push(sim.s_max);
    let mut total_iter = 0;
    let mut residual = f64::NAN;
    let mut history = Vec::new();
    let mut fd = opts.fd_step;
    for &s_t in &stages {
        let stage = SimulationConfig { s_max: s_t, stride: s_t - sim.s0(), rel_tol: opts.rel_tol, perturbation: None, ..sim.clone() };
        let eval = |th: &[f64]| -> Result<Vec<f64>> {
            let cfg = rotated(init, &bases, th);
            let traj = simulate(&cfg, kernel, &stage)?;
            if let Some(c) = traj.collision {
                return Err(Error::Collision { s: c.s });
            }
            Ok(angle_residual(&traj.last()))
        };
        let mut r = eval(&theta)?;
        let mut iters = 0;
        let mut jac_norm = f64::NAN;
        for _ in 0..opts.max_iter {
            if norm(&r) < opts.residual_tol {
                break;
            }
            let mut jac = vec![0.0; 3 * m];
            for j in 0..m {
                // shrink the difference step until the response is in the linear range
                let mut h = fd;
                loop {
                    let mut th = theta.clone();
                    th[j] += h;
                    let rj = match eval(&th) {
                        Ok(rj) => rj,
                        Err(_) => {
                            th[j] -= 2.0 * h;
                            h = -h;
                            eval(&th)?
                        }
                    };
                    let col: Vec<f64> = (0..3).map(|i| (rj[i] - r[i]) / h).collect();
                    if norm(&col) * h.abs() <= 1e-4 || h.abs() < 1e-15 {
                        for i in 0..3 {
                            jac[i * m + j] = col[i];
                        }
                        break;
                    }
                    h = 0.01 * h.abs();
                }
            }
            jac_norm = jac.iter().fold(0.0f64, |a, x| a.max(x.abs()));
            fd = (1e-6 / jac_norm).min(opts.fd_step).max(1e-15);
            let neg: Vec<f64> = r.iter().map(|x| -x).collect();
            let mut step = crate::fit::min_norm_solve(3, m, &jac, &neg).ok_or_else(|| Error::InvalidSetup("singular projection Jacobian".into()))?;
            let sn = norm(&step);
            if sn > opts.max_step {
                step.iter_mut().for_each(|x| *x *= opts.max_step / sn);
            }
            iters += 1;
            let mut accepted = false;
            let mut lambda = 1.0;
            for _ in 0..20 {
                let th: Vec<f64> = theta.iter().zip(&step).map(|(t, s)| t + lambda * s).collect();
                if let Ok(rn) = eval(&th) {
                    if norm(&rn) < norm(&r) {
                        theta = th;
                        r = rn;
                        accepted = true;
                        break;
                    }
                }
                lambda *= 0.5;
            }
            if !accepted || lambda * sn < opts.step_tol {
                break;
            }
        }
        total_iter += iters;
        residual = norm(&r);
        history.push(ProjectionStage { s_target: s_t, residual, iterations: iters, jacobian_norm: jac_norm });
    }
    Ok(Projection { config: rotated(init, &bases, &theta), angles: theta, residual, iterations: total_iter, s_target: sim.s_max, history })
}

fn rel(cfg: &SolitonConfiguration, k: usize) -> Vec<f64> {
    cfg.center(k).iter().zip(cfg.center(0)).map(|(a, b)| a - b).collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn unit(v: &[f64]) -> Vec<f64> {
    let n = norm(v);
    v.iter().map(|x| x / n).collect()
}

/// Tangent directions to the unit vector u inside span{e1, e2}.
fn in_plane_tangent(u: &[f64]) -> Vec<Vec<f64>> {
    let mut t = vec![0.0; u.len()];
    t[0] = -u[1];
    t[1] = u[0];
    vec![unit(&t)]
}

/// Orthogonal projection of the centers onto their best-fit plane, expressed in
/// coordinates where that plane is span{e1, e2}.
///
/// The flow preserves planar configurations exactly, and with vanishing trailing
/// coordinates it does so in floating point as well.
pub fn planarize(cfg: &SolitonConfiguration) -> SolitonConfiguration {
    let d = cfg.d;
    if d == 2 {
        return cfg.clone();
    }
    let k = cfg.len();
    let mean: Vec<f64> = (0..d).map(|c| (0..k).map(|i| cfg.center(i)[c]).sum::<f64>() / k as f64).collect();
    let rows: Vec<f64> = (0..k).flat_map(|i| (0..d).map(|c| cfg.center(i)[c] - mean[c]).collect::<Vec<_>>()).collect();
    let m = nalgebra::DMatrix::from_row_slice(k, d, &rows);
    let svd = m.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let axes: Vec<Vec<f64>> = order[..2].iter().map(|&r| v_t.row(r).iter().copied().collect()).collect();
    let mut centers = vec![0.0; k * d];
    for i in 0..k {
        for (a, axis) in axes.iter().enumerate() {
            centers[i * d + a] = cfg.center(i).iter().zip(axis).map(|(x, y)| x * y).sum();
        }
    }
    cfg.with_centers(centers)
}

/// Rotate Z_2 and Z_3 about z_0 by the tangent parameters.
fn rotated(init: &SolitonConfiguration, bases: &[Vec<Vec<f64>>], theta: &[f64]) -> SolitonConfiguration {
    let d = init.d;
    let per = bases[0].len();
    let mut out = init.clone();
    for (slot, k) in (2..4).enumerate() {
        let z = rel(init, k);
        let rho = norm(&z);
        let u = unit(&z);
        let mut w = vec![0.0; d];
        for (t, b) in theta[slot * per..(slot + 1) * per].iter().zip(&bases[slot]) {
            w.iter_mut().zip(b).for_each(|(x, y)| *x += t * y);
        }
        let a = norm(&w);
        let (ca, sa) = (a.cos(), if a > 0.0 { a.sin() / a } else { 1.0 });
        for c in 0..d {
            out.centers[k * d + c] = init.center(0)[c] + rho * (ca * u[c] + sa * w[c]);
        }
    }
    out
}

fn angle_residual(cfg: &SolitonConfiguration) -> Vec<f64> {
    let u: Vec<Vec<f64>> = (1..4).map(|k| unit(&rel(cfg, k))).collect();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    vec![dot(&u[0], &u[1]) + 0.5, dot(&u[0], &u[2]) + 0.5, dot(&u[1], &u[2]) + 0.5]
}
