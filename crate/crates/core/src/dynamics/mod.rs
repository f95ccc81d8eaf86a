//! Reduced center dynamics ż_k = -Σ_{i≠k} σ_i σ_k F(|z_k - z_i|) (z_k - z_i)/|z_k - z_i|.

mod generators;
mod integrator;

pub use generators::{
    equilateral, perturbed_equilateral, planarize, project_to_rigid_manifold, two_body, Projection, ProjectionOptions, ProjectionStage,
};
pub use integrator::{simulate, CollisionEvent, IntegratorStats, SimulationConfig, Trajectory};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::InteractionKernel;

/// K centers in R^d with signs ±1, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolitonConfiguration {
    pub d: usize,
    pub centers: Vec<f64>,
    pub signs: Vec<i8>,
}

impl SolitonConfiguration {
    pub fn new(d: usize, centers: Vec<Vec<f64>>, signs: Vec<i8>) -> Result<Self> {
        if centers.len() != signs.len() || centers.is_empty() {
            return Err(Error::InvalidSetup("need one sign per center".into()));
        }
        if centers.iter().any(|c| c.len() != d) {
            return Err(Error::InvalidSetup(format!("every center must have {d} coordinates")));
        }
        if signs.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::InvalidSetup("signs must be +1 or -1".into()));
        }
        Ok(SolitonConfiguration { d, centers: centers.concat(), signs })
    }

    pub fn len(&self) -> usize {
        self.signs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signs.is_empty()
    }

    pub fn center(&self, k: usize) -> &[f64] {
        &self.centers[k * self.d..(k + 1) * self.d]
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        dist(self.center(i), self.center(j))
    }

    /// Smallest pairwise distance and the pair attaining it (first in index order).
    pub fn min_distance(&self) -> (f64, usize, usize) {
        min_pair(&self.centers, self.d)
    }

    /// One center carries the opposite sign of the other three, and it is center 0.
    pub fn is_one_three(&self) -> bool {
        self.len() == 4 && self.signs[1] == self.signs[2] && self.signs[2] == self.signs[3] && self.signs[0] == -self.signs[1]
    }

    pub fn with_centers(&self, centers: Vec<f64>) -> Self {
        SolitonConfiguration { centers, ..self.clone() }
    }
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub(crate) fn min_pair(centers: &[f64], d: usize) -> (f64, usize, usize) {
    let k = centers.len() / d;
    let mut best = (f64::INFINITY, 0, 0);
    for i in 0..k {
        for j in i + 1..k {
            let r = dist(&centers[i * d..(i + 1) * d], &centers[j * d..(j + 1) * d]);
            if r < best.0 {
                best = (r, i, j);
            }
        }
    }
    best
}

/// Bounded perturbation of norm at most C e^{-θ D} per soliton.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    pub amplitude: f64,
    pub theta: f64,
    pub seed: u64,
}

impl PerturbationSpec {
    pub fn validate(&self, p: f64) -> Result<()> {
        let upper = (p - 1.0).min(2.0);
        if !(self.theta > 1.0 && self.theta < upper) {
            return Err(Error::InvalidSetup(format!("theta = {} must lie in (1, {upper})", self.theta)));
        }
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return Err(Error::InvalidSetup("perturbation amplitude must be finite and non-negative".into()));
        }
        Ok(())
    }

    /// Unit-ball noise vector for (step, soliton).
    pub fn noise(&self, step: u64, soliton: usize, d: usize) -> Vec<f64> {
        let mut rng = crate::rng::keyed(self.seed, step, soliton as u64);
        crate::rng::unit_ball(&mut rng, d)
    }
}

/// Velocities scaled by e^{shift}: shift = 0 gives dz/dt, shift = s = ln t gives dz/ds.
pub(crate) fn scaled_velocities(centers: &[f64], signs: &[i8], d: usize, kernel: &InteractionKernel, shift: f64, out: &mut [f64]) -> Result<()> {
    let k = signs.len();
    out.iter_mut().for_each(|v| *v = 0.0);
    let mut diff = [0.0f64; 8];
    for a in 0..k {
        for b in a + 1..k {
            let mut r2 = 0.0;
            for c in 0..d {
                diff[c] = centers[a * d + c] - centers[b * d + c];
                r2 += diff[c] * diff[c];
            }
            let r = r2.sqrt();
            if !(r >= 1.0) {
                return Err(Error::TooClose { i: a, j: b, distance: r });
            }
            let w = (shift + kernel.ln_force(r)).exp();
            let coef = -(signs[a] as f64) * (signs[b] as f64) * w / r;
            for c in 0..d {
                out[a * d + c] += coef * diff[c];
                out[b * d + c] -= coef * diff[c];
            }
        }
    }
    Ok(())
}

/// ż_k for every center.
pub fn rhs(config: &SolitonConfiguration, kernel: &InteractionKernel) -> Result<Vec<Vec<f64>>> {
    let mut out = vec![0.0; config.centers.len()];
    scaled_velocities(&config.centers, &config.signs, config.d, kernel, 0.0, &mut out)?;
    Ok(out.chunks(config.d).map(|c| c.to_vec()).collect())
}

/// ż_k plus the keyed perturbation for the given step index.
pub fn perturbed_rhs(config: &SolitonConfiguration, kernel: &InteractionKernel, pert: &PerturbationSpec, step: u64) -> Result<Vec<Vec<f64>>> {
    let mut out = vec![0.0; config.centers.len()];
    scaled_velocities(&config.centers, &config.signs, config.d, kernel, 0.0, &mut out)?;
    add_perturbation(&config.centers, config.d, pert, step, 0.0, &mut out);
    Ok(out.chunks(config.d).map(|c| c.to_vec()).collect())
}

pub(crate) fn add_perturbation(centers: &[f64], d: usize, pert: &PerturbationSpec, step: u64, shift: f64, out: &mut [f64]) {
    if pert.amplitude == 0.0 {
        return;
    }
    let (dmin, _, _) = min_pair(centers, d);
    let scale = (shift + pert.amplitude.ln() - pert.theta * dmin).exp();
    for k in 0..centers.len() / d {
        let eta = pert.noise(step, k, d);
        for c in 0..d {
            out[k * d + c] += scale * eta[c];
        }
    }
}
