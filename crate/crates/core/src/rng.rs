//! Deterministic sampling helpers on top of ChaCha streams.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Standard normal pair by Box-Muller; consumes exactly two uniforms.
pub fn normal_pair<R: Rng>(rng: &mut R) -> (f64, f64) {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen::<f64>();
    let m = (-2.0 * u1.ln()).sqrt();
    let a = 2.0 * std::f64::consts::PI * u2;
    (m * a.cos(), m * a.sin())
}

pub fn unit_sphere<R: Rng>(rng: &mut R, d: usize) -> Vec<f64> {
    loop {
        let mut v = Vec::with_capacity(d + 1);
        while v.len() < d {
            let (a, b) = normal_pair(rng);
            v.push(a);
            v.push(b);
        }
        v.truncate(d);
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Uniform point in the closed unit ball.
pub fn unit_ball<R: Rng>(rng: &mut R, d: usize) -> Vec<f64> {
    let dir = unit_sphere(rng, d);
    let radius = rng.gen::<f64>().powf(1.0 / d as f64);
    dir.into_iter().map(|x| x * radius).collect()
}

/// Generator addressed by (seed, stream, offset) so draws do not depend on call history.
pub fn keyed(seed: u64, stream: u64, offset: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.set_word_pos(offset as u128 * 64);
    rng
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
