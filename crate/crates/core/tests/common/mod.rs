#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::{Arc, OnceLock};

use soliton_rigidity::cache::Cache;
use soliton_rigidity::cli::{setup, NumericsSpec, Setup};
use soliton_rigidity::kernel::{InteractionKernel, ReferenceClock};
use soliton_rigidity::ModelParams;

/// Cache shared by the test binaries of this crate.
pub fn cache() -> Cache {
    Cache::new(PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("soliton-cache"))
}

fn build(d: usize, p: f64) -> Setup {
    setup(ModelParams::new(d, p, 1.0).unwrap(), &NumericsSpec::default(), 1e4, &cache()).unwrap()
}

/// Profile, kernel and clock (to s = 10⁴) for p = 3, α = 1.
pub fn setup_d(d: usize) -> &'static Setup {
    static D2: OnceLock<Setup> = OnceLock::new();
    static D3: OnceLock<Setup> = OnceLock::new();
    match d {
        2 => D2.get_or_init(|| build(2, 3.0)),
        3 => D3.get_or_init(|| build(3, 3.0)),
        _ => panic!("no shared setup for d = {d}"),
    }
}

pub fn kernel(d: usize) -> Arc<InteractionKernel> {
    setup_d(d).kernel.clone()
}

pub fn clock(d: usize) -> &'static ReferenceClock {
    &setup_d(d).clock
}

pub fn sech(x: f64) -> f64 {
    1.0 / x.cosh()
}

/// Composite Simpson rule with n (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}
