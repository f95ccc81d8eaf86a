//! Adaptive Gauss-Kronrod (7/15) quadrature with QUADPACK-style error scaling.

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions { rel_tol: 1e-9, abs_tol: 1e-30, max_intervals: 4000 }
    }
}

#[derive(Debug, Clone, Copy)]
struct Piece {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

fn kronrod<F: FnMut(f64) -> Result<f64>>(f: &mut F, a: f64, b: f64) -> Result<Piece> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c)?;
    let mut resk = fc * WGK[7];
    let mut resg = fc * WG[3];
    let mut resabs = resk.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let x = h * XGK[j];
        let f1 = f(c - x)?;
        let f2 = f(c + x)?;
        fv1[j] = f1;
        fv2[j] = f2;
        resk += WGK[j] * (f1 + f2);
        resabs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            resg += WG[j / 2] * (f1 + f2);
        }
    }
    let reskh = resk * 0.5;
    let mut resasc = WGK[7] * (fc - reskh).abs();
    for j in 0..7 {
        resasc += WGK[j] * ((fv1[j] - reskh).abs() + (fv2[j] - reskh).abs());
    }
    let value = resk * h;
    resabs *= h.abs();
    resasc *= h.abs();
    let mut error = ((resk - resg) * h).abs();
    if resasc != 0.0 && error != 0.0 {
        error = resasc * (200.0 * error / resasc).powf(1.5).min(1.0);
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * resabs);
    }
    if !value.is_finite() {
        return Err(Error::QuadratureNonConverged(format!("non-finite integrand on [{a}, {b}]")));
    }
    Ok(Piece { a, b, value, error })
}

/// Integrates a fallible integrand over [a, b].
pub fn try_integrate<F>(mut f: F, a: f64, b: f64, opts: &QuadOptions) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    if a == b {
        return Ok(0.0);
    }
    let mut pieces = vec![kronrod(&mut f, a, b)?];
    loop {
        let total: f64 = pieces.iter().map(|p| p.value).sum();
        let err: f64 = pieces.iter().map(|p| p.error).sum();
        if err <= opts.abs_tol.max(opts.rel_tol * total.abs()) {
            return Ok(total);
        }
        if pieces.len() >= opts.max_intervals {
            return Err(Error::QuadratureNonConverged(format!(
                "[{a}, {b}]: estimated error {err:e} on value {total:e} after {} intervals",
                pieces.len()
            )));
        }
        let (worst, _) = pieces.iter().enumerate().fold((0, f64::NEG_INFINITY), |acc, (i, p)| if p.error > acc.1 { (i, p.error) } else { acc });
        let p = pieces.swap_remove(worst);
        let mid = 0.5 * (p.a + p.b);
        if mid <= p.a.min(p.b) || mid >= p.a.max(p.b) {
            return Err(Error::QuadratureNonConverged(format!("interval collapsed near {mid}")));
        }
        pieces.push(kronrod(&mut f, p.a, mid)?);
        pieces.push(kronrod(&mut f, mid, p.b)?);
    }
}

/// Integrates over consecutive breakpoints, sharing the relative tolerance.
pub fn try_integrate_pieces<F>(mut f: F, breaks: &[f64], opts: &QuadOptions) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut sum = 0.0;
    for w in breaks.windows(2) {
        sum += try_integrate(&mut f, w[0], w[1], opts)?;
    }
    Ok(sum)
}

pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, opts: &QuadOptions) -> Result<f64> {
    try_integrate(|x| Ok(f(x)), a, b, opts)
}

/// Single 15-point Kronrod rule; exact for polynomials of degree 22.
pub fn fixed_kronrod<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64) -> f64 {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut s = WGK[7] * f(c);
    for j in 0..7 {
        let x = h * XGK[j];
        s += WGK[j] * (f(c - x) + f(c + x));
    }
    s * h
}

/// Piecewise integration of an integrand that cannot fail; non-convergence
/// falls back to the best available estimate.
pub fn integrate_pieces_infallible<F: FnMut(f64) -> f64>(mut f: F, breaks: &[f64], opts: &QuadOptions) -> f64 {
    let mut sum = 0.0;
    for w in breaks.windows(2) {
        let relaxed = QuadOptions { max_intervals: 20_000, ..*opts };
        sum += integrate(&mut f, w[0], w[1], &relaxed).unwrap_or_else(|_| fixed_kronrod(&mut f, w[0], w[1]));
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_and_exponential() {
        let o = QuadOptions::default();
        let v = integrate(|x| x * x * x - x, 0.0, 2.0, &o).unwrap();
        assert!((v - 2.0).abs() < 1e-14);
        let v = integrate(|x| (-x).exp(), 0.0, 50.0, &o).unwrap();
        assert!((v - (1.0 - (-50f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn peaked_integrand() {
        let o = QuadOptions::default();
        let v = integrate(|x| 1.0 / (1e-4 + x * x), -1.0, 1.0, &o).unwrap();
        let exact = 2.0 * (1.0f64 / 1e-2).atan() / 1e-2;
        assert!((v / exact - 1.0).abs() < 1e-9);
    }

    #[test]
    fn fixed_rule_degree() {
        let v = fixed_kronrod(|x| x.powi(20), 0.0, 1.0);
        assert!((v - 1.0 / 21.0).abs() < 1e-15);
    }
}
