//! Adaptive Gauss-Kronrod (7/15) quadrature.

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
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (j, (&x, &w)) in XGK.iter().zip(&WGK).take(7).enumerate() {
        let dx = h * x;
        let pair = f(c - dx) + f(c + dx);
        kronrod += w * pair;
        // Odd Kronrod nodes are the 7-point Gauss nodes.
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Integrates `f` over `[a, b]` to absolute tolerance `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, max_depth: usize) -> Result<f64> {
    fn recurse<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, whole: (f64, f64), tol: f64, depth: usize) -> Result<f64> {
        let (value, err) = whole;
        if !value.is_finite() {
            return Err(Error::Numeric(format!("non-finite integrand on [{a}, {b}]")));
        }
        if err <= tol || (b - a) <= f64::EPSILON * a.abs().max(1.0) {
            return Ok(value);
        }
        if depth == 0 {
            return Err(Error::Numeric(format!(
                "quadrature did not converge on [{a}, {b}]: error estimate {err:.3e} > {tol:.3e}"
            )));
        }
        let m = 0.5 * (a + b);
        let left = gk15(f, a, m);
        let right = gk15(f, m, b);
        Ok(recurse(f, a, m, left, 0.5 * tol, depth - 1)? + recurse(f, m, b, right, 0.5 * tol, depth - 1)?)
    }
    if a == b {
        return Ok(0.0);
    }
    recurse(f, a, b, gk15(f, a, b), tol, max_depth)
}

/// Integrates `f` over `[0, inf)` in doubling panels `[0, h], [h, 2h], [2h, 4h], ...`
/// until three consecutive panels contribute less than `tol / 8`.
pub fn integrate_half_line<F: Fn(f64) -> f64>(f: &F, scale: f64, tol: f64, max_depth: usize) -> Result<f64> {
    let mut total = integrate(f, 0.0, scale, tol / 4.0, max_depth)?;
    let (mut lo, mut hi) = (scale, 2.0 * scale);
    let mut quiet = 0;
    for _ in 0..200 {
        let part = integrate(f, lo, hi, tol / 8.0, max_depth)?;
        total += part;
        if part.abs() < tol / 8.0 {
            quiet += 1;
            if quiet == 3 {
                return Ok(total);
            }
        } else {
            quiet = 0;
        }
        lo = hi;
        hi *= 2.0;
    }
    Err(Error::Numeric("half-line integral did not settle".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn polynomial_is_exact() {
        let v = integrate(&|x: f64| x.powi(5) - 2.0 * x, 0.0, 2.0, 1e-12, 10).unwrap();
        assert_abs_diff_eq!(v, 64.0 / 6.0 - 4.0, epsilon = 1e-12);
    }

    #[test]
    fn exponential_half_line() {
        let v = integrate_half_line(&|x: f64| 3.0 * (-3.0 * x).exp(), 1.0, 1e-12, 40).unwrap();
        assert_abs_diff_eq!(v, 1.0, epsilon = 1e-11);
        let m = integrate_half_line(&|x: f64| x * 0.5 * (-0.5 * x).exp(), 1.0, 1e-10, 40).unwrap();
        assert_abs_diff_eq!(m, 2.0, epsilon = 1e-9);
    }

    #[test]
    fn kink_needs_subdivision() {
        let v = integrate(&|x: f64| (x - 0.3).abs(), 0.0, 1.0, 1e-12, 60).unwrap();
        assert_abs_diff_eq!(v, 0.5 * (0.09 + 0.49), epsilon = 1e-11);
    }

    #[test]
    fn non_finite_integrand_is_an_error() {
        assert!(integrate(&|x: f64| 1.0 / x, 0.0, 1.0, 1e-12, 5).is_err());
    }
}
