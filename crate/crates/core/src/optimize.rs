//! Scalar solvers: golden-section minimisation and bisection.

use crate::{Error, Result};

const INV_PHI: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimum {
    pub x: f64,
    pub value: f64,
    pub evaluations: usize,
}

/// Golden-section search for the minimum of a unimodal `f` on `[lo, hi]`.
///
/// Stops when the bracket is narrower than `x_tol` or after `max_evals`.
pub fn golden_section_minimize<F>(f: F, lo: f64, hi: f64, x_tol: f64, max_evals: usize) -> Minimum
where
    F: Fn(f64) -> f64,
{
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    let mut evals = 2;
    while (b - a) > x_tol && evals < max_evals {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
        evals += 1;
    }
    // endpoints are never sampled by the interior recursion
    let mut best = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
    for x in [a, b] {
        let v = f(x);
        evals += 1;
        if v < best.1 {
            best = (x, v);
        }
    }
    Minimum { x: best.0, value: best.1, evaluations: evals }
}

/// Coarse scan of `f` on `n` equally spaced points of `[lo, hi]` followed by a
/// golden-section refinement between the neighbours of the best sample.
///
/// Errors if the sampled objective is not unimodal inside the refinement
/// bracket, which would make the refinement meaningless.
pub fn scan_then_golden<F>(f: F, lo: f64, hi: f64, n: usize, x_tol: f64) -> Result<Minimum>
where
    F: Fn(f64) -> f64,
{
    assert!(n >= 3, "scan needs at least three samples");
    let xs: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
    let ys: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    if ys.iter().any(|y| y.is_nan()) {
        return Err(Error::Tuning("objective returned NaN during bracketing scan".into()));
    }
    let best = ys.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| i).unwrap();
    let left = best.saturating_sub(1);
    let right = (best + 1).min(n - 1);
    // dense resampling of the bracket must fall then rise
    const CHECK: usize = 32;
    let dense: Vec<f64> = (0..=CHECK).map(|i| f(xs[left] + (xs[right] - xs[left]) * i as f64 / CHECK as f64)).collect();
    let mut rising = false;
    for w in dense.windows(2) {
        if w[1] > w[0] {
            rising = true;
        } else if rising && w[1] < w[0] {
            return Err(Error::Tuning(format!("objective not unimodal in [{}, {}]", xs[left], xs[right])));
        }
    }
    let mut m = golden_section_minimize(&f, xs[left], xs[right], x_tol, 400);
    m.evaluations += n + CHECK + 1;
    Ok(m)
}

/// Bisection for `f(x) = target` with `f` monotone on `[lo, hi]`.
///
/// Converges to a relative tolerance `rel_tol` on `x`.
pub fn bisect<F>(f: F, target: f64, mut lo: f64, mut hi: f64, rel_tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let g = |x: f64| f(x) - target;
    let mut g_lo = g(lo);
    let g_hi = g(hi);
    if g_lo == 0.0 {
        return Ok(lo);
    }
    if g_hi == 0.0 {
        return Ok(hi);
    }
    if g_lo.signum() == g_hi.signum() {
        return Err(Error::Calibration(format!(
            "target {target} not bracketed: f({lo}) = {}, f({hi}) = {}",
            g_lo + target,
            g_hi + target
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let g_mid = g(mid);
        if g_mid == 0.0 {
            return Ok(mid);
        }
        if g_mid.signum() == g_lo.signum() {
            lo = mid;
            g_lo = g_mid;
        } else {
            hi = mid;
        }
        if (hi - lo).abs() <= rel_tol * mid.abs().max(f64::MIN_POSITIVE) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_finds_parabola_minimum() {
        let m = golden_section_minimize(|x| (x - 0.3).powi(2), -2.0, 5.0, 1e-10, 500);
        assert!((m.x - 0.3).abs() < 1e-8);
    }

    #[test]
    fn golden_handles_boundary_minimum() {
        let m = golden_section_minimize(|x| x, 0.0, 1.0, 1e-12, 500);
        assert_eq!(m.x, 0.0);
    }

    #[test]
    fn scan_rejects_multimodal() {
        let f = |x: f64| ((x - 0.3).powi(2)).min((x - 0.7).powi(2) + 0.001);
        assert!(matches!(scan_then_golden(f, 0.0, 1.0, 3, 1e-9), Err(Error::Tuning(_))));
        let g = |x: f64| (x - 0.71).powi(2);
        let m = scan_then_golden(g, 0.0, 1.0, 11, 1e-10).unwrap();
        assert!((m.x - 0.71).abs() < 1e-8);
    }

    #[test]
    fn bisect_solves_monotone() {
        let x = bisect(|x| x.powi(3), 8.0, 0.0, 10.0, 1e-12).unwrap();
        assert!((x - 2.0).abs() < 1e-10);
        assert!(matches!(bisect(|x| x, 20.0, 0.0, 10.0, 1e-9), Err(Error::Calibration(_))));
    }
}
