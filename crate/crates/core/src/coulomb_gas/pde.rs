//! Finite-difference residuals of the null-state, Ward and `phi_{1,3}` equations.
//!
//! Every derivative is a central difference at steps `h` and `2h` combined
//! by Richardson extrapolation, so the truncation error is `O(h^4)`. The
//! residual is reported relative to the sum of the magnitudes of the terms
//! of the operator (floored at `|F| / gap^order`), which makes it
//! dimensionless and insensitive to the overall normalisation of `F`.

use crate::error::{invalid, Result};
use crate::evaluator::{check_len, Evaluator};

/// Default second-order step as a fraction of the minimum gap.
pub const DEFAULT_STEP: f64 = 2e-3;
/// Default third-order step as a fraction of the minimum gap.
pub const DEFAULT_STEP_THIRD: f64 = 2e-2;

fn min_gap(x: &[f64]) -> f64 {
    x.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
}

fn resolve_step(x: &[f64], h: Option<f64>, default_frac: f64) -> Result<f64> {
    let gap = min_gap(x);
    let h = h.unwrap_or(default_frac * gap);
    if !(h > 0.0) || 2.0 * h * 2.0 >= gap {
        return invalid(format!("finite-difference step {h:e} outside (0, gap/4) with gap {gap:e}"));
    }
    Ok(h)
}

struct Stencil<'a, E: ?Sized> {
    f: &'a E,
    x: Vec<f64>,
}

impl<'a, E: Evaluator + ?Sized> Stencil<'a, E> {
    fn at(&self, shifts: &[(usize, f64)]) -> Result<f64> {
        let mut y = self.x.clone();
        for &(k, s) in shifts {
            y[k] += s;
        }
        self.f.eval(&y)
    }

    fn d1_raw(&self, k: usize, h: f64) -> Result<f64> {
        Ok((self.at(&[(k, h)])? - self.at(&[(k, -h)])?) / (2.0 * h))
    }

    fn d2_raw(&self, k: usize, h: f64, f0: f64) -> Result<f64> {
        Ok((self.at(&[(k, h)])? - 2.0 * f0 + self.at(&[(k, -h)])?) / (h * h))
    }

    fn d3_raw(&self, k: usize, h: f64) -> Result<f64> {
        let p2 = self.at(&[(k, 2.0 * h)])?;
        let p1 = self.at(&[(k, h)])?;
        let m1 = self.at(&[(k, -h)])?;
        let m2 = self.at(&[(k, -2.0 * h)])?;
        Ok((p2 - 2.0 * p1 + 2.0 * m1 - m2) / (2.0 * h * h * h))
    }

    fn dmix_raw(&self, j: usize, k: usize, h: f64) -> Result<f64> {
        let pp = self.at(&[(j, h), (k, h)])?;
        let pm = self.at(&[(j, h), (k, -h)])?;
        let mp = self.at(&[(j, -h), (k, h)])?;
        let mm = self.at(&[(j, -h), (k, -h)])?;
        Ok((pp - pm - mp + mm) / (4.0 * h * h))
    }

    fn d1(&self, k: usize, h: f64) -> Result<f64> {
        Ok(richardson(self.d1_raw(k, h)?, self.d1_raw(k, 2.0 * h)?))
    }

    fn d2(&self, k: usize, h: f64, f0: f64) -> Result<f64> {
        Ok(richardson(self.d2_raw(k, h, f0)?, self.d2_raw(k, 2.0 * h, f0)?))
    }

    fn d3(&self, k: usize, h: f64) -> Result<f64> {
        Ok(richardson(self.d3_raw(k, h)?, self.d3_raw(k, 2.0 * h)?))
    }

    fn dmix(&self, j: usize, k: usize, h: f64) -> Result<f64> {
        Ok(richardson(self.dmix_raw(j, k, h)?, self.dmix_raw(j, k, 2.0 * h)?))
    }
}

fn richardson(fine: f64, coarse: f64) -> f64 {
    (4.0 * fine - coarse) / 3.0
}

fn normalized(terms: &[f64], floor: f64) -> f64 {
    let r: f64 = terms.iter().sum();
    let scale: f64 = terms.iter().map(|t| t.abs()).sum::<f64>().max(floor.abs());
    if scale == 0.0 {
        0.0
    } else {
        r.abs() / scale
    }
}

fn check_index(x: &[f64], j: usize) -> Result<usize> {
    if !(1..=x.len()).contains(&j) {
        return invalid(format!("point index {j} outside 1..={}", x.len()));
    }
    Ok(j - 1)
}

/// Normalized residual of the second-order null-state equation at `x_j` (1-based).
pub fn null_state_residual<E: Evaluator + ?Sized>(f: &E, x: &[f64], j: usize, kappa: f64, h: Option<f64>) -> Result<f64> {
    check_len(f, x)?;
    let j = check_index(x, j)?;
    let h = resolve_step(x, h, DEFAULT_STEP)?;
    let st = Stencil { f, x: x.to_vec() };
    let f0 = f.eval(x)?;
    let w = (6.0 - kappa) / (2.0 * kappa);
    let mut terms = vec![0.25 * kappa * st.d2(j, h, f0)?];
    for k in 0..x.len() {
        if k != j {
            let d = x[k] - x[j];
            terms.push(st.d1(k, h)? / d);
            terms.push(-w * f0 / (d * d));
        }
    }
    Ok(normalized(&terms, f0 / min_gap(x).powi(2)))
}

/// Normalized residuals of the translation, dilation and special conformal
/// Ward identities.
pub fn ward_residuals<E: Evaluator + ?Sized>(f: &E, x: &[f64], kappa: f64, h: Option<f64>) -> Result<[f64; 3]> {
    check_len(f, x)?;
    let h = resolve_step(x, h, DEFAULT_STEP)?;
    let st = Stencil { f, x: x.to_vec() };
    let f0 = f.eval(x)?;
    let w = (6.0 - kappa) / (2.0 * kappa);
    let grads: Vec<f64> = (0..x.len()).map(|k| st.d1(k, h)).collect::<Result<_>>()?;
    let gap = min_gap(x);
    let span = x[x.len() - 1] - x[0];
    let t0: Vec<f64> = grads.clone();
    let mut t1: Vec<f64> = grads.iter().zip(x).map(|(g, xk)| xk * g).collect();
    t1.push(x.len() as f64 * w * f0);
    let mut t2: Vec<f64> = grads.iter().zip(x).map(|(g, xk)| xk * xk * g).collect();
    t2.extend(x.iter().map(|xk| 2.0 * w * xk * f0));
    // The three identities carry length dimensions -1, 0 and +1.
    Ok([normalized(&t0, f0 / gap), normalized(&t1, f0), normalized(&t2, f0 * span)])
}

/// Normalized residual of the third-order `phi_{1,3}` equation at `x_j` (1-based).
pub fn phi13_residual<E: Evaluator + ?Sized>(f: &E, x: &[f64], j: usize, kappa: f64, h: Option<f64>) -> Result<f64> {
    check_len(f, x)?;
    let j = check_index(x, j)?;
    let h = resolve_step(x, h, DEFAULT_STEP_THIRD)?;
    let st = Stencil { f, x: x.to_vec() };
    let f0 = f.eval(x)?;
    let a = 0.5 * kappa - 1.0;
    let dj = st.d1(j, h)?;
    let mut terms = vec![(2.0 / kappa) * st.d3(j, h)?];
    for k in 0..x.len() {
        if k == j {
            continue;
        }
        let d = x[k] - x[j];
        let dk = st.d1(k, h)?;
        terms.push(2.0 * st.dmix(k, j, h)? / d);
        terms.push(-2.0 * a * dj / (d * d));
        terms.push(-a * dk / (d * d));
        terms.push(a * (kappa - 2.0) * f0 / (d * d * d));
    }
    Ok(normalized(&terms, f0 / min_gap(x).powi(3)))
}

/// Scale covariance: `F(lambda x) / F(x)` against `lambda^{-2N (6 - kappa)/(2 kappa)}`,
/// returned as a relative deviation.
pub fn scale_covariance<E: Evaluator + ?Sized>(f: &E, x: &[f64], kappa: f64, lambda: f64) -> Result<f64> {
    check_len(f, x)?;
    let f0 = f.eval(x)?;
    let y: Vec<f64> = x.iter().map(|v| lambda * v).collect();
    let f1 = f.eval(&y)?;
    let expect = f0 * lambda.powf(-(x.len() as f64) * (6.0 - kappa) / (2.0 * kappa));
    Ok((f1 - expect).abs() / expect.abs().max(f64::MIN_POSITIVE))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluator::{Constant, FnEvaluator};

    #[test]
    fn closed_form_n1() {
        let kappa = 5.0;
        let f = FnEvaluator::new(2, move |x: &[f64]| Ok((x[1] - x[0]).powf(1.0 - 6.0 / kappa)));
        let x = [0.3, 1.7];
        for j in 1..=2 {
            assert!(null_state_residual(&f, &x, j, kappa, None).unwrap() < 1e-6);
        }
        for r in ward_residuals(&f, &x, kappa, None).unwrap() {
            assert!(r < 1e-6, "{r}");
        }
    }

    #[test]
    fn constant_at_six_and_three() {
        let f = Constant { n_points: 4, value: 1.0 };
        let x = [0.0, 1.0, 2.0, 3.0];
        assert!(null_state_residual(&f, &x, 2, 6.0, None).unwrap() < 1e-12);
        assert!(ward_residuals(&f, &x, 6.0, None).unwrap().iter().all(|r| *r < 1e-12));
        assert!(null_state_residual(&f, &x, 2, 5.0, None).unwrap() > 0.1);
        assert!(phi13_residual(&f, &x, 1, 3.0, None).unwrap() > 0.1);
    }
}
