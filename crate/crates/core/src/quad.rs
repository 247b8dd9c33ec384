//! One-dimensional quadrature engines used by the contour integrals.
//!
//! Both engines are generic over [`QuadValue`] so that a nested integral can
//! carry its inner error estimate through the outer integration alongside
//! the value itself.

use std::collections::BinaryHeap;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Values a quadrature rule can sum.
pub trait QuadValue: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {
    fn zero() -> Self;
    /// Magnitude used for error estimates.
    fn magnitude(&self) -> f64;
    fn is_finite(&self) -> bool;
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(&self) -> f64 {
        self.abs()
    }
    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
    }
}

impl QuadValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
    fn is_finite(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

/// A complex value together with an absolute error that is integrated
/// along with it. The error does not enter [`QuadValue::magnitude`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tracked {
    pub value: Complex64,
    pub err: f64,
}

impl Tracked {
    pub fn new(value: Complex64, err: f64) -> Self {
        Tracked { value, err }
    }
}

impl Add for Tracked {
    type Output = Tracked;
    fn add(self, o: Tracked) -> Tracked {
        Tracked { value: self.value + o.value, err: self.err + o.err }
    }
}

impl Sub for Tracked {
    type Output = Tracked;
    // Errors never cancel.
    fn sub(self, o: Tracked) -> Tracked {
        Tracked { value: self.value - o.value, err: self.err + o.err }
    }
}

impl Mul<f64> for Tracked {
    type Output = Tracked;
    fn mul(self, s: f64) -> Tracked {
        Tracked { value: self.value * s, err: self.err * s.abs() }
    }
}

impl QuadValue for Tracked {
    fn zero() -> Self {
        Tracked { value: Complex64::new(0.0, 0.0), err: 0.0 }
    }
    fn magnitude(&self) -> f64 {
        self.value.norm()
    }
    fn is_finite(&self) -> bool {
        self.value.re.is_finite() && self.value.im.is_finite() && self.err.is_finite()
    }
}

/// Result of a one-dimensional integration.
#[derive(Clone, Copy, Debug)]
pub struct Integral<T> {
    pub value: T,
    pub abs_error: f64,
    pub n_evals: usize,
}

/// Tolerances for a single integration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Tolerance {
    pub fn target(&self, magnitude: f64) -> f64 {
        self.abs.max(self.rel * magnitude)
    }
}

/// Double-exponential quadrature on `[a, b]`.
///
/// The integrand receives `(t, t - a, b - t)` with both distances computed
/// without cancellation, so endpoint singularities of the form
/// `(t - a)^beta` with `beta > -1` are resolved to full precision.
#[derive(Clone, Copy, Debug)]
pub struct TanhSinh {
    pub max_level: u32,
    pub s_max: f64,
}

impl Default for TanhSinh {
    fn default() -> Self {
        TanhSinh { max_level: 9, s_max: 5.0 }
    }
}

impl TanhSinh {
    pub fn integrate<T, F>(&self, a: f64, b: f64, tol: Tolerance, mut f: F) -> Result<Integral<T>>
    where
        T: QuadValue,
        F: FnMut(f64, f64, f64) -> T,
    {
        let len = b - a;
        let half = 0.5 * len;
        let mut n_evals = 0usize;
        // Contribution of the node at s (and its mirror at -s).
        let mut l1 = 0.0f64;
        let mut node = |s: f64, n_evals: &mut usize, l1: &mut f64| -> T {
            let z = 0.5 * std::f64::consts::PI * s.sinh();
            let e = (-2.0 * z.abs()).exp();
            // sech^2(z) = 4 e^{-2|z|} / (1 + e^{-2|z|})^2
            let sech2 = 4.0 * e / ((1.0 + e) * (1.0 + e));
            let w = half * 0.5 * std::f64::consts::PI * s.cosh() * sech2;
            if w == 0.0 {
                return T::zero();
            }
            // Distance to the nearer endpoint is len * e / (1 + e).
            let near = len * e / (1.0 + e);
            let far = len - near;
            if near <= f64::MIN_POSITIVE * 1e10 {
                return T::zero();
            }
            let mut acc = T::zero();
            let pts: &[(f64, f64)] = if s == 0.0 { &[(half, half)] } else { &[(near, far), (far, near)] };
            for &(dl, dr) in pts {
                let t = if dl <= dr { a + dl } else { b - dr };
                *n_evals += 1;
                let v = f(t, dl, dr) * w;
                *l1 += v.magnitude();
                acc = acc + v;
            }
            acc
        };

        let mut h = 1.0f64;
        let mut sum = node(0.0, &mut n_evals, &mut l1);
        let mut k = 1.0;
        while k * h <= self.s_max {
            sum = sum + node(k * h, &mut n_evals, &mut l1);
            k += 1.0;
        }
        let mut estimate = sum * h;
        let mut prev_diff = f64::INFINITY;
        for _level in 1..=self.max_level {
            h *= 0.5;
            let mut k = 1.0;
            while k * h <= self.s_max {
                sum = sum + node(k * h, &mut n_evals, &mut l1);
                k += 2.0;
            }
            let next = sum * h;
            if !next.is_finite() {
                return Err(Error::Quadrature { estimate: f64::INFINITY, tol: tol.target(0.0) });
            }
            let diff = (next - estimate).magnitude();
            estimate = next;
            // Targets are relative to the integral of |f| so that strong
            // cancellation does not demand more than double precision allows.
            let target = tol.target(l1 * h);
            // Quadratic convergence: once the level differences shrink, the
            // current error is far below the last difference.
            let err = if prev_diff.is_finite() && prev_diff > 0.0 {
                (diff * diff / prev_diff).max(diff * 1e-3).min(diff)
            } else {
                diff
            };
            if diff <= target || (err <= target && diff < prev_diff) {
                return Ok(Integral { value: estimate, abs_error: err, n_evals });
            }
            prev_diff = diff;
        }
        Err(Error::Quadrature { estimate: prev_diff, tol: tol.target(l1 * h) })
    }
}

// 15-point Kronrod nodes/weights with the embedded 7-point Gauss weights.
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15<T, F>(a: f64, b: f64, f: &mut F) -> (T, f64)
where
    T: QuadValue,
    F: FnMut(f64) -> T,
{
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let f1 = f(c - dx);
        let f2 = f(c + dx);
        kron = kron + (f1 + f2) * WGK[j];
        if j % 2 == 1 {
            gauss = gauss + (f1 + f2) * WG[j / 2];
        }
    }
    let kron = kron * h;
    let gauss = gauss * h;
    let diff = (kron - gauss).magnitude();
    // QUADPACK-style scaling of the raw difference.
    let err = if diff == 0.0 { 0.0 } else { diff * (200.0 * diff / (kron.magnitude() + diff)).powf(1.5).min(1.0) };
    (kron, err.max(50.0 * f64::EPSILON * kron.magnitude()))
}

struct Panel<T> {
    a: f64,
    b: f64,
    value: T,
    err: f64,
}

impl<T> PartialEq for Panel<T> {
    fn eq(&self, o: &Self) -> bool {
        self.err == o.err
    }
}
impl<T> Eq for Panel<T> {}
impl<T> PartialOrd for Panel<T> {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}
impl<T> Ord for Panel<T> {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&o.err).then_with(|| o.a.total_cmp(&self.a))
    }
}

/// Globally adaptive Gauss-Kronrod (7/15) quadrature.
#[derive(Clone, Copy, Debug)]
pub struct GaussKronrod {
    pub max_panels: usize,
}

impl Default for GaussKronrod {
    fn default() -> Self {
        GaussKronrod { max_panels: 4000 }
    }
}

impl GaussKronrod {
    /// Integrates over `[a, b]`, starting from `initial` equal panels.
    pub fn integrate<T, F>(&self, a: f64, b: f64, initial: usize, tol: Tolerance, mut f: F) -> Result<Integral<T>>
    where
        T: QuadValue,
        F: FnMut(f64) -> T,
    {
        let initial = initial.max(1);
        let mut heap = BinaryHeap::new();
        let mut total = T::zero();
        let mut total_err = 0.0;
        let mut l1 = 0.0;
        let mut n_evals = 0;
        for k in 0..initial {
            let lo = a + (b - a) * k as f64 / initial as f64;
            let hi = if k + 1 == initial { b } else { a + (b - a) * (k + 1) as f64 / initial as f64 };
            let (v, e) = gk15(lo, hi, &mut f);
            n_evals += 15;
            total = total + v;
            total_err += e;
            l1 += v.magnitude();
            heap.push(Panel { a: lo, b: hi, value: v, err: e });
        }
        while total_err > tol.target(l1) {
            if !total.is_finite() {
                return Err(Error::Quadrature { estimate: f64::INFINITY, tol: tol.target(0.0) });
            }
            if heap.len() >= self.max_panels {
                return Err(Error::Quadrature { estimate: total_err, tol: tol.target(l1) });
            }
            let worst = heap.pop().expect("heap is never empty");
            let mid = 0.5 * (worst.a + worst.b);
            if mid <= worst.a || mid >= worst.b {
                return Err(Error::Quadrature { estimate: total_err, tol: tol.target(l1) });
            }
            let (v1, e1) = gk15(worst.a, mid, &mut f);
            let (v2, e2) = gk15(mid, worst.b, &mut f);
            n_evals += 30;
            total = total - worst.value + v1 + v2;
            total_err += e1 + e2 - worst.err;
            l1 += v1.magnitude() + v2.magnitude() - worst.value.magnitude();
            heap.push(Panel { a: worst.a, b: mid, value: v1, err: e1 });
            heap.push(Panel { a: mid, b: worst.b, value: v2, err: e2 });
        }
        // Re-sum in a fixed order so the result does not depend on the
        // floating-point history of the running total.
        let mut panels: Vec<Panel<T>> = heap.into_vec();
        panels.sort_by(|p, q| p.a.total_cmp(&q.a));
        let value = panels.iter().fold(T::zero(), |acc, p| acc + p.value);
        let err = panels.iter().map(|p| p.err).sum();
        Ok(Integral { value, abs_error: err, n_evals })
    }
}

/// Fixed-order Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOL: Tolerance = Tolerance { abs: 1e-14, rel: 1e-12 };

    #[test]
    fn tanh_sinh_endpoint_singularity() {
        // int_0^1 t^{-0.8} (1-t)^{-0.6} dt = B(0.2, 0.4)
        let r = TanhSinh::default().integrate(0.0, 1.0, TOL, |_, dl, dr| dl.powf(-0.8) * dr.powf(-0.6)).unwrap();
        let exact = statrs::function::beta::beta(0.2, 0.4);
        assert!((r.value - exact).abs() < 1e-11 * exact, "{} vs {}", r.value, exact);
    }

    #[test]
    fn gauss_kronrod_smooth_and_peaked() {
        let r = GaussKronrod::default().integrate(0.0, std::f64::consts::PI, 1, TOL, |t: f64| t.sin()).unwrap();
        assert!((r.value - 2.0).abs() < 1e-13);
        let eps = 1e-3;
        let r = GaussKronrod::default().integrate(-1.0, 1.0, 1, TOL, |t: f64| eps / (t * t + eps * eps)).unwrap();
        let exact = 2.0 * (1.0 / eps).atan();
        assert!((r.value - exact).abs() < 1e-10 * exact);
    }

    #[test]
    fn complex_and_tracked() {
        let r = GaussKronrod::default()
            .integrate(0.0, 2.0 * std::f64::consts::PI, 1, TOL, |t: f64| {
                Tracked::new(Complex64::from_polar(1.0, 2.0 * t), 1e-3)
            })
            .unwrap();
        assert!(r.value.value.norm() < 1e-12);
        assert!((r.value.err - 2e-3 * std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn legendre_rule() {
        let (x, w) = gauss_legendre(12);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(10)).sum();
        assert!((s - 2.0 / 11.0).abs() < 1e-14);
    }
}
