//! Contour geometry, branch selection and the nested integral `J`.
//!
//! Every contour runs from `x_a` to `x_b` (`a < b`) along the half ellipse
//!
//! ```text
//! u(theta) = m - w cos(theta) + i (h w) sin(theta),   theta in [0, pi]
//! ```
//!
//! with `m` the midpoint, `w` the half-width and `h = 2 * height_ratio`.
//! Ellipses with a common aspect ratio and collinear major axes nest exactly
//! when their intervals do, so the contours of a noncrossing diagram never
//! meet.
//!
//! Branches. For a marked point `x_l` the factor `(x_l - u)^beta` uses
//! `arg in (-3pi/2, pi/2)`; the cut points straight down from `x_l`, where
//! only the small loops around `x_l` itself ever go. For a pair of contours
//! `p < q` (ordered by left endpoint) the factor `(u_p - u_q)^{8/kappa}` uses
//! `arg in (-3pi/2, pi/2)` when `p` is nested inside `q` and
//! `(-pi/2, 3pi/2)` otherwise.
//!
//! Regularized mode. When an endpoint exponent is `<= -1` the arc is cut at
//! radius `eps` around each endpoint and a full counterclockwise loop around
//! the endpoint is added with weight `1/(e^{2 pi i beta} - 1)` at the start
//! and `1/(1 - e^{2 pi i beta})` at the end. This is the analytic continuation
//! in `beta` of the simple integral and equals the Pochhammer integral
//! divided by `(1 - e^{2 pi i beta_a})(1 - e^{2 pi i beta_b})`.

use std::cell::RefCell;
use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quad::{GaussKronrod, TanhSinh, Tolerance, Tracked};

/// How a contour is realised numerically.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContourKind {
    /// Half ellipse from endpoint to endpoint; needs both endpoint exponents `> -1`.
    SimpleUpperArc,
    /// Truncated arc plus weighted loops around the endpoints.
    Pochhammer,
}

#[derive(Clone, Debug)]
pub(crate) struct Geom {
    pub a: usize,
    pub b: usize,
    pub xa: f64,
    pub xb: f64,
    pub w: f64,
    pub hw: f64,
    pub kind: ContourKind,
    pub eps_a: f64,
    pub eps_b: f64,
    pub theta_a: f64,
    pub theta_b: f64,
    pub phi_a: f64,
    pub phi_b: f64,
    pub weight_a: Complex64,
    pub weight_b: Complex64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Piece {
    Arc,
    LoopA,
    LoopB,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Node {
    pub piece: Piece,
    pub u: Complex64,
    pub dudt: Complex64,
    /// `u - x_a`, accurate near `x_a`.
    pub off_a: Complex64,
    /// `x_b - u`, accurate near `x_b`.
    pub off_b: Complex64,
    /// Loop angle when on a loop.
    pub phi: f64,
}

impl Geom {
    fn arc_offsets(&self, dl: f64, dr: f64) -> (Complex64, Complex64) {
        let sa = (0.5 * dl).sin();
        let sb = (0.5 * dr).sin();
        let off_a = Complex64::new(2.0 * self.w * sa * sa, self.hw * dl.sin());
        let off_b = Complex64::new(2.0 * self.w * sb * sb, -self.hw * dr.sin());
        (off_a, off_b)
    }

    pub fn arc_node(&self, theta: f64, dl: f64, dr: f64) -> Node {
        let (off_a, off_b) = self.arc_offsets(dl, dr);
        let u = if dl <= dr { self.xa + off_a } else { self.xb - off_b };
        let dudt = Complex64::new(self.w * theta.sin(), self.hw * theta.cos());
        Node { piece: Piece::Arc, u, dudt, off_a, off_b, phi: 0.0 }
    }

    pub fn loop_node(&self, piece: Piece, phi: f64) -> Node {
        let (x, eps) = match piece {
            Piece::LoopA => (self.xa, self.eps_a),
            _ => (self.xb, self.eps_b),
        };
        let e = Complex64::from_polar(eps, phi);
        let u = x + e;
        let dudt = Complex64::new(0.0, 1.0) * e;
        let (off_a, off_b) = match piece {
            Piece::LoopA => (e, self.xb - u),
            _ => (u - self.xa, -e),
        };
        Node { piece, u, dudt, off_a, off_b, phi }
    }
}

/// Angle `theta` where the arc meets the circle of radius `eps` about its start.
fn truncation_angle(eps: f64, w: f64, h: f64) -> f64 {
    // |u - x_a|^2 = w^2 (4 y^2 + 4 h^2 y (1 - y)) with y = sin^2(theta/2).
    let r = (eps / w).powi(2);
    let h2 = h * h;
    let a = 4.0 - 4.0 * h2;
    let b = 4.0 * h2;
    let y = if a.abs() < 1e-14 { r / b } else { 2.0 * r / (b + (b * b + 4.0 * a * r).sqrt()) };
    2.0 * y.sqrt().min(1.0).asin()
}

/// Everything needed to evaluate the integrand of `J`.
pub(crate) struct Integrand<'a> {
    pub x: &'a [f64],
    pub betas: Vec<f64>,
    pub pair_exp: f64,
    pub contours: Vec<Geom>,
    /// `nested[p][q]`: contour `p` lies inside contour `q`.
    pub nested: Vec<Vec<bool>>,
    pub tol: Tolerance,
    pub ts: TanhSinh,
    pub gk: GaussKronrod,
}

pub(crate) struct JValue {
    pub value: Complex64,
    pub err: f64,
    pub n_evals: usize,
}

fn wrap_down(arg: f64) -> f64 {
    if arg > 0.5 * PI {
        arg - 2.0 * PI
    } else {
        arg
    }
}

fn wrap_up(arg: f64) -> f64 {
    if arg < -0.5 * PI {
        arg + 2.0 * PI
    } else {
        arg
    }
}

/// Per-point settings for building the integrand.
pub(crate) struct GeomParams {
    pub height_ratio: f64,
    pub loop_radius: f64,
}

impl<'a> Integrand<'a> {
    pub fn new(
        x: &'a [f64],
        betas: Vec<f64>,
        pair_exp: f64,
        endpoints: &[(usize, usize)],
        kinds: &[ContourKind],
        params: &GeomParams,
        tol: Tolerance,
        ts: TanhSinh,
        gk: GaussKronrod,
    ) -> Self {
        let h = 2.0 * params.height_ratio;
        let local_gap = |j: usize| -> f64 {
            let mut g = f64::INFINITY;
            if j > 0 {
                g = g.min(x[j] - x[j - 1]);
            }
            if j + 1 < x.len() {
                g = g.min(x[j + 1] - x[j]);
            }
            g
        };
        let mut order: Vec<usize> = (0..endpoints.len()).collect();
        order.sort_by_key(|&k| endpoints[k].0);
        let mut contours = Vec::with_capacity(endpoints.len());
        for &k in &order {
            let (a, b) = endpoints[k];
            let (xa, xb) = (x[a], x[b]);
            let w = 0.5 * (xb - xa);
            let mut g = Geom {
                a,
                b,
                xa,
                xb,
                w,
                hw: h * w,
                kind: kinds[k],
                eps_a: 0.0,
                eps_b: 0.0,
                theta_a: 0.0,
                theta_b: 0.0,
                phi_a: 0.0,
                phi_b: 0.0,
                weight_a: Complex64::new(0.0, 0.0),
                weight_b: Complex64::new(0.0, 0.0),
            };
            if g.kind == ContourKind::Pochhammer {
                g.eps_a = params.loop_radius * local_gap(a);
                g.eps_b = params.loop_radius * local_gap(b);
                g.theta_a = truncation_angle(g.eps_a, w, h);
                g.theta_b = truncation_angle(g.eps_b, w, h);
                let ta = g.theta_a;
                let tb = g.theta_b;
                let (off_a, _) = g.arc_offsets(ta, PI - ta);
                let (_, off_b) = g.arc_offsets(PI - tb, tb);
                g.phi_a = off_a.arg();
                g.phi_b = (-off_b).arg();
                let ma = Complex64::from_polar(1.0, 2.0 * PI * betas[a]);
                let mb = Complex64::from_polar(1.0, 2.0 * PI * betas[b]);
                g.weight_a = (ma - 1.0).inv();
                g.weight_b = (1.0 - mb).inv();
            }
            contours.push(g);
        }
        let m = contours.len();
        let mut nested = vec![vec![false; m]; m];
        for p in 0..m {
            for q in 0..m {
                nested[p][q] = contours[q].a < contours[p].a && contours[p].b < contours[q].b;
            }
        }
        Integrand { x, betas, pair_exp, contours, nested, tol, ts, gk }
    }

    /// `sum_l beta_l log(x_l - u)` for a node on contour `m`.
    fn point_log(&self, m: usize, n: &Node) -> Complex64 {
        let g = &self.contours[m];
        let mut s = Complex64::new(0.0, 0.0);
        for (l, (&xl, &beta)) in self.x.iter().zip(&self.betas).enumerate() {
            if beta == 0.0 {
                continue;
            }
            let lg = if l == g.a {
                if n.piece == Piece::LoopA {
                    Complex64::new(g.eps_a.ln(), n.phi - PI)
                } else {
                    let z = -n.off_a;
                    Complex64::new(z.norm().ln(), wrap_down(z.arg()))
                }
            } else if l == g.b {
                if n.piece == Piece::LoopB {
                    Complex64::new(g.eps_b.ln(), n.phi - PI)
                } else {
                    let z = n.off_b;
                    Complex64::new(z.norm().ln(), wrap_down(z.arg()))
                }
            } else {
                let z = xl - n.u;
                Complex64::new(z.norm().ln(), wrap_down(z.arg()))
            };
            s += beta * lg;
        }
        s
    }

    fn pair_log(&self, p: usize, q: usize, up: Complex64, uq: Complex64) -> Complex64 {
        let d = up - uq;
        let arg = if self.nested[p][q] { wrap_down(d.arg()) } else { wrap_up(d.arg()) };
        self.pair_exp * Complex64::new(d.norm().ln(), arg)
    }

    /// The regularized (or simple) multiple integral `J`.
    pub fn integrate(&self) -> Result<JValue> {
        let evals = RefCell::new(0usize);
        let mut stack = Vec::with_capacity(self.contours.len());
        let r = self.level(0, &mut stack, &evals)?;
        Ok(JValue { value: r.value, err: r.err, n_evals: evals.into_inner() })
    }

    fn level(&self, m: usize, stack: &mut Vec<Complex64>, evals: &RefCell<usize>) -> Result<Tracked> {
        if m == self.contours.len() {
            *evals.borrow_mut() += 1;
            return Ok(Tracked::new(Complex64::new(1.0, 0.0), 0.0));
        }
        let g = &self.contours[m];
        let failure: RefCell<Option<Error>> = RefCell::new(None);
        let stack_cell = RefCell::new(std::mem::take(stack));
        let body = |n: Node| -> Tracked {
            if failure.borrow().is_some() {
                return Tracked::new(Complex64::new(0.0, 0.0), 0.0);
            }
            let mut lg = self.point_log(m, &n);
            {
                let st = stack_cell.borrow();
                for (p, &up) in st.iter().enumerate() {
                    lg += self.pair_log(p, m, up, n.u);
                }
            }
            let factor = lg.exp() * n.dudt;
            let inner = {
                let mut st = stack_cell.borrow_mut();
                st.push(n.u);
                let r = self.level(m + 1, &mut st, evals);
                st.pop();
                r
            };
            match inner {
                Ok(t) => Tracked::new(factor * t.value, factor.norm() * t.err),
                Err(e) => {
                    *failure.borrow_mut() = Some(e);
                    Tracked::new(Complex64::new(0.0, 0.0), 0.0)
                }
            }
        };
        let total = match g.kind {
            ContourKind::SimpleUpperArc => {
                let r = self.ts.integrate(0.0, PI, self.tol, |t, dl, dr| body(g.arc_node(t, dl, dr)))?;
                Tracked::new(r.value.value, r.value.err + r.abs_error)
            }
            ContourKind::Pochhammer => {
                let (lo, hi) = (g.theta_a, PI - g.theta_b);
                let arc = self.gk.integrate(lo, hi, 8, self.tol, |t: f64| body(g.arc_node(t, t, PI - t)))?;
                let la = self.gk.integrate(g.phi_a, g.phi_a + 2.0 * PI, 4, self.tol, |phi: f64| {
                    body(g.loop_node(Piece::LoopA, phi))
                })?;
                let lb = self.gk.integrate(g.phi_b, g.phi_b + 2.0 * PI, 4, self.tol, |phi: f64| {
                    body(g.loop_node(Piece::LoopB, phi))
                })?;
                let value = arc.value.value + g.weight_a * la.value.value + g.weight_b * lb.value.value;
                let err = arc.value.err
                    + arc.abs_error
                    + g.weight_a.norm() * (la.value.err + la.abs_error)
                    + g.weight_b.norm() * (lb.value.err + lb.abs_error);
                Tracked::new(value, err)
            }
        };
        *stack = stack_cell.into_inner();
        if let Some(e) = failure.into_inner() {
            return Err(e);
        }
        Ok(total)
    }

    /// Reference phase: the integrand's argument with each `u_m` placed at
    /// the top of its arc, using `-pi/2` for points under the arc and the
    /// midpoint value at the arc's own endpoints.
    pub fn reference_phase(&self) -> f64 {
        let mut phi = 0.0;
        for g in &self.contours {
            for (l, &beta) in self.betas.iter().enumerate() {
                let psi = if l <= g.a {
                    -PI
                } else if l < g.b {
                    -0.5 * PI
                } else {
                    0.0
                };
                phi += beta * psi;
            }
        }
        let m = self.contours.len();
        for p in 0..m {
            for q in (p + 1)..m {
                let (gp, gq) = (&self.contours[p], &self.contours[q]);
                let psi = if self.nested[p][q] {
                    -0.5 * PI
                } else if self.nested[q][p] {
                    0.5 * PI
                } else if gp.b < gq.a {
                    PI
                } else {
                    0.0
                };
                phi += self.pair_exp * psi;
            }
        }
        phi
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truncation_matches_radius() {
        for &(eps, w) in &[(0.1, 1.0), (1e-4, 3.0), (0.05, 0.5)] {
            let h = 0.5;
            let t = truncation_angle(eps, w, h);
            let y = (0.5 * t).sin().powi(2);
            let r = (w * w * (4.0 * y * y + 4.0 * h * h * y * (1.0 - y))).sqrt();
            assert!((r - eps).abs() < 1e-12 * eps);
        }
    }
}
