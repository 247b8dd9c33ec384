//! Coulomb-gas basis functions `F_{c,theta}` and their finite-difference checks.

mod contour;
pub mod pde;

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma, ln_gamma};

pub use contour::ContourKind;
use contour::{GeomParams, Integrand};

use crate::combinatorics::{ArcDiagram, Connectivities};
use crate::error::{domain, invalid, Error, Result};
use crate::evaluator::{check_len, Evaluator};
use crate::meander::{fugacity, SpeedContext};
use crate::quad::{GaussKronrod, TanhSinh, Tolerance};

/// Strictly increasing marked points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointConfig {
    coords: Vec<f64>,
}

/// Default minimum separation accepted by [`PointConfig::new`].
pub const EPS_GEOM: f64 = 1e-8;

impl PointConfig {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        Self::with_min_gap(coords, EPS_GEOM)
    }

    pub fn with_min_gap(coords: Vec<f64>, eps_geom: f64) -> Result<Self> {
        if coords.is_empty() || coords.len() % 2 != 0 {
            return invalid(format!("need an even, positive number of points, got {}", coords.len()));
        }
        if coords.iter().any(|v| !v.is_finite()) {
            return invalid("coordinates must be finite");
        }
        for w in coords.windows(2) {
            if !(w[1] - w[0] > eps_geom) {
                return domain(format!("points must increase with gaps above {eps_geom:e}: {} then {}", w[0], w[1]));
            }
        }
        Ok(PointConfig { coords })
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn n_arcs(&self) -> usize {
        self.coords.len() / 2
    }

    pub fn min_gap(&self) -> f64 {
        self.coords.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
    }

    /// `0, 1, ..., 2N - 1`.
    pub fn integers(n_arcs: usize) -> Self {
        PointConfig { coords: (0..2 * n_arcs).map(|k| k as f64).collect() }
    }
}

/// One integration contour, attached to an arc of the diagram.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContourSpec {
    pub kind: ContourKind,
    /// 0-based point indices `(a, b)`, `a < b`.
    pub endpoints: (usize, usize),
    /// Number of other contours enclosing this one.
    pub nesting_level: usize,
}

/// Numerical settings for contour integrals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub reality_rel_tol: f64,
    pub reality_abs_tol: f64,
    /// Loop radius as a fraction of the local gap at each endpoint.
    pub loop_radius: f64,
    /// Arc height as a fraction of the endpoint distance.
    pub arc_height: f64,
    pub max_panels: usize,
    pub tanh_sinh_levels: u32,
    /// Step in kappa for the symmetric Richardson estimate at `kappa = 4/m`.
    pub pole_step: f64,
    /// Use the regularized contour whenever `-4/kappa + 1` is below this.
    pub simple_margin: f64,
    /// Overrides the contour kind chosen by [`build_spec`].
    pub force_kind: Option<ContourKind>,
}

impl Default for QuadConfig {
    fn default() -> Self {
        QuadConfig {
            abs_tol: 1e-14,
            rel_tol: 1e-10,
            reality_rel_tol: 1e-8,
            reality_abs_tol: 1e-12,
            loop_radius: 0.1,
            arc_height: 0.25,
            max_panels: 4000,
            tanh_sinh_levels: 10,
            pole_step: 1e-3,
            simple_margin: 0.15,
            force_kind: None,
        }
    }
}

impl QuadConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = [self.abs_tol, self.rel_tol, self.reality_rel_tol, self.reality_abs_tol, self.pole_step];
        if pos.iter().any(|v| !(*v > 0.0)) {
            return invalid("quadrature tolerances must be positive");
        }
        if !(self.loop_radius > 0.0 && self.loop_radius < 0.5) {
            return invalid("loop_radius must lie in (0, 0.5)");
        }
        if !(self.arc_height > 0.0) {
            return invalid("arc_height must be positive");
        }
        Ok(())
    }

    fn tolerance(&self) -> Tolerance {
        Tolerance { abs: self.abs_tol, rel: self.rel_tol }
    }
}

/// Output of a Coulomb-gas evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub value: f64,
    pub abs_error_est: f64,
    pub imag_leak: f64,
    pub n_evals: usize,
}

/// Which formula `F_{c,theta}` to evaluate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoulombGasSpec {
    pub n_arcs: usize,
    pub diagram: ArcDiagram,
    /// 1-based canonical index of the diagram, when known.
    pub theta: Option<usize>,
    /// 1-based index of the point bearing the conjugate charge.
    pub c: usize,
    pub contours: Vec<ContourSpec>,
    pub speed: SpeedContext,
}

/// `F_{c,theta}` with `theta` a 1-based index in the canonical order.
pub fn build_spec(n_arcs: usize, theta: usize, c: usize, kappa: f64) -> Result<CoulombGasSpec> {
    let conn = Connectivities::new(n_arcs, None)?;
    let d = conn.get(theta)?.clone();
    let mut s = build_spec_for_diagram(&d, c, kappa)?;
    s.theta = Some(theta);
    Ok(s)
}

/// `F_{c,theta}` for an explicit diagram.
pub fn build_spec_for_diagram(diagram: &ArcDiagram, c: usize, kappa: f64) -> Result<CoulombGasSpec> {
    let speed = SpeedContext::new(kappa)?;
    let n_points = diagram.n_points();
    if !(1..=n_points).contains(&c) {
        return invalid(format!("conjugate point c = {c} outside 1..={n_points}"));
    }
    let kind = if kappa > 4.0 { ContourKind::SimpleUpperArc } else { ContourKind::Pochhammer };
    let c0 = c - 1;
    let arcs: Vec<(usize, usize)> = diagram.arcs().into_iter().filter(|&(a, b)| a != c0 && b != c0).collect();
    let contours = arcs
        .iter()
        .map(|&(a, b)| ContourSpec {
            kind,
            endpoints: (a, b),
            nesting_level: arcs.iter().filter(|&&(p, q)| p < a && b < q).count(),
        })
        .collect();
    Ok(CoulombGasSpec { n_arcs: diagram.n_arcs(), diagram: diagram.clone(), theta: None, c, contours, speed })
}

/// `K(kappa) = n Gamma(2 - 8/kappa) / Gamma(1 - 4/kappa)^2`, written so it is
/// finite at the removable singularities `8/kappa = 3, 5, 7, ...`.
pub fn screening_constant(kappa: f64) -> Result<f64> {
    let s = (4.0 * PI / kappa).sin();
    let g = 1.0 - 4.0 * kappa.recip();
    if s.abs() < 1e-12 || is_nonpositive_integer(g) {
        return Err(Error::PrefactorPole(kappa));
    }
    // pi / (Gamma(8/kappa - 1) sin(4 pi/kappa) Gamma(1 - 4/kappa)^2)
    let g1 = gamma(8.0 / kappa - 1.0);
    let g2 = gamma(g);
    Ok(PI / (g1 * s * g2 * g2))
}

fn is_nonpositive_integer(v: f64) -> bool {
    v <= 0.5 && (v - v.round()).abs() < 1e-12
}

/// True when `-4/kappa` is a negative integer (`kappa = 4/m`), where both the
/// prefactor and the regularized contour are singular.
pub fn at_contour_pole(kappa: f64) -> bool {
    let b = 4.0 / kappa;
    (b - b.round()).abs() < 1e-9
}

/// `F_{c,theta} / n(kappa)`, which stays finite where `n(kappa) = 0`.
pub fn evaluate_reduced(spec: &CoulombGasSpec, x: &PointConfig, quad: &QuadConfig) -> Result<EvalResult> {
    quad.validate()?;
    if x.n_arcs() != spec.n_arcs {
        return Err(Error::SizeMismatch { expected: 2 * spec.n_arcs, got: x.coords().len() });
    }
    let kappa = spec.speed.kappa;
    if spec.n_arcs >= 2 && at_contour_pole(kappa) {
        return richardson_at_pole(spec, x, quad);
    }
    evaluate_reduced_regular(spec, x, quad, kappa)
}

fn richardson_at_pole(spec: &CoulombGasSpec, x: &PointConfig, quad: &QuadConfig) -> Result<EvalResult> {
    let kappa = spec.speed.kappa;
    let h = quad.pole_step;
    let mut forced = quad.clone();
    forced.force_kind = Some(ContourKind::Pochhammer);
    let sym = |step: f64| -> Result<(f64, f64, f64, usize)> {
        let lo = evaluate_reduced_regular(spec, x, &forced, kappa - step)?;
        let hi = evaluate_reduced_regular(spec, x, &forced, kappa + step)?;
        Ok((
            0.5 * (lo.value + hi.value),
            0.5 * (lo.abs_error_est + hi.abs_error_est),
            lo.imag_leak.max(hi.imag_leak),
            lo.n_evals + hi.n_evals,
        ))
    };
    let (v1, e1, l1, n1) = sym(h)?;
    let (v2, e2, l2, n2) = sym(2.0 * h)?;
    let value = (4.0 * v1 - v2) / 3.0;
    // The O(h^4) remainder is bounded by the change the extrapolation made.
    let extrap = ((v1 - v2) / 3.0).abs() * h * h;
    Ok(EvalResult { value, abs_error_est: (4.0 * e1 + e2) / 3.0 + extrap, imag_leak: l1.max(l2), n_evals: n1 + n2 })
}

fn evaluate_reduced_regular(spec: &CoulombGasSpec, x: &PointConfig, quad: &QuadConfig, kappa: f64) -> Result<EvalResult> {
    let xs = x.coords();
    let n_points = xs.len();
    let c0 = spec.c - 1;
    let m = spec.contours.len();

    // Algebraic prefactor, accumulated in logs.
    let mut log_pow = 0.0;
    for j in 0..n_points {
        for k in (j + 1)..n_points {
            if j != c0 && k != c0 {
                log_pow += (2.0 / kappa) * (xs[k] - xs[j]).ln();
            }
        }
    }
    for k in 0..n_points {
        if k != c0 {
            log_pow += (1.0 - 6.0 / kappa) * (xs[c0] - xs[k]).abs().ln();
        }
    }
    if m == 0 {
        return Ok(EvalResult { value: log_pow.exp(), abs_error_est: 0.0, imag_leak: 0.0, n_evals: 1 });
    }
    let k_const = screening_constant(kappa)?;
    let scale = k_const.powi(m as i32) * log_pow.exp();

    let mut betas = vec![-4.0 / kappa; n_points];
    betas[c0] = 12.0 / kappa - 2.0;
    let endpoints: Vec<(usize, usize)> = spec.contours.iter().map(|c| c.endpoints).collect();
    let simple_ok = 1.0 - 4.0 / kappa > quad.simple_margin;
    let kinds: Vec<ContourKind> = spec
        .contours
        .iter()
        .map(|c| match quad.force_kind {
            Some(k) => k,
            None if c.kind == ContourKind::SimpleUpperArc && !simple_ok => ContourKind::Pochhammer,
            None => c.kind,
        })
        .collect();
    if kinds.contains(&ContourKind::SimpleUpperArc) && !(1.0 - 4.0 / kappa > 0.0) {
        return invalid(format!("simple contours need endpoint exponents above -1 (kappa = {kappa})"));
    }
    let params = GeomParams { height_ratio: quad.arc_height, loop_radius: quad.loop_radius };
    let ts = TanhSinh { max_level: quad.tanh_sinh_levels, s_max: 5.0 };
    let gk = GaussKronrod { max_panels: quad.max_panels };
    let integrand = Integrand::new(xs, betas, 8.0 / kappa, &endpoints, &kinds, &params, quad.tolerance(), ts, gk);
    let j = integrand.integrate()?;
    let phase = integrand.reference_phase();
    let rotated = j.value * Complex64::from_polar(1.0, -phase);
    let value = scale * rotated.re;
    let imag_leak = (scale * rotated.im).abs();
    let abs_error_est = scale.abs() * j.err;
    let target = quad.rel_tol.max(1e-13) * 1e3 * value.abs() + quad.abs_tol;
    if !value.is_finite() {
        return Err(Error::Quadrature { estimate: f64::INFINITY, tol: target });
    }
    let leak_tol = quad.reality_rel_tol * value.abs() + quad.reality_abs_tol + 10.0 * abs_error_est;
    if imag_leak > leak_tol {
        return Err(Error::Reality { leak: imag_leak, tol: leak_tol });
    }
    Ok(EvalResult { value, abs_error_est, imag_leak, n_evals: j.n_evals })
}

/// `F_{c,theta}(kappa | x)`.
pub fn evaluate_basis(spec: &CoulombGasSpec, x: &PointConfig, quad: &QuadConfig) -> Result<EvalResult> {
    let r = evaluate_reduced(spec, x, quad)?;
    let n = spec.speed.n;
    Ok(EvalResult { value: n * r.value, abs_error_est: n.abs() * r.abs_error_est, imag_leak: n.abs() * r.imag_leak, ..r })
}

/// The bare integral `N[J]` for arbitrary noncrossing contours at any kappa,
/// each contour given by 1-based endpoints.
pub fn evaluate_dotsenko_fateev_kernel(
    x: &PointConfig,
    c: usize,
    contours: &[(usize, usize)],
    kappa: f64,
    quad: &QuadConfig,
) -> Result<EvalResult> {
    quad.validate()?;
    fugacity(kappa)?;
    let xs = x.coords();
    let n_points = xs.len();
    if !(1..=n_points).contains(&c) {
        return invalid(format!("conjugate point c = {c} outside 1..={n_points}"));
    }
    let mut used = vec![false; n_points];
    let mut eps = Vec::with_capacity(contours.len());
    for &(i, j) in contours {
        let (a, b) = (i.min(j), i.max(j));
        if a == 0 || b > n_points || a == b {
            return invalid(format!("contour ({i}, {j}) has invalid endpoints"));
        }
        if a == c || b == c {
            return invalid("no contour may end at the conjugate point");
        }
        if used[a - 1] || used[b - 1] {
            return invalid("contours must not share endpoints");
        }
        used[a - 1] = true;
        used[b - 1] = true;
        eps.push((a - 1, b - 1));
    }
    for (p, &(a, b)) in eps.iter().enumerate() {
        for &(a2, b2) in &eps[p + 1..] {
            let inside = a < a2 && b2 < b || a2 < a && b < b2;
            let apart = b < a2 || b2 < a;
            if !(inside || apart) {
                return invalid("contours must not cross");
            }
        }
    }
    if eps.is_empty() {
        return Ok(EvalResult { value: 1.0, abs_error_est: 0.0, imag_leak: 0.0, n_evals: 0 });
    }
    let mut betas = vec![-4.0 / kappa; n_points];
    betas[c - 1] = 12.0 / kappa - 2.0;
    let kind = quad.force_kind.unwrap_or(if 1.0 - 4.0 / kappa > quad.simple_margin {
        ContourKind::SimpleUpperArc
    } else {
        ContourKind::Pochhammer
    });
    let kinds = vec![kind; eps.len()];
    let params = GeomParams { height_ratio: quad.arc_height, loop_radius: quad.loop_radius };
    let ts = TanhSinh { max_level: quad.tanh_sinh_levels, s_max: 5.0 };
    let gk = GaussKronrod { max_panels: quad.max_panels };
    let integrand = Integrand::new(xs, betas, 8.0 / kappa, &eps, &kinds, &params, quad.tolerance(), ts, gk);
    let j = integrand.integrate()?;
    let rotated = j.value * Complex64::from_polar(1.0, -integrand.reference_phase());
    Ok(EvalResult { value: rotated.re, abs_error_est: j.err, imag_leak: rotated.im.abs(), n_evals: j.n_evals })
}

/// Right side of the `kappa = 6` kernel identity:
/// `Gamma(1/3)^{2N-2} / Gamma(2/3)^{N-1} prod_{i<j; i,j != c} |x_i - x_j|^{-1/3}`.
pub fn kappa6_kernel_closed_form(x: &PointConfig, c: usize) -> f64 {
    let xs = x.coords();
    let n = x.n_arcs() as f64;
    let mut lg = (2.0 * n - 2.0) * ln_gamma(1.0 / 3.0) - (n - 1.0) * ln_gamma(2.0 / 3.0);
    for i in 0..xs.len() {
        for j in (i + 1)..xs.len() {
            if i + 1 != c && j + 1 != c {
                lg -= (xs[j] - xs[i]).ln() / 3.0;
            }
        }
    }
    lg.exp()
}

/// A basis function bound to a conjugate point and quadrature settings.
#[derive(Clone, Debug)]
pub struct BasisFunction {
    pub spec: CoulombGasSpec,
    pub quad: QuadConfig,
    /// Evaluate `F / n` instead of `F`.
    pub reduced: bool,
    /// Re-pick the conjugate point at every evaluation (see [`isolated_point`]).
    pub auto_conjugate: bool,
}

impl BasisFunction {
    pub fn new(spec: CoulombGasSpec, quad: QuadConfig) -> Self {
        BasisFunction { spec, quad, reduced: false, auto_conjugate: false }
    }

    /// Chooses `x_c` per evaluation as the most isolated point. The value does
    /// not depend on `c`, but a conjugate point inside a nearly collapsed gap
    /// costs accuracy.
    pub fn with_auto_conjugate(mut self) -> Self {
        self.auto_conjugate = true;
        self
    }

    /// `F_theta` (1-based canonical index); the conjugate point is picked per
    /// evaluation.
    pub fn canonical(n_arcs: usize, theta: usize, kappa: f64, quad: QuadConfig) -> Result<Self> {
        let conn = Connectivities::new(n_arcs, None)?;
        let d = conn.get(theta)?.clone();
        let mut s = build_spec_for_diagram(&d, default_conjugate(&d), kappa)?;
        s.theta = Some(theta);
        Ok(BasisFunction::new(s, quad).with_auto_conjugate())
    }

    pub fn for_diagram(d: &ArcDiagram, c: usize, kappa: f64, quad: QuadConfig) -> Result<Self> {
        Ok(BasisFunction::new(build_spec_for_diagram(d, c, kappa)?, quad))
    }

    pub fn reduced(mut self) -> Self {
        self.reduced = true;
        self
    }

    pub fn evaluate(&self, x: &PointConfig) -> Result<EvalResult> {
        let picked;
        let spec = if self.auto_conjugate {
            let c = isolated_point(x.coords());
            if c == self.spec.c {
                &self.spec
            } else {
                picked = CoulombGasSpec {
                    theta: self.spec.theta,
                    ..build_spec_for_diagram(&self.spec.diagram, c, self.spec.speed.kappa)?
                };
                &picked
            }
        } else {
            &self.spec
        };
        if self.reduced {
            evaluate_reduced(spec, x, &self.quad)
        } else {
            evaluate_basis(spec, x, &self.quad)
        }
    }
}

impl Evaluator for BasisFunction {
    fn n_points(&self) -> usize {
        2 * self.spec.n_arcs
    }

    fn eval(&self, x: &[f64]) -> Result<f64> {
        check_len(self, x)?;
        let r = self.evaluate(&PointConfig::with_min_gap(x.to_vec(), 0.0)?)?;
        // The estimate carries a 50-eps roundoff floor per panel, which is
        // pessimistic when Pochhammer pieces cancel; only gross failures stop here.
        let tol = 1e3 * self.quad.rel_tol * r.value.abs() + 1e3 * self.quad.abs_tol;
        if r.abs_error_est > tol.max(1e-4 * r.value.abs()) {
            return Err(Error::Quadrature { estimate: r.abs_error_est, tol });
        }
        Ok(r.value)
    }
}

/// 1-based index of the point with the largest distance to its nearest
/// neighbour (first one on ties).
pub fn isolated_point(x: &[f64]) -> usize {
    let n = x.len();
    let room = |k: usize| {
        let l = if k > 0 { x[k] - x[k - 1] } else { f64::INFINITY };
        let r = if k + 1 < n { x[k + 1] - x[k] } else { f64::INFINITY };
        l.min(r)
    };
    let mut best = 0;
    for k in 1..n {
        if room(k) > room(best) {
            best = k;
        }
    }
    best + 1
}

/// The conjugate point used when none is given: the right endpoint of the
/// outermost arc through point 1, which keeps every contour clear of
/// `x_1`.
pub fn default_conjugate(d: &ArcDiagram) -> usize {
    d.partner(0) + 1
}

/// Conjugate point suited to collapsing `(x_i, x_{i+1})` (1-based `i`, no wrap):
/// off the interval when an arc joins it, otherwise `x_i` itself.
pub fn conjugate_for_interval(d: &ArcDiagram, i: usize) -> usize {
    let (p, q) = (i - 1, i);
    if d.partner(p) == q {
        // farthest endpoint from the interval
        let far = (0..d.n_points()).filter(|&j| j != p && j != q).max_by_key(|&j| (j as i64 - p as i64).abs());
        far.map_or(1, |j| j + 1)
    } else {
        i
    }
}
