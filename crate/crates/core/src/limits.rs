//! Collapse limits by extrapolation along a geometric ladder, and the
//! composed functionals `[L_s]`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::combinatorics::{ArcDiagram, Connectivities};
use crate::error::{invalid, Error, Result};
use crate::evaluator::{check_len, Evaluator};
use crate::meander::EightOverKappa;

/// Ladder and fit settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LadderConfig {
    /// First separation as a fraction of the local gap.
    pub start_frac: f64,
    /// Ratio between consecutive separations.
    pub ratio: f64,
    /// Minimum number of rungs; raised to `parameters + 3` when needed.
    pub n_points: usize,
    /// Terms kept in the series with the leading indicial power.
    pub a_terms: usize,
    /// Terms kept in the series with indicial power `2/kappa`.
    pub b_terms: usize,
    /// Terms kept in the logarithmic series (only when `8/kappa` is odd).
    pub c_terms: usize,
    /// Largest accepted RMS residual relative to the largest ladder value.
    pub fit_tol: f64,
    /// Largest accepted change of the leading coefficient when the
    /// coarsest rung is dropped, relative to the ladder scale.
    pub stability_tol: f64,
    /// Return an error instead of a flagged result when a check fails.
    pub strict: bool,
}

impl Default for LadderConfig {
    fn default() -> Self {
        LadderConfig {
            start_frac: 0.1,
            ratio: 0.5,
            n_points: 7,
            a_terms: 3,
            b_terms: 3,
            c_terms: 2,
            fit_tol: 1e-6,
            stability_tol: 1e-4,
            strict: false,
        }
    }
}

impl LadderConfig {
    /// Denser ladder with longer tails, for expansions carrying a log series.
    /// With the default ladder the truncated tail leaks about `1e-3` of the
    /// log coefficient into expansions where it vanishes.
    pub fn log_case() -> Self {
        LadderConfig { ratio: 0.6, n_points: 12, b_terms: 5, c_terms: 3, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.start_frac > 0.0 && self.start_frac < 1.0) {
            return invalid("ladder start_frac must lie in (0, 1)");
        }
        if !(self.ratio > 0.0 && self.ratio < 1.0) {
            return invalid("ladder ratio must lie in (0, 1)");
        }
        if !(self.fit_tol > 0.0 && self.stability_tol > 0.0) {
            return invalid("ladder tolerances must be positive");
        }
        if self.a_terms == 0 {
            return invalid("a_terms must be at least 1");
        }
        Ok(())
    }
}

/// Exponent structure of `delta^{6/kappa - 1} F` near a collapse:
/// `sum_m a_m delta^m + delta^p sum_m b_m delta^m (+ log(delta) delta^p sum_m c_m delta^m)`
/// with `p = 8/kappa - 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesModel {
    pub p: f64,
    pub a_terms: usize,
    pub b_terms: usize,
    pub c_terms: usize,
}

impl SeriesModel {
    pub fn for_kappa(kappa: f64, cfg: &LadderConfig) -> Self {
        let p = 8.0 / kappa - 1.0;
        let mut a_terms = cfg.a_terms;
        let mut c_terms = 0;
        if let Some(r) = EightOverKappa::integer(kappa) {
            // The first series stops at m = r - 2; its tail belongs to the second.
            a_terms = a_terms.min((r - 1).max(1) as usize);
            if r % 2 == 1 && r > 1 {
                c_terms = cfg.c_terms;
            }
        }
        SeriesModel { p, a_terms, b_terms: cfg.b_terms, c_terms }
    }

    /// Single-series model `sum_m a_m delta^m`.
    pub fn analytic(terms: usize) -> Self {
        SeriesModel { p: 0.0, a_terms: terms, b_terms: 0, c_terms: 0 }
    }

    pub fn n_params(&self) -> usize {
        self.a_terms + self.b_terms + self.c_terms
    }

    fn row(&self, t: f64) -> Vec<f64> {
        let mut r = Vec::with_capacity(self.n_params());
        for m in 0..self.a_terms {
            r.push(t.powi(m as i32));
        }
        for m in 0..self.b_terms {
            r.push(t.powf(self.p + m as f64));
        }
        for m in 0..self.c_terms {
            r.push(t.powf(self.p + m as f64) * t.ln());
        }
        r
    }
}

/// Least-squares fit of a [`SeriesModel`] on a ladder, with coefficients
/// expressed in the original variable `delta`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesFit {
    pub model: SeriesModel,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    /// RMS residual relative to the largest ladder value.
    pub residual: f64,
    /// Change of `a[0]` when the coarsest rung is dropped, relative to the ladder scale.
    pub stability: f64,
    /// Largest ladder magnitude.
    pub scale: f64,
}

fn lstsq(rows: &[Vec<f64>], y: &[f64]) -> Result<(Vec<f64>, f64)> {
    let n = rows.len();
    let k = rows[0].len();
    if n < k {
        return Err(Error::Fit(format!("{n} ladder points for {k} parameters")));
    }
    let mut a = DMatrix::from_fn(n, k, |i, j| rows[i][j]);
    let mut norms = vec![1.0; k];
    for j in 0..k {
        let s = a.column(j).amax();
        if s > 0.0 {
            norms[j] = s;
            a.column_mut(j).scale_mut(1.0 / s);
        }
    }
    let b = DVector::from_column_slice(y);
    let svd = a.clone().svd(true, true);
    let sol = svd.solve(&b, 1e-14).map_err(|e| Error::Fit(e.to_string()))?;
    let resid = &a * &sol - &b;
    let rms = (resid.norm_squared() / n as f64).sqrt();
    Ok(((0..k).map(|j| sol[j] / norms[j]).collect(), rms))
}

/// Fits `model` to `values` sampled at `deltas` (all positive).
pub fn fit_series(model: &SeriesModel, deltas: &[f64], values: &[f64]) -> Result<SeriesFit> {
    if deltas.len() != values.len() || deltas.is_empty() {
        return invalid("ladder and values must have equal, positive length");
    }
    if model.n_params() == 0 {
        return invalid("empty series model");
    }
    let d0 = deltas.iter().cloned().fold(0.0, f64::max);
    let ts: Vec<f64> = deltas.iter().map(|d| d / d0).collect();
    let rows: Vec<Vec<f64>> = ts.iter().map(|&t| model.row(t)).collect();
    let scale = values.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let (coef, rms) = lstsq(&rows, values)?;
    // Same fit without the coarsest rung.
    let stability = if rows.len() > model.n_params() + 1 {
        let (idx, _) = ts.iter().enumerate().fold((0, 0.0), |acc, (i, &t)| if t > acc.1 { (i, t) } else { acc });
        let rows2: Vec<Vec<f64>> = rows.iter().enumerate().filter(|(i, _)| *i != idx).map(|(_, r)| r.clone()).collect();
        let vals2: Vec<f64> = values.iter().enumerate().filter(|(i, _)| *i != idx).map(|(_, v)| *v).collect();
        let (coef2, _) = lstsq(&rows2, &vals2)?;
        (coef2[0] - coef[0]).abs() / scale.max(f64::MIN_POSITIVE)
    } else {
        f64::INFINITY
    };
    let (na, nb) = (model.a_terms, model.b_terms);
    let a: Vec<f64> = (0..na).map(|m| coef[m] / d0.powi(m as i32)).collect();
    let c: Vec<f64> = (0..model.c_terms).map(|m| coef[na + nb + m] / d0.powf(model.p + m as f64)).collect();
    let b: Vec<f64> = (0..nb)
        .map(|m| {
            let raw = coef[na + m] / d0.powf(model.p + m as f64);
            // t^q log t = (delta/d0)^q (log delta - log d0)
            if m < c.len() {
                raw - c[m] * d0.ln()
            } else {
                raw
            }
        })
        .collect();
    Ok(SeriesFit { model: model.clone(), a, b, c, residual: rms / scale.max(f64::MIN_POSITIVE), stability, scale })
}

/// Ladder data and fit for one collapse.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitResult {
    pub value: f64,
    pub deltas: Vec<f64>,
    pub values: Vec<f64>,
    pub fit: SeriesFit,
    /// Whether the residual and stability checks passed.
    pub accepted: bool,
}

impl LimitResult {
    fn from_fit(fit: SeriesFit, deltas: Vec<f64>, values: Vec<f64>, cfg: &LadderConfig) -> Result<Self> {
        let accepted = fit.residual <= cfg.fit_tol && fit.stability <= cfg.stability_tol;
        if cfg.strict && !accepted {
            return Err(Error::Fit(format!(
                "residual {:.2e} (tol {:.1e}), stability {:.2e} (tol {:.1e})",
                fit.residual, cfg.fit_tol, fit.stability, cfg.stability_tol
            )));
        }
        Ok(LimitResult { value: fit.a[0], deltas, values, fit, accepted })
    }
}

fn n_rungs(cfg: &LadderConfig, model: &SeriesModel) -> usize {
    cfg.n_points.max(model.n_params() + 3)
}

/// Separation scale at point `i` (0-based) ignoring point `i + 1`.
fn collapse_gap(x: &[f64], i: usize) -> f64 {
    let mut g = f64::INFINITY;
    if i > 0 {
        g = g.min(x[i] - x[i - 1]);
    }
    if i + 2 < x.len() {
        g = g.min(x[i + 2] - x[i]);
    }
    if !g.is_finite() {
        g = x[i + 1] - x[i];
    }
    g
}

/// Ladder values `delta^{6/kappa - 1} F` with `x_{i+1} = x_i + delta` (0-based `i`).
pub fn collapse_ladder<E: Evaluator + ?Sized>(
    f: &E,
    x: &[f64],
    i: usize,
    kappa: f64,
    deltas: &[f64],
) -> Result<Vec<f64>> {
    deltas
        .par_iter()
        .map(|&d| {
            let mut y = x.to_vec();
            y[i + 1] = y[i] + d;
            Ok(d.powf(6.0 / kappa - 1.0) * f.eval(&y)?)
        })
        .collect()
}

/// Geometric ladder for the interval `(x_i, x_{i+1})` (0-based `i`).
pub fn ladder_deltas(x: &[f64], i: usize, cfg: &LadderConfig, rungs: usize) -> Vec<f64> {
    let d0 = cfg.start_frac * collapse_gap(x, i);
    (0..rungs).map(|k| d0 * cfg.ratio.powi(k as i32)).collect()
}

fn check_interval(n_points: usize, i: usize) -> Result<usize> {
    if !(1..n_points).contains(&i) {
        return invalid(format!("interval {i} outside 1..{} (use the at-infinity collapse for the wrap)", n_points - 1));
    }
    Ok(i - 1)
}

/// `lim (x_{i+1} - x_i)^{6/kappa - 1} F` as `x_{i+1} -> x_i`, with 1-based `i`.
pub fn collapse_limit<E: Evaluator + ?Sized>(
    f: &E,
    x: &[f64],
    i: usize,
    kappa: f64,
    cfg: &LadderConfig,
) -> Result<LimitResult> {
    let model = SeriesModel::for_kappa(kappa, cfg);
    collapse_limit_with_model(f, x, i, kappa, cfg, &model)
}

pub fn collapse_limit_with_model<E: Evaluator + ?Sized>(
    f: &E,
    x: &[f64],
    i: usize,
    kappa: f64,
    cfg: &LadderConfig,
    model: &SeriesModel,
) -> Result<LimitResult> {
    cfg.validate()?;
    check_len(f, x)?;
    let i0 = check_interval(x.len(), i)?;
    let deltas = ladder_deltas(x, i0, cfg, n_rungs(cfg, model));
    let values = collapse_ladder(f, x, i0, kappa, &deltas)?;
    let fit = fit_series(model, &deltas, &values)?;
    LimitResult::from_fit(fit, deltas, values, cfg)
}

/// `lim (2R)^{6/kappa - 1} F(-R, y_1, ..., y_{2N-2}, R)` as `R -> infinity`.
pub fn collapse_at_infinity<E: Evaluator + ?Sized>(
    f: &E,
    inner: &[f64],
    kappa: f64,
    cfg: &LadderConfig,
) -> Result<LimitResult> {
    cfg.validate()?;
    if inner.len() + 2 != f.n_points() {
        return Err(Error::SizeMismatch { expected: f.n_points() - 2, got: inner.len() });
    }
    let model = SeriesModel::for_kappa(kappa, cfg);
    let rungs = n_rungs(cfg, &model);
    // R_0 large against the inner configuration, then geometric growth.
    let reach = inner.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let spread = match (inner.first(), inner.last()) {
        (Some(a), Some(b)) if b > a => b - a,
        _ => 1.0,
    };
    let r0 = (reach + spread) / cfg.start_frac;
    let rs: Vec<f64> = (0..rungs).map(|k| r0 / cfg.ratio.powi(k as i32)).collect();
    let values: Vec<f64> = rs
        .par_iter()
        .map(|&r| {
            let mut y = Vec::with_capacity(inner.len() + 2);
            y.push(-r);
            y.extend_from_slice(inner);
            y.push(r);
            Ok((2.0 * r).powf(6.0 / kappa - 1.0) * f.eval(&y)?)
        })
        .collect::<Result<_>>()?;
    let deltas: Vec<f64> = rs.iter().map(|r| 1.0 / r).collect();
    let fit = fit_series(&model, &deltas, &values)?;
    LimitResult::from_fit(fit, deltas, values, cfg)
}

/// One step of a composed limit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "interval")]
pub enum Collapse {
    /// Collapse `(x_j, x_{j+1})` of the current configuration (1-based `j`).
    Adjacent(usize),
    /// Collapse the first and last points through infinity.
    AtInfinity,
}

/// A sequence of collapses realising the diagram of `[L_s]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitSequence {
    pub target: ArcDiagram,
    pub steps: Vec<Collapse>,
}

impl LimitSequence {
    /// Collapses the leftmost innermost arc at every step.
    pub fn new(target: &ArcDiagram) -> Self {
        Self::with_choice(target, |adj| adj[0]).expect("every diagram has an adjacent arc")
    }

    /// `pick` chooses among the currently adjacent arcs `{j, j+1}` (1-based `j`).
    pub fn with_choice(target: &ArcDiagram, mut pick: impl FnMut(&[usize]) -> usize) -> Result<Self> {
        let mut d = target.clone();
        let mut steps = Vec::new();
        while d.n_arcs() > 1 {
            let adj: Vec<usize> = (0..d.n_points() - 1).filter(|&j| d.partner(j) == j + 1).map(|j| j + 1).collect();
            let j = pick(&adj);
            if !adj.contains(&j) {
                return invalid(format!("{j} is not an adjacent arc of {d}"));
            }
            d = d.remove_adjacent_arc(j - 1)?;
            steps.push(Collapse::Adjacent(j));
        }
        Ok(LimitSequence { target: target.clone(), steps })
    }

    /// Validates an explicit step list against the target diagram.
    pub fn from_steps(target: &ArcDiagram, steps: Vec<Collapse>) -> Result<Self> {
        let mut d = target.clone();
        for s in &steps {
            if d.n_arcs() == 1 {
                return invalid("too many collapse steps");
            }
            d = match *s {
                Collapse::Adjacent(j) => {
                    if j == 0 || j >= d.n_points() || d.partner(j - 1) != j {
                        return invalid(format!("no arc {{{j}, {}}} in {d}", j + 1));
                    }
                    d.remove_adjacent_arc(j - 1)?
                }
                Collapse::AtInfinity => {
                    let last = d.n_points() - 1;
                    if d.partner(0) != last {
                        return invalid(format!("no arc joining the first and last points of {d}"));
                    }
                    let inner: Vec<usize> = d.pairing()[1..last].iter().map(|&p| p - 1).collect();
                    ArcDiagram::from_pairing(inner)?
                }
            };
        }
        if d.n_arcs() != 1 {
            return invalid("collapse sequence does not reach a single arc");
        }
        Ok(LimitSequence { target: target.clone(), steps })
    }

    /// Every admissible ordering of adjacent collapses (small `N` only).
    pub fn all_orders(target: &ArcDiagram) -> Vec<Self> {
        fn rec(d: &ArcDiagram, steps: &mut Vec<Collapse>, out: &mut Vec<Vec<Collapse>>) {
            if d.n_arcs() == 1 {
                out.push(steps.clone());
                return;
            }
            for j in 0..d.n_points() - 1 {
                if d.partner(j) == j + 1 {
                    let next = d.remove_adjacent_arc(j).expect("adjacent arc");
                    steps.push(Collapse::Adjacent(j + 1));
                    rec(&next, steps, out);
                    steps.pop();
                }
            }
        }
        let mut out = Vec::new();
        rec(target, &mut Vec::new(), &mut out);
        out.into_iter().map(|steps| LimitSequence { target: target.clone(), steps }).collect()
    }
}

/// The limit of an evaluator along one collapse, as a function of the
/// remaining points.
pub struct Collapsed<'a> {
    inner: &'a dyn Evaluator,
    step: Collapse,
    kappa: f64,
    cfg: LadderConfig,
}

impl<'a> Collapsed<'a> {
    pub fn new(inner: &'a dyn Evaluator, step: Collapse, kappa: f64, cfg: LadderConfig) -> Result<Self> {
        if inner.n_points() < 4 {
            return invalid("collapsing needs at least two arcs");
        }
        if let Collapse::Adjacent(j) = step {
            if j == 0 || j >= inner.n_points() {
                return invalid(format!("interval {j} out of range"));
            }
        }
        Ok(Collapsed { inner, step, kappa, cfg })
    }

    /// Points for the inner evaluator with the collapsing pair inserted at a
    /// neutral position between its neighbours.
    fn expand(&self, y: &[f64], j: usize) -> Vec<f64> {
        let n = y.len();
        let avg = if n >= 2 { (y[n - 1] - y[0]) / (n - 1) as f64 } else { 1.0 };
        let pos = match (j >= 2, j <= n) {
            (true, true) => 0.5 * (y[j - 2] + y[j - 1]),
            (false, true) => y[0] - avg,
            (true, false) => y[n - 1] + avg,
            (false, false) => 0.0,
        };
        let mut x = Vec::with_capacity(n + 2);
        x.extend_from_slice(&y[..j - 1]);
        x.push(pos);
        // Placeholder; the ladder moves this point.
        x.push(pos);
        x.extend_from_slice(&y[j - 1..]);
        x
    }
}

impl Evaluator for Collapsed<'_> {
    fn n_points(&self) -> usize {
        self.inner.n_points() - 2
    }

    fn eval(&self, y: &[f64]) -> Result<f64> {
        check_len(self, y)?;
        match self.step {
            Collapse::Adjacent(j) => {
                let x = self.expand(y, j);
                Ok(collapse_limit(self.inner, &x, j, self.kappa, &self.cfg)?.value)
            }
            Collapse::AtInfinity => Ok(collapse_at_infinity(self.inner, y, self.kappa, &self.cfg)?.value),
        }
    }
}

/// `[L_s] F` along an explicit sequence.
pub fn apply_sequence(seq: &LimitSequence, f: &dyn Evaluator, x: &[f64], kappa: f64, cfg: &LadderConfig) -> Result<f64> {
    check_len(f, x)?;
    if f.n_points() != seq.target.n_points() {
        return Err(Error::SizeMismatch { expected: seq.target.n_points(), got: f.n_points() });
    }
    nest(f, &seq.steps, x.to_vec(), kappa, cfg)
}

fn nest(f: &dyn Evaluator, steps: &[Collapse], xs: Vec<f64>, kappa: f64, cfg: &LadderConfig) -> Result<f64> {
    let Some((&step, rest)) = steps.split_first() else {
        return Ok(f.eval(&xs)? * (xs[1] - xs[0]).powf(6.0 / kappa - 1.0));
    };
    let g = Collapsed::new(f, step, kappa, cfg.clone())?;
    // The remaining points keep their positions.
    let ys = match step {
        Collapse::Adjacent(j) => {
            let mut v = xs;
            v.drain(j - 1..j + 1);
            v
        }
        Collapse::AtInfinity => xs[1..xs.len() - 1].to_vec(),
    };
    nest(&g, rest, ys, kappa, cfg)
}

/// `[L_s] F` for a diagram, collapsing the leftmost innermost arc first.
pub fn apply_l(target: &ArcDiagram, f: &dyn Evaluator, x: &[f64], kappa: f64, cfg: &LadderConfig) -> Result<f64> {
    apply_sequence(&LimitSequence::new(target), f, x, kappa, cfg)
}

/// `[L_s] F` with `s` a 1-based index in the canonical (or anchored) order.
pub fn apply_l_index(
    s: usize,
    anchor: Option<usize>,
    f: &dyn Evaluator,
    x: &[f64],
    kappa: f64,
    cfg: &LadderConfig,
) -> Result<f64> {
    let conn = Connectivities::new(f.n_arcs(), anchor)?;
    apply_l(conn.get(s)?, f, x, kappa, cfg)
}

/// One step of the successive fusion `x_2 -> x_1, x_3 -> x_1, ...`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FusionStep {
    /// Power `2j/kappa` removed at step `j`.
    pub power: f64,
    /// Exponent of the competing channel, `1 - (4j + 4)/kappa`.
    pub competing_exponent: f64,
    /// Share of the smallest-rung value carried by the competing channel.
    pub competing_share: f64,
    pub limit: f64,
}

/// Result of [`rainbow_fusion`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FusionReport {
    pub steps: Vec<FusionStep>,
    /// Whether every competing channel vanished (share below `tol`).
    pub exists: bool,
}

/// Successively fuses `x_2, ..., x_N` into `x_1`, removing the power `2j/kappa`
/// at step `j`, and reports whether each limit exists. The limit at step `j`
/// is evaluated at the configuration where the first `j` points have merged,
/// so step `j > 1` nests the previous limits numerically.
pub fn rainbow_fusion(f: &dyn Evaluator, x: &[f64], kappa: f64, cfg: &LadderConfig, tol: f64) -> Result<FusionReport> {
    check_len(f, x)?;
    let n = f.n_arcs();
    let mut steps = Vec::new();
    let mut exists = true;
    for j in 1..n {
        let power = 2.0 * j as f64 / kappa;
        let q = 1.0 - (4.0 * j as f64 + 4.0) / kappa;
        let model = SeriesModel { p: q, a_terms: cfg.a_terms, b_terms: cfg.b_terms, c_terms: 0 };
        let rungs = n_rungs(cfg, &model);
        // Points after fusing j-1 of them into x_1: x_1, x_{j+1}, x_{j+2}, ...
        let rest: Vec<f64> = std::iter::once(x[0]).chain(x[j..].iter().cloned()).collect();
        let gap = rest[1] - rest[0];
        let deltas: Vec<f64> = (0..rungs).map(|k| cfg.start_frac * gap * cfg.ratio.powi(k as i32)).collect();
        let values: Vec<f64> = deltas
            .par_iter()
            .map(|&d| {
                let mut y = rest.clone();
                y[1] = y[0] + d;
                Ok(d.powf(-power) * fused(f, &y, j, kappa, cfg)?)
            })
            .collect::<Result<_>>()?;
        let fit = fit_series(&model, &deltas, &values)?;
        let dmin = deltas[rungs - 1];
        let div = (fit.b[0] * dmin.powf(q)).abs();
        let share = div / (div + fit.a[0].abs()).max(f64::MIN_POSITIVE);
        exists &= share < tol;
        steps.push(FusionStep { power, competing_exponent: q, competing_share: share, limit: fit.a[0] });
        if !exists {
            break;
        }
    }
    Ok(FusionReport { steps, exists })
}

/// `F` with the points `x_2, ..., x_j` fused into `x_1` (limits nested),
/// evaluated at `y = (x_1, x_{j+1}, ...)`.
fn fused(f: &dyn Evaluator, y: &[f64], j: usize, kappa: f64, cfg: &LadderConfig) -> Result<f64> {
    if j == 1 {
        return f.eval(y);
    }
    let power = 2.0 * (j - 1) as f64 / kappa;
    let q = 1.0 - (4.0 * (j - 1) as f64 + 4.0) / kappa;
    let model = SeriesModel { p: q, a_terms: cfg.a_terms, b_terms: cfg.b_terms, c_terms: 0 };
    let rungs = n_rungs(cfg, &model);
    let gap = y[1] - y[0];
    let deltas: Vec<f64> = (0..rungs).map(|k| cfg.start_frac * gap * cfg.ratio.powi(k as i32)).collect();
    let values: Vec<f64> = deltas
        .iter()
        .map(|&d| {
            let mut z = Vec::with_capacity(y.len() + 1);
            z.push(y[0]);
            z.push(y[0] + d);
            z.extend_from_slice(&y[1..]);
            Ok(d.powf(-power) * fused(f, &z, j - 1, kappa, cfg)?)
        })
        .collect::<Result<_>>()?;
    Ok(fit_series(&model, &deltas, &values)?.a[0])
}
