//! Two-point expansions of solutions and the interval classifications built on them.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::combinatorics::Connectivities;
use crate::coulomb_gas::{PointConfig, QuadConfig};
use crate::error::{invalid, Error, Result};
use crate::evaluator::{check_len, Evaluator};
use crate::limits::{collapse_ladder, collapse_limit, fit_series, ladder_deltas, LadderConfig, SeriesFit, SeriesModel};
use crate::meander::{build_meander_matrix, fugacity, EightOverKappa};
use crate::weights::{decompose, solve_weights, CrossingDistribution};

/// Fitted expansion of `delta^{6/kappa - 1} F` about a collapsing interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrobeniusFit {
    pub a0: f64,
    /// `None` when `8/kappa = 2`, where the `delta^1` term belongs to the second series.
    pub a1: Option<f64>,
    pub b0: f64,
    /// Present only when `8/kappa` is an odd integer.
    pub c0: Option<f64>,
    /// `(1 - 6/kappa, 2/kappa)`.
    pub exponents: (f64, f64),
    pub residual: f64,
    pub stability: f64,
    /// Largest ladder magnitude of `delta^{6/kappa - 1} F`.
    pub scale: f64,
    /// Largest separation of the ladder.
    pub delta0: f64,
    pub class: EightOverKappa,
    pub series: SeriesFit,
}

impl FrobeniusFit {
    fn from_series(series: SeriesFit, kappa: f64, delta0: f64) -> Self {
        FrobeniusFit {
            a0: series.a[0],
            a1: series.a.get(1).copied(),
            b0: series.b.first().copied().unwrap_or(0.0),
            c0: series.c.first().copied(),
            exponents: (1.0 - 6.0 / kappa, 2.0 / kappa),
            residual: series.residual,
            stability: series.stability,
            scale: series.scale,
            delta0,
            class: EightOverKappa::of(kappa),
            series,
        }
    }

    /// Magnitudes on the ladder scale: `|A0|`, `|A1| delta0`, `max_m |B_m| delta0^{p+m}`,
    /// `|C0| delta0^p`, each divided by [`FrobeniusFit::scale`].
    pub fn normalized(&self) -> NormalizedCoefficients {
        let s = self.scale.max(f64::MIN_POSITIVE);
        let p = self.series.model.p;
        let b = self.series.b.iter().enumerate().map(|(m, b)| (b * self.delta0.powf(p + m as f64)).abs()).fold(0.0, f64::max);
        NormalizedCoefficients {
            a0: self.a0.abs() / s,
            a1: self.a1.map(|a| (a * self.delta0).abs() / s),
            b: b / s,
            c0: self.c0.map(|c| (c * self.delta0.powf(p)).abs() / s),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizedCoefficients {
    pub a0: f64,
    pub a1: Option<f64>,
    pub b: f64,
    pub c0: Option<f64>,
}

/// Fits the expansion whose shape follows the class of `8/kappa`.
pub fn fit_expansion<E: Evaluator + ?Sized>(f: &E, x: &[f64], i: usize, kappa: f64, cfg: &LadderConfig) -> Result<FrobeniusFit> {
    fit_expansion_with_model(f, x, i, kappa, cfg, &SeriesModel::for_kappa(kappa, cfg))
}

/// Like [`fit_expansion`] with an explicit series model, e.g. one with
/// logarithmic columns at a speed where none are expected.
pub fn fit_expansion_with_model<E: Evaluator + ?Sized>(
    f: &E,
    x: &[f64],
    i: usize,
    kappa: f64,
    cfg: &LadderConfig,
    model: &SeriesModel,
) -> Result<FrobeniusFit> {
    let (deltas, values) = expansion_ladder(f, x, i, kappa, cfg, model.n_params())?;
    fit_ladder(&deltas, &values, kappa, model)
}

/// Ladder of `delta^{6/kappa - 1} F` sized for `n_params` unknowns.
pub fn expansion_ladder<E: Evaluator + ?Sized>(
    f: &E,
    x: &[f64],
    i: usize,
    kappa: f64,
    cfg: &LadderConfig,
    n_params: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    cfg.validate()?;
    check_len(f, x)?;
    if i == 0 || i >= x.len() {
        return invalid(format!("interval {i} outside 1..{}", x.len() - 1));
    }
    let deltas = ladder_deltas(x, i - 1, cfg, cfg.n_points.max(n_params + 3));
    let values = collapse_ladder(f, x, i - 1, kappa, &deltas)?;
    Ok((deltas, values))
}

/// Fits precomputed ladder data, so several linear combinations can share evaluations.
pub fn fit_ladder(deltas: &[f64], values: &[f64], kappa: f64, model: &SeriesModel) -> Result<FrobeniusFit> {
    let series = fit_series(model, deltas, values)?;
    let d0 = deltas.iter().cloned().fold(0.0, f64::max);
    Ok(FrobeniusFit::from_series(series, kappa, d0))
}

/// The `for_kappa` model with logarithmic columns forced on.
pub fn model_with_log(kappa: f64, cfg: &LadderConfig) -> SeriesModel {
    let mut m = SeriesModel::for_kappa(kappa, cfg);
    m.c_terms = cfg.c_terms.max(1);
    m
}

/// Power `s` of a single-series fit `F ~ delta^s (c_0 + c_1 delta + ...)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub exponent: f64,
    /// RMS relative residual at the optimum.
    pub residual: f64,
}

/// Fits the leading power of `F` itself by variable projection: for each
/// trial `s` the coefficients solve a weighted linear least-squares problem
/// and `s` minimizes the residual.
pub fn fit_leading_exponent<E: Evaluator + ?Sized>(
    f: &E,
    x: &[f64],
    i: usize,
    cfg: &LadderConfig,
    terms: usize,
) -> Result<ExponentFit> {
    // kappa = 6 makes the ladder prefactor trivial.
    let (deltas, values) = expansion_ladder(f, x, i, 6.0, cfg, terms + 1)?;
    exponent_from_ladder(&deltas, &values, terms)
}

pub fn exponent_from_ladder(deltas: &[f64], values: &[f64], terms: usize) -> Result<ExponentFit> {
    if values.iter().any(|v| *v == 0.0) {
        return Err(Error::Fit("ladder contains exact zeros".into()));
    }
    let d0 = deltas.iter().cloned().fold(0.0, f64::max);
    let ts: Vec<f64> = deltas.iter().map(|d| d / d0).collect();
    let resid = |s: f64| -> f64 {
        // Relative residual: divide each row by |F_k|.
        let a = DMatrix::from_fn(ts.len(), terms, |r, m| ts[r].powf(s + m as f64) / values[r].abs());
        let b = DMatrix::from_fn(ts.len(), 1, |r, _| values[r].signum());
        let svd = a.clone().svd(true, true);
        match svd.solve(&b, 1e-14) {
            Ok(sol) => ((&a * sol - &b).norm_squared() / ts.len() as f64).sqrt(),
            Err(_) => f64::INFINITY,
        }
    };
    // The power s - 1 with a vanishing first coefficient fits equally well,
    // so search only near the log-slope of the two finest rungs.
    let mut order: Vec<usize> = (0..ts.len()).collect();
    order.sort_by(|&p, &q| ts[p].total_cmp(&ts[q]));
    let (k0, k1) = (order[0], order[1]);
    let slope = (values[k0].abs() / values[k1].abs()).ln() / (ts[k0] / ts[k1]).ln();
    let (lo, hi, step) = (slope - 0.4, slope + 0.4, 0.01);
    let mut best = (lo, f64::INFINITY);
    let mut s = lo;
    while s <= hi {
        let r = resid(s);
        if r < best.1 {
            best = (s, r);
        }
        s += step;
    }
    let (mut a, mut b) = (best.0 - step, best.0 + step);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (resid(c), resid(d));
    while b - a > 1e-10 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = resid(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = resid(d);
        }
    }
    let exponent = 0.5 * (a + b);
    Ok(ExponentFit { exponent, residual: resid(exponent) })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SleType {
    Contractible,
    Propagating,
    Mixed,
    Indeterminate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CftType {
    TwoLeg,
    Identity,
    Neither,
    /// `8/kappa` odd, where the identity type has no definition.
    UndefinedIdentity,
    Indeterminate,
}

/// Relative threshold below which a coefficient counts as zero; values
/// within `band` times the threshold are ambiguous.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ZeroThreshold {
    pub rel: f64,
    pub band: f64,
}

impl Default for ZeroThreshold {
    fn default() -> Self {
        ZeroThreshold { rel: 1e-6, band: 10.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Zeroness {
    Zero,
    NonZero,
    Ambiguous,
}

impl ZeroThreshold {
    fn judge(&self, v: f64) -> Zeroness {
        if v < self.rel {
            Zeroness::Zero
        } else if v > self.band * self.rel {
            Zeroness::NonZero
        } else {
            Zeroness::Ambiguous
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntervalClassification {
    pub interval: usize,
    pub sle_type: SleType,
    pub cft_type: CftType,
    /// `a_s = [L_s] F` in canonical order.
    pub coefficients: Vec<f64>,
    pub fit: FrobeniusFit,
}

/// Multiple-SLE type from weight coefficients: `sigma` runs over canonical
/// diagrams and `on_arc[s]` says whether diagram `s` joins the interval.
pub fn sle_type_from_coefficients(a: &[f64], on_arc: &[bool], thr: &ZeroThreshold) -> SleType {
    let scale = a.iter().map(|v| v.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let judge = |pick: bool| {
        let zs: Vec<Zeroness> = a.iter().zip(on_arc).filter(|(_, o)| **o == pick).map(|(v, _)| thr.judge(v.abs() / scale)).collect();
        if zs.iter().all(|z| *z == Zeroness::Zero) {
            Zeroness::Zero
        } else if zs.iter().any(|z| *z == Zeroness::NonZero) {
            Zeroness::NonZero
        } else {
            Zeroness::Ambiguous
        }
    };
    match (judge(true), judge(false)) {
        (Zeroness::NonZero, Zeroness::Zero) => SleType::Contractible,
        (Zeroness::Zero, Zeroness::NonZero) => SleType::Propagating,
        (Zeroness::NonZero, Zeroness::NonZero) => SleType::Mixed,
        _ => SleType::Indeterminate,
    }
}

/// CFT type from the expansion, with basis coefficients (`basis_coeffs`
/// over `F_t`, canonical order) consulted when `8/kappa` is even.
pub fn cft_type_from_fit(fit: &FrobeniusFit, basis_coeffs: Option<(&[f64], &[bool])>, thr: &ZeroThreshold) -> CftType {
    let nc = fit.normalized();
    let a0 = thr.judge(nc.a0);
    match fit.class {
        EightOverKappa::OddInteger => {
            let c0 = thr.judge(nc.c0.unwrap_or(0.0));
            match (a0, c0) {
                (Zeroness::Zero, Zeroness::Zero) => CftType::TwoLeg,
                (Zeroness::NonZero, _) | (_, Zeroness::NonZero) => CftType::UndefinedIdentity,
                _ => CftType::Indeterminate,
            }
        }
        EightOverKappa::EvenInteger => match a0 {
            Zeroness::Zero => CftType::TwoLeg,
            Zeroness::Ambiguous => CftType::Indeterminate,
            Zeroness::NonZero => match basis_coeffs {
                None => CftType::Indeterminate,
                Some((c, on_arc)) => {
                    let scale = c.iter().map(|v| v.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
                    let off: Vec<Zeroness> = c.iter().zip(on_arc).filter(|(_, o)| !**o).map(|(v, _)| thr.judge(v.abs() / scale)).collect();
                    if off.iter().all(|z| *z == Zeroness::Zero) {
                        CftType::Identity
                    } else if off.iter().any(|z| *z == Zeroness::NonZero) {
                        CftType::Neither
                    } else {
                        CftType::Indeterminate
                    }
                }
            },
        },
        _ => match (a0, thr.judge(nc.b)) {
            (Zeroness::Zero, _) => CftType::TwoLeg,
            (Zeroness::NonZero, Zeroness::Zero) => CftType::Identity,
            (Zeroness::NonZero, Zeroness::NonZero) => CftType::Neither,
            _ => CftType::Indeterminate,
        },
    }
}

/// Classifies `(x_i, x_{i+1})` for `F` (1-based `i`, no wrap).
pub fn classify_interval(
    f: &dyn Evaluator,
    x: &[f64],
    i: usize,
    kappa: f64,
    ladder: &LadderConfig,
    thr: &ZeroThreshold,
) -> Result<IntervalClassification> {
    let fit = fit_expansion(f, x, i, kappa, ladder)?;
    let a = decompose(f, x, kappa, ladder)?;
    let conn = Connectivities::new(f.n_arcs(), None)?;
    let on_arc: Vec<bool> = conn.diagrams().iter().map(|d| d.contains_arc(i - 1, i)).collect();
    let sle_type = sle_type_from_coefficients(&a, &on_arc, thr);
    let basis_coeffs = match fit.class {
        EightOverKappa::EvenInteger => {
            // F = sum_s a_s Pi_s = sum_t c_t F_t with M c = a.
            let m = build_meander_matrix(f.n_arcs(), fugacity(kappa)?, None)?;
            m.entries.clone().lu().solve(&nalgebra::DVector::from_column_slice(&a)).map(|v| v.iter().cloned().collect::<Vec<f64>>())
        }
        _ => None,
    };
    let cft_type = cft_type_from_fit(&fit, basis_coeffs.as_deref().map(|c| (c, on_arc.as_slice())), thr);
    Ok(IntervalClassification { interval: i, sle_type, cft_type, coefficients: a, fit })
}

/// Limits of crossing probabilities as `(x_i, x_{i+1})` collapses.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionedLimits {
    /// `lim P_s` for the anchored order; entries past `C_{N-1}` should vanish.
    pub limits: Vec<f64>,
    /// `Q_s` of the reduced system for `s <= C_{N-1}`.
    pub reduced: Vec<f64>,
    /// `Lambda_s / Lambda_1`-type ratios: `lim delta^{-2/kappa} P_s` for `s > C_{N-1}`
    /// normalised by their sum (empty when all vanish identically).
    pub propagating_ratios: Vec<f64>,
}

/// Limits of `P_s` for `F` as `x_{i+1} -> x_i`, and the reduced-system
/// distribution `Q_s = a_s Xi_s / sum a Xi` built from `a_s = [L_s] F`.
pub fn conditioned_probability_limits(
    f: &dyn Evaluator,
    x: &[f64],
    i: usize,
    kappa: f64,
    quad: &QuadConfig,
    ladder: &LadderConfig,
) -> Result<ConditionedLimits> {
    check_len(f, x)?;
    let n = f.n_arcs();
    if n < 2 {
        return invalid("conditioning needs at least two arcs");
    }
    if i == 0 || i >= x.len() {
        return invalid(format!("interval {i} outside 1..{}", x.len() - 1));
    }
    let canon = Connectivities::new(n, None)?;
    let anchored = Connectivities::new(n, Some(i))?;
    let k = anchored.n_contracted();
    let a_canon = decompose(f, x, kappa, ladder)?;
    // Reorder to the anchored order.
    let a: Vec<f64> = anchored.diagrams().iter().map(|d| a_canon[canon.index_of(d).expect("same diagrams") - 1]).collect();
    let deltas = ladder_deltas(x, i - 1, ladder, ladder.n_points);
    let mut ladders: Vec<Vec<f64>> = vec![Vec::new(); canon.len()];
    for &d in &deltas {
        let mut y = x.to_vec();
        y[i] = y[i - 1] + d;
        let w = solve_weights(&PointConfig::with_min_gap(y, 0.0)?, kappa, quad)?;
        let w: Vec<f64> = anchored.diagrams().iter().map(|dg| w.values[canon.index_of(dg).expect("same diagrams") - 1]).collect();
        let dist = CrossingDistribution::from_parts(a.clone(), w)?;
        for (s, p) in dist.probs.iter().enumerate() {
            ladders[s].push(*p);
        }
    }
    // P_s -> Q_s + O(delta^{8/kappa - 1}) or -> 0 like delta^{8/kappa - 1}.
    let model = SeriesModel { p: 8.0 / kappa - 1.0, a_terms: 2, b_terms: 2, c_terms: 0 };
    let model = if EightOverKappa::integer(kappa).is_some() { SeriesModel::for_kappa(kappa, ladder) } else { model };
    let limits: Vec<f64> = ladders.iter().map(|v| Ok(fit_series(&model, &deltas, v)?.a[0])).collect::<Result<_>>()?;
    // Reduced system at the surviving points.
    let mut y = x.to_vec();
    y.drain(i - 1..i + 1);
    let reduced = if n - 1 >= 1 {
        let xi = solve_weights(&PointConfig::with_min_gap(y, 0.0)?, kappa, quad)?;
        let terms: Vec<f64> = (0..k).map(|s| a[s] * xi.values[s]).collect();
        let total: f64 = terms.iter().sum();
        if total == 0.0 {
            return Err(Error::Domain("reduced partition function vanishes".into()));
        }
        terms.iter().map(|t| t / total).collect()
    } else {
        vec![1.0]
    };
    let powers: Vec<f64> = ladders[k..]
        .iter()
        .map(|v| {
            let scaled: Vec<f64> = v.iter().zip(&deltas).map(|(p, d)| p * d.powf(1.0 - 8.0 / kappa)).collect();
            Ok(fit_series(&SeriesModel::analytic(3), &deltas, &scaled)?.a[0])
        })
        .collect::<Result<_>>()?;
    let tot: f64 = powers.iter().sum();
    let propagating_ratios = if tot != 0.0 { powers.iter().map(|p| p / tot).collect() } else { Vec::new() };
    Ok(ConditionedLimits { limits, reduced, propagating_ratios })
}

/// `A0` at `x` and with `x_i` moved by `shift`, as a relative change.
pub fn a0_shift_invariance<E: Evaluator + ?Sized>(f: &E, x: &[f64], i: usize, kappa: f64, shift: f64, cfg: &LadderConfig) -> Result<f64> {
    let a = collapse_limit(f, x, i, kappa, cfg)?.value;
    let mut y = x.to_vec();
    y[i - 1] += shift;
    y[i] += shift;
    let b = collapse_limit(f, &y, i, kappa, cfg)?.value;
    Ok((a - b).abs() / a.abs().max(f64::MIN_POSITIVE))
}
