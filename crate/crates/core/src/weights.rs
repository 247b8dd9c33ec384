//! Connectivity weights `Pi_s`, decompositions, crossing probabilities and
//! the functions `Theta_s`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::combinatorics::{cut_map_chi_in, loop_count, Connectivities};
use crate::coulomb_gas::{conjugate_for_interval, BasisFunction, PointConfig, QuadConfig};
use crate::error::{invalid, Error, Result};
use crate::evaluator::{check_len, Combination, Evaluator};
use crate::limits::{apply_l, LadderConfig};
use crate::meander::{build_meander_matrix, fugacity, is_exceptional, MeanderMatrix};

/// `|det M| / prod_k |M e_k|` below this refuses the direct solve.
pub const DET_REL_THRESHOLD: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightProvenance {
    SolvedFromMeander,
    LimitRegularized,
}

/// Values of `Pi_1, ..., Pi_{C_N}` at one configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    pub values: Vec<f64>,
    pub provenance: WeightProvenance,
    /// Basis values `F_1, ..., F_{C_N}` used in the solve (at the central
    /// speed for the regularized path, where they are only extrapolated).
    pub basis_values: Vec<f64>,
    /// Ratio of the smallest to the largest singular value of `M_N`.
    pub rcond: f64,
}

/// The canonical basis `F_1, ..., F_{C_N}` (or `F / n` with `reduced`).
pub fn basis_functions(n_arcs: usize, kappa: f64, quad: &QuadConfig, reduced: bool) -> Result<Vec<BasisFunction>> {
    let conn = Connectivities::new(n_arcs, None)?;
    (1..=conn.len())
        .map(|t| {
            let f = BasisFunction::canonical(n_arcs, t, kappa, quad.clone())?;
            Ok(if reduced { f.reduced() } else { f })
        })
        .collect()
}

/// Relative determinant and reciprocal condition number of the meander matrix.
pub fn meander_conditioning(m: &MeanderMatrix) -> (f64, f64) {
    let scale: f64 = m.entries.column_iter().map(|c| c.norm()).product();
    let det = m.determinant();
    let sv = m.singular_values();
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    let rcond = if smax > 0.0 { smin / smax } else { 0.0 };
    (if scale > 0.0 { det.abs() / scale } else { 0.0 }, rcond)
}

/// Refuses exceptional speeds by recognition as well as by conditioning:
/// where `n` rounds to a tiny nonzero value the scaled determinant looks healthy.
fn refuse_singular(m: &MeanderMatrix, kappa: f64, n_arcs: usize) -> Result<()> {
    let (rel_det, rcond) = meander_conditioning(m);
    if rel_det < DET_REL_THRESHOLD || is_exceptional(kappa, n_arcs).is_some() {
        return Err(Error::Singular { det: m.determinant(), rcond });
    }
    Ok(())
}

fn solve_checked(m: &MeanderMatrix, rhs: &[f64]) -> Result<(Vec<f64>, f64)> {
    let (rel_det, rcond) = meander_conditioning(m);
    if rel_det < DET_REL_THRESHOLD {
        return Err(Error::Singular { det: m.determinant(), rcond });
    }
    let lu = m.entries.clone().lu();
    let sol = lu.solve(&DVector::from_column_slice(rhs)).ok_or(Error::Singular { det: 0.0, rcond })?;
    Ok((sol.iter().cloned().collect(), rcond))
}

/// Solves `M_N(n) Pi = F` at `x`.
pub fn solve_weights(x: &PointConfig, kappa: f64, quad: &QuadConfig) -> Result<WeightVector> {
    let n_arcs = x.n_arcs();
    let nval = fugacity(kappa)?;
    let m = build_meander_matrix(n_arcs, nval, None)?;
    // Refuse before spending time on the integrals.
    refuse_singular(&m, kappa, n_arcs)?;
    let basis = basis_functions(n_arcs, kappa, quad, false)?;
    let f: Vec<f64> = basis.iter().map(|b| b.eval(x.coords())).collect::<Result<_>>()?;
    let (values, rcond) = solve_checked(&m, &f)?;
    Ok(WeightVector { values, provenance: WeightProvenance::SolvedFromMeander, basis_values: f, rcond })
}

/// Weights at an exceptional speed as the limit of solved weights at
/// `kappa +- dk` and `kappa +- 2 dk` (symmetric Richardson).
pub fn regularized_weights(x: &PointConfig, kappa: f64, dk: f64, quad: &QuadConfig) -> Result<WeightVector> {
    if !(dk > 0.0) {
        return invalid("dk must be positive");
    }
    let sym = |h: f64| -> Result<(Vec<f64>, Vec<f64>, f64)> {
        let a = solve_weights(x, kappa + h, quad)?;
        let b = solve_weights(x, kappa - h, quad)?;
        let v = a.values.iter().zip(&b.values).map(|(p, q)| 0.5 * (p + q)).collect();
        let f = a.basis_values.iter().zip(&b.basis_values).map(|(p, q)| 0.5 * (p + q)).collect();
        Ok((v, f, a.rcond.min(b.rcond)))
    };
    let (v1, f1, r1) = sym(dk)?;
    let (v2, f2, r2) = sym(2.0 * dk)?;
    let rich = |fine: &[f64], coarse: &[f64]| -> Vec<f64> { fine.iter().zip(coarse).map(|(a, b)| (4.0 * a - b) / 3.0).collect() };
    let values = rich(&v1, &v2);
    // A pole shows up as a large spread between the two step sizes.
    let scale = values.iter().map(|v| v.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let spread = v1.iter().zip(&v2).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    if spread > 1e-2 * scale {
        return Err(Error::Fit(format!("weights do not settle near kappa = {kappa}: spread {spread:.2e} against {scale:.2e}")));
    }
    Ok(WeightVector {
        values,
        provenance: WeightProvenance::LimitRegularized,
        basis_values: rich(&f1, &f2),
        rcond: r1.min(r2),
    })
}

/// `Pi_s` as an evaluator (each evaluation re-solves at the given points).
#[derive(Clone, Debug)]
pub struct Weight {
    pub index: usize,
    n_arcs: usize,
    kappa: f64,
    quad: QuadConfig,
    basis: Vec<BasisFunction>,
    m: MeanderMatrix,
}

impl Weight {
    /// `Pi_s` with `s` 1-based in canonical order.
    pub fn new(n_arcs: usize, index: usize, kappa: f64, quad: QuadConfig) -> Result<Self> {
        let c = Connectivities::new(n_arcs, None)?;
        c.get(index)?;
        let m = build_meander_matrix(n_arcs, fugacity(kappa)?, None)?;
        refuse_singular(&m, kappa, n_arcs)?;
        let basis = basis_functions(n_arcs, kappa, &quad, false)?;
        Ok(Weight { index, n_arcs, kappa, quad, basis, m })
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn quad(&self) -> &QuadConfig {
        &self.quad
    }
}

impl Evaluator for Weight {
    fn n_points(&self) -> usize {
        2 * self.n_arcs
    }

    fn eval(&self, x: &[f64]) -> Result<f64> {
        check_len(self, x)?;
        let f: Vec<f64> = self.basis.iter().map(|b| b.eval(x)).collect::<Result<_>>()?;
        Ok(solve_checked(&self.m, &f)?.0[self.index - 1])
    }
}

/// `a_s = [L_s] F` for every connectivity in canonical order.
pub fn decompose(f: &dyn Evaluator, x: &[f64], kappa: f64, ladder: &LadderConfig) -> Result<Vec<f64>> {
    check_len(f, x)?;
    let conn = Connectivities::new(f.n_arcs(), None)?;
    conn.diagrams().iter().map(|d| apply_l(d, f, x, kappa, ladder)).collect()
}

/// Crossing probabilities `P_s = a_s Pi_s(x) / sum_r a_r Pi_r(x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossingDistribution {
    pub probs: Vec<f64>,
    /// `sum_s a_s Pi_s(x)`, the denominator.
    pub partition_value: f64,
    pub coefficients: Vec<f64>,
    pub weights: Vec<f64>,
    /// Indices (1-based) with negative probability; reported, never clamped.
    pub negative: Vec<usize>,
}

impl CrossingDistribution {
    pub fn from_parts(coefficients: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if coefficients.len() != weights.len() {
            return Err(Error::SizeMismatch { expected: weights.len(), got: coefficients.len() });
        }
        let terms: Vec<f64> = coefficients.iter().zip(&weights).map(|(a, p)| a * p).collect();
        let total: f64 = terms.iter().sum();
        let scale = terms.iter().map(|t| t.abs()).sum::<f64>();
        if total == 0.0 || total.abs() < 1e-14 * scale {
            return Err(Error::Domain("partition function vanishes at these points".into()));
        }
        let probs: Vec<f64> = terms.iter().map(|t| t / total).collect();
        let negative = probs.iter().enumerate().filter(|(_, p)| **p < 0.0).map(|(k, _)| k + 1).collect();
        Ok(CrossingDistribution { probs, partition_value: total, coefficients, weights, negative })
    }
}

pub fn crossing_probabilities(
    f: &dyn Evaluator,
    x: &PointConfig,
    kappa: f64,
    quad: &QuadConfig,
    ladder: &LadderConfig,
) -> Result<CrossingDistribution> {
    let a = decompose(f, x.coords(), kappa, ladder)?;
    let w = solve_weights(x, kappa, quad)?;
    CrossingDistribution::from_parts(a, w.values)
}

/// Crossing probabilities of `F_t` using the exact coefficients `n^{l_{s,t}}`.
pub fn crossing_for_basis(theta: usize, x: &PointConfig, kappa: f64, quad: &QuadConfig) -> Result<CrossingDistribution> {
    let conn = Connectivities::new(x.n_arcs(), None)?;
    let t = conn.get(theta)?;
    let nval = fugacity(kappa)?;
    let a: Vec<f64> = conn.diagrams().iter().map(|s| Ok(nval.powi(loop_count(s, t)? as i32))).collect::<Result<_>>()?;
    let w = solve_weights(x, kappa, quad)?;
    CrossingDistribution::from_parts(a, w.values)
}

/// `Theta_s` for an inserted interval, with the coefficient pattern expected
/// from `[L_r] Theta_s` over the anchored order.
pub struct Theta {
    pub sigma: usize,
    pub interval: usize,
    pub conn: Connectivities,
    pub evaluator: Combination,
    /// Coefficients of `F_t / n` for `t <= C_{N-1}` (anchored order).
    pub coefficients: Vec<f64>,
    /// `n` at `sigma`, `1` where `chi(r) = sigma`, `0` elsewhere.
    pub expected: Vec<f64>,
}

/// Builds `Theta_s = sum_t b_{s,t} F_t` with `b = M_{N-1}^{-1}`, written as
/// `(M_{N-1}/n)^{-1}` against `F_t / n` so it stays finite where `n = 0`.
pub fn build_theta(n_arcs: usize, sigma: usize, interval: usize, kappa: f64, quad: &QuadConfig) -> Result<Theta> {
    if n_arcs < 2 {
        return invalid("Theta needs at least two arcs");
    }
    if interval == 0 || interval >= 2 * n_arcs {
        return invalid(format!("interval {interval} outside 1..{}", 2 * n_arcs - 1));
    }
    let conn = Connectivities::new(n_arcs, Some(interval))?;
    let k = conn.n_contracted();
    if sigma == 0 || sigma > k {
        return invalid(format!("sigma {sigma} outside 1..={k}"));
    }
    let reduced = Connectivities::new(n_arcs - 1, None)?;
    let nval = fugacity(kappa)?;
    let mut m = DMatrix::zeros(k, k);
    for a in 0..k {
        for b in 0..k {
            let l = loop_count(reduced.get(a + 1)?, reduced.get(b + 1)?)?;
            m[(a, b)] = nval.powi(l as i32 - 1);
        }
    }
    let inv = m.clone().try_inverse().ok_or(Error::Singular { det: m.determinant(), rcond: 0.0 })?;
    let coefficients: Vec<f64> = (0..k).map(|t| inv[(sigma - 1, t)]).collect();
    let mut evaluator = Combination::new(2 * n_arcs);
    for (t, &b) in coefficients.iter().enumerate() {
        let d = conn.get(t + 1)?;
        let f = BasisFunction::for_diagram(d, conjugate_for_interval(d, interval), kappa, quad.clone())?.reduced();
        evaluator = evaluator.with(b, Arc::new(f))?;
    }
    let mut expected = vec![0.0; conn.len()];
    expected[sigma - 1] = nval;
    for r in k + 1..=conn.len() {
        if cut_map_chi_in(&conn, r)? == sigma {
            expected[r - 1] = 1.0;
        }
    }
    Ok(Theta { sigma, interval, conn, evaluator, coefficients, expected })
}

impl Theta {
    /// `[L_r] Theta_s` for every `r` in the anchored order.
    pub fn limits(&self, x: &[f64], kappa: f64, ladder: &LadderConfig) -> Result<Vec<f64>> {
        self.conn.diagrams().iter().map(|d| apply_l(d, &self.evaluator, x, kappa, ladder)).collect()
    }
}

/// `F_t / n` at an exceptional speed where `n = 0`, both from the direct
/// formula and from a `kappa` ladder of `F_t(k) / n(k)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularizedValue {
    pub direct: f64,
    pub ladder: f64,
}

pub fn regularized_basis_element(theta: usize, x: &PointConfig, kappa: f64, dk: f64, quad: &QuadConfig) -> Result<RegularizedValue> {
    let n_arcs = x.n_arcs();
    let direct = BasisFunction::canonical(n_arcs, theta, kappa, quad.clone())?.reduced().eval(x.coords())?;
    let at = |k: f64| -> Result<f64> { Ok(BasisFunction::canonical(n_arcs, theta, k, quad.clone())?.eval(x.coords())? / fugacity(k)?) };
    let s1 = 0.5 * (at(kappa + dk)? + at(kappa - dk)?);
    let s2 = 0.5 * (at(kappa + 2.0 * dk)? + at(kappa - 2.0 * dk)?);
    Ok(RegularizedValue { direct, ladder: (4.0 * s1 - s2) / 3.0 })
}

/// Numerical rank of sampled function vectors, `tol` relative to the
/// largest singular value.
pub fn sample_rank(columns: &[Vec<f64>], tol: f64) -> usize {
    if columns.is_empty() {
        return 0;
    }
    let rows = columns[0].len();
    let mut m = DMatrix::from_fn(rows, columns.len(), |i, j| columns[j][i]);
    for mut c in m.column_iter_mut() {
        let s = c.norm();
        if s > 0.0 {
            c /= s;
        }
    }
    let sv = m.singular_values();
    let smax = sv.max();
    sv.iter().filter(|s| **s > tol * smax).count()
}

/// Rank report for the rainbow-extended basis at `kappa_{N+1, q'}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RainbowReport {
    pub n_arcs: usize,
    pub kappa: f64,
    /// Rank of `{v(F_1), ..., v(F_{C_N - 1})}`.
    pub rank_basis: usize,
    /// Rank after appending `v(Pi_{C_N})`.
    pub rank_extended: usize,
    pub expected: usize,
    /// `Delta^+(theta_s) = 2 s / kappa`, `s = 1..N`.
    pub collapse_powers: Vec<f64>,
}

/// Samples the first `C_N - 1` basis functions and the regularized rainbow
/// weight on `configs` and reports ranks.
pub fn rainbow_extended_basis_check(
    n_arcs: usize,
    kappa: f64,
    configs: &[PointConfig],
    dk: f64,
    quad: &QuadConfig,
) -> Result<RainbowReport> {
    let c_n = Connectivities::new(n_arcs, None)?.len();
    if configs.len() < c_n {
        return invalid(format!("need at least {c_n} sample configurations"));
    }
    let basis = basis_functions(n_arcs, kappa, quad, false)?;
    let mut cols: Vec<Vec<f64>> = basis[..c_n - 1]
        .iter()
        .map(|f| configs.iter().map(|x| f.eval(x.coords())).collect::<Result<Vec<f64>>>())
        .collect::<Result<_>>()?;
    let rank_basis = sample_rank(&cols, 1e-7);
    let rainbow: Vec<f64> = configs
        .iter()
        .map(|x| Ok(regularized_weights(x, kappa, dk, quad)?.values[c_n - 1]))
        .collect::<Result<_>>()?;
    cols.push(rainbow);
    let rank_extended = sample_rank(&cols, 1e-7);
    Ok(RainbowReport {
        n_arcs,
        kappa,
        rank_basis,
        rank_extended,
        expected: c_n,
        collapse_powers: (1..=n_arcs).map(|s| 2.0 * s as f64 / kappa).collect(),
    })
}
