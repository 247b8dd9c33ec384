//! Fugacity, meander matrices, their determinant zeros and ranks.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_integer::Integer;
use serde::{Deserialize, Serialize};

use crate::combinatorics::{canonical_order, loop_count, ArcDiagram, Connectivities};
use crate::error::{domain, invalid, Error, Result};

/// Tolerance for recognising a float as a rational number.
pub const RATIONAL_TOL: f64 = 1e-12;
/// Largest denominator considered when recognising a rational number.
pub const RATIONAL_MAX_DEN: i64 = 1000;
/// Default size limit for dense meander matrices (`C_7 = 429`).
pub const DEFAULT_MAX_ARCS: usize = 7;

fn check_kappa(kappa: f64) -> Result<()> {
    if !(kappa > 0.0 && kappa < 8.0) {
        return domain(format!("kappa = {kappa} is outside (0, 8)"));
    }
    Ok(())
}

/// `n(kappa) = -2 cos(4 pi / kappa)`.
pub fn fugacity(kappa: f64) -> Result<f64> {
    check_kappa(kappa)?;
    Ok(-2.0 * (4.0 * PI / kappa).cos())
}

/// `c(kappa) = (6 - kappa)(3 kappa - 8) / (2 kappa)`.
pub fn central_charge(kappa: f64) -> Result<f64> {
    check_kappa(kappa)?;
    Ok((6.0 - kappa) * (3.0 * kappa - 8.0) / (2.0 * kappa))
}

/// Best rational approximation `p/q` with `q <= max_den`, accepted only if
/// it reproduces `x` within `tol` (absolute, scaled by `max(1, |x|)`).
pub fn recognize_rational(x: f64, max_den: i64, tol: f64) -> Option<(i64, i64)> {
    if !x.is_finite() {
        return None;
    }
    let (mut h0, mut h1) = (0i64, 1i64);
    let (mut k0, mut k1) = (1i64, 0i64);
    let mut r = x;
    for _ in 0..64 {
        let a = r.floor();
        if a.abs() > 1e15 {
            break;
        }
        let a = a as i64;
        let h2 = a.checked_mul(h1)?.checked_add(h0)?;
        let k2 = a.checked_mul(k1)?.checked_add(k0)?;
        if k2 > max_den {
            break;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        if (x - h1 as f64 / k1 as f64).abs() <= tol * x.abs().max(1.0) {
            return Some((h1, k1));
        }
        let frac = r - a as f64;
        if frac.abs() < 1e-300 {
            break;
        }
        r = 1.0 / frac;
    }
    None
}

/// Arithmetic class of `8 / kappa`, which selects the Frobenius model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EightOverKappa {
    EvenInteger,
    OddInteger,
    RationalNonInteger,
    Irrational,
}

impl EightOverKappa {
    pub fn of(kappa: f64) -> Self {
        match recognize_rational(8.0 / kappa, RATIONAL_MAX_DEN, RATIONAL_TOL) {
            Some((p, 1)) if p % 2 == 0 => EightOverKappa::EvenInteger,
            Some((_, 1)) => EightOverKappa::OddInteger,
            Some(_) => EightOverKappa::RationalNonInteger,
            None => EightOverKappa::Irrational,
        }
    }

    /// The integer `r = 8 / kappa` when it is one.
    pub fn integer(kappa: f64) -> Option<i64> {
        match recognize_rational(8.0 / kappa, RATIONAL_MAX_DEN, RATIONAL_TOL) {
            Some((p, 1)) => Some(p),
            _ => None,
        }
    }
}

/// `kappa` together with its derived quantities.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpeedContext {
    pub kappa: f64,
    pub n: f64,
    pub central_charge: f64,
    pub eight_over_kappa_class: EightOverKappa,
}

impl SpeedContext {
    pub fn new(kappa: f64) -> Result<Self> {
        Ok(SpeedContext {
            kappa,
            n: fugacity(kappa)?,
            central_charge: central_charge(kappa)?,
            eight_over_kappa_class: EightOverKappa::of(kappa),
        })
    }
}

/// `kappa = 4 q / q'` with coprime `q > 1`, `q' >= 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExceptionalSpeed {
    pub q: i64,
    pub q_prime: i64,
}

impl ExceptionalSpeed {
    pub fn kappa(&self) -> f64 {
        4.0 * self.q as f64 / self.q_prime as f64
    }

    /// The zero `n_{q,q''}` of the meander determinant that `n(kappa)` lands on.
    pub fn zero_label(&self) -> (i64, i64) {
        let two_q = 2 * self.q;
        let r = self.q_prime.rem_euclid(two_q);
        let q2 = if r > self.q { two_q - r } else { r };
        (self.q, q2)
    }
}

/// Decomposes an exact rational `kappa = num/den` when it is exceptional for `N`.
pub fn is_exceptional_rational(num: i64, den: i64, n_arcs: usize) -> Option<ExceptionalSpeed> {
    if num <= 0 || den <= 0 || num >= 8 * den {
        return None;
    }
    // kappa / 4 = num / (4 den) = q / q'
    let g = num.gcd(&(4 * den));
    let (q, qp) = (num / g, 4 * den / g);
    (q > 1 && q <= n_arcs as i64 + 1).then_some(ExceptionalSpeed { q, q_prime: qp })
}

/// Float version of [`is_exceptional_rational`] with continued-fraction recognition.
pub fn is_exceptional(kappa: f64, n_arcs: usize) -> Option<ExceptionalSpeed> {
    if !(kappa > 0.0 && kappa < 8.0) {
        return None;
    }
    let (q, qp) = recognize_rational(kappa / 4.0, RATIONAL_MAX_DEN, RATIONAL_TOL)?;
    (q > 1 && q <= n_arcs as i64 + 1).then_some(ExceptionalSpeed { q, q_prime: qp })
}

/// `n_{q,q''} = -2 cos(pi q'' / q)`.
pub fn meander_zero(q: i64, q2: i64) -> Result<f64> {
    if !(0 < q2 && q2 < q) || q.gcd(&q2) != 1 {
        return invalid(format!("(q, q'') = ({q}, {q2}) must be coprime with 0 < q'' < q"));
    }
    if 2 * q2 == q {
        // cos(pi/2) would leave a 1e-16 residue and a spurious full rank.
        return Ok(0.0);
    }
    Ok(-2.0 * (PI * q2 as f64 / q as f64).cos())
}

/// All admissible zeros `(q, q'')` with `q <= N + 1`.
pub fn zero_labels(n_arcs: usize) -> Vec<(i64, i64)> {
    let mut out = Vec::new();
    for q in 2..=(n_arcs as i64 + 1) {
        for q2 in 1..q {
            if q.gcd(&q2) == 1 {
                out.push((q, q2));
            }
        }
    }
    out
}

/// `C_N x C_N` matrix of `n^{l}` with the exact loop counts kept alongside.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanderMatrix {
    pub size: usize,
    pub exponents: Vec<Vec<u32>>,
    pub fugacity: f64,
    #[serde(with = "dmatrix_rows")]
    pub entries: DMatrix<f64>,
}

mod dmatrix_rows {
    use nalgebra::DMatrix;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let rows: Vec<Vec<f64>> = Vec::deserialize(d)?;
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        Ok(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
    }
}

impl MeanderMatrix {
    /// Builds the matrix over an explicit ordering of diagrams.
    pub fn from_diagrams(diagrams: &[ArcDiagram], n: f64) -> Result<Self> {
        let size = diagrams.len();
        let mut exponents = vec![vec![0u32; size]; size];
        for i in 0..size {
            for j in i..size {
                let l = loop_count(&diagrams[i], &diagrams[j])? as u32;
                exponents[i][j] = l;
                exponents[j][i] = l;
            }
        }
        let entries = DMatrix::from_fn(size, size, |i, j| n.powi(exponents[i][j] as i32));
        Ok(MeanderMatrix { size, exponents, fugacity: n, entries })
    }

    pub fn determinant(&self) -> f64 {
        self.entries.clone().lu().determinant()
    }

    /// Singular values, largest first.
    pub fn singular_values(&self) -> Vec<f64> {
        let mut s: Vec<f64> = self.entries.clone().svd(false, false).singular_values.iter().copied().collect();
        s.sort_by(|a, b| b.total_cmp(a));
        s
    }
}

/// Meander matrix in the canonical order (or an anchored one).
pub fn build_meander_matrix(n_arcs: usize, n: f64, anchor: Option<usize>) -> Result<MeanderMatrix> {
    build_meander_matrix_limited(n_arcs, n, anchor, DEFAULT_MAX_ARCS)
}

pub fn build_meander_matrix_limited(n_arcs: usize, n: f64, anchor: Option<usize>, max_arcs: usize) -> Result<MeanderMatrix> {
    if n_arcs > max_arcs {
        return Err(Error::SizeLimit { n: n_arcs, max: max_arcs });
    }
    let conn = Connectivities::new(n_arcs, anchor)?;
    MeanderMatrix::from_diagrams(conn.diagrams(), n)
}

/// `rank M_N = d_N(q) = (1/2q) sum_p (2 sin(pi p/q))^2 (2 cos(pi p/q))^{2N}` at the zero `n_{q,q''}`.
pub fn rank_at_zero(n_arcs: usize, q: i64, q2: i64) -> Result<usize> {
    meander_zero(q, q2)?;
    if q > n_arcs as i64 + 1 {
        return invalid(format!("n_({q},{q2}) is not a zero of det M_{n_arcs} (needs q <= N + 1)"));
    }
    let qf = q as f64;
    let mut sum = 0.0;
    for p in 1..q {
        let t = PI * p as f64 / qf;
        sum += (2.0 * t.sin()).powi(2) * (2.0 * t.cos()).powi(2 * n_arcs as i32);
    }
    let value = sum / (2.0 * qf);
    let rounded = value.round();
    let residual = (value - rounded).abs();
    if residual > 1e-9 * value.abs().max(1.0) {
        return Err(Error::NonInteger { value, residual });
    }
    Ok(rounded as usize)
}

/// Number of singular values above `tol * sigma_max`.
pub fn numeric_rank(m: &MeanderMatrix, tol: f64) -> Result<usize> {
    if !(tol > 0.0) {
        return invalid("numeric_rank: tol must be positive");
    }
    let s = m.singular_values();
    let smax = s.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return Ok(0);
    }
    Ok(s.iter().filter(|&&v| v > tol * smax).count())
}

/// At `n = -1`, checks that `l_{s,t} - l_{s,r} mod 2` does not depend on `s`.
///
/// The interval only fixes the ordering of the diagrams; the property is
/// checked over all triples.
pub fn sign_relation_check(n_arcs: usize, interval: Option<usize>) -> Result<bool> {
    let conn = Connectivities::new(n_arcs, interval)?;
    let m = MeanderMatrix::from_diagrams(conn.diagrams(), -1.0)?;
    let l = &m.exponents;
    let size = m.size;
    for t in 0..size {
        for r in 0..size {
            let parity = (l[0][t] + l[0][r]) % 2;
            if (1..size).any(|s| (l[s][t] + l[s][r]) % 2 != parity) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Exponent matrix in the canonical order, handy for callers that only need loop counts.
pub fn loop_exponents(n_arcs: usize) -> Result<Vec<Vec<u32>>> {
    let ds = canonical_order(n_arcs)?;
    Ok(MeanderMatrix::from_diagrams(&ds, 1.0)?.exponents)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fugacity_values() {
        assert!((fugacity(6.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(fugacity(8.0 / 3.0).unwrap().abs() < 1e-15);
        assert!((fugacity(4.0).unwrap() - 2.0).abs() < 1e-15);
        assert!(fugacity(8.0).is_err());
    }

    #[test]
    fn n2_matrix() {
        let m = build_meander_matrix(2, 0.5, None).unwrap();
        assert_eq!(m.exponents, vec![vec![2, 1], vec![1, 2]]);
        assert!((m.determinant() + 0.1875).abs() < 1e-15);
        assert_eq!(numeric_rank(&m, 1e-10).unwrap(), 2);
        let ones = build_meander_matrix(2, 1.0, None).unwrap();
        assert_eq!(numeric_rank(&ones, 1e-10).unwrap(), 1);
    }

    #[test]
    fn zeros_and_ranks() {
        assert_eq!(meander_zero(2, 1).unwrap().abs() < 1e-15, true);
        assert!((meander_zero(3, 2).unwrap() - 1.0).abs() < 1e-15);
        assert!((meander_zero(3, 1).unwrap() + 1.0).abs() < 1e-15);
        assert!(meander_zero(4, 2).is_err());
        for n in 1..=6 {
            assert_eq!(rank_at_zero(n, 2, 1).unwrap(), 0);
            if n >= 2 {
                assert_eq!(rank_at_zero(n, 3, 2).unwrap(), 1);
            }
            let cn = crate::combinatorics::catalan_usize(n);
            assert_eq!(rank_at_zero(n, n as i64 + 1, 1).unwrap(), cn - 1);
        }
    }

    #[test]
    fn exceptional_detection() {
        assert_eq!(is_exceptional(6.0, 2), Some(ExceptionalSpeed { q: 3, q_prime: 2 }));
        assert_eq!(is_exceptional(6.0, 1), None);
        assert_eq!(is_exceptional(PI, 5), None);
        assert_eq!(is_exceptional_rational(16, 3, 3), Some(ExceptionalSpeed { q: 4, q_prime: 3 }));
        assert_eq!(ExceptionalSpeed { q: 3, q_prime: 2 }.zero_label(), (3, 2));
        assert_eq!(ExceptionalSpeed { q: 3, q_prime: 4 }.zero_label(), (3, 2));
    }

    #[test]
    fn eight_over_kappa() {
        assert_eq!(EightOverKappa::of(4.0), EightOverKappa::EvenInteger);
        assert_eq!(EightOverKappa::of(8.0 / 3.0), EightOverKappa::OddInteger);
        assert_eq!(EightOverKappa::of(5.0), EightOverKappa::RationalNonInteger);
        assert_eq!(EightOverKappa::of(PI), EightOverKappa::Irrational);
    }

    #[test]
    fn sign_relation_small() {
        for n in 2..=4 {
            assert!(sign_relation_check(n, None).unwrap());
        }
    }
}
