//! Central charge, Kac weights, boundary leg weights and the correspondence
//! between exceptional speeds and minimal models.

use num_integer::Integer;
use num_rational::Rational64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, invalid, Result};
use crate::meander::{recognize_rational, RATIONAL_MAX_DEN, RATIONAL_TOL};

pub use crate::meander::central_charge;

/// `c(kappa)` for rational `kappa`, exactly.
pub fn central_charge_exact(kappa: Rational64) -> Result<Rational64> {
    if kappa <= Rational64::from(0) {
        return domain(format!("kappa = {kappa} must be positive"));
    }
    let six = Rational64::from(6);
    let three = Rational64::from(3);
    let eight = Rational64::from(8);
    Ok((six - kappa) * (three * kappa - eight) / (Rational64::from(2) * kappa))
}

/// `c_{p,p'} = 1 - 6 (p - p')^2 / (p p')`.
pub fn minimal_model_central_charge(p: i64, p_prime: i64) -> Rational64 {
    let d = p - p_prime;
    Rational64::from(1) - Rational64::new(6 * d * d, p * p_prime)
}

/// `kappa_{q,q'} = 4 q / q'`.
pub fn rational_speed(q: i64, q_prime: i64) -> Rational64 {
    Rational64::new(4 * q, q_prime)
}

/// `kappa / 4 = q / q'` in lowest terms.
pub fn speed_indices(kappa: Rational64) -> (i64, i64) {
    let r = kappa / Rational64::from(4);
    (*r.numer(), *r.denom())
}

/// Continued-fraction recognition of a float speed.
pub fn rational_kappa(kappa: f64) -> Option<Rational64> {
    let (a, b) = recognize_rational(kappa, RATIONAL_MAX_DEN, RATIONAL_TOL)?;
    Some(Rational64::new(a, b))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    /// `kappa > 4`
    Dense,
    /// `kappa <= 4`
    Dilute,
}

impl Phase {
    pub fn of(kappa: f64) -> Self {
        if kappa > 4.0 {
            Phase::Dense
        } else {
            Phase::Dilute
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KacWeight {
    pub r: u32,
    pub s: u32,
    pub value: f64,
    pub phase: Phase,
}

fn kac_branch<T>(r: T, s: T, kappa: T, four: T, sixteen: T, dense: bool) -> T
where
    T: Copy + std::ops::Mul<Output = T> + std::ops::Sub<Output = T> + std::ops::Div<Output = T>,
{
    let a = if dense { kappa * r - four * s } else { kappa * s - four * r };
    let b = kappa - four;
    (a * a - b * b) / (sixteen * kappa)
}

/// `h_{r,s}(kappa)` on the branch of the phase `kappa` lies in. The two
/// branches do not join continuously at `kappa = 4` as labelled functions.
pub fn kac_weight(r: u32, s: u32, kappa: f64) -> Result<KacWeight> {
    if r == 0 || s == 0 {
        return invalid("Kac labels start at 1");
    }
    if !(kappa > 0.0) {
        return domain(format!("kappa = {kappa} must be positive"));
    }
    let phase = Phase::of(kappa);
    let value = kac_branch(r as f64, s as f64, kappa, 4.0, 16.0, phase == Phase::Dense);
    Ok(KacWeight { r, s, value, phase })
}

pub fn kac_weight_exact(r: u32, s: u32, kappa: Rational64) -> Result<Rational64> {
    if r == 0 || s == 0 {
        return invalid("Kac labels start at 1");
    }
    if kappa <= Rational64::from(0) {
        return domain(format!("kappa = {kappa} must be positive"));
    }
    let dense = kappa > Rational64::from(4);
    Ok(kac_branch(
        Rational64::from(r as i64),
        Rational64::from(s as i64),
        kappa,
        Rational64::from(4),
        Rational64::from(16),
        dense,
    ))
}

/// Weight of the `s`-leg boundary operator, `s (2s + 4 - kappa) / (2 kappa)`.
/// Equals `h_{1,s+1}` in the dense phase and `h_{s+1,1}` in the dilute one.
pub fn s_leg_weight(s: u32, kappa: f64) -> Result<f64> {
    if !(kappa > 0.0) {
        return domain(format!("kappa = {kappa} must be positive"));
    }
    let s = s as f64;
    Ok(s * (2.0 * s + 4.0 - kappa) / (2.0 * kappa))
}

/// Kac label of the one-leg boundary operator.
pub fn one_leg_operator_label(kappa: f64) -> (u32, u32) {
    match Phase::of(kappa) {
        Phase::Dense => (1, 2),
        Phase::Dilute => (2, 1),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Correspondence {
    /// `kappa in (2, 8)`: two speeds per model, `p = max`, `p' = min`.
    TwoToOne,
    /// `kappa in (0, 2]`: one speed per model, `p = q'`, `p' = q`.
    OneToOne,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinimalModelLabel {
    pub p: i64,
    pub p_prime: i64,
    pub central_charge: f64,
    /// `(numerator, denominator)` of the central charge.
    pub central_charge_exact: (i64, i64),
}

impl MinimalModelLabel {
    pub fn new(p: i64, p_prime: i64) -> Result<Self> {
        if !(1 < p_prime && p_prime < p) || p.gcd(&p_prime) != 1 {
            return invalid(format!("M({p}, {p_prime}) needs coprime 1 < p' < p"));
        }
        let c = minimal_model_central_charge(p, p_prime);
        Ok(MinimalModelLabel {
            p,
            p_prime,
            central_charge: *c.numer() as f64 / *c.denom() as f64,
            central_charge_exact: (*c.numer(), *c.denom()),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelMatch {
    pub q: i64,
    pub q_prime: i64,
    pub model: MinimalModelLabel,
    pub correspondence: Correspondence,
}

/// Minimal model attached to an exceptional speed `kappa = 4q/q'` in `(0, 8)`.
pub fn minimal_model_map(kappa: Rational64) -> Result<ModelMatch> {
    if !(kappa > Rational64::from(0) && kappa < Rational64::from(8)) {
        return domain(format!("kappa = {kappa} is outside (0, 8)"));
    }
    let (q, qp) = speed_indices(kappa);
    if q < 2 || qp < 2 {
        return domain(format!("kappa = {kappa} is not an exceptional speed"));
    }
    let (p, p_prime, correspondence) = if kappa <= Rational64::from(2) {
        (qp, q, Correspondence::OneToOne)
    } else {
        (q.max(qp), q.min(qp), Correspondence::TwoToOne)
    };
    Ok(ModelMatch { q, q_prime: qp, model: MinimalModelLabel::new(p, p_prime)?, correspondence })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NullLevel {
    pub level: i64,
    /// Generated by the periodic continuation rather than the four head terms.
    pub extrapolated: bool,
}

/// First `count` null-vector levels of `V_{r,s}` in `M(p, p')`.
///
/// Four head terms `rs, (p'-r)(p-s), rs + (p'-r)(p+s), rs + (p'+r)(p-s)`,
/// then the first two shifted by `k p p'` for `k = 1, 2, ...`, flagged as
/// extrapolated.
pub fn null_vector_levels(r: i64, s: i64, p: i64, p_prime: i64, count: usize) -> Result<Vec<NullLevel>> {
    if !(1 <= r && r < p_prime && 1 <= s && s < p) {
        return invalid(format!("(r, s) = ({r}, {s}) is outside the Kac table of M({p}, {p_prime})"));
    }
    let head = [
        r * s,
        (p_prime - r) * (p - s),
        r * s + (p_prime - r) * (p + s),
        r * s + (p_prime + r) * (p - s),
    ];
    let period = p * p_prime;
    Ok((0..count)
        .map(|k| {
            if k < 4 {
                NullLevel { level: head[k], extrapolated: false }
            } else {
                let shift = ((k - 4) / 2 + 1) as i64;
                NullLevel { level: head[(k - 4) % 2] + shift * period, extrapolated: true }
            }
        })
        .collect())
}

/// Summary for one speed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CftSummary {
    pub kappa: f64,
    pub central_charge: f64,
    pub phase: Phase,
    pub one_leg_label: (u32, u32),
    /// `theta_0, theta_1, theta_2`.
    pub leg_weights: [f64; 3],
    pub minimal_model: Option<ModelMatch>,
}

pub fn summary(kappa: f64) -> Result<CftSummary> {
    let minimal_model = rational_kappa(kappa).and_then(|k| minimal_model_map(k).ok());
    Ok(CftSummary {
        kappa,
        central_charge: central_charge(kappa)?,
        phase: Phase::of(kappa),
        one_leg_label: one_leg_operator_label(kappa),
        leg_weights: [s_leg_weight(0, kappa)?, s_leg_weight(1, kappa)?, s_leg_weight(2, kappa)?],
        minimal_model,
    })
}
