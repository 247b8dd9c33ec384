mod common;

use cgw::combinatorics::Connectivities;
use cgw::coulomb_gas::{PointConfig, QuadConfig};
use cgw::evaluator::Evaluator;
use cgw::limits::LadderConfig;
use cgw::weights::{build_theta, crossing_for_basis, regularized_weights, solve_weights, Weight, WeightProvenance};
use cgw::Error;
use common::{loop_weight, loops, random_points, rng};
use statrs::function::gamma::gamma;

fn q() -> QuadConfig {
    QuadConfig::default()
}

#[test]
fn basis_is_recovered_from_weights() {
    let mut r = rng(21);
    for kappa in [4.5, 5.0, 7.0] {
        let n = loop_weight(kappa);
        for na in [2usize, 3] {
            let x = PointConfig::new(random_points(&mut r, 2 * na)).unwrap();
            let w = solve_weights(&x, kappa, &q()).unwrap();
            let ds = Connectivities::new(na, None).unwrap();
            for (t, dt) in ds.diagrams().iter().enumerate() {
                let f: f64 = ds.diagrams().iter().zip(&w.values).map(|(s, p)| n.powi(loops(s.pairing(), dt.pairing()) as i32) * p).sum();
                assert!((f - w.basis_values[t]).abs() < 1e-10 * f.abs());
            }
            // Pure partition functions are positive.
            assert!(w.values.iter().all(|p| *p > 0.0), "{:?}", w.values);
        }
    }
}

#[test]
fn exceptional_speed_is_refused() {
    let x = PointConfig::integers(2);
    assert!(matches!(solve_weights(&x, 6.0, &q()), Err(Error::Singular { .. })));
    let r = solve_weights(&x, 8.0 / 3.0, &q());
    assert!(matches!(r, Err(Error::Singular { .. })), "{r:?}");
}

/// `2F1(1/3, 2/3; 4/3; z)` by its power series.
fn hyp(z: f64) -> f64 {
    let (mut term, mut sum, mut k) = (1.0f64, 1.0, 0.0);
    while term.abs() > 1e-17 {
        term *= (1.0 / 3.0 + k) * (2.0 / 3.0 + k) / ((4.0 / 3.0 + k) * (1.0 + k)) * z;
        sum += term;
        k += 1.0;
    }
    sum
}

/// Cardy's crossing formula for percolation.
fn cardy(eta: f64) -> f64 {
    3.0 * gamma(2.0 / 3.0) / gamma(1.0 / 3.0).powi(2) * eta.powf(1.0 / 3.0) * hyp(eta)
}

#[test]
fn percolation_matches_cardy() {
    let conn = Connectivities::new(2, None).unwrap();
    let nested = conn.diagrams().iter().position(|d| d.contains_arc(0, 3)).unwrap();
    for x in [vec![0.0, 1.0, 2.0, 3.0], vec![0.0, 0.3, 1.9, 2.4], vec![-1.0, 0.5, 0.9, 4.0]] {
        let eta = (x[1] - x[0]) * (x[3] - x[2]) / ((x[2] - x[0]) * (x[3] - x[1]));
        let w = regularized_weights(&PointConfig::new(x.clone()).unwrap(), 6.0, 0.02, &q()).unwrap();
        assert_eq!(w.provenance, WeightProvenance::LimitRegularized);
        assert!((w.values.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        // The nested pattern needs a crossing from (x1, x2) to (x3, x4).
        assert!((w.values[nested] - cardy(eta)).abs() < 1e-5, "{x:?}: {:?} vs {}", w.values, cardy(eta));
    }
}

#[test]
fn crossing_probabilities_of_a_basis_function() {
    let kappa = 5.0;
    let n = loop_weight(kappa);
    let x = PointConfig::new(vec![0.0, 0.7, 1.6, 3.1]).unwrap();
    let w = solve_weights(&x, kappa, &q()).unwrap();
    let conn = Connectivities::new(2, None).unwrap();
    for (t, dt) in conn.diagrams().iter().enumerate() {
        let d = crossing_for_basis(t + 1, &x, kappa, &q()).unwrap();
        for (s, ds) in conn.diagrams().iter().enumerate() {
            let p = n.powi(loops(ds.pairing(), dt.pairing()) as i32) * w.values[s] / w.basis_values[t];
            assert!((d.probs[s] - p).abs() < 1e-10);
        }
        assert!(d.negative.is_empty());
    }
}

#[test]
fn weight_evaluator_matches_solve() {
    let x = [0.0, 0.7, 1.6, 3.1];
    let w = solve_weights(&PointConfig::new(x.to_vec()).unwrap(), 5.0, &q()).unwrap();
    for s in 1..=2 {
        let e = Weight::new(2, s, 5.0, q()).unwrap();
        assert_eq!(e.n_points(), 4);
        assert!((e.eval(&x).unwrap() - w.values[s - 1]).abs() < 1e-12);
    }
}

#[test]
fn theta_pattern_for_two_arcs() {
    let kappa = 5.0;
    let x = [0.0, 1.0, 2.0, 3.0];
    for interval in 1..=3 {
        let th = build_theta(2, 1, interval, kappa, &q()).unwrap();
        let lim = th.limits(&x, kappa, &LadderConfig::default()).unwrap();
        for (a, b) in lim.iter().zip(&th.expected) {
            assert!((a - b).abs() < 1e-4, "interval {interval}: {lim:?} vs {:?}", th.expected);
        }
        assert!((th.expected[0] - loop_weight(kappa)).abs() < 1e-14);
    }
}
