use cgw::cft::{central_charge_exact, minimal_model_central_charge, rational_speed};
use cgw::combinatorics::{catalan_usize, enumerate_connectivities, loop_count};
use cgw::coulomb_gas::{build_spec, evaluate_basis, evaluate_dotsenko_fateev_kernel, kappa6_kernel_closed_form, PointConfig};
use cgw::meander::{build_meander_matrix, meander_zero, numeric_rank, rank_at_zero, sign_relation_check, zero_labels};
use cgw::weights::{decompose, Weight};
use clap::ValueEnum;
use num_integer::Integer;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::RunConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    All,
    Kappa6,
    Combinatorics,
    Meander,
    Duality,
    Cft,
}

pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Check {
    Check { name: name.into(), passed, detail: detail.into() }
}

fn failed(name: impl Into<String>, e: impl std::fmt::Display) -> Check {
    check(name, false, format!("error: {e}"))
}

pub fn run(suite: Suite, cfg: &RunConfig) -> Vec<Check> {
    let mut out = Vec::new();
    if matches!(suite, Suite::All | Suite::Combinatorics) {
        out.extend(combinatorics());
    }
    if matches!(suite, Suite::All | Suite::Meander) {
        out.extend(meander());
    }
    if matches!(suite, Suite::All | Suite::Cft) {
        out.extend(cft());
    }
    if matches!(suite, Suite::All | Suite::Kappa6) {
        out.extend(kappa6(cfg));
    }
    if matches!(suite, Suite::All | Suite::Duality) {
        out.extend(duality(cfg));
    }
    out
}

fn random_points(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut x = vec![0.0];
    for _ in 1..n {
        let last = *x.last().expect("nonempty");
        x.push(last + rng.random_range(0.5..1.5));
    }
    x
}

fn kappa6(cfg: &RunConfig) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::new();
    for (n, pairs) in [(2usize, vec![(1, 1), (1, 2), (1, 3), (1, 4), (2, 1), (2, 2), (2, 3), (2, 4)]), (3, vec![(1, 1), (3, 4), (5, 6)])] {
        for x in [(0..2 * n).map(|k| k as f64).collect::<Vec<_>>(), random_points(&mut rng, 2 * n)] {
            let mut worst = 0.0f64;
            let mut err = None;
            for &(t, c) in &pairs {
                let r = PointConfig::new(x.clone()).and_then(|p| evaluate_basis(&build_spec(n, t, c, 6.0)?, &p, &cfg.quad));
                match r {
                    Ok(r) => worst = worst.max((r.value - 1.0).abs()),
                    Err(e) => err = Some(e),
                }
            }
            let name = format!("F = 1 at kappa 6, N = {n}");
            out.push(match err {
                Some(e) => failed(name, e),
                None => check(name, worst < 1e-6, format!("max |F - 1| = {worst:.2e}")),
            });
        }
    }
    let kernels: [(Vec<f64>, usize, Vec<(usize, usize)>); 2] =
        [(vec![0.0, 1.0, 2.0, 3.0], 3, vec![(1, 2)]), (vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0], 3, vec![(1, 2), (4, 5)])];
    for (x, c, contours) in kernels {
        let name = format!("kernel identity, {} points", x.len());
        let p = PointConfig::new(x).expect("increasing");
        match evaluate_dotsenko_fateev_kernel(&p, c, &contours, 6.0, &cfg.quad) {
            Ok(r) => {
                let rhs = kappa6_kernel_closed_form(&p, c);
                let rel = (r.value - rhs).abs() / rhs.abs();
                out.push(check(name, rel < 1e-6, format!("relative difference {rel:.2e}")));
            }
            Err(e) => out.push(failed(name, e)),
        }
    }
    out
}

fn combinatorics() -> Vec<Check> {
    let mut out = Vec::new();
    for n in 1..=6 {
        let ds = match enumerate_connectivities(n, None) {
            Ok(d) => d,
            Err(e) => {
                out.push(failed(format!("enumerate N = {n}"), e));
                continue;
            }
        };
        let mut ok = ds.len() == catalan_usize(n);
        for a in &ds {
            ok &= loop_count(a, a).map(|l| l == n).unwrap_or(false);
        }
        out.push(check(format!("enumerate N = {n}"), ok, format!("{} diagrams, diagonal loop count {n}", ds.len())));
    }
    out
}

fn meander() -> Vec<Check> {
    let mut out = Vec::new();
    for n in 1..=5 {
        let mut ok = true;
        let mut detail = Vec::new();
        for (q, q2) in zero_labels(n) {
            let r = meander_zero(q, q2)
                .and_then(|z| build_meander_matrix(n, z, None))
                .and_then(|m| numeric_rank(&m, 1e-9))
                .and_then(|r| Ok((r, rank_at_zero(n, q, q2)?)));
            match r {
                Ok((num, formula)) => {
                    ok &= num == formula;
                    detail.push(format!("({q},{q2}):{num}/{formula}"));
                }
                Err(e) => {
                    ok = false;
                    detail.push(format!("({q},{q2}): {e}"));
                }
            }
        }
        out.push(check(format!("rank at determinant zeros, N = {n}"), ok, detail.join(" ")));
    }
    for n in 1..=4 {
        let r = sign_relation_check(n, None);
        out.push(check(format!("sign relation at n = -1, N = {n}"), r == Ok(true), format!("{r:?}")));
    }
    out
}

fn cft() -> Vec<Check> {
    let mut ok = true;
    let mut count = 0;
    for q in 2..=8i64 {
        for qp in 2..=8i64 {
            if q.gcd(&qp) != 1 || 4 * q >= 8 * qp {
                continue;
            }
            count += 1;
            let c = central_charge_exact(rational_speed(q, qp)).expect("positive speed");
            ok &= c == minimal_model_central_charge(q.max(qp), q.min(qp));
            ok &= c == central_charge_exact(rational_speed(qp, q)).expect("positive speed");
        }
    }
    vec![check("central charge of rational speeds", ok, format!("{count} coprime pairs"))]
}

fn duality(cfg: &RunConfig) -> Vec<Check> {
    let x = [0.0, 1.0, 2.0, 3.0];
    let mut out = Vec::new();
    for kappa in [5.0, 16.0 / 3.0] {
        let name = format!("[L_s] Pi_t = delta, N = 2, kappa = {kappa:.4}");
        let mut worst = 0.0f64;
        let mut err = None;
        for t in 1..=2 {
            match Weight::new(2, t, kappa, cfg.quad.clone()).and_then(|w| decompose(&w, &x, kappa, &cfg.ladder)) {
                Ok(a) => {
                    for (s, v) in a.iter().enumerate() {
                        let target = if s + 1 == t { 1.0 } else { 0.0 };
                        worst = worst.max((v - target).abs());
                    }
                }
                Err(e) => err = Some(e),
            }
        }
        out.push(match err {
            Some(e) => failed(name, e),
            None => check(name, worst < 1e-3, format!("max deviation {worst:.2e}")),
        });
    }
    out
}
