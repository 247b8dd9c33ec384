//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Every perfect matching of `2n` points, filtered for planarity.
pub fn brute_noncrossing(n: usize) -> Vec<Vec<usize>> {
    fn rec(free: &mut Vec<usize>, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if free.is_empty() {
            out.push(cur.clone());
            return;
        }
        let a = free.remove(0);
        for k in 0..free.len() {
            let b = free.remove(k);
            cur[a] = b;
            cur[b] = a;
            rec(free, cur, out);
            free.insert(k, b);
        }
        free.insert(0, a);
    }
    let mut out = Vec::new();
    let mut free: Vec<usize> = (0..2 * n).collect();
    rec(&mut free, &mut vec![0; 2 * n], &mut out);
    out.retain(|m| {
        (0..2 * n).all(|a| {
            let b = m[a];
            (0..2 * n).all(|c| {
                let d = m[c];
                // chords (a,b), (c,d) with a<b, c<d cross iff a<c<b<d
                !(a < b && c < d && a < c && c < b && b < d)
            })
        })
    });
    out
}

fn find(p: &mut [usize], i: usize) -> usize {
    let mut r = i;
    while p[r] != r {
        r = p[r];
    }
    let mut i = i;
    while p[i] != r {
        let next = p[i];
        p[i] = r;
        i = next;
    }
    r
}

/// Loops of two glued matchings: connected components of the union graph.
pub fn loops(top: &[usize], bottom: &[usize]) -> usize {
    let m = top.len();
    let mut parent: Vec<usize> = (0..m).collect();
    for (a, &b) in top.iter().enumerate().chain(bottom.iter().enumerate()) {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        parent[ra] = rb;
    }
    (0..m).filter(|&i| find(&mut parent, i) == i).count()
}

/// `n(kappa)` written as `2 cos(pi - 4 pi / kappa)`.
pub fn loop_weight(kappa: f64) -> f64 {
    2.0 * (PI - 4.0 * PI / kappa).cos()
}

/// `d_N(q)` summed directly.
pub fn rank_formula(n: usize, q: usize) -> f64 {
    let qf = q as f64;
    (1..q)
        .map(|p| {
            let t = PI * p as f64 / qf;
            (2.0 * t.sin()).powi(2) * (2.0 * t.cos()).powi(2 * n as i32)
        })
        .sum::<f64>()
        / (2.0 * qf)
}

/// Increasing points with gaps in `[0.5, 1.5)`.
pub fn random_points(rng: &mut ChaCha8Rng, count: usize) -> Vec<f64> {
    let mut x = vec![rng.random_range(-1.0..1.0)];
    for _ in 1..count {
        let last = *x.last().unwrap();
        x.push(last + rng.random_range(0.5..1.5));
    }
    x
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// Kac weight from the central charge alone,
/// `((1-c)/96) [ (r + s + (r - s) sqrt((25-c)/(1-c)))^2 - 4 ]`.
pub fn kac_from_c(r: f64, s: f64, kappa: f64) -> f64 {
    let c = (6.0 - kappa) * (3.0 * kappa - 8.0) / (2.0 * kappa);
    let root = ((25.0 - c) / (1.0 - c)).sqrt();
    (1.0 - c) / 96.0 * ((r + s + (r - s) * root).powi(2) - 4.0)
}
