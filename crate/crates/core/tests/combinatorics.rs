mod common;

use cgw::combinatorics::{
    adjacent_arcs, catalan, catalan_usize, cut_diagram, enumerate_connectivities, loop_count, ArcDiagram, Connectivities,
};
use common::{brute_noncrossing, loops};
use proptest::prelude::*;

fn catalan_by_recurrence(n: usize) -> Vec<u128> {
    let mut c = vec![1u128];
    for k in 1..=n {
        c.push((0..k).map(|i| c[i] * c[k - 1 - i]).sum());
    }
    c
}

#[test]
fn catalan_numbers() {
    let rec = catalan_by_recurrence(60);
    for (n, c) in rec.iter().enumerate().skip(1) {
        assert_eq!(catalan(n).unwrap().to_string(), c.to_string(), "C_{n}");
    }
    for n in 0..=8 {
        assert_eq!(catalan_usize(n), brute_noncrossing(n).len());
    }
}

#[test]
fn enumeration_matches_brute_force() {
    for n in 1..=6 {
        let mut ours: Vec<Vec<usize>> = enumerate_connectivities(n, None).unwrap().iter().map(|d| d.pairing().to_vec()).collect();
        let mut brute = brute_noncrossing(n);
        ours.sort();
        brute.sort();
        assert_eq!(ours, brute, "N = {n}");
    }
}

#[test]
fn parens_round_trip() {
    for n in 1..=6 {
        for d in enumerate_connectivities(n, None).unwrap() {
            assert_eq!(ArcDiagram::from_parens(&d.to_parens()).unwrap(), d);
        }
    }
    assert_eq!(ArcDiagram::from_parens("(())()").unwrap().pairing(), &[3, 2, 1, 0, 5, 4]);
    assert!(ArcDiagram::from_parens("(()").is_err());
    assert!(ArcDiagram::from_pairing(vec![2, 3, 0, 1]).is_err());
}

#[test]
fn loop_counts_match_union_find() {
    for n in 1..=5 {
        let ds = enumerate_connectivities(n, None).unwrap();
        for a in &ds {
            assert_eq!(loop_count(a, a).unwrap(), n);
            for b in &ds {
                assert_eq!(loop_count(a, b).unwrap(), loops(a.pairing(), b.pairing()));
            }
        }
    }
}

#[test]
fn anchored_order_puts_contracted_diagrams_first() {
    for n in 2..=5 {
        for anchor in 1..2 * n {
            let conn = Connectivities::new(n, Some(anchor)).unwrap();
            let k = conn.n_contracted();
            assert_eq!(k, catalan_usize(n - 1));
            for (s, d) in conn.diagrams().iter().enumerate() {
                assert_eq!(d.contains_arc(anchor - 1, anchor), s < k);
                assert_eq!(conn.index_of(d), Some(s + 1));
            }
        }
    }
}

#[test]
fn adjacent_arc_removal_inverts_insertion() {
    for d in enumerate_connectivities(4, None).unwrap() {
        for j in adjacent_arcs(&d) {
            let r = d.remove_adjacent_arc(j).unwrap();
            assert_eq!(r.n_arcs(), 3);
            assert_eq!(r.insert_adjacent_arc(j).unwrap(), d);
        }
    }
}

#[test]
fn cut_lands_on_the_anchor_arc() {
    for d in enumerate_connectivities(4, None).unwrap() {
        for anchor in 1..8 {
            if d.contains_arc(anchor - 1, anchor) {
                assert!(cut_diagram(&d, anchor).is_err());
                continue;
            }
            let c = cut_diagram(&d, anchor).unwrap();
            assert!(c.contains_arc(anchor - 1, anchor));
            // Two arcs become one loop with their replacements.
            assert_eq!(loops(d.pairing(), c.pairing()), 3);
        }
    }
}

proptest! {
    #[test]
    fn rotation_preserves_loops(n in 1usize..6, a in 0usize..1000, b in 0usize..1000, turns in 0usize..12) {
        let ds = enumerate_connectivities(n, None).unwrap();
        let (mut x, mut y) = (ds[a % ds.len()].clone(), ds[b % ds.len()].clone());
        let before = loop_count(&x, &y).unwrap();
        for _ in 0..turns {
            x = x.rotate();
            y = y.rotate();
        }
        prop_assert_eq!(loop_count(&x, &y).unwrap(), before);
        let mut z = x.clone();
        for _ in 0..2 * n {
            z = z.rotate();
        }
        prop_assert_eq!(z, x);
    }
}
