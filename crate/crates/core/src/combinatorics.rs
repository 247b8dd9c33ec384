//! Arc connectivities of `2N` boundary points.
//!
//! Points are 0-based inside the library. Connectivity indices handed to or
//! returned from public functions are 1-based, so `1..=C_N`.

use std::fmt;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// A noncrossing perfect pairing of `2N` points on the real line.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "RawDiagram", into = "RawDiagram")]
pub struct ArcDiagram {
    n_arcs: usize,
    pairing: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct RawDiagram {
    n_arcs: usize,
    pairing: Vec<usize>,
}

impl TryFrom<RawDiagram> for ArcDiagram {
    type Error = Error;
    fn try_from(raw: RawDiagram) -> Result<Self> {
        let d = ArcDiagram::from_pairing(raw.pairing)?;
        if d.n_arcs != raw.n_arcs {
            return Err(Error::SizeMismatch { expected: raw.n_arcs, got: d.n_arcs });
        }
        Ok(d)
    }
}

impl From<ArcDiagram> for RawDiagram {
    fn from(d: ArcDiagram) -> Self {
        RawDiagram { n_arcs: d.n_arcs, pairing: d.pairing }
    }
}

impl ArcDiagram {
    /// Validates an involution without fixed points and without crossings.
    pub fn from_pairing(pairing: Vec<usize>) -> Result<Self> {
        let m = pairing.len();
        if m == 0 || m % 2 == 1 {
            return invalid(format!("pairing length {m} is not a positive even number"));
        }
        for (j, &p) in pairing.iter().enumerate() {
            if p >= m || p == j || pairing[p] != j {
                return invalid(format!("pairing is not a fixed-point-free involution at {j}"));
            }
        }
        // Noncrossing iff the parenthesis word is balanced with matching partners.
        let mut stack = Vec::with_capacity(m / 2);
        for (j, &p) in pairing.iter().enumerate() {
            if p > j {
                stack.push(j);
            } else if stack.pop() != Some(p) {
                return invalid("pairing has crossing arcs");
            }
        }
        Ok(ArcDiagram { n_arcs: m / 2, pairing })
    }

    /// Builds a diagram from arcs given as 0-based point pairs.
    pub fn from_arcs(n_arcs: usize, arcs: &[(usize, usize)]) -> Result<Self> {
        let mut pairing = vec![usize::MAX; 2 * n_arcs];
        for &(a, b) in arcs {
            if a >= 2 * n_arcs || b >= 2 * n_arcs {
                return invalid(format!("arc ({a},{b}) out of range"));
            }
            pairing[a] = b;
            pairing[b] = a;
        }
        Self::from_pairing(pairing)
    }

    /// Parses the balanced-parenthesis form, e.g. `"(())()"`.
    pub fn from_parens(s: &str) -> Result<Self> {
        let mut pairing = vec![0; s.len()];
        let mut stack = Vec::new();
        for (j, ch) in s.chars().enumerate() {
            match ch {
                '(' => stack.push(j),
                ')' => {
                    let Some(o) = stack.pop() else {
                        return invalid(format!("unbalanced parenthesis string {s:?}"));
                    };
                    pairing[o] = j;
                    pairing[j] = o;
                }
                _ => return invalid(format!("unexpected character {ch:?} in {s:?}")),
            }
        }
        if !stack.is_empty() {
            return invalid(format!("unbalanced parenthesis string {s:?}"));
        }
        Self::from_pairing(pairing)
    }

    pub fn to_parens(&self) -> String {
        self.pairing
            .iter()
            .enumerate()
            .map(|(j, &p)| if p > j { '(' } else { ')' })
            .collect()
    }

    pub fn n_arcs(&self) -> usize {
        self.n_arcs
    }

    pub fn n_points(&self) -> usize {
        2 * self.n_arcs
    }

    pub fn pairing(&self) -> &[usize] {
        &self.pairing
    }

    pub fn partner(&self, j: usize) -> usize {
        self.pairing[j]
    }

    /// Arcs as `(a, b)` with `a < b`, sorted by left endpoint.
    pub fn arcs(&self) -> Vec<(usize, usize)> {
        self.pairing
            .iter()
            .enumerate()
            .filter(|(j, &p)| p > *j)
            .map(|(j, &p)| (j, p))
            .collect()
    }

    pub fn contains_arc(&self, a: usize, b: usize) -> bool {
        a < self.pairing.len() && self.pairing[a] == b
    }

    /// Whether the arc ending at `inner` lies strictly inside the arc ending at `outer`.
    pub fn nested_inside(&self, inner: (usize, usize), outer: (usize, usize)) -> bool {
        outer.0 < inner.0 && inner.1 < outer.1
    }

    /// Removes the arc `{j, j+1}` (0-based, no wrap) and relabels the rest.
    pub fn remove_adjacent_arc(&self, j: usize) -> Result<ArcDiagram> {
        if self.n_arcs < 2 || j + 1 >= self.n_points() || !self.contains_arc(j, j + 1) {
            return invalid(format!("diagram {} has no removable arc at ({j},{})", self, j + 1));
        }
        let relabel = |p: usize| if p < j { p } else { p - 2 };
        let pairing = self
            .pairing
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != j && *k != j + 1)
            .map(|(_, &p)| relabel(p))
            .collect();
        ArcDiagram::from_pairing(pairing)
    }

    /// Inserts the arc `{j, j+1}` into the point sequence at position `j`.
    pub fn insert_adjacent_arc(&self, j: usize) -> Result<ArcDiagram> {
        if j > self.n_points() {
            return invalid(format!("insertion position {j} out of range"));
        }
        let relabel = |p: usize| if p < j { p } else { p + 2 };
        let mut pairing = Vec::with_capacity(self.n_points() + 2);
        for &p in &self.pairing[..j] {
            pairing.push(relabel(p));
        }
        pairing.push(j + 1);
        pairing.push(j);
        for &p in &self.pairing[j..] {
            pairing.push(relabel(p));
        }
        ArcDiagram::from_pairing(pairing)
    }

    /// Removes the points `j` and `j+1` where they sit on *different* arcs,
    /// joining their partners into a single arc.
    pub fn join_through(&self, j: usize) -> Result<ArcDiagram> {
        if j + 1 >= self.n_points() || self.contains_arc(j, j + 1) {
            return invalid(format!("points ({j},{}) are not on distinct arcs", j + 1));
        }
        let (a, b) = (self.pairing[j], self.pairing[j + 1]);
        let relabel = |p: usize| if p < j { p } else { p - 2 };
        let mut pairing = Vec::with_capacity(self.n_points() - 2);
        for (k, &p) in self.pairing.iter().enumerate() {
            if k == j || k == j + 1 {
                continue;
            }
            let q = if k == a { b } else if k == b { a } else { p };
            pairing.push(relabel(q));
        }
        ArcDiagram::from_pairing(pairing)
    }

    /// Rotates every point label by `+1` modulo `2N` (the diagram read on a circle).
    pub fn rotate(&self) -> ArcDiagram {
        let m = self.n_points();
        let mut pairing = vec![0; m];
        for (j, &p) in self.pairing.iter().enumerate() {
            pairing[(j + 1) % m] = (p + 1) % m;
        }
        ArcDiagram { n_arcs: self.n_arcs, pairing }
    }

    /// The connectivity whose `j`th arc joins points `j` and `2N-1-j`.
    pub fn rainbow(n_arcs: usize) -> ArcDiagram {
        let m = 2 * n_arcs;
        ArcDiagram { n_arcs, pairing: (0..m).map(|j| m - 1 - j).collect() }
    }
}

impl fmt::Display for ArcDiagram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_parens())
    }
}

impl fmt::Debug for ArcDiagram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ArcDiagram({})", self.to_parens())
    }
}

/// `C_N = (2N)! / (N! (N+1)!)`, exactly.
pub fn catalan(n: usize) -> Result<BigUint> {
    if n == 0 {
        return invalid("catalan: N must be at least 1");
    }
    // C_{k+1} = C_k * 2(2k+1) / (k+2); every intermediate quotient is exact.
    let mut c = BigUint::from(1u32);
    for k in 0..n as u64 {
        c = c * BigUint::from(2 * (2 * k + 1)) / BigUint::from(k + 2);
    }
    Ok(c)
}

/// `C_N` as a machine integer for the sizes handled by the enumerators.
pub fn catalan_usize(n: usize) -> usize {
    if n == 0 {
        return 1;
    }
    let mut c: u128 = 1;
    for k in 0..n as u128 {
        c = c * 2 * (2 * k + 1) / (k + 2);
    }
    usize::try_from(c).expect("Catalan number exceeds usize")
}

/// Largest `N` accepted by the enumerators (`C_12 = 208012`).
pub const MAX_ENUMERATION_ARCS: usize = 12;

fn all_noncrossing(n: usize) -> Vec<Vec<usize>> {
    // Dyck words of length 2N, converted to pairings.
    fn rec(word: &mut Vec<bool>, open: usize, close: usize, n: usize, out: &mut Vec<Vec<usize>>) {
        if close == n {
            let mut pairing = vec![0; 2 * n];
            let mut stack = Vec::with_capacity(n);
            for (j, &is_open) in word.iter().enumerate() {
                if is_open {
                    stack.push(j);
                } else {
                    let o = stack.pop().expect("balanced word");
                    pairing[o] = j;
                    pairing[j] = o;
                }
            }
            out.push(pairing);
            return;
        }
        if open < n {
            word.push(true);
            rec(word, open + 1, close, n, out);
            word.pop();
        }
        if close < open {
            word.push(false);
            rec(word, open, close + 1, n, out);
            word.pop();
        }
    }
    let mut out = Vec::with_capacity(catalan_usize(n));
    rec(&mut Vec::with_capacity(2 * n), 0, 0, n, &mut out);
    out.sort();
    out
}

/// The `C_N` diagrams in canonical order (lexicographic on pairing arrays).
pub fn canonical_order(n: usize) -> Result<Vec<ArcDiagram>> {
    if n == 0 {
        return invalid("N must be at least 1");
    }
    if n > MAX_ENUMERATION_ARCS {
        return Err(Error::SizeLimit { n, max: MAX_ENUMERATION_ARCS });
    }
    Ok(all_noncrossing(n).into_iter().map(|pairing| ArcDiagram { n_arcs: n, pairing }).collect())
}

/// The anchor interval `(x_i, x_{i+1})`, 1-based; `i = 2N` is the wrap-around
/// interval `(x_{2N}, x_1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Anchor(pub usize);

impl Anchor {
    /// The two 0-based endpoints of the interval for `2N` points.
    pub fn endpoints(self, n_arcs: usize) -> (usize, usize) {
        let m = 2 * n_arcs;
        (self.0 - 1, self.0 % m)
    }

    fn check(self, n_arcs: usize) -> Result<()> {
        if self.0 == 0 || self.0 > 2 * n_arcs {
            return invalid(format!("anchor {} outside 1..={}", self.0, 2 * n_arcs));
        }
        Ok(())
    }
}

/// Ordered list of the `C_N` connectivities.
///
/// With an anchor `i`, the first `C_{N-1}` entries are the diagrams of the
/// `(N-1)`-point system in canonical order with the arc `{i, i+1}` inserted;
/// the rest follow in canonical order. So index `k <= C_{N-1}` here matches
/// index `k` of the reduced system.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Connectivities {
    n_arcs: usize,
    anchor: Option<Anchor>,
    diagrams: Vec<ArcDiagram>,
}

impl Connectivities {
    pub fn new(n: usize, anchor: Option<usize>) -> Result<Self> {
        let canon = canonical_order(n)?;
        let Some(i) = anchor else {
            return Ok(Connectivities { n_arcs: n, anchor: None, diagrams: canon });
        };
        let anchor = Anchor(i);
        anchor.check(n)?;
        let (a, b) = anchor.endpoints(n);
        let mut diagrams = Vec::with_capacity(canon.len());
        if n == 1 {
            diagrams = canon;
        } else {
            for reduced in canonical_order(n - 1)? {
                let d = if b == 0 {
                    // wrap interval: the new arc encloses everything else
                    let mut pairing = vec![0; 2 * n];
                    pairing[0] = 2 * n - 1;
                    pairing[2 * n - 1] = 0;
                    for (k, &p) in reduced.pairing.iter().enumerate() {
                        pairing[k + 1] = p + 1;
                    }
                    ArcDiagram::from_pairing(pairing)?
                } else {
                    reduced.insert_adjacent_arc(a)?
                };
                diagrams.push(d);
            }
            diagrams.extend(canon.into_iter().filter(|d| !d.contains_arc(a, b)));
        }
        Ok(Connectivities { n_arcs: n, anchor: Some(anchor), diagrams })
    }

    pub fn n_arcs(&self) -> usize {
        self.n_arcs
    }

    pub fn anchor(&self) -> Option<usize> {
        self.anchor.map(|a| a.0)
    }

    pub fn len(&self) -> usize {
        self.diagrams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diagrams.is_empty()
    }

    /// `C_{N-1}`, the number of diagrams containing the anchor arc.
    pub fn n_contracted(&self) -> usize {
        catalan_usize(self.n_arcs - 1)
    }

    /// The diagram with 1-based index `k`.
    pub fn get(&self, k: usize) -> Result<&ArcDiagram> {
        if k == 0 || k > self.diagrams.len() {
            return invalid(format!("connectivity index {k} outside 1..={}", self.diagrams.len()));
        }
        Ok(&self.diagrams[k - 1])
    }

    pub fn diagrams(&self) -> &[ArcDiagram] {
        &self.diagrams
    }

    /// 1-based index of a diagram.
    pub fn index_of(&self, d: &ArcDiagram) -> Option<usize> {
        self.diagrams.iter().position(|e| e == d).map(|p| p + 1)
    }
}

/// All connectivities of `2N` points, ordered canonically or by anchor.
pub fn enumerate_connectivities(n: usize, anchor: Option<usize>) -> Result<Vec<ArcDiagram>> {
    Ok(Connectivities::new(n, anchor)?.diagrams)
}

/// Number of closed loops formed by gluing `top` above and `bottom` below
/// the boundary.
pub fn loop_count(top: &ArcDiagram, bottom: &ArcDiagram) -> Result<usize> {
    if top.n_arcs != bottom.n_arcs {
        return Err(Error::SizeMismatch { expected: top.n_arcs, got: bottom.n_arcs });
    }
    let m = top.n_points();
    let mut seen = vec![false; m];
    let mut loops = 0;
    for start in 0..m {
        if seen[start] {
            continue;
        }
        loops += 1;
        let mut j = start;
        loop {
            seen[j] = true;
            let k = top.pairing[j];
            seen[k] = true;
            j = bottom.pairing[k];
            if j == start {
                break;
            }
        }
    }
    Ok(loops)
}

/// Pinch the arcs ending at the anchor points and reconnect: the result has
/// the anchor arc plus one arc joining the two former partners.
pub fn cut_diagram(d: &ArcDiagram, anchor: usize) -> Result<ArcDiagram> {
    let anchor = Anchor(anchor);
    anchor.check(d.n_arcs)?;
    let (i, j) = anchor.endpoints(d.n_arcs);
    if d.contains_arc(i, j) {
        return invalid(format!("diagram {d} already contains the arc ({},{})", i + 1, j + 1));
    }
    let (a, b) = (d.pairing[i], d.pairing[j]);
    let mut pairing = d.pairing.clone();
    pairing[i] = j;
    pairing[j] = i;
    pairing[a] = b;
    pairing[b] = a;
    ArcDiagram::from_pairing(pairing)
}

/// The index map `chi` on anchored indices: `sigma > C_{N-1}` maps to an index `<= C_{N-1}`.
pub fn cut_map_chi(sigma: usize, n: usize, anchor: usize) -> Result<usize> {
    let conn = Connectivities::new(n, Some(anchor))?;
    cut_map_chi_in(&conn, sigma)
}

/// [`cut_map_chi`] against a prebuilt anchored ordering.
pub fn cut_map_chi_in(conn: &Connectivities, sigma: usize) -> Result<usize> {
    let Some(anchor) = conn.anchor() else {
        return invalid("cut map needs an anchored ordering");
    };
    let d = conn.get(sigma)?;
    let cut = cut_diagram(d, anchor)?;
    let k = conn.index_of(&cut).expect("cut diagram is a valid connectivity");
    debug_assert!(k <= conn.n_contracted());
    Ok(k)
}

/// Innermost arcs `{j, j+1}` of a diagram (0-based left endpoints, no wrap).
pub fn adjacent_arcs(d: &ArcDiagram) -> Vec<usize> {
    (0..d.n_points() - 1).filter(|&j| d.contains_arc(j, j + 1)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalan_small_values() {
        let vals: Vec<u64> = (1..=8).map(|n| catalan(n).unwrap().try_into().unwrap()).collect();
        assert_eq!(vals, vec![1, 2, 5, 14, 42, 132, 429, 1430]);
        assert!(catalan(0).is_err());
        assert_eq!(catalan_usize(7), 429);
    }

    #[test]
    fn parens_round_trip() {
        let d = ArcDiagram::from_parens("(()())").unwrap();
        assert_eq!(d.pairing(), &[5, 2, 1, 4, 3, 0]);
        assert_eq!(d.to_parens(), "(()())");
        assert!(ArcDiagram::from_parens("(()").is_err());
        assert!(ArcDiagram::from_pairing(vec![2, 3, 0, 1]).is_err());
    }

    #[test]
    fn n2_anchor_one() {
        let ds = enumerate_connectivities(2, Some(1)).unwrap();
        assert_eq!(ds[0].to_parens(), "()()");
        assert_eq!(ds[1].to_parens(), "(())");
    }

    #[test]
    fn wrap_anchor_puts_enclosing_arc_first() {
        let conn = Connectivities::new(3, Some(6)).unwrap();
        for d in &conn.diagrams()[..2] {
            assert!(d.contains_arc(0, 5));
        }
        for d in &conn.diagrams()[2..] {
            assert!(!d.contains_arc(0, 5));
        }
    }

    #[test]
    fn loops_of_identical_diagrams() {
        for d in canonical_order(4).unwrap() {
            assert_eq!(loop_count(&d, &d).unwrap(), 4);
        }
        let a = ArcDiagram::from_parens("()()").unwrap();
        let b = ArcDiagram::from_parens("(())").unwrap();
        assert_eq!(loop_count(&a, &b).unwrap(), 1);
    }

    #[test]
    fn chi_n2() {
        assert_eq!(cut_map_chi(2, 2, 1).unwrap(), 1);
        assert!(cut_map_chi(1, 2, 1).is_err());
    }

    #[test]
    fn join_and_remove() {
        let d = ArcDiagram::from_parens("(())()").unwrap();
        assert_eq!(d.remove_adjacent_arc(1).unwrap().to_parens(), "()()");
        assert_eq!(d.join_through(2).unwrap().to_parens(), "()()");
        assert_eq!(d.join_through(3).unwrap().to_parens(), "(())");
    }
}
