use std::fmt;

use num_bigint::BigUint;
use num_traits::Zero;

use crate::bernoulli::BernoulliSystem;
use crate::dd::{self, Builder, Diagram, Op, Scanner, FALSE, TRUE};
use crate::rational::Rational;
use crate::{Error, Result};

/// Largest number of atoms [`oracle_measure`] will enumerate.
pub const ORACLE_ATOM_GUARD: u64 = 1 << 24;

/// `{x : x[offset .. offset+len] = word}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Cylinder {
    pub offset: i64,
    pub word: Vec<u8>,
}

impl Cylinder {
    pub fn new(offset: i64, word: impl Into<Vec<u8>>) -> Self {
        Cylinder { offset, word: word.into() }
    }

    /// Parse a word written as digits, e.g. `"101"`.
    pub fn parse(offset: i64, digits: &str) -> Self {
        let word = digits.bytes().map(|b| b - b'0').collect::<Vec<_>>();
        Cylinder { offset, word }
    }

    pub fn measure(&self, sys: &BernoulliSystem) -> Rational {
        sys.word_measure(&self.word)
    }
}

/// A finite union of cylinders in canonical form.
///
/// Internally a reduced ordered decision diagram; its support is exactly the
/// set of coordinates membership depends on, so the window is minimal.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct CylinderUnion {
    pub(crate) d: Diagram,
}

impl CylinderUnion {
    pub fn empty(k: u8) -> Self {
        CylinderUnion { d: Diagram::constant(k, false) }
    }

    pub fn full(k: u8) -> Self {
        CylinderUnion { d: Diagram::constant(k, true) }
    }

    pub fn cylinder(k: u8, c: &Cylinder) -> Self {
        let mut b = Builder::new(k);
        let mut r = TRUE;
        let mut kids = vec![FALSE; k as usize];
        for (i, &s) in c.word.iter().enumerate().rev() {
            assert!(s < k, "symbol out of range");
            kids.iter_mut().for_each(|x| *x = FALSE);
            kids[s as usize] = r;
            r = b.mk(c.offset + i as i64, &kids);
        }
        CylinderUnion { d: b.finish(r) }
    }

    /// Shorthand for a single cylinder given as a digit string.
    pub fn word(k: u8, offset: i64, digits: &str) -> Self {
        Self::cylinder(k, &Cylinder::parse(offset, digits))
    }

    /// Union of the words `patterns`, all of length `len`, placed at `offset`.
    pub fn from_patterns(k: u8, offset: i64, len: usize, patterns: &[Vec<u8>]) -> Self {
        let mut pats: Vec<&[u8]> = patterns.iter().map(|p| p.as_slice()).collect();
        for p in &pats {
            assert_eq!(p.len(), len, "pattern length mismatch");
            assert!(p.iter().all(|&s| s < k), "symbol out of range");
        }
        pats.sort_unstable();
        pats.dedup();
        let mut b = Builder::new(k);
        let r = trie(&mut b, k, offset, 0, len, &pats);
        CylinderUnion { d: b.finish(r) }
    }

    /// `{x : lo ≤ x_offset … x_{offset+digits-1} < hi}`, the word read as a
    /// base-`k` number with the most significant digit first.
    pub fn digit_range(k: u8, offset: i64, digits: u32, lo: u64, hi: u64) -> Self {
        let kk = k as u64;
        let top = kk.checked_pow(digits).expect("digit range too wide");
        let hi = hi.min(top);
        let mut parts = Vec::new();
        let mut a = lo;
        while a < hi {
            // largest aligned block starting at `a` that fits below `hi`
            let mut e = 0u32;
            while e < digits && a % kk.pow(e + 1) == 0 && a + kk.pow(e + 1) <= hi {
                e += 1;
            }
            let fixed = digits - e;
            let mut word = vec![0u8; fixed as usize];
            let mut v = a / kk.pow(e);
            for i in (0..fixed as usize).rev() {
                word[i] = (v % kk) as u8;
                v /= kk;
            }
            parts.push(Self::cylinder(k, &Cylinder::new(offset, word)));
            a += kk.pow(e);
        }
        Self::union_all(k, parts)
    }

    /// Set accepted by a scanner reading the coordinates `[lo, hi)`.
    pub fn from_scanner<S: Scanner>(scanner: &S, k: u8, lo: i64, hi: i64) -> Self {
        CylinderUnion { d: dd::compile(scanner, k, lo, hi) }
    }

    pub fn alphabet(&self) -> u8 {
        self.d.k
    }

    /// Minimal window `[l, r)`; `None` for the empty set and the full space.
    pub fn window(&self) -> Option<(i64, i64)> {
        self.d.support().map(|(lo, hi)| (lo, hi + 1))
    }

    pub fn width(&self) -> u64 {
        self.window().map_or(0, |(l, r)| (r - l) as u64)
    }

    pub fn is_empty(&self) -> bool {
        self.d.root == FALSE
    }

    pub fn is_full(&self) -> bool {
        self.d.root == TRUE
    }

    /// Number of inner diagram nodes.
    pub fn size(&self) -> usize {
        self.d.node_count()
    }

    /// Membership of the point whose coordinate `i` is `point(i)`.
    pub fn contains(&self, point: impl FnMut(i64) -> u8) -> bool {
        self.d.contains(point)
    }

    /// All words over the minimal window that lie in the set, in
    /// lexicographic order.
    pub fn patterns(&self) -> Result<Vec<Vec<u8>>> {
        let Some((l, r)) = self.window() else {
            return Ok(if self.is_full() { vec![Vec::new()] } else { Vec::new() });
        };
        let w = (r - l) as usize;
        let k = self.d.k as usize;
        if (k as f64).powi(w as i32) > ORACLE_ATOM_GUARD as f64 {
            return Err(Error::WindowTooLarge(w as u64));
        }
        let mut out = Vec::new();
        let mut word = vec![0u8; w];
        self.expand(self.d.root, l, l, &mut word, &mut out);
        Ok(out)
    }

    fn expand(&self, node: u32, l: i64, pos: i64, word: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
        if node == FALSE {
            return;
        }
        if pos as usize - l as usize == word.len() {
            out.push(word.clone());
            return;
        }
        let var = self.d.var(node);
        for s in 0..self.d.k {
            word[(pos - l) as usize] = s;
            let next = if var == pos { self.d.kid(node, s as usize) } else { node };
            self.expand(next, l, pos + 1, word, out);
        }
    }

    pub fn measure(&self, sys: &BernoulliSystem) -> Result<Rational> {
        self.check(sys)?;
        Ok(dd::intersection_measure(&[(&self.d, 0)], sys))
    }

    fn check(&self, sys: &BernoulliSystem) -> Result<()> {
        if sys.alphabet() != self.d.k as usize {
            return Err(Error::AlphabetMismatch(self.d.k as usize, sys.alphabet()));
        }
        Ok(())
    }

    pub fn intersect(&self, other: &Self) -> Self {
        CylinderUnion { d: dd::apply(Op::And, &self.d, 0, &other.d, 0) }
    }

    pub fn union(&self, other: &Self) -> Self {
        CylinderUnion { d: dd::apply(Op::Or, &self.d, 0, &other.d, 0) }
    }

    pub fn difference(&self, other: &Self) -> Self {
        CylinderUnion { d: dd::apply(Op::Diff, &self.d, 0, &other.d, 0) }
    }

    pub fn symmetric_difference(&self, other: &Self) -> Self {
        CylinderUnion { d: dd::apply(Op::Xor, &self.d, 0, &other.d, 0) }
    }

    pub fn complement(&self) -> Self {
        CylinderUnion { d: self.d.negate() }
    }

    pub fn is_disjoint(&self, other: &Self) -> bool {
        self.intersect(other).is_empty()
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.difference(other).is_empty()
    }

    /// `Tⁿ(self)` for the left shift `(Tx)_i = x_{i+1}`: the window moves by `-n`.
    pub fn shift(&self, n: i64) -> Self {
        CylinderUnion { d: self.d.translate(-n) }
    }

    /// Union of many sets, combined pairwise to keep intermediate sizes balanced.
    pub fn union_all(k: u8, sets: impl IntoIterator<Item = Self>) -> Self {
        let mut layer: Vec<Self> = sets.into_iter().collect();
        if layer.is_empty() {
            return Self::empty(k);
        }
        while layer.len() > 1 {
            let mut next = Vec::with_capacity(layer.len() / 2 + 1);
            let mut it = layer.into_iter();
            while let Some(a) = it.next() {
                match it.next() {
                    Some(b) => next.push(a.union(&b)),
                    None => next.push(a),
                }
            }
            layer = next;
        }
        layer.pop().unwrap()
    }
}

fn trie(b: &mut Builder, k: u8, offset: i64, depth: usize, len: usize, pats: &[&[u8]]) -> u32 {
    if pats.is_empty() {
        return FALSE;
    }
    if depth == len {
        return TRUE;
    }
    let mut kids = vec![FALSE; k as usize];
    let mut start = 0;
    for s in 0..k {
        let end = start + pats[start..].iter().take_while(|p| p[depth] == s).count();
        kids[s as usize] = trie(b, k, offset, depth + 1, len, &pats[start..end]);
        start = end;
    }
    b.mk(offset + depth as i64, &kids)
}

impl fmt::Debug for CylinderUnion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return write!(f, "CylinderUnion(∅)");
        }
        if self.is_full() {
            return write!(f, "CylinderUnion(X)");
        }
        let (l, r) = self.window().unwrap();
        match self.patterns() {
            Ok(p) if p.len() <= 16 => {
                let words: Vec<String> =
                    p.iter().map(|w| w.iter().map(|s| char::from(b'0' + s)).collect()).collect();
                write!(f, "CylinderUnion([{l},{r}) {{{}}})", words.join(","))
            }
            _ => write!(f, "CylinderUnion([{l},{r}) {} nodes)", self.size()),
        }
    }
}

/// Exact `μ(⋂ Tⁿⁱ Uᵢ)` for the pairs `(Uᵢ, nᵢ)`.
///
/// Groups whose windows do not overlap are measured separately and
/// multiplied, which is exact for a product measure.
pub fn intersection_measure(parts: &[(&CylinderUnion, i64)], sys: &BernoulliSystem) -> Result<Rational> {
    for (u, _) in parts {
        u.check(sys)?;
    }
    let mut items: Vec<(Option<(i64, i64)>, &CylinderUnion, i64)> = Vec::new();
    for &(u, n) in parts {
        if u.is_empty() {
            return Ok(Rational::zero());
        }
        if u.is_full() {
            continue;
        }
        if items.iter().any(|(_, v, m)| *m == n && *v == u) {
            continue;
        }
        let (l, r) = u.window().unwrap();
        items.push((Some((l - n, r - n)), u, n));
    }
    items.sort_by_key(|(w, _, _)| w.unwrap());
    let mut total = Rational::one();
    let mut i = 0;
    while i < items.len() {
        let mut end = items[i].0.unwrap().1;
        let mut j = i + 1;
        while j < items.len() && items[j].0.unwrap().0 < end {
            end = end.max(items[j].0.unwrap().1);
            j += 1;
        }
        let group: Vec<(&Diagram, i64)> = items[i..j].iter().map(|(_, u, n)| (&u.d, -*n)).collect();
        total = total * dd::intersection_measure(&group, sys);
        if total.is_zero() {
            break;
        }
        i = j;
    }
    Ok(total)
}

/// `μ(A ∩ ⋂ T^{offsetᵢ} A)`.
pub fn correlation(a: &CylinderUnion, offsets: &[i64], sys: &BernoulliSystem) -> Result<Rational> {
    let mut parts = vec![(a, 0)];
    parts.extend(offsets.iter().map(|&n| (a, n)));
    intersection_measure(&parts, sys)
}

/// Least `n₀ ≥ 0` such that `U` and `TⁿV` have disjoint windows for every `|n| ≥ n₀`.
pub fn independence_threshold(u: &CylinderUnion, v: &CylinderUnion) -> u64 {
    match (u.window(), v.window()) {
        (Some((a, b)), Some((c, d))) => 0.max(d - a).max(b - c) as u64,
        _ => 0,
    }
}

/// Measure by enumerating every word over the window; the independent check
/// on [`CylinderUnion::measure`].
pub fn oracle_measure(u: &CylinderUnion, sys: &BernoulliSystem) -> Result<Rational> {
    u.check(sys)?;
    let Some((l, r)) = u.window() else {
        return Ok(if u.is_full() { Rational::one() } else { Rational::zero() });
    };
    let w = (r - l) as usize;
    let k = sys.alphabet();
    if (k as f64).powi(w as i32) > ORACLE_ATOM_GUARD as f64 {
        return Err(Error::WindowTooLarge(w as u64));
    }
    // tally accepted words by their symbol counts, then weight each class once
    let mut classes: std::collections::BTreeMap<Vec<u32>, BigUint> = Default::default();
    let mut word = vec![0u8; w];
    loop {
        if u.contains(|i| word[(i - l) as usize]) {
            let mut counts = vec![0u32; k];
            for &s in &word {
                counts[s as usize] += 1;
            }
            *classes.entry(counts).or_insert_with(BigUint::zero) += 1u32;
        }
        let mut i = 0;
        while i < w && word[i] as usize == k - 1 {
            word[i] = 0;
            i += 1;
        }
        if i == w {
            break;
        }
        word[i] += 1;
    }
    let mut total = Rational::zero();
    for (counts, n) in classes {
        let mut m = Rational::from_big(n.into(), 1.into());
        for (s, &c) in counts.iter().enumerate() {
            m = m * sys.prob(s as u8).pow(c);
        }
        total += &m;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;

    fn w(off: i64, s: &str) -> CylinderUnion {
        CylinderUnion::word(2, off, s)
    }

    #[test]
    fn measures_of_words() {
        let fair = BernoulliSystem::fair();
        assert_eq!(w(0, "101").measure(&fair).unwrap(), q(1, 8));
        let skew = BernoulliSystem::new(vec![q(1, 3), q(2, 3)]).unwrap();
        assert_eq!(w(0, "01").measure(&skew).unwrap(), q(2, 9));
        let all = CylinderUnion::from_patterns(2, 0, 1, &[vec![0], vec![1]]);
        assert!(all.is_full());
        assert_eq!(all.measure(&fair).unwrap(), q(1, 1));
        let tri = BernoulliSystem::uniform(3);
        assert!(matches!(w(0, "1").measure(&tri), Err(Error::AlphabetMismatch(2, 3))));
    }

    #[test]
    fn boolean_ops() {
        let fair = BernoulliSystem::fair();
        assert_eq!(w(0, "1").intersect(&w(0, "1")), w(0, "1"));
        assert!(w(0, "1").intersect(&w(0, "0")).is_empty());
        assert_eq!(w(0, "1").intersect(&w(2, "1")).measure(&fair).unwrap(), q(1, 4));
        assert!(CylinderUnion::empty(2).complement().is_full());
        assert!(w(0, "0").union(&w(0, "1")).is_full());
        assert!(w(0, "10").is_disjoint(&w(0, "01")));
        let u = w(0, "10").union(&w(3, "1"));
        assert_eq!(u.complement().complement(), u);
    }

    #[test]
    fn window_is_minimal() {
        let u = CylinderUnion::from_patterns(2, 0, 3, &[vec![0, 1, 0], vec![0, 1, 1]]);
        assert_eq!(u.window(), Some((0, 2)));
        assert_eq!(u, w(0, "01"));
    }

    #[test]
    fn shifting() {
        let fair = BernoulliSystem::fair();
        assert!(CylinderUnion::empty(2).shift(7).is_empty());
        assert!(CylinderUnion::full(2).shift(-3).is_full());
        let s = w(0, "1").shift(3);
        assert_eq!(s.window(), Some((-3, -2)));
        assert_eq!(s.measure(&fair).unwrap(), q(1, 2));
        assert_eq!(s.shift(-3), w(0, "1"));
    }

    #[test]
    fn correlations() {
        let fair = BernoulliSystem::fair();
        let a = w(0, "1");
        assert_eq!(correlation(&a, &[5], &fair).unwrap(), q(1, 4));
        assert_eq!(correlation(&a, &[0], &fair).unwrap(), q(1, 2));
        let b = w(0, "11");
        let direct = w(-1, "111").measure(&fair).unwrap();
        assert_eq!(correlation(&b, &[1], &fair).unwrap(), direct);
        assert_eq!(direct, q(1, 8));
        let brute = oracle_measure(&b.intersect(&b.shift(1)), &fair).unwrap();
        assert_eq!(brute, q(1, 8));
    }

    #[test]
    fn thresholds() {
        let fair = BernoulliSystem::fair();
        let u = w(0, "1");
        assert!(independence_threshold(&u, &u) <= 2);
        let x = w(0, "101").union(&w(0, "011"));
        let y = w(0, "11");
        let n0 = independence_threshold(&x, &y) as i64;
        assert!(n0 <= 5);
        let (mx, my) = (x.measure(&fair).unwrap(), y.measure(&fair).unwrap());
        for n in n0..=20 {
            for m in [n, -n] {
                let joint = x.intersect(&y.shift(m)).measure(&fair).unwrap();
                assert_eq!(joint, &mx * &my);
            }
        }
    }

    #[test]
    fn oracle_edge_cases() {
        let fair = BernoulliSystem::fair();
        assert_eq!(oracle_measure(&CylinderUnion::empty(2), &fair).unwrap(), q(0, 1));
        assert_eq!(oracle_measure(&CylinderUnion::full(2), &fair).unwrap(), q(1, 1));
        let wide = w(0, "1").union(&w(40, "1"));
        assert!(matches!(oracle_measure(&wide, &fair), Err(Error::WindowTooLarge(41))));
    }

    #[test]
    fn patterns_listing() {
        let u = w(0, "1").union(&w(1, "1"));
        let p = u.patterns().unwrap();
        assert_eq!(p, vec![vec![0, 1], vec![1, 0], vec![1, 1]]);
    }
}
