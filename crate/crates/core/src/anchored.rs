//! Sets anchored at the first occurrence of a marker word.
//!
//! The marker is `1 0^{L-1}`, which cannot overlap itself. For a point `x`,
//! `τ(x)` is the least `t ≥ 0` where the marker starts, and the selector is
//! the `j` bits right after that occurrence, read as a binary number.

use std::sync::{Arc, Mutex, OnceLock};

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Zero};
use rustc_hash::{FxHashMap, FxHashSet};

use crate::dd::{self, Scanner, Step};
use crate::{BernoulliSystem, CylinderUnion, Rational};

/// `{x : τ(x) < t_end and selector ∈ [lo, hi)}` for the first class whose
/// `t_end` exceeds `τ(x)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AnchoredSpec {
    pub marker_len: u32,
    pub sel_bits: u32,
    pub classes: Vec<(i64, u64, u64)>,
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub enum AState {
    /// Matched length of the marker suffix, 0 when idle.
    Search(u32),
    /// Reading selector bits: class, bits read, prefix value so far.
    Select { class: u16, read: u32, lo_cmp: i8, hi_cmp: i8 },
}

impl AnchoredSpec {
    fn horizon(&self) -> i64 {
        self.classes.iter().map(|c| c.0).max().unwrap_or(0)
    }

    /// Coordinates the set can depend on.
    pub fn window(&self) -> (i64, i64) {
        (0, self.horizon() - 1 + (self.marker_len + self.sel_bits) as i64)
    }

    pub fn build(&self) -> CylinderUnion {
        let (lo, hi) = self.window();
        CylinderUnion::from_scanner(self, 2, lo, hi)
    }

    fn bit(v: u64, bits: u32, i: u32) -> i8 {
        ((v >> (bits - 1 - i)) & 1) as i8
    }
}

impl Scanner for AnchoredSpec {
    type State = AState;

    fn start(&self) -> AState {
        AState::Search(0)
    }

    fn step(&self, st: &AState, pos: i64, sym: u8) -> Step<AState> {
        let l = self.marker_len;
        match *st {
            AState::Search(m) => {
                let next = if sym == 1 {
                    1
                } else if m >= 1 {
                    m + 1
                } else {
                    0
                };
                if next == l {
                    let tau = pos - l as i64 + 1;
                    let Some(class) = self.classes.iter().position(|c| tau < c.0) else {
                        return Step::Reject;
                    };
                    if self.sel_bits == 0 {
                        let (_, a, b) = self.classes[class];
                        return if a == 0 && b > 0 { Step::Accept } else { Step::Reject };
                    }
                    return Step::Next(AState::Select { class: class as u16, read: 0, lo_cmp: 0, hi_cmp: 0 });
                }
                let earliest = if next >= 1 { pos - next as i64 + 1 } else { pos + 1 };
                if earliest >= self.horizon() {
                    return Step::Reject;
                }
                Step::Next(AState::Search(next))
            }
            AState::Select { class, read, lo_cmp, hi_cmp } => {
                let (_, a, b) = self.classes[class as usize];
                let j = self.sel_bits;
                let s = sym as i8;
                let lo_cmp = if lo_cmp == 0 { s - Self::bit(a, j, read) } else { lo_cmp };
                // hi is exclusive and may equal 2^j
                let hi_cmp = if hi_cmp == 0 {
                    if b >> j != 0 { -1 } else { s - Self::bit(b, j, read) }
                } else {
                    hi_cmp
                };
                if lo_cmp < 0 || hi_cmp > 0 {
                    return Step::Reject;
                }
                if read + 1 == j {
                    return if hi_cmp < 0 { Step::Accept } else { Step::Reject };
                }
                if lo_cmp > 0 && hi_cmp < 0 {
                    return Step::Accept;
                }
                Step::Next(AState::Select { class, read: read + 1, lo_cmp, hi_cmp })
            }
        }
    }

    fn finish(&self, _: &AState) -> bool {
        false
    }
}

impl AnchoredSpec {
    /// Selector interval for an anchor at `t`, empty past the horizon.
    pub fn interval(&self, t: i64) -> (u64, u64) {
        if t < 0 {
            return (0, 0);
        }
        match self.classes.iter().find(|c| t < c.0) {
            Some(&(_, lo, hi)) => (lo, hi.max(lo)),
            None => (0, 0),
        }
    }

    /// Anchor positions where [`interval`](Self::interval) can change.
    fn breaks(&self) -> Vec<i64> {
        let mut b: Vec<i64> = self.classes.iter().map(|c| c.0).collect();
        b.push(0);
        b
    }
}

/// Counts `Z(m)` of binary words of length `m` avoiding the marker,
/// `Z(m) = 2Z(m-1) - Z(m-L)`.
struct AvoidCounts {
    z: Vec<BigUint>,
}

fn avoid_counts(l: u32, len: usize) -> Arc<AvoidCounts> {
    static CACHE: OnceLock<Mutex<FxHashMap<u32, Arc<AvoidCounts>>>> = OnceLock::new();
    let mut cache = CACHE.get_or_init(Default::default).lock().unwrap();
    if let Some(t) = cache.get(&l) {
        if t.z.len() >= len {
            return t.clone();
        }
    }
    let mut z: Vec<BigUint> = cache.remove(&l).map(|t| t.z.clone()).unwrap_or_default();
    let len = len.max(z.len() * 3 / 2).max(1024);
    while z.len() < len {
        let m = z.len();
        let v = if m == 0 {
            BigUint::one()
        } else if m < l as usize {
            &z[m - 1] << 1u32
        } else if m == l as usize {
            (&z[m - 1] << 1u32) - 1u32
        } else {
            (&z[m - 1] << 1u32) - &z[m - l as usize]
        };
        z.push(v);
    }
    let t = Arc::new(AvoidCounts { z });
    cache.insert(l, t.clone());
    t
}

/// `P(τ ∈ [lo, hi))` for the marker of length `l`, as a numerator over `2^(hi + l)`.
fn anchor_mass(l: u32, lo: i64, hi: i64) -> BigUint {
    let zs = avoid_counts(l, (hi + l as i64 + 1) as usize);
    let top = hi + l as i64;
    let zn = |m: i64| -> BigUint { &zs.z[m as usize] << (top - m) as u64 };
    zn(lo + l as i64 - 1) - zn(hi + l as i64 - 1)
}

/// `P(τ ∈ [lo, hi))` under the fair coin.
pub fn anchor_prob(l: u32, lo: i64, hi: i64) -> Rational {
    let lo = lo.max(0);
    if hi <= lo {
        return Rational::zero();
    }
    Rational::dyadic(anchor_mass(l, lo, hi), (hi + l as i64) as u64)
}

impl AnchoredSpec {
    /// `μ(A ∩ {τ ≥ s})` under the fair coin, from the class probabilities.
    pub fn mass_from(&self, s: i64) -> Rational {
        let mut total = Rational::zero();
        let mut prev = 0;
        for &(end, lo, hi) in &self.classes {
            let start = prev.max(s);
            if hi > lo && end > start {
                let w = Rational::dyadic(BigUint::from(hi - lo), self.sel_bits as u64);
                total += &(anchor_prob(self.marker_len, start, end) * w);
            }
            prev = prev.max(end);
        }
        total
    }

    /// [`mass_from`](Self::mass_from) as a numerator over `2^e`, returned as `(num, e)`.
    pub(crate) fn mass_from_dyadic(&self, s: i64) -> (BigUint, u64) {
        let top = self.horizon().max(0);
        let e = (top + self.marker_len as i64) as u64 + self.sel_bits as u64;
        let mut num = BigUint::zero();
        let mut prev = 0;
        for &(end, lo, hi) in &self.classes {
            let start = prev.max(s).max(0);
            if hi > lo && end > start {
                num += (anchor_mass(self.marker_len, start, end) * (hi - lo)) << (top - end) as u64;
            }
            prev = prev.max(end);
        }
        (num, e)
    }

    pub fn exact_measure(&self) -> Rational {
        self.mass_from(0)
    }
}

/// An anchored set together with what the closed-form correlation needs.
pub struct Anchored {
    pub spec: AnchoredSpec,
    pub set: CylinderUnion,
    measure: Rational,
    measure_num: BigUint,
    end: i64,
    // sub-diagram measures (numerator over 2^(end - var)) for every node
    // reachable within the first L + j coordinates
    top: FxHashMap<u32, BigUint>,
    near: Mutex<FxHashMap<(i64, u64, u64), Arc<BigUint>>>,
}

impl Anchored {
    pub fn new(spec: AnchoredSpec) -> Self {
        let set = spec.build();
        Self::with_set(spec, set)
    }

    pub(crate) fn with_set(spec: AnchoredSpec, set: CylinderUnion) -> Self {
        let sys = BernoulliSystem::fair();
        let d = &set.d;
        let reach = (spec.marker_len + spec.sel_bits) as i64;
        let mut seen: FxHashSet<u32> = FxHashSet::default();
        let mut stack = vec![d.root];
        while let Some(r) = stack.pop() {
            if !seen.insert(r) {
                continue;
            }
            if r >= 2 && d.var(r) < reach {
                stack.extend((0..2).map(|s| d.kid(r, s)));
            }
        }
        let wanted: Vec<u32> = seen.into_iter().filter(|&r| r >= 2).collect();
        let end = d.support().map(|(_, hi)| hi + 1).unwrap_or(0);
        let vals = dd::node_measures(d, &sys, &wanted);
        let top = wanted
            .iter()
            .zip(vals)
            .map(|(&r, v)| {
                let scaled = v * Rational::from_int(BigInt::one() << (end - d.var(r)) as usize);
                (r, scaled.numer().to_biguint().unwrap())
            })
            .collect();
        let measure = set.measure(&sys).expect("binary set");
        let g = end + 2 * (spec.marker_len + spec.sel_bits) as i64;
        let measure_num = (&measure * Rational::from_int(BigInt::one() << g as usize)).numer().to_biguint().unwrap();
        Anchored { spec, set, measure, measure_num, end, top, near: Mutex::default() }
    }

    pub fn measure(&self) -> &Rational {
        &self.measure
    }

    fn reach(&self) -> i64 {
        (self.spec.marker_len + self.spec.sel_bits) as i64
    }

    /// Exponent `G` such that every quantity from [`near_term`](Self::near_term)
    /// and the measure are integers over `2^G`.
    fn scale(&self) -> u64 {
        (self.end + 2 * self.reach()) as u64
    }

    /// `μ(self ∩ cyl(bits at 0..))` as a numerator over `2^(end + reach)`.
    fn prefix_measure(&self, bits: &[u8]) -> BigUint {
        let d = &self.set.d;
        let mut r = d.root;
        for (pos, &b) in bits.iter().enumerate() {
            if r < 2 {
                break;
            }
            if d.var(r) == pos as i64 {
                r = d.kid(r, b as usize);
            }
        }
        let shift = self.reach() - bits.len() as i64;
        match r {
            dd::FALSE => BigUint::zero(),
            dd::TRUE => BigUint::one() << (self.end + shift) as u64,
            _ => &self.top[&r] << (d.var(r) + shift) as u64,
        }
    }

    /// `Σ_{s ∈ [lo,hi)} P(bits on [t, t+L+j) spell marker·s, and x ∈ self)`
    /// for `-L-j < t < 0`, as a numerator over `2^scale`.
    fn near_term(&self, t: i64, lo: u64, hi: u64) -> Arc<BigUint> {
        if let Some(v) = self.near.lock().unwrap().get(&(t, lo, hi)) {
            return v.clone();
        }
        let l = self.spec.marker_len as usize;
        let j = self.spec.sel_bits;
        let k = (-t) as usize;
        let mut acc = BigUint::zero();
        let mut a = lo;
        while a < hi {
            let mut e = 0;
            while e < j && a % (2 << e) == 0 && a + (2 << e) <= hi {
                e += 1;
            }
            let mut w = vec![0u8; l];
            w[0] = 1;
            let pre = (j - e) as usize;
            w.extend((0..pre).map(|i| ((a >> (j - 1 - i as u32)) & 1) as u8));
            let neg = k.min(w.len());
            let pos = if k < w.len() { &w[k..] } else { &[][..] };
            acc += self.prefix_measure(pos) << (self.reach() as usize - neg);
            a += 1 << e;
        }
        let v = Arc::new(acc);
        self.near.lock().unwrap().insert((t, lo, hi), v.clone());
        v
    }
}

fn overlap(a: (u64, u64), b: (u64, u64)) -> u64 {
    a.1.min(b.1).saturating_sub(a.0.max(b.0))
}

/// Exact `μ(X ∩ TⁿY)` for anchored sets sharing marker and selector length.
///
/// Splits on where the first marker at or after `-n` sits. If it is at or
/// after 0 both points share it. Otherwise the part of the word before it
/// is independent of everything else, and only anchors within `L + j` of the
/// origin interact with `X`.
pub fn anchored_correlation(x: &Anchored, y: &Anchored, n: i64) -> Rational {
    if n < 0 {
        return anchored_correlation(y, x, -n);
    }
    assert_eq!(
        (x.spec.marker_len, x.spec.sel_bits),
        (y.spec.marker_len, y.spec.sel_bits),
        "anchored sets must share marker and selector length"
    );
    if n >= y.end || x.end == 0 {
        return x.measure() * y.measure();
    }
    let l = x.spec.marker_len as i64;
    let j = x.spec.sel_bits as u64;
    let reach = x.reach();
    let hx = x.spec.horizon();
    let hy = y.spec.horizon();
    let top = (hx + n).max(hy) + l + 1;
    let zs = avoid_counts(x.spec.marker_len, top as usize);
    let z = &zs.z;
    let g = x.scale();
    // numerators over 2^top of z(m) = Z(m) / 2^m
    let zn = |m: i64| -> BigUint { &z[m as usize] << (top - m) as u64 };
    // P(first marker from the origin lands in [lo, hi)) = z(lo+L-1) - z(hi+L-1)
    let hit = |lo: i64, hi: i64| -> BigUint { zn(lo + l - 1) - zn(hi + l - 1) };

    // both anchors coincide at t >= 0
    let mut cuts: Vec<i64> = x.spec.breaks();
    cuts.extend(y.spec.breaks().into_iter().map(|b| b - n));
    cuts.retain(|&c| (0..=hx).contains(&c));
    cuts.sort_unstable();
    cuts.dedup();
    let mut same = BigUint::zero();
    for w in cuts.windows(2) {
        let o = overlap(x.spec.interval(w[0]), y.spec.interval(w[0] + n));
        if o > 0 {
            same += hit(w[0] + n, w[1] + n) * o;
        }
    }

    // the second anchor is far enough left that its selector ends before 0
    let far_end = n - reach + 1;
    let mut far = BigUint::zero();
    if far_end > 0 {
        let mut cuts = y.spec.breaks();
        cuts.push(far_end);
        cuts.retain(|&c| (0..=far_end).contains(&c));
        cuts.sort_unstable();
        cuts.dedup();
        for w in cuts.windows(2) {
            let (a, b) = y.spec.interval(w[0]);
            if b > a {
                far += hit(w[0], w[1]) * (b - a);
            }
        }
    }

    let mut near = BigUint::zero();
    for t in (-reach + 1).max(-n)..0 {
        let (a, b) = y.spec.interval(t + n);
        if b > a {
            near += zn(t + n) * &*x.near_term(t, a, b);
        }
    }

    let total = (same << g) + far * &x.measure_num + (near << j);
    Rational::dyadic(total, top as u64 + j + g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cylinder::{intersection_measure, oracle_measure};

    fn spec(l: u32, j: u32, classes: &[(i64, u64, u64)]) -> AnchoredSpec {
        AnchoredSpec { marker_len: l, sel_bits: j, classes: classes.to_vec() }
    }

    #[test]
    fn build_matches_oracle() {
        let sys = BernoulliSystem::fair();
        let s = spec(3, 2, &[(4, 0, 3), (7, 2, 4)]);
        let a = s.build();
        assert_eq!(a.measure(&sys).unwrap(), oracle_measure(&a, &sys).unwrap());
    }

    #[test]
    fn class_masses_match_diagrams() {
        let sys = BernoulliSystem::fair();
        let s = spec(4, 3, &[(5, 1, 7), (13, 0, 8), (20, 2, 3)]);
        let a = s.build();
        assert_eq!(s.exact_measure(), a.measure(&sys).unwrap());
        // τ ≥ 6 means no marker starts in [0, 6)
        let late = CylinderUnion::from_scanner(&spec(4, 0, &[(6, 0, 1)]), 2, 0, 9).complement();
        assert_eq!(s.mass_from(6), a.intersect(&late).measure(&sys).unwrap());
    }

    #[test]
    fn closed_form_matches_diagrams() {
        let sys = BernoulliSystem::fair();
        let cases = [
            (spec(3, 2, &[(4, 0, 3), (9, 1, 4)]), spec(3, 2, &[(6, 3, 4)])),
            (spec(4, 3, &[(2, 0, 1), (11, 5, 8)]), spec(4, 3, &[(5, 1, 7), (13, 0, 8)])),
            (spec(2, 0, &[(6, 0, 1)]), spec(2, 0, &[(3, 0, 1)])),
            (spec(5, 1, &[(20, 1, 2)]), spec(5, 1, &[(20, 1, 2)])),
        ];
        for (sx, sy) in cases {
            let x = Anchored::new(sx);
            let y = Anchored::new(sy);
            for n in -40..=40 {
                let want = intersection_measure(&[(&x.set, 0), (&y.set, n)], &sys).unwrap();
                assert_eq!(anchored_correlation(&x, &y, n), want, "n = {n}");
            }
        }
    }
}
