//! Parameter search and lower-bound certificates for anchored stage designs.
//!
//! Stage `k` is `{τ < len_k, selector ∈ [T_{k-1}, T_k)}`. For a set of shifts
//! whose pairwise gaps all reach the window of `C_k = A₁ ∪ … ∪ A_k`, the
//! `C_k` part of the correlation is exactly `μ(C_k)^m`. The rest of `A` keeps
//! every point whose anchor lies at or beyond the spread of the shifts,
//! because moving the anchor closer to 0 only widens the selector range.

use num_bigint::BigUint;
use num_traits::{One, Zero};
use rustc_hash::FxHashMap;

use crate::anchored::{anchor_prob, AnchoredSpec};
use crate::verify::normalize;
use crate::{Error, Rational, Result};

use super::{measure_slack, stage_target};

/// Widest anchored window the search will try.
pub const ANCHOR_WINDOW_GUARD: i64 = 1 << 17;

#[derive(Clone, Debug)]
pub(crate) struct Design {
    pub l: u32,
    pub j: u32,
    pub lens: Vec<i64>,
    /// `T_0 = 0, …, T_K`.
    pub cuts: Vec<u64>,
}

impl Design {
    pub fn stages(&self) -> usize {
        self.lens.len()
    }

    fn spec(&self, classes: Vec<(i64, u64, u64)>) -> AnchoredSpec {
        AnchoredSpec { marker_len: self.l, sel_bits: self.j, classes }
    }

    /// `A_k`, 1-based.
    pub fn stage(&self, k: usize) -> AnchoredSpec {
        self.spec(vec![(self.lens[k - 1], self.cuts[k - 1], self.cuts[k])])
    }

    /// Stages `from+1 ..= upto`.
    pub fn union(&self, from: usize, upto: usize) -> AnchoredSpec {
        let classes = (1..=upto)
            .map(|i| (self.lens[i - 1], self.cuts[(i - 1).max(from)].min(self.cuts[upto]), self.cuts[upto]))
            .collect();
        self.spec(classes)
    }

    /// Width of the window of `C_k`; 0 for `k = 0`.
    pub fn window(&self, k: usize) -> i64 {
        if k == 0 {
            0
        } else {
            self.lens[k - 1] - 1 + (self.l + self.j) as i64
        }
    }
}

/// Picks selector ranges so that `μ(A_k)` lands in `[(1-δ)a_k, a_k]`.
fn selectors(l: u32, lens: &[i64], a: &Rational) -> Option<(u32, Vec<u64>)> {
    let probs: Vec<Rational> = lens.iter().map(|&n| anchor_prob(l, 0, n)).collect();
    let slack = measure_slack();
    'bits: for j in 1u32..=30 {
        let scale = Rational::from_int(1i64 << j);
        let mut cuts = vec![0u64];
        for (k, p) in probs.iter().enumerate() {
            let ak = stage_target(a, k + 1);
            let w = (&ak / p * &scale).floor();
            let w: u64 = match u64::try_from(w) {
                Ok(w) if w > 0 => w,
                _ => continue 'bits,
            };
            let got = p * Rational::from_int(w as i64) / &scale;
            if got < (Rational::one() - &slack) * &ak {
                continue 'bits;
            }
            cuts.push(cuts.last().unwrap() + w);
        }
        if *cuts.last().unwrap() > 1u64 << j {
            return None;
        }
        return Some((j, cuts));
    }
    None
}

/// Float mirror of the class probabilities, for screening candidates.
struct FloatModel {
    z: Vec<f64>,
    l: i64,
}

impl FloatModel {
    fn new(l: u32, len: usize) -> Self {
        let l = l as i64;
        let mut z = vec![1.0f64; len + l as usize + 2];
        let q = 0.5f64.powi(l as i32);
        for m in 1..z.len() {
            z[m] = match (m as i64).cmp(&l) {
                std::cmp::Ordering::Less => 1.0,
                std::cmp::Ordering::Equal => z[m - 1] - q,
                std::cmp::Ordering::Greater => z[m - 1] - z[m - l as usize] * q,
            };
        }
        FloatModel { z, l }
    }

    fn prob(&self, lo: i64, hi: i64) -> f64 {
        if hi <= lo {
            return 0.0;
        }
        self.z[(lo + self.l - 1) as usize] - self.z[(hi + self.l - 1) as usize]
    }
}

/// `num / 2^exp`; every quantity in the certificate is dyadic under the fair coin.
#[derive(Clone, Debug, PartialEq, Eq)]
struct Dy {
    num: BigUint,
    exp: u64,
}

impl Dy {
    fn zero() -> Self {
        Dy { num: BigUint::zero(), exp: 0 }
    }

    fn one() -> Self {
        Dy { num: BigUint::one(), exp: 0 }
    }

    fn from_rational(r: &Rational) -> Self {
        let den = r.denom().to_biguint().expect("positive denominator");
        let exp = den.bits() - 1;
        assert_eq!(den.trailing_zeros(), Some(exp), "dyadic value expected");
        Dy { num: r.numer().to_biguint().expect("non-negative"), exp }
    }

    fn rational(&self) -> Rational {
        Rational::dyadic(self.num.clone(), self.exp)
    }

    fn mul(&self, o: &Dy) -> Dy {
        Dy { num: &self.num * &o.num, exp: self.exp + o.exp }
    }

    fn pow(&self, k: u32) -> Dy {
        (0..k).fold(Dy::one(), |acc, _| acc.mul(self))
    }

    fn add(&self, o: &Dy) -> Dy {
        let exp = self.exp.max(o.exp);
        Dy { num: (&self.num << (exp - self.exp)) + (&o.num << (exp - o.exp)), exp }
    }
}

impl PartialOrd for Dy {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}

impl Ord for Dy {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        let exp = self.exp.max(o.exp);
        (&self.num << (exp - self.exp)).cmp(&(&o.num << (exp - o.exp)))
    }
}

/// Lower bounds for one design, exact or float.
pub(crate) struct Certifier<'a> {
    d: &'a Design,
    mu: Vec<Rational>,
    dmu: Vec<Dy>,
    rests: Vec<AnchoredSpec>,
    mass_cache: FxHashMap<(usize, i64), Dy>,
    float: Option<(FloatModel, Vec<f64>, Vec<AnchoredSpec>)>,
}

/// Outcome for one `n`.
#[derive(Clone, Debug)]
pub(crate) struct Bound {
    pub n: i64,
    pub lower: Rational,
    /// Which `C_k` the bound used, per cluster.
    pub ks: Vec<usize>,
    pub certified: bool,
}

impl<'a> Certifier<'a> {
    pub fn exact(d: &'a Design) -> Self {
        let mu: Vec<Rational> = (0..=d.stages()).map(|k| d.union(0, k).exact_measure()).collect();
        let dmu = mu.iter().map(Dy::from_rational).collect();
        let rests = (0..=d.stages()).map(|k| d.union(k, d.stages())).collect();
        Certifier { d, mu, dmu, rests, mass_cache: FxHashMap::default(), float: None }
    }

    fn float(d: &'a Design) -> Self {
        let fm = FloatModel::new(d.l, *d.lens.last().unwrap() as usize);
        let mut c =
            Certifier { d, mu: Vec::new(), dmu: Vec::new(), rests: Vec::new(), mass_cache: FxHashMap::default(), float: None };
        let mu = (0..=d.stages()).map(|k| float_mass(&fm, &d.union(0, k), 0)).collect();
        let rests = (0..=d.stages()).map(|k| d.union(k, d.stages())).collect();
        c.float = Some((fm, mu, rests));
        c
    }

    /// `μ((A \ C_k) ∩ {τ ≥ s})`.
    fn robust(&mut self, k: usize, s: i64) -> Dy {
        let rest = &self.rests[k];
        self.mass_cache
            .entry((k, s))
            .or_insert_with(|| {
                let (num, exp) = rest.mass_from_dyadic(s);
                Dy { num, exp }
            })
            .clone()
    }

    pub fn measure(&self, k: usize) -> &Rational {
        &self.mu[k]
    }

    /// Certificate for `μ(A ∩ ⋂ TˢA) > μ(A)^{d+1}` with `d = shifts.len()`.
    pub fn bound(&mut self, n: i64, shifts: &[i64]) -> Bound {
        let key = normalize(shifts);
        let big = self.d.stages();
        let width = self.d.window(big);
        let mut parts: Vec<Vec<i64>> = Vec::new();
        for &s in &key {
            match parts.last_mut() {
                Some(c) if s - c.last().unwrap() < width => c.push(s),
                _ => parts.push(vec![s]),
            }
        }
        let mut lower = Dy::one();
        let mut ks = Vec::new();
        for c in &parts {
            let (v, k) = self.cluster(c);
            lower = lower.mul(&v);
            ks.push(k);
        }
        let rhs = self.dmu[big].pow(shifts.len() as u32 + 1);
        Bound { n, certified: lower > rhs, lower: lower.rational(), ks }
    }

    fn cluster(&mut self, c: &[i64]) -> (Dy, usize) {
        let big = self.d.stages();
        if c.len() == 1 {
            return (self.dmu[big].clone(), big);
        }
        let spread = c.last().unwrap() - c[0];
        let gap = c.windows(2).map(|w| w[1] - w[0]).min().unwrap();
        let mut best: Option<(Dy, usize)> = None;
        for k in 0..big {
            if gap < self.d.window(k) {
                break;
            }
            let head = if k == 0 { Dy::zero() } else { self.dmu[k].pow(c.len() as u32) };
            let v = head.add(&self.robust(k, spread));
            if best.as_ref().is_none_or(|b| v > b.0) {
                best = Some((v, k));
            }
        }
        best.unwrap()
    }

    fn float_certified(&self, shifts: &[i64]) -> bool {
        let (fm, mu, rests) = self.float.as_ref().unwrap();
        let key = normalize(shifts);
        let big = self.d.stages();
        let width = self.d.window(big);
        let mut lower = 1.0;
        let mut i = 0;
        while i < key.len() {
            let mut j = i + 1;
            while j < key.len() && key[j] - key[j - 1] < width {
                j += 1;
            }
            let c = &key[i..j];
            if c.len() == 1 {
                lower *= mu[big];
            } else {
                let spread = c.last().unwrap() - c[0];
                let gap = c.windows(2).map(|w| w[1] - w[0]).min().unwrap();
                let mut best = 0.0f64;
                for k in 0..big {
                    if gap < self.d.window(k) {
                        break;
                    }
                    let head = if k == 0 { 0.0 } else { mu[k].powi(c.len() as i32) };
                    best = best.max(head + float_mass(fm, &rests[k], spread));
                }
                lower *= best;
            }
            i = j;
        }
        lower > mu[big].powi(shifts.len() as i32 + 1) * (1.0 + 1e-9)
    }
}

/// `μ(spec ∩ {τ ≥ s})` in floating point.
fn float_mass(fm: &FloatModel, spec: &AnchoredSpec, s: i64) -> f64 {
    let mut prev = 0;
    let mut t = 0.0;
    for &(end, lo, hi) in &spec.classes {
        let start = prev.max(s);
        if end > start {
            t += fm.prob(start, end) * (hi - lo) as f64 / (1u64 << spec.sel_bits) as f64;
        }
        prev = end;
    }
    t
}

/// What a design has to certify.
pub(crate) struct Requirement<'a> {
    pub ns: Vec<i64>,
    pub shifts: &'a (dyn Fn(i64) -> Vec<i64> + Sync),
    /// How many of `ns` may stay uncertified.
    pub allowed: usize,
    /// Starting guess for the largest stage length.
    pub start: i64,
}

pub(crate) struct Found {
    pub design: Design,
    pub bounds: Vec<Bound>,
}

fn lens_for(big: i64, k: usize, num: i64, den: i64) -> Option<Vec<i64>> {
    let mut lens = vec![big];
    for _ in 1..k {
        let next = *lens.last().unwrap() * den / num;
        if next < 1 || next >= *lens.last().unwrap() {
            return None;
        }
        lens.push(next);
    }
    lens.reverse();
    Some(lens)
}

/// Deterministic search over the largest length, the marker length and the
/// growth ratio between stages. Candidates are screened in floating point and
/// the first one whose exact certificate meets the requirement wins.
pub(crate) fn search(k: usize, a: &Rational, req: &Requirement) -> Result<Found> {
    let ratios = [(3, 2), (2, 1), (5, 2), (3, 1), (4, 1)];
    let mut big = req.start.max(4);
    while big + 64 <= ANCHOR_WINDOW_GUARD {
        for l in 3u32..=24 {
            for &(num, den) in &ratios {
                let Some(lens) = lens_for(big, k, num, den) else { continue };
                let Some((j, cuts)) = selectors(l, &lens, a) else { continue };
                let design = Design { l, j, lens, cuts };
                let fc = Certifier::float(&design);
                let misses = req.ns.iter().filter(|&&n| !fc.float_certified(&(req.shifts)(n))).count();
                if misses > req.allowed {
                    continue;
                }
                let mut ec = Certifier::exact(&design);
                let bounds: Vec<Bound> = req.ns.iter().map(|&n| ec.bound(n, &(req.shifts)(n))).collect();
                if bounds.iter().filter(|b| !b.certified).count() <= req.allowed {
                    return Ok(Found { design, bounds });
                }
            }
        }
        big += big / 4 + 1;
    }
    Err(Error::Resource(format!("no anchored design within window {ANCHOR_WINDOW_GUARD}")))
}

/// Consecutive runs of certified `n` that used the same stage split, as
/// `(first n, last n, ks, least lower bound)`.
pub(crate) fn segments(bounds: &[Bound]) -> Vec<(i64, i64, Vec<usize>, Rational)> {
    let mut out: Vec<(i64, i64, Vec<usize>, Rational)> = Vec::new();
    for b in bounds.iter().filter(|b| b.certified) {
        match out.last_mut() {
            Some(seg) if seg.2 == b.ks && seg.1 + 1 == b.n => {
                seg.1 = b.n;
                if b.lower < seg.3 {
                    seg.3 = b.lower.clone();
                }
            }
            _ => out.push((b.n, b.n, b.ks.clone(), b.lower.clone())),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anchored::Anchored;
    use crate::rational::q;
    use crate::verify::Correlator;

    #[test]
    fn bounds_are_below_exact_values() {
        let a = q(1, 32);
        let lens = vec![20, 40, 80];
        let (j, cuts) = selectors(5, &lens, &a).unwrap();
        let d = Design { l: 5, j, lens, cuts };
        let set = Anchored::new(d.union(0, 3));
        assert_eq!(set.measure(), &d.union(0, 3).exact_measure());
        let mut c = Certifier::exact(&d);
        for n in 1..120 {
            for shifts in [vec![n], vec![n, 2 * n], vec![n * n, n * n + n]] {
                let b = c.bound(n, &shifts);
                assert!(b.lower <= set.correlation(&shifts).unwrap(), "{shifts:?}");
            }
        }
    }

    #[test]
    fn stage_measures_within_slack() {
        let a = q(1, 32);
        let lens = vec![100, 300, 900];
        let (j, cuts) = selectors(7, &lens, &a).unwrap();
        let d = Design { l: 7, j, lens, cuts };
        for k in 1..=3 {
            let m = d.stage(k).exact_measure();
            let t = stage_target(&a, k);
            assert!(m <= t && m >= (Rational::one() - measure_slack()) * t);
        }
    }
}
