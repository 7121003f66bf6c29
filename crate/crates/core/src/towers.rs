//! Rokhlin towers in the Bernoulli shift and the uniformity machinery used by
//! the density-1 UI construction.
//!
//! Towers use the marker `1·0^{L-1}`, which cannot overlap itself. A point is
//! in the base when the last marker starting at or before 0 (looking back at
//! most `G` places) starts at a multiple of `h`, and no marker starts in
//! `(0, h-1]`. Two levels `TⁱB`, `TʲB` would force the same last marker to sit
//! at two residues mod `h`, so they are disjoint.

use serde::Serialize;

use crate::cylinder::intersection_measure;
use crate::dd::{Scanner, Step};
use crate::rational::Rational;
use crate::{BernoulliSystem, CylinderUnion, Error, Result};

/// Widest base window [`build_tower`] will try.
pub const TOWER_WINDOW_GUARD: i64 = 1 << 18;

/// Relative undershoot allowed when carving to a target measure.
pub fn carve_slack() -> Rational {
    Rational::new(1, 16)
}

#[derive(Clone, Debug)]
pub struct Tower {
    pub base: CylinderUnion,
    pub height: u64,
    /// Marker length, 0 for the trivial tower `B = X`.
    pub marker_len: u32,
    /// Look-back guard for the last marker.
    pub guard: i64,
}

struct BaseScanner {
    l: u32,
    h: i64,
}

// (matched marker prefix, candidate: 0 none, 1 good residue, 2 bad residue)
impl Scanner for BaseScanner {
    type State = (u32, u8);

    fn start(&self) -> (u32, u8) {
        (0, 0)
    }

    fn step(&self, &(m, cand): &(u32, u8), pos: i64, sym: u8) -> Step<(u32, u8)> {
        let next = if sym == 1 {
            1
        } else if sym == 0 && m >= 1 {
            m + 1
        } else {
            0
        };
        if next == self.l {
            let s = pos - self.l as i64 + 1;
            if s > 0 {
                return Step::Reject;
            }
            let c = if s.rem_euclid(self.h) == 0 { 1 } else { 2 };
            return Step::Next((0, c));
        }
        // every marker starting at or before 0 is complete by now
        if pos >= self.l as i64 - 1 && cand != 1 {
            return Step::Reject;
        }
        Step::Next((next, cand))
    }

    fn finish(&self, &(_, cand): &(u32, u8)) -> bool {
        cand == 1
    }
}

fn marker_base(k: u8, l: u32, h: i64, g: i64) -> CylinderUnion {
    let sc = BaseScanner { l, h };
    CylinderUnion::from_scanner(&sc, k, -g + 1, h - 1 + l as i64)
}

// markers among the next h places and a marker-free look-back both cost
// coverage; pick the marker length that needs the shortest look-back
fn plan(sys: &BernoulliSystem, h: u64, eps: &Rational) -> Option<(i64, u32)> {
    let p1 = sys.prob(1).to_f64();
    let p0 = sys.prob(0).to_f64();
    let e = eps.to_f64();
    let hh = h as i64;
    let mut best: Option<(i64, u32)> = None;
    for l in 2u32..40 {
        let rate = p1 * p0.powi(l as i32 - 1);
        let spare = e - (hh as f64) * rate;
        if spare <= e / 20.0 {
            continue;
        }
        let g = (spare.recip().ln() / rate).ceil() as i64 + hh;
        if best.is_none_or(|(bg, _)| g < bg) {
            best = Some((g, l));
        }
    }
    best
}

/// Estimated base window of [`build_tower`]`(sys, h, eps)`, without building it.
pub fn projected_window(sys: &BernoulliSystem, h: u64, eps: &Rational) -> Option<i64> {
    if h <= 1 {
        return Some(0);
    }
    plan(sys, h, eps).map(|(g, l)| g + h as i64 + l as i64)
}

/// A tower of height `h` whose levels cover more than `1 - ε`.
pub fn build_tower(sys: &BernoulliSystem, h: u64, eps: &Rational) -> Result<Tower> {
    if !eps.is_positive() || *eps >= Rational::one() {
        return Err(Error::Precondition(format!("tower slack {eps} not in (0,1)")));
    }
    if h == 0 {
        return Err(Error::Precondition("tower height must be positive".into()));
    }
    let k = sys.alphabet() as u8;
    if h == 1 {
        return Ok(Tower { base: CylinderUnion::full(k), height: 1, marker_len: 0, guard: 0 });
    }
    let target = Rational::one() - eps;
    let best = plan(sys, h, eps);
    let hh = h as i64;
    if let Some((mut g, l)) = best {
        while g + hh + l as i64 <= TOWER_WINDOW_GUARD {
            let base = marker_base(k, l, hh, g);
            let cover = base.measure(sys)? * Rational::from_int(hh);
            if cover > target {
                return Ok(Tower { base, height: h, marker_len: l, guard: g });
            }
            g += g / 8 + 1;
        }
    }
    Err(Error::Resource(format!("no marker tower of height {h} with coverage above {target} within window {TOWER_WINDOW_GUARD}")))
}

impl Tower {
    /// `TⁱB`.
    pub fn level(&self, i: u64) -> CylinderUnion {
        self.base.shift(i as i64)
    }

    /// `h·μ(B)`, the measure of the union of the levels.
    pub fn coverage(&self, sys: &BernoulliSystem) -> Result<Rational> {
        Ok(self.base.measure(sys)? * Rational::from_int(self.height as i64))
    }

    /// `μ(TⁱB ∩ TʲB)` for `0 ≤ i < j < h`, listed by `(i, j)`.
    pub fn level_overlaps(&self, sys: &BernoulliSystem) -> Result<Vec<(u64, u64, Rational)>> {
        let mut out = Vec::new();
        for i in 0..self.height {
            for j in i + 1..self.height {
                let m = intersection_measure(&[(&self.base, i as i64), (&self.base, j as i64)], sys)?;
                out.push((i, j, m));
            }
        }
        Ok(out)
    }

    /// By invariance `μ(TⁱB ∩ TʲB) = μ(B ∩ T^{j-i}B)`, so `h - 1` measures
    /// settle all pairs.
    pub fn verify_disjoint(&self, sys: &BernoulliSystem) -> Result<bool> {
        for d in 1..self.height {
            if !intersection_measure(&[(&self.base, 0), (&self.base, d as i64)], sys)?.is_zero() {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// First coordinate after the base window, relative to the base point.
    /// Digits from here on are free, so they split the base evenly.
    fn free_offset(&self) -> i64 {
        self.base.window().map(|(_, r)| r.max(0)).unwrap_or(0)
    }

    /// `B ∩ {pattern ≥ lo}` with the pattern read on `digits` free coordinates.
    fn base_from(&self, digits: u32, lo: u64) -> CylinderUnion {
        let k = self.base.alphabet();
        let top = (k as u64).pow(digits);
        self.base.intersect(&CylinderUnion::digit_range(k, self.free_offset(), digits, lo, top))
    }

    /// Digits needed so one cell `TⁱB ∩ {pattern = w}` weighs at most `slack·a`.
    fn cell_digits(&self, sys: &BernoulliSystem, a: &Rational) -> Result<u32> {
        let mb = self.base.measure(sys)?;
        let k = sys.alphabet() as u64;
        let pmax = sys.probs().iter().max().unwrap().clone();
        let bound = carve_slack() * a;
        let mut digits = 0u32;
        let mut cell = mb;
        while cell > bound {
            digits += 1;
            cell = cell * &pmax;
            if (k as f64).powi(digits as i32) > 1e15 {
                return Err(Error::Resource("carving granularity too fine".into()));
            }
        }
        Ok(digits)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct AtomRecord {
    pub height: u64,
    pub atom: String,
    pub deviation: Rational,
    pub bound: Rational,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct UniformityCertificate {
    pub l0: u64,
    pub eps: Rational,
    pub records: Vec<AtomRecord>,
}

/// Deviation records of `D` against every atom column of `tower`. Atoms are
/// the base split by the word `D` sees on its own window, read at the base.
pub fn atom_deviations(d: &CylinderUnion, tower: &Tower, eps: &Rational, sys: &BernoulliSystem) -> Result<Vec<AtomRecord>> {
    let k = sys.alphabet() as u8;
    let md = d.measure(sys)?;
    let Some((lo, hi)) = d.window() else {
        return Ok(Vec::new());
    };
    let width = (hi - lo) as u32;
    let count = (k as u64).pow(width);
    let mut out = Vec::new();
    for w in 0..count {
        let atom = tower.base.intersect(&CylinderUnion::digit_range(k, lo, width, w, w + 1));
        let ma = atom.measure(sys)?;
        if ma.is_zero() {
            continue;
        }
        let col = ma * Rational::from_int(tower.height as i64);
        let mut hit = Rational::zero();
        for i in 0..tower.height as i64 {
            hit += &intersection_measure(&[(&atom, i), (d, 0)], sys)?;
        }
        let deviation = (hit - &md * &col).abs();
        let bound = eps * &md * &col;
        out.push(AtomRecord { height: tower.height, atom: format!("{w}"), pass: deviation < bound, deviation, bound });
    }
    Ok(out)
}

/// Least power of two `L₀` such that `D` passes the per-atom test on towers of
/// heights `L₀` and `2L₀`.
pub fn uniformity_level(d: &CylinderUnion, eps: &Rational, sys: &BernoulliSystem) -> Result<(u64, UniformityCertificate)> {
    let md = d.measure(sys)?;
    if md.is_zero() {
        return Err(Error::Precondition("uniformity needs μ(D) > 0".into()));
    }
    if d.is_full() {
        return Ok((1, UniformityCertificate { l0: 1, eps: eps.clone(), records: Vec::new() }));
    }
    let mut l0 = 1u64;
    while l0 <= 1 << 12 {
        let mut records = Vec::new();
        let mut ok = true;
        for h in [l0, 2 * l0] {
            let tower = build_tower(sys, h, eps)?;
            let recs = atom_deviations(d, &tower, eps, sys)?;
            ok &= recs.iter().all(|r| r.pass);
            records.extend(recs);
            if !ok {
                break;
            }
        }
        if ok {
            return Ok((l0, UniformityCertificate { l0, eps: eps.clone(), records }));
        }
        l0 *= 2;
    }
    Err(Error::Resource("no uniformity level below 4096".into()))
}

/// `A ⊆ (levels) \ C` of measure in `[a(1 - slack), a]`. Cells
/// `TⁱB ∩ {pattern = w}` are dropped in lexicographic `(i, w)` order until the
/// measure no longer exceeds `a`.
pub fn carve_tower_subset(tower: &Tower, c: &CylinderUnion, a: &Rational, sys: &BernoulliSystem) -> Result<CylinderUnion> {
    let mc = c.measure(sys)?;
    if !a.is_positive() || *a >= Rational::one() - &mc {
        return Err(Error::Precondition(format!("target {a} outside (0, 1 - μ(C))")));
    }
    let digits = tower.cell_digits(sys, a)?;
    let top = (sys.alphabet() as u64).pow(digits);
    let h = tower.height;
    // measure of level i with the lowest patterns below `lo` dropped
    let level = |i: u64, lo: u64| -> Result<(CylinderUnion, Rational)> {
        let s = tower.base_from(digits, lo).shift(i as i64).difference(c);
        let m = s.measure(sys)?;
        Ok((s, m))
    };
    let per_level: Vec<Rational> = (0..h).map(|i| level(i, 0).map(|x| x.1)).collect::<Result<_>>()?;
    // suffix sums: measure of levels i.. kept whole
    let mut suffix = vec![Rational::zero(); h as usize + 1];
    for i in (0..h as usize).rev() {
        suffix[i] = &suffix[i + 1] + &per_level[i];
    }
    let floor = (Rational::one() - carve_slack()) * a;
    if suffix[0] < floor {
        return Err(Error::Unreachable(format!("tower minus C has measure {} below {floor}", suffix[0])));
    }
    let i0 = (0..h as usize).find(|&i| suffix[i + 1] <= *a).unwrap();
    let rest = &suffix[i0 + 1];
    // smallest `lo` such that level i0 from `lo` on fits
    let (mut lo, mut hi) = (0u64, top);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if &level(i0 as u64, mid)?.1 + rest <= *a {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let head = level(i0 as u64, lo)?.0;
    let k = sys.alphabet() as u8;
    let tail = (i0 as u64 + 1..h).map(|i| tower.level(i).difference(c));
    Ok(CylinderUnion::union_all(k, std::iter::once(head).chain(tail)))
}

/// Output of [`carve_progression_subset`].
#[derive(Clone, Debug)]
pub struct Progression {
    pub e: CylinderUnion,
    pub a: CylinderUnion,
    pub levels: Vec<u64>,
    pub measure_e: Rational,
    pub measure_a: Rational,
}

/// `E ⊆ B` and `A = ⋃ T^{iℓ}E ∩ D` over the levels `r ≤ iℓ < h - r`, with
/// `μ(A)` in `[a(1 - slack), a]`. Columns are dropped by pattern, lowest first.
pub fn carve_progression_subset(
    tower: &Tower,
    step: u64,
    margin: u64,
    d: &CylinderUnion,
    a: &Rational,
    sys: &BernoulliSystem,
) -> Result<Progression> {
    if step == 0 || 2 * margin + step >= tower.height {
        return Err(Error::Precondition("need 2r + ℓ < h".into()));
    }
    let md = d.measure(sys)?;
    if md.is_zero() {
        return Err(Error::Precondition("constraint set has measure 0".into()));
    }
    let levels: Vec<u64> = (0..tower.height).filter(|i| i % step == 0 && *i >= margin && *i + margin < tower.height).collect();
    // a column of one pattern meets at most `levels` cells
    let per_col = a / Rational::from_int(levels.len() as i64);
    let digits = tower.cell_digits(sys, &per_col)?;
    let top = (sys.alphabet() as u64).pow(digits);
    let measure_from = |lo: u64| -> Result<Rational> {
        let e = tower.base_from(digits, lo);
        let mut m = Rational::zero();
        for &i in &levels {
            m += &intersection_measure(&[(&e, i as i64), (d, 0)], sys)?;
        }
        Ok(m)
    };
    let full = measure_from(0)?;
    let floor = (Rational::one() - carve_slack()) * a;
    if full < floor {
        return Err(Error::Unreachable(format!("progression levels carry only {full}, below {floor}")));
    }
    let (mut lo, mut hi) = (0u64, top);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if measure_from(mid)? <= *a {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let e = tower.base_from(digits, lo);
    let k = sys.alphabet() as u8;
    let set = CylinderUnion::union_all(k, levels.iter().map(|&i| e.shift(i as i64))).intersect(d);
    let measure_a = measure_from(lo)?;
    let measure_e = e.measure(sys)?;
    if measure_a < floor {
        return Err(Error::Unreachable(format!("carved {measure_a}, below {floor}")));
    }
    Ok(Progression { e, a: set, levels, measure_e, measure_a })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;

    #[test]
    fn small_towers_meet_contract() {
        let sys = BernoulliSystem::fair();
        for (h, eps) in [(1, q(1, 2)), (4, q(1, 4)), (8, q(1, 10))] {
            let t = build_tower(&sys, h, &eps).unwrap();
            assert!(t.coverage(&sys).unwrap() > Rational::one() - &eps);
            assert!(t.level_overlaps(&sys).unwrap().iter().all(|(_, _, m)| m.is_zero()));
            assert!(t.verify_disjoint(&sys).unwrap());
        }
    }

    #[test]
    fn carving_hits_target_and_avoids_c() {
        let sys = BernoulliSystem::fair();
        let t = build_tower(&sys, 4, &q(1, 4)).unwrap();
        let c = CylinderUnion::word(2, 0, "11");
        let a = carve_tower_subset(&t, &c, &q(1, 8), &sys).unwrap();
        assert!(a.is_disjoint(&c));
        let m = a.measure(&sys).unwrap();
        assert!(m <= q(1, 8) && m >= (Rational::one() - carve_slack()) * q(1, 8));
        assert!(carve_tower_subset(&t, &c, &q(3, 4), &sys).is_err());
    }

    #[test]
    fn progression_levels_alternate() {
        let sys = BernoulliSystem::fair();
        let t = build_tower(&sys, 16, &q(1, 4)).unwrap();
        let full = CylinderUnion::full(2);
        let p = carve_progression_subset(&t, 2, 1, &full, &q(1, 64), &sys).unwrap();
        assert_eq!(p.levels, vec![2, 4, 6, 8, 10, 12, 14]);
        assert!(intersection_measure(&[(&p.a, 1), (&p.a, 0)], &sys).unwrap().is_zero());
        assert!(p.measure_a <= q(1, 64));
    }

    #[test]
    fn uniformity_of_full_space_is_trivial() {
        let sys = BernoulliSystem::fair();
        let (l0, cert) = uniformity_level(&CylinderUnion::full(2), &q(1, 10), &sys).unwrap();
        assert_eq!(l0, 1);
        assert!(cert.records.is_empty());
    }
}
