//! Exact verification sweeps, Cesàro averages and the rotation demonstration.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::Serialize;

use crate::anchored::{anchored_correlation, Anchored};
use crate::cylinder::intersection_measure;
use crate::poly::IntPolynomial;
use crate::systems::{interval_correlation, IntervalUnion, QuadExt, RotationSystem};
use crate::{BernoulliSystem, CylinderUnion, Error, Rational, Result};

/// An integer sequence `n ↦ c_n`.
pub type SeqFn = dyn Fn(i64) -> i64 + Send + Sync;

/// Self-correlations `μ(⋂_{s} TˢA)` of one set.
pub trait Correlator: Sync {
    fn measure(&self) -> &Rational;

    /// Width of the window of `A`; shifts this far apart are independent.
    fn width(&self) -> i64;

    /// `μ(A ∩ ⋂ TˢA)` over the given shifts.
    fn correlation(&self, shifts: &[i64]) -> Result<Rational> {
        let key = normalize(shifts);
        let mut total = Rational::one();
        for c in clusters(&key, self.width()) {
            total = total * self.cluster(&c)?;
            if total.is_zero() {
                break;
            }
        }
        Ok(total)
    }

    /// `μ(⋂_{s ∈ c} TˢA)` for sorted shifts starting at 0, all within reach
    /// of each other.
    fn cluster(&self, shifts: &[i64]) -> Result<Rational>;
}

/// `{0} ∪ shifts`, sorted, deduplicated and translated to start at 0.
pub fn normalize(shifts: &[i64]) -> Vec<i64> {
    let mut v: Vec<i64> = shifts.to_vec();
    v.push(0);
    v.sort_unstable();
    v.dedup();
    let m = v[0];
    v.iter_mut().for_each(|s| *s -= m);
    v
}

// maximal runs whose consecutive gaps are below the width, each rebased to 0
fn clusters(sorted: &[i64], width: i64) -> Vec<Vec<i64>> {
    let mut out: Vec<Vec<i64>> = Vec::new();
    let (mut base, mut last) = (0, i64::MIN);
    for &s in sorted {
        if last != i64::MIN && s - last < width {
            out.last_mut().unwrap().push(s - base);
        } else {
            base = s;
            out.push(vec![0]);
        }
        last = s;
    }
    out
}

/// Any cylinder union, measured through its decision diagram.
pub struct Plain<'a> {
    set: &'a CylinderUnion,
    sys: &'a BernoulliSystem,
    measure: Rational,
    width: i64,
}

impl<'a> Plain<'a> {
    pub fn new(set: &'a CylinderUnion, sys: &'a BernoulliSystem) -> Result<Self> {
        let measure = set.measure(sys)?;
        Ok(Plain { set, sys, measure, width: set.width() as i64 })
    }
}

impl Correlator for Plain<'_> {
    fn measure(&self) -> &Rational {
        &self.measure
    }

    fn width(&self) -> i64 {
        self.width
    }

    fn cluster(&self, shifts: &[i64]) -> Result<Rational> {
        if shifts.len() == 1 {
            return Ok(self.measure.clone());
        }
        let parts: Vec<(&CylinderUnion, i64)> = shifts.iter().map(|&s| (self.set, s)).collect();
        intersection_measure(&parts, self.sys)
    }
}

/// Anchored sets under the fair coin: pairs go through the closed form.
impl Correlator for Anchored {
    fn measure(&self) -> &Rational {
        Anchored::measure(self)
    }

    fn width(&self) -> i64 {
        self.set.width() as i64
    }

    fn cluster(&self, shifts: &[i64]) -> Result<Rational> {
        match shifts {
            [_] => Ok(Anchored::measure(self).clone()),
            [_, n] => Ok(anchored_correlation(self, self, *n)),
            _ => {
                let parts: Vec<(&CylinderUnion, i64)> = shifts.iter().map(|&s| (&self.set, s)).collect();
                intersection_measure(&parts, &BernoulliSystem::fair())
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Relation {
    LT,
    EQ,
    GT,
}

impl Relation {
    pub fn of(o: Ordering) -> Self {
        match o {
            Ordering::Less => Relation::LT,
            Ordering::Equal => Relation::EQ,
            Ordering::Greater => Relation::GT,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Relation::LT => "LT",
            Relation::EQ => "EQ",
            Relation::GT => "GT",
        }
    }
}

/// Which strict relation counts as good.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Over,
    Under,
}

impl Sense {
    fn good(self) -> Relation {
        match self {
            Sense::Over => Relation::GT,
            Sense::Under => Relation::LT,
        }
    }
}

/// Values that can be written into the report CSV as a numerator/denominator pair.
pub trait CsvValue {
    fn csv_parts(&self) -> (String, String);
}

impl CsvValue for Rational {
    fn csv_parts(&self) -> (String, String) {
        (self.numer().to_string(), self.denom().to_string())
    }
}

/// `(p + q√5)/d` is written as numerator `p+q√5` and denominator `d`.
impl CsvValue for QuadExt {
    fn csv_parts(&self) -> (String, String) {
        let (p, q, d) = self.integer_form();
        let sign = if q < 0.into() { "-" } else { "+" };
        (format!("{p}{sign}{}√5", q.magnitude()), d.to_string())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepRecord<V> {
    pub n: i64,
    pub lhs: V,
    pub rhs: V,
    pub relation: Relation,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepSummary {
    pub horizon: i64,
    pub sense: Sense,
    pub total: u64,
    pub above: u64,
    pub below: u64,
    pub equal: u64,
    /// `n` whose relation is not the good one.
    pub exceptional: Vec<i64>,
    pub good_density: Rational,
    /// Set every comparison is trivial for (measure 0 or 1).
    pub trivial_set: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepReport<V = Rational> {
    pub records: Vec<SweepRecord<V>>,
    pub summary: SweepSummary,
}

impl<V: Ord + CsvValue> SweepReport<V> {
    pub fn from_records(records: Vec<SweepRecord<V>>, horizon: i64, sense: Sense, trivial_set: bool) -> Self {
        let count = |r: Relation| records.iter().filter(|x| x.relation == r).count() as u64;
        let good = sense.good();
        let exceptional: Vec<i64> = records.iter().filter(|x| x.relation != good).map(|x| x.n).collect();
        let total = records.len() as u64;
        let good_density = if total == 0 {
            Rational::zero()
        } else {
            Rational::new(total as i64 - exceptional.len() as i64, total as i64)
        };
        let summary = SweepSummary {
            horizon,
            sense,
            total,
            above: count(Relation::GT),
            below: count(Relation::LT),
            equal: count(Relation::EQ),
            exceptional,
            good_density,
            trivial_set,
        };
        SweepReport { records, summary }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,lhs_num,lhs_den,rhs_num,rhs_den,relation\n");
        for r in &self.records {
            let (ln, ld) = r.lhs.csv_parts();
            let (rn, rd) = r.rhs.csv_parts();
            s.push_str(&format!("{},{ln},{ld},{rn},{rd},{}\n", r.n, r.relation.as_str()));
        }
        s
    }

    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(&self.summary).expect("summary serializes")
    }

    pub fn failures(&self) -> u64 {
        self.summary.exceptional.len() as u64
    }
}

fn record(n: i64, lhs: Rational, rhs: &Rational) -> SweepRecord<Rational> {
    let relation = Relation::of(lhs.cmp(rhs));
    SweepRecord { n, lhs, rhs: rhs.clone(), relation }
}

/// Evaluates the shift families for every `n`, sharing work between `n`
/// whose normalized shifts coincide.
pub fn sweep_shifts(a: &dyn Correlator, ns: &[i64], shifts: impl Fn(i64) -> Result<Vec<i64>> + Sync) -> Result<Vec<(i64, Rational)>> {
    let keys: Vec<Vec<i64>> = ns.iter().map(|&n| shifts(n).map(|s| normalize(&s))).collect::<Result<_>>()?;
    let mut unique: Vec<&Vec<i64>> = keys.iter().collect();
    unique.sort();
    unique.dedup();
    let values: Vec<Rational> = unique.par_iter().map(|k| a.correlation(k)).collect::<Result<_>>()?;
    Ok(ns
        .iter()
        .zip(&keys)
        .map(|(&n, k)| {
            let i = unique.binary_search(&k).unwrap();
            (n, values[i].clone())
        })
        .collect())
}

fn trivial(m: &Rational) -> bool {
    m.is_zero() || m.is_one()
}

/// Compares `μ(A ∩ ⋂ T^{c_{i,n}}A)` with `μ(A)^{d+1}` for `1 ≤ |n| ≤ horizon`.
pub fn verify_oi(a: &dyn Correlator, seqs: &[&SeqFn], horizon: i64) -> Result<SweepReport> {
    if seqs.is_empty() {
        return Err(Error::Precondition("at least one sequence".into()));
    }
    let rhs = a.measure().pow(seqs.len() as u32 + 1);
    let ns: Vec<i64> = (-horizon..=horizon).filter(|&n| n != 0).collect();
    let vals = sweep_shifts(a, &ns, |n| Ok(seqs.iter().map(|c| c(n)).collect()))?;
    let records = vals.into_iter().map(|(n, v)| record(n, v, &rhs)).collect();
    Ok(SweepReport::from_records(records, horizon, Sense::Over, trivial(a.measure())))
}

fn poly_shifts(polys: &[IntPolynomial], n: i64) -> Result<Vec<i64>> {
    polys
        .iter()
        .map(|p| p.eval_i64(n).ok_or_else(|| Error::Resource(format!("{p} overflows at n = {n}"))))
        .collect()
}

/// Compares `μ(A ∩ ⋂ T^{p_i(n)}A)` with `μ(A)^{d+1}` for `1 ≤ n ≤ horizon`.
pub fn verify_density1(a: &dyn Correlator, polys: &[IntPolynomial], horizon: i64, sense: Sense) -> Result<SweepReport> {
    if !crate::poly::valid_family(polys) {
        return Err(Error::Precondition("polynomial family must be non-constant with non-constant differences".into()));
    }
    let rhs = a.measure().pow(polys.len() as u32 + 1);
    let ns: Vec<i64> = (1..=horizon).collect();
    let vals = sweep_shifts(a, &ns, |n| poly_shifts(polys, n))?;
    let records = vals.into_iter().map(|(n, v)| record(n, v, &rhs)).collect();
    Ok(SweepReport::from_records(records, horizon, sense, trivial(a.measure())))
}

/// `(1/N) Σ_{n=M}^{N+M-1} μ(A ∩ T^{kn}A)`. Terms with `kn` past the window
/// are `μ(A)²` and are summed in closed form.
pub fn cesaro_average(a: &dyn Correlator, m: u64, k: u64, n: u64) -> Result<Rational> {
    if n == 0 || k == 0 {
        return Err(Error::Precondition("need N ≥ 1 and k ≥ 1".into()));
    }
    let w = a.width() as u64;
    let cut = w.div_ceil(k).clamp(m, m + n);
    let ns: Vec<i64> = (m..cut).map(|i| i as i64).collect();
    let vals = sweep_shifts(a, &ns, |i| Ok(vec![k as i64 * i]))?;
    let mut sum: Rational = vals.into_iter().map(|(_, v)| v).sum();
    let rest = (m + n - cut) as i64;
    sum += &(a.measure() * a.measure() * Rational::from_int(rest));
    Ok(sum / Rational::from_int(n as i64))
}

/// [`cesaro_average`] for every `N` in `1..=n_max`, sharing one sweep.
pub fn cesaro_averages(a: &dyn Correlator, m: u64, k: u64, n_max: u64) -> Result<Vec<Rational>> {
    if k == 0 {
        return Err(Error::Precondition("need k ≥ 1".into()));
    }
    let w = a.width() as u64;
    let cut = w.div_ceil(k).clamp(m, m + n_max);
    let ns: Vec<i64> = (m..cut).map(|i| i as i64).collect();
    let vals = sweep_shifts(a, &ns, |i| Ok(vec![k as i64 * i]))?;
    let mu2 = a.measure() * a.measure();
    let mut sum = Rational::zero();
    let mut out = Vec::with_capacity(n_max as usize);
    for big_n in 1..=n_max {
        match vals.get(big_n as usize - 1) {
            Some((_, v)) => sum += v,
            None => sum += &mu2,
        }
        out.push(&sum / Rational::from_int(big_n as i64));
    }
    Ok(out)
}

/// Every `N` in `[n_min, n_max]` with `(1/N) Σ_{n<N} μ(A ∩ TⁿA) > μ(A)²`.
pub fn find_cesaro_crossing(a: &dyn Correlator, n_min: u64, n_max: u64) -> Result<Vec<u64>> {
    let mu = a.measure();
    if trivial(mu) {
        return Err(Error::Precondition("need 0 < μ(A) < 1".into()));
    }
    let n_min = n_min.max(1);
    let mu2 = mu * mu;
    let w = a.width() as u64;
    let top = n_max.min(w);
    let ns: Vec<i64> = (0..top as i64).collect();
    let vals = sweep_shifts(a, &ns, |i| Ok(vec![i]))?;
    // excess(N) = Σ_{n<N} μ(A ∩ TⁿA) - N μ(A)², constant once N ≥ w
    let mut excess = Rational::zero();
    let mut out = Vec::new();
    for (i, (_, v)) in vals.iter().enumerate() {
        excess += &(v - &mu2);
        let big_n = i as u64 + 1;
        if big_n >= n_min && excess.is_positive() {
            out.push(big_n);
        }
    }
    if n_max > top && excess.is_positive() {
        out.extend(n_min.max(top + 1)..=n_max);
    }
    Ok(out)
}

/// The assembled upper bound `(1 + 1/N − (n/N)² − n/N²)μ² − ((N − n − n²)/N²)μ`.
pub fn cesaro_bound_value(mu: &Rational, n: u64, big_n: u64) -> Rational {
    let nn = Rational::from_int(n as i64);
    let bn = Rational::from_int(big_n as i64);
    let bn2 = &bn * &bn;
    let one = Rational::one();
    let coef = &one + &one / &bn - &nn * &nn / &bn2 - &nn / &bn2;
    let lin = (&bn - &nn - &nn * &nn) / &bn2;
    coef * mu * mu - lin * mu
}

/// Least `N > n + n²` where the bound drops below `μ²`.
pub fn cesaro_analytic_bound(mu: &Rational, n: u64) -> Result<u64> {
    if !mu.is_positive() || *mu >= Rational::one() {
        return Err(Error::Precondition("need 0 < μ(A) < 1".into()));
    }
    let mu2 = mu * mu;
    let mut big_n = n + n * n + 1;
    // the bound minus μ² is (N − n − n²)(μ² − μ)/N², so the first candidate
    // already works; the loop only guards the algebra
    while cesaro_bound_value(mu, n, big_n) >= mu2 {
        big_n += 1;
    }
    Ok(big_n)
}

#[derive(Clone, Debug, Serialize)]
pub struct RigidityWitness {
    pub n: i64,
    pub correlation: QuadExt,
    /// `μ(A) − ‖nα‖`.
    pub bound: QuadExt,
    pub pass: bool,
    /// `μ(A) − m‖nα‖` for `m` arcs, which always holds with `≥`.
    pub arc_bound: QuadExt,
    pub arc_pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct RotationDemo {
    pub report: SweepReport<QuadExt>,
    pub first_above: Option<i64>,
    pub first_below: Option<i64>,
    pub witnesses: Vec<RigidityWitness>,
}

/// `μ(A ∩ TⁿA)` against `μ(A)²` for `1 ≤ n ≤ horizon`, with rigidity
/// witnesses at the convergent denominators of `α`.
pub fn rotation_no_ui_oi_demo(a: &IntervalUnion, horizon: i64, sys: &RotationSystem) -> Result<RotationDemo> {
    let mu = a.measure();
    if mu.is_zero() || mu == QuadExt::one() {
        return Err(Error::Precondition("need 0 < μ(A) < 1".into()));
    }
    let mu2 = &mu * &mu;
    let records: Vec<SweepRecord<QuadExt>> = (1..=horizon)
        .into_par_iter()
        .map(|n| {
            let lhs = interval_correlation(a, n, sys);
            let relation = Relation::of(lhs.cmp(&mu2));
            SweepRecord { n, lhs, rhs: mu2.clone(), relation }
        })
        .collect();
    let first = |r: Relation| records.iter().find(|x| x.relation == r).map(|x| x.n);
    let (first_above, first_below) = (first(Relation::GT), first(Relation::LT));
    let m = QuadExt::from_int(a.arcs().len() as i64);
    let witnesses = sys
        .convergent_denominators(horizon)
        .into_iter()
        .map(|n| {
            let correlation = interval_correlation(a, n, sys);
            let dist = sys.dist(n);
            let bound = &mu - &dist;
            let arc_bound = &mu - &(&m * &dist);
            RigidityWitness { n, pass: correlation > bound, arc_pass: correlation >= arc_bound, correlation, bound, arc_bound }
        })
        .collect();
    let report = SweepReport::from_records(records, horizon, Sense::Over, false);
    Ok(RotationDemo { report, first_above, first_below, witnesses })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;

    #[test]
    fn clusters_split_on_width() {
        assert_eq!(clusters(&[0, 2, 9, 10, 30], 5), vec![vec![0, 2], vec![0, 1], vec![0]]);
        assert_eq!(normalize(&[-3, 4, -3]), vec![0, 3, 7]);
    }

    #[test]
    fn single_cylinder_is_independent() {
        let sys = BernoulliSystem::fair();
        let a = CylinderUnion::word(2, 0, "1");
        let p = Plain::new(&a, &sys).unwrap();
        let c: &SeqFn = &|n| n;
        let r = verify_oi(&p, &[c], 20).unwrap();
        assert_eq!(r.summary.equal, 40);
        assert_eq!(r.summary.good_density, Rational::zero());
        assert_eq!(cesaro_average(&p, 1, 1, 7).unwrap(), q(1, 4));
        assert_eq!(cesaro_average(&p, 0, 1, 1).unwrap(), q(1, 2));
        let all = cesaro_averages(&p, 0, 1, 9).unwrap();
        assert!((1..=9).all(|n| all[n - 1] == cesaro_average(&p, 0, 1, n as u64).unwrap()));
        assert_eq!(find_cesaro_crossing(&p, 1, 50).unwrap(), (1..=50).collect::<Vec<_>>());
    }

    #[test]
    fn empty_and_full_sets_are_trivial() {
        let sys = BernoulliSystem::fair();
        let e = CylinderUnion::empty(2);
        let p = Plain::new(&e, &sys).unwrap();
        let c: &SeqFn = &|n| n;
        let r = verify_oi(&p, &[c], 5).unwrap();
        assert!(r.summary.trivial_set);
        assert_eq!(r.summary.equal, 10);
        let f = CylinderUnion::full(2);
        let p = Plain::new(&f, &sys).unwrap();
        let r = verify_density1(&p, &[IntPolynomial::new(vec![0, 0, 1])], 10, Sense::Under).unwrap();
        assert_eq!(r.summary.equal, 10);
        assert!(find_cesaro_crossing(&p, 1, 5).is_err());
    }

    #[test]
    fn anchored_engine_agrees_with_plain() {
        use crate::anchored::AnchoredSpec;
        let sys = BernoulliSystem::fair();
        let x = Anchored::new(AnchoredSpec { marker_len: 3, sel_bits: 2, classes: vec![(4, 0, 3), (9, 1, 4)] });
        let p = Plain::new(&x.set, &sys).unwrap();
        for s in [vec![1], vec![-5], vec![3, 6], vec![2, 40], vec![-7, 9, 30]] {
            assert_eq!(x.correlation(&s).unwrap(), p.correlation(&s).unwrap(), "{s:?}");
        }
    }

    #[test]
    fn analytic_bound_examples() {
        let half = q(1, 2);
        assert_eq!(cesaro_analytic_bound(&half, 0).unwrap(), 1);
        let n = cesaro_analytic_bound(&half, 2).unwrap();
        assert!(cesaro_bound_value(&half, 2, n - 1) >= q(1, 4));
        assert!(cesaro_bound_value(&half, 2, n) < q(1, 4));
        assert_eq!(n, 7);
    }

    #[test]
    fn golden_rotation_demo() {
        let sys = RotationSystem::golden();
        let a = IntervalUnion::from_rationals(&[(q(0, 1), q(1, 2))]).unwrap();
        let d = rotation_no_ui_oi_demo(&a, 1000, &sys).unwrap();
        assert_eq!(d.report.records[0].relation, Relation::LT);
        assert_eq!(d.report.records[1].relation, Relation::GT);
        // one arc loses exactly ‖nα‖, so the strict form is an equality
        assert!(d.witnesses.iter().all(|w| w.correlation == w.bound && w.arc_pass));
        assert!(rotation_no_ui_oi_demo(&IntervalUnion::full(), 10, &sys).is_err());
    }

    #[test]
    fn csv_layout() {
        let sys = BernoulliSystem::fair();
        let a = CylinderUnion::word(2, 0, "11");
        let p = Plain::new(&a, &sys).unwrap();
        let c: &SeqFn = &|n| n;
        let r = verify_oi(&p, &[c], 1).unwrap();
        assert_eq!(r.to_csv(), "n,lhs_num,lhs_den,rhs_num,rhs_den,relation\n-1,1,8,1,16,GT\n1,1,8,1,16,GT\n");
    }
}
