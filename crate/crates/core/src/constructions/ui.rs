//! Density-1 under-independent sets from Rokhlin towers.
//!
//! Stage `n` carves `A_n` out of the levels `r_n ≤ iℓ_n < h_n − r_n` of a
//! tower of height `h_n`, inside `⋂_{j<n} D_j`. `F_n` is the full column over
//! the chosen base part `E_n` and `D_n = X \ F_n`, so every later stage avoids
//! the first `r_n` translates of `A_n`.

use num_bigint::BigUint;
use serde::Serialize;

use crate::cylinder::{independence_threshold, intersection_measure};
use crate::poly::{valid_family, IntPolynomial};
use crate::towers::{build_tower, carve_progression_subset, carve_tower_subset, projected_window, Tower};
use crate::verify::{verify_density1, Plain, Sense};
use crate::{BernoulliSystem, CylinderUnion, Error, Rational, Result};

use super::{choose_prime, disjointness_checks, measure_slack, Check, Construction, ConstructionTrace, Kind, StageRecord, TowerParams};

const ROOT_BITS: u32 = 32;
const SUM_BITS: u64 = 128;

/// The parameter system of the construction, with `S = Σ p^{−c}` replaced by
/// rational bounds `S_lower ≤ S ≤ S_upper`.
#[derive(Clone, Debug, Serialize)]
pub struct UiParameters {
    pub d: u32,
    pub polynomials: Vec<IntPolynomial>,
    pub q: u64,
    /// `(d+1)/d`
    pub c: Rational,
    /// Terms in the partial sum, `P = depth^d`.
    pub terms: u64,
    pub s_lower: Rational,
    pub s_upper: Rational,
    pub a: Rational,
    pub alpha: u64,
}

#[derive(Clone, Debug)]
pub struct UiOptions {
    pub horizon: u64,
    /// Allowed density of `n ≤ horizon` without the strict `<`.
    pub delta: Rational,
    /// Largest projected tower window a stage may use.
    pub window_guard: i64,
    /// Skip the per-`n` sweep when factored `n` alone decide the density check.
    pub skip_decided: bool,
}

impl Default for UiOptions {
    fn default() -> Self {
        UiOptions { horizon: 10_000, delta: Rational::new(1, 10), window_guard: 1 << 14, skip_decided: true }
    }
}

// ⌈x^{1/d}⌉ and ⌊x^{1/d}⌋ on a 2^-ROOT_BITS grid
fn root_bounds(x: u64, d: u32) -> (Rational, Rational) {
    if d == 1 {
        let r = Rational::from_int(x);
        return (r.clone(), r);
    }
    let scaled = BigUint::from(x) << (ROOT_BITS * d);
    let lo = scaled.nth_root(d);
    let hi = if lo.pow(d) == scaled { lo.clone() } else { &lo + 1u32 };
    (Rational::dyadic(lo, ROOT_BITS as u64), Rational::dyadic(hi, ROOT_BITS as u64))
}

// lower and upper bounds for p^{−c}
fn term_bounds(p: u64, d: u32) -> (Rational, Rational) {
    let (lo, hi) = root_bounds(p, d);
    let pr = Rational::from_int(p);
    ((&pr * hi).recip(), (&pr * lo).recip())
}

fn dyadic_floor(x: &Rational, up: bool) -> Rational {
    let scaled = x * Rational::dyadic(BigUint::from(1u32) << SUM_BITS, 0);
    let n = if up { scaled.ceil() } else { scaled.floor() };
    Rational::from_big(n, num_bigint::BigInt::from(1u32) << SUM_BITS)
}

impl UiParameters {
    /// Lower bound for `p^{−c}`, exact when `d = 1`.
    fn term(&self, p: u64) -> Rational {
        term_bounds(p, self.d).0
    }

    /// `a_p = a/(S p^c)`, taken with `S_upper` and an upper bound on `p^c` so
    /// that `Σ a_p ≤ a`.
    pub fn a_p(&self, p: u64) -> Rational {
        assert!(p >= 1);
        &self.a * self.term(p) / &self.s_upper
    }

    /// Block `p` with `αp ≤ n < α(p+1)`.
    pub fn block(&self, n: u64) -> u64 {
        n / self.alpha
    }

    /// `c_{αp+j} = a_{p+1}/α`.
    pub fn c_n(&self, n: u64) -> Rational {
        self.a_p(self.block(n) + 1) / Rational::from_int(self.alpha)
    }

    /// `m` with `α((q+1)^{dm} − 1) ≤ n < α((q+1)^{d(m+1)} − 1)`.
    pub fn m_n(&self, n: u64) -> u32 {
        let base = (self.q + 1).pow(self.d) as u128;
        let mut m = 0u32;
        let mut next = base;
        while (self.alpha as u128) * (next - 1) <= n as u128 {
            m += 1;
            next *= base;
        }
        m
    }

    /// `ℓ_n = q^{m_n}`.
    pub fn ell(&self, n: u64) -> u64 {
        self.q.pow(self.m_n(n))
    }

    /// `b_n = ℓ_n c_n`.
    pub fn b_n(&self, n: u64) -> Rational {
        self.c_n(n) * Rational::from_int(self.ell(n))
    }

    fn base_alpha_bound(&self) -> Rational {
        let d = Rational::from_int(self.d);
        (&d + Rational::one()) * d.pow(self.d + 1) * self.s_upper.pow(self.d) / self.a.pow(self.d)
    }

    /// Lower bound for `Σ_{n ≥ p+2} a_n` from the partial sums behind `S_lower`.
    fn tail_lower(&self, p: u64) -> Rational {
        let head: Rational = (1..=p + 1).map(|n| self.term(n)).sum();
        let rest = &self.s_lower - head;
        &self.a * rest.max(Rational::zero()) / &self.s_upper
    }

    /// `(d+1)a_{p+1}/α < (Σ_{n≥p+2} a_n)^{d+1}`, the closing estimate of block `p`.
    pub fn final_check(&self, p: u64) -> Check {
        let lhs = Rational::from_int(self.d + 1) * self.a_p(p + 1) / Rational::from_int(self.alpha);
        Check::new(format!("final estimate p={p}: (d+1)a_(p+1)/alpha < tail^(d+1)"), lhs, "LT", self.tail_lower(p).pow(self.d + 1))
    }

    /// Every parameter invariant for stages `n ≤ n_max`.
    pub fn checks(&self, n_max: u64) -> Vec<Check> {
        let qda = Rational::from_int(self.q * self.d as u64) * &self.a;
        let mut out = vec![
            Check::new("a < S_lower/(100qd)", self.a.clone(), "LT", &self.s_lower / Rational::from_int(100 * self.q * self.d as u64)),
            Check::new("alpha > (d+1)d^(d+1)S_upper^d/a^d", Rational::from_int(self.alpha), "GT", self.base_alpha_bound()),
            Check::new("S_lower <= S_upper", self.s_lower.clone(), "LE", self.s_upper.clone()),
        ];
        let sum_a: Rational = (1..=self.terms.min(4096)).map(|p| self.a_p(p)).sum();
        out.push(Check::new(format!("sum a_p (p <= {}) <= a", self.terms.min(4096)), sum_a, "LE", self.a.clone()));
        let mut sum_b = Rational::zero();
        for n in 1..=n_max {
            sum_b += &self.b_n(n);
        }
        out.push(Check::new(format!("sum b_n (n <= {n_max}) <= qda/S_lower"), sum_b, "LE", &qda / &self.s_lower));
        out
    }
}

/// Parameters for `polys` with `a = a_hint` and `S` bounded through
/// `P = depth^d` terms plus the tail majorant `∫_P^∞ x^{−c} dx = d/depth`.
pub fn ui_parameters(d: u32, polys: &[IntPolynomial], a_hint: &Rational, depth: u64) -> Result<UiParameters> {
    if d == 0 || polys.len() != d as usize {
        return Err(Error::Precondition(format!("need d = {} polynomials, got {}", d, polys.len())));
    }
    if !valid_family(polys) {
        return Err(Error::Precondition("polynomials must be non-constant with non-constant differences".into()));
    }
    if depth == 0 {
        return Err(Error::Precondition("depth must be positive".into()));
    }
    let q = choose_prime(&polys[0])?;
    let terms = depth.checked_pow(d).filter(|&t| t <= 1 << 22).ok_or_else(|| Error::Resource(format!("depth^{d} too large")))?;
    let (mut lo, mut hi) = (Rational::zero(), Rational::zero());
    for p in 1..=terms {
        let (l, h) = term_bounds(p, d);
        lo += &l;
        hi += &h;
        if d > 1 {
            lo = dyadic_floor(&lo, false);
            hi = dyadic_floor(&hi, true);
        }
    }
    let s_lower = lo;
    let s_upper = hi + Rational::new(d as i64, depth as i64);
    let bound = &s_lower / Rational::from_int(100 * q * d as u64);
    if !a_hint.is_positive() || *a_hint >= bound {
        return Err(Error::Precondition(format!("a = {a_hint} must lie in (0, S_lower/(100qd)) = (0, {:.6})", bound.to_f64())));
    }
    let mut params = UiParameters {
        d,
        polynomials: polys.to_vec(),
        q,
        c: Rational::new(d as i64 + 1, d as i64),
        terms,
        s_lower,
        s_upper,
        a: a_hint.clone(),
        alpha: 1,
    };
    // the asymptotic bound, raised until block 0 closes as well
    let base = params.base_alpha_bound();
    let block0 = Rational::from_int(d + 1) * params.a_p(1) / params.tail_lower(0).pow(d + 1);
    let need = base.max(block0);
    params.alpha = u64::try_from(need.floor() + 1).map_err(|_| Error::Resource("alpha overflows".into()))?;
    Ok(params)
}

struct Stage {
    a: CylinderUnion,
    r: u64,
}

fn tower_eps(n: usize) -> Rational {
    Rational::new(1, 1i64 << n.min(62))
}

fn poly_shifts(polys: &[IntPolynomial], n: i64) -> Result<Vec<i64>> {
    polys.iter().map(|p| p.eval_i64(n).ok_or_else(|| Error::Resource(format!("{p} overflows at {n}")))).collect()
}

/// Least `k ≥ 1` past which every gap among `0, p_1(k), …, p_d(k)` is at
/// least `w`, so the correlations of a set of window `w` factor exactly.
fn gap_threshold(polys: &[IntPolynomial], w: i64) -> Result<u64> {
    let ok = |k: i64| -> Result<bool> {
        let mut s = poly_shifts(polys, k)?;
        s.push(0);
        s.sort_unstable();
        Ok(s.windows(2).all(|v| v[1] - v[0] >= w))
    };
    let mut k = 1i64;
    while k < 1 << 40 {
        if ok(k)? {
            return Ok(k as u64);
        }
        k += 1;
    }
    Err(Error::Resource("no gap threshold".into()))
}

/// The truncated set `A = A_1 ∪ … ∪ A_K` and a trace with the stage conditions
/// as exact checks, the zero intersections between stages, the closing estimate and a
/// sweep of `μ(A ∩ ⋂ T^{p_i(n)}A)` against `μ(A)^{d+1}` for `n ≤ horizon`.
pub fn build_ui_set(sys: &BernoulliSystem, polys: &[IntPolynomial], params: &UiParameters, k: usize, opts: &UiOptions) -> Result<Construction> {
    if polys != params.polynomials.as_slice() {
        return Err(Error::Precondition("parameters were computed for other polynomials".into()));
    }
    if k == 0 {
        return Err(Error::Precondition("at least one stage".into()));
    }
    let alphabet = sys.alphabet() as u8;
    let d = params.d;
    let qda_s = Rational::from_int(10 * params.q * d as u64) * &params.a / &params.s_upper;
    let mut checks = params.checks(k as u64);
    let mut stages: Vec<Stage> = Vec::new();
    let mut records = Vec::new();
    // ⋂_{j<n} D_j and d_{n-1}
    let mut dcap = CylinderUnion::full(alphabet);
    let mut d_prev = Rational::one();
    for n in 1..=k {
        let cn = params.c_n(n as u64);
        let bn = params.b_n(n as u64);
        let ell = params.ell(n as u64);
        let eps = tower_eps(n);
        let (tower, r, kn, a_n, e_n) = if n == 1 {
            let t = build_tower(sys, 1, &eps)?;
            let a1 = carve_tower_subset(&t, &CylinderUnion::empty(alphabet), &cn, sys)?;
            (t, 0, 0, a1.clone(), a1)
        } else {
            let abar = CylinderUnion::union_all(alphabet, stages.iter().map(|s| s.a.clone()));
            let w = independence_threshold(&abar, &abar) as i64;
            let kn = gap_threshold(polys, w)?;
            let reach = poly_shifts(polys, kn as i64)?.into_iter().max().unwrap();
            let r = reach as u64 + 1;
            let h = (8 * r).max(2 * r + ell + 1);
            let projected = projected_window(sys, h, &eps);
            match projected {
                Some(g) if g <= opts.window_guard => {}
                _ => {
                    let shown = projected.map_or("unbounded".to_string(), |g| g.to_string());
                    return Err(Error::Resource(format!(
                        "stage {n}: tower of height {h} (r = {r}, k = {kn}) needs a base window of {shown}, guard {}",
                        opts.window_guard
                    )));
                }
            }
            let t = build_tower(sys, h, &eps)?;
            let prog = carve_progression_subset(&t, ell, r, &dcap, &cn, sys)?;
            // past k_n the stage-n family factors exactly
            let shifts = poly_shifts(polys, kn as i64)?;
            let mut parts: Vec<(&CylinderUnion, i64)> = vec![(&abar, 0)];
            parts.extend(shifts.iter().map(|&s| (&abar, s)));
            let joint = intersection_measure(&parts, sys)?;
            let mu = abar.measure(sys)?;
            checks.push(Check::new(format!("factorization n={n}: correlation of A_bar at k_n"), joint, "EQ", mu.pow(d + 1)));
            (t, r, kn, prog.a, prog.e)
        };
        // levels of F_n are disjoint, so μ(F_n) and μ(F_n ∩ ⋂D) add up level by level
        let mut hit = Rational::zero();
        for i in 0..tower.height as i64 {
            hit += &intersection_measure(&[(&e_n, i), (&dcap, 0)], sys)?;
        }
        let dn = &d_prev - hit;
        let achieved = a_n.measure(sys)?;
        let mb = tower.base.measure(sys)?;
        let me = e_n.measure(sys)?;
        let mf = &me * Rational::from_int(tower.height as i64);
        let mut rec = StageRecord::new(n, cn.clone(), &achieved, eps.clone(), kn);
        rec.tower = Some(TowerParams { h: tower.height, r, k: kn });
        let c = &mut rec.checks;
        c.push(Check::new(format!("mu(A{n}) <= c{n}"), achieved.clone(), "LE", cn.clone()));
        c.push(Check::new(format!("mu(A{n}) >= (1-slack) c{n}"), achieved.clone(), "GE", (Rational::one() - measure_slack()) * &cn));
        c.push(Check::new(format!("A{n} inside D_1..D_{}", n - 1), a_n.difference(&dcap).measure(sys)?, "EQ", Rational::zero()));
        c.push(tower_cover_check(n, &tower, &eps, sys)?);
        c.push(Check::new(format!("tower {n} levels disjoint"), Rational::from_int(tower.verify_disjoint(sys)? as i64), "EQ", Rational::one()));
        c.push(Check::new(format!("E{n} inside B{n}"), e_n.difference(&tower.base).measure(sys)?, "EQ", Rational::zero()));
        c.push(Check::new(format!("mu(E{n}) < 2 b{n} mu(B{n})/d{}", n - 1), me, "LT", Rational::from_int(2) * &bn * &mb / &d_prev));
        c.push(Check::new(format!("mu(F{n}) <= 10 b{n}"), mf, "LE", Rational::from_int(10) * &bn));
        if n < k {
            let f_n = CylinderUnion::union_all(alphabet, (0..tower.height).map(|i| e_n.shift(i as i64)));
            dcap = dcap.difference(&f_n);
        }
        c.push(Check::new(format!("d{n} > 1 - 10qad/S"), dn.clone(), "GT", Rational::one() - &qda_s));
        if n > 1 {
            let reach = poly_shifts(polys, kn as i64)?.into_iter().max().unwrap();
            c.push(Check::new(format!("r{n} > max p_i(k{n})"), Rational::from_int(r), "GT", Rational::from_int(reach)));
        }
        records.push(rec);
        stages.push(Stage { a: a_n, r });
        d_prev = dn;
    }
    // μ(TʲA_{i₁} ∩ A_{i₂}) = 0 for 0 ≤ j < r_{i₁}
    for (i1, s1) in stages.iter().enumerate() {
        for (i2, s2) in stages.iter().enumerate().skip(i1 + 1) {
            let mut worst = Rational::zero();
            for j in 0..s1.r as i64 {
                worst = worst.max(intersection_measure(&[(&s1.a, j), (&s2.a, 0)], sys)?);
            }
            checks.push(Check::new(format!("zero overlap: T^j A{} & A{}, j < {}", i1 + 1, i2 + 1, s1.r), worst, "EQ", Rational::zero()));
        }
    }
    let mut blocks: Vec<u64> = (1..=k as u64).map(|n| params.block(n)).collect();
    blocks.dedup();
    checks.extend(blocks.into_iter().map(|p| params.final_check(p)));
    let sets: Vec<CylinderUnion> = stages.into_iter().map(|s| s.a).collect();
    let set = CylinderUnion::union_all(alphabet, sets.iter().cloned());
    checks.extend(disjointness_checks(&sets, &set, sys)?);
    let measure = set.measure(sys)?;
    let (exceptional, good, name) = density_sweep(&set, polys, opts, sys)?;
    checks.push(Check::new(name, good, "GE", Rational::one() - &opts.delta));
    let tail_mass = &params.a - (1..=k as u64).map(|n| params.c_n(n)).sum::<Rational>();
    let trace = ConstructionTrace {
        kind: Kind::Density1Ui,
        a: params.a.clone(),
        stages: records,
        measure,
        tail_mass,
        horizon: opts.horizon,
        union: None,
        checks,
        exceptional,
        l_table: Vec::new(),
    };
    Ok(Construction { set, stages: sets, anchored: None, trace })
}

/// Exceptional `n ≤ horizon` and the good density. An `n` whose gaps among
/// `0, p_i(n)` all reach the set window factors exactly to `μ(A)^{d+1}`, so
/// it is exceptional without evaluation. When those alone already push the
/// density below `1 − δ` the remaining `n` are left unswept and the check
/// records the upper bound.
fn density_sweep(set: &CylinderUnion, polys: &[IntPolynomial], opts: &UiOptions, sys: &BernoulliSystem) -> Result<(Vec<i64>, Rational, String)> {
    let h = opts.horizon as i64;
    let w = independence_threshold(set, set) as i64;
    let mut factored = Vec::new();
    for n in 1..=h {
        let mut s = poly_shifts(polys, n)?;
        s.push(0);
        s.sort_unstable();
        if s.windows(2).all(|v| v[1] - v[0] >= w) {
            factored.push(n);
        }
    }
    let bound = Rational::new(h - factored.len() as i64, h);
    if opts.skip_decided && bound < Rational::one() - &opts.delta {
        let name = format!("good density over n <= {h} (at most; {} n below the window unswept)", h - factored.len() as i64);
        return Ok((factored, bound, name));
    }
    let report = verify_density1(&Plain::new(set, sys)?, polys, h, Sense::Under)?;
    let exceptional = report.summary.exceptional;
    let good = Rational::new(h - exceptional.len() as i64, h);
    Ok((exceptional, good, format!("good density over n <= {h}")))
}

fn tower_cover_check(n: usize, t: &Tower, eps: &Rational, sys: &BernoulliSystem) -> Result<Check> {
    Ok(Check::new(format!("mu(C{n}) > 1 - eps{n}"), t.coverage(sys)?, "GT", Rational::one() - eps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;

    fn linear() -> Vec<IntPolynomial> {
        vec![IntPolynomial::identity()]
    }

    #[test]
    fn parameters_satisfy_invariants() {
        let p = ui_parameters(1, &linear(), &q(1, 128), 1000).unwrap();
        assert_eq!(p.q, 2);
        assert_eq!(p.c, q(2, 1));
        assert!(&p.s_upper - &p.s_lower <= q(1, 1000));
        // π²/6 between the bounds
        assert!(p.s_lower.to_f64() < 1.644_934_0 && p.s_upper.to_f64() > 1.644_934_1);
        assert!(p.checks(3).iter().all(|c| c.pass));
        assert!(p.final_check(0).pass);
        assert_eq!(p.c_n(1), p.a_p(1) / Rational::from_int(p.alpha));
        assert_eq!(p.c_n(p.alpha), p.a_p(2) / Rational::from_int(p.alpha));
        assert_eq!(p.ell(1), 1);
        assert_eq!(p.ell(2 * p.alpha - 1), 1);
        assert_eq!(p.ell(2 * p.alpha), 2);
        assert_eq!(p.b_n(2 * p.alpha), p.c_n(2 * p.alpha) * q(2, 1));
        assert!(ui_parameters(1, &linear(), &q(1, 100), 1000).is_err());
    }

    #[test]
    fn two_variable_bounds_bracket_s() {
        let polys = vec![IntPolynomial::identity(), IntPolynomial::new(vec![0, 2])];
        let p = ui_parameters(2, &polys, &q(1, 1024), 20).unwrap();
        assert!(p.s_lower < p.s_upper);
        assert!(p.checks(2).iter().all(|c| c.pass));
    }

    #[test]
    fn two_stages_meet_the_stage_conditions() {
        let sys = BernoulliSystem::fair();
        let p = ui_parameters(1, &linear(), &q(1, 128), 200).unwrap();
        let out = build_ui_set(&sys, &linear(), &p, 2, &UiOptions { horizon: 40, ..UiOptions::default() }).unwrap();
        let failing: Vec<&str> = out.trace.all_checks().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
        assert!(failing.iter().all(|n| n.starts_with("good density")), "{failing:?}");
        assert_eq!(out.stages.len(), 2);
    }

    #[test]
    fn third_stage_exceeds_the_guard() {
        let sys = BernoulliSystem::fair();
        let p = ui_parameters(1, &linear(), &q(1, 128), 200).unwrap();
        let e = build_ui_set(&sys, &linear(), &p, 3, &UiOptions { horizon: 50, ..UiOptions::default() }).err().unwrap();
        assert!(matches!(e, Error::Resource(_)), "{e}");
    }
}
