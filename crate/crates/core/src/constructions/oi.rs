//! Over-independent sets for mixing sequences and for polynomial families.

use crate::anchored::Anchored;
use crate::poly::{valid_family, IntPolynomial};
use crate::verify::SeqFn;
use crate::{BernoulliSystem, Error, Rational, Result};

use super::design::{search, segments, Bound, Certifier, Design, Found, Requirement};
use super::{
    disjointness_checks, measure_slack, schedule_epsilons, stage_target, Check, Construction, ConstructionTrace, Kind,
    SetSpec, StageRecord,
};

#[derive(Clone, Debug)]
pub struct OiOptions {
    /// Least horizon the certificate must cover.
    pub horizon: u64,
}

impl Default for OiOptions {
    fn default() -> Self {
        OiOptions { horizon: 1000 }
    }
}

#[derive(Clone, Debug)]
pub struct Density1Options {
    pub horizon: u64,
    /// Largest allowed fraction of uncertified `n ≤ horizon`.
    pub delta: Rational,
}

impl Default for Density1Options {
    fn default() -> Self {
        Density1Options { horizon: 10_000, delta: Rational::new(1, 100) }
    }
}

pub(super) fn require_fair(sys: &BernoulliSystem) -> Result<()> {
    if *sys != BernoulliSystem::fair() {
        return Err(Error::Precondition("the anchored constructions run on Bernoulli(1/2,1/2)".into()));
    }
    Ok(())
}

pub(super) fn certify_schedule(a: &Rational, k: usize, d: u32, kind: Kind) -> Result<super::EpsilonSchedule> {
    let s = schedule_epsilons(a, k, d, kind)?;
    if let Some(c) = s.checks.iter().find(|c| !c.pass) {
        return Err(Error::Unreachable(format!("{}: {} {} {} fails", c.name, c.lhs, c.relation, c.rhs)));
    }
    Ok(s)
}

/// Stage records, sets and the checks every anchored construction shares.
pub(super) fn assemble<'d>(
    kind: Kind,
    a: &Rational,
    design: &'d Design,
    eps: &[Rational],
    mut checks: Vec<Check>,
) -> Result<(Construction, Certifier<'d>)> {
    let sys = BernoulliSystem::fair();
    let k = design.stages();
    let cert = Certifier::exact(design);
    let mut stages = Vec::new();
    let mut records = Vec::new();
    for i in 1..=k {
        let spec = design.stage(i);
        let set = spec.build();
        let achieved = set.measure(&sys)?;
        let target = stage_target(a, i);
        let mut rec = StageRecord::new(i, target.clone(), &achieved, eps[i - 1].clone(), design.window(i) as u64);
        rec.set = Some(SetSpec::from(&spec));
        rec.checks.push(Check::new(format!("mu(A{i}) <= a{i}"), achieved.clone(), "LE", target.clone()));
        let floor = (Rational::one() - measure_slack()) * &target;
        rec.checks.push(Check::new(format!("mu(A{i}) >= (1-slack) a{i}"), achieved, "GE", floor));
        records.push(rec);
        stages.push(set);
    }
    let union_spec = design.union(0, k);
    let anchored = Anchored::new(union_spec.clone());
    let set = anchored.set.clone();
    checks.extend(disjointness_checks(&stages, &set, &sys)?);
    checks.push(Check::new("mu(A) closed form", anchored.measure().clone(), "EQ", cert.measure(k).clone()));
    let tail_mass = a / Rational::from_int(k as i64 + 1);
    let trace = ConstructionTrace {
        kind,
        a: a.clone(),
        stages: records,
        measure: anchored.measure().clone(),
        tail_mass,
        horizon: 0,
        union: Some(SetSpec::from(&union_spec)),
        checks,
        exceptional: Vec::new(),
        l_table: Vec::new(),
    };
    Ok((Construction { set, stages, anchored: Some(anchored), trace }, cert))
}

/// One check per run of certified `n` sharing a stage split.
pub(super) fn segment_checks(bounds: &[Bound], rhs: &Rational) -> Vec<Check> {
    segments(bounds)
        .into_iter()
        .map(|(lo, hi, ks, least)| {
            let ks: Vec<String> = ks.iter().map(|k| format!("C{k}")).collect();
            Check::new(format!("n in [{lo},{hi}] split {}", ks.join("*")), least, "GT", rhs.clone())
        })
        .collect()
}

fn check_sequences(seqs: &[&SeqFn], horizon: i64) -> Result<()> {
    if seqs.is_empty() {
        return Err(Error::Precondition("need d ≥ 1 sequences".into()));
    }
    for (i, c) in seqs.iter().enumerate() {
        let first = c(1);
        if (1..=horizon.max(2)).all(|n| c(n) == first) {
            return Err(Error::Precondition(format!("sequence {} is constant on the sampled range", i + 1)));
        }
        for c2 in &seqs[i + 1..] {
            let d0 = c(1) - c2(1);
            if (1..=horizon.max(2)).all(|n| c(n) - c2(n) == d0) {
                return Err(Error::Precondition("two sequences differ by a constant".into()));
            }
        }
    }
    Ok(())
}

/// `A = A₁ ∪ … ∪ A_K` with `μ(A ∩ ⋂ T^{c_{i,n}}A) > μ(A)^{d+1}` certified for
/// every `1 ≤ |n| ≤ H(K)`, where `H(K) ≥ opts.horizon`.
pub fn build_oi_set_mixing(
    sys: &BernoulliSystem,
    seqs: &[&SeqFn],
    k: usize,
    a: &Rational,
    opts: &OiOptions,
) -> Result<Construction> {
    require_fair(sys)?;
    let h = opts.horizon as i64;
    check_sequences(seqs, h)?;
    let d = seqs.len() as u32;
    let schedule = certify_schedule(a, k, d, Kind::OiMixing)?;
    let shifts = |n: i64| -> Vec<i64> { seqs.iter().map(|c| c(n)).collect() };
    let ns: Vec<i64> = (-h..=h).filter(|&n| n != 0).collect();
    let spread = ns
        .iter()
        .map(|&n| {
            let s = shifts(n);
            s.iter().chain([0].iter()).max().unwrap() - s.iter().chain([0].iter()).min().unwrap()
        })
        .max()
        .unwrap_or(1);
    let req = Requirement { ns, shifts: &shifts, allowed: 0, start: spread + spread / 16 + 1 };
    let Found { design, mut bounds } = search(k, a, &req)?;
    let (mut out, mut cert) = assemble(Kind::OiMixing, a, &design, &schedule.eps, schedule.checks.clone())?;
    // push the certified horizon as far as the certificate reaches
    let limit = design.window(k);
    let mut horizon = h;
    while horizon < limit {
        let n = horizon + 1;
        let (lo, hi) = (cert.bound(-n, &shifts(-n)), cert.bound(n, &shifts(n)));
        if !(lo.certified && hi.certified) {
            break;
        }
        bounds.push(lo);
        bounds.push(hi);
        horizon = n;
    }
    bounds.sort_by_key(|b| b.n);
    let rhs = cert.measure(k).pow(d + 1);
    out.trace.checks.extend(segment_checks(&bounds, &rhs));
    out.trace.horizon = horizon as u64;
    Ok(out)
}

/// `A` whose polynomial correlations exceed `μ(A)^{d+1}` for all `n ≤ horizon`
/// outside an explicit exceptional set of density at most `delta`.
pub fn build_density1_oi_set(
    sys: &BernoulliSystem,
    polys: &[IntPolynomial],
    k: usize,
    a: &Rational,
    opts: &Density1Options,
) -> Result<Construction> {
    require_fair(sys)?;
    if !valid_family(polys) {
        return Err(Error::Precondition("polynomials must be non-constant with non-constant differences".into()));
    }
    let d = polys.len() as u32;
    let schedule = certify_schedule(a, k, d, Kind::Density1Oi)?;
    let h = opts.horizon as i64;
    for p in polys {
        if p.eval_i64(h).is_none() || p.eval_i64(-h).is_none() {
            return Err(Error::Resource(format!("{p} overflows on the horizon")));
        }
    }
    let shifts = |n: i64| -> Vec<i64> { polys.iter().map(|p| p.eval_i64(n).unwrap()).collect() };
    let ns: Vec<i64> = (1..=h).collect();
    // the certificate needs the least gap among {0, p_i(n)} inside the window
    let gap = ns
        .iter()
        .map(|&n| {
            let key = crate::verify::normalize(&shifts(n));
            key.windows(2).map(|w| w[1] - w[0]).min().unwrap_or(1)
        })
        .max()
        .unwrap_or(1)
        .min(super::design::ANCHOR_WINDOW_GUARD / 2);
    let allowed = (&opts.delta * Rational::from_int(h)).floor();
    let allowed = usize::try_from(allowed).unwrap_or(0);
    let req = Requirement { ns, shifts: &shifts, allowed, start: gap + gap / 16 + 1 };
    let Found { design, bounds } = search(k, a, &req)?;
    let (mut out, cert) = assemble(Kind::Density1Oi, a, &design, &schedule.eps, schedule.checks.clone())?;
    let rhs = cert.measure(k).pow(d + 1);
    out.trace.checks.extend(segment_checks(&bounds, &rhs));
    let exceptional: Vec<i64> = bounds.iter().filter(|b| !b.certified).map(|b| b.n).collect();
    let bound = &opts.delta * Rational::from_int(h);
    out.trace.checks.push(Check::new(
        format!("|E| <= delta N, N = {h}"),
        Rational::from_int(exceptional.len() as i64),
        "LE",
        bound,
    ));
    out.trace.exceptional = exceptional;
    out.trace.horizon = h as u64;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;
    use crate::verify::{verify_oi, Correlator};
    use crate::CylinderUnion;

    #[test]
    fn small_mixing_construction_is_certified() {
        let sys = BernoulliSystem::fair();
        let c: &SeqFn = &|n| n;
        let out = build_oi_set_mixing(&sys, &[c], 3, &q(1, 32), &OiOptions { horizon: 60 }).unwrap();
        assert!(out.trace.passed(), "{:?}", out.trace.first_failure());
        assert!(out.trace.horizon >= 60);
        let a = out.anchored.as_ref().unwrap();
        let r = verify_oi(a, &[c], out.trace.horizon as i64).unwrap();
        assert_eq!(r.failures(), 0);
        assert!(a.width() > 0);
    }

    #[test]
    fn large_a_is_a_certified_failure() {
        let sys = BernoulliSystem::fair();
        let c: &SeqFn = &|n| n;
        let e = build_oi_set_mixing(&sys, &[c], 3, &q(1, 2), &OiOptions::default()).err().unwrap();
        assert!(matches!(e, Error::Unreachable(_)));
        let flat: &SeqFn = &|_| 3;
        assert!(build_oi_set_mixing(&sys, &[flat], 3, &q(1, 32), &OiOptions::default()).is_err());
    }

    #[test]
    fn constant_difference_family_rejected() {
        let sys = BernoulliSystem::fair();
        let p = IntPolynomial::new(vec![0, 0, 1]);
        assert!(build_density1_oi_set(&sys, &[p.clone(), p], 3, &q(1, 32), &Density1Options::default()).is_err());
    }

    #[test]
    fn stage_union_is_the_set() {
        let sys = BernoulliSystem::fair();
        let c: &SeqFn = &|n| n;
        let out = build_oi_set_mixing(&sys, &[c], 2, &q(1, 32), &OiOptions { horizon: 20 }).unwrap();
        let u = CylinderUnion::union_all(2, out.stages.iter().cloned());
        assert_eq!(u, out.set);
    }
}
