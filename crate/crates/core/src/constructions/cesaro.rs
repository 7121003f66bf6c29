//! Cesàro over-independence along `kn` with an offset `M`.

use crate::verify::{sweep_shifts, Correlator};
use crate::{BernoulliSystem, Error, Rational, Result};

use super::design::{search, Found, Requirement};
use super::oi::{assemble, certify_schedule, require_fair, segment_checks};
use super::{Check, Construction, Kind};

#[derive(Clone, Debug)]
pub struct CesaroOptions {
    /// Largest `N` the averages are checked to; past the window they are constant.
    pub horizon: u64,
    /// Largest multiplier `k`; defaults to `K + 1`.
    pub k_max: Option<u64>,
}

impl Default for CesaroOptions {
    fn default() -> Self {
        CesaroOptions { horizon: 10_000, k_max: None }
    }
}

/// Partial sums `E_k(N) = Σ_{n=M}^{N+M-1} (μ(A ∩ T^{kn}A) − μ(A)²)` for
/// `N = 1..=horizon`, given the excess table on `[0, width)`.
fn excess_sums(excess: &[Rational], m: u64, k: u64, horizon: u64) -> Vec<Rational> {
    let mut out = Vec::with_capacity(horizon as usize);
    let mut acc = Rational::zero();
    for big_n in 1..=horizon {
        let idx = k * (m + big_n - 1);
        if let Some(e) = excess.get(idx as usize) {
            acc += e;
        }
        out.push(acc.clone());
    }
    out
}

/// `(1/N) Σ_{n=M}^{N+M-1} μ(A ∩ T^{kn}A) > μ(A)²` for every stage-allowed
/// `N`, with `L_k = 0` for `k ≤ k₀`.
pub fn build_cesaro_oi_set(
    sys: &BernoulliSystem,
    m: u64,
    k0: u64,
    k: usize,
    a: &Rational,
    opts: &CesaroOptions,
) -> Result<Construction> {
    require_fair(sys)?;
    if k0 == 0 {
        return Err(Error::Precondition("k₀ must be positive".into()));
    }
    let schedule = certify_schedule(a, k, 1, Kind::CesaroOi)?;
    let k_max = opts.k_max.unwrap_or(k as u64 + 1).max(1);
    let shifts = |n: i64| vec![n];
    let mut want = 8 * (k0 + k as u64) as i64 * (m as i64 + 1);
    loop {
        let req = Requirement { ns: (1..=want).collect(), shifts: &shifts, allowed: 0, start: want + want / 16 + 1 };
        let Found { design, bounds } = search(k, a, &req)?;
        let (mut out, cert) = assemble(Kind::CesaroOi, a, &design, &schedule.eps, schedule.checks.clone())?;
        let set = out.anchored.as_ref().unwrap();
        let mu2 = set.measure() * set.measure();
        let width = set.width();
        let ns: Vec<i64> = (0..width).collect();
        let excess: Vec<Rational> =
            sweep_shifts(set, &ns, |n| Ok(vec![n]))?.into_iter().map(|(_, v)| v - &mu2).collect();
        let mut checks = Vec::new();
        let mut table = Vec::new();
        for kk in 1..=k_max {
            let sums = excess_sums(&excess, m, kk, opts.horizon);
            // every N past this has the same excess
            let settled = ((width as u64).div_ceil(kk)).saturating_sub(m).max(1);
            let tail = excess_sums(&excess, m, kk, settled).pop().unwrap();
            let exact = (1..=opts.horizon)
                .rev()
                .take_while(|&n| sums[n as usize - 1].is_positive())
                .last()
                .unwrap_or(opts.horizon + 1);
            let l_k = if kk <= k0 {
                0
            } else if kk <= k as u64 {
                (design.window(kk as usize) as u64).min(exact.max(1))
            } else {
                exact
            };
            let from = l_k.max(1);
            let least = (from..=opts.horizon)
                .map(|n| &sums[n as usize - 1] / Rational::from_int(n as i64))
                .min()
                .map(|e| e + &mu2)
                .unwrap_or_else(|| mu2.clone());
            checks.push(Check::new(format!("min avg k={kk}, M={m}, {from} <= N <= {}", opts.horizon), least, "GT", mu2.clone()));
            checks.push(Check::new(format!("tail excess k={kk}, N >= {settled}"), tail, "GT", Rational::zero()));
            table.push((kk, l_k));
        }
        if checks.iter().all(|c| c.pass) || want > super::design::ANCHOR_WINDOW_GUARD / 4 {
            let rhs = cert.measure(k).pow(2);
            out.trace.checks.extend(segment_checks(&bounds, &rhs));
            out.trace.checks.extend(checks);
            out.trace.l_table = table;
            out.trace.horizon = opts.horizon;
            return Ok(out);
        }
        want *= 2;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;
    use crate::verify::cesaro_average;

    #[test]
    fn offset_case_holds_from_one() {
        let sys = BernoulliSystem::fair();
        let out = build_cesaro_oi_set(&sys, 5, 3, 4, &q(1, 32), &CesaroOptions { horizon: 300, k_max: Some(5) }).unwrap();
        assert!(out.trace.passed(), "{:?}", out.trace.first_failure());
        let a = out.anchored.as_ref().unwrap();
        let mu2 = a.measure() * a.measure();
        for k in 1..=3 {
            assert!(cesaro_average(a, 5, k, 1).unwrap() > mu2);
        }
        assert_eq!(out.trace.l_table[0], (1, 0));
    }
}
