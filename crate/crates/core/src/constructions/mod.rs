//! The four constructions, each returning the truncated set and a trace that
//! stores every inequality it relies on as exact rationals.

mod cesaro;
mod design;
mod oi;
mod ui;

use serde::Serialize;

use crate::anchored::{Anchored, AnchoredSpec};
use crate::poly::IntPolynomial;
use crate::verify::{Correlator, Plain};
use crate::{BernoulliSystem, CylinderUnion, Error, Rational, Result};

pub use cesaro::{build_cesaro_oi_set, CesaroOptions};
pub use oi::{build_density1_oi_set, build_oi_set_mixing, Density1Options, OiOptions};
pub use ui::{build_ui_set, ui_parameters, UiOptions, UiParameters};

/// Relative undershoot allowed for stage measures.
pub fn measure_slack() -> Rational {
    Rational::new(1, 16)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    OiMixing,
    Density1Oi,
    Density1Ui,
    CesaroOi,
}

/// One stored inequality. `relation` is the asserted one.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub lhs: Rational,
    pub rhs: Rational,
    pub relation: &'static str,
    pub pass: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, lhs: Rational, relation: &'static str, rhs: Rational) -> Self {
        let pass = match relation {
            "GT" => lhs > rhs,
            "GE" => lhs >= rhs,
            "LT" => lhs < rhs,
            "LE" => lhs <= rhs,
            "EQ" => lhs == rhs,
            _ => unreachable!("unknown relation {relation}"),
        };
        Check { name: name.into(), lhs, rhs, relation, pass }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TowerParams {
    pub h: u64,
    pub r: u64,
    pub k: u64,
}

/// Anchored description of a stage, enough to rebuild it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SetSpec {
    pub marker_len: u32,
    pub sel_bits: u32,
    /// `(t_end, lo, hi)`
    pub classes: Vec<(i64, u64, u64)>,
}

impl From<&AnchoredSpec> for SetSpec {
    fn from(s: &AnchoredSpec) -> Self {
        SetSpec { marker_len: s.marker_len, sel_bits: s.sel_bits, classes: s.classes.clone() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StageRecord {
    pub stage: usize,
    pub target: Rational,
    pub achieved_num: String,
    pub achieved_den: String,
    pub epsilon: Rational,
    #[serde(rename = "N_threshold")]
    pub n_threshold: u64,
    pub tower: Option<TowerParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub set: Option<SetSpec>,
    pub checks: Vec<Check>,
}

impl StageRecord {
    pub fn new(stage: usize, target: Rational, achieved: &Rational, epsilon: Rational, n_threshold: u64) -> Self {
        StageRecord {
            stage,
            target,
            achieved_num: achieved.numer().to_string(),
            achieved_den: achieved.denom().to_string(),
            epsilon,
            n_threshold,
            tower: None,
            set: None,
            checks: Vec::new(),
        }
    }

    pub fn achieved(&self) -> Rational {
        Rational::new(
            self.achieved_num.parse::<num_bigint::BigInt>().unwrap(),
            self.achieved_den.parse::<num_bigint::BigInt>().unwrap(),
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConstructionTrace {
    pub kind: Kind,
    pub a: Rational,
    pub stages: Vec<StageRecord>,
    pub measure: Rational,
    /// `Σ_{i>K} a_i`, the target mass left out by truncation.
    pub tail_mass: Rational,
    /// Every `|n|` up to this is covered by the certificate.
    pub horizon: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub union: Option<SetSpec>,
    pub checks: Vec<Check>,
    /// `n` in the verified range the certificate does not cover.
    pub exceptional: Vec<i64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub l_table: Vec<(u64, u64)>,
}

impl ConstructionTrace {
    pub fn all_checks(&self) -> impl Iterator<Item = &Check> {
        self.stages.iter().flat_map(|s| s.checks.iter()).chain(self.checks.iter())
    }

    pub fn passed(&self) -> bool {
        self.all_checks().all(|c| c.pass)
    }

    pub fn first_failure(&self) -> Option<&Check> {
        self.all_checks().find(|c| !c.pass)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serializes")
    }
}

/// A finished construction.
pub struct Construction {
    pub set: CylinderUnion,
    pub stages: Vec<CylinderUnion>,
    /// Present for the anchored constructions, which the fast correlation path understands.
    pub anchored: Option<Anchored>,
    pub trace: ConstructionTrace,
}

impl Construction {
    pub fn correlator<'a>(&'a self, sys: &'a BernoulliSystem) -> Result<Box<dyn Correlator + 'a>> {
        match &self.anchored {
            Some(a) if *sys == BernoulliSystem::fair() => Ok(Box::new(a)),
            _ => Ok(Box::new(Plain::new(&self.set, sys)?)),
        }
    }
}

impl Correlator for &Anchored {
    fn measure(&self) -> &Rational {
        (*self).measure()
    }

    fn width(&self) -> i64 {
        (**self).width()
    }

    fn cluster(&self, shifts: &[i64]) -> Result<Rational> {
        (**self).cluster(shifts)
    }
}

/// Smallest prime `q` with `p₁ mod q` not the zero polynomial.
pub fn choose_prime(p1: &IntPolynomial) -> Result<u64> {
    if !p1.is_nonconstant() {
        return Err(Error::Precondition(format!("{p1} is constant")));
    }
    Ok((2u64..).filter(|&q| is_prime(q)).find(|&q| !p1.vanishes_mod(q)).unwrap())
}

fn is_prime(q: u64) -> bool {
    q >= 2 && (2..).take_while(|d| d * d <= q).all(|d| q % d != 0)
}

/// `a_i = a/(i(i+1))`, so `Σ_{i≤k} a_i = a − a/(k+1)`.
pub fn stage_target(a: &Rational, i: usize) -> Rational {
    a / Rational::from_int((i * (i + 1)) as i64)
}

#[derive(Clone, Debug, Serialize)]
pub struct EpsilonSchedule {
    pub eps: Vec<Rational>,
    pub checks: Vec<Check>,
}

impl EpsilonSchedule {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// `ε_i = a/2^{i+4}` with the inequalities the kind's proof needs of it.
pub fn schedule_epsilons(a: &Rational, k: usize, d: u32, kind: Kind) -> Result<EpsilonSchedule> {
    if !a.is_positive() || *a >= Rational::one() {
        return Err(Error::Precondition(format!("a = {a} not in (0,1)")));
    }
    if k == 0 {
        return Err(Error::Precondition("at least one stage".into()));
    }
    let eps: Vec<Rational> = (1..=k).map(|i| a / Rational::from_int(1i64 << (i + 4).min(62))).collect();
    let one = Rational::one();
    let ad = a.pow(d + 1);
    let mut checks = Vec::new();
    match kind {
        Kind::OiMixing | Kind::Density1Oi | Kind::CesaroOi => {
            let d = if kind == Kind::CesaroOi { 1 } else { d };
            let ad = a.pow(d + 1);
            let half = a / Rational::from_int(2);
            checks.push(Check::new("stage 1 branch (1-e1)a/2 > a^(d+1)", (&one - &eps[0]) * half, "GT", ad.clone()));
            for i in 1..=k {
                let ki = Rational::from_int(i as i64);
                let head = a - a / (&ki + &one);
                let tail = a / (&ki + Rational::from_int(2));
                let lhs = (&one - &eps[i - 1]) * (head.pow(d + 1) + tail);
                checks.push(Check::new(format!("chain k={i}"), lhs, "GT", ad.clone()));
            }
        }
        Kind::Density1Ui => {
            let _ = ad;
        }
    }
    Ok(EpsilonSchedule { eps, checks })
}

/// Pairwise disjointness of the stages and additivity of the measure.
pub(crate) fn disjointness_checks(stages: &[CylinderUnion], union: &CylinderUnion, sys: &BernoulliSystem) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    for i in 0..stages.len() {
        for j in i + 1..stages.len() {
            let m = stages[i].intersect(&stages[j]).measure(sys)?;
            checks.push(Check::new(format!("mu(A{} & A{})", i + 1, j + 1), m, "EQ", Rational::zero()));
        }
    }
    let sum: Rational = stages.iter().map(|s| s.measure(sys)).collect::<Result<Vec<_>>>()?.into_iter().sum();
    checks.push(Check::new("mu(A) = sum mu(A_i)", union.measure(sys)?, "EQ", sum));
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;

    #[test]
    fn primes_for_polynomials() {
        assert_eq!(choose_prime(&IntPolynomial::new(vec![0, 1])).unwrap(), 2);
        assert_eq!(choose_prime(&IntPolynomial::new(vec![0, 2])).unwrap(), 3);
        assert_eq!(choose_prime(&IntPolynomial::new(vec![0, 0, 1])).unwrap(), 2);
        assert!(choose_prime(&IntPolynomial::new(vec![5])).is_err());
    }

    #[test]
    fn schedules() {
        let s = schedule_epsilons(&q(1, 32), 8, 1, Kind::CesaroOi).unwrap();
        assert!(s.passed());
        assert_eq!(s.eps[0], q(1, 1024));
        assert!(!schedule_epsilons(&q(1, 2), 3, 1, Kind::OiMixing).unwrap().passed());
        let one = schedule_epsilons(&q(1, 32), 1, 2, Kind::OiMixing).unwrap();
        assert!(one.checks[0].pass);
    }
}
