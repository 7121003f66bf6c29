use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::One;
use serde::{Deserialize, Serialize};

use crate::rational::Rational;
use crate::Error;

/// Two-sided full shift on `k` symbols with an i.i.d. product measure.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Rational>", into = "Vec<Rational>")]
pub struct BernoulliSystem {
    probs: Vec<Rational>,
    // probs[s] = weights[s] / denom
    weights: Vec<BigUint>,
    denom: BigUint,
    denom_log2: Option<u64>,
}

impl BernoulliSystem {
    pub fn new(probs: Vec<Rational>) -> Result<Self, Error> {
        if probs.len() < 2 || probs.len() > 255 {
            return Err(Error::InvalidSystem("alphabet size must be in 2..=255".into()));
        }
        if probs.iter().any(|p| !p.is_positive()) {
            return Err(Error::InvalidSystem("probabilities must be positive".into()));
        }
        if probs.iter().sum::<Rational>() != Rational::one() {
            return Err(Error::InvalidSystem("probabilities must sum to 1".into()));
        }
        let mut denom = BigUint::one();
        for p in &probs {
            let d = p.denom().magnitude();
            denom = denom.lcm(d);
        }
        let weights = probs
            .iter()
            .map(|p| p.numer().magnitude() * (&denom / p.denom().magnitude()))
            .collect();
        let denom_log2 = if denom.count_ones() == 1 { Some(denom.trailing_zeros().unwrap_or(0)) } else { None };
        Ok(BernoulliSystem { probs, weights, denom, denom_log2 })
    }

    /// Fair coin.
    pub fn fair() -> Self {
        Self::new(vec![Rational::new(1, 2), Rational::new(1, 2)]).unwrap()
    }

    pub fn uniform(k: usize) -> Self {
        Self::new(vec![Rational::new(1, k as i64); k]).unwrap()
    }

    pub fn alphabet(&self) -> usize {
        self.probs.len()
    }

    pub fn probs(&self) -> &[Rational] {
        &self.probs
    }

    pub fn prob(&self, s: u8) -> &Rational {
        &self.probs[s as usize]
    }

    pub(crate) fn weights(&self) -> &[BigUint] {
        &self.weights
    }

    pub(crate) fn denom(&self) -> &BigUint {
        &self.denom
    }

    pub(crate) fn denom_log2(&self) -> Option<u64> {
        self.denom_log2
    }

    /// Measure of a single word, independent of its position.
    pub fn word_measure(&self, word: &[u8]) -> Rational {
        word.iter().fold(Rational::one(), |acc, &s| acc * &self.probs[s as usize])
    }

    pub(crate) fn weight_is_one(&self, s: usize) -> bool {
        self.weights[s].is_one()
    }
}

impl TryFrom<Vec<Rational>> for BernoulliSystem {
    type Error = Error;
    fn try_from(v: Vec<Rational>) -> Result<Self, Error> {
        Self::new(v)
    }
}

impl From<BernoulliSystem> for Vec<Rational> {
    fn from(s: BernoulliSystem) -> Self {
        s.probs
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;

    #[test]
    fn rejects_bad_distributions() {
        assert!(BernoulliSystem::new(vec![q(1, 1)]).is_err());
        assert!(BernoulliSystem::new(vec![q(1, 2), q(1, 3)]).is_err());
        assert!(BernoulliSystem::new(vec![q(0, 1), q(1, 1)]).is_err());
    }

    #[test]
    fn common_denominator() {
        let s = BernoulliSystem::new(vec![q(1, 3), q(2, 3)]).unwrap();
        assert_eq!(s.denom(), &BigUint::from(3u32));
        assert_eq!(s.denom_log2(), None);
        let f = BernoulliSystem::fair();
        assert_eq!(f.denom_log2(), Some(1));
        assert_eq!(f.word_measure(&[1, 0, 1]), q(1, 8));
        assert_eq!(s.word_measure(&[0, 1]), q(2, 9));
    }
}
