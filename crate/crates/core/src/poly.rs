use std::fmt;

use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

/// Integer polynomial `c₀ + c₁x + … + c_m x^m`.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "Vec<i64>", into = "Vec<i64>")]
pub struct IntPolynomial {
    coeffs: Vec<i64>,
}

impl IntPolynomial {
    pub fn new(mut coeffs: Vec<i64>) -> Self {
        while coeffs.last() == Some(&0) {
            coeffs.pop();
        }
        IntPolynomial { coeffs }
    }

    /// `x`
    pub fn identity() -> Self {
        Self::new(vec![0, 1])
    }

    pub fn coeffs(&self) -> &[i64] {
        &self.coeffs
    }

    /// Degree, with the zero polynomial reported as 0.
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn is_nonconstant(&self) -> bool {
        self.coeffs.len() >= 2
    }

    pub fn eval(&self, n: i64) -> BigInt {
        let x = BigInt::from(n);
        self.coeffs.iter().rev().fold(BigInt::zero(), |acc, &c| acc * &x + c)
    }

    /// Value as an `i64` shift, or `None` if it does not fit.
    pub fn eval_i64(&self, n: i64) -> Option<i64> {
        self.eval(n).to_i64()
    }

    pub fn sub(&self, other: &Self) -> Self {
        let len = self.coeffs.len().max(other.coeffs.len());
        let c = (0..len)
            .map(|i| self.coeffs.get(i).copied().unwrap_or(0) - other.coeffs.get(i).copied().unwrap_or(0))
            .collect();
        Self::new(c)
    }

    /// Whether every coefficient vanishes modulo `p`.
    pub fn vanishes_mod(&self, p: u64) -> bool {
        self.coeffs.iter().all(|&c| BigInt::from(c) % p == BigInt::zero())
    }

    /// Largest `|p(n)|` over `|n| ≤ bound`.
    pub fn max_abs_on(&self, bound: i64) -> BigInt {
        (-bound..=bound).map(|n| self.eval(n).abs()).max().unwrap_or_default()
    }
}

/// Every member non-constant and every pairwise difference non-constant.
pub fn valid_family(polys: &[IntPolynomial]) -> bool {
    !polys.is_empty()
        && polys.iter().all(|p| p.is_nonconstant())
        && polys
            .iter()
            .enumerate()
            .all(|(i, p)| polys[i + 1..].iter().all(|r| p.sub(r).is_nonconstant()))
}

impl From<Vec<i64>> for IntPolynomial {
    fn from(v: Vec<i64>) -> Self {
        Self::new(v)
    }
}

impl From<IntPolynomial> for Vec<i64> {
    fn from(p: IntPolynomial) -> Self {
        p.coeffs
    }
}

impl fmt::Debug for IntPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for IntPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut terms = Vec::new();
        for (i, &c) in self.coeffs.iter().enumerate().rev() {
            if c == 0 {
                continue;
            }
            terms.push(match i {
                0 => format!("{c}"),
                1 => format!("{c}n"),
                _ => format!("{c}n^{i}"),
            });
        }
        if terms.is_empty() {
            write!(f, "0")
        } else {
            write!(f, "{}", terms.join(" + "))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluation_is_unbounded() {
        let p = IntPolynomial::new(vec![1, 0, 0, 1]);
        assert_eq!(p.eval(3_000_000), BigInt::from(3_000_000i64).pow(3) + 1);
        assert_eq!(p.eval_i64(3_000_000), None);
        assert_eq!(IntPolynomial::new(vec![0, 0, 1]).eval_i64(-7), Some(49));
    }

    #[test]
    fn family_checks() {
        let n2 = IntPolynomial::new(vec![0, 0, 1]);
        let n2n = IntPolynomial::new(vec![0, 1, 1]);
        assert!(valid_family(&[n2.clone(), n2n]));
        let shifted = IntPolynomial::new(vec![3, 0, 1]);
        assert!(!valid_family(&[n2.clone(), shifted]));
        assert!(!valid_family(&[IntPolynomial::new(vec![5])]));
        assert!(IntPolynomial::new(vec![0, 2]).vanishes_mod(2));
        assert!(!n2.vanishes_mod(2));
    }
}
