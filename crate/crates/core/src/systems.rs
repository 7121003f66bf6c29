//! Irrational circle rotation with exact arithmetic in Q(√5).

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::rational::Rational;
use crate::{Error, Result};

/// `a + b√5`.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QuadExt {
    pub a: Rational,
    pub b: Rational,
}

impl QuadExt {
    pub fn new(a: Rational, b: Rational) -> Self {
        QuadExt { a, b }
    }

    pub fn rational(a: Rational) -> Self {
        QuadExt { a, b: Rational::zero() }
    }

    pub fn from_int(n: i64) -> Self {
        Self::rational(Rational::from_int(n))
    }

    pub fn zero() -> Self {
        Self::from_int(0)
    }

    pub fn one() -> Self {
        Self::from_int(1)
    }

    /// `(√5 − 1)/2`.
    pub fn golden() -> Self {
        let h = Rational::new(1, 2);
        QuadExt { a: -h.clone(), b: h }
    }

    pub fn is_rational(&self) -> bool {
        self.b.is_zero()
    }

    /// Exact sign, from `a² vs 5b²` when the two parts disagree.
    pub fn signum(&self) -> i32 {
        let sa = sign(&self.a);
        let sb = sign(&self.b);
        if sb == 0 || sa == sb {
            return sa;
        }
        if sa == 0 {
            return sb;
        }
        let five = Rational::from_int(5);
        match (&self.a * &self.a).cmp(&(&five * &self.b * &self.b)) {
            Ordering::Greater => sa,
            Ordering::Less => sb,
            Ordering::Equal => 0,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.a.is_zero() && self.b.is_zero()
    }

    pub fn recip(&self) -> Self {
        let norm = &self.a * &self.a - Rational::from_int(5) * &self.b * &self.b;
        assert!(!norm.is_zero(), "division by zero in Q(√5)");
        QuadExt { a: &self.a / &norm, b: -(&self.b / &norm) }
    }

    pub fn to_f64(&self) -> f64 {
        self.a.to_f64() + self.b.to_f64() * 5f64.sqrt()
    }

    /// Greatest integer not above the value. The float guess is only a
    /// starting point; the answer is pinned by exact comparisons.
    pub fn floor(&self) -> BigInt {
        let mut k = BigInt::from(self.to_f64().floor() as i64);
        loop {
            let lo = QuadExt::rational(Rational::from_int(k.clone()));
            if *self < lo {
                k -= 1;
                continue;
            }
            let hi = QuadExt::rational(Rational::from_int(&k + 1));
            if *self >= hi {
                k += 1;
                continue;
            }
            return k;
        }
    }

    /// Fractional part in `[0, 1)`.
    pub fn fract(&self) -> Self {
        self - &QuadExt::rational(Rational::from_int(self.floor()))
    }

    /// Distance to the nearest integer.
    pub fn dist_to_int(&self) -> Self {
        let f = self.fract();
        let g = &QuadExt::one() - &f;
        if f <= g {
            f
        } else {
            g
        }
    }

    /// `(p, q, d)` with `self = (p + q√5)/d` and `d > 0` minimal.
    pub fn integer_form(&self) -> (BigInt, BigInt, BigInt) {
        let d = self.a.denom().lcm(self.b.denom());
        let p = self.a.numer() * (&d / self.a.denom());
        let q = self.b.numer() * (&d / self.b.denom());
        (p, q, d)
    }
}

fn sign(r: &Rational) -> i32 {
    if r.is_positive() {
        1
    } else if r.is_negative() {
        -1
    } else {
        0
    }
}

impl Ord for QuadExt {
    fn cmp(&self, other: &Self) -> Ordering {
        (self - other).signum().cmp(&0)
    }
}

impl PartialOrd for QuadExt {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Add for &QuadExt {
    type Output = QuadExt;
    fn add(self, o: &QuadExt) -> QuadExt {
        QuadExt { a: &self.a + &o.a, b: &self.b + &o.b }
    }
}

impl Sub for &QuadExt {
    type Output = QuadExt;
    fn sub(self, o: &QuadExt) -> QuadExt {
        QuadExt { a: &self.a - &o.a, b: &self.b - &o.b }
    }
}

impl Mul for &QuadExt {
    type Output = QuadExt;
    fn mul(self, o: &QuadExt) -> QuadExt {
        let five = Rational::from_int(5);
        QuadExt { a: &self.a * &o.a + five * &self.b * &o.b, b: &self.a * &o.b + &self.b * &o.a }
    }
}

impl Neg for &QuadExt {
    type Output = QuadExt;
    fn neg(self) -> QuadExt {
        QuadExt { a: -&self.a, b: -&self.b }
    }
}

impl Add for QuadExt {
    type Output = QuadExt;
    fn add(self, o: QuadExt) -> QuadExt {
        &self + &o
    }
}

impl Sub for QuadExt {
    type Output = QuadExt;
    fn sub(self, o: QuadExt) -> QuadExt {
        &self - &o
    }
}

impl Mul for QuadExt {
    type Output = QuadExt;
    fn mul(self, o: QuadExt) -> QuadExt {
        &self * &o
    }
}

impl From<Rational> for QuadExt {
    fn from(r: Rational) -> Self {
        QuadExt::rational(r)
    }
}

impl fmt::Display for QuadExt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.b.is_zero() {
            return write!(f, "{}", self.a);
        }
        let (p, q, d) = self.integer_form();
        let sq = if q.is_one() {
            "√5".to_string()
        } else if q == -BigInt::one() {
            "-√5".to_string()
        } else {
            format!("{q}√5")
        };
        let body = if p.is_zero() {
            sq
        } else if q.is_negative() {
            format!("{p}{sq}")
        } else {
            format!("{p}+{sq}")
        };
        if d.is_one() {
            write!(f, "{body}")
        } else {
            write!(f, "({body})/{d}")
        }
    }
}

impl fmt::Debug for QuadExt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self} (~{:.6})", self.to_f64())
    }
}

/// `x ↦ x + α mod 1` on the circle with Lebesgue measure.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "QuadExt", into = "QuadExt")]
pub struct RotationSystem {
    alpha: QuadExt,
}

impl RotationSystem {
    pub fn new(alpha: QuadExt) -> Result<Self> {
        if alpha.is_rational() {
            return Err(Error::InvalidSystem(format!("rotation angle {alpha} is rational")));
        }
        if alpha <= QuadExt::zero() || alpha >= QuadExt::one() {
            return Err(Error::InvalidSystem(format!("rotation angle {alpha} not in (0,1)")));
        }
        Ok(RotationSystem { alpha })
    }

    pub fn golden() -> Self {
        RotationSystem { alpha: QuadExt::golden() }
    }

    pub fn alpha(&self) -> &QuadExt {
        &self.alpha
    }

    /// `nα mod 1`.
    pub fn phase(&self, n: i64) -> QuadExt {
        (&QuadExt::from_int(n) * &self.alpha).fract()
    }

    /// `‖nα‖`.
    pub fn dist(&self, n: i64) -> QuadExt {
        (&QuadExt::from_int(n) * &self.alpha).dist_to_int()
    }

    /// Continued-fraction convergent denominators of α up to `limit`.
    pub fn convergent_denominators(&self, limit: i64) -> Vec<i64> {
        let mut out = Vec::new();
        let (mut q0, mut q1) = (0i64, 1i64);
        let mut x = self.alpha.clone();
        loop {
            if q1 > limit {
                break;
            }
            if out.last() != Some(&q1) {
                out.push(q1);
            }
            x = x.fract();
            if x.is_zero() {
                break;
            }
            x = x.recip();
            let digit: i64 = x.floor().try_into().unwrap_or(i64::MAX);
            let next = digit.saturating_mul(q1).saturating_add(q0);
            q0 = q1;
            q1 = next;
        }
        out
    }
}

impl TryFrom<QuadExt> for RotationSystem {
    type Error = Error;
    fn try_from(a: QuadExt) -> Result<Self> {
        Self::new(a)
    }
}

impl From<RotationSystem> for QuadExt {
    fn from(r: RotationSystem) -> Self {
        r.alpha
    }
}

/// Finite union of half-open arcs `[s, e)` of `[0, 1)`, kept sorted,
/// disjoint and with touching arcs merged.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntervalUnion {
    arcs: Vec<(QuadExt, QuadExt)>,
}

impl IntervalUnion {
    pub fn empty() -> Self {
        IntervalUnion { arcs: Vec::new() }
    }

    pub fn full() -> Self {
        IntervalUnion { arcs: vec![(QuadExt::zero(), QuadExt::one())] }
    }

    /// Normalizes any list of arcs inside `[0, 1]`; empty arcs are dropped.
    pub fn new(arcs: impl IntoIterator<Item = (QuadExt, QuadExt)>) -> Result<Self> {
        let mut v: Vec<(QuadExt, QuadExt)> = Vec::new();
        for (s, e) in arcs {
            if s < QuadExt::zero() || e > QuadExt::one() {
                return Err(Error::Precondition(format!("arc [{s}, {e}) leaves [0,1]")));
            }
            if s < e {
                v.push((s, e));
            }
        }
        Ok(Self::normalized(v))
    }

    pub fn from_rationals(arcs: &[(Rational, Rational)]) -> Result<Self> {
        Self::new(arcs.iter().map(|(s, e)| (s.clone().into(), e.clone().into())))
    }

    fn normalized(mut v: Vec<(QuadExt, QuadExt)>) -> Self {
        v.sort();
        let mut out: Vec<(QuadExt, QuadExt)> = Vec::with_capacity(v.len());
        for (s, e) in v {
            match out.last_mut() {
                Some(last) if s <= last.1 => {
                    if e > last.1 {
                        last.1 = e;
                    }
                }
                _ => out.push((s, e)),
            }
        }
        IntervalUnion { arcs: out }
    }

    pub fn arcs(&self) -> &[(QuadExt, QuadExt)] {
        &self.arcs
    }

    pub fn is_empty(&self) -> bool {
        self.arcs.is_empty()
    }

    pub fn measure(&self) -> QuadExt {
        self.arcs.iter().fold(QuadExt::zero(), |acc, (s, e)| &acc + &(e - s))
    }

    pub fn intersect(&self, other: &Self) -> Self {
        let mut out = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < self.arcs.len() && j < other.arcs.len() {
            let (s1, e1) = &self.arcs[i];
            let (s2, e2) = &other.arcs[j];
            let s = s1.max(s2);
            let e = e1.min(e2);
            if s < e {
                out.push((s.clone(), e.clone()));
            }
            if e1 < e2 {
                i += 1;
            } else {
                j += 1;
            }
        }
        Self::normalized(out)
    }

    pub fn contains(&self, x: &QuadExt) -> bool {
        self.arcs.iter().any(|(s, e)| s <= x && x < e)
    }
}

/// `TⁿA`: every endpoint moves by `nα mod 1`; arcs crossing 1 are split.
pub fn rotate(a: &IntervalUnion, n: i64, sys: &RotationSystem) -> IntervalUnion {
    let theta = sys.phase(n);
    let one = QuadExt::one();
    let mut v = Vec::with_capacity(a.arcs.len() + 1);
    for (s, e) in &a.arcs {
        let s2 = s + &theta;
        let e2 = e + &theta;
        if e2 <= one {
            v.push((s2, e2));
        } else if s2 >= one {
            v.push((&s2 - &one, &e2 - &one));
        } else {
            v.push((s2, one.clone()));
            v.push((QuadExt::zero(), &e2 - &one));
        }
    }
    IntervalUnion::normalized(v)
}

/// `μ(A ∩ TⁿA)`.
pub fn interval_correlation(a: &IntervalUnion, n: i64, sys: &RotationSystem) -> QuadExt {
    a.intersect(&rotate(a, n, sys)).measure()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;

    fn qe(a: Rational, b: Rational) -> QuadExt {
        QuadExt::new(a, b)
    }

    #[test]
    fn exact_sign() {
        // 9/4 vs √5 = 2.236...
        assert_eq!(qe(q(9, 4), q(-1, 1)).signum(), 1);
        assert_eq!(qe(q(2, 1), q(-1, 1)).signum(), -1);
        assert_eq!(qe(q(-3, 1), q(4, 3)).signum(), -1);
        assert_eq!(qe(q(0, 1), q(0, 1)).signum(), 0);
        let g = QuadExt::golden();
        assert!(g > QuadExt::rational(q(618, 1000)) && g < QuadExt::rational(q(619, 1000)));
        assert_eq!(&g * &g, &QuadExt::one() - &g);
    }

    #[test]
    fn floor_and_fract() {
        let g = QuadExt::golden();
        for n in -50..50 {
            let x = &QuadExt::from_int(n) * &g;
            let f = x.fract();
            assert!(f >= QuadExt::zero() && f < QuadExt::one());
            assert_eq!(BigInt::from((n as f64 * g.to_f64()).floor() as i64), x.floor());
        }
    }

    #[test]
    fn rotation_examples() {
        let sys = RotationSystem::golden();
        let a = IntervalUnion::from_rationals(&[(q(0, 1), q(1, 2))]).unwrap();
        let r = rotate(&a, 1, &sys);
        let g = QuadExt::golden();
        let want = IntervalUnion::new([(g.clone(), QuadExt::one()), (QuadExt::zero(), &g - &QuadExt::rational(q(1, 2)))]).unwrap();
        assert_eq!(r, want);
        assert_eq!(r.measure(), QuadExt::rational(q(1, 2)));
        let c1 = interval_correlation(&a, 1, &sys);
        assert_eq!(c1, qe(q(-1, 1), q(1, 2)));
        assert!(c1 < QuadExt::rational(q(1, 4)));
        assert!(interval_correlation(&a, 2, &sys) > QuadExt::rational(q(1, 4)));
        assert_eq!(interval_correlation(&a, 0, &sys), a.measure());
        assert_eq!(rotate(&IntervalUnion::empty(), 3, &sys), IntervalUnion::empty());
        assert_eq!(rotate(&IntervalUnion::full(), 3, &sys), IntervalUnion::full());
    }

    #[test]
    fn group_law_and_fibonacci() {
        let sys = RotationSystem::golden();
        let a = IntervalUnion::from_rationals(&[(q(1, 10), q(1, 3)), (q(1, 2), q(7, 8))]).unwrap();
        for (m, n) in [(1, 2), (5, -3), (13, 21), (-7, -9)] {
            assert_eq!(rotate(&rotate(&a, m, &sys), n, &sys), rotate(&a, m + n, &sys));
        }
        assert_eq!(sys.convergent_denominators(100), vec![1, 2, 3, 5, 8, 13, 21, 34, 55, 89]);
        assert!(RotationSystem::new(QuadExt::rational(q(1, 2))).is_err());
    }
}
