//! Small exact-arithmetic helpers shared by every module.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::{BigRational, Ratio};
use num_traits::{One, Pow, Signed, ToPrimitive, Zero};
use serde::{Serialize, Serializer};

/// Small exact rationals: valuations, apartment coordinates, exponents.
pub type Q = Ratio<i64>;

pub fn q(n: i64, d: i64) -> Q {
    Q::new(n, d)
}

pub fn qi(n: i64) -> Q {
    Q::from_integer(n)
}

/// `p^k` as an `i128`, panicking on overflow (callers stay below 2^62).
pub fn ppow(p: u64, k: u32) -> i128 {
    (p as i128).checked_pow(k).expect("prime power overflows i128")
}

/// p-adic valuation of a nonzero integer; `None` for zero.
pub fn vp_i128(mut n: i128, p: u64) -> Option<u32> {
    if n == 0 {
        return None;
    }
    let p = p as i128;
    let mut v = 0;
    while n % p == 0 {
        n /= p;
        v += 1;
    }
    Some(v)
}

pub fn vp_bigint(n: &BigInt, p: u64) -> Option<i64> {
    if n.is_zero() {
        return None;
    }
    let p = BigInt::from(p);
    let mut n = n.clone();
    let mut v = 0;
    loop {
        let (quo, rem) = n.div_rem(&p);
        if !rem.is_zero() {
            return Some(v);
        }
        n = quo;
        v += 1;
    }
}

/// p-adic valuation of a nonzero rational; `None` for zero.
pub fn vp_ratio(x: &BigRational, p: u64) -> Option<i64> {
    let vn = vp_bigint(x.numer(), p)?;
    let vd = vp_bigint(x.denom(), p).unwrap_or(0);
    Some(vn - vd)
}

pub fn ceil_q(x: Q) -> i64 {
    x.ceil().to_integer()
}

pub fn floor_q(x: Q) -> i64 {
    x.floor().to_integer()
}

pub fn big(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

pub fn big_q(x: Q) -> BigRational {
    BigRational::new(BigInt::from(*x.numer()), BigInt::from(*x.denom()))
}

/// `p^k` as an exact rational, `k` of either sign.
pub fn big_ppow(p: u64, k: i64) -> BigRational {
    let base = BigRational::from_integer(BigInt::from(p));
    if k >= 0 {
        Pow::pow(base, k as u64)
    } else {
        Pow::pow(base, (-k) as u64).recip()
    }
}

pub fn fmt_q(x: Q) -> String {
    if x.is_integer() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

pub fn fmt_big(x: &BigRational) -> String {
    if x.is_integer() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

pub fn parse_q(s: &str) -> Option<Q> {
    let s = s.trim();
    match s.split_once('/') {
        Some((n, d)) => {
            let d: i64 = d.trim().parse().ok()?;
            if d == 0 {
                return None;
            }
            Some(Q::new(n.trim().parse().ok()?, d))
        }
        None => Some(qi(s.parse().ok()?)),
    }
}

/// Legendre symbol `(a/p)` for an odd prime `p`, by Euler's criterion.
pub fn legendre(a: i64, p: u64) -> i64 {
    let p = p as i128;
    let a = (a as i128).rem_euclid(p);
    if a == 0 {
        return 0;
    }
    let (mut base, mut e, mut r) = (a, (p - 1) / 2, 1i128);
    while e > 0 {
        if e & 1 == 1 {
            r = r * base % p;
        }
        base = base * base % p;
        e >>= 1;
    }
    if r == 1 {
        1
    } else {
        -1
    }
}

pub fn big_to_f64(x: &BigRational) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// `coeff · q^exponent` with a rational exponent, compared against exact
/// values without floating point.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QPowerBound {
    pub coeff: BigRational,
    pub q: u64,
    pub exponent: Q,
}

impl QPowerBound {
    pub fn new(coeff: BigRational, q: u64, exponent: Q) -> Self {
        assert!(q >= 2, "residue field order must be at least 2");
        QPowerBound { coeff, q, exponent }
    }

    /// `value ≤ coeff · q^exponent`, decided by raising both sides to the
    /// exponent's denominator.
    pub fn admits(&self, value: &BigRational) -> bool {
        if !value.is_positive() {
            return !self.coeff.is_negative() || value <= &self.coeff;
        }
        if !self.coeff.is_positive() {
            return false;
        }
        let ratio = value / &self.coeff;
        let a = *self.exponent.numer();
        let b = *self.exponent.denom() as u32;
        let qb = BigInt::from(self.q);
        let lhs = Pow::pow(ratio.numer().clone(), b);
        let rhs = Pow::pow(ratio.denom().clone(), b);
        if a >= 0 {
            lhs <= rhs * Pow::pow(qb, a as u64)
        } else {
            lhs * Pow::pow(qb, (-a) as u64) <= rhs
        }
    }

    pub fn admits_count(&self, count: u128) -> bool {
        self.admits(&BigRational::from_integer(BigInt::from(count)))
    }

    pub fn to_f64(&self) -> f64 {
        big_to_f64(&self.coeff) * (self.q as f64).powf(self.exponent.to_f64().unwrap_or(f64::NAN))
    }

    /// `value / q^exponent` as a float: the empirical constant in front of the
    /// power of q.
    pub fn normalized(value: &BigRational, q: u64, exponent: Q) -> f64 {
        big_to_f64(value) / (q as f64).powf(exponent.to_f64().unwrap_or(f64::NAN))
    }

    pub fn is_one(&self) -> bool {
        self.coeff.is_one() && self.exponent.is_zero()
    }
}

impl fmt::Display for QPowerBound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}*{}^({})", fmt_big(&self.coeff), self.q, fmt_q(self.exponent))
    }
}

impl Serialize for QPowerBound {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("QPowerBound", 3)?;
        st.serialize_field("coeff", &fmt_big(&self.coeff))?;
        st.serialize_field("q", &self.q)?;
        st.serialize_field("exponent", &fmt_q(self.exponent))?;
        st.end()
    }
}
