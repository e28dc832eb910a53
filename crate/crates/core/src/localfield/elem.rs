use std::fmt;
use std::sync::Arc;

use crate::error::{precision, Error, Result};
use crate::localfield::field::FieldRef;
use crate::num::{fmt_q, q, Q};

/// Valuation of a truncated element: exact, or only a lower bound when the
/// element is indistinguishable from zero at its precision.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Valuation {
    Exact(Q),
    AtLeast(Q),
}

impl Valuation {
    pub fn exact(self) -> Option<Q> {
        match self {
            Valuation::Exact(v) => Some(v),
            Valuation::AtLeast(_) => None,
        }
    }

    /// Decides `v ≥ bound`, failing when only a smaller lower bound is known.
    pub fn at_least(self, bound: Q) -> Result<bool> {
        match self {
            Valuation::Exact(v) => Ok(v >= bound),
            Valuation::AtLeast(b) if b >= bound => Ok(true),
            Valuation::AtLeast(b) => precision(format!(
                "valuation only known to be >= {}, threshold {}",
                fmt_q(b),
                fmt_q(bound)
            )),
        }
    }
}

impl fmt::Display for Valuation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Valuation::Exact(v) => write!(f, "{}", fmt_q(*v)),
            Valuation::AtLeast(v) => write!(f, ">={}", fmt_q(*v)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Repr {
    /// Known only to lie in π^abs·O.
    Zero { abs: i64 },
    /// π^val · unit, the unit known mod π^rel.
    Unit { val: i64, unit: Vec<i128>, rel: i64 },
}

/// An element of a local field known to finite precision.
#[derive(Clone)]
pub struct Elem {
    field: FieldRef,
    repr: Repr,
}

impl PartialEq for Elem {
    /// Structural equality: same field, same certified digits, same precision.
    fn eq(&self, other: &Self) -> bool {
        self.field == other.field && self.repr == other.repr
    }
}

impl fmt::Debug for Elem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Elem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.repr {
            Repr::Zero { abs } => write!(f, "O(pi^{abs})"),
            Repr::Unit { val, unit, rel } => {
                let v = q(*val, self.field.e() as i64);
                let u: Vec<String> = unit.iter().map(|c| c.to_string()).collect();
                write!(f, "v={};u={};rel={}", fmt_q(v), u.join(","), rel)
            }
        }
    }
}

impl Elem {
    fn same_field(&self, other: &Elem) -> Result<()> {
        if Arc::ptr_eq(&self.field, &other.field) || self.field == other.field {
            Ok(())
        } else {
            Err(Error::FieldMismatch)
        }
    }

    /// The zero marker: an element known only to lie in π^abs·O.
    pub fn zero(field: &FieldRef, abs: i64) -> Elem {
        Elem { field: field.clone(), repr: Repr::Zero { abs } }
    }

    /// An integral element from power-basis coordinates known mod π^abs.
    pub fn from_o(field: &FieldRef, coords: &[i128], abs: i64) -> Result<Elem> {
        field.check_prec(abs)?;
        if coords.len() != field.degree() {
            return Err(Error::InvalidInput(format!(
                "expected {} coordinates, got {}",
                field.degree(),
                coords.len()
            )));
        }
        let mut c = coords.to_vec();
        field.reduce(&mut c, abs);
        Ok(Self::normalize(field, 0, c, abs))
    }

    /// `π^shift · c` where `c` is integral and known mod π^n.
    fn normalize(field: &FieldRef, shift: i64, mut c: Vec<i128>, n: i64) -> Elem {
        match field.o_val(&c, n) {
            None => Elem::zero(field, shift + n),
            Some(v) => {
                let mut m = n;
                for _ in 0..v {
                    c = field.div_pi(&c, m);
                    m -= 1;
                }
                Elem {
                    field: field.clone(),
                    repr: Repr::Unit { val: shift + v, unit: c, rel: m },
                }
            }
        }
    }

    /// An exact integer, stored with `rel` digits of relative precision
    /// (zero becomes the marker `O(π^rel)`).
    pub fn integer(field: &FieldRef, n: i128, rel: i64) -> Result<Elem> {
        if n == 0 {
            return Ok(Elem::zero(field, rel));
        }
        let vp = crate::num::vp_i128(n, field.p()).unwrap() as i64;
        let abs = vp * field.e() as i64 + rel;
        let mut c = vec![0i128; field.degree()];
        c[0] = n;
        Self::from_o(field, &c, abs)
    }

    /// An integer known modulo π^abs (a residue class, not an exact value).
    pub fn residue(field: &FieldRef, n: i128, abs: i64) -> Result<Elem> {
        let mut c = vec![0i128; field.degree()];
        c[0] = n;
        Self::from_o(field, &c, abs)
    }

    /// `π^val · unit` with the unit given by coordinates, `rel` digits.
    pub fn from_parts(field: &FieldRef, val: i64, unit: &[i128], rel: i64) -> Result<Elem> {
        field.check_prec(rel)?;
        if rel < 1 {
            return Err(Error::InvalidInput("relative precision must be at least 1".into()));
        }
        let e = Self::from_o(field, unit, rel)?;
        match e.repr {
            Repr::Unit { val: 0, unit, rel } => {
                Ok(Elem { field: field.clone(), repr: Repr::Unit { val, unit, rel } })
            }
            _ => Err(Error::InvalidInput("unit part has positive valuation".into())),
        }
    }

    pub fn one(field: &FieldRef, rel: i64) -> Elem {
        Self::integer(field, 1, rel).expect("one")
    }

    /// The uniformizer π (equal to p when unramified).
    pub fn uniformizer(field: &FieldRef, rel: i64) -> Elem {
        Self::from_parts(field, 1, &field.one_o(), rel).expect("uniformizer")
    }

    /// The power-basis generator `t`.
    pub fn generator(field: &FieldRef, rel: i64) -> Result<Elem> {
        if field.degree() < 2 {
            return Err(Error::InvalidInput("the base field has no generator".into()));
        }
        let mut c = vec![0i128; field.degree()];
        c[1] = 1;
        let shift = field.offset(1);
        Self::from_o(field, &c, rel + shift)
    }

    pub fn field(&self) -> &FieldRef {
        &self.field
    }

    pub fn is_zero_marker(&self) -> bool {
        matches!(self.repr, Repr::Zero { .. })
    }

    /// Valuation in π-units (integer), `None` for the zero marker.
    pub fn val_pi(&self) -> Option<i64> {
        match self.repr {
            Repr::Zero { .. } => None,
            Repr::Unit { val, .. } => Some(val),
        }
    }

    /// Valuation normalized so that `v(p) = 1`.
    pub fn valuation(&self) -> Valuation {
        let e = self.field.e() as i64;
        match self.repr {
            Repr::Zero { abs } => Valuation::AtLeast(q(abs, e)),
            Repr::Unit { val, .. } => Valuation::Exact(q(val, e)),
        }
    }

    /// Absolute precision in π-digits: the element is known mod π^abs.
    pub fn abs_prec(&self) -> i64 {
        match self.repr {
            Repr::Zero { abs } => abs,
            Repr::Unit { val, rel, .. } => val + rel,
        }
    }

    /// Relative precision in π-digits (0 for the zero marker).
    pub fn rel_prec(&self) -> i64 {
        match self.repr {
            Repr::Zero { .. } => 0,
            Repr::Unit { rel, .. } => rel,
        }
    }

    pub fn unit_coords(&self) -> Option<&[i128]> {
        match &self.repr {
            Repr::Zero { .. } => None,
            Repr::Unit { unit, .. } => Some(unit),
        }
    }

    /// Power-basis coordinates of an integral element mod π^n.
    pub fn coords_mod(&self, n: i64) -> Result<Vec<i128>> {
        let f = &self.field;
        if self.abs_prec() < n {
            return precision(format!("element known mod pi^{}, need pi^{n}", self.abs_prec()));
        }
        match &self.repr {
            Repr::Zero { .. } => Ok(vec![0; f.degree()]),
            Repr::Unit { val, .. } if *val >= n => Ok(vec![0; f.degree()]),
            Repr::Unit { val, unit, .. } => {
                if *val < 0 {
                    return Err(Error::InvalidInput(format!("{self} is not integral")));
                }
                let mut c = unit.clone();
                f.reduce(&mut c, n - val);
                Ok(f.mul_pi_pow(&c, *val, n - val))
            }
        }
    }

    /// Integer representative mod p^k of an integral base-field element.
    pub fn to_int_mod(&self, k: u32) -> Result<i128> {
        if !self.field.is_base() {
            return Err(Error::InvalidInput("to_int_mod needs a base-field element".into()));
        }
        Ok(self.coords_mod(k as i64)?[0])
    }

    pub fn neg(&self) -> Elem {
        match &self.repr {
            Repr::Zero { .. } => self.clone(),
            Repr::Unit { val, unit, rel } => {
                let mut u: Vec<i128> = unit.iter().map(|&c| -c).collect();
                self.field.reduce(&mut u, *rel);
                Elem {
                    field: self.field.clone(),
                    repr: Repr::Unit { val: *val, unit: u, rel: *rel },
                }
            }
        }
    }

    pub fn add(&self, other: &Elem) -> Result<Elem> {
        self.same_field(other)?;
        let f = &self.field;
        let abs = self.abs_prec().min(other.abs_prec());
        let terms: Vec<(i64, &Vec<i128>, i64)> = [&self.repr, &other.repr]
            .into_iter()
            .filter_map(|r| match r {
                Repr::Unit { val, unit, rel } => Some((*val, unit, *rel)),
                Repr::Zero { .. } => None,
            })
            .collect();
        let Some(s) = terms.iter().map(|t| t.0).min() else {
            return Ok(Elem::zero(f, abs));
        };
        if abs <= s {
            return Ok(Elem::zero(f, abs));
        }
        let n = abs - s;
        let mut sum = vec![0i128; f.degree()];
        for (val, unit, _) in terms {
            let mut u = unit.clone();
            let k = val - s;
            if k >= n {
                continue;
            }
            f.reduce(&mut u, n - k);
            let shifted = f.mul_pi_pow(&u, k, n - k);
            for (a, b) in sum.iter_mut().zip(shifted) {
                *a += b;
            }
        }
        f.reduce(&mut sum, n);
        Ok(Self::normalize(f, s, sum, n))
    }

    pub fn sub(&self, other: &Elem) -> Result<Elem> {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Elem) -> Result<Elem> {
        self.same_field(other)?;
        let f = &self.field;
        Ok(match (&self.repr, &other.repr) {
            (Repr::Zero { abs: a }, Repr::Zero { abs: b }) => Elem::zero(f, a + b),
            (Repr::Zero { abs }, Repr::Unit { val, .. })
            | (Repr::Unit { val, .. }, Repr::Zero { abs }) => Elem::zero(f, abs + val),
            (
                Repr::Unit { val: v1, unit: u1, rel: r1 },
                Repr::Unit { val: v2, unit: u2, rel: r2 },
            ) => {
                let rel = *r1.min(r2);
                Elem {
                    field: f.clone(),
                    repr: Repr::Unit { val: v1 + v2, unit: f.mul_o(u1, u2, rel), rel },
                }
            }
        })
    }

    pub fn inv(&self) -> Result<Elem> {
        match &self.repr {
            Repr::Zero { abs } => Err(Error::DivisionByZeroMarker(*abs)),
            Repr::Unit { val, unit, rel } => Ok(Elem {
                field: self.field.clone(),
                repr: Repr::Unit { val: -val, unit: self.field.unit_inverse(unit, *rel), rel: *rel },
            }),
        }
    }

    pub fn div(&self, other: &Elem) -> Result<Elem> {
        self.mul(&other.inv()?)
    }

    pub fn pow(&self, k: i64) -> Result<Elem> {
        if k < 0 {
            return self.inv()?.pow(-k);
        }
        let mut result = Elem::one(&self.field, self.rel_prec().max(self.abs_prec()).max(1));
        if k == 0 {
            return Ok(result);
        }
        let mut base = self.clone();
        let mut k = k as u64;
        let mut first = true;
        while k > 0 {
            if k & 1 == 1 {
                result = if first { base.clone() } else { result.mul(&base)? };
                first = false;
            }
            k >>= 1;
            if k > 0 {
                base = base.mul(&base)?;
            }
        }
        Ok(result)
    }

    /// Lowers the precision to at most `abs` absolute digits.
    pub fn truncate(&self, abs: i64) -> Elem {
        if abs >= self.abs_prec() {
            return self.clone();
        }
        match &self.repr {
            Repr::Unit { val, unit, .. } if *val < abs => {
                let mut u = unit.clone();
                self.field.reduce(&mut u, abs - val);
                Elem {
                    field: self.field.clone(),
                    repr: Repr::Unit { val: *val, unit: u, rel: abs - val },
                }
            }
            _ => Elem::zero(&self.field, abs),
        }
    }

    /// `x ≡ y` modulo π^n, failing if either side is known less precisely.
    pub fn congruent(&self, other: &Elem, n: i64) -> Result<bool> {
        let d = self.sub(other)?;
        if d.abs_prec() < n {
            return match d.val_pi() {
                Some(v) if v < n => Ok(false),
                _ => precision(format!("difference known mod pi^{}, need pi^{n}", d.abs_prec())),
            };
        }
        Ok(d.val_pi().is_none_or(|v| v >= n))
    }

    /// Image under the generator σ of Gal(E/Q_p).
    pub fn sigma(&self) -> Elem {
        let f = &self.field;
        match &self.repr {
            Repr::Zero { .. } => self.clone(),
            Repr::Unit { val, unit, rel } => {
                let mut u = f.sigma_o(unit, *rel);
                // σ(π) = −π in the ramified case
                if f.e() == 2 && val.rem_euclid(2) == 1 {
                    u = u.iter().map(|&c| -c).collect();
                    f.reduce(&mut u, *rel);
                }
                Elem { field: f.clone(), repr: Repr::Unit { val: *val, unit: u, rel: *rel } }
            }
        }
    }

    /// All conjugates `x, σx, …, σ^{d-1}x` over Q_p.
    pub fn galois_conjugates(&self) -> Vec<Elem> {
        let d = self.field.degree();
        let mut out = Vec::with_capacity(d);
        out.push(self.clone());
        for _ in 1..d {
            let next = out.last().unwrap().sigma();
            out.push(next);
        }
        out
    }

    /// Product of the Galois conjugates.
    pub fn norm(&self) -> Result<Elem> {
        let conj = self.galois_conjugates();
        let mut acc = conj[0].clone();
        for c in &conj[1..] {
            acc = acc.mul(c)?;
        }
        Ok(acc)
    }

    /// Whether the element lies in Q_p at its certified precision: the
    /// coordinates against `t, t², …` vanish.
    pub fn is_in_base_field(&self) -> bool {
        let f = &self.field;
        match &self.repr {
            Repr::Zero { .. } => true,
            Repr::Unit { val, unit, rel } => {
                if f.e() == 2 && val.rem_euclid(2) == 1 {
                    return false;
                }
                unit.iter().enumerate().skip(1).all(|(i, &c)| c % f.coord_modulus(i, *rel) == 0)
            }
        }
    }

    /// Embeds a Q_p-element into the extension `target`.
    pub fn embed(&self, target: &FieldRef) -> Result<Elem> {
        if !self.field.is_base() || self.field.p() != target.p() {
            return Err(Error::FieldMismatch);
        }
        let e = target.e() as i64;
        match &self.repr {
            Repr::Zero { abs } => Ok(Elem::zero(target, abs * e)),
            Repr::Unit { val, unit, rel } => {
                let mut c = vec![0i128; target.degree()];
                c[0] = unit[0];
                let u = Elem::from_o(target, &c, rel * e)?;
                let p = Elem::integer(target, target.p() as i128, rel * e)?;
                u.mul(&p.pow(*val)?)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::localfield::field::{base_field, make_field, ExtensionKind};
    use crate::num::qi;

    #[test]
    fn spec_arithmetic_examples() {
        let f = base_field(3);
        let p = Elem::integer(&f, 3, 5).unwrap();
        assert_eq!(p.valuation(), Valuation::Exact(qi(1)));
        let zero = Elem::residue(&f, 0, 5).unwrap();
        assert_eq!(zero.valuation(), Valuation::AtLeast(qi(5)));

        let one = Elem::integer(&f, 1, 8).unwrap();
        let p = Elem::integer(&f, 3, 8).unwrap();
        let a = one.add(&p).unwrap();
        let b = one.sub(&p).unwrap();
        let prod = a.mul(&b).unwrap();
        assert!(prod.congruent(&Elem::integer(&f, 1 - 9, 8).unwrap(), 8).unwrap());
        assert_eq!(prod.val_pi(), Some(0));

        let d = a.sub(&one).unwrap();
        assert_eq!(d.val_pi(), Some(1));
        assert_eq!(d.unit_coords().unwrap()[0], 1);

        let inv = Elem::integer(&f, 4, 4).unwrap().inv().unwrap();
        // 1 - 3 + 9 - 27 mod 81
        assert_eq!(inv.to_int_mod(4).unwrap(), (1 - 3 + 9 - 27i128).rem_euclid(81));
    }

    #[test]
    fn ramified_uniformizer_has_half_valuation() {
        let f = make_field(3, ExtensionKind::RamifiedQuadratic { unit: 1 }).unwrap();
        let pi = Elem::uniformizer(&f, 6);
        assert_eq!(pi.valuation(), Valuation::Exact(q(1, 2)));
        let sq = pi.mul(&pi).unwrap();
        let three = Elem::integer(&f, 3, 6).unwrap();
        assert!(sq.congruent(&three, 8).unwrap());
        assert_eq!(pi.sigma().add(&pi).unwrap().val_pi(), None);
    }

    #[test]
    fn norm_of_quadratic_element() {
        // u = -1 is a non-square mod 3
        let f = make_field(3, ExtensionKind::Unramified { modulus: vec![1, 0, 1] }).unwrap();
        let t = Elem::generator(&f, 8).unwrap();
        let x = Elem::one(&f, 8).add(&Elem::integer(&f, 3, 8).unwrap().mul(&t).unwrap()).unwrap();
        let conj = x.galois_conjugates();
        assert!(conj[1].congruent(&Elem::one(&f, 8).sub(&Elem::integer(&f, 3, 8).unwrap().mul(&t).unwrap()).unwrap(), 8).unwrap());
        let n = x.norm().unwrap();
        assert!(n.is_in_base_field());
        assert!(n.congruent(&Elem::integer(&f, 10, 8).unwrap(), 8).unwrap());
        let nm1 = n.sub(&Elem::one(&f, 8)).unwrap();
        assert_eq!(nm1.valuation(), Valuation::Exact(qi(2)));
    }

    #[test]
    fn base_conjugates_are_singletons() {
        let f = base_field(5);
        let x = Elem::integer(&f, 7, 5).unwrap();
        assert_eq!(x.galois_conjugates(), vec![x.clone()]);
    }

    #[test]
    fn embedding_scales_valuation() {
        let f = base_field(3);
        let e = make_field(3, ExtensionKind::RamifiedQuadratic { unit: 2 }).unwrap();
        let x = Elem::integer(&f, 18, 5).unwrap();
        let y = x.embed(&e).unwrap();
        assert_eq!(y.valuation(), Valuation::Exact(qi(2)));
        assert!(y.is_in_base_field());
        assert!(y.congruent(&Elem::integer(&e, 18, 10).unwrap(), 12).unwrap());
    }

    #[test]
    fn cancellation_loses_precision() {
        let f = base_field(2);
        let a = Elem::residue(&f, 5, 4).unwrap();
        let b = Elem::residue(&f, 21, 6).unwrap();
        // 5 ≡ 21 mod 16: difference only known to be O(2^4)
        let d = a.sub(&b).unwrap();
        assert!(d.is_zero_marker());
        assert_eq!(d.abs_prec(), 4);
        assert!(matches!(d.inv(), Err(Error::DivisionByZeroMarker(4))));
    }
}
