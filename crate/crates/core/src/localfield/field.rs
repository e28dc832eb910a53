use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::num::{ppow, vp_i128};

/// How the field sits over Q_p.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum ExtensionKind {
    Base,
    /// `Q_p[t]/(g)` with `g` monic of degree ≥ 2 and irreducible mod p.
    /// Coefficients are listed from the constant term up, leading 1 included.
    Unramified { modulus: Vec<i64> },
    /// `Q_p[t]/(t² − p·w)` with `w` a unit; `t` is the uniformizer.
    RamifiedQuadratic { unit: i64 },
}

impl ExtensionKind {
    /// Unramified extension of the given degree with a default modulus: the
    /// first monic polynomial (in lexicographic order of coefficients) that
    /// is irreducible mod p.
    pub fn unramified(p: u64, degree: usize) -> ExtensionKind {
        assert!(degree >= 2);
        let total = (p as usize).pow(degree as u32);
        for code in 0..total {
            let mut c = Vec::with_capacity(degree + 1);
            let mut x = code;
            for _ in 0..degree {
                c.push((x % p as usize) as i64);
                x /= p as usize;
            }
            c.push(1);
            if irreducible_mod_p(&c, p) {
                return ExtensionKind::Unramified { modulus: c };
            }
        }
        unreachable!("irreducible polynomials exist in every degree")
    }
}

/// A finite extension of Q_p together with the tables needed for truncated
/// arithmetic in its ring of integers.
///
/// Elements of `O_E` are coordinate vectors in the power basis `1, t, …`.
/// Coordinate `i` carries `off(i)` extra π-digits (only the ramified basis
/// element `t = π` has a nonzero offset), so `v_π(Σ c_i t^i) = min(e·v_p(c_i) + off(i))`.
#[derive(Debug)]
pub struct Field {
    p: u64,
    kind: ExtensionKind,
    e: u32,
    f: u32,
    degree: usize,
    q: u64,
    max_prec: i64,
    /// Image of `t` under the Frobenius (unramified) or `t ↦ −t` (ramified),
    /// at `max_prec`.
    sigma_t: Vec<i128>,
    /// `w^{-1}` mod `p^{kmax}` for the ramified relation `t² = p·w`.
    w_inv: i128,
}

pub type FieldRef = Arc<Field>;

impl PartialEq for Field {
    fn eq(&self, other: &Self) -> bool {
        self.p == other.p && self.kind == other.kind
    }
}

impl Eq for Field {}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

fn poly_rem_mod_p(mut a: Vec<i64>, b: &[i64], p: i64) -> Vec<i64> {
    // b monic
    let db = b.len() - 1;
    while a.len() > db {
        let lead = a.pop().unwrap().rem_euclid(p);
        let shift = a.len() - db;
        for i in 0..db {
            a[shift + i] = (a[shift + i] - lead * b[i]).rem_euclid(p);
        }
    }
    while a.last() == Some(&0) {
        a.pop();
    }
    a
}

/// Trial division by every monic polynomial of degree ≤ deg/2.
pub fn irreducible_mod_p(g: &[i64], p: u64) -> bool {
    let d = g.len() - 1;
    if g[d].rem_euclid(p as i64) != 1 {
        return false;
    }
    let g: Vec<i64> = g.iter().map(|c| c.rem_euclid(p as i64)).collect();
    for k in 1..=d / 2 {
        for code in 0..(p as usize).pow(k as u32) {
            let mut h = Vec::with_capacity(k + 1);
            let mut x = code;
            for _ in 0..k {
                h.push((x % p as usize) as i64);
                x /= p as usize;
            }
            h.push(1);
            if poly_rem_mod_p(g.clone(), &h, p as i64).is_empty() {
                return false;
            }
        }
    }
    true
}

/// Builds a field descriptor.
pub fn make_field(p: u64, kind: ExtensionKind) -> Result<FieldRef> {
    if !is_prime(p) {
        return Err(Error::InvalidInput(format!("{p} is not prime")));
    }
    let (e, f, degree) = match &kind {
        ExtensionKind::Base => (1, 1, 1),
        ExtensionKind::Unramified { modulus } => {
            let d = modulus.len().saturating_sub(1);
            if d < 2 {
                return Err(Error::InvalidInput("unramified degree must be at least 2".into()));
            }
            if !irreducible_mod_p(modulus, p) {
                return Err(Error::ReducibleResiduePolynomial(p));
            }
            (1, d as u32, d)
        }
        ExtensionKind::RamifiedQuadratic { unit } => {
            if p == 2 {
                return Err(Error::WildRamification(p));
            }
            if unit.rem_euclid(p as i64) == 0 {
                return Err(Error::InvalidInput("ramified relation needs a unit".into()));
            }
            (2, 1, 2)
        }
    };
    // coordinates live mod p^k with p^k < 2^62 so products fit in i128
    let mut kmax = 0u32;
    while (p as u128).pow(kmax + 1) < (1u128 << 62) {
        kmax += 1;
    }
    let max_prec = kmax as i64 * e as i64;
    let q = p.pow(f);
    let mut field = Field {
        p,
        kind,
        e,
        f,
        degree,
        q,
        max_prec,
        sigma_t: Vec::new(),
        w_inv: 1,
    };
    if let ExtensionKind::RamifiedQuadratic { unit } = field.kind {
        let m = ppow(p, kmax);
        field.w_inv = mod_inverse(unit as i128, m);
    }
    field.sigma_t = match field.kind {
        ExtensionKind::Base => vec![0],
        ExtensionKind::RamifiedQuadratic { .. } => {
            let m = ppow(p, kmax);
            vec![0, m - 1]
        }
        ExtensionKind::Unramified { .. } => field.frobenius_of_t(),
    };
    Ok(Arc::new(field))
}

pub fn base_field(p: u64) -> FieldRef {
    make_field(p, ExtensionKind::Base).expect("prime")
}

fn mod_inverse(a: i128, m: i128) -> i128 {
    let (mut old_r, mut r) = (a.rem_euclid(m), m);
    let (mut old_s, mut s) = (1i128, 0i128);
    while r != 0 {
        let quo = old_r / r;
        (old_r, r) = (r, old_r - quo * r);
        (old_s, s) = (s, old_s - quo * s);
    }
    assert_eq!(old_r, 1, "not invertible");
    old_s.rem_euclid(m)
}

impl Field {
    pub fn p(&self) -> u64 {
        self.p
    }
    pub fn kind(&self) -> &ExtensionKind {
        &self.kind
    }
    pub fn e(&self) -> u32 {
        self.e
    }
    pub fn f(&self) -> u32 {
        self.f
    }
    /// `[E : Q_p] = e·f`.
    pub fn degree(&self) -> usize {
        self.degree
    }
    pub fn q(&self) -> u64 {
        self.q
    }
    pub fn is_base(&self) -> bool {
        self.kind == ExtensionKind::Base
    }
    /// Largest supported precision in π-digits.
    pub fn max_prec(&self) -> i64 {
        self.max_prec
    }

    pub(crate) fn offset(&self, i: usize) -> i64 {
        match self.kind {
            ExtensionKind::RamifiedQuadratic { .. } => i as i64,
            _ => 0,
        }
    }

    fn digits_for(&self, n: i64) -> u32 {
        if n <= 0 {
            0
        } else {
            ((n + self.e as i64 - 1) / self.e as i64) as u32
        }
    }

    /// Modulus of coordinate `i` for an element known mod π^n.
    pub(crate) fn coord_modulus(&self, i: usize, n: i64) -> i128 {
        ppow(self.p, self.digits_for(n - self.offset(i)))
    }

    /// Reduce coordinates to canonical representatives mod π^n.
    pub(crate) fn reduce(&self, c: &mut [i128], n: i64) {
        for (i, x) in c.iter_mut().enumerate() {
            *x = x.rem_euclid(self.coord_modulus(i, n));
        }
    }

    pub(crate) fn check_prec(&self, n: i64) -> Result<()> {
        if n > self.max_prec {
            Err(Error::PrecisionInsufficient(format!(
                "requested {n} digits, at most {} supported for p = {}",
                self.max_prec, self.p
            )))
        } else {
            Ok(())
        }
    }

    /// π-adic valuation of an integral element known mod π^n, `None` when it
    /// is ≡ 0 mod π^n.
    pub(crate) fn o_val(&self, c: &[i128], n: i64) -> Option<i64> {
        let mut best: Option<i64> = None;
        for (i, &x) in c.iter().enumerate() {
            let x = x.rem_euclid(self.coord_modulus(i, n));
            if let Some(v) = vp_i128(x, self.p) {
                let w = self.e as i64 * v as i64 + self.offset(i);
                best = Some(best.map_or(w, |b| b.min(w)));
            }
        }
        best.filter(|&v| v < n)
    }

    /// Product of two integral elements mod π^n.
    pub(crate) fn mul_o(&self, a: &[i128], b: &[i128], n: i64) -> Vec<i128> {
        let m = ppow(self.p, self.digits_for(n));
        let d = self.degree;
        let mut prod = vec![0i128; 2 * d - 1];
        for (i, &x) in a.iter().enumerate() {
            if x == 0 {
                continue;
            }
            for (j, &y) in b.iter().enumerate() {
                prod[i + j] = (prod[i + j] + (x % m) * (y % m) % m) % m;
            }
        }
        self.fold(&mut prod, m);
        prod.truncate(d);
        self.reduce(&mut prod, n);
        prod
    }

    /// Reduce a polynomial in `t` of degree < 2d modulo the defining relation.
    fn fold(&self, c: &mut [i128], m: i128) {
        let d = self.degree;
        match &self.kind {
            ExtensionKind::Base => {}
            ExtensionKind::RamifiedQuadratic { unit } => {
                // t² = p·w
                let pw = (self.p as i128 * *unit as i128).rem_euclid(m);
                for k in (2..c.len()).rev() {
                    let top = c[k];
                    c[k] = 0;
                    c[k - 2] = (c[k - 2] + top * pw % m).rem_euclid(m);
                }
            }
            ExtensionKind::Unramified { modulus } => {
                for k in (d..c.len()).rev() {
                    let top = c[k];
                    if top == 0 {
                        continue;
                    }
                    c[k] = 0;
                    for i in 0..d {
                        let g = (modulus[i] as i128).rem_euclid(m);
                        c[k - d + i] = (c[k - d + i] - top * g % m).rem_euclid(m);
                    }
                }
            }
        }
    }

    /// `c / π` for `c` divisible by π, known mod π^n; result known mod π^{n-1}.
    pub(crate) fn div_pi(&self, c: &[i128], n: i64) -> Vec<i128> {
        let p = self.p as i128;
        let mut out = match self.kind {
            ExtensionKind::RamifiedQuadratic { .. } => {
                // (a + b t)/t = b + (a/p)·w^{-1}·t
                debug_assert_eq!(c[0] % p, 0);
                let m = ppow(self.p, self.digits_for(n));
                vec![c[1], (c[0] / p) % m * (self.w_inv % m) % m]
            }
            _ => c
                .iter()
                .map(|&x| {
                    debug_assert_eq!(x % p, 0);
                    x / p
                })
                .collect(),
        };
        self.reduce(&mut out, n - 1);
        out
    }

    /// `c · π^k` for `c` known mod π^n; result known mod π^{n+k}.
    pub(crate) fn mul_pi_pow(&self, c: &[i128], k: i64, n: i64) -> Vec<i128> {
        let mut out = c.to_vec();
        let top = n + k;
        let m = ppow(self.p, self.digits_for(top));
        for _ in 0..k {
            out = match self.kind {
                ExtensionKind::RamifiedQuadratic { unit } => {
                    // (a + b t)·t = b·p·w + a t
                    let pw = self.p as i128 * unit as i128;
                    vec![(out[1] % m) * pw % m, out[0] % m]
                }
                _ => out.iter().map(|&x| (x % m) * self.p as i128 % m).collect(),
            };
        }
        self.reduce(&mut out, top);
        out
    }

    pub(crate) fn one_o(&self) -> Vec<i128> {
        let mut c = vec![0; self.degree];
        c[0] = 1;
        c
    }

    pub(crate) fn pow_o(&self, a: &[i128], mut k: u64, n: i64) -> Vec<i128> {
        let mut result = self.one_o();
        self.reduce(&mut result, n);
        let mut base = a.to_vec();
        while k > 0 {
            if k & 1 == 1 {
                result = self.mul_o(&result, &base, n);
            }
            base = self.mul_o(&base, &base, n);
            k >>= 1;
        }
        result
    }

    /// Inverse of a unit mod π^n: `u^{q-2}` is an inverse mod π, refined by
    /// Newton steps `x ← x(2 − ux)` which double the precision.
    pub(crate) fn unit_inverse(&self, u: &[i128], n: i64) -> Vec<i128> {
        let mut x = self.pow_o(u, self.q - 2, n);
        let mut good = 1;
        while good < n {
            let ux = self.mul_o(u, &x, n);
            let mut two_minus: Vec<i128> = ux.iter().map(|&y| -y).collect();
            two_minus[0] += 2;
            self.reduce(&mut two_minus, n);
            x = self.mul_o(&x, &two_minus, n);
            good *= 2;
        }
        debug_assert_eq!(self.mul_o(u, &x, n), {
            let mut one = self.one_o();
            self.reduce(&mut one, n);
            one
        });
        x
    }

    /// Image of an integral element under the generator of Gal(E/Q_p)
    /// (Frobenius when unramified, `t ↦ −t` when ramified), mod π^n.
    pub(crate) fn sigma_o(&self, c: &[i128], n: i64) -> Vec<i128> {
        if self.is_base() {
            let mut out = c.to_vec();
            self.reduce(&mut out, n);
            return out;
        }
        let mut st = self.sigma_t.clone();
        self.reduce(&mut st, n);
        let mut acc = vec![0i128; self.degree];
        let mut power = self.one_o();
        self.reduce(&mut power, n);
        let m = ppow(self.p, self.digits_for(n));
        for &ci in c.iter() {
            for (a, &pw) in acc.iter_mut().zip(power.iter()) {
                *a = (*a + (ci % m) * pw % m) % m;
            }
            power = self.mul_o(&power, &st, n);
        }
        self.reduce(&mut acc, n);
        acc
    }

    fn eval_modulus(&self, z: &[i128], n: i64) -> (Vec<i128>, Vec<i128>) {
        let ExtensionKind::Unramified { modulus } = &self.kind else {
            unreachable!()
        };
        // Horner for g(z) and g'(z)
        let d = self.degree;
        let mut g = vec![0i128; d];
        let mut dg = vec![0i128; d];
        for k in (0..=d).rev() {
            if k < d {
                dg = self.mul_o(&dg, z, n);
                dg[0] += (k as i128 + 1) * modulus[k + 1] as i128;
                self.reduce(&mut dg, n);
            }
            g = self.mul_o(&g, z, n);
            g[0] += modulus[k] as i128;
            self.reduce(&mut g, n);
        }
        (g, dg)
    }

    /// The root of the modulus congruent to `t^p`, by Newton iteration.
    fn frobenius_of_t(&self) -> Vec<i128> {
        let n = self.max_prec;
        let mut t = vec![0i128; self.degree];
        t[1] = 1;
        let mut z = self.pow_o(&t, self.p, n);
        let mut good = 1;
        while good < 2 * n {
            let (g, dg) = self.eval_modulus(&z, n);
            let step = self.mul_o(&g, &self.unit_inverse(&dg, n), n);
            for (zi, si) in z.iter_mut().zip(step) {
                *zi -= si;
            }
            self.reduce(&mut z, n);
            good *= 2;
        }
        debug_assert!(self.eval_modulus(&z, n).0.iter().all(|&c| c == 0));
        z
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ExtensionKind::Base => write!(f, "Q_{}", self.p),
            ExtensionKind::Unramified { modulus } => {
                write!(f, "Q_{}[t]/({:?}) (unramified, degree {})", self.p, modulus, self.degree)
            }
            ExtensionKind::RamifiedQuadratic { unit } => {
                write!(f, "Q_{}[t]/(t^2 - {}*{})", self.p, self.p, unit)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn descriptors() {
        let f = make_field(3, ExtensionKind::Base).unwrap();
        assert_eq!((f.e(), f.f(), f.q()), (1, 1, 3));
        let f = make_field(3, ExtensionKind::unramified(3, 2)).unwrap();
        assert_eq!((f.e(), f.f(), f.q()), (1, 2, 9));
        let f = make_field(3, ExtensionKind::RamifiedQuadratic { unit: 1 }).unwrap();
        assert_eq!((f.e(), f.f(), f.q()), (2, 1, 3));
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(
            make_field(2, ExtensionKind::RamifiedQuadratic { unit: 1 }),
            Err(Error::WildRamification(2))
        );
        // t² − 1 = (t−1)(t+1)
        assert_eq!(
            make_field(3, ExtensionKind::Unramified { modulus: vec![-1, 0, 1] }),
            Err(Error::ReducibleResiduePolynomial(3))
        );
        assert!(make_field(9, ExtensionKind::Base).is_err());
    }

    #[test]
    fn frobenius_is_an_automorphism_of_order_degree() {
        for (p, d) in [(2, 2), (2, 3), (3, 2), (5, 3)] {
            let f = make_field(p, ExtensionKind::unramified(p, d)).unwrap();
            let n = 10;
            let mut t = vec![0i128; d];
            t[1] = 1;
            let mut x = t.clone();
            for k in 1..=d {
                x = f.sigma_o(&x, n);
                assert_eq!(x == t, k == d, "p={p} d={d} k={k}");
            }
            // multiplicative
            let a: Vec<i128> = (0..d as i128).map(|i| 3 * i + 1).collect();
            let b: Vec<i128> = (0..d as i128).map(|i| 7 - i).collect();
            let lhs = f.sigma_o(&f.mul_o(&a, &b, n), n);
            let rhs = f.mul_o(&f.sigma_o(&a, n), &f.sigma_o(&b, n), n);
            assert_eq!(lhs, rhs);
        }
    }
}
