//! O-lattices, Smith normal form over the valuation ring, and exhaustive
//! counting of affine solutions `M·l + v ∈ L'` on `L/L'`.

use std::fmt;

use crate::error::{precision, Error, Result};
use crate::localfield::{parse_elem, Elem, FieldRef};
use crate::num::{big, ppow, QPowerBound, Q};
use crate::par;

/// Default limit on the number of cosets enumerated.
pub const DEFAULT_CAP: u128 = 1_000_000;

/// A square matrix over a local field, row-major.
#[derive(Clone, PartialEq)]
pub struct LatticeMatrix {
    field: FieldRef,
    n: usize,
    entries: Vec<Elem>,
}

impl fmt::Debug for LatticeMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<String> = (0..self.n)
            .map(|i| {
                (0..self.n).map(|j| self.get(i, j).to_string()).collect::<Vec<_>>().join(", ")
            })
            .collect();
        write!(f, "[{}]", rows.join("; "))
    }
}

impl LatticeMatrix {
    pub fn new(field: &FieldRef, n: usize, entries: Vec<Elem>) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::InvalidInput(format!("need {} entries, got {}", n * n, entries.len())));
        }
        if entries.iter().any(|e| e.field() != field) {
            return Err(Error::FieldMismatch);
        }
        Ok(LatticeMatrix { field: field.clone(), n, entries })
    }

    /// Matrix of exact integers stored with `prec` digits.
    pub fn from_ints(field: &FieldRef, rows: &[Vec<i128>], prec: i64) -> Result<Self> {
        let n = rows.len();
        let entries = rows
            .iter()
            .flat_map(|r| r.iter())
            .map(|&x| Elem::integer(field, x, prec))
            .collect::<Result<Vec<_>>>()?;
        Self::new(field, n, entries)
    }

    /// Matrix of residues mod p^prec (entries known to `prec` absolute digits).
    pub fn from_residues(field: &FieldRef, rows: &[Vec<i128>], prec: i64) -> Result<Self> {
        let n = rows.len();
        let entries = rows
            .iter()
            .flat_map(|r| r.iter())
            .map(|&x| Elem::residue(field, x, prec))
            .collect::<Result<Vec<_>>>()?;
        Self::new(field, n, entries)
    }

    /// Parses `"a, b; c, d"` with element literals as entries.
    pub fn parse(field: &FieldRef, s: &str, prec: i64) -> Result<Self> {
        let rows: Vec<Vec<&str>> = s.split(';').map(|r| r.split(',').collect()).collect();
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Parse(format!("matrix literal {s:?} is not square")));
        }
        let entries = rows
            .iter()
            .flatten()
            .map(|e| parse_elem(field, e, prec))
            .collect::<Result<Vec<_>>>()?;
        Self::new(field, n, entries)
    }

    pub fn identity(field: &FieldRef, n: usize, prec: i64) -> Self {
        let entries = (0..n * n)
            .map(|k| if k / n == k % n { Elem::one(field, prec) } else { Elem::zero(field, prec) })
            .collect();
        LatticeMatrix { field: field.clone(), n, entries }
    }

    pub fn scalar(field: &FieldRef, n: usize, c: &Elem, prec: i64) -> Self {
        let mut m = Self::identity(field, n, prec);
        for i in 0..n {
            m.entries[i * n + i] = c.clone();
        }
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn field(&self) -> &FieldRef {
        &self.field
    }

    pub fn get(&self, i: usize, j: usize) -> &Elem {
        &self.entries[i * self.n + j]
    }

    fn set(&mut self, i: usize, j: usize, x: Elem) {
        self.entries[i * self.n + j] = x;
    }

    pub fn mul(&self, other: &LatticeMatrix) -> Result<LatticeMatrix> {
        let n = self.n;
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = self.get(i, 0).mul(other.get(0, j))?;
                for k in 1..n {
                    acc = acc.add(&self.get(i, k).mul(other.get(k, j))?)?;
                }
                entries.push(acc);
            }
        }
        LatticeMatrix::new(&self.field, n, entries)
    }

    pub fn mul_vec(&self, v: &[Elem]) -> Result<Vec<Elem>> {
        (0..self.n)
            .map(|i| {
                let mut acc = self.get(i, 0).mul(&v[0])?;
                for k in 1..self.n {
                    acc = acc.add(&self.get(i, k).mul(&v[k])?)?;
                }
                Ok(acc)
            })
            .collect()
    }

    /// Determinant by cofactor expansion (independent of the elimination
    /// used in the Smith form).
    pub fn det(&self) -> Result<Elem> {
        fn minor_det(m: &LatticeMatrix, rows: &[usize], cols: &[usize]) -> Result<Elem> {
            if rows.len() == 1 {
                return Ok(m.get(rows[0], cols[0]).clone());
            }
            let mut acc: Option<Elem> = None;
            for (k, &c) in cols.iter().enumerate() {
                let rest: Vec<usize> = cols.iter().copied().filter(|&x| x != c).collect();
                let term = m.get(rows[0], c).mul(&minor_det(m, &rows[1..], &rest)?)?;
                let term = if k % 2 == 1 { term.neg() } else { term };
                acc = Some(match acc {
                    None => term,
                    Some(a) => a.add(&term)?,
                });
            }
            Ok(acc.unwrap())
        }
        let idx: Vec<usize> = (0..self.n).collect();
        minor_det(self, &idx, &idx)
    }

    /// `v(det M)` (normalized so `v(p) = 1`), failing if the determinant is
    /// not certified nonzero.
    pub fn det_valuation(&self) -> Result<Q> {
        let d = self.det()?;
        d.valuation().exact().ok_or_else(|| {
            Error::PrecisionInsufficient(format!("determinant {d} not certified nonzero"))
        })
    }

    pub fn is_integral(&self) -> bool {
        self.entries.iter().all(|e| e.val_pi().is_none_or(|v| v >= 0))
    }
}

/// `P·M·Q = diag(π^{d_i}·u_i)` with `P`, `Q` invertible over O.
#[derive(Clone, Debug)]
pub struct SmithForm {
    pub p: LatticeMatrix,
    pub p_inv: LatticeMatrix,
    pub q: LatticeMatrix,
    /// Elementary divisor exponents in π-units, nondecreasing.
    pub d: Vec<i64>,
    /// The diagonal of `P·M·Q` as computed.
    pub diagonal: Vec<Elem>,
}

impl SmithForm {
    /// Divisor exponents normalized so that `v(p) = 1`.
    pub fn valuations(&self) -> Vec<Q> {
        let e = self.p.field.e() as i64;
        self.d.iter().map(|&d| Q::new(d, e)).collect()
    }
}

/// Smith normal form by full pivoting: at each step the remaining entry of
/// minimal valuation (first in row-major order) becomes the pivot.
pub fn smith_normal_form(m: &LatticeMatrix) -> Result<SmithForm> {
    let n = m.n;
    let field = &m.field;
    let prec = m.entries.iter().map(|e| e.abs_prec()).max().unwrap_or(1).max(1);
    let mut a = m.clone();
    let mut p = LatticeMatrix::identity(field, n, prec);
    let mut p_inv = p.clone();
    let mut q = p.clone();
    let mut d = Vec::with_capacity(n);
    let mut diagonal = Vec::with_capacity(n);
    for k in 0..n {
        let mut best: Option<(i64, usize, usize)> = None;
        for i in k..n {
            for j in k..n {
                if let Some(v) = a.get(i, j).val_pi() {
                    if best.is_none_or(|(bv, _, _)| v < bv) {
                        best = Some((v, i, j));
                    }
                }
            }
        }
        let Some((v, pi, pj)) = best else {
            return precision(format!("no certified pivot left at step {k}"));
        };
        if pi != k {
            for j in 0..n {
                a.entries.swap(k * n + j, pi * n + j);
                p.entries.swap(k * n + j, pi * n + j);
                p_inv.entries.swap(j * n + k, j * n + pi);
            }
        }
        if pj != k {
            for i in 0..n {
                a.entries.swap(i * n + k, i * n + pj);
                q.entries.swap(i * n + k, i * n + pj);
            }
        }
        let pivot = a.get(k, k).clone();
        let pivot_inv = pivot.inv()?;
        for i in k + 1..n {
            // already zero to its precision: 0 is a valid elimination factor,
            // and multiplying the marker by π^{-v} would only lose digits
            if a.get(i, k).is_zero_marker() {
                continue;
            }
            let f = a.get(i, k).mul(&pivot_inv)?;
            for j in 0..n {
                let x = a.get(i, j).sub(&f.mul(a.get(k, j))?)?;
                a.set(i, j, x);
                let y = p.get(i, j).sub(&f.mul(p.get(k, j))?)?;
                p.set(i, j, y);
                // P ← E·P with E = 1 − f·e_ik, so P⁻¹ ← P⁻¹·(1 + f·e_ik)
                let z = p_inv.get(j, k).add(&f.mul(p_inv.get(j, i))?)?;
                p_inv.set(j, k, z);
            }
        }
        for j in k + 1..n {
            if a.get(k, j).is_zero_marker() {
                continue;
            }
            let g = a.get(k, j).mul(&pivot_inv)?;
            for i in 0..n {
                let x = a.get(i, j).sub(&g.mul(a.get(i, k))?)?;
                a.set(i, j, x);
                let y = q.get(i, j).sub(&g.mul(q.get(i, k))?)?;
                q.set(i, j, y);
            }
        }
        d.push(v);
        diagonal.push(pivot);
    }
    Ok(SmithForm { p, p_inv, q, d, diagonal })
}

/// The quotient `L/L'` for `L = O^n` and `L'` spanned by the columns of a
/// basis matrix, prepared for repeated counting.
#[derive(Clone, Debug)]
pub struct Sublattice {
    basis: LatticeMatrix,
    snf: SmithForm,
    /// Exponents `d_i ≥ 0`; `L/L' ≅ ⊕ O/π^{d_i}`.
    d: Vec<u32>,
}

impl Sublattice {
    pub fn new(basis: &LatticeMatrix) -> Result<Self> {
        if !basis.field.is_base() {
            return Err(Error::InvalidInput(
                "coset enumeration is implemented over the base field only".into(),
            ));
        }
        if !basis.is_integral() {
            return Err(Error::InvalidInput("sublattice basis must be integral".into()));
        }
        let snf = smith_normal_form(basis)?;
        let d = snf.d.iter().map(|&x| x as u32).collect();
        Ok(Sublattice { basis: basis.clone(), snf, d })
    }

    /// `π^k·O^n`.
    pub fn scaled(field: &FieldRef, n: usize, k: u32, prec: i64) -> Result<Self> {
        let c = Elem::integer(field, ppow(field.p(), k), prec)?;
        Self::new(&LatticeMatrix::scalar(field, n, &c, prec))
    }

    pub fn basis(&self) -> &LatticeMatrix {
        &self.basis
    }

    /// `[L : L']`.
    pub fn index(&self) -> u128 {
        let p = self.basis.field.p() as u128;
        self.d.iter().map(|&d| p.pow(d)).product()
    }

    /// Number of `l ∈ L/L'` with `M·l + v ∈ L'`.
    ///
    /// Coordinates `x = P·l` identify `L/L'` with `∏ O/π^{d_i}`; the condition
    /// becomes `(A·x + b)_i ≡ 0 mod π^{d_i}` with `A = P·M·P⁻¹` and `b = P·v`,
    /// which is evaluated in machine integers.
    pub fn count_affine_solutions(&self, m: &LatticeMatrix, v: &[Elem], cap: u128) -> Result<u128> {
        let n = self.basis.n;
        if m.n != n || v.len() != n {
            return Err(Error::InvalidInput("dimension mismatch".into()));
        }
        if !m.is_integral() || v.iter().any(|x| x.val_pi().is_some_and(|k| k < 0)) {
            return Err(Error::InvalidInput("M and v must be integral".into()));
        }
        let total = self.index();
        if total > cap {
            return Err(Error::CapExceeded { needed: total, cap });
        }
        let p = self.basis.field.p();
        let dmax = self.d.iter().copied().max().unwrap_or(0);
        let a = self.snf.p.mul(m)?.mul(&self.snf.p_inv)?;
        let b = self.snf.p.mul_vec(v)?;
        let mut a_int = vec![0i128; n * n];
        for i in 0..n {
            for j in 0..n {
                let x = a.get(i, j);
                // M·L' ⊆ L' ⟺ v(A_ij) ≥ d_i − d_j
                let need = self.d[i] as i64 - self.d[j] as i64;
                if need > 0 && !x.valuation().at_least(Q::from_integer(need))? {
                    return Err(Error::InvalidInput("M does not preserve the sublattice".into()));
                }
                a_int[i * n + j] = x.to_int_mod(dmax)?;
            }
        }
        let b_int: Vec<i128> = b.iter().map(|x| x.to_int_mod(dmax)).collect::<Result<_>>()?;
        let moduli: Vec<i128> = self.d.iter().map(|&d| ppow(p, d)).collect();
        let count = par::sum_range(total as u64, |code| {
            let mut x = vec![0i128; n];
            let mut c = code as i128;
            for (xi, &mi) in x.iter_mut().zip(&moduli) {
                *xi = c % mi;
                c /= mi;
            }
            let ok = (0..n).all(|i| {
                let mi = moduli[i];
                let mut s = b_int[i] % mi;
                for j in 0..n {
                    s = (s + (a_int[i * n + j] % mi) * x[j]) % mi;
                }
                s == 0
            });
            ok as u128
        });
        Ok(count)
    }
}

/// See [`Sublattice::count_affine_solutions`].
pub fn count_affine_solutions(
    m: &LatticeMatrix,
    v: &[Elem],
    sublattice: &LatticeMatrix,
    cap: u128,
) -> Result<u128> {
    Sublattice::new(sublattice)?.count_affine_solutions(m, v, cap)
}

#[derive(Clone, Debug, PartialEq)]
pub struct LatticeReport {
    pub count: u128,
    /// `v(det M)`; the bound is `q^{v(det M)} = |det M|^{-1}`.
    pub bound_exponent: Q,
    pub holds: bool,
}

pub fn verify_lattice_bound(
    m: &LatticeMatrix,
    v: &[Elem],
    sub: &Sublattice,
    cap: u128,
) -> Result<LatticeReport> {
    let count = sub.count_affine_solutions(m, v, cap)?;
    let bound_exponent = m.det_valuation()?;
    let bound = QPowerBound::new(big(1), m.field.q(), bound_exponent);
    Ok(LatticeReport { count, bound_exponent, holds: bound.admits_count(count) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::localfield::base_field;
    use crate::num::qi;

    #[test]
    fn smith_examples() {
        let f = base_field(3);
        let id = LatticeMatrix::identity(&f, 3, 5);
        assert_eq!(smith_normal_form(&id).unwrap().d, vec![0, 0, 0]);
        let m = LatticeMatrix::from_ints(&f, &[vec![3, 0], vec![0, 3]], 5).unwrap();
        assert_eq!(smith_normal_form(&m).unwrap().d, vec![1, 1]);
        let m = LatticeMatrix::from_ints(&f, &[vec![3, 1], vec![0, 3]], 5).unwrap();
        let s = smith_normal_form(&m).unwrap();
        assert_eq!(s.d, vec![0, 2]);
        assert_eq!(s.d.iter().sum::<i64>(), 2);
        assert_eq!(m.det_valuation().unwrap(), qi(2));
    }

    #[test]
    fn counting_examples() {
        let f = base_field(2);
        let sub = Sublattice::scaled(&f, 1, 1, 6).unwrap();
        let zero = vec![Elem::zero(&f, 6)];
        let two = LatticeMatrix::from_ints(&f, &[vec![2]], 6).unwrap();
        assert_eq!(sub.count_affine_solutions(&two, &zero, DEFAULT_CAP).unwrap(), 2);
        let one = LatticeMatrix::identity(&f, 1, 6);
        assert_eq!(sub.count_affine_solutions(&one, &zero, DEFAULT_CAP).unwrap(), 1);
        let r = verify_lattice_bound(&two, &zero, &sub, DEFAULT_CAP).unwrap();
        assert_eq!((r.count, r.bound_exponent, r.holds), (2, qi(1), true));
    }

    #[test]
    fn low_precision_scaled_sublattice() {
        let f = base_field(3);
        let sub = Sublattice::scaled(&f, 2, 2, 3).unwrap();
        let zero = vec![Elem::zero(&f, 3), Elem::zero(&f, 3)];
        let m = LatticeMatrix::from_residues(&f, &[vec![1, 0], vec![0, 3]], 3).unwrap();
        let r = verify_lattice_bound(&m, &zero, &sub, DEFAULT_CAP).unwrap();
        assert_eq!((r.count, r.holds), (3, true));
    }

    #[test]
    fn general_sublattice_basis() {
        // L' spanned by (1,1) and (0,3) over Z_3: index 3, M = identity,
        // v = (1,0): l + v ∈ L' ⟺ l ≡ (2,0) + L'
        let f = base_field(3);
        let basis = LatticeMatrix::from_ints(&f, &[vec![1, 0], vec![1, 3]], 6).unwrap();
        let sub = Sublattice::new(&basis).unwrap();
        assert_eq!(sub.index(), 3);
        let id = LatticeMatrix::identity(&f, 2, 6);
        let v = vec![Elem::integer(&f, 1, 6).unwrap(), Elem::zero(&f, 6)];
        assert_eq!(sub.count_affine_solutions(&id, &v, DEFAULT_CAP).unwrap(), 1);
        let cap = sub.count_affine_solutions(&id, &v, 2);
        assert!(matches!(cap, Err(Error::CapExceeded { .. })));
    }
}
