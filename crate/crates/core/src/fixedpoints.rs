//! Fixed points of compact torus elements of split GL_n in unipotent orbits
//! of apartment vertices, and the rank-one commutator count behind them.
//!
//! Points of the apartment are given in GL_n coordinates `x = (x_1..x_n)`
//! with `α_ij(x) = x_i − x_j`; the root group `U_{α_ij}` is the `(i, j)`
//! matrix entry and `U_x ∩ U⁺ = {w : v(w_ij) ≥ −α_ij(x)}`.

use num_traits::{One, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::localfield::{Elem, FieldRef, Valuation};
use crate::num::{ceil_q, fmt_q, ppow, qi, QPowerBound, Q};
use crate::par;

/// Precision used for the exact zero entries of unipotent matrices.
const EXACT: i64 = 1 << 40;

pub type GlPoint = Vec<Q>;

/// The GL_n point with `α_i(x) = simple[i]` and last coordinate 0.
pub fn gl_point_from_simple(simple: &[Q]) -> GlPoint {
    let mut x = vec![Q::zero(); simple.len() + 1];
    for i in (0..simple.len()).rev() {
        x[i] = x[i + 1] + simple[i];
    }
    x
}

fn threshold(x: &[Q], i: usize, j: usize) -> Q {
    x[j] - x[i]
}

/// `w ∈ U_x` for upper unitriangular `w`: `v(w_ij) ≥ −α_ij(x)` for `i < j`.
pub fn stabilizes_point(w: &[Vec<Elem>], x: &[Q]) -> Result<bool> {
    let n = x.len();
    if w.len() != n || w.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidInput(format!("expected a {n}x{n} matrix")));
    }
    for i in 0..n {
        for j in i + 1..n {
            if !w[i][j].valuation().at_least(threshold(x, i, j))? {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

fn exact_zero(f: &FieldRef) -> Elem {
    Elem::zero(f, EXACT)
}

/// `p^k · m` as an exact element with `rel` relative digits.
fn scaled_int(f: &FieldRef, m: i128, k: i64, rel: i64) -> Result<Elem> {
    if m == 0 {
        return Ok(exact_zero(f));
    }
    Elem::integer(f, m, rel)?.mul(&Elem::uniformizer(f, rel).pow(k)?)
}

/// Inverse of an upper unitriangular matrix.
fn unipotent_inverse(u: &[Vec<Elem>]) -> Result<Vec<Vec<Elem>>> {
    let n = u.len();
    let f = u[0][0].field().clone();
    let mut v: Vec<Vec<Elem>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { u[i][i].clone() } else { exact_zero(&f) }).collect())
        .collect();
    for h in 1..n {
        for i in 0..n - h {
            let j = i + h;
            let mut s = u[i][j].clone();
            for k in i + 1..j {
                s = s.add(&u[i][k].mul(&v[k][j])?)?;
            }
            v[i][j] = s.neg();
        }
    }
    Ok(v)
}

/// Entry `(i, j)` of `u^{-1}·γ·u·γ^{-1}` (`γ` diagonal, `ginv` its inverse).
fn commutator_entry(
    uinv: &[Vec<Elem>],
    u: &[Vec<Elem>],
    g: &[Elem],
    ginv: &[Elem],
    i: usize,
    j: usize,
) -> Result<Elem> {
    let mut s = exact_zero(g[0].field());
    for k in i..=j {
        let a = if i == k { Elem::one(g[0].field(), g[0].rel_prec()) } else { uinv[i][k].clone() };
        if a.is_zero_marker() || (k != j && u[k][j].is_zero_marker()) {
            continue;
        }
        let b = if k == j { g[k].mul(&ginv[j])? } else { g[k].mul(&u[k][j])?.mul(&ginv[j])? };
        s = s.add(&a.mul(&b)?)?;
    }
    Ok(s)
}

/// Representative range for root `(i, j)`: `c = p^lo·k`, `0 ≤ k < p^(hi−lo)`.
#[derive(Clone, Debug, Serialize)]
pub struct RootRange {
    pub root: (usize, usize),
    pub lo: i64,
    pub hi: i64,
}

/// The box `U⁺ ∩ P_y / U⁺ ∩ P_x` of per-root coset representatives.
#[derive(Clone, Debug)]
pub struct UnipotentCosetBox {
    pub field: FieldRef,
    pub x: GlPoint,
    pub y: GlPoint,
    /// Ranges grouped by height `1..n`.
    pub by_height: Vec<Vec<RootRange>>,
}

impl UnipotentCosetBox {
    pub fn new(field: &FieldRef, x: &[Q], y: &[Q]) -> Result<Self> {
        if !field.is_base() {
            return Err(Error::InvalidInput("orbit boxes are enumerated over Q_p only".into()));
        }
        let n = x.len();
        if y.len() != n || n < 2 {
            return Err(Error::InvalidInput("x and y need the same length n >= 2".into()));
        }
        let mut by_height = vec![Vec::new(); n - 1];
        for i in 0..n {
            for j in i + 1..n {
                let lo = ceil_q(threshold(y, i, j));
                let hi = ceil_q(threshold(x, i, j));
                if lo > hi {
                    return Err(Error::InvalidInput(format!(
                        "alpha_{}{}(y) < alpha_{}{}(x): empty orbit box",
                        i + 1,
                        j + 1,
                        i + 1,
                        j + 1
                    )));
                }
                by_height[j - i - 1].push(RootRange { root: (i, j), lo, hi });
            }
        }
        Ok(UnipotentCosetBox { field: field.clone(), x: x.to_vec(), y: y.to_vec(), by_height })
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    /// `Σ_α (⌈−α(x)⌉ − ⌈−α(y)⌉)`: the box has `q^size_exponent` points.
    pub fn size_exponent(&self) -> i64 {
        self.by_height.iter().flatten().map(|r| r.hi - r.lo).sum()
    }

    fn height_size(&self, h: usize) -> Result<u64> {
        let e: i64 = self.by_height[h].iter().map(|r| r.hi - r.lo).sum();
        checked_pow(self.field.p(), e)
    }
}

fn checked_pow(p: u64, e: i64) -> Result<u64> {
    if e > 62 {
        return Err(Error::CapExceeded { needed: u128::MAX, cap: u64::MAX as u128 });
    }
    (p as u128)
        .checked_pow(e as u32)
        .filter(|v| *v <= u64::MAX as u128)
        .map(|v| v as u64)
        .ok_or(Error::CapExceeded { needed: u128::MAX, cap: u64::MAX as u128 })
}

#[derive(Clone, Debug, Serialize)]
pub struct HeightProfile {
    pub height: usize,
    /// Largest number of admissible choices at this height over all fixed
    /// choices at lower heights.
    pub max_admissible: u64,
    /// `Σ v(β(γ) − 1)` over positive roots of this height.
    #[serde(serialize_with = "ser_q")]
    pub bound_exponent: Q,
    pub holds: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct OrbitReport {
    pub count: u128,
    /// Number of coset representatives in the box.
    pub enumerated: u128,
    #[serde(serialize_with = "ser_q")]
    pub bound_exponent: Q,
    pub holds: bool,
    pub profile: Vec<HeightProfile>,
}

fn ser_q<S: serde::Serializer>(v: &Q, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&fmt_q(*v))
}

struct OrbitProblem<'a> {
    bx: &'a UnipotentCosetBox,
    g: Vec<Elem>,
    ginv: Vec<Elem>,
    rel: i64,
}

#[derive(Default, Clone)]
struct Tally {
    count: u128,
    max_admissible: Vec<u64>,
}

impl Tally {
    fn merge(mut self, other: Tally) -> Tally {
        self.count += other.count;
        if self.max_admissible.len() < other.max_admissible.len() {
            self.max_admissible.resize(other.max_admissible.len(), 0);
        }
        for (a, b) in self.max_admissible.iter_mut().zip(other.max_admissible) {
            *a = (*a).max(b);
        }
        self
    }
}

impl OrbitProblem<'_> {
    /// Writes the `idx`-th tuple of height-`h` representatives into `u`.
    fn assign(&self, u: &mut [Vec<Elem>], h: usize, mut idx: u64) -> Result<()> {
        let p = self.bx.field.p();
        for r in &self.bx.by_height[h] {
            let m = ppow(p, (r.hi - r.lo) as u32) as u64;
            let k = idx % m;
            idx /= m;
            u[r.root.0][r.root.1] = scaled_int(&self.bx.field, k as i128, r.lo, self.rel)?;
        }
        Ok(())
    }

    fn admissible(&self, u: &[Vec<Elem>], h: usize) -> Result<bool> {
        let uinv = unipotent_inverse(u)?;
        for r in &self.bx.by_height[h] {
            let (i, j) = r.root;
            let w = commutator_entry(&uinv, u, &self.g, &self.ginv, i, j)?;
            if !w.valuation().at_least(threshold(&self.bx.x, i, j))? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Counts completions of `u` (heights `< h` fixed), pruning by height.
    fn descend(&self, u: &mut Vec<Vec<Elem>>, h: usize) -> Result<Tally> {
        let levels = self.bx.by_height.len();
        if h == levels {
            return Ok(Tally { count: 1, max_admissible: vec![0; levels] });
        }
        let size = self.bx.height_size(h)?;
        let mut tally = Tally { count: 0, max_admissible: vec![0; levels] };
        let mut admissible = 0;
        for idx in 0..size {
            self.assign(u, h, idx)?;
            if self.admissible(u, h)? {
                admissible += 1;
                tally = tally.merge(self.descend(u, h + 1)?);
            }
        }
        tally.max_admissible[h] = tally.max_admissible[h].max(admissible);
        Ok(tally)
    }
}

fn check_regular_compact(gamma: &[Elem]) -> Result<()> {
    for (i, g) in gamma.iter().enumerate() {
        match g.valuation() {
            Valuation::Exact(v) if v.is_zero() => {}
            Valuation::Exact(_) => return Err(Error::NotCompact(format!("entry {} is not a unit", i + 1))),
            Valuation::AtLeast(_) => return Err(Error::Degenerate(format!("entry {} is zero", i + 1))),
        }
    }
    Ok(())
}

/// Per-positive-root `v(α_ij(γ) − 1)`, indexed like the box.
fn positive_root_valuations(bx: &UnipotentCosetBox, gamma: &[Elem]) -> Result<Vec<Vec<Q>>> {
    let spec = crate::character::ElementSpec::Split(gamma.to_vec());
    let inv = crate::character::element_invariants(&spec)?;
    let lookup = |i: usize, j: usize| -> Q {
        let label = format!("e{}-e{}", i + 1, j + 1);
        inv.root_valuations.iter().find(|r| r.root == label).and_then(|r| r.valuation.exact()).unwrap()
    };
    Ok(bx.by_height.iter().map(|rs| rs.iter().map(|r| lookup(r.root.0, r.root.1)).collect()).collect())
}

/// Fixed points of `γ = diag(gamma)` in `(U⁺ ∩ P_y)·x`, checked against
/// `count ≤ q^{v(D(γ))/2}`.
///
/// Representatives are enumerated height by height; a partial choice is
/// dropped as soon as an entry of `u^{-1}γuγ^{-1}` at the current height
/// leaves `U_x` (entries of height `h` only involve entries of height `≤ h`).
pub fn count_fixed_in_orbit(gamma: &[Elem], bx: &UnipotentCosetBox, cap: u128) -> Result<OrbitReport> {
    let n = bx.n();
    if gamma.len() != n {
        return Err(Error::InvalidInput(format!("gamma has {} entries, expected {n}", gamma.len())));
    }
    if gamma.iter().any(|g| g.field() != &bx.field) {
        return Err(Error::FieldMismatch);
    }
    check_regular_compact(gamma)?;
    let root_vals = positive_root_valuations(bx, gamma)?;
    let total = checked_pow(bx.field.p(), bx.size_exponent())? as u128;
    if total > cap {
        return Err(Error::CapExceeded { needed: total, cap });
    }
    let rel = gamma.iter().map(|g| g.rel_prec()).min().unwrap();
    let ginv = gamma.iter().map(|g| g.inv()).collect::<Result<Vec<_>>>()?;
    let prob = OrbitProblem { bx, g: gamma.to_vec(), ginv, rel };
    let f = &bx.field;
    let fresh = || -> Vec<Vec<Elem>> {
        (0..n)
            .map(|i| (0..n).map(|j| if i == j { Elem::one(f, rel) } else { exact_zero(f) }).collect())
            .collect()
    };

    // split the outermost height across threads
    let top = bx.height_size(0)?;
    let parts: Vec<Result<(bool, Tally)>> = par::map_range(top, |idx| {
        let mut u = fresh();
        prob.assign(&mut u, 0, idx)?;
        if !prob.admissible(&u, 0)? {
            return Ok((false, Tally::default()));
        }
        Ok((true, prob.descend(&mut u, 1)?))
    });
    let mut tally = Tally { count: 0, max_admissible: vec![0; n - 1] };
    let mut first = 0u64;
    for part in parts {
        let (ok, t) = part?;
        if ok {
            first += 1;
            tally = tally.merge(t);
        }
    }
    tally.max_admissible[0] = first;

    let q = f.q();
    let profile: Vec<HeightProfile> = root_vals
        .iter()
        .enumerate()
        .map(|(h, vals)| {
            let e: Q = vals.iter().copied().sum();
            HeightProfile {
                height: h + 1,
                max_admissible: tally.max_admissible[h],
                bound_exponent: e,
                holds: QPowerBound::new(num_rational::BigRational::one(), q, e)
                    .admits_count(tally.max_admissible[h] as u128),
            }
        })
        .collect();
    let bound_exponent: Q = root_vals.iter().flatten().copied().sum();
    let holds = QPowerBound::new(num_rational::BigRational::one(), q, bound_exponent).admits_count(tally.count);
    Ok(OrbitReport { count: tally.count, enumerated: total, bound_exponent, holds, profile })
}

/// Unpruned count over the whole box, testing `u^{-1}γuγ^{-1} ∈ U_x` on the
/// full matrix. Used as an independent check of the pruned enumeration.
pub fn count_fixed_in_orbit_naive(gamma: &[Elem], bx: &UnipotentCosetBox, cap: u128) -> Result<u128> {
    check_regular_compact(gamma)?;
    let n = bx.n();
    let f = &bx.field;
    let p = f.p();
    let total = checked_pow(p, bx.size_exponent())? as u128;
    if total > cap {
        return Err(Error::CapExceeded { needed: total, cap });
    }
    let rel = gamma.iter().map(|g| g.rel_prec()).min().unwrap();
    let ginv = gamma.iter().map(|g| g.inv()).collect::<Result<Vec<_>>>()?;
    let ranges: Vec<&RootRange> = bx.by_height.iter().flatten().collect();
    let mut count = 0u128;
    for mut idx in 0..total {
        let mut u: Vec<Vec<Elem>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { Elem::one(f, rel) } else { exact_zero(f) }).collect())
            .collect();
        for r in &ranges {
            let m = ppow(p, (r.hi - r.lo) as u32) as u128;
            u[r.root.0][r.root.1] = scaled_int(f, (idx % m) as i128, r.lo, rel)?;
            idx /= m;
        }
        let uinv = unipotent_inverse(&u)?;
        let gu: Vec<Vec<Elem>> = (0..n)
            .map(|i| (0..n).map(|j| gamma[i].mul(&u[i][j])?.mul(&ginv[j])).collect::<Result<Vec<_>>>())
            .collect::<Result<_>>()?;
        let mut w = vec![vec![exact_zero(f); n]; n];
        for i in 0..n {
            for j in 0..n {
                let mut s = exact_zero(f);
                for k in 0..n {
                    s = s.add(&uinv[i][k].mul(&gu[k][j])?)?;
                }
                w[i][j] = s;
            }
        }
        if stabilizes_point(&w, &bx.x)? {
            count += 1;
        }
    }
    Ok(count)
}

/// Structure of the root group `U_α` in the rank-one count.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum RootGroupModel {
    /// `U_α ≅ F` (no `2α`), as for split groups.
    Single,
    /// `U_α = {(a, b)}` with `(a, b)(a', b') = (a + a', b + b' + κ·a·a')`,
    /// centre `U_{2α} = {(0, b)}`, torus acting by `(λa, λ²b)`, and
    /// filtration `U_{α,r} = {v(a) ≥ r, v(b) ≥ 2r}`.
    TwoLevel { kappa: i64 },
}

/// An element of `U_α` in the chosen model (`b` is ignored for `Single`).
#[derive(Clone, Debug)]
pub struct RootElem {
    pub a: Elem,
    pub b: Elem,
}

impl RootElem {
    pub fn identity(f: &FieldRef) -> Self {
        RootElem { a: exact_zero(f), b: exact_zero(f) }
    }

    fn mul(&self, o: &RootElem, model: RootGroupModel) -> Result<RootElem> {
        let a = self.a.add(&o.a)?;
        let b = match model {
            RootGroupModel::Single => exact_zero(self.a.field()),
            RootGroupModel::TwoLevel { kappa } => {
                let mut b = self.b.add(&o.b)?;
                if kappa != 0 && !self.a.is_zero_marker() && !o.a.is_zero_marker() {
                    let k = Elem::integer(self.a.field(), kappa as i128, self.a.rel_prec().max(1))?;
                    b = b.add(&k.mul(&self.a)?.mul(&o.a)?)?;
                }
                b
            }
        };
        Ok(RootElem { a, b })
    }

    /// `[u^{-1}, t] = u^{-1}·t u t^{-1}` where `t` acts by `λ` on `a`.
    fn commutator_with(&self, lambda: &Elem, model: RootGroupModel) -> Result<RootElem> {
        let f = self.a.field();
        let one = Elem::one(f, lambda.rel_prec());
        let lm1 = lambda.sub(&one)?;
        let a = if self.a.is_zero_marker() { exact_zero(f) } else { lm1.mul(&self.a)? };
        let b = match model {
            RootGroupModel::Single => exact_zero(f),
            RootGroupModel::TwoLevel { kappa } => {
                // ((λ−1)a, (λ²−1)b + κ(1−λ)a²)
                let l2m1 = lambda.mul(lambda)?.sub(&one)?;
                let mut b = if self.b.is_zero_marker() { exact_zero(f) } else { l2m1.mul(&self.b)? };
                if kappa != 0 && !self.a.is_zero_marker() {
                    let k = Elem::integer(f, kappa as i128, lambda.rel_prec())?;
                    b = b.sub(&k.mul(&lm1)?.mul(&self.a)?.mul(&self.a)?)?;
                }
                b
            }
        };
        Ok(RootElem { a, b })
    }

    fn in_filtration(&self, s: Q, model: RootGroupModel) -> Result<bool> {
        let a_ok = self.a.valuation().at_least(s)?;
        Ok(match model {
            RootGroupModel::Single => a_ok,
            RootGroupModel::TwoLevel { .. } => a_ok && self.b.valuation().at_least(s * 2)?,
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Rank1Report {
    pub count: u128,
    pub representatives: u128,
    #[serde(serialize_with = "ser_q")]
    pub bound_exponent: Q,
    pub holds: bool,
}

/// `#{(u, v) : w'·[(uv)^{-1}, t]·w ∈ U_{α,s}}` over representatives of
/// `U_{α,s}` in `U_{α,r}`, where `λ = α(t)` is a unit.
pub fn count_rank1(
    lambda: &Elem,
    r: Q,
    s: Q,
    w: &RootElem,
    w_prime: &RootElem,
    model: RootGroupModel,
    cap: u128,
) -> Result<Rank1Report> {
    if r >= s {
        return Err(Error::InvalidInput("count_rank1 needs r < s".into()));
    }
    let f = lambda.field().clone();
    if !f.is_base() {
        return Err(Error::InvalidInput("rank-one counts are enumerated over Q_p only".into()));
    }
    if lambda.valuation() != Valuation::Exact(qi(0)) {
        return Err(Error::NotCompact("alpha(t) is not a unit".into()));
    }
    let one = Elem::one(&f, lambda.rel_prec());
    let v1 = lambda
        .sub(&one)?
        .valuation()
        .exact()
        .ok_or_else(|| Error::PrecisionInsufficient("alpha(t) - 1 is not certified nonzero".into()))?;
    let (alo, ahi) = (ceil_q(r), ceil_q(s));
    let (blo, bhi) = (ceil_q(r * 2), ceil_q(s * 2));
    let (bound_exponent, b_span) = match model {
        RootGroupModel::Single => (v1, 0),
        RootGroupModel::TwoLevel { .. } => {
            let v2 = lambda.mul(lambda)?.sub(&one)?.valuation().exact().ok_or_else(|| {
                Error::PrecisionInsufficient("alpha(t)^2 - 1 is not certified nonzero".into())
            })?;
            (v1 + v2, bhi - blo)
        }
    };
    let p = f.p();
    let na = ppow(p, (ahi - alo) as u32) as u128;
    let nb = ppow(p, b_span as u32) as u128;
    let total = na * nb;
    if total > cap {
        return Err(Error::CapExceeded { needed: total, cap });
    }
    let rel = lambda.rel_prec();
    let results: Vec<Result<u128>> = par::map_range(na as u64, |ka| {
        let a = scaled_int(&f, ka as i128, alo, rel)?;
        let mut c = 0;
        for kb in 0..nb {
            let b = if b_span == 0 { exact_zero(&f) } else { scaled_int(&f, kb as i128, blo, rel)? };
            let uv = RootElem { a: a.clone(), b };
            let x = w_prime.mul(&uv.commutator_with(lambda, model)?, model)?.mul(w, model)?;
            if x.in_filtration(s, model)? {
                c += 1;
            }
        }
        Ok(c)
    });
    let count = results.into_iter().sum::<Result<u128>>()?;
    let holds = QPowerBound::new(num_rational::BigRational::one(), f.q(), bound_exponent).admits_count(count);
    Ok(Rank1Report { count, representatives: total, bound_exponent, holds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::localfield::{base_field, parse_elem};

    fn diag(f: &FieldRef, s: &[&str], prec: i64) -> Vec<Elem> {
        s.iter().map(|x| parse_elem(f, x, prec).unwrap()).collect()
    }

    #[test]
    fn stabilizer_examples() {
        let f = base_field(3);
        let e = |s: &str| parse_elem(&f, s, 6).unwrap();
        let z = || exact_zero(&f);
        let id2 = vec![vec![e("1"), z()], vec![z(), e("1")]];
        assert!(stabilizes_point(&id2, &[qi(0), qi(0)]).unwrap());
        let w = vec![vec![e("1"), e("1/3")], vec![z(), e("1")]];
        assert!(!stabilizes_point(&w, &[qi(0), qi(0)]).unwrap());
        assert!(stabilizes_point(&w, &[qi(1), qi(0)]).unwrap());
        let w3 = vec![
            vec![e("1"), e("2"), e("1/3")],
            vec![z(), e("1"), e("1")],
            vec![z(), z(), e("1")],
        ];
        assert!(!stabilizes_point(&w3, &[qi(0); 3]).unwrap());
    }

    #[test]
    fn gl2_orbit_example() {
        let f = base_field(3);
        let g = diag(&f, &["1", "1+p"], 8);
        let bx = UnipotentCosetBox::new(&f, &[qi(0), qi(0)], &gl_point_from_simple(&[qi(2)])).unwrap();
        let r = count_fixed_in_orbit(&g, &bx, 1 << 20).unwrap();
        assert_eq!((r.count, r.enumerated, r.bound_exponent, r.holds), (3, 9, qi(1), true));
        let bx = UnipotentCosetBox::new(&f, &[qi(0), qi(0)], &[qi(0), qi(0)]).unwrap();
        assert_eq!(count_fixed_in_orbit(&g, &bx, 1 << 20).unwrap().count, 1);
    }

    #[test]
    fn gl3_orbit_matches_naive() {
        let f = base_field(2);
        let g = diag(&f, &["1", "1+p", "1+p+p^2"], 6);
        let y = gl_point_from_simple(&[qi(2), qi(2)]);
        let bx = UnipotentCosetBox::new(&f, &[qi(0); 3], &y).unwrap();
        let r = count_fixed_in_orbit(&g, &bx, 1 << 20).unwrap();
        assert_eq!(r.enumerated, 256);
        assert_eq!(r.count, count_fixed_in_orbit_naive(&g, &bx, 1 << 20).unwrap());
        assert!(r.holds);
        assert!(r.profile.iter().all(|h| h.holds));
    }

    #[test]
    fn orbit_errors() {
        let f = base_field(3);
        let bx = UnipotentCosetBox::new(&f, &[qi(0), qi(0)], &[qi(1), qi(0)]).unwrap();
        let nc = diag(&f, &["1", "3"], 5);
        assert!(matches!(count_fixed_in_orbit(&nc, &bx, 100), Err(Error::NotCompact(_))));
        let deg = diag(&f, &["2", "2"], 5);
        assert!(matches!(count_fixed_in_orbit(&deg, &bx, 100), Err(Error::Degenerate(_))));
        assert!(UnipotentCosetBox::new(&f, &[qi(1), qi(0)], &[qi(0), qi(0)]).is_err());
    }

    #[test]
    fn rank1_examples() {
        let f = base_field(3);
        let t = parse_elem(&f, "1/(1+p)", 8).unwrap();
        let id = RootElem::identity(&f);
        let r = count_rank1(&t, qi(-2), qi(0), &id, &id, RootGroupModel::Single, 1 << 20).unwrap();
        assert_eq!((r.count, r.representatives, r.bound_exponent, r.holds), (3, 9, qi(1), true));
        let t = parse_elem(&f, "2", 8).unwrap();
        let r = count_rank1(&t, qi(-1), qi(0), &id, &id, RootGroupModel::Single, 1 << 20).unwrap();
        assert_eq!((r.count, r.bound_exponent), (1, qi(0)));
        // w' = x(1/9) cannot be cancelled by (λ−1)c with v(c) ≥ −2 when v(λ−1) = 1
        let t = parse_elem(&f, "1+p", 8).unwrap();
        let wp = RootElem { a: parse_elem(&f, "1/9", 8).unwrap(), b: exact_zero(&f) };
        let r = count_rank1(&t, qi(-2), qi(0), &id, &wp, RootGroupModel::Single, 1 << 20).unwrap();
        assert_eq!(r.count, 0);
        assert!(r.holds);
    }

    #[test]
    fn rank1_two_level() {
        let f = base_field(3);
        let t = parse_elem(&f, "1+p", 8).unwrap();
        let id = RootElem::identity(&f);
        for kappa in [0, 1] {
            let r = count_rank1(&t, qi(-1), qi(0), &id, &id, RootGroupModel::TwoLevel { kappa }, 1 << 20).unwrap();
            assert_eq!(r.representatives, 27);
            assert_eq!(r.bound_exponent, qi(2));
            assert!(r.holds, "kappa={kappa} count={}", r.count);
        }
    }
}
