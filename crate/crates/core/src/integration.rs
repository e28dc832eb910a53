//! Measures on `T\G`, orbital integrals of GL_2 (and GL_3 for `1_K`), the
//! Weyl integration formula at finite level, and sd-weighted shell sums.
//!
//! Normalizations: `μ_G(K) = 1`, `μ_T(T ∩ K) = 1`, `μ_{T\G}(TK) = 1` with
//! `K = GL_n(Z_p)`; these are compatible with `∫_G = ∫_{T\G} ∫_T`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use crate::character::{element_invariants, ElementInvariants, ElementSpec};
use crate::error::{Error, Result};
use crate::fixedpoints::{count_fixed_in_orbit, gl_point_from_simple, UnipotentCosetBox};
use crate::localfield::{base_field, make_field, Elem, ExtensionKind, FieldRef};
use crate::measure::{geometric_decay, shell_measures, NormTorusContext, NormTorusKind};
use crate::num::{big, big_ppow, ceil_q, fmt_big, fmt_q, legendre, ppow, qi, vp_ratio, QPowerBound, Q};
use crate::par;
use crate::tree::{mat2_det, mat2_int, mat2_inv, mat2_mul, Mat2, Tree, TreeVertex};

fn ser_big<S: serde::Serializer>(v: &BigRational, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&fmt_big(v))
}

fn ser_q<S: serde::Serializer>(v: &Q, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&fmt_q(*v))
}

/// `x mod p^k` for `x` with `v_p(x) ≥ 0`.
pub fn ratio_mod(x: &BigRational, p: u64, k: u32) -> Option<BigInt> {
    if x.is_zero() {
        return Some(BigInt::zero());
    }
    if vp_ratio(x, p)? < 0 {
        return None;
    }
    let m = BigInt::from(p).pow(k);
    if m.is_one() {
        return Some(BigInt::zero());
    }
    let d = x.denom().mod_floor(&m);
    let g = d.extended_gcd(&m);
    Some((x.numer() * g.x).mod_floor(&m))
}

/// Exact rational as an element of `field` with `rel` digits.
pub fn elem_from_ratio(field: &FieldRef, x: &BigRational, rel: i64) -> Result<Elem> {
    if x.is_zero() {
        return Ok(Elem::zero(field, rel));
    }
    let num = x.numer().to_i128().ok_or_else(|| Error::InvalidInput("numerator too large".into()))?;
    let den = x.denom().to_i128().ok_or_else(|| Error::InvalidInput("denominator too large".into()))?;
    Elem::integer(field, num, rel)?.div(&Elem::integer(field, den, rel)?)
}

fn vp_or_inf(x: &BigRational, p: u64) -> i64 {
    vp_ratio(x, p).unwrap_or(i64::MAX)
}

/// Whether a nonzero rational is a square in Q_p.
pub fn is_square_qp(x: &BigRational, p: u64) -> bool {
    let Some(v) = vp_ratio(x, p) else { return false };
    if v % 2 != 0 {
        return false;
    }
    let w = x / big_ppow(p, v);
    if p == 2 {
        ratio_mod(&w, 2, 3).is_some_and(|r| r == BigInt::one())
    } else {
        let r = ratio_mod(&w, p, 1).unwrap().to_i64().unwrap();
        legendre(r, p) == 1
    }
}

/// A function on GL_2(Q_p) supported in `K`, invariant under
/// `K`-conjugation, taking nonnegative integer values.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum KFunction {
    /// `1_K`
    UnitK,
    /// `g ∈ K` with characteristic polynomial irreducible mod p.
    EllipticLocus,
    /// `g ∈ K` split regular with `v(λ_1 − λ_2) = j`.
    SplitDepth(u32),
    /// `g ∈ K` with `g ≡ scalar mod p^j`.
    ScalarMod(u32),
    /// `g ∈ K` with `det g ≡ c mod p`.
    DetResidue(i64),
    And(Box<KFunction>, Box<KFunction>),
    Sum(Vec<KFunction>),
}

fn in_k(m: &Mat2, p: u64) -> bool {
    m.iter().all(|e| vp_or_inf(e, p) >= 0) && vp_ratio(&mat2_det(m), p) == Some(0)
}

impl KFunction {
    pub fn eval(&self, m: &Mat2, p: u64) -> u32 {
        let k = in_k(m, p);
        match self {
            KFunction::UnitK => k as u32,
            KFunction::EllipticLocus => {
                if !k {
                    return 0;
                }
                let t = ratio_mod(&(&m[0] + &m[3]), p, 1).unwrap();
                let d = ratio_mod(&mat2_det(m), p, 1).unwrap();
                let pp = BigInt::from(p);
                (0..p).all(|x| {
                    let x = BigInt::from(x);
                    (&x * &x - &t * &x + &d).mod_floor(&pp) != BigInt::zero()
                }) as u32
            }
            KFunction::SplitDepth(j) => {
                if !k {
                    return 0;
                }
                let t = &m[0] + &m[3];
                let disc = &t * &t - big(4) * mat2_det(m);
                (!disc.is_zero() && vp_ratio(&disc, p) == Some(2 * *j as i64) && is_square_qp(&disc, p)) as u32
            }
            KFunction::ScalarMod(j) => {
                let j = *j as i64;
                (k && vp_or_inf(&m[1], p) >= j
                    && vp_or_inf(&m[2], p) >= j
                    && vp_or_inf(&(&m[3] - &m[0]), p) >= j) as u32
            }
            KFunction::DetResidue(c) => {
                (k && ratio_mod(&mat2_det(m), p, 1).unwrap() == BigInt::from(*c).mod_floor(&BigInt::from(p))) as u32
            }
            KFunction::And(a, b) => a.eval(m, p).min(1) * b.eval(m, p).min(1),
            KFunction::Sum(fs) => fs.iter().map(|f| f.eval(m, p)).sum(),
        }
    }

    /// Largest split depth `v(λ_1 − λ_2)` on the support, `None` when
    /// unbounded.
    pub fn support_depth(&self) -> Option<u32> {
        match self {
            KFunction::EllipticLocus => Some(0),
            KFunction::SplitDepth(j) => Some(*j),
            KFunction::UnitK | KFunction::ScalarMod(_) | KFunction::DetResidue(_) => None,
            KFunction::And(a, b) => match (a.support_depth(), b.support_depth()) {
                (Some(x), Some(y)) => Some(x.min(y)),
                (x, y) => x.or(y),
            },
            KFunction::Sum(fs) => fs.iter().map(|f| f.support_depth()).try_fold(0, |acc, d| d.map(|d| acc.max(d))),
        }
    }

    /// Digits of `(tr, det)` that determine the value on `K`, or `None` if
    /// the value is not a function of the characteristic polynomial.
    pub fn char_poly_level(&self, p: u64) -> Option<u32> {
        match self {
            KFunction::UnitK | KFunction::EllipticLocus | KFunction::DetResidue(_) => Some(1),
            KFunction::SplitDepth(j) => Some(2 * j + if p == 2 { 3 } else { 1 }),
            KFunction::ScalarMod(_) => None,
            KFunction::And(a, b) => Some(a.char_poly_level(p)?.max(b.char_poly_level(p)?)),
            KFunction::Sum(fs) => fs.iter().map(|f| f.char_poly_level(p)).try_fold(1, |acc, l| l.map(|l| acc.max(l))),
        }
    }
}

impl fmt::Display for KFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KFunction::UnitK => write!(f, "K"),
            KFunction::EllipticLocus => write!(f, "elliptic"),
            KFunction::SplitDepth(j) => write!(f, "depth={j}"),
            KFunction::ScalarMod(j) => write!(f, "scalar={j}"),
            KFunction::DetResidue(c) => write!(f, "det={c}"),
            KFunction::And(a, b) => write!(f, "{a}&{b}"),
            KFunction::Sum(fs) => {
                let parts: Vec<String> = fs.iter().map(|x| x.to_string()).collect();
                write!(f, "{}", parts.join("+"))
            }
        }
    }
}

impl FromStr for KFunction {
    type Err = Error;

    /// `K`, `elliptic`, `depth=j`, `scalar=j`, `det=c`, joined by `&`
    /// (binds tighter) and `+`.
    fn from_str(s: &str) -> Result<Self> {
        let sums: Vec<&str> = s.split('+').collect();
        if sums.len() > 1 {
            return Ok(KFunction::Sum(sums.iter().map(|x| x.parse()).collect::<Result<_>>()?));
        }
        let ands: Vec<&str> = s.split('&').collect();
        if ands.len() > 1 {
            let mut it = ands.iter().map(|x| x.parse::<KFunction>());
            let first = it.next().unwrap()?;
            return it.try_fold(first, |acc, b| Ok(KFunction::And(Box::new(acc), Box::new(b?))));
        }
        let s = s.trim();
        let arg = |v: &str| v.trim().parse::<i64>().map_err(|_| Error::Parse(format!("bad argument in {s:?}")));
        match s.split_once('=') {
            None if s == "K" => Ok(KFunction::UnitK),
            None if s == "elliptic" => Ok(KFunction::EllipticLocus),
            Some(("depth", v)) => Ok(KFunction::SplitDepth(arg(v)?.try_into().map_err(|_| Error::Parse(s.into()))?)),
            Some(("scalar", v)) => Ok(KFunction::ScalarMod(arg(v)?.try_into().map_err(|_| Error::Parse(s.into()))?)),
            Some(("det", v)) => Ok(KFunction::DetResidue(arg(v)?)),
            _ => Err(Error::Parse(format!("unknown function {s:?}"))),
        }
    }
}

/// Maximal torus of GL_2 used for `T\G`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum TorusKind {
    /// Diagonal matrices.
    Split,
    /// `{[[a, u b], [b, a]]}` for a unit `u` that is a non-square mod p.
    Elliptic { u: i64 },
}

#[derive(Clone, Debug)]
pub struct MeasureContext {
    pub p: u64,
    pub level: u32,
    pub torus: TorusKind,
    pub cap: u128,
    /// Relative precision used when invariants are computed in Q_p.
    pub prec: i64,
    cache: Arc<Mutex<BTreeMap<u32, BigRational>>>,
}

impl MeasureContext {
    pub fn new(p: u64, level: u32, torus: TorusKind) -> Result<Self> {
        if let TorusKind::Elliptic { u } = torus {
            if p == 2 || legendre(u, p) != -1 {
                return Err(Error::InvalidInput(format!("{u} is not a non-square unit mod {p}")));
            }
        }
        Ok(MeasureContext { p, level, torus, cap: 1 << 26, prec: 20, cache: Default::default() })
    }

    pub fn with_cap(mut self, cap: u128) -> Self {
        self.cap = cap;
        self
    }

    fn ext(&self) -> Result<Option<FieldRef>> {
        match self.torus {
            TorusKind::Split => Ok(None),
            TorusKind::Elliptic { u } => {
                Ok(Some(make_field(self.p, ExtensionKind::Unramified { modulus: vec![-u, 0, 1] })?))
            }
        }
    }

    /// Representative of the `k`-th double coset in `T\G/K`: the vertex at
    /// distance `k` from the apartment (split) or from the origin (elliptic).
    pub fn double_coset_rep(&self, k: u32) -> Mat2 {
        let pk = big_ppow(self.p, k as i64);
        match self.torus {
            TorusKind::Split => [big(1), BigRational::one() / pk, big(0), big(1)],
            TorusKind::Elliptic { .. } => [pk, big(0), big(0), big(1)],
        }
    }

    /// `μ_{T\G}(T g_k K)` for the standard representative, memoized.
    pub fn double_coset_measure(&self, k: u32) -> Result<BigRational> {
        if let Some(v) = self.cache.lock().unwrap().get(&k) {
            return Ok(v.clone());
        }
        let ctx = MeasureContext { level: self.level.max(k + 1), ..self.clone() };
        let v = coset_measure(&ctx, &self.double_coset_rep(k))?;
        self.cache.lock().unwrap().insert(k, v.clone());
        Ok(v)
    }
}

/// `[T∩K : T∩K∩gKg^{-1}]` counted in `T(Z/p^N)`.
///
/// The second index `[T∩gKg^{-1} : T∩K∩gKg^{-1}]` is 1 for both tori: an
/// element of `gKg^{-1}` has unit eigenvalues, and for these tori that
/// already places it in `T ∩ K`.
fn coset_index_at(ctx: &MeasureContext, g: &Mat2, big_n: u32) -> Result<BigRational> {
    let p = ctx.p;
    let gi = mat2_inv(g)?;
    let (e1, e2) = match ctx.torus {
        TorusKind::Split => (mat2_int(1, 0, 0, 0), mat2_int(0, 0, 0, 1)),
        TorusKind::Elliptic { u } => (mat2_int(1, 0, 0, 1), mat2_int(0, u, 1, 0)),
    };
    let a = mat2_mul(&gi, &mat2_mul(&e1, g));
    let b = mat2_mul(&gi, &mat2_mul(&e2, g));
    // per entry: (shift s, A·p^s mod p^s, B·p^s mod p^s)
    let mut tests = Vec::new();
    for i in 0..4 {
        let s = [&a[i], &b[i]].iter().map(|x| -vp_ratio(x, p).unwrap_or(0)).max().unwrap().max(0);
        if s == 0 {
            continue;
        }
        if s > big_n as i64 {
            return Err(Error::PrecisionInsufficient(format!(
                "level {big_n} cannot resolve denominators p^{s} in g^-1 T g"
            )));
        }
        let ps = big_ppow(p, s);
        let m = ppow(p, s as u32);
        let ra = ratio_mod(&(&a[i] * &ps), p, s as u32).unwrap().to_i128().unwrap();
        let rb = ratio_mod(&(&b[i] * &ps), p, s as u32).unwrap().to_i128().unwrap();
        tests.push((m, ra, rb));
    }
    let side = ppow(p, big_n);
    let total = (side as u128) * (side as u128);
    if total > ctx.cap {
        return Err(Error::CapExceeded { needed: total, cap: ctx.cap });
    }
    let pi = p as i128;
    let counts: Vec<(u128, u128)> = par::map_range(side as u64, |x| {
        let x = x as i128;
        let (mut all, mut hit) = (0u128, 0u128);
        for y in 0..side {
            let in_tk = match ctx.torus {
                TorusKind::Split => x % pi != 0 && y % pi != 0,
                TorusKind::Elliptic { .. } => x % pi != 0 || y % pi != 0,
            };
            if !in_tk {
                continue;
            }
            all += 1;
            if tests.iter().all(|(m, ra, rb)| (x * ra + y * rb).rem_euclid(*m) == 0) {
                hit += 1;
            }
        }
        (all, hit)
    });
    let (all, hit) = counts.into_iter().fold((0, 0), |(a, h), (x, y)| (a + x, h + y));
    Ok(BigRational::new(BigInt::from(all), BigInt::from(hit)))
}

/// `μ_{T\G}(TgK)`, computed at levels `N` and `N + 1`; the two must agree.
pub fn coset_measure(ctx: &MeasureContext, g: &Mat2) -> Result<BigRational> {
    let a = coset_index_at(ctx, g, ctx.level)?;
    let b = coset_index_at(ctx, g, ctx.level + 1)?;
    if a != b {
        return Err(Error::PrecisionInsufficient(format!(
            "coset measure not stable: {} at level {}, {} at level {}",
            fmt_big(&a),
            ctx.level,
            fmt_big(&b),
            ctx.level + 1
        )));
    }
    Ok(a)
}

fn torus_spec(ctx: &MeasureContext, gamma: &Mat2) -> Result<ElementSpec> {
    let base = base_field(ctx.p);
    let e = |x: &BigRational| elem_from_ratio(&base, x, ctx.prec);
    match ctx.torus {
        TorusKind::Split => {
            if !gamma[1].is_zero() || !gamma[2].is_zero() {
                return Err(Error::InvalidInput("gamma is not diagonal".into()));
            }
            Ok(ElementSpec::Split(vec![e(&gamma[0])?, e(&gamma[3])?]))
        }
        TorusKind::Elliptic { u } => {
            if gamma[0] != gamma[3] || gamma[1] != &gamma[2] * big(u) {
                return Err(Error::InvalidInput(format!("gamma is not of the form [[a, {u}b], [b, a]]")));
            }
            Ok(ElementSpec::Elliptic { a: e(&gamma[0])?, b: e(&gamma[2])?, ext: ctx.ext()?.unwrap() })
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct OrbitalResult {
    pub gamma: Vec<String>,
    pub f: String,
    pub invariants: ElementInvariants,
    #[serde(serialize_with = "ser_big")]
    pub value: BigRational,
    pub bound: QPowerBound,
    pub holds: bool,
    pub horizon: u32,
    pub level: u32,
    /// `value · q^{−v(D)/2} / (ht·sd + 1)`.
    pub normalized: f64,
}

fn conj(g: &Mat2, gamma: &Mat2) -> Result<Mat2> {
    Ok(mat2_mul(&mat2_inv(g)?, &mat2_mul(gamma, g)))
}

/// `ht(Φ)·⌈sd⌉ + 1` for GL_2.
fn horizon_for(inv: &ElementInvariants) -> u32 {
    (inv.max_height * ceil_q(inv.sd).max(0) + 1) as u32
}

/// `∫_{T\G} f(g^{-1}γg) dg` as a sum over `T\G/K`, weighted by
/// [`coset_measure`]. Double cosets beyond the cone-depth horizon
/// `ht(Φ)·sd(γ) + 1` are checked to contribute nothing.
pub fn orbital_integral(gamma: &Mat2, f: &KFunction, ctx: &MeasureContext, c: &BigRational) -> Result<OrbitalResult> {
    let inv = element_invariants(&torus_spec(ctx, gamma)?)?;
    if !inv.compact {
        return Err(Error::NotCompact("orbital integrals are computed for compact gamma only".into()));
    }
    let horizon = horizon_for(&inv);
    let mut value = BigRational::zero();
    for k in 0..=horizon {
        let v = f.eval(&conj(&ctx.double_coset_rep(k), gamma)?, ctx.p);
        if v > 0 {
            value += ctx.double_coset_measure(k)? * big(v as i64);
        }
    }
    if f.eval(&conj(&ctx.double_coset_rep(horizon + 1), gamma)?, ctx.p) != 0 {
        return Err(Error::HorizonTooSmall { horizon, layer: horizon + 1 });
    }
    let weight = inv.sd * inv.max_height + qi(1);
    let bound = QPowerBound::new(c * crate::num::big_q(weight), inv.q, inv.d_valuation / 2);
    let holds = bound.admits(&value);
    let normalized = QPowerBound::normalized(&value, inv.q, inv.d_valuation / 2) / weight.to_f64().unwrap_or(1.0);
    Ok(OrbitalResult {
        gamma: gamma.iter().map(fmt_big).collect(),
        f: f.to_string(),
        invariants: inv,
        value,
        bound,
        holds,
        horizon,
        level: ctx.level,
        normalized,
    })
}

/// The same integral from the tree: one term per vertex in a fundamental
/// domain for `T` (vertices whose nearest apartment vertex is the origin,
/// or all vertices for the elliptic torus), each weighted 1.
pub fn orbital_integral_tree(gamma: &Mat2, f: &KFunction, ctx: &MeasureContext) -> Result<BigRational> {
    let inv = element_invariants(&torus_spec(ctx, gamma)?)?;
    let horizon = horizon_for(&inv);
    let tree = Tree::new(ctx.p);
    let origin = TreeVertex::origin();
    let mut value = BigRational::zero();
    for z in tree.enumerate_ball(&origin, horizon + 1)? {
        let depth = match ctx.torus {
            TorusKind::Split => {
                let (foot, d) = tree.projection(&z);
                if foot != origin {
                    continue;
                }
                d
            }
            TorusKind::Elliptic { .. } => tree.distance(&z, &origin),
        };
        let v = f.eval(&conj(&tree.matrix(&z), gamma)?, ctx.p);
        if v > 0 && depth > horizon as i64 {
            return Err(Error::HorizonTooSmall { horizon, layer: depth as u32 });
        }
        value += big(v as i64);
    }
    Ok(value)
}

/// `∫_{T\G} 1_K(g^{-1}γg) dg` for compact regular diagonal `γ` in GL_3:
/// the number of `γ`-fixed points in the `U⁺`-orbit of the origin, taken
/// over the box `α_i(y) = H` and confirmed unchanged at `H + 1`.
pub fn orbital_integral_gl3_unit(gamma: &[Elem], horizon: u32, cap: u128) -> Result<u128> {
    let f = gamma[0].field().clone();
    let count = |h: u32| -> Result<u128> {
        let y = gl_point_from_simple(&[qi(h as i64), qi(h as i64)]);
        let bx = UnipotentCosetBox::new(&f, &[qi(0); 3], &y)?;
        Ok(count_fixed_in_orbit(gamma, &bx, cap)?.count)
    };
    let a = count(horizon)?;
    if count(horizon + 1)? != a {
        return Err(Error::HorizonTooSmall { horizon, layer: horizon + 1 });
    }
    Ok(a)
}

#[derive(Clone, Debug, Serialize)]
pub struct WeylReport {
    pub f: String,
    pub p: u64,
    pub level: u32,
    /// Level at which both sides are evaluated (at least `level`).
    pub resolution: u32,
    #[serde(serialize_with = "ser_big")]
    pub lhs: BigRational,
    #[serde(serialize_with = "ser_big")]
    pub rhs: BigRational,
    pub equal: bool,
}

/// Checks `∫_{^G T} f = |W|^{-1} ∫_T |D(t)| ∫_{T\G} f(g^{-1}tg) dg dt` for the
/// split torus of GL_2.
///
/// The left side counts `GL_2(Z/p^M)` by characteristic polynomial; the
/// right side sums over `T(Z/p^M)` with the double-coset orbital integral.
/// `M` is the larger of the requested level and the number of digits
/// needed to decide `f` and split-regularity on every cell.
pub fn weyl_formula_check(f: &KFunction, p: u64, level: u32, cap: u128) -> Result<WeylReport> {
    let depth = f
        .support_depth()
        .ok_or_else(|| Error::InvalidInput(format!("{f}: support is not bounded in depth")))?;
    let cp = f
        .char_poly_level(p)
        .ok_or_else(|| Error::InvalidInput(format!("{f}: not a function of the characteristic polynomial")))?;
    let m = level.max(cp).max(depth + 1);
    let side = ppow(p, m) as u64;
    let total = (side as u128).pow(4);
    if total > cap {
        return Err(Error::CapExceeded { needed: total, cap });
    }

    // left side: histogram of (trace, det) over GL_2(Z/p^M)
    let hist: Vec<BTreeMap<(u64, u64), u64>> = par::map_range(side * side, |ab| {
        let (a, b) = (ab / side, ab % side);
        let mut h = BTreeMap::new();
        for c in 0..side {
            for d in 0..side {
                let det = ((a as i128 * d as i128 - b as i128 * c as i128).rem_euclid(side as i128)) as u64;
                if det.is_multiple_of(p) {
                    continue;
                }
                *h.entry(((a + d) % side, det)).or_insert(0) += 1;
            }
        }
        h
    });
    let mut classes: BTreeMap<(u64, u64), u64> = BTreeMap::new();
    for h in hist {
        for (k, v) in h {
            *classes.entry(k).or_insert(0) += v;
        }
    }
    let group_order: u64 = classes.values().sum();
    let mut lhs_count = BigInt::zero();
    for (&(t, d), &n) in &classes {
        let companion = mat2_int(0, -(d as i64), 1, t as i64);
        let v = f.eval(&companion, p);
        if v == 0 {
            continue;
        }
        let ti = big(t as i64);
        let disc = &ti * &ti - big(4 * d as i64);
        if !disc.is_zero() && is_square_qp(&disc, p) {
            lhs_count += BigInt::from(n) * BigInt::from(v);
        }
    }
    let lhs = BigRational::new(lhs_count, BigInt::from(group_order));

    // right side: cells of T(Z/p^M)
    let ctx = MeasureContext::new(p, 1, TorusKind::Split)?;
    let units: Vec<i64> = (0..side as i64).filter(|x| x % p as i64 != 0).collect();
    let q = p;
    let mut rhs = BigRational::zero();
    for &a in &units {
        for &d in &units {
            if a == d {
                // v(a − d) ≥ M > depth: f vanishes on every conjugate
                continue;
            }
            let s = vp_ratio(&big(a - d), p).unwrap();
            let gamma = mat2_int(a, 0, 0, d);
            let oi = orbital_integral(&gamma, f, &ctx, &big(1))?;
            rhs += oi.value * big_ppow(q, -2 * s);
        }
    }
    rhs /= big(2 * (units.len() * units.len()) as i64);
    let equal = lhs == rhs;
    Ok(WeylReport { f: f.to_string(), p, level, resolution: m, lhs, rhs, equal })
}

/// The functions checked by the Weyl-formula suite at prime `p`.
pub fn weyl_family(p: u64) -> Vec<KFunction> {
    use KFunction::*;
    let mut fs = vec![
        EllipticLocus,
        SplitDepth(0),
        SplitDepth(1),
        Sum(vec![SplitDepth(0), SplitDepth(1)]),
        And(Box::new(SplitDepth(1)), Box::new(DetResidue(1))),
        Sum(vec![EllipticLocus, SplitDepth(1)]),
    ];
    if p > 2 {
        fs.push(And(Box::new(SplitDepth(0)), Box::new(DetResidue(-1))));
    }
    fs
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SummabilityTorus {
    /// `Z_p^×` with the character `t`, weight exponent 0.
    Gl1,
    /// The diagonal torus of GL_2 near the identity (level-1 congruence
    /// subgroup), with `sd = v(α(t) − 1)` and `v(D) = 2·sd`.
    Gl2Split,
}

impl FromStr for SummabilityTorus {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gl1" => Ok(SummabilityTorus::Gl1),
            "gl2" => Ok(SummabilityTorus::Gl2Split),
            _ => Err(Error::Parse(format!("unknown summability torus {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SummabilityReport {
    pub torus: SummabilityTorus,
    pub p: u64,
    #[serde(serialize_with = "ser_q")]
    pub eps: Q,
    pub m: u32,
    /// `S(r)` for `r = 0..=R`.
    pub partial_sums: Vec<f64>,
    /// `S(r) − S(r − 1)` for `r = 1..=R`.
    pub differences: Vec<f64>,
    pub exact: Option<String>,
    pub monotone: bool,
    pub differences_decreasing: bool,
    /// Smallest ratio between consecutive nonzero differences.
    pub min_shrink: f64,
    pub bounded_flag: bool,
    #[serde(serialize_with = "ser_q")]
    pub threshold: Q,
}

/// Partial sums of `(ht·sd + 1)^{n+m} q^{ε v(D)} μ(shell)` over the shells
/// `{sd = r}`.
///
/// For the GL_2 torus the shell measure of `{v(α(t) − 1) = r}` equals that
/// of `{v(s − 1) = r}` in `1 + pZ_p`, since `α` maps Haar measure on
/// `T ∩ K` to Haar measure on `1 + pZ_p`.
pub fn summability_report(
    torus: SummabilityTorus,
    p: u64,
    eps: Q,
    m: u32,
    big_r: u32,
    cap: u64,
) -> Result<SummabilityReport> {
    let base = base_field(p);
    let mut ctx = NormTorusContext::new(&base, NormTorusKind::SplitProduct, vec![1])?;
    let (threshold, n, ht, dv) = match torus {
        SummabilityTorus::Gl1 => {
            ctx.roots = 0;
            (ctx.threshold(), 0u32, 0i64, 1i64)
        }
        SummabilityTorus::Gl2Split => (ctx.sd_threshold(), 1, 1, 2),
    };
    if eps < qi(0) || eps >= threshold {
        return Err(Error::AboveThreshold { eps: fmt_q(eps), threshold: fmt_q(threshold) });
    }
    let vm = shell_measures(&ctx, qi(big_r as i64 + 1), cap)?;
    let mut partial = Vec::new();
    let mut diffs = Vec::new();
    let mut exact = Some(BigRational::zero());
    let mut s = 0.0;
    for r in 0..=big_r as i64 {
        let mu = vm.shells.get(&qi(r)).cloned().unwrap_or_else(BigRational::zero);
        let weight = big(ht * r + 1).pow((n + m) as i32);
        let w = eps * dv * r;
        let term_exact = &weight * &mu;
        let term = QPowerBound::normalized(&term_exact, p, -w);
        if let Some(ex) = exact.as_mut() {
            if w.is_integer() {
                *ex += &term_exact * big_ppow(p, w.to_integer());
            } else if !mu.is_zero() {
                exact = None;
            }
        }
        s += term;
        partial.push(s);
        if r > 0 {
            diffs.push(term);
        }
    }
    let nonzero: Vec<f64> = diffs.iter().copied().filter(|d| *d > 0.0).collect();
    let monotone = partial.windows(2).all(|w| w[1] >= w[0]);
    let differences_decreasing = nonzero.windows(2).all(|w| w[1] < w[0]);
    let min_shrink = nonzero.windows(2).map(|w| w[0] / w[1]).fold(f64::INFINITY, f64::min);
    Ok(SummabilityReport {
        torus,
        p,
        eps,
        m,
        partial_sums: partial,
        differences: diffs,
        exact: exact.map(|x| fmt_big(&x)),
        monotone,
        differences_decreasing,
        min_shrink,
        bounded_flag: geometric_decay(&nonzero),
        threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coset_measure_examples() {
        let ctx = MeasureContext::new(3, 3, TorusKind::Split).unwrap();
        assert_eq!(coset_measure(&ctx, &mat2_int(1, 0, 0, 3)).unwrap(), big(1));
        let u = [big(1), BigRational::new(1.into(), 3.into()), big(0), big(1)];
        assert_eq!(coset_measure(&ctx, &u).unwrap(), big(2));
        assert_eq!(coset_measure(&ctx, &mat2_int(2, 1, 1, 1)).unwrap(), big(1));
        let ell = MeasureContext::new(3, 3, TorusKind::Elliptic { u: 2 }).unwrap();
        assert_eq!(coset_measure(&ell, &mat2_int(3, 0, 0, 1)).unwrap(), big(4));
    }

    #[test]
    fn orbital_split_matches_tree() {
        let ctx = MeasureContext::new(3, 2, TorusKind::Split).unwrap();
        for m in 1..=3 {
            let g = mat2_int(1, 0, 0, 1 + 3i64.pow(m));
            let r = orbital_integral(&g, &KFunction::UnitK, &ctx, &big(1)).unwrap();
            assert_eq!(r.value, big(3i64.pow(m)));
            assert!(r.holds);
            assert_eq!(orbital_integral_tree(&g, &KFunction::UnitK, &ctx).unwrap(), r.value);
            let e = orbital_integral(&g, &KFunction::EllipticLocus, &ctx, &big(1)).unwrap();
            assert!(e.value.is_zero());
        }
    }

    #[test]
    fn orbital_elliptic() {
        let ctx = MeasureContext::new(3, 2, TorusKind::Elliptic { u: 2 }).unwrap();
        // 1 + t with t² = 2: sd = 0, only the origin is fixed
        let g = mat2_int(1, 2, 1, 1);
        let r = orbital_integral(&g, &KFunction::UnitK, &ctx, &big(1)).unwrap();
        assert_eq!(r.value, big(1));
        assert_eq!(orbital_integral_tree(&g, &KFunction::UnitK, &ctx).unwrap(), big(1));
        // 1 + 3t: the ball of radius 1
        let g = mat2_int(1, 6, 3, 1);
        let r = orbital_integral(&g, &KFunction::UnitK, &ctx, &big(1)).unwrap();
        assert_eq!(r.value, big(5));
        assert_eq!(orbital_integral_tree(&g, &KFunction::UnitK, &ctx).unwrap(), big(5));
    }

    #[test]
    fn kfunction_parse_roundtrip() {
        for s in ["K", "elliptic", "depth=1", "scalar=2", "det=1", "depth=1&det=1", "depth=0+depth=1"] {
            let f: KFunction = s.parse().unwrap();
            assert_eq!(f.to_string(), s);
        }
    }

    #[test]
    fn weyl_small() {
        for f in weyl_family(3) {
            let r = weyl_formula_check(&f, 3, 3, 1 << 24).unwrap();
            assert!(r.equal, "{f}: lhs={} rhs={}", fmt_big(&r.lhs), fmt_big(&r.rhs));
        }
    }

    #[test]
    fn summability_examples() {
        let r = summability_report(SummabilityTorus::Gl1, 2, Q::new(1, 2), 0, 30, 1 << 20).unwrap();
        assert!((r.partial_sums.last().unwrap() - (2f64.sqrt() + 1.0)).abs() < 1e-3);
        let r = summability_report(SummabilityTorus::Gl2Split, 3, qi(0), 1, 12, 1 << 20).unwrap();
        assert!(r.monotone && r.differences_decreasing);
        assert!(summability_report(SummabilityTorus::Gl2Split, 3, Q::new(1, 4), 1, 12, 1 << 20).is_err());
    }
}
