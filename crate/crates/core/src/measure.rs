//! Valuation measures of polynomial sublevel sets, the norm map of a
//! quadratic torus, the indices `[K : K_r]`, and shell sums.

use std::collections::{BTreeMap, HashSet};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::localfield::{base_field, parse_elem, Elem, FieldRef, Valuation};
use crate::num::{big, big_to_f64, fmt_big, fmt_q, ppow, qi, QPowerBound, Q};
use crate::par;

fn ser_q<S: serde::Serializer>(v: &Q, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&fmt_q(*v))
}

fn ser_big<S: serde::Serializer>(v: &BigRational, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&fmt_big(v))
}

/// A polynomial in `n` variables ranging over `O_F`, with coefficients in
/// `O_E` for an extension `E` of `F = Q_p`.
#[derive(Clone, Debug)]
pub struct PadicPolynomial {
    field: FieldRef,
    n: usize,
    terms: Vec<(Vec<u32>, Elem)>,
}

#[derive(Deserialize)]
struct TermJson {
    exps: Vec<u32>,
    coeff: String,
}

impl PadicPolynomial {
    /// Drops terms whose coefficient is the zero marker.
    pub fn new(field: &FieldRef, n: usize, terms: Vec<(Vec<u32>, Elem)>) -> Result<Self> {
        let mut kept = Vec::new();
        for (e, c) in terms {
            if e.len() != n {
                return Err(Error::InvalidInput(format!("exponent vector {e:?} has length != {n}")));
            }
            if c.field() != field {
                return Err(Error::FieldMismatch);
            }
            if c.valuation().exact().is_some_and(|v| v < qi(0)) {
                return Err(Error::InvalidInput("coefficients must be integral".into()));
            }
            if !c.is_zero_marker() {
                kept.push((e, c));
            }
        }
        if kept.is_empty() {
            return Err(Error::Degenerate("the zero polynomial".into()));
        }
        Ok(PadicPolynomial { field: field.clone(), n, terms: kept })
    }

    /// `[{"exps": [1, 3], "coeff": "1"}, …]`, coefficients in element syntax.
    pub fn from_json(field: &FieldRef, json: &str, prec: i64) -> Result<Self> {
        let terms: Vec<TermJson> = serde_json::from_str(json).map_err(|e| Error::Parse(e.to_string()))?;
        let n = terms.first().map_or(0, |t| t.exps.len());
        let terms = terms
            .into_iter()
            .map(|t| Ok((t.exps, parse_elem(field, &t.coeff, prec)?)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(field, n, terms)
    }

    /// One-variable polynomial from coefficients `c_0, c_1, …`.
    pub fn univariate(field: &FieldRef, coeffs: &[Elem]) -> Result<Self> {
        Self::new(field, 1, coeffs.iter().enumerate().map(|(i, c)| (vec![i as u32], c.clone())).collect())
    }

    pub fn field(&self) -> &FieldRef {
        &self.field
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Largest power of variable `i` in any term.
    pub fn m_i(&self, i: usize) -> u32 {
        self.terms.iter().map(|(e, _)| e[i]).max().unwrap_or(0)
    }

    pub fn m_f(&self) -> u32 {
        (0..self.n).map(|i| self.m_i(i)).max().unwrap_or(0)
    }

    /// Degree and leading coefficient of a univariate polynomial.
    pub fn leading(&self) -> Option<(u32, &Elem)> {
        if self.n != 1 {
            return None;
        }
        self.terms.iter().max_by_key(|(e, _)| e[0]).map(|(e, c)| (e[0], c))
    }

    pub fn eval(&self, x: &[Elem]) -> Result<Elem> {
        let mut acc: Option<Elem> = None;
        for (e, c) in &self.terms {
            let mut t = c.clone();
            for (xi, &k) in x.iter().zip(e) {
                if k > 0 {
                    t = t.mul(&xi.pow(k as i64)?)?;
                }
            }
            acc = Some(match acc {
                None => t,
                Some(a) => a.add(&t)?,
            });
        }
        Ok(acc.expect("nonzero polynomial"))
    }
}

/// `x mod p^k` embedded in `E` as an element known mod `p^k`.
fn residue_in(field: &FieldRef, x: i128, k: i64) -> Result<Elem> {
    let mut c = vec![0i128; field.degree()];
    c[0] = x;
    Elem::from_o(field, &c, k * field.e() as i64)
}

#[derive(Clone, Debug, Serialize)]
pub struct ValFraction {
    pub count: u128,
    pub total: u128,
    #[serde(serialize_with = "ser_big")]
    pub fraction: BigRational,
    /// `m·q^{−(r − v(a_m))/m}` for univariate `f`.
    pub bound_n1: Option<QPowerBound>,
    pub n1_holds: Option<bool>,
    /// `fraction · q^{r/m_f}`.
    pub mf_shape: f64,
}

/// Proportion of `x ∈ (O_F/p^N)^n` with `v(f(x)) ≥ r`, by evaluating every
/// point.
pub fn poly_val_fraction(f: &PadicPolynomial, r: Q, big_n: u32, cap: u128) -> Result<ValFraction> {
    if r > qi(big_n as i64) {
        return Err(Error::InvalidInput(format!("need N >= r, got N={big_n}, r={}", fmt_q(r))));
    }
    let p = f.field.p();
    let side = ppow(p, big_n);
    let total = (side as u128)
        .checked_pow(f.n as u32)
        .filter(|t| *t <= cap)
        .ok_or(Error::CapExceeded { needed: u128::MAX, cap })?;
    let count = par::try_sum_range(total as u64, |mut idx| {
        let mut x = Vec::with_capacity(f.n);
        for _ in 0..f.n {
            x.push(residue_in(&f.field, (idx % side as u64) as i128, big_n as i64)?);
            idx /= side as u64;
        }
        Ok(f.eval(&x)?.valuation().at_least(r)? as u128)
    })?;
    let fraction = BigRational::new(BigInt::from(count), BigInt::from(total));
    let q = p;
    let (bound_n1, n1_holds) = match f.leading() {
        Some((m, am)) if m > 0 => {
            let va = am.valuation().exact().unwrap();
            let b = QPowerBound::new(big(m as i64), q, -(r - va) / (m as i64));
            let holds = b.admits(&fraction);
            (Some(b), Some(holds))
        }
        _ => (None, None),
    };
    let mf = f.m_f().max(1) as i64;
    let mf_shape = QPowerBound::normalized(&fraction, q, -r / mf);
    Ok(ValFraction { count, total, fraction, bound_n1, n1_holds, mf_shape })
}

/// Where the variables of a valuation-measure count live.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Domain {
    /// `O^n`
    All,
    /// `(O^×)^n`
    Units,
    /// `(1 + pO)^n`
    Congruence1,
}

#[derive(Clone, Debug, Serialize)]
pub struct ValuationMeasure {
    /// `μ{v(f) = r}` for each attained `r` below the depth, with `μ(domain) = 1`.
    #[serde(serialize_with = "ser_shells")]
    pub shells: BTreeMap<Q, BigRational>,
    /// `μ{v(f) ≥ depth}`.
    #[serde(serialize_with = "ser_big")]
    pub tail: BigRational,
    #[serde(serialize_with = "ser_q")]
    pub depth: Q,
    pub evaluations: u64,
}

fn ser_shells<S: serde::Serializer>(m: &BTreeMap<Q, BigRational>, s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeMap;
    let mut map = s.serialize_map(Some(m.len()))?;
    for (k, v) in m {
        map.serialize_entry(&fmt_q(*k), &fmt_big(v))?;
    }
    map.end()
}

impl ValuationMeasure {
    /// `μ{v(f) ≥ r}` for `r ≤ depth`.
    pub fn at_least(&self, r: Q) -> BigRational {
        let mut s = self.tail.clone();
        for (k, v) in self.shells.range(r..) {
            let _ = k;
            s += v;
        }
        s
    }
}

/// Exact measures of the level sets `{v(g(x)) = r}` for `r < depth`,
/// computed by refining residue classes `x mod p^k` until the valuation of
/// `g` on the class is certified.
///
/// `eval` receives the class as base-field elements known mod `p^k`; it
/// must propagate precision honestly (plain [`Elem`] arithmetic does).
pub fn valuation_measure<G>(p: u64, n: usize, domain: Domain, depth: Q, cap: u64, eval: G) -> Result<ValuationMeasure>
where
    G: Fn(&[Elem]) -> Result<Elem> + Sync + Send,
{
    let base = base_field(p);
    let (k0, starts): (i64, Vec<i128>) = match domain {
        Domain::All => (0, vec![0]),
        Domain::Units => (1, (1..p as i128).collect()),
        Domain::Congruence1 => (1, vec![1]),
    };
    // start classes: all n-tuples of the per-coordinate starts
    let mut level: Vec<Vec<i128>> = vec![vec![]];
    for _ in 0..n {
        level = level
            .into_iter()
            .flat_map(|v| starts.iter().map(move |&s| [v.clone(), vec![s]].concat()))
            .collect();
    }
    let domain_classes = BigInt::from(level.len());
    let mut shells: BTreeMap<Q, BigRational> = BTreeMap::new();
    let mut tail = BigRational::zero();
    let mut evaluations = 0u64;
    let mut k = k0;
    while !level.is_empty() {
        evaluations += level.len() as u64;
        if evaluations > cap {
            return Err(Error::CapExceeded { needed: evaluations as u128, cap: cap as u128 });
        }
        // weight of one class at level k relative to the domain
        let weight = BigRational::new(
            BigInt::from(p).pow((k0 * n as i64) as u32),
            BigInt::from(p).pow((k * n as i64) as u32) * &domain_classes,
        );
        let outcomes: Vec<Result<Valuation>> = par::map_range(level.len() as u64, |i| {
            let x = level[i as usize]
                .iter()
                .map(|&c| if k == 0 { Ok(Elem::zero(&base, 0)) } else { Elem::residue(&base, c, k) })
                .collect::<Result<Vec<_>>>()?;
            Ok(eval(&x)?.valuation())
        });
        let mut next = Vec::new();
        let pk = ppow(p, k as u32);
        for (cls, out) in level.iter().zip(outcomes) {
            match out? {
                Valuation::Exact(v) if v < depth => *shells.entry(v).or_insert_with(BigRational::zero) += &weight,
                Valuation::Exact(_) => tail += &weight,
                Valuation::AtLeast(b) if b >= depth => tail += &weight,
                Valuation::AtLeast(_) => {
                    let children = (p as u128).pow(n as u32);
                    for mut c in 0..children {
                        let mut child = cls.clone();
                        for x in child.iter_mut() {
                            *x += pk * (c % p as u128) as i128;
                            c /= p as u128;
                        }
                        next.push(child);
                    }
                }
            }
        }
        level = next;
        k += 1;
        if k > base.max_prec() {
            return Err(Error::PrecisionInsufficient(format!("refinement passed p^{}", base.max_prec())));
        }
    }
    Ok(ValuationMeasure { shells, tail, depth, evaluations })
}

/// The torus whose `F`-points are compared with the norms of `K ⊂ T(E)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum NormTorusKind {
    /// `T = G_m`: `T(E) = E^×`, `N(t) = ∏_σ σ(t) ∈ F^×`.
    SplitProduct,
    /// `T = ker N_{E/F}`: `T(E) ≅ E^×` and `N(t) = t / σ(t)`.
    NormOne,
    /// `T = R_{E/F} G_m`: `T(E) ≅ E^× × E^×`, `N(t_1, t_2) = (t_1 σ t_2, t_2 σ t_1)`.
    Full,
}

#[derive(Clone, Debug)]
pub struct NormTorusContext {
    pub ext: FieldRef,
    pub kind: NormTorusKind,
    /// `χ(s) = ∏ s_i^{chi_i}` on the coordinates of `T(F)`.
    pub chi: Vec<i64>,
    /// `|R(G, T)|` for the sd-weighted threshold.
    pub roots: u32,
}

impl NormTorusContext {
    pub fn new(ext: &FieldRef, kind: NormTorusKind, chi: Vec<i64>) -> Result<Self> {
        if ext.degree() > 2 {
            return Err(Error::InvalidInput("only quadratic extensions are supported".into()));
        }
        if chi.len() != self::rank(kind) {
            return Err(Error::InvalidInput(format!("{kind:?} needs {} character exponents", rank(kind))));
        }
        if kind != NormTorusKind::SplitProduct && ext.degree() != 2 {
            return Err(Error::InvalidInput(format!("{kind:?} needs a quadratic extension")));
        }
        Ok(NormTorusContext { ext: ext.clone(), kind, chi, roots: 2 })
    }

    /// Number of cocharacters `m` in the basis of `X_*(T)`.
    pub fn m(&self) -> usize {
        rank(self.kind)
    }

    /// `max_i |⟨χ, X_i⟩|`.
    pub fn big_m(&self) -> i64 {
        self.chi.iter().map(|c| c.abs()).max().unwrap_or(0)
    }

    pub fn degree(&self) -> usize {
        self.ext.degree()
    }

    /// `1/(M·[E:F])`.
    pub fn threshold(&self) -> Q {
        Q::new(1, (self.big_m() * self.degree() as i64).max(1))
    }

    /// `1/(2^{|R|}·M·[E:F])`.
    pub fn sd_threshold(&self) -> Q {
        self.threshold() / (1i64 << self.roots)
    }

    pub fn chi_value(&self, s: &[Elem]) -> Result<Elem> {
        let mut acc = Elem::one(&self.ext, s[0].rel_prec().max(1));
        for (x, &c) in s.iter().zip(&self.chi) {
            if c != 0 {
                acc = acc.mul(&x.pow(c)?)?;
            }
        }
        Ok(acc)
    }
}

fn rank(kind: NormTorusKind) -> usize {
    match kind {
        NormTorusKind::Full => 2,
        _ => 1,
    }
}

/// `N_{E/F}(t)` as a point of `T(F)`.
pub fn norm_map(t: &[Elem], ctx: &NormTorusContext) -> Result<Vec<Elem>> {
    if t.len() != ctx.m() {
        return Err(Error::InvalidInput(format!("expected {} coordinates", ctx.m())));
    }
    match ctx.kind {
        NormTorusKind::SplitProduct => {
            let n = t[0].norm()?;
            if !n.is_in_base_field() {
                return Err(Error::PrecisionInsufficient("norm not certified in the base field".into()));
            }
            Ok(vec![n])
        }
        NormTorusKind::NormOne => Ok(vec![t[0].div(&t[0].sigma())?]),
        NormTorusKind::Full => Ok(vec![t[0].mul(&t[1].sigma())?, t[1].mul(&t[0].sigma())?]),
    }
}

/// `1 + p·a` for `a` given by base-field coordinates mod `p^{N−1}`.
fn congruence_point(ext: &FieldRef, coords: &[i128], big_n: i64) -> Result<Elem> {
    let p = ext.p() as i128;
    let mut c: Vec<i128> = coords.iter().map(|&a| p * a).collect();
    c[0] += 1;
    Elem::from_o(ext, &c, big_n * ext.e() as i64)
}

fn decode(mut idx: u64, side: i128, len: usize) -> Vec<i128> {
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        out.push((idx % side as u64) as i128);
        idx /= side as u64;
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct KrReport {
    #[serde(serialize_with = "ser_q")]
    pub r: Q,
    pub level: u32,
    /// `[K : K_r]`, counting preimages in the parametrization of `K`.
    #[serde(serialize_with = "ser_big")]
    pub index_k_kr: BigRational,
    /// `[Υ : Υ_r]`, counting classes in the image `N(K)`.
    #[serde(serialize_with = "ser_big")]
    pub index_upsilon: BigRational,
    /// `[T(F) ∩ K : T(F)_r ∩ K]`, counting residue classes of `T(F)`.
    #[serde(serialize_with = "ser_big")]
    pub index_tf: BigRational,
    pub afttr_holds: bool,
}

/// The three indices of the norm-map comparison at level `N`.
///
/// `K = {∏ X_i(1 + p a_i)}` is enumerated mod `p^N`. The `T(F)` side is
/// enumerated as residue classes of `1 + pO` satisfying the torus equations
/// mod `p^N`; for an unramified extension these classes are exactly the
/// quotient `T(F) ∩ K / T(F) ∩ K^{(N)}`.
pub fn kr_index(ctx: &NormTorusContext, r: Q, big_n: u32, cap: u128) -> Result<KrReport> {
    if qi(big_n as i64) < r + 1 {
        return Err(Error::InvalidInput(format!("need N >= r + 1, got N={big_n}, r={}", fmt_q(r))));
    }
    let ext = &ctx.ext;
    let p = ext.p();
    let n = ext.degree();
    let m = ctx.m();
    let big_n_i = big_n as i64;
    let side = ppow(p, big_n - 1);
    let params = (side as u128)
        .checked_pow((n * m) as u32)
        .filter(|t| *t <= cap)
        .ok_or(Error::CapExceeded { needed: u128::MAX, cap })?;
    let abs = big_n_i * ext.e() as i64;
    let in_kr = |s: &[Elem]| -> Result<bool> {
        let one = Elem::one(ext, abs);
        ctx.chi_value(s)?.sub(&one)?.valuation().at_least(r)
    };

    // [K : K_r] and the image classes of N(K)
    let results: Vec<Result<(bool, Vec<i128>)>> = par::map_range(params as u64, |idx| {
        let a = decode(idx, side, n * m);
        let k: Vec<Elem> = a.chunks(n).map(|c| congruence_point(ext, c, big_n_i)).collect::<Result<_>>()?;
        let s = norm_map(&k, ctx)?;
        let mut key = Vec::new();
        for x in &s {
            key.extend(x.coords_mod(abs)?);
        }
        Ok((in_kr(&s)?, key))
    });
    let mut kr = 0u128;
    let mut image: HashSet<Vec<i128>> = HashSet::new();
    let mut image_r: HashSet<Vec<i128>> = HashSet::new();
    for res in results {
        let (hit, key) = res?;
        if hit {
            kr += 1;
            image_r.insert(key.clone());
        }
        image.insert(key);
    }
    let index_k_kr = BigRational::new(BigInt::from(params), BigInt::from(kr));
    let index_upsilon = BigRational::new(BigInt::from(image.len()), BigInt::from(image_r.len()));

    // T(F) ∩ K at level N
    let full_side = ppow(p, big_n);
    let classes: u128 = match ctx.kind {
        NormTorusKind::SplitProduct => side as u128,
        _ => (side as u128).pow(n as u32),
    };
    if classes > cap {
        return Err(Error::CapExceeded { needed: classes, cap });
    }
    let tf: Vec<Result<Option<bool>>> = par::map_range(classes as u64, |idx| {
        let z = match ctx.kind {
            NormTorusKind::SplitProduct => {
                let mut c = vec![0i128; n];
                c[0] = 1 + p as i128 * idx as i128;
                Elem::from_o(ext, &c, abs)?
            }
            _ => congruence_point(ext, &decode(idx, side, n), big_n_i)?,
        };
        let s = match ctx.kind {
            NormTorusKind::SplitProduct => vec![z],
            NormTorusKind::NormOne => {
                let one = Elem::one(ext, abs);
                if !z.mul(&z.sigma())?.congruent(&one, abs)? {
                    return Ok(None);
                }
                vec![z]
            }
            NormTorusKind::Full => {
                let zs = z.sigma();
                vec![z, zs]
            }
        };
        Ok(Some(in_kr(&s)?))
    });
    let _ = full_side;
    let (mut tf_all, mut tf_r) = (0u128, 0u128);
    for t in tf {
        if let Some(hit) = t? {
            tf_all += 1;
            tf_r += hit as u128;
        }
    }
    let index_tf = BigRational::new(BigInt::from(tf_all), BigInt::from(tf_r));
    let afttr_holds = index_k_kr == index_upsilon && index_upsilon <= index_tf;
    Ok(KrReport { r, level: big_n, index_k_kr, index_upsilon, index_tf, afttr_holds })
}

#[derive(Clone, Debug, Serialize)]
pub struct KrSweep {
    pub reports: Vec<KrReport>,
    /// `c_2 = M·[E:F]`, the degree bound for the polynomial behind `K_r`.
    pub c2: i64,
    /// `max_r q^{r/c_2} / [K : K_r]`.
    pub decay_constant: f64,
}

pub fn kr_sweep(ctx: &NormTorusContext, rs: &[Q], big_n: u32, cap: u128) -> Result<KrSweep> {
    let reports = rs.iter().map(|&r| kr_index(ctx, r, big_n, cap)).collect::<Result<Vec<_>>>()?;
    let c2 = (ctx.big_m() * ctx.degree() as i64).max(1);
    let q = ctx.ext.p();
    let decay_constant = reports
        .iter()
        .map(|rep| {
            let inv = BigRational::one() / &rep.index_k_kr;
            QPowerBound::normalized(&inv, q, -rep.r / c2)
        })
        .fold(0.0, f64::max);
    Ok(KrSweep { reports, c2, decay_constant })
}

/// Shell measures `μ{s ∈ T(F) ∩ K : v(χ(s) − 1) = r}` with `μ(T(F) ∩ K) = 1`,
/// for `r < depth`.
///
/// `T(F) ∩ K` is parametrized by `1 + p·a`, `a ∈ O_F^{[E:F]}` (for the
/// norm-one torus, as the image of `k ↦ k/σ(k)`, which pushes Haar measure
/// forward to Haar measure).
pub fn shell_measures(ctx: &NormTorusContext, depth: Q, cap: u64) -> Result<ValuationMeasure> {
    let ext = ctx.ext.clone();
    let n = match ctx.kind {
        NormTorusKind::SplitProduct => 1,
        _ => ext.degree(),
    };
    let prec_cap = ext.max_prec();
    valuation_measure(ext.p(), n, Domain::All, depth, cap, |a| {
        let k = a.first().map_or(0, |x| x.abs_prec());
        let abs = ((k + 1) * ext.e() as i64).min(prec_cap);
        let mut c = vec![0i128; ext.degree()];
        for (i, x) in a.iter().enumerate() {
            c[i] = if k == 0 { 0 } else { x.to_int_mod(k as u32)? } * ext.p() as i128;
        }
        c[0] += 1;
        let z = Elem::from_o(&ext, &c, abs)?;
        let s = match ctx.kind {
            NormTorusKind::SplitProduct => vec![z],
            NormTorusKind::NormOne => vec![z.div(&z.sigma())?],
            NormTorusKind::Full => {
                let zs = z.sigma();
                vec![z, zs]
            }
        };
        let one = Elem::one(&ext, abs);
        ctx.chi_value(&s)?.sub(&one)
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct TailReport {
    #[serde(serialize_with = "ser_q")]
    pub eps: Q,
    /// `S(r)` for `r = 0..=R` (in steps of `1/e`).
    pub partial_sums: Vec<f64>,
    /// `S(R)` as an exact rational when every `q^{εr}` is rational.
    pub exact: Option<String>,
    pub converging: bool,
    #[serde(serialize_with = "ser_q")]
    pub threshold: Q,
    #[serde(serialize_with = "ser_q")]
    pub sd_threshold: Q,
}

/// `S(R) = Σ_{r ≤ R} q^{εr} μ(shell r)`.
pub fn tail_sum(ctx: &NormTorusContext, eps: Q, big_r: u32, cap: u64) -> Result<TailReport> {
    if eps < qi(0) {
        return Err(Error::InvalidInput("eps must be nonnegative".into()));
    }
    let depth = qi(big_r as i64 + 1);
    let vm = shell_measures(ctx, depth, cap)?;
    let q = ctx.ext.p();
    let e = ctx.ext.e() as i64;
    let mut partial = Vec::new();
    let mut terms = Vec::new();
    let mut exact = Some(BigRational::zero());
    let mut s = 0.0;
    for step in 0..=(big_r as i64 * e) {
        let r = Q::new(step, e);
        let mu = vm.shells.get(&r).cloned().unwrap_or_else(BigRational::zero);
        let w = eps * r;
        let term = QPowerBound::normalized(&mu, q, -w);
        if let Some(ex) = exact.as_mut() {
            if w.is_integer() {
                *ex += &mu * crate::num::big_ppow(q, w.to_integer());
            } else if !mu.is_zero() {
                exact = None;
            }
        }
        s += term;
        partial.push(s);
        if !mu.is_zero() {
            terms.push(term);
        }
    }
    let converging = geometric_decay(&terms);
    Ok(TailReport {
        eps,
        partial_sums: partial,
        exact: exact.map(|x| fmt_big(&x)),
        converging,
        threshold: ctx.threshold(),
        sd_threshold: ctx.sd_threshold(),
    })
}

/// The later half of `terms` shrinks by a uniform factor below 1.
pub fn geometric_decay(terms: &[f64]) -> bool {
    if terms.len() < 3 {
        return false;
    }
    let tail = &terms[terms.len() / 2..];
    tail.windows(2).all(|w| w[0] > 0.0 && w[1] / w[0] < 1.0 - 1e-9)
}

/// The unit used as a "generic" coefficient in polynomial families: the
/// least quadratic non-residue for odd `p`, and 5 for `p = 2`.
pub fn family_unit(p: u64) -> i64 {
    if p == 2 {
        return 5;
    }
    (2..p as i64).find(|&u| crate::num::legendre(u, p) == -1).unwrap()
}

/// Every univariate polynomial of degree `1..=max_deg` with coefficients in
/// `{0, 1, p, p², u}` and nonzero leading coefficient.
pub fn polynomial_family(field: &FieldRef, max_deg: u32, prec: i64) -> Result<Vec<PadicPolynomial>> {
    let p = field.p() as i128;
    let u = family_unit(field.p()) as i128;
    let choices = [0, 1, p, p * p, u];
    let mut out = Vec::new();
    for deg in 1..=max_deg {
        let lower = 5u64.pow(deg);
        for lead in 1..5 {
            for mut idx in 0..lower {
                let mut coeffs = Vec::new();
                for _ in 0..deg {
                    coeffs.push(Elem::integer(field, choices[(idx % 5) as usize], prec)?);
                    idx /= 5;
                }
                coeffs.push(Elem::integer(field, choices[lead], prec)?);
                out.push(PadicPolynomial::univariate(field, &coeffs)?);
            }
        }
    }
    Ok(out)
}

pub fn to_f64(x: &BigRational) -> f64 {
    big_to_f64(x)
}

pub fn as_u128(x: &BigRational) -> Option<u128> {
    if x.is_integer() {
        x.to_integer().to_u128()
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::localfield::{make_field, ExtensionKind};

    fn poly(field: &FieldRef, json: &str) -> PadicPolynomial {
        PadicPolynomial::from_json(field, json, 10).unwrap()
    }

    #[test]
    fn fraction_examples() {
        let f2 = base_field(2);
        let x = poly(&f2, r#"[{"exps":[1],"coeff":"1"}]"#);
        let r = poly_val_fraction(&x, qi(2), 3, 1 << 20).unwrap();
        assert_eq!(r.fraction, BigRational::new(1.into(), 4.into()));
        assert_eq!(r.n1_holds, Some(true));
        let x2 = poly(&f2, r#"[{"exps":[2],"coeff":"1"}]"#);
        let r = poly_val_fraction(&x2, qi(2), 3, 1 << 20).unwrap();
        assert_eq!(r.fraction, BigRational::new(1.into(), 2.into()));
        assert_eq!(x2.m_f(), 2);
        let f3 = base_field(3);
        let g = poly(&f3, r#"[{"exps":[1,3],"coeff":"1"},{"exps":[1,1],"coeff":"1"},{"exps":[0,0],"coeff":"2"}]"#);
        assert_eq!((g.m_i(0), g.m_i(1), g.m_f()), (1, 3, 3));
        let r = poly_val_fraction(&g, qi(1), 3, 1 << 20).unwrap();
        assert_eq!(r.total, 729);
        assert!(r.bound_n1.is_none());
    }

    #[test]
    fn zero_polynomial_rejected() {
        let f = base_field(3);
        assert!(matches!(
            PadicPolynomial::from_json(&f, r#"[{"exps":[1],"coeff":"0"}]"#, 5),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn adaptive_counter_matches_exhaustive() {
        let f = base_field(2);
        let g = poly(&f, r#"[{"exps":[2],"coeff":"1"},{"exps":[1],"coeff":"1"},{"exps":[0],"coeff":"2"}]"#);
        let vm = valuation_measure(2, 1, Domain::All, qi(4), 1 << 20, |x| g.eval(x)).unwrap();
        for r in 0..=4 {
            let ex = poly_val_fraction(&g, qi(r), 4, 1 << 20).unwrap().fraction;
            assert_eq!(vm.at_least(qi(r)), ex, "r={r}");
        }
    }

    #[test]
    fn norm_examples() {
        let e = make_field(3, ExtensionKind::Unramified { modulus: vec![1, 0, 1] }).unwrap();
        let ctx = NormTorusContext::new(&e, NormTorusKind::SplitProduct, vec![1]).unwrap();
        let t = parse_elem(&e, "1+3*t", 8).unwrap();
        let n = norm_map(&[t], &ctx).unwrap();
        assert!(n[0].congruent(&parse_elem(&e, "10", 8).unwrap(), 8).unwrap());
        let two = parse_elem(&e, "2", 8).unwrap();
        assert!(norm_map(&[two], &ctx).unwrap()[0].congruent(&parse_elem(&e, "4", 8).unwrap(), 8).unwrap());
        let ratio = parse_elem(&e, "(2+t)/(2-t)", 8).unwrap();
        let one = parse_elem(&e, "1", 8).unwrap();
        assert!(norm_map(&[ratio], &ctx).unwrap()[0].congruent(&one, 8).unwrap());
    }

    #[test]
    fn kr_split_gl1() {
        let f = base_field(3);
        let ctx = NormTorusContext::new(&f, NormTorusKind::SplitProduct, vec![1]).unwrap();
        for r in 1..=4 {
            let rep = kr_index(&ctx, qi(r), 6, 1 << 24).unwrap();
            assert_eq!(rep.index_k_kr, big(3i64.pow(r as u32 - 1)));
            assert!(rep.afttr_holds);
        }
        let trivial = NormTorusContext::new(&f, NormTorusKind::SplitProduct, vec![0]).unwrap();
        assert_eq!(kr_index(&trivial, qi(3), 6, 1 << 24).unwrap().index_k_kr, big(1));
    }

    #[test]
    fn kr_norm_one_unramified() {
        let e = make_field(3, ExtensionKind::Unramified { modulus: vec![1, 0, 1] }).unwrap();
        let ctx = NormTorusContext::new(&e, NormTorusKind::NormOne, vec![1]).unwrap();
        for r in 1..=3 {
            let rep = kr_index(&ctx, qi(r), 5, 1 << 24).unwrap();
            assert!(rep.afttr_holds, "{rep:?}");
        }
    }

    #[test]
    fn tail_sums() {
        let f = base_field(2);
        let ctx = NormTorusContext::new(&f, NormTorusKind::SplitProduct, vec![1]).unwrap();
        let t = tail_sum(&ctx, qi(0), 20, 1 << 20).unwrap();
        assert!((t.partial_sums.last().unwrap() - 1.0).abs() < 1e-5);
        let t = tail_sum(&ctx, Q::new(1, 2), 30, 1 << 20).unwrap();
        assert!((t.partial_sums.last().unwrap() - (2f64.sqrt() + 1.0)).abs() < 1e-3);
        assert!(t.converging);
        let t = tail_sum(&ctx, qi(1), 20, 1 << 20).unwrap();
        assert!(!t.converging);
        assert_eq!(t.threshold, qi(1));
    }
}
