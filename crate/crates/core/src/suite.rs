//! Verification suites: case planning, execution and JSON reports.
//!
//! Every case is a self-contained [`CaseSpec`]; its serialized form is the
//! `inputs` field of the report, so a case can be re-run from a report alone
//! (see [`replay`]).

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use num_rational::BigRational;
use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::character::{element_invariants, ElementSpec};
use crate::error::{Error, Result};
use crate::fixedpoints::{count_fixed_in_orbit, gl_point_from_simple, UnipotentCosetBox};
use crate::integration::{
    coset_measure, elem_from_ratio, orbital_integral, orbital_integral_gl3_unit, orbital_integral_tree,
    summability_report, weyl_family, weyl_formula_check, KFunction, MeasureContext, TorusKind,
};
use crate::lattice::{verify_lattice_bound, LatticeMatrix, Sublattice};
use crate::localfield::{base_field, make_field, Elem, ExtensionKind};
use crate::measure::{
    family_unit, kr_sweep, poly_val_fraction, polynomial_family, tail_sum, NormTorusContext, NormTorusKind,
    PadicPolynomial,
};
use crate::num::{big, big_ppow, ceil_q, fmt_big, fmt_q, parse_q, ppow, qi, vp_i128, QPowerBound, Q};
use crate::par;
use crate::tree::{diag, mat2_int, Mat2, Tree, TreeVertex};

pub const SCHEMA: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SuiteName {
    Lattice,
    Epimv,
    FixedPoints,
    Above,
    Bermaat,
    Orbital,
    Weyl,
    Summability,
    All,
}

impl SuiteName {
    pub const EACH: [SuiteName; 8] = [
        SuiteName::Lattice,
        SuiteName::Epimv,
        SuiteName::FixedPoints,
        SuiteName::Above,
        SuiteName::Bermaat,
        SuiteName::Orbital,
        SuiteName::Weyl,
        SuiteName::Summability,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            SuiteName::Lattice => "lattice",
            SuiteName::Epimv => "epimv",
            SuiteName::FixedPoints => "fixed-points",
            SuiteName::Above => "above",
            SuiteName::Bermaat => "bermaat",
            SuiteName::Orbital => "orbital",
            SuiteName::Weyl => "weyl",
            SuiteName::Summability => "summability",
            SuiteName::All => "all",
        }
    }
}

impl fmt::Display for SuiteName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SuiteName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        SuiteName::EACH
            .iter()
            .chain([SuiteName::All].iter())
            .find(|n| n.as_str() == s)
            .copied()
            .ok_or_else(|| Error::Parse(format!("unknown suite {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Group {
    Gl2,
    Gl3,
    Sl2,
}

impl FromStr for Group {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gl2" => Ok(Group::Gl2),
            "gl3" => Ok(Group::Gl3),
            "sl2" => Ok(Group::Sl2),
            _ => Err(Error::Parse(format!("unknown group {s:?}"))),
        }
    }
}

/// Inclusive range of small integers; `lo > hi` is an empty sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Span {
    pub lo: u32,
    pub hi: u32,
}

impl Span {
    pub fn new(lo: u32, hi: u32) -> Self {
        Span { lo, hi }
    }

    pub fn iter(&self) -> impl Iterator<Item = u32> {
        self.lo..=self.hi
    }
}

impl FromStr for Span {
    type Err = Error;
    /// `"a..b"` (inclusive) or a single integer.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("bad range {s:?}"));
        match s.split_once("..") {
            Some((a, b)) => Ok(Span::new(a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?)),
            None => {
                let v = s.trim().parse().map_err(|_| bad())?;
                Ok(Span::new(v, v))
            }
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteConfig {
    pub suite: SuiteName,
    /// Empty means each suite's default primes.
    pub primes: Vec<u64>,
    pub prec: Option<i64>,
    pub group: Option<Group>,
    pub level: Option<u32>,
    #[serde(serialize_with = "ser_q_list")]
    pub eps: Option<Vec<Q>>,
    pub cap: Option<u128>,
    pub seed: u64,
    /// Exponents `m` of `γ = diag(1, 1 + p^m)`.
    pub sd: Span,
    /// y-depth offsets above `m`.
    pub depth: Span,
}

fn ser_q_list<S: serde::Serializer>(v: &Option<Vec<Q>>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match v {
        None => s.serialize_none(),
        Some(v) => s.collect_seq(v.iter().map(|x| fmt_q(*x))),
    }
}

impl SuiteConfig {
    pub fn new(suite: SuiteName) -> Self {
        SuiteConfig {
            suite,
            primes: Vec::new(),
            prec: None,
            group: None,
            level: None,
            eps: None,
            cap: None,
            seed: 0,
            sd: Span::new(1, 3),
            depth: Span::new(0, 2),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for &p in &self.primes {
            if !crate::localfield::is_prime(p) {
                return Err(Error::InvalidInput(format!("{p} is not prime")));
            }
        }
        if self.cap == Some(0) {
            return Err(Error::InvalidInput("cap must be positive".into()));
        }
        if let Some(prec) = self.prec {
            // valuations up to 2·sd + depth are compared, plus a margin of 2
            let need = match self.suite {
                SuiteName::Lattice => 1,
                _ => (2 * self.sd.hi + self.depth.hi + 2) as i64,
            };
            if prec < need {
                return Err(Error::InvalidInput(format!("prec {prec} is below the required {need}")));
            }
        }
        if let Some(eps) = &self.eps {
            if eps.iter().any(|e| *e < qi(0)) {
                return Err(Error::InvalidInput("eps must be nonnegative".into()));
            }
        }
        Ok(())
    }

    fn primes_or(&self, default: &[u64]) -> Vec<u64> {
        if self.primes.is_empty() {
            default.to_vec()
        } else {
            self.primes.clone()
        }
    }

    fn cap_or(&self, default: u64) -> u64 {
        self.cap.map_or(default, |c| c.min(u64::MAX as u128) as u64)
    }

    fn prec_or(&self, default: i64) -> i64 {
        self.prec.unwrap_or(default)
    }

    fn groups(&self, default: &[Group]) -> Vec<Group> {
        match self.group {
            Some(g) => vec![g],
            None => default.to_vec(),
        }
    }
}

fn q_str(x: Q) -> String {
    fmt_q(x)
}

fn parse_q_str(s: &str) -> Result<Q> {
    parse_q(s).ok_or_else(|| Error::Parse(format!("bad rational {s:?}")))
}

fn parse_big(s: &str) -> Result<BigRational> {
    s.parse::<BigRational>().map_err(|_| Error::Parse(format!("bad rational {s:?}")))
}

fn parse_mat(g: &[String]) -> Result<Mat2> {
    if g.len() != 4 {
        return Err(Error::InvalidInput("a 2x2 matrix needs 4 entries".into()));
    }
    Ok([parse_big(&g[0])?, parse_big(&g[1])?, parse_big(&g[2])?, parse_big(&g[3])?])
}

fn mat_strings(m: &Mat2) -> Vec<String> {
    m.iter().map(fmt_big).collect()
}

/// `1 + p^m` and friends as exact rationals.
fn one_plus(p: u64, ms: &[i64]) -> BigRational {
    ms.iter().fold(big(1), |acc, &m| acc + big_ppow(p, m))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TorusSpec {
    Split,
    Elliptic { u: i64 },
}

impl fmt::Display for TorusSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TorusSpec::Split => write!(f, "split"),
            TorusSpec::Elliptic { u } => write!(f, "elliptic-u{u}"),
        }
    }
}

impl From<TorusSpec> for TorusKind {
    fn from(t: TorusSpec) -> Self {
        match t {
            TorusSpec::Split => TorusKind::Split,
            TorusSpec::Elliptic { u } => TorusKind::Elliptic { u },
        }
    }
}

/// One verification case. Serialized as the `inputs` of a case record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CaseSpec {
    /// Every `M ∈ M_2(Z_p / p^prec)` with `v(det M) = det_val`; counts
    /// `l ∈ L/L'` with `Ml + v ∈ L'` for `L' = p^sub_k L`.
    LatticeSweep { p: u64, prec: i64, v: Vec<i64>, det_val: u32, sub_k: u32, cap: u64 },
    /// The univariate polynomial family at one `(N, r)`.
    ValuationFamily { p: u64, max_deg: u32, level: u32, r: String, prec: i64, cap: u64 },
    /// One multivariate polynomial over `r = 0..=N`.
    ValuationPoly { p: u64, poly: String, level: u32, c: String, prec: i64, cap: u64 },
    /// `γ` diagonal; fixed points in `U⁺ ∩ P_y` orbit of the origin.
    FixedPoints { group: Group, p: u64, gamma: Vec<String>, y_simple: Vec<i64>, prec: i64, cap: u64 },
    /// Fixed vertices above `x = line(x_level)` in the tree.
    Above { p: u64, gamma: Vec<String>, x_level: i64, c: String, prec: i64 },
    /// `μ_{T\G}(TgK)` with an orbit-size cross-check in the tree.
    CosetMeasure { p: u64, level: u32, torus: TorusSpec, g: Vec<String>, cap: u64 },
    /// GL_2 orbital integral of `f` on both routes.
    Orbital { p: u64, torus: TorusSpec, gamma: Vec<String>, f: String, level: u32, c: String, prec: i64 },
    /// `∫_{T\G} 1_K` for diagonal `γ` in GL_3.
    OrbitalGl3 { p: u64, gamma: Vec<String>, c: String, prec: i64, cap: u64 },
    Weyl { p: u64, level: u32, f: String, cap: u64 },
    Summability { torus: String, p: u64, eps: String, m: u32, r_max: u32, cap: u64 },
    NormIndex { p: u64, torus: String, rs: Vec<String>, level: u32, cap: u64 },
    TailSum { p: u64, torus: String, eps: String, r_max: u32, cap: u64 },
}

fn pad(n: i64) -> String {
    format!("{n:03}")
}

impl CaseSpec {
    pub fn suite(&self) -> SuiteName {
        match self {
            CaseSpec::LatticeSweep { .. } => SuiteName::Lattice,
            CaseSpec::ValuationFamily { .. } | CaseSpec::ValuationPoly { .. } => SuiteName::Epimv,
            CaseSpec::FixedPoints { .. } => SuiteName::FixedPoints,
            CaseSpec::Above { .. } => SuiteName::Above,
            CaseSpec::CosetMeasure { .. } => SuiteName::Bermaat,
            CaseSpec::Orbital { .. } | CaseSpec::OrbitalGl3 { .. } => SuiteName::Orbital,
            CaseSpec::Weyl { .. } => SuiteName::Weyl,
            CaseSpec::Summability { .. } | CaseSpec::NormIndex { .. } | CaseSpec::TailSum { .. } => {
                SuiteName::Summability
            }
        }
    }

    /// Sort key; unique within a report.
    pub fn key(&self) -> String {
        let s = self.suite();
        match self {
            CaseSpec::LatticeSweep { p, v, det_val, .. } => {
                format!("{s}/p{}/det{}/v{}", pad(*p as i64), det_val, v.iter().map(|x| pad(*x)).collect::<Vec<_>>().join(","))
            }
            CaseSpec::ValuationFamily { p, level, r, .. } => format!("{s}/p{}/n1/N{level}/r{r}", pad(*p as i64)),
            CaseSpec::ValuationPoly { p, poly, level, .. } => format!("{s}/p{}/n2/N{level}/{poly}", pad(*p as i64)),
            CaseSpec::FixedPoints { group, p, gamma, y_simple, .. } => format!(
                "{s}/{group:?}/p{}/{}/y{}",
                pad(*p as i64),
                gamma.join(","),
                y_simple.iter().map(|x| pad(*x)).collect::<Vec<_>>().join(",")
            )
            .to_lowercase(),
            CaseSpec::Above { p, gamma, x_level, .. } => {
                format!("{s}/p{}/{}/x{:+04}", pad(*p as i64), gamma.join(","), x_level)
            }
            CaseSpec::CosetMeasure { p, level, torus, g, .. } => {
                format!("{s}/p{}/{torus}/N{level}/{}", pad(*p as i64), g.join(","))
            }
            CaseSpec::Orbital { p, torus, gamma, f, .. } => {
                format!("{s}/gl2/p{}/{torus}/{}/{f}", pad(*p as i64), gamma.join(","))
            }
            CaseSpec::OrbitalGl3 { p, gamma, .. } => format!("{s}/gl3/p{}/{}", pad(*p as i64), gamma.join(",")),
            CaseSpec::Weyl { p, level, f, .. } => format!("{s}/p{}/N{level}/{f}", pad(*p as i64)),
            CaseSpec::Summability { torus, p, eps, m, .. } => {
                format!("{s}/sum/{torus}/p{}/m{m}/eps{eps}", pad(*p as i64))
            }
            CaseSpec::NormIndex { p, torus, level, .. } => format!("{s}/index/{torus}/p{}/N{level}", pad(*p as i64)),
            CaseSpec::TailSum { p, torus, eps, .. } => format!("{s}/tail/{torus}/p{}/eps{eps}", pad(*p as i64)),
        }
    }

    /// Computes the case; returns its outputs and whether every checked
    /// bound or identity holds.
    pub fn run(&self) -> Result<(Value, bool)> {
        match self {
            CaseSpec::LatticeSweep { p, prec, v, det_val, sub_k, cap } => {
                run_lattice(*p, *prec, v, *det_val, *sub_k, (*cap).into())
            }
            CaseSpec::ValuationFamily { p, max_deg, level, r, prec, cap } => {
                run_valuation_family(*p, *max_deg, *level, parse_q_str(r)?, *prec, (*cap).into())
            }
            CaseSpec::ValuationPoly { p, poly, level, c, prec, cap } => {
                run_valuation_poly(*p, poly, *level, &parse_big(c)?, *prec, (*cap).into())
            }
            CaseSpec::FixedPoints { group, p, gamma, y_simple, prec, cap } => {
                run_fixed_points(*group, *p, gamma, y_simple, *prec, (*cap).into())
            }
            CaseSpec::Above { p, gamma, x_level, c, prec } => run_above(*p, gamma, *x_level, &parse_big(c)?, *prec),
            CaseSpec::CosetMeasure { p, level, torus, g, cap } => {
                run_coset_measure(*p, *level, torus.clone().into(), &parse_mat(g)?, (*cap).into())
            }
            CaseSpec::Orbital { p, torus, gamma, f, level, c, prec } => {
                let mut ctx = MeasureContext::new(*p, *level, torus.clone().into())?;
                ctx.prec = *prec;
                let g = parse_mat(gamma)?;
                let f: KFunction = f.parse()?;
                let r = orbital_integral(&g, &f, &ctx, &parse_big(c)?)?;
                let tree = orbital_integral_tree(&g, &f, &ctx)?;
                let agree = tree == r.value;
                let mut out = serde_json::to_value(&r).unwrap();
                out["tree_value"] = json!(fmt_big(&tree));
                out["routes_agree"] = json!(agree);
                Ok((out, r.holds && agree))
            }
            CaseSpec::OrbitalGl3 { p, gamma, c, prec, cap } => run_orbital_gl3(*p, gamma, &parse_big(c)?, *prec, (*cap).into()),
            CaseSpec::Weyl { p, level, f, cap } => {
                let r = weyl_formula_check(&f.parse()?, *p, *level, (*cap).into())?;
                let ok = r.equal;
                Ok((serde_json::to_value(&r).unwrap(), ok))
            }
            CaseSpec::Summability { torus, p, eps, m, r_max, cap } => {
                let r = summability_report(torus.parse()?, *p, parse_q_str(eps)?, *m, *r_max, *cap)?;
                let ok = r.monotone && r.differences_decreasing;
                Ok((serde_json::to_value(&r).unwrap(), ok))
            }
            CaseSpec::NormIndex { p, torus, rs, level, cap } => {
                let ctx = norm_context(*p, torus)?;
                let rs = rs.iter().map(|r| parse_q_str(r)).collect::<Result<Vec<_>>>()?;
                let s = kr_sweep(&ctx, &rs, *level, (*cap).into())?;
                let ok = s.reports.iter().all(|r| r.afttr_holds) && s.decay_constant.is_finite();
                Ok((serde_json::to_value(&s).unwrap(), ok))
            }
            CaseSpec::TailSum { p, torus, eps, r_max, cap } => {
                let ctx = norm_context(*p, torus)?;
                let t = tail_sum(&ctx, parse_q_str(eps)?, *r_max, *cap)?;
                let ok = t.converging;
                Ok((serde_json::to_value(&t).unwrap(), ok))
            }
        }
    }
}

fn norm_context(p: u64, torus: &str) -> Result<NormTorusContext> {
    let ext = make_field(p, ExtensionKind::unramified(p, 2))?;
    let kind = match torus {
        "split-product" => NormTorusKind::SplitProduct,
        "norm-one" => NormTorusKind::NormOne,
        "full" => NormTorusKind::Full,
        _ => return Err(Error::Parse(format!("unknown norm torus {torus:?}"))),
    };
    let chi = if kind == NormTorusKind::Full { vec![1, 0] } else { vec![1] };
    NormTorusContext::new(&ext, kind, chi)
}

fn run_lattice(p: u64, prec: i64, v: &[i64], det_val: u32, sub_k: u32, cap: u128) -> Result<(Value, bool)> {
    let f = base_field(p);
    let sub = Sublattice::scaled(&f, 2, sub_k, prec)?;
    let vv = v.iter().map(|&x| Elem::integer(&f, x as i128, prec)).collect::<Result<Vec<_>>>()?;
    let side = ppow(p, prec as u32);
    let total = (side as u128).pow(4);
    if total > cap {
        return Err(Error::CapExceeded { needed: total, cap });
    }
    let per: Vec<Result<(u64, u128, u64)>> = par::map_range(side as u64, |a| {
        let a = a as i128;
        let (mut n, mut max, mut bad) = (0u64, 0u128, 0u64);
        for b in 0..side {
            for c in 0..side {
                for d in 0..side {
                    let det = (a * d - b * c).rem_euclid(side);
                    if det == 0 || vp_i128(det, p) != Some(det_val) {
                        continue;
                    }
                    let m = LatticeMatrix::from_residues(&f, &[vec![a, b], vec![c, d]], prec)?;
                    let rep = verify_lattice_bound(&m, &vv, &sub, cap)?;
                    n += 1;
                    max = max.max(rep.count);
                    bad += (!rep.holds) as u64;
                }
            }
        }
        Ok((n, max, bad))
    });
    let (mut n, mut max, mut bad) = (0, 0, 0);
    for r in per {
        let (a, b, c) = r?;
        n += a;
        max = max.max(b);
        bad += c;
    }
    let bound = ppow(p, det_val) as u128;
    Ok((json!({ "matrices": n, "max_count": max, "bound": bound, "violations": bad }), bad == 0))
}

fn run_valuation_family(p: u64, max_deg: u32, level: u32, r: Q, prec: i64, cap: u128) -> Result<(Value, bool)> {
    let f = base_field(p);
    let family = polynomial_family(&f, max_deg, prec)?;
    let res = par::try_map(&family, |poly| poly_val_fraction(poly, r, level, cap))?;
    let mut worst = 0.0f64;
    let mut bad = 0u64;
    for vf in &res {
        if let Some(b) = &vf.bound_n1 {
            let ratio = crate::measure::to_f64(&vf.fraction) / b.to_f64();
            worst = worst.max(ratio);
        }
        bad += (vf.n1_holds == Some(false)) as u64;
    }
    Ok((
        json!({ "polynomials": family.len(), "violations": bad, "max_fraction_over_bound": worst }),
        bad == 0,
    ))
}

fn run_valuation_poly(p: u64, poly: &str, level: u32, c: &BigRational, prec: i64, cap: u128) -> Result<(Value, bool)> {
    let f = base_field(p);
    let pf = PadicPolynomial::from_json(&f, poly, prec)?;
    let mut shapes = Vec::new();
    let mut fractions = Vec::new();
    for r in 0..=level {
        let vf = poly_val_fraction(&pf, qi(r as i64), level, cap)?;
        shapes.push(vf.mf_shape);
        fractions.push(fmt_big(&vf.fraction));
    }
    let max_shape = shapes.iter().copied().fold(0.0, f64::max);
    let c_emp = max_shape / level.max(1) as f64;
    let ok = c_emp <= c.to_f64().unwrap_or(f64::INFINITY);
    Ok((
        json!({ "m_f": pf.m_f(), "fractions": fractions, "shape": shapes, "c_empirical": c_emp }),
        ok,
    ))
}

fn diag_elems(p: u64, gamma: &[String], prec: i64) -> Result<Vec<Elem>> {
    let f = base_field(p);
    gamma.iter().map(|g| elem_from_ratio(&f, &parse_big(g)?, prec)).collect()
}

fn run_fixed_points(group: Group, p: u64, gamma: &[String], y: &[i64], prec: i64, cap: u128) -> Result<(Value, bool)> {
    let g = diag_elems(p, gamma, prec)?;
    let f = base_field(p);
    let ys: Vec<Q> = y.iter().map(|&d| qi(d)).collect();
    let yp = gl_point_from_simple(&ys);
    let bx = UnipotentCosetBox::new(&f, &vec![qi(0); g.len()], &yp)?;
    let rep = count_fixed_in_orbit(&g, &bx, cap)?;
    let full = QPowerBound::new(big(1), p, rep.bound_exponent).admits_count(rep.count)
        && QPowerBound::new(big(1), p, rep.bound_exponent).to_f64() <= rep.count as f64 + 0.5;
    let mut out = serde_json::to_value(&rep).unwrap();
    out["attains_bound"] = json!(full);
    let mut ok = rep.holds;
    if group != Group::Gl3 {
        let tree = Tree::new(p);
        let m = diag(parse_big(&gamma[0])?, parse_big(&gamma[1])?);
        let tc = tree.count_fixed_in_unipotent_orbit(&m, y[0] as u32)?;
        out["tree_count"] = json!(tc);
        ok &= tc == rep.count;
    }
    Ok((out, ok))
}

fn run_above(p: u64, gamma: &[String], x_level: i64, c: &BigRational, prec: i64) -> Result<(Value, bool)> {
    let inv = element_invariants(&ElementSpec::Split(diag_elems(p, gamma, prec)?))?;
    let sd = ceil_q(inv.sd);
    let radius = (inv.max_height * sd + 1) as u32;
    let tree = Tree::new(p);
    let m = diag(parse_big(&gamma[0])?, parse_big(&gamma[1])?);
    let a = tree.count_fixed_above(&m, &TreeVertex::line(x_level), radius)?;
    let weight = inv.sd * inv.max_height + qi(1);
    let bound = QPowerBound::new(c * crate::num::big_q(weight), inv.q, inv.d_valuation / 2);
    let value = big(a.count as i64);
    let c_emp = QPowerBound::normalized(&value, inv.q, inv.d_valuation / 2) / weight.to_f64().unwrap_or(1.0);
    let ok = a.beyond == 0 && bound.admits(&value);
    Ok((
        json!({
            "count": a.count,
            "per_layer": a.per_layer,
            "beyond": a.beyond,
            "radius": radius,
            "sd": q_str(inv.sd),
            "d_valuation": q_str(inv.d_valuation),
            "bound": bound,
            "c_empirical": c_emp,
        }),
        ok,
    ))
}

/// Size of the `T ∩ K`-orbit of `g·o`, by acting with `T(Z/p^L)` where `L`
/// is the distance from the origin (the level-`L` congruence subgroup
/// fixes the whole ball of that radius).
pub fn torus_orbit_size(p: u64, torus: TorusKind, g: &Mat2) -> Result<u128> {
    let tree = Tree::new(p);
    let z = tree.normalize(g)?;
    let l = tree.distance(&z, &TreeVertex::origin()).max(1) as u32;
    let side = ppow(p, l) as i64;
    let pi = p as i64;
    let mut seen = std::collections::BTreeSet::new();
    for x in 0..side {
        for y in 0..side {
            let t = match torus {
                TorusKind::Split if x % pi != 0 && y % pi != 0 => mat2_int(x, 0, 0, y),
                TorusKind::Elliptic { u } if x % pi != 0 || y % pi != 0 => mat2_int(x, u * y, y, x),
                _ => continue,
            };
            seen.insert(tree.act(&t, &z)?);
        }
    }
    Ok(seen.len() as u128)
}

fn run_coset_measure(p: u64, level: u32, torus: TorusKind, g: &Mat2, cap: u128) -> Result<(Value, bool)> {
    let ctx = MeasureContext::new(p, level, torus)?.with_cap(cap);
    let mu = coset_measure(&ctx, g)?;
    let orbit = torus_orbit_size(p, torus, g)?;
    let ok = mu == big(orbit as i64);
    Ok((json!({ "measure": fmt_big(&mu), "tree_orbit": orbit, "stable_levels": [level, level + 1] }), ok))
}

fn run_orbital_gl3(p: u64, gamma: &[String], c: &BigRational, prec: i64, cap: u128) -> Result<(Value, bool)> {
    let g = diag_elems(p, gamma, prec)?;
    let inv = element_invariants(&ElementSpec::Split(g.clone()))?;
    let horizon = (inv.max_height * ceil_q(inv.sd) + 1) as u32;
    let value = orbital_integral_gl3_unit(&g, horizon, cap)?;
    let rank = 2;
    let weight = (inv.sd * inv.max_height + qi(1)).to_f64().unwrap_or(1.0).powi(rank);
    let bound_coeff = c * big((weight.round()) as i64);
    let bound = QPowerBound::new(bound_coeff, inv.q, inv.d_valuation / 2);
    let v = big(value as i64);
    let normalized = QPowerBound::normalized(&v, inv.q, inv.d_valuation / 2) / weight;
    Ok((
        json!({
            "value": value,
            "horizon": horizon,
            "invariants": inv,
            "bound": bound,
            "normalized": normalized,
        }),
        bound.admits(&v),
    ))
}

/// Cases of one suite under `cfg`.
pub fn plan(cfg: &SuiteConfig, suite: SuiteName) -> Result<Vec<CaseSpec>> {
    let mut out = Vec::new();
    match suite {
        SuiteName::All => {
            for s in SuiteName::EACH {
                out.extend(plan(cfg, s)?);
            }
        }
        SuiteName::Lattice => {
            let prec = cfg.prec_or(3);
            for p in cfg.primes_or(&[3]) {
                for det_val in [1, 2] {
                    for v in [[0, 0], [1, 0], [0, 1], [1, 2], [4, 7]] {
                        out.push(CaseSpec::LatticeSweep {
                            p,
                            prec,
                            v: v.to_vec(),
                            det_val,
                            sub_k: 2,
                            cap: cfg.cap_or(1 << 24),
                        });
                    }
                }
            }
        }
        SuiteName::Epimv => {
            let levels = cfg.level.map_or(Span::new(1, 4), |n| Span::new(n, n));
            for p in cfg.primes_or(&[2, 3]) {
                let u = family_unit(p);
                for n in levels.iter() {
                    for r in 0..=n {
                        out.push(CaseSpec::ValuationFamily {
                            p,
                            max_deg: 4,
                            level: n,
                            r: r.to_string(),
                            prec: cfg.prec_or(12),
                            cap: cfg.cap_or(1 << 20),
                        });
                    }
                    for poly in bivariate_family(p, u) {
                        out.push(CaseSpec::ValuationPoly {
                            p,
                            poly,
                            level: n,
                            c: "4".into(),
                            prec: cfg.prec_or(12),
                            cap: cfg.cap_or(1 << 20),
                        });
                    }
                }
            }
        }
        SuiteName::FixedPoints => {
            for group in cfg.groups(&[Group::Gl2, Group::Gl3]) {
                for p in cfg.primes_or(&[2, 3]) {
                    match group {
                        Group::Gl2 | Group::Sl2 => {
                            for m in cfg.sd.iter() {
                                for off in cfg.depth.iter() {
                                    out.push(CaseSpec::FixedPoints {
                                        group,
                                        p,
                                        gamma: gl2_gamma(group, p, m),
                                        y_simple: vec![(m + off) as i64],
                                        prec: cfg.prec_or(16),
                                        cap: cfg.cap_or(1 << 30),
                                    });
                                }
                            }
                        }
                        Group::Gl3 => {
                            if !cfg.sd.iter().any(|m| m == 1) {
                                continue;
                            }
                            for off in cfg.depth.iter() {
                                let d = (1 + off) as i64;
                                out.push(CaseSpec::FixedPoints {
                                    group,
                                    p,
                                    gamma: gl3_gamma(p),
                                    y_simple: vec![d, d],
                                    prec: cfg.prec_or(16),
                                    cap: cfg.cap_or(1 << 30),
                                });
                            }
                        }
                    }
                }
            }
        }
        SuiteName::Above => {
            for group in cfg.groups(&[Group::Gl2]) {
                if group == Group::Gl3 {
                    continue;
                }
                for p in cfg.primes_or(&[2, 3]) {
                    for m in cfg.sd.iter() {
                        for x_level in [-1, 0, 1] {
                            out.push(CaseSpec::Above {
                                p,
                                gamma: gl2_gamma(group, p, m),
                                x_level,
                                c: "1".into(),
                                prec: cfg.prec_or(16),
                            });
                        }
                    }
                }
            }
        }
        SuiteName::Bermaat => {
            let levels = cfg.level.map_or(Span::new(3, 4), |n| Span::new(n, n));
            for p in cfg.primes_or(&[2, 3]) {
                let family = coset_family(p, cfg.seed);
                for n in levels.iter() {
                    for g in &family {
                        out.push(CaseSpec::CosetMeasure {
                            p,
                            level: n,
                            torus: TorusSpec::Split,
                            g: mat_strings(g),
                            cap: cfg.cap_or(1 << 26),
                        });
                    }
                    if p > 2 {
                        for k in 0..3 {
                            let g = [big_ppow(p, k), big(0), big(0), big(1)];
                            out.push(CaseSpec::CosetMeasure {
                                p,
                                level: n,
                                torus: TorusSpec::Elliptic { u: family_unit(p) },
                                g: mat_strings(&g),
                                cap: cfg.cap_or(1 << 26),
                            });
                        }
                    }
                }
            }
        }
        SuiteName::Orbital => {
            let level = cfg.level.unwrap_or(2);
            for group in cfg.groups(&[Group::Gl2, Group::Gl3]) {
                // GL_3 over Q_3 needs 3^24 representatives at the horizon check
                let primes = cfg.primes_or(if group == Group::Gl3 { &[2] } else { &[2, 3] });
                for p in primes {
                    match group {
                        Group::Gl2 | Group::Sl2 => {
                            for m in cfg.sd.iter() {
                                let g = gl2_gamma(group, p, m);
                                let gamma = vec![g[0].clone(), "0".into(), "0".into(), g[1].clone()];
                                for f in ["K", "elliptic"] {
                                    out.push(CaseSpec::Orbital {
                                        p,
                                        torus: TorusSpec::Split,
                                        gamma: gamma.clone(),
                                        f: f.into(),
                                        level,
                                        c: "1".into(),
                                        prec: cfg.prec_or(16),
                                    });
                                }
                                if p > 2 && group == Group::Gl2 {
                                    let u = family_unit(p);
                                    let b = big_ppow(p, m as i64);
                                    let gamma = [big(1), &b * big(u), b.clone(), big(1)];
                                    out.push(CaseSpec::Orbital {
                                        p,
                                        torus: TorusSpec::Elliptic { u },
                                        gamma: mat_strings(&gamma),
                                        f: "K".into(),
                                        level,
                                        c: "1".into(),
                                        prec: cfg.prec_or(16),
                                    });
                                }
                            }
                        }
                        Group::Gl3 => {
                            if cfg.sd.iter().any(|m| m == 1) {
                                out.push(CaseSpec::OrbitalGl3 {
                                    p,
                                    gamma: gl3_gamma(p),
                                    c: "1".into(),
                                    prec: cfg.prec_or(16),
                                    cap: cfg.cap_or(1 << 32),
                                });
                            }
                        }
                    }
                }
            }
        }
        SuiteName::Weyl => {
            for p in cfg.primes_or(&[2, 3]) {
                let level = cfg.level.unwrap_or(if p == 2 { 2 } else { 3 });
                for f in weyl_family(p) {
                    out.push(CaseSpec::Weyl { p, level, f: f.to_string(), cap: cfg.cap_or(1 << 26) });
                }
            }
        }
        SuiteName::Summability => {
            let cap = cfg.cap_or(1 << 22);
            let gl1_eps = cfg.eps.clone().unwrap_or_else(|| vec![qi(0), Q::new(1, 2)]);
            let gl2_eps = cfg.eps.clone().unwrap_or_else(|| vec![qi(0), Q::new(1, 8)]);
            for p in cfg.primes_or(&[2]) {
                for &eps in &gl1_eps {
                    out.push(CaseSpec::Summability { torus: "gl1".into(), p, eps: q_str(eps), m: 0, r_max: 30, cap });
                }
            }
            for p in cfg.primes_or(&[3]) {
                for &eps in &gl2_eps {
                    out.push(CaseSpec::Summability { torus: "gl2".into(), p, eps: q_str(eps), m: 1, r_max: 12, cap });
                }
            }
            for p in cfg.primes_or(&[3]) {
                if p == 2 {
                    continue;
                }
                for torus in ["norm-one", "split-product"] {
                    out.push(CaseSpec::NormIndex {
                        p,
                        torus: torus.into(),
                        rs: (1..=4).map(|r| r.to_string()).collect(),
                        level: cfg.level.unwrap_or(6),
                        cap: cfg.cap_or(1 << 24),
                    });
                }
                let tail_eps = cfg.eps.clone().unwrap_or_else(|| vec![qi(0), Q::new(1, 4)]);
                for &eps in &tail_eps {
                    out.push(CaseSpec::TailSum { p, torus: "norm-one".into(), eps: q_str(eps), r_max: 8, cap });
                }
            }
        }
    }
    Ok(out)
}

fn gl2_gamma(group: Group, p: u64, m: u32) -> Vec<String> {
    let l = one_plus(p, &[m as i64]);
    match group {
        Group::Sl2 => vec![fmt_big(&l), fmt_big(&(big(1) / &l))],
        _ => vec!["1".into(), fmt_big(&l)],
    }
}

/// `diag(1, 1 + p, 1 + p + p²)`: root valuations 1, 2 on the simple roots.
fn gl3_gamma(p: u64) -> Vec<String> {
    vec!["1".into(), fmt_big(&one_plus(p, &[1])), fmt_big(&one_plus(p, &[1, 2]))]
}

fn bivariate_family(p: u64, u: i64) -> Vec<String> {
    let term = |e: [u32; 2], c: String| format!(r#"{{"exps":[{},{}],"coeff":"{}"}}"#, e[0], e[1], c);
    vec![
        format!("[{}]", term([1, 1], "1".into())),
        format!("[{},{}]", term([2, 0], "1".into()), term([0, 2], format!("{}", -(u as i128)))),
        format!("[{},{}]", term([2, 0], "1".into()), term([0, 1], p.to_string())),
        format!("[{},{}]", term([3, 0], "1".into()), term([0, 2], "-1".into())),
        format!("[{},{}]", term([1, 1], "1".into()), term([0, 0], p.to_string())),
    ]
}

/// Twenty conjugators: fixed shapes plus seeded random integral matrices
/// with `v(det) ≤ 2`.
fn coset_family(p: u64, seed: u64) -> Vec<Mat2> {
    let pb = |k: i64| big_ppow(p, k);
    let mut fam: Vec<Mat2> = vec![
        mat2_int(1, 0, 0, 1),
        diag(pb(1), big(1)),
        diag(big(1), pb(1)),
        diag(pb(2), big(1)),
        [big(1), pb(-1), big(0), big(1)],
        [big(1), pb(-2), big(0), big(1)],
        [big(1), pb(-3), big(0), big(1)],
        [big(1), big(0), pb(-1), big(1)],
        [pb(1), big(1), big(0), big(1)],
        [big(1), big(1), big(0), pb(1)],
        [pb(2), big(1), big(0), big(1)],
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ p);
    let side = ppow(p, 2) as i64;
    while fam.len() < 20 {
        let e: Vec<i64> = (0..4).map(|_| rng.gen_range(0..side)).collect();
        let det = e[0] * e[3] - e[1] * e[2];
        if det == 0 || vp_i128(det as i128, p).is_none_or(|v| v > 2) {
            continue;
        }
        let g = mat2_int(e[0], e[1], e[2], e[3]);
        if !fam.contains(&g) {
            fam.push(g);
        }
    }
    fam
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Ok,
    Violation,
    Precision,
    Error,
}

#[derive(Clone, Debug, Serialize)]
pub struct CaseRecord {
    pub key: String,
    pub suite: SuiteName,
    pub inputs: CaseSpec,
    pub status: Status,
    pub holds: Option<bool>,
    pub outputs: Option<Value>,
    pub error: Option<String>,
}

pub fn run_case(spec: &CaseSpec) -> CaseRecord {
    let (status, holds, outputs, error) = match spec.run() {
        Ok((v, true)) => (Status::Ok, Some(true), Some(v), None),
        Ok((v, false)) => (Status::Violation, Some(false), Some(v), None),
        Err(e) if e.is_resource() => (Status::Precision, None, None, Some(e.to_string())),
        Err(e) => (Status::Error, None, None, Some(e.to_string())),
    };
    CaseRecord { key: spec.key(), suite: spec.suite(), inputs: spec.clone(), status, holds, outputs, error }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Summary {
    pub cases: usize,
    pub ok: usize,
    pub violations: usize,
    pub precision: usize,
    pub errors: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub schema: u32,
    pub suite: SuiteName,
    pub config: SuiteConfig,
    pub vacuous: bool,
    pub summary: Summary,
    pub exit_code: i32,
    pub cases: Vec<CaseRecord>,
    /// Wall-clock milliseconds per case key; the only non-deterministic
    /// part of the report.
    pub timing_ms: BTreeMap<String, f64>,
}

impl SuiteReport {
    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).unwrap()
    }
}

/// Exit code for a set of statuses: 1 on any violation, else 2 on any
/// precision or cap failure, else 3 for other case errors.
pub fn exit_code_for(summary: &Summary) -> i32 {
    if summary.violations > 0 {
        1
    } else if summary.precision > 0 {
        2
    } else if summary.errors > 0 {
        3
    } else {
        0
    }
}

pub fn run_suite(cfg: &SuiteConfig) -> Result<SuiteReport> {
    cfg.validate()?;
    let specs = plan(cfg, cfg.suite)?;
    let timed: Vec<(CaseRecord, f64)> = par::map(&specs, |s| {
        let t = Instant::now();
        let r = run_case(s);
        (r, t.elapsed().as_secs_f64() * 1e3)
    });
    let mut cases = Vec::with_capacity(timed.len());
    let mut timing_ms = BTreeMap::new();
    for (r, ms) in timed {
        if timing_ms.insert(r.key.clone(), ms).is_some() {
            return Err(Error::InvalidInput(format!("duplicate case key {}", r.key)));
        }
        cases.push(r);
    }
    cases.sort_by(|a, b| a.key.cmp(&b.key));
    let mut summary = Summary { cases: cases.len(), ..Default::default() };
    for c in &cases {
        match c.status {
            Status::Ok => summary.ok += 1,
            Status::Violation => summary.violations += 1,
            Status::Precision => summary.precision += 1,
            Status::Error => summary.errors += 1,
        }
    }
    let exit_code = exit_code_for(&summary);
    Ok(SuiteReport {
        schema: SCHEMA,
        suite: cfg.suite,
        config: cfg.clone(),
        vacuous: cases.is_empty(),
        summary,
        exit_code,
        cases,
        timing_ms,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ReplayReport {
    pub cases: usize,
    pub reproduced: usize,
    pub mismatches: Vec<String>,
}

/// Re-runs every case of a serialized report from its `inputs` and compares
/// status and outputs.
pub fn replay(report: &Value) -> Result<ReplayReport> {
    if report.get("schema").and_then(Value::as_u64) != Some(SCHEMA as u64) {
        return Err(Error::Parse("report schema is not 1".into()));
    }
    let cases = report
        .get("cases")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::Parse("report has no cases array".into()))?;
    let specs = cases
        .iter()
        .map(|c| {
            let spec: CaseSpec = serde_json::from_value(c["inputs"].clone()).map_err(|e| Error::Parse(e.to_string()))?;
            Ok((spec, c.clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    let results = par::map(&specs, |(spec, old)| {
        let new = serde_json::to_value(run_case(spec)).unwrap();
        let same = new["status"] == old["status"] && new["outputs"] == old["outputs"] && new["key"] == old["key"];
        (spec.key(), same)
    });
    let mismatches: Vec<String> = results.iter().filter(|(_, ok)| !ok).map(|(k, _)| k.clone()).collect();
    Ok(ReplayReport { cases: results.len(), reproduced: results.len() - mismatches.len(), mismatches })
}

/// The report with its timing removed, for determinism comparisons.
pub fn without_timing(mut report: Value) -> Value {
    if let Some(o) = report.as_object_mut() {
        o.remove("timing_ms");
    }
    report
}
