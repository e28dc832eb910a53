//! Per-element invariants: root valuations, the D-function, singular depth,
//! compactness, displacement, and the polysimplex count of apartment boxes.

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Pow, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::localfield::{Elem, FieldRef, Valuation};
use crate::num::{big_q, fmt_q, qi, QPowerBound, Q};
use crate::rootsys::{rank_of, ApartmentPoint, RootSystemData, RootSystemName};

/// A semisimple element of GL_n given through its eigenvalues.
#[derive(Clone, Debug)]
pub enum ElementSpec {
    /// Diagonal entries of an element of the split diagonal torus.
    Split(Vec<Elem>),
    /// `a + b·t` in a quadratic extension `E = F(t)`, acting on `E ≅ F²`
    /// (the matrix `[[a, u b], [b, a]]` when `t² = u`).
    Elliptic { a: Elem, b: Elem, ext: FieldRef },
}

impl ElementSpec {
    /// Eigenvalues over the splitting field.
    pub fn eigenvalues(&self) -> Result<Vec<Elem>> {
        match self {
            ElementSpec::Split(d) => Ok(d.clone()),
            ElementSpec::Elliptic { a, b, ext } => {
                if ext.degree() != 2 {
                    return Err(Error::InvalidInput("elliptic tori need a quadratic extension".into()));
                }
                let t = Elem::generator(ext, b.rel_prec().max(a.abs_prec()).max(1))?;
                let g = a.embed(ext)?.add(&b.embed(ext)?.mul(&t)?)?;
                let conj = g.sigma();
                Ok(vec![g, conj])
            }
        }
    }

    pub fn rank(&self) -> usize {
        match self {
            ElementSpec::Split(d) => d.len(),
            ElementSpec::Elliptic { .. } => 2,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RootValuation {
    /// `e_i-e_j` for the root `χ_i/χ_j`.
    pub root: String,
    #[serde(serialize_with = "ser_val")]
    pub valuation: Valuation,
}

fn ser_val<S: serde::Serializer>(v: &Valuation, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_string())
}

fn ser_q<S: serde::Serializer>(v: &Q, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&fmt_q(*v))
}

fn ser_qs<S: serde::Serializer>(v: &[Q], s: S) -> std::result::Result<S::Ok, S::Error> {
    v.iter().map(|x| fmt_q(*x)).collect::<Vec<_>>().serialize(s)
}

#[derive(Clone, Debug, Serialize)]
pub struct ElementInvariants {
    pub root_valuations: Vec<RootValuation>,
    /// `v(D(γ)) = Σ_α v(α(γ) − 1)`.
    #[serde(serialize_with = "ser_q")]
    pub d_valuation: Q,
    /// `q^λ = |D(γ)|`, so `λ = −v(D)`.
    #[serde(serialize_with = "ser_q")]
    pub lambda: Q,
    /// Singular depth: the largest root valuation.
    #[serde(serialize_with = "ser_q")]
    pub sd: Q,
    #[serde(serialize_with = "ser_qs")]
    pub eigenvalue_valuations: Vec<Q>,
    pub compact: bool,
    pub compact_mod_center: bool,
    pub regular: bool,
    /// Residue order of the ground field.
    pub q: u64,
    /// `ht(Φ) = n − 1` for GL_n.
    pub max_height: i64,
}

/// Root valuations and flags for `γ` in GL_n.
///
/// Fails with `PrecisionInsufficient` when some `α(γ) ≡ 1` to the working
/// precision, and with `Degenerate` when two eigenvalues are given by the
/// same literal.
pub fn element_invariants(spec: &ElementSpec) -> Result<ElementInvariants> {
    let eig = spec.eigenvalues()?;
    let n = eig.len();
    for i in 0..n {
        for j in i + 1..n {
            if eig[i] == eig[j] {
                return Err(Error::Degenerate(format!("eigenvalues {i} and {j} coincide")));
            }
        }
    }
    let mut roots = Vec::new();
    let mut d = Q::zero();
    let mut sd: Option<Q> = None;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let ratio = eig[i].div(&eig[j])?;
            let one = Elem::one(ratio.field(), ratio.rel_prec().max(1));
            let v = ratio.sub(&one)?.valuation();
            let Valuation::Exact(x) = v else {
                return Err(Error::PrecisionInsufficient(format!(
                    "alpha(gamma) for e{}-e{} is 1 to the working precision",
                    i + 1,
                    j + 1
                )));
            };
            d += x;
            sd = Some(sd.map_or(x, |s: Q| s.max(x)));
            roots.push(RootValuation { root: format!("e{}-e{}", i + 1, j + 1), valuation: v });
        }
    }
    let vals: Vec<Q> = eig
        .iter()
        .map(|e| e.valuation().exact().ok_or_else(|| Error::Degenerate("zero eigenvalue".into())))
        .collect::<Result<_>>()?;
    let base_q = match spec {
        ElementSpec::Split(d) => d[0].field().q(),
        ElementSpec::Elliptic { a, .. } => a.field().q(),
    };
    Ok(ElementInvariants {
        root_valuations: roots,
        d_valuation: d,
        lambda: -d,
        sd: sd.unwrap_or(Q::zero()),
        compact: vals.iter().all(|v| v.is_zero()),
        compact_mod_center: vals.iter().all(|v| *v == vals[0]),
        eigenvalue_valuations: vals,
        regular: true,
        q: base_q,
        max_height: n as i64 - 1,
    })
}

/// Squared displacement `⟨ν(t), ν(t)⟩` of a split torus element of GL_n,
/// with `⟨ν, χ⟩ = −v(χ(t))`, measured on the reduced apartment of type
/// `A_{n−1}`.
pub fn displacement(t: &[Elem], rs: &RootSystemData) -> Result<Q> {
    if t.len() != rs.rank + 1 {
        return Err(Error::InvalidInput(format!(
            "a torus element of GL_{} needs a root system of rank {}",
            t.len(),
            t.len() - 1
        )));
    }
    let nu: Vec<Q> = t
        .iter()
        .map(|x| x.valuation().exact().map(|v| -v).ok_or_else(|| Error::Degenerate("zero entry".into())))
        .collect::<Result<_>>()?;
    let x = ApartmentPoint((0..rs.rank).map(|i| nu[i] - nu[i + 1]).collect());
    Ok(rs.weyl_form(&x, &x))
}

/// `C·(ht(Φ)·sd + 1)^m·q^{v(D)/2}`.
pub fn character_bound(inv: &ElementInvariants, rs: &RootSystemData, c: &BigRational, m: u32) -> Result<QPowerBound> {
    if !inv.regular {
        return Err(Error::NotRegular);
    }
    let base = big_q(inv.sd * rs.max_height() + qi(1));
    Ok(QPowerBound::new(c * Pow::pow(base, m), inv.q, inv.d_valuation / 2))
}

/// Mesh fine enough that every open face of the rank ≤ 2 arrangements
/// contains a grid point: it does for the fundamental alcove of each type,
/// and the affine Weyl group preserves the grid.
const FACE_GRID: i64 = 12;

#[derive(Clone, Debug, Serialize)]
pub struct SimplexCount {
    pub r: u32,
    pub count: u64,
    /// Faces by dimension.
    pub by_dim: Vec<u64>,
}

/// Closed polysimplices of the apartment contained in `{|α_i(x)| ≤ r}`.
pub fn simplex_count_ball(rs: &RootSystemData, r: u32) -> Result<SimplexCount> {
    let n = rs.rank;
    if n > 2 {
        return Err(Error::InvalidInput(format!("face enumeration supports rank <= 2, got {}", rs.name)));
    }
    let r = r as i64;
    let span = 2 * r * FACE_GRID + 1;
    let mut faces: BTreeSet<Vec<i64>> = BTreeSet::new();
    let mut idx = vec![0i64; n];
    let total = span.pow(n as u32);
    for code in 0..total {
        let mut c = code;
        for x in idx.iter_mut() {
            *x = c % span - r * FACE_GRID;
            c /= span;
        }
        let pt = ApartmentPoint(idx.iter().map(|&x| Q::new(x, FACE_GRID)).collect());
        let face: Vec<i64> = rs
            .positive
            .iter()
            .zip(&rs.n_alpha)
            .map(|(alpha, &na)| {
                let v = rs.eval(alpha, &pt) / na;
                if v.is_integer() {
                    2 * v.to_integer()
                } else {
                    2 * v.floor().to_integer() + 1
                }
            })
            .collect();
        faces.insert(face);
    }
    let mut by_dim = vec![0u64; n + 1];
    for face in &faces {
        // the first n positive roots are the simple roots
        let inside = (0..n).all(|i| {
            let c = face[rs.positive.iter().position(|a| a.iter().sum::<i64>() == 1 && a[i] == 1).unwrap()];
            let na = rs.n_alpha[i];
            if c % 2 == 0 {
                (c / 2 * na).abs() <= r
            } else {
                let k = (c - 1) / 2;
                k * na >= -r && (k + 1) * na <= r
            }
        });
        if inside {
            let walls: Vec<Vec<i64>> =
                face.iter().zip(&rs.positive).filter(|(c, _)| *c % 2 == 0).map(|(_, a)| a.clone()).collect();
            by_dim[n - rank_of(&walls)] += 1;
        }
    }
    Ok(SimplexCount { r: r as u32, count: by_dim.iter().sum(), by_dim })
}

#[derive(Clone, Debug, Serialize)]
pub struct SimplexFit {
    pub counts: Vec<SimplexCount>,
    /// Smallest `c_b` with `count(r) ≤ c_b·r^n` for all sampled `r`.
    #[serde(serialize_with = "ser_q")]
    pub c_b: Q,
}

pub fn simplex_count_fit(rs: &RootSystemData, max_r: u32) -> Result<SimplexFit> {
    let mut counts = Vec::new();
    let mut c_b = Q::zero();
    for r in 1..=max_r {
        let c = simplex_count_ball(rs, r)?;
        c_b = c_b.max(Q::new(c.count as i64, (r as i64).pow(rs.rank as u32)));
        counts.push(c);
    }
    Ok(SimplexFit { counts, c_b })
}

/// Root system of GL_n's derived group (type `A_{n−1}`).
pub fn gl_root_system(n: usize) -> Result<RootSystemData> {
    Ok(RootSystemData::build(match n {
        2 => RootSystemName::A1,
        3 => RootSystemName::A2,
        4 => RootSystemName::A3,
        _ => return Err(Error::InvalidInput(format!("GL_{n} is not supported"))),
    }))
}

/// Convenience: `diag(entries)` over `field` from integer literals, exact at
/// relative precision `prec`.
pub fn split_from_ints(field: &FieldRef, entries: &[i128], prec: i64) -> Result<ElementSpec> {
    Ok(ElementSpec::Split(entries.iter().map(|&x| Elem::integer(field, x, prec)).collect::<Result<_>>()?))
}

pub fn big_int(x: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::localfield::{base_field, make_field, parse_elem, ExtensionKind};

    #[test]
    fn split_examples() {
        let f = base_field(3);
        let inv = element_invariants(&split_from_ints(&f, &[1, 4], 10).unwrap()).unwrap();
        assert_eq!((inv.d_valuation, inv.lambda, inv.sd), (qi(2), qi(-2), qi(1)));
        assert!(inv.compact && inv.regular);
        let inv = element_invariants(&split_from_ints(&f, &[1, 3], 10).unwrap()).unwrap();
        // α(γ) = 1/p gives v(α − 1) = −1, the other root p gives v(p − 1) = 0
        let vals: Vec<Valuation> = inv.root_valuations.iter().map(|r| r.valuation).collect();
        assert_eq!(vals, vec![Valuation::Exact(qi(-1)), Valuation::Exact(qi(0))]);
        assert_eq!(inv.d_valuation, qi(-1));
        assert!(!inv.compact && !inv.compact_mod_center);
    }

    #[test]
    fn elliptic_example() {
        let f = base_field(3);
        let e = make_field(3, ExtensionKind::Unramified { modulus: vec![1, 0, 1] }).unwrap();
        let spec = ElementSpec::Elliptic {
            a: parse_elem(&f, "1", 10).unwrap(),
            b: parse_elem(&f, "3", 10).unwrap(),
            ext: e,
        };
        let inv = element_invariants(&spec).unwrap();
        assert_eq!(inv.sd, qi(1));
        assert_eq!(inv.d_valuation, qi(2));
        assert!(inv.compact);
    }

    #[test]
    fn precision_and_degeneracy() {
        let f = base_field(3);
        let spec = ElementSpec::Split(vec![parse_elem(&f, "1", 4).unwrap(), parse_elem(&f, "1+p^5", 3).unwrap()]);
        assert!(matches!(element_invariants(&spec), Err(Error::PrecisionInsufficient(_))));
        let spec = split_from_ints(&f, &[2, 2], 5).unwrap();
        assert!(matches!(element_invariants(&spec), Err(Error::Degenerate(_))));
    }

    #[test]
    fn displacement_examples() {
        let f = base_field(3);
        let a1 = RootSystemData::build(RootSystemName::A1);
        let t = |x: &[i128]| -> Vec<Elem> { x.iter().map(|&v| Elem::integer(&f, v, 5).unwrap()).collect() };
        assert_eq!(displacement(&t(&[1, 2]), &a1).unwrap(), qi(0));
        assert_eq!(displacement(&t(&[1, 3]), &a1).unwrap(), qi(1));
        assert_eq!(displacement(&t(&[3, 3]), &a1).unwrap(), qi(0));
    }

    #[test]
    fn bound_examples() {
        let f = base_field(3);
        let a1 = RootSystemData::build(RootSystemName::A1);
        let inv = element_invariants(&split_from_ints(&f, &[1, 2], 5).unwrap()).unwrap();
        assert!(character_bound(&inv, &a1, &big_int(1), 1).unwrap().is_one());
        let inv = element_invariants(&split_from_ints(&f, &[1, 4], 5).unwrap()).unwrap();
        let b = character_bound(&inv, &a1, &big_int(1), 1).unwrap();
        assert_eq!((b.coeff.clone(), b.exponent), (big_int(2), qi(1)));
    }

    #[test]
    fn simplex_counts() {
        let a1 = RootSystemData::build(RootSystemName::A1);
        assert_eq!(simplex_count_ball(&a1, 1).unwrap().count, 5);
        let fit = simplex_count_fit(&a1, 4).unwrap();
        assert_eq!(fit.counts[1].count, 9);
        assert!(fit.c_b <= qi(5));
        for name in [RootSystemName::A2, RootSystemName::B2, RootSystemName::C2, RootSystemName::G2] {
            let rs = RootSystemData::build(name);
            for r in 1..3 {
                let c = simplex_count_ball(&rs, r).unwrap();
                // the box is a convex union of closed faces
                let euler = c.by_dim[0] as i64 - c.by_dim[1] as i64 + c.by_dim[2] as i64;
                assert_eq!(euler, 1, "{name} r={r}");
            }
        }
    }
}
