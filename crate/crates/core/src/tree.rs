//! The Bruhat–Tits tree of GL_2 over Q_p as homothety classes of lattices.
//!
//! A vertex is the class of the lattice spanned by the columns of
//! `[[p^a, b], [0, 1]]` with `a ∈ Z` and `b` reduced mod `p^a·Z_p` to its
//! unique representative in `Z[1/p] ∩ [0, p^a)`. The standard apartment is
//! the line `{(k, 0)}`; the vertex `(k, 0)` sits at `α(x) = −k`. All
//! matrices are exact rationals, which embed in Q_p.

use std::collections::BTreeSet;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::num::{big_ppow, fmt_big, vp_ratio};

/// Row-major 2×2 matrix over Q.
pub type Mat2 = [BigRational; 4];

pub fn mat2(a: BigRational, b: BigRational, c: BigRational, d: BigRational) -> Mat2 {
    [a, b, c, d]
}

pub fn mat2_int(a: i64, b: i64, c: i64, d: i64) -> Mat2 {
    let r = |x: i64| BigRational::from_integer(BigInt::from(x));
    [r(a), r(b), r(c), r(d)]
}

pub fn mat2_mul(x: &Mat2, y: &Mat2) -> Mat2 {
    [
        &x[0] * &y[0] + &x[1] * &y[2],
        &x[0] * &y[1] + &x[1] * &y[3],
        &x[2] * &y[0] + &x[3] * &y[2],
        &x[2] * &y[1] + &x[3] * &y[3],
    ]
}

pub fn mat2_det(x: &Mat2) -> BigRational {
    &x[0] * &x[3] - &x[1] * &x[2]
}

pub fn mat2_inv(x: &Mat2) -> Result<Mat2> {
    let d = mat2_det(x);
    if d.is_zero() {
        return Err(Error::Degenerate("singular matrix".into()));
    }
    Ok([&x[3] / &d, -&x[1] / &d, -&x[2] / &d, &x[0] / &d])
}

/// Minimum valuation of the entries; `None` for the zero matrix.
pub fn mat2_min_val(x: &Mat2, p: u64) -> Option<i64> {
    x.iter().filter_map(|e| vp_ratio(e, p)).min()
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TreeVertex {
    pub a: i64,
    pub b: BigRational,
}

impl fmt::Display for TreeVertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{};{}", self.a, fmt_big(&self.b))
    }
}

impl Serialize for TreeVertex {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl TreeVertex {
    /// The apartment vertex `(k, 0)`.
    pub fn line(k: i64) -> TreeVertex {
        TreeVertex { a: k, b: BigRational::zero() }
    }

    pub fn origin() -> TreeVertex {
        Self::line(0)
    }

    pub fn on_line(&self) -> bool {
        self.b.is_zero()
    }

    /// Horocycle level: the `a` of the Hermite form, constant on orbits of
    /// the upper unipotent group.
    pub fn level(&self) -> i64 {
        self.a
    }
}

/// Operations on the tree of `GL_2(Q_p)`.
#[derive(Clone, Copy, Debug)]
pub struct Tree {
    pub p: u64,
    /// Maximal number of vertices any enumeration may visit.
    pub cap: usize,
}

fn mod_inverse_big(a: &BigInt, m: &BigInt) -> BigInt {
    let g = a.extended_gcd(m);
    debug_assert!(g.gcd.is_one());
    g.x.mod_floor(m)
}

impl Tree {
    pub fn new(p: u64) -> Tree {
        Tree { p, cap: 1 << 22 }
    }

    /// Representative of `b + p^a·Z_p` in `Z[1/p] ∩ [0, p^a)`.
    pub fn reduce_offset(&self, a: i64, b: &BigRational) -> BigRational {
        if b.is_zero() {
            return BigRational::zero();
        }
        let p = BigInt::from(self.p);
        let vd = crate::num::vp_bigint(b.denom(), self.p).unwrap_or(0);
        if a + vd <= 0 {
            return BigRational::zero();
        }
        let pk = num_traits::Pow::pow(&p, vd as u64);
        let d_prime = b.denom() / &pk;
        let modulus = num_traits::Pow::pow(&p, (a + vd) as u64);
        let big_b = (b.numer() * mod_inverse_big(&d_prime, &modulus)).mod_floor(&modulus);
        BigRational::new(big_b, pk)
    }

    /// Canonical vertex of the lattice spanned by the columns of `m`.
    pub fn normalize(&self, m: &Mat2) -> Result<TreeVertex> {
        let p = self.p;
        let [m00, m01, m10, m11] = m.clone();
        if mat2_det(m).is_zero() {
            return Err(Error::Degenerate("lattice matrix is singular".into()));
        }
        // column operations over Z_p to reach [[x, y], [0, z]]
        let (x, y, z) = if m10.is_zero() {
            (m00, m01, m11)
        } else if m11.is_zero() {
            (m01, m00, m10)
        } else {
            let v0 = vp_ratio(&m10, p).unwrap();
            let v1 = vp_ratio(&m11, p).unwrap();
            if v1 <= v0 {
                let f = &m10 / &m11;
                (&m00 - &f * &m01, m01, m11)
            } else {
                let f = &m11 / &m10;
                (&m01 - &f * &m00, m00, m10)
            }
        };
        let a = vp_ratio(&x, p).unwrap() - vp_ratio(&z, p).unwrap();
        let b = self.reduce_offset(a, &(y / z));
        Ok(TreeVertex { a, b })
    }

    pub fn matrix(&self, v: &TreeVertex) -> Mat2 {
        [big_ppow(self.p, v.a), v.b.clone(), BigRational::zero(), BigRational::one()]
    }

    pub fn act(&self, g: &Mat2, v: &TreeVertex) -> Result<TreeVertex> {
        self.normalize(&mat2_mul(g, &self.matrix(v)))
    }

    pub fn fixes(&self, g: &Mat2, v: &TreeVertex) -> Result<bool> {
        Ok(&self.act(g, v)? == v)
    }

    /// `v(det M) − 2·min v(M_ij)` for `M = h_v⁻¹·h_w`.
    pub fn distance(&self, v: &TreeVertex, w: &TreeVertex) -> i64 {
        let m = mat2_mul(&mat2_inv(&self.matrix(v)).unwrap(), &self.matrix(w));
        vp_ratio(&mat2_det(&m), self.p).unwrap() - 2 * mat2_min_val(&m, self.p).unwrap()
    }

    /// The `q + 1` neighbours: index-p sublattices of the representative.
    pub fn neighbors(&self, v: &TreeVertex) -> Vec<TreeVertex> {
        let h = self.matrix(v);
        let mut out: Vec<TreeVertex> = (0..self.p as i64)
            .map(|j| self.normalize(&mat2_mul(&h, &mat2_int(self.p as i64, j, 0, 1))).unwrap())
            .collect();
        out.push(self.normalize(&mat2_mul(&h, &mat2_int(1, 0, 0, self.p as i64))).unwrap());
        out
    }

    pub fn ball_size(&self, radius: u32) -> u128 {
        let q = self.p as u128;
        if radius == 0 {
            1
        } else {
            1 + (q + 1) * (q.pow(radius) - 1) / (q - 1)
        }
    }

    fn check_cap(&self, needed: u128) -> Result<()> {
        if needed > self.cap as u128 {
            Err(Error::CapExceeded { needed, cap: self.cap as u128 })
        } else {
            Ok(())
        }
    }

    /// Breadth-first layers `L_0 = {center}, L_1, …, L_radius` of vertices
    /// accepted by `keep`, expanding only through accepted vertices.
    fn layers<F>(&self, center: &TreeVertex, radius: u32, keep: F) -> Vec<Vec<TreeVertex>>
    where
        F: Fn(&TreeVertex) -> bool,
    {
        let mut seen: BTreeSet<TreeVertex> = BTreeSet::new();
        seen.insert(center.clone());
        let mut layers = vec![vec![center.clone()]];
        for _ in 0..radius {
            let mut next = Vec::new();
            for v in layers.last().unwrap() {
                for w in self.neighbors(v) {
                    if !seen.contains(&w) && keep(&w) {
                        seen.insert(w.clone());
                        next.push(w);
                    }
                }
            }
            next.sort();
            layers.push(next);
        }
        layers
    }

    pub fn enumerate_ball(&self, center: &TreeVertex, radius: u32) -> Result<Vec<TreeVertex>> {
        self.check_cap(self.ball_size(radius))?;
        let mut out: Vec<TreeVertex> = self.layers(center, radius, |_| true).into_iter().flatten().collect();
        out.sort();
        Ok(out)
    }

    /// Apartment vertex closest to `z` and the distance to it.
    pub fn projection(&self, z: &TreeVertex) -> (TreeVertex, i64) {
        if z.on_line() {
            return (z.clone(), 0);
        }
        let m = vp_ratio(&z.b, self.p).unwrap();
        (TreeVertex::line(m), z.a - m)
    }

    /// Whether `x` (on the apartment) attains the minimal distance from `z`
    /// to apartment vertices. Distances to the line grow by one per step
    /// away from the foot, so scanning a window around `z` suffices.
    pub fn is_above(&self, z: &TreeVertex, x: &TreeVertex) -> Result<bool> {
        if !x.on_line() {
            return Err(Error::InvalidInput(format!("{x} is not on the standard apartment")));
        }
        let lo = z.a.min(x.a) - 1 - if z.on_line() { 0 } else { z.a - vp_ratio(&z.b, self.p).unwrap() };
        let hi = z.a.max(x.a) + 1;
        let best = (lo..=hi).map(|k| self.distance(&TreeVertex::line(k), z)).min().unwrap();
        Ok(self.distance(x, z) == best)
    }

    /// Counts `γ`-fixed vertices above `x` within `max_radius`, and those in
    /// the next layer (which must be none once the radius exceeds the
    /// cone-depth cutoff).
    pub fn count_fixed_above(&self, gamma: &Mat2, x: &TreeVertex, max_radius: u32) -> Result<AboveCount> {
        if !x.on_line() {
            return Err(Error::InvalidInput(format!("{x} is not on the standard apartment")));
        }
        let q = self.p as u128;
        self.check_cap(1 + (q - 1) * q.pow(max_radius + 1))?;
        let layers = self.layers(x, max_radius + 1, |z| self.is_above(z, x).unwrap_or(false));
        let mut per_layer = Vec::with_capacity(layers.len());
        for layer in &layers {
            let mut c = 0u128;
            for z in layer {
                if self.fixes(gamma, z)? {
                    c += 1;
                }
            }
            per_layer.push(c);
        }
        let beyond = per_layer.pop().unwrap_or(0);
        Ok(AboveCount { count: per_layer.iter().sum(), per_layer, beyond, radius: max_radius })
    }

    /// Fixed vertices of `γ` in the orbit of the origin under
    /// `U⁺ ∩ P_y` for `y = (−d, 0)` (that is `α(y) = d`): the level-0
    /// vertices at distance `d` from `y`.
    pub fn count_fixed_in_unipotent_orbit(&self, gamma: &Mat2, d: u32) -> Result<u128> {
        let y = TreeVertex::line(-(d as i64));
        let ball = self.enumerate_ball(&y, d)?;
        let mut c = 0;
        for z in ball.iter().filter(|z| z.level() == 0 && self.distance(z, &y) == d as i64) {
            if self.fixes(gamma, z)? {
                c += 1;
            }
        }
        Ok(c)
    }

    /// All fixed vertices of `γ` within `radius` of `center`, by layer.
    pub fn fixed_in_ball(&self, gamma: &Mat2, center: &TreeVertex, radius: u32) -> Result<Vec<u128>> {
        self.check_cap(self.ball_size(radius))?;
        self.layers(center, radius, |_| true)
            .iter()
            .map(|layer| {
                let mut c = 0;
                for z in layer {
                    if self.fixes(gamma, z)? {
                        c += 1;
                    }
                }
                Ok(c)
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AboveCount {
    pub count: u128,
    pub per_layer: Vec<u128>,
    /// Fixed vertices above `x` in layer `radius + 1`.
    pub beyond: u128,
    pub radius: u32,
}

/// `diag(d1, d2)` with rational entries.
pub fn diag(d1: BigRational, d2: BigRational) -> Mat2 {
    [d1, BigRational::zero(), BigRational::zero(), d2]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ball_sizes() {
        let t = Tree::new(2);
        assert_eq!(t.enumerate_ball(&TreeVertex::origin(), 0).unwrap().len(), 1);
        assert_eq!(t.enumerate_ball(&TreeVertex::origin(), 1).unwrap().len(), 4);
        let t3 = Tree::new(3);
        assert_eq!(t3.enumerate_ball(&TreeVertex::origin(), 2).unwrap().len(), 17);
        for r in 0..5 {
            let ball = t.enumerate_ball(&TreeVertex::line(3), r).unwrap();
            assert_eq!(ball.len() as u128, t.ball_size(r));
            assert!(ball.iter().all(|v| t.distance(v, &TreeVertex::line(3)) <= r as i64));
        }
    }

    #[test]
    fn actions() {
        let t = Tree::new(3);
        let v = TreeVertex { a: 2, b: BigRational::new(5.into(), 1.into()) };
        assert_eq!(t.act(&mat2_int(1, 0, 0, 1), &v).unwrap(), v);
        let shift = mat2_int(1, 0, 0, 3);
        assert_eq!(t.act(&shift, &TreeVertex::line(4)).unwrap(), TreeVertex::line(3));
        let t2 = Tree::new(2);
        let g = mat2_int(1, 0, 0, 5);
        for k in -3..4 {
            assert!(t2.fixes(&g, &TreeVertex::line(k)).unwrap());
        }
    }

    #[test]
    fn normalization_is_idempotent() {
        let t = Tree::new(3);
        let m = [
            BigRational::new(7.into(), 9.into()),
            BigRational::new(2.into(), 1.into()),
            BigRational::new(3.into(), 1.into()),
            BigRational::new(BigInt::from(-4), 5.into()),
        ];
        let v = t.normalize(&m).unwrap();
        assert_eq!(t.normalize(&t.matrix(&v)).unwrap(), v);
    }

    #[test]
    fn above_examples() {
        let t = Tree::new(3);
        let x = TreeVertex::origin();
        assert!(t.is_above(&x, &x).unwrap());
        let off = TreeVertex { a: 1, b: BigRational::one() };
        assert_eq!(t.distance(&off, &x), 1);
        assert!(t.is_above(&off, &x).unwrap());
        assert!(!t.is_above(&TreeVertex::line(1), &x).unwrap());
    }

    #[test]
    fn fixed_above_counts() {
        // γ = diag(1, 1 + p^2): q^2 fixed vertices above the origin
        let t = Tree::new(2);
        let g = mat2_int(1, 0, 0, 5);
        let r = t.count_fixed_above(&g, &TreeVertex::origin(), 3).unwrap();
        assert_eq!((r.count, r.beyond), (4, 0));
        let t = Tree::new(3);
        let g = mat2_int(1, 0, 0, 10);
        assert_eq!(t.count_fixed_above(&g, &TreeVertex::origin(), 3).unwrap().count, 9);
        let g = mat2_int(1, 0, 0, 2);
        assert_eq!(t.count_fixed_above(&g, &TreeVertex::origin(), 1).unwrap().count, 1);
    }
}
