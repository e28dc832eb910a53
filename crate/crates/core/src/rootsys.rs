//! Reduced root systems of small rank, the W-invariant form and the vertex
//! structure of the apartment `A_a`.
//!
//! A point `x ∈ A_a` is stored by its simple-root values `x_i = α_i(x)`; a
//! root with coefficients `c` over the simple roots evaluates to `Σ c_i x_i`.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use num_traits::{One, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::num::{fmt_q, qi, Q};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum RootSystemName {
    A1,
    A2,
    A3,
    B2,
    C2,
    G2,
}

impl FromStr for RootSystemName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_uppercase().as_str() {
            "A1" => RootSystemName::A1,
            "A2" => RootSystemName::A2,
            "A3" => RootSystemName::A3,
            "B2" => RootSystemName::B2,
            "C2" => RootSystemName::C2,
            "G2" => RootSystemName::G2,
            _ => return Err(Error::InvalidInput(format!("unsupported root system {s:?}"))),
        })
    }
}

impl fmt::Display for RootSystemName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Integer coefficients of a root over the simple roots.
pub type Root = Vec<i64>;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ApartmentPoint(pub Vec<Q>);

impl ApartmentPoint {
    pub fn origin(n: usize) -> Self {
        ApartmentPoint(vec![Q::zero(); n])
    }

    pub fn from_ints(v: &[i64]) -> Self {
        ApartmentPoint(v.iter().map(|&x| qi(x)).collect())
    }

    pub fn add(&self, other: &ApartmentPoint) -> ApartmentPoint {
        ApartmentPoint(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn scale(&self, t: Q) -> ApartmentPoint {
        ApartmentPoint(self.0.iter().map(|a| a * t).collect())
    }

    pub fn to_strings(&self) -> Vec<String> {
        self.0.iter().map(|&x| fmt_q(x)).collect()
    }
}

impl Serialize for ApartmentPoint {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_strings().serialize(s)
    }
}

#[derive(Clone, Debug)]
pub struct RootSystemData {
    pub name: RootSystemName,
    pub rank: usize,
    /// `cartan[i][j] = ⟨α_i, α_j^∨⟩`.
    pub cartan: Vec<Vec<i64>>,
    pub positive: Vec<Root>,
    /// Affine period `n_α` per positive root (same order as `positive`).
    pub n_alpha: Vec<i64>,
    /// Coefficients `c_i` of the highest root.
    pub c: Vec<i64>,
    /// Special vertices `a_i` with `α_j(a_i) = δ_ij / c_i`.
    pub special: Vec<ApartmentPoint>,
    /// Matrix of `⟨v, w⟩ = Σ_{α>0} α(v)α(w)` in simple-root coordinates.
    pub gram: Vec<Vec<Q>>,
}

fn cartan_matrix(name: RootSystemName) -> Vec<Vec<i64>> {
    use RootSystemName::*;
    match name {
        A1 => vec![vec![2]],
        A2 => vec![vec![2, -1], vec![-1, 2]],
        A3 => vec![vec![2, -1, 0], vec![-1, 2, -1], vec![0, -1, 2]],
        // α1 long, α2 short: ⟨α1, α2^∨⟩ = −2
        B2 => vec![vec![2, -2], vec![-1, 2]],
        // α1 short, α2 long
        C2 => vec![vec![2, -1], vec![-2, 2]],
        // α1 short, α2 long
        G2 => vec![vec![2, -1], vec![-3, 2]],
    }
}

/// Builds the root system by closing the simple roots under the simple
/// reflections.
pub fn build_root_system(name: RootSystemName) -> RootSystemData {
    let cartan = cartan_matrix(name);
    let n = cartan.len();
    let simple: Vec<Root> = (0..n).map(|i| (0..n).map(|k| (k == i) as i64).collect()).collect();
    let mut all: BTreeSet<Root> = simple.iter().cloned().collect();
    let mut queue: VecDeque<Root> = simple.iter().cloned().collect();
    while let Some(beta) = queue.pop_front() {
        for j in 0..n {
            let r = reflect_root_with(&cartan, j, &beta);
            if all.insert(r.clone()) {
                queue.push_back(r);
            }
        }
    }
    let mut positive: Vec<Root> = all.into_iter().filter(|r| r.iter().all(|&c| c >= 0)).collect();
    positive.sort_by_key(|r| (r.iter().sum::<i64>(), r.iter().map(|&c| -c).collect::<Vec<_>>()));
    let highest = positive.iter().max_by_key(|r| r.iter().sum::<i64>()).unwrap().clone();
    let special = (0..n)
        .map(|i| ApartmentPoint((0..n).map(|j| if i == j { Q::new(1, highest[i]) } else { Q::zero() }).collect()))
        .collect();
    let mut gram = vec![vec![Q::zero(); n]; n];
    for r in &positive {
        for k in 0..n {
            for l in 0..n {
                gram[k][l] += qi(r[k] * r[l]);
            }
        }
    }
    let n_alpha = vec![1; positive.len()];
    RootSystemData { name, rank: n, cartan, positive, n_alpha, c: highest, special, gram }
}

fn reflect_root_with(cartan: &[Vec<i64>], j: usize, beta: &[i64]) -> Root {
    let pairing: i64 = beta.iter().enumerate().map(|(i, &b)| b * cartan[i][j]).sum();
    let mut out = beta.to_vec();
    out[j] -= pairing;
    out
}

/// Rank of a set of integer vectors, by exact elimination over Q.
pub fn rank_of(rows: &[Vec<i64>]) -> usize {
    let mut m: Vec<Vec<Q>> = rows.iter().map(|r| r.iter().map(|&x| qi(x)).collect()).collect();
    let cols = m.first().map_or(0, |r| r.len());
    let mut rank = 0;
    for c in 0..cols {
        let Some(piv) = (rank..m.len()).find(|&r| !m[r][c].is_zero()) else {
            continue;
        };
        m.swap(rank, piv);
        for r in 0..m.len() {
            if r != rank && !m[r][c].is_zero() {
                let f = m[r][c] / m[rank][c];
                for k in 0..cols {
                    let delta = f * m[rank][k];
                    m[r][k] -= delta;
                }
            }
        }
        rank += 1;
    }
    rank
}

/// Solves a square system `A y = b` over Q; `None` if singular.
fn solve(a: &[Vec<i64>], b: &[Q]) -> Option<Vec<Q>> {
    let n = a.len();
    let mut m: Vec<Vec<Q>> = a
        .iter()
        .zip(b)
        .map(|(row, &rhs)| row.iter().map(|&x| qi(x)).chain(std::iter::once(rhs)).collect())
        .collect();
    for c in 0..n {
        let piv = (c..n).find(|&r| !m[r][c].is_zero())?;
        m.swap(c, piv);
        let inv = m[c][c].recip();
        for k in c..=n {
            m[c][k] *= inv;
        }
        for r in 0..n {
            if r != c && !m[r][c].is_zero() {
                let f = m[r][c];
                for k in c..=n {
                    let delta = f * m[c][k];
                    m[r][k] -= delta;
                }
            }
        }
    }
    Some(m.into_iter().map(|row| row[n]).collect())
}

impl RootSystemData {
    pub fn build(name: RootSystemName) -> Self {
        build_root_system(name)
    }

    pub fn simple_roots(&self) -> Vec<Root> {
        (0..self.rank).map(|i| (0..self.rank).map(|k| (k == i) as i64).collect()).collect()
    }

    /// Positive and negative roots.
    pub fn roots(&self) -> Vec<Root> {
        let mut out = self.positive.clone();
        out.extend(self.positive.iter().map(|r| r.iter().map(|&c| -c).collect::<Root>()));
        out
    }

    /// `ht(Φ)`, the height of the highest root.
    pub fn max_height(&self) -> i64 {
        self.c.iter().sum()
    }

    /// Coefficient sum of a positive root.
    pub fn height(&self, alpha: &[i64]) -> Result<i64> {
        if !self.positive.iter().any(|r| r.as_slice() == alpha) {
            return Err(Error::InvalidInput(format!("{alpha:?} is not a positive root")));
        }
        Ok(alpha.iter().sum())
    }

    pub fn eval(&self, alpha: &[i64], x: &ApartmentPoint) -> Q {
        alpha.iter().zip(&x.0).map(|(&c, &xi)| xi * c).sum()
    }

    pub fn weyl_form(&self, v: &ApartmentPoint, w: &ApartmentPoint) -> Q {
        let mut acc = Q::zero();
        for k in 0..self.rank {
            for l in 0..self.rank {
                acc += self.gram[k][l] * v.0[k] * w.0[l];
            }
        }
        acc
    }

    /// `s_j(x) = x − α_j(x)·α_j^∨`, using `α_i(α_j^∨) = ⟨α_i, α_j^∨⟩`.
    pub fn reflect(&self, j: usize, x: &ApartmentPoint) -> ApartmentPoint {
        let xj = x.0[j];
        ApartmentPoint((0..self.rank).map(|i| x.0[i] - xj * self.cartan[i][j]).collect())
    }

    pub fn reflect_root(&self, j: usize, beta: &[i64]) -> Root {
        reflect_root_with(&self.cartan, j, beta)
    }

    /// Sets a per-root affine period `n_α` (applies to `±α`).
    pub fn with_n_alpha(mut self, alpha: &[i64], n: i64) -> Result<Self> {
        let idx = self
            .positive
            .iter()
            .position(|r| r.as_slice() == alpha)
            .ok_or_else(|| Error::InvalidInput(format!("{alpha:?} is not a positive root")))?;
        self.n_alpha[idx] = n;
        Ok(self)
    }

    fn on_wall(&self, idx: usize, x: &ApartmentPoint) -> bool {
        let v = self.eval(&self.positive[idx], x);
        v.is_integer() && v.to_integer() % self.n_alpha[idx] == 0
    }

    /// Whether `x` is a vertex: the roots with `α(x) ∈ n_α·Z` span the dual.
    pub fn is_vertex(&self, x: &ApartmentPoint) -> bool {
        let walls: Vec<Root> =
            (0..self.positive.len()).filter(|&i| self.on_wall(i, x)).map(|i| self.positive[i].clone()).collect();
        rank_of(&walls) == self.rank
    }

    /// All vertices `y` with `0 ≤ α_i(y − x) < bound` for every simple root.
    ///
    /// Every vertex is cut out by `rank` independent walls, so candidates are
    /// the solutions of `α(y) = k_α` over independent subsets of positive
    /// roots, with `k_α` ranging over the wall values the box can reach.
    pub fn enumerate_cone_vertices(&self, x: &ApartmentPoint, bound: Q) -> Result<Vec<ApartmentPoint>> {
        if !self.is_vertex(x) {
            return Err(Error::InvalidInput("cone apex must be a vertex".into()));
        }
        if bound <= Q::zero() {
            return Ok(Vec::new());
        }
        let n = self.rank;
        let m = self.positive.len();
        let mut found = BTreeSet::new();
        let mut subset: Vec<usize> = Vec::with_capacity(n);
        fn subsets(start: usize, m: usize, n: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if cur.len() == n {
                out.push(cur.clone());
                return;
            }
            for i in start..m {
                cur.push(i);
                subsets(i + 1, m, n, cur, out);
                cur.pop();
            }
        }
        let mut all = Vec::new();
        subsets(0, m, n, &mut subset, &mut all);
        for s in all {
            let rows: Vec<Vec<i64>> = s.iter().map(|&i| self.positive[i].clone()).collect();
            if rank_of(&rows) < n {
                continue;
            }
            let ranges: Vec<Vec<i64>> = s
                .iter()
                .map(|&i| {
                    let alpha = &self.positive[i];
                    let lo = self.eval(alpha, x);
                    let hi = lo + bound * alpha.iter().sum::<i64>();
                    let step = self.n_alpha[i];
                    let first = (lo / step).ceil().to_integer() * step;
                    (0..).map(|t| first + t * step).take_while(|&k| qi(k) < hi).collect()
                })
                .collect();
            let mut idx = vec![0usize; n];
            if ranges.iter().any(|r| r.is_empty()) {
                continue;
            }
            'targets: loop {
                let rhs: Vec<Q> = (0..n).map(|k| qi(ranges[k][idx[k]])).collect();
                if let Some(y) = solve(&rows, &rhs) {
                    let inside = (0..n).all(|i| {
                        let d = y[i] - x.0[i];
                        d >= Q::zero() && d < bound
                    });
                    if inside {
                        found.insert(ApartmentPoint(y));
                    }
                }
                let mut k = 0;
                loop {
                    if k == n {
                        break 'targets;
                    }
                    idx[k] += 1;
                    if idx[k] < ranges[k].len() {
                        break;
                    }
                    idx[k] = 0;
                    k += 1;
                }
            }
        }
        Ok(found.into_iter().collect())
    }

    /// `count / bound^rank`, the constant in `count ≤ c·bound^rank`.
    pub fn cone_constant(&self, x: &ApartmentPoint, bound: Q) -> Result<Q> {
        let count = self.enumerate_cone_vertices(x, bound)?.len() as i64;
        let mut denom = Q::one();
        for _ in 0..self.rank {
            denom *= bound;
        }
        Ok(qi(count) / denom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::q;

    #[test]
    fn heights_and_highest_roots() {
        let a2 = build_root_system(RootSystemName::A2);
        assert_eq!(a2.max_height(), 2);
        assert_eq!(a2.c, vec![1, 1]);
        assert_eq!(a2.positive.len(), 3);
        let g2 = build_root_system(RootSystemName::G2);
        assert_eq!(g2.max_height(), 5);
        assert_eq!(g2.c, vec![3, 2]);
        assert_eq!(g2.positive.len(), 6);
        let b2 = build_root_system(RootSystemName::B2);
        assert_eq!(b2.height(&[1, 2]).unwrap(), 3);
        let c2 = build_root_system(RootSystemName::C2);
        assert_eq!(c2.height(&[2, 1]).unwrap(), 3);
        assert_eq!(build_root_system(RootSystemName::A3).positive.len(), 6);
        assert!(a2.height(&[-1, 0]).is_err());
        let a1 = build_root_system(RootSystemName::A1);
        assert_eq!(a1.eval(&[1], &a1.special[0]), qi(1));
    }

    #[test]
    fn form_examples() {
        let a1 = build_root_system(RootSystemName::A1);
        let v = ApartmentPoint::from_ints(&[1]);
        assert_eq!(a1.weyl_form(&v, &v), qi(1));
        let a2 = build_root_system(RootSystemName::A2);
        let w1 = ApartmentPoint::from_ints(&[1, 0]);
        assert_eq!(a2.weyl_form(&w1, &w1), qi(2));
    }

    #[test]
    fn vertex_examples() {
        let a1 = build_root_system(RootSystemName::A1);
        assert!(a1.is_vertex(&ApartmentPoint::origin(1)));
        assert!(!a1.is_vertex(&ApartmentPoint(vec![q(1, 2)])));
        let a2 = build_root_system(RootSystemName::A2);
        assert!(a2.is_vertex(&a2.special[0]));
        let o1 = ApartmentPoint::origin(1);
        assert_eq!(a1.enumerate_cone_vertices(&o1, qi(3)).unwrap().len(), 3);
        assert!(a1.enumerate_cone_vertices(&o1, qi(0)).unwrap().is_empty());
        // G2 has the non-integral special vertices (1/3, 0) and (0, 1/2)
        let g2 = build_root_system(RootSystemName::G2);
        for a in &g2.special {
            assert!(g2.is_vertex(a));
        }
        assert!(!g2.is_vertex(&ApartmentPoint(vec![q(1, 6), q(1, 6)])));
    }
}
