use std::collections::BTreeSet;

use bt_bounds::fixedpoints::{count_fixed_in_orbit, gl_point_from_simple, UnipotentCosetBox};
use bt_bounds::integration::{
    orbital_integral, orbital_integral_tree, weyl_formula_check, KFunction, MeasureContext, TorusKind,
};
use bt_bounds::localfield::{base_field, Elem};
use bt_bounds::measure::{poly_val_fraction, PadicPolynomial};
use bt_bounds::num::{qi, Q};
use bt_bounds::rootsys::{ApartmentPoint, RootSystemData, RootSystemName};
use bt_bounds::tree::{mat2_int, Tree};
use num_rational::BigRational;

fn ratio(a: i64, b: i64) -> BigRational {
    BigRational::new(a.into(), b.into())
}

/// Vertices of a rank-2 apartment found on a 1/12 grid: a point is a vertex
/// when two positive roots with integer values there are independent.
fn grid_vertices(rs: &RootSystemData, bound: i64) -> BTreeSet<Vec<Q>> {
    let mut out = BTreeSet::new();
    for i in 0..12 * bound {
        for j in 0..12 * bound {
            let x = [Q::new(i, 12), Q::new(j, 12)];
            let walls: Vec<&Vec<i64>> = rs
                .positive
                .iter()
                .filter(|a| (x[0] * a[0] + x[1] * a[1]).is_integer())
                .collect();
            let independent = walls
                .iter()
                .any(|a| walls.iter().any(|b| a[0] * b[1] - a[1] * b[0] != 0));
            if independent {
                out.insert(x.to_vec());
            }
        }
    }
    out
}

#[test]
fn cone_vertices_match_grid_oracle() {
    for name in [RootSystemName::A2, RootSystemName::B2, RootSystemName::C2, RootSystemName::G2] {
        let rs = RootSystemData::build(name);
        for bound in 1..=3 {
            let got: BTreeSet<Vec<Q>> = rs
                .enumerate_cone_vertices(&ApartmentPoint::origin(2), qi(bound))
                .unwrap()
                .into_iter()
                .map(|p| p.0)
                .collect();
            assert_eq!(got, grid_vertices(&rs, bound), "{name} bound {bound}");
        }
    }
    // A2 vertices are the integer points of the simple-root coordinates
    let a2 = RootSystemData::build(RootSystemName::A2);
    assert_eq!(a2.enumerate_cone_vertices(&ApartmentPoint::origin(2), qi(3)).unwrap().len(), 9);
}

#[test]
fn gl2_orbit_counts_match_tree() {
    for p in [2u64, 3, 5] {
        let f = base_field(p);
        let t = Tree::new(p);
        for m in 1..=3u32 {
            let l = 1 + (p as i64).pow(m);
            let gamma = vec![Elem::integer(&f, 1, 16).unwrap(), Elem::integer(&f, l as i128, 16).unwrap()];
            for d in 0..=m + 2 {
                let bx = UnipotentCosetBox::new(&f, &[qi(0), qi(0)], &gl_point_from_simple(&[qi(d as i64)])).unwrap();
                let c = count_fixed_in_orbit(&gamma, &bx, 1 << 24).unwrap().count;
                assert_eq!(c, (p as u128).pow(m.min(d)), "p={p} m={m} d={d}");
                assert_eq!(t.count_fixed_in_unipotent_orbit(&mat2_int(1, 0, 0, l), d).unwrap(), c);
            }
        }
    }
}

#[test]
fn split_orbital_integral_of_unit_k() {
    // γ = diag(1, 1 + p^m): the fixed set meets the fundamental domain in a
    // path of length m with q^{k-1}(q-1) vertices at distance k, total q^m
    for p in [2u64, 3, 5] {
        let ctx = MeasureContext::new(p, 2, TorusKind::Split).unwrap();
        for m in 1..=3u32 {
            let g = mat2_int(1, 0, 0, 1 + (p as i64).pow(m));
            let r = orbital_integral(&g, &KFunction::UnitK, &ctx, &ratio(1, 1)).unwrap();
            assert_eq!(r.value, ratio((p as i64).pow(m), 1));
            assert_eq!(orbital_integral_tree(&g, &KFunction::UnitK, &ctx).unwrap(), r.value);
        }
    }
}

#[test]
fn elliptic_orbital_integral_is_a_ball() {
    // γ = 1 + p^m t in the unramified torus fixes exactly the ball of radius m
    let p = 3u64;
    let ctx = MeasureContext::new(p, 3, TorusKind::Elliptic { u: 2 }).unwrap();
    let t = Tree::new(p);
    for m in 0..=2u32 {
        let b = (p as i64).pow(m);
        let g = mat2_int(1, 2 * b, b, 1);
        let r = orbital_integral(&g, &KFunction::UnitK, &ctx, &ratio(1, 1)).unwrap();
        assert_eq!(r.value, ratio(t.ball_size(m) as i64, 1));
    }
}

#[test]
fn weyl_formula_hand_values() {
    // split regular share of GL_2(F_p): (p-2) / (2(p-1))
    for p in [3u64, 5] {
        let r = weyl_formula_check(&KFunction::SplitDepth(0), p, 1, 1 << 24).unwrap();
        assert_eq!(r.lhs, ratio(p as i64 - 2, 2 * (p as i64 - 1)));
        assert!(r.equal);
    }
    let r = weyl_formula_check(&KFunction::SplitDepth(1), 3, 3, 1 << 24).unwrap();
    assert_eq!(r.rhs, ratio(1, 18));
    assert!(r.equal);
    let r = weyl_formula_check(&KFunction::EllipticLocus, 2, 2, 1 << 24).unwrap();
    assert_eq!((r.lhs.clone(), r.rhs.clone()), (ratio(0, 1), ratio(0, 1)));
}

#[test]
fn valuation_fraction_of_linear_and_square() {
    let p = 3u64;
    let f = base_field(p);
    let x = PadicPolynomial::from_json(&f, r#"[{"exps":[1],"coeff":"1"}]"#, 10).unwrap();
    let x2 = PadicPolynomial::from_json(&f, r#"[{"exps":[2],"coeff":"1"}]"#, 10).unwrap();
    for r in 0..=4 {
        // v(x) >= r has density q^{-r}; v(x^2) >= r has density q^{-ceil(r/2)}
        let a = poly_val_fraction(&x, qi(r), 4, 1 << 16).unwrap().fraction;
        assert_eq!(a, ratio(1, 3i64.pow(r as u32)));
        let b = poly_val_fraction(&x2, qi(r), 4, 1 << 16).unwrap().fraction;
        assert_eq!(b, ratio(1, 3i64.pow(((r + 1) / 2) as u32)));
    }
    // a variable that does not occur leaves the density unchanged
    let xy = PadicPolynomial::from_json(&f, r#"[{"exps":[1,0],"coeff":"1"}]"#, 10).unwrap();
    let both = poly_val_fraction(&xy, qi(1), 3, 1 << 16).unwrap().fraction;
    assert_eq!(both, ratio(1, 3));
}
