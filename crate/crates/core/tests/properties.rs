use bt_bounds::character::{element_invariants, split_from_ints};
use bt_bounds::fixedpoints::{count_fixed_in_orbit, count_fixed_in_orbit_naive, gl_point_from_simple, UnipotentCosetBox};
use bt_bounds::integration::{coset_measure, KFunction, MeasureContext, TorusKind};
use bt_bounds::lattice::{smith_normal_form, LatticeMatrix, Sublattice};
use bt_bounds::localfield::{base_field, Elem, Valuation};
use bt_bounds::measure::{poly_val_fraction, PadicPolynomial};
use bt_bounds::num::{ppow, qi, vp_i128, Q};
use bt_bounds::rootsys::{ApartmentPoint, RootSystemData, RootSystemName};
use bt_bounds::suite::torus_orbit_size;
use bt_bounds::tree::{diag, mat2_int, mat2_inv, Tree, TreeVertex};
use num_rational::BigRational;
use proptest::prelude::*;

fn prime() -> impl Strategy<Value = u64> {
    prop::sample::select(vec![2u64, 3, 5])
}

fn nonzero(lim: i64) -> impl Strategy<Value = i64> {
    (-lim..lim).prop_filter("nonzero", |x| *x != 0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn elem_arithmetic_matches_integers(p in prime(), a in nonzero(10_000), b in nonzero(10_000)) {
        let f = base_field(p);
        let prec = 8;
        let x = Elem::integer(&f, a as i128, prec).unwrap();
        let y = Elem::integer(&f, b as i128, prec).unwrap();
        let m = ppow(p, 6);
        let s = x.add(&y).unwrap();
        if vp_i128((a + b) as i128, p).is_some_and(|v| v < 6) {
            prop_assert_eq!(s.to_int_mod(6).unwrap(), ((a + b) as i128).rem_euclid(m));
        }
        let prod = x.mul(&y).unwrap();
        prop_assert_eq!(prod.to_int_mod(6).unwrap(), ((a * b) as i128).rem_euclid(m));
        let va = vp_i128(a as i128, p).unwrap() as i64;
        let vb = vp_i128(b as i128, p).unwrap() as i64;
        prop_assert_eq!(prod.valuation(), Valuation::Exact(qi(va + vb)));
        prop_assert_eq!(x.mul(&y).unwrap(), y.mul(&x).unwrap());
        let back = x.inv().unwrap().inv().unwrap();
        prop_assert!(back.congruent(&x, va + prec - 1).unwrap());
    }

    #[test]
    fn smith_exponents_sum_to_det_valuation(p in prime(), e in prop::array::uniform4(-40i64..40)) {
        let f = base_field(p);
        let det = e[0] * e[3] - e[1] * e[2];
        prop_assume!(det != 0 && vp_i128(det as i128, p).unwrap() < 6);
        let rows = vec![vec![e[0] as i128, e[1] as i128], vec![e[2] as i128, e[3] as i128]];
        let m = LatticeMatrix::from_ints(&f, &rows, 10).unwrap();
        let snf = smith_normal_form(&m).unwrap();
        prop_assert_eq!(qi(snf.d.iter().sum()), m.det_valuation().unwrap());
        prop_assert!(snf.d.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn lattice_count_bounded_and_unimodular_invariant(
        p in prop::sample::select(vec![2u64, 3]),
        e in prop::array::uniform4(0i64..27),
        v in prop::array::uniform2(0i64..27),
        u in prop::array::uniform2(0i64..9),
    ) {
        let f = base_field(p);
        let det = e[0] * e[3] - e[1] * e[2];
        prop_assume!(det != 0);
        let prec = 10;
        let sub = Sublattice::scaled(&f, 2, 2, prec).unwrap();
        let rows = |e: [i64; 4]| vec![vec![e[0] as i128, e[1] as i128], vec![e[2] as i128, e[3] as i128]];
        let vec_of = |v: [i64; 2]| v.iter().map(|&x| Elem::integer(&f, x as i128, prec).unwrap()).collect::<Vec<_>>();
        let m = LatticeMatrix::from_ints(&f, &rows(e), prec).unwrap();
        let c = sub.count_affine_solutions(&m, &vec_of(v), 1 << 20).unwrap();
        let vd = vp_i128(det as i128, p).unwrap();
        prop_assert!(c <= (p as u128).pow(vd));
        // U = [[1, u0], [0, 1]]·[[1, 0], [u1, 1]] is unimodular and preserves p^2 L
        let uu = [1 + u[0] * u[1], u[0], u[1], 1];
        let um = [
            uu[0] * e[0] + uu[1] * e[2], uu[0] * e[1] + uu[1] * e[3],
            uu[2] * e[0] + uu[3] * e[2], uu[2] * e[1] + uu[3] * e[3],
        ];
        let uv = [uu[0] * v[0] + uu[1] * v[1], uu[2] * v[0] + uu[3] * v[1]];
        let m2 = LatticeMatrix::from_ints(&f, &rows(um), prec).unwrap();
        prop_assert_eq!(sub.count_affine_solutions(&m2, &vec_of(uv), 1 << 20).unwrap(), c);
    }

    #[test]
    fn weyl_form_is_reflection_invariant(
        name in prop::sample::select(vec![RootSystemName::A2, RootSystemName::B2, RootSystemName::C2, RootSystemName::G2, RootSystemName::A3]),
        xs in prop::collection::vec(-12i64..12, 3),
        ys in prop::collection::vec(-12i64..12, 3),
        j in 0usize..3,
    ) {
        let rs = RootSystemData::build(name);
        let n = rs.rank;
        let j = j % n;
        let x = ApartmentPoint(xs[..n].iter().map(|&v| Q::new(v, 6)).collect());
        let y = ApartmentPoint(ys[..n].iter().map(|&v| Q::new(v, 6)).collect());
        let (sx, sy) = (rs.reflect(j, &x), rs.reflect(j, &y));
        prop_assert_eq!(rs.weyl_form(&sx, &sy), rs.weyl_form(&x, &y));
        prop_assert_eq!(rs.reflect(j, &sx), x.clone());
        let roots = rs.roots();
        for beta in &rs.positive {
            prop_assert!(roots.contains(&rs.reflect_root(j, beta)));
        }
    }

    #[test]
    fn tree_action_is_isometric(
        p in prop::sample::select(vec![2u64, 3]),
        e in prop::array::uniform4(-20i64..20),
        a in -3i64..3, b in 0i64..30, c in -3i64..3, d in 0i64..30,
    ) {
        prop_assume!(e[0] * e[3] - e[1] * e[2] != 0);
        let t = Tree::new(p);
        let g = mat2_int(e[0], e[1], e[2], e[3]);
        let z = t.normalize(&mat2_int(ppow(p, a.max(0) as u32) as i64, b, 0, 1)).unwrap();
        let w = t.normalize(&mat2_int(ppow(p, c.max(0) as u32) as i64, d, 0, 1)).unwrap();
        let (gz, gw) = (t.act(&g, &z).unwrap(), t.act(&g, &w).unwrap());
        prop_assert_eq!(t.distance(&gz, &gw), t.distance(&z, &w));
        prop_assert_eq!(t.distance(&z, &w), t.distance(&w, &z));
        prop_assert_eq!(t.act(&mat2_inv(&g).unwrap(), &gz).unwrap(), z);
    }

    #[test]
    fn fixed_counts_are_k_conjugation_invariant(
        p in prop::sample::select(vec![2u64, 3]),
        m in 1u32..3,
        k in prop::array::uniform4(0i64..9),
    ) {
        let det = k[0] * k[3] - k[1] * k[2];
        prop_assume!(det % p as i64 != 0);
        let t = Tree::new(p);
        let gamma = mat2_int(1, 0, 0, 1 + ppow(p, m) as i64);
        let kk = mat2_int(k[0], k[1], k[2], k[3]);
        let conj = bt_bounds::tree::mat2_mul(&kk, &bt_bounds::tree::mat2_mul(&gamma, &mat2_inv(&kk).unwrap()));
        let origin = TreeVertex::origin();
        prop_assert_eq!(t.fixed_in_ball(&gamma, &origin, 3).unwrap(), t.fixed_in_ball(&conj, &origin, 3).unwrap());
    }

    #[test]
    fn orbit_count_pruned_matches_full_matrix(
        a in 1i64..8, b in 1i64..8, y1 in 0i64..3, y2 in 0i64..3,
    ) {
        let p = 2u64;
        let f = base_field(p);
        let entries = [1i128, 1 + 2 * a as i128, 1 + 2 * a as i128 + 4 * b as i128];
        let spec = split_from_ints(&f, &entries, 16).unwrap();
        let gamma = match &spec {
            bt_bounds::character::ElementSpec::Split(v) => v.clone(),
            _ => unreachable!(),
        };
        let y = gl_point_from_simple(&[qi(y1), qi(y2)]);
        let bx = UnipotentCosetBox::new(&f, &[qi(0); 3], &y).unwrap();
        let fast = count_fixed_in_orbit(&gamma, &bx, 1 << 20).unwrap();
        prop_assert_eq!(fast.count, count_fixed_in_orbit_naive(&gamma, &bx, 1 << 20).unwrap());
        prop_assert!(fast.holds);
    }

    #[test]
    fn invariants_are_permutation_invariant(
        p in prop::sample::select(vec![2u64, 3, 5]),
        x in prop::collection::vec(1i128..200, 3),
        perm in prop::sample::select(vec![[0usize, 1, 2], [1, 0, 2], [2, 1, 0], [0, 2, 1], [1, 2, 0], [2, 0, 1]]),
    ) {
        prop_assume!(x[0] != x[1] && x[1] != x[2] && x[0] != x[2]);
        let f = base_field(p);
        let a = element_invariants(&split_from_ints(&f, &x, 20).unwrap()).unwrap();
        let y: Vec<i128> = perm.iter().map(|&i| x[i]).collect();
        let b = element_invariants(&split_from_ints(&f, &y, 20).unwrap()).unwrap();
        prop_assert_eq!(a.sd, b.sd);
        prop_assert_eq!(a.d_valuation, b.d_valuation);
        prop_assert_eq!(a.compact, b.compact);
    }

    #[test]
    fn valuation_fraction_is_monotone_and_obeys_n1_bound(
        p in prop::sample::select(vec![2u64, 3]),
        coeffs in prop::collection::vec(-20i128..20, 2..5),
    ) {
        prop_assume!(*coeffs.last().unwrap() != 0);
        let f = base_field(p);
        let cs: Vec<Elem> = coeffs.iter().map(|&c| Elem::integer(&f, c, 12).unwrap()).collect();
        let poly = PadicPolynomial::univariate(&f, &cs).unwrap();
        let n = 3;
        let mut prev: Option<BigRational> = None;
        for r in 0..=n {
            let vf = poly_val_fraction(&poly, qi(r as i64), n, 1 << 16).unwrap();
            if let Some(pv) = &prev {
                prop_assert!(vf.fraction <= *pv);
            }
            prop_assert_ne!(vf.n1_holds, Some(false));
            prev = Some(vf.fraction);
        }
    }

    #[test]
    fn coset_measure_equals_torus_orbit_size(
        e in prop::array::uniform4(0i64..9),
        elliptic in any::<bool>(),
    ) {
        let p = 3u64;
        let det = e[0] * e[3] - e[1] * e[2];
        prop_assume!(det != 0 && vp_i128(det as i128, p).unwrap() <= 2);
        let torus = if elliptic { TorusKind::Elliptic { u: 2 } } else { TorusKind::Split };
        let g = mat2_int(e[0], e[1], e[2], e[3]);
        let ctx = MeasureContext::new(p, 4, torus).unwrap();
        let mu = coset_measure(&ctx, &g).unwrap();
        prop_assert_eq!(mu, BigRational::from_integer(torus_orbit_size(p, torus, &g).unwrap().into()));
    }

    #[test]
    fn kfunction_text_round_trips(parts in prop::collection::vec((0u8..5, 0u32..4), 1..4)) {
        let atom = |(k, j): (u8, u32)| match k {
            0 => KFunction::UnitK,
            1 => KFunction::EllipticLocus,
            2 => KFunction::SplitDepth(j),
            3 => KFunction::ScalarMod(j),
            _ => KFunction::DetResidue(j as i64),
        };
        let f = if parts.len() == 1 {
            atom(parts[0])
        } else {
            KFunction::Sum(parts.iter().map(|&x| atom(x)).collect())
        };
        let back: KFunction = f.to_string().parse().unwrap();
        prop_assert_eq!(back, f);
    }
}

#[test]
fn diagonal_tree_fixed_sets_grow_with_depth() {
    let t = Tree::new(3);
    let g = diag(BigRational::from_integer(1.into()), BigRational::from_integer(10.into()));
    let layers = t.fixed_in_ball(&g, &TreeVertex::origin(), 4).unwrap();
    // v(λ − 1) = 2: the fixed set is the 2-neighbourhood of the apartment
    assert_eq!(layers[0], 1);
    assert!(layers.iter().all(|&c| c > 0));
}
