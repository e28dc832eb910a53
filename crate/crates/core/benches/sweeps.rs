//! Sweeps run inside a single-thread pool and the default rayon pool.

use bt_bounds::fixedpoints::{count_fixed_in_orbit, gl_point_from_simple, UnipotentCosetBox};
use bt_bounds::integration::{weyl_formula_check, KFunction};
use bt_bounds::localfield::{base_field, Elem};
use bt_bounds::measure::{poly_val_fraction, polynomial_family};
use bt_bounds::num::qi;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn pools() -> Vec<(&'static str, rayon::ThreadPool)> {
    vec![
        ("sequential", rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap()),
        ("parallel", rayon::ThreadPoolBuilder::new().build().unwrap()),
    ]
}

fn gl3_orbit(c: &mut Criterion) {
    let f = base_field(2);
    let gamma: Vec<Elem> = [1, 3, 7].iter().map(|&x| Elem::integer(&f, x, 16).unwrap()).collect();
    let y = gl_point_from_simple(&[qi(3), qi(3)]);
    let bx = UnipotentCosetBox::new(&f, &[qi(0); 3], &y).unwrap();
    let mut g = c.benchmark_group("gl3_orbit_count");
    g.sample_size(10);
    for (name, pool) in pools() {
        g.bench_with_input(BenchmarkId::from_parameter(name), &pool, |b, pool| {
            b.iter(|| pool.install(|| count_fixed_in_orbit(&gamma, &bx, 1 << 30).unwrap().count))
        });
    }
    g.finish();
}

fn weyl(c: &mut Criterion) {
    let f = KFunction::SplitDepth(1);
    let mut g = c.benchmark_group("weyl_p3_depth1");
    g.sample_size(10);
    for (name, pool) in pools() {
        g.bench_with_input(BenchmarkId::from_parameter(name), &pool, |b, pool| {
            b.iter(|| pool.install(|| weyl_formula_check(&f, 3, 3, 1 << 24).unwrap().equal))
        });
    }
    g.finish();
}

fn valuation_family(c: &mut Criterion) {
    let field = base_field(3);
    let family = polynomial_family(&field, 3, 12).unwrap();
    let mut g = c.benchmark_group("valuation_family_deg3");
    g.sample_size(10);
    for (name, pool) in pools() {
        g.bench_with_input(BenchmarkId::from_parameter(name), &pool, |b, pool| {
            b.iter(|| {
                pool.install(|| {
                    family.iter().filter(|p| poly_val_fraction(p, qi(2), 3, 1 << 16).unwrap().n1_holds == Some(true)).count()
                })
            })
        });
    }
    g.finish();
}

criterion_group!(benches, gl3_orbit, weyl, valuation_family);
criterion_main!(benches);
