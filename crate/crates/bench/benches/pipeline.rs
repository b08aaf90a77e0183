use criterion::{criterion_group, criterion_main, Criterion};
use fsrg::config::{Fixture, RgSettings};
use fsrg::feshbach::{feshbach, first_feshbach_quick, random_pair};
use fsrg::linalg::c64;
use fsrg::model::{build_hamiltonian, evaluate};
use fsrg::oracle::dense_spectrum;
use fsrg::rg::{iterate_to_fixed_point, RgConfig};
use fsrg_bench::fixture;

fn feshbach_random(c: &mut Criterion) {
    let p = random_pair(1, 40);
    c.bench_function("feshbach random pair", |b| b.iter(|| feshbach(&p.h, &p.t, &p.cutoffs).unwrap()));
}

fn first_map(c: &mut Criterion) {
    let spec = fixture(Fixture::Pauli);
    let full = spec.full_basis().unwrap();
    let point = evaluate(&spec, spec.s0).unwrap();
    c.bench_function("first feshbach pauli", |b| {
        b.iter(|| first_feshbach_quick(&point, c64(-0.02, 0.0), &full, spec.window.z_radius).unwrap())
    });
}

fn oracle(c: &mut Criterion) {
    let spec = fixture(Fixture::Pauli);
    let full = spec.full_basis().unwrap();
    let h = build_hamiltonian(&spec, spec.s0, spec.g, &full).unwrap();
    c.bench_function("dense spectrum pauli", |b| b.iter(|| dense_spectrum(&h).unwrap()));
}

fn iteration(c: &mut Criterion) {
    let mut g = c.benchmark_group("rg iteration");
    g.sample_size(10);
    for f in [Fixture::Triv, Fixture::Kramers] {
        let spec = fixture(f);
        let cfg = RgConfig::new(&spec, &RgSettings::default()).unwrap();
        g.bench_function(f.name(), |b| b.iter(|| iterate_to_fixed_point(&spec, spec.s0, &cfg).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, feshbach_random, first_map, oracle, iteration);
criterion_main!(benches);
