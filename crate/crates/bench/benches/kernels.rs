use criterion::{criterion_group, criterion_main, Criterion};
use quasikin::base_process::NoiseStream;
use quasikin::chaos_expansion::{simulate_ensemble, ChaosIntegrator, DuhamelConfig};
use quasikin::continuum::WLineRule;
use quasikin::kinetic_operator::{k_apply, KineticConfig};
use quasikin::resonance_quadric::{quadric_integrate, QuadricMeasure};
use quasikin::wick_engine::{sigma_closed_form, SumDomain};
use quasikin::{Horizon, PhysicalParams, SpectralDensity};
use quasikin_bench::{big_b, lattice, profiles};
use std::hint::black_box;
use std::sync::Arc;

fn quadric(c: &mut Criterion) {
    let qm = QuadricMeasure::ball(2, 1.0);
    c.bench_function("quadric_ball_d2", |b| {
        b.iter(|| quadric_integrate(|_, _| 1.0, black_box(&qm)).unwrap())
    });
}

fn kinetic(c: &mut Criterion) {
    let v = SpectralDensity::Radial(big_b(0.25, 21));
    let cfg = KineticConfig::compact(2, 4.0, 5.0);
    c.bench_function("k_apply_origin", |b| {
        b.iter(|| k_apply(black_box(&v), &[0.0; 3], &cfg).unwrap())
    });
}

fn wick(c: &mut Criterion) {
    let p = profiles();
    let lat = lattice(6.0, 2.0);
    let dom = SumDomain::Lattice(&lat);
    c.bench_function("sigma_lattice_L6", |b| {
        b.iter(|| sigma_closed_form(&[0.0; 3], black_box(&dom), &p, 0.1).unwrap())
    });
    let cont = SumDomain::Continuum { d: 2, rule: WLineRule::coarse() };
    c.bench_function("sigma_continuum_origin", |b| {
        b.iter(|| sigma_closed_form(&[0.0; 3], black_box(&cont), &p, 0.1).unwrap())
    });
}

fn duhamel(c: &mut Criterion) {
    let p = profiles();
    let lat = Arc::new(lattice(3.0, 1.5));
    let params = PhysicalParams::new(2, 0.2, 0.05, Horizon::Finite(0.5)).unwrap();
    let dc = DuhamelConfig::for_params(&params, &p);
    let integ = ChaosIntegrator::new(lat.clone(), p, params, dc).unwrap();
    let noise = NoiseStream::new(1);
    let mut g = c.benchmark_group("ensemble");
    g.sample_size(10);
    g.bench_function("simulate_L3_8_samples", |b| {
        b.iter(|| simulate_ensemble(&integ, &noise, 8, &[0.0], &[lat.origin()], true).unwrap())
    });
    g.finish();
}

criterion_group!(benches, quadric, kinetic, wick, duhamel);
criterion_main!(benches);
