use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use morphnash::game::{init_riccati, lyapunov_iterations, IterationOptions};
use morphnash::linalg::{solve_are, solve_lyapunov};
use morphnash::meta::daiml::daiml_step;
use morphnash_bench::{daiml_fixture, game_fixture, random_matrix, random_spd, random_stable, rng};
use nalgebra::DMatrix;

fn lyapunov(c: &mut Criterion) {
    let mut r = rng(1);
    let a = random_stable(5, &mut r);
    let q = random_spd(5, 0.1, &mut r);
    c.bench_function("lyapunov_5x5", |b| b.iter(|| solve_lyapunov(&a, &q).unwrap()));
}

fn are(c: &mut Criterion) {
    let mut r = rng(2);
    let a = random_matrix(5, 5, &mut r);
    let bm = random_matrix(5, 2, &mut r);
    let q = random_spd(5, 0.1, &mut r);
    let rr = DMatrix::identity(2, 2);
    c.bench_function("are_5x5_m2", |b| b.iter(|| solve_are(&a, &bm, &q, &rr).unwrap()));
}

fn game(c: &mut Criterion) {
    let f = game_fixture(3);
    c.bench_function("game_init", |b| b.iter(|| init_riccati(&f.model, &f.weights).unwrap()));
    let (init, _) = init_riccati(&f.model, &f.weights).unwrap();
    let opts = IterationOptions::default();
    c.bench_function("game_lyapunov_iterations_cold", |b| {
        b.iter(|| lyapunov_iterations(&init, &f.model, &f.weights, &opts).unwrap())
    });
}

fn daiml(c: &mut Criterion) {
    let f = daiml_fixture(4);
    c.bench_function("daiml_step", |b| {
        b.iter_batched(
            || (f.phi.clone(), f.disc.clone(), rng(5)),
            |(mut phi, mut disc, mut r)| {
                daiml_step(&mut phi, &mut disc, &f.batch_a, &f.batch_b, 0, &f.cfg, &mut r).unwrap()
            },
            BatchSize::SmallInput,
        )
    });
}

criterion_group!(benches, lyapunov, are, game, daiml);
criterion_main!(benches);
