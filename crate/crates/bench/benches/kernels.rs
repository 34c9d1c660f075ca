use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;
use twistknot::circuit::{block_embed, nonunitary_evolution, sweep_rotation_angle, DEFAULT_LAMBDA_SAMPLES};
use twistknot::knots::jones;
use twistknot::numerics::{eig, expm};
use twistknot::BraidWord;
use twistknot_bench::{hopf_hamiltonian, solomon_hamiltonian};

fn kernels(c: &mut Criterion) {
    let h4 = solomon_hamiltonian(1.0);
    let h2 = hopf_hamiltonian(1.0);
    c.bench_function("eig_4x4", |b| b.iter(|| eig(black_box(&h4)).unwrap()));
    c.bench_function("expm_4x4", |b| b.iter(|| expm(black_box(&h4), 20.0).unwrap()));
    let u = nonunitary_evolution(&h4, 20.0, 0.3).unwrap();
    c.bench_function("block_embed_4x4", |b| b.iter(|| block_embed(black_box(&u)).unwrap()));
    let target = eig(&h2).unwrap().right[0].clone();
    c.bench_function("lambda_sweep_2band", |b| {
        b.iter(|| sweep_rotation_angle(black_box(&h2), &target, 20.0, DEFAULT_LAMBDA_SAMPLES).unwrap())
    });
    let word = BraidWord::parse("s1 s3 s2 s1 s3 s2", 4).unwrap();
    c.bench_function("jones_solomon", |b| b.iter(|| jones(black_box(&word)).unwrap()));
}

criterion_group!(benches, kernels);
criterion_main!(benches);
