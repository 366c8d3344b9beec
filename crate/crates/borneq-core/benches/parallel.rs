//! Parallel vs sequential throughput of the data-parallel kernels.
//!
//! The `parallel` feature only changes who computes each fixed chunk, never
//! the result; these benches quantify the speedup. Build with
//! `--no-default-features` to watch the dispatching entries collapse onto
//! the sequential baselines.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use borneq_core::functionals::{bi_action, cell_grad_sq, ChargeSource};
use borneq_core::geometry::{build_boundary_mesh, build_grid, DomainSpec, GridFunction};
use borneq_core::measures::{mollify, uniform_measure};
use borneq_core::par;
use borneq_core::solver::poisson::PoissonSolver;

fn bench_reductions(c: &mut Criterion) {
    let n = 1 << 21;
    let data: Vec<f64> = (0..n).map(|i| ((i as f64) * 1e-3).sin()).collect();
    let mut group = c.benchmark_group("chunked_sum");
    group.bench_with_input(BenchmarkId::new("dispatch", n), &data, |b, d| {
        b.iter(|| par::sum_indexed(d.len(), |i| d[i]))
    });
    group.bench_with_input(BenchmarkId::new("sequential", n), &data, |b, d| {
        b.iter(|| par::sum_indexed_seq(d.len(), |i| d[i]))
    });
    group.finish();
}

fn setup_field(m: usize) -> GridFunction {
    let dom = DomainSpec::ball(1.0);
    let grid = build_grid(&dom, 2.5, m).unwrap();
    let mut phi = GridFunction::zeros(grid);
    for idx in 0..grid.n_nodes() {
        let p = grid.position(idx);
        phi.values_mut()[idx] = 0.2 * (p[0] * 1.3).sin() * (p[1] - p[2]).cos();
    }
    phi
}

fn bench_action(c: &mut Criterion) {
    let phi = setup_field(65);
    let grid = phi.grid();
    let mut group = c.benchmark_group("bulk_action_m65");
    group.bench_function("dispatch", |b| {
        b.iter(|| bi_action(&phi, ChargeSource::None).unwrap().bulk)
    });
    group.bench_function("sequential", |b| {
        let h3 = grid.spacing().powi(3);
        b.iter(|| {
            h3 * par::sum_indexed_seq(grid.n_cells(), |ci| {
                1.0 - (1.0 - cell_grad_sq(phi.values(), grid, ci)).max(0.0).sqrt()
            })
        })
    });
    group.finish();
}

fn bench_poisson(c: &mut Criterion) {
    let phi = setup_field(65);
    let grid = phi.grid();
    let mut solver = PoissonSolver::new(grid);
    let mut out = vec![0.0; grid.n_nodes()];
    c.bench_function("poisson_apply_m65", |b| {
        b.iter(|| solver.apply(phi.values(), &mut out))
    });
}

fn bench_mollify(c: &mut Criterion) {
    let dom = DomainSpec::ball(1.0);
    let grid = build_grid(&dom, 2.5, 65).unwrap();
    let mesh = build_boundary_mesh(&dom, 512).unwrap();
    let rho = uniform_measure(&mesh).unwrap();
    let eps = 4.0 * grid.spacing();
    c.bench_function("mollify_m65_k512", |b| {
        b.iter(|| mollify(&rho, &mesh, eps, grid).unwrap())
    });
}

criterion_group!(benches, bench_reductions, bench_action, bench_poisson, bench_mollify);
criterion_main!(benches);
