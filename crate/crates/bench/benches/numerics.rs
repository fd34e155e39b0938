use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use algorec::competition::{estimate_price_schedules, simulate, CompetitiveEquilibrium};
use algorec::mechanism::{build_optimal_algorithm, solve_equilibrium};
use algorec::numerics::{integrate, linspace};
use algorec::oracle::{best_response_equilibrium, GridGame};
use algorec::{Distribution, VirtualCost};
use algorec_bench::{irregular_cost_law, symmetric_market, uniform_equilibrium};

fn quadrature(c: &mut Criterion) {
    c.bench_function("integrate_smooth", |b| {
        b.iter(|| integrate(|x| (3.0 * x).sin() * x.exp(), 0.0, black_box(2.0), 1e-9))
    });
}

fn single_seller(c: &mut Criterion) {
    let u = Distribution::uniform();
    c.bench_function("solve_equilibrium_uniform", |b| {
        b.iter(|| solve_equilibrium(&u, &u, black_box(1.0)).unwrap())
    });
    let eq = uniform_equilibrium();
    c.bench_function("pseudo_value_eval", |b| b.iter(|| eq.pseudo_value().eval(black_box(0.37)).unwrap()));
    let f = irregular_cost_law();
    c.bench_function("iron_virtual_cost", |b| b.iter(|| VirtualCost::new(f.clone(), black_box(1.0)).unwrap()));
}

fn competition(c: &mut Criterion) {
    let market = symmetric_market(2);
    let grid = linspace(0.0, 1.0, 101);
    let mut g = c.benchmark_group("competition");
    g.sample_size(10);
    g.bench_function("estimate_schedules_1e5", |b| {
        b.iter(|| estimate_price_schedules(&market, 100_000, &grid, black_box(1)).unwrap())
    });
    let eq = CompetitiveEquilibrium::estimate(market.clone(), 100_000, &grid, 1).unwrap();
    g.bench_function("simulate_1e5", |b| b.iter(|| simulate(&eq, 100_000, black_box(2)).unwrap()));
    g.finish();
}

fn oracle(c: &mut Criterion) {
    let u = Distribution::uniform();
    let algo = build_optimal_algorithm(&u, &u, 1.0).unwrap();
    let game = GridGame::new(&u, &u, 100, 100, 200, &[]).unwrap();
    let mut g = c.benchmark_group("oracle");
    g.sample_size(10);
    g.bench_function("best_response_100x100x200", |b| b.iter(|| best_response_equilibrium(black_box(&game), &algo)));
    g.finish();
}

criterion_group!(benches, quadrature, single_seller, competition, oracle);
criterion_main!(benches);
