//! Benchmark fixtures shared by the criterion benches.

use algorec::competition::{MultiMarket, ValueSampler};
use algorec::mechanism::solve_equilibrium;
use algorec::{Distribution, Equilibrium};

/// Single-seller equilibrium with uniform costs and values.
pub fn uniform_equilibrium() -> Equilibrium {
    let u = Distribution::uniform();
    solve_equilibrium(&u, &u, 1.0).expect("uniform equilibrium")
}

/// `j` symmetric sellers, uniform costs, iid uniform values.
pub fn symmetric_market(j: usize) -> MultiMarket {
    MultiMarket::new(vec![Distribution::uniform(); j], ValueSampler::Iid(Distribution::uniform()))
        .expect("symmetric market")
}

/// Cost law whose raw virtual cost needs ironing.
pub fn irregular_cost_law() -> Distribution {
    Distribution::piecewise_linear(vec![(0.0, 0.0), (0.5, 0.2), (0.6, 0.7), (1.0, 1.0)]).expect("pwl law")
}
