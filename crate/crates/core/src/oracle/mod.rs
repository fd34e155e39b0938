//! Brute-force checks on discretised games.
//!
//! Costs and values become finitely many atoms and prices a finite grid.
//! Every seller type best-responds by enumeration against a given algorithm,
//! and the buyer's design problem is solved directly as a discrete screening
//! program. Nothing here reuses the closed forms it is meant to check.

use rayon::prelude::*;
use serde::Serialize;

use crate::distributions::{Distribution, DistributionKind};
use crate::error::{Error, Result};
use crate::mechanism::{posterior_mean_above, Equilibrium, Threshold, ThresholdAlgorithm};
use crate::numerics::{linspace, pava};
use crate::screening::rent_weight;
use crate::segmentation::SegmentedMarket;

pub const DEFAULT_COST_ATOMS: usize = 400;
pub const DEFAULT_VALUE_ATOMS: usize = 400;
pub const DEFAULT_PRICES: usize = 800;

/// Finite cost and value laws plus candidate prices.
#[derive(Clone, Debug)]
pub struct GridGame {
    /// `(cost, weight)`, sorted, weights summing to 1.
    pub costs: Vec<(f64, f64)>,
    pub values: Vec<(f64, f64)>,
    /// Sorted, deduplicated.
    pub prices: Vec<f64>,
}

/// `n` equally weighted atoms at the quantile midpoints, or the atoms
/// themselves for a grid law.
pub fn discretize(law: &Distribution, n: usize) -> Result<Vec<(f64, f64)>> {
    if let DistributionKind::Grid { atoms } = law.kind() {
        return Ok(atoms.clone());
    }
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one atom".into()));
    }
    (0..n)
        .map(|i| Ok((law.quantile((i as f64 + 0.5) / n as f64)?, 1.0 / n as f64)))
        .collect()
}

impl GridGame {
    /// `n_p` equally spaced prices on `[0, 1]` plus `extra_prices`.
    pub fn new(
        cost_law: &Distribution,
        value_law: &Distribution,
        n_c: usize,
        n_v: usize,
        n_p: usize,
        extra_prices: &[f64],
    ) -> Result<Self> {
        if n_p < 2 {
            return Err(Error::InvalidArgument("price grid needs at least 2 points".into()));
        }
        let mut prices = linspace(0.0, 1.0, n_p);
        prices.extend(extra_prices.iter().copied().filter(|p| p.is_finite()));
        prices.sort_by(f64::total_cmp);
        prices.dedup();
        Ok(Self {
            costs: discretize(cost_law, n_c)?,
            values: discretize(value_law, n_v)?,
            prices,
        })
    }

    /// Default 400 × 400 × 800 game whose price grid also contains the
    /// analytic equilibrium price of every active cost atom.
    pub fn with_equilibrium_prices(eq: &Equilibrium) -> Result<Self> {
        let mut game = Self::new(
            eq.cost_law(),
            eq.value_law(),
            DEFAULT_COST_ATOMS,
            DEFAULT_VALUE_ATOMS,
            DEFAULT_PRICES,
            &[],
        )?;
        let extra: Vec<f64> = game
            .costs
            .iter()
            .filter(|a| eq.is_active(a.0))
            .map(|a| eq.price(a.0))
            .collect();
        game.prices.extend(extra);
        game.prices.sort_by(f64::total_cmp);
        game.prices.dedup();
        Ok(game)
    }

    /// Value-grid law.
    pub fn value_law(&self) -> Result<Distribution> {
        Distribution::grid(self.values.clone())
    }

    /// `(demand, obeyed)` at price `p`: the recommended mass, and whether the
    /// recommended buyer's posterior mean weakly exceeds `p` on the grid.
    pub fn demand(&self, algo: &ThresholdAlgorithm, p: f64) -> (f64, bool) {
        match algo.threshold(p) {
            Threshold::Reject => (0.0, false),
            Threshold::Value(t) => {
                let (mass, sum) = self
                    .values
                    .iter()
                    .filter(|a| a.0 >= t)
                    .fold((0.0, 0.0), |(m, s), &(v, w)| (m + w, s + w * v));
                if mass <= 0.0 {
                    return (0.0, false);
                }
                (mass, sum / mass >= p)
            }
        }
    }
}

/// Oracle equilibrium of a [`GridGame`].
#[derive(Clone, Debug, Serialize)]
pub struct GridEquilibrium {
    pub costs: Vec<f64>,
    /// Best price per cost atom (lowest among ties).
    pub prices: Vec<f64>,
    pub profits: Vec<f64>,
    /// Whether the atom earns a positive profit.
    pub active: Vec<bool>,
    pub buyer_surplus: f64,
    pub seller_profit: f64,
    /// `[cost][value]` trade indicator.
    #[serde(skip)]
    pub allocation: Vec<Vec<bool>>,
}

/// Each cost atom maximises `(p - c) P(v >= threshold(p)) obey(p)` over the
/// price grid, ties toward the lower price.
pub fn best_response_equilibrium(game: &GridGame, algo: &ThresholdAlgorithm) -> GridEquilibrium {
    let per_price: Vec<(f64, Option<f64>)> = game
        .prices
        .par_iter()
        .map(|&p| {
            let (d, ok) = game.demand(algo, p);
            let t = match algo.threshold(p) {
                Threshold::Value(t) if ok => Some(t),
                _ => None,
            };
            (if ok { d } else { 0.0 }, t)
        })
        .collect();
    let picks: Vec<(f64, f64)> = game
        .costs
        .par_iter()
        .map(|&(c, _)| {
            let mut best = (f64::NAN, f64::NEG_INFINITY);
            for (&p, &(d, _)) in game.prices.iter().zip(&per_price) {
                let profit = (p - c) * d;
                if profit > best.1 {
                    best = (p, profit);
                }
            }
            best
        })
        .collect();

    let mut out = GridEquilibrium {
        costs: game.costs.iter().map(|a| a.0).collect(),
        prices: Vec::with_capacity(picks.len()),
        profits: Vec::with_capacity(picks.len()),
        active: Vec::with_capacity(picks.len()),
        buyer_surplus: 0.0,
        seller_profit: 0.0,
        allocation: Vec::with_capacity(picks.len()),
    };
    for (&(c, wc), &(p, profit)) in game.costs.iter().zip(&picks) {
        let i = game.prices.partition_point(|&x| x < p);
        let threshold = per_price.get(i).and_then(|x| x.1);
        let active = profit > 0.0;
        let row: Vec<bool> = game
            .values
            .iter()
            .map(|&(v, _)| active && threshold.is_some_and(|t| v >= t))
            .collect();
        for (&(v, wv), &trade) in game.values.iter().zip(&row) {
            if trade {
                out.buyer_surplus += wc * wv * (v - p);
                out.seller_profit += wc * wv * (p - c);
            }
        }
        out.prices.push(p);
        out.profits.push(profit.max(0.0));
        out.active.push(active);
        out.allocation.push(row);
    }
    out
}

/// Largest gain over the price grid of any cost atom relative to pricing at
/// `price(c)`.
pub fn deviation_gain<P: Fn(f64) -> f64 + Sync>(game: &GridGame, algo: &ThresholdAlgorithm, price: P) -> f64 {
    let eff: Vec<f64> = game
        .prices
        .par_iter()
        .map(|&p| match game.demand(algo, p) {
            (d, true) => d,
            _ => 0.0,
        })
        .collect();
    game.costs
        .par_iter()
        .map(|&(c, _)| {
            let p0 = price(c);
            let base = match game.demand(algo, p0) {
                (d, true) => (p0 - c) * d,
                _ => 0.0,
            };
            let best = game
                .prices
                .iter()
                .zip(&eff)
                .map(|(&p, &d)| (p - c) * d)
                .fold(0.0f64, f64::max);
            best - base
        })
        .reduce(|| f64::NEG_INFINITY, f64::max)
}

/// Solution of the discrete screening program.
#[derive(Clone, Debug, Serialize)]
pub struct ScreeningSolution {
    pub costs: Vec<f64>,
    /// Trade probability per cost atom.
    pub q: Vec<f64>,
    /// Expected payment per cost atom.
    pub t: Vec<f64>,
    /// Discrete (ironed) virtual costs.
    pub virtual_costs: Vec<f64>,
    /// `Σ w (V(q) - γ q)`.
    pub objective: f64,
    pub buyer_surplus: f64,
    pub seller_profit: f64,
}

/// Discrete Baron–Myerson program with Pareto weight `alpha`.
///
/// Virtual costs of the atoms are `c_i + w (W_{<i} / w_i)(c_i - c_{i-1})`,
/// ironed by weighted isotonic regression; each atom trades with exactly the
/// value atoms at or above its virtual cost (the pointwise maximiser of
/// `V(q) - γ q` for the concave `V` of the value grid); payments follow the
/// discrete envelope condition.
pub fn solve_screening_program(game: &GridGame, alpha: f64) -> Result<ScreeningSolution> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::OutOfRange {
            what: "alpha",
            value: alpha,
            lo: 0.0,
            hi: 1.0,
        });
    }
    let w = rent_weight(alpha);
    let mut below = 0.0;
    let raw: Vec<f64> = game
        .costs
        .iter()
        .enumerate()
        .map(|(i, &(c, wc))| {
            let step = if i == 0 { 0.0 } else { c - game.costs[i - 1].0 };
            let g = c + w * below / wc * step;
            below += wc;
            g
        })
        .collect();
    let gamma = pava(&raw, &game.costs.iter().map(|a| a.1).collect::<Vec<_>>());
    let (q, welfare): (Vec<f64>, Vec<f64>) = gamma
        .iter()
        .map(|&g| {
            game.values
                .iter()
                .filter(|a| a.0 >= g)
                .fold((0.0, 0.0), |(q, s), &(v, wv)| (q + wv, s + wv * v))
        })
        .unzip();
    let n = q.len();
    let mut t = vec![0.0; n];
    let mut tail = 0.0;
    for i in (0..n).rev() {
        t[i] = q[i] * game.costs[i].0 + tail;
        if i > 0 {
            tail += q[i] * (game.costs[i].0 - game.costs[i - 1].0);
        }
    }
    let mut sol = ScreeningSolution {
        costs: game.costs.iter().map(|a| a.0).collect(),
        q,
        t,
        virtual_costs: gamma,
        objective: 0.0,
        buyer_surplus: 0.0,
        seller_profit: 0.0,
    };
    for i in 0..n {
        let wc = game.costs[i].1;
        sol.objective += wc * (welfare[i] - sol.virtual_costs[i] * sol.q[i]);
        sol.buyer_surplus += wc * (welfare[i] - sol.t[i]);
        sol.seller_profit += wc * (sol.t[i] - sol.costs[i] * sol.q[i]);
    }
    Ok(sol)
}

/// `E[v | recommended, p]` under a threshold algorithm.
pub fn posterior_mean(g: &Distribution, algo: &ThresholdAlgorithm, p: f64) -> Result<f64> {
    match algo.threshold(p) {
        Threshold::Reject => Err(Error::ZeroMass {
            lo: f64::INFINITY,
            hi: f64::INFINITY,
            mass: 0.0,
        }),
        Threshold::Value(t) => {
            let mass = 1.0 - g.cdf_left(t);
            if mass <= crate::distributions::Tolerances::default().mass_floor {
                return Err(Error::ZeroMass {
                    lo: t,
                    hi: g.support_hi(),
                    mass,
                });
            }
            Ok(posterior_mean_above(g, t))
        }
    }
}

/// Allocation, interim profits and buyer surplus of a mechanism on a grid.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub costs: Vec<f64>,
    pub values: Vec<f64>,
    /// `[cost][value]`.
    pub allocation: Vec<Vec<bool>>,
    pub profit: Vec<f64>,
    pub buyer_surplus: f64,
}

impl Outcome {
    pub fn from_grid_equilibrium(game: &GridGame, eq: &GridEquilibrium) -> Self {
        Self {
            costs: eq.costs.clone(),
            values: game.values.iter().map(|a| a.0).collect(),
            allocation: eq.allocation.clone(),
            profit: eq.profits.clone(),
            buyer_surplus: eq.buyer_surplus,
        }
    }

    /// A segmented single-seller market evaluated at the game's atoms.
    pub fn from_segmented(game: &GridGame, market: &SegmentedMarket) -> Result<Self> {
        let allocation = game
            .costs
            .par_iter()
            .map(|&(c, _)| game.values.iter().map(|&(v, _)| market.recommends(v, c)).collect())
            .collect::<Result<Vec<Vec<bool>>>>()?;
        let profit = game
            .costs
            .iter()
            .map(|&(c, _)| market.profit(c))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            costs: game.costs.iter().map(|a| a.0).collect(),
            values: game.values.iter().map(|a| a.0).collect(),
            allocation,
            profit,
            buyer_surplus: market.buyer_surplus()?,
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EquivalenceReport {
    pub pass: bool,
    /// First premise or conclusion that failed.
    pub violation: Option<String>,
    /// Cells where the allocations differ away from a trade boundary.
    pub allocation_mismatches: usize,
    /// Differing cells next to a trade boundary (ignored).
    pub tie_cells: usize,
    pub top_profit: (f64, f64),
    pub max_profit_gap: f64,
    pub surplus_gap: f64,
}

fn at_boundary(row: &[bool], k: usize) -> bool {
    (k > 0 && row[k - 1] != row[k]) || (k + 1 < row.len() && row[k + 1] != row[k])
}

/// Payoff equivalence: equal allocations and zero profit at the top type
/// imply equal interim profits and buyer surplus.
pub fn payoff_equivalence_audit(a: &Outcome, b: &Outcome, tol: f64) -> Result<EquivalenceReport> {
    if a.costs != b.costs || a.values != b.values {
        return Err(Error::InvalidArgument("outcomes live on different grids".into()));
    }
    let (mut mismatches, mut ties) = (0, 0);
    for (ra, rb) in a.allocation.iter().zip(&b.allocation) {
        for k in 0..ra.len() {
            if ra[k] != rb[k] {
                if at_boundary(ra, k) || at_boundary(rb, k) {
                    ties += 1;
                } else {
                    mismatches += 1;
                }
            }
        }
    }
    let top = (
        a.profit.last().copied().unwrap_or(0.0),
        b.profit.last().copied().unwrap_or(0.0),
    );
    let max_profit_gap = a
        .profit
        .iter()
        .zip(&b.profit)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    let surplus_gap = (a.buyer_surplus - b.buyer_surplus).abs();
    let violation = if mismatches > 0 {
        Some(format!("allocations differ in {mismatches} cells"))
    } else if top.0.abs() > tol || top.1.abs() > tol {
        Some(format!("top-type profits {:.3e}, {:.3e} are not zero", top.0, top.1))
    } else if max_profit_gap > tol {
        Some(format!("interim profits differ by {max_profit_gap:.3e}"))
    } else if surplus_gap > tol {
        Some(format!("buyer surplus differs by {surplus_gap:.3e}"))
    } else {
        None
    };
    Ok(EquivalenceReport {
        pass: violation.is_none(),
        violation,
        allocation_mismatches: mismatches,
        tie_cells: ties,
        top_profit: top,
        max_profit_gap,
        surplus_gap,
    })
}
