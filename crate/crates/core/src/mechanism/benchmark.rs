use serde::Serialize;

use super::Threshold;
use crate::distributions::Distribution;
use crate::error::{Error, Result};
use crate::numerics::{bisect_increasing, grid_then_golden, linspace};
use crate::screening::VirtualCost;

const ARGMAX_GRID: usize = 10_000;
const ARGMAX_TOL: f64 = 1e-10;
const HAZARD_SCAN: usize = 1_000;

/// Monopoly price under the ex-post optimal algorithm.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Monopoly {
    pub price: f64,
    pub profit: f64,
    pub threshold: f64,
}

/// `argmax_p (p - c) (1 - G(p))` over `[c, v_hi]`.
pub fn monopoly_benchmark(value_law: &Distribution, c: f64) -> Result<Monopoly> {
    if !(0.0..=1.0).contains(&c) {
        return Err(Error::OutOfRange {
            what: "cost",
            value: c,
            lo: 0.0,
            hi: 1.0,
        });
    }
    let hi = value_law.support_hi();
    if c >= hi {
        return Ok(Monopoly {
            price: c,
            profit: 0.0,
            threshold: c,
        });
    }
    let profit = |p: f64| (p - c) * (1.0 - value_law.cdf_left(p));
    let (price, best) = grid_then_golden(profit, c, hi, ARGMAX_GRID, ARGMAX_TOL);
    Ok(Monopoly {
        price,
        profit: best,
        threshold: price,
    })
}

/// Point where the buyer-optimal and ex-post trade boundaries cross.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Crossing {
    pub crossing_cost: f64,
    pub crossing_value: f64,
}

/// Solve `γ(c) = r⁻¹(c)`, with `r(v) = v - (1 - G(v))/g(v)` the virtual
/// value. With `check_regularity` the reversed hazard `f/F` must be strictly
/// decreasing and the hazard `g/(1 - G)` strictly increasing on a scan grid.
pub fn allocation_substitution(
    cost_law: &Distribution,
    value_law: &Distribution,
    check_regularity: bool,
) -> Result<Crossing> {
    let vc = VirtualCost::new(cost_law.clone(), 1.0)?;
    let g = |v: f64| -> Result<f64> {
        value_law
            .pdf(v)
            .ok_or_else(|| Error::DensityUnavailable("value law has no density".into()))
    };
    if check_regularity {
        let interior: Vec<f64> = linspace(0.0, 1.0, HAZARD_SCAN + 2)[1..=HAZARD_SCAN].to_vec();
        let mut prev_rev = f64::INFINITY;
        let mut prev_haz = f64::NEG_INFINITY;
        for &x in &interior {
            let f = cost_law
                .pdf(x)
                .ok_or_else(|| Error::DensityUnavailable("cost law has no density".into()))?;
            let rev = f / cost_law.cdf(x);
            if !(rev < prev_rev) {
                return Err(Error::RegularityViolated(format!(
                    "reversed hazard rate of the cost law is not strictly decreasing at {x}"
                )));
            }
            prev_rev = rev;
            let haz = g(x)? / (1.0 - value_law.cdf(x));
            if !(haz > prev_haz) {
                return Err(Error::RegularityViolated(format!(
                    "hazard rate of the value law is not strictly increasing at {x}"
                )));
            }
            prev_haz = haz;
        }
    }
    let v_hi = value_law.support_hi();
    let virtual_value = |v: f64| -> f64 {
        let tail = 1.0 - value_law.cdf(v);
        if tail <= 0.0 {
            return v;
        }
        v - tail / g(v).unwrap_or(f64::NAN)
    };
    let c_bar = vc.inverse_clamped(v_hi);
    let c = bisect_increasing(|c| virtual_value(vc.eval(c).min(v_hi)) - c, 0.0, c_bar, 1e-12);
    Ok(Crossing {
        crossing_cost: c,
        crossing_value: vc.eval(c),
    })
}

/// Outcome when the algorithm knows the seller's cost `c0`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct KnownCostOutcome {
    pub price: f64,
    pub seller_profit: f64,
    pub buyer_surplus: f64,
    pub threshold: f64,
}

/// The seller's best response to the known-cost algorithm: every price but
/// `c0` is rejected, so it posts `c0` and the buyer keeps all gains.
pub fn known_cost_outcome(value_law: &Distribution, c0: f64) -> Result<KnownCostOutcome> {
    let algo = super::build_known_cost_algorithm(c0)?;
    let demand = algo.threshold(c0).demand(value_law);
    let t = match algo.threshold(c0) {
        Threshold::Value(t) => t,
        Threshold::Reject => unreachable!("known-cost algorithm accepts its own cost"),
    };
    let price = c0;
    let buyer = value_law.partial_expectation(|v| v - price, t, value_law.support_hi(), 1e-12);
    Ok(KnownCostOutcome {
        price,
        seller_profit: (price - c0) * demand,
        buyer_surplus: buyer,
        threshold: t,
    })
}
