//! Buyers who may buy without a recommendation.
//!
//! When the seller's cost `c0` is common knowledge, the worst the algorithm
//! can do to the seller is reveal only whether `v < v̂(p)`, with `v̂` chosen so
//! that the buyer who is told "low" is exactly indifferent. The best profit
//! the seller can guarantee against this gives the equilibrium price of the
//! efficient known-product outcome. With a privately informed seller the
//! buyer-optimal algorithm stays obedient iff `∫_0^{γ(c)} (v - c) dG <= 0`.

use serde::Serialize;

use crate::distributions::{Distribution, Tolerances};
use crate::error::{Error, Result};
use crate::numerics::{bisect_increasing, grid_then_golden, linspace};
use crate::screening::VirtualCost;

/// Price-grid size of the guaranteed-profit search.
pub const PROFIT_GRID: usize = 10_000;
/// Cost types scanned by [`no_purchase_ic_check`].
pub const IC_GRID: usize = 500;
/// Largest integral accepted as nonpositive.
pub const IC_TOL: f64 = 1e-9;

const ROOT_TOL: f64 = 1e-13;
const SEARCH_TOL: f64 = 1e-11;

/// `E[v; v < x]` and `P(v < x)`.
fn below(g: &Distribution, x: f64, tol: f64) -> (f64, f64) {
    let mass = g.cdf_left(x);
    let atom = g.cdf(x) - mass;
    let pe = g.partial_expectation(|v| v, g.support_lo(), x, tol) - x * atom;
    (pe, mass)
}

/// Threshold `v̂(p)` with `E[v | v < v̂] = min{p, E[v]}`: the partition that
/// leaves the buyer told "low" indifferent at price `p`. Returns the top of
/// the support when `p >= E[v]`, the bottom when `p` is at or below it.
pub fn adversarial_threshold(g: &Distribution, p: f64) -> f64 {
    let (lo, hi) = (g.support_lo(), g.support_hi());
    if p >= g.mean() {
        return hi;
    }
    if p <= lo {
        return lo;
    }
    let tol = Tolerances::default().quad_tol;
    // E[v; v < x] - p P(v < x) is nondecreasing past the crossing
    bisect_increasing(
        |x| {
            let (pe, mass) = below(g, x, tol);
            if mass <= 0.0 {
                return -1.0;
            }
            pe / mass - p
        },
        lo,
        hi,
        ROOT_TOL,
    )
}

/// The seller's profit at price `p` against adversarial persuasion.
pub fn adversarial_profit(g: &Distribution, c0: f64, p: f64) -> f64 {
    (p - c0) * (1.0 - g.cdf_left(adversarial_threshold(g, p)))
}

/// Worst-case persuasion plan for a seller of known cost `c0`.
#[derive(Clone, Debug, Serialize)]
pub struct AdversarialPlan {
    pub c0: f64,
    /// `π̲ = max_{p >= c0} (p - c0)(1 - G(v̂(p)))`.
    pub guaranteed_profit: f64,
    /// Price attaining `π̲` (`c0` when `π̲ = 0`).
    pub maximizing_price: f64,
    /// `p* = c0 + π̲ / (1 - G(c0))`.
    pub star_price: f64,
}

fn check_cost(c0: f64) -> Result<()> {
    if !(0.0..1.0).contains(&c0) {
        return Err(Error::OutOfRange {
            what: "c0",
            value: c0,
            lo: 0.0,
            hi: 1.0,
        });
    }
    Ok(())
}

/// Profit the seller can guarantee: grid scan over `[c0, 1]` then
/// golden-section refinement.
pub fn guaranteed_profit(g: &Distribution, c0: f64) -> Result<AdversarialPlan> {
    check_cost(c0)?;
    let (p, profit) = grid_then_golden(|p| adversarial_profit(g, c0, p), c0, 1.0, PROFIT_GRID, SEARCH_TOL);
    let (p, profit) = if profit > 0.0 { (p, profit) } else { (c0, 0.0) };
    let upper = 1.0 - g.cdf_left(c0);
    let star_price = if upper > 0.0 { c0 + profit / upper } else { c0 };
    Ok(AdversarialPlan {
        c0,
        guaranteed_profit: profit,
        maximizing_price: p,
        star_price,
    })
}

/// Efficient equilibrium when the product (and so `c0`) is known.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct KnownProductOutcome {
    pub p_star: f64,
    pub seller_profit: f64,
    pub buyer_surplus: f64,
    /// `∫_{c0} (v - c0) dG`.
    pub efficient_surplus: f64,
}

pub fn known_product_equilibrium(g: &Distribution, c0: f64) -> Result<KnownProductOutcome> {
    let plan = guaranteed_profit(g, c0)?;
    let tol = Tolerances::default().quad_tol;
    let efficient = g.partial_expectation(|v| v - c0, c0, g.support_hi(), tol);
    Ok(KnownProductOutcome {
        p_star: plan.star_price,
        seller_profit: plan.guaranteed_profit,
        buyer_surplus: efficient - plan.guaranteed_profit,
        efficient_surplus: efficient,
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct IcReport {
    pub holds: bool,
    /// Type with the largest integral (among `c > 0`).
    pub worst_c: f64,
    pub worst_value: f64,
    pub types_checked: usize,
}

fn require_continuous(d: &Distribution, name: &str) -> Result<()> {
    if !d.is_continuous() {
        return Err(Error::DensityUnavailable(format!("{name} must be continuous")));
    }
    Ok(())
}

/// `∫_0^{γ(c)} (v - c) dG(v)`.
pub fn no_purchase_integral(vc: &VirtualCost, g: &Distribution, c: f64) -> f64 {
    let tol = Tolerances::default().quad_tol;
    g.partial_expectation(|v| v - c, g.support_lo(), vc.eval(c).min(g.support_hi()), tol)
}

/// Buyer's gain from buying at the equilibrium price `p` whenever the
/// buyer-optimal algorithm says no: `∫_0^{γ(c)} (v - p) dG(v)`.
pub fn always_buy_gain(vc: &VirtualCost, g: &Distribution, c: f64, p: f64) -> f64 {
    let tol = Tolerances::default().quad_tol;
    g.partial_expectation(|v| v - p, g.support_lo(), vc.eval(c).min(g.support_hi()), tol)
}

/// Whether the uninformed buyer never wants to buy without a recommendation
/// under the buyer-optimal algorithm, on [`IC_GRID`] types in `(0, c̄]`.
pub fn no_purchase_ic_check(f: &Distribution, g: &Distribution) -> Result<IcReport> {
    no_purchase_ic_check_with(f, g, IC_TOL)
}

pub fn no_purchase_ic_check_with(f: &Distribution, g: &Distribution, ic_tol: f64) -> Result<IcReport> {
    require_continuous(f, "cost law")?;
    require_continuous(g, "value law")?;
    let vc = VirtualCost::new(f.clone(), 1.0)?;
    let c_bar = vc.inverse_clamped(g.support_hi());
    let mut report = IcReport {
        holds: true,
        worst_c: f64::NAN,
        worst_value: f64::NEG_INFINITY,
        types_checked: 0,
    };
    // the integral vanishes at c = 0 for every pair
    for c in linspace(0.0, c_bar, IC_GRID + 1).into_iter().skip(1) {
        let value = no_purchase_integral(&vc, g, c);
        report.types_checked += 1;
        if value > report.worst_value {
            report.worst_value = value;
            report.worst_c = c;
        }
    }
    report.holds = report.worst_value <= ic_tol;
    Ok(report)
}
