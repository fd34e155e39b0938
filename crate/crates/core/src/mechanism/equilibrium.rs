use serde::Serialize;

use super::{build_optimal_from, posterior_mean_above, Threshold, ThresholdAlgorithm};
use crate::distributions::Distribution;
use crate::error::{Error, Result};
use crate::numerics::{integrate_with_breaks, linspace};
use crate::screening::{PseudoValue, VirtualCost};

/// Price posted by inactive types; above every value, so never recommended.
pub const INACTIVE_PRICE: f64 = 2.0;
/// Slack allowed in the buyer-obedience check.
pub const OBEDIENCE_SLACK: f64 = 1e-9;

/// Ex-ante welfare split.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Welfare {
    pub buyer_surplus: f64,
    pub seller_profit: f64,
    pub total_surplus: f64,
}

/// Equilibrium of the pricing game under the α-optimal algorithm: type `c`
/// posts `p*(c) = y_α(γ_α(c))` when `c <= c̄ = γ_α⁻¹(v_hi)` and trade occurs
/// iff `v >= γ_α(c)`.
#[derive(Clone, Debug)]
pub struct Equilibrium {
    cost_law: Distribution,
    value_law: Distribution,
    pv: PseudoValue,
    c_bar: f64,
    inactive_price: f64,
}

pub fn solve_equilibrium(
    cost_law: &Distribution,
    value_law: &Distribution,
    alpha: f64,
) -> Result<Equilibrium> {
    let vc = VirtualCost::new(cost_law.clone(), alpha)?;
    Equilibrium::from_virtual_cost(vc, value_law)
}

impl Equilibrium {
    pub fn from_virtual_cost(vc: VirtualCost, value_law: &Distribution) -> Result<Self> {
        if !value_law.is_continuous() {
            return Err(Error::DensityUnavailable(
                "value law must be a continuous law".into(),
            ));
        }
        let cost_law = vc.base().clone();
        let c_bar = vc.inverse_clamped(value_law.support_hi());
        Ok(Self {
            cost_law,
            value_law: value_law.clone(),
            pv: PseudoValue::new(value_law.clone(), vc),
            c_bar,
            inactive_price: INACTIVE_PRICE,
        })
    }

    pub fn cost_law(&self) -> &Distribution {
        &self.cost_law
    }

    pub fn value_law(&self) -> &Distribution {
        &self.value_law
    }

    pub fn virtual_cost(&self) -> &VirtualCost {
        self.pv.virtual_cost()
    }

    pub fn pseudo_value(&self) -> &PseudoValue {
        &self.pv
    }

    pub fn alpha(&self) -> f64 {
        self.virtual_cost().alpha()
    }

    /// Highest active type `c̄`.
    pub fn active_cutoff(&self) -> f64 {
        self.c_bar
    }

    pub fn inactive_price(&self) -> f64 {
        self.inactive_price
    }

    /// The algorithm this equilibrium is played against.
    pub fn algorithm(&self) -> Result<ThresholdAlgorithm> {
        build_optimal_from(self.virtual_cost().clone(), &self.value_law)
    }

    pub fn gamma(&self, c: f64) -> f64 {
        self.virtual_cost().eval(c)
    }

    pub fn is_active(&self, c: f64) -> bool {
        c <= self.c_bar
    }

    /// `p*(c)`, or the inactive price above `c̄`.
    pub fn price(&self, c: f64) -> f64 {
        if !self.is_active(c) {
            return self.inactive_price;
        }
        self.pv.eval_clamped(self.gamma(c))
    }

    /// Allocation rule: trade iff `v >= γ_α(c)`.
    pub fn trades(&self, v: f64, c: f64) -> bool {
        v >= self.gamma(c)
    }

    /// `P(v >= γ_α(c))`.
    pub fn trade_probability(&self, c: f64) -> f64 {
        if !self.is_active(c) {
            return 0.0;
        }
        1.0 - self.value_law.cdf_left(self.gamma(c))
    }

    /// `(p*(c) - c) P(v >= γ_α(c))`.
    pub fn interim_profit(&self, c: f64) -> f64 {
        if !self.is_active(c) {
            return 0.0;
        }
        (self.price(c) - c) * self.trade_probability(c)
    }

    /// Envelope form `∫_c^1 P(v >= γ_α(x)) dx` of the interim profit.
    pub fn envelope_profit(&self, c: f64) -> f64 {
        let mut breaks = self.cost_law.breakpoints();
        breaks.push(self.c_bar);
        let tol = self.virtual_cost().tolerances().quad_tol;
        integrate_with_breaks(|x| self.trade_probability(x), &breaks, c, 1.0, tol)
    }

    fn over_active_costs<H: Fn(f64) -> f64>(&self, h: H, tol: f64) -> f64 {
        self.cost_law.partial_expectation(h, 0.0, self.c_bar, tol)
    }

    /// Buyer surplus, seller profit, and their sum.
    pub fn welfare(&self) -> Welfare {
        let inner_tol = self.virtual_cost().tolerances().quad_tol;
        let v_hi = self.value_law.support_hi();
        let buyer = self.over_active_costs(
            |c| {
                let p = self.price(c);
                self.value_law
                    .partial_expectation(|v| v - p, self.gamma(c), v_hi, inner_tol)
            },
            1e-8,
        );
        let seller = self.over_active_costs(|c| self.interim_profit(c), 1e-8);
        Welfare {
            buyer_surplus: buyer,
            seller_profit: seller,
            total_surplus: buyer + seller,
        }
    }

    /// Gains from trade `E[(v - c) 1{v >= γ_α(c)}]`, computed directly.
    pub fn trade_surplus(&self) -> f64 {
        let inner_tol = self.virtual_cost().tolerances().quad_tol;
        let v_hi = self.value_law.support_hi();
        self.over_active_costs(
            |c| {
                self.value_law
                    .partial_expectation(|v| v - c, self.gamma(c), v_hi, inner_tol)
            },
            1e-8,
        )
    }
}

/// Result of a buyer-obedience scan.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ObedienceReport {
    pub holds: bool,
    pub min_slack: f64,
    pub worst_price: f64,
    pub prices_checked: usize,
}

/// `E[v | v >= threshold(p)] - p` at each price; prices the algorithm
/// rejects are skipped.
pub fn obedience_at_prices(
    algo: &ThresholdAlgorithm,
    value_law: &Distribution,
    prices: &[f64],
) -> ObedienceReport {
    let mut min_slack = f64::INFINITY;
    let mut worst_price = f64::NAN;
    let mut checked = 0;
    for &p in prices {
        let Threshold::Value(t) = algo.threshold(p) else {
            continue;
        };
        checked += 1;
        let slack = posterior_mean_above(value_law, t) - p;
        if slack < min_slack {
            min_slack = slack;
            worst_price = p;
        }
    }
    ObedienceReport {
        holds: min_slack >= -OBEDIENCE_SLACK,
        min_slack,
        worst_price,
        prices_checked: checked,
    }
}

/// Obedience at the equilibrium prices of 200 active types.
pub fn buyer_obedience_check(
    algo: &ThresholdAlgorithm,
    eq: &Equilibrium,
    value_law: &Distribution,
) -> ObedienceReport {
    let prices: Vec<f64> = linspace(0.0, eq.active_cutoff(), 200)
        .into_iter()
        .map(|c| eq.price(c))
        .collect();
    obedience_at_prices(algo, value_law, &prices)
}

/// Largest unilateral deviation gain found by an audit.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct DeviationReport {
    pub max_gain: f64,
    pub worst_cost: f64,
    pub worst_price: f64,
}

/// Compare every type's equilibrium profit with `(p - c) P(v >= threshold(p))`
/// at each deviation price, for `n_costs` types on `[0, 1]` and `n_prices`
/// prices on `[0, p_max]`.
pub fn deviation_audit(
    eq: &Equilibrium,
    algo: &ThresholdAlgorithm,
    n_costs: usize,
    n_prices: usize,
    p_max: f64,
) -> DeviationReport {
    let law = eq.value_law();
    let demand: Vec<(f64, f64)> = linspace(0.0, p_max, n_prices)
        .into_iter()
        .map(|p| (p, algo.threshold(p).demand(law)))
        .collect();
    let mut report = DeviationReport {
        max_gain: f64::NEG_INFINITY,
        worst_cost: f64::NAN,
        worst_price: f64::NAN,
    };
    for c in linspace(0.0, 1.0, n_costs) {
        let base = eq.interim_profit(c);
        for &(p, q) in &demand {
            let gain = (p - c) * q - base;
            if gain > report.max_gain {
                report = DeviationReport {
                    max_gain: gain,
                    worst_cost: c,
                    worst_price: p,
                };
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanism::{build_known_cost_algorithm, build_seller_optimal_algorithm};

    fn uu(alpha: f64) -> Equilibrium {
        let u = Distribution::uniform();
        solve_equilibrium(&u, &u, alpha).unwrap()
    }

    #[test]
    fn uniform_prices_and_cutoff() {
        let eq = uu(1.0);
        assert!((eq.price(0.25) - 0.375).abs() < 1e-12);
        assert!((eq.active_cutoff() - 0.5).abs() < 1e-12);
        assert!(!eq.is_active(0.75));
        assert_eq!(eq.price(0.75), INACTIVE_PRICE);
        assert!((uu(0.5).price(0.0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn interim_profit_examples() {
        let eq = uu(1.0);
        for c in [0.0, 0.25, 0.4] {
            let want = (1.0 - 2.0 * c) * (1.0 - 2.0 * c) / 4.0;
            assert!((eq.interim_profit(c) - want).abs() < 1e-12);
        }
        assert_eq!(eq.interim_profit(1.0), 0.0);
    }

    #[test]
    fn envelope_matches_direct() {
        let f = Distribution::power(2.0).unwrap();
        let g = Distribution::power(1.5).unwrap();
        let eq = solve_equilibrium(&f, &g, 1.0).unwrap();
        for i in 0..50 {
            let c = i as f64 / 49.0;
            assert!((eq.interim_profit(c) - eq.envelope_profit(c)).abs() < 1e-6, "c={c}");
        }
    }

    #[test]
    fn welfare_uniform() {
        let w = uu(1.0).welfare();
        assert!((w.buyer_surplus - 1.0 / 12.0).abs() < 1e-9);
        assert!((w.seller_profit - 1.0 / 24.0).abs() < 1e-9);
        let w = uu(0.5).welfare();
        assert!(w.buyer_surplus.abs() < 1e-9);
        assert!((w.total_surplus - 1.0 / 6.0).abs() < 1e-9);
    }

    #[test]
    fn welfare_accounting_and_alpha_monotonicity() {
        let f = Distribution::power(2.0).unwrap();
        let g = Distribution::uniform();
        let mut prev = f64::INFINITY;
        for k in 5..=10 {
            let eq = solve_equilibrium(&f, &g, k as f64 / 10.0).unwrap();
            let w = eq.welfare();
            assert!((w.total_surplus - eq.trade_surplus()).abs() < 2e-7);
            assert!(w.total_surplus <= prev + 1e-9);
            prev = w.total_surplus;
        }
    }

    #[test]
    fn allocation_identity() {
        let eq = uu(1.0);
        for i in 0..500 {
            for j in 0..500 {
                let (v, c) = (i as f64 / 499.0, j as f64 / 499.0);
                assert_eq!(eq.trades(v, c), v >= 2.0 * c);
            }
        }
    }

    #[test]
    fn no_profitable_deviation() {
        let eq = uu(1.0);
        let algo = eq.algorithm().unwrap();
        let r = deviation_audit(&eq, &algo, 200, 400, 1.1);
        assert!(r.max_gain <= 1e-6, "{r:?}");
    }

    #[test]
    fn obedience_examples() {
        let g = Distribution::uniform();
        let eq = uu(1.0);
        let algo = eq.algorithm().unwrap();
        let r = obedience_at_prices(&algo, &g, &[0.375]);
        assert!((r.min_slack - 0.375).abs() < 1e-9);
        assert!(buyer_obedience_check(&algo, &eq, &g).holds);

        let so = build_seller_optimal_algorithm(&g).unwrap();
        let prices = linspace(0.5, 1.0, 51);
        let r = obedience_at_prices(&so, &g, &prices);
        assert!(r.holds && r.min_slack.abs() < 1e-9, "{r:?}");

        let kc = build_known_cost_algorithm(0.5).unwrap();
        let r = obedience_at_prices(&kc, &g, &[0.5]);
        assert!((r.min_slack - 0.25).abs() < 1e-9);
    }
}
