//! Single-seller recommendation algorithms and the pricing equilibria they
//! induce.
//!
//! An algorithm is summarised by its threshold map: at posted price `p` it
//! recommends the product exactly when the buyer's value is at least
//! `threshold(p)`, and never when the threshold is [`Threshold::Reject`].

mod benchmark;
mod equilibrium;

pub use benchmark::{
    allocation_substitution, known_cost_outcome, monopoly_benchmark, Crossing, KnownCostOutcome,
    Monopoly,
};
pub use equilibrium::{
    buyer_obedience_check, deviation_audit, obedience_at_prices, solve_equilibrium,
    DeviationReport, Equilibrium, ObedienceReport, Welfare, INACTIVE_PRICE,
};

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::distributions::Distribution;
use crate::error::{Error, Result};
use crate::numerics::{bisect_increasing, generalized_inverse, linspace};
use crate::screening::{PseudoValue, VirtualCost};

/// Price tolerance of the known-cost algorithm's single recommended price.
pub const PRICE_ATOL: f64 = 1e-9;
/// Knots in a tabulated threshold cache.
pub const TABLE_KNOTS: usize = 4096;

/// Value cutoff at a given price.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Threshold {
    /// Recommend iff `v >= cutoff`.
    Value(f64),
    /// Never recommend.
    Reject,
}

impl Threshold {
    pub fn recommends(&self, v: f64) -> bool {
        match *self {
            Threshold::Value(t) => v >= t,
            Threshold::Reject => false,
        }
    }

    pub fn is_reject(&self) -> bool {
        matches!(self, Threshold::Reject)
    }

    pub fn value(&self) -> Option<f64> {
        match *self {
            Threshold::Value(t) => Some(t),
            Threshold::Reject => None,
        }
    }

    /// `P(v >= cutoff)` under `law`.
    pub fn demand(&self, law: &Distribution) -> f64 {
        match *self {
            Threshold::Value(t) => 1.0 - law.cdf_left(t),
            Threshold::Reject => 0.0,
        }
    }
}

/// What an algorithm was built to optimise.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum AlgorithmKind {
    BuyerOptimal,
    AlphaOptimal(f64),
    SellerOptimal,
    KnownCost(f64),
    ExPost,
    Custom(String),
}

impl fmt::Display for AlgorithmKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AlgorithmKind::BuyerOptimal => write!(f, "buyer-optimal"),
            AlgorithmKind::AlphaOptimal(a) => write!(f, "alpha-optimal({a})"),
            AlgorithmKind::SellerOptimal => write!(f, "seller-optimal"),
            AlgorithmKind::KnownCost(c) => write!(f, "known-cost({c})"),
            AlgorithmKind::ExPost => write!(f, "ex-post"),
            AlgorithmKind::Custom(name) => write!(f, "custom({name})"),
        }
    }
}

type ThresholdFn = Arc<dyn Fn(f64) -> Threshold + Send + Sync>;

#[derive(Clone)]
enum Rule {
    /// Generalized inverse of the pseudo value between `y_lo` and `y_hi`.
    Pseudo { pv: PseudoValue, y_lo: f64, y_hi: f64 },
    /// Inverse of `E[v | v >= t]` between `E[v]` and `v_hi`.
    Posterior { law: Distribution, mean: f64 },
    KnownCost { c0: f64, atol: f64 },
    ExPost { v_hi: f64 },
    /// Linear interpolation on `[lo, hi]`; `floor` below, reject above.
    Table { lo: f64, hi: f64, floor: f64, knots: Vec<f64> },
    Custom(ThresholdFn),
}

/// A threshold recommendation rule.
#[derive(Clone)]
pub struct ThresholdAlgorithm {
    kind: AlgorithmKind,
    rule: Rule,
    root_tol: f64,
}

impl fmt::Debug for ThresholdAlgorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ThresholdAlgorithm")
            .field("kind", &self.kind)
            .finish_non_exhaustive()
    }
}

impl ThresholdAlgorithm {
    pub fn kind(&self) -> &AlgorithmKind {
        &self.kind
    }

    /// Wrap an arbitrary threshold map.
    pub fn custom<F>(name: &str, f: F) -> Self
    where
        F: Fn(f64) -> Threshold + Send + Sync + 'static,
    {
        Self {
            kind: AlgorithmKind::Custom(name.to_string()),
            rule: Rule::Custom(Arc::new(f)),
            root_tol: 1e-10,
        }
    }

    pub fn threshold(&self, p: f64) -> Threshold {
        match &self.rule {
            Rule::Pseudo { pv, y_lo, y_hi } => {
                if p < *y_lo {
                    Threshold::Value(0.0)
                } else if p > *y_hi {
                    Threshold::Reject
                } else {
                    Threshold::Value(generalized_inverse(
                        |v| pv.eval_clamped(v),
                        p,
                        pv.v_lo(),
                        pv.v_hi(),
                        self.root_tol,
                    ))
                }
            }
            Rule::Posterior { law, mean } => {
                let v_hi = law.support_hi();
                if p <= *mean {
                    Threshold::Value(0.0)
                } else if p > v_hi {
                    Threshold::Reject
                } else {
                    let post = |t: f64| posterior_mean_above(law, t);
                    Threshold::Value(bisect_increasing(
                        |t| post(t) - p,
                        law.support_lo(),
                        v_hi,
                        self.root_tol,
                    ))
                }
            }
            Rule::KnownCost { c0, atol } => {
                if (p - c0).abs() <= *atol {
                    Threshold::Value(*c0)
                } else {
                    Threshold::Reject
                }
            }
            Rule::ExPost { v_hi } => {
                if p > *v_hi {
                    Threshold::Reject
                } else {
                    Threshold::Value(p.max(0.0))
                }
            }
            Rule::Table {
                lo,
                hi,
                floor,
                knots,
            } => {
                if p < *lo {
                    Threshold::Value(*floor)
                } else if p > *hi {
                    Threshold::Reject
                } else {
                    let n = knots.len() - 1;
                    let x = (p - lo) / (hi - lo) * n as f64;
                    let i = (x.floor() as usize).min(n - 1);
                    let t = x - i as f64;
                    Threshold::Value(knots[i] + t * (knots[i + 1] - knots[i]))
                }
            }
            Rule::Custom(f) => f(p),
        }
    }

    /// Whether the algorithm recommends at value `v` and price `p`.
    pub fn recommends(&self, v: f64, p: f64) -> bool {
        self.threshold(p).recommends(v)
    }

    /// Price interval on which the threshold moves, if the rule has one.
    pub fn active_prices(&self) -> Option<(f64, f64)> {
        match &self.rule {
            Rule::Pseudo { y_lo, y_hi, .. } => Some((*y_lo, *y_hi)),
            Rule::Posterior { law, mean } => Some((*mean, law.support_hi())),
            Rule::Table { lo, hi, .. } => Some((*lo, *hi)),
            _ => None,
        }
    }

    /// Replace the threshold on its active price range by linear
    /// interpolation over `knots` points. Rules without an active range are
    /// returned unchanged.
    pub fn tabulated(&self, knots: usize) -> Result<Self> {
        if knots < 2 {
            return Err(Error::InvalidArgument(format!(
                "threshold table needs at least 2 knots, got {knots}"
            )));
        }
        let Some((lo, hi)) = self.active_prices() else {
            return Ok(self.clone());
        };
        if matches!(self.rule, Rule::Table { .. }) || hi <= lo {
            return Ok(self.clone());
        }
        let values = linspace(lo, hi, knots)
            .into_iter()
            .map(|p| self.threshold(p).value().unwrap_or(1.0))
            .collect();
        Ok(Self {
            kind: self.kind.clone(),
            rule: Rule::Table {
                lo,
                hi,
                floor: 0.0,
                knots: values,
            },
            root_tol: self.root_tol,
        })
    }
}

/// `E[v | v >= t]`, with the limit `t` when no mass remains above `t`.
pub fn posterior_mean_above(law: &Distribution, t: f64) -> f64 {
    let t = t.max(law.support_lo());
    law.conditional_expectation(|v| v, t, law.support_hi())
        .unwrap_or(t.min(law.support_hi()))
}

fn continuous(law: &Distribution, what: &str) -> Result<()> {
    if law.is_continuous() {
        Ok(())
    } else {
        Err(Error::DensityUnavailable(format!(
            "{what} must be a continuous law"
        )))
    }
}

/// Buyer-optimal (α = 1) or α-optimal algorithm: recommend iff
/// `y_α(v) >= p`.
pub fn build_optimal_algorithm(
    cost_law: &Distribution,
    value_law: &Distribution,
    alpha: f64,
) -> Result<ThresholdAlgorithm> {
    let vc = VirtualCost::new(cost_law.clone(), alpha)?;
    build_optimal_from(vc, value_law)
}

/// As [`build_optimal_algorithm`] for an existing (possibly ironed) virtual
/// cost.
pub fn build_optimal_from(vc: VirtualCost, value_law: &Distribution) -> Result<ThresholdAlgorithm> {
    continuous(value_law, "value law")?;
    let alpha = vc.alpha();
    let root_tol = vc.tolerances().root_tol;
    let pv = PseudoValue::new(value_law.clone(), vc);
    let y_lo = pv.eval(pv.v_lo())?;
    let y_hi = pv.eval(pv.v_hi())?;
    let kind = if alpha == 1.0 {
        AlgorithmKind::BuyerOptimal
    } else {
        AlgorithmKind::AlphaOptimal(alpha)
    };
    Ok(ThresholdAlgorithm {
        kind,
        rule: Rule::Pseudo { pv, y_lo, y_hi },
        root_tol,
    })
}

/// Seller-optimal algorithm: at price `p` the threshold makes the buyer
/// exactly indifferent, `E[v | v >= v̂(p)] = p`.
pub fn build_seller_optimal_algorithm(value_law: &Distribution) -> Result<ThresholdAlgorithm> {
    continuous(value_law, "value law")?;
    Ok(ThresholdAlgorithm {
        kind: AlgorithmKind::SellerOptimal,
        rule: Rule::Posterior {
            law: value_law.clone(),
            mean: value_law.mean(),
        },
        root_tol: 1e-10,
    })
}

/// Algorithm that recommends only at price `c0` (and then iff `v >= c0`).
pub fn build_known_cost_algorithm(c0: f64) -> Result<ThresholdAlgorithm> {
    build_known_cost_algorithm_with(c0, PRICE_ATOL)
}

pub fn build_known_cost_algorithm_with(c0: f64, atol: f64) -> Result<ThresholdAlgorithm> {
    if !(0.0..1.0).contains(&c0) {
        return Err(Error::OutOfRange {
            what: "known cost",
            value: c0,
            lo: 0.0,
            hi: 1.0,
        });
    }
    Ok(ThresholdAlgorithm {
        kind: AlgorithmKind::KnownCost(c0),
        rule: Rule::KnownCost { c0, atol },
        root_tol: 1e-10,
    })
}

/// Ex-post optimal algorithm: recommend iff `v >= p`.
pub fn build_ex_post_algorithm(value_law: &Distribution) -> ThresholdAlgorithm {
    ThresholdAlgorithm {
        kind: AlgorithmKind::ExPost,
        rule: Rule::ExPost {
            v_hi: value_law.support_hi(),
        },
        root_tol: 1e-10,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uu() -> ThresholdAlgorithm {
        let u = Distribution::uniform();
        build_optimal_algorithm(&u, &u, 1.0).unwrap()
    }

    fn cutoff(t: Threshold) -> f64 {
        t.value().expect("expected a value threshold")
    }

    #[test]
    fn buyer_optimal_uniform_thresholds() {
        let a = uu();
        assert_eq!(a.kind(), &AlgorithmKind::BuyerOptimal);
        assert!((cutoff(a.threshold(0.3)) - 0.2).abs() < 1e-9);
        assert_eq!(a.threshold(0.2), Threshold::Value(0.0));
        assert_eq!(a.threshold(0.6), Threshold::Reject);
        // 4p - 1 on the active range
        for p in [0.25, 0.3, 0.4, 0.45, 0.5] {
            assert!((cutoff(a.threshold(p)) - (4.0 * p - 1.0)).abs() < 1e-9);
        }
    }

    #[test]
    fn alpha_kind_is_tagged() {
        let u = Distribution::uniform();
        let a = build_optimal_algorithm(&u, &u, 0.7).unwrap();
        assert_eq!(a.kind(), &AlgorithmKind::AlphaOptimal(0.7));
        assert_eq!(a.kind().to_string(), "alpha-optimal(0.7)");
    }

    #[test]
    fn grid_value_law_rejected() {
        let g = Distribution::grid(vec![(0.5, 1.0)]).unwrap();
        assert!(build_optimal_algorithm(&Distribution::uniform(), &g, 1.0).is_err());
    }

    #[test]
    fn seller_optimal_thresholds() {
        let a = build_seller_optimal_algorithm(&Distribution::uniform()).unwrap();
        assert!((cutoff(a.threshold(0.75)) - 0.5).abs() < 1e-9);
        assert!(cutoff(a.threshold(0.5)).abs() < 1e-12);
        assert_eq!(a.threshold(0.4), Threshold::Value(0.0));
        assert_eq!(a.threshold(1.2), Threshold::Reject);
    }

    #[test]
    fn known_cost_thresholds() {
        let a = build_known_cost_algorithm(0.5).unwrap();
        assert_eq!(a.threshold(0.5), Threshold::Value(0.5));
        assert_eq!(a.threshold(0.51), Threshold::Reject);
        assert_eq!(a.threshold(0.5 + 5e-10), Threshold::Value(0.5));
        let z = build_known_cost_algorithm(0.0).unwrap();
        assert_eq!(z.threshold(0.0), Threshold::Value(0.0));
        assert!(build_known_cost_algorithm(1.0).is_err());
    }

    #[test]
    fn ex_post_threshold_is_price() {
        let a = build_ex_post_algorithm(&Distribution::uniform());
        assert_eq!(a.threshold(0.4), Threshold::Value(0.4));
        assert_eq!(a.threshold(1.5), Threshold::Reject);
    }

    #[test]
    fn table_cache_within_budget() {
        let a = uu();
        let t = a.tabulated(TABLE_KNOTS).unwrap();
        for i in 0..=1000 {
            let p = 0.6 * i as f64 / 1000.0;
            match (a.threshold(p), t.threshold(p)) {
                (Threshold::Value(x), Threshold::Value(y)) => assert!((x - y).abs() < 1e-7),
                (Threshold::Reject, Threshold::Reject) => {}
                other => panic!("mismatch at {p}: {other:?}"),
            }
        }
    }

    #[test]
    fn custom_rule() {
        let a = ThresholdAlgorithm::custom("half", |_| Threshold::Value(0.5));
        assert!(a.recommends(0.6, 0.1));
        assert!(!a.recommends(0.4, 0.1));
    }
}
