//! Several sellers, one buyer, one recommender.
//!
//! Seller `j`'s pricing depends on the market only through
//! `θ_j = v_j - max(0, max_{k≠j} (v_k - γ_k(c_k)))`, its value minus the best
//! competing virtual surplus (the outside option contributes 0). The
//! equilibrium schedule `p*_j(c) = E[γ_j⁻¹(θ_j) | θ_j >= γ_j(c)]` is
//! estimated by Monte Carlo in batches on independent random streams.

mod checks;
mod config;
mod schedule;
mod sim;

pub use checks::{
    competitive_mps_check, competitive_neutrality_check, CompetitiveMpsReport,
    CompetitiveNeutralityReport, CurveGap,
};
pub use config::{parse_value_sampler, MarketConfig, SellerConfig};
pub use schedule::{
    estimate_price_schedule, estimate_price_schedules, CellSchedule, PriceSchedule,
    RevealedSchedule, SellerSchedule, DEFAULT_BATCHES, DEFAULT_COST_KNOTS, DEFAULT_SAMPLES,
    MIN_SAMPLES, THIN_RATE,
};
pub use sim::{
    simulate, type_curves, verify_best_response, BestResponseReport, CompetitiveEquilibrium,
    SimulationReport, TypeCurves,
};

use std::fmt;
use std::sync::Arc;

use crate::distributions::{Distribution, RngStream};
use crate::error::{Error, Result};
use crate::screening::VirtualCost;
use crate::segmentation::Segmentation;

type CustomSampler = Arc<dyn Fn(&mut RngStream, &mut [f64]) + Send + Sync>;

/// Source of value profiles `(v_1, …, v_J)`.
#[derive(Clone)]
pub enum ValueSampler {
    /// Independent draws from one law.
    Iid(Distribution),
    /// Uniformly chosen rows of a table of pre-drawn profiles.
    Table(Arc<Vec<Vec<f64>>>),
    /// Arbitrary (possibly correlated) sampler filling the profile slice.
    Custom(CustomSampler),
}

impl fmt::Debug for ValueSampler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValueSampler::Iid(d) => f.debug_tuple("Iid").field(d).finish(),
            ValueSampler::Table(t) => write!(f, "Table({} rows)", t.len()),
            ValueSampler::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl ValueSampler {
    pub fn draw(&self, rng: &mut RngStream, out: &mut [f64]) {
        match self {
            ValueSampler::Iid(d) => out.iter_mut().for_each(|v| *v = d.sample(rng)),
            ValueSampler::Table(rows) => {
                let i = ((rng.uniform() * rows.len() as f64) as usize).min(rows.len() - 1);
                out.copy_from_slice(&rows[i]);
            }
            ValueSampler::Custom(f) => f(rng, out),
        }
    }

    /// Whether values are independent across sellers (needed to price a
    /// revealed own value from the marginal of competing surplus).
    pub fn is_iid(&self) -> bool {
        matches!(self, ValueSampler::Iid(_))
    }
}

/// One seller: its virtual cost (buyer-optimal weight) and the signal it
/// receives about its own value.
#[derive(Clone, Debug)]
pub struct Seller {
    pub vc: VirtualCost,
    pub signal: Segmentation,
}

/// A market with `J >= 1` sellers. Sellers are numbered `1..=J`; index 0 is
/// the outside option.
#[derive(Clone, Debug)]
pub struct MultiMarket {
    sellers: Vec<Seller>,
    values: ValueSampler,
}

impl MultiMarket {
    pub fn new(cost_laws: Vec<Distribution>, values: ValueSampler) -> Result<Self> {
        if cost_laws.is_empty() {
            return Err(Error::InvalidArgument("need at least one seller".into()));
        }
        let sellers = cost_laws
            .into_iter()
            .map(|f| {
                Ok(Seller {
                    vc: VirtualCost::new(f, 1.0)?,
                    signal: Segmentation::none(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let market = Self { sellers, values };
        market.check_table_width()?;
        Ok(market)
    }

    fn check_table_width(&self) -> Result<()> {
        if let ValueSampler::Table(rows) = &self.values {
            if rows.is_empty() {
                return Err(Error::InvalidArgument("value table is empty".into()));
            }
            if let Some(r) = rows.iter().find(|r| r.len() != self.sellers.len()) {
                return Err(Error::InvalidArgument(format!(
                    "value table row has {} entries for {} sellers",
                    r.len(),
                    self.sellers.len()
                )));
            }
        }
        Ok(())
    }

    /// Replace every seller's own-value signal.
    pub fn with_signals(mut self, signals: Vec<Segmentation>) -> Result<Self> {
        if signals.len() != self.sellers.len() {
            return Err(Error::InvalidArgument(format!(
                "{} signals for {} sellers",
                signals.len(),
                self.sellers.len()
            )));
        }
        for (s, sig) in self.sellers.iter_mut().zip(signals) {
            s.signal = sig;
        }
        Ok(self)
    }

    /// Replace seller `j`'s signal.
    pub fn with_signal(mut self, j: usize, signal: Segmentation) -> Result<Self> {
        self.check_seller(j)?;
        self.sellers[j - 1].signal = signal;
        Ok(self)
    }

    pub fn n_sellers(&self) -> usize {
        self.sellers.len()
    }

    pub fn seller(&self, j: usize) -> &Seller {
        &self.sellers[j - 1]
    }

    pub fn sellers(&self) -> &[Seller] {
        &self.sellers
    }

    pub fn values(&self) -> &ValueSampler {
        &self.values
    }

    pub(crate) fn check_seller(&self, j: usize) -> Result<()> {
        if j == 0 || j > self.sellers.len() {
            return Err(Error::InvalidArgument(format!(
                "seller index {j} outside 1..={}",
                self.sellers.len()
            )));
        }
        Ok(())
    }

    /// `γ_j(c)`; the outside option has `γ_0 ≡ 0`.
    pub fn gamma(&self, j: usize, c: f64) -> f64 {
        if j == 0 {
            0.0
        } else {
            self.sellers[j - 1].vc.eval(c)
        }
    }

    /// Draw a value profile and a cost profile.
    pub fn draw_profile(&self, rng: &mut RngStream, values: &mut [f64], costs: &mut [f64]) {
        self.values.draw(rng, values);
        for (c, s) in costs.iter_mut().zip(&self.sellers) {
            *c = s.vc.base().sample(rng);
        }
    }

    /// `θ_j` for seller `j` given full profiles; `costs[j-1]` is ignored.
    pub fn theta(&self, j: usize, values: &[f64], costs: &[f64]) -> f64 {
        values[j - 1] - competing_surplus(self, j, values, costs)
    }
}

/// `max(0, max_{k≠j} (v_k - γ_k(c_k)))`.
pub(crate) fn competing_surplus(market: &MultiMarket, j: usize, values: &[f64], costs: &[f64]) -> f64 {
    let mut m = 0.0f64;
    for (k, s) in market.sellers.iter().enumerate() {
        if k + 1 != j {
            m = m.max(values[k] - s.vc.eval(costs[k]));
        }
    }
    m
}

/// `θ_j = v_j - max_{k ∈ {0..J} \ {j}} (v_k - γ_k(c_k))`.
pub fn theta(market: &MultiMarket, j: usize, values: &[f64], costs: &[f64]) -> Result<f64> {
    market.check_seller(j)?;
    if values.len() != market.n_sellers() || costs.len() != market.n_sellers() {
        return Err(Error::InvalidArgument("profile length differs from seller count".into()));
    }
    Ok(market.theta(j, values, costs))
}
