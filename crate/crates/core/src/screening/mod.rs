//! Virtual costs `γ_α(c) = c + max{(2α-1)/α, 0} F(c)/f(c)`, their ironing
//! and generalized inverses, and pseudo values
//! `y_α(v) = E[γ_α⁻¹(ṽ) | v <= ṽ <= cap]`.

mod ironing;
mod pseudo;

pub use pseudo::PseudoValue;

use std::sync::Arc;

use crate::distributions::{Distribution, DistributionKind, Tolerances};
use crate::error::{Error, Result};
use crate::numerics::generalized_inverse;

use ironing::IronedTable;

/// Grid used to detect a non-monotone raw virtual cost.
pub const MONOTONICITY_SCAN: usize = 10_000;
/// Decrease on the scan grid that triggers ironing.
pub const MONOTONICITY_SLACK: f64 = 1e-9;
/// Default resolution of the ironing quantile grid.
pub const DEFAULT_IRONING_GRID: usize = 100_000;

/// Weight on the information rent `F/f` for Pareto weight `alpha`.
pub fn rent_weight(alpha: f64) -> f64 {
    if alpha <= 0.5 {
        0.0
    } else {
        (2.0 * alpha - 1.0) / alpha
    }
}

/// The (α-)virtual cost of a cost law, optionally ironed.
#[derive(Clone, Debug)]
pub struct VirtualCost {
    base: Distribution,
    alpha: f64,
    weight: f64,
    ironed: Option<Arc<IronedTable>>,
    tol: Tolerances,
}

impl VirtualCost {
    /// Build `γ_α` for cost law `base`. Irons automatically when the raw map
    /// decreases anywhere on a 10⁴-point scan.
    pub fn new(base: Distribution, alpha: f64) -> Result<Self> {
        Self::with_tolerances(base, alpha, Tolerances::default())
    }

    pub fn with_tolerances(base: Distribution, alpha: f64, tol: Tolerances) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::OutOfRange {
                what: "alpha",
                value: alpha,
                lo: 0.0,
                hi: 1.0,
            });
        }
        match base.kind() {
            DistributionKind::Grid { .. } => {
                return Err(Error::DensityUnavailable(
                    "virtual cost needs a continuous cost law, got grid".into(),
                ))
            }
            DistributionKind::PiecewiseLinear { knots } => {
                if let Some(w) = knots.windows(2).find(|w| w[1].1 <= w[0].1) {
                    return Err(Error::DensityUnavailable(format!(
                        "pwl cost law has zero density on [{}, {}]",
                        w[0].0, w[1].0
                    )));
                }
            }
            _ => {}
        }
        let vc = Self {
            base,
            alpha,
            weight: rent_weight(alpha),
            ironed: None,
            tol,
        };
        if vc.max_decrease(MONOTONICITY_SCAN) > MONOTONICITY_SLACK {
            vc.iron(DEFAULT_IRONING_GRID)
        } else {
            Ok(vc)
        }
    }

    pub fn base(&self) -> &Distribution {
        &self.base
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn tolerances(&self) -> &Tolerances {
        &self.tol
    }

    pub fn is_ironed(&self) -> bool {
        self.ironed.is_some()
    }

    /// Slope `k` when `γ(c) = k c` exactly (uniform and power laws, unironed).
    pub fn linear_slope(&self) -> Option<f64> {
        if self.ironed.is_some() {
            return None;
        }
        match self.base.kind() {
            DistributionKind::Uniform => Some(1.0 + self.weight),
            DistributionKind::Power { exponent } => Some(1.0 + self.weight / exponent),
            _ => None,
        }
    }

    /// The raw (un-ironed) map.
    pub fn raw(&self, c: f64) -> f64 {
        let c = c.clamp(0.0, 1.0);
        if self.weight == 0.0 {
            return c;
        }
        let ratio = match self.base.kind() {
            DistributionKind::Uniform => c,
            DistributionKind::Power { exponent } => c / exponent,
            _ => {
                let f = self.base.cdf(c);
                if f == 0.0 {
                    0.0
                } else {
                    f / self.base.pdf(c).unwrap_or(f64::NAN)
                }
            }
        };
        c + self.weight * ratio
    }

    /// `γ_α(c)`, using the ironed table when present.
    pub fn eval(&self, c: f64) -> f64 {
        match &self.ironed {
            Some(table) => {
                let c = c.clamp(0.0, 1.0);
                table.eval(self.base.cdf(c), || self.raw(c))
            }
            None => self.raw(c),
        }
    }

    /// Cost intervals on which ironing replaced the raw map by a constant.
    pub fn ironed_intervals(&self) -> Vec<(f64, f64)> {
        let Some(table) = &self.ironed else {
            return Vec::new();
        };
        table
            .flat_runs()
            .into_iter()
            .map(|(a, b)| {
                let lo = self.base.quantile(a).unwrap_or(0.0);
                let hi = self.base.quantile(b).unwrap_or(1.0);
                (lo, hi)
            })
            .collect()
    }

    /// `γ_α(1)`, the top of the range.
    pub fn top(&self) -> f64 {
        self.eval(1.0)
    }

    /// Largest drop `γ(x_i) - γ(x_{i+1})` over an `n`-point grid.
    pub fn max_decrease(&self, n: usize) -> f64 {
        let mut worst = 0.0f64;
        let mut prev = self.eval(0.0);
        for i in 1..=n {
            let cur = self.eval(i as f64 / n as f64);
            worst = worst.max(prev - cur);
            prev = cur;
        }
        worst
    }

    /// Myerson ironing on a uniform quantile grid of `grid_size` cells.
    pub fn iron(&self, grid_size: usize) -> Result<Self> {
        if grid_size < 100 {
            return Err(Error::InvalidArgument(format!(
                "ironing grid needs at least 100 cells, got {grid_size}"
            )));
        }
        let raw = |q: f64| -> f64 {
            let c = self.base.quantile(q.clamp(0.0, 1.0)).unwrap_or(1.0);
            self.raw(c)
        };
        let table = IronedTable::build(raw, grid_size);
        Ok(Self {
            ironed: Some(Arc::new(table)),
            ..self.clone()
        })
    }

    /// Left-continuous generalized inverse `inf { c : γ_α(c) >= y }`.
    pub fn inverse(&self, y: f64) -> Result<f64> {
        let top = self.top();
        if y < 0.0 || y > top || y.is_nan() {
            return Err(Error::OutOfRange {
                what: "virtual cost level",
                value: y,
                lo: 0.0,
                hi: top,
            });
        }
        Ok(self.inverse_clamped(y))
    }

    /// Generalized inverse clamped to `[0, 1]`: 0 below the range, 1 above.
    pub fn inverse_clamped(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return 0.0;
        }
        if let Some(k) = self.linear_slope() {
            return (y / k).min(1.0);
        }
        generalized_inverse(|c| self.eval(c), y, 0.0, 1.0, self.tol.root_tol)
    }
}
