use rayon::prelude::*;
use serde::Serialize;

use super::order::{mps_check, MpsReport, StepLaw, MEAN_TOL, SOS_TOL};
use super::{CellMode, Segmentation};
use crate::distributions::{Distribution, Tolerances};
use crate::error::{Error, Result};
use crate::mechanism::Threshold;
use crate::numerics::{generalized_inverse, linspace};
use crate::screening::{PseudoValue, VirtualCost};

/// Knots of the global value grid used to discretise continuous price and
/// surplus laws. Shared by every segmentation so nested ones split values
/// the same way.
pub const LAW_KNOTS: usize = 2048;
/// Default tolerance of the analytic neutrality comparison.
pub const NEUTRALITY_TOL: f64 = 1e-6;

/// Per-cell totals at one cost type.
#[derive(Clone, Copy, Debug, Default)]
struct CellTotals {
    mass: f64,
    /// `∫ price dG` over trading values.
    revenue: f64,
    /// `∫ (v - price) dG` over trading values.
    buyer: f64,
}

/// Equilibrium of a market whose seller observes a segment of the buyer's
/// value before pricing, with the algorithm re-optimised segment by segment.
#[derive(Clone, Debug)]
pub struct SegmentedMarket {
    seg: Segmentation,
    vc: VirtualCost,
    value_law: Distribution,
    /// Pseudo value capped at each cell's upper end.
    capped: Vec<PseudoValue>,
    c_bar: f64,
    tol: Tolerances,
}

impl SegmentedMarket {
    pub fn new(
        cost_law: &Distribution,
        value_law: &Distribution,
        alpha: f64,
        seg: Segmentation,
    ) -> Result<Self> {
        let vc = VirtualCost::new(cost_law.clone(), alpha)?;
        Self::from_virtual_cost(vc, value_law, seg)
    }

    pub fn from_virtual_cost(vc: VirtualCost, value_law: &Distribution, seg: Segmentation) -> Result<Self> {
        if !value_law.is_continuous() {
            return Err(Error::DensityUnavailable(
                "value law must be a continuous law".into(),
            ));
        }
        let tol = *vc.tolerances();
        let base = PseudoValue::new(value_law.clone(), vc.clone());
        let capped = (0..seg.n_cells())
            .map(|k| base.clone().with_cap(seg.cell(k).1))
            .collect();
        let c_bar = vc.inverse_clamped(value_law.support_hi());
        Ok(Self {
            seg,
            vc,
            value_law: value_law.clone(),
            capped,
            c_bar,
            tol,
        })
    }

    pub fn segmentation(&self) -> &Segmentation {
        &self.seg
    }

    pub fn virtual_cost(&self) -> &VirtualCost {
        &self.vc
    }

    pub fn value_law(&self) -> &Distribution {
        &self.value_law
    }

    pub fn cost_law(&self) -> &Distribution {
        self.vc.base()
    }

    pub fn active_cutoff(&self) -> f64 {
        self.c_bar
    }

    fn gamma(&self, c: f64) -> f64 {
        self.vc.eval(c)
    }

    /// Price of type `c` in pooled cell `k`, `None` when the cell has no
    /// trading values.
    fn pooled_price(&self, k: usize, g: f64) -> Result<Option<f64>> {
        let (lo, hi, _) = self.seg.cell(k);
        if g > hi {
            return Ok(None);
        }
        self.capped[k].eval(g.max(lo)).map(Some)
    }

    /// Price posted by type `c` when the buyer's value is `v`; `None` is the
    /// inactive price.
    pub fn segmented_price(&self, c: f64, v: f64) -> Result<Option<f64>> {
        let k = self.seg.cell_index(v);
        let g = self.gamma(c);
        match self.seg.modes[k] {
            CellMode::Pooled => self.pooled_price(k, g),
            CellMode::Revealed => Ok((g <= v).then(|| self.vc.inverse_clamped(v))),
        }
    }

    /// Buyer surplus `w(v, c)`.
    pub fn surplus_at(&self, v: f64, c: f64) -> Result<f64> {
        if v < self.gamma(c) {
            return Ok(0.0);
        }
        Ok(match self.segmented_price(c, v)? {
            Some(p) => v - p,
            None => 0.0,
        })
    }

    /// Whether the segment's algorithm recommends at value `v` given type
    /// `c`'s equilibrium price: `y_s(v) >= p`.
    pub fn recommends(&self, v: f64, c: f64) -> Result<bool> {
        let Some(p) = self.segmented_price(c, v)? else {
            return Ok(false);
        };
        let k = self.seg.cell_index(v);
        let y = match self.seg.modes[k] {
            CellMode::Pooled => self.capped[k].eval(v.max(self.seg.cell(k).0))?,
            CellMode::Revealed => self.vc.inverse_clamped(v),
        };
        Ok(y >= p)
    }

    /// Threshold of the algorithm used in cell `k` at price `p`. Below the
    /// cell's lowest pseudo value the whole cell is recommended.
    pub fn cell_threshold(&self, k: usize, p: f64) -> Result<Threshold> {
        if k >= self.seg.n_cells() {
            return Err(Error::InvalidCell(k));
        }
        let (lo, hi, mode) = self.seg.cell(k);
        let y = |v: f64| -> f64 {
            match mode {
                CellMode::Pooled => self.capped[k].eval_clamped(v),
                CellMode::Revealed => self.vc.inverse_clamped(v),
            }
        };
        let hi = hi.min(self.value_law.support_hi());
        if p > y(hi) {
            return Ok(Threshold::Reject);
        }
        if p <= y(lo) {
            return Ok(Threshold::Value(lo));
        }
        Ok(Threshold::Value(generalized_inverse(
            y,
            p,
            lo,
            hi,
            self.tol.root_tol,
        )))
    }

    fn cell_totals(&self, k: usize, g: f64) -> Result<CellTotals> {
        let (lo, hi, mode) = self.seg.cell(k);
        if g > hi {
            return Ok(CellTotals::default());
        }
        let t = g.max(lo);
        let mass = self.value_law.mass(t, hi);
        if mass <= self.tol.mass_floor {
            return Ok(CellTotals::default());
        }
        let q = self.tol.quad_tol;
        let value = self.value_law.partial_expectation(|v| v, t, hi, q);
        let revenue = match mode {
            CellMode::Pooled => self.capped[k].eval(t)? * mass,
            CellMode::Revealed => {
                self.value_law
                    .partial_expectation(|v| self.vc.inverse_clamped(v), t, hi, q)
            }
        };
        Ok(CellTotals {
            mass,
            revenue,
            buyer: value - revenue,
        })
    }

    fn totals(&self, c: f64) -> Result<CellTotals> {
        let g = self.gamma(c);
        let mut acc = CellTotals::default();
        for k in 0..self.seg.n_cells() {
            let t = self.cell_totals(k, g)?;
            acc.mass += t.mass;
            acc.revenue += t.revenue;
            acc.buyer += t.buyer;
        }
        Ok(acc)
    }

    /// Trade probability of type `c`.
    pub fn trade_probability(&self, c: f64) -> Result<f64> {
        Ok(self.totals(c)?.mass)
    }

    /// Price of type `c` averaged over the segments in which it trades.
    pub fn expected_price(&self, c: f64) -> Result<Option<f64>> {
        let t = self.totals(c)?;
        Ok((t.mass > self.tol.mass_floor).then(|| t.revenue / t.mass))
    }

    /// Interim profit of type `c`.
    pub fn profit(&self, c: f64) -> Result<f64> {
        let t = self.totals(c)?;
        Ok(t.revenue - c * t.mass)
    }

    /// Cost types at which `γ(c)` crosses a breakpoint, plus the ends.
    fn cost_breaks(&self, upto: f64) -> Vec<f64> {
        let mut out = vec![0.0];
        for &b in self.seg.breakpoints() {
            let x = self.vc.inverse_clamped(b);
            if x > 0.0 && x < upto {
                out.push(x);
            }
        }
        out.push(upto);
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    /// `∫ h dF` over `[0, upto]`, split where `γ` crosses a breakpoint.
    fn integrate_costs<H: Fn(f64) -> f64>(&self, h: H, upto: f64) -> f64 {
        let breaks = self.cost_breaks(upto);
        breaks
            .windows(2)
            .map(|w| self.cost_law().partial_expectation(&h, w[0], w[1], 1e-10))
            .sum()
    }

    /// Ex-ante buyer surplus `E_{v,c}[w(v, c)]`.
    pub fn buyer_surplus(&self) -> Result<f64> {
        // quadrature closures cannot propagate errors; surface the first one
        let err = std::sync::Mutex::new(None);
        let s = self.integrate_costs(
            |c| match self.totals(c) {
                Ok(t) => t.buyer,
                Err(e) => {
                    err.lock().unwrap().get_or_insert(e);
                    0.0
                }
            },
            self.c_bar,
        );
        match err.into_inner().unwrap() {
            Some(e) => Err(e),
            None => Ok(s),
        }
    }

    /// Ex-ante seller profit.
    pub fn seller_profit(&self) -> Result<f64> {
        let err = std::sync::Mutex::new(None);
        let s = self.integrate_costs(
            |c| match self.profit(c) {
                Ok(p) => p,
                Err(e) => {
                    err.lock().unwrap().get_or_insert(e);
                    0.0
                }
            },
            self.c_bar,
        );
        match err.into_inner().unwrap() {
            Some(e) => Err(e),
            None => Ok(s),
        }
    }

    /// `E_c[w(v, c)]`, the buyer's surplus at value `v` averaged over costs.
    pub fn expected_surplus_at_value(&self, v: f64) -> Result<f64> {
        let upto = self.vc.inverse_clamped(v).min(self.c_bar);
        let err = std::sync::Mutex::new(None);
        let s = self.integrate_costs(
            |c| match self.surplus_at(v, c) {
                Ok(w) => w,
                Err(e) => {
                    err.lock().unwrap().get_or_insert(e);
                    0.0
                }
            },
            upto,
        );
        match err.into_inner().unwrap() {
            Some(e) => Err(e),
            None => Ok(s),
        }
    }

    /// Sub-intervals of `[t, hi]` cut at the global law grid.
    fn pieces(t: f64, hi: f64) -> Vec<(f64, f64)> {
        let mut knots = vec![t];
        let first = (t * LAW_KNOTS as f64).floor() as usize + 1;
        for j in first..LAW_KNOTS {
            let x = j as f64 / LAW_KNOTS as f64;
            if x >= hi {
                break;
            }
            knots.push(x);
        }
        knots.push(hi);
        knots.windows(2).filter(|w| w[1] > w[0]).map(|w| (w[0], w[1])).collect()
    }

    /// Law of the price type `c` posts, conditional on trade; `None` when
    /// the type is inactive. Continuous parts are discretised into
    /// conditional-mean atoms on the global grid.
    pub fn price_law(&self, c: f64) -> Result<Option<StepLaw>> {
        let g = self.gamma(c);
        let q = self.tol.quad_tol;
        let mut atoms = Vec::new();
        for k in 0..self.seg.n_cells() {
            let (lo, hi, mode) = self.seg.cell(k);
            if g > hi {
                continue;
            }
            let t = g.max(lo);
            match mode {
                CellMode::Pooled => {
                    let m = self.value_law.mass(t, hi);
                    if m > self.tol.mass_floor {
                        atoms.push((self.capped[k].eval(t)?, m));
                    }
                }
                CellMode::Revealed => {
                    for (a, b) in Self::pieces(t, hi) {
                        let m = self.value_law.mass(a, b);
                        if m > self.tol.mass_floor {
                            let s = self
                                .value_law
                                .partial_expectation(|v| self.vc.inverse_clamped(v), a, b, q * m);
                            atoms.push((s / m, m));
                        }
                    }
                }
            }
        }
        if atoms.is_empty() {
            return Ok(None);
        }
        StepLaw::new(atoms).map(Some)
    }

    /// Law of `w(v, c)` over `v ~ G` at fixed `c`, including the no-trade
    /// atom at 0.
    pub fn surplus_law(&self, c: f64) -> Result<StepLaw> {
        let g = self.gamma(c);
        let q = self.tol.quad_tol;
        let mut atoms = Vec::new();
        let mut traded = 0.0;
        for k in 0..self.seg.n_cells() {
            let (lo, hi, mode) = self.seg.cell(k);
            if g > hi {
                continue;
            }
            let t = g.max(lo);
            let price = match mode {
                CellMode::Pooled => {
                    if self.value_law.mass(t, hi) <= self.tol.mass_floor {
                        continue;
                    }
                    Some(self.capped[k].eval(t)?)
                }
                CellMode::Revealed => None,
            };
            for (a, b) in Self::pieces(t, hi) {
                let m = self.value_law.mass(a, b);
                if m <= self.tol.mass_floor {
                    continue;
                }
                let s = match price {
                    Some(p) => self.value_law.partial_expectation(|v| v - p, a, b, q * m),
                    None => self
                        .value_law
                        .partial_expectation(|v| v - self.vc.inverse_clamped(v), a, b, q * m),
                };
                atoms.push((s / m, m));
                traded += m;
            }
        }
        atoms.push((0.0, (1.0 - traded).max(0.0)));
        StepLaw::new(atoms)
    }

    /// Profit, expected price and buyer surplus on `n` equally spaced types.
    pub fn aggregate(&self, n: usize) -> Result<SegmentedOutcome> {
        let costs = linspace(0.0, 1.0, n);
        let rows: Vec<(f64, Option<f64>)> = costs
            .par_iter()
            .map(|&c| {
                let t = self.totals(c)?;
                let price = (t.mass > self.tol.mass_floor).then(|| t.revenue / t.mass);
                Ok((t.revenue - c * t.mass, price))
            })
            .collect::<Result<_>>()?;
        Ok(SegmentedOutcome {
            profit: rows.iter().map(|r| r.0).collect(),
            expected_price: rows.iter().map(|r| r.1).collect(),
            costs,
            buyer_surplus: self.buyer_surplus()?,
        })
    }
}

/// Aggregates of a segmented equilibrium on a cost grid.
#[derive(Clone, Debug, Serialize)]
pub struct SegmentedOutcome {
    pub costs: Vec<f64>,
    pub expected_price: Vec<Option<f64>>,
    pub profit: Vec<f64>,
    pub buyer_surplus: f64,
}

/// Comparison of two segmented equilibria.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct NeutralityReport {
    pub pass: bool,
    pub profit_gap: f64,
    pub price_gap: f64,
    pub surplus_gap: f64,
    pub allocation_mismatches: usize,
}

/// Compare profit on a 100-point cost grid, expected prices where both are
/// active, ex-ante buyer surplus, and the recommendation outcome on a
/// 100×100 `(v, c)` grid.
pub fn neutrality_check(a: &SegmentedMarket, b: &SegmentedMarket, tol: f64) -> Result<NeutralityReport> {
    let oa = a.aggregate(100)?;
    let ob = b.aggregate(100)?;
    let profit_gap = oa
        .profit
        .iter()
        .zip(&ob.profit)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    let price_gap = oa
        .expected_price
        .iter()
        .zip(&ob.expected_price)
        .filter_map(|(x, y)| Some((x.as_ref()? - y.as_ref()?).abs()))
        .fold(0.0, f64::max);
    let surplus_gap = (oa.buyer_surplus - ob.buyer_surplus).abs();
    let grid = linspace(0.0, 1.0, 100);
    let mut mismatches = 0;
    for &v in &grid {
        for &c in &grid {
            if a.recommends(v, c)? != b.recommends(v, c)? {
                mismatches += 1;
            }
        }
    }
    Ok(NeutralityReport {
        pass: profit_gap < tol && price_gap < tol && surplus_gap < tol && mismatches == 0,
        profit_gap,
        price_gap,
        surplus_gap,
        allocation_mismatches: mismatches,
    })
}

fn require_refinement(fine: &SegmentedMarket, coarse: &SegmentedMarket) -> Result<()> {
    if fine.segmentation().refines(coarse.segmentation()) {
        Ok(())
    } else {
        Err(Error::RefinementViolated(format!(
            "{} does not refine {}",
            fine.segmentation(),
            coarse.segmentation()
        )))
    }
}

/// Whether type `c`'s price law under the finer segmentation is a
/// mean-preserving spread of that under the coarser one.
pub fn price_spread_check(fine: &SegmentedMarket, coarse: &SegmentedMarket, c: f64) -> Result<MpsReport> {
    require_refinement(fine, coarse)?;
    match (fine.price_law(c)?, coarse.price_law(c)?) {
        (Some(f), Some(g)) => Ok(mps_check(&f, &g, MEAN_TOL, SOS_TOL)),
        (None, None) => Ok(MpsReport {
            is_mps: true,
            mean_gap: 0.0,
            max_violation: 0.0,
        }),
        _ => Err(Error::InvalidArgument(format!(
            "type {c} is active under only one of the segmentations"
        ))),
    }
}

/// Whether the law of `w(v, c)` under the finer segmentation is a
/// mean-preserving contraction of that under the coarser one.
pub fn mpc_surplus_check(fine: &SegmentedMarket, coarse: &SegmentedMarket, c: f64) -> Result<MpsReport> {
    require_refinement(fine, coarse)?;
    Ok(mps_check(&coarse.surplus_law(c)?, &fine.surplus_law(c)?, MEAN_TOL, SOS_TOL))
}

/// Whether `w_seg(·, c) - w_base(·, c)` changes sign at most once, from
/// positive to negative, on an `n`-point value grid. Differences within
/// `1e-12` of zero are ignored.
pub fn single_crossing(seg: &SegmentedMarket, base: &SegmentedMarket, c: f64, n: usize) -> Result<bool> {
    let mut seen_negative = false;
    for v in linspace(0.0, 1.0, n) {
        let d = seg.surplus_at(v, c)? - base.surplus_at(v, c)?;
        if d < -1e-12 {
            seen_negative = true;
        } else if d > 1e-12 && seen_negative {
            return Ok(false);
        }
    }
    Ok(true)
}
