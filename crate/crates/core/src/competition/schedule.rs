use rayon::prelude::*;
use serde::Serialize;

use super::{competing_surplus, MultiMarket};
use crate::distributions::RngStream;
use crate::error::{Error, Result};
use crate::mechanism::INACTIVE_PRICE;
use crate::numerics::{generalized_inverse, linspace, pava};
use crate::screening::VirtualCost;
use crate::segmentation::{CellMode, Segmentation};

/// Conditional acceptance rate below which a cost knot is inactive.
pub const THIN_RATE: f64 = 1e-4;
pub const DEFAULT_BATCHES: usize = 20;
pub const DEFAULT_COST_KNOTS: usize = 101;
pub const DEFAULT_SAMPLES: usize = 1_000_000;
pub const MIN_SAMPLES: usize = 10_000;
/// Random-stream id of schedule estimation batches (batch `b` uses `+ b`).
pub(crate) const ESTIMATION_STREAM: u64 = 1 << 20;

/// Equal-count bins of competing surplus used for non-linear virtual costs.
const SURPLUS_BINS: usize = 512;

/// One draw of the statistics seller `j` cares about.
#[derive(Clone, Copy, Debug)]
pub(crate) struct ThetaSample {
    pub theta: f64,
    pub value: f64,
    /// Best competing virtual surplus `M_j` (0 for the outside option).
    pub rival: f64,
}

/// `n` profiles, returned per seller.
pub(crate) fn draw_batch(market: &MultiMarket, n: usize, rng: &mut RngStream) -> Vec<Vec<ThetaSample>> {
    let j_count = market.n_sellers();
    let mut out = vec![Vec::with_capacity(n); j_count];
    let mut v = vec![0.0; j_count];
    let mut c = vec![0.0; j_count];
    for _ in 0..n {
        market.draw_profile(rng, &mut v, &mut c);
        for (j, samples) in out.iter_mut().enumerate() {
            let rival = competing_surplus(market, j + 1, &v, &c);
            samples.push(ThetaSample {
                theta: v[j] - rival,
                value: v[j],
                rival,
            });
        }
    }
    out
}

/// Split `n` as evenly as possible into `batches` parts.
pub(crate) fn batch_sizes(n: usize, batches: usize) -> Vec<usize> {
    (0..batches)
        .map(|b| n / batches + usize::from(b < n % batches))
        .collect()
}

/// `[batch][seller][sample]`, batch `b` drawn from stream `stream + b`.
pub(crate) fn draw_batches(
    market: &MultiMarket,
    n: usize,
    batches: usize,
    seed: u64,
    stream: u64,
) -> Vec<Vec<Vec<ThetaSample>>> {
    batch_sizes(n, batches)
        .into_par_iter()
        .enumerate()
        .map(|(b, size)| {
            let mut rng = RngStream::new(seed, stream + b as u64);
            draw_batch(market, size, &mut rng)
        })
        .collect()
}

/// Monotone price schedule of one pooled signal cell, tabulated on a cost
/// grid.
#[derive(Clone, Debug, Serialize)]
pub struct PriceSchedule {
    pub costs: Vec<f64>,
    /// Estimates after isotonic repair; NaN at inactive knots.
    pub prices: Vec<f64>,
    /// Batch-means standard errors; NaN at inactive knots.
    pub se: Vec<f64>,
    /// Conditional acceptance rate `P(θ >= γ(c), cell)` per knot.
    pub acceptance: Vec<f64>,
    pub active: Vec<bool>,
    /// Knots with some, but too few, accepted draws.
    pub thin_knots: Vec<f64>,
    /// Largest change made by isotonic repair.
    pub repair: f64,
    /// Estimated highest active type `γ⁻¹(max θ)`.
    pub c_bar: f64,
    pub inactive_price: f64,
    /// Interpolation table: active knots plus the zero-margin endpoint.
    #[serde(skip)]
    table: Vec<(f64, f64)>,
}

impl PriceSchedule {
    /// Estimate from per-batch `(θ, γ⁻¹(θ))` pairs restricted to the cell.
    fn from_batches(vc: &VirtualCost, batches: Vec<Vec<(f64, f64)>>, grid: &[f64], n_total: usize) -> Self {
        let k = grid.len();
        let thresholds: Vec<f64> = grid.iter().map(|&c| vc.eval(c)).collect();
        let mut theta_max = f64::NEG_INFINITY;
        // per batch: (count, sum) per knot
        let per_batch: Vec<Vec<(usize, f64)>> = batches
            .into_iter()
            .map(|mut pairs| {
                pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
                if let Some(last) = pairs.last() {
                    theta_max = theta_max.max(last.0);
                }
                let mut suffix = vec![0.0; pairs.len() + 1];
                for i in (0..pairs.len()).rev() {
                    suffix[i] = suffix[i + 1] + pairs[i].1;
                }
                thresholds
                    .iter()
                    .map(|&t| {
                        let idx = pairs.partition_point(|p| p.0 < t);
                        (pairs.len() - idx, suffix[idx])
                    })
                    .collect()
            })
            .collect();
        let n_batches = per_batch.len();
        let mut raw = vec![f64::NAN; k];
        let mut se = vec![f64::NAN; k];
        let mut acceptance = vec![0.0; k];
        let mut active = vec![false; k];
        let mut counts = vec![0usize; k];
        let mut thin_knots = Vec::new();
        for i in 0..k {
            let count: usize = per_batch.iter().map(|b| b[i].0).sum();
            let sum: f64 = per_batch.iter().map(|b| b[i].1).sum();
            counts[i] = count;
            acceptance[i] = count as f64 / n_total as f64;
            if count == 0 {
                continue;
            }
            if acceptance[i] < THIN_RATE {
                thin_knots.push(grid[i]);
                continue;
            }
            active[i] = true;
            raw[i] = sum / count as f64;
            let est: Vec<f64> = per_batch
                .iter()
                .filter(|b| b[i].0 > 0)
                .map(|b| b[i].1 / b[i].0 as f64)
                .collect();
            if est.len() >= 2 && n_batches >= 2 {
                let m = est.iter().sum::<f64>() / est.len() as f64;
                let var = est.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (est.len() - 1) as f64;
                se[i] = (var / est.len() as f64).sqrt();
            }
        }
        let idx: Vec<usize> = (0..k).filter(|&i| active[i]).collect();
        let fitted = pava(
            &idx.iter().map(|&i| raw[i]).collect::<Vec<_>>(),
            &idx.iter().map(|&i| counts[i] as f64).collect::<Vec<_>>(),
        );
        let mut prices = vec![f64::NAN; k];
        let mut repair = 0.0f64;
        for (&i, &p) in idx.iter().zip(&fitted) {
            repair = repair.max((p - raw[i]).abs());
            prices[i] = p;
        }
        let mut table: Vec<(f64, f64)> = idx.iter().map(|&i| (grid[i], prices[i])).collect();
        let c_bar = match table.last() {
            None => f64::NEG_INFINITY,
            Some(&(c_last, p_last)) => {
                let c_bar = vc.inverse_clamped(theta_max).clamp(c_last, 1.0);
                if c_bar > c_last {
                    // at the cutoff the conditional mean collapses to γ⁻¹(max θ)
                    table.push((c_bar, c_bar.max(p_last)));
                }
                c_bar
            }
        };
        Self {
            costs: grid.to_vec(),
            prices,
            se,
            acceptance,
            active,
            thin_knots,
            repair,
            c_bar,
            inactive_price: INACTIVE_PRICE,
            table,
        }
    }

    /// `p*(c)`, `None` for inactive types.
    pub fn price(&self, c: f64) -> Option<f64> {
        if c > self.c_bar || self.table.is_empty() {
            return None;
        }
        let t = &self.table;
        if c <= t[0].0 {
            return Some(t[0].1);
        }
        let i = t.partition_point(|k| k.0 <= c);
        if i == t.len() {
            return Some(t[i - 1].1);
        }
        let (c0, p0) = t[i - 1];
        let (c1, p1) = t[i];
        Some(p0 + (p1 - p0) * (c - c0) / (c1 - c0))
    }

    /// Generalized inverse: 0 below the lowest active price, 1 above the
    /// highest.
    pub fn inverse(&self, p: f64) -> f64 {
        let t = &self.table;
        if t.is_empty() || p > t[t.len() - 1].1 {
            return 1.0;
        }
        if p < t[0].1 {
            return 0.0;
        }
        if p == t[0].1 {
            return t[0].0;
        }
        let i = t.partition_point(|k| k.1 < p);
        let (c0, p0) = t[i - 1];
        let (c1, p1) = t[i];
        c0 + (c1 - c0) * (p - p0) / (p1 - p0)
    }
}

/// Prices for a revealed own value, computed from the marginal law of the
/// competing surplus `M`: `p(c, v) = E[γ⁻¹(v - M) | v - M >= γ(c)]`.
#[derive(Clone, Debug)]
pub struct RevealedSchedule {
    vc: VirtualCost,
    slope: Option<f64>,
    sorted: Vec<f64>,
    prefix: Vec<f64>,
    /// `(mean, count)` of equal-count bins, for non-linear `γ`.
    bins: Vec<(f64, usize)>,
    n_total: usize,
}

impl RevealedSchedule {
    fn new(vc: &VirtualCost, mut rivals: Vec<f64>, n_total: usize) -> Self {
        rivals.sort_by(f64::total_cmp);
        let mut prefix = Vec::with_capacity(rivals.len() + 1);
        prefix.push(0.0);
        let mut acc = 0.0;
        for &m in &rivals {
            acc += m;
            prefix.push(acc);
        }
        let bins = rivals
            .chunks(rivals.len().div_ceil(SURPLUS_BINS).max(1))
            .map(|ch| (ch.iter().sum::<f64>() / ch.len() as f64, ch.len()))
            .collect();
        Self {
            vc: vc.clone(),
            slope: vc.linear_slope(),
            sorted: rivals,
            prefix,
            bins,
            n_total,
        }
    }

    /// Number of rival draws with `M <= x`.
    fn count_below(&self, x: f64) -> usize {
        self.sorted.partition_point(|&m| m <= x)
    }

    pub fn price(&self, c: f64, v: f64) -> Option<f64> {
        let x = v - self.vc.eval(c);
        if x < 0.0 {
            return None;
        }
        let count = self.count_below(x);
        if count < self.min_count() {
            return None;
        }
        match self.slope {
            Some(k) => Some((v - self.prefix[count] / count as f64) / k),
            None => {
                let (mut w, mut s) = (0.0, 0.0);
                for &(m, n) in self.bins.iter().take_while(|b| b.0 <= x) {
                    w += n as f64;
                    s += n as f64 * self.vc.inverse_clamped(v - m);
                }
                (w > 0.0).then(|| s / w)
            }
        }
    }

    /// Fewest rival draws below `v - γ(c)` for a type to be active.
    fn min_count(&self) -> usize {
        ((THIN_RATE * self.n_total as f64).ceil() as usize).max(1)
    }

    /// Largest type active at value `v`, `None` if none is.
    fn top_type(&self, v: f64) -> Option<f64> {
        let m = *self.sorted.get(self.min_count() - 1)?;
        let x = v - m;
        if x < self.vc.eval(0.0) {
            return None;
        }
        let mut top = self.vc.inverse_clamped(x);
        // guard the rounding of γ⁻¹ at the activity edge
        while top > 0.0 && self.price(top, v).is_none() {
            top = (top - 1e-12).max(0.0);
        }
        self.price(top, v).map(|_| top)
    }

    /// Generalized inverse of `c ↦ p(c, v)`.
    pub fn inverse(&self, p: f64, v: f64) -> f64 {
        let Some(top) = self.top_type(v) else {
            return 1.0;
        };
        let p_top = self.price(top, v).unwrap();
        if p > p_top {
            return 1.0;
        }
        let p0 = self.price(0.0, v).unwrap();
        if p <= p0 {
            return 0.0;
        }
        if let Some(k) = self.slope {
            // p(c) >= p  iff  E[M | M <= v - γ(c)] <= v - k p; the prefix mean
            // is nondecreasing in the count
            // the slack absorbs rounding in p = (v - mean)/k
            let target = v - k * p + 1e-12;
            let n = self.sorted.len();
            let (mut lo, mut hi) = (1usize, n);
            // largest count with prefix mean <= target
            while lo < hi {
                let mid = (lo + hi).div_ceil(2);
                if self.prefix[mid] / mid as f64 <= target {
                    lo = mid;
                } else {
                    hi = mid - 1;
                }
            }
            if lo >= n {
                return 0.0;
            }
            // smallest c whose count is at most `lo`: γ(c) > v - sorted[lo]
            return self.vc.inverse_clamped(v - self.sorted[lo]).min(top);
        }
        generalized_inverse(
            |c| self.price(c, v).unwrap_or(f64::INFINITY),
            p,
            0.0,
            top,
            1e-12,
        )
    }
}

#[derive(Clone, Debug)]
pub enum CellSchedule {
    Pooled(PriceSchedule),
    Revealed(RevealedSchedule),
}

/// Seller `j`'s equilibrium pricing as a function of its type and signal.
#[derive(Clone, Debug)]
pub struct SellerSchedule {
    signal: Segmentation,
    cells: Vec<CellSchedule>,
}

impl SellerSchedule {
    pub fn signal(&self) -> &Segmentation {
        &self.signal
    }

    pub fn cells(&self) -> &[CellSchedule] {
        &self.cells
    }

    /// The schedule of an unsegmented seller.
    pub fn single(&self) -> Option<&PriceSchedule> {
        match self.cells.as_slice() {
            [CellSchedule::Pooled(s)] => Some(s),
            _ => None,
        }
    }

    /// Price of type `c` when its signal is the cell of value `v`; the
    /// inactive price when no trade is possible.
    pub fn price(&self, c: f64, v: f64) -> f64 {
        let k = self.signal.cell_index(v);
        let p = match &self.cells[k] {
            CellSchedule::Pooled(s) => s.price(c),
            CellSchedule::Revealed(r) => r.price(c, v),
        };
        p.unwrap_or(INACTIVE_PRICE)
    }

    /// Type the recommender infers from price `p` given the signal of `v`.
    pub fn inverse(&self, p: f64, v: f64) -> f64 {
        let k = self.signal.cell_index(v);
        match &self.cells[k] {
            CellSchedule::Pooled(s) => s.inverse(p),
            CellSchedule::Revealed(r) => r.inverse(p, v),
        }
    }
}

/// Build seller `j`'s schedule from drawn batches.
pub(crate) fn build_seller_schedule(
    market: &MultiMarket,
    j: usize,
    batches: &[Vec<Vec<ThetaSample>>],
    grid: &[f64],
) -> Result<SellerSchedule> {
    let seller = market.seller(j);
    let vc = &seller.vc;
    let signal = seller.signal.clone();
    let n_total: usize = batches.iter().map(|b| b[j - 1].len()).sum();
    let any_revealed = signal.modes().contains(&CellMode::Revealed);
    if any_revealed && !market.values().is_iid() {
        return Err(Error::InvalidArgument(
            "revealed own-value signals need independent values across sellers".into(),
        ));
    }
    let revealed = any_revealed.then(|| {
        let rivals = batches
            .iter()
            .flat_map(|b| b[j - 1].iter().map(|s| s.rival))
            .collect();
        RevealedSchedule::new(vc, rivals, n_total)
    });
    let cells = (0..signal.n_cells())
        .map(|k| match signal.modes()[k] {
            CellMode::Revealed => CellSchedule::Revealed(revealed.clone().unwrap()),
            CellMode::Pooled => {
                let per_batch = batches
                    .iter()
                    .map(|b| {
                        b[j - 1]
                            .iter()
                            .filter(|s| signal.cell_index(s.value) == k)
                            .map(|s| (s.theta, vc.inverse_clamped(s.theta)))
                            .collect()
                    })
                    .collect();
                CellSchedule::Pooled(PriceSchedule::from_batches(vc, per_batch, grid, n_total))
            }
        })
        .collect();
    Ok(SellerSchedule { signal, cells })
}

fn check_samples(n: usize) -> Result<()> {
    if n < MIN_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "need at least {MIN_SAMPLES} Monte Carlo samples, got {n}"
        )));
    }
    Ok(())
}

/// Schedules of every seller from one set of `n_samples` draws split into
/// [`DEFAULT_BATCHES`] batches.
pub fn estimate_price_schedules(
    market: &MultiMarket,
    n_samples: usize,
    cost_grid: &[f64],
    seed: u64,
) -> Result<Vec<SellerSchedule>> {
    check_samples(n_samples)?;
    let batches = draw_batches(market, n_samples, DEFAULT_BATCHES, seed, ESTIMATION_STREAM);
    (1..=market.n_sellers())
        .map(|j| build_seller_schedule(market, j, &batches, cost_grid))
        .collect()
}

/// Schedule of seller `j` alone.
pub fn estimate_price_schedule(
    market: &MultiMarket,
    j: usize,
    n_samples: usize,
    cost_grid: &[f64],
    seed: u64,
) -> Result<SellerSchedule> {
    market.check_seller(j)?;
    check_samples(n_samples)?;
    let batches = draw_batches(market, n_samples, DEFAULT_BATCHES, seed, ESTIMATION_STREAM);
    build_seller_schedule(market, j, &batches, cost_grid)
}

/// The default 101-knot cost grid on `[0, 1]`.
pub fn default_cost_grid() -> Vec<f64> {
    linspace(0.0, 1.0, DEFAULT_COST_KNOTS)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::competition::ValueSampler;
    use crate::distributions::Distribution;

    fn market(j: usize) -> MultiMarket {
        MultiMarket::new(
            vec![Distribution::uniform(); j],
            ValueSampler::Iid(Distribution::uniform()),
        )
        .unwrap()
    }

    #[test]
    fn single_seller_matches_closed_form() {
        let m = market(1);
        let s = estimate_price_schedule(&m, 1, 200_000, &default_cost_grid(), 7).unwrap();
        let p = s.single().unwrap();
        for (i, &c) in p.costs.iter().enumerate() {
            if c < 0.45 {
                assert!(p.active[i]);
                let want = (1.0 + 2.0 * c) / 4.0;
                assert!((p.prices[i] - want).abs() < 5.0 * p.se[i] + 1e-9, "c={c}");
            }
        }
        assert!(p.price(0.75).is_none());
        assert!((p.c_bar - 0.5).abs() < 1e-3);
        assert!(p.repair < 1e-12);
        // inverse conventions
        assert_eq!(p.inverse(0.1), 0.0);
        assert_eq!(p.inverse(0.9), 1.0);
        assert!((p.inverse(p.price(0.25).unwrap()) - 0.25).abs() < 1e-9);
    }

    #[test]
    fn two_seller_low_type_price() {
        let m = market(2);
        let s = estimate_price_schedule(&m, 1, 400_000, &[0.0, 0.2], 11).unwrap();
        let p = s.single().unwrap();
        // brute-force oracle: 21/88 and 0.34396552
        assert!((p.prices[0] - 21.0 / 88.0).abs() < 4.0 * p.se[0]);
        assert!((p.prices[1] - 0.34396552).abs() < 4.0 * p.se[1]);
    }

    #[test]
    fn determinism() {
        let m = market(2);
        let a = estimate_price_schedule(&m, 2, 50_000, &default_cost_grid(), 3).unwrap();
        let b = estimate_price_schedule(&m, 2, 50_000, &default_cost_grid(), 3).unwrap();
        let (a, b) = (a.single().unwrap(), b.single().unwrap());
        assert_eq!(
            a.prices.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
            b.prices.iter().map(|x| x.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn too_few_samples_rejected() {
        assert!(estimate_price_schedule(&market(1), 1, 100, &[0.0], 1).is_err());
    }

    #[test]
    fn revealed_single_seller_prices_own_value() {
        let m = market(1).with_signal(1, Segmentation::full()).unwrap();
        let s = estimate_price_schedule(&m, 1, 20_000, &default_cost_grid(), 5).unwrap();
        // no rivals: M = 0, so p(c, v) = γ⁻¹(v) = v/2
        assert!((s.price(0.2, 0.8) - 0.4).abs() < 1e-12);
        assert_eq!(s.price(0.5, 0.8), INACTIVE_PRICE);
        assert!((s.inverse(0.4, 0.8) - 0.0).abs() < 1e-12);
        assert_eq!(s.inverse(0.45, 0.8), 1.0);
    }

    #[test]
    fn revealed_two_seller_inverse_round_trip() {
        let m = market(2).with_signal(1, Segmentation::full()).unwrap();
        let s = estimate_price_schedule(&m, 1, 100_000, &default_cost_grid(), 9).unwrap();
        for &(c, v) in &[(0.1, 0.6), (0.2, 0.9), (0.05, 0.3)] {
            let p = s.price(c, v);
            assert!(p < 1.0);
            let back = s.inverse(p, v);
            // the revealed schedule is a step function: the inverse is the
            // infimum of the types pricing at or above p
            assert!(s.price(back + 1e-9, v) >= p, "c={c} v={v}");
            assert!(back <= c + 1e-12 && c - back < 1e-3, "c={c} back={back} p={p} pb={}", s.price(back, v));
        }
    }

    #[test]
    fn revealed_needs_iid_values() {
        let rows = std::sync::Arc::new(vec![vec![0.5, 0.2]; 10]);
        let m = MultiMarket::new(vec![Distribution::uniform(); 2], ValueSampler::Table(rows))
            .unwrap()
            .with_signal(1, Segmentation::full())
            .unwrap();
        assert!(estimate_price_schedule(&m, 1, 20_000, &[0.0], 1).is_err());
    }
}
