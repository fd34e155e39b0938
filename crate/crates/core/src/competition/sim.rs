use rayon::prelude::*;
use serde::Serialize;

use super::schedule::{batch_sizes, estimate_price_schedules, SellerSchedule, DEFAULT_BATCHES};
use super::MultiMarket;
use crate::distributions::RngStream;
use crate::error::{Error, Result};
use crate::segmentation::CellMode;

/// Random-stream ids of the evaluation passes (batch `b` uses `+ b`).
pub(crate) const SIMULATION_STREAM: u64 = 2 << 20;
const CURVE_STREAM: u64 = 3 << 20;
const DEVIATION_STREAM: u64 = 4 << 20;

/// A market together with every seller's equilibrium schedule.
#[derive(Clone, Debug)]
pub struct CompetitiveEquilibrium {
    market: MultiMarket,
    schedules: Vec<SellerSchedule>,
}

/// Best score found so far during a recommendation scan.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Leader {
    pub index: usize,
    pub score: f64,
    pub inverse: f64,
}

impl Leader {
    /// The outside option: score 0, inverse 0.
    pub fn dummy() -> Self {
        Self {
            index: 0,
            score: 0.0,
            inverse: 0.0,
        }
    }

    /// Whether candidate `j` displaces the leader: higher score, or an equal
    /// score with a positive inverse against a non-positive one, or equal
    /// standing and a lower index.
    pub fn beaten_by(&self, j: usize, score: f64, inverse: f64) -> bool {
        if score != self.score {
            return score > self.score;
        }
        let (pos, lead_pos) = (inverse > 0.0, self.inverse > 0.0);
        if pos != lead_pos {
            return pos;
        }
        j < self.index
    }

    pub fn offer(&mut self, j: usize, score: f64, inverse: f64) {
        if self.beaten_by(j, score, inverse) {
            *self = Self {
                index: j,
                score,
                inverse,
            };
        }
    }
}

impl CompetitiveEquilibrium {
    /// Estimate all schedules from `n_samples` draws.
    pub fn estimate(market: MultiMarket, n_samples: usize, cost_grid: &[f64], seed: u64) -> Result<Self> {
        let schedules = estimate_price_schedules(&market, n_samples, cost_grid, seed)?;
        Ok(Self { market, schedules })
    }

    pub fn from_parts(market: MultiMarket, schedules: Vec<SellerSchedule>) -> Result<Self> {
        if schedules.len() != market.n_sellers() {
            return Err(Error::InvalidArgument(format!(
                "{} schedules for {} sellers",
                schedules.len(),
                market.n_sellers()
            )));
        }
        Ok(Self { market, schedules })
    }

    pub fn market(&self) -> &MultiMarket {
        &self.market
    }

    pub fn schedules(&self) -> &[SellerSchedule] {
        &self.schedules
    }

    /// Seller `j`'s (1-based) schedule.
    pub fn schedule(&self, j: usize) -> &SellerSchedule {
        &self.schedules[j - 1]
    }

    /// Equilibrium price of seller `j` of type `c` with own value `v`.
    pub fn price(&self, j: usize, c: f64, v: f64) -> f64 {
        self.schedules[j - 1].price(c, v)
    }

    /// Inferred type; the outside option always maps to 0.
    pub fn inverse(&self, j: usize, p: f64, v: f64) -> f64 {
        if j == 0 {
            0.0
        } else {
            self.schedules[j - 1].inverse(p, v)
        }
    }

    /// Seller to recommend (0 = no purchase): the largest
    /// `v_j - γ_j(p_j⁻¹(p_j))`, ties toward a positive inferred type, then
    /// toward the lowest index.
    pub fn recommend(&self, values: &[f64], prices: &[f64]) -> usize {
        self.leader_excluding(values, prices, usize::MAX).index
    }

    pub(crate) fn score(&self, j: usize, v: f64, p: f64) -> (f64, f64) {
        let x = self.inverse(j, p, v);
        (v - self.market.gamma(j, x), x)
    }

    /// Recommendation scan skipping seller `skip`.
    pub(crate) fn leader_excluding(&self, values: &[f64], prices: &[f64], skip: usize) -> Leader {
        let mut lead = Leader::dummy();
        for j in 1..=self.market.n_sellers() {
            if j != skip {
                let (s, x) = self.score(j, values[j - 1], prices[j - 1]);
                lead.offer(j, s, x);
            }
        }
        lead
    }

    fn fill_prices(&self, values: &[f64], costs: &[f64], prices: &mut [f64]) {
        for (j, p) in prices.iter_mut().enumerate() {
            *p = self.price(j + 1, costs[j], values[j]);
        }
    }
}

/// Mean and batch-means standard error.
pub(crate) fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (m, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

/// Estimate with its batch-means standard error.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

impl Estimate {
    pub(crate) fn from_batches(xs: &[f64]) -> Self {
        let (mean, se) = mean_se(xs);
        Self { mean, se }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SimulationReport {
    pub samples: usize,
    /// Share of draws where the recommended seller is the virtual-surplus
    /// maximiser.
    pub agreement: f64,
    pub buyer_surplus: Estimate,
    /// Index 0 is the outside option.
    pub trade_shares: Vec<f64>,
    /// Ex-ante profit per seller.
    pub seller_profit: Vec<Estimate>,
    /// Mean transaction price per seller (NaN if it never trades).
    pub mean_price: Vec<f64>,
}

#[derive(Clone, Default)]
struct SimBatch {
    n: usize,
    agree: usize,
    surplus: f64,
    wins: Vec<usize>,
    profit: Vec<f64>,
    revenue: Vec<f64>,
}

/// Play the equilibrium on `n_samples` fresh draws.
pub fn simulate(eq: &CompetitiveEquilibrium, n_samples: usize, seed: u64) -> Result<SimulationReport> {
    if n_samples == 0 {
        return Err(Error::InvalidArgument("simulation needs at least one sample".into()));
    }
    let j_count = eq.market.n_sellers();
    let batches: Vec<SimBatch> = batch_sizes(n_samples, DEFAULT_BATCHES)
        .into_par_iter()
        .enumerate()
        .map(|(b, size)| {
            let mut rng = RngStream::new(seed, SIMULATION_STREAM + b as u64);
            let mut out = SimBatch {
                n: size,
                wins: vec![0; j_count + 1],
                profit: vec![0.0; j_count],
                revenue: vec![0.0; j_count],
                ..Default::default()
            };
            let (mut v, mut c, mut p) = (vec![0.0; j_count], vec![0.0; j_count], vec![0.0; j_count]);
            for _ in 0..size {
                eq.market.draw_profile(&mut rng, &mut v, &mut c);
                eq.fill_prices(&v, &c, &mut p);
                let w = eq.recommend(&v, &p);
                let mut best = Leader::dummy();
                for j in 1..=j_count {
                    best.offer(j, v[j - 1] - eq.market.gamma(j, c[j - 1]), c[j - 1]);
                }
                out.agree += usize::from(best.index == w);
                out.wins[w] += 1;
                if w > 0 {
                    out.surplus += v[w - 1] - p[w - 1];
                    out.profit[w - 1] += p[w - 1] - c[w - 1];
                    out.revenue[w - 1] += p[w - 1];
                }
            }
            out
        })
        .collect();

    let per = |f: &dyn Fn(&SimBatch) -> f64| -> Vec<f64> { batches.iter().map(f).collect() };
    let total_wins = |j: usize| batches.iter().map(|b| b.wins[j]).sum::<usize>();
    Ok(SimulationReport {
        samples: n_samples,
        agreement: batches.iter().map(|b| b.agree).sum::<usize>() as f64 / n_samples as f64,
        buyer_surplus: Estimate::from_batches(&per(&|b| b.surplus / b.n as f64)),
        trade_shares: (0..=j_count)
            .map(|j| total_wins(j) as f64 / n_samples as f64)
            .collect(),
        seller_profit: (0..j_count)
            .map(|j| Estimate::from_batches(&per(&|b| b.profit[j] / b.n as f64)))
            .collect(),
        mean_price: (0..j_count)
            .map(|j| {
                let rev: f64 = batches.iter().map(|b| b.revenue[j]).sum();
                let w = total_wins(j + 1);
                if w == 0 {
                    f64::NAN
                } else {
                    rev / w as f64
                }
            })
            .collect(),
    })
}

/// Interim statistics of seller `j` as a function of its type.
#[derive(Clone, Debug, Serialize)]
pub struct TypeCurves {
    pub seller: usize,
    pub costs: Vec<f64>,
    /// Mean price over the draws where the type trades (NaN if it never does).
    pub expected_price: Vec<Estimate>,
    pub profit: Vec<Estimate>,
    pub trade_probability: Vec<f64>,
    /// `E[v_j | recommended]` per knot.
    pub posterior_value: Vec<Estimate>,
    /// Smallest `E[v_j - p | recommended, pooled cell]` over pooled cells
    /// where the type trades; `None` when there is none.
    pub obedience_slack: Vec<Option<Estimate>>,
}

#[derive(Clone)]
struct CurveBatch {
    n: usize,
    wins: Vec<usize>,
    revenue: Vec<f64>,
    profit: Vec<f64>,
    value: Vec<f64>,
    /// `[knot][cell]`: (wins, Σ (v - p))
    cells: Vec<Vec<(usize, f64)>>,
}

/// Per-batch accumulation for [`type_curves`] and the neutrality check: the
/// curves of seller `j` plus buyer surplus under the equilibrium.
pub(crate) struct CurveSums {
    batches: Vec<CurveBatch>,
    pub surplus: Vec<f64>,
}

pub(crate) fn curve_sums(
    eq: &CompetitiveEquilibrium,
    j: usize,
    costs: &[f64],
    sizes: &[usize],
    seed: u64,
    stream: u64,
) -> CurveSums {
    let j_count = eq.market.n_sellers();
    let n_cells = eq.schedule(j).signal().n_cells();
    let k = costs.len();
    let out: Vec<(CurveBatch, f64)> = sizes
        .par_iter()
        .enumerate()
        .map(|(b, &size)| {
            let mut rng = RngStream::new(seed, stream + b as u64);
            let mut batch = CurveBatch {
                n: size,
                wins: vec![0; k],
                revenue: vec![0.0; k],
                profit: vec![0.0; k],
                value: vec![0.0; k],
                cells: vec![vec![(0, 0.0); n_cells]; k],
            };
            let mut surplus = 0.0;
            let (mut v, mut c, mut p) = (vec![0.0; j_count], vec![0.0; j_count], vec![0.0; j_count]);
            for _ in 0..size {
                eq.market.draw_profile(&mut rng, &mut v, &mut c);
                eq.fill_prices(&v, &c, &mut p);
                let w = eq.recommend(&v, &p);
                if w > 0 {
                    surplus += v[w - 1] - p[w - 1];
                }
                let rivals = eq.leader_excluding(&v, &p, j);
                let vj = v[j - 1];
                let cell = eq.schedule(j).signal().cell_index(vj);
                for (i, &cj) in costs.iter().enumerate() {
                    let pj = eq.price(j, cj, vj);
                    let (s, x) = eq.score(j, vj, pj);
                    if rivals.beaten_by(j, s, x) {
                        batch.wins[i] += 1;
                        batch.revenue[i] += pj;
                        batch.profit[i] += pj - cj;
                        batch.value[i] += vj;
                        batch.cells[i][cell].0 += 1;
                        batch.cells[i][cell].1 += vj - pj;
                    }
                }
            }
            (batch, surplus / size as f64)
        })
        .collect();
    let (batches, surplus) = out.into_iter().unzip();
    CurveSums { batches, surplus }
}

impl CurveSums {
    fn ratio(&self, i: usize, num: impl Fn(&CurveBatch, usize) -> f64) -> Estimate {
        let total: usize = self.batches.iter().map(|b| b.wins[i]).sum();
        if total == 0 {
            return Estimate {
                mean: f64::NAN,
                se: f64::NAN,
            };
        }
        let mean = self.batches.iter().map(|b| num(b, i)).sum::<f64>() / total as f64;
        let per: Vec<f64> = self
            .batches
            .iter()
            .filter(|b| b.wins[i] > 0)
            .map(|b| num(b, i) / b.wins[i] as f64)
            .collect();
        Estimate {
            mean,
            se: mean_se(&per).1,
        }
    }

    /// Per-batch expected price (NaN where a batch has no trade).
    pub fn price_batches(&self, i: usize) -> Vec<f64> {
        self.batches
            .iter()
            .map(|b| b.revenue[i] / b.wins[i] as f64)
            .collect()
    }

    pub fn profit_batches(&self, i: usize) -> Vec<f64> {
        self.batches.iter().map(|b| b.profit[i] / b.n as f64).collect()
    }

    pub fn price(&self, i: usize) -> Estimate {
        self.ratio(i, |b, i| b.revenue[i])
    }
}

/// Expected price, profit, posterior value and buyer obedience slack of
/// seller `j` at each type in `costs`, other sellers drawn from their laws.
pub fn type_curves(
    eq: &CompetitiveEquilibrium,
    j: usize,
    costs: &[f64],
    n_samples: usize,
    seed: u64,
) -> Result<TypeCurves> {
    eq.market.check_seller(j)?;
    let sizes = batch_sizes(n_samples, DEFAULT_BATCHES);
    let sums = curve_sums(eq, j, costs, &sizes, seed, CURVE_STREAM);
    let modes = eq.schedule(j).signal().modes().to_vec();
    let obedience = (0..costs.len())
        .map(|i| {
            modes
                .iter()
                .enumerate()
                .filter(|(_, m)| **m == CellMode::Pooled)
                .filter_map(|(k, _)| {
                    let total: usize = sums.batches.iter().map(|b| b.cells[i][k].0).sum();
                    if total == 0 {
                        return None;
                    }
                    let mean = sums.batches.iter().map(|b| b.cells[i][k].1).sum::<f64>() / total as f64;
                    let per: Vec<f64> = sums
                        .batches
                        .iter()
                        .filter(|b| b.cells[i][k].0 > 0)
                        .map(|b| b.cells[i][k].1 / b.cells[i][k].0 as f64)
                        .collect();
                    Some(Estimate {
                        mean,
                        se: mean_se(&per).1,
                    })
                })
                .min_by(|a, b| a.mean.total_cmp(&b.mean))
        })
        .collect();
    Ok(TypeCurves {
        seller: j,
        costs: costs.to_vec(),
        expected_price: (0..costs.len()).map(|i| sums.price(i)).collect(),
        profit: (0..costs.len())
            .map(|i| Estimate::from_batches(&sums.profit_batches(i)))
            .collect(),
        trade_probability: (0..costs.len())
            .map(|i| sums.batches.iter().map(|b| b.wins[i]).sum::<usize>() as f64 / n_samples as f64)
            .collect(),
        posterior_value: (0..costs.len()).map(|i| sums.ratio(i, |b, i| b.value[i])).collect(),
        obedience_slack: obedience,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct BestResponseReport {
    pub seller: usize,
    pub cost: f64,
    pub equilibrium_price: f64,
    pub equilibrium_profit: Estimate,
    /// Largest `profit(p) - profit(p_eq)` over the deviation grid.
    pub max_gain: f64,
    /// Standard error of the paired gain at the worst deviation.
    pub gain_se: f64,
    pub worst_price: f64,
}

/// Profit of seller `j` of type `c` at each price in `price_grid` against
/// equilibrium play by everyone else, on common draws. Only sellers without
/// a signal are audited: their price is the same for every own value.
pub fn verify_best_response(
    eq: &CompetitiveEquilibrium,
    j: usize,
    c: f64,
    price_grid: &[f64],
    n_samples: usize,
    seed: u64,
) -> Result<BestResponseReport> {
    eq.market.check_seller(j)?;
    let sched = eq.schedule(j);
    if sched.single().is_none() {
        return Err(Error::InvalidArgument(
            "best-response audit needs a seller without an own-value signal".into(),
        ));
    }
    let p_eq = sched.price(c, 0.0);
    let mut prices = vec![p_eq];
    prices.extend_from_slice(price_grid);
    let inverses: Vec<f64> = prices.iter().map(|&p| sched.inverse(p, 0.0)).collect();
    let j_count = eq.market.n_sellers();
    // [batch][price] profit sums
    let sums: Vec<Vec<f64>> = batch_sizes(n_samples, DEFAULT_BATCHES)
        .into_par_iter()
        .enumerate()
        .map(|(b, size)| {
            let mut rng = RngStream::new(seed, DEVIATION_STREAM + b as u64);
            let mut acc = vec![0.0; prices.len()];
            let (mut v, mut cs, mut p) = (vec![0.0; j_count], vec![0.0; j_count], vec![0.0; j_count]);
            for _ in 0..size {
                eq.market.draw_profile(&mut rng, &mut v, &mut cs);
                eq.fill_prices(&v, &cs, &mut p);
                let rivals = eq.leader_excluding(&v, &p, j);
                let vj = v[j - 1];
                for ((a, &pr), &x) in acc.iter_mut().zip(&prices).zip(&inverses) {
                    let s = vj - eq.market.gamma(j, x);
                    if rivals.beaten_by(j, s, x) {
                        *a += pr - c;
                    }
                }
            }
            acc.iter().map(|a| a / size as f64).collect()
        })
        .collect();
    let profit_at = |i: usize| -> Vec<f64> { sums.iter().map(|b| b[i]).collect() };
    let eq_batches = profit_at(0);
    let mut report = BestResponseReport {
        seller: j,
        cost: c,
        equilibrium_price: p_eq,
        equilibrium_profit: Estimate::from_batches(&eq_batches),
        max_gain: f64::NEG_INFINITY,
        gain_se: f64::NAN,
        worst_price: p_eq,
    };
    for (i, &pr) in prices.iter().enumerate().skip(1) {
        let diffs: Vec<f64> = profit_at(i).iter().zip(&eq_batches).map(|(a, b)| a - b).collect();
        let (gain, se) = mean_se(&diffs);
        if gain > report.max_gain {
            report.max_gain = gain;
            report.gain_se = se;
            report.worst_price = pr;
        }
    }
    if prices.len() == 1 {
        report.max_gain = 0.0;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::competition::schedule::default_cost_grid;
    use crate::competition::ValueSampler;
    use crate::distributions::Distribution;
    use crate::numerics::linspace;
    use crate::segmentation::Segmentation;

    fn equilibrium(j: usize, n: usize) -> CompetitiveEquilibrium {
        let m = MultiMarket::new(
            vec![Distribution::uniform(); j],
            ValueSampler::Iid(Distribution::uniform()),
        )
        .unwrap();
        CompetitiveEquilibrium::estimate(m, n, &default_cost_grid(), 1).unwrap()
    }

    #[test]
    fn recommend_examples() {
        let eq = equilibrium(1, 200_000);
        let p = eq.price(1, 0.25, 0.0);
        assert!((p - 0.375).abs() < 5e-3);
        assert_eq!(eq.recommend(&[0.6], &[p]), 1);
        assert_eq!(eq.recommend(&[0.3], &[p]), 0);
        assert_eq!(eq.recommend(&[0.9], &[2.0]), 0);
    }

    #[test]
    fn ties_prefer_positive_inverse_then_low_index() {
        let lead = Leader::dummy();
        // equal score 0: a positive inferred type wins over the dummy
        assert!(lead.beaten_by(1, 0.0, 0.2));
        assert!(!lead.beaten_by(1, 0.0, 0.0));
        let one = Leader {
            index: 1,
            score: 0.3,
            inverse: 0.1,
        };
        assert!(!one.beaten_by(2, 0.3, 0.4));
        assert!(one.beaten_by(2, 0.31, 0.0));
    }

    #[test]
    fn single_seller_surplus_and_agreement() {
        let eq = equilibrium(1, 200_000);
        let r = simulate(&eq, 200_000, 2).unwrap();
        assert!(r.agreement > 0.999, "{}", r.agreement);
        assert!((r.buyer_surplus.mean - 1.0 / 12.0).abs() < 3.0 * r.buyer_surplus.se + 1e-4);
        assert!((r.seller_profit[0].mean - 1.0 / 24.0).abs() < 4.0 * r.seller_profit[0].se + 1e-4);
    }

    #[test]
    fn dominated_competitor_never_trades() {
        let expensive = Distribution::piecewise_linear(vec![(0.0, 0.0), (0.98, 0.0001), (1.0, 1.0)]).unwrap();
        let m = MultiMarket::new(
            vec![Distribution::uniform(), expensive],
            ValueSampler::Iid(Distribution::uniform()),
        )
        .unwrap();
        let eq = CompetitiveEquilibrium::estimate(m, 100_000, &default_cost_grid(), 4).unwrap();
        let r = simulate(&eq, 100_000, 5).unwrap();
        assert!(r.trade_shares[2] < 0.01);
        assert!((r.trade_shares[1] - 0.25).abs() < 0.01);
    }

    #[test]
    fn single_seller_best_response() {
        let eq = equilibrium(1, 200_000);
        let grid = linspace(0.0, 1.0, 100);
        let r = verify_best_response(&eq, 1, 0.25, &grid, 100_000, 6).unwrap();
        assert!(r.max_gain <= 1e-3, "{r:?}");
        let r = verify_best_response(&eq, 1, 0.75, &grid, 50_000, 6).unwrap();
        assert!(r.max_gain <= 0.0, "{r:?}");
        assert_eq!(r.equilibrium_price, 2.0);
    }

    #[test]
    fn curves_reduce_to_single_seller() {
        let eq = equilibrium(1, 200_000);
        let t = type_curves(&eq, 1, &[0.0, 0.25, 1.0], 100_000, 8).unwrap();
        assert!((t.expected_price[1].mean - 0.375).abs() < 5e-3);
        // profit (1-2c)^2/4
        assert!((t.profit[1].mean - 0.0625).abs() < 4.0 * t.profit[1].se + 1e-3);
        assert_eq!(t.profit[2].mean, 0.0);
        for s in t.obedience_slack.iter().flatten() {
            assert!(s.mean >= -4.0 * s.se);
        }
    }

    #[test]
    fn revealed_signals_keep_agreement() {
        let m = MultiMarket::new(
            vec![Distribution::uniform(); 2],
            ValueSampler::Iid(Distribution::uniform()),
        )
        .unwrap()
        .with_signals(vec![Segmentation::full(), "0,0.5,1".parse().unwrap()])
        .unwrap();
        let eq = CompetitiveEquilibrium::estimate(m, 100_000, &default_cost_grid(), 3).unwrap();
        let r = simulate(&eq, 100_000, 4).unwrap();
        assert!(r.agreement > 0.999, "{}", r.agreement);
    }

    #[test]
    fn simulation_is_deterministic() {
        let eq = equilibrium(2, 50_000);
        let a = simulate(&eq, 20_000, 9).unwrap();
        let b = simulate(&eq, 20_000, 9).unwrap();
        assert_eq!(a.buyer_surplus.mean.to_bits(), b.buyer_surplus.mean.to_bits());
        assert_eq!(a.trade_shares, b.trade_shares);
    }
}
