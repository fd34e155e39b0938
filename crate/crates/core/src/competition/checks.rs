use rayon::prelude::*;
use serde::Serialize;

use super::schedule::{
    batch_sizes, build_seller_schedule, default_cost_grid, draw_batch, draw_batches, DEFAULT_BATCHES,
    ESTIMATION_STREAM, MIN_SAMPLES,
};
use super::sim::{curve_sums, mean_se, CompetitiveEquilibrium};
use super::MultiMarket;
use crate::distributions::RngStream;
use crate::error::{Error, Result};
use crate::mechanism::INACTIVE_PRICE;
use crate::numerics::linspace;
use crate::segmentation::{mps_check, MpsReport, Segmentation, StepLaw, MEAN_TOL, SOS_TOL};

const NEUTRALITY_STREAM: u64 = 5 << 20;
/// Cost knots of the compared curves.
const NEUTRALITY_KNOTS: usize = 21;

/// One compared statistic.
#[derive(Clone, Debug, Serialize)]
pub struct CurveGap {
    /// 0 for buyer surplus.
    pub seller: usize,
    pub statistic: &'static str,
    pub cost: f64,
    /// Mean of the paired per-batch differences `A - B`.
    pub gap: f64,
    pub se: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct CompetitiveNeutralityReport {
    pub pass: bool,
    pub buyer_surplus_gap: CurveGap,
    /// Failing comparisons (empty on a pass).
    pub failures: Vec<CurveGap>,
    /// Largest `|gap| / bound` among all comparisons.
    pub worst: CurveGap,
    pub comparisons: usize,
}

struct BatchCurves {
    /// `[seller][knot]`
    price: Vec<Vec<f64>>,
    profit: Vec<Vec<f64>>,
    surplus: f64,
}

fn batch_curves(
    market: &MultiMarket,
    est_size: usize,
    eval_size: usize,
    costs: &[f64],
    seed: u64,
    b: usize,
) -> Result<BatchCurves> {
    let mut rng = RngStream::new(seed, ESTIMATION_STREAM + b as u64);
    let draws = vec![draw_batch(market, est_size, &mut rng)];
    let schedules = (1..=market.n_sellers())
        .map(|j| build_seller_schedule(market, j, &draws, costs))
        .collect::<Result<Vec<_>>>()?;
    let eq = CompetitiveEquilibrium::from_parts(market.clone(), schedules)?;
    let mut out = BatchCurves {
        price: Vec::new(),
        profit: Vec::new(),
        surplus: 0.0,
    };
    for j in 1..=market.n_sellers() {
        let sums = curve_sums(&eq, j, costs, &[eval_size], seed, NEUTRALITY_STREAM + b as u64);
        out.price.push((0..costs.len()).map(|i| sums.price_batches(i)[0]).collect());
        out.profit.push((0..costs.len()).map(|i| sums.profit_batches(i)[0]).collect());
        out.surplus = sums.surplus[0];
    }
    Ok(out)
}

fn compare(seller: usize, statistic: &'static str, cost: f64, diffs: &[f64], tol: f64) -> Option<CurveGap> {
    let d: Vec<f64> = diffs.iter().copied().filter(|x| x.is_finite()).collect();
    if d.len() < 2 {
        return None;
    }
    let (gap, se) = mean_se(&d);
    let bound = tol.max(4.0 * se);
    Some(CurveGap {
        seller,
        statistic,
        cost,
        gap,
        se,
        bound,
        pass: gap.abs() <= bound,
    })
}

/// Whether two markets with the same primitives but different own-value
/// signals give every seller type the same expected price and profit, and
/// the buyer the same surplus.
///
/// Each of the batches estimates both markets' schedules from its own draws
/// (the same draws for both) and evaluates them on common fresh draws, so
/// the per-batch differences are paired and their spread measures all Monte
/// Carlo error, schedule estimation included. A comparison passes when
/// `|mean difference| <= max(tol, 4 SE)`.
pub fn competitive_neutrality_check(
    a: &MultiMarket,
    b: &MultiMarket,
    n_samples: usize,
    seed: u64,
    tol: f64,
) -> Result<CompetitiveNeutralityReport> {
    if a.n_sellers() != b.n_sellers() {
        return Err(Error::InvalidArgument("markets have different seller counts".into()));
    }
    if n_samples < MIN_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "need at least {MIN_SAMPLES} Monte Carlo samples, got {n_samples}"
        )));
    }
    let costs = linspace(0.0, 1.0, NEUTRALITY_KNOTS);
    let est = batch_sizes(n_samples, DEFAULT_BATCHES);
    let eval = batch_sizes((n_samples / 5).max(DEFAULT_BATCHES), DEFAULT_BATCHES);
    let pairs = (0..DEFAULT_BATCHES)
        .into_par_iter()
        .map(|k| {
            Ok((
                batch_curves(a, est[k], eval[k], &costs, seed, k)?,
                batch_curves(b, est[k], eval[k], &costs, seed, k)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut gaps = Vec::new();
    for j in 0..a.n_sellers() {
        for (i, &c) in costs.iter().enumerate() {
            let dp: Vec<f64> = pairs.iter().map(|(x, y)| x.price[j][i] - y.price[j][i]).collect();
            let dq: Vec<f64> = pairs.iter().map(|(x, y)| x.profit[j][i] - y.profit[j][i]).collect();
            gaps.extend(compare(j + 1, "expected_price", c, &dp, tol));
            gaps.extend(compare(j + 1, "profit", c, &dq, tol));
        }
    }
    let ds: Vec<f64> = pairs.iter().map(|(x, y)| x.surplus - y.surplus).collect();
    let surplus = compare(0, "buyer_surplus", f64::NAN, &ds, tol)
        .ok_or_else(|| Error::InvalidArgument("too few batches".into()))?;
    gaps.push(surplus.clone());
    let worst = gaps
        .iter()
        .max_by(|x, y| (x.gap.abs() / x.bound).total_cmp(&(y.gap.abs() / y.bound)))
        .cloned()
        .unwrap_or_else(|| surplus.clone());
    let failures: Vec<CurveGap> = gaps.iter().filter(|g| !g.pass).cloned().collect();
    Ok(CompetitiveNeutralityReport {
        pass: failures.is_empty(),
        buyer_surplus_gap: surplus,
        failures,
        worst,
        comparisons: gaps.len(),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct CompetitiveMpsReport {
    pub report: MpsReport,
    pub is_mps: bool,
    pub fine_mean: f64,
    pub coarse_mean: f64,
    pub mean_tol: f64,
    pub sos_tol: f64,
    /// Draws in which type `c` would trade under both signals.
    pub atoms: usize,
}

/// Whether seller `j`'s price at type `c` under the finer signal is a
/// mean-preserving spread of its price under the coarser one. Both schedules
/// are estimated from the same draws; the price laws are taken over the
/// draws in which type `c` is active (`θ_j >= γ_j(c)`). Tolerances widen to
/// four standard errors of the per-batch mean gap.
pub fn competitive_mps_check(
    market: &MultiMarket,
    j: usize,
    fine: &Segmentation,
    coarse: &Segmentation,
    c: f64,
    n_samples: usize,
    seed: u64,
) -> Result<CompetitiveMpsReport> {
    market.check_seller(j)?;
    if !fine.refines(coarse) {
        return Err(Error::RefinementViolated(format!("{fine} does not refine {coarse}")));
    }
    if n_samples < MIN_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "need at least {MIN_SAMPLES} Monte Carlo samples, got {n_samples}"
        )));
    }
    let mut grid = default_cost_grid();
    grid.push(c);
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let batches = draw_batches(market, n_samples, DEFAULT_BATCHES, seed, ESTIMATION_STREAM);
    let fine_s = build_seller_schedule(&market.clone().with_signal(j, fine.clone())?, j, &batches, &grid)?;
    let coarse_s = build_seller_schedule(&market.clone().with_signal(j, coarse.clone())?, j, &batches, &grid)?;
    let t = market.gamma(j, c);

    let mut fine_atoms = Vec::new();
    let mut coarse_atoms = Vec::new();
    let mut gap_batches = Vec::new();
    for batch in &batches {
        let (mut sf, mut sc, mut n) = (0.0, 0.0, 0usize);
        for s in batch[j - 1].iter().filter(|s| s.theta >= t) {
            let pf = fine_s.price(c, s.value);
            let pc = coarse_s.price(c, s.value);
            if pf >= INACTIVE_PRICE || pc >= INACTIVE_PRICE {
                continue;
            }
            fine_atoms.push((pf, 1.0));
            coarse_atoms.push((pc, 1.0));
            sf += pf;
            sc += pc;
            n += 1;
        }
        if n > 0 {
            gap_batches.push((sf - sc) / n as f64);
        }
    }
    let atoms = fine_atoms.len();
    let fine_law = StepLaw::new(fine_atoms)?;
    let coarse_law = StepLaw::new(coarse_atoms)?;
    let se = mean_se(&gap_batches).1;
    let se = if se.is_finite() { se } else { 0.0 };
    let mean_tol = MEAN_TOL.max(4.0 * se);
    let sos_tol = SOS_TOL.max(4.0 * se);
    let report = mps_check(&fine_law, &coarse_law, mean_tol, sos_tol);
    Ok(CompetitiveMpsReport {
        is_mps: report.is_mps,
        report,
        fine_mean: fine_law.mean(),
        coarse_mean: coarse_law.mean(),
        mean_tol,
        sos_tol,
        atoms,
    })
}
