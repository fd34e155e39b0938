use std::path::PathBuf;

use anyhow::Result;

use algorec::mechanism::{monopoly_benchmark, Threshold};
use algorec::numerics::linspace;
use algorec::{Distribution, Equilibrium, SegmentedMarket, Segmentation, Tolerances, VirtualCost};

use crate::output::{fmt_g, fmt_opt, OutDir};

const POINTS: usize = 101;

fn threshold_field(t: Threshold) -> String {
    fmt_opt(t.value())
}

/// Figure data for the buyer-optimal algorithm on `(F, G)`.
pub fn export(f: &Distribution, g: &Distribution, tol: Tolerances, out: &OutDir) -> Result<Vec<PathBuf>> {
    let vc = VirtualCost::with_tolerances(f.clone(), 1.0, tol)?;
    let eq = Equilibrium::from_virtual_cost(vc.clone(), g)?;
    let algo = eq.algorithm()?;
    let costs = linspace(0.0, 1.0, POINTS);
    let prices = linspace(0.0, 1.0, POINTS);
    let mut files = Vec::new();

    let rows: Vec<Vec<String>> = prices
        .iter()
        .map(|&p| vec![fmt_g(p), threshold_field(algo.threshold(p))])
        .collect();
    files.push(out.write_csv("fig1_threshold.csv", &["p", "v_hat"], &rows)?);

    let rows: Vec<Vec<String>> = costs
        .iter()
        .map(|&c| vec![fmt_g(c), fmt_g(eq.gamma(c)), fmt_opt(eq.is_active(c).then(|| eq.price(c)))])
        .collect();
    files.push(out.write_csv("fig1_trade.csv", &["c", "gamma", "p_star"], &rows)?);

    let monopoly = costs
        .iter()
        .map(|&c| monopoly_benchmark(g, c))
        .collect::<algorec::Result<Vec<_>>>()?;
    let rows: Vec<Vec<String>> = costs
        .iter()
        .zip(&monopoly)
        .map(|(&c, m)| {
            vec![
                fmt_g(c),
                fmt_opt(eq.is_active(c).then(|| eq.price(c))),
                fmt_opt((m.profit > 0.0).then_some(m.price)),
            ]
        })
        .collect();
    files.push(out.write_csv("fig2_prices.csv", &["c", "p_star", "p_monopoly"], &rows)?);

    // value cutoffs of the two trade regions
    let rows: Vec<Vec<String>> = costs
        .iter()
        .zip(&monopoly)
        .map(|(&c, m)| {
            let bo = eq.gamma(c).min(1.0);
            let ep = if m.profit > 0.0 { m.price } else { 1.0 };
            vec![fmt_g(c), fmt_g(bo), fmt_g(ep)]
        })
        .collect();
    files.push(out.write_csv("fig2_regions.csv", &["c", "v_buyer_optimal", "v_ex_post"], &rows)?);

    let none = SegmentedMarket::from_virtual_cost(vc.clone(), g, Segmentation::none())?;
    let binary = SegmentedMarket::from_virtual_cost(vc.clone(), g, Segmentation::uniform(2)?)?;
    let full = SegmentedMarket::from_virtual_cost(vc, g, Segmentation::full())?;
    let rows: Vec<Vec<String>> = prices
        .iter()
        .map(|&p| {
            Ok(vec![
                fmt_g(p),
                threshold_field(none.cell_threshold(0, p)?),
                threshold_field(binary.cell_threshold(0, p)?),
                threshold_field(binary.cell_threshold(1, p)?),
            ])
        })
        .collect::<Result<_>>()?;
    files.push(out.write_csv("fig3_thresholds.csv", &["p", "none", "binary_low", "binary_high"], &rows)?);

    let rows: Vec<Vec<String>> = linspace(0.0, 1.0, POINTS)
        .into_iter()
        .map(|v| {
            Ok(vec![
                fmt_g(v),
                fmt_g(none.expected_surplus_at_value(v)?),
                fmt_g(binary.expected_surplus_at_value(v)?),
                fmt_g(full.expected_surplus_at_value(v)?),
            ])
        })
        .collect::<Result<_>>()?;
    files.push(out.write_csv("fig3_surplus.csv", &["v", "w_none", "w_binary", "w_full"], &rows)?);
    Ok(files)
}
