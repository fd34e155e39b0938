use anyhow::Result;
use serde::Serialize;

use algorec::competition::{
    competitive_mps_check, competitive_neutrality_check, simulate, verify_best_response, CompetitiveEquilibrium,
    MultiMarket, ValueSampler,
};
use algorec::informed::{known_product_equilibrium, no_purchase_ic_check};
use algorec::mechanism::{
    allocation_substitution, build_optimal_algorithm, deviation_audit, known_cost_outcome, monopoly_benchmark,
    solve_equilibrium,
};
use algorec::numerics::linspace;
use algorec::oracle::{best_response_equilibrium, solve_screening_program, GridGame};
use algorec::segmentation::{mpc_surplus_check, neutrality_check, price_spread_check, single_crossing};
use algorec::{Distribution, SegmentedMarket, Segmentation, VirtualCost};

/// Default Monte Carlo budget of the competition checks.
const MC_SAMPLES: usize = 200_000;

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    /// Distance to the tolerance; negative on failure.
    pub margin: f64,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub pass: bool,
    pub checks: Vec<Check>,
}

#[derive(Default)]
struct Battery {
    checks: Vec<Check>,
}

impl Battery {
    fn close(&mut self, name: &str, got: f64, want: f64, tol: f64) {
        let err = (got - want).abs();
        self.checks.push(Check {
            name: name.into(),
            pass: err <= tol,
            margin: tol - err,
            detail: format!("got {got}, want {want} ± {tol}"),
        });
    }

    fn at_most(&mut self, name: &str, value: f64, bound: f64) {
        self.checks.push(Check {
            name: name.into(),
            pass: value <= bound,
            margin: bound - value,
            detail: format!("{value} <= {bound}"),
        });
    }

    fn holds(&mut self, name: &str, ok: bool, detail: String) {
        self.checks.push(Check {
            name: name.into(),
            pass: ok,
            margin: if ok { 0.0 } else { -1.0 },
            detail,
        });
    }
}

fn u() -> Distribution {
    Distribution::uniform()
}

pub fn run(mc_samples: Option<usize>, seed: u64) -> Result<VerifyReport> {
    let mut b = Battery::default();
    closed_forms(&mut b)?;
    oracle(&mut b)?;
    segmentation(&mut b)?;
    competition(&mut b, mc_samples.unwrap_or(MC_SAMPLES), seed)?;
    informed(&mut b)?;
    ironing(&mut b)?;
    Ok(VerifyReport {
        pass: b.checks.iter().all(|c| c.pass),
        checks: b.checks,
    })
}

fn closed_forms(b: &mut Battery) -> Result<()> {
    let eq = solve_equilibrium(&u(), &u(), 1.0)?;
    b.close("gamma(0.3)", eq.gamma(0.3), 0.6, 1e-8);
    b.close("pseudo_value(0.5)", eq.pseudo_value().eval(0.5)?, 0.375, 1e-8);
    let algo = eq.algorithm()?;
    b.close("threshold(0.3)", algo.threshold(0.3).value().unwrap_or(f64::NAN), 0.2, 1e-8);
    b.close("price(0.25)", eq.price(0.25), 0.375, 1e-8);
    b.close("c_bar", eq.active_cutoff(), 0.5, 1e-8);
    for c in [0.0, 0.25, 0.4] {
        b.close(&format!("profit({c})"), eq.interim_profit(c), (1.0 - 2.0 * c).powi(2) / 4.0, 1e-8);
        b.close(
            &format!("monopoly_gap({c})"),
            monopoly_benchmark(&u(), c)?.price - eq.price(c),
            0.25,
            1e-8,
        );
    }
    let w = eq.welfare();
    b.close("buyer_surplus", w.buyer_surplus, 1.0 / 12.0, 1e-6);
    b.close("seller_profit", w.seller_profit, 1.0 / 24.0, 1e-6);
    b.close("total_surplus", w.total_surplus, 1.0 / 8.0, 1e-6);
    let half = solve_equilibrium(&u(), &u(), 0.5)?.welfare();
    b.close("buyer_surplus(alpha=0.5)", half.buyer_surplus, 0.0, 1e-6);
    b.close("total_surplus(alpha=0.5)", half.total_surplus, 1.0 / 6.0, 1e-6);
    let x = allocation_substitution(&u(), &u(), true)?;
    b.close("crossing_cost", x.crossing_cost, 1.0 / 3.0, 1e-8);
    b.close("crossing_value", x.crossing_value, 2.0 / 3.0, 1e-8);
    let k = known_cost_outcome(&u(), 0.5)?;
    b.close("known_cost_profit", k.seller_profit, 0.0, 1e-8);
    b.close("known_cost_buyer", k.buyer_surplus, 0.125, 1e-8);
    Ok(())
}

fn oracle(b: &mut Battery) -> Result<()> {
    let eq = solve_equilibrium(&u(), &u(), 1.0)?;
    let game = GridGame::with_equilibrium_prices(&eq)?;
    let br = best_response_equilibrium(&game, &build_optimal_algorithm(&u(), &u(), 1.0)?);
    let gap = br
        .costs
        .iter()
        .zip(&br.prices)
        .zip(&br.active)
        .filter(|((c, _), a)| **a && eq.is_active(**c))
        .map(|((&c, &p), _)| (p - eq.price(c)).abs())
        .fold(0.0, f64::max);
    b.at_most("oracle_price_gap", gap, 0.01);
    b.close("oracle_buyer_surplus", br.buyer_surplus, 1.0 / 12.0, 0.002);
    let sp = solve_screening_program(&game, 1.0)?;
    b.close("screening_objective", sp.objective, 1.0 / 12.0, 0.002);
    Ok(())
}

fn segmentation(b: &mut Battery) -> Result<()> {
    let chain: Vec<Segmentation> = vec![
        Segmentation::none(),
        Segmentation::uniform(2)?,
        Segmentation::uniform(4)?,
        Segmentation::full(),
    ];
    let markets = chain
        .iter()
        .map(|s| SegmentedMarket::new(&u(), &u(), 1.0, s.clone()))
        .collect::<algorec::Result<Vec<_>>>()?;
    for (s, m) in chain.iter().zip(&markets) {
        b.close(&format!("buyer_surplus[{s}]"), m.buyer_surplus()?, 1.0 / 12.0, 1e-6);
        if !std::ptr::eq(m, &markets[0]) {
            let r = neutrality_check(&markets[0], m, 1e-6)?;
            b.at_most(&format!("neutrality_profit_gap[{s}]"), r.profit_gap, 1e-6);
        }
    }
    for v in [0.25, 0.5, 0.75, 1.0] {
        let binary = if v < 0.5 {
            7.0 * v * v / 16.0 - v / 16.0
        } else {
            7.0 * v * v / 16.0 - v / 8.0 - 1.0 / 64.0
        };
        b.close(&format!("w_none({v})"), markets[0].expected_surplus_at_value(v)?, 7.0 * v * v / 16.0 - v / 8.0, 1e-6);
        b.close(&format!("w_binary({v})"), markets[1].expected_surplus_at_value(v)?, binary, 1e-6);
        b.close(&format!("w_full({v})"), markets[3].expected_surplus_at_value(v)?, v * v / 4.0, 1e-6);
    }
    for c in [0.0, 0.1, 0.2, 0.3, 0.4] {
        for w in markets.windows(2) {
            let (coarse, fine) = (&w[0], &w[1]);
            let tag = format!("{}>{}@{c}", fine.segmentation(), coarse.segmentation());
            let r = price_spread_check(fine, coarse, c)?;
            b.holds(&format!("price_mps[{tag}]"), r.is_mps, format!("{r:?}"));
            let r = mpc_surplus_check(fine, coarse, c)?;
            b.holds(&format!("surplus_mpc[{tag}]"), r.is_mps, format!("{r:?}"));
        }
        for m in &markets[1..] {
            let ok = single_crossing(m, &markets[0], c, 1000)?;
            b.holds(&format!("single_crossing[{}@{c}]", m.segmentation()), ok, String::new());
        }
    }
    Ok(())
}

fn competition(b: &mut Battery, n: usize, seed: u64) -> Result<()> {
    let grid = linspace(0.0, 1.0, 101);
    let one = MultiMarket::new(vec![u()], ValueSampler::Iid(u()))?;
    let eq1 = CompetitiveEquilibrium::estimate(one, n, &grid, seed)?;
    let s = eq1.schedule(1).single().expect("unsegmented seller");
    let margin = (0..s.costs.len())
        .filter(|&i| s.active[i] && s.se[i].is_finite())
        .map(|i| 4.0 * s.se[i] - (s.prices[i] - (1.0 + 2.0 * s.costs[i]) / 4.0).abs())
        .fold(f64::INFINITY, f64::min);
    b.at_most("mc_schedule_4se", -margin, 0.0);
    let br = verify_best_response(&eq1, 1, 0.25, &linspace(0.0, 1.0, 100), n, seed)?;
    b.at_most("mc_best_response_gain", br.max_gain, 1e-3);

    let two = MultiMarket::new(vec![u(), u()], ValueSampler::Iid(u()))?;
    let eq2 = CompetitiveEquilibrium::estimate(two.clone(), n, &grid, seed)?;
    let sim = simulate(&eq2, n, seed)?;
    b.at_most("mc_agreement", 0.999 - sim.agreement, 0.0);
    let binary = Segmentation::uniform(2)?;
    for (name, sig) in [("binary", binary.clone()), ("full", Segmentation::full())] {
        let other = two.clone().with_signals(vec![sig.clone(), sig])?;
        let r = competitive_neutrality_check(&two, &other, n, seed, 1e-6)?;
        b.holds(
            &format!("mc_neutrality[none~{name}]"),
            r.pass,
            format!("worst {:?}", r.worst),
        );
    }
    for c in [0.0, 0.2] {
        let r = competitive_mps_check(&two, 1, &binary, &Segmentation::none(), c, n, seed)?;
        b.holds(&format!("mc_price_mps@{c}"), r.is_mps, format!("{:?}", r.report));
    }
    Ok(())
}

fn informed(b: &mut Battery) -> Result<()> {
    for (c0, profit, price) in [(0.0, 0.125, 0.125), (0.3, 0.02, 0.3 + 0.02 / 0.7), (0.6, 0.0, 0.6)] {
        let o = known_product_equilibrium(&u(), c0)?;
        b.close(&format!("guaranteed_profit({c0})"), o.seller_profit, profit, 1e-6);
        b.close(&format!("p_star({c0})"), o.p_star, price, 1e-6);
    }
    b.close("informed_buyer(0)", known_product_equilibrium(&u(), 0.0)?.buyer_surplus, 0.375, 1e-6);
    let p2 = Distribution::power(2.0)?;
    let r = no_purchase_ic_check(&u(), &u())?;
    b.at_most("ic_uniform_uniform", r.worst_value.abs(), 1e-9);
    let r = no_purchase_ic_check(&p2, &u())?;
    b.holds("ic_power_uniform", r.holds && r.worst_value < 0.0, format!("{r:?}"));
    let r = no_purchase_ic_check(&u(), &p2)?;
    b.holds("ic_uniform_power_fails", !r.holds, format!("{r:?}"));
    Ok(())
}

fn ironing(b: &mut Battery) -> Result<()> {
    let f = Distribution::piecewise_linear(vec![(0.0, 0.0), (0.5, 0.2), (0.6, 0.7), (1.0, 1.0)])?;
    let vc = VirtualCost::new(f.clone(), 1.0)?;
    b.holds("ironing_applied", vc.is_ironed(), String::new());
    b.at_most("ironed_max_decrease", vc.max_decrease(10_000), 1e-9);
    let eq = solve_equilibrium(&f, &u(), 1.0)?;
    let algo = eq.algorithm()?;
    let d = deviation_audit(&eq, &algo, 200, 400, 1.0);
    b.at_most("ironed_deviation_gain", d.max_gain, 1e-6);
    Ok(())
}
