//! Acceptance criteria 1–11, one PASS/FAIL line each.
//!
//! Run with `cargo test -p algorec-core --test acceptance -- --nocapture`.

use std::time::Instant;

use algorec::competition::{
    competitive_mps_check, competitive_neutrality_check, simulate, type_curves, verify_best_response,
    CompetitiveEquilibrium, MultiMarket, ValueSampler,
};
use algorec::informed::{known_product_equilibrium, no_purchase_ic_check};
use algorec::mechanism::{
    allocation_substitution, build_optimal_algorithm, deviation_audit, known_cost_outcome, monopoly_benchmark,
    solve_equilibrium,
};
use algorec::numerics::linspace;
use algorec::oracle::{best_response_equilibrium, solve_screening_program, GridGame};
use algorec::segmentation::{mpc_surplus_check, neutrality_check, price_spread_check, single_crossing};
use algorec::{Distribution, Result, SegmentedMarket, Segmentation, VirtualCost};

const MC_SAMPLES: usize = 1_000_000;
const SEED: u64 = 20_240_601;

fn u() -> Distribution {
    Distribution::uniform()
}

/// Collects failed sub-checks of one criterion.
#[derive(Default)]
struct Tally {
    failures: Vec<String>,
    checks: usize,
}

impl Tally {
    fn close(&mut self, what: &str, got: f64, want: f64, tol: f64) {
        self.ok(what, (got - want).abs() <= tol, format!("got {got}, want {want} ± {tol}"));
    }

    fn ok(&mut self, what: &str, pass: bool, detail: String) {
        self.checks += 1;
        if !pass {
            self.failures.push(format!("{what}: {detail}"));
        }
    }
}

fn golden(t: &mut Tally) -> Result<()> {
    let eq = solve_equilibrium(&u(), &u(), 1.0)?;
    let algo = eq.algorithm()?;
    for c in linspace(0.0, 0.5, 11) {
        t.close(&format!("gamma({c})"), eq.gamma(c), 2.0 * c, 1e-8);
    }
    for v in linspace(0.0, 1.0, 11) {
        t.close(&format!("y({v})"), eq.pseudo_value().eval(v)?, (1.0 + v) / 4.0, 1e-8);
    }
    t.close("v_hat(0.3)", algo.threshold(0.3).value().unwrap_or(f64::NAN), 0.2, 1e-8);
    t.close("p*(0.25)", eq.price(0.25), 0.375, 1e-8);
    t.close("c_bar", eq.active_cutoff(), 0.5, 1e-8);
    for c in [0.0, 0.25, 0.4] {
        t.close(&format!("profit({c})"), eq.interim_profit(c), (1.0 - 2.0 * c).powi(2) / 4.0, 1e-8);
    }
    for c in linspace(0.0, 0.5, 11) {
        let m = monopoly_benchmark(&u(), c)?;
        t.close(&format!("p_m({c})"), m.price, (1.0 + c) / 2.0, 1e-8);
        t.close(&format!("gap({c})"), m.price - eq.price(c), 0.25, 1e-8);
    }
    Ok(())
}

fn welfare(t: &mut Tally) -> Result<()> {
    let w = solve_equilibrium(&u(), &u(), 1.0)?.welfare();
    t.close("buyer", w.buyer_surplus, 1.0 / 12.0, 1e-6);
    t.close("seller", w.seller_profit, 1.0 / 24.0, 1e-6);
    t.close("total", w.total_surplus, 1.0 / 8.0, 1e-6);
    let w = solve_equilibrium(&u(), &u(), 0.5)?.welfare();
    t.close("buyer(0.5)", w.buyer_surplus, 0.0, 1e-6);
    t.close("total(0.5)", w.total_surplus, 1.0 / 6.0, 1e-6);
    Ok(())
}

fn crossing(t: &mut Tally) -> Result<()> {
    let x = allocation_substitution(&u(), &u(), true)?;
    t.close("c*", x.crossing_cost, 1.0 / 3.0, 1e-8);
    t.close("v*", x.crossing_value, 2.0 / 3.0, 1e-8);
    Ok(())
}

fn oracle(t: &mut Tally) -> Result<()> {
    let start = Instant::now();
    let eq = solve_equilibrium(&u(), &u(), 1.0)?;
    let game = GridGame::with_equilibrium_prices(&eq)?;
    t.ok(
        "grid",
        game.costs.len() == 400 && game.values.len() == 400 && game.prices.len() >= 800,
        format!("{}x{}x{}", game.costs.len(), game.values.len(), game.prices.len()),
    );
    let br = best_response_equilibrium(&game, &build_optimal_algorithm(&u(), &u(), 1.0)?);
    for (i, &c) in br.costs.iter().enumerate() {
        if eq.is_active(c) {
            t.ok(&format!("active({c})"), br.active[i], "atom inactive on the grid".into());
            t.close(&format!("price({c})"), br.prices[i], eq.price(c), 0.01);
        }
    }
    t.close("buyer_surplus", br.buyer_surplus, 1.0 / 12.0, 0.002);
    let sp = solve_screening_program(&game, 1.0)?;
    t.close("program_objective", sp.objective, 1.0 / 12.0, 0.002);
    let secs = start.elapsed().as_secs_f64();
    t.ok("runtime", secs < 60.0, format!("{secs:.1}s"));
    Ok(())
}

fn chain() -> Result<Vec<SegmentedMarket>> {
    [Segmentation::none(), Segmentation::uniform(2)?, Segmentation::uniform(4)?, Segmentation::full()]
        .into_iter()
        .map(|s| SegmentedMarket::new(&u(), &u(), 1.0, s))
        .collect()
}

fn neutrality(t: &mut Tally) -> Result<()> {
    let markets = chain()?;
    let grid = linspace(0.0, 1.0, 100);
    let base: Vec<f64> = grid.iter().map(|&c| markets[0].profit(c)).collect::<Result<_>>()?;
    for m in &markets {
        let s = m.segmentation();
        t.close(&format!("buyer[{s}]"), m.buyer_surplus()?, 1.0 / 12.0, 1e-6);
        for (&c, b) in grid.iter().zip(&base) {
            t.close(&format!("profit[{s}]({c})"), m.profit(c)?, *b, 1e-6);
        }
        let r = neutrality_check(&markets[0], m, 1e-6)?;
        t.ok(&format!("report[{s}]"), r.pass, format!("{r:?}"));
    }
    Ok(())
}

fn fig3(t: &mut Tally) -> Result<()> {
    let markets = chain()?;
    for v in [0.25, 0.5, 0.75, 1.0] {
        let binary = if v < 0.5 {
            7.0 * v * v / 16.0 - v / 16.0
        } else {
            7.0 * v * v / 16.0 - v / 8.0 - 1.0 / 64.0
        };
        t.close(&format!("none({v})"), markets[0].expected_surplus_at_value(v)?, 7.0 * v * v / 16.0 - v / 8.0, 1e-6);
        t.close(&format!("binary({v})"), markets[1].expected_surplus_at_value(v)?, binary, 1e-6);
        t.close(&format!("full({v})"), markets[3].expected_surplus_at_value(v)?, v * v / 4.0, 1e-6);
    }
    Ok(())
}

fn stochastic_order(t: &mut Tally) -> Result<()> {
    let markets = chain()?;
    for c in [0.0, 0.1, 0.2, 0.3, 0.4] {
        for w in markets.windows(2) {
            let tag = format!("{}>{}@{c}", w[1].segmentation(), w[0].segmentation());
            let r = price_spread_check(&w[1], &w[0], c)?;
            t.ok(&format!("price[{tag}]"), r.is_mps, format!("{r:?}"));
            let r = mpc_surplus_check(&w[1], &w[0], c)?;
            t.ok(&format!("surplus[{tag}]"), r.is_mps, format!("{r:?}"));
        }
        for m in &markets[1..] {
            let ok = single_crossing(m, &markets[0], c, 1000)?;
            t.ok(&format!("crossing[{}@{c}]", m.segmentation()), ok, String::new());
        }
    }
    Ok(())
}

fn competition(t: &mut Tally) -> Result<()> {
    let start = Instant::now();
    let grid = linspace(0.0, 1.0, 101);
    let one = MultiMarket::new(vec![u()], ValueSampler::Iid(u()))?;
    let eq1 = CompetitiveEquilibrium::estimate(one, MC_SAMPLES, &grid, SEED)?;
    let s = eq1.schedule(1).single().expect("unsegmented seller");
    for i in 0..s.costs.len() {
        let c = s.costs[i];
        if c < s.c_bar && s.active[i] {
            let want = (1.0 + 2.0 * c) / 4.0;
            let err = (s.prices[i] - want).abs();
            t.ok(&format!("J1 price({c})"), err <= 4.0 * s.se[i], format!("err {err}, se {}", s.se[i]));
        }
    }
    for c in [0.0, 0.1, 0.25, 0.4] {
        let br = verify_best_response(&eq1, 1, c, &linspace(0.0, 1.0, 201), MC_SAMPLES, SEED)?;
        t.ok(&format!("J1 best response({c})"), br.max_gain <= 1e-3, format!("{br:?}"));
    }
    let top = type_curves(&eq1, 1, &[s.c_bar], MC_SAMPLES, SEED)?;
    let p = top.profit[0];
    t.ok("J1 top profit", p.mean.abs() <= 4.0 * p.se + 1e-12, format!("{p:?}"));

    let two = MultiMarket::new(vec![u(), u()], ValueSampler::Iid(u()))?;
    let eq2 = CompetitiveEquilibrium::estimate(two.clone(), MC_SAMPLES, &grid, SEED)?;
    let sim = simulate(&eq2, MC_SAMPLES, SEED)?;
    t.ok("J2 agreement", sim.agreement >= 0.999, format!("{}", sim.agreement));
    let binary = Segmentation::uniform(2)?;
    let signals = [Segmentation::none(), binary.clone(), Segmentation::full()];
    let markets: Vec<MultiMarket> = signals
        .iter()
        .map(|s| two.clone().with_signals(vec![s.clone(), s.clone()]))
        .collect::<Result<_>>()?;
    for (a, b) in [(0, 1), (0, 2), (1, 2)] {
        let r = competitive_neutrality_check(&markets[a], &markets[b], MC_SAMPLES, SEED, 1e-6)?;
        t.ok(
            &format!("J2 neutrality {}~{}", signals[a], signals[b]),
            r.pass,
            format!("worst {:?}", r.worst),
        );
    }
    for c in [0.0, 0.2] {
        let r = competitive_mps_check(&two, 1, &binary, &Segmentation::none(), c, MC_SAMPLES, SEED)?;
        t.ok(&format!("J2 price mps@{c}"), r.is_mps, format!("{:?}", r.report));
    }
    let secs = start.elapsed().as_secs_f64();
    t.ok("runtime", secs < 180.0, format!("{secs:.1}s"));
    Ok(())
}

fn informed(t: &mut Tally) -> Result<()> {
    for (c0, profit, price) in [(0.0, 0.125, 0.125), (0.3, 0.02, 0.3 + 0.02 / 0.7), (0.6, 0.0, 0.6)] {
        let o = known_product_equilibrium(&u(), c0)?;
        t.close(&format!("profit({c0})"), o.seller_profit, profit, 1e-6);
        t.close(&format!("p*({c0})"), o.p_star, price, 1e-6);
    }
    t.close("buyer(0)", known_product_equilibrium(&u(), 0.0)?.buyer_surplus, 0.375, 1e-6);
    let p2 = Distribution::power(2.0)?;
    let r = no_purchase_ic_check(&u(), &u())?;
    t.ok("ic uniform/uniform", r.holds && r.worst_value.abs() <= 1e-9, format!("{r:?}"));
    let r = no_purchase_ic_check(&p2, &u())?;
    t.ok("ic power/uniform", r.holds && r.worst_value < 0.0, format!("{r:?}"));
    let r = no_purchase_ic_check(&u(), &p2)?;
    t.ok("ic uniform/power fails", !r.holds, format!("{r:?}"));
    Ok(())
}

fn known_cost(t: &mut Tally) -> Result<()> {
    let k = known_cost_outcome(&u(), 0.5)?;
    t.close("profit", k.seller_profit, 0.0, 1e-8);
    t.close("buyer", k.buyer_surplus, 0.125, 1e-8);
    t.close("threshold", k.threshold, 0.5, 1e-8);
    t.close("price", k.price, 0.5, 1e-8);
    Ok(())
}

fn ironing(t: &mut Tally) -> Result<()> {
    let f = Distribution::piecewise_linear(vec![(0.0, 0.0), (0.5, 0.2), (0.6, 0.7), (1.0, 1.0)])?;
    let vc = VirtualCost::new(f.clone(), 1.0)?;
    t.ok("raw gamma decreases", (0..1000).any(|i| {
        let c = i as f64 / 1000.0;
        vc.raw(c + 1e-3) < vc.raw(c) - 1e-6
    }), String::new());
    t.ok("ironed", vc.is_ironed(), String::new());
    let dec = vc.max_decrease(10_000);
    t.ok("nondecreasing", dec <= 1e-9, format!("max decrease {dec}"));
    let regions = vc.ironed_intervals();
    for c in linspace(0.0, 1.0, 1001) {
        if regions.iter().all(|&(a, b)| c < a - 1e-3 || c > b + 1e-3) {
            t.close(&format!("off-region({c})"), vc.eval(c), vc.raw(c), 1e-6);
        }
    }
    let eq = solve_equilibrium(&f, &u(), 1.0)?;
    let d = deviation_audit(&eq, &eq.algorithm()?, 200, 400, 1.0);
    t.ok("deviation", d.max_gain <= 1e-6, format!("{d:?}"));
    Ok(())
}

type Criterion = fn(&mut Tally) -> Result<()>;

#[test]
fn acceptance() {
    let criteria: [(&str, Criterion); 11] = [
        ("uniform/uniform golden values", golden),
        ("welfare triple", welfare),
        ("allocation crossing", crossing),
        ("grid oracle equivalence", oracle),
        ("segmentation neutrality", neutrality),
        ("expected surplus curves", fig3),
        ("stochastic-order battery", stochastic_order),
        ("competition", competition),
        ("informed buyer", informed),
        ("known cost", known_cost),
        ("ironing", ironing),
    ];
    let mut failed = Vec::new();
    for (k, (name, run)) in criteria.iter().enumerate() {
        let mut t = Tally::default();
        let start = Instant::now();
        if let Err(e) = run(&mut t) {
            t.failures.push(format!("error: {e}"));
        }
        let pass = t.failures.is_empty();
        println!(
            "{} {:>2} {name} ({} checks, {:.1}s)",
            if pass { "PASS" } else { "FAIL" },
            k + 1,
            t.checks,
            start.elapsed().as_secs_f64()
        );
        for f in t.failures.iter().take(5) {
            println!("       {f}");
        }
        if !pass {
            failed.push(k + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
