use anyhow::{Context, Result};
use serde_json::json;

use algorec::competition::{
    simulate, CellSchedule, CompetitiveEquilibrium, MarketConfig, DEFAULT_SAMPLES, MIN_SAMPLES,
};
use algorec::distributions::parse_distribution_spec;
use algorec::informed::{guaranteed_profit, known_product_equilibrium, no_purchase_ic_check_with, IC_TOL};
use algorec::mechanism::{buyer_obedience_check, deviation_audit};
use algorec::numerics::linspace;
use algorec::segmentation::{neutrality_check, NEUTRALITY_TOL};
use algorec::{Distribution, Equilibrium, SegmentedMarket, Segmentation, Tolerances, VirtualCost};

use crate::output::{fmt_g, fmt_opt, OutDir};
use crate::{figures, verify, Cli, Command, Format, Invalid};

const CURVE_POINTS: usize = 101;

pub fn run(cli: &Cli) -> Result<u8> {
    let tol = tolerances(cli)?;
    match &cli.command {
        Command::Solve { f, g, alpha } => solve(cli, tol, f, g, *alpha),
        Command::Segment {
            f,
            g,
            alpha,
            seg,
            compare,
        } => segment(cli, tol, f, g, *alpha, seg, compare.as_deref()),
        Command::Compete { market, samples, seed } => compete(cli, market, *samples, *seed),
        Command::Informed { g, c0, check_ic, f } => informed(cli, g, *c0, *check_ic, f.as_deref()),
        Command::Verify { seed } => {
            let out = OutDir::create(&cli.out)?;
            let report = verify::run(cli.mc_samples, *seed)?;
            for c in &report.checks {
                println!("{} {} (margin {})", if c.pass { "PASS" } else { "FAIL" }, c.name, fmt_g(c.margin));
            }
            out.write_json("verify.json", &report)?;
            out.write_json(
                "summary.json",
                &json!({"command": "verify", "pass": report.pass, "checks": report.checks.len()}),
            )?;
            Ok(if report.pass { 0 } else { 1 })
        }
        Command::Export { f, g } => {
            let out = OutDir::create(&cli.out)?;
            let files = figures::export(&law("--F", f)?, &law("--G", g)?, tol, &out)?;
            for p in &files {
                println!("{}", p.display());
            }
            Ok(0)
        }
    }
}

fn tolerances(cli: &Cli) -> Result<Tolerances> {
    let mut tol = Tolerances::default();
    for (name, value, slot) in [
        ("--quad-tol", cli.quad_tol, &mut tol.quad_tol),
        ("--root-tol", cli.root_tol, &mut tol.root_tol),
    ] {
        if let Some(v) = value {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Invalid(format!("{name} must be positive, got {v}")).into());
            }
            *slot = v;
        }
    }
    Ok(tol)
}

fn law(flag: &str, spec: &str) -> Result<Distribution> {
    parse_distribution_spec(spec).with_context(|| format!("{flag} `{spec}`"))
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Invalid(format!("--alpha must lie in [0, 1], got {alpha}")).into());
    }
    Ok(())
}

fn solve(cli: &Cli, tol: Tolerances, f: &str, g: &str, alpha: f64) -> Result<u8> {
    check_alpha(alpha)?;
    let (fl, gl) = (law("--F", f)?, law("--G", g)?);
    let vc = VirtualCost::with_tolerances(fl, alpha, tol)?;
    let eq = Equilibrium::from_virtual_cost(vc, &gl)?;
    let algo = eq.algorithm()?;
    let welfare = eq.welfare();
    let obedience = buyer_obedience_check(&algo, &eq, &gl);
    let deviation = deviation_audit(&eq, &algo, 101, 401, 1.0);

    let out = OutDir::create(&cli.out)?;
    let costs = linspace(0.0, 1.0, CURVE_POINTS);
    let schedule: Vec<Vec<String>> = costs
        .iter()
        .map(|&c| {
            vec![
                fmt_g(c),
                fmt_g(eq.gamma(c)),
                fmt_opt(eq.is_active(c).then(|| eq.price(c))),
                fmt_g(eq.trade_probability(c)),
                fmt_g(eq.interim_profit(c)),
            ]
        })
        .collect();
    let thresholds: Vec<Vec<String>> = linspace(0.0, 1.0, CURVE_POINTS)
        .into_iter()
        .map(|p| vec![fmt_g(p), fmt_opt(algo.threshold(p).value())])
        .collect();
    write_curve(cli, &out, "schedule", &["c", "gamma", "price", "trade_probability", "profit"], &schedule)?;
    write_curve(cli, &out, "threshold", &["p", "v_hat"], &thresholds)?;
    let summary = json!({
        "command": "solve",
        "F": f,
        "G": g,
        "alpha": alpha,
        "buyer_surplus": welfare.buyer_surplus,
        "seller_profit": welfare.seller_profit,
        "total_surplus": welfare.total_surplus,
        "c_bar": eq.active_cutoff(),
        "checks": {"obedience": obedience, "deviation": deviation},
    });
    let path = out.write_json("summary.json", &summary)?;
    println!(
        "buyer_surplus={} seller_profit={} total_surplus={} c_bar={}",
        fmt_g(welfare.buyer_surplus),
        fmt_g(welfare.seller_profit),
        fmt_g(welfare.total_surplus),
        fmt_g(eq.active_cutoff())
    );
    println!("{}", path.display());
    Ok(0)
}

/// Split a list of partitions. `|` separates explicitly; otherwise runs of
/// numeric comma-separated tokens are grouped into one breakpoint list.
pub fn split_partitions(list: &str) -> Vec<String> {
    if list.contains('|') {
        return list.split('|').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
    }
    let mut out: Vec<String> = Vec::new();
    let mut numeric = false;
    for tok in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let is_num = tok.parse::<f64>().is_ok();
        match out.last_mut() {
            Some(last) if is_num && numeric => {
                last.push(',');
                last.push_str(tok);
            }
            _ => out.push(tok.to_string()),
        }
        numeric = is_num;
    }
    out
}

fn parse_seg(spec: &str) -> Result<Segmentation> {
    spec.parse::<Segmentation>().with_context(|| format!("--seg `{spec}`"))
}

fn segment(
    cli: &Cli,
    tol: Tolerances,
    f: &str,
    g: &str,
    alpha: f64,
    seg: &str,
    compare: Option<&str>,
) -> Result<u8> {
    check_alpha(alpha)?;
    let (fl, gl) = (law("--F", f)?, law("--G", g)?);
    let vc = VirtualCost::with_tolerances(fl, alpha, tol)?;
    let mut specs = vec![seg.to_string()];
    specs.extend(compare.map(split_partitions).unwrap_or_default());
    let markets = specs
        .iter()
        .map(|s| Ok(SegmentedMarket::from_virtual_cost(vc.clone(), &gl, parse_seg(s)?)?))
        .collect::<Result<Vec<_>>>()?;

    let out = OutDir::create(&cli.out)?;
    let costs = linspace(0.0, 1.0, CURVE_POINTS);
    let mut rows = Vec::new();
    let mut entries = Vec::new();
    for (spec, m) in specs.iter().zip(&markets) {
        let agg = m.aggregate(CURVE_POINTS)?;
        for (i, &c) in costs.iter().enumerate() {
            rows.push(vec![
                spec.clone(),
                fmt_g(c),
                fmt_opt(agg.expected_price[i]),
                fmt_g(agg.profit[i]),
            ]);
        }
        entries.push(json!({
            "segmentation": spec,
            "buyer_surplus": m.buyer_surplus()?,
            "seller_profit": m.seller_profit()?,
        }));
    }
    let surplus: Vec<Vec<String>> = linspace(0.0, 1.0, CURVE_POINTS)
        .into_iter()
        .map(|v| {
            let mut row = vec![fmt_g(v)];
            for m in &markets {
                row.push(fmt_g(m.expected_surplus_at_value(v)?));
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;
    let mut header = vec!["v".to_string()];
    header.extend(specs.iter().map(|s| format!("w[{s}]")));
    write_curve(cli, &out, "segment_curves", &["segmentation", "c", "expected_price", "profit"], &rows)?;
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    write_curve(cli, &out, "segment_surplus", &header_refs, &surplus)?;

    let mut checks = Vec::new();
    for (spec, m) in specs.iter().zip(&markets).skip(1) {
        let r = neutrality_check(&markets[0], m, NEUTRALITY_TOL)?;
        println!(
            "{} neutrality {} vs {}: profit_gap={} surplus_gap={}",
            if r.pass { "PASS" } else { "FAIL" },
            specs[0],
            spec,
            fmt_g(r.profit_gap),
            fmt_g(r.surplus_gap)
        );
        checks.push(json!({"against": spec, "report": r}));
    }
    let path = out.write_json(
        "summary.json",
        &json!({
            "command": "segment",
            "F": f,
            "G": g,
            "alpha": alpha,
            "c_bar": markets[0].active_cutoff(),
            "segmentations": entries,
            "neutrality": checks,
        }),
    )?;
    println!("{}", path.display());
    Ok(0)
}

fn compete(cli: &Cli, path: &std::path::Path, samples: Option<usize>, seed: Option<u64>) -> Result<u8> {
    if !path.exists() {
        return Err(Invalid(format!("--market: {} does not exist", path.display())).into());
    }
    let cfg = MarketConfig::from_path(path)?;
    let market = cfg.build()?;
    let n = cli.mc_samples.or(samples).or(cfg.samples).unwrap_or(DEFAULT_SAMPLES);
    if n < MIN_SAMPLES {
        return Err(Invalid(format!("samples must be at least {MIN_SAMPLES}, got {n}")).into());
    }
    let seed = seed.or(cfg.seed).unwrap_or(0);
    let knots = cfg.cost_grid.unwrap_or(algorec::competition::DEFAULT_COST_KNOTS);
    if knots < 2 {
        return Err(Invalid(format!("cost_grid must have at least 2 knots, got {knots}")).into());
    }
    let eq = CompetitiveEquilibrium::estimate(market, n, &linspace(0.0, 1.0, knots), seed)?;
    let sim = simulate(&eq, (n / 5).max(MIN_SAMPLES), seed)?;

    let out = OutDir::create(&cli.out)?;
    let mut sellers = Vec::new();
    for (j, sched) in eq.schedules().iter().enumerate() {
        let mut cells = Vec::new();
        for (k, cell) in sched.cells().iter().enumerate() {
            match cell {
                CellSchedule::Pooled(s) => {
                    let rows: Vec<Vec<String>> = (0..s.costs.len())
                        .map(|i| {
                            vec![
                                fmt_g(s.costs[i]),
                                fmt_opt(s.active[i].then_some(s.prices[i])),
                                fmt_opt(s.active[i].then_some(s.se[i])),
                                fmt_g(s.acceptance[i]),
                            ]
                        })
                        .collect();
                    write_curve(
                        cli,
                        &out,
                        &format!("schedule_seller{}_cell{k}", j + 1),
                        &["c", "price", "se", "acceptance"],
                        &rows,
                    )?;
                    cells.push(json!({
                        "cell": k, "mode": "pooled", "c_bar": s.c_bar, "repair": s.repair,
                        "thin_knots": s.thin_knots, "max_se": s.se.iter().copied().filter(|x| x.is_finite()).fold(0.0, f64::max),
                    }));
                }
                CellSchedule::Revealed(_) => cells.push(json!({"cell": k, "mode": "revealed"})),
            }
        }
        sellers.push(json!({"seller": j + 1, "signal": sched.signal().to_string(), "cells": cells}));
    }
    let path = out.write_json(
        "summary.json",
        &json!({
            "command": "compete",
            "market": path.display().to_string(),
            "samples": n,
            "seed": seed,
            "buyer_surplus": sim.buyer_surplus,
            "simulation": sim,
            "sellers": sellers,
        }),
    )?;
    println!(
        "buyer_surplus={} (se {}) agreement={}",
        fmt_g(sim.buyer_surplus.mean),
        fmt_g(sim.buyer_surplus.se),
        fmt_g(sim.agreement)
    );
    println!("{}", path.display());
    Ok(0)
}

fn informed(cli: &Cli, g: &str, c0: Option<f64>, check_ic: bool, f: Option<&str>) -> Result<u8> {
    let gl = law("--G", g)?;
    let out = OutDir::create(&cli.out)?;
    if check_ic {
        let f = f.ok_or_else(|| Invalid("--F is required with --check-ic".into()))?;
        let r = no_purchase_ic_check_with(&law("--F", f)?, &gl, IC_TOL)?;
        println!(
            "holds={} worst_c={} worst_value={}",
            r.holds,
            fmt_g(r.worst_c),
            fmt_g(r.worst_value)
        );
        out.write_json("summary.json", &json!({"command": "informed", "F": f, "G": g, "ic": r}))?;
        return Ok(0);
    }
    let c0 = c0.ok_or_else(|| Invalid("--c0 is required unless --check-ic is given".into()))?;
    if !(0.0..1.0).contains(&c0) {
        return Err(Invalid(format!("--c0 must lie in [0, 1), got {c0}")).into());
    }
    let plan = guaranteed_profit(&gl, c0)?;
    let o = known_product_equilibrium(&gl, c0)?;
    println!(
        "p_star={} seller_profit={} buyer_surplus={}",
        fmt_g(o.p_star),
        fmt_g(o.seller_profit),
        fmt_g(o.buyer_surplus)
    );
    out.write_json(
        "summary.json",
        &json!({"command": "informed", "G": g, "c0": c0, "plan": plan, "outcome": o}),
    )?;
    Ok(0)
}

/// Write a curve as `<name>.csv` or `<name>.json`.
fn write_curve(cli: &Cli, out: &OutDir, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    match cli.format {
        Format::Csv => {
            out.write_csv(&format!("{name}.csv"), header, rows)?;
        }
        Format::Json => {
            let records: Vec<serde_json::Map<String, serde_json::Value>> = rows
                .iter()
                .map(|r| {
                    header
                        .iter()
                        .zip(r)
                        .map(|(h, v)| {
                            let val = v
                                .parse::<f64>()
                                .ok()
                                .and_then(|x| serde_json::Number::from_f64(x).map(serde_json::Value::Number))
                                .unwrap_or_else(|| {
                                    if v.is_empty() {
                                        serde_json::Value::Null
                                    } else {
                                        serde_json::Value::String(v.clone())
                                    }
                                });
                            (h.to_string(), val)
                        })
                        .collect()
                })
                .collect();
            out.write_json(&format!("{name}.json"), &records)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_lists() {
        assert_eq!(split_partitions("none,full"), vec!["none", "full"]);
        assert_eq!(split_partitions("none,0,0.5,1,full"), vec!["none", "0,0.5,1", "full"]);
        assert_eq!(split_partitions("0,0.5,1|seg:0,1;modes=r"), vec!["0,0.5,1", "seg:0,1;modes=r"]);
    }
}
