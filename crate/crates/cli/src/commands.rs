//! `analyze`, `mc`, `plan` and `sweep`.

use cogroute::export::{chain_table, grid_table, plan_table, report_table, Table};
use cogroute::market::RouteReport;
use cogroute::qos::{self, channels_to_buy};
use cogroute::router::RoutingTable;
use cogroute::simkit::{run_simulator, Simulator};
use rayon::prelude::*;

use crate::config::Config;
use crate::{CliError, Output};

/// Closed-form report at the configured willingness and backup channels.
pub fn route_report(config: &Config) -> Result<RouteReport, CliError> {
    let sc = config.scenario()?;
    let purchase = channels_to_buy(config.relay.backup_channels, &sc.demand)?;
    Ok(sc
        .market(config, config.relay.willingness)
        .evaluate(purchase)?)
}

pub fn analyze(config: &Config) -> Result<Output, CliError> {
    let sc = config.scenario()?;
    let model = sc.relay_model(
        config,
        config.relay.willingness,
        config.relay.backup_channels,
    )?;
    let chain = cogroute::router::build_chain(&sc.grid, &model)?;
    let report = route_report(config)?;
    Ok(Output::default()
        .line(format!(
            "tau = {}  p_D = {}  p_nr = {}  p_nd = {}  T_s = {}  U = {}",
            report.route_length,
            report.to_destination,
            report.no_route,
            report.non_interception,
            report.secure_throughput,
            report.utility
        ))
        .table("analyze", report_table(&[report]))
        .table("chain", chain_table(&chain))
        .table("grid", grid_table(&sc.grid)?))
}

/// Monte Carlo estimate next to the closed form.
pub fn mc(config: &Config) -> Result<Output, CliError> {
    let sc = config.scenario()?;
    let model = sc.relay_model(
        config,
        config.relay.willingness,
        config.relay.backup_channels,
    )?;
    let table = RoutingTable::build(&sc.grid, &model)?;
    let chain = cogroute::router::chain_from_table(&table, &model)?;
    let exact = chain.solve()?;
    let sim = Simulator::with_chain(table, model, chain)?;
    let est = run_simulator(&sim, config.monte_carlo.episodes, config.monte_carlo.seed)?;

    let mut t = Table::new(["metric", "analytic", "estimate", "se", "z", "within_3se"]);
    let mut all = true;
    for (name, analytic, estimate, se) in [
        ("tau", exact.mean_hops, est.mean_hops, est.mean_hops_se),
        (
            "p_d",
            exact.to_destination,
            est.to_destination,
            est.to_destination_se,
        ),
        ("p_nr", exact.no_route, est.no_route, est.no_route_se),
    ] {
        let gap = (estimate - analytic).abs();
        let z = if se > 0.0 {
            gap / se
        } else if gap < 1e-12 {
            0.0
        } else {
            f64::INFINITY
        };
        let ok = z <= 3.0;
        all &= ok;
        t.push([
            name.to_string(),
            analytic.to_string(),
            estimate.to_string(),
            se.to_string(),
            z.to_string(),
            u8::from(ok).to_string(),
        ]);
    }
    Ok(Output::default()
        .line(format!(
            "{} episodes, seed {}: tau {} +- {} (analytic {}); {}",
            est.episodes,
            est.seed,
            est.mean_hops,
            est.mean_hops_se,
            exact.mean_hops,
            if all {
                "agrees within 3 SE"
            } else {
                "DISAGREES beyond 3 SE"
            }
        ))
        .table("mc", t)
        .table("mc_estimate", cogroute::export::estimate_table(&[est])))
}

/// Switching time, channel counts and the utility-optimal purchase.
pub fn plan(config: &Config) -> Result<Output, CliError> {
    let sc = config.scenario()?;
    let request = config.qos.request()?;
    let p = config.relay.willingness;
    let plan = qos::plan(&sc.grid, &sc.traffic, &sc.demand, p, &request)?;
    let decision = sc
        .market(config, p)
        .optimize_purchase(plan.purchase_count)?;
    Ok(Output::default()
        .line(format!(
            "xi_min = {}  t_w* = {}  w_min = {}  w* = {}  w_R,min = {}  w_R* = {}",
            plan.link_reliability_min,
            plan.switching_time,
            plan.min_channels,
            plan.optimal_channels,
            plan.purchase_count,
            decision.best.purchase
        ))
        .table("plan", plan_table(&[plan]))
        .table("purchase", report_table(&decision.sweep)))
}

/// Closed-form report for each value of the configured sweep axis.
pub fn sweep(config: &Config) -> Result<Output, CliError> {
    let key = config.sweep.parameter.clone();
    let rows: Vec<RouteReport> = config
        .sweep
        .values
        .par_iter()
        .map(|&v| {
            let c = config.with_value(&key, v)?;
            c.validate()?;
            route_report(&c)
        })
        .collect::<Result<_, _>>()?;
    let reports = report_table(&rows);
    let mut columns = vec![key.replace('.', "_")];
    columns.extend(reports.columns.iter().cloned());
    let mut t = Table::new(columns);
    for (v, row) in config.sweep.values.iter().zip(&reports.rows) {
        t.push(std::iter::once(v.to_string()).chain(row.iter().cloned()));
    }
    Ok(Output::default()
        .line(format!("{} points over {key}", rows.len()))
        .table("sweep", t))
}
