//! Data behind each figure of the evaluation, under the configured defaults.

use cogroute::export::{trajectory_table, Table};
use cogroute::qos::{
    min_backup_channels, optimal_channels_for_delay, optimal_switch_time, switch_objective,
    DelayFit,
};
use cogroute::router::{chain_from_table, RelayModel, Reputation, RoutingTable};
use cogroute::security::{interception, robustness};
use cogroute::simkit::simulate_reputation;
use cogroute::Error;

use crate::config::Config;
use crate::{CliError, Output};

/// Secondary service rates, as multiples of the reference rate, compared in
/// the reliability figures.
pub const FIG3_RATIOS: [f64; 3] = [2.0, 4.0, 8.0];
pub const FIG4_RATIOS: [f64; 3] = [2.0, 4.0, 8.0];
pub const FIG5_RATIOS: [f64; 4] = [8.0, 6.0, 4.0, 2.0];
/// Willingness values of the delay-versus-weight figure.
pub const FIG7_WILLINGNESS: [f64; 3] = [0.6, 0.8, 1.0];
pub const FIG7_WEIGHTS: [f64; 9] = [0.02, 0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 0.9, 0.99];
pub const FIG8_CHANNELS: [u32; 5] = [2, 3, 4, 5, 6];
pub const FIG9_PURCHASES: [u32; 3] = [2, 4, 6];
pub const FIG10_WILLINGNESS: [f64; 3] = [0.6, 0.8, 1.0];

/// Weight of the fast-forgetting comparison run.
pub const FAST_WEIGHT: f64 = 0.5;

pub fn reproduce(config: &Config, figure: u32) -> Result<Output, CliError> {
    match figure {
        3 => fig3(config),
        4 => fig4(config),
        5 => fig5(config),
        6 => fig6(config),
        7 => fig7(config),
        8 => fig8(config),
        9 => fig9(config),
        10 => fig10(config),
        _ => Err(CliError::Config(format!(
            "no figure {figure}; choose 3 to 10"
        ))),
    }
}

fn ratio_label(prefix: &str, ratio: f64) -> String {
    format!("{prefix}_mu{}", ratio.to_string().replace('.', "p"))
}

/// `0.50, 0.55, ..., 1.00`.
pub fn willingness_grid() -> Vec<f64> {
    (0..=10).map(|i| (50 + 5 * i) as f64 / 100.0).collect()
}

fn with_ratio(config: &Config, ratio: f64) -> Config {
    let mut c = config.clone();
    c.traffic.secondary_service_ratio = ratio;
    c
}

fn link_target(config: &Config) -> Result<f64, CliError> {
    let sc = config.scenario()?;
    let request = config.qos.request()?;
    match request.link_reliability_min {
        Some(xi) => Ok(xi),
        None => {
            let base = RelayModel::from_traffic(config.relay.willingness, &sc.traffic, &sc.demand)?;
            let tau = cogroute::router::build_chain(&sc.grid, &base)?
                .solve()?
                .mean_hops;
            Ok(request.link_target(tau)?)
        }
    }
}

/// Minimum backup channels, `None` when the target is unattainable.
pub fn w_min(config: &Config, xi_min: f64) -> Result<Option<u32>, CliError> {
    let sc = config.scenario()?;
    match min_backup_channels(&sc.traffic, &sc.demand, xi_min) {
        Ok(plan) => Ok(Some(plan.min_channels)),
        Err(Error::Infeasible { .. }) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

pub fn fig3(config: &Config) -> Result<Output, CliError> {
    const POINTS: usize = 200;
    let xi = link_target(config)?;
    let mut columns = vec!["t_w_norm".to_string()];
    for &m in &FIG3_RATIOS {
        columns.push(ratio_label("t_w", m));
        columns.push(ratio_label("utility", m));
    }
    let mut curves = Vec::new();
    let mut optimum = Table::new([
        "mu_s_ratio",
        "t_s",
        "t_w_star",
        "t_w_star_norm",
        "utility_star",
    ]);
    for &m in &FIG3_RATIOS {
        let sc = with_ratio(config, m).scenario()?;
        let curve = sc.traffic.reliability_curve()?;
        let t_s = sc.demand.service_time();
        let t_star = optimal_switch_time(&sc.traffic, &sc.demand, xi)?;
        optimum.push([
            m,
            t_s,
            t_star,
            t_star / t_s,
            switch_objective(&curve, t_star, xi)?,
        ]);
        curves.push((curve, t_s));
    }
    let mut t = Table::new(columns);
    for k in 1..=POINTS {
        let norm = k as f64 / POINTS as f64;
        let mut row = vec![norm];
        for (curve, t_s) in &curves {
            let tw = norm * t_s;
            row.push(tw);
            row.push(switch_objective(curve, tw, xi)?);
        }
        t.push(row);
    }
    Ok(Output::default()
        .line(format!("switching-time objective at xi_min = {xi}"))
        .table("fig3", t)
        .table("fig3_optimum", optimum))
}

/// `0.80, 0.81, ..., 0.99`.
pub fn reliability_grid() -> Vec<f64> {
    (80..=99).map(|i| i as f64 / 100.0).collect()
}

pub fn fig4(config: &Config) -> Result<Output, CliError> {
    let mut columns = vec!["xi_min".to_string()];
    columns.extend(FIG4_RATIOS.iter().map(|&m| ratio_label("w_min", m)));
    let mut t = Table::new(columns);
    for xi in reliability_grid() {
        let mut row = vec![xi.to_string()];
        for &m in &FIG4_RATIOS {
            // unattainable targets stay empty
            row.push(w_min(&with_ratio(config, m), xi)?.map_or(String::new(), |w| w.to_string()));
        }
        t.push(row);
    }
    Ok(Output::default()
        .line("minimum backup channels versus link reliability target")
        .table("fig4", t))
}

/// Delay fit with every relay willing, as in the channel-count figure.
#[derive(Debug, Clone)]
pub struct LadderPoint {
    pub ratio: f64,
    pub w_min: u32,
    pub fit: DelayFit,
}

pub fn ladder(config: &Config, ratios: &[f64]) -> Result<Vec<LadderPoint>, CliError> {
    let xi = link_target(config)?;
    ratios
        .iter()
        .map(|&m| {
            let c = with_ratio(config, m);
            let sc = c.scenario()?;
            let w_min = min_backup_channels(&sc.traffic, &sc.demand, xi)?.min_channels;
            let fit = optimal_channels_for_delay(
                &sc.grid,
                &sc.traffic,
                &sc.demand,
                1.0,
                config.qos.delay_max,
                w_min,
            )?;
            Ok(LadderPoint {
                ratio: m,
                w_min,
                fit,
            })
        })
        .collect()
}

pub fn fig5(config: &Config) -> Result<Output, CliError> {
    let points = ladder(config, &FIG5_RATIOS)?;
    let mut t = Table::new([
        "mu_s_ratio",
        "w",
        "p_a",
        "xi",
        "tau",
        "loss",
        "w_min",
        "w_star",
    ]);
    let mut out = Output::default();
    for pt in &points {
        let sc = with_ratio(config, pt.ratio).scenario()?;
        for cand in &pt.fit.candidates {
            t.push([
                pt.ratio,
                cand.channels as f64,
                sc.traffic.availability(cand.channels)?,
                sc.traffic
                    .link_reliability(sc.demand.service_time() / cand.channels as f64)?,
                cand.mean_hops,
                cand.loss,
                pt.w_min as f64,
                pt.fit.channels as f64,
            ]);
        }
        out = out.line(format!(
            "mu_S = {} x lambda: w_min = {}, w* = {} (tau = {})",
            pt.ratio, pt.w_min, pt.fit.channels, pt.fit.mean_hops
        ));
    }
    Ok(out.table("fig5", t))
}

fn coupling_availability(config: &Config) -> Result<f64, CliError> {
    let sc = config.scenario()?;
    let m = RelayModel::with_backup_channels(
        1.0,
        &sc.traffic,
        &sc.demand,
        config.relay.backup_channels,
    )?;
    Ok(m.channel_availability * m.link_reliability)
}

pub fn fig6(config: &Config) -> Result<Output, CliError> {
    let s = &config.security;
    let scenario = config.reputation_scenario(coupling_availability(config)?);
    let seed = config.monte_carlo.seed;
    let slow = simulate_reputation(&scenario, s.reputation_episodes, s.reputation_weight, seed)?;
    let fast = simulate_reputation(&scenario, s.reputation_episodes, FAST_WEIGHT, seed)?;
    let base = trajectory_table(&slow);
    let mut t = Table::new(["episode", "s_c", "s_ij_slow", "s_ij_fast"]);
    for (row, f) in base.rows.iter().zip(&fast) {
        t.push([
            row[0].clone(),
            row[1].clone(),
            row[2].clone(),
            f.reputation.to_string(),
        ]);
    }
    let mut out = Output::default().line(format!(
        "weights {} (slow) and {FAST_WEIGHT} (fast); final reputation {} / {}",
        s.reputation_weight,
        slow.last().map_or(f64::NAN, |o| o.reputation),
        fast.last().map_or(f64::NAN, |o| o.reputation),
    ));
    if let Some(mean) = scenario.mean_experience() {
        out = out.line(format!("scenario mean experience {mean}"));
    }
    Ok(out.table("fig6", t))
}

/// Operating backup-channel count of the security and trading figures: the
/// minimum meeting the configured reliability target.
fn operating_channels(config: &Config) -> Result<u32, CliError> {
    let xi = link_target(config)?;
    w_min(config, xi)?
        .ok_or_else(|| CliError::Infeasible(format!("link reliability {xi} is unattainable")))
}

pub fn fig7(config: &Config) -> Result<Output, CliError> {
    let sc = config.scenario()?;
    let w = operating_channels(config)?;
    let s = &config.security;
    let scenario = config.reputation_scenario(coupling_availability(config)?);
    let mut t = Table::new([
        "alpha_e",
        "p",
        "tau_final",
        "tau_mean",
        "tau_std",
        "tau_min",
        "tau_max",
    ]);
    for &alpha in &FIG7_WEIGHTS {
        let trajectory = simulate_reputation(
            &scenario,
            s.reputation_episodes,
            alpha,
            config.monte_carlo.seed,
        )?;
        for &p in &FIG7_WILLINGNESS {
            let base = RelayModel::with_backup_channels(p, &sc.traffic, &sc.demand, w)?;
            let taus = trajectory
                .iter()
                .map(|o| {
                    let model = base.clone().secure(Reputation::uniform(o.reputation))?;
                    // candidate trust is captured when the table is built
                    let table = RoutingTable::build(&sc.grid, &model)?;
                    Ok(chain_from_table(&table, &model)?.solve()?.mean_hops)
                })
                .collect::<Result<Vec<f64>, CliError>>()?;
            let tail = &taus[taus.len() / 2..];
            let n = tail.len() as f64;
            let mean = tail.iter().sum::<f64>() / n;
            let std = (tail.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
            t.push([
                alpha,
                p,
                *taus.last().expect("at least one episode"),
                mean,
                std,
                tail.iter().copied().fold(f64::INFINITY, f64::min),
                tail.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            ]);
        }
    }
    Ok(Output::default()
        .line(format!(
            "secure routing with {w} backup channels; statistics over the second half"
        ))
        .table("fig7", t))
}

pub fn fig8(config: &Config) -> Result<Output, CliError> {
    let sc = config.scenario()?;
    let rob = robustness(&sc.security)?;
    let mut columns = vec!["p".to_string()];
    for w in FIG8_CHANNELS {
        columns.push(format!("p_nd_w{w}"));
        columns.push(format!("tau_w{w}"));
    }
    let mut t = Table::new(columns);
    for p in willingness_grid() {
        let mut row = vec![p];
        for w in FIG8_CHANNELS {
            let model = sc.relay_model(config, p, w)?;
            let tau = cogroute::router::build_chain(&sc.grid, &model)?
                .solve()?
                .mean_hops;
            row.push(interception(&rob, tau)?.safe);
            row.push(tau);
        }
        t.push(row);
    }
    Ok(Output::default()
        .line(format!(
            "{} eavesdroppers in {} subcells, {} h/day",
            sc.security.eavesdroppers, sc.security.subcells, sc.security.observation_hours
        ))
        .table("fig8", t))
}

pub fn fig9(config: &Config) -> Result<Output, CliError> {
    let sc = config.scenario()?;
    let mut columns = vec!["p".to_string()];
    for w in FIG9_PURCHASES {
        columns.push(format!("throughput_w{w}"));
        columns.push(format!("secure_throughput_w{w}"));
    }
    let mut t = Table::new(columns);
    for p in willingness_grid() {
        let market = sc.market(config, p);
        let mut row = vec![p];
        for w in FIG9_PURCHASES {
            let r = market.evaluate(w)?;
            row.push(r.throughput);
            row.push(r.secure_throughput);
        }
        t.push(row);
    }
    Ok(Output::default()
        .line("normalized and secure throughput versus willingness")
        .table("fig9", t))
}

pub fn fig10(config: &Config) -> Result<Output, CliError> {
    let sc = config.scenario()?;
    let mut t = Table::new([
        "p",
        "w_r_min",
        "xi",
        "tau",
        "meets_delay",
        "utility",
        "best_w_r",
        "best_utility",
    ]);
    let mut out = Output::default();
    for &p in &FIG10_WILLINGNESS {
        let market = sc.market(config, p);
        let sweep = market.sweep(1, sc.traffic.channels)?;
        let mut best: Option<(u32, f64)> = None;
        for (i, r) in sweep.iter().enumerate() {
            // the optimum over w_R >= w_R,min is the best of the remaining sweep
            let tail_best = sweep[i..]
                .iter()
                .copied()
                .reduce(|b, x| if x.utility > b.utility { x } else { b })
                .expect("non-empty tail");
            let xi = sc
                .traffic
                .link_reliability(sc.demand.service_time() / r.backup_channels as f64)?;
            let meets = r.route_length <= config.qos.delay_max;
            if meets && best.is_none_or(|(_, u)| r.utility > u) {
                best = Some((r.purchase, r.utility));
            }
            t.push([
                p,
                r.purchase as f64,
                xi,
                r.route_length,
                f64::from(u8::from(meets)),
                r.utility,
                tail_best.purchase as f64,
                tail_best.utility,
            ]);
        }
        out = out.line(match best {
            Some((w, u)) => {
                format!("p = {p}: best w_R,min meeting the delay bound is {w} (U = {u})")
            }
            None => format!("p = {p}: no w_R,min meets the delay bound"),
        });
    }
    Ok(out.table("fig10", t))
}
