//! Resource planning for a reliability and delay target: how often to switch
//! channel, how many backup channels each hop needs and how many channels to
//! buy for the whole route.

use crate::error::{check_probability, Error, Result};
use crate::grid::HexGrid;
use crate::router::{chain_from_table, RelayModel, RoutingTable};
use crate::spectrum::{PrimaryTraffic, ReliabilityCurve, SecondaryDemand};

/// Number of points in the switching-time grid search.
pub const SWITCH_GRID_POINTS: usize = 10_000;

/// Slack used when rounding channel counts up, so that values a rounding
/// error above an integer are not bumped to the next channel.
const CEIL_SLACK: f64 = 1e-9;

/// Smallest integer not below `x`, with `x` at most `CEIL_SLACK` above an
/// integer treated as that integer. Never less than 1.
pub fn ceil_channels(x: f64) -> u32 {
    ((x - CEIL_SLACK).ceil().max(1.0)) as u32
}

/// Reliability and delay requirements of a secondary user.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QosRequest {
    pub route_reliability_min: Option<f64>,
    pub link_reliability_min: Option<f64>,
    /// Maximum tolerable route length in hops.
    pub delay_max: f64,
}

impl QosRequest {
    pub fn with_link_target(link_reliability_min: f64, delay_max: f64) -> Result<Self> {
        let req = QosRequest {
            route_reliability_min: None,
            link_reliability_min: Some(link_reliability_min),
            delay_max,
        };
        req.validate()?;
        Ok(req)
    }

    pub fn with_route_target(route_reliability_min: f64, delay_max: f64) -> Result<Self> {
        let req = QosRequest {
            route_reliability_min: Some(route_reliability_min),
            link_reliability_min: None,
            delay_max,
        };
        req.validate()?;
        Ok(req)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("route_reliability_min", self.route_reliability_min),
            ("link_reliability_min", self.link_reliability_min),
        ] {
            if let Some(v) = v {
                if !(v > 0.0 && v <= 1.0) {
                    return Err(Error::invalid(name, format!("{v} is not in (0, 1]")));
                }
            }
        }
        if self.route_reliability_min.is_none() && self.link_reliability_min.is_none() {
            return Err(Error::invalid(
                "link_reliability_min",
                "either a link or a route reliability target is required",
            ));
        }
        if !(self.delay_max >= 1.0) {
            return Err(Error::invalid(
                "delay_max",
                format!("{} < 1", self.delay_max),
            ));
        }
        Ok(())
    }

    /// Per-link target; a route target is converted with `route_length`.
    pub fn link_target(&self, route_length: f64) -> Result<f64> {
        match (self.link_reliability_min, self.route_reliability_min) {
            (Some(xi), _) => Ok(xi),
            (None, Some(route)) => crate::router::min_link_reliability(route, route_length),
            (None, None) => Err(Error::invalid("link_reliability_min", "no target")),
        }
    }
}

/// `t_w * (xi(t_w) - xi_min)`: long switching intervals are preferred as long
/// as the link stays above the target.
pub fn switch_objective(curve: &ReliabilityCurve, interval: f64, xi_min: f64) -> Result<f64> {
    Ok(interval * (curve.reliability(interval)? - xi_min))
}

/// Optimal channel-switching interval on the default grid.
pub fn optimal_switch_time(
    traffic: &PrimaryTraffic,
    demand: &SecondaryDemand,
    xi_min: f64,
) -> Result<f64> {
    optimal_switch_time_on_grid(traffic, demand, xi_min, SWITCH_GRID_POINTS)
}

/// Grid search over `t_w = k t_S / points`, `k = 1..=points`. Equal
/// objective values resolve to the larger interval.
pub fn optimal_switch_time_on_grid(
    traffic: &PrimaryTraffic,
    demand: &SecondaryDemand,
    xi_min: f64,
    points: usize,
) -> Result<f64> {
    if !(xi_min > 0.0 && xi_min < 1.0) {
        return Err(Error::invalid(
            "link_reliability_min",
            format!("{xi_min} is not in (0, 1)"),
        ));
    }
    if points == 0 {
        return Err(Error::invalid("points", "grid needs at least one point"));
    }
    let curve = traffic.reliability_curve()?;
    let t_s = demand.service_time();
    let step = t_s / points as f64;
    if curve.reliability(step)? <= xi_min {
        return Err(Error::Infeasible { xi_min });
    }
    let mut best = (f64::NEG_INFINITY, step);
    for k in 1..=points {
        let t = if k == points { t_s } else { k as f64 * step };
        let value = switch_objective(&curve, t, xi_min)?;
        if value >= best.0 {
            best = (value, t);
        }
    }
    Ok(best.1)
}

/// Outcome of the reliability planning step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackupPlan {
    pub switching_time: f64,
    /// `n_w = t_S / t_w`, unrounded.
    pub switch_count: f64,
    pub min_channels: u32,
}

/// Minimum number of backup channels per hop meeting `xi_min`.
///
/// With `t_p >= t_S` every switch needs a fresh channel; otherwise channels
/// released by primary users are reused at rate `t_p / t_S`.
pub fn min_backup_channels(
    traffic: &PrimaryTraffic,
    demand: &SecondaryDemand,
    xi_min: f64,
) -> Result<BackupPlan> {
    let switching_time = optimal_switch_time(traffic, demand, xi_min)?;
    Ok(backup_plan_for(demand, switching_time))
}

pub(crate) fn backup_plan_for(demand: &SecondaryDemand, switching_time: f64) -> BackupPlan {
    let t_s = demand.service_time();
    let t_p = demand.primary_service_time;
    let switch_count = t_s / switching_time;
    let needed = if t_p >= t_s {
        switch_count
    } else {
        switch_count * t_p / t_s
    };
    BackupPlan {
        switching_time,
        switch_count,
        min_channels: ceil_channels(needed),
    }
}

/// One evaluated candidate of the delay fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayCandidate {
    pub channels: u32,
    pub mean_hops: f64,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DelayFit {
    pub channels: u32,
    pub mean_hops: f64,
    pub candidates: Vec<DelayCandidate>,
}

/// Backup-channel count in `w_min..=c` whose expected route length is
/// closest (squared error) to `delay_max`. Ties resolve to fewer channels.
pub fn optimal_channels_for_delay(
    grid: &HexGrid,
    traffic: &PrimaryTraffic,
    demand: &SecondaryDemand,
    willingness: f64,
    delay_max: f64,
    min_channels: u32,
) -> Result<DelayFit> {
    fit_channels_to_delay(grid, delay_max, min_channels, traffic.channels, |w| {
        RelayModel::with_backup_channels(willingness, traffic, demand, w)
    })
}

/// Delay fit with a caller-supplied relay model per channel count.
pub fn fit_channels_to_delay<F>(
    grid: &HexGrid,
    delay_max: f64,
    lo: u32,
    hi: u32,
    model_for: F,
) -> Result<DelayFit>
where
    F: Fn(u32) -> Result<RelayModel>,
{
    if lo < 1 || lo > hi {
        return Err(Error::EmptySearchRange {
            lo: lo as usize,
            hi: hi as usize,
        });
    }
    if !(delay_max >= 1.0) {
        return Err(Error::invalid("delay_max", format!("{delay_max} < 1")));
    }
    let mut candidates = Vec::with_capacity((hi - lo + 1) as usize);
    let mut table: Option<RoutingTable> = None;
    for w in lo..=hi {
        let model = model_for(w)?;
        let table = match &table {
            Some(t) => t,
            None => table.insert(RoutingTable::build(grid, &model)?),
        };
        let mean_hops = chain_from_table(table, &model)?.solve()?.mean_hops;
        let loss = (delay_max - mean_hops).powi(2);
        candidates.push(DelayCandidate {
            channels: w,
            mean_hops,
            loss,
        });
    }
    let best = candidates
        .iter()
        .copied()
        .reduce(|best, c| if c.loss < best.loss { c } else { best })
        .expect("range is non-empty");
    Ok(DelayFit {
        channels: best.channels,
        mean_hops: best.mean_hops,
        candidates,
    })
}

/// Channels to buy for the route. When primary sessions outlast a hop the
/// channels cannot be reused on the next hop and the count scales by
/// `t_p / t_S`.
pub fn channels_to_buy(backup_channels: u32, demand: &SecondaryDemand) -> Result<u32> {
    if backup_channels < 1 {
        return Err(Error::invalid("backup_channels", "must be >= 1"));
    }
    let t_s = demand.service_time();
    let t_p = demand.primary_service_time;
    Ok(if t_p <= t_s {
        backup_channels
    } else {
        ceil_channels(backup_channels as f64 * t_p / t_s)
    })
}

/// Complete plan for one request.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwitchPlan {
    pub link_reliability_min: f64,
    pub delay_max: f64,
    pub switching_time: f64,
    pub switch_count: f64,
    pub min_channels: u32,
    pub optimal_channels: u32,
    pub purchase_count: u32,
}

/// Runs the whole planning chain: switching time, minimum backup channels,
/// delay-optimal channels and the purchase count.
///
/// A route-level target is converted to a link target with the mean route
/// length of single-channel relaying.
pub fn plan(
    grid: &HexGrid,
    traffic: &PrimaryTraffic,
    demand: &SecondaryDemand,
    willingness: f64,
    request: &QosRequest,
) -> Result<SwitchPlan> {
    request.validate()?;
    check_probability("willingness", willingness)?;
    let xi_min = match request.link_reliability_min {
        Some(xi) => xi,
        None => {
            let base = RelayModel::from_traffic(willingness, traffic, demand)?;
            let tau = crate::router::build_chain(grid, &base)?.solve()?.mean_hops;
            request.link_target(tau)?
        }
    };
    let backup = min_backup_channels(traffic, demand, xi_min)?;
    let fit = optimal_channels_for_delay(
        grid,
        traffic,
        demand,
        willingness,
        request.delay_max,
        backup.min_channels,
    )?;
    Ok(SwitchPlan {
        link_reliability_min: xi_min,
        delay_max: request.delay_max,
        switching_time: backup.switching_time,
        switch_count: backup.switch_count,
        min_channels: backup.min_channels,
        optimal_channels: fit.channels,
        purchase_count: channels_to_buy(fit.channels, demand)?,
    })
}
