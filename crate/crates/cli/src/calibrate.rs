//! Search for the primary arrival-rate scale that reproduces a published
//! operating point.

use std::str::FromStr;

use cogroute::export::Table;
use cogroute::qos::optimal_switch_time;

use crate::config::Config;
use crate::figures::{ladder, w_min};
use crate::{CliError, Output};

pub const BRACKET: (f64, f64) = (0.01, 100.0);
/// Reliability target and secondary rate of the four-channel claim.
pub const FIG4_TARGET: (f64, f64, u32) = (0.90, 4.0, 4);
/// Secondary rates and the channel counts expected for them.
pub const FIG5_TARGET: [(f64, u32); 3] = [(8.0, 2), (6.0, 3), (4.0, 4)];
const REPORT_RATIOS: [f64; 4] = [2.0, 4.0, 6.0, 8.0];
const LADDER_SCAN_POINTS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    /// Four channels give 90% link reliability when `mu_S = 4 lambda`.
    Fig4FourChannels,
    /// Delay-optimal channels 2, 3, 4 for `mu_S = 8, 6, 4 lambda`.
    Fig5Ladder,
}

impl FromStr for Target {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "fig4-90pct-4ch" => Ok(Target::Fig4FourChannels),
            "fig5-wstar-ladder" => Ok(Target::Fig5Ladder),
            _ => Err(CliError::Config(format!(
                "unknown calibration target `{s}` (fig4-90pct-4ch, fig5-wstar-ladder)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Calibration {
    pub target: Target,
    pub scale: f64,
    /// Scales bounding the accepted region.
    pub interval: (f64, f64),
    pub report: Table,
}

fn at_scale(config: &Config, scale: f64, ratio: f64) -> Config {
    let mut c = config.clone();
    c.traffic.rate_scale = scale;
    c.traffic.secondary_service_ratio = ratio;
    c
}

/// Minimum channels at `scale`; unstable or unattainable settings count as
/// needing more channels than any finite target.
fn staircase(config: &Config, scale: f64) -> Result<u32, CliError> {
    let (xi, ratio, _) = FIG4_TARGET;
    let c = at_scale(config, scale, ratio);
    match c.scenario() {
        Ok(_) => Ok(w_min(&c, xi)?.unwrap_or(u32::MAX)),
        Err(CliError::Config(_)) if scale > 0.0 => Ok(u32::MAX),
        Err(e) => Err(e),
    }
}

/// Smallest scale in `(lo, hi]` whose staircase value reaches `level`,
/// assuming the staircase is nondecreasing in the scale.
fn first_reaching(config: &Config, level: u32, mut lo: f64, mut hi: f64) -> Result<f64, CliError> {
    for _ in 0..200 {
        if hi / lo - 1.0 < 1e-12 {
            break;
        }
        let mid = (lo * hi).sqrt();
        if staircase(config, mid)? >= level {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

fn calibrate_fig4(config: &Config) -> Result<(f64, (f64, f64)), CliError> {
    let (_, _, want) = FIG4_TARGET;
    let (lo, hi) = BRACKET;
    let at_lo = staircase(config, lo)?;
    let at_hi = staircase(config, hi)?;
    if at_lo >= want || at_hi <= want {
        return Err(CliError::Calibration(format!(
            "bracket [{lo}, {hi}] gives w_min {at_lo}..{at_hi}, which does not straddle {want}"
        )));
    }
    let enter = first_reaching(config, want, lo, hi)?;
    let leave = first_reaching(config, want + 1, enter, hi)?;
    let scale = (enter * leave).sqrt();
    let got = staircase(config, scale)?;
    if got != want {
        return Err(CliError::Calibration(format!(
            "w_min skips {want}: it moves past the target between scales {enter} and {leave} (w_min = {got} at {scale})"
        )));
    }
    Ok((scale, (enter, leave)))
}

fn ladder_miss(config: &Config, scale: f64) -> Option<u32> {
    let ratios: Vec<f64> = FIG5_TARGET.iter().map(|t| t.0).collect();
    let mut c = config.clone();
    c.traffic.rate_scale = scale;
    let points = ladder(&c, &ratios).ok()?;
    Some(
        points
            .iter()
            .zip(FIG5_TARGET)
            .map(|(pt, (_, want))| pt.fit.channels.abs_diff(want))
            .sum(),
    )
}

fn calibrate_fig5(config: &Config) -> Result<(f64, (f64, f64)), CliError> {
    let (lo, hi) = BRACKET;
    let ratio = (hi / lo).ln();
    let mut best: Option<(u32, f64)> = None;
    let mut matching = Vec::new();
    for k in 0..LADDER_SCAN_POINTS {
        let s = lo * (ratio * k as f64 / (LADDER_SCAN_POINTS - 1) as f64).exp();
        let Some(miss) = ladder_miss(config, s) else {
            continue;
        };
        if miss == 0 {
            matching.push(s);
        }
        if best.is_none_or(|(m, _)| miss < m) {
            best = Some((miss, s));
        }
    }
    match (matching.first(), matching.last(), best) {
        (Some(&a), Some(&b), _) => Ok(((a * b).sqrt(), (a, b))),
        (_, _, Some((miss, s))) => Err(CliError::Calibration(format!(
            "no scale in [{lo}, {hi}] reproduces the ladder; closest is {s} with {miss} channels off in total"
        ))),
        _ => Err(CliError::Calibration("no scale in the bracket is evaluable".into())),
    }
}

/// Reliability and channel figures at `scale`.
pub fn report(config: &Config, scale: f64) -> Result<Table, CliError> {
    let (xi, _, _) = FIG4_TARGET;
    let mut t = Table::new([
        "rate_scale",
        "mu_s_ratio",
        "t_w_star",
        "t_w_star_norm",
        "w_min",
        "w_star",
        "tau_star",
    ]);
    for &m in &REPORT_RATIOS {
        let c = at_scale(config, scale, m);
        let sc = c.scenario()?;
        let t_star = optimal_switch_time(&sc.traffic, &sc.demand, xi)?;
        let mut fit_cfg = c.clone();
        fit_cfg.qos.link_reliability_min = Some(xi);
        fit_cfg.qos.route_reliability_min = None;
        let pt = &ladder(&fit_cfg, &[m])?[0];
        t.push([
            scale,
            m,
            t_star,
            t_star / sc.demand.service_time(),
            pt.w_min as f64,
            pt.fit.channels as f64,
            pt.fit.mean_hops,
        ]);
    }
    Ok(t)
}

pub fn calibrate(config: &Config, target: Target) -> Result<Calibration, CliError> {
    let mut cfg = config.clone();
    cfg.qos.link_reliability_min = Some(FIG4_TARGET.0);
    cfg.qos.route_reliability_min = None;
    let (scale, interval) = match target {
        Target::Fig4FourChannels => calibrate_fig4(&cfg)?,
        Target::Fig5Ladder => calibrate_fig5(&cfg)?,
    };
    Ok(Calibration {
        target,
        scale,
        interval,
        report: report(&cfg, scale)?,
    })
}

pub fn run(config: &Config, target: &str) -> Result<Output, CliError> {
    let cal = calibrate(config, target.parse()?)?;
    Ok(Output::default()
        .line(format!(
            "rate_scale = {} (accepted interval [{}, {}))",
            cal.scale, cal.interval.0, cal.interval.1
        ))
        .table("calibrate", cal.report))
}
