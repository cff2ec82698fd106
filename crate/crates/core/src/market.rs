//! Throughput, usage-based pricing and the utility-optimal channel purchase.

use crate::error::{check_positive, check_probability, Error, Result};
use crate::grid::{route_capacity, HexGrid};
use crate::router::{chain_from_table, route_reliability, RelayModel, Reputation, RoutingTable};
use crate::security::{interception, robustness, SecurityEnv};
use crate::spectrum::{PrimaryTraffic, SecondaryDemand};

/// Fees charged by the primary operator and the buyer's price sensitivity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PricingParams {
    pub channel_fee: f64,
    pub time_fee: f64,
    pub utility_scale: f64,
}

impl PricingParams {
    pub fn new(channel_fee: f64, time_fee: f64, utility_scale: f64) -> Result<Self> {
        let fees = PricingParams {
            channel_fee,
            time_fee,
            utility_scale,
        };
        fees.validate()?;
        Ok(fees)
    }

    pub fn free() -> Self {
        PricingParams {
            channel_fee: 0.0,
            time_fee: 0.0,
            utility_scale: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("channel_fee", self.channel_fee),
            ("time_fee", self.time_fee),
            ("utility_scale", self.utility_scale),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, format!("{v} must be finite and >= 0")));
            }
        }
        Ok(())
    }
}

/// Normalized throughput `c_R / (K tau)`.
pub fn throughput(route_capacity: f64, reuse_factor: u32, route_length: f64) -> Result<f64> {
    if reuse_factor < 1 {
        return Err(Error::invalid("reuse_factor", "must be >= 1"));
    }
    if !(route_length > 0.0) {
        return Err(Error::NoRoute);
    }
    if !(route_capacity >= 0.0) {
        return Err(Error::invalid("route_capacity", "must be >= 0"));
    }
    Ok(route_capacity / (reuse_factor as f64 * route_length))
}

/// Share of the throughput that is not intercepted.
pub fn secure_throughput(safe: f64, throughput: f64) -> Result<f64> {
    check_probability("non_interception", safe)?;
    Ok(safe * throughput)
}

/// `w_R Phi_w + tau t_s Phi_t`.
pub fn price(channels: u32, route_length: f64, hop_time: f64, fees: &PricingParams) -> Result<f64> {
    if channels < 1 {
        return Err(Error::invalid("channels", "must be >= 1"));
    }
    Ok(channels as f64 * fees.channel_fee + route_length * hop_time * fees.time_fee)
}

/// Backup channels per hop that `purchase` channels sustain: the inverse of
/// [`crate::qos::channels_to_buy`], rounded down.
pub fn backup_channels_for_purchase(purchase: u32, demand: &SecondaryDemand) -> u32 {
    let t_s = demand.service_time();
    let t_p = demand.primary_service_time;
    if t_p <= t_s {
        purchase.max(1)
    } else {
        ((purchase as f64 * t_s / t_p + 1e-9).floor() as u32).max(1)
    }
}

/// Derived metrics of one route under one purchase decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RouteReport {
    pub purchase: u32,
    pub backup_channels: u32,
    pub route_length: f64,
    pub to_destination: f64,
    pub no_route: f64,
    pub route_reliability: f64,
    pub route_capacity: f64,
    pub throughput: f64,
    pub non_interception: f64,
    pub secure_throughput: f64,
    pub price: f64,
    pub utility: f64,
}

/// Everything the purchase evaluation needs besides the channel count.
#[derive(Debug, Clone)]
pub struct Market<'a> {
    pub grid: &'a HexGrid,
    pub traffic: &'a PrimaryTraffic,
    pub demand: &'a SecondaryDemand,
    pub willingness: f64,
    /// SINR of the bottleneck link.
    pub link_sinr: f64,
    pub security: SecurityEnv,
    pub fees: PricingParams,
    /// Per-hop time charged by the time fee; the secondary service time
    /// when `None`.
    pub hop_time: Option<f64>,
    /// Route over trusted relays only when set.
    pub reputation: Option<Reputation>,
}

impl Market<'_> {
    fn hop_time(&self) -> f64 {
        self.hop_time.unwrap_or_else(|| self.demand.service_time())
    }

    fn model(&self, backup: u32) -> Result<RelayModel> {
        let model =
            RelayModel::with_backup_channels(self.willingness, self.traffic, self.demand, backup)?;
        match &self.reputation {
            Some(rep) => model.secure(rep.clone()),
            None => Ok(model),
        }
    }

    /// Report for buying `purchase` channels.
    pub fn evaluate(&self, purchase: u32) -> Result<RouteReport> {
        let backup = backup_channels_for_purchase(purchase, self.demand);
        let model = self.model(backup)?;
        let table = RoutingTable::build(self.grid, &model)?;
        self.report(&table, &model, purchase, backup)
    }

    fn report(
        &self,
        table: &RoutingTable,
        model: &RelayModel,
        purchase: u32,
        backup: u32,
    ) -> Result<RouteReport> {
        self.fees.validate()?;
        check_positive("link_sinr", self.link_sinr)?;
        let solution = chain_from_table(table, model)?.solve()?;
        let tau = solution.mean_hops;
        let capacity = route_capacity(&[self.link_sinr], purchase)?;
        let thr = throughput(capacity, self.grid.reuse_factor(), tau)?;
        let safe = interception(&robustness(&self.security)?, tau)?.safe;
        let secure = secure_throughput(safe, thr)?;
        let cost = price(purchase, tau, self.hop_time(), &self.fees)?;
        Ok(RouteReport {
            purchase,
            backup_channels: backup,
            route_length: tau,
            to_destination: solution.to_destination,
            no_route: solution.no_route,
            route_reliability: route_reliability(model.link_reliability, tau)?,
            route_capacity: capacity,
            throughput: thr,
            non_interception: safe,
            secure_throughput: secure,
            price: cost,
            utility: secure - self.fees.utility_scale * cost,
        })
    }

    /// Reports for every purchase in `lo..=hi`, in order.
    pub fn sweep(&self, lo: u32, hi: u32) -> Result<Vec<RouteReport>> {
        if lo < 1 || lo > hi {
            return Err(Error::EmptySearchRange {
                lo: lo as usize,
                hi: hi as usize,
            });
        }
        // The candidate ranking does not depend on the probabilities.
        let table = RoutingTable::build(self.grid, &self.model(1)?)?;
        (lo..=hi)
            .map(|purchase| {
                let backup = backup_channels_for_purchase(purchase, self.demand);
                self.report(&table, &self.model(backup)?, purchase, backup)
            })
            .collect()
    }

    /// Utility-maximizing purchase in `min_purchase..=c`. Ties go to fewer
    /// channels.
    pub fn optimize_purchase(&self, min_purchase: u32) -> Result<PurchaseDecision> {
        let sweep = self.sweep(min_purchase, self.traffic.channels)?;
        let best = *sweep
            .iter()
            .reduce(|best, r| if r.utility > best.utility { r } else { best })
            .expect("range is non-empty");
        Ok(PurchaseDecision { best, sweep })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PurchaseDecision {
    pub best: RouteReport,
    pub sweep: Vec<RouteReport>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn throughput_examples() {
        assert_eq!(throughput(1.0, 1, 1.0).unwrap(), 1.0);
        assert!((throughput(0.0366, 7, 3.5).unwrap() - 0.00149).abs() < 1e-5);
        assert_eq!(throughput(1.0, 7, 0.0), Err(Error::NoRoute));
        let one = throughput(0.4, 7, 2.0).unwrap();
        let two = throughput(0.2, 7, 2.0).unwrap();
        assert_relative_eq!(two, one / 2.0);
    }

    #[test]
    fn secure_and_price_examples() {
        assert_eq!(secure_throughput(1.0, 0.3).unwrap(), 0.3);
        assert_eq!(secure_throughput(0.0, 0.3).unwrap(), 0.0);
        assert_relative_eq!(secure_throughput(0.9886, 2.0).unwrap(), 1.9772);
        assert!(secure_throughput(1.1, 0.3).is_err());

        assert_eq!(price(3, 2.0, 1.0, &PricingParams::free()).unwrap(), 0.0);
        let unit = PricingParams::new(1.0, 1.0, 0.0).unwrap();
        assert_relative_eq!(price(4, 3.5, 1.0, &unit).unwrap(), 7.5);
        assert!(price(5, 3.5, 1.0, &unit).unwrap() > price(4, 3.5, 1.0, &unit).unwrap());
        assert!(PricingParams::new(-1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn purchase_to_backup_mapping() {
        let t = PrimaryTraffic::new(1.0, 4.0, 10).unwrap();
        // Secondary hops longer than primary sessions: one channel per backup.
        let slow = SecondaryDemand::new(2.0, &t).unwrap();
        assert_eq!(backup_channels_for_purchase(5, &slow), 5);
        // Primary sessions twice as long as a hop: two channels per backup.
        let fast = SecondaryDemand::new(8.0, &t).unwrap();
        assert_eq!(backup_channels_for_purchase(4, &fast), 2);
        assert_eq!(backup_channels_for_purchase(5, &fast), 2);
        assert_eq!(backup_channels_for_purchase(1, &fast), 1);
        for w in 1..6 {
            let bought = crate::qos::channels_to_buy(w, &fast).unwrap();
            assert_eq!(backup_channels_for_purchase(bought, &fast), w);
        }
    }

    fn fixture() -> (HexGrid, PrimaryTraffic, SecondaryDemand) {
        let grid = HexGrid::build(2, 100.0, 7).unwrap();
        let traffic = PrimaryTraffic::new(6.0, 24.0, 10).unwrap();
        let demand = SecondaryDemand::new(24.0, &traffic).unwrap();
        (grid, traffic, demand)
    }

    fn market<'a>(
        grid: &'a HexGrid,
        traffic: &'a PrimaryTraffic,
        demand: &'a SecondaryDemand,
        fees: PricingParams,
    ) -> Market<'a> {
        Market {
            grid,
            traffic,
            demand,
            willingness: 0.75,
            link_sinr: 0.12,
            security: SecurityEnv::new(2, grid.len(), 10, 8.0, demand.service_time()).unwrap(),
            fees,
            hop_time: None,
            reputation: None,
        }
    }

    #[test]
    fn optimum_matches_enumeration() {
        let (grid, traffic, demand) = fixture();
        for fees in [
            PricingParams::free(),
            PricingParams::new(0.01, 0.5, 0.05).unwrap(),
        ] {
            let m = market(&grid, &traffic, &demand, fees);
            for lo in 1..=4 {
                let decision = m.optimize_purchase(lo).unwrap();
                let mut best: Option<RouteReport> = None;
                for w in lo..=traffic.channels {
                    let r = m.evaluate(w).unwrap();
                    assert_eq!(r, decision.sweep[(w - lo) as usize]);
                    if best.is_none_or(|b| r.utility > b.utility) {
                        best = Some(r);
                    }
                }
                assert_eq!(decision.best, best.unwrap());
                assert!(decision.best.purchase >= lo);
                assert!(decision
                    .sweep
                    .iter()
                    .all(|r| r.utility <= decision.best.utility));
            }
        }
    }

    #[test]
    fn zero_fees_rank_by_secure_throughput() {
        let (grid, traffic, demand) = fixture();
        let m = market(&grid, &traffic, &demand, PricingParams::free());
        let d = m.optimize_purchase(1).unwrap();
        for r in &d.sweep {
            assert_eq!(r.utility, r.secure_throughput);
            assert!(r.secure_throughput <= r.throughput);
            assert!(r.secure_throughput >= 0.0);
            assert!((0.0..=1.0).contains(&r.non_interception));
            assert!((0.0..=1.0).contains(&r.route_reliability));
        }
        let top = d
            .sweep
            .iter()
            .map(|r| r.secure_throughput)
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(d.best.secure_throughput, top);
    }

    #[test]
    fn empty_range_is_an_error() {
        let (grid, traffic, demand) = fixture();
        let m = market(&grid, &traffic, &demand, PricingParams::free());
        assert!(matches!(
            m.optimize_purchase(11),
            Err(Error::EmptySearchRange { .. })
        ));
        assert!(m.optimize_purchase(0).is_err());
    }
}
