//! Experiment configuration: one TOML section per model component.

use std::path::Path;

use cogroute::grid::{sinr, HexGrid, Interference, RadioParams};
use cogroute::market::{Market, PricingParams};
use cogroute::qos::QosRequest;
use cogroute::router::{CandidateOrder, RelayModel, Reputation};
use cogroute::security::SecurityEnv;
use cogroute::simkit::ReputationScenario;
use cogroute::spectrum::{PrimaryTraffic, SecondaryDemand, SumConvention};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Rate scale that puts `w_min(0.9, mu_S = 4)` at 4 channels; the value
/// printed by `cogroute calibrate fig4-90pct-4ch`.
pub const CALIBRATED_RATE_SCALE: f64 = 5.776382519173438;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub grid: GridSection,
    pub radio: RadioSection,
    pub traffic: TrafficSection,
    pub relay: RelaySection,
    pub qos: QosSection,
    pub security: SecuritySection,
    pub pricing: PricingSection,
    pub monte_carlo: MonteCarloSection,
    pub sweep: SweepSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    /// Rings of subcells around the center, `H`.
    pub rings: u32,
    /// Macrocell radius `R` in meters; the relaying distance is `R / H`.
    pub macrocell_radius: f64,
    pub reuse_factor: u32,
    pub destination: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            rings: 4,
            macrocell_radius: 1000.0,
            reuse_factor: 7,
            destination: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadioSection {
    pub transmit_power: f64,
    pub sensitivity: f64,
    pub path_loss_exponent: f64,
    pub noise_power: f64,
    /// First-tier co-slot interferers counted in the SINR.
    pub interferers: usize,
}

impl Default for RadioSection {
    fn default() -> Self {
        RadioSection {
            transmit_power: 0.75,
            sensitivity: 1e-5,
            path_loss_exponent: 2.0,
            noise_power: 1e-4,
            interferers: 6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Convention {
    Inclusive,
    Exclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrafficSection {
    /// Reference primary arrival rate.
    pub base_arrival_rate: f64,
    /// Multiplies the primary arrival rate only; service rates stay at
    /// their multiples of the reference rate.
    pub rate_scale: f64,
    /// `mu_p` as a multiple of the reference rate.
    pub primary_service_ratio: f64,
    /// `mu_S` as a multiple of the reference rate.
    pub secondary_service_ratio: f64,
    pub channels: u32,
    pub convention: Convention,
}

impl Default for TrafficSection {
    fn default() -> Self {
        TrafficSection {
            base_arrival_rate: 1.0,
            rate_scale: CALIBRATED_RATE_SCALE,
            primary_service_ratio: 4.0,
            secondary_service_ratio: 4.0,
            channels: 10,
            convention: Convention::Inclusive,
        }
    }
}

impl TrafficSection {
    pub fn primary(&self) -> Result<PrimaryTraffic, CliError> {
        let convention = match self.convention {
            Convention::Inclusive => SumConvention::Inclusive,
            Convention::Exclusive => SumConvention::Exclusive,
        };
        Ok(PrimaryTraffic::new(
            self.rate_scale * self.base_arrival_rate,
            self.primary_service_ratio * self.base_arrival_rate,
            self.channels,
        )?
        .with_convention(convention))
    }

    pub fn demand(&self, primary: &PrimaryTraffic) -> Result<SecondaryDemand, CliError> {
        Ok(SecondaryDemand::new(
            self.secondary_service_ratio * self.base_arrival_rate,
            primary,
        )?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Shortest,
    Secure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Order {
    Distance,
    Reputation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RelaySection {
    pub willingness: f64,
    pub mode: Mode,
    /// Trust placed in every relay in secure mode.
    pub reputation: f64,
    pub order: Order,
    /// Backup channels per hop for `analyze`, `mc` and `sweep`.
    pub backup_channels: u32,
}

impl Default for RelaySection {
    fn default() -> Self {
        RelaySection {
            willingness: 0.75,
            mode: Mode::Shortest,
            reputation: 0.9,
            order: Order::Distance,
            backup_channels: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QosSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub link_reliability_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub route_reliability_min: Option<f64>,
    #[serde(default = "default_delay_max")]
    pub delay_max: f64,
}

fn default_delay_max() -> f64 {
    3.5
}

impl Default for QosSection {
    fn default() -> Self {
        QosSection {
            link_reliability_min: Some(0.9),
            route_reliability_min: None,
            delay_max: default_delay_max(),
        }
    }
}

impl QosSection {
    pub fn request(&self) -> Result<QosRequest, CliError> {
        match (self.link_reliability_min, self.route_reliability_min) {
            (Some(xi), None) => Ok(QosRequest::with_link_target(xi, self.delay_max)?),
            (None, Some(xi)) => Ok(QosRequest::with_route_target(xi, self.delay_max)?),
            _ => Err(CliError::Config(
                "qos: set exactly one of link_reliability_min and route_reliability_min".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioKind {
    Mixture,
    Coupled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SecuritySection {
    /// Share of subcells hosting an eavesdropper; the count is rounded.
    pub eavesdropper_fraction: f64,
    /// Hours per day the eavesdropper listens.
    pub observation_hours: f64,
    /// Duration of one secondary transmission; `1 / mu_S` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub transmission_time: Option<f64>,
    pub reputation_weight: f64,
    pub reputation_episodes: usize,
    pub advertised_level: f64,
    pub honest_share: f64,
    pub delivered_low: f64,
    pub delivered_high: f64,
    pub scenario: ScenarioKind,
}

impl Default for SecuritySection {
    fn default() -> Self {
        SecuritySection {
            eavesdropper_fraction: 0.1,
            observation_hours: 8.0,
            transmission_time: None,
            reputation_weight: 0.02,
            reputation_episodes: 100,
            advertised_level: 0.9,
            honest_share: 0.15,
            delivered_low: 0.5,
            delivered_high: 0.9,
            scenario: ScenarioKind::Mixture,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PricingSection {
    pub channel_fee: f64,
    pub time_fee: f64,
    pub utility_scale: f64,
    /// Per-hop time charged by the time fee; `1 / mu_S` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hop_time: Option<f64>,
}

impl Default for PricingSection {
    fn default() -> Self {
        PricingSection {
            channel_fee: 0.01,
            time_fee: 0.01,
            utility_scale: 0.01,
            hop_time: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonteCarloSection {
    pub episodes: u64,
    pub seed: u64,
}

impl Default for MonteCarloSection {
    fn default() -> Self {
        MonteCarloSection {
            episodes: 100_000,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    /// Dotted key of the varied field, e.g. `relay.willingness`.
    pub parameter: String,
    pub values: Vec<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            parameter: "relay.willingness".into(),
            values: (1..=10).map(|i| i as f64 / 10.0).collect(),
        }
    }
}

/// Model objects built from a validated configuration.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub grid: HexGrid,
    pub radio: RadioParams,
    pub traffic: PrimaryTraffic,
    pub demand: SecondaryDemand,
    pub security: SecurityEnv,
    pub fees: PricingParams,
    pub link_sinr: f64,
}

impl Scenario {
    /// Relay model with `backup` channels per hop and willingness `p`.
    pub fn relay_model(
        &self,
        config: &Config,
        p: f64,
        backup: u32,
    ) -> Result<RelayModel, CliError> {
        let mut model = RelayModel::with_backup_channels(p, &self.traffic, &self.demand, backup)?;
        if config.relay.mode == Mode::Secure {
            model = model.secure(Reputation::uniform(config.relay.reputation))?;
        }
        if config.relay.order == Order::Reputation {
            model = model.ordered_by(CandidateOrder::ReputationFirst);
        }
        Ok(model)
    }

    /// Purchase evaluation at willingness `p`.
    pub fn market(&self, config: &Config, p: f64) -> Market<'_> {
        Market {
            grid: &self.grid,
            traffic: &self.traffic,
            demand: &self.demand,
            willingness: p,
            link_sinr: self.link_sinr,
            security: self.security,
            fees: self.fees,
            hop_time: config.pricing.hop_time,
            reputation: (config.relay.mode == Mode::Secure)
                .then(|| Reputation::uniform(config.relay.reputation)),
        }
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let config: Config = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration is serializable")
    }

    /// Checks every section by building the model objects.
    pub fn validate(&self) -> Result<(), CliError> {
        self.scenario()?;
        self.qos.request()?;
        let r = &self.relay;
        if !(0.0..=1.0).contains(&r.willingness) {
            return Err(CliError::field("relay.willingness", "must be in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&r.reputation) {
            return Err(CliError::field("relay.reputation", "must be in [0, 1]"));
        }
        if r.backup_channels < 1 || r.backup_channels > self.traffic.channels {
            return Err(CliError::field(
                "relay.backup_channels",
                "must be in 1..=traffic.channels",
            ));
        }
        let s = &self.security;
        if !(s.reputation_weight > 0.0 && s.reputation_weight < 1.0) {
            return Err(CliError::field(
                "security.reputation_weight",
                "must be in (0, 1)",
            ));
        }
        if s.reputation_episodes == 0 {
            return Err(CliError::field(
                "security.reputation_episodes",
                "must be >= 1",
            ));
        }
        self.reputation_scenario(1.0).validate()?;
        if self.monte_carlo.episodes == 0 {
            return Err(CliError::field("monte_carlo.episodes", "must be >= 1"));
        }
        if self.sweep.values.is_empty() {
            return Err(CliError::field("sweep.values", "needs at least one value"));
        }
        self.with_value(&self.sweep.parameter, self.sweep.values[0])?;
        Ok(())
    }

    pub fn scenario(&self) -> Result<Scenario, CliError> {
        let g = &self.grid;
        if g.rings < 1 {
            return Err(CliError::field("grid.rings", "must be >= 1"));
        }
        if !(g.macrocell_radius > 0.0) {
            return Err(CliError::field("grid.macrocell_radius", "must be > 0"));
        }
        let subcell_radius = g.macrocell_radius / g.rings as f64 / 3f64.sqrt();
        let grid = HexGrid::build(g.rings, subcell_radius, g.reuse_factor)?
            .with_destination(g.destination)?;
        let rd = &self.radio;
        let radio = RadioParams::new(
            rd.transmit_power,
            rd.sensitivity,
            rd.path_loss_exponent,
            rd.noise_power,
            subcell_radius,
        )?;
        let link_sinr = sinr(
            &radio,
            g.reuse_factor,
            Interference::first_tier(rd.interferers),
        )?;
        let traffic = self.traffic.primary()?;
        let demand = self.traffic.demand(&traffic)?;
        let s = &self.security;
        let eavesdroppers =
            SecurityEnv::eavesdroppers_for_fraction(s.eavesdropper_fraction, grid.len())?;
        let security = SecurityEnv::new(
            eavesdroppers,
            grid.len(),
            self.traffic.channels,
            s.observation_hours,
            s.transmission_time.unwrap_or_else(|| demand.service_time()),
        )?;
        let p = &self.pricing;
        let fees = PricingParams::new(p.channel_fee, p.time_fee, p.utility_scale)?;
        if let Some(h) = p.hop_time {
            if !(h >= 0.0) {
                return Err(CliError::field("pricing.hop_time", "must be >= 0"));
            }
        }
        Ok(Scenario {
            grid,
            radio,
            traffic,
            demand,
            security,
            fees,
            link_sinr,
        })
    }

    /// Reputation scenario; `coupling_availability` is `p_a * xi` used by
    /// the protocol-coupled mode.
    pub fn reputation_scenario(&self, coupling_availability: f64) -> ReputationScenario {
        let s = &self.security;
        match s.scenario {
            ScenarioKind::Mixture => ReputationScenario::Mixture {
                advertised: s.advertised_level,
                honest_share: s.honest_share,
                low: s.delivered_low,
                high: s.delivered_high,
            },
            ScenarioKind::Coupled => ReputationScenario::ProtocolCoupled {
                advertised: s.advertised_level,
                honest_share: s.honest_share,
                low: s.delivered_low,
                high: s.delivered_high,
                channel_availability: coupling_availability,
                link_reliability: 1.0,
                degree: 6,
            },
        }
    }

    /// Copy with the dotted `key` set to `value`.
    pub fn with_value(&self, key: &str, value: f64) -> Result<Config, CliError> {
        let mut c = self.clone();
        let count = || -> Result<u32, CliError> {
            if value >= 0.0 && value.fract() == 0.0 && value <= u32::MAX as f64 {
                Ok(value as u32)
            } else {
                Err(CliError::field(
                    "sweep.values",
                    format!("{value} is not a count"),
                ))
            }
        };
        match key {
            "grid.rings" => c.grid.rings = count()?,
            "grid.macrocell_radius" => c.grid.macrocell_radius = value,
            "traffic.rate_scale" => c.traffic.rate_scale = value,
            "traffic.primary_service_ratio" => c.traffic.primary_service_ratio = value,
            "traffic.secondary_service_ratio" => c.traffic.secondary_service_ratio = value,
            "traffic.channels" => c.traffic.channels = count()?,
            "relay.willingness" => c.relay.willingness = value,
            "relay.reputation" => c.relay.reputation = value,
            "relay.backup_channels" => c.relay.backup_channels = count()?,
            "qos.link_reliability_min" => {
                c.qos.link_reliability_min = Some(value);
                c.qos.route_reliability_min = None;
            }
            "qos.route_reliability_min" => {
                c.qos.route_reliability_min = Some(value);
                c.qos.link_reliability_min = None;
            }
            "qos.delay_max" => c.qos.delay_max = value,
            "security.eavesdropper_fraction" => c.security.eavesdropper_fraction = value,
            "security.observation_hours" => c.security.observation_hours = value,
            "pricing.channel_fee" => c.pricing.channel_fee = value,
            "pricing.time_fee" => c.pricing.time_fee = value,
            "pricing.utility_scale" => c.pricing.utility_scale = value,
            _ => {
                return Err(CliError::field(
                    "sweep.parameter",
                    format!("`{key}` cannot be swept"),
                ))
            }
        }
        Ok(c)
    }
}
