//! Monte Carlo route discovery, reputation trajectories and an event-driven
//! primary queue, used as independent checks of the closed forms.

use rand::distr::{Distribution, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{check_probability, Error, Result};
use crate::grid::HexGrid;
use crate::router::{chain_from_table, AbsorbingChain, RelayModel, RoutingMode, RoutingTable};
use crate::security::{Observation, ReputationTracker, Robustness};
use crate::spectrum::PrimaryTraffic;

/// Largest hop count kept as its own histogram bin; longer walks share the
/// last bin.
pub const HOP_HISTOGRAM_BINS: usize = 64;

/// Generator for one independent stream, keyed by `(seed, stream)`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Destination,
    NoRoute,
}

/// Random draws behind one step of the walk.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HopDraw {
    pub from: usize,
    pub channels_available: bool,
    /// Position of the first willing neighbour, if any.
    pub willing_position: Option<usize>,
    pub trusted: bool,
    pub pu_returned: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub source: usize,
    /// Visited subcells, starting at the source and ending at the
    /// destination when reached.
    pub trace: Vec<usize>,
    pub outcome: Outcome,
    /// Transitions taken, counting the final absorbing one.
    pub hops: usize,
    pub pu_interruptions: usize,
    pub draws: Vec<HopDraw>,
}

/// Route-discovery walker over a fixed routing table.
#[derive(Debug, Clone)]
pub struct Simulator {
    table: RoutingTable,
    model: RelayModel,
    chain: AbsorbingChain,
    cumulative: Vec<f64>,
}

impl Simulator {
    /// Walker for the grid's destination; sources follow the uniform
    /// initial distribution of the analytic chain.
    pub fn new(grid: &HexGrid, model: &RelayModel) -> Result<Self> {
        model.validate()?;
        let table = RoutingTable::build(grid, model)?;
        let chain = chain_from_table(&table, model)?;
        Self::with_chain(table, model.clone(), chain)
    }

    /// Walker whose sources follow `chain`'s initial distribution.
    pub fn with_chain(
        table: RoutingTable,
        model: RelayModel,
        chain: AbsorbingChain,
    ) -> Result<Self> {
        let total = chain.initial().sum();
        if !(total > 0.0) {
            return Err(Error::invalid("initial", "initial distribution is empty"));
        }
        let mut acc = 0.0;
        let cumulative = chain
            .initial()
            .iter()
            .map(|w| {
                acc += w / total;
                acc
            })
            .collect();
        Ok(Simulator {
            table,
            model,
            chain,
            cumulative,
        })
    }

    pub fn chain(&self) -> &AbsorbingChain {
        &self.chain
    }

    pub fn model(&self) -> &RelayModel {
        &self.model
    }

    fn draw_source(&self, rng: &mut impl Rng) -> usize {
        let u: f64 = rng.random();
        let state = self
            .cumulative
            .iter()
            .position(|&c| u < c)
            .unwrap_or(self.cumulative.len() - 1);
        self.chain.transient_states()[state]
    }

    /// One walk from a source drawn from the initial distribution.
    pub fn episode(&self, rng: &mut impl Rng) -> Episode {
        let source = self.draw_source(rng);
        self.walk(source, rng)
    }

    /// One walk from `source`. Each step checks channel availability, scans
    /// the ranked neighbours for the first willing one, checks its trust in
    /// secure mode and finally the primary return during the hop.
    pub fn walk(&self, source: usize, rng: &mut impl Rng) -> Episode {
        let destination = self.table.destination();
        let m = &self.model;
        let mut current = source;
        let mut trace = vec![source];
        let mut draws = Vec::new();
        let mut pu_interruptions = 0;
        let outcome = loop {
            if current == destination {
                break Outcome::Destination;
            }
            let mut draw = HopDraw {
                from: current,
                channels_available: rng.random_bool(m.channel_availability),
                willing_position: None,
                trusted: false,
                pu_returned: false,
            };
            if !draw.channels_available {
                draws.push(draw);
                break Outcome::NoRoute;
            }
            let candidate = self
                .table
                .candidates(current)
                .iter()
                .find(|_| rng.random_bool(m.willingness));
            let Some(candidate) = candidate else {
                draws.push(draw);
                break Outcome::NoRoute;
            };
            draw.willing_position = Some(candidate.position);
            draw.trusted = match m.mode {
                RoutingMode::ShortestAvailable => true,
                RoutingMode::Secure => rng.random_bool(candidate.trust),
            };
            if !draw.trusted {
                draws.push(draw);
                break Outcome::NoRoute;
            }
            draw.pu_returned = !rng.random_bool(m.link_reliability);
            draws.push(draw);
            if draw.pu_returned {
                pu_interruptions += 1;
                break Outcome::NoRoute;
            }
            current = candidate.subcell;
            trace.push(current);
        };
        Episode {
            source,
            trace,
            outcome,
            hops: draws.len(),
            pu_interruptions,
            draws,
        }
    }
}

/// Walk with its own `(seed, index)` stream.
pub fn simulate_episode(grid: &HexGrid, model: &RelayModel, seed: u64) -> Result<Episode> {
    let sim = Simulator::new(grid, model)?;
    Ok(sim.episode(&mut stream_rng(seed, 0)))
}

/// Integer tallies; merging is associative and commutative so any
/// evaluation order gives the same totals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tally {
    pub episodes: u64,
    pub reached: u64,
    pub hops: u64,
    pub hops_squared: u64,
    pub pu_interruptions: u64,
    /// `hop_histogram[k - 1]` walks took `k` hops.
    pub hop_histogram: Vec<u64>,
    /// Steps from a subcell with at least `m` candidates, by `m - 1`.
    pub position_exposure: [u64; 6],
    /// Steps that relayed to position `m`, by `m - 1`.
    pub position_relays: [u64; 6],
}

impl Default for Tally {
    fn default() -> Self {
        Tally {
            episodes: 0,
            reached: 0,
            hops: 0,
            hops_squared: 0,
            pu_interruptions: 0,
            hop_histogram: vec![0; HOP_HISTOGRAM_BINS],
            position_exposure: [0; 6],
            position_relays: [0; 6],
        }
    }
}

impl Tally {
    fn record(&mut self, ep: &Episode, table: &RoutingTable) {
        let hops = ep.hops as u64;
        self.episodes += 1;
        self.reached += u64::from(ep.outcome == Outcome::Destination);
        self.hops += hops;
        self.hops_squared += hops * hops;
        self.pu_interruptions += ep.pu_interruptions as u64;
        self.hop_histogram[ep.hops.clamp(1, HOP_HISTOGRAM_BINS) - 1] += 1;
        for draw in &ep.draws {
            let degree = table.candidates(draw.from).len();
            for m in 0..degree.min(6) {
                self.position_exposure[m] += 1;
            }
            let relayed = draw.channels_available && draw.trusted && !draw.pu_returned;
            if let (true, Some(pos)) = (relayed, draw.willing_position) {
                self.position_relays[pos - 1] += 1;
            }
        }
    }

    fn merge(mut self, other: Tally) -> Tally {
        self.episodes += other.episodes;
        self.reached += other.reached;
        self.hops += other.hops;
        self.hops_squared += other.hops_squared;
        self.pu_interruptions += other.pu_interruptions;
        for (a, b) in self.hop_histogram.iter_mut().zip(other.hop_histogram) {
            *a += b;
        }
        for m in 0..6 {
            self.position_exposure[m] += other.position_exposure[m];
            self.position_relays[m] += other.position_relays[m];
        }
        self
    }

    /// Empirical probability of relaying to position `m` (1-based) from a
    /// subcell that has at least `m` candidates, with its standard error.
    pub fn position_frequency(&self, m: usize) -> Option<(f64, f64)> {
        let n = *self.position_exposure.get(m.checked_sub(1)?)?;
        if n == 0 {
            return None;
        }
        let p = self.position_relays[m - 1] as f64 / n as f64;
        Some((p, (p * (1.0 - p) / n as f64).sqrt()))
    }
}

/// Monte Carlo estimate with standard errors `sample_std / sqrt(n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct McEstimate {
    pub seed: u64,
    pub episodes: u64,
    pub mean_hops: f64,
    pub mean_hops_se: f64,
    pub to_destination: f64,
    pub to_destination_se: f64,
    pub no_route: f64,
    pub no_route_se: f64,
    pub mean_pu_interruptions: f64,
    pub tally: Tally,
}

impl McEstimate {
    fn from_tally(seed: u64, tally: Tally) -> Self {
        let n = tally.episodes as f64;
        let mean = tally.hops as f64 / n;
        let var = if tally.episodes > 1 {
            ((tally.hops_squared as f64 - n * mean * mean) / (n - 1.0)).max(0.0)
        } else {
            0.0
        };
        let reached = tally.reached as f64 / n;
        let prop_se = if tally.episodes > 1 {
            (reached * (1.0 - reached) / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        McEstimate {
            seed,
            episodes: tally.episodes,
            mean_hops: mean,
            mean_hops_se: (var / n).sqrt(),
            to_destination: reached,
            to_destination_se: prop_se,
            no_route: 1.0 - reached,
            no_route_se: prop_se,
            mean_pu_interruptions: tally.pu_interruptions as f64 / n,
            tally,
        }
    }
}

/// Runs `episodes` independent walks in parallel. Episode `i` uses stream
/// `i` of `seed`, so the result does not depend on thread scheduling.
pub fn run_monte_carlo(
    grid: &HexGrid,
    model: &RelayModel,
    episodes: u64,
    seed: u64,
) -> Result<McEstimate> {
    run_simulator(&Simulator::new(grid, model)?, episodes, seed)
}

pub fn run_simulator(sim: &Simulator, episodes: u64, seed: u64) -> Result<McEstimate> {
    if episodes == 0 {
        return Err(Error::invalid("episodes", "must be >= 1"));
    }
    let tally = (0..episodes)
        .into_par_iter()
        .fold(Tally::default, |mut t, i| {
            let ep = sim.episode(&mut stream_rng(seed, i));
            t.record(&ep, &sim.table);
            t
        })
        .reduce(Tally::default, Tally::merge);
    Ok(McEstimate::from_tally(seed, tally))
}

/// How the relay's delivered security level is generated per episode.
#[derive(Debug, Clone, PartialEq)]
pub enum ReputationScenario {
    /// Delivers the advertised level with probability `honest_share`,
    /// otherwise a level uniform on `[low, high]`.
    Mixture {
        advertised: f64,
        honest_share: f64,
        low: f64,
        high: f64,
    },
    /// Draws the relay's willingness from the mixture and reports the
    /// realised relaying probability `p_t` over `degree` candidates.
    ProtocolCoupled {
        advertised: f64,
        honest_share: f64,
        low: f64,
        high: f64,
        channel_availability: f64,
        link_reliability: f64,
        degree: usize,
    },
}

impl ReputationScenario {
    /// Setting where the advertised 0.9 is delivered 15% of the time.
    pub fn mostly_dishonest() -> Self {
        ReputationScenario::Mixture {
            advertised: 0.9,
            honest_share: 0.15,
            low: 0.5,
            high: 0.9,
        }
    }

    fn parts(&self) -> (f64, f64, f64, f64) {
        match *self {
            ReputationScenario::Mixture {
                advertised,
                honest_share,
                low,
                high,
            }
            | ReputationScenario::ProtocolCoupled {
                advertised,
                honest_share,
                low,
                high,
                ..
            } => (advertised, honest_share, low, high),
        }
    }

    pub fn advertised(&self) -> f64 {
        self.parts().0
    }

    pub fn validate(&self) -> Result<()> {
        let (advertised, share, low, high) = self.parts();
        check_probability("advertised", advertised)?;
        if advertised == 0.0 {
            return Err(Error::invalid("advertised", "must be > 0"));
        }
        check_probability("honest_share", share)?;
        check_probability("low", low)?;
        check_probability("high", high)?;
        if low > high {
            return Err(Error::invalid("low", format!("{low} exceeds high {high}")));
        }
        if let ReputationScenario::ProtocolCoupled {
            channel_availability,
            link_reliability,
            degree,
            ..
        } = *self
        {
            check_probability("channel_availability", channel_availability)?;
            check_probability("link_reliability", link_reliability)?;
            if !(1..=6).contains(&degree) {
                return Err(Error::invalid(
                    "degree",
                    format!("{degree} is outside 1..=6"),
                ));
            }
        }
        Ok(())
    }

    fn draw(&self, rng: &mut impl Rng) -> f64 {
        let (advertised, share, low, high) = self.parts();
        let level = if rng.random_bool(share) {
            advertised
        } else if low == high {
            low
        } else {
            Uniform::new_inclusive(low, high)
                .expect("validated bounds")
                .sample(rng)
        };
        match *self {
            ReputationScenario::Mixture { .. } => level,
            ReputationScenario::ProtocolCoupled {
                channel_availability,
                link_reliability,
                degree,
                ..
            } => {
                channel_availability * link_reliability * (1.0 - (1.0 - level).powi(degree as i32))
            }
        }
    }

    /// Expected current experience `E[min(s^e / s^a, 1)]` of the mixture
    /// scenario; `None` for the protocol-coupled one.
    pub fn mean_experience(&self) -> Option<f64> {
        let ReputationScenario::Mixture {
            advertised: a,
            honest_share: q,
            low,
            high,
        } = *self
        else {
            return None;
        };
        let uniform_part = if high == low {
            (low / a).min(1.0)
        } else {
            // mean of min(u / a, 1) for u uniform on [low, high]
            let cut = a.clamp(low, high);
            let below = (cut * cut - low * low) / (2.0 * a);
            let above = high - cut;
            (below + above) / (high - low)
        };
        Some(q + (1.0 - q) * uniform_part)
    }
}

/// Reputation trajectory over `episodes` interactions.
pub fn simulate_reputation(
    scenario: &ReputationScenario,
    episodes: usize,
    weight: f64,
    seed: u64,
) -> Result<Vec<Observation>> {
    scenario.validate()?;
    let mut tracker = ReputationTracker::new(scenario.advertised(), weight, episodes)?;
    let mut rng = stream_rng(seed, 0);
    (0..episodes)
        .map(|_| tracker.observe(scenario.draw(&mut rng).min(1.0)))
        .collect()
}

/// Sample variance of the reputation values of a trajectory.
pub fn trajectory_variance(trajectory: &[Observation]) -> f64 {
    let n = trajectory.len() as f64;
    if trajectory.len() < 2 {
        return 0.0;
    }
    let mean = trajectory.iter().map(|o| o.reputation).sum::<f64>() / n;
    trajectory
        .iter()
        .map(|o| (o.reputation - mean).powi(2))
        .sum::<f64>()
        / (n - 1.0)
}

/// Interception estimate from per-hop Bernoulli draws in the three domains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterceptionEstimate {
    pub trials: u64,
    pub intercepted: f64,
    pub se: f64,
}

pub fn simulate_interception(
    robustness: &Robustness,
    hops: u32,
    trials: u64,
    seed: u64,
) -> Result<InterceptionEstimate> {
    if trials == 0 {
        return Err(Error::invalid("trials", "must be >= 1"));
    }
    let caught: u64 = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i);
            let hit = (0..hops).any(|_| {
                // evaluate all three so the stream layout is fixed
                let s = !rng.random_bool(robustness.spatial);
                let f = !rng.random_bool(robustness.frequency);
                let t = !rng.random_bool(robustness.time);
                s && f && t
            });
            u64::from(hit)
        })
        .sum();
    let p = caught as f64 / trials as f64;
    Ok(InterceptionEstimate {
        trials,
        intercepted: p,
        se: (p * (1.0 - p) / trials as f64).sqrt(),
    })
}

/// Time-averaged occupancy of an event-driven M/M/c primary queue.
#[derive(Debug, Clone, PartialEq)]
pub struct QueueTrace {
    pub horizon: f64,
    pub events: u64,
    /// Share of time with `b` idle channels, `b = 0..=c`.
    pub free_share: Vec<f64>,
}

fn next_event(traffic: &PrimaryTraffic, in_system: usize, rng: &mut impl Rng) -> (f64, bool) {
    let busy = in_system.min(traffic.channels as usize) as f64;
    let up = traffic.arrival_rate;
    let down = busy * traffic.service_rate;
    let total = up + down;
    let u: f64 = rng.random();
    let dt = -(1.0 - u).ln() / total;
    let arrival = rng.random::<f64>() * total < up;
    (dt, arrival)
}

/// Runs the primary queue for `horizon` time units after a `warmup`.
pub fn simulate_primary_queue(
    traffic: &PrimaryTraffic,
    warmup: f64,
    horizon: f64,
    seed: u64,
) -> Result<QueueTrace> {
    traffic.validate()?;
    if !(horizon > 0.0 && warmup >= 0.0) {
        return Err(Error::invalid("horizon", "must be > 0 with warmup >= 0"));
    }
    if traffic.arrival_rate == 0.0 {
        let mut free_share = vec![0.0; traffic.channels as usize + 1];
        free_share[traffic.channels as usize] = 1.0;
        return Ok(QueueTrace {
            horizon,
            events: 0,
            free_share,
        });
    }
    let c = traffic.channels as usize;
    let mut rng = stream_rng(seed, 0);
    let mut n = 0usize;
    let mut clock = -warmup;
    let mut time = vec![0.0; c + 1];
    let mut events = 0;
    while clock < horizon {
        let (dt, arrival) = next_event(traffic, n, &mut rng);
        let start = clock.max(0.0);
        let end = (clock + dt).min(horizon);
        if end > start {
            time[c - n.min(c)] += end - start;
        }
        clock += dt;
        if clock < horizon {
            n = if arrival { n + 1 } else { n - 1 };
            if clock >= 0.0 {
                events += 1;
            }
        }
    }
    Ok(QueueTrace {
        horizon,
        events,
        free_share: time.into_iter().map(|t| t / horizon).collect(),
    })
}
