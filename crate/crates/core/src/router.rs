//! Route discovery as an absorbing Markov chain.
//!
//! From every subcell the relay candidates are the adjacent subcells, tried in
//! priority order. The candidate at position `m` receives the packet with
//! probability `p_a * p * (1 - p)^(m - 1) * xi` (times the relay reputation in
//! secure mode); the remaining mass ends the discovery in the no-route state.
//! The destination and the no-route state are absorbing.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_probability, Error, Result};
use crate::grid::HexGrid;
use crate::spectrum::{PrimaryTraffic, SecondaryDemand};

/// Tolerance on the row sums of the transition structure.
pub const STOCHASTIC_TOL: f64 = 1e-12;
/// Relative tolerance on linear-solve residuals.
pub const RESIDUAL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RoutingMode {
    /// Shortest available path: relays ranked by distance, no trust factor.
    #[default]
    ShortestAvailable,
    /// Secure path: the relay probability is weighted by relay reputation.
    Secure,
}

/// How relay candidates are ranked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CandidateOrder {
    /// By distance to the destination.
    #[default]
    Distance,
    /// By descending reputation, distance breaking ties. Not part of the
    /// original protocol; offered for comparison only.
    ReputationFirst,
}

/// Trust level `s` of each directed relay link.
#[derive(Debug, Clone, PartialEq)]
pub struct Reputation {
    default: f64,
    links: HashMap<(usize, usize), f64>,
}

impl Default for Reputation {
    fn default() -> Self {
        Reputation::uniform(1.0)
    }
}

impl Reputation {
    pub fn uniform(level: f64) -> Self {
        Reputation {
            default: level,
            links: HashMap::new(),
        }
    }

    /// Overrides the trust of the link `from -> to`.
    pub fn set(&mut self, from: usize, to: usize, level: f64) {
        self.links.insert((from, to), level);
    }

    pub fn level(&self, from: usize, to: usize) -> f64 {
        self.links.get(&(from, to)).copied().unwrap_or(self.default)
    }

    pub fn default_level(&self) -> f64 {
        self.default
    }

    fn validate(&self) -> Result<()> {
        check_probability("reputation", self.default)?;
        for &level in self.links.values() {
            check_probability("reputation", level)?;
        }
        Ok(())
    }
}

/// Per-hop relaying parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct RelayModel {
    /// Probability `p` that an adjacent user is willing to relay.
    pub willingness: f64,
    /// Probability `p_a` that enough idle channels exist.
    pub channel_availability: f64,
    /// Probability `xi` that no primary user returns during the hop.
    pub link_reliability: f64,
    pub mode: RoutingMode,
    pub reputation: Reputation,
    pub order: CandidateOrder,
}

impl RelayModel {
    pub fn new(willingness: f64, channel_availability: f64, link_reliability: f64) -> Result<Self> {
        let model = RelayModel {
            willingness,
            channel_availability,
            link_reliability,
            mode: RoutingMode::ShortestAvailable,
            reputation: Reputation::default(),
            order: CandidateOrder::Distance,
        };
        model.validate()?;
        Ok(model)
    }

    /// Single-channel relaying: one idle channel is enough and the hop lasts
    /// a full secondary service time.
    pub fn from_traffic(
        willingness: f64,
        traffic: &PrimaryTraffic,
        demand: &SecondaryDemand,
    ) -> Result<Self> {
        Self::new(
            willingness,
            traffic.availability(1)?,
            traffic.link_reliability(demand.service_time())?,
        )
    }

    /// Relaying with `backup` channels: `backup` idle channels are needed and
    /// the user switches channel every `t_S / backup`.
    pub fn with_backup_channels(
        willingness: f64,
        traffic: &PrimaryTraffic,
        demand: &SecondaryDemand,
        backup: u32,
    ) -> Result<Self> {
        if backup == 0 {
            return Err(Error::invalid("backup_channels", "must be >= 1"));
        }
        Self::new(
            willingness,
            traffic.availability(backup)?,
            traffic.link_reliability(demand.service_time() / backup as f64)?,
        )
    }

    pub fn secure(mut self, reputation: Reputation) -> Result<Self> {
        reputation.validate()?;
        self.mode = RoutingMode::Secure;
        self.reputation = reputation;
        Ok(self)
    }

    pub fn ordered_by(mut self, order: CandidateOrder) -> Self {
        self.order = order;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_probability("willingness", self.willingness)?;
        check_probability("channel_availability", self.channel_availability)?;
        check_probability("link_reliability", self.link_reliability)?;
        self.reputation.validate()
    }

    /// Trust factor applied to the link `from -> to`; always 1 in
    /// shortest-available mode.
    pub fn trust(&self, from: usize, to: usize) -> f64 {
        match self.mode {
            RoutingMode::ShortestAvailable => 1.0,
            RoutingMode::Secure => self.reputation.level(from, to),
        }
    }

    /// Probability of relaying to the candidate at position `m` (1-based)
    /// whose link trust is `trust`.
    pub fn position_prob(&self, m: usize, trust: f64) -> f64 {
        let p = self.willingness;
        let base =
            self.channel_availability * p * (1.0 - p).powi(m as i32 - 1) * self.link_reliability;
        match self.mode {
            RoutingMode::ShortestAvailable => base,
            RoutingMode::Secure => base * trust,
        }
    }

    /// Probability of relaying to position `m` under the default trust level.
    pub fn relay_prob(&self, m: usize) -> Result<f64> {
        if !(1..=6).contains(&m) {
            return Err(Error::invalid("position", format!("{m} is outside 1..=6")));
        }
        Ok(self.position_prob(m, self.reputation.default_level()))
    }

    /// Total relaying probability `p_t` over `degree` candidates and the
    /// no-route mass `1 - p_t`.
    pub fn total_relay_prob(&self, degree: usize) -> Result<(f64, f64)> {
        if !(1..=6).contains(&degree) {
            return Err(Error::invalid(
                "degree",
                format!("{degree} is outside 1..=6"),
            ));
        }
        let total: f64 = (1..=degree)
            .map(|m| self.relay_prob(m))
            .sum::<Result<f64>>()?;
        Ok((total, 1.0 - total))
    }
}

/// A ranked relay candidate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub subcell: usize,
    /// 1-based priority position.
    pub position: usize,
    pub trust: f64,
}

/// Ranked relay candidates of every subcell toward one destination.
#[derive(Debug, Clone, PartialEq)]
pub struct RoutingTable {
    destination: usize,
    candidates: Vec<Vec<Candidate>>,
}

impl RoutingTable {
    pub fn build(grid: &HexGrid, model: &RelayModel) -> Result<Self> {
        let destination = grid.destination();
        let mut candidates = Vec::with_capacity(grid.len());
        for id in 0..grid.len() {
            if id == destination {
                candidates.push(Vec::new());
                continue;
            }
            let mut ranked: Vec<(usize, f64)> = grid
                .neighbor_priority(id, destination)?
                .into_iter()
                .map(|n| (n, model.trust(id, n)))
                .collect();
            if model.order == CandidateOrder::ReputationFirst {
                // stable: equal trust keeps the distance ranking
                ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
            }
            candidates.push(
                ranked
                    .into_iter()
                    .enumerate()
                    .map(|(i, (subcell, trust))| Candidate {
                        subcell,
                        position: i + 1,
                        trust,
                    })
                    .collect(),
            );
        }
        Ok(RoutingTable {
            destination,
            candidates,
        })
    }

    pub fn destination(&self) -> usize {
        self.destination
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn candidates(&self, subcell: usize) -> &[Candidate] {
        &self.candidates[subcell]
    }
}

/// Distribution of the source subcell over transient states.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum InitialDistribution {
    /// Every non-destination subcell equally likely.
    #[default]
    Uniform,
    /// A single source subcell.
    Source(usize),
    /// Explicit weights per subcell id (destination entry ignored);
    /// normalized on use.
    Weights(Vec<f64>),
}

/// Absorbing states, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Absorbing {
    Destination,
    NoRoute,
}

impl Absorbing {
    pub const ALL: [Absorbing; 2] = [Absorbing::Destination, Absorbing::NoRoute];

    pub fn label(self) -> &'static str {
        match self {
            Absorbing::Destination => "D",
            Absorbing::NoRoute => "nr",
        }
    }
}

/// Canonical-form absorbing chain: transient-to-transient block `Q`,
/// transient-to-absorbing block `R` (columns: destination, no-route) and the
/// initial distribution over transient states.
#[derive(Debug, Clone, PartialEq)]
pub struct AbsorbingChain {
    transient: Vec<usize>,
    q: DMatrix<f64>,
    r: DMatrix<f64>,
    initial: DVector<f64>,
}

impl AbsorbingChain {
    /// Assembles a chain from raw blocks and validates it.
    pub fn from_blocks(
        transient: Vec<usize>,
        q: DMatrix<f64>,
        r: DMatrix<f64>,
        initial: DVector<f64>,
    ) -> Result<Self> {
        let chain = AbsorbingChain {
            transient,
            q,
            r,
            initial,
        };
        chain.validate()?;
        Ok(chain)
    }

    /// Subcell ids of the transient states, in state order.
    pub fn transient_states(&self) -> &[usize] {
        &self.transient
    }

    pub fn transient_count(&self) -> usize {
        self.transient.len()
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }

    pub fn initial(&self) -> &DVector<f64> {
        &self.initial
    }

    /// Replaces the initial distribution.
    pub fn with_initial(mut self, initial: &InitialDistribution) -> Result<Self> {
        self.initial = initial_vector(&self.transient, initial)?;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.transient.len();
        if self.q.shape() != (n, n) || self.r.shape() != (n, 2) || self.initial.len() != n {
            return Err(Error::MalformedChain(format!(
                "block shapes Q {:?}, R {:?}, f {} for {n} transient states",
                self.q.shape(),
                self.r.shape(),
                self.initial.len()
            )));
        }
        if self
            .q
            .iter()
            .chain(self.r.iter())
            .any(|&x| !(0.0..=1.0 + STOCHASTIC_TOL).contains(&x))
        {
            return Err(Error::MalformedChain("entry outside [0, 1]".into()));
        }
        for i in 0..n {
            let row = self.q.row(i).sum() + self.r.row(i).sum();
            if (row - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::MalformedChain(format!("row {i} sums to {row}")));
            }
        }
        let total = self.initial.sum();
        if (total - 1.0).abs() > 1e-12 || self.initial.iter().any(|&x| x < 0.0) {
            return Err(Error::MalformedChain(format!(
                "initial distribution sums to {total}"
            )));
        }
        Ok(())
    }

    /// Full transition matrix in canonical order: absorbing states
    /// (destination, no-route) first, then transient states.
    pub fn canonical_matrix(&self) -> DMatrix<f64> {
        let n = self.transient.len();
        let mut p = DMatrix::zeros(n + 2, n + 2);
        p[(0, 0)] = 1.0;
        p[(1, 1)] = 1.0;
        p.view_mut((2, 0), (n, 2)).copy_from(&self.r);
        p.view_mut((2, 2), (n, n)).copy_from(&self.q);
        p
    }

    /// Relabels transient states: new state `i` is old state `order[i]`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let n = self.transient.len();
        let mut seen = vec![false; n];
        if order.len() != n
            || order
                .iter()
                .any(|&i| i >= n || std::mem::replace(&mut seen[i], true))
        {
            return Err(Error::invalid(
                "order",
                "not a permutation of the transient states",
            ));
        }
        let q = DMatrix::from_fn(n, n, |i, j| self.q[(order[i], order[j])]);
        let r = DMatrix::from_fn(n, 2, |i, j| self.r[(order[i], j)]);
        let initial = DVector::from_fn(n, |i, _| self.initial[order[i]]);
        let transient = order.iter().map(|&i| self.transient[i]).collect();
        Self::from_blocks(transient, q, r, initial)
    }

    /// LU factorization of `I - Q`, shared by the hitting-time and
    /// absorption solves.
    pub fn fundamental(&self) -> Result<Fundamental> {
        let n = self.transient.len();
        let a = DMatrix::identity(n, n) - &self.q;
        let lu = a.clone().lu();
        Ok(Fundamental { a, lu })
    }

    /// Expected number of steps to absorption with dwell time 1 per state.
    pub fn expected_hops(&self) -> Result<Hops> {
        self.expected_time(&DVector::from_element(self.transient.len(), 1.0))
    }

    /// Expected time to absorption with per-state dwell times `dwell`.
    pub fn expected_time(&self, dwell: &DVector<f64>) -> Result<Hops> {
        let per_state = self.fundamental()?.solve_vector(dwell)?;
        let mean = self.average(&per_state);
        Ok(Hops { per_state, mean })
    }

    /// Absorption probabilities `E = (I - Q)^-1 R` and their average under
    /// the initial distribution.
    pub fn absorption(&self) -> Result<Absorption> {
        let e = self.fundamental()?.solve_matrix(&self.r)?;
        for i in 0..e.nrows() {
            let row = e.row(i).sum();
            if (row - 1.0).abs() > 1e-9 {
                return Err(Error::Singular {
                    residual: (row - 1.0).abs(),
                });
            }
        }
        let averaged = e.tr_mul(&self.initial) / self.initial.sum();
        Ok(Absorption {
            to_destination: averaged[0],
            no_route: averaged[1],
            per_state: e,
        })
    }

    /// Hop-count distribution `P(T = k) = f Q^(k-1) r`, where `r` is the
    /// one-step absorption vector, for `k = 1..=max_hops`.
    pub fn hop_count_pmf(&self, max_hops: usize) -> Vec<f64> {
        let exit: DVector<f64> = DVector::from_fn(self.transient.len(), |i, _| self.r.row(i).sum());
        let mut mass = self.initial.transpose();
        let mut out = Vec::with_capacity(max_hops);
        for _ in 0..max_hops {
            out.push((&mass * &exit)[0]);
            mass = &mass * &self.q;
        }
        out
    }

    // Dividing by the stored total keeps exact results exact when the
    // uniform weights do not sum to exactly 1 in floating point.
    fn average(&self, per_state: &DVector<f64>) -> f64 {
        self.initial.dot(per_state) / self.initial.sum()
    }

    /// Solves hop counts and absorption in one factorization.
    pub fn solve(&self) -> Result<ChainSolution> {
        let fundamental = self.fundamental()?;
        let n = self.transient.len();
        let per_state = fundamental.solve_vector(&DVector::from_element(n, 1.0))?;
        let e = fundamental.solve_matrix(&self.r)?;
        let averaged = e.tr_mul(&self.initial) / self.initial.sum();
        Ok(ChainSolution {
            mean_hops: self.average(&per_state),
            hops: per_state,
            to_destination: averaged[0],
            no_route: averaged[1],
            absorption: e,
        })
    }
}

/// Factorized `I - Q`.
#[derive(Debug, Clone)]
pub struct Fundamental {
    a: DMatrix<f64>,
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl Fundamental {
    pub fn solve_vector(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        let x = self.lu.solve(b).ok_or(Error::Singular {
            residual: f64::INFINITY,
        })?;
        check_residual(&self.a, &x, b)?;
        Ok(x)
    }

    pub fn solve_matrix(&self, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let x = self.lu.solve(b).ok_or(Error::Singular {
            residual: f64::INFINITY,
        })?;
        check_residual(&self.a, &x, b)?;
        Ok(x)
    }
}

fn check_residual<C>(
    a: &DMatrix<f64>,
    x: &nalgebra::Matrix<f64, nalgebra::Dyn, C, nalgebra::VecStorage<f64, nalgebra::Dyn, C>>,
    b: &nalgebra::Matrix<f64, nalgebra::Dyn, C, nalgebra::VecStorage<f64, nalgebra::Dyn, C>>,
) -> Result<()>
where
    C: nalgebra::Dim,
{
    let residual = (a * x - b).amax();
    let scale = 1.0 + x.amax();
    if !residual.is_finite() || residual > RESIDUAL_TOL * scale {
        return Err(Error::Singular { residual });
    }
    Ok(())
}

/// Expected time to absorption per transient state and under `f`.
#[derive(Debug, Clone, PartialEq)]
pub struct Hops {
    pub per_state: DVector<f64>,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Absorption {
    /// Rows: transient states; columns: destination, no-route.
    pub per_state: DMatrix<f64>,
    pub to_destination: f64,
    pub no_route: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainSolution {
    pub hops: DVector<f64>,
    pub mean_hops: f64,
    pub absorption: DMatrix<f64>,
    pub to_destination: f64,
    pub no_route: f64,
}

/// Builds the route-discovery chain toward the grid's destination with a
/// uniform initial distribution.
pub fn build_chain(grid: &HexGrid, model: &RelayModel) -> Result<AbsorbingChain> {
    model.validate()?;
    let table = RoutingTable::build(grid, model)?;
    chain_from_table(&table, model)
}

/// Builds the chain from a precomputed routing table.
pub fn chain_from_table(table: &RoutingTable, model: &RelayModel) -> Result<AbsorbingChain> {
    let destination = table.destination();
    let transient: Vec<usize> = (0..table.len()).filter(|&i| i != destination).collect();
    let mut state_of = vec![usize::MAX; table.len()];
    for (state, &id) in transient.iter().enumerate() {
        state_of[id] = state;
    }
    let n = transient.len();
    let mut q = DMatrix::zeros(n, n);
    let mut r = DMatrix::zeros(n, 2);
    for (state, &id) in transient.iter().enumerate() {
        let mut relayed = 0.0;
        for cand in table.candidates(id) {
            let prob = model.position_prob(cand.position, cand.trust);
            relayed += prob;
            if cand.subcell == destination {
                r[(state, 0)] += prob;
            } else {
                q[(state, state_of[cand.subcell])] += prob;
            }
        }
        r[(state, 1)] = (1.0 - relayed).max(0.0);
    }
    let initial = initial_vector(&transient, &InitialDistribution::Uniform)?;
    AbsorbingChain::from_blocks(transient, q, r, initial)
}

fn initial_vector(transient: &[usize], initial: &InitialDistribution) -> Result<DVector<f64>> {
    let n = transient.len();
    match initial {
        InitialDistribution::Uniform => Ok(DVector::from_element(n, 1.0 / n as f64)),
        InitialDistribution::Source(id) => {
            let state = transient.iter().position(|t| t == id).ok_or_else(|| {
                Error::invalid("source", format!("{id} is not a transient subcell"))
            })?;
            let mut f = DVector::zeros(n);
            f[state] = 1.0;
            Ok(f)
        }
        InitialDistribution::Weights(w) => {
            let mut f = DVector::from_fn(n, |i, _| w.get(transient[i]).copied().unwrap_or(0.0));
            if f.iter().any(|&x| x < 0.0 || !x.is_finite()) {
                return Err(Error::invalid("initial", "weights must be finite and >= 0"));
            }
            let total = f.sum();
            if total <= 0.0 {
                return Err(Error::invalid("initial", "weights sum to zero"));
            }
            f /= total;
            Ok(f)
        }
    }
}

/// Route reliability `xi^tau` under i.i.d. per-hop primary returns.
pub fn route_reliability(link_reliability: f64, route_length: f64) -> Result<f64> {
    check_probability("link_reliability", link_reliability)?;
    if !(route_length >= 0.0) {
        return Err(Error::invalid(
            "route_length",
            format!("{route_length} < 0"),
        ));
    }
    Ok(link_reliability.powf(route_length))
}

/// Per-link reliability needed for a route target: `xi_R^(1/tau)`.
pub fn min_link_reliability(route_target: f64, route_length: f64) -> Result<f64> {
    check_probability("route_reliability_min", route_target)?;
    if !(route_length > 0.0) {
        return Err(Error::invalid(
            "route_length",
            format!("{route_length} must be > 0"),
        ));
    }
    Ok(route_target.powf(1.0 / route_length))
}
