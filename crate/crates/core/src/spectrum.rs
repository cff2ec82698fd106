//! Primary-network occupancy: how many of the `c` licensed channels are idle
//! when a secondary user makes a relaying decision, and how likely a primary
//! user is to reclaim the channel during a transmission interval.
//!
//! Primary sessions arrive as a Poisson process and hold a channel for an
//! exponential time, so channel occupancy is an M/M/c birth/death process.

use crate::error::{check_positive, Error, Result};

/// Which free-channel states enter the availability and return sums.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SumConvention {
    /// Sum over `b = a..=c`, counting the state where every channel is idle.
    #[default]
    Inclusive,
    /// Sum over `b = a..c`, leaving out the all-idle state.
    Exclusive,
}

/// Primary arrival and service rates over a pool of `c` channels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrimaryTraffic {
    pub arrival_rate: f64,
    pub service_rate: f64,
    pub channels: u32,
    pub convention: SumConvention,
}

impl PrimaryTraffic {
    pub fn new(arrival_rate: f64, service_rate: f64, channels: u32) -> Result<Self> {
        let traffic = PrimaryTraffic {
            arrival_rate,
            service_rate,
            channels,
            convention: SumConvention::Inclusive,
        };
        traffic.validate()?;
        Ok(traffic)
    }

    pub fn with_convention(mut self, convention: SumConvention) -> Self {
        self.convention = convention;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.arrival_rate >= 0.0 && self.arrival_rate.is_finite()) {
            return Err(Error::invalid(
                "arrival_rate",
                format!("{} must be finite and >= 0", self.arrival_rate),
            ));
        }
        check_positive("service_rate", self.service_rate)?;
        if self.channels < 2 {
            return Err(Error::invalid("channels", format!("{} < 2", self.channels)));
        }
        let rho = self.utilization();
        if rho >= 1.0 {
            return Err(Error::UnstableSystem { rho });
        }
        Ok(())
    }

    /// Offered load `r_p = lambda_p / mu_p` in Erlangs.
    pub fn offered_load(&self) -> f64 {
        self.arrival_rate / self.service_rate
    }

    /// Load per channel `rho_p = r_p / c`.
    pub fn utilization(&self) -> f64 {
        self.offered_load() / self.channels as f64
    }

    /// Mean primary holding time `t_p = 1 / mu_p`.
    pub fn service_time(&self) -> f64 {
        1.0 / self.service_rate
    }

    /// Probability that the system is empty (every channel idle).
    pub fn empty_probability(&self) -> f64 {
        let r = self.offered_load();
        let c = self.channels as usize;
        let mut term = 1.0;
        let mut sum = 0.0;
        for n in 0..c {
            if n > 0 {
                term *= r / n as f64;
            }
            sum += term;
        }
        // term is r^(c-1)/(c-1)!; advance to r^c/c!
        let last = term * r / c as f64;
        1.0 / (sum + last / (1.0 - self.utilization()))
    }

    /// Steady-state probabilities of `n = 0..=max_sessions` primary sessions
    /// in the system (sessions beyond `c` wait in queue).
    pub fn steady_state(&self, max_sessions: usize) -> Vec<f64> {
        let r = self.offered_load();
        let rho = self.utilization();
        let c = self.channels as usize;
        let mut out = Vec::with_capacity(max_sessions + 1);
        let mut term = self.empty_probability();
        for n in 0..=max_sessions {
            if n > 0 {
                term *= if n <= c { r / n as f64 } else { rho };
            }
            out.push(term);
        }
        out
    }

    /// Distribution of the number of idle channels.
    pub fn free_channel_pmf(&self) -> Result<FreeChannelPmf> {
        self.validate()?;
        let c = self.channels as usize;
        let busy = self.steady_state(c);
        let mut probs = vec![0.0; c + 1];
        for b in 1..=c {
            probs[b] = busy[c - b];
        }
        // Every channel occupied, including the queue tail.
        probs[0] = busy[c] / (1.0 - self.utilization());
        Ok(FreeChannelPmf {
            probs,
            convention: self.convention,
        })
    }

    /// Probability that at least `required` channels are idle.
    pub fn availability(&self, required: u32) -> Result<f64> {
        self.free_channel_pmf()?.at_least(required)
    }

    /// Mean primary-return probability over the idle-channel distribution,
    /// for a secondary transmission lasting `interval`.
    pub fn pu_return(&self, interval: f64) -> Result<f64> {
        self.reliability_curve()?.pu_return(interval)
    }

    /// Precomputes the idle-channel distribution for repeated evaluation of
    /// the return probability at different intervals.
    pub fn reliability_curve(&self) -> Result<ReliabilityCurve> {
        Ok(ReliabilityCurve {
            pmf: self.free_channel_pmf()?,
            arrival_rate: self.arrival_rate,
        })
    }

    /// Link reliability: probability that no primary user returns to the
    /// channel during `interval`.
    pub fn link_reliability(&self, interval: f64) -> Result<f64> {
        Ok(1.0 - self.pu_return(interval)?)
    }
}

/// Probability vector over the number of idle channels `b = 0..=c`.
///
/// Entry `0` carries all states with every channel busy (including queued
/// sessions), so the vector sums to one.
#[derive(Debug, Clone, PartialEq)]
pub struct FreeChannelPmf {
    probs: Vec<f64>,
    convention: SumConvention,
}

impl FreeChannelPmf {
    pub fn channels(&self) -> u32 {
        (self.probs.len() - 1) as u32
    }

    pub fn get(&self, free: u32) -> f64 {
        self.probs.get(free as usize).copied().unwrap_or(0.0)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    fn summed_states(&self, from: u32) -> std::ops::RangeInclusive<u32> {
        let c = self.channels();
        match self.convention {
            SumConvention::Inclusive => from..=c,
            SumConvention::Exclusive => from..=c - 1,
        }
    }

    /// Probability of at least `required` idle channels.
    pub fn at_least(&self, required: u32) -> Result<f64> {
        let c = self.channels();
        if required < 1 || required > c {
            return Err(Error::invalid(
                "required",
                format!("{required} is outside 1..={c}"),
            ));
        }
        Ok(self.summed_states(required).map(|b| self.get(b)).sum())
    }
}

/// Primary-return probability as a function of the transmission interval.
#[derive(Debug, Clone, PartialEq)]
pub struct ReliabilityCurve {
    pmf: FreeChannelPmf,
    arrival_rate: f64,
}

impl ReliabilityCurve {
    pub fn pu_return(&self, interval: f64) -> Result<f64> {
        let mut total = 0.0;
        for b in self.pmf.summed_states(1) {
            total += self.pmf.get(b) * pu_return_given_free(self.arrival_rate, interval, b)?;
        }
        Ok(total)
    }

    pub fn reliability(&self, interval: f64) -> Result<f64> {
        Ok(1.0 - self.pu_return(interval)?)
    }
}

/// Probability that one of `free` idle channels, the one held by the secondary
/// user, is claimed by a primary arrival within `interval`.
///
/// The Poisson arrival count is truncated at `free`; each of `k` arrivals picks
/// the held channel with probability `k / free`.
pub fn pu_return_given_free(arrival_rate: f64, interval: f64, free: u32) -> Result<f64> {
    if free == 0 {
        return Err(Error::invalid("free", "no channel is held"));
    }
    if !(interval >= 0.0 && interval.is_finite()) {
        return Err(Error::invalid(
            "interval",
            format!("{interval} must be finite and >= 0"),
        ));
    }
    if !(arrival_rate >= 0.0 && arrival_rate.is_finite()) {
        return Err(Error::invalid(
            "arrival_rate",
            format!("{arrival_rate} must be finite and >= 0"),
        ));
    }
    let x = arrival_rate * interval;
    let b = free as f64;
    let mut poisson = (-x).exp();
    let mut total = 0.0;
    for k in 1..=free {
        poisson *= x / k as f64;
        total += k as f64 / b * poisson;
    }
    Ok(total)
}

/// Secondary-user session parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecondaryDemand {
    pub service_rate: f64,
    /// Mean primary holding time `t_p`, cached from the primary traffic.
    pub primary_service_time: f64,
}

impl SecondaryDemand {
    pub fn new(service_rate: f64, traffic: &PrimaryTraffic) -> Result<Self> {
        check_positive("secondary_service_rate", service_rate)?;
        Ok(SecondaryDemand {
            service_rate,
            primary_service_time: traffic.service_time(),
        })
    }

    /// Per-hop transmission time `t_S = 1 / mu_S`.
    pub fn service_time(&self) -> f64 {
        1.0 / self.service_rate
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    #[test]
    fn two_channel_balance() {
        // Balance equations with lambda = mu = 1, c = 2:
        // pi1 = pi0, pi2 = pi1/2, pi(n+1) = pi(n)/2 beyond; sum = pi0 (1 + 1 + 1) = 1.
        let t = PrimaryTraffic::new(1.0, 1.0, 2).unwrap();
        assert_relative_eq!(t.empty_probability(), 1.0 / 3.0, max_relative = 1e-14);
        let pmf = t.free_channel_pmf().unwrap();
        assert_relative_eq!(pmf.get(1), 1.0 / 3.0, max_relative = 1e-14);
        assert_relative_eq!(pmf.get(2), 1.0 / 3.0, max_relative = 1e-14);
        assert_relative_eq!(pmf.get(0), 1.0 / 3.0, max_relative = 1e-14);
        assert_relative_eq!(t.availability(1).unwrap(), 2.0 / 3.0, max_relative = 1e-14);
    }

    #[test]
    fn ten_channels_light_load() {
        let t = PrimaryTraffic::new(0.25, 1.0, 10).unwrap();
        // Direct summation: p0 = 1 / (sum_{n<10} r^n/n! + r^10/(10! (1 - 0.025)))
        let r: f64 = 0.25;
        let direct = 1.0
            / ((0..10)
                .map(|n| r.powi(n) / factorial(n as u32))
                .sum::<f64>()
                + r.powi(10) / (factorial(10) * (1.0 - 0.025)));
        assert_relative_eq!(t.empty_probability(), direct, max_relative = 1e-14);
        assert!((direct - 0.7788).abs() < 1e-4);
        let pmf = t.free_channel_pmf().unwrap();
        assert!((pmf.get(9) - 0.1947).abs() < 1e-4);
        assert_relative_eq!(pmf.get(10), direct, max_relative = 1e-14);
    }

    #[test]
    fn idle_primary_network() {
        let t = PrimaryTraffic::new(0.0, 1.0, 10).unwrap();
        let pmf = t.free_channel_pmf().unwrap();
        assert_eq!(pmf.get(10), 1.0);
        assert!((0..10).all(|b| pmf.get(b) == 0.0));
        for a in 1..=10 {
            assert_eq!(t.availability(a).unwrap(), 1.0);
        }
        assert_eq!(t.pu_return(1.0).unwrap(), 0.0);
        assert_eq!(t.link_reliability(1.0).unwrap(), 1.0);
    }

    #[test]
    fn availability_boundary_is_empty_probability() {
        let t = PrimaryTraffic::new(3.0, 1.0, 5).unwrap();
        assert_relative_eq!(
            t.availability(5).unwrap(),
            t.empty_probability(),
            max_relative = 1e-14
        );
        assert!(t.availability(0).is_err());
        assert!(t.availability(6).is_err());
    }

    #[test]
    fn exclusive_convention_drops_idle_state() {
        let t = PrimaryTraffic::new(1.0, 1.0, 2)
            .unwrap()
            .with_convention(SumConvention::Exclusive);
        assert_relative_eq!(t.availability(1).unwrap(), 1.0 / 3.0, max_relative = 1e-14);
        assert_eq!(t.availability(2).unwrap(), 0.0);
    }

    #[test]
    fn unstable_and_invalid_traffic() {
        assert!(matches!(
            PrimaryTraffic::new(10.0, 1.0, 10),
            Err(Error::UnstableSystem { .. })
        ));
        assert!(PrimaryTraffic::new(1.0, 1.0, 1).is_err());
        assert!(PrimaryTraffic::new(-1.0, 1.0, 4).is_err());
        assert!(PrimaryTraffic::new(1.0, 0.0, 4).is_err());
    }

    #[test]
    fn return_given_free_examples() {
        assert_relative_eq!(
            pu_return_given_free(1.0, 1.0, 1).unwrap(),
            (-1f64).exp(),
            max_relative = 1e-14
        );
        assert_eq!(pu_return_given_free(0.0, 3.0, 4).unwrap(), 0.0);
        // sum_{k<=9} (k/9) 0.25^k/k! e^-0.25
        let oracle: f64 = (0..=9)
            .map(|k| k as f64 / 9.0 * 0.25f64.powi(k) / factorial(k as u32) * (-0.25f64).exp())
            .sum();
        let v = pu_return_given_free(0.25, 1.0, 9).unwrap();
        assert_relative_eq!(v, oracle, max_relative = 1e-13);
        assert!((v - 0.25 / 9.0).abs() < 1e-6);
        assert!(pu_return_given_free(1.0, 1.0, 0).is_err());
    }

    #[test]
    fn return_composes_pmf_and_per_state_terms() {
        let t = PrimaryTraffic::new(1.0, 1.0, 2).unwrap();
        let expected = (1.0 / 3.0) * pu_return_given_free(1.0, 1.0, 1).unwrap()
            + (1.0 / 3.0) * pu_return_given_free(1.0, 1.0, 2).unwrap();
        assert_relative_eq!(t.pu_return(1.0).unwrap(), expected, max_relative = 1e-14);
    }

    // The Poisson sum is truncated at b, so each per-state term eventually
    // decays; monotonicity holds while at most one arrival is expected.
    #[test]
    fn return_increases_with_interval() {
        let t = PrimaryTraffic::new(6.0, 4.0, 10).unwrap();
        let mut prev = 0.0;
        for i in 1..=200 {
            let v = t.pu_return(i as f64 / 1200.0).unwrap();
            assert!(v > prev);
            prev = v;
        }
        assert!(t.link_reliability(1e-9).unwrap() > 1.0 - 1e-8);
    }

    #[test]
    fn demand_times() {
        let t = PrimaryTraffic::new(1.0, 4.0, 10).unwrap();
        let d = SecondaryDemand::new(8.0, &t).unwrap();
        assert_eq!(d.service_time() * d.service_rate, 1.0);
        assert_eq!(d.primary_service_time, 0.25);
        assert!(SecondaryDemand::new(0.0, &t).is_err());
    }

    proptest! {
        #[test]
        fn steady_state_sums_to_one(lambda in 0.0f64..9.0, c in 2u32..14) {
            let mu = 1.0;
            prop_assume!(lambda / c as f64 <= 0.95);
            let t = PrimaryTraffic::new(lambda, mu, c).unwrap();
            let pmf = t.free_channel_pmf().unwrap();
            let total: f64 = pmf.as_slice().iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }

        #[test]
        fn availability_nonincreasing(lambda in 0.0f64..8.0, c in 2u32..12) {
            prop_assume!(lambda / (c as f64) < 0.95);
            let t = PrimaryTraffic::new(lambda, 1.0, c).unwrap();
            let vals: Vec<f64> = (1..=c).map(|a| t.availability(a).unwrap()).collect();
            for w in vals.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-15);
            }
        }

        #[test]
        fn return_given_free_bounded(x in 0.0f64..40.0, b in 1u32..15) {
            let v = pu_return_given_free(x, 1.0, b).unwrap();
            prop_assert!((0.0..=1.0).contains(&v));
        }

        // Monotonicity in b needs at most one expected arrival per interval;
        // for larger x the b = 1 -> 2 step already increases.
        #[test]
        fn return_given_free_nonincreasing_in_free(x in 0.0f64..=1.0, b in 1u32..15) {
            let v = pu_return_given_free(x, 1.0, b).unwrap();
            let next = pu_return_given_free(x, 1.0, b + 1).unwrap();
            prop_assert!(next <= v + 1e-15);
        }

        #[test]
        fn reliability_nonincreasing_in_time(lambda in 0.01f64..8.0, t1 in 0.001f64..1.0, frac in 0.0f64..=1.0) {
            let t1 = t1 / lambda;
            let dt = frac * (1.0 / lambda - t1).max(0.0);
            let t = PrimaryTraffic::new(lambda, 1.0, 10).unwrap();
            let a = t.link_reliability(t1).unwrap();
            let b = t.link_reliability(t1 + dt).unwrap();
            prop_assert!(b <= a + 1e-15);
        }
    }
}
