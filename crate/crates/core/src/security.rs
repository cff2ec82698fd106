//! Relay reputation and interception robustness.

use crate::error::{check_probability, Error, Result};

/// Exponential moving average of the experience a user has with one relay.
#[derive(Debug, Clone, PartialEq)]
pub struct ReputationTracker {
    advertised: f64,
    weight: f64,
    window: usize,
    current: Option<f64>,
    episode: usize,
}

/// One tracker update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub episode: usize,
    /// Current experience `s^c = min(s^e / s^a, 1)`.
    pub experience: f64,
    /// Reputation after the update.
    pub reputation: f64,
}

impl ReputationTracker {
    /// `advertised` is the security level the relay claims, `weight` the EMA
    /// weight in `(0, 1)` and `window` the number of episodes considered.
    pub fn new(advertised: f64, weight: f64, window: usize) -> Result<Self> {
        if !(advertised > 0.0 && advertised <= 1.0) {
            return Err(Error::invalid(
                "advertised",
                format!("{advertised} is not in (0, 1]"),
            ));
        }
        if !(weight > 0.0 && weight < 1.0) {
            return Err(Error::invalid(
                "weight",
                format!("{weight} is not in (0, 1)"),
            ));
        }
        Ok(ReputationTracker {
            advertised,
            weight,
            window,
            current: None,
            episode: 0,
        })
    }

    /// The weight `2 / (T + 1)` that gives the EMA the same center of mass
    /// as a `T`-episode simple average.
    pub fn window_weight(window: usize) -> f64 {
        2.0 / (window as f64 + 1.0)
    }

    pub fn advertised(&self) -> f64 {
        self.advertised
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn episode(&self) -> usize {
        self.episode
    }

    /// Reputation so far, `None` before the first observation.
    pub fn reputation(&self) -> Option<f64> {
        self.current
    }

    /// Feeds one experienced security level `s^e` (the relaying probability
    /// the relay actually delivered).
    pub fn observe(&mut self, experienced: f64) -> Result<Observation> {
        check_probability("experienced", experienced)?;
        let experience = (experienced / self.advertised).min(1.0);
        let next = match self.current {
            Some(prev) => self.weight * experience + (1.0 - self.weight) * prev,
            None => experience,
        };
        self.current = Some(next.clamp(0.0, 1.0));
        self.episode += 1;
        Ok(Observation {
            episode: self.episode,
            experience,
            reputation: next,
        })
    }
}

/// Eavesdropping environment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecurityEnv {
    pub eavesdroppers: usize,
    pub subcells: usize,
    pub channels: u32,
    /// Hours per day the eavesdropper observes the network.
    pub observation_hours: f64,
    /// Duration of one secondary transmission.
    pub transmission_time: f64,
}

impl SecurityEnv {
    pub fn new(
        eavesdroppers: usize,
        subcells: usize,
        channels: u32,
        observation_hours: f64,
        transmission_time: f64,
    ) -> Result<Self> {
        let env = SecurityEnv {
            eavesdroppers,
            subcells,
            channels,
            observation_hours,
            transmission_time,
        };
        env.validate()?;
        Ok(env)
    }

    /// Eavesdropper count from a fraction of the subcells, rounded to the
    /// nearest integer.
    pub fn eavesdroppers_for_fraction(fraction: f64, subcells: usize) -> Result<usize> {
        check_probability("eavesdropper_fraction", fraction)?;
        Ok((fraction * subcells as f64).round() as usize)
    }

    pub fn validate(&self) -> Result<()> {
        if self.subcells == 0 || self.eavesdroppers > self.subcells {
            return Err(Error::invalid(
                "eavesdroppers",
                format!("{} is not in 0..={}", self.eavesdroppers, self.subcells),
            ));
        }
        if self.channels < 1 {
            return Err(Error::invalid("channels", "must be >= 1"));
        }
        if !(self.observation_hours > 0.0 && self.observation_hours <= 24.0) {
            return Err(Error::invalid(
                "observation_hours",
                format!("{} is not in (0, 24]", self.observation_hours),
            ));
        }
        if !(self.transmission_time >= 0.0) {
            return Err(Error::invalid("transmission_time", "must be >= 0"));
        }
        Ok(())
    }
}

/// Probability of evading an eavesdropper in space, frequency and time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Robustness {
    pub spatial: f64,
    pub frequency: f64,
    pub time: f64,
}

impl Robustness {
    pub fn new(spatial: f64, frequency: f64, time: f64) -> Result<Self> {
        check_probability("spatial", spatial)?;
        check_probability("frequency", frequency)?;
        check_probability("time", time)?;
        Ok(Robustness {
            spatial,
            frequency,
            time,
        })
    }

    /// Probability that one hop is caught in all three domains.
    pub fn capture_per_hop(&self) -> f64 {
        (1.0 - self.spatial) * (1.0 - self.frequency) * (1.0 - self.time)
    }
}

pub fn robustness(env: &SecurityEnv) -> Result<Robustness> {
    env.validate()?;
    Robustness::new(
        1.0 - env.eavesdroppers as f64 / env.subcells as f64,
        1.0 - 1.0 / env.channels as f64,
        1.0 - env.observation_hours / 24.0,
    )
}

/// Interception and non-interception probabilities of a route.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interception {
    pub intercepted: f64,
    pub safe: f64,
}

/// Probability that at least one of `route_length` hops is intercepted.
/// Fractional lengths are accepted since the route length is a mean.
pub fn interception(robustness: &Robustness, route_length: f64) -> Result<Interception> {
    if !(route_length >= 0.0 && route_length.is_finite()) {
        return Err(Error::invalid(
            "route_length",
            format!("{route_length} must be finite and >= 0"),
        ));
    }
    let safe = (1.0 - robustness.capture_per_hop()).powf(route_length);
    Ok(Interception {
        intercepted: 1.0 - safe,
        safe,
    })
}
