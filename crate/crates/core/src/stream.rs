//! Stream model: updates, configuration, validation and sample outcomes.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::{invalid, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    InsertionOnly,
    SlidingWindow,
    StrictTurnstile,
    RandomOrder,
}

impl Model {
    pub fn name(self) -> &'static str {
        match self {
            Model::InsertionOnly => "insertion_only",
            Model::SlidingWindow => "sliding_window",
            Model::StrictTurnstile => "strict_turnstile",
            Model::RandomOrder => "random_order",
        }
    }

    /// Models whose updates must all be `+1`.
    pub fn unit_deltas(self) -> bool {
        !matches!(self, Model::StrictTurnstile)
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Model {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "insertion_only" => Ok(Model::InsertionOnly),
            "sliding_window" => Ok(Model::SlidingWindow),
            "strict_turnstile" => Ok(Model::StrictTurnstile),
            "random_order" => Ok(Model::RandomOrder),
            other => Err(invalid(format!("unknown stream model `{other}`"))),
        }
    }
}

/// One stream event. Coordinates are 1-based; `time` is the 1-based position.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Update {
    pub coord: u64,
    pub delta: i64,
    pub time: u64,
}

impl Update {
    pub fn unit(coord: u64, time: u64) -> Self {
        Self { coord, delta: 1, time }
    }
}

/// Unit updates for `coords`, timestamped `1..=len`.
pub fn unit_updates(coords: &[u64]) -> Vec<Update> {
    coords.iter().enumerate().map(|(k, &c)| Update::unit(c, k as u64 + 1)).collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamConfig {
    pub n: u64,
    pub model: Model,
    pub window: Option<u64>,
    pub seed: u64,
}

impl StreamConfig {
    pub fn new(n: u64, model: Model) -> Result<Self> {
        let cfg = Self { n, model, window: None, seed: 0 };
        if model == Model::SlidingWindow {
            return Err(invalid("sliding_window requires a window size"));
        }
        cfg.check()?;
        Ok(cfg)
    }

    pub fn sliding(n: u64, window: u64) -> Result<Self> {
        let cfg = Self { n, model: Model::SlidingWindow, window: Some(window), seed: 0 };
        cfg.check()?;
        Ok(cfg)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn check(&self) -> Result<()> {
        if self.n == 0 {
            return Err(invalid("universe size n must be at least 1"));
        }
        match (self.model, self.window) {
            (Model::SlidingWindow, None) => Err(invalid("sliding_window requires a window size")),
            (_, Some(0)) => Err(invalid("window size must be at least 1")),
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Error)]
pub enum Violation {
    #[error("coordinate {coord} outside [1, n]")]
    CoordOutOfRange { coord: u64 },
    #[error("time {time} does not increase")]
    NonMonotoneTime { time: u64 },
    #[error("delta {delta} is not +1")]
    NonUnitDelta { delta: i64 },
    #[error("coordinate {coord} prefix frequency {value} is negative")]
    NegativePrefix { coord: u64, value: i64 },
}

/// Checks the model contract; reports the first violating (1-based) position.
pub fn validate_stream(config: &StreamConfig, updates: &[Update]) -> Result<()> {
    config.check()?;
    let mut last_time = 0u64;
    let mut freq = std::collections::HashMap::new();
    for (k, u) in updates.iter().enumerate() {
        let fail = |violation| Err(Error::InvalidStream { position: k + 1, violation });
        if u.coord == 0 || u.coord > config.n {
            return fail(Violation::CoordOutOfRange { coord: u.coord });
        }
        if u.time <= last_time {
            return fail(Violation::NonMonotoneTime { time: u.time });
        }
        last_time = u.time;
        if config.model.unit_deltas() && u.delta != 1 {
            return fail(Violation::NonUnitDelta { delta: u.delta });
        }
        let f = freq.entry(u.coord).or_insert(0i64);
        *f += u.delta;
        if *f < 0 {
            return fail(Violation::NegativePrefix { coord: u.coord, value: *f });
        }
    }
    Ok(())
}

/// Brute-force frequency vector; entry `i - 1` holds `f_i`.
pub fn frequencies(n: u64, updates: &[Update]) -> Vec<i64> {
    let mut f = vec![0i64; n as usize];
    for u in updates {
        f[(u.coord - 1) as usize] += u.delta;
    }
    f
}

/// Frequencies over the last `w` updates.
pub fn window_frequencies(n: u64, updates: &[Update], w: u64) -> Vec<i64> {
    let start = updates.len().saturating_sub(w as usize);
    frequencies(n, &updates[start..])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Index(u64),
    Bottom,
    Fail,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleResult {
    pub outcome: Outcome,
    /// Frequency of the returned index, when the sampler knows it.
    pub frequency: Option<u64>,
    /// Repetition that produced the index.
    pub repetition: Option<u64>,
}

impl SampleResult {
    pub fn index(i: u64) -> Self {
        Self { outcome: Outcome::Index(i), frequency: None, repetition: None }
    }

    pub fn bottom() -> Self {
        Self { outcome: Outcome::Bottom, frequency: None, repetition: None }
    }

    pub fn fail() -> Self {
        Self { outcome: Outcome::Fail, frequency: None, repetition: None }
    }

    pub fn with_frequency(mut self, f: u64) -> Self {
        self.frequency = Some(f);
        self
    }

    pub fn with_repetition(mut self, r: u64) -> Self {
        self.repetition = Some(r);
        self
    }

    pub fn as_index(&self) -> Option<u64> {
        match self.outcome {
            Outcome::Index(i) => Some(i),
            _ => None,
        }
    }

    pub fn is_fail(&self) -> bool {
        self.outcome == Outcome::Fail
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn upd(coord: u64, delta: i64, time: u64) -> Update {
        Update { coord, delta, time }
    }

    #[test]
    fn insertion_only_accepts_unit_updates() {
        let cfg = StreamConfig::new(2, Model::InsertionOnly).unwrap();
        assert!(validate_stream(&cfg, &[upd(1, 1, 1), upd(2, 1, 2)]).is_ok());
    }

    #[test]
    fn strict_turnstile_negative_prefix() {
        let cfg = StreamConfig::new(2, Model::StrictTurnstile).unwrap();
        let err = validate_stream(&cfg, &[upd(1, 1, 1), upd(1, -2, 2)]).unwrap_err();
        assert_eq!(err, Error::InvalidStream { position: 2, violation: Violation::NegativePrefix { coord: 1, value: -1 } });
    }

    #[test]
    fn insertion_only_rejects_non_unit_delta() {
        let cfg = StreamConfig::new(2, Model::InsertionOnly).unwrap();
        let err = validate_stream(&cfg, &[upd(1, 2, 1)]).unwrap_err();
        assert_eq!(err, Error::InvalidStream { position: 1, violation: Violation::NonUnitDelta { delta: 2 } });
    }

    #[test]
    fn range_and_time_checks() {
        let cfg = StreamConfig::new(3, Model::InsertionOnly).unwrap();
        assert!(matches!(
            validate_stream(&cfg, &[upd(4, 1, 1)]),
            Err(Error::InvalidStream { position: 1, violation: Violation::CoordOutOfRange { coord: 4 } })
        ));
        assert!(matches!(
            validate_stream(&cfg, &[upd(1, 1, 2), upd(2, 1, 2)]),
            Err(Error::InvalidStream { position: 2, violation: Violation::NonMonotoneTime { time: 2 } })
        ));
    }

    #[test]
    fn config_checks() {
        assert!(StreamConfig::new(0, Model::InsertionOnly).is_err());
        assert!(StreamConfig::new(5, Model::SlidingWindow).is_err());
        assert!(StreamConfig::sliding(5, 0).is_err());
        assert_eq!(StreamConfig::sliding(5, 3).unwrap().window, Some(3));
        assert_eq!("random_order".parse::<Model>().unwrap(), Model::RandomOrder);
    }

    #[test]
    fn window_counts() {
        let ups = unit_updates(&[1, 1, 2]);
        assert_eq!(frequencies(2, &ups), vec![2, 1]);
        assert_eq!(window_frequencies(2, &ups, 2), vec![1, 1]);
    }
}
