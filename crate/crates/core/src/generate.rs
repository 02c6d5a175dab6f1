//! Seeded synthetic streams.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Zipf};

use crate::error::{invalid, Error, Result};
use crate::rng::substream;

const GEN_STREAM: u64 = 0x6e6;

#[derive(Clone, Debug, PartialEq)]
pub enum Kind {
    /// i.i.d. draws from Zipf(`alpha`) over `1..=n`.
    Zipf(f64),
    Uniform,
    /// Every update hits coordinate 1.
    SingleHeavy,
    /// Uniformly random order of a fixed multiset; the deterministic Zipf(1.2)
    /// profile unless frequencies are given.
    Shuffled(Option<Vec<u64>>),
    /// i.i.d. Zipf(1.2) whose popular coordinates rotate every quarter of the
    /// stream, so windows see changing heavy hitters.
    SlidingTrace,
}

impl Kind {
    /// Whether outputs are uniformly random orders (random-order preconditions).
    pub fn is_random_order(&self) -> bool {
        matches!(self, Kind::Shuffled(_))
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kind::Zipf(a) => write!(f, "zipf({a})"),
            Kind::Uniform => f.write_str("uniform"),
            Kind::SingleHeavy => f.write_str("single-heavy"),
            Kind::Shuffled(None) => f.write_str("shuffled"),
            Kind::Shuffled(Some(v)) => {
                write!(f, "shuffled({})", v.iter().map(u64::to_string).collect::<Vec<_>>().join(","))
            }
            Kind::SlidingTrace => f.write_str("sliding-trace"),
        }
    }
}

impl FromStr for Kind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = match s.split_once('(') {
            Some((name, rest)) => (name, Some(rest.strip_suffix(')').ok_or_else(|| invalid(format!("unbalanced `{s}`")))?)),
            None => (s, None),
        };
        match (name, arg) {
            ("zipf", None) => Ok(Kind::Zipf(1.2)),
            ("zipf", Some(a)) => {
                let a: f64 = a.parse().map_err(|_| invalid(format!("bad Zipf exponent `{a}`")))?;
                if !(a > 0.0 && a.is_finite()) {
                    return Err(invalid("Zipf exponent must be positive"));
                }
                Ok(Kind::Zipf(a))
            }
            ("uniform", None) => Ok(Kind::Uniform),
            ("single-heavy", None) => Ok(Kind::SingleHeavy),
            ("shuffled", None) => Ok(Kind::Shuffled(None)),
            ("shuffled", Some(f)) => {
                let v = f.split(',').map(|x| x.trim().parse::<u64>().map_err(|_| invalid(format!("bad frequency `{x}`")))).collect::<Result<_>>()?;
                Ok(Kind::Shuffled(Some(v)))
            }
            ("sliding-trace", None) => Ok(Kind::SlidingTrace),
            _ => Err(invalid(format!("unknown stream kind `{s}`"))),
        }
    }
}

/// `f_i = max(1, round(m i^(-alpha) / H))` with `H = sum_i i^(-alpha)`.
pub fn zipf_profile(n: u64, m: u64, alpha: f64) -> Vec<u64> {
    let h: f64 = (1..=n).map(|i| (i as f64).powf(-alpha)).sum();
    (1..=n).map(|i| ((m as f64 * (i as f64).powf(-alpha) / h).round() as u64).max(1)).collect()
}

/// Coordinates of a multiset in sorted order.
pub fn expand(freqs: &[u64]) -> Vec<u64> {
    freqs.iter().enumerate().flat_map(|(i, &f)| std::iter::repeat_n(i as u64 + 1, f as usize)).collect()
}

/// A uniformly random order of the multiset `freqs`.
pub fn shuffled(freqs: &[u64], seed: u64) -> Vec<u64> {
    let mut v = expand(freqs);
    v.shuffle(&mut substream(seed, GEN_STREAM));
    v
}

/// `m` coordinates in `1..=n`; `Shuffled` ignores `m` when frequencies are given.
pub fn generate(kind: &Kind, n: u64, m: u64, seed: u64) -> Result<Vec<u64>> {
    if n == 0 || m == 0 {
        return Err(invalid("n and m must be at least 1"));
    }
    let mut rng = substream(seed, GEN_STREAM);
    Ok(match kind {
        Kind::Zipf(a) => {
            let z = Zipf::new(n as f64, *a).map_err(|e| invalid(e.to_string()))?;
            (0..m).map(|_| z.sample(&mut rng) as u64).collect()
        }
        Kind::Uniform => (0..m).map(|_| rng.random_range(1..=n)).collect(),
        Kind::SingleHeavy => vec![1; m as usize],
        Kind::Shuffled(f) => {
            let f = match f {
                Some(f) if f.len() as u64 > n => return Err(invalid("more frequencies than coordinates")),
                Some(f) => f.clone(),
                None => zipf_profile(n, m, 1.2),
            };
            shuffled(&f, seed)
        }
        Kind::SlidingTrace => {
            let z = Zipf::new(n as f64, 1.2).map_err(|e| invalid(e.to_string()))?;
            let phase = m.div_ceil(4);
            (0..m)
                .map(|t| {
                    let shift = (t / phase) * n.div_ceil(4);
                    (z.sample(&mut rng) as u64 - 1 + shift) % n + 1
                })
                .collect()
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    #[test]
    fn kinds_parse() {
        assert_eq!("zipf(1.2)".parse::<Kind>().unwrap(), Kind::Zipf(1.2));
        assert_eq!("shuffled(2,2)".parse::<Kind>().unwrap(), Kind::Shuffled(Some(vec![2, 2])));
        assert_eq!("single-heavy".parse::<Kind>().unwrap(), Kind::SingleHeavy);
        assert!("zipf(-1)".parse::<Kind>().is_err());
        assert!("normal".parse::<Kind>().is_err());
        for k in ["zipf(1.5)", "uniform", "shuffled", "shuffled(1,0,3)", "sliding-trace"] {
            assert_eq!(k.parse::<Kind>().unwrap().to_string(), k);
        }
    }

    #[test]
    fn single_heavy() {
        assert_eq!(generate(&Kind::SingleHeavy, 10, 100, 0).unwrap(), vec![1; 100]);
    }

    #[test]
    fn deterministic_and_in_range() {
        for k in [Kind::Zipf(1.2), Kind::Uniform, Kind::SlidingTrace, Kind::Shuffled(None)] {
            let a = generate(&k, 100, 5000, 7).unwrap();
            assert_eq!(a, generate(&k, 100, 5000, 7).unwrap());
            assert_ne!(a, generate(&k, 100, 5000, 8).unwrap());
            assert!(a.iter().all(|&c| (1..=100).contains(&c)));
        }
    }

    #[test]
    fn profile_and_shuffle_preserve_multiset() {
        let f = zipf_profile(100, 2000, 1.2);
        assert_eq!(f[0], (2000.0 / (1..=100).map(|i| (i as f64).powf(-1.2)).sum::<f64>()).round() as u64);
        assert!(f.iter().all(|&x| x >= 1));
        let mut s = shuffled(&f, 3);
        s.sort_unstable();
        assert_eq!(s, expand(&f));
    }

    #[test]
    fn shuffles_of_two_pairs_are_uniform() {
        let mut hist: BTreeMap<Vec<u64>, u64> = BTreeMap::new();
        let seeds = 10_000;
        for seed in 0..seeds {
            *hist.entry(shuffled(&[2, 2], seed)).or_insert(0) += 1;
        }
        assert_eq!(hist.len(), 6);
        let e = seeds as f64 / 6.0;
        let chi: f64 = hist.values().map(|&o| (o as f64 - e).powi(2) / e).sum();
        // chi-square with 5 degrees of freedom, upper 0.1% point 20.5
        assert!(chi < 20.5, "{chi}");
    }
}
