//! Perfect (not truly perfect) `L_p` sampler for `p < 1` on insertion-only streams.
//!
//! Every coordinate is duplicated `D` times and duplicate `(i, j)` receives
//! weight `e_{ij}^(-1/p)` per update of `i`, with `e_{ij}` standard
//! exponential. Then `|z_{ij}|^(-p) = e_{ij} / f_i^p` is exponential with
//! rate `f_i^p`, so the heaviest duplicate belongs to `i` with probability
//! `f_i^p / F_p`. A Misra-Gries summary over the weighted derived stream
//! reports it when it carries at least half of the mass; the failure event
//! depends on the winning index only through a term that vanishes as `D` grows.

use std::collections::HashMap;

use rand_distr::{Distribution, Exp1};

use crate::error::{invalid, Result};
use crate::heavyhitters::MGSummary;
use crate::measure::Exponent;
use crate::rng::{mix, substream};
use crate::stream::SampleResult;

/// Multiplicities are scaled by `2^20` and rounded.
pub const PRECISION_BITS: i32 = 20;
/// Counters in the derived-stream summary (`eps = 1/100`).
pub const MG_COUNTERS: usize = 100;
/// Per-duplicate weight ceiling; reached only for `e_{ij} < 2^(-80p)`.
pub const WEIGHT_CAP: u128 = 1 << 100;

/// `round(2^20 e^(-1/p))`, saturated at [`WEIGHT_CAP`].
pub fn scaled_weight(e: f64, p: f64) -> u128 {
    let w = (e.powf(-1.0 / p) * 2f64.powi(PRECISION_BITS)).round();
    if !w.is_finite() || w >= WEIGHT_CAP as f64 {
        WEIGHT_CAP
    } else {
        w as u128
    }
}

/// Index of the smallest of independent exponentials with the given rates.
pub fn argmin_exponential<R: rand::Rng + ?Sized>(rates: &[f64], rng: &mut R) -> usize {
    let mut best = (f64::INFINITY, 0);
    for (i, &l) in rates.iter().enumerate() {
        let x: f64 = Exp1.sample(rng);
        if x / l < best.0 {
            best = (x / l, i);
        }
    }
    best.1
}

/// One sampler instance with lazily materialized exponentials.
#[derive(Clone, Debug)]
pub struct SmallPInstance {
    p: f64,
    d: u64,
    seed: u64,
    exps: HashMap<u64, Vec<(f64, u128)>>,
    mg: MGSummary<u128>,
}

impl SmallPInstance {
    pub fn new(p: Exponent, d: u64, seed: u64) -> Result<Self> {
        let pf = p.as_f64();
        if !(pf > 0.0 && pf < 1.0) {
            return Err(invalid("small-p sampling needs p in (0, 1)"));
        }
        if d < 16 {
            return Err(invalid("duplication factor must be at least 16"));
        }
        Ok(Self { p: pf, d, seed, exps: HashMap::new(), mg: MGSummary::with_budget(MG_COUNTERS) })
    }

    fn row(&mut self, i: u64) -> &[(f64, u128)] {
        let (p, d, seed) = (self.p, self.d, self.seed);
        self.exps.entry(i).or_insert_with(|| {
            let mut rng = substream(mix(seed, 0x5a11), i);
            (0..d)
                .map(|_| {
                    let e: f64 = Exp1.sample(&mut rng);
                    (e, scaled_weight(e, p))
                })
                .collect()
        })
    }

    /// `e_{ij}` for 1-based `i` and 0-based `j`.
    pub fn exponential(&mut self, i: u64, j: u64) -> f64 {
        self.row(i)[j as usize].0
    }

    pub fn update(&mut self, coord: u64) {
        let d = self.d;
        let base = (coord - 1) * d + 1;
        let weights: Vec<u128> = self.row(coord).iter().map(|x| x.1).collect();
        for (j, w) in weights.into_iter().enumerate() {
            self.mg.update_weighted(base + j as u64, w);
        }
    }

    /// Total derived mass.
    pub fn mass(&self) -> u128 {
        self.mg.total()
    }

    /// The top summary entry if its estimate reaches half of the mass.
    pub fn majority(&self) -> Option<(u64, u64, u128)> {
        let (key, est) = *self.mg.entries().first()?;
        (est >= self.mg.total() - est).then(|| ((key - 1) / self.d + 1, (key - 1) % self.d, est))
    }

    pub fn result(&self) -> SampleResult {
        if self.mg.total() == 0 {
            return SampleResult::bottom();
        }
        match self.majority() {
            Some((i, _, _)) => SampleResult::index(i),
            None => SampleResult::fail(),
        }
    }
}

/// Independent instances; a draw reports the first that succeeds.
#[derive(Clone, Debug)]
pub struct SmallPSampler {
    instances: Vec<SmallPInstance>,
}

impl SmallPSampler {
    pub fn new(p: Exponent, d: u64, instances: usize, seed: u64) -> Result<Self> {
        if instances == 0 {
            return Err(invalid("need at least one instance"));
        }
        let instances = (0..instances as u64).map(|k| SmallPInstance::new(p, d, mix(seed, k))).collect::<Result<_>>()?;
        Ok(Self { instances })
    }

    pub fn update(&mut self, coord: u64) {
        for s in &mut self.instances {
            s.update(coord);
        }
    }

    pub fn draw(&self) -> SampleResult {
        let mut last = SampleResult::fail();
        for s in &self.instances {
            last = s.result();
            if !last.is_fail() {
                return last;
            }
        }
        last
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream::Outcome;

    fn half() -> Exponent {
        Exponent::new(1, 2).unwrap()
    }

    #[test]
    fn weights() {
        assert_eq!(scaled_weight(1.0, 0.5), 1 << 20);
        assert_eq!(scaled_weight(0.25, 0.5), 16 << 20);
        assert_eq!(scaled_weight(1e-300, 0.5), WEIGHT_CAP);
        assert_eq!(scaled_weight(100.0, 0.5), 105);
    }

    #[test]
    fn single_coordinate() {
        let mut s = SmallPSampler::new(half(), 32, 8, 3).unwrap();
        for _ in 0..5 {
            s.update(4);
        }
        // one coordinate: its top duplicate may still miss a majority, but never another index
        assert!(matches!(s.draw().outcome, Outcome::Index(4) | Outcome::Fail));
    }

    #[test]
    fn exponentials_are_consistent() {
        let mut s = SmallPInstance::new(half(), 16, 9).unwrap();
        let a = s.exponential(3, 7);
        s.update(3);
        s.update(1);
        assert_eq!(s.exponential(3, 7), a);
        let mut t = SmallPInstance::new(half(), 16, 9).unwrap();
        assert_eq!(t.exponential(3, 7), a);
    }

    #[test]
    fn min_stability() {
        let mut rng = substream(1, 2);
        let trials = 200_000;
        let hits = (0..trials).filter(|_| argmin_exponential(&[3.0, 1.0], &mut rng) == 0).count();
        let p = 0.75;
        let sd = (p * (1.0 - p) / trials as f64).sqrt();
        assert!((hits as f64 / trials as f64 - p).abs() < 4.0 * sd);
    }

    #[test]
    fn majority_is_sound_when_top_duplicate_dominates() {
        // materialize instances; whenever z_max > 20 ||z_rest||_1 the summary must report it
        let mut checked = 0;
        for seed in 0..300 {
            let mut s = SmallPInstance::new(half(), 16, seed).unwrap();
            let stream = [1u64, 2, 2, 3, 1, 2];
            for &c in &stream {
                s.update(c);
            }
            let mut z: Vec<(u128, u64)> = Vec::new();
            for i in 1..=3u64 {
                let f = stream.iter().filter(|&&c| c == i).count() as u128;
                for j in 0..16 {
                    z.push((f * s.row(i)[j].1, i));
                }
            }
            z.sort_unstable();
            let (top, i) = *z.last().unwrap();
            let rest: u128 = z[..z.len() - 1].iter().map(|x| x.0).sum();
            if top > 20 * rest {
                checked += 1;
                assert_eq!(s.majority().map(|m| m.0), Some(i));
            }
        }
        assert!(checked > 5, "{checked}");
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(SmallPInstance::new(Exponent::integer(1), 32, 0).is_err());
        assert!(SmallPInstance::new(half(), 8, 0).is_err());
        assert!(SmallPSampler::new(half(), 32, 0, 0).is_err());
    }
}
