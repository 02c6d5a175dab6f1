//! Support (F0) sampling and the Tukey sampler built on it.
//!
//! Every repetition owns a random subset `S` of `[n]` of size `2 ceil(sqrt n)`
//! chosen before the stream. All repetitions share one table of frequencies
//! for the coordinates they watch, plus the set `T` of the first (sliding
//! window: most recent) `ceil(sqrt n)` distinct coordinates.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use rand::seq::index;

use crate::error::{invalid, Result};
use crate::exact::bernoulli_rational;
use crate::measure::Measure;
use crate::reservoir::pick;
use crate::rng::{mix, substream, Rng};
use crate::stream::SampleResult;

#[derive(Clone, Debug, Default)]
struct Track {
    count: u64,
    /// Most recent timestamps, newest last, at most `cap` of them (sliding window only).
    times: VecDeque<u64>,
}

/// `ceil(sqrt(n))`
pub fn isqrt_ceil(n: u64) -> u64 {
    let r = n.isqrt();
    if r * r == n {
        r
    } else {
        r + 1
    }
}

/// Upper bound on the failure probability of one repetition with `F0 >= ceil(sqrt n)`:
/// `(1 - |S|/n)^ceil(sqrt n)`.
pub fn f0_failure_bound(n: u64) -> f64 {
    let k = isqrt_ceil(n);
    let s = (2 * k).min(n);
    (1.0 - s as f64 / n as f64).powf(k as f64)
}

#[derive(Clone, Debug)]
pub struct F0Bank {
    n: u64,
    k: u64,
    window: Option<u64>,
    cap: usize,
    t: u64,
    sets: Vec<Vec<u64>>,
    watched: HashSet<u64>,
    tracks: HashMap<u64, Track>,
    /// First `k` distinct coordinates (insertion-only).
    first: Vec<u64>,
    first_set: HashSet<u64>,
    /// Most recent `k` distinct coordinates keyed by last occurrence (sliding window).
    recent: BTreeMap<u64, u64>,
    last_seen: HashMap<u64, u64>,
    rng: Rng,
}

impl F0Bank {
    /// `r` insertion-only repetitions over `[1, n]`.
    pub fn new(n: u64, r: usize, seed: u64) -> Result<Self> {
        Self::build(n, r, None, 0, seed)
    }

    /// Sliding-window repetitions; `cap` bounds how many in-window occurrences
    /// of a coordinate are counted (at least 1).
    pub fn sliding(n: u64, r: usize, window: u64, cap: usize, seed: u64) -> Result<Self> {
        if window == 0 {
            return Err(invalid("window must be positive"));
        }
        Self::build(n, r, Some(window), cap.max(1), seed)
    }

    fn build(n: u64, r: usize, window: Option<u64>, cap: usize, seed: u64) -> Result<Self> {
        if n == 0 || r == 0 {
            return Err(invalid("need n >= 1 and at least one repetition"));
        }
        let k = isqrt_ceil(n);
        let s = (2 * k).min(n) as usize;
        let mut watched = HashSet::new();
        let sets = (0..r as u64)
            .map(|u| {
                let mut rng = substream(seed, u);
                let mut set: Vec<u64> = index::sample(&mut rng, n as usize, s).into_iter().map(|i| i as u64 + 1).collect();
                set.sort_unstable();
                watched.extend(set.iter().copied());
                set
            })
            .collect();
        Ok(Self {
            n,
            k,
            window,
            cap,
            t: 0,
            sets,
            watched,
            tracks: HashMap::new(),
            first: Vec::new(),
            first_set: HashSet::new(),
            recent: BTreeMap::new(),
            last_seen: HashMap::new(),
            rng: substream(mix(seed, 0xf0), 0),
        })
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    /// Threshold `ceil(sqrt n)` on the size of `T`.
    pub fn k(&self) -> u64 {
        self.k
    }

    pub fn set(&self, u: usize) -> &[u64] {
        &self.sets[u]
    }

    /// Coordinates with a live frequency record.
    pub fn tracked(&self) -> usize {
        self.tracks.len()
    }

    pub fn update(&mut self, coord: u64) {
        assert!((1..=self.n).contains(&coord), "coordinate out of range");
        self.t += 1;
        let t = self.t;
        match self.window {
            None => {
                if self.first.len() < self.k as usize && self.first_set.insert(coord) {
                    self.first.push(coord);
                }
            }
            Some(_) => {
                if let Some(old) = self.last_seen.insert(coord, t) {
                    self.recent.remove(&old);
                }
                self.recent.insert(t, coord);
                if self.recent.len() > self.k as usize {
                    let (_, evicted) = self.recent.pop_first().unwrap();
                    self.last_seen.remove(&evicted);
                    if !self.watched.contains(&evicted) {
                        self.tracks.remove(&evicted);
                    }
                }
            }
        }
        let in_t = match self.window {
            None => self.first_set.contains(&coord),
            Some(_) => true,
        };
        if in_t || self.watched.contains(&coord) {
            let cap = self.cap;
            let e = self.tracks.entry(coord).or_default();
            e.count += 1;
            if self.window.is_some() {
                e.times.push_back(t);
                if e.times.len() > cap {
                    e.times.pop_front();
                }
            }
        }
    }

    fn active(&self, coord: u64) -> Option<u64> {
        let tr = self.tracks.get(&coord)?;
        match self.window {
            None => Some(tr.count),
            Some(w) => {
                let c = tr.times.iter().filter(|&&s| s + w > self.t).count() as u64;
                (c > 0).then_some(c)
            }
        }
    }

    /// Coordinates of `T` that are active, and whether they make up the whole support.
    fn small_support(&self) -> Option<Vec<u64>> {
        let active: Vec<u64> = match self.window {
            None => self.first.clone(),
            Some(w) => self.recent.range(self.t.saturating_sub(w) + 1..).map(|(_, &c)| c).collect(),
        };
        (active.len() < self.k as usize).then_some(active)
    }

    /// Outcome of repetition `u`, with the coordinate's (window) frequency attached.
    pub fn draw_unit(&mut self, u: usize) -> SampleResult {
        if let Some(all) = self.small_support() {
            if all.is_empty() {
                return SampleResult::bottom();
            }
            let c = all[pick(&mut self.rng, all.len())];
            return SampleResult::index(c).with_frequency(self.active(c).unwrap()).with_repetition(u as u64);
        }
        let hits: Vec<(u64, u64)> = self.sets[u].iter().filter_map(|&c| self.active(c).map(|f| (c, f))).collect();
        if hits.is_empty() {
            return SampleResult::fail();
        }
        let (c, f) = hits[pick(&mut self.rng, hits.len())];
        SampleResult::index(c).with_frequency(f).with_repetition(u as u64)
    }

    /// First successful repetition.
    pub fn draw(&mut self) -> SampleResult {
        let mut last = SampleResult::fail();
        for u in 0..self.len() {
            last = self.draw_unit(u);
            if !last.is_fail() {
                return last;
            }
        }
        last
    }
}

/// Repetitions for `F0` sampling with failure at most `delta`.
pub fn f0_repetitions(n: u64, delta: f64) -> usize {
    let q = f0_failure_bound(n);
    if q <= 0.0 {
        return 1;
    }
    (delta.ln() / q.ln()).ceil().max(1.0) as usize
}

/// Sampler for the Tukey measure: an `F0` sample `i` with window count `c`
/// is accepted with probability `G(c) / G(tau)`.
#[derive(Clone, Debug)]
pub struct TukeySampler {
    measure: Measure,
    g_tau: BigRational,
    bank: F0Bank,
    rng: Rng,
}

fn tukey_parts(measure: Measure) -> Result<(BigRational, u64)> {
    let Measure::Tukey { tau } = measure else { return Err(invalid("Tukey sampler needs the Tukey measure")) };
    let cap = tau.ceil().to_integer().max(1) as u64;
    Ok((measure.g_rational(cap).unwrap(), cap))
}

/// Repetitions so that `(1 - (1-q) G(1)/G(tau))^R <= delta`.
pub fn tukey_repetitions(measure: Measure, n: u64, delta: f64) -> Result<usize> {
    let (g_tau, _) = tukey_parts(measure)?;
    let ratio = (measure.g_rational(1).unwrap() / g_tau).to_f64().unwrap();
    let per = (1.0 - f0_failure_bound(n)) * ratio;
    Ok((delta.ln() / (1.0 - per).ln()).ceil().max(1.0) as usize)
}

impl TukeySampler {
    pub fn new(measure: Measure, n: u64, r: usize, seed: u64) -> Result<Self> {
        let (g_tau, _) = tukey_parts(measure)?;
        Ok(Self { measure, g_tau, bank: F0Bank::new(n, r, mix(seed, 1))?, rng: substream(seed, 0x70c) })
    }

    pub fn sliding(measure: Measure, n: u64, r: usize, window: u64, seed: u64) -> Result<Self> {
        let (g_tau, cap) = tukey_parts(measure)?;
        Ok(Self { measure, g_tau, bank: F0Bank::sliding(n, r, window, cap as usize, mix(seed, 1))?, rng: substream(seed, 0x70c) })
    }

    pub fn bank(&self) -> &F0Bank {
        &self.bank
    }

    pub fn update(&mut self, coord: u64) {
        self.bank.update(coord);
    }

    /// Acceptance probability `G(c) / G(tau)`.
    pub fn acceptance(&self, c: u64) -> BigRational {
        self.measure.g_rational(c).unwrap() / &self.g_tau
    }

    /// Outcome of repetition `u`.
    pub fn draw_unit(&mut self, u: usize) -> SampleResult {
        let r = self.bank.draw_unit(u);
        let (Some(i), Some(c)) = (r.as_index(), r.frequency) else { return r };
        let q = self.acceptance(c);
        if bernoulli_rational(&mut self.rng, &q) {
            SampleResult::index(i).with_frequency(c).with_repetition(u as u64)
        } else {
            SampleResult::fail()
        }
    }

    /// All accepting repetitions.
    pub fn accepted(&mut self) -> Vec<u64> {
        (0..self.bank.len()).filter_map(|u| self.draw_unit(u).as_index()).collect()
    }

    pub fn draw(&mut self) -> SampleResult {
        let mut last = SampleResult::fail();
        for u in 0..self.bank.len() {
            last = self.draw_unit(u);
            if !last.is_fail() {
                return last;
            }
        }
        last
    }
}

/// `G(f_i)/F_G` under Tukey for small integer frequencies, as rationals (test helper).
pub fn tukey_target(measure: Measure, freqs: &[u64]) -> Vec<BigRational> {
    let g: Vec<BigRational> = freqs.iter().map(|&f| measure.g_rational(f).unwrap()).collect();
    let total: BigRational = g.iter().sum();
    if total == BigRational::from_integer(BigInt::from(0)) {
        return g;
    }
    g.into_iter().map(|x| x / &total).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::interval::ratio;
    use crate::stream::Outcome;
    use num_rational::Rational64;

    #[test]
    fn ceil_sqrt() {
        assert_eq!(isqrt_ceil(9), 3);
        assert_eq!(isqrt_ceil(10), 4);
        assert_eq!(isqrt_ceil(1), 1);
    }

    #[test]
    fn small_support_is_uniform_over_t() {
        // n = 9, f = (3, 0, 1, 0, ...): support {1, 3}, below ceil(sqrt 9) = 3
        let mut b = F0Bank::new(9, 1, 4).unwrap();
        for c in [1, 1, 3, 1] {
            b.update(c);
        }
        let mut hits = [0u32; 2];
        for _ in 0..20_000 {
            let r = b.draw_unit(0);
            match r.as_index() {
                Some(1) => {
                    assert_eq!(r.frequency, Some(3));
                    hits[0] += 1
                }
                Some(3) => hits[1] += 1,
                other => panic!("{other:?}"),
            }
        }
        let frac = hits[0] as f64 / 20_000.0;
        assert!((frac - 0.5).abs() < 4.0 * (0.25f64 / 20_000.0).sqrt());
    }

    #[test]
    fn empty_is_bottom() {
        let mut b = F0Bank::new(16, 2, 0).unwrap();
        assert_eq!(b.draw().outcome, Outcome::Bottom);
    }

    #[test]
    fn subsets_have_the_right_size() {
        let b = F0Bank::new(100, 5, 1).unwrap();
        for u in 0..5 {
            let s = b.set(u);
            assert_eq!(s.len(), 20);
            assert!(s.windows(2).all(|w| w[0] < w[1]));
            assert!(s.iter().all(|&c| (1..=100).contains(&c)));
        }
    }

    #[test]
    fn large_support_draws_from_s() {
        let mut b = F0Bank::new(100, 3, 7).unwrap();
        for c in 1..=100 {
            b.update(c);
        }
        for u in 0..3 {
            let r = b.draw_unit(u);
            assert!(b.set(u).contains(&r.as_index().unwrap()));
        }
    }

    #[test]
    fn sliding_never_returns_expired() {
        let mut b = F0Bank::sliding(25, 4, 6, 2, 3).unwrap();
        for t in 0..200u64 {
            let c = (t * 7 + t / 3) % 25 + 1;
            b.update(c);
            let lo = (t + 1).saturating_sub(6);
            for u in 0..4 {
                if let Some(i) = b.draw_unit(u).as_index() {
                    // i occurs within the last 6 updates
                    let ok = (lo..=t).any(|s| (s * 7 + s / 3) % 25 + 1 == i);
                    assert!(ok, "t={t} i={i}");
                }
            }
        }
    }

    #[test]
    fn tukey_target_values() {
        let m = Measure::tukey(Rational64::from_integer(2)).unwrap();
        assert_eq!(tukey_target(m, &[1, 2]), vec![ratio(37, 101), ratio(64, 101)]);
        let s = TukeySampler::new(m, 4, 1, 0).unwrap();
        assert_eq!(s.acceptance(2), ratio(1, 1));
        assert_eq!(s.acceptance(1), ratio(37, 64));
        assert_eq!(s.acceptance(5), ratio(1, 1));
    }

    #[test]
    fn tukey_needs_tukey() {
        assert!(TukeySampler::new(Measure::L1L2, 4, 1, 0).is_err());
    }
}
