//! Size-one reservoir units that count later occurrences of their sample, and
//! a bank of many units sharing per-coordinate counters.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};
use std::time::Instant;


use crate::exact::{bernoulli_ratio, next_replacement};
use crate::rng::{substream, Rng};

/// What the counter holds right after a sample is taken.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Counter {
    /// Occurrences strictly after the sampled one (starts at 0).
    #[default]
    StrictlyAfter,
    /// Also counts the sampled occurrence itself (starts at 1).
    Inclusive,
}

impl Counter {
    fn initial(self) -> u64 {
        match self {
            Counter::StrictlyAfter => 0,
            Counter::Inclusive => 1,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ReservoirUnit {
    sample: Option<u64>,
    time: u64,
    count: u64,
    seen: u64,
    counter: Counter,
}

impl ReservoirUnit {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_counter(counter: Counter) -> Self {
        Self { counter, ..Self::default() }
    }

    /// Advances by one unit update; `replace` is the outcome of the `1/r` coin
    /// (forced on the first update).
    pub fn step(&mut self, coord: u64, replace: bool) {
        self.seen += 1;
        if replace || self.seen == 1 {
            self.sample = Some(coord);
            self.time = self.seen;
            self.count = self.counter.initial();
        } else if self.sample == Some(coord) {
            self.count += 1;
        }
    }

    /// One update with a fresh exact `1/r` replacement coin.
    pub fn update<R: rand::Rng + ?Sized>(&mut self, coord: u64, rng: &mut R) {
        let replace = bernoulli_ratio(rng, 1, self.seen + 1);
        self.step(coord, replace);
    }

    pub fn sample(&self) -> Option<u64> {
        self.sample
    }

    /// Stream position of the sampled occurrence.
    pub fn time(&self) -> u64 {
        self.time
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn seen(&self) -> u64 {
        self.seen
    }
}

/// A unit whose replacements come from skip lengths drawn from its own
/// random stream; the bank reproduces it exactly given the same stream.
#[derive(Clone, Debug)]
pub struct SkipUnit {
    unit: ReservoirUnit,
    next: u64,
    rng: Rng,
}

impl SkipUnit {
    pub fn new(rng: Rng, counter: Counter) -> Self {
        Self { unit: ReservoirUnit::with_counter(counter), next: 1, rng }
    }

    pub fn update(&mut self, coord: u64) {
        let t = self.unit.seen + 1;
        let replace = t == self.next;
        self.unit.step(coord, replace);
        if replace {
            self.next = next_replacement(&mut self.rng, t);
        }
    }

    pub fn unit(&self) -> &ReservoirUnit {
        &self.unit
    }
}

/// State of one unit inside a bank.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct UnitView {
    pub coord: u64,
    /// Timestamp of the sampled occurrence (absolute, see [`SamplerBank::starting_at`]).
    pub time: u64,
    pub count: u64,
}

#[derive(Clone, Copy, Debug)]
struct Slot {
    coord: u64,
    time: u64,
    offset: u64,
}

#[derive(Clone, Copy, Debug)]
struct Tracked {
    count: u64,
    holders: u32,
}

/// `R` reservoir units over the same stream. Each tracked coordinate keeps a
/// single running count plus the number of units holding it; a unit stores
/// the count at the moment it sampled, so its own counter is a subtraction.
/// Replacement times are scheduled in a min-heap, so an update touches only
/// the units that resample at that step.
#[derive(Clone, Debug)]
pub struct SamplerBank {
    seen: u64,
    origin: u64,
    counter: Counter,
    slots: Vec<Slot>,
    rngs: Vec<Rng>,
    heap: BinaryHeap<Reverse<(u64, u32)>>,
    tracked: HashMap<u64, Tracked>,
}

impl SamplerBank {
    /// Unit `u` draws its skip lengths from `substream(seed, u)`.
    pub fn new(r: usize, seed: u64) -> Self {
        Self::starting_at(r, seed, 1)
    }

    /// A bank whose first update has absolute timestamp `start`.
    pub fn starting_at(r: usize, seed: u64, start: u64) -> Self {
        assert!(r >= 1 && r <= u32::MAX as usize);
        let slots = vec![Slot { coord: 0, time: 0, offset: 0 }; r];
        let rngs = (0..r as u64).map(|u| substream(seed, u)).collect();
        let heap = (0..r as u32).map(|u| Reverse((1u64, u))).collect();
        Self { seen: 0, origin: start - 1, counter: Counter::StrictlyAfter, slots, rngs, heap, tracked: HashMap::new() }
    }

    pub fn with_counter(mut self, counter: Counter) -> Self {
        self.counter = counter;
        self
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// Updates processed so far.
    pub fn seen(&self) -> u64 {
        self.seen
    }

    /// Absolute timestamp of the first update.
    pub fn start(&self) -> u64 {
        self.origin + 1
    }

    /// Number of coordinates with a live counter.
    pub fn tracked(&self) -> usize {
        self.tracked.len()
    }

    pub fn update(&mut self, coord: u64) {
        self.seen += 1;
        let t = self.seen;
        if let Some(e) = self.tracked.get_mut(&coord) {
            e.count += 1;
        }
        while let Some(&Reverse((next, u))) = self.heap.peek() {
            if next != t {
                debug_assert!(next > t);
                break;
            }
            self.heap.pop();
            self.resample(u as usize, coord, t);
            let after = next_replacement(&mut self.rngs[u as usize], t);
            if after != u64::MAX {
                self.heap.push(Reverse((after, u)));
            }
        }
    }

    fn resample(&mut self, u: usize, coord: u64, t: u64) {
        let old = self.slots[u].coord;
        if old != 0 {
            let e = self.tracked.get_mut(&old).expect("held coordinate is tracked");
            e.holders -= 1;
            if e.holders == 0 {
                self.tracked.remove(&old);
            }
        }
        // a coordinate tracked before this step already counted this occurrence
        let e = self.tracked.entry(coord).or_insert(Tracked { count: 0, holders: 0 });
        e.holders += 1;
        self.slots[u] = Slot { coord, time: t, offset: e.count };
    }

    /// Effective state of unit `u`, or `None` before the first update.
    pub fn unit(&self, u: usize) -> Option<UnitView> {
        let s = self.slots[u];
        if s.coord == 0 {
            return None;
        }
        let running = self.tracked[&s.coord].count;
        let count = running - s.offset + self.counter.initial();
        Some(UnitView { coord: s.coord, time: s.time + self.origin, count })
    }

    pub fn units(&self) -> impl Iterator<Item = UnitView> + '_ {
        (0..self.slots.len()).filter_map(move |u| self.unit(u))
    }
}

/// Feeds `coords` into a fresh bank of `r` units and returns updates per second.
pub fn bank_throughput(r: usize, coords: &[u64], seed: u64) -> f64 {
    let mut bank = SamplerBank::new(r, seed);
    let start = Instant::now();
    for &c in coords {
        bank.update(c);
    }
    let secs = start.elapsed().as_secs_f64().max(1e-9);
    std::hint::black_box(&bank);
    coords.len() as f64 / secs
}

/// Uniform index in `0..k`.
pub(crate) fn pick<R: rand::Rng + ?Sized>(rng: &mut R, k: usize) -> usize {
    rng.random_range(0..k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::interval::ratio;
    use num_rational::BigRational;
    use num_traits::Zero;
    use proptest::prelude::*;

    #[test]
    fn single_element() {
        let mut u = ReservoirUnit::new();
        u.step(7, true);
        assert_eq!((u.sample(), u.count()), (Some(7), 0));
    }

    #[test]
    fn later_occurrences_counted() {
        let mut u = ReservoirUnit::new();
        u.step(7, true);
        u.step(7, false);
        assert_eq!(u.count(), 1);
        let mut inc = ReservoirUnit::with_counter(Counter::Inclusive);
        inc.step(7, true);
        inc.step(7, false);
        assert_eq!(inc.count(), 2);
    }

    /// Exact law of the sampled position: enumerate every coin sequence.
    fn position_law(stream: &[u64]) -> Vec<BigRational> {
        let m = stream.len();
        let mut law = vec![BigRational::zero(); m];
        for mask in 0u32..(1 << m) {
            if mask & 1 == 0 {
                continue;
            }
            let mut u = ReservoirUnit::new();
            let mut p = BigRational::from_integer(1.into());
            for (k, &c) in stream.iter().enumerate() {
                let r = k as i64 + 1;
                let replace = mask >> k & 1 == 1;
                p *= if replace { ratio(1, r) } else { ratio(r - 1, r) };
                u.step(c, replace);
            }
            law[(u.time() - 1) as usize] += p;
        }
        law
    }

    #[test]
    fn positions_exactly_uniform() {
        for stream in [&[1u64, 1, 2][..], &[3, 1, 3, 2, 2]] {
            let law = position_law(stream);
            for p in law {
                assert_eq!(p, ratio(1, stream.len() as i64));
            }
        }
    }

    fn uniformity(mut final_time: impl FnMut(u64) -> u64, m: u64) {
        let trials = 100_000u64;
        let mut hits = vec![0u64; m as usize];
        for k in 0..trials {
            hits[(final_time(k) - 1) as usize] += 1;
        }
        let p = 1.0 / m as f64;
        let sigma = (trials as f64 * p * (1.0 - p)).sqrt();
        for h in hits {
            assert!((h as f64 - trials as f64 * p).abs() <= 4.0 * sigma, "{h}");
        }
    }

    #[test]
    fn coin_unit_uniform() {
        let stream = [1u64, 2, 1, 3, 3, 1, 2];
        let mut rng = substream(5, 0);
        uniformity(
            |_| {
                let mut u = ReservoirUnit::new();
                for &c in &stream {
                    u.update(c, &mut rng);
                }
                u.time()
            },
            stream.len() as u64,
        );
    }

    #[test]
    fn skip_unit_uniform() {
        let stream = [1u64, 2, 1, 3, 3, 1, 2];
        uniformity(
            |k| {
                let mut u = SkipUnit::new(substream(6, k), Counter::StrictlyAfter);
                for &c in &stream {
                    u.update(c);
                }
                u.unit().time()
            },
            stream.len() as u64,
        );
    }

    #[test]
    fn bank_of_one_matches_unit() {
        let stream = [4u64, 4, 2, 4, 1, 2, 2, 4];
        let mut bank = SamplerBank::new(1, 77);
        let mut naive = SkipUnit::new(substream(77, 0), Counter::StrictlyAfter);
        for &c in &stream {
            bank.update(c);
            naive.update(c);
            let v = bank.unit(0).unwrap();
            assert_eq!((Some(v.coord), v.time, v.count), (naive.unit().sample(), naive.unit().time(), naive.unit().count()));
        }
    }

    fn differential(stream: &[u64], r: usize, seed: u64, counter: Counter) {
        let mut bank = SamplerBank::new(r, seed).with_counter(counter);
        let mut naive: Vec<SkipUnit> = (0..r as u64).map(|u| SkipUnit::new(substream(seed, u), counter)).collect();
        for &c in stream {
            bank.update(c);
            for (u, n) in naive.iter_mut().enumerate() {
                n.update(c);
                let v = bank.unit(u).unwrap();
                assert_eq!(Some(v.coord), n.unit().sample());
                assert_eq!(v.time, n.unit().time());
                assert_eq!(v.count, n.unit().count());
            }
        }
    }

    #[test]
    fn bank_of_three_matches_naive() {
        for seed in 0..50 {
            differential(&[1, 1, 2, 1], 3, seed, Counter::StrictlyAfter);
        }
    }

    #[test]
    fn offsets_survive_shared_holders() {
        // many units, few coordinates: holders overlap constantly
        let stream: Vec<u64> = (0..400).map(|k| (k * 7 % 3) + 1).collect();
        differential(&stream, 64, 3, Counter::StrictlyAfter);
        differential(&stream, 64, 4, Counter::Inclusive);
    }

    #[test]
    fn absolute_times() {
        let mut bank = SamplerBank::starting_at(4, 1, 10);
        bank.update(5);
        assert!(bank.units().all(|v| v.time == 10 && v.coord == 5 && v.count == 0));
        assert_eq!(bank.start(), 10);
    }

    proptest! {
        #[test]
        fn bank_equals_naive(stream in proptest::collection::vec(1u64..5, 1..50), r in 1usize..=8, seed in any::<u64>()) {
            differential(&stream, r, seed, Counter::StrictlyAfter);
        }

        #[test]
        fn counter_never_exceeds_later_occurrences(stream in proptest::collection::vec(1u64..4, 1..40), seed in any::<u64>()) {
            let mut bank = SamplerBank::new(4, seed);
            for &c in &stream {
                bank.update(c);
            }
            for v in bank.units() {
                let later = stream[v.time as usize..].iter().filter(|&&c| c == v.coord).count() as u64;
                prop_assert_eq!(v.count, later);
                prop_assert_eq!(stream[(v.time - 1) as usize], v.coord);
            }
        }
    }
}
