//! Samplers for random-order streams over a window of `W` updates.
//!
//! A `p`-tuple of distinct window positions holds `j` in its first `q` slots
//! with probability `(f_j)_q / (W)_q`. Drawing a level `q` with probability
//! `alpha_q = S(p, q) (W)_q / W^p` and harvesting `v_1` when `v_1 = .. = v_q`
//! therefore harvests `j` with probability `sum_q S(p, q) (f_j)_q / W^p =
//! f_j^p / W^p`. The `alpha_q` sum to one (the same identity at `x = W`).
//! For `p = 2` the levels are `1/W` and `1 - 1/W` on adjacent pairs.

use std::collections::HashMap;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::seq::index::sample;
use rand_distr::{Binomial, Distribution};

use crate::error::{invalid, Result};
use crate::exact::bernoulli_ratio;
use crate::reservoir::pick;
use crate::rng::{substream, Rng};
use crate::stream::SampleResult;

/// Stirling numbers of the second kind `S(p, k)` for `k = 0..=p`.
pub fn stirling2(p: u32) -> Vec<BigUint> {
    let mut row = vec![BigUint::one()];
    for n in 1..=p as usize {
        let mut next = vec![BigUint::zero(); n + 1];
        for k in 1..=n {
            let stay = if k < n { &row[k] * BigUint::from(k) } else { BigUint::zero() };
            next[k] = stay + &row[k - 1];
        }
        row = next;
    }
    row
}

/// Falling factorial `(x)_k`; zero once a factor reaches zero.
pub fn falling(x: u64, k: u32) -> BigUint {
    if (k as u64) > x {
        return BigUint::zero();
    }
    (0..k as u64).map(|i| BigUint::from(x - i)).product()
}

/// Level probabilities `alpha_q`, `q = 0..=p`.
pub fn alpha(p: u32, w: u64) -> Vec<BigRational> {
    let wp = BigInt::from(BigUint::from(w).pow(p));
    stirling2(p)
        .into_iter()
        .enumerate()
        .map(|(q, s)| BigRational::new(BigInt::from(s * falling(w, q as u32)), wp.clone()))
        .collect()
}

/// `A_L = alpha_1 + .. + alpha_L`: harvest probability of a tuple whose
/// first `L` entries agree and entry `L+1` differs.
pub fn harvest_levels(p: u32, w: u64) -> Vec<BigRational> {
    let mut acc = BigRational::zero();
    alpha(p, w)
        .into_iter()
        .map(|a| {
            acc += a;
            acc.clone()
        })
        .collect()
}

/// Outcome of a tuple at level `q`: `v_1` when the first `q` entries agree.
pub fn tuple_outcome(values: &[u64], q: usize) -> Option<u64> {
    let v1 = *values.first()?;
    (q >= 1 && values[..q].iter().all(|&v| v == v1)).then_some(v1)
}

/// Outcome of an adjacent pair; `low` is the probability-`1/W` branch.
pub fn pair_outcome(first: u64, second: u64, low: bool) -> Option<u64> {
    tuple_outcome(&[first, second], if low { 1 } else { 2 })
}

/// `ceil(W^(1 - 1/(p-1)))`: smallest `B` with `B^(p-1) >= W^(p-2)`.
pub fn block_size(p: u32, w: u64) -> u64 {
    let target = BigUint::from(w).pow(p - 2);
    let r = target.nth_root(p - 1);
    let b = if r.pow(p - 1) == target { r } else { r + 1u32 };
    b.to_u64().unwrap().max(1)
}

/// Ordered distinct-position `p`-tuples in a block of size `b` whose first
/// entry is a coordinate of block frequency `g` and whose agreeing prefix
/// has length exactly `L`, for `L = 0..=p` (entry 0 is zero).
pub fn class_counts(g: u64, b: u64, p: u32) -> Vec<BigUint> {
    let mut out = vec![BigUint::zero(); p as usize + 1];
    for l in 1..p {
        out[l as usize] = falling(g, l) * BigUint::from(b - g) * falling(b - l as u64 - 1, p - l - 1);
    }
    out[p as usize] = falling(g, p);
    out
}

/// Default constant `C` in the pair sampler's `2 C ln n` cap.
pub const DEFAULT_C: f64 = 8.0;

/// Adjacent-pair `L_2` sampler.
#[derive(Clone, Debug)]
pub struct PairSampler {
    w: u64,
    half: usize,
    t: u64,
    pending: Option<u64>,
    set: Vec<(u64, u64)>,
    rng: Rng,
}

impl PairSampler {
    pub fn new(n: u64, w: u64, seed: u64) -> Result<Self> {
        Self::with_constant(n, w, DEFAULT_C, seed)
    }

    /// Requires `n^C > W`; the set keeps at most `2 ceil(C ln n)` entries.
    pub fn with_constant(n: u64, w: u64, c: f64, seed: u64) -> Result<Self> {
        if w < 2 {
            return Err(invalid("window must hold at least one pair"));
        }
        if n < 2 || c * (n as f64).ln() <= (w as f64).ln() {
            return Err(invalid(format!("need n^C > W (n={n}, C={c}, W={w})")));
        }
        let half = (c * (n as f64).ln()).ceil() as usize;
        Ok(Self { w, half, t: 0, pending: None, set: Vec::new(), rng: substream(seed, 0xa17) })
    }

    pub fn cap(&self) -> usize {
        2 * self.half
    }

    /// Harvested `(coordinate, timestamp)` entries still in the set.
    pub fn entries(&self) -> &[(u64, u64)] {
        &self.set
    }

    pub fn update(&mut self, coord: u64) {
        self.t += 1;
        match self.pending.take() {
            None => self.pending = Some(coord),
            Some(first) => {
                let low = bernoulli_ratio(&mut self.rng, 1, self.w);
                if let Some(j) = pair_outcome(first, coord, low) {
                    self.set.push((j, self.t - 1));
                }
            }
        }
        // entries stay in timestamp order, so expired ones form a prefix
        let (t, w) = (self.t, self.w);
        let expired = self.set.iter().take_while(|&&(_, s)| s + w <= t).count();
        self.set.drain(..expired);
        if self.set.len() > self.cap() {
            let mut drop: Vec<usize> = sample(&mut self.rng, self.set.len(), self.half).into_vec();
            drop.sort_unstable();
            let mut next = drop.into_iter().peekable();
            let mut k = 0;
            self.set.retain(|_| {
                let gone = next.next_if_eq(&k).is_some();
                k += 1;
                !gone
            });
        }
    }

    pub fn draw(&mut self) -> SampleResult {
        if self.t == 0 {
            return SampleResult::bottom();
        }
        if self.set.is_empty() {
            return SampleResult::fail();
        }
        let (j, _) = self.set[pick(&mut self.rng, self.set.len())];
        SampleResult::index(j)
    }
}

#[derive(Clone, Copy, Debug)]
struct Group {
    coord: u64,
    start: u64,
    count: u64,
}

/// Block `p`-tuple sampler for integer `p >= 3`. The set holds harvested
/// tuples as per-block multiplicities; a completed block's harvest counts
/// are drawn per (coordinate, prefix class) from the block frequencies.
#[derive(Clone, Debug)]
pub struct BlockSampler {
    p: u32,
    w: u64,
    b: u64,
    levels: Vec<f64>,
    t: u64,
    block: Vec<u64>,
    set: Vec<Group>,
    total: u64,
    rng: Rng,
}

impl BlockSampler {
    pub fn new(p: u32, w: u64, seed: u64) -> Result<Self> {
        if p < 3 {
            return Err(invalid("block sampler needs integer p >= 3"));
        }
        Self::with_block(p, w, block_size(p, w), seed)
    }

    /// Explicit block size (must hold a `p`-tuple).
    pub fn with_block(p: u32, w: u64, b: u64, seed: u64) -> Result<Self> {
        if p < 2 || p > 12 {
            return Err(invalid("block sampler supports integer p in [2, 12]"));
        }
        if b < p as u64 || b > w {
            return Err(invalid(format!("block size {b} must lie in [p, W] = [{p}, {w}]")));
        }
        if falling(b, p).bits() > 63 {
            return Err(invalid("too many tuples per block"));
        }
        let levels = harvest_levels(p, w).iter().map(|a| a.to_f64().unwrap().min(1.0)).collect();
        Ok(Self { p, w, b, levels, t: 0, block: Vec::new(), set: Vec::new(), total: 0, rng: substream(seed, 0xb10c) })
    }

    pub fn block(&self) -> u64 {
        self.b
    }

    /// Harvested tuples in the set.
    pub fn len(&self) -> u64 {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn update(&mut self, coord: u64) {
        self.t += 1;
        self.block.push(coord);
        if self.block.len() as u64 == self.b {
            let start = self.t + 1 - self.b;
            self.harvest(start);
            self.block.clear();
        }
        let (t, w) = (self.t, self.w);
        self.set.retain(|g| g.start + w > t);
        self.total = self.set.iter().map(|g| g.count).sum();
        if self.total > 2 * self.b {
            let k = self.b * (self.total - 2 * self.b).div_ceil(self.b);
            self.keep(self.total - k);
        }
    }

    fn harvest(&mut self, start: u64) {
        let mut g: HashMap<u64, u64> = HashMap::new();
        for &c in &self.block {
            *g.entry(c).or_insert(0) += 1;
        }
        let mut coords: Vec<(u64, u64)> = g.into_iter().collect();
        coords.sort_unstable();
        for (coord, gi) in coords {
            let mut count = 0;
            for (l, m) in class_counts(gi, self.b, self.p).into_iter().enumerate().skip(1) {
                let m = m.to_u64().unwrap();
                if m == 0 {
                    continue;
                }
                count += Binomial::new(m, self.levels[l]).unwrap().sample(&mut self.rng);
            }
            if count > 0 {
                self.set.push(Group { coord, start, count });
            }
        }
    }

    /// Uniform subset of `keep` harvested tuples.
    fn keep(&mut self, keep: u64) {
        let mut picked = sample(&mut self.rng, self.total as usize, keep as usize).into_vec();
        picked.sort_unstable();
        let mut it = picked.into_iter().peekable();
        let mut end = 0usize;
        for g in &mut self.set {
            end += g.count as usize;
            let mut k = 0;
            while it.next_if(|&i| i < end).is_some() {
                k += 1;
            }
            g.count = k;
        }
        self.set.retain(|g| g.count > 0);
        self.total = keep;
    }

    pub fn draw(&mut self) -> SampleResult {
        if self.t == 0 {
            return SampleResult::bottom();
        }
        if self.total == 0 {
            return SampleResult::fail();
        }
        let mut x = self.rng_index(self.total);
        for g in &self.set {
            if x < g.count {
                return SampleResult::index(g.coord);
            }
            x -= g.count;
        }
        unreachable!("index below total")
    }

    fn rng_index(&mut self, k: u64) -> u64 {
        use rand::Rng as _;
        self.rng.random_range(0..k)
    }
}

/// Pair sampler for `p = 2`, block sampler above.
#[derive(Clone, Debug)]
pub enum RandomOrderSampler {
    Pair(PairSampler),
    Block(BlockSampler),
}

impl RandomOrderSampler {
    pub fn new(p: u32, n: u64, w: u64, seed: u64) -> Result<Self> {
        match p {
            2 => Ok(Self::Pair(PairSampler::new(n, w, seed)?)),
            3.. => Ok(Self::Block(BlockSampler::new(p, w, seed)?)),
            _ => Err(invalid("random-order sampling needs integer p >= 2")),
        }
    }

    pub fn update(&mut self, coord: u64) {
        match self {
            Self::Pair(s) => s.update(coord),
            Self::Block(s) => s.update(coord),
        }
    }

    pub fn draw(&mut self) -> SampleResult {
        match self {
            Self::Pair(s) => s.draw(),
            Self::Block(s) => s.draw(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::interval::ratio;
    use crate::stream::Outcome;

    #[test]
    fn stirling_rows() {
        let s: Vec<u64> = stirling2(3).iter().map(|v| v.to_u64().unwrap()).collect();
        assert_eq!(s, vec![0, 1, 3, 1]);
        let s: Vec<u64> = stirling2(4).iter().map(|v| v.to_u64().unwrap()).collect();
        assert_eq!(s, vec![0, 1, 7, 6, 1]);
        assert_eq!(stirling2(0), vec![BigUint::one()]);
    }

    #[test]
    fn cube_at_three() {
        // (3)_1 + 3 (3)_2 + (3)_3
        let s = stirling2(3);
        let total: BigUint = (0..=3).map(|k| &s[k] * falling(3, k as u32)).sum();
        assert_eq!(total, BigUint::from(27u32));
    }

    #[test]
    fn power_identity_up_to_1000() {
        for p in 0..=6u32 {
            let s = stirling2(p);
            for x in [0u64, 1, 2, 5, 17, 999, 1000] {
                let total: BigUint = (0..=p).map(|k| &s[k as usize] * falling(x, k)).sum();
                assert_eq!(total, BigUint::from(x).pow(p), "p={p} x={x}");
            }
        }
    }

    #[test]
    fn alpha_values() {
        assert_eq!(alpha(3, 4)[3], ratio(3, 8));
        assert_eq!(alpha(2, 4), vec![ratio(0, 1), ratio(1, 4), ratio(3, 4)]);
        for (p, w) in [(2, 7), (3, 5), (4, 9)] {
            assert_eq!(harvest_levels(p, w)[p as usize], ratio(1, 1));
        }
    }

    #[test]
    fn block_sizes() {
        assert_eq!(block_size(3, 10_000), 100);
        assert_eq!(block_size(3, 10), 4);
        assert_eq!(block_size(4, 1000), 100);
        assert_eq!(block_size(4, 999), 100);
    }

    #[test]
    fn class_counts_match_tuple_enumeration() {
        fn tuples(block: &[u64], p: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<u64>>) {
            if prefix.len() == p {
                out.push(prefix.iter().map(|&i| block[i]).collect());
                return;
            }
            for i in 0..block.len() {
                if !prefix.contains(&i) {
                    prefix.push(i);
                    tuples(block, p, prefix, out);
                    prefix.pop();
                }
            }
        }
        let block = [1u64, 2, 1, 1, 3, 2];
        for p in [2u32, 3, 4] {
            let mut all = Vec::new();
            tuples(&block, p as usize, &mut Vec::new(), &mut all);
            let mut seen: HashMap<(u64, usize), u64> = HashMap::new();
            for t in &all {
                let l = t.iter().take_while(|&&v| v == t[0]).count();
                *seen.entry((t[0], l)).or_insert(0) += 1;
            }
            for (coord, g) in [(1u64, 3u64), (2, 2), (3, 1)] {
                let counts = class_counts(g, block.len() as u64, p);
                for l in 1..=p as usize {
                    let want = seen.get(&(coord, l)).copied().unwrap_or(0);
                    assert_eq!(counts[l], BigUint::from(want), "p={p} coord={coord} L={l}");
                }
            }
        }
    }

    #[test]
    fn pair_branches() {
        assert_eq!(pair_outcome(3, 5, true), Some(3));
        assert_eq!(pair_outcome(3, 5, false), None);
        assert_eq!(pair_outcome(4, 4, false), Some(4));
    }

    #[test]
    fn single_coordinate_always_returned() {
        let mut s = RandomOrderSampler::new(2, 10, 50, 1).unwrap();
        let mut b = RandomOrderSampler::new(3, 10, 50, 1).unwrap();
        for _ in 0..50 {
            s.update(7);
            b.update(7);
        }
        assert_eq!(s.draw().outcome, Outcome::Index(7));
        assert_eq!(b.draw().outcome, Outcome::Index(7));
    }

    #[test]
    fn pair_set_is_capped_and_active() {
        let mut s = PairSampler::new(4, 40, 3).unwrap();
        for t in 0..400u64 {
            s.update(t % 2 + 1);
            assert!(s.entries().len() <= s.cap());
            assert!(s.entries().iter().all(|&(_, ts)| ts + 40 > t + 1));
        }
    }

    #[test]
    fn block_set_is_capped() {
        let mut s = BlockSampler::new(3, 100, 2).unwrap();
        for t in 0..1000u64 {
            s.update(t % 3 + 1);
            assert!(s.len() <= 2 * s.block());
        }
        assert!(!s.is_empty());
    }

    #[test]
    fn configuration_errors() {
        assert!(PairSampler::new(2, 1000, 0).is_err());
        assert!(PairSampler::new(100, 1, 0).is_err());
        assert!(BlockSampler::new(2, 10, 0).is_err());
        assert!(BlockSampler::with_block(3, 10, 2, 0).is_err());
        assert!(RandomOrderSampler::new(1, 10, 10, 0).is_err());
    }

    #[test]
    fn down_sampling_is_symmetric() {
        // two coordinates with identical harvest counts keep equal shares
        let mut wins = [0u32; 2];
        for seed in 0..4000 {
            let mut s = BlockSampler::with_block(3, 1000, 3, seed).unwrap();
            s.set = vec![
                Group { coord: 1, start: 1, count: 7 },
                Group { coord: 2, start: 1, count: 7 },
            ];
            s.total = 14;
            s.keep(5);
            assert_eq!(s.set.iter().map(|g| g.count).sum::<u64>(), 5);
            let c1 = s.set.iter().find(|g| g.coord == 1).map_or(0, |g| g.count);
            wins[(c1 < 3) as usize] += 1;
        }
        let diff = (wins[0] as f64 - wins[1] as f64).abs();
        assert!(diff < 4.0 * 4000f64.sqrt(), "{wins:?}");
    }

    #[test]
    fn large_harvest_down_sampling() {
        let mut s = BlockSampler::with_block(3, 100_000, 3, 1).unwrap();
        s.set = (0..200).map(|k| Group { coord: k % 7 + 1, start: 1, count: 5000 }).collect();
        s.total = 1_000_000;
        s.keep(10);
        assert_eq!(s.set.iter().map(|g| g.count).sum::<u64>(), 10);
        assert_eq!(s.total, 10);
    }
}
