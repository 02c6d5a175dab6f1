//! Multi-pass sampling over strict-turnstile streams.
//!
//! Each pass sums the current universe interval in contiguous chunks and
//! picks one chunk with probability proportional to its sum. The arity of a
//! level is `ceil(s^(1/r))` for an interval of size `s` with `r` passes left,
//! so the last chain pass always ends on a single coordinate and the chain
//! takes exactly `ceil(1/gamma)` passes. The chosen coordinate is then
//! `f_i / F_1`-distributed; G-sampling applies the usual acceptance with a
//! strictly-after count drawn uniformly from `0..f_i`.

use std::collections::HashMap;

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use rand::Rng as _;

use crate::error::{invalid, Error, Result};
use crate::exact::bernoulli;
use crate::exact::interval::{big, ratio};
use crate::gsampler::{check_delta, repetitions, Acceptance, Rule, Zeta};
use crate::heavyhitters::lp_budget;
use crate::measure::Measure;
use crate::reservoir::pick;
use crate::rng::{substream, Rng};
use crate::stream::{SampleResult, Update};

/// A re-iterable update sequence.
pub trait UpdateSource {
    fn scan(&self, f: &mut dyn FnMut(&Update)) -> Result<()>;
}

impl UpdateSource for [Update] {
    fn scan(&self, f: &mut dyn FnMut(&Update)) -> Result<()> {
        self.iter().for_each(f);
        Ok(())
    }
}

impl<T: UpdateSource + ?Sized> UpdateSource for &T {
    fn scan(&self, f: &mut dyn FnMut(&Update)) -> Result<()> {
        (**self).scan(f)
    }
}

impl UpdateSource for Vec<Update> {
    fn scan(&self, f: &mut dyn FnMut(&Update)) -> Result<()> {
        self.as_slice().scan(f)
    }
}

/// Source wrapper that counts passes.
pub struct Replay<S> {
    src: S,
    passes: usize,
}

impl<S: UpdateSource> Replay<S> {
    pub fn new(src: S) -> Self {
        Self { src, passes: 0 }
    }

    pub fn passes(&self) -> usize {
        self.passes
    }

    pub fn pass(&mut self, mut f: impl FnMut(&Update)) -> Result<()> {
        self.passes += 1;
        self.src.scan(&mut f)
    }
}

/// Trade-off parameter `gamma = num/den` in `(0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Gamma {
    num: u32,
    den: u32,
}

impl Gamma {
    pub fn new(num: u32, den: u32) -> Result<Self> {
        if num == 0 || den == 0 || num > den {
            return Err(invalid(format!("gamma must lie in (0, 1], got {num}/{den}")));
        }
        let g = num_integer::gcd(num, den);
        Ok(Self { num: num / g, den: den / g })
    }

    /// `a/b` or a plain integer.
    pub fn parse(s: &str) -> Result<Self> {
        let (a, b) = s.split_once('/').unwrap_or((s, "1"));
        let a = a.trim().parse().map_err(|_| invalid(format!("bad gamma `{s}`")))?;
        let b = b.trim().parse().map_err(|_| invalid(format!("bad gamma `{s}`")))?;
        Self::new(a, b)
    }

    /// `ceil(1/gamma)`.
    pub fn passes(self) -> usize {
        self.den.div_ceil(self.num) as usize
    }

    /// `ceil(n^gamma)`.
    pub fn arity(self, n: u64) -> u64 {
        let target = BigUint::from(n).pow(self.num);
        let r = target.nth_root(self.den);
        let k = if r.pow(self.den) == target { r } else { r + 1u32 };
        k.to_u64().unwrap().max(1)
    }
}

/// Smallest `k` with `k^r >= s`.
pub fn level_arity(s: u64, r: usize) -> u64 {
    let target = BigUint::from(s);
    let root = target.nth_root(r as u32);
    let k = if root.pow(r as u32) == target { root } else { root + 1u32 };
    k.to_u64().unwrap().max(1)
}

/// Contiguous chunks of width `ceil(s/k)` over `[lo, hi]`; the last may be short.
pub fn chunk_bounds(lo: u64, hi: u64, k: u64) -> Vec<(u64, u64)> {
    let width = (hi - lo + 1).div_ceil(k.max(1));
    let mut out = Vec::new();
    let mut a = lo;
    while a <= hi {
        let b = (a + width - 1).min(hi);
        out.push((a, b));
        a = b + 1;
    }
    out
}

/// Chunk index for a draw `u` in `0..sum(sums)`.
pub fn select(sums: &[u64], mut u: u64) -> usize {
    for (j, &s) in sums.iter().enumerate() {
        if u < s {
            return j;
        }
        u -= s;
    }
    panic!("draw outside total mass");
}

/// One chain level: the interval's chunks with `r` passes left.
pub fn level_chunks(lo: u64, hi: u64, r: usize) -> Vec<(u64, u64)> {
    chunk_bounds(lo, hi, level_arity(hi - lo + 1, r))
}

/// Chunk sums of every distinct interval in one pass.
fn pass_sums<S: UpdateSource>(replay: &mut Replay<S>, levels: &HashMap<(u64, u64), Vec<(u64, u64)>>) -> Result<HashMap<(u64, u64), Vec<u64>>> {
    let mut raw: HashMap<(u64, u64), Vec<i64>> = levels.iter().map(|(&k, v)| (k, vec![0; v.len()])).collect();
    let widths: Vec<((u64, u64), u64)> = levels.iter().map(|(&k, v)| (k, v[0].1 - v[0].0 + 1)).collect();
    replay.pass(|u| {
        for &((lo, hi), w) in &widths {
            if (lo..=hi).contains(&u.coord) {
                raw.get_mut(&(lo, hi)).unwrap()[((u.coord - lo) / w) as usize] += u.delta;
            }
        }
    })?;
    raw.into_iter()
        .map(|(k, v)| {
            let sums = v
                .into_iter()
                .map(|s| u64::try_from(s).map_err(|_| invalid("negative chunk sum: stream is not strict turnstile")))
                .collect::<Result<Vec<u64>>>()?;
            Ok((k, sums))
        })
        .collect()
}

/// Final coordinate and its exact frequency for each chain.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Chains {
    pub f1: u64,
    pub picks: Vec<(u64, u64)>,
}

/// Runs `count(F_1)` independent frequency-proportional chains in parallel.
pub fn l1_chains<S: UpdateSource>(
    replay: &mut Replay<S>,
    n: u64,
    gamma: Gamma,
    rng: &mut Rng,
    count: impl Fn(u64) -> usize,
) -> Result<Chains> {
    let total = gamma.passes();
    let mut intervals: Vec<(u64, u64)> = Vec::new();
    let mut f1 = 0;
    let mut freqs = Vec::new();
    for r in (1..=total).rev() {
        let keys: Vec<(u64, u64)> = if r == total { vec![(1, n)] } else { intervals.clone() };
        let levels: HashMap<(u64, u64), Vec<(u64, u64)>> = keys.iter().map(|&(lo, hi)| ((lo, hi), level_chunks(lo, hi, r))).collect();
        let sums = pass_sums(replay, &levels)?;
        if r == total {
            f1 = sums[&(1, n)].iter().sum();
            if f1 == 0 {
                // keep the pass count fixed
                for _ in 1..total {
                    replay.pass(|_| {})?;
                }
                return Ok(Chains { f1, picks: Vec::new() });
            }
            intervals = vec![(1, n); count(f1)];
        }
        freqs.clear();
        for iv in &mut intervals {
            let s = &sums[iv];
            let tot: u64 = s.iter().sum();
            let j = select(s, rng.random_range(0..tot));
            freqs.push(s[j]);
            *iv = levels[iv][j];
        }
    }
    debug_assert!(intervals.iter().all(|&(lo, hi)| lo == hi));
    Ok(Chains { f1, picks: intervals.iter().zip(&freqs).map(|(&(c, _), &f)| (c, f)).collect() })
}

/// Single `f_i / F_1` draw.
pub fn multipass_l1_draw<S: UpdateSource>(replay: &mut Replay<S>, n: u64, gamma: Gamma, seed: u64) -> Result<SampleResult> {
    let mut rng = substream(seed, 0x1a55);
    let chains = l1_chains(replay, n, gamma, &mut rng, |_| 1)?;
    Ok(match chains.picks.first() {
        None => SampleResult::bottom(),
        Some(&(c, f)) => SampleResult::index(c).with_frequency(f),
    })
}

/// Deterministic `Z` with `max f <= Z <= max f + F_1/k`, `k = ceil(n^(1-1/p))`,
/// by narrowing chunks whose sum reaches `F_1/k`; each round splits the
/// survivors `ceil(n^gamma)` ways.
pub fn narrow_z<S: UpdateSource>(replay: &mut Replay<S>, n: u64, measure: &Measure, gamma: Gamma, f1: u64) -> Result<BigRational> {
    let Measure::Lp { p } = measure else { return Err(invalid("Z narrowing is for L_p")) };
    let k = lp_budget(n, *p);
    let a = gamma.arity(n);
    let mut chunks = chunk_bounds(1, n, k.saturating_mul(a));
    let mut best = 0u64;
    loop {
        let levels: HashMap<(u64, u64), Vec<(u64, u64)>> = chunks.iter().map(|&c| (c, vec![c])).collect();
        let sums = pass_sums(replay, &levels)?;
        let heavy: Vec<(u64, u64)> = chunks.iter().copied().filter(|c| sums[c][0] as u128 * k as u128 >= f1 as u128).collect();
        best = heavy.iter().filter(|c| c.0 == c.1).map(|c| sums[c][0]).max().unwrap_or(0).max(best);
        let open: Vec<(u64, u64)> = heavy.into_iter().filter(|c| c.0 < c.1).collect();
        if open.is_empty() {
            break;
        }
        chunks = open.iter().flat_map(|&(lo, hi)| chunk_bounds(lo, hi, a)).collect();
    }
    let floor = ratio(f1 as i64, k as i64);
    Ok(if big(best) > floor { big(best) } else { floor })
}

#[derive(Clone, Debug)]
pub struct MultipassConfig {
    pub measure: Measure,
    pub n: u64,
    pub gamma: Gamma,
    pub delta: f64,
    pub seed: u64,
    pub samples: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct MultipassOutput {
    pub result: SampleResult,
    pub passes: usize,
    pub chain_passes: usize,
    pub samples: usize,
    pub zeta: Option<Zeta>,
}

/// G-sampler over a replayable strict-turnstile stream.
pub fn multipass_draw<S: UpdateSource>(replay: &mut Replay<S>, cfg: &MultipassConfig) -> Result<MultipassOutput> {
    check_delta(cfg.delta)?;
    if cfg.n == 0 {
        return Err(invalid("universe size must be positive"));
    }
    if cfg.measure.zeta().is_none() && !matches!(cfg.measure, Measure::Lp { .. }) {
        return Err(Error::Unsupported(format!("{} has no increment bound", cfg.measure.label())));
    }
    let mut rng = substream(cfg.seed, 0x1a55);
    let start = replay.passes();
    let chains = l1_chains(replay, cfg.n, cfg.gamma, &mut rng, |f1| {
        cfg.samples.unwrap_or_else(|| repetitions(&cfg.measure, cfg.n, f1, cfg.delta))
    })?;
    let chain_passes = replay.passes() - start;
    if chains.f1 == 0 {
        return Ok(MultipassOutput { result: SampleResult::bottom(), passes: chain_passes, chain_passes, samples: 0, zeta: None });
    }
    let z = match cfg.measure.zeta() {
        Some(_) => None,
        None => Some(narrow_z(replay, cfg.n, &cfg.measure, cfg.gamma, chains.f1)?),
    };
    let zeta = Zeta::for_measure(&cfg.measure, z);
    let mut accepted = Vec::new();
    for (s, &(coord, f)) in chains.picks.iter().enumerate() {
        let c = pick(&mut rng, f as usize) as u64;
        let acc = Acceptance { measure: &cfg.measure, zeta: &zeta, c, rule: Rule::Forward };
        if bernoulli(&mut rng, &acc) {
            accepted.push((s, coord, f));
        }
    }
    let result = if accepted.is_empty() {
        SampleResult::fail()
    } else {
        let (s, coord, f) = accepted[pick(&mut rng, accepted.len())];
        SampleResult::index(coord).with_frequency(f).with_repetition(s as u64)
    };
    Ok(MultipassOutput { result, passes: replay.passes() - start, chain_passes, samples: chains.picks.len(), zeta: Some(zeta) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::Exponent;
    use crate::stream::{unit_updates, Outcome};

    fn turnstile(ops: &[(u64, i64)]) -> Vec<Update> {
        ops.iter().enumerate().map(|(k, &(coord, delta))| Update { coord, delta, time: k as u64 + 1 }).collect()
    }

    fn expand(freqs: &[u64]) -> Vec<Update> {
        let coords: Vec<u64> = freqs.iter().enumerate().flat_map(|(i, &f)| std::iter::repeat_n(i as u64 + 1, f as usize)).collect();
        unit_updates(&coords)
    }

    #[test]
    fn arities() {
        let g = Gamma::new(1, 2).unwrap();
        assert_eq!(g.passes(), 2);
        assert_eq!(g.arity(4), 2);
        assert_eq!(g.arity(5), 3);
        assert_eq!(Gamma::new(1, 3).unwrap().passes(), 3);
        assert_eq!(Gamma::parse("2/3").unwrap().passes(), 2);
        assert_eq!(Gamma::parse("1").unwrap().passes(), 1);
        assert!(Gamma::parse("3/2").is_err());
        assert_eq!(level_arity(8, 3), 2);
        assert_eq!(level_arity(9, 2), 3);
        assert_eq!(level_arity(1, 4), 1);
    }

    #[test]
    fn chunks_cover_interval() {
        assert_eq!(chunk_bounds(1, 4, 2), vec![(1, 2), (3, 4)]);
        assert_eq!(chunk_bounds(1, 5, 2), vec![(1, 3), (4, 5)]);
        assert_eq!(chunk_bounds(3, 3, 4), vec![(3, 3)]);
        for n in 1..30u64 {
            for r in 1..4 {
                let c = level_chunks(1, n, r);
                assert_eq!(c.first().unwrap().0, 1);
                assert_eq!(c.last().unwrap().1, n);
                assert!(c.windows(2).all(|w| w[0].1 + 1 == w[1].0));
                if r == 1 {
                    assert!(c.iter().all(|x| x.0 == x.1));
                }
            }
        }
    }

    #[test]
    fn first_pass_sums() {
        let mut rp = Replay::new(expand(&[1, 2, 3, 4]));
        let levels: HashMap<_, _> = [((1, 4), level_chunks(1, 4, 2))].into_iter().collect();
        let sums = pass_sums(&mut rp, &levels).unwrap();
        assert_eq!(sums[&(1, 4)], vec![3, 7]);
    }

    #[test]
    fn pass_counts_are_exact() {
        for (num, den) in [(1, 1), (1, 2), (1, 3), (2, 5), (1, 4)] {
            let g = Gamma::new(num, den).unwrap();
            for n in [1u64, 2, 3, 8, 50] {
                let freqs: Vec<u64> = (1..=n).collect();
                let mut rp = Replay::new(expand(&freqs));
                let d = multipass_l1_draw(&mut rp, n, g, 4).unwrap();
                assert_eq!(rp.passes(), g.passes(), "gamma={num}/{den} n={n}");
                let Outcome::Index(i) = d.outcome else { panic!("no draw") };
                assert_eq!(d.frequency, Some(i));
            }
        }
    }

    #[test]
    fn deleted_coordinate_never_drawn() {
        let ups = turnstile(&[(1, 1), (2, 3), (3, 1), (2, -3), (4, 2)]);
        let mut rp = Replay::new(ups);
        for seed in 0..200 {
            let d = multipass_l1_draw(&mut rp, 4, Gamma::new(1, 2).unwrap(), seed).unwrap();
            assert_ne!(d.outcome, Outcome::Index(2));
        }
    }

    #[test]
    fn empty_mass_is_bottom() {
        let ups = turnstile(&[(1, 1), (1, -1)]);
        let mut rp = Replay::new(ups);
        let d = multipass_l1_draw(&mut rp, 3, Gamma::new(1, 2).unwrap(), 0).unwrap();
        assert_eq!(d.outcome, Outcome::Bottom);
        assert_eq!(rp.passes(), 2);
    }

    #[test]
    fn negative_chunk_is_rejected() {
        let ups = turnstile(&[(1, -1)]);
        let mut rp = Replay::new(ups);
        assert!(multipass_l1_draw(&mut rp, 2, Gamma::new(1, 1).unwrap(), 0).is_err());
    }

    #[test]
    fn z_narrowing_finds_the_heavy_coordinate() {
        let m = Measure::lp(Exponent::integer(2));
        let mut rp = Replay::new(expand(&[5, 1, 1, 1]));
        let z = narrow_z(&mut rp, 4, &m, Gamma::new(1, 2).unwrap(), 8).unwrap();
        assert_eq!(z, big(5));
        // nothing reaches F_1/k: Z = F_1/k
        let n = 16;
        let mut rp = Replay::new(expand(&vec![1; 16]));
        let z = narrow_z(&mut rp, n, &m, Gamma::new(1, 2).unwrap(), 16).unwrap();
        assert_eq!(z, big(4));
    }

    #[test]
    fn z_bound_on_random_vectors() {
        let m = Measure::lp(Exponent::integer(2));
        let mut rng = substream(3, 0);
        for _ in 0..100 {
            let n = rng.random_range(1..40u64);
            let freqs: Vec<u64> = (0..n).map(|_| rng.random_range(0..6u64)).collect();
            let f1: u64 = freqs.iter().sum();
            if f1 == 0 {
                continue;
            }
            let g = Gamma::new(1, rng.random_range(1..4)).unwrap();
            let mut rp = Replay::new(expand(&freqs));
            let z = narrow_z(&mut rp, n, &m, g, f1).unwrap();
            let fmax = big(*freqs.iter().max().unwrap());
            let k = lp_budget(n, Exponent::integer(2));
            assert!(z >= fmax && z <= fmax + ratio(f1 as i64, k as i64));
        }
    }

    #[test]
    fn lp_draw_single_support() {
        let cfg = MultipassConfig {
            measure: Measure::lp(Exponent::integer(2)),
            n: 6,
            gamma: Gamma::new(1, 2).unwrap(),
            delta: 0.1,
            seed: 1,
            samples: None,
        };
        let mut rp = Replay::new(expand(&[0, 0, 4, 0, 0, 0]));
        let out = multipass_draw(&mut rp, &cfg).unwrap();
        assert_eq!(out.result.outcome, Outcome::Index(3));
        assert_eq!(out.chain_passes, 2);
        assert!(out.passes > out.chain_passes);
    }
}
