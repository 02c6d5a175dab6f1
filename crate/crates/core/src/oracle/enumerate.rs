//! Single-repetition branch enumeration with exact weights.
//!
//! Reservoir-style samplers are enumerated by the position `j` of the last
//! replacement: a unit driven with replacements forced at `1` and `j` only
//! ends in the state every run with that last replacement ends in, and that
//! event has probability `(1/j) prod_{t>j} (1 - 1/t)`. The unit itself and
//! the acceptance values come from the sampler code; frequencies and target
//! weights are recomputed here by brute force.

use std::collections::BTreeMap;

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::exact::interval::big;
use crate::exact::Symbolic;
use crate::gsampler::{Acceptance, GSampler, GSamplerConfig, Rule, Zeta};
use crate::matrix::{RowAcceptance, RowMeasure, RowReservoirUnit};
use crate::measure::{Exponent, Measure};
use crate::multipass::{level_chunks, narrow_z, select, Gamma, Replay};
use crate::randomorder::{alpha, class_counts, falling, harvest_levels, pair_outcome, tuple_outcome};
use crate::reservoir::{Counter, ReservoirUnit};
use crate::sliding::{CheckpointedSampler, Estimator, SwLpSampler};
use crate::stream::{frequencies, Update};

use super::{target_distribution, target_from_weights, ExactDistribution, Target};

/// Largest number of branches a single enumeration may visit.
pub const BRANCH_BUDGET: u64 = 1_000_000;

/// Counter start and acceptance difference of a reservoir sampler.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct Convention {
    pub counter: Counter,
    pub rule: Rule,
}

impl Convention {
    pub fn new(counter: Counter, rule: Rule) -> Self {
        Self { counter, rule }
    }

    pub fn label(&self) -> String {
        let c = match self.counter {
            Counter::StrictlyAfter => "strictly-after",
            Counter::Inclusive => "inclusive",
        };
        let r = match self.rule {
            Rule::Forward => "G(c+1)-G(c)",
            Rule::Backward => "G(c)-G(c-1)",
        };
        format!("{c} counter, {r}")
    }
}

fn budget(count: u64) -> Result<()> {
    if count > BRANCH_BUDGET {
        return Err(Error::BranchBudgetExceeded(BRANCH_BUDGET));
    }
    Ok(())
}

fn unrepresentable(what: &str) -> Error {
    Error::Unsupported(format!("{what} is not exactly representable"))
}

/// Final state of a size-one reservoir after its last replacement.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Branch {
    pub prob: BigRational,
    pub coord: u64,
    /// Absolute time of the sampled occurrence.
    pub time: u64,
    pub count: u64,
}

/// `Pr[last replacement at j]` for `j = 1..=len`.
pub fn last_replacement_probs(len: u64) -> Vec<BigRational> {
    (1..=len)
        .map(|j| {
            let mut p = BigRational::new(1.into(), j.into());
            for t in j + 1..=len {
                p *= BigRational::new((t - 1).into(), t.into());
            }
            p
        })
        .collect()
}

/// One branch per last-replacement position; `offset` shifts unit times to
/// absolute stream times.
pub fn reservoir_branches(coords: &[u64], counter: Counter, offset: u64) -> Vec<Branch> {
    let probs = last_replacement_probs(coords.len() as u64);
    probs
        .into_iter()
        .enumerate()
        .map(|(j, prob)| {
            let mut unit = ReservoirUnit::with_counter(counter);
            for (t, &c) in coords.iter().enumerate() {
                unit.step(c, t == j);
            }
            Branch { prob, coord: unit.sample().unwrap(), time: unit.time() + offset, count: unit.count() }
        })
        .collect()
}

/// Exact acceptance of a counter value.
pub fn acceptance(measure: &Measure, zeta: &Zeta, c: u64, rule: Rule) -> Result<Symbolic> {
    Acceptance { measure, zeta, c, rule }.symbolic().ok_or_else(|| unrepresentable("acceptance"))
}

fn law_from_branches<'a>(
    branches: impl IntoIterator<Item = &'a Branch>,
    mut acc: impl FnMut(&Branch) -> Result<Symbolic>,
) -> Result<ExactDistribution> {
    let mut index: BTreeMap<u64, Symbolic> = BTreeMap::new();
    for b in branches {
        let a = acc(b)?;
        let m = index.entry(b.coord).or_default();
        *m = m.clone() + a.scale(&b.prob);
    }
    index.retain(|_, v| !v.is_zero());
    Ok(ExactDistribution::from_masses(index))
}

/// `zeta` an insertion-only sampler with one repetition reaches on `coords`.
pub fn stream_zeta(coords: &[u64], n: u64, measure: &Measure) -> Result<Zeta> {
    let cfg = GSamplerConfig::new(measure.clone(), n, coords.len() as u64, 0.5, 0).with_repetitions(1);
    let mut s = GSampler::new(cfg)?;
    for &c in coords {
        s.update(c);
    }
    Ok(s.zeta())
}

/// Insertion-only G-sampler. `zeta` defaults to the sampler's own.
pub fn enumerate_gsampler(coords: &[u64], n: u64, measure: &Measure, zeta: Option<Zeta>, conv: Convention) -> Result<ExactDistribution> {
    if coords.is_empty() {
        return Ok(ExactDistribution::bottom_only());
    }
    budget(2 * coords.len() as u64)?;
    let zeta = match zeta {
        Some(z) => z,
        None => stream_zeta(coords, n, measure)?,
    };
    let branches = reservoir_branches(coords, conv.counter, 0);
    law_from_branches(&branches, |b| acceptance(measure, &zeta, b.count, conv.rule))
}

/// Branches of the covering bank of a checkpointed window sampler, with
/// the window start; inactive branches fail.
pub fn window_branches(coords: &[u64], measure: &Measure, window: u64, conv: Convention) -> Result<(Vec<Branch>, u64)> {
    let mut s = CheckpointedSampler::with_repetitions(measure.clone(), window, 1, 0)?.with_convention(conv.counter, conv.rule);
    for &c in coords {
        s.update(c);
    }
    let start = s.active_bank().map(|b| b.start()).unwrap_or(1);
    Ok((reservoir_branches(&coords[start as usize - 1..], conv.counter, start - 1), s.window_start()))
}

/// Checkpointed window sampler for a measure with a static `zeta`.
pub fn enumerate_sw_gsampler(coords: &[u64], measure: &Measure, window: u64, conv: Convention) -> Result<ExactDistribution> {
    if coords.is_empty() {
        return Ok(ExactDistribution::bottom_only());
    }
    budget(2 * coords.len() as u64)?;
    let zeta = Zeta::Fixed(measure.zeta().ok_or_else(|| Error::Unsupported("no static zeta".into()))?);
    let (branches, ws) = window_branches(coords, measure, window, conv)?;
    law_from_branches(branches.iter().filter(|b| b.time >= ws), |b| acceptance(measure, &zeta, b.count, conv.rule))
}

/// Branches of the first smooth-histogram suffix, the window start and `zeta`.
pub fn sw_lp_branches(coords: &[u64], p: Exponent, window: u64) -> Result<(Vec<Branch>, u64, BigRational, Zeta)> {
    let mut s = SwLpSampler::with_repetitions(p, window, 1, 0, Estimator::Exact)?;
    for &c in coords {
        s.update(c);
    }
    let ws = s.histogram().window_start();
    let (f, bank) = s.first().ok_or_else(|| Error::Unsupported("empty histogram".into()))?;
    let start = bank.start();
    let zeta = s.zeta(f.clone());
    Ok((reservoir_branches(&coords[start as usize - 1..], Counter::StrictlyAfter, start - 1), ws, f, zeta))
}

/// Sliding-window `L_p` sampler with exact suffix estimates. A branch whose
/// counter exceeds `F` would make the sampler report a degraded estimate; it
/// is counted as `Fail`.
pub fn enumerate_sw_lp(coords: &[u64], p: Exponent, window: u64) -> Result<ExactDistribution> {
    if coords.is_empty() {
        return Ok(ExactDistribution::bottom_only());
    }
    budget(2 * coords.len() as u64)?;
    let (branches, ws, f, zeta) = sw_lp_branches(coords, p, window)?;
    let active: Vec<&Branch> = branches.iter().filter(|b| b.time >= ws).collect();
    if active.iter().any(|b| big(b.count + 1) > f) {
        return Ok(ExactDistribution::from_masses(BTreeMap::new()));
    }
    let measure = Measure::lp(p);
    law_from_branches(active, |b| acceptance(&measure, &zeta, b.count, Rule::Forward))
}

/// Matrix row sampler over 1-based `(row, col)` insertions.
pub fn enumerate_matrix(entries: &[(u64, u64)], d: usize, measure: RowMeasure) -> Result<ExactDistribution> {
    if entries.is_empty() {
        return Ok(ExactDistribution::bottom_only());
    }
    budget(2 * entries.len() as u64)?;
    let probs = last_replacement_probs(entries.len() as u64);
    let mut index: BTreeMap<u64, Symbolic> = BTreeMap::new();
    for (j, prob) in probs.iter().enumerate() {
        let mut unit = RowReservoirUnit::new(d);
        for (t, &(r, c)) in entries.iter().enumerate() {
            unit.step(r, c as usize - 1, t == j);
        }
        let (row, col) = unit.sample().unwrap();
        let a = RowAcceptance { measure, v: unit.v(), col }.symbolic();
        let m = index.entry(row).or_default();
        *m = m.clone() + a.scale(prob);
    }
    index.retain(|_, v| !v.is_zero());
    Ok(ExactDistribution::from_masses(index))
}

/// Brute-force row target `G(row vector)`.
pub fn matrix_target(entries: &[(u64, u64)], d: usize, measure: RowMeasure) -> Target {
    let mut rows: BTreeMap<u64, Vec<u64>> = BTreeMap::new();
    for &(r, c) in entries {
        rows.entry(r).or_insert_with(|| vec![0; d])[c as usize - 1] += 1;
    }
    target_from_weights(rows.into_iter().map(|(r, v)| (r, measure.g_symbolic(&v))))
}

/// Distinct orderings of a multiset, in lexicographic order.
pub fn distinct_orders(items: &[u64]) -> Vec<Vec<u64>> {
    let mut cur: Vec<u64> = items.to_vec();
    cur.sort_unstable();
    let mut out = vec![cur.clone()];
    // next lexicographic permutation
    loop {
        let Some(i) = (1..cur.len()).rev().find(|&i| cur[i - 1] < cur[i]) else { break };
        let j = (i..cur.len()).rev().find(|&j| cur[j] > cur[i - 1]).unwrap();
        cur.swap(i - 1, j);
        cur[i..].reverse();
        out.push(cur.clone());
    }
    out
}

fn multinomial(items: &[u64]) -> BigUint {
    let mut counts: BTreeMap<u64, u64> = BTreeMap::new();
    for &x in items {
        *counts.entry(x).or_insert(0) += 1;
    }
    let mut r = falling(items.len() as u64, items.len() as u32);
    for &c in counts.values() {
        r /= falling(c, c as u32);
    }
    r
}

fn check_orders(window: &[u64], per_order: u64) -> Result<()> {
    let orders = multinomial(window);
    if orders > BigUint::from(BRANCH_BUDGET) || orders * BigUint::from(per_order) > BigUint::from(BRANCH_BUDGET) {
        return Err(Error::BranchBudgetExceeded(BRANCH_BUDGET));
    }
    Ok(())
}

/// Harvest law of one `p`-tuple of consecutive positions in a uniformly
/// random order of the window, with the level drawn from `alpha`. For `p = 2`
/// the pair rule of the adjacent-pair sampler decides the outcome.
pub fn enumerate_tuples(window: &[u64], p: u32) -> Result<ExactDistribution> {
    let w = window.len() as u64;
    if w == 0 {
        return Ok(ExactDistribution::bottom_only());
    }
    if (p as u64) > w || p < 2 {
        return Err(Error::InvalidParameter(format!("need 2 <= p <= W (p={p}, W={w})")));
    }
    let starts = w - p as u64 + 1;
    check_orders(window, starts * p as u64)?;
    let al = alpha(p, w);
    let orders = distinct_orders(window);
    let weight = BigRational::new(1.into(), (orders.len() as u64 * starts).into());
    let mut index: BTreeMap<u64, BigRational> = BTreeMap::new();
    for o in &orders {
        for k in 0..starts as usize {
            let t = &o[k..k + p as usize];
            for (q, a) in al.iter().enumerate().skip(1) {
                let out = if p == 2 { pair_outcome(t[0], t[1], q == 1) } else { tuple_outcome(t, q) };
                if let Some(j) = out {
                    *index.entry(j).or_insert_with(BigRational::zero) += a * &weight;
                }
            }
        }
    }
    Ok(ExactDistribution::from_masses(index.into_iter().map(|(j, q)| (j, Symbolic::rational(q))).collect()))
}

/// Harvest law of a uniformly random ordered `p`-tuple of distinct positions
/// from the first block of size `b` of a uniformly random order. Also checks
/// that the per-class tuple counts the block sampler uses reproduce the
/// brute-force harvest expectation in every order.
pub fn enumerate_block(window: &[u64], p: u32, b: u64) -> Result<ExactDistribution> {
    let w = window.len() as u64;
    if w == 0 {
        return Ok(ExactDistribution::bottom_only());
    }
    if (p as u64) > b || b > w || p < 2 {
        return Err(Error::InvalidParameter(format!("need 2 <= p <= B <= W (p={p}, B={b}, W={w})")));
    }
    let tuples = falling(b, p);
    let per = u64::try_from(&tuples).unwrap_or(u64::MAX);
    check_orders(window, per.saturating_mul(p as u64))?;
    let al = alpha(p, w);
    let levels = harvest_levels(p, w);
    let orders = distinct_orders(window);
    let weight = BigRational::new(1.into(), BigUint::from(orders.len()).into()) / BigRational::from_integer(tuples.into());
    let mut index: BTreeMap<u64, BigRational> = BTreeMap::new();
    for o in &orders {
        let block = &o[..b as usize];
        let mut here: BTreeMap<u64, BigRational> = BTreeMap::new();
        for_each_tuple(b as usize, p as usize, &mut |pos| {
            let t: Vec<u64> = pos.iter().map(|&i| block[i]).collect();
            for (q, a) in al.iter().enumerate().skip(1) {
                if let Some(j) = tuple_outcome(&t, q) {
                    *here.entry(j).or_insert_with(BigRational::zero) += a;
                }
            }
        });
        for (&j, v) in &here {
            let g = block.iter().filter(|&&x| x == j).count() as u64;
            let via_classes: BigRational = class_counts(g, b, p)
                .into_iter()
                .zip(&levels)
                .map(|(m, a)| BigRational::from_integer(m.into()) * a)
                .fold(BigRational::zero(), |x, y| x + y);
            if &via_classes != v {
                return Err(Error::Unsupported(format!("class counts disagree with tuples for coordinate {j} in block {block:?}")));
            }
            *index.entry(j).or_insert_with(BigRational::zero) += v * &weight;
        }
    }
    Ok(ExactDistribution::from_masses(index.into_iter().map(|(j, q)| (j, Symbolic::rational(q))).collect()))
}

fn for_each_tuple(b: usize, p: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(b: usize, p: usize, used: &mut Vec<bool>, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if cur.len() == p {
            f(cur);
            return;
        }
        for i in 0..b {
            if !used[i] {
                used[i] = true;
                cur.push(i);
                rec(b, p, used, cur, f);
                cur.pop();
                used[i] = false;
            }
        }
    }
    rec(b, p, &mut vec![false; b], &mut Vec::with_capacity(p), f);
}

/// Target `f_j^p` of the random-order samplers.
pub fn power_target(window: &[u64], p: u32) -> Target {
    let mut f: BTreeMap<u64, u64> = BTreeMap::new();
    for &x in window {
        *f.entry(x).or_insert(0) += 1;
    }
    target_from_weights(f.into_iter().map(|(j, c)| (j, Symbolic::rational(big(c).pow(p as i32)))))
}

/// Law of the coordinate a single chain of the multipass sampler ends on.
pub fn chain_law(freqs: &[u64], gamma: Gamma) -> Result<BTreeMap<u64, BigRational>> {
    let n = freqs.len() as u64;
    let mut out = BTreeMap::new();
    let mut visited = 0u64;
    chain_rec(freqs, (1, n), gamma.passes(), BigRational::one(), &mut out, &mut visited)?;
    Ok(out)
}

fn chain_rec(
    freqs: &[u64],
    (lo, hi): (u64, u64),
    r: usize,
    prob: BigRational,
    out: &mut BTreeMap<u64, BigRational>,
    visited: &mut u64,
) -> Result<()> {
    if r == 0 {
        if lo != hi {
            return Err(Error::Unsupported(format!("chain ended on [{lo}, {hi}], not a single coordinate")));
        }
        *out.entry(lo).or_insert_with(BigRational::zero) += prob;
        return Ok(());
    }
    let chunks = level_chunks(lo, hi, r);
    let sums: Vec<u64> = chunks.iter().map(|&(a, b)| freqs[a as usize - 1..b as usize].iter().sum()).collect();
    let total: u64 = sums.iter().sum();
    *visited += total;
    budget(*visited)?;
    let mut hits = vec![0u64; chunks.len()];
    for u in 0..total {
        hits[select(&sums, u)] += 1;
    }
    for (k, &h) in hits.iter().enumerate() {
        if h > 0 {
            chain_rec(freqs, chunks[k], r - 1, &prob * BigRational::new(h.into(), total.into()), out, visited)?;
        }
    }
    Ok(())
}

/// Multipass sampler on a strict-turnstile stream: chain law times uniform
/// counter in `0..f_i` times acceptance.
pub fn enumerate_multipass(updates: &[Update], n: u64, measure: &Measure, gamma: Gamma) -> Result<ExactDistribution> {
    let raw = frequencies(n, updates);
    if raw.iter().any(|&f| f < 0) {
        return Err(Error::InvalidParameter("negative final frequency".into()));
    }
    let freqs: Vec<u64> = raw.iter().map(|&f| f as u64).collect();
    let f1: u64 = freqs.iter().sum();
    if f1 == 0 {
        return Ok(ExactDistribution::bottom_only());
    }
    let z = match measure.zeta() {
        Some(_) => None,
        None => Some(narrow_z(&mut Replay::new(updates.to_vec()), n, measure, gamma, f1)?),
    };
    let zeta = Zeta::for_measure(measure, z);
    let mut index = BTreeMap::new();
    for (i, pi) in chain_law(&freqs, gamma)? {
        let f = freqs[i as usize - 1];
        let mut sum = Symbolic::zero();
        for c in 0..f {
            sum = sum + acceptance(measure, &zeta, c, Rule::Forward)?;
        }
        let mass = sum.scale(&(pi / big(f)));
        if !mass.is_zero() {
            index.insert(i, mass);
        }
    }
    Ok(ExactDistribution::from_masses(index))
}

/// Sampler selection for [`enumerate_single_repetition`].
#[derive(Clone, Debug)]
pub enum SamplerSpec {
    GSampler { measure: Measure, n: u64, zeta: Option<Zeta>, convention: Convention },
    SwGSampler { measure: Measure, window: u64, convention: Convention },
    SwLp { p: Exponent, window: u64 },
    Matrix { measure: RowMeasure, d: usize },
    PairL2,
    BlockLp { p: u32, block: u64 },
    Multipass { measure: Measure, n: u64, gamma: Gamma },
}

impl SamplerSpec {
    pub fn name(&self) -> &'static str {
        match self {
            SamplerSpec::GSampler { .. } => "gsampler",
            SamplerSpec::SwGSampler { .. } => "sw_gsampler",
            SamplerSpec::SwLp { .. } => "sw_lp",
            SamplerSpec::Matrix { .. } => "matrixsampler",
            SamplerSpec::PairL2 => "pair_l2",
            SamplerSpec::BlockLp { .. } => "block_lp",
            SamplerSpec::Multipass { .. } => "multipass",
        }
    }
}

/// Stream shapes the enumerators take.
#[derive(Clone, Copy, Debug)]
pub enum Input<'a> {
    Coords(&'a [u64]),
    Entries(&'a [(u64, u64)]),
    Updates(&'a [Update]),
}

fn coords_of<'a>(input: Input<'a>, buf: &'a mut Vec<u64>) -> Result<&'a [u64]> {
    match input {
        Input::Coords(c) => Ok(c),
        Input::Updates(u) => {
            if u.iter().any(|x| x.delta != 1) {
                return Err(Error::InvalidParameter("sampler needs unit insertions".into()));
            }
            *buf = u.iter().map(|x| x.coord).collect();
            Ok(buf)
        }
        Input::Entries(_) => Err(Error::InvalidParameter("matrix entries given to a vector sampler".into())),
    }
}

/// Exact law of one repetition of `spec` on `input`.
pub fn enumerate_single_repetition(spec: &SamplerSpec, input: Input<'_>) -> Result<ExactDistribution> {
    let mut buf = Vec::new();
    match spec {
        SamplerSpec::GSampler { measure, n, zeta, convention } => {
            enumerate_gsampler(coords_of(input, &mut buf)?, *n, measure, zeta.clone(), *convention)
        }
        SamplerSpec::SwGSampler { measure, window, convention } => {
            enumerate_sw_gsampler(coords_of(input, &mut buf)?, measure, *window, *convention)
        }
        SamplerSpec::SwLp { p, window } => enumerate_sw_lp(coords_of(input, &mut buf)?, *p, *window),
        SamplerSpec::Matrix { measure, d } => match input {
            Input::Entries(e) => enumerate_matrix(e, *d, *measure),
            _ => Err(Error::InvalidParameter("matrix sampler needs (row, col) entries".into())),
        },
        SamplerSpec::PairL2 => enumerate_tuples(coords_of(input, &mut buf)?, 2),
        SamplerSpec::BlockLp { p, block } => enumerate_block(coords_of(input, &mut buf)?, *p, *block),
        SamplerSpec::Multipass { measure, n, gamma } => {
            let owned;
            let updates = match input {
                Input::Updates(u) => u,
                Input::Coords(c) => {
                    owned = crate::stream::unit_updates(c);
                    &owned[..]
                }
                Input::Entries(_) => return Err(Error::InvalidParameter("matrix entries given to a vector sampler".into())),
            };
            enumerate_multipass(updates, *n, measure, *gamma)
        }
    }
}

/// Brute-force target weights for `spec` on `input`.
pub fn spec_target(spec: &SamplerSpec, input: Input<'_>) -> Result<Target> {
    let mut buf = Vec::new();
    let vector = |coords: &[u64], n: u64, measure: &Measure| -> Result<Target> {
        let f: Vec<u64> = frequencies(n, &crate::stream::unit_updates(coords)).into_iter().map(|x| x as u64).collect();
        target_distribution(&f, measure).ok_or_else(|| unrepresentable("target"))
    };
    match spec {
        SamplerSpec::GSampler { measure, n, .. } => vector(coords_of(input, &mut buf)?, *n, measure),
        SamplerSpec::SwGSampler { measure, window, .. } => {
            let c = coords_of(input, &mut buf)?;
            let w = &c[c.len().saturating_sub(*window as usize)..];
            vector(w, c.iter().copied().max().unwrap_or(1), measure)
        }
        SamplerSpec::SwLp { p, window } => {
            let c = coords_of(input, &mut buf)?;
            let w = &c[c.len().saturating_sub(*window as usize)..];
            vector(w, c.iter().copied().max().unwrap_or(1), &Measure::lp(*p))
        }
        SamplerSpec::Matrix { measure, d } => match input {
            Input::Entries(e) => Ok(matrix_target(e, *d, *measure)),
            _ => Err(Error::InvalidParameter("matrix sampler needs (row, col) entries".into())),
        },
        SamplerSpec::PairL2 => Ok(power_target(coords_of(input, &mut buf)?, 2)),
        SamplerSpec::BlockLp { p, .. } => Ok(power_target(coords_of(input, &mut buf)?, *p)),
        SamplerSpec::Multipass { measure, n, .. } => {
            let f: Vec<u64> = match input {
                Input::Updates(u) => frequencies(*n, u),
                Input::Coords(c) => frequencies(*n, &crate::stream::unit_updates(c)),
                Input::Entries(_) => return Err(Error::InvalidParameter("matrix entries given to a vector sampler".into())),
            }
            .into_iter()
            .map(|x| x.max(0) as u64)
            .collect();
            target_distribution(&f, measure).ok_or_else(|| unrepresentable("target"))
        }
    }
}
