//! Exhaustive small-instance batteries.
//!
//! Reservoir batteries first try the unconditional identity
//! `sum_c count(c) acc(c) = G(f_i) / zeta` per coordinate (every branch has
//! weight `1/len`), cached by the counter histogram; a stream that fails it
//! falls back to the full law and the conditional cross-multiplication.

use std::collections::{BTreeMap, HashMap};
use std::time::Instant;

use num_rational::BigRational;
use num_traits::One;

use crate::error::{Error, Result};
use crate::exact::interval::big;
use crate::exact::Symbolic;
use crate::gsampler::{Rule, Zeta};
use crate::matrix::{RowAcceptance, RowMeasure};
use crate::measure::{Exponent, Measure};
use crate::multipass::{multipass_draw, Gamma, MultipassConfig, Replay};
use crate::stream::Update;

use super::enumerate::{
    acceptance, enumerate_block, enumerate_matrix, enumerate_multipass, enumerate_tuples, last_replacement_probs,
    matrix_target, power_target, reservoir_branches, stream_zeta, sw_lp_branches, window_branches, Branch, Convention,
};
use super::{ExactDistribution, Target};

/// How many failing instances a report quotes.
const EXAMPLES: usize = 5;

#[derive(Clone, Debug, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BatteryReport {
    pub name: String,
    pub instances: u64,
    pub exact: u64,
    /// Laws with a negative mass or not summing to one.
    pub invalid: u64,
    pub mismatches: u64,
    pub examples: Vec<String>,
    pub seconds: f64,
}

impl BatteryReport {
    fn new(name: impl Into<String>) -> Self {
        Self { name: name.into(), ..Self::default() }
    }

    pub fn passed(&self) -> bool {
        self.instances > 0 && self.invalid == 0 && self.mismatches == 0
    }

    pub fn failures(&self) -> u64 {
        self.invalid + self.mismatches
    }

    fn record(&mut self, verdict: Verdict, what: impl FnOnce() -> String) {
        self.instances += 1;
        match verdict {
            Verdict::Exact => self.exact += 1,
            Verdict::Invalid => self.invalid += 1,
            Verdict::Mismatch => self.mismatches += 1,
        }
        if verdict != Verdict::Exact && self.examples.len() < EXAMPLES {
            self.examples.push(format!("{verdict:?}: {}", what()));
        }
    }

    fn done(mut self, start: Instant) -> Self {
        self.seconds = start.elapsed().as_secs_f64();
        self
    }

    fn stop(&self, stop_after: Option<u64>) -> bool {
        stop_after.is_some_and(|k| self.failures() >= k)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Exact,
    Invalid,
    Mismatch,
}

/// Verdict for a full law against target weights.
pub fn judge(law: &ExactDistribution, target: &Target) -> Verdict {
    if !law.is_valid() {
        Verdict::Invalid
    } else if law.conditional_matches(target) {
        Verdict::Exact
    } else {
        Verdict::Mismatch
    }
}

/// All sequences over `1..=n` of every length in `1..=max_len`.
pub fn all_streams(n: u64, max_len: usize) -> impl Iterator<Item = Vec<u64>> {
    (1..=max_len).flat_map(move |m| {
        let total = n.pow(m as u32);
        (0..total).map(move |mut k| {
            let mut s = vec![0u64; m];
            for x in s.iter_mut().rev() {
                *x = k % n + 1;
                k /= n;
            }
            s
        })
    })
}

/// All vectors in `0..=max^len`.
pub fn all_vectors(len: usize, max: u64) -> impl Iterator<Item = Vec<u64>> {
    let total = (max + 1).pow(len as u32);
    (0..total).map(move |mut k| {
        let mut v = vec![0u64; len];
        for x in v.iter_mut().rev() {
            *x = k % (max + 1);
            k /= max + 1;
        }
        v
    })
}

type ZetaKey = (BigRational, Option<BigRational>);

fn zeta_key(z: &Zeta) -> ZetaKey {
    match z {
        Zeta::Fixed(q) => (q.clone(), None),
        Zeta::Lp { coef, z, .. } => (coef.clone(), Some(z.clone())),
    }
}

fn in_unit_interval(a: &Symbolic) -> bool {
    a.is_nonnegative() && (Symbolic::one() - a.clone()).is_nonnegative()
}

/// Cached per-coordinate checks for one measure and convention.
struct ReservoirCheck {
    measure: Measure,
    rule: Rule,
    acc: HashMap<(ZetaKey, u64), (Symbolic, bool)>,
    sums: HashMap<(ZetaKey, Vec<(u64, u64)>, u64), bool>,
    targets: HashMap<u64, Symbolic>,
}

impl ReservoirCheck {
    fn new(measure: Measure, rule: Rule) -> Self {
        Self { measure, rule, acc: HashMap::new(), sums: HashMap::new(), targets: HashMap::new() }
    }

    fn g(&mut self, f: u64) -> Result<Symbolic> {
        if let Some(v) = self.targets.get(&f) {
            return Ok(v.clone());
        }
        let v = self.measure.g_symbolic(f).ok_or_else(|| Error::Unsupported(format!("G({f}) for {}", self.measure.label())))?;
        self.targets.insert(f, v.clone());
        Ok(v)
    }

    fn acc(&mut self, zeta: &Zeta, key: &ZetaKey, c: u64) -> Result<(Symbolic, bool)> {
        if let Some(v) = self.acc.get(&(key.clone(), c)) {
            return Ok(v.clone());
        }
        let a = acceptance(&self.measure, zeta, c, self.rule)?;
        let ok = in_unit_interval(&a);
        self.acc.insert((key.clone(), c), (a.clone(), ok));
        Ok((a, ok))
    }

    /// Unconditional identity for one coordinate; `None` if some acceptance
    /// leaves `[0, 1]`.
    fn coordinate(&mut self, zeta: &Zeta, key: &ZetaKey, hist: Vec<(u64, u64)>, f: u64) -> Result<Option<bool>> {
        let k = (key.clone(), hist, f);
        if let Some(&v) = self.sums.get(&k) {
            return Ok(Some(v));
        }
        let mut sum = Symbolic::zero();
        for &(c, cnt) in &k.1 {
            let (a, ok) = self.acc(zeta, key, c)?;
            if !ok {
                return Ok(None);
            }
            sum = sum + a.scale(&big(cnt));
        }
        let inv = zeta.symbolic().and_then(|z| z.recip()).ok_or_else(|| Error::Unsupported("zeta reciprocal".into()))?;
        let want = &self.g(f)? * &inv;
        let ok = (sum - want).is_zero();
        self.sums.insert(k, ok);
        Ok(Some(ok))
    }

    /// Verdict on the active branches of one repetition over `len` positions.
    fn verdict(&mut self, active: &[&Branch], len: u64, freqs: &BTreeMap<u64, u64>, zeta: &Zeta) -> Result<Verdict> {
        let key = zeta_key(zeta);
        let uniform = BigRational::new(1.into(), len.into());
        if active.iter().all(|b| b.prob == uniform) {
            let mut hists: BTreeMap<u64, BTreeMap<u64, u64>> = BTreeMap::new();
            for b in active {
                *hists.entry(b.coord).or_default().entry(b.count).or_insert(0) += 1;
            }
            for (&i, &f) in freqs {
                if f > 0 {
                    hists.entry(i).or_default();
                }
            }
            let mut all = true;
            for (i, h) in hists {
                let f = freqs.get(&i).copied().unwrap_or(0);
                match self.coordinate(zeta, &key, h.into_iter().collect(), f)? {
                    None => return Ok(Verdict::Invalid),
                    Some(ok) => all &= ok,
                }
            }
            if all {
                return Ok(Verdict::Exact);
            }
        }
        let mut index: BTreeMap<u64, Symbolic> = BTreeMap::new();
        for b in active {
            let (a, _) = self.acc(zeta, &key, b.count)?;
            let m = index.entry(b.coord).or_default();
            *m = m.clone() + a.scale(&b.prob);
        }
        index.retain(|_, v| !v.is_zero());
        let law = ExactDistribution::from_masses(index);
        let mut weights = BTreeMap::new();
        for (&i, &f) in freqs {
            if f > 0 {
                weights.insert(i, self.g(f)?);
            }
        }
        Ok(judge(&law, &super::target_from_weights(weights)))
    }
}

fn counts(coords: &[u64]) -> BTreeMap<u64, u64> {
    let mut f = BTreeMap::new();
    for &c in coords {
        *f.entry(c).or_insert(0) += 1;
    }
    f
}

fn fmt_stream(s: &[u64]) -> String {
    s.iter().map(u64::to_string).collect::<Vec<_>>().join(",")
}

/// Insertion-only G-sampler on every stream over `1..=n` of length at most `max_len`.
pub fn insertion_battery(measures: &[Measure], n: u64, max_len: usize, conv: Convention, stop_after: Option<u64>) -> Result<BatteryReport> {
    let start = Instant::now();
    let mut rep = BatteryReport::new(format!("gsampler n<={n} m<={max_len} ({})", conv.label()));
    let mut checks: Vec<ReservoirCheck> = measures.iter().map(|m| ReservoirCheck::new(m.clone(), conv.rule)).collect();
    'outer: for s in all_streams(n, max_len) {
        let branches = reservoir_branches(&s, conv.counter, 0);
        let active: Vec<&Branch> = branches.iter().collect();
        let freqs = counts(&s);
        for chk in &mut checks {
            let zeta = match chk.measure.zeta() {
                Some(q) => Zeta::Fixed(q),
                None => stream_zeta(&s, n, &chk.measure)?,
            };
            let v = chk.verdict(&active, s.len() as u64, &freqs, &zeta)?;
            rep.record(v, || format!("{} on [{}]", chk.measure.label(), fmt_stream(&s)));
            if rep.stop(stop_after) {
                break 'outer;
            }
        }
    }
    Ok(rep.done(start))
}

/// Checkpointed window sampler for windows `1..=max_w` on every stream of
/// length at most `max_len`.
pub fn window_battery(measures: &[Measure], n: u64, max_w: u64, max_len: usize, conv: Convention) -> Result<BatteryReport> {
    let start = Instant::now();
    let mut rep = BatteryReport::new(format!("sw_gsampler n<={n} W<={max_w} m<={max_len} ({})", conv.label()));
    let mut checks: Vec<ReservoirCheck> = measures.iter().map(|m| ReservoirCheck::new(m.clone(), conv.rule)).collect();
    for w in 1..=max_w {
        for s in all_streams(n, max_len) {
            let (branches, ws) = window_branches(&s, &measures[0], w, conv)?;
            let len = branches.len() as u64;
            let active: Vec<&Branch> = branches.iter().filter(|b| b.time >= ws).collect();
            let freqs = counts(&s[s.len().saturating_sub(w as usize)..]);
            for chk in &mut checks {
                let zeta = Zeta::Fixed(chk.measure.zeta().expect("window battery needs a static zeta"));
                let v = chk.verdict(&active, len, &freqs, &zeta)?;
                rep.record(v, || format!("{} W={w} on [{}]", chk.measure.label(), fmt_stream(&s)));
            }
        }
    }
    Ok(rep.done(start))
}

/// Sliding-window `L_p` sampler with exact suffix estimates.
pub fn sw_lp_battery(ps: &[Exponent], n: u64, max_w: u64, max_len: usize) -> Result<BatteryReport> {
    let start = Instant::now();
    let mut rep = BatteryReport::new(format!("sw_lp n<={n} W<={max_w} m<={max_len}"));
    let mut checks: Vec<ReservoirCheck> = ps.iter().map(|&p| ReservoirCheck::new(Measure::lp(p), Rule::Forward)).collect();
    for w in 1..=max_w {
        for s in all_streams(n, max_len) {
            let freqs = counts(&s[s.len().saturating_sub(w as usize)..]);
            for (k, &p) in ps.iter().enumerate() {
                let (branches, ws, f, zeta) = sw_lp_branches(&s, p, w)?;
                let len = branches.len() as u64;
                let active: Vec<&Branch> = branches.iter().filter(|b| b.time >= ws).collect();
                let v = if active.iter().any(|b| big(b.count + 1) > f) {
                    Verdict::Mismatch
                } else {
                    checks[k].verdict(&active, len, &freqs, &zeta)?
                };
                rep.record(v, || format!("p={p} W={w} on [{}]", fmt_stream(&s)));
            }
        }
    }
    Ok(rep.done(start))
}

/// Row sampler driven through its reservoir unit on every matrix stream
/// with rows `1..=n`, columns `1..=d`.
pub fn matrix_unit_battery(measure: RowMeasure, n: u64, d: usize, max_len: usize) -> Result<BatteryReport> {
    let start = Instant::now();
    let mut rep = BatteryReport::new(format!("matrixsampler {} unit n,d<={n},{d} m<={max_len}", measure.label()));
    let cells = n * d as u64;
    for s in all_streams(cells, max_len) {
        let entries: Vec<(u64, u64)> = s.iter().map(|&k| ((k - 1) / d as u64 + 1, (k - 1) % d as u64 + 1)).collect();
        let law = enumerate_matrix(&entries, d, measure)?;
        let v = judge(&law, &matrix_target(&entries, d, measure));
        rep.record(v, || format!("{entries:?}"));
    }
    Ok(rep.done(start))
}

/// `sqrt(k) = a sqrt(s)` with `s` squarefree.
fn radical(k: u64) -> (u64, u64) {
    let mut a = 1;
    let mut s = 1;
    let mut rest = k;
    let mut p = 2;
    while p * p <= rest {
        let mut e = 0;
        while rest % p == 0 {
            rest /= p;
            e += 1;
        }
        a *= p.pow(e / 2);
        if e % 2 == 1 {
            s *= p;
        }
        p += 1;
    }
    (a, s * rest)
}

/// Integer vectors over `{sqrt(s)}` for squarefree `s <= max`.
struct RadicalBasis {
    index: Vec<Option<usize>>,
    basis: Vec<u64>,
}

impl RadicalBasis {
    fn new(max: u64) -> Self {
        let mut index = vec![None; max as usize + 1];
        let mut basis = Vec::new();
        for k in 1..=max {
            if radical(k).0 == 1 {
                index[k as usize] = Some(basis.len());
                basis.push(k);
            }
        }
        Self { index, basis }
    }

    fn sqrt(&self, k: u64) -> Vec<(usize, i64)> {
        if k == 0 {
            return Vec::new();
        }
        let (a, s) = radical(k);
        vec![(self.index[s as usize].unwrap(), a as i64)]
    }

    fn to_symbolic(&self, v: &[(usize, i64)]) -> Symbolic {
        v.iter().fold(Symbolic::zero(), |acc, &(i, c)| acc + Symbolic::sqrt(&big(self.basis[i])).scale(&BigRational::from_integer(c.into())))
    }
}

fn row_g(measure: RowMeasure, basis: &RadicalBasis, v: &[u64]) -> Vec<(usize, i64)> {
    match measure {
        RowMeasure::L1 => vec![(basis.index[1].unwrap(), v.iter().sum::<u64>() as i64)],
        RowMeasure::L2 => basis.sqrt(v.iter().map(|x| x * x).sum()),
    }
}

struct Dfs<'a> {
    measure: RowMeasure,
    basis: &'a RadicalBasis,
    table: &'a HashMap<(Vec<u64>, usize), (Vec<(usize, i64)>, bool)>,
    n: usize,
    d: usize,
    max_len: usize,
    cnt: Vec<Vec<u64>>,
    diff: Vec<Vec<i64>>,
    nonzero: Vec<usize>,
    bad_terms: usize,
    path: Vec<(u64, u64)>,
}

impl Dfs<'_> {
    fn add(&mut self, r: usize, v: &[(usize, i64)], sign: i64) {
        for &(i, c) in v {
            let before = self.diff[r][i] != 0;
            self.diff[r][i] += sign * c;
            let after = self.diff[r][i] != 0;
            match (before, after) {
                (false, true) => self.nonzero[r] += 1,
                (true, false) => self.nonzero[r] -= 1,
                _ => {}
            }
        }
    }

    fn run(&mut self, rep: &mut BatteryReport) {
        if self.path.len() == self.max_len {
            return;
        }
        for r in 0..self.n {
            for c in 0..self.d {
                // prepend (r, c): its later-count vector is the current suffix row count
                let (term, ok) = self.table[&(self.cnt[r].clone(), c)].clone();
                let old = row_g(self.measure, self.basis, &self.cnt[r]);
                self.cnt[r][c] += 1;
                let new = row_g(self.measure, self.basis, &self.cnt[r]);
                self.add(r, &term, 1);
                self.add(r, &new, -1);
                self.add(r, &old, 1);
                self.bad_terms += usize::from(!ok);
                self.path.push((r as u64 + 1, c as u64 + 1));
                let v = if self.bad_terms > 0 {
                    Verdict::Invalid
                } else if self.nonzero.iter().all(|&z| z == 0) {
                    Verdict::Exact
                } else {
                    Verdict::Mismatch
                };
                rep.record(v, || {
                    let mut s = self.path.clone();
                    s.reverse();
                    format!("{s:?}")
                });
                self.run(rep);
                self.path.pop();
                self.bad_terms -= usize::from(!ok);
                self.add(r, &old, -1);
                self.add(r, &new, 1);
                self.add(r, &term, -1);
                self.cnt[r][c] -= 1;
            }
        }
    }
}

/// Every matrix stream up to `max_len` updates by a backward search over
/// suffixes. Each row keeps `sum of acceptances - G(row count)` as an integer
/// vector over square roots of squarefree integers; the stream is exact when
/// every row's vector is zero. Acceptance values come from
/// [`RowAcceptance::symbolic`], checked once per `(later-count vector, column)`.
pub fn matrix_dfs_battery(measure: RowMeasure, n: u64, d: usize, max_len: usize) -> Result<BatteryReport> {
    let start = Instant::now();
    let mut rep = BatteryReport::new(format!("matrixsampler {} n,d<={n},{d} m<={max_len}", measure.label()));
    let max_sq = (max_len as u64).pow(2);
    let basis = RadicalBasis::new(max_sq.max(1));
    let mut table = HashMap::new();
    for v in all_vectors(d, max_len as u64 - 1).filter(|v| v.iter().sum::<u64>() < max_len as u64) {
        for c in 0..d {
            let code = RowAcceptance { measure, v: &v, col: c }.symbolic();
            let mut up = v.clone();
            up[c] += 1;
            let mut term = row_g(measure, &basis, &up);
            term.extend(row_g(measure, &basis, &v).into_iter().map(|(i, x)| (i, -x)));
            let ok = in_unit_interval(&code) && (basis.to_symbolic(&term) - code).is_zero();
            table.insert((v.clone(), c), (term, ok));
        }
    }
    let mut dfs = Dfs {
        measure,
        basis: &basis,
        table: &table,
        n: n as usize,
        d,
        max_len,
        cnt: vec![vec![0; d]; n as usize],
        diff: vec![vec![0; basis.basis.len()]; n as usize],
        nonzero: vec![0; n as usize],
        bad_terms: 0,
        path: Vec::new(),
    };
    dfs.run(&mut rep);
    Ok(rep.done(start))
}

/// Frequency vectors over `n` coordinates summing to `w`.
pub fn compositions(n: usize, w: u64) -> Vec<Vec<u64>> {
    if n == 1 {
        return vec![vec![w]];
    }
    (0..=w)
        .flat_map(|first| {
            compositions(n - 1, w - first).into_iter().map(move |mut rest| {
                rest.insert(0, first);
                rest
            })
        })
        .collect()
}

fn expand(f: &[u64]) -> Vec<u64> {
    f.iter().enumerate().flat_map(|(i, &c)| std::iter::repeat_n(i as u64 + 1, c as usize)).collect()
}

/// Random-order samplers on every window multiset with `W <= max_w` over
/// `n` coordinates: the tuple harvest law must be exactly `f_j^p / W^p`, and
/// for `p >= 3` the same holds for tuples inside the first block, every
/// admissible block size.
pub fn random_order_battery(ps: &[u32], n: usize, max_w: u64) -> Result<BatteryReport> {
    let start = Instant::now();
    let mut rep = BatteryReport::new(format!("randomorder p in {ps:?} n<={n} W<={max_w}"));
    for w in 2..=max_w {
        for f in compositions(n, w) {
            let window = expand(&f);
            for &p in ps.iter().filter(|&&p| p as u64 <= w) {
                let want = power_target(&window, p);
                let wp = big(w).pow(p as i32);
                let unconditional = |law: &ExactDistribution| {
                    want.weights.iter().all(|(&j, t)| law.mass(j) == Symbolic::rational(t.as_rational().unwrap() / &wp))
                };
                let law = enumerate_tuples(&window, p)?;
                let v = match judge(&law, &want) {
                    Verdict::Exact if !unconditional(&law) => Verdict::Mismatch,
                    v => v,
                };
                rep.record(v, || format!("tuples p={p} f={f:?}"));
                if p >= 3 {
                    for b in p as u64..=w {
                        let law = enumerate_block(&window, p, b)?;
                        let v = match judge(&law, &want) {
                            Verdict::Exact if !unconditional(&law) => Verdict::Mismatch,
                            v => v,
                        };
                        rep.record(v, || format!("block p={p} B={b} f={f:?}"));
                    }
                }
            }
        }
    }
    Ok(rep.done(start))
}

/// Strict-turnstile encoding of a frequency vector: `f_i + 1` inserted, one deleted.
pub fn turnstile_stream(f: &[u64]) -> Vec<Update> {
    let mut out = Vec::new();
    for (i, &c) in f.iter().enumerate() {
        if c > 0 {
            out.push((i as u64 + 1, c as i64 + 1));
        }
    }
    for (i, &c) in f.iter().enumerate() {
        if c > 0 {
            out.push((i as u64 + 1, -1));
        }
    }
    out.into_iter().enumerate().map(|(k, (coord, delta))| Update { coord, delta, time: k as u64 + 1 }).collect()
}

/// Multipass sampler on frequency vectors (entries `0..=max_entry`, length
/// `1..=max_n`), every `gamma`. Also checks that the chain phase takes
/// exactly `ceil(1/gamma)` passes.
pub fn multipass_battery(measures: &[Measure], max_n: usize, max_entry: u64, gammas: &[Gamma]) -> Result<BatteryReport> {
    let start = Instant::now();
    let mut rep = BatteryReport::new(format!("multipass n<={max_n} f<={max_entry}"));
    for n in 1..=max_n {
        for f in all_vectors(n, max_entry) {
            let updates = turnstile_stream(&f);
            for m in measures {
                let target = super::target_distribution(&f, m).ok_or_else(|| Error::Unsupported("target".into()))?;
                for &g in gammas {
                    let law = enumerate_multipass(&updates, n as u64, m, g)?;
                    let mut v = judge(&law, &target);
                    let cfg = MultipassConfig { measure: m.clone(), n: n as u64, gamma: g, delta: 0.5, seed: 0, samples: Some(1) };
                    let out = multipass_draw(&mut Replay::new(updates.clone()), &cfg)?;
                    if out.chain_passes != g.passes() {
                        v = Verdict::Mismatch;
                    }
                    rep.record(v, || format!("{} gamma={} f={f:?}", m.label(), g.passes()));
                }
            }
        }
    }
    Ok(rep.done(start))
}

/// Success mass `F_G / (zeta m)` from a law, as `f64`.
pub fn success_f64(law: &ExactDistribution) -> f64 {
    law.success().to_f64()
}

/// Exact `1 / len` check used by the reservoir batteries.
pub fn uniform_positions(len: u64) -> bool {
    last_replacement_probs(len).iter().all(|p| p * big(len) == BigRational::one())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reservoir::Counter;
    use num_rational::Rational64;

    #[test]
    fn stream_enumeration() {
        assert_eq!(all_streams(3, 4).count(), 3 + 9 + 27 + 81);
        assert_eq!(all_streams(2, 2).collect::<Vec<_>>(), vec![vec![1], vec![2], vec![1, 1], vec![1, 2], vec![2, 1], vec![2, 2]]);
        assert_eq!(compositions(3, 2).len(), 6);
    }

    #[test]
    fn radicals() {
        assert_eq!(radical(12), (2, 3));
        assert_eq!(radical(64), (8, 1));
        assert_eq!(radical(50), (5, 2));
    }

    #[test]
    fn small_insertion_battery() {
        let ms = [Measure::lp(Exponent::integer(2)), Measure::tukey(Rational64::from_integer(2)).unwrap(), Measure::L1L2];
        let r = insertion_battery(&ms, 2, 6, Convention::default(), None).unwrap();
        assert!(r.passed(), "{r:?}");
    }

    #[test]
    fn mutant_is_caught() {
        let ms = [Measure::lp(Exponent::integer(2))];
        let r = insertion_battery(&ms, 2, 5, Convention::new(Counter::Inclusive, Rule::Forward), Some(1)).unwrap();
        assert!(!r.passed());
    }

    #[test]
    fn small_window_battery() {
        let ms = [Measure::huber(Rational64::from_integer(1)).unwrap(), Measure::lp(Exponent::new(1, 2).unwrap())];
        let r = window_battery(&ms, 2, 3, 7, Convention::default()).unwrap();
        assert!(r.passed(), "{r:?}");
    }

    #[test]
    fn small_sw_lp_battery() {
        let r = sw_lp_battery(&[Exponent::integer(2)], 2, 3, 6).unwrap();
        assert!(r.passed(), "{r:?}");
    }

    #[test]
    fn small_matrix_batteries() {
        for m in [RowMeasure::L1, RowMeasure::L2] {
            let r = matrix_unit_battery(m, 2, 2, 4).unwrap();
            assert!(r.passed(), "{r:?}");
            let r = matrix_dfs_battery(m, 2, 2, 5).unwrap();
            assert!(r.passed(), "{r:?}");
        }
    }

    #[test]
    fn small_random_order_battery() {
        let r = random_order_battery(&[2, 3], 2, 5).unwrap();
        assert!(r.passed(), "{r:?}");
    }

    #[test]
    fn small_multipass_battery() {
        let ms = [Measure::lp(Exponent::integer(1)), Measure::lp(Exponent::integer(2))];
        let r = multipass_battery(&ms, 3, 2, &[Gamma::new(1, 2).unwrap(), Gamma::new(1, 1).unwrap()]).unwrap();
        assert!(r.passed(), "{r:?}");
    }
}
