//! Row sampling for matrices built from entrywise insertions.
//!
//! A repetition holds a uniformly random update `(r, c)` plus the vector `v`
//! of updates to row `r` that arrived after it, and accepts with probability
//! `(G(v + e_c) - G(v)) / zeta`.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use num_bigint::BigInt;
use num_rational::BigRational;

use crate::error::{invalid, Result};
use crate::exact::interval::rational_root;
use crate::exact::{bernoulli, next_replacement, F64Range, Interval, Probability, Symbolic};
use crate::reservoir::pick;
use crate::rng::{mix, substream, Rng};
use crate::stream::SampleResult;

/// Row functions with increment bound `zeta = 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RowMeasure {
    L1,
    L2,
}

fn sum_sq(x: &[u64]) -> u64 {
    x.iter().map(|&v| v * v).sum()
}

impl RowMeasure {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "l1" => Ok(RowMeasure::L1),
            "l2" => Ok(RowMeasure::L2),
            _ => Err(invalid(format!("unknown row measure `{s}`"))),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            RowMeasure::L1 => "l1",
            RowMeasure::L2 => "l2",
        }
    }

    /// Both norms are 1-Lipschitz in each coordinate.
    pub fn zeta(self) -> u64 {
        1
    }

    pub fn g_f64(self, x: &[u64]) -> f64 {
        match self {
            RowMeasure::L1 => x.iter().sum::<u64>() as f64,
            RowMeasure::L2 => (sum_sq(x) as f64).sqrt(),
        }
    }

    pub fn g_symbolic(self, x: &[u64]) -> Symbolic {
        match self {
            RowMeasure::L1 => Symbolic::int(x.iter().sum::<u64>() as i64),
            RowMeasure::L2 => Symbolic::sqrt(&BigRational::from_integer(BigInt::from(sum_sq(x)))),
        }
    }

    /// Lower bound on `F_G / m` for rows of width `d`.
    fn density_lower_bound(self, d: usize) -> f64 {
        match self {
            RowMeasure::L1 => 1.0,
            // ||x||_2 >= ||x||_1 / sqrt(d)
            RowMeasure::L2 => 1.0 / (d as f64).sqrt(),
        }
    }
}

/// Acceptance probability `G(v + e_col) - G(v)` (with `zeta = 1`).
pub struct RowAcceptance<'a> {
    pub measure: RowMeasure,
    pub v: &'a [u64],
    pub col: usize,
}

impl RowAcceptance<'_> {
    fn sums(&self) -> (u64, u64) {
        let s = sum_sq(self.v);
        (s, s + 2 * self.v[self.col] + 1)
    }

    pub fn symbolic(&self) -> Symbolic {
        match self.measure {
            RowMeasure::L1 => Symbolic::one(),
            RowMeasure::L2 => {
                let (s, t) = self.sums();
                let q = |x: u64| BigRational::from_integer(BigInt::from(x));
                Symbolic::sqrt(&q(t)) - Symbolic::sqrt(&q(s))
            }
        }
    }
}

impl Probability for RowAcceptance<'_> {
    fn enclose_f64(&self) -> F64Range {
        match self.measure {
            RowMeasure::L1 => F64Range::exact(1.0),
            RowMeasure::L2 => {
                let (s, t) = self.sums();
                F64Range::point(t as f64).powf(0.5).sub(F64Range::point(s as f64).powf(0.5))
            }
        }
    }

    fn enclose(&self, bits: u32) -> Interval {
        match self.measure {
            RowMeasure::L1 => Interval::from_int(1),
            RowMeasure::L2 => {
                let (s, t) = self.sums();
                let q = |x: u64| BigRational::from_integer(BigInt::from(x));
                rational_root(&q(t), 2, bits + 2).sub(&rational_root(&q(s), 2, bits + 2))
            }
        }
    }
}

/// One repetition driven by explicit replacement decisions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RowReservoirUnit {
    d: usize,
    seen: u64,
    sample: Option<(u64, usize)>,
    time: u64,
    v: Vec<u64>,
}

impl RowReservoirUnit {
    pub fn new(d: usize) -> Self {
        Self { d, seen: 0, sample: None, time: 0, v: vec![0; d] }
    }

    /// `col` is 0-based.
    pub fn step(&mut self, row: u64, col: usize, replace: bool) {
        assert!(col < self.d);
        self.seen += 1;
        if replace || self.seen == 1 {
            self.sample = Some((row, col));
            self.time = self.seen;
            self.v.iter_mut().for_each(|x| *x = 0);
        } else if self.sample.map(|s| s.0) == Some(row) {
            self.v[col] += 1;
        }
    }

    pub fn sample(&self) -> Option<(u64, usize)> {
        self.sample
    }

    pub fn time(&self) -> u64 {
        self.time
    }

    pub fn v(&self) -> &[u64] {
        &self.v
    }
}

#[derive(Clone, Debug)]
struct RowSlot {
    row: u64,
    col: usize,
    time: u64,
    offset: Vec<u64>,
}

#[derive(Clone, Debug)]
struct TrackedRow {
    counts: Vec<u64>,
    holders: u32,
}

/// State of one repetition inside a [`MatrixBank`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RowView {
    pub row: u64,
    /// 0-based column of the sampled update.
    pub col: usize,
    pub time: u64,
    pub v: Vec<u64>,
}

/// `R` row reservoirs sharing one column-count vector per held row.
#[derive(Clone, Debug)]
pub struct MatrixBank {
    d: usize,
    seen: u64,
    slots: Vec<Option<RowSlot>>,
    rngs: Vec<Rng>,
    heap: BinaryHeap<Reverse<(u64, u32)>>,
    tracked: HashMap<u64, TrackedRow>,
}

impl MatrixBank {
    pub fn new(r: usize, d: usize, seed: u64) -> Self {
        assert!(r >= 1 && d >= 1);
        Self {
            d,
            seen: 0,
            slots: vec![None; r],
            rngs: (0..r as u64).map(|u| substream(seed, u)).collect(),
            heap: (0..r as u32).map(|u| Reverse((1u64, u))).collect(),
            tracked: HashMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn seen(&self) -> u64 {
        self.seen
    }

    /// Counters currently allocated, `d` per held row.
    pub fn counters(&self) -> usize {
        self.tracked.len() * self.d + self.slots.iter().flatten().map(|s| s.offset.len()).sum::<usize>()
    }

    /// `col` is 0-based.
    pub fn update(&mut self, row: u64, col: usize) {
        assert!(col < self.d, "column out of range");
        self.seen += 1;
        let t = self.seen;
        if let Some(e) = self.tracked.get_mut(&row) {
            e.counts[col] += 1;
        }
        while let Some(&Reverse((next, u))) = self.heap.peek() {
            if next != t {
                break;
            }
            self.heap.pop();
            self.resample(u as usize, row, col, t);
            let after = next_replacement(&mut self.rngs[u as usize], t);
            if after != u64::MAX {
                self.heap.push(Reverse((after, u)));
            }
        }
    }

    fn resample(&mut self, u: usize, row: u64, col: usize, t: u64) {
        if let Some(old) = self.slots[u].take() {
            let e = self.tracked.get_mut(&old.row).unwrap();
            e.holders -= 1;
            if e.holders == 0 {
                self.tracked.remove(&old.row);
            }
        }
        let d = self.d;
        let e = self.tracked.entry(row).or_insert_with(|| TrackedRow { counts: vec![0; d], holders: 0 });
        e.holders += 1;
        self.slots[u] = Some(RowSlot { row, col, time: t, offset: e.counts.clone() });
    }

    pub fn unit(&self, u: usize) -> Option<RowView> {
        let s = self.slots[u].as_ref()?;
        let run = &self.tracked[&s.row].counts;
        let v = run.iter().zip(&s.offset).map(|(a, b)| a - b).collect();
        Some(RowView { row: s.row, col: s.col, time: s.time, v })
    }
}

#[derive(Clone, Debug)]
pub struct RowSampler {
    measure: RowMeasure,
    bank: MatrixBank,
    rng: Rng,
}

/// `R = ceil(4 (zeta m / F_G lower bound) ln(1/delta))`, independent of `m`.
pub fn row_repetitions(measure: RowMeasure, d: usize, delta: f64) -> usize {
    let ratio = measure.zeta() as f64 / measure.density_lower_bound(d);
    (4.0 * ratio * (1.0 / delta).ln()).ceil().max(1.0) as usize
}

impl RowSampler {
    pub fn new(measure: RowMeasure, d: usize, delta: f64, seed: u64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(invalid("delta must lie in (0, 1)"));
        }
        Self::with_repetitions(measure, d, row_repetitions(measure, d, delta), seed)
    }

    pub fn with_repetitions(measure: RowMeasure, d: usize, r: usize, seed: u64) -> Result<Self> {
        if d == 0 || r == 0 {
            return Err(invalid("need at least one column and one repetition"));
        }
        Ok(Self { measure, bank: MatrixBank::new(r, d, mix(seed, 1)), rng: substream(seed, 0x3a7)})
    }

    pub fn bank(&self) -> &MatrixBank {
        &self.bank
    }

    /// Unit insertion at `(row, col)`, both 1-based.
    pub fn update(&mut self, row: u64, col: u64) {
        self.bank.update(row, (col - 1) as usize);
    }

    /// `(repetition, row)` for every accepting repetition.
    pub fn accepted(&mut self) -> Vec<(usize, u64)> {
        let mut out = Vec::new();
        for u in 0..self.bank.len() {
            let Some(view) = self.bank.unit(u) else { continue };
            let acc = RowAcceptance { measure: self.measure, v: &view.v, col: view.col };
            if bernoulli(&mut self.rng, &acc) {
                out.push((u, view.row));
            }
        }
        out
    }

    pub fn draw(&mut self) -> SampleResult {
        if self.bank.seen() == 0 {
            return SampleResult::bottom();
        }
        let acc = self.accepted();
        if acc.is_empty() {
            return SampleResult::fail();
        }
        let (u, row) = acc[pick(&mut self.rng, acc.len())];
        SampleResult::index(row).with_repetition(u as u64)
    }
}
