//! Sliding-window samplers.
//!
//! [`CheckpointedSampler`] opens a reservoir bank every `W` updates and keeps
//! the two newest; the older bank covering the window start answers queries,
//! and a repetition only counts when its sample is still active.
//! [`SwLpSampler`] pairs every smooth-histogram suffix with its own bank and
//! scales acceptance by the suffix's `L_p` upper bound `F`.

use std::collections::VecDeque;

use num_rational::BigRational;

use crate::error::{invalid, Error, Result};
use crate::exact::bernoulli;
use crate::exact::interval::big;
use crate::gsampler::{check_delta, repetitions, Acceptance, Rule, Zeta};
use crate::measure::{Exponent, Measure};
use crate::reservoir::{pick, Counter, SamplerBank, UnitView};
use crate::rng::{mix, substream, Rng};
use crate::smoothhist::{ExactFp, FpSketch, SmoothHistogram, StableFp};
use crate::stream::SampleResult;

const DRAW_STREAM: u64 = 0x5e1d;

/// Window sampler for any measure with a static increment bound.
#[derive(Clone, Debug)]
pub struct CheckpointedSampler {
    measure: Measure,
    zeta: Zeta,
    window: u64,
    r: usize,
    seed: u64,
    counter: Counter,
    rule: Rule,
    t: u64,
    banks: VecDeque<SamplerBank>,
    draw_rng: Rng,
}

/// Repetitions for a window: twice the insertion-only count at `m = W`,
/// since a sample is active with probability at least 1/2.
pub fn window_repetitions(measure: &Measure, n: u64, window: u64, delta: f64) -> usize {
    2 * repetitions(measure, n, window, delta)
}

impl CheckpointedSampler {
    pub fn new(measure: Measure, n: u64, window: u64, delta: f64, seed: u64) -> Result<Self> {
        check_delta(delta)?;
        if window == 0 {
            return Err(invalid("window must be positive"));
        }
        let r = window_repetitions(&measure, n, window, delta);
        Self::with_repetitions(measure, window, r, seed)
    }

    pub fn with_repetitions(measure: Measure, window: u64, r: usize, seed: u64) -> Result<Self> {
        if window == 0 || r == 0 {
            return Err(invalid("window and repetitions must be positive"));
        }
        let Some(q) = measure.zeta() else {
            return Err(Error::Unsupported(format!("{} has no static increment bound; use SwLpSampler", measure.label())));
        };
        Ok(Self {
            measure,
            zeta: Zeta::Fixed(q),
            window,
            r,
            seed,
            counter: Counter::StrictlyAfter,
            rule: Rule::Forward,
            t: 0,
            banks: VecDeque::with_capacity(2),
            draw_rng: substream(seed, DRAW_STREAM),
        })
    }

    /// Counter and acceptance conventions; only for mutation testing.
    pub fn with_convention(mut self, counter: Counter, rule: Rule) -> Self {
        self.counter = counter;
        self.rule = rule;
        self
    }

    pub fn window(&self) -> u64 {
        self.window
    }

    pub fn repetitions(&self) -> usize {
        self.r
    }

    pub fn time(&self) -> u64 {
        self.t
    }

    pub fn window_start(&self) -> u64 {
        (self.t + 1).saturating_sub(self.window).max(1)
    }

    pub fn banks(&self) -> impl Iterator<Item = &SamplerBank> {
        self.banks.iter()
    }

    pub fn update(&mut self, coord: u64) {
        if self.t % self.window == 0 {
            let start = self.t + 1;
            let bank = SamplerBank::starting_at(self.r, mix(self.seed, start), start).with_counter(self.counter);
            self.banks.push_back(bank);
            if self.banks.len() > 2 {
                self.banks.pop_front();
            }
        }
        self.t += 1;
        for b in &mut self.banks {
            b.update(coord);
        }
    }

    /// Newest bank whose first update is no later than the window start.
    pub fn active_bank(&self) -> Option<&SamplerBank> {
        let ws = self.window_start();
        self.banks.iter().rev().find(|b| b.start() <= ws)
    }

    /// Active units of the covering bank, by repetition index.
    pub fn active_units(&self) -> Vec<(usize, UnitView)> {
        let ws = self.window_start();
        let Some(bank) = self.active_bank() else { return Vec::new() };
        (0..bank.len()).filter_map(|u| bank.unit(u).filter(|v| v.time >= ws).map(|v| (u, v))).collect()
    }

    pub fn accepted(&mut self) -> Vec<(usize, u64)> {
        let mut out = Vec::new();
        for (u, v) in self.active_units() {
            let acc = Acceptance { measure: &self.measure, zeta: &self.zeta, c: v.count, rule: self.rule };
            if bernoulli(&mut self.draw_rng, &acc) {
                out.push((u, v.coord));
            }
        }
        out
    }

    pub fn draw(&mut self) -> SampleResult {
        if self.t == 0 {
            return SampleResult::bottom();
        }
        let acc = self.accepted();
        if acc.is_empty() {
            return SampleResult::fail();
        }
        let (u, coord) = acc[pick(&mut self.draw_rng, acc.len())];
        SampleResult::index(coord).with_repetition(u as u64)
    }
}

/// Per-suffix `F_p` estimator choice for [`SwLpSampler`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Estimator {
    /// Exact counts with a certified bound; `F` is never too small.
    #[default]
    Exact,
    /// `p`-stable sketch, `p` in `(1, 2]`.
    Stable,
}

/// `R = ceil(4 p 2^(p-1) W^(1-1/p) ln(1/delta))`.
pub fn sw_lp_repetitions(p: Exponent, window: u64, delta: f64) -> usize {
    let pf = p.as_f64();
    let r = 4.0 * pf * 2f64.powf(pf - 1.0) * (window as f64).powf(1.0 - 1.0 / pf) * (1.0 / delta).ln();
    (r.ceil() as usize).max(1)
}

/// `L_p` sampler over a sliding window, `p >= 1`.
#[derive(Clone, Debug)]
pub struct SwLpSampler {
    p: Exponent,
    measure: Measure,
    r: usize,
    seed: u64,
    hist: SmoothHistogram<SamplerBank>,
    draw_rng: Rng,
    degraded: u64,
}

impl SwLpSampler {
    pub fn new(p: Exponent, window: u64, delta: f64, seed: u64, estimator: Estimator) -> Result<Self> {
        check_delta(delta)?;
        Self::with_repetitions(p, window, sw_lp_repetitions(p, window, delta), seed, estimator)
    }

    pub fn with_repetitions(p: Exponent, window: u64, r: usize, seed: u64, estimator: Estimator) -> Result<Self> {
        if p.as_f64() < 1.0 {
            return Err(invalid("sliding-window L_p sampling needs p >= 1"));
        }
        if r == 0 {
            return Err(invalid("need at least one repetition"));
        }
        let proto = match estimator {
            Estimator::Exact => FpSketch::Exact(ExactFp::new(p)),
            Estimator::Stable => FpSketch::Stable(StableFp::new(p, mix(seed, 0x57ab))?),
        };
        Ok(Self {
            p,
            measure: Measure::lp(p),
            r,
            seed,
            hist: SmoothHistogram::new(p, window, proto)?,
            draw_rng: substream(seed, DRAW_STREAM),
            degraded: 0,
        })
    }

    pub fn repetitions(&self) -> usize {
        self.r
    }

    pub fn histogram(&self) -> &SmoothHistogram<SamplerBank> {
        &self.hist
    }

    /// Draws that ended in `Fail` because the estimate was too small.
    pub fn degraded(&self) -> u64 {
        self.degraded
    }

    pub fn update(&mut self, coord: u64) {
        let start = self.hist.time() + 1;
        let bank = SamplerBank::starting_at(self.r, mix(self.seed, start), start);
        self.hist.push(coord, bank, |b| b.update(coord));
    }

    /// `F` of the first suffix together with its bank.
    pub fn first(&self) -> Option<(BigRational, &SamplerBank)> {
        let f = self.hist.first_upper()?;
        Some((f, &self.hist.entries()[0].payload))
    }

    pub fn zeta(&self, f: BigRational) -> Zeta {
        Zeta::Lp { coef: self.p.as_rational(), z: f, p: self.p }
    }

    pub fn active_units(&self) -> Vec<(usize, UnitView)> {
        let ws = self.hist.window_start();
        let Some((_, bank)) = self.first() else { return Vec::new() };
        (0..bank.len()).filter_map(|u| bank.unit(u).filter(|v| v.time >= ws).map(|v| (u, v))).collect()
    }

    /// Acceptance trials for the active units; `DegradedEstimate` when some
    /// active counter exceeds `F`, where the acceptance ratio would leave `[0, 1]`.
    pub fn try_accepted(&mut self) -> Result<Vec<(usize, u64)>> {
        let Some((f, _)) = self.first() else { return Ok(Vec::new()) };
        let units = self.active_units();
        if units.iter().any(|(_, v)| big(v.count + 1) > f) {
            return Err(Error::DegradedEstimate);
        }
        let zeta = self.zeta(f);
        let mut out = Vec::new();
        for (u, v) in units {
            let acc = Acceptance { measure: &self.measure, zeta: &zeta, c: v.count, rule: Rule::Forward };
            if bernoulli(&mut self.draw_rng, &acc) {
                out.push((u, v.coord));
            }
        }
        Ok(out)
    }

    pub fn draw(&mut self) -> SampleResult {
        if self.hist.is_empty() {
            return SampleResult::bottom();
        }
        let acc = match self.try_accepted() {
            Ok(a) => a,
            Err(_) => {
                self.degraded += 1;
                return SampleResult::fail();
            }
        };
        if acc.is_empty() {
            return SampleResult::fail();
        }
        let (u, coord) = acc[pick(&mut self.draw_rng, acc.len())];
        SampleResult::index(coord).with_repetition(u as u64)
    }
}
