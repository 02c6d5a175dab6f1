//! Truly perfect G-sampler for insertion-only streams.
//!
//! Every repetition holds a uniformly random stream position `j` together
//! with the number `c` of later occurrences of `u_j`, and accepts with
//! probability `(G(c+1) - G(c)) / zeta`. Summed over the occurrences of `i`
//! the acceptance masses telescope to `G(f_i) / (zeta m)`.

use num_traits::ToPrimitive;
use num_rational::BigRational;


use crate::error::{invalid, Result};
use crate::exact::{bernoulli, F64Range, Interval, Probability, Symbolic};
use crate::heavyhitters::MGSummary;
use crate::measure::{Exponent, Measure};
use crate::reservoir::{pick, Counter, SamplerBank};
use crate::rng::{mix, substream, Rng};
use crate::stream::SampleResult;

/// Which difference of `G` a repetition accepts with.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Rule {
    /// `G(c+1) - G(c)`
    #[default]
    Forward,
    /// `G(c) - G(c-1)`, zero when `c = 0`
    Backward,
}

/// The increment bound `zeta`.
#[derive(Clone, Debug, PartialEq)]
pub enum Zeta {
    Fixed(BigRational),
    /// `coef * z^(p-1)`: `2 Z^(p-1)` for insertion-only `L_p`, `p F^(p-1)` on windows.
    Lp { coef: BigRational, z: BigRational, p: Exponent },
}

impl Zeta {
    pub fn for_measure(measure: &Measure, z: Option<BigRational>) -> Self {
        match (measure.zeta(), measure) {
            (Some(q), _) => Zeta::Fixed(q),
            (None, Measure::Lp { p }) => {
                Zeta::Lp { coef: BigRational::from_integer(2.into()), z: z.expect("L_p with p > 1 needs Z"), p: *p }
            }
            _ => unreachable!("every other measure has a static zeta"),
        }
    }

    pub fn range(&self) -> F64Range {
        match self {
            Zeta::Fixed(q) => F64Range::from_rational(q),
            Zeta::Lp { coef, z, p } => F64Range::from_rational(z).powf(p.as_f64() - 1.0).mul_nonneg(F64Range::from_rational(coef)),
        }
    }

    pub fn interval(&self, bits: u32) -> Interval {
        match self {
            Zeta::Fixed(q) => Interval::point(q.clone()),
            Zeta::Lp { coef, z, p } => {
                let extra = coef.to_f64().unwrap().log2().max(0.0).ceil() as u32;
                Interval::point(z.clone()).pow_ratio(p.num() - p.den(), p.den(), bits + extra + 2).scale(coef)
            }
        }
    }

    pub fn symbolic(&self) -> Option<Symbolic> {
        match self {
            Zeta::Fixed(q) => Some(Symbolic::rational(q.clone())),
            Zeta::Lp { coef, z, p } => {
                let base = z.pow((p.num() - p.den()) as i32);
                let root = match p.den() {
                    1 => Symbolic::rational(base),
                    2 => Symbolic::sqrt(&base),
                    _ => return None,
                };
                Some(root.scale(coef))
            }
        }
    }

    pub fn to_f64(&self) -> f64 {
        self.range().mid()
    }
}

/// Acceptance probability of a repetition whose counter reads `c`.
pub struct Acceptance<'a> {
    pub measure: &'a Measure,
    pub zeta: &'a Zeta,
    pub c: u64,
    pub rule: Rule,
}

impl Acceptance<'_> {
    /// Argument `x` of the increment `G(x+1) - G(x)`, or `None` for a zero probability.
    fn step(&self) -> Option<u64> {
        match self.rule {
            Rule::Forward => Some(self.c),
            Rule::Backward => self.c.checked_sub(1),
        }
    }

    /// Exact value, when the measure and `zeta` are symbolically representable.
    pub fn symbolic(&self) -> Option<Symbolic> {
        let Some(x) = self.step() else { return Some(Symbolic::zero()) };
        let d = self.measure.g_symbolic(x + 1)? - self.measure.g_symbolic(x)?;
        Some(&d * &self.zeta.symbolic()?.recip()?)
    }
}

impl Probability for Acceptance<'_> {
    fn enclose_f64(&self) -> F64Range {
        match self.step() {
            None => F64Range::exact(0.0),
            Some(x) => self.measure.increment_range(x).div_pos(self.zeta.range()),
        }
    }

    fn enclose(&self, bits: u32) -> Interval {
        match self.step() {
            None => Interval::from_int(0),
            Some(x) => self.measure.increment_interval(x, bits + 8).div_pos(&self.zeta.interval(bits + 8)).round_out(bits + 4),
        }
    }
}

#[derive(Clone, Debug)]
pub struct GSamplerConfig {
    pub measure: Measure,
    /// Universe size (sizes the Misra-Gries summary for `L_p`, `p > 1`).
    pub n: u64,
    /// Stream length used to size the repetition count.
    pub expected_len: u64,
    pub delta: f64,
    pub seed: u64,
    /// Overrides the computed repetition count.
    pub repetitions: Option<usize>,
    pub counter: Counter,
    pub rule: Rule,
}

impl GSamplerConfig {
    pub fn new(measure: Measure, n: u64, expected_len: u64, delta: f64, seed: u64) -> Self {
        Self { measure, n, expected_len, delta, seed, repetitions: None, counter: Counter::StrictlyAfter, rule: Rule::Forward }
    }

    pub fn with_repetitions(mut self, r: usize) -> Self {
        self.repetitions = Some(r);
        self
    }
}

/// Repetitions needed so that all of them reject with probability at most `delta`:
/// `R = ceil(4 (zeta m / F_G lower bound) ln(1/delta))`.
pub fn repetitions(measure: &Measure, n: u64, m: u64, delta: f64) -> usize {
    if let Measure::Lp { p } = measure {
        if *p == Exponent::integer(1) {
            return 1;
        }
        if !p.at_most_one() {
            // zeta m / F_p <= 4 n^(1 - 1/p)
            let ratio = 4.0 * (n as f64).powf(1.0 - 1.0 / p.as_f64());
            return (4.0 * ratio * (1.0 / delta).ln()).ceil().max(1.0) as usize;
        }
    }
    let m = m.max(1);
    let zeta = measure.zeta().unwrap().to_f64().unwrap();
    let ratio = zeta * m as f64 / measure.fg_lower_bound(m);
    (4.0 * ratio * (1.0 / delta).ln()).ceil().max(1.0) as usize
}

pub(crate) fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid("delta must lie in (0, 1)"));
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct GSampler {
    measure: Measure,
    rule: Rule,
    bank: SamplerBank,
    mg: Option<MGSummary>,
    draw_rng: Rng,
}

const DRAW_STREAM: u64 = 0xd7a3;

impl GSampler {
    pub fn new(cfg: GSamplerConfig) -> Result<Self> {
        check_delta(cfg.delta)?;
        if cfg.n == 0 {
            return Err(invalid("universe size must be positive"));
        }
        let r = match cfg.repetitions {
            Some(0) => return Err(invalid("need at least one repetition")),
            Some(r) => r,
            None => repetitions(&cfg.measure, cfg.n, cfg.expected_len, cfg.delta),
        };
        let mg = match cfg.measure {
            Measure::Lp { p } if !p.at_most_one() => Some(MGSummary::for_lp(cfg.n, p)),
            _ => None,
        };
        Ok(Self {
            measure: cfg.measure,
            rule: cfg.rule,
            bank: SamplerBank::new(r, mix(cfg.seed, 1)).with_counter(cfg.counter),
            mg,
            draw_rng: substream(cfg.seed, DRAW_STREAM),
        })
    }

    /// `L_p` sampler for `p` in `(0, 2]`.
    pub fn lp_sampler(p: Exponent, n: u64, m: u64, delta: f64, seed: u64) -> Result<Self> {
        if p.as_f64() > 2.0 {
            return Err(invalid("insertion-only L_p sampling supports p in (0, 2]"));
        }
        Self::new(GSamplerConfig::new(Measure::lp(p), n, m, delta, seed))
    }

    pub fn measure(&self) -> &Measure {
        &self.measure
    }

    pub fn repetitions(&self) -> usize {
        self.bank.len()
    }

    pub fn bank(&self) -> &SamplerBank {
        &self.bank
    }

    pub fn update(&mut self, coord: u64) {
        self.bank.update(coord);
        if let Some(mg) = &mut self.mg {
            mg.update(coord);
        }
    }

    pub fn zeta(&self) -> Zeta {
        Zeta::for_measure(&self.measure, self.mg.as_ref().map(|mg| mg.z_bound()))
    }

    /// Runs every repetition's acceptance trial; returns `(repetition, coordinate)`
    /// for each acceptance. Repetitions are independent, so each returned
    /// coordinate is an independent draw from `G(f_i) / F_G`.
    pub fn accepted(&mut self) -> Vec<(usize, u64)> {
        let zeta = self.zeta();
        let mut out = Vec::new();
        for u in 0..self.bank.len() {
            let Some(v) = self.bank.unit(u) else { continue };
            let acc = Acceptance { measure: &self.measure, zeta: &zeta, c: v.count, rule: self.rule };
            if bernoulli(&mut self.draw_rng, &acc) {
                out.push((u, v.coord));
            }
        }
        out
    }

    /// One sample: uniform among accepting repetitions, `Fail` if none accept.
    pub fn draw(&mut self) -> SampleResult {
        if self.bank.seen() == 0 {
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

/// Exact single-repetition success probability `F_G / (zeta m)` in `f64`.
pub fn success_probability(measure: &Measure, zeta: &Zeta, freqs: &[u64]) -> f64 {
    let m: u64 = freqs.iter().sum();
    let fg: f64 = freqs.iter().map(|&f| measure.g_f64(f)).sum();
    fg / (zeta.to_f64() * m as f64)
}
