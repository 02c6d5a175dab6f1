//! Smooth histogram for `L_p` over a sliding window, `p >= 1`.
//!
//! Entries are suffix estimators started at increasing timestamps. Entry `i`
//! is dropped when `F_p(i-1) <= 2 F_p(i+1)`, i.e. the `L_p` ratio is at most
//! `2^(1/p)`. Writing `A` for the older suffix, `B` for the newer one and `C`
//! for later updates, `L_p(A u C) <= L_p(A \ B) + L_p(B u C)` and
//! `L_p(A \ B)^p <= L_p(A)^p - L_p(B)^p <= L_p(B)^p`, so the first suffix
//! stays within a factor 2 of the suffix that starts inside the window.

use std::collections::HashMap;

use num_rational::BigRational;
use rand::Rng as _;
use rand_distr::{Distribution, Exp1};

use crate::error::{invalid, Error, Result};
use crate::exact::interval::{ceil_dyadic, rational_from_f64};
use crate::measure::Exponent;
use crate::rng::{mix, substream};

/// Exact `F_p` of a suffix with a certified floating-point error bound.
#[derive(Clone, Debug)]
pub struct ExactFp {
    p: f64,
    counts: HashMap<u64, u64>,
    sum: f64,
    err: f64,
}

impl ExactFp {
    pub fn new(p: Exponent) -> Self {
        Self { p: p.as_f64(), counts: HashMap::new(), sum: 0.0, err: 0.0 }
    }

    pub fn update(&mut self, coord: u64) {
        let c = self.counts.entry(coord).or_insert(0);
        *c += 1;
        let hi = (*c as f64).powf(self.p);
        let lo = ((*c - 1) as f64).powf(self.p);
        self.sum += hi - lo;
        self.err += hi * 8.0 * f64::EPSILON + self.sum * 2.0 * f64::EPSILON;
    }

    pub fn fp_range(&self) -> (f64, f64) {
        ((self.sum - self.err).max(0.0), self.sum + self.err)
    }

    pub fn max_count(&self) -> u64 {
        self.counts.values().copied().max().unwrap_or(0)
    }
}

/// Number of projections in [`StableFp`].
pub const STABLE_COUNTERS: usize = 160;

/// Linear sketch with `p`-stable projections for `p` in `(1, 2]`; the `L_p`
/// estimate is the median absolute projection over the median of `|S_p|`.
/// Projections are derived from `(seed, counter, coordinate)`, so all suffix
/// instances share them.
#[derive(Clone, Debug)]
pub struct StableFp {
    p: f64,
    seed: u64,
    y: Vec<f64>,
    scale: f64,
}

fn unit_open(h: u64) -> f64 {
    ((h >> 11) as f64 + 0.5) / (1u64 << 53) as f64
}

/// Chambers-Mallows-Stuck draw of a symmetric `p`-stable variable.
fn stable_draw(p: f64, u: f64, e: f64) -> f64 {
    let theta = std::f64::consts::PI * (u - 0.5);
    if (p - 2.0).abs() < 1e-12 {
        // Gaussian with variance 2
        return 2.0 * theta.sin() * e.sqrt();
    }
    let a = (p * theta).sin() / theta.cos().powf(1.0 / p);
    let b = (((1.0 - p) * theta).cos() / e).powf((1.0 - p) / p);
    a * b
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    v[v.len() / 2]
}

/// `median(|S_p|)` by seeded simulation.
pub fn stable_median(p: f64) -> f64 {
    let mut rng = substream(0x57ab1e, (p * 1000.0) as u64);
    let mut xs: Vec<f64> = (0..200_001)
        .map(|_| {
            let u: f64 = rng.random();
            let e: f64 = Exp1.sample(&mut rng);
            stable_draw(p, u, e).abs()
        })
        .collect();
    median(&mut xs)
}

impl StableFp {
    pub fn new(p: Exponent, seed: u64) -> Result<Self> {
        let pf = p.as_f64();
        if !(pf > 1.0 && pf <= 2.0) {
            return Err(invalid("stable sketch needs p in (1, 2]"));
        }
        Ok(Self { p: pf, seed, y: vec![0.0; STABLE_COUNTERS], scale: stable_median(pf) })
    }

    fn projection(&self, j: usize, coord: u64) -> f64 {
        let h = mix(mix(self.seed, j as u64), coord);
        let u = unit_open(mix(h, 1));
        let e = -unit_open(mix(h, 2)).ln();
        stable_draw(self.p, u, e)
    }

    pub fn update(&mut self, coord: u64) {
        for j in 0..self.y.len() {
            self.y[j] += self.projection(j, coord);
        }
    }

    pub fn lp_estimate(&self) -> f64 {
        let mut a: Vec<f64> = self.y.iter().map(|v| v.abs()).collect();
        median(&mut a) / self.scale
    }
}

/// Per-suffix `F_p` estimator.
#[derive(Clone, Debug)]
pub enum FpSketch {
    Exact(ExactFp),
    Stable(StableFp),
}

/// Slack on stable estimates (relative accuracy target of the sketch).
const STABLE_SLACK: f64 = 1.25;

impl FpSketch {
    pub fn update(&mut self, coord: u64) {
        match self {
            FpSketch::Exact(e) => e.update(coord),
            FpSketch::Stable(s) => s.update(coord),
        }
    }

    /// Bounds on `F_p`; certified for the exact estimator.
    pub fn fp_range(&self) -> (f64, f64) {
        match self {
            FpSketch::Exact(e) => e.fp_range(),
            FpSketch::Stable(s) => {
                let v = s.lp_estimate().powf(s.p);
                (v, v)
            }
        }
    }

    /// Upper bound on `L_p`; for the stable sketch this holds with high probability only.
    pub fn lp_upper(&self, p: f64) -> f64 {
        match self {
            FpSketch::Exact(e) => e.fp_range().1.powf(1.0 / p) * (1.0 + 1e-12),
            FpSketch::Stable(s) => s.lp_estimate() * STABLE_SLACK,
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, FpSketch::Exact(_))
    }
}

/// One histogram timestamp with its estimator and an attached payload.
#[derive(Clone, Debug)]
pub struct Entry<P> {
    /// First update ingested.
    pub start: u64,
    pub est: FpSketch,
    pub payload: P,
}

#[derive(Clone, Debug)]
pub struct SmoothHistogram<P = ()> {
    p: Exponent,
    window: u64,
    t: u64,
    proto: FpSketch,
    entries: Vec<Entry<P>>,
}

impl SmoothHistogram<()> {
    pub fn exact(p: Exponent, window: u64) -> Result<Self> {
        Self::new(p, window, FpSketch::Exact(ExactFp::new(p)))
    }

    pub fn update(&mut self, coord: u64) {
        self.push(coord, (), |_| {});
    }
}

impl<P> SmoothHistogram<P> {
    pub fn new(p: Exponent, window: u64, proto: FpSketch) -> Result<Self> {
        if p.as_f64() < 1.0 {
            return Err(invalid("smooth histogram needs p >= 1"));
        }
        if window == 0 {
            return Err(invalid("window must be positive"));
        }
        Ok(Self { p, window, t: 0, proto, entries: Vec::new() })
    }

    pub fn time(&self) -> u64 {
        self.t
    }

    pub fn window(&self) -> u64 {
        self.window
    }

    /// First active timestamp.
    pub fn window_start(&self) -> u64 {
        (self.t + 1).saturating_sub(self.window).max(1)
    }

    pub fn entries(&self) -> &[Entry<P>] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Ingests one update: opens a suffix at this update, feeds every suffix
    /// (estimator and payload), then prunes and expires.
    pub fn push(&mut self, coord: u64, payload: P, mut feed: impl FnMut(&mut P)) {
        self.t += 1;
        self.entries.push(Entry { start: self.t, est: self.proto.clone(), payload });
        for e in &mut self.entries {
            e.est.update(coord);
            feed(&mut e.payload);
        }
        self.prune();
        let ws = self.window_start();
        while self.entries.len() >= 2 && self.entries[1].start <= ws {
            self.entries.remove(0);
        }
    }

    fn prune(&mut self) {
        let mut i = 1;
        while i + 1 < self.entries.len() {
            let older = self.entries[i - 1].est.fp_range().1;
            let newer = self.entries[i + 1].est.fp_range().0;
            if older <= 2.0 * newer {
                self.entries.remove(i);
            } else {
                i += 1;
            }
        }
    }

    /// Rational upper bound on `L_p` of the first suffix, which contains the window.
    pub fn first_upper(&self) -> Option<BigRational> {
        let e = self.entries.first()?;
        let hi = e.est.lp_upper(self.p.as_f64());
        Some(ceil_dyadic(&rational_from_f64(hi), 32))
    }

    /// `F` with `F <= L_p(window) <= 2F` (exact estimator: always).
    pub fn estimate_lp(&self) -> Result<BigRational> {
        let upper = self.first_upper().ok_or_else(|| invalid("window is empty"))?;
        if !upper.numer().sign().eq(&num_bigint::Sign::Plus) {
            return Err(Error::DegradedEstimate);
        }
        Ok(upper / BigRational::from_integer(2.into()))
    }
}
