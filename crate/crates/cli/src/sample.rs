//! Sampling campaigns: N independent seeded runs of one sampler over a stream file.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use clap::ValueEnum;
use serde::Serialize;

use tps_core::error::{Error, Result};
use tps_core::f0::{f0_repetitions, tukey_repetitions, F0Bank, TukeySampler};
use tps_core::format::{Body, MatrixUpdate, StreamFile};
use tps_core::gsampler::{GSampler, GSamplerConfig};
use tps_core::matrix::{RowMeasure, RowSampler};
use tps_core::multipass::{multipass_draw, Gamma, MultipassConfig, Replay};
use tps_core::randomorder::RandomOrderSampler;
use tps_core::rng::mix;
use tps_core::sliding::{CheckpointedSampler, Estimator, SwLpSampler};
use tps_core::smallp::SmallPSampler;
use tps_core::{Exponent, Measure, Model, Outcome, SampleResult, Update};

use crate::output::{print_json, Table};
use crate::{Format, Mutant};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SamplerId {
    /// Insertion-only G-sampler.
    Gsampler,
    /// Sliding-window G-sampler (measures with a static increment bound).
    SwGsampler,
    /// Sliding-window L_p sampler.
    SwLp,
    /// Support (F0) sampler.
    F0,
    /// Tukey sampler built on F0 sampling.
    Tukey,
    /// Random-order L_p sampler, integer p >= 2.
    RandomOrder,
    /// Multi-pass sampler for strict-turnstile streams.
    Multipass,
    /// Perfect (not truly perfect) L_p sampler for p < 1.
    Smallp,
    /// Row sampler for matrix streams (`--measure l1|l2`).
    Matrix,
}

#[derive(clap::Args, Debug)]
pub struct SampleArgs {
    /// Stream file written by `tps generate` or by hand.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub sampler: SamplerId,
    /// lp, l1l2, fair, huber, tukey; l1 or l2 for the matrix sampler.
    #[arg(long, default_value = "lp")]
    pub measure: String,
    /// Exponent for L_p measures, e.g. 2, 3/2, 0.5.
    #[arg(long)]
    pub p: Option<String>,
    /// Threshold for fair, huber and tukey.
    #[arg(long)]
    pub tau: Option<String>,
    /// Target failure probability; sizes the repetition count.
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
    #[arg(long, default_value_t = 100)]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Window size; defaults to the stream header's W (or the stream length for random order).
    #[arg(long)]
    pub window: Option<u64>,
    /// Duplication factor D for the small-p sampler.
    #[arg(long, default_value_t = 256)]
    pub duplication: u64,
    /// Pass budget gamma for the multi-pass sampler (`ceil(1/gamma)` chain passes).
    #[arg(long, default_value = "1/2")]
    pub passes_gamma: String,
    /// Overrides the computed repetition count (instances for small-p).
    #[arg(long)]
    pub repetitions: Option<usize>,
    #[arg(long, value_enum)]
    pub mutant: Option<Mutant>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Clone, Debug, Serialize)]
pub struct SampleReport {
    pub sampler: String,
    pub measure: Option<String>,
    pub input: String,
    pub n: u64,
    pub model: Model,
    pub updates: usize,
    pub trials: u64,
    pub seed: u64,
    pub histogram: BTreeMap<u64, u64>,
    pub fail: u64,
    pub bottom: u64,
    pub errors: u64,
    pub fail_rate: f64,
    pub wall_seconds: f64,
    pub updates_per_sec: f64,
    pub warnings: Vec<String>,
    pub error_messages: Vec<String>,
}

/// A validated sampler ready to run trials.
enum Plan {
    G { cfg: GSamplerConfig, coords: Vec<u64> },
    SwG { measure: Measure, n: u64, w: u64, delta: f64, r: Option<usize>, mutant: Option<Mutant>, coords: Vec<u64> },
    SwLp { p: Exponent, w: u64, delta: f64, r: Option<usize>, coords: Vec<u64> },
    F0 { n: u64, r: usize, w: Option<u64>, coords: Vec<u64> },
    Tukey { measure: Measure, n: u64, r: usize, w: Option<u64>, coords: Vec<u64> },
    RandomOrder { p: u32, n: u64, w: u64, coords: Vec<u64> },
    Multipass { cfg: MultipassConfig, updates: Vec<Update> },
    SmallP { p: Exponent, d: u64, instances: usize, coords: Vec<u64> },
    Matrix { measure: RowMeasure, d: usize, delta: f64, r: Option<usize>, entries: Vec<MatrixUpdate> },
}

fn usage(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

fn unit_coords(file: &StreamFile, what: &str) -> Result<Vec<u64>> {
    file.coords().ok_or_else(|| usage(format!("{what} needs a unit-insertion vector stream")))
}

fn exponent(args: &SampleArgs, default: &str) -> Result<Exponent> {
    args.p.as_deref().unwrap_or(default).parse()
}

fn measure(args: &SampleArgs) -> Result<Measure> {
    Measure::parse(&args.measure, args.p.as_deref(), args.tau.as_deref())
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(usage("delta must lie in (0, 1)"))
    }
}

impl Plan {
    fn build(args: &SampleArgs, file: &StreamFile, warnings: &mut Vec<String>) -> Result<Plan> {
        check_delta(args.delta)?;
        let n = file.config.n;
        let header_w = file.config.window;
        if args.mutant.is_some() && !matches!(args.sampler, SamplerId::Gsampler | SamplerId::SwGsampler) {
            return Err(usage("--mutant applies to gsampler and sw-gsampler only"));
        }
        let plan = match args.sampler {
            SamplerId::Gsampler => {
                let coords = unit_coords(file, "gsampler")?;
                let (counter, rule) = crate::convention(args.mutant);
                let mut cfg = GSamplerConfig::new(measure(args)?, n, coords.len() as u64, args.delta, 0);
                cfg.repetitions = args.repetitions;
                cfg.counter = counter;
                cfg.rule = rule;
                Plan::G { cfg, coords }
            }
            SamplerId::SwGsampler => {
                let w = args.window.or(header_w).ok_or_else(|| usage("sw-gsampler needs --window or a W= header"))?;
                Plan::SwG { measure: measure(args)?, n, w, delta: args.delta, r: args.repetitions, mutant: args.mutant, coords: unit_coords(file, "sw-gsampler")? }
            }
            SamplerId::SwLp => {
                let w = args.window.or(header_w).ok_or_else(|| usage("sw-lp needs --window or a W= header"))?;
                Plan::SwLp { p: exponent(args, "2")?, w, delta: args.delta, r: args.repetitions, coords: unit_coords(file, "sw-lp")? }
            }
            SamplerId::F0 => {
                let r = args.repetitions.unwrap_or_else(|| f0_repetitions(n, args.delta));
                Plan::F0 { n, r, w: args.window.or(header_w), coords: unit_coords(file, "f0")? }
            }
            SamplerId::Tukey => {
                let m = Measure::parse("tukey", None, args.tau.as_deref())?;
                let r = match args.repetitions {
                    Some(r) => r,
                    None => tukey_repetitions(m, n, args.delta)?,
                };
                Plan::Tukey { measure: m, n, r, w: args.window.or(header_w), coords: unit_coords(file, "tukey")? }
            }
            SamplerId::RandomOrder => {
                let coords = unit_coords(file, "random-order")?;
                if file.config.model != Model::RandomOrder {
                    warnings.push(format!(
                        "precondition: random-order sampling assumes a uniformly shuffled stream, but the input model is {}",
                        file.config.model
                    ));
                }
                let p = exponent(args, "2")?;
                if !p.is_integer() {
                    return Err(usage("random-order sampling needs an integer p >= 2"));
                }
                let w = args.window.or(header_w).unwrap_or(coords.len() as u64);
                Plan::RandomOrder { p: p.num(), n, w, coords }
            }
            SamplerId::Multipass => {
                let updates = file.updates().ok_or_else(|| usage("multipass needs a vector stream"))?.to_vec();
                let gamma = Gamma::parse(&args.passes_gamma)?;
                let cfg = MultipassConfig { measure: measure(args)?, n, gamma, delta: args.delta, seed: 0, samples: args.repetitions };
                Plan::Multipass { cfg, updates }
            }
            SamplerId::Smallp => {
                let p = exponent(args, "1/2")?;
                Plan::SmallP { p, d: args.duplication, instances: args.repetitions.unwrap_or(8), coords: unit_coords(file, "smallp")? }
            }
            SamplerId::Matrix => {
                let Body::Matrix { d, entries } = &file.body else { return Err(usage("the matrix sampler needs a stream with a d= header")) };
                let m = RowMeasure::parse(&args.measure)?;
                Plan::Matrix { measure: m, d: *d as usize, delta: args.delta, r: args.repetitions, entries: entries.clone() }
            }
        };
        // constructing one instance checks the remaining preconditions
        plan.instance_check()?;
        Ok(plan)
    }

    fn instance_check(&self) -> Result<()> {
        match self {
            Plan::G { cfg, .. } => GSampler::new(GSamplerConfig { seed: 0, ..cfg.clone() }).map(drop),
            Plan::SwG { measure, n, w, delta, r, .. } => sw_g(measure, *n, *w, *delta, *r, 0).map(drop),
            Plan::SwLp { p, w, delta, r, .. } => sw_lp(*p, *w, *delta, *r, 0).map(drop),
            Plan::F0 { n, w, .. } => f0(*n, 1, *w, 0).map(drop),
            Plan::Tukey { measure, n, w, .. } => tukey(measure, *n, 1, *w, 0).map(drop),
            Plan::RandomOrder { p, n, w, .. } => RandomOrderSampler::new(*p, *n, *w, 0).map(drop),
            Plan::Multipass { cfg, .. } => {
                if cfg.measure.zeta().is_none() && !matches!(cfg.measure, Measure::Lp { .. }) {
                    return Err(Error::Unsupported(format!("{} has no increment bound", cfg.measure.label())));
                }
                check_delta(cfg.delta)
            }
            Plan::SmallP { p, d, instances, .. } => SmallPSampler::new(*p, *d, *instances, 0).map(drop),
            Plan::Matrix { measure, d, delta, r, .. } => row(*measure, *d, *delta, *r, 0).map(drop),
        }
    }

    fn updates(&self) -> usize {
        match self {
            Plan::G { coords, .. }
            | Plan::SwG { coords, .. }
            | Plan::SwLp { coords, .. }
            | Plan::F0 { coords, .. }
            | Plan::Tukey { coords, .. }
            | Plan::RandomOrder { coords, .. }
            | Plan::SmallP { coords, .. } => coords.len(),
            Plan::Multipass { updates, .. } => updates.len(),
            Plan::Matrix { entries, .. } => entries.len(),
        }
    }

    fn trial(&self, seed: u64) -> Result<SampleResult> {
        match self {
            Plan::G { cfg, coords } => {
                let mut s = GSampler::new(GSamplerConfig { seed, ..cfg.clone() })?;
                coords.iter().for_each(|&c| s.update(c));
                Ok(s.draw())
            }
            Plan::SwG { measure, n, w, delta, r, mutant, coords } => {
                let (counter, rule) = crate::convention(*mutant);
                let mut s = sw_g(measure, *n, *w, *delta, *r, seed)?.with_convention(counter, rule);
                coords.iter().for_each(|&c| s.update(c));
                Ok(s.draw())
            }
            Plan::SwLp { p, w, delta, r, coords } => {
                let mut s = sw_lp(*p, *w, *delta, *r, seed)?;
                coords.iter().for_each(|&c| s.update(c));
                let out = s.draw();
                if s.degraded() > 0 {
                    return Err(Error::DegradedEstimate);
                }
                Ok(out)
            }
            Plan::F0 { n, r, w, coords } => {
                let mut s = f0(*n, *r, *w, seed)?;
                coords.iter().for_each(|&c| s.update(c));
                Ok(s.draw())
            }
            Plan::Tukey { measure, n, r, w, coords } => {
                let mut s = tukey(measure, *n, *r, *w, seed)?;
                coords.iter().for_each(|&c| s.update(c));
                Ok(s.draw())
            }
            Plan::RandomOrder { p, n, w, coords } => {
                let mut s = RandomOrderSampler::new(*p, *n, *w, seed)?;
                coords.iter().for_each(|&c| s.update(c));
                Ok(s.draw())
            }
            Plan::Multipass { cfg, updates } => {
                let mut replay = Replay::new(updates.as_slice());
                Ok(multipass_draw(&mut replay, &MultipassConfig { seed, ..cfg.clone() })?.result)
            }
            Plan::SmallP { p, d, instances, coords } => {
                let mut s = SmallPSampler::new(*p, *d, *instances, seed)?;
                coords.iter().for_each(|&c| s.update(c));
                Ok(s.draw())
            }
            Plan::Matrix { measure, d, delta, r, entries } => {
                let mut s = row(*measure, *d, *delta, *r, seed)?;
                entries.iter().for_each(|e| s.update(e.row, e.col));
                Ok(s.draw())
            }
        }
    }

    fn measure_label(&self) -> Option<String> {
        match self {
            Plan::G { cfg, .. } => Some(cfg.measure.label()),
            Plan::SwG { measure, .. } | Plan::Tukey { measure, .. } => Some(measure.label()),
            Plan::SwLp { p, .. } | Plan::SmallP { p, .. } => Some(Measure::lp(*p).label()),
            Plan::RandomOrder { p, .. } => Some(Measure::lp(Exponent::integer(*p)).label()),
            Plan::Multipass { cfg, .. } => Some(cfg.measure.label()),
            Plan::Matrix { measure, .. } => Some(measure.label().to_string()),
            Plan::F0 { .. } => None,
        }
    }
}

fn sw_g(measure: &Measure, n: u64, w: u64, delta: f64, r: Option<usize>, seed: u64) -> Result<CheckpointedSampler> {
    match r {
        Some(r) => CheckpointedSampler::with_repetitions(measure.clone(), w, r, seed),
        None => CheckpointedSampler::new(measure.clone(), n, w, delta, seed),
    }
}

fn sw_lp(p: Exponent, w: u64, delta: f64, r: Option<usize>, seed: u64) -> Result<SwLpSampler> {
    match r {
        Some(r) => SwLpSampler::with_repetitions(p, w, r, seed, Estimator::Exact),
        None => SwLpSampler::new(p, w, delta, seed, Estimator::Exact),
    }
}

fn f0(n: u64, r: usize, w: Option<u64>, seed: u64) -> Result<F0Bank> {
    match w {
        Some(w) => F0Bank::sliding(n, r, w, 1, seed),
        None => F0Bank::new(n, r, seed),
    }
}

fn tukey(measure: &Measure, n: u64, r: usize, w: Option<u64>, seed: u64) -> Result<TukeySampler> {
    match w {
        Some(w) => TukeySampler::sliding(measure.clone(), n, r, w, seed),
        None => TukeySampler::new(measure.clone(), n, r, seed),
    }
}

fn row(measure: RowMeasure, d: usize, delta: f64, r: Option<usize>, seed: u64) -> Result<RowSampler> {
    match r {
        Some(r) => RowSampler::with_repetitions(measure, d, r, seed),
        None => RowSampler::new(measure, d, delta, seed),
    }
}

#[derive(Default)]
struct Tally {
    histogram: BTreeMap<u64, u64>,
    fail: u64,
    bottom: u64,
    errors: u64,
    messages: BTreeMap<u64, String>,
}

impl Tally {
    fn merge(&mut self, other: Tally) {
        for (k, v) in other.histogram {
            *self.histogram.entry(k).or_insert(0) += v;
        }
        self.fail += other.fail;
        self.bottom += other.bottom;
        self.errors += other.errors;
        self.messages.extend(other.messages);
    }
}

const MAX_MESSAGES: usize = 5;

/// Trials `k, k + stride, ..` below `trials`; trial `t` uses seed `mix(seed, t)`.
fn run_slice(plan: &Plan, seed: u64, trials: u64, k: u64, stride: u64) -> Tally {
    let mut tally = Tally::default();
    let mut t = k;
    while t < trials {
        match plan.trial(mix(seed, t)) {
            Ok(r) => match r.outcome {
                Outcome::Index(i) => *tally.histogram.entry(i).or_insert(0) += 1,
                Outcome::Fail => tally.fail += 1,
                Outcome::Bottom => tally.bottom += 1,
            },
            Err(e) => {
                tally.errors += 1;
                if tally.messages.len() < MAX_MESSAGES {
                    tally.messages.insert(t, format!("trial {t}: {e}"));
                }
            }
        }
        t += stride;
    }
    tally
}

pub fn campaign(args: &SampleArgs) -> Result<SampleReport> {
    let file = StreamFile::read(&args.input)?;
    file.validate()?;
    let mut warnings = Vec::new();
    let plan = Plan::build(args, &file, &mut warnings)?;
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get()).min(args.trials.max(1) as usize) as u64;
    let start = Instant::now();
    let mut tally = Tally::default();
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..threads).map(|k| {
            let plan = &plan;
            s.spawn(move || run_slice(plan, args.seed, args.trials, k, threads))
        }).collect();
        for h in handles {
            tally.merge(h.join().expect("trial thread panicked"));
        }
    });
    let wall = start.elapsed().as_secs_f64();
    let processed = plan.updates() as f64 * args.trials as f64;
    Ok(SampleReport {
        sampler: args.sampler.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default(),
        measure: plan.measure_label(),
        input: args.input.display().to_string(),
        n: file.config.n,
        model: file.config.model,
        updates: plan.updates(),
        trials: args.trials,
        seed: args.seed,
        fail_rate: if args.trials == 0 { 0.0 } else { tally.fail as f64 / args.trials as f64 },
        histogram: tally.histogram,
        fail: tally.fail,
        bottom: tally.bottom,
        errors: tally.errors,
        wall_seconds: wall,
        updates_per_sec: if wall > 0.0 { processed / wall } else { 0.0 },
        warnings,
        error_messages: tally.messages.into_values().take(MAX_MESSAGES).collect(),
    })
}

pub fn run(args: &SampleArgs) -> Result<()> {
    let report = campaign(args)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    match args.format {
        Format::Json => print_json(&report),
        Format::Table => {
            let mut head = Table::new(["field", "value"]);
            head.row(["sampler".to_string(), report.sampler.clone()]);
            if let Some(m) = &report.measure {
                head.row(["measure".to_string(), m.clone()]);
            }
            head.row(["trials".to_string(), report.trials.to_string()]);
            head.row(["fail".to_string(), report.fail.to_string()]);
            head.row(["bottom".to_string(), report.bottom.to_string()]);
            head.row(["errors".to_string(), report.errors.to_string()]);
            head.row(["fail rate".to_string(), format!("{:.4}", report.fail_rate)]);
            head.row(["wall seconds".to_string(), format!("{:.3}", report.wall_seconds)]);
            head.row(["updates/sec".to_string(), format!("{:.3e}", report.updates_per_sec)]);
            print!("{}", head.render());
            println!();
            let total: u64 = report.histogram.values().sum();
            let mut t = Table::new(["index", "count", "share"]);
            for (i, c) in &report.histogram {
                t.row([i.to_string(), c.to_string(), format!("{:.4}", *c as f64 / total as f64)]);
            }
            print!("{}", t.render());
        }
    }
    Ok(())
}
