//! Verification campaigns driven by the checked-in battery manifest.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use tps_core::error::{Error, Result};
use tps_core::f0::{F0Bank, TukeySampler};
use tps_core::generate::{generate, Kind};
use tps_core::gsampler::{GSampler, GSamplerConfig};
use tps_core::matrix::RowMeasure;
use tps_core::measure::Exponent;
use tps_core::multipass::Gamma;
use tps_core::oracle::battery::{
    insertion_battery, matrix_dfs_battery, matrix_unit_battery, multipass_battery, random_order_battery, sw_lp_battery,
    window_battery, BatteryReport,
};
use tps_core::oracle::{gof_test, target_distribution, Convention};
use tps_core::randomorder::RandomOrderSampler;
use tps_core::rng::mix;
use tps_core::Measure;

use crate::output::{print_json, Table};
use crate::{Format, Mutant};

pub const MANIFEST: &str = include_str!("../batteries.toml");

#[derive(clap::Args, Debug)]
pub struct VerifyArgs {
    /// Battery ids or group names; the `quick` group when omitted.
    pub batteries: Vec<String>,
    /// List groups and batteries, then exit.
    #[arg(long)]
    pub list: bool,
    /// Run with a deliberately wrong acceptance convention.
    #[arg(long, value_enum)]
    pub mutant: Option<Mutant>,
    /// Replace the stream kind of Monte Carlo batteries.
    #[arg(long)]
    pub stream: Option<String>,
    /// Override the seed of Monte Carlo batteries.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Clone, Debug, Deserialize)]
pub struct Manifest {
    pub groups: BTreeMap<String, Vec<String>>,
    pub battery: Vec<Battery>,
}

#[derive(Clone, Debug, Deserialize)]
pub struct Battery {
    pub id: String,
    #[serde(flatten)]
    pub spec: Spec,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Spec {
    Insertion { measures: Vec<String>, n: u64, max_len: usize },
    Window { measures: Vec<String>, n: u64, max_w: u64, max_len: usize },
    SwLp { p: Vec<String>, n: u64, max_w: u64, max_len: usize },
    MatrixUnit { measure: String, n: u64, d: usize, max_len: usize },
    MatrixDfs { measure: String, n: u64, d: usize, max_len: usize },
    RandomOrder { p: Vec<u32>, n: usize, max_w: u64 },
    Multipass { measures: Vec<String>, max_n: usize, max_entry: u64, gammas: Vec<String> },
    MonteCarlo(MonteCarlo),
}

#[derive(Clone, Debug, Deserialize)]
pub struct MonteCarlo {
    pub sampler: String,
    #[serde(default)]
    pub measure: Option<String>,
    pub stream: String,
    pub n: u64,
    pub m: u64,
    pub draws: usize,
    pub seed: u64,
    pub pvalue_floor: f64,
    pub max_tv: f64,
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Outcome {
    Exact(BatteryReport),
    MonteCarlo { sampler: String, measure: String, samples: u64, pvalue: f64, tv: f64, pvalue_floor: f64, max_tv: f64, seconds: f64 },
}

#[derive(Clone, Debug, Serialize)]
pub struct Entry {
    pub id: String,
    pub passed: bool,
    #[serde(flatten)]
    pub outcome: Outcome,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub batteries: Vec<String>,
    pub mutant: Option<String>,
    pub passed: bool,
    pub results: Vec<Entry>,
    pub warnings: Vec<String>,
}

pub fn manifest() -> Manifest {
    toml::from_str(MANIFEST).expect("built-in manifest parses")
}

/// `name` or `name:param`; the parameter is `p` for `lp` and `tau` otherwise.
pub fn parse_measure(s: &str) -> Result<Measure> {
    let (name, param) = match s.split_once(':') {
        Some((a, b)) => (a, Some(b)),
        None => (s, None),
    };
    if name == "lp" {
        Measure::parse(name, param, None)
    } else {
        Measure::parse(name, None, param)
    }
}

fn measures(v: &[String]) -> Result<Vec<Measure>> {
    v.iter().map(|s| parse_measure(s)).collect()
}

impl Manifest {
    /// Expands group names into battery ids, keeping first occurrences.
    pub fn resolve(&self, names: &[String]) -> Result<Vec<&Battery>> {
        let names: Vec<String> = if names.is_empty() { vec!["quick".into()] } else { names.to_vec() };
        let mut out: Vec<&Battery> = Vec::new();
        for name in &names {
            let ids: Vec<&String> = match self.groups.get(name) {
                Some(g) => g.iter().collect(),
                None => vec![name],
            };
            for id in ids {
                let b = self.battery.iter().find(|b| &b.id == id).ok_or_else(|| Error::InvalidParameter(format!("unknown battery `{id}`")))?;
                if !out.iter().any(|x| x.id == b.id) {
                    out.push(b);
                }
            }
        }
        Ok(out)
    }
}

fn conv(m: Option<Mutant>) -> Convention {
    let (counter, rule) = crate::convention(m);
    Convention::new(counter, rule)
}

fn histogram(draws: impl IntoIterator<Item = u64>) -> BTreeMap<u64, u64> {
    let mut h = BTreeMap::new();
    for d in draws {
        *h.entry(d).or_insert(0) += 1;
    }
    h
}

fn freqs_of(coords: &[u64], n: u64) -> Vec<u64> {
    let mut f = vec![0u64; n as usize];
    for &c in coords {
        f[c as usize - 1] += 1;
    }
    f
}

/// Draws from one Monte Carlo battery and the exact target they are tested against.
fn monte_carlo(mc: &MonteCarlo, mutant: Option<Mutant>, warnings: &mut Vec<String>, id: &str) -> Result<(String, BTreeMap<u64, u64>, BTreeMap<u64, f64>)> {
    let kind: Kind = mc.stream.parse()?;
    let coords = generate(&kind, mc.n, mc.m, mc.seed)?;
    let n = coords.iter().copied().max().unwrap_or(1).max(mc.n);
    let freqs = freqs_of(&coords, n);
    let batch = |want: usize| want.clamp(1, 200_000);
    let mut drawn: Vec<u64> = Vec::with_capacity(mc.draws);
    let mut round = 0u64;
    let label;
    let target = match mc.sampler.as_str() {
        "gsampler" => {
            let m = parse_measure(mc.measure.as_deref().unwrap_or("lp:2"))?;
            let c = conv(mutant);
            while drawn.len() < mc.draws {
                let mut cfg = GSamplerConfig::new(m.clone(), n, coords.len() as u64, 0.5, mix(mc.seed, round)).with_repetitions(batch(mc.draws));
                cfg.counter = c.counter;
                cfg.rule = c.rule;
                let mut g = GSampler::new(cfg)?;
                coords.iter().for_each(|&x| g.update(x));
                drawn.extend(g.accepted().into_iter().map(|(_, x)| x));
                round += 1;
            }
            label = m.label();
            target_distribution(&freqs, &m).ok_or_else(|| Error::Unsupported("target not representable".into()))?.probabilities()
        }
        "tukey" => {
            let m = parse_measure(mc.measure.as_deref().unwrap_or("tukey:1"))?;
            while drawn.len() < mc.draws {
                let mut t = TukeySampler::new(m.clone(), n, batch(mc.draws), mix(mc.seed, round))?;
                coords.iter().for_each(|&x| t.update(x));
                drawn.extend(t.accepted());
                round += 1;
            }
            label = m.label();
            target_distribution(&freqs, &m).ok_or_else(|| Error::Unsupported("target not representable".into()))?.probabilities()
        }
        "f0" => {
            while drawn.len() < mc.draws {
                let r = batch(mc.draws);
                let mut b = F0Bank::new(n, r, mix(mc.seed, round))?;
                coords.iter().for_each(|&x| b.update(x));
                drawn.extend((0..r).filter_map(|u| b.draw_unit(u).as_index()));
                round += 1;
            }
            label = "f0".into();
            let support: Vec<u64> = (1..=n).filter(|&i| freqs[i as usize - 1] > 0).collect();
            support.iter().map(|&i| (i, 1.0 / support.len() as f64)).collect()
        }
        "random-order" => {
            let m = parse_measure(mc.measure.as_deref().unwrap_or("lp:2"))?;
            let Measure::Lp { p } = m else { return Err(Error::InvalidParameter("random-order batteries use lp:<integer>".into())) };
            if !p.is_integer() {
                return Err(Error::InvalidParameter("random-order sampling needs an integer p >= 2".into()));
            }
            let shuffle = kind.is_random_order();
            if !shuffle {
                warnings.push(format!(
                    "{id}: precondition: random-order sampling assumes a uniformly shuffled stream; `{}` is replayed in one fixed order",
                    mc.stream
                ));
            }
            let w = coords.len() as u64;
            let cap = 50 * mc.draws as u64;
            let mut t = 0u64;
            while drawn.len() < mc.draws && t < cap {
                let order = if shuffle { generate(&kind, mc.n, mc.m, mix(mc.seed, t))? } else { coords.clone() };
                let mut s = RandomOrderSampler::new(p.num(), n, w, mix(mc.seed ^ 0x5eed, t))?;
                order.iter().for_each(|&x| s.update(x));
                drawn.extend(s.draw().as_index());
                t += 1;
            }
            label = m.label();
            target_distribution(&freqs, &m).ok_or_else(|| Error::Unsupported("target not representable".into()))?.probabilities()
        }
        other => return Err(Error::InvalidParameter(format!("unknown Monte Carlo sampler `{other}`"))),
    };
    drawn.truncate(mc.draws);
    Ok((label, histogram(drawn), target))
}

fn run_battery(b: &Battery, args: &VerifyArgs, warnings: &mut Vec<String>) -> Result<Entry> {
    let c = conv(args.mutant);
    let exact = |r: BatteryReport| Entry { id: b.id.clone(), passed: r.passed(), outcome: Outcome::Exact(r) };
    Ok(match &b.spec {
        Spec::Insertion { measures: ms, n, max_len } => exact(insertion_battery(&measures(ms)?, *n, *max_len, c, None)?),
        Spec::Window { measures: ms, n, max_w, max_len } => exact(window_battery(&measures(ms)?, *n, *max_w, *max_len, c)?),
        Spec::SwLp { p, n, max_w, max_len } => {
            let ps = p.iter().map(|s| s.parse::<Exponent>()).collect::<Result<Vec<_>>>()?;
            exact(sw_lp_battery(&ps, *n, *max_w, *max_len)?)
        }
        Spec::MatrixUnit { measure, n, d, max_len } => exact(matrix_unit_battery(RowMeasure::parse(measure)?, *n, *d, *max_len)?),
        Spec::MatrixDfs { measure, n, d, max_len } => exact(matrix_dfs_battery(RowMeasure::parse(measure)?, *n, *d, *max_len)?),
        Spec::RandomOrder { p, n, max_w } => exact(random_order_battery(p, *n, *max_w)?),
        Spec::Multipass { measures: ms, max_n, max_entry, gammas } => {
            let gs = gammas.iter().map(|g| Gamma::parse(g)).collect::<Result<Vec<_>>>()?;
            exact(multipass_battery(&measures(ms)?, *max_n, *max_entry, &gs)?)
        }
        Spec::MonteCarlo(mc) => {
            let mut mc = mc.clone();
            if let Some(s) = &args.stream {
                mc.stream = s.clone();
            }
            if let Some(s) = args.seed {
                mc.seed = s;
            }
            let start = Instant::now();
            let (label, hist, target) = monte_carlo(&mc, args.mutant, warnings, &b.id)?;
            let report = gof_test(&hist, &target)?;
            let passed = report.pvalue > mc.pvalue_floor && report.tv <= mc.max_tv;
            Entry {
                id: b.id.clone(),
                passed,
                outcome: Outcome::MonteCarlo {
                    sampler: mc.sampler.clone(),
                    measure: label,
                    samples: report.samples,
                    pvalue: report.pvalue,
                    tv: report.tv,
                    pvalue_floor: mc.pvalue_floor,
                    max_tv: mc.max_tv,
                    seconds: start.elapsed().as_secs_f64(),
                },
            }
        }
    })
}

pub fn verify(args: &VerifyArgs) -> Result<VerifyReport> {
    let manifest = manifest();
    let batteries = manifest.resolve(&args.batteries)?;
    let mut warnings = Vec::new();
    let mut results = Vec::new();
    for b in &batteries {
        results.push(run_battery(b, args, &mut warnings)?);
    }
    Ok(VerifyReport {
        batteries: batteries.iter().map(|b| b.id.clone()).collect(),
        mutant: args.mutant.map(|m| format!("{m:?}")),
        passed: results.iter().all(|e| e.passed),
        results,
        warnings,
    })
}

fn list(format: Format) {
    let m = manifest();
    match format {
        Format::Json => {
            let ids: Vec<&str> = m.battery.iter().map(|b| b.id.as_str()).collect();
            print_json(&serde_json::json!({ "groups": m.groups, "batteries": ids }));
        }
        Format::Table => {
            let mut t = Table::new(["group", "batteries"]);
            for (g, ids) in &m.groups {
                t.row([g.clone(), ids.join(" ")]);
            }
            print!("{}", t.render());
        }
    }
}

pub fn run(args: &VerifyArgs) -> Result<ExitCode> {
    if args.list {
        list(args.format);
        return Ok(ExitCode::SUCCESS);
    }
    let report = verify(args)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    match args.format {
        Format::Json => print_json(&report),
        Format::Table => {
            let mut t = Table::new(["battery", "result", "detail", "seconds"]);
            for e in &report.results {
                let verdict = if e.passed { "pass" } else { "FAIL" };
                let (detail, secs) = match &e.outcome {
                    Outcome::Exact(r) => (format!("{}/{} exact, {} invalid, {} mismatched", r.exact, r.instances, r.invalid, r.mismatches), r.seconds),
                    Outcome::MonteCarlo { samples, pvalue, tv, seconds, .. } => (format!("{samples} draws, p={pvalue:.4}, tv={tv:.4}"), *seconds),
                };
                t.row([e.id.clone(), verdict.to_string(), detail, format!("{secs:.1}")]);
            }
            print!("{}", t.render());
        }
    }
    Ok(if report.passed { ExitCode::SUCCESS } else { ExitCode::from(1) })
}
