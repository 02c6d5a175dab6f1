use std::process::ExitCode;

use rand::Rng as _;
use serde::Serialize;

use tps_core::reservoir::bank_throughput;
use tps_core::rng::substream;
use tps_core::Result;

use crate::output::{print_json, Table};
use crate::Format;

#[derive(clap::Args, Debug)]
pub struct BenchArgs {
    /// Repetitions in the smaller bank; the larger has ten times as many.
    #[arg(long, default_value_t = 64)]
    pub r: usize,
    #[arg(long, default_value_t = 1_000_000)]
    pub updates: usize,
    /// Universe size of the uniform update stream.
    #[arg(long, default_value_t = 1_000_000)]
    pub n: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Serialize)]
pub struct BenchReport {
    pub r: usize,
    pub updates: usize,
    pub updates_per_sec_r: f64,
    pub updates_per_sec_10r: f64,
    pub ratio: f64,
    pub within_2x: bool,
}

pub fn run(args: &BenchArgs) -> Result<ExitCode> {
    if args.r == 0 || args.n == 0 {
        return Err(tps_core::Error::InvalidParameter("r and n must be positive".into()));
    }
    let mut rng = substream(args.seed, 0xbe);
    let coords: Vec<u64> = (0..args.updates).map(|_| rng.random_range(1..=args.n)).collect();
    let small = bank_throughput(args.r, &coords, args.seed);
    let large = bank_throughput(10 * args.r, &coords, args.seed ^ 1);
    let ratio = large / small;
    let report = BenchReport { r: args.r, updates: args.updates, updates_per_sec_r: small, updates_per_sec_10r: large, ratio, within_2x: ratio >= 0.5 };
    match args.format {
        Format::Json => print_json(&report),
        Format::Table => {
            let mut t = Table::new(["repetitions", "updates/sec"]);
            t.row([args.r.to_string(), format!("{small:.3e}")]);
            t.row([(10 * args.r).to_string(), format!("{large:.3e}")]);
            print!("{}", t.render());
            println!("ratio {ratio:.3} ({})", if report.within_2x { "within 2x" } else { "NOT within 2x" });
        }
    }
    Ok(if report.within_2x { ExitCode::SUCCESS } else { ExitCode::from(1) })
}
