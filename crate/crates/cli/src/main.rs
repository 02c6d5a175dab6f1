//! `tps`: generate streams, run sampling campaigns, verify, benchmark.

mod bench;
mod output;
mod sample;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use tps_core::gsampler::Rule;
use tps_core::reservoir::Counter;

/// Exit status for a usage or input error.
const USAGE: u8 = 2;

#[derive(Parser, Debug)]
#[command(name = "tps", version, about = "Truly perfect streaming samplers: generate, sample, verify, bench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic stream file.
    Generate(GenerateArgs),
    /// Run N independent seeded draws of a sampler over a stream file.
    Sample(sample::SampleArgs),
    /// Run verification batteries from the built-in manifest.
    Verify(verify::VerifyArgs),
    /// Reservoir bank update throughput at R and 10R.
    Bench(bench::BenchArgs),
}

#[derive(clap::Args, Debug)]
struct GenerateArgs {
    /// zipf(ALPHA), uniform, single-heavy, shuffled[(F1,F2,..)], sliding-trace
    #[arg(long)]
    kind: String,
    #[arg(long)]
    n: u64,
    #[arg(long)]
    m: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Mark the stream as sliding-window with this window size.
    #[arg(long)]
    window: Option<u64>,
    /// Output path; standard output when omitted.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    #[default]
    Json,
    Table,
}

/// Deliberately wrong acceptance conventions, for checking that verification catches them.
#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mutant {
    /// Counter includes the sampled occurrence, acceptance G(c+1)-G(c).
    InclusiveForward,
    /// Strictly-after counter, acceptance G(c)-G(c-1).
    StrictlyAfterBackward,
    /// Counter includes the sampled occurrence, acceptance G(c)-G(c-1) (equivalent to the correct sampler).
    InclusiveBackward,
}

impl Mutant {
    pub fn convention(self) -> (Counter, Rule) {
        match self {
            Mutant::InclusiveForward => (Counter::Inclusive, Rule::Forward),
            Mutant::StrictlyAfterBackward => (Counter::StrictlyAfter, Rule::Backward),
            Mutant::InclusiveBackward => (Counter::Inclusive, Rule::Backward),
        }
    }
}

pub fn convention(m: Option<Mutant>) -> (Counter, Rule) {
    m.map_or((Counter::StrictlyAfter, Rule::Forward), Mutant::convention)
}

fn generate(args: &GenerateArgs) -> tps_core::Result<()> {
    use tps_core::format::StreamFile;
    use tps_core::generate::{generate, Kind};
    use tps_core::{Model, StreamConfig};

    let kind: Kind = args.kind.parse()?;
    let coords = generate(&kind, args.n, args.m, args.seed)?;
    let n = match &kind {
        Kind::Shuffled(Some(f)) => args.n.max(f.len() as u64),
        _ => args.n,
    };
    let config = match (args.window, kind.is_random_order()) {
        (Some(w), _) => StreamConfig::sliding(n, w)?,
        (None, true) => StreamConfig::new(n, Model::RandomOrder)?,
        (None, false) => StreamConfig::new(n, Model::InsertionOnly)?,
    }
    .with_seed(args.seed);
    let file = StreamFile::from_coords(config, &coords);
    match &args.output {
        Some(path) => file.write(path),
        None => {
            print!("{}", file.render());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Generate(a) => generate(a).map(|_| ExitCode::SUCCESS),
        Command::Sample(a) => sample::run(a).map(|_| ExitCode::SUCCESS),
        Command::Verify(a) => verify::run(a),
        Command::Bench(a) => bench::run(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(USAGE)
        }
    }
}
