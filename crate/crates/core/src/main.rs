use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ris_twoway::config::{Codebook, Profile};
use ris_twoway::harness::{monte_carlo, summarize, write_csv, SchemeId, SweepPoint};
use ris_twoway::{verify, Error};

const DEFAULT_SCHEMES: &str = "optPSG,uniPowPSG,initialPSs,randInitialPSG,randPSs,noRIS";

#[derive(Parser)]
#[command(
    name = "ris-twoway",
    version,
    about = "RIS-assisted two-way OFDM link simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte-Carlo sweep and write one CSV row per (point, trial, scheme).
    Simulate(SimulateArgs),
    /// Run the invariant and oracle battery.
    Verify {
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

#[derive(clap::Args)]
struct SimulateArgs {
    /// Built-in scenario: paper-fig2a, paper-fig2b or tiny.
    #[arg(long, default_value = "paper-fig2a")]
    profile: String,
    /// Comma-separated scheme names.
    #[arg(long, default_value = DEFAULT_SCHEMES, value_delimiter = ',')]
    schemes: Vec<String>,
    /// RIS sizes to sweep (default: the profile's).
    #[arg(long = "R", value_delimiter = ',')]
    ris_sizes: Vec<usize>,
    /// Phase resolutions in bits, or `inf` (default: the profile's).
    #[arg(long = "B", value_delimiter = ',')]
    codebooks: Vec<Codebook>,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    /// Base seed (default: the profile's).
    #[arg(long)]
    seed: Option<u64>,
    /// CSV destination; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// TOML file overriding profile fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Record wall-clock time per row (otherwise written as 0).
    #[arg(long)]
    timing: bool,
}

fn simulate(args: SimulateArgs) -> Result<(), Error> {
    let profile = Profile::by_name(&args.profile)?;
    let mut params = profile.params.clone();
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        params = params.apply_overrides(&text)?;
    }
    if let Some(seed) = args.seed {
        params.seed = seed;
    }
    if args.trials == 0 {
        return Err(Error::Config("--trials must be at least 1".into()));
    }
    let cfg = params.build()?;
    let schemes = args
        .schemes
        .iter()
        .map(|s| s.parse())
        .collect::<Result<Vec<SchemeId>, _>>()?;
    let sizes = if args.ris_sizes.is_empty() {
        profile.ris_sizes
    } else {
        args.ris_sizes
    };
    let codebooks = if args.codebooks.is_empty() {
        profile.codebooks
    } else {
        args.codebooks
    };
    let sweep: Vec<SweepPoint> = sizes
        .iter()
        .flat_map(|&ris_elements| {
            codebooks.iter().map(move |&codebook| SweepPoint {
                ris_elements,
                codebook,
            })
        })
        .collect();

    let rows = monte_carlo(&cfg, &schemes, &sweep, args.trials, args.timing)?;
    match &args.out {
        Some(path) => write_csv(BufWriter::new(File::create(path)?), &rows)?,
        None => write_csv(io::stdout().lock(), &rows)?,
    }

    let mut err = io::stderr().lock();
    for s in summarize(&rows) {
        writeln!(
            err,
            "{:<15} R={:<3} B={:<4} mean={:.6} se={:.6} (n={})",
            s.scheme, s.ris_elements, s.codebook, s.mean, s.std_error, s.trials
        )?;
    }
    let capped = rows.iter().filter(|r| !r.converged).count();
    if capped > 0 {
        writeln!(err, "{capped} runs stopped at the outer iteration cap")?;
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::EnumerationCap { .. } | Error::ContinuousCodebook => 2,
        Error::EigenNotConverged { .. } | Error::Io(_) => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => simulate(args),
        Command::Verify { seed } => match verify::run_all(seed) {
            Ok(reports) => {
                for r in &reports {
                    println!("{r}");
                }
                if reports.iter().all(|r| r.passed) {
                    Ok(())
                } else {
                    return ExitCode::from(3);
                }
            }
            Err(e) => Err(e),
        },
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
