use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use cakecut::{random_instance, Mode, Rat, TraceSink, Valuation};
use cakecut_cli::commands::{self, Protocol, RunConfig, EXIT_OK, EXIT_PARSE, EXIT_VERDICT};
use cakecut_cli::format::{parse_allocation, parse_fraction, parse_valuations};
use cakecut_cli::oracle;
use cakecut_cli::trace::FileTrace;

#[derive(Parser)]
#[command(name = "cakecut", about = "Exact envy-free cake cutting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProtocolArg {
    Main,
    Core,
    PropEf,
    Connected,
    DivideChoose,
    SelfridgeConway,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Strict,
    Adaptive,
}

#[derive(Clone, Copy, ValueEnum)]
enum Suite {
    All,
    Neat,
    Domination,
    Cycles,
}

#[derive(Subcommand)]
enum Command {
    /// Run a protocol and print a verified report.
    Run {
        #[arg(long, value_enum)]
        protocol: ProtocolArg,
        /// Valuation file.
        #[arg(long, conflicts_with = "random")]
        input: Option<PathBuf>,
        /// Random instance with `n` agents of `k` segments each.
        #[arg(long, num_args = 2, value_names = ["N", "K"], required_unless_present = "input")]
        random: Option<Vec<usize>>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "adaptive")]
        mode: ModeArg,
        /// Significance threshold `p/q` for adaptive mode.
        #[arg(long, value_parser = fraction)]
        sig_threshold: Option<Rat>,
        #[arg(long)]
        max_queries: Option<u64>,
        /// Write the query and state trace here.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Cutter for `core`, counted from 1.
        #[arg(long, default_value_t = 1)]
        cutter: usize,
    },
    /// Verify an allocation file against a valuation file.
    Verify {
        allocation: PathBuf,
        valuations: PathBuf,
    },
    /// Run the brute-force oracle suites.
    Oracle {
        #[arg(long, value_enum, default_value = "all")]
        suite: Suite,
        #[arg(long, default_value_t = 200)]
        cases: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn fraction(s: &str) -> Result<Rat, String> {
    parse_fraction(s).ok_or_else(|| format!("`{s}` is not a fraction"))
}

fn read(path: &PathBuf) -> Result<String, i32> {
    std::fs::read_to_string(path).map_err(|e| {
        eprintln!("error: {}: {e}", path.display());
        EXIT_PARSE
    })
}

fn load_valuations(path: &PathBuf) -> Result<Vec<Valuation>, i32> {
    parse_valuations(&read(path)?).map_err(|e| {
        eprintln!("error: {}: {e}", path.display());
        EXIT_PARSE
    })
}

fn execute(cli: Cli) -> Result<i32, i32> {
    match cli.command {
        Command::Run { protocol, input, random, seed, mode, sig_threshold, max_queries, trace, cutter } => {
            let vals = match (input, random) {
                (Some(path), _) => load_valuations(&path)?,
                (None, Some(nk)) => {
                    if nk[0] == 0 || nk[1] == 0 {
                        eprintln!("error: --random needs positive n and k");
                        return Err(EXIT_PARSE);
                    }
                    random_instance(nk[0], nk[1], seed)
                }
                (None, None) => unreachable!("clap requires one of them"),
            };
            let protocol = match protocol {
                ProtocolArg::Main => Protocol::Main,
                ProtocolArg::Core => Protocol::Core,
                ProtocolArg::PropEf => Protocol::PropEf,
                ProtocolArg::Connected => Protocol::Connected,
                ProtocolArg::DivideChoose => Protocol::DivideChoose,
                ProtocolArg::SelfridgeConway => Protocol::SelfridgeConway,
            };
            if cutter == 0 {
                eprintln!("error: --cutter counts from 1");
                return Err(EXIT_PARSE);
            }
            let cfg = RunConfig {
                protocol,
                mode: match mode {
                    ModeArg::Strict => Mode::Strict,
                    ModeArg::Adaptive => Mode::Adaptive,
                },
                threshold: sig_threshold,
                max_queries,
                cutter: cutter - 1,
            };
            let sink: Option<Box<dyn TraceSink>> = match trace {
                Some(path) => match FileTrace::create(&path) {
                    Ok(t) => Some(Box::new(t)),
                    Err(e) => {
                        eprintln!("error: {}: {e}", path.display());
                        return Err(EXIT_PARSE);
                    }
                },
                None => None,
            };
            let out = commands::run(vals, &cfg, sink);
            print!("{}", out.report);
            Ok(out.exit)
        }
        Command::Verify { allocation, valuations } => {
            let vals = load_valuations(&valuations)?;
            let file = parse_allocation(&read(&allocation)?).map_err(|e| {
                eprintln!("error: {}: {e}", allocation.display());
                EXIT_PARSE
            })?;
            match commands::verify(&vals, &file) {
                Ok((_, verdicts, text)) => {
                    print!("{text}");
                    Ok(if verdicts.iter().all(|v| v.pass) { EXIT_OK } else { EXIT_VERDICT })
                }
                Err(msg) => {
                    eprintln!("error: {msg}");
                    Err(EXIT_PARSE)
                }
            }
        }
        Command::Oracle { suite, cases, seed } => {
            let mut reports = Vec::new();
            if matches!(suite, Suite::All | Suite::Neat) {
                reports.push(oracle::neat_suite(cases, seed));
            }
            if matches!(suite, Suite::All | Suite::Domination) {
                reports.push(oracle::domination_suite(cases, seed));
            }
            if matches!(suite, Suite::All | Suite::Cycles) {
                reports.push(oracle::cycle_suite());
            }
            for r in &reports {
                print!("{}", r.text());
            }
            Ok(if reports.iter().all(|r| r.agrees()) { EXIT_OK } else { EXIT_VERDICT })
        }
    }
}

fn main() -> ExitCode {
    let code = execute(Cli::parse()).unwrap_or_else(|c| c);
    ExitCode::from(code as u8)
}
