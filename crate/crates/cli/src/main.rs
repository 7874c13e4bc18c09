//! `pdpu`: command-line front end for the posit dot-product unit model.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 divergence found by
//! `fuzz`.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pdpu::accuracy::{
    histogram_to_csv, parse_configs, reports_to_csv, run_sweep_with, tapered_accuracy_profile, Corpus,
    SweepReference,
};
use pdpu::engine::{fused_dot_traced, Mode};
use pdpu::exact::round_decimal;
use pdpu::fuzz::{fuzz, Reference};
use pdpu::{oracle_fused_dot, pdpu_dot, PdpuConfig, PositBits, PositFormat};

const SEED_ENV: &str = "PDPU_SEED";

#[derive(Parser)]
#[command(name = "pdpu", version, about = "Bit-accurate posit dot-product unit model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the fields and value of a bit pattern.
    Decode {
        /// Format as `n,es`.
        #[arg(long)]
        fmt: PositFormat,
        /// Pattern in hex.
        #[arg(long)]
        bits: String,
    },
    /// Convert a decimal real to a pattern, or a pattern to its exact value.
    Convert {
        #[arg(long)]
        fmt: PositFormat,
        #[arg(long, allow_hyphen_values = true, conflicts_with = "to_real")]
        from_real: Option<String>,
        /// Pattern in hex.
        #[arg(long, required_unless_present = "from_real")]
        to_real: Option<String>,
    },
    /// Evaluate one dot product `acc + a . b`.
    Dot {
        #[command(flatten)]
        engine: EngineArgs,
        /// Comma-separated hex patterns.
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
        #[arg(long, default_value = "0")]
        acc: String,
        /// Print every stage intermediate (fused and quire modes).
        #[arg(long)]
        trace: bool,
    },
    /// Differential fuzzing of the engine against the oracle.
    Fuzz {
        #[command(flatten)]
        engine: EngineArgs,
        /// Dot-product size N.
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 10_000)]
        count: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// `own` (the mode's own rounding schedule) or `fused`.
        #[arg(long, default_value = "own")]
        reference: Reference,
        /// Report divergences but exit 0.
        #[arg(long)]
        allow_lossy: bool,
        /// Write diverging cases as test vectors.
        #[arg(long)]
        out_file: Option<PathBuf>,
    },
    /// Accuracy sweep over a configuration file.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct EngineArgs {
    /// Input format `n,es`.
    #[arg(long)]
    fmt_in: PositFormat,
    /// Output format `n,es`; defaults to the input format.
    #[arg(long)]
    fmt_out: Option<PositFormat>,
    /// Alignment width W_m (ignored in quire mode).
    #[arg(long, default_value_t = 14)]
    wm: u32,
    /// fused, quire, muladd, fma, or (dot only) oracle.
    #[arg(long, default_value = "fused")]
    mode: String,
}

#[derive(Args)]
struct SweepArgs {
    /// Lines of `fmt_in fmt_out N wm mode`; `#` comments.
    #[arg(long)]
    configs: PathBuf,
    /// `default`, `gaussian:MU:SIGMA` or `loguniform:LO:HI`.
    #[arg(long, default_value = "default")]
    corpus: String,
    #[arg(long, default_value_t = 100_000)]
    vectors: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// `source` (exact value of the unquantized corpus) or `quantized`
    /// (exact value of the posit operands).
    #[arg(long, default_value = "source")]
    reference: SweepReference,
    /// Report CSV path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the representation-accuracy histogram of the corpus
    /// activations to this CSV.
    #[arg(long, requires = "histogram_fmt")]
    histogram: Option<PathBuf>,
    /// Format used for the histogram.
    #[arg(long)]
    histogram_fmt: Option<PositFormat>,
}

enum Failure {
    Usage(String),
    Divergence,
}

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Divergence) => ExitCode::from(2),
    }
}

fn seed_override(seed: u64) -> Result<u64, Failure> {
    match std::env::var(SEED_ENV) {
        Ok(s) => s
            .trim()
            .parse()
            .map_err(|_| Failure::Usage(format!("{SEED_ENV}={s:?} is not an unsigned integer"))),
        Err(_) => Ok(seed),
    }
}

fn parse_list(fmt: PositFormat, s: &str) -> Result<Vec<PositBits>, Failure> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| PositBits::parse_hex(fmt, t).map_err(Failure::from))
        .collect()
}

/// Builds the config; `oracle` maps to quire mode and is reported back.
fn engine_config(e: &EngineArgs, n_terms: usize) -> Result<(PdpuConfig, bool), Failure> {
    let oracle = e.mode.eq_ignore_ascii_case("oracle");
    let mode: Mode = if oracle { Mode::Quire } else { e.mode.parse()? };
    let out = e.fmt_out.unwrap_or(e.fmt_in);
    Ok((PdpuConfig::new(e.fmt_in, out, n_terms, e.wm, mode)?, oracle))
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Decode { fmt, bits } => {
            print!("{}", describe(PositBits::parse_hex(fmt, &bits)?));
            Ok(())
        }
        Command::Convert { fmt, from_real, to_real } => {
            match (from_real, to_real) {
                (Some(x), _) => println!("{}", round_decimal(&x, fmt)?),
                (None, Some(h)) => println!("{}", PositBits::parse_hex(fmt, &h)?.to_exact()),
                (None, None) => unreachable!("clap requires one of the two"),
            }
            Ok(())
        }
        Command::Dot { engine, a, b, acc, trace } => {
            let va = parse_list(engine.fmt_in, &a)?;
            let vb = parse_list(engine.fmt_in, &b)?;
            let (cfg, oracle) = engine_config(&engine, va.len())?;
            let acc = PositBits::parse_hex(cfg.out_fmt(), &acc)?;
            if oracle {
                println!("{}", oracle_fused_dot(&cfg, &va, &vb, acc)?);
            } else if trace && !cfg.mode().is_discrete() {
                let (out, tr) = fused_dot_traced(&cfg, &va, &vb, acc)?;
                print!("{tr}");
                println!("{out}");
            } else {
                if trace {
                    return Err(Failure::Usage(format!("--trace needs fused or quire mode, got {}", cfg.mode())));
                }
                println!("{}", pdpu_dot(&cfg, &va, &vb, acc)?);
            }
            Ok(())
        }
        Command::Fuzz { engine, n, count, seed, reference, allow_lossy, out_file } => {
            let (cfg, oracle) = engine_config(&engine, n)?;
            if oracle {
                return Err(Failure::Usage("fuzz compares the engine against the oracle; pick an engine mode".into()));
            }
            let seed = seed_override(seed)?;
            let report = fuzz(&cfg, count, seed, reference);
            println!(
                "config={cfg} reference={reference} seed={seed} cases={} divergences={}",
                report.cases,
                report.divergences.len()
            );
            if let Some(path) = out_file {
                let body: String = report.divergences.iter().map(|v| format!("{v}\n")).collect();
                fs::write(&path, body).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
            }
            if report.is_clean() || allow_lossy {
                Ok(())
            } else {
                Err(Failure::Divergence)
            }
        }
        Command::Sweep(args) => sweep(args),
    }
}

fn sweep(args: SweepArgs) -> Result<(), Failure> {
    let text = fs::read_to_string(&args.configs)
        .map_err(|e| Failure::Usage(format!("{}: {e}", args.configs.display())))?;
    let configs = parse_configs(&text)?;
    let seed = seed_override(args.seed)?;
    let corpus = Corpus::from_spec(&args.corpus, seed, args.vectors)?;
    let csv = reports_to_csv(&run_sweep_with(&corpus, &configs, args.reference)?);
    match &args.out {
        Some(path) => fs::write(path, csv).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?,
        None => print!("{csv}"),
    }
    if let (Some(path), Some(fmt)) = (&args.histogram, args.histogram_fmt) {
        let corpus = corpus.with_terms(1);
        let xs: Vec<f64> = (0..corpus.n_vectors).map(|i| corpus.sample(i).a[0]).collect();
        let profile = tapered_accuracy_profile(fmt, &xs);
        fs::write(path, histogram_to_csv(&profile.histogram))
            .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

fn describe(p: PositBits) -> String {
    let fmt = p.fmt();
    let mut s = format!("format {fmt}\nbits {p}\n");
    if p.is_nar() {
        s.push_str("class NaR\nvalue NaR\n");
        return s;
    }
    let Some(f) = p.fields() else {
        s.push_str("class zero\nvalue 0\n");
        return s;
    };
    let d = p.decode();
    s += &format!(
        "class normal\nsign {}\nregime_run {}\nk {}\nexponent {} ({} bits)\nmantissa {:#x} ({} bits)\nscale {}\nvalue {}\n",
        f.sign.symbol(),
        f.regime_run,
        f.k,
        f.exponent,
        f.exponent_len,
        f.mantissa,
        f.mantissa_len,
        d.scale,
        p.to_exact()
    );
    s
}
