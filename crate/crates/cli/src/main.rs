//! `fpadd`: workbench for the multi-term fused adder model.
//!
//! Exit status is 0 on success, 1 when `verify` finds a counterexample and 2
//! on usage or input errors.

use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use online_fpadd::analysis::{self, DataSource, GridPoint, SweepParams, VerifyOutcome};
use online_fpadd::vectors::{parse_vectors, read_vector_file, VectorLine};
use online_fpadd::{
    decode, encode, exact_sum, resolve_specials, round_exact, rounding::special_word, AccumulatorSpec,
    DecodedFp, Error, FpClass, FpFormat, FusedAdder, LossPolicy, RoundingMode,
};

#[derive(Parser)]
#[command(name = "fpadd", version, about = "Bit-accurate multi-term fused floating-point addition")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Unpack words into sign, biased exponent, significand and class.
    Decode {
        #[arg(long)]
        fmt: FpFormat,
        /// Hex words.
        #[arg(required = true)]
        words: Vec<String>,
    },
    /// Pack decoded fields into a word.
    Encode(EncodeArgs),
    /// Fused sum of each input vector, one hex word per line.
    Sum(SumArgs),
    /// Correctly rounded exact sum of each input vector.
    Oracle(OracleArgs),
    /// Cross-check serial, online and every tree configuration.
    Verify(VerifyArgs),
    /// List every tree configuration for N terms.
    Configs {
        #[arg(long)]
        n: usize,
    },
    /// Error and structure sweep over all configurations.
    Sweep(SweepArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Lossless,
    Truncate,
    Sticky,
}

impl From<Mode> for LossPolicy {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Lossless => LossPolicy::Lossless,
            Mode::Truncate => LossPolicy::Truncate,
            Mode::Sticky => LossPolicy::Sticky,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Round {
    Rne,
    Rtz,
}

impl From<Round> for RoundingMode {
    fn from(r: Round) -> Self {
        match r {
            Round::Rne => RoundingMode::NearestEven,
            Round::Rtz => RoundingMode::TowardZero,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Source {
    Uniform,
    Normal,
}

#[derive(Args)]
struct Formats {
    /// Input format: fp32, bf16, e4m3, e5m2, e6m1 or e<E>m<M>[b<BIAS>][,finite][,fn][,ieee][,ftz].
    #[arg(long)]
    fmt: FpFormat,
    /// Output format (defaults to --fmt).
    #[arg(long)]
    out_fmt: Option<FpFormat>,
    #[arg(long, value_enum, default_value = "rne")]
    round: Round,
}

impl Formats {
    fn out(&self) -> FpFormat {
        self.out_fmt.unwrap_or(self.fmt)
    }
}

#[derive(Args)]
struct Accumulator {
    #[arg(long, value_enum, default_value = "lossless")]
    mode: Mode,
    /// Guard bits below the mantissa LSB (ignored in lossless mode).
    #[arg(long, default_value_t = 3)]
    guard: u32,
}

impl Accumulator {
    fn spec(&self, n_terms: usize, fmt: &FpFormat) -> online_fpadd::Result<AccumulatorSpec> {
        GridPoint {
            loss: self.mode.into(),
            guard_bits: self.guard,
        }
        .spec(n_terms, fmt)
    }
}

#[derive(Args)]
struct EncodeArgs {
    #[arg(long)]
    fmt: FpFormat,
    #[arg(long)]
    negative: bool,
    #[arg(long, default_value_t = 0)]
    biased_exp: u32,
    /// Significand including the leading bit, hex.
    #[arg(long, default_value = "0")]
    significand: String,
    #[arg(long, conflicts_with = "nan")]
    inf: bool,
    #[arg(long)]
    nan: bool,
}

#[derive(Args)]
struct SumArgs {
    #[command(flatten)]
    formats: Formats,
    /// Tree configuration, leaf level first, e.g. 4-2.
    #[arg(long)]
    config: String,
    #[command(flatten)]
    acc: Accumulator,
    /// Vector file (standard input when omitted).
    input: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    formats: Formats,
    input: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    formats: Formats,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    acc: Accumulator,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    formats: Formats,
    #[arg(long)]
    n: usize,
    /// Loss policies to sweep.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "lossless,truncate,sticky")]
    modes: Vec<Mode>,
    /// Guard-bit counts for the lossy policies.
    #[arg(long, value_delimiter = ',', default_value = "0,3")]
    guards: Vec<u32>,
    #[arg(long, value_enum, default_value = "uniform")]
    source: Source,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    mean: f64,
    #[arg(long, default_value_t = 1.0)]
    std_dev: f64,
    /// Take sample vectors from this file instead of generating them.
    #[arg(long)]
    vectors: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Write the report as CSV here.
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    let result = run(cli.command, &mut out);
    let flushed = out.flush();
    match result {
        Ok(code) => {
            if flushed.is_err() {
                return ExitCode::from(2);
            }
            code
        }
        Err(e) => {
            eprintln!("fpadd: {e}");
            ExitCode::from(2)
        }
    }
}

fn hex(word: u64, fmt: &FpFormat) -> String {
    format!("{word:0width$X}", width = fmt.width().div_ceil(4) as usize)
}

fn read_input(input: Option<&Path>, n_terms: Option<usize>) -> online_fpadd::Result<Vec<VectorLine>> {
    match input {
        Some(path) => read_vector_file(path, n_terms),
        None => {
            let mut text = String::new();
            io::stdin().read_to_string(&mut text).map_err(|source| Error::Io {
                path: PathBuf::from("<stdin>"),
                source,
            })?;
            parse_vectors(&text, n_terms, None)
        }
    }
}

fn at_line(line: usize, input: Option<&Path>, e: Error) -> Error {
    Error::Parse {
        path: input.map(Path::to_path_buf),
        line,
        msg: e.to_string(),
    }
}

fn io_err(e: io::Error) -> Error {
    Error::Io {
        path: PathBuf::from("<stdout>"),
        source: e,
    }
}

fn run(command: Command, out: &mut impl Write) -> online_fpadd::Result<ExitCode> {
    match command {
        Command::Decode { fmt, words } => {
            for token in words {
                let word = online_fpadd::vectors::parse_word(&token)
                    .ok_or_else(|| Error::Usage(format!("`{token}` is not a hex word")))?;
                let d = decode(word, &fmt)?;
                writeln!(
                    out,
                    "{} sign={} biased_exp={} significand={:#x} class={:?} value={}",
                    hex(word, &fmt),
                    if d.negative { '-' } else { '+' },
                    d.biased_exp,
                    d.significand,
                    d.class,
                    d.to_f64(&fmt)
                )
                .map_err(io_err)?;
            }
        }
        Command::Encode(a) => {
            let significand = online_fpadd::vectors::parse_word(&a.significand)
                .ok_or_else(|| Error::Usage(format!("`{}` is not a hex significand", a.significand)))?;
            let hidden = 1u64 << a.fmt.man_bits();
            let class = if a.nan {
                FpClass::NaN
            } else if a.inf {
                FpClass::Inf
            } else if significand == 0 {
                FpClass::Zero
            } else if significand & hidden == 0 {
                FpClass::Subnormal
            } else {
                FpClass::Normal
            };
            let d = DecodedFp {
                negative: a.negative,
                biased_exp: a.biased_exp,
                significand,
                class,
            };
            writeln!(out, "{}", hex(encode(&d, &a.fmt)?, &a.fmt)).map_err(io_err)?;
        }
        Command::Sum(a) => {
            let input = a.input.as_deref();
            let cfg: online_fpadd::TreeConfig = a.config.parse()?;
            let lines = read_input(input, Some(cfg.n_terms()))?;
            let n = cfg.n_terms();
            let spec = a.acc.spec(n, &a.formats.fmt)?;
            let adder = FusedAdder::new(a.formats.fmt, cfg, spec)?
                .with_out_fmt(a.formats.out())
                .with_mode(a.formats.round.into());
            for l in &lines {
                let w = adder.sum(&l.words).map_err(|e| at_line(l.line, input, e))?;
                writeln!(out, "{}", hex(w, &adder.out_fmt)).map_err(io_err)?;
            }
        }
        Command::Oracle(a) => {
            let input = a.input.as_deref();
            let (fmt, out_fmt) = (a.formats.fmt, a.formats.out());
            for l in read_input(input, None)? {
                let word = (|| {
                    let decoded = l.words.iter().map(|&w| decode(w, &fmt)).collect::<Result<Vec<_>, _>>()?;
                    match resolve_specials(&decoded) {
                        Some(s) => special_word(s, &out_fmt),
                        None => Ok(round_exact(&exact_sum(&l.words, &fmt)?, &out_fmt, a.formats.round.into())),
                    }
                })()
                .map_err(|e| at_line(l.line, input, e))?;
                writeln!(out, "{}", hex(word, &out_fmt)).map_err(io_err)?;
            }
        }
        Command::Verify(a) => return verify(a, out),
        Command::Configs { n } => {
            for cfg in online_fpadd::enumerate_configs(n)? {
                writeln!(out, "{cfg}").map_err(io_err)?;
            }
        }
        Command::Sweep(a) => sweep(a, out)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn verify(a: VerifyArgs, out: &mut impl Write) -> online_fpadd::Result<ExitCode> {
    let fmt = a.formats.fmt;
    let spec = a.acc.spec(a.n, &fmt)?;
    let report = analysis::verify(&fmt, &a.formats.out(), &spec, a.formats.round.into(), a.samples, a.seed)?;
    match report.outcome {
        VerifyOutcome::AllEqual => {
            writeln!(
                out,
                "OK: {} configs × {} vectors, all bit-equal",
                report.configs, report.samples
            )
            .map_err(io_err)?;
            Ok(ExitCode::SUCCESS)
        }
        VerifyOutcome::Counterexample { vector, route } => {
            let words: Vec<String> = vector.iter().map(|&w| hex(w, &fmt)).collect();
            writeln!(out, "MISMATCH ({route}): {}", words.join(" ")).map_err(io_err)?;
            Ok(ExitCode::from(1))
        }
        VerifyOutcome::Deltas(deltas) => {
            writeln!(
                out,
                "# {} guard={} N={} samples={} seed={}",
                spec.loss().name(),
                spec.guard_bits(),
                a.n,
                report.samples,
                a.seed
            )
            .map_err(io_err)?;
            writeln!(out, "{:<12} {:>8} {:>9} {:>9}", "route", "max_ulp", "mean_ulp", "vs_serial").map_err(io_err)?;
            for d in deltas {
                writeln!(
                    out,
                    "{:<12} {:>8} {:>9.4} {:>9.4}",
                    d.route, d.max_ulp, d.mean_ulp, d.mismatch_rate
                )
                .map_err(io_err)?;
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn sweep(a: SweepArgs, out: &mut impl Write) -> online_fpadd::Result<()> {
    let fmt = a.formats.fmt;
    let source = match (&a.vectors, a.source) {
        (Some(path), _) => {
            DataSource::Vectors(read_vector_file(path, Some(a.n))?.into_iter().map(|l| l.words).collect())
        }
        (None, Source::Uniform) => DataSource::UniformBits,
        (None, Source::Normal) => DataSource::Normal {
            mean: a.mean,
            std_dev: a.std_dev,
        },
    };
    let mut grid = Vec::new();
    for &m in &a.modes {
        match m {
            Mode::Lossless => grid.push(GridPoint {
                loss: LossPolicy::Lossless,
                guard_bits: 0,
            }),
            lossy => grid.extend(a.guards.iter().map(|&g| GridPoint {
                loss: lossy.into(),
                guard_bits: g,
            })),
        }
    }
    let params = SweepParams {
        n_terms: a.n,
        fmt,
        out_fmt: a.formats.out(),
        mode: a.formats.round.into(),
        grid,
        source,
        samples: a.samples,
        seed: a.seed,
    };
    let report = analysis::sweep(&params)?;
    if let Some(path) = &a.csv {
        write_atomically(path, |w| report.write_csv(w))?;
    }
    write!(out, "{}", report.to_table()).map_err(io_err)?;
    Ok(())
}

/// Writes through a temporary file in the target directory, then renames.
fn write_atomically(
    path: &Path,
    write: impl FnOnce(&mut tempfile::NamedTempFile) -> online_fpadd::Result<()>,
) -> online_fpadd::Result<()> {
    let io_at = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_at)?;
    write(&mut tmp)?;
    tmp.as_file().sync_all().map_err(io_at)?;
    tmp.persist(path).map_err(|e| io_at(e.error))?;
    Ok(())
}
