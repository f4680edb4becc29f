use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use freelab::experiments::{run_experiment, write_report, ExperimentConfig, ReportFormat};
use freelab::freemoments::{
    free_additive_convolution, free_multiplicative_convolution, free_poly_moment, mp_moments,
    semicircle_moments, NoncommPolynomial, NoncommWord,
};
use freelab::laws::Law;
use freelab::perm::{CycleType, Permutation};
use freelab::weingarten::{asymptotic_phi, weingarten_table_with_cap, DEFAULT_WG_CAP};
use num_complex::Complex64;

const SCHEMA: &str = include_str!("schema.json");

#[derive(Parser)]
#[command(name = "freelab", version, about = "Free probability and random-matrix toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact Weingarten values Wg(N, α) per cycle type, as TSV.
    Weingarten {
        #[arg(long)]
        n: usize,
        #[arg(long = "N")]
        big_n: usize,
        /// Largest n accepted (at most 6).
        #[arg(long, default_value_t = DEFAULT_WG_CAP)]
        cap: usize,
    },
    /// Leading coefficient φ(α) = ∏ (−1)^{ℓ−1} Catalan(ℓ−1).
    Phi {
        /// Cycle type such as `3,1`.
        #[arg(long, conflicts_with = "perm", required_unless_present = "perm")]
        cycle_type: Option<String>,
        /// Permutation in cycle notation such as `(1 2)(3)`.
        #[arg(long)]
        perm: Option<String>,
    },
    /// Marčenko–Pastur moments m_1..m_K as a JSON array.
    MpMoments {
        #[arg(long)]
        lambda: f64,
        #[arg(long = "K")]
        k: usize,
    },
    /// Semicircle moments m_1..m_K as a JSON array.
    SemicircleMoments {
        #[arg(long = "K")]
        k: usize,
    },
    /// φ of a word or polynomial in free w and y.
    FreeMoment {
        /// A word in W and Y, e.g. `WYWY`.
        #[arg(long, group = "input")]
        word: Option<String>,
        /// Exponents of the alternating word W^{k_1} Y ⋯ W^{k_n} Y.
        #[arg(long, group = "input", value_delimiter = ',')]
        k: Option<Vec<usize>>,
        /// A polynomial, e.g. `2*WY - YW + 1`.
        #[arg(long, group = "input")]
        poly: Option<String>,
        /// Law of w.
        #[arg(long)]
        w: Law,
        /// Law of y.
        #[arg(long)]
        y: Law,
    },
    /// Free additive or multiplicative convolution, as a JSON array.
    Convolve {
        #[arg(long)]
        op: ConvOp,
        #[arg(long)]
        a: Law,
        #[arg(long)]
        b: Law,
        #[arg(long = "K")]
        k: usize,
    },
    /// Run an experiment from a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Report path; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        /// Overrides master_seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Keep the wall time in the report. Reports are otherwise
        /// byte-identical across runs.
        #[arg(long)]
        timing: bool,
    },
    /// JSON schema of experiment configs and reports.
    ReportSchema,
}

#[derive(Clone, Copy, ValueEnum)]
enum ConvOp {
    Add,
    Mul,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

fn json_array(values: &[f64]) -> anyhow::Result<String> {
    Ok(serde_json::to_string(values)?)
}

fn complex_json(z: Complex64) -> String {
    if z.im == 0.0 {
        serde_json::json!(z.re).to_string()
    } else {
        serde_json::json!({ "re": z.re, "im": z.im }).to_string()
    }
}

enum Outcome {
    Ok,
    Failed,
}

fn run(cli: Cli, out: &mut impl Write) -> anyhow::Result<Outcome> {
    match cli.command {
        Command::Weingarten { n, big_n, cap } => {
            let table = weingarten_table_with_cap(n, big_n, cap)?;
            writeln!(out, "cycle_type\twg")?;
            for (t, v) in table.iter() {
                writeln!(out, "{t}\t{v}")?;
            }
        }
        Command::Phi { cycle_type, perm } => {
            let t: CycleType = match (cycle_type, perm) {
                (Some(s), _) => s.parse()?,
                (None, Some(p)) => p.parse::<Permutation>()?.cycle_type(),
                (None, None) => bail!("give --cycle-type or --perm"),
            };
            writeln!(out, "{}", asymptotic_phi(&t))?;
        }
        Command::MpMoments { lambda, k } => {
            writeln!(out, "{}", json_array(mp_moments(lambda, k)?.as_slice())?)?;
        }
        Command::SemicircleMoments { k } => {
            writeln!(out, "{}", json_array(semicircle_moments(k).as_slice())?)?;
        }
        Command::FreeMoment {
            word,
            k,
            poly,
            w,
            y,
        } => {
            let p = match (word, k, poly) {
                (Some(s), _, _) => NoncommPolynomial::word(s.parse::<NoncommWord>()?),
                (_, Some(k), _) => NoncommPolynomial::word(NoncommWord::alternating(&k)),
                (_, _, Some(s)) => s.parse()?,
                _ => bail!("give one of --word, --k or --poly"),
            };
            let order = p.max_word_len().max(1);
            let value = free_poly_moment(&p, &w.moments(order)?, &y.moments(order)?)?;
            writeln!(out, "{}", complex_json(value))?;
        }
        Command::Convolve { op, a, b, k } => {
            let (ma, mb) = (a.moments(k)?, b.moments(k)?);
            let m = match op {
                ConvOp::Add => free_additive_convolution(&ma, &mb)?,
                ConvOp::Mul => {
                    if !a.is_nonnegative() && !b.is_nonnegative() {
                        log::warn!("neither {a} nor {b} is supported on [0, ∞); the result need not be a measure");
                    }
                    free_multiplicative_convolution(&ma, &mb)?
                }
            };
            writeln!(out, "{}", json_array(m.as_slice())?)?;
        }
        Command::Run {
            config,
            out: path,
            format,
            seed,
            timing,
        } => {
            let text = fs::read_to_string(&config)
                .with_context(|| format!("reading {}", config.display()))?;
            let mut cfg = ExperimentConfig::from_json(&text)?;
            if let Some(s) = seed {
                cfg.master_seed = s;
            }
            let mut rec = run_experiment(&cfg)?;
            if let Some(t) = rec.wall_time_s {
                eprintln!("wall time: {t:.3}s");
            }
            if !timing {
                rec.wall_time_s = None;
            }
            let format = match format {
                Format::Json => ReportFormat::Json,
                Format::Csv => ReportFormat::Csv,
            };
            match path {
                Some(p) => {
                    let mut buf = Vec::new();
                    write_report(&rec, format, &mut buf)?;
                    fs::write(&p, buf).with_context(|| format!("writing {}", p.display()))?;
                }
                None => write_report(&rec, format, &mut *out)?,
            }
            for (name, ok) in &rec.pass_flags {
                if !ok {
                    eprintln!("FAILED: {name}");
                }
            }
            if !rec.all_pass() {
                return Ok(Outcome::Failed);
            }
        }
        Command::ReportSchema => {
            out.write_all(SCHEMA.as_bytes())?;
        }
    }
    Ok(Outcome::Ok)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let stdout = io::stdout();
    let mut lock = stdout.lock();
    match run(cli, &mut lock) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::Failed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
