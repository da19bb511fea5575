use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::exit;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use cli_harness::engine::output_route;
use cli_harness::record::manifest_path;
use cli_harness::{
    emit_plot_data, parse_spec_text, run_spec, run_specs, study_conjecture_scan,
    study_flip_scaling, study_full, Engine, Error, ExperimentSpec, Generator, PlotKind, Result,
    RunManifest, ScanMode,
};
use ring_core::ProtocolParams;

#[derive(Parser)]
#[command(
    name = "herman-kit",
    version,
    about = "Simulation, exact solving, closed forms and bounds for the \
             self-stabilizing token ring"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Starting configuration and protocol shared by the single-engine
/// subcommands. With neither --r nor --lambda the synchronous protocol at
/// r = 0.5 is used.
#[derive(Args)]
struct ConfigArgs {
    /// Ring sizes to sweep, comma separated (each odd)
    #[arg(long, value_delimiter = ',')]
    n: Vec<usize>,
    /// Configuration family: equilateral | full | random_bits | flip_m
    #[arg(long, default_value = "equilateral")]
    generator: String,
    /// Flip count for --generator flip_m
    #[arg(long)]
    m: Option<usize>,
    /// Explicit token positions (1-based, comma separated); implies an
    /// explicit start and overrides --generator
    #[arg(long, value_delimiter = ',')]
    tokens: Option<Vec<usize>>,
    /// Explicit bit string such as 01101; fixes the ring size
    #[arg(long)]
    bits: Option<String>,
    /// Pass probability of the synchronous protocol, 0 < r < 1
    #[arg(long)]
    r: Option<f64>,
    /// Firing rate of the asynchronous protocol, > 0
    #[arg(long)]
    lambda: Option<f64>,
    /// Base seed; per-job seeds are mixed from (seed, line, n)
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Append result records here as JSON lines instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the expected stabilization time by Monte Carlo
    Simulate {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Independent trials per ring size
        #[arg(long, default_value_t = 1000)]
        trials: u64,
    },
    /// Solve the absorbing chain for the exact expected time
    Exact {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Refuse sweeps whose reachable state space exceeds this
        #[arg(long)]
        budget_states: Option<usize>,
    },
    /// Evaluate the closed-form expected time
    Formula {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// finite (exact on the ring) or continuous (limit expression)
        #[arg(long, default_value = "finite")]
        kind: String,
        /// Series tolerance for --kind continuous
        #[arg(long)]
        tolerance: Option<f64>,
        /// Series term cap for --kind continuous
        #[arg(long)]
        cap: Option<usize>,
        /// Also write the finite expression term by term as CSV
        /// (--kind finite, single ring size)
        #[arg(long)]
        terms_csv: Option<PathBuf>,
    },
    /// Print the closed-form bounds for each ring size
    Bounds {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Scaling study: mean stabilization time after m random flips
    StudyFlip {
        /// Number of flipped bits
        #[arg(long, default_value_t = 1)]
        m: usize,
        /// Ring sizes (at least 3, spanning at least 4x)
        #[arg(long, value_delimiter = ',', default_value = "33,65,129,257")]
        n: Vec<usize>,
        #[arg(long)]
        r: Option<f64>,
        #[arg(long)]
        lambda: Option<f64>,
        /// Trials per sampled configuration
        #[arg(long, default_value_t = 800)]
        trials: u64,
        /// Random flip-m configurations per ring size
        #[arg(long, default_value_t = 32)]
        configs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Append the report here as a JSON line instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// All-tokens study: mean, tail and token-count decay against bounds
    StudyFull {
        #[arg(long, default_value_t = 101)]
        n: usize,
        #[arg(long)]
        r: Option<f64>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long, default_value_t = 20_000)]
        trials: u64,
        /// Trials used for the token-count curve
        #[arg(long, default_value_t = 2000)]
        curve_trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Scan for the worst start at one ring size
    StudyConjecture {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        r: Option<f64>,
        #[arg(long)]
        lambda: Option<f64>,
        /// exact (all three-token classes) or mc (sampled larger starts)
        #[arg(long, default_value = "exact")]
        mode: String,
        /// Position sets to sample in mc mode
        #[arg(long, default_value_t = 200)]
        samples: usize,
        /// Token count per sampled set in mc mode (odd, >= 5)
        #[arg(long, default_value_t = 5)]
        tokens: usize,
        /// Trials per sampled set in mc mode
        #[arg(long, default_value_t = 2000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// State budget for the exact mode
        #[arg(long)]
        budget_states: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render stored result records to plot-ready CSV
    PlotData {
        /// JSON-lines record file written by the other subcommands
        #[arg(long)]
        records: PathBuf,
        /// scaling (n,mean,ci_lo,ci_hi,bound) or curve (t,S_emp,S_tilde)
        #[arg(long)]
        kind: String,
        /// CSV destination, stdout if omitted
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Execute a spec: one key=value experiment per line
    Run {
        /// Spec file to execute
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Spec text given inline (newlines separate experiments)
        #[arg(long)]
        inline: Option<String>,
        /// Default record destination for lines without out=
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn params_from(r: Option<f64>, lambda: Option<f64>) -> Result<ProtocolParams> {
    match (r, lambda) {
        (Some(_), Some(_)) => Err(Error::Invalid("give --r or --lambda, not both".into())),
        (Some(r), None) => Ok(ProtocolParams::sync(r)?),
        (None, Some(l)) => Ok(ProtocolParams::asynchronous(l)?),
        (None, None) => Ok(ProtocolParams::sync(0.5).unwrap()),
    }
}

fn parse_bit_string(s: &str) -> Result<Vec<u8>> {
    s.chars()
        .map(|c| match c {
            '0' => Ok(0),
            '1' => Ok(1),
            other => Err(Error::Invalid(format!(
                "bit strings contain only 0 and 1, got `{other}`"
            ))),
        })
        .collect()
}

impl ConfigArgs {
    fn to_spec(&self, engine: Engine, budget_states: usize) -> Result<ExperimentSpec> {
        if self.tokens.is_some() && self.bits.is_some() {
            return Err(Error::Invalid("give --tokens or --bits, not both".into()));
        }
        let generator = if let Some(tokens) = &self.tokens {
            Generator::ExplicitTokens(tokens.clone())
        } else if let Some(bits) = &self.bits {
            Generator::ExplicitBits(parse_bit_string(bits)?)
        } else {
            match self.generator.as_str() {
                "equilateral" => Generator::Equilateral,
                "full" => Generator::Full,
                "random_bits" => Generator::RandomBits,
                "flip_m" => Generator::FlipM(
                    self.m
                        .ok_or_else(|| Error::Invalid("the flip_m generator needs --m".into()))?,
                ),
                "explicit" => {
                    return Err(Error::Invalid(
                        "the explicit generator needs --tokens or --bits".into(),
                    ))
                }
                other => {
                    return Err(Error::Invalid(format!(
                        "unknown generator `{other}`; expected equilateral, full, \
                         random_bits, flip_m or explicit"
                    )))
                }
            }
        };
        let n_list = if let Generator::ExplicitBits(bits) = &generator {
            if !self.n.is_empty() && self.n != [bits.len()] {
                return Err(Error::Invalid(format!(
                    "the bit string fixes the ring size at {}, but --n says {:?}",
                    bits.len(),
                    self.n
                )));
            }
            vec![bits.len()]
        } else if self.n.is_empty() {
            return Err(Error::Invalid("give at least one ring size via --n".into()));
        } else {
            self.n.clone()
        };
        let spec = ExperimentSpec {
            generator,
            n_list,
            params: params_from(self.r, self.lambda)?,
            engine,
            base_seed: self.seed,
            output_path: self.out.clone(),
            budget_states,
            line: 0,
        };
        spec.validate()?;
        Ok(spec)
    }
}

fn default_budget() -> usize {
    exact_analysis::SolveOptions::default().budget_states
}

/// HERMAN_KIT_THREADS caps the worker pool; unset leaves the default
/// (one worker per core).
fn init_thread_pool() -> Result<()> {
    let Ok(raw) = std::env::var("HERMAN_KIT_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw.trim().parse().ok().filter(|&t| t > 0).ok_or_else(|| {
        Error::Invalid(format!(
            "HERMAN_KIT_THREADS must be a positive integer, got `{raw}`"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::Engine(format!("thread pool: {e}")))
}

/// Runs one flag-built spec and prints any unrouted records to stdout.
fn run_and_print(spec: &ExperimentSpec) -> Result<()> {
    let records = run_spec(spec)?;
    match &spec.output_path {
        None => {
            for record in &records {
                println!("{}", record.to_json_line());
            }
        }
        Some(path) => {
            eprintln!("{} records appended to {}", records.len(), path.display());
        }
    }
    Ok(())
}

/// Study reports go out the same way records do: one JSON line, either to
/// stdout or appended to a file with a manifest sidecar.
fn emit_report<T: Serialize>(
    report: &T,
    out: Option<&Path>,
    seed: u64,
    source: &str,
) -> Result<()> {
    let line = serde_json::to_string(report)
        .map_err(|e| Error::Engine(format!("serializing the report: {e}")))?;
    let Some(path) = out else {
        println!("{line}");
        return Ok(());
    };
    let mut f = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
    writeln!(f, "{line}").map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
    let manifest = RunManifest::new(vec![seed], source);
    let mpath = manifest_path(path);
    fs::write(&mpath, serde_json::to_string_pretty(&manifest).unwrap())
        .map_err(|e| Error::io(format!("writing {}", mpath.display()), e))?;
    eprintln!("report appended to {}", path.display());
    Ok(())
}

fn real_main(cli: Cli) -> Result<()> {
    init_thread_pool()?;
    match cli.command {
        Command::Simulate { cfg, trials } => {
            let spec = cfg.to_spec(Engine::MonteCarlo { trials }, default_budget())?;
            run_and_print(&spec)
        }
        Command::Exact { cfg, budget_states } => {
            let budget = budget_states.unwrap_or_else(default_budget);
            let spec = cfg.to_spec(Engine::Exact, budget)?;
            run_and_print(&spec)
        }
        Command::Formula {
            cfg,
            kind,
            tolerance,
            cap,
            terms_csv,
        } => {
            let engine = match kind.as_str() {
                "finite" => Engine::FiniteFormula,
                "continuous" => Engine::ContinuousFormula {
                    truncation_cap: cap.unwrap_or(20_000),
                    tolerance: tolerance.unwrap_or(1e-8),
                },
                other => {
                    return Err(Error::Invalid(format!(
                        "unknown formula kind `{other}`; expected finite or continuous"
                    )))
                }
            };
            let spec = cfg.to_spec(engine, default_budget())?;
            run_and_print(&spec)?;
            if let Some(csv_path) = terms_csv {
                write_terms(&spec, &kind, &csv_path)?;
            }
            Ok(())
        }
        Command::Bounds { cfg } => {
            let spec = cfg.to_spec(Engine::Bounds, default_budget())?;
            run_and_print(&spec)
        }
        Command::StudyFlip {
            m,
            n,
            r,
            lambda,
            trials,
            configs,
            seed,
            out,
        } => {
            let params = params_from(r, lambda)?;
            let report = study_flip_scaling(m, &n, &params, trials, configs, seed)?;
            eprintln!(
                "flip study: fit against n r2={:.4}, against n^2 r2={:.4}",
                report.linear_fit.r_squared, report.quadratic_fit.r_squared
            );
            emit_report(&report, out.as_deref(), seed, "study-flip")
        }
        Command::StudyFull {
            n,
            r,
            lambda,
            trials,
            curve_trials,
            seed,
            out,
        } => {
            let params = params_from(r, lambda)?;
            let report = study_full(n, &params, trials, curve_trials, seed)?;
            eprintln!(
                "full study: mean within bound: {}, tail below 1/2: {}",
                report.ci95_upper_within_mean_bound, report.tail_below_half
            );
            emit_report(&report, out.as_deref(), seed, "study-full")
        }
        Command::StudyConjecture {
            n,
            r,
            lambda,
            mode,
            samples,
            tokens,
            trials,
            seed,
            budget_states,
            out,
        } => {
            let params = params_from(r, lambda)?;
            let scan_mode = match mode.as_str() {
                "exact" => ScanMode::ExactThreeToken,
                "mc" => ScanMode::MonteCarlo { tokens },
                other => {
                    return Err(Error::Invalid(format!(
                        "unknown scan mode `{other}`; expected exact or mc"
                    )))
                }
            };
            let budget = budget_states.unwrap_or_else(default_budget);
            let report =
                study_conjecture_scan(n, &params, scan_mode, samples, trials, seed, budget)?;
            eprintln!("{}", report.statement);
            emit_report(&report, out.as_deref(), seed, "study-conjecture")
        }
        Command::PlotData { records, kind, out } => {
            let kind = PlotKind::from_str(&kind)?;
            match out {
                None => {
                    let stdout = std::io::stdout();
                    let mut lock = stdout.lock();
                    emit_plot_data(&records, kind, &mut lock)
                }
                Some(path) => {
                    let mut f = fs::File::create(&path)
                        .map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
                    emit_plot_data(&records, kind, &mut f)?;
                    eprintln!("plot data written to {}", path.display());
                    Ok(())
                }
            }
        }
        Command::Run { spec, inline, out } => {
            let (text, source) = match (spec, inline) {
                (Some(path), None) => {
                    let text = fs::read_to_string(&path)
                        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
                    (text, path.display().to_string())
                }
                (None, Some(literal)) => (literal, "inline".to_string()),
                _ => {
                    return Err(Error::Invalid(
                        "give exactly one of --spec FILE or --inline TEXT".into(),
                    ))
                }
            };
            let specs = parse_spec_text(&text)?;
            let records = run_specs(&specs, out.as_deref(), &source)?;
            let mut to_stdout = 0usize;
            for record in &records {
                let spec = specs
                    .iter()
                    .find(|s| s.line == record.line)
                    .expect("record lines come from the parsed specs");
                if output_route(spec, out.as_deref()).is_none() {
                    println!("{}", record.to_json_line());
                    to_stdout += 1;
                }
            }
            eprintln!(
                "{} records from {} experiments ({} persisted, {} to stdout)",
                records.len(),
                specs.len(),
                records.len() - to_stdout,
                to_stdout
            );
            Ok(())
        }
    }
}

/// The finite expression, term by term, for a single configuration.
fn write_terms(spec: &ExperimentSpec, kind: &str, csv_path: &Path) -> Result<()> {
    if kind != "finite" {
        return Err(Error::Invalid("--terms-csv needs --kind finite".into()));
    }
    let [n] = spec.n_list[..] else {
        return Err(Error::Invalid(
            "--terms-csv needs exactly one ring size".into(),
        ));
    };
    let ProtocolParams::Synchronous { r } = spec.params else {
        return Err(Error::Invalid(
            "the finite expression is synchronous; give --r, not --lambda".into(),
        ));
    };
    let c = spec.config_for(n)?;
    // a single token is already stable: the expression is empty
    let terms = if c.token_count() == 1 {
        Vec::new()
    } else {
        pairing_formulas::finite_expression_terms(&c, r)?
    };
    let mut f = fs::File::create(csv_path)
        .map_err(|e| Error::io(format!("creating {}", csv_path.display()), e))?;
    pairing_formulas::write_terms_csv(&mut f, &terms)
        .map_err(|e| Error::io(format!("writing {}", csv_path.display()), e))?;
    eprintln!("{} terms written to {}", terms.len(), csv_path.display());
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = real_main(cli) {
        eprintln!("error: {e}");
        exit(e.exit_code());
    }
}
