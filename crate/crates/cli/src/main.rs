use std::fs;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use vitrain::{io as formats, trainer, viterbi, Error, HmmModel, ObservationSequence, TrainingConfig};

/// Viterbi training for HTK-style HMMs with diagonal-Gaussian states.
#[derive(Debug, Parser)]
#[command(name = "vitrain", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Bootstrap Gaussians from a uniform segmentation; keep the prototype's transitions.
    Init(InitArgs),
    /// Initialize, then iterate alignment and re-estimation until convergence.
    Train(TrainArgs),
    /// Compute the best state sequence for a model.
    Align(AlignArgs),
}

#[derive(Debug, Args)]
struct InitArgs {
    #[arg(long)]
    obs: PathBuf,
    #[arg(long)]
    proto: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = vitrain::DEFAULT_VARIANCE_FLOOR, value_parser = positive_f64)]
    variance_floor: f64,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    obs: PathBuf,
    #[arg(long)]
    proto: PathBuf,
    /// Trained model output.
    #[arg(long)]
    out: PathBuf,
    /// Also write the iteration report here (it always goes to stdout).
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0e-4, value_parser = positive_f64)]
    epsilon: f64,
    #[arg(long = "max-iter", default_value_t = 20, value_parser = clap::value_parser!(u32).range(1..))]
    max_iter: u32,
    #[arg(long, default_value_t = vitrain::DEFAULT_VARIANCE_FLOOR, value_parser = positive_f64)]
    variance_floor: f64,
    /// Dump every iteration's trellis to stdout.
    #[arg(long)]
    trace: bool,
}

#[derive(Debug, Args)]
struct AlignArgs {
    #[arg(long)]
    obs: PathBuf,
    #[arg(long)]
    model: PathBuf,
    /// Alignment output.
    #[arg(long)]
    out: PathBuf,
    /// Dump the trellis to stdout.
    #[arg(long)]
    trace: bool,
}

fn positive_f64(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("'{s}' is not a number"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{v} is not positive"))
    }
}

const EXIT_IO: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_TOO_FEW_FRAMES: u8 = 3;
const EXIT_DEAD_TRELLIS: u8 = 4;
const EXIT_NOT_CONVERGED: u8 = 5;
const EXIT_USAGE: u8 = 64;

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Io(_) => EXIT_IO,
        Error::TooFewFrames { .. } => EXIT_TOO_FEW_FRAMES,
        Error::DeadTrellis { .. } | Error::CorruptTrellis { .. } => EXIT_DEAD_TRELLIS,
        Error::TrainingAborted { source, .. } => exit_code(source),
        _ => EXIT_VALIDATION,
    }
}

struct Failure {
    context: String,
    error: Error,
}

trait Context<T> {
    fn context(self, what: impl FnOnce() -> String) -> Result<T, Failure>;
}

impl<T> Context<T> for vitrain::Result<T> {
    fn context(self, what: impl FnOnce() -> String) -> Result<T, Failure> {
        self.map_err(|error| Failure { context: what(), error })
    }
}

fn read_obs(path: &Path) -> Result<ObservationSequence, Failure> {
    let file = fs::File::open(path).map_err(Error::from).context(|| path.display().to_string())?;
    formats::read_observations(BufReader::new(file)).context(|| path.display().to_string())
}

fn read_model(path: &Path) -> Result<HmmModel, Failure> {
    let file = fs::File::open(path).map_err(Error::from).context(|| path.display().to_string())?;
    formats::read_model(BufReader::new(file)).context(|| path.display().to_string())
}

/// Renders into memory first so a failed run never leaves a partial file.
fn write_file(path: &Path, render: impl FnOnce(&mut Vec<u8>) -> vitrain::Result<()>) -> Result<(), Failure> {
    let mut buf = Vec::new();
    render(&mut buf).context(|| path.display().to_string())?;
    fs::write(path, buf).map_err(Error::from).context(|| path.display().to_string())
}

fn run_init(args: &InitArgs) -> Result<u8, Failure> {
    let obs = read_obs(&args.obs)?;
    let proto = read_model(&args.proto)?;
    let config = TrainingConfig { variance_floor: args.variance_floor, ..Default::default() };
    let model = trainer::initialize(&obs, &proto, &config).context(|| "init".into())?;
    write_file(&args.out, |w| formats::write_model(&model, w))?;
    Ok(0)
}

fn run_train(args: &TrainArgs, stdout: &mut Vec<u8>) -> Result<u8, Failure> {
    let obs = read_obs(&args.obs)?;
    let proto = read_model(&args.proto)?;
    let config = TrainingConfig {
        epsilon: args.epsilon,
        max_iterations: args.max_iter as usize,
        variance_floor: args.variance_floor,
    };

    let mut trace_err = None;
    let mut sink = |it: &trainer::IterationTrace<'_>| {
        if !args.trace || trace_err.is_some() {
            return;
        }
        let res = (|| -> vitrain::Result<()> {
            writeln!(stdout, "TRACE ITER {}", it.iteration)?;
            formats::write_trace(it.trellis, &mut *stdout)?;
            writeln!(stdout, "TRACE LOGPROB {} {:?}", it.iteration, it.alignment.log_score)?;
            Ok(())
        })();
        trace_err = res.err();
    };
    let outcome = trainer::train_with_trace(&obs, &proto, &config, &mut sink);
    if let Some(e) = trace_err {
        return Err(Failure { context: "stdout".into(), error: e });
    }
    let (model, report) = outcome.context(|| "train".into())?;

    write_file(&args.out, |w| formats::write_model(&model, w))?;
    if let Some(path) = &args.report {
        write_file(path, |w| formats::write_report(&report, w))?;
    }
    formats::write_report(&report, &mut *stdout).context(|| "stdout".into())?;
    Ok(if report.converged { 0 } else { EXIT_NOT_CONVERGED })
}

fn run_align(args: &AlignArgs, stdout: &mut Vec<u8>) -> Result<u8, Failure> {
    let obs = read_obs(&args.obs)?;
    let model = read_model(&args.model)?;
    let (result, trellis) = viterbi::align_with_trellis(&model, &obs).context(|| "align".into())?;
    write_file(&args.out, |w| formats::write_alignment(&result, w))?;
    if args.trace {
        formats::write_trace(&trellis, &mut *stdout).context(|| "stdout".into())?;
    }
    writeln!(stdout, "LOGPROB {:?}", result.log_score)
        .map_err(Error::from)
        .context(|| "stdout".into())?;
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };

    // stdout is buffered so a failing run never prints partial tables
    let mut stdout = Vec::new();
    let outcome = match &cli.command {
        Command::Init(args) => run_init(args),
        Command::Train(args) => run_train(args, &mut stdout),
        Command::Align(args) => run_align(args, &mut stdout),
    };
    match outcome {
        Ok(code) => {
            if let Err(e) = io::stdout().lock().write_all(&stdout) {
                eprintln!("vitrain: error: stdout: {e}");
                return ExitCode::from(EXIT_IO);
            }
            if code == EXIT_NOT_CONVERGED {
                eprintln!("vitrain: training did not converge");
            }
            ExitCode::from(code)
        }
        Err(Failure { context, error }) => {
            eprintln!("vitrain: error: {context}: {error}");
            ExitCode::from(exit_code(&error))
        }
    }
}
