use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use planrec::eval::{evaluate, mean_report, EvalReport, MeanReport};
use planrec::fixtures::resolve_library_path;
use planrec::io::{self as pio, LabelRecord, SegmentRecord, StreamParser};
use planrec::plan_library::{parse_library_unchecked, LibraryError, PlanLibrary};
use planrec::recognizer::{RecognizeError, Session};
use planrec::smoothing::{collapse_runs, Smoother, DEFAULT_THETA};
use planrec::streamgen::{generate_stream, FramesPerStep, GenConfig, GenError};
use planrec::{
    oracle_candidates, validate_library, NonePolicy, OnDead, RecognizerPolicy, SmoothingConfig,
};

#[derive(Parser)]
#[command(
    name = "planrec",
    version,
    about = "Goal recognition from activity probability streams"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a plan library; violations go to stderr.
    Validate { library: PathBuf },
    /// Label every frame of an observation stream.
    Smooth(SmoothArgs),
    /// Run the full pipeline and write a per-frame trace.
    Recognize(RunConfig),
    /// Generate a synthetic observation stream plus ground truth.
    Gen(GenArgs),
    /// Score a trace against ground truth.
    Eval(EvalArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum NonePolicyArg {
    Skip,
    Keep,
}

impl From<NonePolicyArg> for NonePolicy {
    fn from(v: NonePolicyArg) -> Self {
        match v {
            NonePolicyArg::Skip => NonePolicy::Skip,
            NonePolicyArg::Keep => NonePolicy::Keep,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum OnDeadArg {
    Strict,
    Skip,
    Halt,
}

impl From<OnDeadArg> for OnDead {
    fn from(v: OnDeadArg) -> Self {
        match v {
            OnDeadArg::Strict => OnDead::Strict,
            OnDeadArg::Skip => OnDead::Skip,
            OnDeadArg::Halt => OnDead::Halt,
        }
    }
}

#[derive(Args)]
struct StreamInput {
    /// Library file, or a name inside the fixture directory.
    #[arg(long)]
    library: PathBuf,
    /// Observation stream; `-` reads standard input.
    #[arg(long)]
    stream: PathBuf,
    /// Probability-difference threshold for keeping the previous label.
    #[arg(long, default_value_t = DEFAULT_THETA)]
    theta: f64,
    /// Rescale vectors whose sum is slightly off 1.
    #[arg(long)]
    normalize: bool,
    #[arg(long, value_enum, default_value = "skip")]
    none_policy: NonePolicyArg,
    /// Output file; standard output when absent.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SmoothArgs {
    #[command(flatten)]
    input: StreamInput,
    /// Emit collapsed segments instead of per-frame labels.
    #[arg(long)]
    segments: bool,
}

#[derive(Args)]
struct RunConfig {
    #[command(flatten)]
    input: StreamInput,
    #[arg(long, value_enum, default_value = "strict")]
    on_dead: OnDeadArg,
    /// Cross-check every segment boundary against the brute-force oracle.
    #[arg(long)]
    oracle: bool,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    library: PathBuf,
    #[arg(long)]
    goal: String,
    #[arg(long, default_value_t = 0)]
    plan: usize,
    /// One count for every step, or a comma-separated count per step.
    #[arg(long, default_value = "10")]
    frames_per_step: String,
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    none_gap: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Stream output; standard output when absent.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Ground-truth sidecar; defaults to `<output stem>.truth.jsonl`.
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long, required_unless_present = "batch")]
    trace: Option<PathBuf>,
    #[arg(long, required_unless_present = "batch")]
    truth: Option<PathBuf>,
    /// True goal. In batch mode, defaults to the file name up to the first `.`.
    #[arg(long, required_unless_present = "batch")]
    goal: Option<String>,
    /// Directory of `<name>.trace.jsonl` files with `<name>.truth.jsonl` sidecars.
    #[arg(long, conflicts_with_all = ["trace", "truth"])]
    batch: Option<PathBuf>,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

enum CliError {
    /// Validation failure, oracle mismatch, halted stream.
    Domain(String),
    /// Unreadable or malformed input.
    Format(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Domain(_) => 1,
            CliError::Format(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Domain(m) | CliError::Format(m) => m,
        }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn format_err(context: impl std::fmt::Display, e: impl std::fmt::Display) -> CliError {
    CliError::Format(format!("{context}: {e}"))
}

fn load_library(path: &Path) -> CliResult<PlanLibrary> {
    let resolved = resolve_library_path(path);
    let text = fs::read_to_string(&resolved).map_err(|e| format_err(resolved.display(), e))?;
    let lib = parse_library_unchecked(&text).map_err(|e| format_err(resolved.display(), e))?;
    let violations = validate_library(&lib);
    if violations.is_empty() {
        Ok(lib)
    } else {
        Err(CliError::Domain(format!(
            "{}: {}",
            resolved.display(),
            LibraryError::Invalid(violations)
        )))
    }
}

fn open_input(path: &Path) -> CliResult<Box<dyn BufRead>> {
    if path == Path::new("-") {
        Ok(Box::new(BufReader::new(io::stdin())))
    } else {
        let file = File::open(path).map_err(|e| format_err(path.display(), e))?;
        Ok(Box::new(BufReader::new(file)))
    }
}

struct Output {
    inner: Box<dyn Write>,
    name: String,
    flush_each: bool,
}

impl Output {
    fn create(path: Option<&Path>, flush_each: bool) -> CliResult<Self> {
        let (inner, name): (Box<dyn Write>, String) = match path {
            Some(p) => {
                let file = File::create(p).map_err(|e| format_err(p.display(), e))?;
                (Box::new(BufWriter::new(file)), p.display().to_string())
            }
            None => (Box::new(BufWriter::new(io::stdout())), "<stdout>".into()),
        };
        Ok(Self {
            inner,
            name,
            flush_each,
        })
    }

    fn line(&mut self, line: &str) -> CliResult {
        writeln!(self.inner, "{line}").map_err(|e| format_err(&self.name, e))?;
        if self.flush_each {
            self.flush()?;
        }
        Ok(())
    }

    fn flush(&mut self) -> CliResult {
        self.inner.flush().map_err(|e| format_err(&self.name, e))
    }
}

/// Calls `f` for every observation in the stream, in order.
fn for_each_observation(
    path: &Path,
    lib: &PlanLibrary,
    mut f: impl FnMut(&planrec::FrameObservation) -> CliResult,
) -> CliResult {
    let reader = open_input(path)?;
    let mut parser = StreamParser::new(&lib.alphabet);
    for line in reader.lines() {
        let line = line.map_err(|e| format_err(path.display(), e))?;
        if let Some(obs) = parser
            .push_line(&line)
            .map_err(|e| format_err(path.display(), e))?
        {
            f(&obs)?;
        }
    }
    Ok(())
}

fn smoothing_config(input: &StreamInput) -> CliResult<SmoothingConfig> {
    SmoothingConfig::new(input.theta)
        .map(|c| c.with_normalize(input.normalize))
        .map_err(|e| CliError::Format(e.to_string()))
}

fn run_validate(path: &Path) -> CliResult {
    let resolved = resolve_library_path(path);
    let text = fs::read_to_string(&resolved).map_err(|e| format_err(resolved.display(), e))?;
    let lib = parse_library_unchecked(&text).map_err(|e| format_err(resolved.display(), e))?;
    let violations = validate_library(&lib);
    for v in &violations {
        eprintln!("{}: {v}", resolved.display());
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(CliError::Domain(format!(
            "{} violation(s) in {}",
            violations.len(),
            resolved.display()
        )))
    }
}

fn run_smooth(args: &SmoothArgs) -> CliResult {
    let input = &args.input;
    let lib = load_library(&input.library)?;
    let cfg = smoothing_config(input)?;
    let streaming = input.stream == Path::new("-");
    let mut out = Output::create(input.output.as_deref(), streaming && !args.segments)?;
    let mut smoother = Smoother::new(&lib.alphabet, cfg);
    let mut labels = Vec::new();
    for_each_observation(&input.stream, &lib, |obs| {
        let label = smoother
            .push(obs)
            .map_err(|e| format_err(input.stream.display(), e))?;
        if args.segments {
            labels.push((obs.frame_id, label));
            Ok(())
        } else {
            out.line(&pio::to_line(&LabelRecord {
                frame: obs.frame_id,
                label: lib.alphabet.name(label).to_owned(),
            }))
        }
    })?;
    if args.segments {
        for seg in collapse_runs(&labels, input.none_policy.into(), &lib.alphabet) {
            out.line(&pio::to_line(&SegmentRecord {
                label: lib.alphabet.name(seg.label).to_owned(),
                start_frame: seg.start_frame,
                end_frame: seg.end_frame,
            }))?;
        }
    }
    out.flush()
}

fn run_recognize(args: &RunConfig) -> CliResult {
    let input = &args.input;
    let lib = load_library(&input.library)?;
    let cfg = smoothing_config(input)?;
    let policy = RecognizerPolicy {
        none_policy: input.none_policy.into(),
        on_dead: args.on_dead.into(),
    };
    let mut session =
        Session::new(&lib, cfg, policy).map_err(|e| CliError::Domain(e.to_string()))?;
    let mut out = Output::create(input.output.as_deref(), input.stream == Path::new("-"))?;
    let mut consumed: Vec<String> = Vec::new();
    let mut mismatches = 0usize;

    let result = for_each_observation(&input.stream, &lib, |obs| {
        let record = match session.push(obs) {
            Ok(r) => r,
            Err(e @ RecognizeError::Halted { .. }) => return Err(CliError::Domain(e.to_string())),
            Err(e) => return Err(format_err(input.stream.display(), e)),
        };
        if args.oracle && record.new_segment {
            let outcome = session.last_outcome().expect("frame was observed");
            if outcome.consumed() {
                consumed.push(record.label.clone());
            }
            match oracle_candidates(&lib, &consumed) {
                Ok(expected) if expected == record.candidate_set() => {}
                Ok(expected) => {
                    mismatches += 1;
                    eprintln!(
                        "oracle mismatch at frame {}: recognizer {:?}, oracle {:?}",
                        record.frame, record.candidates, expected.goals
                    );
                }
                Err(e) => {
                    mismatches += 1;
                    eprintln!("oracle rejected segments at frame {}: {e}", record.frame);
                }
            }
        }
        out.line(&pio::to_line(&record))
    });
    out.flush()?;
    result?;
    if mismatches > 0 {
        return Err(CliError::Domain(format!(
            "{mismatches} oracle mismatch(es)"
        )));
    }
    Ok(())
}

fn parse_frames_per_step(raw: &str) -> CliResult<FramesPerStep> {
    let counts: Result<Vec<usize>, _> = raw.split(',').map(|s| s.trim().parse()).collect();
    match counts {
        Ok(v) if v.len() == 1 && !raw.contains(',') => Ok(FramesPerStep::Uniform(v[0])),
        Ok(v) => Ok(FramesPerStep::PerStep(v)),
        Err(e) => Err(format_err(format!("--frames-per-step {raw:?}"), e)),
    }
}

fn default_truth_path(output: &Path) -> PathBuf {
    let name = output
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let stem = name
        .strip_suffix(".jsonl")
        .or_else(|| name.strip_suffix(".txt"))
        .unwrap_or(&name);
    output.with_file_name(format!("{stem}.truth.jsonl"))
}

fn run_gen(args: &GenArgs) -> CliResult {
    let lib = load_library(&args.library)?;
    let cfg = GenConfig {
        frames_per_step: parse_frames_per_step(&args.frames_per_step)?,
        noise: args.noise,
        none_gap: args.none_gap,
        seed: args.seed,
    };
    let generated = generate_stream(&lib, &args.goal, args.plan, &cfg).map_err(|e| match e {
        GenError::Library(e) => CliError::Domain(e.to_string()),
        e => CliError::Format(e.to_string()),
    })?;

    let mut out = Output::create(args.output.as_deref(), false)?;
    for obs in &generated.frames {
        out.line(&pio::observation_line(obs))?;
    }
    out.flush()?;

    let truth_path = match (&args.truth, &args.output) {
        (Some(t), _) => Some(t.clone()),
        (None, Some(o)) => Some(default_truth_path(o)),
        (None, None) => None,
    };
    if let Some(path) = truth_path {
        let mut truth = Output::create(Some(&path), false)?;
        for &(frame, class) in &generated.truth {
            truth.line(&pio::to_line(&LabelRecord {
                frame,
                label: lib.alphabet.name(class).to_owned(),
            }))?;
        }
        truth.flush()?;
    }
    Ok(())
}

fn eval_files(trace: &Path, truth: &Path, goal: &str) -> CliResult<EvalReport> {
    let records =
        pio::read_trace(open_input(trace)?).map_err(|e| format_err(trace.display(), e))?;
    let labels =
        pio::read_labels(open_input(truth)?).map_err(|e| format_err(truth.display(), e))?;
    let labels: Vec<String> = labels.into_iter().map(|l| l.label).collect();
    evaluate(&records, &labels, goal).map_err(|e| format_err(trace.display(), e))
}

#[derive(Serialize)]
struct BatchRow {
    file: String,
    report: EvalReport,
}

#[derive(Serialize)]
struct BatchReport {
    files: Vec<BatchRow>,
    mean: Option<MeanReport>,
}

fn run_eval(args: &EvalArgs) -> CliResult {
    let mut out = Output::create(args.output.as_deref(), false)?;
    let doc = match &args.batch {
        None => {
            let (trace, truth, goal) = (
                args.trace.as_ref().expect("required by clap"),
                args.truth.as_ref().expect("required by clap"),
                args.goal.as_ref().expect("required by clap"),
            );
            serde_json::to_string_pretty(&eval_files(trace, truth, goal)?)
        }
        Some(dir) => {
            let mut traces: Vec<PathBuf> = fs::read_dir(dir)
                .map_err(|e| format_err(dir.display(), e))?
                .filter_map(|entry| entry.ok().map(|e| e.path()))
                .filter(|p| {
                    p.file_name()
                        .is_some_and(|n| n.to_string_lossy().ends_with(".trace.jsonl"))
                })
                .collect();
            traces.sort();
            let mut rows = Vec::new();
            let mut reports = Vec::new();
            for trace in traces {
                let file = trace
                    .file_name()
                    .expect("filtered")
                    .to_string_lossy()
                    .into_owned();
                let name = file.trim_end_matches(".trace.jsonl");
                let truth = trace.with_file_name(format!("{name}.truth.jsonl"));
                let goal = args
                    .goal
                    .clone()
                    .unwrap_or_else(|| name.split('.').next().unwrap_or(name).to_owned());
                let report = eval_files(&trace, &truth, &goal)?;
                reports.push(report.clone());
                rows.push(BatchRow { file, report });
            }
            serde_json::to_string_pretty(&BatchReport {
                files: rows,
                mean: mean_report(&reports),
            })
        }
    }
    .expect("report serializes");
    out.line(&doc)?;
    out.flush()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Validate { library } => run_validate(library),
        Command::Smooth(args) => run_smooth(args),
        Command::Recognize(args) => run_recognize(args),
        Command::Gen(args) => run_gen(args),
        Command::Eval(args) => run_eval(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("planrec: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
