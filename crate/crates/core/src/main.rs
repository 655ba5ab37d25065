use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sarcd::pipeline::{self, annotate, eval, io, PipelineConfig};
use sarcd::synth::{self, SceneSpec};
use sarcd::Error;

#[derive(Parser)]
#[command(name = "sarcd", version, about = "Moving-target change detection for circular SAR video")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the detector over a directory of frames.
    Detect(DetectArgs),
    /// Render a synthetic sequence with ground truth.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Score detections against ground truth; prints JSON to stdout.
    Eval {
        #[arg(long)]
        detections: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        radius: f64,
        /// First frame to score. Frame 0 has no predecessor and never
        /// carries detections.
        #[arg(long, default_value_t = 1)]
        first_frame: usize,
    },
    /// Draw detection markers onto the input frames.
    Annotate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        detections: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
}

#[derive(Args)]
struct DetectArgs {
    #[arg(long, required_unless_present = "print_default_config")]
    input: Option<PathBuf>,
    /// JSON config; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, required_unless_present = "print_default_config")]
    output: Option<PathBuf>,
    /// Also write annotated frames.
    #[arg(long)]
    annotate: bool,
    /// Print the full default config as JSON and exit.
    #[arg(long)]
    print_default_config: bool,
}

enum Failure {
    Input(Error),
    Processing(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_input() {
            Failure::Input(e)
        } else {
            Failure::Processing(e)
        }
    }
}

/// Bad config or scene files are input errors whatever their cause.
fn input(e: Error) -> Failure {
    Failure::Input(e)
}

fn stdout_line(text: &str) -> Result<(), Failure> {
    let mut out = std::io::stdout().lock();
    writeln!(out, "{text}").map_err(|e| Failure::Processing(Error::Io { path: "<stdout>".into(), source: e }))
}

fn detect(args: DetectArgs) -> Result<(), Failure> {
    if args.print_default_config {
        return stdout_line(&PipelineConfig::default().to_json_pretty());
    }
    let (Some(input_dir), Some(output)) = (args.input, args.output) else {
        unreachable!("clap enforces --input and --output");
    };
    let config = match &args.config {
        Some(path) => PipelineConfig::load(path).map_err(input)?,
        None => PipelineConfig::default(),
    };
    let summary = pipeline::detect_directory(&input_dir, &config, &output, args.annotate)?;
    for w in &summary.warnings {
        eprintln!("warning: {w}");
    }
    eprintln!(
        "{} frames, {} detections -> {}",
        summary.frames,
        summary.detections,
        summary.detections_path.display()
    );
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Detect(args) => detect(args),
        Command::Synth { spec, output } => {
            let spec = SceneSpec::load(&spec).map_err(input)?;
            for w in spec.warnings(PipelineConfig::default().flow.spacing) {
                eprintln!("warning: {w}");
            }
            let seq = synth::generate_sequence(&spec, &output)?;
            eprintln!("{} frames -> {}", seq.frames.len(), output.display());
            Ok(())
        }
        Command::Eval {
            detections,
            truth,
            radius,
            first_frame,
        } => {
            let dets = pipeline::read_detections(&detections)?;
            let gt = synth::read_ground_truth(&truth)?;
            let report = eval::evaluate_from(&dets, &gt, radius, first_frame).map_err(input)?;
            stdout_line(&serde_json::to_string_pretty(&report).expect("report serializes"))
        }
        Command::Annotate {
            input: input_dir,
            detections,
            output,
        } => {
            let dets = pipeline::read_detections(&detections)?;
            std::fs::create_dir_all(&output).map_err(|e| Error::Io { path: output.clone(), source: e })?;
            for (index, item) in io::FrameReader::open(&input_dir)?.enumerate() {
                let (_, frame) = item?;
                let marks: Vec<_> = dets.iter().filter(|d| d.frame == index).map(|d| sarcd::Point::new(d.x, d.y)).collect();
                let out = annotate::annotate(&frame, &marks, &[], &[]);
                io::write_pgm(&output.join(pipeline::annotated_file_name(index)), &out)?;
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            // Help and version go to stdout, usage errors to stderr.
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Processing(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}
