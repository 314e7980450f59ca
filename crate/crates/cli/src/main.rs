use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use modvqa_core::answer::AnswerVocabulary;
use modvqa_core::backend::conformance::{builtin_fixtures, parse_fixtures, run_conformance};
use modvqa_core::backend::{
    calls_to_jsonl, load_scene_dir, serve, Backend, OracleBackend, RecordingBackend,
    RemoteBackend, ReplayBackend,
};
use modvqa_core::eval::{
    evaluate_soft_report, evaluate_standard, ood_filter, read_predictions, read_questions,
    run_pipeline, traces_to_jsonl, vocabulary_from_gold, write_jsonl, ObjectList,
    PipelineOptions, DEFAULT_TEST_PORTION,
};
use modvqa_core::exec::{ExecutionConfig, FailureKind};
use modvqa_core::layout::parse_layout;
use modvqa_core::plan::compile;

#[derive(Parser)]
#[command(name = "modvqa", version, about = "Compile and run modular zero-shot VQA plans")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum PlanFormat {
    Text,
    Jsonl,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Compile one layout (inline text or a file holding it) and print the plan.
    Compile {
        layout: String,
        #[arg(long, value_enum, default_value = "text")]
        format: PlanFormat,
    },
    /// Answer a question file and print the accuracy report.
    Run {
        #[arg(long)]
        questions: PathBuf,
        /// `oracle:<scene dir>`, `remote:<url>` or `replay:<calls.jsonl>`.
        #[arg(long)]
        backend: String,
        /// Answer vocabulary, one per line. Defaults to the gold answers.
        #[arg(long)]
        vocab: Option<PathBuf>,
        /// Where to write predictions (JSON lines).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Where to write execution traces (JSON lines).
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Where to write every backend exchange, for later replay.
        #[arg(long)]
        record: Option<PathBuf>,
        #[arg(long, default_value_t = ExecutionConfig::default().detector_threshold)]
        detector_threshold: f64,
        #[arg(long, default_value_t = ExecutionConfig::default().grounder_threshold)]
        grounder_threshold: f64,
        #[arg(long, default_value_t = ExecutionConfig::default().answer_top_k)]
        top_k: usize,
        /// Worker threads; 0 picks one per core.
        #[arg(long, default_value_t = 0)]
        workers: usize,
    },
    /// Score predictions against gold answers.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        /// Use the ten-annotator soft score instead of exact match.
        #[arg(long)]
        soft: bool,
    },
    /// Split images into train (no listed objects) and test (listed share at least --portion).
    OodFilter {
        #[arg(long)]
        scenes: PathBuf,
        /// `food`, `street`, or a file of comma or newline separated names.
        #[arg(long)]
        objects: String,
        #[arg(long, default_value_t = DEFAULT_TEST_PORTION)]
        portion: f64,
    },
    /// Serve the scene-graph oracle over HTTP.
    Serve {
        #[arg(long)]
        scenes: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
        #[arg(long, default_value_t = 4)]
        workers: usize,
    },
    /// Check a running model service against the protocol fixtures.
    Conformance {
        #[arg(long)]
        url: String,
        #[arg(long)]
        fixtures: Option<PathBuf>,
        /// Send every fixture to this image instead of the one it names.
        #[arg(long)]
        image: Option<String>,
    },
}

/// Writes to stdout; a closed pipe (`| head`) ends output quietly.
fn emit(text: &str) -> Result<()> {
    match io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn emit_json<T: serde::Serialize>(value: &T) -> Result<()> {
    emit(&(serde_json::to_string_pretty(value)? + "\n"))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn open_backend(spec: &str) -> Result<Arc<dyn Backend>> {
    let (kind, rest) = spec
        .split_once(':')
        .with_context(|| format!("backend `{spec}` should look like oracle:<dir>, remote:<url> or replay:<file>"))?;
    Ok(match kind {
        "oracle" => Arc::new(
            OracleBackend::from_dir(Path::new(rest)).with_context(|| format!("loading scenes from {rest}"))?,
        ),
        "remote" => {
            let remote = RemoteBackend::new(rest);
            remote.health().with_context(|| format!("model service at {rest} is not ready"))?;
            Arc::new(remote)
        }
        "replay" => Arc::new(
            ReplayBackend::from_jsonl(&read_text(Path::new(rest))?)
                .with_context(|| format!("parsing recorded calls in {rest}"))?,
        ),
        other => bail!("unknown backend kind `{other}`"),
    })
}

fn compile_cmd(layout: &str, format: PlanFormat) -> Result<()> {
    let text = if Path::new(layout).is_file() {
        read_text(Path::new(layout))?.trim().to_string()
    } else {
        layout.to_string()
    };
    let layout = parse_layout(&text)?;
    let plan = compile(&layout)?;
    match format {
        PlanFormat::Text => emit(&plan.to_text()),
        PlanFormat::Jsonl => emit(&plan.to_jsonl()),
        PlanFormat::Json => emit_json(&plan),
    }
}

#[allow(clippy::too_many_arguments)]
fn run_cmd(
    questions: &Path,
    backend: &str,
    vocab: Option<&Path>,
    out: Option<&Path>,
    trace: Option<&Path>,
    record: Option<&Path>,
    config: ExecutionConfig,
    workers: usize,
) -> Result<ExitCode> {
    config.check()?;
    let records = read_questions(questions)?;
    let vocabulary = match vocab {
        Some(p) => AnswerVocabulary::from_lines(&read_text(p)?)?,
        None => {
            log::warn!("no --vocab given; using the gold answers as the vocabulary");
            vocabulary_from_gold(&records).context("the question file has no answers to build a vocabulary from")?
        }
    };
    let options = PipelineOptions {
        config,
        workers,
        vocabulary: Some(vocabulary),
    };
    let backend = open_backend(backend)?;
    let output = match record {
        Some(path) => {
            let recorder = RecordingBackend::new(backend);
            let output = run_pipeline(&records, &recorder, &options);
            fs::write(path, calls_to_jsonl(&recorder.calls()))
                .with_context(|| format!("writing {}", path.display()))?;
            output
        }
        None => run_pipeline(&records, &backend, &options),
    };
    if let Some(path) = out {
        write_jsonl(path, &output.predictions)?;
    }
    if let Some(path) = trace {
        fs::write(path, traces_to_jsonl(&output.traces))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    emit_json(&output.report)?;
    let unavailable = output.failures_of(FailureKind::BackendUnavailable);
    if unavailable > 0 {
        log::error!("{unavailable} question(s) failed because the backend was unreachable");
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn eval_cmd(pred: &Path, gold: &Path, soft: bool) -> Result<()> {
    let predictions = read_predictions(pred)?;
    let gold = read_questions(gold)?;
    let report = if soft {
        evaluate_soft_report(&predictions, &gold)?
    } else {
        evaluate_standard(&predictions, &gold)
    };
    emit_json(&report)
}

fn ood_cmd(scenes: &Path, objects: &str, portion: f64) -> Result<()> {
    let list = match objects {
        "food" => ObjectList::food(),
        "street" => ObjectList::street(),
        path => ObjectList::parse(&read_text(Path::new(path))?),
    };
    let scenes = load_scene_dir(scenes)?;
    let mut ids: Vec<String> = scenes.keys().cloned().collect();
    ids.sort();
    let split = ood_filter(&ids, &scenes, &list, portion)?;
    emit_json(&split)
}

fn serve_cmd(scenes: &Path, addr: &str, workers: usize) -> Result<()> {
    let oracle = OracleBackend::from_dir(scenes)
        .with_context(|| format!("loading scenes from {}", scenes.display()))?;
    let handle = serve(Arc::new(oracle), addr, workers)?;
    eprintln!("serving on {}", handle.url());
    handle.join();
    Ok(())
}

fn conformance_cmd(url: &str, fixtures: Option<&Path>, image: Option<&str>) -> Result<ExitCode> {
    let mut list = match fixtures {
        Some(p) => parse_fixtures(&read_text(p)?)?,
        None => builtin_fixtures(),
    };
    if let Some(image) = image {
        list = list.into_iter().map(|f| f.with_image(image)).collect();
    }
    let results = run_conformance(&RemoteBackend::new(url), &list);
    let mut failed = 0;
    for r in &results {
        if r.passed {
            emit(&format!("PASS {}\n", r.name))?;
        } else {
            failed += 1;
            emit(&format!("FAIL {}: {}\n", r.name, r.detail))?;
        }
    }
    Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Compile { layout, format } => compile_cmd(&layout, format).map(|_| ExitCode::SUCCESS),
        Command::Run {
            questions,
            backend,
            vocab,
            out,
            trace,
            record,
            detector_threshold,
            grounder_threshold,
            top_k,
            workers,
        } => run_cmd(
            &questions,
            &backend,
            vocab.as_deref(),
            out.as_deref(),
            trace.as_deref(),
            record.as_deref(),
            ExecutionConfig {
                detector_threshold,
                grounder_threshold,
                answer_top_k: top_k,
            },
            workers,
        ),
        Command::Eval { pred, gold, soft } => eval_cmd(&pred, &gold, soft).map(|_| ExitCode::SUCCESS),
        Command::OodFilter {
            scenes,
            objects,
            portion,
        } => ood_cmd(&scenes, &objects, portion).map(|_| ExitCode::SUCCESS),
        Command::Serve {
            scenes,
            addr,
            workers,
        } => serve_cmd(&scenes, &addr, workers).map(|_| ExitCode::SUCCESS),
        Command::Conformance { url, fixtures, image } => {
            conformance_cmd(&url, fixtures.as_deref(), image.as_deref())
        }
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
