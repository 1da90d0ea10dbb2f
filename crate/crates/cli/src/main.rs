//! `bipro` command-line tool.
//!
//! Exit codes: 0 success, 1 configuration or I/O error, 2 generation
//! exhausted every beam, 3 the poem failed verification.

mod config;

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use bipro::beam::{BeamConfig, BeamError};
use bipro::evaluation::{aggregate_stats, read_manifest, read_reviews};
use bipro::generate::{
    estimate_token_cost, generate_batch, generate_poem, CostMode, CostParams, GenerateError, GenerationConfig,
    GenerationTrace,
};
use bipro::model::{BlockModel, MockModel, RemoteConfig, RemoteModel, Vocabulary};
use bipro::pingshui::{Poem, PoemFormat, Verifier};
use bipro::scorer::{bipro_score, Phase, ScoreWeights};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use config::{AppConfig, ModelKind, Overrides, Settings};

#[derive(Debug, Parser)]
#[command(name = "bipro", version, about = "Constrained poem generation with block inverse prompting")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML configuration file; flags override its values.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Rhyme dictionary (TSV: character, P|Z, class 1-106). Defaults to the bundled sample.
    #[arg(long, global = true, value_name = "PATH")]
    dict: Option<PathBuf>,
    /// Prompt templates (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    templates: Option<PathBuf>,
    /// Model backend.
    #[arg(long, global = true, value_enum)]
    model: Option<ModelKind>,
    /// Base URL of the remote model server.
    #[arg(long, global = true, env = "BIPRO_MODEL_URL", value_name = "URL")]
    model_url: Option<String>,
    /// Seed of the mock model's weights.
    #[arg(long, global = true, value_name = "INT")]
    mock_seed: Option<u64>,
    /// Generation seed.
    #[arg(long, global = true, value_name = "INT")]
    seed: Option<u64>,
    /// Check each rule with its own choice of pronunciations.
    #[arg(long, global = true)]
    lenient: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a poem and print it as JSON.
    Generate(GenerateArgs),
    /// Check a poem JSON file against the Pingshui rules.
    Verify {
        /// Poem JSON: {"title", "format", "sentences"}.
        poem: PathBuf,
    },
    /// Score one sentence of a poem.
    Score(ScoreArgs),
    /// Estimate the token cost of generation.
    Cost(CostArgs),
    /// Summarize a review dataset and compute AR scores.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
struct GenerateArgs {
    /// Poem title.
    #[arg(long, required_unless_present = "titles_file", conflicts_with = "titles_file")]
    title: Option<String>,
    /// File with one title per line; prints one poem JSON per line.
    #[arg(long, value_name = "PATH")]
    titles_file: Option<PathBuf>,
    /// Poem form: 5-jueju, 7-jueju, 5-lvshi or 7-lvshi.
    #[arg(long, default_value = "5-jueju")]
    format: PoemFormat,
    /// Beams per sentence.
    #[arg(long, value_name = "INT")]
    beam_size: Option<usize>,
    /// Maximum rewrite rounds.
    #[arg(long, value_name = "INT")]
    max_rewrites: Option<usize>,
    /// Weight of the title score; the match sentence gets the rest.
    #[arg(long, value_name = "FLOAT")]
    alpha_title: Option<f64>,
    /// Take the first finished beam and skip revise and rewrite.
    #[arg(long)]
    direct: bool,
    /// Write the revise/rewrite trace as JSON lines.
    #[arg(long, value_name = "PATH", conflicts_with = "titles_file")]
    trace_out: Option<PathBuf>,
    /// Write every beam step as JSON lines.
    #[arg(long, value_name = "PATH", conflicts_with = "titles_file")]
    beam_trace_out: Option<PathBuf>,
    /// Titles generated concurrently with --titles-file.
    #[arg(long, default_value_t = 1, value_name = "INT")]
    jobs: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PhaseArg {
    Generation,
    Revise,
    Rewrite,
}

impl From<PhaseArg> for Phase {
    fn from(p: PhaseArg) -> Self {
        match p {
            PhaseArg::Generation => Phase::Generation,
            PhaseArg::Revise => Phase::Revise,
            PhaseArg::Rewrite => Phase::Rewrite,
        }
    }
}

#[derive(Debug, Args)]
struct ScoreArgs {
    /// Poem JSON file.
    poem: PathBuf,
    /// 1-based sentence to score.
    #[arg(long)]
    sentence: usize,
    /// Which partner sentence is scored with the title.
    #[arg(long, value_enum, default_value = "rewrite")]
    phase: PhaseArg,
    /// Weight of the title score.
    #[arg(long, value_name = "FLOAT")]
    alpha_title: Option<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Single,
    WithRevise,
    Full,
}

#[derive(Debug, Args)]
struct CostArgs {
    /// Sentences per poem.
    #[arg(long, allow_negative_numbers = true)]
    n: Option<i64>,
    /// Tokens per sentence generation.
    #[arg(long, allow_negative_numbers = true)]
    s: Option<i64>,
    /// Rewrite rounds.
    #[arg(long, allow_negative_numbers = true)]
    m: Option<i64>,
    /// Title length in tokens.
    #[arg(long, allow_negative_numbers = true)]
    t: Option<i64>,
    /// Beam size.
    #[arg(long, allow_negative_numbers = true)]
    k: Option<i64>,
    #[arg(long, value_enum)]
    mode: ModeArg,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Reviews CSV: reviewer_id,poem_id,format,informativeness,relevance,aesthetics,overall,predicted.
    #[arg(long, value_name = "PATH")]
    reviews: PathBuf,
    /// Poems CSV: poem_id,system,title,format.
    #[arg(long, value_name = "PATH")]
    manifest: PathBuf,
    /// Write the summary table here instead of stdout.
    #[arg(long, value_name = "PATH")]
    table_out: Option<PathBuf>,
    /// Write per-poem AR scores (JSON) here instead of stdout.
    #[arg(long, value_name = "PATH")]
    ar_out: Option<PathBuf>,
}

const EXIT_ERROR: u8 = 1;
const EXIT_EXHAUSTED: u8 = 2;
const EXIT_INVALID: u8 = 3;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Cost(args) => cmd_cost(&args),
        Command::Eval(args) => cmd_eval(&args),
        Command::Generate(ref args) => {
            let settings = settings(&cli.common, args.beam_size, args.max_rewrites, args.alpha_title)?;
            cmd_generate(args, &settings)
        }
        Command::Verify { ref poem } => cmd_verify(poem, &settings(&cli.common, None, None, None)?),
        Command::Score(ref args) => cmd_score(args, &settings(&cli.common, None, None, args.alpha_title)?),
    }
}

fn settings(
    common: &Common,
    beam_size: Option<usize>,
    max_rewrites: Option<usize>,
    alpha_title: Option<f64>,
) -> Result<Settings> {
    let config = match &common.config {
        Some(path) => AppConfig::load(path)?,
        None => AppConfig::default(),
    };
    Settings::resolve(
        config,
        Overrides {
            dict: common.dict.clone(),
            templates: common.templates.clone(),
            model: common.model,
            model_url: common.model_url.clone(),
            mock_seed: common.mock_seed,
            seed: common.seed,
            lenient: common.lenient,
            beam_size,
            max_rewrites,
            alpha_title,
        },
    )
}

fn build_model(settings: &Settings, extra: impl IntoIterator<Item = char>) -> Result<Box<dyn BlockModel>> {
    let chars: BTreeSet<char> = settings.dictionary.chars().chain(extra).collect();
    let vocab = Vocabulary::from_chars(chars)?;
    Ok(match settings.model {
        ModelKind::Mock => Box::new(MockModel::bigram(vocab, settings.mock_seed)),
        ModelKind::Remote => {
            let Some(url) = &settings.model_url else {
                bail!("the remote model needs --model-url or BIPRO_MODEL_URL");
            };
            Box::new(RemoteModel::new(RemoteConfig::new(url.clone()), vocab))
        }
    })
}

fn read_poem(path: &Path) -> Result<Poem> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    if text.trim().is_empty() {
        bail!("{} is empty", path.display());
    }
    serde_json::from_str(&text).with_context(|| format!("{} is not a poem JSON file", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("cannot create {}", path.display()))?))
}

fn cmd_generate(args: &GenerateArgs, settings: &Settings) -> Result<ExitCode> {
    let titles: Vec<String> = match (&args.title, &args.titles_file) {
        (Some(t), _) => vec![t.clone()],
        (None, Some(path)) => std::fs::read_to_string(path)
            .with_context(|| format!("cannot read {}", path.display()))?
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(String::from)
            .collect(),
        (None, None) => bail!("--title or --titles-file is required"),
    };
    let model = build_model(settings, titles.iter().flat_map(|t| t.chars()))?;
    let verifier = Verifier::new(Arc::new(settings.dictionary.clone()), settings.verify);
    let mut beam = BeamConfig::new(settings.beam_size, settings.seed);
    beam.record_steps = args.beam_trace_out.is_some();
    let config = GenerationConfig {
        format: args.format,
        max_rewrites: settings.max_rewrites,
        beam,
        weights: settings.weights,
        templates: settings.templates.clone(),
        seed: settings.seed,
        direct: args.direct,
    };
    let stdout = std::io::stdout();
    let mut out = stdout.lock();

    if args.titles_file.is_some() {
        let mut code = 0;
        for (title, result) in titles.iter().zip(generate_batch(model.as_ref(), &verifier, &titles, &config, args.jobs))
        {
            match result {
                Ok((poem, _)) => writeln!(out, "{}", serde_json::to_string(&poem)?)?,
                Err(e) => {
                    report_failure(title, &e);
                    code = code.max(if e.is_exhaustion() { EXIT_EXHAUSTED } else { EXIT_ERROR });
                }
            }
        }
        return Ok(ExitCode::from(code));
    }

    let title = &titles[0];
    let (result, trace) = match generate_poem(model.as_ref(), &verifier, title, &config) {
        Ok((poem, trace)) => (Ok(poem), trace),
        Err(e) => {
            let trace = match &e {
                GenerateError::Beam { trace, .. } => trace.clone(),
                _ => GenerationTrace::default(),
            };
            (Err(e), trace)
        }
    };
    if let Some(path) = &args.trace_out {
        let mut f = create(path)?;
        trace.write_jsonl(&mut f)?;
        f.flush()?;
    }
    if let Some(path) = &args.beam_trace_out {
        let mut f = create(path)?;
        trace.write_beam_steps_jsonl(&mut f)?;
        f.flush()?;
    }
    match result {
        Ok(poem) => {
            writeln!(out, "{}", serde_json::to_string(&poem)?)?;
            Ok(ExitCode::SUCCESS)
        }
        Err(e) if e.is_exhaustion() => {
            report_failure(title, &e);
            Ok(ExitCode::from(EXIT_EXHAUSTED))
        }
        Err(e) => Err(e.into()),
    }
}

fn report_failure(title: &str, e: &GenerateError) {
    let value = match e {
        GenerateError::Beam { source: BeamError::Exhausted { sentence, step, violations }, .. } => json!({
            "error": "exhausted",
            "title": title,
            "sentence": sentence,
            "step": step,
            "message": e.to_string(),
            "violations": violations,
        }),
        _ => json!({ "error": "failed", "title": title, "message": e.to_string() }),
    };
    eprintln!("{value}");
}

fn cmd_verify(path: &Path, settings: &Settings) -> Result<ExitCode> {
    let poem = read_poem(path)?;
    let verdict = Verifier::new(Arc::new(settings.dictionary.clone()), settings.verify).verify(&poem)?;
    println!("{}", json!({ "valid": verdict.is_valid(), "violations": verdict.violations() }));
    Ok(if verdict.is_valid() { ExitCode::SUCCESS } else { ExitCode::from(EXIT_INVALID) })
}

fn cmd_score(args: &ScoreArgs, settings: &Settings) -> Result<ExitCode> {
    let poem = read_poem(&args.poem)?;
    let extra: Vec<char> = poem.title.chars().chain(poem.sentences.iter().flat_map(|s| s.chars())).collect();
    let model = build_model(settings, extra)?;
    let weights: ScoreWeights = settings.weights;
    let score = bipro_score(
        model.as_ref(),
        &poem.title,
        &poem.sentences,
        args.sentence,
        args.phase.into(),
        weights,
        &settings.templates,
    )?;
    println!("{}", json!({ "sentence": args.sentence, "phase": Phase::from(args.phase), "score": score }));
    Ok(ExitCode::SUCCESS)
}

fn cmd_cost(args: &CostArgs) -> Result<ExitCode> {
    let get = |name: &str, v: Option<i64>, needed: bool| -> Result<u64> {
        match v {
            None if needed => bail!("--{name} is required for this mode"),
            None => Ok(0),
            Some(x) if x < 1 => bail!("--{name} must be a positive integer, got {x}"),
            Some(x) => Ok(x as u64),
        }
    };
    let mode = match args.mode {
        ModeArg::Single => CostMode::SingleSentence,
        ModeArg::WithRevise => CostMode::WithRevise,
        ModeArg::Full => CostMode::Full,
    };
    let needs_n = !matches!(mode, CostMode::SingleSentence);
    let params = CostParams {
        n: get("n", args.n, needs_n)?,
        s: get("s", args.s, true)?,
        m: get("m", args.m, mode == CostMode::Full)?,
        t: get("t", args.t, true)?,
        k: get("k", args.k, true)?,
    };
    println!("{}", estimate_token_cost(&params, mode)?);
    Ok(ExitCode::SUCCESS)
}

fn cmd_eval(args: &EvalArgs) -> Result<ExitCode> {
    let open = |p: &Path| File::open(p).with_context(|| format!("cannot open {}", p.display()));
    let reviews = read_reviews(open(&args.reviews)?)?;
    let manifest = read_manifest(open(&args.manifest)?)?;
    let report = aggregate_stats(&reviews, &manifest)?;
    let table = report.table_csv();
    let ar = serde_json::to_string_pretty(&report.poems)? + "\n";
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match &args.table_out {
        Some(path) => std::fs::write(path, &table).with_context(|| format!("cannot write {}", path.display()))?,
        None => out.write_all(table.as_bytes())?,
    }
    match &args.ar_out {
        Some(path) => std::fs::write(path, &ar).with_context(|| format!("cannot write {}", path.display()))?,
        None => out.write_all(ar.as_bytes())?,
    }
    Ok(ExitCode::SUCCESS)
}
