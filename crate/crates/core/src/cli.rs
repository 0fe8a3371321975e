//! The `mtbl` command line: `train`, `apply`, `eval`, `analyze`, `synth`.
//!
//! Exit codes: 0 on success, 2 for usage and configuration errors, 3 for
//! data errors.

use std::ffi::OsString;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_rational::Rational64;

use crate::config::ConfigFile;
use crate::corpus::{read_column_corpus, write_column_corpus, Corpus, Layer, Schema};
use crate::diagnostics::divergence_report;
use crate::engine::{apply_model, build_lexicon, initialize, parse_weight, InitKeys, Model};
use crate::error::{Error, Result};
use crate::eval::{evaluate, EvalSpec};
use crate::synth::{synth_corpus, SynthConfig};
use crate::templates::{default_templates, parse_template_file, DEFAULT_OFFSET_BOUND};
use crate::trainer::{train, Mode, ScorerKind, TrainConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "mtbl", version, about = "Multi-task transformation-based learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Learn a model from a gold corpus.
    Train(TrainArgs),
    /// Tag a corpus with a model.
    Apply(ApplyArgs),
    /// Score predictions against gold.
    Eval(EvalArgs),
    /// Accuracy by train/test divergence class.
    Analyze(AnalyzeArgs),
    /// Generate the synthetic two-task corpus.
    Synth(SynthArgs),
}

#[derive(Args, Debug, Default)]
struct SchemaArgs {
    /// Key=value run configuration; flags override it.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Comma-separated stream names in column order.
    #[arg(long)]
    streams: Option<String>,
    /// Comma-separated task streams.
    #[arg(long)]
    tasks: Option<String>,
    /// Task weights, e.g. `pos=1,chunk=1/2`.
    #[arg(long)]
    weights: Option<String>,
    /// Initial-state keys, e.g. `pos=word,chunk=pos`.
    #[arg(long)]
    init: Option<String>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Joint,
    Sequential,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ScorerArg {
    Naive,
    Indexed,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    schema: SchemaArgs,
    /// Gold training corpus.
    #[arg(long, value_name = "PATH")]
    train: Option<PathBuf>,
    /// Template file; the built-in inventory when absent.
    #[arg(long, value_name = "PATH")]
    templates: Option<PathBuf>,
    /// Where to write the model.
    #[arg(long, value_name = "PATH")]
    model: Option<PathBuf>,
    /// Where to write the training log (stdout when absent).
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Joint (default) or one task at a time.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Task order for sequential mode; the schema's task order by default.
    #[arg(long)]
    order: Option<String>,
    /// Stop when no rule reduces weighted error by at least this much
    /// (default 1; fractions like `1/2` allowed).
    #[arg(long, value_name = "N")]
    min_score: Option<String>,
    /// Stop after this many rules.
    #[arg(long, value_name = "N")]
    max_rules: Option<usize>,
    /// Candidate scorer (default indexed); both learn the same rules.
    #[arg(long, value_enum)]
    scorer: Option<ScorerArg>,
    /// Worker threads (default 1); output does not depend on it.
    #[arg(long, value_name = "N")]
    workers: Option<usize>,
    /// Largest |offset| a template may read (default 3).
    #[arg(long, value_name = "N")]
    offset_bound: Option<i32>,
}

#[derive(Args, Debug)]
struct ApplyArgs {
    /// Key=value run configuration; flags override it.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    model: Option<PathBuf>,
    /// Corpus to tag, in the model's column layout; task values are overwritten.
    #[arg(long, value_name = "PATH")]
    test: Option<PathBuf>,
    /// Output corpus (stdout when absent).
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Lines,
    Table,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[command(flatten)]
    schema: SchemaArgs,
    /// Gold corpus.
    #[arg(long, value_name = "PATH")]
    test: Option<PathBuf>,
    /// Predicted corpus, same layout as the gold one.
    #[arg(long, value_name = "PATH")]
    pred: Option<PathBuf>,
    /// Take the schema from this model instead of the schema flags.
    #[arg(long, value_name = "PATH")]
    model: Option<PathBuf>,
    /// Report destination (stdout when absent).
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Tab-separated lines (default) or a human-readable table.
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum LayerArg {
    Initial,
    Gold,
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    #[command(flatten)]
    schema: SchemaArgs,
    /// Gold training corpus.
    #[arg(long, value_name = "PATH")]
    train: Option<PathBuf>,
    /// Gold test corpus.
    #[arg(long, value_name = "PATH")]
    test: Option<PathBuf>,
    /// Model whose lexicon produces the initial state; built from the
    /// training corpus when absent.
    #[arg(long, value_name = "PATH")]
    model: Option<PathBuf>,
    /// System output as NAME=PATH; repeatable.
    #[arg(long, value_name = "NAME=PATH")]
    pred: Vec<String>,
    /// Task to analyze (default: the last task).
    #[arg(long)]
    task: Option<String>,
    /// Number of divergence classes (default 4).
    #[arg(long, value_name = "N")]
    buckets: Option<usize>,
    /// Tags the divergence is computed from: the initial-state guess
    /// (default) or gold.
    #[arg(long, value_enum)]
    layer: Option<LayerArg>,
    /// Report destination (stdout when absent).
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Key=value run configuration; flags override it.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Default 100.
    #[arg(long, value_name = "N")]
    sentences: Option<usize>,
    /// Probability of replacing each gold tag (default 0).
    #[arg(long)]
    noise: Option<f64>,
    /// Noisy gold corpus (stdout when absent).
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Also write the corpus before noise.
    #[arg(long, value_name = "PATH")]
    clean: Option<PathBuf>,
}

/// Parses `args` (program name first) and runs the command; returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let result = match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Apply(a) => cmd_apply(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Synth(a) => cmd_synth(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("mtbl: {e}");
            if e.is_config() {
                EXIT_CONFIG
            } else {
                EXIT_DATA
            }
        }
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|source| Error::MissingFile {
        path: path.to_owned(),
        source,
    })
}

fn read_text(path: &Path) -> Result<String> {
    String::from_utf8(read_file(path)?).map_err(|_| Error::NotUtf8)
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text)
            .map_err(|e| Error::Config(format!("cannot write {}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<ConfigFile> {
    match path {
        Some(p) => ConfigFile::parse(&read_text(p)?),
        None => Ok(ConfigFile::default()),
    }
}

fn required(value: Option<PathBuf>, flag: &str) -> Result<PathBuf> {
    value.ok_or_else(|| Error::Config(format!("--{flag} is required")))
}

fn pick_path(cfg: &ConfigFile, flag: Option<PathBuf>, key: &str) -> Option<PathBuf> {
    flag.or_else(|| cfg.get(key).map(PathBuf::from))
}

fn split_list(text: &str) -> Vec<&str> {
    text.split(',').map(str::trim).filter(|s| !s.is_empty()).collect()
}

fn pairs(text: &str, what: &str) -> Result<Vec<(String, String)>> {
    split_list(text)
        .into_iter()
        .map(|item| {
            item.split_once('=')
                .map(|(k, v)| (k.trim().to_owned(), v.trim().to_owned()))
                .ok_or_else(|| Error::Config(format!("{what}: expected NAME=VALUE, found `{item}`")))
        })
        .collect()
}

/// Schema and initial-state keys from flags and config; `word,pos,chunk`
/// with tasks `pos,chunk` by default.
fn resolve_schema(args: &SchemaArgs, cfg: &ConfigFile) -> Result<(Schema, Option<InitKeys>)> {
    let streams_text = cfg
        .pick(args.streams.clone(), "streams")
        .unwrap_or_else(|| "word,pos,chunk".into());
    let streams = split_list(&streams_text);
    let tasks_text = cfg.pick(args.tasks.clone(), "tasks");
    let tasks: Vec<&str> = match &tasks_text {
        Some(t) => split_list(t),
        None => streams.iter().skip(1).copied().collect(),
    };
    let mut schema = Schema::new(&streams, &tasks)?;
    if let Some(w) = cfg.pick(args.weights.clone(), "weights") {
        for (task, value) in pairs(&w, "--weights")? {
            let weight = parse_weight(&value).map_err(|e| Error::Config(e.to_string()))?;
            schema = schema.with_weight(&task, weight)?;
        }
    }
    let keys = match cfg.pick(args.init.clone(), "init") {
        Some(text) => {
            let keys = InitKeys::new(pairs(&text, "--init")?);
            keys.ordered(&schema).map_err(|e| Error::Config(e.to_string()))?;
            Some(keys)
        }
        None => None,
    };
    Ok((schema, keys))
}

fn read_corpus(path: &Path, schema: &Schema) -> Result<Corpus> {
    read_column_corpus(&read_file(path)?, schema)
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let cfg = load_config(a.schema.config.as_deref())?;
    let (schema, init_keys) = resolve_schema(&a.schema, &cfg)?;
    let train_path = required(pick_path(&cfg, a.train, "train"), "train")?;
    let model_path = required(pick_path(&cfg, a.model, "model"), "model")?;
    let log_path = pick_path(&cfg, a.out, "out");
    let bound = cfg
        .pick_parsed(a.offset_bound, "offset_bound")?
        .unwrap_or(DEFAULT_OFFSET_BOUND);
    if bound < 1 {
        return Err(Error::Config("offset bound must be at least 1".into()));
    }
    let templates = match pick_path(&cfg, a.templates, "templates") {
        Some(p) => parse_template_file(&read_text(&p)?, &schema, bound)?,
        None => default_templates(&schema, bound),
    };
    let mut config = TrainConfig::new(templates);
    config.init_keys = init_keys;
    if let Some(text) = cfg.pick(a.min_score, "min_score") {
        config.min_score = parse_weight(&text).map_err(|e| Error::Config(e.to_string()))?;
        if config.min_score <= Rational64::from_integer(0) {
            return Err(Error::Config("--min-score must be positive".into()));
        }
    }
    config.max_rules = cfg.pick_parsed(a.max_rules, "max_rules")?;
    config.workers = cfg.pick_parsed(a.workers, "workers")?.unwrap_or(1);
    if config.workers == 0 {
        return Err(Error::Config("--workers must be at least 1".into()));
    }
    let scorer = match a.scorer {
        Some(s) => Some(s),
        None => cfg.get("scorer").map(|s| ScorerArg::from_str(s, true)).transpose().map_err(Error::Config)?,
    };
    if let Some(ScorerArg::Naive) = scorer {
        config.scorer = ScorerKind::Naive;
    }
    let mode = match a.mode {
        Some(m) => Some(m),
        None => cfg.get("mode").map(|s| ModeArg::from_str(s, true)).transpose().map_err(Error::Config)?,
    };
    if let Some(ModeArg::Sequential) = mode {
        let order = match cfg.pick(a.order, "order") {
            Some(text) => split_list(&text).into_iter().map(str::to_owned).collect(),
            None => schema.tasks().iter().map(|&t| schema.name(t).to_owned()).collect(),
        };
        config.mode = Mode::Sequential(order);
    }

    let corpus = read_corpus(&train_path, &schema)?;
    let training = train(&corpus, &config)?;
    emit(Some(&model_path), &training.model.to_text())?;
    emit(log_path.as_deref(), &training.log_text())
}

fn load_model(path: &Path) -> Result<Model> {
    Model::from_text(&read_text(path)?)
}

fn cmd_apply(a: ApplyArgs) -> Result<()> {
    let cfg = load_config(a.config.as_deref())?;
    let model = load_model(&required(pick_path(&cfg, a.model, "model"), "model")?)?;
    let test_path = required(pick_path(&cfg, a.test, "test"), "test")?;
    let mut corpus = read_corpus(&test_path, &model.schema)?;
    apply_model(&model, &mut corpus)?;
    emit(
        pick_path(&cfg, a.out, "out").as_deref(),
        &write_column_corpus(&corpus, Layer::Current)?,
    )
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    let cfg = load_config(a.schema.config.as_deref())?;
    let schema = match pick_path(&cfg, a.model, "model") {
        Some(p) => load_model(&p)?.schema,
        None => resolve_schema(&a.schema, &cfg)?.0,
    };
    let gold_path = required(pick_path(&cfg, a.test, "test"), "test")?;
    let pred_path = required(pick_path(&cfg, a.pred, "pred"), "pred")?;
    let mut corpus = read_corpus(&gold_path, &schema)?;
    let predicted = read_corpus(&pred_path, &schema)?;
    corpus.set_current_from_gold_of(&predicted)?;
    let report = evaluate(&corpus, &EvalSpec::infer(&corpus))?;
    let format = match a.format {
        Some(f) => f,
        None => cfg
            .get("format")
            .map(|s| FormatArg::from_str(s, true))
            .transpose()
            .map_err(Error::Config)?
            .unwrap_or(FormatArg::Lines),
    };
    let text = match format {
        FormatArg::Lines => report.machine_lines(),
        FormatArg::Table => report.table(),
    };
    emit(pick_path(&cfg, a.out, "out").as_deref(), &text)
}

fn initial_state(corpus: &Corpus, lexicon: &crate::engine::Lexicon) -> Result<Corpus> {
    let mut c = corpus.clone();
    c.clear_current();
    initialize(&mut c, lexicon)?;
    Ok(c)
}

fn cmd_analyze(a: AnalyzeArgs) -> Result<()> {
    let cfg = load_config(a.schema.config.as_deref())?;
    let model = pick_path(&cfg, a.model, "model").map(|p| load_model(&p)).transpose()?;
    let (schema, init_keys) = match &model {
        Some(m) => (m.schema.clone(), None),
        None => resolve_schema(&a.schema, &cfg)?,
    };
    let train_corpus = read_corpus(&required(pick_path(&cfg, a.train, "train"), "train")?, &schema)?;
    let test = read_corpus(&required(pick_path(&cfg, a.test, "test"), "test")?, &schema)?;
    let mut preds = a.pred;
    if preds.is_empty() {
        preds = cfg.get("pred").map(|p| split_list(p).into_iter().map(str::to_owned).collect()).unwrap_or_default();
    }
    if preds.is_empty() {
        return Err(Error::Config("at least one --pred NAME=PATH is required".into()));
    }
    let mut systems = Vec::with_capacity(preds.len());
    for item in &preds {
        let (name, path) = item
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--pred expects NAME=PATH, found `{item}`")))?;
        let mut output = test.clone();
        output.set_current_from_gold_of(&read_corpus(Path::new(path), &schema)?)?;
        systems.push((name.to_owned(), output));
    }
    let task = match cfg.pick(a.task, "task") {
        Some(t) => t,
        None => schema.name(*schema.tasks().last().expect("schema has a task")).to_owned(),
    };
    let buckets = cfg.pick_parsed(a.buckets, "buckets")?.unwrap_or(4);
    let layer = match a.layer {
        Some(l) => l,
        None => cfg
            .get("layer")
            .map(|s| LayerArg::from_str(s, true))
            .transpose()
            .map_err(Error::Config)?
            .unwrap_or(LayerArg::Initial),
    };
    let system_refs: Vec<(&str, &Corpus)> = systems.iter().map(|(n, c)| (n.as_str(), c)).collect();
    let report = match layer {
        LayerArg::Gold => divergence_report(&train_corpus, &test, &task, Layer::Gold, &system_refs, buckets)?,
        LayerArg::Initial => {
            let lexicon = match model {
                Some(m) => m.lexicon,
                None => {
                    let keys = init_keys.unwrap_or_else(|| InitKeys::default_for(&schema));
                    build_lexicon(&train_corpus, &keys)?
                }
            };
            divergence_report(
                &initial_state(&train_corpus, &lexicon)?,
                &initial_state(&test, &lexicon)?,
                &task,
                Layer::Current,
                &system_refs,
                buckets,
            )?
        }
    };
    emit(pick_path(&cfg, a.out, "out").as_deref(), &report.table())
}

fn cmd_synth(a: SynthArgs) -> Result<()> {
    let cfg = load_config(a.config.as_deref())?;
    let seed = cfg
        .pick_parsed(a.seed, "seed")?
        .ok_or_else(|| Error::Config("--seed is required".into()))?;
    let sentences = cfg.pick_parsed(a.sentences, "sentences")?.unwrap_or(100);
    let noise = cfg.pick_parsed(a.noise, "noise")?.unwrap_or(0.0);
    let synth = synth_corpus(&SynthConfig::new(sentences, noise, seed))?;
    if let Some(path) = a.clean {
        emit(Some(&path), &write_column_corpus(&synth.clean, Layer::Gold)?)?;
    }
    emit(
        pick_path(&cfg, a.out, "out").as_deref(),
        &write_column_corpus(&synth.noisy, Layer::Gold)?,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schema_defaults_and_overrides() {
        let cfg = ConfigFile::default();
        let (schema, keys) = resolve_schema(&SchemaArgs::default(), &cfg).unwrap();
        assert_eq!(schema.streams().len(), 3);
        assert_eq!(schema.tasks().len(), 2);
        assert!(keys.is_none());
        let args = SchemaArgs {
            streams: Some("char,seg,pos".into()),
            weights: Some("pos=1/2".into()),
            init: Some("seg=char,pos=char".into()),
            ..SchemaArgs::default()
        };
        let (schema, keys) = resolve_schema(&args, &cfg).unwrap();
        assert_eq!(schema.weight(2), Some(Rational64::new(1, 2)));
        assert_eq!(keys.unwrap().key_of("pos"), Some("char"));
        let cyclic = SchemaArgs {
            init: Some("pos=chunk,chunk=pos".into()),
            ..SchemaArgs::default()
        };
        assert!(resolve_schema(&cyclic, &cfg).unwrap_err().is_config());
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(run(["mtbl"]), EXIT_CONFIG);
        assert_eq!(run(["mtbl", "train", "--mode", "sideways"]), EXIT_CONFIG);
        assert_eq!(run(["mtbl", "train"]), EXIT_CONFIG);
        assert_eq!(run(["mtbl", "synth", "--sentences", "0"]), EXIT_CONFIG);
    }
}
