//! `efl`: reformulate, augment, sample, run and score few-shot experiments.

mod data;

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use efl_core::backend::mock::serve;
use efl_core::backend::{Backend, BackendKind, BridgeBackend, BuiltinBackend, Hyperparams};
use efl_core::corpus::synthetic::{fixture, gen_synthetic, pseudo_language, sweep_fixture_names, PRETRAIN_FIXTURE};
use efl_core::corpus::{save_records, Dataset, MetricKind, TaskKind, TaskRegistry};
use efl_core::metrics::{evaluate, read_predictions, Value};
use efl_core::protocol::{
    ablate_descriptions, multilingual_eval, prepare, run_protocol, sample_few_shot, train_seed, transfer_sweep,
    write_ablation_csv, Method, RunReport, RunSpec, SweepTask,
};
use efl_core::reformulator::{
    read_jsonl, reformulate_binary, reformulate_multiclass, reformulate_pair, reformulate_regression, write_jsonl,
    EntailmentInstance,
};
use efl_core::uca::{build_uca_set, AugmentConfig, Lexicon};
use efl_core::{ErrorKind, Rng};

use data::DataArgs;

/// Bad invocation detected by the CLI itself.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Parser)]
#[command(name = "efl", version, about = "Entailment-style few-shot learning toolkit")]
struct Cli {
    /// Extra task registry (JSON); its tasks are added to the built-in ones
    #[arg(long, global = true)]
    registry: Option<PathBuf>,
    /// Directory receiving every file the command writes
    #[arg(long, global = true, default_value = "efl-out")]
    out_dir: PathBuf,
    /// Training backend; `bridge` launches the program named by EFL_BRIDGE_CMD
    #[arg(long, global = true, value_enum, default_value = "builtin")]
    backend: BackendChoice,
    /// Run seeds (or sweep rows) concurrently
    #[arg(long, global = true)]
    parallel: bool,
    #[command(flatten)]
    hyper: HyperArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BackendChoice {
    Builtin,
    Bridge,
}

impl From<BackendChoice> for BackendKind {
    fn from(b: BackendChoice) -> Self {
        match b {
            BackendChoice::Builtin => BackendKind::Builtin,
            BackendChoice::Bridge => BackendKind::Bridge,
        }
    }
}

/// Overrides for the few-shot training regime.
#[derive(Debug, Clone, Args)]
struct HyperArgs {
    /// Learning rate
    #[arg(long, global = true)]
    lr: Option<f64>,
    /// Mini-batch size
    #[arg(long, global = true)]
    batch_size: Option<usize>,
    /// Training epochs
    #[arg(long, global = true)]
    epochs: Option<usize>,
    /// Share of steps used for linear warm-up (0 keeps the rate constant)
    #[arg(long, global = true)]
    warmup_ratio: Option<f64>,
    /// Decoupled weight decay
    #[arg(long, global = true)]
    weight_decay: Option<f64>,
}

impl HyperArgs {
    fn apply(&self, mut h: Hyperparams) -> Hyperparams {
        if let Some(v) = self.lr {
            h.learning_rate = v;
        }
        if let Some(v) = self.batch_size {
            h.batch_size = v;
        }
        if let Some(v) = self.epochs {
            h.max_epochs = v;
        }
        if let Some(v) = self.warmup_ratio {
            h.warmup_ratio = v;
        }
        if let Some(v) = self.weight_decay {
            h.weight_decay = v;
        }
        h
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodChoice {
    Majority,
    StandardFt,
    Efl,
    EflWoPt,
    Stilts,
}

impl From<MethodChoice> for Method {
    fn from(m: MethodChoice) -> Self {
        match m {
            MethodChoice::Majority => Method::Majority,
            MethodChoice::StandardFt => Method::StandardFt,
            MethodChoice::Efl => Method::Efl,
            MethodChoice::EflWoPt => Method::EflWoPt,
            MethodChoice::Stilts => Method::Stilts,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MetricChoice {
    Accuracy,
    BinaryF1,
    MacroF1,
    Pearson,
}

impl From<MetricChoice> for MetricKind {
    fn from(m: MetricChoice) -> Self {
        match m {
            MetricChoice::Accuracy => MetricKind::Accuracy,
            MetricChoice::BinaryF1 => MetricKind::BinaryF1,
            MetricChoice::MacroF1 => MetricKind::MacroF1,
            MetricChoice::Pearson => MetricKind::Pearson,
        }
    }
}

/// Pretraining options shared by `run`, `ablate` and `multilingual`.
#[derive(Debug, Clone, Args)]
struct PretrainArgs {
    /// Entailment corpus (efl) or source task (stilts): a fixture name or a file
    #[arg(long)]
    pretrain: Option<String>,
    /// Registered task describing the --pretrain file
    #[arg(long)]
    pretrain_task: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Write a task's training split in entailment form
    Reformulate {
        #[arg(long)]
        task: String,
        #[command(flatten)]
        data: DataArgs,
        /// Sample K records per class first
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        seed: u64,
    },
    /// Append contrastive pairs to an entailment JSONL file
    Augment {
        #[arg(long)]
        task: String,
        /// Entailment instances produced by `reformulate`
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        seed: u64,
        /// Positives and negatives generated per class
        #[arg(long)]
        budget: Option<usize>,
        /// Probability that a negative pairs two different training sentences
        #[arg(long)]
        downsample: Option<f64>,
        /// Tab-separated synonym lexicon (word, then synonyms)
        #[arg(long)]
        lexicon: Option<PathBuf>,
    },
    /// Draw a K-shot split
    Sample {
        #[arg(long)]
        task: String,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        seed: u64,
    },
    /// Run one method over several seeds and write a report
    Run {
        #[arg(long)]
        task: String,
        #[arg(long, value_enum)]
        method: MethodChoice,
        #[arg(long, default_value_t = 8)]
        k: usize,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
        seeds: Vec<u64>,
        /// Add contrastive augmentation to the training set
        #[arg(long)]
        uca: bool,
        /// Include per-seed wall time in the report
        #[arg(long)]
        wall_time: bool,
        #[command(flatten)]
        pretrain: PretrainArgs,
        #[command(flatten)]
        data: DataArgs,
    },
    /// Source-to-target transfer matrix over fixture tasks
    Sweep {
        /// Tasks to sweep (defaults to the 11 sweep fixtures)
        #[arg(long, value_delimiter = ',')]
        tasks: Vec<String>,
        #[arg(long, default_value_t = 8)]
        k: usize,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
        seeds: Vec<u64>,
    },
    /// Compare label-description candidates
    Ablate {
        #[arg(long)]
        task: String,
        /// JSON array of objects mapping class id to description
        #[arg(long)]
        candidates: PathBuf,
        #[arg(long, value_enum, default_value = "efl-wo-pt")]
        method: MethodChoice,
        #[arg(long, default_value_t = 8)]
        k: usize,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
        seeds: Vec<u64>,
        #[command(flatten)]
        pretrain: PretrainArgs,
        #[command(flatten)]
        data: DataArgs,
    },
    /// Compute a metric over a predictions JSONL file
    Score {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long, value_enum)]
        metric: MetricChoice,
        /// Number of classes for macro-F1 (defaults to the largest id + 1)
        #[arg(long)]
        n_classes: Option<usize>,
    },
    /// Train once and evaluate on per-language test sets with the English descriptions
    Multilingual {
        #[arg(long)]
        task: String,
        #[arg(long, value_delimiter = ',', required = true)]
        languages: Vec<String>,
        /// `lang=path` test sets; fixture tasks synthesize missing ones
        #[arg(long = "test-set")]
        test_sets: Vec<String>,
        #[arg(long, value_enum, default_value = "efl-wo-pt")]
        method: MethodChoice,
        #[arg(long, default_value_t = 8)]
        k: usize,
        #[arg(long)]
        seed: u64,
        #[command(flatten)]
        pretrain: PretrainArgs,
        #[command(flatten)]
        data: DataArgs,
    },
    /// Write fixture splits or a synthetic dataset as JSONL
    Gen {
        /// Fixture to materialize
        #[arg(long)]
        fixture: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 10)]
        n_per_class: usize,
        #[arg(long, default_value_t = 2)]
        classes: usize,
        #[arg(long, default_value_t = 1.0)]
        separability: f64,
    },
    /// Print the task registry as JSON
    Registry,
    #[command(hide = true)]
    MockBridge {
        /// Directory for relative paths in requests
        #[arg(long)]
        root: Option<PathBuf>,
    },
}

struct Ctx {
    registry: TaskRegistry,
    out_dir: PathBuf,
    backend: BackendChoice,
    parallel: bool,
    hyper: HyperArgs,
}

impl Ctx {
    fn out(&self, name: &str) -> Result<PathBuf> {
        fs::create_dir_all(&self.out_dir).with_context(|| format!("creating {}", self.out_dir.display()))?;
        Ok(self.out_dir.join(name))
    }

    fn backend(&self) -> Result<Box<dyn Backend>> {
        Ok(match self.backend {
            BackendChoice::Builtin => Box::new(BuiltinBackend),
            BackendChoice::Bridge => Box::new(BridgeBackend::from_env(&self.out_dir.join("bridge"))?),
        })
    }

    fn run_spec(
        &self,
        task: &str,
        method: Method,
        data: &DataArgs,
        pretrain: &PretrainArgs,
        k: usize,
        seeds: Vec<u64>,
    ) -> Result<RunSpec> {
        let source = if method.needs_pretrain() {
            Some(match (&pretrain.pretrain, fixture(task)) {
                (Some(s), _) => s.clone(),
                (None, Some(_)) => PRETRAIN_FIXTURE.to_string(),
                (None, None) => bail!(UsageError(format!("method {} needs --pretrain", method.name()))),
            })
        } else {
            None
        };
        let train = data::split(&self.registry, task, data, "train")?;
        let test = data::split(&self.registry, task, data, "test")?;
        let mut spec = RunSpec::new(train, test, method, self.backend.into());
        spec.k = k;
        spec.seeds = seeds;
        spec.parallel = self.parallel;
        spec.few_shot = self.hyper.apply(spec.few_shot);
        if let Some(source) = source {
            spec.pretrain = Some(data::pretrain_source(
                &self.registry,
                &source,
                pretrain.pretrain_task.as_deref(),
                data,
            )?);
        }
        Ok(spec)
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn jsonl_bytes<T: serde::Serialize>(items: &[T]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_jsonl(items, &mut buf)?;
    Ok(buf)
}

fn percent(v: f64) -> String {
    format!("{:.1}", v * 100.0)
}

fn metric_name(m: MetricKind) -> &'static str {
    match m {
        MetricKind::Accuracy => "accuracy",
        MetricKind::BinaryF1 => "binary_f1",
        MetricKind::MacroF1 => "macro_f1",
        MetricKind::Pearson => "pearson",
    }
}

fn cmd_reformulate(ctx: &Ctx, task: &str, data: &DataArgs, k: Option<usize>, seed: u64) -> Result<()> {
    let mut ds = data::split(&ctx.registry, task, data, "train")?;
    if let Some(k) = k {
        let split = sample_few_shot(&ds, k, seed)?;
        ds = ds.subset("train", &split.uids())?;
    }
    let spec = ds.task.clone();
    let bytes = match spec.kind {
        TaskKind::SentencePair => jsonl_bytes(&reformulate_pair(&ds)?)?,
        TaskKind::Regression => {
            jsonl_bytes(&reformulate_regression(&ds, spec.description(0))?)?
        }
        TaskKind::SingleSentence if spec.is_binary() => {
            let desc = spec
                .description(1)
                .ok_or_else(|| UsageError(format!("{task} has no class-1 description")))?;
            jsonl_bytes(&reformulate_binary(&ds, desc)?)?
        }
        TaskKind::SingleSentence => {
            let groups = ds.by_class();
            let per_class = k.unwrap_or_else(|| groups.values().map(Vec::len).min().unwrap_or(0));
            let mut rng = Rng::derive(seed, &[1]);
            jsonl_bytes(&reformulate_multiclass(&groups, &spec.descriptions, per_class, &mut rng)?)?
        }
    };
    let path = ctx.out(&format!("{task}.entail.jsonl"))?;
    write_file(&path, &bytes)?;
    println!("{}", path.display());
    Ok(())
}

fn cmd_augment(
    ctx: &Ctx,
    task: &str,
    input: &Path,
    seed: u64,
    budget: Option<usize>,
    downsample: Option<f64>,
    lexicon: Option<&Path>,
) -> Result<()> {
    let spec = data::task_spec(&ctx.registry, task)?;
    let file = File::open(input).with_context(|| format!("opening {}", input.display()))?;
    let mut instances: Vec<EntailmentInstance> = read_jsonl(BufReader::new(file))?;
    let mut cfg = AugmentConfig::default();
    if let Some(b) = budget {
        cfg.per_class_budget = b;
    }
    if let Some(d) = downsample {
        cfg.neg_downsample_frac = d;
    }
    if let Some(path) = lexicon {
        cfg.lexicon = Some(Lexicon::load(path)?);
    }
    let extra = build_uca_set(&instances, spec.kind, &cfg, &mut Rng::new(seed))?;
    instances.extend(extra);
    let stem = input.file_stem().and_then(|s| s.to_str()).unwrap_or(task);
    let path = ctx.out(&format!("{stem}.uca.jsonl"))?;
    write_file(&path, &jsonl_bytes(&instances)?)?;
    println!("{}", path.display());
    Ok(())
}

fn cmd_sample(ctx: &Ctx, task: &str, data: &DataArgs, k: usize, seed: u64) -> Result<()> {
    let ds = data::split(&ctx.registry, task, data, "train")?;
    let split = sample_few_shot(&ds, k, seed)?;
    let path = ctx.out(&format!("{task}.split-k{k}-seed{seed}.json"))?;
    write_file(&path, (serde_json::to_string_pretty(&split)? + "\n").as_bytes())?;
    println!("{}", path.display());
    Ok(())
}

fn write_report(ctx: &Ctx, report: &RunReport, stem: &str) -> Result<()> {
    let json = ctx.out(&format!("{stem}.report.json"))?;
    write_file(&json, report.to_json()?.as_bytes())?;
    let csv = ctx.out(&format!("{stem}.report.csv"))?;
    write_file(&csv, report.to_csv()?.as_bytes())?;
    println!("{}", json.display());
    println!("{}", csv.display());
    println!(
        "{} {} {} {} ({})",
        report.task,
        report.method.name(),
        metric_name(report.metric),
        percent(report.mean),
        percent(report.std)
    );
    Ok(())
}

fn cmd_run(ctx: &Ctx, args: RunArgs) -> Result<()> {
    let method: Method = args.method.into();
    let mut spec = ctx.run_spec(&args.task, method, &args.data, &args.pretrain, args.k, args.seeds)?;
    if args.uca {
        spec.uca = Some(AugmentConfig::default());
    }
    spec.record_wall_time = args.wall_time;
    let backend = ctx.backend()?;
    let result = run_protocol(&spec, backend.as_ref())?;
    let uca = if args.uca { ".uca" } else { "" };
    write_report(ctx, &result.report, &format!("{}.{}{uca}.k{}", args.task, method.name(), args.k))
}

struct RunArgs {
    task: String,
    method: MethodChoice,
    k: usize,
    seeds: Vec<u64>,
    uca: bool,
    wall_time: bool,
    pretrain: PretrainArgs,
    data: DataArgs,
}

fn cmd_sweep(ctx: &Ctx, tasks: Vec<String>, k: usize, seeds: &[u64]) -> Result<()> {
    let names = if tasks.is_empty() { sweep_fixture_names() } else { tasks };
    let none = DataArgs {
        train: None,
        test: None,
        format: data::Format::Jsonl,
        columns: None,
        header: false,
    };
    let tasks: Vec<SweepTask> = names
        .iter()
        .map(|n| {
            Ok(SweepTask {
                train: data::split(&ctx.registry, n, &none, "train")?,
                test: data::split(&ctx.registry, n, &none, "test")?,
            })
        })
        .collect::<Result<_>>()?;
    let kind: BackendKind = ctx.backend.into();
    let few = ctx.hyper.apply(Hyperparams::few_shot().for_backend(kind));
    let full = Hyperparams::full_data().for_backend(kind);
    let backend = ctx.backend()?;
    let matrix = transfer_sweep(&tasks, k, seeds, backend.as_ref(), few, full, ctx.parallel)?;
    let csv = ctx.out("sweep.csv")?;
    write_file(&csv, matrix.to_csv()?.as_bytes())?;
    let json = ctx.out("sweep.json")?;
    write_file(&json, (serde_json::to_string_pretty(&matrix)? + "\n").as_bytes())?;
    println!("{}", csv.display());
    println!("{}", json.display());
    let failed = matrix.cells.iter().filter(|c| c.error.is_some()).count();
    println!("{} cells, {} failed", matrix.cells.len(), failed);
    Ok(())
}

fn parse_candidates(path: &Path) -> Result<Vec<BTreeMap<usize, String>>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let raw: Vec<BTreeMap<String, String>> =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    raw.into_iter()
        .map(|m| {
            m.into_iter()
                .map(|(k, v)| {
                    let id = k
                        .parse()
                        .map_err(|_| UsageError(format!("candidate key {k:?} is not a class id")))?;
                    Ok((id, v))
                })
                .collect()
        })
        .collect()
}

fn cmd_ablate(ctx: &Ctx, args: AblateArgs) -> Result<()> {
    let candidates = parse_candidates(&args.candidates)?;
    let spec = ctx.run_spec(&args.task, args.method.into(), &args.data, &args.pretrain, args.k, args.seeds)?;
    let backend = ctx.backend()?;
    let rows = ablate_descriptions(&spec, &candidates, backend.as_ref())?;
    let path = ctx.out(&format!("{}.ablation.csv", args.task))?;
    let mut buf = Vec::new();
    write_ablation_csv(&rows, &mut buf)?;
    write_file(&path, &buf)?;
    println!("{}", path.display());
    for row in &rows {
        println!("{}\t{} ({})", row.key, percent(row.report.mean), percent(row.report.std));
    }
    Ok(())
}

struct AblateArgs {
    task: String,
    candidates: PathBuf,
    method: MethodChoice,
    k: usize,
    seeds: Vec<u64>,
    pretrain: PretrainArgs,
    data: DataArgs,
}

fn cmd_score(predictions: &Path, metric: MetricChoice, n_classes: Option<usize>) -> Result<()> {
    let file = File::open(predictions).with_context(|| format!("opening {}", predictions.display()))?;
    let preds = read_predictions(BufReader::new(file))?;
    let n = n_classes.unwrap_or_else(|| {
        preds
            .iter()
            .flat_map(|p| [p.predicted, p.gold])
            .filter_map(|v| match v {
                Value::Class(c) => Some(c + 1),
                Value::Score(_) => None,
            })
            .max()
            .unwrap_or(0)
    });
    let metric: MetricKind = metric.into();
    println!("{} {}", metric_name(metric), evaluate(metric, &preds, n)?);
    Ok(())
}

fn cmd_multilingual(ctx: &Ctx, args: MultilingualArgs) -> Result<()> {
    let method: Method = args.method.into();
    if method == Method::Majority {
        bail!(UsageError("multilingual evaluation needs a trained method".into()));
    }
    let spec = ctx.run_spec(&args.task, method, &args.data, &args.pretrain, args.k, vec![args.seed])?;
    let mut given: BTreeMap<String, PathBuf> = BTreeMap::new();
    for entry in &args.test_sets {
        let (lang, path) = entry
            .split_once('=')
            .ok_or_else(|| UsageError(format!("--test-set expects lang=path, got {entry:?}")))?;
        given.insert(lang.to_string(), PathBuf::from(path));
    }
    let is_fixture = fixture(&args.task).is_some();
    let mut sets: BTreeMap<String, Dataset> = BTreeMap::new();
    for lang in &args.languages {
        let ds = match given.get(lang) {
            Some(path) => args.data.load(path, spec.train.task.clone(), lang)?,
            None if is_fixture && lang == "en" => spec.test.clone(),
            None if is_fixture => pseudo_language(&spec.test, lang),
            None => bail!(UsageError(format!("no test set for language {lang}; pass --test-set {lang}=<file>"))),
        };
        sets.insert(lang.clone(), ds);
    }
    let backend = ctx.backend()?;
    let prepared = prepare(&spec, backend.as_ref())?;
    let (handle, _, _, _) = train_seed(&spec, &prepared, backend.as_ref(), args.seed)?;
    let report = multilingual_eval(backend.as_ref(), &handle, spec.task(), method, &args.languages, &sets)?;
    let path = ctx.out(&format!("{}.multilingual.json", args.task))?;
    write_file(&path, (serde_json::to_string_pretty(&report)? + "\n").as_bytes())?;
    println!("{}", path.display());
    for (lang, score) in &report.scores {
        println!("{lang}\t{}", percent(*score));
    }
    println!("average\t{}", percent(report.average));
    Ok(())
}

struct MultilingualArgs {
    task: String,
    languages: Vec<String>,
    test_sets: Vec<String>,
    method: MethodChoice,
    k: usize,
    seed: u64,
    pretrain: PretrainArgs,
    data: DataArgs,
}

fn cmd_gen(
    ctx: &Ctx,
    name: Option<&str>,
    seed: Option<u64>,
    n_per_class: usize,
    classes: usize,
    separability: f64,
) -> Result<()> {
    let outputs: Vec<(String, Dataset)> = match name {
        Some(name) => {
            let fx = fixture(name).ok_or_else(|| UsageError(format!("unknown fixture {name}")))?;
            vec![(format!("{name}.train.jsonl"), fx.train()?), (format!("{name}.test.jsonl"), fx.test()?)]
        }
        None => {
            let seed = seed.ok_or_else(|| UsageError("gen needs --seed or --fixture".into()))?;
            let ds = gen_synthetic(seed, n_per_class, classes, separability)?;
            vec![(format!("synthetic{classes}.seed{seed}.jsonl"), ds)]
        }
    };
    for (file, ds) in outputs {
        let path = ctx.out(&file)?;
        save_records(&ds, &path)?;
        println!("{}", path.display());
    }
    Ok(())
}

fn load_registry(path: Option<&Path>) -> Result<TaskRegistry> {
    let mut registry = TaskRegistry::builtin();
    if let Some(path) = path {
        let extra = TaskRegistry::load(path)?;
        for name in extra.names() {
            registry.register((*extra.get(name)?).clone())?;
        }
    }
    Ok(registry)
}

fn execute(cli: Cli) -> Result<()> {
    if let Command::MockBridge { root } = &cli.command {
        let root = root.clone().unwrap_or_else(|| cli.out_dir.clone());
        let stdin = io::stdin().lock();
        let stdout = BufWriter::new(io::stdout().lock());
        serve(stdin, stdout, &root)?;
        return Ok(());
    }
    let ctx = Ctx {
        registry: load_registry(cli.registry.as_deref())?,
        out_dir: cli.out_dir,
        backend: cli.backend,
        parallel: cli.parallel,
        hyper: cli.hyper,
    };
    match cli.command {
        Command::Reformulate { task, data, k, seed } => cmd_reformulate(&ctx, &task, &data, k, seed),
        Command::Augment {
            task,
            input,
            seed,
            budget,
            downsample,
            lexicon,
        } => cmd_augment(&ctx, &task, &input, seed, budget, downsample, lexicon.as_deref()),
        Command::Sample { task, data, k, seed } => cmd_sample(&ctx, &task, &data, k, seed),
        Command::Run {
            task,
            method,
            k,
            seeds,
            uca,
            wall_time,
            pretrain,
            data,
        } => cmd_run(
            &ctx,
            RunArgs {
                task,
                method,
                k,
                seeds,
                uca,
                wall_time,
                pretrain,
                data,
            },
        ),
        Command::Sweep { tasks, k, seeds } => cmd_sweep(&ctx, tasks, k, &seeds),
        Command::Ablate {
            task,
            candidates,
            method,
            k,
            seeds,
            pretrain,
            data,
        } => cmd_ablate(
            &ctx,
            AblateArgs {
                task,
                candidates,
                method,
                k,
                seeds,
                pretrain,
                data,
            },
        ),
        Command::Score {
            predictions,
            metric,
            n_classes,
        } => cmd_score(&predictions, metric, n_classes),
        Command::Multilingual {
            task,
            languages,
            test_sets,
            method,
            k,
            seed,
            pretrain,
            data,
        } => cmd_multilingual(
            &ctx,
            MultilingualArgs {
                task,
                languages,
                test_sets,
                method,
                k,
                seed,
                pretrain,
                data,
            },
        ),
        Command::Gen {
            fixture,
            seed,
            n_per_class,
            classes,
            separability,
        } => cmd_gen(&ctx, fixture.as_deref(), seed, n_per_class, classes, separability),
        Command::Registry => {
            print!("{}", ctx.registry.to_json()?);
            Ok(())
        }
        Command::MockBridge { .. } => unreachable!("handled above"),
    }
}

const EXIT_USAGE: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_BACKEND: u8 = 4;
const EXIT_INTERNAL: u8 = 5;

fn classify(err: &anyhow::Error) -> (u8, &'static str) {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return (EXIT_USAGE, "usage");
        }
        if let Some(e) = cause.downcast_ref::<efl_core::Error>() {
            return match e.kind() {
                ErrorKind::Usage => (EXIT_USAGE, "usage"),
                ErrorKind::Data => (EXIT_DATA, "data"),
                ErrorKind::Backend => (EXIT_BACKEND, "backend"),
                ErrorKind::Internal => (EXIT_INTERNAL, "internal"),
            };
        }
        if cause.is::<io::Error>() || cause.is::<serde_json::Error>() {
            return (EXIT_DATA, "data");
        }
    }
    (EXIT_INTERNAL, "internal")
}

/// Joins the error chain, skipping causes the previous message already shows.
fn chain_message(err: &anyhow::Error) -> String {
    let mut parts: Vec<String> = Vec::new();
    for cause in err.chain() {
        let text = cause.to_string();
        if parts.last().is_some_and(|prev| prev.contains(&text)) {
            continue;
        }
        parts.push(text);
    }
    parts.join(": ")
}

fn report_error(kind: &str, message: &str) {
    let line = serde_json::json!({ "error": kind, "message": message.replace('\n', " ") });
    eprintln!("{line}");
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            report_error("usage", e.to_string().trim());
            return ExitCode::from(EXIT_USAGE);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let (code, kind) = classify(&err);
            report_error(kind, &chain_message(&err));
            let _ = io::stdout().flush();
            ExitCode::from(code)
        }
    }
}
