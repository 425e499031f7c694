use clap::{Args, Parser, Subcommand};
use damp_core::attack::{
    attack, baseline_attack, build_tfidf_table, AttackConfig, AttackMode, AttackTarget,
    BaselineKind, Strategy, VariableSelection,
};
use damp_core::corpus::{from_jsonl, generate_corpus, split_dataset, to_jsonl, GeneratorConfig};
use damp_core::defense::DefenseConfig;
use damp_core::eval::{
    load_inputs, run_sigma_sweep, AttackKind, AttackSpecEntry, EvalError, ExperimentSpec,
    ModeKind, RobustnessReport, StrategyKind,
};
use damp_core::minilang::variables;
use damp_core::model::{save_checkpoint, train, TrainConfig};
use damp_core::pathctx::{encode, extract_path_contexts, ExtractionConfig, NameMode, Vocabulary};
use damp_core::rng::derive_seed;
use std::path::{Path, PathBuf};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    EmptyFilteredSet,
    Io(String),
    Artifact(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::EmptyFilteredSet => write!(f, "the filtered evaluation set is empty"),
            CliError::Io(m) => write!(f, "{m}"),
            CliError::Artifact(m) => write!(f, "{m}"),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::EmptyFilteredSet => CliError::EmptyFilteredSet,
            EvalError::MissingArtifact { .. } => CliError::Artifact(e.to_string()),
            EvalError::Corpus(_) | EvalError::Checkpoint(_) | EvalError::Vocab(_) => {
                CliError::Artifact(e.to_string())
            }
            other => CliError::Usage(other.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "damp",
    version,
    about = "Train a path-attention method-name classifier over a toy language, attack it with gradient-guided renamings, and evaluate defenses"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Generate a labeled synthetic corpus (JSONL).
    GenCorpus(GenCorpusArgs),
    /// Train a classifier on the train split of a corpus.
    Train(TrainArgs),
    /// Attack the test split of a corpus and write per-example results.
    Attack(AttackArgs),
    /// Run the attack × defense × target grid and write reports.
    DefendEval(DefendEvalArgs),
    /// Trade-off curve for the outlier-detection threshold.
    SweepSigma(SweepSigmaArgs),
    /// Render the text table from a report.json.
    Report(ReportArgs),
}

#[derive(Args)]
pub struct GenCorpusArgs {
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, default_value_t = 250)]
    pub methods_per_label: usize,
    /// Comma-separated label subset; defaults to all eight templates.
    #[arg(long)]
    pub labels: Option<String>,
    #[arg(long, default_value_t = 0.6)]
    pub dead_prob: f64,
    #[arg(long, default_value_t = 2)]
    pub max_dead: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Checkpoint output path; the vocabulary lands next to it unless
    /// --vocab-out is given.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub vocab_out: Option<PathBuf>,
    /// JSON file with TrainConfig fields; explicit flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_parser = parse_mode)]
    pub mode: Option<NameMode>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub embed_dim: Option<usize>,
    #[arg(long)]
    pub hidden_dim: Option<usize>,
    /// Train with J + J_adv (adversarial training).
    #[arg(long)]
    pub adversarial: bool,
    /// Mask every variable at train time (train-without-vars pipeline).
    #[arg(long)]
    pub mask_variables: bool,
    /// Token-table cap for the vocabulary.
    #[arg(long, default_value_t = 512)]
    pub vocab_size: usize,
    #[arg(long, value_parser = parse_ratios, default_value = "0.8,0.1,0.1")]
    pub split_ratios: (f64, f64, f64),
    #[arg(long, default_value_t = 3)]
    pub split_seed: u64,
    #[arg(long, default_value_t = 8)]
    pub max_path_length: usize,
    #[arg(long, default_value_t = 200)]
    pub max_contexts: usize,
}

#[derive(Args)]
pub struct AttackArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, value_parser = parse_attack_kind, default_value = "damp")]
    pub attack: AttackKind,
    #[arg(long, value_parser = parse_mode_kind, default_value = "non-targeted")]
    pub mode: ModeKind,
    /// Adversarial target label (targeted mode).
    #[arg(long)]
    pub target: Option<String>,
    #[arg(long, value_parser = parse_strategy, default_value = "varname")]
    pub strategy: StrategyKind,
    #[arg(long, default_value_t = 2)]
    pub width: usize,
    #[arg(long, default_value_t = 2)]
    pub depth: usize,
    #[arg(long, default_value_t = 6)]
    pub budget: usize,
    #[arg(long, default_value_t = 17)]
    pub seed: u64,
    /// Cap on test examples scanned.
    #[arg(long)]
    pub limit: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_parser = parse_ratios, default_value = "0.8,0.1,0.1")]
    pub split_ratios: (f64, f64, f64),
    #[arg(long, default_value_t = 3)]
    pub split_seed: u64,
}

#[derive(Args)]
pub struct DefendEvalArgs {
    /// JSON ExperimentSpec; explicit flags override its fields.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Comma-separated defenses, e.g.
    /// no-defense,no-vars,outlier:2.7,train-without-vars,adversarial-training,vocab-reduction:64
    #[arg(long)]
    pub defenses: Option<String>,
    /// Comma-separated attacks as kind:mode:strategy, e.g.
    /// damp:targeted:varname,random-var:non-targeted:varname
    #[arg(long)]
    pub attacks: Option<String>,
    #[arg(long)]
    pub targets: Option<usize>,
    /// Minimum training frequency for a label to be a target.
    #[arg(long)]
    pub target_floor: Option<usize>,
    #[arg(long)]
    pub budget: Option<usize>,
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long)]
    pub max_per_cell: Option<usize>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub attack_seed: Option<u64>,
    #[arg(long, default_value = "damp-out")]
    pub out_dir: PathBuf,
}

#[derive(Args)]
pub struct SweepSigmaArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    #[arg(long)]
    pub corpus: PathBuf,
    /// Comma-separated thresholds.
    #[arg(long, default_value = "0,0.2,0.4,0.8,1.2,1.6,2.2,2.7,4,8")]
    pub sigmas: String,
    #[arg(long, default_value_t = 2)]
    pub width: usize,
    #[arg(long, default_value_t = 2)]
    pub depth: usize,
    #[arg(long, default_value_t = 6)]
    pub budget: usize,
    #[arg(long)]
    pub max_per_cell: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub report: PathBuf,
    /// Write the table here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_mode(s: &str) -> Result<NameMode, String> {
    match s {
        "token" => Ok(NameMode::Token),
        "char" => Ok(NameMode::Char),
        other => Err(format!("unknown name mode {other:?} (token|char)")),
    }
}

fn parse_mode_kind(s: &str) -> Result<ModeKind, String> {
    match s {
        "targeted" => Ok(ModeKind::Targeted),
        "non-targeted" | "non_targeted" => Ok(ModeKind::NonTargeted),
        other => Err(format!("unknown mode {other:?} (targeted|non-targeted)")),
    }
}

fn parse_strategy(s: &str) -> Result<StrategyKind, String> {
    match s {
        "varname" | "var-name" | "var_name" => Ok(StrategyKind::VarName),
        "deadcode" | "dead-code" | "dead_code" => Ok(StrategyKind::DeadCode),
        other => Err(format!("unknown strategy {other:?} (varname|deadcode)")),
    }
}

fn parse_attack_kind(s: &str) -> Result<AttackKind, String> {
    match s {
        "damp" => Ok(AttackKind::Damp),
        "copy-target" | "copy_target" => Ok(AttackKind::CopyTarget),
        "random-var" | "random_var" => Ok(AttackKind::RandomVar),
        "char-brute-force" | "char_brute_force" => Ok(AttackKind::CharBruteForce),
        "tfidf" => Ok(AttackKind::Tfidf),
        other => Err(format!(
            "unknown attack {other:?} (damp|copy-target|random-var|char-brute-force|tfidf)"
        )),
    }
}

fn parse_ratios(s: &str) -> Result<(f64, f64, f64), String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    if parts.len() != 3 {
        return Err("expected three comma-separated ratios".into());
    }
    if (parts[0] + parts[1] + parts[2] - 1.0).abs() > 1e-9 {
        return Err("ratios must sum to 1".into());
    }
    Ok((parts[0], parts[1], parts[2]))
}

fn parse_defense(s: &str) -> Result<DefenseConfig, CliError> {
    let (kind, arg) = match s.split_once(':') {
        Some((k, a)) => (k, Some(a)),
        None => (s, None),
    };
    let need = |what: &str| CliError::Usage(format!("defense {kind:?} needs :{what}"));
    Ok(match kind {
        "no-defense" | "no_defense" => DefenseConfig::NoDefense,
        "no-vars" | "no_vars" => DefenseConfig::NoVars,
        "outlier" | "outlier-detection" | "outlier_detection" => DefenseConfig::OutlierDetection {
            sigma: arg
                .ok_or_else(|| need("sigma"))?
                .parse()
                .map_err(|e| CliError::Usage(format!("bad sigma: {e}")))?,
        },
        "train-without-vars" | "train_without_vars" => DefenseConfig::TrainWithoutVars,
        "adversarial-training" | "adversarial_training" => DefenseConfig::AdversarialTraining,
        "adversarial-fine-tuning" | "adversarial_fine_tuning" => {
            DefenseConfig::AdversarialFineTuning
        }
        "vocab-reduction" | "vocab_reduction" => DefenseConfig::VocabReduction {
            size: arg
                .ok_or_else(|| need("size"))?
                .parse()
                .map_err(|e| CliError::Usage(format!("bad vocabulary size: {e}")))?,
        },
        other => {
            return Err(CliError::Usage(format!("unknown defense {other:?}")));
        }
    })
}

fn parse_attack_entry(s: &str) -> Result<AttackSpecEntry, CliError> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(CliError::Usage(format!(
            "attack {s:?} must be kind:mode:strategy"
        )));
    }
    Ok(AttackSpecEntry::new(
        parse_attack_kind(parts[0]).map_err(CliError::Usage)?,
        parse_mode_kind(parts[1]).map_err(CliError::Usage)?,
        parse_strategy(parts[2]).map_err(CliError::Usage)?,
    ))
}

/// Relative output paths land under $DAMP_OUT when it is set.
fn resolve_out(path: &Path) -> PathBuf {
    match std::env::var_os("DAMP_OUT") {
        Some(base) if path.is_relative() => PathBuf::from(base).join(path),
        _ => path.to_path_buf(),
    }
}

fn write_out(path: &Path, contents: &str) -> Result<(), CliError> {
    let path = resolve_out(path);
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|e| CliError::Io(format!("cannot create {}: {e}", parent.display())))?;
        }
    }
    std::fs::write(&path, contents)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

fn read_in(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::GenCorpus(args) => gen_corpus(args),
        Command::Train(args) => run_train(args),
        Command::Attack(args) => run_attack(args),
        Command::DefendEval(args) => defend_eval(args),
        Command::SweepSigma(args) => sweep_sigma(args),
        Command::Report(args) => report(args),
    }
}

fn gen_corpus(args: GenCorpusArgs) -> Result<(), CliError> {
    let mut config = GeneratorConfig {
        seed: args.seed,
        methods_per_label: args.methods_per_label,
        dead_stmt_probability: args.dead_prob,
        max_dead_stmts: args.max_dead,
        ..GeneratorConfig::default()
    };
    if let Some(labels) = args.labels {
        config.labels = labels.split(',').map(|s| s.trim().to_string()).collect();
    }
    let corpus = generate_corpus(&config);
    write_out(&args.out, &to_jsonl(&corpus))?;
    println!(
        "wrote {} methods ({} labels) to {}",
        corpus.len(),
        config.labels.len(),
        resolve_out(&args.out).display()
    );
    Ok(())
}

fn run_train(args: TrainArgs) -> Result<(), CliError> {
    let mut config: TrainConfig = match &args.config {
        Some(path) => serde_json::from_str(&read_in(path)?)
            .map_err(|e| CliError::Usage(format!("bad train config: {e}")))?,
        None => TrainConfig::default(),
    };
    if let Some(v) = args.mode {
        config.mode = v;
    }
    if let Some(v) = args.epochs {
        config.epochs = v;
    }
    if let Some(v) = args.lr {
        config.learning_rate = v;
    }
    if let Some(v) = args.batch_size {
        config.batch_size = v;
    }
    if let Some(v) = args.seed {
        config.seed = v;
    }
    if let Some(v) = args.embed_dim {
        config.embed_dim = v;
    }
    if let Some(v) = args.hidden_dim {
        config.hidden_dim = v;
    }
    if args.adversarial {
        config.adversarial = true;
    }

    let corpus = from_jsonl(&read_in(&args.corpus)?)
        .map_err(|e| CliError::Artifact(format!("corpus: {e}")))?;
    let (train_split, _val, _test) = split_dataset(&corpus, args.split_ratios, args.split_seed)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let extraction = ExtractionConfig {
        max_path_length: args.max_path_length,
        max_contexts: args.max_contexts,
    };
    let bags: Vec<_> = train_split
        .iter()
        .filter_map(|m| extract_path_contexts(m, extraction).ok())
        .collect();
    if bags.is_empty() {
        return Err(CliError::EmptyFilteredSet);
    }
    let vocab = Vocabulary::build(&bags, args.vocab_size);
    let encode_one = |m: &damp_core::minilang::MethodAst| {
        let prepared = if args.mask_variables {
            damp_core::defense::mask_all_variables(m)
        } else {
            m.clone()
        };
        extract_path_contexts(&prepared, extraction)
            .ok()
            .map(|b| encode(&b, &vocab, config.mode))
    };
    let examples: Vec<_> = train_split.iter().filter_map(encode_one).collect();

    let outcome = if config.adversarial {
        damp_core::defense::adversarial_train(&vocab, &train_split, &examples, extraction, &config)
    } else {
        train(&vocab, &examples, &config)
    }
    .map_err(|e| CliError::Usage(e.to_string()))?;

    let ckpt_path = resolve_out(&args.out);
    if let Some(parent) = ckpt_path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|e| CliError::Io(format!("cannot create {}: {e}", parent.display())))?;
        }
    }
    save_checkpoint(&outcome.params, &ckpt_path)
        .map_err(|e| CliError::Io(format!("cannot write checkpoint: {e}")))?;
    let vocab_path = args
        .vocab_out
        .unwrap_or_else(|| PathBuf::from(format!("{}.vocab.json", args.out.display())));
    write_out(&vocab_path, &vocab.to_json())?;
    println!(
        "trained {} epochs, loss {:.4} -> {:.4}; checkpoint {}, vocabulary {}",
        outcome.epoch_losses.len(),
        outcome.epoch_losses.first().unwrap_or(&f64::NAN),
        outcome.epoch_losses.last().unwrap_or(&f64::NAN),
        ckpt_path.display(),
        resolve_out(&vocab_path).display()
    );
    Ok(())
}

fn default_vocab_path(model: &Path, vocab: &Option<PathBuf>) -> PathBuf {
    vocab
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{}.vocab.json", model.display())))
}

fn run_attack(args: AttackArgs) -> Result<(), CliError> {
    let vocab_path = default_vocab_path(&args.model, &args.vocab);
    let vocab = Vocabulary::from_json(&read_in(&vocab_path)?)
        .map_err(|e| CliError::Artifact(format!("vocabulary: {e}")))?;
    let params = damp_core::model::load_checkpoint(&args.model, &vocab)
        .map_err(|e| CliError::Artifact(format!("checkpoint: {e}")))?;
    let corpus = from_jsonl(&read_in(&args.corpus)?)
        .map_err(|e| CliError::Artifact(format!("corpus: {e}")))?;
    let (train_split, _val, test) = split_dataset(&corpus, args.split_ratios, args.split_seed)
        .map_err(|e| CliError::Usage(e.to_string()))?;

    let mode = match args.mode {
        ModeKind::Targeted => {
            let label = args.target.as_deref().ok_or_else(|| {
                CliError::Usage("targeted mode needs --target <label>".into())
            })?;
            let target_label = vocab.label_index(label);
            if target_label == 0 {
                return Err(CliError::Usage(format!(
                    "target label {label:?} is not in the label vocabulary"
                )));
            }
            AttackMode::Targeted { target_label }
        }
        ModeKind::NonTargeted => {
            if args.target.is_some() {
                return Err(CliError::Usage(
                    "--target only applies to targeted mode".into(),
                ));
            }
            AttackMode::NonTargeted
        }
    };
    let strategy = match args.strategy {
        StrategyKind::VarName => Strategy::VarName,
        StrategyKind::DeadCode => Strategy::DeadCode,
    };
    let tfidf = matches!(args.attack, AttackKind::Tfidf).then(|| build_tfidf_table(&train_split));

    let target = AttackTarget::new(&params, &vocab);
    let mut lines = String::new();
    let mut evaluated = 0usize;
    let mut successes = 0usize;
    let limit = args.limit.unwrap_or(usize::MAX);
    for (i, method) in test.iter().take(limit).enumerate() {
        let y = vocab.label_index(&method.label);
        let Ok(pred) = target.predict_ast(method) else {
            continue;
        };
        if pred.label_index != y {
            continue;
        }
        if matches!(strategy, Strategy::VarName) && variables(method).is_empty() {
            continue;
        }
        if let AttackMode::Targeted { target_label } = mode {
            if target_label == y {
                continue;
            }
        }
        let config = AttackConfig {
            mode,
            strategy,
            width: args.width,
            depth: args.depth,
            selection: VariableSelection::Random,
            budget: args.budget,
            seed: derive_seed(args.seed, i as u64),
        };
        let result = match args.attack {
            AttackKind::Damp => attack(&target, method, &config),
            kind => baseline_attack(
                kind_to_baseline(kind),
                &target,
                method,
                &config,
                tfidf.as_ref(),
            ),
        };
        let result = match result {
            Ok(r) => r,
            Err(_) => continue,
        };
        evaluated += 1;
        if result.success {
            successes += 1;
        }
        lines.push_str(
            &serde_json::to_string(&result.to_record(&config, &vocab))
                .expect("record serializes"),
        );
        lines.push('\n');
    }
    if evaluated == 0 {
        return Err(CliError::EmptyFilteredSet);
    }
    if let Some(out) = &args.out {
        write_out(out, &lines)?;
    }
    let success_pct = 100.0 * successes as f64 / evaluated as f64;
    println!(
        "{} {} {}: {} examples, {} successes ({:.1}%), robustness {:.1}%",
        args.attack.name(),
        mode.name(),
        strategy.name(),
        evaluated,
        successes,
        success_pct,
        100.0 - success_pct
    );
    Ok(())
}

fn kind_to_baseline(kind: AttackKind) -> BaselineKind {
    match kind {
        AttackKind::CopyTarget => BaselineKind::CopyTarget,
        AttackKind::RandomVar => BaselineKind::RandomVar,
        AttackKind::CharBruteForce => BaselineKind::CharBruteForce,
        AttackKind::Tfidf => BaselineKind::TfIdf,
        AttackKind::Damp => unreachable!("damp is not a baseline"),
    }
}

fn defend_eval(args: DefendEvalArgs) -> Result<(), CliError> {
    let mut spec: ExperimentSpec = match &args.spec {
        Some(path) => serde_json::from_str(&read_in(path)?)
            .map_err(|e| CliError::Usage(format!("bad experiment spec: {e}")))?,
        None => ExperimentSpec::default(),
    };
    if let Some(v) = args.model {
        spec.checkpoint = v;
    }
    if let Some(v) = &args.vocab {
        spec.vocab = v.clone();
    } else if spec.vocab.as_os_str().is_empty() {
        spec.vocab = PathBuf::from(format!("{}.vocab.json", spec.checkpoint.display()));
    }
    if let Some(v) = args.corpus {
        spec.corpus = v;
    }
    if let Some(s) = &args.defenses {
        spec.defenses = s
            .split(',')
            .map(|p| parse_defense(p.trim()))
            .collect::<Result<_, _>>()?;
    }
    if let Some(s) = &args.attacks {
        spec.attacks = s
            .split(',')
            .map(|p| parse_attack_entry(p.trim()))
            .collect::<Result<_, _>>()?;
    }
    if let Some(v) = args.targets {
        spec.target_count = v;
    }
    if let Some(v) = args.target_floor {
        spec.target_floor = v;
    }
    if let Some(v) = args.max_per_cell {
        spec.max_examples_per_cell = v;
    }
    if let Some(v) = args.workers {
        spec.workers = v;
    }
    if let Some(v) = args.attack_seed {
        spec.attack_seed = v;
    }
    for entry in &mut spec.attacks {
        if let Some(v) = args.budget {
            entry.budget = v;
        }
        if let Some(v) = args.width {
            entry.width = v;
        }
        if let Some(v) = args.depth {
            entry.depth = v;
        }
    }

    let output = damp_core::eval::run_experiment(&spec)?;
    let dir = args.out_dir;
    write_out(&dir.join("report.json"), &output.report.to_json())?;
    write_out(&dir.join("report.txt"), &output.report.to_text())?;
    let mut raw = String::new();
    for record in &output.raw {
        raw.push_str(&serde_json::to_string(record).expect("record serializes"));
        raw.push('\n');
    }
    write_out(&dir.join("raw_results.jsonl"), &raw)?;
    for cell in &output.report.cells {
        println!(
            "{} {} {} vs {}{}: n={} success {} robustness {}",
            cell.attack,
            cell.mode,
            cell.strategy,
            cell.defense,
            cell.target
                .as_ref()
                .map(|t| format!(" -> {t}"))
                .unwrap_or_default(),
            cell.evaluated,
            cell.success_pct
                .map(|p| format!("{p:.1}%"))
                .unwrap_or_else(|| "-".into()),
            cell.robustness_pct
                .map(|p| format!("{p:.1}%"))
                .unwrap_or_else(|| "-".into()),
        );
    }
    println!("reports in {}", resolve_out(&dir).display());
    Ok(())
}

fn sweep_sigma(args: SweepSigmaArgs) -> Result<(), CliError> {
    let sigmas: Vec<f64> = args
        .sigmas
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Usage(format!("bad sigma list: {e}")))?;
    if sigmas.is_empty() {
        return Err(CliError::Usage("need at least one sigma".into()));
    }
    let mut spec = ExperimentSpec {
        checkpoint: args.model.clone(),
        vocab: default_vocab_path(&args.model, &args.vocab),
        corpus: args.corpus,
        ..ExperimentSpec::default()
    };
    if let Some(v) = args.max_per_cell {
        spec.max_examples_per_cell = v;
    }
    let mut entry = AttackSpecEntry::new(
        AttackKind::Damp,
        ModeKind::NonTargeted,
        StrategyKind::VarName,
    );
    entry.width = args.width;
    entry.depth = args.depth;
    entry.budget = args.budget;
    let inputs = load_inputs(&spec)?;
    let rows = run_sigma_sweep(&spec, &inputs, &sigmas, entry)?;
    let report = RobustnessReport {
        targets: vec![],
        clean: vec![],
        cells: vec![],
        sweep: rows,
    };
    print!("{}", report.to_text());
    if let Some(out) = &args.out {
        write_out(out, &report.to_json())?;
    }
    Ok(())
}

fn report(args: ReportArgs) -> Result<(), CliError> {
    let report = RobustnessReport::from_json(&read_in(&args.report)?)
        .map_err(|e| CliError::Artifact(format!("report: {e}")))?;
    let text = report.to_text();
    match &args.out {
        Some(out) => write_out(out, &text)?,
        None => print!("{text}"),
    }
    Ok(())
}
