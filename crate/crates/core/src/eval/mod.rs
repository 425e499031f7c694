//! Experiment orchestration: filtering, attack × defense × target sweeps,
//! clean metrics, and report assembly.
//!
//! Threat model per cell: an attacker holds the deployed model's parameters
//! but not any plug-in filter in front of it, so gradient steps and success
//! checks run against the bare model and the final perturbed program is then
//! scored through the full defended pipeline. Retraining defenses have no
//! separate filter: the attack runs white-box against the retrained
//! pipeline itself (including input masking when the model was trained on
//! masked inputs). A failed attack ships nothing, so its example scores as
//! the defended prediction of the original input.

mod metrics;
mod report;

pub use metrics::{
    accuracy, robustness_nontargeted, robustness_targeted, split_subtokens, subtoken_f1,
    EmptyInput,
};
pub use report::{CellRow, CleanRow, RobustnessReport, SweepRow};

use crate::attack::{
    baseline_prepared, build_tfidf_table, prepare_attack, run_prepared, AttackConfig, AttackError,
    AttackMode, AttackRecord, AttackResult, AttackTarget, BaselineKind, CooccurrenceTable,
    Prediction, Strategy, VariableSelection,
};
use crate::corpus::{from_jsonl, split_dataset, CorpusReadError, SplitError};
use crate::defense::{apply_defense_transform, DefenseConfig};
use crate::minilang::MethodAst;
use crate::model::{
    load_checkpoint, predict, CheckpointError, ModelParams, TrainConfig, TrainError,
};
use crate::pathctx::{
    encode, extract_path_contexts, ExtractError, ExtractionConfig, PathContextBag, Vocabulary,
};
use crate::rng::{derive_seed, SplitMix64};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    Damp,
    CopyTarget,
    RandomVar,
    CharBruteForce,
    Tfidf,
}

impl AttackKind {
    pub fn name(&self) -> &'static str {
        match self {
            AttackKind::Damp => "damp",
            AttackKind::CopyTarget => "copy_target",
            AttackKind::RandomVar => "random_var",
            AttackKind::CharBruteForce => "char_brute_force",
            AttackKind::Tfidf => "tfidf",
        }
    }

    fn baseline(&self) -> Option<BaselineKind> {
        match self {
            AttackKind::Damp => None,
            AttackKind::CopyTarget => Some(BaselineKind::CopyTarget),
            AttackKind::RandomVar => Some(BaselineKind::RandomVar),
            AttackKind::CharBruteForce => Some(BaselineKind::CharBruteForce),
            AttackKind::Tfidf => Some(BaselineKind::TfIdf),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeKind {
    Targeted,
    NonTargeted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    VarName,
    DeadCode,
}

impl StrategyKind {
    fn to_strategy(self) -> Strategy {
        match self {
            StrategyKind::VarName => Strategy::VarName,
            StrategyKind::DeadCode => Strategy::DeadCode,
        }
    }
}

fn default_width() -> usize {
    2
}
fn default_depth() -> usize {
    2
}
fn default_budget() -> usize {
    6
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackSpecEntry {
    pub attack: AttackKind,
    pub mode: ModeKind,
    pub strategy: StrategyKind,
    #[serde(default = "default_width")]
    pub width: usize,
    #[serde(default = "default_depth")]
    pub depth: usize,
    #[serde(default = "default_budget")]
    pub budget: usize,
}

impl AttackSpecEntry {
    pub fn new(attack: AttackKind, mode: ModeKind, strategy: StrategyKind) -> AttackSpecEntry {
        AttackSpecEntry {
            attack,
            mode,
            strategy,
            width: default_width(),
            depth: default_depth(),
            budget: default_budget(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentSpec {
    pub corpus: PathBuf,
    pub checkpoint: PathBuf,
    pub vocab: PathBuf,
    pub split_ratios: (f64, f64, f64),
    pub split_seed: u64,
    pub attacks: Vec<AttackSpecEntry>,
    pub defenses: Vec<DefenseConfig>,
    /// Number of adversarial targets, sampled (with replacement) from labels
    /// whose training frequency reaches the floor.
    pub target_count: usize,
    pub target_floor: usize,
    pub target_seed: u64,
    pub attack_seed: u64,
    /// Cap on test examples scanned per cell.
    pub max_examples_per_cell: usize,
    /// Training configuration for the retraining defenses.
    pub retrain: TrainConfig,
    /// Token/path/label cap used when a defense rebuilds the vocabulary.
    pub vocab_max_size: usize,
    pub extraction: ExtractionConfig,
    pub workers: usize,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            corpus: PathBuf::new(),
            checkpoint: PathBuf::new(),
            vocab: PathBuf::new(),
            split_ratios: (0.8, 0.1, 0.1),
            split_seed: 3,
            attacks: vec![
                AttackSpecEntry::new(AttackKind::Damp, ModeKind::NonTargeted, StrategyKind::VarName),
                AttackSpecEntry::new(AttackKind::Damp, ModeKind::NonTargeted, StrategyKind::DeadCode),
                AttackSpecEntry::new(AttackKind::Damp, ModeKind::Targeted, StrategyKind::VarName),
                AttackSpecEntry::new(AttackKind::CopyTarget, ModeKind::Targeted, StrategyKind::VarName),
                AttackSpecEntry::new(AttackKind::Tfidf, ModeKind::Targeted, StrategyKind::VarName),
                AttackSpecEntry::new(AttackKind::RandomVar, ModeKind::NonTargeted, StrategyKind::VarName),
            ],
            defenses: vec![
                DefenseConfig::NoDefense,
                DefenseConfig::NoVars,
                DefenseConfig::OutlierDetection {
                    sigma: crate::defense::DEFAULT_SIGMA,
                },
            ],
            target_count: 10,
            target_floor: 50,
            target_seed: 11,
            attack_seed: 17,
            max_examples_per_cell: 60,
            retrain: TrainConfig::default(),
            vocab_max_size: 512,
            extraction: ExtractionConfig::default(),
            workers: 1,
        }
    }
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("missing artifact {path}: {source}")]
    MissingArtifact {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("the filtered evaluation set is empty")]
    EmptyFilteredSet,
    #[error(transparent)]
    Corpus(#[from] CorpusReadError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("vocabulary: {0}")]
    Vocab(#[from] serde_json::Error),
    #[error(transparent)]
    Split(#[from] SplitError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error("invalid experiment spec: {0}")]
    BadSpec(String),
}

/// One raw per-example line of an experiment.
#[derive(Debug, Clone, Serialize)]
pub struct RawRecord {
    pub attack: String,
    pub mode: String,
    pub strategy: String,
    pub defense: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    pub example: usize,
    #[serde(flatten)]
    pub record: AttackRecord,
}

pub struct ExperimentOutput {
    pub report: RobustnessReport,
    pub raw: Vec<RawRecord>,
}

/// The deployed system for one defense: model parameters, the vocabulary
/// they index, and the plug-in transform (if any) in front of them.
struct Deployment {
    defense: DefenseConfig,
    params: ModelParams,
    vocab: Vocabulary,
    /// The attacker's view includes input masking only when masking is part
    /// of the trained pipeline itself.
    attacker_sees_mask: bool,
}

impl Deployment {
    fn with_extraction(&self, extraction: ExtractionConfig) -> AttackTarget<'_> {
        AttackTarget {
            params: &self.params,
            vocab: &self.vocab,
            extraction,
            mask_variables: self.attacker_sees_mask,
        }
    }

    fn defended_predict(
        &self,
        ast: &MethodAst,
        extraction: ExtractionConfig,
    ) -> Result<Prediction, ExtractError> {
        let transformed = apply_defense_transform(&self.defense, ast, &self.params, &self.vocab);
        let bag = extract_path_contexts(&transformed, extraction)?;
        let ex = encode(&bag, &self.vocab, self.params.mode);
        let (label_index, probability) = predict(&self.params, &ex);
        Ok(Prediction {
            label_index,
            label: self.vocab.label_text(label_index).to_string(),
            probability,
        })
    }
}

fn encode_set(
    asts: &[MethodAst],
    vocab: &Vocabulary,
    extraction: ExtractionConfig,
    mode: crate::pathctx::NameMode,
    mask: bool,
) -> Vec<crate::pathctx::EncodedExample> {
    asts.iter()
        .filter_map(|ast| {
            let prepared = if mask {
                crate::defense::mask_all_variables(ast)
            } else {
                ast.clone()
            };
            let bag = extract_path_contexts(&prepared, extraction).ok()?;
            Some(encode(&bag, vocab, mode))
        })
        .collect()
}

fn train_bags(asts: &[MethodAst], extraction: ExtractionConfig) -> Vec<PathContextBag> {
    asts.iter()
        .filter_map(|m| extract_path_contexts(m, extraction).ok())
        .collect()
}

/// Builds the deployed system for each defense, retraining where the
/// defense requires it.
fn build_deployment(
    defense: &DefenseConfig,
    base_params: &ModelParams,
    base_vocab: &Vocabulary,
    train: &[MethodAst],
    spec: &ExperimentSpec,
) -> Result<Deployment, EvalError> {
    let extraction = spec.extraction;
    let mode = spec.retrain.mode;
    match defense {
        DefenseConfig::NoDefense
        | DefenseConfig::NoVars
        | DefenseConfig::OutlierDetection { .. } => Ok(Deployment {
            defense: defense.clone(),
            params: base_params.clone(),
            vocab: base_vocab.clone(),
            attacker_sees_mask: false,
        }),
        DefenseConfig::TrainWithoutVars => {
            let examples = encode_set(train, base_vocab, extraction, mode, true);
            let outcome = crate::model::train(base_vocab, &examples, &spec.retrain)?;
            Ok(Deployment {
                defense: defense.clone(),
                params: outcome.params,
                vocab: base_vocab.clone(),
                attacker_sees_mask: true,
            })
        }
        DefenseConfig::AdversarialTraining => {
            let examples = encode_set(train, base_vocab, extraction, mode, false);
            let outcome = crate::defense::adversarial_train(
                base_vocab,
                train,
                &examples,
                extraction,
                &spec.retrain,
            )?;
            Ok(Deployment {
                defense: defense.clone(),
                params: outcome.params,
                vocab: base_vocab.clone(),
                attacker_sees_mask: false,
            })
        }
        DefenseConfig::AdversarialFineTuning => {
            let examples = encode_set(train, base_vocab, extraction, mode, false);
            let outcome = crate::defense::fine_tune(
                base_params.clone(),
                base_vocab,
                train,
                &examples,
                extraction,
                &spec.retrain,
            )?;
            Ok(Deployment {
                defense: defense.clone(),
                params: outcome.params,
                vocab: base_vocab.clone(),
                attacker_sees_mask: false,
            })
        }
        DefenseConfig::VocabReduction { size } => {
            // Reduction hits the token table; paths and labels keep the base
            // cap so label indices line up across defenses.
            let bags = train_bags(train, extraction);
            let vocab = Vocabulary::build_sized(
                &bags,
                *size,
                spec.vocab_max_size,
                spec.vocab_max_size,
            );
            if vocab.labels() != base_vocab.labels() {
                return Err(EvalError::BadSpec(
                    "reduced vocabulary reordered the label table".into(),
                ));
            }
            let examples = encode_set(train, &vocab, extraction, mode, false);
            let outcome = crate::model::train(&vocab, &examples, &spec.retrain)?;
            Ok(Deployment {
                defense: defense.clone(),
                params: outcome.params,
                vocab,
                attacker_sees_mask: false,
            })
        }
    }
}

/// Samples adversarial target labels from labels whose training frequency
/// reaches the floor. Draws without replacement until the pool runs out,
/// then refills with uniform draws, so a small label set still yields the
/// requested number of targets without starving any label of coverage.
pub fn sample_targets(
    train: &[MethodAst],
    vocab: &Vocabulary,
    count: usize,
    floor: usize,
    seed: u64,
) -> Result<Vec<usize>, EvalError> {
    let mut freq: BTreeMap<&str, usize> = BTreeMap::new();
    for m in train {
        *freq.entry(m.label.as_str()).or_default() += 1;
    }
    let mut pool: Vec<usize> = freq
        .iter()
        .filter(|(_, &n)| n >= floor)
        .map(|(l, _)| vocab.label_index(l))
        .filter(|&i| i != 0)
        .collect();
    if pool.is_empty() {
        return Err(EvalError::BadSpec(format!(
            "no label reaches the target frequency floor {floor}"
        )));
    }
    let mut rng = SplitMix64::new(seed);
    rng.shuffle(&mut pool);
    let mut targets: Vec<usize> = pool.iter().copied().take(count).collect();
    while targets.len() < count {
        targets.push(pool[rng.below(pool.len())]);
    }
    Ok(targets)
}

struct CellSpec {
    entry: AttackSpecEntry,
    defense_index: usize,
    target: Option<usize>,
    tag: u64,
}

fn build_cells(spec: &ExperimentSpec, targets: &[usize]) -> Result<Vec<CellSpec>, EvalError> {
    let mut cells = Vec::new();
    let mut tag = 0u64;
    for (di, _) in spec.defenses.iter().enumerate() {
        for entry in &spec.attacks {
            match entry.mode {
                ModeKind::Targeted => {
                    for &t in targets {
                        cells.push(CellSpec {
                            entry: *entry,
                            defense_index: di,
                            target: Some(t),
                            tag,
                        });
                        tag += 1;
                    }
                }
                ModeKind::NonTargeted => {
                    if matches!(entry.attack, AttackKind::CopyTarget | AttackKind::Tfidf) {
                        return Err(EvalError::BadSpec(format!(
                            "{} is a targeted baseline",
                            entry.attack.name()
                        )));
                    }
                    cells.push(CellSpec {
                        entry: *entry,
                        defense_index: di,
                        target: None,
                        tag,
                    });
                    tag += 1;
                }
            }
        }
    }
    Ok(cells)
}

struct CellOutcome {
    row: CellRow,
    raw: Vec<RawRecord>,
}

#[allow(clippy::too_many_arguments)]
fn run_cell(
    cell: &CellSpec,
    deployment: &Deployment,
    test: &[MethodAst],
    tfidf: Option<&CooccurrenceTable>,
    spec: &ExperimentSpec,
) -> CellOutcome {
    let extraction = spec.extraction;
    let scanned = &test[..test.len().min(spec.max_examples_per_cell)];
    let per_example = |(i, ast): (usize, &MethodAst)| -> Option<(AttackResult, RawRecord)> {
        let seed = derive_seed(spec.attack_seed, (cell.tag << 24) | i as u64);
        let mode = match cell.target {
            Some(t) => AttackMode::Targeted { target_label: t },
            None => AttackMode::NonTargeted,
        };
        let config = AttackConfig {
            mode,
            strategy: cell.entry.strategy.to_strategy(),
            width: cell.entry.width,
            depth: cell.entry.depth,
            selection: VariableSelection::Random,
            budget: cell.entry.budget,
            seed,
        };
        let attacked = deployment.with_extraction(extraction);
        let y_true = deployment.vocab.label_index(&ast.label);
        // Evaluation restricted to correct predictions, under both the
        // attacked model and the defended pipeline; targeted cells skip
        // examples already labeled with the target.
        let attacked_x = attacked.predict_ast(ast).ok()?;
        if attacked_x.label_index != y_true {
            return None;
        }
        let defended_x = deployment.defended_predict(ast, extraction).ok()?;
        if defended_x.label_index != y_true {
            return None;
        }
        if let Some(t) = cell.target {
            if t == y_true {
                return None;
            }
        }
        let mut rng = SplitMix64::new(seed);
        let (root, var_name) = prepare_attack(&attacked, ast, &config, &mut rng).ok()?;
        if matches!(config.strategy, Strategy::DeadCode) {
            // The name search starts from the inserted declaration; the cell
            // evaluates examples the defended pipeline still gets right at
            // that starting point.
            let defended_root = deployment.defended_predict(&root, extraction).ok()?;
            if defended_root.label_index != y_true {
                return None;
            }
        }
        let result = match cell.entry.attack.baseline() {
            None => run_prepared(&attacked, ast, &root, &var_name, attacked_x.clone(), &config),
            Some(kind) => baseline_prepared(
                kind,
                &attacked,
                ast,
                &root,
                &var_name,
                attacked_x.clone(),
                &config,
                tfidf,
                &mut rng,
            ),
        };
        let result = match result {
            Ok(r) => r,
            Err(AttackError::NoCandidates | AttackError::NoVariables) => return None,
            Err(_) => return None,
        };
        // Score the attacker's output through the defended pipeline. A
        // failed attack ships nothing.
        let (final_prediction, success) = if result.success {
            let fp = deployment
                .defended_predict(&result.perturbed_ast, extraction)
                .ok()?;
            let s = match config.mode {
                AttackMode::Targeted { target_label } => fp.label_index == target_label,
                AttackMode::NonTargeted => fp.label_index != y_true,
            };
            (fp, s)
        } else {
            (defended_x.clone(), false)
        };
        let rescored = AttackResult {
            success,
            final_prediction,
            ..result
        };
        let record = RawRecord {
            attack: cell.entry.attack.name().to_string(),
            mode: config.mode.name().to_string(),
            strategy: config.strategy.name().to_string(),
            defense: deployment.defense.name(),
            target: cell
                .target
                .map(|t| deployment.vocab.label_text(t).to_string()),
            example: i,
            record: rescored.to_record(&config, &deployment.vocab),
        };
        Some((rescored, record))
    };

    let outcomes: Vec<Option<(AttackResult, RawRecord)>> = if spec.workers > 1 {
        scanned.par_iter().enumerate().map(per_example).collect()
    } else {
        scanned.iter().enumerate().map(per_example).collect()
    };
    let mut results = Vec::new();
    let mut raw = Vec::new();
    for item in outcomes.into_iter().flatten() {
        results.push(item.0);
        raw.push(item.1);
    }

    let evaluated = results.len();
    let successes = results.iter().filter(|r| r.success).count();
    let robustness = match (cell.target, evaluated) {
        (_, 0) => None,
        (Some(t), _) => Some(robustness_targeted(&results, t).expect("nonempty")),
        (None, _) => Some(robustness_nontargeted(&results).expect("nonempty")),
    };
    let success_pct = (evaluated > 0).then(|| 100.0 * successes as f64 / evaluated as f64);
    CellOutcome {
        row: CellRow {
            attack: cell.entry.attack.name().to_string(),
            mode: match cell.entry.mode {
                ModeKind::Targeted => "targeted".into(),
                ModeKind::NonTargeted => "non_targeted".into(),
            },
            strategy: cell.entry.strategy.to_strategy().name().to_string(),
            defense: deployment.defense.name(),
            target: cell
                .target
                .map(|t| deployment.vocab.label_text(t).to_string()),
            evaluated,
            successes,
            robustness_pct: robustness,
            success_pct,
        },
        raw,
    }
}

fn clean_row(
    deployment: &Deployment,
    test: &[MethodAst],
    extraction: ExtractionConfig,
) -> CleanRow {
    let mut index_pairs = Vec::new();
    let mut text_pairs = Vec::new();
    for ast in test {
        if let Ok(pred) = deployment.defended_predict(ast, extraction) {
            let truth = deployment.vocab.label_index(&ast.label);
            index_pairs.push((pred.label_index, truth));
            text_pairs.push((pred.label, ast.label.clone()));
        }
    }
    CleanRow {
        defense: deployment.defense.name(),
        accuracy_pct: accuracy(&index_pairs),
        f1_pct: subtoken_f1(&text_pairs),
    }
}

fn read_to_string(path: &Path) -> Result<String, EvalError> {
    std::fs::read_to_string(path).map_err(|source| EvalError::MissingArtifact {
        path: path.to_path_buf(),
        source,
    })
}

pub struct LoadedInputs {
    pub corpus: Vec<MethodAst>,
    pub vocab: Vocabulary,
    pub params: ModelParams,
}

pub fn load_inputs(spec: &ExperimentSpec) -> Result<LoadedInputs, EvalError> {
    let corpus = from_jsonl(&read_to_string(&spec.corpus)?)?;
    let vocab = Vocabulary::from_json(&read_to_string(&spec.vocab)?)?;
    let params = load_checkpoint(&spec.checkpoint, &vocab)?;
    Ok(LoadedInputs {
        corpus,
        vocab,
        params,
    })
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutput, EvalError> {
    let inputs = load_inputs(spec)?;
    run_loaded(spec, &inputs)
}

pub fn run_loaded(spec: &ExperimentSpec, inputs: &LoadedInputs) -> Result<ExperimentOutput, EvalError> {
    let (train, _val, test) = split_dataset(&inputs.corpus, spec.split_ratios, spec.split_seed)?;
    if test.is_empty() {
        return Err(EvalError::EmptyFilteredSet);
    }
    let targets = if spec.attacks.iter().any(|a| a.mode == ModeKind::Targeted) {
        sample_targets(
            &train,
            &inputs.vocab,
            spec.target_count,
            spec.target_floor,
            spec.target_seed,
        )?
    } else {
        Vec::new()
    };
    let needs_tfidf = spec.attacks.iter().any(|a| a.attack == AttackKind::Tfidf);
    let tfidf = needs_tfidf.then(|| build_tfidf_table(&train));
    let cells = build_cells(spec, &targets)?;

    let mut deployments = Vec::with_capacity(spec.defenses.len());
    for defense in &spec.defenses {
        deployments.push(build_deployment(
            defense,
            &inputs.params,
            &inputs.vocab,
            &train,
            spec,
        )?);
    }

    let run_all = || -> (Vec<CleanRow>, Vec<CellOutcome>) {
        let clean = deployments
            .iter()
            .map(|d| clean_row(d, &test, spec.extraction))
            .collect();
        let outcomes = cells
            .iter()
            .map(|cell| {
                run_cell(
                    cell,
                    &deployments[cell.defense_index],
                    &test,
                    tfidf.as_ref(),
                    spec,
                )
            })
            .collect();
        (clean, outcomes)
    };
    let (clean, outcomes) = if spec.workers > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(spec.workers)
            .build()
            .expect("worker pool");
        pool.install(run_all)
    } else {
        run_all()
    };

    // The whole experiment is empty only if no cell found any example.
    if !cells.is_empty() && outcomes.iter().all(|o| o.row.evaluated == 0) {
        return Err(EvalError::EmptyFilteredSet);
    }

    let mut rows = Vec::new();
    let mut raw = Vec::new();
    for o in outcomes {
        rows.push(o.row);
        raw.extend(o.raw);
    }
    Ok(ExperimentOutput {
        report: RobustnessReport {
            targets: targets
                .iter()
                .map(|&t| inputs.vocab.label_text(t).to_string())
                .collect(),
            clean,
            cells: rows,
            sweep: Vec::new(),
        },
        raw,
    })
}

/// Sigma sweep for the outlier-detection defense: non-targeted gradient
/// renaming attacks run once against the bare model, then every sigma
/// re-scores the same perturbed outputs and the clean test split.
pub fn run_sigma_sweep(
    spec: &ExperimentSpec,
    inputs: &LoadedInputs,
    sigmas: &[f64],
    entry: AttackSpecEntry,
) -> Result<Vec<SweepRow>, EvalError> {
    let (_train, _val, test) = split_dataset(&inputs.corpus, spec.split_ratios, spec.split_seed)?;
    let extraction = spec.extraction;
    let target = AttackTarget {
        params: &inputs.params,
        vocab: &inputs.vocab,
        extraction,
        mask_variables: false,
    };
    let scanned = &test[..test.len().min(spec.max_examples_per_cell)];

    // Attack once against the bare model.
    struct Attacked {
        ast: MethodAst,
        perturbed: Option<MethodAst>,
        y_true: usize,
    }
    let mut attacked_set = Vec::new();
    for (i, ast) in scanned.iter().enumerate() {
        let y_true = inputs.vocab.label_index(&ast.label);
        let Ok(pred) = target.predict_ast(ast) else {
            continue;
        };
        if pred.label_index != y_true {
            continue;
        }
        let config = AttackConfig {
            mode: AttackMode::NonTargeted,
            strategy: entry.strategy.to_strategy(),
            width: entry.width,
            depth: entry.depth,
            selection: VariableSelection::Random,
            budget: entry.budget,
            seed: derive_seed(spec.attack_seed, 0x51EE9 ^ i as u64),
        };
        let mut rng = SplitMix64::new(config.seed);
        let Ok((root, var_name)) = prepare_attack(&target, ast, &config, &mut rng) else {
            continue;
        };
        let Ok(result) = run_prepared(&target, ast, &root, &var_name, pred, &config) else {
            continue;
        };
        attacked_set.push(Attacked {
            ast: ast.clone(),
            perturbed: result.success.then_some(result.perturbed_ast),
            y_true,
        });
    }
    if attacked_set.is_empty() {
        return Err(EvalError::EmptyFilteredSet);
    }

    let mut rows = Vec::with_capacity(sigmas.len());
    for &sigma in sigmas {
        let deployment = Deployment {
            defense: DefenseConfig::OutlierDetection { sigma },
            params: inputs.params.clone(),
            vocab: inputs.vocab.clone(),
            attacker_sees_mask: false,
        };
        let robust = attacked_set
            .iter()
            .filter(|a| {
                let input = a.perturbed.as_ref().unwrap_or(&a.ast);
                deployment
                    .defended_predict(input, extraction)
                    .map(|p| p.label_index == a.y_true)
                    .unwrap_or(false)
            })
            .count();
        let clean = clean_row(&deployment, &test, extraction);
        rows.push(SweepRow {
            sigma,
            robustness_pct: 100.0 * robust as f64 / attacked_set.len() as f64,
            clean_accuracy_pct: clean.accuracy_pct,
            clean_f1_pct: clean.f1_pct,
        });
    }
    Ok(rows)
}
