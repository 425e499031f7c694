//! Non-gradient attack baselines, evaluated under the same query budget as
//! the gradient attack.

use super::{
    eligible_token, meets_goal, AttackConfig, AttackError, AttackMode, AttackResult, AttackTarget,
    Prediction,
};
use crate::minilang::{is_valid_variable_name, rename_variable, variables, MethodAst};
use crate::model::name_embedding;
use crate::pathctx::{CHAR_ALPHABET, NAME_LEN};
use crate::rng::SplitMix64;
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineKind {
    /// Try the adversarial label's own text, then its nearest neighbors in
    /// the name-embedding space.
    CopyTarget,
    /// Uniformly sampled names from the training vocabulary.
    RandomVar,
    /// Random single-character mutations, kept when the loss moves the
    /// right way.
    CharBruteForce,
    /// Highest label-cooccurrence scores for the adversarial label.
    TfIdf,
}

impl BaselineKind {
    pub fn name(&self) -> &'static str {
        match self {
            BaselineKind::CopyTarget => "copy_target",
            BaselineKind::RandomVar => "random_var",
            BaselineKind::CharBruteForce => "char_brute_force",
            BaselineKind::TfIdf => "tfidf",
        }
    }
}

/// (label, variable name) cooccurrence counts over a training corpus.
#[derive(Debug, Clone, Default)]
pub struct CooccurrenceTable {
    pair_counts: BTreeMap<(String, String), u64>,
    totals: BTreeMap<String, u64>,
    labels: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TfIdfError {
    #[error("label {0:?} does not occur in the training corpus")]
    UnknownLabel(String),
}

/// Counts each variable once per method under the method's label.
pub fn build_tfidf_table(corpus: &[MethodAst]) -> CooccurrenceTable {
    let mut table = CooccurrenceTable::default();
    for method in corpus {
        table.labels.insert(method.label.clone());
        for var in variables(method) {
            *table
                .pair_counts
                .entry((method.label.clone(), var.name.clone()))
                .or_default() += 1;
            *table.totals.entry(var.name).or_default() += 1;
        }
    }
    table
}

impl CooccurrenceTable {
    pub fn score(&self, label: &str, name: &str) -> f64 {
        let total = self.totals.get(name).copied().unwrap_or(0);
        if total == 0 {
            return 0.0;
        }
        let pair = self
            .pair_counts
            .get(&(label.to_string(), name.to_string()))
            .copied()
            .unwrap_or(0);
        pair as f64 / total as f64
    }

    pub fn total(&self, name: &str) -> u64 {
        self.totals.get(name).copied().unwrap_or(0)
    }

    /// Top-k names by score(label, ·), ties broken lexicographically.
    pub fn candidates(&self, label: &str, k: usize) -> Result<Vec<String>, TfIdfError> {
        if !self.labels.contains(label) {
            return Err(TfIdfError::UnknownLabel(label.to_string()));
        }
        let mut scored: Vec<(&String, f64)> = self
            .totals
            .keys()
            .map(|name| (name, self.score(label, name)))
            .collect();
        scored.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .expect("finite score")
                .then_with(|| a.0.cmp(b.0))
        });
        Ok(scored.into_iter().take(k).map(|(n, _)| n.clone()).collect())
    }
}

/// Applies a list of candidate names to one variable, one model query each,
/// stopping at the first success or when the budget runs out.
fn try_name_list(
    target: &AttackTarget,
    original_ast: &MethodAst,
    root: &MethodAst,
    var_name: &str,
    original: Prediction,
    config: &AttackConfig,
    names: Vec<String>,
) -> Result<AttackResult, AttackError> {
    let reference = original.label_index;
    let root_pred = target.predict_ast(root)?;
    let var = variables(root)
        .into_iter()
        .find(|v| v.name == var_name)
        .ok_or_else(|| AttackError::UnknownVariable(var_name.to_string()))?;
    let mut evaluated = 0usize;
    let mut tried = BTreeSet::new();
    for cand in names {
        if evaluated >= config.budget {
            break;
        }
        if cand == var_name || !tried.insert(cand.clone()) {
            continue;
        }
        let child = match rename_variable(root, &var, &cand) {
            Ok(c) => c,
            Err(_) => continue,
        };
        evaluated += 1;
        let pred = target.predict_ast(&child)?;
        if meets_goal(&pred, config.mode, reference) {
            return Ok(AttackResult {
                success: true,
                original_ast: original_ast.clone(),
                perturbed_ast: child,
                original,
                final_prediction: pred,
                variable: var_name.to_string(),
                new_name: Some(cand),
                steps: evaluated,
                candidates_evaluated: evaluated,
            });
        }
    }
    Ok(AttackResult {
        success: false,
        original_ast: original_ast.clone(),
        perturbed_ast: root.clone(),
        original,
        final_prediction: root_pred,
        variable: var_name.to_string(),
        new_name: None,
        steps: evaluated,
        candidates_evaluated: evaluated,
    })
}

/// All in-vocabulary names eligible as a rename in this method.
fn eligible_names(target: &AttackTarget, declared: &BTreeSet<String>) -> Vec<String> {
    (1..target.vocab.n_tokens())
        .map(|j| target.vocab.token_text(j).to_string())
        .filter(|t| eligible_token(t, declared))
        .collect()
}

fn copy_target_names(
    target: &AttackTarget,
    declared: &BTreeSet<String>,
    target_label: usize,
    k: usize,
) -> Vec<String> {
    let label_text = target.vocab.label_text(target_label).to_string();
    let mut names = Vec::new();
    if eligible_token(&label_text, declared) {
        names.push(label_text.clone());
    }
    // Nearest rows of the name-embedding table around the label's own
    // embedding (the UNK row when the label text is out of vocabulary).
    let anchor = name_embedding(target.params, target.vocab, &label_text);
    let mut scored: Vec<(f64, String)> = eligible_names(target, declared)
        .into_iter()
        .filter(|n| *n != label_text)
        .map(|n| {
            let e = name_embedding(target.params, target.vocab, &n);
            let dist: f64 = anchor
                .iter()
                .zip(&e)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            (dist, n)
        })
        .collect();
    scored.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite distance").then(a.1.cmp(&b.1)));
    names.extend(scored.into_iter().take(k).map(|(_, n)| n));
    names
}

fn random_var_names(
    target: &AttackTarget,
    declared: &BTreeSet<String>,
    rng: &mut SplitMix64,
    k: usize,
) -> Vec<String> {
    let mut pool = eligible_names(target, declared);
    rng.shuffle(&mut pool);
    pool.truncate(k);
    pool
}

/// Hill climb over single-character mutations: mutate one random (position,
/// character) cell, keep the mutation when the objective loss moves
/// favorably, revert otherwise. One model query per iteration.
fn char_brute_force(
    target: &AttackTarget,
    original_ast: &MethodAst,
    root: &MethodAst,
    var_name: &str,
    original: Prediction,
    config: &AttackConfig,
    rng: &mut SplitMix64,
) -> Result<AttackResult, AttackError> {
    let reference = original.label_index;
    let root_pred = target.predict_ast(root)?;
    let objective = match config.mode {
        AttackMode::Targeted { target_label } => target_label,
        AttackMode::NonTargeted => reference,
    };
    // Targeted wants the target label's loss to fall; non-targeted wants the
    // reference label's loss to rise.
    let improved = |new: f64, old: f64| match config.mode {
        AttackMode::Targeted { .. } => new < old,
        AttackMode::NonTargeted => new > old,
    };
    let alphabet: Vec<char> = CHAR_ALPHABET.chars().collect();
    let mut current_ast = root.clone();
    let mut current_name = var_name.to_string();
    let mut current_loss = target.loss_ast(&current_ast, objective)?;
    let mut evaluated = 0usize;
    while evaluated < config.budget {
        // Draw until the mutation yields a valid non-colliding name; draws
        // never query the model so they cost no budget.
        let mut candidate = None;
        for _ in 0..64 {
            let chars: Vec<char> = current_name.chars().collect();
            let pos = rng.below(chars.len().min(NAME_LEN));
            let c = alphabet[rng.below(alphabet.len())];
            if c == chars[pos] {
                continue;
            }
            let mut mutated = chars;
            mutated[pos] = c;
            let name: String = mutated.into_iter().collect();
            let declared: BTreeSet<String> =
                variables(&current_ast).into_iter().map(|v| v.name).collect();
            if is_valid_variable_name(&name) && !declared.contains(&name) {
                candidate = Some(name);
                break;
            }
        }
        let Some(cand) = candidate else { break };
        let var = variables(&current_ast)
            .into_iter()
            .find(|v| v.name == current_name)
            .expect("current variable exists");
        let child = match rename_variable(&current_ast, &var, &cand) {
            Ok(c) => c,
            Err(_) => continue,
        };
        evaluated += 1;
        let pred = target.predict_ast(&child)?;
        if meets_goal(&pred, config.mode, reference) {
            return Ok(AttackResult {
                success: true,
                original_ast: original_ast.clone(),
                perturbed_ast: child,
                original,
                final_prediction: pred,
                variable: var_name.to_string(),
                new_name: Some(cand),
                steps: evaluated,
                candidates_evaluated: evaluated,
            });
        }
        let loss = target.loss_ast(&child, objective)?;
        if improved(loss, current_loss) {
            current_ast = child;
            current_name = cand;
            current_loss = loss;
        }
    }
    Ok(AttackResult {
        success: false,
        original_ast: original_ast.clone(),
        perturbed_ast: root.clone(),
        original,
        final_prediction: root_pred,
        variable: var_name.to_string(),
        new_name: None,
        steps: evaluated,
        candidates_evaluated: evaluated,
    })
}

/// Runs one baseline under the shared attack preliminaries: same variable
/// selection, same dead-code insertion, same query budget.
pub fn baseline_attack(
    kind: BaselineKind,
    target: &AttackTarget,
    ast: &MethodAst,
    config: &AttackConfig,
    tfidf: Option<&CooccurrenceTable>,
) -> Result<AttackResult, AttackError> {
    config.validate()?;
    let mut rng = SplitMix64::new(config.seed);
    let original = target.predict_ast(ast)?;
    let (root, var_name) = super::prepare_attack(target, ast, config, &mut rng)?;
    baseline_prepared(
        kind, target, ast, &root, &var_name, original, config, tfidf, &mut rng,
    )
}

/// Baseline search on an already-prepared root.
#[allow(clippy::too_many_arguments)]
pub fn baseline_prepared(
    kind: BaselineKind,
    target: &AttackTarget,
    ast: &MethodAst,
    root: &MethodAst,
    var_name: &str,
    original: Prediction,
    config: &AttackConfig,
    tfidf: Option<&CooccurrenceTable>,
    rng: &mut SplitMix64,
) -> Result<AttackResult, AttackError> {
    let declared: BTreeSet<String> = variables(root).into_iter().map(|v| v.name).collect();
    match kind {
        BaselineKind::CharBruteForce => {
            char_brute_force(target, ast, root, var_name, original, config, rng)
        }
        BaselineKind::CopyTarget => {
            let AttackMode::Targeted { target_label } = config.mode else {
                return Err(AttackError::BadConfig(
                    "copy-target is a targeted baseline".into(),
                ));
            };
            let names = copy_target_names(target, &declared, target_label, config.budget);
            try_name_list(target, ast, root, var_name, original, config, names)
        }
        BaselineKind::RandomVar => {
            let names = random_var_names(target, &declared, rng, config.budget);
            try_name_list(target, ast, root, var_name, original, config, names)
        }
        BaselineKind::TfIdf => {
            let AttackMode::Targeted { target_label } = config.mode else {
                return Err(AttackError::BadConfig(
                    "tfidf is a targeted baseline".into(),
                ));
            };
            let table = tfidf.ok_or_else(|| {
                AttackError::BadConfig("tfidf baseline needs a cooccurrence table".into())
            })?;
            let label_text = target.vocab.label_text(target_label);
            let names = table
                .candidates(label_text, target.vocab.n_tokens() + config.budget)
                .unwrap_or_default()
                .into_iter()
                .filter(|n| eligible_token(n, &declared))
                .collect();
            try_name_list(target, ast, root, var_name, original, config, names)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::Strategy;
    use super::*;
    use crate::corpus::{generate_corpus, GeneratorConfig};
    use crate::minilang::parse;
    use crate::model::{init_params, HyperParams};
    use crate::pathctx::{extract_path_contexts, ExtractionConfig, NameMode, Vocabulary};

    #[test]
    fn tfidf_scores_follow_the_formula() {
        // v occurs 4 times, 3 of them under label "a".
        let sources = [
            ("int a(int v) { return v; }", 3),
            ("int b(int v) { return v; }", 1),
        ];
        let mut corpus = Vec::new();
        for (src, n) in sources {
            for _ in 0..n {
                corpus.push(parse(src).unwrap());
            }
        }
        let table = build_tfidf_table(&corpus);
        assert_eq!(table.total("v"), 4);
        assert!((table.score("a", "v") - 0.75).abs() < 1e-12);
        assert!((table.score("b", "v") - 0.25).abs() < 1e-12);
    }

    #[test]
    fn exclusive_name_scores_one() {
        let corpus = vec![parse("int only(int special) { return special; }").unwrap()];
        let table = build_tfidf_table(&corpus);
        assert_eq!(table.score("only", "special"), 1.0);
        assert_eq!(table.candidates("only", 1).unwrap(), vec!["special"]);
        assert_eq!(
            table.candidates("absent", 1),
            Err(TfIdfError::UnknownLabel("absent".into()))
        );
    }

    #[test]
    fn counts_are_consistent_on_generated_corpus() {
        let corpus = generate_corpus(&GeneratorConfig {
            methods_per_label: 10,
            ..GeneratorConfig::default()
        });
        let table = build_tfidf_table(&corpus);
        for name in table.totals.keys() {
            let sum: u64 = table
                .labels
                .iter()
                .map(|l| {
                    table
                        .pair_counts
                        .get(&(l.clone(), name.clone()))
                        .copied()
                        .unwrap_or(0)
                })
                .sum();
            assert_eq!(sum, table.total(name), "per-label counts sum to total for {name}");
        }
    }

    fn fixture() -> (crate::model::ModelParams, Vocabulary, MethodAst) {
        let corpus = generate_corpus(&GeneratorConfig {
            methods_per_label: 5,
            ..GeneratorConfig::default()
        });
        let bags: Vec<_> = corpus
            .iter()
            .map(|m| extract_path_contexts(m, ExtractionConfig::default()).unwrap())
            .collect();
        let vocab = Vocabulary::build(&bags, 300);
        let params = init_params(&vocab, 5, NameMode::Token, HyperParams::default());
        (params, vocab, corpus[0].clone())
    }

    #[test]
    fn random_var_budget_zero_evaluates_nothing() {
        let (params, vocab, ast) = fixture();
        let target = AttackTarget::new(&params, &vocab);
        let config = AttackConfig {
            budget: 0,
            seed: 2,
            ..AttackConfig::new(AttackMode::NonTargeted, Strategy::VarName)
        };
        let r = baseline_attack(BaselineKind::RandomVar, &target, &ast, &config, None).unwrap();
        assert!(!r.success);
        assert_eq!(r.candidates_evaluated, 0);
    }

    #[test]
    fn copy_target_skips_colliding_label_text() {
        let (params, vocab, _) = fixture();
        // A method that already declares a variable named like the target
        // label: the candidate list starts at the nearest neighbor instead.
        let ast = parse("int f(int[] data, int sum) { return sum + data[0]; }").unwrap();
        let target = AttackTarget::new(&params, &vocab);
        let label_idx = vocab.label_index("sum");
        assert_ne!(label_idx, 0);
        let declared: BTreeSet<String> =
            variables(&ast).into_iter().map(|v| v.name).collect();
        let names = copy_target_names(&target, &declared, label_idx, 5);
        assert!(!names.contains(&"sum".to_string()));
        assert!(!names.is_empty());
        // On a collision-free method the label text leads the list.
        let free = parse("int g(int[] xs) { return xs[0]; }").unwrap();
        let declared: BTreeSet<String> =
            variables(&free).into_iter().map(|v| v.name).collect();
        let names = copy_target_names(&target, &declared, label_idx, 5);
        assert_eq!(names[0], "sum");
    }

    #[test]
    fn baselines_respect_the_budget_cap() {
        let (params, vocab, ast) = fixture();
        let target = AttackTarget::new(&params, &vocab);
        for kind in [
            BaselineKind::RandomVar,
            BaselineKind::CharBruteForce,
        ] {
            let config = AttackConfig {
                budget: 4,
                seed: 9,
                ..AttackConfig::new(AttackMode::NonTargeted, Strategy::VarName)
            };
            let r = baseline_attack(kind, &target, &ast, &config, None).unwrap();
            assert!(r.candidates_evaluated <= 4, "{kind:?} overspent");
        }
    }

    #[test]
    fn char_brute_force_is_deterministic() {
        let (params, vocab, ast) = fixture();
        let target = AttackTarget::new(&params, &vocab);
        let config = AttackConfig {
            budget: 8,
            seed: 4,
            ..AttackConfig::new(AttackMode::NonTargeted, Strategy::VarName)
        };
        let a = baseline_attack(BaselineKind::CharBruteForce, &target, &ast, &config, None)
            .unwrap();
        let b = baseline_attack(BaselineKind::CharBruteForce, &target, &ast, &config, None)
            .unwrap();
        assert_eq!(a.success, b.success);
        assert_eq!(a.candidates_evaluated, b.candidates_evaluated);
        assert_eq!(
            crate::minilang::pretty_print(&a.perturbed_ast),
            crate::minilang::pretty_print(&b.perturbed_ast)
        );
    }
}
