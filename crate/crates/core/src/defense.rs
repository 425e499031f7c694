//! Defenses: name masking, embedding-distance outlier masking, adversarial
//! and masked retraining, and adversarial fine-tuning.
//!
//! The plug-in family transforms the input before the unchanged model sees
//! it; the retraining family produces new model parameters.

use crate::attack::{adversarial_step, AttackConfig, AttackMode, AttackTarget, Strategy};
use crate::minilang::{rename_variable, rewrite_variable_names, variables, MethodAst};
use crate::model::{
    name_embedding, train_from, Augment, ModelParams, TrainConfig, TrainError, TrainOutcome,
};
use crate::pathctx::{
    collect_terminals, encode, extract_path_contexts, EncodedExample, ExtractionConfig,
    Vocabulary, UNK_NAME,
};
use crate::rng::{derive_seed, SplitMix64};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Which defense guards the model in one evaluation cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DefenseConfig {
    NoDefense,
    /// Mask every variable at test time.
    NoVars,
    /// Mask the single most embedding-distant variable when its distance
    /// exceeds sigma.
    OutlierDetection { sigma: f64 },
    /// Retrain with every variable masked at train and test time.
    TrainWithoutVars,
    /// Retrain minimizing J + J_adv.
    AdversarialTraining,
    /// One extra pass over single-step perturbations of the training set.
    AdversarialFineTuning,
    /// Retrain with a reduced token vocabulary.
    VocabReduction { size: usize },
}

impl DefenseConfig {
    pub fn name(&self) -> String {
        match self {
            DefenseConfig::NoDefense => "no_defense".into(),
            DefenseConfig::NoVars => "no_vars".into(),
            DefenseConfig::OutlierDetection { sigma } => format!("outlier_detection(σ={sigma})"),
            DefenseConfig::TrainWithoutVars => "train_without_vars".into(),
            DefenseConfig::AdversarialTraining => "adversarial_training".into(),
            DefenseConfig::AdversarialFineTuning => "adversarial_fine_tuning".into(),
            DefenseConfig::VocabReduction { size } => format!("vocab_reduction({size})"),
        }
    }

    pub fn requires_retraining(&self) -> bool {
        matches!(
            self,
            DefenseConfig::TrainWithoutVars
                | DefenseConfig::AdversarialTraining
                | DefenseConfig::AdversarialFineTuning
                | DefenseConfig::VocabReduction { .. }
        )
    }
}

/// Default outlier threshold, from the reference tuning.
pub const DEFAULT_SIGMA: f64 = 2.7;

/// Renames every variable (parameters and locals) to the UNK sentinel.
/// Structure is untouched and the operation is idempotent.
pub fn mask_all_variables(ast: &MethodAst) -> MethodAst {
    let names: std::collections::BTreeSet<String> =
        variables(ast).into_iter().map(|v| v.name).collect();
    rewrite_variable_names(ast, |name| {
        (names.contains(name) || name == UNK_NAME).then(|| UNK_NAME.to_string())
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DefenseError {
    #[error("too few symbols for outlier detection")]
    TooFewSymbols,
}

/// Distance of each variable from the mean embedding of the method's other
/// symbol occurrences, in declaration order.
pub fn outlier_distances(
    ast: &MethodAst,
    params: &ModelParams,
    vocab: &Vocabulary,
) -> Result<Vec<(String, f64)>, DefenseError> {
    let vars = variables(ast);
    let symbols = collect_terminals(ast);
    if vars.is_empty() || symbols.len() < 2 {
        return Err(DefenseError::TooFewSymbols);
    }
    let d = params.embed_dim();
    let mut out = Vec::with_capacity(vars.len());
    for var in &vars {
        let mut mean = vec![0.0; d];
        let mut n = 0usize;
        for sym in &symbols {
            if *sym == var.name {
                continue;
            }
            let e = name_embedding(params, vocab, sym);
            for (m, v) in mean.iter_mut().zip(&e) {
                *m += v;
            }
            n += 1;
        }
        if n == 0 {
            continue;
        }
        // Divide by the number of summed symbols so the reference point is a
        // true mean of the *other* occurrences.
        for m in mean.iter_mut() {
            *m /= n as f64;
        }
        let ve = name_embedding(params, vocab, &var.name);
        let dist: f64 = mean
            .iter()
            .zip(&ve)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        out.push((var.name.clone(), dist));
    }
    if out.is_empty() {
        return Err(DefenseError::TooFewSymbols);
    }
    Ok(out)
}

/// Masks the variable most distant from the average of the method's other
/// symbols, when that distance exceeds `sigma`. At most one variable is
/// masked; ties resolve to the earliest declaration.
pub fn outlier_mask(
    ast: &MethodAst,
    params: &ModelParams,
    vocab: &Vocabulary,
    sigma: f64,
) -> Result<(MethodAst, Option<String>), DefenseError> {
    let distances = outlier_distances(ast, params, vocab)?;
    let (best_name, best_dist) = distances
        .iter()
        .fold(None::<(&String, f64)>, |acc, (name, dist)| match acc {
            Some((_, d)) if *dist <= d => acc,
            _ => Some((name, *dist)),
        })
        .expect("distances nonempty");
    if best_dist > sigma {
        let masked = rewrite_variable_names(ast, |name| {
            (name == best_name.as_str()).then(|| UNK_NAME.to_string())
        });
        Ok((masked, Some(best_name.clone())))
    } else {
        Ok((ast.clone(), None))
    }
}

/// Applies a plug-in defense ahead of encoding. Retraining defenses are the
/// identity here: their protection lives in the parameters.
pub fn apply_defense_transform(
    config: &DefenseConfig,
    ast: &MethodAst,
    params: &ModelParams,
    vocab: &Vocabulary,
) -> MethodAst {
    match config {
        DefenseConfig::NoVars | DefenseConfig::TrainWithoutVars => mask_all_variables(ast),
        DefenseConfig::OutlierDetection { sigma } => outlier_mask(ast, params, vocab, *sigma)
            .map(|(masked, _)| masked)
            .unwrap_or_else(|_| ast.clone()),
        _ => ast.clone(),
    }
}

/// Encoded view of a method under a defense.
pub fn defended_encode(
    config: &DefenseConfig,
    ast: &MethodAst,
    params: &ModelParams,
    vocab: &Vocabulary,
    extraction: ExtractionConfig,
) -> Result<EncodedExample, crate::pathctx::ExtractError> {
    let transformed = apply_defense_transform(config, ast, params, vocab);
    let bag = extract_path_contexts(&transformed, extraction)?;
    Ok(encode(&bag, vocab, params.mode))
}

/// One non-targeted adversarial rename (single step, width 1) of a random
/// variable; None when the method offers nothing to perturb.
pub fn perturb_once(
    params: &ModelParams,
    vocab: &Vocabulary,
    extraction: ExtractionConfig,
    ast: &MethodAst,
    rng: &mut SplitMix64,
) -> Option<MethodAst> {
    let vars = variables(ast);
    if vars.is_empty() {
        return None;
    }
    let var = vars[rng.below(vars.len())].clone();
    let target = AttackTarget {
        params,
        vocab,
        extraction,
        mask_variables: false,
    };
    let example = target.encode_ast(ast).ok()?;
    let config = AttackConfig {
        width: 1,
        depth: 1,
        budget: 1,
        ..AttackConfig::new(AttackMode::NonTargeted, Strategy::VarName)
    };
    let candidates = adversarial_step(&target, &example, ast, &var.name, &config).ok()?;
    rename_variable(ast, &var, candidates.first()?).ok()
}

/// J(θ,x,y) + J(θ,x′,y) where x′ is the single-step non-targeted
/// perturbation; falls back to the plain loss when no perturbation exists.
pub fn adversarial_loss(
    params: &ModelParams,
    vocab: &Vocabulary,
    extraction: ExtractionConfig,
    example: &EncodedExample,
    ast: &MethodAst,
    seed: u64,
) -> f64 {
    let base = crate::model::forward(params, example).loss;
    let mut rng = SplitMix64::new(seed);
    match perturb_once(params, vocab, extraction, ast, &mut rng) {
        Some(perturbed) => match extract_path_contexts(&perturbed, extraction) {
            Ok(bag) => {
                let ex2 = encode(&bag, vocab, params.mode);
                base + crate::model::forward(params, &ex2).loss
            }
            Err(_) => base,
        },
        None => base,
    }
}

fn perturbation_callback<'a>(
    asts: &'a [MethodAst],
    vocab: &'a Vocabulary,
    extraction: ExtractionConfig,
    seed: u64,
) -> impl FnMut(usize, &ModelParams) -> Option<EncodedExample> + 'a {
    let mut counter = 0u64;
    move |idx, params| {
        counter += 1;
        let mut rng = SplitMix64::new(derive_seed(seed, (idx as u64) << 20 | counter));
        let perturbed = perturb_once(params, vocab, extraction, &asts[idx], &mut rng)?;
        let bag = extract_path_contexts(&perturbed, extraction).ok()?;
        Some(encode(&bag, vocab, params.mode))
    }
}

/// Adversarial training: minimizes J + J_adv with a fresh single-step
/// perturbation of each example at every visit.
pub fn adversarial_train(
    vocab: &Vocabulary,
    asts: &[MethodAst],
    examples: &[EncodedExample],
    extraction: ExtractionConfig,
    config: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    assert_eq!(asts.len(), examples.len());
    let params = crate::model::init_params(vocab, config.seed, config.mode, config.hyper());
    let mut cb = perturbation_callback(asts, vocab, extraction, derive_seed(config.seed, 0xad7));
    train_from(params, examples, config, Augment::Add(&mut cb))
}

/// Adversarial fine-tuning: exactly one pass at batch size 1 over the
/// training set, each example replaced by its perturbation.
pub fn fine_tune(
    params: ModelParams,
    vocab: &Vocabulary,
    asts: &[MethodAst],
    examples: &[EncodedExample],
    extraction: ExtractionConfig,
    config: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    assert_eq!(asts.len(), examples.len());
    let pass = TrainConfig {
        epochs: 1,
        batch_size: 1,
        ..config.clone()
    };
    let mut cb = perturbation_callback(asts, vocab, extraction, derive_seed(config.seed, 0xf17e));
    train_from(params, examples, &pass, Augment::Replace(&mut cb))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minilang::{count_occurrences, parse, pretty_print};
    use crate::model::{init_params, HyperParams, Mat};
    use crate::pathctx::NameMode;

    const COUNT_SRC: &str = "int count(int[] array, int target) {\n  int count = 0;\n  for (int i = 0; i < len(array); i = i + 1) {\n    if (array[i] == target) {\n      count = count + 1;\n    }\n  }\n  return count;\n}\n";

    #[test]
    fn mask_replaces_every_variable_occurrence() {
        let ast = parse(COUNT_SRC).unwrap();
        let total: usize = ["array", "target", "count", "i"]
            .iter()
            .map(|n| count_occurrences(&ast, n))
            .sum();
        let masked = mask_all_variables(&ast);
        assert_eq!(count_occurrences(&masked, UNK_NAME), total);
        for n in ["array", "target", "count", "i"] {
            assert_eq!(count_occurrences(&masked, n), 0);
        }
        // Structure unchanged: same statement shape, same label.
        assert_eq!(masked.body.len(), ast.body.len());
        assert_eq!(masked.label, ast.label);
    }

    #[test]
    fn mask_on_variable_free_method_is_identity() {
        let ast = parse("int f() { return 1 + 2; }").unwrap();
        assert_eq!(pretty_print(&mask_all_variables(&ast)), pretty_print(&ast));
    }

    #[test]
    fn masking_is_idempotent() {
        let ast = parse(COUNT_SRC).unwrap();
        let once = mask_all_variables(&ast);
        let twice = mask_all_variables(&once);
        assert_eq!(once, twice);
    }

    /// 2-D toy embeddings pinned by hand: symbols s1=(1,0), s2=(0.9,0),
    /// z=(−5,0). Mean of the others is (0.95, 0), so d(z) = 5.95.
    #[test]
    fn outlier_distance_matches_hand_computation() {
        let ast = parse("int f(int z, int s1, int s2) { return z + s1 + s2; }").unwrap();
        let vocab = Vocabulary::from_tables(
            vec!["s1".into(), "s2".into(), "z".into()],
            vec![],
            vec!["f".into()],
        );
        let mut params = init_params(
            &vocab,
            1,
            NameMode::Token,
            HyperParams {
                embed_dim: 2,
                hidden_dim: 2,
            },
        );
        params.token_embed = Mat::from_vec(
            4,
            2,
            vec![
                0.0, 0.0, // UNK
                1.0, 0.0, // s1
                0.9, 0.0, // s2
                -5.0, 0.0, // z
            ],
        );
        let distances = outlier_distances(&ast, &params, &vocab).unwrap();
        let z = distances.iter().find(|(n, _)| n == "z").unwrap();
        assert!((z.1 - 5.95).abs() < 1e-12, "d(z) = {}", z.1);
        let (masked, who) = outlier_mask(&ast, &params, &vocab, 2.7).unwrap();
        assert_eq!(who.as_deref(), Some("z"));
        assert_eq!(count_occurrences(&masked, "z"), 0);
        assert_eq!(count_occurrences(&masked, UNK_NAME), 2);
        // s1 and s2 untouched.
        assert_eq!(count_occurrences(&masked, "s1"), 2);
    }

    #[test]
    fn identical_embeddings_mask_nothing() {
        let ast = parse("int f(int a, int b) { return a + b; }").unwrap();
        let vocab = Vocabulary::from_tables(vec!["a".into(), "b".into()], vec![], vec![]);
        let mut params = init_params(
            &vocab,
            1,
            NameMode::Token,
            HyperParams {
                embed_dim: 2,
                hidden_dim: 2,
            },
        );
        params.token_embed = Mat::from_vec(3, 2, vec![0.5, 0.5, 0.5, 0.5, 0.5, 0.5]);
        let (masked, who) = outlier_mask(&ast, &params, &vocab, 2.7).unwrap();
        assert_eq!(who, None);
        assert_eq!(pretty_print(&masked), pretty_print(&ast));
    }

    #[test]
    fn sigma_zero_with_spread_masks_exactly_one() {
        let ast = parse("int f(int a, int b) { return a + b; }").unwrap();
        let vocab = Vocabulary::from_tables(vec!["a".into(), "b".into()], vec![], vec![]);
        let mut params = init_params(
            &vocab,
            1,
            NameMode::Token,
            HyperParams {
                embed_dim: 2,
                hidden_dim: 2,
            },
        );
        params.token_embed = Mat::from_vec(3, 2, vec![0.0, 0.0, 1.0, 0.0, 0.0, 2.0]);
        let (masked, who) = outlier_mask(&ast, &params, &vocab, 0.0).unwrap();
        assert!(who.is_some());
        assert_eq!(count_occurrences(&masked, UNK_NAME), 2);
    }

    #[test]
    fn too_few_symbols_is_reported() {
        let ast = parse("int f() { return 0 + 0; }").unwrap();
        let vocab = Vocabulary::from_tables(vec![], vec![], vec![]);
        let params = init_params(&vocab, 1, NameMode::Token, HyperParams::default());
        assert_eq!(
            outlier_distances(&ast, &params, &vocab),
            Err(DefenseError::TooFewSymbols)
        );
    }

    #[test]
    fn adversarial_loss_falls_back_without_variables() {
        let ast = parse("int f() { return 1 + 2; }").unwrap();
        let bag = extract_path_contexts(&ast, ExtractionConfig::default()).unwrap();
        let vocab = Vocabulary::build(std::slice::from_ref(&bag), 100);
        let params = init_params(&vocab, 2, NameMode::Token, HyperParams::default());
        let ex = encode(&bag, &vocab, NameMode::Token);
        let plain = crate::model::forward(&params, &ex).loss;
        let adv = adversarial_loss(&params, &vocab, ExtractionConfig::default(), &ex, &ast, 3);
        assert_eq!(plain, adv);
    }

    #[test]
    fn adversarial_loss_sums_two_finite_terms() {
        let ast = parse(COUNT_SRC).unwrap();
        let bag = extract_path_contexts(&ast, ExtractionConfig::default()).unwrap();
        // A second method donates rename candidates to the vocabulary.
        let donor =
            parse("int other(int alpha, int beta, int gamma) { return alpha + beta + gamma; }")
                .unwrap();
        let donor_bag = extract_path_contexts(&donor, ExtractionConfig::default()).unwrap();
        let vocab = Vocabulary::build(&[bag.clone(), donor_bag], 100);
        let params = init_params(&vocab, 2, NameMode::Token, HyperParams::default());
        let ex = encode(&bag, &vocab, NameMode::Token);
        let plain = crate::model::forward(&params, &ex).loss;
        let seed = 3;
        let adv = adversarial_loss(&params, &vocab, ExtractionConfig::default(), &ex, &ast, seed);
        assert!(adv.is_finite());
        // Recompute the perturbed term independently and compare the sum.
        let mut rng = SplitMix64::new(seed);
        let perturbed =
            perturb_once(&params, &vocab, ExtractionConfig::default(), &ast, &mut rng).unwrap();
        let bag2 = extract_path_contexts(&perturbed, ExtractionConfig::default()).unwrap();
        let ex2 = encode(&bag2, &vocab, NameMode::Token);
        let second = crate::model::forward(&params, &ex2).loss;
        assert!((adv - (plain + second)).abs() < 1e-12);
    }

    #[test]
    fn fine_tune_changes_some_weight() {
        let sources = [COUNT_SRC, "int sum(int[] data) {\n  int acc = 0;\n  for (int i = 0; i < len(data); i = i + 1) {\n    acc = acc + data[i];\n  }\n  return acc;\n}\n"];
        let asts: Vec<MethodAst> = sources.iter().map(|s| parse(s).unwrap()).collect();
        let bags: Vec<_> = asts
            .iter()
            .map(|m| extract_path_contexts(m, ExtractionConfig::default()).unwrap())
            .collect();
        let vocab = Vocabulary::build(&bags, 200);
        let examples: Vec<_> = bags.iter().map(|b| encode(b, &vocab, NameMode::Token)).collect();
        let config = TrainConfig {
            epochs: 5,
            seed: 4,
            ..TrainConfig::default()
        };
        let trained = crate::model::train(&vocab, &examples, &config).unwrap();
        let tuned = fine_tune(
            trained.params.clone(),
            &vocab,
            &asts,
            &examples,
            ExtractionConfig::default(),
            &config,
        )
        .unwrap();
        assert_ne!(trained.params, tuned.params);
        // One pass only.
        assert_eq!(tuned.epoch_losses.len(), 1);
    }
}
