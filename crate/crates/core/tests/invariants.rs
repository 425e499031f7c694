//! Corpus-wide invariant checks: every generated method round-trips, the
//! transforms preserve equivalence and occurrence accounting, extraction is
//! canonical, and the search machinery is deterministic and monotone.

use damp_core::attack::*;
use damp_core::corpus::*;
use damp_core::minilang::*;
use damp_core::model::*;
use damp_core::pathctx::*;
use damp_core::rng::*;
use std::collections::{BTreeSet, HashSet};
use std::sync::OnceLock;

fn small_corpus() -> &'static Vec<MethodAst> {
    static CORPUS: OnceLock<Vec<MethodAst>> = OnceLock::new();
    CORPUS.get_or_init(|| {
        generate_corpus(&GeneratorConfig {
            methods_per_label: 30,
            ..GeneratorConfig::default()
        })
    })
}

struct SmallModel {
    vocab: Vocabulary,
    params: ModelParams,
    test: Vec<MethodAst>,
}

fn small_model() -> &'static SmallModel {
    static MODEL: OnceLock<SmallModel> = OnceLock::new();
    MODEL.get_or_init(|| {
        let corpus = small_corpus();
        let (train_split, _val, test) = split_dataset(corpus, (0.8, 0.1, 0.1), 3).unwrap();
        let bags: Vec<_> = train_split
            .iter()
            .map(|m| extract_path_contexts(m, ExtractionConfig::default()).unwrap())
            .collect();
        let vocab = Vocabulary::build(&bags, 512);
        let examples: Vec<_> = bags
            .iter()
            .map(|b| encode(b, &vocab, NameMode::Token))
            .collect();
        let config = TrainConfig {
            epochs: 12,
            seed: 5,
            ..TrainConfig::default()
        };
        let out = train(&vocab, &examples, &config).unwrap();
        SmallModel {
            vocab,
            params: out.params,
            test,
        }
    })
}

#[test]
fn every_generated_method_round_trips() {
    for m in small_corpus() {
        let printed = pretty_print(m);
        let back = parse(&printed).expect("printed method parses");
        assert_eq!(pretty_print(&back), printed);
        typecheck(&back).expect("printed method type-checks");
    }
}

#[test]
fn rename_preserves_equivalence_and_occurrence_counts() {
    let mut rng = SplitMix64::new(41);
    for m in small_corpus().iter().step_by(7) {
        let vars = variables(m);
        let v = &vars[rng.below(vars.len())];
        let fresh = format!("zz{}", rng.below(1000));
        if variables(m).iter().any(|r| r.name == fresh) {
            continue;
        }
        let before = count_occurrences(m, &v.name);
        let renamed = rename_variable(m, v, &fresh).unwrap();
        assert!(check_semantic_equivalence(m, &renamed));
        assert_eq!(count_occurrences(&renamed, &fresh), before);
        assert_eq!(count_occurrences(&renamed, &v.name), 0);
    }
}

#[test]
fn dead_code_preserves_equivalence() {
    for (i, m) in small_corpus().iter().step_by(11).enumerate() {
        let name = format!("qq{i}");
        let inserted = insert_dead_code(m, &name).unwrap();
        assert!(check_semantic_equivalence(m, &inserted));
        assert_eq!(inserted.body.len(), m.body.len() + 1);
    }
}

#[test]
fn extraction_is_deterministic_and_label_free() {
    for m in small_corpus().iter().step_by(13) {
        let a = extract_path_contexts(m, ExtractionConfig::default()).unwrap();
        let b = extract_path_contexts(m, ExtractionConfig::default()).unwrap();
        assert_eq!(a, b);
        // Renaming the method itself must not change the bag.
        let mut relabeled = m.clone();
        relabeled.label = "somethingelse".into();
        let c = extract_path_contexts(&relabeled, ExtractionConfig::default()).unwrap();
        assert_eq!(a.contexts, c.contexts);
    }
}

#[test]
fn vocabulary_covers_every_generated_variable_name() {
    let corpus = generate_corpus(&GeneratorConfig::default());
    let bags: Vec<_> = corpus
        .iter()
        .map(|m| extract_path_contexts(m, ExtractionConfig::default()).unwrap())
        .collect();
    let vocab = Vocabulary::build(&bags, 512);
    let mut names = BTreeSet::new();
    for m in &corpus {
        for v in variables(m) {
            names.insert(v.name);
        }
    }
    for name in names {
        assert_ne!(vocab.token_index(&name), 0, "{name} fell out of the table");
    }
}

#[test]
fn encode_distinguishes_bags_up_to_unk() {
    let corpus = small_corpus();
    let bags: Vec<_> = corpus
        .iter()
        .take(50)
        .map(|m| extract_path_contexts(m, ExtractionConfig::default()).unwrap())
        .collect();
    let vocab = Vocabulary::build(&bags, 512);
    let mut seen = HashSet::new();
    for bag in &bags {
        let ex = encode(bag, &vocab, NameMode::Token);
        let key = format!("{:?}", ex.contexts);
        assert!(seen.insert(key), "distinct bags encoded identically");
    }
}

#[test]
fn masked_prediction_is_invariant_to_renames() {
    let model = small_model();
    let mut rng = SplitMix64::new(9);
    for m in model.test.iter().take(20) {
        let masked = damp_core::defense::mask_all_variables(m);
        let bag = extract_path_contexts(&masked, ExtractionConfig::default()).unwrap();
        let base = encode(&bag, &model.vocab, NameMode::Token);
        let vars = variables(m);
        let v = &vars[rng.below(vars.len())];
        let renamed = rename_variable(m, v, "zzrenamed").unwrap();
        let masked2 = damp_core::defense::mask_all_variables(&renamed);
        let bag2 = extract_path_contexts(&masked2, ExtractionConfig::default()).unwrap();
        let other = encode(&bag2, &model.vocab, NameMode::Token);
        assert_eq!(base, other, "masking must erase the rename entirely");
    }
}

#[test]
fn bfs_is_deterministic_and_budget_monotone() {
    let model = small_model();
    let target = AttackTarget::new(&model.params, &model.vocab);
    for (i, m) in model.test.iter().take(12).enumerate() {
        let mut succeeded = false;
        for budget in [2usize, 6, 18] {
            let config = AttackConfig {
                seed: derive_seed(33, i as u64),
                width: 3,
                depth: 2,
                budget,
                ..AttackConfig::new(AttackMode::NonTargeted, Strategy::VarName)
            };
            let a = attack(&target, m, &config).unwrap();
            let b = attack(&target, m, &config).unwrap();
            assert_eq!(a.success, b.success);
            assert_eq!(
                pretty_print(&a.perturbed_ast),
                pretty_print(&b.perturbed_ast)
            );
            if succeeded {
                assert!(a.success, "budget growth lost a success");
            }
            succeeded |= a.success;
        }
    }
}

#[test]
fn exhaustive_width_dominates_smaller_widths() {
    let model = small_model();
    let target = AttackTarget::new(&model.params, &model.vocab);
    let full_width = model.vocab.n_tokens();
    let mut narrow_successes = 0;
    let mut full_successes = 0;
    for (i, m) in model.test.iter().take(25).enumerate() {
        let narrow = AttackConfig {
            seed: derive_seed(77, i as u64),
            width: 2,
            depth: 1,
            budget: full_width,
            ..AttackConfig::new(AttackMode::NonTargeted, Strategy::VarName)
        };
        let wide = AttackConfig {
            width: full_width,
            ..narrow.clone()
        };
        let n = attack(&target, m, &narrow).unwrap();
        let w = attack(&target, m, &wide).unwrap();
        if n.success {
            narrow_successes += 1;
            assert!(w.success, "wide search must cover narrow successes");
        }
        if w.success {
            full_successes += 1;
        }
    }
    assert!(full_successes >= narrow_successes);
}

#[test]
fn successful_attacks_reverify_from_scratch() {
    let model = small_model();
    let target = AttackTarget::new(&model.params, &model.vocab);
    for (i, m) in model.test.iter().take(30).enumerate() {
        for strategy in [Strategy::VarName, Strategy::DeadCode] {
            let config = AttackConfig {
                seed: derive_seed(55, i as u64),
                budget: 8,
                ..AttackConfig::new(AttackMode::NonTargeted, strategy)
            };
            let y = model.vocab.label_index(&m.label);
            let pred = target.predict_ast(m).unwrap();
            if pred.label_index != y {
                continue;
            }
            let r = attack(&target, m, &config).unwrap();
            if r.success {
                assert!(check_semantic_equivalence(m, &r.perturbed_ast));
                let reparsed = parse(&pretty_print(&r.perturbed_ast)).unwrap();
                let re_pred = target.predict_ast(&reparsed).unwrap();
                assert_eq!(re_pred.label_index, r.final_prediction.label_index);
                assert_ne!(re_pred.label_index, r.original.label_index);
            }
        }
    }
}

/// The rank-1 targeted candidate should usually land in the best quintile
/// of all single-rename losses toward the target.
#[test]
fn gradient_rank_one_lands_in_top_quintile() {
    let model = small_model();
    let target = AttackTarget::new(&model.params, &model.vocab);
    let mut pairs = 0usize;
    let mut good = 0usize;
    let labels: Vec<usize> = (1..model.vocab.n_labels()).collect();
    for (i, m) in model.test.iter().take(30).enumerate() {
        let y = model.vocab.label_index(&m.label);
        let y_bad = labels[(i + 1) % labels.len()];
        if y_bad == y {
            continue;
        }
        let config = AttackConfig {
            seed: derive_seed(13, i as u64),
            width: 1,
            ..AttackConfig::new(AttackMode::Targeted { target_label: y_bad }, Strategy::VarName)
        };
        let mut rng = SplitMix64::new(config.seed);
        let (root, var_name) = prepare_attack(&target, m, &config, &mut rng).unwrap();
        let ex = target.encode_ast(&root).unwrap();
        let Ok(step) = adversarial_step(&target, &ex, &root, &var_name, &config) else {
            continue;
        };
        let var = variables(&root)
            .into_iter()
            .find(|v| v.name == var_name)
            .unwrap();
        // Exhaustive single-rename losses toward y_bad.
        let all = adversarial_step(
            &target,
            &ex,
            &root,
            &var_name,
            &AttackConfig {
                width: usize::MAX,
                ..config.clone()
            },
        )
        .unwrap();
        let mut losses: Vec<f64> = Vec::new();
        let mut rank1_loss = None;
        for cand in &all {
            let child = rename_variable(&root, &var, cand).unwrap();
            let loss = target.loss_ast(&child, y_bad).unwrap();
            if *cand == step[0] {
                rank1_loss = Some(loss);
            }
            losses.push(loss);
        }
        let rank1 = rank1_loss.expect("rank-1 candidate is in the full ranking");
        losses.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let quintile = losses[(losses.len() - 1) / 5];
        pairs += 1;
        if rank1 <= quintile {
            good += 1;
        }
    }
    assert!(pairs >= 20, "not enough evaluable pairs: {pairs}");
    let rate = good as f64 / pairs as f64;
    assert!(
        rate >= 0.8,
        "rank-1 candidate in top quintile on only {:.0}% of pairs",
        rate * 100.0
    );
}

#[test]
fn outlier_mask_noop_at_infinite_sigma() {
    let model = small_model();
    for m in model.test.iter().take(20) {
        let (masked, who) =
            damp_core::defense::outlier_mask(m, &model.params, &model.vocab, f64::INFINITY)
                .unwrap();
        assert!(who.is_none());
        assert_eq!(pretty_print(&masked), pretty_print(m));
        let (_, who_zero) =
            damp_core::defense::outlier_mask(m, &model.params, &model.vocab, 0.0).unwrap();
        assert!(who_zero.is_some(), "zero sigma masks the argmax variable");
    }
}
