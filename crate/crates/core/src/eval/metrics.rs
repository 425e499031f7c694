//! Robustness and accuracy metrics.

use crate::attack::AttackResult;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("no results to aggregate")]
pub struct EmptyInput;

/// Percentage of results whose final label is not the adversarial target.
/// A change to some other wrong label still counts as robust.
pub fn robustness_targeted(
    results: &[AttackResult],
    target_label: usize,
) -> Result<f64, EmptyInput> {
    if results.is_empty() {
        return Err(EmptyInput);
    }
    let robust = results
        .iter()
        .filter(|r| r.final_prediction.label_index != target_label)
        .count();
    Ok(100.0 * robust as f64 / results.len() as f64)
}

/// Percentage of results whose final label equals the original correct
/// label, i.e. the unchanged fraction.
pub fn robustness_nontargeted(results: &[AttackResult]) -> Result<f64, EmptyInput> {
    if results.is_empty() {
        return Err(EmptyInput);
    }
    let robust = results
        .iter()
        .filter(|r| r.final_prediction.label_index == r.original.label_index)
        .count();
    Ok(100.0 * robust as f64 / results.len() as f64)
}

/// Splits a label into lowercase subtokens on case boundaries and
/// underscores; other non-alphanumerics separate too.
pub fn split_subtokens(label: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for c in label.chars() {
        if c == '_' || !c.is_ascii_alphanumeric() {
            if !current.is_empty() {
                tokens.push(std::mem::take(&mut current));
            }
        } else if c.is_ascii_uppercase() {
            if !current.is_empty() {
                tokens.push(std::mem::take(&mut current));
            }
            current.push(c.to_ascii_lowercase());
        } else {
            current.push(c);
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// Micro-averaged subtoken F1 over (predicted, true) label pairs, as a
/// percentage. Subtokens are multisets: a repeated subtoken must be
/// predicted as many times to count fully.
pub fn subtoken_f1(pairs: &[(String, String)]) -> f64 {
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fneg = 0usize;
    for (pred, truth) in pairs {
        let p = split_subtokens(pred);
        let t = split_subtokens(truth);
        let mut t_counts: std::collections::BTreeMap<&str, usize> = Default::default();
        for s in &t {
            *t_counts.entry(s.as_str()).or_default() += 1;
        }
        let mut matched = 0usize;
        for s in &p {
            if let Some(n) = t_counts.get_mut(s.as_str()) {
                if *n > 0 {
                    *n -= 1;
                    matched += 1;
                }
            }
        }
        tp += matched;
        fp += p.len() - matched;
        fneg += t.len() - matched;
    }
    if tp == 0 {
        return 0.0;
    }
    let precision = tp as f64 / (tp + fp) as f64;
    let recall = tp as f64 / (tp + fneg) as f64;
    100.0 * 2.0 * precision * recall / (precision + recall)
}

/// Exact-match accuracy percentage.
pub fn accuracy(pairs: &[(usize, usize)]) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    let hits = pairs.iter().filter(|(p, t)| p == t).count();
    100.0 * hits as f64 / pairs.len() as f64
}
