//! Synthetic labeled corpus of MiniLang methods.
//!
//! Eight method templates, one per label, instantiated with names sampled
//! from role pools. Accumulator and flag pools are label-exclusive so a
//! learnable name↔label association exists; counter, array, and target
//! pools are shared across labels. Optional trailing dead declarations add
//! textual entropy and make appended declarations in-distribution.

use crate::minilang::{parse, pretty_print, typecheck, MethodAst};
use crate::rng::{derive_seed, SplitMix64};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashSet};
use thiserror::Error;

pub const DEFAULT_LABELS: [&str; 8] = [
    "count", "contains", "indexOf", "sum", "max", "min", "reverse", "isEmpty",
];

const COUNTER_POOL: [&str; 6] = ["i", "j", "k", "idx", "step", "cursor"];
const TARGET_POOL: [&str; 6] = ["target", "key", "needle", "query", "item", "wanted"];
const DEAD_POOL: [&str; 16] = [
    "tmp", "aux", "buf", "pad", "foo", "scratch", "spare", "extra", "bar", "baz", "junk", "filler",
    "slack", "stub", "waste", "blob",
];

/// Label-exclusive name pools. No pool contains its label's own text, so the
/// name signal is learned association rather than string identity. Array and
/// accumulator names are both label-correlated: every method carries two
/// names from its label's cluster, which is what gives the outlier defense
/// a reference point (a lone foreign name has no cluster-mate nearby).
fn accumulator_pool(label: &str) -> &'static [&'static str] {
    match label {
        "count" => &["tally", "hits", "cnt", "occurs", "freq"],
        "contains" => &["found", "has", "seen", "exists", "hit"],
        "indexOf" => &["pos", "spot", "place", "loc", "at"],
        "sum" => &["acc", "agg", "accum", "added", "runsum"],
        "max" => &["best", "largest", "top", "high", "peak"],
        "min" => &["least", "smallest", "low", "bottom", "dip"],
        "reverse" => &["hold", "carry", "stash", "swapv", "tmpv"],
        "isEmpty" => &["empty", "none", "blank", "vacant", "bare"],
        _ => &["value", "out", "ret", "res"],
    }
}

fn array_pool(label: &str) -> &'static [&'static str] {
    match label {
        "count" => &["entries", "records", "samples", "marks"],
        "contains" => &["haystack", "lookup", "bucket", "pool"],
        "indexOf" => &["seq", "listing", "ordered", "series"],
        "sum" => &["amounts", "figures", "addends", "ledger"],
        "max" => &["scores", "heights", "ranks", "gains"],
        "min" => &["depths", "costs", "weights", "spans"],
        "reverse" => &["chain", "lineup", "queue", "stack"],
        "isEmpty" => &["slots", "cells", "gaps", "bins"],
        _ => &["array", "arr", "data", "items"],
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub seed: u64,
    pub methods_per_label: usize,
    pub labels: Vec<String>,
    /// Probability of each of up to `max_dead_stmts` trailing dead
    /// declarations.
    pub dead_stmt_probability: f64,
    pub max_dead_stmts: usize,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            seed: 7,
            methods_per_label: 250,
            labels: DEFAULT_LABELS.iter().map(|s| s.to_string()).collect(),
            dead_stmt_probability: 0.6,
            max_dead_stmts: 2,
        }
    }
}

/// Deterministic: the same config yields byte-identical methods. Every
/// method parses, type-checks, has at least one variable, and its source
/// text is unique in the corpus.
pub fn generate_corpus(config: &GeneratorConfig) -> Vec<MethodAst> {
    let mut corpus = Vec::with_capacity(config.labels.len() * config.methods_per_label);
    let mut seen = HashSet::new();
    for (li, label) in config.labels.iter().enumerate() {
        for m in 0..config.methods_per_label {
            let tag = (li as u64) << 32 | m as u64;
            let mut rng = SplitMix64::new(derive_seed(config.seed, tag));
            let mut attempts = 0;
            loop {
                let source = instantiate(label, config, &mut rng);
                if seen.insert(source.clone()) {
                    let ast = parse(&source).unwrap_or_else(|e| {
                        panic!("generated method must parse: {e}\n{source}")
                    });
                    typecheck(&ast).unwrap_or_else(|e| {
                        panic!("generated method must type-check: {e}\n{source}")
                    });
                    corpus.push(ast);
                    break;
                }
                attempts += 1;
                assert!(attempts < 1000, "name pools exhausted for label {label}");
            }
        }
    }
    corpus
}

struct Names {
    taken: HashSet<String>,
}

impl Names {
    fn pick(&mut self, rng: &mut SplitMix64, pool: &[&str]) -> String {
        // Reject collisions within the method; pools are small, so walk a
        // random rotation when the first draw is taken.
        let start = rng.below(pool.len());
        for off in 0..pool.len() {
            let cand = pool[(start + off) % pool.len()];
            if self.taken.insert(cand.to_string()) {
                return cand.to_string();
            }
        }
        // All plain names taken: derive a numbered variant.
        for n in 2..100 {
            let cand = format!("{}{}", pool[start], n);
            if cand.len() <= crate::minilang::MAX_NAME_LEN && self.taken.insert(cand.clone()) {
                return cand;
            }
        }
        unreachable!("pool exhausted");
    }
}

fn instantiate(label: &str, config: &GeneratorConfig, rng: &mut SplitMix64) -> String {
    let mut names = Names {
        taken: HashSet::new(),
    };
    let arr = names.pick(rng, array_pool(label));
    let i = names.pick(rng, &COUNTER_POOL);
    let acc = names.pick(rng, accumulator_pool(label));
    let body = match label {
        "count" => {
            let tgt = names.pick(rng, &TARGET_POOL);
            format!(
                "int count(int[] {arr}, int {tgt}) {{\n  int {acc} = 0;\n  for (int {i} = 0; {i} < len({arr}); {i} = {i} + 1) {{\n    if ({arr}[{i}] == {tgt}) {{\n      {acc} = {acc} + 1;\n    }}\n  }}\n  return {acc};\n}}"
            )
        }
        "contains" => {
            let tgt = names.pick(rng, &TARGET_POOL);
            format!(
                "bool contains(int[] {arr}, int {tgt}) {{\n  bool {acc} = false;\n  for (int {i} = 0; {i} < len({arr}); {i} = {i} + 1) {{\n    if ({arr}[{i}] == {tgt}) {{\n      {acc} = true;\n    }}\n  }}\n  return {acc};\n}}"
            )
        }
        "indexOf" => {
            let tgt = names.pick(rng, &TARGET_POOL);
            format!(
                "int indexOf(int[] {arr}, int {tgt}) {{\n  int {acc} = -1;\n  for (int {i} = 0; {i} < len({arr}); {i} = {i} + 1) {{\n    if ({arr}[{i}] == {tgt}) {{\n      if ({acc} == -1) {{\n        {acc} = {i};\n      }}\n    }}\n  }}\n  return {acc};\n}}"
            )
        }
        "sum" => format!(
            "int sum(int[] {arr}) {{\n  int {acc} = 0;\n  for (int {i} = 0; {i} < len({arr}); {i} = {i} + 1) {{\n    {acc} = {acc} + {arr}[{i}];\n  }}\n  return {acc};\n}}"
        ),
        "max" => format!(
            "int max(int[] {arr}) {{\n  int {acc} = {arr}[0];\n  for (int {i} = 1; {i} < len({arr}); {i} = {i} + 1) {{\n    if ({arr}[{i}] > {acc}) {{\n      {acc} = {arr}[{i}];\n    }}\n  }}\n  return {acc};\n}}"
        ),
        "min" => format!(
            "int min(int[] {arr}) {{\n  int {acc} = {arr}[0];\n  for (int {i} = 1; {i} < len({arr}); {i} = {i} + 1) {{\n    if ({arr}[{i}] < {acc}) {{\n      {acc} = {arr}[{i}];\n    }}\n  }}\n  return {acc};\n}}"
        ),
        "reverse" => format!(
            "int[] reverse(int[] {arr}) {{\n  for (int {i} = 0; {i} < len({arr}) / 2; {i} = {i} + 1) {{\n    int {acc} = {arr}[{i}];\n    {arr}[{i}] = {arr}[len({arr}) - 1 - {i}];\n    {arr}[len({arr}) - 1 - {i}] = {acc};\n  }}\n  return {arr};\n}}"
        ),
        "isEmpty" => format!(
            "bool isEmpty(int[] {arr}) {{\n  bool {acc} = true;\n  for (int {i} = 0; {i} < len({arr}); {i} = {i} + 1) {{\n    {acc} = false;\n  }}\n  return {acc};\n}}"
        ),
        other => panic!("no template for label {other:?}"),
    };
    let mut source = body;
    // Trailing dead declarations, matching where an attack would put one.
    for _ in 0..config.max_dead_stmts {
        if rng.next_f64() < config.dead_stmt_probability {
            let name = names.pick(rng, &DEAD_POOL);
            let lit = rng.below(100);
            let insert_at = source.rfind('}').unwrap();
            source.insert_str(insert_at, &format!("  int {name} = {lit};\n"));
        }
    }
    source
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SplitError {
    #[error("split ratios leave label {0:?} absent from one split")]
    DegenerateSplit(String),
}

/// Label-stratified split: a seeded shuffle within each label group, then a
/// contiguous cut per group, then a seeded shuffle of each split.
pub fn split_dataset(
    corpus: &[MethodAst],
    ratios: (f64, f64, f64),
    seed: u64,
) -> Result<(Vec<MethodAst>, Vec<MethodAst>, Vec<MethodAst>), SplitError> {
    assert!(
        (ratios.0 + ratios.1 + ratios.2 - 1.0).abs() < 1e-9,
        "ratios must sum to 1"
    );
    let mut by_label: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, m) in corpus.iter().enumerate() {
        by_label.entry(m.label.clone()).or_default().push(i);
    }
    let mut rng = SplitMix64::new(derive_seed(seed, 0x517u64));
    let mut splits: [Vec<MethodAst>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for (label, mut indices) in by_label {
        rng.shuffle(&mut indices);
        let n = indices.len();
        let n_train = (n as f64 * ratios.0).floor() as usize;
        let n_val = (n as f64 * ratios.1).floor() as usize;
        let n_test = n - n_train - n_val;
        if n_train == 0 || n_val == 0 || n_test == 0 {
            return Err(SplitError::DegenerateSplit(label));
        }
        for (k, &idx) in indices.iter().enumerate() {
            let bucket = if k < n_train {
                0
            } else if k < n_train + n_val {
                1
            } else {
                2
            };
            splits[bucket].push(corpus[idx].clone());
        }
    }
    for split in &mut splits {
        rng.shuffle(split);
    }
    let [train, val, test] = splits;
    Ok((train, val, test))
}

/// JSONL record for one method.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub source: String,
    pub label: String,
}

pub fn to_jsonl(corpus: &[MethodAst]) -> String {
    let mut out = String::new();
    for m in corpus {
        let record = CorpusRecord {
            source: pretty_print(m),
            label: m.label.clone(),
        };
        out.push_str(&serde_json::to_string(&record).expect("record serializes"));
        out.push('\n');
    }
    out
}

#[derive(Debug, Error)]
pub enum CorpusReadError {
    #[error("line {line}: {err}")]
    Json {
        line: usize,
        err: serde_json::Error,
    },
    #[error("line {line}: {err}")]
    Parse {
        line: usize,
        err: crate::minilang::MiniLangError,
    },
    #[error("line {line}: record label {record:?} does not match method name {parsed:?}")]
    LabelMismatch {
        line: usize,
        record: String,
        parsed: String,
    },
}

pub fn from_jsonl(text: &str) -> Result<Vec<MethodAst>, CorpusReadError> {
    let mut corpus = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: CorpusRecord =
            serde_json::from_str(line).map_err(|err| CorpusReadError::Json { line: i + 1, err })?;
        let ast =
            parse(&record.source).map_err(|err| CorpusReadError::Parse { line: i + 1, err })?;
        if ast.label != record.label {
            return Err(CorpusReadError::LabelMismatch {
                line: i + 1,
                record: record.label,
                parsed: ast.label,
            });
        }
        corpus.push(ast);
    }
    Ok(corpus)
}
