use super::{PathContextBag, UNK_NAME};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Character alphabet for name encoding: a-z, 0-9, `_` (37 symbols).
/// Index 0 is UNK and the last index is the padding slot, so the character
/// table has 39 rows in total.
pub const CHAR_ALPHABET: &str = "abcdefghijklmnopqrstuvwxyz0123456789_";
pub const CHAR_UNK: usize = 0;
pub const CHAR_PAD: usize = CHAR_ALPHABET.len() + 1; // 38
pub const N_CHARS: usize = CHAR_ALPHABET.len() + 2; // 39

/// Index of a character: 0 for anything outside the alphabet.
pub fn char_index(c: char) -> usize {
    match c {
        'a'..='z' => 1 + (c as usize - 'a' as usize),
        '0'..='9' => 1 + 26 + (c as usize - '0' as usize),
        '_' => 1 + 36,
        _ => CHAR_UNK,
    }
}

/// Token, path, and label tables. Index 0 is reserved for UNK in each table;
/// stored entries occupy indices `1..`. The character table is fixed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    paths: Vec<String>,
    labels: Vec<String>,
    token_map: HashMap<String, usize>,
    path_map: HashMap<String, usize>,
    label_map: HashMap<String, usize>,
}

/// Serialized form: array position = index − 1, UNK implicit at 0.
#[derive(Serialize, Deserialize)]
struct VocabularyDoc {
    tokens: Vec<String>,
    paths: Vec<String>,
    labels: Vec<String>,
}

fn index_map(entries: &[String]) -> HashMap<String, usize> {
    entries
        .iter()
        .enumerate()
        .map(|(i, t)| (t.clone(), i + 1))
        .collect()
}

/// Keeps the `max_size − 1` most frequent entries (ties broken
/// lexicographically), leaving index 0 for UNK.
fn top_entries(counts: HashMap<String, u64>, max_size: usize) -> Vec<String> {
    let mut entries: Vec<(String, u64)> = counts.into_iter().collect();
    entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    entries.truncate(max_size.saturating_sub(1));
    entries.into_iter().map(|(t, _)| t).collect()
}

impl Vocabulary {
    /// Builds tables from a corpus of bags. Token and path frequencies are
    /// counted over context slots (what the model actually consumes); labels
    /// once per bag. The masking sentinel never enters the tables.
    pub fn build(corpus: &[PathContextBag], max_size: usize) -> Vocabulary {
        Self::build_sized(corpus, max_size, max_size, max_size)
    }

    /// Like [`Vocabulary::build`] with a separate cap per table; the
    /// vocabulary-reduction defense shrinks only the token table.
    pub fn build_sized(
        corpus: &[PathContextBag],
        max_tokens: usize,
        max_paths: usize,
        max_labels: usize,
    ) -> Vocabulary {
        let mut token_counts: HashMap<String, u64> = HashMap::new();
        let mut path_counts: HashMap<String, u64> = HashMap::new();
        let mut label_counts: HashMap<String, u64> = HashMap::new();
        for bag in corpus {
            *label_counts.entry(bag.label.clone()).or_default() += 1;
            for ctx in &bag.contexts {
                for term in [&ctx.left, &ctx.right] {
                    if term != UNK_NAME {
                        *token_counts.entry(term.clone()).or_default() += 1;
                    }
                }
                *path_counts.entry(ctx.path.clone()).or_default() += 1;
            }
        }
        let tokens = top_entries(token_counts, max_tokens);
        let paths = top_entries(path_counts, max_paths);
        let labels = top_entries(label_counts, max_labels);
        Vocabulary::from_tables(tokens, paths, labels)
    }

    pub fn from_tables(tokens: Vec<String>, paths: Vec<String>, labels: Vec<String>) -> Vocabulary {
        let token_map = index_map(&tokens);
        let path_map = index_map(&paths);
        let label_map = index_map(&labels);
        Vocabulary {
            tokens,
            paths,
            labels,
            token_map,
            path_map,
            label_map,
        }
    }

    /// Table sizes, UNK row included.
    pub fn n_tokens(&self) -> usize {
        self.tokens.len() + 1
    }
    pub fn n_paths(&self) -> usize {
        self.paths.len() + 1
    }
    pub fn n_labels(&self) -> usize {
        self.labels.len() + 1
    }

    pub fn token_index(&self, text: &str) -> usize {
        self.token_map.get(text).copied().unwrap_or(0)
    }
    pub fn path_index(&self, key: &str) -> usize {
        self.path_map.get(key).copied().unwrap_or(0)
    }
    pub fn label_index(&self, text: &str) -> usize {
        self.label_map.get(text).copied().unwrap_or(0)
    }

    pub fn token_text(&self, index: usize) -> &str {
        if index == 0 {
            UNK_NAME
        } else {
            &self.tokens[index - 1]
        }
    }
    pub fn label_text(&self, index: usize) -> &str {
        if index == 0 {
            UNK_NAME
        } else {
            &self.labels[index - 1]
        }
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&VocabularyDoc {
            tokens: self.tokens.clone(),
            paths: self.paths.clone(),
            labels: self.labels.clone(),
        })
        .expect("vocabulary serializes")
    }

    pub fn from_json(json: &str) -> Result<Vocabulary, serde_json::Error> {
        let doc: VocabularyDoc = serde_json::from_str(json)?;
        Ok(Vocabulary::from_tables(doc.tokens, doc.paths, doc.labels))
    }
}

#[cfg(test)]
mod tests {
    use super::super::PathContext;
    use super::*;

    fn bag_of(label: &str, terms: &[(&str, &str)]) -> PathContextBag {
        PathContextBag {
            label: label.to_string(),
            contexts: terms
                .iter()
                .map(|(l, r)| PathContext {
                    left: l.to_string(),
                    path: "Name\u{2191}Add\u{2193}Name".to_string(),
                    right: r.to_string(),
                })
                .collect(),
        }
    }

    #[test]
    fn frequency_rule_with_ties() {
        // x appears 5 times, y 3, z 1; with max_size 3 only x and y stay.
        let corpus = vec![bag_of(
            "m",
            &[("x", "x"), ("x", "y"), ("x", "x"), ("y", "y"), ("z", "x")],
        )];
        let v = Vocabulary::build_sized(&corpus, 3, 100, 100);
        assert_eq!(v.token_index("x"), 1);
        assert_eq!(v.token_index("y"), 2);
        assert_eq!(v.token_index("z"), 0);
        assert_eq!(v.n_tokens(), 3);
    }

    #[test]
    fn large_enough_table_maps_nothing_to_unk() {
        let corpus = vec![bag_of("m", &[("a", "b"), ("c", "d")])];
        let v = Vocabulary::build(&corpus, 100);
        for t in ["a", "b", "c", "d"] {
            assert_ne!(v.token_index(t), 0);
        }
    }

    #[test]
    fn oov_maps_to_unk() {
        let corpus = vec![bag_of("m", &[("a", "b")])];
        let v = Vocabulary::build(&corpus, 100);
        assert_eq!(v.token_index("nope"), 0);
        assert_eq!(v.label_index("nope"), 0);
        assert_eq!(v.path_index("nope"), 0);
        assert_eq!(v.token_text(0), UNK_NAME);
    }

    #[test]
    fn char_table_is_fixed() {
        assert_eq!(N_CHARS, 39);
        assert_eq!(char_index('a'), 1);
        assert_eq!(char_index('z'), 26);
        assert_eq!(char_index('0'), 27);
        assert_eq!(char_index('9'), 36);
        assert_eq!(char_index('_'), 37);
        assert_eq!(char_index('A'), CHAR_UNK);
        assert_eq!(char_index('<'), CHAR_UNK);
        assert_eq!(CHAR_PAD, 38);
    }

    #[test]
    fn json_roundtrip_preserves_indices() {
        let corpus = vec![bag_of("m", &[("x", "y"), ("x", "z")])];
        let v = Vocabulary::build(&corpus, 100);
        let back = Vocabulary::from_json(&v.to_json()).unwrap();
        assert_eq!(v, back);
    }

    #[test]
    fn sentinel_never_enters_the_table() {
        let corpus = vec![bag_of("m", &[(UNK_NAME, "x"), (UNK_NAME, UNK_NAME)])];
        let v = Vocabulary::build(&corpus, 100);
        assert_eq!(v.token_index(UNK_NAME), 0);
        assert_eq!(v.n_tokens(), 2); // UNK + x
    }
}
