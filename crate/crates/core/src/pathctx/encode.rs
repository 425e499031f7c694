use super::vocab::{char_index, Vocabulary, CHAR_PAD, CHAR_UNK};
use super::{PathContextBag, NAME_LEN, UNK_NAME};
use std::collections::BTreeMap;

/// Which name encoder the model uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NameMode {
    Token,
    Char,
}

/// A terminal as the model sees it: a token index, or a fixed-width row of
/// character indices padded with the dedicated padding index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TerminalCode {
    Token(usize),
    Chars([u8; NAME_LEN]),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedContext {
    pub left: TerminalCode,
    pub path: usize,
    pub right: TerminalCode,
}

/// An encoded method. The occurrence map records, for every terminal text,
/// the (context, side) slots it fills — a rename of one variable perturbs
/// all of its slots through a single shared one-hot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedExample {
    pub contexts: Vec<EncodedContext>,
    pub occurrences: BTreeMap<String, Vec<(usize, Side)>>,
    pub label_index: usize,
}

/// Character row for a terminal text. Texts longer than [`NAME_LEN`] are
/// truncated; the masking sentinel is fully unknown at every position.
pub fn char_row(text: &str) -> [u8; NAME_LEN] {
    if text == UNK_NAME {
        return [CHAR_UNK as u8; NAME_LEN];
    }
    let mut row = [CHAR_PAD as u8; NAME_LEN];
    for (i, c) in text.chars().take(NAME_LEN).enumerate() {
        row[i] = char_index(c) as u8;
    }
    row
}

fn terminal_code(text: &str, vocab: &Vocabulary, mode: NameMode) -> TerminalCode {
    match mode {
        NameMode::Token => TerminalCode::Token(vocab.token_index(text)),
        NameMode::Char => TerminalCode::Chars(char_row(text)),
    }
}

pub fn encode(bag: &PathContextBag, vocab: &Vocabulary, mode: NameMode) -> EncodedExample {
    let mut occurrences: BTreeMap<String, Vec<(usize, Side)>> = BTreeMap::new();
    let mut contexts = Vec::with_capacity(bag.contexts.len());
    for (i, ctx) in bag.contexts.iter().enumerate() {
        occurrences
            .entry(ctx.left.clone())
            .or_default()
            .push((i, Side::Left));
        occurrences
            .entry(ctx.right.clone())
            .or_default()
            .push((i, Side::Right));
        contexts.push(EncodedContext {
            left: terminal_code(&ctx.left, vocab, mode),
            path: vocab.path_index(&ctx.path),
            right: terminal_code(&ctx.right, vocab, mode),
        });
    }
    EncodedExample {
        contexts,
        occurrences,
        label_index: vocab.label_index(&bag.label),
    }
}
