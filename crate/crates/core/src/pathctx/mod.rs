//! AST path-contexts: the classifier's input representation.
//!
//! A method is represented as a bag of (left terminal, path, right terminal)
//! triples, one per unordered pair of terminals whose connecting tree path is
//! short enough. Terminals are identifier and literal leaves; the method name
//! never appears (the label must not leak into the input).

mod encode;
mod vocab;

pub use encode::{char_row, encode, EncodedContext, EncodedExample, NameMode, Side, TerminalCode};
pub use vocab::{char_index, Vocabulary, CHAR_ALPHABET, CHAR_PAD, CHAR_UNK, N_CHARS};

use crate::minilang::{Assign, Expr, ForInit, MethodAst, Stmt, Target};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Sentinel text for a masked variable; encodes to the UNK index in every
/// table and is deliberately not a lexable identifier.
pub const UNK_NAME: &str = "<unk>";

/// Fixed width of the character-level name encoding.
pub const NAME_LEN: usize = 12;

/// Direction arrows used in path keys.
pub const UP: char = '\u{2191}';
pub const DOWN: char = '\u{2193}';

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PathContext {
    pub left: String,
    /// Node kinds along the tree walk, joined with direction arrows,
    /// e.g. `IntLit↑VarDecl↓Name`.
    pub path: String,
    pub right: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathContextBag {
    pub label: String,
    /// Sorted by (left, path, right) and capped at `max_contexts`.
    pub contexts: Vec<PathContext>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionConfig {
    pub max_path_length: usize,
    pub max_contexts: usize,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        ExtractionConfig {
            max_path_length: 8,
            max_contexts: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExtractError {
    #[error("method has fewer than two terminals; nothing to extract")]
    EmptyBag,
}

// --- Tree view of the AST ---

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Method,
    Block,
    Param,
    VarDecl,
    Assign,
    If,
    For,
    Return,
    Index,
    Name,
    IntLit,
    BoolLit,
    Len,
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    And,
    Or,
}

impl Kind {
    fn as_str(self) -> &'static str {
        match self {
            Kind::Method => "Method",
            Kind::Block => "Block",
            Kind::Param => "Param",
            Kind::VarDecl => "VarDecl",
            Kind::Assign => "Assign",
            Kind::If => "If",
            Kind::For => "For",
            Kind::Return => "Return",
            Kind::Index => "Index",
            Kind::Name => "Name",
            Kind::IntLit => "IntLit",
            Kind::BoolLit => "BoolLit",
            Kind::Len => "Len",
            Kind::Add => "Add",
            Kind::Sub => "Sub",
            Kind::Mul => "Mul",
            Kind::Div => "Div",
            Kind::Mod => "Mod",
            Kind::Lt => "Lt",
            Kind::Le => "Le",
            Kind::Gt => "Gt",
            Kind::Ge => "Ge",
            Kind::Eq => "Eq",
            Kind::Ne => "Ne",
            Kind::And => "And",
            Kind::Or => "Or",
        }
    }

    fn of_op(op: crate::minilang::BinOp) -> Kind {
        use crate::minilang::BinOp as B;
        match op {
            B::Add => Kind::Add,
            B::Sub => Kind::Sub,
            B::Mul => Kind::Mul,
            B::Div => Kind::Div,
            B::Mod => Kind::Mod,
            B::Lt => Kind::Lt,
            B::Le => Kind::Le,
            B::Gt => Kind::Gt,
            B::Ge => Kind::Ge,
            B::Eq => Kind::Eq,
            B::Ne => Kind::Ne,
            B::And => Kind::And,
            B::Or => Kind::Or,
        }
    }
}

struct TreeNode {
    kind: Kind,
    parent: Option<usize>,
    depth: usize,
    terminal: Option<String>,
}

struct Tree {
    nodes: Vec<TreeNode>,
    /// Indices of terminal nodes in pre-order.
    terminals: Vec<usize>,
}

impl Tree {
    fn push(&mut self, kind: Kind, parent: Option<usize>, terminal: Option<String>) -> usize {
        let depth = parent.map(|p| self.nodes[p].depth + 1).unwrap_or(0);
        let idx = self.nodes.len();
        let is_terminal = terminal.is_some();
        self.nodes.push(TreeNode {
            kind,
            parent,
            depth,
            terminal,
        });
        if is_terminal {
            self.terminals.push(idx);
        }
        idx
    }
}

fn build_tree(ast: &MethodAst) -> Tree {
    let mut tree = Tree {
        nodes: Vec::new(),
        terminals: Vec::new(),
    };
    let method = tree.push(Kind::Method, None, None);
    for p in &ast.params {
        let param = tree.push(Kind::Param, Some(method), None);
        tree.push(Kind::Name, Some(param), Some(p.name.text.clone()));
    }
    let block = tree.push(Kind::Block, Some(method), None);
    for s in &ast.body {
        add_stmt(&mut tree, s, block);
    }
    tree
}

fn add_stmt(tree: &mut Tree, s: &Stmt, parent: usize) {
    match s {
        Stmt::VarDecl(d) => {
            let decl = tree.push(Kind::VarDecl, Some(parent), None);
            tree.push(Kind::Name, Some(decl), Some(d.name.text.clone()));
            add_expr(tree, &d.init, decl);
        }
        Stmt::Assign(a) => add_assign(tree, a, parent),
        Stmt::If { cond, then_body, else_body, .. } => {
            let node = tree.push(Kind::If, Some(parent), None);
            add_expr(tree, cond, node);
            let then_block = tree.push(Kind::Block, Some(node), None);
            for s in then_body {
                add_stmt(tree, s, then_block);
            }
            if let Some(els) = else_body {
                let else_block = tree.push(Kind::Block, Some(node), None);
                for s in els {
                    add_stmt(tree, s, else_block);
                }
            }
        }
        Stmt::For { init, cond, step, body, .. } => {
            let node = tree.push(Kind::For, Some(parent), None);
            match init {
                ForInit::Decl(d) => {
                    let decl = tree.push(Kind::VarDecl, Some(node), None);
                    tree.push(Kind::Name, Some(decl), Some(d.name.text.clone()));
                    add_expr(tree, &d.init, decl);
                }
                ForInit::Assign(a) => add_assign(tree, a, node),
            }
            add_expr(tree, cond, node);
            add_assign(tree, step, node);
            let body_block = tree.push(Kind::Block, Some(node), None);
            for s in body {
                add_stmt(tree, s, body_block);
            }
        }
        Stmt::Return { value, .. } => {
            let node = tree.push(Kind::Return, Some(parent), None);
            add_expr(tree, value, node);
        }
    }
}

fn add_assign(tree: &mut Tree, a: &Assign, parent: usize) {
    let node = tree.push(Kind::Assign, Some(parent), None);
    match &a.target {
        Target::Name(n) => {
            tree.push(Kind::Name, Some(node), Some(n.text.clone()));
        }
        Target::Index { base, index, .. } => {
            let idx = tree.push(Kind::Index, Some(node), None);
            tree.push(Kind::Name, Some(idx), Some(base.text.clone()));
            add_expr(tree, index, idx);
        }
    }
    add_expr(tree, &a.value, node);
}

fn add_expr(tree: &mut Tree, e: &Expr, parent: usize) {
    match e {
        Expr::IntLit { value, .. } => {
            tree.push(Kind::IntLit, Some(parent), Some(value.to_string()));
        }
        Expr::BoolLit { value, .. } => {
            tree.push(
                Kind::BoolLit,
                Some(parent),
                Some(if *value { "true" } else { "false" }.to_string()),
            );
        }
        Expr::Name(n) => {
            tree.push(Kind::Name, Some(parent), Some(n.text.clone()));
        }
        Expr::Index { base, index, .. } => {
            let idx = tree.push(Kind::Index, Some(parent), None);
            tree.push(Kind::Name, Some(idx), Some(base.text.clone()));
            add_expr(tree, index, idx);
        }
        Expr::Binary { op, lhs, rhs, .. } => {
            let node = tree.push(Kind::of_op(*op), Some(parent), None);
            add_expr(tree, lhs, node);
            add_expr(tree, rhs, node);
        }
        Expr::Call { builtin, args, .. } => {
            let node = tree.push(
                match builtin {
                    crate::minilang::Builtin::Len => Kind::Len,
                },
                Some(parent),
                None,
            );
            for a in args {
                add_expr(tree, a, node);
            }
        }
    }
}

/// Terminal texts in pre-order: every identifier and literal leaf. This is
/// also Sym(c) with per-occurrence multiplicity, as used by the outlier
/// defense.
pub fn collect_terminals(ast: &MethodAst) -> Vec<String> {
    let tree = build_tree(ast);
    tree.terminals
        .iter()
        .map(|&i| tree.nodes[i].terminal.clone().unwrap())
        .collect()
}

/// One context per unordered pair of distinct terminals whose connecting
/// path has at most `max_path_length` nodes (endpoints included). The
/// lexicographically smaller terminal goes on the left; walking the path
/// from the other side would produce the same canonical key.
pub fn extract_path_contexts(
    ast: &MethodAst,
    config: ExtractionConfig,
) -> Result<PathContextBag, ExtractError> {
    let tree = build_tree(ast);
    if tree.terminals.len() < 2 {
        return Err(ExtractError::EmptyBag);
    }
    let mut contexts = Vec::new();
    for (ai, &a) in tree.terminals.iter().enumerate() {
        for &b in &tree.terminals[ai + 1..] {
            if let Some(path_nodes) = path_between(&tree, a, b, config.max_path_length) {
                let ta = tree.nodes[a].terminal.as_deref().unwrap();
                let tb = tree.nodes[b].terminal.as_deref().unwrap();
                // a precedes b in traversal order, which settles ties.
                let (left, right, ordered) = if ta <= tb { (ta, tb, true) } else { (tb, ta, false) };
                let key = if ordered {
                    path_key(&tree, &path_nodes)
                } else {
                    let reversed: Vec<usize> = path_nodes.iter().rev().copied().collect();
                    path_key(&tree, &reversed)
                };
                contexts.push(PathContext {
                    left: left.to_string(),
                    path: key,
                    right: right.to_string(),
                });
            }
        }
    }
    contexts.sort();
    contexts.truncate(config.max_contexts);
    Ok(PathContextBag {
        label: ast.label.clone(),
        contexts,
    })
}

/// Node indices from `a` up to the lowest common ancestor and down to `b`,
/// or None if the path is longer than `max_nodes`.
fn path_between(tree: &Tree, a: usize, b: usize, max_nodes: usize) -> Option<Vec<usize>> {
    let mut up_a = Vec::new();
    let mut up_b = Vec::new();
    let (mut x, mut y) = (a, b);
    while tree.nodes[x].depth > tree.nodes[y].depth {
        up_a.push(x);
        x = tree.nodes[x].parent.unwrap();
    }
    while tree.nodes[y].depth > tree.nodes[x].depth {
        up_b.push(y);
        y = tree.nodes[y].parent.unwrap();
    }
    while x != y {
        up_a.push(x);
        up_b.push(y);
        x = tree.nodes[x].parent.unwrap();
        y = tree.nodes[y].parent.unwrap();
    }
    let lca = x;
    let mut path = up_a;
    path.push(lca);
    path.extend(up_b.into_iter().rev());
    (path.len() <= max_nodes).then_some(path)
}

/// Joins node kinds with ↑ while ascending and ↓ while descending.
fn path_key(tree: &Tree, path: &[usize]) -> String {
    let mut key = String::new();
    for (i, &node) in path.iter().enumerate() {
        if i > 0 {
            let descending = tree.nodes[path[i - 1]].depth < tree.nodes[node].depth;
            key.push(if descending { DOWN } else { UP });
        }
        key.push_str(tree.nodes[node].kind.as_str());
    }
    key
}

/// Reverses a path key: reversed kind sequence with flipped arrows.
pub fn reverse_path_key(key: &str) -> String {
    let mut parts: Vec<String> = Vec::new();
    let mut arrows: Vec<char> = Vec::new();
    let mut current = String::new();
    for c in key.chars() {
        if c == UP || c == DOWN {
            parts.push(std::mem::take(&mut current));
            arrows.push(c);
        } else {
            current.push(c);
        }
    }
    parts.push(current);
    let mut out = String::new();
    for (i, part) in parts.iter().rev().enumerate() {
        if i > 0 {
            let arrow = arrows[arrows.len() - i];
            out.push(if arrow == UP { DOWN } else { UP });
        }
        out.push_str(part);
    }
    out
}
