//! MiniLang: a closed Java-like toy language.
//!
//! One method per source text. Three types (`int`, `bool`, `int[]`),
//! recursive-descent parsable, with strict scope rules: variable names are
//! unique across the whole method, every use resolves to a declaration that
//! is lexically in scope, and variable names match `[a-z][a-z0-9_]{0,11}`.
//! Method names are exempt from the variable-name rule (they may be
//! camelCase); they are labels, not variables.

mod lexer;
mod parser;
mod printer;
mod transform;

pub use lexer::{lex, Token, TokenKind};
pub use parser::{parse, typecheck};
pub use printer::pretty_print;
pub use transform::{
    check_semantic_equivalence, count_occurrences, insert_dead_code, rename_variable,
    rewrite_variable_names, variables,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Maximum variable-name length; keeps the token-level and character-level
/// name encoders aligned.
pub const MAX_NAME_LEN: usize = 12;

pub const KEYWORDS: &[&str] = &["int", "bool", "if", "else", "for", "return", "true", "false", "len"];

/// Valid variable name: `[a-z][a-z0-9_]{0,11}`, not a keyword.
pub fn is_valid_variable_name(name: &str) -> bool {
    if name.is_empty() || name.len() > MAX_NAME_LEN || KEYWORDS.contains(&name) {
        return false;
    }
    let mut chars = name.chars();
    let first = chars.next().unwrap();
    first.is_ascii_lowercase() && chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
}

pub type NodeId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Type {
    Int,
    Bool,
    IntArray,
}

impl std::fmt::Display for Type {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Type::Int => write!(f, "int"),
            Type::Bool => write!(f, "bool"),
            Type::IntArray => write!(f, "int[]"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
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

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Mod => "%",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }

    /// Binding strength; larger binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne => 3,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 4,
            BinOp::Add | BinOp::Sub => 5,
            BinOp::Mul | BinOp::Div | BinOp::Mod => 6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Builtin {
    Len,
}

impl Builtin {
    pub fn name(self) -> &'static str {
        match self {
            Builtin::Len => "len",
        }
    }
}

/// A name occurrence (declaration site or use site). Its own AST node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ident {
    pub id: NodeId,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Param {
    pub id: NodeId,
    pub ty: Type,
    pub name: Ident,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    IntLit { id: NodeId, value: i64 },
    BoolLit { id: NodeId, value: bool },
    Name(Ident),
    Index { id: NodeId, base: Ident, index: Box<Expr> },
    Binary { id: NodeId, op: BinOp, lhs: Box<Expr>, rhs: Box<Expr> },
    Call { id: NodeId, builtin: Builtin, args: Vec<Expr> },
}

/// Assignment target: a plain name or an indexed array slot.
#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    Name(Ident),
    Index { id: NodeId, base: Ident, index: Expr },
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarDecl {
    pub id: NodeId,
    pub ty: Type,
    pub name: Ident,
    pub init: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assign {
    pub id: NodeId,
    pub target: Target,
    pub value: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ForInit {
    Decl(VarDecl),
    Assign(Assign),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Stmt {
    VarDecl(VarDecl),
    Assign(Assign),
    If {
        id: NodeId,
        cond: Expr,
        then_body: Vec<Stmt>,
        else_body: Option<Vec<Stmt>>,
    },
    For {
        id: NodeId,
        init: ForInit,
        cond: Expr,
        step: Assign,
        body: Vec<Stmt>,
    },
    Return {
        id: NodeId,
        value: Expr,
    },
}

/// A parsed method: the code snippet the model classifies. `label` is the
/// method name, i.e. the prediction target; it is not part of the body.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodAst {
    pub id: NodeId,
    pub return_type: Type,
    pub label: String,
    pub params: Vec<Param>,
    pub body: Vec<Stmt>,
    /// Watermark for allocating fresh node ids in transforms.
    pub next_id: NodeId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VarKind {
    Parameter,
    Local,
}

/// A declared variable: a member of the method's renameable set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarRef {
    pub name: String,
    pub kind: VarKind,
    pub decl_id: NodeId,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MiniLangError {
    #[error("lex error at byte {pos}: unexpected character {ch:?}")]
    Lex { pos: usize, ch: char },
    #[error("parse error at byte {pos}: expected {expected}, found {found}")]
    Parse {
        pos: usize,
        expected: String,
        found: String,
    },
    #[error("scope error: use of undeclared name {0:?}")]
    Undeclared(String),
    #[error("scope error: duplicate declaration of {0:?}")]
    Duplicate(String),
    #[error("scope error: {0:?} is not a valid variable name")]
    BadVariableName(String),
    #[error("type error: {0}")]
    Type(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransformError {
    #[error("name {0:?} collides with an existing variable")]
    Collision(String),
    #[error("{0:?} is not a valid identifier")]
    InvalidIdentifier(String),
    #[error("variable {0:?} does not exist in this method")]
    UnknownVariable(String),
}

impl Expr {
    pub fn id(&self) -> NodeId {
        match self {
            Expr::IntLit { id, .. }
            | Expr::BoolLit { id, .. }
            | Expr::Index { id, .. }
            | Expr::Binary { id, .. }
            | Expr::Call { id, .. } => *id,
            Expr::Name(ident) => ident.id,
        }
    }
}

impl MethodAst {
    pub fn fresh_id(&mut self) -> NodeId {
        let id = self.next_id;
        self.next_id += 1;
        id
    }

    /// All node ids in the method, for uniqueness checks.
    pub fn all_node_ids(&self) -> Vec<NodeId> {
        let mut ids = vec![self.id];
        for p in &self.params {
            ids.push(p.id);
            ids.push(p.name.id);
        }
        for s in &self.body {
            collect_stmt_ids(s, &mut ids);
        }
        ids
    }
}

fn collect_expr_ids(e: &Expr, out: &mut Vec<NodeId>) {
    out.push(e.id());
    match e {
        Expr::Index { base, index, .. } => {
            out.push(base.id);
            collect_expr_ids(index, out);
        }
        Expr::Binary { lhs, rhs, .. } => {
            collect_expr_ids(lhs, out);
            collect_expr_ids(rhs, out);
        }
        Expr::Call { args, .. } => {
            for a in args {
                collect_expr_ids(a, out);
            }
        }
        _ => {}
    }
}

fn collect_stmt_ids(s: &Stmt, out: &mut Vec<NodeId>) {
    match s {
        Stmt::VarDecl(d) => {
            out.push(d.id);
            out.push(d.name.id);
            collect_expr_ids(&d.init, out);
        }
        Stmt::Assign(a) => collect_assign_ids(a, out),
        Stmt::If { id, cond, then_body, else_body } => {
            out.push(*id);
            collect_expr_ids(cond, out);
            for s in then_body {
                collect_stmt_ids(s, out);
            }
            if let Some(els) = else_body {
                for s in els {
                    collect_stmt_ids(s, out);
                }
            }
        }
        Stmt::For { id, init, cond, step, body } => {
            out.push(*id);
            match init {
                ForInit::Decl(d) => {
                    out.push(d.id);
                    out.push(d.name.id);
                    collect_expr_ids(&d.init, out);
                }
                ForInit::Assign(a) => collect_assign_ids(a, out),
            }
            collect_expr_ids(cond, out);
            collect_assign_ids(step, out);
            for s in body {
                collect_stmt_ids(s, out);
            }
        }
        Stmt::Return { id, value } => {
            out.push(*id);
            collect_expr_ids(value, out);
        }
    }
}

fn collect_assign_ids(a: &Assign, out: &mut Vec<NodeId>) {
    out.push(a.id);
    match &a.target {
        Target::Name(n) => out.push(n.id),
        Target::Index { id, base, index } => {
            out.push(*id);
            out.push(base.id);
            collect_expr_ids(index, out);
        }
    }
    collect_expr_ids(&a.value, out);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variable_name_rule() {
        assert!(is_valid_variable_name("a"));
        assert!(is_valid_variable_name("count"));
        assert!(is_valid_variable_name("a1_b2"));
        assert!(is_valid_variable_name("abcdefghijkl")); // 12 chars
        assert!(!is_valid_variable_name("abcdefghijklm")); // 13 chars
        assert!(!is_valid_variable_name(""));
        assert!(!is_valid_variable_name("Count"));
        assert!(!is_valid_variable_name("1a"));
        assert!(!is_valid_variable_name("_a"));
        assert!(!is_valid_variable_name("int"));
        assert!(!is_valid_variable_name("len"));
        assert!(!is_valid_variable_name("true"));
    }
}
