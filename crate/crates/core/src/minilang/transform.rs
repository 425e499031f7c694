//! Semantic-preserving transforms: renaming, dead-code insertion, and the
//! equivalence check that covers exactly those two transforms.

use super::{
    is_valid_variable_name, pretty_print, Assign, Expr, ForInit, MethodAst, Stmt, Target,
    TransformError, Type, VarDecl, VarKind, VarRef,
};
use std::collections::BTreeMap;

/// Every parameter and local declaration, in declaration order
/// (parameters first, then locals in pre-order).
pub fn variables(ast: &MethodAst) -> Vec<VarRef> {
    let mut vars = Vec::new();
    for p in &ast.params {
        vars.push(VarRef {
            name: p.name.text.clone(),
            kind: VarKind::Parameter,
            decl_id: p.id,
        });
    }
    collect_locals(&ast.body, &mut vars);
    vars
}

fn collect_locals(stmts: &[Stmt], out: &mut Vec<VarRef>) {
    for s in stmts {
        match s {
            Stmt::VarDecl(d) => out.push(local(d)),
            Stmt::If { then_body, else_body, .. } => {
                collect_locals(then_body, out);
                if let Some(els) = else_body {
                    collect_locals(els, out);
                }
            }
            Stmt::For { init, body, .. } => {
                if let ForInit::Decl(d) = init {
                    out.push(local(d));
                }
                collect_locals(body, out);
            }
            _ => {}
        }
    }
}

fn local(d: &VarDecl) -> VarRef {
    VarRef {
        name: d.name.text.clone(),
        kind: VarKind::Local,
        decl_id: d.id,
    }
}

/// Rewrites every variable occurrence (declaration and use sites) through
/// `f`; occurrences where `f` returns `None` are left alone. No validity or
/// collision checks: callers that construct user-visible renames must check
/// first, while the defenses use this directly to mask names with a
/// non-lexable sentinel.
pub fn rewrite_variable_names(ast: &MethodAst, f: impl Fn(&str) -> Option<String>) -> MethodAst {
    let mut out = ast.clone();
    for p in &mut out.params {
        rewrite_ident(&mut p.name, &f);
    }
    for s in &mut out.body {
        rewrite_stmt(s, &f);
    }
    out
}

fn rewrite_ident(ident: &mut super::Ident, f: &impl Fn(&str) -> Option<String>) {
    if let Some(new) = f(&ident.text) {
        ident.text = new;
    }
}

fn rewrite_stmt(s: &mut Stmt, f: &impl Fn(&str) -> Option<String>) {
    match s {
        Stmt::VarDecl(d) => {
            rewrite_ident(&mut d.name, f);
            rewrite_expr(&mut d.init, f);
        }
        Stmt::Assign(a) => rewrite_assign(a, f),
        Stmt::If { cond, then_body, else_body, .. } => {
            rewrite_expr(cond, f);
            for s in then_body {
                rewrite_stmt(s, f);
            }
            if let Some(els) = else_body {
                for s in els {
                    rewrite_stmt(s, f);
                }
            }
        }
        Stmt::For { init, cond, step, body, .. } => {
            match init {
                ForInit::Decl(d) => {
                    rewrite_ident(&mut d.name, f);
                    rewrite_expr(&mut d.init, f);
                }
                ForInit::Assign(a) => rewrite_assign(a, f),
            }
            rewrite_expr(cond, f);
            rewrite_assign(step, f);
            for s in body {
                rewrite_stmt(s, f);
            }
        }
        Stmt::Return { value, .. } => rewrite_expr(value, f),
    }
}

fn rewrite_assign(a: &mut Assign, f: &impl Fn(&str) -> Option<String>) {
    match &mut a.target {
        Target::Name(n) => rewrite_ident(n, f),
        Target::Index { base, index, .. } => {
            rewrite_ident(base, f);
            rewrite_expr(index, f);
        }
    }
    rewrite_expr(&mut a.value, f);
}

fn rewrite_expr(e: &mut Expr, f: &impl Fn(&str) -> Option<String>) {
    match e {
        Expr::Name(n) => rewrite_ident(n, f),
        Expr::Index { base, index, .. } => {
            rewrite_ident(base, f);
            rewrite_expr(index, f);
        }
        Expr::Binary { lhs, rhs, .. } => {
            rewrite_expr(lhs, f);
            rewrite_expr(rhs, f);
        }
        Expr::Call { args, .. } => {
            for a in args {
                rewrite_expr(a, f);
            }
        }
        Expr::IntLit { .. } | Expr::BoolLit { .. } => {}
    }
}

/// Renames `v` (declaration and all uses) to `new_name`. Renaming a variable
/// to its own name is the identity. Node ids are preserved.
pub fn rename_variable(
    ast: &MethodAst,
    v: &VarRef,
    new_name: &str,
) -> Result<MethodAst, TransformError> {
    if new_name == v.name {
        return Ok(ast.clone());
    }
    if !is_valid_variable_name(new_name) {
        return Err(TransformError::InvalidIdentifier(new_name.to_string()));
    }
    let vars = variables(ast);
    if !vars.iter().any(|r| r.name == v.name && r.decl_id == v.decl_id) {
        return Err(TransformError::UnknownVariable(v.name.clone()));
    }
    if vars.iter().any(|r| r.name == new_name) {
        return Err(TransformError::Collision(new_name.to_string()));
    }
    // Names are unique method-wide, so a textual match identifies v exactly.
    let old = v.name.clone();
    let new = new_name.to_string();
    Ok(rewrite_variable_names(ast, |name| {
        (name == old).then(|| new.clone())
    }))
}

/// Appends `int <name> = 0;` as the last statement of the method body.
/// The new variable has zero uses; fresh node ids come from the watermark.
pub fn insert_dead_code(ast: &MethodAst, name: &str) -> Result<MethodAst, TransformError> {
    if !is_valid_variable_name(name) {
        return Err(TransformError::InvalidIdentifier(name.to_string()));
    }
    if variables(ast).iter().any(|r| r.name == name) {
        return Err(TransformError::Collision(name.to_string()));
    }
    let mut out = ast.clone();
    let decl_id = out.fresh_id();
    let name_id = out.fresh_id();
    let lit_id = out.fresh_id();
    out.body.push(Stmt::VarDecl(VarDecl {
        id: decl_id,
        ty: Type::Int,
        name: super::Ident {
            id: name_id,
            text: name.to_string(),
        },
        init: Expr::IntLit { id: lit_id, value: 0 },
    }));
    Ok(out)
}

/// True iff the two methods become structurally equal after (1) deleting
/// declarations of variables with no occurrences beyond the declaration
/// itself (to a fixpoint) and (2) canonicalizing variable names to indices
/// in declaration order. Sound for renaming and dead-code insertion; not a
/// general semantic equivalence.
pub fn check_semantic_equivalence(a: &MethodAst, b: &MethodAst) -> bool {
    let ca = canonicalize(a);
    let cb = canonicalize(b);
    ca.return_type == cb.return_type
        && ca.params.len() == cb.params.len()
        && ca
            .params
            .iter()
            .zip(&cb.params)
            .all(|(p, q)| p.ty == q.ty && p.name.text == q.name.text)
        && body_text(&ca) == body_text(&cb)
}

fn body_text(ast: &MethodAst) -> String {
    // The label is the prediction target, not part of the snippet's
    // semantics; compare the printed form minus the signature line's name.
    let mut neutral = ast.clone();
    neutral.label = "m".to_string();
    pretty_print(&neutral)
}

fn canonicalize(ast: &MethodAst) -> MethodAst {
    let mut stripped = ast.clone();
    loop {
        let counts = occurrence_counts(&stripped);
        let dead: Vec<String> = variables(&stripped)
            .into_iter()
            .filter(|v| v.kind == VarKind::Local && counts.get(&v.name).copied().unwrap_or(0) == 1)
            .map(|v| v.name)
            .collect();
        if dead.is_empty() {
            break;
        }
        strip_dead_decls(&mut stripped.body, &dead);
    }
    // De-Bruijn-style names in declaration order.
    let order: BTreeMap<String, usize> = variables(&stripped)
        .into_iter()
        .enumerate()
        .map(|(i, v)| (v.name, i))
        .collect();
    rewrite_variable_names(&stripped, |name| {
        order.get(name).map(|i| format!("v{i}"))
    })
}

/// Occurrences per name, declaration sites included.
fn occurrence_counts(ast: &MethodAst) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    let mut bump = |name: &str| *counts.entry(name.to_string()).or_insert(0) += 1;
    for p in &ast.params {
        bump(&p.name.text);
    }
    fn walk_expr(e: &Expr, bump: &mut impl FnMut(&str)) {
        match e {
            Expr::Name(n) => bump(&n.text),
            Expr::Index { base, index, .. } => {
                bump(&base.text);
                walk_expr(index, bump);
            }
            Expr::Binary { lhs, rhs, .. } => {
                walk_expr(lhs, bump);
                walk_expr(rhs, bump);
            }
            Expr::Call { args, .. } => args.iter().for_each(|a| walk_expr(a, bump)),
            _ => {}
        }
    }
    fn walk_assign(a: &Assign, bump: &mut impl FnMut(&str)) {
        match &a.target {
            Target::Name(n) => bump(&n.text),
            Target::Index { base, index, .. } => {
                bump(&base.text);
                walk_expr(index, bump);
            }
        }
        walk_expr(&a.value, bump);
    }
    fn walk(stmts: &[Stmt], bump: &mut impl FnMut(&str)) {
        for s in stmts {
            match s {
                Stmt::VarDecl(d) => {
                    bump(&d.name.text);
                    walk_expr(&d.init, bump);
                }
                Stmt::Assign(a) => walk_assign(a, bump),
                Stmt::If { cond, then_body, else_body, .. } => {
                    walk_expr(cond, bump);
                    walk(then_body, bump);
                    if let Some(els) = else_body {
                        walk(els, bump);
                    }
                }
                Stmt::For { init, cond, step, body, .. } => {
                    match init {
                        ForInit::Decl(d) => {
                            bump(&d.name.text);
                            walk_expr(&d.init, bump);
                        }
                        ForInit::Assign(a) => walk_assign(a, bump),
                    }
                    walk_expr(cond, bump);
                    walk_assign(step, bump);
                    walk(body, bump);
                }
                Stmt::Return { value, .. } => walk_expr(value, bump),
            }
        }
    }
    walk(&ast.body, &mut bump);
    counts
}

/// Removes block-level declarations of the given names. For-init
/// declarations are never dead (the loop header uses them), so only
/// statement-position declarations are candidates.
fn strip_dead_decls(stmts: &mut Vec<Stmt>, dead: &[String]) {
    stmts.retain(|s| match s {
        Stmt::VarDecl(d) => !dead.contains(&d.name.text),
        _ => true,
    });
    for s in stmts {
        match s {
            Stmt::If { then_body, else_body, .. } => {
                strip_dead_decls(then_body, dead);
                if let Some(els) = else_body {
                    strip_dead_decls(els, dead);
                }
            }
            Stmt::For { body, .. } => strip_dead_decls(body, dead),
            _ => {}
        }
    }
}

/// Total occurrence count of a name (declaration plus uses); handy for
/// rename-accounting checks.
pub fn count_occurrences(ast: &MethodAst, name: &str) -> usize {
    occurrence_counts(ast).get(name).copied().unwrap_or(0)
}
