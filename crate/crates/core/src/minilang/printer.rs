use super::{Assign, Expr, ForInit, MethodAst, Stmt, Target};

/// Canonical source text: 2-space indentation, one statement per line, LF
/// line endings, minimal parentheses. Parsing the output yields a method
/// that is structurally equal to the input (spans and node ids aside).
pub fn pretty_print(ast: &MethodAst) -> String {
    let mut out = String::new();
    out.push_str(&format!("{} {}(", ast.return_type, ast.label));
    for (i, p) in ast.params.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        out.push_str(&format!("{} {}", p.ty, p.name.text));
    }
    out.push_str(") {\n");
    for s in &ast.body {
        print_stmt(s, 1, &mut out);
    }
    out.push_str("}\n");
    out
}

fn indent(level: usize, out: &mut String) {
    for _ in 0..level {
        out.push_str("  ");
    }
}

fn print_stmt(s: &Stmt, level: usize, out: &mut String) {
    indent(level, out);
    match s {
        Stmt::VarDecl(d) => {
            out.push_str(&format!("{} {} = ", d.ty, d.name.text));
            print_expr(&d.init, 0, out);
            out.push_str(";\n");
        }
        Stmt::Assign(a) => {
            print_assign(a, out);
            out.push_str(";\n");
        }
        Stmt::If { cond, then_body, else_body, .. } => {
            out.push_str("if (");
            print_expr(cond, 0, out);
            out.push_str(") {\n");
            for s in then_body {
                print_stmt(s, level + 1, out);
            }
            indent(level, out);
            if let Some(els) = else_body {
                out.push_str("} else {\n");
                for s in els {
                    print_stmt(s, level + 1, out);
                }
                indent(level, out);
            }
            out.push_str("}\n");
        }
        Stmt::For { init, cond, step, body, .. } => {
            out.push_str("for (");
            match init {
                ForInit::Decl(d) => {
                    out.push_str(&format!("{} {} = ", d.ty, d.name.text));
                    print_expr(&d.init, 0, out);
                }
                ForInit::Assign(a) => print_assign(a, out),
            }
            out.push_str("; ");
            print_expr(cond, 0, out);
            out.push_str("; ");
            print_assign(step, out);
            out.push_str(") {\n");
            for s in body {
                print_stmt(s, level + 1, out);
            }
            indent(level, out);
            out.push_str("}\n");
        }
        Stmt::Return { value, .. } => {
            out.push_str("return ");
            print_expr(value, 0, out);
            out.push_str(";\n");
        }
    }
}

fn print_assign(a: &Assign, out: &mut String) {
    match &a.target {
        Target::Name(n) => out.push_str(&n.text),
        Target::Index { base, index, .. } => {
            out.push_str(&base.text);
            out.push('[');
            print_expr(index, 0, out);
            out.push(']');
        }
    }
    out.push_str(" = ");
    print_expr(&a.value, 0, out);
}

/// `min_prec` is the loosest precedence printable without parentheses.
/// All operators are left-associative, so a right child at the parent's own
/// precedence needs parentheses while a left child does not.
fn print_expr(e: &Expr, min_prec: u8, out: &mut String) {
    match e {
        Expr::IntLit { value, .. } => out.push_str(&value.to_string()),
        Expr::BoolLit { value, .. } => out.push_str(if *value { "true" } else { "false" }),
        Expr::Name(n) => out.push_str(&n.text),
        Expr::Index { base, index, .. } => {
            out.push_str(&base.text);
            out.push('[');
            print_expr(index, 0, out);
            out.push(']');
        }
        Expr::Binary { op, lhs, rhs, .. } => {
            let prec = op.precedence();
            let parens = prec < min_prec;
            if parens {
                out.push('(');
            }
            print_expr(lhs, prec, out);
            out.push_str(&format!(" {} ", op.symbol()));
            print_expr(rhs, prec + 1, out);
            if parens {
                out.push(')');
            }
        }
        Expr::Call { builtin, args, .. } => {
            out.push_str(builtin.name());
            out.push('(');
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                print_expr(a, 0, out);
            }
            out.push(')');
        }
    }
}
