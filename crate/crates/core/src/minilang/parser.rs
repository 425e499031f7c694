use super::lexer::{lex, Token, TokenKind};
use super::{
    is_valid_variable_name, Assign, BinOp, Builtin, Expr, ForInit, Ident, MethodAst,
    MiniLangError, NodeId, Param, Stmt, Target, Type, VarDecl,
};
use std::collections::HashSet;

/// Parses one method. Performs lexing, recursive-descent parsing, and the
/// scope checks: method-wide unique variable names, uses resolve to a
/// declaration that is lexically in scope, declared names obey the
/// variable-name rule.
pub fn parse(source: &str) -> Result<MethodAst, MiniLangError> {
    let tokens = lex(source)?;
    let mut p = Parser {
        tokens,
        pos: 0,
        next_id: 0,
        source_len: source.len(),
    };
    let mut ast = p.method()?;
    ast.next_id = p.next_id;
    check_scopes(&ast)?;
    Ok(ast)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    next_id: NodeId,
    source_len: usize,
}

impl Parser {
    fn fresh(&mut self) -> NodeId {
        let id = self.next_id;
        self.next_id += 1;
        id
    }

    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn peek_lexeme(&self) -> &str {
        self.peek().map(|t| t.lexeme.as_str()).unwrap_or("")
    }

    fn at(&self, lexeme: &str) -> bool {
        self.peek_lexeme() == lexeme
    }

    fn error(&self, expected: &str) -> MiniLangError {
        match self.peek() {
            Some(t) => MiniLangError::Parse {
                pos: t.span.0,
                expected: expected.to_string(),
                found: format!("{:?}", t.lexeme),
            },
            None => MiniLangError::Parse {
                pos: self.source_len,
                expected: expected.to_string(),
                found: "end of input".to_string(),
            },
        }
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        self.pos += 1;
        t
    }

    fn expect(&mut self, lexeme: &str) -> Result<Token, MiniLangError> {
        if self.at(lexeme) {
            Ok(self.bump())
        } else {
            Err(self.error(&format!("{:?}", lexeme)))
        }
    }

    fn ident(&mut self, what: &str) -> Result<Ident, MiniLangError> {
        match self.peek() {
            Some(t) if t.kind == TokenKind::Identifier => {
                let t = self.bump();
                Ok(Ident {
                    id: self.fresh(),
                    text: t.lexeme,
                })
            }
            _ => Err(self.error(what)),
        }
    }

    fn at_type(&self) -> bool {
        matches!(self.peek_lexeme(), "int" | "bool")
    }

    fn ty(&mut self) -> Result<Type, MiniLangError> {
        match self.peek_lexeme() {
            "int" => {
                self.bump();
                if self.at("[") {
                    self.bump();
                    self.expect("]")?;
                    Ok(Type::IntArray)
                } else {
                    Ok(Type::Int)
                }
            }
            "bool" => {
                self.bump();
                Ok(Type::Bool)
            }
            _ => Err(self.error("a type (`int`, `int[]`, or `bool`)")),
        }
    }

    fn method(&mut self) -> Result<MethodAst, MiniLangError> {
        let id = self.fresh();
        let return_type = self.ty()?;
        let label = self.ident("a method name")?.text;
        self.expect("(")?;
        let mut params = Vec::new();
        if !self.at(")") {
            loop {
                let ty = self.ty()?;
                let name = self.ident("a parameter name")?;
                params.push(Param {
                    id: self.fresh(),
                    ty,
                    name,
                });
                if self.at(",") {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        self.expect(")")?;
        let body = self.block()?;
        if let Some(t) = self.peek() {
            return Err(MiniLangError::Parse {
                pos: t.span.0,
                expected: "end of input".to_string(),
                found: format!("{:?}", t.lexeme),
            });
        }
        Ok(MethodAst {
            id,
            return_type,
            label,
            params,
            body,
            next_id: 0,
        })
    }

    fn block(&mut self) -> Result<Vec<Stmt>, MiniLangError> {
        self.expect("{")?;
        let mut stmts = Vec::new();
        while !self.at("}") {
            stmts.push(self.stmt()?);
        }
        self.expect("}")?;
        Ok(stmts)
    }

    fn stmt(&mut self) -> Result<Stmt, MiniLangError> {
        match self.peek_lexeme() {
            "if" => self.if_stmt(),
            "for" => self.for_stmt(),
            "return" => {
                self.bump();
                let id = self.fresh();
                let value = self.expr()?;
                self.expect(";")?;
                Ok(Stmt::Return { id, value })
            }
            _ if self.at_type() => {
                let d = self.var_decl()?;
                self.expect(";")?;
                Ok(Stmt::VarDecl(d))
            }
            _ => {
                let a = self.assign()?;
                self.expect(";")?;
                Ok(Stmt::Assign(a))
            }
        }
    }

    fn var_decl(&mut self) -> Result<VarDecl, MiniLangError> {
        let id = self.fresh();
        let ty = self.ty()?;
        let name = self.ident("a variable name")?;
        self.expect("=")?;
        let init = self.expr()?;
        Ok(VarDecl { id, ty, name, init })
    }

    fn assign(&mut self) -> Result<Assign, MiniLangError> {
        let id = self.fresh();
        let name = self.ident("an assignment target")?;
        let target = if self.at("[") {
            self.bump();
            let index = self.expr()?;
            self.expect("]")?;
            Target::Index {
                id: self.fresh(),
                base: name,
                index,
            }
        } else {
            Target::Name(name)
        };
        self.expect("=")?;
        let value = self.expr()?;
        Ok(Assign { id, target, value })
    }

    fn if_stmt(&mut self) -> Result<Stmt, MiniLangError> {
        self.expect("if")?;
        let id = self.fresh();
        self.expect("(")?;
        let cond = self.expr()?;
        self.expect(")")?;
        let then_body = self.block()?;
        let else_body = if self.at("else") {
            self.bump();
            Some(self.block()?)
        } else {
            None
        };
        Ok(Stmt::If {
            id,
            cond,
            then_body,
            else_body,
        })
    }

    fn for_stmt(&mut self) -> Result<Stmt, MiniLangError> {
        self.expect("for")?;
        let id = self.fresh();
        self.expect("(")?;
        let init = if self.at_type() {
            ForInit::Decl(self.var_decl()?)
        } else {
            ForInit::Assign(self.assign()?)
        };
        self.expect(";")?;
        let cond = self.expr()?;
        self.expect(";")?;
        let step = self.assign()?;
        self.expect(")")?;
        let body = self.block()?;
        Ok(Stmt::For {
            id,
            init,
            cond,
            step,
            body,
        })
    }

    fn expr(&mut self) -> Result<Expr, MiniLangError> {
        self.binary(1)
    }

    fn binary(&mut self, min_prec: u8) -> Result<Expr, MiniLangError> {
        let mut lhs = if min_prec > 6 {
            self.primary()?
        } else {
            self.binary(min_prec + 1)?
        };
        loop {
            let op = match self.peek_lexeme() {
                "||" => BinOp::Or,
                "&&" => BinOp::And,
                "==" => BinOp::Eq,
                "!=" => BinOp::Ne,
                "<" => BinOp::Lt,
                "<=" => BinOp::Le,
                ">" => BinOp::Gt,
                ">=" => BinOp::Ge,
                "+" => BinOp::Add,
                "-" => BinOp::Sub,
                "*" => BinOp::Mul,
                "/" => BinOp::Div,
                "%" => BinOp::Mod,
                _ => break,
            };
            if op.precedence() != min_prec {
                break;
            }
            self.bump();
            let rhs = if min_prec > 6 {
                self.primary()?
            } else {
                self.binary(min_prec + 1)?
            };
            lhs = Expr::Binary {
                id: self.fresh(),
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            };
        }
        Ok(lhs)
    }

    fn int_literal(&mut self, negative: bool) -> Result<Expr, MiniLangError> {
        let t = self.bump();
        let value: i64 = t.lexeme.parse().map_err(|_| MiniLangError::Parse {
            pos: t.span.0,
            expected: "an integer literal in range".to_string(),
            found: format!("{:?}", t.lexeme),
        })?;
        Ok(Expr::IntLit {
            id: self.fresh(),
            value: if negative { -value } else { value },
        })
    }

    fn primary(&mut self) -> Result<Expr, MiniLangError> {
        match self.peek() {
            Some(t) if t.kind == TokenKind::IntLiteral => self.int_literal(false),
            Some(t) if t.kind == TokenKind::BoolLiteral => {
                let t = self.bump();
                Ok(Expr::BoolLit {
                    id: self.fresh(),
                    value: t.lexeme == "true",
                })
            }
            Some(t) if t.lexeme == "-" => {
                self.bump();
                match self.peek() {
                    Some(t) if t.kind == TokenKind::IntLiteral => self.int_literal(true),
                    _ => Err(self.error("an integer literal after unary `-`")),
                }
            }
            Some(t) if t.lexeme == "len" => {
                self.bump();
                let id = self.fresh();
                self.expect("(")?;
                let mut args = vec![self.expr()?];
                while self.at(",") {
                    self.bump();
                    args.push(self.expr()?);
                }
                self.expect(")")?;
                Ok(Expr::Call {
                    id,
                    builtin: Builtin::Len,
                    args,
                })
            }
            Some(t) if t.lexeme == "(" => {
                self.bump();
                let e = self.expr()?;
                self.expect(")")?;
                Ok(e)
            }
            Some(t) if t.kind == TokenKind::Identifier => {
                let name = self.ident("a name")?;
                if self.at("[") {
                    self.bump();
                    let index = self.expr()?;
                    self.expect("]")?;
                    Ok(Expr::Index {
                        id: self.fresh(),
                        base: name,
                        index: Box::new(index),
                    })
                } else {
                    Ok(Expr::Name(name))
                }
            }
            _ => Err(self.error("an expression")),
        }
    }
}

// --- Scope checking ---

struct ScopeChecker {
    /// Every name declared anywhere in the method (uniqueness is method-wide).
    declared: HashSet<String>,
    /// Stack of lexical scopes; a use must resolve through this.
    scopes: Vec<HashSet<String>>,
}

fn check_scopes(ast: &MethodAst) -> Result<(), MiniLangError> {
    let mut ck = ScopeChecker {
        declared: HashSet::new(),
        scopes: vec![HashSet::new()],
    };
    for p in &ast.params {
        ck.declare(&p.name.text)?;
    }
    ck.block(&ast.body)?;
    Ok(())
}

impl ScopeChecker {
    fn declare(&mut self, name: &str) -> Result<(), MiniLangError> {
        if !is_valid_variable_name(name) {
            return Err(MiniLangError::BadVariableName(name.to_string()));
        }
        if !self.declared.insert(name.to_string()) {
            return Err(MiniLangError::Duplicate(name.to_string()));
        }
        self.scopes.last_mut().unwrap().insert(name.to_string());
        Ok(())
    }

    fn resolve(&self, name: &str) -> Result<(), MiniLangError> {
        if self.scopes.iter().any(|s| s.contains(name)) {
            Ok(())
        } else {
            Err(MiniLangError::Undeclared(name.to_string()))
        }
    }

    fn block(&mut self, stmts: &[Stmt]) -> Result<(), MiniLangError> {
        self.scopes.push(HashSet::new());
        for s in stmts {
            self.stmt(s)?;
        }
        self.scopes.pop();
        Ok(())
    }

    fn stmt(&mut self, s: &Stmt) -> Result<(), MiniLangError> {
        match s {
            Stmt::VarDecl(d) => {
                self.expr(&d.init)?;
                self.declare(&d.name.text)
            }
            Stmt::Assign(a) => self.assign(a),
            Stmt::If { cond, then_body, else_body, .. } => {
                self.expr(cond)?;
                self.block(then_body)?;
                if let Some(els) = else_body {
                    self.block(els)?;
                }
                Ok(())
            }
            Stmt::For { init, cond, step, body, .. } => {
                // The init declaration scopes over cond, step, and body.
                self.scopes.push(HashSet::new());
                match init {
                    ForInit::Decl(d) => {
                        self.expr(&d.init)?;
                        self.declare(&d.name.text)?;
                    }
                    ForInit::Assign(a) => self.assign(a)?,
                }
                self.expr(cond)?;
                self.assign(step)?;
                self.block(body)?;
                self.scopes.pop();
                Ok(())
            }
            Stmt::Return { value, .. } => self.expr(value),
        }
    }

    fn assign(&mut self, a: &Assign) -> Result<(), MiniLangError> {
        match &a.target {
            Target::Name(n) => self.resolve(&n.text)?,
            Target::Index { base, index, .. } => {
                self.resolve(&base.text)?;
                self.expr(index)?;
            }
        }
        self.expr(&a.value)
    }

    fn expr(&mut self, e: &Expr) -> Result<(), MiniLangError> {
        match e {
            Expr::IntLit { .. } | Expr::BoolLit { .. } => Ok(()),
            Expr::Name(n) => self.resolve(&n.text),
            Expr::Index { base, index, .. } => {
                self.resolve(&base.text)?;
                self.expr(index)
            }
            Expr::Binary { lhs, rhs, .. } => {
                self.expr(lhs)?;
                self.expr(rhs)
            }
            Expr::Call { args, .. } => {
                for a in args {
                    self.expr(a)?;
                }
                Ok(())
            }
        }
    }
}

// --- Type checking ---

/// Checks the MiniLang typing rules. Assumes scopes already check out
/// (names are method-unique), so a flat name environment suffices.
pub fn typecheck(ast: &MethodAst) -> Result<(), MiniLangError> {
    let mut env = std::collections::HashMap::new();
    for p in &ast.params {
        env.insert(p.name.text.clone(), p.ty);
    }
    collect_decl_types(&ast.body, &mut env);
    for s in &ast.body {
        check_stmt(s, &env, ast.return_type)?;
    }
    Ok(())
}

fn collect_decl_types(stmts: &[Stmt], env: &mut std::collections::HashMap<String, Type>) {
    for s in stmts {
        match s {
            Stmt::VarDecl(d) => {
                env.insert(d.name.text.clone(), d.ty);
            }
            Stmt::If { then_body, else_body, .. } => {
                collect_decl_types(then_body, env);
                if let Some(els) = else_body {
                    collect_decl_types(els, env);
                }
            }
            Stmt::For { init, body, .. } => {
                if let ForInit::Decl(d) = init {
                    env.insert(d.name.text.clone(), d.ty);
                }
                collect_decl_types(body, env);
            }
            _ => {}
        }
    }
}

type TypeEnv = std::collections::HashMap<String, Type>;

fn check_stmt(s: &Stmt, env: &TypeEnv, ret: Type) -> Result<(), MiniLangError> {
    match s {
        Stmt::VarDecl(d) => {
            let t = expr_type(&d.init, env)?;
            expect_type(d.ty, t, "variable initializer")
        }
        Stmt::Assign(a) => check_assign(a, env),
        Stmt::If { cond, then_body, else_body, .. } => {
            expect_type(Type::Bool, expr_type(cond, env)?, "if condition")?;
            for s in then_body {
                check_stmt(s, env, ret)?;
            }
            if let Some(els) = else_body {
                for s in els {
                    check_stmt(s, env, ret)?;
                }
            }
            Ok(())
        }
        Stmt::For { init, cond, step, body, .. } => {
            match init {
                ForInit::Decl(d) => {
                    let t = expr_type(&d.init, env)?;
                    expect_type(d.ty, t, "loop variable initializer")?;
                }
                ForInit::Assign(a) => check_assign(a, env)?,
            }
            expect_type(Type::Bool, expr_type(cond, env)?, "loop condition")?;
            check_assign(step, env)?;
            for s in body {
                check_stmt(s, env, ret)?;
            }
            Ok(())
        }
        Stmt::Return { value, .. } => expect_type(ret, expr_type(value, env)?, "return value"),
    }
}

fn check_assign(a: &Assign, env: &TypeEnv) -> Result<(), MiniLangError> {
    let target_ty = match &a.target {
        Target::Name(n) => *env.get(&n.text).expect("scope-checked"),
        Target::Index { base, index, .. } => {
            expect_type(
                Type::IntArray,
                *env.get(&base.text).expect("scope-checked"),
                "indexed assignment base",
            )?;
            expect_type(Type::Int, expr_type(index, env)?, "array index")?;
            Type::Int
        }
    };
    expect_type(target_ty, expr_type(&a.value, env)?, "assignment value")
}

fn expect_type(want: Type, got: Type, what: &str) -> Result<(), MiniLangError> {
    if want == got {
        Ok(())
    } else {
        Err(MiniLangError::Type(format!(
            "{what}: expected {want}, got {got}"
        )))
    }
}

fn expr_type(e: &Expr, env: &TypeEnv) -> Result<Type, MiniLangError> {
    match e {
        Expr::IntLit { .. } => Ok(Type::Int),
        Expr::BoolLit { .. } => Ok(Type::Bool),
        Expr::Name(n) => Ok(*env.get(&n.text).expect("scope-checked")),
        Expr::Index { base, index, .. } => {
            expect_type(
                Type::IntArray,
                *env.get(&base.text).expect("scope-checked"),
                "index base",
            )?;
            expect_type(Type::Int, expr_type(index, env)?, "array index")?;
            Ok(Type::Int)
        }
        Expr::Binary { op, lhs, rhs, .. } => {
            let lt = expr_type(lhs, env)?;
            let rt = expr_type(rhs, env)?;
            match op {
                BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div | BinOp::Mod => {
                    expect_type(Type::Int, lt, "arithmetic operand")?;
                    expect_type(Type::Int, rt, "arithmetic operand")?;
                    Ok(Type::Int)
                }
                BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
                    expect_type(Type::Int, lt, "comparison operand")?;
                    expect_type(Type::Int, rt, "comparison operand")?;
                    Ok(Type::Bool)
                }
                BinOp::Eq | BinOp::Ne => {
                    if lt != rt || lt == Type::IntArray {
                        return Err(MiniLangError::Type(format!(
                            "equality operands must be both int or both bool, got {lt} and {rt}"
                        )));
                    }
                    Ok(Type::Bool)
                }
                BinOp::And | BinOp::Or => {
                    expect_type(Type::Bool, lt, "logical operand")?;
                    expect_type(Type::Bool, rt, "logical operand")?;
                    Ok(Type::Bool)
                }
            }
        }
        Expr::Call { builtin, args, .. } => match builtin {
            Builtin::Len => {
                if args.len() != 1 {
                    return Err(MiniLangError::Type("len takes exactly one argument".into()));
                }
                expect_type(Type::IntArray, expr_type(&args[0], env)?, "len argument")?;
                Ok(Type::Int)
            }
        },
    }
}
