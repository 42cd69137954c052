//! Name and type resolution. A program "compiles" when this reports nothing.

use std::collections::{BTreeSet, HashMap};

use crate::ast::*;
use crate::error::CheckError;

struct Checker<'a> {
    types: HashMap<&'a str, &'a TypeDecl>,
    errors: Vec<CheckError>,
}

struct FnScope<'a> {
    location: String,
    /// `None` inside test bodies.
    owner: Option<&'a TypeDecl>,
    ret: Option<Type>,
    /// Parameters and locals, innermost scope last.
    scopes: Vec<Vec<(String, Type)>>,
}

impl FnScope<'_> {
    fn lookup(&self, name: &str) -> Option<Type> {
        for scope in self.scopes.iter().rev() {
            if let Some((_, t)) = scope.iter().rev().find(|(n, _)| n == name) {
                return Some(*t);
            }
        }
        self.owner.and_then(|t| t.field(name)).map(|f| f.ty)
    }

    fn local_bound(&self, name: &str) -> bool {
        self.scopes.iter().any(|s| s.iter().any(|(n, _)| n == name))
    }
}

fn comparable(a: Type, b: Type) -> bool {
    a == b || (a.is_numeric() && b.is_numeric())
}

impl<'a> Checker<'a> {
    fn err(&mut self, scope: &FnScope, message: String) {
        self.errors.push(CheckError {
            location: scope.location.clone(),
            message,
        });
    }

    fn resolve_call(
        &mut self,
        scope: &FnScope<'a>,
        target: &Option<String>,
        name: &str,
        args: &[Option<Type>],
    ) -> Option<Type> {
        let owner = match target {
            Some(t) => match self.types.get(t.as_str()) {
                Some(decl) => *decl,
                None => {
                    self.err(scope, format!("unresolved type `{t}`"));
                    return None;
                }
            },
            None => match scope.owner {
                Some(o) => o,
                None => {
                    self.err(scope, format!("call `{name}` must name its type in a test"));
                    return None;
                }
            },
        };
        if args.iter().any(Option::is_none) {
            return None;
        }
        let args: Vec<Type> = args.iter().flatten().copied().collect();
        let candidates: Vec<&FnDecl> = owner
            .fns
            .iter()
            .filter(|f| f.name == name && f.params.len() == args.len())
            .collect();
        if let Some(exact) = candidates.iter().find(|f| f.param_types() == args) {
            return Some(exact.ret);
        }
        let widened: Vec<&&FnDecl> = candidates
            .iter()
            .filter(|f| f.params.iter().zip(&args).all(|(p, a)| p.ty.accepts(*a)))
            .collect();
        match widened.as_slice() {
            [one] => Some(one.ret),
            [] => {
                let shown: Vec<&str> = args.iter().map(|t| t.name()).collect();
                self.err(
                    scope,
                    format!(
                        "unresolved fn `{}.{name}({})`",
                        owner.name,
                        shown.join(",")
                    ),
                );
                None
            }
            _ => {
                self.err(scope, format!("ambiguous call to `{}.{name}`", owner.name));
                None
            }
        }
    }

    fn expr(&mut self, scope: &FnScope<'a>, e: &Expr) -> Option<Type> {
        let t = self.expr_any(scope, e)?;
        if t == Type::Void {
            self.err(scope, "void value used in an expression".into());
            return None;
        }
        Some(t)
    }

    fn expr_any(&mut self, scope: &FnScope<'a>, e: &Expr) -> Option<Type> {
        match e {
            Expr::Lit(l) => Some(l.ty()),
            Expr::Var(name) => match scope.lookup(name) {
                Some(t) => Some(t),
                None => {
                    self.err(scope, format!("unresolved identifier `{name}`"));
                    None
                }
            },
            Expr::Unary(op, inner) => {
                let t = self.expr(scope, inner)?;
                match op {
                    UnOp::Not if t == Type::Bool => Some(Type::Bool),
                    UnOp::Neg if t.is_numeric() => Some(t),
                    _ => {
                        self.err(scope, format!("bad operand type `{t}` for unary operator"));
                        None
                    }
                }
            }
            Expr::Binary(op, l, r) => {
                let lt = self.expr(scope, l);
                let rt = self.expr(scope, r);
                let (lt, rt) = (lt?, rt?);
                let result = match op {
                    BinOp::Or | BinOp::And => {
                        (lt == Type::Bool && rt == Type::Bool).then_some(Type::Bool)
                    }
                    BinOp::Eq | BinOp::Ne => comparable(lt, rt).then_some(Type::Bool),
                    BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => (comparable(lt, rt)
                        && lt != Type::Bool)
                        .then_some(Type::Bool),
                    BinOp::Add if lt == Type::Str && rt == Type::Str => Some(Type::Str),
                    BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div | BinOp::Rem => {
                        if lt.is_numeric() && rt.is_numeric() {
                            Some(if lt == Type::Float || rt == Type::Float {
                                Type::Float
                            } else {
                                Type::Int
                            })
                        } else {
                            None
                        }
                    }
                };
                if result.is_none() {
                    self.err(
                        scope,
                        format!("operator `{}` cannot combine `{lt}` and `{rt}`", op.symbol()),
                    );
                }
                result
            }
            Expr::Call { target, name, args } => {
                let arg_types: Vec<Option<Type>> =
                    args.iter().map(|a| self.expr(scope, a)).collect();
                self.resolve_call(scope, target, name, &arg_types)
            }
        }
    }

    fn expect_type(&mut self, scope: &FnScope<'a>, want: Type, e: &Expr, what: &str) {
        if let Some(got) = self.expr(scope, e) {
            if !want.accepts(got) {
                self.err(scope, format!("{what} expects `{want}`, found `{got}`"));
            }
        }
    }

    fn block(&mut self, scope: &mut FnScope<'a>, block: &Block) {
        scope.scopes.push(Vec::new());
        for stmt in block {
            self.stmt(scope, stmt);
        }
        scope.scopes.pop();
    }

    fn stmt(&mut self, scope: &mut FnScope<'a>, stmt: &Stmt) {
        match &stmt.kind {
            StmtKind::Let { name, ty, init } => {
                self.expect_type(scope, *ty, init, &format!("`let {name}`"));
                if scope.local_bound(name) {
                    self.err(scope, format!("variable `{name}` is already declared"));
                }
                if let Some(top) = scope.scopes.last_mut() {
                    top.push((name.clone(), *ty));
                }
            }
            StmtKind::Assign { name, value } => match scope.lookup(name) {
                Some(t) => self.expect_type(scope, t, value, &format!("assignment to `{name}`")),
                None => {
                    self.err(scope, format!("unresolved identifier `{name}`"));
                    self.expr(scope, value);
                }
            },
            StmtKind::If {
                cond,
                then_block,
                else_block,
            } => {
                self.expect_type(scope, Type::Bool, cond, "`if` condition");
                self.block(scope, then_block);
                if let Some(e) = else_block {
                    self.block(scope, e);
                }
            }
            StmtKind::While { cond, body } => {
                self.expect_type(scope, Type::Bool, cond, "`while` condition");
                self.block(scope, body);
            }
            StmtKind::Return(value) => match (scope.ret, value) {
                (None, _) => self.err(scope, "`return` is not allowed in a test".into()),
                (Some(Type::Void), None) => {}
                (Some(Type::Void), Some(e)) => {
                    self.expr(scope, e);
                    self.err(scope, "void fn returns a value".into());
                }
                (Some(ret), None) => self.err(scope, format!("missing `{ret}` return value")),
                (Some(ret), Some(e)) => self.expect_type(scope, ret, e, "`return`"),
            },
            StmtKind::Expr(e) => {
                self.expr_any(scope, e);
            }
            StmtKind::Assert(e) => {
                if scope.owner.is_some() {
                    self.err(scope, "`assert` outside a test".into());
                }
                self.expect_type(scope, Type::Bool, e, "`assert`");
            }
        }
    }
}

fn type_table(program: &Program) -> HashMap<&str, &TypeDecl> {
    program
        .files
        .iter()
        .flat_map(|f| &f.types)
        .map(|t| (t.name.as_str(), t))
        .collect()
}

/// Resolve every identifier, call and type in `program`.
pub fn check_program(program: &Program) -> Vec<CheckError> {
    let mut checker = Checker {
        types: type_table(program),
        errors: Vec::new(),
    };
    for file in &program.files {
        for ty in &file.types {
            for field in &ty.fields {
                if field.ty != field.value.ty() && !field.ty.accepts(field.value.ty()) {
                    checker.errors.push(CheckError {
                        location: format!("{}::{}", file.path, ty.name),
                        message: format!(
                            "field `{}` expects `{}`, found `{}`",
                            field.name,
                            field.ty,
                            field.value.ty()
                        ),
                    });
                }
            }
            for func in &ty.fns {
                let mut seen = BTreeSet::new();
                let mut params = Vec::new();
                let location = format!("{}::{}::{}", file.path, ty.name, func.signature());
                for p in &func.params {
                    if !seen.insert(p.name.as_str()) {
                        checker.errors.push(CheckError {
                            location: location.clone(),
                            message: format!("duplicate parameter `{}`", p.name),
                        });
                    }
                    params.push((p.name.clone(), p.ty));
                }
                let mut scope = FnScope {
                    location,
                    owner: Some(ty),
                    ret: Some(func.ret),
                    scopes: vec![params],
                };
                checker.block(&mut scope, &func.body);
            }
        }
    }
    checker.errors
}

/// Resolve the test bodies against `program`.
pub fn check_suite(program: &Program, suite: &TestSuite) -> Vec<CheckError> {
    let mut checker = Checker {
        types: type_table(program),
        errors: Vec::new(),
    };
    for case in &suite.tests {
        let mut scope = FnScope {
            location: format!("test {}", case.name),
            owner: None,
            ret: None,
            scopes: Vec::new(),
        };
        checker.block(&mut scope, &case.body);
    }
    checker.errors
}
