//! Variable contexts at statements and free-variable bookkeeping.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::ast::*;
use crate::error::ScopeError;

/// Variables visible at a statement: fields of the enclosing type, then fn
/// parameters, then `let` bindings that precede the statement in enclosing
/// blocks. Inner bindings shadow outer ones.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct VariableContext {
    pub vars: BTreeMap<String, Type>,
}

impl VariableContext {
    pub fn get(&self, name: &str) -> Option<Type> {
        self.vars.get(name).copied()
    }

    pub fn contains(&self, name: &str, ty: Type) -> bool {
        self.get(name) == Some(ty)
    }

    pub fn insert(&mut self, name: impl Into<String>, ty: Type) {
        self.vars.insert(name.into(), ty);
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Type)> {
        self.vars.iter().map(|(n, t)| (n.as_str(), *t))
    }

    /// Whether `self` holds every binding of `other` with the same type.
    pub fn is_superset_of(&self, other: &VariableContext) -> bool {
        other.iter().all(|(n, t)| self.contains(n, t))
    }
}

impl FromIterator<(String, Type)> for VariableContext {
    fn from_iter<I: IntoIterator<Item = (String, Type)>>(iter: I) -> Self {
        VariableContext {
            vars: iter.into_iter().collect(),
        }
    }
}

fn add_lets(block: &[Stmt], ctx: &mut VariableContext) {
    for stmt in block {
        if let StmtKind::Let { name, ty, .. } = &stmt.kind {
            ctx.insert(name.clone(), *ty);
        }
    }
}

/// Context of the statement at `loc`.
pub fn context_at_loc(program: &Program, loc: &StmtLoc) -> VariableContext {
    let ty = program.type_decl(loc);
    let func = program.func(loc);
    let mut ctx = VariableContext::default();
    for field in &ty.fields {
        ctx.insert(field.name.clone(), field.ty);
    }
    for p in &func.params {
        ctx.insert(p.name.clone(), p.ty);
    }
    let mut block = &func.body;
    for &(i, which) in &loc.path {
        add_lets(&block[..i], &mut ctx);
        block = block[i].blocks()[which];
    }
    add_lets(&block[..loc.index], &mut ctx);
    ctx
}

pub fn scope_at(program: &Program, sid: &StatementId) -> Result<VariableContext, ScopeError> {
    let loc = program
        .locate(sid)
        .ok_or_else(|| ScopeError::UnknownStatement(sid.to_string()))?;
    Ok(context_at_loc(program, &loc))
}

struct FreeVars {
    scopes: Vec<BTreeSet<String>>,
    seen: BTreeSet<String>,
    order: Vec<String>,
}

impl FreeVars {
    fn bound(&self, name: &str) -> bool {
        self.scopes.iter().any(|s| s.contains(name))
    }

    fn reference(&mut self, name: &str) {
        if !self.bound(name) && self.seen.insert(name.to_string()) {
            self.order.push(name.to_string());
        }
    }

    fn expr(&mut self, e: &Expr) {
        match e {
            Expr::Lit(_) => {}
            Expr::Var(name) => self.reference(name),
            Expr::Unary(_, inner) => self.expr(inner),
            Expr::Binary(_, l, r) => {
                self.expr(l);
                self.expr(r);
            }
            Expr::Call { args, .. } => args.iter().for_each(|a| self.expr(a)),
        }
    }

    fn block(&mut self, block: &Block) {
        self.scopes.push(BTreeSet::new());
        for stmt in block {
            self.stmt(stmt);
        }
        self.scopes.pop();
    }

    fn stmt(&mut self, stmt: &Stmt) {
        match &stmt.kind {
            StmtKind::Let { name, init, .. } => {
                self.expr(init);
                if let Some(top) = self.scopes.last_mut() {
                    top.insert(name.clone());
                }
            }
            StmtKind::Assign { name, value } => {
                self.reference(name);
                self.expr(value);
            }
            StmtKind::If {
                cond,
                then_block,
                else_block,
            } => {
                self.expr(cond);
                self.block(then_block);
                if let Some(e) = else_block {
                    self.block(e);
                }
            }
            StmtKind::While { cond, body } => {
                self.expr(cond);
                self.block(body);
            }
            StmtKind::Return(e) => {
                if let Some(e) = e {
                    self.expr(e);
                }
            }
            StmtKind::Expr(e) | StmtKind::Assert(e) => self.expr(e),
        }
    }
}

/// Names referenced by `stmt` that are not bound inside it, in order of first use.
///
/// A top-level `let` binds nothing for the statement itself; only its
/// initializer is inspected.
pub fn free_variables(stmt: &Stmt) -> Vec<String> {
    let mut fv = FreeVars {
        scopes: vec![BTreeSet::new()],
        seen: BTreeSet::new(),
        order: Vec::new(),
    };
    fv.stmt(stmt);
    fv.order
}

/// Every name bound by a `let` anywhere inside `stmt`, including `stmt` itself.
pub fn bound_names(stmt: &Stmt) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    visit_block(&vec![stmt.clone()], &mut Vec::new(), &mut |_, _, s| {
        if let StmtKind::Let { name, .. } = &s.kind {
            out.insert(name.clone());
        }
    });
    out
}

struct Renamer<'a> {
    map: &'a HashMap<String, String>,
    scopes: Vec<BTreeSet<String>>,
}

impl Renamer<'_> {
    fn name(&self, name: &mut String) {
        if self.scopes.iter().any(|s| s.contains(name.as_str())) {
            return;
        }
        if let Some(new) = self.map.get(name.as_str()) {
            *name = new.clone();
        }
    }

    fn expr(&self, e: &mut Expr) {
        match e {
            Expr::Lit(_) => {}
            Expr::Var(name) => self.name(name),
            Expr::Unary(_, inner) => self.expr(inner),
            Expr::Binary(_, l, r) => {
                self.expr(l);
                self.expr(r);
            }
            Expr::Call { args, .. } => args.iter_mut().for_each(|a| self.expr(a)),
        }
    }

    fn block(&mut self, block: &mut Block) {
        self.scopes.push(BTreeSet::new());
        for stmt in block.iter_mut() {
            self.stmt(stmt);
        }
        self.scopes.pop();
    }

    fn stmt(&mut self, stmt: &mut Stmt) {
        match &mut stmt.kind {
            StmtKind::Let { name, init, .. } => {
                self.expr(init);
                if let Some(top) = self.scopes.last_mut() {
                    top.insert(name.clone());
                }
            }
            StmtKind::Assign { name, value } => {
                self.name(name);
                self.expr(value);
            }
            StmtKind::If {
                cond,
                then_block,
                else_block,
            } => {
                self.expr(cond);
                self.block(then_block);
                if let Some(e) = else_block {
                    self.block(e);
                }
            }
            StmtKind::While { cond, body } => {
                self.expr(cond);
                self.block(body);
            }
            StmtKind::Return(e) => {
                if let Some(e) = e {
                    self.expr(e);
                }
            }
            StmtKind::Expr(e) | StmtKind::Assert(e) => self.expr(e),
        }
    }
}

/// Rename free occurrences of variables according to `map`; bound ones are untouched.
pub fn rename_free(stmt: &Stmt, map: &HashMap<String, String>) -> Stmt {
    let mut out = stmt.clone();
    let mut renamer = Renamer {
        map,
        scopes: vec![BTreeSet::new()],
    };
    renamer.stmt(&mut out);
    out
}
