use std::collections::HashSet;
use std::fmt;

use petit::scope::context_at_loc;
use petit::{render, run_tests, BinOp, Expr, Literal, Program, StatementId, Stmt, StmtKind, StmtLoc, TestSuite};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::repair::compiles;
use crate::{Error, Result};

/// Proposals tried per requested mutant before giving up.
pub const PROPOSALS_PER_BUG: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MutationKind {
    WrongVariable,
    WrongOperator,
    WrongConstant,
    DeletedGuard,
}

impl MutationKind {
    pub const ALL: [MutationKind; 4] = [
        MutationKind::WrongVariable,
        MutationKind::WrongOperator,
        MutationKind::WrongConstant,
        MutationKind::DeletedGuard,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MutationKind::WrongVariable => "wrong-variable",
            MutationKind::WrongOperator => "wrong-operator",
            MutationKind::WrongConstant => "wrong-constant",
            MutationKind::DeletedGuard => "deleted-guard",
        }
    }
}

impl fmt::Display for MutationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeededBug {
    pub id: String,
    pub kind: MutationKind,
    /// Mutated statement, as identified in the base program.
    pub location: StatementId,
    pub loc: StmtLoc,
    pub original: Stmt,
    /// `None` when the statement was deleted.
    pub replacement: Option<Stmt>,
    pub program: Program,
    /// Names of the tests the mutant fails, in suite order.
    pub failing: Vec<String>,
}

impl SeededBug {
    /// Apply the inverse edit to the mutant.
    pub fn restore(&self) -> Program {
        let mut p = self.program.clone();
        let block = p.block_mut(&self.loc);
        match self.replacement {
            Some(_) => block[self.loc.index] = self.original.clone(),
            None => block.insert(self.loc.index, self.original.clone()),
        }
        p.renumber();
        p
    }

    pub fn describe(&self) -> String {
        let after = self
            .replacement
            .as_ref()
            .map_or_else(|| "(deleted)".to_string(), petit::render_stmt_inline);
        format!(
            "{} at {}: {} => {}",
            self.kind,
            self.location,
            petit::render_stmt_inline(&self.original),
            after
        )
    }
}

fn own_exprs(stmt: &mut Stmt) -> Vec<&mut Expr> {
    match &mut stmt.kind {
        StmtKind::Let { init, .. } => vec![init],
        StmtKind::Assign { value, .. } => vec![value],
        StmtKind::If { cond, .. } | StmtKind::While { cond, .. } => vec![cond],
        StmtKind::Return(Some(e)) | StmtKind::Expr(e) | StmtKind::Assert(e) => vec![e],
        StmtKind::Return(None) => Vec::new(),
    }
}

/// Preorder visit of every node of `e`.
fn visit(e: &mut Expr, f: &mut dyn FnMut(&mut Expr)) {
    f(e);
    match e {
        Expr::Unary(_, inner) => visit(inner, f),
        Expr::Binary(_, l, r) => {
            visit(l, f);
            visit(r, f);
        }
        Expr::Call { args, .. } => args.iter_mut().for_each(|a| visit(a, f)),
        Expr::Lit(_) | Expr::Var(_) => {}
    }
}

/// Rewrite the `pick`-th node accepted by `site` (counted over all own
/// expressions in preorder) with `edit`. Returns the number of sites.
fn edit_site(
    stmt: &mut Stmt,
    site: &dyn Fn(&Expr) -> bool,
    pick: Option<usize>,
    edit: &mut dyn FnMut(&mut Expr),
) -> usize {
    let mut seen = 0;
    for root in own_exprs(stmt) {
        visit(root, &mut |e| {
            if site(e) {
                if pick == Some(seen) {
                    edit(e);
                }
                seen += 1;
            }
        });
    }
    seen
}

fn swapped(op: BinOp) -> BinOp {
    match op {
        BinOp::Add => BinOp::Sub,
        BinOp::Sub => BinOp::Add,
        BinOp::Mul => BinOp::Div,
        BinOp::Div => BinOp::Mul,
        BinOp::Rem => BinOp::Div,
        BinOp::Lt => BinOp::Le,
        BinOp::Le => BinOp::Lt,
        BinOp::Gt => BinOp::Ge,
        BinOp::Ge => BinOp::Gt,
        BinOp::Eq => BinOp::Ne,
        BinOp::Ne => BinOp::Eq,
        BinOp::And => BinOp::Or,
        BinOp::Or => BinOp::And,
    }
}

/// One random single-edit proposal of `kind` at `loc`, or `None` when the
/// statement offers no site for that kind.
fn propose(program: &Program, loc: &StmtLoc, kind: MutationKind, rng: &mut ChaCha8Rng) -> Option<Option<Stmt>> {
    let original = program.stmt(loc);
    let mut stmt = original.clone();
    match kind {
        MutationKind::DeletedGuard => {
            return matches!(original.kind, StmtKind::If { else_block: None, .. }).then_some(None);
        }
        MutationKind::WrongVariable => {
            let ctx = context_at_loc(program, loc);
            let is_var = |e: &Expr| matches!(e, Expr::Var(_));
            let n = edit_site(&mut stmt, &is_var, None, &mut |_| {});
            if n == 0 {
                return None;
            }
            let pick = rng.gen_range(0..n);
            let mut ok = false;
            edit_site(&mut stmt, &is_var, Some(pick), &mut |e| {
                let Expr::Var(name) = e else { return };
                let Some(ty) = ctx.get(name) else { return };
                let others: Vec<&str> = ctx.iter().filter(|&(n, t)| t == ty && n != name).map(|(n, _)| n).collect();
                if let Some(&other) = others.choose(rng) {
                    *name = other.to_string();
                    ok = true;
                }
            });
            if !ok {
                return None;
            }
        }
        MutationKind::WrongOperator => {
            let is_bin = |e: &Expr| matches!(e, Expr::Binary(..));
            let n = edit_site(&mut stmt, &is_bin, None, &mut |_| {});
            if n == 0 {
                return None;
            }
            let pick = rng.gen_range(0..n);
            edit_site(&mut stmt, &is_bin, Some(pick), &mut |e| {
                if let Expr::Binary(op, _, _) = e {
                    *op = swapped(*op);
                }
            });
        }
        MutationKind::WrongConstant => {
            let is_num = |e: &Expr| matches!(e, Expr::Lit(Literal::Int(_) | Literal::Float(_) | Literal::Bool(_)));
            let n = edit_site(&mut stmt, &is_num, None, &mut |_| {});
            if n == 0 {
                return None;
            }
            let pick = rng.gen_range(0..n);
            let up = rng.gen_bool(0.5);
            edit_site(&mut stmt, &is_num, Some(pick), &mut |e| match e {
                Expr::Lit(Literal::Int(v)) => *v = if up { v.saturating_add(1) } else { v.saturating_sub(1) },
                Expr::Lit(Literal::Float(v)) => *v = if up { *v + 1.0 } else { *v - 1.0 },
                Expr::Lit(Literal::Bool(b)) => *b = !*b,
                _ => {}
            });
        }
    }
    (stmt != *original).then_some(Some(stmt))
}

/// `n` distinct single-edit mutants of `program`, each compiling and failing
/// at least one test of `suite`. Deterministic for a given `seed`.
pub fn seed_bugs(program: &Program, suite: &TestSuite, seed: u64, n: usize) -> Result<Vec<SeededBug>> {
    if !run_tests(program, suite, false).all_pass() {
        return Err(Error::Config("bug seeding needs a base project whose tests all pass".into()));
    }
    let statements = program.statements();
    let mut bugs: Vec<SeededBug> = Vec::with_capacity(n);
    if statements.is_empty() {
        return if n == 0 { Ok(bugs) } else { Err(Error::NotEnoughMutants { found: 0, wanted: n }) };
    }
    let base_text = render(program);
    let mut seen: HashSet<Vec<(String, String)>> = HashSet::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..n * PROPOSALS_PER_BUG {
        if bugs.len() == n {
            break;
        }
        let kind = MutationKind::ALL[rng.gen_range(0..MutationKind::ALL.len())];
        let (sid, loc) = &statements[rng.gen_range(0..statements.len())];
        let Some(replacement) = propose(program, loc, kind, &mut rng) else {
            continue;
        };
        let mut mutant = program.clone();
        let block = mutant.block_mut(loc);
        match &replacement {
            Some(stmt) => block[loc.index] = stmt.clone(),
            None => {
                block.remove(loc.index);
            }
        }
        mutant.renumber();
        let text = render(&mutant);
        if text == base_text || !seen.insert(text.into_iter().collect()) {
            continue;
        }
        let Some(mutant) = compiles(&mutant, suite) else {
            continue;
        };
        let failing: Vec<String> = run_tests(&mutant, suite, false).failing().map(|r| r.name.clone()).collect();
        if failing.is_empty() {
            continue;
        }
        bugs.push(SeededBug {
            id: format!("bug{:02}-{}", bugs.len() + 1, kind),
            kind,
            location: sid.clone(),
            loc: loc.clone(),
            original: program.stmt(loc).clone(),
            replacement,
            program: mutant,
            failing,
        });
    }
    if bugs.len() < n {
        return Err(Error::NotEnoughMutants { found: bugs.len(), wanted: n });
    }
    Ok(bugs)
}
