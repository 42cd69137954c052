//! Tree-walking interpreter with statement coverage.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use crate::ast::*;

/// Steps (statements, loop iterations and calls) one test may take.
pub const DEFAULT_STEP_BUDGET: u64 = 100_000;
/// Maximum Petit call depth before a test errors out.
pub const MAX_CALL_DEPTH: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int(i64),
    Float(f64),
    Bool(bool),
    Str(String),
    Char(char),
    Void,
}

impl Value {
    pub fn ty(&self) -> Type {
        match self {
            Value::Int(_) => Type::Int,
            Value::Float(_) => Type::Float,
            Value::Bool(_) => Type::Bool,
            Value::Str(_) => Type::Str,
            Value::Char(_) => Type::Char,
            Value::Void => Type::Void,
        }
    }

    fn from_literal(lit: &Literal) -> Value {
        match lit {
            Literal::Int(v) => Value::Int(*v),
            Literal::Float(v) => Value::Float(*v),
            Literal::Bool(v) => Value::Bool(*v),
            Literal::Str(v) => Value::Str(v.clone()),
            Literal::Char(v) => Value::Char(*v),
        }
    }

    /// Convert for storage into a slot of type `ty` (int widens to float).
    fn coerce(self, ty: Type) -> RResult<Value> {
        match (ty, self) {
            (Type::Float, Value::Int(v)) => Ok(Value::Float(v as f64)),
            (ty, v) if v.ty() == ty => Ok(v),
            (ty, v) => Err(RuntimeError::Message(format!(
                "expected `{ty}`, found `{}`",
                v.ty()
            ))),
        }
    }

    fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(v) => Some(*v as f64),
            Value::Float(v) => Some(*v),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Float(v) => write!(f, "{v:?}"),
            Value::Bool(v) => write!(f, "{v}"),
            Value::Str(v) => write!(f, "{v:?}"),
            Value::Char(v) => write!(f, "{v:?}"),
            Value::Void => f.write_str("void"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Outcome {
    Pass,
    /// An assertion evaluated to false.
    Fail,
    /// Runtime error, including step-budget or call-depth exhaustion.
    Error,
}

impl Outcome {
    pub fn passed(self) -> bool {
        self == Outcome::Pass
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestResult {
    pub name: String,
    pub outcome: Outcome,
    pub message: Option<String>,
    /// Program statements executed by the test; empty unless tracing.
    pub covered: BTreeSet<StatementId>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CoverageMatrix {
    pub results: Vec<TestResult>,
}

impl CoverageMatrix {
    pub fn all_pass(&self) -> bool {
        self.results.iter().all(|r| r.outcome.passed())
    }

    pub fn failing(&self) -> impl Iterator<Item = &TestResult> {
        self.results.iter().filter(|r| !r.outcome.passed())
    }

    pub fn failing_count(&self) -> usize {
        self.failing().count()
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub trace: bool,
    pub step_budget: u64,
    /// Stop after the first non-passing test (remaining tests are omitted).
    pub stop_on_failure: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            trace: false,
            step_budget: DEFAULT_STEP_BUDGET,
            stop_on_failure: false,
        }
    }
}

#[derive(Debug)]
enum RuntimeError {
    Assertion(String),
    Budget,
    Depth,
    Message(String),
}

type RResult<T> = Result<T, RuntimeError>;

enum Flow {
    Normal,
    Return(Value),
}

type FnRef = (usize, usize, usize);

struct Frame {
    owner: Option<(usize, usize)>,
    scopes: Vec<Vec<(String, Value)>>,
}

impl Frame {
    fn lookup(&self, name: &str) -> Option<&Value> {
        self.scopes
            .iter()
            .rev()
            .find_map(|s| s.iter().rev().find(|(n, _)| n == name))
            .map(|(_, v)| v)
    }

    fn lookup_mut(&mut self, name: &str) -> Option<&mut Value> {
        self.scopes
            .iter_mut()
            .rev()
            .find_map(|s| s.iter_mut().rev().find(|(n, _)| n == name))
            .map(|(_, v)| v)
    }
}

struct Interp<'a> {
    program: &'a Program,
    types: HashMap<&'a str, (usize, usize)>,
    fields: Vec<Vec<Vec<Value>>>,
    steps: u64,
    budget: u64,
    depth: usize,
    trace: bool,
    covered: HashSet<(FnRef, u32)>,
}

impl<'a> Interp<'a> {
    fn new(program: &'a Program, opts: &RunOptions) -> Self {
        let mut types = HashMap::new();
        for (fi, file) in program.files.iter().enumerate() {
            for (ti, ty) in file.types.iter().enumerate() {
                types.insert(ty.name.as_str(), (fi, ti));
            }
        }
        Interp {
            program,
            types,
            fields: Vec::new(),
            steps: 0,
            budget: opts.step_budget,
            depth: 0,
            trace: opts.trace,
            covered: HashSet::new(),
        }
    }

    fn reset(&mut self) {
        self.fields = self
            .program
            .files
            .iter()
            .map(|f| {
                f.types
                    .iter()
                    .map(|t| t.fields.iter().map(|fd| Value::from_literal(&fd.value)).collect())
                    .collect()
            })
            .collect();
        self.steps = 0;
        self.depth = 0;
        self.covered.clear();
    }

    fn step(&mut self) -> RResult<()> {
        self.steps += 1;
        if self.steps > self.budget {
            Err(RuntimeError::Budget)
        } else {
            Ok(())
        }
    }

    fn field_index(&self, owner: (usize, usize), name: &str) -> Option<usize> {
        self.program.files[owner.0].types[owner.1]
            .fields
            .iter()
            .position(|f| f.name == name)
    }

    fn read_var(&self, frame: &Frame, name: &str) -> RResult<Value> {
        if let Some(v) = frame.lookup(name) {
            return Ok(v.clone());
        }
        if let Some(owner) = frame.owner {
            if let Some(i) = self.field_index(owner, name) {
                return Ok(self.fields[owner.0][owner.1][i].clone());
            }
        }
        Err(RuntimeError::Message(format!("unbound variable `{name}`")))
    }

    fn write_var(&mut self, frame: &mut Frame, name: &str, value: Value) -> RResult<()> {
        if let Some(slot) = frame.lookup_mut(name) {
            let ty = slot.ty();
            *slot = value.coerce(ty)?;
            return Ok(());
        }
        if let Some(owner) = frame.owner {
            if let Some(i) = self.field_index(owner, name) {
                let ty = self.program.files[owner.0].types[owner.1].fields[i].ty;
                self.fields[owner.0][owner.1][i] = value.coerce(ty)?;
                return Ok(());
            }
        }
        Err(RuntimeError::Message(format!("unbound variable `{name}`")))
    }

    fn call(
        &mut self,
        frame: &Frame,
        target: &Option<String>,
        name: &str,
        args: Vec<Value>,
    ) -> RResult<Value> {
        let owner = match target {
            Some(t) => *self
                .types
                .get(t.as_str())
                .ok_or_else(|| RuntimeError::Message(format!("unknown type `{t}`")))?,
            None => frame
                .owner
                .ok_or_else(|| RuntimeError::Message(format!("unqualified call `{name}`")))?,
        };
        let decl = &self.program.files[owner.0].types[owner.1];
        let arg_types: Vec<Type> = args.iter().map(Value::ty).collect();
        let candidates = decl
            .fns
            .iter()
            .enumerate()
            .filter(|(_, f)| f.name == name && f.params.len() == args.len());
        let mut widened = None;
        let mut exact = None;
        for (i, f) in candidates {
            if f.param_types() == arg_types {
                exact = Some(i);
                break;
            }
            if widened.is_none() && f.params.iter().zip(&arg_types).all(|(p, a)| p.ty.accepts(*a))
            {
                widened = Some(i);
            }
        }
        let fi = exact.or(widened).ok_or_else(|| {
            RuntimeError::Message(format!("no matching fn `{}.{name}`", decl.name))
        })?;
        let func = &decl.fns[fi];

        self.step()?;
        if self.depth >= MAX_CALL_DEPTH {
            return Err(RuntimeError::Depth);
        }
        let mut params = Vec::with_capacity(args.len());
        for (p, v) in func.params.iter().zip(args) {
            params.push((p.name.clone(), v.coerce(p.ty)?));
        }
        let mut callee = Frame {
            owner: Some(owner),
            scopes: vec![params],
        };
        self.depth += 1;
        let flow = self.block(&mut callee, &func.body, Some((owner.0, owner.1, fi)));
        self.depth -= 1;
        match flow? {
            Flow::Return(v) => v.coerce(func.ret),
            Flow::Normal if func.ret == Type::Void => Ok(Value::Void),
            Flow::Normal => Err(RuntimeError::Message(format!(
                "fn `{}` ended without returning a value",
                func.signature()
            ))),
        }
    }

    fn expr(&mut self, frame: &Frame, e: &Expr) -> RResult<Value> {
        match e {
            Expr::Lit(l) => Ok(Value::from_literal(l)),
            Expr::Var(name) => self.read_var(frame, name),
            Expr::Unary(op, inner) => {
                let v = self.expr(frame, inner)?;
                match (op, v) {
                    (UnOp::Not, Value::Bool(b)) => Ok(Value::Bool(!b)),
                    (UnOp::Neg, Value::Int(i)) => i
                        .checked_neg()
                        .map(Value::Int)
                        .ok_or_else(|| RuntimeError::Message("integer overflow".into())),
                    (UnOp::Neg, Value::Float(x)) => Ok(Value::Float(-x)),
                    (_, v) => Err(RuntimeError::Message(format!(
                        "bad operand `{}` for unary operator",
                        v.ty()
                    ))),
                }
            }
            Expr::Binary(BinOp::And, l, r) => match self.expr(frame, l)? {
                Value::Bool(false) => Ok(Value::Bool(false)),
                Value::Bool(true) => self.bool_operand(frame, r),
                v => Err(RuntimeError::Message(format!("`&&` on `{}`", v.ty()))),
            },
            Expr::Binary(BinOp::Or, l, r) => match self.expr(frame, l)? {
                Value::Bool(true) => Ok(Value::Bool(true)),
                Value::Bool(false) => self.bool_operand(frame, r),
                v => Err(RuntimeError::Message(format!("`||` on `{}`", v.ty()))),
            },
            Expr::Binary(op, l, r) => {
                let lv = self.expr(frame, l)?;
                let rv = self.expr(frame, r)?;
                binary(*op, lv, rv)
            }
            Expr::Call { target, name, args } => {
                let mut values = Vec::with_capacity(args.len());
                for a in args {
                    values.push(self.expr(frame, a)?);
                }
                self.call(frame, target, name, values)
            }
        }
    }

    fn bool_operand(&mut self, frame: &Frame, e: &Expr) -> RResult<Value> {
        match self.expr(frame, e)? {
            Value::Bool(b) => Ok(Value::Bool(b)),
            v => Err(RuntimeError::Message(format!(
                "expected `bool`, found `{}`",
                v.ty()
            ))),
        }
    }

    fn cond(&mut self, frame: &Frame, e: &Expr) -> RResult<bool> {
        match self.expr(frame, e)? {
            Value::Bool(b) => Ok(b),
            v => Err(RuntimeError::Message(format!(
                "condition is `{}`, not `bool`",
                v.ty()
            ))),
        }
    }

    fn block(&mut self, frame: &mut Frame, block: &Block, func: Option<FnRef>) -> RResult<Flow> {
        frame.scopes.push(Vec::new());
        let result = self.block_inner(frame, block, func);
        frame.scopes.pop();
        result
    }

    fn block_inner(
        &mut self,
        frame: &mut Frame,
        block: &Block,
        func: Option<FnRef>,
    ) -> RResult<Flow> {
        for stmt in block {
            if let Flow::Return(v) = self.stmt(frame, stmt, func)? {
                return Ok(Flow::Return(v));
            }
        }
        Ok(Flow::Normal)
    }

    fn stmt(&mut self, frame: &mut Frame, stmt: &Stmt, func: Option<FnRef>) -> RResult<Flow> {
        self.step()?;
        if self.trace {
            if let Some(f) = func {
                self.covered.insert((f, stmt.ord));
            }
        }
        match &stmt.kind {
            StmtKind::Let { name, ty, init } => {
                let v = self.expr(frame, init)?.coerce(*ty)?;
                if let Some(top) = frame.scopes.last_mut() {
                    top.push((name.clone(), v));
                }
            }
            StmtKind::Assign { name, value } => {
                let v = self.expr(frame, value)?;
                self.write_var(frame, name, v)?;
            }
            StmtKind::If {
                cond,
                then_block,
                else_block,
            } => {
                if self.cond(frame, cond)? {
                    return self.block(frame, then_block, func);
                } else if let Some(e) = else_block {
                    return self.block(frame, e, func);
                }
            }
            StmtKind::While { cond, body } => {
                while self.cond(frame, cond)? {
                    self.step()?;
                    if let Flow::Return(v) = self.block(frame, body, func)? {
                        return Ok(Flow::Return(v));
                    }
                }
            }
            StmtKind::Return(value) => {
                let v = match value {
                    Some(e) => self.expr(frame, e)?,
                    None => Value::Void,
                };
                return Ok(Flow::Return(v));
            }
            StmtKind::Expr(e) => {
                self.expr(frame, e)?;
            }
            StmtKind::Assert(e) => {
                if !self.cond(frame, e)? {
                    return Err(RuntimeError::Assertion(crate::render::render_expr(e)));
                }
            }
        }
        Ok(Flow::Normal)
    }

    fn run_test(&mut self, case: &TestCase) -> TestResult {
        self.reset();
        let mut frame = Frame {
            owner: None,
            scopes: Vec::new(),
        };
        let (outcome, message) = match self.block(&mut frame, &case.body, None) {
            Ok(Flow::Normal) => (Outcome::Pass, None),
            Ok(Flow::Return(_)) => (Outcome::Error, Some("`return` in test body".to_string())),
            Err(RuntimeError::Assertion(text)) => {
                (Outcome::Fail, Some(format!("assertion failed: {text}")))
            }
            Err(RuntimeError::Budget) => (
                Outcome::Error,
                Some(format!("step budget of {} exhausted", self.budget)),
            ),
            Err(RuntimeError::Depth) => (
                Outcome::Error,
                Some(format!("call depth limit of {MAX_CALL_DEPTH} exceeded")),
            ),
            Err(RuntimeError::Message(m)) => (Outcome::Error, Some(m)),
        };
        let covered = self
            .covered
            .iter()
            .map(|&((fi, ti, ni), ord)| {
                let file = &self.program.files[fi];
                let ty = &file.types[ti];
                StatementId {
                    file: file.path.clone(),
                    type_name: ty.name.clone(),
                    fn_sig: ty.fns[ni].signature(),
                    index: ord,
                }
            })
            .collect();
        TestResult {
            name: case.name.clone(),
            outcome,
            message,
            covered,
        }
    }
}

fn arith_int(op: BinOp, a: i64, b: i64) -> RResult<Value> {
    let r = match op {
        BinOp::Add => a.checked_add(b),
        BinOp::Sub => a.checked_sub(b),
        BinOp::Mul => a.checked_mul(b),
        BinOp::Div | BinOp::Rem if b == 0 => {
            return Err(RuntimeError::Message("division by zero".into()))
        }
        BinOp::Div => a.checked_div(b),
        BinOp::Rem => a.checked_rem(b),
        _ => unreachable!("non-arithmetic operator"),
    };
    r.map(Value::Int)
        .ok_or_else(|| RuntimeError::Message("integer overflow".into()))
}

fn binary(op: BinOp, lv: Value, rv: Value) -> RResult<Value> {
    use std::cmp::Ordering;
    let mismatch = |lv: &Value, rv: &Value| {
        RuntimeError::Message(format!(
            "operator `{}` cannot combine `{}` and `{}`",
            op.symbol(),
            lv.ty(),
            rv.ty()
        ))
    };
    let ordering = |lv: &Value, rv: &Value| -> RResult<Option<Ordering>> {
        Ok(match (lv, rv) {
            (Value::Int(a), Value::Int(b)) => Some(a.cmp(b)),
            (Value::Str(a), Value::Str(b)) => Some(a.cmp(b)),
            (Value::Char(a), Value::Char(b)) => Some(a.cmp(b)),
            (Value::Bool(a), Value::Bool(b)) => Some(a.cmp(b)),
            _ => match (lv.as_f64(), rv.as_f64()) {
                (Some(a), Some(b)) => a.partial_cmp(&b),
                _ => return Err(mismatch(lv, rv)),
            },
        })
    };
    match op {
        BinOp::Eq | BinOp::Ne => {
            let eq = ordering(&lv, &rv)? == Some(Ordering::Equal);
            Ok(Value::Bool(if op == BinOp::Eq { eq } else { !eq }))
        }
        BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
            if matches!(lv, Value::Bool(_)) {
                return Err(mismatch(&lv, &rv));
            }
            let ord = ordering(&lv, &rv)?;
            Ok(Value::Bool(match ord {
                None => false,
                Some(o) => match op {
                    BinOp::Lt => o == Ordering::Less,
                    BinOp::Le => o != Ordering::Greater,
                    BinOp::Gt => o == Ordering::Greater,
                    _ => o != Ordering::Less,
                },
            }))
        }
        BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div | BinOp::Rem => match (&lv, &rv) {
            (Value::Int(a), Value::Int(b)) => arith_int(op, *a, *b),
            (Value::Str(a), Value::Str(b)) if op == BinOp::Add => Ok(Value::Str(format!("{a}{b}"))),
            _ => match (lv.as_f64(), rv.as_f64()) {
                (Some(a), Some(b)) => Ok(Value::Float(match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                    _ => a % b,
                })),
                _ => Err(mismatch(&lv, &rv)),
            },
        },
        BinOp::And | BinOp::Or => unreachable!("short-circuit operators handled by caller"),
    }
}

/// Run every test. With `trace`, each result lists the statements it executed.
pub fn run_tests(program: &Program, suite: &TestSuite, trace: bool) -> CoverageMatrix {
    run_tests_with(
        program,
        suite,
        &RunOptions {
            trace,
            ..RunOptions::default()
        },
    )
}

pub fn run_tests_with(program: &Program, suite: &TestSuite, opts: &RunOptions) -> CoverageMatrix {
    let mut interp = Interp::new(program, opts);
    let mut results = Vec::with_capacity(suite.tests.len());
    for case in &suite.tests {
        let r = interp.run_test(case);
        let stop = opts.stop_on_failure && !r.outcome.passed();
        results.push(r);
        if stop {
            break;
        }
    }
    CoverageMatrix { results }
}

/// Whether every test passes; stops at the first failure.
pub fn all_tests_pass(program: &Program, suite: &TestSuite) -> bool {
    run_tests_with(
        program,
        suite,
        &RunOptions {
            stop_on_failure: true,
            ..RunOptions::default()
        },
    )
    .all_pass()
}
