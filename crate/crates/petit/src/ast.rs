//! Syntax tree for Petit programs and test suites.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Type {
    Int,
    Float,
    Bool,
    Str,
    Char,
    Void,
}

impl Type {
    pub fn name(self) -> &'static str {
        match self {
            Type::Int => "int",
            Type::Float => "float",
            Type::Bool => "bool",
            Type::Str => "str",
            Type::Char => "char",
            Type::Void => "void",
        }
    }

    pub fn from_name(name: &str) -> Option<Type> {
        Some(match name {
            "int" => Type::Int,
            "float" => Type::Float,
            "bool" => Type::Bool,
            "str" => Type::Str,
            "char" => Type::Char,
            "void" => Type::Void,
            _ => return None,
        })
    }

    pub fn is_numeric(self) -> bool {
        matches!(self, Type::Int | Type::Float)
    }

    /// Whether a value of type `from` may be stored where `self` is expected.
    pub fn accepts(self, from: Type) -> bool {
        self == from || (self == Type::Float && from == Type::Int)
    }
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Literal {
    Int(i64),
    Float(f64),
    Bool(bool),
    Str(String),
    Char(char),
}

impl Literal {
    pub fn ty(&self) -> Type {
        match self {
            Literal::Int(_) => Type::Int,
            Literal::Float(_) => Type::Float,
            Literal::Bool(_) => Type::Bool,
            Literal::Str(_) => Type::Str,
            Literal::Char(_) => Type::Char,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnOp {
    Not,
    Neg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Or,
    And,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Add,
    Sub,
    Mul,
    Div,
    Rem,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Or => "||",
            BinOp::And => "&&",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Rem => "%",
        }
    }

    /// Binding strength; higher binds tighter. All levels are left-associative.
    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne => 3,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 4,
            BinOp::Add | BinOp::Sub => 5,
            BinOp::Mul | BinOp::Div | BinOp::Rem => 6,
        }
    }

    pub const ALL: [BinOp; 13] = [
        BinOp::Or,
        BinOp::And,
        BinOp::Eq,
        BinOp::Ne,
        BinOp::Lt,
        BinOp::Le,
        BinOp::Gt,
        BinOp::Ge,
        BinOp::Add,
        BinOp::Sub,
        BinOp::Mul,
        BinOp::Div,
        BinOp::Rem,
    ];
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Lit(Literal),
    Var(String),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    /// `f(args)` when `target` is `None`, `T.f(args)` otherwise.
    Call {
        target: Option<String>,
        name: String,
        args: Vec<Expr>,
    },
}

impl Expr {
    pub fn var(name: &str) -> Expr {
        Expr::Var(name.to_string())
    }

    pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary(op, Box::new(lhs), Box::new(rhs))
    }
}

pub type Block = Vec<Stmt>;

/// A statement plus its preorder index inside the enclosing fn.
///
/// Equality and hashing ignore `ord`; it is bookkeeping reassigned by
/// [`renumber_block`] after every structural edit.
#[derive(Debug, Clone)]
pub struct Stmt {
    pub kind: StmtKind,
    pub ord: u32,
}

impl PartialEq for Stmt {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

impl Stmt {
    pub fn new(kind: StmtKind) -> Stmt {
        Stmt { kind, ord: 0 }
    }

    pub fn tag(&self) -> StmtTag {
        self.kind.tag()
    }

    /// Child blocks in preorder visiting order.
    pub fn blocks(&self) -> Vec<&Block> {
        match &self.kind {
            StmtKind::If {
                then_block,
                else_block,
                ..
            } => {
                let mut out = vec![then_block];
                if let Some(e) = else_block {
                    out.push(e);
                }
                out
            }
            StmtKind::While { body, .. } => vec![body],
            _ => Vec::new(),
        }
    }

    pub fn block_mut(&mut self, which: usize) -> Option<&mut Block> {
        match &mut self.kind {
            StmtKind::If {
                then_block,
                else_block,
                ..
            } => match which {
                0 => Some(then_block),
                1 => else_block.as_mut(),
                _ => None,
            },
            StmtKind::While { body, .. } if which == 0 => Some(body),
            _ => None,
        }
    }

    /// Number of statements in this subtree, counting `self`.
    pub fn size(&self) -> usize {
        1 + self
            .blocks()
            .iter()
            .map(|b| b.iter().map(Stmt::size).sum::<usize>())
            .sum::<usize>()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StmtKind {
    Let { name: String, ty: Type, init: Expr },
    Assign { name: String, value: Expr },
    If {
        cond: Expr,
        then_block: Block,
        else_block: Option<Block>,
    },
    While { cond: Expr, body: Block },
    Return(Option<Expr>),
    /// Expression statement; the grammar only admits calls here.
    Expr(Expr),
    /// Only legal inside test bodies.
    Assert(Expr),
}

impl StmtKind {
    pub fn tag(&self) -> StmtTag {
        match self {
            StmtKind::Let { .. } => StmtTag::Let,
            StmtKind::Assign { .. } => StmtTag::Assign,
            StmtKind::If { .. } => StmtTag::If,
            StmtKind::While { .. } => StmtTag::While,
            StmtKind::Return(_) => StmtTag::Return,
            StmtKind::Expr(_) => StmtTag::Call,
            StmtKind::Assert(_) => StmtTag::Assert,
        }
    }
}

/// Statement kind, used by replacement to require like-for-like edits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StmtTag {
    Let,
    Assign,
    If,
    While,
    Return,
    Call,
    Assert,
}

impl fmt::Display for StmtTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            StmtTag::Let => "let",
            StmtTag::Assign => "assign",
            StmtTag::If => "if",
            StmtTag::While => "while",
            StmtTag::Return => "return",
            StmtTag::Call => "call",
            StmtTag::Assert => "assert",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub ty: Type,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FnDecl {
    pub name: String,
    pub params: Vec<Param>,
    pub ret: Type,
    pub body: Block,
}

impl FnDecl {
    pub fn param_types(&self) -> Vec<Type> {
        self.params.iter().map(|p| p.ty).collect()
    }

    /// `name(t1,t2)->ret`, the executable part of corpus keys and statement ids.
    pub fn signature(&self) -> String {
        let params: Vec<&str> = self.params.iter().map(|p| p.ty.name()).collect();
        format!("{}({})->{}", self.name, params.join(","), self.ret)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub name: String,
    pub ty: Type,
    pub value: Literal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TypeDecl {
    pub name: String,
    pub fields: Vec<Field>,
    pub fns: Vec<FnDecl>,
}

impl TypeDecl {
    pub fn field(&self, name: &str) -> Option<&Field> {
        self.fields.iter().find(|f| f.name == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceFile {
    /// Path relative to the source root, `/`-separated.
    pub path: String,
    pub types: Vec<TypeDecl>,
}

impl SourceFile {
    /// Top-level directory of the path; files at the root belong to `""`.
    pub fn package(&self) -> &str {
        package_of(&self.path)
    }
}

pub fn package_of(path: &str) -> &str {
    match path.split_once('/') {
        Some((dir, _)) => dir,
        None => "",
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Program {
    /// Sorted by path.
    pub files: Vec<SourceFile>,
}

/// Stable identity of a program statement.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StatementId {
    pub file: String,
    pub type_name: String,
    pub fn_sig: String,
    /// Preorder index within the fn body.
    pub index: u32,
}

impl StatementId {
    /// Key of the enclosing executable, `path::Type::sig`.
    pub fn exec_key(&self) -> String {
        format!("{}::{}::{}", self.file, self.type_name, self.fn_sig)
    }

    /// Key of the enclosing type, `path::Type`.
    pub fn type_key(&self) -> String {
        format!("{}::{}", self.file, self.type_name)
    }
}

impl fmt::Display for StatementId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}::{}::{}#{}",
            self.file, self.type_name, self.fn_sig, self.index
        )
    }
}

impl std::str::FromStr for StatementId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || format!("malformed statement id `{s}`");
        let (rest, index) = s.rsplit_once('#').ok_or_else(bad)?;
        let index = index.parse().map_err(|_| bad())?;
        let mut parts = rest.splitn(3, "::");
        let (Some(file), Some(type_name), Some(fn_sig)) = (parts.next(), parts.next(), parts.next())
        else {
            return Err(bad());
        };
        Ok(StatementId {
            file: file.to_string(),
            type_name: type_name.to_string(),
            fn_sig: fn_sig.to_string(),
            index,
        })
    }
}

/// Position of a statement inside a [`Program`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StmtLoc {
    pub file: usize,
    pub ty: usize,
    pub func: usize,
    /// Enclosing compound statements: (index in block, child block number).
    pub path: Vec<(usize, usize)>,
    pub index: usize,
}

/// Assign preorder indices to every statement of a fn body.
pub fn renumber_block(block: &mut Block) {
    fn walk(block: &mut Block, next: &mut u32) {
        for stmt in block.iter_mut() {
            stmt.ord = *next;
            *next += 1;
            let mut which = 0;
            while let Some(child) = stmt.block_mut(which) {
                walk(child, next);
                which += 1;
            }
        }
    }
    let mut next = 0;
    walk(block, &mut next);
}

/// Visit each statement of `block` in preorder along with its path.
pub fn visit_block<'a>(
    block: &'a Block,
    prefix: &mut Vec<(usize, usize)>,
    f: &mut dyn FnMut(&[(usize, usize)], usize, &'a Stmt),
) {
    for (i, stmt) in block.iter().enumerate() {
        f(prefix, i, stmt);
        for (which, child) in stmt.blocks().into_iter().enumerate() {
            prefix.push((i, which));
            visit_block(child, prefix, f);
            prefix.pop();
        }
    }
}

impl Program {
    pub fn type_count(&self) -> usize {
        self.files.iter().map(|f| f.types.len()).sum()
    }

    pub fn fn_count(&self) -> usize {
        self.files
            .iter()
            .flat_map(|f| &f.types)
            .map(|t| t.fns.len())
            .sum()
    }

    pub fn renumber(&mut self) {
        for file in &mut self.files {
            for ty in &mut file.types {
                for func in &mut ty.fns {
                    renumber_block(&mut func.body);
                }
            }
        }
    }

    /// Find a type by name along with its (file, type) indices.
    pub fn find_type(&self, name: &str) -> Option<(usize, usize, &TypeDecl)> {
        self.files.iter().enumerate().find_map(|(fi, file)| {
            file.types
                .iter()
                .enumerate()
                .find(|(_, t)| t.name == name)
                .map(|(ti, t)| (fi, ti, t))
        })
    }

    /// Every statement, in file / type / fn / preorder order.
    pub fn statements(&self) -> Vec<(StatementId, StmtLoc)> {
        let mut out = Vec::new();
        for (fi, file) in self.files.iter().enumerate() {
            for (ti, ty) in file.types.iter().enumerate() {
                for (ni, func) in ty.fns.iter().enumerate() {
                    let sig = func.signature();
                    visit_block(&func.body, &mut Vec::new(), &mut |path, index, stmt| {
                        out.push((
                            StatementId {
                                file: file.path.clone(),
                                type_name: ty.name.clone(),
                                fn_sig: sig.clone(),
                                index: stmt.ord,
                            },
                            StmtLoc {
                                file: fi,
                                ty: ti,
                                func: ni,
                                path: path.to_vec(),
                                index,
                            },
                        ))
                    });
                }
            }
        }
        out
    }

    pub fn locate(&self, sid: &StatementId) -> Option<StmtLoc> {
        let (fi, file) = self
            .files
            .iter()
            .enumerate()
            .find(|(_, f)| f.path == sid.file)?;
        let (ti, ty) = file
            .types
            .iter()
            .enumerate()
            .find(|(_, t)| t.name == sid.type_name)?;
        let (ni, func) = ty
            .fns
            .iter()
            .enumerate()
            .find(|(_, f)| f.signature() == sid.fn_sig)?;
        let mut found = None;
        visit_block(&func.body, &mut Vec::new(), &mut |path, index, stmt| {
            if stmt.ord == sid.index && found.is_none() {
                found = Some(StmtLoc {
                    file: fi,
                    ty: ti,
                    func: ni,
                    path: path.to_vec(),
                    index,
                });
            }
        });
        found
    }

    pub fn func(&self, loc: &StmtLoc) -> &FnDecl {
        &self.files[loc.file].types[loc.ty].fns[loc.func]
    }

    pub fn type_decl(&self, loc: &StmtLoc) -> &TypeDecl {
        &self.files[loc.file].types[loc.ty]
    }

    /// The block holding the statement at `loc`.
    pub fn block(&self, loc: &StmtLoc) -> &Block {
        let mut block = &self.func(loc).body;
        for &(i, which) in &loc.path {
            block = block[i].blocks()[which];
        }
        block
    }

    pub fn block_mut(&mut self, loc: &StmtLoc) -> &mut Block {
        let mut block = &mut self.files[loc.file].types[loc.ty].fns[loc.func].body;
        for &(i, which) in &loc.path {
            block = block[i]
                .block_mut(which)
                .expect("statement location refers to a missing block");
        }
        block
    }

    pub fn stmt(&self, loc: &StmtLoc) -> &Stmt {
        &self.block(loc)[loc.index]
    }

    pub fn statement_id(&self, loc: &StmtLoc) -> StatementId {
        let file = &self.files[loc.file];
        let ty = &file.types[loc.ty];
        StatementId {
            file: file.path.clone(),
            type_name: ty.name.clone(),
            fn_sig: ty.fns[loc.func].signature(),
            index: self.stmt(loc).ord,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestCase {
    pub name: String,
    pub file: String,
    pub body: Block,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TestSuite {
    pub tests: Vec<TestCase>,
}
