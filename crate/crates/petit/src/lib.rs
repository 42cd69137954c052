//! Petit: a small typed imperative language used as the repair target.
//!
//! A program is a set of files, each holding `type` declarations with
//! constant fields and fns. Test files hold `test NAME { ... }` blocks that
//! call into the program and `assert` on the results.

pub mod ast;
pub mod check;
pub mod error;
pub mod interp;
pub mod lexer;
pub mod parser;
pub mod render;
pub mod scope;

pub use ast::{
    BinOp, Block, Expr, FnDecl, Literal, Param, Program, SourceFile, StatementId, Stmt, StmtKind,
    StmtLoc, StmtTag, TestCase, TestSuite, Type, TypeDecl, UnOp,
};
pub use check::{check_program, check_suite};
pub use error::{CheckError, ParseError, ScopeError};
pub use interp::{all_tests_pass, run_tests, run_tests_with, CoverageMatrix, Outcome, RunOptions};
pub use parser::{parse_expr, parse_file, parse_program, parse_stmt, parse_tests};
pub use render::{render, render_stmt, render_stmt_inline, render_suite};
pub use scope::{scope_at, VariableContext};
