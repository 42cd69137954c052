//! Canonical pretty-printer. `parse(render(p))` is structurally equal to `p`.

use std::collections::BTreeMap;
use std::fmt::Write;

use crate::ast::*;

const INDENT: &str = "    ";

fn escape(c: char, quote: char, out: &mut String) {
    match c {
        '\n' => out.push_str("\\n"),
        '\t' => out.push_str("\\t"),
        '\r' => out.push_str("\\r"),
        '\0' => out.push_str("\\0"),
        '\\' => out.push_str("\\\\"),
        c if c == quote => {
            out.push('\\');
            out.push(c);
        }
        c => out.push(c),
    }
}

fn float_text(v: f64) -> String {
    // `{:?}` is the shortest round-tripping spelling and always marks floats
    // with a `.` or an exponent.
    format!("{v:?}")
}

pub fn render_literal(lit: &Literal) -> String {
    match lit {
        Literal::Int(v) if *v < 0 => format!("-{}", v.unsigned_abs()),
        Literal::Int(v) => v.to_string(),
        Literal::Float(v) if v.is_sign_negative() && *v != 0.0 => format!("-{}", float_text(-v)),
        Literal::Float(v) => float_text(*v),
        Literal::Bool(b) => b.to_string(),
        Literal::Str(s) => {
            let mut out = String::from("\"");
            for c in s.chars() {
                escape(c, '"', &mut out);
            }
            out.push('"');
            out
        }
        Literal::Char(c) => {
            let mut out = String::from("'");
            escape(*c, '\'', &mut out);
            out.push('\'');
            out
        }
    }
}

fn expr_prec(e: &Expr) -> u8 {
    match e {
        Expr::Binary(op, _, _) => op.precedence(),
        Expr::Unary(..) => 7,
        Expr::Lit(Literal::Int(v)) if *v < 0 => 7,
        Expr::Lit(Literal::Float(v)) if v.is_sign_negative() && *v != 0.0 => 7,
        _ => 8,
    }
}

fn write_expr(e: &Expr, out: &mut String) {
    match e {
        Expr::Lit(lit) => out.push_str(&render_literal(lit)),
        Expr::Var(name) => out.push_str(name),
        Expr::Unary(op, inner) => {
            out.push_str(match op {
                UnOp::Not => "!",
                UnOp::Neg => "-",
            });
            wrap(inner, expr_prec(inner) < 7, out);
        }
        Expr::Binary(op, lhs, rhs) => {
            let p = op.precedence();
            wrap(lhs, expr_prec(lhs) < p, out);
            out.push(' ');
            out.push_str(op.symbol());
            out.push(' ');
            wrap(rhs, expr_prec(rhs) <= p, out);
        }
        Expr::Call { target, name, args } => {
            if let Some(t) = target {
                out.push_str(t);
                out.push('.');
            }
            out.push_str(name);
            out.push('(');
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_expr(a, out);
            }
            out.push(')');
        }
    }
}

fn wrap(e: &Expr, parens: bool, out: &mut String) {
    if parens {
        out.push('(');
        write_expr(e, out);
        out.push(')');
    } else {
        write_expr(e, out);
    }
}

pub fn render_expr(e: &Expr) -> String {
    let mut out = String::new();
    write_expr(e, &mut out);
    out
}

fn write_block(block: &Block, depth: usize, out: &mut String) {
    out.push_str("{\n");
    for stmt in block {
        write_stmt(stmt, depth + 1, out);
    }
    out.push_str(&INDENT.repeat(depth));
    out.push('}');
}

fn write_stmt(stmt: &Stmt, depth: usize, out: &mut String) {
    out.push_str(&INDENT.repeat(depth));
    match &stmt.kind {
        StmtKind::Let { name, ty, init } => {
            let _ = write!(out, "let {name}: {ty} = {};", render_expr(init));
        }
        StmtKind::Assign { name, value } => {
            let _ = write!(out, "{name} = {};", render_expr(value));
        }
        StmtKind::If {
            cond,
            then_block,
            else_block,
        } => {
            let _ = write!(out, "if ({}) ", render_expr(cond));
            write_block(then_block, depth, out);
            if let Some(e) = else_block {
                out.push_str(" else ");
                write_block(e, depth, out);
            }
        }
        StmtKind::While { cond, body } => {
            let _ = write!(out, "while ({}) ", render_expr(cond));
            write_block(body, depth, out);
        }
        StmtKind::Return(None) => out.push_str("return;"),
        StmtKind::Return(Some(e)) => {
            let _ = write!(out, "return {};", render_expr(e));
        }
        StmtKind::Expr(e) => {
            let _ = write!(out, "{};", render_expr(e));
        }
        StmtKind::Assert(e) => {
            let _ = write!(out, "assert({});", render_expr(e));
        }
    }
    out.push('\n');
}

/// Render one statement (with nested blocks) at the given indentation depth.
pub fn render_stmt(stmt: &Stmt, depth: usize) -> String {
    let mut out = String::new();
    write_stmt(stmt, depth, &mut out);
    out
}

/// Single-line form of a statement, used as a structural identity key.
pub fn render_stmt_inline(stmt: &Stmt) -> String {
    render_stmt(stmt, 0)
        .lines()
        .map(str::trim)
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn render_fn(func: &FnDecl, depth: usize) -> String {
    let mut out = INDENT.repeat(depth);
    let params: Vec<String> = func
        .params
        .iter()
        .map(|p| format!("{}: {}", p.name, p.ty))
        .collect();
    let _ = write!(out, "fn {}({})", func.name, params.join(", "));
    if func.ret != Type::Void {
        let _ = write!(out, " -> {}", func.ret);
    }
    out.push(' ');
    write_block(&func.body, depth, &mut out);
    out.push('\n');
    out
}

pub fn render_type(ty: &TypeDecl) -> String {
    let mut out = format!("type {} {{\n", ty.name);
    for field in &ty.fields {
        let _ = writeln!(
            out,
            "{INDENT}let {}: {} = {};",
            field.name,
            field.ty,
            render_literal(&field.value)
        );
    }
    for (i, func) in ty.fns.iter().enumerate() {
        if i > 0 || !ty.fields.is_empty() {
            out.push('\n');
        }
        out.push_str(&render_fn(func, 1));
    }
    out.push_str("}\n");
    out
}

pub fn render_file(file: &SourceFile) -> String {
    file.types
        .iter()
        .map(render_type)
        .collect::<Vec<_>>()
        .join("\n")
}

/// Render every file of the program, keyed by path.
pub fn render(program: &Program) -> BTreeMap<String, String> {
    program
        .files
        .iter()
        .map(|f| (f.path.clone(), render_file(f)))
        .collect()
}

pub fn render_suite(suite: &TestSuite) -> BTreeMap<String, String> {
    let mut files: BTreeMap<String, String> = BTreeMap::new();
    for case in &suite.tests {
        let out = files.entry(case.file.clone()).or_default();
        if !out.is_empty() {
            out.push('\n');
        }
        let _ = write!(out, "test {} ", case.name);
        write_block(&case.body, 0, out);
        out.push('\n');
    }
    files
}
