use petit::{all_tests_pass, check_program, check_suite, parse_program, render, Program, Stmt, StmtLoc, TestSuite};

use super::Operator;

/// Replacement must keep the statement kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KindMismatch;

/// Copy of `program` with `stmt` spliced in at `point`.
pub fn apply_operator(
    program: &Program,
    point: &StmtLoc,
    op: Operator,
    stmt: &Stmt,
) -> Result<Program, KindMismatch> {
    if op == Operator::Replace && program.stmt(point).tag() != stmt.tag() {
        return Err(KindMismatch);
    }
    let mut variant = program.clone();
    let block = variant.block_mut(point);
    match op {
        Operator::InsertBefore => block.insert(point.index, stmt.clone()),
        Operator::InsertAfter => block.insert(point.index + 1, stmt.clone()),
        Operator::Replace => block[point.index] = stmt.clone(),
    }
    variant.renumber();
    Ok(variant)
}

/// The compile gate: the variant must survive render and re-parse, and every
/// name and type in it and in the suite must resolve. Returns the re-parsed
/// program.
pub fn compiles(variant: &Program, suite: &TestSuite) -> Option<Program> {
    let reparsed = parse_program(&render(variant)).ok()?;
    if !check_program(&reparsed).is_empty() || !check_suite(&reparsed, suite).is_empty() {
        return None;
    }
    Some(reparsed)
}

/// Compile gate followed by the full suite.
pub fn validate(variant: &Program, suite: &TestSuite) -> bool {
    compiles(variant, suite).is_some_and(|p| all_tests_pass(&p, suite))
}

#[cfg(test)]
mod tests {
    use super::*;
    use petit::parse_stmt;
    use std::collections::BTreeMap;

    fn program(src: &str) -> Program {
        parse_program(&BTreeMap::from([("m.pt".to_string(), src.to_string())])).unwrap()
    }

    fn loc(p: &Program, index: u32) -> StmtLoc {
        p.statements()
            .into_iter()
            .find(|(s, _)| s.index == index)
            .unwrap()
            .1
    }

    #[test]
    fn insert_before_single_statement() {
        let p = program("type M { fn f(x: int) -> int { return x; } }");
        let s = parse_stmt("x = x + 1;").unwrap();
        let v = apply_operator(&p, &loc(&p, 0), Operator::InsertBefore, &s).unwrap();
        let body = &v.files[0].types[0].fns[0].body;
        assert_eq!(body.len(), 2);
        assert_eq!(body[0], s);
        assert_eq!((body[0].ord, body[1].ord), (0, 1));
        // the original is untouched
        assert_eq!(p.files[0].types[0].fns[0].body.len(), 1);
    }

    #[test]
    fn insert_after_nested() {
        let p = program("type M { fn f(x: int) -> int { if (x > 0) { x = 1; } return x; } }");
        let s = parse_stmt("x = 2;").unwrap();
        let v = apply_operator(&p, &loc(&p, 1), Operator::InsertAfter, &s).unwrap();
        let text = &render(&v)["m.pt"];
        assert!(text.contains("x = 1;\n            x = 2;\n"));
    }

    #[test]
    fn replace_requires_same_kind() {
        let p = program("type M { fn f(x: int) -> int { return x; } }");
        let assign = parse_stmt("x = 3;").unwrap();
        assert_eq!(
            apply_operator(&p, &loc(&p, 0), Operator::Replace, &assign),
            Err(KindMismatch)
        );
        let ret = parse_stmt("return x + 1;").unwrap();
        assert!(apply_operator(&p, &loc(&p, 0), Operator::Replace, &ret).is_ok());
    }

    #[test]
    fn variant_differs_at_one_location() {
        let p = program("type M { fn f(x: int) -> int { let y: int = x; y = y + 1; return y; } }");
        let s = parse_stmt("y = y * 2;").unwrap();
        let v = apply_operator(&p, &loc(&p, 1), Operator::Replace, &s).unwrap();
        let a = render(&p)["m.pt"].clone();
        let b = render(&v)["m.pt"].clone();
        let changed: Vec<(&str, &str)> = a.lines().zip(b.lines()).filter(|(x, y)| x != y).collect();
        assert_eq!(changed, vec![("        y = y + 1;", "        y = y * 2;")]);
    }

    #[test]
    fn compile_gate_rejects_unresolved_names() {
        let p = program("type M { fn f(x: int) -> int { return x; } }");
        let suite = TestSuite::default();
        let bad = parse_stmt("return eps;").unwrap();
        let v = apply_operator(&p, &loc(&p, 0), Operator::Replace, &bad).unwrap();
        assert!(compiles(&v, &suite).is_none());
        assert!(compiles(&p, &suite).is_some());
    }
}
