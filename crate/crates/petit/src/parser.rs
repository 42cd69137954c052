//! Recursive-descent parser. See `docs/petit.md` for the grammar.

use std::collections::{BTreeMap, HashMap, HashSet};

use crate::ast::*;
use crate::error::ParseError;
use crate::lexer::{lex, Token, TokenKind};

struct Parser<'a> {
    file: &'a str,
    toks: Vec<Token>,
    pos: usize,
    in_test: bool,
}

type PResult<T> = Result<T, ParseError>;

impl<'a> Parser<'a> {
    fn new(file: &'a str, src: &str, in_test: bool) -> PResult<Self> {
        let toks = lex(src).map_err(|e| ParseError::Syntax {
            file: file.to_string(),
            line: e.line,
            col: e.col,
            message: e.message,
        })?;
        Ok(Parser {
            file,
            toks,
            pos: 0,
            in_test,
        })
    }

    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn peek_kind(&self) -> &TokenKind {
        &self.toks[self.pos].kind
    }

    fn peek_kind_at(&self, offset: usize) -> &TokenKind {
        let i = (self.pos + offset).min(self.toks.len() - 1);
        &self.toks[i].kind
    }

    fn advance(&mut self) -> Token {
        let tok = self.toks[self.pos].clone();
        if tok.kind != TokenKind::Eof {
            self.pos += 1;
        }
        tok
    }

    fn error_at(&self, tok: &Token, message: impl Into<String>) -> ParseError {
        ParseError::Syntax {
            file: self.file.to_string(),
            line: tok.line,
            col: tok.col,
            message: message.into(),
        }
    }

    fn unexpected(&self, expected: &str) -> ParseError {
        let tok = self.peek();
        self.error_at(tok, format!("expected {expected}, found {tok}"))
    }

    fn eat(&mut self, kind: &TokenKind) -> bool {
        if self.peek_kind() == kind {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, kind: TokenKind, what: &str) -> PResult<Token> {
        if *self.peek_kind() == kind {
            Ok(self.advance())
        } else {
            Err(self.unexpected(what))
        }
    }

    fn ident(&mut self, what: &str) -> PResult<String> {
        match self.peek_kind().clone() {
            TokenKind::Ident(name) => {
                self.advance();
                Ok(name)
            }
            _ => Err(self.unexpected(what)),
        }
    }

    fn ty(&mut self, allow_void: bool) -> PResult<Type> {
        let ty = match self.peek_kind() {
            TokenKind::KwInt => Type::Int,
            TokenKind::KwFloat => Type::Float,
            TokenKind::KwBool => Type::Bool,
            TokenKind::KwStr => Type::Str,
            TokenKind::KwChar => Type::Char,
            TokenKind::KwVoid if allow_void => Type::Void,
            _ => return Err(self.unexpected("a type")),
        };
        self.advance();
        Ok(ty)
    }

    fn source_file(&mut self) -> PResult<Vec<TypeDecl>> {
        let mut types = Vec::new();
        while *self.peek_kind() != TokenKind::Eof {
            if *self.peek_kind() != TokenKind::KwType {
                return Err(self.unexpected("`type`"));
            }
            types.push(self.type_decl()?);
        }
        Ok(types)
    }

    fn type_decl(&mut self) -> PResult<TypeDecl> {
        self.expect(TokenKind::KwType, "`type`")?;
        let name = self.ident("a type name")?;
        self.expect(TokenKind::LBrace, "`{`")?;
        let mut decl = TypeDecl {
            name,
            fields: Vec::new(),
            fns: Vec::new(),
        };
        let mut field_names = HashSet::new();
        let mut signatures = HashSet::new();
        loop {
            match self.peek_kind() {
                TokenKind::RBrace => {
                    self.advance();
                    break;
                }
                TokenKind::KwLet => {
                    let field = self.field()?;
                    if !field_names.insert(field.name.clone()) {
                        return Err(ParseError::DuplicateField {
                            file: self.file.to_string(),
                            type_name: decl.name.clone(),
                            name: field.name,
                        });
                    }
                    decl.fields.push(field);
                }
                TokenKind::KwFn => {
                    let func = self.fn_decl()?;
                    let key = (func.name.clone(), func.param_types());
                    if !signatures.insert(key) {
                        return Err(ParseError::DuplicateFn {
                            file: self.file.to_string(),
                            type_name: decl.name.clone(),
                            signature: func.signature(),
                        });
                    }
                    decl.fns.push(func);
                }
                _ => return Err(self.unexpected("`let`, `fn` or `}`")),
            }
        }
        Ok(decl)
    }

    fn field(&mut self) -> PResult<Field> {
        self.expect(TokenKind::KwLet, "`let`")?;
        let name = self.ident("a field name")?;
        self.expect(TokenKind::Colon, "`:`")?;
        let ty = self.ty(false)?;
        self.expect(TokenKind::Assign, "`=`")?;
        let negative = self.eat(&TokenKind::Minus);
        let tok = self.peek().clone();
        let value = match (tok.kind, negative) {
            (TokenKind::Int(v), _) => Literal::Int(if negative { -v } else { v }),
            (TokenKind::Float(v), _) => Literal::Float(if negative { -v } else { v }),
            (TokenKind::KwTrue, false) => Literal::Bool(true),
            (TokenKind::KwFalse, false) => Literal::Bool(false),
            (TokenKind::Str(s), false) => Literal::Str(s),
            (TokenKind::Char(c), false) => Literal::Char(c),
            _ => return Err(self.unexpected("a literal field initializer")),
        };
        self.advance();
        self.expect(TokenKind::Semi, "`;`")?;
        Ok(Field { name, ty, value })
    }

    fn fn_decl(&mut self) -> PResult<FnDecl> {
        self.expect(TokenKind::KwFn, "`fn`")?;
        let name = self.ident("a fn name")?;
        self.expect(TokenKind::LParen, "`(`")?;
        let mut params = Vec::new();
        if *self.peek_kind() != TokenKind::RParen {
            loop {
                let pname = self.ident("a parameter name")?;
                self.expect(TokenKind::Colon, "`:`")?;
                let ty = self.ty(false)?;
                params.push(Param { name: pname, ty });
                if !self.eat(&TokenKind::Comma) {
                    break;
                }
            }
        }
        self.expect(TokenKind::RParen, "`)`")?;
        let ret = if self.eat(&TokenKind::Arrow) {
            self.ty(true)?
        } else {
            Type::Void
        };
        let body = self.block()?;
        Ok(FnDecl {
            name,
            params,
            ret,
            body,
        })
    }

    fn block(&mut self) -> PResult<Block> {
        self.expect(TokenKind::LBrace, "`{`")?;
        let mut stmts = Vec::new();
        while !self.eat(&TokenKind::RBrace) {
            if *self.peek_kind() == TokenKind::Eof {
                return Err(self.unexpected("`}`"));
            }
            stmts.push(self.stmt()?);
        }
        Ok(stmts)
    }

    fn stmt(&mut self) -> PResult<Stmt> {
        let kind = match self.peek_kind().clone() {
            TokenKind::KwLet => {
                self.advance();
                let name = self.ident("a variable name")?;
                self.expect(TokenKind::Colon, "`:`")?;
                let ty = self.ty(false)?;
                self.expect(TokenKind::Assign, "`=`")?;
                let init = self.expr()?;
                self.expect(TokenKind::Semi, "`;`")?;
                StmtKind::Let { name, ty, init }
            }
            TokenKind::KwIf => self.if_stmt()?,
            TokenKind::KwWhile => {
                self.advance();
                self.expect(TokenKind::LParen, "`(`")?;
                let cond = self.expr()?;
                self.expect(TokenKind::RParen, "`)`")?;
                let body = self.block()?;
                StmtKind::While { cond, body }
            }
            TokenKind::KwReturn => {
                self.advance();
                let value = if *self.peek_kind() == TokenKind::Semi {
                    None
                } else {
                    Some(self.expr()?)
                };
                self.expect(TokenKind::Semi, "`;`")?;
                StmtKind::Return(value)
            }
            TokenKind::KwAssert => {
                let tok = self.advance();
                if !self.in_test {
                    return Err(self.error_at(&tok, "`assert` is only allowed in test bodies"));
                }
                self.expect(TokenKind::LParen, "`(`")?;
                let cond = self.expr()?;
                self.expect(TokenKind::RParen, "`)`")?;
                self.expect(TokenKind::Semi, "`;`")?;
                StmtKind::Assert(cond)
            }
            TokenKind::Ident(name) if *self.peek_kind_at(1) == TokenKind::Assign => {
                self.advance();
                self.advance();
                let value = self.expr()?;
                self.expect(TokenKind::Semi, "`;`")?;
                StmtKind::Assign { name, value }
            }
            TokenKind::Ident(_) => {
                let tok = self.peek().clone();
                let expr = self.expr()?;
                if !matches!(expr, Expr::Call { .. }) {
                    return Err(self.error_at(&tok, "only calls may be used as statements"));
                }
                self.expect(TokenKind::Semi, "`;`")?;
                StmtKind::Expr(expr)
            }
            _ => return Err(self.unexpected("a statement")),
        };
        Ok(Stmt::new(kind))
    }

    fn if_stmt(&mut self) -> PResult<StmtKind> {
        self.expect(TokenKind::KwIf, "`if`")?;
        self.expect(TokenKind::LParen, "`(`")?;
        let cond = self.expr()?;
        self.expect(TokenKind::RParen, "`)`")?;
        let then_block = self.block()?;
        let else_block = if self.eat(&TokenKind::KwElse) {
            if *self.peek_kind() == TokenKind::KwIf {
                Some(vec![Stmt::new(self.if_stmt()?)])
            } else {
                Some(self.block()?)
            }
        } else {
            None
        };
        Ok(StmtKind::If {
            cond,
            then_block,
            else_block,
        })
    }

    fn expr(&mut self) -> PResult<Expr> {
        self.binary(1)
    }

    fn binary_op(&self) -> Option<BinOp> {
        Some(match self.peek_kind() {
            TokenKind::OrOr => BinOp::Or,
            TokenKind::AndAnd => BinOp::And,
            TokenKind::EqEq => BinOp::Eq,
            TokenKind::NotEq => BinOp::Ne,
            TokenKind::Lt => BinOp::Lt,
            TokenKind::Le => BinOp::Le,
            TokenKind::Gt => BinOp::Gt,
            TokenKind::Ge => BinOp::Ge,
            TokenKind::Plus => BinOp::Add,
            TokenKind::Minus => BinOp::Sub,
            TokenKind::Star => BinOp::Mul,
            TokenKind::Slash => BinOp::Div,
            TokenKind::Percent => BinOp::Rem,
            _ => return None,
        })
    }

    fn binary(&mut self, min_prec: u8) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.binary_op() {
            if op.precedence() < min_prec {
                break;
            }
            self.advance();
            let rhs = self.binary(op.precedence() + 1)?;
            lhs = Expr::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        match self.peek_kind() {
            TokenKind::Bang => {
                self.advance();
                Ok(Expr::Unary(UnOp::Not, Box::new(self.unary()?)))
            }
            TokenKind::Minus => {
                self.advance();
                Ok(Expr::Unary(UnOp::Neg, Box::new(self.unary()?)))
            }
            _ => self.primary(),
        }
    }

    fn args(&mut self) -> PResult<Vec<Expr>> {
        self.expect(TokenKind::LParen, "`(`")?;
        let mut args = Vec::new();
        if *self.peek_kind() != TokenKind::RParen {
            loop {
                args.push(self.expr()?);
                if !self.eat(&TokenKind::Comma) {
                    break;
                }
            }
        }
        self.expect(TokenKind::RParen, "`)`")?;
        Ok(args)
    }

    fn primary(&mut self) -> PResult<Expr> {
        let tok = self.peek().clone();
        let expr = match tok.kind {
            TokenKind::Int(v) => Expr::Lit(Literal::Int(v)),
            TokenKind::Float(v) => Expr::Lit(Literal::Float(v)),
            TokenKind::Str(s) => Expr::Lit(Literal::Str(s)),
            TokenKind::Char(c) => Expr::Lit(Literal::Char(c)),
            TokenKind::KwTrue => Expr::Lit(Literal::Bool(true)),
            TokenKind::KwFalse => Expr::Lit(Literal::Bool(false)),
            TokenKind::LParen => {
                self.advance();
                let inner = self.expr()?;
                self.expect(TokenKind::RParen, "`)`")?;
                return Ok(inner);
            }
            TokenKind::Ident(name) => {
                self.advance();
                return match self.peek_kind() {
                    TokenKind::LParen => Ok(Expr::Call {
                        target: None,
                        name,
                        args: self.args()?,
                    }),
                    TokenKind::Dot => {
                        self.advance();
                        let fname = self.ident("a fn name")?;
                        Ok(Expr::Call {
                            target: Some(name),
                            name: fname,
                            args: self.args()?,
                        })
                    }
                    _ => Ok(Expr::Var(name)),
                };
            }
            _ => return Err(self.unexpected("an expression")),
        };
        self.advance();
        Ok(expr)
    }

    fn test_file(&mut self) -> PResult<Vec<TestCase>> {
        let mut tests = Vec::new();
        while *self.peek_kind() != TokenKind::Eof {
            self.expect(TokenKind::KwTest, "`test`")?;
            let name = self.ident("a test name")?;
            let body = self.block()?;
            tests.push(TestCase {
                name,
                file: self.file.to_string(),
                body,
            });
        }
        Ok(tests)
    }
}

/// Parse one source file.
pub fn parse_file(path: &str, src: &str) -> Result<SourceFile, ParseError> {
    let mut parser = Parser::new(path, src, false)?;
    let types = parser.source_file()?;
    let mut file = SourceFile {
        path: path.to_string(),
        types,
    };
    for ty in &mut file.types {
        for func in &mut ty.fns {
            renumber_block(&mut func.body);
        }
    }
    Ok(file)
}

/// Parse a source tree (path → text) into a program with statement ids assigned.
///
/// Type names form one namespace across the whole program.
pub fn parse_program(sources: &BTreeMap<String, String>) -> Result<Program, ParseError> {
    let mut files = Vec::with_capacity(sources.len());
    let mut seen: HashMap<String, String> = HashMap::new();
    for (path, src) in sources {
        let file = parse_file(path, src)?;
        for ty in &file.types {
            if let Some(first) = seen.insert(ty.name.clone(), path.clone()) {
                return Err(ParseError::DuplicateType {
                    file: path.clone(),
                    name: ty.name.clone(),
                    first,
                });
            }
        }
        files.push(file);
    }
    Ok(Program { files })
}

/// Parse test files (`test NAME { ... }` blocks) into one suite, ordered by path.
pub fn parse_tests(sources: &BTreeMap<String, String>) -> Result<TestSuite, ParseError> {
    let mut suite = TestSuite::default();
    let mut names = HashSet::new();
    for (path, src) in sources {
        let mut parser = Parser::new(path, src, true)?;
        for case in parser.test_file()? {
            if !names.insert(case.name.clone()) {
                return Err(ParseError::DuplicateTest {
                    file: path.clone(),
                    name: case.name,
                });
            }
            suite.tests.push(case);
        }
    }
    Ok(suite)
}

/// Parse a single statement (no surrounding fn), mainly for tests and tooling.
pub fn parse_stmt(src: &str) -> Result<Stmt, ParseError> {
    let mut parser = Parser::new("<stmt>", src, false)?;
    let stmt = parser.stmt()?;
    if *parser.peek_kind() != TokenKind::Eof {
        return Err(parser.unexpected("end of input"));
    }
    Ok(stmt)
}

pub fn parse_expr(src: &str) -> Result<Expr, ParseError> {
    let mut parser = Parser::new("<expr>", src, false)?;
    let expr = parser.expr()?;
    if *parser.peek_kind() != TokenKind::Eof {
        return Err(parser.unexpected("end of input"));
    }
    Ok(expr)
}
