//! Tokenizer for Petit source text.

use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    Ident(String),
    Int(i64),
    Float(f64),
    Str(String),
    Char(char),
    KwType,
    KwFn,
    KwLet,
    KwIf,
    KwElse,
    KwWhile,
    KwReturn,
    KwTrue,
    KwFalse,
    KwTest,
    KwAssert,
    KwInt,
    KwFloat,
    KwBool,
    KwStr,
    KwChar,
    KwVoid,
    LParen,
    RParen,
    LBrace,
    RBrace,
    Comma,
    Semi,
    Colon,
    Dot,
    Arrow,
    Assign,
    Plus,
    Minus,
    Star,
    Slash,
    Percent,
    Bang,
    EqEq,
    NotEq,
    Lt,
    Le,
    Gt,
    Ge,
    AndAnd,
    OrOr,
    Eof,
}

impl TokenKind {
    pub fn is_literal(&self) -> bool {
        matches!(
            self,
            TokenKind::Int(_) | TokenKind::Float(_) | TokenKind::Str(_) | TokenKind::Char(_)
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    /// Source spelling, including quotes for string and char literals.
    pub lexeme: String,
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.kind == TokenKind::Eof {
            f.write_str("end of input")
        } else {
            write!(f, "`{}`", self.lexeme)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

pub const KEYWORDS: &[&str] = &[
    "type", "fn", "let", "if", "else", "while", "return", "true", "false", "test", "assert",
    "int", "float", "bool", "str", "char", "void",
];

pub fn is_keyword(word: &str) -> bool {
    KEYWORDS.contains(&word)
}

fn keyword(word: &str) -> Option<TokenKind> {
    Some(match word {
        "type" => TokenKind::KwType,
        "fn" => TokenKind::KwFn,
        "let" => TokenKind::KwLet,
        "if" => TokenKind::KwIf,
        "else" => TokenKind::KwElse,
        "while" => TokenKind::KwWhile,
        "return" => TokenKind::KwReturn,
        "true" => TokenKind::KwTrue,
        "false" => TokenKind::KwFalse,
        "test" => TokenKind::KwTest,
        "assert" => TokenKind::KwAssert,
        "int" => TokenKind::KwInt,
        "float" => TokenKind::KwFloat,
        "bool" => TokenKind::KwBool,
        "str" => TokenKind::KwStr,
        "char" => TokenKind::KwChar,
        "void" => TokenKind::KwVoid,
        _ => return None,
    })
}

struct Lexer {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    col: usize,
}

impl Lexer {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn peek_at(&self, offset: usize) -> Option<char> {
        self.chars.get(self.pos + offset).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.get(self.pos).copied()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn error(&self, line: usize, col: usize, message: impl Into<String>) -> LexError {
        LexError {
            line,
            col,
            message: message.into(),
        }
    }

    fn skip_trivia(&mut self) {
        loop {
            match self.peek() {
                Some(c) if c.is_whitespace() => {
                    self.bump();
                }
                Some('/') if self.peek_at(1) == Some('/') => {
                    while let Some(c) = self.peek() {
                        if c == '\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                _ => break,
            }
        }
    }

    fn escape(&mut self, line: usize, col: usize) -> Result<char, LexError> {
        match self.bump() {
            Some('n') => Ok('\n'),
            Some('t') => Ok('\t'),
            Some('r') => Ok('\r'),
            Some('0') => Ok('\0'),
            Some('\\') => Ok('\\'),
            Some('"') => Ok('"'),
            Some('\'') => Ok('\''),
            Some(c) => Err(self.error(line, col, format!("unknown escape `\\{c}`"))),
            None => Err(self.error(line, col, "unterminated escape")),
        }
    }

    fn next_token(&mut self) -> Result<Token, LexError> {
        self.skip_trivia();
        let (line, col, start) = (self.line, self.col, self.pos);
        let Some(c) = self.bump() else {
            return Ok(Token {
                kind: TokenKind::Eof,
                lexeme: String::new(),
                line,
                col,
            });
        };
        let kind = match c {
            '(' => TokenKind::LParen,
            ')' => TokenKind::RParen,
            '{' => TokenKind::LBrace,
            '}' => TokenKind::RBrace,
            ',' => TokenKind::Comma,
            ';' => TokenKind::Semi,
            ':' => TokenKind::Colon,
            '.' => TokenKind::Dot,
            '+' => TokenKind::Plus,
            '*' => TokenKind::Star,
            '/' => TokenKind::Slash,
            '%' => TokenKind::Percent,
            '-' => {
                if self.peek() == Some('>') {
                    self.bump();
                    TokenKind::Arrow
                } else {
                    TokenKind::Minus
                }
            }
            '=' => {
                if self.peek() == Some('=') {
                    self.bump();
                    TokenKind::EqEq
                } else {
                    TokenKind::Assign
                }
            }
            '!' => {
                if self.peek() == Some('=') {
                    self.bump();
                    TokenKind::NotEq
                } else {
                    TokenKind::Bang
                }
            }
            '<' => {
                if self.peek() == Some('=') {
                    self.bump();
                    TokenKind::Le
                } else {
                    TokenKind::Lt
                }
            }
            '>' => {
                if self.peek() == Some('=') {
                    self.bump();
                    TokenKind::Ge
                } else {
                    TokenKind::Gt
                }
            }
            '&' if self.peek() == Some('&') => {
                self.bump();
                TokenKind::AndAnd
            }
            '|' if self.peek() == Some('|') => {
                self.bump();
                TokenKind::OrOr
            }
            '"' => {
                let mut value = String::new();
                loop {
                    match self.bump() {
                        Some('"') => break,
                        Some('\\') => value.push(self.escape(line, col)?),
                        Some('\n') | None => {
                            return Err(self.error(line, col, "unterminated string literal"))
                        }
                        Some(c) => value.push(c),
                    }
                }
                TokenKind::Str(value)
            }
            '\'' => {
                let value = match self.bump() {
                    Some('\\') => self.escape(line, col)?,
                    Some('\'') | Some('\n') | None => {
                        return Err(self.error(line, col, "empty or unterminated char literal"))
                    }
                    Some(c) => c,
                };
                if self.bump() != Some('\'') {
                    return Err(self.error(line, col, "unterminated char literal"));
                }
                TokenKind::Char(value)
            }
            c if c.is_ascii_digit() => self.number(line, col, start)?,
            c if c.is_alphabetic() || c == '_' => {
                while matches!(self.peek(), Some(c) if c.is_alphanumeric() || c == '_') {
                    self.bump();
                }
                let word: String = self.chars[start..self.pos].iter().collect();
                keyword(&word).unwrap_or(TokenKind::Ident(word))
            }
            other => return Err(self.error(line, col, format!("unexpected character `{other}`"))),
        };
        let lexeme: String = self.chars[start..self.pos].iter().collect();
        Ok(Token {
            kind,
            lexeme,
            line,
            col,
        })
    }

    fn digits(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.bump();
        }
    }

    fn number(&mut self, line: usize, col: usize, start: usize) -> Result<TokenKind, LexError> {
        self.digits();
        let mut is_float = false;
        if self.peek() == Some('.') && matches!(self.peek_at(1), Some(c) if c.is_ascii_digit()) {
            is_float = true;
            self.bump();
            self.digits();
        }
        if matches!(self.peek(), Some('e') | Some('E')) {
            let signed = matches!(self.peek_at(1), Some('+') | Some('-'));
            let digit_at = if signed { 2 } else { 1 };
            if matches!(self.peek_at(digit_at), Some(c) if c.is_ascii_digit()) {
                is_float = true;
                self.bump();
                if signed {
                    self.bump();
                }
                self.digits();
            }
        }
        let text: String = self.chars[start..self.pos].iter().collect();
        if is_float {
            text.parse::<f64>()
                .map(TokenKind::Float)
                .map_err(|_| self.error(line, col, format!("invalid float literal `{text}`")))
        } else {
            text.parse::<i64>()
                .map(TokenKind::Int)
                .map_err(|_| self.error(line, col, format!("integer literal `{text}` out of range")))
        }
    }
}

/// Tokenize `src`. The returned stream always ends with an `Eof` token.
pub fn lex(src: &str) -> Result<Vec<Token>, LexError> {
    let mut lexer = Lexer {
        chars: src.chars().collect(),
        pos: 0,
        line: 1,
        col: 1,
    };
    let mut out = Vec::new();
    loop {
        let tok = lexer.next_token()?;
        let done = tok.kind == TokenKind::Eof;
        out.push(tok);
        if done {
            return Ok(out);
        }
    }
}

/// Lexemes of `src` without the trailing `Eof`.
pub fn lexemes(src: &str) -> Result<Vec<String>, LexError> {
    Ok(lex(src)?
        .into_iter()
        .filter(|t| t.kind != TokenKind::Eof)
        .map(|t| t.lexeme)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<TokenKind> {
        lex(src).unwrap().into_iter().map(|t| t.kind).collect()
    }

    #[test]
    fn operators_and_arrows() {
        assert_eq!(
            kinds("-> - == = != ! <= < >= > && ||"),
            vec![
                TokenKind::Arrow,
                TokenKind::Minus,
                TokenKind::EqEq,
                TokenKind::Assign,
                TokenKind::NotEq,
                TokenKind::Bang,
                TokenKind::Le,
                TokenKind::Lt,
                TokenKind::Ge,
                TokenKind::Gt,
                TokenKind::AndAnd,
                TokenKind::OrOr,
                TokenKind::Eof
            ]
        );
    }

    #[test]
    fn numeric_literals() {
        assert_eq!(kinds("12")[0], TokenKind::Int(12));
        assert_eq!(kinds("1.5")[0], TokenKind::Float(1.5));
        assert_eq!(kinds("1e-6")[0], TokenKind::Float(1e-6));
        assert_eq!(kinds("2.5E+3")[0], TokenKind::Float(2500.0));
        // `1.f` is an int followed by a dot
        assert_eq!(kinds("1.f")[0], TokenKind::Int(1));
        assert!(lex("99999999999999999999").is_err());
    }

    #[test]
    fn string_and_char_literals_keep_lexeme() {
        let toks = lex(r#""a b\n" 'x' '\''"#).unwrap();
        assert_eq!(toks[0].kind, TokenKind::Str("a b\n".into()));
        assert_eq!(toks[0].lexeme, r#""a b\n""#);
        assert_eq!(toks[1].kind, TokenKind::Char('x'));
        assert_eq!(toks[2].kind, TokenKind::Char('\''));
    }

    #[test]
    fn comments_and_positions() {
        let toks = lex("// hello\n  fn").unwrap();
        assert_eq!(toks[0].kind, TokenKind::KwFn);
        assert_eq!((toks[0].line, toks[0].col), (2, 3));
    }

    #[test]
    fn bad_character_reports_position() {
        let err = lex("a\n  #").unwrap_err();
        assert_eq!((err.line, err.col), (2, 3));
    }
}
