//! Keyed token corpora at file, type and executable granularity.
//!
//! Each entry's tokens are the terminal yield of the element's syntax tree,
//! i.e. the lexemes of its canonical rendering. Types contribute
//! `type NAME {`, their members in declaration order, and `}`; files
//! contribute nothing beyond the concatenation of their types.

use std::fmt;

use petit::render::{render_file, render_fn, render_type};
use petit::Program;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Granularity {
    File,
    Type,
    Executable,
}

impl Granularity {
    /// Stem of the `.key` / `.src` file pair.
    pub fn stem(self) -> &'static str {
        match self {
            Granularity::File => "files",
            Granularity::Type => "types",
            Granularity::Executable => "execs",
        }
    }
}

impl fmt::Display for Granularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Granularity::File => "file",
            Granularity::Type => "type",
            Granularity::Executable => "executable",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusEntry {
    pub key: String,
    pub tokens: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub granularity: Granularity,
    pub entries: Vec<CorpusEntry>,
}

impl Corpus {
    pub fn new(granularity: Granularity) -> Self {
        Corpus {
            granularity,
            entries: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, key: &str) -> Option<&CorpusEntry> {
        self.entries.iter().find(|e| e.key == key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.key.as_str())
    }

    /// Copy of the corpus with every token line normalized.
    pub fn normalized(&self) -> Corpus {
        Corpus {
            granularity: self.granularity,
            entries: self
                .entries
                .iter()
                .map(|e| CorpusEntry {
                    key: e.key.clone(),
                    tokens: normalize(&e.tokens),
                })
                .collect(),
        }
    }

    /// `.key` file body: one key per line.
    pub fn to_key_text(&self) -> String {
        self.entries.iter().map(|e| format!("{}\n", e.key)).collect()
    }

    /// `.src` file body: one space-separated token line per key.
    pub fn to_src_text(&self) -> String {
        self.entries.iter().map(|e| format!("{}\n", e.tokens.join(" "))).collect()
    }

    /// Inverse of the two writers above. Tokens must not contain spaces,
    /// which holds for normalized corpora.
    pub fn from_text(granularity: Granularity, keys: &str, src: &str) -> crate::Result<Corpus> {
        let keys: Vec<&str> = keys.lines().collect();
        let lines: Vec<&str> = src.lines().collect();
        if keys.len() != lines.len() {
            return Err(crate::Error::Format(format!(
                "{} keys but {} token lines",
                keys.len(),
                lines.len()
            )));
        }
        let mut seen = std::collections::HashSet::new();
        let mut entries = Vec::with_capacity(keys.len());
        for (key, line) in keys.into_iter().zip(lines) {
            if !seen.insert(key) {
                return Err(crate::Error::Format(format!("duplicate key {key:?}")));
            }
            entries.push(CorpusEntry {
                key: key.to_string(),
                tokens: line.split(' ').filter(|t| !t.is_empty()).map(String::from).collect(),
            });
        }
        Ok(Corpus { granularity, entries })
    }

    /// Distinct tokens in order of first appearance.
    pub fn vocabulary(&self) -> Vec<String> {
        let mut seen = std::collections::HashSet::new();
        let mut out = Vec::new();
        for e in &self.entries {
            for t in &e.tokens {
                if seen.insert(t.as_str()) {
                    out.push(t.clone());
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpora {
    pub files: Corpus,
    pub types: Corpus,
    pub execs: Corpus,
}

impl Corpora {
    pub fn normalized(&self) -> Corpora {
        Corpora {
            files: self.files.normalized(),
            types: self.types.normalized(),
            execs: self.execs.normalized(),
        }
    }

    pub fn all(&self) -> [&Corpus; 3] {
        [&self.files, &self.types, &self.execs]
    }
}

fn yield_of(text: &str) -> Vec<String> {
    petit::lexer::lexemes(text).expect("rendered Petit always lexes")
}

/// Type key `path::TypeName`.
pub fn type_key(path: &str, type_name: &str) -> String {
    format!("{path}::{type_name}")
}

/// Executable key `path::TypeName::name(paramTypes)->retType`.
pub fn exec_key(path: &str, type_name: &str, signature: &str) -> String {
    format!("{path}::{type_name}::{signature}")
}

/// Raw (unnormalized) corpora of a program.
pub fn extract_corpora(program: &Program) -> Corpora {
    let mut files = Corpus::new(Granularity::File);
    let mut types = Corpus::new(Granularity::Type);
    let mut execs = Corpus::new(Granularity::Executable);
    for file in &program.files {
        files.entries.push(CorpusEntry {
            key: file.path.clone(),
            tokens: yield_of(&render_file(file)),
        });
        for ty in &file.types {
            types.entries.push(CorpusEntry {
                key: type_key(&file.path, &ty.name),
                tokens: yield_of(&render_type(ty)),
            });
            for func in &ty.fns {
                execs.entries.push(CorpusEntry {
                    key: exec_key(&file.path, &ty.name, &func.signature()),
                    tokens: yield_of(&render_fn(func, 0)),
                });
            }
        }
    }
    Corpora {
        files,
        types,
        execs,
    }
}

pub const INT_SENTINEL: &str = "<INT>";
pub const FLOAT_SENTINEL: &str = "<FLOAT>";
pub const STR_SENTINEL: &str = "<STR>";
pub const CHAR_SENTINEL: &str = "<CHAR>";

/// Sentinel for a literal lexeme, or `None` for every other token.
pub fn literal_sentinel(lexeme: &str) -> Option<&'static str> {
    let first = lexeme.chars().next()?;
    match first {
        '"' => Some(STR_SENTINEL),
        '\'' => Some(CHAR_SENTINEL),
        c if c.is_ascii_digit() => {
            if lexeme.contains(['.', 'e', 'E']) {
                Some(FLOAT_SENTINEL)
            } else {
                Some(INT_SENTINEL)
            }
        }
        _ => None,
    }
}

/// Replace char, float, int and string literals by their type sentinel.
pub fn normalize(tokens: &[String]) -> Vec<String> {
    tokens
        .iter()
        .map(|t| match literal_sentinel(t) {
            Some(s) => s.to_string(),
            None => t.clone(),
        })
        .collect()
}

/// Whether a (normalized) term names a program entity rather than being a
/// keyword, operator or literal sentinel.
pub fn is_identifier_term(term: &str) -> bool {
    let mut chars = term.chars();
    match chars.next() {
        Some(c) if c.is_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_alphanumeric() || c == '_') && !petit::lexer::is_keyword(term)
}
