use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("{file}:{line}:{col}: syntax error: {message}")]
    Syntax {
        file: String,
        line: usize,
        col: usize,
        message: String,
    },
    #[error("{file}: duplicate type `{name}` (first declared in {first})")]
    DuplicateType {
        file: String,
        name: String,
        first: String,
    },
    #[error("{file}: duplicate fn signature `{signature}` in type `{type_name}`")]
    DuplicateFn {
        file: String,
        type_name: String,
        signature: String,
    },
    #[error("{file}: duplicate field `{name}` in type `{type_name}`")]
    DuplicateField {
        file: String,
        type_name: String,
        name: String,
    },
    #[error("{file}: duplicate test `{name}`")]
    DuplicateTest { file: String, name: String },
}

/// A name or type problem found by [`crate::check`].
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{location}: {message}")]
pub struct CheckError {
    /// `path::Type::sig` or `test NAME`.
    pub location: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScopeError {
    #[error("unknown statement id `{0}`")]
    UnknownStatement(String),
}
