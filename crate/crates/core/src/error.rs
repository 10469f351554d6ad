use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    /// Syntax error in a config document or a layer-list string.
    #[error("parse error at line {line}, column {column}: {msg}")]
    Parse {
        line: usize,
        column: usize,
        msg: String,
    },

    /// A layer whose derived shape is inconsistent with its neighbors.
    #[error("shape inconsistency in layer `{layer}`: {msg}")]
    ShapeMismatch { layer: String, msg: String },

    /// An invalid hardware or run configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// Two bit vectors of different widths fed to a width-sensitive op.
    #[error("width mismatch: expected {expected}, got {got}")]
    WidthMismatch { expected: usize, got: usize },

    /// A push exceeded the configured memory depth.
    #[error("memory overflow: address {addr} exceeds configured depth {depth}")]
    MemoryOverflow { addr: usize, depth: usize },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}
