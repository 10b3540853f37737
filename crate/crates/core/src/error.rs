use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, PartialEq)]
pub enum Error {
    #[error("shape is empty")]
    EmptyShape,
    #[error("{}duplicate cell ({x}, {y})", line_prefix(*.line))]
    DuplicateCell { line: Option<usize>, x: i32, y: i32 },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("invalid shape: {0}")]
    InvalidShape(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("{0} is outside the domain [0, 1]")]
    Domain(f64),
    #[error("brute-force oracle refuses {edges} edges (limit {limit})")]
    EdgeGuard { edges: usize, limit: usize },
    #[error("not a balancing pair: {0}")]
    NotBalancing(String),
    #[error("shape is disconnected")]
    Disconnected,
    #[error("budget exceeded: {0}")]
    Budget(String),
}

fn line_prefix(line: Option<usize>) -> String {
    line.map(|l| format!("line {l}: ")).unwrap_or_default()
}
