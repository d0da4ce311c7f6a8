use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("box {box_index} is not aligned with the h-grid along axis {axis}")]
    Alignment { box_index: usize, axis: usize },

    #[error("point ({x}, {y}, {z}) matches no region")]
    Classification { x: f64, y: f64, z: f64 },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("point {point} has an empty family")]
    DegeneratePoint { point: usize },

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("point {point} at ({x}, {y}, {z}) has a neighborhood that leaves the point cloud")]
    Coverage { point: usize, x: f64, y: f64, z: f64 },

    #[error("degenerate cell {cell}")]
    Assembly { cell: usize },

    #[error("topology error: {0}")]
    Topology(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("point ({x}, {y}, {z}) lies outside the mesh")]
    Location { x: f64, y: f64, z: f64 },

    #[error("{0}")]
    Solver(#[from] crate::linsolve::SolverError),

    #[error("{state} state solve failed: {source}")]
    State {
        state: &'static str,
        #[source]
        source: crate::linsolve::SolverError,
    },

    #[error("line search failed after {iterations} iterations (J = {objective:e})")]
    LineSearch {
        iterations: usize,
        objective: f64,
        history: Vec<crate::optim::IterationRecord>,
    },

    #[error("config error at `{key}`{}: {message}", line_suffix(*line))]
    Config {
        key: String,
        line: Option<usize>,
        message: String,
    },

    #[error("convergence study aborted at level {level}: {message}")]
    Study { level: usize, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn line_suffix(line: Option<usize>) -> String {
    line.map(|l| format!(" (line {l})")).unwrap_or_default()
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
