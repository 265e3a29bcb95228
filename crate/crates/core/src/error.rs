use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetlistError {
    #[error("line {line}, column {column}: syntax error: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("line {line}: unknown device kind '{kind}'")]
    UnknownDeviceKind { line: usize, kind: String },
    #[error("{}duplicate device name '{name}'", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
    DuplicateName { name: String, line: Option<usize> },
    #[error("node '{0}' has fewer than two connections")]
    DanglingNode(String),
    #[error("no MOSFET named '{0}'")]
    UnknownDevice(String),
    #[error("device {device}: {message}")]
    InvalidParameter { device: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("DC operating point did not converge: worst node '{node}', residual {residual:.3e} A")]
    DcNonConvergence { node: String, residual: f64 },
    #[error("Newton did not converge at t = {time:.6e} s: worst node '{node}', residual {residual:.3e} A")]
    TransientNonConvergence {
        time: f64,
        node: String,
        residual: f64,
    },
    #[error("t_stop / dt needs {needed} steps, above the budget of {budget}")]
    StepBudget { needed: u64, budget: u64 },
    #[error("invalid transient configuration: {0}")]
    InvalidConfig(String),
    #[error("singular circuit matrix")]
    Singular,
    #[error("unknown node '{0}' in initial conditions")]
    UnknownNode(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("waveform has no probe '{0}'")]
    MissingProbe(String),
    #[error("fresh circuit does not spike; deviation is undefined")]
    FreshNotSpiking,
    #[error("waveform does not match netlist: {0}")]
    WaveformMismatch(String),
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Netlist(#[from] NetlistError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}
