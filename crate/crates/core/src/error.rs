//! Crate-wide error type.

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid size must be even, got n = {0}")]
    GridOdd(usize),
    #[error("grid size must be at least 4, got n = {0}")]
    GridTooSmall(usize),
    #[error("grid size must be at most {max}, got n = {n}")]
    GridTooLarge { n: usize, max: usize },
    #[error("fields live on different grids ({0} vs {1} points per side)")]
    GridMismatch(usize, usize),
    #[error("value array has length {got}, grid needs {want}")]
    FieldLength { got: usize, want: usize },
    #[error("non-finite sample at flat index {index}: {value}")]
    NonFiniteValue { index: usize, value: f64 },
    #[error("symbol is not finite at mode k = ({0}, {1})")]
    NonFiniteSymbol(i32, i32),
    #[error("operation needs a mean-zero field: |mean| = {mean:.3e} exceeds 1e-10 * l2 = {bound:.3e}")]
    MeanNotZero { mean: f64, bound: f64 },
    #[error("Galerkin cutoff {cutoff} out of range 1..={max}")]
    CutoffOutOfRange { cutoff: usize, max: usize },

    #[error(
        "model parameters need nu > 0 and 0 < theta < theta_c \
         (nu = {nu}, theta = {theta}, theta_c = {theta_c})"
    )]
    InvalidParams { nu: f64, theta: f64, theta_c: f64 },
    #[error("guard eps must lie in (0, 1e-6), got {0:e}")]
    InvalidGuardEps(f64),
    #[error("guard violated: sample {index} has u = {value} with |u| >= 1 - {eps:e}")]
    Guard { index: usize, value: f64, eps: f64 },
    #[error("guard abort at step {step}: sample {index} has u = {value}")]
    GuardAbort { step: u64, index: usize, value: f64 },

    #[error("tau = {tau} is inadmissible: denominator {denom:.6e} <= 0 at mode k = ({k1}, {k2})")]
    InadmissibleTau { tau: f64, denom: f64, k1: i32, k2: i32 },
    #[error("initial data: {0}")]
    InitialData(String),

    #[error("diagnostics: {0}")]
    Diagnostics(String),
    #[error("fields are not from one trajectory: means differ by {diff:.3e} (> {tol:.1e})")]
    MeanMismatch { diff: f64, tol: f64 },

    #[error("convergence study: {0}")]
    Study(String),
    #[error("study invalidated: run at tau = {tau} hit the guard at step {step}")]
    StudyAborted { tau: f64, step: u64 },
    #[error("degenerate error curve: {0}")]
    DegenerateFit(String),

    #[error("config: {0}")]
    Config(String),
    #[error("snapshot: bad magic (expected CHLOG1)")]
    SnapshotMagic,
    #[error("snapshot: unsupported format version {0}")]
    SnapshotVersion(u16),
    #[error("snapshot: payload holds {got} bytes, header implies {expected}")]
    SnapshotLength { expected: usize, got: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
