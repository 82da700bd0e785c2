//! Error type shared across the library.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix must be square, got {rows}x{cols}")]
    NonSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: {context}")]
    Dimension { context: String },

    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error(
        "symmetric eigenvalue iteration did not converge after {sweeps} sweeps \
         (off-diagonal mass {off_diag:.3e}, n = {n})"
    )]
    EigenConvergence { sweeps: usize, off_diag: f64, n: usize },

    #[error("vehicle index {index} out of range 1..={n}")]
    VehicleIndex { index: usize, n: usize },

    #[error(
        "slope pair ({s_h}, {s_g}) outside admissible box [0, {s_h_max}] x [0, {s_g_max}]"
    )]
    SlopeOutOfBox { s_h: f64, s_g: f64, s_h_max: f64, s_g_max: f64 },

    #[error("invalid gain set: {reason}")]
    InvalidGains { reason: String },

    #[error("invalid configuration: {reason}")]
    InvalidConfig { reason: String },

    #[error("certificate invalid: contraction margin {cbar_sq} is not positive")]
    CertificateInvalid { cbar_sq: f64 },

    #[error("simulation diverged at t = {time:.3} s, vehicle {vehicle}: {detail}")]
    Divergence { vehicle: usize, time: f64, detail: String },

    #[error("time grid mismatch: {context}")]
    GridMismatch { context: String },

    #[error("unknown parameter name `{name}`")]
    UnknownParameter { name: String },

    #[error("malformed record: {context}")]
    Malformed { context: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("record serialization failed: {0}")]
    TomlSer(#[from] toml::ser::Error),

    #[error("record parse failed: {0}")]
    TomlDe(#[from] toml::de::Error),
}
