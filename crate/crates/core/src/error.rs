use thiserror::Error;

use crate::stochastic::Channel;

#[derive(Debug, Error)]
pub enum Error {
    #[error(
        "grid size {grid} cannot dealias products of order {order} with k_max = {k_max} \
         (need grid >= {required})"
    )]
    Dealias {
        k_max: usize,
        grid: usize,
        order: usize,
        required: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("fields are defined on different bases")]
    BasisMismatch,

    #[error("grid field has resolution {got}, basis collocates on {expected}")]
    GridMismatch { expected: usize, got: usize },

    #[error("coupling rejected: {0}")]
    InvalidCoupling(String),

    #[error("monotonicity shift needs r > 3 and beta > 0 (r = {r}, beta = {beta})")]
    MonotonicityDomain { r: f64, beta: f64 },

    #[error("dissipativity gap xi = mu*lambda1 - 2*L_g - 2*L_sigma2^2 = {xi} must be positive")]
    DissipativityGap { xi: f64 },

    #[error("{which} blew up at t = {t}: |.|_H = {norm:e} exceeds {threshold:e}")]
    BlowUp {
        which: &'static str,
        t: f64,
        norm: f64,
        threshold: f64,
    },

    #[error("decay fit rejected: {0}")]
    FitRejected(String),

    #[error("averaged drift stderr {stderr:e} exceeds {fraction} x drift magnitude {drift:e}")]
    FbarBudget {
        stderr: f64,
        drift: f64,
        fraction: f64,
    },

    #[error("noise stream on channel {got:?} where {expected:?} is required")]
    WrongChannel { expected: Channel, got: Channel },

    #[error("configuration errors:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    #[error("snapshot: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
