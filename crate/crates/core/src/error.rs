use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Domain(String),

    #[error("holding model is not stable: rho = {rho:.6} >= rho_max = {rho_max:.6}")]
    NotStable { rho: f64, rho_max: f64 },

    #[error("rate matrix iteration did not converge after {iterations} iterations (last change {change:.3e})")]
    MaxIterations { iterations: usize, change: f64 },

    #[error("singular linear system while solving {0}")]
    SingularSystem(&'static str),

    #[error("fixed point infeasible: effective bed hedge became non-positive (alpha = {alpha:.6})")]
    Infeasible { alpha: f64 },

    #[error("fixed point iteration did not converge (residual {residual:.3e})")]
    NoConvergence { residual: f64 },

    #[error("target delay probability cannot be met: {0}")]
    InfeasibleTarget(String),

    #[error("staffing schedule does not cover time {0}")]
    ScheduleGap(f64),
}

pub type Result<T> = std::result::Result<T, Error>;
