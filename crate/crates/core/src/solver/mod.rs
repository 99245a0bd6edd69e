//! Time stepping for the transport-noise equation and its noiseless limit, with pathwise
//! diagnostics.

mod checks;
mod config;
mod integrator;
pub(crate) mod path;

pub use checks::{
    basis_gradient, divergence_orthogonality_check, energy_inequality_check, transport_integral,
    weak_residual, EnergyReport,
};
pub use config::{FourierTerm, Forcing, InitialCondition, LimitConfig, Scheme, SolverConfig};
pub use integrator::Integrator;
pub use path::{
    simulate_path, solve_limit, step_deterministic, step_ito, step_stratonovich, PathDiagnostics,
    Trajectory,
};

#[cfg(test)]
mod tests;
