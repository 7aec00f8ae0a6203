//! Quantum state diffusion: stochastic pure-state trajectories whose
//! ensemble mean obeys the Lindblad equation, at the level of wavefunctions
//! and of closed moment equations.

mod ensemble;
mod moments;
mod noise;
mod trajectory;

pub use ensemble::{
    ensemble_density, fluctuation_report, localization_time, mean_moments, momentum_localization_time,
    predicted_momentum_localization_time, run_ensemble, run_moment_ensemble, EnsembleDensity, FluctuationReport,
    MIN_SEEDS,
};
pub use moments::{
    closed_quantities, moment_step, moment_step_with_increment, run_moments, ClosedQuantities, Closure,
    TrajectoryMoments,
};
pub use noise::NoiseStream;
pub use trajectory::{max_qsd_step, quantum_current, run_trajectory, step_trajectory, QsdStepper, Trajectory};
