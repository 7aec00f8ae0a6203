//! Wave-packet reflection off a barrier in the presence of an environment:
//! grid propagation, perturbative Lindblad kernels and quantum state
//! diffusion trajectories.

pub mod error;
pub mod grid;
pub mod model1;
pub mod model2;
pub mod potential;
pub mod qsd;
pub mod states;
pub mod quadrature;
pub mod timescales;
pub mod unitary;
pub mod wigner;

pub use error::{Error, Result};
pub use grid::{Moments, Representation, SpatialGrid, WaveFunction};
pub use potential::PotentialSpec;
pub use states::{gaussian_packet, qsd_steady_packet, PhysicalParams};
pub use wigner::{wigner_transform, PhaseSpaceField};
