//! Catalytic branching random walks on `Z^d`: the Malthusian parameter,
//! the propagation front and an exact event-driven simulator.
//!
//! Numerical types are generic over [`scalar::Real`] and default to `f64`;
//! the `*32` aliases below name the single precision versions.

pub mod lattice_walk;
pub mod app;
pub mod config;
pub mod export;
pub mod front;
pub mod malthus;
pub mod linalg;
pub mod resolvent;
pub mod scalar;
pub mod simulate;
pub mod verify;

pub use front::{FrontModel, FrontSample, PointClass};
pub use lattice_walk::{JumpLaw, JumpModel, Marginal};
pub use malthus::{solve_malthusian, Catalyst, CatalyticSystem, MalthusSolution, OffspringLaw, SolverSettings};
pub use scalar::Real;
pub use simulate::{run_cbrw, Caps, SimulationTrace};

pub type JumpModel32 = JumpModel<f32>;
pub type CatalyticSystem32 = CatalyticSystem<f32>;
pub type FrontModel32 = FrontModel<f32>;
pub type SolverSettings32 = SolverSettings<f32>;
