//! Risk-sensitive escape-time control for re-entrant line queueing networks.
//!
//! The crate covers both sides of the small-noise limit:
//!
//! * [`dpe`] solves the prelimit problem `V^n(x) = -(1/n) log inf E_x e^{-n c sigma^n}`
//!   on the lattice `G^n` by uniformized value iteration;
//! * [`game`] holds the limiting differential game: running cost,
//!   Hamiltonian, the Isaacs grid oracle and the explicit competing-queues
//!   value `V(x) = min_i alpha_i (z_i - x_i)`;
//! * [`skorokhod`] implements the reflection map and constrained dynamics
//!   shared by both;
//! * [`mc`] estimates the prelimit cost by simulating the jump process.
//!
//! All numerics are generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar to `f64`, with `*32` variants for `f32`.

// `!(x > 0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod converge;
pub mod dpe;
pub mod error;
pub mod game;
pub mod mc;
pub mod network;
pub mod rng;
pub mod scalar;
pub mod skorokhod;

pub use config::{ConfigError, DomainConfig, ModelConfig};
pub use error::{DomainError, DpeError, GameError, PathError, SimError, Violation};
pub use network::{
    control_vertices, enumerate_lattice, validate_model, BoundaryClass, ControlVector, Domain, DomainShape, Lattice,
    NetworkModel, RatePerturbation,
};
pub use scalar::Real;

pub type Model = network::NetworkModel<f64>;
pub type Region = network::Domain<f64>;
pub type Control = network::ControlVector<f64>;
pub type Rates = network::RatePerturbation<f64>;
pub type SamplePath = skorokhod::Path<f64>;
pub type Field = dpe::LatticeField<f64>;
pub type Solution = dpe::DpeSolution<f64>;
pub type CompetingValue = game::ClosedFormValue<f64>;
pub type RiskEstimate = mc::Estimate<f64>;

pub type Model32 = network::NetworkModel<f32>;
pub type Region32 = network::Domain<f32>;
pub type SamplePath32 = skorokhod::Path<f32>;
pub type Field32 = dpe::LatticeField<f32>;
pub type CompetingValue32 = game::ClosedFormValue<f32>;
