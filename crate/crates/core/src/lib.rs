//! Measurement-based quantum computing: a command language, a rewriting
//! engine, weak and strong simulators, a circuit compiler and a distributed
//! runner.

pub mod compiler;
pub mod corpus;
pub mod distributed;
pub mod ir;
pub mod kernel;
pub mod rewrite;
pub mod rng;
pub mod scalar;
pub mod simulator;

pub use ir::{Angle, Basis, Command, Program, Qubit, Signal};
pub use scalar::Real;

pub type C64 = num_complex::Complex64;
pub type StateVector = kernel::StateVector<f64>;
pub type DensityMatrix = kernel::DensityMatrix<f64>;
pub type SimState = simulator::SimState<f64>;
pub type StrongResult = simulator::StrongResult<f64>;
pub type WeakResult = simulator::WeakResult<f64>;
