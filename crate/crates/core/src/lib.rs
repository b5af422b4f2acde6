//! LF-PPL: a low-level, first-order probabilistic programming language for
//! models whose densities are piecewise smooth.
//!
//! The pipeline is
//!
//! 1. [`parser`]: tokenize, parse and desugar program text into a small core AST;
//! 2. [`compiler`]: translate the core AST into the quadruple `(Δ, Γ, D, F)`
//!    of sampled variables, discontinuous variables, sample-density pairs and
//!    observe-density triples;
//! 3. [`density`]: evaluate the piecewise-smooth unnormalised density, its
//!    gradient inside the active region, and the branching vector;
//! 4. [`inference`]: HMC and discontinuous HMC (Laplace momentum with a
//!    coordinate-wise integrator on the discontinuous variables);
//! 5. [`harness`]: diagnostics, reference posteriors and the bundled experiments.
//!
//! The numeric layers are generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar to `f64`, which is what the CLI uses.

pub mod compiler;
pub mod density;
pub mod distributions;
pub mod harness;
pub mod inference;
pub mod parser;
mod real;
pub mod symbolic;

pub use compiler::{compile, compile_source, CompiledProgram, Quadruple};
pub use inference::{sample_program, Engine, SamplerConfig};
pub use density::Model;
pub use real::Real;

pub type State64 = density::State<f64>;
pub type State32 = density::State<f32>;
pub type DensityReport64 = density::DensityReport<f64>;
pub type DensityReport32 = density::DensityReport<f32>;
pub type HamiltonianState64 = inference::HamiltonianState<f64>;
pub type ChainOutput64 = inference::ChainOutput<f64>;
pub type ChainOutput32 = inference::ChainOutput<f32>;
