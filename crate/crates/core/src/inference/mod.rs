//! Hamiltonian Monte Carlo and discontinuous HMC.
//!
//! Continuous coordinates (`Δ \ Γ`) carry Gaussian momentum and are moved by
//! leapfrog half steps; discontinuous coordinates (`Γ`) carry Laplace
//! momentum with kinetic energy `m|p|` and are moved one at a time by steps
//! of exactly `ε·m`, paying for potential increases out of kinetic energy or
//! reflecting when they cannot.

mod chain;
mod init;
mod integrators;

use std::collections::BTreeMap;

use crate::density::{BranchingVector, DensityError, Model};
use crate::Real;

pub use chain::{
    dhmc_step, hmc_step, run_chain, sample_program, ChainOutput, ChainStats, StepOutcome,
};
pub use init::{forward_sample_state, INIT_RETRIES};
pub use integrators::{
    coordinatewise, dhmc_trajectory, half_step1, half_step2, kinetic, leapfrog, CoordinateStats,
    PermutationSource, Trajectory,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum InferenceError {
    #[error(transparent)]
    Density(#[from] DensityError),
    #[error("potential is NaN")]
    NaN,
    #[error("invalid sampler configuration: {0}")]
    Config(String),
    #[error("initialisation failed after {attempts} attempts: {last}")]
    Init { attempts: usize, last: String },
}

/// Potential energy `U = -log density` over a coordinate vector.
pub trait Potential<T: Real> {
    fn dim(&self) -> usize;

    /// `+inf` in zero-density regions.
    fn potential(&self, x: &[T]) -> Result<T, InferenceError>;

    /// `∂U/∂x_i` for each `i` in `coords`, written to `out`.
    fn gradient(&self, x: &[T], coords: &[usize], out: &mut [T]) -> Result<(), InferenceError>;

    /// Coordinates handled by the coordinate-wise integrator.
    fn discontinuous(&self) -> Vec<usize> {
        Vec::new()
    }

    fn name(&self, i: usize) -> String {
        format!("x{i}")
    }

    fn branching(&self, _x: &[T]) -> Option<BranchingVector> {
        None
    }
}

impl<T: Real> Potential<T> for Model {
    fn dim(&self) -> usize {
        Model::dim(self)
    }

    fn potential(&self, x: &[T]) -> Result<T, InferenceError> {
        let lp = self.log_density_at(x)?;
        if lp.is_nan() {
            return Err(InferenceError::NaN);
        }
        Ok(-lp)
    }

    fn gradient(&self, x: &[T], coords: &[usize], out: &mut [T]) -> Result<(), InferenceError> {
        self.grad_log_density_at(x, coords, out)?;
        for o in out.iter_mut() {
            *o = -*o;
        }
        Ok(())
    }

    fn discontinuous(&self) -> Vec<usize> {
        Model::discontinuous(self).to_vec()
    }

    fn name(&self, i: usize) -> String {
        self.names()[i].clone()
    }

    fn branching(&self, x: &[T]) -> Option<BranchingVector> {
        self.branching_at(x).ok()
    }
}

/// A potential given by closures, for synthetic targets.
pub struct FnPotential<U, G> {
    pub dim: usize,
    pub discontinuous: Vec<usize>,
    pub potential: U,
    pub gradient: G,
}

impl<T, U, G> Potential<T> for FnPotential<U, G>
where
    T: Real,
    U: Fn(&[T]) -> T,
    G: Fn(&[T], usize) -> T,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn potential(&self, x: &[T]) -> Result<T, InferenceError> {
        let u = (self.potential)(x);
        if u.is_nan() {
            return Err(InferenceError::NaN);
        }
        Ok(u)
    }

    fn gradient(&self, x: &[T], coords: &[usize], out: &mut [T]) -> Result<(), InferenceError> {
        for (o, &i) in out.iter_mut().zip(coords) {
            *o = (self.gradient)(x, i);
        }
        Ok(())
    }

    fn discontinuous(&self) -> Vec<usize> {
        self.discontinuous.clone()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Hmc,
    Dhmc,
}

impl std::str::FromStr for Engine {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "hmc" => Ok(Engine::Hmc),
            "dhmc" => Ok(Engine::Dhmc),
            other => Err(format!("unknown engine '{other}' (expected hmc or dhmc)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SamplerConfig {
    pub engine: Engine,
    pub epsilon: f64,
    /// leapfrog steps per iteration
    pub steps: usize,
    pub num_samples: usize,
    pub burn_in: usize,
    pub seed: u64,
    /// per-variable masses for the coordinate-wise integrator, default 1
    pub masses: BTreeMap<String, f64>,
}

impl SamplerConfig {
    pub fn new(engine: Engine, epsilon: f64, steps: usize) -> Self {
        SamplerConfig { engine, epsilon, steps, num_samples: 1000, burn_in: 100, seed: 0, masses: BTreeMap::new() }
    }

    pub fn validate(&self) -> Result<(), InferenceError> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(InferenceError::Config(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if self.steps == 0 {
            return Err(InferenceError::Config("steps must be at least 1".into()));
        }
        if let Some((n, m)) = self.masses.iter().find(|(_, m)| !(**m > 0.0 && m.is_finite())) {
            return Err(InferenceError::Config(format!("mass for '{n}' must be positive, got {m}")));
        }
        Ok(())
    }

    /// Mass per coordinate of `pot`.
    pub fn mass_vector<T: Real, P: Potential<T> + ?Sized>(&self, pot: &P) -> Result<Vec<T>, InferenceError> {
        let names: Vec<String> = (0..pot.dim()).map(|i| pot.name(i)).collect();
        if let Some(unknown) = self.masses.keys().find(|k| !names.contains(k)) {
            return Err(InferenceError::Config(format!("mass given for unknown variable '{unknown}'")));
        }
        Ok(names.iter().map(|n| T::lit(self.masses.get(n).copied().unwrap_or(1.0))).collect())
    }
}

/// Position, momentum and the two energies.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianState<T> {
    pub x: Vec<T>,
    pub p: Vec<T>,
    pub potential: T,
    pub kinetic: T,
}

impl<T: Real> HamiltonianState<T> {
    pub fn hamiltonian(&self) -> T {
        self.potential + self.kinetic
    }
}
