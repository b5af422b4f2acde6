use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};

use super::integrators::{dhmc_trajectory, kinetic, leapfrog, CoordinateStats, PermutationSource};
use super::{forward_sample_state, Engine, InferenceError, Potential, SamplerConfig};
use crate::compiler::CompiledProgram;
use crate::density::{BranchingVector, DensityError, Model};
use crate::Real;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepOutcome {
    pub accepted: bool,
    /// the trajectory hit a numerical error and was rejected
    pub failure: bool,
    /// the trajectory entered a zero-density region and was rejected
    pub left_support: bool,
    pub coordinate: CoordinateStats,
}

#[derive(Debug, Clone, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ChainStats {
    pub iterations: u64,
    pub accepted: u64,
    pub acceptance_rate: f64,
    /// iterations whose branching vector differs from the previous state's
    pub crossings: u64,
    pub numeric_failures: u64,
    pub support_exits: u64,
    pub coordinate: CoordinateStats,
    /// not serialized, so that stats files are reproducible
    #[serde(skip)]
    pub wall_clock_secs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainOutput<T> {
    /// coordinate names, sorted
    pub names: Vec<String>,
    /// retained samples, one coordinate vector each
    pub samples: Vec<Vec<T>>,
    /// branching vector of each retained sample, empty if the target has none
    pub branching: Vec<BranchingVector>,
    /// length of each branching vector
    pub branch_bits: usize,
    pub stats: ChainStats,
}

impl<T: Real> ChainOutput<T> {
    pub fn column(&self, name: &str) -> Option<Vec<T>> {
        let i = self.names.iter().position(|n| n == name)?;
        Some(self.samples.iter().map(|s| s[i]).collect())
    }
}

fn gaussian<T: Real, R: Rng + ?Sized>(rng: &mut R) -> T {
    T::lit(rng.sample::<f64, _>(StandardNormal))
}

fn laplace<T: Real, R: Rng + ?Sized>(rng: &mut R, mass: T) -> T {
    let e = T::lit(rng.sample::<f64, _>(Exp1)) / mass;
    if rng.random::<bool>() {
        e
    } else {
        -e
    }
}

fn metropolis<T: Real, R: Rng + ?Sized>(rng: &mut R, h0: T, h1: T) -> bool {
    let u: f64 = rng.random();
    let log_ratio = (h0 - h1).to_f64_lossy();
    !log_ratio.is_nan() && u < log_ratio.exp().min(1.0)
}

fn classify(e: &InferenceError, out: &mut StepOutcome) {
    match e {
        InferenceError::Density(DensityError::ZeroDensity) => out.left_support = true,
        _ => out.failure = true,
    }
}

/// One DHMC iteration from `x`, whose potential is `*u`. Both are updated
/// in place when the proposal is accepted.
#[allow(clippy::too_many_arguments)]
pub fn dhmc_step<T: Real, P: Potential<T> + ?Sized, R: Rng>(
    pot: &P,
    x: &mut Vec<T>,
    u: &mut T,
    continuous: &[usize],
    discontinuous: &[usize],
    masses: &[T],
    eps: T,
    steps: usize,
    rng: &mut R,
) -> StepOutcome {
    let mut p = vec![T::zero(); x.len()];
    for &a in continuous {
        p[a] = gaussian(rng);
    }
    for &b in discontinuous {
        p[b] = laplace(rng, masses[b]);
    }
    let h0 = *u + kinetic(&p, continuous, discontinuous, masses);
    let mut xn = x.clone();
    let mut out = StepOutcome::default();
    let traj =
        dhmc_trajectory(pot, &mut xn, &mut p, continuous, discontinuous, masses, eps, steps, PermutationSource::Random(rng), *u);
    let h1 = match traj {
        Ok(t) => {
            out.coordinate = t.stats;
            if t.potential == T::infinity() {
                out.left_support = true;
            }
            t.potential + kinetic(&p, continuous, discontinuous, masses)
        }
        Err(e) => {
            classify(&e, &mut out);
            T::infinity()
        }
    };
    out.accepted = metropolis(rng, h0, h1);
    if out.accepted {
        *x = xn;
        *u = h1 - kinetic(&p, continuous, discontinuous, masses);
    }
    out
}

/// One standard HMC iteration treating every coordinate as continuous.
pub fn hmc_step<T: Real, P: Potential<T> + ?Sized, R: Rng>(
    pot: &P,
    x: &mut Vec<T>,
    u: &mut T,
    eps: T,
    steps: usize,
    rng: &mut R,
) -> StepOutcome {
    let all: Vec<usize> = (0..x.len()).collect();
    let mut p: Vec<T> = all.iter().map(|_| gaussian(rng)).collect();
    let h0 = *u + kinetic(&p, &all, &[], &[]);
    let mut xn = x.clone();
    let mut out = StepOutcome::default();
    let run = (|| {
        for _ in 0..steps {
            leapfrog(pot, &mut xn, &mut p, &all, eps)?;
        }
        pot.potential(&xn)
    })();
    let u1 = match run {
        Ok(v) => {
            if v == T::infinity() {
                out.left_support = true;
            }
            v
        }
        Err(e) => {
            classify(&e, &mut out);
            T::infinity()
        }
    };
    let h1 = u1 + kinetic(&p, &all, &[], &[]);
    out.accepted = metropolis(rng, h0, h1);
    if out.accepted {
        *x = xn;
        *u = u1;
    }
    out
}

/// Runs `burn_in + num_samples` iterations from `x0` and keeps the last
/// `num_samples` states.
pub fn run_chain<T: Real, P: Potential<T> + ?Sized, R: Rng>(
    pot: &P,
    cfg: &SamplerConfig,
    x0: Vec<T>,
    rng: &mut R,
) -> Result<ChainOutput<T>, InferenceError> {
    cfg.validate()?;
    if x0.len() != pot.dim() {
        return Err(InferenceError::Config(format!("initial state has {} coordinates, expected {}", x0.len(), pot.dim())));
    }
    let masses = cfg.mass_vector(pot)?;
    let discontinuous = pot.discontinuous();
    let continuous: Vec<usize> = (0..pot.dim()).filter(|i| !discontinuous.contains(i)).collect();
    let eps = T::lit(cfg.epsilon);

    let mut x = x0;
    let mut u = pot.potential(&x)?;
    if u == T::infinity() {
        return Err(InferenceError::Init { attempts: 1, last: "initial state has zero density".into() });
    }
    let mut branch = pot.branching(&x);
    let start = Instant::now();
    let mut stats = ChainStats::default();
    let mut out = ChainOutput {
        names: (0..pot.dim()).map(|i| pot.name(i)).collect(),
        samples: Vec::with_capacity(cfg.num_samples),
        branching: Vec::new(),
        branch_bits: branch.as_ref().map_or(0, |b| b.bits.len()),
        stats: ChainStats::default(),
    };
    for it in 0..cfg.burn_in + cfg.num_samples {
        let step = match cfg.engine {
            Engine::Dhmc => dhmc_step(pot, &mut x, &mut u, &continuous, &discontinuous, &masses, eps, cfg.steps, rng),
            Engine::Hmc => hmc_step(pot, &mut x, &mut u, eps, cfg.steps, rng),
        };
        stats.iterations += 1;
        stats.accepted += step.accepted as u64;
        stats.numeric_failures += step.failure as u64;
        stats.support_exits += step.left_support as u64;
        stats.coordinate.merge(step.coordinate);
        if step.accepted {
            let b = pot.branching(&x);
            if b != branch {
                stats.crossings += 1;
                branch = b;
            }
        }
        if it >= cfg.burn_in {
            out.samples.push(x.clone());
            if let Some(b) = &branch {
                out.branching.push(b.clone());
            }
        }
    }
    stats.acceptance_rate = stats.accepted as f64 / stats.iterations.max(1) as f64;
    stats.wall_clock_secs = start.elapsed().as_secs_f64();
    out.stats = stats;
    Ok(out)
}

/// Initialises `compiled` by forward sampling and runs a
/// chain, all from `cfg.seed`.
pub fn sample_program(compiled: &CompiledProgram, cfg: &SamplerConfig) -> Result<ChainOutput<f64>, InferenceError> {
    let model = Model::new(&compiled.quadruple)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let x0 = forward_sample_state(compiled, &model, &mut rng)?;
    run_chain(&model, cfg, x0, &mut rng)
}
