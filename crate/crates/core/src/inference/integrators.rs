use rand::seq::SliceRandom;
use rand::RngCore;

use super::{InferenceError, Potential};
use crate::Real;

/// `Σ p_a²/2` over Gaussian coordinates plus `Σ m_b|p_b|` over Laplace ones.
pub fn kinetic<T: Real>(p: &[T], continuous: &[usize], discontinuous: &[usize], masses: &[T]) -> T {
    let half = T::lit(0.5);
    let gauss = continuous.iter().fold(T::zero(), |acc, &a| acc + half * p[a] * p[a]);
    discontinuous.iter().fold(gauss, |acc, &b| acc + masses[b] * p[b].abs())
}

fn kick<T: Real, P: Potential<T> + ?Sized>(
    pot: &P,
    x: &[T],
    p: &mut [T],
    coords: &[usize],
    step: T,
) -> Result<(), InferenceError> {
    let mut g = vec![T::zero(); coords.len()];
    pot.gradient(x, coords, &mut g)?;
    for (&a, ga) in coords.iter().zip(&g) {
        p[a] = p[a] - step * *ga;
    }
    Ok(())
}

fn drift<T: Real>(x: &mut [T], p: &[T], coords: &[usize], step: T) {
    for &a in coords {
        x[a] = x[a] + step * p[a];
    }
}

/// Half kick then half drift of the Gaussian coordinates.
pub fn half_step1<T: Real, P: Potential<T> + ?Sized>(
    pot: &P,
    x: &mut [T],
    p: &mut [T],
    coords: &[usize],
    eps: T,
) -> Result<(), InferenceError> {
    if coords.is_empty() {
        return Ok(());
    }
    let h = eps * T::lit(0.5);
    kick(pot, x, p, coords, h)?;
    drift(x, p, coords, h);
    Ok(())
}

/// Half drift then half kick of the Gaussian coordinates.
pub fn half_step2<T: Real, P: Potential<T> + ?Sized>(
    pot: &P,
    x: &mut [T],
    p: &mut [T],
    coords: &[usize],
    eps: T,
) -> Result<(), InferenceError> {
    if coords.is_empty() {
        return Ok(());
    }
    let h = eps * T::lit(0.5);
    drift(x, p, coords, h);
    kick(pot, x, p, coords, h)
}

/// One standard leapfrog step: half kick, full drift, half kick.
pub fn leapfrog<T: Real, P: Potential<T> + ?Sized>(
    pot: &P,
    x: &mut [T],
    p: &mut [T],
    coords: &[usize],
    eps: T,
) -> Result<(), InferenceError> {
    let h = eps * T::lit(0.5);
    kick(pot, x, p, coords, h)?;
    drift(x, p, coords, eps);
    kick(pot, x, p, coords, h)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct CoordinateStats {
    /// moves whose potential change was paid from kinetic energy
    pub accepted: u64,
    /// moves blocked by insufficient kinetic energy
    pub reflected: u64,
}

impl CoordinateStats {
    pub fn merge(&mut self, o: CoordinateStats) {
        self.accepted += o.accepted;
        self.reflected += o.reflected;
    }
}

/// Coordinate-wise Laplace-momentum update of `order`, in that order.
///
/// `u` is the potential at `x`; the potential at the final position is
/// returned. Each move changes `x_b` by exactly `ε·m_b·sign(p_b)` or flips
/// `p_b`, so the Hamiltonian is conserved up to rounding.
pub fn coordinatewise<T: Real, P: Potential<T> + ?Sized>(
    pot: &P,
    x: &mut [T],
    p: &mut [T],
    order: &[usize],
    masses: &[T],
    eps: T,
    mut u: T,
) -> Result<(T, CoordinateStats), InferenceError> {
    let mut stats = CoordinateStats::default();
    for &b in order {
        let m = masses[b];
        let sign = if p[b] < T::zero() { -T::one() } else { T::one() };
        let old = x[b];
        x[b] = old + eps * m * sign;
        let u_new = pot.potential(x)?;
        let du = u_new - u;
        if m * p[b].abs() > du {
            p[b] = sign * (p[b].abs() - du / m);
            u = u_new;
            stats.accepted += 1;
        } else {
            x[b] = old;
            p[b] = -p[b];
            stats.reflected += 1;
        }
    }
    Ok((u, stats))
}

/// Where the coordinate-wise update order of each step comes from.
pub enum PermutationSource<'a> {
    /// Fresh uniform permutation per step.
    Random(&'a mut dyn RngCore),
    /// One explicit order per step, for replaying a trajectory.
    Given(&'a [Vec<usize>]),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    /// potential at the end point; `+inf` if the trajectory left the support
    pub potential: T,
    pub permutations: Vec<Vec<usize>>,
    pub stats: CoordinateStats,
}

/// `steps` DHMC integrator steps: half step on the Gaussian coordinates,
/// coordinate-wise update of the Laplace ones, half step again.
#[allow(clippy::too_many_arguments)]
pub fn dhmc_trajectory<T: Real, P: Potential<T> + ?Sized>(
    pot: &P,
    x: &mut [T],
    p: &mut [T],
    continuous: &[usize],
    discontinuous: &[usize],
    masses: &[T],
    eps: T,
    steps: usize,
    mut perms: PermutationSource<'_>,
    u0: T,
) -> Result<Trajectory<T>, InferenceError> {
    let mut out = Trajectory { potential: u0, permutations: Vec::with_capacity(steps), stats: CoordinateStats::default() };
    let mut u = u0;
    for step in 0..steps {
        half_step1(pot, x, p, continuous, eps)?;
        if !continuous.is_empty() {
            u = pot.potential(x)?;
            if u == T::infinity() {
                out.potential = u;
                return Ok(out);
            }
        }
        let order = match &mut perms {
            PermutationSource::Random(rng) => {
                let mut o = discontinuous.to_vec();
                o.shuffle(rng);
                o
            }
            PermutationSource::Given(all) => all
                .get(step)
                .cloned()
                .ok_or_else(|| InferenceError::Config(format!("no permutation given for step {step}")))?,
        };
        let (u_new, s) = coordinatewise(pot, x, p, &order, masses, eps, u)?;
        u = u_new;
        out.stats.merge(s);
        out.permutations.push(order);
        half_step2(pot, x, p, continuous, eps)?;
    }
    if !continuous.is_empty() {
        u = pot.potential(x)?;
    }
    out.potential = u;
    Ok(out)
}
