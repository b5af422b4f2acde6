//! The ten acceptance criteria, one PASS/FAIL line each.
//!
//! Criteria listed in `DOCUMENTED_FAILURES` are expected not to hold and
//! are explained in the decisions log; they are still run and reported.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use lfppl::density::Model;
use lfppl::harness::diagnostics::ess;
use lfppl::harness::{run_gmm, run_heavytail, GmmSettings, HeavyTailSettings, Scale};
use lfppl::inference::{
    coordinatewise, dhmc_trajectory, forward_sample_state, kinetic, sample_program, Engine, PermutationSource,
    Potential, SamplerConfig,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};

const SEED: u64 = 1;
const DOCUMENTED_FAILURES: &[u32] = &[7];

type Check = fn() -> (bool, String);

fn laplace<R: Rng>(rng: &mut R) -> f64 {
    let e: f64 = rng.sample(Exp1);
    if rng.random::<bool>() {
        e
    } else {
        -e
    }
}

fn golden_compile() -> (bool, String) {
    let t = Instant::now();
    let c = common::fig1();
    let secs = t.elapsed().as_secs_f64();
    let problems = common::fig1_golden_mismatches(&c.quadruple);
    (problems.is_empty() && secs < 1.0, format!("{} mismatches, compiled in {secs:.3}s {problems:?}", problems.len()))
}

fn partition() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut parts = Vec::new();
    let mut total = 0;
    for (name, _, m, bounds) in common::fixtures() {
        let violations = (0..10_000)
            .filter(|_| m.active_counts(&common::random_point(&mut rng, &bounds)).unwrap() != (1, 1))
            .count();
        total += violations;
        parts.push(format!("{name} {violations}"));
    }
    (total == 0, format!("violations over 10^4 points: {}", parts.join(", ")))
}

fn gradients() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for (_, c, m, bounds) in common::fixtures() {
        let mut states = 0;
        while states < 100 {
            let x = common::random_point(&mut rng, &bounds);
            if m.log_density_at(&x).unwrap() == f64::NEG_INFINITY || common::min_guard_margin(&c, &m, &x) <= 1e-3 {
                continue;
            }
            // every coordinate, which includes all continuous ones
            let all: Vec<usize> = (0..m.dim()).collect();
            let mut g = vec![0.0; m.dim()];
            m.grad_log_density_at(&x, &all, &mut g).unwrap();
            for i in all {
                let h = 1e-6;
                let (mut up, mut down) = (x.clone(), x.clone());
                up[i] += h;
                down[i] -= h;
                let fd = (m.log_density_at(&up).unwrap() - m.log_density_at(&down).unwrap()) / (2.0 * h);
                worst = worst.max((g[i] - fd).abs() / fd.abs().max(1e-2));
                checked += 1;
            }
            states += 1;
        }
    }
    (worst <= 1e-5, format!("{checked} components on 300 states, worst relative error {worst:.2e}"))
}

fn energy_conservation() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut worst: f64 = 0.0;
    let (mut accepted, mut reflected) = (0, 0);
    let mut parts = Vec::new();
    let cases = [("two-level", common::two_level(), 0.0, 2.0, 0.1), ("heavy-tail", common::heavytail_dims(10), -6.0, 6.0, 0.3)];
    for (name, c, lo, hi, eps) in cases {
        let m = Model::new(&c.quadruple).unwrap();
        let dims = m.dim();
        let masses = vec![1.0; dims];
        let mut order: Vec<usize> = (0..dims).collect();
        let (a0, r0) = (accepted, reflected);
        for _ in 0..1000 {
            let mut x: Vec<f64> = (0..dims).map(|_| rng.random_range(lo..hi)).collect();
            let mut p: Vec<f64> = (0..dims).map(|_| laplace(&mut rng)).collect();
            order.shuffle(&mut rng);
            let u0: f64 = Potential::<f64>::potential(&m, &x).unwrap();
            let h0 = u0 + kinetic(&p, &[], &order, &masses);
            let (u1, s) = coordinatewise(&m, &mut x, &mut p, &order, &masses, eps, u0).unwrap();
            let h1 = u1 + kinetic(&p, &[], &order, &masses);
            worst = worst.max((h1 - h0).abs());
            accepted += s.accepted;
            reflected += s.reflected;
        }
        parts.push(format!("{name}: {} accepted, {} reflected", accepted - a0, reflected - r0));
    }
    (
        worst <= 1e-9 && accepted >= 100 && reflected >= 100,
        format!("max |dH| {worst:.2e}; {}", parts.join("; ")),
    )
}

fn reversibility() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for ((name, c, m, _), eps) in common::fixtures().into_iter().zip([0.05, 0.1, 0.3]) {
        let disc = Potential::<f64>::discontinuous(&m);
        let cont: Vec<usize> = (0..m.dim()).filter(|i| !disc.contains(i)).collect();
        let masses = vec![1.0; m.dim()];
        let mut trials = 0;
        for _ in 0..20 {
            let x0 = forward_sample_state(&c, &m, &mut rng).unwrap();
            let mut p: Vec<f64> = vec![0.0; m.dim()];
            for &a in &cont {
                p[a] = rng.sample(StandardNormal);
            }
            for &b in &disc {
                p[b] = laplace(&mut rng);
            }
            let mut x = x0.clone();
            let u0: f64 = Potential::<f64>::potential(&m, &x).unwrap();
            let fwd = dhmc_trajectory(&m, &mut x, &mut p, &cont, &disc, &masses, eps, 10, PermutationSource::Random(&mut rng), u0)
                .unwrap();
            if fwd.potential == f64::INFINITY {
                continue;
            }
            for v in &mut p {
                *v = -*v;
            }
            let back: Vec<Vec<usize>> =
                fwd.permutations.iter().rev().map(|o| o.iter().rev().copied().collect()).collect();
            dhmc_trajectory(&m, &mut x, &mut p, &cont, &disc, &masses, eps, 10, PermutationSource::Given(&back), fwd.potential)
                .unwrap();
            worst = x.iter().zip(&x0).map(|(a, b)| (a - b).abs()).fold(worst, f64::max);
            trials += 1;
        }
        parts.push(format!("{name} {trials} trajectories"));
    }
    (worst <= 1e-8, format!("max coordinate error {worst:.2e} ({})", parts.join(", ")))
}

fn reduction_to_hmc() -> (bool, String) {
    let c = common::compile("(let [a (sample (normal 0 1)) b (sample (normal a 1))] (observe (normal b 1) 0.5) b)", &[]);
    if !c.quadruple.gamma.is_empty() {
        return (false, "program unexpectedly has discontinuous variables".into());
    }
    let mut cfg = SamplerConfig::new(Engine::Dhmc, 0.2, 10);
    cfg.num_samples = 1000;
    cfg.burn_in = 0;
    cfg.seed = SEED;
    let d = sample_program(&c, &cfg).unwrap();
    cfg.engine = Engine::Hmc;
    let h = sample_program(&c, &cfg).unwrap();
    let worst = d
        .samples
        .iter()
        .zip(&h.samples)
        .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max);
    (worst <= 1e-12, format!("max difference over 10^3 steps {worst:.2e}, acceptance {:.3}", d.stats.acceptance_rate))
}

fn gmm() -> (bool, String) {
    let run = run_gmm(&GmmSettings::for_scale(Scale::Desk), SEED).unwrap();
    let r = &run.report;
    let means_ok = r.abs_errors.iter().all(|&e| e <= 0.05);
    let rises = r.windowed_mse.windows(2).filter(|w| w[1] > w[0]).count();
    (
        means_ok && r.mse_non_increasing,
        format!(
            "means ({:.4}, {:.4}) vs oracle ({:.4}, {:.4}), errors ({:.4}, {:.4}) within 0.05: {}; windowed MSE non-increasing: {} ({rises} of {} window steps rise); {:.0}s",
            r.posterior_means[0],
            r.posterior_means[1],
            r.reference.means[0],
            r.reference.means[1],
            r.abs_errors[0],
            r.abs_errors[1],
            means_ok,
            r.mse_non_increasing,
            r.windowed_mse.len().saturating_sub(1),
            r.stats.wall_clock_secs,
        ),
    )
}

fn heavytail() -> (bool, String) {
    let report = run_heavytail(&HeavyTailSettings::for_scale(Scale::Desk, 10), SEED).unwrap();
    let (d, h) = (&report.dhmc, &report.hmc);
    (
        d.median_wmae <= h.median_wmae && h.mean_acceptance < d.mean_acceptance,
        format!(
            "median WMAE dhmc {:.4} hmc {:.4}; mean acceptance dhmc {:.3} hmc {:.3}",
            d.median_wmae, h.median_wmae, d.mean_acceptance, h.mean_acceptance
        ),
    )
}

fn branch_posterior() -> (bool, String) {
    let c = common::fig1();
    let mut cfg = SamplerConfig::new(Engine::Dhmc, 0.05, 10);
    cfg.num_samples = 10_000;
    cfg.seed = SEED;
    let out = sample_program(&c, &cfg).unwrap();
    let empirical = out.branching.iter().filter(|b| b.bits[0]).count() as f64 / out.branching.len() as f64;
    let oracle = common::fig1_branch_posterior(0.5, 1.0);
    ((empirical - oracle).abs() <= 0.02, format!("empirical {empirical:.4}, quadrature {oracle:.4}"))
}

fn two_level() -> (bool, String) {
    let c = common::two_level();
    let mut cfg = SamplerConfig::new(Engine::Dhmc, 0.1, 10);
    cfg.num_samples = 100_000;
    cfg.seed = SEED;
    let out = sample_program(&c, &cfg).unwrap();
    let upper: Vec<f64> = out.samples.iter().map(|s| if s[0] >= 1.0 { 1.0 } else { 0.0 }).collect();
    let p = upper.iter().sum::<f64>() / upper.len() as f64;
    let ratio = p / (1.0 - p);
    let target = (-0.5f64).exp();
    // delta method on the ratio p / (1 - p)
    let se_p = (p * (1.0 - p) / ess(&upper)).sqrt();
    let se = se_p / ((1.0 - p) * (1.0 - p));
    ((ratio - target).abs() <= 3.0 * se, format!("ratio {ratio:.4} vs exp(-0.5) = {target:.4}, standard error {se:.4}"))
}

fn main() {
    let criteria: [(u32, &str, Check); 10] = [
        (1, "golden compile", golden_compile),
        (2, "partition property", partition),
        (3, "gradient oracle", gradients),
        (4, "coordinate-wise energy conservation", energy_conservation),
        (5, "integrator reversibility", reversibility),
        (6, "reduction to HMC", reduction_to_hmc),
        (7, "mixture model at desk scale", gmm),
        (8, "heavy-tail DHMC vs HMC", heavytail),
        (9, "branch posterior", branch_posterior),
        (10, "two-level stationarity", two_level),
    ];
    let mut unexpected = Vec::new();
    for (id, name, check) in criteria {
        let t = Instant::now();
        let (pass, detail) = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            (false, format!("panicked: {}", msg.unwrap_or_default()))
        });
        let status = match (pass, DOCUMENTED_FAILURES.contains(&id)) {
            (true, _) => "PASS",
            (false, true) => "FAIL (documented)",
            (false, false) => {
                unexpected.push(id);
                "FAIL"
            }
        };
        println!("criterion {id:>2} {name}: {status}: {detail} [{:.1}s]", t.elapsed().as_secs_f64());
    }
    if !unexpected.is_empty() {
        eprintln!("undocumented failures: {unexpected:?}");
        std::process::exit(1);
    }
}
