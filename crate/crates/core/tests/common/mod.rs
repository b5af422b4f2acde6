#![allow(dead_code)]

use std::collections::BTreeMap;

use lfppl::density::{eval_sym, Model, State};
use lfppl::harness::programs;
use lfppl::CompiledProgram;
use rand::Rng;

pub fn consts(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

pub fn compile(src: &str, pairs: &[(&str, f64)]) -> CompiledProgram {
    lfppl::compile_source(src, "test", &consts(pairs)).expect("fixture compiles")
}

pub fn fig1() -> CompiledProgram {
    compile(programs::FIG1, &[("q", 0.5), ("y", 1.0)])
}

pub fn gmm() -> CompiledProgram {
    compile(programs::GMM, &[])
}

pub fn heavytail() -> CompiledProgram {
    compile(programs::HEAVYTAIL_1D, &[("A", 1.0)])
}

pub fn heavytail_dims(dims: usize) -> CompiledProgram {
    compile(&programs::heavytail_source(dims, None).unwrap(), &[])
}

pub fn two_level() -> CompiledProgram {
    compile(programs::TWO_LEVEL, &[])
}

/// The three fixture programs with a box covering each variable's support.
pub fn fixtures() -> Vec<(&'static str, CompiledProgram, Model, Vec<(f64, f64)>)> {
    let mut out = Vec::new();
    for (name, c) in [("fig1", fig1()), ("gmm", gmm()), ("heavytail", heavytail())] {
        let m = Model::new(&c.quadruple).unwrap();
        let gamma = &c.quadruple.gamma;
        let bounds = m
            .names()
            .iter()
            .map(|n| match name {
                "heavytail" => (-8.0, 8.0),
                "gmm" if !gamma.contains(n) => (-8.0, 8.0),
                _ => (-0.5, 1.5),
            })
            .collect();
        out.push((name, c, m, bounds));
    }
    out
}

pub fn random_point<R: Rng>(rng: &mut R, bounds: &[(f64, f64)]) -> Vec<f64> {
    bounds.iter().map(|&(lo, hi)| rng.random_range(lo..hi)).collect()
}

/// Smallest absolute value of any guard expression of `c` at `x`.
pub fn min_guard_margin(c: &CompiledProgram, m: &Model, x: &[f64]) -> f64 {
    let s: State<f64> = m.to_state(x);
    let d = c.quadruple.d.iter().flat_map(|p| p.eta.guards.iter());
    let f = c.quadruple.f.iter().flat_map(|t| t.zeta.guards.iter());
    d.chain(f).map(|g| eval_sym(&g.expr, &s).unwrap().abs()).fold(f64::INFINITY, f64::min)
}

/// Posterior probability that `x > q` for `x ~ U(0,1)` with likelihood
/// `N(y; 1, 1)` above `q` and `N(y; 0, 1)` below, by midpoint quadrature.
pub fn fig1_branch_posterior(q: f64, y: f64) -> f64 {
    let n = 100_000;
    let pdf = |m: f64| (-(y - m) * (y - m) / 2.0).exp();
    let (mut above, mut total) = (0.0, 0.0);
    for i in 0..n {
        let x = (i as f64 + 0.5) / n as f64;
        let w = if x > q { pdf(1.0) } else { pdf(0.0) };
        total += w;
        if x > q {
            above += w;
        }
    }
    above / total
}

/// Differences between a compiled fig1 quadruple (`q = 0.5`,
/// `y = 1`) and the hand-derived one, after renaming its single sampled
/// variable to `z`. Zero-density pairs are ignored; order is not.
pub fn fig1_golden_mismatches(q: &lfppl::Quadruple) -> Vec<String> {
    use lfppl::symbolic::{parse_sym, SymExpr};
    let mut problems = Vec::new();
    if q.delta.len() != 1 || q.gamma != q.delta {
        problems.push(format!("expected one sampled variable in both sets, got {:?} / {:?}", q.delta, q.gamma));
        return problems;
    }
    let z = q.delta.iter().next().unwrap().clone();
    let canon = |e: &SymExpr| e.substitute(&z, &SymExpr::var("z")).to_string();
    let canon_guards = |gs: &[lfppl::distributions::Guard]| {
        let mut v: Vec<String> =
            gs.iter().map(|g| lfppl::distributions::Guard { expr: parse_sym(&canon(&g.expr)).unwrap(), relation: g.relation }.to_string()).collect();
        v.sort();
        v
    };
    let sorted = |v: &[&str]| {
        let mut v: Vec<String> = v.iter().map(|s| s.to_string()).collect();
        v.sort();
        v
    };

    let mut got_d: Vec<(Vec<String>, String)> =
        q.nonzero_d().map(|p| (canon_guards(&p.eta.guards), canon(&p.k))).collect();
    let mut want_d = vec![
        (sorted(&["(>= z 0)", "(>= (- 1 z) 0)", "(< (- 0.5 z) 0)"]), "(uniform-pdf z 0 1)".to_string()),
        (sorted(&["(>= z 0)", "(>= (- 1 z) 0)", "(>= (- 0.5 z) 0)"]), "(uniform-pdf z 0 1)".to_string()),
    ];
    got_d.sort();
    want_d.sort();
    if got_d != want_d {
        problems.push(format!("D: got {got_d:?}, want {want_d:?}"));
    }

    let value = "(if (< (- 0.5 z) 0) 1 0)".to_string();
    let mut got_f: Vec<(Vec<String>, String, String)> =
        q.f.iter().map(|t| (canon_guards(&t.zeta.guards), canon(&t.l), canon(&t.v))).collect();
    let mut want_f = vec![
        (sorted(&["(< (- 0.5 z) 0)"]), "(normal-pdf 1 1 1)".to_string(), value.clone()),
        (sorted(&["(>= (- 0.5 z) 0)"]), "(normal-pdf 1 0 1)".to_string(), value),
    ];
    got_f.sort();
    want_f.sort();
    if got_f != want_f {
        problems.push(format!("F: got {got_f:?}, want {want_f:?}"));
    }
    problems
}
