mod common;

use std::collections::BTreeSet;

use lfppl::compiler::dump::to_json;
use lfppl::symbolic::parse_sym;

#[test]
fn fig1_matches_hand_derived_quadruple() {
    let c = common::fig1();
    assert_eq!(common::fig1_golden_mismatches(&c.quadruple), Vec::<String>::new());
    let (cont, disc) = c.quadruple.classify_variables();
    assert!(cont.is_empty());
    assert_eq!(disc.len(), 1);
}

#[test]
fn golden_matcher_detects_a_wrong_branch() {
    let swapped = common::compile(lfppl::harness::programs::FIG1, &[("q", 0.5), ("y", 2.0)]);
    assert!(!common::fig1_golden_mismatches(&swapped.quadruple).is_empty());
}

#[test]
fn fig1_without_constants_is_rejected() {
    let err = lfppl::compile_source(lfppl::harness::programs::FIG1, "fig1", &Default::default()).unwrap_err();
    assert_eq!(err.to_string(), "unbound variable 'q'");
}

#[test]
fn factor_observe_gives_one_triple() {
    let c = common::compile("(let [x (sample (uniform 0 1))] (observe (factor (- 0 x)) 0))", &[]);
    let q = &c.quadruple;
    assert_eq!(q.f.len(), 1);
    assert!(q.f[0].zeta.is_one());
    assert_eq!(q.f[0].l, parse_sym("(exp (- 0 z1))").unwrap());
    assert_eq!(q.f[0].v.to_string(), "0");
    let nonzero: Vec<_> = q.nonzero_d().collect();
    assert_eq!(nonzero.len(), 1);
    assert_eq!(nonzero[0].k, parse_sym("(uniform-pdf z1 0 1)").unwrap());
}

#[test]
fn op_rule_takes_cartesian_products() {
    let c = common::compile(
        "(let [a (sample (uniform 0 1)) b (sample (uniform 0 1))]
           (* (if (< (- a 0.3) 0) 1 (if (< (- a 0.6) 0) 2 3))
              5
              (if (< (- b 0.5) 0) 7 8)))",
        &[],
    );
    assert_eq!(c.quadruple.f.len(), 3 * 2);
}

#[test]
fn variable_classification() {
    let single = common::compile("(sample (normal 0 1))", &[]);
    let (cont, disc) = single.quadruple.classify_variables();
    assert_eq!(cont, BTreeSet::from(["z1".to_string()]));
    assert!(disc.is_empty());

    let g = common::gmm();
    let (cont, disc) = g.quadruple.classify_variables();
    assert_eq!(g.quadruple.delta.len(), 12);
    assert_eq!(disc.len(), 10);
    let mus: BTreeSet<String> = ["mu1", "mu2"].iter().map(|b| g.variable_for(b).unwrap().to_string()).collect();
    assert_eq!(cont, mus);
}

#[test]
fn fresh_names_avoid_user_identifiers() {
    let c = common::compile("(let [z1 (sample (normal 0 1)) z2 (sample (normal z1 1))] z2)", &[]);
    let user: BTreeSet<String> = ["z1", "z2"].iter().map(|s| s.to_string()).collect();
    assert!(c.quadruple.delta.is_disjoint(&user), "{:?}", c.quadruple.delta);
    assert_eq!(c.quadruple.delta.len(), 2);
}

#[test]
fn closedness_of_fixtures() {
    for (name, c, _, _) in common::fixtures() {
        let q = &c.quadruple;
        let mut vars = BTreeSet::new();
        for p in &q.d {
            p.k.collect_vars(&mut vars);
            for g in &p.eta.guards {
                g.expr.collect_vars(&mut vars);
            }
        }
        for t in &q.f {
            t.l.collect_vars(&mut vars);
            t.v.collect_vars(&mut vars);
            for g in &t.zeta.guards {
                g.expr.collect_vars(&mut vars);
            }
        }
        assert_eq!(vars, q.delta, "{name}");
    }
}

#[test]
fn adding_an_if_grows_gamma() {
    let base = common::compile("(let [x (sample (normal 0 1)) y (sample (normal x 1))] y)", &[]);
    assert!(base.quadruple.gamma.is_empty());
    let with_if = common::compile(
        "(let [x (sample (normal 0 1)) y (sample (normal x 1))] (if (< (- y 1) 0) y 0))",
        &[],
    );
    let y = with_if.variable_for("y").unwrap();
    assert!(with_if.quadruple.gamma.contains(y));
    assert!(with_if.quadruple.gamma.is_superset(&base.quadruple.gamma));
}

#[test]
fn json_dump_has_the_documented_fields() {
    let j = to_json(&common::fig1().quadruple);
    assert_eq!(j["delta"], serde_json::json!(["z1"]));
    assert_eq!(j["gamma"], serde_json::json!(["z1"]));
    assert_eq!(j["F"].as_array().unwrap().len(), 2);
    let nonzero = j["D"].as_array().unwrap().iter().filter(|p| p["density"] != "0").count();
    assert_eq!(nonzero, 2);
    assert_eq!(j["branchPredicates"][0]["predicate"], "(- 0.5 z1)");
    assert_eq!(j["F"][0]["value"], "(if (< (- 0.5 z1) 0) 1 0)");
}

#[test]
fn compiling_is_deterministic() {
    assert_eq!(to_json(&common::gmm().quadruple), to_json(&common::gmm().quadruple));
}
