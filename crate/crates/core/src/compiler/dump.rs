use serde_json::{json, Value};

use super::Quadruple;
use crate::distributions::IndicatorProduct;

fn guards(p: &IndicatorProduct) -> Value {
    Value::Array(p.guards.iter().map(|g| Value::String(g.to_string())).collect())
}

/// JSON form of a quadruple; expressions are prefix s-expressions.
pub fn to_json(q: &Quadruple) -> Value {
    json!({
        "delta": q.delta,
        "gamma": q.gamma,
        "D": q.d.iter().map(|p| json!({
            "guards": guards(&p.eta),
            "density": p.k.to_string(),
        })).collect::<Vec<_>>(),
        "F": q.f.iter().map(|t| json!({
            "guards": guards(&t.zeta),
            "density": t.l.to_string(),
            "value": t.v.to_string(),
        })).collect::<Vec<_>>(),
        "branchPredicates": q.branch_predicates.iter().map(|b| json!({
            "id": b.id,
            "predicate": b.predicate.to_string(),
        })).collect::<Vec<_>>(),
    })
}
