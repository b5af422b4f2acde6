use rand::Rng;

use super::InferenceError;
use crate::compiler::{prim_apply, CompiledProgram};
use crate::density::Model;
use crate::distributions::{forward_sample, schema_for};
use crate::parser::Expr;
use crate::symbolic::SymExpr;

pub const INIT_RETRIES: usize = 100;

struct Interpreter<'a, R: ?Sized> {
    compiled: &'a CompiledProgram,
    rng: &'a mut R,
    env: Vec<(String, f64)>,
    next_site: usize,
    draws: Vec<(usize, f64)>,
}

impl<R: Rng + ?Sized> Interpreter<'_, R> {
    /// Both arms of an `if` are evaluated so that sample sites are visited
    /// in the same order as the compiler assigned them.
    fn eval(&mut self, e: &Expr) -> Result<f64, String> {
        match e {
            Expr::Var(x) => self
                .env
                .iter()
                .rev()
                .find(|(n, _)| n == x)
                .map(|(_, v)| *v)
                .ok_or_else(|| format!("unbound variable '{x}'")),
            Expr::Const(c) => Ok(*c),
            Expr::PrimOp { op, args } => {
                let vs = args.iter().map(|a| self.eval(a).map(SymExpr::Lit)).collect::<Result<Vec<_>, _>>()?;
                prim_apply(*op, vs).eval_closed().map_err(|e| e.to_string())
            }
            Expr::If { pred, then, otherwise } => {
                let c = self.eval(pred)?;
                let t = self.eval(then)?;
                let o = self.eval(otherwise)?;
                Ok(if c < 0.0 { t } else { o })
            }
            Expr::Indicator(inner) => Ok(if self.eval(inner)? < 0.0 { 1.0 } else { 0.0 }),
            Expr::Let { var, def, body } => {
                let v = self.eval(def)?;
                self.env.push((var.clone(), v));
                let out = self.eval(body);
                self.env.pop();
                out
            }
            Expr::Sample { dist, args } => {
                let params = args.iter().map(|a| self.eval(a)).collect::<Result<Vec<_>, _>>()?;
                let v = forward_sample(schema_for(*dist), &params, self.rng).map_err(|e| e.to_string())?;
                let site = self.next_site;
                self.next_site += 1;
                self.draws.push((site, v));
                Ok(v)
            }
            Expr::Observe { args, .. } => {
                for a in args {
                    self.eval(a)?;
                }
                Ok(0.0)
            }
        }
    }
}

/// Draws an initial state from the prior by running the program forwards,
/// retrying until the state has positive density.
pub fn forward_sample_state<R: Rng + ?Sized>(
    compiled: &CompiledProgram,
    model: &Model,
    rng: &mut R,
) -> Result<Vec<f64>, InferenceError> {
    let mut last = String::new();
    for _ in 0..INIT_RETRIES {
        let mut it = Interpreter { compiled, rng: &mut *rng, env: Vec::new(), next_site: 0, draws: Vec::new() };
        if let Err(e) = it.eval(&compiled.program.root) {
            last = e;
            continue;
        }
        let mut x = vec![0.0; model.dim()];
        for &(site, v) in &it.draws {
            let name = &it.compiled.sites[site].name;
            if let Some(i) = model.index_of(name) {
                x[i] = v;
            }
        }
        match model.log_density_at(&x) {
            Ok(lp) if lp > f64::NEG_INFINITY => return Ok(x),
            Ok(_) => last = "initial state has zero density".into(),
            Err(e) => last = e.to_string(),
        }
    }
    Err(InferenceError::Init { attempts: INIT_RETRIES, last })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeMap;

    #[test]
    fn fig1_init_lies_in_support() {
        let consts = BTreeMap::from([("q".to_string(), 0.5), ("y".to_string(), 1.0)]);
        let c = crate::compile_source(include_str!("../../fixtures/fig1.lfppl"), "fig1", &consts).unwrap();
        let m = Model::new(&c.quadruple).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let x = forward_sample_state(&c, &m, &mut rng).unwrap();
            assert!((0.0..=1.0).contains(&x[0]));
        }
    }

    #[test]
    fn impossible_observation_fails() {
        let src = "(let [x (sample (uniform 0 1))] (observe (uniform 5 6) 0))";
        let c = crate::compile_source(src, "bad", &BTreeMap::new()).unwrap();
        let m = Model::new(&c.quadruple).unwrap();
        let err = forward_sample_state(&c, &m, &mut ChaCha8Rng::seed_from_u64(0)).unwrap_err();
        assert!(matches!(err, InferenceError::Init { attempts: INIT_RETRIES, .. }));
    }
}
