//! Sugared AST → core AST.
//!
//! Rewrites handled here:
//! * multi-binding / multi-body `let` → nested single lets (extra body forms
//!   are bound to fresh throwaway names);
//! * `max`, `min`, `abs` → `if`;
//! * comparisons `(< a b)`, `(> a b)`, `(<= a b)`, `(>= a b)` → `(< e 0)`;
//! * `vector` / bracket literals bound by `let`, consumed by `nth` with a
//!   constant index or by `categorical`;
//! * `categorical` and `bernoulli` → a uniform draw plus nested `if`s;
//! * `observe` of discrete distributions → `factor` with a constant log-weight.

use std::collections::{BTreeMap, BTreeSet};

use super::ast::{CoreDist, DistCall, DistName, Expr, PrimOp, Sugar};
use super::{ParseError, ParseErrorKind};

/// Tolerance on categorical weights summing to one.
pub const CATEGORICAL_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone)]
enum Binding {
    /// Name replaced by a literal everywhere (external constants).
    Substitute(f64),
    /// Let-bound literal; the let is kept, the value is visible to
    /// positions that need a constant (observed values, indices).
    Const(f64),
    Vector(Vec<Expr>),
    Opaque,
}

struct Desugarer {
    env: Vec<(String, Binding)>,
    taken: BTreeSet<String>,
}

fn sugar_identifiers(s: &Sugar, out: &mut BTreeSet<String>) {
    match s {
        Sugar::Var(v) => {
            out.insert(v.clone());
        }
        Sugar::Const(_) => {}
        Sugar::Call { args, .. } | Sugar::Vector(args) => {
            args.iter().for_each(|a| sugar_identifiers(a, out))
        }
        Sugar::If { pred, then, otherwise } => {
            sugar_identifiers(pred, out);
            sugar_identifiers(then, out);
            sugar_identifiers(otherwise, out);
        }
        Sugar::Let { bindings, body } => {
            for (n, d) in bindings {
                out.insert(n.clone());
                sugar_identifiers(d, out);
            }
            body.iter().for_each(|b| sugar_identifiers(b, out));
        }
        Sugar::Sample(d) => d.args.iter().for_each(|a| sugar_identifiers(a, out)),
        Sugar::Observe { dist, observed } => {
            dist.args.iter().for_each(|a| sugar_identifiers(a, out));
            sugar_identifiers(observed, out);
        }
    }
}

fn is_stochastic(e: &Expr) -> bool {
    match e {
        Expr::Var(_) | Expr::Const(_) => false,
        Expr::Sample { .. } | Expr::Observe { .. } => true,
        Expr::PrimOp { args, .. } => args.iter().any(is_stochastic),
        Expr::If { pred, then, otherwise } => {
            is_stochastic(pred) || is_stochastic(then) || is_stochastic(otherwise)
        }
        Expr::Indicator(e) => is_stochastic(e),
        Expr::Let { def, body, .. } => is_stochastic(def) || is_stochastic(body),
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    Expr::op(PrimOp::Sub, vec![a, b])
}

fn neg(a: Expr) -> Expr {
    Expr::op(PrimOp::Sub, vec![a])
}

/// A comparison normalised to `pred < 0`, possibly negated.
struct Comparison {
    pred: Expr,
    negated: bool,
}

impl Desugarer {
    fn lookup(&self, name: &str) -> Option<&Binding> {
        self.env.iter().rev().find(|(n, _)| n == name).map(|(_, b)| b)
    }

    fn fresh(&mut self, base: &str) -> String {
        let mut candidate = base.to_string();
        let mut n = 1;
        while self.taken.contains(&candidate) {
            candidate = format!("{base}{n}");
            n += 1;
        }
        self.taken.insert(candidate.clone());
        candidate
    }

    fn push(&mut self, name: &str, binding: Binding) -> Result<(), ParseError> {
        for (vname, b) in &self.env {
            if let Binding::Vector(items) = b {
                if items.iter().any(|e| e.free_vars().iter().any(|v| v == name)) {
                    return Err(ParseError::unsupported(format!(
                        "binding '{name}' shadows a variable used by vector '{vname}'"
                    )));
                }
            }
        }
        self.env.push((name.to_string(), binding));
        Ok(())
    }

    /// Evaluate an expression built only from literals, arithmetic and
    /// constant bindings.
    fn fold(&self, e: &Expr) -> Option<f64> {
        match e {
            Expr::Const(c) => Some(*c),
            Expr::Var(v) => match self.lookup(v) {
                Some(Binding::Const(c) | Binding::Substitute(c)) => Some(*c),
                _ => None,
            },
            Expr::PrimOp { op, args } => {
                let vals = args.iter().map(|a| self.fold(a)).collect::<Option<Vec<_>>>()?;
                let r = match (op, vals.as_slice()) {
                    (PrimOp::Sub, [a]) => -a,
                    (PrimOp::Sub, [a, rest @ ..]) => rest.iter().fold(*a, |acc, b| acc - b),
                    (PrimOp::Add, v) => v.iter().sum(),
                    (PrimOp::Mul, v) => v.iter().product(),
                    (PrimOp::Div, [a, b]) => a / b,
                    (PrimOp::Exp, [a]) => a.exp(),
                    (PrimOp::Log, [a]) => a.ln(),
                    (PrimOp::Sqrt, [a]) => a.sqrt(),
                    _ => return None,
                };
                r.is_finite().then_some(r)
            }
            _ => None,
        }
    }

    fn constant(&mut self, s: &Sugar, what: &str) -> Result<f64, ParseError> {
        let e = self.expr(s)?;
        if let Some(v) = e.free_vars().into_iter().find(|v| self.lookup(v).is_none()) {
            return Err(ParseError {
                kind: ParseErrorKind::UnboundVariable,
                message: format!("unbound variable '{v}'"),
                position: None,
            });
        }
        self.fold(&e).ok_or_else(|| {
            ParseError::validation(format!("{what} must be a constant, found {s}"))
        })
    }

    fn vector_items(&mut self, s: &Sugar) -> Result<Vec<Expr>, ParseError> {
        match s {
            Sugar::Vector(items) => self.deterministic_items(items),
            Sugar::Call { op, args } if op == "vector" => self.deterministic_items(args),
            Sugar::Var(v) => match self.lookup(v) {
                Some(Binding::Vector(items)) => Ok(items.clone()),
                _ => Err(ParseError::validation(format!("'{v}' is not bound to a vector"))),
            },
            other => Err(ParseError::unsupported(format!(
                "expected a literal vector or a let-bound vector name, found {other}"
            ))),
        }
    }

    fn deterministic_items(&mut self, items: &[Sugar]) -> Result<Vec<Expr>, ParseError> {
        let items = items.iter().map(|i| self.expr(i)).collect::<Result<Vec<_>, _>>()?;
        if items.iter().any(is_stochastic) {
            return Err(ParseError::unsupported("vector elements may not contain sample or observe"));
        }
        Ok(items)
    }

    fn categorical_weights(&mut self, arg: &Sugar) -> Result<Vec<f64>, ParseError> {
        let items = self.vector_items(arg)?;
        let weights = items
            .iter()
            .map(|e| {
                self.fold(e).ok_or_else(|| {
                    ParseError::validation(format!("categorical weight {e} is not a constant"))
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        if weights.is_empty() || weights.iter().any(|w| *w < 0.0) {
            return Err(ParseError::validation("categorical weights must be non-empty and non-negative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > CATEGORICAL_SUM_TOLERANCE {
            return Err(ParseError::validation(format!(
                "categorical weights sum to {total}, expected 1"
            )));
        }
        Ok(weights)
    }

    fn comparison(&mut self, s: &Sugar) -> Result<Option<Comparison>, ParseError> {
        let Sugar::Call { op, args } = s else { return Ok(None) };
        let flip = match op.as_str() {
            "<" => false,
            ">" => true,
            "<=" => true,
            ">=" => false,
            _ => return Ok(None),
        };
        let negated = matches!(op.as_str(), "<=" | ">=");
        let (a, b) = (self.expr(&args[0])?, self.expr(&args[1])?);
        let (lhs, rhs) = if flip { (b, a) } else { (a, b) };
        let pred = match rhs {
            Expr::Const(c) if c == 0.0 => lhs,
            rhs => sub(lhs, rhs),
        };
        Ok(Some(Comparison { pred, negated }))
    }

    fn uniform_draw() -> Expr {
        Expr::Sample { dist: CoreDist::Uniform, args: vec![Expr::Const(0.0), Expr::Const(1.0)] }
    }

    fn sample(&mut self, d: &DistCall) -> Result<Expr, ParseError> {
        match d.name {
            DistName::Normal | DistName::Uniform => {
                let dist = if d.name == DistName::Normal { CoreDist::Normal } else { CoreDist::Uniform };
                let args = d.args.iter().map(|a| self.expr(a)).collect::<Result<_, _>>()?;
                Ok(Expr::Sample { dist, args })
            }
            DistName::Factor => Err(ParseError::syntax("factor only valid under observe", None)),
            DistName::Categorical => {
                let weights = self.categorical_weights(&d.args[0])?;
                let u = self.fresh("u");
                // code k (1-based) when u < p1 + ... + pk
                let k = weights.len();
                let mut body = Expr::Const(k as f64);
                let mut cumulative: Vec<f64> = weights
                    .iter()
                    .scan(0.0, |acc, w| {
                        *acc += w;
                        Some(*acc)
                    })
                    .collect();
                cumulative.pop();
                for (i, c) in cumulative.iter().enumerate().rev() {
                    body = Expr::if_neg(
                        sub(Expr::var(&u), Expr::Const(*c)),
                        Expr::Const((i + 1) as f64),
                        body,
                    );
                }
                Ok(Expr::let_in(u, Self::uniform_draw(), body))
            }
            DistName::Bernoulli => {
                let p = self.expr(&d.args[0])?;
                if is_stochastic(&p) {
                    return Err(ParseError::unsupported("bernoulli parameter may not contain sample or observe"));
                }
                let threshold = match self.fold(&p) {
                    Some(p) if !(0.0..=1.0).contains(&p) => {
                        return Err(ParseError::validation(format!("bernoulli probability {p} outside [0, 1]")))
                    }
                    Some(p) => Expr::Const(1.0 - p),
                    None => sub(Expr::Const(1.0), p),
                };
                let u = self.fresh("u");
                let body = Expr::if_neg(sub(Expr::var(&u), threshold), Expr::Const(0.0), Expr::Const(1.0));
                Ok(Expr::let_in(u, Self::uniform_draw(), body))
            }
        }
    }

    fn observe(&mut self, d: &DistCall, observed: &Sugar) -> Result<Expr, ParseError> {
        let factor = |log_weight: Expr| Expr::Observe {
            dist: CoreDist::Factor,
            args: vec![log_weight],
            observed: 0.0,
        };
        match d.name {
            DistName::Factor => {
                let observed = match observed {
                    Sugar::Var(v) if v == "_" => 0.0,
                    other => self.constant(other, "observed value")?,
                };
                let args = vec![self.expr(&d.args[0])?];
                Ok(Expr::Observe { dist: CoreDist::Factor, args, observed })
            }
            DistName::Normal | DistName::Uniform => {
                let dist = if d.name == DistName::Normal { CoreDist::Normal } else { CoreDist::Uniform };
                let observed = self.constant(observed, "observed value")?;
                let args = d.args.iter().map(|a| self.expr(a)).collect::<Result<_, _>>()?;
                Ok(Expr::Observe { dist, args, observed })
            }
            DistName::Categorical => {
                let weights = self.categorical_weights(&d.args[0])?;
                let c = self.constant(observed, "observed value")?;
                let idx = c as usize;
                if c.fract() != 0.0 || idx < 1 || idx > weights.len() {
                    return Err(ParseError::validation(format!(
                        "observed category {c} outside 1..={}",
                        weights.len()
                    )));
                }
                Ok(factor(Expr::Const(weights[idx - 1].ln())))
            }
            DistName::Bernoulli => {
                let c = self.constant(observed, "observed value")?;
                let p = self.expr(&d.args[0])?;
                let weight = match c {
                    c if c == 1.0 => p,
                    c if c == 0.0 => sub(Expr::Const(1.0), p),
                    other => {
                        return Err(ParseError::validation(format!(
                            "observed bernoulli value {other} is not 0 or 1"
                        )))
                    }
                };
                let log_weight = match self.fold(&weight) {
                    Some(w) => Expr::Const(w.ln()),
                    None => Expr::op(PrimOp::Log, vec![weight]),
                };
                Ok(factor(log_weight))
            }
        }
    }

    fn let_form(&mut self, bindings: &[(String, Sugar)], body: &[Sugar]) -> Result<Expr, ParseError> {
        let mark = self.env.len();
        let mut lets: Vec<(String, Expr)> = Vec::new();
        for (name, def) in bindings {
            let is_vector = matches!(def, Sugar::Vector(_))
                || matches!(def, Sugar::Call { op, .. } if op == "vector");
            if is_vector {
                let items = self.vector_items(def)?;
                self.push(name, Binding::Vector(items))?;
                continue;
            }
            let def = self.expr(def)?;
            let binding = match def {
                Expr::Const(c) => Binding::Const(c),
                _ => Binding::Opaque,
            };
            self.push(name, binding)?;
            lets.push((name.clone(), def));
        }

        let throwaway_base = format!("{}_", bindings.last().map(|(n, _)| n.as_str()).unwrap_or("x"));
        let mut forms = Vec::with_capacity(body.len());
        for b in body {
            forms.push(self.expr(b)?);
        }
        let mut result = forms.pop().expect("parser guarantees a body");
        let mut binders: Vec<String> = (0..forms.len()).map(|_| self.fresh(&throwaway_base)).collect();
        while let Some(form) = forms.pop() {
            let binder = binders.pop().expect("one binder per extra body form");
            result = Expr::let_in(binder, form, result);
        }
        for (name, def) in lets.into_iter().rev() {
            result = Expr::let_in(name, def, result);
        }
        self.env.truncate(mark);
        Ok(result)
    }

    fn call(&mut self, op: &str, args: &[Sugar]) -> Result<Expr, ParseError> {
        if let Some(prim) = PrimOp::from_symbol(op) {
            let args = args.iter().map(|a| self.expr(a)).collect::<Result<Vec<_>, _>>()?;
            // (- a b c) is ((a - b) - c)
            if prim == PrimOp::Sub && args.len() > 2 {
                let mut it = args.into_iter();
                let first = it.next().expect("len > 2");
                return Ok(it.fold(first, sub));
            }
            return Ok(Expr::op(prim, args));
        }
        match op {
            "max" | "min" => {
                let a = self.expr(&args[0])?;
                let b = self.expr(&args[1])?;
                if is_stochastic(&a) || is_stochastic(&b) {
                    return Err(ParseError::unsupported(format!(
                        "arguments of '{op}' may not contain sample or observe"
                    )));
                }
                let pred = sub(a.clone(), b.clone());
                Ok(if op == "max" { Expr::if_neg(pred, b, a) } else { Expr::if_neg(pred, a, b) })
            }
            "abs" => {
                let a = self.expr(&args[0])?;
                if is_stochastic(&a) {
                    return Err(ParseError::unsupported("argument of 'abs' may not contain sample or observe"));
                }
                Ok(Expr::if_neg(sub(a.clone(), neg(a.clone())), neg(a.clone()), a))
            }
            "nth" => {
                let items = self.vector_items(&args[0])?;
                let index = self.expr(&args[1])?;
                let Some(k) = self.fold(&index) else {
                    return Err(ParseError::unsupported(format!(
                        "nth with non-constant index {index}"
                    )));
                };
                if k.fract() != 0.0 || k < 0.0 || k as usize >= items.len() {
                    return Err(ParseError::validation(format!(
                        "nth index {k} out of range for vector of length {}",
                        items.len()
                    )));
                }
                Ok(items[k as usize].clone())
            }
            "vector" => Err(ParseError::unsupported(
                "vectors may only be bound by let and consumed by nth or categorical",
            )),
            "<" | ">" | "<=" | ">=" => {
                let cmp = self
                    .comparison(&Sugar::Call { op: op.to_string(), args: args.to_vec() })?
                    .expect("comparison operator");
                let ind = Expr::Indicator(Box::new(cmp.pred));
                Ok(if cmp.negated { sub(Expr::Const(1.0), ind) } else { ind })
            }
            other => Err(ParseError::syntax(format!("unknown operator '{other}'"), None)),
        }
    }

    fn expr(&mut self, s: &Sugar) -> Result<Expr, ParseError> {
        match s {
            Sugar::Var(v) => match self.lookup(v) {
                Some(Binding::Substitute(c)) => Ok(Expr::Const(*c)),
                Some(Binding::Vector(_)) => Err(ParseError::unsupported(format!(
                    "vector '{v}' may only be used with nth or categorical"
                ))),
                _ => Ok(Expr::Var(v.clone())),
            },
            Sugar::Const(c) => Ok(Expr::Const(*c)),
            Sugar::Vector(_) => Err(ParseError::unsupported(
                "vector literals may only be bound by let or passed to categorical",
            )),
            Sugar::Call { op, args } => self.call(op, args),
            Sugar::If { pred, then, otherwise } => {
                let cmp = self.comparison(pred)?.ok_or_else(|| {
                    ParseError::validation(format!("if predicate must be a comparison such as (< e 0), found {pred}"))
                })?;
                let then = self.expr(then)?;
                let otherwise = self.expr(otherwise)?;
                Ok(if cmp.negated {
                    Expr::if_neg(cmp.pred, otherwise, then)
                } else {
                    Expr::if_neg(cmp.pred, then, otherwise)
                })
            }
            Sugar::Let { bindings, body } => self.let_form(bindings, body),
            Sugar::Sample(d) => self.sample(d),
            Sugar::Observe { dist, observed } => self.observe(dist, observed),
        }
    }
}

/// Desugar a parsed program into the core AST.
pub fn desugar(sugared: &Sugar) -> Result<Expr, ParseError> {
    desugar_with_constants(sugared, &BTreeMap::new())
}

/// Desugar, replacing free occurrences of the given names with literals.
pub fn desugar_with_constants(sugared: &Sugar, constants: &BTreeMap<String, f64>) -> Result<Expr, ParseError> {
    let mut taken = BTreeSet::new();
    sugar_identifiers(sugared, &mut taken);
    taken.extend(constants.keys().cloned());
    let env = constants.iter().map(|(k, v)| (k.clone(), Binding::Substitute(*v))).collect();
    Desugarer { env, taken }.expr(sugared)
}
