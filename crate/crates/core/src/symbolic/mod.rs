//! Symbolic real-valued expressions over named variables.
//!
//! These are the smooth pieces (densities, guard functions, return values)
//! manipulated by the compiler. Smart constructors perform light algebraic
//! simplification: literal folding for arithmetic, flattening of `+`/`*`,
//! dropping of neutral literals and annihilation by a literal zero factor.
//! Transcendental ops and density primitives are never folded.

mod diff;
mod parse;
mod slot;

use std::collections::BTreeSet;
use std::fmt;

use crate::Real;

pub use parse::parse_sym;
pub use slot::SlotExpr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Op {
    /// n-ary sum
    Add,
    /// binary difference
    Sub,
    Neg,
    /// n-ary product
    Mul,
    Div,
    Exp,
    Log,
    Sqrt,
    /// `N(x; mu, sigma)`, sigma a standard deviation
    NormalPdf,
    /// `U(x; a, b)` on its support, i.e. `1 / (b - a)`
    UniformPdf,
}

impl Op {
    pub fn name(self) -> &'static str {
        match self {
            Op::Add => "+",
            Op::Sub | Op::Neg => "-",
            Op::Mul => "*",
            Op::Div => "/",
            Op::Exp => "exp",
            Op::Log => "log",
            Op::Sqrt => "sqrt",
            Op::NormalPdf => "normal-pdf",
            Op::UniformPdf => "uniform-pdf",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SymExpr {
    Var(String),
    Lit(f64),
    Apply(Op, Vec<SymExpr>),
    /// `then` when `guard < 0`, `otherwise` when `guard >= 0`. The compiler
    /// keeps these in return values only, splitting densities and guards on them.
    Piecewise { guard: Box<SymExpr>, then: Box<SymExpr>, otherwise: Box<SymExpr> },
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("unbound variable '{0}'")]
    Unbound(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid distribution parameter: {0}")]
    InvalidParameter(String),
}

pub const ZERO: SymExpr = SymExpr::Lit(0.0);
pub const ONE: SymExpr = SymExpr::Lit(1.0);

impl SymExpr {
    pub fn var(name: impl Into<String>) -> Self {
        SymExpr::Var(name.into())
    }

    pub fn lit(&self) -> Option<f64> {
        match self {
            SymExpr::Lit(c) => Some(*c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.lit() == Some(0.0)
    }

    pub fn is_one(&self) -> bool {
        self.lit() == Some(1.0)
    }

    pub fn add(terms: Vec<SymExpr>) -> Self {
        let mut flat = Vec::with_capacity(terms.len());
        let mut constant = 0.0;
        for t in terms {
            match t {
                SymExpr::Lit(c) => constant += c,
                SymExpr::Apply(Op::Add, inner) => {
                    for i in inner {
                        match i {
                            SymExpr::Lit(c) => constant += c,
                            other => flat.push(other),
                        }
                    }
                }
                other => flat.push(other),
            }
        }
        if constant != 0.0 || flat.is_empty() {
            flat.push(SymExpr::Lit(constant));
        }
        if flat.len() == 1 {
            flat.pop().expect("one term")
        } else {
            SymExpr::Apply(Op::Add, flat)
        }
    }

    pub fn mul(factors: Vec<SymExpr>) -> Self {
        let mut flat = Vec::with_capacity(factors.len());
        let mut constant = 1.0;
        for f in factors {
            match f {
                SymExpr::Lit(c) => constant *= c,
                SymExpr::Apply(Op::Mul, inner) => {
                    for i in inner {
                        match i {
                            SymExpr::Lit(c) => constant *= c,
                            other => flat.push(other),
                        }
                    }
                }
                other => flat.push(other),
            }
        }
        if constant == 0.0 {
            return ZERO;
        }
        if constant != 1.0 || flat.is_empty() {
            flat.insert(0, SymExpr::Lit(constant));
        }
        if flat.len() == 1 {
            flat.pop().expect("one factor")
        } else {
            SymExpr::Apply(Op::Mul, flat)
        }
    }

    pub fn sub(a: SymExpr, b: SymExpr) -> Self {
        match (&a, &b) {
            (SymExpr::Lit(x), SymExpr::Lit(y)) => SymExpr::Lit(x - y),
            (_, SymExpr::Lit(y)) if *y == 0.0 => a,
            _ => SymExpr::Apply(Op::Sub, vec![a, b]),
        }
    }

    pub fn neg(a: SymExpr) -> Self {
        match a {
            SymExpr::Lit(x) => SymExpr::Lit(-x),
            SymExpr::Apply(Op::Neg, mut inner) => inner.pop().expect("unary"),
            other => SymExpr::Apply(Op::Neg, vec![other]),
        }
    }

    pub fn div(a: SymExpr, b: SymExpr) -> Self {
        match (&a, &b) {
            (SymExpr::Lit(x), SymExpr::Lit(y)) if *y != 0.0 => SymExpr::Lit(x / y),
            (_, SymExpr::Lit(y)) if *y == 1.0 => a,
            (SymExpr::Lit(x), _) if *x == 0.0 => ZERO,
            _ => SymExpr::Apply(Op::Div, vec![a, b]),
        }
    }

    pub fn unary(op: Op, a: SymExpr) -> Self {
        SymExpr::Apply(op, vec![a])
    }

    pub fn normal_pdf(x: SymExpr, mu: SymExpr, sigma: SymExpr) -> Self {
        SymExpr::Apply(Op::NormalPdf, vec![x, mu, sigma])
    }

    pub fn uniform_pdf(x: SymExpr, a: SymExpr, b: SymExpr) -> Self {
        SymExpr::Apply(Op::UniformPdf, vec![x, a, b])
    }

    pub fn piecewise(guard: SymExpr, then: SymExpr, otherwise: SymExpr) -> Self {
        if then == otherwise {
            return then;
        }
        SymExpr::Piecewise { guard: Box::new(guard), then: Box::new(then), otherwise: Box::new(otherwise) }
    }

    /// Rebuild `op(args)` through the simplifying constructors.
    pub fn apply(op: Op, mut args: Vec<SymExpr>) -> Self {
        match op {
            Op::Add => Self::add(args),
            Op::Mul => Self::mul(args),
            Op::Sub if args.len() == 2 => {
                let b = args.pop().expect("binary");
                let a = args.pop().expect("binary");
                Self::sub(a, b)
            }
            Op::Neg if args.len() == 1 => Self::neg(args.pop().expect("unary")),
            Op::Div if args.len() == 2 => {
                let b = args.pop().expect("binary");
                let a = args.pop().expect("binary");
                Self::div(a, b)
            }
            _ => SymExpr::Apply(op, args),
        }
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    pub fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            SymExpr::Var(v) => {
                out.insert(v.clone());
            }
            SymExpr::Lit(_) => {}
            SymExpr::Apply(_, args) => args.iter().for_each(|a| a.collect_vars(out)),
            SymExpr::Piecewise { guard, then, otherwise } => {
                guard.collect_vars(out);
                then.collect_vars(out);
                otherwise.collect_vars(out);
            }
        }
    }

    pub fn mentions(&self, name: &str) -> bool {
        match self {
            SymExpr::Var(v) => v == name,
            SymExpr::Lit(_) => false,
            SymExpr::Apply(_, args) => args.iter().any(|a| a.mentions(name)),
            SymExpr::Piecewise { guard, then, otherwise } => {
                guard.mentions(name) || then.mentions(name) || otherwise.mentions(name)
            }
        }
    }

    pub fn is_closed(&self) -> bool {
        match self {
            SymExpr::Var(_) => false,
            SymExpr::Lit(_) => true,
            SymExpr::Apply(_, args) => args.iter().all(SymExpr::is_closed),
            SymExpr::Piecewise { guard, then, otherwise } => {
                guard.is_closed() && then.is_closed() && otherwise.is_closed()
            }
        }
    }

    pub fn contains_piecewise(&self) -> bool {
        match self {
            SymExpr::Var(_) | SymExpr::Lit(_) => false,
            SymExpr::Apply(_, args) => args.iter().any(SymExpr::contains_piecewise),
            SymExpr::Piecewise { .. } => true,
        }
    }

    /// First `Piecewise` node in pre-order.
    pub fn find_piecewise(&self) -> Option<&SymExpr> {
        match self {
            SymExpr::Var(_) | SymExpr::Lit(_) => None,
            SymExpr::Apply(_, args) => args.iter().find_map(SymExpr::find_piecewise),
            SymExpr::Piecewise { .. } => Some(self),
        }
    }

    /// Replace every subtree structurally equal to `target` by `with`.
    pub fn replace(&self, target: &SymExpr, with: &SymExpr) -> SymExpr {
        if self == target {
            return with.clone();
        }
        match self {
            SymExpr::Var(_) | SymExpr::Lit(_) => self.clone(),
            SymExpr::Apply(op, args) => {
                SymExpr::apply(*op, args.iter().map(|a| a.replace(target, with)).collect())
            }
            SymExpr::Piecewise { guard, then, otherwise } => SymExpr::piecewise(
                guard.replace(target, with),
                then.replace(target, with),
                otherwise.replace(target, with),
            ),
        }
    }

    /// `self[var := replacement]`.
    pub fn substitute(&self, var: &str, replacement: &SymExpr) -> SymExpr {
        self.substitute_all(&[(var, replacement)])
    }

    /// Simultaneous substitution. The result is re-simplified.
    pub fn substitute_all(&self, subs: &[(&str, &SymExpr)]) -> SymExpr {
        match self {
            SymExpr::Var(v) => subs
                .iter()
                .find(|(name, _)| name == v)
                .map(|(_, r)| (*r).clone())
                .unwrap_or_else(|| self.clone()),
            SymExpr::Lit(_) => self.clone(),
            SymExpr::Apply(op, args) => {
                SymExpr::apply(*op, args.iter().map(|a| a.substitute_all(subs)).collect())
            }
            SymExpr::Piecewise { guard, then, otherwise } => SymExpr::piecewise(
                guard.substitute_all(subs),
                then.substitute_all(subs),
                otherwise.substitute_all(subs),
            ),
        }
    }

    /// Numeric evaluation with variables resolved by `lookup`.
    pub fn eval<T: Real>(&self, lookup: &impl Fn(&str) -> Option<T>) -> Result<T, EvalError> {
        match self {
            SymExpr::Var(v) => lookup(v).ok_or_else(|| EvalError::Unbound(v.clone())),
            SymExpr::Lit(c) => Ok(T::lit(*c)),
            SymExpr::Apply(op, args) => eval_apply(*op, args, &mut |a: &SymExpr| a.eval(lookup)),
            SymExpr::Piecewise { guard, then, otherwise } => {
                if guard.eval(lookup)? < T::zero() {
                    then.eval(lookup)
                } else {
                    otherwise.eval(lookup)
                }
            }
        }
    }

    /// Evaluate a closed expression.
    pub fn eval_closed(&self) -> Result<f64, EvalError> {
        self.eval(&|_: &str| None::<f64>)
    }

    /// Symbolic logarithm of a non-negative density expression, pushed
    /// through products, quotients, `exp`, `sqrt` and the density primitives
    /// so that evaluation never leaves log space.
    pub fn log_form(&self) -> SymExpr {
        match self {
            SymExpr::Lit(c) if *c > 0.0 => SymExpr::Lit(c.ln()),
            SymExpr::Lit(c) if *c == 0.0 => SymExpr::Lit(f64::NEG_INFINITY),
            SymExpr::Apply(Op::Mul, fs) => SymExpr::add(fs.iter().map(SymExpr::log_form).collect()),
            SymExpr::Apply(Op::Div, ab) => SymExpr::sub(ab[0].log_form(), ab[1].log_form()),
            SymExpr::Apply(Op::Exp, a) => a[0].clone(),
            SymExpr::Apply(Op::Sqrt, a) => SymExpr::mul(vec![SymExpr::Lit(0.5), a[0].log_form()]),
            SymExpr::Apply(Op::NormalPdf, xms) => {
                let (x, m, s) = (&xms[0], &xms[1], &xms[2]);
                let z = SymExpr::div(SymExpr::sub(x.clone(), m.clone()), s.clone());
                SymExpr::add(vec![
                    SymExpr::mul(vec![SymExpr::Lit(-0.5), z.clone(), z]),
                    SymExpr::neg(SymExpr::unary(Op::Log, s.clone())),
                    SymExpr::Lit(-0.5 * (2.0 * std::f64::consts::PI).ln()),
                ])
            }
            SymExpr::Apply(Op::UniformPdf, xab) => SymExpr::neg(SymExpr::unary(
                Op::Log,
                SymExpr::sub(xab[2].clone(), xab[1].clone()),
            )),
            other => SymExpr::unary(Op::Log, other.clone()),
        }
    }

    /// Partial derivative with respect to `var`.
    pub fn diff(&self, var: &str) -> SymExpr {
        diff::diff(self, var)
    }

    /// Product factors (a non-product is a single factor).
    pub fn factors(&self) -> Vec<&SymExpr> {
        match self {
            SymExpr::Apply(Op::Mul, fs) => fs.iter().collect(),
            other => vec![other],
        }
    }
}

fn check_param(ok: bool, what: impl FnOnce() -> String) -> Result<(), EvalError> {
    if ok {
        Ok(())
    } else {
        Err(EvalError::InvalidParameter(what()))
    }
}

/// Apply `op` to arguments evaluated by `ev`. Shared by named and
/// slot-indexed evaluation.
pub(crate) fn eval_apply<T: Real, N>(
    op: Op,
    args: &[N],
    ev: &mut impl FnMut(&N) -> Result<T, EvalError>,
) -> Result<T, EvalError> {
    match op {
        Op::Add => args.iter().try_fold(T::zero(), |acc, a| Ok(acc + ev(a)?)),
        Op::Mul => args.iter().try_fold(T::one(), |acc, a| Ok(acc * ev(a)?)),
        Op::Sub => Ok(ev(&args[0])? - ev(&args[1])?),
        Op::Neg => Ok(-ev(&args[0])?),
        Op::Div => {
            let (a, b) = (ev(&args[0])?, ev(&args[1])?);
            if b == T::zero() {
                return Err(EvalError::Domain(format!("division of {a} by zero")));
            }
            Ok(a / b)
        }
        Op::Exp => Ok(ev(&args[0])?.exp()),
        Op::Log => {
            let a = ev(&args[0])?;
            if !(a > T::zero()) {
                return Err(EvalError::Domain(format!("log of non-positive value {a}")));
            }
            Ok(a.ln())
        }
        Op::Sqrt => {
            let a = ev(&args[0])?;
            if a < T::zero() || a.is_nan() {
                return Err(EvalError::Domain(format!("sqrt of negative value {a}")));
            }
            Ok(a.sqrt())
        }
        Op::NormalPdf => {
            let (x, mu, sigma) = (ev(&args[0])?, ev(&args[1])?, ev(&args[2])?);
            check_param(sigma > T::zero(), || format!("normal sigma {sigma} must be positive"))?;
            let z = (x - mu) / sigma;
            let two = T::lit(2.0);
            Ok((-(z * z) / two).exp() / (sigma * (two * T::PI()).sqrt()))
        }
        Op::UniformPdf => {
            let (_, a, b) = (ev(&args[0])?, ev(&args[1])?, ev(&args[2])?);
            check_param(a < b, || format!("uniform bounds {a} < {b} violated"))?;
            Ok(T::one() / (b - a))
        }
    }
}

impl fmt::Display for SymExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SymExpr::Var(v) => write!(f, "{v}"),
            SymExpr::Lit(c) => write!(f, "{c}"),
            SymExpr::Apply(op, args) => {
                write!(f, "({}", op.name())?;
                for a in args {
                    write!(f, " {a}")?;
                }
                write!(f, ")")
            }
            SymExpr::Piecewise { guard, then, otherwise } => {
                write!(f, "(if (< {guard} 0) {then} {otherwise})")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn env(pairs: &[(&str, f64)]) -> impl Fn(&str) -> Option<f64> {
        let m: BTreeMap<String, f64> = pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        move |n: &str| m.get(n).copied()
    }

    #[test]
    fn eval_examples() {
        let e = parse_sym("(- q z)").unwrap();
        let v: f64 = e.eval(&env(&[("q", 0.5), ("z", 0.7)])).unwrap();
        assert!((v - -0.2).abs() < 1e-15);
        assert_eq!(parse_sym("(exp 0)").unwrap().eval_closed().unwrap(), 1.0);
        let u = parse_sym("(uniform-pdf z 0 1)").unwrap();
        assert_eq!(u.eval(&env(&[("z", 0.7)])).unwrap(), 1.0);
    }

    #[test]
    fn eval_errors() {
        assert!(matches!(parse_sym("(log 0)").unwrap().eval_closed(), Err(EvalError::Domain(_))));
        assert!(matches!(parse_sym("(sqrt -1)").unwrap().eval_closed(), Err(EvalError::Domain(_))));
        assert!(matches!(parse_sym("(/ 1 0)").unwrap().eval_closed(), Err(EvalError::Domain(_))));
        assert!(matches!(parse_sym("(+ a 1)").unwrap().eval_closed(), Err(EvalError::Unbound(_))));
        assert!(matches!(
            parse_sym("(normal-pdf 0 0 -1)").unwrap().eval_closed(),
            Err(EvalError::InvalidParameter(_))
        ));
        assert!(matches!(
            parse_sym("(uniform-pdf 0 1 1)").unwrap().eval_closed(),
            Err(EvalError::InvalidParameter(_))
        ));
    }

    #[test]
    fn substitution_examples() {
        let e = parse_sym("(- q x)").unwrap();
        assert_eq!(e.substitute("x", &SymExpr::var("z")), parse_sym("(- q z)").unwrap());
        assert_eq!(SymExpr::var("x").substitute("x", &SymExpr::Lit(3.0)), SymExpr::Lit(3.0));
        let sq = parse_sym("(* x x)").unwrap();
        let ab = parse_sym("(+ a b)").unwrap();
        assert_eq!(sq.substitute("x", &ab), parse_sym("(* (+ a b) (+ a b))").unwrap());
    }

    #[test]
    fn simultaneous_substitution_does_not_chain() {
        let e = parse_sym("(normal-pdf x0 x1 x2)").unwrap();
        let x1 = SymExpr::var("x0");
        let r = e.substitute_all(&[("x0", &SymExpr::var("z")), ("x1", &x1), ("x2", &ONE)]);
        assert_eq!(r, parse_sym("(normal-pdf z x0 1)").unwrap());
    }

    #[test]
    fn simplification() {
        assert_eq!(SymExpr::mul(vec![ONE, SymExpr::var("a"), ONE]), SymExpr::var("a"));
        assert_eq!(SymExpr::mul(vec![SymExpr::var("a"), ZERO]), ZERO);
        assert_eq!(
            SymExpr::mul(vec![SymExpr::mul(vec![SymExpr::var("a"), SymExpr::var("b")]), SymExpr::var("c")]),
            parse_sym("(* a b c)").unwrap()
        );
        assert_eq!(SymExpr::sub(SymExpr::var("z"), ZERO), SymExpr::var("z"));
        assert_eq!(SymExpr::sub(SymExpr::Lit(1.0), SymExpr::Lit(1.5)), SymExpr::Lit(-0.5));
        // transcendental ops are not folded
        assert_eq!(SymExpr::unary(Op::Exp, ZERO).to_string(), "(exp 0)");
    }

    #[test]
    fn log_form_matches_log_of_value() {
        let pts = env(&[("x", 0.3), ("m", -1.2), ("s", 1.7), ("a", -2.0), ("b", 3.0)]);
        for src in [
            "(normal-pdf x m s)",
            "(* (normal-pdf x m s) (uniform-pdf x a b) (exp (* x m)))",
            "(/ (sqrt (* s s)) (normal-pdf m x 2))",
            "(+ 1 (* x x))",
        ] {
            let e = parse_sym(src).unwrap();
            let direct: f64 = e.eval(&pts).unwrap().ln();
            let via: f64 = e.log_form().eval(&pts).unwrap();
            assert!((direct - via).abs() < 1e-12, "{src}: {direct} vs {via}");
        }
        assert_eq!(ZERO.log_form(), SymExpr::Lit(f64::NEG_INFINITY));
    }

    #[test]
    fn piecewise_selects_branch() {
        let e = parse_sym("(if (< (- q z) 0) 1 0)").unwrap();
        assert_eq!(e.eval(&env(&[("q", 0.5), ("z", 0.7)])).unwrap(), 1.0);
        assert_eq!(e.eval(&env(&[("q", 0.5), ("z", 0.3)])).unwrap(), 0.0);
        // ties go to the >= branch
        assert_eq!(e.eval(&env(&[("q", 0.5), ("z", 0.5)])).unwrap(), 0.0);
    }

    #[test]
    fn generic_over_f32() {
        let e = parse_sym("(normal-pdf x 0 1)").unwrap();
        let v: f32 = e.eval(&|_: &str| Some(0.0f32)).unwrap();
        assert!((v - 0.398_942_3).abs() < 1e-6);
    }
}
