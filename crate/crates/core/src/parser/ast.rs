//! Surface (sugared) and core syntax trees.

use std::fmt;

/// Distribution constructors accepted in `sample` / `observe` position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DistName {
    Normal,
    Uniform,
    Bernoulli,
    Categorical,
    Factor,
}

impl DistName {
    pub fn from_symbol(s: &str) -> Option<Self> {
        Some(match s {
            "normal" => Self::Normal,
            "uniform" => Self::Uniform,
            "bernoulli" => Self::Bernoulli,
            "categorical" => Self::Categorical,
            "factor" => Self::Factor,
            _ => return None,
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Normal => "normal",
            Self::Uniform => "uniform",
            Self::Bernoulli => "bernoulli",
            Self::Categorical => "categorical",
            Self::Factor => "factor",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Self::Normal | Self::Uniform => 2,
            Self::Bernoulli | Self::Categorical | Self::Factor => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistCall {
    pub name: DistName,
    pub args: Vec<Sugar>,
}

/// Parsed program before desugaring. Operator names are validated by the
/// parser but sugar (`max`, `nth`, comparisons, multi-body `let`, ...) is
/// still present.
#[derive(Debug, Clone, PartialEq)]
pub enum Sugar {
    Var(String),
    Const(f64),
    Call { op: String, args: Vec<Sugar> },
    Vector(Vec<Sugar>),
    If { pred: Box<Sugar>, then: Box<Sugar>, otherwise: Box<Sugar> },
    Let { bindings: Vec<(String, Sugar)>, body: Vec<Sugar> },
    Sample(DistCall),
    Observe { dist: DistCall, observed: Box<Sugar> },
}

impl Sugar {
    /// Free identifiers in source order.
    pub fn free_vars(&self) -> Vec<String> {
        fn go(s: &Sugar, bound: &mut Vec<String>, out: &mut Vec<String>) {
            match s {
                Sugar::Var(v) => {
                    if !bound.contains(v) && !out.contains(v) {
                        out.push(v.clone());
                    }
                }
                Sugar::Const(_) => {}
                Sugar::Call { args, .. } | Sugar::Vector(args) => args.iter().for_each(|a| go(a, bound, out)),
                Sugar::If { pred, then, otherwise } => {
                    go(pred, bound, out);
                    go(then, bound, out);
                    go(otherwise, bound, out);
                }
                Sugar::Let { bindings, body } => {
                    let mark = bound.len();
                    for (name, def) in bindings {
                        go(def, bound, out);
                        bound.push(name.clone());
                    }
                    body.iter().for_each(|b| go(b, bound, out));
                    bound.truncate(mark);
                }
                Sugar::Sample(d) => d.args.iter().for_each(|a| go(a, bound, out)),
                Sugar::Observe { dist, observed } => {
                    dist.args.iter().for_each(|a| go(a, bound, out));
                    go(observed, bound, out);
                }
            }
        }
        let mut out = Vec::new();
        go(self, &mut Vec::new(), &mut out);
        out.retain(|v| v != "_");
        out
    }
}

/// Analytic primitives on reals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PrimOp {
    Add,
    /// Binary subtraction, or negation with a single argument.
    Sub,
    Mul,
    Div,
    Exp,
    Log,
    Sqrt,
}

impl PrimOp {
    pub fn from_symbol(s: &str) -> Option<Self> {
        Some(match s {
            "+" => Self::Add,
            "-" => Self::Sub,
            "*" => Self::Mul,
            "/" => Self::Div,
            "exp" => Self::Exp,
            "log" => Self::Log,
            "sqrt" => Self::Sqrt,
            _ => return None,
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Add => "+",
            Self::Sub => "-",
            Self::Mul => "*",
            Self::Div => "/",
            Self::Exp => "exp",
            Self::Log => "log",
            Self::Sqrt => "sqrt",
        }
    }

    /// Accepted argument counts `(min, max)`.
    pub fn arity(self) -> (usize, Option<usize>) {
        match self {
            Self::Add | Self::Mul | Self::Sub => (1, None),
            Self::Div => (2, Some(2)),
            Self::Exp | Self::Log | Self::Sqrt => (1, Some(1)),
        }
    }
}

/// Distributions that survive desugaring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CoreDist {
    Normal,
    Uniform,
    Factor,
}

impl CoreDist {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Normal => "normal",
            Self::Uniform => "uniform",
            Self::Factor => "factor",
        }
    }
}

/// Core AST: the grammar forms `x | c | (op e ...) | (if (< e 0) e e) |
/// (let [x e] e) | (sample (d e ...)) | (observe (d e ...) c)`, plus
/// `Indicator`, a comparison `(< e 0)` used as a value (1 when true, 0 otherwise).
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Var(String),
    Const(f64),
    PrimOp { op: PrimOp, args: Vec<Expr> },
    /// `(if (< pred 0) then otherwise)`
    If { pred: Box<Expr>, then: Box<Expr>, otherwise: Box<Expr> },
    Indicator(Box<Expr>),
    Let { var: String, def: Box<Expr>, body: Box<Expr> },
    Sample { dist: CoreDist, args: Vec<Expr> },
    Observe { dist: CoreDist, args: Vec<Expr>, observed: f64 },
}

impl Expr {
    pub fn var(name: impl Into<String>) -> Self {
        Expr::Var(name.into())
    }

    pub fn op(op: PrimOp, args: Vec<Expr>) -> Self {
        Expr::PrimOp { op, args }
    }

    pub fn if_neg(pred: Expr, then: Expr, otherwise: Expr) -> Self {
        Expr::If { pred: Box::new(pred), then: Box::new(then), otherwise: Box::new(otherwise) }
    }

    pub fn let_in(var: impl Into<String>, def: Expr, body: Expr) -> Self {
        Expr::Let { var: var.into(), def: Box::new(def), body: Box::new(body) }
    }

    /// Free variables, in first-occurrence order.
    pub fn free_vars(&self) -> Vec<String> {
        fn go(e: &Expr, bound: &mut Vec<String>, out: &mut Vec<String>) {
            match e {
                Expr::Var(v) => {
                    if !bound.contains(v) && !out.contains(v) {
                        out.push(v.clone());
                    }
                }
                Expr::Const(_) => {}
                Expr::PrimOp { args, .. } | Expr::Sample { args, .. } | Expr::Observe { args, .. } => {
                    args.iter().for_each(|a| go(a, bound, out))
                }
                Expr::If { pred, then, otherwise } => {
                    go(pred, bound, out);
                    go(then, bound, out);
                    go(otherwise, bound, out);
                }
                Expr::Indicator(e) => go(e, bound, out),
                Expr::Let { var, def, body } => {
                    go(def, bound, out);
                    bound.push(var.clone());
                    go(body, bound, out);
                    bound.pop();
                }
            }
        }
        let mut out = Vec::new();
        go(self, &mut Vec::new(), &mut out);
        out
    }

    /// Every identifier mentioned anywhere (bound or free).
    pub fn identifiers(&self, out: &mut std::collections::BTreeSet<String>) {
        match self {
            Expr::Var(v) => {
                out.insert(v.clone());
            }
            Expr::Const(_) => {}
            Expr::PrimOp { args, .. } | Expr::Sample { args, .. } | Expr::Observe { args, .. } => {
                args.iter().for_each(|a| a.identifiers(out))
            }
            Expr::If { pred, then, otherwise } => {
                pred.identifiers(out);
                then.identifiers(out);
                otherwise.identifiers(out);
            }
            Expr::Indicator(e) => e.identifiers(out),
            Expr::Let { var, def, body } => {
                out.insert(var.clone());
                def.identifiers(out);
                body.identifiers(out);
            }
        }
    }

    /// Number of `sample` statements.
    pub fn sample_count(&self) -> usize {
        match self {
            Expr::Var(_) | Expr::Const(_) => 0,
            Expr::PrimOp { args, .. } | Expr::Observe { args, .. } => {
                args.iter().map(Expr::sample_count).sum()
            }
            Expr::Sample { args, .. } => 1 + args.iter().map(Expr::sample_count).sum::<usize>(),
            Expr::If { pred, then, otherwise } => {
                pred.sample_count() + then.sample_count() + otherwise.sample_count()
            }
            Expr::Indicator(e) => e.sample_count(),
            Expr::Let { def, body, .. } => def.sample_count() + body.sample_count(),
        }
    }
}

fn write_list<T: fmt::Display>(f: &mut fmt::Formatter<'_>, items: &[T]) -> fmt::Result {
    for item in items {
        write!(f, " {item}")?;
    }
    Ok(())
}

impl fmt::Display for DistCall {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.name.as_str())?;
        write_list(f, &self.args)?;
        write!(f, ")")
    }
}

impl fmt::Display for Sugar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sugar::Var(v) => write!(f, "{v}"),
            Sugar::Const(c) => write!(f, "{c}"),
            Sugar::Call { op, args } => {
                write!(f, "({op}")?;
                write_list(f, args)?;
                write!(f, ")")
            }
            Sugar::Vector(items) => {
                write!(f, "[")?;
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        write!(f, " ")?;
                    }
                    write!(f, "{item}")?;
                }
                write!(f, "]")
            }
            Sugar::If { pred, then, otherwise } => write!(f, "(if {pred} {then} {otherwise})"),
            Sugar::Let { bindings, body } => {
                write!(f, "(let [")?;
                for (i, (name, def)) in bindings.iter().enumerate() {
                    if i > 0 {
                        write!(f, " ")?;
                    }
                    write!(f, "{name} {def}")?;
                }
                write!(f, "]")?;
                write_list(f, body)?;
                write!(f, ")")
            }
            Sugar::Sample(d) => write!(f, "(sample {d})"),
            Sugar::Observe { dist, observed } => write!(f, "(observe {dist} {observed})"),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Var(v) => write!(f, "{v}"),
            Expr::Const(c) => write!(f, "{c}"),
            Expr::PrimOp { op, args } => {
                write!(f, "({}", op.as_str())?;
                write_list(f, args)?;
                write!(f, ")")
            }
            Expr::If { pred, then, otherwise } => {
                write!(f, "(if (< {pred} 0) {then} {otherwise})")
            }
            Expr::Indicator(e) => write!(f, "(< {e} 0)"),
            Expr::Let { var, def, body } => write!(f, "(let [{var} {def}] {body})"),
            Expr::Sample { dist, args } => {
                write!(f, "(sample ({}", dist.as_str())?;
                write_list(f, args)?;
                write!(f, "))")
            }
            Expr::Observe { dist, args, observed } => {
                write!(f, "(observe ({}", dist.as_str())?;
                write_list(f, args)?;
                write!(f, ") {observed})")
            }
        }
    }
}
