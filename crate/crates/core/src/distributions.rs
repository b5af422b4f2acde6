//! Distribution schemas: each density written as a finite list of
//! (indicator product, smooth density) pairs over placeholders
//! `x0` (the value) and `x1..xs` (the parameters).

use std::fmt;
use std::sync::LazyLock;

use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};

use crate::parser::CoreDist;
use crate::symbolic::{EvalError, SymExpr, ZERO};
use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Relation {
    GeqZero,
    LtZero,
}

impl Relation {
    pub fn negate(self) -> Self {
        match self {
            Relation::GeqZero => Relation::LtZero,
            Relation::LtZero => Relation::GeqZero,
        }
    }

    pub fn holds<T: Real>(self, value: T) -> bool {
        match self {
            Relation::GeqZero => value >= T::zero(),
            Relation::LtZero => value < T::zero(),
        }
    }
}

/// One indicator factor `1[expr >= 0]` or `1[expr < 0]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Guard {
    pub expr: SymExpr,
    pub relation: Relation,
}

impl Guard {
    pub fn geq(expr: SymExpr) -> Self {
        Guard { expr, relation: Relation::GeqZero }
    }

    pub fn lt(expr: SymExpr) -> Self {
        Guard { expr, relation: Relation::LtZero }
    }

    pub fn eval<T: Real>(&self, lookup: &impl Fn(&str) -> Option<T>) -> Result<bool, EvalError> {
        let v = self.expr.eval(lookup)?;
        if v.is_nan() {
            return Err(EvalError::Domain(format!("guard {self} evaluated to NaN")));
        }
        Ok(self.relation.holds(v))
    }

    pub fn substitute_all(&self, subs: &[(&str, &SymExpr)]) -> Guard {
        Guard { expr: self.expr.substitute_all(subs), relation: self.relation }
    }
}

impl fmt::Display for Guard {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.relation {
            Relation::GeqZero => write!(f, "(>= {} 0)", self.expr),
            Relation::LtZero => write!(f, "(< {} 0)", self.expr),
        }
    }
}

/// Finite product of guards; the empty product is the constant 1.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct IndicatorProduct {
    pub guards: Vec<Guard>,
}

impl IndicatorProduct {
    pub fn one() -> Self {
        IndicatorProduct::default()
    }

    pub fn single(guard: Guard) -> Self {
        IndicatorProduct { guards: vec![guard] }
    }

    pub fn is_one(&self) -> bool {
        self.guards.is_empty()
    }

    /// Concatenation with syntactic deduplication.
    pub fn times(&self, other: &IndicatorProduct) -> IndicatorProduct {
        let mut guards = self.guards.clone();
        for g in &other.guards {
            if !guards.contains(g) {
                guards.push(g.clone());
            }
        }
        IndicatorProduct { guards }
    }

    pub fn with(&self, guard: Guard) -> IndicatorProduct {
        self.times(&IndicatorProduct::single(guard))
    }

    pub fn eval<T: Real>(&self, lookup: &impl Fn(&str) -> Option<T>) -> Result<bool, EvalError> {
        for g in &self.guards {
            if !g.eval(lookup)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub fn substitute_all(&self, subs: &[(&str, &SymExpr)]) -> IndicatorProduct {
        IndicatorProduct { guards: self.guards.iter().map(|g| g.substitute_all(subs)).collect() }
    }

    /// Guards are evaluated where closed; `None` if a closed guard is false,
    /// otherwise the product with the true closed guards removed.
    pub fn fold_closed(self) -> Result<Option<IndicatorProduct>, EvalError> {
        let mut guards = Vec::with_capacity(self.guards.len());
        for g in self.guards {
            if g.expr.is_closed() {
                if !g.eval(&|_: &str| None::<f64>)? {
                    return Ok(None);
                }
            } else {
                guards.push(g);
            }
        }
        Ok(Some(IndicatorProduct { guards }))
    }
}

impl fmt::Display for IndicatorProduct {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.guards.is_empty() {
            return write!(f, "1");
        }
        for (i, g) in self.guards.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{g}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistributionSchema {
    pub name: &'static str,
    /// number of parameters `s`
    pub arity: usize,
    pub pairs: Vec<(IndicatorProduct, SymExpr)>,
    pub zero_density_pairs: Vec<(IndicatorProduct, SymExpr)>,
}

impl DistributionSchema {
    /// Placeholder for position `i` (`x0` is the value).
    pub fn placeholder(i: usize) -> String {
        format!("x{i}")
    }

    /// Nonzero pairs followed by zero-density pairs.
    pub fn all_pairs(&self) -> impl Iterator<Item = &(IndicatorProduct, SymExpr)> {
        self.pairs.iter().chain(self.zero_density_pairs.iter())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DistributionError {
    #[error("unknown distribution '{0}'")]
    Unknown(String),
    #[error("'{0}' has no schema of its own; it is desugared before compilation")]
    Desugared(String),
    #[error("invalid parameters for {name}: {message}")]
    InvalidParameter { name: &'static str, message: String },
    #[error("'{0}' cannot be forward-sampled")]
    NotSampleable(&'static str),
}

fn x(i: usize) -> SymExpr {
    SymExpr::Var(DistributionSchema::placeholder(i))
}

static NORMAL: LazyLock<DistributionSchema> = LazyLock::new(|| DistributionSchema {
    name: "normal",
    arity: 2,
    pairs: vec![(IndicatorProduct::one(), SymExpr::normal_pdf(x(0), x(1), x(2)))],
    zero_density_pairs: vec![],
});

static UNIFORM: LazyLock<DistributionSchema> = LazyLock::new(|| {
    let above_lower = SymExpr::sub(x(0), x(1));
    let below_upper = SymExpr::sub(x(2), x(0));
    DistributionSchema {
        name: "uniform",
        arity: 2,
        pairs: vec![(
            IndicatorProduct { guards: vec![Guard::geq(above_lower.clone()), Guard::geq(below_upper.clone())] },
            SymExpr::uniform_pdf(x(0), x(1), x(2)),
        )],
        zero_density_pairs: vec![
            (IndicatorProduct::single(Guard::lt(above_lower)), ZERO),
            (IndicatorProduct::single(Guard::lt(below_upper)), ZERO),
        ],
    }
});

static FACTOR: LazyLock<DistributionSchema> = LazyLock::new(|| DistributionSchema {
    name: "factor",
    arity: 1,
    pairs: vec![(IndicatorProduct::one(), SymExpr::unary(crate::symbolic::Op::Exp, x(1)))],
    zero_density_pairs: vec![],
});

pub fn schema_for(dist: CoreDist) -> &'static DistributionSchema {
    match dist {
        CoreDist::Normal => &NORMAL,
        CoreDist::Uniform => &UNIFORM,
        CoreDist::Factor => &FACTOR,
    }
}

/// Registered schema by name.
pub fn schema(name: &str) -> Result<&'static DistributionSchema, DistributionError> {
    match name {
        "normal" => Ok(schema_for(CoreDist::Normal)),
        "uniform" => Ok(schema_for(CoreDist::Uniform)),
        "factor" => Ok(schema_for(CoreDist::Factor)),
        "bernoulli" | "categorical" => Err(DistributionError::Desugared(name.to_string())),
        other => Err(DistributionError::Unknown(other.to_string())),
    }
}

/// Draw from the distribution described by `schema` with the given
/// parameters.
pub fn forward_sample<R: Rng + ?Sized>(
    schema: &DistributionSchema,
    params: &[f64],
    rng: &mut R,
) -> Result<f64, DistributionError> {
    let invalid = |message: String| DistributionError::InvalidParameter { name: schema.name, message };
    if params.len() != schema.arity {
        return Err(invalid(format!("expected {} parameters, got {}", schema.arity, params.len())));
    }
    if params.iter().any(|p| !p.is_finite()) {
        return Err(invalid(format!("non-finite parameter in {params:?}")));
    }
    match schema.name {
        "normal" => {
            let d = Normal::new(params[0], params[1])
                .ok()
                .filter(|_| params[1] > 0.0)
                .ok_or_else(|| invalid(format!("sigma {} must be positive", params[1])))?;
            Ok(d.sample(rng))
        }
        "uniform" => {
            if params[0] >= params[1] {
                return Err(invalid(format!("bounds {} < {} violated", params[0], params[1])));
            }
            let d = Uniform::new(params[0], params[1]).map_err(|e| invalid(e.to_string()))?;
            Ok(d.sample(rng))
        }
        name => Err(DistributionError::NotSampleable(name)),
    }
}
