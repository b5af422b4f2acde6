use super::{eval_apply, EvalError, Op, SymExpr};
use crate::Real;

/// A [`SymExpr`] with variables resolved to positions in a state vector,
/// for repeated evaluation without name lookups.
#[derive(Debug, Clone, PartialEq)]
pub enum SlotExpr {
    Slot(usize),
    Lit(f64),
    Apply(Op, Vec<SlotExpr>),
    Piecewise(Box<[SlotExpr; 3]>),
}

impl SlotExpr {
    pub fn compile(e: &SymExpr, index: &impl Fn(&str) -> Option<usize>) -> Result<Self, EvalError> {
        Ok(match e {
            SymExpr::Var(v) => SlotExpr::Slot(index(v).ok_or_else(|| EvalError::Unbound(v.clone()))?),
            SymExpr::Lit(c) => SlotExpr::Lit(*c),
            SymExpr::Apply(op, args) => SlotExpr::Apply(
                *op,
                args.iter().map(|a| SlotExpr::compile(a, index)).collect::<Result<_, _>>()?,
            ),
            SymExpr::Piecewise { guard, then, otherwise } => SlotExpr::Piecewise(Box::new([
                SlotExpr::compile(guard, index)?,
                SlotExpr::compile(then, index)?,
                SlotExpr::compile(otherwise, index)?,
            ])),
        })
    }

    pub fn eval<T: Real>(&self, x: &[T]) -> Result<T, EvalError> {
        match self {
            SlotExpr::Slot(i) => Ok(x[*i]),
            SlotExpr::Lit(c) => Ok(T::lit(*c)),
            SlotExpr::Apply(op, args) => eval_apply(*op, args, &mut |a: &SlotExpr| a.eval(x)),
            SlotExpr::Piecewise(parts) => {
                if parts[0].eval(x)? < T::zero() {
                    parts[1].eval(x)
                } else {
                    parts[2].eval(x)
                }
            }
        }
    }
}
