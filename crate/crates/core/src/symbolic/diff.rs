use super::{Op, SymExpr, ONE, ZERO};

pub(super) fn diff(e: &SymExpr, var: &str) -> SymExpr {
    if !e.mentions(var) {
        return ZERO;
    }
    match e {
        SymExpr::Var(_) => ONE,
        SymExpr::Lit(_) => ZERO,
        SymExpr::Piecewise { guard, then, otherwise } => {
            SymExpr::piecewise((**guard).clone(), diff(then, var), diff(otherwise, var))
        }
        SymExpr::Apply(op, args) => match op {
            Op::Add => SymExpr::add(args.iter().map(|a| diff(a, var)).collect()),
            Op::Sub => SymExpr::sub(diff(&args[0], var), diff(&args[1], var)),
            Op::Neg => SymExpr::neg(diff(&args[0], var)),
            Op::Mul => {
                let mut terms = Vec::new();
                for (i, a) in args.iter().enumerate() {
                    let da = diff(a, var);
                    if da.is_zero() {
                        continue;
                    }
                    let mut factors: Vec<SymExpr> = args.clone();
                    factors[i] = da;
                    terms.push(SymExpr::mul(factors));
                }
                SymExpr::add(terms)
            }
            Op::Div => {
                let (a, b) = (&args[0], &args[1]);
                let (da, db) = (diff(a, var), diff(b, var));
                SymExpr::sub(
                    SymExpr::div(da, b.clone()),
                    SymExpr::div(SymExpr::mul(vec![a.clone(), db]), SymExpr::mul(vec![b.clone(), b.clone()])),
                )
            }
            Op::Exp => SymExpr::mul(vec![e.clone(), diff(&args[0], var)]),
            Op::Log => SymExpr::div(diff(&args[0], var), args[0].clone()),
            Op::Sqrt => SymExpr::div(diff(&args[0], var), SymExpr::mul(vec![SymExpr::Lit(2.0), e.clone()])),
            Op::NormalPdf | Op::UniformPdf => SymExpr::mul(vec![e.clone(), diff(&e.log_form(), var)]),
        },
    }
}
