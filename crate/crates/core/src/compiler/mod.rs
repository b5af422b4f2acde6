//! Translation of a core program into the quadruple `(Δ, Γ, D, F)`.
//!
//! `Δ` holds the sampled variables, `Γ ⊆ Δ` those that some branch predicate
//! depends on, `D` the (indicator product, density) pairs contributed by
//! `sample` statements and `F` the (indicator product, likelihood, value)
//! triples contributed by `observe` statements together with the returned
//! value. The unnormalised density is `(Σ η·k)(Σ ζ·l)`.

pub mod dump;

use std::collections::{BTreeMap, BTreeSet};

use crate::distributions::{schema_for, DistributionSchema, Guard, IndicatorProduct, Relation};
use crate::parser::{CoreDist, Expr, ParseError, PrimOp, Program};
use crate::symbolic::{EvalError, Op, SymExpr, ONE, ZERO};

pub use dump::to_json;

/// Upper bound on the size of any intermediate `D` or `F` list.
pub const MAX_ENTRIES: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq)]
pub struct DensityPair {
    pub eta: IndicatorProduct,
    pub k: SymExpr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactorTriple {
    pub zeta: IndicatorProduct,
    pub l: SymExpr,
    pub v: SymExpr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchPredicate {
    pub id: usize,
    /// The branch is taken when this is negative.
    pub predicate: SymExpr,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Quadruple {
    pub delta: BTreeSet<String>,
    pub gamma: BTreeSet<String>,
    pub d: Vec<DensityPair>,
    pub f: Vec<FactorTriple>,
    pub branch_predicates: Vec<BranchPredicate>,
}

impl Quadruple {
    /// `(Δ \ Γ, Γ)`: variables handled by leapfrog and by the
    /// coordinate-wise integrator respectively.
    pub fn classify_variables(&self) -> (BTreeSet<String>, BTreeSet<String>) {
        (self.delta.difference(&self.gamma).cloned().collect(), self.gamma.clone())
    }

    /// `D` pairs whose density is not identically zero.
    pub fn nonzero_d(&self) -> impl Iterator<Item = &DensityPair> {
        self.d.iter().filter(|p| !p.k.is_zero())
    }
}

/// A `sample` statement, in evaluation order.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSite {
    pub name: String,
    pub dist: CoreDist,
    /// the `let` name bound directly to this sample, if any
    pub binder: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompiledProgram {
    pub program: Program,
    pub quadruple: Quadruple,
    /// One entry per `sample` statement in evaluation order.
    pub sites: Vec<SampleSite>,
}

impl CompiledProgram {
    /// Sampled variable bound by `let [binder (sample ...)]`.
    pub fn variable_for(&self, binder: &str) -> Option<&str> {
        self.sites.iter().find(|s| s.binder.as_deref() == Some(binder)).map(|s| s.name.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CompileError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("unbound variable '{0}'")]
    FreeVariable(String),
    #[error("error evaluating a constant expression: {0}")]
    Eval(#[from] EvalError),
    #[error("program expands to more than {MAX_ENTRIES} density entries")]
    TooLarge,
}

/// Issues fresh names disjoint from a reserved set and from each other.
#[derive(Debug, Clone, Default)]
pub struct FreshNames {
    reserved: BTreeSet<String>,
    counters: BTreeMap<String, usize>,
}

impl FreshNames {
    pub fn new(reserved: BTreeSet<String>) -> Self {
        FreshNames { reserved, counters: BTreeMap::new() }
    }

    /// `z1`, `z2`, ... for hint `z`, suffixed with `$k` on collision.
    pub fn next(&mut self, hint: &str) -> String {
        let n = self.counters.entry(hint.to_string()).or_insert(0);
        *n += 1;
        let mut name = format!("{hint}{n}");
        let mut k = 0;
        while self.reserved.contains(&name) {
            k += 1;
            name = format!("{hint}{n}${k}");
        }
        self.reserved.insert(name.clone());
        name
    }
}

struct Part {
    delta: BTreeSet<String>,
    gamma: BTreeSet<String>,
    d: Vec<DensityPair>,
    f: Vec<FactorTriple>,
}

impl Part {
    fn leaf(delta: BTreeSet<String>, v: SymExpr) -> Part {
        Part {
            delta,
            gamma: BTreeSet::new(),
            d: vec![DensityPair { eta: IndicatorProduct::one(), k: ONE }],
            f: vec![FactorTriple { zeta: IndicatorProduct::one(), l: ONE, v }],
        }
    }
}

struct Translator {
    names: FreshNames,
    sites: Vec<SampleSite>,
    predicates: Vec<SymExpr>,
}

fn union<'a>(sets: impl IntoIterator<Item = &'a BTreeSet<String>>) -> BTreeSet<String> {
    sets.into_iter().flatten().cloned().collect()
}

/// All index tuples of the cartesian product of lists with the given lengths.
fn odometer(lens: &[usize]) -> Vec<Vec<usize>> {
    if lens.contains(&0) {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut idx = vec![0; lens.len()];
    loop {
        out.push(idx.clone());
        let mut i = lens.len();
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            idx[i] += 1;
            if idx[i] < lens[i] {
                break;
            }
            idx[i] = 0;
        }
    }
}

/// Split on the first `Piecewise` node found in a guard or in one of the
/// `dense` expressions, recursively, so that the result is piecewise free.
/// Variables of the lifted guards are recorded as discontinuous.
fn lift_piecewise(
    eta: IndicatorProduct,
    dense: Vec<SymExpr>,
    gamma: &mut BTreeSet<String>,
    out: &mut Vec<(IndicatorProduct, Vec<SymExpr>)>,
) {
    let found = eta
        .guards
        .iter()
        .find_map(|g| g.expr.find_piecewise())
        .or_else(|| dense.iter().find_map(SymExpr::find_piecewise))
        .cloned();
    let Some(node) = found else {
        out.push((eta, dense));
        return;
    };
    let SymExpr::Piecewise { guard, then, otherwise } = &node else { unreachable!() };
    guard.collect_vars(gamma);
    for (branch, relation) in [(then, Relation::LtZero), (otherwise, Relation::GeqZero)] {
        let eta_b = IndicatorProduct {
            guards: eta
                .guards
                .iter()
                .map(|g| Guard { expr: g.expr.replace(&node, branch), relation: g.relation })
                .collect(),
        }
        .with(Guard { expr: (**guard).clone(), relation });
        let dense_b = dense.iter().map(|e| e.replace(&node, branch)).collect();
        lift_piecewise(eta_b, dense_b, gamma, out);
    }
}

fn finish_d(
    eta: IndicatorProduct,
    k: SymExpr,
    gamma: &mut BTreeSet<String>,
    out: &mut Vec<DensityPair>,
) -> Result<(), CompileError> {
    let mut pieces = Vec::new();
    lift_piecewise(eta, vec![k], gamma, &mut pieces);
    for (eta, mut dense) in pieces {
        if let Some(eta) = eta.fold_closed()? {
            out.push(DensityPair { eta, k: dense.pop().expect("one density") });
        }
    }
    if out.len() > MAX_ENTRIES {
        return Err(CompileError::TooLarge);
    }
    Ok(())
}

fn finish_f(
    zeta: IndicatorProduct,
    l: SymExpr,
    v: SymExpr,
    gamma: &mut BTreeSet<String>,
    out: &mut Vec<FactorTriple>,
) -> Result<(), CompileError> {
    let mut pieces = Vec::new();
    lift_piecewise(zeta, vec![l], gamma, &mut pieces);
    for (zeta, mut dense) in pieces {
        if let Some(zeta) = zeta.fold_closed()? {
            out.push(FactorTriple { zeta, l: dense.pop().expect("one density"), v: v.clone() });
        }
    }
    if out.len() > MAX_ENTRIES {
        return Err(CompileError::TooLarge);
    }
    Ok(())
}

/// Product of several `D` lists. Each list partitions the state space, so
/// a combination whose first identically-zero factor sits in list `i` can be
/// summed over lists `> i`, leaving a single zero entry per prefix.
fn product_d(lists: &[&[DensityPair]]) -> Result<Vec<DensityPair>, CompileError> {
    let mut out = Vec::new();
    let mut prefixes: Vec<(IndicatorProduct, Vec<&SymExpr>)> = vec![(IndicatorProduct::one(), vec![])];
    for list in lists {
        let mut next = Vec::new();
        for (eta, ks) in &prefixes {
            for pair in list.iter() {
                let eta = eta.times(&pair.eta);
                if pair.k.is_zero() {
                    if let Some(eta) = eta.fold_closed()? {
                        out.push(DensityPair { eta, k: ZERO });
                    }
                } else {
                    let mut ks = ks.clone();
                    ks.push(&pair.k);
                    next.push((eta, ks));
                }
            }
        }
        if next.len() + out.len() > MAX_ENTRIES {
            return Err(CompileError::TooLarge);
        }
        prefixes = next;
    }
    let mut nonzero = Vec::with_capacity(prefixes.len());
    for (eta, ks) in prefixes {
        if let Some(eta) = eta.fold_closed()? {
            nonzero.push(DensityPair { eta, k: SymExpr::mul(ks.into_iter().cloned().collect()) });
        }
    }
    nonzero.extend(out);
    Ok(nonzero)
}

/// Cartesian product of `F` lists, combining values with `combine`.
fn product_f(
    lists: &[&[FactorTriple]],
    combine: impl Fn(Vec<SymExpr>) -> SymExpr,
) -> Result<Vec<FactorTriple>, CompileError> {
    let lens: Vec<usize> = lists.iter().map(|l| l.len()).collect();
    let mut out = Vec::new();
    for idx in odometer(&lens) {
        let mut zeta = IndicatorProduct::one();
        let mut ls = Vec::with_capacity(idx.len());
        let mut vs = Vec::with_capacity(idx.len());
        for (list, &i) in lists.iter().zip(&idx) {
            zeta = zeta.times(&list[i].zeta);
            ls.push(list[i].l.clone());
            vs.push(list[i].v.clone());
        }
        if let Some(zeta) = zeta.fold_closed()? {
            out.push(FactorTriple { zeta, l: SymExpr::mul(ls), v: combine(vs) });
        }
        if out.len() > MAX_ENTRIES {
            return Err(CompileError::TooLarge);
        }
    }
    Ok(out)
}

pub(crate) fn prim_apply(op: PrimOp, mut vs: Vec<SymExpr>) -> SymExpr {
    match op {
        PrimOp::Add => SymExpr::add(vs),
        PrimOp::Mul => SymExpr::mul(vs),
        PrimOp::Sub if vs.len() == 1 => SymExpr::neg(vs.pop().expect("one argument")),
        PrimOp::Sub => {
            let mut it = vs.into_iter();
            let first = it.next().expect("arguments");
            it.fold(first, SymExpr::sub)
        }
        PrimOp::Div => {
            let b = vs.pop().expect("two arguments");
            let a = vs.pop().expect("two arguments");
            SymExpr::div(a, b)
        }
        PrimOp::Exp => SymExpr::unary(Op::Exp, vs.pop().expect("one argument")),
        PrimOp::Log => SymExpr::unary(Op::Log, vs.pop().expect("one argument")),
        PrimOp::Sqrt => SymExpr::unary(Op::Sqrt, vs.pop().expect("one argument")),
    }
}

/// `then` where every guard holds, `otherwise` elsewhere.
fn select(guards: &[Guard], then: SymExpr, otherwise: &SymExpr) -> SymExpr {
    guards.iter().rev().fold(then, |inner, g| match g.relation {
        Relation::LtZero => SymExpr::piecewise(g.expr.clone(), inner, otherwise.clone()),
        Relation::GeqZero => SymExpr::piecewise(g.expr.clone(), otherwise.clone(), inner),
    })
}

/// The value of an expression as a single (possibly piecewise) expression.
pub fn value_of(f: &[FactorTriple]) -> SymExpr {
    let Some(last) = f.last() else { return ZERO };
    if f.iter().all(|t| t.v == last.v) {
        return last.v.clone();
    }
    f[..f.len() - 1].iter().rev().fold(last.v.clone(), |acc, t| select(&t.zeta.guards, t.v.clone(), &acc))
}

/// Substitute schema placeholders `x0..xs`.
fn instantiate(
    schema: &DistributionSchema,
    value: &SymExpr,
    params: &[&SymExpr],
) -> Vec<(IndicatorProduct, SymExpr)> {
    let names: Vec<String> = (0..=schema.arity).map(DistributionSchema::placeholder).collect();
    let mut subs: Vec<(&str, &SymExpr)> = vec![(names[0].as_str(), value)];
    subs.extend(names[1..].iter().map(String::as_str).zip(params.iter().copied()));
    schema
        .all_pairs()
        .map(|(psi, phi)| (psi.substitute_all(&subs), phi.substitute_all(&subs)))
        .collect()
}

impl Translator {
    fn translate(&mut self, e: &Expr) -> Result<Part, CompileError> {
        match e {
            Expr::Var(x) => Ok(Part::leaf(BTreeSet::from([x.clone()]), SymExpr::var(x))),
            Expr::Const(c) => Ok(Part::leaf(BTreeSet::new(), SymExpr::Lit(*c))),
            Expr::PrimOp { op, args } => {
                let parts = self.translate_all(args)?;
                let op = *op;
                self.combine(parts, move |vs| prim_apply(op, vs))
            }
            Expr::Indicator(inner) => {
                let part = self.translate(inner)?;
                let f = part
                    .f
                    .into_iter()
                    .map(|t| {
                        let v = SymExpr::piecewise(t.v, ONE, ZERO);
                        let v = match v.eval_closed() {
                            Ok(c) => SymExpr::Lit(c),
                            Err(_) => v,
                        };
                        FactorTriple { v, ..t }
                    })
                    .collect();
                Ok(Part { f, ..part })
            }
            Expr::If { pred, then, otherwise } => self.translate_if(pred, then, otherwise),
            Expr::Let { var, def, body } => self.translate_let(var, def, body),
            Expr::Sample { dist, args } => self.translate_sample(*dist, args),
            Expr::Observe { dist, args, observed } => self.translate_observe(*dist, args, *observed),
        }
    }

    fn translate_all(&mut self, args: &[Expr]) -> Result<Vec<Part>, CompileError> {
        args.iter().map(|a| self.translate(a)).collect()
    }

    fn combine(&mut self, parts: Vec<Part>, op: impl Fn(Vec<SymExpr>) -> SymExpr) -> Result<Part, CompileError> {
        let ds: Vec<&[DensityPair]> = parts.iter().map(|p| p.d.as_slice()).collect();
        let fs: Vec<&[FactorTriple]> = parts.iter().map(|p| p.f.as_slice()).collect();
        let mut gamma = union(parts.iter().map(|p| &p.gamma));
        let d = product_d(&ds)?;
        let mut f = Vec::new();
        for t in product_f(&fs, op)? {
            finish_f(t.zeta, t.l, t.v, &mut gamma, &mut f)?;
        }
        Ok(Part { delta: union(parts.iter().map(|p| &p.delta)), gamma, d, f })
    }

    fn translate_if(&mut self, pred: &Expr, then: &Expr, otherwise: &Expr) -> Result<Part, CompileError> {
        let p1 = self.translate(pred)?;
        self.predicates.push(value_of(&p1.f));
        let p2 = self.translate(then)?;
        let p3 = self.translate(otherwise)?;
        let mut gamma = union([&p1.delta, &p2.gamma, &p3.gamma]);
        let d = product_d(&[&p1.d, &p2.d, &p3.d])?;
        let mut f = Vec::new();
        for t1 in &p1.f {
            for (branch, relation) in [(&p2.f, Relation::LtZero), (&p3.f, Relation::GeqZero)] {
                for t in branch {
                    let zeta = t1.zeta.times(&t.zeta).with(Guard { expr: t1.v.clone(), relation });
                    let l = SymExpr::mul(vec![t1.l.clone(), t.l.clone()]);
                    finish_f(zeta, l, t.v.clone(), &mut gamma, &mut f)?;
                }
            }
        }
        Ok(Part { delta: union([&p1.delta, &p2.delta, &p3.delta]), gamma, d, f })
    }

    fn translate_let(&mut self, x: &str, def: &Expr, body: &Expr) -> Result<Part, CompileError> {
        let p1 = self.translate(def)?;
        if matches!(def, Expr::Sample { .. }) {
            if let Some(site) = self.sites.last_mut() {
                site.binder = Some(x.to_string());
            }
        }
        let first_predicate = self.predicates.len();
        let p2 = self.translate(body)?;

        let bound = value_of(&p1.f);
        for p in &mut self.predicates[first_predicate..] {
            *p = p.substitute(x, &bound);
        }

        let mut delta0 = BTreeSet::new();
        for t in &p1.f {
            t.v.collect_vars(&mut delta0);
        }
        let replace_x = |set2: &BTreeSet<String>, set1: &BTreeSet<String>| {
            let mut out = set1.clone();
            out.extend(set2.iter().filter(|n| *n != x).cloned());
            if set2.contains(x) {
                out.extend(delta0.iter().cloned());
            }
            out
        };
        let delta = replace_x(&p2.delta, &p1.delta);
        let mut gamma = replace_x(&p2.gamma, &p1.gamma);

        let mentions_x = |p: &DensityPair| p.eta.guards.iter().any(|g| g.expr.mentions(x));
        let mut d = Vec::new();
        let mut zeros = Vec::new();
        for pair1 in &p1.d {
            if pair1.k.is_zero() {
                zeros.push(pair1.clone());
                continue;
            }
            for pair2 in p2.d.iter().filter(|p| p.k.is_zero() && !mentions_x(p)) {
                finish_d(pair1.eta.times(&pair2.eta), ZERO, &mut gamma, &mut zeros)?;
            }
            for t1 in &p1.f {
                let subs = [(x, &t1.v)];
                for pair2 in &p2.d {
                    if pair2.k.is_zero() && !mentions_x(pair2) {
                        continue;
                    }
                    let eta2 = pair2.eta.substitute_all(&subs);
                    let eta = t1.zeta.times(&pair1.eta).times(&eta2);
                    let k = SymExpr::mul(vec![pair1.k.clone(), pair2.k.substitute_all(&subs)]);
                    finish_d(eta, k, &mut gamma, &mut d)?;
                }
            }
        }
        d.extend(zeros);

        let mut f = Vec::new();
        for t1 in &p1.f {
            let subs = [(x, &t1.v)];
            for t2 in &p2.f {
                let zeta = t1.zeta.times(&t2.zeta.substitute_all(&subs));
                let l = SymExpr::mul(vec![t1.l.clone(), t2.l.substitute_all(&subs)]);
                finish_f(zeta, l, t2.v.substitute_all(&subs), &mut gamma, &mut f)?;
            }
        }
        Ok(Part { delta, gamma, d, f })
    }

    fn translate_sample(&mut self, dist: CoreDist, args: &[Expr]) -> Result<Part, CompileError> {
        let parts = self.translate_all(args)?;
        let z = self.names.next("z");
        self.sites.push(SampleSite { name: z.clone(), dist, binder: None });
        let zv = SymExpr::var(&z);
        let schema = schema_for(dist);

        let mut gamma = union(parts.iter().map(|p| &p.gamma));
        let fs: Vec<&[FactorTriple]> = parts.iter().map(|p| p.f.as_slice()).collect();
        let mut d0 = Vec::new();
        for idx in odometer(&fs.iter().map(|f| f.len()).collect::<Vec<_>>()) {
            let chosen: Vec<&FactorTriple> = fs.iter().zip(&idx).map(|(f, &i)| &f[i]).collect();
            let zeta = chosen.iter().fold(IndicatorProduct::one(), |acc, t| acc.times(&t.zeta));
            let params: Vec<&SymExpr> = chosen.iter().map(|t| &t.v).collect();
            for (psi, phi) in instantiate(schema, &zv, &params) {
                finish_d(psi.times(&zeta), phi, &mut gamma, &mut d0)?;
            }
        }
        let mut ds: Vec<&[DensityPair]> = vec![&d0];
        ds.extend(parts.iter().map(|p| p.d.as_slice()));
        let d = product_d(&ds)?;
        let mut f = Vec::new();
        for t in product_f(&fs, |_| zv.clone())? {
            finish_f(t.zeta, t.l, t.v, &mut gamma, &mut f)?;
        }
        let mut delta = union(parts.iter().map(|p| &p.delta));
        delta.insert(z);
        Ok(Part { delta, gamma, d, f })
    }

    fn translate_observe(&mut self, dist: CoreDist, args: &[Expr], observed: f64) -> Result<Part, CompileError> {
        let parts = self.translate_all(args)?;
        let schema = schema_for(dist);
        let mut gamma = union(parts.iter().map(|p| &p.gamma));
        let ds: Vec<&[DensityPair]> = parts.iter().map(|p| p.d.as_slice()).collect();
        let d = product_d(&ds)?;
        let fs: Vec<&[FactorTriple]> = parts.iter().map(|p| p.f.as_slice()).collect();
        let c = SymExpr::Lit(observed);
        let mut f = Vec::new();
        for idx in odometer(&fs.iter().map(|f| f.len()).collect::<Vec<_>>()) {
            let chosen: Vec<&FactorTriple> = fs.iter().zip(&idx).map(|(f, &i)| &f[i]).collect();
            let zeta = chosen.iter().fold(IndicatorProduct::one(), |acc, t| acc.times(&t.zeta));
            let params: Vec<&SymExpr> = chosen.iter().map(|t| &t.v).collect();
            let ls: Vec<SymExpr> = chosen.iter().map(|t| t.l.clone()).collect();
            for (psi, phi) in instantiate(schema, &c, &params) {
                let mut factors = vec![phi];
                factors.extend(ls.iter().cloned());
                finish_f(psi.times(&zeta), SymExpr::mul(factors), ZERO, &mut gamma, &mut f)?;
            }
        }
        Ok(Part { delta: union(parts.iter().map(|p| &p.delta)), gamma, d, f })
    }
}

/// Translate a closed program.
pub fn compile(program: &Program) -> Result<CompiledProgram, CompileError> {
    let mut reserved = BTreeSet::new();
    program.root.identifiers(&mut reserved);
    let mut t = Translator { names: FreshNames::new(reserved), sites: Vec::new(), predicates: Vec::new() };
    let part = t.translate(&program.root)?;

    let sampled: BTreeSet<String> = t.sites.iter().map(|s| s.name.clone()).collect();
    if let Some(v) = part.delta.iter().find(|v| !sampled.contains(*v)) {
        return Err(CompileError::FreeVariable(v.clone()));
    }
    let mut mentioned = BTreeSet::new();
    for p in &part.d {
        p.eta.guards.iter().for_each(|g| g.expr.collect_vars(&mut mentioned));
        p.k.collect_vars(&mut mentioned);
    }
    for t in &part.f {
        t.zeta.guards.iter().for_each(|g| g.expr.collect_vars(&mut mentioned));
        t.l.collect_vars(&mut mentioned);
        t.v.collect_vars(&mut mentioned);
    }
    t.predicates.iter().for_each(|p| p.collect_vars(&mut mentioned));
    if let Some(v) = mentioned.iter().find(|v| !part.delta.contains(*v)) {
        return Err(CompileError::FreeVariable(v.clone()));
    }

    let quadruple = Quadruple {
        delta: part.delta,
        gamma: part.gamma,
        d: part.d,
        f: part.f,
        branch_predicates: t
            .predicates
            .into_iter()
            .enumerate()
            .map(|(id, predicate)| BranchPredicate { id, predicate })
            .collect(),
    };
    Ok(CompiledProgram { program: program.clone(), quadruple, sites: t.sites })
}

/// Front end plus translation.
pub fn compile_source(
    source: &str,
    source_name: &str,
    constants: &BTreeMap<String, f64>,
) -> Result<CompiledProgram, CompileError> {
    compile(&Program::from_source(source, source_name, constants)?)
}
