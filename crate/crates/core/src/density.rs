//! Evaluation of the piecewise-smooth density `(Σ η·k)(Σ ζ·l)` in log space,
//! its gradient inside the active region, and the branching vector.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use crate::compiler::Quadruple;
use crate::distributions::{IndicatorProduct, Relation};
use crate::symbolic::{EvalError, SlotExpr, SymExpr};
use crate::Real;

/// Values of the sampled variables.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct State<T> {
    pub values: BTreeMap<String, T>,
}

impl<T: Real> State<T> {
    pub fn new() -> Self {
        State { values: BTreeMap::new() }
    }

    pub fn get(&self, name: &str) -> Option<T> {
        self.values.get(name).copied()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: T) {
        self.values.insert(name.into(), value);
    }
}

impl<T: Real, S: Into<String>> FromIterator<(S, T)> for State<T> {
    fn from_iter<I: IntoIterator<Item = (S, T)>>(iter: I) -> Self {
        State { values: iter.into_iter().map(|(k, v)| (k.into(), v)).collect() }
    }
}

/// One bit per branch predicate: whether the predicate is negative.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct BranchingVector {
    pub bits: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityReport<T> {
    /// `-inf` in a zero-density region.
    pub log_density: T,
    pub active_d: usize,
    pub active_f: usize,
    pub branching: BranchingVector,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DensityError {
    #[error("state is missing variable '{0}'")]
    MissingVariable(String),
    #[error("state has unknown variable '{0}'")]
    UnknownVariable(String),
    #[error("non-finite value for '{0}'")]
    NonFinite(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{count} active entries in {list} (expected exactly one)")]
    NotAPartition { list: &'static str, count: usize },
    #[error("'{0}' is discontinuous; gradients are only defined for continuous variables")]
    Discontinuous(String),
    #[error("gradient requested in a zero-density region")]
    ZeroDensity,
}

struct Entry {
    /// guard indices that must be negative / non-negative
    lt: Vec<u64>,
    geq: Vec<u64>,
    /// `None` for an identically zero density
    log: Option<(SymExpr, SlotExpr)>,
    grads: OnceLock<Vec<Option<SlotExpr>>>,
}

impl Entry {
    fn active(&self, negative: &[u64]) -> bool {
        self.lt.iter().zip(&self.geq).zip(negative).all(|((lt, geq), neg)| lt & !neg == 0 && geq & neg == 0)
    }
}

/// A compiled quadruple prepared for repeated numeric evaluation.
pub struct Model {
    quadruple: Quadruple,
    names: Vec<String>,
    index: BTreeMap<String, usize>,
    guards: Vec<SlotExpr>,
    d: Vec<Entry>,
    f: Vec<Entry>,
    predicates: Vec<SlotExpr>,
    continuous: Vec<usize>,
    discontinuous: Vec<usize>,
}

impl std::fmt::Debug for Model {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Model")
            .field("names", &self.names)
            .field("guards", &self.guards.len())
            .field("d", &self.d.len())
            .field("f", &self.f.len())
            .finish()
    }
}

fn bit(words: &mut [u64], i: usize) {
    words[i / 64] |= 1 << (i % 64);
}

impl Model {
    pub fn new(quadruple: &Quadruple) -> Result<Model, DensityError> {
        let names: Vec<String> = quadruple.delta.iter().cloned().collect();
        let index: BTreeMap<String, usize> = names.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
        let lookup = |n: &str| index.get(n).copied();

        let mut guard_exprs: Vec<SymExpr> = Vec::new();
        let mut guards = Vec::new();
        let mut intern = |e: &SymExpr| -> Result<usize, DensityError> {
            if let Some(i) = guard_exprs.iter().position(|g| g == e) {
                return Ok(i);
            }
            guards.push(SlotExpr::compile(e, &lookup)?);
            guard_exprs.push(e.clone());
            Ok(guard_exprs.len() - 1)
        };
        let mut raw = Vec::new();
        for (eta, k) in quadruple
            .d
            .iter()
            .map(|p| (&p.eta, &p.k))
            .chain(quadruple.f.iter().map(|t| (&t.zeta, &t.l)))
        {
            let mut ids = Vec::with_capacity(eta.guards.len());
            for g in &eta.guards {
                ids.push((intern(&g.expr)?, g.relation));
            }
            raw.push((ids, k));
        }
        let words = guard_exprs.len().div_ceil(64).max(1);

        let mut entries = Vec::with_capacity(raw.len());
        for (ids, k) in raw {
            let (mut lt, mut geq) = (vec![0u64; words], vec![0u64; words]);
            for (i, rel) in ids {
                match rel {
                    Relation::LtZero => bit(&mut lt, i),
                    Relation::GeqZero => bit(&mut geq, i),
                }
            }
            let log = if k.is_zero() {
                None
            } else {
                let sym = k.log_form();
                let slot = SlotExpr::compile(&sym, &lookup)?;
                Some((sym, slot))
            };
            entries.push(Entry { lt, geq, log, grads: OnceLock::new() });
        }
        let f = entries.split_off(quadruple.d.len());

        let predicates = quadruple
            .branch_predicates
            .iter()
            .map(|b| SlotExpr::compile(&b.predicate, &lookup))
            .collect::<Result<_, _>>()?;
        let continuous = names.iter().enumerate().filter(|(_, n)| !quadruple.gamma.contains(*n)).map(|(i, _)| i).collect();
        let discontinuous = names.iter().enumerate().filter(|(_, n)| quadruple.gamma.contains(*n)).map(|(i, _)| i).collect();
        Ok(Model {
            quadruple: quadruple.clone(),
            names,
            index,
            guards,
            d: entries,
            f,
            predicates,
            continuous,
            discontinuous,
        })
    }

    pub fn quadruple(&self) -> &Quadruple {
        &self.quadruple
    }

    /// Variable names in coordinate order (sorted).
    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    /// Coordinates of `Δ \ Γ`.
    pub fn continuous(&self) -> &[usize] {
        &self.continuous
    }

    /// Coordinates of `Γ`.
    pub fn discontinuous(&self) -> &[usize] {
        &self.discontinuous
    }

    pub fn num_unique_guards(&self) -> usize {
        self.guards.len()
    }

    pub fn to_vec<T: Real>(&self, s: &State<T>) -> Result<Vec<T>, DensityError> {
        if let Some(extra) = s.values.keys().find(|k| !self.index.contains_key(*k)) {
            return Err(DensityError::UnknownVariable(extra.clone()));
        }
        self.names
            .iter()
            .map(|n| {
                let v = s.get(n).ok_or_else(|| DensityError::MissingVariable(n.clone()))?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(DensityError::NonFinite(n.clone()))
                }
            })
            .collect()
    }

    pub fn to_state<T: Real>(&self, x: &[T]) -> State<T> {
        self.names.iter().cloned().zip(x.iter().copied()).collect()
    }

    fn negative_bits<T: Real>(&self, x: &[T]) -> Result<Vec<u64>, DensityError> {
        let mut words = vec![0u64; self.guards.len().div_ceil(64).max(1)];
        for (i, g) in self.guards.iter().enumerate() {
            let v = g.eval(x)?;
            if v.is_nan() {
                return Err(EvalError::Domain("guard evaluated to NaN".into()).into());
            }
            if v < T::zero() {
                bit(&mut words, i);
            }
        }
        Ok(words)
    }

    fn active(entries: &[Entry], negative: &[u64], list: &'static str) -> Result<usize, DensityError> {
        let mut found = None;
        let mut count = 0;
        for (i, e) in entries.iter().enumerate() {
            if e.active(negative) {
                count += 1;
                found.get_or_insert(i);
            }
        }
        match (count, found) {
            (1, Some(i)) => Ok(i),
            _ => Err(DensityError::NotAPartition { list, count }),
        }
    }

    fn entry_log<T: Real>(e: &Entry, x: &[T]) -> Result<T, DensityError> {
        match &e.log {
            None => Ok(T::neg_infinity()),
            Some((_, slot)) => Ok(slot.eval(x)?),
        }
    }

    /// Indices of the active `D` and `F` entries.
    pub fn active_entries<T: Real>(&self, x: &[T]) -> Result<(usize, usize), DensityError> {
        let neg = self.negative_bits(x)?;
        Ok((Self::active(&self.d, &neg, "D")?, Self::active(&self.f, &neg, "F")?))
    }

    /// Number of active `D` and `F` entries, without failing on a broken partition.
    pub fn active_counts<T: Real>(&self, x: &[T]) -> Result<(usize, usize), DensityError> {
        let neg = self.negative_bits(x)?;
        let count = |es: &[Entry]| es.iter().filter(|e| e.active(&neg)).count();
        Ok((count(&self.d), count(&self.f)))
    }

    /// Log density at a coordinate vector.
    pub fn log_density_at<T: Real>(&self, x: &[T]) -> Result<T, DensityError> {
        let (d, f) = self.active_entries(x)?;
        let ld = Self::entry_log(&self.d[d], x)?;
        if ld == T::neg_infinity() {
            return Ok(ld);
        }
        let lf = Self::entry_log(&self.f[f], x)?;
        Ok(ld + lf)
    }

    pub fn branching_at<T: Real>(&self, x: &[T]) -> Result<BranchingVector, DensityError> {
        let bits = self
            .predicates
            .iter()
            .map(|p| Ok(p.eval(x)? < T::zero()))
            .collect::<Result<_, DensityError>>()?;
        Ok(BranchingVector { bits })
    }

    pub fn report_at<T: Real>(&self, x: &[T]) -> Result<DensityReport<T>, DensityError> {
        let (active_d, active_f) = self.active_entries(x)?;
        let ld = Self::entry_log(&self.d[active_d], x)?;
        let log_density =
            if ld == T::neg_infinity() { ld } else { ld + Self::entry_log(&self.f[active_f], x)? };
        Ok(DensityReport { log_density, active_d, active_f, branching: self.branching_at(x)? })
    }

    pub fn eval_density<T: Real>(&self, s: &State<T>) -> Result<DensityReport<T>, DensityError> {
        self.report_at(&self.to_vec(s)?)
    }

    pub fn branching_vector<T: Real>(&self, s: &State<T>) -> Result<BranchingVector, DensityError> {
        self.branching_at(&self.to_vec(s)?)
    }

    fn entry_grads<'a>(&self, e: &'a Entry) -> Result<&'a [Option<SlotExpr>], DensityError> {
        let Some((sym, _)) = &e.log else { return Err(DensityError::ZeroDensity) };
        if let Some(g) = e.grads.get() {
            return Ok(g);
        }
        let mut grads = Vec::with_capacity(self.names.len());
        for n in &self.names {
            let d = sym.diff(n);
            grads.push(if d.is_zero() { None } else { Some(SlotExpr::compile(&d, &|m| self.index_of(m))?) });
        }
        Ok(e.grads.get_or_init(|| grads))
    }

    /// Gradient of the log density with respect to the coordinates `wrt`,
    /// treating indicators as constant. No check that `wrt` is continuous.
    pub fn grad_log_density_at<T: Real>(&self, x: &[T], wrt: &[usize], out: &mut [T]) -> Result<(), DensityError> {
        let (d, f) = self.active_entries(x)?;
        let gd = self.entry_grads(&self.d[d])?;
        let gf = self.entry_grads(&self.f[f])?;
        for (o, &i) in out.iter_mut().zip(wrt) {
            let mut g = T::zero();
            for part in [&gd[i], &gf[i]].into_iter().flatten() {
                g = g + part.eval(x)?;
            }
            *o = g;
        }
        Ok(())
    }

    /// Gradient of the log density with respect to continuous variables.
    pub fn grad_log_density<T: Real>(
        &self,
        s: &State<T>,
        wrt: &BTreeSet<String>,
    ) -> Result<BTreeMap<String, T>, DensityError> {
        let x = self.to_vec(s)?;
        let mut coords = Vec::with_capacity(wrt.len());
        for n in wrt {
            if self.quadruple.gamma.contains(n) {
                return Err(DensityError::Discontinuous(n.clone()));
            }
            coords.push(self.index_of(n).ok_or_else(|| DensityError::UnknownVariable(n.clone()))?);
        }
        let mut out = vec![T::zero(); coords.len()];
        self.grad_log_density_at(&x, &coords, &mut out)?;
        Ok(wrt.iter().cloned().zip(out).collect())
    }

    /// Active indicator product of each list, for diagnostics.
    pub fn active_products<T: Real>(&self, x: &[T]) -> Result<(&IndicatorProduct, &IndicatorProduct), DensityError> {
        let (d, f) = self.active_entries(x)?;
        Ok((&self.quadruple.d[d].eta, &self.quadruple.f[f].zeta))
    }
}

/// Evaluate a symbolic expression at a state.
pub fn eval_sym<T: Real>(e: &SymExpr, s: &State<T>) -> Result<T, EvalError> {
    e.eval(&|n: &str| s.get(n))
}
