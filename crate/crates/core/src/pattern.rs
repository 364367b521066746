//! Graph patterns, bindings and the left-to-right join evaluator.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::GraphError;
use crate::store::{GraphIndex, Layered, QuadSource};
use crate::term::{vocab, GraphId, Term, Triple};

/// Maximum nesting of `GraphIncludes` atoms.
pub const MAX_INCLUDES_DEPTH: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BuiltinOp {
    Eq,
    Neq,
    Lt,
    Le,
    Gt,
    Ge,
    /// `typeIs(?x, T)`: `?x rdf:type T` holds in scope.
    TypeIs,
    /// `typeIs-either(?x, ?y, T)`: either argument is typed `T`.
    TypeIsEither,
}

impl BuiltinOp {
    pub const ALL: [BuiltinOp; 8] = [
        BuiltinOp::Eq,
        BuiltinOp::Neq,
        BuiltinOp::Lt,
        BuiltinOp::Le,
        BuiltinOp::Gt,
        BuiltinOp::Ge,
        BuiltinOp::TypeIs,
        BuiltinOp::TypeIsEither,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BuiltinOp::Eq => "eq",
            BuiltinOp::Neq => "neq",
            BuiltinOp::Lt => "lt",
            BuiltinOp::Le => "le",
            BuiltinOp::Gt => "gt",
            BuiltinOp::Ge => "ge",
            BuiltinOp::TypeIs => "typeIs",
            BuiltinOp::TypeIsEither => "typeIs-either",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|op| op.name() == name)
    }

    pub fn arity(self) -> usize {
        match self {
            BuiltinOp::TypeIsEither => 3,
            _ => 2,
        }
    }

    pub fn is_comparison(self) -> bool {
        !matches!(self, BuiltinOp::TypeIs | BuiltinOp::TypeIsEither)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PatternAtom {
    Triple {
        subject: Term,
        predicate: Term,
        object: Term,
    },
    GraphIncludes {
        graph: Term,
        inner: Pattern,
    },
    Builtin {
        op: BuiltinOp,
        args: Vec<Term>,
    },
}

impl PatternAtom {
    pub fn triple(subject: Term, predicate: Term, object: Term) -> Self {
        PatternAtom::Triple {
            subject,
            predicate,
            object,
        }
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            PatternAtom::Triple {
                subject,
                predicate,
                object,
            } => {
                for t in [subject, predicate, object] {
                    if let Term::Variable(v) = t {
                        out.insert(v.to_string());
                    }
                }
            }
            PatternAtom::GraphIncludes { graph, inner } => {
                if let Term::Variable(v) = graph {
                    out.insert(v.to_string());
                }
                for atom in &inner.atoms {
                    atom.collect_vars(out);
                }
            }
            PatternAtom::Builtin { args, .. } => {
                for t in args {
                    if let Term::Variable(v) = t {
                        out.insert(v.to_string());
                    }
                }
            }
        }
    }
}

/// An ordered conjunction of atoms.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Pattern {
    pub atoms: Vec<PatternAtom>,
}

impl Pattern {
    pub fn new(atoms: Vec<PatternAtom>) -> Self {
        Pattern { atoms }
    }

    pub fn empty() -> Self {
        Pattern::default()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Every variable occurring anywhere in the pattern.
    pub fn variables(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for atom in &self.atoms {
            atom.collect_vars(&mut out);
        }
        out
    }

    /// Variables that some non-builtin atom can bind.
    pub fn binding_variables(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for atom in &self.atoms {
            if !matches!(atom, PatternAtom::Builtin { .. }) {
                atom.collect_vars(&mut out);
            }
        }
        out
    }

    /// Triples of a pattern that contains only triple atoms (a consequent template).
    pub fn template_triples(&self) -> Option<Vec<Triple>> {
        self.atoms
            .iter()
            .map(|a| match a {
                PatternAtom::Triple {
                    subject,
                    predicate,
                    object,
                } => Some(Triple::new(subject.clone(), predicate.clone(), object.clone())),
                _ => None,
            })
            .collect()
    }

    /// Checks nesting depth, builtin arity and range restriction. `prebound`
    /// lists variables the caller guarantees to bind through the seed.
    pub fn validate(&self, prebound: &BTreeSet<String>) -> Result<(), GraphError> {
        self.validate_at(prebound, 0)
    }

    fn validate_at(&self, prebound: &BTreeSet<String>, depth: usize) -> Result<(), GraphError> {
        let mut available = prebound.clone();
        available.extend(self.binding_variables());
        for atom in &self.atoms {
            match atom {
                PatternAtom::Triple {
                    subject,
                    predicate,
                    object,
                } => {
                    for t in [subject, predicate, object] {
                        t.validate()?;
                    }
                }
                PatternAtom::GraphIncludes { graph, inner } => {
                    if depth + 1 > MAX_INCLUDES_DEPTH {
                        return Err(GraphError::InvalidPattern(format!(
                            "graph includes nested deeper than {MAX_INCLUDES_DEPTH}"
                        )));
                    }
                    graph.validate()?;
                    if matches!(graph, Term::Literal { .. }) {
                        return Err(GraphError::InvalidPattern(format!(
                            "literal {graph} used as a graph name"
                        )));
                    }
                    inner.validate_at(&available, depth + 1)?;
                }
                PatternAtom::Builtin { op, args } => {
                    if args.len() != op.arity() {
                        return Err(GraphError::InvalidPattern(format!(
                            "{} takes {} arguments, got {}",
                            op.name(),
                            op.arity(),
                            args.len()
                        )));
                    }
                    for arg in args {
                        if let Term::Variable(v) = arg {
                            if !available.contains(&**v) {
                                return Err(GraphError::InvalidPattern(format!(
                                    "variable ?{v} in {} is not range-restricted",
                                    op.name()
                                )));
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Variable assignment. Ordered so that enumeration is deterministic.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Binding(BTreeMap<Arc<str>, Term>);

impl Binding {
    pub fn new() -> Self {
        Binding::default()
    }

    pub fn get(&self, var: &str) -> Option<&Term> {
        self.0.get(var)
    }

    pub fn contains(&self, var: &str) -> bool {
        self.0.contains_key(var)
    }

    /// Binds `var` if unbound. Returns false when it is already bound to a
    /// different term.
    pub fn bind(&mut self, var: &str, value: Term) -> bool {
        debug_assert!(!value.is_variable());
        match self.0.get(var) {
            Some(existing) => *existing == value,
            None => {
                self.0.insert(var.into(), value);
                true
            }
        }
    }

    fn bind_shared(&mut self, var: &Arc<str>, value: &Term) -> bool {
        match self.0.get(var) {
            Some(existing) => existing == value,
            None => {
                self.0.insert(var.clone(), value.clone());
                true
            }
        }
    }

    pub fn with(mut self, var: &str, value: Term) -> Self {
        self.bind(var, value);
        self
    }

    /// Substitutes a bound variable; other terms pass through.
    pub fn apply(&self, term: &Term) -> Term {
        match term {
            Term::Variable(v) => self.0.get(v).cloned().unwrap_or_else(|| term.clone()),
            _ => term.clone(),
        }
    }

    pub fn extends(&self, other: &Binding) -> bool {
        other.0.iter().all(|(k, v)| self.0.get(k) == Some(v))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Term)> {
        self.0.iter().map(|(k, v)| (&**k, v))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Instantiates a template triple; `None` if a variable stays unbound.
    pub fn instantiate(&self, triple: &Triple) -> Option<Triple> {
        let t = Triple::new(
            self.apply(&triple.subject),
            self.apply(&triple.predicate),
            self.apply(&triple.object),
        );
        if t.subject.is_variable() || t.predicate.is_variable() || t.object.is_variable() {
            None
        } else {
            Some(t)
        }
    }
}

impl fmt::Display for Binding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, (k, v)) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "?{k} = {v}")?;
        }
        write!(f, "}}")
    }
}

impl FromIterator<(String, Term)> for Binding {
    fn from_iter<I: IntoIterator<Item = (String, Term)>>(iter: I) -> Self {
        Binding(iter.into_iter().map(|(k, v)| (k.into(), v)).collect())
    }
}

/// Restricts one top-level atom to the newest facts of a graph (semi-naive
/// evaluation). Triple atoms read only `delta`; includes atoms over `target`
/// read `delta` instead of the full graph.
#[derive(Clone, Copy)]
pub(crate) struct DeltaRestriction<'a> {
    pub atom: usize,
    pub target: &'a GraphId,
    pub delta: &'a GraphIndex,
}

/// Returns every binding extending `seed` under which `pattern` holds in the
/// union of the `scope` graphs, sorted.
pub fn match_pattern(
    source: &dyn QuadSource,
    pattern: &Pattern,
    seed: &Binding,
    scope: &[GraphId],
) -> Result<Vec<Binding>, GraphError> {
    match_restricted(source, pattern, seed, scope, None)
}

pub(crate) fn match_restricted(
    source: &dyn QuadSource,
    pattern: &Pattern,
    seed: &Binding,
    scope: &[GraphId],
    restriction: Option<DeltaRestriction<'_>>,
) -> Result<Vec<Binding>, GraphError> {
    if scope.is_empty() {
        return Err(GraphError::EmptyScope);
    }
    for g in scope {
        if !source.has_graph(g) {
            return Err(GraphError::UnknownGraph(g.clone()));
        }
    }
    let seeds = BTreeSet::from([seed.clone()]);
    let out = eval_pattern(source, pattern, seeds, scope, restriction)?;
    Ok(out.into_iter().collect())
}

/// Matches `inner` against graph `g` alone: the semantics of an includes atom.
pub fn graph_includes(
    source: &dyn QuadSource,
    graph: &GraphId,
    inner: &Pattern,
    seed: &Binding,
) -> Result<Vec<Binding>, GraphError> {
    if !source.has_graph(graph) {
        return Err(GraphError::UnknownGraph(graph.clone()));
    }
    match_pattern(source, inner, seed, std::slice::from_ref(graph))
}

fn eval_pattern(
    source: &dyn QuadSource,
    pattern: &Pattern,
    seeds: BTreeSet<Binding>,
    scope: &[GraphId],
    restriction: Option<DeltaRestriction<'_>>,
) -> Result<BTreeSet<Binding>, GraphError> {
    let mut solutions = seeds;
    let mut pending: Vec<(BuiltinOp, &[Term])> = Vec::new();

    for (index, atom) in pattern.atoms.iter().enumerate() {
        if solutions.is_empty() {
            return Ok(solutions);
        }
        let restricted = restriction.filter(|r| r.atom == index);
        match atom {
            PatternAtom::Builtin { op, args } => pending.push((*op, args)),
            PatternAtom::Triple {
                subject,
                predicate,
                object,
            } => {
                let (cs, cp, co) = (bound(subject), bound(predicate), bound(object));
                let graphs: Vec<&GraphIndex> = match restricted {
                    Some(r) => vec![r.delta],
                    None => scope
                        .iter()
                        .filter_map(|g| source.graph(g))
                        .filter(|g| g.has_match(cs, cp, co))
                        .collect(),
                };
                let mut next = BTreeSet::new();
                if !graphs.is_empty() {
                    for sol in &solutions {
                        extend_triple(&graphs, sol, subject, predicate, object, &mut next);
                    }
                }
                solutions = next;
            }
            PatternAtom::GraphIncludes { graph, inner } => {
                let mut next = BTreeSet::new();
                for sol in &solutions {
                    next.extend(extend_includes(source, sol, graph, inner, restricted)?);
                }
                solutions = next;
            }
        }
        if !pending.is_empty() {
            solutions = apply_builtins(source, scope, &mut pending, solutions)?;
        }
    }

    if solutions.is_empty() {
        return Ok(solutions);
    }
    if let Some((op, args)) = pending.first() {
        let unbound: Vec<String> = args
            .iter()
            .filter_map(|a| a.as_variable())
            .filter(|v| solutions.iter().any(|s| !s.contains(v)))
            .map(|v| format!("?{v}"))
            .collect();
        return Err(GraphError::Evaluation(format!(
            "unbound variable {} reaches builtin {}",
            unbound.join(", "),
            op.name()
        )));
    }
    Ok(solutions)
}

fn extend_triple(
    graphs: &[&GraphIndex],
    sol: &Binding,
    subject: &Term,
    predicate: &Term,
    object: &Term,
    out: &mut BTreeSet<Binding>,
) {
    let s = sol.apply(subject);
    let p = sol.apply(predicate);
    let o = sol.apply(object);
    let (sb, pb, ob) = (bound(&s), bound(&p), bound(&o));
    for graph in graphs {
        for (ts, tp, to) in graph.matching(sb, pb, ob) {
            let mut next = sol.clone();
            if unify(&mut next, &s, ts) && unify(&mut next, &p, tp) && unify(&mut next, &o, to) {
                out.insert(next);
            }
        }
    }
}

fn bound(t: &Term) -> Option<&Term> {
    (!t.is_variable()).then_some(t)
}

fn unify(binding: &mut Binding, pattern: &Term, value: &Term) -> bool {
    match pattern {
        Term::Variable(v) => binding.bind_shared(v, value),
        other => other == value,
    }
}

fn extend_includes(
    source: &dyn QuadSource,
    sol: &Binding,
    graph: &Term,
    inner: &Pattern,
    restricted: Option<DeltaRestriction<'_>>,
) -> Result<BTreeSet<Binding>, GraphError> {
    let candidates: Vec<(GraphId, Binding)> = match sol.apply(graph) {
        Term::Iri(iri) => vec![(GraphId::new(&*iri), sol.clone())],
        Term::Variable(v) => match restricted {
            Some(r) => vec![(r.target.clone(), sol.clone().with(&v, r.target.to_term()))],
            None => source
                .graph_ids()
                .into_iter()
                .map(|g| {
                    let b = sol.clone().with(&v, g.to_term());
                    (g, b)
                })
                .collect(),
        },
        _ => Vec::new(),
    };

    let mut out = BTreeSet::new();
    for (gid, seed) in candidates {
        let seeds = BTreeSet::from([seed]);
        match restricted {
            Some(r) if &gid == r.target => {
                let view = Layered::new(source).with(gid.clone(), r.delta);
                out.extend(eval_pattern(&view, inner, seeds, &[gid], None)?);
            }
            Some(_) => {}
            None => {
                if source.has_graph(&gid) {
                    out.extend(eval_pattern(source, inner, seeds, &[gid], None)?);
                }
            }
        }
    }
    Ok(out)
}

fn apply_builtins(
    source: &dyn QuadSource,
    scope: &[GraphId],
    pending: &mut Vec<(BuiltinOp, &[Term])>,
    solutions: BTreeSet<Binding>,
) -> Result<BTreeSet<Binding>, GraphError> {
    let mut solutions = solutions;
    pending.retain(|(op, args)| {
        let mut all_bound = true;
        solutions.retain(|sol| {
            let resolved: Vec<Term> = args.iter().map(|a| sol.apply(a)).collect();
            if resolved.iter().any(Term::is_variable) {
                all_bound = false;
                return true;
            }
            eval_builtin(source, scope, *op, &resolved)
        });
        !all_bound
    });
    Ok(solutions)
}

fn has_type(source: &dyn QuadSource, scope: &[GraphId], x: &Term, class: &Term) -> bool {
    let rdf_type = Term::iri(vocab::RDF_TYPE);
    scope.iter().any(|g| {
        source
            .graph(g)
            .is_some_and(|idx| idx.contains(x, &rdf_type, class))
    })
}

fn eval_builtin(source: &dyn QuadSource, scope: &[GraphId], op: BuiltinOp, args: &[Term]) -> bool {
    use std::cmp::Ordering;
    let compare = |a: &Term, b: &Term| -> Option<Ordering> {
        match (a, b) {
            (
                Term::Literal {
                    lexical: la,
                    datatype: da,
                },
                Term::Literal {
                    lexical: lb,
                    datatype: db,
                },
            ) => (da == db).then(|| la.cmp(lb)),
            (Term::Literal { .. }, _) | (_, Term::Literal { .. }) => None,
            _ => Some(a.cmp(b)),
        }
    };
    match op {
        BuiltinOp::Eq => args[0] == args[1],
        BuiltinOp::Neq => args[0] != args[1],
        BuiltinOp::Lt => compare(&args[0], &args[1]) == Some(Ordering::Less),
        BuiltinOp::Le => matches!(
            compare(&args[0], &args[1]),
            Some(Ordering::Less | Ordering::Equal)
        ),
        BuiltinOp::Gt => compare(&args[0], &args[1]) == Some(Ordering::Greater),
        BuiltinOp::Ge => matches!(
            compare(&args[0], &args[1]),
            Some(Ordering::Greater | Ordering::Equal)
        ),
        BuiltinOp::TypeIs => has_type(source, scope, &args[0], &args[1]),
        BuiltinOp::TypeIsEither => {
            has_type(source, scope, &args[0], &args[2]) || has_type(source, scope, &args[1], &args[2])
        }
    }
}
