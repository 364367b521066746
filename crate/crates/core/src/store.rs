//! In-memory quad store over named graphs.
//!
//! Each graph keeps three ordered indexes (SPO, POS, OSP) so that a triple
//! pattern with any bound position becomes a range scan.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::GraphError;
use crate::term::{GraphId, Quad, Term, Triple};

type Key = (Term, Term, Term);

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GraphIndex {
    spo: BTreeSet<Key>,
    pos: BTreeSet<Key>,
    osp: BTreeSet<Key>,
}

impl GraphIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, s: Term, p: Term, o: Term) -> bool {
        if !self.spo.insert((s.clone(), p.clone(), o.clone())) {
            return false;
        }
        self.pos.insert((p.clone(), o.clone(), s.clone()));
        self.osp.insert((o, s, p));
        true
    }

    pub fn remove(&mut self, s: &Term, p: &Term, o: &Term) -> bool {
        let key = (s.clone(), p.clone(), o.clone());
        if !self.spo.remove(&key) {
            return false;
        }
        self.pos.remove(&(p.clone(), o.clone(), s.clone()));
        self.osp.remove(&(o.clone(), s.clone(), p.clone()));
        true
    }

    pub fn contains(&self, s: &Term, p: &Term, o: &Term) -> bool {
        self.spo.contains(&(s.clone(), p.clone(), o.clone()))
    }

    pub fn len(&self) -> usize {
        self.spo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spo.is_empty()
    }

    pub fn triples(&self) -> impl Iterator<Item = Triple> + '_ {
        self.spo
            .iter()
            .map(|(s, p, o)| Triple::new(s.clone(), p.clone(), o.clone()))
    }

    /// All stored triples matching the bound positions, in SPO order.
    pub fn scan(&self, s: Option<&Term>, p: Option<&Term>, o: Option<&Term>) -> Vec<Triple> {
        let mut out: Vec<Triple> = self
            .matching(s, p, o)
            .map(|(s, p, o)| Triple::new(s.clone(), p.clone(), o.clone()))
            .collect();
        if s.is_none() {
            out.sort();
        }
        out
    }

    /// Whether any stored triple matches the bound positions.
    pub fn has_match(&self, s: Option<&Term>, p: Option<&Term>, o: Option<&Term>) -> bool {
        self.matching(s, p, o).next().is_some()
    }

    /// Matching triples as `(s, p, o)` references, in index order.
    pub fn matching<'a>(
        &'a self,
        s: Option<&'a Term>,
        p: Option<&'a Term>,
        o: Option<&'a Term>,
    ) -> Box<dyn Iterator<Item = (&'a Term, &'a Term, &'a Term)> + 'a> {
        match (s, p, o) {
            (Some(s), Some(p), Some(o)) => Box::new(
                self.spo
                    .get(&(s.clone(), p.clone(), o.clone()))
                    .map(|(s, p, o)| (s, p, o))
                    .into_iter(),
            ),
            (Some(s), p, o) => {
                let lo = (
                    s.clone(),
                    p.cloned().unwrap_or_else(Term::min_value),
                    Term::min_value(),
                );
                Box::new(
                    self.spo
                        .range(lo..)
                        .take_while(move |(ks, kp, _)| ks == s && p.is_none_or(|p| kp == p))
                        .filter(move |(_, _, ko)| o.is_none_or(|o| ko == o))
                        .map(|(s, p, o)| (s, p, o)),
                )
            }
            (None, Some(p), o) => {
                let lo = (
                    p.clone(),
                    o.cloned().unwrap_or_else(Term::min_value),
                    Term::min_value(),
                );
                Box::new(
                    self.pos
                        .range(lo..)
                        .take_while(move |(kp, ko, _)| kp == p && o.is_none_or(|o| ko == o))
                        .map(|(p, o, s)| (s, p, o)),
                )
            }
            (None, None, Some(o)) => {
                let lo = (o.clone(), Term::min_value(), Term::min_value());
                Box::new(
                    self.osp
                        .range(lo..)
                        .take_while(move |(ko, _, _)| ko == o)
                        .map(|(o, s, p)| (s, p, o)),
                )
            }
            (None, None, None) => Box::new(self.spo.iter().map(|(s, p, o)| (s, p, o))),
        }
    }

    pub fn extend_from(&mut self, other: &GraphIndex) {
        for (s, p, o) in &other.spo {
            self.insert(s.clone(), p.clone(), o.clone());
        }
    }
}

/// Read access to a set of named graphs.
///
/// Implemented by [`Store`] and by [`Layered`] views that add transient
/// graphs (trusted graphs, request context) on top of a base store.
pub trait QuadSource: Sync {
    fn graph(&self, id: &GraphId) -> Option<&GraphIndex>;

    /// Declared graph ids in ascending order.
    fn graph_ids(&self) -> Vec<GraphId>;

    fn has_graph(&self, id: &GraphId) -> bool {
        self.graph(id).is_some()
    }
}

#[derive(Debug, Clone, Default)]
pub struct Store {
    graphs: BTreeMap<GraphId, GraphIndex>,
    generation: u64,
}

impl Store {
    /// A store with the default graph declared.
    pub fn new() -> Self {
        let mut store = Store::default();
        store.declare_graph(GraphId::default_graph());
        store
    }

    /// Bumped on every mutation; trusted-graph caches key on it.
    pub fn generation(&self) -> u64 {
        self.generation
    }

    /// Returns true if the graph was not declared before.
    pub fn declare_graph(&mut self, id: GraphId) -> bool {
        if self.graphs.contains_key(&id) {
            return false;
        }
        self.graphs.insert(id, GraphIndex::new());
        self.generation += 1;
        true
    }

    /// Inserts a quad, declaring its graph on first use.
    pub fn add_quad(&mut self, quad: Quad) -> Result<bool, GraphError> {
        quad.validate()?;
        let Quad {
            subject,
            predicate,
            object,
            graph,
        } = quad;
        let inserted = self
            .graphs
            .entry(graph)
            .or_default()
            .insert(subject, predicate, object);
        if inserted {
            self.generation += 1;
        }
        Ok(inserted)
    }

    pub fn remove_quad(&mut self, quad: &Quad) -> bool {
        let removed = self
            .graphs
            .get_mut(&quad.graph)
            .is_some_and(|g| g.remove(&quad.subject, &quad.predicate, &quad.object));
        if removed {
            self.generation += 1;
        }
        removed
    }

    pub fn remove_graph(&mut self, id: &GraphId) -> Option<GraphIndex> {
        let removed = self.graphs.remove(id);
        if removed.is_some() {
            self.generation += 1;
        }
        removed
    }

    pub fn contains(&self, quad: &Quad) -> bool {
        self.graphs
            .get(&quad.graph)
            .is_some_and(|g| g.contains(&quad.subject, &quad.predicate, &quad.object))
    }

    pub fn len(&self) -> usize {
        self.graphs.values().map(GraphIndex::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn quads(&self) -> impl Iterator<Item = Quad> + '_ {
        self.graphs
            .iter()
            .flat_map(|(g, idx)| idx.triples().map(move |t| t.in_graph(g.clone())))
    }

    pub fn graph_quads(&self, id: &GraphId) -> Result<Vec<Quad>, GraphError> {
        let g = self
            .graphs
            .get(id)
            .ok_or_else(|| GraphError::UnknownGraph(id.clone()))?;
        Ok(g.triples().map(|t| t.in_graph(id.clone())).collect())
    }

    /// Copies the union of `ids` into `into`, re-homing every quad.
    pub fn graph_union(&mut self, ids: &[GraphId], into: GraphId) -> Result<GraphId, GraphError> {
        let mut merged = GraphIndex::new();
        for id in ids {
            let g = self
                .graphs
                .get(id)
                .ok_or_else(|| GraphError::UnknownGraph(id.clone()))?;
            merged.extend_from(g);
        }
        let target = self.graphs.entry(into.clone()).or_default();
        target.extend_from(&merged);
        self.generation += 1;
        Ok(into)
    }
}

impl QuadSource for Store {
    fn graph(&self, id: &GraphId) -> Option<&GraphIndex> {
        self.graphs.get(id)
    }

    fn graph_ids(&self) -> Vec<GraphId> {
        self.graphs.keys().cloned().collect()
    }
}

/// A base source plus extra graphs. Overlay graphs shadow base graphs with
/// the same id.
pub struct Layered<'a> {
    base: &'a dyn QuadSource,
    overlay: BTreeMap<GraphId, &'a GraphIndex>,
}

impl<'a> Layered<'a> {
    pub fn new(base: &'a dyn QuadSource) -> Self {
        Layered {
            base,
            overlay: BTreeMap::new(),
        }
    }

    pub fn with(mut self, id: GraphId, graph: &'a GraphIndex) -> Self {
        self.overlay.insert(id, graph);
        self
    }

    pub fn push(&mut self, id: GraphId, graph: &'a GraphIndex) {
        self.overlay.insert(id, graph);
    }
}

impl QuadSource for Layered<'_> {
    fn graph(&self, id: &GraphId) -> Option<&GraphIndex> {
        self.overlay
            .get(id)
            .copied()
            .or_else(|| self.base.graph(id))
    }

    fn graph_ids(&self) -> Vec<GraphId> {
        let mut ids: BTreeSet<GraphId> = self.base.graph_ids().into_iter().collect();
        ids.extend(self.overlay.keys().cloned());
        ids.into_iter().collect()
    }
}
