//! Knowledge items as nanopublications, and the registry of agent–KI
//! relation types that make an agent eligible to author usage rules.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{GraphError, KiError};
use crate::store::{GraphIndex, QuadSource, Store};
use crate::syntax::trig::TrigDocument;
use crate::syntax::Prefixes;
use crate::term::{vocab, GraphId, Quad, Term, Triple};

/// A nanopublication: an id plus its assertion, provenance and
/// publication-info graphs.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct KnowledgeItem {
    pub id: String,
    pub assertions: GraphId,
    pub provenance: GraphId,
    pub pubinfo: GraphId,
}

impl KnowledgeItem {
    /// The conventional graph ids for a new item.
    pub fn with_default_graphs(id: &str) -> Self {
        KnowledgeItem {
            id: id.to_string(),
            assertions: GraphId(format!("{id}/assertion")),
            provenance: GraphId(format!("{id}/provenance")),
            pubinfo: GraphId(format!("{id}/pubinfo")),
        }
    }

    pub fn graphs(&self) -> [&GraphId; 3] {
        [&self.assertions, &self.provenance, &self.pubinfo]
    }

    /// First `kgu:author` recorded in the pubinfo graph. An element shares
    /// its parent's pubinfo, so when nothing is recorded for this id the
    /// author of a KI linking the same pubinfo graph is used.
    pub fn author(&self, source: &dyn QuadSource) -> Option<String> {
        let pubinfo = source.graph(&self.pubinfo)?;
        let author_of = |id: &Term| {
            pubinfo
                .scan(Some(id), Some(&Term::iri(vocab::AUTHOR)), None)
                .into_iter()
                .find_map(|t| t.object.as_iri().map(str::to_string))
        };
        author_of(&Term::iri(self.id.clone())).or_else(|| {
            source
                .graph(&GraphId::default_graph())?
                .scan(
                    None,
                    Some(&Term::iri(vocab::HAS_PUBINFO_GRAPH)),
                    Some(&self.pubinfo.to_term()),
                )
                .into_iter()
                .find_map(|t| author_of(&t.subject))
        })
    }

    pub fn linkage_triples(&self) -> [Triple; 3] {
        let id = Term::iri(self.id.clone());
        [
            Triple::new(id.clone(), Term::iri(vocab::HAS_ASSERTION_GRAPH), self.assertions.to_term()),
            Triple::new(id.clone(), Term::iri(vocab::HAS_PROVENANCE_GRAPH), self.provenance.to_term()),
            Triple::new(id, Term::iri(vocab::HAS_PUBINFO_GRAPH), self.pubinfo.to_term()),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum RelationKind {
    Identifies,
    Mentions,
    Authorship,
    CreationRelated,
    Jurisdiction,
}

impl fmt::Display for RelationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RelationKind::Identifies => "identifies",
            RelationKind::Mentions => "mentions",
            RelationKind::Authorship => "authorship",
            RelationKind::CreationRelated => "creationRelated",
            RelationKind::Jurisdiction => "jurisdiction",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationEntry {
    pub kind: RelationKind,
    /// Smaller ranks take precedence.
    pub rank: i64,
}

/// Relation types that make an agent eligible to author usage rules for a KI.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RelationTypeRegistry {
    entries: BTreeMap<String, RelationEntry>,
}

impl RelationTypeRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns false if the relation was already registered.
    pub fn register(&mut self, relation: impl Into<String>, kind: RelationKind, rank: i64) -> bool {
        let relation = relation.into();
        if self.entries.contains_key(&relation) {
            return false;
        }
        self.entries.insert(relation, RelationEntry { kind, rank });
        true
    }

    pub fn get(&self, relation: &str) -> Option<RelationEntry> {
        self.entries.get(relation).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, RelationEntry)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn jurisdiction_relations(&self) -> impl Iterator<Item = &str> {
        self.entries
            .iter()
            .filter(|(_, e)| e.kind == RelationKind::Jurisdiction)
            .map(|(k, _)| k.as_str())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RelatedAgent {
    pub agent: String,
    pub relation: String,
    pub kind: RelationKind,
}

/// Agents related to a KI:
/// subjects and objects of registered relations in its assertion graph, its
/// pubinfo author, and (one hop) any agent holding a registered jurisdiction
/// relation in the default graph over one of those.
pub fn related_agents(
    source: &dyn QuadSource,
    ki: &KnowledgeItem,
    registry: &RelationTypeRegistry,
) -> BTreeSet<RelatedAgent> {
    let mut out = BTreeSet::new();
    if let Some(assertions) = source.graph(&ki.assertions) {
        for t in assertions.triples() {
            let Some(entry) = t.predicate.as_iri().and_then(|p| registry.get(p)) else {
                continue;
            };
            for end in [&t.subject, &t.object] {
                if let Some(agent) = end.as_iri() {
                    out.insert(RelatedAgent {
                        agent: agent.to_string(),
                        relation: t.predicate.as_iri().unwrap_or_default().to_string(),
                        kind: entry.kind,
                    });
                }
            }
        }
    }
    if let Some(author) = ki.author(source) {
        out.insert(RelatedAgent {
            agent: author,
            relation: vocab::AUTHOR.to_string(),
            kind: RelationKind::Authorship,
        });
    }

    let direct: BTreeSet<String> = out.iter().map(|r| r.agent.clone()).collect();
    if let Some(default) = source.graph(&GraphId::default_graph()) {
        for rel in registry.jurisdiction_relations() {
            let rel_term = Term::iri(rel);
            for agent in &direct {
                for t in default.scan(None, Some(&rel_term), Some(&Term::iri(agent.clone()))) {
                    if let Some(j) = t.subject.as_iri() {
                        out.insert(RelatedAgent {
                            agent: j.to_string(),
                            relation: rel.to_string(),
                            kind: RelationKind::Jurisdiction,
                        });
                    }
                }
            }
        }
    }
    out
}

/// One assertion of a KI, viewed as a KI of its own that shares the parent's
/// provenance and pubinfo graphs. Elements are never stored.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KiElement {
    pub parent: String,
    pub index: usize,
    pub assertion: Triple,
    pub ki: KnowledgeItem,
}

/// One element per assertion quad, in SPO order.
pub fn decompose_ki(source: &dyn QuadSource, ki: &KnowledgeItem) -> Vec<KiElement> {
    let Some(assertions) = source.graph(&ki.assertions) else {
        return Vec::new();
    };
    assertions
        .triples()
        .enumerate()
        .map(|(index, assertion)| {
            let id = format!("{}/element/{index}", ki.id);
            KiElement {
                parent: ki.id.clone(),
                index,
                assertion,
                ki: KnowledgeItem {
                    assertions: GraphId(format!("{id}/assertion")),
                    provenance: ki.provenance.clone(),
                    pubinfo: ki.pubinfo.clone(),
                    id,
                },
            }
        })
        .collect()
}

impl KiElement {
    /// Transient graphs that let rules see the element as a KI: its
    /// single-assertion graph and its linkage triples.
    pub fn graphs(&self) -> (GraphIndex, GraphIndex) {
        let mut assertion = GraphIndex::new();
        let a = self.assertion.clone();
        assertion.insert(a.subject, a.predicate, a.object);
        let mut links = GraphIndex::new();
        for t in self.ki.linkage_triples() {
            links.insert(t.subject, t.predicate, t.object);
        }
        (assertion, links)
    }
}

/// A quad store plus the knowledge items registered in it.
#[derive(Debug, Clone)]
pub struct KnowledgeGraph {
    store: Store,
    kis: BTreeMap<String, KnowledgeItem>,
    prefixes: Prefixes,
}

impl Default for KnowledgeGraph {
    fn default() -> Self {
        Self::new()
    }
}

const LINKAGE: [&str; 3] = [
    vocab::HAS_ASSERTION_GRAPH,
    vocab::HAS_PROVENANCE_GRAPH,
    vocab::HAS_PUBINFO_GRAPH,
];

fn check_pubinfo(ki: &str, pubinfo: &GraphIndex, line: Option<usize>) -> Result<(), KiError> {
    let id = Term::iri(ki);
    let invalid = |reason: &str| KiError::InvalidPubinfo {
        ki: ki.to_string(),
        reason: reason.to_string(),
        line,
    };
    let authors = pubinfo.scan(Some(&id), Some(&Term::iri(vocab::AUTHOR)), None);
    if !authors.iter().any(|t| t.object.as_iri().is_some()) {
        return Err(invalid("missing kgu:author agent"));
    }
    let created = pubinfo.scan(Some(&id), Some(&Term::iri(vocab::CREATED_AT)), None);
    if !created
        .iter()
        .any(|t| matches!(t.object, Term::Literal { .. }))
    {
        return Err(invalid("missing kgu:createdAt literal"));
    }
    Ok(())
}

impl KnowledgeGraph {
    pub fn new() -> Self {
        KnowledgeGraph {
            store: Store::new(),
            kis: BTreeMap::new(),
            prefixes: Prefixes::default(),
        }
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    pub fn prefixes(&self) -> &Prefixes {
        &self.prefixes
    }

    pub fn merge_prefixes(&mut self, prefixes: &Prefixes) {
        self.prefixes.merge(prefixes);
    }

    pub fn generation(&self) -> u64 {
        self.store.generation()
    }

    pub fn ki(&self, id: &str) -> Option<&KnowledgeItem> {
        self.kis.get(id)
    }

    pub fn kis(&self) -> impl Iterator<Item = &KnowledgeItem> {
        self.kis.values()
    }

    pub fn ki_count(&self) -> usize {
        self.kis.len()
    }

    pub fn add_quad(&mut self, quad: Quad) -> Result<bool, GraphError> {
        self.store.add_quad(quad)
    }

    pub fn remove_quad(&mut self, quad: &Quad) -> bool {
        self.store.remove_quad(quad)
    }

    pub fn add_default(&mut self, triple: Triple) -> Result<bool, GraphError> {
        self.store.add_quad(triple.in_graph(GraphId::default_graph()))
    }

    /// Creates and populates the three graphs of a new KI and writes its
    /// linkage triples to the default graph.
    pub fn create_ki(
        &mut self,
        id: &str,
        assertions: Vec<Triple>,
        provenance: Vec<Triple>,
        pubinfo: Vec<Triple>,
    ) -> Result<KnowledgeItem, KiError> {
        if self.kis.contains_key(id) {
            return Err(KiError::DuplicateKi(id.to_string()));
        }
        Term::iri(id).validate()?;
        let ki = KnowledgeItem::with_default_graphs(id);
        if let Some(t) = assertions
            .iter()
            .find(|t| t.predicate.as_iri().is_some_and(|p| LINKAGE.contains(&p)))
        {
            return Err(KiError::InvalidKi {
                ki: id.to_string(),
                reason: format!("assertion {t} would nest a knowledge item"),
                line: None,
            });
        }
        let mut staged = GraphIndex::new();
        for t in &pubinfo {
            staged.insert(t.subject.clone(), t.predicate.clone(), t.object.clone());
        }
        check_pubinfo(id, &staged, None)?;

        for (graph, triples) in [
            (&ki.assertions, assertions),
            (&ki.provenance, provenance),
            (&ki.pubinfo, pubinfo),
        ] {
            for t in &triples {
                t.clone().in_graph(graph.clone()).validate()?;
            }
            self.store.declare_graph(graph.clone());
            for t in triples {
                self.store.add_quad(t.in_graph(graph.clone()))?;
            }
        }
        for t in ki.linkage_triples() {
            self.add_default(t)?;
        }
        self.kis.insert(id.to_string(), ki.clone());
        Ok(ki)
    }

    /// Removes a KI, its graphs and its linkage triples.
    pub fn remove_ki(&mut self, id: &str) -> Result<KnowledgeItem, KiError> {
        let ki = self
            .kis
            .remove(id)
            .ok_or_else(|| KiError::UnknownKi(id.to_string()))?;
        for g in ki.graphs() {
            self.store.remove_graph(g);
        }
        for t in ki.linkage_triples() {
            self.store.remove_quad(&t.in_graph(GraphId::default_graph()));
        }
        Ok(ki)
    }

    /// Loads a parsed TriG document. KIs are recognised through linkage
    /// triples in the default graph; each must name all three graphs and
    /// carry valid pubinfo. Returns the ids of the new KIs.
    pub fn load_trig(&mut self, doc: &TrigDocument) -> Result<Vec<String>, KiError> {
        self.prefixes.merge(&doc.prefixes);
        for g in &doc.graphs {
            self.store.declare_graph(g.clone());
        }
        for lq in &doc.quads {
            self.store.add_quad(lq.quad.clone())?;
        }

        let default = GraphId::default_graph();
        let mut found: BTreeMap<String, ([Option<GraphId>; 3], usize)> = BTreeMap::new();
        for lq in &doc.quads {
            let q = &lq.quad;
            if q.graph != default {
                continue;
            }
            let Some(slot) = q
                .predicate
                .as_iri()
                .and_then(|p| LINKAGE.iter().position(|l| *l == p))
            else {
                continue;
            };
            let (Some(id), Some(g)) = (q.subject.as_iri(), q.object.as_iri()) else {
                return Err(KiError::InvalidKi {
                    ki: q.subject.to_string(),
                    reason: "linkage triples must relate two IRIs".into(),
                    line: Some(lq.line),
                });
            };
            let entry = found
                .entry(id.to_string())
                .or_insert(([None, None, None], lq.line));
            if entry.0[slot].replace(GraphId::new(g)).is_some() {
                return Err(KiError::InvalidKi {
                    ki: id.to_string(),
                    reason: format!("more than one <{}>", LINKAGE[slot]),
                    line: Some(lq.line),
                });
            }
        }

        let mut added = Vec::new();
        for (id, (graphs, line)) in found {
            if self.kis.contains_key(&id) {
                continue;
            }
            let [Some(assertions), Some(provenance), Some(pubinfo)] = graphs else {
                return Err(KiError::InvalidKi {
                    ki: id,
                    reason: "needs assertion, provenance and pubinfo graphs".into(),
                    line: Some(line),
                });
            };
            let ki = KnowledgeItem {
                id: id.clone(),
                assertions,
                provenance,
                pubinfo,
            };
            let distinct: BTreeSet<&str> = ki
                .graphs()
                .iter()
                .map(|g| g.as_str())
                .chain([id.as_str()])
                .collect();
            if distinct.len() != 4 {
                return Err(KiError::InvalidKi {
                    ki: id,
                    reason: "graph ids must be pairwise distinct and differ from the KI id".into(),
                    line: Some(line),
                });
            }
            for g in ki.graphs() {
                self.store.declare_graph(g.clone());
            }
            let pubinfo = self
                .store
                .graph(&ki.pubinfo)
                .expect("pubinfo graph declared above");
            check_pubinfo(&id, pubinfo, Some(line))?;
            self.kis.insert(id.clone(), ki);
            added.push(id);
        }
        Ok(added)
    }
}

impl QuadSource for KnowledgeGraph {
    fn graph(&self, id: &GraphId) -> Option<&GraphIndex> {
        self.store.graph(id)
    }

    fn graph_ids(&self) -> Vec<GraphId> {
        self.store.graph_ids()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pattern::{graph_includes, Binding, Pattern, PatternAtom};
    use crate::syntax::trig::parse_trig;

    fn iri(s: &str) -> Term {
        Term::iri(s)
    }

    fn t(s: &str, p: &str, o: &str) -> Triple {
        Triple::new(iri(s), iri(p), iri(o))
    }

    fn pubinfo(id: &str, author: &str) -> Vec<Triple> {
        vec![
            t(id, vocab::AUTHOR, author),
            Triple::new(
                iri(id),
                iri(vocab::CREATED_AT),
                Term::typed("2019-01-01T00:00:00Z", vocab::XSD_DATETIME),
            ),
        ]
    }

    fn registry() -> RelationTypeRegistry {
        let mut r = RelationTypeRegistry::new();
        r.register("officer", RelationKind::Identifies, 1);
        r.register("hasJurisdictionOver", RelationKind::Jurisdiction, 0);
        r
    }

    #[test]
    fn financial_record_provenance_is_queryable() {
        let mut kg = KnowledgeGraph::new();
        let ki = kg
            .create_ki(
                "FR",
                vec![t("FR", "auditedBy", "AuditInc")],
                vec![t("FR", vocab::PROV_HAS_PRIMARY_SOURCE, "DOCS")],
                pubinfo("FR", "ReliefOrg"),
            )
            .unwrap();
        assert!(kg.ki("FR").is_some());
        let inner = Pattern::new(vec![PatternAtom::triple(
            Term::var("x"),
            iri(vocab::PROV_HAS_PRIMARY_SOURCE),
            Term::var("d"),
        )]);
        let out = graph_includes(&kg, &ki.provenance, &inner, &Binding::new()).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].get("d"), Some(&iri("DOCS")));
    }

    #[test]
    fn empty_provenance_is_allowed() {
        let mut kg = KnowledgeGraph::new();
        let ki = kg
            .create_ki("K", vec![t("a", "b", "c")], vec![], pubinfo("K", "Ed"))
            .unwrap();
        assert!(kg.graph(&ki.provenance).unwrap().is_empty());
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let mut kg = KnowledgeGraph::new();
        kg.create_ki("K", vec![], vec![], pubinfo("K", "Ed")).unwrap();
        assert_eq!(
            kg.create_ki("K", vec![], vec![], pubinfo("K", "Ed")).unwrap_err(),
            KiError::DuplicateKi("K".into())
        );
    }

    #[test]
    fn missing_author_is_invalid_pubinfo() {
        let mut kg = KnowledgeGraph::new();
        let err = kg
            .create_ki("K", vec![], vec![], pubinfo("K", "Ed")[1..].to_vec())
            .unwrap_err();
        assert!(matches!(err, KiError::InvalidPubinfo { .. }));
    }

    #[test]
    fn officer_identifies_george() {
        let mut kg = KnowledgeGraph::new();
        let ki = kg
            .create_ki("K", vec![t("ReliefOrg", "officer", "George")], vec![], pubinfo("K", "ReliefOrg"))
            .unwrap();
        let related = related_agents(&kg, &ki, &registry());
        assert!(related.contains(&RelatedAgent {
            agent: "George".into(),
            relation: "officer".into(),
            kind: RelationKind::Identifies,
        }));
    }

    #[test]
    fn author_only_item() {
        let mut kg = KnowledgeGraph::new();
        let ki = kg.create_ki("K", vec![], vec![], pubinfo("K", "Ed")).unwrap();
        let related = related_agents(&kg, &ki, &registry());
        assert_eq!(
            related,
            BTreeSet::from([RelatedAgent {
                agent: "Ed".into(),
                relation: vocab::AUTHOR.into(),
                kind: RelationKind::Authorship,
            }])
        );
    }

    #[test]
    fn jurisdiction_is_one_hop() {
        let mut kg = KnowledgeGraph::new();
        kg.add_default(t("Congress", "hasJurisdictionOver", "George")).unwrap();
        kg.add_default(t("UN", "hasJurisdictionOver", "Congress")).unwrap();
        let ki = kg
            .create_ki("K", vec![t("ReliefOrg", "officer", "George")], vec![], pubinfo("K", "ReliefOrg"))
            .unwrap();
        let related = related_agents(&kg, &ki, &registry());
        assert!(related.contains(&RelatedAgent {
            agent: "Congress".into(),
            relation: "hasJurisdictionOver".into(),
            kind: RelationKind::Jurisdiction,
        }));
        assert!(!related.iter().any(|r| r.agent == "UN"));
    }

    #[test]
    fn unknown_relations_are_ignored() {
        let mut kg = KnowledgeGraph::new();
        let ki = kg
            .create_ki("K", vec![t("a", "likes", "b")], vec![], pubinfo("K", "Ed"))
            .unwrap();
        assert_eq!(related_agents(&kg, &ki, &registry()).len(), 1);
    }

    #[test]
    fn decomposition_partitions_assertions() {
        let mut kg = KnowledgeGraph::new();
        let triples = vec![t("a", "p", "b"), t("c", "p", "d"), t("e", "p", "f")];
        let ki = kg.create_ki("K", triples.clone(), vec![], pubinfo("K", "Ed")).unwrap();
        let elems = decompose_ki(&kg, &ki);
        assert_eq!(elems.len(), 3);
        let mut got: Vec<Triple> = elems.iter().map(|e| e.assertion.clone()).collect();
        got.sort();
        assert_eq!(got, triples);
        assert!(elems.iter().all(|e| e.ki.provenance == ki.provenance));
        let ids: BTreeSet<&str> = elems.iter().map(|e| e.ki.id.as_str()).collect();
        assert_eq!(ids.len(), 3);
    }

    #[test]
    fn singleton_decomposition() {
        let mut kg = KnowledgeGraph::new();
        let ki = kg.create_ki("K", vec![t("a", "p", "b")], vec![], pubinfo("K", "Ed")).unwrap();
        let elems = decompose_ki(&kg, &ki);
        assert_eq!(elems.len(), 1);
        assert_eq!(elems[0].assertion, t("a", "p", "b"));
    }

    #[test]
    fn remove_ki_drops_graphs_and_links() {
        let mut kg = KnowledgeGraph::new();
        let ki = kg.create_ki("K", vec![t("a", "p", "b")], vec![], pubinfo("K", "Ed")).unwrap();
        kg.remove_ki("K").unwrap();
        assert!(kg.graph(&ki.assertions).is_none());
        assert!(kg.graph(&GraphId::default_graph()).unwrap().is_empty());
    }

    const TRIG: &str = r#"
@prefix : <http://example.org/kg#> .
:k1 kgu:hasAssertionGraph :k1a ; kgu:hasProvenanceGraph :k1p ; kgu:hasPubinfoGraph :k1i .
GRAPH :k1a { :a :p :b }
GRAPH :k1p { }
GRAPH :k1i { :k1 kgu:author :Ed ; kgu:createdAt "2019"^^xsd:gYear }
"#;

    #[test]
    fn loads_kis_from_linkage_triples() {
        let mut kg = KnowledgeGraph::new();
        let ids = kg.load_trig(&parse_trig(TRIG).unwrap()).unwrap();
        assert_eq!(ids, vec!["http://example.org/kg#k1".to_string()]);
        let ki = kg.ki(&ids[0]).unwrap();
        assert_eq!(ki.author(&kg).as_deref(), Some("http://example.org/kg#Ed"));
    }

    #[test]
    fn invalid_pubinfo_is_line_referenced() {
        let text = TRIG.replace(":k1 kgu:author :Ed ;", ":k1");
        let mut kg = KnowledgeGraph::new();
        let err = kg.load_trig(&parse_trig(&text).unwrap()).unwrap_err();
        match err {
            KiError::InvalidPubinfo { line, .. } => assert_eq!(line, Some(3)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn incomplete_linkage_is_rejected() {
        let text = TRIG.replace("kgu:hasProvenanceGraph :k1p ;", "");
        let mut kg = KnowledgeGraph::new();
        assert!(matches!(
            kg.load_trig(&parse_trig(&text).unwrap()),
            Err(KiError::InvalidKi { .. })
        ));
    }
}
