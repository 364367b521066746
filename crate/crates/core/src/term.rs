//! RDF-style terms, graph identifiers and quads.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::GraphError;

/// Well-known IRIs used by the engine.
pub mod vocab {
    pub const RDF_TYPE: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type";
    pub const RDFS_SUBCLASS_OF: &str = "http://www.w3.org/2000/01/rdf-schema#subClassOf";
    pub const XSD_STRING: &str = "http://www.w3.org/2001/XMLSchema#string";
    pub const XSD_DATETIME: &str = "http://www.w3.org/2001/XMLSchema#dateTime";
    pub const PROV_HAS_PRIMARY_SOURCE: &str = "http://www.w3.org/ns/prov#hasPrimarySource";
    pub const FOAF_PERSON: &str = "http://xmlns.com/foaf/0.1/Person";

    /// Engine namespace.
    pub const NS: &str = "https://w3id.org/kgusage#";

    pub const DEFAULT_GRAPH: &str = "https://w3id.org/kgusage#defaultGraph";
    pub const CONTEXT_GRAPH: &str = "https://w3id.org/kgusage#requestContext";
    pub const GOVERNANCE_GRAPH: &str = "https://w3id.org/kgusage#governanceFacts";
    pub const ELEMENT_LINKS_GRAPH: &str = "https://w3id.org/kgusage#elementLinks";

    pub const HAS_ASSERTION_GRAPH: &str = "https://w3id.org/kgusage#hasAssertionGraph";
    pub const HAS_PROVENANCE_GRAPH: &str = "https://w3id.org/kgusage#hasProvenanceGraph";
    pub const HAS_PUBINFO_GRAPH: &str = "https://w3id.org/kgusage#hasPubinfoGraph";
    pub const AUTHOR: &str = "https://w3id.org/kgusage#author";
    pub const CREATED_AT: &str = "https://w3id.org/kgusage#createdAt";
    /// `(graph, trustedGraphOf, agent)` names an agent's trusted graph.
    pub const TRUSTED_GRAPH_OF: &str = "https://w3id.org/kgusage#trustedGraphOf";

    pub const KNOWLEDGE_GRAPH: &str = "https://w3id.org/kgusage#KnowledgeGraph";
    pub const ACTION: &str = "https://w3id.org/kgusage#Action";
    pub const LAW: &str = "https://w3id.org/kgusage#Law";

    pub const RULE: &str = "https://w3id.org/kgusage#Rule";
    pub const TRUST_RULE: &str = "https://w3id.org/kgusage#TrustRule";
    pub const USAGE_RULE: &str = "https://w3id.org/kgusage#UsageRule";
    pub const GOVERNANCE_RULE: &str = "https://w3id.org/kgusage#GovernanceRule";
    pub const PERSONAL_PRIVACY_RULE: &str = "https://w3id.org/kgusage#PersonalPrivacyRule";
    pub const LEGISLATION: &str = "https://w3id.org/kgusage#Legislation";
    pub const PRECEDES: &str = "https://w3id.org/kgusage#precedes";
    pub const RULE_KIND: &str = "https://w3id.org/kgusage#ruleKind";
    pub const ANTECEDENT: &str = "https://w3id.org/kgusage#antecedent";
    pub const CONSEQUENT: &str = "https://w3id.org/kgusage#consequent";
    pub const PATTERN_TEXT: &str = "https://w3id.org/kgusage#PatternText";

    pub const REQUEST: &str = "https://w3id.org/kgusage#request";
    pub const REQUEST_TIME: &str = "https://w3id.org/kgusage#requestTime";
    pub const AGENT_LOCATION: &str = "https://w3id.org/kgusage#agentLocation";

    /// Variables pre-bound when a usage rule is evaluated against a request.
    pub const REQUEST_AGENT_VAR: &str = "requestAgent";
    pub const REQUEST_ACTION_VAR: &str = "requestAction";
    pub const REQUEST_KI_VAR: &str = "requestKI";
    pub const RESERVED_VARS: [&str; 3] = [REQUEST_AGENT_VAR, REQUEST_ACTION_VAR, REQUEST_KI_VAR];
}

/// A node or edge label. Variant order matters: `Iri("")` is the smallest
/// possible term, which the indexes use as a range lower bound.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Term {
    Iri(Arc<str>),
    Literal { lexical: Arc<str>, datatype: Arc<str> },
    Blank(Arc<str>),
    Variable(Arc<str>),
}

impl Term {
    pub fn iri(iri: impl AsRef<str>) -> Self {
        Term::Iri(iri.as_ref().into())
    }

    pub fn string(lexical: impl AsRef<str>) -> Self {
        Term::Literal {
            lexical: lexical.as_ref().into(),
            datatype: vocab::XSD_STRING.into(),
        }
    }

    pub fn typed(lexical: impl AsRef<str>, datatype: impl AsRef<str>) -> Self {
        Term::Literal {
            lexical: lexical.as_ref().into(),
            datatype: datatype.as_ref().into(),
        }
    }

    pub fn blank(label: impl AsRef<str>) -> Self {
        Term::Blank(label.as_ref().into())
    }

    pub fn var(name: impl AsRef<str>) -> Self {
        Term::Variable(name.as_ref().into())
    }

    pub(crate) fn min_value() -> Self {
        Term::Iri("".into())
    }

    pub fn is_variable(&self) -> bool {
        matches!(self, Term::Variable(_))
    }

    pub fn as_iri(&self) -> Option<&str> {
        match self {
            Term::Iri(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_variable(&self) -> Option<&str> {
        match self {
            Term::Variable(v) => Some(v),
            _ => None,
        }
    }

    /// Checks the lexical invariants of the term.
    pub fn validate(&self) -> Result<(), GraphError> {
        match self {
            Term::Iri(s) if s.is_empty() || s.chars().any(char::is_whitespace) => {
                Err(GraphError::InvalidTerm(format!("invalid IRI {s:?}")))
            }
            Term::Variable(v) if !is_valid_var_name(v) => {
                Err(GraphError::InvalidTerm(format!("invalid variable name ?{v}")))
            }
            Term::Blank(b) if b.is_empty() => {
                Err(GraphError::InvalidTerm("empty blank node label".into()))
            }
            _ => Ok(()),
        }
    }
}

pub fn is_valid_var_name(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn escape_literal(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

/// N-Triples style rendering: `<iri>`, `"lex"^^<dt>`, `_:b`, `?v`.
impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Iri(i) => write!(f, "<{i}>"),
            Term::Literal { lexical, datatype } if &**datatype == vocab::XSD_STRING => {
                write!(f, "\"{}\"", escape_literal(lexical))
            }
            Term::Literal { lexical, datatype } => {
                write!(f, "\"{}\"^^<{datatype}>", escape_literal(lexical))
            }
            Term::Blank(b) => write!(f, "_:{b}"),
            Term::Variable(v) => write!(f, "?{v}"),
        }
    }
}

/// Identifier of a named graph.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GraphId(pub String);

impl GraphId {
    pub fn new(iri: impl Into<String>) -> Self {
        GraphId(iri.into())
    }

    pub fn default_graph() -> Self {
        GraphId(vocab::DEFAULT_GRAPH.to_string())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn to_term(&self) -> Term {
        Term::iri(&self.0)
    }
}

impl fmt::Display for GraphId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{}>", self.0)
    }
}

/// A subject/predicate/object statement without a graph.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Triple {
    pub subject: Term,
    pub predicate: Term,
    pub object: Term,
}

impl Triple {
    pub fn new(subject: Term, predicate: Term, object: Term) -> Self {
        Triple {
            subject,
            predicate,
            object,
        }
    }

    pub fn in_graph(self, graph: GraphId) -> Quad {
        Quad {
            subject: self.subject,
            predicate: self.predicate,
            object: self.object,
            graph,
        }
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {} .", self.subject, self.predicate, self.object)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Quad {
    pub subject: Term,
    pub predicate: Term,
    pub object: Term,
    pub graph: GraphId,
}

impl Quad {
    pub fn new(subject: Term, predicate: Term, object: Term, graph: GraphId) -> Self {
        Quad {
            subject,
            predicate,
            object,
            graph,
        }
    }

    pub fn triple(&self) -> Triple {
        Triple::new(
            self.subject.clone(),
            self.predicate.clone(),
            self.object.clone(),
        )
    }

    /// Stored quads carry no variables and use an IRI predicate.
    pub fn validate(&self) -> Result<(), GraphError> {
        for t in [&self.subject, &self.predicate, &self.object] {
            if t.is_variable() {
                return Err(GraphError::InvalidQuad(format!(
                    "variable {t} in stored quad"
                )));
            }
            t.validate()
                .map_err(|e| GraphError::InvalidQuad(e.to_string()))?;
        }
        if self.predicate.as_iri().is_none() {
            return Err(GraphError::InvalidQuad(format!(
                "predicate {} is not an IRI",
                self.predicate
            )));
        }
        if matches!(self.subject, Term::Literal { .. }) {
            return Err(GraphError::InvalidQuad(format!(
                "literal subject {}",
                self.subject
            )));
        }
        Ok(())
    }
}

impl fmt::Display for Quad {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {} {} .",
            self.subject, self.predicate, self.object, self.graph
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn iri_is_the_smallest_variant() {
        assert!(Term::min_value() < Term::iri("a"));
        assert!(Term::iri("zzz") < Term::string(""));
        assert!(Term::string("x") < Term::Blank("b".into()));
    }

    #[test]
    fn variable_names() {
        assert!(is_valid_var_name("FR"));
        assert!(is_valid_var_name("a_1"));
        assert!(!is_valid_var_name("1a"));
        assert!(!is_valid_var_name(""));
        assert!(!is_valid_var_name("a-b"));
    }

    #[test]
    fn rejects_variables_in_quads() {
        let q = Quad::new(
            Term::var("x"),
            Term::iri("p"),
            Term::iri("o"),
            GraphId::default_graph(),
        );
        assert!(matches!(q.validate(), Err(GraphError::InvalidQuad(_))));
    }

    #[test]
    fn rejects_whitespace_iris() {
        assert!(Term::iri("a b").validate().is_err());
        assert!(Term::iri("").validate().is_err());
    }

    #[test]
    fn display_escapes_literals() {
        assert_eq!(Term::string("a\"b").to_string(), "\"a\\\"b\"");
        assert_eq!(
            Term::typed("1", "http://x/int").to_string(),
            "\"1\"^^<http://x/int>"
        );
    }
}
