//! Rule AST, classification, and the mapping between rules and knowledge items.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{ParseError, RuleError};
use crate::ki::{KnowledgeGraph, KnowledgeItem};
use crate::pattern::{Pattern, PatternAtom};
use crate::store::QuadSource;
use crate::syntax::rules::{parse_consequent_text, parse_pattern_text, print_consequent, print_pattern_flat};
use crate::syntax::Prefixes;
use crate::term::{vocab, GraphId, Term, Triple};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RuleKind {
    Trust,
    Usage,
    Governance,
}

impl RuleKind {
    pub fn class_iri(self) -> &'static str {
        match self {
            RuleKind::Trust => vocab::TRUST_RULE,
            RuleKind::Usage => vocab::USAGE_RULE,
            RuleKind::Governance => vocab::GOVERNANCE_RULE,
        }
    }

    pub fn from_class_iri(iri: &str) -> Option<Self> {
        [RuleKind::Trust, RuleKind::Usage, RuleKind::Governance]
            .into_iter()
            .find(|k| k.class_iri() == iri)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AuthValue {
    Allowed,
    Denied,
}

impl fmt::Display for AuthValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AuthValue::Allowed => "Allowed",
            AuthValue::Denied => "Denied",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Consequent {
    /// Adds the instantiated triples to a trusted graph. `target: None` means
    /// the author's own trusted graph.
    TrustAdd {
        target: Option<Term>,
        additions: Pattern,
    },
    Authorize {
        value: AuthValue,
        action: Term,
    },
    AssertFacts {
        additions: Pattern,
    },
}

impl Consequent {
    pub fn kind(&self) -> RuleKind {
        match self {
            Consequent::TrustAdd { .. } => RuleKind::Trust,
            Consequent::Authorize { .. } => RuleKind::Usage,
            Consequent::AssertFacts { .. } => RuleKind::Governance,
        }
    }

    pub fn variables(&self) -> BTreeSet<String> {
        match self {
            Consequent::TrustAdd { target, additions } => {
                let mut v = additions.variables();
                if let Some(Term::Variable(t)) = target {
                    v.insert(t.to_string());
                }
                v
            }
            Consequent::Authorize { action, .. } => {
                action.as_variable().map(str::to_string).into_iter().collect()
            }
            Consequent::AssertFacts { additions } => additions.variables(),
        }
    }

    pub fn template(&self) -> Option<Vec<Triple>> {
        match self {
            Consequent::TrustAdd { additions, .. } | Consequent::AssertFacts { additions } => {
                additions.template_triples()
            }
            Consequent::Authorize { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceSpan {
    pub line: usize,
    pub col: usize,
}

/// A named, authored `antecedent => consequent` rule.
///
/// Equality ignores the source span.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Rule {
    pub name: String,
    pub author: String,
    pub kind: RuleKind,
    pub antecedent: Pattern,
    pub consequent: Consequent,
    /// Primary sources, sorted, written to the rule's provenance graph.
    pub sources: Vec<String>,
    pub span: SourceSpan,
}

impl PartialEq for Rule {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.author == other.author
            && self.kind == other.kind
            && self.antecedent == other.antecedent
            && self.consequent == other.consequent
            && self.sources == other.sources
    }
}

impl Eq for Rule {}

fn reserved_vars() -> BTreeSet<String> {
    vocab::RESERVED_VARS.iter().map(|s| s.to_string()).collect()
}

impl Rule {
    /// Builds a rule, checking the kind/consequent agreement, range
    /// restriction of the antecedent and safety of the consequent.
    pub fn new(
        name: impl Into<String>,
        author: impl Into<String>,
        antecedent: Pattern,
        consequent: Consequent,
        sources: Vec<String>,
        span: SourceSpan,
    ) -> Result<Rule, String> {
        let name = name.into();
        let author = author.into();
        let reserved = reserved_vars();
        antecedent
            .validate(&reserved)
            .map_err(|e| format!("rule {name}: {e}"))?;

        let mut bound = antecedent.binding_variables();
        bound.extend(reserved);
        let unsafe_vars: Vec<String> = consequent
            .variables()
            .into_iter()
            .filter(|v| !bound.contains(v))
            .map(|v| format!("?{v}"))
            .collect();
        if !unsafe_vars.is_empty() {
            return Err(format!(
                "rule {name}: unsafe variable {} in consequent (not bound by the antecedent)",
                unsafe_vars.join(", ")
            ));
        }
        if let Consequent::TrustAdd { additions, .. } | Consequent::AssertFacts { additions } =
            &consequent
        {
            if additions.template_triples().is_none() {
                return Err(format!("rule {name}: consequent may only contain triples"));
            }
        }
        if let Consequent::Authorize { action, .. } = &consequent {
            if matches!(action, Term::Literal { .. } | Term::Blank(_)) {
                return Err(format!("rule {name}: authorize target must be an IRI or variable"));
            }
        }
        let mut sources = sources;
        sources.sort();
        sources.dedup();
        Ok(Rule {
            kind: consequent.kind(),
            name,
            author,
            antecedent,
            consequent,
            sources,
            span,
        })
    }
}

/// Result of [`classify_rule`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classification {
    pub kind: RuleKind,
    /// Usage rule whose antecedent names a person.
    pub personal_privacy: bool,
    /// Rule category IRIs, including the kind class.
    pub categories: BTreeSet<String>,
}

impl Classification {
    pub fn has_category(&self, iri: &str) -> bool {
        self.categories.contains(iri)
    }
}

fn default_has(source: &dyn QuadSource, s: &Term, p: &str, o: &Term) -> bool {
    source
        .graph(&GraphId::default_graph())
        .is_some_and(|g| g.contains(s, &Term::iri(p), o))
}

fn is_rule_category(source: &dyn QuadSource, class: &Term) -> bool {
    const BUILTIN: [&str; 6] = [
        vocab::RULE,
        vocab::TRUST_RULE,
        vocab::USAGE_RULE,
        vocab::GOVERNANCE_RULE,
        vocab::PERSONAL_PRIVACY_RULE,
        vocab::LEGISLATION,
    ];
    match class {
        Term::Iri(i) if BUILTIN.contains(&&**i) => true,
        Term::Iri(_) => default_has(source, class, vocab::RDFS_SUBCLASS_OF, &Term::iri(vocab::RULE)),
        _ => false,
    }
}

fn mentions_person(
    pattern: &Pattern,
    source: &dyn QuadSource,
    persons: &BTreeSet<String>,
) -> bool {
    let person = Term::iri(vocab::FOAF_PERSON);
    let is_person = |t: &Term| match t {
        Term::Iri(i) => persons.contains(&**i) || default_has(source, t, vocab::RDF_TYPE, &person),
        _ => false,
    };
    pattern.atoms.iter().any(|atom| match atom {
        PatternAtom::Triple {
            subject, object, ..
        } => is_person(subject) || is_person(object),
        PatternAtom::GraphIncludes { inner, .. } => mentions_person(inner, source, persons),
        PatternAtom::Builtin { .. } => false,
    })
}

/// Derives a rule's kind and categories from its consequent and the KG.
///
/// A usage rule is personal-privacy when some relation in its antecedent has
/// a subject or object typed `foaf:Person` in the default graph (or listed in
/// `persons`). Any rule citing a `kgu:Law`-typed primary source is
/// `Legislation`.
pub fn classify_rule(
    rule: &Rule,
    source: &dyn QuadSource,
    persons: &BTreeSet<String>,
) -> Result<Classification, RuleError> {
    let kind = rule.consequent.kind();
    let mut categories = BTreeSet::from([vocab::RULE.to_string(), kind.class_iri().to_string()]);

    if let Consequent::AssertFacts { additions } = &rule.consequent {
        for t in additions.template_triples().unwrap_or_default() {
            let ok = match t.predicate.as_iri() {
                Some(vocab::PRECEDES) => true,
                Some(vocab::RDF_TYPE) => is_rule_category(source, &t.object),
                _ => false,
            };
            if !ok {
                return Err(RuleError::MalformedGovernanceRule {
                    rule: rule.name.clone(),
                    reason: format!("asserts {t}, which is not a fact about rules"),
                });
            }
        }
    }

    let personal_privacy =
        kind == RuleKind::Usage && mentions_person(&rule.antecedent, source, persons);
    if personal_privacy {
        categories.insert(vocab::PERSONAL_PRIVACY_RULE.to_string());
    }
    let law = Term::iri(vocab::LAW);
    if rule
        .sources
        .iter()
        .any(|s| default_has(source, &Term::iri(s.clone()), vocab::RDF_TYPE, &law))
    {
        categories.insert(vocab::LEGISLATION.to_string());
    }
    Ok(Classification {
        kind,
        personal_privacy,
        categories,
    })
}

/// Fixed creation timestamp for rule knowledge items, so that loading the
/// same files always yields the same store.
pub const RULE_CREATED_AT: &str = "1970-01-01T00:00:00Z";

fn pattern_literal(text: String) -> Term {
    Term::typed(text, vocab::PATTERN_TEXT)
}

/// Publishes a rule as a knowledge item: the assertion graph holds its kind
/// and the antecedent/consequent graph texts, the provenance graph its
/// primary sources, the pubinfo graph its author.
pub fn rule_to_ki(rule: &Rule, kg: &mut KnowledgeGraph) -> Result<KnowledgeItem, RuleError> {
    let name = Term::iri(rule.name.clone());
    let bare = Prefixes::empty();
    let assertions = vec![
        Triple::new(name.clone(), Term::iri(vocab::RULE_KIND), Term::iri(rule.kind.class_iri())),
        Triple::new(
            name.clone(),
            Term::iri(vocab::ANTECEDENT),
            pattern_literal(print_pattern_flat(&rule.antecedent, &bare)),
        ),
        Triple::new(
            name.clone(),
            Term::iri(vocab::CONSEQUENT),
            pattern_literal(print_consequent(&rule.consequent, &bare)),
        ),
    ];
    let provenance = rule
        .sources
        .iter()
        .map(|s| {
            Triple::new(
                name.clone(),
                Term::iri(vocab::PROV_HAS_PRIMARY_SOURCE),
                Term::iri(s.clone()),
            )
        })
        .collect();
    let pubinfo = vec![
        Triple::new(name.clone(), Term::iri(vocab::AUTHOR), Term::iri(rule.author.clone())),
        Triple::new(
            name.clone(),
            Term::iri(vocab::CREATED_AT),
            Term::typed(RULE_CREATED_AT, vocab::XSD_DATETIME),
        ),
    ];
    Ok(kg.create_ki(&rule.name, assertions, provenance, pubinfo)?)
}

/// Reads a rule back from its knowledge item.
pub fn rule_from_ki(source: &dyn QuadSource, ki: &KnowledgeItem) -> Result<Rule, RuleError> {
    let fail = |reason: String| RuleError::Extraction {
        ki: ki.id.clone(),
        reason,
    };
    let name = Term::iri(ki.id.clone());
    let graph = |g: &GraphId| {
        source
            .graph(g)
            .ok_or_else(|| fail(format!("missing graph {g}")))
    };
    let assertions = graph(&ki.assertions)?;
    let one = |p: &str| -> Result<Term, RuleError> {
        let found = assertions.scan(Some(&name), Some(&Term::iri(p)), None);
        match found.as_slice() {
            [t] => Ok(t.object.clone()),
            _ => Err(fail(format!("expected exactly one <{p}> statement"))),
        }
    };
    let text = |t: Term| match t {
        Term::Literal { lexical, datatype } if &*datatype == vocab::PATTERN_TEXT => Ok(lexical.to_string()),
        other => Err(fail(format!("expected a pattern literal, found {other}"))),
    };
    let bare = Prefixes::empty();
    let parse_err = |e: ParseError| fail(e.to_string());
    let antecedent = parse_pattern_text(&text(one(vocab::ANTECEDENT)?)?, &bare).map_err(parse_err)?;
    let consequent =
        parse_consequent_text(&text(one(vocab::CONSEQUENT)?)?, &bare).map_err(parse_err)?;
    let kind_term = one(vocab::RULE_KIND)?;

    let author = ki
        .author(source)
        .ok_or_else(|| fail("pubinfo has no author".into()))?;
    let sources = graph(&ki.provenance)?
        .scan(
            Some(&name),
            Some(&Term::iri(vocab::PROV_HAS_PRIMARY_SOURCE)),
            None,
        )
        .into_iter()
        .filter_map(|t| t.object.as_iri().map(str::to_string))
        .collect();

    let rule = Rule::new(
        ki.id.clone(),
        author,
        antecedent,
        consequent,
        sources,
        SourceSpan::default(),
    )
    .map_err(fail)?;
    if kind_term.as_iri() != Some(rule.kind.class_iri()) {
        return Err(fail(format!("recorded kind {kind_term} disagrees with consequent")));
    }
    Ok(rule)
}
