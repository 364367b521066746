//! Shared generators, oracles and invariant checks for the integration
//! suites and the acceptance run.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use kgusage_core::config::{ActionConfig, EngineConfig, HandlerKind};
use kgusage_core::ki::RelationKind;
use kgusage_core::pattern::{match_pattern, BuiltinOp, Pattern, PatternAtom};
use kgusage_core::rule::{AuthValue, Consequent, Rule, SourceSpan};
use kgusage_core::store::{QuadSource, Store};
use kgusage_core::syntax::rules::{parse_rules, print_rules};
use kgusage_core::syntax::Prefixes;
use kgusage_core::term::{vocab, GraphId, Quad, Term, Triple};
use kgusage_core::usage::{ActionResult, AggregationStrategy, DecisionTrace, Request};
use kgusage_core::Engine;
use proptest::prelude::*;

pub const EX: &str = "http://example.org/kg#";

pub fn ex(local: &str) -> String {
    format!("{EX}{local}")
}

pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn read_fixture(rel: &str) -> String {
    let path = fixtures_dir().join(rel);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

pub fn fixture_config() -> EngineConfig {
    EngineConfig::from_toml_str(&read_fixture("config.toml")).expect("fixture config")
}

/// The fixture KG with `rules.kgr` plus any extra rule files.
pub fn fixture_engine_with(extra: &[&str]) -> Engine {
    let mut e = Engine::new(fixture_config());
    e.load_trig(&read_fixture("kg.trig"), Some("kg.trig")).expect("fixture kg");
    e.load_rules(&read_fixture("rules.kgr"), Some("rules.kgr")).expect("fixture rules");
    for f in extra {
        e.load_rules(&read_fixture(f), Some(f)).expect("extra rules");
    }
    e
}

pub fn fixture_engine() -> Engine {
    fixture_engine_with(&[])
}

pub fn fixture_kg_text() -> String {
    read_fixture("kg.trig")
}

pub fn fixture_rules_text() -> String {
    read_fixture("rules.kgr")
}

pub fn request(agent: &str, action: &str, ki: &str) -> Request {
    Request::new(ex(agent), ex(action), ex(ki))
}

// ---------------------------------------------------------------------------
// Matcher oracle

const T: &str = "http://t/";

fn t(local: &str) -> Term {
    Term::iri(format!("{T}{local}"))
}

fn graph_ids() -> [GraphId; 3] {
    [
        GraphId::default_graph(),
        GraphId::new(format!("{T}g1")),
        GraphId::new(format!("{T}g2")),
    ]
}

fn node() -> impl Strategy<Value = Term> {
    prop_oneof![Just(t("a")), Just(t("b")), Just(t("c")), Just(t("d"))]
}

fn pred() -> impl Strategy<Value = Term> {
    prop_oneof![Just(t("p")), Just(t("q"))]
}

fn object() -> impl Strategy<Value = Term> {
    prop_oneof![4 => node(), 1 => Just(Term::string("x"))]
}

fn var() -> impl Strategy<Value = Term> {
    prop_oneof![
        Just(Term::var("x")),
        Just(Term::var("y")),
        Just(Term::var("z")),
        Just(Term::var("w"))
    ]
}

fn slot(constant: impl Strategy<Value = Term>) -> impl Strategy<Value = Term> {
    prop_oneof![var(), constant]
}

fn triple_atom() -> impl Strategy<Value = PatternAtom> {
    (slot(node()), slot(pred()), slot(object())).prop_map(|(s, p, o)| PatternAtom::triple(s, p, o))
}

fn graph_term() -> impl Strategy<Value = Term> {
    prop_oneof![
        2 => var(),
        1 => Just(GraphId::default_graph().to_term()),
        1 => Just(t("g1")),
        1 => Just(t("g2")),
        1 => Just(t("a")),
    ]
}

fn atom() -> impl Strategy<Value = PatternAtom> {
    prop_oneof![
        5 => triple_atom(),
        2 => (graph_term(), prop::collection::vec(triple_atom(), 1..=2))
            .prop_map(|(graph, inner)| PatternAtom::GraphIncludes { graph, inner: Pattern::new(inner) }),
        1 => (prop_oneof![Just(BuiltinOp::Eq), Just(BuiltinOp::Neq)], var(), slot(node()))
            .prop_map(|(op, a, b)| PatternAtom::Builtin { op, args: vec![a, b] }),
    ]
}

#[derive(Debug, Clone)]
pub struct MatchInstance {
    pub quads: Vec<Quad>,
    pub pattern: Pattern,
    pub scope: Vec<GraphId>,
}

impl MatchInstance {
    pub fn store(&self) -> Store {
        let mut s = Store::new();
        for g in graph_ids() {
            s.declare_graph(g);
        }
        for q in &self.quads {
            s.add_quad(q.clone()).expect("generated quads are valid");
        }
        s
    }
}

pub fn match_instance() -> impl Strategy<Value = MatchInstance> {
    let quad = (node(), pred(), object(), 0..3usize)
        .prop_map(|(s, p, o, g)| Triple::new(s, p, o).in_graph(graph_ids()[g].clone()));
    (
        prop::collection::vec(quad, 0..=50),
        prop::collection::vec(atom(), 0..=4),
        prop::sample::subsequence(vec![0usize, 1, 2], 1..=3),
    )
        .prop_map(|(quads, atoms, scope)| MatchInstance {
            quads,
            pattern: Pattern::new(atoms),
            scope: scope.into_iter().map(|i| graph_ids()[i].clone()).collect(),
        })
        .prop_filter("range-restricted", |m| m.pattern.validate(&BTreeSet::new()).is_ok())
}

type Assignment = BTreeMap<String, Term>;

fn ground(a: &Assignment, term: &Term) -> Term {
    match term {
        Term::Variable(v) => a[&**v].clone(),
        other => other.clone(),
    }
}

fn holds(source: &Store, atoms: &[PatternAtom], a: &Assignment, scope: &[GraphId]) -> bool {
    atoms.iter().all(|atom| match atom {
        PatternAtom::Triple {
            subject,
            predicate,
            object,
        } => {
            let (s, p, o) = (ground(a, subject), ground(a, predicate), ground(a, object));
            scope
                .iter()
                .any(|g| source.graph(g).is_some_and(|idx| idx.contains(&s, &p, &o)))
        }
        PatternAtom::GraphIncludes { graph, inner } => match ground(a, graph) {
            Term::Iri(iri) => {
                let gid = GraphId::new(&*iri);
                source.has_graph(&gid) && holds(source, &inner.atoms, a, std::slice::from_ref(&gid))
            }
            _ => false,
        },
        PatternAtom::Builtin { op, args } => {
            let (x, y) = (ground(a, &args[0]), ground(a, &args[1]));
            match op {
                BuiltinOp::Eq => x == y,
                BuiltinOp::Neq => x != y,
                other => unreachable!("generator emits eq/neq only, got {other:?}"),
            }
        }
    })
}

/// Every assignment of the pattern's variables over the active domain that
/// satisfies all atoms.
pub fn brute_force(m: &MatchInstance) -> BTreeSet<Assignment> {
    let store = m.store();
    let mut domain: BTreeSet<Term> = store.graph_ids().into_iter().map(|g| g.to_term()).collect();
    for q in &m.quads {
        domain.extend([q.subject.clone(), q.predicate.clone(), q.object.clone()]);
    }
    let domain: Vec<Term> = domain.into_iter().collect();
    let vars: Vec<String> = m.pattern.variables().into_iter().collect();

    let mut out = BTreeSet::new();
    let mut idx = vec![0usize; vars.len()];
    loop {
        let a: Assignment = vars
            .iter()
            .zip(&idx)
            .map(|(v, &i)| (v.clone(), domain[i].clone()))
            .collect();
        if holds(&store, &m.pattern.atoms, &a, &m.scope) {
            out.insert(a);
        }
        // odometer increment
        let mut k = 0;
        loop {
            if k == idx.len() {
                return out;
            }
            idx[k] += 1;
            if idx[k] < domain.len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

pub fn check_matcher(m: &MatchInstance) -> Result<(), String> {
    let store = m.store();
    let got: BTreeSet<Assignment> = match_pattern(&store, &m.pattern, &Default::default(), &m.scope)
        .map_err(|e| format!("matcher failed: {e}"))?
        .into_iter()
        .map(|b| b.iter().map(|(k, v)| (k.to_string(), v.clone())).collect())
        .collect();
    let want = brute_force(m);
    if got == want {
        Ok(())
    } else {
        Err(format!(
            "matcher returned {} bindings, oracle {}; pattern {:?}",
            got.len(),
            want.len(),
            m.pattern
        ))
    }
}

// ---------------------------------------------------------------------------
// Tier loop equivalence

#[derive(Debug, Clone)]
pub struct RuleSpec {
    pub fires: bool,
    pub value: AuthValue,
    /// Author rank; distinct across the set, so every tier is a singleton.
    pub rank: i64,
}

#[derive(Debug, Clone)]
pub struct RuleSetCase {
    pub rules: Vec<RuleSpec>,
    pub default: AuthValue,
    pub strategy: AggregationStrategy,
}

fn auth_value() -> impl Strategy<Value = AuthValue> {
    prop_oneof![Just(AuthValue::Allowed), Just(AuthValue::Denied)]
}

fn strategy() -> impl Strategy<Value = AggregationStrategy> {
    prop_oneof![
        Just(AggregationStrategy::DenyOverrides),
        Just(AggregationStrategy::PermitOverrides),
        Just(AggregationStrategy::Majority),
        Just(AggregationStrategy::Consensus),
    ]
}

pub fn rule_set_case() -> impl Strategy<Value = RuleSetCase> {
    (0..8usize)
        .prop_flat_map(|n| {
            (
                prop::collection::vec((any::<bool>(), auth_value()), n),
                Just((0..n as i64).collect::<Vec<_>>()).prop_shuffle(),
                auth_value(),
                strategy(),
            )
        })
        .prop_map(|(specs, ranks, default, strategy)| RuleSetCase {
            rules: specs
                .into_iter()
                .zip(ranks)
                .map(|((fires, value), rank)| RuleSpec { fires, value, rank })
                .collect(),
            default,
            strategy,
        })
}

/// One KI `:item` related to agents `:A0..`; rule `:r{i}` by `:A{i}` fires
/// iff the KI asserts `:item :flag :f{i}`.
pub fn rule_set_engine(case: &RuleSetCase) -> Engine {
    let mut config = EngineConfig::default();
    config.prefixes.insert("", EX);
    config.default_authorization = case.default;
    config.strategy = case.strategy;
    config.registry.register(ex("about"), RelationKind::Identifies, 1);
    config.actions.insert(
        ex("Read"),
        ActionConfig {
            composite: true,
            handler: Some(HandlerKind::Read),
            ..Default::default()
        },
    );
    for (i, r) in case.rules.iter().enumerate() {
        config.agent_ranks.insert(ex(&format!("A{i}")), r.rank);
    }
    let mut engine = Engine::new(config);

    let item = Term::iri(ex("item"));
    let mut assertions = vec![Triple::new(item.clone(), Term::iri(ex("about")), Term::iri(ex("Reader")))];
    let mut text = String::from("@prefix : <http://example.org/kg#> .\n");
    for (i, r) in case.rules.iter().enumerate() {
        assertions.push(Triple::new(item.clone(), Term::iri(ex("about")), Term::iri(ex(&format!("A{i}")))));
        if r.fires {
            assertions.push(Triple::new(item.clone(), Term::iri(ex("flag")), Term::iri(ex(&format!("f{i}")))));
        }
        text.push_str(&format!(
            "rule :r{i} author :A{i} {{ when {{ assertions(?requestKI) includes {{ ?requestKI :flag :f{i} }} }} then authorize {} for ?requestAction }}\n",
            r.value
        ));
    }
    engine
        .create_ki(
            &ex("item"),
            assertions,
            vec![],
            vec![
                Triple::new(item.clone(), Term::iri(vocab::AUTHOR), Term::iri(ex("Reader"))),
                Triple::new(item, Term::iri(vocab::CREATED_AT), Term::string("2024")),
            ],
        )
        .expect("item KI");
    engine.load_rules(&text, None).expect("generated rules");
    engine
}

/// Sort by precedence, return the first definitive answer, else the default.
pub fn literal_tier_loop(case: &RuleSetCase) -> (AuthValue, Option<String>) {
    let mut order: Vec<usize> = (0..case.rules.len()).collect();
    order.sort_by_key(|&i| case.rules[i].rank);
    for i in order {
        let r = &case.rules[i];
        if r.fires {
            return (r.value, Some(ex(&format!("r{i}"))));
        }
    }
    (case.default, None)
}

pub fn check_tier_loop(case: &RuleSetCase) -> Result<(), String> {
    let engine = rule_set_engine(case);
    let d = engine
        .eval_request(&request("Reader", "Read", "item"))
        .map_err(|e| e.to_string())?;
    if d.trace.tier_plan.iter().any(|t| t.len() != 1) {
        return Err(format!("tiers are not singletons: {:?}", d.trace.tier_plan));
    }
    let got = (d.authorization.value, d.authorization.rule.clone());
    let want = literal_tier_loop(case);
    if got == want {
        Ok(())
    } else {
        Err(format!("engine {got:?}, literal loop {want:?}"))
    }
}

// ---------------------------------------------------------------------------
// Trust fixpoint scenarios

const TRUST_RULES: [&str; 4] = [
    "rule :t1 author :T { when { assertions(?k) includes { ?x :p ?y } } then trust add { ?x :p ?y } }",
    "rule :t2 author :T { when { graph :TG includes { ?x :p ?y . ?y :p ?z } } then trust add { ?x :p ?z } }",
    "rule :t3 author :T { when { graph :TG includes { ?x :p ?y } . ?y :q ?z } then trust add { ?x :q ?z } }",
    "rule :t4 author :T { when { ?x :q ?y . assertions(?k) includes { ?y :p ?z } } then trust add { ?x :p ?z } }",
];

#[derive(Debug, Clone)]
pub struct TrustCase {
    pub default: Vec<(usize, bool, usize)>,
    pub kis: Vec<Vec<(usize, bool, usize)>>,
    pub extra: Vec<(usize, bool, usize)>,
    pub order: Vec<usize>,
}

fn small_triple() -> impl Strategy<Value = (usize, bool, usize)> {
    (0..5usize, any::<bool>(), 0..5usize)
}

pub fn trust_case() -> impl Strategy<Value = TrustCase> {
    (
        prop::collection::vec(small_triple(), 0..6),
        prop::collection::vec(prop::collection::vec(small_triple(), 1..4), 0..4),
        prop::collection::vec(small_triple(), 1..4),
        Just((0..TRUST_RULES.len()).collect::<Vec<_>>()).prop_shuffle(),
    )
        .prop_map(|(default, kis, extra, order)| TrustCase {
            default,
            kis,
            extra,
            order,
        })
}

fn small(triple: &(usize, bool, usize)) -> Triple {
    let (s, p, o) = *triple;
    Triple::new(
        Term::iri(ex(&format!("n{s}"))),
        Term::iri(ex(if p { "p" } else { "q" })),
        Term::iri(ex(&format!("n{o}"))),
    )
}

fn add_small_ki(engine: &mut Engine, id: &str, triples: &[(usize, bool, usize)]) {
    let subject = Term::iri(ex(id));
    engine
        .create_ki(
            &ex(id),
            triples.iter().map(small).collect(),
            vec![],
            vec![
                Triple::new(subject.clone(), Term::iri(vocab::AUTHOR), Term::iri(ex("T"))),
                Triple::new(subject, Term::iri(vocab::CREATED_AT), Term::string("2024")),
            ],
        )
        .expect("generated KI");
}

pub fn trust_engine(case: &TrustCase, order: &[usize]) -> Engine {
    let mut e = Engine::default();
    let mut text = String::from("@prefix : <http://example.org/kg#> .\n");
    text.push_str(":TG kgu:trustedGraphOf :T .\nGRAPH :TG { }\n");
    for tr in &case.default {
        text.push_str(&format!("{}\n", small(tr)));
    }
    e.load_trig(&text, None).expect("trust kg");
    for (i, ki) in case.kis.iter().enumerate() {
        add_small_ki(&mut e, &format!("k{i}"), ki);
    }
    let mut rules = String::from("@prefix : <http://example.org/kg#> .\n");
    for &i in order {
        rules.push_str(TRUST_RULES[i]);
        rules.push('\n');
    }
    e.load_rules(&rules, None).expect("trust rules");
    e
}

fn trusted_triples(e: &Engine) -> Result<BTreeSet<Triple>, String> {
    let tg = e.trusted_graph(&ex("T"), None).map_err(|err| err.to_string())?;
    Ok(tg.quads.triples().collect())
}

/// Adding a KI never removes statements from a trusted graph.
pub fn check_monotone(case: &TrustCase) -> Result<(), String> {
    let mut e = trust_engine(case, &case.order);
    let before = trusted_triples(&e)?;
    add_small_ki(&mut e, "extra", &case.extra);
    let after = trusted_triples(&e)?;
    match before.difference(&after).next() {
        None => Ok(()),
        Some(lost) => Err(format!("{lost} lost after adding a KI")),
    }
}

/// Rule load order does not change the trusted graph.
pub fn check_confluent(case: &TrustCase) -> Result<(), String> {
    let canonical: Vec<usize> = (0..TRUST_RULES.len()).collect();
    let a = trusted_triples(&trust_engine(case, &canonical))?;
    let b = trusted_triples(&trust_engine(case, &case.order))?;
    if a == b {
        Ok(())
    } else {
        Err(format!("order {:?} gives {} statements, canonical {}", case.order, b.len(), a.len()))
    }
}

/// Shuffling the fixture rule file leaves every scenario decision unchanged.
pub fn check_fixture_order_free(order: &[usize]) -> Result<(), String> {
    let file = parse_rules(&fixture_rules_text()).map_err(|e| e.to_string())?;
    let shuffled: Vec<Rule> = order.iter().map(|&i| file.rules[i].clone()).collect();
    let reference = fixture_engine();
    let mut e = Engine::new(fixture_config());
    e.load_trig(&fixture_kg_text(), None).map_err(|e| e.to_string())?;
    e.load_rules(&print_rules(&shuffled, &file.prefixes), None)
        .map_err(|e| e.to_string())?;
    for r in scenario_requests() {
        let x = reference.eval_request(&r).map_err(|e| e.to_string())?;
        let y = e.eval_request(&r).map_err(|e| e.to_string())?;
        if x.authorization != y.authorization {
            return Err(format!("{r:?}: {:?} vs {:?}", x.authorization, y.authorization));
        }
    }
    Ok(())
}

pub fn scenario_requests() -> Vec<Request> {
    vec![
        request("Ed", "Read", "georgeOfficerReliefOrg"),
        request("Ed", "Read", "georgeOwnerAuditInc"),
        request("Ed", "Donate", "donationRequest"),
        request("George", "Read", "reliefOrgFR"),
        request("Ed", "Read", "auditCert"),
    ]
}

// ---------------------------------------------------------------------------
// Fail-closed default

#[derive(Debug, Clone)]
pub struct BareCase {
    pub ki: Vec<(usize, bool, usize)>,
    pub agent: usize,
}

pub fn bare_case() -> impl Strategy<Value = BareCase> {
    (prop::collection::vec(small_triple(), 0..5), 0..5usize).prop_map(|(ki, agent)| BareCase { ki, agent })
}

/// No rules and a default configuration: every valid request is Denied.
pub fn check_fail_closed(case: &BareCase) -> Result<(), String> {
    let mut e = Engine::default();
    e.load_trig(
        "<http://example.org/kg#Read> rdfs:subClassOf kgu:Action .\n<http://example.org/kg#n0> <http://example.org/kg#p> <http://example.org/kg#n1> , <http://example.org/kg#n2> , <http://example.org/kg#n3> , <http://example.org/kg#n4> .",
        None,
    )
    .map_err(|e| e.to_string())?;
    add_small_ki(&mut e, "k", &case.ki);
    let d = e
        .eval_request(&request(&format!("n{}", case.agent), "Read", "k"))
        .map_err(|e| e.to_string())?;
    if d.authorization.value == AuthValue::Denied && d.authorization.is_default() {
        Ok(())
    } else {
        Err(format!("got {:?}", d.authorization))
    }
}

// ---------------------------------------------------------------------------
// Redaction partition

#[derive(Debug, Clone)]
pub struct RedactionCase {
    /// For each depicted person: whether they have a deny rule.
    pub people: Vec<bool>,
    pub default: AuthValue,
}

pub fn redaction_case() -> impl Strategy<Value = RedactionCase> {
    (prop::collection::vec(any::<bool>(), 0..6), auth_value())
        .prop_map(|(people, default)| RedactionCase { people, default })
}

pub fn redaction_engine(case: &RedactionCase) -> Engine {
    let mut config = EngineConfig::default();
    config.prefixes.insert("", EX);
    config.strategy = AggregationStrategy::PermitOverrides;
    config.default_authorization = case.default;
    config.registry.register(ex("depicts"), RelationKind::Identifies, 1);
    config.actions.insert(
        ex("Read"),
        ActionConfig {
            composite: true,
            decompose: true,
            handler: Some(HandlerKind::Read),
            ..Default::default()
        },
    );
    let mut e = Engine::new(config);
    let photo = Term::iri(ex("photo"));
    let mut assertions = vec![Triple::new(photo.clone(), Term::iri(ex("title")), Term::string("party"))];
    let mut rules = String::from(
        "@prefix : <http://example.org/kg#> .\nrule :byAuthor author :Owner { when { assertions(?requestKI) includes { ?x :title ?t } } then authorize Allowed for ?requestAction }\n",
    );
    for (i, has_rule) in case.people.iter().enumerate() {
        assertions.push(Triple::new(photo.clone(), Term::iri(ex("depicts")), Term::iri(ex(&format!("P{i}")))));
        if *has_rule {
            rules.push_str(&format!(
                "rule :deny{i} author :P{i} {{ when {{ assertions(?requestKI) includes {{ ?x :depicts :P{i} }} }} then authorize Denied for ?requestAction }}\n"
            ));
        }
    }
    e.create_ki(
        &ex("photo"),
        assertions,
        vec![],
        vec![
            Triple::new(photo.clone(), Term::iri(vocab::AUTHOR), Term::iri(ex("Owner"))),
            Triple::new(photo, Term::iri(vocab::CREATED_AT), Term::string("2024")),
        ],
    )
    .expect("photo KI");
    e.load_rules(&rules, None).expect("redaction rules");
    e
}

/// Returned plus denied elements are exactly the decomposition, disjointly,
/// and each element's fate matches the oracle.
pub fn check_redaction(case: &RedactionCase) -> Result<(), String> {
    let e = redaction_engine(case);
    let d = e
        .eval_request(&request("Owner", "Read", "photo"))
        .map_err(|e| e.to_string())?;
    let Some(ActionResult::Read {
        assertions,
        elements,
        ..
    }) = d.action_result
    else {
        return Err(format!("read not performed: {:?}", d.authorization));
    };
    let ki = e.kg().ki(&ex("photo")).expect("photo");
    let all: BTreeSet<Triple> = kgusage_core::ki::decompose_ki(e.kg(), ki)
        .into_iter()
        .map(|el| el.assertion)
        .collect();
    let returned: BTreeSet<Triple> = assertions.iter().cloned().collect();
    let denied: BTreeSet<Triple> = elements
        .iter()
        .filter(|el| el.value == AuthValue::Denied)
        .map(|el| el.assertion.clone())
        .collect();
    if returned.len() != assertions.len() || !returned.is_disjoint(&denied) {
        return Err("returned and denied elements overlap".into());
    }
    let union: BTreeSet<Triple> = returned.union(&denied).cloned().collect();
    if union != all {
        return Err(format!("partition covers {} of {} elements", union.len(), all.len()));
    }
    for (i, has_rule) in case.people.iter().enumerate() {
        let t = Triple::new(Term::iri(ex("photo")), Term::iri(ex("depicts")), Term::iri(ex(&format!("P{i}"))));
        let allowed = !has_rule && case.default == AuthValue::Allowed;
        if returned.contains(&t) != allowed {
            return Err(format!("element for P{i}: expected allowed={allowed}"));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Trace replay

/// The JSON trace alone reproduces the authorization, and so does
/// re-running the recorded request.
pub fn check_replay(engine: &Engine, request: &Request) -> Result<(), String> {
    let d = engine.eval_request(request).map_err(|e| e.to_string())?;
    let json = serde_json::to_string(&d.trace).map_err(|e| e.to_string())?;
    let back: DecisionTrace = serde_json::from_str(&json).map_err(|e| e.to_string())?;
    if back != d.trace {
        return Err("trace does not survive JSON".into());
    }
    let replayed = back.replay();
    if replayed != d.authorization {
        return Err(format!("replay {replayed:?} vs {:?}", d.authorization));
    }
    let again = engine.eval_request(&back.request).map_err(|e| e.to_string())?;
    if again.authorization != d.authorization {
        return Err("re-evaluation differs".into());
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Rule text round trip

fn rule_object() -> impl Strategy<Value = Term> {
    prop_oneof![
        3 => slot(node()),
        1 => "[ -~]{0,6}".prop_map(Term::string),
        1 => "[0-9]{1,3}".prop_map(|s| Term::typed(s, "http://www.w3.org/2001/XMLSchema#integer")),
    ]
}

fn rule_triple() -> impl Strategy<Value = PatternAtom> {
    (slot(node()), slot(pred()), rule_object()).prop_map(|(s, p, o)| PatternAtom::triple(s, p, o))
}

fn rule_atom() -> impl Strategy<Value = PatternAtom> {
    let inner = prop_oneof![
        3 => rule_triple(),
        1 => (graph_term(), prop::collection::vec(rule_triple(), 1..=2))
            .prop_map(|(graph, inner)| PatternAtom::GraphIncludes { graph, inner: Pattern::new(inner) }),
    ];
    prop_oneof![
        4 => rule_triple(),
        2 => (graph_term(), prop::collection::vec(inner, 1..=3))
            .prop_map(|(graph, inner)| PatternAtom::GraphIncludes { graph, inner: Pattern::new(inner) }),
        1 => (
            prop_oneof![Just(BuiltinOp::Eq), Just(BuiltinOp::Neq), Just(BuiltinOp::Lt), Just(BuiltinOp::Ge)],
            var(),
            slot(node())
        )
            .prop_map(|(op, a, b)| PatternAtom::Builtin { op, args: vec![a, b] }),
    ]
}

fn consequent() -> impl Strategy<Value = Consequent> {
    let additions = || prop::collection::vec(rule_triple(), 1..=3).prop_map(Pattern::new);
    prop_oneof![
        (additions(), any::<bool>()).prop_map(|(additions, own)| Consequent::TrustAdd {
            target: own.then(|| t("TG")),
            additions,
        }),
        (auth_value(), prop_oneof![Just(Term::var("requestAction")), Just(t("Read"))])
            .prop_map(|(value, action)| Consequent::Authorize { value, action }),
        additions().prop_map(|additions| Consequent::AssertFacts { additions }),
    ]
}

pub fn random_rules() -> impl Strategy<Value = Vec<Rule>> {
    let one = (
        prop::collection::vec(rule_atom(), 0..=4),
        consequent(),
        prop::collection::vec(node(), 0..=2),
    )
        .prop_filter_map("valid rule", |(atoms, consequent, sources)| {
            let sources = sources.into_iter().filter_map(|s| s.as_iri().map(str::to_string)).collect();
            Rule::new(format!("{T}r"), format!("{T}author"), Pattern::new(atoms), consequent, sources, SourceSpan::default()).ok()
        });
    prop::collection::vec(one, 1..4).prop_map(|rules| {
        rules
            .into_iter()
            .enumerate()
            .map(|(i, mut r)| {
                r.name = format!("{T}r{i}");
                r
            })
            .collect()
    })
}

/// print then parse yields the same rules, with and without prefixes.
pub fn check_round_trip(rules: &[Rule]) -> Result<(), String> {
    let mut with_prefix = Prefixes::default();
    with_prefix.insert("t", T);
    for prefixes in [Prefixes::default(), with_prefix] {
        let text = print_rules(rules, &prefixes);
        let parsed = parse_rules(&text).map_err(|e| format!("{e}\n{text}"))?;
        if parsed.rules != rules {
            return Err(format!("round trip changed the rules:\n{text}"));
        }
        let again = print_rules(&parsed.rules, &parsed.prefixes);
        if again != text {
            return Err(format!("printing is not stable:\n{text}\n---\n{again}"));
        }
    }
    Ok(())
}
