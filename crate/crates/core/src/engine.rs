//! The engine: a knowledge graph with its rules and configuration, and the
//! request pipeline built on top of them.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::{Arc, Mutex};

use crate::config::{EngineConfig, HandlerKind};
use crate::error::{EvalError, LoadError, RuleError};
use crate::ki::{decompose_ki, related_agents, KnowledgeGraph, KnowledgeItem, RelationKind};
use crate::pattern::{match_pattern, Binding};
use crate::par::{self, ExecMode};
use crate::precedence::{derive_precedence, RuleStanding};
use crate::rule::{classify_rule, rule_to_ki, AuthValue, Classification, Consequent, Rule, RuleKind};
use crate::store::{GraphIndex, Layered, QuadSource};
use crate::syntax::rules::parse_rules_with;
use crate::syntax::trig::parse_trig_with;
use crate::syntax::Prefixes;
use crate::term::{vocab, GraphId, Quad, Term, Triple};
use crate::trust::{
    eval_trust_rules, fixpoint, trust_rule_set, trusted_graph_id, Derivation, TrustOptions,
    TrustedGraph,
};
use crate::usage::{
    evaluate_tiers, ActionResult, ApplicableRule, Authorization, Decision, DecisionTrace,
    ElementOutcome, Outcome, Request,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionType {
    pub id: String,
    /// Whether element-wise decomposition can apply.
    pub composite: bool,
}

/// Performs an authorized action other than the built-in read.
pub trait ActionHandler: Send + Sync {
    fn name(&self) -> &str;

    /// Returns a short report of what was done.
    fn execute(
        &self,
        request: &Request,
        ki: &KnowledgeItem,
        kg: &dyn QuadSource,
        trusted: &TrustedGraph,
    ) -> Result<String, EvalError>;
}

/// Logs the action and does nothing else.
pub struct LoggingHandler;

impl ActionHandler for LoggingHandler {
    fn name(&self) -> &str {
        "log"
    }

    fn execute(
        &self,
        request: &Request,
        ki: &KnowledgeItem,
        _kg: &dyn QuadSource,
        trusted: &TrustedGraph,
    ) -> Result<String, EvalError> {
        log::info!(
            "{} performs {} on {} ({} trusted statements)",
            request.agent,
            request.action,
            ki.id,
            trusted.len()
        );
        Ok(format!("{} on {} recorded", request.action, ki.id))
    }
}

/// Classification and governance facts for the current store generation.
#[derive(Debug, Clone)]
pub struct Governance {
    pub generation: u64,
    pub classifications: BTreeMap<String, Classification>,
    /// Category types of every rule plus everything governance rules assert.
    pub facts: GraphIndex,
    /// `(higher, lower, source)` where source is the deriving rule, or the
    /// default graph when the fact was stated directly.
    pub precedes: Vec<(String, String, String)>,
    pub derivations: Vec<Derivation>,
}

type TrustKey = (String, Option<String>);

pub struct Engine {
    kg: KnowledgeGraph,
    rules: Vec<Rule>,
    config: EngineConfig,
    prefixes: Prefixes,
    handlers: BTreeMap<String, Arc<dyn ActionHandler>>,
    mode: ExecMode,
    trust_cache: Mutex<HashMap<TrustKey, Arc<TrustedGraph>>>,
    governance_cache: Mutex<Option<Arc<Governance>>>,
}

impl Clone for Engine {
    fn clone(&self) -> Self {
        Engine {
            kg: self.kg.clone(),
            rules: self.rules.clone(),
            config: self.config.clone(),
            prefixes: self.prefixes.clone(),
            handlers: self.handlers.clone(),
            mode: self.mode,
            trust_cache: Mutex::new(HashMap::new()),
            governance_cache: Mutex::new(None),
        }
    }
}

impl Default for Engine {
    fn default() -> Self {
        Engine::new(EngineConfig::default())
    }
}

/// Where a request is evaluated: the KI plus any transient graphs it needs.
struct Target<'a> {
    ki: &'a KnowledgeItem,
    overlays: Vec<(GraphId, &'a GraphIndex)>,
}

struct Decided {
    authorization: Authorization,
    trace: DecisionTrace,
    requester: Arc<TrustedGraph>,
}

impl Engine {
    pub fn new(config: EngineConfig) -> Self {
        let mut handlers: BTreeMap<String, Arc<dyn ActionHandler>> = BTreeMap::new();
        for (action, a) in &config.actions {
            if a.handler == Some(HandlerKind::Log) {
                handlers.insert(action.clone(), Arc::new(LoggingHandler));
            }
        }
        let mut kg = KnowledgeGraph::new();
        kg.merge_prefixes(&config.prefixes);
        Engine {
            prefixes: config.prefixes.clone(),
            kg,
            rules: Vec::new(),
            config,
            handlers,
            mode: ExecMode::default(),
            trust_cache: Mutex::new(HashMap::new()),
            governance_cache: Mutex::new(None),
        }
    }

    pub fn kg(&self) -> &KnowledgeGraph {
        &self.kg
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    /// Config prefixes plus every prefix declared by loaded files.
    pub fn prefixes(&self) -> &Prefixes {
        &self.prefixes
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn rule(&self, name: &str) -> Option<&Rule> {
        self.rules.iter().find(|r| r.name == name)
    }

    pub fn exec_mode(&self) -> ExecMode {
        self.mode
    }

    pub fn set_exec_mode(&mut self, mode: ExecMode) {
        self.mode = mode;
    }

    pub fn register_handler(&mut self, action: impl Into<String>, handler: Arc<dyn ActionHandler>) {
        self.handlers.insert(action.into(), handler);
    }

    /// Expands a CLI-style name (`p:local`, `<iri>` or a bare local name).
    pub fn resolve(&self, name: &str) -> Option<String> {
        self.prefixes.resolve(name)
    }

    pub fn short_name(&self, iri: &str) -> String {
        self.prefixes.short_name(iri)
    }

    /// Loads TriG text. Returns the ids of the KIs it introduced.
    pub fn load_trig(&mut self, text: &str, file: Option<&str>) -> Result<Vec<String>, LoadError> {
        let doc = parse_trig_with(text, self.prefixes.clone()).map_err(|e| match file {
            Some(f) => e.in_file(f),
            None => e,
        })?;
        self.prefixes.merge(&doc.prefixes);
        Ok(self.kg.load_trig(&doc)?)
    }

    /// Loads a rule file. Returns the number of rules added.
    pub fn load_rules(&mut self, text: &str, file: Option<&str>) -> Result<usize, LoadError> {
        let parsed = parse_rules_with(text, self.prefixes.clone()).map_err(|e| match file {
            Some(f) => e.in_file(f),
            None => e,
        })?;
        self.prefixes.merge(&parsed.prefixes);
        let n = parsed.rules.len();
        for rule in parsed.rules {
            self.add_rule(rule)?;
        }
        Ok(n)
    }

    /// Publishes a rule as a KI and makes it available for evaluation.
    pub fn add_rule(&mut self, rule: Rule) -> Result<(), LoadError> {
        if let Consequent::TrustAdd {
            target: Some(Term::Iri(target)),
            ..
        } = &rule.consequent
        {
            let own = trusted_graph_id(&self.kg, &rule.author);
            if own.as_str() != &**target {
                return Err(RuleError::InvalidTrustTarget {
                    rule: rule.name.clone(),
                    target: target.to_string(),
                    author: rule.author.clone(),
                }
                .into());
            }
        }
        if rule.kind == RuleKind::Governance {
            classify_rule(&rule, &self.kg, &self.config.persons)?;
        }
        rule_to_ki(&rule, &mut self.kg)?;
        self.rules.push(rule);
        Ok(())
    }

    pub fn add_quad(&mut self, quad: Quad) -> Result<bool, LoadError> {
        Ok(self.kg.add_quad(quad)?)
    }

    pub fn remove_quad(&mut self, quad: &Quad) -> bool {
        self.kg.remove_quad(quad)
    }

    pub fn create_ki(
        &mut self,
        id: &str,
        assertions: Vec<Triple>,
        provenance: Vec<Triple>,
        pubinfo: Vec<Triple>,
    ) -> Result<KnowledgeItem, LoadError> {
        Ok(self.kg.create_ki(id, assertions, provenance, pubinfo)?)
    }

    /// Removes a KI. Rules cannot be removed this way.
    pub fn remove_ki(&mut self, id: &str) -> Result<KnowledgeItem, LoadError> {
        if self.rule(id).is_some() {
            return Err(LoadError::Config(crate::error::ConfigError::Invalid(format!(
                "{id} is a rule"
            ))));
        }
        Ok(self.kg.remove_ki(id)?)
    }

    /// Declared actions: configured ones plus subclasses of `kgu:Action`.
    pub fn actions(&self) -> BTreeMap<String, ActionType> {
        let mut out: BTreeMap<String, ActionType> = self
            .config
            .actions
            .iter()
            .map(|(id, a)| {
                (
                    id.clone(),
                    ActionType {
                        id: id.clone(),
                        composite: a.composite,
                    },
                )
            })
            .collect();
        if let Some(d) = self.kg.graph(&GraphId::default_graph()) {
            for t in d.scan(
                None,
                Some(&Term::iri(vocab::RDFS_SUBCLASS_OF)),
                Some(&Term::iri(vocab::ACTION)),
            ) {
                if let Some(id) = t.subject.as_iri() {
                    out.entry(id.to_string()).or_insert_with(|| ActionType {
                        id: id.to_string(),
                        composite: false,
                    });
                }
            }
        }
        out
    }

    pub fn action_type(&self, id: &str) -> Option<ActionType> {
        self.actions().remove(id)
    }

    /// An agent is known if the default graph mentions it, it authored a
    /// rule or KI, or the configuration names it.
    pub fn is_known_agent(&self, agent: &str) -> bool {
        let term = Term::iri(agent);
        let mentioned = self.kg.graph(&GraphId::default_graph()).is_some_and(|d| {
            !d.scan(Some(&term), None, None).is_empty() || !d.scan(None, None, Some(&term)).is_empty()
        });
        mentioned
            || self.rules.iter().any(|r| r.author == agent)
            || self.config.agent_ranks.contains_key(agent)
            || self.config.persons.contains(agent)
            || self.kg.kis().any(|k| k.author(&self.kg).as_deref() == Some(agent))
    }

    /// Default graph plus every KI graph.
    fn trust_scope(&self) -> Vec<GraphId> {
        let mut scope = vec![GraphId::default_graph()];
        for ki in self.kg.kis() {
            scope.extend(ki.graphs().into_iter().cloned());
        }
        scope
    }

    /// TrustedKG(agent), cached per store generation.
    pub fn trusted_graph(&self, agent: &str, action: Option<&str>) -> Result<Arc<TrustedGraph>, EvalError> {
        let generation = self.kg.generation();
        let key = (agent.to_string(), action.map(str::to_string));
        if let Some(tg) = self.trust_cache.lock().expect("trust cache poisoned").get(&key) {
            if tg.generation == generation {
                return Ok(tg.clone());
            }
        }
        let ts = trust_rule_set(&self.rules, agent);
        let tg = Arc::new(eval_trust_rules(
            &self.kg,
            &ts,
            &TrustOptions {
                scope: self.trust_scope(),
                cap: self.config.derivation_cap,
                action: action.map(str::to_string),
                generation,
            },
        )?);
        self.trust_cache
            .lock()
            .expect("trust cache poisoned")
            .insert(key, tg.clone());
        Ok(tg)
    }

    /// Rule classifications and the governance fixpoint, cached per store
    /// generation.
    pub fn governance(&self) -> Result<Arc<Governance>, EvalError> {
        let generation = self.kg.generation();
        if let Some(g) = self.governance_cache.lock().expect("governance cache poisoned").as_ref() {
            if g.generation == generation {
                return Ok(g.clone());
            }
        }
        let rdf_type = Term::iri(vocab::RDF_TYPE);
        let mut classifications = BTreeMap::new();
        let mut seed = GraphIndex::new();
        for rule in &self.rules {
            let c = classify_rule(rule, &self.kg, &self.config.persons)?;
            for cat in &c.categories {
                seed.insert(Term::iri(rule.name.clone()), rdf_type.clone(), Term::iri(cat.clone()));
            }
            classifications.insert(rule.name.clone(), c);
        }
        let target = GraphId::new(vocab::GOVERNANCE_GRAPH);
        let mut scope = self.trust_scope();
        scope.push(target.clone());
        let gov_rules: Vec<&Rule> = self
            .rules
            .iter()
            .filter(|r| r.kind == RuleKind::Governance)
            .collect();
        let fp = fixpoint(
            &self.kg,
            &gov_rules,
            &target,
            seed,
            &scope,
            &Binding::new(),
            self.config.derivation_cap,
        )?;

        let precedes = Term::iri(vocab::PRECEDES);
        let mut facts: Vec<(String, String, String)> = fp
            .derivations
            .iter()
            .filter(|d| d.triple.predicate == precedes)
            .filter_map(|d| {
                Some((
                    d.triple.subject.as_iri()?.to_string(),
                    d.triple.object.as_iri()?.to_string(),
                    d.rule.clone(),
                ))
            })
            .collect();
        if let Some(d) = self.kg.graph(&GraphId::default_graph()) {
            for t in d.scan(None, Some(&precedes), None) {
                if let (Some(h), Some(l)) = (t.subject.as_iri(), t.object.as_iri()) {
                    facts.push((h.to_string(), l.to_string(), vocab::DEFAULT_GRAPH.to_string()));
                }
            }
        }
        let gov = Arc::new(Governance {
            generation,
            classifications,
            facts: fp.quads,
            precedes: facts,
            derivations: fp.derivations,
        });
        *self.governance_cache.lock().expect("governance cache poisoned") = Some(gov.clone());
        Ok(gov)
    }

    /// Usage rules whose authors are related to `ki` or have jurisdiction
    /// over the knowledge graph, in load order, each with the best-ranked
    /// relation that made its author eligible.
    pub fn usage_rule_set(&self, ki: &KnowledgeItem) -> Vec<ApplicableRule> {
        self.usage_rule_set_in(&self.kg, ki)
    }

    fn relation_rank(&self, relation: &str) -> Option<i64> {
        self.config.registry.get(relation).map(|e| e.rank)
    }

    fn usage_rule_set_in(&self, source: &dyn QuadSource, ki: &KnowledgeItem) -> Vec<ApplicableRule> {
        let registry = &self.config.registry;
        let mut eligible: BTreeMap<String, (String, RelationKind)> = BTreeMap::new();
        let mut offer = |agent: &str, relation: &str, kind: RelationKind| {
            let key = |r: &str| (self.relation_rank(r).unwrap_or(i64::MAX), r.to_string());
            let better = match eligible.get(agent) {
                Some((current, _)) => key(relation) < key(current),
                None => true,
            };
            if better {
                eligible.insert(agent.to_string(), (relation.to_string(), kind));
            }
        };
        for r in related_agents(source, ki, registry) {
            offer(&r.agent, &r.relation, r.kind);
        }
        if let Some(d) = source.graph(&GraphId::default_graph()) {
            let kg_term = Term::iri(vocab::KNOWLEDGE_GRAPH);
            for rel in registry.jurisdiction_relations() {
                for t in d.scan(None, Some(&Term::iri(rel)), Some(&kg_term)) {
                    if let Some(a) = t.subject.as_iri() {
                        offer(a, rel, RelationKind::Jurisdiction);
                    }
                }
            }
        }
        self.rules
            .iter()
            .filter(|r| r.kind == RuleKind::Usage)
            .filter_map(|r| {
                let (relation, kind) = eligible.get(&r.author)?;
                Some(ApplicableRule {
                    rule: r.name.clone(),
                    author: r.author.clone(),
                    relation: relation.clone(),
                    kind: *kind,
                })
            })
            .collect()
    }

    /// Evaluates one usage rule for a request against the author's trusted
    /// graph. Abstains unless some binding satisfies the antecedent and
    /// targets the requested action.
    pub fn eval_rule(
        &self,
        rule: &Rule,
        request: &Request,
        author_trusted: &TrustedGraph,
    ) -> Result<(Outcome, Option<Binding>), EvalError> {
        let ki = self
            .kg
            .ki(&request.ki)
            .ok_or_else(|| EvalError::UnknownKi(request.ki.clone()))?;
        let context = context_graph(request);
        let target = Target {
            ki,
            overlays: Vec::new(),
        };
        self.eval_rule_in(rule, request, &target, author_trusted, &context)
    }

    fn eval_rule_in(
        &self,
        rule: &Rule,
        request: &Request,
        target: &Target<'_>,
        author_trusted: &TrustedGraph,
        context: &GraphIndex,
    ) -> Result<(Outcome, Option<Binding>), EvalError> {
        let Consequent::Authorize { value, action } = &rule.consequent else {
            return Ok((Outcome::Abstain, None));
        };
        let context_id = GraphId::new(vocab::CONTEXT_GRAPH);
        let mut view = Layered::new(&self.kg);
        for (g, idx) in &target.overlays {
            view.push(g.clone(), idx);
        }
        view.push(author_trusted.graph.clone(), &author_trusted.quads);
        view.push(context_id.clone(), context);

        let mut scope = vec![GraphId::default_graph()];
        scope.extend(target.overlays.iter().map(|(g, _)| g.clone()));
        scope.extend(target.ki.graphs().into_iter().cloned());
        scope.push(author_trusted.graph.clone());
        scope.push(context_id);
        scope.dedup();

        let seed = Binding::new()
            .with(vocab::REQUEST_AGENT_VAR, Term::iri(request.agent.clone()))
            .with(vocab::REQUEST_ACTION_VAR, Term::iri(request.action.clone()))
            .with(vocab::REQUEST_KI_VAR, Term::iri(target.ki.id.clone()));
        let solutions = match_pattern(&view, &rule.antecedent, &seed, &scope).map_err(|source| {
            EvalError::Rule {
                rule: rule.name.clone(),
                source,
            }
        })?;
        let requested = Term::iri(request.action.clone());
        Ok(solutions
            .into_iter()
            .find(|b| b.apply(action) == requested)
            .map_or((Outcome::Abstain, None), |b| (Outcome::from(*value), Some(b))))
    }

    fn validate(&self, request: &Request) -> Result<&KnowledgeItem, EvalError> {
        if self.action_type(&request.action).is_none() {
            return Err(EvalError::UnknownAction(request.action.clone()));
        }
        if !self.is_known_agent(&request.agent) {
            return Err(EvalError::UnknownAgent(request.agent.clone()));
        }
        self.kg
            .ki(&request.ki)
            .ok_or_else(|| EvalError::UnknownKi(request.ki.clone()))
    }

    /// Evaluates a request: trusted graphs, applicable rules, precedence,
    /// tiered evaluation and, when allowed, the action itself.
    pub fn eval_request(&self, request: &Request) -> Result<Decision, EvalError> {
        let ki = self.validate(request)?;
        let target = Target {
            ki,
            overlays: Vec::new(),
        };
        let decided = self.decide(request, &target)?;
        let action_result = match decided.authorization.value {
            AuthValue::Allowed => Some(self.execute(request, ki, &decided.requester)?),
            AuthValue::Denied => None,
        };
        Ok(Decision {
            authorization: decided.authorization,
            trace: decided.trace,
            action_result,
        })
    }

    /// Evaluates many requests against the current snapshot, in order.
    pub fn eval_batch(&self, requests: &[Request]) -> Vec<Result<Decision, EvalError>> {
        self.eval_batch_with(self.mode, requests)
    }

    pub fn eval_batch_with(&self, mode: ExecMode, requests: &[Request]) -> Vec<Result<Decision, EvalError>> {
        par::map(mode, requests, |r| self.eval_request(r))
    }

    fn decide(&self, request: &Request, target: &Target<'_>) -> Result<Decided, EvalError> {
        let requester = self.trusted_graph(&request.agent, Some(&request.action))?;

        let mut view = Layered::new(&self.kg);
        for (g, idx) in &target.overlays {
            view.push(g.clone(), idx);
        }
        let applicable = self.usage_rule_set_in(&view, target.ki);
        let governance = self.governance()?;
        let standings: Vec<RuleStanding> = applicable
            .iter()
            .map(|a| RuleStanding {
                rule: a.rule.clone(),
                author_rank: self.config.agent_ranks.get(&a.author).copied(),
                relation_rank: self.relation_rank(&a.relation),
            })
            .collect();
        let order = derive_precedence(&standings, &governance.precedes)?;

        let authors: Vec<String> = applicable
            .iter()
            .map(|a| a.author.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let graphs = par::map(self.mode, &authors, |a| self.trusted_graph(a, Some(&request.action)));
        let mut author_graphs: BTreeMap<String, Arc<TrustedGraph>> = BTreeMap::new();
        for (a, g) in authors.into_iter().zip(graphs) {
            author_graphs.insert(a, g?);
        }

        let context = context_graph(request);
        let strategy = self.config.strategy_for(&request.action);
        let default = self.config.default_for(&request.action);
        let walk = evaluate_tiers(&order.tiers, strategy, default, |name| {
            let rule = self.rule(name).expect("applicable rules are loaded");
            self.eval_rule_in(rule, request, target, &author_graphs[&rule.author], &context)
        })?;

        let mut trusted_graph_sizes = BTreeMap::from([(request.agent.clone(), requester.len())]);
        for (a, g) in &author_graphs {
            trusted_graph_sizes.insert(a.clone(), g.len());
        }
        let authorization = Authorization {
            value: walk.value,
            rule: walk.rule,
            tier: walk.tier,
            agent: request.agent.clone(),
            action: request.action.clone(),
            ki: target.ki.id.clone(),
        };
        let mut traced_request = request.clone();
        traced_request.ki = target.ki.id.clone();
        let trace = DecisionTrace {
            request: traced_request,
            strategy,
            default_authorization: default,
            trusted_graph_sizes,
            applicable_rules: applicable,
            precedence_edges: order.edges,
            dropped_edges: order.dropped,
            tier_plan: order.tiers,
            tiers: walk.tiers,
            authorization: authorization.clone(),
        };
        Ok(Decided {
            authorization,
            trace,
            requester,
        })
    }

    /// Performs an allowed action.
    pub fn execute(
        &self,
        request: &Request,
        ki: &KnowledgeItem,
        trusted: &TrustedGraph,
    ) -> Result<ActionResult, EvalError> {
        let cfg = self.config.actions.get(&request.action).cloned().unwrap_or_default();
        if cfg.handler == Some(HandlerKind::Read) {
            return self.read(request, ki, cfg.composite && cfg.decompose);
        }
        let handler = self
            .handlers
            .get(&request.action)
            .ok_or_else(|| EvalError::UnregisteredHandler(request.action.clone()))?;
        let message = handler.execute(request, ki, &self.kg, trusted)?;
        Ok(ActionResult::Handled {
            action: request.action.clone(),
            ki: ki.id.clone(),
            handler: handler.name().to_string(),
            message,
        })
    }

    fn graph_triples(&self, id: &GraphId) -> Vec<Triple> {
        self.kg
            .graph(id)
            .map(|g| g.triples().collect())
            .unwrap_or_default()
    }

    fn read(&self, request: &Request, ki: &KnowledgeItem, decompose: bool) -> Result<ActionResult, EvalError> {
        let provenance = self.graph_triples(&ki.provenance);
        let pubinfo = self.graph_triples(&ki.pubinfo);
        if !decompose {
            return Ok(ActionResult::Read {
                ki: ki.id.clone(),
                assertions: self.graph_triples(&ki.assertions),
                provenance,
                pubinfo,
                elements: Vec::new(),
            });
        }
        let elements = decompose_ki(&self.kg, ki);
        let outcomes = par::map(self.mode, &elements, |e| {
            let (assertion, links) = e.graphs();
            let target = Target {
                ki: &e.ki,
                overlays: vec![
                    (e.ki.assertions.clone(), &assertion),
                    (GraphId::new(vocab::ELEMENT_LINKS_GRAPH), &links),
                ],
            };
            let mut req = request.clone();
            req.ki = e.ki.id.clone();
            self.decide(&req, &target).map(|d| ElementOutcome {
                element: e.ki.id.clone(),
                assertion: e.assertion.clone(),
                value: d.authorization.value,
                rule: d.authorization.rule,
            })
        });
        let elements = outcomes.into_iter().collect::<Result<Vec<_>, _>>()?;
        let assertions = elements
            .iter()
            .filter(|e| e.value == AuthValue::Allowed)
            .map(|e| e.assertion.clone())
            .collect();
        Ok(ActionResult::Read {
            ki: ki.id.clone(),
            assertions,
            provenance,
            pubinfo,
            elements,
        })
    }
}

/// The request context as triples `(kgu:request, key, value)`.
pub fn context_graph(request: &Request) -> GraphIndex {
    let mut g = GraphIndex::new();
    for (k, v) in &request.context {
        g.insert(Term::iri(vocab::REQUEST), Term::iri(k.clone()), v.clone());
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ActionConfig;

    const KG: &str = r#"
@prefix : <http://example.org/kg#> .
:Read rdfs:subClassOf kgu:Action .
:Alice a foaf:Person .
:photo kgu:hasAssertionGraph :photoA ; kgu:hasProvenanceGraph :photoP ; kgu:hasPubinfoGraph :photoI .
GRAPH :photoA { :photo :depicts :Alice , :Bob }
GRAPH :photoP { }
GRAPH :photoI { :photo kgu:author :Carol ; kgu:createdAt "2020" }
"#;

    const RULES: &str = r#"
@prefix : <http://example.org/kg#> .
rule :aliceRule author :Alice {
  when { assertions(?requestKI) includes { ?x :depicts :Alice } }
  then authorize Denied for ?requestAction
}
rule :carolRule author :Carol {
  when { assertions(?requestKI) includes { ?x :depicts :Bob } }
  then authorize Allowed for ?requestAction
}
"#;

    fn engine(decompose: bool) -> Engine {
        let mut config = EngineConfig::default();
        config.prefixes.insert("", "http://example.org/kg#");
        config.registry.register(
            "http://example.org/kg#depicts",
            RelationKind::Identifies,
            1,
        );
        config.actions.insert(
            "http://example.org/kg#Read".into(),
            ActionConfig {
                composite: true,
                decompose,
                handler: Some(HandlerKind::Read),
                ..Default::default()
            },
        );
        let mut e = Engine::new(config);
        e.load_trig(KG, None).unwrap();
        e.load_rules(RULES, None).unwrap();
        e
    }

    fn ex(s: &str) -> String {
        format!("http://example.org/kg#{s}")
    }

    #[test]
    fn whole_item_denied_when_anyone_objects() {
        let e = engine(false);
        let d = e.eval_request(&Request::new(ex("Dan"), ex("Read"), ex("photo")));
        assert!(matches!(d, Err(EvalError::UnknownAgent(_))));
        let d = e
            .eval_request(&Request::new(ex("Carol"), ex("Read"), ex("photo")))
            .unwrap();
        assert_eq!(d.authorization.value, AuthValue::Denied);
        assert_eq!(d.authorization.rule, Some(ex("aliceRule")));
        assert!(d.action_result.is_none());
    }

    #[test]
    fn redaction_keeps_the_other_element() {
        let mut e = engine(true);
        // Whole-item read must pass first: let permissions win at item level.
        e.config
            .actions
            .get_mut(&ex("Read"))
            .unwrap()
            .strategy = Some(crate::usage::AggregationStrategy::PermitOverrides);
        let d = e
            .eval_request(&Request::new(ex("Carol"), ex("Read"), ex("photo")))
            .unwrap();
        assert_eq!(d.authorization.value, AuthValue::Allowed);
        let Some(ActionResult::Read {
            assertions,
            elements,
            ..
        }) = d.action_result
        else {
            panic!("expected a read result");
        };
        assert_eq!(elements.len(), 2);
        assert_eq!(
            assertions,
            vec![Triple::new(
                Term::iri(ex("photo")),
                Term::iri(ex("depicts")),
                Term::iri(ex("Bob"))
            )]
        );
    }

    #[test]
    fn unknown_action_and_ki() {
        let e = engine(false);
        assert!(matches!(
            e.eval_request(&Request::new(ex("Carol"), ex("Fly"), ex("photo"))),
            Err(EvalError::UnknownAction(_))
        ));
        assert!(matches!(
            e.eval_request(&Request::new(ex("Carol"), ex("Read"), ex("nope"))),
            Err(EvalError::UnknownKi(_))
        ));
    }

    #[test]
    fn missing_handler_is_reported() {
        let mut e = engine(false);
        e.load_trig("<http://example.org/kg#Poke> rdfs:subClassOf kgu:Action .", None)
            .unwrap();
        let ki = e.kg().ki(&ex("photo")).unwrap().clone();
        let tg = e.trusted_graph(&ex("Carol"), None).unwrap();
        let req = Request::new(ex("Carol"), ex("Poke"), ex("photo"));
        assert!(matches!(
            e.execute(&req, &ki, &tg),
            Err(EvalError::UnregisteredHandler(_))
        ));
    }

    #[test]
    fn trust_target_must_be_own_graph() {
        let mut e = engine(false);
        let err = e
            .load_rules(
                "rule <r> author <Ed> { when { ?x <p> ?y } then trust add into <Other> { ?x <p> ?y } }",
                None,
            )
            .unwrap_err();
        assert!(matches!(err, LoadError::Rule(RuleError::InvalidTrustTarget { .. })));
    }

    #[test]
    fn caches_follow_generation() {
        let mut e = engine(false);
        let g1 = e.governance().unwrap();
        assert!(Arc::ptr_eq(&g1, &e.governance().unwrap()));
        e.add_quad(Triple::new(Term::iri("a"), Term::iri("b"), Term::iri("c")).in_graph(GraphId::default_graph()))
            .unwrap();
        assert!(!Arc::ptr_eq(&g1, &e.governance().unwrap()));
    }
}
