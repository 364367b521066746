//! Trusted graphs: forward chaining of an agent's trust rules to a fixpoint.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{GraphError, TrustError};
use crate::pattern::{match_restricted, Binding, DeltaRestriction, Pattern, PatternAtom};
use crate::rule::{Consequent, Rule, RuleKind};
use crate::store::{GraphIndex, Layered, QuadSource};
use crate::syntax::Prefixes;
use crate::term::{vocab, GraphId, Term, Triple};

/// Default bound on derived quads per fixpoint.
pub const DEFAULT_DERIVATION_CAP: usize = 10_000;

/// The graph holding `agent`'s trusted statements: the subject of a
/// `kgu:trustedGraphOf` triple in the default graph, else `<agent>/trusted`.
pub fn trusted_graph_id(source: &dyn QuadSource, agent: &str) -> GraphId {
    source
        .graph(&GraphId::default_graph())
        .and_then(|g| {
            g.scan(
                None,
                Some(&Term::iri(vocab::TRUSTED_GRAPH_OF)),
                Some(&Term::iri(agent)),
            )
            .into_iter()
            .find_map(|t| t.subject.as_iri().map(GraphId::new))
        })
        .unwrap_or_else(|| GraphId(format!("{agent}/trusted")))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrustRuleSet {
    pub owner: String,
    pub rules: Vec<Rule>,
}

/// The trust rules authored by `agent`, in load order.
pub fn trust_rule_set<'a>(rules: impl IntoIterator<Item = &'a Rule>, agent: &str) -> TrustRuleSet {
    TrustRuleSet {
        owner: agent.to_string(),
        rules: rules
            .into_iter()
            .filter(|r| r.kind == RuleKind::Trust && r.author == agent)
            .cloned()
            .collect(),
    }
}

/// One derived statement and how it was first obtained.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Derivation {
    pub triple: Triple,
    pub rule: String,
    pub binding: Binding,
    pub iteration: usize,
}

#[derive(Debug, Clone)]
pub struct TrustedGraph {
    pub owner: String,
    pub graph: GraphId,
    /// Store generation the graph was computed against.
    pub generation: u64,
    /// Seed statements plus everything derived.
    pub quads: GraphIndex,
    pub seed: GraphIndex,
    pub derivations: Vec<Derivation>,
    pub iterations: usize,
}

impl TrustedGraph {
    pub fn len(&self) -> usize {
        self.quads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.quads.is_empty()
    }

    pub fn contains(&self, t: &Triple) -> bool {
        self.quads.contains(&t.subject, &t.predicate, &t.object)
    }

    pub fn derivation_json(&self) -> serde_json::Value {
        serde_json::json!({
            "owner": self.owner,
            "graph": self.graph,
            "iterations": self.iterations,
            "seed": self.seed.triples().map(|t| t.to_string()).collect::<Vec<_>>(),
            "derived": self.derivations.iter().map(|d| serde_json::json!({
                "triple": d.triple.to_string(),
                "rule": d.rule,
                "binding": d.binding,
                "iteration": d.iteration,
            })).collect::<Vec<_>>(),
        })
    }

    /// Derived statements grouped by iteration.
    pub fn derivation_text(&self, prefixes: &Prefixes) -> String {
        let mut out = format!(
            "trusted graph {} of {}\n",
            prefixes.short_name(self.graph.as_str()),
            prefixes.short_name(&self.owner)
        );
        let render = |t: &Triple| {
            format!(
                "{} {} {}",
                prefixes.render_term(&t.subject),
                prefixes.render_term(&t.predicate),
                prefixes.render_term(&t.object)
            )
        };
        for t in self.seed.triples() {
            let _ = writeln!(out, "  seed: {}", render(&t));
        }
        let mut last = 0;
        for d in &self.derivations {
            if d.iteration != last {
                let _ = writeln!(out, "  iteration {}", d.iteration);
                last = d.iteration;
            }
            let binding: Vec<String> = d
                .binding
                .iter()
                .map(|(k, v)| format!("?{k}={}", prefixes.render_term(v)))
                .collect();
            let _ = writeln!(
                out,
                "    {}  <- {} [{}]",
                render(&d.triple),
                prefixes.short_name(&d.rule),
                binding.join(", ")
            );
        }
        out
    }
}

pub(crate) struct Fixpoint {
    pub quads: GraphIndex,
    pub derivations: Vec<Derivation>,
    pub iterations: usize,
}

/// How a rule can be evaluated semi-naively: the atoms that may read the
/// target graph, or `None` when some atom reads it in a way a single-atom
/// delta cannot capture.
fn delta_atoms(antecedent: &Pattern, target: &GraphId, scope: &[GraphId]) -> Option<Vec<usize>> {
    let target_term = target.to_term();
    let mut atoms = Vec::new();
    for (i, atom) in antecedent.atoms.iter().enumerate() {
        match atom {
            PatternAtom::Triple { .. } if scope.contains(target) => atoms.push(i),
            PatternAtom::Triple { .. } | PatternAtom::Builtin { .. } => {}
            PatternAtom::GraphIncludes { graph, inner } => {
                let reads_target = graph.is_variable() || *graph == target_term;
                let simple = matches!(inner.atoms.as_slice(), [PatternAtom::Triple { .. }]);
                let nested_reads = inner
                    .atoms
                    .iter()
                    .any(|a| matches!(a, PatternAtom::GraphIncludes { .. }));
                if nested_reads || (reads_target && !simple) {
                    return None;
                }
                if reads_target {
                    atoms.push(i);
                }
            }
        }
    }
    Some(atoms)
}

/// Semi-naive evaluation of `rules` whose consequent templates write into
/// `target`. Antecedents match over `scope` with `target` shadowed by the
/// growing graph.
pub(crate) fn fixpoint(
    source: &dyn QuadSource,
    rules: &[&Rule],
    target: &GraphId,
    seed: GraphIndex,
    scope: &[GraphId],
    initial: &Binding,
    cap: usize,
) -> Result<Fixpoint, TrustError> {
    let owner = target.to_string();
    let plans: Vec<Option<Vec<usize>>> = rules
        .iter()
        .map(|r| delta_atoms(&r.antecedent, target, scope))
        .collect();
    let mut total = seed;
    let mut delta = total.clone();
    let mut derivations = Vec::new();
    let mut iteration = 0;

    loop {
        iteration += 1;
        let mut fresh: Vec<Derivation> = Vec::new();
        let mut fresh_set = BTreeSet::new();
        {
            let view = Layered::new(source).with(target.clone(), &total);
            for (rule, plan) in rules.iter().zip(&plans) {
                let solutions = match plan {
                    Some(atoms) if iteration > 1 => {
                        let mut all = BTreeSet::new();
                        for &atom in atoms {
                            let r = DeltaRestriction {
                                atom,
                                target,
                                delta: &delta,
                            };
                            all.extend(eval(&view, rule, initial, scope, Some(r))?);
                        }
                        all
                    }
                    _ => eval(&view, rule, initial, scope, None)?
                        .into_iter()
                        .collect(),
                };
                for b in solutions {
                    for t in instantiate(rule, &b, target) {
                        if !total.contains(&t.subject, &t.predicate, &t.object)
                            && fresh_set.insert(t.clone())
                        {
                            fresh.push(Derivation {
                                triple: t,
                                rule: rule.name.clone(),
                                binding: b.clone(),
                                iteration,
                            });
                        }
                    }
                }
            }
        }
        if fresh.is_empty() {
            break;
        }
        if derivations.len() + fresh.len() > cap {
            return Err(TrustError::NonTermination { owner, cap });
        }
        delta = GraphIndex::new();
        for d in &fresh {
            let t = d.triple.clone();
            delta.insert(t.subject.clone(), t.predicate.clone(), t.object.clone());
            total.insert(t.subject, t.predicate, t.object);
        }
        derivations.extend(fresh);
    }
    Ok(Fixpoint {
        quads: total,
        derivations,
        iterations: iteration,
    })
}

fn eval(
    view: &dyn QuadSource,
    rule: &Rule,
    initial: &Binding,
    scope: &[GraphId],
    restriction: Option<DeltaRestriction<'_>>,
) -> Result<Vec<Binding>, TrustError> {
    match_restricted(view, &rule.antecedent, initial, scope, restriction).map_err(
        |source: GraphError| TrustError::Rule {
            rule: rule.name.clone(),
            source,
        },
    )
}

fn instantiate(rule: &Rule, b: &Binding, target: &GraphId) -> Vec<Triple> {
    if let Consequent::TrustAdd {
        target: Some(t), ..
    } = &rule.consequent
    {
        if b.apply(t) != target.to_term() {
            return Vec::new();
        }
    }
    rule.consequent
        .template()
        .unwrap_or_default()
        .iter()
        .filter_map(|t| b.instantiate(t))
        .filter(|t| t.clone().in_graph(target.clone()).validate().is_ok())
        .collect()
}

/// Options for [`eval_trust_rules`].
#[derive(Debug, Clone)]
pub struct TrustOptions {
    /// Graphs trust-rule antecedents read, besides the trusted graph itself.
    pub scope: Vec<GraphId>,
    pub cap: usize,
    /// Bound as `?requestAction` while evaluating.
    pub action: Option<String>,
    pub generation: u64,
}

/// Computes TrustedKG(owner): the owner's seed graph (if the store declares
/// one) closed under the owner's trust rules.
pub fn eval_trust_rules(
    source: &dyn QuadSource,
    ts: &TrustRuleSet,
    options: &TrustOptions,
) -> Result<TrustedGraph, TrustError> {
    let graph = trusted_graph_id(source, &ts.owner);
    let seed = source.graph(&graph).cloned().unwrap_or_default();
    let mut scope = options.scope.clone();
    if !scope.contains(&graph) {
        scope.push(graph.clone());
    }
    let mut initial = Binding::new().with(vocab::REQUEST_AGENT_VAR, Term::iri(ts.owner.clone()));
    if let Some(a) = &options.action {
        initial.bind(vocab::REQUEST_ACTION_VAR, Term::iri(a.clone()));
    }
    let rules: Vec<&Rule> = ts.rules.iter().collect();
    let fp = fixpoint(source, &rules, &graph, seed.clone(), &scope, &initial, options.cap)?;
    log::debug!(
        "trusted graph of {}: {} quads after {} iterations",
        ts.owner,
        fp.quads.len(),
        fp.iterations
    );
    Ok(TrustedGraph {
        owner: ts.owner.clone(),
        graph,
        generation: options.generation,
        quads: fp.quads,
        seed,
        derivations: fp.derivations,
        iterations: fp.iterations,
    })
}
