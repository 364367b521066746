//! Requests, authorizations, tier aggregation and decision traces.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ki::RelationKind;
use crate::pattern::Binding;
use crate::precedence::{DroppedEdge, PrecedenceEdge};
use crate::rule::AuthValue;
use crate::term::{Term, Triple};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Outcome {
    Allowed,
    Denied,
    Abstain,
}

impl From<AuthValue> for Outcome {
    fn from(v: AuthValue) -> Self {
        match v {
            AuthValue::Allowed => Outcome::Allowed,
            AuthValue::Denied => Outcome::Denied,
        }
    }
}

impl Outcome {
    pub fn value(self) -> Option<AuthValue> {
        match self {
            Outcome::Allowed => Some(AuthValue::Allowed),
            Outcome::Denied => Some(AuthValue::Denied),
            Outcome::Abstain => None,
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Allowed => "Allowed",
            Outcome::Denied => "Denied",
            Outcome::Abstain => "Abstain",
        })
    }
}

/// How the outcomes of one precedence tier are combined.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AggregationStrategy {
    #[default]
    DenyOverrides,
    PermitOverrides,
    Majority,
    Consensus,
}

impl fmt::Display for AggregationStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::DenyOverrides => "deny-overrides",
            Self::PermitOverrides => "permit-overrides",
            Self::Majority => "majority",
            Self::Consensus => "consensus",
        })
    }
}

impl FromStr for AggregationStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "deny-overrides" => Ok(Self::DenyOverrides),
            "permit-overrides" => Ok(Self::PermitOverrides),
            "majority" => Ok(Self::Majority),
            "consensus" => Ok(Self::Consensus),
            other => Err(format!(
                "unknown strategy {other:?} (deny-overrides, permit-overrides, majority, consensus)"
            )),
        }
    }
}

impl AggregationStrategy {
    /// Combined outcome of a tier, Abstains ignored.
    pub fn aggregate(self, outcomes: &[Outcome]) -> Outcome {
        let allowed = outcomes.iter().filter(|o| **o == Outcome::Allowed).count();
        let denied = outcomes.iter().filter(|o| **o == Outcome::Denied).count();
        match self {
            _ if allowed + denied == 0 => Outcome::Abstain,
            AggregationStrategy::DenyOverrides if denied > 0 => Outcome::Denied,
            AggregationStrategy::DenyOverrides => Outcome::Allowed,
            AggregationStrategy::PermitOverrides if allowed > 0 => Outcome::Allowed,
            AggregationStrategy::PermitOverrides => Outcome::Denied,
            AggregationStrategy::Majority if allowed > denied => Outcome::Allowed,
            AggregationStrategy::Majority if denied > allowed => Outcome::Denied,
            AggregationStrategy::Majority => Outcome::Abstain,
            AggregationStrategy::Consensus if denied == 0 => Outcome::Allowed,
            AggregationStrategy::Consensus if allowed == 0 => Outcome::Denied,
            AggregationStrategy::Consensus => Outcome::Abstain,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Request {
    pub agent: String,
    pub action: String,
    pub ki: String,
    /// Context key IRI to value, e.g. `kgu:requestTime`.
    #[serde(default)]
    pub context: BTreeMap<String, Term>,
}

impl Request {
    pub fn new(agent: impl Into<String>, action: impl Into<String>, ki: impl Into<String>) -> Self {
        Request {
            agent: agent.into(),
            action: action.into(),
            ki: ki.into(),
            context: BTreeMap::new(),
        }
    }

    pub fn with_context(mut self, key: impl Into<String>, value: Term) -> Self {
        self.context.insert(key.into(), value);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Authorization {
    pub value: AuthValue,
    /// The rule that decided, absent when the default applied.
    pub rule: Option<String>,
    pub tier: Option<usize>,
    pub agent: String,
    pub action: String,
    pub ki: String,
}

impl Authorization {
    pub fn is_default(&self) -> bool {
        self.rule.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleOutcome {
    pub rule: String,
    pub outcome: Outcome,
    /// First binding that satisfied the antecedent.
    pub binding: Option<Binding>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TierTrace {
    pub index: usize,
    pub rules: Vec<RuleOutcome>,
    pub aggregate: Outcome,
}

/// Result of walking the tiers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TierWalk {
    pub value: AuthValue,
    pub rule: Option<String>,
    pub tier: Option<usize>,
    pub tiers: Vec<TierTrace>,
}

fn deciding_rule(strategy: AggregationStrategy, rules: &[RuleOutcome], aggregate: Outcome) -> String {
    let pick = match strategy {
        AggregationStrategy::Consensus => rules.iter().find(|r| r.outcome != Outcome::Abstain),
        _ => rules.iter().find(|r| r.outcome == aggregate),
    };
    pick.map(|r| r.rule.clone()).unwrap_or_default()
}

/// Walks `tiers` in order, evaluating a tier's rules only once every earlier
/// tier has abstained. The first tier whose aggregate is not Abstain decides;
/// if all abstain, `default` applies.
pub fn evaluate_tiers<E>(
    tiers: &[Vec<String>],
    strategy: AggregationStrategy,
    default: AuthValue,
    mut eval: impl FnMut(&str) -> Result<(Outcome, Option<Binding>), E>,
) -> Result<TierWalk, E> {
    let mut trace = Vec::new();
    for (index, tier) in tiers.iter().enumerate() {
        let mut rules = Vec::with_capacity(tier.len());
        for name in tier {
            let (outcome, binding) = eval(name)?;
            rules.push(RuleOutcome {
                rule: name.clone(),
                outcome,
                binding,
            });
        }
        let outcomes: Vec<Outcome> = rules.iter().map(|r| r.outcome).collect();
        let aggregate = strategy.aggregate(&outcomes);
        let decided = aggregate.value();
        let rule = decided.map(|_| deciding_rule(strategy, &rules, aggregate));
        trace.push(TierTrace {
            index,
            rules,
            aggregate,
        });
        if let Some(value) = decided {
            return Ok(TierWalk {
                value,
                rule,
                tier: Some(index),
                tiers: trace,
            });
        }
    }
    Ok(TierWalk {
        value: default,
        rule: None,
        tier: None,
        tiers: trace,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApplicableRule {
    pub rule: String,
    pub author: String,
    /// The relation that made the author eligible.
    pub relation: String,
    pub kind: RelationKind,
}

/// Everything needed to explain, and replay, one decision.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionTrace {
    pub request: Request,
    pub strategy: AggregationStrategy,
    pub default_authorization: AuthValue,
    pub trusted_graph_sizes: BTreeMap<String, usize>,
    pub applicable_rules: Vec<ApplicableRule>,
    pub precedence_edges: Vec<PrecedenceEdge>,
    pub dropped_edges: Vec<DroppedEdge>,
    /// Tier membership as derived; `tiers` below holds only evaluated tiers.
    pub tier_plan: Vec<Vec<String>>,
    pub tiers: Vec<TierTrace>,
    pub authorization: Authorization,
}

impl DecisionTrace {
    /// Re-aggregates the recorded rule outcomes.
    pub fn replay(&self) -> Authorization {
        let recorded: BTreeMap<&str, (Outcome, Option<Binding>)> = self
            .tiers
            .iter()
            .flat_map(|t| &t.rules)
            .map(|r| (r.rule.as_str(), (r.outcome, r.binding.clone())))
            .collect();
        let walk = evaluate_tiers::<()>(
            &self.tier_plan,
            self.strategy,
            self.default_authorization,
            |name| Ok(recorded.get(name).cloned().unwrap_or((Outcome::Abstain, None))),
        )
        .expect("replay evaluator is infallible");
        Authorization {
            value: walk.value,
            rule: walk.rule,
            tier: walk.tier,
            agent: self.request.agent.clone(),
            action: self.request.action.clone(),
            ki: self.request.ki.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElementOutcome {
    pub element: String,
    pub assertion: Triple,
    pub value: AuthValue,
    pub rule: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum ActionResult {
    Read {
        ki: String,
        assertions: Vec<Triple>,
        provenance: Vec<Triple>,
        pubinfo: Vec<Triple>,
        /// Per-element outcomes when the read was decomposed.
        elements: Vec<ElementOutcome>,
    },
    Handled {
        action: String,
        ki: String,
        handler: String,
        message: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub authorization: Authorization,
    pub trace: DecisionTrace,
    pub action_result: Option<ActionResult>,
}
