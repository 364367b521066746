//! Engine configuration, read from TOML.
//!
//! ```toml
//! [prefixes]
//! "" = "http://example.org/kg#"
//!
//! [engine]
//! default_authorization = "Denied"
//! strategy = "deny-overrides"
//! persons = ["George"]
//!
//! [[relation]]
//! iri = "officer"
//! kind = "identifies"
//! rank = 1
//!
//! [agents.Congress]
//! rank = 0
//!
//! [actions.Read]
//! handler = "read"
//! decompose = false
//! ```
//!
//! Names are resolved against `[prefixes]` plus the built-in ones; a bare
//! name uses the empty prefix.

use std::collections::{BTreeMap, BTreeSet};

use serde::Deserialize;

use crate::error::ConfigError;
use crate::ki::{RelationKind, RelationTypeRegistry};
use crate::rule::AuthValue;
use crate::syntax::Prefixes;
use crate::trust::DEFAULT_DERIVATION_CAP;
use crate::usage::AggregationStrategy;

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    prefixes: BTreeMap<String, String>,
    #[serde(default)]
    engine: RawEngine,
    #[serde(default)]
    relation: Vec<RawRelation>,
    #[serde(default)]
    agents: BTreeMap<String, RawAgent>,
    #[serde(default)]
    actions: BTreeMap<String, RawAction>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawEngine {
    default_authorization: Option<AuthValue>,
    strategy: Option<AggregationStrategy>,
    derivation_cap: Option<usize>,
    #[serde(default)]
    persons: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRelation {
    iri: String,
    kind: RelationKind,
    rank: i64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAgent {
    rank: Option<i64>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawAction {
    #[serde(default)]
    composite: Option<bool>,
    #[serde(default)]
    decompose: bool,
    default_authorization: Option<AuthValue>,
    strategy: Option<AggregationStrategy>,
    handler: Option<HandlerKind>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HandlerKind {
    /// Return the KI's quads, redacted element-wise when decomposing.
    Read,
    /// Log the action and do nothing else.
    Log,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ActionConfig {
    pub composite: bool,
    pub decompose: bool,
    pub default_authorization: Option<AuthValue>,
    pub strategy: Option<AggregationStrategy>,
    pub handler: Option<HandlerKind>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EngineConfig {
    pub prefixes: Prefixes,
    pub default_authorization: AuthValue,
    pub strategy: AggregationStrategy,
    pub derivation_cap: usize,
    /// Agents treated as persons besides those typed `foaf:Person`.
    pub persons: BTreeSet<String>,
    pub registry: RelationTypeRegistry,
    pub agent_ranks: BTreeMap<String, i64>,
    pub actions: BTreeMap<String, ActionConfig>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            prefixes: Prefixes::default(),
            default_authorization: AuthValue::Denied,
            strategy: AggregationStrategy::DenyOverrides,
            derivation_cap: DEFAULT_DERIVATION_CAP,
            persons: BTreeSet::new(),
            registry: RelationTypeRegistry::new(),
            agent_ranks: BTreeMap::new(),
            actions: BTreeMap::new(),
        }
    }
}

impl EngineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
        let mut prefixes = Prefixes::default();
        for (p, ns) in &raw.prefixes {
            prefixes.insert(p.clone(), ns.clone());
        }
        let resolve = |name: &str| {
            prefixes
                .resolve(name)
                .ok_or_else(|| ConfigError::UnknownPrefix(name.to_string()))
        };

        let mut registry = RelationTypeRegistry::new();
        for r in &raw.relation {
            let iri = resolve(&r.iri)?;
            if !registry.register(iri.clone(), r.kind, r.rank) {
                return Err(ConfigError::Invalid(format!("relation {iri} registered twice")));
            }
        }
        let mut agent_ranks = BTreeMap::new();
        for (name, a) in &raw.agents {
            if let Some(rank) = a.rank {
                if rank < 0 {
                    return Err(ConfigError::Invalid(format!("agent {name}: rank must be >= 0")));
                }
                agent_ranks.insert(resolve(name)?, rank);
            }
        }
        let mut actions = BTreeMap::new();
        for (name, a) in &raw.actions {
            let handler = a.handler;
            let composite = a.composite.unwrap_or(handler == Some(HandlerKind::Read));
            if a.decompose && !composite {
                return Err(ConfigError::Invalid(format!(
                    "action {name}: decompose requires a composite action"
                )));
            }
            actions.insert(
                resolve(name)?,
                ActionConfig {
                    composite,
                    decompose: a.decompose,
                    default_authorization: a.default_authorization,
                    strategy: a.strategy,
                    handler,
                },
            );
        }
        let persons = raw
            .engine
            .persons
            .iter()
            .map(|p| resolve(p))
            .collect::<Result<_, _>>()?;
        Ok(EngineConfig {
            default_authorization: raw.engine.default_authorization.unwrap_or(AuthValue::Denied),
            strategy: raw.engine.strategy.unwrap_or_default(),
            derivation_cap: raw.engine.derivation_cap.unwrap_or(DEFAULT_DERIVATION_CAP),
            persons,
            registry,
            agent_ranks,
            actions,
            prefixes,
        })
    }

    pub fn default_for(&self, action: &str) -> AuthValue {
        self.actions
            .get(action)
            .and_then(|a| a.default_authorization)
            .unwrap_or(self.default_authorization)
    }

    pub fn strategy_for(&self, action: &str) -> AggregationStrategy {
        self.actions
            .get(action)
            .and_then(|a| a.strategy)
            .unwrap_or(self.strategy)
    }
}
