//! Rule precedence: edges from governance facts, author ranks and
//! relation-type ranks, layered into tiers.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::EvalError;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EdgeSource {
    /// A `precedes` fact derived by a governance rule.
    Governance { rule: String },
    AuthorRank { higher: i64, lower: i64 },
    RelationRank { higher: i64, lower: i64 },
}

/// `higher` is evaluated before `lower`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PrecedenceEdge {
    pub higher: String,
    pub lower: String,
    pub source: EdgeSource,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DroppedEdge {
    pub edge: PrecedenceEdge,
    pub reason: String,
}

/// What the precedence sources know about one applicable rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleStanding {
    pub rule: String,
    pub author_rank: Option<i64>,
    /// Rank of the relation that made the author eligible.
    pub relation_rank: Option<i64>,
}

impl RuleStanding {
    pub fn unranked(rule: impl Into<String>) -> Self {
        RuleStanding {
            rule: rule.into(),
            author_rank: None,
            relation_rank: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrecedenceOrder {
    pub edges: Vec<PrecedenceEdge>,
    pub dropped: Vec<DroppedEdge>,
    /// Tier 0 is evaluated first. Within a tier, rules keep input order.
    pub tiers: Vec<Vec<String>>,
}

impl PrecedenceOrder {
    pub fn tier_of(&self, rule: &str) -> Option<usize> {
        self.tiers.iter().position(|t| t.iter().any(|r| r == rule))
    }
}

struct Dag {
    succ: BTreeMap<String, BTreeSet<String>>,
}

impl Dag {
    fn reaches(&self, from: &str, to: &str) -> bool {
        let mut stack = vec![from];
        let mut seen = BTreeSet::new();
        while let Some(n) = stack.pop() {
            if n == to {
                return true;
            }
            if seen.insert(n) {
                if let Some(next) = self.succ.get(n) {
                    stack.extend(next.iter().map(String::as_str));
                }
            }
        }
        false
    }

    fn add(&mut self, a: &str, b: &str) {
        self.succ.entry(a.to_string()).or_default().insert(b.to_string());
    }

    /// Some cycle as a closed path, if any.
    fn find_cycle(&self, nodes: &[String]) -> Option<Vec<String>> {
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            New,
            Active,
            Done,
        }
        fn visit(
            dag: &Dag,
            n: &str,
            marks: &mut BTreeMap<String, Mark>,
            path: &mut Vec<String>,
        ) -> Option<Vec<String>> {
            marks.insert(n.to_string(), Mark::Active);
            path.push(n.to_string());
            for m in dag.succ.get(n).into_iter().flatten() {
                match marks.get(m).copied().unwrap_or(Mark::New) {
                    Mark::Active => {
                        let start = path.iter().position(|p| p == m).unwrap_or(0);
                        let mut cycle = path[start..].to_vec();
                        cycle.push(m.clone());
                        return Some(cycle);
                    }
                    Mark::New => {
                        if let Some(c) = visit(dag, m, marks, path) {
                            return Some(c);
                        }
                    }
                    Mark::Done => {}
                }
            }
            path.pop();
            marks.insert(n.to_string(), Mark::Done);
            None
        }
        let mut marks = BTreeMap::new();
        for n in nodes {
            if marks.get(n).copied().unwrap_or(Mark::New) == Mark::New {
                if let Some(c) = visit(self, n, &mut marks, &mut Vec::new()) {
                    return Some(c);
                }
            }
        }
        None
    }
}

fn rank_edges(
    rules: &[RuleStanding],
    rank: impl Fn(&RuleStanding) -> Option<i64>,
    source: impl Fn(i64, i64) -> EdgeSource,
) -> Vec<PrecedenceEdge> {
    let mut out = Vec::new();
    for a in rules {
        for b in rules {
            if let (Some(ra), Some(rb)) = (rank(a), rank(b)) {
                if ra < rb {
                    out.push(PrecedenceEdge {
                        higher: a.rule.clone(),
                        lower: b.rule.clone(),
                        source: source(ra, rb),
                    });
                }
            }
        }
    }
    out
}

/// Combines the three edge sources for the applicable `rules`.
///
/// `governance` holds `(higher, lower, deriving rule)` facts; facts about
/// rules outside `rules` are ignored. Governance edges are kept as given and
/// a cycle among them is an error. Author-rank and then relation-rank edges
/// are added only when they do not contradict what is already ordered.
pub fn derive_precedence(
    rules: &[RuleStanding],
    governance: &[(String, String, String)],
) -> Result<PrecedenceOrder, EvalError> {
    let names: Vec<String> = rules.iter().map(|r| r.rule.clone()).collect();
    let applicable: BTreeSet<&str> = names.iter().map(String::as_str).collect();
    let mut dag = Dag {
        succ: BTreeMap::new(),
    };
    let mut order = PrecedenceOrder::default();

    let mut gov: Vec<&(String, String, String)> = governance
        .iter()
        .filter(|(h, l, _)| applicable.contains(h.as_str()) && applicable.contains(l.as_str()))
        .collect();
    gov.sort();
    gov.dedup_by(|a, b| a.0 == b.0 && a.1 == b.1);
    for (h, l, via) in gov {
        dag.add(h, l);
        order.edges.push(PrecedenceEdge {
            higher: h.clone(),
            lower: l.clone(),
            source: EdgeSource::Governance { rule: via.clone() },
        });
    }
    if let Some(cycle) = dag.find_cycle(&names) {
        return Err(EvalError::PrecedenceCycle { cycle });
    }

    let weaker = [
        rank_edges(rules, |r| r.author_rank, |higher, lower| EdgeSource::AuthorRank { higher, lower }),
        rank_edges(rules, |r| r.relation_rank, |higher, lower| EdgeSource::RelationRank { higher, lower }),
    ];
    for edges in weaker {
        for e in edges {
            if dag.reaches(&e.lower, &e.higher) {
                log::warn!(
                    "dropping precedence edge {} -> {}: contradicts a stronger source",
                    e.higher,
                    e.lower
                );
                order.dropped.push(DroppedEdge {
                    reason: format!("{} already precedes {}", e.lower, e.higher),
                    edge: e,
                });
                continue;
            }
            dag.add(&e.higher, &e.lower);
            order.edges.push(e);
        }
    }

    // Longest-path layering.
    let mut level: BTreeMap<&str, usize> = BTreeMap::new();
    let mut indegree: BTreeMap<&str, usize> = names.iter().map(|n| (n.as_str(), 0)).collect();
    for n in &names {
        for m in dag.succ.get(n).into_iter().flatten() {
            *indegree.entry(m.as_str()).or_default() += 1;
        }
    }
    let mut ready: Vec<&str> = names
        .iter()
        .map(String::as_str)
        .filter(|n| indegree[n] == 0)
        .collect();
    while let Some(n) = ready.pop() {
        let l = *level.entry(n).or_insert(0);
        for m in dag.succ.get(n).into_iter().flatten() {
            let lm = level.entry(m.as_str()).or_insert(0);
            *lm = (*lm).max(l + 1);
            let d = indegree.get_mut(m.as_str()).expect("edge endpoints are applicable rules");
            *d -= 1;
            if *d == 0 {
                ready.push(m.as_str());
            }
        }
    }
    let depth = level.values().copied().max().map_or(0, |m| m + 1);
    order.tiers = vec![Vec::new(); depth];
    for n in &names {
        order.tiers[level[n.as_str()]].push(n.clone());
    }
    Ok(order)
}
