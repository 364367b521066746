use std::fmt;

use thiserror::Error;

use crate::term::GraphId;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("invalid quad: {0}")]
    InvalidQuad(String),
    #[error("invalid term: {0}")]
    InvalidTerm(String),
    #[error("unknown graph {0}")]
    UnknownGraph(GraphId),
    #[error("invalid pattern: {0}")]
    InvalidPattern(String),
    #[error("evaluation error: {0}")]
    Evaluation(String),
    #[error("empty match scope")]
    EmptyScope,
}

/// A located syntax or validation diagnostic, rendered `file:line:col: message`.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ParseError {
    pub file: Option<String>,
    pub line: usize,
    pub col: usize,
    pub message: String,
    pub expected: Vec<String>,
}

impl ParseError {
    pub fn new(line: usize, col: usize, message: impl Into<String>) -> Self {
        ParseError {
            file: None,
            line,
            col,
            message: message.into(),
            expected: Vec::new(),
        }
    }

    pub fn expecting(mut self, expected: &[&str]) -> Self {
        self.expected = expected.iter().map(|s| s.to_string()).collect();
        self
    }

    pub fn in_file(mut self, file: impl Into<String>) -> Self {
        self.file = Some(file.into());
        self
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let file = self.file.as_deref().unwrap_or("<input>");
        write!(f, "{file}:{}:{}: {}", self.line, self.col, self.message)?;
        if !self.expected.is_empty() {
            write!(f, " (expected one of: {})", self.expected.join(", "))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KiError {
    #[error("duplicate knowledge item {0}")]
    DuplicateKi(String),
    #[error("{}invalid pubinfo for {ki}: {reason}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
    InvalidPubinfo {
        ki: String,
        reason: String,
        line: Option<usize>,
    },
    #[error("{}invalid knowledge item {ki}: {reason}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
    InvalidKi {
        ki: String,
        reason: String,
        line: Option<usize>,
    },
    #[error("unknown knowledge item {0}")]
    UnknownKi(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RuleError {
    #[error("malformed governance rule {rule}: {reason}")]
    MalformedGovernanceRule { rule: String, reason: String },
    #[error("rule {rule}: trust target {target} is not the trusted graph of {author}")]
    InvalidTrustTarget {
        rule: String,
        target: String,
        author: String,
    },
    #[error("cannot extract rule from knowledge item {ki}: {reason}")]
    Extraction { ki: String, reason: String },
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Ki(#[from] KiError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TrustError {
    #[error("fixpoint for {owner} exceeded {cap} derived quads")]
    NonTermination { owner: String, cap: usize },
    #[error("rule {rule}: {source}")]
    Rule { rule: String, source: GraphError },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("unknown action {0}")]
    UnknownAction(String),
    #[error("unknown knowledge item {0}")]
    UnknownKi(String),
    #[error("unknown agent {0}")]
    UnknownAgent(String),
    #[error("precedence cycle: {}", cycle.join(" -> "))]
    PrecedenceCycle { cycle: Vec<String> },
    #[error("no handler registered for action {0}")]
    UnregisteredHandler(String),
    #[error("rule {rule}: {source}")]
    Rule { rule: String, source: GraphError },
    #[error(transparent)]
    Trust(#[from] TrustError),
    #[error(transparent)]
    Classification(#[from] RuleError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("config: {0}")]
    Syntax(String),
    #[error("config: unknown prefix in {0}")]
    UnknownPrefix(String),
    #[error("config: {0}")]
    Invalid(String),
}

/// Any failure while loading files or building an engine.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LoadError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Ki(#[from] KiError),
    #[error(transparent)]
    Rule(#[from] RuleError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}
