//! Usage control for knowledge graphs built from knowledge items.

pub mod config;
pub mod engine;
pub mod error;
pub mod ki;
pub mod par;
pub mod pattern;
pub mod precedence;
pub mod rule;
pub mod store;
pub mod syntax;
pub mod term;
pub mod trust;
pub mod usage;

pub use config::EngineConfig;
pub use engine::Engine;
pub use usage::{AggregationStrategy, Decision, Outcome, Request};
