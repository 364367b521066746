//! `kgusage`: load a knowledge graph, rules and configuration, then evaluate
//! usage requests against them.
//!
//! Exit status: 0 when the request is Allowed, 1 when Denied, 2 on any
//! error. Commands without a decision exit 0 on success.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use kgusage_core::engine::Engine;
use kgusage_core::error::EvalError;
use kgusage_core::par::ExecMode;
use kgusage_core::precedence::EdgeSource;
use kgusage_core::rule::AuthValue;
use kgusage_core::syntax::Prefixes;
use kgusage_core::term::Term;
use kgusage_core::usage::{ActionResult, Authorization, Decision, DecisionTrace};
use kgusage_core::{EngineConfig, Request};

const EXIT_ALLOWED: u8 = 0;
const EXIT_DENIED: u8 = 1;
const EXIT_ERROR: u8 = 2;

#[derive(Parser, Debug)]
#[command(name = "kgusage", version, about = "Usage control for knowledge graphs")]
struct Cli {
    #[command(flatten)]
    inputs: Inputs,

    #[arg(long, value_enum, default_value_t = Format::Text, global = true)]
    format: Format,

    /// Print the tier-by-tier trace with the decision.
    #[arg(long, global = true)]
    trace: bool,

    /// Where `eval` records its decision for `explain`.
    #[arg(long, global = true, default_value = ".kgusage-last.json")]
    state_file: PathBuf,

    /// Evaluate without the thread pool.
    #[arg(long, global = true)]
    sequential: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Inputs {
    /// TriG file with the knowledge graph; repeatable.
    #[arg(long, global = true)]
    kg: Vec<PathBuf>,

    /// Rule file; repeatable.
    #[arg(long, global = true)]
    rules: Vec<PathBuf>,

    /// TOML engine configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Load the inputs and summarize them.
    Load,
    /// Parse and validate the inputs without evaluating anything.
    Check,
    /// Evaluate one request.
    Eval(EvalArgs),
    /// Evaluate one request per line of a file.
    Batch {
        /// Lines of `agent action ki [key=value ...]`; `#` starts a comment.
        file: PathBuf,
    },
    /// Show the trace of the last `eval`.
    Explain,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    agent: String,
    #[arg(long)]
    action: String,
    #[arg(long)]
    ki: String,
    /// Request context entry `key=value`; repeatable.
    #[arg(long = "context", value_name = "KEY=VALUE")]
    context: Vec<String>,
}

/// What `eval` leaves behind for `explain`.
#[derive(serde::Serialize, serde::Deserialize)]
struct SavedDecision {
    prefixes: Vec<(String, String)>,
    decision: Decision,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}

fn run(cli: &Cli) -> Result<u8> {
    match &cli.command {
        Command::Explain => explain(cli),
        Command::Load => {
            let engine = load(cli)?;
            summarize(cli, &engine, false)?;
            Ok(0)
        }
        Command::Check => {
            let engine = load(cli)?;
            engine.governance().context("governance rules")?;
            summarize(cli, &engine, true)?;
            Ok(0)
        }
        Command::Eval(args) => {
            let engine = load(cli)?;
            let request = build_request(&engine, &args.agent, &args.action, &args.ki, &args.context)?;
            let decision = engine.eval_request(&request).map_err(|e| name_error(&engine, e))?;
            save_decision(cli, &engine, &decision)?;
            print_decision(cli, &engine, &decision)?;
            Ok(exit_for(decision.authorization.value))
        }
        Command::Batch { file } => batch(cli, file),
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn load(cli: &Cli) -> Result<Engine> {
    let config = match &cli.inputs.config {
        Some(p) => EngineConfig::from_toml_str(&read(p)?).with_context(|| p.display().to_string())?,
        None => EngineConfig::default(),
    };
    let mut engine = Engine::new(config);
    if cli.sequential {
        engine.set_exec_mode(ExecMode::Sequential);
    }
    for p in &cli.inputs.kg {
        let name = p.display().to_string();
        engine
            .load_trig(&read(p)?, Some(&name))
            .with_context(|| format!("loading {name}"))?;
    }
    for p in &cli.inputs.rules {
        let name = p.display().to_string();
        engine
            .load_rules(&read(p)?, Some(&name))
            .with_context(|| format!("loading {name}"))?;
    }
    Ok(engine)
}

fn summarize(cli: &Cli, engine: &Engine, checked: bool) -> Result<()> {
    let kg = engine.kg();
    let rules = engine.rules();
    let actions = engine.actions();
    if cli.format == Format::Json {
        let names = |v: Vec<String>| v.into_iter().map(|s| engine.short_name(&s)).collect::<Vec<_>>();
        let out = serde_json::json!({
            "status": if checked { "valid" } else { "loaded" },
            "quads": kg.store().len(),
            "knowledge_items": kg.ki_count(),
            "rules": names(rules.iter().map(|r| r.name.clone()).collect()),
            "actions": names(actions.keys().cloned().collect()),
        });
        println!("{}", serde_json::to_string_pretty(&out)?);
        return Ok(());
    }
    println!(
        "{}: {} quads, {} knowledge items, {} rules, {} actions",
        if checked { "valid" } else { "loaded" },
        kg.store().len(),
        kg.ki_count(),
        rules.len(),
        actions.len()
    );
    for r in rules {
        println!(
            "  rule {} ({:?}) by {}",
            engine.short_name(&r.name),
            r.kind,
            engine.short_name(&r.author)
        );
    }
    Ok(())
}

fn resolve(engine: &Engine, name: &str) -> Result<String> {
    engine
        .resolve(name)
        .ok_or_else(|| anyhow!("cannot resolve name {name:?}: unknown prefix"))
}

fn context_value(engine: &Engine, raw: &str) -> Term {
    if let Some(s) = raw.strip_prefix('"').and_then(|r| r.strip_suffix('"')) {
        return Term::string(s);
    }
    if raw.starts_with('<') || raw.contains(':') {
        if let Some(iri) = engine.resolve(raw) {
            return Term::iri(iri);
        }
    }
    Term::string(raw)
}

fn build_request(engine: &Engine, agent: &str, action: &str, ki: &str, context: &[String]) -> Result<Request> {
    let mut request = Request::new(resolve(engine, agent)?, resolve(engine, action)?, resolve(engine, ki)?);
    for entry in context {
        let (k, v) = entry
            .split_once('=')
            .ok_or_else(|| anyhow!("context entry {entry:?} is not key=value"))?;
        request = request.with_context(resolve(engine, k)?, context_value(engine, v));
    }
    Ok(request)
}

/// Error messages with short names.
fn name_error(engine: &Engine, e: EvalError) -> anyhow::Error {
    let short = |s: &String| engine.short_name(s);
    match &e {
        EvalError::UnknownAction(a) => anyhow!("unknown action {}", short(a)),
        EvalError::UnknownKi(k) => anyhow!("unknown knowledge item {}", short(k)),
        EvalError::UnknownAgent(a) => anyhow!("unknown agent {}", short(a)),
        _ => e.into(),
    }
}

fn exit_for(value: AuthValue) -> u8 {
    match value {
        AuthValue::Allowed => EXIT_ALLOWED,
        AuthValue::Denied => EXIT_DENIED,
    }
}

fn headline(prefixes: &Prefixes, a: &Authorization) -> String {
    match (&a.rule, a.tier) {
        (Some(rule), Some(tier)) => format!("{} ({}, tier {tier})", a.value, prefixes.short_name(rule)),
        (Some(rule), None) => format!("{} ({})", a.value, prefixes.short_name(rule)),
        (None, _) => format!("{} (default)", a.value),
    }
}

fn save_decision(cli: &Cli, engine: &Engine, decision: &Decision) -> Result<()> {
    let saved = SavedDecision {
        prefixes: engine
            .prefixes()
            .iter()
            .map(|(p, ns)| (p.to_string(), ns.to_string()))
            .collect(),
        decision: decision.clone(),
    };
    fs::write(&cli.state_file, serde_json::to_string(&saved)?)
        .with_context(|| format!("cannot write {}", cli.state_file.display()))
}

fn print_decision(cli: &Cli, engine: &Engine, decision: &Decision) -> Result<()> {
    let prefixes = engine.prefixes();
    match cli.format {
        Format::Json => {
            let mut out = serde_json::json!({
                "authorization": decision.authorization,
                "action_result": decision.action_result,
            });
            if cli.trace {
                out["trace"] = serde_json::to_value(&decision.trace)?;
            }
            println!("{}", serde_json::to_string_pretty(&out)?);
        }
        Format::Text => {
            println!("{}", headline(prefixes, &decision.authorization));
            if let Some(result) = &decision.action_result {
                print_action_result(prefixes, result);
            }
            if cli.trace {
                print!("{}", render_trace(prefixes, &decision.trace));
            }
        }
    }
    Ok(())
}

fn print_action_result(prefixes: &Prefixes, result: &ActionResult) {
    match result {
        ActionResult::Read {
            assertions,
            elements,
            ..
        } => {
            for t in assertions {
                println!(
                    "  {} {} {} .",
                    prefixes.render_term(&t.subject),
                    prefixes.render_term(&t.predicate),
                    prefixes.render_term(&t.object)
                );
            }
            let withheld = elements.iter().filter(|e| e.value == AuthValue::Denied).count();
            if withheld > 0 {
                println!("  ({withheld} element(s) withheld)");
            }
        }
        ActionResult::Handled { handler, message, .. } => println!("  [{handler}] {message}"),
    }
}

fn render_trace(prefixes: &Prefixes, trace: &DecisionTrace) -> String {
    use std::fmt::Write as _;
    let n = |s: &str| prefixes.short_name(s);
    let mut out = String::new();
    let r = &trace.request;
    let _ = writeln!(out, "request: {} {} {}", n(&r.agent), n(&r.action), n(&r.ki));
    for (k, v) in &r.context {
        let _ = writeln!(out, "  context {} = {}", n(k), prefixes.render_term(v));
    }
    let _ = writeln!(
        out,
        "strategy: {}, default {}",
        trace.strategy, trace.default_authorization
    );
    let sizes: Vec<String> = trace
        .trusted_graph_sizes
        .iter()
        .map(|(a, s)| format!("{} {s}", n(a)))
        .collect();
    let _ = writeln!(out, "trusted graph sizes: {}", sizes.join(", "));
    let _ = writeln!(out, "applicable rules:");
    for a in &trace.applicable_rules {
        let _ = writeln!(
            out,
            "  {} by {} via {} ({})",
            n(&a.rule),
            n(&a.author),
            n(&a.relation),
            a.kind
        );
    }
    let _ = writeln!(out, "precedence:");
    for e in &trace.precedence_edges {
        let why = match &e.source {
            EdgeSource::Governance { rule } => format!("governance {}", n(rule)),
            EdgeSource::AuthorRank { higher, lower } => format!("author rank {higher} < {lower}"),
            EdgeSource::RelationRank { higher, lower } => format!("relation rank {higher} < {lower}"),
        };
        let _ = writeln!(out, "  {} before {}  [{why}]", n(&e.higher), n(&e.lower));
    }
    for d in &trace.dropped_edges {
        let _ = writeln!(
            out,
            "  dropped {} before {}: {}",
            n(&d.edge.higher),
            n(&d.edge.lower),
            d.reason
        );
    }
    let _ = writeln!(out, "tiers:");
    for (i, tier) in trace.tier_plan.iter().enumerate() {
        match trace.tiers.get(i) {
            Some(t) => {
                let outcomes: Vec<String> = t
                    .rules
                    .iter()
                    .map(|ro| format!("{} {}", n(&ro.rule), ro.outcome))
                    .collect();
                let _ = writeln!(
                    out,
                    "  {i}: {} => {}",
                    outcomes.join(", "),
                    t.aggregate
                );
            }
            None => {
                let names: Vec<String> = tier.iter().map(|r| n(r)).collect();
                let _ = writeln!(out, "  {i}: {} (not evaluated)", names.join(", "));
            }
        }
    }
    let _ = writeln!(out, "result: {}", headline(prefixes, &trace.authorization));
    out
}

fn explain(cli: &Cli) -> Result<u8> {
    let text = fs::read_to_string(&cli.state_file).with_context(|| {
        format!(
            "no recorded decision at {} (run eval first)",
            cli.state_file.display()
        )
    })?;
    let saved: SavedDecision = serde_json::from_str(&text)
        .with_context(|| format!("{} is not a recorded decision", cli.state_file.display()))?;
    let mut prefixes = Prefixes::default();
    for (p, ns) in &saved.prefixes {
        prefixes.insert(p.clone(), ns.clone());
    }
    let trace = &saved.decision.trace;
    match cli.format {
        Format::Json => println!("{}", serde_json::to_string_pretty(trace)?),
        Format::Text => print!("{}", render_trace(&prefixes, trace)),
    }
    Ok(0)
}

struct BatchLine {
    line: usize,
    text: String,
    request: Result<Request, String>,
}

fn parse_batch(engine: &Engine, text: &str) -> Vec<BatchLine> {
    text.lines()
        .enumerate()
        .filter_map(|(i, raw)| {
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                return None;
            }
            let fields: Vec<&str> = content.split_whitespace().collect();
            let request = match fields.as_slice() {
                [agent, action, ki, context @ ..] => {
                    let context: Vec<String> = context.iter().map(|s| s.to_string()).collect();
                    build_request(engine, agent, action, ki, &context).map_err(|e| format!("{e:#}"))
                }
                _ => Err(format!("expected `agent action ki [key=value ...]`, got {content:?}")),
            };
            Some(BatchLine {
                line: i + 1,
                text: content.to_string(),
                request,
            })
        })
        .collect()
}

fn batch(cli: &Cli, file: &Path) -> Result<u8> {
    let engine = load(cli)?;
    let lines = parse_batch(&engine, &read(file)?);
    let valid: Vec<Request> = lines
        .iter()
        .filter_map(|l| l.request.as_ref().ok().cloned())
        .collect();
    let mut decisions = engine.eval_batch(&valid).into_iter();

    let mut counts: BTreeMap<&str, usize> = BTreeMap::from([("allowed", 0), ("denied", 0), ("errors", 0)]);
    let mut json_rows = Vec::new();
    for l in &lines {
        let result = match &l.request {
            Ok(_) => decisions
                .next()
                .expect("one decision per valid request")
                .map_err(|e| format!("{:#}", name_error(&engine, e))),
            Err(e) => Err(e.clone()),
        };
        match &result {
            Ok(d) if d.authorization.value == AuthValue::Allowed => *counts.get_mut("allowed").unwrap() += 1,
            Ok(_) => *counts.get_mut("denied").unwrap() += 1,
            Err(_) => *counts.get_mut("errors").unwrap() += 1,
        }
        match cli.format {
            Format::Text => match &result {
                Ok(d) => println!("{}: {} -> {}", l.line, l.text, headline(engine.prefixes(), &d.authorization)),
                Err(e) => println!("{}: {} -> error: {e}", l.line, l.text),
            },
            Format::Json => {
                let mut row = serde_json::json!({ "line": l.line, "request": l.text });
                match &result {
                    Ok(d) => {
                        row["authorization"] = serde_json::to_value(&d.authorization)?;
                        if cli.trace {
                            row["trace"] = serde_json::to_value(&d.trace)?;
                        }
                    }
                    Err(e) => row["error"] = serde_json::Value::String(e.clone()),
                }
                json_rows.push(row);
            }
        }
    }
    let (allowed, denied, errors) = (counts["allowed"], counts["denied"], counts["errors"]);
    match cli.format {
        Format::Text => println!("summary: {allowed} allowed / {denied} denied / {errors} errors"),
        Format::Json => {
            let out = serde_json::json!({
                "results": json_rows,
                "summary": { "allowed": allowed, "denied": denied, "errors": errors },
            });
            println!("{}", serde_json::to_string_pretty(&out)?);
        }
    }
    // Batch problems are already reported line by line.
    Ok(if errors > 0 { EXIT_ERROR } else { EXIT_ALLOWED })
}
