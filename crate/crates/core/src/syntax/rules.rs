//! The `.kgr` rule language.
//!
//! ```text
//! rule :ruleTransp author :Congress source :NonProfitAct {
//!   when {
//!     eq(?requestAction, :Read) .
//!     assertions(?requestKI) includes { ?O :officer ?Ofr } .
//!     ?O a :NonProfit .
//!   }
//!   then authorize Allowed for ?requestAction
//! }
//! ```
//!
//! `assertions(X)`, `provenance(X)` and `pubinfo(X)` are sugar for a linkage
//! triple plus a `graph ?g includes` atom; `context K op V` is sugar for an
//! includes atom over the request-context graph plus a builtin. Both are
//! expanded at parse time, so printing yields the expanded form.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use super::lexer::{tokenize, Tok};
use super::{Cursor, Prefixes};
use crate::error::ParseError;
use crate::pattern::{BuiltinOp, Pattern, PatternAtom};
use crate::rule::{AuthValue, Consequent, Rule, SourceSpan};
use crate::term::{vocab, Term};

#[derive(Debug, Clone)]
pub struct RuleFile {
    pub prefixes: Prefixes,
    pub rules: Vec<Rule>,
}

pub fn parse_rules(input: &str) -> Result<RuleFile, ParseError> {
    parse_rules_with(input, Prefixes::default())
}

pub fn parse_rules_with(input: &str, prefixes: Prefixes) -> Result<RuleFile, ParseError> {
    let toks = tokenize(input)?;
    let mut p = Parser::new(&toks, prefixes);
    let mut rules: Vec<Rule> = Vec::new();
    loop {
        match p.cur.peek() {
            Tok::Eof => break,
            Tok::Directive(_) => p.cur.parse_prefix_directive(&mut p.prefixes)?,
            Tok::Ident(w) if w == "rule" => {
                let start = p.cur.token().clone();
                let rule = p.parse_rule()?;
                if rules.iter().any(|r| r.name == rule.name) {
                    return Err(ParseError::new(
                        start.line,
                        start.col,
                        format!("duplicate rule name {}", p.prefixes.short_name(&rule.name)),
                    ));
                }
                rules.push(rule);
            }
            _ => return Err(p.cur.unexpected(&["rule", "@prefix"])),
        }
    }
    Ok(RuleFile {
        prefixes: p.prefixes,
        rules,
    })
}

/// Parses the body of a `when` block (without braces).
pub fn parse_pattern_text(input: &str, prefixes: &Prefixes) -> Result<Pattern, ParseError> {
    let toks = tokenize(input)?;
    let mut p = Parser::new(&toks, prefixes.clone());
    let pattern = p.parse_atoms(&Tok::Eof, 0)?;
    p.cur.expect(&Tok::Eof, "end of input")?;
    Ok(pattern)
}

/// Parses a `then` clause (without the keyword).
pub fn parse_consequent_text(input: &str, prefixes: &Prefixes) -> Result<Consequent, ParseError> {
    let toks = tokenize(input)?;
    let mut p = Parser::new(&toks, prefixes.clone());
    let c = p.parse_consequent()?;
    p.cur.expect(&Tok::Eof, "end of input")?;
    Ok(c)
}

struct Parser<'a> {
    cur: Cursor<'a>,
    prefixes: Prefixes,
    /// Every variable name in the input, so generated names never collide.
    taken: BTreeSet<String>,
    fresh: usize,
}

const SUGAR: [(&str, &str); 3] = [
    ("assertions", vocab::HAS_ASSERTION_GRAPH),
    ("provenance", vocab::HAS_PROVENANCE_GRAPH),
    ("pubinfo", vocab::HAS_PUBINFO_GRAPH),
];

impl<'a> Parser<'a> {
    fn new(toks: &'a [super::lexer::Token], prefixes: Prefixes) -> Self {
        let taken = toks
            .iter()
            .filter_map(|t| match &t.tok {
                Tok::Var(v) => Some(v.clone()),
                _ => None,
            })
            .collect();
        Parser {
            cur: Cursor::new(toks),
            prefixes,
            taken,
            fresh: 0,
        }
    }

    fn fresh_var(&mut self, stem: &str) -> Term {
        loop {
            self.fresh += 1;
            let name = format!("{stem}{}", self.fresh);
            if self.taken.insert(name.clone()) {
                return Term::var(name);
            }
        }
    }

    fn parse_rule(&mut self) -> Result<Rule, ParseError> {
        let start = self.cur.expect_ident("rule")?;
        let name = self.cur.parse_iri(&self.prefixes)?;
        self.cur.expect_ident("author")?;
        let author = self.cur.parse_iri(&self.prefixes)?;
        let mut sources = Vec::new();
        if self.cur.is_ident("source") {
            self.cur.next();
            loop {
                sources.push(self.cur.parse_iri(&self.prefixes)?);
                if !self.cur.eat(&Tok::Comma) {
                    break;
                }
            }
        }
        self.cur.expect(&Tok::LBrace, "{")?;
        self.cur.expect_ident("when")?;
        self.cur.expect(&Tok::LBrace, "{")?;
        let antecedent = self.parse_atoms(&Tok::RBrace, 0)?;
        self.cur.expect(&Tok::RBrace, "}")?;
        if !self.cur.is_ident("then") {
            return Err(self
                .cur
                .error("missing `then` after `when` block")
                .expecting(&["then"]));
        }
        self.cur.next();
        let consequent = self.parse_consequent()?;
        self.cur.expect(&Tok::RBrace, "}")?;
        let span = SourceSpan {
            line: start.line,
            col: start.col,
        };
        Rule::new(name, author, antecedent, consequent, sources, span)
            .map_err(|msg| ParseError::new(start.line, start.col, msg))
    }

    fn parse_consequent(&mut self) -> Result<Consequent, ParseError> {
        if self.cur.is_ident("trust") {
            self.cur.next();
            self.cur.expect_ident("add")?;
            let target = if self.cur.is_ident("into") {
                self.cur.next();
                Some(self.cur.parse_term(&self.prefixes, true)?)
            } else {
                None
            };
            let additions = self.parse_template()?;
            Ok(Consequent::TrustAdd { target, additions })
        } else if self.cur.is_ident("authorize") {
            self.cur.next();
            let value = if self.cur.is_ident("Allowed") {
                AuthValue::Allowed
            } else if self.cur.is_ident("Denied") {
                AuthValue::Denied
            } else {
                return Err(self.cur.unexpected(&["Allowed", "Denied"]));
            };
            self.cur.next();
            self.cur.expect_ident("for")?;
            let action = self.cur.parse_term(&self.prefixes, true)?;
            Ok(Consequent::Authorize { value, action })
        } else if self.cur.is_ident("assert") {
            self.cur.next();
            let additions = self.parse_template()?;
            Ok(Consequent::AssertFacts { additions })
        } else {
            Err(self.cur.unexpected(&["trust", "authorize", "assert"]))
        }
    }

    fn parse_template(&mut self) -> Result<Pattern, ParseError> {
        self.cur.expect(&Tok::LBrace, "{")?;
        let mut atoms = Vec::new();
        while self.cur.peek() != &Tok::RBrace {
            self.parse_triples(&mut atoms)?;
            if !self.cur.eat(&Tok::Dot) && self.cur.peek() != &Tok::RBrace {
                return Err(self.cur.unexpected(&[".", "}"]));
            }
        }
        self.cur.expect(&Tok::RBrace, "}")?;
        Ok(Pattern::new(atoms))
    }

    /// Atoms up to (not including) `end`.
    fn parse_atoms(&mut self, end: &Tok, depth: usize) -> Result<Pattern, ParseError> {
        let mut atoms = Vec::new();
        while self.cur.peek() != end {
            self.parse_atom(&mut atoms, depth)?;
            if !self.cur.eat(&Tok::Dot) && self.cur.peek() != end {
                return Err(self.cur.unexpected(&[".", &end.to_string()]));
            }
        }
        Ok(Pattern::new(atoms))
    }

    fn parse_atom(&mut self, atoms: &mut Vec<PatternAtom>, depth: usize) -> Result<(), ParseError> {
        let word = match self.cur.peek() {
            Tok::Ident(w) if w != "a" => w.clone(),
            _ => return self.parse_triples(atoms),
        };
        let top_level_only = |p: &Self, what: &str| {
            if depth > 0 {
                Err(p.cur.error(format!("`{what}` is only allowed at the top level of `when`")))
            } else {
                Ok(())
            }
        };
        if word == "graph" {
            self.cur.next();
            let graph = self.cur.parse_term(&self.prefixes, true)?;
            let inner = self.parse_includes_body(depth)?;
            atoms.push(PatternAtom::GraphIncludes { graph, inner });
        } else if let Some((kw, link)) = SUGAR.iter().find(|(kw, _)| *kw == word) {
            top_level_only(self, kw)?;
            self.cur.next();
            self.cur.expect(&Tok::LParen, "(")?;
            let ki = self.cur.parse_term(&self.prefixes, true)?;
            self.cur.expect(&Tok::RParen, ")")?;
            let g = self.fresh_var("kg_");
            let inner = self.parse_includes_body(depth)?;
            atoms.push(PatternAtom::triple(ki, Term::iri(*link), g.clone()));
            atoms.push(PatternAtom::GraphIncludes { graph: g, inner });
        } else if word == "context" {
            top_level_only(self, "context")?;
            self.cur.next();
            let key = Term::iri(self.cur.parse_iri(&self.prefixes)?);
            let op = match self.cur.peek() {
                Tok::Ident(o) => BuiltinOp::from_name(o).filter(|op| op.is_comparison()),
                _ => None,
            }
            .ok_or_else(|| self.cur.unexpected(&["eq", "neq", "lt", "le", "gt", "ge"]))?;
            self.cur.next();
            let value = self.cur.parse_term(&self.prefixes, true)?;
            let v = self.fresh_var("ctx_");
            atoms.push(PatternAtom::GraphIncludes {
                graph: Term::iri(vocab::CONTEXT_GRAPH),
                inner: Pattern::new(vec![PatternAtom::triple(
                    Term::iri(vocab::REQUEST),
                    key,
                    v.clone(),
                )]),
            });
            atoms.push(PatternAtom::Builtin {
                op,
                args: vec![v, value],
            });
        } else if let Some(op) = BuiltinOp::from_name(&word) {
            self.cur.next();
            self.cur.expect(&Tok::LParen, "(")?;
            let mut args = Vec::new();
            if self.cur.peek() != &Tok::RParen {
                loop {
                    args.push(self.cur.parse_term(&self.prefixes, true)?);
                    if !self.cur.eat(&Tok::Comma) {
                        break;
                    }
                }
            }
            let close = self.cur.expect(&Tok::RParen, ")")?;
            if args.len() != op.arity() {
                return Err(ParseError::new(
                    close.line,
                    close.col,
                    format!("{} takes {} arguments, got {}", op.name(), op.arity(), args.len()),
                ));
            }
            atoms.push(PatternAtom::Builtin { op, args });
        } else {
            return Err(self.cur.unexpected(&[
                "triple",
                "graph",
                "assertions",
                "provenance",
                "pubinfo",
                "context",
                "builtin",
            ]));
        }
        Ok(())
    }

    fn parse_includes_body(&mut self, depth: usize) -> Result<Pattern, ParseError> {
        self.cur.expect_ident("includes")?;
        let open = self.cur.expect(&Tok::LBrace, "{")?;
        if depth + 1 > crate::pattern::MAX_INCLUDES_DEPTH {
            return Err(ParseError::new(
                open.line,
                open.col,
                format!(
                    "includes nested deeper than {}",
                    crate::pattern::MAX_INCLUDES_DEPTH
                ),
            ));
        }
        let inner = self.parse_atoms(&Tok::RBrace, depth + 1)?;
        self.cur.expect(&Tok::RBrace, "}")?;
        Ok(inner)
    }

    /// `S P O` with `;` and `,` abbreviations, one atom per triple.
    fn parse_triples(&mut self, atoms: &mut Vec<PatternAtom>) -> Result<(), ParseError> {
        let subject = self.cur.parse_term(&self.prefixes, true)?;
        loop {
            let ptok = self.cur.token().clone();
            let predicate = self.cur.parse_term(&self.prefixes, true)?;
            if matches!(predicate, Term::Literal { .. } | Term::Blank(_)) {
                return Err(ParseError::new(
                    ptok.line,
                    ptok.col,
                    "predicate must be an IRI or variable",
                ));
            }
            loop {
                let object = self.cur.parse_term(&self.prefixes, true)?;
                atoms.push(PatternAtom::triple(subject.clone(), predicate.clone(), object));
                if !self.cur.eat(&Tok::Comma) {
                    break;
                }
            }
            if !self.cur.eat(&Tok::Semi) {
                break;
            }
            if matches!(self.cur.peek(), Tok::Dot | Tok::RBrace | Tok::Eof) {
                break;
            }
        }
        Ok(())
    }
}

fn print_atom(atom: &PatternAtom, prefixes: &Prefixes) -> String {
    match atom {
        PatternAtom::Triple {
            subject,
            predicate,
            object,
        } => format!(
            "{} {} {}",
            prefixes.render_term(subject),
            prefixes.render_term(predicate),
            prefixes.render_term(object)
        ),
        PatternAtom::GraphIncludes { graph, inner } => {
            let body = print_pattern_flat(inner, prefixes);
            if body.is_empty() {
                format!("graph {} includes {{ }}", prefixes.render_term(graph))
            } else {
                format!("graph {} includes {{ {body} }}", prefixes.render_term(graph))
            }
        }
        PatternAtom::Builtin { op, args } => {
            let args: Vec<String> = args.iter().map(|a| prefixes.render_term(a)).collect();
            format!("{}({})", op.name(), args.join(", "))
        }
    }
}

/// Atoms on one line, separated by ` . `.
pub fn print_pattern_flat(pattern: &Pattern, prefixes: &Prefixes) -> String {
    pattern
        .atoms
        .iter()
        .map(|a| print_atom(a, prefixes))
        .collect::<Vec<_>>()
        .join(" . ")
}

fn print_template(pattern: &Pattern, prefixes: &Prefixes) -> String {
    let body = print_pattern_flat(pattern, prefixes);
    if body.is_empty() {
        "{ }".to_string()
    } else {
        format!("{{ {body} }}")
    }
}

pub fn print_consequent(consequent: &Consequent, prefixes: &Prefixes) -> String {
    match consequent {
        Consequent::TrustAdd {
            target: None,
            additions,
        } => format!("trust add {}", print_template(additions, prefixes)),
        Consequent::TrustAdd {
            target: Some(t),
            additions,
        } => format!(
            "trust add into {} {}",
            prefixes.render_term(t),
            print_template(additions, prefixes)
        ),
        Consequent::Authorize { value, action } => {
            format!("authorize {value} for {}", prefixes.render_term(action))
        }
        Consequent::AssertFacts { additions } => {
            format!("assert {}", print_template(additions, prefixes))
        }
    }
}

pub fn print_rule(rule: &Rule, prefixes: &Prefixes) -> String {
    let iri = |s: &str| prefixes.render_term(&Term::iri(s));
    let mut out = format!("rule {} author {}", iri(&rule.name), iri(&rule.author));
    if !rule.sources.is_empty() {
        let sources: Vec<String> = rule.sources.iter().map(|s| iri(s)).collect();
        let _ = write!(out, " source {}", sources.join(", "));
    }
    out.push_str(" {\n  when {\n");
    for atom in &rule.antecedent.atoms {
        let _ = writeln!(out, "    {} .", print_atom(atom, prefixes));
    }
    let _ = write!(
        out,
        "  }}\n  then {}\n}}\n",
        print_consequent(&rule.consequent, prefixes)
    );
    out
}

/// A whole rule file: prefix directives, then each rule.
pub fn print_rules(rules: &[Rule], prefixes: &Prefixes) -> String {
    let mut out = String::new();
    for (p, ns) in prefixes.iter() {
        let _ = writeln!(out, "@prefix {p}: <{ns}> .");
    }
    for rule in rules {
        out.push('\n');
        out.push_str(&print_rule(rule, prefixes));
    }
    out
}
