//! A TriG subset: `@prefix` directives, `GRAPH <iri> { ... }` blocks and
//! top-level triples for the default graph, with `;`/`,` abbreviations.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::lexer::{tokenize, Tok};
use super::{Cursor, Prefixes};
use crate::error::ParseError;
use crate::term::{GraphId, Quad, Term};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocatedQuad {
    pub quad: Quad,
    pub line: usize,
}

#[derive(Debug, Clone, Default)]
pub struct TrigDocument {
    pub prefixes: Prefixes,
    pub quads: Vec<LocatedQuad>,
    /// Graphs named by a `GRAPH` block, including empty ones.
    pub graphs: Vec<GraphId>,
}

pub fn parse_trig(input: &str) -> Result<TrigDocument, ParseError> {
    parse_trig_with(input, Prefixes::default())
}

pub fn parse_trig_with(input: &str, prefixes: Prefixes) -> Result<TrigDocument, ParseError> {
    let toks = tokenize(input)?;
    let mut cur = Cursor::new(&toks);
    let mut doc = TrigDocument {
        prefixes,
        ..Default::default()
    };
    let default = GraphId::default_graph();

    loop {
        match cur.peek() {
            Tok::Eof => break,
            Tok::Directive(_) => cur.parse_prefix_directive(&mut doc.prefixes)?,
            Tok::Ident(w) if w == "GRAPH" => {
                cur.next();
                let g = GraphId(cur.parse_iri(&doc.prefixes)?);
                parse_block(&mut cur, &mut doc, g)?;
            }
            Tok::IriRef(_) | Tok::PName(..) if cur.peek_at(1) == &Tok::LBrace => {
                let g = GraphId(cur.parse_iri(&doc.prefixes)?);
                parse_block(&mut cur, &mut doc, g)?;
            }
            _ => {
                parse_triples(&mut cur, &mut doc, &default)?;
                cur.expect(&Tok::Dot, ".")?;
            }
        }
    }
    Ok(doc)
}

fn parse_block(cur: &mut Cursor<'_>, doc: &mut TrigDocument, g: GraphId) -> Result<(), ParseError> {
    cur.expect(&Tok::LBrace, "{")?;
    if !doc.graphs.contains(&g) {
        doc.graphs.push(g.clone());
    }
    while cur.peek() != &Tok::RBrace {
        parse_triples(cur, doc, &g)?;
        if !cur.eat(&Tok::Dot) && cur.peek() != &Tok::RBrace {
            return Err(cur.unexpected(&[".", "}"]));
        }
    }
    cur.expect(&Tok::RBrace, "}")?;
    Ok(())
}

fn parse_triples(cur: &mut Cursor<'_>, doc: &mut TrigDocument, g: &GraphId) -> Result<(), ParseError> {
    let line = cur.token().line;
    let subject = cur.parse_term(&doc.prefixes, false)?;
    if matches!(subject, Term::Literal { .. }) {
        return Err(cur.error("literal in subject position"));
    }
    loop {
        let ptok = cur.token().clone();
        let predicate = cur.parse_term(&doc.prefixes, false)?;
        if predicate.as_iri().is_none() {
            return Err(ParseError::new(ptok.line, ptok.col, "predicate must be an IRI"));
        }
        loop {
            let object = cur.parse_term(&doc.prefixes, false)?;
            doc.quads.push(LocatedQuad {
                quad: Quad::new(subject.clone(), predicate.clone(), object, g.clone()),
                line,
            });
            if !cur.eat(&Tok::Comma) {
                break;
            }
        }
        if !cur.eat(&Tok::Semi) {
            break;
        }
        if matches!(cur.peek(), Tok::Dot | Tok::RBrace) {
            break;
        }
    }
    Ok(())
}

/// Serializes quads as TriG: prefixes, default-graph triples, then one
/// `GRAPH` block per named graph. Empty graphs are written as empty blocks.
pub fn write_trig<'a>(
    quads: impl IntoIterator<Item = &'a Quad>,
    graphs: impl IntoIterator<Item = &'a GraphId>,
    prefixes: &Prefixes,
) -> String {
    let default = GraphId::default_graph();
    let mut by_graph: BTreeMap<&GraphId, Vec<&Quad>> = BTreeMap::new();
    for g in graphs {
        by_graph.entry(g).or_default();
    }
    for q in quads {
        by_graph.entry(&q.graph).or_default().push(q);
    }

    let mut out = String::new();
    for (p, ns) in prefixes.iter() {
        let _ = writeln!(out, "@prefix {p}: <{ns}> .");
    }
    let triple = |q: &Quad| {
        format!(
            "{} {} {} .",
            prefixes.render_term(&q.subject),
            prefixes.render_term(&q.predicate),
            prefixes.render_term(&q.object)
        )
    };
    if let Some(qs) = by_graph.get(&default) {
        out.push('\n');
        for q in qs {
            let _ = writeln!(out, "{}", triple(q));
        }
    }
    for (g, qs) in &by_graph {
        if **g == default {
            continue;
        }
        let name = prefixes
            .compact(g.as_str())
            .unwrap_or_else(|| g.to_string());
        let _ = writeln!(out, "\nGRAPH {name} {{");
        for q in qs {
            let _ = writeln!(out, "  {}", triple(q));
        }
        out.push_str("}\n");
    }
    out
}
