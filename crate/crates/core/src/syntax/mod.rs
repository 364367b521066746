//! Concrete syntaxes: the TriG subset for quads and the `.kgr` rule language.

pub mod lexer;
pub mod rules;
pub mod trig;

use std::collections::BTreeMap;

use crate::error::ParseError;
use crate::term::{vocab, Term};
use lexer::{Tok, Token};

/// Prefix table shared by both formats.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prefixes {
    map: BTreeMap<String, String>,
}

impl Default for Prefixes {
    fn default() -> Self {
        let mut map = BTreeMap::new();
        for (p, ns) in [
            ("rdf", "http://www.w3.org/1999/02/22-rdf-syntax-ns#"),
            ("rdfs", "http://www.w3.org/2000/01/rdf-schema#"),
            ("xsd", "http://www.w3.org/2001/XMLSchema#"),
            ("prov", "http://www.w3.org/ns/prov#"),
            ("foaf", "http://xmlns.com/foaf/0.1/"),
            ("kgu", vocab::NS),
        ] {
            map.insert(p.to_string(), ns.to_string());
        }
        Prefixes { map }
    }
}

impl Prefixes {
    /// A table without the built-in prefixes.
    pub fn empty() -> Self {
        Prefixes {
            map: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, prefix: impl Into<String>, ns: impl Into<String>) {
        self.map.insert(prefix.into(), ns.into());
    }

    pub fn get(&self, prefix: &str) -> Option<&str> {
        self.map.get(prefix).map(String::as_str)
    }

    pub fn merge(&mut self, other: &Prefixes) {
        for (p, ns) in &other.map {
            self.map.insert(p.clone(), ns.clone());
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.map.iter().map(|(p, n)| (p.as_str(), n.as_str()))
    }

    pub fn expand(&self, prefix: &str, local: &str) -> Option<String> {
        self.map.get(prefix).map(|ns| format!("{ns}{local}"))
    }

    /// Expands `p:local`, `<iri>`, or a bare name (resolved against the empty
    /// prefix). Used for CLI arguments and config values.
    pub fn resolve(&self, name: &str) -> Option<String> {
        if let Some(iri) = name.strip_prefix('<').and_then(|n| n.strip_suffix('>')) {
            return Some(iri.to_string());
        }
        match name.split_once(':') {
            Some((p, local)) if self.map.contains_key(p) => self.expand(p, local),
            Some(_) if name.contains("://") || name.starts_with("urn:") => Some(name.to_string()),
            Some(_) => None,
            None => self.expand("", name),
        }
    }

    /// Shortest `prefix:local` form of an IRI, if one exists.
    pub fn compact(&self, iri: &str) -> Option<String> {
        self.map
            .iter()
            .filter(|(_, ns)| !ns.is_empty() && iri.starts_with(ns.as_str()))
            .max_by_key(|(_, ns)| ns.len())
            .and_then(|(p, ns)| {
                let local = &iri[ns.len()..];
                let valid = local
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
                    && local.chars().next().is_none_or(|c| c.is_ascii_alphabetic() || c == '_');
                valid.then(|| format!("{p}:{local}"))
            })
    }

    /// The local part of an IRI under any known namespace, or the IRI itself.
    pub fn short_name(&self, iri: &str) -> String {
        match self.compact(iri) {
            Some(c) => match c.split_once(':') {
                Some(("", local)) => local.to_string(),
                _ => c,
            },
            None => iri.to_string(),
        }
    }

    pub fn render_term(&self, term: &Term) -> String {
        match term {
            Term::Iri(i) if &**i == vocab::RDF_TYPE => "a".to_string(),
            Term::Iri(i) => self.compact(i).unwrap_or_else(|| term.to_string()),
            Term::Literal { lexical, datatype } if &**datatype != vocab::XSD_STRING => {
                let lit = Term::string(lexical.clone()).to_string();
                let dt = self
                    .compact(datatype)
                    .unwrap_or_else(|| format!("<{datatype}>"));
                format!("{lit}^^{dt}")
            }
            other => other.to_string(),
        }
    }
}

pub(crate) struct Cursor<'a> {
    toks: &'a [Token],
    pos: usize,
}

impl<'a> Cursor<'a> {
    pub fn new(toks: &'a [Token]) -> Self {
        Cursor { toks, pos: 0 }
    }

    pub fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    pub fn peek_at(&self, n: usize) -> &Tok {
        let i = (self.pos + n).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    pub fn token(&self) -> &Token {
        &self.toks[self.pos]
    }

    pub fn next(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    pub fn error(&self, message: impl Into<String>) -> ParseError {
        let t = self.token();
        ParseError::new(t.line, t.col, message)
    }

    pub fn unexpected(&self, expected: &[&str]) -> ParseError {
        self.error(format!("unexpected {}", self.peek())).expecting(expected)
    }

    pub fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.next();
            true
        } else {
            false
        }
    }

    pub fn is_ident(&self, word: &str) -> bool {
        matches!(self.peek(), Tok::Ident(w) if w == word)
    }

    pub fn expect(&mut self, tok: &Tok, label: &str) -> Result<Token, ParseError> {
        if self.peek() == tok {
            Ok(self.next())
        } else {
            Err(self.unexpected(&[label]))
        }
    }

    pub fn expect_ident(&mut self, word: &str) -> Result<Token, ParseError> {
        if self.is_ident(word) {
            Ok(self.next())
        } else {
            Err(self.unexpected(&[word]))
        }
    }

    /// `@prefix p: <ns> .`
    pub fn parse_prefix_directive(&mut self, prefixes: &mut Prefixes) -> Result<(), ParseError> {
        let t = self.next();
        match &t.tok {
            Tok::Directive(d) if d == "prefix" => {}
            Tok::Directive(d) => {
                return Err(ParseError::new(t.line, t.col, format!("unknown directive @{d}")))
            }
            _ => return Err(ParseError::new(t.line, t.col, "expected @prefix")),
        }
        let prefix = match self.next().tok {
            Tok::PName(p, l) if l.is_empty() => p,
            _ => return Err(self.error("expected a prefix name like `ex:`")),
        };
        let ns = match self.next().tok {
            Tok::IriRef(ns) => ns,
            _ => return Err(self.error("expected a namespace IRI")),
        };
        self.expect(&Tok::Dot, ".")?;
        prefixes.insert(prefix, ns);
        Ok(())
    }

    pub fn parse_iri(&mut self, prefixes: &Prefixes) -> Result<String, ParseError> {
        let t = self.token().clone();
        match &t.tok {
            Tok::IriRef(i) => {
                self.next();
                Ok(i.clone())
            }
            Tok::PName(p, l) => {
                self.next();
                prefixes.expand(p, l).ok_or_else(|| {
                    ParseError::new(t.line, t.col, format!("undeclared prefix `{p}:`"))
                })
            }
            _ => Err(self.unexpected(&["IRI", "prefixed name"])),
        }
    }

    /// A term in any position. `a` expands to `rdf:type`.
    pub fn parse_term(&mut self, prefixes: &Prefixes, allow_vars: bool) -> Result<Term, ParseError> {
        let t = self.token().clone();
        match &t.tok {
            Tok::IriRef(_) | Tok::PName(..) => Ok(Term::iri(self.parse_iri(prefixes)?)),
            Tok::Ident(w) if w == "a" => {
                self.next();
                Ok(Term::iri(vocab::RDF_TYPE))
            }
            Tok::Var(v) if allow_vars => {
                self.next();
                Ok(Term::var(v))
            }
            Tok::Var(v) => Err(ParseError::new(
                t.line,
                t.col,
                format!("variable ?{v} not allowed here"),
            )),
            Tok::Blank(b) => {
                self.next();
                Ok(Term::blank(b))
            }
            Tok::Str(s) => {
                self.next();
                if self.eat(&Tok::DataType) {
                    let dt = self.parse_iri(prefixes)?;
                    Ok(Term::typed(s.clone(), dt))
                } else {
                    Ok(Term::string(s.clone()))
                }
            }
            _ => Err(self.unexpected(&["IRI", "prefixed name", "variable", "literal"])),
        }
    }
}
