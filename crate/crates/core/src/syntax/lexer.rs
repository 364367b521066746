//! Tokenizer shared by the TriG subset and the rule language.

use std::fmt;

use crate::error::ParseError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    /// `<...>`
    IriRef(String),
    /// `prefix:local`; either part may be empty.
    PName(String, String),
    /// `?name`
    Var(String),
    /// `"..."`, unescaped.
    Str(String),
    /// `_:label`
    Blank(String),
    /// Bare word: keywords, `a`, builtin names.
    Ident(String),
    /// `@prefix`
    Directive(String),
    DataType,
    LBrace,
    RBrace,
    LParen,
    RParen,
    Dot,
    Semi,
    Comma,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::IriRef(i) => write!(f, "<{i}>"),
            Tok::PName(p, l) => write!(f, "{p}:{l}"),
            Tok::Var(v) => write!(f, "?{v}"),
            Tok::Str(s) => write!(f, "\"{s}\""),
            Tok::Blank(b) => write!(f, "_:{b}"),
            Tok::Ident(i) => write!(f, "{i}"),
            Tok::Directive(d) => write!(f, "@{d}"),
            Tok::DataType => write!(f, "^^"),
            Tok::LBrace => write!(f, "{{"),
            Tok::RBrace => write!(f, "}}"),
            Tok::LParen => write!(f, "("),
            Tok::RParen => write!(f, ")"),
            Tok::Dot => write!(f, "."),
            Tok::Semi => write!(f, ";"),
            Tok::Comma => write!(f, ","),
            Tok::Eof => write!(f, "end of input"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

fn is_name_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_name_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '-'
}

pub fn tokenize(input: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = input.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);

    macro_rules! bump {
        () => {{
            if chars[i] == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            i += 1;
        }};
    }

    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            bump!();
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                bump!();
            }
            continue;
        }
        let (tl, tc) = (line, col);
        let push = |out: &mut Vec<Token>, tok| out.push(Token { tok, line: tl, col: tc });
        match c {
            '{' => {
                bump!();
                push(&mut out, Tok::LBrace);
            }
            '}' => {
                bump!();
                push(&mut out, Tok::RBrace);
            }
            '(' => {
                bump!();
                push(&mut out, Tok::LParen);
            }
            ')' => {
                bump!();
                push(&mut out, Tok::RParen);
            }
            '.' => {
                bump!();
                push(&mut out, Tok::Dot);
            }
            ';' => {
                bump!();
                push(&mut out, Tok::Semi);
            }
            ',' => {
                bump!();
                push(&mut out, Tok::Comma);
            }
            '^' => {
                bump!();
                if i < chars.len() && chars[i] == '^' {
                    bump!();
                    push(&mut out, Tok::DataType);
                } else {
                    return Err(ParseError::new(tl, tc, "expected '^^'"));
                }
            }
            '<' => {
                bump!();
                let mut iri = String::new();
                loop {
                    if i >= chars.len() {
                        return Err(ParseError::new(tl, tc, "unterminated IRI"));
                    }
                    let c = chars[i];
                    if c == '>' {
                        bump!();
                        break;
                    }
                    if c.is_whitespace() {
                        return Err(ParseError::new(line, col, "whitespace inside IRI"));
                    }
                    iri.push(c);
                    bump!();
                }
                push(&mut out, Tok::IriRef(iri));
            }
            '"' => {
                bump!();
                let mut s = String::new();
                loop {
                    if i >= chars.len() {
                        return Err(ParseError::new(tl, tc, "unterminated string"));
                    }
                    let c = chars[i];
                    if c == '"' {
                        bump!();
                        break;
                    }
                    if c == '\n' {
                        return Err(ParseError::new(tl, tc, "newline inside string"));
                    }
                    if c == '\\' {
                        bump!();
                        if i >= chars.len() {
                            return Err(ParseError::new(tl, tc, "unterminated string"));
                        }
                        let e = chars[i];
                        s.push(match e {
                            'n' => '\n',
                            't' => '\t',
                            'r' => '\r',
                            '"' => '"',
                            '\\' => '\\',
                            other => {
                                return Err(ParseError::new(
                                    line,
                                    col,
                                    format!("unknown escape \\{other}"),
                                ))
                            }
                        });
                        bump!();
                        continue;
                    }
                    s.push(c);
                    bump!();
                }
                push(&mut out, Tok::Str(s));
            }
            '?' => {
                bump!();
                let mut name = String::new();
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    name.push(chars[i]);
                    bump!();
                }
                if !crate::term::is_valid_var_name(&name) {
                    return Err(ParseError::new(tl, tc, format!("invalid variable name ?{name}")));
                }
                push(&mut out, Tok::Var(name));
            }
            '@' => {
                bump!();
                let mut name = String::new();
                while i < chars.len() && is_name_char(chars[i]) {
                    name.push(chars[i]);
                    bump!();
                }
                push(&mut out, Tok::Directive(name));
            }
            '_' if i + 1 < chars.len() && chars[i + 1] == ':' => {
                bump!();
                bump!();
                let mut label = String::new();
                while i < chars.len() && is_name_char(chars[i]) {
                    label.push(chars[i]);
                    bump!();
                }
                if label.is_empty() {
                    return Err(ParseError::new(tl, tc, "empty blank node label"));
                }
                push(&mut out, Tok::Blank(label));
            }
            ':' => {
                bump!();
                let mut local = String::new();
                while i < chars.len() && is_name_char(chars[i]) {
                    local.push(chars[i]);
                    bump!();
                }
                push(&mut out, Tok::PName(String::new(), local));
            }
            c if is_name_start(c) => {
                let mut word = String::new();
                while i < chars.len() && is_name_char(chars[i]) {
                    word.push(chars[i]);
                    bump!();
                }
                if i < chars.len() && chars[i] == ':' {
                    bump!();
                    let mut local = String::new();
                    while i < chars.len() && is_name_char(chars[i]) {
                        local.push(chars[i]);
                        bump!();
                    }
                    push(&mut out, Tok::PName(word, local));
                } else {
                    push(&mut out, Tok::Ident(word));
                }
            }
            other => {
                return Err(ParseError::new(tl, tc, format!("unexpected character {other:?}")));
            }
        }
    }
    out.push(Token {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(out)
}
