//! Line-oriented network format.
//!
//! ```text
//! # comment
//! species: A, B, C          # optional, fixes species order
//! external: A, P=2.5        # held constant; optional level (default 1)
//! MnO4m = MnO4^-            # optional composition annotation
//! A -> B, 0.04
//! 2 X <-> X, 0.33, 0.72     # forward step first
//! 0 -> X, 1.0               # "0" or "∅" is the empty complex
//! ```
//!
//! Species identifiers are `[A-Za-z_][A-Za-z0-9_]*`. Species are registered
//! in order of first appearance anywhere in the text.

use std::collections::HashSet;
use std::fmt::Write as _;

use thiserror::Error;

use super::formula::{parse_formula, Composition, FormulaError};
use crate::model::{ModelError, ReactionNetwork, ReactionStep, Side, Species};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseErrorKind {
    #[error("no reactions")]
    NoReactions,
    #[error("unexpected character '{0}'")]
    UnexpectedChar(char),
    #[error("expected {0}")]
    Expected(&'static str),
    #[error("stoichiometric coefficient must be a positive integer, got '{0}'")]
    BadCoefficient(String),
    #[error("zero stoichiometric coefficient")]
    ZeroCoefficient,
    #[error("rate coefficient is not a nonnegative number: '{0}'")]
    BadRate(String),
    #[error("expected {expected} rate coefficient(s), found {found}")]
    RateCount { expected: usize, found: usize },
    #[error("duplicate external declaration of '{0}'")]
    DuplicateExternal(String),
    #[error("duplicate species declaration of '{0}'")]
    DuplicateSpecies(String),
    #[error("duplicate formula annotation for '{0}'")]
    DuplicateAnnotation(String),
    #[error("bad formula: {0}")]
    Formula(FormulaError),
    #[error("invalid network: {0}")]
    Model(ModelError),
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}, column {column}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
}

impl ParseError {
    fn new(line: usize, column: usize, kind: ParseErrorKind) -> Self {
        ParseError { line, column, kind }
    }
}

/// One reaction line as written.
#[derive(Debug, Clone, PartialEq)]
pub struct ReactionLine {
    pub line: usize,
    pub lhs: Vec<(String, u32)>,
    pub rhs: Vec<(String, u32)>,
    pub reversible: bool,
    pub rates: Vec<f64>,
}

/// Everything a network file declares, before it is turned into a
/// [`ReactionNetwork`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NetworkDocument {
    /// All species names in order of first appearance.
    pub species: Vec<String>,
    pub externals: Vec<(String, Option<f64>)>,
    pub annotations: Vec<(String, Composition)>,
    pub reactions: Vec<ReactionLine>,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(String),
    Arrow,
    RevArrow,
    Plus,
    Comma,
    Empty,
    Eq,
}

fn tokenize(line: &str, lineno: usize) -> Result<Vec<(Tok, usize)>, ParseError> {
    let chars: Vec<char> = line.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        if c.is_whitespace() {
            i += 1;
        } else if c == '-' && chars.get(i + 1) == Some(&'>') {
            out.push((Tok::Arrow, col));
            i += 2;
        } else if c == '<' && chars.get(i + 1) == Some(&'-') && chars.get(i + 2) == Some(&'>') {
            out.push((Tok::RevArrow, col));
            i += 3;
        } else if c == '+' {
            out.push((Tok::Plus, col));
            i += 1;
        } else if c == ',' {
            out.push((Tok::Comma, col));
            i += 1;
        } else if c == '=' {
            out.push((Tok::Eq, col));
            i += 1;
        } else if c == '∅' {
            out.push((Tok::Empty, col));
            i += 1;
        } else if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            if i < chars.len() && chars[i] == '.' {
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < chars.len() && matches!(chars[i], 'e' | 'E') {
                let mut j = i + 1;
                if j < chars.len() && matches!(chars[j], '+' | '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            out.push((Tok::Number(chars[start..i].iter().collect()), col));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((Tok::Ident(chars[start..i].iter().collect()), col));
        } else {
            return Err(ParseError::new(lineno, col, ParseErrorKind::UnexpectedChar(c)));
        }
    }
    Ok(out)
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(p) => &line[..p],
        None => line,
    }
}

/// Returns the rest of the line after `keyword:` and the column where it
/// starts, if the line is such a header.
fn header<'a>(line: &'a str, keyword: &str) -> Option<(&'a str, usize)> {
    let trimmed = line.trim_start();
    let lead = line.len() - trimmed.len();
    let rest = trimmed.strip_prefix(keyword)?;
    let after = rest.trim_start();
    let body = after.strip_prefix(':')?;
    let offset = lead + keyword.len() + (rest.len() - after.len()) + 1;
    Some((body, line[..offset].chars().count() + 1))
}

struct Registry {
    names: Vec<String>,
    seen: HashSet<String>,
}

impl Registry {
    fn touch(&mut self, name: &str) {
        if self.seen.insert(name.to_string()) {
            self.names.push(name.to_string());
        }
    }
}

fn shift(mut err: ParseError, offset: usize) -> ParseError {
    err.column += offset - 1;
    err
}

fn parse_name_list(
    body: &str,
    lineno: usize,
    offset: usize,
    allow_levels: bool,
) -> Result<Vec<(String, Option<f64>, usize)>, ParseError> {
    let toks = tokenize(body, lineno).map_err(|e| shift(e, offset))?;
    let mut out = Vec::new();
    let mut it = toks.into_iter().peekable();
    let end_col = body.chars().count() + offset;
    loop {
        let (name, col) = match it.next() {
            Some((Tok::Ident(n), c)) => (n, c + offset - 1),
            Some((_, c)) => {
                return Err(ParseError::new(lineno, c + offset - 1, ParseErrorKind::Expected("species name")))
            }
            None => return Err(ParseError::new(lineno, end_col, ParseErrorKind::Expected("species name"))),
        };
        let mut level = None;
        if allow_levels && matches!(it.peek(), Some((Tok::Eq, _))) {
            it.next();
            match it.next() {
                Some((Tok::Number(v), c)) => {
                    let x: f64 = v
                        .parse()
                        .map_err(|_| ParseError::new(lineno, c + offset - 1, ParseErrorKind::BadRate(v.clone())))?;
                    level = Some(x);
                }
                Some((_, c)) => {
                    return Err(ParseError::new(lineno, c + offset - 1, ParseErrorKind::Expected("number")))
                }
                None => return Err(ParseError::new(lineno, end_col, ParseErrorKind::Expected("number"))),
            }
        }
        out.push((name, level, col));
        match it.next() {
            None => return Ok(out),
            Some((Tok::Comma, _)) => continue,
            Some((_, c)) => return Err(ParseError::new(lineno, c + offset - 1, ParseErrorKind::Expected("','"))),
        }
    }
}

fn parse_side(
    toks: &[(Tok, usize)],
    pos: &mut usize,
    lineno: usize,
    end_col: usize,
) -> Result<Vec<(String, u32)>, ParseError> {
    let at = |p: usize| toks.get(p).map_or(end_col, |t| t.1);
    match toks.get(*pos) {
        Some((Tok::Empty, _)) => {
            *pos += 1;
            return Ok(Vec::new());
        }
        Some((Tok::Number(n), _)) if n == "0" && !matches!(toks.get(*pos + 1), Some((Tok::Ident(_), _))) => {
            *pos += 1;
            return Ok(Vec::new());
        }
        _ => {}
    }
    let mut side = Vec::new();
    loop {
        let mut coef = 1;
        if let Some((Tok::Number(n), c)) = toks.get(*pos) {
            coef = match n.parse::<u32>() {
                Ok(0) => return Err(ParseError::new(lineno, *c, ParseErrorKind::ZeroCoefficient)),
                Ok(v) => v,
                Err(_) => return Err(ParseError::new(lineno, *c, ParseErrorKind::BadCoefficient(n.clone()))),
            };
            *pos += 1;
        }
        match toks.get(*pos) {
            Some((Tok::Ident(name), _)) => {
                side.push((name.clone(), coef));
                *pos += 1;
            }
            _ => return Err(ParseError::new(lineno, at(*pos), ParseErrorKind::Expected("species name"))),
        }
        if matches!(toks.get(*pos), Some((Tok::Plus, _))) {
            *pos += 1;
        } else {
            return Ok(side);
        }
    }
}

fn parse_reaction(line: &str, lineno: usize) -> Result<ReactionLine, ParseError> {
    let toks = tokenize(line, lineno)?;
    let end_col = line.chars().count() + 1;
    let mut pos = 0;
    let lhs = parse_side(&toks, &mut pos, lineno, end_col)?;
    let reversible = match toks.get(pos) {
        Some((Tok::Arrow, _)) => false,
        Some((Tok::RevArrow, _)) => true,
        Some((_, c)) => return Err(ParseError::new(lineno, *c, ParseErrorKind::Expected("'->' or '<->'"))),
        None => return Err(ParseError::new(lineno, end_col, ParseErrorKind::Expected("'->' or '<->'"))),
    };
    pos += 1;
    let rhs = parse_side(&toks, &mut pos, lineno, end_col)?;
    let mut rates = Vec::new();
    while pos < toks.len() {
        match &toks[pos] {
            (Tok::Comma, c) => {
                pos += 1;
                match toks.get(pos) {
                    Some((Tok::Number(v), c)) => {
                        let x: f64 =
                            v.parse().map_err(|_| ParseError::new(lineno, *c, ParseErrorKind::BadRate(v.clone())))?;
                        rates.push(x);
                        pos += 1;
                    }
                    Some((Tok::Ident(v), c)) => {
                        return Err(ParseError::new(lineno, *c, ParseErrorKind::BadRate(v.clone())))
                    }
                    Some((_, c)) => {
                        return Err(ParseError::new(lineno, *c, ParseErrorKind::Expected("rate coefficient")))
                    }
                    None => return Err(ParseError::new(lineno, c + 1, ParseErrorKind::Expected("rate coefficient"))),
                }
            }
            (_, c) => return Err(ParseError::new(lineno, *c, ParseErrorKind::Expected("',' or end of line"))),
        }
    }
    Ok(ReactionLine { line: lineno, lhs, rhs, reversible, rates })
}

/// Parses the network format into its declarations without building a
/// network.
pub fn parse_document(text: &str) -> Result<NetworkDocument, ParseError> {
    let mut doc = NetworkDocument::default();
    let mut reg = Registry { names: Vec::new(), seen: HashSet::new() };
    let mut declared = HashSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = strip_comment(raw);
        if line.trim().is_empty() {
            continue;
        }
        if let Some((body, offset)) = header(line, "species") {
            for (name, _, col) in parse_name_list(body, lineno, offset, false)? {
                if !declared.insert(name.clone()) {
                    return Err(ParseError::new(lineno, col, ParseErrorKind::DuplicateSpecies(name)));
                }
                reg.touch(&name);
            }
            continue;
        }
        if let Some((body, offset)) = header(line, "external") {
            for (name, level, col) in parse_name_list(body, lineno, offset, true)? {
                if doc.externals.iter().any(|(n, _)| *n == name) {
                    return Err(ParseError::new(lineno, col, ParseErrorKind::DuplicateExternal(name)));
                }
                reg.touch(&name);
                doc.externals.push((name, level));
            }
            continue;
        }
        if !line.contains("->") {
            if let Some(eq) = line.find('=') {
                let name_part = &line[..eq];
                let toks = tokenize(name_part, lineno)?;
                let name = match toks.as_slice() {
                    [(Tok::Ident(n), _)] => n.clone(),
                    [(_, c), ..] => return Err(ParseError::new(lineno, *c, ParseErrorKind::Expected("species name"))),
                    [] => return Err(ParseError::new(lineno, 1, ParseErrorKind::Expected("species name"))),
                };
                let formula_col = line[..eq + 1].chars().count() + 1;
                let comp = parse_formula(&line[eq + 1..]).map_err(|e| {
                    let inner = line[eq + 1..].chars().take_while(|c| c.is_whitespace()).count();
                    let col = e.column().map_or(formula_col, |c| formula_col + inner + c - 1);
                    ParseError::new(lineno, col, ParseErrorKind::Formula(e))
                })?;
                if doc.annotations.iter().any(|(n, _)| *n == name) {
                    return Err(ParseError::new(lineno, 1, ParseErrorKind::DuplicateAnnotation(name)));
                }
                reg.touch(&name);
                doc.annotations.push((name, comp));
                continue;
            }
        }
        let reaction = parse_reaction(line, lineno)?;
        for (name, _) in reaction.lhs.iter().chain(&reaction.rhs) {
            reg.touch(name);
        }
        doc.reactions.push(reaction);
    }
    doc.species = reg.names;
    Ok(doc)
}

impl NetworkDocument {
    /// Builds the network. With `require_rates`, every irreversible line must
    /// carry exactly one rate and every reversible line exactly two;
    /// otherwise lines may also omit rates entirely (rate 1 is used).
    pub fn to_network(&self, require_rates: bool) -> Result<ReactionNetwork, ParseError> {
        if self.reactions.is_empty() {
            return Err(ParseError::new(1, 1, ParseErrorKind::NoReactions));
        }
        let index = |name: &str| self.species.iter().position(|s| s == name).expect("registered");
        let side = |terms: &[(String, u32)]| -> Side {
            crate::model::normalize_side(terms.iter().map(|(n, c)| (index(n), *c)))
        };
        let mut species: Vec<Species> = self.species.iter().map(Species::new).collect();
        for (name, _) in &self.externals {
            species[index(name)].external = true;
        }
        for (name, comp) in &self.annotations {
            species[index(name)].composition = Some(comp.clone());
        }
        let mut steps = Vec::new();
        for r in &self.reactions {
            let expected = if r.reversible { 2 } else { 1 };
            let rates = if r.rates.is_empty() && !require_rates {
                vec![1.0; expected]
            } else if r.rates.len() == expected {
                r.rates.clone()
            } else {
                return Err(ParseError::new(r.line, 1, ParseErrorKind::RateCount { expected, found: r.rates.len() }));
            };
            if let Some(bad) = rates.iter().find(|k| !(**k >= 0.0 && k.is_finite())) {
                return Err(ParseError::new(r.line, 1, ParseErrorKind::BadRate(bad.to_string())));
            }
            let (a, b) = (side(&r.lhs), side(&r.rhs));
            if r.reversible {
                steps.push(ReactionStep { reactants: a.clone(), products: b.clone(), rate: rates[0] });
                steps.push(ReactionStep { reactants: b, products: a, rate: rates[1] });
            } else {
                steps.push(ReactionStep { reactants: a, products: b, rate: rates[0] });
            }
        }
        let line_of_step = |s: usize| {
            let mut count = 0;
            for r in &self.reactions {
                count += if r.reversible { 2 } else { 1 };
                if s < count {
                    return r.line;
                }
            }
            1
        };
        let mut net = ReactionNetwork::new(species, steps).map_err(|e| {
            let line = match &e {
                ModelError::NullStep(s) | ModelError::UnknownSpecies { step: s, .. } => line_of_step(*s),
                _ => 1,
            };
            ParseError::new(line, 1, ParseErrorKind::Model(e))
        })?;
        for (name, level) in &self.externals {
            if let Some(level) = level {
                net.set_external_level(name, *level).expect("declared species");
            }
        }
        Ok(net)
    }
}

/// Parses a network with rate coefficients on every reaction line.
pub fn parse_network(text: &str) -> Result<ReactionNetwork, ParseError> {
    parse_document(text)?.to_network(true)
}

/// Parses a step list: rate coefficients may be omitted.
pub fn parse_step_list(text: &str) -> Result<ReactionNetwork, ParseError> {
    parse_document(text)?.to_network(false)
}

pub(crate) fn format_side(network: &ReactionNetwork, side: &[(usize, u32)]) -> String {
    if side.is_empty() {
        return "0".to_string();
    }
    side.iter()
        .map(|&(i, n)| {
            let name = &network.species()[i].name;
            if n == 1 {
                name.clone()
            } else {
                format!("{n} {name}")
            }
        })
        .collect::<Vec<_>>()
        .join(" + ")
}

/// Canonical text form; `parse_network` of the result rebuilds the same
/// network.
pub fn serialize_network(network: &ReactionNetwork) -> String {
    let mut out = String::new();
    let names = network.species_names();
    writeln!(out, "species: {}", names.join(", ")).unwrap();
    let externals: Vec<String> = network
        .species()
        .iter()
        .enumerate()
        .filter(|(_, s)| s.external)
        .map(|(i, s)| {
            let level = network.external_level(i);
            if level == 1.0 {
                s.name.clone()
            } else {
                format!("{}={:?}", s.name, level)
            }
        })
        .collect();
    if !externals.is_empty() {
        writeln!(out, "external: {}", externals.join(", ")).unwrap();
    }
    for s in network.species() {
        if let Some(c) = &s.composition {
            writeln!(out, "{} = {}", s.name, c).unwrap();
        }
    }
    for step in network.steps() {
        writeln!(
            out,
            "{} -> {}, {:?}",
            format_side(network, &step.reactants),
            format_side(network, &step.products),
            step.rate
        )
        .unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_step() {
        let n = parse_network("A -> B, 0.04").unwrap();
        assert_eq!(n.species_names(), vec!["A", "B"]);
        assert_eq!(n.steps().len(), 1);
        assert_eq!(n.steps()[0].reactants, vec![(0, 1)]);
        assert_eq!(n.steps()[0].products, vec![(1, 1)]);
        assert_eq!(n.steps()[0].rate, 0.04);
    }

    #[test]
    fn reversible_expands_forward_first() {
        let n = parse_network("2 X <-> X, 0.33, 0.72").unwrap();
        assert_eq!(n.steps().len(), 2);
        assert_eq!(n.steps()[0], ReactionStep::new([(0, 2)], [(0, 1)], 0.33));
        assert_eq!(n.steps()[1], ReactionStep::new([(0, 1)], [(0, 2)], 0.72));
    }

    #[test]
    fn empty_input_is_an_error() {
        assert_eq!(parse_network("").unwrap_err().kind, ParseErrorKind::NoReactions);
        assert_eq!(parse_network("# only a comment\n\n").unwrap_err().kind, ParseErrorKind::NoReactions);
    }

    #[test]
    fn externals_comments_and_empty_complex() {
        let text = "external: A, P\n# Brusselator\nA -> X, 1.92\nX -> Y, 5.76\n2X + Y -> 3 X, 5.6\nX -> P, 4.8\n0 -> Y, 1 # inflow\nY -> ∅, 2\n";
        let n = parse_network(text).unwrap();
        assert_eq!(n.species_names(), vec!["A", "P", "X", "Y"]);
        assert!(n.species()[0].external && n.species()[1].external);
        assert_eq!(n.steps()[2].reactants, vec![(2, 2), (3, 1)]);
        assert_eq!(n.steps()[2].products, vec![(2, 3)]);
        assert!(n.steps()[4].reactants.is_empty());
        assert!(n.steps()[5].products.is_empty());
    }

    #[test]
    fn error_positions() {
        let e = parse_network("A -> B, 1\nA -> , 2").unwrap_err();
        assert_eq!((e.line, e.column), (2, 6));
        let e = parse_network("A -> B, fast").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::BadRate("fast".into()));
        assert_eq!((e.line, e.column), (1, 9));
        let e = parse_network("0 A -> B, 1").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::ZeroCoefficient);
        let e = parse_network("external: A, A\nA -> B, 1").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::DuplicateExternal("A".into()));
        assert_eq!((e.line, e.column), (1, 14));
        let e = parse_network("A <-> B, 1").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::RateCount { expected: 2, found: 1 });
        let e = parse_network("A -> B, 1, 2").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::RateCount { expected: 1, found: 2 });
        let e = parse_network("A -> B; 1").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::UnexpectedChar(';'));
        assert_eq!(e.column, 7);
        let e = parse_network("A + B -> B + A, 1").unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::Model(ModelError::NullStep(0))));
    }

    #[test]
    fn annotations_attach_compositions() {
        let n = parse_step_list("H2 = H2\nBr = Br\nH2 -> 2 H\nBr2 -> 2 Br").unwrap();
        assert_eq!(n.species_names(), vec!["H2", "Br", "H", "Br2"]);
        assert_eq!(n.species()[0].composition.as_ref().unwrap().count("H"), 2);
        assert!(n.species()[2].composition.is_none());
        let e = parse_step_list("X = Qq2\nX -> Y").unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::Formula(_)));
        assert_eq!(e.column, 5);
    }

    #[test]
    fn scientific_rates() {
        let n = parse_network("2B -> B + C, 3e7\nB + C -> A + C, 1.0E+4").unwrap();
        assert_eq!(n.rates(), vec![3e7, 1e4]);
    }

    #[test]
    fn serialize_robertson() {
        let text = "A -> B, 0.04\n2 B -> B + C, 3e7\nB + C -> A + C, 1e4\n";
        let n = parse_network(text).unwrap();
        let s = serialize_network(&n);
        assert_eq!(s.lines().count(), 4);
        assert!(s.starts_with("species: A, B, C\n"));
        assert_eq!(parse_network(&s).unwrap(), n);
    }

    #[test]
    fn serialize_externals() {
        let n = parse_network("external: A=2.5, P\nA -> X, 1\nX -> P, 2").unwrap();
        let s = serialize_network(&n);
        assert!(s.contains("external: A=2.5, P\n"), "{s}");
        let back = parse_network(&s).unwrap();
        assert_eq!(back, n);
        assert_eq!(back.external_level(0), 2.5);
    }
}
