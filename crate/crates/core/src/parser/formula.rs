//! Chemical formula grammar.
//!
//! ```text
//! formula  := complex | group
//! complex  := '[' formula (',' formula)* ']' charge?
//! group    := part+ charge?
//! part     := element count? | '(' group ')' count?
//! count    := '_'? digits
//! charge   := '^' digits? sign | digits? sign
//! ```
//!
//! Digits directly following an element symbol or a closing parenthesis are
//! always a count, so `Mn2+` is `Mn2` with charge +1 and the dication has to
//! be written `Mn^2+`. After a closing bracket digits can only start a charge.
//!
//! An outer charge on a bracketed complex states the total charge of the
//! complex and replaces the sum of the member charges; without one the
//! member charges are summed.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

const ELEMENTS: &[&str] = &[
    "H", "He", "Li", "Be", "B", "C", "N", "O", "F", "Ne", "Na", "Mg", "Al", "Si", "P", "S", "Cl", "Ar", "K", "Ca",
    "Sc", "Ti", "V", "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge", "As", "Se", "Br", "Kr", "Rb", "Sr", "Y",
    "Zr", "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd", "In", "Sn", "Sb", "Te", "I", "Xe", "Cs", "Ba", "La", "Ce",
    "Pr", "Nd", "Pm", "Sm", "Eu", "Gd", "Tb", "Dy", "Ho", "Er", "Tm", "Yb", "Lu", "Hf", "Ta", "W", "Re", "Os", "Ir",
    "Pt", "Au", "Hg", "Tl", "Pb", "Bi", "Po", "At", "Rn", "Fr", "Ra", "Ac", "Th", "Pa", "U", "Np", "Pu", "Am", "Cm",
    "Bk", "Cf", "Es", "Fm", "Md", "No", "Lr", "Rf", "Db", "Sg", "Bh", "Hs", "Mt", "Ds", "Rg", "Cn", "Nh", "Fl", "Mc",
    "Lv", "Ts", "Og",
];

pub fn is_element(symbol: &str) -> bool {
    ELEMENTS.contains(&symbol)
}

/// Atom counts plus net charge of one species.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Composition {
    pub atoms: BTreeMap<String, u32>,
    pub charge: i32,
}

impl Composition {
    pub fn count(&self, element: &str) -> u32 {
        self.atoms.get(element).copied().unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.values().all(|&n| n == 0) && self.charge == 0
    }

    fn add_scaled(&mut self, other: &Composition, factor: u32) {
        for (el, n) in &other.atoms {
            *self.atoms.entry(el.clone()).or_insert(0) += n * factor;
        }
        self.charge += other.charge * factor as i32;
    }
}

impl std::ops::Add for &Composition {
    type Output = Composition;

    fn add(self, rhs: &Composition) -> Composition {
        let mut out = self.clone();
        out.add_scaled(rhs, 1);
        out
    }
}

impl fmt::Display for Composition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (el, &n) in &self.atoms {
            if n == 1 {
                write!(f, "{el}")?;
            } else if n > 1 {
                write!(f, "{el}{n}")?;
            }
        }
        match self.charge {
            0 => Ok(()),
            1 => write!(f, "^+"),
            -1 => write!(f, "^-"),
            c if c > 0 => write!(f, "^{c}+"),
            c => write!(f, "^{}-", -c),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormulaError {
    #[error("unknown element symbol '{symbol}' at column {column}")]
    UnknownElement { symbol: String, column: usize },
    #[error("malformed charge at column {column}")]
    MalformedCharge { column: usize },
    #[error("unbalanced brackets at column {column}")]
    Unbalanced { column: usize },
    #[error("unexpected character '{found}' at column {column}")]
    Unexpected { found: char, column: usize },
    #[error("empty formula")]
    Empty,
}

impl FormulaError {
    /// 1-based column of the offending character, when known.
    pub fn column(&self) -> Option<usize> {
        match self {
            FormulaError::UnknownElement { column, .. }
            | FormulaError::MalformedCharge { column }
            | FormulaError::Unbalanced { column }
            | FormulaError::Unexpected { column, .. } => Some(*column),
            FormulaError::Empty => None,
        }
    }
}

/// Parses a formula such as `H2C2O4`, `MnO4^-`, `Mn(C2O4)2^-` or
/// `[MnC2O4,MnO4^-,H^+]`.
pub fn parse_formula(text: &str) -> Result<Composition, FormulaError> {
    let chars: Vec<char> = text.chars().filter(|c| !c.is_whitespace()).collect();
    if chars.is_empty() {
        return Err(FormulaError::Empty);
    }
    let mut p = FormulaParser { chars, pos: 0 };
    let comp = p.formula()?;
    if p.pos < p.chars.len() {
        let found = p.chars[p.pos];
        return Err(if matches!(found, ']' | ')') {
            FormulaError::Unbalanced { column: p.pos + 1 }
        } else {
            FormulaError::Unexpected { found, column: p.pos + 1 }
        });
    }
    Ok(comp)
}

struct FormulaParser {
    chars: Vec<char>,
    pos: usize,
}

impl FormulaParser {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn formula(&mut self) -> Result<Composition, FormulaError> {
        if self.peek() == Some('[') {
            self.complex()
        } else {
            self.group(true)
        }
    }

    fn complex(&mut self) -> Result<Composition, FormulaError> {
        let open = self.pos;
        self.pos += 1;
        let mut total = Composition::default();
        loop {
            let member = self.formula()?;
            total.add_scaled(&member, 1);
            match self.peek() {
                Some(',') => self.pos += 1,
                Some(']') => {
                    self.pos += 1;
                    break;
                }
                _ => return Err(FormulaError::Unbalanced { column: open + 1 }),
            }
        }
        if let Some(charge) = self.charge(false)? {
            total.charge = charge;
        }
        Ok(total)
    }

    fn group(&mut self, top_level: bool) -> Result<Composition, FormulaError> {
        let mut comp = Composition::default();
        let mut parts = 0;
        loop {
            match self.peek() {
                Some(c) if c.is_ascii_uppercase() => {
                    let start = self.pos;
                    let mut symbol = c.to_string();
                    self.pos += 1;
                    if let Some(l) = self.peek().filter(|l| l.is_ascii_lowercase()) {
                        symbol.push(l);
                        self.pos += 1;
                    }
                    if !is_element(&symbol) {
                        return Err(FormulaError::UnknownElement { symbol, column: start + 1 });
                    }
                    let n = self.count()?.unwrap_or(1);
                    *comp.atoms.entry(symbol).or_insert(0) += n;
                    parts += 1;
                }
                Some('(') => {
                    let open = self.pos;
                    self.pos += 1;
                    let inner = self.group(false)?;
                    if self.peek() != Some(')') {
                        return Err(FormulaError::Unbalanced { column: open + 1 });
                    }
                    self.pos += 1;
                    let n = self.count()?.unwrap_or(1);
                    comp.add_scaled(&inner, n);
                    parts += 1;
                }
                Some(c) if c.is_ascii_lowercase() => {
                    return Err(FormulaError::UnknownElement { symbol: c.to_string(), column: self.pos + 1 })
                }
                _ => break,
            }
        }
        if top_level {
            if let Some(charge) = self.charge(true)? {
                comp.charge += charge;
            }
        }
        if parts == 0 && comp.charge == 0 {
            return match self.peek() {
                Some(found) => Err(FormulaError::Unexpected { found, column: self.pos + 1 }),
                None => Err(FormulaError::Empty),
            };
        }
        Ok(comp)
    }

    fn count(&mut self) -> Result<Option<u32>, FormulaError> {
        let start = self.pos;
        if self.peek() == Some('_') {
            self.pos += 1;
        }
        let digits = self.digits();
        if digits.is_empty() {
            if self.pos != start {
                return Err(FormulaError::Unexpected { found: '_', column: start + 1 });
            }
            return Ok(None);
        }
        match digits.parse::<u32>() {
            Ok(0) | Err(_) => Err(FormulaError::Unexpected { found: '0', column: start + 1 }),
            Ok(n) => Ok(Some(n)),
        }
    }

    fn digits(&mut self) -> String {
        let mut s = String::new();
        while let Some(d) = self.peek().filter(|d| d.is_ascii_digit()) {
            s.push(d);
            self.pos += 1;
        }
        s
    }

    /// Parses an optional charge marker. `after_group` means digits were
    /// already consumed as counts, so only `^...` or a bare sign may follow.
    fn charge(&mut self, after_group: bool) -> Result<Option<i32>, FormulaError> {
        let start = self.pos;
        let caret = self.peek() == Some('^');
        if caret {
            self.pos += 1;
        }
        let digits = if caret || !after_group { self.digits() } else { String::new() };
        let sign = match self.peek() {
            Some('+') => 1,
            Some('-') => -1,
            _ => {
                if caret || !digits.is_empty() {
                    return Err(FormulaError::MalformedCharge { column: start + 1 });
                }
                return Ok(None);
            }
        };
        self.pos += 1;
        let magnitude = if digits.is_empty() {
            1
        } else {
            digits.parse::<i32>().ok().filter(|&m| m > 0).ok_or(FormulaError::MalformedCharge { column: start + 1 })?
        };
        if matches!(self.peek(), Some('+' | '-' | '^')) {
            return Err(FormulaError::MalformedCharge { column: self.pos + 1 });
        }
        Ok(Some(sign * magnitude))
    }
}
