use std::fmt;

use super::{Cmp, Formula, PathFormula};

#[derive(Clone, Debug, PartialEq)]
pub struct ParseError {
    /// Byte offset into the input.
    pub position: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "syntax error at offset {}: {}", self.position, self.message)
    }
}

impl std::error::Error for ParseError {}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Number(String),
    True,
    P,
    X,
    U,
    G,
    Not,
    And,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Lt,
    Le,
    Gt,
    Ge,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Tok::Ident(s) | Tok::Number(s) => return write!(f, "`{s}`"),
            Tok::True => "`true`",
            Tok::P => "`P`",
            Tok::X => "`X`",
            Tok::U => "`U`",
            Tok::G => "`G`",
            Tok::Not => "`!`",
            Tok::And => "`&`",
            Tok::LParen => "`(`",
            Tok::RParen => "`)`",
            Tok::LBracket => "`[`",
            Tok::RBracket => "`]`",
            Tok::Lt => "`<`",
            Tok::Le => "`<=`",
            Tok::Gt => "`>`",
            Tok::Ge => "`>=`",
            Tok::Eof => "end of input",
        };
        f.write_str(s)
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        let start = i;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let tok = match c {
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '[' => Tok::LBracket,
            ']' => Tok::RBracket,
            '!' => Tok::Not,
            '&' => Tok::And,
            '<' | '>' => {
                let eq = bytes.get(i + 1) == Some(&b'=');
                if eq {
                    i += 1;
                }
                match (c, eq) {
                    ('<', false) => Tok::Lt,
                    ('<', true) => Tok::Le,
                    ('>', false) => Tok::Gt,
                    _ => Tok::Ge,
                }
            }
            c if c.is_ascii_digit() || c == '.' => {
                while i + 1 < bytes.len() && (bytes[i + 1].is_ascii_digit() || bytes[i + 1] == b'.') {
                    i += 1;
                }
                Tok::Number(text[start..=i].to_string())
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                while i + 1 < bytes.len() && (bytes[i + 1].is_ascii_alphanumeric() || bytes[i + 1] == b'_') {
                    i += 1;
                }
                match &text[start..=i] {
                    "true" => Tok::True,
                    "P" => Tok::P,
                    "X" => Tok::X,
                    "U" => Tok::U,
                    "G" => Tok::G,
                    w => Tok::Ident(w.to_string()),
                }
            }
            other => {
                return Err(ParseError { position: start, message: format!("unexpected character `{other}`") })
            }
        };
        out.push((tok, start));
        i += 1;
    }
    out.push((Tok::Eof, text.len()));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError { position: self.offset(), message: message.into() })
    }

    fn expect(&mut self, want: Tok) -> Result<(), ParseError> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            self.error(format!("expected {want}, found {}", self.peek()))
        }
    }

    // formula := unary ("&" unary)*
    fn formula(&mut self) -> Result<Formula, ParseError> {
        let mut left = self.unary()?;
        while *self.peek() == Tok::And {
            self.bump();
            let right = self.unary()?;
            left = Formula::and(left, right);
        }
        Ok(left)
    }

    fn unary(&mut self) -> Result<Formula, ParseError> {
        match self.peek().clone() {
            Tok::Not => {
                self.bump();
                Ok(Formula::not(self.unary()?))
            }
            Tok::True => {
                self.bump();
                Ok(Formula::True)
            }
            Tok::Ident(name) => {
                self.bump();
                Ok(Formula::Atom(name))
            }
            Tok::LParen => {
                self.bump();
                let f = self.formula()?;
                self.expect(Tok::RParen)?;
                Ok(f)
            }
            Tok::P => self.prob(),
            Tok::X | Tok::G => self.error("path formula in a state-formula position"),
            t => self.error(format!("expected a state formula, found {t}")),
        }
    }

    fn prob(&mut self) -> Result<Formula, ParseError> {
        self.expect(Tok::P)?;
        self.expect(Tok::LBracket)?;
        let cmp = match self.bump() {
            Tok::Lt => Cmp::Lt,
            Tok::Le => Cmp::Le,
            Tok::Gt => Cmp::Gt,
            Tok::Ge => Cmp::Ge,
            t => {
                self.pos -= 1;
                return self.error(format!("expected a comparison operator, found {t}"));
            }
        };
        let at = self.offset();
        let p = match self.bump() {
            Tok::Number(s) => s
                .parse::<f64>()
                .map_err(|_| ParseError { position: at, message: format!("malformed probability `{s}`") })?,
            t => {
                self.pos -= 1;
                return self.error(format!("expected a probability, found {t}"));
            }
        };
        if !(0.0..=1.0).contains(&p) {
            return Err(ParseError { position: at, message: format!("probability {p} outside [0,1]") });
        }
        self.expect(Tok::RBracket)?;
        self.expect(Tok::LParen)?;
        let path = self.path()?;
        if *self.peek() == Tok::U {
            return self.error("path operator applied to a path formula");
        }
        self.expect(Tok::RParen)?;
        Ok(Formula::prob(cmp, p, path))
    }

    fn bound(&mut self) -> Result<Option<usize>, ParseError> {
        if *self.peek() != Tok::Le {
            return Ok(None);
        }
        self.bump();
        let at = self.offset();
        match self.bump() {
            Tok::Number(s) => s
                .parse::<usize>()
                .map(Some)
                .map_err(|_| ParseError { position: at, message: format!("step bound `{s}` is not a non-negative integer") }),
            t => {
                self.pos -= 1;
                self.error(format!("expected a step bound, found {t}"))
            }
        }
    }

    // path := "X" formula | "G"["<=" int] formula | formula "U"["<=" int] formula
    fn path(&mut self) -> Result<PathFormula, ParseError> {
        match self.peek() {
            Tok::X => {
                self.bump();
                Ok(PathFormula::Next(self.formula()?))
            }
            Tok::G => {
                self.bump();
                let n = self.bound()?;
                let f = self.formula()?;
                Ok(match n {
                    Some(n) => PathFormula::BoundedGlobally(f, n),
                    None => PathFormula::Globally(f),
                })
            }
            _ => {
                let left = self.formula()?;
                if *self.peek() != Tok::U {
                    return self.error(format!("expected `U`, found {}", self.peek()));
                }
                self.bump();
                let n = self.bound()?;
                let right = self.formula()?;
                Ok(match n {
                    Some(n) => PathFormula::BoundedUntil(left, right, n),
                    None => PathFormula::Until(left, right),
                })
            }
        }
    }
}

/// Parses a PCTL state formula.
pub fn parse(text: &str) -> Result<Formula, ParseError> {
    let mut p = Parser { toks: lex(text)?, pos: 0 };
    let f = p.formula()?;
    if *p.peek() != Tok::Eof {
        return p.error(format!("unexpected {} after formula", p.peek()));
    }
    Ok(f)
}
