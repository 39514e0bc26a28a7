//! Minimal s-expression reader for the knowledge-base, path and observation
//! formats. Atoms are any run of characters other than whitespace, parens and
//! `;`; a `;` starts a comment that runs to the end of the line.

use std::fmt;

use thiserror::Error;

/// 1-based line and column of a character in the source text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{pos}: {msg}")]
pub struct SyntaxError {
    pub pos: Pos,
    pub msg: String,
}

impl SyntaxError {
    pub fn new(pos: Pos, msg: impl Into<String>) -> Self {
        SyntaxError { pos, msg: msg.into() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Sexp {
    Atom(String, Pos),
    List(Vec<Sexp>, Pos),
}

impl Sexp {
    pub fn pos(&self) -> Pos {
        match self {
            Sexp::Atom(_, p) | Sexp::List(_, p) => *p,
        }
    }

    pub fn as_atom(&self) -> Option<&str> {
        match self {
            Sexp::Atom(s, _) => Some(s),
            Sexp::List(..) => None,
        }
    }

    /// Head symbol and arguments of a list form like `(head a b c)`.
    pub fn as_form(&self) -> Result<(&str, &[Sexp]), SyntaxError> {
        match self {
            Sexp::List(items, pos) => match items.split_first() {
                Some((Sexp::Atom(head, _), rest)) => Ok((head.as_str(), rest)),
                Some((other, _)) => Err(SyntaxError::new(other.pos(), "form head must be a symbol")),
                None => Err(SyntaxError::new(*pos, "empty form")),
            },
            Sexp::Atom(a, pos) => Err(SyntaxError::new(*pos, format!("expected a form, found atom `{a}`"))),
        }
    }
}

struct Reader<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    pos: Pos,
}

impl<'a> Reader<'a> {
    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.pos.line += 1;
            self.pos.col = 1;
        } else {
            self.pos.col += 1;
        }
        Some(c)
    }

    fn skip_trivia(&mut self) {
        while let Some(&c) = self.chars.peek() {
            if c.is_whitespace() {
                self.bump();
            } else if c == ';' {
                while let Some(c) = self.bump() {
                    if c == '\n' {
                        break;
                    }
                }
            } else {
                break;
            }
        }
    }

    fn read(&mut self) -> Result<Option<Sexp>, SyntaxError> {
        self.skip_trivia();
        let start = self.pos;
        match self.chars.peek().copied() {
            None => Ok(None),
            Some(')') => Err(SyntaxError::new(start, "unbalanced `)`")),
            Some('(') => {
                self.bump();
                let mut items = Vec::new();
                loop {
                    self.skip_trivia();
                    match self.chars.peek() {
                        None => return Err(SyntaxError::new(start, "unterminated form")),
                        Some(')') => {
                            self.bump();
                            return Ok(Some(Sexp::List(items, start)));
                        }
                        Some(_) => {
                            if let Some(item) = self.read()? {
                                items.push(item);
                            }
                        }
                    }
                }
            }
            Some(_) => {
                let mut atom = String::new();
                while let Some(&c) = self.chars.peek() {
                    if c.is_whitespace() || c == '(' || c == ')' || c == ';' {
                        break;
                    }
                    atom.push(c);
                    self.bump();
                }
                Ok(Some(Sexp::Atom(atom, start)))
            }
        }
    }
}

/// Reads every top-level expression in `text`.
pub fn read_all(text: &str) -> Result<Vec<Sexp>, SyntaxError> {
    let mut reader = Reader { chars: text.chars().peekable(), pos: Pos { line: 1, col: 1 } };
    let mut out = Vec::new();
    while let Some(sexp) = reader.read()? {
        out.push(sexp);
    }
    Ok(out)
}

/// `[A-Za-z][A-Za-z0-9_-]*`
pub fn is_name(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}
