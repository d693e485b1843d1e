//! Scalar coefficient expressions in the variables `x`, `y`, `t`.
//!
//! Grammar, tightest first:
//!
//! ```text
//! power   :=  atom ('^' factor)?          right-associative
//! factor  :=  '-' factor | power          unary minus below '^': -x^2 = -(x^2)
//! term    :=  factor (('*' | '/') factor)*
//! expr    :=  term (('+' | '-') term)*    '+' '-' '*' '/' left-associative
//! atom    :=  number | variable | function '(' expr ')' | '(' expr ')'
//! ```
//!
//! Numbers are decimal with optional fraction and exponent (`2`, `0.5`,
//! `1.5e-3`) and must start with a digit. There is no implicit
//! multiplication: `2x` is a syntax error. Variables are `x`, `y`, `t`, plus
//! indexed coordinates `x0`..`x9` for higher-dimensional systems; `x` is an
//! alias of `x0` and `y` of `x1`. `log` is the natural logarithm.

use std::fmt;
use thiserror::Error;

/// Highest number of coordinate variables an expression can reference.
pub const MAX_COORDS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Abs,
    Tanh,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Tanh => "tanh",
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            "tanh" => Func::Tanh,
            _ => return None,
        })
    }

    fn apply(self, v: f64) -> Result<f64, EvalError> {
        match self {
            Func::Sin => Ok(v.sin()),
            Func::Cos => Ok(v.cos()),
            Func::Exp => Ok(v.exp()),
            Func::Log => {
                if v <= 0.0 {
                    Err(EvalError::Domain {
                        func: "log",
                        arg: v,
                    })
                } else {
                    Ok(v.ln())
                }
            }
            Func::Sqrt => {
                if v < 0.0 {
                    Err(EvalError::Domain {
                        func: "sqrt",
                        arg: v,
                    })
                } else {
                    Ok(v.sqrt())
                }
            }
            Func::Abs => Ok(v.abs()),
            Func::Tanh => Ok(v.tanh()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    /// Coordinate `x0`..`x9`; `x` is `Coord(0)`, `y` is `Coord(1)`.
    Coord(u8),
    /// The time variable `t`.
    Time,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }
}

/// Immutable expression tree. Evaluation never mutates it, so a parsed
/// expression can be shared freely across threads.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

/// Variable bindings for one evaluation: a coordinate vector and a time.
/// Coordinates beyond the supplied state are zero.
#[derive(Debug, Clone, Copy)]
pub struct Bindings {
    coords: [f64; MAX_COORDS],
    t: f64,
}

impl Bindings {
    /// Binds `state[i]` to `x{i}` and `t` to the time variable.
    ///
    /// Panics if `state` has more than [`MAX_COORDS`] entries.
    pub fn new(state: &[f64], t: f64) -> Self {
        assert!(
            state.len() <= MAX_COORDS,
            "at most {MAX_COORDS} coordinates are supported"
        );
        let mut coords = [0.0; MAX_COORDS];
        coords[..state.len()].copy_from_slice(state);
        Bindings { coords, t }
    }

    pub fn d1(x: f64, t: f64) -> Self {
        Bindings::new(&[x], t)
    }

    pub fn d2(x: f64, y: f64, t: f64) -> Self {
        Bindings::new(&[x, y], t)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: expected {expected}")]
    Syntax {
        offset: usize,
        expected: &'static str,
    },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { offset: usize, name: String },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match *self {
            ParseError::Syntax { offset, .. } => offset,
            ParseError::UnknownIdentifier { offset, .. } => offset,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("domain error: {func}({arg}) is undefined")]
    Domain { func: &'static str, arg: f64 },
    #[error("non-finite result in strict evaluation")]
    NonFinite,
}

impl Expr {
    /// IEEE-754 double evaluation. `log`/`sqrt` outside their domain error
    /// out; overflow and 0/0 propagate as infinities or NaN.
    pub fn eval(&self, b: &Bindings) -> Result<f64, EvalError> {
        self.eval_inner(b, false)
    }

    /// Like [`eval`](Expr::eval), but any non-finite intermediate or final
    /// value is reported as [`EvalError::NonFinite`].
    pub fn eval_strict(&self, b: &Bindings) -> Result<f64, EvalError> {
        self.eval_inner(b, true)
    }

    fn eval_inner(&self, b: &Bindings, strict: bool) -> Result<f64, EvalError> {
        let v = match self {
            Expr::Num(n) => *n,
            Expr::Var(Var::Coord(i)) => b.coords[*i as usize],
            Expr::Var(Var::Time) => b.t,
            Expr::Neg(e) => -e.eval_inner(b, strict)?,
            Expr::Bin(op, l, r) => {
                let a = l.eval_inner(b, strict)?;
                let c = r.eval_inner(b, strict)?;
                match op {
                    BinOp::Add => a + c,
                    BinOp::Sub => a - c,
                    BinOp::Mul => a * c,
                    BinOp::Div => a / c,
                    BinOp::Pow => a.powf(c),
                }
            }
            Expr::Call(f, e) => f.apply(e.eval_inner(b, strict)?)?,
        };
        if strict && !v.is_finite() {
            return Err(EvalError::NonFinite);
        }
        Ok(v)
    }

    /// Largest coordinate index referenced, if any. Used to check that an
    /// expression fits a system's dimension.
    pub fn max_coord_index(&self) -> Option<u8> {
        match self {
            Expr::Num(_) => None,
            Expr::Var(Var::Coord(i)) => Some(*i),
            Expr::Var(Var::Time) => None,
            Expr::Neg(e) | Expr::Call(_, e) => e.max_coord_index(),
            Expr::Bin(_, l, r) => l.max_coord_index().max(r.max_coord_index()),
        }
    }
}

/// Canonical rendering: fully parenthesized, so the text makes every
/// precedence decision explicit. Re-parsing the rendering of any parsed
/// expression yields a structurally identical tree (the parser never produces
/// negative or non-finite literals, which are the only nodes this rendering
/// cannot express).
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(n) => write!(f, "{n}"),
            Expr::Var(Var::Coord(0)) => write!(f, "x"),
            Expr::Var(Var::Coord(1)) => write!(f, "y"),
            Expr::Var(Var::Coord(i)) => write!(f, "x{i}"),
            Expr::Var(Var::Time) => write!(f, "t"),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Bin(op, l, r) => write!(f, "({l} {} {r})", op.symbol()),
            Expr::Call(func, e) => write!(f, "{}({e})", func.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

struct Token {
    tok: Tok,
    offset: usize,
}

fn lex(src: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = src.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        match c {
            b' ' | b'\t' | b'\r' | b'\n' => i += 1,
            b'+' | b'-' | b'*' | b'/' | b'^' | b'(' | b')' => {
                let tok = match c {
                    b'+' => Tok::Plus,
                    b'-' => Tok::Minus,
                    b'*' => Tok::Star,
                    b'/' => Tok::Slash,
                    b'^' => Tok::Caret,
                    b'(' => Tok::LParen,
                    _ => Tok::RParen,
                };
                toks.push(Token { tok, offset: start });
                i += 1;
            }
            b'0'..=b'9' => {
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                if i < bytes.len() && bytes[i] == b'.' {
                    i += 1;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                    // A bare `e` with no digits is left for the identifier
                    // lexer, so `2e` fails as an unknown identifier rather
                    // than a malformed number.
                }
                let text = &src[start..i];
                let value = text.parse::<f64>().map_err(|_| ParseError::Syntax {
                    offset: start,
                    expected: "numeric literal",
                })?;
                toks.push(Token {
                    tok: Tok::Num(value),
                    offset: start,
                });
            }
            b'a'..=b'z' | b'A'..=b'Z' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric()) {
                    i += 1;
                }
                toks.push(Token {
                    tok: Tok::Ident(src[start..i].to_string()),
                    offset: start,
                });
            }
            _ => {
                return Err(ParseError::Syntax {
                    offset: start,
                    expected: "expression",
                })
            }
        }
    }
    Ok(toks)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |t| t.offset)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|t| t.tok.clone());
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == Some(tok) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut node = self.term()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Plus) => BinOp::Add,
                Some(Tok::Minus) => BinOp::Sub,
                _ => return Ok(node),
            };
            self.pos += 1;
            let rhs = self.term()?;
            node = Expr::Bin(op, Box::new(node), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut node = self.factor()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Star) => BinOp::Mul,
                Some(Tok::Slash) => BinOp::Div,
                _ => return Ok(node),
            };
            self.pos += 1;
            let rhs = self.factor()?;
            node = Expr::Bin(op, Box::new(node), Box::new(rhs));
        }
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        if self.eat(&Tok::Minus) {
            Ok(Expr::Neg(Box::new(self.factor()?)))
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.eat(&Tok::Caret) {
            // Right-associative, and the exponent is a factor so `2^-3` works.
            let exp = self.factor()?;
            Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exp)))
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let offset = self.offset();
        match self.bump() {
            Some(Tok::Num(v)) => Ok(Expr::Num(v)),
            Some(Tok::Ident(name)) => {
                if let Some(func) = Func::from_name(&name) {
                    if !self.eat(&Tok::LParen) {
                        return Err(ParseError::Syntax {
                            offset: self.offset(),
                            expected: "`(` after function name",
                        });
                    }
                    let arg = self.expr()?;
                    if !self.eat(&Tok::RParen) {
                        return Err(ParseError::Syntax {
                            offset: self.offset(),
                            expected: "`)`",
                        });
                    }
                    return Ok(Expr::Call(func, Box::new(arg)));
                }
                match classify_var(&name) {
                    Some(var) => Ok(Expr::Var(var)),
                    None => Err(ParseError::UnknownIdentifier { offset, name }),
                }
            }
            Some(Tok::LParen) => {
                let inner = self.expr()?;
                if !self.eat(&Tok::RParen) {
                    return Err(ParseError::Syntax {
                        offset: self.offset(),
                        expected: "`)`",
                    });
                }
                Ok(inner)
            }
            _ => Err(ParseError::Syntax {
                offset,
                expected: "expression",
            }),
        }
    }
}

fn classify_var(name: &str) -> Option<Var> {
    match name {
        "x" => Some(Var::Coord(0)),
        "y" => Some(Var::Coord(1)),
        "t" => Some(Var::Time),
        _ => {
            let rest = name.strip_prefix('x')?;
            if rest.len() == 1 && rest.as_bytes()[0].is_ascii_digit() {
                Some(Var::Coord(rest.as_bytes()[0] - b'0'))
            } else {
                None
            }
        }
    }
}

/// Parses `source` into an expression tree under the module grammar.
pub fn parse(source: &str) -> Result<Expr, ParseError> {
    let toks = lex(source)?;
    let mut p = Parser {
        toks,
        pos: 0,
        end: source.len(),
    };
    let e = p.expr()?;
    if p.pos != p.toks.len() {
        return Err(ParseError::Syntax {
            offset: p.offset(),
            expected: "end of input",
        });
    }
    Ok(e)
}
