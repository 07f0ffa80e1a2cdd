//! Expression trees for the prescribed curvature ψ(x, u): recursive-descent
//! parser, exact symbolic differentiation with constant folding, and a stable
//! printer (print ∘ parse is the identity on trees).

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    /// The graph height u.
    U,
    /// Horizontal coordinate x_i, 1-based.
    X(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnOp {
    Neg,
    Sqrt,
    Exp,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(Var),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn constant(v: f64) -> Expr {
        Expr::Const(v)
    }

    fn is_const(&self, v: f64) -> bool {
        matches!(self, Expr::Const(c) if *c == v)
    }

    /// Smart constructors fold constants so derivative trees stay small.
    fn add(a: Expr, b: Expr) -> Expr {
        match (&a, &b) {
            (Expr::Const(x), Expr::Const(y)) => Expr::Const(x + y),
            _ if a.is_const(0.0) => b,
            _ if b.is_const(0.0) => a,
            _ => Expr::Binary(BinOp::Add, Box::new(a), Box::new(b)),
        }
    }

    fn sub(a: Expr, b: Expr) -> Expr {
        match (&a, &b) {
            (Expr::Const(x), Expr::Const(y)) => Expr::Const(x - y),
            _ if b.is_const(0.0) => a,
            _ => Expr::Binary(BinOp::Sub, Box::new(a), Box::new(b)),
        }
    }

    fn mul(a: Expr, b: Expr) -> Expr {
        match (&a, &b) {
            (Expr::Const(x), Expr::Const(y)) => Expr::Const(x * y),
            _ if a.is_const(0.0) || b.is_const(0.0) => Expr::Const(0.0),
            _ if a.is_const(1.0) => b,
            _ if b.is_const(1.0) => a,
            _ => Expr::Binary(BinOp::Mul, Box::new(a), Box::new(b)),
        }
    }

    fn div(a: Expr, b: Expr) -> Expr {
        match (&a, &b) {
            (Expr::Const(x), Expr::Const(y)) if *y != 0.0 => Expr::Const(x / y),
            _ if a.is_const(0.0) => Expr::Const(0.0),
            _ if b.is_const(1.0) => a,
            _ => Expr::Binary(BinOp::Div, Box::new(a), Box::new(b)),
        }
    }

    fn pow(a: Expr, b: Expr) -> Expr {
        match (&a, &b) {
            (Expr::Const(x), Expr::Const(y)) => Expr::Const(x.powf(*y)),
            _ if b.is_const(1.0) => a,
            _ if b.is_const(0.0) => Expr::Const(1.0),
            _ => Expr::Binary(BinOp::Pow, Box::new(a), Box::new(b)),
        }
    }

    fn neg(a: Expr) -> Expr {
        match &a {
            Expr::Const(x) => Expr::Const(-x),
            _ => Expr::Unary(UnOp::Neg, Box::new(a)),
        }
    }

    /// Evaluates at (x, u). Total on its domain; out-of-domain inputs
    /// (log of a non-positive value, division by zero, ...) are tagged errors.
    pub fn eval(&self, x: &[f64], u: f64) -> Result<f64> {
        let v = match self {
            Expr::Const(c) => *c,
            Expr::Var(Var::U) => u,
            Expr::Var(Var::X(i)) => {
                *x.get(i - 1).ok_or_else(|| {
                    Error::Argument(format!("x{i} referenced but only {} coordinates given", x.len()))
                })?
            }
            Expr::Unary(op, a) => {
                let a = a.eval(x, u)?;
                match op {
                    UnOp::Neg => -a,
                    UnOp::Sqrt => {
                        if a < 0.0 {
                            return Err(Error::Domain(format!("sqrt of negative value {a}")));
                        }
                        a.sqrt()
                    }
                    UnOp::Exp => a.exp(),
                    UnOp::Log => {
                        if a <= 0.0 {
                            return Err(Error::Domain(format!("log of non-positive value {a}")));
                        }
                        a.ln()
                    }
                }
            }
            Expr::Binary(op, a, b) => {
                let a = a.eval(x, u)?;
                let b = b.eval(x, u)?;
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b == 0.0 {
                            return Err(Error::Domain("division by zero".into()));
                        }
                        a / b
                    }
                    BinOp::Pow => {
                        let v = a.powf(b);
                        if !v.is_finite() {
                            return Err(Error::Domain(format!("{a}^{b} is not finite")));
                        }
                        v
                    }
                }
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Domain("expression evaluated to a non-finite value".into()))
        }
    }

    /// Exact symbolic derivative with respect to `var`.
    pub fn differentiate(&self, var: Var) -> Expr {
        match self {
            Expr::Const(_) => Expr::Const(0.0),
            Expr::Var(v) => Expr::Const(if *v == var { 1.0 } else { 0.0 }),
            Expr::Unary(op, a) => {
                let da = a.differentiate(var);
                let a = (**a).clone();
                match op {
                    UnOp::Neg => Expr::neg(da),
                    UnOp::Sqrt => Expr::div(
                        da,
                        Expr::mul(Expr::Const(2.0), Expr::Unary(UnOp::Sqrt, Box::new(a))),
                    ),
                    UnOp::Exp => Expr::mul(da, Expr::Unary(UnOp::Exp, Box::new(a))),
                    UnOp::Log => Expr::div(da, a),
                }
            }
            Expr::Binary(op, a, b) => {
                let da = a.differentiate(var);
                let db = b.differentiate(var);
                let a = (**a).clone();
                let b = (**b).clone();
                match op {
                    BinOp::Add => Expr::add(da, db),
                    BinOp::Sub => Expr::sub(da, db),
                    BinOp::Mul => Expr::add(Expr::mul(da, b), Expr::mul(a, db)),
                    BinOp::Div => Expr::div(
                        Expr::sub(Expr::mul(da, b.clone()), Expr::mul(a, db)),
                        Expr::pow(b, Expr::Const(2.0)),
                    ),
                    BinOp::Pow => {
                        if let Expr::Const(c) = b {
                            // c * a^(c-1) * a'
                            Expr::mul(
                                Expr::mul(Expr::Const(c), Expr::pow(a, Expr::Const(c - 1.0))),
                                da,
                            )
                        } else {
                            // a^b * (b' ln a + b a'/a)
                            Expr::mul(
                                Expr::pow(a.clone(), b.clone()),
                                Expr::add(
                                    Expr::mul(db, Expr::Unary(UnOp::Log, Box::new(a.clone()))),
                                    Expr::div(Expr::mul(b, da), a),
                                ),
                            )
                        }
                    }
                }
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => {
                if *c < 0.0 {
                    write!(f, "({c})")
                } else {
                    write!(f, "{c}")
                }
            }
            Expr::Var(Var::U) => write!(f, "u"),
            Expr::Var(Var::X(i)) => write!(f, "x{i}"),
            Expr::Unary(UnOp::Neg, a) => write!(f, "(-{a})"),
            Expr::Unary(UnOp::Sqrt, a) => write!(f, "sqrt({a})"),
            Expr::Unary(UnOp::Exp, a) => write!(f, "exp({a})"),
            Expr::Unary(UnOp::Log, a) => write!(f, "log({a})"),
            Expr::Binary(op, a, b) => {
                let sym = match op {
                    BinOp::Add => "+",
                    BinOp::Sub => "-",
                    BinOp::Mul => "*",
                    BinOp::Div => "/",
                    BinOp::Pow => "^",
                };
                write!(f, "({a} {sym} {b})")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Number(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer { src: src.as_bytes(), pos: 0 }
    }

    /// 1-based column of the current position.
    fn col(&self) -> usize {
        self.pos + 1
    }

    fn next_token(&mut self) -> Result<Option<(Token, usize)>> {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if self.pos >= self.src.len() {
            return Ok(None);
        }
        let start = self.pos;
        let col = self.col();
        let c = self.src[self.pos];
        let tok = match c {
            b'+' => {
                self.pos += 1;
                Token::Plus
            }
            b'-' => {
                self.pos += 1;
                Token::Minus
            }
            b'*' => {
                self.pos += 1;
                Token::Star
            }
            b'/' => {
                self.pos += 1;
                Token::Slash
            }
            b'^' => {
                self.pos += 1;
                Token::Caret
            }
            b'(' => {
                self.pos += 1;
                Token::LParen
            }
            b')' => {
                self.pos += 1;
                Token::RParen
            }
            b'0'..=b'9' | b'.' => {
                while self.pos < self.src.len()
                    && (self.src[self.pos].is_ascii_digit() || self.src[self.pos] == b'.')
                {
                    self.pos += 1;
                }
                // scientific suffix
                if self.pos < self.src.len() && (self.src[self.pos] | 0x20) == b'e' {
                    let mut p = self.pos + 1;
                    if p < self.src.len() && (self.src[p] == b'+' || self.src[p] == b'-') {
                        p += 1;
                    }
                    if p < self.src.len() && self.src[p].is_ascii_digit() {
                        self.pos = p;
                        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                            self.pos += 1;
                        }
                    }
                }
                let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
                let v: f64 = text
                    .parse()
                    .map_err(|_| Error::Parse { col, msg: format!("invalid number '{text}'") })?;
                Token::Number(v)
            }
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                while self.pos < self.src.len()
                    && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                Token::Ident(std::str::from_utf8(&self.src[start..self.pos]).unwrap().to_string())
            }
            other => {
                return Err(Error::Parse { col, msg: format!("unexpected character '{}'", other as char) })
            }
        };
        Ok(Some((tok, col)))
    }
}

struct Parser {
    tokens: Vec<(Token, usize)>,
    idx: usize,
    end_col: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.idx).map(|(t, _)| t)
    }

    fn col(&self) -> usize {
        self.tokens.get(self.idx).map(|&(_, c)| c).unwrap_or(self.end_col)
    }

    fn bump(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.idx).map(|(t, _)| t.clone());
        self.idx += 1;
        t
    }

    fn expect(&mut self, tok: Token, what: &str) -> Result<()> {
        if self.peek() == Some(&tok) {
            self.idx += 1;
            Ok(())
        } else {
            Err(Error::Parse { col: self.col(), msg: format!("expected {what}") })
        }
    }

    // expr := term (('+'|'-') term)*
    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(Token::Plus) => {
                    self.idx += 1;
                    let rhs = self.term()?;
                    lhs = Expr::Binary(BinOp::Add, Box::new(lhs), Box::new(rhs));
                }
                Some(Token::Minus) => {
                    self.idx += 1;
                    let rhs = self.term()?;
                    lhs = Expr::Binary(BinOp::Sub, Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    // term := unary (('*'|'/') unary)*
    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some(Token::Star) => {
                    self.idx += 1;
                    let rhs = self.unary()?;
                    lhs = Expr::Binary(BinOp::Mul, Box::new(lhs), Box::new(rhs));
                }
                Some(Token::Slash) => {
                    self.idx += 1;
                    let rhs = self.unary()?;
                    lhs = Expr::Binary(BinOp::Div, Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    // unary := '-' unary | power
    fn unary(&mut self) -> Result<Expr> {
        if self.peek() == Some(&Token::Minus) {
            self.idx += 1;
            let inner = self.unary()?;
            Ok(Expr::Unary(UnOp::Neg, Box::new(inner)))
        } else {
            self.power()
        }
    }

    // power := atom ('^' unary)?   -- right-associative, binds above unary minus
    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.peek() == Some(&Token::Caret) {
            self.idx += 1;
            let exponent = self.unary()?;
            Ok(Expr::Binary(BinOp::Pow, Box::new(base), Box::new(exponent)))
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<Expr> {
        let col = self.col();
        match self.bump() {
            Some(Token::Number(v)) => Ok(Expr::Const(v)),
            Some(Token::Ident(name)) => match name.as_str() {
                "sqrt" | "exp" | "log" => {
                    let op = match name.as_str() {
                        "sqrt" => UnOp::Sqrt,
                        "exp" => UnOp::Exp,
                        _ => UnOp::Log,
                    };
                    self.expect(Token::LParen, "'(' after function name")?;
                    let arg = self.expr()?;
                    self.expect(Token::RParen, "')'")?;
                    Ok(Expr::Unary(op, Box::new(arg)))
                }
                "u" => Ok(Expr::Var(Var::U)),
                _ => {
                    if let Some(idx) = name.strip_prefix('x').and_then(|s| s.parse::<usize>().ok())
                    {
                        if idx >= 1 {
                            return Ok(Expr::Var(Var::X(idx)));
                        }
                    }
                    Err(Error::Parse { col, msg: format!("unknown identifier '{name}'") })
                }
            },
            Some(Token::LParen) => {
                let inner = self.expr()?;
                self.expect(Token::RParen, "')'")?;
                Ok(inner)
            }
            Some(tok) => Err(Error::Parse { col, msg: format!("unexpected token {tok:?}") }),
            None => Err(Error::Parse { col, msg: "unexpected end of input".into() }),
        }
    }
}

/// Parses ψ(x, u) source text into an expression tree.
pub fn parse(text: &str) -> Result<Expr> {
    let mut lexer = Lexer::new(text);
    let mut tokens = Vec::new();
    while let Some(t) = lexer.next_token()? {
        tokens.push(t);
    }
    let end_col = text.len() + 1;
    let mut parser = Parser { tokens, idx: 0, end_col };
    let e = parser.expr()?;
    if parser.idx != parser.tokens.len() {
        return Err(Error::Parse { col: parser.col(), msg: "trailing input".into() });
    }
    Ok(e)
}

/// A parsed right-hand side ψ(x, u) with its exact symbolic partials.
#[derive(Debug, Clone)]
pub struct RhsSpec {
    pub n: usize,
    pub psi: Expr,
    pub psi_u: Expr,
    pub psi_x: Vec<Expr>,
    source: String,
}

impl RhsSpec {
    pub fn parse(text: &str, n: usize) -> Result<Self> {
        let psi = parse(text)?;
        let mut max_x = 0usize;
        collect_max_x(&psi, &mut max_x);
        if max_x > n {
            return Err(Error::Argument(format!("psi references x{max_x} but n = {n}")));
        }
        let psi_u = psi.differentiate(Var::U);
        let psi_x = (1..=n).map(|i| psi.differentiate(Var::X(i))).collect();
        Ok(RhsSpec { n, psi, psi_u, psi_x, source: text.to_string() })
    }

    /// Constant ψ ≡ c.
    pub fn constant(c: f64, n: usize) -> Self {
        RhsSpec {
            n,
            psi: Expr::Const(c),
            psi_u: Expr::Const(0.0),
            psi_x: vec![Expr::Const(0.0); n],
            source: format!("{c}"),
        }
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn eval(&self, x: &[f64], u: f64) -> Result<f64> {
        self.psi.eval(x, u)
    }

    pub fn eval_du(&self, x: &[f64], u: f64) -> Result<f64> {
        self.psi_u.eval(x, u)
    }

    pub fn eval_dx(&self, i: usize, x: &[f64], u: f64) -> Result<f64> {
        self.psi_x[i].eval(x, u)
    }
}

fn collect_max_x(e: &Expr, max: &mut usize) {
    match e {
        Expr::Var(Var::X(i)) => *max = (*max).max(*i),
        Expr::Unary(_, a) => collect_max_x(a, max),
        Expr::Binary(_, a, b) => {
            collect_max_x(a, max);
            collect_max_x(b, max);
        }
        _ => {}
    }
}
