//! Implicit-surface expressions: a small recursive-descent parser and its AST.
//!
//! Grammar (EBNF, whitespace ignored):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := '-' factor | power
//! power  := base ('^' int)*          (right-associative, integer exponents only)
//! base   := number | ident | ident '(' expr ')' | '(' expr ')'
//! ```
//!
//! `^` binds tighter than unary minus, so `-x^2` is `-(x^2)`.
//! Variables are `x`, `y`, `z` or `x1`..`x4`; every other bare identifier is a
//! named parameter that must be bound before evaluation.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};

/// Parameter bindings, e.g. `R = 2`, `r = 1`.
pub type Bindings = BTreeMap<String, f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sqrt,
    Sin,
    Cos,
    Exp,
    Log,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sqrt" => Func::Sqrt,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Sqrt => "sqrt",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expression {
    Num(f64),
    /// Coordinate variable by index (`x` = 0, `y` = 1, `z` = 2, `x4` = 3).
    Var(usize),
    Param(String),
    Neg(Box<Expression>),
    Binary(BinOp, Box<Expression>, Box<Expression>),
    Pow(Box<Expression>, i32),
    Call(Func, Box<Expression>),
}

const MAX_EXPONENT: i64 = 10_000;

fn variable_index(name: &str) -> Option<usize> {
    match name {
        "x" | "x1" => Some(0),
        "y" | "x2" => Some(1),
        "z" | "x3" => Some(2),
        "x4" => Some(3),
        _ => None,
    }
}

pub fn parse_expression(text: &str) -> Result<Expression> {
    if text.trim().is_empty() {
        return Err(Error::Syntax {
            offset: 0,
            expected: "expression".into(),
        });
    }
    let tokens = lex(text)?;
    let mut parser = Parser { tokens, pos: 0 };
    let expr = parser.expr()?;
    match parser.peek() {
        Tok::End => Ok(expr),
        _ => Err(parser.unexpected("operator or end of input")),
    }
}

impl Expression {
    /// Largest variable index referenced plus one.
    pub fn min_dimension(&self) -> usize {
        match self {
            Expression::Num(_) | Expression::Param(_) => 0,
            Expression::Var(i) => i + 1,
            Expression::Neg(a) | Expression::Pow(a, _) | Expression::Call(_, a) => a.min_dimension(),
            Expression::Binary(_, a, b) => a.min_dimension().max(b.min_dimension()),
        }
    }

    /// Names of all free parameters, sorted and deduplicated.
    pub fn parameters(&self) -> Vec<String> {
        fn walk(e: &Expression, out: &mut Vec<String>) {
            match e {
                Expression::Param(p) => out.push(p.clone()),
                Expression::Num(_) | Expression::Var(_) => {}
                Expression::Neg(a) | Expression::Pow(a, _) | Expression::Call(_, a) => walk(a, out),
                Expression::Binary(_, a, b) => {
                    walk(a, out);
                    walk(b, out);
                }
            }
        }
        let mut out = Vec::new();
        walk(self, &mut out);
        out.sort();
        out.dedup();
        out
    }

    /// Checks that every identifier is a variable below `dim` or a bound parameter.
    pub fn check_bindings(&self, dim: usize, params: &Bindings) -> Result<()> {
        if self.min_dimension() > dim {
            return Err(Error::UnknownIdentifier {
                name: format!("x{}", self.min_dimension()),
                offset: 0,
            });
        }
        for p in self.parameters() {
            if !params.contains_key(&p) {
                return Err(Error::UnknownIdentifier { name: p, offset: 0 });
            }
        }
        Ok(())
    }

    /// Plain `f64` evaluation.
    pub fn eval(&self, point: &[f64], params: &Bindings) -> Result<f64> {
        Ok(match self {
            Expression::Num(v) => *v,
            Expression::Var(i) => *point.get(*i).ok_or_else(|| Error::UnknownIdentifier {
                name: format!("x{}", i + 1),
                offset: 0,
            })?,
            Expression::Param(p) => *params.get(p).ok_or_else(|| Error::UnknownIdentifier {
                name: p.clone(),
                offset: 0,
            })?,
            Expression::Neg(a) => -a.eval(point, params)?,
            Expression::Binary(op, a, b) => {
                let (a, b) = (a.eval(point, params)?, b.eval(point, params)?);
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b == 0.0 {
                            return Err(Error::DivisionByZeroLeadingTerm);
                        }
                        a / b
                    }
                }
            }
            Expression::Pow(a, n) => a.eval(point, params)?.powi(*n),
            Expression::Call(f, a) => {
                let v = a.eval(point, params)?;
                match f {
                    Func::Sqrt if v < 0.0 => return Err(Error::Domain(format!("sqrt of {v}"))),
                    Func::Log if v <= 0.0 => return Err(Error::Domain(format!("log of {v}"))),
                    Func::Sqrt => v.sqrt(),
                    Func::Sin => v.sin(),
                    Func::Cos => v.cos(),
                    Func::Exp => v.exp(),
                    Func::Log => v.ln(),
                }
            }
        })
    }
}

fn var_name(i: usize) -> String {
    match i {
        0 => "x".into(),
        1 => "y".into(),
        2 => "z".into(),
        _ => format!("x{}", i + 1),
    }
}

/// Unparse with enough parentheses that re-parsing yields the same tree.
impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expression::Num(v) => write!(f, "{v:?}"),
            Expression::Var(i) => write!(f, "{}", var_name(*i)),
            Expression::Param(p) => write!(f, "{p}"),
            Expression::Neg(a) => match **a {
                Expression::Binary(..) => write!(f, "-({a})"),
                _ => write!(f, "-{a}"),
            },
            Expression::Binary(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            Expression::Pow(a, n) => match **a {
                Expression::Num(_) | Expression::Var(_) | Expression::Param(_) | Expression::Call(..) => {
                    write!(f, "{a}^{n}")
                }
                _ => write!(f, "({a})^{n}"),
            },
            Expression::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num { value: f64, integral: bool },
    Ident(String),
    Op(char),
    End,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    offset: usize,
}

fn lex(text: &str) -> Result<Vec<Token>> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() || c == '.' {
            let mut integral = true;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            if i < bytes.len() && bytes[i] == b'.' {
                integral = false;
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
                    integral = false;
                    i = j;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let lexeme = &text[start..i];
            let value: f64 = lexeme.parse().map_err(|_| Error::Syntax {
                offset: start,
                expected: "number".into(),
            })?;
            out.push(Token {
                tok: Tok::Num { value, integral },
                offset: start,
            });
        } else if c.is_ascii_alphabetic() || c == '_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push(Token {
                tok: Tok::Ident(text[start..i].to_string()),
                offset: start,
            });
        } else if "+-*/^()".contains(c) {
            i += 1;
            out.push(Token { tok: Tok::Op(c), offset: start });
        } else {
            return Err(Error::Syntax {
                offset: start,
                expected: "number, identifier, operator or parenthesis".into(),
            });
        }
    }
    out.push(Token {
        tok: Tok::End,
        offset: text.len(),
    });
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn offset(&self) -> usize {
        self.tokens[self.pos].offset
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self, expected: &str) -> Error {
        Error::Syntax {
            offset: self.offset(),
            expected: expected.into(),
        }
    }

    fn expr(&mut self) -> Result<Expression> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Op('+') => BinOp::Add,
                Tok::Op('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expression::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expression> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.peek() {
                Tok::Op('*') => BinOp::Mul,
                Tok::Op('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.factor()?;
            lhs = Expression::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn factor(&mut self) -> Result<Expression> {
        if let Tok::Op('-') = self.peek() {
            self.bump();
            let inner = self.factor()?;
            return Ok(Expression::Neg(Box::new(inner)));
        }
        let base = self.base()?;
        if let Tok::Op('^') = self.peek() {
            self.bump();
            let n = self.exponent()?;
            return Ok(Expression::Pow(Box::new(base), n));
        }
        Ok(base)
    }

    /// Integer exponent, possibly signed, possibly chained right-associatively.
    fn exponent(&mut self) -> Result<i32> {
        let negative = if let Tok::Op('-') = self.peek() {
            self.bump();
            true
        } else {
            false
        };
        let offset = self.offset();
        let value = match self.peek().clone() {
            Tok::Num { value, integral } => {
                if !integral && value.fract() != 0.0 {
                    return Err(Error::NonIntegerExponent { offset });
                }
                self.bump();
                value as i64
            }
            Tok::Ident(_) | Tok::Op('(') => return Err(Error::NonIntegerExponent { offset }),
            _ => return Err(self.unexpected("integer exponent")),
        };
        let mut value = if negative { -value } else { value };
        if let Tok::Op('^') = self.peek() {
            self.bump();
            let inner = self.exponent()?;
            if inner < 0 && value.abs() != 1 {
                return Err(Error::NonIntegerExponent { offset });
            }
            value = (value as f64).powi(inner) as i64;
        }
        if value.abs() > MAX_EXPONENT {
            return Err(Error::Syntax {
                offset,
                expected: format!("exponent with magnitude at most {MAX_EXPONENT}"),
            });
        }
        Ok(value as i32)
    }

    fn base(&mut self) -> Result<Expression> {
        let token = self.bump();
        match token.tok {
            Tok::Num { value, .. } => Ok(Expression::Num(value)),
            Tok::Op('(') => {
                let inner = self.expr()?;
                match self.peek() {
                    Tok::Op(')') => {
                        self.bump();
                        Ok(inner)
                    }
                    _ => Err(self.unexpected("`)`")),
                }
            }
            Tok::Ident(name) => {
                if let Tok::Op('(') = self.peek() {
                    let func = Func::from_name(&name).ok_or(Error::UnknownIdentifier {
                        name: name.clone(),
                        offset: token.offset,
                    })?;
                    self.bump();
                    let arg = self.expr()?;
                    return match self.peek() {
                        Tok::Op(')') => {
                            self.bump();
                            Ok(Expression::Call(func, Box::new(arg)))
                        }
                        _ => Err(self.unexpected("`)`")),
                    };
                }
                if Func::from_name(&name).is_some() {
                    return Err(self.unexpected("`(` after function name"));
                }
                Ok(match variable_index(&name) {
                    Some(i) => Expression::Var(i),
                    None => Expression::Param(name),
                })
            }
            _ => Err(Error::Syntax {
                offset: token.offset,
                expected: "number, identifier, `(` or `-`".into(),
            }),
        }
    }
}
