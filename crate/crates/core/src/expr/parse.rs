//! Recursive-descent parser for Lagrangian text.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := ('-' | '+') unary | power
//! power  := atom ('^' int)?            int := ['-'] digits | '(' ['-'] digits ')'
//! atom   := number | jetvar | func '(' expr ')' | '(' expr ')'
//! jetvar := ('kappa' | 'tau') ('_' 's'+ | '[' digits ']')?
//! ```

use num::{BigInt, BigRational};
use thiserror::Error;

use super::{Expr, Family, Func, JetVar, MaxOrders};

pub const MAX_JET_ORDER: u8 = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Group {
    Se2,
    Se3,
}

impl Group {
    pub fn name(self) -> &'static str {
        match self {
            Group::Se2 => "se2",
            Group::Se3 => "se3",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("derivative order {order} of {family} at byte {offset} exceeds the maximum {MAX_JET_ORDER}")]
    OrderTooHigh {
        family: &'static str,
        order: u32,
        offset: usize,
    },
    #[error("tau at byte {offset} is not available for SE(2)")]
    TauNotAllowed { offset: usize },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Syntax { offset, .. }
            | ParseError::UnknownIdentifier { offset, .. }
            | ParseError::OrderTooHigh { offset, .. }
            | ParseError::TauNotAllowed { offset } => *offset,
        }
    }
}

/// A parsed, simplified Lagrangian together with its jet orders.
#[derive(Clone, Debug, PartialEq)]
pub struct Lagrangian {
    pub expr: Expr,
    pub orders: MaxOrders,
}

/// Parses and simplifies an expression.
pub fn parse(text: &str) -> Result<Expr, ParseError> {
    Ok(parse_raw(text, None)?.simplify())
}

/// Parses a Lagrangian for `group`; `tau` is rejected for SE(2).
pub fn parse_lagrangian(text: &str, group: Group) -> Result<Lagrangian, ParseError> {
    let expr = parse_raw(text, Some(group))?.simplify();
    let orders = expr.max_orders();
    Ok(Lagrangian { expr, orders })
}

fn parse_raw(text: &str, group: Option<Group>) -> Result<Expr, ParseError> {
    let mut p = Parser {
        src: text.as_bytes(),
        pos: 0,
        group,
    };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos < p.src.len() {
        return Err(p.syntax(p.pos, "unexpected trailing input"));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    group: Option<Group>,
}

impl Parser<'_> {
    fn syntax(&self, offset: usize, msg: &str) -> ParseError {
        ParseError::Syntax {
            offset,
            message: msg.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expect(&mut self, c: u8) -> Result<(), ParseError> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.syntax(self.pos, &format!("expected `{}`", c as char)))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut terms = vec![self.term()?];
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    terms.push(self.term()?);
                }
                Some(b'-') => {
                    self.pos += 1;
                    terms.push(-self.term()?);
                }
                _ => break,
            }
        }
        Ok(if terms.len() == 1 {
            terms.pop().unwrap()
        } else {
            Expr::Add(terms)
        })
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.unary()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    acc = acc * self.unary()?;
                }
                Some(b'/') => {
                    self.pos += 1;
                    acc = acc / self.unary()?;
                }
                _ => break,
            }
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                Ok(-self.unary()?)
            }
            Some(b'+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let n = self.exponent()?;
            return Ok(base.pow(n));
        }
        Ok(base)
    }

    fn exponent(&mut self) -> Result<i64, ParseError> {
        let paren = self.peek() == Some(b'(');
        if paren {
            self.pos += 1;
        }
        let neg = self.peek() == Some(b'-');
        if neg {
            self.pos += 1;
        }
        self.skip_ws();
        let start = self.pos;
        let digits = self.digits();
        if digits.is_empty() {
            return Err(self.syntax(start, "expected an integer exponent"));
        }
        let n: i64 = digits
            .parse()
            .map_err(|_| self.syntax(start, "exponent out of range"))?;
        if self.src.get(self.pos) == Some(&b'.') {
            return Err(self.syntax(self.pos, "only integer exponents are supported"));
        }
        if paren {
            self.expect(b')')?;
        }
        Ok(if neg { -n } else { n })
    }

    fn digits(&mut self) -> String {
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        String::from_utf8_lossy(&self.src[start..self.pos]).into_owned()
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            None => Err(self.syntax(self.pos, "unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.identifier(),
            Some(c) => Err(self.syntax(self.pos, &format!("unexpected `{}`", c as char))),
        }
    }

    // Decimal literals become exact rationals: 0.25 -> 1/4, 1e-3 -> 1/1000.
    fn number(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        let int_part = self.digits();
        let mut frac = String::new();
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            frac = self.digits();
        }
        if int_part.is_empty() && frac.is_empty() {
            return Err(self.syntax(start, "malformed number"));
        }
        let mut exp10: i64 = -(frac.len() as i64);
        if matches!(self.src.get(self.pos), Some(b'e') | Some(b'E')) {
            let epos = self.pos;
            self.pos += 1;
            let neg = match self.src.get(self.pos) {
                Some(b'-') => {
                    self.pos += 1;
                    true
                }
                Some(b'+') => {
                    self.pos += 1;
                    false
                }
                _ => false,
            };
            let d = self.digits();
            if d.is_empty() {
                return Err(self.syntax(epos, "malformed exponent"));
            }
            let e: i64 = d
                .parse()
                .map_err(|_| self.syntax(epos, "exponent out of range"))?;
            exp10 += if neg { -e } else { e };
        }
        let mantissa: BigInt = format!("{int_part}{frac}")
            .parse()
            .map_err(|_| self.syntax(start, "malformed number"))?;
        let ten = BigInt::from(10);
        let value = if exp10 >= 0 {
            BigRational::from_integer(mantissa * num::pow(ten, exp10 as usize))
        } else {
            BigRational::new(mantissa, num::pow(ten, (-exp10) as usize))
        };
        Ok(Expr::Num(value))
    }

    fn identifier(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphabetic() {
            self.pos += 1;
        }
        let name = String::from_utf8_lossy(&self.src[start..self.pos]).into_owned();
        let family = match name.as_str() {
            "kappa" => Family::Kappa,
            "tau" => Family::Tau,
            "sin" | "cos" | "exp" | "sqrt" => {
                let f = match name.as_str() {
                    "sin" => Func::Sin,
                    "cos" => Func::Cos,
                    "exp" => Func::Exp,
                    _ => Func::Sqrt,
                };
                self.expect(b'(')?;
                let arg = self.expr()?;
                self.expect(b')')?;
                return Ok(Expr::func(f, arg));
            }
            _ => {
                // Swallow trailing identifier characters so the name is reported whole.
                while self.pos < self.src.len()
                    && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                let name = String::from_utf8_lossy(&self.src[start..self.pos]).into_owned();
                return Err(ParseError::UnknownIdentifier {
                    name,
                    offset: start,
                });
            }
        };
        if family == Family::Tau && self.group == Some(Group::Se2) {
            return Err(ParseError::TauNotAllowed { offset: start });
        }
        let order: u32 = match self.src.get(self.pos) {
            Some(b'_') => {
                self.pos += 1;
                let s_start = self.pos;
                while self.src.get(self.pos) == Some(&b's') {
                    self.pos += 1;
                }
                if self.pos == s_start {
                    return Err(self.syntax(self.pos, "expected `s` after `_`"));
                }
                (self.pos - s_start) as u32
            }
            Some(b'[') => {
                self.pos += 1;
                let d_start = self.pos;
                let d = self.digits();
                if d.is_empty() {
                    return Err(self.syntax(d_start, "expected a derivative order"));
                }
                let m: u32 = d.parse().unwrap_or(u32::MAX);
                if self.src.get(self.pos) != Some(&b']') {
                    return Err(self.syntax(self.pos, "expected `]`"));
                }
                self.pos += 1;
                m
            }
            _ => 0,
        };
        if let Some(c) = self.src.get(self.pos) {
            if c.is_ascii_alphanumeric() || *c == b'_' {
                return Err(self.syntax(self.pos, "malformed derivative suffix"));
            }
        }
        if order > MAX_JET_ORDER as u32 {
            return Err(ParseError::OrderTooHigh {
                family: family.name(),
                order,
                offset: start,
            });
        }
        Ok(Expr::Var(JetVar {
            family,
            order: order as u8,
        }))
    }
}
