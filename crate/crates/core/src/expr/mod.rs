//! Symbolic expressions over the jet coordinates of curvature and torsion.

mod calculus;
mod eval;
mod parse;
mod poly;
mod print;

use std::fmt;

use num::{BigInt, BigRational, One};

pub use calculus::{d_s, d_s_n, euler_operator, lambda_se2, lambda_se3, partial};
pub use eval::{evaluate, Compiled, EvalError, InvariantJet};
pub use parse::{parse, parse_lagrangian, Group, Lagrangian, ParseError, MAX_JET_ORDER};

use poly::{Atom, Monomial, Poly};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    Kappa,
    Tau,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Kappa => "kappa",
            Family::Tau => "tau",
        }
    }
}

/// `family` differentiated `order` times with respect to arc length.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct JetVar {
    pub family: Family,
    pub order: u8,
}

impl JetVar {
    pub fn kappa(order: u8) -> Self {
        JetVar {
            family: Family::Kappa,
            order,
        }
    }

    pub fn tau(order: u8) -> Self {
        JetVar {
            family: Family::Tau,
            order,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Sqrt,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
        }
    }

    pub(crate) fn apply(self, x: f64) -> f64 {
        match self {
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Exp => x.exp(),
            Func::Sqrt => x.sqrt(),
        }
    }
}

/// Expression tree. Constants are exact rationals; floats only appear at
/// evaluation time.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Expr {
    Num(BigRational),
    Var(JetVar),
    Add(Vec<Expr>),
    Mul(Vec<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i64),
    Func(Func, Box<Expr>),
}

/// Highest derivative order referenced per family (`None` when absent).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct MaxOrders {
    pub kappa: Option<u8>,
    pub tau: Option<u8>,
}

impl MaxOrders {
    pub fn get(&self, f: Family) -> Option<u8> {
        match f {
            Family::Kappa => self.kappa,
            Family::Tau => self.tau,
        }
    }

    pub fn merge(self, other: MaxOrders) -> MaxOrders {
        MaxOrders {
            kappa: self.kappa.max(other.kappa),
            tau: self.tau.max(other.tau),
        }
    }

    fn note(&mut self, v: JetVar) {
        let slot = match v.family {
            Family::Kappa => &mut self.kappa,
            Family::Tau => &mut self.tau,
        };
        *slot = (*slot).max(Some(v.order));
    }
}

impl Expr {
    pub fn int(n: i64) -> Expr {
        Expr::Num(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn rational(n: i64, d: i64) -> Expr {
        Expr::Num(BigRational::new(BigInt::from(n), BigInt::from(d)))
    }

    pub fn var(v: JetVar) -> Expr {
        Expr::Var(v)
    }

    pub fn kappa(order: u8) -> Expr {
        Expr::Var(JetVar::kappa(order))
    }

    pub fn tau(order: u8) -> Expr {
        Expr::Var(JetVar::tau(order))
    }

    pub fn pow(self, n: i64) -> Expr {
        Expr::Pow(Box::new(self), n)
    }

    pub fn func(f: Func, arg: Expr) -> Expr {
        Expr::Func(f, Box::new(arg))
    }

    /// Canonical polynomial normal form. Idempotent.
    pub fn simplify(&self) -> Expr {
        from_poly(&to_poly(self))
    }

    /// True when the expression simplifies to the constant zero.
    pub fn is_zero(&self) -> bool {
        to_poly(self).is_zero()
    }

    pub fn as_rational(&self) -> Option<BigRational> {
        to_poly(self).as_constant()
    }

    pub fn max_orders(&self) -> MaxOrders {
        let mut mo = MaxOrders::default();
        self.visit_vars(&mut |v| mo.note(v));
        mo
    }

    pub fn contains_family(&self, f: Family) -> bool {
        self.max_orders().get(f).is_some()
    }

    fn visit_vars(&self, f: &mut dyn FnMut(JetVar)) {
        match self {
            Expr::Num(_) => {}
            Expr::Var(v) => f(*v),
            Expr::Add(xs) | Expr::Mul(xs) => xs.iter().for_each(|x| x.visit_vars(f)),
            Expr::Div(a, b) => {
                a.visit_vars(f);
                b.visit_vars(f);
            }
            Expr::Pow(b, _) | Expr::Func(_, b) => b.visit_vars(f),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print::to_text(self))
    }
}

macro_rules! binop {
    ($tr:ident, $m:ident, $build:expr) => {
        impl std::ops::$tr for Expr {
            type Output = Expr;
            fn $m(self, rhs: Expr) -> Expr {
                let build: fn(Expr, Expr) -> Expr = $build;
                build(self, rhs)
            }
        }
    };
}

binop!(Add, add, |a, b| Expr::Add(vec![a, b]));
binop!(Sub, sub, |a, b| Expr::Add(vec![a, Expr::Mul(vec![Expr::int(-1), b])]));
binop!(Mul, mul, |a, b| Expr::Mul(vec![a, b]));
binop!(Div, div, |a, b| Expr::Div(Box::new(a), Box::new(b)));

impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::Mul(vec![Expr::int(-1), self])
    }
}

pub(crate) fn to_poly(e: &Expr) -> Poly {
    match e {
        Expr::Num(r) => Poly::constant(r.clone()),
        Expr::Var(v) => Poly::var(*v),
        Expr::Add(xs) => xs.iter().fold(Poly::zero(), |acc, x| acc.add(&to_poly(x))),
        Expr::Mul(xs) => xs.iter().fold(Poly::int(1), |acc, x| acc.mul(&to_poly(x))),
        Expr::Div(a, b) => to_poly(a).mul(&inverse_of(b)),
        Expr::Pow(b, n) => {
            if *n >= 0 {
                to_poly(b).pow(*n)
            } else {
                inverse_of(b).pow(-*n)
            }
        }
        Expr::Func(f, a) => Poly::func(*f, to_poly(a)),
    }
}

// Inversion that follows the tree structure so a printed denominator such as
// `(kappa + tau)^2*kappa` maps back onto the same atoms instead of expanding.
fn inverse_of(e: &Expr) -> Poly {
    match e {
        Expr::Mul(xs) => xs.iter().fold(Poly::int(1), |acc, x| acc.mul(&inverse_of(x))),
        Expr::Pow(b, n) => {
            if *n >= 0 {
                inverse_of(b).pow(*n)
            } else {
                to_poly(b).pow(-*n)
            }
        }
        Expr::Div(a, b) => inverse_of(a).mul(&to_poly(b)),
        _ => to_poly(e).inverse(),
    }
}

pub(crate) fn from_poly(p: &Poly) -> Expr {
    let mut terms: Vec<Expr> = p.terms.iter().map(|(m, c)| term_expr(m, c)).collect();
    match terms.len() {
        0 => Expr::int(0),
        1 => terms.pop().unwrap(),
        _ => Expr::Add(terms),
    }
}

fn atom_expr(a: &Atom) -> Expr {
    match a {
        Atom::Var(v) => Expr::Var(*v),
        Atom::Func(f, arg) => Expr::Func(*f, Box::new(from_poly(arg))),
        Atom::Sum(p) => from_poly(p),
    }
}

fn powered(a: &Atom, e: i64) -> Expr {
    let base = atom_expr(a);
    if e == 1 {
        base
    } else {
        Expr::Pow(Box::new(base), e)
    }
}

fn product(mut xs: Vec<Expr>) -> Expr {
    match xs.len() {
        0 => Expr::int(1),
        1 => xs.pop().unwrap(),
        _ => Expr::Mul(xs),
    }
}

fn term_expr(m: &Monomial, c: &BigRational) -> Expr {
    let mut num = Vec::new();
    let mut den = Vec::new();
    for (a, e) in &m.0 {
        if *e > 0 {
            num.push(powered(a, *e));
        } else {
            den.push(powered(a, -*e));
        }
    }
    if !c.is_one() || num.is_empty() {
        num.insert(0, Expr::Num(c.clone()));
    }
    let numer = product(num);
    if den.is_empty() {
        numer
    } else {
        Expr::Div(Box::new(numer), Box::new(product(den)))
    }
}
