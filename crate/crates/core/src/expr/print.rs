//! Pretty-printer emitting the same grammar the parser accepts.

use num::{BigRational, One, Signed};

use super::{Expr, JetVar};

const PREC_ADD: u8 = 1;
const PREC_MUL: u8 = 2;
const PREC_POW: u8 = 3;
const PREC_ATOM: u8 = 4;

pub(crate) fn var_name(v: JetVar) -> String {
    let base = v.family.name();
    match v.order {
        0 => base.to_string(),
        1..=3 => format!("{base}_{}", "s".repeat(v.order as usize)),
        m => format!("{base}[{m}]"),
    }
}

pub(crate) fn to_text(e: &Expr) -> String {
    let (neg, pos) = split_sign(e);
    if neg {
        format!("-{}", wrap(&pos, PREC_MUL))
    } else {
        show(e)
    }
}

fn rational_text(r: &BigRational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

fn precedence(e: &Expr) -> u8 {
    match e {
        Expr::Num(r) => {
            if r.is_negative() || !r.denom().is_one() {
                PREC_MUL
            } else {
                PREC_ATOM
            }
        }
        Expr::Var(_) | Expr::Func(..) => PREC_ATOM,
        Expr::Add(xs) => {
            if xs.len() == 1 {
                precedence(&xs[0])
            } else {
                PREC_ADD
            }
        }
        Expr::Mul(_) | Expr::Div(..) => PREC_MUL,
        Expr::Pow(..) => PREC_POW,
    }
}

/// Pulls a leading negative sign out of a term.
fn split_sign(e: &Expr) -> (bool, Expr) {
    match e {
        Expr::Num(r) if r.is_negative() => (true, Expr::Num(-r)),
        Expr::Mul(xs) => match xs.first() {
            Some(Expr::Num(r)) if r.is_negative() => {
                let r = -r;
                let mut rest: Vec<Expr> = xs[1..].to_vec();
                if !r.is_one() || rest.is_empty() {
                    rest.insert(0, Expr::Num(r));
                }
                let pos = if rest.len() == 1 {
                    rest.pop().unwrap()
                } else {
                    Expr::Mul(rest)
                };
                (true, pos)
            }
            _ => (false, e.clone()),
        },
        Expr::Div(a, b) => {
            let (neg, a) = split_sign(a);
            (neg, Expr::Div(Box::new(a), b.clone()))
        }
        _ => (false, e.clone()),
    }
}

fn wrap(e: &Expr, min: u8) -> String {
    let s = show(e);
    if precedence(e) < min {
        format!("({s})")
    } else {
        s
    }
}

fn show(e: &Expr) -> String {
    match e {
        Expr::Num(r) => rational_text(r),
        Expr::Var(v) => var_name(*v),
        Expr::Func(f, a) => format!("{}({})", f.name(), show(a)),
        Expr::Add(xs) => {
            let mut out = String::new();
            for (i, x) in xs.iter().enumerate() {
                let (neg, pos) = split_sign(x);
                let body = wrap(&pos, PREC_MUL);
                match (i, neg) {
                    (0, false) => out.push_str(&wrap(x, PREC_ADD + 1)),
                    (0, true) => {
                        out.push('-');
                        out.push_str(&body);
                    }
                    (_, false) => {
                        out.push_str(" + ");
                        out.push_str(&body);
                    }
                    (_, true) => {
                        out.push_str(" - ");
                        out.push_str(&body);
                    }
                }
            }
            out
        }
        Expr::Mul(xs) => {
            let parts: Vec<String> = xs
                .iter()
                .enumerate()
                .map(|(i, x)| match x {
                    // A leading non-negative fraction reads correctly unparenthesized.
                    Expr::Num(r) if i == 0 && !r.is_negative() => rational_text(r),
                    _ => wrap(x, PREC_POW),
                })
                .collect();
            parts.join("*")
        }
        Expr::Div(a, b) => {
            let num = match a.as_ref() {
                Expr::Num(r) if !r.is_negative() => rational_text(r),
                _ => wrap(a, PREC_MUL),
            };
            format!("{num}/{}", wrap(b, PREC_POW))
        }
        Expr::Pow(b, n) => {
            let base = wrap(b, PREC_ATOM);
            if *n < 0 {
                format!("{base}^({n})")
            } else {
                format!("{base}^{n}")
            }
        }
    }
}
