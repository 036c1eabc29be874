//! Numeric evaluation against jet values, via a compiled stack program.

use num::ToPrimitive;
use thiserror::Error;

use super::{print, Expr, Family, Func, MaxOrders};

/// Numeric values of the curvature (and torsion) jets at one arc-length point.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct InvariantJet {
    pub kappa: Vec<f64>,
    pub tau: Vec<f64>,
    pub s: f64,
}

impl InvariantJet {
    pub fn new(kappa: Vec<f64>, tau: Vec<f64>, s: f64) -> Self {
        InvariantJet { kappa, tau, s }
    }

    pub fn planar(kappa: Vec<f64>) -> Self {
        InvariantJet {
            kappa,
            tau: Vec::new(),
            s: 0.0,
        }
    }

    pub fn family(&self, f: Family) -> &[f64] {
        match f {
            Family::Kappa => &self.kappa,
            Family::Tau => &self.tau,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("jet is missing {family} derivative of order {order} (has {available})")]
    MissingJetOrder {
        family: &'static str,
        order: u8,
        available: usize,
    },
    #[error("division by zero in `{subexpression}`")]
    DivisionByZero { subexpression: String },
}

#[derive(Clone, Debug)]
enum Op {
    Const(f64),
    Var(Family, u8),
    Add(usize),
    Mul(usize),
    Div(usize),
    Powi(i32, usize),
    Func(Func),
}

/// An expression flattened to postfix form for repeated evaluation.
#[derive(Clone, Debug)]
pub struct Compiled {
    ops: Vec<Op>,
    labels: Vec<String>,
    orders: MaxOrders,
    text: String,
}

impl Compiled {
    pub fn new(e: &Expr) -> Self {
        let mut c = Compiled {
            ops: Vec::new(),
            labels: Vec::new(),
            orders: e.max_orders(),
            text: e.to_string(),
        };
        c.emit(e);
        c
    }

    pub fn orders(&self) -> MaxOrders {
        self.orders
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    fn label(&mut self, e: &Expr) -> usize {
        self.labels.push(print::to_text(e));
        self.labels.len() - 1
    }

    fn emit(&mut self, e: &Expr) {
        match e {
            Expr::Num(r) => self.ops.push(Op::Const(r.to_f64().unwrap_or(f64::NAN))),
            Expr::Var(v) => self.ops.push(Op::Var(v.family, v.order)),
            Expr::Add(xs) => {
                xs.iter().for_each(|x| self.emit(x));
                self.ops.push(Op::Add(xs.len()));
            }
            Expr::Mul(xs) => {
                xs.iter().for_each(|x| self.emit(x));
                self.ops.push(Op::Mul(xs.len()));
            }
            Expr::Div(a, b) => {
                self.emit(a);
                self.emit(b);
                let l = self.label(b);
                self.ops.push(Op::Div(l));
            }
            Expr::Pow(b, n) => {
                self.emit(b);
                let l = self.label(b);
                self.ops.push(Op::Powi(*n as i32, l));
            }
            Expr::Func(f, a) => {
                self.emit(a);
                self.ops.push(Op::Func(*f));
            }
        }
    }

    pub fn eval(&self, jet: &InvariantJet) -> Result<f64, EvalError> {
        let mut stack: Vec<f64> = Vec::with_capacity(16);
        for op in &self.ops {
            match op {
                Op::Const(c) => stack.push(*c),
                Op::Var(f, m) => {
                    let vals = jet.family(*f);
                    let v = vals.get(*m as usize).ok_or(EvalError::MissingJetOrder {
                        family: f.name(),
                        order: *m,
                        available: vals.len(),
                    })?;
                    stack.push(*v);
                }
                Op::Add(n) => {
                    let start = stack.len() - n;
                    let s: f64 = stack.drain(start..).sum();
                    stack.push(s);
                }
                Op::Mul(n) => {
                    let start = stack.len() - n;
                    let p: f64 = stack.drain(start..).product();
                    stack.push(p);
                }
                Op::Div(l) => {
                    let b = stack.pop().unwrap();
                    let a = stack.pop().unwrap();
                    if b == 0.0 {
                        return Err(self.div_zero(*l));
                    }
                    stack.push(a / b);
                }
                Op::Powi(n, l) => {
                    let b = stack.pop().unwrap();
                    if *n < 0 && b == 0.0 {
                        return Err(self.div_zero(*l));
                    }
                    stack.push(b.powi(*n));
                }
                Op::Func(f) => {
                    let a = stack.pop().unwrap();
                    stack.push(f.apply(a));
                }
            }
        }
        Ok(stack.pop().unwrap_or(0.0))
    }

    fn div_zero(&self, l: usize) -> EvalError {
        EvalError::DivisionByZero {
            subexpression: self.labels[l].clone(),
        }
    }
}

/// One-shot evaluation. Prefer [`Compiled`] in loops.
pub fn evaluate(e: &Expr, jet: &InvariantJet) -> Result<f64, EvalError> {
    Compiled::new(e).eval(jet)
}
