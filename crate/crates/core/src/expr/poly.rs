//! Canonical polynomial normal form behind `Expr::simplify`.
//!
//! A `Poly` is a sum of rational multiples of monomials. A monomial is a
//! product of atoms raised to nonzero integer powers. Atoms are jet variables,
//! unary functions of a canonical argument, and monic sums that only ever
//! appear with negative exponents (positive powers of sums are expanded).

use std::cmp::Ordering;
use std::collections::BTreeMap;

use num::{BigInt, BigRational, One, Signed, Zero};

use super::{Family, Func, JetVar};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub(crate) enum Atom {
    Var(JetVar),
    Func(Func, Box<Poly>),
    Sum(Box<Poly>),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub(crate) struct Monomial(pub(crate) Vec<(Atom, i64)>);

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub(crate) struct Poly {
    pub(crate) terms: BTreeMap<Monomial, BigRational>,
}

fn family_rank(f: Family) -> u8 {
    match f {
        Family::Kappa => 1,
        Family::Tau => 0,
    }
}

impl Monomial {
    pub(crate) fn one() -> Self {
        Monomial(Vec::new())
    }

    fn var_key(&self) -> Vec<(u8, u8, i64)> {
        let mut key: Vec<(u8, u8, i64)> = self
            .0
            .iter()
            .filter_map(|(a, e)| match a {
                Atom::Var(v) => Some((family_rank(v.family), v.order, *e)),
                _ => None,
            })
            .collect();
        key.sort_by(|a, b| (b.0, b.1).cmp(&(a.0, a.1)));
        key
    }

    fn mul(&self, other: &Monomial) -> Monomial {
        let mut map: BTreeMap<Atom, i64> = BTreeMap::new();
        for (a, e) in self.0.iter().chain(other.0.iter()) {
            *map.entry(a.clone()).or_insert(0) += e;
        }
        Monomial(map.into_iter().filter(|(_, e)| *e != 0).collect())
    }

    fn without(&self, idx: usize) -> Monomial {
        let mut v = self.0.clone();
        v.remove(idx);
        Monomial(v)
    }

    fn pow(&self, n: i64) -> Monomial {
        if n == 0 {
            return Monomial::one();
        }
        Monomial(self.0.iter().map(|(a, e)| (a.clone(), e * n)).collect())
    }
}

// Print order: terms with higher-order (kappa before tau) variables first,
// then larger exponents, then more variable factors; the constant term last.
impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        let ka = self.var_key();
        let kb = other.var_key();
        for (a, b) in ka.iter().zip(kb.iter()) {
            let c = (b.0, b.1).cmp(&(a.0, a.1));
            if c != Ordering::Equal {
                return c;
            }
            let c = b.2.cmp(&a.2);
            if c != Ordering::Equal {
                return c;
            }
        }
        let c = kb.len().cmp(&ka.len());
        if c != Ordering::Equal {
            return c;
        }
        self.0.cmp(&other.0)
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn rat(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

fn exact_sqrt(r: &BigRational) -> Option<BigRational> {
    if r.is_negative() {
        return None;
    }
    let n = r.numer().sqrt();
    let d = r.denom().sqrt();
    if &(&n * &n) == r.numer() && &(&d * &d) == r.denom() {
        Some(BigRational::new(n, d))
    } else {
        None
    }
}

impl Poly {
    pub(crate) fn zero() -> Self {
        Poly::default()
    }

    pub(crate) fn constant(c: BigRational) -> Self {
        let mut p = Poly::zero();
        if !c.is_zero() {
            p.terms.insert(Monomial::one(), c);
        }
        p
    }

    pub(crate) fn int(n: i64) -> Self {
        Poly::constant(rat(n))
    }

    pub(crate) fn monomial(m: Monomial, c: BigRational) -> Self {
        let mut p = Poly::zero();
        if !c.is_zero() {
            p.terms.insert(m, c);
        }
        p
    }

    pub(crate) fn atom(a: Atom, e: i64) -> Self {
        Poly::monomial(Monomial(vec![(a, e)]), BigRational::one())
    }

    pub(crate) fn var(v: JetVar) -> Self {
        Poly::atom(Atom::Var(v), 1)
    }

    pub(crate) fn func(f: Func, arg: Poly) -> Self {
        if let Some(c) = arg.as_constant() {
            let folded = match f {
                Func::Sin | Func::Sqrt if c.is_zero() => Some(BigRational::zero()),
                Func::Cos | Func::Exp if c.is_zero() => Some(BigRational::one()),
                Func::Sqrt => exact_sqrt(&c),
                _ => None,
            };
            if let Some(v) = folded {
                return Poly::constant(v);
            }
        }
        Poly::atom(Atom::Func(f, Box::new(arg)), 1)
    }

    pub(crate) fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub(crate) fn as_constant(&self) -> Option<BigRational> {
        match self.terms.len() {
            0 => Some(BigRational::zero()),
            1 => {
                let (m, c) = self.terms.iter().next().unwrap();
                m.0.is_empty().then(|| c.clone())
            }
            _ => None,
        }
    }

    fn add_term(&mut self, m: Monomial, c: BigRational) {
        if c.is_zero() {
            return;
        }
        let remove = {
            let entry = self.terms.entry(m.clone()).or_insert_with(BigRational::zero);
            *entry += c;
            entry.is_zero()
        };
        if remove {
            self.terms.remove(&m);
        }
    }

    pub(crate) fn add(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }

    pub(crate) fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.neg())
    }

    pub(crate) fn neg(&self) -> Poly {
        self.scale(&rat(-1))
    }

    pub(crate) fn scale(&self, k: &BigRational) -> Poly {
        if k.is_zero() {
            return Poly::zero();
        }
        Poly {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), c * k)).collect(),
        }
    }

    pub(crate) fn mul(&self, other: &Poly) -> Poly {
        let mut out = Poly::zero();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                out.add_term(ma.mul(mb), ca * cb);
            }
        }
        out
    }

    /// Integer power; negative exponents invert first.
    pub(crate) fn pow(&self, n: i64) -> Poly {
        if n < 0 {
            return self.inverse().pow(-n);
        }
        if let Some((m, c)) = self.single_term() {
            return Poly::monomial(m.pow(n), num::pow(c, n as usize));
        }
        let mut out = Poly::int(1);
        for _ in 0..n {
            out = out.mul(self);
        }
        out
    }

    fn single_term(&self) -> Option<(Monomial, BigRational)> {
        if self.terms.len() == 1 {
            let (m, c) = self.terms.iter().next().unwrap();
            Some((m.clone(), c.clone()))
        } else {
            None
        }
    }

    /// Multiplicative inverse. Monomials invert exactly; genuine sums become a
    /// monic `Sum` atom with exponent -1 carrying the leading coefficient out.
    pub(crate) fn inverse(&self) -> Poly {
        if let Some((m, c)) = self.single_term() {
            return expand_positive_sums(m.pow(-1), c.recip());
        }
        if self.is_zero() {
            // Symbolic 1/0; evaluation reports it as a division by zero.
            return Poly::atom(Atom::Sum(Box::new(Poly::zero())), -1);
        }
        let lead = self.terms.values().next().unwrap().clone();
        let monic = self.scale(&lead.recip());
        Poly::atom(Atom::Sum(Box::new(monic)), -1).scale(&lead.recip())
    }

    /// Generic derivation: `datom` gives the derivative of a single atom.
    pub(crate) fn derive(&self, datom: &dyn Fn(&Atom) -> Poly) -> Poly {
        let mut out = Poly::zero();
        for (m, c) in &self.terms {
            for (i, (a, e)) in m.0.iter().enumerate() {
                let da = datom(a);
                if da.is_zero() {
                    continue;
                }
                let mut rest = m.without(i);
                if *e != 1 {
                    rest = rest.mul(&Monomial(vec![(a.clone(), e - 1)]));
                }
                let factor = Poly::monomial(rest, c * rat(*e));
                out = out.add(&factor.mul(&da));
            }
        }
        out
    }

    pub(crate) fn total_derivative(&self) -> Poly {
        self.derive(&|a| d_atom_total(a))
    }

    pub(crate) fn partial(&self, v: JetVar) -> Poly {
        self.derive(&|a| d_atom_partial(a, v))
    }

    pub(crate) fn visit_vars(&self, f: &mut dyn FnMut(JetVar)) {
        for m in self.terms.keys() {
            for (a, _) in &m.0 {
                match a {
                    Atom::Var(v) => f(*v),
                    Atom::Func(_, p) | Atom::Sum(p) => p.visit_vars(f),
                }
            }
        }
    }
}

// Sum atoms may only carry negative exponents; anything positive is multiplied out.
fn expand_positive_sums(m: Monomial, c: BigRational) -> Poly {
    let (sums, rest): (Vec<_>, Vec<_>) = m
        .0
        .into_iter()
        .partition(|(a, e)| matches!(a, Atom::Sum(_)) && *e > 0);
    let mut out = Poly::monomial(Monomial(rest), c);
    for (a, e) in sums {
        if let Atom::Sum(p) = a {
            out = out.mul(&p.pow(e));
        }
    }
    out
}

fn d_func(f: Func, arg: &Poly, darg: Poly) -> Poly {
    if darg.is_zero() {
        return Poly::zero();
    }
    let outer = match f {
        Func::Sin => Poly::func(Func::Cos, arg.clone()),
        Func::Cos => Poly::func(Func::Sin, arg.clone()).neg(),
        Func::Exp => Poly::func(Func::Exp, arg.clone()),
        Func::Sqrt => Poly::func(Func::Sqrt, arg.clone())
            .inverse()
            .scale(&BigRational::new(1.into(), 2.into())),
    };
    outer.mul(&darg)
}

fn d_atom_total(a: &Atom) -> Poly {
    match a {
        Atom::Var(v) => Poly::var(JetVar {
            family: v.family,
            order: v.order + 1,
        }),
        Atom::Func(f, arg) => d_func(*f, arg, arg.total_derivative()),
        Atom::Sum(p) => p.total_derivative(),
    }
}

fn d_atom_partial(a: &Atom, v: JetVar) -> Poly {
    match a {
        Atom::Var(w) => {
            if *w == v {
                Poly::int(1)
            } else {
                Poly::zero()
            }
        }
        Atom::Func(f, arg) => d_func(*f, arg, arg.partial(v)),
        Atom::Sum(p) => p.partial(v),
    }
}
