//! Total derivative, partial derivatives, Euler operator and the Lagrange
//! multiplier formulas.

use num::{BigInt, BigRational};

use super::poly::Poly;
use super::{from_poly, to_poly, Expr, Family, JetVar};

/// Total arc-length derivative: `kappa_m -> kappa_{m+1}` with product and chain rules.
pub fn d_s(e: &Expr) -> Expr {
    from_poly(&to_poly(e).total_derivative())
}

pub fn d_s_n(e: &Expr, n: usize) -> Expr {
    let mut p = to_poly(e);
    for _ in 0..n {
        p = p.total_derivative();
    }
    from_poly(&p)
}

pub fn partial(e: &Expr, v: JetVar) -> Expr {
    from_poly(&to_poly(e).partial(v))
}

fn sign(m: usize) -> BigRational {
    BigRational::from_integer(BigInt::from(if m % 2 == 0 { 1 } else { -1 }))
}

fn ds_pow(p: &Poly, n: usize) -> Poly {
    (0..n).fold(p.clone(), |acc, _| acc.total_derivative())
}

fn max_order(p: &Poly, f: Family) -> Option<u8> {
    let mut m = None;
    p.visit_vars(&mut |v| {
        if v.family == f {
            m = m.max(Some(v.order));
        }
    });
    m
}

pub(crate) fn euler_poly(l: &Poly, f: Family) -> Poly {
    let Some(top) = max_order(l, f) else {
        return Poly::zero();
    };
    let mut out = Poly::zero();
    for m in 0..=top as usize {
        let dl = l.partial(JetVar { family: f, order: m as u8 });
        if dl.is_zero() {
            continue;
        }
        out = out.add(&ds_pow(&dl, m).scale(&sign(m)));
    }
    out
}

/// Euler operator `E^f(L) = sum_m (-1)^m D_s^m dL/df_m`.
pub fn euler_operator(e: &Expr, f: Family) -> Expr {
    from_poly(&euler_poly(&to_poly(e), f))
}

// sum_{m>=1} sum_{j<m} (-1)^j D_s^j(dL/df_m) f_{m-j}
fn boundary_sum(l: &Poly, f: Family) -> Poly {
    let Some(top) = max_order(l, f) else {
        return Poly::zero();
    };
    let mut out = Poly::zero();
    for m in 1..=top as usize {
        let dl = l.partial(JetVar { family: f, order: m as u8 });
        if dl.is_zero() {
            continue;
        }
        let mut dj = dl;
        for j in 0..m {
            let fj = Poly::var(JetVar {
                family: f,
                order: (m - j) as u8,
            });
            out = out.add(&dj.mul(&fj).scale(&sign(j)));
            dj = dj.total_derivative();
        }
    }
    out
}

pub(crate) fn lambda_se2_poly(l: &Poly) -> Poly {
    boundary_sum(l, Family::Kappa).sub(l)
}

pub(crate) fn lambda_se3_poly(l: &Poly) -> Poly {
    let tau = Poly::var(JetVar::tau(0));
    let etau = euler_poly(l, Family::Tau);
    tau.mul(&etau)
        .scale(&BigRational::from_integer(BigInt::from(2)))
        .sub(l)
        .add(&boundary_sum(l, Family::Kappa))
        .add(&boundary_sum(l, Family::Tau))
}

/// Planar multiplier: `-L + sum_m sum_j (-1)^j D_s^j(dL/dkappa_m) kappa_{m-j}`.
pub fn lambda_se2(l: &Expr) -> Expr {
    from_poly(&lambda_se2_poly(&to_poly(l)))
}

/// Spatial multiplier: `2 tau E^tau(L) - L` plus the kappa and tau boundary sums.
pub fn lambda_se3(l: &Expr) -> Expr {
    from_poly(&lambda_se3_poly(&to_poly(l)))
}
