//! Sparse multivariate polynomials, used to bound Hessians of polynomial
//! expressions over the unit box and to detect linear expressions.

use super::{Expr, Func};
use std::collections::BTreeMap;

/// Exponent vector → coefficient. Zero coefficients are dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly {
    n: usize,
    terms: BTreeMap<Vec<u32>, f64>,
}

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn sup_abs(self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }
}

impl Poly {
    pub fn zero(n: usize) -> Self {
        Poly { n, terms: BTreeMap::new() }
    }

    pub fn constant(n: usize, c: f64) -> Self {
        let mut p = Poly::zero(n);
        p.add_term(vec![0; n], c);
        p
    }

    pub fn var(n: usize, i: usize) -> Self {
        let mut e = vec![0; n];
        e[i] = 1;
        let mut p = Poly::zero(n);
        p.add_term(e, 1.0);
        p
    }

    fn add_term(&mut self, exps: Vec<u32>, c: f64) {
        if c == 0.0 {
            return;
        }
        let slot = self.terms.entry(exps.clone()).or_insert(0.0);
        *slot += c;
        if *slot == 0.0 {
            self.terms.remove(&exps);
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[u32], f64)> {
        self.terms.iter().map(|(k, v)| (k.as_slice(), *v))
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|e| e.iter().sum()).max().unwrap_or(0)
    }

    pub fn as_constant(&self) -> Option<f64> {
        match self.terms.len() {
            0 => Some(0.0),
            1 => {
                let (e, c) = self.terms.iter().next().unwrap();
                e.iter().all(|&k| k == 0).then_some(*c)
            }
            _ => None,
        }
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(e.clone(), *c);
        }
        out
    }

    pub fn scale(&self, s: f64) -> Poly {
        let mut out = Poly::zero(self.n);
        for (e, c) in &self.terms {
            out.add_term(e.clone(), c * s);
        }
        out
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = Poly::zero(self.n);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let e: Vec<u32> = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                out.add_term(e, ca * cb);
            }
        }
        out
    }

    pub fn powi(&self, k: u32) -> Poly {
        let mut out = Poly::constant(self.n, 1.0);
        for _ in 0..k {
            out = out.mul(self);
        }
        out
    }

    pub fn derivative(&self, i: usize) -> Poly {
        let mut out = Poly::zero(self.n);
        for (e, c) in &self.terms {
            if e[i] > 0 {
                let mut d = e.clone();
                d[i] -= 1;
                out.add_term(d, c * e[i] as f64);
            }
        }
        out
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| c * e.iter().zip(x).map(|(&k, &xi)| xi.powi(k as i32)).product::<f64>())
            .sum()
    }

    /// Interval enclosure over the unit box. Every monomial ranges over
    /// `[0, 1]` there, so each term contributes `[min(0,c), max(0,c)]` and the
    /// constant term contributes itself.
    pub fn range_on_unit_box(&self) -> Interval {
        let mut lo = 0.0;
        let mut hi = 0.0;
        for (e, c) in &self.terms {
            if e.iter().all(|&k| k == 0) {
                lo += c;
                hi += c;
            } else if *c > 0.0 {
                hi += c;
            } else {
                lo += c;
            }
        }
        Interval { lo, hi }
    }

    /// Linear part `(coefficients, constant)` if the polynomial has degree ≤ 1.
    pub fn as_affine(&self) -> Option<(Vec<f64>, f64)> {
        if self.degree() > 1 {
            return None;
        }
        let mut a = vec![0.0; self.n];
        let mut c = 0.0;
        for (e, v) in &self.terms {
            match e.iter().position(|&k| k == 1) {
                Some(i) => a[i] += v,
                None => c += v,
            }
        }
        Some((a, c))
    }
}

/// Expands an expression tree into a polynomial. `None` when the tree uses
/// a transcendental function, a negative power, or divides by a
/// non-constant.
pub fn expand(expr: &Expr, n: usize) -> Option<Poly> {
    Some(match expr {
        Expr::Num(v) => Poly::constant(n, *v),
        Expr::Var(i) => Poly::var(n, *i),
        Expr::Neg(a) => expand(a, n)?.scale(-1.0),
        Expr::Add(a, b) => expand(a, n)?.add(&expand(b, n)?),
        Expr::Sub(a, b) => expand(a, n)?.add(&expand(b, n)?.scale(-1.0)),
        Expr::Mul(a, b) => expand(a, n)?.mul(&expand(b, n)?),
        Expr::Div(a, b) => {
            let d = expand(b, n)?.as_constant()?;
            if d == 0.0 {
                return None;
            }
            expand(a, n)?.scale(1.0 / d)
        }
        Expr::Pow(a, k) => {
            if *k < 0 {
                return None;
            }
            expand(a, n)?.powi(*k as u32)
        }
        Expr::Call(Func::Exp | Func::Log | Func::Sin | Func::Cos, _) => return None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expansion_and_derivatives() {
        // (x1 + x2)^2 = x1^2 + 2 x1 x2 + x2^2
        let e = Expr::Pow(Box::new(Expr::Add(Box::new(Expr::Var(0)), Box::new(Expr::Var(1)))), 2);
        let p = expand(&e, 2).unwrap();
        assert_eq!(p.degree(), 2);
        assert_eq!(p.eval(&[1.0, 2.0]), 9.0);
        let d12 = p.derivative(0).derivative(1);
        assert_eq!(d12.as_constant(), Some(2.0));
    }

    #[test]
    fn interval_on_box() {
        // x1 - x2 ranges over [-1, 1]
        let p = Poly::var(2, 0).add(&Poly::var(2, 1).scale(-1.0));
        let r = p.range_on_unit_box();
        assert_eq!((r.lo, r.hi), (-1.0, 1.0));
        assert_eq!(r.sup_abs(), 1.0);
    }

    #[test]
    fn cancellation_keeps_map_canonical() {
        let p = Poly::var(1, 0).add(&Poly::var(1, 0).scale(-1.0));
        assert_eq!(p.as_constant(), Some(0.0));
        assert_eq!(p, Poly::zero(1));
    }

    #[test]
    fn transcendental_is_not_polynomial() {
        let e = Expr::Call(Func::Sin, Box::new(Expr::Var(0)));
        assert!(expand(&e, 1).is_none());
    }
}
