//! Nonlinear functions `f`, `g_j`: quadratic forms `½xᵀQx + qᵀx + c` with an
//! exact fast path, and parsed expression trees differentiated in forward
//! mode.

mod dual;
mod parse;
pub mod poly;

pub use parse::ParseError;
use poly::Poly;

use crate::linalg::{dot, norm, Matrix};
use dual::Dual;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("domain error in `{node}`: {reason}")]
    Domain { node: String, reason: &'static str },
    #[error("expected input of length {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("non-finite gradient entry at coordinate {0}")]
    NonFiniteGradient(usize),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BoundError {
    #[error("Hessian bound needs a polynomial expression; found `{0}`")]
    UnsupportedNode(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Log,
    Sin,
    Cos,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sin => "sin",
            Func::Cos => "cos",
        }
    }
}

/// Expression tree over `x_1..x_n` (stored zero-based).
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
    Call(Func, Box<Expr>),
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) if v.is_sign_negative() => write!(f, "(-{:?})", -v),
            Expr::Num(v) => write!(f, "{v:?}"),
            Expr::Var(i) => write!(f, "x{}", i + 1),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(a, k) => write!(f, "({a}^{k})"),
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

impl Expr {
    fn max_var(&self) -> Option<usize> {
        match self {
            Expr::Num(_) => None,
            Expr::Var(i) => Some(*i),
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => a.max_var(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.max_var().max(b.max_var())
            }
        }
    }

    fn eval_with<T: Scalar>(&self, x: &[T]) -> Result<T, EvalError> {
        Ok(match self {
            Expr::Num(v) => T::constant(*v),
            Expr::Var(i) => x[*i],
            Expr::Neg(a) => a.eval_with(x)?.neg(),
            Expr::Add(a, b) => a.eval_with(x)?.add(b.eval_with(x)?),
            Expr::Sub(a, b) => a.eval_with(x)?.sub(b.eval_with(x)?),
            Expr::Mul(a, b) => a.eval_with(x)?.mul(b.eval_with(x)?),
            Expr::Div(a, b) => {
                let d = b.eval_with(x)?;
                if d.value() == 0.0 {
                    return Err(self.domain("division by zero"));
                }
                a.eval_with(x)?.div(d)
            }
            Expr::Pow(a, k) => {
                let base = a.eval_with(x)?;
                if *k < 0 && base.value() == 0.0 {
                    return Err(self.domain("negative power of zero"));
                }
                base.powi(*k)
            }
            Expr::Call(func, a) => {
                let arg = a.eval_with(x)?;
                match func {
                    Func::Exp => arg.exp(),
                    Func::Log => {
                        if arg.value() <= 0.0 {
                            return Err(self.domain("log of nonpositive value"));
                        }
                        arg.ln()
                    }
                    Func::Sin => arg.sin(),
                    Func::Cos => arg.cos(),
                }
            }
        })
    }

    fn domain(&self, reason: &'static str) -> EvalError {
        EvalError::Domain {
            node: self.to_string(),
            reason,
        }
    }

    fn first_non_polynomial(&self) -> Option<&Expr> {
        match self {
            Expr::Num(_) | Expr::Var(_) => None,
            Expr::Call(..) => Some(self),
            Expr::Pow(a, k) => {
                if *k < 0 {
                    Some(self)
                } else {
                    a.first_non_polynomial()
                }
            }
            Expr::Neg(a) => a.first_non_polynomial(),
            Expr::Div(a, b) => a
                .first_non_polynomial()
                .or_else(|| b.first_non_polynomial())
                .or_else(|| (b.max_var().is_some()).then_some(self)),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => {
                a.first_non_polynomial().or_else(|| b.first_non_polynomial())
            }
        }
    }
}

/// Arithmetic needed by the tree walker; implemented for `f64` and for the
/// forward-mode dual numbers.
trait Scalar: Copy {
    fn constant(v: f64) -> Self;
    fn value(self) -> f64;
    fn neg(self) -> Self;
    fn add(self, o: Self) -> Self;
    fn sub(self, o: Self) -> Self;
    fn mul(self, o: Self) -> Self;
    fn div(self, o: Self) -> Self;
    fn powi(self, k: i32) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
}

impl Scalar for f64 {
    fn constant(v: f64) -> Self {
        v
    }
    fn value(self) -> f64 {
        self
    }
    fn neg(self) -> Self {
        -self
    }
    fn add(self, o: Self) -> Self {
        self + o
    }
    fn sub(self, o: Self) -> Self {
        self - o
    }
    fn mul(self, o: Self) -> Self {
        self * o
    }
    fn div(self, o: Self) -> Self {
        self / o
    }
    fn powi(self, k: i32) -> Self {
        f64::powi(self, k)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
}

/// `½xᵀQx + qᵀx + c` with symmetric `Q`.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadratic {
    q_mat: Matrix,
    lin: Vec<f64>,
    constant: f64,
}

impl Quadratic {
    /// Symmetrizes `q_mat`. Panics if the shapes disagree.
    pub fn new(q_mat: Matrix, lin: Vec<f64>, constant: f64) -> Self {
        assert!(q_mat.is_square() && q_mat.rows() == lin.len(), "quadratic shape mismatch");
        Quadratic {
            q_mat: q_mat.symmetrized(),
            lin,
            constant,
        }
    }

    pub fn linear(lin: Vec<f64>, constant: f64) -> Self {
        let n = lin.len();
        Quadratic::new(Matrix::zeros(n, n), lin, constant)
    }

    pub fn dim(&self) -> usize {
        self.lin.len()
    }

    pub fn q_mat(&self) -> &Matrix {
        &self.q_mat
    }

    pub fn lin(&self) -> &[f64] {
        &self.lin
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    pub fn is_linear(&self) -> bool {
        self.q_mat.as_slice().iter().all(|&v| v == 0.0)
    }

    fn eval(&self, x: &[f64]) -> f64 {
        0.5 * self.q_mat.quad_form(x) + dot(&self.lin, x) + self.constant
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.q_mat
            .mul_vec(x)
            .into_iter()
            .zip(&self.lin)
            .map(|(a, b)| a + b)
            .collect()
    }

    /// Same function written in the expression grammar.
    pub fn to_expression_text(&self) -> String {
        let n = self.dim();
        let mut parts = Vec::new();
        for i in 0..n {
            let d = self.q_mat[(i, i)];
            if d != 0.0 {
                parts.push(format!("{:?}*x{}^2", 0.5 * d, i + 1));
            }
            for j in i + 1..n {
                let v = self.q_mat[(i, j)];
                if v != 0.0 {
                    parts.push(format!("{:?}*x{}*x{}", v, i + 1, j + 1));
                }
            }
        }
        for (i, &v) in self.lin.iter().enumerate() {
            if v != 0.0 {
                parts.push(format!("{:?}*x{}", v, i + 1));
            }
        }
        parts.push(format!("{:?}", self.constant));
        parts.join(" + ").replace("+ -", "- ")
    }
}

/// Parsed expression together with its dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Expression {
    n: usize,
    root: Expr,
}

impl Expression {
    pub fn root(&self) -> &Expr {
        &self.root
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Wraps a tree. Fails if it references a variable `≥ n`.
    pub fn from_tree(root: Expr, n: usize) -> Option<Self> {
        match root.max_var() {
            Some(i) if i >= n => None,
            _ => Some(Expression { n, root }),
        }
    }
}

/// One of the functions `f` or `g_j`.
#[derive(Debug, Clone, PartialEq)]
pub enum NonlinearFunction {
    Quadratic(Quadratic),
    Expression(Expression),
}

/// `∇φ(x)`; entries are always finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient(Vec<f64>);

impl Gradient {
    pub fn new(values: Vec<f64>) -> Result<Self, EvalError> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(EvalError::NonFiniteGradient(i));
        }
        Ok(Gradient(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    pub fn dot(&self, x: &[f64]) -> f64 {
        dot(&self.0, x)
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }
}

/// Parses `text` in the expression grammar over `x1..xn`.
pub fn parse_expression(text: &str, n: usize) -> Result<NonlinearFunction, ParseError> {
    let root = parse::parse(text, n)?;
    Ok(NonlinearFunction::Expression(Expression { n, root }))
}

impl NonlinearFunction {
    pub fn quadratic(q_mat: Matrix, lin: Vec<f64>, constant: f64) -> Self {
        NonlinearFunction::Quadratic(Quadratic::new(q_mat, lin, constant))
    }

    pub fn linear(lin: Vec<f64>, constant: f64) -> Self {
        NonlinearFunction::Quadratic(Quadratic::linear(lin, constant))
    }

    pub fn dim(&self) -> usize {
        match self {
            NonlinearFunction::Quadratic(q) => q.dim(),
            NonlinearFunction::Expression(e) => e.n,
        }
    }

    /// `s·φ`.
    pub fn scaled(&self, s: f64) -> Self {
        match self {
            NonlinearFunction::Quadratic(q) => {
                let data = q.q_mat.as_slice().iter().map(|v| s * v).collect();
                let qm = Matrix::from_row_major(q.dim(), q.dim(), data).expect("same shape");
                NonlinearFunction::quadratic(qm, q.lin.iter().map(|v| s * v).collect(), s * q.constant)
            }
            NonlinearFunction::Expression(e) => NonlinearFunction::Expression(Expression {
                n: e.n,
                root: Expr::Mul(Box::new(Expr::Num(s)), Box::new(e.root.clone())),
            }),
        }
    }

    fn check_dim(&self, x: &[f64]) -> Result<(), EvalError> {
        if x.len() != self.dim() {
            return Err(EvalError::Dimension {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64, EvalError> {
        self.check_dim(x)?;
        match self {
            NonlinearFunction::Quadratic(q) => Ok(q.eval(x)),
            NonlinearFunction::Expression(e) => e.root.eval_with::<f64>(x),
        }
    }

    /// Quadratics use `Qx + q`; expressions take one dual-number sweep per
    /// coordinate.
    pub fn gradient(&self, x: &[f64]) -> Result<Gradient, EvalError> {
        self.check_dim(x)?;
        match self {
            NonlinearFunction::Quadratic(q) => Gradient::new(q.gradient(x)),
            NonlinearFunction::Expression(e) => {
                let mut g = Vec::with_capacity(e.n);
                let mut seeds: Vec<Dual> = x.iter().map(|&v| Dual::constant(v)).collect();
                for i in 0..e.n {
                    seeds[i].d = 1.0;
                    g.push(e.root.eval_with(&seeds)?.d);
                    seeds[i].d = 0.0;
                }
                Gradient::new(g)
            }
        }
    }

    /// Polynomial form of the function when it has one.
    pub fn to_poly(&self) -> Option<Poly> {
        match self {
            NonlinearFunction::Quadratic(q) => {
                let n = q.dim();
                let mut p = Poly::constant(n, q.constant);
                for i in 0..n {
                    p = p.add(&Poly::var(n, i).scale(q.lin[i]));
                    for j in 0..n {
                        let v = 0.5 * q.q_mat[(i, j)];
                        if v != 0.0 {
                            p = p.add(&Poly::var(n, i).mul(&Poly::var(n, j)).scale(v));
                        }
                    }
                }
                Some(p)
            }
            NonlinearFunction::Expression(e) => poly::expand(&e.root, e.n),
        }
    }

    /// `(a, c)` with `φ(x) = aᵀx + c` when the function is affine.
    pub fn as_affine(&self) -> Option<(Vec<f64>, f64)> {
        match self {
            NonlinearFunction::Quadratic(q) => {
                q.is_linear().then(|| (q.lin.clone(), q.constant))
            }
            NonlinearFunction::Expression(_) => self.to_poly()?.as_affine(),
        }
    }

    pub fn is_linear(&self) -> bool {
        self.as_affine().is_some()
    }

    /// Entrywise bound `sup_{x∈[0,1]ⁿ} |∇²φ(x)_ij|`.
    pub fn hessian_abs_bounds(&self) -> Result<Matrix, BoundError> {
        match self {
            NonlinearFunction::Quadratic(q) => {
                let n = q.dim();
                let mut h = Matrix::zeros(n, n);
                for i in 0..n {
                    for j in 0..n {
                        h[(i, j)] = q.q_mat[(i, j)].abs();
                    }
                }
                Ok(h)
            }
            NonlinearFunction::Expression(e) => {
                if let Some(node) = e.root.first_non_polynomial() {
                    return Err(BoundError::UnsupportedNode(node.to_string()));
                }
                let p = poly::expand(&e.root, e.n)
                    .ok_or_else(|| BoundError::UnsupportedNode(e.root.to_string()))?;
                let n = e.n;
                let mut h = Matrix::zeros(n, n);
                for i in 0..n {
                    let di = p.derivative(i);
                    for j in i..n {
                        let b = di.derivative(j).range_on_unit_box().sup_abs();
                        h[(i, j)] = b;
                        h[(j, i)] = b;
                    }
                }
                Ok(h)
            }
        }
    }

    /// Upper bound on `λ_max(∇²φ(x))` over the unit box: the largest absolute
    /// row sum of the entrywise Hessian bound (Gershgorin).
    pub fn hessian_row_sum_bound(&self) -> Result<f64, BoundError> {
        Ok(self.hessian_abs_bounds()?.max_abs_row_sum())
    }

    /// Variables that appear in some nonzero Hessian entry. `None` when the
    /// Hessian cannot be bounded symbolically.
    pub fn curved_variables(&self) -> Option<Vec<bool>> {
        let h = self.hessian_abs_bounds().ok()?;
        Some((0..h.rows()).map(|i| h.row(i).iter().any(|&v| v != 0.0)).collect())
    }

    /// Textual form in the expression grammar (quadratics are expanded).
    pub fn to_expression_text(&self) -> String {
        match self {
            NonlinearFunction::Quadratic(q) => q.to_expression_text(),
            NonlinearFunction::Expression(e) => e.root.to_string(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE_F: &str = "2*x1*x2*x3 + x1*x3 + 2*x2 + 3*x3 + 4*x4";

    #[test]
    fn parses_example_objective() {
        let f = parse_expression(EXAMPLE_F, 4).unwrap();
        assert_eq!(f.eval(&[1.0, 1.0, 1.0, 0.0]).unwrap(), 8.0);
        assert_eq!(f.eval(&[0.0, 1.0, 1.0, 1.0]).unwrap(), 9.0);
        // ∇f = (2x2x3 + x3, 2x1x3 + 2, 2x1x2 + x1 + 3, 4)
        let g = f.gradient(&[1.0, 1.0, 1.0, 0.0]).unwrap();
        assert_eq!(g.values(), &[3.0, 4.0, 6.0, 4.0]);
    }

    #[test]
    fn example_row_sum_bound_is_five() {
        let f = parse_expression(EXAMPLE_F, 4).unwrap();
        assert_eq!(f.hessian_row_sum_bound().unwrap(), 5.0);
        assert_eq!(f.curved_variables().unwrap(), vec![true, true, true, false]);
    }

    #[test]
    fn flat_level_set_function_parses() {
        let g = parse_expression("sin(x1)+x1", 1).unwrap();
        let pi = std::f64::consts::PI;
        let d = g.gradient(&[pi]).unwrap();
        assert!(d.values()[0].abs() < 1e-15);
        assert!(matches!(
            g.hessian_row_sum_bound(),
            Err(BoundError::UnsupportedNode(_))
        ));
    }

    #[test]
    fn out_of_range_variable() {
        let err = parse_expression("x5", 4).unwrap_err();
        assert_eq!(
            err,
            ParseError::VariableOutOfRange { offset: 0, index: 5, n: 4 }
        );
        assert!(matches!(
            parse_expression("x0", 4),
            Err(ParseError::VariableOutOfRange { index: 0, .. })
        ));
    }

    #[test]
    fn syntax_errors_carry_offsets() {
        let err = parse_expression("x1 + * x2", 2).unwrap_err();
        assert_eq!(err.offset(), 5);
        let err = parse_expression("x1 +", 2).unwrap_err();
        assert_eq!(err.offset(), 4);
        assert!(matches!(
            parse_expression("y1", 2),
            Err(ParseError::UnknownIdentifier { .. })
        ));
        assert!(matches!(parse_expression("x1^1.5", 1), Err(ParseError::Syntax { .. })));
        assert!(matches!(parse_expression("(x1", 1), Err(ParseError::Syntax { .. })));
    }

    #[test]
    fn precedence_and_associativity() {
        let f = parse_expression("2 + 3 * 4 - 6 / 2", 1).unwrap();
        assert_eq!(f.eval(&[0.0]).unwrap(), 11.0);
        // right-associative integer powers: 2^3^2 = 2^9
        let f = parse_expression("x1^3^2", 1).unwrap();
        assert_eq!(f.eval(&[2.0]).unwrap(), 512.0);
        let f = parse_expression("-x1^2", 1).unwrap();
        assert_eq!(f.eval(&[3.0]).unwrap(), -9.0);
        let f = parse_expression("x1^-1", 1).unwrap();
        assert_eq!(f.eval(&[4.0]).unwrap(), 0.25);
        let f = parse_expression("1e-3 * x1 + 2.5E2", 1).unwrap();
        assert_eq!(f.eval(&[1000.0]).unwrap(), 251.0);
    }

    #[test]
    fn domain_errors_name_the_node() {
        let f = parse_expression("log(x1 - 1)", 1).unwrap();
        match f.eval(&[1.0]).unwrap_err() {
            EvalError::Domain { node, .. } => assert!(node.starts_with("log(")),
            e => panic!("unexpected {e:?}"),
        }
        let f = parse_expression("1 / x1", 1).unwrap();
        assert!(matches!(f.eval(&[0.0]), Err(EvalError::Domain { .. })));
        assert!(matches!(f.gradient(&[0.0]), Err(EvalError::Domain { .. })));
    }

    #[test]
    fn display_round_trips() {
        for (text, n) in [
            (EXAMPLE_F, 4),
            ("-3 * x1 + (-x2)^2 - exp(x1 / 2) + log(x2 + 1) * cos(x1)", 2),
            ("x1^-2 - -0.5 + 1e-12*x2", 2),
        ] {
            let f = parse_expression(text, n).unwrap();
            let NonlinearFunction::Expression(e) = &f else { unreachable!() };
            let again = parse_expression(&e.root().to_string(), e.dim()).unwrap();
            assert_eq!(f, again);
        }
    }

    #[test]
    fn zero_quadratic_evaluates_to_constant() {
        let f = NonlinearFunction::quadratic(Matrix::zeros(3, 3), vec![0.0; 3], 7.5);
        assert_eq!(f.eval(&[1.0, 0.0, 1.0]).unwrap(), 7.5);
    }

    #[test]
    fn linear_gradient_is_constant() {
        let f = NonlinearFunction::linear(vec![1.0, -2.0, 3.0], 0.0);
        for x in [[0.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.3, 0.9, 0.1]] {
            assert_eq!(f.gradient(&x).unwrap().values(), &[1.0, -2.0, 3.0]);
        }
        assert_eq!(f.hessian_row_sum_bound().unwrap(), 0.0);
        let g = parse_expression("x1 - 2*x2 + 3*x3 + 1", 3).unwrap();
        assert_eq!(g.as_affine(), Some((vec![1.0, -2.0, 3.0], 1.0)));
        assert_eq!(g.hessian_row_sum_bound().unwrap(), 0.0);
    }

    #[test]
    fn swap_matrix_bound_is_one() {
        let q = Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let f = NonlinearFunction::quadratic(q, vec![0.0, 0.0], 0.0);
        assert_eq!(f.hessian_row_sum_bound().unwrap(), 1.0);
    }

    #[test]
    fn quadratic_symmetrized_on_construction() {
        let q = Matrix::from_rows(&[vec![1.0, 4.0], vec![0.0, 1.0]]).unwrap();
        let NonlinearFunction::Quadratic(f) = NonlinearFunction::quadratic(q, vec![0.0; 2], 0.0)
        else {
            unreachable!()
        };
        assert_eq!(f.q_mat()[(0, 1)], 2.0);
        assert_eq!(f.q_mat()[(1, 0)], 2.0);
    }
}
