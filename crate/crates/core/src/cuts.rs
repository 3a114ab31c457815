//! Cut families: tangent, shifted and Lipschitz cuts in normalized
//! `(a, rhs)` form.
//!
//! Optimality cuts read `θ ≤ aᵀx + rhs`, feasibility cuts `aᵀx + rhs ≤ 0`.

use crate::expr::{EvalError, Gradient, NonlinearFunction};
use crate::linalg::dot;
use crate::model::{active_set, BinaryVector};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CutError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("constraint {j} is not in the active set at {point} (value {value}, max {max})")]
    NotActive {
        j: usize,
        point: BinaryVector,
        value: f64,
        max: f64,
    },
    #[error("shift must be positive, got {0}")]
    NonPositiveEpsilon(f64),
    #[error("Lipschitz constant must be positive, got {0}")]
    NonPositiveLipschitz(f64),
    #[error("optimality cut evaluated without θ")]
    MissingTheta,
    #[error("cut has {expected} coefficients, point has {got}")]
    Dimension { expected: usize, got: usize },
    #[error("non-finite cut coefficients")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CutFamily {
    OptTangent,
    FeasTangent,
    OptShifted,
    FeasShifted,
    OptLipschitz,
    FeasLipschitz,
}

impl CutFamily {
    pub fn is_optimality(self) -> bool {
        matches!(self, CutFamily::OptTangent | CutFamily::OptShifted | CutFamily::OptLipschitz)
    }

    pub fn name(self) -> &'static str {
        match self {
            CutFamily::OptTangent => "OPT_TANGENT",
            CutFamily::FeasTangent => "FEAS_TANGENT",
            CutFamily::OptShifted => "OPT_SHIFTED",
            CutFamily::FeasShifted => "FEAS_SHIFTED",
            CutFamily::OptLipschitz => "OPT_LIPSCHITZ",
            CutFamily::FeasLipschitz => "FEAS_LIPSCHITZ",
        }
    }
}

impl fmt::Display for CutFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cut {
    pub family: CutFamily,
    pub a: Vec<f64>,
    pub rhs: f64,
    /// Kept for diagnostics only.
    pub source_point: BinaryVector,
    pub source_constraint: Option<usize>,
}

impl Cut {
    /// A bare cut, mostly useful for hand-built master models.
    pub fn new(family: CutFamily, a: Vec<f64>, rhs: f64) -> Self {
        let n = a.len();
        Cut {
            family,
            a,
            rhs,
            source_point: BinaryVector::zeros(n),
            source_constraint: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.a.len()
    }

    /// `aᵀx + rhs`.
    pub fn affine_value(&self, x: &[f64]) -> f64 {
        dot(&self.a, x) + self.rhs
    }

    fn checked(self) -> Result<Self, CutError> {
        if self.a.iter().all(|v| v.is_finite()) && self.rhs.is_finite() {
            Ok(self)
        } else {
            Err(CutError::NonFinite)
        }
    }
}

fn tangent_parts(f: &NonlinearFunction, y: &BinaryVector) -> Result<(Gradient, f64, f64), CutError> {
    let yf = y.to_f64();
    let value = f.eval(&yf)?;
    let grad = f.gradient(&yf)?;
    let gy = grad.dot(&yf);
    Ok((grad, value, gy))
}

fn ensure_active(
    constraints: &[NonlinearFunction],
    j: usize,
    y: &BinaryVector,
) -> Result<(), CutError> {
    let yf = y.to_f64();
    let values = constraints
        .iter()
        .map(|g| g.eval(&yf))
        .collect::<Result<Vec<_>, _>>()?;
    if !active_set(&values).contains(&j) {
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        return Err(CutError::NotActive {
            j,
            point: y.clone(),
            value: values[j],
            max,
        });
    }
    Ok(())
}

/// `θ ≤ h_f(x,y) = ⟨∇f(y), x − y⟩ + f(y)`.
pub fn optimality_cut(f: &NonlinearFunction, y: &BinaryVector) -> Result<Cut, CutError> {
    let (grad, value, gy) = tangent_parts(f, y)?;
    Cut {
        family: CutFamily::OptTangent,
        a: grad.values().to_vec(),
        rhs: value - gy,
        source_point: y.clone(),
        source_constraint: None,
    }
    .checked()
}

/// `h_{g_j}(x,y) ≤ 0`. `j` must belong to `J(y)` over `constraints`.
pub fn feasibility_cut(
    constraints: &[NonlinearFunction],
    j: usize,
    y: &BinaryVector,
) -> Result<Cut, CutError> {
    ensure_active(constraints, j, y)?;
    let (grad, value, gy) = tangent_parts(&constraints[j], y)?;
    Cut {
        family: CutFamily::FeasTangent,
        a: grad.values().to_vec(),
        rhs: value - gy,
        source_point: y.clone(),
        source_constraint: Some(j),
    }
    .checked()
}

/// `θ ≤ h⁰_f(x,y) = ⟨∇f(y), x − y⟩`.
pub fn shifted_optimality_cut(f: &NonlinearFunction, y: &BinaryVector) -> Result<Cut, CutError> {
    let (grad, _, gy) = tangent_parts(f, y)?;
    Cut {
        family: CutFamily::OptShifted,
        a: grad.values().to_vec(),
        rhs: -gy,
        source_point: y.clone(),
        source_constraint: None,
    }
    .checked()
}

/// `h^ε_{g_j}(x,y) = ⟨∇g_j(y), x − y⟩ + ε ≤ 0`.
pub fn shifted_feasibility_cut(
    constraints: &[NonlinearFunction],
    j: usize,
    y: &BinaryVector,
    epsilon: f64,
) -> Result<Cut, CutError> {
    if !(epsilon > 0.0) {
        return Err(CutError::NonPositiveEpsilon(epsilon));
    }
    ensure_active(constraints, j, y)?;
    let (grad, _, gy) = tangent_parts(&constraints[j], y)?;
    Cut {
        family: CutFamily::FeasShifted,
        a: grad.values().to_vec(),
        rhs: epsilon - gy,
        source_point: y.clone(),
        source_constraint: Some(j),
    }
    .checked()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Objective,
    Constraint,
}

/// Tangent plus (objective) or minus (constraint) the curvature term
/// `½L‖x − y‖²`, linearized on binaries as `½L(⟨e − 2y, x⟩ + ‖y‖²)`.
pub fn lipschitz_cut(
    func: &NonlinearFunction,
    y: &BinaryVector,
    l: f64,
    side: Side,
    source_constraint: Option<usize>,
) -> Result<Cut, CutError> {
    if !(l > 0.0) {
        return Err(CutError::NonPositiveLipschitz(l));
    }
    let (grad, value, gy) = tangent_parts(func, y)?;
    let sign = match side {
        Side::Objective => 1.0,
        Side::Constraint => -1.0,
    };
    let half = 0.5 * l * sign;
    let a = grad
        .values()
        .iter()
        .zip(y.bits())
        .map(|(g, &yi)| g + half * (1.0 - 2.0 * yi as f64))
        .collect();
    let family = match side {
        Side::Objective => CutFamily::OptLipschitz,
        Side::Constraint => CutFamily::FeasLipschitz,
    };
    Cut {
        family,
        a,
        rhs: value - gy + half * y.count_ones() as f64,
        source_point: y.clone(),
        source_constraint,
    }
    .checked()
}

/// Optimality families return `aᵀx + rhs − θ` (nonnegative = satisfied),
/// feasibility families `aᵀx + rhs` (nonpositive = satisfied).
pub fn evaluate_cut(cut: &Cut, x: &BinaryVector, theta: Option<f64>) -> Result<f64, CutError> {
    if x.len() != cut.dim() {
        return Err(CutError::Dimension {
            expected: cut.dim(),
            got: x.len(),
        });
    }
    let v = cut.affine_value(&x.to_f64());
    if cut.family.is_optimality() {
        Ok(v - theta.ok_or(CutError::MissingTheta)?)
    } else {
        Ok(v)
    }
}

/// Produces the cuts Algorithm 1 adds at a visited point.
pub trait CutGenerator: Sync {
    fn optimality(&self, f: &NonlinearFunction, y: &BinaryVector) -> Result<Cut, CutError>;

    fn feasibility(
        &self,
        constraints: &[NonlinearFunction],
        j: usize,
        y: &BinaryVector,
    ) -> Result<Cut, CutError>;

    /// Whether the gradient-based variable fixing rule is sound for these cuts.
    fn supports_fixing(&self) -> bool {
        false
    }
}

/// Plain tangent planes.
#[derive(Debug, Clone, Copy, Default)]
pub struct TangentCuts;

impl CutGenerator for TangentCuts {
    fn optimality(&self, f: &NonlinearFunction, y: &BinaryVector) -> Result<Cut, CutError> {
        optimality_cut(f, y)
    }

    fn feasibility(
        &self,
        constraints: &[NonlinearFunction],
        j: usize,
        y: &BinaryVector,
    ) -> Result<Cut, CutError> {
        feasibility_cut(constraints, j, y)
    }

    fn supports_fixing(&self) -> bool {
        true
    }
}

/// Shifted cuts `h⁰_f`, `h^ε_g`.
#[derive(Debug, Clone, Copy)]
pub struct ShiftedCuts {
    pub epsilon: f64,
}

impl CutGenerator for ShiftedCuts {
    fn optimality(&self, f: &NonlinearFunction, y: &BinaryVector) -> Result<Cut, CutError> {
        shifted_optimality_cut(f, y)
    }

    fn feasibility(
        &self,
        constraints: &[NonlinearFunction],
        j: usize,
        y: &BinaryVector,
    ) -> Result<Cut, CutError> {
        shifted_feasibility_cut(constraints, j, y, self.epsilon)
    }
}

/// Lipschitz cuts `h_{f,L}`, `h_{g,L}` with fixed constants.
#[derive(Debug, Clone)]
pub struct LipschitzCuts {
    l_f: f64,
    l_g: Vec<f64>,
}

impl LipschitzCuts {
    pub fn new(l_f: f64, l_g: Vec<f64>) -> Result<Self, CutError> {
        if let Some(&bad) = std::iter::once(&l_f).chain(&l_g).find(|l| !(**l > 0.0)) {
            return Err(CutError::NonPositiveLipschitz(bad));
        }
        Ok(LipschitzCuts { l_f, l_g })
    }

    pub fn l_f(&self) -> f64 {
        self.l_f
    }

    pub fn l_g(&self) -> &[f64] {
        &self.l_g
    }
}

impl CutGenerator for LipschitzCuts {
    fn optimality(&self, f: &NonlinearFunction, y: &BinaryVector) -> Result<Cut, CutError> {
        lipschitz_cut(f, y, self.l_f, Side::Objective, None)
    }

    fn feasibility(
        &self,
        constraints: &[NonlinearFunction],
        j: usize,
        y: &BinaryVector,
    ) -> Result<Cut, CutError> {
        ensure_active(constraints, j, y)?;
        lipschitz_cut(&constraints[j], y, self.l_g[j], Side::Constraint, Some(j))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expression;

    fn bv(s: &str) -> BinaryVector {
        s.parse().unwrap()
    }

    fn f_mu() -> NonlinearFunction {
        // Example objective with μ = 2.5 on x1..x3, written out by hand.
        parse_expression(
            "2*x1*x2*x3 + x1*x3 + 2*x2 + 3*x3 + 4*x4 - 2.5*(x1^2 - x1) - 2.5*(x2^2 - x2) - 2.5*(x3^2 - x3)",
            4,
        )
        .unwrap()
    }

    #[test]
    fn example_tangent_cuts() {
        let c0 = optimality_cut(&f_mu(), &bv("1110")).unwrap();
        assert_eq!(c0.a, vec![0.5, 1.5, 3.5, 4.0]);
        assert_eq!(c0.rhs, 2.5);
        let c1 = optimality_cut(&f_mu(), &bv("0111")).unwrap();
        assert_eq!(c1.a, vec![5.5, -0.5, 0.5, 4.0]);
        assert_eq!(c1.rhs, 5.0);
        // P0 cut is binding at (0,1,1,1) with θ = 11.5.
        assert_eq!(evaluate_cut(&c0, &bv("0111"), Some(11.5)).unwrap(), 0.0);
    }

    #[test]
    fn shifted_cut_at_example_point() {
        let c = shifted_optimality_cut(&f_mu(), &bv("1110")).unwrap();
        assert_eq!(c.rhs, -5.5);
        assert_eq!(evaluate_cut(&c, &bv("1110"), Some(0.0)).unwrap(), 0.0);
    }

    #[test]
    fn linear_tangent_is_the_function() {
        let f = NonlinearFunction::linear(vec![1.0, -2.0, 3.0], 0.0);
        let c = optimality_cut(&f, &bv("101")).unwrap();
        assert_eq!(c.a, vec![1.0, -2.0, 3.0]);
        assert_eq!(c.rhs, 0.0);
    }

    #[test]
    fn feasibility_cuts() {
        let g = vec![parse_expression("x1 + x2 - 1.5", 2).unwrap()];
        let c = feasibility_cut(&g, 0, &bv("11")).unwrap();
        assert_eq!((c.a.clone(), c.rhs), (vec![1.0, 1.0], -1.5));
        assert_eq!(evaluate_cut(&c, &bv("11"), None).unwrap(), 0.5);

        let g = vec![parse_expression("x1^2", 2).unwrap()];
        let c = feasibility_cut(&g, 0, &bv("10")).unwrap();
        assert_eq!((c.a.clone(), c.rhs), (vec![2.0, 0.0], -1.0));
    }

    #[test]
    fn inactive_constraint_rejected() {
        let g = vec![
            parse_expression("x1 - 0.5", 2).unwrap(),
            parse_expression("x2 - 0.5", 2).unwrap(),
        ];
        assert!(matches!(
            feasibility_cut(&g, 1, &bv("10")),
            Err(CutError::NotActive { j: 1, .. })
        ));
    }

    #[test]
    fn shifted_feasibility() {
        let g = vec![parse_expression("x1 + x2 - 1.5", 2).unwrap()];
        let c = shifted_feasibility_cut(&g, 0, &bv("11"), 0.25).unwrap();
        assert_eq!(evaluate_cut(&c, &bv("11"), None).unwrap(), 0.25);
        assert!(matches!(
            shifted_feasibility_cut(&g, 0, &bv("11"), 0.0),
            Err(CutError::NonPositiveEpsilon(_))
        ));
    }

    #[test]
    fn flat_gradient_gives_infeasible_shifted_cut() {
        // g = sin(x1) + x1 - 3 has zero derivative at x1 = π; on a binary
        // grid we emulate the flat point through a scaled argument.
        let g = vec![parse_expression("sin(3.141592653589793*x1) + 3.141592653589793*x1 - 1", 1).unwrap()];
        let c = shifted_feasibility_cut(&g, 0, &bv("1"), 0.1).unwrap();
        assert!(c.a[0].abs() < 1e-12);
        assert!((c.rhs - 0.1).abs() < 1e-12);
    }

    #[test]
    fn lipschitz_cut_cases() {
        let f = parse_expression("x1^2", 1).unwrap();
        let c = lipschitz_cut(&f, &bv("0"), 2.0, Side::Objective, None).unwrap();
        assert_eq!(c.affine_value(&[0.0]), 0.0);
        assert_eq!(c.affine_value(&[1.0]), 1.0);
        assert!(matches!(
            lipschitz_cut(&f, &bv("0"), 0.0, Side::Objective, None),
            Err(CutError::NonPositiveLipschitz(_))
        ));
        let t = optimality_cut(&f, &bv("1")).unwrap();
        let l = lipschitz_cut(&f, &bv("1"), 3.0, Side::Objective, None).unwrap();
        assert_eq!(t.affine_value(&[1.0]), l.affine_value(&[1.0]));
    }

    #[test]
    fn missing_theta_and_zero_cut() {
        let c = Cut::new(CutFamily::OptTangent, vec![0.0, 0.0], 0.0);
        assert_eq!(evaluate_cut(&c, &bv("00"), None), Err(CutError::MissingTheta));
        assert_eq!(evaluate_cut(&c, &bv("00"), Some(0.0)).unwrap(), 0.0);
    }
}
