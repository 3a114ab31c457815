//! Problem definition: binary points, the linear polyhedron `K`, the
//! nonlinear objective and constraints, and feasibility classification.

use crate::expr::{EvalError, NonlinearFunction};
use crate::linalg::{dot, Matrix};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// Tolerance on `g_j(x) ≤ 0`.
pub const TOL_FEAS: f64 = 1e-9;
/// Relative tolerance for membership in the active set `J(x)`.
pub const TOL_TIE: f64 = 1e-9;
/// Default cap on the dimension of exhaustive scans.
pub const ENUMERATION_LIMIT: usize = 24;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("dimension {n} exceeds the enumeration limit {limit}")]
    DimensionTooLarge { n: usize, limit: usize },
    #[error("point has length {got}, problem dimension is {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("polyhedron has {a_rows} rows in A but {b_len} entries in b")]
    RowMismatch { a_rows: usize, b_len: usize },
    #[error("invalid bit string `{0}`")]
    BadBits(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// A point of `{0,1}ⁿ`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BinaryVector(Vec<u8>);

impl BinaryVector {
    /// Panics if any entry is not 0 or 1.
    pub fn new(bits: Vec<u8>) -> Self {
        assert!(bits.iter().all(|&b| b <= 1), "binary vector entries must be 0 or 1");
        BinaryVector(bits)
    }

    pub fn zeros(n: usize) -> Self {
        BinaryVector(vec![0; n])
    }

    pub fn ones(n: usize) -> Self {
        BinaryVector(vec![1; n])
    }

    /// The `index`-th point of `{0,1}ⁿ` in lexicographic order (`x_1` is
    /// the most significant bit).
    pub fn from_index(index: u64, n: usize) -> Self {
        BinaryVector((0..n).map(|i| ((index >> (n - 1 - i)) & 1) as u8).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[u8] {
        &self.0
    }

    pub fn get(&self, i: usize) -> u8 {
        self.0[i]
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&b| b as f64).collect()
    }

    pub fn count_ones(&self) -> usize {
        self.0.iter().filter(|&&b| b == 1).count()
    }

    pub fn squared_distance(&self, other: &BinaryVector) -> usize {
        self.0.iter().zip(&other.0).filter(|(a, b)| a != b).count()
    }
}

impl fmt::Display for BinaryVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.0 {
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for BinaryVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BinaryVector({self})")
    }
}

impl FromStr for BinaryVector {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.trim()
            .bytes()
            .map(|c| match c {
                b'0' => Ok(0),
                b'1' => Ok(1),
                _ => Err(ModelError::BadBits(s.to_string())),
            })
            .collect::<Result<Vec<u8>, _>>()
            .map(BinaryVector)
    }
}

/// `{x : A x ≤ b}` intersected with the unit box.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearPolyhedron {
    a: Matrix,
    b: Vec<f64>,
}

impl LinearPolyhedron {
    pub fn new(a: Matrix, b: Vec<f64>) -> Result<Self, ModelError> {
        if a.rows() != b.len() {
            return Err(ModelError::RowMismatch {
                a_rows: a.rows(),
                b_len: b.len(),
            });
        }
        Ok(LinearPolyhedron { a, b })
    }

    /// The whole box `[0,1]ⁿ` (no rows).
    pub fn unit_box(n: usize) -> Self {
        LinearPolyhedron {
            a: Matrix::zeros(0, n),
            b: Vec::new(),
        }
    }

    pub fn from_rows(rows: &[(Vec<f64>, f64)], n: usize) -> Result<Self, ModelError> {
        if let Some((r, _)) = rows.iter().find(|(r, _)| r.len() != n) {
            return Err(ModelError::DimensionMismatch {
                expected: n,
                got: r.len(),
            });
        }
        let data = rows.iter().flat_map(|(r, _)| r.iter().copied()).collect();
        let a = Matrix::from_row_major(rows.len(), n, data).expect("row lengths checked");
        Ok(LinearPolyhedron {
            a,
            b: rows.iter().map(|(_, b)| *b).collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.a.cols()
    }

    pub fn num_rows(&self) -> usize {
        self.b.len()
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn row(&self, i: usize) -> (&[f64], f64) {
        (self.a.row(i), self.b[i])
    }

    /// Adds the row `coeffs · x ≤ rhs`.
    pub fn with_row(&self, coeffs: Vec<f64>, rhs: f64) -> Self {
        let n = self.dim();
        assert_eq!(coeffs.len(), n);
        let mut rows: Vec<(Vec<f64>, f64)> = (0..self.num_rows())
            .map(|i| (self.a.row(i).to_vec(), self.b[i]))
            .collect();
        rows.push((coeffs, rhs));
        LinearPolyhedron::from_rows(&rows, n).expect("dimensions preserved")
    }

    /// Largest row violation `max_i (a_i·x − b_i)`, or `-∞` with no rows.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        (0..self.num_rows())
            .map(|i| dot(self.a.row(i), x) - self.b[i])
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Integral data is compared exactly, anything else with `TOL_FEAS`.
    pub fn contains(&self, x: &BinaryVector) -> bool {
        let xf = x.to_f64();
        let tol = if self.is_integral() { 0.0 } else { TOL_FEAS };
        (0..self.num_rows()).all(|i| dot(self.a.row(i), &xf) <= self.b[i] + tol)
    }

    pub fn is_integral(&self) -> bool {
        self.a.as_slice().iter().chain(&self.b).all(|v| v.fract() == 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.a.is_finite() && self.b.iter().all(|v| v.is_finite())
    }
}

/// `max f(x)  s.t.  x ∈ K ∩ {0,1}ⁿ,  g_j(x) ≤ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub n: usize,
    pub objective: NonlinearFunction,
    pub constraints: Vec<NonlinearFunction>,
    pub polyhedron: LinearPolyhedron,
}

impl Problem {
    /// Does not validate; see [`validate_problem`].
    pub fn new(
        objective: NonlinearFunction,
        constraints: Vec<NonlinearFunction>,
        polyhedron: LinearPolyhedron,
    ) -> Self {
        Problem {
            n: polyhedron.dim(),
            objective,
            constraints,
            polyhedron,
        }
    }

    pub fn m(&self) -> usize {
        self.constraints.len()
    }

    pub fn objective_value(&self, x: &BinaryVector) -> Result<f64, EvalError> {
        self.objective.eval(&x.to_f64())
    }

    pub fn constraint_values(&self, x: &BinaryVector) -> Result<Vec<f64>, EvalError> {
        let xf = x.to_f64();
        self.constraints.iter().map(|g| g.eval(&xf)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeasibilityStatus {
    /// `x ∈ C`.
    Feasible,
    /// `x ∈ C̄`.
    Infeasible,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    None,
    /// Some `g_j(x) > tol`; the normal case for master iterates.
    Nonlinear,
    /// `A x ≤ b` fails, which the cutting-plane loops never produce.
    Linear,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub status: FeasibilityStatus,
    /// `max_j g_j(x)`, `-∞` when `m = 0`.
    pub max_violation: f64,
    /// `J(x)`, zero-based.
    pub active_set: Vec<usize>,
    pub violation: ViolationKind,
}

impl Classification {
    pub fn is_feasible(&self) -> bool {
        self.status == FeasibilityStatus::Feasible
    }
}

/// Indices attaining `max_t g_t` up to the relative tie tolerance.
pub fn active_set(values: &[f64]) -> Vec<usize> {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tol = TOL_TIE * max.abs().max(1.0);
    values
        .iter()
        .enumerate()
        .filter(|(_, &v)| max - v <= tol)
        .map(|(j, _)| j)
        .collect()
}

/// Sorts `x` into `C` or `C̄`.
pub fn classify_point(problem: &Problem, x: &BinaryVector) -> Result<Classification, ModelError> {
    if x.len() != problem.n {
        return Err(ModelError::DimensionMismatch {
            expected: problem.n,
            got: x.len(),
        });
    }
    let values = problem.constraint_values(x)?;
    let max_violation = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let active = active_set(&values);
    let linear_ok = problem.polyhedron.contains(x);
    let nonlinear_ok = max_violation <= TOL_FEAS;
    let (status, violation) = match (linear_ok, nonlinear_ok) {
        (true, true) => (FeasibilityStatus::Feasible, ViolationKind::None),
        (false, _) => (FeasibilityStatus::Infeasible, ViolationKind::Linear),
        (true, false) => (FeasibilityStatus::Infeasible, ViolationKind::Nonlinear),
    };
    Ok(Classification {
        status,
        max_violation,
        active_set: active,
        violation,
    })
}

/// All points of `K ∩ {0,1}ⁿ` in lexicographic order.
pub fn enumerate_binary_points(
    polyhedron: &LinearPolyhedron,
    limit: usize,
) -> Result<Vec<BinaryVector>, ModelError> {
    let n = polyhedron.dim();
    if n > limit {
        return Err(ModelError::DimensionTooLarge { n, limit });
    }
    Ok((0..1u64 << n)
        .map(|k| BinaryVector::from_index(k, n))
        .filter(|x| polyhedron.contains(x))
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub enum Diagnostic {
    ObjectiveDimension { expected: usize, got: usize },
    ConstraintDimension { index: usize, expected: usize, got: usize },
    NonFiniteCoefficients { location: String },
    EmptyFeasibleRegion,
    EnumerationSkipped { n: usize, limit: usize },
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::ObjectiveDimension { expected, got } => {
                write!(f, "objective has dimension {got}, expected {expected}")
            }
            Diagnostic::ConstraintDimension { index, expected, got } => write!(
                f,
                "constraint {} has dimension {got}, expected {expected}",
                index + 1
            ),
            Diagnostic::NonFiniteCoefficients { location } => {
                write!(f, "non-finite coefficients in {location}")
            }
            Diagnostic::EmptyFeasibleRegion => write!(f, "empty feasible region: K has no binary point"),
            Diagnostic::EnumerationSkipped { n, limit } => write!(
                f,
                "emptiness probe skipped: dimension {n} exceeds enumeration limit {limit}"
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub diagnostics: Vec<Diagnostic>,
}

impl ValidationReport {
    /// True when nothing but informational notices were raised.
    pub fn is_valid(&self) -> bool {
        self.diagnostics
            .iter()
            .all(|d| matches!(d, Diagnostic::EnumerationSkipped { .. }))
    }
}

/// Checks dimensions, finiteness and (at desk scale) emptiness of
/// `K ∩ {0,1}ⁿ`. Never fails; problems are reported as diagnostics.
pub fn validate_problem(problem: &Problem) -> ValidationReport {
    validate_parts(
        problem.n,
        &problem.objective,
        &problem.constraints,
        problem.polyhedron.a(),
        problem.polyhedron.b(),
    )
}

/// Validation on raw parts, so that malformed matrices can be diagnosed
/// before a [`LinearPolyhedron`] is built.
pub fn validate_parts(
    n: usize,
    objective: &NonlinearFunction,
    constraints: &[NonlinearFunction],
    a: &Matrix,
    b: &[f64],
) -> ValidationReport {
    let mut diagnostics = Vec::new();
    if objective.dim() != n {
        diagnostics.push(Diagnostic::ObjectiveDimension {
            expected: n,
            got: objective.dim(),
        });
    }
    for (index, g) in constraints.iter().enumerate() {
        if g.dim() != n {
            diagnostics.push(Diagnostic::ConstraintDimension {
                index,
                expected: n,
                got: g.dim(),
            });
        }
    }
    let shape_ok = a.cols() == n && a.rows() == b.len();
    if a.cols() != n {
        diagnostics.push(Diagnostic::ConstraintDimension {
            index: usize::MAX,
            expected: n,
            got: a.cols(),
        });
    }
    if a.rows() != b.len() {
        diagnostics.push(Diagnostic::NonFiniteCoefficients {
            location: format!("polyhedron shape ({} rows vs {} bounds)", a.rows(), b.len()),
        });
    }
    if !a.is_finite() || b.iter().any(|v| !v.is_finite()) {
        diagnostics.push(Diagnostic::NonFiniteCoefficients {
            location: "linear constraints".into(),
        });
    }
    for (label, f) in std::iter::once(("objective".to_string(), objective))
        .chain(constraints.iter().enumerate().map(|(j, g)| (format!("constraint {}", j + 1), g)))
    {
        if let NonlinearFunction::Quadratic(q) = f {
            if !q.q_mat().is_finite() || q.lin().iter().any(|v| !v.is_finite()) || !q.constant().is_finite() {
                diagnostics.push(Diagnostic::NonFiniteCoefficients { location: label });
            }
        }
    }
    if shape_ok && a.is_finite() {
        let poly = LinearPolyhedron { a: a.clone(), b: b.to_vec() };
        match enumerate_binary_points(&poly, ENUMERATION_LIMIT) {
            Ok(points) if points.is_empty() => diagnostics.push(Diagnostic::EmptyFeasibleRegion),
            Ok(_) => {}
            Err(_) => diagnostics.push(Diagnostic::EnumerationSkipped {
                n,
                limit: ENUMERATION_LIMIT,
            }),
        }
    }
    ValidationReport { diagnostics }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expression;

    fn example_problem() -> Problem {
        let f = parse_expression("2*x1*x2*x3 + x1*x3 + 2*x2 + 3*x3 + 4*x4", 4).unwrap();
        let k = LinearPolyhedron::from_rows(
            &[(vec![2.0, 1.0, 2.0, 2.0], 5.0), (vec![2.0, 2.0, 1.0, 2.0], 5.0)],
            4,
        )
        .unwrap();
        Problem::new(f, vec![], k)
    }

    #[test]
    fn example_is_valid_and_point_feasible() {
        let p = example_problem();
        assert!(validate_problem(&p).is_valid());
        let c = classify_point(&p, &"0111".parse().unwrap()).unwrap();
        assert_eq!(c.status, FeasibilityStatus::Feasible);
        assert!(c.active_set.is_empty());
        assert_eq!(c.max_violation, f64::NEG_INFINITY);
    }

    #[test]
    fn example_polyhedron_has_thirteen_points() {
        // Oracle: direct check of both rows over all 16 vectors.
        let expected = (0u32..16)
            .filter(|k| {
                let x: Vec<u32> = (0..4).map(|i| (k >> (3 - i)) & 1).collect();
                2 * x[0] + x[1] + 2 * x[2] + 2 * x[3] <= 5 && 2 * x[0] + 2 * x[1] + x[2] + 2 * x[3] <= 5
            })
            .count();
        assert_eq!(expected, 13);
        let pts = enumerate_binary_points(&example_problem().polyhedron, 24).unwrap();
        assert_eq!(pts.len(), 13);
        assert!(pts.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn two_dim_enumeration_order() {
        let k = LinearPolyhedron::from_rows(&[(vec![1.0, 1.0], 1.0)], 2).unwrap();
        let pts: Vec<String> = enumerate_binary_points(&k, 24)
            .unwrap()
            .iter()
            .map(|x| x.to_string())
            .collect();
        assert_eq!(pts, ["00", "01", "10"]);
    }

    #[test]
    fn enumeration_guard() {
        let k = LinearPolyhedron::unit_box(30);
        assert_eq!(
            enumerate_binary_points(&k, 24),
            Err(ModelError::DimensionTooLarge { n: 30, limit: 24 })
        );
    }

    #[test]
    fn nonlinear_violation_reports_active_set() {
        let g = parse_expression("x1 - 0.5", 3).unwrap();
        let p = Problem::new(NonlinearFunction::linear(vec![0.0; 3], 0.0), vec![g], LinearPolyhedron::unit_box(3));
        let c = classify_point(&p, &"100".parse().unwrap()).unwrap();
        assert_eq!(c.status, FeasibilityStatus::Infeasible);
        assert_eq!(c.violation, ViolationKind::Nonlinear);
        assert_eq!(c.max_violation, 0.5);
        assert_eq!(c.active_set, vec![0]);
    }

    #[test]
    fn linear_violation_is_flagged() {
        let p = example_problem();
        let c = classify_point(&p, &"1111".parse().unwrap()).unwrap();
        assert_eq!(c.status, FeasibilityStatus::Infeasible);
        assert_eq!(c.violation, ViolationKind::Linear);
    }

    #[test]
    fn active_set_ties() {
        assert_eq!(active_set(&[1.0, 1.0 + 1e-12, 0.5]), vec![0, 1]);
        assert_eq!(active_set(&[-2.0, -1.0]), vec![1]);
        assert!(active_set(&[]).is_empty());
    }

    #[test]
    fn wrong_column_count_is_diagnosed() {
        let f = NonlinearFunction::linear(vec![1.0; 3], 0.0);
        let a = Matrix::from_rows(&[vec![1.0, 1.0]]).unwrap();
        let report = validate_parts(3, &f, &[], &a, &[1.0]);
        assert!(!report.is_valid());
        assert!(report
            .diagnostics
            .iter()
            .any(|d| matches!(d, Diagnostic::ConstraintDimension { got: 2, .. })));
    }

    #[test]
    fn empty_region_is_diagnosed() {
        let k = LinearPolyhedron::from_rows(&[(vec![1.0, 0.0], -1.0)], 2).unwrap();
        let p = Problem::new(NonlinearFunction::linear(vec![1.0, 1.0], 0.0), vec![], k);
        let report = validate_problem(&p);
        assert_eq!(report.diagnostics, vec![Diagnostic::EmptyFeasibleRegion]);
    }

    #[test]
    fn bit_string_round_trip() {
        let x: BinaryVector = "0110".parse().unwrap();
        assert_eq!(x.to_string(), "0110");
        assert!("01a".parse::<BinaryVector>().is_err());
        assert_eq!(BinaryVector::from_index(6, 4), x);
    }
}
