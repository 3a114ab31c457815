//! Brute-force oracles, Condition-1 checkers, convergence diagnostics and
//! dual certificates. Everything here enumerates `K ∩ {0,1}ⁿ` and is meant
//! for desk-scale instances.

use crate::cuts::{feasibility_cut, optimality_cut, CutError};
use crate::engine::TraceRecord;
use crate::expr::{EvalError, Gradient, NonlinearFunction};
use crate::linalg::{dot, norm, solve_linear, Matrix};
use crate::master::simplex::{maximize, LpOutcome};
use crate::master::{
    build_master, solve_branch_and_bound, solve_enumerative, MasterError, MasterModel,
    MasterSolution, ObjectiveMode,
};
use crate::model::{
    active_set, classify_point, enumerate_binary_points, BinaryVector, ModelError, Problem,
    ENUMERATION_LIMIT, TOL_FEAS,
};
use thiserror::Error;

/// Complementarity and attainment tolerance of the KKT certificate.
pub const KKT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("no feasible binary point")]
    EmptyFeasibleSet,
    #[error("point {0} is infeasible")]
    InfeasiblePoint(BinaryVector),
    #[error("λ has {got} entries, problem has {expected} constraints")]
    MultiplierCount { expected: usize, got: usize },
    #[error("multiplier λ_{} = {value} is negative", .j + 1)]
    NegativeMultiplier { j: usize, value: f64 },
    #[error("complementarity fails for constraint {}: λ·g = {product}", .j + 1)]
    Complementarity { j: usize, product: f64 },
    #[error("argument out of range: {0}")]
    OutOfRange(String),
    #[error("constraint index {0} out of range")]
    NoSuchConstraint(usize),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Cut(#[from] CutError),
    #[error(transparent)]
    Master(#[from] MasterError),
}

fn rel_tol(v: f64) -> f64 {
    1e-9 * v.abs().max(1.0)
}

fn solve_exact(model: &MasterModel) -> Result<MasterSolution, MasterError> {
    if model.dim() - model.fixings().len() <= ENUMERATION_LIMIT {
        solve_enumerative(model, ENUMERATION_LIMIT)
    } else {
        solve_branch_and_bound(model)
    }
}

/// `K ∩ {0,1}ⁿ` split into `C` (feasible) and `C̄` (infeasible).
#[derive(Debug, Clone, PartialEq)]
pub struct PointSets {
    pub feasible: Vec<BinaryVector>,
    pub infeasible: Vec<BinaryVector>,
}

pub fn split_points(problem: &Problem) -> Result<PointSets, AnalysisError> {
    let mut sets = PointSets {
        feasible: Vec::new(),
        infeasible: Vec::new(),
    };
    for x in enumerate_binary_points(&problem.polyhedron, ENUMERATION_LIMIT)? {
        if classify_point(problem, &x)?.is_feasible() {
            sets.feasible.push(x);
        } else {
            sets.infeasible.push(x);
        }
    }
    Ok(sets)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BruteForce {
    /// Lexicographically first maximizer.
    pub x: BinaryVector,
    /// `M1`.
    pub value: f64,
    /// `M2 = max{f(x) : x ∈ C, f(x) < M1}`, `-∞` when `f` is constant on `C`.
    pub second_value: f64,
    pub sets: PointSets,
}

impl BruteForce {
    /// `M1 = M2` in the sense that no second level exists.
    pub fn single_level(&self) -> bool {
        self.second_value == f64::NEG_INFINITY
    }
}

pub fn brute_force_solve(problem: &Problem) -> Result<BruteForce, AnalysisError> {
    let sets = split_points(problem)?;
    let values = sets
        .feasible
        .iter()
        .map(|x| problem.objective_value(x))
        .collect::<Result<Vec<_>, _>>()?;
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        if best.is_none_or(|b| v > values[b]) {
            best = Some(i);
        }
    }
    let b = best.ok_or(AnalysisError::EmptyFeasibleSet)?;
    let m1 = values[b];
    let second_value = values
        .iter()
        .copied()
        .filter(|&v| v < m1)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(BruteForce {
        x: sets.feasible[b].clone(),
        value: m1,
        second_value,
        sets,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    pub x: BinaryVector,
    pub y: BinaryVector,
    /// Constraint index for constraint-side violations.
    pub constraint: Option<usize>,
    /// Amount by which the inequality fails.
    pub excess: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub condition1_holds: bool,
    /// Optimum of the fully cut master; `None` for the pairwise check.
    pub lp_value: Option<f64>,
    pub true_optimum: f64,
    pub witnesses: Vec<Witness>,
}

/// Builds every cut at every point of `C` and `C̄`, solves the master and
/// compares with brute force.
pub fn check_condition1(problem: &Problem) -> Result<ConditionReport, AnalysisError> {
    let bf = brute_force_solve(problem)?;
    let opt = bf
        .sets
        .feasible
        .iter()
        .map(|y| optimality_cut(&problem.objective, y))
        .collect::<Result<Vec<_>, _>>()?;
    let mut feas = Vec::new();
    for y in &bf.sets.infeasible {
        let values = problem.constraint_values(y)?;
        for j in active_set(&values) {
            feas.push(feasibility_cut(&problem.constraints, j, y)?);
        }
    }
    let model = build_master(problem.polyhedron.clone(), opt, feas, &[], ObjectiveMode::Theta)?;
    let sol = solve_exact(&model)?;
    let holds = (sol.value - bf.value).abs() <= rel_tol(bf.value);
    Ok(ConditionReport {
        condition1_holds: holds,
        lp_value: Some(sol.value),
        true_optimum: bf.value,
        witnesses: Vec::new(),
    })
}

/// Pairwise sufficient condition: `f(x) ≤ h_f(x,y)` on `C × C` and
/// `h_{g_j}(x,y) ≤ 0` for `x ∈ C`, `y ∈ C̄`, `j ∈ J(y)`.
pub fn check_tangent_domination(problem: &Problem) -> Result<ConditionReport, AnalysisError> {
    let bf = brute_force_solve(problem)?;
    let feasible = &bf.sets.feasible;
    let fvals = feasible
        .iter()
        .map(|x| problem.objective_value(x))
        .collect::<Result<Vec<_>, _>>()?;
    let mut witnesses = Vec::new();
    for y in feasible {
        let cut = optimality_cut(&problem.objective, y)?;
        for (x, &fx) in feasible.iter().zip(&fvals) {
            let excess = fx - cut.affine_value(&x.to_f64());
            if excess > rel_tol(fx) {
                witnesses.push(Witness {
                    x: x.clone(),
                    y: y.clone(),
                    constraint: None,
                    excess,
                });
            }
        }
    }
    for y in &bf.sets.infeasible {
        let values = problem.constraint_values(y)?;
        for j in active_set(&values) {
            let cut = feasibility_cut(&problem.constraints, j, y)?;
            for x in feasible {
                let h = cut.affine_value(&x.to_f64());
                if h > rel_tol(values[j]) {
                    witnesses.push(Witness {
                        x: x.clone(),
                        y: y.clone(),
                        constraint: Some(j),
                        excess: h,
                    });
                }
            }
        }
    }
    Ok(ConditionReport {
        condition1_holds: witnesses.is_empty(),
        lp_value: None,
        true_optimum: bf.value,
        witnesses,
    })
}

/// First-order test for `τ`-robust quasiconvexity: for every ordered pair
/// with `fn(x) ≤ fn(y)`, `⟨∇fn(y), x−y⟩ ≤ −min{τ‖y−x‖, fn(y)−fn(x)}`.
/// Returns the first violating pair `(x, y)`.
pub fn check_robust_quasiconvex_binary(
    func: &NonlinearFunction,
    tau: f64,
    points: &[BinaryVector],
) -> Result<Option<(BinaryVector, BinaryVector)>, AnalysisError> {
    if !(tau >= 0.0) {
        return Err(AnalysisError::OutOfRange(format!("τ = {tau}")));
    }
    let data = points
        .iter()
        .map(|p| {
            let x = p.to_f64();
            Ok((func.eval(&x)?, func.gradient(&x)?))
        })
        .collect::<Result<Vec<(f64, Gradient)>, EvalError>>()?;
    for (xi, x) in points.iter().enumerate() {
        for (yi, y) in points.iter().enumerate() {
            let (fx, _) = &data[xi];
            let (fy, gy) = &data[yi];
            if fx > fy || xi == yi {
                continue;
            }
            let diff: Vec<f64> = x.to_f64().iter().zip(y.to_f64()).map(|(a, b)| a - b).collect();
            let lhs = dot(gy.values(), &diff);
            let rhs = -(tau * norm(&diff)).min(fy - fx);
            if lhs > rhs + rel_tol(rhs) {
                return Ok(Some((x.clone(), y.clone())));
            }
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonBar {
    pub value: f64,
    /// `value > 0`; otherwise the pseudoconvexity premise fails.
    pub positive: bool,
}

/// `ε̄ = min ⟨∇g_j(y), y − x⟩` over `x ∈ C`, `y ∈ C̄`, `j ∈ J(y)`.
pub fn compute_epsilon_bar(problem: &Problem) -> Result<EpsilonBar, AnalysisError> {
    let sets = split_points(problem)?;
    if sets.feasible.is_empty() {
        return Err(AnalysisError::EmptyFeasibleSet);
    }
    let mut value = f64::INFINITY;
    for y in &sets.infeasible {
        let yf = y.to_f64();
        let values = problem.constraint_values(y)?;
        for j in active_set(&values) {
            let g = problem.constraints[j].gradient(&yf)?;
            let gy = g.dot(&yf);
            for x in &sets.feasible {
                value = value.min(gy - g.dot(&x.to_f64()));
            }
        }
    }
    Ok(EpsilonBar {
        value,
        positive: value > 0.0,
    })
}

/// `δ_k = (optimal − f(x^k))/‖∇f(x^k)‖`, or 0 for a zero gradient.
pub fn delta_k(optimal_value: f64, f_xk: f64, grad: &Gradient) -> f64 {
    let n = grad.norm();
    if n > 0.0 {
        (optimal_value - f_xk) / n
    } else {
        0.0
    }
}

/// `u(M,m) = Σ_{q=0..M} C(m,q)`, exact.
pub fn u_count(big_m: u32, m: u32) -> Result<u128, AnalysisError> {
    if big_m > m || m > 127 {
        return Err(AnalysisError::OutOfRange(format!("u({big_m},{m})")));
    }
    let mut binom: u128 = 1;
    let mut total: u128 = 1;
    for q in 1..=big_m as u128 {
        binom = binom * (m as u128 - q + 1) / q;
        total += binom;
    }
    Ok(total)
}

/// Number of cube points a cut with gap ratio `δ` is guaranteed to remove:
/// `u(N,n)` for the largest `N ≤ n` with `δ > √N`, or 0 when `δ = 0`.
pub fn removal_lower_bound(delta: f64, n: u32) -> Result<u128, AnalysisError> {
    if !(delta >= 0.0) {
        return Err(AnalysisError::OutOfRange(format!("δ = {delta}")));
    }
    match (0..=n).rev().find(|&k| delta > (k as f64).sqrt()) {
        Some(k) => u_count(k, n),
        None => Ok(0),
    }
}

/// `2^{n−N}`.
pub fn iteration_bound(n: u32, big_n: u32) -> Result<u128, AnalysisError> {
    if big_n < 1 || big_n > n || n - big_n > 127 {
        return Err(AnalysisError::OutOfRange(format!("n = {n}, N = {big_n}")));
    }
    Ok(1u128 << (n - big_n))
}

/// Lawson–Hanson: `min ‖G t − v‖` over `t ≥ 0`, with `G` given by columns.
fn nnls(cols: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    let k = cols.len();
    let mut t = vec![0.0; k];
    let mut passive = vec![false; k];
    let tol = 1e-12 * (1.0 + norm(v)) * cols.iter().map(|c| norm(c)).fold(1.0, f64::max);
    let residual = |t: &[f64]| -> Vec<f64> {
        let mut r = v.to_vec();
        for (c, &tc) in cols.iter().zip(t) {
            if tc != 0.0 {
                for (ri, ci) in r.iter_mut().zip(c) {
                    *ri -= tc * ci;
                }
            }
        }
        r
    };
    // Least squares on the passive columns; `None` if they are dependent.
    let solve_passive = |passive: &[bool]| -> Option<Vec<f64>> {
        let idx: Vec<usize> = (0..k).filter(|&i| passive[i]).collect();
        let gram: Vec<Vec<f64>> = idx
            .iter()
            .map(|&i| idx.iter().map(|&j| dot(&cols[i], &cols[j])).collect())
            .collect();
        let rhs: Vec<f64> = idx.iter().map(|&i| dot(&cols[i], v)).collect();
        let z = solve_linear(&Matrix::from_rows(&gram)?, &rhs)?;
        let mut full = vec![0.0; k];
        for (&i, zi) in idx.iter().zip(z) {
            full[i] = zi;
        }
        Some(full)
    };
    let mut blocked = vec![false; k];
    for _ in 0..(3 * k + 10) {
        let r = residual(&t);
        let w: Vec<f64> = cols.iter().map(|c| dot(c, &r)).collect();
        let Some(enter) = (0..k)
            .filter(|&i| !passive[i] && !blocked[i] && w[i] > tol)
            .max_by(|&a, &b| w[a].total_cmp(&w[b]))
        else {
            break;
        };
        passive[enter] = true;
        loop {
            let Some(z) = solve_passive(&passive) else {
                // Dependent column: it cannot reduce the residual further.
                passive[enter] = false;
                blocked[enter] = true;
                break;
            };
            if (0..k).filter(|&i| passive[i]).all(|i| z[i] > 0.0) {
                t = z;
                blocked.iter_mut().for_each(|b| *b = false);
                break;
            }
            let alpha = (0..k)
                .filter(|&i| passive[i] && z[i] <= 0.0)
                .map(|i| t[i] / (t[i] - z[i]))
                .fold(f64::INFINITY, f64::min);
            for i in 0..k {
                t[i] += alpha * (z[i] - t[i]);
                if passive[i] && t[i] <= 1e-15 {
                    passive[i] = false;
                    t[i] = 0.0;
                }
            }
        }
    }
    t
}

/// Distance from `v` to the normal cone of `conv(points)` at `x`, which by
/// Moreau's decomposition equals the norm of the projection of `v` onto the
/// cone generated by `y − x`. An isolated point has the whole space as its
/// normal cone, so the distance is 0.
pub fn tangent_cone_distance(v: &[f64], x: &BinaryVector, feasible_points: &[BinaryVector]) -> f64 {
    let xf = x.to_f64();
    let cols: Vec<Vec<f64>> = feasible_points
        .iter()
        .filter(|y| *y != x)
        .map(|y| y.to_f64().iter().zip(&xf).map(|(a, b)| a - b).collect())
        .collect();
    if cols.is_empty() {
        return 0.0;
    }
    let t = nnls(&cols, v);
    let mut p = vec![0.0; v.len()];
    for (c, tc) in cols.iter().zip(t) {
        for (pi, ci) in p.iter_mut().zip(c) {
            *pi += tc * ci;
        }
    }
    norm(&p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CertificateKind {
    KktLp,
    NormalConeMembership,
    GradientNorm,
    TangentDistance,
}

impl CertificateKind {
    pub fn name(self) -> &'static str {
        match self {
            CertificateKind::KktLp => "KKT_LP",
            CertificateKind::NormalConeMembership => "NORMAL_CONE_MEMBERSHIP",
            CertificateKind::GradientNorm => "GRADIENT_NORM",
            CertificateKind::TangentDistance => "TANGENT_DISTANCE",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub kind: CertificateKind,
    pub passed: bool,
    pub distance: Option<f64>,
    pub lambdas: Vec<f64>,
    pub m1: Option<f64>,
    pub m2: Option<f64>,
    /// `cᵀx*` and the best `cᵀx` over `K` for the KKT check.
    pub point_value: Option<f64>,
    pub lp_value: Option<f64>,
}

impl Certificate {
    fn new(kind: CertificateKind, passed: bool) -> Self {
        Certificate {
            kind,
            passed,
            distance: None,
            lambdas: Vec::new(),
            m1: None,
            m2: None,
            point_value: None,
            lp_value: None,
        }
    }
}

fn lagrangian_direction(
    problem: &Problem,
    x: &[f64],
    lambda: &[f64],
) -> Result<Vec<f64>, EvalError> {
    let mut c = problem.objective.gradient(x)?.values().to_vec();
    for (g, &l) in problem.constraints.iter().zip(lambda) {
        if l != 0.0 {
            for (ci, gi) in c.iter_mut().zip(g.gradient(x)?.values()) {
                *ci -= l * gi;
            }
        }
    }
    Ok(c)
}

fn linear_max(problem: &Problem, c: Vec<f64>) -> Result<(BinaryVector, f64), AnalysisError> {
    let model = build_master(problem.polyhedron.clone(), vec![], vec![], &[], ObjectiveMode::Linear(c))?;
    let sol = solve_exact(&model)?;
    let x = sol.x.ok_or(AnalysisError::EmptyFeasibleSet)?;
    Ok((x, sol.value))
}

/// Checks that `x*` maximizes `⟨∇f(x*) − Σλ_j∇g_j(x*), x⟩` over `K ∩ {0,1}ⁿ`.
pub fn kkt_certificate(
    problem: &Problem,
    x_star: &BinaryVector,
    lambda: &[f64],
) -> Result<Certificate, AnalysisError> {
    if lambda.len() != problem.m() {
        return Err(AnalysisError::MultiplierCount {
            expected: problem.m(),
            got: lambda.len(),
        });
    }
    if !classify_point(problem, x_star)?.is_feasible() {
        return Err(AnalysisError::InfeasiblePoint(x_star.clone()));
    }
    let g = problem.constraint_values(x_star)?;
    for (j, (&l, &gj)) in lambda.iter().zip(&g).enumerate() {
        if l < 0.0 {
            return Err(AnalysisError::NegativeMultiplier { j, value: l });
        }
        if (l * gj).abs() > KKT_TOL {
            return Err(AnalysisError::Complementarity { j, product: l * gj });
        }
    }
    let xf = x_star.to_f64();
    let c = lagrangian_direction(problem, &xf, lambda)?;
    let at_point = dot(&c, &xf);
    let (_, best) = linear_max(problem, c)?;
    let mut cert = Certificate::new(CertificateKind::KktLp, best <= at_point + rel_tol(at_point));
    cert.lambdas = lambda.to_vec();
    cert.point_value = Some(at_point);
    cert.lp_value = Some(best);
    Ok(cert)
}

/// Searches multipliers on the active constraints (`|g_j(x*)| ≤ 1e-9`) that
/// make [`kkt_certificate`] pass. Rows of the multiplier LP are generated
/// lazily from the linear master, so `K` is never enumerated. Returns `None`
/// when no such multipliers exist.
pub fn find_kkt_multipliers(
    problem: &Problem,
    x_star: &BinaryVector,
) -> Result<Option<Vec<f64>>, AnalysisError> {
    if !classify_point(problem, x_star)?.is_feasible() {
        return Err(AnalysisError::InfeasiblePoint(x_star.clone()));
    }
    let xf = x_star.to_f64();
    let g = problem.constraint_values(x_star)?;
    let active: Vec<usize> = (0..problem.m()).filter(|&j| g[j].abs() <= TOL_FEAS).collect();
    let grad_f = problem.objective.gradient(&xf)?;
    let grad_g = active
        .iter()
        .map(|&j| problem.constraints[j].gradient(&xf))
        .collect::<Result<Vec<_>, _>>()?;
    // Row for y: Σ_j λ_j ⟨∇g_j, x*−y⟩ ≤ ⟨∇f, x*−y⟩.
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();
    let mut seen: Vec<BinaryVector> = Vec::new();
    let mut lambda_active = vec![0.0; active.len()];
    loop {
        let mut lambda = vec![0.0; problem.m()];
        for (&j, &l) in active.iter().zip(&lambda_active) {
            lambda[j] = l;
        }
        let c = lagrangian_direction(problem, &xf, &lambda)?;
        let at_point = dot(&c, &xf);
        let (y, best) = linear_max(problem, c)?;
        if best <= at_point + rel_tol(at_point) {
            return Ok(Some(lambda));
        }
        if active.is_empty() || seen.contains(&y) {
            return Ok(None);
        }
        let yf = y.to_f64();
        let d: Vec<f64> = xf.iter().zip(&yf).map(|(a, b)| a - b).collect();
        rows.push(grad_g.iter().map(|gj| gj.dot(&d)).collect());
        rhs.push(grad_f.dot(&d));
        seen.push(y);
        // Smallest multipliers: maximize −Σλ.
        match maximize(&rows, &rhs, &vec![-1.0; active.len()]) {
            LpOutcome::Optimal { x, .. } => lambda_active = x,
            _ => return Ok(None),
        }
    }
}

/// Stationarity test of the dual theorem: `‖∇f(x)‖ < (M1 − M2)/√n`.
pub fn gradient_norm_certificate(problem: &Problem, x: &BinaryVector) -> Result<Certificate, AnalysisError> {
    let bf = brute_force_solve(problem)?;
    let g = problem.objective.gradient(&x.to_f64())?;
    let mut cert = gap_certificate(CertificateKind::GradientNorm, g.norm(), problem.n, &bf);
    cert.distance = Some(g.norm());
    Ok(cert)
}

/// `d(∇f(x), N(x)) < (M1 − M2)/√n` with the normal cone of `C` at `x`.
pub fn tangent_distance_certificate(
    problem: &Problem,
    x: &BinaryVector,
) -> Result<Certificate, AnalysisError> {
    let bf = brute_force_solve(problem)?;
    let g = problem.objective.gradient(&x.to_f64())?;
    let d = tangent_cone_distance(g.values(), x, &bf.sets.feasible);
    let mut cert = gap_certificate(CertificateKind::TangentDistance, d, problem.n, &bf);
    cert.distance = Some(d);
    Ok(cert)
}

/// `∇f(x) ∈ N(x)`, to within 1e-7.
pub fn normal_cone_certificate(problem: &Problem, x: &BinaryVector) -> Result<Certificate, AnalysisError> {
    let sets = split_points(problem)?;
    let g = problem.objective.gradient(&x.to_f64())?;
    let d = tangent_cone_distance(g.values(), x, &sets.feasible);
    let mut cert = Certificate::new(CertificateKind::NormalConeMembership, d <= 1e-7);
    cert.distance = Some(d);
    Ok(cert)
}

fn gap_certificate(kind: CertificateKind, measure: f64, n: usize, bf: &BruteForce) -> Certificate {
    // With a single level the bound is vacuous; report gap 0 and fail.
    let passed = !bf.single_level() && measure < (bf.value - bf.second_value) / (n as f64).sqrt();
    let mut cert = Certificate::new(kind, passed);
    cert.m1 = Some(bf.value);
    cert.m2 = Some(if bf.single_level() { bf.value } else { bf.second_value });
    cert
}

/// `2·min{g_j(x) > 0} / max{‖x − x^k‖² : g_j(x) > 0, x ≠ x^k}` over
/// `K ∩ {0,1}ⁿ`; `+∞` when the denominator set is empty.
pub fn lipschitz_threshold(problem: &Problem, j: usize, xk: &BinaryVector) -> Result<f64, AnalysisError> {
    if j >= problem.m() {
        return Err(AnalysisError::NoSuchConstraint(j));
    }
    let mut min_g = f64::INFINITY;
    let mut max_d = 0usize;
    let mut any = false;
    for x in enumerate_binary_points(&problem.polyhedron, ENUMERATION_LIMIT)? {
        let g = problem.constraints[j].eval(&x.to_f64())?;
        if g > TOL_FEAS {
            min_g = min_g.min(g);
            if &x != xk {
                any = true;
                max_d = max_d.max(x.squared_distance(xk));
            }
        }
    }
    Ok(if any { 2.0 * min_g / max_d as f64 } else { f64::INFINITY })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceViolation {
    pub k: usize,
    pub l: usize,
    pub what: &'static str,
    pub excess: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TraceAudit {
    pub violations: Vec<TraceViolation>,
    pub notices: Vec<String>,
    /// `(N, iterations with δ_k > √N, 2^{n−N})` for `N = 1..n`.
    pub delta_counts: Vec<(u32, usize, u128)>,
}

impl TraceAudit {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty() && self.delta_counts.iter().all(|&(_, c, b)| c as u128 <= b)
    }
}

/// Replays an Algorithm-1 trace. `x0` is the starting point (index 0);
/// trace records keep their own `k`. `lipschitz` holds `L(g_j)` for the
/// constraint half; without it that half is skipped.
pub fn verify_trace_inequalities(
    problem: &Problem,
    x0: &BinaryVector,
    trace: &[TraceRecord],
    optimal_value: f64,
    lipschitz: Option<&[f64]>,
) -> Result<TraceAudit, AnalysisError> {
    let mut audit = TraceAudit::default();
    if lipschitz.is_none() && problem.m() > 0 {
        audit.notices.push("no Lipschitz constants: constraint inequalities skipped".into());
    }
    // (k, x, θ or None for the start point)
    let mut points: Vec<(usize, &BinaryVector, Option<f64>)> = vec![(0, x0, None)];
    points.extend(trace.iter().map(|r| (r.k, &r.x, Some(r.theta))));

    let mut deltas = Vec::new();
    let mut cut_seen: Vec<&BinaryVector> = Vec::new();
    for (idx, &(k, xk, _)) in points.iter().enumerate() {
        let xkf = xk.to_f64();
        let class = classify_point(problem, xk)?;
        let first = !cut_seen.contains(&xk);
        cut_seen.push(xk);
        if class.is_feasible() {
            let fk = problem.objective_value(xk)?;
            let grad = problem.objective.gradient(&xkf)?;
            if first {
                deltas.push(delta_k(optimal_value, fk, &grad));
            }
            let tol = rel_tol(optimal_value);
            if optimal_value - fk < -tol {
                audit.violations.push(TraceViolation { k, l: k, what: "f(x^k) ≤ optimal", excess: fk - optimal_value });
            }
            for &(l, xl, theta) in &points[idx + 1..] {
                let theta = theta.expect("later points come from the master");
                let step = grad.dot(&xl.to_f64()) - grad.dot(&xkf);
                if optimal_value > theta + tol {
                    audit.violations.push(TraceViolation { k, l, what: "optimal ≤ θ^l", excess: optimal_value - theta });
                }
                if theta - fk > step + rel_tol(theta) {
                    audit.violations.push(TraceViolation { k, l, what: "θ^l − f(x^k) ≤ ⟨∇f(x^k), x^l − x^k⟩", excess: theta - fk - step });
                }
            }
        } else if let Some(ls) = lipschitz {
            for &j in &class.active_set {
                for &(l, xl, _) in &points[idx + 1..] {
                    let gl = problem.constraints[j].eval(&xl.to_f64())?;
                    let bound = 0.5 * ls[j] * xk.squared_distance(xl) as f64;
                    if gl > bound + rel_tol(bound) {
                        audit.violations.push(TraceViolation { k, l, what: "g_j(x^l) ≤ ½L‖x^k − x^l‖²", excess: gl - bound });
                    }
                }
            }
        }
    }
    let n = problem.n as u32;
    for big_n in 1..=n {
        let count = deltas.iter().filter(|&&d| d > (big_n as f64).sqrt()).count();
        audit.delta_counts.push((big_n, count, iteration_bound(n, big_n)?));
    }
    Ok(audit)
}
