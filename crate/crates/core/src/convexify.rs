//! Penalty convexification and the Lipschitz-envelope cut factory.
//!
//! `f_μ(x) = f(x) − μ Σ_{i∈S}(x_i² − x_i)` and
//! `g_λ(x) = g(x) + λ Σ_{i∈S}(x_i² − x_i)` agree with `f`, `g` on binary
//! points. `S` is the set of variables the function is curved in.

use crate::cuts::{CutError, LipschitzCuts};
use crate::expr::{BoundError, Expr, Expression, NonlinearFunction, Quadratic};
use crate::linalg::Matrix;
use crate::model::Problem;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConvexifyError {
    #[error("penalty config has {got} constraint penalties, problem has {expected} constraints")]
    Dimension { expected: usize, got: usize },
    #[error("penalty {0} is negative")]
    Negative(f64),
    #[error("{which}: {source}")]
    Unsupported {
        which: String,
        #[source]
        source: BoundError,
    },
    #[error(transparent)]
    Cut(#[from] CutError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    User,
    AutoRowSum,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyConfig {
    pub mu: f64,
    pub lambdas: Vec<f64>,
    pub mu_provenance: Provenance,
    pub lambda_provenance: Vec<Provenance>,
}

impl PenaltyConfig {
    pub fn user(mu: f64, lambdas: Vec<f64>) -> Self {
        let m = lambdas.len();
        PenaltyConfig {
            mu,
            lambdas,
            mu_provenance: Provenance::User,
            lambda_provenance: vec![Provenance::User; m],
        }
    }

    pub fn zero(m: usize) -> Self {
        PenaltyConfig::user(0.0, vec![0.0; m])
    }
}

/// Penalty mask: the curved variables, or every variable when the Hessian
/// cannot be bounded symbolically.
fn mask_for(func: &NonlinearFunction) -> Vec<bool> {
    func.curved_variables().unwrap_or_else(|| vec![true; func.dim()])
}

/// Adds `weight · Σ_{i∈mask}(x_i² − x_i)` to `func`.
pub fn add_binary_penalty(func: &NonlinearFunction, weight: f64, mask: &[bool]) -> NonlinearFunction {
    if weight == 0.0 || !mask.iter().any(|&b| b) {
        return func.clone();
    }
    match func {
        NonlinearFunction::Quadratic(q) => {
            let n = q.dim();
            let mut qm: Matrix = q.q_mat().clone();
            let mut lin = q.lin().to_vec();
            for i in (0..n).filter(|&i| mask[i]) {
                qm[(i, i)] += 2.0 * weight;
                lin[i] -= weight;
            }
            NonlinearFunction::Quadratic(Quadratic::new(qm, lin, q.constant()))
        }
        NonlinearFunction::Expression(e) => {
            let n = e.dim();
            let sum = (0..n)
                .filter(|&i| mask[i])
                .map(|i| {
                    Expr::Sub(
                        Box::new(Expr::Pow(Box::new(Expr::Var(i)), 2)),
                        Box::new(Expr::Var(i)),
                    )
                })
                .reduce(|a, b| Expr::Add(Box::new(a), Box::new(b)))
                .expect("mask is nonempty");
            let root = Expr::Add(
                Box::new(e.root().clone()),
                Box::new(Expr::Mul(Box::new(Expr::Num(weight)), Box::new(sum))),
            );
            NonlinearFunction::Expression(Expression::from_tree(root, n).expect("same variables"))
        }
    }
}

/// Builds `(NP_{μ,λ})`. Values on binary points are unchanged.
pub fn penalty_transform(problem: &Problem, config: &PenaltyConfig) -> Result<Problem, ConvexifyError> {
    if config.lambdas.len() != problem.m() {
        return Err(ConvexifyError::Dimension {
            expected: problem.m(),
            got: config.lambdas.len(),
        });
    }
    if let Some(&bad) = std::iter::once(&config.mu).chain(&config.lambdas).find(|v| **v < 0.0) {
        return Err(ConvexifyError::Negative(bad));
    }
    let objective = add_binary_penalty(&problem.objective, -config.mu, &mask_for(&problem.objective));
    let constraints = problem
        .constraints
        .iter()
        .zip(&config.lambdas)
        .map(|(g, &l)| add_binary_penalty(g, l, &mask_for(g)))
        .collect();
    Ok(Problem::new(objective, constraints, problem.polyhedron.clone()))
}

/// `μ = ½·Λ(f)`, `λ_j = ½·Λ(g_j)` with `Λ` the absolute row-sum bound.
pub fn auto_penalties(problem: &Problem) -> Result<PenaltyConfig, ConvexifyError> {
    let half_bound = |func: &NonlinearFunction, which: String| {
        func.hessian_row_sum_bound()
            .map(|b| (0.5 * b).max(0.0))
            .map_err(|source| ConvexifyError::Unsupported { which, source })
    };
    let mu = half_bound(&problem.objective, "objective".into())?;
    let lambdas = problem
        .constraints
        .iter()
        .enumerate()
        .map(|(j, g)| half_bound(g, format!("constraint {}", j + 1)))
        .collect::<Result<Vec<_>, _>>()?;
    let m = lambdas.len();
    Ok(PenaltyConfig {
        mu,
        lambdas,
        mu_provenance: Provenance::AutoRowSum,
        lambda_provenance: vec![Provenance::AutoRowSum; m],
    })
}

/// Cut factory for the Lipschitz linearization `LP_L`.
pub fn lipschitz_linearization(
    problem: &Problem,
    l_f: f64,
    l_g: Vec<f64>,
) -> Result<LipschitzCuts, ConvexifyError> {
    if l_g.len() != problem.m() {
        return Err(ConvexifyError::Dimension {
            expected: problem.m(),
            got: l_g.len(),
        });
    }
    Ok(LipschitzCuts::new(l_f, l_g)?)
}
