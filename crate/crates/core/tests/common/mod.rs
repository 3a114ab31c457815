//! Instance generators and an independent brute-force oracle. The oracle
//! evaluates the raw integer data directly and shares no code with the
//! solver beyond the tolerance value.
#![allow(dead_code)]

use bincut::cuts::{Cut, CutFamily};
use bincut::expr::NonlinearFunction;
use bincut::linalg::Matrix;
use bincut::master::{build_master, MasterModel, ObjectiveMode};
use bincut::model::{BinaryVector, LinearPolyhedron, Problem};
use rand::Rng;
use std::io::Write;

pub const FEAS_TOL: f64 = 1e-9;

/// `½xᵀQx + qᵀx + c` as plain data.
#[derive(Debug, Clone)]
pub struct RawQuad {
    pub q: Vec<Vec<f64>>,
    pub lin: Vec<f64>,
    pub c: f64,
}

impl RawQuad {
    pub fn eval(&self, x: &[u8]) -> f64 {
        let n = x.len();
        let mut v = self.c;
        for i in 0..n {
            if x[i] == 1 {
                v += self.lin[i];
                for j in 0..n {
                    if x[j] == 1 {
                        v += 0.5 * self.q[i][j];
                    }
                }
            }
        }
        v
    }

    pub fn gradient(&self, x: &[u8]) -> Vec<f64> {
        (0..x.len())
            .map(|i| self.lin[i] + (0..x.len()).map(|j| self.q[i][j] * x[j] as f64).sum::<f64>())
            .collect()
    }

    pub fn to_function(&self) -> NonlinearFunction {
        NonlinearFunction::quadratic(Matrix::from_rows(&self.q).unwrap(), self.lin.clone(), self.c)
    }
}

#[derive(Debug, Clone)]
pub struct RawInstance {
    pub n: usize,
    pub f: RawQuad,
    pub g: Vec<RawQuad>,
    pub rows: Vec<(Vec<f64>, f64)>,
}

pub fn bits(index: u64, n: usize) -> Vec<u8> {
    (0..n).map(|i| ((index >> (n - 1 - i)) & 1) as u8).collect()
}

impl RawInstance {
    pub fn problem(&self) -> Problem {
        Problem::new(
            self.f.to_function(),
            self.g.iter().map(RawQuad::to_function).collect(),
            LinearPolyhedron::from_rows(&self.rows, self.n).unwrap(),
        )
    }

    pub fn in_k(&self, x: &[u8]) -> bool {
        self.rows.iter().all(|(a, b)| {
            a.iter().zip(x).map(|(ai, &xi)| ai * xi as f64).sum::<f64>() <= *b
        })
    }

    pub fn feasible(&self, x: &[u8]) -> bool {
        self.in_k(x) && self.g.iter().all(|g| g.eval(x) <= FEAS_TOL)
    }

    pub fn points(&self) -> impl Iterator<Item = Vec<u8>> + '_ {
        (0..1u64 << self.n).map(|k| bits(k, self.n))
    }

    /// Maximum of `f` over the feasible points and every point attaining it
    /// (up to 1e-9 relative).
    pub fn brute_force(&self) -> Option<(f64, Vec<Vec<u8>>)> {
        let feas: Vec<(Vec<u8>, f64)> = self
            .points()
            .filter(|x| self.feasible(x))
            .map(|x| {
                let v = self.f.eval(&x);
                (x, v)
            })
            .collect();
        let best = feas.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
        if feas.is_empty() {
            return None;
        }
        let tol = 1e-9 * best.abs().max(1.0);
        let argmax = feas.into_iter().filter(|p| best - p.1 <= tol).map(|p| p.0).collect();
        Some((best, argmax))
    }

    pub fn first_feasible(&self) -> Option<BinaryVector> {
        self.points().find(|x| self.feasible(x)).map(BinaryVector::new)
    }
}

fn int_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize, lo: i32, hi: i32) -> Vec<Vec<f64>> {
    (0..rows)
        .map(|_| (0..cols).map(|_| rng.gen_range(lo..=hi) as f64).collect())
        .collect()
}

/// `±BᵀB` for an integer `B`.
fn gram<R: Rng>(rng: &mut R, n: usize, sign: f64) -> Vec<Vec<f64>> {
    let r = n / 2 + 1;
    let b = int_matrix(rng, r, n, -3, 3);
    (0..n)
        .map(|i| (0..n).map(|j| sign * (0..r).map(|k| b[k][i] * b[k][j]).sum::<f64>()).collect())
        .collect()
}

fn knapsack_rows<R: Rng>(rng: &mut R, n: usize) -> Vec<(Vec<f64>, f64)> {
    let count = rng.gen_range(1..=2);
    (0..count)
        .map(|_| {
            let a: Vec<f64> = (0..n).map(|_| rng.gen_range(1..=10) as f64).collect();
            let cap = (a.iter().sum::<f64>() * rng.gen_range(0.3..0.7)).floor();
            (a, cap)
        })
        .collect()
}

/// Concave quadratic `f` with integer data.
pub fn concave_objective<R: Rng>(rng: &mut R, n: usize) -> RawQuad {
    RawQuad {
        q: gram(rng, n, -1.0),
        lin: (0..n).map(|_| rng.gen_range(-5..=20) as f64).collect(),
        c: 0.0,
    }
}

/// Convex quadratic `f` with integer data.
pub fn convex_objective<R: Rng>(rng: &mut R, n: usize) -> RawQuad {
    RawQuad {
        q: gram(rng, n, 1.0),
        lin: (0..n).map(|_| rng.gen_range(-10..=10) as f64).collect(),
        c: 0.0,
    }
}

/// Concave `f`, knapsack rows, no nonlinear constraints.
pub fn concave_linear<R: Rng>(rng: &mut R, n: usize) -> RawInstance {
    RawInstance {
        n,
        f: concave_objective(rng, n),
        g: vec![],
        rows: knapsack_rows(rng, n),
    }
}

/// Convex quadratic `g` capped at the median of its values over `K`, so
/// that both `C` and `C̄` are usually nonempty.
fn convex_constraint<R: Rng>(rng: &mut R, n: usize, inst: &RawInstance) -> RawQuad {
    let mut g = RawQuad {
        q: gram(rng, n, 1.0),
        lin: (0..n).map(|_| rng.gen_range(-5..=5) as f64).collect(),
        c: 0.0,
    };
    let mut vals: Vec<f64> = inst.points().filter(|x| inst.in_k(x)).map(|x| g.eval(&x)).collect();
    vals.sort_by(f64::total_cmp);
    g.c = -vals[vals.len() / 2];
    g
}

/// Concave `f`, knapsack rows and one or two convex quadratic constraints.
pub fn concave_convex<R: Rng>(rng: &mut R, n: usize) -> RawInstance {
    let mut inst = concave_linear(rng, n);
    let m = rng.gen_range(1..=2);
    for _ in 0..m {
        let g = convex_constraint(rng, n, &inst);
        inst.g.push(g);
    }
    inst
}

/// Random master model: up to three rows, random tangent cuts, an optional
/// fixing, and either mode.
pub fn random_master<R: Rng>(rng: &mut R, max_n: usize) -> MasterModel {
    let n = rng.gen_range(1..=max_n);
    let rows: Vec<(Vec<f64>, f64)> = (0..rng.gen_range(0..=3))
        .map(|_| {
            let a: Vec<f64> = (0..n).map(|_| rng.gen_range(-3..=10) as f64).collect();
            let b = rng.gen_range(0..=(5 * n as i32)) as f64;
            (a, b)
        })
        .collect();
    let poly = LinearPolyhedron::from_rows(&rows, n).unwrap();
    let cut = |rng: &mut R, family| {
        let a: Vec<f64> = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
        Cut::new(family, a, rng.gen_range(-10.0..10.0))
    };
    let feas = (0..rng.gen_range(0..=3)).map(|_| cut(rng, CutFamily::FeasTangent)).collect();
    let mut fix = Vec::new();
    if n > 1 && rng.gen_bool(0.3) {
        fix.push((rng.gen_range(0..n), rng.gen_range(0..=1u8)));
    }
    if rng.gen_bool(0.5) {
        let opt = (0..rng.gen_range(1..=5)).map(|_| cut(rng, CutFamily::OptTangent)).collect();
        build_master(poly, opt, feas, &fix, ObjectiveMode::Theta).unwrap()
    } else {
        let c = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
        build_master(poly, vec![], feas, &fix, ObjectiveMode::Linear(c)).unwrap()
    }
}

/// Prints one acceptance line outside the test harness's output capture.
pub fn report(criterion: u32, title: &str, passed: bool, detail: &str) {
    let verdict = if passed { "PASS" } else { "FAIL" };
    let mut err = std::io::stderr().lock();
    writeln!(err, "criterion {criterion:>2} [{title}]: {verdict} ({detail})").unwrap();
}
