//! Quadratic knapsack instances with identical weights:
//! maximize `½xᵀQx + qᵀx` subject to `Σx_i ≤ m`, where `Q` is a squared
//! Euclidean distance matrix.

use crate::expr::NonlinearFunction;
use crate::linalg::{jacobi_eigenvalues, squared_distance, Matrix};
use crate::model::{BinaryVector, LinearPolyhedron, Problem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt::Write;
use thiserror::Error;

/// Random sum-zero probes used by [`cnd_check`].
const CND_PROBES: usize = 100;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QkpError {
    #[error("instance needs at least 2 items, got {0}")]
    TooSmall(usize),
    #[error("capacity {m} outside 2..={n}")]
    Capacity { m: usize, n: usize },
    #[error("matrix is not symmetric")]
    Asymmetric,
    #[error("{what} has length {got}, expected {expected}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QkpForm {
    /// `Σx_i ≤ m`.
    Inequality,
    /// `Σx_i = m`, as two opposing rows.
    Equality,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QkpInstance {
    pub n: usize,
    pub q_mat: Matrix,
    pub q: Vec<f64>,
    pub m: usize,
    /// Point dimension `s`, points and seed; absent for hand-built instances.
    pub s: Option<usize>,
    pub points: Option<Vec<Vec<f64>>>,
    pub seed: Option<u64>,
}

impl QkpInstance {
    pub fn new(q_mat: Matrix, q: Vec<f64>, m: usize) -> Result<Self, QkpError> {
        let n = q.len();
        if n < 2 {
            return Err(QkpError::TooSmall(n));
        }
        if q_mat.rows() != n || !q_mat.is_square() {
            return Err(QkpError::Dimension {
                what: "Q",
                expected: n,
                got: q_mat.rows(),
            });
        }
        if !q_mat.is_symmetric(0.0) {
            return Err(QkpError::Asymmetric);
        }
        if !(2..=n).contains(&m) {
            return Err(QkpError::Capacity { m, n });
        }
        Ok(QkpInstance {
            n,
            q_mat,
            q,
            m,
            s: None,
            points: None,
            seed: None,
        })
    }

    /// `Q_ij = ‖v_i − v_j‖²`.
    pub fn from_points(points: Vec<Vec<f64>>, q: Vec<f64>, m: usize) -> Result<Self, QkpError> {
        let n = points.len();
        if q.len() != n {
            return Err(QkpError::Dimension {
                what: "q",
                expected: n,
                got: q.len(),
            });
        }
        let s = points.first().map_or(0, |p| p.len());
        if let Some(p) = points.iter().find(|p| p.len() != s) {
            return Err(QkpError::Dimension {
                what: "point",
                expected: s,
                got: p.len(),
            });
        }
        let mut q_mat = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                q_mat[(i, j)] = squared_distance(&points[i], &points[j]);
            }
        }
        let mut inst = QkpInstance::new(q_mat, q, m)?;
        inst.s = Some(s);
        inst.points = Some(points);
        Ok(inst)
    }
}

/// Draws, in order: `s ∈ [1,10]`, the `n` points with integer entries in
/// `[1,10000]` (a point equal to an earlier one is redrawn), `q_i ∈ [1,10000]`
/// and `m ∈ {2..n}`, all from `ChaCha8Rng::seed_from_u64(seed)`.
pub fn generate_instance(n: usize, seed: u64) -> Result<QkpInstance, QkpError> {
    if n < 2 {
        return Err(QkpError::TooSmall(n));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = rng.gen_range(1..=10usize);
    let mut points: Vec<Vec<f64>> = Vec::with_capacity(n);
    while points.len() < n {
        let p: Vec<f64> = (0..s).map(|_| rng.gen_range(1..=10_000u32) as f64).collect();
        if !points.contains(&p) {
            points.push(p);
        }
    }
    let q: Vec<f64> = (0..n).map(|_| rng.gen_range(1.0..=10_000.0)).collect();
    let m = rng.gen_range(2..=n);
    let mut inst = QkpInstance::from_points(points, q, m)?;
    inst.seed = Some(seed);
    Ok(inst)
}

/// Conditionally negative definite test: exactly one eigenvalue above
/// `1e-8·‖Q‖`, and `xᵀQx ≤ 1e-6·‖Q‖‖x‖²` on random sum-zero vectors.
pub fn cnd_check(q_mat: &Matrix) -> Result<bool, QkpError> {
    if !q_mat.is_symmetric(1e-12) {
        return Err(QkpError::Asymmetric);
    }
    let n = q_mat.rows();
    let scale = q_mat.frobenius_norm();
    let positive = jacobi_eigenvalues(q_mat, 1e-10)
        .iter()
        .filter(|&&e| e > 1e-8 * scale)
        .count();
    if positive != 1 {
        return Ok(false);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..CND_PROBES {
        let mut x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mean = x.iter().sum::<f64>() / n as f64;
        x.iter_mut().for_each(|v| *v -= mean);
        let norm2: f64 = x.iter().map(|v| v * v).sum();
        if q_mat.quad_form(&x) > 1e-6 * scale * norm2 {
            return Ok(false);
        }
    }
    Ok(true)
}

pub fn qkp_to_problem(instance: &QkpInstance, form: QkpForm) -> Problem {
    let n = instance.n;
    let objective = NonlinearFunction::quadratic(instance.q_mat.clone(), instance.q.clone(), 0.0);
    let m = instance.m as f64;
    let mut rows = vec![(vec![1.0; n], m)];
    if form == QkpForm::Equality {
        rows.push((vec![-1.0; n], -m));
    }
    let polyhedron = LinearPolyhedron::from_rows(&rows, n).expect("rows have length n");
    Problem::new(objective, vec![], polyhedron)
}

/// The `m` items with the largest `q_i`, ties to the lower index.
pub fn greedy_start(instance: &QkpInstance) -> BinaryVector {
    let mut order: Vec<usize> = (0..instance.n).collect();
    order.sort_by(|&a, &b| instance.q[b].total_cmp(&instance.q[a]).then(a.cmp(&b)));
    let mut bits = vec![0u8; instance.n];
    for &i in &order[..instance.m] {
        bits[i] = 1;
    }
    BinaryVector::new(bits)
}

/// `(UB − LB)/UB·100`; `None` when `UB ≤ 0`.
pub fn optimality_gap(ub: f64, lb: f64) -> Option<f64> {
    (ub > 0.0).then(|| (ub - lb) / ub * 100.0)
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

/// Text form with sections `N`, `M`, `SEED`, `S`, `Q`, `q`, `POINTS`.
pub fn serialize(instance: &QkpInstance) -> String {
    let mut out = String::from("# quadratic knapsack instance\n");
    writeln!(out, "N {}", instance.n).unwrap();
    writeln!(out, "M {}", instance.m).unwrap();
    if let Some(seed) = instance.seed {
        writeln!(out, "SEED {seed}").unwrap();
    }
    if let Some(s) = instance.s {
        writeln!(out, "S {s}").unwrap();
    }
    out.push_str("Q\n");
    for i in 0..instance.n {
        writeln!(out, "{}", join(instance.q_mat.row(i))).unwrap();
    }
    writeln!(out, "q\n{}", join(&instance.q)).unwrap();
    if let Some(points) = &instance.points {
        out.push_str("POINTS\n");
        for p in points {
            writeln!(out, "{}", join(p)).unwrap();
        }
    }
    out
}

/// True when `text` looks like a [`serialize`]d instance.
pub fn is_qkp_text(text: &str) -> bool {
    text.lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with('#'))
        .is_some_and(|l| l.starts_with("N "))
}

pub fn parse(text: &str) -> Result<QkpInstance, QkpError> {
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty())
        .collect();
    let err = |line: usize, msg: &str| QkpError::Parse {
        line,
        msg: msg.to_string(),
    };
    let nums = |line: usize, l: &str| -> Result<Vec<f64>, QkpError> {
        l.split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| err(line, &format!("bad number {t:?}"))))
            .collect()
    };
    let scalar = |line: usize, v: &str| -> Result<u64, QkpError> {
        v.trim().parse().map_err(|_| err(line, &format!("bad integer {v:?}")))
    };

    let (mut n, mut m, mut seed, mut s) = (None, None, None, None);
    let mut q_rows: Vec<Vec<f64>> = Vec::new();
    let mut q = None;
    let mut points: Option<Vec<Vec<f64>>> = None;
    let mut i = 0;
    while i < lines.len() {
        let (ln, l) = lines[i];
        let (key, rest) = l.split_once(' ').unwrap_or((l, ""));
        i += 1;
        match key {
            "N" => n = Some(scalar(ln, rest)? as usize),
            "M" => m = Some(scalar(ln, rest)? as usize),
            "SEED" => seed = Some(scalar(ln, rest)?),
            "S" => s = Some(scalar(ln, rest)? as usize),
            "Q" | "q" | "POINTS" => {
                let count = match key {
                    "q" => 1,
                    "Q" => n.ok_or_else(|| err(ln, "Q before N"))?,
                    _ => n.ok_or_else(|| err(ln, "POINTS before N"))?,
                };
                if i + count > lines.len() {
                    return Err(err(ln, &format!("{key} needs {count} rows")));
                }
                let block = lines[i..i + count]
                    .iter()
                    .map(|&(lno, row)| nums(lno, row))
                    .collect::<Result<Vec<_>, _>>()?;
                i += count;
                match key {
                    "Q" => q_rows = block,
                    "q" => q = block.into_iter().next(),
                    _ => points = Some(block),
                }
            }
            other => return Err(err(ln, &format!("unknown section {other:?}"))),
        }
    }
    let n = n.ok_or_else(|| err(0, "missing N"))?;
    let m = m.ok_or_else(|| err(0, "missing M"))?;
    let q = q.ok_or_else(|| err(0, "missing q"))?;
    if q.len() != n {
        return Err(QkpError::Dimension {
            what: "q",
            expected: n,
            got: q.len(),
        });
    }
    let q_mat = Matrix::from_rows(&q_rows)
        .filter(|mat| mat.cols() == n && mat.rows() == n)
        .ok_or(QkpError::Dimension {
            what: "Q",
            expected: n,
            got: q_rows.len(),
        })?;
    let mut inst = QkpInstance::new(q_mat, q, m)?;
    inst.seed = seed;
    inst.s = s;
    inst.points = points;
    Ok(inst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_cnd() {
        let a = generate_instance(8, 42).unwrap();
        assert_eq!(a, generate_instance(8, 42).unwrap());
        assert_ne!(a, generate_instance(8, 43).unwrap());
        assert!(cnd_check(&a.q_mat).unwrap());
        assert!((2..=8).contains(&a.m));
        assert!(generate_instance(1, 0).is_err());
    }

    #[test]
    fn collinear_points() {
        let inst = QkpInstance::from_points(vec![vec![0.0], vec![3.0], vec![4.0]], vec![1.0; 3], 2).unwrap();
        assert_eq!(
            inst.q_mat,
            Matrix::from_rows(&[vec![0.0, 9.0, 16.0], vec![9.0, 0.0, 1.0], vec![16.0, 1.0, 0.0]]).unwrap()
        );
    }

    #[test]
    fn cnd_examples() {
        assert!(cnd_check(&Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap()).unwrap());
        assert!(!cnd_check(&Matrix::identity(3)).unwrap());
        assert!(cnd_check(&Matrix::from_rows(&[vec![0.0, 1.0], vec![2.0, 0.0]]).unwrap()).is_err());
    }

    #[test]
    fn greedy_examples() {
        let q_mat = Matrix::from_rows(&[vec![0.0, 1.0, 1.0], vec![1.0, 0.0, 1.0], vec![1.0, 1.0, 0.0]]).unwrap();
        let inst = QkpInstance::new(q_mat.clone(), vec![5.0, 1.0, 9.0], 2).unwrap();
        assert_eq!(greedy_start(&inst).to_string(), "101");
        let flat = QkpInstance::new(q_mat, vec![3.0; 3], 2).unwrap();
        assert_eq!(greedy_start(&flat).to_string(), "110");
    }

    #[test]
    fn gap_examples() {
        assert_eq!(optimality_gap(200.0, 150.0), Some(25.0));
        assert_eq!(optimality_gap(5.0, 5.0), Some(0.0));
        assert_eq!(optimality_gap(0.0, 0.0), None);
    }

    #[test]
    fn forms() {
        let inst = generate_instance(5, 1).unwrap();
        let ineq = qkp_to_problem(&inst, QkpForm::Inequality);
        let eq = qkp_to_problem(&inst, QkpForm::Equality);
        assert!(ineq.polyhedron.contains(&BinaryVector::zeros(5)));
        assert!(!eq.polyhedron.contains(&BinaryVector::zeros(5)));
        assert!(eq.polyhedron.contains(&greedy_start(&inst)));
    }

    #[test]
    fn text_round_trip() {
        let inst = generate_instance(6, 9).unwrap();
        let text = serialize(&inst);
        assert!(is_qkp_text(&text));
        assert_eq!(parse(&text).unwrap(), inst);
        assert!(matches!(parse("N 2\nM 2\nBOGUS\n"), Err(QkpError::Parse { line: 3, .. })));
    }
}
