//! The linear binary master problem: maximize `θ` (or `cᵀx`) over binary
//! points of `K` that satisfy the accumulated cuts.
//!
//! Two exact backends share one reduced form. Fixed variables are
//! substituted out before either backend runs.

mod bnb;
mod enumerate;
mod lp_format;
pub mod simplex;

pub use bnb::solve_branch_and_bound;
pub use enumerate::solve_enumerative;
pub use lp_format::write_lp;

use crate::cuts::Cut;
use crate::model::{BinaryVector, LinearPolyhedron};
use std::collections::BTreeMap;
use thiserror::Error;

/// Slack allowed on cut rows; polyhedron rows with integral data are exact.
pub const ROW_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MasterError {
    #[error("θ-mode master needs at least one optimality cut (the model is unbounded)")]
    Unbounded,
    #[error("variable x{} fixed to both 0 and 1", .0 + 1)]
    ContradictoryFixings(usize),
    #[error("fixing index {index} out of range for dimension {n}")]
    FixingOutOfRange { index: usize, n: usize },
    #[error("fixing value {0} is not binary")]
    FixingValue(u8),
    #[error("{what} has dimension {got}, expected {expected}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("{free} free variables exceed the enumeration limit {limit}")]
    TooLarge { free: usize, limit: usize },
    #[error("feasibility cut passed among optimality cuts (or vice versa)")]
    WrongFamily,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ObjectiveMode {
    /// Maximize `θ` subject to `θ ≤ aᵀx + rhs` for every optimality cut.
    Theta,
    /// Maximize `cᵀx`.
    Linear(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MasterModel {
    polyhedron: LinearPolyhedron,
    opt_cuts: Vec<Cut>,
    feas_cuts: Vec<Cut>,
    fixings: BTreeMap<usize, u8>,
    mode: ObjectiveMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MasterStatus {
    Optimal,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MasterSolution {
    pub status: MasterStatus,
    /// `None` exactly when infeasible.
    pub x: Option<BinaryVector>,
    /// `θ` in θ-mode, `cᵀx` in linear mode; `-∞` when infeasible.
    pub value: f64,
    pub node_count: u64,
}

impl MasterSolution {
    fn infeasible(node_count: u64) -> Self {
        MasterSolution {
            status: MasterStatus::Infeasible,
            x: None,
            value: f64::NEG_INFINITY,
            node_count,
        }
    }
}

/// Validates and assembles a master model. Fixings arrive as
/// `(index, value)` pairs so that contradictions can be detected.
pub fn build_master(
    polyhedron: LinearPolyhedron,
    opt_cuts: Vec<Cut>,
    feas_cuts: Vec<Cut>,
    fixings: &[(usize, u8)],
    mode: ObjectiveMode,
) -> Result<MasterModel, MasterError> {
    let n = polyhedron.dim();
    for cut in opt_cuts.iter().chain(&feas_cuts) {
        if cut.dim() != n {
            return Err(MasterError::Dimension {
                what: "cut",
                expected: n,
                got: cut.dim(),
            });
        }
    }
    if opt_cuts.iter().any(|c| !c.family.is_optimality())
        || feas_cuts.iter().any(|c| c.family.is_optimality())
    {
        return Err(MasterError::WrongFamily);
    }
    match &mode {
        ObjectiveMode::Theta if opt_cuts.is_empty() => return Err(MasterError::Unbounded),
        ObjectiveMode::Linear(c) if c.len() != n => {
            return Err(MasterError::Dimension {
                what: "objective",
                expected: n,
                got: c.len(),
            })
        }
        _ => {}
    }
    let mut map = BTreeMap::new();
    for &(index, value) in fixings {
        if index >= n {
            return Err(MasterError::FixingOutOfRange { index, n });
        }
        if value > 1 {
            return Err(MasterError::FixingValue(value));
        }
        if let Some(prev) = map.insert(index, value) {
            if prev != value {
                return Err(MasterError::ContradictoryFixings(index));
            }
        }
    }
    Ok(MasterModel {
        polyhedron,
        opt_cuts,
        feas_cuts,
        fixings: map,
        mode,
    })
}

impl MasterModel {
    pub fn dim(&self) -> usize {
        self.polyhedron.dim()
    }

    pub fn polyhedron(&self) -> &LinearPolyhedron {
        &self.polyhedron
    }

    pub fn opt_cuts(&self) -> &[Cut] {
        &self.opt_cuts
    }

    pub fn feas_cuts(&self) -> &[Cut] {
        &self.feas_cuts
    }

    pub fn fixings(&self) -> &BTreeMap<usize, u8> {
        &self.fixings
    }

    pub fn mode(&self) -> &ObjectiveMode {
        &self.mode
    }

    /// Objective value at `x` if it satisfies every row, cut and fixing.
    pub fn value_at(&self, x: &BinaryVector) -> Option<f64> {
        let xf = x.to_f64();
        if self.fixings.iter().any(|(&i, &v)| x.get(i) != v) || !self.polyhedron.contains(x) {
            return None;
        }
        if self.feas_cuts.iter().any(|c| c.affine_value(&xf) > ROW_TOL) {
            return None;
        }
        Some(match &self.mode {
            ObjectiveMode::Theta => self
                .opt_cuts
                .iter()
                .map(|c| c.affine_value(&xf))
                .fold(f64::INFINITY, f64::min),
            ObjectiveMode::Linear(c) => crate::linalg::dot(c, &xf),
        })
    }

    /// Substitutes the fixings (plus `extra`) out of every row.
    pub(crate) fn reduce(&self, extra: &BTreeMap<usize, u8>) -> Reduced {
        let n = self.dim();
        let fixed: BTreeMap<usize, u8> = self.fixings.iter().chain(extra).map(|(&i, &v)| (i, v)).collect();
        let free: Vec<usize> = (0..n).filter(|i| !fixed.contains_key(i)).collect();
        let split = |a: &[f64]| -> (Vec<f64>, f64) {
            let offset = fixed.iter().map(|(&i, &v)| a[i] * v as f64).sum();
            (free.iter().map(|&i| a[i]).collect(), offset)
        };
        let exact = self.polyhedron.is_integral();
        let mut rows = Vec::new();
        for i in 0..self.polyhedron.num_rows() {
            let (a, b) = self.polyhedron.row(i);
            let (af, off) = split(a);
            rows.push(Row {
                a: af,
                b: b - off,
                tol: if exact { 0.0 } else { ROW_TOL },
            });
        }
        for c in &self.feas_cuts {
            let (af, off) = split(&c.a);
            rows.push(Row {
                a: af,
                b: -c.rhs - off,
                tol: ROW_TOL,
            });
        }
        let opt = self
            .opt_cuts
            .iter()
            .map(|c| {
                let (af, off) = split(&c.a);
                (af, c.rhs + off)
            })
            .collect();
        let linear = match &self.mode {
            ObjectiveMode::Theta => None,
            ObjectiveMode::Linear(c) => Some(split(c)),
        };
        Reduced {
            n,
            free,
            fixed,
            rows,
            opt,
            linear,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Row {
    pub a: Vec<f64>,
    pub b: f64,
    pub tol: f64,
}

/// Master over the free variables only.
#[derive(Debug, Clone)]
pub(crate) struct Reduced {
    pub n: usize,
    pub free: Vec<usize>,
    pub fixed: BTreeMap<usize, u8>,
    /// `a·x ≤ b` rows (polyhedron and feasibility cuts).
    pub rows: Vec<Row>,
    /// `θ ≤ a·x + r`.
    pub opt: Vec<(Vec<f64>, f64)>,
    /// `cᵀx + offset` in linear mode.
    pub linear: Option<(Vec<f64>, f64)>,
}

impl Reduced {
    /// Expands free-variable bits back to a full point.
    pub fn lift(&self, free_bits: &[u8]) -> BinaryVector {
        let mut bits = vec![0u8; self.n];
        for (&i, &v) in &self.fixed {
            bits[i] = v;
        }
        for (k, &i) in self.free.iter().enumerate() {
            bits[i] = free_bits[k];
        }
        BinaryVector::new(bits)
    }

    pub fn lift_f64(&self, free_x: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.n];
        for (&i, &v) in &self.fixed {
            x[i] = v as f64;
        }
        for (k, &i) in self.free.iter().enumerate() {
            x[i] = free_x[k];
        }
        x
    }

    /// Objective at a free-variable point, or `None` if a row fails.
    pub fn value(&self, x: &[f64]) -> Option<f64> {
        use crate::linalg::dot;
        if self.rows.iter().any(|r| dot(&r.a, x) > r.b + r.tol) {
            return None;
        }
        Some(match &self.linear {
            Some((c, off)) => dot(c, x) + off,
            None => self
                .opt
                .iter()
                .map(|(a, r)| dot(a, x) + r)
                .fold(f64::INFINITY, f64::min),
        })
    }
}

/// Result of the continuous relaxation over `[0,1]ⁿ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Relaxation {
    pub x: Vec<f64>,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RelaxationError {
    #[error("LP relaxation is infeasible")]
    Infeasible,
    #[error("LP relaxation is unbounded")]
    Unbounded,
}

/// Continuous relaxation of the master (fixings respected).
pub fn lp_relaxation(model: &MasterModel) -> Result<Relaxation, RelaxationError> {
    relax(&model.reduce(&BTreeMap::new()))
}

pub(crate) fn relax(red: &Reduced) -> Result<Relaxation, RelaxationError> {
    use simplex::{maximize, LpOutcome};
    let nf = red.free.len();
    let theta = red.linear.is_none();
    // Columns: x (nf), then θ⁺, θ⁻ in θ-mode.
    let ncols = nf + if theta { 2 } else { 0 };
    let mut a = Vec::new();
    let mut b = Vec::new();
    for r in &red.rows {
        let mut row = r.a.clone();
        row.resize(ncols, 0.0);
        a.push(row);
        b.push(r.b + r.tol);
    }
    for (ac, rc) in &red.opt {
        if !theta {
            break;
        }
        let mut row: Vec<f64> = ac.iter().map(|v| -v).collect();
        row.push(1.0);
        row.push(-1.0);
        a.push(row);
        b.push(*rc);
    }
    for i in 0..nf {
        let mut row = vec![0.0; ncols];
        row[i] = 1.0;
        a.push(row);
        b.push(1.0);
    }
    let (c, offset) = match &red.linear {
        Some((c, off)) => (c.clone(), *off),
        None => {
            let mut c = vec![0.0; ncols];
            c[nf] = 1.0;
            c[nf + 1] = -1.0;
            (c, 0.0)
        }
    };
    match maximize(&a, &b, &c) {
        LpOutcome::Optimal { x, value } => Ok(Relaxation {
            x: red.lift_f64(&x[..nf]),
            bound: value + offset,
        }),
        LpOutcome::Infeasible => Err(RelaxationError::Infeasible),
        LpOutcome::Unbounded => Err(RelaxationError::Unbounded),
    }
}
