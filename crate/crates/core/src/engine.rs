//! The cutting-plane loops: Algorithm 1 (general objective), Algorithm 2
//! (linear objective, feasibility cuts only) and Algorithm 3 (shifted cuts,
//! terminates on a repeated feasible point).

use crate::analysis::{find_kkt_multipliers, kkt_certificate, Certificate};
use crate::cuts::{CutError, CutFamily, CutGenerator, ShiftedCuts, TangentCuts};
use crate::cuts::Cut;
use crate::expr::{EvalError, Gradient};
use crate::master::{
    build_master, solve_branch_and_bound, solve_enumerative, MasterError, MasterSolution,
    MasterStatus, ObjectiveMode,
};
use crate::model::{classify_point, BinaryVector, Classification, ModelError, Problem, ENUMERATION_LIMIT};
use std::collections::BTreeMap;
use std::io::{self, Write};
use thiserror::Error;

/// Margin for the strict inequalities of the variable-fixing rule.
pub const FIXING_MARGIN: f64 = 1e-9;
/// Dimension up to which Algorithm 3 searches for KKT multipliers.
pub const KKT_SEARCH_LIMIT: usize = 14;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("starting point {x} is not feasible (max violation {max_violation})")]
    InfeasibleStart { x: BinaryVector, max_violation: f64 },
    #[error("objective is not linear; use the general cutting-plane method")]
    NonlinearObjective,
    #[error("master problem became infeasible after {iterations} iterations: no feasible binary point remains")]
    MasterInfeasible { iterations: usize },
    #[error("shift ε must be positive, got {0}")]
    NonPositiveEpsilon(f64),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Cut(#[from] CutError),
    #[error(transparent)]
    Master(#[from] MasterError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MasterBackend {
    Enumerate { limit: usize },
    BranchAndBound,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    /// Stop once `UB − LB ≤ epsilon_stop` (plus a 1e-9 relative slack).
    pub epsilon_stop: f64,
    /// Defaults to `10·2^min(n,20)`.
    pub max_iter: Option<usize>,
    pub master: MasterBackend,
    /// Variable fixing after feasible iterates; tangent cuts only.
    pub fixing: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            epsilon_stop: 0.0,
            max_iter: None,
            master: MasterBackend::Enumerate {
                limit: ENUMERATION_LIMIT,
            },
            fixing: false,
        }
    }
}

impl SolveOptions {
    fn iteration_limit(&self, n: usize) -> usize {
        self.max_iter.unwrap_or(10usize << n.min(20))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    OptimalGapClosed,
    RepeatedPoint,
    IterationLimit,
}

impl SolveStatus {
    pub fn name(self) -> &'static str {
        match self {
            SolveStatus::OptimalGapClosed => "OPTIMAL_GAP_CLOSED",
            SolveStatus::RepeatedPoint => "REPEATED_POINT",
            SolveStatus::IterationLimit => "ITERATION_LIMIT",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub k: usize,
    pub x: BinaryVector,
    pub theta: f64,
    pub feasible: bool,
    pub max_violation: f64,
    /// Family of the cuts added at this iterate; `None` on a repeat.
    pub cut_family: Option<CutFamily>,
    pub cuts_added: usize,
    pub lb: f64,
    pub ub: f64,
    pub grad_norm: f64,
    pub fixings_added: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveState {
    pub k: usize,
    pub c_k: Vec<BinaryVector>,
    pub cbar_k: Vec<BinaryVector>,
    pub lb: f64,
    pub ub: f64,
    pub incumbent: BinaryVector,
    pub opt_cuts: Vec<Cut>,
    pub feas_cuts: Vec<Cut>,
    pub fixings: BTreeMap<usize, u8>,
    pub trace: Vec<TraceRecord>,
    pub diagnostics: Vec<String>,
    /// Set when Algorithm 3 stops on a repeated infeasible point.
    pub repeated_infeasible: bool,
    pub master_nodes: u64,
}

impl SolveState {
    fn new(x0: BinaryVector, f0: f64) -> Self {
        SolveState {
            k: 0,
            c_k: vec![x0.clone()],
            cbar_k: Vec::new(),
            lb: f0,
            ub: f64::INFINITY,
            incumbent: x0,
            opt_cuts: Vec::new(),
            feas_cuts: Vec::new(),
            fixings: BTreeMap::new(),
            trace: Vec::new(),
            diagnostics: Vec::new(),
            repeated_infeasible: false,
            master_nodes: 0,
        }
    }

    fn seen(&self, x: &BinaryVector) -> bool {
        self.c_k.contains(x) || self.cbar_k.contains(x)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub best_x: BinaryVector,
    pub best_value: f64,
    pub iterations: usize,
    pub state: SolveState,
    /// KKT certificate attached by Algorithm 3 when it passes.
    pub certificate: Option<Certificate>,
}

fn gap_closed(ub: f64, lb: f64, eps: f64) -> bool {
    ub - lb <= eps + 1e-9 * ub.abs().max(1.0)
}

fn solve_master(
    problem: &Problem,
    state: &SolveState,
    mode: ObjectiveMode,
    backend: MasterBackend,
) -> Result<MasterSolution, EngineError> {
    let fix: Vec<(usize, u8)> = state.fixings.iter().map(|(&i, &v)| (i, v)).collect();
    let model = build_master(
        problem.polyhedron.clone(),
        state.opt_cuts.clone(),
        state.feas_cuts.clone(),
        &fix,
        mode,
    )?;
    Ok(match backend {
        MasterBackend::Enumerate { limit } => solve_enumerative(&model, limit)?,
        MasterBackend::BranchAndBound => solve_branch_and_bound(&model)?,
    })
}

fn feasible_start(problem: &Problem, x0: &BinaryVector) -> Result<f64, EngineError> {
    let c = classify_point(problem, x0)?;
    if !c.is_feasible() {
        return Err(EngineError::InfeasibleStart {
            x: x0.clone(),
            max_violation: c.max_violation,
        });
    }
    Ok(problem.objective_value(x0)?)
}

fn add_feasibility_cuts(
    problem: &Problem,
    gen: &dyn CutGenerator,
    x: &BinaryVector,
    class: &Classification,
    state: &mut SolveState,
) -> Result<(Option<CutFamily>, usize), EngineError> {
    let mut family = None;
    for &j in &class.active_set {
        let cut = gen.feasibility(&problem.constraints, j, x)?;
        family = Some(cut.family);
        state.feas_cuts.push(cut);
    }
    Ok((family, class.active_set.len()))
}

/// Algorithm 1 with tangent cuts.
pub fn solve_algorithm1(
    problem: &Problem,
    x0: &BinaryVector,
    options: &SolveOptions,
) -> Result<SolveResult, EngineError> {
    solve_algorithm1_with(problem, x0, &TangentCuts, options)
}

/// Algorithm 1 with any cut generator (e.g. the Lipschitz factory).
pub fn solve_algorithm1_with(
    problem: &Problem,
    x0: &BinaryVector,
    gen: &dyn CutGenerator,
    options: &SolveOptions,
) -> Result<SolveResult, EngineError> {
    let f0 = feasible_start(problem, x0)?;
    let mut state = SolveState::new(x0.clone(), f0);
    state.opt_cuts.push(gen.optimality(&problem.objective, x0)?);
    let fixing = options.fixing && gen.supports_fixing();
    if options.fixing && !fixing {
        state
            .diagnostics
            .push("variable fixing ignored: only sound with tangent cuts".into());
    }
    if fixing {
        let g = problem.objective.gradient(&x0.to_f64())?;
        merge_fixings(&mut state, apply_variable_fixing(x0, &g));
    }

    let limit = options.iteration_limit(problem.n);
    let mut status = SolveStatus::IterationLimit;
    while state.k < limit {
        state.k += 1;
        let sol = solve_master(problem, &state, ObjectiveMode::Theta, options.master)?;
        state.master_nodes += sol.node_count;
        if sol.status == MasterStatus::Infeasible {
            state.diagnostics.push(format!(
                "master infeasible at iteration {}: accumulated cuts removed every point (Condition 1 fails on this instance)",
                state.k
            ));
            state.k -= 1;
            break;
        }
        let x = sol.x.expect("optimal master has a point");
        let theta = sol.value;
        state.ub = theta;
        let class = classify_point(problem, &x)?;
        let repeated = state.seen(&x);
        let grad = problem.objective.gradient(&x.to_f64())?;
        let mut family = None;
        let mut added = 0;
        let mut fixings_added = 0;
        if class.is_feasible() {
            let fx = problem.objective_value(&x)?;
            if fx > state.lb {
                state.lb = fx;
                state.incumbent = x.clone();
            }
            if !repeated {
                let cut = gen.optimality(&problem.objective, &x)?;
                family = Some(cut.family);
                added = 1;
                state.opt_cuts.push(cut);
                state.c_k.push(x.clone());
                if fixing {
                    fixings_added = merge_fixings(&mut state, apply_variable_fixing(&x, &grad));
                }
            }
        } else if !repeated {
            (family, added) = add_feasibility_cuts(problem, gen, &x, &class, &mut state)?;
            state.cbar_k.push(x.clone());
        }
        state.trace.push(TraceRecord {
            k: state.k,
            x: x.clone(),
            theta,
            feasible: class.is_feasible(),
            max_violation: class.max_violation,
            cut_family: family,
            cuts_added: added,
            lb: state.lb,
            ub: state.ub,
            grad_norm: grad.norm(),
            fixings_added,
        });
        if gap_closed(state.ub, state.lb, options.epsilon_stop) {
            status = SolveStatus::OptimalGapClosed;
            break;
        }
        if repeated {
            status = SolveStatus::RepeatedPoint;
            break;
        }
    }
    Ok(SolveResult {
        status,
        best_x: state.incumbent.clone(),
        best_value: state.lb,
        iterations: state.k,
        state,
        certificate: None,
    })
}

/// Algorithm 2: linear objective, no starting point, feasibility cuts only.
/// Stops at the first feasible master solution.
pub fn solve_algorithm2(problem: &Problem, options: &SolveOptions) -> Result<SolveResult, EngineError> {
    let (c, c0) = problem.objective.as_affine().ok_or(EngineError::NonlinearObjective)?;
    let limit = options.iteration_limit(problem.n);
    let mut found = false;
    let mut st = SolveState::new(BinaryVector::zeros(problem.n), f64::NEG_INFINITY);
    st.c_k.clear();
    while st.k < limit {
        st.k += 1;
        let sol = solve_master(problem, &st, ObjectiveMode::Linear(c.clone()), options.master)?;
        st.master_nodes += sol.node_count;
        if sol.status == MasterStatus::Infeasible {
            return Err(EngineError::MasterInfeasible { iterations: st.k - 1 });
        }
        let x = sol.x.expect("optimal master has a point");
        let theta = sol.value + c0;
        st.ub = theta;
        let class = classify_point(problem, &x)?;
        let grad_norm = crate::linalg::norm(&c);
        if class.is_feasible() {
            st.lb = theta;
            st.incumbent = x.clone();
            st.c_k.push(x.clone());
            st.trace.push(TraceRecord {
                k: st.k,
                x,
                theta,
                feasible: true,
                max_violation: class.max_violation,
                cut_family: None,
                cuts_added: 0,
                lb: st.lb,
                ub: st.ub,
                grad_norm,
                fixings_added: 0,
            });
            found = true;
            break;
        }
        let (family, added) = add_feasibility_cuts(problem, &TangentCuts, &x, &class, &mut st)?;
        st.cbar_k.push(x.clone());
        st.trace.push(TraceRecord {
            k: st.k,
            x,
            theta,
            feasible: false,
            max_violation: class.max_violation,
            cut_family: family,
            cuts_added: added,
            lb: st.lb,
            ub: st.ub,
            grad_norm,
            fixings_added: 0,
        });
    }
    let status = if found {
        SolveStatus::OptimalGapClosed
    } else {
        SolveStatus::IterationLimit
    };
    Ok(SolveResult {
        status,
        best_x: st.incumbent.clone(),
        best_value: st.lb,
        iterations: st.k,
        state: st,
        certificate: None,
    })
}

/// Algorithm 3: shifted cuts, stop when the master returns a point already
/// in `C_k` (or, defensively, in `C̄_k`). Returns the best visited feasible
/// point and attaches a KKT certificate when one is found.
pub fn solve_algorithm3(
    problem: &Problem,
    x0: &BinaryVector,
    epsilon: f64,
    options: &SolveOptions,
) -> Result<SolveResult, EngineError> {
    if !(epsilon > 0.0) {
        return Err(EngineError::NonPositiveEpsilon(epsilon));
    }
    let gen = ShiftedCuts { epsilon };
    let f0 = feasible_start(problem, x0)?;
    let mut state = SolveState::new(x0.clone(), f0);
    state.opt_cuts.push(gen.optimality(&problem.objective, x0)?);
    let limit = options.iteration_limit(problem.n);
    let mut status = SolveStatus::IterationLimit;
    while state.k < limit {
        state.k += 1;
        let sol = solve_master(problem, &state, ObjectiveMode::Theta, options.master)?;
        state.master_nodes += sol.node_count;
        if sol.status == MasterStatus::Infeasible {
            state.diagnostics.push(format!(
                "master infeasible at iteration {}: shifted cuts removed every point",
                state.k
            ));
            state.k -= 1;
            break;
        }
        let x = sol.x.expect("optimal master has a point");
        let class = classify_point(problem, &x)?;
        let grad = problem.objective.gradient(&x.to_f64())?;
        let in_c = state.c_k.contains(&x);
        let in_cbar = state.cbar_k.contains(&x);
        let mut family = None;
        let mut added = 0;
        if !in_c && !in_cbar {
            if class.is_feasible() {
                let fx = problem.objective_value(&x)?;
                if fx > state.lb {
                    state.lb = fx;
                    state.incumbent = x.clone();
                }
                let cut = gen.optimality(&problem.objective, &x)?;
                family = Some(cut.family);
                added = 1;
                state.opt_cuts.push(cut);
                state.c_k.push(x.clone());
            } else {
                (family, added) = add_feasibility_cuts(problem, &gen, &x, &class, &mut state)?;
                state.cbar_k.push(x.clone());
            }
        }
        state.ub = sol.value;
        state.trace.push(TraceRecord {
            k: state.k,
            x: x.clone(),
            theta: sol.value,
            feasible: class.is_feasible(),
            max_violation: class.max_violation,
            cut_family: family,
            cuts_added: added,
            lb: state.lb,
            ub: state.ub,
            grad_norm: grad.norm(),
            fixings_added: 0,
        });
        if in_c {
            status = SolveStatus::RepeatedPoint;
            break;
        }
        if in_cbar {
            state.repeated_infeasible = true;
            state.diagnostics.push(format!(
                "infeasible point {x} repeated; shift ε exceeds the admissible bound on this instance"
            ));
            status = SolveStatus::RepeatedPoint;
            break;
        }
    }

    let certificate = if problem.n <= KKT_SEARCH_LIMIT {
        match find_kkt_multipliers(problem, &state.incumbent) {
            Ok(Some(lambda)) => match kkt_certificate(problem, &state.incumbent, &lambda) {
                Ok(c) if c.passed => Some(c),
                Ok(_) => None,
                Err(e) => {
                    state.diagnostics.push(format!("certificate check failed: {e}"));
                    None
                }
            },
            Ok(None) => None,
            Err(e) => {
                state.diagnostics.push(format!("certificate search failed: {e}"));
                None
            }
        }
    } else {
        None
    };

    Ok(SolveResult {
        status,
        best_x: state.incumbent.clone(),
        best_value: state.lb,
        iterations: state.k,
        state,
        certificate,
    })
}

/// Index fixings implied by the optimality cut at a feasible `x`:
/// with `T = Σ_{S₀⁺}∇f_i − Σ_{S₁⁻}∇f_i`, fix `x_i = 1` for `i ∈ S₁⁺` with
/// `∇f_i > T` and `x_i = 0` for `i ∈ S₀⁻` with `∇f_i < −T`.
pub fn apply_variable_fixing(x: &BinaryVector, grad: &Gradient) -> BTreeMap<usize, u8> {
    let g = grad.values();
    let threshold: f64 = (0..x.len())
        .map(|i| match (x.get(i), g[i]) {
            (0, v) if v > 0.0 => v,
            (1, v) if v < 0.0 => -v,
            _ => 0.0,
        })
        .sum();
    let mut out = BTreeMap::new();
    for i in 0..x.len() {
        if x.get(i) == 1 && g[i] > 0.0 && g[i] > threshold + FIXING_MARGIN {
            out.insert(i, 1);
        }
        if x.get(i) == 0 && g[i] < 0.0 && g[i] < -threshold - FIXING_MARGIN {
            out.insert(i, 0);
        }
    }
    out
}

fn merge_fixings(state: &mut SolveState, new: BTreeMap<usize, u8>) -> usize {
    let mut added = 0;
    for (i, v) in new {
        match state.fixings.get(&i) {
            None => {
                state.fixings.insert(i, v);
                added += 1;
            }
            Some(&old) if old != v => state.diagnostics.push(format!(
                "fixing x{} = {v} conflicts with earlier x{} = {old}; kept the earlier one",
                i + 1,
                i + 1
            )),
            _ => {}
        }
    }
    added
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EarlyStop {
    StopOptimal,
    Continue,
}

/// `∇f(x^k) = 0`, or `‖∇f(x^k)‖ < (M1 − M2)/√n` when the gap hint is known.
pub fn stationarity_early_stop(n: usize, grad: &Gradient, gap_hint: Option<(f64, f64)>) -> EarlyStop {
    if grad.is_zero() {
        return EarlyStop::StopOptimal;
    }
    if let Some((m1, m2)) = gap_hint {
        if m1 > m2 && grad.norm() < (m1 - m2) / (n as f64).sqrt() {
            return EarlyStop::StopOptimal;
        }
    }
    EarlyStop::Continue
}

pub const TRACE_HEADER: &str = "k,x_bits,theta,feasible,max_violation,cut_family,LB,UB,grad_norm";

/// One CSV row per master solve.
pub fn write_trace_csv<W: Write>(trace: &[TraceRecord], mut w: W) -> io::Result<()> {
    writeln!(w, "{TRACE_HEADER}")?;
    for r in trace {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            r.k,
            r.x,
            r.theta,
            r.feasible,
            r.max_violation,
            r.cut_family.map_or("NONE", |f| f.name()),
            r.lb,
            r.ub,
            r.grad_norm
        )?;
    }
    Ok(())
}
