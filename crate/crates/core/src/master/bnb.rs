//! Best-first branch-and-bound over the LP relaxation. Branches on the most
//! fractional variable; among equal bounds the deeper node goes first.

use super::{relax, MasterError, MasterModel, MasterSolution, MasterStatus};
use crate::model::BinaryVector;
use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

const INT_TOL: f64 = 1e-9;

struct Node {
    bound: f64,
    depth: usize,
    fix: BTreeMap<usize, u8>,
    x: Vec<f64>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        self.bound
            .total_cmp(&other.bound)
            .then(self.depth.cmp(&other.depth))
    }
}

pub fn solve_branch_and_bound(model: &MasterModel) -> Result<MasterSolution, MasterError> {
    let n = model.dim();
    let mut heap = BinaryHeap::new();
    let mut nodes = 0u64;
    if let Ok(r) = relax(&model.reduce(&BTreeMap::new())) {
        heap.push(Node {
            bound: r.bound,
            depth: 0,
            fix: BTreeMap::new(),
            x: r.x,
        });
    }
    let mut best: Option<(BinaryVector, f64)> = None;
    let tol = |v: f64| 1e-9 * v.abs().max(1.0);

    while let Some(node) = heap.pop() {
        nodes += 1;
        if let Some((_, bv)) = &best {
            if node.bound <= bv + tol(*bv) {
                continue;
            }
        }
        let free = |i: &usize| !model.fixings().contains_key(i) && !node.fix.contains_key(i);
        let branch_var = (0..n)
            .filter(free)
            .map(|i| (i, node.x[i].min(1.0 - node.x[i])))
            .filter(|&(_, frac)| frac > INT_TOL)
            .fold(None, |acc: Option<(usize, f64)>, (i, frac)| match acc {
                Some((_, f)) if f >= frac => acc,
                _ => Some((i, frac)),
            })
            .map(|(i, _)| i);

        let branch_var = match branch_var {
            Some(i) => i,
            None => {
                let bits: Vec<u8> = node.x.iter().map(|v| v.round() as u8).collect();
                let point = BinaryVector::new(bits);
                if let Some(v) = model.value_at(&point) {
                    if best.as_ref().is_none_or(|(_, bv)| v > bv + tol(*bv)) {
                        best = Some((point, v));
                    }
                    continue;
                }
                // Integral relaxation point that misses a row by less than
                // the LP slack: keep splitting on unfixed variables.
                match (0..n).find(free) {
                    Some(i) => i,
                    None => continue,
                }
            }
        };

        for v in [0u8, 1] {
            let mut fix = node.fix.clone();
            fix.insert(branch_var, v);
            if let Ok(r) = relax(&model.reduce(&fix)) {
                if best.as_ref().is_none_or(|(_, bv)| r.bound > bv + tol(*bv)) {
                    heap.push(Node {
                        bound: r.bound,
                        depth: node.depth + 1,
                        fix,
                        x: r.x,
                    });
                }
            }
        }
    }

    Ok(match best {
        Some((x, value)) => MasterSolution {
            status: MasterStatus::Optimal,
            x: Some(x),
            value,
            node_count: nodes,
        },
        None => MasterSolution::infeasible(nodes),
    })
}

#[cfg(test)]
mod tests {
    use super::super::tests::example_p0;
    use super::super::*;
    use crate::cuts::{Cut, CutFamily};
    use crate::model::LinearPolyhedron;

    #[test]
    fn example_p0_matches_enumeration() {
        let s = solve_branch_and_bound(&example_p0()).unwrap();
        assert_eq!(s.status, MasterStatus::Optimal);
        assert!((s.value - 11.5).abs() < 1e-9);
    }

    #[test]
    fn infeasible_model() {
        let k = LinearPolyhedron::unit_box(2);
        let feas = Cut::new(CutFamily::FeasTangent, vec![1.0, 0.0], 1.0);
        let m = build_master(k, vec![], vec![feas], &[], ObjectiveMode::Linear(vec![1.0, 1.0])).unwrap();
        assert_eq!(solve_branch_and_bound(&m).unwrap().status, MasterStatus::Infeasible);
    }

    #[test]
    fn knapsack_needs_branching() {
        // max 5x1 + 4x2 + 3x3, 2x1 + 3x2 + x3 ≤ 4 → x = (1,0,1), value 8.
        let k = LinearPolyhedron::from_rows(&[(vec![2.0, 3.0, 1.0], 4.0)], 3).unwrap();
        let m = build_master(k, vec![], vec![], &[], ObjectiveMode::Linear(vec![5.0, 4.0, 3.0])).unwrap();
        let s = solve_branch_and_bound(&m).unwrap();
        assert!((s.value - 8.0).abs() < 1e-9);
        assert_eq!(s.x.unwrap().to_string(), "101");
    }
}
