//! Exhaustive master solver. Points are scanned in lexicographic order and
//! row activities are updated incrementally as bits flip; every candidate
//! that could change the incumbent is re-checked from scratch.

use super::{MasterError, MasterModel, MasterSolution, MasterStatus};
use std::collections::BTreeMap;

pub fn solve_enumerative(model: &MasterModel, limit: usize) -> Result<MasterSolution, MasterError> {
    let red = model.reduce(&BTreeMap::new());
    let nf = red.free.len();
    if nf > limit {
        return Err(MasterError::TooLarge { free: nf, limit });
    }

    let scale = red
        .rows
        .iter()
        .map(|r| r.a.iter().map(|v| v.abs()).sum::<f64>() + r.b.abs())
        .chain(red.opt.iter().map(|(a, r)| a.iter().map(|v| v.abs()).sum::<f64>() + r.abs()))
        .fold(1.0, f64::max);
    let slack = 1e-7 * scale;

    let mut bits = vec![0u8; nf];
    let mut x = vec![0.0; nf];
    let mut row_vals = vec![0.0; red.rows.len()];
    let mut opt_vals: Vec<f64> = red.opt.iter().map(|(_, r)| *r).collect();
    let (lin_c, lin_off) = match &red.linear {
        Some((c, off)) => (c.clone(), *off),
        None => (Vec::new(), 0.0),
    };
    let mut lin_val = lin_off;

    let mut best: Option<(Vec<u8>, f64)> = None;
    let total: u64 = 1u64 << nf;
    for k in 0..total {
        if k > 0 {
            // Increment: trailing ones clear, next zero sets.
            let mut p = nf;
            loop {
                p -= 1;
                let delta = if bits[p] == 1 { -1.0 } else { 1.0 };
                bits[p] ^= 1;
                x[p] = bits[p] as f64;
                for (v, r) in row_vals.iter_mut().zip(&red.rows) {
                    *v += delta * r.a[p];
                }
                for (v, (a, _)) in opt_vals.iter_mut().zip(&red.opt) {
                    *v += delta * a[p];
                }
                if !lin_c.is_empty() {
                    lin_val += delta * lin_c[p];
                }
                if delta > 0.0 {
                    break;
                }
            }
        }

        if row_vals
            .iter()
            .zip(&red.rows)
            .any(|(v, r)| *v > r.b + r.tol + slack)
        {
            continue;
        }
        let screened = if red.linear.is_some() {
            lin_val
        } else {
            opt_vals.iter().copied().fold(f64::INFINITY, f64::min)
        };
        if let Some((_, bv)) = &best {
            if screened <= bv + 1e-9 * bv.abs().max(1.0) - slack {
                continue;
            }
        }
        let Some(value) = red.value(&x) else {
            continue;
        };
        let improves = match &best {
            None => true,
            Some((_, bv)) => value > bv + 1e-9 * bv.abs().max(1.0),
        };
        if improves {
            best = Some((bits.clone(), value));
        }
    }

    Ok(match best {
        Some((b, value)) => MasterSolution {
            status: MasterStatus::Optimal,
            x: Some(red.lift(&b)),
            value,
            node_count: total,
        },
        None => MasterSolution::infeasible(total),
    })
}

#[cfg(test)]
mod tests {
    use super::super::tests::example_p0;
    use super::super::*;
    use crate::cuts::{Cut, CutFamily};
    use crate::model::LinearPolyhedron;

    #[test]
    fn example_p0_and_p1() {
        let p0 = example_p0();
        let s = solve_enumerative(&p0, 24).unwrap();
        assert_eq!(s.x.unwrap().to_string(), "0111");
        assert_eq!(s.value, 11.5);

        let mut cuts = p0.opt_cuts().to_vec();
        cuts.push(Cut::new(CutFamily::OptTangent, vec![5.5, -0.5, 0.5, 4.0], 5.0));
        let p1 = build_master(p0.polyhedron().clone(), cuts, vec![], &[], ObjectiveMode::Theta).unwrap();
        // Exact brute force over the 13 points of K: (0,0,1,1) gives
        // min(10, 9.5) = 9.5, above θ = 9 at (0,1,1,1).
        let s = solve_enumerative(&p1, 24).unwrap();
        assert_eq!(s.x.unwrap().to_string(), "0011");
        assert_eq!(s.value, 9.5);
    }

    #[test]
    fn unsatisfiable_cut_is_infeasible() {
        let k = LinearPolyhedron::unit_box(2);
        // x1 + 1 ≤ 0.
        let feas = Cut::new(CutFamily::FeasTangent, vec![1.0, 0.0], 1.0);
        let m = build_master(k, vec![], vec![feas], &[], ObjectiveMode::Linear(vec![1.0, 1.0])).unwrap();
        assert_eq!(solve_enumerative(&m, 24).unwrap().status, MasterStatus::Infeasible);
    }

    #[test]
    fn ties_pick_lexicographically_smallest() {
        let k = LinearPolyhedron::from_rows(&[(vec![1.0, 1.0, 1.0], 1.0)], 3).unwrap();
        let m = build_master(k, vec![], vec![], &[], ObjectiveMode::Linear(vec![1.0, 1.0, 1.0])).unwrap();
        assert_eq!(solve_enumerative(&m, 24).unwrap().x.unwrap().to_string(), "001");
    }

    #[test]
    fn fixings_are_respected() {
        let k = LinearPolyhedron::unit_box(3);
        let m = build_master(k, vec![], vec![], &[(1, 0)], ObjectiveMode::Linear(vec![1.0, 5.0, 1.0])).unwrap();
        let s = solve_enumerative(&m, 24).unwrap();
        assert_eq!(s.x.unwrap().to_string(), "101");
        assert_eq!(s.node_count, 4);
    }

    #[test]
    fn limit_guard() {
        let k = LinearPolyhedron::unit_box(5);
        let m = build_master(k, vec![], vec![], &[], ObjectiveMode::Linear(vec![1.0; 5])).unwrap();
        assert_eq!(
            solve_enumerative(&m, 4),
            Err(MasterError::TooLarge { free: 5, limit: 4 })
        );
    }
}
