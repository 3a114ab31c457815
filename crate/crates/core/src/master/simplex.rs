//! Dense two-phase tableau simplex with Bland's rule.
//!
//! Solves `max cᵀx  s.t.  A x ≤ b,  x ≥ 0` for small dense problems. Rows
//! with negative right-hand side get an artificial variable in phase one.

const EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, value: f64 },
    Infeasible,
    Unbounded,
}

struct Tableau {
    /// `m` constraint rows of width `cols + 1` (last entry is the rhs).
    t: Vec<Vec<f64>>,
    /// Reduced-cost row `c_j − z_j`, width `cols + 1` (last entry is `−z`).
    obj: Vec<f64>,
    basis: Vec<usize>,
    cols: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.t[r][c];
        for v in self.t[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.t[r].clone();
        for (i, row) in self.t.iter_mut().enumerate() {
            if i != r {
                let f = row[c];
                if f != 0.0 {
                    for (v, pv) in row.iter_mut().zip(&pivot_row) {
                        *v -= f * pv;
                    }
                }
            }
        }
        let f = self.obj[c];
        if f != 0.0 {
            for (v, pv) in self.obj.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
        }
        self.basis[r] = c;
    }

    /// Bland's rule iterations over columns `< allowed`. Returns false when
    /// unbounded.
    fn run(&mut self, allowed: usize) -> bool {
        loop {
            let Some(enter) = (0..allowed).find(|&j| self.obj[j] > EPS) else {
                return true;
            };
            let mut leave: Option<(usize, f64)> = None;
            for (i, row) in self.t.iter().enumerate() {
                let a = row[enter];
                if a > EPS {
                    let ratio = row[self.cols] / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((li, lr)) => {
                            if ratio < lr - EPS
                                || (ratio <= lr + EPS && self.basis[i] < self.basis[li])
                            {
                                Some((i, ratio))
                            } else {
                                Some((li, lr))
                            }
                        }
                    };
                }
            }
            match leave {
                Some((r, _)) => self.pivot(r, enter),
                None => return false,
            }
        }
    }

    fn set_objective(&mut self, costs: &[f64]) {
        let mut obj = vec![0.0; self.cols + 1];
        obj[..costs.len()].copy_from_slice(costs);
        for (i, row) in self.t.iter().enumerate() {
            let cb = obj_cost(costs, self.basis[i]);
            if cb != 0.0 {
                for (v, rv) in obj.iter_mut().zip(row) {
                    *v -= cb * rv;
                }
            }
        }
        self.obj = obj;
    }
}

fn obj_cost(costs: &[f64], j: usize) -> f64 {
    costs.get(j).copied().unwrap_or(0.0)
}

/// `max cᵀx` subject to `A x ≤ b`, `x ≥ 0`.
pub fn maximize(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> LpOutcome {
    let m = a.len();
    let n = c.len();
    let n_art = b.iter().filter(|&&v| v < 0.0).count();
    // Columns: structural (n), slacks (m), artificials (n_art).
    let cols = n + m + n_art;
    let mut t = Vec::with_capacity(m);
    let mut basis = Vec::with_capacity(m);
    let mut art = n + m;
    for i in 0..m {
        let mut row = vec![0.0; cols + 1];
        let sign = if b[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            row[j] = sign * a[i][j];
        }
        row[n + i] = sign;
        row[cols] = sign * b[i];
        if sign < 0.0 {
            row[art] = 1.0;
            basis.push(art);
            art += 1;
        } else {
            basis.push(n + i);
        }
        t.push(row);
    }
    let mut tab = Tableau {
        t,
        obj: vec![0.0; cols + 1],
        basis,
        cols,
    };

    if n_art > 0 {
        let mut phase1 = vec![0.0; cols];
        for v in phase1.iter_mut().skip(n + m) {
            *v = -1.0;
        }
        tab.set_objective(&phase1);
        tab.run(cols);
        // obj[cols] holds −z = Σ artificials at the phase-one optimum.
        if tab.obj[cols] > EPS * (1.0 + b.iter().map(|v| v.abs()).sum::<f64>()) {
            return LpOutcome::Infeasible;
        }
        // Drive remaining artificials out of the basis, dropping redundant rows.
        let mut i = 0;
        while i < tab.t.len() {
            if tab.basis[i] >= n + m {
                match (0..n + m).find(|&j| tab.t[i][j].abs() > EPS) {
                    Some(j) => tab.pivot(i, j),
                    None => {
                        tab.t.remove(i);
                        tab.basis.remove(i);
                        continue;
                    }
                }
            }
            i += 1;
        }
        for row in tab.t.iter_mut() {
            for v in row.iter_mut().take(cols).skip(n + m) {
                *v = 0.0;
            }
        }
    }

    tab.set_objective(c);
    if !tab.run(n + m) {
        return LpOutcome::Unbounded;
    }
    let mut x = vec![0.0; n];
    for (i, &bj) in tab.basis.iter().enumerate() {
        if bj < n {
            x[bj] = tab.t[i][cols];
        }
    }
    let value = c.iter().zip(&x).map(|(ci, xi)| ci * xi).sum();
    LpOutcome::Optimal { x, value }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_problem() {
        // max 3x + 5y, x ≤ 4, 2y ≤ 12, 3x + 2y ≤ 18 → (2, 6), 36.
        let a = vec![vec![1.0, 0.0], vec![0.0, 2.0], vec![3.0, 2.0]];
        match maximize(&a, &[4.0, 12.0, 18.0], &[3.0, 5.0]) {
            LpOutcome::Optimal { x, value } => {
                assert!((x[0] - 2.0).abs() < 1e-12 && (x[1] - 6.0).abs() < 1e-12);
                assert!((value - 36.0).abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn phase_one_lower_bound() {
        // max −x, x ≥ 2 (as −x ≤ −2), x ≤ 5 → x = 2.
        let a = vec![vec![-1.0], vec![1.0]];
        match maximize(&a, &[-2.0, 5.0], &[-1.0]) {
            LpOutcome::Optimal { x, value } => {
                assert!((x[0] - 2.0).abs() < 1e-12);
                assert!((value + 2.0).abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn infeasible_and_unbounded() {
        let a = vec![vec![1.0], vec![-1.0]];
        assert_eq!(maximize(&a, &[1.0, -2.0], &[1.0]), LpOutcome::Infeasible);
        assert_eq!(maximize(&[vec![-1.0]], &[1.0], &[1.0]), LpOutcome::Unbounded);
    }

    #[test]
    fn degenerate_cycling_example() {
        // Beale's example cycles under the largest-coefficient rule.
        let a = vec![
            vec![0.25, -60.0, -0.04, 9.0],
            vec![0.5, -90.0, -0.02, 3.0],
            vec![0.0, 0.0, 1.0, 0.0],
        ];
        match maximize(&a, &[0.0, 0.0, 1.0], &[0.75, -150.0, 0.02, -6.0]) {
            LpOutcome::Optimal { value, .. } => assert!((value - 0.05).abs() < 1e-9),
            other => panic!("{other:?}"),
        }
    }
}
