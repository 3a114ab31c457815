mod common;

use bincut::analysis::{check_condition1, tangent_cone_distance, u_count};
use bincut::convexify::{penalty_transform, PenaltyConfig};
use bincut::cuts::{feasibility_cut, optimality_cut};
use bincut::engine::{solve_algorithm1, SolveOptions};
use bincut::expr::parse_expression;
use bincut::instance::{parse_instance, serialize_instance, InstanceFile};
use bincut::linalg::dot;
use bincut::master::{lp_relaxation, solve_branch_and_bound, solve_enumerative, MasterStatus};
use bincut::model::BinaryVector;
use common::RawInstance;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn instance(seed: u64, max_n: usize, convex_g: bool) -> RawInstance {
    let mut r = rng(seed);
    let n = r.gen_range(2..=max_n);
    if convex_g {
        common::concave_convex(&mut r, n)
    } else {
        common::concave_linear(&mut r, n)
    }
}

fn fmt_coef(v: f64) -> String {
    format!("({v})")
}

/// Random smooth expression in `x1..xn` with its text.
fn smooth_text(r: &mut ChaCha8Rng, n: usize) -> String {
    let mut terms = Vec::new();
    for _ in 0..r.gen_range(1..=5) {
        let i = r.gen_range(1..=n);
        let j = r.gen_range(1..=n);
        let c = fmt_coef(r.gen_range(-3.0..3.0));
        let term = match r.gen_range(0..6) {
            0 => format!("{c}*x{i}*x{j}"),
            1 => format!("{c}*sin(x{i})"),
            2 => format!("{c}*exp(x{i}*x{j})"),
            3 => format!("{c}*x{i}^3"),
            4 => format!("{c}*cos(x{i} + x{j})"),
            _ => format!("{c}*x{i}/(1 + x{j}^2)"),
        };
        terms.push(term);
    }
    terms.join(" + ")
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gradient_matches_central_differences(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.gen_range(1..=5);
        let f = parse_expression(&smooth_text(&mut r, n), n).unwrap();
        let x: Vec<f64> = (0..n).map(|_| r.gen_range(0.0..1.0)).collect();
        let g = f.gradient(&x).unwrap();
        let h = 1e-6;
        for i in 0..n {
            let mut up = x.clone();
            let mut down = x.clone();
            up[i] += h;
            down[i] -= h;
            let fd = (f.eval(&up).unwrap() - f.eval(&down).unwrap()) / (2.0 * h);
            prop_assert!((fd - g.values()[i]).abs() <= 1e-5 * (1.0 + fd.abs()), "i={i} fd={fd} g={}", g.values()[i]);
        }
    }

    #[test]
    fn quadratic_agrees_with_its_expression_text(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.gen_range(1..=6);
        let raw = common::concave_objective(&mut r, n);
        let quad = raw.to_function();
        let expr = parse_expression(&quad.to_expression_text(), n).unwrap();
        let x: Vec<f64> = (0..n).map(|_| r.gen_range(-1.0..2.0)).collect();
        let scale = 1.0 + quad.eval(&x).unwrap().abs();
        prop_assert!((quad.eval(&x).unwrap() - expr.eval(&x).unwrap()).abs() <= 1e-9 * scale);
        let (gq, ge) = (quad.gradient(&x).unwrap(), expr.gradient(&x).unwrap());
        for (a, b) in gq.values().iter().zip(ge.values()) {
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
        }
        let bits: Vec<u8> = (0..n).map(|_| r.gen_range(0..=1)).collect();
        let xb: Vec<f64> = bits.iter().map(|&b| b as f64).collect();
        prop_assert!((quad.eval(&xb).unwrap() - raw.eval(&bits)).abs() <= 1e-9);
    }

    #[test]
    fn hessian_bound_dominates_spectral_radius(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.gen_range(1..=7);
        let raw = if r.gen_bool(0.5) { common::concave_objective(&mut r, n) } else { common::convex_objective(&mut r, n) };
        let m = nalgebra::DMatrix::from_fn(n, n, |i, j| raw.q[i][j]);
        let radius = m.symmetric_eigen().eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let bound = raw.to_function().hessian_row_sum_bound().unwrap();
        prop_assert!(bound >= radius - 1e-9 * (1.0 + radius), "bound {bound} < radius {radius}");
    }

    #[test]
    fn tangent_cuts_touch_and_separate(seed in any::<u64>()) {
        let inst = instance(seed, 7, true);
        let p = inst.problem();
        let points: Vec<Vec<u8>> = inst.points().collect();
        for y in &points {
            let yb = BinaryVector::new(y.clone());
            let cut = optimality_cut(&p.objective, &yb).unwrap();
            let yf = yb.to_f64();
            prop_assert!((cut.affine_value(&yf) - inst.f.eval(y)).abs() <= 1e-9 * (1.0 + inst.f.eval(y).abs()));
            // Concave f: the tangent overestimates everywhere.
            for x in &points {
                let xf: Vec<f64> = x.iter().map(|&b| b as f64).collect();
                prop_assert!(cut.affine_value(&xf) >= inst.f.eval(x) - 1e-9 * (1.0 + inst.f.eval(x).abs()));
            }
            for (j, g) in inst.g.iter().enumerate() {
                if g.eval(y) <= common::FEAS_TOL {
                    continue;
                }
                let Ok(cut) = feasibility_cut(&p.constraints, j, &yb) else { continue };
                prop_assert!(cut.affine_value(&yf) > 0.0);
                for x in points.iter().filter(|x| inst.feasible(x)) {
                    let xf: Vec<f64> = x.iter().map(|&b| b as f64).collect();
                    prop_assert!(cut.affine_value(&xf) <= 1e-9);
                }
            }
        }
    }

    #[test]
    fn branch_and_bound_matches_enumeration(seed in any::<u64>()) {
        let model = common::random_master(&mut rng(seed), 10);
        let e = solve_enumerative(&model, 24).unwrap();
        let b = solve_branch_and_bound(&model).unwrap();
        prop_assert_eq!(e.status, b.status);
        if e.status != MasterStatus::Infeasible {
            prop_assert!((e.value - b.value).abs() <= 1e-7 * (1.0 + e.value.abs()));
            let at = model.value_at(b.x.as_ref().unwrap()).unwrap();
            prop_assert!((at - b.value).abs() <= 1e-7 * (1.0 + at.abs()));
        }
        match lp_relaxation(&model) {
            Ok(rel) => prop_assert!(e.status == MasterStatus::Infeasible || rel.bound >= e.value - 1e-7 * (1.0 + e.value.abs())),
            Err(_) => prop_assert_eq!(e.status, MasterStatus::Infeasible),
        }
    }

    #[test]
    fn penalties_preserve_binary_values(seed in any::<u64>(), mu in 0.0..50.0f64, lam in 0.0..50.0f64) {
        let inst = instance(seed, 6, true);
        let p = inst.problem();
        let cfg = PenaltyConfig::user(mu, vec![lam; p.m()]);
        let q = penalty_transform(&p, &cfg).unwrap();
        for x in inst.points() {
            let xf: Vec<f64> = x.iter().map(|&b| b as f64).collect();
            prop_assert!((q.objective.eval(&xf).unwrap() - p.objective.eval(&xf).unwrap()).abs() <= 1e-9 * (1.0 + mu));
            for (a, b) in q.constraints.iter().zip(&p.constraints) {
                prop_assert!((a.eval(&xf).unwrap() - b.eval(&xf).unwrap()).abs() <= 1e-9 * (1.0 + lam));
            }
        }
    }

    #[test]
    fn u_count_recurrence_and_totals(m in 1u32..40, big in 0u32..40) {
        let big = big.min(m);
        if big >= 1 && big < m {
            prop_assert_eq!(u_count(big, m).unwrap(), u_count(big, m - 1).unwrap() + u_count(big - 1, m - 1).unwrap());
        }
        prop_assert_eq!(u_count(m, m).unwrap(), 1u128 << m);
        prop_assert_eq!(u_count(0, m).unwrap(), 1);
    }

    #[test]
    fn cone_distance_vanishes_exactly_at_linear_maximizers(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.gen_range(1..=5);
        let points: Vec<BinaryVector> = (0..1u64 << n).filter(|_| r.gen_bool(0.6)).map(|k| BinaryVector::from_index(k, n)).collect();
        prop_assume!(!points.is_empty());
        let v: Vec<f64> = (0..n).map(|_| r.gen_range(-5..=5) as f64).collect();
        let best = points.iter().map(|p| dot(&v, &p.to_f64())).fold(f64::NEG_INFINITY, f64::max);
        for x in &points {
            let d = tangent_cone_distance(&v, x, &points);
            let is_max = dot(&v, &x.to_f64()) >= best - 1e-12;
            prop_assert_eq!(d <= 1e-7, is_max, "x={} d={}", x, d);
        }
    }

    #[test]
    fn concave_convex_instances_satisfy_condition1(seed in any::<u64>()) {
        let inst = instance(seed, 7, true);
        let Some((best, _)) = inst.brute_force() else { return Ok(()) };
        let rep = check_condition1(&inst.problem()).unwrap();
        prop_assert!(rep.condition1_holds);
        prop_assert!((rep.lp_value.unwrap() - best).abs() <= 1e-9 * (1.0 + best.abs()));
    }

    #[test]
    fn instance_files_round_trip(seed in any::<u64>(), with_start in any::<bool>()) {
        let inst = instance(seed, 6, true);
        let file = InstanceFile {
            problem: inst.problem(),
            lipschitz: None,
            start: with_start.then(|| BinaryVector::zeros(inst.n)),
        };
        prop_assert_eq!(parse_instance(&serialize_instance(&file)).unwrap(), file);
    }

    #[test]
    fn bounds_are_monotone_and_infeasible_points_never_return(seed in any::<u64>(), convex_g in any::<bool>()) {
        let inst = instance(seed, 9, convex_g);
        let Some(x0) = inst.first_feasible() else { return Ok(()) };
        let r = solve_algorithm1(&inst.problem(), &x0, &SolveOptions::default()).unwrap();
        for w in r.state.trace.windows(2) {
            prop_assert!(w[1].lb >= w[0].lb);
            prop_assert!(w[1].ub <= w[0].ub + 1e-9 * (1.0 + w[0].ub.abs()));
        }
        let trace = &r.state.trace;
        for (i, t) in trace.iter().enumerate().filter(|(_, t)| !t.feasible) {
            prop_assert!(trace[i + 1..].iter().all(|u| u.x != t.x), "infeasible {} revisited", t.x);
        }
    }
}
