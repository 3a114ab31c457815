//! Export of a master model in the CPLEX LP text format.

use super::{MasterModel, ObjectiveMode};
use std::fmt::Write;

fn linear_terms(coeffs: &[f64], leading_theta: bool) -> String {
    let mut s = String::new();
    if leading_theta {
        s.push_str("theta");
    }
    for (i, &c) in coeffs.iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        let sign = if c < 0.0 { '-' } else { '+' };
        if s.is_empty() && c >= 0.0 {
            write!(s, "{:?} x{}", c, i + 1).unwrap();
        } else {
            if !s.is_empty() {
                s.push(' ');
            }
            write!(s, "{sign} {:?} x{}", c.abs(), i + 1).unwrap();
        }
    }
    if s.is_empty() {
        s.push_str("0 x1");
    }
    s
}

/// Renders the model; fixings become equality bounds.
pub fn write_lp(model: &MasterModel) -> String {
    let n = model.dim();
    let mut out = String::new();
    out.push_str("\\ cutting-plane master problem\nMaximize\n");
    match model.mode() {
        ObjectiveMode::Theta => out.push_str(" obj: theta\n"),
        ObjectiveMode::Linear(c) => writeln!(out, " obj: {}", linear_terms(c, false)).unwrap(),
    }
    out.push_str("Subject To\n");
    let poly = model.polyhedron();
    for i in 0..poly.num_rows() {
        let (a, b) = poly.row(i);
        writeln!(out, " k{}: {} <= {:?}", i + 1, linear_terms(a, false), b).unwrap();
    }
    for (k, cut) in model.opt_cuts().iter().enumerate() {
        let neg: Vec<f64> = cut.a.iter().map(|v| -v).collect();
        writeln!(out, " opt{}: {} <= {:?}", k + 1, linear_terms(&neg, true), cut.rhs).unwrap();
    }
    for (k, cut) in model.feas_cuts().iter().enumerate() {
        writeln!(out, " feas{}: {} <= {:?}", k + 1, linear_terms(&cut.a, false), -cut.rhs).unwrap();
    }
    out.push_str("Bounds\n");
    if matches!(model.mode(), ObjectiveMode::Theta) {
        out.push_str(" theta free\n");
    }
    for (&i, &v) in model.fixings() {
        writeln!(out, " x{} = {}", i + 1, v).unwrap();
    }
    out.push_str("Binaries\n");
    let names: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
    writeln!(out, " {}", names.join(" ")).unwrap();
    out.push_str("End\n");
    out
}
