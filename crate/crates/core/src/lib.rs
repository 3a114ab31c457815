//! Cutting-plane methods for nonlinear binary optimization.
//!
//! The solver maximizes `f(x)` over binary points of a polyhedron `K`
//! subject to `g_j(x) ≤ 0`, by alternating between an exact linear binary
//! master problem and tangent-plane cuts at the visited points.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod linalg;
pub mod expr;
pub mod model;
pub mod cuts;
pub mod master;
pub mod convexify;
pub mod analysis;
pub mod engine;
pub mod qkp;
pub mod instance;
