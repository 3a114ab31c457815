//! Line-oriented instance files.
//!
//! ```text
//! DIM 4
//! OBJECTIVE 2*x1*x2*x3 + x1*x3 + 2*x2 + 3*x3 + 4*x4
//! CONSTRAINT x1^2 + x2 - 1          # g(x) <= 0
//! LINEAR 2 1 2 2 <= 5
//! LIPSCHITZ 3 1.5                   # L(f) then L(g_1..g_m)
//! START 1110
//! ```
//!
//! `OBJECTIVE QUADRATIC` (or `CONSTRAINT QUADRATIC`) opens a block of `n`
//! lines `Q <row>`, one line `q <vector>`, one line `c <value>` and `END`,
//! describing `½xᵀQx + qᵀx + c`.

use crate::expr::{parse_expression, NonlinearFunction, ParseError};
use crate::linalg::Matrix;
use crate::model::{BinaryVector, LinearPolyhedron, Problem};
use std::fmt::Write;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}: {kind}")]
pub struct InstanceError {
    pub line: usize,
    pub kind: InstanceErrorKind,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InstanceErrorKind {
    #[error("unknown section `{0}`")]
    UnknownSection(String),
    #[error("{0} must come after DIM")]
    BeforeDim(&'static str),
    #[error("duplicate {0}")]
    Duplicate(&'static str),
    #[error("missing {0}")]
    Missing(&'static str),
    #[error("bad number `{0}`")]
    BadNumber(String),
    #[error("expected {expected} values, got {got}")]
    Count { expected: usize, got: usize },
    #[error("expected `{0}`")]
    Expected(&'static str),
    #[error("bad bitstring `{0}`")]
    BadBits(String),
    #[error("expression, column {}: {source}", .source.offset() + 1)]
    Expression {
        #[source]
        source: ParseError,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceFile {
    pub problem: Problem,
    /// `L(f)` and `L(g_j)` for Lipschitz cuts.
    pub lipschitz: Option<(f64, Vec<f64>)>,
    pub start: Option<BinaryVector>,
}

fn numbers(text: &str, line: usize) -> Result<Vec<f64>, InstanceError> {
    text.split_whitespace()
        .map(|t| {
            t.parse::<f64>().map_err(|_| InstanceError {
                line,
                kind: InstanceErrorKind::BadNumber(t.to_string()),
            })
        })
        .collect()
}

fn exact(v: Vec<f64>, expected: usize, line: usize) -> Result<Vec<f64>, InstanceError> {
    if v.len() != expected {
        return Err(InstanceError {
            line,
            kind: InstanceErrorKind::Count {
                expected,
                got: v.len(),
            },
        });
    }
    Ok(v)
}

pub fn parse_instance(text: &str) -> Result<InstanceFile, InstanceError> {
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty())
        .collect();
    let fail = |line: usize, kind| Err(InstanceError { line, kind });

    let mut n: Option<usize> = None;
    let mut objective = None;
    let mut constraints = Vec::new();
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
    let mut lipschitz = None;
    let mut start = None;
    let mut i = 0;
    while i < lines.len() {
        let (ln, l) = lines[i];
        i += 1;
        let (key, rest) = l.split_once(char::is_whitespace).unwrap_or((l, ""));
        let rest = rest.trim();
        if key == "DIM" {
            if n.is_some() {
                return fail(ln, InstanceErrorKind::Duplicate("DIM"));
            }
            n = Some(rest.parse().map_err(|_| InstanceError {
                line: ln,
                kind: InstanceErrorKind::BadNumber(rest.to_string()),
            })?);
            continue;
        }
        let section: &'static str = match key {
            "OBJECTIVE" => "OBJECTIVE",
            "CONSTRAINT" => "CONSTRAINT",
            "LINEAR" => "LINEAR",
            "LIPSCHITZ" => "LIPSCHITZ",
            "START" => "START",
            other => return fail(ln, InstanceErrorKind::UnknownSection(other.to_string())),
        };
        let Some(dim) = n else {
            return fail(ln, InstanceErrorKind::BeforeDim(section));
        };
        match section {
            "OBJECTIVE" | "CONSTRAINT" => {
                let func = if rest == "QUADRATIC" {
                    let (func, next) = parse_quadratic_block(&lines, i, dim, ln)?;
                    i = next;
                    func
                } else {
                    parse_expression(rest, dim).map_err(|source| InstanceError {
                        line: ln,
                        kind: InstanceErrorKind::Expression { source },
                    })?
                };
                if section == "OBJECTIVE" {
                    if objective.replace(func).is_some() {
                        return fail(ln, InstanceErrorKind::Duplicate("OBJECTIVE"));
                    }
                } else {
                    constraints.push(func);
                }
            }
            "LINEAR" => {
                let Some((lhs, rhs)) = rest.split_once("<=") else {
                    return fail(ln, InstanceErrorKind::Expected("<="));
                };
                let a = exact(numbers(lhs, ln)?, dim, ln)?;
                let b = exact(numbers(rhs, ln)?, 1, ln)?[0];
                rows.push((a, b));
            }
            "LIPSCHITZ" => {
                let v = numbers(rest, ln)?;
                if v.is_empty() {
                    return fail(ln, InstanceErrorKind::Count { expected: 1, got: 0 });
                }
                if lipschitz.replace((v[0], v[1..].to_vec())).is_some() {
                    return fail(ln, InstanceErrorKind::Duplicate("LIPSCHITZ"));
                }
            }
            _ => {
                let bits: BinaryVector = rest.parse().map_err(|_| InstanceError {
                    line: ln,
                    kind: InstanceErrorKind::BadBits(rest.to_string()),
                })?;
                if bits.len() != dim {
                    return fail(ln, InstanceErrorKind::Count { expected: dim, got: bits.len() });
                }
                if start.replace(bits).is_some() {
                    return fail(ln, InstanceErrorKind::Duplicate("START"));
                }
            }
        }
    }
    let last = lines.last().map_or(0, |l| l.0);
    let Some(n) = n else {
        return fail(last, InstanceErrorKind::Missing("DIM"));
    };
    let Some(objective) = objective else {
        return fail(last, InstanceErrorKind::Missing("OBJECTIVE"));
    };
    if let Some((_, lg)) = &lipschitz {
        if lg.len() != constraints.len() {
            return fail(last, InstanceErrorKind::Count { expected: constraints.len() + 1, got: lg.len() + 1 });
        }
    }
    let polyhedron = LinearPolyhedron::from_rows(&rows, n).expect("row lengths checked");
    Ok(InstanceFile {
        problem: Problem::new(objective, constraints, polyhedron),
        lipschitz,
        start,
    })
}

fn parse_quadratic_block(
    lines: &[(usize, &str)],
    mut i: usize,
    n: usize,
    header: usize,
) -> Result<(NonlinearFunction, usize), InstanceError> {
    let mut take = |tag: &'static str| -> Result<(usize, &str), InstanceError> {
        let &(ln, l) = lines.get(i).ok_or(InstanceError {
            line: header,
            kind: InstanceErrorKind::Expected(tag),
        })?;
        i += 1;
        match l.split_once(char::is_whitespace) {
            Some((k, rest)) if k == tag => Ok((ln, rest)),
            None if l == tag => Ok((ln, "")),
            _ => Err(InstanceError {
                line: ln,
                kind: InstanceErrorKind::Expected(tag),
            }),
        }
    };
    let mut q_rows = Vec::with_capacity(n);
    for _ in 0..n {
        let (ln, rest) = take("Q")?;
        q_rows.push(exact(numbers(rest, ln)?, n, ln)?);
    }
    let (ln, rest) = take("q")?;
    let lin = exact(numbers(rest, ln)?, n, ln)?;
    let (ln, rest) = take("c")?;
    let c = exact(numbers(rest, ln)?, 1, ln)?[0];
    take("END")?;
    let q = Matrix::from_rows(&q_rows).unwrap_or_else(|| Matrix::zeros(n, n));
    Ok((NonlinearFunction::quadratic(q, lin, c), i))
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

fn write_function(out: &mut String, key: &str, f: &NonlinearFunction) {
    match f {
        NonlinearFunction::Quadratic(q) => {
            writeln!(out, "{key} QUADRATIC").unwrap();
            for i in 0..q.dim() {
                writeln!(out, "Q {}", join(q.q_mat().row(i))).unwrap();
            }
            writeln!(out, "q {}\nc {}\nEND", join(q.lin()), q.constant()).unwrap();
        }
        NonlinearFunction::Expression(_) => {
            writeln!(out, "{key} {}", f.to_expression_text()).unwrap();
        }
    }
}

pub fn serialize_instance(file: &InstanceFile) -> String {
    let p = &file.problem;
    let mut out = String::new();
    writeln!(out, "DIM {}", p.n).unwrap();
    write_function(&mut out, "OBJECTIVE", &p.objective);
    for g in &p.constraints {
        write_function(&mut out, "CONSTRAINT", g);
    }
    for i in 0..p.polyhedron.num_rows() {
        let (a, b) = p.polyhedron.row(i);
        writeln!(out, "LINEAR {} <= {}", join(a), b).unwrap();
    }
    if let Some((lf, lg)) = &file.lipschitz {
        let mut all = vec![*lf];
        all.extend(lg);
        writeln!(out, "LIPSCHITZ {}", join(&all)).unwrap();
    }
    if let Some(s) = &file.start {
        writeln!(out, "START {s}").unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = "\
# small example
DIM 4
OBJECTIVE 2*x1*x2*x3 + x1*x3 + 2*x2 + 3*x3 + 4*x4
LINEAR 2 1 2 2 <= 5
LINEAR 2 2 1 2 <= 5
START 1110
";

    #[test]
    fn parses_example() {
        let f = parse_instance(EXAMPLE).unwrap();
        assert_eq!(f.problem.n, 4);
        assert_eq!(f.problem.polyhedron.num_rows(), 2);
        assert_eq!(f.start.unwrap().to_string(), "1110");
        assert_eq!(f.problem.objective.eval(&[0.0, 1.0, 1.0, 1.0]).unwrap(), 9.0);
    }

    #[test]
    fn round_trips() {
        let f = parse_instance(EXAMPLE).unwrap();
        assert_eq!(parse_instance(&serialize_instance(&f)).unwrap(), f);
        let quad = "DIM 2\nOBJECTIVE QUADRATIC\nQ 0 -1.5\nQ -1.5 0\nq 1 2\nc 0.25\nEND\n\
                    CONSTRAINT x1 + x2 - 1\nLIPSCHITZ 3 0.5\n";
        let f = parse_instance(quad).unwrap();
        assert_eq!(parse_instance(&serialize_instance(&f)).unwrap(), f);
    }

    #[test]
    fn errors_carry_lines() {
        let e = parse_instance("DIM 2\nOBJECTIVE x1\nBOGUS 1\n").unwrap_err();
        assert_eq!(e.line, 3);
        assert!(matches!(e.kind, InstanceErrorKind::UnknownSection(_)));
        let e = parse_instance("DIM 2\nOBJECTIVE x1 +* x2\n").unwrap_err();
        assert!(matches!(e.kind, InstanceErrorKind::Expression { .. }));
        let e = parse_instance("DIM 2\nLINEAR 1 1 <= \nOBJECTIVE x1\n").unwrap_err();
        assert_eq!(e.line, 2);
        assert!(parse_instance("OBJECTIVE x1\n").is_err());
        assert!(parse_instance("DIM 2\n").is_err());
    }
}
