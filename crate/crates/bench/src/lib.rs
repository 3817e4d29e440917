//! Fixtures shared by the benchmarks.

use xnt_core::boxcount::BoxProblem;
use xnt_core::{parse_multi, parse_uni, MultiPoly};

pub fn diagonal_cubic() -> MultiPoly {
    parse_multi("X1^3 + X2^3 + X3^3").expect("fixture parses")
}

/// `t^2 = x0^2 + x1^2 + x2^2` in a box of radius `b`.
pub fn sphere_problem(b: u64) -> BoxProblem {
    BoxProblem::new(
        parse_uni("T^2").expect("fixture parses"),
        parse_multi("X0^2 + X1^2 + X2^2").expect("fixture parses"),
        b,
    )
    .expect("valid problem")
}
