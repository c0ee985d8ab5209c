//! Report formatting: human-readable summaries use 6 significant digits,
//! machine records 17, so regression diffs are bit-faithful.

use std::fmt::Write as _;

/// 17 significant digits, for machine records.
pub fn machine(x: f64) -> String {
    format!("{x:.16e}")
}

/// 6 significant digits, for human-facing summaries.
pub fn human(x: f64) -> String {
    format!("{x:.5e}")
}

pub fn matrix_block(name: &str, m: &oblique_core::linalg::Mat, digits17: bool) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{name} ({}x{}):", m.rows(), m.cols());
    for i in 0..m.rows() {
        let row: Vec<String> = (0..m.cols())
            .map(|j| {
                if digits17 {
                    machine(m[(i, j)])
                } else {
                    human(m[(i, j)])
                }
            })
            .collect();
        let _ = writeln!(out, "  [{}]", row.join(", "));
    }
    out
}

pub fn vector_line(name: &str, v: &[f64], digits17: bool) -> String {
    let vals: Vec<String> = v
        .iter()
        .map(|x| if digits17 { machine(*x) } else { human(*x) })
        .collect();
    format!("{name} = [{}]\n", vals.join(", "))
}
