//! Self-contained dense simplex solver for the small linear programs used
//! by the domain-geometry module.
//!
//! Problems have the form `maximize c.x subject to A x <= b, x >= 0` with at
//! most a few hundred constraints, so a two-phase tableau method with
//! Bland's rule is plenty. Free variables are handled by callers through
//! difference splitting.

/// Result of an LP solve.
#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    /// Optimal solution and objective value.
    Optimal {
        x: Vec<f64>,
        objective: f64,
    },
    Infeasible,
    Unbounded,
}

const EPS: f64 = 1e-11;

/// Maximize `c.x` subject to `a x <= b`, `x >= 0`.
///
/// Two-phase tableau simplex; Bland's rule guarantees termination.
pub fn maximize(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> LpOutcome {
    let m = a.len();
    let n = c.len();
    assert_eq!(b.len(), m);
    assert!(
        a.iter().all(|row| row.len() == n),
        "ragged constraint matrix"
    );

    // Tableau columns: n structural + m slacks + m artificials + rhs.
    // Rows with negative rhs are negated so rhs >= 0; those rows get an
    // artificial basis variable, the rest use their slack.
    let cols = n + 2 * m + 1;
    let rhs_col = cols - 1;
    let mut t = vec![vec![0.0; cols]; m];
    let mut basis = vec![0usize; m];
    let mut any_artificial = false;
    for i in 0..m {
        let flip = if b[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            t[i][j] = flip * a[i][j];
        }
        t[i][n + i] = flip; // slack
        t[i][rhs_col] = flip * b[i];
        if flip < 0.0 {
            t[i][n + m + i] = 1.0; // artificial
            basis[i] = n + m + i;
            any_artificial = true;
        } else {
            basis[i] = n + i;
        }
    }

    let pivot = |t: &mut Vec<Vec<f64>>, basis: &mut Vec<usize>, row: usize, col: usize| {
        let p = t[row][col];
        for v in t[row].iter_mut() {
            *v /= p;
        }
        for r in 0..t.len() {
            if r != row && t[r][col].abs() > 0.0 {
                let f = t[r][col];
                for j in 0..cols {
                    t[r][j] -= f * t[row][j];
                }
            }
        }
        basis[row] = col;
    };

    // Runs the simplex loop for the objective row `obj` (reduced costs for a
    // maximisation), restricted to columns `allowed`.
    let run = |t: &mut Vec<Vec<f64>>,
               basis: &mut Vec<usize>,
               obj: &mut Vec<f64>,
               allowed: usize|
     -> bool {
        loop {
            // Bland: entering variable is the smallest-index column with a
            // positive reduced cost.
            let mut enter = None;
            for j in 0..allowed {
                if obj[j] > EPS {
                    enter = Some(j);
                    break;
                }
            }
            let Some(col) = enter else { return true };
            // Ratio test, smallest index on ties.
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..t.len() {
                if t[i][col] > EPS {
                    let ratio = t[i][rhs_col] / t[i][col];
                    match leave {
                        None => leave = Some((i, ratio)),
                        Some((li, lr)) => {
                            if ratio < lr - EPS
                                || ((ratio - lr).abs() <= EPS && basis[i] < basis[li])
                            {
                                leave = Some((i, ratio));
                            }
                        }
                    }
                }
            }
            let Some((row, _)) = leave else { return false };
            pivot(t, basis, row, col);
            // Update the objective row in sync with the tableau.
            let f = obj[col];
            if f.abs() > 0.0 {
                for j in 0..cols {
                    obj[j] -= f * t[row][j];
                }
            }
        }
    };

    if any_artificial {
        // Phase 1: maximize -(sum of artificials).
        let mut obj = vec![0.0; cols];
        for j in n + m..n + 2 * m {
            obj[j] = -1.0;
        }
        // Make the objective row consistent with the starting basis.
        for i in 0..m {
            if basis[i] >= n + m {
                for j in 0..cols {
                    obj[j] += t[i][j];
                }
            }
        }
        run(&mut t, &mut basis, &mut obj, n + 2 * m);
        // obj[rhs] tracks the artificial mass still in the basis.
        if obj[rhs_col] > 1e-8 {
            return LpOutcome::Infeasible;
        }
        // Drive any artificial still in the basis out of it.
        for i in 0..m {
            if basis[i] >= n + m {
                if let Some(col) = (0..n + m).find(|&j| t[i][j].abs() > EPS) {
                    pivot(&mut t, &mut basis, i, col);
                }
            }
        }
    }

    // Phase 2 objective row: reduced costs for c against the current basis.
    let mut obj = vec![0.0; cols];
    obj[..n].copy_from_slice(c);
    for i in 0..m {
        if basis[i] < n && c[basis[i]].abs() > 0.0 {
            let f = c[basis[i]];
            for j in 0..cols {
                obj[j] -= f * t[i][j];
            }
        }
    }
    // Artificial columns are no longer eligible.
    if !run(&mut t, &mut basis, &mut obj, n + m) {
        return LpOutcome::Unbounded;
    }

    let mut x = vec![0.0; n];
    for i in 0..m {
        if basis[i] < n {
            x[basis[i]] = t[i][rhs_col];
        }
    }
    let objective = c.iter().zip(&x).map(|(ci, xi)| ci * xi).sum();
    LpOutcome::Optimal { x, objective }
}

/// Minimize `c.x` subject to `a x <= b`, `x >= 0`.
pub fn minimize(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> LpOutcome {
    let neg: Vec<f64> = c.iter().map(|v| -v).collect();
    match maximize(&neg, a, b) {
        LpOutcome::Optimal { x, objective } => LpOutcome::Optimal {
            x,
            objective: -objective,
        },
        other => other,
    }
}
