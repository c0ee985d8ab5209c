//! Finite-state Markov-chain analytics.
//!
//! Validation of per-control transition data, irreducibility, invariant
//! measures by the determinant route (cross-checked against a null-space
//! solve), expected excursion costs between states, absorbing-chain moments,
//! and the adjugate identity tying cofactors of the deleted-row/column
//! matrices to the invariant measure.

use crate::error::ModelError;
use crate::linalg::{dot, Mat};

/// Condition-number threshold above which a warning is recorded.
pub const CONDITION_WARN: f64 = 1e12;

/// Row-stochastic transition matrix over `d >= 2` modes.
///
/// Construction only enforces shape and finiteness; numeric validity
/// (row sums, entry ranges, diagonal-one violations) is the job of
/// [`validate_model`], which must be able to inspect defective data.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticMatrix {
    rows: Mat,
}

impl StochasticMatrix {
    pub fn new(rows: Mat) -> Result<Self, ModelError> {
        if rows.rows() != rows.cols() {
            return Err(ModelError::DimensionMismatch(format!(
                "transition matrix must be square, got {}x{}",
                rows.rows(),
                rows.cols()
            )));
        }
        if rows.rows() < 2 {
            return Err(ModelError::TooFewModes(rows.rows()));
        }
        for i in 0..rows.rows() {
            for j in 0..rows.cols() {
                if !rows[(i, j)].is_finite() {
                    return Err(ModelError::NonFinite(format!("P[{i}][{j}]")));
                }
            }
        }
        Ok(StochasticMatrix { rows })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, ModelError> {
        Self::new(Mat::from_rows(rows))
    }

    pub fn dim(&self) -> usize {
        self.rows.rows()
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.rows[(i, j)]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.rows.row(i)
    }

    pub fn as_mat(&self) -> &Mat {
        &self.rows
    }

    /// Q = I - P.
    pub fn q_matrix(&self) -> Mat {
        Mat::identity(self.dim()).sub(&self.rows)
    }

    /// Q with row `i` and column `i` deleted.
    pub fn q_minor(&self, i: usize) -> Mat {
        self.q_matrix().minor(i, i)
    }
}

/// Mean switching costs per mode.
pub type CostVector = Vec<f64>;

/// One defect found while validating a family of transition matrices.
#[derive(Debug, Clone, PartialEq)]
pub enum ValidationDefect {
    /// |row sum - 1| exceeded tolerance for (control, row, defect).
    RowSum {
        control: usize,
        row: usize,
        defect: f64,
    },
    /// Entry outside [0, 1] at (control, row, col, value).
    EntryRange {
        control: usize,
        row: usize,
        col: usize,
        value: f64,
    },
    /// P^u_{i,i} = 1 for (control, mode).
    DiagonalOne { control: usize, mode: usize },
    /// Non-finite cost at (control, mode).
    CostNotFinite { control: usize, mode: usize },
}

/// Outcome of [`validate_model`].
#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub d: usize,
    pub controls: usize,
    pub defects: Vec<ValidationDefect>,
    /// Global minimal mean cost over all modes and controls.
    pub c_hat: f64,
    /// Global maximal mean cost over all modes and controls.
    pub c_check: f64,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.defects.is_empty()
    }
}

/// Check a family of per-control transition matrices and cost vectors.
///
/// Dimension mismatches are structural and returned as errors; numeric
/// defects (row sums off by more than 1e-9, entries outside [0,1],
/// diagonal entries equal to one) are listed in the report.
pub fn validate_model(
    p_family: &[StochasticMatrix],
    costs: &[CostVector],
) -> Result<ValidationReport, ModelError> {
    if p_family.is_empty() {
        return Err(ModelError::DimensionMismatch("empty control family".into()));
    }
    if p_family.len() != costs.len() {
        return Err(ModelError::DimensionMismatch(format!(
            "{} transition matrices but {} cost vectors",
            p_family.len(),
            costs.len()
        )));
    }
    let d = p_family[0].dim();
    for (u, p) in p_family.iter().enumerate() {
        if p.dim() != d {
            return Err(ModelError::DimensionMismatch(format!(
                "control {u} has dimension {} != {d}",
                p.dim()
            )));
        }
    }
    for (u, c) in costs.iter().enumerate() {
        if c.len() != d {
            return Err(ModelError::DimensionMismatch(format!(
                "cost vector for control {u} has length {} != {d}",
                c.len()
            )));
        }
    }

    let mut defects = Vec::new();
    let mut c_hat = f64::INFINITY;
    let mut c_check = f64::NEG_INFINITY;
    for (u, p) in p_family.iter().enumerate() {
        for i in 0..d {
            let mut sum = 0.0;
            for j in 0..d {
                let v = p.entry(i, j);
                sum += v;
                if !(0.0..=1.0).contains(&v) {
                    defects.push(ValidationDefect::EntryRange {
                        control: u,
                        row: i,
                        col: j,
                        value: v,
                    });
                }
            }
            if (sum - 1.0).abs() > 1e-9 {
                defects.push(ValidationDefect::RowSum {
                    control: u,
                    row: i,
                    defect: sum - 1.0,
                });
            }
            if p.entry(i, i) == 1.0 {
                defects.push(ValidationDefect::DiagonalOne {
                    control: u,
                    mode: i,
                });
            }
        }
    }
    for (u, c) in costs.iter().enumerate() {
        for (i, v) in c.iter().enumerate() {
            if !v.is_finite() {
                defects.push(ValidationDefect::CostNotFinite {
                    control: u,
                    mode: i,
                });
            } else {
                c_hat = c_hat.min(*v);
                c_check = c_check.max(*v);
            }
        }
    }
    Ok(ValidationReport {
        d,
        controls: p_family.len(),
        defects,
        c_hat,
        c_check,
    })
}

/// True iff the digraph of strictly positive transition entries is strongly
/// connected. Structural zeros are compared against exactly 0.
pub fn irreducible(p: &StochasticMatrix) -> bool {
    let d = p.dim();
    let reach = |transpose: bool| -> bool {
        let mut seen = vec![false; d];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for j in 0..d {
                let w = if transpose {
                    p.entry(j, i)
                } else {
                    p.entry(i, j)
                };
                if w > 0.0 && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    reach(false) && reach(true)
}

/// Full excursion-cost analysis of an irreducible chain.
#[derive(Debug, Clone)]
pub struct ChainAnalysis {
    pub d: usize,
    /// Q = I - P.
    pub q: Mat,
    /// Invariant probability measure.
    pub mu: Vec<f64>,
    /// Unnormalised invariant measure, `mu_tilde[i] = det Q^{(i,i)}`.
    pub mu_tilde: Vec<f64>,
    /// Expected cost accumulated from `i` until first hitting `j`; zero diagonal.
    pub c: Mat,
    /// Expected round-trip cost from `j` back to `j`, computed through the
    /// one-step recursion on the excursion costs.
    pub cbar_diag: Vec<f64>,
    /// mu . cbar, the stationary mean cost.
    pub mu_cbar: f64,
    /// The cost vector used for the analysis.
    pub cbar: Vec<f64>,
    /// (index j, condition number) for every Q^{(j,j)} above [`CONDITION_WARN`].
    pub condition_warnings: Vec<(usize, f64)>,
}

/// Analyse an irreducible chain: invariant measure by the determinant
/// formula (cross-checked against the null-space solve), excursion costs
/// by solving `Q^{(j,j)} C_{.,j} = cbar^{(j)}`, and round-trip costs via the
/// one-step recursion.
pub fn analyze_chain(p: &StochasticMatrix, cbar: &[f64]) -> Result<ChainAnalysis, ModelError> {
    let d = p.dim();
    if cbar.len() != d {
        return Err(ModelError::DimensionMismatch(format!(
            "cost vector length {} != {d}",
            cbar.len()
        )));
    }
    if !irreducible(p) {
        return Err(ModelError::Reducible);
    }
    let q = p.q_matrix();

    // Determinant route.
    let mu_tilde: Vec<f64> = (0..d).map(|i| q.minor(i, i).det()).collect();
    let total: f64 = mu_tilde.iter().sum();
    if mu_tilde.iter().any(|&v| v <= 0.0) || !total.is_finite() || total <= 0.0 {
        return Err(ModelError::InternalCheck(format!(
            "determinant invariant measure not positive: {mu_tilde:?}"
        )));
    }
    let mu: Vec<f64> = mu_tilde.iter().map(|v| v / total).collect();

    // Null-space route: replace the last equation of Q^T mu = 0 by sum(mu) = 1.
    let mut a = q.transpose();
    for j in 0..d {
        a[(d - 1, j)] = 1.0;
    }
    let mut rhs = vec![0.0; d];
    rhs[d - 1] = 1.0;
    let mu_lu = a
        .solve(&rhs)
        .map_err(|_| ModelError::InternalCheck("null-space solve singular".into()))?;
    for i in 0..d {
        if (mu[i] - mu_lu[i]).abs() > 1e-8 {
            return Err(ModelError::InternalCheck(format!(
                "invariant measure routes disagree at {i}: det {} vs solve {}",
                mu[i], mu_lu[i]
            )));
        }
    }

    // Excursion costs, one linear solve per target state.
    let mut c = Mat::zeros(d, d);
    let mut condition_warnings = Vec::new();
    for j in 0..d {
        let qjj = q.minor(j, j);
        let cond = qjj.condition_number();
        if cond > CONDITION_WARN {
            condition_warnings.push((j, cond));
        }
        let rhs: Vec<f64> = (0..d).filter(|&i| i != j).map(|i| cbar[i]).collect();
        let col = qjj
            .solve(&rhs)
            .map_err(|_| ModelError::InternalCheck(format!("Q^({j},{j}) singular")))?;
        for i in 0..d {
            if i != j {
                c[(i, j)] = col[i - usize::from(i > j)];
            }
        }
    }

    // Round-trip costs from the one-step recursion at i = j.
    let cbar_diag: Vec<f64> = (0..d)
        .map(|j| {
            cbar[j]
                + (0..d)
                    .filter(|&l| l != j)
                    .map(|l| c[(l, j)] * p.entry(j, l))
                    .sum::<f64>()
        })
        .collect();

    let mu_cbar = dot(&mu, cbar);
    Ok(ChainAnalysis {
        d,
        q,
        mu,
        mu_tilde,
        c,
        cbar_diag,
        mu_cbar,
        cbar: cbar.to_vec(),
        condition_warnings,
    })
}

/// First and second moments of the number of steps to absorption.
#[derive(Debug, Clone)]
pub struct AbsorptionMoments {
    pub expected_steps: Vec<f64>,
    pub second_moment: Vec<f64>,
}

/// Moments of the absorption time of a substochastic matrix over the
/// transient states: `E[N] = M 1` and `E[N^2] = (2M - I) E[N]` with the
/// fundamental matrix `M = (I - P_sub)^{-1}`.
pub fn absorption_moments(p_sub: &Mat) -> Result<AbsorptionMoments, ModelError> {
    assert_eq!(
        p_sub.rows(),
        p_sub.cols(),
        "substochastic matrix must be square"
    );
    let n = p_sub.rows();

    // Power iteration on the all-ones vector; for a nonnegative matrix the
    // decay of P^k 1 is governed by the spectral radius. The vector is
    // renormalised to max-norm 1 each step, so the growth factor is the
    // estimate directly.
    let mut y = vec![1.0; n];
    let mut rho = 1.0f64;
    for it in 0..400 {
        y = p_sub.matvec(&y);
        let m = y.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if m < 1e-280 {
            rho = 0.0;
            break;
        }
        if it >= 100 {
            rho = m;
        }
        for v in &mut y {
            *v /= m;
        }
    }
    if rho >= 1.0 - 1e-12 {
        return Err(ModelError::NotAbsorbing { rho });
    }

    let fundamental = Mat::identity(n)
        .sub(p_sub)
        .inverse()
        .map_err(|_| ModelError::NotAbsorbing { rho: 1.0 })?;
    let expected_steps = fundamental.matvec(&vec![1.0; n]);
    let two_m_minus_i = fundamental.scale(2.0).sub(&Mat::identity(n));
    let second_moment = two_m_minus_i.matvec(&expected_steps);
    for i in 0..n {
        if !(expected_steps[i].is_finite() && second_moment[i].is_finite()) {
            return Err(ModelError::InternalCheck(
                "non-finite absorption moments".into(),
            ));
        }
        if second_moment[i] < expected_steps[i] * expected_steps[i] - 1e-9 {
            return Err(ModelError::InternalCheck(format!(
                "E[N^2] < E[N]^2 at state {i}"
            )));
        }
    }
    Ok(AbsorptionMoments {
        expected_steps,
        second_moment,
    })
}

/// Maximal relative residual of the cofactor identity
/// `mu_i Qadj^j[i,k] + mu_j Qadj^i[j,k] = mu_k Qadj^j[i,i]`
/// over all triples of distinct indices, where `Qadj^j` is the adjugate of
/// `Q^{(j,j)}` and indices are taken after deleting row/column `j`.
pub fn adjugate_identity_check(p: &StochasticMatrix) -> Result<f64, ModelError> {
    let d = p.dim();
    if d < 3 {
        return Err(ModelError::NeedsThreeIndices(d));
    }
    if !irreducible(p) {
        return Err(ModelError::Reducible);
    }
    let q = p.q_matrix();
    let adjugates: Vec<Mat> = (0..d).map(|j| q.minor(j, j).adjugate()).collect();
    let mu_tilde: Vec<f64> = (0..d).map(|i| q.minor(i, i).det()).collect();
    let total: f64 = mu_tilde.iter().sum();
    let mu: Vec<f64> = mu_tilde.iter().map(|v| v / total).collect();

    let del = |a: usize, b: usize| a - usize::from(a > b);
    let mut worst = 0.0f64;
    for i in 0..d {
        for j in 0..d {
            if j == i {
                continue;
            }
            for k in 0..d {
                if k == i || k == j {
                    continue;
                }
                let t1 = mu[i] * adjugates[j][(del(i, j), del(k, j))];
                let t2 = mu[j] * adjugates[i][(del(j, i), del(k, i))];
                let t3 = mu[k] * adjugates[j][(del(i, j), del(i, j))];
                let scale = t1.abs().max(t2.abs()).max(t3.abs()).max(1.0);
                worst = worst.max((t1 + t2 - t3).abs() / scale);
            }
        }
    }
    Ok(worst)
}
