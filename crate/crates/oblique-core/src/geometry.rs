//! The convex reflection domain of a switching problem with controlled
//! randomisation.
//!
//! The domain is `D = { y : y_i >= sup_u ( sum_j P^u_{i,j} y_j - cbar^u_i ) }`,
//! an intersection of half-spaces (one per mode and control) that is
//! invariant under translation along the all-ones vector. This module
//! answers the geometric questions the solver and the reflection operators
//! need: membership and obstacle evaluation, non-emptiness certificates,
//! the vertices of the slice `D∘ = D ∩ {y_d = 0}` in the uncontrolled case,
//! barycentric coordinates with the matching normal cone, Euclidean and
//! oblique projections, and the translation that renders all costs positive.

use crate::error::{GeometryError, ModelError};
use crate::linalg::{dot, Mat};
use crate::markov::{analyze_chain, validate_model, ChainAnalysis, CostVector, StochasticMatrix};
use crate::simplex::{maximize, LpOutcome};

/// Default tolerance separating boundary cases from clear signs.
pub const BOUNDARY_TOL: f64 = 1e-10;
/// Barycentric coordinates above this value count as active support.
pub const ACTIVE_TOL: f64 = 1e-8;

/// Finite control grid with per-control transition matrix and mean costs.
#[derive(Debug, Clone)]
pub struct ControlledTransitionModel {
    /// Ordered control labels; ties in argmax selections resolve to the
    /// smallest label, so order is part of the contract.
    pub controls: Vec<f64>,
    pub p: Vec<StochasticMatrix>,
    pub cbar: Vec<CostVector>,
    /// Use the exact quadratic-maximum obstacle of the cyclic
    /// controlled-randomisation example instead of the grid maximum.
    pub closed_form_obstacle: bool,
}

impl ControlledTransitionModel {
    pub fn new(
        controls: Vec<f64>,
        p: Vec<StochasticMatrix>,
        cbar: Vec<CostVector>,
    ) -> Result<Self, ModelError> {
        if controls.len() != p.len() {
            return Err(ModelError::DimensionMismatch(format!(
                "{} control labels but {} matrices",
                controls.len(),
                p.len()
            )));
        }
        if controls.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ModelError::DimensionMismatch(
                "control labels must be strictly increasing".into(),
            ));
        }
        let report = validate_model(&p, &cbar)?;
        if !report.is_valid() {
            return Err(ModelError::InternalCheck(format!(
                "model fails validation: {:?}",
                report.defects
            )));
        }
        Ok(ControlledTransitionModel {
            controls,
            p,
            cbar,
            closed_form_obstacle: false,
        })
    }

    /// Single-control model.
    pub fn uncontrolled(p: StochasticMatrix, cbar: CostVector) -> Result<Self, ModelError> {
        Self::new(vec![0.0], vec![p], vec![cbar])
    }

    pub fn d(&self) -> usize {
        self.p[0].dim()
    }

    pub fn n_controls(&self) -> usize {
        self.controls.len()
    }

    pub fn is_uncontrolled(&self) -> bool {
        self.controls.len() == 1
    }

    /// Global minimal mean cost over modes and controls.
    pub fn c_hat(&self) -> f64 {
        self.cbar
            .iter()
            .flat_map(|c| c.iter())
            .fold(f64::INFINITY, |m, v| m.min(*v))
    }

    /// Global maximal mean cost over modes and controls.
    pub fn c_check(&self) -> f64 {
        self.cbar
            .iter()
            .flat_map(|c| c.iter())
            .fold(f64::NEG_INFINITY, |m, v| m.max(*v))
    }

    /// Per-mode minimal mean cost over the control grid.
    pub fn min_cost_per_mode(&self) -> Vec<f64> {
        let d = self.d();
        (0..d)
            .map(|i| self.cbar.iter().fold(f64::INFINITY, |m, c| m.min(c[i])))
            .collect()
    }

    /// The switching obstacle for mode `i` at `y`: the largest expected
    /// post-switch value minus cost over the control grid, or the exact
    /// quadratic maximum when the closed form is enabled.
    pub fn obstacle(&self, y: &[f64], i: usize) -> f64 {
        if self.closed_form_obstacle {
            return quadratic_obstacle(y, i);
        }
        let mut best = f64::NEG_INFINITY;
        for (p, c) in self.p.iter().zip(&self.cbar) {
            best = best.max(dot(p.row(i), y) - c[i]);
        }
        best
    }

    /// Control attaining the grid obstacle maximum; ties resolve to the
    /// smallest grid label. Returns (control index, obstacle value).
    pub fn argmax_control(&self, y: &[f64], i: usize) -> (usize, f64) {
        let mut best = f64::NEG_INFINITY;
        let mut at = 0;
        for (u, (p, c)) in self.p.iter().zip(&self.cbar).enumerate() {
            let v = dot(p.row(i), y) - c[i];
            if v > best {
                best = v;
                at = u;
            }
        }
        (at, best)
    }

    /// Minimal slack `min_i (y_i - obstacle_i(y))`; membership holds iff the
    /// slack is at least `-tol`.
    pub fn slack(&self, y: &[f64]) -> f64 {
        (0..self.d())
            .map(|i| y[i] - self.obstacle(y, i))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn membership(&self, y: &[f64], tol: f64) -> (bool, f64) {
        let s = self.slack(y);
        (s >= -tol, s)
    }

    /// One half-space `n . y <= offset` per (control, mode) constraint.
    pub fn half_spaces(&self) -> Vec<HalfSpace> {
        let d = self.d();
        let mut out = Vec::with_capacity(self.n_controls() * d);
        for (p, c) in self.p.iter().zip(&self.cbar) {
            for i in 0..d {
                let mut normal = p.row(i).to_vec();
                normal[i] -= 1.0;
                out.push(HalfSpace {
                    normal,
                    offset: c[i],
                });
            }
        }
        out
    }

    /// Translate costs by a strictly interior point, making every cost
    /// positive; the domain of the returned model is `D - y0`.
    pub fn shift_to_positive_costs(&self, y0: &[f64]) -> Result<Self, GeometryError> {
        let slack = self.slack(y0);
        if slack <= 0.0 {
            return Err(GeometryError::NotInterior { slack });
        }
        let d = self.d();
        let cbar = self
            .p
            .iter()
            .zip(&self.cbar)
            .map(|(p, c)| {
                (0..d)
                    .map(|i| y0[i] - dot(p.row(i), y0) + c[i])
                    .collect::<Vec<f64>>()
            })
            .collect();
        // The quadratic closed form encodes the original cost family; the
        // shifted model falls back to the grid obstacle.
        Ok(ControlledTransitionModel {
            controls: self.controls.clone(),
            p: self.p.clone(),
            cbar,
            closed_form_obstacle: false,
        })
    }
}

/// Exact obstacle for the cyclic quadratic-cost family on the unit control
/// interval: row `i` reads `u y_{i+1} + (1-u) y_{i+2} - (1 - u(1-u))` with
/// cyclic indices, a concave parabola in `u` maximised at the clamped vertex.
fn quadratic_obstacle(y: &[f64], i: usize) -> f64 {
    assert_eq!(y.len(), 3, "closed-form obstacle is a d = 3 construction");
    let a = y[(i + 1) % 3];
    let b = y[(i + 2) % 3];
    let slope = 1.0 + a - b;
    let u = (slope / 2.0).clamp(0.0, 1.0);
    -u * u + u * slope + b - 1.0
}

/// A constraint `normal . y <= offset`.
#[derive(Debug, Clone)]
pub struct HalfSpace {
    pub normal: Vec<f64>,
    pub offset: f64,
}

/// How the domain sits in space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainVerdict {
    Empty,
    NonemptyEmptyInterior,
    NonemptyInterior,
}

/// Evidence gathered about non-emptiness of the domain.
#[derive(Debug, Clone)]
pub struct NonEmptinessCertificate {
    pub lp_feasible: bool,
    pub lp_strictly_feasible: bool,
    /// Optimal value of the uniform-slack program over the slice.
    pub max_uniform_slack: f64,
    /// Slice point attaining the maximal uniform slack (when feasible).
    pub anchor: Option<Vec<f64>>,
    /// Stationary mean cost per control; `None` when that control is reducible.
    pub mu_cbar: Vec<Option<f64>>,
    /// Per-control minimum over ordered pairs of `C_{i,j} + C_{j,i}`.
    pub pair_min: Vec<Option<f64>>,
    /// Per-control maximum over ordered pairs (the "some pair" condition).
    pub pair_max: Vec<Option<f64>>,
    /// Minimum over pairs of `Chat_{i,j} + Chat_{j,i}` (controlled case).
    pub chat_pair_min: Option<f64>,
    /// Triangle-inequality and round-trip scan result (uncontrolled case).
    pub triangle_ok: Option<bool>,
    pub verdict: DomainVerdict,
    /// In the uncontrolled case: whether LP, some-pair, stationary-cost and
    /// all-pairs conditions gave identical answers. `None` when any of the
    /// quantities sits inside the boundary band or the chain is reducible.
    pub conditions_agree: Option<bool>,
}

/// Solve `max s` over slice points subject to every constraint holding with
/// slack at least `s`. Returns `(s*, anchor)`.
fn uniform_slack_lp(model: &ControlledTransitionModel) -> (f64, Option<Vec<f64>>) {
    let d = model.d();
    let half_spaces = model.half_spaces();
    // Variables: y_0..y_{d-2} split into +/- parts, then s+/s-.
    let n_free = d - 1;
    let n_vars = 2 * n_free + 2;
    let mut rows = Vec::with_capacity(half_spaces.len() + 1);
    let mut rhs = Vec::with_capacity(half_spaces.len() + 1);
    for hs in &half_spaces {
        // normal . y + s <= offset, with y_d = 0.
        let mut row = vec![0.0; n_vars];
        for k in 0..n_free {
            row[k] = hs.normal[k];
            row[n_free + k] = -hs.normal[k];
        }
        row[2 * n_free] = 1.0;
        row[2 * n_free + 1] = -1.0;
        rows.push(row);
        rhs.push(hs.offset);
    }
    // Cap on s; never binding at an optimum (s* is at most the largest cost)
    // but keeps the tableau bounded under degeneracy.
    let cap = 1.0 + 2.0 * model.c_check().abs() + 2.0 * model.c_hat().abs();
    let mut cap_row = vec![0.0; n_vars];
    cap_row[2 * n_free] = 1.0;
    cap_row[2 * n_free + 1] = -1.0;
    rows.push(cap_row);
    rhs.push(cap);

    let mut obj = vec![0.0; n_vars];
    obj[2 * n_free] = 1.0;
    obj[2 * n_free + 1] = -1.0;

    match maximize(&obj, &rows, &rhs) {
        LpOutcome::Optimal { x, objective } => {
            let mut anchor = vec![0.0; d];
            for k in 0..n_free {
                anchor[k] = x[k] - x[n_free + k];
            }
            (objective, Some(anchor))
        }
        // A sufficiently negative slack always satisfies the constraints, so
        // the program cannot be infeasible; treat solver failure as empty.
        _ => (f64::NEG_INFINITY, None),
    }
}

/// Evaluate the non-emptiness conditions: LP feasibility (with the strict
/// variant through uniform slack maximisation), per-control stationary mean
/// costs, and the pairwise excursion-cost sums.
pub fn nonemptiness_report(model: &ControlledTransitionModel) -> NonEmptinessCertificate {
    let (slack, anchor) = uniform_slack_lp(model);
    let lp_feasible = slack >= -BOUNDARY_TOL;
    let lp_strictly_feasible = slack > BOUNDARY_TOL;
    let verdict = if lp_strictly_feasible {
        DomainVerdict::NonemptyInterior
    } else if lp_feasible {
        DomainVerdict::NonemptyEmptyInterior
    } else {
        DomainVerdict::Empty
    };

    let analyses: Vec<Option<ChainAnalysis>> = model
        .p
        .iter()
        .zip(&model.cbar)
        .map(|(p, c)| analyze_chain(p, c).ok())
        .collect();
    let d = model.d();
    let mu_cbar: Vec<Option<f64>> = analyses
        .iter()
        .map(|a| a.as_ref().map(|a| a.mu_cbar))
        .collect();
    let pair_stats = |a: &ChainAnalysis| {
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for i in 0..d {
            for j in 0..d {
                if i == j {
                    continue;
                }
                let s = a.c[(i, j)] + a.c[(j, i)];
                min = min.min(s);
                max = max.max(s);
            }
        }
        (min, max)
    };
    let pair_min: Vec<Option<f64>> = analyses
        .iter()
        .map(|a| a.as_ref().map(|a| pair_stats(a).0))
        .collect();
    let pair_max: Vec<Option<f64>> = analyses
        .iter()
        .map(|a| a.as_ref().map(|a| pair_stats(a).1))
        .collect();

    let chat_pair_min = if analyses.iter().all(|a| a.is_some()) {
        let mut min = f64::INFINITY;
        for i in 0..d {
            for j in 0..d {
                if i == j {
                    continue;
                }
                let chat_ij = analyses
                    .iter()
                    .map(|a| a.as_ref().unwrap().c[(i, j)])
                    .fold(f64::INFINITY, f64::min);
                let chat_ji = analyses
                    .iter()
                    .map(|a| a.as_ref().unwrap().c[(j, i)])
                    .fold(f64::INFINITY, f64::min);
                min = min.min(chat_ij + chat_ji);
            }
        }
        Some(min)
    } else {
        None
    };

    let triangle_ok = if model.is_uncontrolled() {
        analyses[0].as_ref().map(|a| triangle_check(a).holds)
    } else {
        None
    };

    let conditions_agree = if model.is_uncontrolled() {
        match (mu_cbar[0], pair_min[0], pair_max[0]) {
            (Some(mc), Some(pmin), Some(pmax)) => {
                let boundary = slack.abs() < BOUNDARY_TOL
                    || mc.abs() < BOUNDARY_TOL
                    || pmin.abs() < BOUNDARY_TOL
                    || pmax.abs() < BOUNDARY_TOL;
                if boundary {
                    None
                } else {
                    let b = [slack > 0.0, pmax > 0.0, mc > 0.0, pmin > 0.0];
                    Some(b.iter().all(|&v| v == b[0]))
                }
            }
            _ => None,
        }
    } else {
        None
    };

    NonEmptinessCertificate {
        lp_feasible,
        lp_strictly_feasible,
        max_uniform_slack: slack,
        anchor,
        mu_cbar,
        pair_min,
        pair_max,
        chat_pair_min,
        triangle_ok,
        verdict,
        conditions_agree,
    }
}

/// Vertices of the slice polytope in the uncontrolled non-empty-interior
/// case: point `j` is `(C_{d,j} - C_{i,j})_i`, with last coordinate zero.
pub fn slice_vertices(
    model: &ControlledTransitionModel,
    analysis: &ChainAnalysis,
) -> Result<Vec<Vec<f64>>, GeometryError> {
    if !model.is_uncontrolled() {
        return Err(GeometryError::NotUncontrolled);
    }
    if analysis.mu_cbar <= 0.0 {
        return Err(GeometryError::EmptyInterior);
    }
    let d = model.d();
    let vertices: Vec<Vec<f64>> = (0..d)
        .map(|j| {
            (0..d)
                .map(|i| analysis.c[(d - 1, j)] - analysis.c[(i, j)])
                .collect()
        })
        .collect();
    // Affine independence: the difference matrix must have full rank d-1.
    let diffs: Vec<Vec<f64>> = (0..d - 1)
        .map(|j| {
            (0..d)
                .map(|i| vertices[j][i] - vertices[d - 1][i])
                .collect()
        })
        .collect();
    let rank = Mat::from_rows(&diffs).rank(1e-10);
    if rank != d - 1 {
        return Err(GeometryError::Model(ModelError::InternalCheck(format!(
            "slice vertices affinely dependent: rank {rank} != {}",
            d - 1
        ))));
    }
    Ok(vertices)
}

/// Support and outward normal-cone generators at a slice point.
#[derive(Debug, Clone)]
pub struct NormalCone {
    /// Barycentric coordinates with respect to the slice vertices.
    pub lambda: Vec<f64>,
    /// Indices with barycentric weight above the active tolerance.
    pub support: Vec<usize>,
    /// One generator per constraint outside the support, paired with its
    /// constraint index.
    pub generators: Vec<(usize, Vec<f64>)>,
}

/// Solve the barycentric system at `y` (translated to the slice first) and
/// read off the active set and normal-cone generators.
pub fn barycentric_and_normal_cone(
    y: &[f64],
    model: &ControlledTransitionModel,
    vertices: &[Vec<f64>],
) -> Result<NormalCone, GeometryError> {
    let lambda = barycentric_coordinates(y, vertices)?;
    for (j, l) in lambda.iter().enumerate() {
        if *l < -1e-9 {
            return Err(GeometryError::OutsideSlice {
                coord: j,
                value: *l,
            });
        }
    }
    let support: Vec<usize> = (0..lambda.len())
        .filter(|&j| lambda[j] > ACTIVE_TOL)
        .collect();
    let generators = normal_generators(model, &support);
    Ok(NormalCone {
        lambda,
        support,
        generators,
    })
}

/// Generators `n_j = -(row j of Q)` for every constraint j outside the
/// support. The diagonal entry is set to the negated off-diagonal sum so
/// every generator lies in the zero-sum hyperplane exactly.
pub fn normal_generators(
    model: &ControlledTransitionModel,
    support: &[usize],
) -> Vec<(usize, Vec<f64>)> {
    let d = model.d();
    let p = &model.p[0];
    (0..d)
        .filter(|j| !support.contains(j))
        .map(|j| {
            let mut n: Vec<f64> = p.row(j).to_vec();
            n[j] = 0.0;
            let off_sum: f64 = n.iter().sum();
            n[j] = -off_sum;
            (j, n)
        })
        .collect()
}

/// Barycentric coordinates of `y` (any representative; reduced to the slice
/// by subtracting its last coordinate) with respect to `vertices`.
pub fn barycentric_coordinates(
    y: &[f64],
    vertices: &[Vec<f64>],
) -> Result<Vec<f64>, GeometryError> {
    let d = vertices.len();
    let y_slice: Vec<f64> = y.iter().map(|v| v - y[d - 1]).collect();
    let mut a = Mat::zeros(d, d);
    let mut b = vec![0.0; d];
    for i in 0..d - 1 {
        for (j, v) in vertices.iter().enumerate() {
            a[(i, j)] = v[i];
        }
        b[i] = y_slice[i];
    }
    for j in 0..d {
        a[(d - 1, j)] = 1.0;
    }
    b[d - 1] = 1.0;
    a.solve(&b).map_err(|_| {
        GeometryError::Model(ModelError::InternalCheck(
            "barycentric system singular".into(),
        ))
    })
}

/// Euclidean projection onto the half-space intersection by Dykstra's
/// alternating projections. Stops at 1e-10 displacement or 10^4 rounds.
pub fn euclidean_project(y: &[f64], half_spaces: &[HalfSpace]) -> Vec<f64> {
    let mut x = y.to_vec();
    let mut corrections = vec![vec![0.0; y.len()]; half_spaces.len()];
    for _ in 0..10_000 {
        let x_before = x.clone();
        for (hs, corr) in half_spaces.iter().zip(&mut corrections) {
            let w: Vec<f64> = x.iter().zip(corr.iter()).map(|(a, b)| a + b).collect();
            let overshoot = dot(&hs.normal, &w) - hs.offset;
            let nn = dot(&hs.normal, &hs.normal);
            let x_new: Vec<f64> = if overshoot > 0.0 && nn > 0.0 {
                let f = overshoot / nn;
                w.iter()
                    .zip(&hs.normal)
                    .map(|(wi, ni)| wi - f * ni)
                    .collect()
            } else {
                w.clone()
            };
            for k in 0..x.len() {
                corr[k] = w[k] - x_new[k];
            }
            x = x_new;
        }
        let moved = x
            .iter()
            .zip(&x_before)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        if moved < 1e-10 {
            break;
        }
    }
    x
}

/// Smallest point of the domain dominating `y` componentwise: cyclically
/// raise each coordinate to its obstacle until nothing moves. Coordinates
/// only ever increase, and a raised coordinate ends on its own constraint,
/// which is the discrete minimal-pushing property.
pub fn oblique_project(
    y: &[f64],
    model: &ControlledTransitionModel,
) -> Result<Vec<f64>, GeometryError> {
    let d = model.d();
    let mut z = y.to_vec();
    // The sweep is a monotone pass whose residual contracts geometrically
    // when the minimal cost is positive and the domain is nonempty;
    // otherwise it plateaus or grows, which the windowed ratio test catches
    // long before the hard cap.
    // Any rate the window test admits (under ~0.9995 per sweep) converges
    // well inside the cap.
    const MAX_SWEEPS: usize = 200_000;
    const WINDOW: usize = 200;
    let mut history: Vec<f64> = Vec::with_capacity(512);
    for sweep in 0..MAX_SWEEPS {
        let mut residual = 0.0f64;
        for i in 0..d {
            let ob = model.obstacle(&z, i);
            if ob > z[i] {
                residual = residual.max(ob - z[i]);
                z[i] = ob;
            }
        }
        if residual < 1e-12 {
            return Ok(z);
        }
        if sweep >= WINDOW && residual > 0.9 * history[sweep - WINDOW] {
            return Err(GeometryError::ProjectionStalled {
                sweeps: sweep + 1,
                residual,
            });
        }
        history.push(residual);
    }
    Err(GeometryError::ProjectionStalled {
        sweeps: MAX_SWEEPS,
        residual: *history.last().unwrap_or(&f64::INFINITY),
    })
}

/// A model together with its derived geometric data.
#[derive(Debug, Clone)]
pub struct SwitchingDomain {
    pub model: ControlledTransitionModel,
    pub half_spaces: Vec<HalfSpace>,
    pub certificate: NonEmptinessCertificate,
    /// Excursion analysis per control, when that control is irreducible.
    pub per_control: Vec<Option<ChainAnalysis>>,
    /// Entrywise minimum of the per-control excursion costs.
    pub chat: Option<Mat>,
    /// Slice vertices in the uncontrolled non-empty-interior case.
    pub slice_vertices: Option<Vec<Vec<f64>>>,
}

impl SwitchingDomain {
    pub fn build(model: ControlledTransitionModel) -> Result<Self, GeometryError> {
        let half_spaces = model.half_spaces();
        let certificate = nonemptiness_report(&model);
        let per_control: Vec<Option<ChainAnalysis>> = model
            .p
            .iter()
            .zip(&model.cbar)
            .map(|(p, c)| analyze_chain(p, c).ok())
            .collect();
        let d = model.d();
        let chat = if per_control.iter().all(|a| a.is_some()) {
            let mut m = Mat::zeros(d, d);
            for i in 0..d {
                for j in 0..d {
                    if i != j {
                        m[(i, j)] = per_control
                            .iter()
                            .map(|a| a.as_ref().unwrap().c[(i, j)])
                            .fold(f64::INFINITY, f64::min);
                    }
                }
            }
            Some(m)
        } else {
            None
        };
        let slice =
            if model.is_uncontrolled() && certificate.verdict == DomainVerdict::NonemptyInterior {
                match &per_control[0] {
                    Some(a) => Some(slice_vertices(&model, a)?),
                    None => None,
                }
            } else {
                None
            };
        Ok(SwitchingDomain {
            model,
            half_spaces,
            certificate,
            per_control,
            chat,
            slice_vertices: slice,
        })
    }

    pub fn d(&self) -> usize {
        self.model.d()
    }

    /// Euclidean projection onto the (grid) half-space domain.
    pub fn euclidean_project(&self, y: &[f64]) -> Result<Vec<f64>, GeometryError> {
        if self.certificate.verdict == DomainVerdict::Empty {
            return Err(GeometryError::EmptyDomain);
        }
        Ok(euclidean_project(y, &self.half_spaces))
    }

    /// Barycentric data at a slice point (uncontrolled case only).
    pub fn normal_cone(&self, y: &[f64]) -> Result<NormalCone, GeometryError> {
        let vertices = self
            .slice_vertices
            .as_ref()
            .ok_or(GeometryError::EmptyInterior)?;
        barycentric_and_normal_cone(y, &self.model, vertices)
    }

    /// Points `-(Chat_{.,j} - Chat_{d,j} 1)` from the minimal excursion
    /// costs; in the controlled case these are the extreme slice points the
    /// cheapest excursions pin down.
    pub fn chat_vertices(&self) -> Option<Vec<Vec<f64>>> {
        let chat = self.chat.as_ref()?;
        let d = self.d();
        Some(
            (0..d)
                .map(|j| (0..d).map(|i| chat[(d - 1, j)] - chat[(i, j)]).collect())
                .collect(),
        )
    }
}

/// Classical switching model: control `u` shifts the mode by `u` cyclically,
/// charging the pairwise cost of the landing mode.
pub fn classical_embedding(cost: &Mat) -> Result<ControlledTransitionModel, GeometryError> {
    let d = cost.rows();
    assert_eq!(cost.cols(), d, "cost matrix must be square");
    if d < 2 {
        return Err(GeometryError::Model(ModelError::TooFewModes(d)));
    }
    for i in 0..d {
        if cost[(i, i)] != 0.0 {
            return Err(GeometryError::NonzeroDiagonalCost {
                i,
                value: cost[(i, i)],
            });
        }
    }
    let mut matrices = Vec::with_capacity(d - 1);
    let mut costs = Vec::with_capacity(d - 1);
    for u in 1..d {
        let mut rows = vec![vec![0.0; d]; d];
        let mut c = vec![0.0; d];
        for (i, row) in rows.iter_mut().enumerate() {
            let j = (i + u) % d;
            row[j] = 1.0;
            c[i] = cost[(i, j)];
        }
        matrices.push(StochasticMatrix::from_rows(&rows).map_err(GeometryError::Model)?);
        costs.push(c);
    }
    let controls: Vec<f64> = (1..d).map(|u| u as f64).collect();
    ControlledTransitionModel::new(controls, matrices, costs).map_err(GeometryError::Model)
}

/// Result of the triangle-inequality and round-trip scan.
#[derive(Debug, Clone)]
pub struct TriangleReport {
    pub holds: bool,
    /// Worst triple (j, i, k) and the amount by which
    /// `C_{j,k} <= C_{j,i} + C_{i,k}` fails (positive = violation).
    pub worst_triple: Option<(usize, usize, usize, f64)>,
    /// Minimal total cost over all round trips of length at most d.
    pub min_round_trip: f64,
    pub worst_cycle: Vec<usize>,
}

/// Check `C_{j,k} <= C_{j,i} + C_{i,k}` on all distinct triples and
/// nonnegativity of every round trip visiting at most d distinct states.
pub fn triangle_check(analysis: &ChainAnalysis) -> TriangleReport {
    let d = analysis.d;
    let c = &analysis.c;
    let mut worst: Option<(usize, usize, usize, f64)> = None;
    for j in 0..d {
        for i in 0..d {
            for k in 0..d {
                if i == j || i == k || j == k {
                    continue;
                }
                let violation = c[(j, k)] - c[(j, i)] - c[(i, k)];
                if worst.is_none_or(|(_, _, _, w)| violation > w) {
                    worst = Some((j, i, k, violation));
                }
            }
        }
    }

    // Enumerate round trips over 2..=d distinct states; the smallest visited
    // state leads so each cycle appears once per orientation.
    fn recurse(
        c: &Mat,
        d: usize,
        path: &mut Vec<usize>,
        used: &mut [bool],
        cost_so_far: f64,
        min: &mut f64,
        argmin: &mut Vec<usize>,
    ) {
        let last = *path.last().unwrap();
        if path.len() >= 2 {
            let total = cost_so_far + c[(last, path[0])];
            if total < *min {
                *min = total;
                *argmin = path.clone();
            }
        }
        if path.len() == d {
            return;
        }
        for next in (path[0] + 1)..d {
            if !used[next] {
                used[next] = true;
                path.push(next);
                recurse(c, d, path, used, cost_so_far + c[(last, next)], min, argmin);
                path.pop();
                used[next] = false;
            }
        }
    }
    let mut min_round_trip = f64::INFINITY;
    let mut worst_cycle = Vec::new();
    let mut path: Vec<usize> = Vec::with_capacity(d);
    for start in 0..d {
        let mut used = vec![false; d];
        used[start] = true;
        path.clear();
        path.push(start);
        recurse(
            c,
            d,
            &mut path,
            &mut used,
            0.0,
            &mut min_round_trip,
            &mut worst_cycle,
        );
    }

    let triple_ok = worst.is_none_or(|(_, _, _, v)| v <= 1e-9);
    let holds = triple_ok && min_round_trip >= -1e-9;
    TriangleReport {
        holds,
        worst_triple: worst,
        min_round_trip,
        worst_cycle,
    }
}

/// Ordered boundary points of the slice for a 3-mode model. Uncontrolled
/// models return the triangle vertices; controlled models trace the boundary
/// by bisection along rays from the maximal-slack anchor.
pub fn emit_slice_polygon(
    domain: &SwitchingDomain,
    resolution: usize,
) -> Result<Vec<Vec<f64>>, GeometryError> {
    let d = domain.d();
    if d != 3 {
        return Err(GeometryError::NotDimensionThree(d));
    }
    if domain.certificate.verdict != DomainVerdict::NonemptyInterior {
        return Err(GeometryError::EmptyInterior);
    }
    if let Some(vertices) = &domain.slice_vertices {
        let mut pts = vertices.clone();
        let cx = pts.iter().map(|p| p[0]).sum::<f64>() / 3.0;
        let cy = pts.iter().map(|p| p[1]).sum::<f64>() / 3.0;
        pts.sort_by(|a, b| {
            let aa = (a[1] - cy).atan2(a[0] - cx);
            let bb = (b[1] - cy).atan2(b[0] - cx);
            aa.partial_cmp(&bb).unwrap()
        });
        return Ok(pts);
    }

    let anchor = domain
        .certificate
        .anchor
        .clone()
        .ok_or(GeometryError::EmptyInterior)?;
    let model = &domain.model;
    let mut out = Vec::with_capacity(resolution);
    for t in 0..resolution {
        let theta = 2.0 * std::f64::consts::PI * t as f64 / resolution as f64;
        let dir = [theta.cos(), theta.sin(), 0.0];
        let point_at = |r: f64| -> Vec<f64> { (0..3).map(|k| anchor[k] + r * dir[k]).collect() };
        let feasible = |r: f64| model.membership(&point_at(r), 1e-12).0;
        // Expand to an infeasible radius, then bisect.
        let mut hi = 1.0;
        let mut expansions = 0;
        while feasible(hi) && expansions < 60 {
            hi *= 2.0;
            expansions += 1;
        }
        if expansions == 60 {
            return Err(GeometryError::Model(ModelError::InternalCheck(
                "slice boundary trace escaped: slice appears unbounded".into(),
            )));
        }
        let mut lo = 0.0;
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if feasible(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        out.push(point_at(lo));
    }
    Ok(out)
}

/// Builders for the named three-mode instances used throughout the tests
/// and the command-line interface.
pub mod builtin {
    use super::*;

    /// Classical three-mode switching with all pairwise costs equal to one.
    pub fn example1() -> ControlledTransitionModel {
        let mut cost = Mat::zeros(3, 3);
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    cost[(i, j)] = 1.0;
                }
            }
        }
        classical_embedding(&cost).expect("static example")
    }

    /// Randomised switching: uniform jump to the other two modes, unit cost.
    pub fn example2() -> ControlledTransitionModel {
        symmetric(3, vec![1.0; 3]).expect("static example")
    }

    /// Controlled randomisation on the unit interval with quadratic costs
    /// `1 - u(1-u)`; the obstacle is evaluated in closed form and the grid
    /// carries `grid_points` uniform control samples for the half-space
    /// family.
    pub fn example3(grid_points: usize) -> ControlledTransitionModel {
        let n = grid_points.max(2);
        let mut controls = Vec::with_capacity(n);
        let mut matrices = Vec::with_capacity(n);
        let mut costs = Vec::with_capacity(n);
        for k in 0..n {
            let u = k as f64 / (n - 1) as f64;
            controls.push(u);
            matrices.push(
                StochasticMatrix::from_rows(&[
                    vec![0.0, u, 1.0 - u],
                    vec![1.0 - u, 0.0, u],
                    vec![u, 1.0 - u, 0.0],
                ])
                .expect("static example"),
            );
            costs.push(vec![1.0 - u * (1.0 - u); 3]);
        }
        let mut model =
            ControlledTransitionModel::new(controls, matrices, costs).expect("static example");
        model.closed_form_obstacle = true;
        model
    }

    /// Uniform off-diagonal chain in dimension d with the given costs.
    pub fn symmetric(d: usize, cbar: Vec<f64>) -> Result<ControlledTransitionModel, ModelError> {
        let w = 1.0 / (d - 1) as f64;
        let rows: Vec<Vec<f64>> = (0..d)
            .map(|i| (0..d).map(|j| if i == j { 0.0 } else { w }).collect())
            .collect();
        ControlledTransitionModel::uncontrolled(StochasticMatrix::from_rows(&rows)?, cbar)
    }

    /// Uncontrolled three-mode chain parameterised by its three free
    /// transition probabilities.
    pub fn dim3(
        p: f64,
        q: f64,
        r: f64,
        cbar: Vec<f64>,
    ) -> Result<ControlledTransitionModel, ModelError> {
        ControlledTransitionModel::uncontrolled(
            StochasticMatrix::from_rows(&[
                vec![0.0, p, 1.0 - p],
                vec![q, 0.0, 1.0 - q],
                vec![r, 1.0 - r, 0.0],
            ])?,
            cbar,
        )
    }

    /// Two-control instance whose pairwise minimal excursion sums are all
    /// positive while the stationary minimal cost is negative, so the domain
    /// is empty although the pair condition looks healthy.
    pub fn pair_positive_empty() -> ControlledTransitionModel {
        let p = StochasticMatrix::from_rows(&[
            vec![0.0, 0.5, 0.5],
            vec![0.5, 0.0, 0.5],
            vec![0.5, 0.5, 0.0],
        ])
        .expect("static example");
        ControlledTransitionModel::new(
            vec![0.0, 1.0],
            vec![p.clone(), p],
            vec![vec![-0.5, 1.2, 0.7], vec![1.5, 0.2, 0.2]],
        )
        .expect("static example")
    }
}
