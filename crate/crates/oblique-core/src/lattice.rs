//! Backward-induction lattice solver for the obliquely reflected system.
//!
//! The driving state is a one-dimensional diffusion with affine
//! coefficients, discretised on a uniform grid. Transition weights come
//! either from integrating the Euler-step Gaussian over grid cells or from
//! a mean/variance-matched trinomial branch (the oracle mode). The backward
//! sweep takes conditional expectations, a gradient proxy by quadrature
//! against the Brownian increment, a Picard fixed point for the driver, and
//! an oblique projection that raises components onto their switching
//! obstacles, producing the value field, the gradient field, and the
//! nonnegative reflection increments with a discrete minimal-pushing
//! property.

use crate::error::LatticeError;
use crate::geometry::{
    nonemptiness_report, oblique_project, ControlledTransitionModel, DomainVerdict,
};
use crate::reflection::ReflectionField;
use std::io::Write;

/// Affine drift and volatility: `b(x) = b0 + b1 x`, `sigma(x) = s0 + s1 x`.
#[derive(Debug, Clone, Copy)]
pub struct SdeCoefficients {
    pub b0: f64,
    pub b1: f64,
    pub s0: f64,
    pub s1: f64,
    pub x0: f64,
}

impl SdeCoefficients {
    pub fn drift(&self, x: f64) -> f64 {
        self.b0 + self.b1 * x
    }

    pub fn vol(&self, x: f64) -> f64 {
        self.s0 + self.s1 * x
    }
}

/// Quadrature flavour for the transition weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quadrature {
    /// Cell-probability integration of the Euler-step Gaussian.
    Gaussian,
    /// Three-point branch matching mean and variance exactly.
    Trinomial,
}

/// Time/state lattice with per-node transition weights.
#[derive(Debug, Clone)]
pub struct LatticeSpec {
    pub t_horizon: f64,
    pub steps: usize,
    pub grid: Vec<f64>,
    pub x0_index: usize,
    pub dt: f64,
    pub sde: SdeCoefficients,
    pub quadrature: Quadrature,
    /// `weights[m][j]` = probability of moving from node m to node j over
    /// one time step.
    pub weights: Vec<Vec<f64>>,
}

impl LatticeSpec {
    pub fn n_nodes(&self) -> usize {
        self.grid.len()
    }

    /// Conditional expectation of `values` one step ahead from node `m`.
    pub fn expect(&self, m: usize, values: &[f64]) -> f64 {
        self.weights[m]
            .iter()
            .zip(values)
            .filter(|(w, _)| **w != 0.0)
            .map(|(w, v)| w * v)
            .sum()
    }

    /// Quadrature of `values x normalised increment`, the gradient proxy.
    pub fn expect_dw(&self, m: usize, values: &[f64]) -> f64 {
        let x = self.grid[m];
        let b = self.sde.drift(x);
        let sigma = self.sde.vol(x);
        self.weights[m]
            .iter()
            .enumerate()
            .filter(|(_, w)| **w != 0.0)
            .map(|(j, w)| {
                let dw = (self.grid[j] - x - b * self.dt) / sigma;
                w * values[j] * dw
            })
            .sum()
    }
}

/// Build the lattice: a symmetric grid of `grid_points` nodes covering
/// `coverage` standard deviations of the terminal law around `x0`, with
/// Gaussian cell weights or the trinomial branch.
pub fn build_lattice(
    sde: SdeCoefficients,
    t_horizon: f64,
    steps: usize,
    grid_points: usize,
    coverage: f64,
    quadrature: Quadrature,
) -> Result<LatticeSpec, LatticeError> {
    assert!(steps > 0 && grid_points >= 3, "need a nontrivial lattice");
    let dt = t_horizon / steps as f64;
    let sigma0 = sde.vol(sde.x0);
    let half_width = coverage * sigma0.abs() * t_horizon.sqrt();
    let m = grid_points;
    let h = 2.0 * half_width / (m - 1) as f64;
    let grid: Vec<f64> = (0..m).map(|k| sde.x0 - half_width + k as f64 * h).collect();
    let x0_index = m / 2;
    for (node, &x) in grid.iter().enumerate() {
        let sigma = sde.vol(x);
        if sigma <= 1e-12 {
            return Err(LatticeError::DegenerateVolatility { node, sigma });
        }
    }

    let mut weights = vec![vec![0.0; m]; m];
    match quadrature {
        Quadrature::Gaussian => {
            let sigma_min = grid
                .iter()
                .map(|&x| sde.vol(x).abs())
                .fold(f64::INFINITY, f64::min);
            let sigma_dt = sigma_min * dt.sqrt();
            if sigma_dt < h {
                return Err(LatticeError::GridTooCoarse {
                    sigma_dt,
                    spacing: h,
                    suggested: sigma_dt,
                });
            }
            for (i, row) in weights.iter_mut().enumerate() {
                let mean = grid[i] + sde.drift(grid[i]) * dt;
                let sd = sde.vol(grid[i]).abs() * dt.sqrt();
                // Cell boundaries at midpoints; the first and last cells
                // absorb the tails so the row telescopes to one.
                let mut prev_cdf = 0.0;
                for j in 0..m {
                    let upper = if j + 1 == m {
                        1.0
                    } else {
                        normal_cdf((grid[j] + 0.5 * h - mean) / sd)
                    };
                    row[j] = upper - prev_cdf;
                    prev_cdf = upper;
                }
            }
        }
        Quadrature::Trinomial => {
            for (i, row) in weights.iter_mut().enumerate() {
                let b = sde.drift(grid[i]);
                let sigma = sde.vol(grid[i]);
                let second_moment = sigma * sigma * dt + (b * dt) * (b * dt);
                // Jump a whole number of cells; the smallest stride keeping
                // all three branch weights in [0, 1] matches the mean and
                // variance exactly while staying on the shared grid.
                let mut chosen = None;
                for s in 1..m {
                    let step = s as f64 * h;
                    let nu = b * dt / step;
                    let w = second_moment / (step * step);
                    let p_up = 0.5 * (w + nu);
                    let p_down = 0.5 * (w - nu);
                    let p_mid = 1.0 - w;
                    if p_mid >= 0.0 && p_up >= 0.0 && p_down >= 0.0 {
                        chosen = Some((s, p_down, p_mid, p_up));
                        break;
                    }
                }
                let Some((s, p_down, p_mid, p_up)) = chosen else {
                    return Err(LatticeError::TrinomialUnstable {
                        node: i,
                        weight: 1.0 - second_moment / (h * h),
                        suggested: second_moment.sqrt(),
                    });
                };
                let down = i.saturating_sub(s);
                let up = (i + s).min(m - 1);
                row[down] += p_down;
                row[i] += p_mid;
                row[up] += p_up;
            }
        }
    }
    Ok(LatticeSpec {
        t_horizon,
        steps,
        grid,
        x0_index,
        dt,
        sde,
        quadrature,
        weights,
    })
}

/// Per-mode driver `f^i(t, x, y_i, z_i)` and terminal `g^i(x)`.
pub struct Driver {
    f: Box<dyn Fn(f64, f64, usize, f64, f64) -> f64 + Send + Sync>,
    g: Box<dyn Fn(f64, usize) -> f64 + Send + Sync>,
    depends_on_yz: bool,
}

impl std::fmt::Debug for Driver {
    fn fmt(&self, fm: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        fm.debug_struct("Driver")
            .field("depends_on_yz", &self.depends_on_yz)
            .finish()
    }
}

impl Driver {
    pub fn new(
        f: impl Fn(f64, f64, usize, f64, f64) -> f64 + Send + Sync + 'static,
        g: impl Fn(f64, usize) -> f64 + Send + Sync + 'static,
        depends_on_yz: bool,
    ) -> Self {
        Driver {
            f: Box::new(f),
            g: Box::new(g),
            depends_on_yz,
        }
    }

    /// Driver depending only on (t, x, mode).
    pub fn state_only(
        f: impl Fn(f64, f64, usize) -> f64 + Send + Sync + 'static,
        g: impl Fn(f64, usize) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Driver::new(move |t, x, i, _, _| f(t, x, i), g, false)
    }

    pub fn depends_on_yz(&self) -> bool {
        self.depends_on_yz
    }

    pub fn f(&self, t: f64, x: f64, i: usize, y: f64, z: f64) -> f64 {
        (self.f)(t, x, i, y, z)
    }

    pub fn g(&self, x: f64, i: usize) -> f64 {
        (self.g)(x, i)
    }

    /// Crude Lipschitz estimate in (y, z) by finite differencing over the
    /// lattice range; zero when the driver ignores (y, z).
    pub fn lipschitz_estimate(&self, lattice: &LatticeSpec, modes: usize) -> f64 {
        if !self.depends_on_yz {
            return 0.0;
        }
        let mut lip = 0.0f64;
        let delta = 1e-4;
        let probes_x = [
            lattice.grid[0],
            lattice.grid[lattice.x0_index],
            lattice.grid[lattice.n_nodes() - 1],
        ];
        for &x in &probes_x {
            for i in 0..modes {
                for &t in &[0.0, lattice.t_horizon * 0.5, lattice.t_horizon] {
                    for &y in &[-1.0, 0.0, 1.0] {
                        for &z in &[-1.0, 0.0, 1.0] {
                            let base = self.f(t, x, i, y, z);
                            let dy = (self.f(t, x, i, y + delta, z) - base).abs() / delta;
                            let dz = (self.f(t, x, i, y, z + delta) - base).abs() / delta;
                            lip = lip.max(dy + dz);
                        }
                    }
                }
            }
        }
        lip
    }
}

/// Diagnostics carried by a lattice solution.
#[derive(Debug, Clone, Default)]
pub struct SolveDiagnostics {
    /// Worst membership violation across nodes (0 when every node is inside).
    pub membership_defect: f64,
    /// Complementarity defect: reflection mass placed on slack constraints.
    pub skorokhod_defect: f64,
    /// Largest Picard iteration count used at a node.
    pub picard_iters: usize,
    /// Sup distance between the raw terminal data and its projection.
    pub terminal_projection_defect: f64,
    /// Max residual of `Kinc ~ -dt H(Y) Psi` over the field's cone, when a
    /// reflection field was supplied.
    pub h_decomposition_defect: Option<f64>,
    /// Constant shift added to the value field when signed costs forced the
    /// positive-cost translation.
    pub applied_shift: Option<Vec<f64>>,
}

/// Value field, gradient proxy, and reflection increments on the lattice.
#[derive(Debug, Clone)]
pub struct LatticeSolution {
    /// `y[k][m][i]` for k = 0..=steps.
    pub y: Vec<Vec<Vec<f64>>>,
    /// `z[k][m][i]` for k = 0..steps.
    pub z: Vec<Vec<Vec<f64>>>,
    /// Projection increments applied at layer k = 0..steps.
    pub k_inc: Vec<Vec<Vec<f64>>>,
    pub diagnostics: SolveDiagnostics,
}

impl LatticeSolution {
    pub fn modes(&self) -> usize {
        self.y[0][0].len()
    }

    /// CSV export with columns (k, t, m, x, i, Y, Z, Kinc); Z and Kinc are
    /// empty at the terminal layer.
    pub fn write_csv<W: Write>(&self, lattice: &LatticeSpec, mut out: W) -> std::io::Result<()> {
        writeln!(out, "k,t,m,x,i,y,z,k_inc")?;
        for (k, layer) in self.y.iter().enumerate() {
            let t = k as f64 * lattice.dt;
            for (m, node) in layer.iter().enumerate() {
                for (i, y) in node.iter().enumerate() {
                    let (z, kinc) = if k < self.z.len() {
                        (
                            format!("{:.16e}", self.z[k][m][i]),
                            format!("{:.16e}", self.k_inc[k][m][i]),
                        )
                    } else {
                        (String::new(), String::new())
                    };
                    writeln!(
                        out,
                        "{k},{t:.16e},{m},{x:.16e},{i},{y:.16e},{z},{kinc}",
                        x = lattice.grid[m],
                        y = y
                    )?;
                }
            }
        }
        Ok(())
    }
}

/// Constraint-activity tolerance used by the complementarity diagnostic.
const ACTIVE_SLACK_TOL: f64 = 1e-9;

/// Solve the reflected system backward on the lattice.
///
/// Terminal data is obliquely projected onto the domain; each backward step
/// takes the conditional expectation, the Brownian-increment quadrature for
/// the gradient proxy, a Picard pass for the driver, and the oblique
/// projection whose increment is the reflection mass. Signed costs trigger
/// the positive-cost translation anchored at the maximal-slack interior
/// point, and the value field is shifted back on return.
///
/// The gradient proxy converges one half-order slower than the values, so
/// drivers with strong z-dependence see O(sqrt(dt)) accuracy there; the
/// refinement study quantifies it per instance.
pub fn solve(
    model: &ControlledTransitionModel,
    lattice: &LatticeSpec,
    driver: &Driver,
    field: Option<&ReflectionField>,
) -> Result<LatticeSolution, LatticeError> {
    let report = nonemptiness_report(model);
    if report.verdict == DomainVerdict::Empty {
        return Err(LatticeError::Geometry(
            crate::error::GeometryError::EmptyDomain,
        ));
    }
    let d = model.d();

    // Picard contraction requires L dt < 1.
    let lip = driver.lipschitz_estimate(lattice, d);
    if lip * lattice.dt >= 1.0 {
        return Err(LatticeError::NotContracting {
            l_dt: lip * lattice.dt,
            max_dt: 0.5 / lip,
        });
    }

    if model.c_hat() <= 0.0 {
        // Positive-cost translation; the anchor has strictly positive slack.
        if report.verdict != DomainVerdict::NonemptyInterior {
            return Err(LatticeError::NoInteriorAnchor {
                c_hat: model.c_hat(),
            });
        }
        let y0 = report.anchor.ok_or(LatticeError::NoInteriorAnchor {
            c_hat: model.c_hat(),
        })?;
        let shifted = model
            .shift_to_positive_costs(&y0)
            .map_err(LatticeError::Geometry)?;
        let shift_f = y0.clone();
        let shift_g = y0.clone();
        let f = |t: f64, x: f64, i: usize, y: f64, z: f64| driver.f(t, x, i, y + shift_f[i], z);
        let g = |x: f64, i: usize| driver.g(x, i) - shift_g[i];
        let mut sol = solve_core(&shifted, lattice, &f, &g, field)?;
        for layer in &mut sol.y {
            for node in layer.iter_mut() {
                for (i, v) in node.iter_mut().enumerate() {
                    *v += y0[i];
                }
            }
        }
        sol.diagnostics.applied_shift = Some(y0);
        return Ok(sol);
    }

    let f = |t: f64, x: f64, i: usize, y: f64, z: f64| driver.f(t, x, i, y, z);
    let g = |x: f64, i: usize| driver.g(x, i);
    solve_core(model, lattice, &f, &g, field)
}

/// Backward sweep proper; the caller has already handled emptiness,
/// contraction, and the positive-cost translation.
fn solve_core(
    model: &ControlledTransitionModel,
    lattice: &LatticeSpec,
    driver_f: &dyn Fn(f64, f64, usize, f64, f64) -> f64,
    terminal_g: &dyn Fn(f64, usize) -> f64,
    field: Option<&ReflectionField>,
) -> Result<LatticeSolution, LatticeError> {
    let d = model.d();
    let n_steps = lattice.steps;
    let m_nodes = lattice.n_nodes();
    let mut diags = SolveDiagnostics::default();

    // Terminal layer.
    let mut terminal = Vec::with_capacity(m_nodes);
    for m in 0..m_nodes {
        let raw: Vec<f64> = (0..d).map(|i| terminal_g(lattice.grid[m], i)).collect();
        let proj = oblique_project(&raw, model).map_err(LatticeError::Geometry)?;
        let defect = raw
            .iter()
            .zip(&proj)
            .map(|(a, b)| (b - a).abs())
            .fold(0.0f64, f64::max);
        diags.terminal_projection_defect = diags.terminal_projection_defect.max(defect);
        terminal.push(proj);
    }

    let mut y_layers = vec![vec![vec![0.0; d]; m_nodes]; n_steps + 1];
    let mut z_layers = vec![vec![vec![0.0; d]; m_nodes]; n_steps];
    let mut k_layers = vec![vec![vec![0.0; d]; m_nodes]; n_steps];
    y_layers[n_steps] = terminal;

    let mut membership_worst = 0.0f64;
    let mut skorokhod = 0.0f64;
    let mut h_defect = 0.0f64;

    for k in (0..n_steps).rev() {
        let t = k as f64 * lattice.dt;
        let next: Vec<Vec<f64>> = y_layers[k + 1].clone();
        let next_mode: Vec<Vec<f64>> = (0..d)
            .map(|i| next.iter().map(|node| node[i]).collect())
            .collect();
        for m in 0..m_nodes {
            let x = lattice.grid[m];
            let expectation: Vec<f64> = (0..d).map(|i| lattice.expect(m, &next_mode[i])).collect();
            let z: Vec<f64> = (0..d)
                .map(|i| lattice.expect_dw(m, &next_mode[i]) / lattice.dt)
                .collect();

            // Picard fixed point for the driver contribution.
            let mut y_tilde = expectation.clone();
            let mut iters = 0;
            for it in 0..50 {
                iters = it + 1;
                let mut delta = 0.0f64;
                for i in 0..d {
                    let updated = expectation[i] + lattice.dt * driver_f(t, x, i, y_tilde[i], z[i]);
                    delta = delta.max((updated - y_tilde[i]).abs());
                    y_tilde[i] = updated;
                }
                if delta < 1e-12 {
                    break;
                }
            }
            diags.picard_iters = diags.picard_iters.max(iters);

            let projected = oblique_project(&y_tilde, model).map_err(LatticeError::Geometry)?;
            let (_, slack) = model.membership(&projected, 0.0);
            membership_worst = membership_worst.max((-slack).max(0.0));
            for i in 0..d {
                let inc = projected[i] - y_tilde[i];
                k_layers[k][m][i] = inc;
                let own_slack = projected[i] - model.obstacle(&projected, i);
                skorokhod += inc * (own_slack - ACTIVE_SLACK_TOL).max(0.0);
            }
            if let Some(fld) = field {
                h_defect = h_defect.max(h_decomposition_residual(
                    fld,
                    model,
                    &projected,
                    &k_layers[k][m],
                    lattice.dt,
                ));
            }
            z_layers[k][m] = z;
            y_layers[k][m] = projected;
        }
    }
    diags.membership_defect = membership_worst;
    diags.skorokhod_defect = skorokhod;
    diags.h_decomposition_defect = field.map(|_| h_defect);

    Ok(LatticeSolution {
        y: y_layers,
        z: z_layers,
        k_inc: k_layers,
        diagnostics: diags,
    })
}

/// Least-squares residual of matching the reflection increment with
/// `-dt H(y) (sum_j alpha_j n_j)`, `alpha >= 0`, over the active normals.
fn h_decomposition_residual(
    field: &ReflectionField,
    model: &ControlledTransitionModel,
    y: &[f64],
    k_inc: &[f64],
    dt: f64,
) -> f64 {
    let d = model.d();
    let norm: f64 = k_inc.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm < 1e-14 {
        return 0.0;
    }
    let active: Vec<usize> = (0..d)
        .filter(|&i| y[i] - model.obstacle(y, i) <= ACTIVE_SLACK_TOL)
        .collect();
    if active.is_empty() {
        return norm;
    }
    let h = field.evaluate(y);
    // Columns: -dt * H n_j over active constraints.
    let support: Vec<usize> = (0..d).filter(|i| !active.contains(i)).collect();
    let generators = crate::geometry::normal_generators(model, &support);
    let cols: Vec<Vec<f64>> = generators
        .iter()
        .map(|(_, n)| h.matvec(n).iter().map(|v| -dt * v).collect())
        .collect();
    // Nonnegative least squares, one clamping pass: solve the normal
    // equations, zero out negative coefficients, re-solve on the rest.
    let solve_subset = |subset: &[usize]| -> Option<(Vec<f64>, f64)> {
        let k = subset.len();
        if k == 0 {
            return None;
        }
        let mut gram = crate::linalg::Mat::zeros(k, k);
        let mut rhs = vec![0.0; k];
        for (a, &ca) in subset.iter().enumerate() {
            for (b, &cb) in subset.iter().enumerate() {
                gram[(a, b)] = crate::linalg::dot(&cols[ca], &cols[cb]);
            }
            rhs[a] = crate::linalg::dot(&cols[ca], k_inc);
        }
        let alpha = gram.solve(&rhs).ok()?;
        let mut resid = k_inc.to_vec();
        for (a, &ca) in subset.iter().enumerate() {
            for i in 0..d {
                resid[i] -= alpha[a] * cols[ca][i];
            }
        }
        Some((alpha, resid.iter().map(|v| v * v).sum::<f64>().sqrt()))
    };
    let all: Vec<usize> = (0..cols.len()).collect();
    match solve_subset(&all) {
        Some((alpha, resid)) => {
            if alpha.iter().all(|&a| a >= -1e-12) {
                resid
            } else {
                let keep: Vec<usize> = all.into_iter().filter(|&i| alpha[i] > 0.0).collect();
                solve_subset(&keep).map(|(_, r)| r).unwrap_or(norm)
            }
        }
        None => norm,
    }
}

/// One refinement level of the convergence study.
#[derive(Debug, Clone)]
pub struct RefinementLevel {
    pub steps: usize,
    pub grid_points: usize,
    /// Sup-norm difference at the initial layer against the next-finer
    /// level, on the common nodes (None for the finest level).
    pub diff_to_next: Option<f64>,
}

/// Convergence table across nested lattice refinements.
#[derive(Debug, Clone)]
pub struct ConvergenceTable {
    pub levels: Vec<RefinementLevel>,
    /// log2 ratios of successive differences; present when differences are
    /// monotone decreasing.
    pub empirical_order: Option<f64>,
    pub monotone: bool,
}

/// Solve on a dyadically nested family of lattices and report successive
/// initial-layer differences and the empirical convergence order.
#[allow(clippy::too_many_arguments)]
pub fn refine_and_extrapolate(
    model: &ControlledTransitionModel,
    sde: SdeCoefficients,
    t_horizon: f64,
    base_steps: usize,
    base_grid_points: usize,
    coverage: f64,
    quadrature: Quadrature,
    driver: &Driver,
    levels: usize,
) -> Result<ConvergenceTable, LatticeError> {
    if levels < 3 {
        return Err(LatticeError::TooFewResolutions(levels));
    }
    let mut solutions = Vec::with_capacity(levels);
    let mut specs = Vec::with_capacity(levels);
    for level in 0..levels {
        let factor = 1usize << level;
        let steps = base_steps * factor;
        let grid_points = (base_grid_points - 1) * factor + 1;
        let lattice = build_lattice(sde, t_horizon, steps, grid_points, coverage, quadrature)?;
        let sol = solve(model, &lattice, driver, None)?;
        solutions.push(sol);
        specs.push((steps, grid_points, factor));
    }
    let d = model.d();
    let mut diffs = Vec::new();
    for level in 0..levels - 1 {
        let coarse = &solutions[level];
        let fine = &solutions[level + 1];
        let coarse_nodes = specs[level].1;
        let mut sup = 0.0f64;
        for m in 0..coarse_nodes {
            let fine_m = 2 * m; // nested dyadic grids share every other node
            for i in 0..d {
                sup = sup.max((coarse.y[0][m][i] - fine.y[0][fine_m][i]).abs());
            }
        }
        diffs.push(sup);
    }
    let monotone = diffs.windows(2).all(|w| w[1] <= w[0] + 1e-15);
    let empirical_order = if monotone && diffs.len() >= 2 && diffs[diffs.len() - 1] > 0.0 {
        let ratios: Vec<f64> = diffs
            .windows(2)
            .filter(|w| w[1] > 0.0)
            .map(|w| (w[0] / w[1]).log2())
            .collect();
        if ratios.is_empty() {
            None
        } else {
            Some(ratios.iter().sum::<f64>() / ratios.len() as f64)
        }
    } else {
        None
    };
    let table_levels: Vec<RefinementLevel> = specs
        .iter()
        .enumerate()
        .map(|(level, &(steps, grid_points, _))| RefinementLevel {
            steps,
            grid_points,
            diff_to_next: diffs.get(level).copied(),
        })
        .collect();
    Ok(ConvergenceTable {
        levels: table_levels,
        empirical_order,
        monotone,
    })
}

/// Standard normal CDF accurate to roughly 1e-14.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Complementary error function: Taylor series near the origin, Lentz
/// continued fraction in the tail.
pub fn erfc(x: f64) -> f64 {
    if x < 0.0 {
        return 2.0 - erfc(-x);
    }
    if x < 2.5 {
        1.0 - erf_series(x)
    } else {
        erfc_continued_fraction(x)
    }
}

pub fn erf(x: f64) -> f64 {
    1.0 - erfc(x)
}

fn erf_series(x: f64) -> f64 {
    // erf(x) = 2/sqrt(pi) * sum (-1)^n x^(2n+1) / (n! (2n+1))
    let mut term = x;
    let mut sum = x;
    let x2 = x * x;
    for n in 1..200 {
        term *= -x2 / n as f64;
        let add = term / (2 * n + 1) as f64;
        sum += add;
        if add.abs() < 1e-18 * sum.abs().max(1e-18) {
            break;
        }
    }
    sum * 2.0 / std::f64::consts::PI.sqrt()
}

fn erfc_continued_fraction(x: f64) -> f64 {
    // erfc(x) = exp(-x^2)/sqrt(pi) * 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
    let tiny = 1e-300;
    let mut f = x.max(tiny);
    let mut c = f;
    let mut d = 0.0;
    for k in 1..200 {
        let a = k as f64 / 2.0;
        // Continued-fraction step with coefficients (a_k = k/2, b_k = x).
        d = x + a * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = x + a / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (-x * x).exp() / std::f64::consts::PI.sqrt() / f
}
