//! Strategy simulation and the dynamic-programming oracle.
//!
//! Strategies pick switching times and controls; the landed mode is drawn
//! through the inverse CDF of the chosen control's transition row, exactly
//! the randomisation map of the model. Rewards are accumulated running
//! profits plus terminal payoff minus switching costs, estimated by Monte
//! Carlo over lattice paths whose law matches the solver's quadrature
//! weights node for node. The threshold strategy reads a solved value field
//! and switches at the first grid time the current mode's value touches its
//! obstacle, choosing the smallest maximising control. An independently
//! coded backward recursion (Jacobi iteration to the switching fixed point,
//! no shared projection code) serves as the exact oracle at desk scale.

use crate::error::SimulationError;
use crate::geometry::ControlledTransitionModel;
use crate::lattice::{Driver, LatticeSolution, LatticeSpec};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::io::Write;

/// Default per-grid-time cap on instantaneous re-switching.
pub fn default_per_time_cap(model: &ControlledTransitionModel) -> usize {
    model.d() * model.n_controls()
}

/// What a strategy does at each grid time.
#[derive(Debug, Clone)]
pub enum StrategySpec {
    /// Stay in the starting mode forever.
    NeverSwitch,
    /// Switch at the listed (time index, control index) pairs.
    FixedSchedule { switches: Vec<(usize, usize)> },
    /// At each grid time, switch with the given probability using a
    /// uniformly drawn control.
    RandomizedBaseline { switch_prob: f64 },
    /// Switch whenever the solved value of the current mode sits on its
    /// obstacle (within `tol`), using the smallest maximising control.
    Threshold { tol: f64 },
}

/// One simulated path of modes, switches, and costs.
#[derive(Debug, Clone)]
pub struct StrategyTrace {
    /// Mode sequence: start mode followed by each post-switch mode.
    pub zeta: Vec<usize>,
    /// Grid-time index of each switch.
    pub tau: Vec<usize>,
    /// Control index drawn at each switch.
    pub alpha: Vec<usize>,
    /// Uniform draw realising each switch.
    pub uniforms: Vec<f64>,
    /// Mode held over [t_k, t_{k+1}) for each grid step (after time-k
    /// switches), plus the terminal mode.
    pub mode_path: Vec<usize>,
    /// Cumulative switching cost after time-k decisions.
    pub cost_path: Vec<f64>,
    /// Cumulative switch count after time-k decisions.
    pub switch_path: Vec<usize>,
    pub total_cost: f64,
    pub switches: usize,
    /// Set when the global switch cap cut the strategy short.
    pub truncated: bool,
}

impl StrategyTrace {
    /// CSV dump, one row per switch event; the per-event cost is the mean
    /// cost of the departed mode under the drawn control.
    pub fn write_csv<W: Write>(
        &self,
        model: &ControlledTransitionModel,
        lattice: &LatticeSpec,
        mut out: W,
    ) -> std::io::Result<()> {
        writeln!(out, "k,t,mode,control,uniform,cost,cum_cost,switches")?;
        let mut cum = 0.0;
        for s in 0..self.tau.len() {
            let k = self.tau[s];
            let cost = model.cbar[self.alpha[s]][self.zeta[s]];
            cum += cost;
            writeln!(
                out,
                "{k},{t:.16e},{mode},{control},{u:.16e},{cost:.16e},{cum:.16e},{n}",
                t = k as f64 * lattice.dt,
                mode = self.zeta[s + 1],
                control = self.alpha[s],
                u = self.uniforms[s],
                n = s + 1
            )?;
        }
        Ok(())
    }
}

/// Monte Carlo estimate of a strategy's reward.
#[derive(Debug, Clone)]
pub struct RewardEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub paths: usize,
    pub seed: u64,
}

/// Monte Carlo configuration.
#[derive(Debug, Clone)]
pub struct EvalConfig {
    pub paths: usize,
    pub seed: u64,
    pub antithetic: bool,
    /// Global admissibility cap on the number of switches per path.
    pub max_switches: usize,
    /// Worker threads; per-path seeds make any schedule reproducible and
    /// chunk results merge in index order.
    pub threads: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            paths: 10_000,
            seed: 0,
            antithetic: false,
            max_switches: 10_000,
            threads: 1,
        }
    }
}

/// Derive a per-path seed; reproducible under any execution order.
pub fn path_seed(seed: u64, index: u64) -> u64 {
    let mut x = seed ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    x ^= x >> 30;
    x = x.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x ^= x >> 27;
    x = x.wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^= x >> 31;
    x
}

/// Draw a lattice path of node indices (length steps + 1) from the
/// transition weights.
pub fn sample_x_path(lattice: &LatticeSpec, rng: &mut impl Rng) -> Vec<usize> {
    let mut path = Vec::with_capacity(lattice.steps + 1);
    let mut m = lattice.x0_index;
    path.push(m);
    for _ in 0..lattice.steps {
        let u: f64 = rng.random();
        let row = &lattice.weights[m];
        let mut acc = 0.0;
        let mut next = row.len() - 1;
        for (j, w) in row.iter().enumerate() {
            acc += w;
            if u <= acc {
                next = j;
                break;
            }
        }
        m = next;
        path.push(m);
    }
    path
}

/// Inverse-CDF draw of the next mode from the chosen control's row.
fn draw_mode(model: &ControlledTransitionModel, control: usize, from: usize, u: f64) -> usize {
    let row = model.p[control].row(from);
    let mut acc = 0.0;
    let mut next = row.len() - 1;
    for (j, w) in row.iter().enumerate() {
        acc += w;
        if u <= acc {
            next = j;
            break;
        }
    }
    next
}

/// Simulate one strategy trace along a fixed lattice path. Deterministic in
/// (seed, strategy, path).
#[allow(clippy::too_many_arguments)]
pub fn sample_trace(
    model: &ControlledTransitionModel,
    lattice: &LatticeSpec,
    strategy: &StrategySpec,
    solution: Option<&LatticeSolution>,
    x_path: &[usize],
    start_mode: usize,
    seed: u64,
    max_switches: usize,
) -> Result<StrategyTrace, SimulationError> {
    if x_path.len() != lattice.steps + 1 {
        return Err(SimulationError::MismatchedSolution(format!(
            "path length {} != steps + 1 = {}",
            x_path.len(),
            lattice.steps + 1
        )));
    }
    if let StrategySpec::Threshold { .. } = strategy {
        let sol = solution.ok_or_else(|| {
            SimulationError::MismatchedSolution("threshold strategy needs a solved lattice".into())
        })?;
        check_solution(model, lattice, sol)?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let per_time_cap = default_per_time_cap(model);

    let mut trace = StrategyTrace {
        zeta: vec![start_mode],
        tau: Vec::new(),
        alpha: Vec::new(),
        uniforms: Vec::new(),
        mode_path: Vec::with_capacity(lattice.steps + 1),
        cost_path: Vec::with_capacity(lattice.steps + 1),
        switch_path: Vec::with_capacity(lattice.steps + 1),
        total_cost: 0.0,
        switches: 0,
        truncated: false,
    };

    let mut mode = start_mode;
    let mut cum_cost = 0.0;
    let mut count = 0usize;

    for k in 0..=lattice.steps {
        let m = x_path[k];
        let mut same_time = 0usize;
        loop {
            if count >= max_switches {
                trace.truncated = true;
                break;
            }
            if same_time >= per_time_cap {
                break;
            }
            let decision: Option<usize> = match strategy {
                StrategySpec::NeverSwitch => None,
                StrategySpec::FixedSchedule { switches } => {
                    // One scheduled switch per listed (time, control) pair.
                    let executed = trace.tau.iter().filter(|&&t| t == k).count();
                    switches
                        .iter()
                        .filter(|(t, _)| *t == k)
                        .nth(executed)
                        .map(|(_, u)| *u)
                }
                StrategySpec::RandomizedBaseline { switch_prob } => {
                    if same_time > 0 {
                        None
                    } else {
                        let flip: f64 = rng.random();
                        if flip < *switch_prob {
                            Some(rng.random_range(0..model.n_controls()))
                        } else {
                            None
                        }
                    }
                }
                StrategySpec::Threshold { tol } => {
                    let sol = solution.expect("checked above");
                    let values = &sol.y[k][m];
                    // Contact is detected with the model's obstacle (the
                    // exact closed form when enabled, matching the solved
                    // field); the drawn control is the smallest grid
                    // maximiser.
                    let obstacle = model.obstacle(values, mode);
                    if values[mode] <= obstacle + tol {
                        let (u_star, _) = model.argmax_control(values, mode);
                        Some(u_star)
                    } else {
                        None
                    }
                }
            };
            let Some(control) = decision else { break };
            let u: f64 = rng.random();
            let next = draw_mode(model, control, mode, u);
            cum_cost += model.cbar[control][mode];
            count += 1;
            same_time += 1;
            trace.tau.push(k);
            trace.alpha.push(control);
            trace.uniforms.push(u);
            trace.zeta.push(next);
            mode = next;
        }
        trace.mode_path.push(mode);
        trace.cost_path.push(cum_cost);
        trace.switch_path.push(count);
        if trace.truncated {
            // Freeze the remaining path in the current mode.
            for _ in k + 1..=lattice.steps {
                trace.mode_path.push(mode);
                trace.cost_path.push(cum_cost);
                trace.switch_path.push(count);
            }
            break;
        }
    }
    trace.total_cost = cum_cost;
    trace.switches = count;
    Ok(trace)
}

fn check_solution(
    model: &ControlledTransitionModel,
    lattice: &LatticeSpec,
    sol: &LatticeSolution,
) -> Result<(), SimulationError> {
    if sol.y.len() != lattice.steps + 1 {
        return Err(SimulationError::MismatchedSolution(format!(
            "{} layers vs {} steps",
            sol.y.len(),
            lattice.steps
        )));
    }
    if sol.y[0].len() != lattice.n_nodes() {
        return Err(SimulationError::MismatchedSolution(format!(
            "{} nodes vs {}",
            sol.y[0].len(),
            lattice.n_nodes()
        )));
    }
    if sol.modes() != model.d() {
        return Err(SimulationError::MismatchedSolution(format!(
            "{} modes vs {}",
            sol.modes(),
            model.d()
        )));
    }
    Ok(())
}

/// The threshold strategy read off a solved lattice, after a compatibility
/// check.
pub fn optimal_strategy(
    solution: &LatticeSolution,
    model: &ControlledTransitionModel,
    lattice: &LatticeSpec,
) -> Result<StrategySpec, SimulationError> {
    check_solution(model, lattice, solution)?;
    Ok(StrategySpec::Threshold { tol: 1e-9 })
}

/// Uniform-flipping RNG wrapper for antithetic pairs.
struct Antithetic<R: RngCore>(R);

impl<R: RngCore> RngCore for Antithetic<R> {
    fn next_u32(&mut self) -> u32 {
        !self.0.next_u32()
    }
    fn next_u64(&mut self) -> u64 {
        !self.0.next_u64()
    }
    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.0.fill_bytes(dest);
        for b in dest.iter_mut() {
            *b = !*b;
        }
    }
}

/// Monte Carlo reward of a strategy started in `start_mode` at time zero:
/// the left-endpoint running-profit sum plus terminal payoff minus the
/// accumulated switching costs.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_strategy(
    model: &ControlledTransitionModel,
    lattice: &LatticeSpec,
    driver: &Driver,
    strategy: &StrategySpec,
    solution: Option<&LatticeSolution>,
    start_mode: usize,
    cfg: &EvalConfig,
) -> Result<RewardEstimate, SimulationError> {
    if driver.depends_on_yz() {
        return Err(SimulationError::DriverDependsOnYz);
    }
    let reward_of = |x_path: &[usize], trace: &StrategyTrace| -> f64 {
        let mut total = 0.0;
        for k in 0..lattice.steps {
            let t = k as f64 * lattice.dt;
            let x = lattice.grid[x_path[k]];
            total += lattice.dt * driver.f(t, x, trace.mode_path[k], 0.0, 0.0);
        }
        let x_t = lattice.grid[x_path[lattice.steps]];
        total += driver.g(x_t, trace.mode_path[lattice.steps]);
        total - trace.total_cost
    };

    let run_one = |path_index: u64, flip: bool| -> Result<f64, SimulationError> {
        let s = path_seed(cfg.seed, path_index);
        let x_path = if flip {
            let mut rng = Antithetic(ChaCha8Rng::seed_from_u64(s));
            sample_x_path(lattice, &mut rng)
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            sample_x_path(lattice, &mut rng)
        };
        // The trace consumes an independent stream derived from the same
        // path seed.
        let trace_seed = path_seed(s, u64::MAX);
        let trace = sample_trace(
            model,
            lattice,
            strategy,
            solution,
            &x_path,
            start_mode,
            trace_seed,
            cfg.max_switches,
        )?;
        Ok(reward_of(&x_path, &trace))
    };

    let n = if cfg.antithetic {
        cfg.paths / 2
    } else {
        cfg.paths
    };
    let run_range = |lo: usize, hi: usize| -> Result<(f64, f64), SimulationError> {
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for p in lo..hi {
            let r = if cfg.antithetic {
                0.5 * (run_one(p as u64, false)? + run_one(p as u64, true)?)
            } else {
                run_one(p as u64, false)?
            };
            sum += r;
            sum_sq += r * r;
        }
        Ok((sum, sum_sq))
    };

    let workers = cfg.threads.max(1).min(n.max(1));
    let (sum, sum_sq) = if workers <= 1 {
        run_range(0, n)?
    } else {
        let chunk = n.div_ceil(workers);
        let partials: Vec<Result<(f64, f64), SimulationError>> = std::thread::scope(|scope| {
            let handles: Vec<_> = (0..workers)
                .map(|w| {
                    let lo = w * chunk;
                    let hi = ((w + 1) * chunk).min(n);
                    let run_range = &run_range;
                    scope.spawn(move || run_range(lo, hi))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("worker panicked"))
                .collect()
        });
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for partial in partials {
            let (s, ss) = partial?;
            sum += s;
            sum_sq += ss;
        }
        (sum, sum_sq)
    };

    let count = n.max(1);
    let mean = sum / count as f64;
    let var = (sum_sq / count as f64 - mean * mean).max(0.0);
    Ok(RewardEstimate {
        mean,
        std_error: (var / count as f64).sqrt(),
        paths: cfg.paths,
        seed: cfg.seed,
    })
}

/// Exact backward value field by an independent code path: conditional
/// expectations against the lattice weights and a Jacobi iteration to the
/// per-node switching fixed point, with the obstacle maximum written out
/// inline.
pub fn dp_oracle(
    model: &ControlledTransitionModel,
    lattice: &LatticeSpec,
    driver: &Driver,
) -> Result<Vec<Vec<Vec<f64>>>, SimulationError> {
    if driver.depends_on_yz() {
        return Err(SimulationError::DriverDependsOnYz);
    }
    let d = model.d();
    let n_nodes = lattice.n_nodes();
    let controls = model.n_controls();

    // Jacobi sweep: lift every component to the best switch value computed
    // from the previous iterate, until stable.
    let fixed_point = |w: &[f64]| -> Result<Vec<f64>, SimulationError> {
        let mut v = w.to_vec();
        for _ in 0..200_000 {
            let mut delta = 0.0f64;
            let old = v.clone();
            for i in 0..d {
                let mut best = f64::NEG_INFINITY;
                for u in 0..controls {
                    let mut s = 0.0;
                    for j in 0..d {
                        s += model.p[u].entry(i, j) * old[j];
                    }
                    s -= model.cbar[u][i];
                    if s > best {
                        best = s;
                    }
                }
                if best > v[i] {
                    delta = delta.max(best - v[i]);
                    v[i] = best;
                }
            }
            if delta < 1e-13 {
                return Ok(v);
            }
        }
        Err(SimulationError::Lattice(
            crate::error::LatticeError::Geometry(crate::error::GeometryError::ProjectionStalled {
                sweeps: 200_000,
                residual: f64::NAN,
            }),
        ))
    };

    let mut values = vec![vec![vec![0.0; d]; n_nodes]; lattice.steps + 1];
    for m in 0..n_nodes {
        let raw: Vec<f64> = (0..d).map(|i| driver.g(lattice.grid[m], i)).collect();
        values[lattice.steps][m] = fixed_point(&raw)?;
    }
    for k in (0..lattice.steps).rev() {
        let t = k as f64 * lattice.dt;
        for m in 0..n_nodes {
            let x = lattice.grid[m];
            let mut w = vec![0.0; d];
            for (i, wi) in w.iter_mut().enumerate() {
                let mut e = 0.0;
                for (j, weight) in lattice.weights[m].iter().enumerate() {
                    if *weight != 0.0 {
                        e += weight * values[k + 1][j][i];
                    }
                }
                *wi = e + lattice.dt * driver.f(t, x, i, 0.0, 0.0);
            }
            values[k][m] = fixed_point(&w)?;
        }
    }
    Ok(values)
}

/// Outcome of checking one starting mode.
#[derive(Debug, Clone)]
pub struct ModeCheck {
    pub mode: usize,
    pub lattice_value: f64,
    pub optimal: RewardEstimate,
    pub optimal_ok: bool,
    /// (description, estimate, within bound) per baseline strategy.
    pub baselines: Vec<(String, RewardEstimate, bool)>,
}

/// Representation report: the threshold strategy attains the solved value
/// and no baseline beats it beyond Monte Carlo noise.
#[derive(Debug, Clone)]
pub struct RepresentationReport {
    pub modes: Vec<ModeCheck>,
    pub all_pass: bool,
}

/// Verify the control representation: for every starting mode, the
/// threshold strategy's Monte Carlo value must sit within three standard
/// errors of the solved lattice value, and each randomized baseline must
/// not exceed it by more than three standard errors.
pub fn verify_representation(
    model: &ControlledTransitionModel,
    lattice: &LatticeSpec,
    driver: &Driver,
    solution: &LatticeSolution,
    n_baselines: usize,
    cfg: &EvalConfig,
) -> Result<RepresentationReport, SimulationError> {
    let strategy = optimal_strategy(solution, model, lattice)?;
    let mut modes = Vec::with_capacity(model.d());
    let mut all_pass = true;
    for mode in 0..model.d() {
        let lattice_value = solution.y[0][lattice.x0_index][mode];
        let optimal =
            evaluate_strategy(model, lattice, driver, &strategy, Some(solution), mode, cfg)?;
        let optimal_ok = (optimal.mean - lattice_value).abs() <= 3.0 * optimal.std_error + 1e-9;
        all_pass &= optimal_ok;

        let mut baselines = Vec::new();
        {
            let est = evaluate_strategy(
                model,
                lattice,
                driver,
                &StrategySpec::NeverSwitch,
                None,
                mode,
                &EvalConfig {
                    seed: path_seed(cfg.seed, 7_777),
                    ..cfg.clone()
                },
            )?;
            let ok = est.mean <= lattice_value + 3.0 * est.std_error + 1e-9;
            all_pass &= ok;
            baselines.push(("never-switch".to_string(), est, ok));
        }
        for b in 0..n_baselines {
            let prob = 0.05 + 0.9 * (b as f64 + 0.5) / n_baselines as f64;
            let est = evaluate_strategy(
                model,
                lattice,
                driver,
                &StrategySpec::RandomizedBaseline { switch_prob: prob },
                None,
                mode,
                &EvalConfig {
                    seed: path_seed(cfg.seed, 1_000 + b as u64),
                    ..cfg.clone()
                },
            )?;
            let ok = est.mean <= lattice_value + 3.0 * est.std_error + 1e-9;
            all_pass &= ok;
            baselines.push((format!("randomized p={prob:.3}"), est, ok));
        }
        modes.push(ModeCheck {
            mode,
            lattice_value,
            optimal,
            optimal_ok,
            baselines,
        });
    }
    Ok(RepresentationReport { modes, all_pass })
}
