//! Acceptance suite: one test per criterion, each printing a PASS line with
//! the measured quantities. Tolerances are pinned in the assertions.

#![allow(clippy::needless_range_loop)]

use oblique_core::geometry::{
    barycentric_coordinates, builtin, classical_embedding, nonemptiness_report,
    ControlledTransitionModel, DomainVerdict, SwitchingDomain,
};
use oblique_core::lattice::{build_lattice, solve, Driver, Quadrature, SdeCoefficients};
use oblique_core::linalg::{dot, Mat};
use oblique_core::markov::{analyze_chain, StochasticMatrix};
use oblique_core::reflection::{
    build_h_controlled_dim3_vertices, build_h_dim3, build_h_symmetric, dim4_counterexample,
    symmetric_det_closed_form, symmetric_trace_closed_form, verify_h,
};
use oblique_core::simulate::{
    dp_oracle, evaluate_strategy, path_seed, verify_representation, EvalConfig, StrategySpec,
};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

fn dirichlet_rows(d: usize, rng: &mut ChaCha8Rng) -> StochasticMatrix {
    let rows: Vec<Vec<f64>> = (0..d)
        .map(|_| {
            let raw: Vec<f64> = (0..d).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
            let s: f64 = raw.iter().sum();
            raw.into_iter().map(|v| v / s).collect()
        })
        .collect();
    StochasticMatrix::from_rows(&rows).unwrap()
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let (u1, u2): (f64, f64) = (rng.random(), rng.random());
    (-2.0 * u1.max(1e-15).ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn unit_sde() -> SdeCoefficients {
    SdeCoefficients {
        b0: 0.0,
        b1: 0.0,
        s0: 1.0,
        s1: 0.0,
        x0: 0.0,
    }
}

/// Criterion 1: the four non-emptiness conditions agree on random
/// uncontrolled instances, boundary band excluded.
#[test]
fn criterion_01_equivalence_of_conditions() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let shifts = [-0.8, -0.35, 0.0, 0.35, 0.8];
    let mut excluded = 0usize;
    let mut checked = 0usize;
    for case in 0..500 {
        let d = 2 + case % 5;
        let p = dirichlet_rows(d, &mut rng);
        let shift = shifts[case % shifts.len()];
        let cbar: Vec<f64> = (0..d).map(|_| gaussian(&mut rng) + shift).collect();
        let model = ControlledTransitionModel::uncontrolled(p, cbar).unwrap();
        let cert = nonemptiness_report(&model);
        match cert.conditions_agree {
            Some(agree) => {
                checked += 1;
                assert!(
                    agree,
                    "case {case}: conditions disagree: slack {}, mu_cbar {:?}, pairs [{:?}, {:?}]",
                    cert.max_uniform_slack, cert.mu_cbar[0], cert.pair_min[0], cert.pair_max[0]
                );
            }
            None => excluded += 1,
        }
    }
    let elapsed = start.elapsed();
    assert!(checked >= 400, "too many boundary exclusions: {excluded}");
    assert!(elapsed.as_secs_f64() < 10.0, "runtime {elapsed:?}");
    println!(
        "ACCEPTANCE 01 theorem-equivalence: PASS ({checked} agree, {excluded} boundary-excluded, {:.2}s)",
        elapsed.as_secs_f64()
    );
}

/// Criterion 2: round-trip and pair identities plus the adjugate identity
/// on 200 random irreducible instances.
#[test]
fn criterion_02_round_trip_identities() {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst_round = 0.0f64;
    let mut worst_pair = 0.0f64;
    let mut worst_adj = 0.0f64;
    for case in 0..200 {
        let d = 2 + case % 5;
        let p = dirichlet_rows(d, &mut rng);
        let cbar: Vec<f64> = (0..d).map(|_| gaussian(&mut rng)).collect();
        let a = analyze_chain(&p, &cbar).unwrap();
        let q = p.q_matrix();
        for j in 0..d {
            let rel = ((a.cbar_diag[j] * a.mu[j] - a.mu_cbar) / a.mu_cbar.abs().max(1.0)).abs();
            worst_round = worst_round.max(rel);
            assert!(rel <= 1e-9, "round-trip identity at case {case}, j={j}");
            let inv = q.minor(j, j).inverse().unwrap();
            for i in 0..d {
                if i == j {
                    continue;
                }
                let ii = i - usize::from(i > j);
                let pair = a.c[(i, j)] + a.c[(j, i)];
                let rhs = a.mu_cbar / a.mu[i] * inv[(ii, ii)];
                let rel = ((pair - rhs) / pair.abs().max(1.0)).abs();
                worst_pair = worst_pair.max(rel);
                assert!(rel <= 1e-9, "pair identity at case {case}, ({i},{j})");
            }
        }
        if d >= 3 {
            let resid = oblique_core::markov::adjugate_identity_check(&p).unwrap();
            worst_adj = worst_adj.max(resid);
            assert!(resid <= 1e-9, "adjugate identity at case {case}");
        }
    }
    println!(
        "ACCEPTANCE 02 round-trip-identities: PASS (worst round {worst_round:.2e}, pair {worst_pair:.2e}, adjugate {worst_adj:.2e})"
    );
}

/// Monte Carlo excursion-cost sampler (independent oracle).
fn mc_excursion(
    p: &StochasticMatrix,
    cbar: &[f64],
    start: usize,
    target: usize,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> (f64, f64) {
    let d = p.dim();
    let mut cdf = vec![vec![0.0; d]; d];
    for i in 0..d {
        let mut acc = 0.0;
        for j in 0..d {
            acc += p.entry(i, j);
            cdf[i][j] = acc;
        }
    }
    let (mut sum, mut sum_sq) = (0.0f64, 0.0f64);
    for _ in 0..n {
        let mut state = start;
        let mut cost = 0.0;
        loop {
            cost += cbar[state];
            let u: f64 = rng.random();
            let row = &cdf[state];
            let mut next = d - 1;
            for (j, c) in row.iter().enumerate() {
                if u <= *c {
                    next = j;
                    break;
                }
            }
            state = next;
            if state == target {
                break;
            }
        }
        sum += cost;
        sum_sq += cost * cost;
    }
    let mean = sum / n as f64;
    let var = (sum_sq / n as f64 - mean * mean).max(0.0);
    (mean, (var / n as f64).sqrt())
}

/// Criterion 3: analytic excursion costs match the Monte Carlo oracle.
#[test]
fn criterion_03_excursion_cost_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let n_paths = 1_000_000;
    let mut worst_sigma = 0.0f64;
    for case in 0..10 {
        let p = dirichlet_rows(4, &mut rng);
        let cbar: Vec<f64> = (0..4).map(|_| gaussian(&mut rng)).collect();
        let a = analyze_chain(&p, &cbar).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                if i == j {
                    continue;
                }
                let (mean, se) = mc_excursion(&p, &cbar, i, j, n_paths, &mut rng);
                let sigmas = (mean - a.c[(i, j)]).abs() / se.max(1e-12);
                worst_sigma = worst_sigma.max(sigmas);
                assert!(
                    sigmas <= 3.0,
                    "case {case} pair ({i},{j}): {} vs {mean} +- {se}",
                    a.c[(i, j)]
                );
            }
        }
    }
    println!("ACCEPTANCE 03 excursion-oracle: PASS (worst deviation {worst_sigma:.2} sigma)");
}

/// Criterion 4: slice vertices are feasible, affinely independent,
/// saturate all-but-one constraint, and span exactly the feasible slice.
#[test]
fn criterion_04_slice_vertices() {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut instances = 0usize;
    while instances < 100 {
        let d = 2 + instances % 4;
        let p = dirichlet_rows(d, &mut rng);
        let cbar: Vec<f64> = (0..d).map(|_| gaussian(&mut rng) + 1.2).collect();
        let model = ControlledTransitionModel::uncontrolled(p, cbar).unwrap();
        let domain = SwitchingDomain::build(model).unwrap();
        if domain.certificate.verdict != DomainVerdict::NonemptyInterior {
            continue;
        }
        instances += 1;
        // Construction fails inside build when the rank drops, so the
        // presence of vertices certifies affine independence.
        let vertices = domain.slice_vertices.clone().expect("affinely independent");
        for (j, v) in vertices.iter().enumerate() {
            assert!(v[d - 1].abs() < 1e-12);
            let (ok, _) = domain.model.membership(v, 1e-9);
            assert!(ok, "vertex {j} feasible");
            for i in 0..d {
                let slack = v[i] - domain.model.obstacle(v, i);
                if i != j {
                    assert!(slack.abs() <= 1e-9, "vertex {j} saturates constraint {i}");
                }
            }
        }
        // Random convex combinations are members.
        for _ in 0..1000 {
            let mut w: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
            let s: f64 = w.iter().sum();
            w.iter_mut().for_each(|v| *v /= s);
            let mut y = vec![0.0; d];
            for (wj, v) in w.iter().zip(&vertices) {
                for k in 0..d {
                    y[k] += wj * v[k];
                }
            }
            assert!(domain.model.membership(&y, 1e-9).0);
        }
        // Random feasible slice points have nonnegative barycentric coords.
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for v in &vertices {
            for k in 0..d {
                lo[k] = lo[k].min(v[k]);
                hi[k] = hi[k].max(v[k]);
            }
        }
        let mut found = 0usize;
        let mut attempts = 0usize;
        while found < 1000 && attempts < 400_000 {
            attempts += 1;
            let y: Vec<f64> = (0..d)
                .map(|k| {
                    if k == d - 1 {
                        0.0
                    } else {
                        rng.random_range(lo[k] - 0.1..hi[k] + 0.1)
                    }
                })
                .collect();
            if !domain.model.membership(&y, 0.0).0 {
                continue;
            }
            found += 1;
            let lambda = barycentric_coordinates(&y, &vertices).unwrap();
            for l in lambda {
                assert!(l >= -1e-9, "feasible point inside the hull");
            }
        }
        assert!(found >= 200, "rejection sampling starved ({found} points)");
    }
    println!("ACCEPTANCE 04 slice-vertices: PASS (100 instances)");
}

/// Criterion 5: the two-control counterexample reproduces all four facts.
#[test]
fn criterion_05_controlled_cost_counterexample() {
    let model = builtin::pair_positive_empty();
    // Stationary measure is uniform for the shared transition matrix.
    let a = analyze_chain(&model.p[0], &model.cbar[0]).unwrap();
    for m in &a.mu {
        assert!((m - 1.0 / 3.0).abs() < 1e-12);
    }
    // Minimal per-mode costs give a negative stationary cost.
    let min_costs = model.min_cost_per_mode();
    let mu_chat: f64 = dot(&a.mu, &min_costs);
    assert!((mu_chat - (-1.0 / 30.0)).abs() < 1e-12);
    assert!(mu_chat < 0.0);
    let cert = nonemptiness_report(&model);
    let chat_min = cert.chat_pair_min.unwrap();
    assert!(
        chat_min > 0.0,
        "pairwise minimal excursion sums stay positive"
    );
    assert_eq!(cert.verdict, DomainVerdict::Empty, "LP certifies emptiness");
    println!(
        "ACCEPTANCE 05 controlled-costs-example: PASS (mu.chat = {mu_chat:.6}, min pair {chat_min:.4})"
    );
}

/// Criterion 6: reflection-operator certificates.
#[test]
fn criterion_06_reflection_certificates() {
    // Three-mode symmetric construction at (1/2, 1/2, 1/2).
    let field = build_h_dim3(0.5, 0.5, 0.5, vec![1.0; 3]).unwrap();
    let cert = verify_h(&field, 1000, 606);
    assert!(cert.pass, "{:?}", cert.failure);
    assert!(cert.eta_min >= 1e-3, "eta {}", cert.eta_min);
    assert!(cert.cone_max_defect <= 1e-9);

    // Symmetric family: closed-form determinant and trace, then the
    // sampling certificate.
    for d in [3usize, 4, 5] {
        let field = build_h_symmetric(d).unwrap();
        let base = &field.vertex_matrices[d - 1];
        let det_expect = symmetric_det_closed_form(d, 2.0);
        let tr_expect = symmetric_trace_closed_form(d, 2.0);
        let tr: f64 = (0..d).map(|i| base[(i, i)]).sum();
        assert!((base.det() - det_expect).abs() <= 1e-10);
        assert!((tr - tr_expect).abs() <= 1e-10);
        let cert = verify_h(&field, 1000, 607 + d as u64);
        assert!(cert.pass, "d={d}: {:?}", cert.failure);
    }

    // Four-mode impossibility witness.
    let witness = dim4_counterexample();
    assert!(witness.v_h_v.abs() <= 1e-12, "v^T H v = {}", witness.v_h_v);

    // Printed vertex matrices of the controlled example.
    let data = build_h_controlled_dim3_vertices();
    let checks: [(usize, [f64; 3], [f64; 3]); 3] = [
        (0, [1.0, 0.0, -1.0], [0.0, 0.0, -1.0]),
        (0, [1.0, -1.0, 0.0], [0.0, -1.0, 0.0]),
        (1, [-1.0, 1.0, 0.0], [-1.0, 0.0, 0.0]),
    ];
    for (idx, input, expect) in checks {
        let hv = data.matrices[idx].matvec(&input);
        for k in 0..3 {
            assert!((hv[k] - expect[k]).abs() <= 1e-10);
        }
    }
    println!(
        "ACCEPTANCE 06 reflection-certificates: PASS (dim3 eta {:.3e}, dim4 witness {:.2e})",
        cert_eta_dim3(),
        witness.v_h_v.abs()
    );
}

fn cert_eta_dim3() -> f64 {
    let field = build_h_dim3(0.5, 0.5, 0.5, vec![1.0; 3]).unwrap();
    verify_h(&field, 1000, 606).eta_min
}

fn profit_driver() -> Driver {
    // Profit contrast well above the unit switching costs, so the threshold
    // strategy switches on roughly a third of the paths.
    Driver::state_only(
        |_, x, i| match i {
            0 => 2.5 * x.tanh(),
            1 => -2.5 * x.tanh(),
            _ => 0.3,
        },
        |x, i| 0.5 * (x + 0.4 * i as f64).tanh(),
    )
}

/// Criterion 7: lattice solver against the independent recursion.
#[test]
fn criterion_07_solver_vs_oracle() {
    let start = Instant::now();
    let model = builtin::example2();
    let lattice = build_lattice(unit_sde(), 1.0, 20, 41, 4.0, Quadrature::Trinomial).unwrap();
    let driver = profit_driver();
    let sol = solve(&model, &lattice, &driver, None).unwrap();
    let oracle = dp_oracle(&model, &lattice, &driver).unwrap();
    let mut sup = 0.0f64;
    for (k, layer) in oracle.iter().enumerate() {
        for (m, node) in layer.iter().enumerate() {
            for (i, v) in node.iter().enumerate() {
                sup = sup.max((v - sol.y[k][m][i]).abs());
            }
        }
    }
    assert!(sup <= 1e-8, "solver/oracle sup gap {sup}");
    assert!(sol.diagnostics.membership_defect <= 1e-9);
    assert!(sol.diagnostics.skorokhod_defect <= 1e-9);
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 5.0, "runtime {elapsed:?}");
    println!(
        "ACCEPTANCE 07 solver-vs-oracle: PASS (sup {sup:.2e}, skorokhod {:.2e}, {:.2}s)",
        sol.diagnostics.skorokhod_defect,
        elapsed.as_secs_f64()
    );
}

/// Tiny two-mode, two-control instance for the exhaustive check. The
/// profitable switch direction (mode 1 to mode 0 under control 0) lands
/// deterministically, so repeated switching at one grid time has no value
/// and the single-switch-per-time policy class attains the optimum.
fn tiny_instance() -> (ControlledTransitionModel, Driver) {
    let p0 = StochasticMatrix::from_rows(&[vec![0.2, 0.8], vec![1.0, 0.0]]).unwrap();
    let p1 = StochasticMatrix::from_rows(&[vec![0.7, 0.3], vec![0.4, 0.6]]).unwrap();
    let model = ControlledTransitionModel::new(
        vec![0.0, 1.0],
        vec![p0, p1],
        vec![vec![0.45, 0.3], vec![0.5, 0.5]],
    )
    .unwrap();
    let driver = Driver::state_only(
        |_, _, i| if i == 0 { 1.2 } else { 0.0 },
        |x, i| {
            if i == 0 {
                0.2 * x.tanh()
            } else {
                -0.1 * x.tanh()
            }
        },
    );
    (model, driver)
}

/// Criterion 8: exhaustive enumeration of every strategy tree (one switch
/// per grid time; the instance makes repeated instantaneous switching
/// valueless) equals the lattice value at the root.
#[test]
fn criterion_08_exhaustive_tiny_instance() {
    let (model, driver) = tiny_instance();
    let lattice = build_lattice(unit_sde(), 1.0, 2, 3, 1.0, Quadrature::Trinomial).unwrap();
    // Terminal data already satisfies every obstacle: the enumeration may
    // skip terminal switching.
    for m in 0..lattice.n_nodes() {
        let g: Vec<f64> = (0..2).map(|i| driver.g(lattice.grid[m], i)).collect();
        assert!(
            model.membership(&g, 1e-12).0,
            "terminal data inside the domain"
        );
    }
    let sol = solve(&model, &lattice, &driver, None).unwrap();

    // Decision states: root (k=0, x0) plus (k=1, m, i) for 3 nodes x 2
    // modes. Actions: stay, switch with control 0, switch with control 1.
    let dt = lattice.dt;
    let stay_value =
        |k: usize, m: usize, i: usize, continuation: &dyn Fn(usize, usize) -> f64| -> f64 {
            let x = lattice.grid[m];
            let f = driver.f(k as f64 * dt, x, i, 0.0, 0.0) * dt;
            let mut e = 0.0;
            for (j, w) in lattice.weights[m].iter().enumerate() {
                if *w != 0.0 {
                    e += w * continuation(j, i);
                }
            }
            f + e
        };

    for start_mode in 0..2 {
        let mut best = f64::NEG_INFINITY;
        // 3^7 policies: action at the root and at each of the six k=1
        // states.
        for code in 0..3usize.pow(7) {
            let mut digits = [0usize; 7];
            let mut c = code;
            for d in digits.iter_mut() {
                *d = c % 3;
                c /= 3;
            }
            let action_k1 = |m: usize, i: usize| digits[1 + m * 2 + i];

            // Value at a k=1 state under this policy.
            let value_k1 = |m: usize, i: usize| -> f64 {
                let terminal = |j: usize, mode: usize| driver.g(lattice.grid[j], mode);
                match action_k1(m, i) {
                    0 => stay_value(1, m, i, &terminal),
                    u => {
                        let u = u - 1;
                        let mut v = -model.cbar[u][i];
                        for jm in 0..2 {
                            let pj = model.p[u].entry(i, jm);
                            if pj > 0.0 {
                                v += pj * stay_value(1, m, jm, &terminal);
                            }
                        }
                        v
                    }
                }
            };
            let continuation_k1 = |m: usize, i: usize| value_k1(m, i);

            let m0 = lattice.x0_index;
            let root = match digits[0] {
                0 => stay_value(0, m0, start_mode, &continuation_k1),
                u => {
                    let u = u - 1;
                    let mut v = -model.cbar[u][start_mode];
                    for jm in 0..2 {
                        let pj = model.p[u].entry(start_mode, jm);
                        if pj > 0.0 {
                            v += pj * stay_value(0, m0, jm, &continuation_k1);
                        }
                    }
                    v
                }
            };
            if root > best {
                best = root;
            }
        }
        let lattice_value = sol.y[0][lattice.x0_index][start_mode];
        assert!(
            (best - lattice_value).abs() <= 1e-10,
            "mode {start_mode}: enumeration {best} vs lattice {lattice_value}"
        );
        println!(
            "ACCEPTANCE 08 exhaustive-tiny mode {start_mode}: PASS (enumeration {best:.12} = lattice {lattice_value:.12})"
        );
    }
}

/// Criterion 9: Monte Carlo representation check.
#[test]
fn criterion_09_monte_carlo_representation() {
    let start = Instant::now();
    let model = builtin::example2();
    let lattice = build_lattice(unit_sde(), 1.0, 20, 41, 4.0, Quadrature::Trinomial).unwrap();
    let driver = profit_driver();
    let sol = solve(&model, &lattice, &driver, None).unwrap();
    let report = verify_representation(
        &model,
        &lattice,
        &driver,
        &sol,
        20,
        &EvalConfig {
            paths: 10_000,
            seed: 909,
            ..Default::default()
        },
    )
    .unwrap();
    for mode in &report.modes {
        assert!(
            mode.optimal_ok,
            "mode {}: {} vs {} +- {}",
            mode.mode, mode.lattice_value, mode.optimal.mean, mode.optimal.std_error
        );
        for (name, est, ok) in &mode.baselines {
            assert!(ok, "baseline {name} exceeds the value: {est:?}");
        }
    }

    // A profitable instance where never switching is strictly dominated.
    let profitable = builtin::symmetric(3, vec![0.1; 3]).unwrap();
    let profit_driver = Driver::state_only(|_, _, i| if i == 2 { 2.0 } else { 0.0 }, |_, _| 0.0);
    let sol2 = solve(&profitable, &lattice, &profit_driver, None).unwrap();
    let never = evaluate_strategy(
        &profitable,
        &lattice,
        &profit_driver,
        &StrategySpec::NeverSwitch,
        None,
        0,
        &EvalConfig {
            paths: 10_000,
            seed: path_seed(909, 11),
            ..Default::default()
        },
    )
    .unwrap();
    let y0 = sol2.y[0][lattice.x0_index][0];
    assert!(
        never.mean < y0 - 3.0 * never.std_error.max(1e-12),
        "never-switch {} should trail the value {}",
        never.mean,
        y0
    );
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 30.0, "runtime {elapsed:?}");
    println!(
        "ACCEPTANCE 09 monte-carlo-representation: PASS (all modes + 21 baselines, never-switch gap {:.3}, {:.1}s)",
        y0 - never.mean,
        elapsed.as_secs_f64()
    );
}

/// Criterion 10: signed costs through the positive-cost translation.
#[test]
fn criterion_10_signed_cost_pipeline() {
    let p = StochasticMatrix::from_rows(&[
        vec![0.0, 0.5, 0.5],
        vec![0.5, 0.0, 0.5],
        vec![0.5, 0.5, 0.0],
    ])
    .unwrap();
    let model = ControlledTransitionModel::uncontrolled(p, vec![-0.3, 0.8, 0.9]).unwrap();
    assert!(model.c_hat() < 0.0);
    let a = analyze_chain(&model.p[0], &model.cbar[0]).unwrap();
    assert!(a.mu_cbar > 0.0);

    let cert = nonemptiness_report(&model);
    let y0 = cert.anchor.clone().unwrap();
    let shifted = model.shift_to_positive_costs(&y0).unwrap();
    let min_shifted = shifted.c_hat();
    assert!(min_shifted > 0.0, "translated costs all positive");

    let lattice = build_lattice(unit_sde(), 1.0, 10, 21, 3.0, Quadrature::Trinomial).unwrap();
    let driver = Driver::state_only(|_, x, i| 0.2 * (i as f64 - 1.0) * x.tanh(), |x, _| x.tanh());
    // Direct solve (internally anchored by the same program).
    let direct = solve(&model, &lattice, &driver, None).unwrap();
    assert!(direct.diagnostics.applied_shift.is_some());
    // Solve the translated model with translated terminal data.
    let y0g = y0.clone();
    let shifted_driver = Driver::state_only(
        |_, x, i| 0.2 * (i as f64 - 1.0) * x.tanh(),
        move |x, i| x.tanh() - y0g[i],
    );
    let translated = solve(&shifted, &lattice, &shifted_driver, None).unwrap();
    let mut sup = 0.0f64;
    for (ld, ls) in direct.y.iter().zip(&translated.y) {
        for (nd, ns) in ld.iter().zip(ls) {
            for i in 0..3 {
                sup = sup.max((nd[i] - (ns[i] + y0[i])).abs());
            }
        }
    }
    assert!(sup <= 1e-9, "shifted and direct fields differ by {sup}");
    println!(
        "ACCEPTANCE 10 signed-cost-pipeline: PASS (min shifted cost {min_shifted:.4}, field gap {sup:.2e})"
    );
}

/// Criterion 11: boundary polygons of the three named instances.
#[test]
fn criterion_11_figure_polygons() {
    let d1 = SwitchingDomain::build(builtin::example1()).unwrap();
    let d2 = SwitchingDomain::build(builtin::example2()).unwrap();
    let d3 = SwitchingDomain::build(builtin::example3(101)).unwrap();

    let p1 = oblique_core::geometry::emit_slice_polygon(&d1, 64).unwrap();
    let p2 = oblique_core::geometry::emit_slice_polygon(&d2, 64).unwrap();
    let p3 = oblique_core::geometry::emit_slice_polygon(&d3, 64).unwrap();
    for (name, domain, poly) in [
        ("example1", &d1, &p1),
        ("example2", &d2, &p2),
        ("example3", &d3, &p3),
    ] {
        for pt in poly {
            assert!(
                domain.model.membership(pt, 1e-8).0,
                "{name} polygon point inside"
            );
        }
    }

    // The minimal-excursion triangle of the classical instance, pointwise
    // inside the curved region.
    let tri = d1.chat_vertices().unwrap();
    for v in &tri {
        assert!(d3.model.membership(v, 1e-8).0);
    }
    // And it matches the closed form from the pairwise cost matrix.
    let mut cost = Mat::zeros(3, 3);
    for i in 0..3 {
        for j in 0..3 {
            if i != j {
                cost[(i, j)] = 1.0;
            }
        }
    }
    let expected: Vec<Vec<f64>> = (0..3)
        .map(|j| (0..3).map(|i| cost[(2, j)] - cost[(i, j)]).collect())
        .collect();
    for (v, e) in tri.iter().zip(&expected) {
        for k in 0..3 {
            assert!(
                (v[k] - e[k]).abs() <= 1e-12,
                "closed-form vertex: {v:?} vs {e:?}"
            );
        }
    }
    // Classical re-embedding consistency.
    let again = classical_embedding(&cost).unwrap();
    assert_eq!(again.n_controls(), d1.model.n_controls());
    println!(
        "ACCEPTANCE 11 figure-polygons: PASS (ex1 {} pts, ex2 {} pts, ex3 {} pts, triangle inside ex3)",
        p1.len(),
        p2.len(),
        p3.len()
    );
}
