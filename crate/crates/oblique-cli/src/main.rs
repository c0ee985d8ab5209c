//! Command-line front end for switching-problem analysis.
//!
//! Subcommands: `domain` (non-emptiness certificate and excursion costs),
//! `build-h` (reflection operators with verification certificates), `solve`
//! (lattice solution as CSV plus diagnostics), `verify` (Monte Carlo
//! representation check), and `polygon` (slice boundary trace for 3-mode
//! models).
//!
//! Exit codes: 0 success, 1 verification failure, 2 configuration,
//! 3 geometry/construction, 4 numerical stability, 5 capability.

mod config;
mod report;

use clap::{Args, Parser, Subcommand};
use config::ProblemConfig;
use oblique_core::error::{GeometryError, LatticeError, ReflectionError, SimulationError};
use oblique_core::geometry::{emit_slice_polygon, DomainVerdict, SwitchingDomain};
use oblique_core::lattice::{build_lattice, refine_and_extrapolate, solve};
use oblique_core::reflection::{
    build_h_controlled_dim3_vertices, build_h_dim3, build_h_markovian, build_h_symmetric,
    dim4_counterexample, symmetric_det_closed_form, symmetric_trace_closed_form, verify_and_record,
    verify_h, ReflectionField,
};
use oblique_core::simulate::{verify_representation, EvalConfig};
use report::{human, machine, matrix_block, vector_line};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "oblique-switch",
    about = "Analyze, solve, and verify switching problems with controlled randomisation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Problem configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Override the run seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for reports and CSV files.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Non-emptiness certificate, invariant measures, excursion costs,
    /// slice vertices.
    Domain {
        #[command(flatten)]
        common: Common,
    },
    /// Build a reflection operator and its verification certificate.
    BuildH {
        #[command(flatten)]
        common: Common,
        /// markovian | dim3 | symmetric | controlled-dim3 | dim4-counterexample
        #[arg(long, default_value = "markovian")]
        construction: String,
    },
    /// Solve the reflected system on the lattice; write CSV + diagnostics.
    Solve {
        #[command(flatten)]
        common: Common,
        /// Run a nested refinement study with this many levels instead of a
        /// single solve.
        #[arg(long)]
        refine: Option<usize>,
    },
    /// Monte Carlo representation check of the threshold strategy.
    Verify {
        #[command(flatten)]
        common: Common,
    },
    /// Slice boundary polygon for 3-mode models.
    Polygon {
        #[command(flatten)]
        common: Common,
        /// Number of boundary points (controlled models).
        #[arg(long)]
        resolution: Option<usize>,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }
}

impl From<config::ConfigError> for Failure {
    fn from(e: config::ConfigError) -> Self {
        Failure::new(2, e.to_string())
    }
}

impl From<GeometryError> for Failure {
    fn from(e: GeometryError) -> Self {
        match e {
            GeometryError::ProjectionStalled { .. } => Failure::new(4, e.to_string()),
            _ => Failure::new(3, e.to_string()),
        }
    }
}

impl From<ReflectionError> for Failure {
    fn from(e: ReflectionError) -> Self {
        Failure::new(3, e.to_string())
    }
}

impl From<LatticeError> for Failure {
    fn from(e: LatticeError) -> Self {
        match e {
            LatticeError::Geometry(g) => g.into(),
            LatticeError::GridTooCoarse { .. }
            | LatticeError::TrinomialUnstable { .. }
            | LatticeError::NotContracting { .. }
            | LatticeError::TooFewResolutions(_)
            | LatticeError::DegenerateVolatility { .. } => Failure::new(4, e.to_string()),
            LatticeError::NoInteriorAnchor { .. } => Failure::new(3, e.to_string()),
        }
    }
}

impl From<SimulationError> for Failure {
    fn from(e: SimulationError) -> Self {
        match e {
            SimulationError::Lattice(l) => l.into(),
            SimulationError::DriverDependsOnYz => Failure::new(5, e.to_string()),
            SimulationError::MismatchedSolution(_) => Failure::new(2, e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::new(2, format!("io error: {e}"))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Domain { common } => cmd_domain(&common),
        Command::BuildH {
            common,
            construction,
        } => cmd_build_h(&common, &construction),
        Command::Solve { common, refine } => cmd_solve(&common, refine),
        Command::Verify { common } => cmd_verify(&common),
        Command::Polygon { common, resolution } => cmd_polygon(&common, resolution),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn load(common: &Common) -> Result<(ProblemConfig, u64), Failure> {
    let text = std::fs::read_to_string(&common.config)
        .map_err(|e| Failure::new(2, format!("cannot read {}: {e}", common.config.display())))?;
    let cfg = ProblemConfig::parse(&text)?;
    let seed = common.seed.unwrap_or(cfg.run.seed);
    Ok((cfg, seed))
}

fn write_out(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, Failure> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    std::fs::write(&path, contents)?;
    Ok(path)
}

fn header(cfg: &ProblemConfig, seed: u64, command: &str) -> String {
    format!(
        "# oblique-switch {command}\n# config-hash {}\n# seed {seed}\n",
        cfg.hash()
    )
}

fn eval_config(cfg: &ProblemConfig, seed: u64) -> EvalConfig {
    let threads = std::env::var("OBLIQUE_SWITCH_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .unwrap_or(1);
    EvalConfig {
        paths: cfg.run.paths,
        seed,
        threads,
        ..Default::default()
    }
}

fn verdict_name(v: DomainVerdict) -> &'static str {
    match v {
        DomainVerdict::Empty => "empty",
        DomainVerdict::NonemptyEmptyInterior => "nonempty-empty-interior",
        DomainVerdict::NonemptyInterior => "nonempty-interior",
    }
}

fn cmd_domain(common: &Common) -> Result<(), Failure> {
    let (cfg, seed) = load(common)?;
    let model = cfg.build_model()?;
    let domain = SwitchingDomain::build(model)?;
    let cert = &domain.certificate;

    println!("domain verdict: {}", verdict_name(cert.verdict));
    println!(
        "  max uniform slack = {} (feasible {}, strict {})",
        human(cert.max_uniform_slack),
        cert.lp_feasible,
        cert.lp_strictly_feasible
    );
    for (u, label) in domain.model.controls.iter().enumerate() {
        match (&domain.per_control[u], cert.mu_cbar[u]) {
            (Some(a), Some(mc)) => {
                println!(
                    "  control {label}: mu = {}, mu.cbar = {}, pair min = {}",
                    a.mu.iter().map(|v| human(*v)).collect::<Vec<_>>().join(" "),
                    human(mc),
                    human(cert.pair_min[u].unwrap_or(f64::NAN)),
                );
            }
            _ => println!("  control {label}: reducible chain, excursion analysis unavailable"),
        }
    }
    if let Some(chat_min) = cert.chat_pair_min {
        println!(
            "  min pair sum of minimal excursion costs = {}",
            human(chat_min)
        );
    }
    for (u, analysis) in domain.per_control.iter().enumerate() {
        if let Some(a) = analysis {
            for (j, cond) in &a.condition_warnings {
                println!(
                    "  warning: control {u} deleted block {j} condition number {}",
                    human(*cond)
                );
            }
        }
    }
    if let Some(vertices) = &domain.slice_vertices {
        println!("  slice vertices:");
        for v in vertices {
            println!(
                "    [{}]",
                v.iter().map(|x| human(*x)).collect::<Vec<_>>().join(", ")
            );
        }
    }

    let mut machine_report = header(&cfg, seed, "domain");
    let _ = writeln!(machine_report, "verdict {}", verdict_name(cert.verdict));
    let _ = writeln!(
        machine_report,
        "max_uniform_slack {}",
        machine(cert.max_uniform_slack)
    );
    if let Some(anchor) = &cert.anchor {
        machine_report.push_str(&vector_line("anchor", anchor, true));
    }
    for (u, analysis) in domain.per_control.iter().enumerate() {
        if let Some(a) = analysis {
            machine_report.push_str(&vector_line(&format!("mu[{u}]"), &a.mu, true));
            let _ = writeln!(machine_report, "mu_cbar[{u}] {}", machine(a.mu_cbar));
            machine_report.push_str(&matrix_block(&format!("C[{u}]"), &a.c, true));
        }
    }
    if let Some(chat) = &domain.chat {
        machine_report.push_str(&matrix_block("Chat", chat, true));
    }
    if let Some(vertices) = &domain.slice_vertices {
        for (j, v) in vertices.iter().enumerate() {
            machine_report.push_str(&vector_line(&format!("vertex[{j}]"), v, true));
        }
    }
    let path = write_out(&common.out, "domain_report.txt", &machine_report)?;
    println!("machine report: {}", path.display());
    Ok(())
}

fn certificate_text(cfg: &ProblemConfig, seed: u64, field: &ReflectionField) -> String {
    let cert = verify_h(field, 1000, seed);
    let mut out = header(cfg, seed, "build-h");
    out.push_str(&cert.to_record());
    out.push('\n');
    for (j, m) in field.vertex_matrices.iter().enumerate() {
        out.push_str(&matrix_block(&format!("H[vertex {j}]"), m, true));
    }
    out
}

fn cmd_build_h(common: &Common, construction: &str) -> Result<(), Failure> {
    let (cfg, seed) = load(common)?;
    match construction {
        "markovian" => {
            let model = cfg.build_model()?;
            let domain = SwitchingDomain::build(model)?;
            let mut field = build_h_markovian(&domain).map_err(|e| {
                if let ReflectionError::NotCopositive { index } = e {
                    // Surface the failing direction alongside the refusal.
                    let check = oblique_core::reflection::copositivity_check(
                        &domain.model.p[0].q_minor(index),
                    );
                    if let oblique_core::reflection::Copositivity::NotStrict { witness, value } =
                        check
                    {
                        return Failure::new(
                            3,
                            format!(
                                "{e}; witness x = [{}] with x^T Q x = {}",
                                witness
                                    .iter()
                                    .map(|v| human(*v))
                                    .collect::<Vec<_>>()
                                    .join(", "),
                                machine(value)
                            ),
                        );
                    }
                }
                e.into()
            })?;
            let cert = verify_and_record(&mut field, 1000, seed);
            println!(
                "markovian field: pass={} eta={} cone_defect={}",
                cert.pass,
                human(cert.eta_min),
                human(cert.cone_max_defect)
            );
            let text = certificate_text(&cfg, seed, &field);
            let path = write_out(&common.out, "h_certificate.txt", &text)?;
            println!("certificate: {}", path.display());
            if !cert.pass {
                return Err(Failure::new(3, cert.failure.unwrap_or_default()));
            }
        }
        "dim3" => {
            let model = cfg.build_model()?;
            if model.d() != 3 || !model.is_uncontrolled() {
                return Err(Failure::new(
                    3,
                    "dim3 construction needs an uncontrolled 3-mode model",
                ));
            }
            let p = model.p[0].entry(0, 1);
            let q = model.p[0].entry(1, 0);
            let r = model.p[0].entry(2, 0);
            let mut field = build_h_dim3(p, q, r, model.cbar[0].clone())?;
            let cert = verify_and_record(&mut field, 1000, seed);
            println!(
                "dim3 field (p={p}, q={q}, r={r}): pass={} eta={} bound={}",
                cert.pass,
                human(cert.eta_min),
                human(cert.bound_max)
            );
            let text = certificate_text(&cfg, seed, &field);
            let path = write_out(&common.out, "h_certificate.txt", &text)?;
            println!("certificate: {}", path.display());
            if !cert.pass {
                return Err(Failure::new(3, cert.failure.unwrap_or_default()));
            }
        }
        "symmetric" => {
            let model = cfg.build_model()?;
            let d = model.d();
            let mut field = build_h_symmetric(d)?;
            let base = field.vertex_matrices[d - 1].clone();
            let base = &base;
            let trace: f64 = (0..d).map(|i| base[(i, i)]).sum();
            println!(
                "symmetric field d={d}: det={} (closed form {}), trace={} (closed form {})",
                human(base.det()),
                human(symmetric_det_closed_form(d, 2.0)),
                human(trace),
                human(symmetric_trace_closed_form(d, 2.0))
            );
            let cert = verify_and_record(&mut field, 1000, seed);
            println!("  pass={} eta={}", cert.pass, human(cert.eta_min));
            let text = certificate_text(&cfg, seed, &field);
            let path = write_out(&common.out, "h_certificate.txt", &text)?;
            println!("certificate: {}", path.display());
            if !cert.pass {
                return Err(Failure::new(3, cert.failure.unwrap_or_default()));
            }
        }
        "controlled-dim3" => {
            let data = build_h_controlled_dim3_vertices();
            let mut out = header(&cfg, seed, "build-h controlled-dim3");
            for (v, m) in data.vertices.iter().zip(&data.matrices) {
                out.push_str(&vector_line("vertex", v, true));
                out.push_str(&matrix_block("H", m, true));
            }
            // Cone-mapping identities at the first two vertices.
            let checks = [
                (0usize, [1.0, 0.0, -1.0]),
                (0, [1.0, -1.0, 0.0]),
                (1, [-1.0, 1.0, 0.0]),
            ];
            for (idx, v) in checks {
                let hv = data.matrices[idx].matvec(&v);
                out.push_str(&vector_line(
                    &format!("H[{idx}] * [{}, {}, {}]", v[0], v[1], v[2]),
                    &hv,
                    true,
                ));
            }
            // The evaluable field over the slice triangle, certified at the
            // vertices with the maximising-control gradients.
            let mut field = oblique_core::reflection::build_h_controlled_dim3_field(101)?;
            let cert = verify_and_record(&mut field, 100, seed);
            println!(
                "controlled-dim3 field: pass={} eta={} cone_defect={}",
                cert.pass,
                human(cert.eta_min),
                human(cert.cone_max_defect)
            );
            out.push_str(&cert.to_record());
            out.push('\n');
            let path = write_out(&common.out, "h_certificate.txt", &out)?;
            println!("certificate: {}", path.display());
            if !cert.pass {
                return Err(Failure::new(3, cert.failure.unwrap_or_default()));
            }
        }
        "dim4-counterexample" => {
            let w = dim4_counterexample();
            println!("dim4 witness: v^T H v = {}", machine(w.v_h_v));
            let mut out = header(&cfg, seed, "build-h dim4-counterexample");
            let _ = writeln!(out, "v_h_v {}", machine(w.v_h_v));
            out.push_str(&vector_line("v", &w.v, true));
            out.push_str(&matrix_block("H", &w.h, true));
            let path = write_out(&common.out, "h_certificate.txt", &out)?;
            println!("witness: {}", path.display());
        }
        other => {
            return Err(Failure::new(2, format!("unknown construction '{other}'")));
        }
    }
    Ok(())
}

fn cmd_solve(common: &Common, refine: Option<usize>) -> Result<(), Failure> {
    let (cfg, seed) = load(common)?;
    let model = cfg.build_model()?;
    let driver = cfg.build_driver(model.d())?;
    let sde = cfg.sde_coefficients();
    let quadrature = cfg.quadrature()?;

    if let Some(levels) = refine {
        let table = refine_and_extrapolate(
            &model,
            sde,
            cfg.lattice.t_horizon,
            cfg.lattice.steps,
            cfg.lattice.grid_points,
            cfg.lattice.coverage,
            quadrature,
            &driver,
            levels,
        )?;
        println!("refinement study ({levels} levels):");
        for l in &table.levels {
            match l.diff_to_next {
                Some(d) => println!(
                    "  steps {:>5} nodes {:>5}: diff to next {}",
                    l.steps,
                    l.grid_points,
                    human(d)
                ),
                None => println!("  steps {:>5} nodes {:>5}: finest", l.steps, l.grid_points),
            }
        }
        match table.empirical_order {
            Some(order) => println!("  empirical order {order:.3}"),
            None => println!("  differences not monotone; no order emitted"),
        }
        let mut out = header(&cfg, seed, "solve --refine");
        for l in &table.levels {
            let _ = writeln!(
                out,
                "level steps={} grid_points={} diff_to_next={}",
                l.steps,
                l.grid_points,
                l.diff_to_next.map(machine).unwrap_or_default()
            );
        }
        let _ = writeln!(out, "monotone {}", table.monotone);
        if let Some(order) = table.empirical_order {
            let _ = writeln!(out, "empirical_order {}", machine(order));
        }
        let path = write_out(&common.out, "refinement.txt", &out)?;
        println!("table: {}", path.display());
        return Ok(());
    }

    let lattice = build_lattice(
        sde,
        cfg.lattice.t_horizon,
        cfg.lattice.steps,
        cfg.lattice.grid_points,
        cfg.lattice.coverage,
        quadrature,
    )?;
    let sol = solve(&model, &lattice, &driver, None)?;
    let diag = &sol.diagnostics;
    println!(
        "solved {} steps x {} nodes x {} modes",
        lattice.steps,
        lattice.n_nodes(),
        model.d()
    );
    println!(
        "  membership defect {}  skorokhod defect {}  picard iters {}  terminal projection {}",
        human(diag.membership_defect),
        human(diag.skorokhod_defect),
        diag.picard_iters,
        human(diag.terminal_projection_defect)
    );
    if let Some(shift) = &diag.applied_shift {
        println!(
            "  signed costs translated by anchor [{}]",
            shift
                .iter()
                .map(|v| human(*v))
                .collect::<Vec<_>>()
                .join(", ")
        );
    }
    println!(
        "  value at (t=0, x0): [{}]",
        sol.y[0][lattice.x0_index]
            .iter()
            .map(|v| human(*v))
            .collect::<Vec<_>>()
            .join(", ")
    );

    let mut csv = String::new();
    csv.push_str(&header(&cfg, seed, "solve"));
    let mut buf = Vec::new();
    sol.write_csv(&lattice, &mut buf)?;
    csv.push_str(&String::from_utf8_lossy(&buf));
    let path = write_out(&common.out, "solution.csv", &csv)?;
    println!("solution: {}", path.display());

    let mut diag_text = header(&cfg, seed, "solve diagnostics");
    let _ = writeln!(
        diag_text,
        "membership_defect {}",
        machine(diag.membership_defect)
    );
    let _ = writeln!(
        diag_text,
        "skorokhod_defect {}",
        machine(diag.skorokhod_defect)
    );
    let _ = writeln!(diag_text, "picard_iters {}", diag.picard_iters);
    let _ = writeln!(
        diag_text,
        "terminal_projection_defect {}",
        machine(diag.terminal_projection_defect)
    );
    let path = write_out(&common.out, "solve_report.txt", &diag_text)?;
    println!("diagnostics: {}", path.display());
    Ok(())
}

fn cmd_verify(common: &Common) -> Result<(), Failure> {
    let (cfg, seed) = load(common)?;
    let model = cfg.build_model()?;
    let driver = cfg.build_driver(model.d())?;
    if driver.depends_on_yz() {
        return Err(SimulationError::DriverDependsOnYz.into());
    }
    let lattice = build_lattice(
        cfg.sde_coefficients(),
        cfg.lattice.t_horizon,
        cfg.lattice.steps,
        cfg.lattice.grid_points,
        cfg.lattice.coverage,
        cfg.quadrature()?,
    )?;
    let sol = solve(&model, &lattice, &driver, None)?;
    let report = verify_representation(
        &model,
        &lattice,
        &driver,
        &sol,
        cfg.run.baselines,
        &eval_config(&cfg, seed),
    )?;

    let mut out = header(&cfg, seed, "verify");
    for mode in &report.modes {
        let status = if mode.optimal_ok { "PASS" } else { "FAIL" };
        println!(
            "mode {}: {} (lattice {}, strategy {} +- {})",
            mode.mode,
            status,
            human(mode.lattice_value),
            human(mode.optimal.mean),
            human(mode.optimal.std_error)
        );
        let _ = writeln!(
            out,
            "mode {} lattice {} optimal {} se {} pass {}",
            mode.mode,
            machine(mode.lattice_value),
            machine(mode.optimal.mean),
            machine(mode.optimal.std_error),
            mode.optimal_ok
        );
        for (name, est, ok) in &mode.baselines {
            let _ = writeln!(
                out,
                "mode {} baseline {} mean {} se {} within_bound {}",
                mode.mode,
                name.replace(' ', "_"),
                machine(est.mean),
                machine(est.std_error),
                ok
            );
            if !ok {
                println!("  baseline {name} exceeds the value: {}", human(est.mean));
            }
        }
    }
    let path = write_out(&common.out, "verify_report.txt", &out)?;
    println!("report: {}", path.display());
    if report.all_pass {
        println!("representation check: PASS");
        Ok(())
    } else {
        Err(Failure::new(1, "representation check failed".to_string()))
    }
}

fn cmd_polygon(common: &Common, resolution: Option<usize>) -> Result<(), Failure> {
    let (cfg, seed) = load(common)?;
    let model = cfg.build_model()?;
    let domain = SwitchingDomain::build(model)?;
    let resolution = resolution.unwrap_or(cfg.run.resolution);
    let points = emit_slice_polygon(&domain, resolution)?;
    println!("polygon with {} boundary points", points.len());
    let mut csv = header(&cfg, seed, "polygon");
    csv.push_str("y1,y2,y3\n");
    for p in &points {
        let _ = writeln!(csv, "{},{},{}", machine(p[0]), machine(p[1]), machine(p[2]));
    }
    let path = write_out(&common.out, "polygon.csv", &csv)?;
    println!("polygon: {}", path.display());
    Ok(())
}
