//! Mode pipelines and artifact output.

use std::fmt;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use volctl::conjugation::{conjugate, conjugate_derivative, potential, ConjugateHamiltonian};
use volctl::mc::{compare_policies, SimConfig};
use volctl::nd::{mild_solve_nd, reconstruct_value_nd, Grid2D, NdProblemSpec};
use volctl::resolvent::ResolventConfig;
use volctl::stepper::{mild_solve_with, refine_until, StepperConfig, TransformOptions, TransformedProblem};
use volctl::{energy_report, reconstruct_value, solve_degenerate, synthesize_feedback, MildSolution, ProblemSpec};

use crate::config::{ConfigError, Mode, RunConfig};

#[derive(Debug)]
pub enum RunError {
    Config(Vec<ConfigError>),
    Solver { stage: &'static str, source: volctl::Error },
    Io { path: PathBuf, source: io::Error },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Solver { .. } => 3,
            RunError::Io { .. } => 4,
        }
    }
}

/// The structured error block printed on failure.
impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Config(errs) => {
                writeln!(f, "error: invalid configuration ({} problem(s))", errs.len())?;
                for e in errs {
                    writeln!(f, "  - {e}")?;
                }
                Ok(())
            }
            RunError::Solver { stage, source } => {
                writeln!(f, "error: solver failure")?;
                writeln!(f, "  stage: {stage}")?;
                let mut cause: Option<&dyn std::error::Error> = Some(source);
                while let Some(c) = cause {
                    writeln!(f, "  cause: {c}")?;
                    cause = c.source();
                }
                Ok(())
            }
            RunError::Io { path, source } => {
                writeln!(f, "error: i/o failure")?;
                writeln!(f, "  path: {}", path.display())?;
                writeln!(f, "  cause: {source}")
            }
        }
    }
}

impl std::error::Error for RunError {}

fn solver(stage: &'static str) -> impl FnOnce(volctl::Error) -> RunError {
    move |source| RunError::Solver { stage, source }
}

/// Output directory plus the timing log that ends up in the manifest.
struct Output {
    root: PathBuf,
    quiet: bool,
    timings: Vec<(String, f64)>,
    files: Vec<String>,
}

impl Output {
    fn new(root: &Path, quiet: bool) -> Result<Self, RunError> {
        for sub in ["", "fields", "reports"] {
            let p = root.join(sub);
            fs::create_dir_all(&p).map_err(|source| RunError::Io { path: p, source })?;
        }
        Ok(Output {
            root: root.to_path_buf(),
            quiet,
            timings: Vec::new(),
            files: Vec::new(),
        })
    }

    fn note(&self, msg: impl fmt::Display) {
        if !self.quiet {
            eprintln!("{msg}");
        }
    }

    fn timed<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        let secs = start.elapsed().as_secs_f64();
        self.note(format_args!("{stage}: {secs:.3} s"));
        self.timings.push((stage.to_string(), secs));
        out
    }

    fn write(&mut self, rel: &str, body: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<(), RunError> {
        let path = self.root.join(rel);
        let io_err = |source| RunError::Io {
            path: path.clone(),
            source,
        };
        let mut w = BufWriter::new(File::create(&path).map_err(io_err)?);
        body(&mut w).map_err(io_err)?;
        w.flush().map_err(io_err)?;
        self.files.push(rel.to_string());
        Ok(())
    }
}

/// What a run produced.
#[derive(Debug, Clone)]
pub struct RunSummary {
    /// Relative paths of the written files, manifest last.
    pub files: Vec<String>,
}

/// Runs `cfg` and writes all artifacts below `out`.
pub fn run(cfg: &RunConfig, out: &Path, quiet: bool) -> Result<RunSummary, RunError> {
    let mut o = Output::new(out, quiet)?;
    let total = Instant::now();
    match cfg.mode {
        Mode::ConjugateTable => conjugate_table(cfg, &mut o)?,
        Mode::Solve2d => solve_2d(cfg, &mut o)?,
        Mode::SweepDegenerate => sweep_degenerate(cfg, &mut o)?,
        Mode::SweepEps => sweep_eps(cfg, &mut o)?,
        Mode::Solve | Mode::Value | Mode::Policy | Mode::Simulate => pipeline(cfg, &mut o)?,
    }
    let elapsed = total.elapsed().as_secs_f64();
    let manifest = manifest(cfg, &o.timings, elapsed);
    o.write("manifest.txt", |w| w.write_all(manifest.as_bytes()))?;
    Ok(RunSummary { files: o.files })
}

/// Config echo followed by versions and timings as comments, so the file
/// is itself a valid config.
pub fn manifest(cfg: &RunConfig, timings: &[(String, f64)], total: f64) -> String {
    let mut s = String::new();
    s.push_str("# volctl run manifest\n");
    s.push_str(&format!("# volctl-cli {}\n", env!("CARGO_PKG_VERSION")));
    s.push_str(&format!("# volctl {}\n", volctl::VERSION));
    s.push_str(&cfg.to_toml());
    s.push_str("\n# timings [s]\n");
    for (stage, secs) in timings {
        s.push_str(&format!("# {stage} = {secs:.6}\n"));
    }
    s.push_str(&format!("# total = {total:.6}\n"));
    s
}

fn spec_of(cfg: &RunConfig) -> Result<ProblemSpec, RunError> {
    cfg.problem.spec().map_err(solver("problem setup"))
}

fn stepper_config(cfg: &RunConfig) -> StepperConfig {
    let s = cfg.solver.as_ref().expect("validated");
    let mut resolvent = ResolventConfig::new(1.0);
    resolvent.tol_res = s.tol_res;
    resolvent.max_newton = s.max_newton;
    resolvent.max_picard = s.max_picard;
    StepperConfig {
        resolvent,
        snapshot_budget: s.snapshot_budget,
    }
}

fn transformed(cfg: &RunConfig, spec: &ProblemSpec) -> Result<TransformedProblem, RunError> {
    let s = cfg.solver.as_ref().expect("validated");
    let grid = cfg.grid.expect("validated").grid().map_err(solver("grid"))?;
    let options = TransformOptions {
        regularization: s.regularization,
        perturbation: s.perturbation,
        table_range: None,
    };
    TransformedProblem::from_spec_with(spec, grid, &options).map_err(solver("transformation"))
}

fn pipeline(cfg: &RunConfig, o: &mut Output) -> Result<(), RunError> {
    let spec = spec_of(cfg)?;
    let problem = transformed(cfg, &spec)?;
    let s = cfg.solver.as_ref().expect("validated");
    let scfg = stepper_config(cfg);
    let sol = match s.refine_tol {
        Some(tol) => {
            let r = o
                .timed("solve", || refine_until(&problem, tol, s.eps, s.max_halvings, &scfg))
                .map_err(solver("refinement"))?;
            if !r.converged {
                o.note(format_args!("warning: refinement stopped before reaching {tol:e}"));
            }
            o.write("reports/refinement.csv", |w| {
                writeln!(w, "eps [time],sup_l1_gap_to_previous [-]")?;
                for (k, e) in r.eps.iter().enumerate() {
                    let gap = if k == 0 { String::new() } else { format!("{:e}", r.gaps[k - 1]) };
                    writeln!(w, "{e:e},{gap}")?;
                }
                Ok(())
            })?;
            r.solution
        }
        None => o
            .timed("solve", || mild_solve_with(&problem, s.eps, &scfg))
            .map_err(solver("mild solve"))?,
    };
    write_solution(o, &sol)?;
    if cfg.mode == Mode::Solve {
        return Ok(());
    }

    let v = o.timed("value", || reconstruct_value(&sol));
    let grid = v.grid();
    let inner = grid.inner_range(0.8);
    o.write("fields/value.csv", |w| {
        writeln!(w, "t [time],x [state],phi [cost],phi_x [cost/state],phi_xx [cost/state^2]")?;
        for (i, t) in v.times.iter().enumerate() {
            for k in inner.clone() {
                writeln!(
                    w,
                    "{t:e},{:e},{:e},{:e},{:e}",
                    grid.x(k),
                    v.phi[i][k],
                    v.phi_x[i][k],
                    v.phi_xx[i][k]
                )?;
            }
        }
        Ok(())
    })?;
    if cfg.mode == Mode::Value {
        return Ok(());
    }

    let policy = o.timed("policy", || synthesize_feedback(&v, &problem.operands));
    o.write("policy.csv", |w| policy.write_csv(w))?;
    o.write("policy.txt", |w| policy.write_text(w))?;
    if cfg.mode == Mode::Policy {
        return Ok(());
    }

    let sim = cfg.simulation.as_ref().expect("validated");
    let mut sc = SimConfig::new(sim.paths, spec.horizon, cfg.seed);
    if let Some(dt) = sim.dt {
        sc.dt = dt;
    }
    sc.initial = sim.initial;
    sc.baselines = sim.baselines.clone();
    sc.keep_samples = sim.keep_samples;
    let cmp = o
        .timed("simulate", || compare_policies(&spec, &policy, &sc))
        .map_err(solver("simulation"))?;
    o.write("reports/simulation.csv", |w| cmp.write_csv(w))?;
    o.write("reports/summary.txt", |w| cmp.write_summary(w))?;
    if sim.keep_samples {
        o.write("reports/samples_feedback.csv", |w| cmp.feedback.write_samples_csv(w))?;
    }
    o.note(format_args!(
        "feedback {:.5} vs best constant {:.5}",
        cmp.feedback.mean,
        cmp.best_baseline().mean
    ));
    Ok(())
}

fn write_solution(o: &mut Output, sol: &MildSolution) -> Result<(), RunError> {
    let grid = sol.grid();
    o.write("fields/y.csv", |w| {
        writeln!(w, "t [time],x [state],y [-]")?;
        for (t, y) in sol.times.iter().zip(&sol.snapshots) {
            for k in 0..grid.len() {
                writeln!(w, "{t:e},{:e},{:e}", grid.x(k), y[k])?;
            }
        }
        Ok(())
    })?;
    o.write("reports/steps.csv", |w| {
        writeln!(
            w,
            "step [-],t [time],tau [time],newton_iterations [-],picard_iterations [-],residual [-],tolerance [-],out_of_table [-]"
        )?;
        let mut t = 0.0;
        for (i, d) in sol.diagnostics.iter().enumerate() {
            t += d.tau;
            writeln!(
                w,
                "{},{t:e},{:e},{},{},{:e},{:e},{}",
                i + 1,
                d.tau,
                d.newton_iterations,
                d.picard_iterations,
                d.residual,
                d.tolerance,
                d.out_of_table
            )?;
        }
        Ok(())
    })?;
    o.write("reports/energy.csv", |w| {
        writeln!(w, "step [-],t [time],energy [-],dissipation [-]")?;
        let mut t = 0.0;
        writeln!(w, "0,{t:e},{:e},", sol.energy[0])?;
        for (i, d) in sol.diagnostics.iter().enumerate() {
            t += d.tau;
            writeln!(w, "{},{t:e},{:e},{:e}", i + 1, sol.energy[i + 1], sol.dissipation[i])?;
        }
        Ok(())
    })?;
    o.note(format_args!(
        "{} steps (partial step {:?}), {} snapshots",
        sol.diagnostics.len(),
        sol.partial_step,
        sol.snapshots.len()
    ));
    Ok(())
}

fn sweep_eps(cfg: &RunConfig, o: &mut Output) -> Result<(), RunError> {
    let spec = spec_of(cfg)?;
    let problem = transformed(cfg, &spec)?;
    let s = cfg.solver.as_ref().expect("validated");
    let scfg = stepper_config(cfg);
    let mut runs = Vec::with_capacity(s.levels + 1);
    let mut eps = s.eps;
    for _ in 0..=s.levels {
        let sol = o
            .timed(&format!("solve eps={eps:e}"), || mild_solve_with(&problem, eps, &scfg))
            .map_err(solver("eps sweep"))?;
        runs.push(sol);
        eps /= 2.0;
    }
    o.write("reports/sweep_eps.csv", |w| {
        writeln!(
            w,
            "eps [time],sup_l1_gap_to_previous [-],max_energy [-],cumulative_dissipation [-],steps [-]"
        )?;
        for (k, r) in runs.iter().enumerate() {
            let gap = if k == 0 { String::new() } else { format!("{:e}", runs[k - 1].sup_l1_gap(r)) };
            let e = energy_report(r);
            writeln!(
                w,
                "{:e},{gap},{:e},{:e},{}",
                r.eps,
                e.max_energy,
                e.cumulative_dissipation,
                r.diagnostics.len()
            )?;
        }
        Ok(())
    })?;
    write_solution(o, runs.last().expect("at least one run"))
}

fn sweep_degenerate(cfg: &RunConfig, o: &mut Output) -> Result<(), RunError> {
    let spec = spec_of(cfg)?;
    let s = cfg.solver.as_ref().expect("validated");
    let grid = cfg.grid.expect("validated").grid().map_err(solver("grid"))?;
    let ladder = &cfg.degenerate.as_ref().expect("validated").ladder;
    let sweep = o
        .timed("degenerate ladder", || {
            solve_degenerate(&spec, grid, s.eps, ladder, &stepper_config(cfg))
        })
        .map_err(solver("degenerate ladder"))?;
    o.write("reports/degenerate.csv", |w| sweep.write_csv(w))?;
    o.write("fields/degenerate_final.csv", |w| {
        writeln!(w, "eps_reg [-],x [state],y [-]")?;
        for l in &sweep.levels {
            let y = l.solution.final_state();
            for k in 0..grid.len() {
                writeln!(w, "{:e},{:e},{:e}", l.regularization, grid.x(k), y[k])?;
            }
        }
        Ok(())
    })?;
    if !sweep.gaps_decreasing() {
        o.note("warning: gaps between levels do not decrease");
    }
    for l in &sweep.levels {
        if let Some((step, e)) = &l.violation {
            o.note(format_args!("warning: level {:e}, step {step}: {e}", l.regularization));
        }
    }
    Ok(())
}

fn solve_2d(cfg: &RunConfig, o: &mut Output) -> Result<(), RunError> {
    let d = cfg.two_d.as_ref().expect("validated");
    let s = cfg.solver.as_ref().expect("validated");
    let cost = cfg.problem.cost.as_ref().expect("validated").build().map_err(solver("cost"))?;
    let grid = Grid2D::new(d.half_width, d.nodes).map_err(solver("grid"))?;
    let sigma_max = (0..grid.len())
        .map(|k| {
            let (i, j) = (k % grid.side(), k / grid.side());
            d.sigma0.expr.eval(&[grid.coord(i), grid.coord(j)]).abs()
        })
        .fold(0.0, f64::max);
    let conj = ConjugateHamiltonian::from_cost(&cost, ConjugateHamiltonian::anticipated_range(sigma_max, 10.0))
        .map_err(solver("conjugation"))?;
    let a = [d.a[0].to_vec(), d.a[1].to_vec()];
    let (sig, g, g0) = (&d.sigma0.expr, &d.running.expr, &d.terminal.expr);
    let spec = NdProblemSpec::from_functions(
        grid,
        &a,
        conj,
        |x, y| sig.eval(&[x, y]),
        |x, y| g.eval(&[x, y]),
        |x, y| g0.eval(&[x, y]),
        d.horizon,
    )
    .map_err(solver("2-D setup"))?;
    for w in spec.warnings() {
        o.note(format_args!("warning: {w}"));
    }
    let sol = o.timed("solve 2-D", || mild_solve_nd(&spec, s.eps)).map_err(solver("2-D solve"))?;
    let phi = reconstruct_value_nd(&spec, sol.final_state()).map_err(solver("2-D value"))?;
    o.write("fields/y2d_final.csv", |w| sol.final_state().write_csv(w, "y at the final time"))?;
    o.write("fields/phi2d_t0.csv", |w| phi.write_csv(w, "phi at t = 0"))?;
    o.write("reports/steps2d.csv", |w| {
        writeln!(w, "step [-],t [time],residual [-],mass [-]")?;
        for (i, r) in sol.residuals.iter().enumerate() {
            let y = &sol.snapshots[i + 1];
            writeln!(w, "{},{:e},{r:e},{:e}", i + 1, sol.times[i + 1], y.integral())?;
        }
        Ok(())
    })
}

fn conjugate_table(cfg: &RunConfig, o: &mut Output) -> Result<(), RunError> {
    let t = cfg.table.expect("validated");
    let cost = cfg.problem.cost.as_ref().expect("validated").build().map_err(solver("cost"))?;
    let mut rows = Vec::with_capacity(t.nodes);
    for k in 0..t.nodes {
        let p = t.p_min + (t.p_max - t.p_min) * k as f64 / (t.nodes - 1) as f64;
        let row = (|| Ok::<_, volctl::Error>((p, conjugate(&cost, p)?, conjugate_derivative(&cost, p)?, potential(&cost, p)?)))()
            .map_err(solver("conjugation"))?;
        rows.push(row);
    }
    o.write("reports/conjugate_table.csv", |w| {
        writeln!(w, "p [cost/control],H_star [cost],H_star_prime [control],j [cost^2/control]")?;
        for (p, v, d, j) in rows {
            writeln!(w, "{p:e},{v:e},{d:e},{j:e}")?;
        }
        Ok(())
    })
}
