//! Implicit Euler for `y_t + A y + B y = g1`, `y(0) = y0`: each step is one
//! resolvent solve with `lambda = 1 / eps` and `eta = g1 + y_prev / eps`.
//! The piecewise-constant interpolant of the steps converges in `L^1` as
//! `eps -> 0`; [`refine_until`] measures that convergence.

use crate::conjugation::ConjugateHamiltonian;
use crate::error::{Error, Result};
use crate::grid::{cell_differences, Field, Grid1D};
use crate::operator_b::DriftData;
use crate::problem::ProblemSpec;
use crate::resolvent::{solve_resolvent_from, EllipticOperands, ResolventConfig, ResolventSolution};

/// Options for building the transformed problem from a [`ProblemSpec`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformOptions {
    /// Added to `sigma^2`; zero on the non-degenerate path.
    pub regularization: f64,
    /// Whether the drift perturbation `B` enters the resolvent.
    pub perturbation: bool,
    /// Symmetric conjugate-table range for custom costs; `None` derives it
    /// from the data.
    pub table_range: Option<f64>,
}

impl Default for TransformOptions {
    fn default() -> Self {
        TransformOptions {
            regularization: 0.0,
            perturbation: true,
            table_range: None,
        }
    }
}

/// `y0 = -g0''` and `g1 = -g''` together with the operators.
#[derive(Debug, Clone)]
pub struct TransformedProblem {
    pub operands: EllipticOperands,
    pub y0: Field,
    pub g1: Field,
    pub horizon: f64,
}

impl TransformedProblem {
    pub fn new(operands: EllipticOperands, y0: Field, g1: Field, horizon: f64) -> Result<Self> {
        let grid = operands.grid();
        if y0.grid() != grid || g1.grid() != grid {
            return Err(Error::config("problem", "initial datum and source must share the operator grid"));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::config("problem.horizon", format!("must be positive, got {horizon}")));
        }
        if y0.values().iter().chain(g1.values()).any(|v| !v.is_finite()) {
            return Err(Error::config("problem", "initial datum or source is not finite"));
        }
        Ok(TransformedProblem {
            operands,
            y0,
            g1,
            horizon,
        })
    }

    pub fn from_spec(spec: &ProblemSpec, grid: Grid1D) -> Result<Self> {
        Self::from_spec_with(spec, grid, &TransformOptions::default())
    }

    pub fn from_spec_with(spec: &ProblemSpec, grid: Grid1D, options: &TransformOptions) -> Result<Self> {
        spec.validate()?;
        let (_, _, g0xx) = spec.terminal.tabulate_with_derivatives(grid);
        let (_, _, gxx) = spec.running.tabulate_with_derivatives(grid);
        let y0 = g0xx.map(|v| -v);
        let g1 = gxx.map(|v| -v);
        let range = match options.table_range {
            Some(r) => r,
            None => {
                let sigma = spec.volatility.tabulate(grid);
                let y_sup = y0.sup_norm() + spec.horizon * g1.sup_norm();
                ConjugateHamiltonian::anticipated_range(sigma.sup_norm(), y_sup)
            }
        };
        let conj = ConjugateHamiltonian::from_cost(&spec.cost, range)?;
        let drift = DriftData::new(&spec.drift, grid);
        let operands = if options.regularization > 0.0 {
            EllipticOperands::regularized(conj, drift, &spec.volatility, options.regularization)?
        } else {
            EllipticOperands::new(conj, drift, &spec.volatility)?
        };
        Self::new(operands.with_perturbation(options.perturbation), y0, g1, spec.horizon)
    }

    pub fn grid(&self) -> Grid1D {
        self.operands.grid()
    }

    /// Largest admissible time step, `1 / (2 |f'|_inf)`.
    pub fn max_step(&self) -> f64 {
        let l0 = self.operands.lambda0();
        if l0 > 0.0 {
            0.5 / l0
        } else {
            f64::INFINITY
        }
    }

    fn check_step(&self, eps: f64) -> Result<()> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::config("solver.eps", format!("must be positive, got {eps}")));
        }
        let max_eps = self.max_step();
        if eps >= max_eps {
            return Err(Error::StepTooLarge { eps, max_eps });
        }
        Ok(())
    }
}

/// Settings shared by every step of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepperConfig {
    /// Template for the per-step resolvent solves; `lambda` is overwritten.
    pub resolvent: ResolventConfig,
    /// Maximal number of stored snapshots before switching to strided storage.
    pub snapshot_budget: usize,
}

impl Default for StepperConfig {
    fn default() -> Self {
        StepperConfig {
            resolvent: ResolventConfig::new(1.0),
            snapshot_budget: 20_000,
        }
    }
}

/// Resolvent diagnostics of one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDiagnostics {
    pub tau: f64,
    pub newton_iterations: usize,
    pub picard_iterations: usize,
    pub residual: f64,
    pub tolerance: f64,
    pub out_of_table: usize,
}

/// The piecewise-constant implicit-Euler solution.
#[derive(Debug, Clone)]
pub struct MildSolution {
    pub eps: f64,
    pub horizon: f64,
    /// Number of full steps, `floor(T / eps)`.
    pub steps: usize,
    /// Length of the final shortened step, when one was taken.
    pub partial_step: Option<f64>,
    /// Every `stride`-th state (and always the last), with its time.
    pub times: Vec<f64>,
    pub snapshots: Vec<Field>,
    pub stride: usize,
    pub diagnostics: Vec<StepDiagnostics>,
    /// `E^i = h sum j(m y^i) / sigma^2` for every step `i`, including `i = 0`.
    pub energy: Vec<f64>,
    /// `D^i = h sum (diff of H*(m y^i))^2` for every step `i >= 1`.
    pub dissipation: Vec<f64>,
}

impl MildSolution {
    pub fn grid(&self) -> Grid1D {
        self.snapshots[0].grid()
    }

    pub fn final_state(&self) -> &Field {
        self.snapshots.last().expect("at least the initial snapshot")
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("at least the initial snapshot")
    }

    /// Stored snapshot in force at time `t`: the last one with time `<= t`.
    pub fn at_time(&self, t: f64) -> &Field {
        let slack = 1e-9 * self.eps;
        let idx = self.times.partition_point(|&s| s <= t + slack);
        &self.snapshots[idx.saturating_sub(1)]
    }

    /// `sup_t |y_self(t) - y_other(t)|_1` over the snapshot times of `self`.
    pub fn sup_l1_gap(&self, other: &MildSolution) -> f64 {
        self.times
            .iter()
            .zip(&self.snapshots)
            .map(|(&t, y)| y.l1_distance(other.at_time(t)))
            .fold(0.0, f64::max)
    }
}

/// One implicit step of length `eps` from `y_prev`.
pub fn step(problem: &TransformedProblem, eps: f64, y_prev: &Field) -> Result<Field> {
    step_with(problem, eps, y_prev, &StepperConfig::default()).map(|s| s.y)
}

pub fn step_with(
    problem: &TransformedProblem,
    eps: f64,
    y_prev: &Field,
    cfg: &StepperConfig,
) -> Result<ResolventSolution> {
    problem.check_step(eps)?;
    raw_step(problem, eps, y_prev, cfg)
}

fn raw_step(problem: &TransformedProblem, tau: f64, y_prev: &Field, cfg: &StepperConfig) -> Result<ResolventSolution> {
    let lambda = 1.0 / tau;
    let eta = problem.g1.lincomb(1.0, y_prev, lambda);
    let rc = ResolventConfig { lambda, ..cfg.resolvent };
    solve_resolvent_from(&problem.operands, &rc, &eta, y_prev)
}

/// Runs `floor(T / eps)` steps from `y0`, plus a shortened final step when
/// the remainder exceeds `eps / 100`.
pub fn mild_solve(problem: &TransformedProblem, eps: f64) -> Result<MildSolution> {
    mild_solve_with(problem, eps, &StepperConfig::default())
}

pub fn mild_solve_with(problem: &TransformedProblem, eps: f64, cfg: &StepperConfig) -> Result<MildSolution> {
    problem.check_step(eps)?;
    let t = problem.horizon;
    let steps = (t / eps + 1e-9).floor() as usize;
    let remainder = t - steps as f64 * eps;
    let partial_step = (steps >= 1 && remainder > eps / 100.0).then_some(remainder);
    let total = steps + usize::from(partial_step.is_some());
    let budget = cfg.snapshot_budget.max(2);
    let stride = if total < budget { 1 } else { total.div_ceil(budget - 1) };

    let mut sol = MildSolution {
        eps,
        horizon: t,
        steps,
        partial_step,
        times: vec![0.0],
        snapshots: vec![problem.y0.clone()],
        stride,
        diagnostics: Vec::with_capacity(total),
        energy: vec![energy_density(&problem.operands, &problem.y0)],
        dissipation: Vec::with_capacity(total),
    };
    let mut y = problem.y0.clone();
    let mut time = 0.0;
    for i in 0..total {
        let tau = if i < steps { eps } else { remainder };
        let s = raw_step(problem, tau, &y, cfg).map_err(|e| Error::Step {
            step: i + 1,
            source: Box::new(e),
        })?;
        sol.diagnostics.push(StepDiagnostics {
            tau,
            newton_iterations: s.newton_iterations,
            picard_iterations: s.picard_iterations,
            residual: s.residual,
            tolerance: s.tolerance,
            out_of_table: s.out_of_table,
        });
        y = s.y;
        time = if i < steps { (i + 1) as f64 * eps } else { t };
        sol.energy.push(energy_density(&problem.operands, &y));
        sol.dissipation.push(dissipation(&problem.operands, &y));
        if (i + 1) % stride == 0 && i + 1 < total {
            sol.times.push(time);
            sol.snapshots.push(y.clone());
        }
    }
    if total > 0 {
        sol.times.push(time);
        sol.snapshots.push(y);
    }
    Ok(sol)
}

/// `h sum j(m y) / (2 m)`.
pub fn energy_density(ops: &EllipticOperands, y: &Field) -> f64 {
    let h = y.grid().spacing();
    (0..y.len())
        .map(|k| {
            let m = ops.multiplier[k];
            ops.conj.potential(m * y[k]) / (2.0 * m)
        })
        .sum::<f64>()
        * h
}

/// `h sum ((H*(m y))')^2` over all cells, ghost cells included.
pub fn dissipation(ops: &EllipticOperands, y: &Field) -> f64 {
    let h = y.grid().spacing();
    let w = ops.flux_potential(y);
    cell_differences(w.values(), ops.ghost(), h).iter().map(|d| d * d).sum::<f64>() * h
}

/// Energy diagnostics of a finished run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyReport {
    /// `max_i E^i`.
    pub max_energy: f64,
    /// `sum_i tau_i D^i`.
    pub cumulative_dissipation: f64,
    /// `max_k (2 E^k + sum_{i <= k} tau_i D^i)`, the measured constant of
    /// the energy estimate.
    pub implied_constant: f64,
    pub finite: bool,
}

pub fn energy_report(sol: &MildSolution) -> EnergyReport {
    let mut cumulative = 0.0;
    let mut implied = 2.0 * sol.energy[0];
    for (i, d) in sol.diagnostics.iter().enumerate() {
        cumulative += d.tau * sol.dissipation[i];
        implied = f64::max(implied, 2.0 * sol.energy[i + 1] + cumulative);
    }
    let max_energy = sol.energy.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    EnergyReport {
        max_energy,
        cumulative_dissipation: cumulative,
        implied_constant: implied,
        finite: max_energy.is_finite() && cumulative.is_finite() && implied.is_finite(),
    }
}

/// Outcome of [`refine_until`].
#[derive(Debug, Clone)]
pub struct Refinement {
    /// The finest solution computed.
    pub solution: MildSolution,
    /// Step sizes of all runs, coarse to fine.
    pub eps: Vec<f64>,
    /// `gaps[k]` compares run `k` with run `k + 1` over run `k`'s snapshot times.
    pub gaps: Vec<f64>,
    /// False when the halving budget ran out before the gap fell below `tol`.
    pub converged: bool,
}

/// Halves `eps` from `eps0` until the sup-in-time `L^1` gap between
/// successive runs drops to `tol`, at most `max_halvings` times.
pub fn refine_until(
    problem: &TransformedProblem,
    tol: f64,
    eps0: f64,
    max_halvings: usize,
    cfg: &StepperConfig,
) -> Result<Refinement> {
    if !(tol > 0.0) {
        return Err(Error::config("solver.refine_tol", "must be positive"));
    }
    let mut coarse = mild_solve_with(problem, eps0, cfg)?;
    let mut eps = vec![eps0];
    let mut gaps = Vec::new();
    for _ in 0..max_halvings.max(1) {
        let fine = mild_solve_with(problem, coarse.eps / 2.0, cfg)?;
        let gap = coarse.sup_l1_gap(&fine);
        eps.push(fine.eps);
        gaps.push(gap);
        coarse = fine;
        if gap <= tol {
            return Ok(Refinement {
                solution: coarse,
                eps,
                gaps,
                converged: true,
            });
        }
    }
    Ok(Refinement {
        solution: coarse,
        eps,
        gaps,
        converged: false,
    })
}
