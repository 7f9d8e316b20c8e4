//! Volatility without a positive lower bound. `sigma^2` is replaced by
//! `sigma^2 + eps_reg` and the regularized problems are solved along a
//! decreasing ladder of `eps_reg`; the gaps between adjacent levels show the
//! limit forming.
//!
//! Each implicit step is also checked against the comparison bound
//! `|y| <= M`, where `M` is the smallest root of
//! `a M^2 - (lambda - b) M + |eta|_inf = 0` with
//! `a = |(H*)''|_inf (|m'|_inf^2 + |m|_inf |m''|_inf)` and
//! `b = |(H*)'(0)| |m''|_inf`, `m = (sigma^2 + eps_reg) / 2`.

use std::io::{self, Write};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{Field, Grid1D};
use crate::operator_b::apply_B;
use crate::problem::ProblemSpec;
use crate::resolvent::{apply_A, EllipticOperands};
use crate::stepper::{mild_solve_with, MildSolution, StepperConfig, TransformOptions, TransformedProblem};

pub const DEFAULT_LADDER: [f64; 4] = [1e-1, 1e-2, 1e-3, 1e-4];

/// Outcome of [`check_linf_bound`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinfBound {
    pub bound: f64,
    pub max_abs: f64,
    /// `bound - max_abs`.
    pub slack: f64,
}

/// The comparison constant `M` for `lambda y + A y = eta`.
pub fn linf_bound(ops: &EllipticOperands, eta_sup: f64, lambda: f64) -> Result<f64> {
    let mb = ops.multiplier_bounds();
    let lip = ops.conj.second_derivative_bound();
    let c0 = ops.conj.derivative(0.0).abs();
    let a = lip * (mb.slope * mb.slope + mb.m_max * mb.curvature);
    let b = c0 * mb.curvature;
    let gap = lambda - b;
    if !(gap > 0.0) {
        return Err(Error::NoBound { lambda });
    }
    let disc = gap * gap - 4.0 * a * eta_sup;
    if disc < 0.0 {
        return Err(Error::NoBound { lambda });
    }
    Ok(2.0 * eta_sup / (gap + disc.sqrt()))
}

/// Checks `-M <= y <= M` for a solution of `lambda y + A y = eta`. The
/// right-hand side used for `M` is `lambda y + A y` itself, so the solver
/// residual is accounted for; `eta` only enters through it.
pub fn check_linf_bound(ops: &EllipticOperands, y: &Field, eta: &Field, lambda: f64) -> Result<LinfBound> {
    let ay = apply_A(ops, y);
    let mut eta_sup = eta.sup_norm();
    for k in 0..y.len() {
        eta_sup = eta_sup.max((lambda * y[k] + ay[k]).abs());
    }
    let bound = linf_bound(ops, eta_sup, lambda)?;
    let slack_abs = 1e-9 * bound.max(1.0);
    let mut max_abs: f64 = 0.0;
    for k in 0..y.len() {
        let v = y[k].abs();
        if v > bound + slack_abs {
            return Err(Error::BoundViolated { node: k, value: v, bound });
        }
        max_abs = max_abs.max(v);
    }
    Ok(LinfBound {
        bound,
        max_abs,
        slack: bound - max_abs,
    })
}

/// One rung of the regularization ladder.
#[derive(Debug, Clone)]
pub struct DegenerateLevel {
    pub regularization: f64,
    pub solution: MildSolution,
    /// Largest `M` over all steps.
    pub bound: f64,
    /// Largest `|y|` over all steps.
    pub max_abs: f64,
    /// First failed bound check, as `(step, error)`.
    pub violation: Option<(usize, String)>,
}

#[derive(Debug, Clone)]
pub struct DegenerateSweep {
    pub levels: Vec<DegenerateLevel>,
    /// `gaps[k]`: sup-in-time `L^1` distance between levels `k` and `k + 1`.
    pub gaps: Vec<f64>,
}

impl DegenerateSweep {
    pub fn ladder(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.regularization).collect()
    }

    /// Whether the gaps strictly decrease down the ladder.
    pub fn gaps_decreasing(&self) -> bool {
        self.gaps.windows(2).all(|w| w[1] < w[0])
    }

    pub fn bounds_hold(&self) -> bool {
        self.levels.iter().all(|l| l.violation.is_none())
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "eps_reg [-],sup_l1_gap_to_previous [-],linf_bound_M [-],max_abs_y [-]")?;
        for (k, l) in self.levels.iter().enumerate() {
            let gap = if k == 0 { String::new() } else { format!("{:e}", self.gaps[k - 1]) };
            writeln!(w, "{:e},{},{:e},{:e}", l.regularization, gap, l.bound, l.max_abs)?;
        }
        Ok(())
    }
}

/// Solves the regularized problem at every level of `ladder` (in parallel)
/// with step `eps`, checking the comparison bound at every step.
pub fn solve_degenerate(
    spec: &ProblemSpec,
    grid: Grid1D,
    eps: f64,
    ladder: &[f64],
    cfg: &StepperConfig,
) -> Result<DegenerateSweep> {
    if ladder.is_empty() {
        return Err(Error::config("degenerate.ladder", "must not be empty"));
    }
    if ladder.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
        return Err(Error::config("degenerate.ladder", "levels must be positive"));
    }
    if ladder.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::config("degenerate.ladder", "must be strictly decreasing"));
    }
    let cfg = StepperConfig {
        snapshot_budget: usize::MAX,
        ..*cfg
    };
    let levels = ladder
        .par_iter()
        .map(|&level| {
            solve_level(spec, grid, eps, level, &cfg).map_err(|e| Error::Level {
                level,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let gaps = levels
        .windows(2)
        .map(|w| w[0].solution.sup_l1_gap(&w[1].solution))
        .collect();
    Ok(DegenerateSweep { levels, gaps })
}

fn solve_level(spec: &ProblemSpec, grid: Grid1D, eps: f64, level: f64, cfg: &StepperConfig) -> Result<DegenerateLevel> {
    let options = TransformOptions {
        regularization: level,
        ..TransformOptions::default()
    };
    let problem = TransformedProblem::from_spec_with(spec, grid, &options)?;
    let solution = mild_solve_with(&problem, eps, cfg)?;
    let ops = &problem.operands;
    let mut bound: f64 = 0.0;
    let mut max_abs = problem.y0.sup_norm();
    let mut violation = None;
    for (i, d) in solution.diagnostics.iter().enumerate() {
        let (prev, y) = (&solution.snapshots[i], &solution.snapshots[i + 1]);
        let lambda = 1.0 / d.tau;
        // B moves to the right-hand side; the comparison argument covers A only.
        let mut eta = problem.g1.lincomb(1.0, prev, lambda);
        if ops.perturbation() {
            eta = eta.lincomb(1.0, &apply_B(&ops.drift, y), -1.0);
        }
        match check_linf_bound(ops, y, &eta, lambda) {
            Ok(r) => {
                bound = bound.max(r.bound);
                max_abs = max_abs.max(r.max_abs);
            }
            Err(e) => {
                max_abs = max_abs.max(y.sup_norm());
                if violation.is_none() {
                    violation = Some((i + 1, e.to_string()));
                }
            }
        }
    }
    Ok(DegenerateLevel {
        regularization: level,
        solution,
        bound,
        max_abs,
        violation,
    })
}
