//! The elliptic operator `A y = -(H*(m y))'' - f y'` with `m = sigma^2 / 2`,
//! and the resolvent equation `lambda y + A y + B y = eta`.
//!
//! One implicit time step is one resolvent solve with `lambda = 1 / eps`.
//! The solver is a damped Newton method on the nodal system. When the
//! perturbation `B` is active its nonlocal part `f'' Phi(y)'` is handled
//! exactly by adding the Green variable `Psi = Phi(y)` as an unknown: the
//! pair `(y_k, Psi_k)` is interleaved so the Jacobian stays banded.
//! If Newton stalls, a Picard iteration `y <- R_{lambda+delta}(eta + delta y)`
//! takes over; each shifted resolvent is again a Newton solve and the outer
//! map is a contraction.

use crate::banded::BandMatrix;
use crate::conjugation::ConjugateHamiltonian;
use crate::error::{Error, Result};
use crate::grid::{flux_upwind, poisson_solve, second_difference, Field, Grid1D};
use crate::operator_b::{apply_B, DriftData};
use crate::problem::Coefficient;

/// Sup norms of the diffusion multiplier and its derivatives, used by the
/// comparison bounds of the degenerate path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultiplierBounds {
    /// `max m`.
    pub m_max: f64,
    /// `|m'|_inf = |sigma sigma'|_inf`.
    pub slope: f64,
    /// `|m''|_inf = |sigma sigma'' + sigma'^2|_inf`.
    pub curvature: f64,
}

/// Everything the operators `A` and `B` need on a fixed grid.
#[derive(Debug, Clone)]
pub struct EllipticOperands {
    pub conj: ConjugateHamiltonian,
    pub drift: DriftData,
    pub sigma: Field,
    /// `m = (sigma^2 + regularization) / 2`.
    pub multiplier: Field,
    rho: f64,
    regularization: f64,
    perturbation: bool,
    bounds: MultiplierBounds,
}

impl EllipticOperands {
    /// Non-degenerate operands; fails when `min |sigma|` vanishes on the grid.
    pub fn new(
        conj: ConjugateHamiltonian,
        drift: DriftData,
        volatility: &Coefficient,
    ) -> Result<Self> {
        let ops = Self::regularized(conj, drift, volatility, 0.0)?;
        if ops.rho <= 1e-12 {
            return Err(Error::DegenerateVolatility { min_abs: ops.rho });
        }
        Ok(ops)
    }

    /// Operands with `sigma^2` replaced by `sigma^2 + regularization`.
    pub fn regularized(
        conj: ConjugateHamiltonian,
        drift: DriftData,
        volatility: &Coefficient,
        regularization: f64,
    ) -> Result<Self> {
        let grid = drift.grid();
        let (sigma, s1, s2) = volatility.tabulate_with_derivatives(grid);
        let mut ops = Self::from_tables(conj, drift, sigma, &s1, &s2, regularization)?;
        if volatility.has_analytic_derivatives() {
            // sup norms on an 8x refined sampling of the same interval
            let samples = 8 * (grid.len() - 1) + 1;
            let l = grid.half_width();
            let mut b = MultiplierBounds {
                m_max: 0.0,
                slope: 0.0,
                curvature: 0.0,
            };
            for k in 0..samples {
                let x = -l + 2.0 * l * k as f64 / (samples - 1) as f64;
                let s = volatility.eval(x);
                let d1 = volatility.first_at(x).unwrap_or(0.0);
                let d2 = volatility.second_at(x).unwrap_or(0.0);
                b.m_max = b.m_max.max(0.5 * (s * s + regularization));
                b.slope = b.slope.max((s * d1).abs());
                b.curvature = b.curvature.max((s * d2 + d1 * d1).abs());
            }
            ops.bounds = b;
        }
        Ok(ops)
    }

    pub fn from_tables(
        conj: ConjugateHamiltonian,
        drift: DriftData,
        sigma: Field,
        sigma1: &Field,
        sigma2: &Field,
        regularization: f64,
    ) -> Result<Self> {
        if regularization < 0.0 {
            return Err(Error::config("regularization", "must be nonnegative"));
        }
        for (name, t) in [("sigma", &sigma), ("sigma'", sigma1), ("sigma''", sigma2)] {
            if t.values().iter().any(|v| !v.is_finite()) {
                return Err(Error::config("problem.sigma", format!("{name} table is not finite")));
            }
        }
        let multiplier = sigma.map(|s| 0.5 * (s * s + regularization));
        let rho = sigma.values().iter().fold(f64::INFINITY, |m, s| m.min(s.abs()));
        let mut bounds = MultiplierBounds {
            m_max: multiplier.sup_norm(),
            slope: 0.0,
            curvature: 0.0,
        };
        for k in 0..sigma.len() {
            bounds.slope = bounds.slope.max((sigma[k] * sigma1[k]).abs());
            bounds.curvature = bounds.curvature.max((sigma[k] * sigma2[k] + sigma1[k] * sigma1[k]).abs());
        }
        Ok(EllipticOperands {
            conj,
            drift,
            sigma,
            multiplier,
            rho,
            regularization,
            perturbation: true,
            bounds,
        })
    }

    /// Drops the perturbation `B` from every resolvent solve.
    pub fn without_perturbation(mut self) -> Self {
        self.perturbation = false;
        self
    }

    pub fn with_perturbation(mut self, on: bool) -> Self {
        self.perturbation = on;
        self
    }

    pub fn perturbation(&self) -> bool {
        self.perturbation
    }

    pub fn grid(&self) -> Grid1D {
        self.drift.grid()
    }

    /// `min |sigma|` on the grid.
    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn regularization(&self) -> f64 {
        self.regularization
    }

    pub fn multiplier_bounds(&self) -> MultiplierBounds {
        self.bounds
    }

    /// `lambda0 = |f'|_inf`.
    pub fn lambda0(&self) -> f64 {
        self.drift.lambda0()
    }

    /// `H*(m y)` nodewise.
    pub fn flux_potential(&self, y: &Field) -> Field {
        y.zip_map(&self.multiplier, |v, m| self.conj.value(m * v))
    }

    /// Ghost value of `H*(m y)` outside the mesh, where `y = 0`.
    pub fn ghost(&self) -> f64 {
        self.conj.value(0.0)
    }

    /// Number of nodes whose argument `m y` falls outside a conjugate table.
    pub fn out_of_table(&self, y: &Field) -> usize {
        (0..y.len())
            .filter(|&k| !self.conj.in_range(self.multiplier[k] * y[k]))
            .count()
    }
}

/// `A y = -(H*(m y))'' - f y'`. The transport term is taken in flux form,
/// `-(f y)' + f' y`, with `f y` upwinded by the sign of `f` on each interface.
#[allow(non_snake_case)]
pub fn apply_A(ops: &EllipticOperands, y: &Field) -> Field {
    let grid = y.grid();
    let w = ops.flux_potential(y);
    let d2 = second_difference(w.values(), ops.ghost(), grid.spacing());
    let transport = flux_upwind(y, &ops.drift.f_half);
    let mut out = Field::zeros(grid);
    for k in 0..y.len() {
        out[k] = -d2[k] - transport[k] + ops.drift.f1[k] * y[k];
    }
    out
}

/// Parameters of one resolvent solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolventConfig {
    pub lambda: f64,
    /// Target for the discrete `L^1` residual; `None` means
    /// `1e-10 * max(1, |eta|_1)`.
    pub tol_res: Option<f64>,
    pub max_newton: usize,
    /// Initial Newton step length, halved while the residual does not drop.
    pub damping: f64,
    /// Shift `delta` of the Picard fallback; `None` means `delta = lambda`.
    pub picard_shift: Option<f64>,
    pub max_picard: usize,
    /// Weight of the regularization `-nu y'' + nu H*(m y)`.
    pub nu: Option<f64>,
}

impl ResolventConfig {
    pub fn new(lambda: f64) -> Self {
        ResolventConfig {
            lambda,
            tol_res: None,
            max_newton: 100,
            damping: 1.0,
            picard_shift: None,
            max_picard: 500,
            nu: None,
        }
    }

    pub fn tolerance(&self, eta: &Field) -> f64 {
        self.tol_res.unwrap_or_else(|| 1e-10 * eta.l1_norm().max(1.0))
    }
}

/// A converged resolvent solve with its residual certificate.
#[derive(Debug, Clone)]
pub struct ResolventSolution {
    pub y: Field,
    /// `|lambda y + A y + B y - eta|_1`, recomputed from the operators.
    pub residual: f64,
    pub tolerance: f64,
    pub newton_iterations: usize,
    pub picard_iterations: usize,
    /// Nodes evaluated by conjugate-table extrapolation.
    pub out_of_table: usize,
}

/// `lambda y + A y + B y - eta` plus the `nu` terms when configured.
pub fn resolvent_residual(ops: &EllipticOperands, lambda: f64, nu: Option<f64>, eta: &Field, y: &Field) -> Field {
    let ay = apply_A(ops, y);
    let mut r = Field::zeros(y.grid());
    for k in 0..y.len() {
        r[k] = lambda * y[k] + ay[k] - eta[k];
    }
    if ops.perturbation {
        let by = apply_B(&ops.drift, y);
        for k in 0..y.len() {
            r[k] += by[k];
        }
    }
    if let Some(nu) = nu {
        let d2 = second_difference(y.values(), 0.0, y.grid().spacing());
        for k in 0..y.len() {
            r[k] += -nu * d2[k] + nu * ops.conj.value(ops.multiplier[k] * y[k]);
        }
    }
    r
}

/// Solves the resolvent equation from the initial guess `eta / lambda`.
pub fn solve_resolvent(ops: &EllipticOperands, cfg: &ResolventConfig, eta: &Field) -> Result<ResolventSolution> {
    let guess = eta.map(|v| v / cfg.lambda);
    solve_resolvent_from(ops, cfg, eta, &guess)
}

/// Solves the resolvent equation starting from `guess` (warm start).
pub fn solve_resolvent_from(
    ops: &EllipticOperands,
    cfg: &ResolventConfig,
    eta: &Field,
    guess: &Field,
) -> Result<ResolventSolution> {
    let lambda0 = ops.lambda0();
    if !(cfg.lambda > lambda0) {
        return Err(Error::ResolventParameter {
            lambda: cfg.lambda,
            lambda0,
        });
    }
    if eta.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::config("eta", "right-hand side is not finite"));
    }
    let tol = cfg.tolerance(eta);
    let newton = newton(ops, cfg.lambda, cfg.nu, eta, guess.clone(), tol, cfg)?;
    let (y, newton_iterations, mut picard_iterations) = match newton {
        NewtonOutcome::Converged { y, iterations } => (y, iterations, 0),
        NewtonOutcome::Stalled { y, iterations } => {
            let (y, picard) = picard(ops, cfg, eta, y, tol)?;
            (y, iterations, picard)
        }
    };
    let residual = resolvent_residual(ops, cfg.lambda, cfg.nu, eta, &y).l1_norm();
    if residual > tol {
        picard_iterations = picard_iterations.max(1);
        return Err(Error::NotConverged {
            iterations: newton_iterations + picard_iterations,
            residual,
            target: tol,
        });
    }
    Ok(ResolventSolution {
        out_of_table: ops.out_of_table(&y),
        y,
        residual,
        tolerance: tol,
        newton_iterations,
        picard_iterations,
    })
}

enum NewtonOutcome {
    Converged { y: Field, iterations: usize },
    Stalled { y: Field, iterations: usize },
}

fn newton(
    ops: &EllipticOperands,
    lambda: f64,
    nu: Option<f64>,
    eta: &Field,
    mut y: Field,
    tol: f64,
    cfg: &ResolventConfig,
) -> Result<NewtonOutcome> {
    let mut r = resolvent_residual(ops, lambda, nu, eta, &y);
    let mut rn = r.l1_norm();
    for it in 0..cfg.max_newton {
        if rn <= tol {
            return Ok(NewtonOutcome::Converged { y, iterations: it });
        }
        let dy = newton_direction(ops, lambda, nu, &y, &r)?;
        let mut alpha = cfg.damping;
        let mut accepted = false;
        while alpha >= 1e-8 {
            let trial = y.lincomb(1.0, &dy, alpha);
            let rt = resolvent_residual(ops, lambda, nu, eta, &trial);
            let rtn = rt.l1_norm();
            if rtn < rn {
                y = trial;
                r = rt;
                rn = rtn;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            return Ok(NewtonOutcome::Stalled { y, iterations: it + 1 });
        }
    }
    if rn <= tol {
        Ok(NewtonOutcome::Converged {
            y,
            iterations: cfg.max_newton,
        })
    } else {
        Ok(NewtonOutcome::Stalled {
            y,
            iterations: cfg.max_newton,
        })
    }
}

/// Solves `J dy = -r` for the Newton direction, with `J` the (generalized)
/// Jacobian of the residual map at `y`.
fn newton_direction(
    ops: &EllipticOperands,
    lambda: f64,
    nu: Option<f64>,
    y: &Field,
    r: &Field,
) -> Result<Field> {
    let grid = y.grid();
    let n = grid.len();
    let h = grid.spacing();
    let inv_h2 = 1.0 / (h * h);
    let coupled = ops.perturbation && ops.drift.is_nonlocal();
    let stride = if coupled { 2 } else { 1 };
    let (kl, ku) = if coupled { (3, 5) } else { (1, 1) };
    let yi = |k: usize| stride * k;
    let pi = |k: usize| stride * k + 1;
    let mut jac = BandMatrix::zeros(stride * n, kl, ku);
    let nu = nu.unwrap_or(0.0);

    // diffusion slopes d_k = (H*)'(m_k y_k) m_k
    let d: Vec<f64> = (0..n)
        .map(|k| ops.conj.derivative(ops.multiplier[k] * y[k]) * ops.multiplier[k])
        .collect();
    let drift = &ops.drift;
    // transport flux through interface j (left of node j), upwind node u
    for j in 0..=n {
        let a = drift.f_half[j];
        let u = if a > 0.0 { j } else { j.wrapping_sub(1) };
        if a == 0.0 || u >= n {
            continue;
        }
        if j < n {
            jac.add(yi(j), yi(u), a / h);
        }
        if j > 0 {
            jac.add(yi(j - 1), yi(u), -a / h);
        }
    }
    for k in 0..n {
        let row = yi(k);
        let mut diag = lambda + 2.0 * d[k] * inv_h2 + nu * (2.0 * inv_h2 + d[k]) + drift.f1[k];
        if k > 0 {
            jac.add(row, yi(k - 1), -(d[k - 1] + nu) * inv_h2);
        }
        if k + 1 < n {
            jac.add(row, yi(k + 1), -(d[k + 1] + nu) * inv_h2);
        }
        if ops.perturbation {
            diag -= drift.f1[k];
            if !coupled {
                // constant f': (c q)' = c (q_{k+1/2} - q_{k-1/2}) / h = -c y_k inside
                if k > 0 && k + 1 < n {
                    diag -= drift.f1_half[k];
                }
            }
        }
        jac.add(row, row, diag);
        if coupled {
            // (c_{k+1} q_{k+1} - c_k q_k) / h with q_j = (Psi_j - Psi_{j-1}) / h
            let slope = |j: usize| if j == 0 { 1 } else if j == n { n - 1 } else { j };
            for (j, sign) in [(k + 1, 1.0), (k, -1.0)] {
                let c = sign * drift.f1_half[j] / (h * h);
                let jj = slope(j);
                jac.add(row, pi(jj), c);
                jac.add(row, pi(jj - 1), -c);
            }
            // Green rows, scaled by h^2: -Psi_{k-1} + 2 Psi_k - Psi_{k+1} - h^2 y_k = 0
            let prow = pi(k);
            if k == 0 || k == n - 1 {
                jac.add(prow, prow, 1.0);
            } else {
                jac.add(prow, pi(k - 1), -1.0);
                jac.add(prow, prow, 2.0);
                jac.add(prow, pi(k + 1), -1.0);
                jac.add(prow, yi(k), -h * h);
            }
        }
    }
    let mut rhs = vec![0.0; stride * n];
    for k in 0..n {
        rhs[yi(k)] = -r[k];
    }
    let sol = jac.factor()?.solve(&rhs);
    Ok(Field::from_values(grid, (0..n).map(|k| sol[yi(k)]).collect()))
}

fn picard(
    ops: &EllipticOperands,
    cfg: &ResolventConfig,
    eta: &Field,
    mut y: Field,
    tol: f64,
) -> Result<(Field, usize)> {
    let delta = cfg.picard_shift.unwrap_or(cfg.lambda);
    let shifted = cfg.lambda + delta;
    let mut rn = resolvent_residual(ops, cfg.lambda, cfg.nu, eta, &y).l1_norm();
    for it in 0..cfg.max_picard {
        if rn <= tol {
            return Ok((y, it));
        }
        let rhs = eta.lincomb(1.0, &y, delta);
        let inner_tol = 0.25 * tol;
        match newton(ops, shifted, cfg.nu, &rhs, y.clone(), inner_tol, cfg)? {
            NewtonOutcome::Converged { y: next, .. } | NewtonOutcome::Stalled { y: next, .. } => y = next,
        }
        rn = resolvent_residual(ops, cfg.lambda, cfg.nu, eta, &y).l1_norm();
    }
    if rn <= tol {
        return Ok((y, cfg.max_picard));
    }
    Err(Error::NotConverged {
        iterations: cfg.max_picard,
        residual: rn,
        target: tol,
    })
}

/// Poisson potential of a resolvent solution, `Phi(y)`; re-exported for
/// diagnostics that need the Green variable.
pub fn green_variable(y: &Field) -> Field {
    poisson_solve(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::ProblemSpec;
    use proptest::prelude::*;

    fn heat_ops(grid: Grid1D) -> EllipticOperands {
        EllipticOperands::new(
            ConjugateHamiltonian::identity(),
            DriftData::zero(grid),
            &Coefficient::constant(std::f64::consts::SQRT_2),
        )
        .unwrap()
        .without_perturbation()
    }

    fn desk_ops(grid: Grid1D) -> EllipticOperands {
        let desk = ProblemSpec::desk();
        EllipticOperands::new(
            ConjugateHamiltonian::Quadratic {
                alpha1: 1.0,
                alpha2: 0.0,
            },
            DriftData::new(&desk.drift, grid),
            &desk.volatility,
        )
        .unwrap()
    }

    #[test]
    fn apply_a_examples() {
        let g = Grid1D::new(2.0, 41).unwrap();
        let zero = Field::zeros(g);
        assert_eq!(apply_A(&desk_ops(g), &zero), zero);

        let sq = Field::from_fn(g, |x| x * x);
        let ay = apply_A(&heat_ops(g), &sq);
        for k in 1..g.len() - 1 {
            assert!((ay[k] + 2.0).abs() < 1e-10);
        }

        let transport = EllipticOperands::new(
            ConjugateHamiltonian::Affine {
                slope: 0.0,
                intercept: 0.0,
            },
            DriftData::from_tables(Field::from_fn(g, |_| 1.0), Field::zeros(g), Field::zeros(g)),
            &Coefficient::constant(1.0),
        )
        .unwrap();
        let ay = apply_A(&transport, &Field::from_fn(g, |x| x));
        for k in 1..g.len() - 1 {
            assert!((ay[k] + 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let g = Grid1D::new(5.0, 51).unwrap();
        let ops = desk_ops(g);
        let sol = solve_resolvent(&ops, &ResolventConfig::new(3.0), &Field::zeros(g)).unwrap();
        assert_eq!(sol.y, Field::zeros(g));
        assert_eq!(sol.newton_iterations, 0);
    }

    #[test]
    fn lambda_must_exceed_lambda0() {
        let g = Grid1D::new(5.0, 51).unwrap();
        let ops = desk_ops(g);
        let err = solve_resolvent(&ops, &ResolventConfig::new(1.0), &Field::zeros(g)).unwrap_err();
        assert!(matches!(err, Error::ResolventParameter { .. }));
    }

    #[test]
    fn linear_case_matches_dense_solve() {
        let g = Grid1D::new(4.0, 81).unwrap();
        let ops = heat_ops(g);
        let lambda = 5.0;
        let eta = Field::from_fn(g, |x| (-(x - 0.5).powi(2)).exp() - 0.3 * (-(x + 1.0).powi(2) * 3.0).exp());
        let y = solve_resolvent(&ops, &ResolventConfig::new(lambda), &eta).unwrap().y;
        // independent oracle: dense (lambda I - D2) with zero ghosts
        let n = g.len();
        let h2 = g.spacing().powi(2);
        let mut a = nalgebra::DMatrix::<f64>::zeros(n, n);
        for k in 0..n {
            a[(k, k)] = lambda + 2.0 / h2;
            if k > 0 {
                a[(k, k - 1)] = -1.0 / h2;
            }
            if k + 1 < n {
                a[(k, k + 1)] = -1.0 / h2;
            }
        }
        let x = a.lu().solve(&nalgebra::DVector::from_vec(eta.values().to_vec())).unwrap();
        for k in 0..n {
            assert!((y[k] - x[k]).abs() <= 1e-10, "node {k}: {} vs {}", y[k], x[k]);
        }
    }

    #[test]
    fn residual_certificate_is_recomputed() {
        let g = Grid1D::new(10.0, 201).unwrap();
        let ops = desk_ops(g);
        let eta = Field::from_fn(g, |x| 20.0 * (2.0 - 4.0 * x * x) * (-x * x).exp());
        let cfg = ResolventConfig::new(20.0);
        let sol = solve_resolvent(&ops, &cfg, &eta).unwrap();
        let r = resolvent_residual(&ops, 20.0, None, &eta, &sol.y).l1_norm();
        assert_eq!(r, sol.residual);
        assert!(r <= cfg.tolerance(&eta));
    }

    #[test]
    fn picard_fallback_converges() {
        // max_newton = 1 forces the fallback path
        let g = Grid1D::new(10.0, 201).unwrap();
        let ops = desk_ops(g);
        let eta = Field::from_fn(g, |x| 20.0 * (2.0 - 4.0 * x * x) * (-x * x).exp());
        let mut cfg = ResolventConfig::new(20.0);
        let reference = solve_resolvent(&ops, &cfg, &eta).unwrap();
        cfg.max_newton = 1;
        let sol = solve_resolvent(&ops, &cfg, &eta).unwrap();
        assert!(sol.picard_iterations > 0);
        assert!(sol.y.l1_distance(&reference.y) < 1e-9);
    }

    #[test]
    fn nu_homotopy_converges() {
        let g = Grid1D::new(10.0, 201).unwrap();
        let ops = desk_ops(g);
        let eta = Field::from_fn(g, |x| 20.0 * (2.0 - 4.0 * x * x) * (-x * x).exp());
        let mut cfg = ResolventConfig::new(20.0);
        let base = solve_resolvent(&ops, &cfg, &eta).unwrap().y;
        let mut gaps = Vec::new();
        for nu in [1e-2, 1e-4, 1e-6] {
            cfg.nu = Some(nu);
            let y = solve_resolvent(&ops, &cfg, &eta).unwrap().y;
            gaps.push(y.l1_distance(&base));
        }
        assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2], "{gaps:?}");
        assert!(gaps[2] < 1e-5);
    }

    fn bump_field(g: Grid1D, coeffs: &[f64]) -> Field {
        // smooth random right-hand sides: sum of Gaussian bumps
        Field::from_fn(g, |x| {
            coeffs
                .chunks(2)
                .enumerate()
                .map(|(i, c)| {
                    let centre = -6.0 + 1.5 * i as f64 + c[1];
                    20.0 * c[0] * (-(x - centre).powi(2) * 2.0).exp()
                })
                .sum()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn l1_contraction(a in proptest::collection::vec(-1.0..1.0f64, 16), b in proptest::collection::vec(-1.0..1.0f64, 16)) {
            let g = Grid1D::new(10.0, 201).unwrap();
            let ops = desk_ops(g).without_perturbation();
            let lambda = 2.0 * ops.lambda0() + 1.0;
            let cfg = ResolventConfig::new(lambda);
            let (e1, e2) = (bump_field(g, &a), bump_field(g, &b));
            let s1 = solve_resolvent(&ops, &cfg, &e1).unwrap();
            let s2 = solve_resolvent(&ops, &cfg, &e2).unwrap();
            let tol = s1.tolerance.max(s2.tolerance);
            let lhs = s1.y.l1_distance(&s2.y);
            let rhs = e1.l1_distance(&e2) / (lambda - ops.lambda0()) + 10.0 * tol;
            prop_assert!(lhs <= rhs, "{} > {}", lhs, rhs);
        }

        #[test]
        fn order_preserving_without_drift(a in proptest::collection::vec(0.0..1.0f64, 16), b in proptest::collection::vec(-1.0..1.0f64, 16)) {
            let g = Grid1D::new(10.0, 201).unwrap();
            let ops = EllipticOperands::new(
                ConjugateHamiltonian::Quadratic { alpha1: 1.0, alpha2: 0.0 },
                DriftData::zero(g),
                &ProblemSpec::desk().volatility,
            ).unwrap().without_perturbation();
            let cfg = ResolventConfig::new(4.0);
            let low = bump_field(g, &b);
            let high = low.lincomb(1.0, &bump_field(g, &a).map(f64::abs), 1.0);
            let yl = solve_resolvent(&ops, &cfg, &low).unwrap();
            let yh = solve_resolvent(&ops, &cfg, &high).unwrap();
            for k in 0..g.len() {
                prop_assert!(yh.y[k] >= yl.y[k] - 10.0 * yl.tolerance);
            }
        }
    }
}
