//! The drift-free problem in two space dimensions,
//! `y_t - L(H*(sigma0^2 y / 2)) = g1` with `L z = sum_ij b_ij z_ij` and
//! `b = a a^T`, on a truncated square with homogeneous Dirichlet data.
//!
//! The mixed derivative uses the seven-point stencil whose off-diagonal
//! weights are nonnegative when `b11, b22 >= |b12|`: for `b12 >= 0`,
//! `2 z_xy ~ (z[+,+] - z[+,0] - z[0,+] + 2 z[0,0] - z[-,0] - z[0,-] + z[-,-]) / h^2`,
//! mirrored for `b12 < 0`. It is exact on `x y` and vanishes on `x^2`, `y^2`.

use std::io::{self, Write};
use std::ops::{Index, IndexMut};

use crate::banded::BandMatrix;
use crate::conjugation::ConjugateHamiltonian;
use crate::error::{Error, Result};

/// Uniform square mesh on `[-L, L]^2`, `nodes` per side (odd, at least 5).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2D {
    half_width: f64,
    nodes: usize,
}

impl Grid2D {
    pub fn new(half_width: f64, nodes: usize) -> Result<Self> {
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::config("grid.half_width", format!("must be positive, got {half_width}")));
        }
        if nodes < 5 || nodes.is_multiple_of(2) {
            return Err(Error::config("grid.nodes", format!("must be odd and >= 5, got {nodes}")));
        }
        Ok(Grid2D { half_width, nodes })
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    /// Nodes per side.
    pub fn side(&self) -> usize {
        self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes * self.nodes
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / (self.nodes - 1) as f64
    }

    pub fn coord(&self, i: usize) -> f64 {
        let c = (self.nodes - 1) / 2;
        (i as f64 - c as f64) * self.spacing()
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i + self.nodes * j
    }

    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i + 1 == self.nodes || j + 1 == self.nodes
    }
}

/// Values at the nodes of a [`Grid2D`], `x` index fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Field2D {
    grid: Grid2D,
    values: Vec<f64>,
}

impl Field2D {
    pub fn zeros(grid: Grid2D) -> Self {
        Field2D {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn from_fn(grid: Grid2D, f: impl Fn(f64, f64) -> f64) -> Self {
        let n = grid.side();
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..n {
            for i in 0..n {
                values.push(f(grid.coord(i), grid.coord(j)));
            }
        }
        Field2D { grid, values }
    }

    pub fn from_values(grid: Grid2D, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), grid.len(), "value count must match the grid");
        Field2D { grid, values }
    }

    pub fn grid(&self) -> Grid2D {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    pub fn l1_norm(&self) -> f64 {
        let h = self.grid.spacing();
        self.values.iter().map(|v| v.abs()).sum::<f64>() * h * h
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn integral(&self) -> f64 {
        let h = self.grid.spacing();
        self.values.iter().sum::<f64>() * h * h
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field2D {
        Field2D {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn lincomb(&self, a: f64, other: &Field2D, b: f64) -> Field2D {
        Field2D {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(x, y)| a * x + b * y).collect(),
        }
    }

    pub fn l1_distance(&self, other: &Field2D) -> f64 {
        let h = self.grid.spacing();
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).sum::<f64>() * h * h
    }

    /// CSV with `#` metadata lines, then `i, j, x, y, value` rows.
    pub fn write_csv<W: Write>(&self, mut w: W, label: &str) -> io::Result<()> {
        writeln!(w, "# {label}")?;
        writeln!(w, "# half_width {:e}", self.grid.half_width())?;
        writeln!(w, "# nodes_per_side {}", self.grid.side())?;
        writeln!(w, "i [-],j [-],x [state],y [state],value [-]")?;
        let n = self.grid.side();
        for j in 0..n {
            for i in 0..n {
                writeln!(w, "{i},{j},{:e},{:e},{:e}", self.grid.coord(i), self.grid.coord(j), self.at(i, j))?;
            }
        }
        Ok(())
    }
}

impl Index<usize> for Field2D {
    type Output = f64;
    fn index(&self, k: usize) -> &f64 {
        &self.values[k]
    }
}

impl IndexMut<usize> for Field2D {
    fn index_mut(&mut self, k: usize) -> &mut f64 {
        &mut self.values[k]
    }
}

/// Symmetric diffusion matrix `b = a a^T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diffusion2 {
    pub b11: f64,
    pub b12: f64,
    pub b22: f64,
}

impl Diffusion2 {
    /// `a` is given by its two rows, each of length `m >= 1`.
    pub fn from_factor(a: &[Vec<f64>; 2]) -> Result<Self> {
        if a[0].is_empty() || a[0].len() != a[1].len() {
            return Err(Error::config("nd.a", "rows must be non-empty and of equal length"));
        }
        let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(p, q)| p * q).sum::<f64>();
        Ok(Diffusion2 {
            b11: dot(&a[0], &a[0]),
            b12: dot(&a[0], &a[1]),
            b22: dot(&a[1], &a[1]),
        })
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let mean = 0.5 * (self.b11 + self.b22);
        let r = (0.25 * (self.b11 - self.b22).powi(2) + self.b12 * self.b12).sqrt();
        mean - r
    }

    /// Whether the discrete operator has nonnegative off-diagonal weights.
    pub fn is_monotone(&self) -> bool {
        self.b11 >= self.b12.abs() && self.b22 >= self.b12.abs()
    }

    /// Stencil weights `(di, dj, w)` of `h^2 L`.
    fn stencil(&self) -> [(isize, isize, f64); 7] {
        let c = self.b12.abs();
        let (da, db) = if self.b12 >= 0.0 { ((1, 1), (-1, -1)) } else { ((1, -1), (-1, 1)) };
        [
            (0, 0, -2.0 * self.b11 - 2.0 * self.b22 + 2.0 * c),
            (1, 0, self.b11 - c),
            (-1, 0, self.b11 - c),
            (0, 1, self.b22 - c),
            (0, -1, self.b22 - c),
            (da.0, da.1, c),
            (db.0, db.1, c),
        ]
    }
}

/// `L z` with the value `ghost` outside the grid.
fn apply_stencil(b: &Diffusion2, z: &Field2D, ghost: f64) -> Field2D {
    let grid = z.grid();
    let n = grid.side() as isize;
    let inv_h2 = 1.0 / grid.spacing().powi(2);
    let st = b.stencil();
    let mut out = Field2D::zeros(grid);
    for j in 0..n {
        for i in 0..n {
            let mut s = 0.0;
            for &(di, dj, w) in &st {
                if w == 0.0 {
                    continue;
                }
                let (p, q) = (i + di, j + dj);
                let v = if p < 0 || q < 0 || p >= n || q >= n {
                    ghost
                } else {
                    z.at(p as usize, q as usize)
                };
                s += w * v;
            }
            out[grid.index(i as usize, j as usize)] = s * inv_h2;
        }
    }
    out
}

/// `L f` for a function known off the grid too.
#[allow(non_snake_case)]
pub fn apply_L_fn(b: &Diffusion2, grid: Grid2D, f: impl Fn(f64, f64) -> f64) -> Field2D {
    let h = grid.spacing();
    let st = b.stencil();
    Field2D::from_fn(grid, |x, y| {
        st.iter()
            .filter(|s| s.2 != 0.0)
            .map(|&(di, dj, w)| w * f(x + di as f64 * h, y + dj as f64 * h))
            .sum::<f64>()
            / (h * h)
    })
}

/// The two-dimensional problem.
#[derive(Debug, Clone)]
pub struct NdProblemSpec {
    pub grid: Grid2D,
    pub diffusion: Diffusion2,
    pub conj: ConjugateHamiltonian,
    pub sigma0: Field2D,
    /// `sigma0^2 / 2`.
    pub multiplier: Field2D,
    /// `y0 = -L g0`.
    pub y0: Field2D,
    /// `g1 = -L g`.
    pub g1: Field2D,
    pub horizon: f64,
    rho0: f64,
}

impl NdProblemSpec {
    pub fn from_tables(
        diffusion: Diffusion2,
        conj: ConjugateHamiltonian,
        sigma0: Field2D,
        y0: Field2D,
        g1: Field2D,
        horizon: f64,
    ) -> Result<Self> {
        let grid = sigma0.grid();
        if y0.grid() != grid || g1.grid() != grid {
            return Err(Error::config("nd", "tables must share one grid"));
        }
        if !(diffusion.min_eigenvalue() > 0.0) {
            return Err(Error::config(
                "nd.a",
                format!("b = a a^T must be positive definite (min eigenvalue {:.3e})", diffusion.min_eigenvalue()),
            ));
        }
        let rho0 = sigma0.values().iter().fold(f64::INFINITY, |m, s| m.min(s.abs()));
        if rho0 <= 1e-12 {
            return Err(Error::DegenerateVolatility { min_abs: rho0 });
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::config("problem.horizon", format!("must be positive, got {horizon}")));
        }
        let multiplier = sigma0.map(|s| 0.5 * s * s);
        Ok(NdProblemSpec {
            grid,
            diffusion,
            conj,
            sigma0,
            multiplier,
            y0,
            g1,
            horizon,
            rho0,
        })
    }

    /// Builds `y0 = -L g0` and `g1 = -L g` by applying the stencil to the
    /// functions themselves.
    #[allow(clippy::too_many_arguments)]
    pub fn from_functions(
        grid: Grid2D,
        a: &[Vec<f64>; 2],
        conj: ConjugateHamiltonian,
        sigma0: impl Fn(f64, f64) -> f64,
        g: impl Fn(f64, f64) -> f64,
        g0: impl Fn(f64, f64) -> f64,
        horizon: f64,
    ) -> Result<Self> {
        let diffusion = Diffusion2::from_factor(a)?;
        let y0 = apply_L_fn(&diffusion, grid, g0).map(|v| -v);
        let g1 = apply_L_fn(&diffusion, grid, g).map(|v| -v);
        Self::from_tables(diffusion, conj, Field2D::from_fn(grid, sigma0), y0, g1, horizon)
    }

    pub fn rho0(&self) -> f64 {
        self.rho0
    }

    /// Setup warnings, e.g. a stencil that is not monotone.
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if !self.diffusion.is_monotone() {
            w.push(format!(
                "b12 = {} exceeds min(b11, b22) = {}: the stencil is not monotone and comparison properties are not guaranteed",
                self.diffusion.b12,
                self.diffusion.b11.min(self.diffusion.b22)
            ));
        }
        w
    }
}

/// `L z` with `z = 0` outside the grid.
#[allow(non_snake_case)]
pub fn apply_L(spec: &NdProblemSpec, z: &Field2D) -> Field2D {
    apply_stencil(&spec.diffusion, z, 0.0)
}

/// `lambda y - L(H*(m y)) - eta`.
pub fn resolvent_residual_nd(spec: &NdProblemSpec, lambda: f64, eta: &Field2D, y: &Field2D) -> Field2D {
    let mut w = Field2D::zeros(y.grid());
    for k in 0..y.values().len() {
        w[k] = spec.conj.value(spec.multiplier[k] * y[k]);
    }
    let lw = apply_stencil(&spec.diffusion, &w, spec.conj.value(0.0));
    let mut r = Field2D::zeros(y.grid());
    for k in 0..y.values().len() {
        r[k] = lambda * y[k] - lw[k] - eta[k];
    }
    r
}

#[derive(Debug, Clone)]
pub struct ResolventSolution2D {
    pub y: Field2D,
    pub residual: f64,
    pub tolerance: f64,
    pub iterations: usize,
}

/// Solves `lambda y - L(H*(m y)) = eta` by damped Newton from `guess`, to
/// `|residual|_1 <= 1e-10 max(1, |eta|_1)`.
pub fn solve_resolvent_nd(
    spec: &NdProblemSpec,
    lambda: f64,
    eta: &Field2D,
    guess: &Field2D,
    max_iterations: usize,
) -> Result<ResolventSolution2D> {
    if !(lambda > 0.0) {
        return Err(Error::ResolventParameter { lambda, lambda0: 0.0 });
    }
    let tol = 1e-10 * eta.l1_norm().max(1.0);
    let grid = spec.grid;
    let n = grid.side();
    let inv_h2 = 1.0 / grid.spacing().powi(2);
    let st = spec.diffusion.stencil();
    let mut y = guess.clone();
    let mut r = resolvent_residual_nd(spec, lambda, eta, &y);
    let mut rn = r.l1_norm();
    for it in 0..max_iterations {
        if rn <= tol {
            return Ok(ResolventSolution2D {
                y,
                residual: rn,
                tolerance: tol,
                iterations: it,
            });
        }
        let d: Vec<f64> = (0..grid.len())
            .map(|k| spec.conj.derivative(spec.multiplier[k] * y[k]) * spec.multiplier[k])
            .collect();
        let mut jac = BandMatrix::zeros(grid.len(), n + 1, n + 1);
        for j in 0..n as isize {
            for i in 0..n as isize {
                let row = grid.index(i as usize, j as usize);
                jac.add(row, row, lambda);
                for &(di, dj, w) in &st {
                    if w == 0.0 {
                        continue;
                    }
                    let (p, q) = (i + di, j + dj);
                    if p < 0 || q < 0 || p >= n as isize || q >= n as isize {
                        continue;
                    }
                    let col = grid.index(p as usize, q as usize);
                    jac.add(row, col, -w * inv_h2 * d[col]);
                }
            }
        }
        let rhs: Vec<f64> = r.values().iter().map(|v| -v).collect();
        let dy = Field2D::from_values(grid, jac.factor()?.solve(&rhs));
        let mut alpha = 1.0;
        let mut accepted = false;
        while alpha >= 1e-8 {
            let trial = y.lincomb(1.0, &dy, alpha);
            let rt = resolvent_residual_nd(spec, lambda, eta, &trial);
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
            break;
        }
    }
    if rn <= tol {
        return Ok(ResolventSolution2D {
            y,
            residual: rn,
            tolerance: tol,
            iterations: max_iterations,
        });
    }
    Err(Error::NotConverged {
        iterations: max_iterations,
        residual: rn,
        target: tol,
    })
}

#[derive(Debug, Clone)]
pub struct MildSolution2D {
    pub eps: f64,
    pub steps: usize,
    pub partial_step: Option<f64>,
    pub times: Vec<f64>,
    pub snapshots: Vec<Field2D>,
    pub residuals: Vec<f64>,
}

impl MildSolution2D {
    pub fn final_state(&self) -> &Field2D {
        self.snapshots.last().expect("at least the initial snapshot")
    }
}

/// Implicit Euler with step `eps`; same step-count rule as the 1-D stepper.
pub fn mild_solve_nd(spec: &NdProblemSpec, eps: f64) -> Result<MildSolution2D> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::config("solver.eps", format!("must be positive, got {eps}")));
    }
    let t = spec.horizon;
    let steps = (t / eps + 1e-9).floor() as usize;
    let remainder = t - steps as f64 * eps;
    let partial_step = (steps >= 1 && remainder > eps / 100.0).then_some(remainder);
    let total = steps + usize::from(partial_step.is_some());
    let mut sol = MildSolution2D {
        eps,
        steps,
        partial_step,
        times: vec![0.0],
        snapshots: vec![spec.y0.clone()],
        residuals: Vec::with_capacity(total),
    };
    let mut y = spec.y0.clone();
    for i in 0..total {
        let tau = if i < steps { eps } else { remainder };
        let lambda = 1.0 / tau;
        let eta = spec.g1.lincomb(1.0, &y, lambda);
        let s = solve_resolvent_nd(spec, lambda, &eta, &y, 100).map_err(|e| Error::Step {
            step: i + 1,
            source: Box::new(e),
        })?;
        y = s.y;
        sol.residuals.push(s.residual);
        sol.times.push(if i < steps { (i + 1) as f64 * eps } else { t });
        sol.snapshots.push(y.clone());
    }
    Ok(sol)
}

/// Solves `-L phi = y` on the interior with `phi = 0` on the boundary nodes.
pub fn reconstruct_value_nd(spec: &NdProblemSpec, y: &Field2D) -> Result<Field2D> {
    let grid = spec.grid;
    let n = grid.side();
    let inv_h2 = 1.0 / grid.spacing().powi(2);
    let st = spec.diffusion.stencil();
    let mut a = BandMatrix::zeros(grid.len(), n + 1, n + 1);
    let mut rhs = vec![0.0; grid.len()];
    for j in 0..n {
        for i in 0..n {
            let row = grid.index(i, j);
            if grid.is_boundary(i, j) {
                a.add(row, row, 1.0);
                continue;
            }
            rhs[row] = y[row];
            for &(di, dj, w) in &st {
                if w == 0.0 {
                    continue;
                }
                let (p, q) = ((i as isize + di) as usize, (j as isize + dj) as usize);
                a.add(row, grid.index(p, q), -w * inv_h2);
            }
        }
    }
    Ok(Field2D::from_values(grid, a.factor()?.solve(&rhs)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity_a() -> [Vec<f64>; 2] {
        [vec![1.0, 0.0], vec![0.0, 1.0]]
    }

    fn heat_spec(grid: Grid2D) -> NdProblemSpec {
        NdProblemSpec::from_functions(
            grid,
            &identity_a(),
            ConjugateHamiltonian::identity(),
            |_, _| std::f64::consts::SQRT_2,
            |_, _| 0.0,
            |x, y| -(-(x * x + y * y)).exp(),
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn operator_examples() {
        let g = Grid2D::new(2.0, 21).unwrap();
        let id = Diffusion2 { b11: 1.0, b12: 0.0, b22: 1.0 };
        let l = apply_L_fn(&id, g, |x, y| x * x + y * y);
        assert!(l.values().iter().all(|v| (v - 4.0).abs() < 1e-10));
        let aniso = Diffusion2 { b11: 2.0, b12: 1.0, b22: 2.0 };
        let l = apply_L_fn(&aniso, g, |x, y| x * y);
        assert!(l.values().iter().all(|v| (v - 2.0).abs() < 1e-10));
        let neg = Diffusion2 { b11: 2.0, b12: -1.0, b22: 2.0 };
        let l = apply_L_fn(&neg, g, |x, y| x * y);
        assert!(l.values().iter().all(|v| (v + 2.0).abs() < 1e-10));
        let l = apply_L_fn(&aniso, g, |_, _| 3.0);
        assert!(l.values().iter().all(|v| v.abs() < 1e-10));
        let l = apply_L_fn(&aniso, g, |x, _| x * x);
        assert!(l.values().iter().all(|v| (v - 4.0).abs() < 1e-10));
    }

    #[test]
    fn factor_gives_gram_matrix() {
        let d = Diffusion2::from_factor(&[vec![1.0, 2.0, 0.0], vec![0.5, 0.0, 1.0]]).unwrap();
        assert_eq!(d, Diffusion2 { b11: 5.0, b12: 0.5, b22: 1.25 });
        let singular = Diffusion2::from_factor(&[vec![1.0], vec![2.0]]).unwrap();
        assert!(singular.min_eigenvalue().abs() < 1e-12);
        let g = Grid2D::new(1.0, 5).unwrap();
        let err = NdProblemSpec::from_functions(
            g,
            &[vec![1.0], vec![2.0]],
            ConjugateHamiltonian::identity(),
            |_, _| 1.0,
            |_, _| 0.0,
            |_, _| 0.0,
            1.0,
        );
        assert!(err.is_err());
    }

    #[test]
    fn zero_data_stays_zero() {
        let g = Grid2D::new(2.0, 11).unwrap();
        let spec = NdProblemSpec::from_functions(
            g,
            &identity_a(),
            ConjugateHamiltonian::Quadratic { alpha1: 1.0, alpha2: 0.0 },
            |_, _| 1.0,
            |_, _| 0.0,
            |_, _| 0.0,
            0.1,
        )
        .unwrap();
        let sol = mild_solve_nd(&spec, 0.05).unwrap();
        assert!(sol.final_state().values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn heat_step_matches_dense_solve() {
        let g = Grid2D::new(3.0, 15).unwrap();
        let spec = heat_spec(g);
        let lambda = 10.0;
        let eta = spec.y0.map(|v| lambda * v);
        let y = solve_resolvent_nd(&spec, lambda, &eta, &spec.y0, 50).unwrap().y;
        // dense oracle: (lambda I - L) y = eta with zero exterior values, m = 1
        let n = g.side();
        let h2 = g.spacing().powi(2);
        let mut a = nalgebra::DMatrix::<f64>::zeros(g.len(), g.len());
        for j in 0..n {
            for i in 0..n {
                let r = g.index(i, j);
                a[(r, r)] = lambda + 4.0 / h2;
                if i > 0 {
                    a[(r, g.index(i - 1, j))] = -1.0 / h2;
                }
                if i + 1 < n {
                    a[(r, g.index(i + 1, j))] = -1.0 / h2;
                }
                if j > 0 {
                    a[(r, g.index(i, j - 1))] = -1.0 / h2;
                }
                if j + 1 < n {
                    a[(r, g.index(i, j + 1))] = -1.0 / h2;
                }
            }
        }
        let x = a.lu().solve(&nalgebra::DVector::from_vec(eta.values().to_vec())).unwrap();
        for k in 0..g.len() {
            assert!((y[k] - x[k]).abs() < 1e-8);
        }
    }

    #[test]
    fn radial_data_stays_symmetric() {
        let g = Grid2D::new(3.0, 21).unwrap();
        let spec = NdProblemSpec::from_functions(
            g,
            &identity_a(),
            ConjugateHamiltonian::Quadratic { alpha1: 1.0, alpha2: 0.0 },
            |_, _| 1.5,
            |_, _| 0.0,
            |x, y| -(-(x * x + y * y)).exp(),
            0.02,
        )
        .unwrap();
        let y = mild_solve_nd(&spec, 0.02).unwrap().final_state().clone();
        let n = g.side();
        for j in 0..n {
            for i in 0..n {
                assert!((y.at(i, j) - y.at(j, i)).abs() < 1e-8);
                assert!((y.at(i, j) - y.at(n - 1 - i, j)).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn value_reconstruction_inverts_l() {
        let g = Grid2D::new(3.0, 21).unwrap();
        let spec = NdProblemSpec::from_functions(
            g,
            &[vec![1.0, 0.3], vec![0.2, 0.8]],
            ConjugateHamiltonian::identity(),
            |_, _| 1.0,
            |_, _| 0.0,
            |x, y| (-(x * x + 2.0 * y * y)).exp(),
            1.0,
        )
        .unwrap();
        let phi = reconstruct_value_nd(&spec, &spec.y0).unwrap();
        let l = apply_L(&spec, &phi);
        let n = g.side();
        for j in 1..n - 1 {
            for i in 1..n - 1 {
                let k = g.index(i, j);
                assert!((l[k] + spec.y0[k]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn non_monotone_factor_warns() {
        let g = Grid2D::new(1.0, 5).unwrap();
        let spec = NdProblemSpec::from_functions(
            g,
            &[vec![1.0, 0.0], vec![0.95, 0.1]],
            ConjugateHamiltonian::identity(),
            |_, _| 1.0,
            |_, _| 0.0,
            |_, _| 0.0,
            1.0,
        )
        .unwrap();
        assert_eq!(spec.warnings().len(), 1);
    }
}
