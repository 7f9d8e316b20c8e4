//! Truncated uniform mesh, grid functions, finite-difference operators and the
//! discrete Green operator of `-d^2/dx^2` with homogeneous Dirichlet data.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Uniform mesh on `[-L, L]` with an odd number of nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    half_width: f64,
    nodes: usize,
}

impl Grid1D {
    pub fn new(half_width: f64, nodes: usize) -> Result<Self> {
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::config("grid.half_width", format!("must be positive, got {half_width}")));
        }
        if nodes < 5 || nodes.is_multiple_of(2) {
            return Err(Error::config("grid.nodes", format!("must be odd and >= 5, got {nodes}")));
        }
        Ok(Grid1D { half_width, nodes })
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn len(&self) -> usize {
        self.nodes
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / (self.nodes - 1) as f64
    }

    /// Node coordinate, exactly antisymmetric about the middle node.
    pub fn x(&self, k: usize) -> f64 {
        let mid = (self.nodes - 1) / 2;
        let h = self.spacing();
        if k >= mid {
            (k - mid) as f64 * h
        } else {
            -((mid - k) as f64 * h)
        }
    }

    pub fn coordinates(&self) -> Vec<f64> {
        (0..self.nodes).map(|k| self.x(k)).collect()
    }

    /// Index range of the nodes inside the central `fraction` of the domain.
    pub fn inner_range(&self, fraction: f64) -> std::ops::Range<usize> {
        let limit = fraction * self.half_width + 1e-12 * self.half_width;
        let first = (0..self.nodes).find(|&k| self.x(k).abs() <= limit).unwrap_or(0);
        let last = (0..self.nodes).rev().find(|&k| self.x(k).abs() <= limit).unwrap_or(0);
        first..last + 1
    }
}

/// Values of a function at the nodes of a [`Grid1D`].
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid1D,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: Grid1D) -> Self {
        Field {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn from_fn(grid: Grid1D, f: impl Fn(f64) -> f64) -> Self {
        Field {
            grid,
            values: (0..grid.len()).map(|k| f(grid.x(k))).collect(),
        }
    }

    /// Panics if `values.len()` differs from the node count.
    pub fn from_values(grid: Grid1D, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), grid.len(), "field length must equal node count");
        Field { grid, values }
    }

    pub fn grid(&self) -> Grid1D {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Discrete `L^1` norm `h * sum |y_k|`.
    pub fn l1_norm(&self) -> f64 {
        self.grid.spacing() * self.values.iter().map(|v| v.abs()).sum::<f64>()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Discrete integral `h * sum y_k`.
    pub fn integral(&self) -> f64 {
        self.grid.spacing() * self.values.iter().sum::<f64>()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Field {
        debug_assert_eq!(self.len(), other.len());
        Field {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// `a * self + b * other`.
    pub fn lincomb(&self, a: f64, other: &Field, b: f64) -> Field {
        self.zip_map(other, |x, y| a * x + b * y)
    }

    pub fn l1_distance(&self, other: &Field) -> f64 {
        self.grid.spacing()
            * self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>()
    }

    pub fn sup_distance(&self, other: &Field) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

impl Index<usize> for Field {
    type Output = f64;
    fn index(&self, k: usize) -> &f64 {
        &self.values[k]
    }
}

impl IndexMut<usize> for Field {
    fn index_mut(&mut self, k: usize) -> &mut f64 {
        &mut self.values[k]
    }
}

/// Thomas algorithm for a tridiagonal system. `lower[0]` and
/// `upper[n - 1]` are ignored. Requires a nonsingular system that needs no
/// pivoting (diagonally dominant or symmetric positive definite).
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = upper[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for k in 1..n {
        let denom = diag[k] - lower[k] * c[k - 1];
        c[k] = if k + 1 < n { upper[k] / denom } else { 0.0 };
        d[k] = (rhs[k] - lower[k] * d[k - 1]) / denom;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for k in (0..n - 1).rev() {
        x[k] = d[k] - c[k] * x[k + 1];
    }
    x
}

/// Solves `-Psi'' = z` with the 3-point stencil and `Psi(-L) = Psi(L) = 0`.
/// Values of `z` at the two boundary nodes do not enter.
pub fn poisson_solve(z: &Field) -> Field {
    let grid = z.grid();
    let n = grid.len();
    let h2 = grid.spacing().powi(2);
    let m = n - 2;
    let lower = vec![-1.0; m];
    let upper = vec![-1.0; m];
    let diag = vec![2.0; m];
    let rhs: Vec<f64> = z.values()[1..n - 1].iter().map(|v| v * h2).collect();
    let inner = solve_tridiagonal(&lower, &diag, &upper, &rhs);
    let mut out = Field::zeros(grid);
    out.values_mut()[1..n - 1].copy_from_slice(&inner);
    out
}

/// Derivative of a grid function: central differences inside, second-order
/// one-sided differences at the two boundary nodes.
pub fn gradient(psi: &Field) -> Field {
    let grid = psi.grid();
    let n = grid.len();
    let h = grid.spacing();
    let v = psi.values();
    let mut out = Field::zeros(grid);
    let o = out.values_mut();
    o[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h);
    o[n - 1] = (3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]) / (2.0 * h);
    for k in 1..n - 1 {
        o[k] = (v[k + 1] - v[k - 1]) / (2.0 * h);
    }
    out
}

/// `Psi'` where `Psi = poisson_solve(z)`.
pub fn poisson_gradient(z: &Field) -> Field {
    gradient(&poisson_solve(z))
}

/// Three-point second difference with a constant ghost value outside both
/// ends of the mesh.
pub fn second_difference(values: &[f64], ghost: f64, h: f64) -> Vec<f64> {
    let n = values.len();
    let inv_h2 = 1.0 / (h * h);
    (0..n)
        .map(|k| {
            let left = if k == 0 { ghost } else { values[k - 1] };
            let right = if k + 1 == n { ghost } else { values[k + 1] };
            (left - 2.0 * values[k] + right) * inv_h2
        })
        .collect()
}

/// Three-point second difference with homogeneous Dirichlet ghost values.
pub fn diff2(y: &Field) -> Field {
    Field::from_values(y.grid(), second_difference(y.values(), 0.0, y.grid().spacing()))
}

/// One-sided first difference selected by the sign of `wind`: forward where
/// `wind > 0`, backward where `wind < 0`, zero where it vanishes. This is the
/// monotone discretization of the transport term `wind * y_x` in
/// `y_t = wind * y_x`. Ghost values are zero.
pub fn diff1_upwind(y: &Field, wind: &Field) -> Field {
    let grid = y.grid();
    let n = grid.len();
    let h = grid.spacing();
    let v = y.values();
    let mut out = Field::zeros(grid);
    for k in 0..n {
        let w = wind[k];
        out[k] = if w > 0.0 {
            let right = if k + 1 == n { 0.0 } else { v[k + 1] };
            (right - v[k]) / h
        } else if w < 0.0 {
            let left = if k == 0 { 0.0 } else { v[k - 1] };
            (v[k] - left) / h
        } else {
            0.0
        };
    }
    out
}

/// Conservative upwind difference `(F_{k+1/2} - F_{k-1/2}) / h` of the flux
/// `F = wind * y`, the value of `y` taken from the side the wind blows from
/// (right where `wind > 0`). `wind_half[j]` is the wind on the interface left
/// of node `j`, so it has `n + 1` entries. Ghost values are zero. Summing the
/// result telescopes to the two boundary fluxes.
pub fn flux_upwind(y: &Field, wind_half: &[f64]) -> Field {
    let n = y.len();
    let h = y.grid().spacing();
    let v = y.values();
    let flux: Vec<f64> = (0..=n)
        .map(|j| {
            let a = wind_half[j];
            let up = if a > 0.0 { j } else { j.wrapping_sub(1) };
            if up < n {
                a * v[up]
            } else {
                0.0
            }
        })
        .collect();
    Field::from_values(y.grid(), (0..n).map(|k| (flux[k + 1] - flux[k]) / h).collect())
}

/// Cell differences of `Psi` on the `n + 1` interfaces. The two outer
/// interfaces copy their inner neighbours.
pub fn interface_slopes(psi: &Field) -> Vec<f64> {
    let n = psi.len();
    let h = psi.grid().spacing();
    let v = psi.values();
    let mut q = vec![0.0; n + 1];
    for j in 1..n {
        q[j] = (v[j] - v[j - 1]) / h;
    }
    q[0] = q[1];
    q[n] = q[n - 1];
    q
}

/// Cell differences `(w_{k+1} - w_k) / h` for `k = -1..n-1`, including the
/// two cells adjacent to the ghost nodes.
pub fn cell_differences(values: &[f64], ghost: f64, h: f64) -> Vec<f64> {
    let n = values.len();
    (0..=n)
        .map(|k| {
            let left = if k == 0 { ghost } else { values[k - 1] };
            let right = if k == n { ghost } else { values[k] };
            (right - left) / h
        })
        .collect()
}

/// Grid-dependent stability constants of the discrete Green operator,
/// measured over unit point masses at every interior node. By linearity they
/// bound the operator for arbitrary right-hand sides.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreenConstants {
    /// `C` in `|Psi'|_inf <= C |z|_1`.
    pub gradient: f64,
    /// `C(L)` in `|Psi|_inf + |Psi'|_inf <= C(L) |z|_1`.
    pub total: f64,
}

pub fn green_constants(grid: Grid1D) -> GreenConstants {
    let n = grid.len();
    let h = grid.spacing();
    let mut gradient_c: f64 = 0.0;
    let mut total: f64 = 0.0;
    let mut z = Field::zeros(grid);
    for j in 1..n - 1 {
        z[j] = 1.0 / h;
        let psi = poisson_solve(&z);
        let dpsi = gradient(&psi);
        z[j] = 0.0;
        let slopes = interface_slopes(&psi).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let (a, b) = (psi.sup_norm(), dpsi.sup_norm().max(slopes));
        gradient_c = gradient_c.max(b);
        total = total.max(a + b);
    }
    GreenConstants {
        gradient: gradient_c,
        total,
    }
}
