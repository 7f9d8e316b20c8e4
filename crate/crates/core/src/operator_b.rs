//! The bounded linear perturbation produced by differentiating the drift term
//! `f phi_x` twice: `B y = f'' Phi(y)' - 2 f' y`.
//!
//! The value function is recovered from `y = -phi_xx` by `phi = Phi(y)`,
//! where `Phi` inverts `-d^2/dx^2`. Hence `phi_x = Phi(y)'` and the drift
//! contributes `+f'' Phi(y)'`. `|B y|_1 <= (|f''|_1 C_Phi + 2 |f'|_inf) |y|_1`.
//!
//! On the grid `B` is written as `(f' Psi')' - f' y` with the first factor a
//! flux difference over cell interfaces. Together with the flux form of the
//! transport term in `A` the drift part of `A + B` is an exact discrete
//! divergence, so `sum_k y_k` only changes through the boundary fluxes.
//! `Phi` amplifies a mass error by the domain length, which is why this
//! matters for the recovered value function.

use crate::grid::{green_constants, interface_slopes, poisson_solve, Field, GreenConstants, Grid1D};
use crate::problem::Coefficient;

/// Drift `f` and its first two derivatives on the grid.
#[derive(Debug, Clone)]
pub struct DriftData {
    pub f: Field,
    pub f1: Field,
    pub f2: Field,
    /// `f` on the `n + 1` cell interfaces.
    pub f_half: Vec<f64>,
    /// `f'` on the `n + 1` cell interfaces.
    pub f1_half: Vec<f64>,
    f1_sup: f64,
    f2_l1: f64,
    green: GreenConstants,
}

impl DriftData {
    pub fn new(drift: &Coefficient, grid: Grid1D) -> Self {
        let (f, f1, f2) = drift.tabulate_with_derivatives(grid);
        Self::from_tables(f, f1, f2)
    }

    pub fn from_tables(f: Field, f1: Field, f2: Field) -> Self {
        let green = green_constants(f.grid());
        let f_half = interfaces(&f);
        let f1_half = interfaces(&f1);
        let f1_sup = f1_half.iter().fold(f1.sup_norm(), |m, v| m.max(v.abs()));
        let f2_l1 = f1_half.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>().max(f2.l1_norm());
        DriftData {
            f1_sup,
            f2_l1,
            f_half,
            f1_half,
            f,
            f1,
            f2,
            green,
        }
    }

    pub fn zero(grid: Grid1D) -> Self {
        let z = Field::zeros(grid);
        Self::from_tables(z.clone(), z.clone(), z)
    }

    pub fn grid(&self) -> Grid1D {
        self.f.grid()
    }

    /// `|f'|_inf`, the quasi-accretivity shift `lambda0`.
    pub fn lambda0(&self) -> f64 {
        self.f1_sup
    }

    pub fn f2_l1(&self) -> f64 {
        self.f2_l1
    }

    pub fn green(&self) -> GreenConstants {
        self.green
    }

    /// `C_B = |f''|_1 C_Phi + 2 |f'|_inf`.
    pub fn bound_constant(&self) -> f64 {
        self.f2_l1 * self.green.gradient + 2.0 * self.f1_sup
    }

    pub fn is_zero(&self) -> bool {
        self.f.sup_norm() == 0.0 && self.f1_sup == 0.0 && self.f2.sup_norm() == 0.0
    }

    /// Whether `f'` is not constant, so `B` reaches `y` through `Psi`.
    pub fn is_nonlocal(&self) -> bool {
        let tiny = 1e-13 * self.f1_sup.max(1.0);
        self.f1_half.windows(2).any(|w| (w[0] - w[1]).abs() > tiny)
    }
}

/// Averages of neighbouring nodes, linearly extrapolated at the two ends.
fn interfaces(v: &Field) -> Vec<f64> {
    let n = v.len();
    let mut out = vec![0.0; n + 1];
    for j in 1..n {
        out[j] = 0.5 * (v[j - 1] + v[j]);
    }
    out[0] = 1.5 * v[0] - 0.5 * v[1];
    out[n] = 1.5 * v[n - 1] - 0.5 * v[n - 2];
    out
}

/// `B y = (f' Psi')' - f' y` with `Psi = Phi(y)`; see the module notes.
#[allow(non_snake_case)]
pub fn apply_B(drift: &DriftData, y: &Field) -> Field {
    let q = interface_slopes(&poisson_solve(y));
    let h = y.grid().spacing();
    let c = &drift.f1_half;
    let mut out = Field::zeros(y.grid());
    for k in 0..y.len() {
        out[k] = (c[k + 1] * q[k + 1] - c[k] * q[k]) / h - drift.f1[k] * y[k];
    }
    out
}
