//! The control problem: minimize
//! `E[ int_0^T (g(X) + h(u)) dt + g0(X(T)) ]` subject to
//! `dX = f(X) dt + sqrt(u) sigma(X) dW`, `u >= 0`.

use std::fmt;
use std::sync::Arc;

use crate::conjugation::RunningCost;
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::grid::{Field, Grid1D};

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A scalar coefficient function with optional analytic derivatives.
///
/// When a derivative is missing, tabulation falls back to central
/// differences of the tabulated values.
#[derive(Clone)]
pub struct Coefficient {
    value: ScalarFn,
    first: Option<ScalarFn>,
    second: Option<ScalarFn>,
}

impl fmt::Debug for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Coefficient")
            .field("analytic_first", &self.first.is_some())
            .field("analytic_second", &self.second.is_some())
            .finish()
    }
}

impl Coefficient {
    pub fn analytic<F, F1, F2>(value: F, first: F1, second: F2) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        F1: Fn(f64) -> f64 + Send + Sync + 'static,
        F2: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Coefficient {
            value: Arc::new(value),
            first: Some(Arc::new(first)),
            second: Some(Arc::new(second)),
        }
    }

    /// Value only; derivatives come from finite differences on the grid.
    pub fn numeric<F>(value: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Coefficient {
            value: Arc::new(value),
            first: None,
            second: None,
        }
    }

    pub fn constant(c: f64) -> Self {
        Self::analytic(move |_| c, |_| 0.0, |_| 0.0)
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    /// Builds value and analytic derivatives from an expression in one
    /// variable. A derivative that cannot be formed (e.g. through `abs`) is
    /// left to finite differences unless `require_derivatives` is set.
    pub fn from_expr(expr: &Expr, require_derivatives: bool) -> Result<Self> {
        let d1 = expr.derivative(0);
        let d2 = d1.as_ref().map_err(Clone::clone).and_then(|d| d.derivative(0));
        if require_derivatives {
            if let Err(e) = &d2 {
                return Err(Error::Expr(e.clone()));
            }
        }
        let v = expr.clone();
        Ok(Coefficient {
            value: Arc::new(move |x| v.eval(&[x])),
            first: d1.ok().map(|d| Arc::new(move |x: f64| d.eval(&[x])) as ScalarFn),
            second: d2.ok().map(|d| Arc::new(move |x: f64| d.eval(&[x])) as ScalarFn),
        })
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.value)(x)
    }

    pub fn has_analytic_derivatives(&self) -> bool {
        self.first.is_some() && self.second.is_some()
    }

    pub fn first_at(&self, x: f64) -> Option<f64> {
        self.first.as_ref().map(|f| f(x))
    }

    pub fn second_at(&self, x: f64) -> Option<f64> {
        self.second.as_ref().map(|f| f(x))
    }

    pub fn tabulate(&self, grid: Grid1D) -> Field {
        Field::from_fn(grid, |x| self.eval(x))
    }

    /// Value, first and second derivative on the grid.
    pub fn tabulate_with_derivatives(&self, grid: Grid1D) -> (Field, Field, Field) {
        let value = self.tabulate(grid);
        let first = match &self.first {
            Some(d) => Field::from_fn(grid, |x| d(x)),
            None => {
                let h = grid.spacing();
                Field::from_fn(grid, |x| (self.eval(x + h) - self.eval(x - h)) / (2.0 * h))
            }
        };
        let second = match &self.second {
            Some(d) => Field::from_fn(grid, |x| d(x)),
            None => {
                let h = grid.spacing();
                Field::from_fn(grid, |x| (self.eval(x + h) - 2.0 * self.eval(x) + self.eval(x - h)) / (h * h))
            }
        };
        (value, first, second)
    }
}

/// The stochastic control problem.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub drift: Coefficient,
    pub volatility: Coefficient,
    /// Running state cost `g`.
    pub running: Coefficient,
    /// Terminal cost `g0`.
    pub terminal: Coefficient,
    pub cost: RunningCost,
    pub horizon: f64,
}

impl ProblemSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::config("problem.horizon", format!("must be positive, got {}", self.horizon)));
        }
        self.cost.validate()
    }

    /// The reference problem used throughout the tests and the guide:
    /// `f = tanh`, `sigma = sqrt(2) + 0.1 sin`, `g = g0 = exp(-x^2)`,
    /// `h(u) = u^2`, `T = 0.5`.
    pub fn desk() -> Self {
        let gauss = Coefficient::analytic(
            |x: f64| (-x * x).exp(),
            |x: f64| -2.0 * x * (-x * x).exp(),
            |x: f64| (4.0 * x * x - 2.0) * (-x * x).exp(),
        );
        ProblemSpec {
            drift: Coefficient::analytic(
                |x: f64| x.tanh(),
                |x: f64| 1.0 - x.tanh().powi(2),
                |x: f64| {
                    let t = x.tanh();
                    -2.0 * t * (1.0 - t * t)
                },
            ),
            volatility: Coefficient::analytic(
                |x: f64| std::f64::consts::SQRT_2 + 0.1 * x.sin(),
                |x: f64| 0.1 * x.cos(),
                |x: f64| -0.1 * x.sin(),
            ),
            running: gauss.clone(),
            terminal: gauss,
            cost: RunningCost::Quadratic {
                alpha1: 1.0,
                alpha2: 0.0,
            },
            horizon: 0.5,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expression_coefficients_match_closed_forms() {
        let e = Expr::parse("tanh(x)", &["x"]).unwrap();
        let c = Coefficient::from_expr(&e, true).unwrap();
        let desk = ProblemSpec::desk();
        let g = Grid1D::new(3.0, 31).unwrap();
        let (a0, a1, a2) = c.tabulate_with_derivatives(g);
        let (b0, b1, b2) = desk.drift.tabulate_with_derivatives(g);
        assert!(a0.sup_distance(&b0) < 1e-14);
        assert!(a1.sup_distance(&b1) < 1e-14);
        assert!(a2.sup_distance(&b2) < 1e-14);
    }

    #[test]
    fn numeric_derivatives_are_close() {
        let c = Coefficient::numeric(|x: f64| x.sin());
        let g = Grid1D::new(3.0, 301).unwrap();
        let (_, d1, d2) = c.tabulate_with_derivatives(g);
        for k in 0..g.len() {
            let x = g.x(k);
            assert!((d1[k] - x.cos()).abs() < 1e-4);
            assert!((d2[k] + x.sin()).abs() < 1e-3);
        }
    }

    #[test]
    fn abs_requires_numeric_fallback() {
        let e = Expr::parse("abs(x)", &["x"]).unwrap();
        assert!(Coefficient::from_expr(&e, true).is_err());
        let c = Coefficient::from_expr(&e, false).unwrap();
        assert!(!c.has_analytic_derivatives());
    }
}
