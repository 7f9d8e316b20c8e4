//! Value function and feedback control from a mild solution.
//!
//! `y(s) = -phi_xx(T - s)`, so `phi(t) = Phi(y(T - t))` with `Phi` the
//! Dirichlet inverse of `-d^2/dx^2`, and `phi_xx = -y` exactly. The optimal
//! feedback minimizes `sigma^2 phi_xx u / 2 + h(u)` over `u >= 0`, which is
//! `u* = (H*)'(m y)`.

use std::io::{self, BufRead, Write};

use crate::conjugation::RunningCost;
use crate::error::{Error, Result};
use crate::grid::{gradient, poisson_solve, Field, Grid1D};
use crate::resolvent::EllipticOperands;
use crate::stepper::MildSolution;

/// `phi`, `phi_x` and `phi_xx` at ascending times `t = T - s`.
#[derive(Debug, Clone)]
pub struct ValueFunction {
    pub horizon: f64,
    pub times: Vec<f64>,
    pub phi: Vec<Field>,
    pub phi_x: Vec<Field>,
    pub phi_xx: Vec<Field>,
}

pub fn reconstruct_value(sol: &MildSolution) -> ValueFunction {
    let mut v = ValueFunction {
        horizon: sol.horizon,
        times: Vec::with_capacity(sol.times.len()),
        phi: Vec::with_capacity(sol.times.len()),
        phi_x: Vec::with_capacity(sol.times.len()),
        phi_xx: Vec::with_capacity(sol.times.len()),
    };
    for (s, y) in sol.times.iter().zip(&sol.snapshots).rev() {
        let phi = poisson_solve(y);
        v.times.push((sol.horizon - s).max(0.0));
        v.phi_x.push(gradient(&phi));
        v.phi.push(phi);
        v.phi_xx.push(y.map(|z| -z));
    }
    v
}

impl ValueFunction {
    pub fn grid(&self) -> Grid1D {
        self.phi[0].grid()
    }

    /// `phi(t, x)`, bilinear with `t` clamped and constant extrapolation in `x`.
    pub fn value_at(&self, t: f64, x: f64) -> f64 {
        bilinear(&self.times, &self.phi, t, x)
    }

    /// `max(|phi|_inf, |phi_x|_inf)` at snapshot `i`.
    pub fn w1_inf(&self, i: usize) -> f64 {
        self.phi[i].sup_norm().max(self.phi_x[i].sup_norm())
    }

    /// Largest `W^{1,inf}` distance between consecutive snapshots.
    pub fn max_consecutive_gap(&self) -> f64 {
        (1..self.times.len())
            .map(|i| {
                self.phi[i]
                    .sup_distance(&self.phi[i - 1])
                    .max(self.phi_x[i].sup_distance(&self.phi_x[i - 1]))
            })
            .fold(0.0, f64::max)
    }
}

/// Tabulated feedback `u*(t_i, x_k)` with ascending times.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackPolicy {
    pub times: Vec<f64>,
    pub controls: Vec<Field>,
}

/// `u*(t, x) = (H*)'(m(x) y(T - t, x))`, never negative.
pub fn synthesize_feedback(v: &ValueFunction, ops: &EllipticOperands) -> FeedbackPolicy {
    let controls = v
        .phi_xx
        .iter()
        .map(|pxx| {
            let mut u = Field::zeros(pxx.grid());
            for k in 0..pxx.len() {
                u[k] = ops.conj.derivative(-ops.multiplier[k] * pxx[k]).max(0.0);
            }
            u
        })
        .collect();
    FeedbackPolicy {
        times: v.times.clone(),
        controls,
    }
}

impl FeedbackPolicy {
    /// Policy that applies `u = c` everywhere on `[0, horizon]`.
    pub fn constant(grid: Grid1D, horizon: f64, c: f64) -> Self {
        let u = Field::from_fn(grid, |_| c.max(0.0));
        FeedbackPolicy {
            times: vec![0.0, horizon],
            controls: vec![u.clone(), u],
        }
    }

    pub fn grid(&self) -> Grid1D {
        self.controls[0].grid()
    }

    pub fn eval(&self, t: f64, x: f64) -> f64 {
        interpolate_policy(self, t, x)
    }

    /// Dense table `t, x, u*`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t [time],x [state],u_star [control]")?;
        let grid = self.grid();
        for (t, u) in self.times.iter().zip(&self.controls) {
            for k in 0..grid.len() {
                writeln!(w, "{:e},{:e},{:e}", t, grid.x(k), u[k])?;
            }
        }
        Ok(())
    }

    /// Compact text form: a metadata header, then one line of controls per
    /// time, prefixed by the time.
    pub fn write_text<W: Write>(&self, mut w: W) -> io::Result<()> {
        let grid = self.grid();
        writeln!(w, "# feedback policy u*(t, x)")?;
        writeln!(w, "half_width {:e}", grid.half_width())?;
        writeln!(w, "nodes {}", grid.len())?;
        writeln!(w, "times {}", self.times.len())?;
        for (t, u) in self.times.iter().zip(&self.controls) {
            write!(w, "{t:e}")?;
            for v in u.values() {
                write!(w, " {v:e}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let bad = |reason: String| Error::config("policy", reason);
        let mut lines = r.lines().map_while(io::Result::ok).filter(|l| !l.starts_with('#'));
        let mut header = |key: &str| -> Result<String> {
            let line = lines.next().ok_or_else(|| bad(format!("missing {key}")))?;
            line.strip_prefix(key)
                .map(|s| s.trim().to_string())
                .ok_or_else(|| bad(format!("expected {key}, got {line:?}")))
        };
        let half_width: f64 = header("half_width")?.parse().map_err(|e| bad(format!("half_width: {e}")))?;
        let nodes: usize = header("nodes")?.parse().map_err(|e| bad(format!("nodes: {e}")))?;
        let count: usize = header("times")?.parse().map_err(|e| bad(format!("times: {e}")))?;
        let grid = Grid1D::new(half_width, nodes)?;
        let mut times = Vec::with_capacity(count);
        let mut controls = Vec::with_capacity(count);
        for line in lines.take(count) {
            let nums: Vec<f64> = line
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| bad(format!("{e}")))?;
            if nums.len() != nodes + 1 {
                return Err(bad(format!("row has {} entries, expected {}", nums.len(), nodes + 1)));
            }
            times.push(nums[0]);
            controls.push(Field::from_values(grid, nums[1..].to_vec()));
        }
        if times.len() != count {
            return Err(bad(format!("expected {count} rows, found {}", times.len())));
        }
        Ok(FeedbackPolicy { times, controls })
    }
}

/// Bilinear interpolation of the policy table; `t` is clamped to the table
/// and `x` is extended by constants beyond the grid.
pub fn interpolate_policy(p: &FeedbackPolicy, t: f64, x: f64) -> f64 {
    bilinear(&p.times, &p.controls, t, x)
}

fn bilinear(times: &[f64], table: &[Field], t: f64, x: f64) -> f64 {
    if times.len() == 1 {
        return linear_in_x(&table[0], x);
    }
    let last = times.len() - 1;
    let (i, w) = if t <= times[0] {
        (0, 0.0)
    } else if t >= times[last] {
        (last - 1, 1.0)
    } else {
        let i = times.partition_point(|&s| s <= t).saturating_sub(1).min(last - 1);
        let span = times[i + 1] - times[i];
        (i, if span > 0.0 { (t - times[i]) / span } else { 0.0 })
    };
    let a = linear_in_x(&table[i], x);
    if w == 0.0 {
        return a;
    }
    let b = linear_in_x(&table[i + 1], x);
    if w == 1.0 {
        return b;
    }
    (1.0 - w) * a + w * b
}

fn linear_in_x(f: &Field, x: f64) -> f64 {
    let grid = f.grid();
    let n = grid.len();
    let l = grid.half_width();
    if x <= -l {
        return f[0];
    }
    if x >= l {
        return f[n - 1];
    }
    let s = (x + l) / grid.spacing();
    let k = (s.floor() as usize).min(n - 2);
    let w = s - k as f64;
    if w == 0.0 {
        return f[k];
    }
    (1.0 - w) * f[k] + w * f[k + 1]
}

/// `a u + h(u)` evaluated at `u_star` minus its minimum over `probes`
/// equispaced points of `[0, u_max]`, with `a = sigma^2 phi_xx / 2`.
/// Nonpositive when `u_star` is a minimizer on the probe grid.
pub fn argmin_gap(cost: &RunningCost, a: f64, u_star: f64, u_max: f64, probes: usize) -> f64 {
    let obj = |u: f64| a * u + cost.eval(u);
    let best = (0..probes)
        .map(|k| obj(u_max * k as f64 / (probes - 1) as f64))
        .fold(f64::INFINITY, f64::min);
    obj(u_star) - best
}
