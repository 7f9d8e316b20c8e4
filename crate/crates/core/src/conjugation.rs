//! Running control cost `h`, the Legendre conjugate `H*` of
//! `H = h + I_[0,inf)`, its derivative and its potential `j(r) = int_0^r H*`.
//!
//! Two layers live here. [`RunningCost`] describes `h` and answers pointwise
//! queries ([`conjugate`], [`conjugate_derivative`], [`potential`]) either in
//! closed form (quadratic costs) or by bracketed one-dimensional maximization.
//! [`ConjugateHamiltonian`] is the object the PDE solvers consume: it is
//! either closed form or a table built once from a cost, and is cheap to
//! evaluate inside Newton iterations.
//!
//! `h` is never evaluated at negative controls.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Default node count of tabulated conjugates.
pub const DEFAULT_TABLE_NODES: usize = 4097;

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// The running control cost `h` on `[0, inf)`.
#[derive(Clone)]
pub enum RunningCost {
    /// `h(u) = alpha1 * u^2 + alpha2`.
    Quadratic { alpha1: f64, alpha2: f64 },
    /// User supplied convex `h` with coercivity `h(u) >= alpha1 u^2 + alpha2`.
    Custom {
        h: ScalarFn,
        alpha1: f64,
        alpha2: f64,
    },
}

impl fmt::Debug for RunningCost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunningCost::Quadratic { alpha1, alpha2 } => f
                .debug_struct("Quadratic")
                .field("alpha1", alpha1)
                .field("alpha2", alpha2)
                .finish(),
            RunningCost::Custom { alpha1, alpha2, .. } => f
                .debug_struct("Custom")
                .field("alpha1", alpha1)
                .field("alpha2", alpha2)
                .finish_non_exhaustive(),
        }
    }
}

impl RunningCost {
    pub fn quadratic(alpha1: f64, alpha2: f64) -> Result<Self> {
        let cost = RunningCost::Quadratic { alpha1, alpha2 };
        cost.validate()?;
        Ok(cost)
    }

    pub fn custom<F>(h: F, alpha1: f64, alpha2: f64) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let cost = RunningCost::Custom {
            h: Arc::new(h),
            alpha1,
            alpha2,
        };
        cost.validate()?;
        Ok(cost)
    }

    pub fn alpha1(&self) -> f64 {
        match self {
            RunningCost::Quadratic { alpha1, .. } | RunningCost::Custom { alpha1, .. } => *alpha1,
        }
    }

    pub fn alpha2(&self) -> f64 {
        match self {
            RunningCost::Quadratic { alpha2, .. } | RunningCost::Custom { alpha2, .. } => *alpha2,
        }
    }

    /// `h(u)` for `u >= 0`.
    pub fn eval(&self, u: f64) -> f64 {
        debug_assert!(u >= 0.0, "h evaluated at negative control {u}");
        match self {
            RunningCost::Quadratic { alpha1, alpha2 } => alpha1 * u * u + alpha2,
            RunningCost::Custom { h, .. } => h(u),
        }
    }

    /// `H(u) = h(u)` on `[0, inf)` and `+inf` elsewhere.
    pub fn extended(&self, u: f64) -> f64 {
        if u < 0.0 {
            f64::INFINITY
        } else {
            self.eval(u)
        }
    }

    /// Checks the coercivity bound and midpoint convexity on a probe grid.
    pub fn validate(&self) -> Result<()> {
        let (a1, a2) = (self.alpha1(), self.alpha2());
        if !(a1 > 0.0 && a1.is_finite()) {
            return Err(Error::config("cost.alpha1", format!("must be positive, got {a1}")));
        }
        if !(a2 >= 0.0 && a2.is_finite()) {
            return Err(Error::config("cost.alpha2", format!("must be nonnegative, got {a2}")));
        }
        let probes = 400;
        let u_max = 20.0;
        let step = u_max / probes as f64;
        let vals: Vec<f64> = (0..=probes).map(|k| self.eval(k as f64 * step)).collect();
        for (k, &v) in vals.iter().enumerate() {
            let u = k as f64 * step;
            if !v.is_finite() {
                return Err(Error::NonConvexCost(format!("h({u}) is not finite")));
            }
            if v < a1 * u * u + a2 - 1e-9 * (1.0 + v.abs()) {
                return Err(Error::config(
                    "cost",
                    format!("coercivity h(u) >= alpha1 u^2 + alpha2 fails at u = {u}"),
                ));
            }
        }
        for k in 1..probes {
            let mid = vals[k];
            let chord = 0.5 * (vals[k - 1] + vals[k + 1]);
            if mid > chord + 1e-9 * (1.0 + chord.abs()) {
                return Err(Error::NonConvexCost(format!(
                    "midpoint convexity fails at u = {}",
                    k as f64 * step
                )));
            }
        }
        Ok(())
    }
}

/// Result of maximizing `p u - h(u)` over `u >= 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Maximizer {
    /// Smallest maximizer.
    pub argmax: f64,
    /// `H*(p)`.
    pub value: f64,
    /// False when `h` is affine near the maximizer and the set of maximizers
    /// is a nondegenerate interval.
    pub unique: bool,
}

/// Maximizes `p u - h(u)` over `u >= 0`.
pub fn maximize(cost: &RunningCost, p: f64) -> Result<Maximizer> {
    match cost {
        RunningCost::Quadratic { alpha1, alpha2 } => {
            let u = (p / (2.0 * alpha1)).max(0.0);
            Ok(Maximizer {
                argmax: u,
                value: p * u - alpha1 * u * u - alpha2,
                unique: true,
            })
        }
        RunningCost::Custom { h, alpha1, .. } => maximize_numeric(h.as_ref(), *alpha1, p),
    }
}

fn maximize_numeric(h: &(dyn Fn(f64) -> f64 + Send + Sync), alpha1: f64, p: f64) -> Result<Maximizer> {
    let obj = |u: f64| p * u - h(u);
    let h0 = h(0.0);
    let upper = (p.abs() + h0.abs()) / alpha1 + 1.0;

    // Coarse scan: locate the best cell and check discrete concavity.
    const SCAN: usize = 256;
    let du = upper / SCAN as f64;
    let samples: Vec<f64> = (0..=SCAN).map(|k| obj(k as f64 * du)).collect();
    let scale = samples.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    for k in 1..SCAN {
        let second = samples[k - 1] - 2.0 * samples[k] + samples[k + 1];
        if second > 1e-9 * scale {
            return Err(Error::NonConvexCost(format!(
                "maximizer bracket [0, {upper}] is not unimodal near u = {}",
                k as f64 * du
            )));
        }
    }
    let best = samples
        .iter()
        .enumerate()
        .fold(0, |b, (k, v)| if *v > samples[b] { k } else { b });
    let mut lo = (best as f64 - 1.0).max(0.0) * du;
    let mut hi = ((best + 1).min(SCAN)) as f64 * du;

    // Golden section on the bracketing cell pair.
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - inv_phi * (hi - lo);
    let mut b = lo + inv_phi * (hi - lo);
    let (mut fa, mut fb) = (obj(a), obj(b));
    while hi - lo > 1e-13 * (1.0 + upper) {
        if fa < fb {
            lo = a;
            a = b;
            fa = fb;
            b = lo + inv_phi * (hi - lo);
            fb = obj(b);
        } else {
            hi = b;
            b = a;
            fb = fa;
            a = hi - inv_phi * (hi - lo);
            fa = obj(a);
        }
    }
    let mut u = 0.5 * (lo + hi);
    let mut fu = obj(u);

    // Newton polish on p - h'(u) = 0 with finite-difference derivatives,
    // kept only when it improves the objective.
    let step = 1e-5 * (1.0 + u);
    if u > step {
        let d1 = (obj(u + step) - obj(u - step)) / (2.0 * step);
        let d2 = (obj(u + step) - 2.0 * fu + obj(u - step)) / (step * step);
        if d2 < 0.0 {
            let cand = u - d1 / d2;
            if cand >= 0.0 && cand <= upper {
                let fc = obj(cand);
                if fc > fu {
                    u = cand;
                    fu = fc;
                }
            }
        }
    }
    let f0 = obj(0.0);
    if f0 >= fu {
        return Ok(Maximizer {
            argmax: 0.0,
            value: f0,
            unique: true,
        });
    }

    // Plateau detection: smallest maximizer when h is affine near u.
    let tol = 1e-13 * (1.0 + fu.abs());
    let probe = 1e-6 * (1.0 + upper);
    let mut unique = true;
    let flat_left = u > probe && obj(u - probe) >= fu - tol;
    let flat_right = u + probe <= upper && obj(u + probe) >= fu - tol;
    if flat_left || flat_right {
        unique = false;
        let (mut left, mut right) = (0.0, u);
        if obj(left) >= fu - tol {
            right = left;
        }
        while right - left > 1e-14 * (1.0 + upper) {
            let mid = 0.5 * (left + right);
            if obj(mid) >= fu - tol {
                right = mid;
            } else {
                left = mid;
            }
        }
        u = right;
        fu = fu.max(obj(u));
    }
    Ok(Maximizer {
        argmax: u,
        value: fu,
        unique,
    })
}

/// `H*(p) = sup_{u >= 0} (p u - h(u))`.
pub fn conjugate(cost: &RunningCost, p: f64) -> Result<f64> {
    maximize(cost, p).map(|m| m.value)
}

/// `(H*)'(p)`: the smallest maximizer of `p u - h(u)` over `u >= 0`.
pub fn conjugate_derivative(cost: &RunningCost, p: f64) -> Result<f64> {
    maximize(cost, p).map(|m| m.argmax)
}

/// `j(r) = int_0^r H*(p) dp`.
pub fn potential(cost: &RunningCost, r: f64) -> Result<f64> {
    match cost {
        RunningCost::Quadratic { alpha1, alpha2 } => {
            let rp = r.max(0.0);
            Ok(rp * rp * rp / (12.0 * alpha1) - alpha2 * r)
        }
        RunningCost::Custom { .. } => {
            if r == 0.0 {
                return Ok(0.0);
            }
            let f = |p: f64| conjugate(cost, p);
            let (a, b, sign) = if r > 0.0 { (0.0, r, 1.0) } else { (r, 0.0, -1.0) };
            Ok(sign * adaptive_simpson(&f, a, b, 1e-11 * (1.0 + r.abs()), 40)?)
        }
    }
}

fn adaptive_simpson(f: &dyn Fn(f64) -> Result<f64>, a: f64, b: f64, tol: f64, depth: u32) -> Result<f64> {
    fn rec(
        f: &dyn Fn(f64) -> Result<f64>,
        (a, fa): (f64, f64),
        (m, fm): (f64, f64),
        (b, fb): (f64, f64),
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> Result<f64> {
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let (flm, frm) = (f(lm)?, f(rm)?);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return Ok(left + right + (left + right - whole) / 15.0);
        }
        Ok(rec(f, (a, fa), (lm, flm), (m, fm), left, 0.5 * tol, depth - 1)?
            + rec(f, (m, fm), (rm, frm), (b, fb), right, 0.5 * tol, depth - 1)?)
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a)?, f(m)?, f(b)?);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, (a, fa), (m, fm), (b, fb), whole, tol, depth)
}

/// Tabulated conjugate on a uniform `p` grid.
///
/// `(H*)'` is linearly interpolated between nodes and extended by constants
/// beyond the table. `H*` and `j` are the exact first and second
/// antiderivatives of that interpolant, anchored at the left node value and at
/// `j(0) = 0`, so value and derivative stay consistent inside Newton solves.
#[derive(Debug, Clone)]
pub struct ConjugateTable {
    p_min: f64,
    dp: f64,
    slope: Vec<f64>,
    value: Vec<f64>,
    primitive: Vec<f64>,
    /// `J(0)` where `J' = H*` and `J(p_min) = 0`.
    primitive_at_zero: f64,
    lipschitz: f64,
    growth: f64,
    non_unique_nodes: usize,
}

impl ConjugateTable {
    pub fn build(cost: &RunningCost, p_min: f64, p_max: f64, nodes: usize) -> Result<Self> {
        if !(p_min < 0.0 && p_max > 0.0) {
            return Err(Error::config("conjugate table", "range must straddle p = 0"));
        }
        if nodes < 3 {
            return Err(Error::config("conjugate table", "needs at least 3 nodes"));
        }
        let dp = (p_max - p_min) / (nodes - 1) as f64;
        let mut slope = Vec::with_capacity(nodes);
        let mut non_unique_nodes = 0;
        for k in 0..nodes {
            let m = maximize(cost, p_min + k as f64 * dp)?;
            if !m.unique {
                non_unique_nodes += 1;
            }
            slope.push(m.argmax);
        }
        let mut value = Vec::with_capacity(nodes);
        value.push(conjugate(cost, p_min)?);
        for k in 1..nodes {
            let v = value[k - 1] + 0.5 * dp * (slope[k - 1] + slope[k]);
            value.push(v);
        }
        let mut primitive = Vec::with_capacity(nodes);
        primitive.push(0.0);
        for k in 1..nodes {
            let ds = slope[k] - slope[k - 1];
            let cell = value[k - 1] * dp + slope[k - 1] * dp * dp / 2.0 + ds * dp * dp / 6.0;
            primitive.push(primitive[k - 1] + cell);
        }
        let lipschitz = slope
            .windows(2)
            .map(|w| (w[1] - w[0]).abs() / dp)
            .fold(0.0, f64::max);
        let growth = slope
            .iter()
            .enumerate()
            .map(|(k, s)| s / ((p_min + k as f64 * dp).abs() + 1.0))
            .fold(0.0, f64::max);
        let mut table = ConjugateTable {
            p_min,
            dp,
            slope,
            value,
            primitive,
            primitive_at_zero: 0.0,
            lipschitz,
            growth,
            non_unique_nodes,
        };
        table.primitive_at_zero = table.primitive_raw(0.0);
        Ok(table)
    }

    pub fn p_min(&self) -> f64 {
        self.p_min
    }

    pub fn p_max(&self) -> f64 {
        self.p_min + self.dp * (self.slope.len() - 1) as f64
    }

    pub fn nodes(&self) -> usize {
        self.slope.len()
    }

    /// Measured Lipschitz constant of `(H*)'`.
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// Measured `C` in `(H*)'(p) <= C (|p| + 1)`.
    pub fn growth_constant(&self) -> f64 {
        self.growth
    }

    /// Number of nodes where the maximizer was not unique.
    pub fn non_unique_nodes(&self) -> usize {
        self.non_unique_nodes
    }

    pub fn node(&self, k: usize) -> (f64, f64, f64, f64) {
        let p = self.p_min + k as f64 * self.dp;
        (p, self.value[k], self.slope[k], self.primitive[k] - self.primitive_at_zero)
    }

    fn locate(&self, p: f64) -> (usize, f64) {
        let last = self.slope.len() - 1;
        let s = (p - self.p_min) / self.dp;
        let k = (s.floor().max(0.0) as usize).min(last - 1);
        (k, p - (self.p_min + k as f64 * self.dp))
    }

    fn derivative(&self, p: f64) -> f64 {
        let last = self.slope.len() - 1;
        if p <= self.p_min {
            return self.slope[0];
        }
        if p >= self.p_max() {
            return self.slope[last];
        }
        let (k, t) = self.locate(p);
        self.slope[k] + (self.slope[k + 1] - self.slope[k]) * t / self.dp
    }

    fn value(&self, p: f64) -> f64 {
        let last = self.slope.len() - 1;
        if p <= self.p_min {
            return self.value[0] + self.slope[0] * (p - self.p_min);
        }
        if p >= self.p_max() {
            return self.value[last] + self.slope[last] * (p - self.p_max());
        }
        let (k, t) = self.locate(p);
        let ds = self.slope[k + 1] - self.slope[k];
        self.value[k] + self.slope[k] * t + ds * t * t / (2.0 * self.dp)
    }

    fn primitive_raw(&self, p: f64) -> f64 {
        let last = self.slope.len() - 1;
        if p <= self.p_min {
            let t = p - self.p_min;
            return self.value[0] * t + self.slope[0] * t * t / 2.0;
        }
        if p >= self.p_max() {
            let t = p - self.p_max();
            return self.primitive[last] + self.value[last] * t + self.slope[last] * t * t / 2.0;
        }
        let (k, t) = self.locate(p);
        let ds = self.slope[k + 1] - self.slope[k];
        self.primitive[k]
            + self.value[k] * t
            + self.slope[k] * t * t / 2.0
            + ds * t * t * t / (6.0 * self.dp)
    }

    fn potential(&self, r: f64) -> f64 {
        self.primitive_raw(r) - self.primitive_at_zero
    }
}

/// The conjugate Hamiltonian as consumed by the PDE solvers.
#[derive(Debug, Clone)]
pub enum ConjugateHamiltonian {
    /// Closed form for `h(u) = alpha1 u^2 + alpha2`:
    /// `H*(p) = max(p, 0)^2 / (4 alpha1) - alpha2`.
    Quadratic { alpha1: f64, alpha2: f64 },
    /// `H*(p) = slope * p + intercept`. Not the conjugate of an admissible
    /// cost; it turns the transformed equation into a linear heat equation
    /// and serves as an analytic reference.
    Affine { slope: f64, intercept: f64 },
    Tabulated(Arc<ConjugateTable>),
}

impl ConjugateHamiltonian {
    /// Closed form for quadratic costs, otherwise a table on
    /// `[-range, range]` with [`DEFAULT_TABLE_NODES`] nodes.
    pub fn from_cost(cost: &RunningCost, range: f64) -> Result<Self> {
        match cost {
            RunningCost::Quadratic { alpha1, alpha2 } => Ok(ConjugateHamiltonian::Quadratic {
                alpha1: *alpha1,
                alpha2: *alpha2,
            }),
            RunningCost::Custom { .. } => Self::tabulate(cost, -range, range, DEFAULT_TABLE_NODES),
        }
    }

    pub fn tabulate(cost: &RunningCost, p_min: f64, p_max: f64, nodes: usize) -> Result<Self> {
        Ok(ConjugateHamiltonian::Tabulated(Arc::new(ConjugateTable::build(
            cost, p_min, p_max, nodes,
        )?)))
    }

    /// The linear reference conjugate `H*(v) = v`.
    pub fn identity() -> Self {
        ConjugateHamiltonian::Affine {
            slope: 1.0,
            intercept: 0.0,
        }
    }

    /// Symmetric table range anticipated by a solve: `sigma_max^2 * |y|_inf`
    /// with a safety factor of two.
    pub fn anticipated_range(sigma_max: f64, y_sup: f64) -> f64 {
        2.0 * sigma_max * sigma_max * y_sup.max(1.0)
    }

    pub fn value(&self, p: f64) -> f64 {
        match self {
            ConjugateHamiltonian::Quadratic { alpha1, alpha2 } => {
                let q = p.max(0.0);
                q * q / (4.0 * alpha1) - alpha2
            }
            ConjugateHamiltonian::Affine { slope, intercept } => slope * p + intercept,
            ConjugateHamiltonian::Tabulated(t) => t.value(p),
        }
    }

    pub fn derivative(&self, p: f64) -> f64 {
        match self {
            ConjugateHamiltonian::Quadratic { alpha1, .. } => p.max(0.0) / (2.0 * alpha1),
            ConjugateHamiltonian::Affine { slope, .. } => *slope,
            ConjugateHamiltonian::Tabulated(t) => t.derivative(p),
        }
    }

    pub fn potential(&self, r: f64) -> f64 {
        match self {
            ConjugateHamiltonian::Quadratic { alpha1, alpha2 } => {
                let q = r.max(0.0);
                q * q * q / (12.0 * alpha1) - alpha2 * r
            }
            ConjugateHamiltonian::Affine { slope, intercept } => 0.5 * slope * r * r + intercept * r,
            ConjugateHamiltonian::Tabulated(t) => t.potential(r),
        }
    }

    /// `|| (H*)'' ||_inf`, i.e. the Lipschitz constant of `(H*)'`.
    pub fn second_derivative_bound(&self) -> f64 {
        match self {
            ConjugateHamiltonian::Quadratic { alpha1, .. } => 1.0 / (2.0 * alpha1),
            ConjugateHamiltonian::Affine { .. } => 0.0,
            ConjugateHamiltonian::Tabulated(t) => t.lipschitz(),
        }
    }

    /// False when `p` lies outside a table and extrapolation is used.
    pub fn in_range(&self, p: f64) -> bool {
        match self {
            ConjugateHamiltonian::Tabulated(t) => p >= t.p_min() && p <= t.p_max(),
            _ => true,
        }
    }
}

/// Empirical constant `C2` in `H*(v) v <= (C2 - 1) j(v)` over the probe
/// points with `j(v) > 0`. `None` when the inequality cannot hold for any
/// finite constant (some probe has `H*(v) v > 0` and `j(v) <= 0`).
pub fn growth_ratio_constant(conj: &ConjugateHamiltonian, probes: &[f64]) -> Option<f64> {
    let mut worst: f64 = 0.0;
    for &v in probes {
        let lhs = conj.value(v) * v;
        let j = conj.potential(v);
        if j > 1e-300 {
            worst = worst.max(lhs / j);
        } else if lhs > 1e-14 {
            return None;
        }
    }
    Some(worst + 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_quadratic() -> RunningCost {
        RunningCost::quadratic(1.0, 0.0).unwrap()
    }

    fn numeric_square() -> RunningCost {
        RunningCost::custom(|u| u * u, 1.0, 0.0).unwrap()
    }

    /// Brute-force sup of `p u - h(u)` on a uniform grid over `[0, 10]`.
    fn brute_sup(h: impl Fn(f64) -> f64, p: f64) -> (f64, f64) {
        let step = 1e-5;
        let mut best = (f64::NEG_INFINITY, 0.0);
        for k in 0..=1_000_000 {
            let u = k as f64 * step;
            let v = p * u - h(u);
            if v > best.0 {
                best = (v, u);
            }
        }
        best
    }

    #[test]
    fn brute_force_oracle_matches_closed_form() {
        let (sup, arg) = brute_sup(|u| u * u, 2.0);
        assert!((sup - 1.0).abs() < 1e-9);
        assert!((arg - 1.0).abs() < 1e-5);
        for cost in [unit_quadratic(), numeric_square()] {
            assert!((conjugate(&cost, 2.0).unwrap() - 1.0).abs() < 1e-10);
            assert!((conjugate_derivative(&cost, 2.0).unwrap() - 1.0).abs() < 1e-7);
        }
    }

    #[test]
    fn nonpositive_slopes_give_zero() {
        for cost in [unit_quadratic(), numeric_square()] {
            assert_eq!(conjugate(&cost, -3.0).unwrap(), 0.0);
            assert_eq!(conjugate(&cost, 0.0).unwrap(), 0.0);
            assert_eq!(conjugate_derivative(&cost, -5.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn derivative_matches_central_difference() {
        let step = 1e-6;
        for cost in [unit_quadratic(), numeric_square()] {
            let fd = (conjugate(&cost, 2.0 + step).unwrap() - conjugate(&cost, 2.0 - step).unwrap())
                / (2.0 * step);
            assert!((fd - 1.0).abs() < 1e-4, "fd = {fd}");
        }
    }

    #[test]
    fn potential_values() {
        // quadrature oracle: composite Simpson of p^2/4 on [0, 2]
        let n = 2000;
        let hstep = 2.0 / n as f64;
        let f = |p: f64| p * p / 4.0;
        let simpson: f64 = (0..n)
            .map(|k| {
                let a = k as f64 * hstep;
                hstep / 6.0 * (f(a) + 4.0 * f(a + hstep / 2.0) + f(a + hstep))
            })
            .sum();
        assert!((simpson - 2.0 / 3.0).abs() < 1e-12);
        for cost in [unit_quadratic(), numeric_square()] {
            assert!((potential(&cost, 2.0).unwrap() - simpson).abs() < 1e-9);
            assert_eq!(potential(&cost, 0.0).unwrap(), 0.0);
            assert!(potential(&cost, -1.0).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn affine_cost_ties_break_to_smallest() {
        // h(u) = u^2 for u <= 1 and 2u - 1 afterwards, then steeper. The
        // maximizers of 2u - h(u) form the interval [1, 2].
        let h = |u: f64| {
            if u <= 1.0 {
                u * u
            } else if u <= 2.0 {
                2.0 * u - 1.0
            } else {
                u * u - 2.0 * u + 3.0
            }
        };
        let cost = RunningCost::custom(h, 0.1, 0.0).unwrap();
        let m = maximize(&cost, 2.0).unwrap();
        assert!(!m.unique);
        assert!((m.argmax - 1.0).abs() < 1e-6, "argmax {}", m.argmax);
        assert!((m.value - 1.0).abs() < 1e-10);
    }

    #[test]
    fn nonconvex_cost_is_rejected() {
        let h = |u: f64| u * u + 3.0 * (3.0 * u).sin().abs();
        assert!(matches!(
            RunningCost::custom(h, 1.0, 0.0),
            Err(Error::NonConvexCost(_))
        ));
        let bad = RunningCost::Custom {
            h: Arc::new(|u: f64| u * u + 2.0 * (2.0 * u).sin()),
            alpha1: 0.5,
            alpha2: 0.0,
        };
        assert!(matches!(maximize(&bad, 1.0), Err(Error::NonConvexCost(_))));
    }

    #[test]
    fn coercivity_is_checked() {
        assert!(RunningCost::quadratic(0.0, 0.0).is_err());
        assert!(RunningCost::custom(|u| 0.5 * u * u, 1.0, 0.0).is_err());
    }

    #[test]
    fn quadratic_with_offset() {
        let cost = RunningCost::quadratic(2.0, 0.5).unwrap();
        assert!((conjugate(&cost, 4.0).unwrap() - (16.0 / 8.0 - 0.5)).abs() < 1e-15);
        assert_eq!(conjugate(&cost, -1.0).unwrap(), -0.5);
        let conj = ConjugateHamiltonian::from_cost(&cost, 10.0).unwrap();
        assert_eq!(conj.value(-1.0), -0.5);
        // j(r) = r^3/24 - r/2
        assert!((conj.potential(3.0) - (27.0 / 24.0 - 1.5)).abs() < 1e-14);
        assert!((potential(&cost, 3.0).unwrap() - conj.potential(3.0)).abs() < 1e-14);
    }

    #[test]
    fn table_matches_closed_form() {
        let table = ConjugateTable::build(&numeric_square(), -8.0, 8.0, 1025).unwrap();
        let conj = ConjugateHamiltonian::Tabulated(Arc::new(table.clone()));
        let exact = ConjugateHamiltonian::Quadratic {
            alpha1: 1.0,
            alpha2: 0.0,
        };
        for k in 0..=200 {
            let p = -9.0 + 18.0 * k as f64 / 200.0;
            let in_range = conj.in_range(p);
            assert_eq!(in_range, (-8.0..=8.0).contains(&p));
            if in_range {
                assert!((conj.value(p) - exact.value(p)).abs() < 1e-7, "p = {p}");
                assert!((conj.derivative(p) - exact.derivative(p)).abs() < 1e-7);
                assert!((conj.potential(p) - exact.potential(p)).abs() < 1e-6);
            }
        }
        // constant extrapolation of the derivative
        assert!((conj.derivative(20.0) - 4.0).abs() < 1e-7);
        assert!((table.lipschitz() - 0.5).abs() < 1e-5);
        assert!(table.growth_constant() <= 0.5 + 1e-9);
        assert_eq!(table.non_unique_nodes(), 0);
        assert_eq!(conj.potential(0.0), 0.0);
    }

    #[test]
    fn growth_ratio_for_quadratic_is_four() {
        let conj = ConjugateHamiltonian::Quadratic {
            alpha1: 1.0,
            alpha2: 0.0,
        };
        let probes: Vec<f64> = (-50..=50).map(|k| k as f64 * 0.2).collect();
        let c2 = growth_ratio_constant(&conj, &probes).unwrap();
        assert!((c2 - 4.0).abs() < 1e-12);
    }
}
