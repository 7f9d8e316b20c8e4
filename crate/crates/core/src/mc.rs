//! Monte Carlo estimates of the expected cost of a control law.
//!
//! Paths follow Euler-Maruyama,
//! `X_{k+1} = X_k + f(X_k) dt + sqrt(u_k) sigma(X_k) sqrt(dt) xi_k`, with
//! `u_k = max(0, policy(t_k, X_k))`. Path `i` draws from its own ChaCha
//! stream (`seed`, stream `i`), so results do not depend on thread count and
//! different policies see identical noise.

use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hjb::FeedbackPolicy;
use crate::problem::ProblemSpec;

/// A control law `u(t, x)`.
pub trait ControlLaw: Sync {
    fn control(&self, t: f64, x: f64) -> f64;
}

impl ControlLaw for FeedbackPolicy {
    fn control(&self, t: f64, x: f64) -> f64 {
        self.eval(t, x)
    }
}

/// `u(t, x) = c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantControl(pub f64);

impl ControlLaw for ConstantControl {
    fn control(&self, _t: f64, _x: f64) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialState {
    Point(f64),
    Uniform { low: f64, high: f64 },
    Normal { mean: f64, std_dev: f64 },
}

impl InitialState {
    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match *self {
            InitialState::Point(x) => x,
            InitialState::Uniform { low, high } => rng.random_range(low..=high),
            InitialState::Normal { mean, std_dev } => {
                let z: f64 = rng.sample(StandardNormal);
                mean + std_dev * z
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub paths: usize,
    /// Requested step; rounded so that a whole number of steps fits `T`.
    pub dt: f64,
    pub seed: u64,
    pub initial: InitialState,
    /// Constant controls used as baselines by [`compare_policies`].
    pub baselines: Vec<f64>,
    /// Keep per-path costs in the report.
    pub keep_samples: bool,
}

impl SimConfig {
    /// `dt = T / 1000`, `X0 = 0` and baselines `0, 0.25, ..., 2`.
    pub fn new(paths: usize, horizon: f64, seed: u64) -> Self {
        SimConfig {
            paths,
            dt: horizon / 1000.0,
            seed,
            initial: InitialState::Point(0.0),
            baselines: (0..=8).map(|k| 0.25 * k as f64).collect(),
            keep_samples: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.paths < 2 {
            return Err(Error::config("simulation.paths", "need at least 2 paths"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::config("simulation.dt", format!("must be positive, got {}", self.dt)));
        }
        if let InitialState::Uniform { low, high } = self.initial {
            if !(low <= high) {
                return Err(Error::config("simulation.x0", "uniform range is empty"));
            }
        }
        Ok(())
    }
}

/// Cost statistics of one control law.
#[derive(Debug, Clone, PartialEq)]
pub struct McReport {
    pub label: String,
    pub mean: f64,
    pub stderr: f64,
    /// `1.96 * stderr`.
    pub ci_half_width: f64,
    pub paths_used: usize,
    pub excluded: usize,
    /// Per-path costs, `None` for excluded paths.
    pub samples: Option<Vec<Option<f64>>>,
}

impl McReport {
    pub fn ci(&self) -> (f64, f64) {
        (self.mean - self.ci_half_width, self.mean + self.ci_half_width)
    }

    pub fn write_samples_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "path [-],cost [cost]")?;
        if let Some(s) = &self.samples {
            for (i, c) in s.iter().enumerate() {
                match c {
                    Some(c) => writeln!(w, "{i},{c:e}")?,
                    None => writeln!(w, "{i},nan")?,
                }
            }
        }
        Ok(())
    }
}

/// Compensated summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    carry: f64,
}

impl KahanSum {
    pub fn add(&mut self, v: f64) {
        let y = v - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum
    }
}

/// Mean and standard error of a sample.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mut s = KahanSum::default();
    xs.iter().for_each(|&x| s.add(x));
    let mean = s.total() / n;
    let mut q = KahanSum::default();
    xs.iter().for_each(|&x| q.add((x - mean) * (x - mean)));
    let var = if xs.len() > 1 { q.total() / (n - 1.0) } else { 0.0 };
    (mean, (var / n).sqrt())
}

fn path_costs(spec: &ProblemSpec, policy: &dyn ControlLaw, cfg: &SimConfig) -> Vec<Option<f64>> {
    let t_end = spec.horizon;
    let steps = ((t_end / cfg.dt).round() as usize).max(1);
    let dt = t_end / steps as f64;
    let sqdt = dt.sqrt();
    (0..cfg.paths)
        .into_par_iter()
        .map(|path| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(path as u64);
            let mut x = cfg.initial.sample(&mut rng);
            let mut cost = KahanSum::default();
            for k in 0..steps {
                let t = k as f64 * dt;
                let u = policy.control(t, x).max(0.0);
                cost.add((spec.running.eval(x) + spec.cost.eval(u)) * dt);
                let xi: f64 = rng.sample(StandardNormal);
                x += spec.drift.eval(x) * dt + u.sqrt() * spec.volatility.eval(x) * sqdt * xi;
                if !x.is_finite() {
                    return None;
                }
            }
            cost.add(spec.terminal.eval(x));
            let c = cost.total();
            c.is_finite().then_some(c)
        })
        .collect()
}

fn report(label: String, costs: Vec<Option<f64>>, keep: bool) -> Result<McReport> {
    let finite: Vec<f64> = costs.iter().flatten().copied().collect();
    let excluded = costs.len() - finite.len();
    if excluded * 100 > costs.len() || finite.len() < 2 {
        return Err(Error::SimulationBlowup {
            excluded,
            total: costs.len(),
        });
    }
    let (mean, stderr) = mean_stderr(&finite);
    Ok(McReport {
        label,
        mean,
        stderr,
        ci_half_width: 1.96 * stderr,
        paths_used: finite.len(),
        excluded,
        samples: keep.then_some(costs),
    })
}

/// Estimates `E[int_0^T (g(X) + h(u)) dt + g0(X_T)]` under `policy`.
pub fn simulate_cost(spec: &ProblemSpec, policy: &dyn ControlLaw, cfg: &SimConfig) -> Result<McReport> {
    simulate_labeled(spec, policy, cfg, "policy".to_string())
}

pub fn simulate_labeled(spec: &ProblemSpec, policy: &dyn ControlLaw, cfg: &SimConfig, label: String) -> Result<McReport> {
    cfg.validate()?;
    report(label, path_costs(spec, policy, cfg), cfg.keep_samples)
}

/// Feedback against constant baselines on common random numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyComparison {
    pub feedback: McReport,
    pub baselines: Vec<(f64, McReport)>,
    /// Index into `baselines` of the smallest mean.
    pub best: usize,
    /// Feedback mean below the best baseline mean.
    pub feedback_better: bool,
    /// Feedback mean at most best baseline mean plus two feedback stderrs.
    pub within_two_stderr: bool,
    /// The two 95% intervals are disjoint.
    pub ci_separated: bool,
    /// Mean and stderr of the path-wise difference feedback minus best baseline.
    pub paired_difference: (f64, f64),
}

impl PolicyComparison {
    pub fn best_baseline(&self) -> &McReport {
        &self.baselines[self.best].1
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(
            w,
            "policy [-],control [-],mean [cost],stderr [cost],ci95_low [cost],ci95_high [cost],paths [-],excluded [-]"
        )?;
        let row = |w: &mut W, name: &str, c: &str, r: &McReport| {
            let (lo, hi) = r.ci();
            writeln!(
                w,
                "{name},{c},{:e},{:e},{:e},{:e},{},{}",
                r.mean, r.stderr, lo, hi, r.paths_used, r.excluded
            )
        };
        row(&mut w, "feedback", "", &self.feedback)?;
        for (c, r) in &self.baselines {
            row(&mut w, "constant", &format!("{c}"), r)?;
        }
        Ok(())
    }

    pub fn write_summary<W: Write>(&self, mut w: W) -> io::Result<()> {
        let best = self.best_baseline();
        writeln!(w, "feedback mean      {:.6e} +- {:.3e}", self.feedback.mean, self.feedback.ci_half_width)?;
        writeln!(
            w,
            "best constant      u = {} mean {:.6e} +- {:.3e}",
            self.baselines[self.best].0, best.mean, best.ci_half_width
        )?;
        writeln!(
            w,
            "paired difference  {:.6e} (stderr {:.3e})",
            self.paired_difference.0, self.paired_difference.1
        )?;
        writeln!(w, "feedback better    {}", self.feedback_better)?;
        writeln!(w, "within 2 stderr    {}", self.within_two_stderr)?;
        writeln!(w, "intervals disjoint {}", self.ci_separated)
    }
}

/// Simulates `feedback` and every constant in `cfg.baselines` on the same
/// noise.
pub fn compare_policies(spec: &ProblemSpec, feedback: &dyn ControlLaw, cfg: &SimConfig) -> Result<PolicyComparison> {
    cfg.validate()?;
    if cfg.baselines.is_empty() {
        return Err(Error::config("simulation.baselines", "need at least one constant control"));
    }
    let fb_costs = path_costs(spec, feedback, cfg);
    let mut baselines = Vec::with_capacity(cfg.baselines.len());
    let mut baseline_costs = Vec::with_capacity(cfg.baselines.len());
    for &c in &cfg.baselines {
        let costs = path_costs(spec, &ConstantControl(c), cfg);
        baselines.push((c, report(format!("constant {c}"), costs.clone(), cfg.keep_samples)?));
        baseline_costs.push(costs);
    }
    let feedback = report("feedback".to_string(), fb_costs.clone(), cfg.keep_samples)?;
    let best = (0..baselines.len())
        .min_by(|&a, &b| baselines[a].1.mean.total_cmp(&baselines[b].1.mean))
        .expect("non-empty");
    let diffs: Vec<f64> = fb_costs
        .iter()
        .zip(&baseline_costs[best])
        .filter_map(|(a, b)| Some((*a)? - (*b)?))
        .collect();
    let paired_difference = mean_stderr(&diffs);
    let b = &baselines[best].1;
    let (flo, fhi) = feedback.ci();
    let (blo, bhi) = b.ci();
    Ok(PolicyComparison {
        feedback_better: feedback.mean <= b.mean,
        within_two_stderr: feedback.mean <= b.mean + 2.0 * feedback.stderr,
        ci_separated: fhi < blo || bhi < flo,
        paired_difference,
        best,
        baselines,
        feedback,
    })
}
