use volctl::conjugation::ConjugateHamiltonian;
use volctl::mc::InitialState;
use volctl::*;

// With u = 0 the state follows x' = tanh(x), i.e. sinh x(t) = sinh(x0) e^t.
fn uncontrolled_cost(x0: f64, horizon: f64) -> f64 {
    let path = |t: f64| (x0.sinh() * t.exp()).asinh();
    let g = |x: f64| (-x * x).exp();
    let n = 2000;
    let dt = horizon / n as f64;
    let mut s = g(path(0.0)) + g(path(horizon));
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        s += w * g(path(k as f64 * dt));
    }
    s * dt / 3.0 + g(path(horizon))
}

#[test]
fn drift_only_value_matches_the_characteristics() {
    let spec = ProblemSpec::desk();
    let exact = uncontrolled_cost(1.0, spec.horizon);
    let mut errors = Vec::new();
    for n in [201, 401] {
        let g = Grid1D::new(10.0, n).unwrap();
        let mut p = TransformedProblem::from_spec(&spec, g).unwrap();
        // zero Hamiltonian: the control is never used
        p.operands.conj = ConjugateHamiltonian::Affine { slope: 0.0, intercept: 0.0 };
        let v = reconstruct_value(&mild_solve(&p, 1e-3).unwrap());
        errors.push((v.value_at(0.0, 1.0) - exact).abs());
    }
    assert!(errors[0] < 0.04, "{errors:?}");
    assert!(errors[1] < 0.6 * errors[0], "{errors:?}");
}

#[test]
fn value_at_the_origin_is_the_feedback_cost() {
    let spec = ProblemSpec::desk();
    let g = Grid1D::new(10.0, 401).unwrap();
    let p = TransformedProblem::from_spec(&spec, g).unwrap();
    let v = reconstruct_value(&mild_solve(&p, 1e-3).unwrap());
    let policy = synthesize_feedback(&v, &p.operands);
    let mut cfg = SimConfig::new(20_000, spec.horizon, 11);
    cfg.initial = InitialState::Point(0.0);
    let r = simulate_cost(&spec, &policy, &cfg).unwrap();
    let phi = v.value_at(0.0, 0.0);
    assert!((phi - r.mean).abs() < 0.01 + 3.0 * r.stderr, "phi = {phi}, mc = {} ± {}", r.mean, r.stderr);
}
