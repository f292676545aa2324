//! The contact Hamiltonian (Lie) system
//!
//! ```text
//! xi'  = H_p(xi, s, u, eta)
//! eta' = -H_x(xi, s, u, eta) - H_u(xi, s, u, eta) eta
//! u'   = <eta, H_p> - H
//! ```
//!
//! integrated with fixed-step RK4, and the gradient propagation inequalities
//! evaluated along the resulting paths.

use thiserror::Error;

use crate::bounds::radius_r;
use crate::hamiltonians::{Hamiltonian, StructuralConstants};
use crate::initial_data::InitialDatum;
use crate::vector::{dist, dot, norm, scale, sub};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CharacteristicsError {
    #[error("integration time must be positive, got {0}")]
    NonpositiveTime(f64),
    #[error("at least one step is required")]
    ZeroSteps,
    #[error("step size underflows for t = {t} and {steps} steps")]
    StepUnderflow { t: f64, steps: usize },
    #[error("H_p is undefined at s = {s}: eta = {eta:?} is a kink of H")]
    Singular { s: f64, eta: Vec<f64> },
    #[error("point and covector dimensions differ from the model dimension {0}")]
    DimensionMismatch(usize),
    #[error("the model carries no lambda")]
    MissingLambda,
    #[error("non-finite state at s = {0}")]
    NonFinite(f64),
}

pub type Result<T> = std::result::Result<T, CharacteristicsError>;

/// `xi(t) = x`, `eta(t) = p`, `u_xi(t) = u`.
#[derive(Debug, Clone, PartialEq)]
pub struct TerminalCondition {
    pub x: Vec<f64>,
    pub t: f64,
    pub p: Vec<f64>,
    pub u: f64,
}

/// Samples of `(xi, eta, u_xi)` at the nodes `0 = s_0 < ... < s_m = t`.
#[derive(Debug, Clone, PartialEq)]
pub struct CharacteristicPath {
    pub times: Vec<f64>,
    pub xi: Vec<Vec<f64>>,
    pub eta: Vec<Vec<f64>>,
    pub u_xi: Vec<f64>,
}

impl CharacteristicPath {
    pub fn step_count(&self) -> usize {
        self.times.len() - 1
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// `(xi(0), eta(0), u_xi(0))`
    pub fn start(&self) -> (&[f64], &[f64], f64) {
        (&self.xi[0], &self.eta[0], self.u_xi[0])
    }

    /// `(xi(t), eta(t), u_xi(t))`
    pub fn end(&self) -> (&[f64], &[f64], f64) {
        let m = self.step_count();
        (&self.xi[m], &self.eta[m], self.u_xi[m])
    }
}

#[derive(Clone)]
struct State {
    xi: Vec<f64>,
    eta: Vec<f64>,
    u: f64,
}

impl State {
    fn shifted(&self, h: f64, k: &State) -> State {
        State {
            xi: self.xi.iter().zip(&k.xi).map(|(a, b)| a + h * b).collect(),
            eta: self
                .eta
                .iter()
                .zip(&k.eta)
                .map(|(a, b)| a + h * b)
                .collect(),
            u: self.u + h * k.u,
        }
    }
}

fn rhs(model: &dyn Hamiltonian, s: f64, y: &State) -> Result<State> {
    if model.is_subdifferential_point(&y.xi, s, y.u, &y.eta) {
        return Err(CharacteristicsError::Singular {
            s,
            eta: y.eta.clone(),
        });
    }
    let hp = model.grad_p(&y.xi, s, y.u, &y.eta);
    let hx = model.grad_x(&y.xi, s, y.u, &y.eta);
    let hu = model.grad_u(&y.xi, s, y.u, &y.eta);
    let h = model.eval(&y.xi, s, y.u, &y.eta);
    let deta = hx.iter().zip(&y.eta).map(|(a, e)| -a - hu * e).collect();
    Ok(State {
        u: dot(&y.eta, &hp) - h,
        xi: hp,
        eta: deta,
    })
}

fn rk4_step(model: &dyn Hamiltonian, s: f64, h: f64, y: &State) -> Result<State> {
    let k1 = rhs(model, s, y)?;
    let k2 = rhs(model, s + 0.5 * h, &y.shifted(0.5 * h, &k1))?;
    let k3 = rhs(model, s + 0.5 * h, &y.shifted(0.5 * h, &k2))?;
    let k4 = rhs(model, s + h, &y.shifted(h, &k3))?;
    let w = h / 6.0;
    let next = State {
        xi: (0..y.xi.len())
            .map(|i| y.xi[i] + w * (k1.xi[i] + 2.0 * k2.xi[i] + 2.0 * k3.xi[i] + k4.xi[i]))
            .collect(),
        eta: (0..y.eta.len())
            .map(|i| y.eta[i] + w * (k1.eta[i] + 2.0 * k2.eta[i] + 2.0 * k3.eta[i] + k4.eta[i]))
            .collect(),
        u: y.u + w * (k1.u + 2.0 * k2.u + 2.0 * k3.u + k4.u),
    };
    if next.u.is_finite() && next.xi.iter().chain(&next.eta).all(|v| v.is_finite()) {
        Ok(next)
    } else {
        Err(CharacteristicsError::NonFinite(s + h))
    }
}

fn validate(model: &dyn Hamiltonian, x: &[f64], p: &[f64], t: f64, steps: usize) -> Result<f64> {
    let n = model.dimension();
    if x.len() != n || p.len() != n {
        return Err(CharacteristicsError::DimensionMismatch(n));
    }
    if !(t > 0.0) {
        return Err(CharacteristicsError::NonpositiveTime(t));
    }
    if steps == 0 {
        return Err(CharacteristicsError::ZeroSteps);
    }
    let h = t / steps as f64;
    if !(h > 0.0) {
        return Err(CharacteristicsError::StepUnderflow { t, steps });
    }
    Ok(h)
}

/// Integrates from `s = t` down to `s = 0` with `steps` uniform RK4 steps.
pub fn integrate_backward(
    model: &dyn Hamiltonian,
    terminal: &TerminalCondition,
    steps: usize,
) -> Result<CharacteristicPath> {
    let h = validate(model, &terminal.x, &terminal.p, terminal.t, steps)?;
    let mut y = State {
        xi: terminal.x.clone(),
        eta: terminal.p.clone(),
        u: terminal.u,
    };
    let mut nodes = vec![(terminal.t, y.clone())];
    for k in (0..steps).rev() {
        let s = (k + 1) as f64 * h;
        y = rk4_step(model, s, -h, &y)?;
        nodes.push((k as f64 * h, y.clone()));
    }
    nodes.reverse();
    nodes[steps].0 = terminal.t;
    Ok(collect(nodes))
}

/// Integrates from `s = 0` up to `s = t`.
pub fn integrate_forward(
    model: &dyn Hamiltonian,
    xi0: &[f64],
    eta0: &[f64],
    u0: f64,
    t: f64,
    steps: usize,
) -> Result<CharacteristicPath> {
    let h = validate(model, xi0, eta0, t, steps)?;
    let mut y = State {
        xi: xi0.to_vec(),
        eta: eta0.to_vec(),
        u: u0,
    };
    let mut nodes = vec![(0.0, y.clone())];
    for k in 0..steps {
        y = rk4_step(model, k as f64 * h, h, &y)?;
        nodes.push(((k + 1) as f64 * h, y.clone()));
    }
    nodes[steps].0 = t;
    Ok(collect(nodes))
}

fn collect(nodes: Vec<(f64, State)>) -> CharacteristicPath {
    let mut path = CharacteristicPath {
        times: Vec::with_capacity(nodes.len()),
        xi: Vec::with_capacity(nodes.len()),
        eta: Vec::with_capacity(nodes.len()),
        u_xi: Vec::with_capacity(nodes.len()),
    };
    for (s, y) in nodes {
        path.times.push(s);
        path.xi.push(y.xi);
        path.eta.push(y.eta);
        path.u_xi.push(y.u);
    }
    path
}

/// Max over interior nodes of `|u_xi'(s) - <eta, xi'> + H|`, with both
/// derivatives taken by central differences.
pub fn herglotz_residual(model: &dyn Hamiltonian, path: &CharacteristicPath) -> f64 {
    let m = path.step_count();
    let mut worst: f64 = 0.0;
    for i in 1..m {
        let h2 = path.times[i + 1] - path.times[i - 1];
        let du = (path.u_xi[i + 1] - path.u_xi[i - 1]) / h2;
        let dxi = scale(&sub(&path.xi[i + 1], &path.xi[i - 1]), 1.0 / h2);
        let h = model.eval(&path.xi[i], path.times[i], path.u_xi[i], &path.eta[i]);
        worst = worst.max((du - dot(&path.eta[i], &dxi) + h).abs());
    }
    worst
}

/// One inequality `lhs <= rhs` evaluated along a path.
#[derive(Debug, Clone, PartialEq)]
pub struct InequalityCheck {
    pub name: &'static str,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

pub const CHECK_TOL: f64 = 1e-9;

impl InequalityCheck {
    pub fn new(name: &'static str, lhs: f64, rhs: f64) -> Self {
        Self {
            name,
            lhs,
            rhs,
            pass: lhs <= rhs + CHECK_TOL,
        }
    }

    /// `rhs - lhs`
    pub fn slack(&self) -> f64 {
        self.rhs - self.lhs
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CheckReport {
    pub checks: Vec<InequalityCheck>,
}

impl CheckReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn get(&self, name: &str) -> Option<&InequalityCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    fn push(&mut self, name: &'static str, lhs: f64, rhs: f64) {
        self.checks.push(InequalityCheck::new(name, lhs, rhs));
    }
}

/// How far the terminal gradient `eta(t)` can drift from `eta(0)` given the
/// structural constants, plus the resulting two-sided bounds on `|eta(t)|`.
pub fn check_propagation(
    path: &CharacteristicPath,
    constants: &StructuralConstants,
) -> CheckReport {
    let (_, eta0, _) = path.start();
    let (_, eta_t, _) = path.end();
    let t = path.final_time();
    let gap = dist(eta_t, eta0);
    let (a, b) = (norm(eta0), norm(eta_t));
    let (c1, beta, k3) = (constants.c1, constants.beta, constants.k3);
    let mut report = CheckReport::default();
    if constants.is_degenerate() {
        report.push("identity", gap, 0.0);
        return report;
    }
    let k = c1 + k3;
    let d = constants.drift_ratio();
    let grow = (k * t).exp_m1();
    report.push("gap_vs_terminal", gap, (d + b) * grow);
    report.push("gap_vs_initial", gap, (d + a) * grow);
    report.push("lower", a * (-k * t).exp() + d * (-k * t).exp_m1(), b);
    report.push("upper", b, a * (k * t).exp() + d * grow);
    if k3 == 0.0 {
        report.push(
            "lower_k3_zero",
            a * (-c1 * t).exp() + beta * (-c1 * t).exp_m1(),
            b,
        );
        report.push(
            "upper_k3_zero",
            b,
            a * (c1 * t).exp() + beta * (c1 * t).exp_m1(),
        );
    }
    if beta == 0.0 {
        report.push("lower_beta_zero", a * (-k * t).exp(), b);
        report.push("upper_beta_zero", b, a * (k * t).exp());
    }
    if c1 == 0.0 {
        report.push("lower_c1_zero", a * (-k3 * t).exp(), b);
        report.push("upper_c1_zero", b, a * (k3 * t).exp());
    }
    report
}

/// `|xi(t) - xi(0)| <= R(xi(t), t)`.
pub fn check_spatial(path: &CharacteristicPath, constants: &StructuralConstants) -> CheckReport {
    let (x0, _, _) = path.start();
    let (x, _, _) = path.end();
    let t = path.final_time();
    let radius = radius_r(constants, x, t).unwrap_or(f64::INFINITY);
    let mut report = CheckReport::default();
    report.push("spatial", dist(x, x0), radius);
    report
}

/// The sharper drift estimates available when `H = lambda u + H0`.
pub fn check_special_propagation(
    path: &CharacteristicPath,
    constants: &StructuralConstants,
) -> Result<CheckReport> {
    let lambda = constants
        .lambda
        .ok_or(CharacteristicsError::MissingLambda)?;
    let (_, eta0, _) = path.start();
    let (_, eta_t, _) = path.end();
    let t = path.final_time();
    let (a, b) = (norm(eta0), norm(eta_t));
    let (c1, beta) = (constants.c1, constants.beta);
    let drift = |factor: f64| dist(eta_t, &scale(eta0, factor));
    let mut report = CheckReport::default();

    if c1 + lambda != 0.0 {
        let q = c1 * beta / (c1 + lambda);
        report.push(
            "drift_vs_terminal",
            drift((-lambda * t).exp()),
            q * ((c1 * t).exp() - (-lambda * t).exp()) + b * (c1 * t).exp_m1(),
        );
        let kk = c1 + lambda;
        report.push(
            "special_lower",
            a * (-kk * t).exp() + q * (-kk * t).exp_m1(),
            b,
        );
    } else {
        report.push(
            "drift_vs_terminal",
            drift((c1 * t).exp()),
            c1 * beta * t * (c1 * t).exp() + b * (c1 * t).exp_m1(),
        );
        report.push("special_lower", a - c1 * beta * t, b);
    }

    if c1 != lambda {
        let kk = c1 - lambda;
        let q = c1 * beta / kk;
        report.push(
            "drift_vs_initial",
            drift((-lambda * t).exp()),
            q * (kk * t).exp_m1() + a * ((kk * t).exp() - (-lambda * t).exp()),
        );
        report.push(
            "special_upper",
            b,
            a * (kk * t).exp() + q * (kk * t).exp_m1(),
        );
    } else {
        report.push(
            "drift_vs_initial",
            drift((-c1 * t).exp()),
            c1 * beta * t - a * (-c1 * t).exp_m1(),
        );
        report.push("special_upper", b, a + c1 * beta * t);
    }
    Ok(report)
}

/// Distance from `eta(0)` to the subdifferential of the datum at `xi(0)`;
/// `+infinity` when that set is empty.
pub fn endpoint_subgradient_residual(path: &CharacteristicPath, datum: &InitialDatum) -> f64 {
    let (xi0, eta0, _) = path.start();
    datum.subgradient_set(xi0).distance(eta0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonians::{BuiltinHamiltonian, BuiltinKind, ConstantHamiltonian};
    use proptest::prelude::*;

    fn builtin(kind: BuiltinKind) -> BuiltinHamiltonian {
        BuiltinHamiltonian::new(kind, 1).unwrap()
    }

    fn transport_terminal(p: f64) -> TerminalCondition {
        TerminalCondition {
            x: vec![0.5],
            t: 2f64.ln(),
            p: vec![p],
            u: 0.375,
        }
    }

    #[test]
    fn transport_backward_matches_closed_form() {
        let h = builtin(BuiltinKind::TransportPlus);
        let path = integrate_backward(&h, &transport_terminal(-0.25), 1000).unwrap();
        let (xi0, eta0, u0) = path.start();
        assert!((xi0[0] - 0.25).abs() < 1e-10);
        assert!((eta0[0] + 1.0).abs() < 1e-10);
        assert!((u0 - 0.75).abs() < 1e-10);
        assert_eq!(path.times[0], 0.0);
        assert_eq!(path.final_time(), 2f64.ln());
        assert_eq!(path.step_count(), 1000);
    }

    #[test]
    fn eikonal_backward_matches_closed_form() {
        let h = builtin(BuiltinKind::Eikonal { c: 1.0 });
        let e = (-0.25f64).exp();
        let terminal = TerminalCondition {
            x: vec![0.25],
            t: 0.25,
            p: vec![-e],
            u: 0.5 * e,
        };
        let path = integrate_backward(&h, &terminal, 1000).unwrap();
        let (xi0, eta0, u0) = path.start();
        assert!((xi0[0] - 0.5).abs() < 1e-10);
        assert!((eta0[0] + 1.0).abs() < 1e-10);
        assert!((u0 - 0.5).abs() < 1e-10);
    }

    #[test]
    fn tiny_interval_keeps_terminal_data() {
        let h = builtin(BuiltinKind::TransportPlus);
        let terminal = TerminalCondition {
            x: vec![0.3],
            t: 1e-9,
            p: vec![0.7],
            u: 1.1,
        };
        let path = integrate_backward(&h, &terminal, 1).unwrap();
        let (xi0, eta0, u0) = path.start();
        assert!(
            (xi0[0] - 0.3).abs() < 1e-8 && (eta0[0] - 0.7).abs() < 1e-8 && (u0 - 1.1).abs() < 1e-8
        );
    }

    #[test]
    fn errors_are_reported() {
        let h = builtin(BuiltinKind::Eikonal { c: 1.0 });
        let terminal = TerminalCondition {
            x: vec![0.0],
            t: 0.5,
            p: vec![0.0],
            u: 0.0,
        };
        assert!(matches!(
            integrate_backward(&h, &terminal, 10),
            Err(CharacteristicsError::Singular { .. })
        ));
        let ok = TerminalCondition {
            p: vec![1.0],
            ..terminal.clone()
        };
        assert_eq!(
            integrate_backward(&h, &ok, 0),
            Err(CharacteristicsError::ZeroSteps)
        );
        let bad_t = TerminalCondition {
            t: 0.0,
            ..ok.clone()
        };
        assert!(matches!(
            integrate_backward(&h, &bad_t, 5),
            Err(CharacteristicsError::NonpositiveTime(_))
        ));
        let bad_dim = TerminalCondition {
            x: vec![0.0, 1.0],
            ..ok
        };
        assert!(matches!(
            integrate_backward(&h, &bad_dim, 5),
            Err(CharacteristicsError::DimensionMismatch(1))
        ));
    }

    #[test]
    fn forward_examples() {
        let h = builtin(BuiltinKind::TransportPlus);
        let back = integrate_backward(&h, &transport_terminal(-0.25), 1000).unwrap();
        let (xi0, eta0, u0) = back.start();
        let fwd = integrate_forward(&h, xi0, eta0, u0, 2f64.ln(), 1000).unwrap();
        let (x, p, u) = fwd.end();
        assert!(
            (x[0] - 0.5).abs() < 1e-9 && (p[0] + 0.25).abs() < 1e-9 && (u - 0.375).abs() < 1e-9
        );

        let zero = ConstantHamiltonian {
            value: 0.0,
            dimension: 2,
        };
        let path = integrate_forward(&zero, &[0.1, 0.2], &[1.0, -1.0], 0.5, 1.0, 10).unwrap();
        assert!(path.xi.iter().all(|x| x == &vec![0.1, 0.2]));
        assert!(path.eta.iter().all(|p| p == &vec![1.0, -1.0]));
        assert!(path.u_xi.iter().all(|&u| u == 0.5));

        let q = builtin(BuiltinKind::Quadratic { lambda: 1.0 });
        let path = integrate_forward(&q, &[0.0], &[1.0], 0.0, 1.0, 1000).unwrap();
        assert!((path.end().0[0] - (1.0 - (-1.0f64).exp())).abs() < 1e-8);
    }

    #[test]
    fn propagation_checks_on_closed_form_paths() {
        let h = builtin(BuiltinKind::TransportPlus);
        let path = integrate_backward(&h, &transport_terminal(-0.25), 1000).unwrap();
        let rep = check_propagation(&path, &h.constants());
        assert!(rep.pass(), "{rep:?}");
        let tight = rep.get("lower_beta_zero").unwrap();
        assert!(tight.slack().abs() < 1e-9);

        let zero = ConstantHamiltonian {
            value: 2.0,
            dimension: 1,
        };
        let path = integrate_forward(&zero, &[0.0], &[0.4], 0.0, 1.0, 4).unwrap();
        let rep = check_propagation(&path, &zero.constants());
        assert_eq!(rep.checks.len(), 1);
        assert_eq!(rep.get("identity").unwrap().lhs, 0.0);

        let e = builtin(BuiltinKind::Eikonal { c: 1.0 });
        let terminal = TerminalCondition {
            x: vec![0.25],
            t: 0.25,
            p: vec![-(-0.25f64).exp()],
            u: 0.5 * (-0.25f64).exp(),
        };
        let path = integrate_backward(&e, &terminal, 1000).unwrap();
        let rep = check_propagation(&path, &e.constants());
        assert!(rep.pass());
        assert!(rep.get("lower_c1_zero").unwrap().slack().abs() < 1e-9);
    }

    #[test]
    fn spatial_checks() {
        let h = builtin(BuiltinKind::TransportPlus);
        let path = integrate_backward(&h, &transport_terminal(-0.25), 1000).unwrap();
        let c = check_spatial(&path, &h.constants());
        let s = c.get("spatial").unwrap();
        assert!((s.lhs - 0.25).abs() < 1e-10 && (s.rhs - 0.5).abs() < 1e-12 && s.pass);

        let e = builtin(BuiltinKind::Eikonal { c: 1.0 });
        let terminal = TerminalCondition {
            x: vec![0.25],
            t: 0.25,
            p: vec![-(-0.25f64).exp()],
            u: 0.5 * (-0.25f64).exp(),
        };
        let path = integrate_backward(&e, &terminal, 1000).unwrap();
        let s = check_spatial(&path, &e.constants());
        assert!(s.pass() && (s.checks[0].slack()).abs() < 1e-10);
    }

    #[test]
    fn special_checks() {
        let h = builtin(BuiltinKind::TransportPlus);
        let path = integrate_backward(&h, &transport_terminal(-0.25), 1000).unwrap();
        let rep = check_special_propagation(&path, &h.constants()).unwrap();
        let d = rep.get("drift_vs_initial").unwrap();
        assert!((d.lhs - 0.25).abs() < 1e-9 && (d.rhs - 0.5).abs() < 1e-9);
        assert!(rep.pass(), "{rep:?}");

        let neg = builtin(BuiltinKind::TransportNegU);
        let terminal = TerminalCondition {
            x: vec![0.4],
            t: 0.3,
            p: vec![-1.0],
            u: 0.3f64.exp() - 0.4,
        };
        let path = integrate_backward(&neg, &terminal, 1000).unwrap();
        let rep = check_special_propagation(&path, &neg.constants()).unwrap();
        assert!(rep.pass(), "{rep:?}");
        let d = rep.get("drift_vs_terminal").unwrap();
        assert!(d.slack().abs() < 1e-9);
        assert!(rep.get("special_lower").unwrap().slack().abs() < 1e-9);

        // With beta = 0 and lambda = 0 the special lower bound is the general one.
        let c = StructuralConstants::new(1.0, 0.0, 1.0, 0.0, 0.0, Some(0.0)).unwrap();
        let rep_s = check_special_propagation(&path, &c).unwrap();
        let rep_g = check_propagation(&path, &c);
        assert!(
            (rep_s.get("special_lower").unwrap().lhs - rep_g.get("lower").unwrap().lhs).abs()
                < 1e-15
        );
        assert!(
            (rep_s.get("special_upper").unwrap().rhs - rep_g.get("upper").unwrap().rhs).abs()
                < 1e-15
        );

        let no_lambda = StructuralConstants::new(1.0, 0.0, 1.0, 0.0, 0.0, None).unwrap();
        assert_eq!(
            check_special_propagation(&path, &no_lambda),
            Err(CharacteristicsError::MissingLambda)
        );
    }

    #[test]
    fn endpoint_residuals() {
        let cone = InitialDatum::cone(1);
        let h = builtin(BuiltinKind::TransportPlus);
        let path = integrate_backward(&h, &transport_terminal(-0.25), 1000).unwrap();
        assert!(endpoint_subgradient_residual(&path, &cone) < 1e-9);
        let bad = integrate_backward(&h, &transport_terminal(-0.5), 1000).unwrap();
        assert!(endpoint_subgradient_residual(&bad, &cone) > 0.1);

        let e = builtin(BuiltinKind::Eikonal { c: 1.0 });
        let terminal = TerminalCondition {
            x: vec![0.25],
            t: 0.25,
            p: vec![-(-0.25f64).exp()],
            u: 0.5 * (-0.25f64).exp(),
        };
        let path = integrate_backward(&e, &terminal, 1000).unwrap();
        assert!(endpoint_subgradient_residual(&path, &cone) < 1e-9);
    }

    #[test]
    fn rk4_order_on_transport() {
        let h = builtin(BuiltinKind::TransportPlus);
        let errs: Vec<f64> = [50usize, 100, 200, 400]
            .iter()
            .map(|&m| {
                let path = integrate_backward(&h, &transport_terminal(-0.25), m).unwrap();
                (path.start().1[0] + 1.0).abs()
            })
            .collect();
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!((3.0..=5.0).contains(&order), "order {order}, errs {errs:?}");
        }
    }

    #[test]
    fn herglotz_identity_along_paths() {
        let kinds = [
            BuiltinKind::TransportPlus,
            BuiltinKind::TransportMinus,
            BuiltinKind::TransportNegU,
            BuiltinKind::Eikonal { c: 1.0 },
            BuiltinKind::Quadratic { lambda: 1.0 },
        ];
        for kind in kinds {
            let h = builtin(kind);
            let terminal = TerminalCondition {
                x: vec![0.3],
                t: 0.8,
                p: vec![-0.6],
                u: 0.4,
            };
            let path = integrate_backward(&h, &terminal, 1000).unwrap();
            assert!(herglotz_residual(&h, &path) < 1e-6, "{kind}");
        }
    }

    proptest! {
        #[test]
        fn round_trip_and_propagation(
            which in 0usize..5, x in -1.0f64..1.0, y in -1.0f64..1.0, t in 0.05f64..1.0,
            p in 0.05f64..2.0, sign in 0usize..2, u in -1.0f64..1.0,
        ) {
            let kinds = [
                BuiltinKind::TransportPlus,
                BuiltinKind::TransportMinus,
                BuiltinKind::TransportNegU,
                BuiltinKind::Eikonal { c: 1.0 },
                BuiltinKind::Quadratic { lambda: 1.0 },
            ];
            let h = BuiltinHamiltonian::new(kinds[which], 2).unwrap();
            let p = if sign == 0 { p } else { -p };
            let terminal = TerminalCondition { x: vec![x, y], t, p: vec![p, 0.5 * p], u };
            let back = integrate_backward(&h, &terminal, 1000).unwrap();
            let (xi0, eta0, u0) = back.start();
            let fwd = integrate_forward(&h, xi0, eta0, u0, t, 1000).unwrap();
            let (x1, p1, u1) = fwd.end();
            prop_assert!(dist(x1, &terminal.x) < 1e-8);
            prop_assert!(dist(p1, &terminal.p) < 1e-8);
            prop_assert!((u1 - u).abs() < 1e-8);
            let c = h.constants();
            prop_assert!(check_propagation(&back, &c).pass());
            prop_assert!(check_special_propagation(&back, &c).unwrap().pass());
            if c.b2.is_finite() {
                prop_assert!(check_spatial(&back, &c).pass());
            }
        }
    }
}
