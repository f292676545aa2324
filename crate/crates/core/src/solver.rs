//! Monotone Lax–Friedrichs scheme on 1D grids and closed-form oracles for the
//! transport and eikonal examples.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hamiltonians::{BuiltinKind, Hamiltonian};
use crate::initial_data::{
    numeric_subgradient_1d, DatumError, DatumKind, InitialDatum, SubgradientSet,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("the scheme is one-dimensional, model has dimension {0}")]
    NotOneDimensional(usize),
    #[error(
        "monotonicity violated at step {step} (t = {t}), cell {cell}: value {value} outside [{lo}, {hi}]; \
         dissipation {sigma}, dt {dt}"
    )]
    CflViolation {
        step: usize,
        t: f64,
        cell: usize,
        value: f64,
        lo: f64,
        hi: f64,
        sigma: f64,
        dt: f64,
    },
    #[error("non-finite value at step {step}, cell {cell}")]
    NonFinite { step: usize, cell: usize },
    #[error("time {0} is not a stored level")]
    MissingLevel(f64),
    #[error("x = {0} is not an interior grid node")]
    NotInterior(f64),
    #[error("checkpoint {0} lies outside [0, t_end]")]
    BadCheckpoint(f64),
    #[error("no closed form for `{0}`")]
    NoOracle(String),
    #[error(transparent)]
    Datum(#[from] DatumError),
}

pub type Result<T> = std::result::Result<T, SolverError>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub xmin: f64,
    pub xmax: f64,
    pub cells: usize,
    pub t_end: f64,
    pub cfl: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            xmin: -3.0,
            xmax: 3.0,
            cells: 1200,
            t_end: 0.5,
            cfl: 0.4,
        }
    }
}

impl GridSpec {
    pub fn new(xmin: f64, xmax: f64, cells: usize, t_end: f64, cfl: f64) -> Result<Self> {
        let g = Self {
            xmin,
            xmax,
            cells,
            t_end,
            cfl,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(SolverError::InvalidGrid(m.to_string()));
        if !(self.xmin < self.xmax) || !self.xmin.is_finite() || !self.xmax.is_finite() {
            return bad("xmin must be below xmax");
        }
        if self.cells < 16 {
            return bad("at least 16 cells");
        }
        if !(self.t_end > 0.0) {
            return bad("t_end must be positive");
        }
        if !(self.cfl > 0.0 && self.cfl < 1.0) {
            return bad("cfl must lie in (0, 1)");
        }
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        (self.xmax - self.xmin) / self.cells as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        if i == self.cells {
            self.xmax
        } else {
            self.xmin + i as f64 * self.dx()
        }
    }

    /// The `cells + 1` nodes, end points included.
    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.cells).map(|i| self.x(i)).collect()
    }

    /// Index of the node at `x`, if `x` is one (up to `1e-9 dx`).
    pub fn node_index(&self, x: f64) -> Option<usize> {
        let s = (x - self.xmin) / self.dx();
        let i = s.round();
        if (s - i).abs() <= 1e-9 && i >= 0.0 && i <= self.cells as f64 {
            Some(i as usize)
        } else {
            None
        }
    }
}

/// Every time level of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct NumericalSolution {
    pub grid: GridSpec,
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    pub dissipation: f64,
    pub dt: f64,
}

impl NumericalSolution {
    /// Index of the stored level at `t`.
    pub fn level_index(&self, t: f64) -> Option<usize> {
        let tol = 1e-12 * (1.0 + t.abs());
        let i = self.times.partition_point(|&s| s < t - tol);
        (i < self.times.len() && (self.times[i] - t).abs() <= tol).then_some(i)
    }

    pub fn slice(&self, t: f64) -> Result<&[f64]> {
        self.level_index(t)
            .map(|i| self.values[i].as_slice())
            .ok_or(SolverError::MissingLevel(t))
    }

    pub fn final_slice(&self) -> &[f64] {
        self.values.last().unwrap()
    }
}

/// A Hamiltonian of the form `lambda u + H0` advanced with the factor
/// `e^{-lambda dt}` applied to the `H0` update; other models are explicit.
fn split_lambda(model: &dyn Hamiltonian) -> Option<f64> {
    model.constants().lambda
}

/// One Lax–Friedrichs update at a node from its stencil `(um, u, up)`.
#[allow(clippy::too_many_arguments)]
pub fn lf_update(
    model: &dyn Hamiltonian,
    x: f64,
    t: f64,
    dx: f64,
    dt: f64,
    sigma: f64,
    um: f64,
    u: f64,
    up: f64,
) -> f64 {
    let p = [(up - um) / (2.0 * dx)];
    let diffusion = sigma * (up - 2.0 * u + um) / (2.0 * dx);
    match split_lambda(model) {
        Some(lambda) => {
            (-lambda * dt).exp() * (u - dt * (model.u_free_part(&[x], t, &p) - diffusion))
        }
        None => u - dt * (model.eval(&[x], t, u, &p) - diffusion),
    }
}

/// Dissipation coefficient: the p-Lipschitz envelope over the grid, or the
/// sampled `max |H_p|` over the a-priori gradient range when the envelope is
/// infinite.
pub fn dissipation(model: &dyn Hamiltonian, datum: &InitialDatum, grid: &GridSpec) -> f64 {
    let c = model.constants();
    let reach = grid.xmin.abs().max(grid.xmax.abs());
    let envelope = c.p_lipschitz_at(reach);
    if envelope.is_finite() {
        return envelope;
    }
    let g = datum.lipschitz() * ((c.c1 + c.k3) * grid.t_end).exp() + 2.0;
    let mut sigma: f64 = 0.0;
    for x in [grid.xmin, 0.0, grid.xmax] {
        for k in 0..=100 {
            let p = -g + 2.0 * g * k as f64 / 100.0;
            sigma = sigma.max(model.grad_p(&[x], 0.0, 0.0, &[p])[0].abs());
        }
    }
    sigma
}

pub fn solve(
    model: &dyn Hamiltonian,
    datum: &InitialDatum,
    grid: &GridSpec,
) -> Result<NumericalSolution> {
    solve_with_checkpoints(model, datum, grid, &[])
}

/// Runs to `grid.t_end`, shortening steps so every checkpoint is a stored level.
pub fn solve_with_checkpoints(
    model: &dyn Hamiltonian,
    datum: &InitialDatum,
    grid: &GridSpec,
    checkpoints: &[f64],
) -> Result<NumericalSolution> {
    grid.validate()?;
    if model.dimension() != 1 {
        return Err(SolverError::NotOneDimensional(model.dimension()));
    }
    let mut stops: Vec<f64> = Vec::with_capacity(checkpoints.len() + 1);
    for &c in checkpoints {
        if !(c >= 0.0 && c <= grid.t_end) {
            return Err(SolverError::BadCheckpoint(c));
        }
        if c > 0.0 {
            stops.push(c);
        }
    }
    stops.push(grid.t_end);
    stops.sort_by(f64::total_cmp);
    stops.dedup();

    let dx = grid.dx();
    let sigma = dissipation(model, datum, grid);
    let k3 = model.constants().k3;
    let dt_max = grid.cfl * dx / (sigma + k3 * dx + 1e-12);
    let nodes = grid.nodes();
    let n = nodes.len();
    let mut u: Vec<f64> = nodes.iter().map(|&x| datum.eval(&[x])).collect();
    let mut times = vec![0.0];
    let mut values = vec![u.clone()];
    let mut t = 0.0;
    let mut step = 0;
    let lambda = split_lambda(model);
    for &stop in &stops {
        while t < stop {
            let remaining = stop - t;
            let dt = if remaining <= dt_max * (1.0 + 1e-12) {
                remaining
            } else {
                dt_max
            };
            let mut next = vec![0.0; n];
            for i in 0..n {
                let um = if i == 0 { 2.0 * u[0] - u[1] } else { u[i - 1] };
                let up = if i == n - 1 {
                    2.0 * u[n - 1] - u[n - 2]
                } else {
                    u[i + 1]
                };
                let v = lf_update(model, nodes[i], t, dx, dt, sigma, um, u[i], up);
                if !v.is_finite() {
                    return Err(SolverError::NonFinite { step, cell: i });
                }
                if i > 0 && i < n - 1 {
                    // A monotone step maps the stencil's extremes to bounds on the result.
                    let lo = um.min(u[i]).min(up);
                    let hi = um.max(u[i]).max(up);
                    let image = |m: f64| match lambda {
                        Some(l) => {
                            (-l * dt).exp() * (m - dt * model.u_free_part(&[nodes[i]], t, &[0.0]))
                        }
                        None => m - dt * model.eval(&[nodes[i]], t, m, &[0.0]),
                    };
                    let (a, b) = (image(lo), image(hi));
                    let slack = 1e-12 * (1.0 + a.abs().max(b.abs()));
                    if v < a - slack || v > b + slack {
                        return Err(SolverError::CflViolation {
                            step,
                            t,
                            cell: i,
                            value: v,
                            lo: a,
                            hi: b,
                            sigma,
                            dt,
                        });
                    }
                }
                next[i] = v;
            }
            u = next;
            t = if dt == remaining { stop } else { t + dt };
            step += 1;
            times.push(t);
            values.push(u.clone());
        }
    }
    Ok(NumericalSolution {
        grid: *grid,
        times,
        values,
        dissipation: sigma,
        dt: dt_max,
    })
}

/// The examples with explicit solutions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OracleKind {
    TransportPlus,
    TransportMinus,
    TransportNegU,
    Eikonal { c: f64 },
}

impl OracleKind {
    pub fn from_builtin(kind: BuiltinKind) -> Result<Self> {
        match kind {
            BuiltinKind::TransportPlus => Ok(Self::TransportPlus),
            BuiltinKind::TransportMinus => Ok(Self::TransportMinus),
            BuiltinKind::TransportNegU => Ok(Self::TransportNegU),
            BuiltinKind::Eikonal { c } => Ok(Self::Eikonal { c }),
            other => Err(SolverError::NoOracle(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosedFormOracle {
    pub kind: OracleKind,
    pub datum: InitialDatum,
}

impl ClosedFormOracle {
    pub fn new(kind: OracleKind, datum: InitialDatum) -> Self {
        Self { kind, datum }
    }

    pub fn eval(&self, x: &[f64], t: f64) -> f64 {
        let u0 = &self.datum;
        let scaled = |s: f64| -> Vec<f64> { x.iter().map(|v| v * s).collect() };
        match self.kind {
            OracleKind::TransportPlus => (-t).exp() * u0.eval(&scaled((-t).exp())),
            OracleKind::TransportMinus => (-t).exp() * u0.eval(&scaled(t.exp())),
            OracleKind::TransportNegU => t.exp() * u0.eval(&scaled((-t).exp())),
            OracleKind::Eikonal { c } => (-t).exp() * ball_min(u0, x, c * t),
        }
    }

    /// Positions (1D) where the solution at time `t` may fail to be smooth.
    pub fn kinks(&self, t: f64) -> Vec<f64> {
        let base: Vec<f64> = match self.datum.kind() {
            DatumKind::Cone => vec![-1.0, 0.0, 1.0],
            DatumKind::Abs => vec![0.0],
            DatumKind::Zero | DatumKind::Constant(_) => Vec::new(),
            DatumKind::Samples { xmin, dx, values } => {
                (0..values.len()).map(|i| xmin + i as f64 * dx).collect()
            }
        };
        let mut out: Vec<f64> = match self.kind {
            OracleKind::TransportPlus | OracleKind::TransportNegU => {
                base.iter().map(|k| k * t.exp()).collect()
            }
            OracleKind::TransportMinus => base.iter().map(|k| k * (-t).exp()).collect(),
            OracleKind::Eikonal { c } => {
                let r = c * t;
                let mut v: Vec<f64> = base.iter().flat_map(|k| [k - r, k + r]).collect();
                if self.datum.is_radial() {
                    v.push(0.0);
                }
                v
            }
        };
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }
}

/// `min` of the datum over the closed ball `B_rho(x)`.
fn ball_min(u0: &InitialDatum, x: &[f64], rho: f64) -> f64 {
    let r = crate::vector::norm(x);
    match u0.kind() {
        DatumKind::Cone => u0.profile(r + rho),
        DatumKind::Abs => u0.profile((r - rho).max(0.0)),
        DatumKind::Zero | DatumKind::Constant(_) => u0.profile(0.0),
        DatumKind::Samples { xmin, dx, values } => {
            // Piecewise linear: the minimum sits at an end point or a node.
            let (a, b) = (x[0] - rho, x[0] + rho);
            let mut best = u0.eval(&[a]).min(u0.eval(&[b]));
            for (i, v) in values.iter().enumerate() {
                let y = xmin + i as f64 * dx;
                if y >= a && y <= b {
                    best = best.min(*v);
                }
            }
            best
        }
    }
}

/// One-sided-slope subgradient of the stored level `t` at the node `x`.
pub fn measured_subgradient(
    solution: &NumericalSolution,
    x: f64,
    t: f64,
    tol: f64,
) -> Result<SubgradientSet> {
    let slice = solution.slice(t)?;
    let i = solution
        .grid
        .node_index(x)
        .ok_or(SolverError::NotInterior(x))?;
    numeric_subgradient_1d(slice, solution.grid.dx(), i, tol)
        .map_err(|_| SolverError::NotInterior(x))
}

/// Step used for one-sided slopes of oracles.
pub const ORACLE_STEP: f64 = 1e-6;

/// One-sided-slope subgradient of an oracle at `(x, t)` with step `h`.
pub fn oracle_subgradient(
    oracle: &ClosedFormOracle,
    x: f64,
    t: f64,
    h: f64,
    tol: f64,
) -> SubgradientSet {
    let vals = [
        oracle.eval(&[x - h], t),
        oracle.eval(&[x], t),
        oracle.eval(&[x + h], t),
    ];
    numeric_subgradient_1d(&vals, h, 1, tol).expect("index 1 of three samples is interior")
}

/// L1 error over the whole grid and max error away from the oracle's kinks.
pub fn error_norms(
    solution: &NumericalSolution,
    oracle: &ClosedFormOracle,
    t: f64,
    kink_margin: usize,
) -> Result<(f64, f64)> {
    let slice = solution.slice(t)?;
    let grid = &solution.grid;
    let dx = grid.dx();
    let kinks = oracle.kinks(t);
    let margin = kink_margin as f64 * dx;
    let mut l1 = 0.0;
    let mut linf: f64 = 0.0;
    for (i, &v) in slice.iter().enumerate() {
        let x = grid.x(i);
        let e = (v - oracle.eval(&[x], t)).abs();
        let w = if i == 0 || i == grid.cells { 0.5 } else { 1.0 };
        l1 += w * e * dx;
        if kinks.iter().all(|k| (x - k).abs() > margin) {
            linf = linf.max(e);
        }
    }
    Ok((l1, linf))
}

/// Differences between two runs on the same grid at a stored time.
pub fn solution_difference(
    a: &NumericalSolution,
    b: &NumericalSolution,
    t: f64,
) -> Result<(f64, f64)> {
    let (sa, sb) = (a.slice(t)?, b.slice(t)?);
    let dx = a.grid.dx();
    let mut l1 = 0.0;
    let mut linf: f64 = 0.0;
    for (x, y) in sa.iter().zip(sb) {
        l1 += (x - y).abs() * dx;
        linf = linf.max((x - y).abs());
    }
    Ok((l1, linf))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonians::{BuiltinHamiltonian, BuiltinKind};
    use proptest::prelude::*;

    fn model(kind: BuiltinKind) -> BuiltinHamiltonian {
        BuiltinHamiltonian::new(kind, 1).unwrap()
    }

    fn cone_oracle(kind: OracleKind) -> ClosedFormOracle {
        ClosedFormOracle::new(kind, InitialDatum::cone(1))
    }

    #[test]
    fn grid_validation() {
        assert!(GridSpec::new(1.0, 0.0, 100, 1.0, 0.5).is_err());
        assert!(GridSpec::new(0.0, 1.0, 8, 1.0, 0.5).is_err());
        assert!(GridSpec::new(0.0, 1.0, 100, 0.0, 0.5).is_err());
        assert!(GridSpec::new(0.0, 1.0, 100, 1.0, 1.0).is_err());
        let g = GridSpec::new(-3.0, 3.0, 1200, 1.0, 0.5).unwrap();
        assert_eq!(g.nodes().len(), 1201);
        assert_eq!(g.node_index(0.5), Some(700));
        assert_eq!(g.node_index(0.5025), None);
    }

    #[test]
    fn oracle_examples() {
        let tp = cone_oracle(OracleKind::TransportPlus);
        assert!((tp.eval(&[0.5], 2f64.ln()) - 0.375).abs() < 1e-15);
        let neg = cone_oracle(OracleKind::TransportNegU);
        let want = 0.3f64.exp() - 0.5;
        assert!((neg.eval(&[0.5], 0.3) - want).abs() < 1e-14);
        assert!((want - 0.84986).abs() < 1e-5);
        let eik = cone_oracle(OracleKind::Eikonal { c: 1.0 });
        assert!((eik.eval(&[0.25], 0.25) - 0.5 * (-0.25f64).exp()).abs() < 1e-15);
        let tm = cone_oracle(OracleKind::TransportMinus);
        assert!(
            (tm.eval(&[0.2], 0.1) - (-0.1f64).exp() * (1.0 - 0.2 * 0.1f64.exp())).abs() < 1e-15
        );
        assert!(OracleKind::from_builtin(BuiltinKind::Quadratic { lambda: 1.0 }).is_err());
    }

    #[test]
    fn eikonal_oracle_matches_dense_scan() {
        for datum in [InitialDatum::cone(1), InitialDatum::abs(1)] {
            let oracle = ClosedFormOracle::new(OracleKind::Eikonal { c: 0.7 }, datum.clone());
            for &(x, t) in &[(0.1, 0.3), (-0.6, 0.5), (1.3, 0.2), (0.0, 0.9)] {
                let rho = 0.7 * t;
                let scan = (0..=20000)
                    .map(|k| datum.eval(&[x - rho + 2.0 * rho * k as f64 / 20000.0]))
                    .fold(f64::INFINITY, f64::min);
                assert!((oracle.eval(&[x], t) - (-t).exp() * scan).abs() < 1e-4 * rho + 1e-15);
            }
        }
    }

    #[test]
    fn oracle_subgradient_examples() {
        let tp = cone_oracle(OracleKind::TransportPlus);
        let s = oracle_subgradient(&tp, 0.3, 0.2, ORACLE_STEP, 1e-7);
        assert!((s.min_norm_element().unwrap()[0] + (-0.4f64).exp()).abs() < 1e-9);
        let eik = cone_oracle(OracleKind::Eikonal { c: 1.0 });
        let s = oracle_subgradient(&eik, 0.25, 0.25, ORACLE_STEP, 1e-7);
        assert!((s.min_norm_element().unwrap()[0] + (-0.25f64).exp()).abs() < 1e-9);
        assert!(oracle_subgradient(&tp, 0.0, 0.2, ORACLE_STEP, 1e-7).is_empty());
    }

    #[test]
    fn constant_data_decay() {
        let h = model(BuiltinKind::Eikonal { c: 1.0 });
        let grid = GridSpec::new(-1.0, 1.0, 64, 1.0, 0.9).unwrap();
        let sol = solve(&h, &InitialDatum::constant(1, 2.5), &grid).unwrap();
        for v in sol.final_slice() {
            assert!((v - 2.5 * (-1.0f64).exp()).abs() < 1e-6);
        }
    }

    #[test]
    fn zero_data_stay_zero() {
        let grid = GridSpec::new(-2.0, 2.0, 64, 0.5, 0.5).unwrap();
        for kind in [
            BuiltinKind::TransportPlus,
            BuiltinKind::TransportMinus,
            BuiltinKind::TransportNegU,
            BuiltinKind::Eikonal { c: 2.0 },
            BuiltinKind::Quadratic { lambda: 1.0 },
        ] {
            let sol = solve(&model(kind), &InitialDatum::zero(1), &grid).unwrap();
            assert!(
                sol.values.iter().all(|row| row.iter().all(|&v| v == 0.0)),
                "{kind}"
            );
        }
    }

    #[test]
    fn transport_plus_point_value() {
        let h = model(BuiltinKind::TransportPlus);
        let t = 2f64.ln();
        let grid = GridSpec::new(-3.0, 3.0, 1200, t, 0.9).unwrap();
        let sol = solve(&h, &InitialDatum::cone(1), &grid).unwrap();
        let i = grid.node_index(0.5).unwrap();
        assert!((sol.slice(t).unwrap()[i] - 0.375).abs() < 2e-2);
        assert_eq!(sol.values[0][i], 0.5);
    }

    #[test]
    fn checkpoints_are_hit_exactly() {
        let h = model(BuiltinKind::TransportPlus);
        let grid = GridSpec::new(-3.0, 3.0, 200, 0.7, 0.9).unwrap();
        let sol = solve_with_checkpoints(&h, &InitialDatum::cone(1), &grid, &[0.0, 0.35]).unwrap();
        assert!(sol.slice(0.35).is_ok() && sol.slice(0.7).is_ok() && sol.slice(0.0).is_ok());
        assert_eq!(*sol.times.last().unwrap(), 0.7);
        assert!(sol.slice(0.123).is_err());
        assert!(solve_with_checkpoints(&h, &InitialDatum::cone(1), &grid, &[0.9]).is_err());
    }

    #[test]
    fn error_norms_against_self_and_first_order() {
        let h = model(BuiltinKind::TransportPlus);
        let oracle = cone_oracle(OracleKind::TransportPlus);
        let coarse = GridSpec::new(-3.0, 3.0, 600, 0.5, 0.9).unwrap();
        let fine = GridSpec {
            cells: 1200,
            ..coarse
        };
        let a = solve(&h, &InitialDatum::cone(1), &coarse).unwrap();
        let b = solve(&h, &InitialDatum::cone(1), &fine).unwrap();
        assert_eq!(solution_difference(&a, &a, 0.5).unwrap(), (0.0, 0.0));
        let (e1, _) = error_norms(&a, &oracle, 0.5, 40).unwrap();
        let (e2, linf) = error_norms(&b, &oracle, 0.5, 40).unwrap();
        assert!(e2 <= 2e-2 && linf <= 2e-2, "l1 {e2}, linf {linf}");
        let ratio = e1 / e2;
        assert!((1.5..=3.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn measured_subgradient_on_scheme() {
        let h = model(BuiltinKind::TransportPlus);
        let grid = GridSpec::new(-3.0, 3.0, 1200, 0.2, 0.9).unwrap();
        let sol = solve(&h, &InitialDatum::cone(1), &grid).unwrap();
        let s = measured_subgradient(&sol, 0.3, 0.2, 1e-6).unwrap();
        assert!((s.min_norm().unwrap() - (-0.4f64).exp()).abs() < 5e-2);
        assert!(measured_subgradient(&sol, -3.0, 0.2, 1e-6).is_err());
        assert!(measured_subgradient(&sol, 0.3, 0.1, 1e-6).is_err());
    }

    #[test]
    fn refuses_multi_d_models() {
        let h = BuiltinHamiltonian::new(BuiltinKind::TransportPlus, 2).unwrap();
        let grid = GridSpec::new(-1.0, 1.0, 32, 0.1, 0.5).unwrap();
        assert!(matches!(
            solve(&h, &InitialDatum::cone(2), &grid),
            Err(SolverError::NotOneDimensional(2))
        ));
    }

    proptest! {
        #[test]
        fn update_is_monotone_in_the_stencil(
            which in 0usize..4, x in -3.0f64..3.0, um in -1.0f64..1.0, u in -1.0f64..1.0, up in -1.0f64..1.0,
            bump in 0.0f64..0.5, slot in 0usize..3, cfl in 0.05f64..0.5,
        ) {
            let kinds = [
                BuiltinKind::TransportPlus,
                BuiltinKind::TransportMinus,
                BuiltinKind::TransportNegU,
                BuiltinKind::Eikonal { c: 1.0 },
            ];
            let h = model(kinds[which]);
            let grid = GridSpec::new(-3.0, 3.0, 600, 1.0, 0.5).unwrap();
            let dx = grid.dx();
            let sigma = dissipation(&h, &InitialDatum::cone(1), &grid);
            let dt = cfl * dx / (sigma + h.constants().k3 * dx + 1e-12);
            let base = lf_update(&h, x, 0.1, dx, dt, sigma, um, u, up);
            let mut s = [um, u, up];
            s[slot] += bump;
            let moved = lf_update(&h, x, 0.1, dx, dt, sigma, s[0], s[1], s[2]);
            prop_assert!(moved >= base - 1e-14);
        }
    }
}
