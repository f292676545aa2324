//! The Herglotz variational principle on piecewise-linear curves.
//!
//! Along a curve `xi` the value `u_xi` solves the Carathéodory equation
//! `u_xi' = L(xi, s, u_xi, xi')`, and the value function is the infimum of
//! `u_xi(t)` over curves ending at `x`, started from `u0(xi(0))`.

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::hamiltonians::{legendre_transform, Hamiltonian, HamiltonianError, SearchBox};
use crate::initial_data::InitialDatum;
use crate::numeric::golden_min;
use crate::vector::{axpy, dist, norm, scale, sub};

pub const RESTART_SEED: u64 = 0x48454A;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HerglotzError {
    #[error("segment {segment} has a velocity outside the domain of L")]
    Infeasible { segment: usize },
    #[error("no feasible starting curve reaches the target")]
    AllInfeasible,
    #[error("time must be positive, got {0}")]
    BadTime(f64),
    #[error("curve needs strictly increasing times and one node per time")]
    BadCurve,
    #[error("tau = {tau} must lie in [0, {t}]")]
    BadTau { tau: f64, t: f64 },
    #[error(transparent)]
    Hamiltonian(#[from] HamiltonianError),
}

pub type Result<T> = std::result::Result<T, HerglotzError>;

/// A piecewise-linear curve through `nodes[k]` at `times[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub times: Vec<f64>,
    pub nodes: Vec<Vec<f64>>,
}

impl Curve {
    /// Nodes at the uniform times `k t / (nodes.len() - 1)`.
    pub fn uniform(t: f64, nodes: Vec<Vec<f64>>) -> Self {
        let m = nodes.len() - 1;
        let times = (0..=m)
            .map(|k| if k == m { t } else { t * k as f64 / m as f64 })
            .collect();
        Self { times, nodes }
    }

    pub fn constant(x: &[f64], t: f64, segments: usize) -> Self {
        Self::uniform(t, vec![x.to_vec(); segments + 1])
    }

    /// The segment from `from` at time 0 to `to` at time `t`.
    pub fn straight(from: &[f64], to: &[f64], t: f64, segments: usize) -> Self {
        let d = sub(to, from);
        Self::uniform(
            t,
            (0..=segments)
                .map(|k| {
                    if k == segments {
                        to.to_vec()
                    } else {
                        axpy(from, k as f64 / segments as f64, &d)
                    }
                })
                .collect(),
        )
    }

    pub fn segments(&self) -> usize {
        self.times.len() - 1
    }

    pub fn end_time(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn start(&self) -> &[f64] {
        &self.nodes[0]
    }

    pub fn end(&self) -> &[f64] {
        self.nodes.last().unwrap()
    }

    pub fn velocity(&self, k: usize) -> Vec<f64> {
        scale(
            &sub(&self.nodes[k + 1], &self.nodes[k]),
            1.0 / (self.times[k + 1] - self.times[k]),
        )
    }

    pub fn position(&self, s: f64) -> Vec<f64> {
        let m = self.segments();
        let k = self.times.partition_point(|&v| v <= s).clamp(1, m) - 1;
        let w = (s - self.times[k]) / (self.times[k + 1] - self.times[k]);
        axpy(
            &self.nodes[k],
            w.clamp(0.0, 1.0),
            &sub(&self.nodes[k + 1], &self.nodes[k]),
        )
    }

    /// The part of the curve on `[tau, t]`.
    pub fn restricted(&self, tau: f64) -> Curve {
        let k = self.times.partition_point(|&v| v <= tau);
        let mut times = vec![tau];
        let mut nodes = vec![self.position(tau)];
        for j in k..self.times.len() {
            if self.times[j] - tau > 1e-14 * (1.0 + tau) {
                times.push(self.times[j]);
                nodes.push(self.nodes[j].clone());
            }
        }
        Curve { times, nodes }
    }

    fn validate(&self) -> Result<()> {
        if self.times.len() < 2
            || self.times.len() != self.nodes.len()
            || self.times.windows(2).any(|w| !(w[1] > w[0]))
        {
            return Err(HerglotzError::BadCurve);
        }
        Ok(())
    }

    fn lex_cmp(&self, other: &Curve) -> Ordering {
        for (a, b) in self
            .nodes
            .iter()
            .flatten()
            .zip(other.nodes.iter().flatten())
        {
            match a.total_cmp(b) {
                Ordering::Equal => continue,
                o => return o,
            }
        }
        Ordering::Equal
    }
}

/// Numerical settings for the Carathéodory integration and the minimiser.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HerglotzOptions {
    /// Free interior nodes; the curve has `nodes + 1` segments.
    pub nodes: usize,
    /// Starting curves, at least the constant one.
    pub restarts: usize,
    /// RK4 substeps per segment (even, for Simpson's rule).
    pub substeps: usize,
    pub max_sweeps: usize,
    pub tol: f64,
    /// Half-width of the box for generic Legendre transforms.
    pub search_half_width: f64,
}

impl Default for HerglotzOptions {
    fn default() -> Self {
        Self {
            nodes: 15,
            restarts: 4,
            substeps: 16,
            max_sweeps: 400,
            tol: 1e-10,
            search_half_width: 10.0,
        }
    }
}

fn lagrangian(
    model: &dyn Hamiltonian,
    x: &[f64],
    s: f64,
    u: f64,
    q: &[f64],
    opts: &HerglotzOptions,
) -> Result<f64> {
    let bx = SearchBox::cube(model.dimension(), opts.search_half_width);
    Ok(legendre_transform(model, x, s, u, q, Some(&bx))?.value)
}

/// Node values of `u_xi` and `int L ds`, integrated segment by segment.
fn integrate(
    model: &dyn Hamiltonian,
    curve: &Curve,
    u_start: f64,
    opts: &HerglotzOptions,
) -> Result<(Vec<f64>, f64)> {
    curve.validate()?;
    let m = opts.substeps.max(2) + opts.substeps % 2;
    let mut u = u_start;
    let mut us = vec![u];
    let mut integral = 0.0;
    for k in 0..curve.segments() {
        let v = curve.velocity(k);
        let (s0, s1) = (curve.times[k], curve.times[k + 1]);
        let x0 = &curve.nodes[k];
        let h = (s1 - s0) / m as f64;
        let at = |s: f64| axpy(x0, s - s0, &v);
        let f = |s: f64, u: f64| -> Result<f64> {
            let l = lagrangian(model, &at(s), s, u, &v, opts)?;
            if l.is_finite() {
                Ok(l)
            } else {
                Err(HerglotzError::Infeasible { segment: k })
            }
        };
        let mut ls = Vec::with_capacity(m + 1);
        ls.push(f(s0, u)?);
        for j in 0..m {
            let s = s0 + j as f64 * h;
            let k1 = f(s, u)?;
            let k2 = f(s + 0.5 * h, u + 0.5 * h * k1)?;
            let k3 = f(s + 0.5 * h, u + 0.5 * h * k2)?;
            let k4 = f(s + h, u + h * k3)?;
            u += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            ls.push(f(s + h, u)?);
        }
        let mut simpson = ls[0] + ls[m];
        for (j, l) in ls.iter().enumerate().take(m).skip(1) {
            simpson += if j % 2 == 1 { 4.0 * l } else { 2.0 * l };
        }
        integral += simpson * h / 3.0;
        us.push(u);
    }
    Ok((us, integral))
}

/// `u_xi` at the curve nodes for `u_xi(times[0]) = u_start`.
pub fn caratheodory_solve(
    model: &dyn Hamiltonian,
    curve: &Curve,
    u_start: f64,
) -> Result<Vec<f64>> {
    Ok(integrate(model, curve, u_start, &HerglotzOptions::default())?.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionResult {
    /// `u0(xi(0)) + int_0^t L ds`, `+infinity` for infeasible curves.
    pub action: f64,
    pub u_trajectory: Vec<f64>,
    pub feasible: bool,
}

impl ActionResult {
    /// `u_xi(t)` from the Carathéodory integration.
    pub fn terminal_value(&self) -> f64 {
        self.u_trajectory.last().copied().unwrap_or(f64::INFINITY)
    }
}

pub fn action(
    model: &dyn Hamiltonian,
    datum: &InitialDatum,
    curve: &Curve,
) -> Result<ActionResult> {
    action_with(model, datum, curve, &HerglotzOptions::default())
}

pub fn action_with(
    model: &dyn Hamiltonian,
    datum: &InitialDatum,
    curve: &Curve,
    opts: &HerglotzOptions,
) -> Result<ActionResult> {
    let u0 = datum.eval(curve.start());
    match integrate(model, curve, u0, opts) {
        Ok((us, integral)) => Ok(ActionResult {
            action: u0 + integral,
            u_trajectory: us,
            feasible: true,
        }),
        Err(HerglotzError::Infeasible { .. }) => Ok(ActionResult {
            action: f64::INFINITY,
            u_trajectory: Vec::new(),
            feasible: false,
        }),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValueResult {
    pub value: f64,
    pub minimizer: Curve,
    pub sweeps: usize,
}

/// Minimises `u_xi(t)` over piecewise-linear curves ending at `x`.
pub fn value_function(
    model: &dyn Hamiltonian,
    datum: &InitialDatum,
    x: &[f64],
    t: f64,
    nodes: usize,
    restarts: usize,
) -> Result<ValueResult> {
    let opts = HerglotzOptions {
        nodes,
        restarts,
        ..HerglotzOptions::default()
    };
    value_function_with(model, datum, x, t, &opts)
}

/// Searches the datum for its least value within `reach` of `x`.
fn datum_minimizer(datum: &InitialDatum, x: &[f64], reach: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = x.len();
    let mut best = (datum.eval(x), x.to_vec());
    let mut consider = |y: Vec<f64>| {
        let v = datum.eval(&y);
        if v < best.0 {
            best = (v, y);
        }
    };
    if n == 1 {
        for k in 0..=2000 {
            consider(vec![x[0] - reach + 2.0 * reach * k as f64 / 2000.0]);
        }
    } else {
        let r = norm(x);
        for k in 0..=200 {
            let s = -reach + 2.0 * reach * k as f64 / 200.0;
            let dir = if r > 0.0 {
                scale(x, 1.0 / r)
            } else {
                [vec![1.0], vec![0.0; n - 1]].concat()
            };
            consider(axpy(x, s, &dir));
        }
        for _ in 0..2000 {
            let g: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let len = norm(&g).max(1e-300);
            let rad = reach * rng.gen_range(0.0f64..1.0).powf(1.0 / n as f64);
            consider(axpy(x, rad / len, &g));
        }
    }
    best.1
}

/// A curve ending at `x` whose segment velocities are drawn uniformly from
/// the velocity ball of the model (or `[-2, 2]^n` when unbounded).
pub fn random_feasible_curve(
    model: &dyn Hamiltonian,
    x: &[f64],
    t: f64,
    segments: usize,
    rng: &mut ChaCha8Rng,
) -> Curve {
    let n = x.len();
    let speed = model.velocity_bound();
    let ds = t / segments as f64;
    let mut nodes = vec![x.to_vec()];
    for _ in 0..segments {
        let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        match speed {
            Some(c) => {
                let len = norm(&v);
                if len > 1.0 {
                    v = scale(&v, 1.0 / len);
                }
                v = scale(&v, c * (1.0 - 1e-9));
            }
            None => v = scale(&v, 2.0),
        }
        let prev = nodes.last().unwrap().clone();
        nodes.push(axpy(&prev, -ds, &v));
    }
    nodes.reverse();
    let last = nodes.len() - 1;
    nodes[last] = x.to_vec();
    Curve::uniform(t, nodes)
}

/// Feasible range of coordinate `d` of node `k` given its neighbours and the
/// speed limit `c`.
fn feasible_interval(curve: &Curve, k: usize, d: usize, c: f64) -> (f64, f64) {
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    let neighbours = [k.checked_sub(1), Some(k + 1)];
    for nb in neighbours.into_iter().flatten() {
        if nb >= curve.nodes.len() {
            continue;
        }
        let reach = c * (curve.times[k.max(nb)] - curve.times[k.min(nb)]) * (1.0 - 1e-12);
        let other: f64 = (0..curve.nodes[k].len())
            .filter(|&i| i != d)
            .map(|i| (curve.nodes[k][i] - curve.nodes[nb][i]).powi(2))
            .sum();
        let room = reach * reach - other;
        if room < 0.0 {
            let cur = curve.nodes[k][d];
            return (cur, cur);
        }
        let half = room.sqrt();
        lo = lo.max(curve.nodes[nb][d] - half);
        hi = hi.min(curve.nodes[nb][d] + half);
    }
    if lo > hi {
        let cur = curve.nodes[k][d];
        (cur, cur)
    } else {
        (lo, hi)
    }
}

fn descend(
    model: &dyn Hamiltonian,
    datum: &InitialDatum,
    mut curve: Curve,
    opts: &HerglotzOptions,
) -> Result<(f64, Curve, usize)> {
    let objective = |c: &Curve| -> f64 {
        match action_with(model, datum, c, opts) {
            Ok(a) if a.feasible => a.terminal_value(),
            _ => f64::INFINITY,
        }
    };
    let mut best = objective(&curve);
    if !best.is_finite() {
        return Ok((best, curve, 0));
    }
    let n = curve.nodes[0].len();
    let free = curve.nodes.len() - 1;
    let speed = model.velocity_bound();
    if speed.is_none() {
        let pack = |c: &Curve| -> Vec<f64> { c.nodes[..free].iter().flatten().copied().collect() };
        let unpack = |z: &[f64]| -> Curve {
            let mut c = curve.clone();
            for (k, node) in c.nodes.iter_mut().take(free).enumerate() {
                node.copy_from_slice(&z[k * n..(k + 1) * n]);
            }
            c
        };
        let (z, fz) = quasi_newton(|z| objective(&unpack(z)), pack(&curve), best, 200);
        if fz < best {
            curve = unpack(&z);
            best = fz;
        }
    }
    let mut widths = vec![0.5f64.max(curve.end_time()); free * n];
    // After the quasi-Newton phase the sweeps only polish kinks.
    let cap = if speed.is_none() {
        opts.max_sweeps.min(20)
    } else {
        opts.max_sweeps
    };
    let mut sweeps = 0;
    while sweeps < cap {
        sweeps += 1;
        let before = best;
        let snapshot = curve.clone();
        for k in 0..free {
            for d in 0..n {
                let cur = curve.nodes[k][d];
                let (lo, hi) = match speed {
                    Some(c) => feasible_interval(&curve, k, d, c),
                    None => (cur - widths[k * n + d], cur + widths[k * n + d]),
                };
                if hi - lo <= 0.0 {
                    continue;
                }
                let mut trial = curve.clone();
                let (z, fz) = golden_min(
                    |z| {
                        trial.nodes[k][d] = z;
                        objective(&trial)
                    },
                    lo,
                    hi,
                    1e-10 * (1.0 + hi - lo),
                );
                if fz < best {
                    curve.nodes[k][d] = z;
                    best = fz;
                }
                if speed.is_none() {
                    let w = &mut widths[k * n + d];
                    let edge = (z - lo).min(hi - z) <= 1e-6 * (hi - lo);
                    *w = if edge {
                        2.0 * *w
                    } else {
                        (4.0 * (z - cur).abs()).max(1e-4)
                    };
                }
            }
        }
        if speed.is_none() {
            // Extrapolate along the sweep's displacement.
            let step: Vec<Vec<f64>> = curve
                .nodes
                .iter()
                .zip(&snapshot.nodes)
                .map(|(a, b)| sub(a, b))
                .collect();
            let along = |a: f64| -> Curve {
                let mut c = snapshot.clone();
                for (node, s) in c.nodes.iter_mut().zip(&step).take(free) {
                    *node = axpy(node, a, s);
                }
                c
            };
            let (a, fa) = golden_min(|a| objective(&along(a)), 1.0, 16.0, 1e-6);
            if fa < best {
                curve = along(a);
                best = fa;
            }
        }
        if before - best < opts.tol {
            break;
        }
    }
    Ok((best, curve, sweeps))
}

fn fd_gradient<F: Fn(&[f64]) -> f64>(f: &F, z: &[f64]) -> Vec<f64> {
    let mut w = z.to_vec();
    (0..z.len())
        .map(|i| {
            let h = 1e-6 * (1.0 + z[i].abs());
            w[i] = z[i] + h;
            let up = f(&w);
            w[i] = z[i] - h;
            let dn = f(&w);
            w[i] = z[i];
            (up - dn) / (2.0 * h)
        })
        .collect()
}

/// BFGS with central-difference gradients and Armijo backtracking.
fn quasi_newton<F: Fn(&[f64]) -> f64>(
    f: F,
    mut z: Vec<f64>,
    mut fz: f64,
    iters: usize,
) -> (Vec<f64>, f64) {
    let m = z.len();
    let mut inv = vec![vec![0.0; m]; m];
    for (i, row) in inv.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    let mut g = fd_gradient(&f, &z);
    for _ in 0..iters {
        let mut d: Vec<f64> = inv
            .iter()
            .map(|row| -row.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>())
            .collect();
        let mut slope: f64 = d.iter().zip(&g).map(|(a, b)| a * b).sum();
        if !(slope < 0.0) {
            for (i, row) in inv.iter_mut().enumerate() {
                row.iter_mut().for_each(|v| *v = 0.0);
                row[i] = 1.0;
            }
            d = g.iter().map(|v| -v).collect();
            slope = -g.iter().map(|v| v * v).sum::<f64>();
        }
        if slope.abs() < 1e-20 {
            break;
        }
        let mut a = 1.0;
        let mut accepted = None;
        while a > 1e-12 {
            let trial = axpy(&z, a, &d);
            let ft = f(&trial);
            if ft <= fz + 1e-4 * a * slope {
                accepted = Some((trial, ft));
                break;
            }
            a *= 0.5;
        }
        let Some((next, fnext)) = accepted else { break };
        let gnext = fd_gradient(&f, &next);
        let s = sub(&next, &z);
        let y = sub(&gnext, &g);
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        let gain = fz - fnext;
        z = next;
        fz = fnext;
        g = gnext;
        if sy > 1e-14 {
            let hy: Vec<f64> = inv
                .iter()
                .map(|row| row.iter().zip(&y).map(|(a, b)| a * b).sum())
                .collect();
            let yhy: f64 = y.iter().zip(&hy).map(|(a, b)| a * b).sum();
            for i in 0..m {
                for j in 0..m {
                    inv[i][j] +=
                        (1.0 + yhy / sy) * s[i] * s[j] / sy - (hy[i] * s[j] + s[i] * hy[j]) / sy;
                }
            }
        }
        if gain < 1e-13 {
            break;
        }
    }
    (z, fz)
}

pub fn value_function_with(
    model: &dyn Hamiltonian,
    datum: &InitialDatum,
    x: &[f64],
    t: f64,
    opts: &HerglotzOptions,
) -> Result<ValueResult> {
    if !(t > 0.0) {
        return Err(HerglotzError::BadTime(t));
    }
    let segments = opts.nodes + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(RESTART_SEED);
    let reach = match model.velocity_bound() {
        Some(c) => c * t,
        None => 1.0 + norm(x) + t,
    };
    let mut seeds = vec![Curve::constant(x, t, segments)];
    if opts.restarts >= 2 {
        let y = datum_minimizer(datum, x, reach, &mut rng);
        seeds.push(Curve::straight(&y, x, t, segments));
    }
    for _ in 2..opts.restarts {
        seeds.push(random_feasible_curve(model, x, t, segments, &mut rng));
    }
    let mut best: Option<(f64, Curve, usize)> = None;
    for seed in seeds {
        let (v, c, sweeps) = descend(model, datum, seed, opts)?;
        if !v.is_finite() {
            continue;
        }
        let better = match &best {
            None => true,
            Some((bv, bc, _)) => v < *bv || (v == *bv && c.lex_cmp(bc) == Ordering::Less),
        };
        if better {
            best = Some((v, c, sweeps));
        }
    }
    let (value, minimizer, sweeps) = best.ok_or(HerglotzError::AllInfeasible)?;
    Ok(ValueResult {
        value,
        minimizer,
        sweeps,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DppReport {
    /// `u(x, t)`
    pub lhs: f64,
    /// `u_xi(t)` started from `u(xi(tau), tau)` at `tau`.
    pub rhs: f64,
    pub slack: f64,
    pub holds: bool,
}

/// Compares `u(x, t)` with the value carried along `curve` from `tau`.
pub fn dpp_check(
    model: &dyn Hamiltonian,
    datum: &InitialDatum,
    value_at_x: f64,
    curve: &Curve,
    tau: f64,
    opts: &HerglotzOptions,
) -> Result<DppReport> {
    let t = curve.end_time();
    if !(tau >= 0.0 && tau <= t) {
        return Err(HerglotzError::BadTau { tau, t });
    }
    let rhs = if t - tau <= 1e-14 * (1.0 + t) {
        value_at_x
    } else {
        let part = curve.restricted(tau);
        let start = part.start().to_vec();
        let u_tau = if tau == 0.0 {
            datum.eval(&start)
        } else {
            value_function_with(model, datum, &start, tau, opts)?.value
        };
        *integrate(model, &part, u_tau, opts)?.0.last().unwrap()
    };
    let slack = rhs - value_at_x;
    Ok(DppReport {
        lhs: value_at_x,
        rhs,
        slack,
        holds: slack >= -1e-6,
    })
}

/// Largest distance between corresponding nodes of two curves.
pub fn curve_distance(a: &Curve, b: &Curve) -> f64 {
    a.nodes
        .iter()
        .zip(&b.nodes)
        .map(|(p, q)| dist(p, q))
        .fold(0.0, f64::max)
}
