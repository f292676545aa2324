//! Time-weighted inf- and sup-convolutions of 1D grid fields.
//!
//! Fields are piecewise-linear interpolants of their grid values, and every
//! convolution minimises over the closed ball `[x0 - r, x0 + r]` exactly:
//! on each cell the minimand is a quadratic with a closed-form minimiser.
//! Ties are broken towards the smaller `y`.

use thiserror::Error;

use crate::hamiltonians::{Hamiltonian, StructuralConstants};
use crate::initial_data::InitialDatum;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConvolutionError {
    #[error("the field has no nodes inside the ball")]
    EmptyGrid,
    #[error("epsilon must be positive, got {0}")]
    BadEpsilon(f64),
    #[error("alpha must be positive for space-time convolutions")]
    MissingAlpha,
    #[error(
        "theta {theta:?} is not admissible: the datum only guarantees {available:?} on the ball"
    )]
    ThetaUnavailable {
        theta: Option<f64>,
        available: Option<f64>,
    },
    #[error("no differentiable interior points were found")]
    NoDifferentiablePoints,
    #[error("field time levels are not uniform")]
    NonUniformTimes,
}

pub type Result<T> = std::result::Result<T, ConvolutionError>;

/// `(beta/2 + 2) C1 + K3`, the least admissible time weight.
pub fn gamma_min(constants: &StructuralConstants) -> f64 {
    (0.5 * constants.beta + 2.0) * constants.c1 + constants.k3
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvolutionParams {
    pub epsilon: f64,
    pub alpha: Option<f64>,
    pub gamma: f64,
    pub ball_center: f64,
    pub ball_radius: f64,
}

impl ConvolutionParams {
    fn check(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(ConvolutionError::BadEpsilon(self.epsilon));
        }
        Ok(())
    }

    fn ball(&self) -> (f64, f64) {
        (
            self.ball_center - self.ball_radius,
            self.ball_center + self.ball_radius,
        )
    }

    /// Spatial penalty weight `e^{-gamma t} / eps^2`.
    pub fn weight(&self, t: f64) -> f64 {
        (-self.gamma * t).exp() / (self.epsilon * self.epsilon)
    }
}

/// Values `u(xmin + i dx, time)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSlice {
    pub xmin: f64,
    pub dx: f64,
    pub values: Vec<f64>,
    pub time: f64,
}

impl FieldSlice {
    pub fn x(&self, i: usize) -> f64 {
        self.xmin + i as f64 * self.dx
    }

    /// Uniform grid with `cells` cells over `[a, b]`, sampled from `f`.
    pub fn sample<F: Fn(f64) -> f64>(a: f64, b: f64, cells: usize, time: f64, f: F) -> Self {
        let dx = (b - a) / cells as f64;
        let values = (0..=cells)
            .map(|i| {
                if i == cells {
                    f(b)
                } else {
                    f(a + i as f64 * dx)
                }
            })
            .collect();
        Self {
            xmin: a,
            dx,
            values,
            time,
        }
    }

    pub fn from_datum(datum: &InitialDatum, a: f64, b: f64, cells: usize) -> Self {
        Self::sample(a, b, cells, 0.0, |x| datum.eval(&[x]))
    }
}

/// Convolved values together with the minimising (or maximising) `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvolvedSlice {
    pub field: FieldSlice,
    pub argmin: Vec<f64>,
}

/// Pieces of the interpolant restricted to `[a, b]`: `(y0, y1, u(y0), slope)`.
fn pieces(field: &FieldSlice, a: f64, b: f64) -> Vec<(f64, f64, f64, f64)> {
    let mut out = Vec::new();
    for j in 0..field.values.len().saturating_sub(1) {
        let (y0, y1) = (field.x(j), field.x(j + 1));
        let lo = y0.max(a);
        let hi = y1.min(b);
        if lo > hi {
            continue;
        }
        let slope = (field.values[j + 1] - field.values[j]) / field.dx;
        out.push((lo, hi, field.values[j] + slope * (lo - y0), slope));
    }
    out
}

/// `min_y sign * (u(y) + sign * w (x - y)^2)` over the pieces, returned with
/// the optimal `y`. `sign = 1` is the inf-convolution, `-1` the sup-convolution
/// (as a minimisation of `-u + w (x - y)^2`).
fn scan(pieces: &[(f64, f64, f64, f64)], x: f64, w: f64, sign: f64, floor: f64) -> (f64, f64) {
    let mut best = (f64::INFINITY, f64::NAN);
    for &(lo, hi, u_lo, slope) in pieces {
        let gap = if x < lo {
            lo - x
        } else if x > hi {
            x - hi
        } else {
            0.0
        };
        if floor + w * gap * gap > best.0 {
            continue;
        }
        let (s, base) = (sign * slope, sign * u_lo);
        let y = (x - s / (2.0 * w)).clamp(lo, hi);
        let f = base + s * (y - lo) + w * (x - y) * (x - y);
        if f < best.0 {
            best = (f, y);
        }
    }
    best
}

fn convolve_slice(
    field: &FieldSlice,
    params: &ConvolutionParams,
    sign: f64,
) -> Result<ConvolvedSlice> {
    params.check()?;
    let (a, b) = params.ball();
    let ps = pieces(field, a, b);
    if ps.is_empty() {
        return Err(ConvolutionError::EmptyGrid);
    }
    let w = if sign > 0.0 {
        params.weight(field.time)
    } else {
        (params.gamma * field.time).exp() / (params.epsilon * params.epsilon)
    };
    let floor = ps
        .iter()
        .map(|&(lo, hi, u, s)| (sign * u).min(sign * (u + s * (hi - lo))))
        .fold(f64::INFINITY, f64::min);
    let mut values = Vec::with_capacity(field.values.len());
    let mut argmin = Vec::with_capacity(field.values.len());
    for i in 0..field.values.len() {
        let (f, y) = scan(&ps, field.x(i), w, sign, floor);
        values.push(sign * f);
        argmin.push(y);
    }
    Ok(ConvolvedSlice {
        field: FieldSlice {
            values,
            ..field.clone()
        },
        argmin,
    })
}

/// `u_eps(x, t) = min_{|y - x0| <= r} u(y, t) + e^{-gamma t} |x - y|^2 / eps^2`.
pub fn inf_convolution_spatial(
    field: &FieldSlice,
    params: &ConvolutionParams,
) -> Result<ConvolvedSlice> {
    convolve_slice(field, params, 1.0)
}

/// `u^eps(x, t) = max_{|y - x0| <= r} u(y, t) - e^{gamma t} |x - y|^2 / eps^2`.
pub fn sup_convolution_spatial(
    field: &FieldSlice,
    params: &ConvolutionParams,
) -> Result<ConvolvedSlice> {
    convolve_slice(field, params, -1.0)
}

/// Time levels `tmin + k dt` of a 1D field.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldBlock {
    pub slices: Vec<FieldSlice>,
}

impl FieldBlock {
    pub fn times(&self) -> Vec<f64> {
        self.slices.iter().map(|s| s.time).collect()
    }

    pub fn sample<F: Fn(f64, f64) -> f64>(
        a: f64,
        b: f64,
        cells: usize,
        times: &[f64],
        f: F,
    ) -> Self {
        Self {
            slices: times
                .iter()
                .map(|&t| FieldSlice::sample(a, b, cells, t, |x| f(x, t)))
                .collect(),
        }
    }
}

/// Space-time convolution values and the optimal `(y, s)` per node.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvolvedBlock {
    pub block: FieldBlock,
    pub argmin: Vec<Vec<(f64, f64)>>,
}

fn convolve_block(
    block: &FieldBlock,
    params: &ConvolutionParams,
    sign: f64,
) -> Result<ConvolvedBlock> {
    params.check()?;
    let alpha = params.alpha.ok_or(ConvolutionError::MissingAlpha)?;
    if !(alpha > 0.0) {
        return Err(ConvolutionError::MissingAlpha);
    }
    let (a, b) = params.ball();
    let all: Vec<_> = block.slices.iter().map(|s| pieces(s, a, b)).collect();
    if all.iter().any(|p| p.is_empty()) || all.is_empty() {
        return Err(ConvolutionError::EmptyGrid);
    }
    let mut out = Vec::with_capacity(block.slices.len());
    let mut arg = Vec::with_capacity(block.slices.len());
    for target in &block.slices {
        let t = target.time;
        let w = if sign > 0.0 {
            params.weight(t)
        } else {
            (params.gamma * t).exp() / (params.epsilon * params.epsilon)
        };
        let mut values = Vec::with_capacity(target.values.len());
        let mut args = Vec::with_capacity(target.values.len());
        for i in 0..target.values.len() {
            let x = target.x(i);
            let mut best = (f64::INFINITY, (f64::NAN, f64::NAN));
            for (ps, source) in all.iter().zip(&block.slices) {
                let time_pen = (t - source.time).powi(2) / (alpha * alpha);
                let (f, y) = scan(ps, x, w, sign, f64::NEG_INFINITY);
                let f = f + time_pen;
                if f < best.0 {
                    best = (f, (y, source.time));
                }
            }
            values.push(sign * best.0);
            args.push(best.1);
        }
        out.push(FieldSlice {
            values,
            ..target.clone()
        });
        arg.push(args);
    }
    Ok(ConvolvedBlock {
        block: FieldBlock { slices: out },
        argmin: arg,
    })
}

/// Joint minimisation over grid times `s` and the ball in `y` of
/// `u(y, s) + e^{-gamma t} |x - y|^2 / eps^2 + |t - s|^2 / alpha^2`.
pub fn inf_convolution_spacetime(
    block: &FieldBlock,
    params: &ConvolutionParams,
) -> Result<ConvolvedBlock> {
    convolve_block(block, params, 1.0)
}

/// The mirror image: `max u(y, s) - e^{gamma t} |x - y|^2 / eps^2 - |t - s|^2 / alpha^2`.
pub fn sup_convolution_spacetime(
    block: &FieldBlock,
    params: &ConvolutionParams,
) -> Result<ConvolvedBlock> {
    convolve_block(block, params, -1.0)
}

/// Distance from the ball boundary inside which assertions are skipped:
/// `M e^{gamma T / 2} eps` with `M = sqrt(2 max |u|)`.
pub fn boundary_margin(max_abs_u: f64, gamma: f64, horizon: f64, epsilon: f64) -> f64 {
    (2.0 * max_abs_u).sqrt() * (0.5 * gamma * horizon).exp() * epsilon
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapReport {
    pub max_gap: f64,
    pub bound: f64,
    pub margin: f64,
    pub points: usize,
    pub pass: bool,
}

/// Checks `u_eps(y, 0) - u0(y) <= -theta^2 eps^2 / 4` on a grid of the ball,
/// away from its boundary.
pub fn check_initial_gap(
    datum: &InitialDatum,
    theta: Option<f64>,
    epsilon: f64,
    x0: f64,
    r: f64,
    cells: usize,
) -> Result<GapReport> {
    let available = datum.theta_on_ball(&[x0], r);
    let theta = match (theta, available) {
        (Some(t), Some(a)) if t > 0.0 && t <= a => t,
        _ => return Err(ConvolutionError::ThetaUnavailable { theta, available }),
    };
    let field = FieldSlice::from_datum(datum, x0 - r, x0 + r, cells);
    let params = ConvolutionParams {
        epsilon,
        alpha: None,
        gamma: 0.0,
        ball_center: x0,
        ball_radius: r,
    };
    let conv = inf_convolution_spatial(&field, &params)?;
    let max_u = field.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let margin = boundary_margin(max_u, 0.0, 0.0, epsilon);
    let bound = -0.25 * theta * theta * epsilon * epsilon;
    let mut max_gap = f64::NEG_INFINITY;
    let mut points = 0;
    for (i, (ue, u)) in conv.field.values.iter().zip(&field.values).enumerate() {
        let x = field.x(i);
        if (x - x0).abs() > r - margin {
            continue;
        }
        points += 1;
        max_gap = max_gap.max(ue - u);
    }
    Ok(GapReport {
        max_gap,
        bound,
        margin,
        points,
        pass: points > 0 && max_gap <= bound + 1e-12,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    /// Largest `u_t + H(x, t, u, u_x) - rhs(t)` over checked points.
    pub max_excess: f64,
    /// `(x, t)` where `max_excess` occurs.
    pub worst: (f64, f64),
    pub tolerance: f64,
    pub points: usize,
    pub gamma_ok: bool,
    pub pass: bool,
}

/// Evaluates `d_t u_eps + H(x, t, u_eps, d_x u_eps)` against
/// `(beta C1 / 2) e^{gamma t} eps^2` at interior space-time nodes where the
/// one-sided slopes of `u_eps` agree within `10 dx` in space and `10 dt` in time.
pub fn subsolution_residual(
    u_eps: &FieldBlock,
    model: &dyn Hamiltonian,
    params: &ConvolutionParams,
    margin: f64,
) -> Result<ResidualReport> {
    let c = model.constants();
    let gamma_ok = params.gamma >= gamma_min(&c) - 1e-12;
    let slices = &u_eps.slices;
    if slices.len() < 3 {
        return Err(ConvolutionError::NoDifferentiablePoints);
    }
    let dt = slices[1].time - slices[0].time;
    if slices
        .windows(2)
        .any(|w| ((w[1].time - w[0].time) - dt).abs() > 1e-9 * (1.0 + dt))
    {
        return Err(ConvolutionError::NonUniformTimes);
    }
    let dx = slices[0].dx;
    let tolerance = 10.0 * (dx + dt);
    let (a, b) = params.ball();
    let mut max_excess = f64::NEG_INFINITY;
    let mut worst = (f64::NAN, f64::NAN);
    let mut points = 0;
    for k in 1..slices.len() - 1 {
        let (prev, cur, next) = (&slices[k - 1], &slices[k], &slices[k + 1]);
        let t = cur.time;
        let rhs = 0.5 * c.beta * c.c1 * (params.gamma * t).exp() * params.epsilon * params.epsilon;
        for i in 1..cur.values.len() - 1 {
            let x = cur.x(i);
            if x - a < margin || b - x < margin {
                continue;
            }
            let sl = (cur.values[i] - cur.values[i - 1]) / dx;
            let sr = (cur.values[i + 1] - cur.values[i]) / dx;
            if (sl - sr).abs() > 10.0 * dx {
                continue;
            }
            let (tb, tf) = (
                (cur.values[i] - prev.values[i]) / dt,
                (next.values[i] - cur.values[i]) / dt,
            );
            if (tb - tf).abs() > 10.0 * dt {
                continue;
            }
            let ut = 0.5 * (tb + tf);
            let h = model.eval(&[x], t, cur.values[i], &[0.5 * (sl + sr)]);
            if ut + h - rhs > max_excess {
                max_excess = ut + h - rhs;
                worst = (x, t);
            }
            points += 1;
        }
    }
    if points == 0 {
        return Err(ConvolutionError::NoDifferentiablePoints);
    }
    Ok(ResidualReport {
        max_excess,
        worst,
        tolerance,
        points,
        gamma_ok,
        pass: !gamma_ok || max_excess <= tolerance,
    })
}

/// Right side of the comparison estimate for `(u_eps, u)`:
/// `e^{-K3 t} sup_y (u_eps - u)(y, 0) + (beta C1 / (2 (gamma + K3))) eps^2 (e^{gamma t} - e^{-K3 t})`.
pub fn comparison_rhs(
    constants: &StructuralConstants,
    params: &ConvolutionParams,
    initial_sup: f64,
    t: f64,
) -> f64 {
    let k3 = constants.k3;
    let g = params.gamma;
    let integral = if g + k3 > 0.0 {
        constants.beta * constants.c1 / (2.0 * (g + k3))
            * params.epsilon
            * params.epsilon
            * ((g * t).exp() - (-k3 * t).exp())
    } else {
        0.5 * constants.beta * constants.c1 * params.epsilon * params.epsilon * t
    };
    (-k3 * t).exp() * initial_sup + integral
}
