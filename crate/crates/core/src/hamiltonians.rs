//! Hamiltonians `H(x, t, u, p)`, their structural constants, Legendre
//! transforms and mollification.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::golden_min;
use crate::vector::{dist, dot, norm, zeros};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HamiltonianError {
    #[error("unknown Hamiltonian kind `{0}`")]
    UnknownKind(String),
    #[error("eikonal speed must be positive, got {0}")]
    NonpositiveSpeed(f64),
    #[error("dimension must be at least 1")]
    ZeroDimension,
    #[error("invalid structural constants: {0}")]
    InvalidConstants(String),
    #[error("mollification radius must lie in (0, 1], got {0}")]
    EpsilonOutOfRange(f64),
    #[error("mollifier quadrature too large: {0} nodes")]
    QuadratureTooLarge(usize),
    #[error("Legendre transform requires a Hamiltonian convex in p")]
    NotConvex,
    #[error("generic Legendre transform requires an explicit search box")]
    MissingSearchBox,
}

/// Constants of the structural assumptions on `H`.
///
/// * `|H(x,..) - H(y,..)| <= c1 (beta + |p|) |x - y|`
/// * `|H(.., p) - H(.., q)| <= (a2 |x| + b2) |p - q|`
/// * `|H(.., u, ..) - H(.., v, ..)| <= k3 |u - v|`
///
/// `lambda` is set when `H = lambda u + H0(x, t, p)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StructuralConstants {
    pub c1: f64,
    pub beta: f64,
    pub a2: f64,
    pub b2: f64,
    pub k3: f64,
    #[serde(default)]
    pub lambda: Option<f64>,
}

impl StructuralConstants {
    pub fn new(
        c1: f64,
        beta: f64,
        a2: f64,
        b2: f64,
        k3: f64,
        lambda: Option<f64>,
    ) -> Result<Self, HamiltonianError> {
        let c = Self {
            c1,
            beta,
            a2,
            b2,
            k3,
            lambda,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), HamiltonianError> {
        let bad = |m: &str| Err(HamiltonianError::InvalidConstants(m.to_string()));
        if !(self.c1 >= 0.0 && self.a2 >= 0.0 && self.b2 >= 0.0 && self.k3 >= 0.0) {
            return bad("c1, a2, b2, k3 must be nonnegative");
        }
        if self.beta != 0.0 && self.beta != 1.0 {
            return bad("beta must be 0 or 1");
        }
        if let Some(l) = self.lambda {
            if !l.is_finite() || (l.abs() - self.k3).abs() > 1e-12 * (1.0 + self.k3) {
                return bad("k3 must equal |lambda|");
            }
        }
        Ok(())
    }

    /// `(C1, K3) = (0, 0)`: the bounds degenerate to their undamped form.
    pub fn is_degenerate(&self) -> bool {
        self.c1 == 0.0 && self.k3 == 0.0
    }

    /// `C1 beta / (C1 + K3)`, zero in the degenerate case.
    pub fn drift_ratio(&self) -> f64 {
        if self.is_degenerate() {
            0.0
        } else {
            self.c1 * self.beta / (self.c1 + self.k3)
        }
    }

    /// The p-Lipschitz envelope `A2 |x| + B2`.
    pub fn p_lipschitz_at(&self, x_norm: f64) -> f64 {
        self.a2 * x_norm + self.b2
    }
}

/// A Hamiltonian `H(x, t, u, p)` together with its partial derivatives.
pub trait Hamiltonian: Send + Sync {
    fn dimension(&self) -> usize;
    fn eval(&self, x: &[f64], t: f64, u: f64, p: &[f64]) -> f64;
    fn grad_x(&self, x: &[f64], t: f64, u: f64, p: &[f64]) -> Vec<f64>;
    fn grad_p(&self, x: &[f64], t: f64, u: f64, p: &[f64]) -> Vec<f64>;
    fn grad_u(&self, x: &[f64], t: f64, u: f64, p: &[f64]) -> f64;
    fn constants(&self) -> StructuralConstants;

    fn name(&self) -> String {
        "custom".to_string()
    }

    fn convex_in_p(&self) -> bool {
        true
    }

    /// `H0(x, t, mu p) = mu H0(x, t, p)` for the `u`-free part.
    fn positively_homogeneous(&self) -> bool {
        false
    }

    /// True where `D_p H` does not exist and `grad_p` returned a placeholder.
    fn is_subdifferential_point(&self, _x: &[f64], _t: f64, _u: f64, _p: &[f64]) -> bool {
        false
    }

    /// `H(x, t, 0, p)`; equals `H0` when `constants().lambda` is set.
    fn u_free_part(&self, x: &[f64], t: f64, p: &[f64]) -> f64 {
        self.eval(x, t, 0.0, p)
    }

    fn closed_form_lagrangian(
        &self,
        _x: &[f64],
        _t: f64,
        _u: f64,
        _q: &[f64],
    ) -> Option<LagrangianValue> {
        None
    }

    /// Radius of the ball `{|q| <= c}` on which the Lagrangian is finite, if
    /// it is finite exactly there.
    fn velocity_bound(&self) -> Option<f64> {
        None
    }

    /// Averaging against any radially symmetric kernel leaves `H` unchanged
    /// (sums of affine terms and products of distinct coordinates).
    fn invariant_under_mollification(&self) -> bool {
        false
    }
}

impl<H: Hamiltonian + ?Sized> Hamiltonian for Box<H> {
    fn dimension(&self) -> usize {
        (**self).dimension()
    }
    fn eval(&self, x: &[f64], t: f64, u: f64, p: &[f64]) -> f64 {
        (**self).eval(x, t, u, p)
    }
    fn grad_x(&self, x: &[f64], t: f64, u: f64, p: &[f64]) -> Vec<f64> {
        (**self).grad_x(x, t, u, p)
    }
    fn grad_p(&self, x: &[f64], t: f64, u: f64, p: &[f64]) -> Vec<f64> {
        (**self).grad_p(x, t, u, p)
    }
    fn grad_u(&self, x: &[f64], t: f64, u: f64, p: &[f64]) -> f64 {
        (**self).grad_u(x, t, u, p)
    }
    fn constants(&self) -> StructuralConstants {
        (**self).constants()
    }
    fn name(&self) -> String {
        (**self).name()
    }
    fn convex_in_p(&self) -> bool {
        (**self).convex_in_p()
    }
    fn positively_homogeneous(&self) -> bool {
        (**self).positively_homogeneous()
    }
    fn is_subdifferential_point(&self, x: &[f64], t: f64, u: f64, p: &[f64]) -> bool {
        (**self).is_subdifferential_point(x, t, u, p)
    }
    fn u_free_part(&self, x: &[f64], t: f64, p: &[f64]) -> f64 {
        (**self).u_free_part(x, t, p)
    }
    fn closed_form_lagrangian(
        &self,
        x: &[f64],
        t: f64,
        u: f64,
        q: &[f64],
    ) -> Option<LagrangianValue> {
        (**self).closed_form_lagrangian(x, t, u, q)
    }
    fn velocity_bound(&self) -> Option<f64> {
        (**self).velocity_bound()
    }
    fn invariant_under_mollification(&self) -> bool {
        (**self).invariant_under_mollification()
    }
}

/// Value of the Legendre transform `L(x, t, u, q) = sup_p {<p, q> - H}`.
#[derive(Debug, Clone, PartialEq)]
pub struct LagrangianValue {
    /// `f64::INFINITY` when the supremum is unbounded.
    pub value: f64,
    pub maximizer_p: Option<Vec<f64>>,
    /// Set when the value came from a numeric search rather than a closed form.
    pub approximate: bool,
}

impl LagrangianValue {
    pub fn finite(value: f64, maximizer_p: Vec<f64>) -> Self {
        Self {
            value,
            maximizer_p: Some(maximizer_p),
            approximate: false,
        }
    }

    pub fn infinite() -> Self {
        Self {
            value: f64::INFINITY,
            maximizer_p: None,
            approximate: false,
        }
    }

    pub fn is_infinite(&self) -> bool {
        self.value == f64::INFINITY
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BuiltinKind {
    /// `u + <x, p>`
    TransportPlus,
    /// `u - <x, p>`
    TransportMinus,
    /// `-u + <x, p>`
    TransportNegU,
    /// `u + c |p|`
    Eikonal { c: f64 },
    /// `lambda u + |p|^2 / 2`
    Quadratic { lambda: f64 },
}

impl BuiltinKind {
    /// Resolves a config name; `param` is `c` for the eikonal model and
    /// `lambda` for the quadratic one.
    pub fn from_name(name: &str, param: Option<f64>) -> Result<Self, HamiltonianError> {
        match name {
            "transport+" => Ok(Self::TransportPlus),
            "transport-" => Ok(Self::TransportMinus),
            "transport-negu" => Ok(Self::TransportNegU),
            "eikonal" => Ok(Self::Eikonal {
                c: param.unwrap_or(1.0),
            }),
            "quadratic" => Ok(Self::Quadratic {
                lambda: param.unwrap_or(1.0),
            }),
            other => Err(HamiltonianError::UnknownKind(other.to_string())),
        }
    }

    pub fn config_name(&self) -> &'static str {
        match self {
            Self::TransportPlus => "transport+",
            Self::TransportMinus => "transport-",
            Self::TransportNegU => "transport-negu",
            Self::Eikonal { .. } => "eikonal",
            Self::Quadratic { .. } => "quadratic",
        }
    }
}

impl FromStr for BuiltinKind {
    type Err = HamiltonianError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::from_name(s, None)
    }
}

impl fmt::Display for BuiltinKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Eikonal { c } => write!(f, "eikonal(c={c})"),
            Self::Quadratic { lambda } => write!(f, "quadratic(lambda={lambda})"),
            other => f.write_str(other.config_name()),
        }
    }
}

/// One of the example Hamiltonians with closed-form partials and Lagrangian.
#[derive(Debug, Clone, PartialEq)]
pub struct BuiltinHamiltonian {
    kind: BuiltinKind,
    dimension: usize,
    constants: StructuralConstants,
}

pub fn make_builtin(
    kind: BuiltinKind,
    dimension: usize,
) -> Result<BuiltinHamiltonian, HamiltonianError> {
    BuiltinHamiltonian::new(kind, dimension)
}

impl BuiltinHamiltonian {
    pub fn new(kind: BuiltinKind, dimension: usize) -> Result<Self, HamiltonianError> {
        if dimension == 0 {
            return Err(HamiltonianError::ZeroDimension);
        }
        let constants = match kind {
            BuiltinKind::TransportPlus | BuiltinKind::TransportMinus => {
                StructuralConstants::new(1.0, 0.0, 1.0, 0.0, 1.0, Some(1.0))?
            }
            BuiltinKind::TransportNegU => {
                StructuralConstants::new(1.0, 0.0, 1.0, 0.0, 1.0, Some(-1.0))?
            }
            BuiltinKind::Eikonal { c } => {
                if !(c > 0.0) {
                    return Err(HamiltonianError::NonpositiveSpeed(c));
                }
                StructuralConstants::new(0.0, 0.0, 0.0, c, 1.0, Some(1.0))?
            }
            // |p|^2/2 has no global p-Lipschitz constant.
            BuiltinKind::Quadratic { lambda } => {
                StructuralConstants::new(0.0, 0.0, 0.0, f64::INFINITY, lambda.abs(), Some(lambda))?
            }
        };
        Ok(Self {
            kind,
            dimension,
            constants,
        })
    }

    pub fn kind(&self) -> BuiltinKind {
        self.kind
    }

    /// Overrides the declared constants (used to test falsification).
    pub fn with_constants(mut self, constants: StructuralConstants) -> Self {
        self.constants = constants;
        self
    }

    fn lambda(&self) -> f64 {
        match self.kind {
            BuiltinKind::TransportNegU => -1.0,
            BuiltinKind::Quadratic { lambda } => lambda,
            _ => 1.0,
        }
    }
}

impl Hamiltonian for BuiltinHamiltonian {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn eval(&self, x: &[f64], t: f64, u: f64, p: &[f64]) -> f64 {
        self.lambda() * u + self.u_free_part(x, t, p)
    }

    fn u_free_part(&self, x: &[f64], _t: f64, p: &[f64]) -> f64 {
        match self.kind {
            BuiltinKind::TransportPlus | BuiltinKind::TransportNegU => dot(x, p),
            BuiltinKind::TransportMinus => -dot(x, p),
            BuiltinKind::Eikonal { c } => c * norm(p),
            BuiltinKind::Quadratic { .. } => 0.5 * dot(p, p),
        }
    }

    fn grad_x(&self, _x: &[f64], _t: f64, _u: f64, p: &[f64]) -> Vec<f64> {
        match self.kind {
            BuiltinKind::TransportPlus | BuiltinKind::TransportNegU => p.to_vec(),
            BuiltinKind::TransportMinus => p.iter().map(|v| -v).collect(),
            _ => zeros(p.len()),
        }
    }

    fn grad_p(&self, x: &[f64], _t: f64, _u: f64, p: &[f64]) -> Vec<f64> {
        match self.kind {
            BuiltinKind::TransportPlus | BuiltinKind::TransportNegU => x.to_vec(),
            BuiltinKind::TransportMinus => x.iter().map(|v| -v).collect(),
            BuiltinKind::Eikonal { c } => {
                let n = norm(p);
                if n == 0.0 {
                    zeros(p.len())
                } else {
                    p.iter().map(|v| c * v / n).collect()
                }
            }
            BuiltinKind::Quadratic { .. } => p.to_vec(),
        }
    }

    fn grad_u(&self, _x: &[f64], _t: f64, _u: f64, _p: &[f64]) -> f64 {
        self.lambda()
    }

    fn constants(&self) -> StructuralConstants {
        self.constants
    }

    fn name(&self) -> String {
        self.kind.to_string()
    }

    fn positively_homogeneous(&self) -> bool {
        !matches!(self.kind, BuiltinKind::Quadratic { .. })
    }

    fn is_subdifferential_point(&self, _x: &[f64], _t: f64, _u: f64, p: &[f64]) -> bool {
        matches!(self.kind, BuiltinKind::Eikonal { .. }) && norm(p) < 1e-12
    }

    fn closed_form_lagrangian(
        &self,
        x: &[f64],
        _t: f64,
        u: f64,
        q: &[f64],
    ) -> Option<LagrangianValue> {
        let lambda = self.lambda();
        let affine = |sign: f64| {
            // sup_p <p, q - sign x> - lambda u is finite only on q = sign x.
            let gap = q
                .iter()
                .zip(x)
                .map(|(qi, xi)| qi - sign * xi)
                .map(|d| d * d)
                .sum::<f64>()
                .sqrt();
            let scale = 1.0 + norm(x);
            if gap <= 1e-12 * scale {
                LagrangianValue::finite(-lambda * u, zeros(q.len()))
            } else {
                LagrangianValue::infinite()
            }
        };
        Some(match self.kind {
            BuiltinKind::TransportPlus | BuiltinKind::TransportNegU => affine(1.0),
            BuiltinKind::TransportMinus => affine(-1.0),
            BuiltinKind::Eikonal { c } => {
                if norm(q) <= c * (1.0 + 1e-12) {
                    LagrangianValue::finite(-lambda * u, zeros(q.len()))
                } else {
                    LagrangianValue::infinite()
                }
            }
            BuiltinKind::Quadratic { .. } => {
                LagrangianValue::finite(0.5 * dot(q, q) - lambda * u, q.to_vec())
            }
        })
    }

    fn velocity_bound(&self) -> Option<f64> {
        match self.kind {
            BuiltinKind::Eikonal { c } => Some(c),
            _ => None,
        }
    }

    fn invariant_under_mollification(&self) -> bool {
        matches!(
            self.kind,
            BuiltinKind::TransportPlus | BuiltinKind::TransportMinus | BuiltinKind::TransportNegU
        )
    }
}

/// `H ≡ value`: every partial vanishes, all structural constants are zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantHamiltonian {
    pub value: f64,
    pub dimension: usize,
}

impl Hamiltonian for ConstantHamiltonian {
    fn dimension(&self) -> usize {
        self.dimension
    }
    fn eval(&self, _x: &[f64], _t: f64, _u: f64, _p: &[f64]) -> f64 {
        self.value
    }
    fn grad_x(&self, x: &[f64], _t: f64, _u: f64, _p: &[f64]) -> Vec<f64> {
        zeros(x.len())
    }
    fn grad_p(&self, _x: &[f64], _t: f64, _u: f64, p: &[f64]) -> Vec<f64> {
        zeros(p.len())
    }
    fn grad_u(&self, _x: &[f64], _t: f64, _u: f64, _p: &[f64]) -> f64 {
        0.0
    }
    fn constants(&self) -> StructuralConstants {
        StructuralConstants {
            c1: 0.0,
            beta: 0.0,
            a2: 0.0,
            b2: 0.0,
            k3: 0.0,
            lambda: Some(0.0),
        }
    }
    fn name(&self) -> String {
        format!("constant({})", self.value)
    }
}

/// Axis-aligned box searched by the generic Legendre transform.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl SearchBox {
    pub fn cube(dimension: usize, half_width: f64) -> Self {
        Self {
            lo: vec![-half_width; dimension],
            hi: vec![half_width; dimension],
        }
    }

    fn doubled(&self) -> Self {
        let mut lo = Vec::with_capacity(self.lo.len());
        let mut hi = Vec::with_capacity(self.hi.len());
        for (a, b) in self.lo.iter().zip(&self.hi) {
            let mid = 0.5 * (a + b);
            let half = b - a;
            lo.push(mid - half);
            hi.push(mid + half);
        }
        Self { lo, hi }
    }
}

/// `L(x, t, u, q) = sup_p {<p, q> - H(x, t, u, p)}`.
///
/// Built-ins use closed forms. Other models are maximised coordinate-wise
/// with golden-section search over `search`; a maximiser that sticks to the
/// box boundary and keeps improving on the doubled box is reported as
/// `+infinity`.
pub fn legendre_transform(
    model: &dyn Hamiltonian,
    x: &[f64],
    t: f64,
    u: f64,
    q: &[f64],
    search: Option<&SearchBox>,
) -> Result<LagrangianValue, HamiltonianError> {
    if !model.convex_in_p() {
        return Err(HamiltonianError::NotConvex);
    }
    if let Some(v) = model.closed_form_lagrangian(x, t, u, q) {
        return Ok(v);
    }
    let search = search.ok_or(HamiltonianError::MissingSearchBox)?;
    let (p1, v1, on_edge) = maximize_in_box(model, x, t, u, q, search);
    if !on_edge {
        return Ok(LagrangianValue {
            value: v1,
            maximizer_p: Some(p1),
            approximate: true,
        });
    }
    let (p2, v2, _) = maximize_in_box(model, x, t, u, q, &search.doubled());
    if v2 > v1 + 1e-9 * (1.0 + v1.abs()) {
        return Ok(LagrangianValue {
            value: f64::INFINITY,
            maximizer_p: None,
            approximate: true,
        });
    }
    Ok(LagrangianValue {
        value: v2.max(v1),
        maximizer_p: Some(if v2 > v1 { p2 } else { p1 }),
        approximate: true,
    })
}

fn maximize_in_box(
    model: &dyn Hamiltonian,
    x: &[f64],
    t: f64,
    u: f64,
    q: &[f64],
    search: &SearchBox,
) -> (Vec<f64>, f64, bool) {
    let objective = |p: &[f64]| dot(p, q) - model.eval(x, t, u, p);
    let mut p: Vec<f64> = search
        .lo
        .iter()
        .zip(&search.hi)
        .map(|(a, b)| 0.5 * (a + b))
        .collect();
    let mut best = objective(&p);
    for _ in 0..500 {
        let before = best;
        for k in 0..p.len() {
            let width = search.hi[k] - search.lo[k];
            let mut trial = p.clone();
            let (pk, neg) = golden_min(
                |z| {
                    trial[k] = z;
                    -objective(&trial)
                },
                search.lo[k],
                search.hi[k],
                1e-12 * (1.0 + width),
            );
            if -neg >= best {
                p[k] = pk;
                best = -neg;
            }
        }
        if best - before <= 1e-14 * (1.0 + best.abs()) {
            break;
        }
    }
    let on_edge = p.iter().enumerate().any(|(k, &pk)| {
        let width = search.hi[k] - search.lo[k];
        (pk - search.lo[k]).abs() <= 1e-6 * width || (search.hi[k] - pk).abs() <= 1e-6 * width
    });
    (p, best, on_edge)
}

/// `H_eps = (H * rho_eps) + eps sqrt(|p|^2 + 1)`, with the Friedrichs
/// mollifier in all of `(x, t, u, p)` discretised by a midpoint tensor rule.
#[derive(Debug, Clone)]
pub struct Mollified<H> {
    base: H,
    epsilon: f64,
    /// Shifts `w = (w_x, w_t, w_u, w_p)` and normalised weights.
    nodes: Vec<(Vec<f64>, f64)>,
    exact: bool,
}

pub fn mollify<H: Hamiltonian>(
    model: H,
    epsilon: f64,
    quadrature_points: usize,
) -> Result<Mollified<H>, HamiltonianError> {
    Mollified::new(model, epsilon, quadrature_points, true)
}

impl<H: Hamiltonian> Mollified<H> {
    /// `use_shortcut = false` forces the quadrature even when the base model
    /// is invariant under symmetric averaging.
    pub fn new(
        base: H,
        epsilon: f64,
        quadrature_points: usize,
        use_shortcut: bool,
    ) -> Result<Self, HamiltonianError> {
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(HamiltonianError::EpsilonOutOfRange(epsilon));
        }
        let q = quadrature_points.max(1);
        let n = base.dimension();
        let dims = 2 * n + 2;
        let total = (q as f64).powi(dims as i32);
        if total > 2.0e6 {
            return Err(HamiltonianError::QuadratureTooLarge(total as usize));
        }
        let exact = use_shortcut && base.invariant_under_mollification();
        let nodes = if exact {
            Vec::new()
        } else {
            friedrichs_nodes(dims, q, epsilon)
        };
        Ok(Self {
            base,
            epsilon,
            nodes,
            exact,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn base(&self) -> &H {
        &self.base
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    fn shifted(
        &self,
        w: &[f64],
        x: &[f64],
        t: f64,
        u: f64,
        p: &[f64],
    ) -> (Vec<f64>, f64, f64, Vec<f64>) {
        let n = x.len();
        let xs: Vec<f64> = x.iter().zip(&w[..n]).map(|(a, b)| a - b).collect();
        // H is extended by its t = 0 value for negative times.
        let ts = (t - w[n]).max(0.0);
        let us = u - w[n + 1];
        let ps: Vec<f64> = p.iter().zip(&w[n + 2..]).map(|(a, b)| a - b).collect();
        (xs, ts, us, ps)
    }

    /// The averaged part `(H * rho_eps)` only.
    pub fn smoothed_part(&self, x: &[f64], t: f64, u: f64, p: &[f64]) -> f64 {
        if self.exact {
            return self.base.eval(x, t, u, p);
        }
        self.nodes
            .iter()
            .map(|(w, weight)| {
                let (xs, ts, us, ps) = self.shifted(w, x, t, u, p);
                weight * self.base.eval(&xs, ts, us, &ps)
            })
            .sum()
    }

    fn average_vec<F: Fn(&[f64], f64, f64, &[f64]) -> Vec<f64>>(
        &self,
        f: F,
        x: &[f64],
        t: f64,
        u: f64,
        p: &[f64],
        len: usize,
    ) -> Vec<f64> {
        if self.exact {
            return f(x, t, u, p);
        }
        let mut acc = vec![0.0; len];
        for (w, weight) in &self.nodes {
            let (xs, ts, us, ps) = self.shifted(w, x, t, u, p);
            for (a, v) in acc.iter_mut().zip(f(&xs, ts, us, &ps)) {
                *a += weight * v;
            }
        }
        acc
    }
}

fn friedrichs_nodes(dims: usize, q: usize, epsilon: f64) -> Vec<(Vec<f64>, f64)> {
    let h = 2.0 * epsilon / q as f64;
    let axis: Vec<f64> = (0..q).map(|k| -epsilon + (k as f64 + 0.5) * h).collect();
    let mut nodes = Vec::new();
    let mut index = vec![0usize; dims];
    loop {
        let w: Vec<f64> = index.iter().map(|&k| axis[k]).collect();
        let r2 = dot(&w, &w) / (epsilon * epsilon);
        if r2 < 1.0 {
            nodes.push((w, (-1.0 / (1.0 - r2)).exp()));
        }
        let mut d = 0;
        loop {
            if d == dims {
                let total: f64 = nodes.iter().map(|(_, m)| m).sum();
                for node in &mut nodes {
                    node.1 /= total;
                }
                return nodes;
            }
            index[d] += 1;
            if index[d] < q {
                break;
            }
            index[d] = 0;
            d += 1;
        }
    }
}

impl<H: Hamiltonian> Hamiltonian for Mollified<H> {
    fn dimension(&self) -> usize {
        self.base.dimension()
    }

    fn eval(&self, x: &[f64], t: f64, u: f64, p: &[f64]) -> f64 {
        self.smoothed_part(x, t, u, p) + self.epsilon * (dot(p, p) + 1.0).sqrt()
    }

    fn grad_x(&self, x: &[f64], t: f64, u: f64, p: &[f64]) -> Vec<f64> {
        self.average_vec(
            |a, b, c, d| self.base.grad_x(a, b, c, d),
            x,
            t,
            u,
            p,
            x.len(),
        )
    }

    fn grad_p(&self, x: &[f64], t: f64, u: f64, p: &[f64]) -> Vec<f64> {
        let mut g = self.average_vec(
            |a, b, c, d| self.base.grad_p(a, b, c, d),
            x,
            t,
            u,
            p,
            p.len(),
        );
        let s = (dot(p, p) + 1.0).sqrt();
        for (gi, pi) in g.iter_mut().zip(p) {
            *gi += self.epsilon * pi / s;
        }
        g
    }

    fn grad_u(&self, x: &[f64], t: f64, u: f64, p: &[f64]) -> f64 {
        self.average_vec(
            |a, b, c, d| vec![self.base.grad_u(a, b, c, d)],
            x,
            t,
            u,
            p,
            1,
        )[0]
    }

    fn constants(&self) -> StructuralConstants {
        let mut c = self.base.constants();
        c.b2 += self.epsilon;
        c
    }

    fn name(&self) -> String {
        format!("mollified({}, eps={})", self.base.name(), self.epsilon)
    }

    fn convex_in_p(&self) -> bool {
        self.base.convex_in_p()
    }
}

/// Region sampled by [`verify_structural_constants`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleBox {
    pub x_radius: f64,
    pub p_radius: f64,
    pub u_radius: f64,
    pub t_max: f64,
}

impl Default for SampleBox {
    fn default() -> Self {
        Self {
            x_radius: 2.0,
            p_radius: 2.0,
            u_radius: 2.0,
            t_max: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatioCheck {
    pub name: &'static str,
    pub max_ratio: f64,
    pub declared: f64,
    pub pass: bool,
}

impl RatioCheck {
    fn new(name: &'static str, max_ratio: f64, declared: f64) -> Self {
        let pass = max_ratio <= declared * (1.0 + 1e-9) + 1e-12;
        Self {
            name,
            max_ratio,
            declared,
            pass,
        }
    }
}

/// Sampled falsification report for the declared structural constants.
///
/// `h1` is the largest `|H(x) - H(y)| / ((beta + |p|) |x - y|)` seen,
/// `h2` the largest `|H(p) - H(q)| / ((A2 |x| + B2) |p - q|)` (declared 1),
/// `h3` the largest `|H(u) - H(v)| / |u - v|`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantsReport {
    pub h1: RatioCheck,
    pub h2: RatioCheck,
    pub h3: RatioCheck,
}

impl ConstantsReport {
    pub fn pass(&self) -> bool {
        self.h1.pass && self.h2.pass && self.h3.pass
    }
}

pub fn verify_structural_constants(
    model: &dyn Hamiltonian,
    sample_box: SampleBox,
    samples: usize,
) -> ConstantsReport {
    let n = model.dimension();
    let c = model.constants();
    let mut rng = ChaCha8Rng::seed_from_u64(0x4831);
    let draw = |r: f64, rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(-r..=r)).collect()
    };
    let (mut h1, mut h2, mut h3) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..samples.max(1) {
        let x = draw(sample_box.x_radius, &mut rng);
        let y = draw(sample_box.x_radius, &mut rng);
        let p = draw(sample_box.p_radius, &mut rng);
        let q = draw(sample_box.p_radius, &mut rng);
        let t = rng.gen_range(0.0..=sample_box.t_max);
        let u = rng.gen_range(-sample_box.u_radius..=sample_box.u_radius);
        let v = rng.gen_range(-sample_box.u_radius..=sample_box.u_radius);

        let hx = model.eval(&x, t, u, &p);
        let denom1 = (c.beta + norm(&p)) * dist(&x, &y);
        let num1 = (hx - model.eval(&y, t, u, &p)).abs();
        if denom1 > 1e-9 {
            h1 = h1.max(num1 / denom1);
        }

        let dpq = dist(&p, &q);
        let num2 = (hx - model.eval(&x, t, u, &q)).abs();
        if dpq > 1e-9 {
            let envelope = c.p_lipschitz_at(norm(&x));
            let ratio = if envelope > 0.0 {
                num2 / (envelope * dpq)
            } else if num2 > 1e-12 {
                f64::INFINITY
            } else {
                0.0
            };
            h2 = h2.max(ratio);
        }

        let duv = (u - v).abs();
        if duv > 1e-9 {
            h3 = h3.max((hx - model.eval(&x, t, v, &p)).abs() / duv);
        }
    }
    ConstantsReport {
        h1: RatioCheck::new("H1", h1, c.c1),
        h2: RatioCheck::new("H2", h2, 1.0),
        h3: RatioCheck::new("H3", h3, c.k3),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn all_builtins(n: usize) -> Vec<BuiltinHamiltonian> {
        [
            BuiltinKind::TransportPlus,
            BuiltinKind::TransportMinus,
            BuiltinKind::TransportNegU,
            BuiltinKind::Eikonal { c: 1.5 },
            BuiltinKind::Quadratic { lambda: 1.0 },
            BuiltinKind::Quadratic { lambda: -0.5 },
        ]
        .into_iter()
        .map(|k| make_builtin(k, n).unwrap())
        .collect()
    }

    #[test]
    fn transport_plus_value_and_constants() {
        let h = make_builtin(BuiltinKind::TransportPlus, 1).unwrap();
        assert_eq!(h.eval(&[2.0], 0.0, 3.0, &[1.0]), 5.0);
        let c = h.constants();
        assert_eq!((c.c1, c.beta, c.a2, c.b2, c.k3), (1.0, 0.0, 1.0, 0.0, 1.0));
        assert_eq!(c.lambda, Some(1.0));
    }

    #[test]
    fn eikonal_value_and_constants() {
        let h = make_builtin(BuiltinKind::Eikonal { c: 1.0 }, 1).unwrap();
        assert_eq!(h.eval(&[0.3], 0.0, 0.0, &[-0.5]), 0.5);
        let c = h.constants();
        assert_eq!(
            (c.c1, c.beta, c.a2, c.b2, c.k3, c.lambda),
            (0.0, 0.0, 0.0, 1.0, 1.0, Some(1.0))
        );
        let neg = make_builtin(BuiltinKind::TransportNegU, 1)
            .unwrap()
            .constants();
        assert_eq!((neg.lambda, neg.k3), (Some(-1.0), 1.0));
    }

    #[test]
    fn builtin_errors() {
        assert_eq!(
            make_builtin(BuiltinKind::Eikonal { c: 0.0 }, 1),
            Err(HamiltonianError::NonpositiveSpeed(0.0))
        );
        assert!(matches!(
            BuiltinKind::from_name("burgers", None),
            Err(HamiltonianError::UnknownKind(_))
        ));
        assert_eq!(
            make_builtin(BuiltinKind::TransportPlus, 0),
            Err(HamiltonianError::ZeroDimension)
        );
        assert_eq!(
            "transport-negu".parse::<BuiltinKind>(),
            Ok(BuiltinKind::TransportNegU)
        );
    }

    #[test]
    fn constants_validation() {
        assert!(StructuralConstants::new(1.0, 0.5, 0.0, 0.0, 0.0, None).is_err());
        assert!(StructuralConstants::new(-1.0, 0.0, 0.0, 0.0, 0.0, None).is_err());
        assert!(StructuralConstants::new(0.0, 0.0, 0.0, 1.0, 2.0, Some(1.0)).is_err());
        assert!(StructuralConstants::new(0.0, 1.0, 0.0, 1.0, 2.0, Some(-2.0)).is_ok());
    }

    #[test]
    fn lagrangian_closed_forms() {
        let quad = make_builtin(BuiltinKind::Quadratic { lambda: 1.0 }, 1).unwrap();
        let l = legendre_transform(&quad, &[0.0], 0.0, 2.0, &[3.0], None).unwrap();
        assert!((l.value - 2.5).abs() < 1e-15);

        let eik = make_builtin(BuiltinKind::Eikonal { c: 1.0 }, 1).unwrap();
        assert_eq!(
            legendre_transform(&eik, &[0.0], 0.0, 0.0, &[0.5], None)
                .unwrap()
                .value,
            0.0
        );
        assert!(legendre_transform(&eik, &[0.0], 0.0, 0.0, &[2.0], None)
            .unwrap()
            .is_infinite());

        let tp = make_builtin(BuiltinKind::TransportPlus, 1).unwrap();
        assert_eq!(
            legendre_transform(&tp, &[0.4], 0.0, 1.5, &[0.4], None)
                .unwrap()
                .value,
            -1.5
        );
        assert!(legendre_transform(&tp, &[0.4], 0.0, 1.5, &[0.5], None)
            .unwrap()
            .is_infinite());
    }

    // Brute-force oracle for sup_p {q p - |p|}.
    fn eikonal_sup_brute(q: f64, range: f64) -> f64 {
        let steps = 200_000;
        (0..=steps)
            .map(|k| -range + 2.0 * range * k as f64 / steps as f64)
            .map(|p| q * p - p.abs())
            .fold(f64::NEG_INFINITY, f64::max)
    }

    #[test]
    fn eikonal_lagrangian_matches_brute_force() {
        assert_eq!(eikonal_sup_brute(0.5, 10.0), 0.0);
        let growth: Vec<f64> = [10.0, 100.0, 1000.0]
            .iter()
            .map(|&r| eikonal_sup_brute(2.0, r))
            .collect();
        assert!(growth[1] > 9.0 * growth[0] && growth[2] > 9.0 * growth[1]);
    }

    #[test]
    fn generic_transform_needs_box_and_detects_unbounded() {
        let eik = make_builtin(BuiltinKind::Eikonal { c: 1.0 }, 1).unwrap();
        let m = mollify(eik, 0.1, 4).unwrap();
        assert_eq!(
            legendre_transform(&m, &[0.0], 0.0, 0.0, &[0.5], None),
            Err(HamiltonianError::MissingSearchBox)
        );
        let boxed = SearchBox::cube(1, 5.0);
        let inside = legendre_transform(&m, &[0.0], 0.0, 0.0, &[0.5], Some(&boxed)).unwrap();
        assert!(inside.approximate && inside.value.is_finite());
        let outside = legendre_transform(&m, &[0.0], 0.0, 0.0, &[3.0], Some(&boxed)).unwrap();
        assert!(outside.is_infinite());
    }

    #[test]
    fn quadratic_biconjugation_recovers_h() {
        let quad = make_builtin(BuiltinKind::Quadratic { lambda: 1.0 }, 1).unwrap();
        let u = 0.7;
        for &p in &[-2.0, -0.3, 0.0, 1.1, 2.5] {
            let (_, neg) = golden_min(
                |q| {
                    let l = legendre_transform(&quad, &[0.0], 0.0, u, &[q], None)
                        .unwrap()
                        .value;
                    -(p * q - l)
                },
                -10.0,
                10.0,
                1e-12,
            );
            assert!((-neg - quad.eval(&[0.0], 0.0, u, &[p])).abs() < 1e-8);
        }
    }

    #[test]
    fn mollify_affine_is_exact() {
        let tp = make_builtin(BuiltinKind::TransportPlus, 1).unwrap();
        let fast = mollify(tp.clone(), 0.1, 6).unwrap();
        let slow = Mollified::new(tp.clone(), 0.1, 6, false).unwrap();
        assert!(slow.node_count() > 0);
        for &(x, u, p) in &[(0.3, 1.0, -0.4), (-1.2, 0.0, 2.0), (0.0, 3.0, 0.0)] {
            let base = tp.eval(&[x], 0.5, u, &[p]);
            let expect = base + 0.1 * (p * p + 1.0f64).sqrt();
            assert!((fast.eval(&[x], 0.5, u, &[p]) - expect).abs() < 1e-14);
            assert!((slow.eval(&[x], 0.5, u, &[p]) - expect).abs() < 1e-12);
        }
        // p = 0, H(x, t, u, 0) = u.
        assert!((fast.eval(&[0.8], 0.2, 1.25, &[0.0]) - 1.35).abs() < 1e-14);
        let c = fast.constants();
        assert_eq!((c.c1, c.k3), (1.0, 1.0));
        assert!((c.b2 - 0.1).abs() < 1e-15);
    }

    #[test]
    fn mollify_rejects_bad_epsilon() {
        let tp = make_builtin(BuiltinKind::TransportPlus, 1).unwrap();
        assert!(matches!(
            mollify(tp.clone(), 0.0, 4),
            Err(HamiltonianError::EpsilonOutOfRange(_))
        ));
        assert!(matches!(
            mollify(tp, 1.5, 4),
            Err(HamiltonianError::EpsilonOutOfRange(_))
        ));
    }

    #[test]
    fn mollified_eikonal_stays_convex_and_smooth() {
        let eik = make_builtin(BuiltinKind::Eikonal { c: 1.0 }, 1).unwrap();
        let m = mollify(eik, 0.1, 6).unwrap();
        let ps: Vec<f64> = (0..=400).map(|k| -1.0 + k as f64 * 0.005).collect();
        for w in ps.windows(3) {
            let second = m.eval(&[0.0], 0.3, 0.2, &[w[0]])
                - 2.0 * m.eval(&[0.0], 0.3, 0.2, &[w[1]])
                + m.eval(&[0.0], 0.3, 0.2, &[w[2]]);
            assert!(second >= -1e-12, "second difference {second} at p={}", w[1]);
        }
        // D_p H_eps exists at the kink of the base model.
        assert!(m.grad_p(&[0.0], 0.3, 0.2, &[0.0])[0].abs() < 1e-12);
    }

    #[test]
    fn structural_constants_sampling() {
        let tp = make_builtin(BuiltinKind::TransportPlus, 1).unwrap();
        let report = verify_structural_constants(&tp, SampleBox::default(), 2000);
        assert!(report.pass(), "{report:?}");

        let eik = make_builtin(BuiltinKind::Eikonal { c: 1.0 }, 2).unwrap();
        let report = verify_structural_constants(&eik, SampleBox::default(), 2000);
        assert_eq!(report.h1.max_ratio, 0.0);
        assert!(report.pass());

        let mut c = tp.constants();
        c.k3 = 0.5;
        let lying = tp.with_constants(c);
        let report = verify_structural_constants(&lying, SampleBox::default(), 500);
        assert!(!report.h3.pass);
        assert!(report.h1.pass && report.h2.pass);
    }

    #[test]
    fn homogeneity_of_u_free_part() {
        for h in all_builtins(2) {
            if !h.positively_homogeneous() {
                continue;
            }
            let x = [0.3, -0.7];
            let p = [1.2, 0.4];
            for &mu in &[0.0, 0.5, 2.0] {
                let mp = [mu * p[0], mu * p[1]];
                let lhs = h.u_free_part(&x, 0.1, &mp);
                let rhs = mu * h.u_free_part(&x, 0.1, &p);
                assert!((lhs - rhs).abs() < 1e-14, "{}", h.name());
            }
        }
    }

    fn fd_check(h: &BuiltinHamiltonian, x: &[f64], t: f64, u: f64, p: &[f64]) {
        let step = 1e-5;
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-6 * a.abs().max(1.0);
        let gx = h.grad_x(x, t, u, p);
        let gp = h.grad_p(x, t, u, p);
        for k in 0..x.len() {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[k] += step;
            xm[k] -= step;
            let fd = (h.eval(&xp, t, u, p) - h.eval(&xm, t, u, p)) / (2.0 * step);
            assert!(close(gx[k], fd), "{} grad_x", h.name());
            let mut pp = p.to_vec();
            let mut pm = p.to_vec();
            pp[k] += step;
            pm[k] -= step;
            let fd = (h.eval(x, t, u, &pp) - h.eval(x, t, u, &pm)) / (2.0 * step);
            assert!(close(gp[k], fd), "{} grad_p {} vs {}", h.name(), gp[k], fd);
        }
        let fd = (h.eval(x, t, u + step, p) - h.eval(x, t, u - step, p)) / (2.0 * step);
        assert!(close(h.grad_u(x, t, u, p), fd));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn partials_match_finite_differences_1d(
            x in -2.0f64..2.0, t in 0.0f64..1.0, u in -2.0f64..2.0,
            p in prop_oneof![-2.0f64..-1e-3, 1e-3f64..2.0],
        ) {
            for h in all_builtins(1) {
                fd_check(&h, &[x], t, u, &[p]);
            }
        }

        #[test]
        fn partials_match_finite_differences_2d(
            x in prop::array::uniform2(-2.0f64..2.0),
            u in -2.0f64..2.0,
            p in prop::array::uniform2(-2.0f64..2.0),
        ) {
            prop_assume!(norm(&p) > 0.1);
            for h in all_builtins(2) {
                fd_check(&h, &x, 0.2, u, &p);
            }
        }

        #[test]
        fn builtins_are_midpoint_convex(
            x in -2.0f64..2.0, u in -2.0f64..2.0, p in -3.0f64..3.0, q in -3.0f64..3.0,
        ) {
            for h in all_builtins(1) {
                let mid = h.eval(&[x], 0.0, u, &[0.5 * (p + q)]);
                let avg = 0.5 * h.eval(&[x], 0.0, u, &[p]) + 0.5 * h.eval(&[x], 0.0, u, &[q]);
                prop_assert!(mid <= avg + 1e-12);
            }
        }
    }
}
