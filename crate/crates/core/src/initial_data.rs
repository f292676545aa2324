//! Lipschitz initial data with exact subgradient sets.
//!
//! Analytic data are radial, `u0(x) = f(|x|)`, and describe their
//! subdifferential through a table of radial pieces. Sampled data are 1D and
//! use one-sided slopes.

use thiserror::Error;

use crate::vector::{dist, norm, project_segment, scale, zeros};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DatumError {
    #[error("index {0} has no neighbour on both sides")]
    BoundaryIndex(usize),
    #[error("sampled datum needs at least two values and a positive spacing")]
    BadSamples,
    #[error("sampled data are one-dimensional, got a point of dimension {0}")]
    DimensionMismatch(usize),
    #[error("unknown datum kind `{0}`")]
    UnknownKind(String),
}

/// The subdifferential `D^- u0(x)` of a datum at one point.
#[derive(Debug, Clone, PartialEq)]
pub enum SubgradientSet {
    Empty,
    Point(Vec<f64>),
    /// Convex hull of two covectors (an interval in 1D).
    Segment {
        a: Vec<f64>,
        b: Vec<f64>,
    },
    /// Closed ball of covectors.
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
}

impl SubgradientSet {
    pub fn is_empty(&self) -> bool {
        matches!(self, Self::Empty)
    }

    /// Element of least norm, `None` for the empty set.
    pub fn min_norm_element(&self) -> Option<Vec<f64>> {
        match self {
            Self::Empty => None,
            Self::Point(p) => Some(p.clone()),
            Self::Segment { a, b } => Some(project_segment(&zeros(a.len()), a, b).1),
            Self::Ball { center, radius } => {
                let c = norm(center);
                if c <= *radius {
                    Some(zeros(center.len()))
                } else {
                    Some(scale(center, (c - radius) / c))
                }
            }
        }
    }

    pub fn min_norm(&self) -> Option<f64> {
        self.min_norm_element().map(|p| norm(&p))
    }

    pub fn max_norm(&self) -> Option<f64> {
        match self {
            Self::Empty => None,
            Self::Point(p) => Some(norm(p)),
            Self::Segment { a, b } => Some(norm(a).max(norm(b))),
            Self::Ball { center, radius } => Some(norm(center) + radius),
        }
    }

    /// Euclidean distance from `p` to the set, `+infinity` if empty.
    pub fn distance(&self, p: &[f64]) -> f64 {
        match self {
            Self::Empty => f64::INFINITY,
            Self::Point(q) => dist(p, q),
            Self::Segment { a, b } => project_segment(p, a, b).0,
            Self::Ball { center, radius } => (dist(p, center) - radius).max(0.0),
        }
    }
}

/// Radial profile kinds. `Samples` holds values on a uniform 1D grid.
#[derive(Debug, Clone, PartialEq)]
pub enum DatumKind {
    /// `max(1 - |x|, 0)`
    Cone,
    Zero,
    Constant(f64),
    /// `|x|`
    Abs,
    Samples {
        xmin: f64,
        dx: f64,
        values: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialDatum {
    kind: DatumKind,
    dimension: usize,
    lipschitz: f64,
}

/// Range of `|p|` over the subgradients of a point set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientStats {
    /// `+infinity` when every subgradient set in the ball is empty.
    pub inf_norm: f64,
    pub sup_norm: f64,
    pub radius_used: f64,
    pub delta: f64,
    pub all_empty: bool,
}

/// Constant subgradient norms for `|x|` in an interval of radii.
#[derive(Debug, Clone, Copy, PartialEq)]
struct RadialPiece {
    lo: f64,
    hi: f64,
    lo_closed: bool,
    hi_closed: bool,
    min_norm: f64,
    max_norm: f64,
}

impl RadialPiece {
    fn closed(lo: f64, hi: f64, min_norm: f64, max_norm: f64) -> Self {
        Self {
            lo,
            hi,
            lo_closed: true,
            hi_closed: true,
            min_norm,
            max_norm,
        }
    }

    fn open(lo: f64, hi: f64, min_norm: f64, max_norm: f64) -> Self {
        Self {
            lo,
            hi,
            lo_closed: false,
            hi_closed: false,
            min_norm,
            max_norm,
        }
    }

    fn meets(&self, lo: f64, lo_closed: bool, hi: f64, hi_closed: bool) -> bool {
        let (a, a_closed) = if self.lo > lo || (self.lo == lo && !self.lo_closed) {
            (self.lo, self.lo_closed)
        } else {
            (lo, lo_closed)
        };
        let (b, b_closed) = if self.hi < hi || (self.hi == hi && !self.hi_closed) {
            (self.hi, self.hi_closed)
        } else {
            (hi, hi_closed)
        };
        a < b || (a == b && a_closed && b_closed)
    }
}

impl InitialDatum {
    fn radial(kind: DatumKind, dimension: usize, lipschitz: f64) -> Self {
        Self {
            kind,
            dimension: dimension.max(1),
            lipschitz,
        }
    }

    /// The tent `max(1 - |x|, 0)`.
    pub fn cone(dimension: usize) -> Self {
        Self::radial(DatumKind::Cone, dimension, 1.0)
    }

    pub fn zero(dimension: usize) -> Self {
        Self::radial(DatumKind::Zero, dimension, 0.0)
    }

    pub fn constant(dimension: usize, k: f64) -> Self {
        Self::radial(DatumKind::Constant(k), dimension, 0.0)
    }

    pub fn abs(dimension: usize) -> Self {
        Self::radial(DatumKind::Abs, dimension, 1.0)
    }

    /// Values on the uniform grid `xmin + i dx`, linearly interpolated and
    /// extended by constants outside the grid.
    pub fn samples(xmin: f64, dx: f64, values: Vec<f64>) -> Result<Self, DatumError> {
        if values.len() < 2 || !(dx > 0.0) || values.iter().any(|v| !v.is_finite()) {
            return Err(DatumError::BadSamples);
        }
        let lipschitz = values
            .windows(2)
            .map(|w| ((w[1] - w[0]) / dx).abs())
            .fold(0.0, f64::max);
        Ok(Self {
            kind: DatumKind::Samples { xmin, dx, values },
            dimension: 1,
            lipschitz,
        })
    }

    /// Resolves a config kind name (`cone`, `zero`, `constant`, `abs`).
    pub fn from_name(name: &str, dimension: usize, param: Option<f64>) -> Result<Self, DatumError> {
        match name {
            "cone" => Ok(Self::cone(dimension)),
            "zero" => Ok(Self::zero(dimension)),
            "constant" => Ok(Self::constant(dimension, param.unwrap_or(0.0))),
            "abs" => Ok(Self::abs(dimension)),
            other => Err(DatumError::UnknownKind(other.to_string())),
        }
    }

    pub fn kind(&self) -> &DatumKind {
        &self.kind
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn is_radial(&self) -> bool {
        !matches!(self.kind, DatumKind::Samples { .. })
    }

    /// Radial profile `f(rho)` for analytic data.
    pub fn profile(&self, rho: f64) -> f64 {
        match &self.kind {
            DatumKind::Cone => (1.0 - rho).max(0.0),
            DatumKind::Zero => 0.0,
            DatumKind::Constant(k) => *k,
            DatumKind::Abs => rho,
            DatumKind::Samples { .. } => self.eval(&[rho]),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match &self.kind {
            DatumKind::Samples { xmin, dx, values } => {
                let s = (x[0] - xmin) / dx;
                let last = values.len() - 1;
                if s <= 0.0 {
                    values[0]
                } else if s >= last as f64 {
                    values[last]
                } else {
                    let i = (s.floor() as usize).min(last - 1);
                    let w = s - i as f64;
                    values[i] * (1.0 - w) + values[i + 1] * w
                }
            }
            _ => self.profile(norm(x)),
        }
    }

    /// Exact `D^- u0(x)`.
    pub fn subgradient_set(&self, x: &[f64]) -> SubgradientSet {
        let n = x.len();
        let r = norm(x);
        let unit = |s: f64| -> Vec<f64> { x.iter().map(|v| s * v / r).collect() };
        match &self.kind {
            DatumKind::Zero | DatumKind::Constant(_) => SubgradientSet::Point(zeros(n)),
            DatumKind::Cone => {
                if r == 0.0 {
                    SubgradientSet::Empty
                } else if r < 1.0 {
                    SubgradientSet::Point(unit(-1.0))
                } else if r == 1.0 {
                    SubgradientSet::Segment {
                        a: zeros(n),
                        b: unit(-1.0),
                    }
                } else {
                    SubgradientSet::Point(zeros(n))
                }
            }
            DatumKind::Abs => {
                if r == 0.0 {
                    SubgradientSet::Ball {
                        center: zeros(n),
                        radius: 1.0,
                    }
                } else {
                    SubgradientSet::Point(unit(1.0))
                }
            }
            DatumKind::Samples { xmin, dx, values } => {
                let s = (x[0] - xmin) / dx;
                let last = values.len() - 1;
                let node = s.round();
                if (s - node).abs() < 1e-9 && node >= 0.0 && node <= last as f64 {
                    let i = node as usize;
                    let left = if i == 0 {
                        0.0
                    } else {
                        (values[i] - values[i - 1]) / dx
                    };
                    let right = if i == last {
                        0.0
                    } else {
                        (values[i + 1] - values[i]) / dx
                    };
                    interval_set(left, right, slope_tol(left, right))
                } else if s < 0.0 || s > last as f64 {
                    SubgradientSet::Point(vec![0.0])
                } else {
                    let i = (s.floor() as usize).min(last - 1);
                    SubgradientSet::Point(vec![(values[i + 1] - values[i]) / dx])
                }
            }
        }
    }

    fn radial_pieces(&self) -> Vec<RadialPiece> {
        let inf = f64::INFINITY;
        match &self.kind {
            DatumKind::Cone => vec![
                RadialPiece::open(0.0, 1.0, 1.0, 1.0),
                RadialPiece::closed(1.0, 1.0, 0.0, 1.0),
                RadialPiece {
                    lo: 1.0,
                    hi: inf,
                    lo_closed: false,
                    hi_closed: false,
                    min_norm: 0.0,
                    max_norm: 0.0,
                },
            ],
            DatumKind::Zero | DatumKind::Constant(_) => vec![RadialPiece {
                lo: 0.0,
                hi: inf,
                lo_closed: true,
                hi_closed: false,
                min_norm: 0.0,
                max_norm: 0.0,
            }],
            DatumKind::Abs => vec![
                RadialPiece::closed(0.0, 0.0, 0.0, 1.0),
                RadialPiece {
                    lo: 0.0,
                    hi: inf,
                    lo_closed: false,
                    hi_closed: false,
                    min_norm: 1.0,
                    max_norm: 1.0,
                },
            ],
            DatumKind::Samples { .. } => Vec::new(),
        }
    }

    /// Folds `(min |p|, max |p|)` over the ball of the given radius around
    /// `center`, open or closed. `None` if every set in the ball is empty.
    fn norm_range(&self, center: &[f64], radius: f64, closed: bool) -> Option<(f64, f64)> {
        if let DatumKind::Samples { xmin, dx, values } = &self.kind {
            return sampled_norm_range(*xmin, *dx, values, center[0], radius, closed);
        }
        let c = norm(center);
        // Radii |y| realised by points of the ball.
        let (lo, lo_closed) = if c >= radius {
            (c - radius, closed)
        } else {
            (0.0, true)
        };
        let (hi, hi_closed) = (c + radius, closed);
        if !closed && radius == 0.0 {
            return None;
        }
        let mut out: Option<(f64, f64)> = None;
        for piece in self.radial_pieces() {
            if piece.meets(lo, lo_closed, hi, hi_closed) {
                out = Some(match out {
                    None => (piece.min_norm, piece.max_norm),
                    Some((a, b)) => (a.min(piece.min_norm), b.max(piece.max_norm)),
                });
            }
        }
        out
    }

    /// Largest `theta` with `|p| >= theta` for every subgradient at every
    /// point of the open ball `B_r(x0)`; `None` when that is 0.
    pub fn theta_on_ball(&self, x0: &[f64], r: f64) -> Option<f64> {
        match self.norm_range(x0, r, false) {
            Some((inf, _)) if inf > 0.0 => Some(inf),
            _ => None,
        }
    }

    /// Inf and sup of `|p|` over subgradients at points of the closed ball of
    /// radius `radius + delta`.
    pub fn gradient_stats_on_ball(&self, center: &[f64], radius: f64, delta: f64) -> GradientStats {
        let total = radius.max(0.0) + delta.max(0.0);
        match self.norm_range(center, total, true) {
            Some((inf, sup)) => GradientStats {
                inf_norm: inf,
                sup_norm: sup,
                radius_used: radius,
                delta,
                all_empty: false,
            },
            None => GradientStats {
                inf_norm: f64::INFINITY,
                sup_norm: 0.0,
                radius_used: radius,
                delta,
                all_empty: true,
            },
        }
    }
}

/// Rounding allowance for one-sided slopes of sampled data.
fn slope_tol(left: f64, right: f64) -> f64 {
    1e-9 * (1.0 + left.abs() + right.abs())
}

fn interval_set(left: f64, right: f64, tol: f64) -> SubgradientSet {
    if left == right {
        SubgradientSet::Point(vec![left])
    } else if left <= right {
        SubgradientSet::Segment {
            a: vec![left],
            b: vec![right],
        }
    } else if left <= right + tol {
        SubgradientSet::Point(vec![0.5 * (left + right)])
    } else {
        SubgradientSet::Empty
    }
}

fn sampled_norm_range(
    xmin: f64,
    dx: f64,
    values: &[f64],
    center: f64,
    radius: f64,
    closed: bool,
) -> Option<(f64, f64)> {
    let last = values.len() - 1;
    let inside = |y: f64| {
        let d = (y - center).abs();
        if closed {
            d <= radius
        } else {
            d < radius
        }
    };
    let mut out: Option<(f64, f64)> = None;
    let mut push = |a: f64, b: f64| {
        out = Some(match out {
            None => (a, b),
            Some((x, y)) => (x.min(a), y.max(b)),
        })
    };
    let (a, b) = (center - radius, center + radius);
    if a < xmin {
        push(0.0, 0.0);
    }
    if b > xmin + last as f64 * dx {
        push(0.0, 0.0);
    }
    for i in 0..=last {
        let y = xmin + i as f64 * dx;
        let left = if i == 0 {
            0.0
        } else {
            (values[i] - values[i - 1]) / dx
        };
        let right = if i == last {
            0.0
        } else {
            (values[i + 1] - values[i]) / dx
        };
        if inside(y) {
            let set = interval_set(left, right, slope_tol(left, right));
            if let (Some(lo), Some(hi)) = (set.min_norm(), set.max_norm()) {
                push(lo, hi);
            }
        }
        // Cell interior (y, y + dx) meets the ball.
        if i < last && y < b && y + dx > a {
            let s = right.abs();
            push(s, s);
        }
    }
    out
}

pub fn make_cone_datum(dimension: usize) -> InitialDatum {
    InitialDatum::cone(dimension)
}

/// One-sided-slope subgradient of sampled values at an interior index.
///
/// `[sL, sR]` when `sL <= sR`; slopes crossing by at most `tol` collapse to
/// their mean; otherwise empty.
pub fn numeric_subgradient_1d(
    values: &[f64],
    dx: f64,
    index: usize,
    tol: f64,
) -> Result<SubgradientSet, DatumError> {
    if index == 0 || index + 1 >= values.len() {
        return Err(DatumError::BoundaryIndex(index));
    }
    let left = (values[index] - values[index - 1]) / dx;
    let right = (values[index + 1] - values[index]) / dx;
    Ok(interval_set(left, right, tol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn cone_subgradient_table() {
        let u0 = InitialDatum::cone(1);
        assert_eq!(
            u0.subgradient_set(&[0.5]),
            SubgradientSet::Point(vec![-1.0])
        );
        assert_eq!(
            u0.subgradient_set(&[-0.5]),
            SubgradientSet::Point(vec![1.0])
        );
        assert_eq!(u0.subgradient_set(&[0.0]), SubgradientSet::Empty);
        assert_eq!(u0.subgradient_set(&[2.0]), SubgradientSet::Point(vec![0.0]));
        let rim = u0.subgradient_set(&[1.0]);
        assert_eq!((rim.min_norm(), rim.max_norm()), (Some(0.0), Some(1.0)));
        assert_eq!(u0.eval(&[0.25]), 0.75);
        assert_eq!(u0.eval(&[0.6, 0.8]), 0.0);
    }

    #[test]
    fn theta_examples() {
        let u0 = InitialDatum::cone(1);
        assert_eq!(u0.theta_on_ball(&[0.0], 0.9), Some(1.0));
        assert_eq!(u0.theta_on_ball(&[0.0], 1.0), Some(1.0));
        assert_eq!(u0.theta_on_ball(&[0.0], 1.5), None);
        assert_eq!(InitialDatum::zero(1).theta_on_ball(&[0.0], 1.0), None);
        assert_eq!(
            InitialDatum::cone(3).theta_on_ball(&[0.2, 0.0, 0.1], 0.5),
            Some(1.0)
        );
    }

    #[test]
    fn gradient_stats_examples() {
        let u0 = InitialDatum::cone(1);
        let s = u0.gradient_stats_on_ball(&[0.0], 0.5, 0.0);
        assert_eq!((s.inf_norm, s.sup_norm), (1.0, 1.0));
        let s = u0.gradient_stats_on_ball(&[0.0], 1.2, 0.0);
        assert_eq!((s.inf_norm, s.sup_norm), (0.0, 1.0));
        let s = InitialDatum::zero(2).gradient_stats_on_ball(&[0.0, 1.0], 0.3, 0.0);
        assert_eq!((s.inf_norm, s.sup_norm), (0.0, 0.0));
        // Apex only: every subgradient set is empty.
        let s = u0.gradient_stats_on_ball(&[0.0], 0.0, 0.0);
        assert!(s.all_empty && s.inf_norm == f64::INFINITY && s.sup_norm == 0.0);
        // Closed ball touching the rim picks up the zero subgradient.
        let s = u0.gradient_stats_on_ball(&[0.5], 0.5, 0.0);
        assert_eq!(s.inf_norm, 0.0);
        let s = u0.gradient_stats_on_ball(&[0.5], 0.4, 0.1);
        assert_eq!(s.inf_norm, 0.0);
    }

    #[test]
    fn abs_datum_has_ball_at_origin() {
        let u0 = InitialDatum::abs(2);
        let set = u0.subgradient_set(&[0.0, 0.0]);
        assert_eq!(set.min_norm(), Some(0.0));
        assert_eq!(set.distance(&[3.0, 4.0]), 4.0);
        assert_eq!(u0.theta_on_ball(&[2.0, 0.0], 1.0), Some(1.0));
        assert_eq!(u0.theta_on_ball(&[0.5, 0.0], 1.0), None);
    }

    #[test]
    fn numeric_subgradient_examples() {
        let dx = 1e-3;
        let xs: Vec<f64> = (0..=2000).map(|i| -1.0 + i as f64 * dx).collect();
        let tent: Vec<f64> = xs.iter().map(|&x| (1.0 - x.abs()).max(0.0)).collect();
        let at_half = numeric_subgradient_1d(&tent, dx, 1500, 1e-9).unwrap();
        assert!((at_half.min_norm_element().unwrap()[0] + 1.0).abs() < 1e-9);
        assert_eq!(
            numeric_subgradient_1d(&tent, dx, 1000, 0.0).unwrap(),
            SubgradientSet::Empty
        );
        let sq: Vec<f64> = xs.iter().map(|&x| x * x).collect();
        let at_zero = numeric_subgradient_1d(&sq, dx, 1000, 0.0).unwrap();
        assert!(at_zero.min_norm().unwrap() <= dx);
        assert_eq!(
            numeric_subgradient_1d(&tent, dx, 0, 0.0),
            Err(DatumError::BoundaryIndex(0))
        );
        assert_eq!(
            numeric_subgradient_1d(&tent, dx, 2000, 0.0),
            Err(DatumError::BoundaryIndex(2000))
        );
    }

    #[test]
    fn numeric_matches_table_away_from_kinks() {
        let dx = 1e-3;
        let u0 = InitialDatum::cone(1);
        let xs: Vec<f64> = (0..=4000).map(|i| -2.0 + i as f64 * dx).collect();
        let vals: Vec<f64> = xs.iter().map(|&x| u0.eval(&[x])).collect();
        for (i, &x) in xs.iter().enumerate().take(xs.len() - 1).skip(1) {
            if [0.0f64, -1.0, 1.0]
                .iter()
                .any(|k| (x - k).abs() <= 2.0 * dx)
            {
                continue;
            }
            let numeric = numeric_subgradient_1d(&vals, dx, i, 1e-9).unwrap();
            let exact = u0.subgradient_set(&[x]).min_norm_element().unwrap();
            assert!(numeric.distance(&exact) <= dx, "x = {x}");
        }
    }

    #[test]
    fn sampled_datum_matches_cone() {
        let dx = 0.01;
        let values: Vec<f64> = (0..=400)
            .map(|i| (1.0 - (-2.0 + i as f64 * dx).abs()).max(0.0))
            .collect();
        let u0 = InitialDatum::samples(-2.0, dx, values).unwrap();
        assert!((u0.eval(&[0.255]) - 0.745).abs() < 1e-12);
        assert!((u0.lipschitz() - 1.0).abs() < 1e-9);
        assert!(u0.subgradient_set(&[0.0]).is_empty());
        let s = u0.gradient_stats_on_ball(&[0.0], 0.5, 0.0);
        assert!((s.inf_norm - 1.0).abs() < 1e-9 && (s.sup_norm - 1.0).abs() < 1e-9);
        let s = u0.gradient_stats_on_ball(&[0.0], 1.2, 0.0);
        assert!(s.inf_norm.abs() < 1e-9);
        assert!(InitialDatum::samples(0.0, 0.1, vec![1.0]).is_err());
    }

    proptest! {
        #[test]
        fn stats_monotone_in_radius_and_delta(
            c in -2.0f64..2.0, r1 in 0.0f64..1.5, dr in 0.0f64..1.0, d1 in 0.0f64..0.3, dd in 0.0f64..0.3,
            which in 0usize..3,
        ) {
            let u0 = [InitialDatum::cone(1), InitialDatum::abs(1), InitialDatum::constant(1, 2.0)][which].clone();
            let small = u0.gradient_stats_on_ball(&[c], r1, d1);
            let big_r = u0.gradient_stats_on_ball(&[c], r1 + dr, d1);
            let big_d = u0.gradient_stats_on_ball(&[c], r1, d1 + dd);
            for big in [big_r, big_d] {
                prop_assert!(big.inf_norm <= small.inf_norm);
                prop_assert!(big.sup_norm >= small.sup_norm);
                if !big.all_empty {
                    prop_assert!(big.inf_norm <= big.sup_norm && big.sup_norm <= u0.lipschitz());
                }
            }
        }

        #[test]
        fn theta_agrees_with_open_ball_scan(c in -1.0f64..1.0, r in 0.05f64..1.5) {
            // Dense scan of the open interval (c - r, c + r).
            let u0 = InitialDatum::cone(1);
            let mut inf = f64::INFINITY;
            for k in 1..20000 {
                let y = c - r + 2.0 * r * k as f64 / 20000.0;
                if let Some(m) = u0.subgradient_set(&[y]).min_norm() {
                    inf = inf.min(m);
                }
            }
            // The rim |y| = 1 is hit by the scan only by accident; account for it.
            if (c - r) < 1.0 && (c + r) > 1.0 || (c - r) < -1.0 && (c + r) > -1.0 {
                inf = inf.min(0.0);
            }
            let theta = u0.theta_on_ball(&[c], r);
            match theta {
                Some(t) => prop_assert_eq!(t, inf),
                None => prop_assert!(inf == 0.0 || inf == f64::INFINITY),
            }
        }
    }
}
