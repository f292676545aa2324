//! Closed-form gradient estimates, dependence domains and vanish times.
//!
//! Bound values are returned raw, including negative values of the
//! exponential-type bounds; callers clamp for display.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hamiltonians::StructuralConstants;
use crate::initial_data::GradientStats;
use crate::numeric::bisect;
use crate::vector::{dist, norm};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundsError {
    #[error("time must be nonnegative, got {0}")]
    NegativeTime(f64),
    #[error("theta must be positive, got {0}")]
    NonpositiveTheta(f64),
    #[error("t0 = {t0} exceeds the horizon {horizon}")]
    CutoffBeyondHorizon { t0: f64, horizon: f64 },
    #[error("the constants carry no lambda")]
    MissingLambda,
    #[error("radius must be positive, got {0}")]
    NonpositiveRadius(f64),
    #[error("no sign change of the radicand in [0, {0}]")]
    NoSignChange(f64),
}

pub type Result<T> = std::result::Result<T, BoundsError>;

/// Everything the scalar bounds depend on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub constants: StructuralConstants,
    pub theta: f64,
    pub horizon: f64,
    #[serde(default)]
    pub t0: Option<f64>,
}

impl BoundInputs {
    pub fn new(
        constants: StructuralConstants,
        theta: f64,
        horizon: f64,
        t0: Option<f64>,
    ) -> Result<Self> {
        if !(theta > 0.0) {
            return Err(BoundsError::NonpositiveTheta(theta));
        }
        if let Some(t0) = t0 {
            if t0 > horizon {
                return Err(BoundsError::CutoffBeyondHorizon { t0, horizon });
            }
        }
        Ok(Self {
            constants,
            theta,
            horizon,
            t0,
        })
    }

    /// `(beta/2 + 2) C1 + 2 K3`, the decay rate inside `l` and the sharpened bound.
    fn l_rate(&self) -> f64 {
        let c = &self.constants;
        (0.5 * c.beta + 2.0) * c.c1 + 2.0 * c.k3
    }

    fn l_radicand(&self, t: f64) -> f64 {
        let c = &self.constants;
        self.theta * self.theta * (-self.l_rate() * t).exp() - 2.0 * c.c1 * c.beta * t
    }
}

fn check_time(t: f64) -> Result<()> {
    if t >= 0.0 {
        Ok(())
    } else {
        Err(BoundsError::NegativeTime(t))
    }
}

/// `R(x, t)`: how far back the initial data can influence `(x, t)`.
pub fn radius_r(constants: &StructuralConstants, x: &[f64], t: f64) -> Result<f64> {
    radius_with(constants.a2, constants.b2, x, t)
}

/// `R` for the mollified Hamiltonian, with `B2` raised to `B2 + eps`.
pub fn radius_r_eps(constants: &StructuralConstants, eps: f64, x: &[f64], t: f64) -> Result<f64> {
    radius_with(constants.a2, constants.b2 + eps, x, t)
}

fn radius_with(a2: f64, b2: f64, x: &[f64], t: f64) -> Result<f64> {
    check_time(t)?;
    if t == 0.0 {
        return Ok(0.0);
    }
    Ok(if a2 > 0.0 {
        (b2 / a2 + norm(x)) * (a2 * t).exp_m1()
    } else {
        b2 * t
    })
}

/// A ball `B_r(x0)` of initial data and the space-time sets it controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DependenceDomain {
    pub x0: Vec<f64>,
    pub r: f64,
    pub constants: StructuralConstants,
}

impl DependenceDomain {
    pub fn new(x0: Vec<f64>, r: f64, constants: StructuralConstants) -> Result<Self> {
        if !(r > 0.0) {
            return Err(BoundsError::NonpositiveRadius(r));
        }
        Ok(Self { x0, r, constants })
    }

    /// `R(x, t) + |x - x0| < r`.
    pub fn in_e(&self, x: &[f64], t: f64) -> Result<bool> {
        Ok(radius_r(&self.constants, x, t)? + dist(x, &self.x0) < self.r)
    }

    /// `e^{(A2 + B2 + A2 |x0|) t} (1 + |x - x0|) < r + 1`, together with `|x - x0| < r`.
    pub fn in_d(&self, x: &[f64], t: f64) -> Result<bool> {
        check_time(t)?;
        let c = &self.constants;
        let d = dist(x, &self.x0);
        let rate = c.a2 + c.b2 + c.a2 * norm(&self.x0);
        Ok(d < self.r && (rate * t).exp() * (1.0 + d) < self.r + 1.0)
    }
}

/// `l(t) = sqrt(theta^2 e^{-((beta/2+2) C1 + 2 K3) t} - 2 C1 beta t)`, or `None`
/// once the radicand is negative.
pub fn lower_l(inputs: &BoundInputs, t: f64) -> Result<Option<f64>> {
    check_time(t)?;
    if inputs.constants.is_degenerate() {
        return Ok(Some(inputs.theta));
    }
    let rad = inputs.l_radicand(t);
    Ok(if rad >= 0.0 { Some(rad.sqrt()) } else { None })
}

/// `L(t) = theta e^{-(C1+K3) t} - (C1 beta / (C1+K3)) (1 - e^{-(C1+K3) t})`.
pub fn lower_big_l(inputs: &BoundInputs, t: f64) -> Result<f64> {
    check_time(t)?;
    let c = &inputs.constants;
    if c.is_degenerate() {
        return Ok(inputs.theta);
    }
    let k = c.c1 + c.k3;
    let decay = (-k * t).exp();
    Ok(inputs.theta * decay + c.drift_ratio() * (-k * t).exp_m1())
}

/// The estimate for `u`-independent Hamiltonians with cutoff time `t0`:
/// `e^{-5 C1 t / 4} sqrt(theta^2 - 2 beta C1 e^{5 C1 T / 2} t0)`.
pub fn lower_ley(inputs: &BoundInputs, t: f64, t0: f64) -> Result<Option<f64>> {
    check_time(t)?;
    check_time(t0)?;
    let c = &inputs.constants;
    let rad = inputs.theta * inputs.theta
        - 2.0 * c.beta * c.c1 * (2.5 * c.c1 * inputs.horizon).exp() * t0;
    if rad <= 0.0 {
        return Ok(None);
    }
    Ok(Some((-1.25 * c.c1 * t).exp() * rad.sqrt()))
}

/// The variant of `l` with the time integral evaluated exactly:
/// `sqrt(theta^2 e^{-a t} - (4 beta C1 / ((beta+4) C1 + 4 K3)) (1 - e^{-a t}))`.
pub fn lower_sharpened(inputs: &BoundInputs, t: f64) -> Result<Option<f64>> {
    check_time(t)?;
    let c = &inputs.constants;
    if c.is_degenerate() {
        return Ok(Some(inputs.theta));
    }
    let a = inputs.l_rate();
    let coef = 4.0 * c.beta * c.c1 / ((c.beta + 4.0) * c.c1 + 4.0 * c.k3);
    let rad = inputs.theta * inputs.theta * (-a * t).exp() + coef * (-a * t).exp_m1();
    Ok(if rad >= 0.0 { Some(rad.sqrt()) } else { None })
}

/// Two-sided estimate from the inf/sup of initial gradients over `B_{R(x,t)}(x)`.
pub fn two_sided(
    stats: &GradientStats,
    constants: &StructuralConstants,
    t: f64,
) -> Result<(f64, f64)> {
    check_time(t)?;
    if constants.is_degenerate() {
        return Ok((stats.inf_norm, stats.sup_norm));
    }
    let k = constants.c1 + constants.k3;
    let d = constants.drift_ratio();
    let lower = stats.inf_norm * (-k * t).exp() + d * (-k * t).exp_m1();
    let upper = stats.sup_norm * (k * t).exp() + d * (k * t).exp_m1();
    Ok((lower, upper))
}

fn lambda_of(c: &StructuralConstants) -> Result<f64> {
    c.lambda.ok_or(BoundsError::MissingLambda)
}

/// `M(t)` for `H = lambda u + H0`; with `theta` replaced by the inf of initial
/// gradients this is the bound for that class.
pub fn special_big_m(inputs: &BoundInputs, t: f64) -> Result<f64> {
    check_time(t)?;
    let c = &inputs.constants;
    let lambda = lambda_of(c)?;
    let k = c.c1 + lambda;
    if k == 0.0 {
        return Ok(inputs.theta - c.c1 * c.beta * t);
    }
    Ok(inputs.theta * (-k * t).exp() + (c.c1 * c.beta / k) * (-k * t).exp_m1())
}

/// `m(t) = theta e^{-(C1+lambda) t} - beta (e^{-lambda t} - e^{-(C1+lambda) t})`.
pub fn special_m(inputs: &BoundInputs, t: f64) -> Result<f64> {
    check_time(t)?;
    let c = &inputs.constants;
    let lambda = lambda_of(c)?;
    let e = (-(c.c1 + lambda) * t).exp();
    Ok(inputs.theta * e - c.beta * ((-lambda * t).exp() - e))
}

/// First zero of `L`, in closed form. `None` unless `C1 beta > 0`.
pub fn vanish_time_big_l(inputs: &BoundInputs) -> Option<f64> {
    let c = &inputs.constants;
    if c.c1 * c.beta <= 0.0 {
        return None;
    }
    let k = c.c1 + c.k3;
    Some((inputs.theta * k / (c.c1 * c.beta)).ln_1p() / k)
}

/// Upper end of the bisection bracket for `t_l`.
pub fn vanish_bracket(inputs: &BoundInputs) -> f64 {
    let c = &inputs.constants;
    (10.0 / (c.c1 + c.k3 + 1.0)).min(1e3)
}

/// First zero of `l`, found by bisection on its radicand.
///
/// The returned time lies on the side where the radicand is still
/// nonnegative, so `l(t_l)` is defined and tiny.
pub fn vanish_time_l(inputs: &BoundInputs) -> Result<Option<f64>> {
    let c = &inputs.constants;
    if c.c1 * c.beta <= 0.0 {
        return Ok(None);
    }
    let hi = vanish_bracket(inputs);
    bisect(|t| inputs.l_radicand(t), 0.0, hi)
        .map(Some)
        .ok_or(BoundsError::NoSignChange(hi))
}

/// `F(t) = L(t)^2 - l(t)^2`, computed as `(L - l)(L + l)`. `None` where `l` is
/// undefined.
pub fn compare_f(inputs: &BoundInputs, t: f64) -> Result<Option<f64>> {
    let big = lower_big_l(inputs, t)?;
    Ok(lower_l(inputs, t)?.map(|small| (big - small) * (big + small)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn consts(c1: f64, beta: f64, a2: f64, b2: f64, k3: f64) -> StructuralConstants {
        StructuralConstants::new(c1, beta, a2, b2, k3, None).unwrap()
    }

    fn inputs(theta: f64, c1: f64, k3: f64, beta: f64) -> BoundInputs {
        BoundInputs::new(consts(c1, beta, 0.0, 0.0, k3), theta, 1.0, None).unwrap()
    }

    #[test]
    fn radius_examples() {
        let c = consts(0.0, 0.0, 0.0, 1.0, 0.0);
        assert_eq!(radius_r(&c, &[3.0], 0.5).unwrap(), 0.5);
        let c = consts(1.0, 0.0, 1.0, 0.0, 1.0);
        assert!((radius_r(&c, &[1.0], 2f64.ln()).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(radius_r(&c, &[5.0], 0.0).unwrap(), 0.0);
        assert!(radius_r(&c, &[0.0], -1.0).is_err());

        let c = consts(0.0, 0.0, 0.0, 1.0, 0.0);
        assert_eq!(radius_r_eps(&c, 0.5, &[0.0], 1.0).unwrap(), 1.5);
        assert_eq!(
            radius_r_eps(&c, 0.0, &[0.7], 0.3).unwrap(),
            radius_r(&c, &[0.7], 0.3).unwrap()
        );
        let c = consts(0.0, 0.0, 1.0, 0.0, 0.0);
        assert!((radius_r_eps(&c, 1.0, &[0.0], 2f64.ln()).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn domain_examples() {
        let transport =
            DependenceDomain::new(vec![0.0], 1.0, consts(1.0, 0.0, 1.0, 0.0, 1.0)).unwrap();
        assert!(transport.in_e(&[0.5], 0.5).unwrap());
        assert!(!transport.in_e(&[0.7], 0.5).unwrap());
        let eik = DependenceDomain::new(vec![0.0], 1.0, consts(0.0, 0.0, 0.0, 1.0, 1.0)).unwrap();
        assert!(!eik.in_e(&[0.5], 0.6).unwrap());
        assert!(eik.in_e(&[0.5], 0.4).unwrap());
        assert!(eik.in_e(&[0.99], 0.0).unwrap());

        assert!(transport.in_d(&[0.3], 0.2).unwrap());
        assert!(transport.in_e(&[0.3], 0.2).unwrap());
        assert!(transport.in_d(&[0.0], 0.0).unwrap());
        assert!(DependenceDomain::new(vec![0.0], 0.0, consts(0.0, 0.0, 0.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn l_examples() {
        let i = inputs(1.0, 1.0, 0.0, 1.0);
        assert_eq!(lower_l(&i, 0.0).unwrap(), Some(1.0));
        let want = ((-0.25f64).exp() - 0.2).sqrt();
        assert!((lower_l(&i, 0.1).unwrap().unwrap() - want).abs() < 1e-15);
        assert!((want - 0.76079).abs() < 1e-5);
        let i0 = inputs(1.5, 0.7, 0.3, 0.0);
        for t in [0.1, 0.5, 2.0] {
            let l = lower_l(&i0, t).unwrap().unwrap();
            assert!((l - 1.5 * (-t).exp()).abs() < 1e-14);
        }
        assert_eq!(lower_l(&i, 5.0).unwrap(), None);
    }

    #[test]
    fn big_l_examples() {
        let i = inputs(1.0, 1.0, 0.0, 1.0);
        assert_eq!(lower_big_l(&i, 0.0).unwrap(), 1.0);
        let want = 2.0 * (-0.1f64).exp() - 1.0;
        assert!((lower_big_l(&i, 0.1).unwrap() - want).abs() < 1e-15);
        let transport = inputs(1.0, 1.0, 1.0, 0.0);
        for t in [0.1, 0.3, 1.0] {
            assert!((lower_big_l(&transport, t).unwrap() - (-2.0 * t).exp()).abs() < 1e-15);
        }
        assert_eq!(lower_big_l(&inputs(0.8, 0.0, 0.0, 1.0), 3.0).unwrap(), 0.8);
    }

    #[test]
    fn ley_examples() {
        let i = BoundInputs::new(consts(1.0, 0.0, 0.0, 0.0, 0.0), 1.0, 0.1, None).unwrap();
        assert!((lower_ley(&i, 0.05, 0.05).unwrap().unwrap() - (-0.0625f64).exp()).abs() < 1e-15);
        let i = BoundInputs::new(consts(0.0, 1.0, 0.0, 0.0, 0.0), 2.0, 0.1, None).unwrap();
        assert_eq!(lower_ley(&i, 0.05, 0.05).unwrap(), Some(2.0));
        let i = BoundInputs::new(consts(1.0, 1.0, 0.0, 0.0, 0.0), 1.0, 0.1, None).unwrap();
        let want = (-0.0625f64).exp() * (1.0 - 0.1 * 0.25f64.exp()).sqrt();
        let got = lower_ley(&i, 0.05, 0.05).unwrap().unwrap();
        assert!((got - want).abs() < 1e-15);
        assert!((got - 0.87703).abs() < 1e-5);
    }

    #[test]
    fn sharpened_examples() {
        let i = inputs(1.0, 1.0, 0.0, 1.0);
        assert_eq!(lower_sharpened(&i, 0.0).unwrap(), Some(1.0));
        let e = (-0.25f64).exp();
        let rad = e - 0.8 * (1.0 - e);
        assert!((rad - 0.60184).abs() < 1e-5);
        let got = lower_sharpened(&i, 0.1).unwrap().unwrap();
        assert!((got - rad.sqrt()).abs() < 1e-15);
        assert!(got >= lower_l(&i, 0.1).unwrap().unwrap());
        let i0 = inputs(1.0, 2.0, 0.5, 0.0);
        assert_eq!(
            lower_sharpened(&i0, 0.4).unwrap(),
            lower_l(&i0, 0.4).unwrap()
        );
    }

    #[test]
    fn two_sided_examples() {
        let stats = GradientStats {
            inf_norm: 0.5,
            sup_norm: 2.0,
            radius_used: 0.0,
            delta: 0.0,
            all_empty: false,
        };
        assert_eq!(
            two_sided(&stats, &consts(0.0, 1.0, 0.0, 0.0, 0.0), 0.7).unwrap(),
            (0.5, 2.0)
        );
        let unit = GradientStats {
            inf_norm: 1.0,
            sup_norm: 1.0,
            ..stats
        };
        let (lo, hi) = two_sided(&unit, &consts(1.0, 0.0, 0.0, 0.0, 1.0), 0.3).unwrap();
        assert!((lo - (-0.6f64).exp()).abs() < 1e-15 && (hi - 0.6f64.exp()).abs() < 1e-15);
        let (lo, _) = two_sided(&unit, &consts(1.0, 1.0, 0.0, 0.0, 0.0), 0.1).unwrap();
        assert!((lo - (2.0 * (-0.1f64).exp() - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn special_examples() {
        let c = StructuralConstants::new(1.0, 1.0, 0.0, 0.0, 1.0, Some(-1.0)).unwrap();
        let i = BoundInputs::new(c, 1.0, 1.0, None).unwrap();
        assert_eq!(special_big_m(&i, 0.0).unwrap(), 1.0);
        assert_eq!(special_m(&i, 0.0).unwrap(), 1.0);
        let big = special_big_m(&i, 0.2).unwrap();
        let small = special_m(&i, 0.2).unwrap();
        assert!((big - 0.8).abs() < 1e-15);
        assert!((small - (2.0 - 0.2f64.exp())).abs() < 1e-15);
        assert!((small - 0.77860).abs() < 1e-5 && big > small);

        let c = StructuralConstants::new(2.0, 0.0, 0.0, 0.0, 0.5, Some(0.5)).unwrap();
        let i = BoundInputs::new(c, 1.3, 1.0, None).unwrap();
        let want = 1.3 * (-2.5f64 * 0.4).exp();
        assert!((special_big_m(&i, 0.4).unwrap() - want).abs() < 1e-15);
        assert!((special_m(&i, 0.4).unwrap() - want).abs() < 1e-15);
        assert_eq!(
            special_m(&inputs(1.0, 1.0, 0.0, 1.0), 0.1),
            Err(BoundsError::MissingLambda)
        );
    }

    #[test]
    fn vanish_time_examples() {
        let i = inputs(1.0, 1.0, 0.0, 1.0);
        assert!((vanish_time_big_l(&i).unwrap() - 2f64.ln()).abs() < 1e-15);
        let tl = vanish_time_l(&i).unwrap().unwrap();
        // Independent oracle: Newton on e^{-2.5 t} - 2 t.
        let mut s: f64 = 0.25;
        for _ in 0..50 {
            let g = (-2.5 * s).exp() - 2.0 * s;
            let dg = -2.5 * (-2.5 * s).exp() - 2.0;
            s -= g / dg;
        }
        assert!((tl - s).abs() < 1e-12);
        assert!((tl - 0.2606).abs() < 1e-4);
        assert!(lower_l(&i, tl).unwrap().unwrap() <= 1e-6);
        assert_eq!(vanish_time_l(&inputs(1.0, 1.0, 0.0, 0.0)).unwrap(), None);
        assert_eq!(vanish_time_big_l(&inputs(1.0, 1.0, 0.0, 0.0)), None);
        assert_eq!(vanish_time_l(&inputs(1.0, 0.0, 1.0, 1.0)).unwrap(), None);
    }

    #[test]
    fn compare_f_example() {
        let i = inputs(1.0, 1.0, 0.0, 1.0);
        let big = 2.0 * (-0.1f64).exp() - 1.0;
        let small2 = (-0.25f64).exp() - 0.2;
        let f = compare_f(&i, 0.1).unwrap().unwrap();
        assert!((f - (big * big - small2)).abs() < 1e-14);
        assert!((f - 0.076773).abs() < 1e-6);
        assert_eq!(compare_f(&i, 0.0).unwrap(), Some(0.0));
    }

    #[test]
    fn theorem_grid_f_positive() {
        for theta in [0.5, 1.0, 2.0] {
            for c1 in [0.1, 1.0, 10.0] {
                for k3 in [0.0, 0.1, 1.0, 10.0] {
                    let i = inputs(theta, c1, k3, 1.0);
                    let tl = vanish_time_l(&i).unwrap().unwrap();
                    for k in 1..=200 {
                        let t = if k == 200 { tl } else { tl * k as f64 / 200.0 };
                        let f = compare_f(&i, t).unwrap().unwrap();
                        assert!(f > 0.0, "theta {theta} c1 {c1} k3 {k3} t {t}: F = {f}");
                    }
                }
            }
        }
    }

    proptest! {
        #[test]
        fn sharpened_dominates_l(theta in 0.1f64..3.0, c1 in 0.0f64..5.0, k3 in 0.0f64..5.0, beta in 0usize..2, t in 0.0f64..3.0) {
            let i = inputs(theta, c1, k3, beta as f64);
            if let (Some(l), Some(s)) = (lower_l(&i, t).unwrap(), lower_sharpened(&i, t).unwrap()) {
                prop_assert!(s >= l - 1e-14);
            }
        }

        #[test]
        fn l_equals_big_l_without_beta(theta in 0.1f64..3.0, c1 in 0.0f64..5.0, k3 in 0.0f64..5.0, t in 0.0f64..3.0) {
            let i = inputs(theta, c1, k3, 0.0);
            let l = lower_l(&i, t).unwrap().unwrap();
            prop_assert!((l - lower_big_l(&i, t).unwrap()).abs() <= 1e-12);
        }

        #[test]
        fn big_l_decays_and_r_grows(
            theta in 0.1f64..3.0, c1 in 0.0f64..5.0, k3 in 0.0f64..5.0, beta in 0usize..2,
            a2 in 0.0f64..3.0, b2 in 0.0f64..3.0, x in -3.0f64..3.0, t in 0.0f64..2.0, dt in 0.0f64..1.0,
        ) {
            let i = inputs(theta, c1, k3, beta as f64);
            prop_assert!(lower_big_l(&i, t + dt).unwrap() <= lower_big_l(&i, t).unwrap() + 1e-15);
            let c = consts(c1, beta as f64, a2, b2, k3);
            prop_assert!(radius_r(&c, &[x], t + dt).unwrap() >= radius_r(&c, &[x], t).unwrap());
        }

        #[test]
        fn d_inside_e(a2 in 0.0f64..3.0, b2 in 0.0f64..3.0, x0 in -2.0f64..2.0, r in 0.1f64..3.0, x in -5.0f64..5.0, t in 0.0f64..2.0) {
            let dom = DependenceDomain::new(vec![x0], r, consts(0.0, 0.0, a2, b2, 0.0)).unwrap();
            if dom.in_d(&[x], t).unwrap() {
                prop_assert!(dom.in_e(&[x], t).unwrap());
            }
        }

        #[test]
        fn big_l_vanishes_at_t_big_l(theta in 0.1f64..3.0, c1 in 0.05f64..5.0, k3 in 0.0f64..5.0) {
            let i = inputs(theta, c1, k3, 1.0);
            let t = vanish_time_big_l(&i).unwrap();
            prop_assert!(lower_big_l(&i, t).unwrap().abs() <= 1e-10);
        }
    }
}
