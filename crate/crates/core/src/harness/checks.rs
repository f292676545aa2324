//! The individual checks a scenario can request.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{Mode, ScenarioConfig};
use super::report::{num, opt, Plot, Table};
use super::{CheckOutcome, HarnessError};
use crate::bounds::{
    compare_f, lower_big_l, lower_l, lower_ley, lower_sharpened, radius_r, special_big_m,
    special_m, vanish_time_l, BoundInputs, DependenceDomain,
};
use crate::characteristics::{
    check_propagation, check_spatial, check_special_propagation, endpoint_subgradient_residual,
    integrate_backward, integrate_forward, CharacteristicPath, CheckReport, TerminalCondition,
};
use crate::convolution::{
    boundary_margin, check_initial_gap, comparison_rhs, gamma_min, inf_convolution_spatial,
    subsolution_residual, ConvolutionParams, FieldBlock, FieldSlice,
};
use crate::hamiltonians::{BuiltinHamiltonian, BuiltinKind, Hamiltonian, StructuralConstants};
use crate::herglotz::{dpp_check, random_feasible_curve, value_function_with, HerglotzOptions};
use crate::initial_data::InitialDatum;
use crate::numeric::golden_min;
use crate::solver::{
    error_norms, measured_subgradient, oracle_subgradient, solve_with_checkpoints,
    ClosedFormOracle, GridSpec, NumericalSolution, OracleKind, ORACLE_STEP,
};
use crate::vector::norm;

/// Slope tolerance when reading subgradients off oracle or scheme values.
const SLOPE_TOL: f64 = 1e-7;

fn oracle_of(config: &ScenarioConfig) -> Result<Option<ClosedFormOracle>, HarnessError> {
    let kind = config.kind()?;
    Ok(OracleKind::from_builtin(kind)
        .ok()
        .map(|k| ClosedFormOracle::new(k, config.initial_datum().expect("validated"))))
}

fn one_dimensional(config: &ScenarioConfig, name: &str) -> Option<CheckOutcome> {
    (config.hamiltonian.dimension != 1)
        .then(|| CheckOutcome::skipped(name, "check runs on 1D configurations only"))
}

/// `theta` from the config, else the least subgradient norm of the datum on the ball.
pub fn theta_for(config: &ScenarioConfig) -> Result<f64, HarnessError> {
    if let Some(t) = config.domain.theta {
        return Ok(t);
    }
    let datum = config.initial_datum()?;
    datum
        .theta_on_ball(&config.x0(), config.domain.r)
        .ok_or(HarnessError::ThetaUnavailable)
}

fn line_points(center: f64, half: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|i| {
            if i + 1 == count {
                center + half
            } else {
                center - half + 2.0 * half * i as f64 / (count - 1) as f64
            }
        })
        .collect()
}

fn solve_for(
    config: &ScenarioConfig,
    grid: &GridSpec,
    times: &[f64],
) -> Result<NumericalSolution, HarnessError> {
    let model = config.model()?;
    let datum = config.initial_datum()?;
    solve_with_checkpoints(&model, &datum, grid, times)
        .map_err(|e| HarnessError::Numerics(e.to_string()))
}

fn extended_grid(config: &ScenarioConfig, times: &[f64]) -> GridSpec {
    let mut g = config.grid;
    g.t_end = times.iter().copied().fold(g.t_end, f64::max);
    g
}

fn interpolate(sol: &NumericalSolution, level: usize, x: f64) -> f64 {
    let g = &sol.grid;
    let s = ((x - g.xmin) / g.dx()).clamp(0.0, g.cells as f64);
    let i = (s.floor() as usize).min(g.cells - 1);
    let w = s - i as f64;
    let v = &sol.values[level];
    v[i] * (1.0 - w) + v[i + 1] * w
}

// ---------------------------------------------------------------- profiles

pub fn profiles(config: &ScenarioConfig) -> Result<CheckOutcome, HarnessError> {
    if let Some(s) = one_dimensional(config, "profiles") {
        return Ok(s);
    }
    let times = if config.verify.profile_times.is_empty() {
        vec![0.0, config.grid.t_end]
    } else {
        config.verify.profile_times.clone()
    };
    if times.iter().any(|&t| t > config.grid.t_end) {
        return Err(HarnessError::Config(
            "profile times must not exceed grid.t_end".into(),
        ));
    }
    let sol = match solve_for(config, &config.grid, &times) {
        Ok(s) => s,
        Err(HarnessError::Numerics(m)) => return Ok(CheckOutcome::failed("profiles", m)),
        Err(e) => return Err(e),
    };
    let g = &sol.grid;
    let mut header = vec!["t".to_string()];
    header.extend((0..=g.cells).map(|i| format!("u_{i}")));
    let mut table = Table {
        name: "solution".into(),
        metadata: vec![
            format!("hamiltonian={}", config.kind()?),
            format!("datum={}", config.datum.kind),
            format!("xmin={}", num(g.xmin)),
            format!("xmax={}", num(g.xmax)),
            format!("cells={}", g.cells),
            format!(
                "times={}",
                times.iter().map(|t| num(*t)).collect::<Vec<_>>().join(" ")
            ),
        ],
        header,
        rows: Vec::new(),
    };
    let mut plot = Plot::new("profiles", "solution profiles", "x", "u");
    let oracle = oracle_of(config)?;
    let mut errors = Table::new("profile_errors", &["t", "l1", "linf"]);
    for &t in &times {
        let slice = sol
            .slice(t)
            .map_err(|e| HarnessError::Numerics(e.to_string()))?;
        let mut row = vec![num(t)];
        row.extend(slice.iter().map(|v| num(*v)));
        table.push(row);
        let stride = (g.cells / 600).max(1);
        plot.add(
            &format!("t = {}", num(t)),
            (0..=g.cells)
                .step_by(stride)
                .map(|i| (g.x(i), slice[i]))
                .collect(),
        );
        if let Some(o) = &oracle {
            let (l1, linf) = error_norms(&sol, o, t, kink_cells(g))
                .map_err(|e| HarnessError::Numerics(e.to_string()))?;
            errors.push(vec![num(t), num(l1), num(linf)]);
        }
    }
    let mut out = CheckOutcome::passed(
        "profiles",
        format!("{} levels, dt {}", times.len(), num(sol.dt)),
    );
    out.tables.push(table);
    if oracle.is_some() {
        out.tables.push(errors);
    }
    out.plots.push(plot);
    Ok(out)
}

/// Cells excluded around kinks in max-norm errors: a fixed width of 0.2.
fn kink_cells(g: &GridSpec) -> usize {
    (0.2 / g.dx()).ceil() as usize
}

// ---------------------------------------------------------------- lower bounds

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationRow {
    pub x: f64,
    pub t: f64,
    pub p_min_measured: Option<f64>,
    pub bound_l: Option<f64>,
    pub bound_big_l: f64,
    pub bound_sharpened: Option<f64>,
    pub bound_special: Option<f64>,
    pub in_e: bool,
    pub in_d: bool,
    pub pass: bool,
}

impl VerificationRow {
    /// `max(0, every defined bound)`.
    pub fn applicable_bound(&self) -> f64 {
        [
            self.bound_l,
            Some(self.bound_big_l),
            self.bound_sharpened,
            self.bound_special,
        ]
        .into_iter()
        .flatten()
        .fold(0.0, f64::max)
    }

    pub fn slack(&self) -> Option<f64> {
        self.p_min_measured.map(|p| p - self.applicable_bound())
    }
}

/// Measured min-norm subgradients against every lower bound on a grid of
/// `B_r(x0)` at the configured times.
pub fn verify_lower_bound(config: &ScenarioConfig) -> Result<Vec<VerificationRow>, HarnessError> {
    let model = config.model()?;
    let datum = config.initial_datum()?;
    let constants = model.constants();
    let theta = theta_for(config)?;
    let times = &config.verify.times;
    let horizon = times.iter().copied().fold(0.0, f64::max);
    let inputs = BoundInputs::new(constants, theta, horizon, None)
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    let domain = DependenceDomain::new(config.x0(), config.domain.r, constants)
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    let tol = config.verify.tolerance();
    let scheme = match config.verify.mode {
        Mode::Scheme => Some(solve_for(config, &extended_grid(config, times), times)?),
        Mode::Oracle => None,
    };
    let oracle = match config.verify.mode {
        Mode::Oracle => Some(oracle_of(config)?.ok_or_else(|| {
            HarnessError::Config(format!(
                "no closed-form solution for `{}`; use verify.mode = \"scheme\"",
                config.hamiltonian.kind
            ))
        })?),
        Mode::Scheme => None,
    };
    let xs = line_points(config.domain.x0, config.domain.r, config.verify.points);
    let numerics = |e: &dyn std::fmt::Display| HarnessError::Numerics(e.to_string());
    let mut rows = Vec::new();
    for &t in times {
        for &x in &xs {
            let in_e = domain.in_e(&[x], t).map_err(|e| numerics(&e))?;
            let in_d = domain.in_d(&[x], t).map_err(|e| numerics(&e))?;
            let p_min = match (&oracle, &scheme) {
                (Some(o), _) => oracle_subgradient(o, x, t, ORACLE_STEP, SLOPE_TOL).min_norm(),
                (None, Some(sol)) => {
                    let g = &sol.grid;
                    let node = g.xmin + ((x - g.xmin) / g.dx()).round() * g.dx();
                    measured_subgradient(sol, node, t, SLOPE_TOL)
                        .ok()
                        .and_then(|s| s.min_norm())
                }
                _ => unreachable!(),
            };
            let bound_special = match constants.lambda {
                Some(_) => {
                    let reach = radius_r(&constants, &[x], t).map_err(|e| numerics(&e))?;
                    let local = datum.gradient_stats_on_ball(&[x], reach, 0.0).inf_norm;
                    if local.is_finite() && local > 0.0 {
                        let li = BoundInputs {
                            theta: local,
                            ..inputs
                        };
                        Some(special_big_m(&li, t).map_err(|e| numerics(&e))?)
                    } else {
                        None
                    }
                }
                None => None,
            };
            let mut row = VerificationRow {
                x,
                t,
                p_min_measured: p_min,
                bound_l: lower_l(&inputs, t).map_err(|e| numerics(&e))?,
                bound_big_l: lower_big_l(&inputs, t).map_err(|e| numerics(&e))?,
                bound_sharpened: lower_sharpened(&inputs, t).map_err(|e| numerics(&e))?,
                bound_special,
                in_e,
                in_d,
                pass: true,
            };
            if in_e {
                if let Some(p) = p_min {
                    row.pass = p >= row.applicable_bound() - tol;
                }
            }
            rows.push(row);
        }
    }
    Ok(rows)
}

/// `L >= l` and `sharpened >= l` wherever all are defined.
fn dominance_holds(row: &VerificationRow) -> bool {
    match (row.bound_l, row.bound_sharpened) {
        (Some(l), Some(s)) => row.bound_big_l >= l - 1e-12 && s >= l - 1e-12,
        (Some(l), None) => row.bound_big_l >= l - 1e-12,
        _ => true,
    }
}

pub fn lower_bound(config: &ScenarioConfig) -> Result<CheckOutcome, HarnessError> {
    if let Some(s) = one_dimensional(config, "lower_bound") {
        return Ok(s);
    }
    let rows = match verify_lower_bound(config) {
        Ok(r) => r,
        Err(HarnessError::ThetaUnavailable) => {
            return Ok(CheckOutcome::skipped(
                "lower_bound",
                "the datum has no positive lower gradient bound on the ball; set domain.theta",
            ))
        }
        Err(HarnessError::Numerics(m)) => return Ok(CheckOutcome::failed("lower_bound", m)),
        Err(e) => return Err(e),
    };
    let mut table = Table::new(
        "verification",
        &[
            "x",
            "t",
            "p_min_measured",
            "bound_l",
            "bound_L",
            "bound_sharpened",
            "bound_special",
            "in_E",
            "in_D",
            "pass",
        ],
    );
    let check_dominance = config.model()?.constants().beta == 1.0;
    let mut failures = 0;
    let mut dominance_failures = 0;
    let mut checked = 0;
    let mut min_slack = f64::INFINITY;
    for r in &rows {
        table.push(vec![
            num(r.x),
            num(r.t),
            opt(r.p_min_measured),
            opt(r.bound_l),
            num(r.bound_big_l),
            opt(r.bound_sharpened),
            opt(r.bound_special),
            r.in_e.to_string(),
            r.in_d.to_string(),
            r.pass.to_string(),
        ]);
        if !r.pass {
            failures += 1;
        }
        if check_dominance && !dominance_holds(r) {
            dominance_failures += 1;
        }
        if r.in_e {
            if let Some(s) = r.slack() {
                checked += 1;
                min_slack = min_slack.min(s);
            }
        }
    }
    let mut plot = Plot::new("lower_bound", "lower bounds and measured |p|", "t", "|p|");
    let mut times: Vec<f64> = rows.iter().map(|r| r.t).collect();
    times.dedup();
    let at = |t: f64, f: &dyn Fn(&VerificationRow) -> Option<f64>| -> Option<f64> {
        rows.iter()
            .filter(|r| r.t == t && r.in_e)
            .filter_map(f)
            .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.min(v))))
    };
    for (label, f) in [
        (
            "measured min |p|",
            &(|r: &VerificationRow| r.p_min_measured) as &dyn Fn(&VerificationRow) -> Option<f64>,
        ),
        ("L", &|r: &VerificationRow| Some(r.bound_big_l)),
        ("l", &|r: &VerificationRow| r.bound_l),
        ("sharpened", &|r: &VerificationRow| r.bound_sharpened),
    ] {
        plot.add(
            label,
            times
                .iter()
                .filter_map(|&t| at(t, f).map(|v| (t, v.max(0.0))))
                .collect(),
        );
    }
    let summary = format!(
        "{checked} points in E checked, {failures} below bound, min slack {}, dominance failures {dominance_failures}",
        num(min_slack)
    );
    let mut out = if failures == 0 && dominance_failures == 0 && checked > 0 {
        CheckOutcome::passed("lower_bound", summary)
    } else {
        CheckOutcome::failed("lower_bound", summary)
    };
    out.tables.push(table);
    out.plots.push(plot);
    Ok(out)
}

// ---------------------------------------------------------------- bound tables

pub fn bound_table(config: &ScenarioConfig) -> Result<CheckOutcome, HarnessError> {
    let constants = config.bound_constants()?;
    let theta = match theta_for(config) {
        Ok(t) => t,
        Err(HarnessError::ThetaUnavailable) => {
            return Ok(CheckOutcome::skipped(
                "bound_table",
                "no theta available; set domain.theta",
            ))
        }
        Err(e) => return Err(e),
    };
    let horizon = config.bounds.horizon.unwrap_or(config.grid.t_end);
    let t0 = config.bounds.t0.unwrap_or(horizon);
    let inputs = BoundInputs::new(constants, theta, horizon, Some(t0))
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    let numerics = |e: crate::bounds::BoundsError| HarnessError::Numerics(e.to_string());
    let mut table = Table::new(
        "bounds",
        &["t", "l", "L", "sharpened", "ley", "M", "m", "F"],
    );
    table.metadata = vec![
        format!("theta={}", num(theta)),
        format!(
            "c1={} beta={} k3={} lambda={}",
            num(constants.c1),
            num(constants.beta),
            num(constants.k3),
            opt(constants.lambda)
        ),
    ];
    let n = config.bounds.samples.max(1);
    let mut bad = 0;
    let mut plot = Plot::new("bounds", "gradient lower bounds", "t", "bound");
    let mut curves: [Vec<(f64, f64)>; 3] = Default::default();
    for k in 0..=n {
        let t = if k == n {
            horizon
        } else {
            horizon * k as f64 / n as f64
        };
        let l = lower_l(&inputs, t).map_err(numerics)?;
        let big = lower_big_l(&inputs, t).map_err(numerics)?;
        let sharp = lower_sharpened(&inputs, t).map_err(numerics)?;
        let ley = if t <= t0 {
            lower_ley(&inputs, t, t0).map_err(numerics)?
        } else {
            None
        };
        let (m_big, m_small) = if constants.lambda.is_some() {
            (
                Some(special_big_m(&inputs, t).map_err(numerics)?),
                Some(special_m(&inputs, t).map_err(numerics)?),
            )
        } else {
            (None, None)
        };
        let f = compare_f(&inputs, t).map_err(numerics)?;
        if t > 0.0 && (f.is_some_and(|f| f < -1e-12) || l.is_some_and(|l| big < l - 1e-12)) {
            bad += 1;
        }
        table.push(vec![
            num(t),
            opt(l),
            num(big),
            opt(sharp),
            opt(ley),
            opt(m_big),
            opt(m_small),
            opt(f),
        ]);
        if let Some(l) = l {
            curves[0].push((t, l));
        }
        curves[1].push((t, big.max(0.0)));
        if let Some(s) = sharp {
            curves[2].push((t, s));
        }
    }
    for (label, pts) in ["l", "L", "sharpened"].iter().zip(curves) {
        plot.add(label, pts);
    }
    let summary = format!(
        "{} samples on [0, {}], {bad} with F < 0 or L < l",
        n + 1,
        num(horizon)
    );
    let mut out = if bad == 0 {
        CheckOutcome::passed("bound_table", summary)
    } else {
        CheckOutcome::failed("bound_table", summary)
    };
    out.tables.push(table);
    out.plots.push(plot);
    Ok(out)
}

/// Parameter grid for the `F > 0` sweep.
pub const SWEEP_THETA: [f64; 3] = [0.5, 1.0, 2.0];
pub const SWEEP_C1: [f64; 3] = [0.1, 1.0, 10.0];
pub const SWEEP_K3: [f64; 4] = [0.0, 0.1, 1.0, 10.0];

pub fn f_sweep(_config: &ScenarioConfig) -> Result<CheckOutcome, HarnessError> {
    let numerics = |e: crate::bounds::BoundsError| HarnessError::Numerics(e.to_string());
    let mut table = Table::new(
        "f_sweep",
        &["theta", "c1", "k3", "t_l", "min_F", "positive", "samples"],
    );
    let mut beta0 = Table::new(
        "beta_zero",
        &["theta", "c1", "k3", "max_abs_l_minus_L", "start_error"],
    );
    let mut failures = 0;
    for theta in SWEEP_THETA {
        for c1 in SWEEP_C1 {
            for k3 in SWEEP_K3 {
                let c = StructuralConstants::new(c1, 1.0, 0.0, 0.0, k3, None)
                    .map_err(|e| HarnessError::Numerics(e.to_string()))?;
                let inputs = BoundInputs::new(c, theta, 1.0, None).map_err(numerics)?;
                let tl = vanish_time_l(&inputs)
                    .map_err(numerics)?
                    .expect("beta C1 > 0");
                let mut min_f = f64::INFINITY;
                let mut positive = 0;
                for k in 1..=200 {
                    let t = if k == 200 { tl } else { tl * k as f64 / 200.0 };
                    let f = compare_f(&inputs, t).map_err(numerics)?.unwrap_or(f64::NAN);
                    min_f = min_f.min(f);
                    if f > 0.0 {
                        positive += 1;
                    }
                }
                if positive != 200 {
                    failures += 1;
                }
                table.push(vec![
                    num(theta),
                    num(c1),
                    num(k3),
                    num(tl),
                    num(min_f),
                    positive.to_string(),
                    "200".into(),
                ]);

                let c0 = StructuralConstants { beta: 0.0, ..c };
                let i0 = BoundInputs::new(c0, theta, 1.0, None).map_err(numerics)?;
                let mut worst: f64 = 0.0;
                for k in 0..=200 {
                    let t = k as f64 / 200.0;
                    let l = lower_l(&i0, t).map_err(numerics)?.unwrap_or(f64::NAN);
                    let big = lower_big_l(&i0, t).map_err(numerics)?;
                    worst = worst.max((l - big).abs());
                }
                let start = (lower_l(&inputs, 0.0).map_err(numerics)?.unwrap_or(f64::NAN) - theta)
                    .abs()
                    .max((lower_big_l(&inputs, 0.0).map_err(numerics)? - theta).abs());
                if !(worst <= 1e-12) || !(start <= 4.0 * f64::EPSILON * theta) {
                    failures += 1;
                }
                beta0.push(vec![num(theta), num(c1), num(k3), num(worst), num(start)]);
            }
        }
    }
    let summary = format!("36 parameter sets, {failures} failing");
    let mut out = if failures == 0 {
        CheckOutcome::passed("f_sweep", summary)
    } else {
        CheckOutcome::failed("f_sweep", summary)
    };
    out.tables.push(table);
    out.tables.push(beta0);
    Ok(out)
}

// ---------------------------------------------------------------- characteristics

/// Random point of `B_r(x0)`.
fn ball_point(rng: &mut ChaCha8Rng, x0: &[f64], r: f64) -> Vec<f64> {
    let n = x0.len();
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        if norm(&v) < 1.0 {
            return x0.iter().zip(&v).map(|(a, b)| a + r * b).collect();
        }
    }
}

fn run_path_checks(path: &CharacteristicPath, constants: &StructuralConstants) -> CheckReport {
    let mut report = check_propagation(path, constants);
    if constants.b2.is_finite() {
        report.checks.extend(check_spatial(path, constants).checks);
    }
    if let Ok(special) = check_special_propagation(path, constants) {
        report.checks.extend(special.checks);
    }
    report
}

/// Integrated characteristics: backward from random points of `E(x0, r)` with
/// the closed-form gradient when one exists, forward from the datum otherwise.
pub fn characteristic_paths(
    config: &ScenarioConfig,
) -> Result<Vec<CharacteristicPath>, HarnessError> {
    let model = config.model()?;
    let datum = config.initial_datum()?;
    let constants = model.constants();
    let cc = &config.characteristics;
    let x0 = config.x0();
    let domain = DependenceDomain::new(x0.clone(), config.domain.r, constants)
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    let oracle = oracle_of(config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cc.seed);
    let mut paths = Vec::with_capacity(cc.paths);
    let mut attempts = 0;
    while paths.len() < cc.paths {
        attempts += 1;
        if attempts > 1000 * cc.paths.max(1) {
            return Err(HarnessError::Numerics(
                "could not sample admissible characteristic end points".into(),
            ));
        }
        let path = match &oracle {
            Some(o) if config.hamiltonian.dimension == 1 => {
                let t = rng.gen_range(0.0..cc.t) + 1e-3 * cc.t;
                let x = ball_point(&mut rng, &x0, config.domain.r);
                if !domain.in_e(&x, t).unwrap_or(false) {
                    continue;
                }
                let Some(p) =
                    oracle_subgradient(o, x[0], t, ORACLE_STEP, SLOPE_TOL).min_norm_element()
                else {
                    continue;
                };
                if norm(&p) == 0.0 {
                    continue;
                }
                let terminal = TerminalCondition {
                    u: o.eval(&x, t),
                    x,
                    t,
                    p,
                };
                integrate_backward(&model, &terminal, cc.steps)
            }
            _ => {
                let xi0 = ball_point(&mut rng, &x0, config.domain.r);
                let Some(eta0) = datum.subgradient_set(&xi0).min_norm_element() else {
                    continue;
                };
                if norm(&eta0) == 0.0 {
                    continue;
                }
                integrate_forward(&model, &xi0, &eta0, datum.eval(&xi0), cc.t, cc.steps)
            }
        };
        match path {
            Ok(p) => paths.push(p),
            Err(crate::characteristics::CharacteristicsError::Singular { .. }) => continue,
            Err(e) => return Err(HarnessError::Numerics(e.to_string())),
        }
    }
    Ok(paths)
}

pub fn characteristics(config: &ScenarioConfig) -> Result<CheckOutcome, HarnessError> {
    let model = config.model()?;
    let datum = config.initial_datum()?;
    let constants = model.constants();
    let paths = match characteristic_paths(config) {
        Ok(p) => p,
        Err(HarnessError::Numerics(m)) => return Ok(CheckOutcome::failed("characteristics", m)),
        Err(e) => return Err(e),
    };
    let n = config.hamiltonian.dimension;
    let mut summary_table = Table::new(
        "characteristic_checks",
        &[
            "path",
            "t",
            "xi_t_norm",
            "eta_0_norm",
            "eta_t_norm",
            "endpoint_residual",
            "min_slack",
            "failed",
            "pass",
        ],
    );
    let mut failures = 0;
    let mut worst_slack = f64::INFINITY;
    for (k, path) in paths.iter().enumerate() {
        let report = run_path_checks(path, &constants);
        let residual = endpoint_subgradient_residual(path, &datum);
        let min_slack = report
            .checks
            .iter()
            .map(|c| c.slack())
            .fold(f64::INFINITY, f64::min);
        worst_slack = worst_slack.min(min_slack);
        let failed: Vec<&str> = report
            .checks
            .iter()
            .filter(|c| !c.pass)
            .map(|c| c.name)
            .collect();
        let pass = report.pass() && residual <= 1e-6;
        if !pass {
            failures += 1;
        }
        let (xi_t, eta_t, _) = path.end();
        let (_, eta_0, _) = path.start();
        summary_table.push(vec![
            k.to_string(),
            num(path.final_time()),
            num(norm(xi_t)),
            num(norm(eta_0)),
            num(norm(eta_t)),
            num(residual),
            num(min_slack),
            failed.join(" "),
            pass.to_string(),
        ]);
    }
    let mut header: Vec<String> = vec!["s".into()];
    for prefix in ["xi", "eta"] {
        if n == 1 {
            header.push(prefix.into());
        } else {
            header.extend((1..=n).map(|i| format!("{prefix}_{i}")));
        }
    }
    header.push("u_xi".into());
    let mut path_table = Table {
        name: "characteristic".into(),
        metadata: vec![format!("hamiltonian={}", config.kind()?), "path=0".into()],
        header,
        rows: Vec::new(),
    };
    if let Some(p) = paths.first() {
        for i in 0..p.times.len() {
            let mut row = vec![num(p.times[i])];
            row.extend(p.xi[i].iter().map(|v| num(*v)));
            row.extend(p.eta[i].iter().map(|v| num(*v)));
            row.push(num(p.u_xi[i]));
            path_table.push(row);
        }
    }
    let mut plot = Plot::new("characteristic", "characteristic 0", "s", "value");
    if let Some(p) = paths.first() {
        plot.add(
            "xi_1",
            p.times.iter().zip(&p.xi).map(|(s, x)| (*s, x[0])).collect(),
        );
        plot.add(
            "eta_1",
            p.times
                .iter()
                .zip(&p.eta)
                .map(|(s, e)| (*s, e[0]))
                .collect(),
        );
        plot.add(
            "u_xi",
            p.times
                .iter()
                .copied()
                .zip(p.u_xi.iter().copied())
                .collect(),
        );
    }
    let summary = format!(
        "{} paths, {failures} failing, least slack {}",
        paths.len(),
        num(worst_slack)
    );
    let mut out = if failures == 0 {
        CheckOutcome::passed("characteristics", summary)
    } else {
        CheckOutcome::failed("characteristics", summary)
    };
    out.tables.push(summary_table);
    out.tables.push(path_table);
    out.plots.push(plot);
    Ok(out)
}

// ---------------------------------------------------------------- convolutions

pub fn initial_gap(config: &ScenarioConfig) -> Result<CheckOutcome, HarnessError> {
    if let Some(s) = one_dimensional(config, "initial_gap") {
        return Ok(s);
    }
    let datum = config.initial_datum()?;
    let theta = match theta_for(config) {
        Ok(t) => t,
        Err(HarnessError::ThetaUnavailable) => {
            return Ok(CheckOutcome::skipped(
                "initial_gap",
                "no theta available on the ball",
            ))
        }
        Err(e) => return Err(e),
    };
    let mut table = Table::new(
        "initial_gap",
        &["epsilon", "max_gap", "bound", "margin", "points", "pass"],
    );
    let mut failures = 0;
    for &eps in &config.convolution.epsilons {
        let rep = check_initial_gap(
            &datum,
            Some(theta),
            eps,
            config.domain.x0,
            config.domain.r,
            config.convolution.cells,
        )
        .map_err(|e| HarnessError::Config(e.to_string()))?;
        if !rep.pass {
            failures += 1;
        }
        table.push(vec![
            num(eps),
            num(rep.max_gap),
            num(rep.bound),
            num(rep.margin),
            rep.points.to_string(),
            rep.pass.to_string(),
        ]);
    }
    let summary = format!(
        "{} epsilons, {failures} failing",
        config.convolution.epsilons.len()
    );
    let mut out = if failures == 0 {
        CheckOutcome::passed("initial_gap", summary)
    } else {
        CheckOutcome::failed("initial_gap", summary)
    };
    out.tables.push(table);
    Ok(out)
}

/// The solution on the ball grid at uniform levels, from the oracle or the scheme.
pub fn ball_field(config: &ScenarioConfig) -> Result<FieldBlock, HarnessError> {
    let cc = &config.convolution;
    let (a, b) = (
        config.domain.x0 - config.domain.r,
        config.domain.x0 + config.domain.r,
    );
    let times: Vec<f64> = (0..cc.levels)
        .map(|k| {
            if k + 1 == cc.levels {
                cc.t_end
            } else {
                cc.t_end * k as f64 / (cc.levels - 1) as f64
            }
        })
        .collect();
    match config.verify.mode {
        Mode::Oracle => {
            let o = oracle_of(config)?.ok_or_else(|| {
                HarnessError::Config(format!(
                    "no closed-form solution for `{}`",
                    config.hamiltonian.kind
                ))
            })?;
            Ok(FieldBlock::sample(a, b, cc.cells, &times, |x, t| {
                o.eval(&[x], t)
            }))
        }
        Mode::Scheme => {
            let sol = solve_for(config, &extended_grid(config, &times), &times)?;
            let slices = times
                .iter()
                .map(|&t| {
                    let level = sol.level_index(t).expect("checkpoint stored");
                    FieldSlice::sample(a, b, cc.cells, t, |x| interpolate(&sol, level, x))
                })
                .collect();
            Ok(FieldBlock { slices })
        }
    }
}

fn conv_params(
    config: &ScenarioConfig,
    constants: &StructuralConstants,
    eps: f64,
) -> ConvolutionParams {
    ConvolutionParams {
        epsilon: eps,
        alpha: None,
        gamma: gamma_min(constants),
        ball_center: config.domain.x0,
        ball_radius: config.domain.r,
    }
}

fn convolve_block(
    block: &FieldBlock,
    params: &ConvolutionParams,
) -> Result<FieldBlock, HarnessError> {
    let slices = block
        .slices
        .iter()
        .map(|s| inf_convolution_spatial(s, params).map(|c| c.field))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| HarnessError::Numerics(e.to_string()))?;
    Ok(FieldBlock { slices })
}

fn max_abs(block: &FieldBlock) -> f64 {
    block
        .slices
        .iter()
        .flat_map(|s| s.values.iter())
        .fold(0.0, |m, v| m.max(v.abs()))
}

pub fn residual(config: &ScenarioConfig) -> Result<CheckOutcome, HarnessError> {
    if let Some(s) = one_dimensional(config, "residual") {
        return Ok(s);
    }
    let model = config.model()?;
    let constants = model.constants();
    let field = match ball_field(config) {
        Ok(f) => f,
        Err(HarnessError::Numerics(m)) => return Ok(CheckOutcome::failed("residual", m)),
        Err(e) => return Err(e),
    };
    let mut table = Table::new(
        "residual",
        &[
            "epsilon",
            "gamma",
            "max_excess",
            "worst_x",
            "worst_t",
            "tolerance",
            "points",
            "pass",
        ],
    );
    let mut failures = 0;
    for &eps in &config.convolution.epsilons {
        let params = conv_params(config, &constants, eps);
        let ue = convolve_block(&field, &params)?;
        let margin = boundary_margin(max_abs(&field), params.gamma, config.convolution.t_end, eps);
        let rep = match subsolution_residual(&ue, &model, &params, margin) {
            Ok(r) => r,
            Err(e) => return Ok(CheckOutcome::failed("residual", e.to_string())),
        };
        if !rep.pass {
            failures += 1;
        }
        table.push(vec![
            num(eps),
            num(params.gamma),
            num(rep.max_excess),
            num(rep.worst.0),
            num(rep.worst.1),
            num(rep.tolerance),
            rep.points.to_string(),
            rep.pass.to_string(),
        ]);
    }
    let summary = format!(
        "{} epsilons, {failures} failing",
        config.convolution.epsilons.len()
    );
    let mut out = if failures == 0 {
        CheckOutcome::passed("residual", summary)
    } else {
        CheckOutcome::failed("residual", summary)
    };
    out.tables.push(table);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonPoint {
    pub x: f64,
    pub t: f64,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub epsilon: f64,
    pub points: Vec<ComparisonPoint>,
    /// `u_eps <= u` on the whole cylinder.
    pub ordered: bool,
    pub max_violation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Tolerances for the comparison estimate by measurement mode.
pub fn comparison_tolerance(mode: Mode) -> f64 {
    match mode {
        Mode::Oracle => 1e-6,
        Mode::Scheme => 5e-2,
    }
}

/// The comparison estimate for `(u_eps, u)` on the points of `E(x0, r)`.
pub fn verify_comparison(config: &ScenarioConfig) -> Result<Vec<ComparisonReport>, HarnessError> {
    let model = config.model()?;
    let constants = model.constants();
    let field = ball_field(config)?;
    let domain = DependenceDomain::new(config.x0(), config.domain.r, constants)
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    let tolerance = comparison_tolerance(config.verify.mode);
    let mut reports = Vec::new();
    for &eps in &config.convolution.epsilons {
        let params = conv_params(config, &constants, eps);
        let ue = convolve_block(&field, &params)?;
        let ordered = ue
            .slices
            .iter()
            .zip(&field.slices)
            .all(|(a, b)| a.values.iter().zip(&b.values).all(|(x, y)| *x <= y + 1e-12));
        let initial_sup = ue.slices[0]
            .values
            .iter()
            .zip(&field.slices[0].values)
            .map(|(a, b)| a - b)
            .fold(f64::NEG_INFINITY, f64::max);
        let mut points = Vec::new();
        let mut max_violation = f64::NEG_INFINITY;
        for (se, s) in ue.slices.iter().zip(&field.slices).skip(1) {
            let t = s.time;
            let rhs = comparison_rhs(&constants, &params, initial_sup, t);
            for i in 0..s.values.len() {
                let x = s.x(i);
                if !domain.in_e(&[x], t).unwrap_or(false) {
                    continue;
                }
                let lhs = se.values[i] - s.values[i];
                max_violation = max_violation.max(lhs - rhs);
                points.push(ComparisonPoint { x, t, lhs, rhs });
            }
        }
        reports.push(ComparisonReport {
            epsilon: eps,
            pass: ordered && !points.is_empty() && max_violation <= tolerance,
            points,
            ordered,
            max_violation,
            tolerance,
        });
    }
    Ok(reports)
}

pub fn comparison(config: &ScenarioConfig) -> Result<CheckOutcome, HarnessError> {
    if let Some(s) = one_dimensional(config, "comparison") {
        return Ok(s);
    }
    let reports = match verify_comparison(config) {
        Ok(r) => r,
        Err(HarnessError::Numerics(m)) => return Ok(CheckOutcome::failed("comparison", m)),
        Err(e) => return Err(e),
    };
    let mut table = Table::new(
        "comparison",
        &[
            "epsilon",
            "points",
            "ordered",
            "max_violation",
            "tolerance",
            "pass",
        ],
    );
    let mut detail = Table::new("comparison_points", &["epsilon", "x", "t", "lhs", "rhs"]);
    let stride = (config.convolution.cells / 120).max(1);
    for r in &reports {
        table.push(vec![
            num(r.epsilon),
            r.points.len().to_string(),
            r.ordered.to_string(),
            num(r.max_violation),
            num(r.tolerance),
            r.pass.to_string(),
        ]);
        for p in r.points.iter().step_by(stride) {
            detail.push(vec![
                num(r.epsilon),
                num(p.x),
                num(p.t),
                num(p.lhs),
                num(p.rhs),
            ]);
        }
    }
    let failures = reports.iter().filter(|r| !r.pass).count();
    let summary = format!("{} epsilons, {failures} failing", reports.len());
    let mut out = if failures == 0 {
        CheckOutcome::passed("comparison", summary)
    } else {
        CheckOutcome::failed("comparison", summary)
    };
    out.tables.push(table);
    out.tables.push(detail);
    Ok(out)
}

// ---------------------------------------------------------------- convergence

pub fn convergence(config: &ScenarioConfig) -> Result<CheckOutcome, HarnessError> {
    if let Some(s) = one_dimensional(config, "convergence") {
        return Ok(s);
    }
    let Some(oracle) = oracle_of(config)? else {
        return Ok(CheckOutcome::skipped(
            "convergence",
            "no closed-form solution to compare with",
        ));
    };
    let t = config.grid.t_end;
    let mut table = Table::new("convergence", &["cells", "dx", "t", "l1", "linf_interior"]);
    let mut l1s = Vec::new();
    for cells in [config.grid.cells / 2, config.grid.cells] {
        let grid = GridSpec {
            cells,
            ..config.grid
        };
        let sol = match solve_for(config, &grid, &[t]) {
            Ok(s) => s,
            Err(HarnessError::Numerics(m)) => return Ok(CheckOutcome::failed("convergence", m)),
            Err(e) => return Err(e),
        };
        let (l1, linf) = error_norms(&sol, &oracle, t, kink_cells(&grid))
            .map_err(|e| HarnessError::Numerics(e.to_string()))?;
        table.push(vec![
            cells.to_string(),
            num(grid.dx()),
            num(t),
            num(l1),
            num(linf),
        ]);
        l1s.push(l1);
    }
    let ratio = l1s[0] / l1s[1];
    let pass = l1s[1] <= 2e-2 && (1.5..=3.0).contains(&ratio);
    let summary = format!(
        "l1 {} at {} cells, ratio {}",
        num(l1s[1]),
        config.grid.cells,
        num(ratio)
    );
    let mut out = if pass {
        CheckOutcome::passed("convergence", summary)
    } else {
        CheckOutcome::failed("convergence", summary)
    };
    out.tables.push(table);
    Ok(out)
}

// ---------------------------------------------------------------- Herglotz

/// `min_y e^{-lambda t} (u0(y) + lambda |x - y|^2 / (2 (1 - e^{-lambda t})))`, the
/// value of `lambda u + |p|^2 / 2` in 1D along the family `y + B (1 - e^{-lambda s})`.
pub fn quadratic_oracle(lambda: f64, datum: &InitialDatum, x: f64, t: f64) -> f64 {
    let coef = if lambda == 0.0 {
        1.0 / (2.0 * t)
    } else {
        lambda / (2.0 * (-(-lambda * t).exp_m1()))
    };
    let decay = (-lambda * t).exp();
    let j = |y: f64| decay * (datum.eval(&[y]) + coef * (x - y).powi(2));
    let reach = 2.0 + x.abs() + (datum.lipschitz() / coef.max(1e-12)).min(1e3);
    let n = 200_000;
    let (mut best_y, mut best) = (x, j(x));
    for k in 0..=n {
        let y = x - reach + 2.0 * reach * k as f64 / n as f64;
        let v = j(y);
        if v < best {
            best = v;
            best_y = y;
        }
    }
    let h = 2.0 * reach / n as f64;
    let (_, refined) = golden_min(j, best_y - h, best_y + h, 1e-14);
    best.min(refined)
}

fn herglotz_oracle(kind: BuiltinKind, datum: &InitialDatum, x: f64, t: f64) -> Option<f64> {
    match kind {
        BuiltinKind::Eikonal { c } => {
            Some(ClosedFormOracle::new(OracleKind::Eikonal { c }, datum.clone()).eval(&[x], t))
        }
        BuiltinKind::Quadratic { lambda } => Some(quadratic_oracle(lambda, datum, x, t)),
        _ => None,
    }
}

pub fn herglotz(config: &ScenarioConfig) -> Result<CheckOutcome, HarnessError> {
    if let Some(s) = one_dimensional(config, "herglotz") {
        return Ok(s);
    }
    let kind = config.kind()?;
    if !matches!(
        kind,
        BuiltinKind::Eikonal { .. } | BuiltinKind::Quadratic { .. }
    ) {
        return Ok(CheckOutcome::skipped(
            "herglotz",
            "the Lagrangian of this model is not finite on an open set",
        ));
    }
    let model: BuiltinHamiltonian = config.model()?;
    let datum = config.initial_datum()?;
    let hc = &config.herglotz;
    let opts = HerglotzOptions {
        nodes: hc.nodes,
        restarts: hc.restarts,
        ..HerglotzOptions::default()
    };
    let t = hc.t;
    let xs = line_points(config.domain.x0, hc.half_width, hc.points.max(1));
    let herr = |e: crate::herglotz::HerglotzError| HarnessError::Numerics(e.to_string());
    let mut points = Table::new(
        "herglotz_points",
        &["x", "t", "value", "oracle", "error", "dpp_slack", "pass"],
    );
    let mut failures = 0;
    let mut values = Vec::with_capacity(xs.len());
    for &x in &xs {
        let res = value_function_with(&model, &datum, &[x], t, &opts).map_err(herr)?;
        let oracle = herglotz_oracle(kind, &datum, x, t).expect("kind checked");
        let dpp =
            dpp_check(&model, &datum, res.value, &res.minimizer, 0.5 * t, &opts).map_err(herr)?;
        let err = (res.value - oracle).abs();
        let pass = err <= 1e-3 && dpp.slack.abs() <= 1e-4;
        if !pass {
            failures += 1;
        }
        points.push(vec![
            num(x),
            num(t),
            num(res.value),
            num(oracle),
            num(err),
            num(dpp.slack),
            pass.to_string(),
        ]);
        values.push(res.value);
    }
    let mut curves = Table::new(
        "herglotz_curves",
        &["index", "x", "tau", "lhs", "rhs", "slack", "pass"],
    );
    let mut rng = ChaCha8Rng::seed_from_u64(hc.seed);
    let mut curve_failures = 0;
    for j in 0..hc.random_curves {
        let k = j % xs.len();
        let curve = random_feasible_curve(&model, &[xs[k]], t, opts.nodes + 1, &mut rng);
        let tau = if j % 10 == 9 { 0.5 * t } else { 0.0 };
        let rep = dpp_check(&model, &datum, values[k], &curve, tau, &opts).map_err(herr)?;
        if !rep.holds {
            curve_failures += 1;
        }
        curves.push(vec![
            j.to_string(),
            num(xs[k]),
            num(tau),
            num(rep.lhs),
            num(rep.rhs),
            num(rep.slack),
            rep.holds.to_string(),
        ]);
    }
    let mut plot = Plot::new("herglotz", "value function", "x", "u");
    plot.add(
        "Herglotz minimum",
        xs.iter().copied().zip(values.iter().copied()).collect(),
    );
    plot.add(
        "closed form",
        xs.iter()
            .map(|&x| (x, herglotz_oracle(kind, &datum, x, t).unwrap()))
            .collect(),
    );
    let summary = format!(
        "{} points ({failures} failing), {} random curves ({curve_failures} violating)",
        xs.len(),
        hc.random_curves
    );
    let mut out = if failures == 0 && curve_failures == 0 {
        CheckOutcome::passed("herglotz", summary)
    } else {
        CheckOutcome::failed("herglotz", summary)
    };
    out.tables.push(points);
    out.tables.push(curves);
    out.plots.push(plot);
    Ok(out)
}

// ---------------------------------------------------------------- barrier and domains

/// `h_eps` of the comparison proof.
pub fn barrier_value(a2: f64, b2: f64, x0: &[f64], eps: f64, x: &[f64], t: f64) -> f64 {
    let d = crate::vector::dist(x, x0);
    let near = (d * d + eps * eps).sqrt();
    if a2 == 0.0 {
        b2 * t + near
    } else {
        let r = norm(x);
        (b2 / a2 + (r * r + eps * eps).sqrt()) * (a2 * t).exp_m1() + near
    }
}

/// `(h_eps)_t - (A2 |x| + B2) |D_x h_eps|`, evaluated analytically.
pub fn barrier_lhs(a2: f64, b2: f64, x0: &[f64], eps: f64, x: &[f64], t: f64) -> f64 {
    let diff: Vec<f64> = x.iter().zip(x0).map(|(a, b)| a - b).collect();
    let near = (norm(&diff).powi(2) + eps * eps).sqrt();
    let speed = a2 * norm(x) + b2;
    if a2 == 0.0 {
        return b2 - speed * norm(&diff) / near;
    }
    let far = (norm(x).powi(2) + eps * eps).sqrt();
    let g = (a2 * t).exp_m1();
    let grad: Vec<f64> = x
        .iter()
        .zip(&diff)
        .map(|(xi, di)| xi / far * g + di / near)
        .collect();
    a2 * (a2 * t).exp() * (b2 / a2 + far) - speed * norm(&grad)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BarrierReport {
    pub a2: f64,
    pub b2: f64,
    pub epsilon: f64,
    pub samples: usize,
    pub min_lhs: f64,
    pub min_value: f64,
    pub pass: bool,
}

/// Samples the barrier inequality at random `(x, t)` in `B_r(x0) x (0, horizon)`.
#[allow(clippy::too_many_arguments)]
pub fn check_barrier(
    a2: f64,
    b2: f64,
    x0: &[f64],
    r: f64,
    eps: f64,
    horizon: f64,
    samples: usize,
    seed: u64,
) -> BarrierReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min_lhs = f64::INFINITY;
    let mut min_value = f64::INFINITY;
    for _ in 0..samples {
        let x = ball_point(&mut rng, x0, r);
        let t = rng.gen_range(0.0..horizon);
        min_lhs = min_lhs.min(barrier_lhs(a2, b2, x0, eps, &x, t));
        min_value = min_value.min(barrier_value(a2, b2, x0, eps, &x, t));
    }
    BarrierReport {
        a2,
        b2,
        epsilon: eps,
        samples,
        min_lhs,
        min_value,
        pass: min_lhs >= -1e-12 && min_value >= 0.0,
    }
}

pub fn barrier(config: &ScenarioConfig) -> Result<CheckOutcome, HarnessError> {
    let bc = &config.barrier;
    let pairs = if bc.pairs.is_empty() {
        let c = config.model()?.constants();
        if !c.b2.is_finite() {
            return Ok(CheckOutcome::skipped(
                "barrier",
                "the model has no finite p-Lipschitz constants",
            ));
        }
        vec![[c.a2, c.b2]]
    } else {
        bc.pairs.clone()
    };
    let mut table = Table::new(
        "barrier",
        &[
            "a2",
            "b2",
            "epsilon",
            "samples",
            "min_lhs",
            "min_value",
            "pass",
        ],
    );
    let mut failures = 0;
    let x0 = config.x0();
    for (i, [a2, b2]) in pairs.iter().enumerate() {
        for (j, &eps) in bc.epsilons.iter().enumerate() {
            let seed = bc.seed.wrapping_add((i * 1000 + j) as u64);
            let rep = check_barrier(
                *a2,
                *b2,
                &x0,
                config.domain.r,
                eps,
                config.grid.t_end,
                bc.samples,
                seed,
            );
            if !rep.pass {
                failures += 1;
            }
            table.push(vec![
                num(rep.a2),
                num(rep.b2),
                num(rep.epsilon),
                rep.samples.to_string(),
                num(rep.min_lhs),
                num(rep.min_value),
                rep.pass.to_string(),
            ]);
        }
    }
    let summary = format!("{} cases, {failures} failing", table.rows.len());
    let mut out = if failures == 0 {
        CheckOutcome::passed("barrier", summary)
    } else {
        CheckOutcome::failed("barrier", summary)
    };
    out.tables.push(table);
    Ok(out)
}

pub fn domain_inclusion(config: &ScenarioConfig) -> Result<CheckOutcome, HarnessError> {
    let bc = &config.barrier;
    let n = config.hamiltonian.dimension;
    let mut rng = ChaCha8Rng::seed_from_u64(bc.seed);
    let mut table = Table::new(
        "domain_inclusion",
        &[
            "set",
            "c1",
            "a2",
            "b2",
            "k3",
            "r",
            "in_D",
            "in_E",
            "violations",
        ],
    );
    let mut total_violations = 0;
    for set in 0..bc.constant_sets {
        let c = StructuralConstants::new(
            rng.gen_range(0.0..2.0),
            if rng.gen_bool(0.5) { 1.0 } else { 0.0 },
            rng.gen_range(0.0..2.0),
            rng.gen_range(0.0..2.0),
            rng.gen_range(0.0..2.0),
            None,
        )
        .map_err(|e| HarnessError::Numerics(e.to_string()))?;
        let x0: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let r = rng.gen_range(0.2..2.0);
        let domain = DependenceDomain::new(x0.clone(), r, c)
            .map_err(|e| HarnessError::Numerics(e.to_string()))?;
        let (mut in_d, mut in_e, mut violations) = (0, 0, 0);
        for _ in 0..bc.samples {
            let x = ball_point(&mut rng, &x0, 1.5 * r);
            let t = rng.gen_range(0.0..1.0);
            let d = domain
                .in_d(&x, t)
                .map_err(|e| HarnessError::Numerics(e.to_string()))?;
            let e = domain
                .in_e(&x, t)
                .map_err(|e| HarnessError::Numerics(e.to_string()))?;
            in_d += d as usize;
            in_e += e as usize;
            if d && !e {
                violations += 1;
            }
        }
        total_violations += violations;
        table.push(vec![
            set.to_string(),
            num(c.c1),
            num(c.a2),
            num(c.b2),
            num(c.k3),
            num(r),
            in_d.to_string(),
            in_e.to_string(),
            violations.to_string(),
        ]);
    }
    let summary = format!(
        "{} constant sets, {total_violations} points in D outside E",
        bc.constant_sets
    );
    let mut out = if total_violations == 0 {
        CheckOutcome::passed("domain_inclusion", summary)
    } else {
        CheckOutcome::failed("domain_inclusion", summary)
    };
    out.tables.push(table);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn barrier_examples() {
        // A2 = 0 reduces to B2 (1 - |x - x0| / sqrt(|x - x0|^2 + eps^2)).
        let v = barrier_lhs(0.0, 1.0, &[0.0], 0.1, &[0.3], 0.2);
        assert!((v - (1.0 - 0.3 / (0.09f64 + 0.01).sqrt())).abs() < 1e-15);
        assert_eq!(barrier_lhs(0.0, 0.7, &[0.2], 0.1, &[0.2], 0.5), 0.7);
        let rep = check_barrier(1.0, 0.5, &[0.0], 1.0, 0.05, 1.0, 10_000, 1);
        assert!(rep.pass, "{rep:?}");
    }

    #[test]
    fn barrier_lhs_matches_finite_differences() {
        let (a2, b2, x0, eps) = (1.0, 0.5, [0.2, -0.1], 0.1);
        let (x, t) = ([0.4, 0.3], 0.3);
        let h = 1e-6;
        let ht = (barrier_value(a2, b2, &x0, eps, &x, t + h)
            - barrier_value(a2, b2, &x0, eps, &x, t - h))
            / (2.0 * h);
        let gx: Vec<f64> = (0..2)
            .map(|i| {
                let mut p = x;
                let mut m = x;
                p[i] += h;
                m[i] -= h;
                (barrier_value(a2, b2, &x0, eps, &p, t) - barrier_value(a2, b2, &x0, eps, &m, t))
                    / (2.0 * h)
            })
            .collect();
        let fd = ht - (a2 * norm(&x) + b2) * norm(&gx);
        assert!((fd - barrier_lhs(a2, b2, &x0, eps, &x, t)).abs() < 1e-7);
    }

    #[test]
    fn quadratic_oracle_examples() {
        let abs = InitialDatum::abs(1);
        assert!(quadratic_oracle(1.0, &abs, 0.0, 1.0).abs() < 1e-12);
        // Minimised at y = 0: e^{-1} * 0.25 / (2 (1 - e^{-1})).
        let want = (-1.0f64).exp() * 0.25 / (2.0 * (1.0 - (-1.0f64).exp()));
        assert!((quadratic_oracle(1.0, &abs, 0.5, 1.0) - want).abs() < 1e-12);
        assert!((want - 0.07275).abs() < 1e-5);
        // lambda = 0 is the Hopf-Lax formula.
        let zero = InitialDatum::zero(1);
        assert_eq!(quadratic_oracle(0.0, &zero, 0.3, 0.5), 0.0);
    }

    #[test]
    fn line_points_hit_both_ends() {
        let p = line_points(0.0, 1.0, 41);
        assert_eq!(p.len(), 41);
        assert_eq!(p[0], -1.0);
        assert_eq!(p[40], 1.0);
        assert!((p[20]).abs() < 1e-15);
    }
}
