//! Cross-engine validation and numerical verification of the structural
//! estimates: the a-priori gap bound, strict comparison of BSDE
//! solutions, growth/boundedness of the value function, and risk-measure
//! monotonicity.
//!
//! Every check is seed-deterministic and returns a machine-readable
//! report with the measured margins; `Display` renders one structured
//! text record per check.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::bsde::{
    risk_measure, solve_bsde, solve_rbsde, BsdeError, McParams, ObstacleSpec,
};
use crate::driver::{DriverSpec, FullDriver};
use crate::model::JumpDiffusionModel;
use crate::numerics::{linspace, mean_and_stderr};
use crate::paths::{simulate, PathError, TimeGrid};
use crate::pide::{PideError, ValueSurface};
use crate::rng::{stream, Channel};

#[derive(Debug, Error)]
pub enum ValidateError {
    #[error("invalid estimate constants: {0}")]
    InvalidConstants(String),
    #[error("probe (t={t}, x={x}) lies outside the usable domain")]
    ProbeOutsideDomain { t: f64, x: f64 },
    #[error(transparent)]
    Bsde(#[from] BsdeError),
    #[error(transparent)]
    Pide(#[from] PideError),
    #[error(transparent)]
    Path(#[from] PathError),
}

/// One optimal-stopping problem: everything both engines need.
#[derive(Clone, Debug)]
pub struct ProblemInstance {
    pub model: JumpDiffusionModel,
    pub driver: FullDriver,
    pub obstacle: ObstacleSpec,
    pub t0: f64,
    pub x0: f64,
}

impl ProblemInstance {
    pub fn horizon(&self) -> f64 {
        self.obstacle.horizon
    }
}

/// Constants `(eta, beta)` of the a-priori estimate, constrained by
/// `beta >= 3/eta + 2C` and `eta <= 1/C^2`.
#[derive(Clone, Copy, Debug)]
pub struct EstimateConstants {
    pub eta: f64,
    pub beta: f64,
    pub lip_c: f64,
}

impl EstimateConstants {
    pub fn new(eta: f64, beta: f64, lip_c: f64) -> Result<Self, ValidateError> {
        if !(eta > 0.0 && beta > 0.0 && lip_c > 0.0) {
            return Err(ValidateError::InvalidConstants(format!(
                "eta, beta, C must be positive, got eta={eta}, beta={beta}, C={lip_c}"
            )));
        }
        if beta < 3.0 / eta + 2.0 * lip_c {
            return Err(ValidateError::InvalidConstants(format!(
                "beta >= 3/eta + 2C fails: {beta} < {}",
                3.0 / eta + 2.0 * lip_c
            )));
        }
        if eta > 1.0 / (lip_c * lip_c) {
            return Err(ValidateError::InvalidConstants(format!(
                "eta <= 1/C^2 fails: {eta} > {}",
                1.0 / (lip_c * lip_c)
            )));
        }
        Ok(Self { eta, beta, lip_c })
    }

    /// Tightest admissible constants for a given Lipschitz constant:
    /// `eta = 1/C^2`, `beta = 3/eta + 2C` (evaluated exactly as the
    /// constructor checks it, so equality holds bit-for-bit).
    pub fn tight(lip_c: f64) -> Result<Self, ValidateError> {
        let eta = 1.0 / (lip_c * lip_c);
        Self::new(eta, 3.0 / eta + 2.0 * lip_c, lip_c)
    }
}

/// The continuity/growth constant `K_{C,T} = e^{(3C^2 + 2C) T} max(1, 1/C^2)`.
pub fn k_ct(lip_c: f64, horizon: f64) -> f64 {
    ((3.0 * lip_c * lip_c + 2.0 * lip_c) * horizon).exp()
        * 1.0_f64.max(1.0 / (lip_c * lip_c))
}

// ---------------------------------------------------------------------
// Cross-engine agreement
// ---------------------------------------------------------------------

#[derive(Clone, Copy, Debug)]
pub struct CrossValProbe {
    pub t: f64,
    pub x: f64,
    pub pide_value: f64,
    pub mc_value: f64,
    pub mc_stderr: f64,
    pub gap: f64,
}

#[derive(Clone, Debug)]
pub struct CrossValidationReport {
    pub probes: Vec<CrossValProbe>,
    pub max_abs_gap: f64,
    pub tolerance_used: f64,
    pub pass: bool,
}

impl fmt::Display for CrossValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "check = crossval | probes = {} | max_abs_gap = {:.6e} | tolerance = {:.3e} | {}",
            self.probes.len(),
            self.max_abs_gap,
            self.tolerance_used,
            if self.pass { "PASS" } else { "FAIL" }
        )?;
        for p in &self.probes {
            writeln!(
                f,
                "  probe t = {:.4}, x = {:.4}: pide = {:.6}, mc = {:.6} (se {:.2e}), gap = {:+.6}",
                p.t, p.x, p.pide_value, p.mc_value, p.mc_stderr, p.gap
            )?;
        }
        Ok(())
    }
}

/// Compare the surface against fresh reflected-BSDE solves at seeded
/// interior probes. A probe passes when
/// `|u_pide - u_mc| <= tolerance + 3 stderr`.
pub fn cross_validate(
    surface: &ValueSurface,
    problem: &ProblemInstance,
    mc: &McParams,
    probe_count: usize,
    tolerance: f64,
    seed: u64,
) -> Result<CrossValidationReport, ValidateError> {
    let t0 = surface.tgrid.t0();
    let t_end = surface.tgrid.t_end();
    let span_t = t_end - t0;
    let (x_lo, x_hi) = (surface.sgrid.x_min, surface.sgrid.x_max);
    let span_x = x_hi - x_lo;

    let mut probes = Vec::with_capacity(probe_count);
    let mut max_abs_gap = 0.0_f64;
    let mut pass = true;
    for i in 0..probe_count {
        let mut rng = stream(seed, i as u64, 2, Channel::Probe);
        let t = rng.next_range(t0 + 0.10 * span_t, t0 + 0.60 * span_t);
        let x = rng.next_range(x_lo + 0.30 * span_x, x_lo + 0.70 * span_x);
        if t <= t0 - 1e-12 || t >= t_end || x <= x_lo || x >= x_hi {
            return Err(ValidateError::ProbeOutsideDomain { t, x });
        }
        let pide_value = surface.interpolate(t, x)?;
        let grid = TimeGrid::new(t, t_end, mc.n_steps)?;
        let bundle = simulate(&problem.model, t, x, &grid, mc.n_paths, mc.seed)?;
        let sol = solve_rbsde(
            &problem.driver,
            &problem.model,
            &bundle,
            &problem.obstacle,
            &mc.basis,
            mc.n_picard,
        )?;
        let gap = pide_value - sol.value_at_origin;
        max_abs_gap = max_abs_gap.max(gap.abs());
        if gap.abs() > tolerance + 3.0 * sol.stderr {
            pass = false;
        }
        probes.push(CrossValProbe {
            t,
            x,
            pide_value,
            mc_value: sol.value_at_origin,
            mc_stderr: sol.stderr,
            gap,
        });
    }
    Ok(CrossValidationReport { probes, max_abs_gap, tolerance_used: tolerance, pass })
}

// ---------------------------------------------------------------------
// A-priori gap estimate
// ---------------------------------------------------------------------

#[derive(Clone, Copy, Debug)]
pub struct AprioriReport {
    /// `e^{beta t0} (Y1 - Y2)^2` at the origin.
    pub lhs: f64,
    /// `e^{beta T} (E sup (xi1 - xi2)^2 + eta E int sup|f1 - f2|^2)`.
    pub rhs: f64,
    pub lhs_stderr: f64,
    pub rhs_stderr: f64,
    pub gap_value: f64,
    pub pass: bool,
}

impl fmt::Display for AprioriReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "check = apriori | lhs = {:.6e} (se {:.1e}) | rhs = {:.6e} (se {:.1e}) | gap = {:+.6e} | {}",
            self.lhs,
            self.lhs_stderr,
            self.rhs,
            self.rhs_stderr,
            self.gap_value,
            if self.pass { "PASS" } else { "FAIL" }
        )
    }
}

/// Number of `(y, z, l)` probe points used to approximate the sup of the
/// driver gap per path and step.
const DRIVER_GAP_PROBES: usize = 64;

/// Verify the a-priori estimate on the squared gap of two reflected
/// solves sharing paths:
///
/// ```text
/// e^{beta t0} (Y1_{t0} - Y2_{t0})^2
///   <= e^{beta T} ( E[sup_s (xi1_s - xi2_s)^2] + eta E[int |fbar1 - fbar2|_sup^2 ds] )
/// ```
///
/// evaluated at the origin where the conditional expectations are plain
/// expectations.
#[allow(clippy::too_many_arguments)]
pub fn apriori_gap_check(
    model: &JumpDiffusionModel,
    driver1: &FullDriver,
    driver2: &FullDriver,
    obstacle1: &ObstacleSpec,
    obstacle2: &ObstacleSpec,
    t0: f64,
    x0: f64,
    constants: &EstimateConstants,
    mc: &McParams,
) -> Result<AprioriReport, ValidateError> {
    let horizon = obstacle1.horizon;
    let grid = TimeGrid::new(t0, horizon, mc.n_steps)?;
    let bundle = simulate(model, t0, x0, &grid, mc.n_paths, mc.seed)?;
    let sol1 = solve_rbsde(driver1, model, &bundle, obstacle1, &mc.basis, mc.n_picard)?;
    let sol2 = solve_rbsde(driver2, model, &bundle, obstacle2, &mc.basis, mc.n_picard)?;

    let n = grid.n_steps();
    let dt = grid.dt();
    let n_paths = bundle.n_paths;

    // Per-path origin gap for the left side.
    let d: Vec<f64> =
        (0..n_paths).map(|p| sol1.y.get(p, 0) - sol2.y.get(p, 0)).collect();
    let (gap_value, gap_se) = mean_and_stderr(&d);
    let lhs = (constants.beta * t0).exp() * gap_value * gap_value;
    let lhs_stderr =
        (constants.beta * t0).exp() * (2.0 * gap_value.abs() * gap_se + gap_se * gap_se);

    // Per-path right side: sup of the squared obstacle gap plus the
    // eta-weighted driver-gap integral, the latter approximated by a
    // max over seeded (y, z, l) probes.
    let f1 = &driver1.spec.f_bar;
    let f2 = &driver2.spec.f_bar;
    let mut rhs_samples = Vec::with_capacity(n_paths);
    for p in 0..n_paths {
        let mut sup_xi2 = 0.0_f64;
        let mut int_f2 = 0.0_f64;
        for k in 0..=n {
            let t = grid.point(k);
            let x = bundle.states.get(p, k);
            let xi = obstacle1.h_bar(t, x) - obstacle2.h_bar(t, x);
            sup_xi2 = sup_xi2.max(xi * xi);
            if k < n {
                let mut rng = stream(mc.seed ^ 0x5CA1AB1E, p as u64, k as u64, Channel::Probe);
                let mut worst = 0.0_f64;
                for _ in 0..DRIVER_GAP_PROBES {
                    let y = rng.next_range(-10.0, 10.0);
                    let z = rng.next_range(-10.0, 10.0);
                    let l = rng.next_range(-10.0, 10.0);
                    let gap = (f1(t, x, y, z, l) - f2(t, x, y, z, l)).abs();
                    worst = worst.max(gap);
                }
                int_f2 += worst * worst * dt;
            }
        }
        rhs_samples.push(sup_xi2 + constants.eta * int_f2);
    }
    let (rhs_mean, rhs_se) = mean_and_stderr(&rhs_samples);
    let scale = (constants.beta * horizon).exp();
    let rhs = scale * rhs_mean;
    let rhs_stderr = scale * rhs_se;

    let pass = lhs <= rhs + 3.0 * (lhs_stderr + rhs_stderr);
    Ok(AprioriReport { lhs, rhs, lhs_stderr, rhs_stderr, gap_value, pass })
}

// ---------------------------------------------------------------------
// Strict comparison
// ---------------------------------------------------------------------

#[derive(Clone, Copy, Debug)]
pub struct StrictComparisonReport {
    pub epsilon: f64,
    pub gap: f64,
    pub gap_stderr: f64,
    pub gap_half: f64,
    pub gap_half_stderr: f64,
    /// `gap(eps) / gap(eps/2)`, linear scaling puts this at 2.
    pub ratio: f64,
    pub pass: bool,
}

impl fmt::Display for StrictComparisonReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "check = strict | eps = {} | gap = {:.6e} (se {:.1e}) | gap_half = {:.6e} (se {:.1e}) | ratio = {:.3} | {}",
            self.epsilon,
            self.gap,
            self.gap_stderr,
            self.gap_half,
            self.gap_half_stderr,
            self.ratio,
            if self.pass { "PASS" } else { "FAIL" }
        )
    }
}

/// Raise a driver by a constant and compare the plain BSDE solutions on
/// common paths: the origin gap must be positive beyond noise and scale
/// linearly in the raise.
pub fn strict_comparison_check<F: Fn(f64) -> f64>(
    driver2: &FullDriver,
    epsilon: f64,
    position: F,
    model: &JumpDiffusionModel,
    t0: f64,
    x0: f64,
    mc: &McParams,
) -> Result<StrictComparisonReport, ValidateError> {
    let grid = TimeGrid::new(t0, model.horizon, mc.n_steps)?;
    let bundle = simulate(model, t0, x0, &grid, mc.n_paths, mc.seed)?;
    let terminal: Vec<f64> =
        bundle.states.col(grid.n_steps()).iter().map(|&x| position(x)).collect();

    let raised = |eps: f64| -> FullDriver {
        let base = driver2.spec.f_bar.clone();
        FullDriver {
            spec: DriverSpec {
                f_bar: Arc::new(move |t, x, y, z, l| base(t, x, y, z, l) + eps),
                gamma: driver2.spec.gamma.clone(),
                lipschitz_c: driver2.spec.lipschitz_c,
                monotone_r: driver2.spec.monotone_r,
                growth_p: driver2.spec.growth_p,
            },
            mode: driver2.mode,
        }
    };

    let base_sol = solve_bsde(driver2, model, &bundle, &terminal, &mc.basis, mc.n_picard)?;
    let gap_at = |eps: f64| -> Result<(f64, f64), ValidateError> {
        let sol = solve_bsde(&raised(eps), model, &bundle, &terminal, &mc.basis, mc.n_picard)?;
        let d: Vec<f64> =
            (0..bundle.n_paths).map(|p| sol.y.get(p, 0) - base_sol.y.get(p, 0)).collect();
        let (m, se) = mean_and_stderr(&d);
        Ok((m, se))
    };

    let (gap, gap_stderr) = gap_at(epsilon)?;
    let (gap_half, gap_half_stderr) = gap_at(epsilon / 2.0)?;
    let pass = if epsilon == 0.0 {
        gap.abs() <= 3.0 * gap_stderr + 1e-15
    } else {
        let positive = gap > 3.0 * gap_stderr && gap_half > 3.0 * gap_half_stderr;
        let ratio = gap / gap_half;
        positive && (1.6..=2.4).contains(&ratio)
    };
    let ratio = if gap_half != 0.0 { gap / gap_half } else { f64::NAN };
    Ok(StrictComparisonReport {
        epsilon,
        gap,
        gap_stderr,
        gap_half,
        gap_half_stderr,
        ratio,
        pass,
    })
}

// ---------------------------------------------------------------------
// Growth, boundedness and continuity
// ---------------------------------------------------------------------

/// Rectangular probe lattice; refinements double both axes.
#[derive(Clone, Copy, Debug)]
pub struct ProbeGrid {
    pub t_range: (f64, f64),
    pub x_range: (f64, f64),
    pub nt: usize,
    pub nx: usize,
}

impl ProbeGrid {
    fn level_points(&self, level: u32) -> (Vec<f64>, Vec<f64>) {
        let factor = 1usize << level;
        (
            linspace(self.t_range.0, self.t_range.1, self.nt * factor),
            linspace(self.x_range.0, self.x_range.1, self.nx * factor),
        )
    }
}

#[derive(Clone, Copy, Debug)]
pub struct GrowthProbe {
    pub t: f64,
    pub x: f64,
    pub u: f64,
    pub u_stderr: f64,
    /// `u^2`.
    pub lhs: f64,
    /// `K_{C,T} * (MC estimate of E[int f0^2 + sup hbar^2])`.
    pub bound: f64,
    pub pass: bool,
}

#[derive(Clone, Debug)]
pub struct GrowthContinuityReport {
    pub probes: Vec<GrowthProbe>,
    pub growth_pass: bool,
    /// Empirical modulus per refinement level.
    pub moduli: Vec<f64>,
    pub modulus_ratios: Vec<f64>,
    pub continuity_pass: bool,
    pub sup_abs_u: f64,
    /// `sqrt(K_{C,T} * max rhs)` when the problem is flagged bounded.
    pub bounded_bound: Option<f64>,
    pub bounded_pass: Option<bool>,
    pub pass: bool,
}

impl fmt::Display for GrowthContinuityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "check = growth | probes = {} | growth = {} | moduli = {:?} | ratios = {:?} | continuity = {} | sup|u| = {:.4} | bounded = {:?} | {}",
            self.probes.len(),
            if self.growth_pass { "ok" } else { "violated" },
            self.moduli,
            self.modulus_ratios,
            if self.continuity_pass { "ok" } else { "violated" },
            self.sup_abs_u,
            self.bounded_pass,
            if self.pass { "PASS" } else { "FAIL" }
        )
    }
}

/// Growth-bound and empirical-continuity check of the value function.
///
/// (a) per coarse probe: `u(t,x)^2 <= K_{C,T} * rhs + 3 stderr` with the
/// right side estimated pathwise; (b) the max adjacent-probe modulus of
/// `u` must shrink by a factor `<= 0.8` per lattice refinement (3
/// levels); (c) if the data are flagged bounded, `sup |u| <= sqrt(K_{C,T}
/// * max rhs)`.
pub fn growth_and_continuity_check(
    problem: &ProblemInstance,
    probe_grid: &ProbeGrid,
    mc: &McParams,
) -> Result<GrowthContinuityReport, ValidateError> {
    let horizon = problem.horizon();
    let kct = k_ct(problem.driver.spec.lipschitz_c, horizon);
    let f_bar = &problem.driver.spec.f_bar;

    let value_at = |t: f64, x: f64| -> Result<(f64, f64), ValidateError> {
        let grid = TimeGrid::new(t, horizon, mc.n_steps)?;
        let bundle = simulate(&problem.model, t, x, &grid, mc.n_paths, mc.seed)?;
        let sol = solve_rbsde(
            &problem.driver,
            &problem.model,
            &bundle,
            &problem.obstacle,
            &mc.basis,
            mc.n_picard,
        )?;
        Ok((sol.value_at_origin, sol.stderr))
    };

    // (a) growth bound on the coarse lattice.
    let (ts, xs) = probe_grid.level_points(0);
    let mut probes = Vec::new();
    let mut growth_pass = true;
    let mut sup_abs_u = 0.0_f64;
    let mut max_rhs = 0.0_f64;
    for &t in &ts {
        for &x in &xs {
            let (u, u_se) = value_at(t, x)?;
            sup_abs_u = sup_abs_u.max(u.abs());
            // Pathwise estimate of E[int_0^T f(s, X, 0,0,0)^2 ds
            // + sup_s hbar(s, X_s)^2]; the pre-t stretch freezes X at x.
            let grid = TimeGrid::new(t, horizon, mc.n_steps)?;
            let bundle = simulate(&problem.model, t, x, &grid, mc.n_paths, mc.seed)?;
            let dt = grid.dt();
            let mut samples = Vec::with_capacity(mc.n_paths);
            let pre: Vec<f64> = linspace(0.0, t.max(1e-12), 16);
            let pre_f2: f64 = if t > 0.0 {
                pre.iter().map(|&s| {
                    let v = f_bar(s, x, 0.0, 0.0, 0.0);
                    v * v
                }).sum::<f64>() / 16.0 * t
            } else {
                0.0
            };
            let pre_sup: f64 = pre
                .iter()
                .map(|&s| problem.obstacle.h_bar(s.min(horizon * (1.0 - 1e-12)), x).abs())
                .fold(0.0, f64::max);
            for p in 0..bundle.n_paths {
                let mut int_f2 = pre_f2;
                let mut sup_h2 = pre_sup * pre_sup;
                for k in 0..=grid.n_steps() {
                    let s = grid.point(k);
                    let xs_k = bundle.states.get(p, k);
                    let hb = problem.obstacle.h_bar(s, xs_k);
                    sup_h2 = sup_h2.max(hb * hb);
                    if k < grid.n_steps() {
                        let v = f_bar(s, xs_k, 0.0, 0.0, 0.0);
                        int_f2 += v * v * dt;
                    }
                }
                samples.push(int_f2 + sup_h2);
            }
            let (rhs_mean, rhs_se) = mean_and_stderr(&samples);
            let bound = kct * rhs_mean;
            max_rhs = max_rhs.max(rhs_mean);
            let lhs = u * u;
            let ok = lhs <= bound + 3.0 * (kct * rhs_se + 2.0 * u.abs() * u_se);
            growth_pass &= ok;
            probes.push(GrowthProbe { t, x, u, u_stderr: u_se, lhs, bound, pass: ok });
        }
    }

    // (b) empirical modulus over 3 refinements.
    let mut moduli = Vec::new();
    for level in 0..3u32 {
        let (ts, xs) = probe_grid.level_points(level);
        let mut values = vec![vec![0.0; xs.len()]; ts.len()];
        for (i, &t) in ts.iter().enumerate() {
            for (j, &x) in xs.iter().enumerate() {
                values[i][j] = value_at(t, x)?.0;
            }
        }
        let mut modulus = 0.0_f64;
        for i in 0..ts.len() {
            for j in 0..xs.len() {
                if i + 1 < ts.len() {
                    modulus = modulus.max((values[i + 1][j] - values[i][j]).abs());
                }
                if j + 1 < xs.len() {
                    modulus = modulus.max((values[i][j + 1] - values[i][j]).abs());
                }
            }
        }
        moduli.push(modulus);
    }
    let modulus_ratios: Vec<f64> = moduli
        .windows(2)
        .map(|w| if w[0] > 0.0 { w[1] / w[0] } else { 0.0 })
        .collect();
    let continuity_pass = modulus_ratios.iter().all(|&r| r <= 0.8);

    // (c) boundedness.
    let (bounded_bound, bounded_pass) = if problem.obstacle.bounded {
        let b = (kct * max_rhs).sqrt();
        (Some(b), Some(sup_abs_u <= b))
    } else {
        (None, None)
    };

    let pass = growth_pass && continuity_pass && bounded_pass.unwrap_or(true);
    Ok(GrowthContinuityReport {
        probes,
        growth_pass,
        moduli,
        modulus_ratios,
        continuity_pass,
        sup_abs_u,
        bounded_bound,
        bounded_pass,
        pass,
    })
}

// ---------------------------------------------------------------------
// Risk-measure monotonicity
// ---------------------------------------------------------------------

#[derive(Clone, Copy, Debug)]
pub struct MonotonicityCase {
    pub case_idx: usize,
    pub rho_low_position: f64,
    pub rho_high_position: f64,
    pub stderr_sum: f64,
    pub pass: bool,
}

#[derive(Clone, Debug)]
pub struct MonotonicityReport {
    pub cases: Vec<MonotonicityCase>,
    pub violations: usize,
    pub pass: bool,
}

impl fmt::Display for MonotonicityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "check = monotone | cases = {} | violations = {} | {}",
            self.cases.len(),
            self.violations,
            if self.pass { "PASS" } else { "FAIL" }
        )
    }
}

/// Monotonicity of the risk measure: for `n_cases` seeded random
/// Lipschitz payoff pairs ordered by construction
/// (`zeta2 = zeta1 + |eta|`), `rho(zeta1) >= rho(zeta2)` within noise.
#[allow(clippy::too_many_arguments)]
pub fn monotonicity_suite(
    driver: &FullDriver,
    model: &JumpDiffusionModel,
    t0: f64,
    x0: f64,
    maturity: f64,
    n_cases: usize,
    seed: u64,
    mc: &McParams,
) -> Result<MonotonicityReport, ValidateError> {
    let mut cases = Vec::with_capacity(n_cases);
    let mut violations = 0;
    for i in 0..n_cases {
        let mut rng = stream(seed, i as u64, 3, Channel::Probe);
        let slope = rng.next_range(-1.0, 1.0);
        let amp = rng.next_range(0.0, 0.5);
        let freq = rng.next_range(0.5, 4.0);
        let bump_amp = rng.next_range(0.05, 0.6);
        let bump_freq = rng.next_range(0.5, 4.0);
        let low = move |x: f64| slope * x + amp * (freq * x).sin();
        let high = move |x: f64| low(x) + bump_amp * (1.0 + (bump_freq * x).sin());

        let r_low = risk_measure(driver, model, t0, x0, maturity, low, mc)?;
        let r_high = risk_measure(driver, model, t0, x0, maturity, high, mc)?;
        let stderr_sum = r_low.stderr + r_high.stderr;
        let ok = r_low.value >= r_high.value - 3.0 * stderr_sum;
        if !ok {
            violations += 1;
        }
        cases.push(MonotonicityCase {
            case_idx: i,
            rho_low_position: r_low.value,
            rho_high_position: r_high.value,
            stderr_sum,
            pass: ok,
        });
    }
    Ok(MonotonicityReport { cases, violations, pass: violations == 0 })
}
