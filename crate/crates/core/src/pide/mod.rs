//! Deterministic engine: backward IMEX time stepping of the obstacle
//! problem
//!
//! ```text
//! min( u - h, -du/dt - Au - Ku - fbar(t, x, u, sigma du/dx, Bu) ) = 0
//! u(T, .) = g
//! ```
//!
//! on a truncated space-time lattice. The stiff local part `A` is
//! implicit (one tridiagonal solve per step); the bounded nonlocal parts
//! `K`, `B` and the driver are explicit in the previous time level, with
//! Picard passes resolving the `y`-coupling of the driver. The obstacle
//! is enforced either by projection (`u <- max(u, h)`) or by an implicit
//! penalty term.

mod grid;
mod operators;

pub use grid::{BoundaryMode, PideError, SpaceGrid, ValueSurface};
pub use operators::{assemble_operators, DerivativeMode, OperatorBundle};

use crate::bsde::ObstacleSpec;
use crate::driver::{FullDriver, KernelMode};
use crate::matrix::Mat;
use crate::model::JumpDiffusionModel;
use crate::numerics::solve_tridiagonal;
use crate::paths::TimeGrid;

/// Relative half-width of the obstacle band excluded from the residual
/// sup-norm. The min-form residual cannot vanish in the finite-difference
/// sense on the exercise boundary, and near the terminal payoff kink the
/// time derivatives blow up like 1/(T - t) while `u - h` shrinks; the
/// band must cover that layer for the sup to refine at first order.
pub const RESIDUAL_BAND_REL: f64 = 3e-2;

/// Obstacle treatment of the backward step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ObstacleScheme {
    /// `u <- max(u, h)` after each step; dominance is exact.
    Projection,
    /// Implicit penalty `pen (h - u)^+` with active set frozen per
    /// Picard pass; dominance holds up to `O(1/pen)`.
    Penalization { pen_param: f64 },
}

/// Backward-solve the variational inequality on the given lattice.
pub fn solve_pidvi(
    model: &JumpDiffusionModel,
    driver: &FullDriver,
    obstacle: &ObstacleSpec,
    tgrid: &TimeGrid,
    sgrid: &SpaceGrid,
    scheme: ObstacleScheme,
    n_picard: usize,
) -> Result<ValueSurface, PideError> {
    if driver.mode != KernelMode::ScalarH2 {
        return Err(PideError::RequiresScalarDriver);
    }
    let ops = assemble_operators(model, &driver.spec, sgrid)?;
    let n = tgrid.n_steps();
    let m = sgrid.n_nodes;
    let dt = tgrid.dt();
    let dx = sgrid.dx();
    let nodes = &sgrid.nodes;
    let n_picard = n_picard.max(1);

    let sigma_over_dx =
        nodes.iter().map(|&x| (model.diffusion)(x).abs() / dx).fold(0.0_f64, f64::max);
    let bound = ops.explicit_bound(sigma_over_dx, driver.spec.lipschitz_c, dx);
    if dt * bound >= 1.0 {
        return Err(PideError::CflViolation { dt, required: 1.0 / bound });
    }

    let mut values = Mat::zeros(n + 1, m);
    let terminal: Vec<f64> = nodes.iter().map(|&x| (obstacle.g)(x)).collect();
    values.row_mut(n).copy_from_slice(&terminal);

    for k in (0..n).rev() {
        let t_k = tgrid.point(k);
        let u_next = values.row(k + 1).to_vec();
        let h_row: Vec<f64> = nodes.iter().map(|&x| (obstacle.h)(t_k, x)).collect();
        let off_grid = |x: f64| obstacle.h_bar(t_k, x);

        let ku = ops.apply_k(&u_next, dx, &off_grid, DerivativeMode::Upwind)?;
        let bu = ops.apply_b(&u_next, &off_grid)?;
        // Explicit z-argument sigma u_x of the previous time level.
        let zz: Vec<f64> = (0..m)
            .map(|j| {
                let du = if j == 0 {
                    (u_next[1] - u_next[0]) / dx
                } else if j == m - 1 {
                    (u_next[m - 1] - u_next[m - 2]) / dx
                } else {
                    (u_next[j + 1] - u_next[j - 1]) / (2.0 * dx)
                };
                (model.diffusion)(nodes[j]) * du
            })
            .collect();

        let mut w = u_next.clone();
        for _ in 0..n_picard {
            w = implicit_step(
                &ops, sgrid, driver, &u_next, &w, &ku, &bu, &zz, &h_row, t_k, dt, scheme, k,
            )?;
        }
        if let ObstacleScheme::Projection = scheme {
            for j in 0..m {
                w[j] = w[j].max(h_row[j]);
            }
        }
        values.row_mut(k).copy_from_slice(&w);
    }

    Ok(ValueSurface { tgrid: tgrid.clone(), sgrid: sgrid.clone(), values })
}

/// One tridiagonal solve of `(I - dt A) u = rhs` with the boundary rows
/// resolved per the grid's boundary mode and the penalty (if any) folded
/// into the diagonal on the active set of the previous iterate.
#[allow(clippy::too_many_arguments)]
fn implicit_step(
    ops: &OperatorBundle,
    sgrid: &SpaceGrid,
    driver: &FullDriver,
    u_next: &[f64],
    w_prev: &[f64],
    ku: &[f64],
    bu: &[f64],
    zz: &[f64],
    h_row: &[f64],
    t_k: f64,
    dt: f64,
    scheme: ObstacleScheme,
    step: usize,
) -> Result<Vec<f64>, PideError> {
    let m = sgrid.n_nodes;
    let nodes = &sgrid.nodes;
    let mut sub = vec![0.0; m];
    let mut diag = vec![0.0; m];
    let mut sup = vec![0.0; m];
    let mut rhs = vec![0.0; m];

    for j in 1..m - 1 {
        sub[j] = -dt * ops.a_sub[j];
        diag[j] = 1.0 - dt * ops.a_diag[j];
        sup[j] = -dt * ops.a_sup[j];
        let f = driver.eval_scalar(t_k, nodes[j], w_prev[j], zz[j], bu[j]);
        rhs[j] = u_next[j] + dt * (ku[j] + f);
        if let ObstacleScheme::Penalization { pen_param } = scheme {
            if w_prev[j] < h_row[j] {
                diag[j] += dt * pen_param;
                rhs[j] += dt * pen_param * h_row[j];
            }
        }
    }

    match sgrid.boundary_mode {
        BoundaryMode::DirichletObstacle => {
            diag[0] = 1.0;
            sup[0] = 0.0;
            rhs[0] = h_row[0];
            diag[m - 1] = 1.0;
            sub[m - 1] = 0.0;
            rhs[m - 1] = h_row[m - 1];
            solve_tridiagonal(&sub, &diag, &sup, &rhs)
                .ok_or(PideError::SingularOperator { step })
        }
        BoundaryMode::LinearExtrapolation => {
            // Fold u_0 = 2 u_1 - u_2 and u_{m-1} = 2 u_{m-2} - u_{m-3}
            // into the first and last interior rows; the bands stay
            // tridiagonal.
            let mm = m - 2;
            let mut isub = vec![0.0; mm];
            let mut idiag = vec![0.0; mm];
            let mut isup = vec![0.0; mm];
            let mut irhs = vec![0.0; mm];
            for i in 0..mm {
                let j = i + 1;
                isub[i] = sub[j];
                idiag[i] = diag[j];
                isup[i] = sup[j];
                irhs[i] = rhs[j];
            }
            idiag[0] += 2.0 * sub[1];
            isup[0] -= sub[1];
            isub[0] = 0.0;
            idiag[mm - 1] += 2.0 * sup[m - 2];
            isub[mm - 1] -= sup[m - 2];
            isup[mm - 1] = 0.0;
            let inner = solve_tridiagonal(&isub, &idiag, &isup, &irhs)
                .ok_or(PideError::SingularOperator { step })?;
            let mut full = vec![0.0; m];
            full[1..m - 1].copy_from_slice(&inner);
            full[0] = 2.0 * full[1] - full[2];
            full[m - 1] = 2.0 * full[m - 2] - full[m - 3];
            Ok(full)
        }
    }
}

/// Pointwise min-form residual of a surface, on interior points away
/// from a 2-node boundary margin, a 2-row terminal margin, and the
/// free-boundary band `|u - h| < band (1 + |u|)`. Excluded points carry
/// NaN.
#[derive(Clone, Debug)]
pub struct ResidualField {
    pub residuals: Mat,
    pub sup_norm: f64,
    pub band_rel: f64,
}

/// Evaluate the min-form residual of `surface` with centered differences
/// on the surface itself.
pub fn viscosity_residual(
    surface: &ValueSurface,
    model: &JumpDiffusionModel,
    driver: &FullDriver,
    obstacle: &ObstacleSpec,
) -> Result<ResidualField, PideError> {
    viscosity_residual_banded(surface, model, driver, obstacle, RESIDUAL_BAND_REL)
}

/// As [`viscosity_residual`] with an explicit relative band width.
pub fn viscosity_residual_banded(
    surface: &ValueSurface,
    model: &JumpDiffusionModel,
    driver: &FullDriver,
    obstacle: &ObstacleSpec,
    band_rel: f64,
) -> Result<ResidualField, PideError> {
    if driver.mode != KernelMode::ScalarH2 {
        return Err(PideError::RequiresScalarDriver);
    }
    let ops = assemble_operators(model, &driver.spec, &surface.sgrid)?;
    let n = surface.tgrid.n_steps();
    let m = surface.sgrid.n_nodes;
    let dt = surface.tgrid.dt();
    let dx = surface.sgrid.dx();
    let nodes = &surface.sgrid.nodes;

    let mut residuals = Mat::zeros(n + 1, m);
    for v in residuals.row_mut(0) {
        *v = f64::NAN;
    }
    let mut sup = 0.0_f64;
    // Rows 0, n-1 and n are excluded: the centered time difference needs
    // both neighbors and the terminal layer is margin.
    for k in 1..n.saturating_sub(1) {
        let t_k = surface.tgrid.point(k);
        let row = surface.values.row(k).to_vec();
        let off_grid = |x: f64| obstacle.h_bar(t_k, x);
        let ku = ops.apply_k(&row, dx, &off_grid, DerivativeMode::Centered)?;
        let bu = ops.apply_b(&row, &off_grid)?;
        for j in 0..m {
            let excluded = j < 2 || j + 2 >= m;
            let u = row[j];
            let h = (obstacle.h)(t_k, nodes[j]);
            if excluded || (u - h).abs() < band_rel * (1.0 + u.abs()) {
                residuals.set(k, j, f64::NAN);
                continue;
            }
            let du_dt = (surface.values.get(k + 1, j) - surface.values.get(k - 1, j)) / (2.0 * dt);
            let sig = (model.diffusion)(nodes[j]);
            let au = 0.5 * sig * sig * (row[j + 1] - 2.0 * u + row[j - 1]) / (dx * dx)
                + (model.drift)(nodes[j]) * (row[j + 1] - row[j - 1]) / (2.0 * dx);
            let z = sig * (row[j + 1] - row[j - 1]) / (2.0 * dx);
            let f = driver.eval_scalar(t_k, nodes[j], u, z, bu[j]);
            let r = (u - h).min(-du_dt - au - ku[j] - f);
            residuals.set(k, j, r);
            sup = sup.max(r.abs());
        }
    }
    for k in (n.saturating_sub(1))..=n {
        for v in residuals.row_mut(k) {
            *v = f64::NAN;
        }
    }
    Ok(ResidualField { residuals, sup_norm: sup, band_rel })
}

/// Discrete exercise region: per time index, the node intervals where
/// `u - hbar <= band_tol`.
#[derive(Clone, Debug)]
pub struct ExerciseRegion {
    /// Per time index, inclusive node-index intervals.
    pub intervals: Vec<Vec<(usize, usize)>>,
}

impl ExerciseRegion {
    /// x-coordinates of the interval endpoints, per time index.
    pub fn boundary_points(&self, sgrid: &SpaceGrid) -> Vec<Vec<f64>> {
        self.intervals
            .iter()
            .map(|row| {
                row.iter().flat_map(|&(a, b)| [sgrid.nodes[a], sgrid.nodes[b]]).collect()
            })
            .collect()
    }

    /// True when no non-terminal time has any exercise node.
    pub fn is_empty_before_terminal(&self) -> bool {
        self.intervals[..self.intervals.len() - 1].iter().all(Vec::is_empty)
    }
}

/// Extract the region where the surface touches the obstacle.
pub fn extract_stopping_region(
    surface: &ValueSurface,
    obstacle: &ObstacleSpec,
    band_tol: f64,
) -> ExerciseRegion {
    assert!(band_tol > 0.0, "band_tol must be positive");
    let n = surface.tgrid.n_steps();
    let m = surface.sgrid.n_nodes;
    let mut intervals = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let t_k = surface.tgrid.point(k);
        let mut row: Vec<(usize, usize)> = Vec::new();
        let mut open: Option<usize> = None;
        for j in 0..m {
            let in_region = surface.values.get(k, j)
                - obstacle.h_bar(t_k, surface.sgrid.nodes[j])
                <= band_tol;
            match (in_region, open) {
                (true, None) => open = Some(j),
                (false, Some(start)) => {
                    row.push((start, j - 1));
                    open = None;
                }
                _ => {}
            }
        }
        if let Some(start) = open {
            row.push((start, m - 1));
        }
        intervals.push(row);
    }
    ExerciseRegion { intervals }
}

/// Exact structural diagnostics of a solved surface.
#[derive(Clone, Copy, Debug)]
pub struct PideStructural {
    /// max over non-terminal grid points of `(h - u)^+`.
    pub max_obstacle_violation: f64,
    /// terminal row equals `g(nodes)` bit-exactly.
    pub terminal_exact: bool,
}

pub fn check_structural(surface: &ValueSurface, obstacle: &ObstacleSpec) -> PideStructural {
    let n = surface.tgrid.n_steps();
    let m = surface.sgrid.n_nodes;
    let mut max_violation = 0.0_f64;
    for k in 0..n {
        let t_k = surface.tgrid.point(k);
        for j in 0..m {
            let h = (obstacle.h)(t_k, surface.sgrid.nodes[j]);
            max_violation = max_violation.max(h - surface.values.get(k, j));
        }
    }
    let terminal_exact = (0..m).all(|j| {
        surface.values.get(n, j).to_bits() == (obstacle.g)(surface.sgrid.nodes[j]).to_bits()
    });
    PideStructural { max_obstacle_violation: max_violation.max(0.0), terminal_exact }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::driver::DriverSpec;
    use crate::model::{LevyMeasure, ScalarFn};
    use std::sync::Arc;

    fn constant_problem() -> (JumpDiffusionModel, FullDriver, ObstacleSpec) {
        let model = JumpDiffusionModel::new(
            Arc::new(|x: f64| 0.06 * x) as ScalarFn,
            Arc::new(|x: f64| 0.2 * x) as ScalarFn,
            Arc::new(|x: f64, e: f64| x * e),
            LevyMeasure::from_atoms(&[(-0.1, 1.0), (0.1, 1.0)]).unwrap(),
            1.0,
            0.5,
        )
        .unwrap();
        let driver = FullDriver::scalar(DriverSpec::discount(0.1));
        let obstacle = ObstacleSpec::constant(1.0, 0.5);
        (model, driver, obstacle)
    }

    #[test]
    fn constant_data_gives_the_constant_solution() {
        // h = g = 1 and f(1) <= 0: u = 1 solves the inequality, and the
        // scheme preserves it to machine precision.
        let (model, driver, obstacle) = constant_problem();
        let tgrid = TimeGrid::new(0.0, 0.5, 20).unwrap();
        let sgrid = SpaceGrid::new(0.2, 3.0, 61, BoundaryMode::DirichletObstacle).unwrap();
        let s = solve_pidvi(&model, &driver, &obstacle, &tgrid, &sgrid, ObstacleScheme::Projection, 3)
            .unwrap();
        for k in 0..=20 {
            for j in 0..61 {
                assert!(
                    (s.value(k, j) - 1.0).abs() < 1e-12,
                    "u({k},{j}) = {}",
                    s.value(k, j)
                );
            }
        }
        let st = check_structural(&s, &obstacle);
        assert!(st.terminal_exact);
        assert_eq!(st.max_obstacle_violation, 0.0);
    }

    #[test]
    fn constant_solution_has_zero_residual_and_full_region() {
        let (model, driver, obstacle) = constant_problem();
        let tgrid = TimeGrid::new(0.0, 0.5, 20).unwrap();
        let sgrid = SpaceGrid::new(0.2, 3.0, 61, BoundaryMode::DirichletObstacle).unwrap();
        let s = solve_pidvi(&model, &driver, &obstacle, &tgrid, &sgrid, ObstacleScheme::Projection, 3)
            .unwrap();
        // u = h everywhere: the residual field is entirely inside the
        // obstacle band, so the sup over the complement is zero, and the
        // exercise region covers the grid.
        let r = viscosity_residual(&s, &model, &driver, &obstacle).unwrap();
        assert!(r.sup_norm <= 1e-10, "sup residual {}", r.sup_norm);
        let region = extract_stopping_region(&s, &obstacle, 1e-9);
        for k in 0..=20 {
            assert_eq!(region.intervals[k], vec![(0, 60)]);
        }
    }

    #[test]
    fn terminal_row_is_exact() {
        let (model, driver, _) = constant_problem();
        let obstacle = ObstacleSpec::put(1.0, 0.5, (0.0, 3.0));
        let tgrid = TimeGrid::new(0.0, 0.5, 10).unwrap();
        let sgrid = SpaceGrid::new(0.0, 3.0, 31, BoundaryMode::DirichletObstacle).unwrap();
        let s = solve_pidvi(&model, &driver, &obstacle, &tgrid, &sgrid, ObstacleScheme::Projection, 3)
            .unwrap();
        for j in 0..31 {
            let g = (1.0 - sgrid.nodes[j]).max(0.0);
            assert_eq!(s.value(10, j).to_bits(), g.to_bits());
        }
    }

    #[test]
    fn cfl_violation_is_refused_with_required_dt() {
        let (model, driver, obstacle) = constant_problem();
        // One huge step on a fine grid violates the explicit bound.
        let tgrid = TimeGrid::new(0.0, 0.5, 1).unwrap();
        let sgrid = SpaceGrid::new(0.2, 3.0, 601, BoundaryMode::DirichletObstacle).unwrap();
        let err = solve_pidvi(&model, &driver, &obstacle, &tgrid, &sgrid, ObstacleScheme::Projection, 3)
            .unwrap_err();
        match err {
            PideError::CflViolation { dt, required } => {
                assert!(dt >= required, "dt {dt} vs required {required}");
            }
            other => panic!("expected CFL violation, got {other:?}"),
        }
    }

    #[test]
    fn never_binding_obstacle_has_empty_region() {
        let model = JumpDiffusionModel::new(
            Arc::new(|_| 0.0) as ScalarFn,
            Arc::new(|_| 0.3) as ScalarFn,
            Arc::new(|_, _| 0.0),
            LevyMeasure::none(),
            1.0,
            0.5,
        )
        .unwrap();
        let driver = FullDriver::scalar(DriverSpec::zero());
        let h: crate::bsde::PayoffFn = Arc::new(|_, _| -1e6);
        let g: ScalarFn = Arc::new(|x: f64| (x * 1.3).sin());
        let obstacle =
            ObstacleSpec::new(h, g, 0.5, 0, 2e6, true, (-2.0, 2.0)).unwrap();
        let tgrid = TimeGrid::new(0.0, 0.5, 20).unwrap();
        let sgrid = SpaceGrid::new(-2.0, 2.0, 81, BoundaryMode::LinearExtrapolation).unwrap();
        let s = solve_pidvi(&model, &driver, &obstacle, &tgrid, &sgrid, ObstacleScheme::Projection, 3)
            .unwrap();
        let region = extract_stopping_region(&s, &obstacle, 1e-6);
        assert!(region.is_empty_before_terminal());
        // Terminal row is the payoff itself.
        assert_eq!(region.intervals[20], vec![(0, 80)]);
    }

    #[test]
    fn general_mode_driver_is_refused() {
        let (model, _, obstacle) = constant_problem();
        let driver = FullDriver::general(DriverSpec::discount(0.1));
        let tgrid = TimeGrid::new(0.0, 0.5, 10).unwrap();
        let sgrid = SpaceGrid::new(0.2, 3.0, 31, BoundaryMode::DirichletObstacle).unwrap();
        let err = solve_pidvi(&model, &driver, &obstacle, &tgrid, &sgrid, ObstacleScheme::Projection, 3)
            .unwrap_err();
        assert!(matches!(err, PideError::RequiresScalarDriver));
    }

    #[test]
    fn perturbing_a_solution_raises_the_residual() {
        let model = JumpDiffusionModel::new(
            Arc::new(|_| 0.0) as ScalarFn,
            Arc::new(|_| 0.3) as ScalarFn,
            Arc::new(|_, _| 0.0),
            LevyMeasure::none(),
            1.0,
            0.5,
        )
        .unwrap();
        let driver = FullDriver::scalar(DriverSpec::discount(0.05));
        let h: crate::bsde::PayoffFn = Arc::new(|_, _| -1e6);
        let g: ScalarFn = Arc::new(|x: f64| (-(x * x)).exp());
        let obstacle = ObstacleSpec::new(h, g, 0.5, 0, 2e6, true, (-2.0, 2.0)).unwrap();
        let tgrid = TimeGrid::new(0.0, 0.5, 40).unwrap();
        let sgrid = SpaceGrid::new(-2.0, 2.0, 81, BoundaryMode::LinearExtrapolation).unwrap();
        let mut s = solve_pidvi(&model, &driver, &obstacle, &tgrid, &sgrid, ObstacleScheme::Projection, 3)
            .unwrap();
        let base = viscosity_residual(&s, &model, &driver, &obstacle).unwrap();
        // Bump one interior node by +0.1: the second differences feel
        // 0.1/dx^2, so the local residual must jump far above 0.05.
        let (k, j) = (20, 40);
        let bumped = s.values.get(k, j) + 0.1;
        s.values.set(k, j, bumped);
        let pert = viscosity_residual(&s, &model, &driver, &obstacle).unwrap();
        let local = pert.residuals.get(k, j).abs();
        assert!(local >= 0.05, "local residual {local}");
        assert!(pert.sup_norm > base.sup_norm * 5.0, "{} vs {}", pert.sup_norm, base.sup_norm);
    }
}
