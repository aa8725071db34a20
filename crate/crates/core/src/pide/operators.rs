//! Discrete generator assembly.
//!
//! The generator splits as `L = A + K` with
//!
//! ```text
//! A phi = 1/2 sigma^2(x) phi_xx + b(x) phi_x
//! K phi = integral ( phi(t, x + beta(x,e)) - phi(t,x) - phi_x(t,x) beta(x,e) ) nu(de)
//! B phi = integral ( phi(t, x + beta(x,e)) - phi(t,x) ) gamma(x,e) nu(de)
//! ```
//!
//! `A` is discretized by central second differences and drift upwinded
//! by the sign of `b` (monotone rows). `K` and `B` distribute each
//! quadrature node's mass onto the two grid nodes bracketing the jump
//! target `x_j + beta(x_j, e_q)` by linear interpolation; the
//! `-phi_x beta` compensator of `K` is kept per node and applied as a
//! first difference at evaluation time. Off-domain targets follow the
//! grid's boundary mode.

use crate::driver::DriverSpec;
use crate::model::JumpDiffusionModel;

use super::grid::{BoundaryMode, PideError, SpaceGrid};

/// First-difference flavor used for the compensator term of `K`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DerivativeMode {
    /// Upwind by the sign of the coefficient (monotone; used by the solver).
    Upwind,
    /// Central differences (used by the residual checker).
    Centered,
}

/// Discrete `A`, `K`, `B` on one spatial grid.
#[derive(Clone, Debug)]
pub struct OperatorBundle {
    /// Tridiagonal discrete `A`; `a_sub[0]` and `a_sup[n-1]` are unused.
    pub a_sub: Vec<f64>,
    pub a_diag: Vec<f64>,
    pub a_sup: Vec<f64>,
    /// Per node: on-grid stencil of `K` without the compensator term
    /// (grid index, nu-weight), diagonal entry included.
    pub k_stencil: Vec<Vec<(usize, f64)>>,
    /// Per node: overshot jump targets `(x_target, nu-weight)` valued by
    /// the obstacle (DirichletObstacle mode only).
    pub k_offgrid: Vec<Vec<(f64, f64)>>,
    pub b_stencil: Vec<Vec<(usize, f64)>>,
    pub b_offgrid: Vec<Vec<(f64, f64)>>,
    /// `c_j = integral beta(x_j, e) nu(de)`, the compensator drift.
    pub compensator_drift: Vec<f64>,
    /// `integral nu(de)` per node (constant unless weights vary), for the
    /// CFL bound.
    pub k_mass: Vec<f64>,
    /// `integral gamma(x_j, e) nu(de)` per node, for the CFL bound.
    pub b_mass: Vec<f64>,
}

/// Distribute unit mass at `x_target` onto the grid, honoring the
/// boundary mode. Returns on-grid `(index, weight)` pairs or an off-grid
/// marker.
fn distribute(
    sgrid: &SpaceGrid,
    x_target: f64,
    weight: f64,
    on_grid: &mut Vec<(usize, f64)>,
    off_grid: &mut Vec<(f64, f64)>,
) {
    let n = sgrid.n_nodes;
    let dx = sgrid.dx();
    if x_target >= sgrid.x_min && x_target <= sgrid.x_max {
        let jf = (x_target - sgrid.x_min) / dx;
        let j = (jf.floor() as usize).min(n - 2);
        let theta = (jf - j as f64).clamp(0.0, 1.0);
        on_grid.push((j, weight * (1.0 - theta)));
        on_grid.push((j + 1, weight * theta));
        return;
    }
    match sgrid.boundary_mode {
        BoundaryMode::DirichletObstacle => off_grid.push((x_target, weight)),
        BoundaryMode::LinearExtrapolation => {
            // phi(x*) ~ phi(edge) + s (phi(edge) - phi(inner)), s >= 0.
            if x_target > sgrid.x_max {
                let s = (x_target - sgrid.x_max) / dx;
                on_grid.push((n - 1, weight * (1.0 + s)));
                on_grid.push((n - 2, -weight * s));
            } else {
                let s = (sgrid.x_min - x_target) / dx;
                on_grid.push((0, weight * (1.0 + s)));
                on_grid.push((1, -weight * s));
            }
        }
    }
}

/// Assemble the discrete operators for one model/driver pair.
pub fn assemble_operators(
    model: &JumpDiffusionModel,
    driver: &DriverSpec,
    sgrid: &SpaceGrid,
) -> Result<OperatorBundle, PideError> {
    let n = sgrid.n_nodes;
    let dx = sgrid.dx();
    let nodes = &sgrid.nodes;
    let quad = model.levy.nodes();

    let mut a_sub = vec![0.0; n];
    let mut a_diag = vec![0.0; n];
    let mut a_sup = vec![0.0; n];
    for j in 0..n {
        let x = nodes[j];
        let sig = (model.diffusion)(x);
        let b = (model.drift)(x);
        if j > 0 && j + 1 < n {
            let diff = 0.5 * sig * sig / (dx * dx);
            a_sub[j] += diff;
            a_diag[j] -= 2.0 * diff;
            a_sup[j] += diff;
            if b >= 0.0 {
                a_diag[j] -= b / dx;
                a_sup[j] += b / dx;
            } else {
                a_diag[j] += b / dx;
                a_sub[j] -= b / dx;
            }
        }
    }

    let mut k_stencil = Vec::with_capacity(n);
    let mut k_offgrid = Vec::with_capacity(n);
    let mut b_stencil = Vec::with_capacity(n);
    let mut b_offgrid = Vec::with_capacity(n);
    let mut compensator_drift = vec![0.0; n];
    let mut k_mass = vec![0.0; n];
    let mut b_mass = vec![0.0; n];

    let gamma = &driver.gamma;
    for j in 0..n {
        let x = nodes[j];
        let mut k_on: Vec<(usize, f64)> = Vec::new();
        let mut k_off: Vec<(f64, f64)> = Vec::new();
        let mut b_on: Vec<(usize, f64)> = Vec::new();
        let mut b_off: Vec<(f64, f64)> = Vec::new();
        let mut mass = 0.0;
        let mut gmass = 0.0;
        let mut comp = 0.0;
        for q in quad {
            let beta = (model.jump_size)(x, q.mark);
            let target = x + beta;
            if !target.is_finite() {
                return Err(PideError::Grid(format!(
                    "jump target from x = {x} with mark {} is not finite",
                    q.mark
                )));
            }
            distribute(sgrid, target, q.weight, &mut k_on, &mut k_off);
            mass += q.weight;
            comp += q.weight * beta;
            let gw = q.weight * gamma(x, q.mark);
            distribute(sgrid, target, gw, &mut b_on, &mut b_off);
            gmass += gw;
        }
        // The -phi(t, x) parts of K and B.
        k_on.push((j, -mass));
        b_on.push((j, -gmass));
        k_stencil.push(compress(k_on));
        b_stencil.push(compress(b_on));
        k_offgrid.push(k_off);
        b_offgrid.push(b_off);
        compensator_drift[j] = comp;
        k_mass[j] = mass;
        b_mass[j] = gmass;
    }

    Ok(OperatorBundle {
        a_sub,
        a_diag,
        a_sup,
        k_stencil,
        k_offgrid,
        b_stencil,
        b_offgrid,
        compensator_drift,
        k_mass,
        b_mass,
    })
}

/// Merge duplicate stencil indices.
fn compress(mut entries: Vec<(usize, f64)>) -> Vec<(usize, f64)> {
    entries.sort_by_key(|e| e.0);
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(entries.len());
    for (idx, w) in entries {
        match out.last_mut() {
            Some((last, acc)) if *last == idx => *acc += w,
            _ => out.push((idx, w)),
        }
    }
    out
}

impl OperatorBundle {
    /// Apply the local generator `A` to a grid row (interior nodes only;
    /// boundary entries are zero by construction).
    pub fn apply_a(&self, u: &[f64]) -> Vec<f64> {
        let n = u.len();
        let mut out = vec![0.0; n];
        for j in 1..n - 1 {
            out[j] = self.a_sub[j] * u[j - 1] + self.a_diag[j] * u[j] + self.a_sup[j] * u[j + 1];
        }
        out
    }

    /// Apply the nonlocal operator `K` to a grid row. `off_grid` values
    /// overshot jump targets (only consulted in DirichletObstacle mode);
    /// it must return a finite value.
    pub fn apply_k(
        &self,
        u: &[f64],
        dx: f64,
        off_grid: &dyn Fn(f64) -> f64,
        deriv: DerivativeMode,
    ) -> Result<Vec<f64>, PideError> {
        let n = u.len();
        let mut out = vec![0.0; n];
        for j in 0..n {
            let mut acc = 0.0;
            for &(idx, w) in &self.k_stencil[j] {
                acc += w * u[idx];
            }
            for &(x, w) in &self.k_offgrid[j] {
                let v = off_grid(x);
                if !v.is_finite() {
                    return Err(PideError::ObstacleUndefined { x });
                }
                acc += w * v;
            }
            // Compensator term -c_j phi_x.
            let c = self.compensator_drift[j];
            let du = first_difference(u, j, dx, -c, deriv);
            out[j] = acc - c * du;
        }
        Ok(out)
    }

    /// Apply the jump-sensitivity operator `B` to a grid row.
    pub fn apply_b(&self, u: &[f64], off_grid: &dyn Fn(f64) -> f64) -> Result<Vec<f64>, PideError> {
        let n = u.len();
        let mut out = vec![0.0; n];
        for j in 0..n {
            let mut acc = 0.0;
            for &(idx, w) in &self.b_stencil[j] {
                acc += w * u[idx];
            }
            for &(x, w) in &self.b_offgrid[j] {
                let v = off_grid(x);
                if !v.is_finite() {
                    return Err(PideError::ObstacleUndefined { x });
                }
                acc += w * v;
            }
            out[j] = acc;
        }
        Ok(out)
    }

    /// Worst-row bound of the explicitly treated terms, used by the CFL
    /// check: jump stencil mass, compensator first difference, and the
    /// driver's Lipschitz action on `(y, z, l)`.
    pub fn explicit_bound(&self, sigma_over_dx_max: f64, lip_c: f64, dx: f64) -> f64 {
        let mut bound = 0.0_f64;
        for j in 0..self.k_mass.len() {
            let row = 2.0 * self.k_mass[j]
                + self.compensator_drift[j].abs() / dx
                + lip_c * (1.0 + sigma_over_dx_max + 2.0 * self.b_mass[j]);
            bound = bound.max(row);
        }
        bound
    }
}

/// First difference of `u` at `j`; upwinding picks the direction by the
/// sign of `coeff` (the multiplier of `phi_x`).
fn first_difference(u: &[f64], j: usize, dx: f64, coeff: f64, deriv: DerivativeMode) -> f64 {
    let n = u.len();
    match deriv {
        DerivativeMode::Centered => {
            if j == 0 {
                (u[1] - u[0]) / dx
            } else if j == n - 1 {
                (u[n - 1] - u[n - 2]) / dx
            } else {
                (u[j + 1] - u[j - 1]) / (2.0 * dx)
            }
        }
        DerivativeMode::Upwind => {
            if coeff >= 0.0 {
                if j + 1 < n {
                    (u[j + 1] - u[j]) / dx
                } else {
                    (u[j] - u[j - 1]) / dx
                }
            } else if j > 0 {
                (u[j] - u[j - 1]) / dx
            } else {
                (u[1] - u[0]) / dx
            }
        }
    }
}
