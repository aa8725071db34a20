//! Euler simulation of the jump-diffusion state process.
//!
//! One explicit Euler step with exact compensator drift:
//!
//! ```text
//! X_{k+1} = X_k + b(X_k) dt + sigma(X_k) dW_k
//!           + sum of beta(X_k, e_i) over jumps realized in the step
//!           - dt * integral beta(X_k, e) nu(de)
//! ```
//!
//! The jump size is evaluated at the step's starting state (left-point
//! rule for the predictable integrand), the jump count per step is
//! Poisson with mean `lambda dt`, marks are i.i.d. from the normalized
//! quadrature weights, and the compensator is integrated exactly on the
//! quadrature nodes rather than simulated.

use rand::Rng;
use rand_distr::{Poisson, StandardNormal};
use rayon::prelude::*;
use thiserror::Error;

use crate::matrix::Mat;
use crate::model::{JumpDiffusionModel, ModelError};
use crate::rng::{stream, Channel};

#[derive(Debug, Error)]
pub enum PathError {
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),
    #[error("euler step produced a non-finite state from x={x}, dt={dt}")]
    NonFinite { x: f64, dt: f64 },
    #[error("grid starts at {grid_t0} but the simulation was asked to start at {t0}")]
    GridMismatch { grid_t0: f64, t0: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Uniform time grid on `[t0, t_end]`.
#[derive(Clone, Debug)]
pub struct TimeGrid {
    t0: f64,
    t_end: f64,
    n_steps: usize,
    points: Vec<f64>,
}

impl TimeGrid {
    pub fn new(t0: f64, t_end: f64, n_steps: usize) -> Result<Self, PathError> {
        if !(t0.is_finite() && t_end.is_finite()) || t_end <= t0 {
            return Err(PathError::InvalidGrid(format!(
                "need finite t0 < t_end, got [{t0}, {t_end}]"
            )));
        }
        if n_steps == 0 {
            return Err(PathError::InvalidGrid("n_steps must be at least 1".into()));
        }
        let dt = (t_end - t0) / n_steps as f64;
        let points = (0..=n_steps)
            .map(|k| if k == n_steps { t_end } else { t0 + k as f64 * dt })
            .collect();
        Ok(Self { t0, t_end, n_steps, points })
    }

    #[inline]
    pub fn t0(&self) -> f64 {
        self.t0
    }

    #[inline]
    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    #[inline]
    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    #[inline]
    pub fn dt(&self) -> f64 {
        (self.t_end - self.t0) / self.n_steps as f64
    }

    #[inline]
    pub fn point(&self, k: usize) -> f64 {
        self.points[k]
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }
}

/// One realized jump: at which step it occurred and its mark.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JumpEvent {
    pub step: u32,
    pub mark: f64,
}

/// Simulated trajectories with everything needed to replay them.
#[derive(Clone, Debug)]
pub struct PathBundle {
    pub grid: TimeGrid,
    pub n_paths: usize,
    /// `[n_paths x (n_steps + 1)]` state values.
    pub states: Mat,
    /// `[n_paths x n_steps]` Brownian increments.
    pub brownian: Mat,
    /// Per path, realized jumps sorted by step.
    pub jumps: Vec<Vec<JumpEvent>>,
    pub seed: u64,
}

impl PathBundle {
    /// Jumps of path `p` realized during step `k`.
    pub fn jumps_at(&self, p: usize, k: usize) -> &[JumpEvent] {
        let events = &self.jumps[p];
        let lo = events.partition_point(|e| (e.step as usize) < k);
        let hi = events.partition_point(|e| (e.step as usize) <= k);
        &events[lo..hi]
    }
}

/// One explicit Euler step. `jumps` lists `(mark, count)` pairs realized
/// during the step; the compensator drift is integrated exactly.
pub fn euler_step(
    model: &JumpDiffusionModel,
    x: f64,
    dt: f64,
    dw: f64,
    jumps: &[(f64, u32)],
) -> Result<f64, PathError> {
    debug_assert!(dt > 0.0);
    let mut next = x + (model.drift)(x) * dt + (model.diffusion)(x) * dw;
    for &(mark, count) in jumps {
        next += count as f64 * (model.jump_size)(x, mark);
    }
    next -= dt * model.jump_compensator(x)?;
    if !next.is_finite() {
        return Err(PathError::NonFinite { x, dt });
    }
    Ok(next)
}

/// Simulate `n_paths` trajectories from `(t0, x0)`.
///
/// Per-path randomness is keyed by `(seed, path, step, channel)`, so the
/// output is bit-identical for identical inputs regardless of how many
/// worker threads are used.
pub fn simulate(
    model: &JumpDiffusionModel,
    t0: f64,
    x0: f64,
    grid: &TimeGrid,
    n_paths: usize,
    seed: u64,
) -> Result<PathBundle, PathError> {
    if (grid.t0() - t0).abs() > 1e-12 * (1.0 + t0.abs()) {
        return Err(PathError::GridMismatch { grid_t0: grid.t0(), t0 });
    }
    let n = grid.n_steps();
    let dt = grid.dt();
    let sqrt_dt = dt.sqrt();
    let lambda = model.levy.total_intensity();
    let jump_mean = lambda * dt;
    let poisson = if jump_mean > 0.0 { Some(Poisson::new(jump_mean).expect("positive mean")) } else { None };
    // Cumulative node weights for mark sampling.
    let nodes = model.levy.nodes();
    let cum: Vec<f64> = nodes
        .iter()
        .scan(0.0, |acc, node| {
            *acc += node.weight;
            Some(*acc)
        })
        .collect();

    type PathRow = (Vec<f64>, Vec<f64>, Vec<JumpEvent>);
    let rows: Vec<Result<PathRow, PathError>> = (0..n_paths)
        .into_par_iter()
        .map(|p| {
            let mut states = Vec::with_capacity(n + 1);
            let mut brownian = Vec::with_capacity(n);
            let mut events: Vec<JumpEvent> = Vec::new();
            let mut step_jumps: Vec<(f64, u32)> = Vec::new();
            let mut x = x0;
            states.push(x);
            for k in 0..n {
                let mut grng = stream(seed, p as u64, k as u64, Channel::Gaussian);
                let gauss: f64 = grng.sample(StandardNormal);
                let dw = sqrt_dt * gauss;

                step_jumps.clear();
                if let Some(poisson) = &poisson {
                    let mut prng = stream(seed, p as u64, k as u64, Channel::Poisson);
                    let count: f64 = prng.sample(*poisson);
                    let count = count as u32;
                    if count > 0 {
                        let mut mrng = stream(seed, p as u64, k as u64, Channel::Mark);
                        for _ in 0..count {
                            let u = mrng.next_range(0.0, lambda);
                            let idx = cum.partition_point(|c| *c < u).min(nodes.len() - 1);
                            let mark = nodes[idx].mark;
                            step_jumps.push((mark, 1));
                            events.push(JumpEvent { step: k as u32, mark });
                        }
                    }
                }

                x = euler_step(model, x, dt, dw, &step_jumps)?;
                states.push(x);
                brownian.push(dw);
            }
            Ok((states, brownian, events))
        })
        .collect();

    let mut states = Mat::zeros(n_paths, n + 1);
    let mut brownian = Mat::zeros(n_paths, n);
    let mut jumps = Vec::with_capacity(n_paths);
    for (p, row) in rows.into_iter().enumerate() {
        let (s, b, e) = row?;
        states.row_mut(p).copy_from_slice(&s);
        brownian.row_mut(p).copy_from_slice(&b);
        jumps.push(e);
    }
    Ok(PathBundle { grid: grid.clone(), n_paths, states, brownian, jumps, seed })
}
