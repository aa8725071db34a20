//! Spatial grid and value surface of the deterministic engine.

use thiserror::Error;

use crate::matrix::Mat;
use crate::numerics::linspace;
use crate::paths::TimeGrid;

#[derive(Debug, Error)]
pub enum PideError {
    #[error("invalid space grid: {0}")]
    Grid(String),
    #[error("explicit part violates the CFL bound: dt = {dt}, required dt < {required}")]
    CflViolation { dt: f64, required: f64 },
    #[error("tridiagonal solve failed at step {step}: singular operator")]
    SingularOperator { step: usize },
    #[error("the deterministic engine requires the scalar-jump driver form")]
    RequiresScalarDriver,
    #[error("obstacle undefined at off-grid jump target x = {x}")]
    ObstacleUndefined { x: f64 },
    #[error("point (t={t}, x={x}) is outside the surface domain")]
    OutsideDomain { t: f64, x: f64 },
}

/// How jump targets beyond the truncated domain are valued, and how the
/// two boundary rows evolve.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryMode {
    /// Boundary rows pinned to the obstacle; overshot jump targets read
    /// the obstacle value at the target. Natural for payoffs that
    /// dominate the value near the truncation (puts, calls).
    DirichletObstacle,
    /// Boundary rows and overshot jump targets extrapolate linearly from
    /// the outermost interior values. For problems without a binding
    /// obstacle near the truncation.
    LinearExtrapolation,
}

/// Uniform spatial grid on `[x_min, x_max]`.
#[derive(Clone, Debug)]
pub struct SpaceGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub n_nodes: usize,
    pub nodes: Vec<f64>,
    pub boundary_mode: BoundaryMode,
}

impl SpaceGrid {
    pub fn new(
        x_min: f64,
        x_max: f64,
        n_nodes: usize,
        boundary_mode: BoundaryMode,
    ) -> Result<Self, PideError> {
        if !(x_min.is_finite() && x_max.is_finite() && x_min < x_max) {
            return Err(PideError::Grid(format!("need x_min < x_max, got [{x_min}, {x_max}]")));
        }
        if n_nodes < 3 {
            return Err(PideError::Grid(format!("need at least 3 nodes, got {n_nodes}")));
        }
        Ok(Self { x_min, x_max, n_nodes, nodes: linspace(x_min, x_max, n_nodes), boundary_mode })
    }

    #[inline]
    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n_nodes - 1) as f64
    }
}

/// Grid function `u(t_k, x_j)` produced by the obstacle-problem solver.
#[derive(Clone, Debug)]
pub struct ValueSurface {
    pub tgrid: TimeGrid,
    pub sgrid: SpaceGrid,
    /// `[(n_steps + 1) x n_nodes]`, row `k` is `u(t_k, .)`.
    pub values: Mat,
}

impl ValueSurface {
    #[inline]
    pub fn value(&self, k: usize, j: usize) -> f64 {
        self.values.get(k, j)
    }

    /// Bilinear interpolation inside the domain.
    pub fn interpolate(&self, t: f64, x: f64) -> Result<f64, PideError> {
        let t0 = self.tgrid.t0();
        let t_end = self.tgrid.t_end();
        let eps_t = 1e-12 * (1.0 + t_end.abs());
        let eps_x = 1e-12 * (1.0 + self.sgrid.x_max.abs());
        if t < t0 - eps_t || t > t_end + eps_t || x < self.sgrid.x_min - eps_x
            || x > self.sgrid.x_max + eps_x
        {
            return Err(PideError::OutsideDomain { t, x });
        }
        let dt = self.tgrid.dt();
        let dx = self.sgrid.dx();
        let n = self.tgrid.n_steps();
        let m = self.sgrid.n_nodes;
        let kf = ((t - t0) / dt).clamp(0.0, n as f64);
        let jf = ((x - self.sgrid.x_min) / dx).clamp(0.0, (m - 1) as f64);
        let k = (kf.floor() as usize).min(n - 1).min(n.saturating_sub(1));
        let j = (jf.floor() as usize).min(m - 2);
        let wt = (kf - k as f64).clamp(0.0, 1.0);
        let wx = (jf - j as f64).clamp(0.0, 1.0);
        Ok(self.values.get(k, j) * (1.0 - wt) * (1.0 - wx)
            + self.values.get(k, j + 1) * (1.0 - wt) * wx
            + self.values.get(k + 1, j) * wt * (1.0 - wx)
            + self.values.get(k + 1, j + 1) * wt * wx)
    }
}
