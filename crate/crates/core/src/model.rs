//! Jump-diffusion state dynamics
//!
//! ```text
//! dX_s = b(X_s) ds + sigma(X_s) dW_s + integral beta(X_{s-}, e) Ntilde(ds, de)
//! ```
//!
//! with `Ntilde` a compensated Poisson random measure whose Levy measure
//! `nu` lives on the punctured real line and satisfies
//! `integral (1 ^ e^2) nu(de) < infinity`. The measure is represented by
//! a finite set of quadrature nodes (atoms pass through exactly, densities
//! are discretized by the midpoint rule), so every `integral . nu(de)` in
//! the solvers is a finite weighted sum. Infinite-activity measures must
//! be truncated away from zero before being handed to this module.

use std::sync::Arc;

use thiserror::Error;

use crate::rng::{stream, Channel};

/// Coefficient function of the state only.
pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
/// Coefficient function of state and jump mark, e.g. `beta(x, e)`.
pub type MarkFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Probe tolerance for the statistical coefficient checks.
pub const PROBE_TOL: f64 = 1e-9;
/// Probe box for state arguments in the coefficient checks.
pub const PROBE_BOX: (f64, f64) = (-10.0, 10.0);

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid Levy measure: {0}")]
    InvalidMeasure(String),
    #[error("non-finite integrand value {value} at mark {mark}")]
    NonFiniteIntegrand { mark: f64, value: f64 },
    #[error("invalid model: {0}")]
    InvalidModel(String),
}

/// One discrete mass point of the (discretized) Levy measure.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadNode {
    /// Jump mark `e != 0`.
    pub mark: f64,
    /// nu-mass carried by this node.
    pub weight: f64,
}

/// Finite-activity Levy measure given by quadrature nodes.
///
/// All nonlocal integrals in the solvers evaluate against these nodes,
/// so the probabilistic and the deterministic engine see bit-identical
/// jump statistics.
#[derive(Clone, Debug)]
pub struct LevyMeasure {
    nodes: Vec<QuadNode>,
    total_intensity: f64,
}

impl LevyMeasure {
    /// Measure with no jump activity.
    pub fn none() -> Self {
        Self { nodes: Vec::new(), total_intensity: 0.0 }
    }

    /// Discrete measure from explicit atoms `(mark, mass)`.
    pub fn from_atoms(atoms: &[(f64, f64)]) -> Result<Self, ModelError> {
        let mut nodes = Vec::with_capacity(atoms.len());
        for &(mark, weight) in atoms {
            if !mark.is_finite() || mark == 0.0 {
                return Err(ModelError::InvalidMeasure(format!(
                    "atom mark must be finite and nonzero, got {mark}"
                )));
            }
            if !weight.is_finite() || weight <= 0.0 {
                return Err(ModelError::InvalidMeasure(format!(
                    "atom weight must be positive, got {weight}"
                )));
            }
            nodes.push(QuadNode { mark, weight });
        }
        let total_intensity = nodes.iter().map(|n| n.weight).sum();
        Ok(Self { nodes, total_intensity })
    }

    /// Midpoint-rule discretization of a density on `[lo, hi]`, a support
    /// interval that must not contain zero. Deterministic for identical
    /// inputs.
    pub fn from_density<F: Fn(f64) -> f64>(
        density: F,
        support: (f64, f64),
        n_quad: usize,
    ) -> Result<Self, ModelError> {
        let (lo, hi) = support;
        if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
            return Err(ModelError::InvalidMeasure(format!(
                "support must be a finite interval with lo < hi, got [{lo}, {hi}]"
            )));
        }
        if lo <= 0.0 && hi >= 0.0 {
            return Err(ModelError::InvalidMeasure(format!(
                "support [{lo}, {hi}] contains zero; truncate the measure away from the origin"
            )));
        }
        if n_quad == 0 {
            return Err(ModelError::InvalidMeasure("n_quad must be at least 1".into()));
        }
        let width = (hi - lo) / n_quad as f64;
        let mut nodes = Vec::with_capacity(n_quad);
        for i in 0..n_quad {
            let mark = lo + (i as f64 + 0.5) * width;
            let d = density(mark);
            if !d.is_finite() || d < 0.0 {
                return Err(ModelError::InvalidMeasure(format!(
                    "density must be finite and nonnegative, got {d} at {mark}"
                )));
            }
            if d > 0.0 {
                nodes.push(QuadNode { mark, weight: d * width });
            }
        }
        let total_intensity = nodes.iter().map(|n| n.weight).sum();
        Ok(Self { nodes, total_intensity })
    }

    /// Union of two measures (atom lists concatenate). Used to assemble
    /// two-sided supports from one-sided pieces.
    pub fn union(a: &LevyMeasure, b: &LevyMeasure) -> Self {
        let mut nodes = a.nodes.clone();
        nodes.extend_from_slice(&b.nodes);
        let total_intensity = a.total_intensity + b.total_intensity;
        Self { nodes, total_intensity }
    }

    pub fn nodes(&self) -> &[QuadNode] {
        &self.nodes
    }

    /// Total mass `lambda = nu(R*)`, jumps per unit time.
    pub fn total_intensity(&self) -> f64 {
        self.total_intensity
    }

    /// `integral f(e) nu(de)` over the quadrature nodes.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> Result<f64, ModelError> {
        let mut sum = 0.0;
        for n in &self.nodes {
            let v = f(n.mark);
            if !v.is_finite() {
                return Err(ModelError::NonFiniteIntegrand { mark: n.mark, value: v });
            }
            sum += n.weight * v;
        }
        Ok(sum)
    }
}

/// State dynamics: drift `b`, diffusion `sigma`, jump size `beta` and the
/// Levy measure, together with the common Lipschitz/bound constant `C`
/// (so `|beta(x,e)| <= C (1 ^ |e|)` and `b`, `sigma` are C-Lipschitz) and
/// the terminal horizon `T`.
#[derive(Clone)]
pub struct JumpDiffusionModel {
    pub drift: ScalarFn,
    pub diffusion: ScalarFn,
    pub jump_size: MarkFn,
    pub levy: LevyMeasure,
    pub lipschitz_c: f64,
    pub horizon: f64,
}

impl JumpDiffusionModel {
    pub fn new(
        drift: ScalarFn,
        diffusion: ScalarFn,
        jump_size: MarkFn,
        levy: LevyMeasure,
        lipschitz_c: f64,
        horizon: f64,
    ) -> Result<Self, ModelError> {
        if !(lipschitz_c.is_finite() && lipschitz_c > 0.0) {
            return Err(ModelError::InvalidModel(format!(
                "lipschitz_c must be positive, got {lipschitz_c}"
            )));
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(ModelError::InvalidModel(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        Ok(Self { drift, diffusion, jump_size, levy, lipschitz_c, horizon })
    }

    /// `integral beta(x, e) nu(de)`, the exact compensator drift used by
    /// the Euler scheme and the jump operator stencils.
    pub fn jump_compensator(&self, x: f64) -> Result<f64, ModelError> {
        self.levy.integrate(|e| (self.jump_size)(x, e))
    }
}

impl std::fmt::Debug for JumpDiffusionModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("JumpDiffusionModel")
            .field("levy", &self.levy)
            .field("lipschitz_c", &self.lipschitz_c)
            .field("horizon", &self.horizon)
            .finish_non_exhaustive()
    }
}

/// Which coefficient bound a probe violated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoefficientBound {
    /// `|beta(x,e)| <= C (1 ^ |e|)`
    JumpSizeBound,
    /// `|beta(x,e) - beta(x',e)| <= C |x-x'| (1 ^ |e|)`
    JumpSizeLipschitz,
    /// `|b(x) - b(x')| <= C |x-x'|`
    DriftLipschitz,
    /// `|sigma(x) - sigma(x')| <= C |x-x'|`
    DiffusionLipschitz,
}

#[derive(Clone, Debug)]
pub struct CoefficientViolation {
    pub bound: CoefficientBound,
    pub x: f64,
    pub x_alt: f64,
    pub mark: Option<f64>,
    pub lhs: f64,
    pub rhs: f64,
}

/// Statistically probe the coefficient bounds on `n_probes` random
/// `(x, x', e)` triples; marks are drawn from the quadrature support.
/// Deterministic for a given seed; an empty result means no violation
/// was found within [`PROBE_TOL`].
pub fn validate_coefficients(
    model: &JumpDiffusionModel,
    n_probes: usize,
    seed: u64,
) -> Vec<CoefficientViolation> {
    let mut violations = Vec::new();
    let c = model.lipschitz_c;
    let nodes = model.levy.nodes();
    for i in 0..n_probes {
        let mut rng = stream(seed, i as u64, 0, Channel::Probe);
        let x = rng.next_range(PROBE_BOX.0, PROBE_BOX.1);
        let x_alt = rng.next_range(PROBE_BOX.0, PROBE_BOX.1);

        let db = ((model.drift)(x) - (model.drift)(x_alt)).abs();
        let bound = c * (x - x_alt).abs() + PROBE_TOL;
        if db > bound {
            violations.push(CoefficientViolation {
                bound: CoefficientBound::DriftLipschitz,
                x,
                x_alt,
                mark: None,
                lhs: db,
                rhs: bound,
            });
        }
        let ds = ((model.diffusion)(x) - (model.diffusion)(x_alt)).abs();
        if ds > bound {
            violations.push(CoefficientViolation {
                bound: CoefficientBound::DiffusionLipschitz,
                x,
                x_alt,
                mark: None,
                lhs: ds,
                rhs: bound,
            });
        }

        if !nodes.is_empty() {
            let idx = (rng.next_raw() % nodes.len() as u64) as usize;
            let e = nodes[idx].mark;
            let cap = 1.0_f64.min(e.abs());
            let beta = (model.jump_size)(x, e);
            if beta.abs() > c * cap + PROBE_TOL {
                violations.push(CoefficientViolation {
                    bound: CoefficientBound::JumpSizeBound,
                    x,
                    x_alt,
                    mark: Some(e),
                    lhs: beta.abs(),
                    rhs: c * cap,
                });
            }
            let dbeta = (beta - (model.jump_size)(x_alt, e)).abs();
            let lip = c * (x - x_alt).abs() * cap + PROBE_TOL;
            if dbeta > lip {
                violations.push(CoefficientViolation {
                    bound: CoefficientBound::JumpSizeLipschitz,
                    x,
                    x_alt,
                    mark: Some(e),
                    lhs: dbeta,
                    rhs: lip,
                });
            }
        }
    }
    violations
}
