//! BSDE generator (driver) and its assumption validators.
//!
//! The driver `f(t, x, y, z, k)` acts on a jump component `k` that is a
//! function of the mark. In the scalar form used by both engines it
//! reduces through the jump-comparison weight `gamma`:
//!
//! ```text
//! f(t, x, y, z, k) = fbar(t, x, y, z, <k, gamma(x, .)>_nu),
//! <k, gamma>_nu = integral k(e) gamma(x, e) nu(de),
//! ```
//!
//! with `fbar` Lipschitz in `(y, z, l)`, nondecreasing in `l`, and
//! `0 <= gamma(x, e) <= C (1 ^ |e|)`. The weaker one-sided bound
//! `gamma >= -1` is tolerated by the Monte Carlo engine
//! ([`KernelMode::GeneralL2Nu`]); the deterministic engine requires the
//! scalar form.

use std::sync::Arc;

use thiserror::Error;

use crate::model::{LevyMeasure, MarkFn, ModelError, PROBE_TOL};
use crate::rng::{stream, Channel};

/// Scalar-form generator `(t, x, y, z, l) -> fbar`.
pub type DriverFn = Arc<dyn Fn(f64, f64, f64, f64, f64) -> f64 + Send + Sync>;

#[derive(Debug, Error)]
pub enum DriverError {
    #[error("driver returned non-finite value at t={t}, x={x}")]
    NonFinite { t: f64, x: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Generator data: the scalar form `fbar`, the jump weight `gamma`, and
/// the assumption constants.
#[derive(Clone)]
pub struct DriverSpec {
    pub f_bar: DriverFn,
    pub gamma: MarkFn,
    /// Lipschitz constant of `fbar` in `(y, z, l)`; also bounds `gamma`.
    pub lipschitz_c: f64,
    /// One-sided monotonicity rate in `y`:
    /// `fbar(.., v, ..) - fbar(.., u, ..) >= r (u - v)` for `u >= v`.
    pub monotone_r: f64,
    /// Polynomial growth exponent of `fbar(t, x, 0, 0, 0)` in `x`.
    pub growth_p: u32,
}

impl std::fmt::Debug for DriverSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DriverSpec")
            .field("lipschitz_c", &self.lipschitz_c)
            .field("monotone_r", &self.monotone_r)
            .field("growth_p", &self.growth_p)
            .finish_non_exhaustive()
    }
}

/// `gamma(x, e) = 1 ^ |e|`, the saturating weight.
pub fn gamma_cap() -> MarkFn {
    Arc::new(|_, e: f64| 1.0_f64.min(e.abs()))
}

/// `gamma = 0`: the driver ignores the jump component.
pub fn gamma_zero() -> MarkFn {
    Arc::new(|_, _| 0.0)
}

impl DriverSpec {
    /// `fbar = 0`.
    pub fn zero() -> Self {
        Self {
            f_bar: Arc::new(|_, _, _, _, _| 0.0),
            gamma: gamma_zero(),
            lipschitz_c: 1.0,
            monotone_r: 0.0,
            growth_p: 0,
        }
    }

    /// Linear discounting, `fbar = -rho y`.
    pub fn discount(rho: f64) -> Self {
        Self {
            f_bar: Arc::new(move |_, _, y, _, _| -rho * y),
            gamma: gamma_zero(),
            lipschitz_c: rho.abs().max(1e-6),
            monotone_r: rho,
            growth_p: 0,
        }
    }

    /// Ambiguity-averse discounting, `fbar = -rho y + kappa |z|`.
    pub fn ambiguity(rho: f64, kappa: f64) -> Self {
        Self {
            f_bar: Arc::new(move |_, _, y, z: f64, _| -rho * y + kappa * z.abs()),
            gamma: gamma_zero(),
            lipschitz_c: (rho.abs() + kappa.abs()).max(1e-6),
            monotone_r: rho,
            growth_p: 0,
        }
    }

    /// Jump-sensitive discounting, `fbar = -rho y + a l` with `a >= 0`
    /// and `gamma = 1 ^ |e|`.
    pub fn jump_sensitive(rho: f64, a: f64) -> Self {
        Self::mixed(rho, 0.0, a)
    }

    /// `fbar = -rho y + kappa |z| + a l` with `gamma = 1 ^ |e|`.
    ///
    /// `lipschitz_c` also caps `gamma`, hence the lower bound of 1.
    pub fn mixed(rho: f64, kappa: f64, a: f64) -> Self {
        assert!(a >= 0.0, "jump weight must be nonnegative for monotonicity in l");
        Self {
            f_bar: Arc::new(move |_, _, y, z: f64, l| -rho * y + kappa * z.abs() + a * l),
            gamma: gamma_cap(),
            lipschitz_c: (rho.abs() + kappa.abs() + a).max(1.0),
            monotone_r: rho,
            growth_p: 0,
        }
    }
}

/// How the jump argument of the driver is interpreted.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelMode {
    /// Scalar form: `k` enters only through `<k, gamma(x,.)>_nu`.
    /// Required by the deterministic engine; assumes `gamma >= 0`.
    ScalarH2,
    /// General form with `k` in `L^2_nu` and `gamma >= -1` allowed.
    /// Supported by the Monte Carlo engine only.
    GeneralL2Nu,
}

/// A driver together with its kernel mode.
#[derive(Clone, Debug)]
pub struct FullDriver {
    pub spec: DriverSpec,
    pub mode: KernelMode,
}

impl FullDriver {
    pub fn scalar(spec: DriverSpec) -> Self {
        Self { spec, mode: KernelMode::ScalarH2 }
    }

    pub fn general(spec: DriverSpec) -> Self {
        Self { spec, mode: KernelMode::GeneralL2Nu }
    }

    /// Evaluate with a mark-resolved jump component `k`:
    /// reduces to `fbar(t, x, y, z, <k, gamma(x,.)>_nu)` in either mode,
    /// sharing the quadrature path with every other nu-integral.
    pub fn eval<F: Fn(f64) -> f64>(
        &self,
        levy: &LevyMeasure,
        t: f64,
        x: f64,
        y: f64,
        z: f64,
        k: F,
    ) -> Result<f64, DriverError> {
        let gamma = &self.spec.gamma;
        let l = levy.integrate(|e| k(e) * gamma(x, e))?;
        let v = (self.spec.f_bar)(t, x, y, z, l);
        if !v.is_finite() {
            return Err(DriverError::NonFinite { t, x });
        }
        Ok(v)
    }

    /// Evaluate the scalar form directly.
    #[inline]
    pub fn eval_scalar(&self, t: f64, x: f64, y: f64, z: f64, l: f64) -> f64 {
        (self.spec.f_bar)(t, x, y, z, l)
    }
}

/// Which driver assumption a probe violated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DriverBound {
    /// `0 <= gamma(x,e) <= C (1 ^ |e|)`
    GammaBound,
    /// `|gamma(x,e) - gamma(x',e)| <= C |x-x'| (1 ^ e^2)`
    GammaLipschitz,
    /// `l -> fbar` nondecreasing
    JumpMonotonicity,
    /// Lipschitz in `(y, z, l)` with constant `C`
    YzlLipschitz,
    /// `fbar(.., v, ..) - fbar(.., u, ..) >= r (u - v)` for `u >= v`
    YMonotonicity,
    /// empirical continuity in `x`
    XContinuity,
}

#[derive(Clone, Debug)]
pub struct DriverViolation {
    pub bound: DriverBound,
    pub t: f64,
    pub x: f64,
    pub lhs: f64,
    pub rhs: f64,
}

/// Probe the driver assumptions on `n_probes` random points.
/// Deterministic given the seed; empty means no violation beyond
/// [`PROBE_TOL`]. State probes are uniform on [-10, 10], time probes on
/// [0, 1], `(y, z, l)` probes on [-10, 10]^3.
pub fn validate_driver(spec: &DriverSpec, n_probes: usize, seed: u64) -> Vec<DriverViolation> {
    let mut violations = Vec::new();
    let c = spec.lipschitz_c;
    let r = spec.monotone_r;
    let f = &spec.f_bar;
    let gamma = &spec.gamma;
    let mut push = |bound, t, x, lhs, rhs| {
        violations.push(DriverViolation { bound, t, x, lhs, rhs });
    };

    for i in 0..n_probes {
        let mut rng = stream(seed, i as u64, 1, Channel::Probe);
        let t = rng.next_f64();
        let x = rng.next_range(-10.0, 10.0);
        let x2 = rng.next_range(-10.0, 10.0);
        let y = rng.next_range(-10.0, 10.0);
        let z = rng.next_range(-10.0, 10.0);
        let l = rng.next_range(-10.0, 10.0);
        // Log-uniform mark magnitude in [1e-2, 10^0.5], random sign.
        let e = {
            let mag = 10f64.powf(rng.next_range(-2.0, 0.5));
            if rng.next_f64() < 0.5 {
                -mag
            } else {
                mag
            }
        };

        let g = gamma(x, e);
        let cap = c * 1.0_f64.min(e.abs());
        if !(-PROBE_TOL..=cap + PROBE_TOL).contains(&g) {
            push(DriverBound::GammaBound, t, x, g, cap);
        }
        let dg = (gamma(x, e) - gamma(x2, e)).abs();
        let glip = c * (x - x2).abs() * 1.0_f64.min(e * e) + PROBE_TOL;
        if dg > glip {
            push(DriverBound::GammaLipschitz, t, x, dg, glip);
        }

        let dl = rng.next_range(0.0, 5.0);
        if f(t, x, y, z, l + dl) < f(t, x, y, z, l) - PROBE_TOL {
            push(DriverBound::JumpMonotonicity, t, x, f(t, x, y, z, l + dl), f(t, x, y, z, l));
        }

        let y2 = rng.next_range(-10.0, 10.0);
        let z2 = rng.next_range(-10.0, 10.0);
        let l2 = rng.next_range(-10.0, 10.0);
        let df = (f(t, x, y, z, l) - f(t, x, y2, z2, l2)).abs();
        let lip = c * ((y - y2).abs() + (z - z2).abs() + (l - l2).abs()) + PROBE_TOL;
        if df > lip {
            push(DriverBound::YzlLipschitz, t, x, df, lip);
        }

        let (u, v) = if y >= y2 { (y, y2) } else { (y2, y) };
        let lhs = f(t, x, v, z, l) - f(t, x, u, z, l);
        let need = r * (u - v) - PROBE_TOL;
        if lhs < need {
            push(DriverBound::YMonotonicity, t, x, lhs, need);
        }

        // Empirical x-continuity: a vanishing increment must not move
        // fbar by an O(1) amount.
        let small = (f(t, x + 1e-6, y, z, l) - f(t, x, y, z, l)).abs();
        if small > 1e-3 * (1.0 + f(t, x, y, z, l).abs()) {
            push(DriverBound::XContinuity, t, x, small, 1e-3);
        }
    }
    violations
}
