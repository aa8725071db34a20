//! Payoff data of the stopping problem.
//!
//! The obstacle process is `hbar(s, X_s)` with
//! `hbar(t, x) = h(t, x)` for `t < T` and `hbar(T, x) = g(x)`; the
//! standing assumption `h(T, x) <= g(x)` makes the process
//! upper-semicontinuous at the horizon.

use std::sync::Arc;

use thiserror::Error;

use crate::model::ScalarFn;
use crate::numerics::linspace;

pub type PayoffFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

#[derive(Debug, Error)]
pub enum ObstacleError {
    #[error("terminal dominance h(T,x) <= g(x) fails at x={x}: h={h}, g={g}")]
    TerminalDominance { x: f64, h: f64, g: f64 },
    #[error("running payoff exceeds its growth bound at (t={t}, x={x}): |h|={value} > {bound}")]
    GrowthBound { t: f64, x: f64, value: f64, bound: f64 },
    #[error("invalid obstacle: {0}")]
    Invalid(String),
}

/// Running payoff `h`, terminal payoff `g`, horizon `T` and growth data.
#[derive(Clone)]
pub struct ObstacleSpec {
    pub h: PayoffFn,
    pub g: ScalarFn,
    pub horizon: f64,
    /// Exponent of the polynomial growth bound `|h| <= C (1 + |x|^p)`.
    pub growth_p: u32,
    /// Constant of the growth bound.
    pub growth_c: f64,
    /// Set when `h`, `g` (and the driver at the origin) are bounded, which
    /// upgrades the growth estimate to a boundedness estimate.
    pub bounded: bool,
}

impl std::fmt::Debug for ObstacleSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ObstacleSpec")
            .field("horizon", &self.horizon)
            .field("growth_p", &self.growth_p)
            .field("growth_c", &self.growth_c)
            .field("bounded", &self.bounded)
            .finish_non_exhaustive()
    }
}

/// Number of deterministic probe points used by the construction checks.
const N_PROBES: usize = 201;

impl ObstacleSpec {
    /// Validates `h(T, .) <= g` and the growth bound on a deterministic
    /// probe lattice over `probe_range`.
    pub fn new(
        h: PayoffFn,
        g: ScalarFn,
        horizon: f64,
        growth_p: u32,
        growth_c: f64,
        bounded: bool,
        probe_range: (f64, f64),
    ) -> Result<Self, ObstacleError> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(ObstacleError::Invalid(format!("horizon must be positive, got {horizon}")));
        }
        if probe_range.0 >= probe_range.1 {
            return Err(ObstacleError::Invalid("empty probe range".into()));
        }
        let xs = linspace(probe_range.0, probe_range.1, N_PROBES);
        for &x in &xs {
            let hv = h(horizon, x);
            let gv = g(x);
            if hv > gv + 1e-9 {
                return Err(ObstacleError::TerminalDominance { x, h: hv, g: gv });
            }
        }
        let ts = linspace(0.0, horizon, 21);
        for &t in &ts {
            for &x in &xs {
                let hv = h(t, x).abs();
                let bound = growth_c * (1.0 + x.abs().powi(growth_p as i32));
                if hv > bound + 1e-9 {
                    return Err(ObstacleError::GrowthBound { t, x, value: hv, bound });
                }
            }
        }
        Ok(Self { h, g, horizon, growth_p, growth_c, bounded })
    }

    /// American put payoff `h = g = (strike - x)^+`.
    pub fn put(strike: f64, horizon: f64, probe_range: (f64, f64)) -> Self {
        let h: PayoffFn = Arc::new(move |_, x: f64| (strike - x).max(0.0));
        let g: ScalarFn = Arc::new(move |x: f64| (strike - x).max(0.0));
        Self::new(h, g, horizon, 1, strike.abs().max(1.0), true, probe_range)
            .expect("put payoff satisfies its own bounds")
    }

    /// American call payoff `h = g = (x - strike)^+`.
    pub fn call(strike: f64, horizon: f64, probe_range: (f64, f64)) -> Self {
        let h: PayoffFn = Arc::new(move |_, x: f64| (x - strike).max(0.0));
        let g: ScalarFn = Arc::new(move |x: f64| (x - strike).max(0.0));
        Self::new(h, g, horizon, 1, strike.abs().max(1.0), false, probe_range)
            .expect("call payoff satisfies its own bounds")
    }

    /// Constant payoff `h = g = c`.
    pub fn constant(c: f64, horizon: f64) -> Self {
        let h: PayoffFn = Arc::new(move |_, _| c);
        let g: ScalarFn = Arc::new(move |_| c);
        Self::new(h, g, horizon, 0, c.abs().max(1.0), true, (-1.0, 1.0))
            .expect("constant payoff satisfies its own bounds")
    }

    /// The effective obstacle `hbar(t, x)`: the running payoff before the
    /// horizon, the terminal payoff at (or beyond) it.
    #[inline]
    pub fn h_bar(&self, t: f64, x: f64) -> f64 {
        if t >= self.horizon - 1e-12 * self.horizon.max(1.0) {
            (self.g)(x)
        } else {
            (self.h)(t, x)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn put_preset_constructs() {
        let ob = ObstacleSpec::put(1.0, 0.5, (0.0, 3.0));
        assert_eq!((ob.g)(0.4), 0.6);
        assert_eq!((ob.h)(0.1, 0.4), 0.6);
        assert_eq!(ob.h_bar(0.5, 0.4), 0.6);
        assert_eq!(ob.h_bar(0.1, 2.0), 0.0);
    }

    #[test]
    fn terminal_dominance_is_enforced() {
        let h: PayoffFn = Arc::new(|_, _| 2.0);
        let g: ScalarFn = Arc::new(|_| 1.0);
        let err = ObstacleSpec::new(h, g, 1.0, 0, 10.0, true, (-1.0, 1.0)).unwrap_err();
        assert!(matches!(err, ObstacleError::TerminalDominance { .. }));
    }

    #[test]
    fn growth_bound_is_enforced() {
        let h: PayoffFn = Arc::new(|_, x: f64| x * x * x * x);
        let g: ScalarFn = Arc::new(|x: f64| x * x * x * x);
        // Declared linear growth cannot hold for a quartic payoff.
        let err = ObstacleSpec::new(h, g, 1.0, 1, 1.0, false, (-5.0, 5.0)).unwrap_err();
        assert!(matches!(err, ObstacleError::GrowthBound { .. }));
    }

    #[test]
    fn h_bar_switches_at_the_horizon() {
        let h: PayoffFn = Arc::new(|_, _| 0.25);
        let g: ScalarFn = Arc::new(|_| 0.75);
        let ob = ObstacleSpec::new(h, g, 2.0, 0, 1.0, true, (-1.0, 1.0)).unwrap();
        assert_eq!(ob.h_bar(1.0, 0.0), 0.25);
        assert_eq!(ob.h_bar(2.0, 0.0), 0.75);
    }
}
