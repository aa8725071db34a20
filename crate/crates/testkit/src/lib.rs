//! Independent pricing oracles used by the test suites.
//!
//! Everything here is deliberately written from first principles and
//! shares no code with the solver crates, so a bug in the solvers cannot
//! hide in the oracle.

/// Cox-Ross-Rubinstein binomial value of an American option.
///
/// Backward Snell recursion on the recombining tree
/// `u = exp(sigma sqrt(dt))`, `d = 1/u`,
/// `p = (exp(r dt) - d) / (u - d)`:
///
/// ```text
/// V_N = payoff(S_N)
/// V_k = max(payoff(S_k), exp(-r dt) (p V_{k+1}^up + (1-p) V_{k+1}^down))
/// ```
pub fn crr_american(
    spot: f64,
    strike: f64,
    rate: f64,
    sigma: f64,
    maturity: f64,
    steps: usize,
    is_put: bool,
) -> f64 {
    assert!(spot > 0.0 && strike > 0.0 && sigma > 0.0 && maturity > 0.0 && steps > 0);
    let dt = maturity / steps as f64;
    let up = (sigma * dt.sqrt()).exp();
    let down = 1.0 / up;
    let disc = (-rate * dt).exp();
    let p = ((rate * dt).exp() - down) / (up - down);
    assert!((0.0..=1.0).contains(&p), "degenerate tree: p = {p}");

    let payoff = |s: f64| if is_put { (strike - s).max(0.0) } else { (s - strike).max(0.0) };

    let mut values: Vec<f64> = (0..=steps)
        .map(|j| payoff(spot * up.powi(j as i32) * down.powi((steps - j) as i32)))
        .collect();
    for k in (0..steps).rev() {
        for j in 0..=k {
            let s = spot * up.powi(j as i32) * down.powi((k - j) as i32);
            let cont = disc * (p * values[j + 1] + (1.0 - p) * values[j]);
            values[j] = cont.max(payoff(s));
        }
    }
    values[0]
}

pub fn crr_american_put(
    spot: f64,
    strike: f64,
    rate: f64,
    sigma: f64,
    maturity: f64,
    steps: usize,
) -> f64 {
    crr_american(spot, strike, rate, sigma, maturity, steps, true)
}

/// Exercise boundary of the CRR tree: for each time step, the largest
/// node value at which early exercise is (weakly) optimal for the put.
/// Returns `(t_k, boundary_k)` pairs; steps where no node exercises are
/// skipped.
pub fn crr_put_exercise_boundary(
    spot: f64,
    strike: f64,
    rate: f64,
    sigma: f64,
    maturity: f64,
    steps: usize,
) -> Vec<(f64, f64)> {
    let dt = maturity / steps as f64;
    let up = (sigma * dt.sqrt()).exp();
    let down = 1.0 / up;
    let disc = (-rate * dt).exp();
    let p = ((rate * dt).exp() - down) / (up - down);
    let payoff = |s: f64| (strike - s).max(0.0);

    let mut values: Vec<f64> = (0..=steps)
        .map(|j| payoff(spot * up.powi(j as i32) * down.powi((steps - j) as i32)))
        .collect();
    let mut boundary = Vec::new();
    for k in (0..steps).rev() {
        let mut best: Option<f64> = None;
        for j in 0..=k {
            let s = spot * up.powi(j as i32) * down.powi((k - j) as i32);
            let cont = disc * (p * values[j + 1] + (1.0 - p) * values[j]);
            let ex = payoff(s);
            if ex >= cont && ex > 0.0 {
                best = Some(best.map_or(s, |b: f64| b.max(s)));
            }
            values[j] = cont.max(ex);
        }
        if let Some(b) = best {
            boundary.push((k as f64 * dt, b));
        }
    }
    boundary.reverse();
    boundary
}

/// Deterministic solution gap of two linear BSDEs whose drivers differ
/// by the constant `epsilon`: with `f2 = -rho y` and common terminal
/// data, the difference solves `dY/ds = rho Y - epsilon` backward from 0,
/// i.e. `Y(t) = epsilon (1 - exp(-rho (T - t))) / rho` (limit
/// `epsilon (T - t)` as `rho -> 0`).
pub fn linear_driver_gap(epsilon: f64, rho: f64, horizon: f64) -> f64 {
    if rho.abs() < 1e-14 {
        epsilon * horizon
    } else {
        epsilon * (1.0 - (-rho * horizon).exp()) / rho
    }
}

/// Mean and variance of a compensated compound Poisson increment over
/// `[0, T]` with atoms `(mark, mass)`: mean 0, variance
/// `T * sum mass * mark^2`.
pub fn compensated_compound_poisson_moments(atoms: &[(f64, f64)], horizon: f64) -> (f64, f64) {
    let var = horizon * atoms.iter().map(|(m, w)| w * m * m).sum::<f64>();
    (0.0, var)
}

/// Dynamic-programming value of stopping a two-point random walk, used
/// as a coarse bracket for ambiguity drivers: recombining tree with
/// increments +-sqrt(dt), per-step discount `1/(1 + rho dt)` and the
/// up-probability tilted by -+ kappa sqrt(dt)/2.
///
/// This is not a tight value; it brackets the `fbar = -rho y + kappa |z|`
/// expectation between a pessimistic and an optimistic drift, which is
/// all the bracket tests need.
pub fn two_point_tree_bound(
    x0: f64,
    rho: f64,
    kappa: f64,
    horizon: f64,
    steps: usize,
    terminal: impl Fn(f64) -> f64,
) -> (f64, f64) {
    let dt = horizon / steps as f64;
    let delta = dt.sqrt();
    let disc = 1.0 / (1.0 + rho * dt);
    let tilt = 0.5 * kappa * delta;
    let q_lo = (0.5 - tilt).clamp(0.0, 1.0);
    let q_hi = (0.5 + tilt).clamp(0.0, 1.0);
    let value = |q: f64| {
        let mut v: Vec<f64> = (0..=steps)
            .map(|j| terminal(x0 + delta * (2.0 * j as f64 - steps as f64)))
            .collect();
        for k in (0..steps).rev() {
            for j in 0..=k {
                v[j] = disc * (q * v[j + 1] + (1.0 - q) * v[j]);
            }
        }
        v[0]
    };
    (value(q_lo), value(q_hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crr_reproduces_published_american_put() {
        // Longstaff-Schwartz (2001) Table 1 parameters, finite-difference
        // reference values: S=36, K=40, r=0.06, sigma=0.2, T=1 -> 4.478.
        let v = crr_american_put(36.0, 40.0, 0.06, 0.2, 1.0, 1000);
        assert!((v - 4.478).abs() < 0.01, "got {v}");
        // S=40, sigma=0.4, T=2 -> 6.920 (within tree oscillation).
        let v = crr_american_put(40.0, 40.0, 0.06, 0.4, 2.0, 1000);
        assert!((v - 6.920).abs() < 0.02, "got {v}");
    }

    #[test]
    fn american_dominates_intrinsic_and_european() {
        let v = crr_american_put(1.0, 1.0, 0.06, 0.2, 0.5, 500);
        assert!(v > 0.0);
        // European put via the same tree without early exercise.
        let steps = 500;
        let dt = 0.5 / steps as f64;
        let up: f64 = (0.2 * dt.sqrt()).exp();
        let down = 1.0 / up;
        let disc = (-0.06 * dt).exp();
        let p = ((0.06_f64 * dt).exp() - down) / (up - down);
        let mut vals: Vec<f64> = (0..=steps)
            .map(|j| (1.0 - up.powi(j as i32) * down.powi((steps - j) as i32)).max(0.0))
            .collect();
        for k in (0..steps).rev() {
            for j in 0..=k {
                vals[j] = disc * (p * vals[j + 1] + (1.0 - p) * vals[j]);
            }
        }
        assert!(v >= vals[0] - 1e-12, "american {v} < european {}", vals[0]);
    }

    #[test]
    fn put_boundary_is_nondecreasing_in_time() {
        let b = crr_put_exercise_boundary(1.0, 1.0, 0.06, 0.2, 0.5, 200);
        assert!(!b.is_empty());
        for w in b.windows(2) {
            assert!(w[1].1 >= w[0].1 - 1e-9, "boundary dips: {w:?}");
        }
        assert!(b.iter().all(|(_, s)| *s <= 1.0));
    }

    #[test]
    fn linear_gap_limits() {
        assert!((linear_driver_gap(0.1, 0.0, 1.0) - 0.1).abs() < 1e-15);
        let g = linear_driver_gap(0.1, 0.05, 1.0);
        assert!((g - 0.1 * (1.0 - (-0.05_f64).exp()) / 0.05).abs() < 1e-15);
        assert!(g < 0.1);
    }

    #[test]
    fn tree_bound_brackets_zero_kappa() {
        let (lo, hi) = two_point_tree_bound(0.0, 0.05, 0.1, 1.0, 64, |x| x);
        assert!(lo <= 1e-12 && -1e-12 <= hi, "bracket [{lo}, {hi}]");
    }
}
