//! Least-squares conditional-expectation estimators.
//!
//! The backward scheme needs `E[target | X_k = x]` as a function
//! evaluated at the observed states. Two bases are provided: hat
//! functions on an equispaced knot grid spanning the 1st-99th percentile
//! of the observed states (the default; local, monotone, no Runge
//! artifacts), and standardized global polynomials. Targets are demeaned
//! before fitting so a constant target is reproduced exactly.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::numerics::{mean, quantile_sorted};

/// Basis choice for the conditional-expectation regressions.
#[derive(Clone, Debug, PartialEq)]
pub enum RegressionBasis {
    /// Hat functions on `n_bins` equal cells over the empirical
    /// 1st-99th percentile range of the regressor.
    PiecewiseLinear { n_bins: usize },
    /// `1, s, ..., s^degree` with `s` the standardized regressor.
    GlobalPolynomial { degree: usize },
}

impl RegressionBasis {
    pub fn piecewise_default() -> Self {
        RegressionBasis::PiecewiseLinear { n_bins: 20 }
    }
}

#[derive(Debug)]
pub enum RegressionError {
    /// Normal equations are singular even after dropping empty columns.
    RankDeficient,
}

/// Prepared design information for one regression step.
pub enum Regressor {
    /// Degenerate regressor (no spread): fitted value is the mean.
    Constant { n: usize },
    Hats { knots: Vec<f64>, cell: Vec<u32>, theta: Vec<f64> },
    Poly { degree: usize, loc: f64, scale: f64, scaled: Vec<f64> },
}

impl Regressor {
    /// Inspect the regressor sample and precompute per-observation design
    /// data. Never fails: degenerate samples fall back to the constant
    /// basis.
    pub fn prepare(basis: &RegressionBasis, xs: &[f64]) -> Regressor {
        let n = xs.len();
        let mut sorted = xs.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("states must not be NaN"));
        let lo = quantile_sorted(&sorted, 0.01);
        let hi = quantile_sorted(&sorted, 0.99);
        let spread = hi - lo;
        if spread <= 1e-12 * (1.0 + lo.abs().max(hi.abs())) {
            return Regressor::Constant { n };
        }
        match basis {
            RegressionBasis::PiecewiseLinear { n_bins } => {
                let n_bins = (*n_bins).max(1);
                let width = spread / n_bins as f64;
                let knots: Vec<f64> = (0..=n_bins).map(|i| lo + i as f64 * width).collect();
                let mut cell = Vec::with_capacity(n);
                let mut theta = Vec::with_capacity(n);
                for &x in xs {
                    let xc = x.clamp(lo, hi);
                    let mut c = ((xc - lo) / width) as usize;
                    if c >= n_bins {
                        c = n_bins - 1;
                    }
                    cell.push(c as u32);
                    theta.push(((xc - knots[c]) / width).clamp(0.0, 1.0));
                }
                Regressor::Hats { knots, cell, theta }
            }
            RegressionBasis::GlobalPolynomial { degree } => {
                let loc = mean(xs);
                let scale = {
                    let s = crate::numerics::sample_std(xs);
                    if s > 0.0 {
                        s
                    } else {
                        1.0
                    }
                };
                let scaled = xs.iter().map(|x| (x - loc) / scale).collect();
                Regressor::Poly { degree: (*degree).max(1), loc, scale, scaled }
            }
        }
    }

    /// Fit `targets` and return the fitted value at each observation.
    pub fn fit(&self, targets: &[f64]) -> Result<Vec<f64>, RegressionError> {
        match self {
            Regressor::Constant { n } => {
                debug_assert_eq!(*n, targets.len());
                let m = mean(targets);
                Ok(vec![m; targets.len()])
            }
            Regressor::Hats { knots, cell, theta } => {
                let kn = knots.len();
                let tm = mean(targets);
                // Assemble the (tridiagonal) normal equations of the hat
                // basis on the demeaned targets.
                let mut gram = DMatrix::<f64>::zeros(kn, kn);
                let mut rhs = DVector::<f64>::zeros(kn);
                for ((&c, &th), &y) in cell.iter().zip(theta).zip(targets) {
                    let c = c as usize;
                    let (a, b) = (1.0 - th, th);
                    let yd = y - tm;
                    gram[(c, c)] += a * a;
                    gram[(c + 1, c + 1)] += b * b;
                    gram[(c, c + 1)] += a * b;
                    gram[(c + 1, c)] += a * b;
                    rhs[c] += a * yd;
                    rhs[c + 1] += b * yd;
                }
                let coef = solve_normal_equations(gram, rhs)?;
                Ok(cell
                    .iter()
                    .zip(theta)
                    .map(|(&c, &th)| {
                        let c = c as usize;
                        tm + coef[c] * (1.0 - th) + coef[c + 1] * th
                    })
                    .collect())
            }
            Regressor::Poly { degree, scaled, .. } => {
                let kn = degree + 1;
                let tm = mean(targets);
                let mut gram = DMatrix::<f64>::zeros(kn, kn);
                let mut rhs = DVector::<f64>::zeros(kn);
                let mut pow = vec![0.0; kn];
                for (&s, &y) in scaled.iter().zip(targets) {
                    let yd = y - tm;
                    pow[0] = 1.0;
                    for d in 1..kn {
                        pow[d] = pow[d - 1] * s;
                    }
                    for i in 0..kn {
                        for j in i..kn {
                            gram[(i, j)] += pow[i] * pow[j];
                        }
                        rhs[i] += pow[i] * yd;
                    }
                }
                for i in 0..kn {
                    for j in 0..i {
                        gram[(i, j)] = gram[(j, i)];
                    }
                }
                let coef = solve_normal_equations(gram, rhs)?;
                Ok(scaled
                    .iter()
                    .map(|&s| {
                        let mut acc = 0.0;
                        let mut p = 1.0;
                        for d in 0..kn {
                            acc += coef[d] * p;
                            p *= s;
                        }
                        tm + acc
                    })
                    .collect())
            }
        }
    }
}

/// Cholesky solve of the normal equations; on failure, drop columns with
/// (near-)empty support and retry on the reduced system.
fn solve_normal_equations(
    gram: DMatrix<f64>,
    rhs: DVector<f64>,
) -> Result<DVector<f64>, RegressionError> {
    let kn = gram.nrows();
    if let Some(chol) = Cholesky::new(gram.clone()) {
        return Ok(chol.solve(&rhs));
    }
    let max_diag = (0..kn).map(|i| gram[(i, i)]).fold(0.0_f64, f64::max);
    let keep: Vec<usize> =
        (0..kn).filter(|&i| gram[(i, i)] > 1e-12 * max_diag.max(1e-300)).collect();
    if keep.is_empty() {
        return Err(RegressionError::RankDeficient);
    }
    let m = keep.len();
    let mut reduced = DMatrix::<f64>::zeros(m, m);
    let mut reduced_rhs = DVector::<f64>::zeros(m);
    for (a, &i) in keep.iter().enumerate() {
        for (b, &j) in keep.iter().enumerate() {
            reduced[(a, b)] = gram[(i, j)];
        }
        reduced_rhs[a] = rhs[i];
    }
    let chol = Cholesky::new(reduced).ok_or(RegressionError::RankDeficient)?;
    let sol = chol.solve(&reduced_rhs);
    let mut full = DVector::<f64>::zeros(kn);
    for (a, &i) in keep.iter().enumerate() {
        full[i] = sol[a];
    }
    Ok(full)
}
