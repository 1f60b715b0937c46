//! Linear quantile regression on the percentile grid.

mod ipm;

use nalgebra::{DMatrix, DVector};

use crate::design::DesignMatrix;
use crate::error::{Error, Result};
use crate::ols::{dot, ols_fit};

pub use ipm::{GAP_TOL, MAX_ITER};

/// Number of percentiles in a fan.
pub const PERCENTILES: usize = 99;

/// Percentile `i + 1` of the grid, i.e. 0.01..=0.99.
pub fn percentile(i: usize) -> f64 {
    (i + 1) as f64 / 100.0
}

pub fn percentile_grid() -> Vec<f64> {
    (0..PERCENTILES).map(percentile).collect()
}

/// Grid index of `tau`, if it is a whole percentile.
pub fn grid_index(tau: f64) -> Option<usize> {
    let k = (tau * 100.0).round();
    ((tau * 100.0 - k).abs() < 1e-9 && (1.0..=99.0).contains(&k)).then(|| k as usize - 1)
}

pub fn pinball(y: f64, q: f64, tau: f64) -> f64 {
    if y < q {
        (1.0 - tau) * (q - y)
    } else {
        tau * (y - q)
    }
}

/// Fits `Q_tau(y | x) = x theta` by minimizing the summed pinball loss.
///
/// Linearly dependent columns are dropped before solving and get a zero
/// coefficient.
pub fn qr_fit(x: &DMatrix<f64>, y: &[f64], tau: f64) -> Result<Vec<f64>> {
    let (n, p) = x.shape();
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::SolverFailure(format!("tau {tau} outside (0, 1)")));
    }
    if y.len() != n {
        return Err(Error::ShapeMismatch { expected: n, got: y.len() });
    }
    if n < 2 * p {
        return Err(Error::TooFewRows { rows: n, cols: p });
    }
    if let Some(j) = (0..p).find(|&j| x.column(j).iter().all(|&v| v == 0.0)) {
        return Err(Error::DegenerateDesign(format!("column {j} is identically zero")));
    }
    let keep = independent_columns(x);
    let xs = x.select_columns(&keep);
    let start = ols_fit(&xs, y)?;
    let theta = ipm::solve(&xs, &DVector::from_column_slice(y), tau, &start)?;
    let mut full = vec![0.0; p];
    for (k, j) in keep.into_iter().enumerate() {
        full[j] = theta[k];
    }
    Ok(full)
}

/// Column indices forming a basis of the column space (modified Gram-Schmidt).
fn independent_columns(x: &DMatrix<f64>) -> Vec<usize> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut keep = Vec::new();
    for j in 0..x.ncols() {
        let col = x.column(j).into_owned();
        let norm = col.norm();
        let mut v = col;
        for q in &basis {
            let proj = q.dot(&v);
            v.axpy(-proj, q, 1.0);
        }
        let rest = v.norm();
        if rest > 1e-9 * norm {
            basis.push(v / rest);
            keep.push(j);
        }
    }
    keep
}

/// Coefficients of every percentile of the grid plus any extra levels.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantileModel {
    pub taus: Vec<f64>,
    pub thetas: Vec<Vec<f64>>,
}

/// Fits the 99 grid percentiles followed by `extra` levels on the sample days.
pub fn fit_quantiles(design: &DesignMatrix, days: &[usize], extra: &[f64]) -> Result<QuantileModel> {
    design.check_days(days)?;
    let x = design.matrix(days);
    let y = design.targets(days);
    let taus: Vec<f64> = percentile_grid().into_iter().chain(extra.iter().copied()).collect();
    let thetas = taus
        .iter()
        .map(|&tau| qr_fit(&x, &y, tau))
        .collect::<Result<Vec<_>>>()?;
    Ok(QuantileModel { taus, thetas })
}

impl QuantileModel {
    /// Raw (unsorted) predictions for all levels.
    pub fn predict(&self, row: &[f64]) -> Result<Vec<f64>> {
        self.thetas.iter().map(|t| dot(t, row)).collect()
    }
}

/// Predicted percentiles 0.01..=0.99 for one target.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantileFan {
    values: Vec<f64>,
}

impl QuantileFan {
    /// Rearranges raw predictions by sorting.
    pub fn from_raw(mut raw: Vec<f64>) -> Result<QuantileFan> {
        if raw.len() != PERCENTILES {
            return Err(Error::ShapeMismatch { expected: PERCENTILES, got: raw.len() });
        }
        raw.sort_by(f64::total_cmp);
        Ok(QuantileFan { values: raw })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn taus(&self) -> Vec<f64> {
        percentile_grid()
    }

    pub fn at(&self, tau: f64) -> Option<f64> {
        grid_index(tau).map(|i| self.values[i])
    }
}

/// Evaluates 99 coefficient vectors on one regressor row and sorts the result.
pub fn qr_fan(thetas: &[Vec<f64>], row: &[f64]) -> Result<QuantileFan> {
    let raw = thetas.iter().map(|t| dot(t, row)).collect::<Result<Vec<_>>>()?;
    QuantileFan::from_raw(raw)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PredictionInterval {
    pub lower: f64,
    pub upper: f64,
    /// Nominal coverage `1 - alpha`.
    pub nominal: f64,
}

impl PredictionInterval {
    pub fn contains(&self, y: f64) -> bool {
        self.lower <= y && y <= self.upper
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

pub fn qr_interval(fan: &QuantileFan, alpha: f64) -> Result<PredictionInterval> {
    let lo = grid_index(alpha / 2.0).ok_or(Error::UnsupportedAlpha(alpha))?;
    let hi = grid_index(1.0 - alpha / 2.0).ok_or(Error::UnsupportedAlpha(alpha))?;
    Ok(PredictionInterval {
        lower: fan.values[lo],
        upper: fan.values[hi],
        nominal: 1.0 - alpha,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal, Uniform};

    fn total_loss(x: &DMatrix<f64>, y: &[f64], theta: &[f64], tau: f64) -> f64 {
        (0..y.len())
            .map(|i| {
                let q: f64 = (0..x.ncols()).map(|j| x[(i, j)] * theta[j]).sum();
                pinball(y[i], q, tau)
            })
            .sum()
    }

    #[test]
    fn pinball_examples() {
        assert_eq!(pinball(3.0, 3.0, 0.3), 0.0);
        assert!((pinball(10.0, 8.0, 0.9) - 1.8).abs() < 1e-12);
        assert!((pinball(8.0, 10.0, 0.9) - 0.2).abs() < 1e-12);
    }

    #[test]
    fn intercept_only_median() {
        let y = [5.0, 1.0, 9.0, 3.0, 7.0, 2.0, 8.0];
        let x = DMatrix::from_element(7, 1, 1.0);
        let t = qr_fit(&x, &y, 0.5).unwrap();
        assert!((t[0] - 5.0).abs() < 1e-6, "{t:?}");
    }

    #[test]
    fn intercept_only_lower_quartile() {
        let y = [1.0, 2.0, 3.0, 4.0];
        let x = DMatrix::from_element(4, 1, 1.0);
        let t = qr_fit(&x, &y, 0.25).unwrap()[0];
        // grid search oracle: minimal loss attained on [1, 2]
        let best = (0..=5000)
            .map(|k| k as f64 * 0.001)
            .map(|q| y.iter().map(|&v| pinball(v, q, 0.25)).sum::<f64>())
            .fold(f64::INFINITY, f64::min);
        let loss: f64 = y.iter().map(|&v| pinball(v, t, 0.25)).sum();
        assert!((1.0 - 1e-6..=2.0 + 1e-6).contains(&t), "{t}");
        assert!(loss <= best + 1e-6);
    }

    #[test]
    fn slope_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let u = Uniform::new(-1.0, 1.0).unwrap();
        let n = 2000;
        let xs: Vec<f64> = (0..n).map(|_| 10.0 * u.sample(&mut rng)).collect();
        let x = DMatrix::from_fn(n, 2, |i, j| if j == 0 { 1.0 } else { xs[i] });
        let y: Vec<f64> = xs.iter().map(|v| 3.0 * v + u.sample(&mut rng)).collect();
        let t = qr_fit(&x, &y, 0.5).unwrap();
        assert!((t[1] - 3.0).abs() < 0.1, "{t:?}");
    }

    #[test]
    fn subgradient_condition() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let nd = Normal::new(0.0, 1.0).unwrap();
        let n = 300;
        let x = DMatrix::from_fn(n, 3, |_, j| if j == 0 { 1.0 } else { nd.sample(&mut rng) });
        let y: Vec<f64> = (0..n).map(|i| 2.0 + x[(i, 1)] - 0.5 * x[(i, 2)] + nd.sample(&mut rng)).collect();
        for tau in [0.05, 0.3, 0.5, 0.9] {
            let t = qr_fit(&x, &y, tau).unwrap();
            let below = (0..n)
                .filter(|&i| y[i] - (0..3).map(|j| x[(i, j)] * t[j]).sum::<f64>() < -1e-7)
                .count() as f64
                / n as f64;
            assert!((below - tau).abs() <= 3.0 / n as f64 + 1e-12, "tau {tau}: {below}");
        }
    }

    #[test]
    fn collinear_columns_are_dropped() {
        let n = 40;
        let x = DMatrix::from_fn(n, 3, |i, j| match j {
            0 => 1.0,
            1 => i as f64,
            _ => 2.0 * i as f64,
        });
        let y: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * i as f64 + ((i * 7) % 5) as f64).collect();
        let t = qr_fit(&x, &y, 0.5).unwrap();
        assert_eq!(t[2], 0.0);
        let fitted = qr_fit(&x.columns(0, 2).into_owned(), &y, 0.5).unwrap();
        assert!((total_loss(&x, &y, &t, 0.5) - total_loss(&x.columns(0, 2).into_owned(), &y, &fitted, 0.5)).abs() < 1e-6);
    }

    #[test]
    fn degenerate_and_short() {
        let x = DMatrix::from_fn(6, 2, |_, j| if j == 0 { 1.0 } else { 0.0 });
        assert!(matches!(qr_fit(&x, &[1.0; 6], 0.5), Err(Error::DegenerateDesign(_))));
        let x = DMatrix::from_element(3, 2, 1.0);
        assert!(matches!(qr_fit(&x, &[1.0; 3], 0.5), Err(Error::TooFewRows { .. })));
    }

    #[test]
    fn fan_and_intervals() {
        let constant = vec![vec![2.0, 1.0]; PERCENTILES];
        let fan = qr_fan(&constant, &[1.0, 3.0]).unwrap();
        assert!(fan.values().iter().all(|&v| v == 5.0));

        let mut raw: Vec<f64> = (0..PERCENTILES).map(|i| i as f64).collect();
        raw[48] = 5.0 + 48.0;
        raw[49] = 4.0;
        let fan = QuantileFan::from_raw(raw).unwrap();
        assert!(fan.values().windows(2).all(|w| w[0] <= w[1]));

        let fan = QuantileFan::from_raw((0..PERCENTILES).map(|i| i as f64).collect()).unwrap();
        let pi = qr_interval(&fan, 0.10).unwrap();
        assert_eq!((pi.lower, pi.upper), (fan.at(0.05).unwrap(), fan.at(0.95).unwrap()));
        assert_eq!((pi.lower, pi.upper), (4.0, 94.0));
        assert!((pi.nominal - 0.9).abs() < 1e-12);
        let pi = qr_interval(&fan, 0.02).unwrap();
        assert_eq!((pi.lower, pi.upper), (0.0, 98.0));
        assert!(matches!(qr_interval(&fan, 0.03), Err(Error::UnsupportedAlpha(_))));
        assert!(matches!(qr_interval(&fan, 0.05), Err(Error::UnsupportedAlpha(_))));
    }

    #[test]
    fn gaussian_fan_matches_true_quantiles() {
        use statrs::distribution::{ContinuousCDF, Normal as SNormal};
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let nd = Normal::new(0.0, 1.0).unwrap();
        let n = 1500;
        let x = DMatrix::from_fn(n, 2, |_, j| if j == 0 { 1.0 } else { nd.sample(&mut rng) });
        let y: Vec<f64> = (0..n).map(|i| 1.0 + 2.0 * x[(i, 1)] + nd.sample(&mut rng)).collect();
        let thetas: Vec<Vec<f64>> = (0..PERCENTILES).map(|i| qr_fit(&x, &y, percentile(i)).unwrap()).collect();
        let fan = qr_fan(&thetas, &[1.0, 0.5]).unwrap();
        let truth = SNormal::new(2.0, 1.0).unwrap();
        for (i, v) in fan.values().iter().enumerate() {
            let q = truth.inverse_cdf(percentile(i));
            let tol = if (5..94).contains(&i) { 0.15 } else { 0.35 };
            assert!((v - q).abs() < tol, "tau {}: {v} vs {q}", percentile(i));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn pinball_nonnegative(y in -1e3f64..1e3, q in -1e3f64..1e3, tau in 0.001f64..0.999) {
            let v = pinball(y, q, tau);
            prop_assert!(v >= 0.0);
            prop_assert_eq!(v == 0.0, y == q);
        }

        #[test]
        fn fit_is_no_worse_than_perturbations(
            ys in prop::collection::vec(-10.0f64..10.0, 12..40),
            tau in 0.05f64..0.95,
            bump in -0.5f64..0.5,
        ) {
            let n = ys.len();
            let x = DMatrix::from_fn(n, 2, |i, j| if j == 0 { 1.0 } else { i as f64 / n as f64 });
            let t = qr_fit(&x, &ys, tau).unwrap();
            let best = total_loss(&x, &ys, &t, tau);
            prop_assert!(best <= total_loss(&x, &ys, &[t[0] + bump, t[1]], tau) + 1e-6);
            prop_assert!(best <= total_loss(&x, &ys, &[t[0], t[1] + bump], tau) + 1e-6);
        }

        #[test]
        fn fan_is_monotone(raw in prop::collection::vec(-100.0f64..100.0, PERCENTILES)) {
            let fan = QuantileFan::from_raw(raw).unwrap();
            prop_assert!(fan.values().windows(2).all(|w| w[0] <= w[1]));
        }
    }
}
