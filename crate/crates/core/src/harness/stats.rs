//! Small estimators used by the harness.

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance; zero for fewer than two values.
pub fn sample_var(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Standard error of the mean.
pub fn std_error(xs: &[f64]) -> f64 {
    (sample_var(xs) / xs.len() as f64).sqrt()
}

/// Standard error of the sample variance, `sqrt((m4 - s^4 (n-3)/(n-1)) / n)`.
pub fn var_std_error(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    if n < 4.0 {
        return f64::INFINITY;
    }
    let m = mean(xs);
    let s2 = sample_var(xs);
    let m4 = xs.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
    ((m4 - s2 * s2 * (n - 3.0) / (n - 1.0)) / n).max(0.0).sqrt()
}

/// Jackknife standard error of a statistic given its leave-one-out values.
pub fn jackknife_se(leave_one_out: &[f64]) -> f64 {
    let n = leave_one_out.len() as f64;
    if n < 2.0 {
        return 0.0;
    }
    let m = mean(leave_one_out);
    ((n - 1.0) / n * leave_one_out.iter().map(|x| (x - m).powi(2)).sum::<f64>()).sqrt()
}

/// Ordinary least-squares line with a Student-t interval on the slope.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    /// Two-sided 95% interval; infinite with only two points.
    pub ci_low: f64,
    pub ci_high: f64,
    pub points: usize,
}

impl LinearFit {
    pub fn slope_within(&self, lo: f64, hi: f64) -> bool {
        self.slope >= lo && self.slope <= hi
    }
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    let n = xs.len();
    if n != ys.len() {
        return Err(Error::DimensionMismatch { expected: n, found: ys.len() });
    }
    if n < 2 {
        return Err(Error::TooFewSizes { needed: 2, got: n });
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("regression data must be finite".into()));
    }
    let mx = mean(xs);
    let my = mean(ys);
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("regression abscissae are all equal".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let (slope_se, half) = if n > 2 {
        let rss: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
        let se = (rss / (n - 2) as f64 / sxx).sqrt();
        let t = StudentsT::new(0.0, 1.0, (n - 2) as f64).expect("positive degrees of freedom").inverse_cdf(0.975);
        (se, t * se)
    } else {
        (f64::INFINITY, f64::INFINITY)
    };
    Ok(LinearFit { slope, intercept, slope_se, ci_low: slope - half, ci_high: slope + half, points: n })
}

/// Fit of `log y` against `log x`.
pub fn loglog_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if xs.iter().chain(ys).any(|&v| !(v > 0.0)) {
        return Err(Error::InvalidParameter("log-log fit needs positive data".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    linear_fit(&lx, &ly)
}

/// Strictly decreasing, except for at most one step up no larger than the
/// matching tolerance `tol[i + 1]`.
pub fn decreasing_with_one_inversion(values: &[f64], tol: &[f64]) -> bool {
    let mut inversions = 0;
    for i in 0..values.len().saturating_sub(1) {
        if values[i + 1] >= values[i] {
            if values[i + 1] - values[i] > tol[i + 1].max(tol[i]) {
                return false;
            }
            inversions += 1;
        }
    }
    inversions <= 1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_recovers_exact_line() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 - 0.5 * x).collect();
        let f = linear_fit(&xs, &ys).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-14 && (f.intercept - 3.0).abs() < 1e-14);
        assert!(f.slope_se < 1e-12);
        let two = linear_fit(&xs[..2], &ys[..2]).unwrap();
        assert!(two.ci_high.is_infinite());
        assert!(linear_fit(&xs[..1], &ys[..1]).is_err());
    }

    #[test]
    fn fit_interval_uses_student_t() {
        // Residuals +-1 around y = x: rss = 4, sxx = 20, se = sqrt(4 / 3 / 20).
        let xs = [0.0, 1.0, 2.0, 3.0, 4.0];
        let ys = [1.0, 0.0, 2.0, 4.0, 3.0];
        let f = linear_fit(&xs, &ys).unwrap();
        assert!((f.slope - 0.8).abs() < 1e-12);
        let rss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - f.intercept - 0.8 * x).powi(2)).sum();
        let se = (rss / 3.0 / 10.0).sqrt();
        assert!((f.slope_se - se).abs() < 1e-12);
        // t_{0.975, 3} = 3.182446...
        assert!(((f.ci_high - f.slope) / se - 3.182446305284263).abs() < 1e-6);
    }

    #[test]
    fn monotonicity_allows_one_small_inversion() {
        let tol = [0.01; 4];
        assert!(decreasing_with_one_inversion(&[0.4, 0.3, 0.2, 0.1], &tol));
        assert!(decreasing_with_one_inversion(&[0.4, 0.3, 0.305, 0.1], &tol));
        assert!(!decreasing_with_one_inversion(&[0.4, 0.3, 0.35, 0.1], &tol));
        assert!(!decreasing_with_one_inversion(&[0.4, 0.405, 0.41, 0.1], &tol));
    }

    #[test]
    fn jackknife_of_the_mean_is_the_usual_standard_error() {
        let xs = [1.0, 4.0, 2.0, 8.0, 5.0];
        let n = xs.len() as f64;
        let total: f64 = xs.iter().sum();
        let loo: Vec<f64> = xs.iter().map(|x| (total - x) / (n - 1.0)).collect();
        assert!((jackknife_se(&loo) - std_error(&xs)).abs() < 1e-12);
    }
}
