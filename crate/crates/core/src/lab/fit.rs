//! Least-squares rates on log-log axes.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::lab::strong::ErrorRow;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Axis {
    /// Dimension `N = 2K + 1` of the truncated space.
    N,
    Tau,
    Eps,
    /// Time lag between two states.
    Lag,
}

impl Axis {
    pub fn value(self, row: &ErrorRow) -> f64 {
        match self {
            Axis::N => row.modes as f64,
            Axis::Tau | Axis::Lag => row.tau,
            Axis::Eps => row.eps,
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::N => "N",
            Axis::Tau => "tau",
            Axis::Eps => "eps",
            Axis::Lag => "lag",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub axis: Axis,
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    /// Half-width of the 95% confidence interval on the slope.
    pub ci95: f64,
    pub residuals: Vec<f64>,
    pub points: usize,
    pub excluded: usize,
    pub notice: Option<String>,
    pub expected: Option<f64>,
    pub tolerance: Option<f64>,
    pub pass: Option<bool>,
}

impl ConvergenceReport {
    pub fn with_expectation(mut self, rate: f64, tolerance: f64) -> Self {
        self.expected = Some(rate);
        self.tolerance = Some(tolerance);
        self.pass = Some(self.slope.is_finite() && (self.slope - rate).abs() <= tolerance);
        self
    }
}

/// OLS of `log y` against `log x`.
pub fn fit_power_law(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, f64, Vec<f64>)> {
    let n = xs.len();
    if n != ys.len() {
        return Err(Error::invalid("abscissa and ordinate lengths differ"));
    }
    let mut distinct: Vec<f64> = xs.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::invalid(format!(
            "rate fit needs at least 3 distinct abscissae, got {}",
            distinct.len()
        )));
    }
    if xs.iter().chain(ys).any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::invalid("log-log fit needs positive finite data"));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n as f64;
    let my = ly.iter().sum::<f64>() / n as f64;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals: Vec<f64> = lx.iter().zip(&ly).map(|(x, y)| y - (intercept + slope * x)).collect();
    let sse: f64 = residuals.iter().map(|r| r * r).sum();
    let stderr = if n > 2 {
        (sse / (n - 2) as f64 / sxx).sqrt()
    } else {
        f64::NAN
    };
    Ok((slope, intercept, stderr, residuals))
}

/// Fit `log ê` against `log axis`. Rows with `ê = 0` are dropped with a notice.
pub fn fit_rate(rows: &[ErrorRow], axis: Axis) -> Result<ConvergenceReport> {
    let xs: Vec<f64> = rows.iter().map(|r| axis.value(r)).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.error).collect();
    fit_points(axis, &xs, &ys)
}

/// Same as [`fit_rate`] on raw `(x, y)` pairs.
pub fn fit_points(axis: Axis, xs: &[f64], ys: &[f64]) -> Result<ConvergenceReport> {
    if xs.len() != ys.len() {
        return Err(Error::invalid("abscissa and ordinate lengths differ"));
    }
    let (kx, ky): (Vec<f64>, Vec<f64>) = xs
        .iter()
        .zip(ys)
        .filter(|(_, y)| **y > 0.0)
        .map(|(x, y)| (*x, *y))
        .unzip();
    let excluded = xs.len() - kx.len();
    let (slope, intercept, slope_stderr, residuals) = fit_power_law(&kx, &ky)?;
    let dof = kx.len() - 2;
    let ci95 = if dof > 0 && slope_stderr.is_finite() {
        let t = StudentsT::new(0.0, 1.0, dof as f64)
            .map_err(|e| Error::invalid(e.to_string()))?
            .inverse_cdf(0.975);
        t * slope_stderr
    } else {
        f64::NAN
    };
    Ok(ConvergenceReport {
        axis,
        slope,
        intercept,
        slope_stderr,
        ci95,
        residuals,
        points: kx.len(),
        excluded,
        notice: (excluded > 0).then(|| format!("{excluded} row(s) with zero error excluded from the fit")),
        expected: None,
        tolerance: None,
        pass: None,
    })
}

#[derive(Serialize)]
struct RateRecord<'a> {
    label: &'a str,
    axis: String,
    slope: f64,
    ci: f64,
    stderr: f64,
    points: usize,
    expected: Option<f64>,
    tolerance: Option<f64>,
    pass: Option<bool>,
}

/// `rates.csv`: one line per labelled fit.
pub fn write_rates_csv<W: Write>(writer: W, reports: &[(String, ConvergenceReport)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for (label, r) in reports {
        w.serialize(RateRecord {
            label,
            axis: r.axis.to_string(),
            slope: r.slope,
            ci: r.ci95,
            stderr: r.slope_stderr,
            points: r.points,
            expected: r.expected,
            tolerance: r.tolerance,
            pass: r.pass,
        })?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn row(modes: usize, tau: f64, eps: f64, error: f64) -> ErrorRow {
        ErrorRow {
            eps,
            k_cut: (modes - 1) / 2,
            modes,
            steps: (1.0 / tau).round() as usize,
            tau,
            error,
            stderr: 0.0,
            paths: 2,
        }
    }

    #[test]
    fn exact_power_law_in_n() {
        let rows: Vec<ErrorRow> = [5, 9, 17, 33, 65]
            .iter()
            .map(|&n| row(n, 0.01, 1.0, 3.0 * (n as f64).powi(-2)))
            .collect();
        let r = fit_rate(&rows, Axis::N).unwrap();
        assert!((r.slope + 2.0).abs() < 1e-12);
        assert!((r.intercept - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn jittered_half_order_in_tau() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let rows: Vec<ErrorRow> = (4..10)
            .map(|j| {
                let tau = 2f64.powi(-j);
                let jitter = 1.0 + 0.01 * rng.random_range(-1.0..1.0);
                row(9, tau, 1.0, 0.7 * tau.sqrt() * jitter)
            })
            .collect();
        let r = fit_rate(&rows, Axis::Tau).unwrap().with_expectation(0.5, 0.05);
        assert_eq!(r.pass, Some(true), "slope {}", r.slope);
        assert!(r.ci95 > 0.0);
    }

    #[test]
    fn too_few_points_rejected() {
        let rows = vec![row(5, 0.1, 1.0, 1.0), row(9, 0.1, 1.0, 0.5)];
        assert!(fit_rate(&rows, Axis::N).is_err());
    }

    #[test]
    fn zero_rows_excluded_with_notice() {
        let mut rows: Vec<ErrorRow> = [5, 9, 17].iter().map(|&n| row(n, 0.1, 1.0, 1.0 / n as f64)).collect();
        rows.push(row(33, 0.1, 1.0, 0.0));
        let r = fit_rate(&rows, Axis::N).unwrap();
        assert_eq!(r.excluded, 1);
        assert!(r.notice.is_some());
        assert!((r.slope + 1.0).abs() < 1e-12);
    }
}
