//! Compensated reductions and Monte Carlo moment estimators.

/// Neumaier's variant of Kahan summation.
#[derive(Clone, Copy, Debug, Default)]
pub struct NeumaierSum {
    sum: f64,
    compensation: f64,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for NeumaierSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = NeumaierSum::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

pub fn compensated_sum(xs: impl IntoIterator<Item = f64>) -> f64 {
    xs.into_iter().collect::<NeumaierSum>().value()
}

/// `(E X^p)^{1/p}` from samples of a nonnegative `X`, with a delta-method
/// standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MomentEstimate {
    pub value: f64,
    pub stderr: f64,
    pub samples: usize,
}

pub fn lp_moment(samples: &[f64], p: f64) -> MomentEstimate {
    let n = samples.len();
    if n == 0 {
        return MomentEstimate {
            value: f64::NAN,
            stderr: f64::NAN,
            samples: 0,
        };
    }
    let powered: Vec<f64> = samples.iter().map(|x| x.powf(p)).collect();
    let mean = compensated_sum(powered.iter().copied()) / n as f64;
    let value = mean.powf(1.0 / p);
    if n < 2 || mean == 0.0 {
        return MomentEstimate {
            value,
            stderr: if n < 2 { f64::NAN } else { 0.0 },
            samples: n,
        };
    }
    let var = compensated_sum(powered.iter().map(|y| (y - mean).powi(2))) / (n - 1) as f64;
    let se_mean = (var / n as f64).sqrt();
    // d/dm m^{1/p} = m^{1/p - 1} / p
    let stderr = value / (p * mean) * se_mean;
    MomentEstimate {
        value,
        stderr,
        samples: n,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensation_recovers_cancelled_terms() {
        let xs = [1.0, 1e100, 1.0, -1e100];
        assert_eq!(xs.iter().sum::<f64>(), 0.0);
        assert_eq!(compensated_sum(xs), 2.0);
    }

    #[test]
    fn order_insensitive_on_shuffled_input() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 7919) % 1000) as f64 * 1e-3 + 1e8).collect();
        let mut rev = xs.clone();
        rev.reverse();
        let (a, b) = (compensated_sum(xs), compensated_sum(rev));
        assert!((a - b).abs() <= 1e-12 * a.abs());
    }

    #[test]
    fn second_moment_of_constant_samples() {
        let m = lp_moment(&[2.0; 10], 2.0);
        assert_eq!(m.value, 2.0);
        assert_eq!(m.stderr, 0.0);
        let zero = lp_moment(&[0.0; 4], 2.0);
        assert_eq!((zero.value, zero.stderr), (0.0, 0.0));
    }

    #[test]
    fn delta_method_standard_error() {
        let s = [1.0, 2.0, 3.0];
        let m = lp_moment(&s, 2.0);
        let mean: f64 = 14.0 / 3.0;
        let var = ((1.0 - mean) * (1.0 - mean) + (4.0 - mean) * (4.0 - mean) + (9.0 - mean) * (9.0 - mean)) / 2.0;
        let expected = 0.5 / mean.sqrt() * (var / 3.0f64).sqrt();
        assert!((m.value - mean.sqrt()).abs() < 1e-15);
        assert!((m.stderr - expected).abs() < 1e-15);
    }
}
