//! Small sample statistics used by the trajectory ensemble.

/// Mean and standard error of the mean (sample standard deviation over
/// `√n`). Returns `(NaN, NaN)` for an empty sample and a zero error for a
/// single value.
pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let nf = n as f64;
    let mean = values.iter().sum::<f64>() / nf;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, libm::sqrt(ss / (nf - 1.0) / nf))
}

/// Variance of the pooled distribution, `mean(second) − mean(first)²`,
/// where `first[i]` and `second[i]` are the first and second moments of
/// trajectory `i`. Returns the estimate and its jackknife standard error.
pub fn mixture_variance_jackknife(first: &[f64], second: &[f64]) -> (f64, f64) {
    assert_eq!(first.len(), second.len());
    let n = first.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let nf = n as f64;
    let s1: f64 = first.iter().sum();
    let s2: f64 = second.iter().sum();
    let estimate = s2 / nf - (s1 / nf) * (s1 / nf);
    if n == 1 {
        return (estimate, 0.0);
    }
    let m = nf - 1.0;
    let leave_one_out = |i: usize| {
        let a = (s1 - first[i]) / m;
        (s2 - second[i]) / m - a * a
    };
    let mean_loo = (0..n).map(leave_one_out).sum::<f64>() / nf;
    let ss: f64 = (0..n)
        .map(|i| {
            let d = leave_one_out(i) - mean_loo;
            d * d
        })
        .sum();
    (estimate, libm::sqrt(ss * m / nf))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_stderr_basic() {
        let (m, se) = mean_and_stderr(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        // sd = sqrt(5/3)
        assert!((se - libm::sqrt(5.0 / 3.0) / 2.0).abs() < 1e-15);
        assert_eq!(mean_and_stderr(&[7.0]), (7.0, 0.0));
        assert!(mean_and_stderr(&[]).0.is_nan());
    }

    #[test]
    fn jackknife_of_a_mean_is_the_classic_stderr() {
        // With second moments equal to first², the mixture variance is the
        // sample variance (biased); its jackknife error is finite and positive.
        let x = [0.0, 1.0, 3.0, 6.0, 10.0];
        let x2: std::vec::Vec<f64> = x.iter().map(|v| v * v).collect();
        let (est, se) = mixture_variance_jackknife(&x, &x2);
        let mean = 4.0;
        let pop_var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 5.0;
        assert!((est - pop_var).abs() < 1e-12);
        assert!(se > 0.0 && se.is_finite());
    }

    #[test]
    fn constant_sample_has_zero_error() {
        let (est, se) = mixture_variance_jackknife(&[2.0; 10], &[5.0; 10]);
        assert!((est - 1.0).abs() < 1e-15);
        assert!(se.abs() < 1e-12);
    }
}
