//! Small statistical toolbox shared by the estimators: means with standard
//! errors, jackknife, batch means for autocorrelated series, and the two
//! distributional tests used in acceptance checks.

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

/// Sample mean and standard error of the mean.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    assert!(n >= 2, "need at least two samples");
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n as f64 - 1.0);
    (mean, (var / n as f64).sqrt())
}

/// Standard error of a difference of independent estimates.
pub fn combined_se(se_a: f64, se_b: f64) -> f64 {
    (se_a * se_a + se_b * se_b).sqrt()
}

/// Jackknife standard error of an arbitrary statistic of the sample set.
pub fn jackknife_se(n: usize, mut stat_without: impl FnMut(usize) -> f64) -> f64 {
    assert!(n >= 2);
    let loo: Vec<f64> = (0..n).map(&mut stat_without).collect();
    let mean = loo.iter().sum::<f64>() / n as f64;
    let ss = loo.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>();
    ((n as f64 - 1.0) / n as f64 * ss).sqrt()
}

/// Mean and standard error for an autocorrelated series via batch means.
pub fn batch_means(xs: &[f64], batches: usize) -> (f64, f64) {
    assert!(batches >= 2 && xs.len() >= 2 * batches, "series too short for batching");
    let per = xs.len() / batches;
    let means: Vec<f64> = (0..batches)
        .map(|b| xs[b * per..(b + 1) * per].iter().sum::<f64>() / per as f64)
        .collect();
    mean_se(&means)
}

/// Result of a distributional hypothesis test.
#[derive(Clone, Copy, Debug)]
pub struct TestOutcome {
    pub statistic: f64,
    pub critical: f64,
    pub pass: bool,
}

/// Kolmogorov-Smirnov test of standard normality after studentizing by the
/// sample mean and standard deviation. The critical value is the plain KS
/// asymptote `c(alpha)/sqrt(n)`; with estimated parameters the true critical
/// value is smaller, so the test is conservative (it under-rejects).
pub fn ks_normality(xs: &[f64], alpha: f64) -> TestOutcome {
    let n = xs.len();
    assert!(n >= 20, "KS test needs a reasonable sample");
    let (mean, _) = mean_se(xs);
    let sd = {
        let var =
            xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n as f64 - 1.0);
        var.sqrt()
    };
    let mut zs: Vec<f64> = xs.iter().map(|x| (x - mean) / sd).collect();
    zs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut d = 0.0f64;
    for (i, z) in zs.iter().enumerate() {
        let cdf = normal.cdf(*z);
        let hi = (i as f64 + 1.0) / n as f64 - cdf;
        let lo = cdf - i as f64 / n as f64;
        d = d.max(hi).max(lo);
    }
    let c = ks_coefficient(alpha);
    let critical = c / (n as f64).sqrt();
    TestOutcome { statistic: d, critical, pass: d < critical }
}

fn ks_coefficient(alpha: f64) -> f64 {
    // c(alpha) = sqrt(-ln(alpha/2)/2)
    (-(alpha / 2.0).ln() / 2.0).sqrt()
}

/// Chi-square goodness-of-fit of observed integer counts against a discrete
/// pmf with fully specified parameters. Bins with expected count below 5 are
/// merged into their right neighbor (and the tail bin absorbs the rest).
pub fn chi_square_gof(
    observed: &[u64],
    total: u64,
    pmf: impl Fn(usize) -> f64,
    alpha: f64,
) -> TestOutcome {
    let mut merged: Vec<(f64, f64)> = Vec::new(); // (observed, expected)
    let mut acc_obs = 0.0;
    let mut acc_exp = 0.0;
    let mut covered = 0.0;
    for (k, obs) in observed.iter().enumerate() {
        let e = pmf(k) * total as f64;
        covered += pmf(k);
        acc_obs += *obs as f64;
        acc_exp += e;
        if acc_exp >= 5.0 {
            merged.push((acc_obs, acc_exp));
            acc_obs = 0.0;
            acc_exp = 0.0;
        }
    }
    // everything beyond the histogram range
    acc_exp += (1.0 - covered).max(0.0) * total as f64;
    if let Some(last) = merged.last_mut() {
        if acc_exp < 5.0 {
            last.0 += acc_obs;
            last.1 += acc_exp;
        } else {
            merged.push((acc_obs, acc_exp));
        }
    } else {
        merged.push((acc_obs, acc_exp));
    }
    assert!(merged.len() >= 2, "histogram too coarse for a chi-square test");
    let stat: f64 =
        merged.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
    let df = merged.len() as f64 - 1.0;
    let critical = ChiSquared::new(df).unwrap().inverse_cdf(1.0 - alpha);
    TestOutcome { statistic: stat, critical, pass: stat < critical }
}

/// Pearson correlation of two equally long series.
pub fn correlation(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    sxy / (sxx * syy).sqrt()
}

/// Least-squares slope through the origin of `y` against `x`, with the
/// coefficient of determination of that fit.
pub fn slope_through_origin(x: &[f64], y: &[f64]) -> (f64, f64) {
    assert_eq!(x.len(), y.len());
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let sxx: f64 = x.iter().map(|a| a * a).sum();
    let slope = sxy / sxx;
    let my = y.iter().sum::<f64>() / y.len() as f64;
    let ss_tot: f64 = y.iter().map(|v| (v - my) * (v - my)).sum();
    let ss_res: f64 = x.iter().zip(y).map(|(a, b)| (b - slope * a) * (b - slope * a)).sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    (slope, r2)
}
