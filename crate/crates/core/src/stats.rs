//! Small statistics toolkit for the Monte Carlo checks.

use rand::Rng;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF, StudentsT};

use crate::rng::StreamRng;

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Lower median: the element of rank `⌊(n−1)/2⌋`, so the median is always a sample value.
pub fn median(xs: &[f64]) -> f64 {
    assert!(!xs.is_empty(), "median of an empty sample");
    let mut v = xs.to_vec();
    let k = (v.len() - 1) / 2;
    *v.select_nth_unstable_by(k, f64::total_cmp).1
}

/// Empirical quantile of a sorted sample by the nearest-rank rule.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let idx = ((p * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len()) - 1;
    sorted[idx]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub slope_lo: f64,
    pub slope_hi: f64,
    pub n: usize,
}

/// Least squares `y ≈ slope·x + intercept` with a 95% t-interval for the slope.
pub fn linear_fit(x: &[f64], y: &[f64]) -> LinearFit {
    assert_eq!(x.len(), y.len());
    let n = x.len();
    assert!(n >= 2, "fit needs two points");
    let mx = mean(x);
    let my = mean(y);
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let r2 = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    let (slope_lo, slope_hi) = if n > 2 {
        let se = (sse / (n as f64 - 2.0) / sxx).sqrt();
        let t = StudentsT::new(0.0, 1.0, n as f64 - 2.0).expect("positive dof").inverse_cdf(0.975);
        (slope - t * se, slope + t * se)
    } else {
        (slope, slope)
    };
    LinearFit { slope, intercept, r2, slope_lo, slope_hi, n }
}

/// Fit of `log y` against `log x`.
pub fn log_log_fit(x: &[f64], y: &[f64]) -> LinearFit {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    linear_fit(&lx, &ly)
}

/// One-sample Kolmogorov–Smirnov distance against a continuous CDF.
pub fn ks_one_sample(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Two-sample Kolmogorov–Smirnov distance.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Asymptotic Kolmogorov tail `P(K > λ)`.
pub fn kolmogorov_tail(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// Asymptotic p-value of a two-sample KS distance.
pub fn ks_two_sample_p(d: f64, na: usize, nb: usize) -> f64 {
    let ne = (na * nb) as f64 / (na + nb) as f64;
    let sq = ne.sqrt();
    kolmogorov_tail((sq + 0.12 + 0.11 / sq) * d)
}

/// Pearson goodness-of-fit statistic and p-value (`k − 1` degrees of freedom).
pub fn chi_square_gof(observed: &[u64], probs: &[f64]) -> (f64, f64) {
    let n: u64 = observed.iter().sum();
    let stat: f64 = observed
        .iter()
        .zip(probs)
        .filter(|(_, &p)| p > 0.0)
        .map(|(&o, &p)| {
            let e = p * n as f64;
            (o as f64 - e).powi(2) / e
        })
        .sum();
    let dof = probs.iter().filter(|&&p| p > 0.0).count() as f64 - 1.0;
    (stat, chi_square_tail(stat, dof))
}

/// Chi-square homogeneity statistic of two histograms and its p-value.
pub fn chi_square_two_sample(a: &[u64], b: &[u64]) -> (f64, f64) {
    let (na, nb) = (a.iter().sum::<u64>() as f64, b.iter().sum::<u64>() as f64);
    let (ka, kb) = ((nb / na).sqrt(), (na / nb).sqrt());
    let mut stat = 0.0;
    let mut bins = 0;
    for (&x, &y) in a.iter().zip(b) {
        if x + y == 0 {
            continue;
        }
        bins += 1;
        stat += (ka * x as f64 - kb * y as f64).powi(2) / (x + y) as f64;
    }
    (stat, chi_square_tail(stat, bins as f64 - 1.0))
}

fn chi_square_tail(stat: f64, dof: f64) -> f64 {
    if dof < 1.0 {
        return 1.0;
    }
    1.0 - ChiSquared::new(dof).expect("positive dof").cdf(stat)
}

/// Total variation distance between two histograms after normalization.
pub fn tv_distance(a: &[u64], b: &[u64]) -> f64 {
    let (na, nb) = (a.iter().sum::<u64>() as f64, b.iter().sum::<u64>() as f64);
    0.5 * a.iter().zip(b).map(|(&x, &y)| (x as f64 / na - y as f64 / nb).abs()).sum::<f64>()
}

/// Percentile bootstrap 95% interval for the median.
pub fn bootstrap_median_ci(samples: &[f64], reps: usize, rng: &mut StreamRng) -> (f64, f64) {
    let n = samples.len();
    let mut meds: Vec<f64> = (0..reps)
        .map(|_| {
            let resample: Vec<f64> = (0..n).map(|_| samples[rng.random_range(0..n)]).collect();
            median(&resample)
        })
        .collect();
    meds.sort_by(f64::total_cmp);
    (quantile_sorted(&meds, 0.025), quantile_sorted(&meds, 0.975))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn median_is_a_sample_value() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.0);
        let xs = [0.3, 0.7, 0.1, 0.9];
        let m = median(&xs);
        let normalized: Vec<f64> = xs.iter().map(|x| x / m).collect();
        assert_eq!(median(&normalized), 1.0);
    }

    #[test]
    fn exact_line_fit() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [3.0, 5.0, 7.0, 9.0];
        let f = linear_fit(&x, &y);
        assert!((f.slope - 2.0).abs() < 1e-12 && (f.intercept - 1.0).abs() < 1e-12);
        assert!((f.r2 - 1.0).abs() < 1e-12);
        assert!((f.slope_hi - f.slope_lo).abs() < 1e-9);
        let g = log_log_fit(&[1.0, 2.0, 4.0], &[1.0, 4.0, 16.0]);
        assert!((g.slope - 2.0).abs() < 1e-12);
    }

    #[test]
    fn ks_statistics() {
        let uniform: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        assert!(ks_one_sample(&uniform, |x| x) <= 0.0005 + 1e-12);
        assert_eq!(ks_two_sample(&uniform, &uniform), 0.0);
        assert!((ks_two_sample(&[0.0, 1.0], &[2.0, 3.0]) - 1.0).abs() < 1e-12);
        assert!(kolmogorov_tail(0.5) > 0.9 && kolmogorov_tail(2.0) < 0.001);
    }

    #[test]
    fn chi_square_and_tv() {
        let (stat, p) = chi_square_gof(&[25, 25, 25, 25], &[0.25; 4]);
        assert_eq!(stat, 0.0);
        assert!((p - 1.0).abs() < 1e-12);
        assert_eq!(tv_distance(&[1, 1], &[2, 2]), 0.0);
        assert!((tv_distance(&[1, 0], &[0, 1]) - 1.0).abs() < 1e-12);
        let (s2, _) = chi_square_two_sample(&[10, 20], &[20, 40]);
        assert!(s2.abs() < 1e-12);
    }

    #[test]
    fn bootstrap_brackets_median() {
        let mut rng = stream(1, "boot", 0);
        let xs: Vec<f64> = (0..501).map(|i| i as f64).collect();
        let (lo, hi) = bootstrap_median_ci(&xs, 500, &mut rng);
        assert!(lo <= 250.0 && 250.0 <= hi);
    }
}
