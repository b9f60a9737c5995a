//! Small statistics helpers shared by the estimators and tests.

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

/// Binomial proportion with a Wilson score interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Proportion {
    pub successes: u64,
    pub trials: u64,
    pub estimate: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Two-sided Wilson interval at standard-normal quantile `z`.
pub fn wilson(successes: u64, trials: u64, z: f64) -> Proportion {
    if trials == 0 {
        return Proportion { successes, trials, estimate: f64::NAN, lo: 0.0, hi: 1.0 };
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    Proportion {
        successes,
        trials,
        estimate: p,
        lo: (centre - half).max(0.0),
        hi: (centre + half).min(1.0),
    }
}

/// Mean with standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanSe {
    pub n: usize,
    pub mean: f64,
    pub se: f64,
}

/// Pairwise summation; the result depends only on the order of `xs`.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

pub fn mean_se(xs: &[f64]) -> MeanSe {
    let n = xs.len();
    if n == 0 {
        return MeanSe { n, mean: f64::NAN, se: f64::NAN };
    }
    let mean = pairwise_sum(xs) / n as f64;
    if n == 1 {
        return MeanSe { n, mean, se: 0.0 };
    }
    let sq: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&sq) / (n - 1) as f64;
    MeanSe { n, mean, se: (var / n as f64).sqrt() }
}

/// Standard normal quantile.
pub fn normal_quantile(p: f64) -> f64 {
    Normal::new(0.0, 1.0).expect("unit normal").inverse_cdf(p)
}

/// Upper-tail critical value of a chi-square law with `df` degrees of freedom.
pub fn chi_square_critical(df: usize, alpha: f64) -> f64 {
    ChiSquared::new(df as f64).expect("df > 0").inverse_cdf(1.0 - alpha)
}

/// Pearson statistic for observed counts against expected counts.
pub fn pearson(observed: &[u64], expected: &[f64]) -> f64 {
    observed
        .iter()
        .zip(expected)
        .map(|(&o, &e)| {
            let d = o as f64 - e;
            d * d / e
        })
        .sum()
}

/// Chi-square test that a 0/1 sequence is i.i.d. Bernoulli(`p`), using
/// non-overlapping pairs (four cells, three degrees of freedom). Returns the
/// statistic and whether it stays below the critical value at level `alpha`.
pub fn iid_bernoulli_pair_test(bits: &[bool], p: f64, alpha: f64) -> (f64, bool) {
    let mut counts = [0u64; 4];
    for pair in bits.chunks_exact(2) {
        counts[(pair[0] as usize) * 2 + pair[1] as usize] += 1;
    }
    let m = (bits.len() / 2) as f64;
    let q = 1.0 - p;
    let expected = [m * q * q, m * q * p, m * p * q, m * p * p];
    let stat = pearson(&counts, &expected);
    (stat, stat < chi_square_critical(3, alpha))
}

/// Chi-square test of independence for a 2x2 table.
pub fn independence_2x2(table: [[u64; 2]; 2], alpha: f64) -> (f64, bool) {
    let n: u64 = table.iter().flatten().sum();
    let rows = [table[0][0] + table[0][1], table[1][0] + table[1][1]];
    let cols = [table[0][0] + table[1][0], table[0][1] + table[1][1]];
    let mut stat = 0.0;
    for r in 0..2 {
        for c in 0..2 {
            let e = rows[r] as f64 * cols[c] as f64 / n as f64;
            if e > 0.0 {
                let d = table[r][c] as f64 - e;
                stat += d * d / e;
            }
        }
    }
    (stat, stat < chi_square_critical(1, alpha))
}

/// Two-sample Kolmogorov–Smirnov distance.
pub fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < x.len() && j < y.len() {
        let v = if x[i] <= y[j] { x[i] } else { y[j] };
        while i < x.len() && x[i] <= v {
            i += 1;
        }
        while j < y.len() && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

/// Critical two-sample KS distance at level `alpha` (asymptotic).
pub fn ks_critical(n: usize, m: usize, alpha: f64) -> f64 {
    let c = (-0.5 * (alpha / 2.0).ln()).sqrt();
    c * ((n + m) as f64 / (n as f64 * m as f64)).sqrt()
}

/// Two-sample z-test on means; true if no significant difference at `alpha`.
pub fn two_sample_z(a: MeanSe, b: MeanSe, alpha: f64) -> (f64, bool) {
    let se = (a.se * a.se + b.se * b.se).sqrt();
    if se == 0.0 {
        return (0.0, a.mean == b.mean);
    }
    let z = (a.mean - b.mean) / se;
    (z, z.abs() < normal_quantile(1.0 - alpha / 2.0))
}

/// Least-squares slope and intercept of `y` on `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_brackets_estimate() {
        let p = wilson(30, 100, 1.96);
        assert!(p.lo < 0.3 && 0.3 < p.hi);
        let z = wilson(0, 100, 1.96);
        assert_eq!(z.lo, 0.0);
        assert!(z.hi > 0.0 && z.hi < 0.05);
    }

    #[test]
    fn mean_se_of_constant() {
        let m = mean_se(&[2.0; 10]);
        assert_eq!(m.mean, 2.0);
        assert_eq!(m.se, 0.0);
    }

    #[test]
    fn chi_square_critical_values() {
        assert!((chi_square_critical(1, 0.01) - 6.6349).abs() < 1e-3);
        assert!((chi_square_critical(3, 0.01) - 11.3449).abs() < 1e-3);
    }

    #[test]
    fn ks_identical_samples() {
        let a: Vec<f64> = (0..100).map(|i| i as f64).collect();
        assert_eq!(ks_distance(&a, &a), 0.0);
        let b: Vec<f64> = (0..100).map(|i| i as f64 + 1000.0).collect();
        assert_eq!(ks_distance(&a, &b), 1.0);
    }

    #[test]
    fn linear_fit_exact_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 5.0, 7.0];
        let (s, c) = linear_fit(&x, &y);
        assert!((s - 2.0).abs() < 1e-12 && (c - 1.0).abs() < 1e-12);
    }
}
