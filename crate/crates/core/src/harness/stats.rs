//! Small statistics helpers for aggregating repetitions.

use statrs::distribution::{ContinuousCDF, StudentsT};

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation; zero for fewer than two values.
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Two-sided Student-t confidence interval for the mean.
pub fn t_interval(xs: &[f64], level: f64) -> Option<(f64, f64)> {
    if xs.len() < 2 {
        return None;
    }
    let m = mean(xs);
    let se = std_dev(xs) / (xs.len() as f64).sqrt();
    let t = StudentsT::new(0.0, 1.0, (xs.len() - 1) as f64)
        .ok()?
        .inverse_cdf(0.5 + level / 2.0);
    Some((m - t * se, m + t * se))
}

/// Least-squares slope of `ln y` against `ln x`. `None` with fewer than
/// two points or any non-positive value.
pub fn log_log_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 || points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0)) {
        return None;
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / logs.len() as f64;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / logs.len() as f64;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wilcoxon {
    /// Sum of the ranks of positive differences.
    pub w_plus: f64,
    /// Non-zero differences kept.
    pub pairs: usize,
    /// One-sided p-value for `x > y`.
    pub p_value: f64,
}

/// Exact one-sided Wilcoxon signed-rank test of `x > y` on paired samples.
/// Zero differences are dropped and tied magnitudes get mid-ranks.
pub fn wilcoxon_greater(x: &[f64], y: &[f64]) -> Wilcoxon {
    assert_eq!(x.len(), y.len(), "paired samples of different lengths");
    let mut diffs: Vec<f64> = x
        .iter()
        .zip(y)
        .map(|(a, b)| a - b)
        .filter(|d| *d != 0.0)
        .collect();
    let m = diffs.len();
    if m == 0 {
        return Wilcoxon {
            w_plus: 0.0,
            pairs: 0,
            p_value: 1.0,
        };
    }
    diffs.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
    // Doubled mid-ranks stay integral.
    let mut ranks2 = vec![0usize; m];
    let mut i = 0;
    while i < m {
        let mut j = i;
        while j + 1 < m && diffs[j + 1].abs() == diffs[i].abs() {
            j += 1;
        }
        for r in &mut ranks2[i..=j] {
            *r = i + j + 2;
        }
        i = j + 1;
    }
    let w2: usize = diffs
        .iter()
        .zip(&ranks2)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| *r)
        .sum();
    // Null distribution of the doubled statistic: each rank enters with
    // probability 1/2.
    let total: usize = ranks2.iter().sum();
    let mut counts = vec![0f64; total + 1];
    counts[0] = 1.0;
    for &r in &ranks2 {
        for s in (r..=total).rev() {
            counts[s] += counts[s - r];
        }
    }
    let upper: f64 = counts[w2..].iter().sum();
    Wilcoxon {
        w_plus: w2 as f64 / 2.0,
        pairs: m,
        p_value: upper / 2f64.powi(m as i32),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(mean(&xs), 2.5);
        assert!((std_dev(&xs) - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(std_dev(&[1.0]), 0.0);
        let (lo, hi) = t_interval(&xs, 0.95).unwrap();
        // t_{0.975, 3} = 3.182446305284263
        let half = 3.182_446_305_284_263 * (5.0f64 / 3.0).sqrt() / 2.0;
        assert!((lo - (2.5 - half)).abs() < 1e-9 && (hi - (2.5 + half)).abs() < 1e-9);
        assert!(t_interval(&[1.0], 0.95).is_none());
    }

    #[test]
    fn slope_of_power_law() {
        let pts: Vec<(f64, f64)> = [256.0, 1024.0, 4096.0]
            .iter()
            .map(|&n: &f64| (n, 3.0 * n.powf(-1.0 / 3.0)))
            .collect();
        assert!((log_log_slope(&pts).unwrap() + 1.0 / 3.0).abs() < 1e-12);
        assert!(log_log_slope(&pts[..1]).is_none());
        assert!(log_log_slope(&[(1.0, 1.0), (2.0, 0.0)]).is_none());
    }

    #[test]
    fn wilcoxon_matches_reference_values() {
        // All 8 differences positive: p = 2^-8.
        let x: Vec<f64> = (1..=8).map(|i| i as f64).collect();
        let y = vec![0.0; 8];
        let w = wilcoxon_greater(&x, &y);
        assert_eq!(w.w_plus, 36.0);
        assert!((w.p_value - 1.0 / 256.0).abs() < 1e-15);
        // Reference from scipy.stats.wilcoxon(d, alternative="greater"),
        // exact mode, d = [1.5, -0.5, 2.0, 3.0, -1.0, 2.5]: W+ = 18, p = 5/64.
        let d = [1.5, -0.5, 2.0, 3.0, -1.0, 2.5];
        let w = wilcoxon_greater(&d, &[0.0; 6]);
        assert_eq!(w.w_plus, 18.0);
        assert!((w.p_value - 0.078_125).abs() < 1e-15);
        let none = wilcoxon_greater(&[1.0, 2.0], &[1.0, 2.0]);
        assert_eq!(none.p_value, 1.0);
    }

    #[test]
    fn wilcoxon_handles_ties() {
        let d = [1.0, 1.0, -1.0, 2.0];
        let w = wilcoxon_greater(&d, &[0.0; 4]);
        // Mid-ranks 2, 2, 2, 4; W+ = 8. Subsets of {2,2,2,4} with sum >= 8:
        // {2,2,4}x3, {2,2,2,4} -> 4 of 16.
        assert_eq!(w.w_plus, 8.0);
        assert!((w.p_value - 4.0 / 16.0).abs() < 1e-15);
    }
}
