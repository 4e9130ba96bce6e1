//! Small statistics kit for the experiment runners: summary moments,
//! order statistics, a paired one-sided t-test, and rank correlation.
//! Critical values come from `statrs` distributions rather than hard-coded
//! tables so significance levels stay configurable.

use statrs::distribution::{ChiSquared, ContinuousCDF, StudentsT};

pub fn mean(xs: &[f64]) -> f64 {
    assert!(!xs.is_empty(), "mean of an empty sample is undefined");
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased (n−1 denominator) sample variance; zero for fewer than two points.
pub fn sample_variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

pub fn standard_error(xs: &[f64]) -> f64 {
    (sample_variance(xs) / xs.len() as f64).sqrt()
}

/// z = (mean − target) / SE, with a floor on SE so the ratio stays finite.
/// An exact hit with zero spread (both differences zero) scores z = 0 rather
/// than 0/0.
pub fn z_score(sample_mean: f64, target: f64, se: f64) -> f64 {
    let diff = sample_mean - target;
    if diff == 0.0 {
        return 0.0;
    }
    diff / se.max(1e-300)
}

pub fn median(xs: &[f64]) -> f64 {
    assert!(!xs.is_empty(), "median of an empty sample is undefined");
    let mut sorted = xs.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("median input must not contain NaN"));
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Percentile with linear interpolation between closest ranks
/// (the rank is h = (n−1)·pct/100).
pub fn percentile(xs: &[f64], pct: f64) -> f64 {
    assert!(!xs.is_empty(), "percentile of an empty sample is undefined");
    assert!((0.0..=100.0).contains(&pct), "percentile must lie in [0, 100], got {pct}");
    let mut sorted = xs.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("percentile input must not contain NaN"));
    let h = (sorted.len() - 1) as f64 * pct / 100.0;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Outcome of a paired one-sided t-test of H1: mean(a − b) > 0.
#[derive(Clone, Copy, Debug)]
pub struct PairedTTest {
    pub mean_diff: f64,
    pub standard_error: f64,
    pub t_statistic: f64,
    pub dof: usize,
    /// Upper-tail critical value t_{1−α, dof}.
    pub critical: f64,
    pub significant: bool,
}

/// Paired one-sided t-test on equal-length samples. Pairs must be matched
/// (same underlying draw), which the runners arrange by reusing the data
/// stream across the compared settings.
pub fn paired_one_sided(a: &[f64], b: &[f64], alpha: f64) -> PairedTTest {
    assert_eq!(a.len(), b.len(), "paired test needs equal-length samples");
    assert!(a.len() >= 2, "paired test needs at least two pairs");
    assert!(alpha > 0.0 && alpha < 1.0, "significance level must lie in (0, 1)");
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean_diff = mean(&diffs);
    let se = standard_error(&diffs);
    let dof = diffs.len() - 1;
    let t_statistic = if mean_diff == 0.0 { 0.0 } else { mean_diff / se.max(1e-300) };
    let dist = StudentsT::new(0.0, 1.0, dof as f64).expect("valid t distribution");
    let critical = dist.inverse_cdf(1.0 - alpha);
    PairedTTest {
        mean_diff,
        standard_error: se,
        t_statistic,
        dof,
        critical,
        significant: t_statistic > critical,
    }
}

/// Upper-tail chi-square critical value: P(X > value) = alpha.
pub fn chi_square_critical(dof: usize, alpha: f64) -> f64 {
    assert!(dof >= 1, "chi-square needs at least one degree of freedom");
    assert!(alpha > 0.0 && alpha < 1.0, "significance level must lie in (0, 1)");
    let dist = ChiSquared::new(dof as f64).expect("valid chi-square distribution");
    dist.inverse_cdf(1.0 - alpha)
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "rank correlation needs equal-length samples");
    assert!(a.len() >= 2, "rank correlation needs at least two points");
    let ra = average_ranks(a);
    let rb = average_ranks(b);
    let ma = mean(&ra);
    let mb = mean(&rb);
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in ra.iter().zip(&rb) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va == 0.0 || vb == 0.0 {
        return 0.0;
    }
    cov / (va.sqrt() * vb.sqrt())
}

fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&i, &j| xs[i].partial_cmp(&xs[j]).expect("ranks need NaN-free input"));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        // Tied block [i, j] shares the average of ranks i+1 ..= j+1.
        let shared = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = shared;
        }
        i = j + 1;
    }
    ranks
}
