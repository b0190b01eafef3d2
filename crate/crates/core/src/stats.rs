//! Small statistics toolkit used by the experiments and self-tests.

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Neumaier-compensated sum, independent of magnitude ordering.
pub fn stable_sum(xs: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for &x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Sample mean and standard error of the mean.
pub fn mean_sem(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = stable_sum(xs) / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = stable_sum(&dev) / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let (ma, _) = mean_sem(a);
    let (mb, _) = mean_sem(b);
    let cov: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).collect();
    let va: Vec<f64> = a.iter().map(|x| (x - ma) * (x - ma)).collect();
    let vb: Vec<f64> = b.iter().map(|y| (y - mb) * (y - mb)).collect();
    stable_sum(&cov) / (stable_sum(&va) * stable_sum(&vb)).sqrt()
}

/// Linear-interpolation quantile (Hyndman–Fan type 7) of an unsorted sample.
pub fn quantile(xs: &[f64], q: f64) -> f64 {
    assert!(!xs.is_empty() && (0.0..=1.0).contains(&q));
    let mut s = xs.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    let h = (s.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    s[lo] + (h - lo as f64) * (s[hi] - s[lo])
}

/// One-sample Kolmogorov–Smirnov statistic against a continuous CDF.
pub fn ks_one_sample(xs: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut s = xs.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(k, &x)| {
            let f = cdf(x);
            (f - k as f64 / n).abs().max(((k + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Two-sample chi-square homogeneity test on category counts.
///
/// Categories whose pooled expected count is below 5 are merged into one
/// bin. Returns `(statistic, degrees of freedom, p-value)`.
pub fn chi_square_two_sample(a: &[u64], b: &[u64]) -> (f64, usize, f64) {
    assert_eq!(a.len(), b.len());
    let na: u64 = a.iter().sum();
    let nb: u64 = b.iter().sum();
    let total = (na + nb) as f64;
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let mut rest = (0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        let pooled = (x + y) as f64;
        let smaller = pooled * na.min(nb) as f64 / total;
        if smaller < 5.0 {
            rest.0 += x as f64;
            rest.1 += y as f64;
        } else {
            bins.push((x as f64, y as f64));
        }
    }
    if rest.0 + rest.1 > 0.0 {
        bins.push(rest);
    }
    if bins.len() < 2 {
        return (0.0, 0, 1.0);
    }
    let mut stat = 0.0;
    for &(x, y) in &bins {
        let pooled = x + y;
        let ea = pooled * na as f64 / total;
        let eb = pooled * nb as f64 / total;
        stat += (x - ea).powi(2) / ea + (y - eb).powi(2) / eb;
    }
    let df = bins.len() - 1;
    let p = 1.0 - ChiSquared::new(df as f64).expect("df > 0").cdf(stat);
    (stat, df, p)
}

/// Chi-square goodness of fit of counts against category probabilities.
pub fn chi_square_fit(counts: &[u64], probs: &[f64]) -> (f64, usize, f64) {
    assert_eq!(counts.len(), probs.len());
    let n: u64 = counts.iter().sum();
    let stat: f64 = counts
        .iter()
        .zip(probs)
        .map(|(&c, &p)| {
            let e = p * n as f64;
            (c as f64 - e).powi(2) / e
        })
        .sum();
    let df = counts.len() - 1;
    let p = 1.0 - ChiSquared::new(df as f64).expect("df > 0").cdf(stat);
    (stat, df, p)
}

/// Total-variation distance between two empirical laws given as counts.
pub fn total_variation(a: &[u64], b: &[u64]) -> f64 {
    let na: u64 = a.iter().sum();
    let nb: u64 = b.iter().sum();
    0.5 * a
        .iter()
        .zip(b)
        .map(|(&x, &y)| (x as f64 / na as f64 - y as f64 / nb as f64).abs())
        .sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_interpolates() {
        let xs = [3.0, 1.0, 2.0, 4.0];
        assert_eq!(quantile(&xs, 0.5), 2.5);
        assert_eq!(quantile(&xs, 0.0), 1.0);
        assert_eq!(quantile(&xs, 1.0), 4.0);
    }

    #[test]
    fn mean_sem_of_constant() {
        assert_eq!(mean_sem(&[2.0, 2.0, 2.0]), (2.0, 0.0));
    }

    #[test]
    fn stable_sum_recovers_cancellation() {
        assert_eq!(stable_sum(&[1e16, 1.0, -1e16]), 1.0);
    }

    #[test]
    fn chi_square_identical_counts() {
        let (s, df, p) = chi_square_two_sample(&[100, 200, 300], &[100, 200, 300]);
        assert_eq!(s, 0.0);
        assert_eq!(df, 2);
        assert!((p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tv_of_disjoint_laws_is_one() {
        assert_eq!(total_variation(&[5, 0], &[0, 7]), 1.0);
    }
}
