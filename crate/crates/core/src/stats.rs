//! Small statistical helpers: compensated sums, sample moments, a
//! one-sample Kolmogorov–Smirnov test and log-log regression.

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Sample mean and unbiased sample variance (two-pass, compensated).
pub fn mean_and_variance(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().copied().collect::<CompensatedSum>().value() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss = xs
        .iter()
        .map(|&x| (x - mean) * (x - mean))
        .collect::<CompensatedSum>()
        .value();
    (mean, ss / (n - 1) as f64)
}

/// Sample Pearson correlation.
pub fn correlation(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let (mx, vx) = mean_and_variance(xs);
    let (my, vy) = mean_and_variance(ys);
    let cov = xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| (x - mx) * (y - my))
        .collect::<CompensatedSum>()
        .value()
        / (xs.len() - 1) as f64;
    cov / (vx * vy).sqrt()
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    if xs.iter().chain(ys).any(|&v| !(v > 0.0) || !v.is_finite()) {
        return None;
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let k = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(sxy / sxx)
}

/// Two-sample z statistic `|m₁ − m₂| / √(s₁² + s₂²)` from means and
/// standard errors.
pub fn z_distance(mean_a: f64, stderr_a: f64, mean_b: f64, stderr_b: f64) -> f64 {
    let combined = (stderr_a * stderr_a + stderr_b * stderr_b).sqrt();
    if combined == 0.0 {
        if mean_a == mean_b {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (mean_a - mean_b).abs() / combined
    }
}

/// Survival function of the Kolmogorov distribution,
/// `Q(λ) = 2 Σ_{j≥1} (−1)^{j−1} e^{−2j²λ²}`.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut total = 0.0;
    let mut sign = 1.0;
    for j in 1..=100 {
        let jf = j as f64;
        let term = (-2.0 * jf * jf * lambda * lambda).exp();
        total += sign * term;
        if term < 1e-17 {
            break;
        }
        sign = -sign;
    }
    (2.0 * total).clamp(0.0, 1.0)
}

/// Result of a one-sample Kolmogorov–Smirnov test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsOutcome {
    /// `sup |F_N − F|`.
    pub statistic: f64,
    /// Asymptotic p-value with Stephens' small-sample correction.
    pub p_value: f64,
    pub samples: usize,
}

impl KsOutcome {
    pub fn passes(&self, alpha: f64) -> bool {
        self.p_value > alpha
    }

    /// Critical value of the statistic at level `alpha`.
    pub fn critical_value(&self, alpha: f64) -> f64 {
        ks_critical_value(self.samples, alpha)
    }
}

fn effective_sqrt_n(n: usize) -> f64 {
    let s = (n as f64).sqrt();
    s + 0.12 + 0.11 / s
}

/// Level-`alpha` critical value of the one-sample statistic, by bisection
/// on [`kolmogorov_survival`].
pub fn ks_critical_value(n: usize, alpha: f64) -> f64 {
    let (mut lo, mut hi) = (0.2, 5.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if kolmogorov_survival(mid) > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi) / effective_sqrt_n(n)
}

/// One-sample KS test against a CDF. `samples` is sorted in place.
pub fn ks_test(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> KsOutcome {
    samples.sort_by(|a, b| a.total_cmp(b));
    let values: Vec<f64> = samples.iter().map(|&x| cdf(x)).collect();
    ks_from_sorted_cdf(&values)
}

/// KS test against a density given only pointwise: the CDF at each sorted
/// sample is accumulated by Gauss–Legendre quadrature over the gaps,
/// starting from `support_start` where the CDF is zero.
pub fn ks_test_density(
    samples: &mut [f64],
    density: impl Fn(f64) -> f64,
    support_start: f64,
    max_panel: f64,
) -> KsOutcome {
    samples.sort_by(|a, b| a.total_cmp(b));
    let mut cdf = Vec::with_capacity(samples.len());
    let mut acc = CompensatedSum::new();
    let mut left = support_start;
    for &x in samples.iter() {
        if x > left {
            acc.add(gauss_legendre(&density, left, x, max_panel));
            left = x;
        }
        cdf.push(acc.value());
    }
    ks_from_sorted_cdf(&cdf)
}

fn ks_from_sorted_cdf(cdf: &[f64]) -> KsOutcome {
    let n = cdf.len();
    let nf = n as f64;
    let mut d: f64 = 0.0;
    for (i, &f) in cdf.iter().enumerate() {
        let above = (i + 1) as f64 / nf - f;
        let below = f - i as f64 / nf;
        d = d.max(above).max(below);
    }
    KsOutcome {
        statistic: d,
        p_value: kolmogorov_survival(effective_sqrt_n(n) * d),
        samples: n,
    }
}

const GL5_X: [f64; 5] = [
    -0.906_179_845_938_663_9,
    -0.538_469_310_105_683_1,
    0.0,
    0.538_469_310_105_683_1,
    0.906_179_845_938_663_9,
];
const GL5_W: [f64; 5] = [
    0.236_926_885_056_189_08,
    0.478_628_670_499_366_47,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_47,
    0.236_926_885_056_189_08,
];

fn gauss_legendre(f: &impl Fn(f64) -> f64, a: f64, b: f64, max_panel: f64) -> f64 {
    let panels = ((b - a) / max_panel).ceil().max(1.0) as usize;
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for i in 0..panels {
        let mid = a + (i as f64 + 0.5) * h;
        let mut s = 0.0;
        for j in 0..5 {
            s += GL5_W[j] * f(mid + 0.5 * h * GL5_X[j]);
        }
        total += 0.5 * h * s;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut acc = CompensatedSum::new();
        acc.add(1e16);
        for _ in 0..10 {
            acc.add(1.0);
        }
        acc.add(-1e16);
        assert_eq!(acc.value(), 10.0);
    }

    #[test]
    fn moments_of_small_sample() {
        let (m, v) = mean_and_variance(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((v - 5.0 / 3.0).abs() < 1e-15);
        assert_eq!(mean_and_variance(&[7.0]), (7.0, 0.0));
    }

    #[test]
    fn slope_of_power_law() {
        let xs = [10.0, 100.0, 1000.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(-1.5)).collect();
        assert!((log_log_slope(&xs, &ys).unwrap() + 1.5).abs() < 1e-12);
        assert!(log_log_slope(&xs, &[1.0, 0.0, 1.0]).is_none());
    }

    #[test]
    fn kolmogorov_quantiles() {
        // Classical asymptotic critical values.
        assert!((kolmogorov_survival(1.358_1) - 0.05).abs() < 1e-3);
        assert!((kolmogorov_survival(1.627_6) - 0.01).abs() < 1e-4);
        assert!((ks_critical_value(1_000_000, 0.01) * 1000.0 - 1.6276).abs() < 1e-3);
    }

    #[test]
    fn ks_accepts_exact_grid_and_rejects_shifted() {
        let mut xs: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        let ok = ks_test(&mut xs, |x| x);
        assert!(ok.passes(0.01));
        assert!(ok.statistic <= 0.0005 + 1e-12);
        let bad = ks_test(&mut xs, |x| (x * 1.2).min(1.0));
        assert!(!bad.passes(0.01));
    }

    #[test]
    fn density_route_matches_cdf_route() {
        let mut a: Vec<f64> = (0..500).map(|i| ((i * 37 % 500) as f64 + 0.3) / 250.0).collect();
        let mut b = a.clone();
        let via_cdf = ks_test(&mut a, |x| 1.0 - (-x).exp());
        let via_density = ks_test_density(&mut b, |x| (-x).exp(), 0.0, 0.01);
        assert!((via_cdf.statistic - via_density.statistic).abs() < 1e-12);
    }
}
