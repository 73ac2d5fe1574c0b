#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec::Vec;

/// One logarithmic bin `[lo, hi)` with its geometric center and
/// probability density (count / (n * width)).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogBin {
    pub lo: f64,
    pub hi: f64,
    pub center: f64,
    pub density: f64,
}

/// Logarithmically binned density estimate. Non-positive and non-finite
/// samples are ignored; bins span the sample range, empty ones included.
pub fn log_binned_histogram(samples: &[f64], bins_per_decade: usize) -> Vec<LogBin> {
    let xs: Vec<f64> = samples
        .iter()
        .copied()
        .filter(|x| *x > 0.0 && x.is_finite())
        .collect();
    if xs.is_empty() || bins_per_decade == 0 {
        return Vec::new();
    }
    let b = bins_per_decade as f64;
    let index = |x: f64| (x.log10() * b).floor() as i64;
    let (lo_i, hi_i) = xs.iter().fold((i64::MAX, i64::MIN), |(lo, hi), &x| {
        let i = index(x);
        (lo.min(i), hi.max(i))
    });
    let mut counts = alloc::vec![0usize; (hi_i - lo_i + 1) as usize];
    for &x in &xs {
        counts[(index(x) - lo_i) as usize] += 1;
    }
    let n = xs.len() as f64;
    counts
        .iter()
        .enumerate()
        .map(|(k, &c)| {
            let i = lo_i + k as i64;
            let lo = 10f64.powf(i as f64 / b);
            let hi = 10f64.powf((i + 1) as f64 / b);
            LogBin {
                lo,
                hi,
                center: (lo * hi).sqrt(),
                density: c as f64 / (n * (hi - lo)),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::stats::linear_fit;
    use crate::rng::RngStream;

    #[test]
    fn single_value_one_bin() {
        let h = log_binned_histogram(&[3.0; 10], 5);
        assert_eq!(h.len(), 1);
        let mass: f64 = h.iter().map(|b| b.density * (b.hi - b.lo)).sum();
        assert!((mass - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pareto_slope() {
        let mut r = RngStream::new(8, 0);
        let xs: Vec<f64> = (0..200_000).map(|_| 1.0 / r.open01()).collect();
        let h = log_binned_histogram(&xs, 5);
        let pts: Vec<_> = h.iter().filter(|b| b.lo >= 1.0 && b.hi <= 1e3).collect();
        let x: Vec<f64> = pts.iter().map(|b| b.center.ln()).collect();
        let y: Vec<f64> = pts.iter().map(|b| b.density.ln()).collect();
        let fit = linear_fit(&x, &y);
        assert!((fit.slope + 2.0).abs() < 0.1, "{}", fit.slope);
    }
}
