//! Maximum-likelihood power-law tail estimation.
//!
//! Exponents always refer to the probability *density*: a fit returning
//! `exponent = 1.5` means `P(x) ~ x^-1.5`, i.e. a CCDF decaying as
//! `x^-0.5`.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Minimum number of tail samples for any non-insufficient verdict.
pub const MIN_TAIL: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TailVerdict {
    PowerLaw,
    Exponential,
    Insufficient,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TailFit {
    pub exponent: f64,
    pub x_min: f64,
    pub n_tail: usize,
    pub ks_distance: f64,
    pub verdict: TailVerdict,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum XMin {
    Auto,
    Fixed(f64),
}

fn pareto_fit(tail: &[f64], x_min: f64) -> (f64, f64) {
    let n = tail.len() as f64;
    let s: f64 = tail.iter().map(|x| (x / x_min).ln()).sum();
    let alpha = 1.0 + n / s;
    let ks = crate::analysis::stats::ks_distance_sorted(tail, |x| {
        1.0 - (x / x_min).powf(1.0 - alpha)
    });
    (alpha, ks)
}

fn exponential_ks(tail: &[f64], x_min: f64) -> f64 {
    let excess = tail.iter().map(|x| x - x_min).sum::<f64>() / tail.len() as f64;
    if excess <= 0.0 {
        return 1.0;
    }
    let rate = 1.0 / excess;
    crate::analysis::stats::ks_distance_sorted(tail, |x| 1.0 - (-rate * (x - x_min)).exp())
}

/// Continuous power-law MLE `alpha = 1 + n / sum(ln(x / x_min))`.
///
/// With [`XMin::Auto`] the cutoff minimizes the KS distance over a grid
/// of candidate order statistics that keep at least [`MIN_TAIL`] points.
/// The verdict is `Exponential` when the KS distance of the power law
/// exceeds three times that of a shifted exponential fitted to the same
/// tail.
pub fn fit_power_law(samples: &[f64], x_min: XMin) -> TailFit {
    let mut sorted: Vec<f64> = samples.iter().copied().filter(|x| *x > 0.0).collect();
    sorted.sort_by(f64::total_cmp);

    let insufficient = |x_min: f64, n_tail: usize| TailFit {
        exponent: f64::NAN,
        x_min,
        n_tail,
        ks_distance: f64::NAN,
        verdict: TailVerdict::Insufficient,
    };

    let (x_min, start) = match x_min {
        XMin::Fixed(x) => {
            let start = sorted.partition_point(|v| *v < x);
            (x, start)
        }
        XMin::Auto => {
            if sorted.len() < MIN_TAIL {
                return insufficient(f64::NAN, sorted.len());
            }
            let max_start = sorted.len() - MIN_TAIL;
            let mut best: Option<(f64, usize, f64)> = None;
            let mut last_value = f64::NAN;
            let grid = 60;
            for g in 0..=grid {
                // Log-spaced tail sizes between n and MIN_TAIL.
                let frac = g as f64 / grid as f64;
                let tail_len = ((sorted.len() as f64).ln() * (1.0 - frac)
                    + (MIN_TAIL as f64).ln() * frac)
                    .exp()
                    .round() as usize;
                let mut s = sorted.len() - tail_len.clamp(MIN_TAIL, sorted.len());
                s = s.min(max_start);
                // Start at the first occurrence of the candidate value.
                let xm = sorted[s];
                if xm == last_value {
                    continue;
                }
                last_value = xm;
                s = sorted.partition_point(|v| *v < xm);
                let tail = &sorted[s..];
                if tail.len() < MIN_TAIL || tail[tail.len() - 1] <= xm {
                    continue;
                }
                let (_, ks) = pareto_fit(tail, xm);
                if best.map_or(true, |(_, _, b)| ks < b) {
                    best = Some((xm, s, ks));
                }
            }
            match best {
                Some((xm, s, _)) => (xm, s),
                None => return insufficient(f64::NAN, 0),
            }
        }
    };

    let tail = &sorted[start..];
    if tail.len() < MIN_TAIL || !(x_min > 0.0) {
        return insufficient(x_min, tail.len());
    }
    let (exponent, ks_distance) = pareto_fit(tail, x_min);
    let ks_exp = exponential_ks(tail, x_min);
    let verdict = if ks_distance > 3.0 * ks_exp || !(exponent > 1.0) {
        TailVerdict::Exponential
    } else {
        TailVerdict::PowerLaw
    };
    TailFit {
        exponent,
        x_min,
        n_tail: tail.len(),
        ks_distance,
        verdict,
    }
}

/// Power-law fit restricted to a finite window `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WindowFit {
    pub exponent: f64,
    pub std_error: f64,
    pub n: usize,
}

// Mean and variance of u on [0, w] under density proportional to exp(a u).
fn truncated_exp_moments(a: f64, w: f64) -> (f64, f64) {
    let aw = a * w;
    if aw.abs() < 1e-3 {
        let w2 = w * w;
        return (
            w / 2.0 + a * w2 / 12.0 - a * a * a * w2 * w2 / 720.0,
            w2 / 12.0 - a * a * w2 * w2 / 240.0,
        );
    }
    let mean = w / (-(-aw).exp_m1()) - 1.0 / a;
    let sh = (aw / 2.0).sinh();
    let var = 1.0 / (a * a) - w * w / (4.0 * sh * sh);
    (mean, var)
}

/// Maximum-likelihood exponent of a power law truncated to `[lo, hi]`
/// (`hi` may be infinite). Solves `E_alpha[ln x] = mean(ln x)`, which has
/// a unique root because the log-likelihood is concave in the exponent.
pub fn fit_power_law_window(samples: &[f64], lo: f64, hi: f64) -> Result<WindowFit> {
    let logs: Vec<f64> = samples
        .iter()
        .copied()
        .filter(|x| *x >= lo && *x <= hi)
        .map(|x| x.ln())
        .collect();
    let n = logs.len();
    if n < MIN_TAIL {
        return Err(Error::InsufficientData {
            got: n,
            need: MIN_TAIL,
        });
    }
    let u_lo = lo.ln();
    let target = logs.iter().sum::<f64>() / n as f64 - u_lo;
    if !hi.is_finite() {
        let alpha = 1.0 + 1.0 / target;
        return Ok(WindowFit {
            exponent: alpha,
            std_error: (alpha - 1.0) / (n as f64).sqrt(),
            n,
        });
    }
    let w = hi.ln() - u_lo;
    // exponent = 1 - a; mean of u increases with a.
    let (mut a_lo, mut a_hi) = (-60.0 / w.min(1.0), 60.0 / w.min(1.0));
    for _ in 0..200 {
        let mid = 0.5 * (a_lo + a_hi);
        if truncated_exp_moments(mid, w).0 < target {
            a_lo = mid;
        } else {
            a_hi = mid;
        }
    }
    let a = 0.5 * (a_lo + a_hi);
    let var = truncated_exp_moments(a, w).1;
    Ok(WindowFit {
        exponent: 1.0 - a,
        std_error: 1.0 / (n as f64 * var).sqrt(),
        n,
    })
}

/// Window fit for integer-valued data (avalanche sizes, durations) with the
/// usual half-integer continuity correction on the window edges.
pub fn fit_discrete_window(values: &[u64], lo: u64, hi: u64) -> Result<WindowFit> {
    let xs: Vec<f64> = values
        .iter()
        .filter(|&&v| v >= lo && v <= hi)
        .map(|&v| v as f64)
        .collect();
    fit_power_law_window(&xs, lo as f64 - 0.5, hi as f64 + 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    fn pareto(alpha: f64, x_min: f64, n: usize, seed: u64) -> Vec<f64> {
        let mut r = RngStream::new(seed, 0);
        (0..n)
            .map(|_| x_min * r.open01().powf(-1.0 / (alpha - 1.0)))
            .collect()
    }

    #[test]
    fn fixed_cutoff_recovers_exponent() {
        let xs = pareto(2.5, 1.0, 100_000, 1);
        let fit = fit_power_law(&xs, XMin::Fixed(1.0));
        assert!((fit.exponent - 2.5).abs() < 0.03, "{fit:?}");
        assert_eq!(fit.verdict, TailVerdict::PowerLaw);
    }

    #[test]
    fn too_few_samples_is_insufficient() {
        let xs = pareto(2.0, 1.0, 50, 2);
        assert_eq!(
            fit_power_law(&xs, XMin::Auto).verdict,
            TailVerdict::Insufficient
        );
        assert_eq!(
            fit_power_law(&xs, XMin::Fixed(1.0)).verdict,
            TailVerdict::Insufficient
        );
        assert!(fit_power_law_window(&xs, 1.0, 10.0).is_err());
    }

    #[test]
    fn window_fit_matches_untruncated_on_pure_law() {
        let xs = pareto(1.5, 1.0, 200_000, 3);
        let w = fit_power_law_window(&xs, 10.0, 1e4).unwrap();
        assert!((w.exponent - 1.5).abs() < 3.0 * w.std_error + 0.01, "{w:?}");
        let inf = fit_power_law_window(&xs, 1.0, f64::INFINITY).unwrap();
        assert!((inf.exponent - 1.5).abs() < 0.02);
    }

    #[test]
    fn window_moments_continuous_at_zero_rate() {
        let (m0, v0) = truncated_exp_moments(0.0, 2.0);
        for a in [-1e-3, -5e-4, 4e-4, 6e-4, 1e-3] {
            let (m1, v1) = truncated_exp_moments(a, 2.0);
            assert!((m0 - m1).abs() < 1e-3 && (v0 - v1).abs() < 1e-5, "{a}");
        }
        let (l, r) = (truncated_exp_moments(4.99e-4, 2.0), truncated_exp_moments(5.01e-4, 2.0));
        // d(mean)/da is the variance.
        assert!((r.0 - l.0 - l.1 * 2e-6).abs() < 1e-10);
        assert!((l.1 - r.1).abs() < 1e-9);
    }
}
