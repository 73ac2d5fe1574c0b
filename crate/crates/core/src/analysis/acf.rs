//! Autocorrelation by direct lag products.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Threshold below which autocorrelation lags are excluded from decay fits.
pub const ACF_FIT_THRESHOLD: f64 = 0.05;

fn lag_product(centered: &[f64], k: usize) -> f64 {
    let n = centered.len();
    let s: f64 = centered[..n - k]
        .iter()
        .zip(&centered[k..])
        .map(|(a, b)| a * b)
        .sum();
    s / (n - k) as f64
}

fn centered(xs: &[f64]) -> Vec<f64> {
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    xs.iter().map(|x| x - m).collect()
}

/// Autocorrelation at lags `0..=max_lag`, each lag normalized by its own
/// number of products and the whole sequence by the lag-0 value.
///
/// A constant series has zero variance; its autocorrelation is defined
/// as identically 1.
pub fn autocorrelation(xs: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let need = 10 * max_lag.max(1);
    if xs.len() < need {
        return Err(Error::InsufficientData {
            got: xs.len(),
            need,
        });
    }
    let c = centered(xs);
    let c0 = lag_product(&c, 0);
    if c0 == 0.0 {
        return Ok(alloc::vec![1.0; max_lag + 1]);
    }
    Ok((0..=max_lag).map(|k| lag_product(&c, k) / c0).collect())
}

/// e-folding time of the autocorrelation, in units of `dt`.
///
/// Lags are computed until the autocorrelation first drops below
/// [`ACF_FIT_THRESHOLD`]; `ln acf(k) = -k dt / tau` is then fitted through
/// the origin over the preceding lags. When already lag 1 is below the
/// threshold the process has no resolvable memory and `dt` is returned.
pub fn decay_time(xs: &[f64], dt: f64) -> Result<f64> {
    let n = xs.len();
    if n < 20 {
        return Err(Error::InsufficientData { got: n, need: 20 });
    }
    let c = centered(xs);
    let c0 = lag_product(&c, 0);
    if c0 == 0.0 {
        return Err(Error::NonDecaying(0));
    }
    let max_lag = n / 10;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    let mut last = 0;
    for k in 1..=max_lag {
        let r = lag_product(&c, k) / c0;
        if r <= ACF_FIT_THRESHOLD {
            break;
        }
        let t = k as f64 * dt;
        sxy += t * r.ln();
        sxx += t * t;
        last = k;
    }
    if last == 0 {
        return Ok(dt);
    }
    if last == max_lag {
        return Err(Error::NonDecaying(max_lag));
    }
    let tau = -sxx / sxy;
    let fitted_steps = tau / dt;
    if (n as f64) < 10.0 * fitted_steps {
        return Err(Error::SeriesTooShort { len: n, fitted_steps });
    }
    Ok(tau)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn constant_series_is_one() {
        let xs = [2.0; 100];
        assert!(autocorrelation(&xs, 5).unwrap().iter().all(|&r| r == 1.0));
    }

    #[test]
    fn white_noise_is_uncorrelated() {
        let mut r = RngStream::new(5, 0);
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut r)).collect();
        let acf = autocorrelation(&xs, 20).unwrap();
        assert_eq!(acf[0], 1.0);
        let bound = 3.0 / (n as f64).sqrt();
        assert!(acf[1..].iter().all(|v| v.abs() < bound + 1e-3));
        assert_eq!(decay_time(&xs, 0.1).unwrap(), 0.1);
    }

    #[test]
    fn ar1_decay_time() {
        // x_{t+1} = phi x_t + noise has acf phi^k, decay time -1/ln(phi).
        let phi: f64 = 0.9;
        let mut r = RngStream::new(6, 0);
        let mut x = 0.0;
        let xs: Vec<f64> = (0..200_000)
            .map(|_| {
                let e: f64 = StandardNormal.sample(&mut r);
                x = phi * x + e;
                x
            })
            .collect();
        let tau = decay_time(&xs, 1.0).unwrap();
        let expect = -1.0 / phi.ln();
        assert!((tau / expect - 1.0).abs() < 0.1, "{tau} vs {expect}");
    }

    #[test]
    fn too_short_for_lags() {
        assert!(autocorrelation(&[1.0; 50], 10).is_err());
    }
}
