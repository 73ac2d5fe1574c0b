//! Galton-Watson avalanches grown one generation at a time.
//!
//! Only the number of live individuals per generation is tracked, so memory
//! is O(1) in the avalanche size. The total offspring of `k` individuals is
//! drawn directly from the k-fold convolution of the offspring law when it
//! has a closed form.

#[allow(unused_imports)]
use num_traits::Float;
use rand_distr::{Binomial, Distribution, Gamma, Poisson};

use crate::error::{invalid, Result};
use crate::rng::RngStream;
use crate::special::hurwitz_zeta;
use alloc::vec::Vec;

/// Default avalanche size cap.
pub const DEFAULT_SIZE_CAP: u64 = 10_000_000;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OffspringKind {
    Poisson,
    /// 0 or 2 offspring, `P(2) = R0 / 2`.
    BernoulliPair,
    /// `P(n) ∝ (n + c)^(-1-alpha)`, `n >= 0`, shift `c` tuned to the mean.
    ZetaTail { alpha: f64 },
    /// `P(n) = (1 - p) p^n`.
    Geometric,
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct ZetaLaw {
    alpha: f64,
    shift: f64,
    p0: f64,
    // Acceptance ratio bound at n = 1.
    g1: f64,
}

impl ZetaLaw {
    fn mean_for_shift(alpha: f64, c: f64) -> f64 {
        hurwitz_zeta(alpha, c) / hurwitz_zeta(1.0 + alpha, c) - c
    }

    fn new(alpha: f64, mean: f64) -> Self {
        // The mean is increasing in the shift; bisect in log space.
        let (mut lo, mut hi) = (-30.0f64, 20.0f64);
        for _ in 0..64 {
            let mid = 0.5 * (lo + hi);
            if Self::mean_for_shift(alpha, mid.exp()) < mean {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let shift = (0.5 * (lo + hi)).exp();
        let p0 = shift.powf(-1.0 - alpha) / hurwitz_zeta(1.0 + alpha, shift);
        let mut law = ZetaLaw {
            alpha,
            shift,
            p0,
            g1: 1.0,
        };
        law.g1 = law.ratio(1.0 + shift);
        law
    }

    // Target over floor-of-Pareto proposal at u = n + c; decreasing in u.
    fn ratio(&self, u: f64) -> f64 {
        let a = self.alpha;
        a * u.powf(-1.0 - a) / (u.powf(-a) - (u + 1.0).powf(-a))
    }

    fn sample(&self, rng: &mut RngStream) -> u64 {
        if rng.open01() < self.p0 {
            return 0;
        }
        let base = 1.0 + self.shift;
        loop {
            let u = base * rng.open01().powf(-1.0 / self.alpha);
            let n = 1.0 + (u - base).floor();
            if !(n < 9.0e18) {
                continue;
            }
            if rng.open01() * self.g1 <= self.ratio(n + self.shift) {
                return n as u64;
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OffspringDistribution {
    kind: OffspringKind,
    mean: f64,
    zeta: Option<ZetaLaw>,
}

impl OffspringDistribution {
    pub fn new(kind: OffspringKind, mean: f64) -> Result<Self> {
        if !(mean >= 0.0) || !mean.is_finite() {
            return Err(invalid("mean", "R0 must be finite and non-negative"));
        }
        let mut zeta = None;
        match kind {
            OffspringKind::BernoulliPair if mean > 2.0 => {
                return Err(invalid("mean", "bernoulli-pair requires R0 <= 2"));
            }
            OffspringKind::ZetaTail { alpha } => {
                if !(alpha > 1.0 && alpha <= 2.0) {
                    return Err(invalid("alpha", "zeta-tail requires 1 < alpha <= 2"));
                }
                if mean > 0.0 {
                    zeta = Some(ZetaLaw::new(alpha, mean));
                }
            }
            _ => {}
        }
        Ok(Self { kind, mean, zeta })
    }

    pub fn poisson(mean: f64) -> Result<Self> {
        Self::new(OffspringKind::Poisson, mean)
    }

    pub fn bernoulli_pair(mean: f64) -> Result<Self> {
        Self::new(OffspringKind::BernoulliPair, mean)
    }

    pub fn zeta_tail(mean: f64, alpha: f64) -> Result<Self> {
        Self::new(OffspringKind::ZetaTail { alpha }, mean)
    }

    pub fn geometric(mean: f64) -> Result<Self> {
        Self::new(OffspringKind::Geometric, mean)
    }

    /// Same family, different mean.
    pub fn with_mean(&self, mean: f64) -> Result<Self> {
        Self::new(self.kind, mean)
    }

    pub fn kind(&self) -> OffspringKind {
        self.kind
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Shift `c` of the zeta-tail law.
    pub fn zeta_shift(&self) -> Option<f64> {
        self.zeta.map(|z| z.shift)
    }

    /// Offspring count of one individual.
    pub fn sample(&self, rng: &mut RngStream) -> u64 {
        self.sample_total(1, rng)
    }

    /// Total offspring of `k` independent individuals.
    pub fn sample_total(&self, k: u64, rng: &mut RngStream) -> u64 {
        if k == 0 || self.mean == 0.0 {
            return 0;
        }
        let kf = k as f64;
        match self.kind {
            OffspringKind::Poisson => poisson(kf * self.mean, rng),
            OffspringKind::BernoulliPair => {
                let p = (self.mean / 2.0).min(1.0);
                2 * Binomial::new(k, p).expect("p in [0, 1]").sample(rng)
            }
            OffspringKind::Geometric => {
                // Negative binomial as a gamma-mixed Poisson.
                let g = Gamma::new(kf, self.mean).expect("positive shape and scale");
                poisson(g.sample(rng), rng)
            }
            OffspringKind::ZetaTail { .. } => {
                let law = self.zeta.as_ref().expect("zeta law built for positive mean");
                (0..k).map(|_| law.sample(rng)).sum()
            }
        }
    }
}

fn poisson(lambda: f64, rng: &mut RngStream) -> u64 {
    if lambda <= 0.0 {
        return 0;
    }
    Poisson::new(lambda).expect("finite positive rate").sample(rng) as u64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AvalancheRecord {
    /// Total progeny including the initiating individual.
    pub size: u64,
    /// Number of non-empty generations.
    pub duration: u64,
    pub capped: bool,
}

/// One Galton-Watson tree from a single ancestor, stopped when it dies out
/// or when its size reaches `size_cap` with offspring still alive.
pub fn run_avalanche(
    dist: &OffspringDistribution,
    size_cap: u64,
    rng: &mut RngStream,
) -> Result<AvalancheRecord> {
    if size_cap == 0 {
        return Err(invalid("size_cap", "must be at least 1"));
    }
    let mut live = 1u64;
    let mut rec = AvalancheRecord {
        size: 1,
        duration: 1,
        capped: false,
    };
    loop {
        let children = dist.sample_total(live, rng);
        if children == 0 {
            return Ok(rec);
        }
        rec.duration += 1;
        rec.size = rec.size.saturating_add(children);
        if rec.size >= size_cap {
            rec.size = size_cap;
            rec.capped = true;
            return Ok(rec);
        }
        live = children;
    }
}

/// Run `index` of an ensemble. Each run draws from its own substream, so an
/// ensemble can be split across threads without changing any record.
pub fn run_indexed(
    dist: &OffspringDistribution,
    size_cap: u64,
    rng: &RngStream,
    index: u64,
) -> Result<AvalancheRecord> {
    run_avalanche(dist, size_cap, &mut rng.substream(index))
}

fn check_runs(n_runs: usize) -> Result<()> {
    if n_runs < 1000 {
        return Err(invalid("n_runs", "at least 1000 runs required"));
    }
    Ok(())
}

pub fn avalanche_ensemble(
    dist: &OffspringDistribution,
    n_runs: usize,
    size_cap: u64,
    rng: &RngStream,
) -> Result<Vec<AvalancheRecord>> {
    check_runs(n_runs)?;
    (0..n_runs as u64)
        .map(|i| run_indexed(dist, size_cap, rng, i))
        .collect()
}

/// Fraction of runs that reach the size cap.
pub fn survival_probability(
    dist: &OffspringDistribution,
    n_runs: usize,
    size_cap: u64,
    rng: &RngStream,
) -> Result<f64> {
    let recs = avalanche_ensemble(dist, n_runs, size_cap, rng)?;
    Ok(recs.iter().filter(|r| r.capped).count() as f64 / n_runs as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_mean(d: &OffspringDistribution, n: usize, seed: u64) -> (f64, f64) {
        let mut r = RngStream::new(seed, 0);
        let xs: Vec<f64> = (0..n).map(|_| d.sample(&mut r) as f64).collect();
        let m = xs.iter().sum::<f64>() / n as f64;
        let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64;
        (m, (v / n as f64).sqrt())
    }

    #[test]
    fn offspring_means() {
        for d in [
            OffspringDistribution::poisson(1.3).unwrap(),
            OffspringDistribution::bernoulli_pair(0.7).unwrap(),
            OffspringDistribution::geometric(0.9).unwrap(),
            OffspringDistribution::zeta_tail(0.8, 2.0).unwrap(),
        ] {
            let (m, se) = sample_mean(&d, 200_000, 4);
            assert!((m - d.mean()).abs() < 3.0 * se, "{d:?}: {m} ± {se}");
        }
    }

    #[test]
    fn zeta_shift_reproduces_mean() {
        for &(alpha, mean) in &[(1.5, 1.0), (2.0, 0.3), (1.2, 3.0)] {
            let d = OffspringDistribution::zeta_tail(mean, alpha).unwrap();
            let c = d.zeta_shift().unwrap();
            // Direct partial sum with a continuous tail correction.
            let (mut num, mut den) = (0.0, 0.0);
            let n_max = 2_000_000u64;
            for n in 0..n_max {
                let w = (n as f64 + c).powf(-1.0 - alpha);
                num += n as f64 * w;
                den += w;
            }
            let x = n_max as f64 + c - 0.5;
            den += x.powf(-alpha) / alpha;
            num += x.powf(1.0 - alpha) / (alpha - 1.0) - c * x.powf(-alpha) / alpha;
            assert!((num / den - mean).abs() < 2e-3 * mean.max(1.0), "{alpha} {mean}: {}", num / den);
        }
    }

    #[test]
    fn pair_offspring_are_even() {
        let d = OffspringDistribution::bernoulli_pair(1.5).unwrap();
        let mut r = RngStream::new(1, 1);
        assert!((0..1000).all(|_| d.sample(&mut r) % 2 == 0));
        assert!(OffspringDistribution::bernoulli_pair(2.5).is_err());
        assert!(OffspringDistribution::zeta_tail(1.0, 2.5).is_err());
    }

    #[test]
    fn zero_mean_gives_single_grain() {
        let d = OffspringDistribution::poisson(0.0).unwrap();
        let mut r = RngStream::new(0, 0);
        for _ in 0..100 {
            let a = run_avalanche(&d, 10, &mut r).unwrap();
            assert_eq!((a.size, a.duration, a.capped), (1, 1, false));
        }
    }

    #[test]
    fn subcritical_mean_size() {
        let d = OffspringDistribution::poisson(0.5).unwrap();
        let recs = avalanche_ensemble(&d, 200_000, DEFAULT_SIZE_CAP, &RngStream::new(2, 0)).unwrap();
        let m = recs.iter().map(|r| r.size as f64).sum::<f64>() / recs.len() as f64;
        // Var S = R0 / (1 - R0)^3 = 4.
        assert!((m - 2.0).abs() < 3.0 * (4.0f64 / 200_000.0).sqrt(), "{m}");
    }

    #[test]
    fn supercritical_capped_fraction_matches_fixed_point() {
        let mut phi: f64 = 0.5;
        for _ in 0..1000 {
            phi = 1.0 - (-1.5 * phi).exp();
        }
        let d = OffspringDistribution::poisson(1.5).unwrap();
        let p = survival_probability(&d, 20_000, 100_000, &RngStream::new(3, 0)).unwrap();
        assert!((p - phi).abs() < 0.015, "{p} vs {phi}");
    }

    #[test]
    fn geometric_survival_is_one_minus_inverse_mean() {
        let d = OffspringDistribution::geometric(1.25).unwrap();
        let p = survival_probability(&d, 20_000, 100_000, &RngStream::new(3, 1)).unwrap();
        assert!((p - 0.2).abs() < 0.015, "{p}");
    }

    #[test]
    fn cap_and_run_count_validation() {
        let d = OffspringDistribution::poisson(1.0).unwrap();
        let mut r = RngStream::new(0, 0);
        assert!(run_avalanche(&d, 0, &mut r).is_err());
        assert!(avalanche_ensemble(&d, 10, 100, &RngStream::new(0, 0)).is_err());
        let capped = OffspringDistribution::poisson(3.0).unwrap();
        let a = run_avalanche(&capped, 50, &mut r);
        assert!(a.unwrap().size <= 50);
    }
}
