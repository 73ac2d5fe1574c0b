//! A sandpile whose slope is swept through the critical point.
//!
//! The branching ratio `R0` of the pile grows at rate `mu`; single grains
//! start rolling at Poisson rate `gamma`, each launching a branching
//! avalanche with the current `R0` as offspring mean. An avalanche that
//! reaches the system size is a landslide and resets the slope to 0.
//! Smaller avalanches leave the slope unchanged.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec::Vec;
use rand_distr::{Distribution, Exp, StandardNormal};

use crate::analysis::stats::normal_cdf;
use crate::branching::{run_avalanche, AvalancheRecord, OffspringDistribution, OffspringKind};
use crate::error::{invalid, Result};
use crate::rng::RngStream;
use crate::series::TimeSeries;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepConfig {
    pub mu: f64,
    pub gamma: f64,
    /// Sampling interval of the recorded slope path.
    pub dt: f64,
    pub system_size: u64,
    pub offspring: OffspringKind,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0) || !self.mu.is_finite() {
            return Err(invalid("mu", "must be positive"));
        }
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(invalid("gamma", "must be non-negative"));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(invalid("dt", "must be positive"));
        }
        if self.mu * self.dt >= 0.01 {
            return Err(invalid("dt", "mu * dt must be below 0.01"));
        }
        if self.system_size < 1000 {
            return Err(invalid("system_size", "must be at least 1000"));
        }
        // Validates family parameters such as the zeta-tail exponent.
        OffspringDistribution::new(self.offspring, 1.0)?;
        Ok(())
    }

    /// Offspring law at slope `r0`. A two-point law cannot have a mean
    /// above 2; beyond that every grain dislodges two more.
    fn offspring_at(&self, r0: f64) -> OffspringDistribution {
        let mean = match self.offspring {
            OffspringKind::BernoulliPair => r0.min(2.0),
            _ => r0,
        };
        OffspringDistribution::new(self.offspring, mean).expect("validated family")
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepEvent {
    pub t: f64,
    pub r0: f64,
    pub avalanche: AvalancheRecord,
}

impl SweepEvent {
    pub fn landslide(&self) -> bool {
        self.avalanche.capped
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRun {
    /// Slope sampled at `t = i * dt`.
    pub r0_path: TimeSeries,
    pub events: Vec<SweepEvent>,
}

/// Event-driven simulation up to `t_max`: trigger times are exact
/// exponential waiting times and the slope is linear in between.
pub fn simulate_sweep(cfg: &SweepConfig, t_max: f64, rng: &mut RngStream) -> Result<SweepRun> {
    cfg.validate()?;
    if !(t_max >= 0.0) || !t_max.is_finite() {
        return Err(invalid("t_max", "must be finite and non-negative"));
    }
    let n_samples = (t_max / cfg.dt).floor() as usize + 1;
    let mut path = TimeSeries::with_capacity(cfg.dt, 1, n_samples)?;
    let mut events = Vec::new();
    let wait = (cfg.gamma > 0.0).then(|| Exp::new(cfg.gamma).expect("positive rate"));

    let (mut t, mut r0) = (0.0f64, 0.0f64);
    let mut next_sample = 0usize;
    loop {
        let t_next = match &wait {
            Some(w) => t + w.sample(rng),
            None => f64::INFINITY,
        };
        let horizon = t_next.min(t_max);
        while next_sample < n_samples {
            let ts = next_sample as f64 * cfg.dt;
            if ts > horizon {
                break;
            }
            path.push(&[r0 + cfg.mu * (ts - t)]);
            next_sample += 1;
        }
        if t_next > t_max {
            break;
        }
        r0 += cfg.mu * (t_next - t);
        t = t_next;
        let avalanche = run_avalanche(&cfg.offspring_at(r0), cfg.system_size, rng)?;
        events.push(SweepEvent { t, r0, avalanche });
        if avalanche.capped {
            r0 = 0.0;
        }
    }
    Ok(SweepRun {
        r0_path: path,
        events,
    })
}

/// Stationary slope density
/// `Q(R0) = 1/Z` on `[0, 1]` and `exp(-gamma (R0-1)^2 / 2mu) / Z` above,
/// with `Z = 1 + sqrt(pi mu / 2 gamma)`, optionally truncated to
/// `R0 <= upper`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlopeDensity {
    mu: f64,
    gamma: f64,
    upper: f64,
}

impl SlopeDensity {
    pub fn z(&self) -> f64 {
        1.0 + (core::f64::consts::PI * self.mu / (2.0 * self.gamma)).sqrt()
    }

    fn width(&self) -> f64 {
        (self.mu / self.gamma).sqrt()
    }

    fn raw_cdf(&self, x: f64) -> f64 {
        let z = self.z();
        if x <= 0.0 {
            0.0
        } else if x <= 1.0 {
            x / z
        } else {
            let s = self.width();
            let tail = (2.0 * core::f64::consts::PI).sqrt() * s * (normal_cdf((x - 1.0) / s) - 0.5);
            (1.0 + tail) / z
        }
    }

    /// Restricts the law to `R0 <= upper`.
    pub fn truncated(self, upper: f64) -> Result<Self> {
        if !(upper > 0.0) {
            return Err(invalid("upper", "truncation point must be positive"));
        }
        Ok(Self { upper, ..self })
    }

    pub fn pdf(&self, x: f64) -> f64 {
        if x < 0.0 || x > self.upper {
            return 0.0;
        }
        let base = if x <= 1.0 {
            1.0
        } else {
            (-(x - 1.0) * (x - 1.0) * self.gamma / (2.0 * self.mu)).exp()
        };
        base / self.z() / self.raw_cdf(self.upper)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        (self.raw_cdf(x.min(self.upper)) / self.raw_cdf(self.upper)).clamp(0.0, 1.0)
    }

    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        loop {
            let x = if rng.open01() * self.z() < 1.0 {
                rng.open01()
            } else {
                let g: f64 = StandardNormal.sample(rng);
                1.0 + g.abs() * self.width()
            };
            if x <= self.upper {
                return x;
            }
        }
    }
}

pub fn stationary_slope_density(cfg: &SweepConfig) -> Result<SlopeDensity> {
    cfg.validate()?;
    if cfg.gamma == 0.0 {
        return Err(invalid("gamma", "no stationary state without triggers"));
    }
    Ok(SlopeDensity {
        mu: cfg.mu,
        gamma: cfg.gamma,
        upper: f64::INFINITY,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MixtureSample {
    pub r0: f64,
    pub avalanche: AvalancheRecord,
}

/// Sample `index` of the stationary mixture: a slope drawn from `density`
/// and one avalanche at that slope, on its own substream.
pub fn mixture_sample(
    cfg: &SweepConfig,
    density: &SlopeDensity,
    rng: &RngStream,
    index: u64,
) -> Result<MixtureSample> {
    let mut r = rng.substream(index);
    let r0 = density.sample(&mut r);
    let avalanche = run_avalanche(&cfg.offspring_at(r0), cfg.system_size, &mut r)?;
    Ok(MixtureSample { r0, avalanche })
}

/// Avalanches with slopes drawn from the stationary law.
pub fn mixture_avalanche_law(
    cfg: &SweepConfig,
    n_samples: usize,
    rng: &RngStream,
) -> Result<Vec<MixtureSample>> {
    let density = stationary_slope_density(cfg)?;
    (0..n_samples as u64)
        .map(|i| mixture_sample(cfg, &density, rng, i))
        .collect()
}
