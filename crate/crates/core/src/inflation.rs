//! Mean-field repricing avalanches.
//!
//! Log-prices of `n` firms drift down at the inflation rate. A firm resets
//! its price to `p_plus` spontaneously at rate `gamma`, or when it reaches
//! `p_minus`. Each repricing pushes every other price down by
//! `J * jump / n`, which can tip further firms over `p_minus`. Cascades are
//! resolved instantaneously within a step.
//!
//! Firms carry a slowness `s_i`, uniform on `[1 - a, 1 + a]` and redrawn at
//! each repricing; a price shift `d` moves firm `i` by `d / s_i`. Weighted
//! by residence time the population drifts at exactly the inflation rate,
//! and the spread breaks the lock-step echoes that identical firms
//! otherwise produce.
//!
//! Prices are stored as keys against a global accumulated shift `X`:
//! `p_i = p_minus + (k_i - X) / s_i`, so a uniform shift is `X += d` and
//! the next firm to cross is the smallest key.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::collections::BinaryHeap;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::analysis::acf::autocorrelation;
use crate::branching::AvalancheRecord;
use crate::error::{invalid, Error, Result};
use crate::rng::RngStream;
use crate::series::TimeSeries;

/// Slowness half-width used unless a config says otherwise. Without some
/// spread, firms that reprice in the same cascade keep identical keys and
/// cross together forever after, so cascades become synchronized clumps.
pub const DEFAULT_SLOWNESS_SPREAD: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RepricingConfig {
    pub n_firms: usize,
    pub p_minus: f64,
    pub p_plus: f64,
    pub gamma: f64,
    pub j: f64,
    pub i0: f64,
    pub dt: f64,
    /// Half-width `a` of the slowness distribution.
    pub slowness_spread: f64,
}

impl RepricingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_firms == 0 || self.n_firms > u32::MAX as usize {
            return Err(invalid("n_firms", "must be between 1 and 2^32 - 1"));
        }
        if !(self.p_minus < self.p_plus) || !(self.p_plus > 0.0) || !self.p_minus.is_finite() || !self.p_plus.is_finite() {
            return Err(invalid("p_plus", "need p_minus < p_plus and p_plus > 0"));
        }
        for (name, v) in [("gamma", self.gamma), ("I0", self.i0), ("dt", self.dt)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(invalid(name, "must be positive and finite"));
            }
        }
        if !(self.j >= 0.0) || !self.j.is_finite() {
            return Err(invalid("J", "must be finite and non-negative"));
        }
        if !(0.0..1.0).contains(&self.slowness_spread) {
            return Err(invalid("slowness_spread", "must lie in [0, 1)"));
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        self.p_plus - self.p_minus
    }

    /// `gamma (p_plus - p_minus) / I`: the closed-form comparisons assume
    /// this is small.
    pub fn small_gamma_ratio(&self, inflation: f64) -> f64 {
        self.gamma * self.width() / inflation
    }
}

// Mean position, as a fraction of the width, under density ∝ exp(x u) on [0, 1].
fn exp_mean_fraction(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        0.5 + x / 12.0
    } else {
        1.0 / (-(-x).exp_m1()) - 1.0 / x
    }
}

/// Closed-form stationary law `P(p) ∝ exp(gamma p / I_st)` on
/// `[p_minus, p_plus]`, with `I_st` from the self-consistency
/// `I = I0 + J [gamma (p_plus - mean p) + I P(p_minus) (p_plus - p_minus)]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StationaryPrices {
    pub i_st: f64,
    p_minus: f64,
    width: f64,
    // gamma * width / i_st
    x: f64,
}

impl StationaryPrices {
    pub fn pdf(&self, p: f64) -> f64 {
        if p < self.p_minus || p > self.p_minus + self.width {
            return 0.0;
        }
        let u = (p - self.p_minus) / self.width;
        if self.x.abs() < 1e-12 {
            return 1.0 / self.width;
        }
        self.x * (self.x * u).exp() / (self.x.exp_m1() * self.width)
    }

    pub fn cdf(&self, p: f64) -> f64 {
        let u = ((p - self.p_minus) / self.width).clamp(0.0, 1.0);
        if self.x.abs() < 1e-12 {
            return u;
        }
        (self.x * u).exp_m1() / self.x.exp_m1()
    }

    pub fn mean(&self) -> f64 {
        self.p_minus + self.width * exp_mean_fraction(self.x)
    }

    /// Inverse-CDF draw.
    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        let v = rng.open01();
        let u = if self.x.abs() < 1e-12 {
            v
        } else {
            (v * self.x.exp_m1()).ln_1p() / self.x
        };
        self.p_minus + self.width * u
    }
}

/// Stationary law by fixed-point iteration on the inflation rate.
pub fn stationary_density(cfg: &RepricingConfig) -> Result<StationaryPrices> {
    cfg.validate()?;
    if cfg.j >= 1.0 {
        return Err(Error::NoStationaryState(cfg.j));
    }
    let d = cfg.width();
    let law = |i: f64| StationaryPrices {
        i_st: i,
        p_minus: cfg.p_minus,
        width: d,
        x: cfg.gamma * d / i,
    };
    let mut i = cfg.i0;
    for _ in 0..100_000 {
        let l = law(i);
        let feedback = cfg.gamma * (cfg.p_plus - l.mean()) + i * l.pdf(cfg.p_minus) * d;
        let next = cfg.i0 + cfg.j * feedback;
        if (next - i).abs() <= 1e-15 * next {
            return Ok(law(next));
        }
        i = next;
    }
    Err(Error::NoStationaryState(cfg.j))
}

#[derive(Clone, Copy, Debug)]
struct Entry {
    key: f64,
    firm: u32,
    version: u32,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Entry {}
impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Entry {
    // Min-heap on key, ties by firm index.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .key
            .total_cmp(&self.key)
            .then(other.firm.cmp(&self.firm))
    }
}

/// One repricing cascade: a firm crossing `p_minus` and everything it tips.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Cascade {
    pub record: AvalancheRecord,
    /// Firms tipped by members of the cascade (size minus the root).
    pub offspring: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepReport {
    /// Inflation realized over the step.
    pub inflation: f64,
    pub spontaneous: u64,
    pub forced: u64,
    pub cascades: Vec<Cascade>,
}

#[derive(Clone, Debug)]
pub struct RepricingState {
    cfg: RepricingConfig,
    key: Vec<f64>,
    slowness: Vec<f64>,
    version: Vec<u32>,
    heap: BinaryHeap<Entry>,
    shift: f64,
    time: f64,
    inflation: f64,
    // Ln(1 - P(spontaneous repricing in one step)).
    log_stay: f64,
}

impl RepricingState {
    /// Prices drawn from the closed-form stationary law (at `I0` when
    /// `J >= 1`).
    pub fn stationary(cfg: &RepricingConfig, rng: &mut RngStream) -> Result<Self> {
        cfg.validate()?;
        let law = if cfg.j < 1.0 {
            stationary_density(cfg)?
        } else {
            stationary_density(&RepricingConfig { j: 0.0, ..*cfg })?
        };
        let prices: Vec<f64> = (0..cfg.n_firms).map(|_| law.sample(rng)).collect();
        let mut st = Self::from_prices(cfg, &prices, rng)?;
        st.inflation = law.i_st;
        Ok(st)
    }

    pub fn from_prices(cfg: &RepricingConfig, prices: &[f64], rng: &mut RngStream) -> Result<Self> {
        cfg.validate()?;
        if prices.len() != cfg.n_firms {
            return Err(invalid("prices", "one price per firm"));
        }
        if prices.iter().any(|p| !(*p >= cfg.p_minus && *p <= cfg.p_plus)) {
            return Err(invalid("prices", "prices must lie in [p_minus, p_plus]"));
        }
        let mut st = Self {
            cfg: *cfg,
            key: Vec::with_capacity(cfg.n_firms),
            slowness: Vec::with_capacity(cfg.n_firms),
            version: alloc::vec![0; cfg.n_firms],
            heap: BinaryHeap::with_capacity(cfg.n_firms * 2),
            shift: 0.0,
            time: 0.0,
            inflation: cfg.i0,
            log_stay: -cfg.gamma * cfg.dt,
        };
        for (i, &p) in prices.iter().enumerate() {
            let s = st.draw_slowness(rng);
            st.slowness.push(s);
            st.key.push((p - cfg.p_minus) * s);
            st.heap.push(Entry {
                key: st.key[i],
                firm: i as u32,
                version: 0,
            });
        }
        Ok(st)
    }

    fn draw_slowness(&self, rng: &mut RngStream) -> f64 {
        1.0 + self.cfg.slowness_spread * (2.0 * rng.open01() - 1.0)
    }

    pub fn config(&self) -> &RepricingConfig {
        &self.cfg
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// Inflation realized over the last step.
    pub fn inflation(&self) -> f64 {
        self.inflation
    }

    pub fn price(&self, i: usize) -> f64 {
        self.cfg.p_minus + (self.key[i] - self.shift) / self.slowness[i]
    }

    pub fn prices(&self) -> Vec<f64> {
        (0..self.cfg.n_firms).map(|i| self.price(i)).collect()
    }

    // Resets firm i to p_plus at the current shift; returns the jump.
    fn reprice(&mut self, i: usize, rng: &mut RngStream) -> f64 {
        let jump = self.cfg.p_plus - self.price(i);
        let s = self.draw_slowness(rng);
        self.slowness[i] = s;
        self.key[i] = self.shift + self.cfg.width() * s;
        self.version[i] = self.version[i].wrapping_add(1);
        self.heap.push(Entry {
            key: self.key[i],
            firm: i as u32,
            version: self.version[i],
        });
        jump
    }

    // Pops the next live firm with key <= limit.
    fn pop_crossed(&mut self, limit: f64) -> Option<usize> {
        while let Some(top) = self.heap.peek() {
            if top.key > limit {
                return None;
            }
            let e = self.heap.pop().expect("peeked");
            if e.version == self.version[e.firm as usize] {
                return Some(e.firm as usize);
            }
        }
        None
    }

    /// Advances one step of length `dt`.
    ///
    /// `cap` bounds the number of forced repricings in the step; firms still
    /// below `p_minus` when it is hit are held at `p_minus` and cross first
    /// in the next step. Without a cap, more than `2 n` forced repricings in
    /// one step is a runaway cascade.
    pub fn step(&mut self, rng: &mut RngStream, cap: Option<u64>) -> Result<StepReport> {
        let n = self.cfg.n_firms;
        let nf = n as f64;
        let jn = self.cfg.j / nf;

        // Spontaneous repricings: Bernoulli per firm via geometric gaps.
        let mut spont_jumps = 0.0;
        let mut spontaneous = 0u64;
        let mut i = 0usize;
        loop {
            let gap = (rng.open01().ln() / self.log_stay).floor();
            if !(gap < (n - i) as f64) {
                break;
            }
            i += gap as usize;
            spont_jumps += self.reprice(i, rng);
            spontaneous += 1;
            i += 1;
        }

        // Slow drift, including the immediate feedback of spontaneous jumps.
        self.shift += self.cfg.i0 * self.cfg.dt + jn * spont_jumps;

        // Fast phase: every firm now below p_minus roots its own cascade.
        let mut roots = Vec::new();
        while let Some(f) = self.pop_crossed(self.shift) {
            roots.push(f);
        }
        let limit = cap.unwrap_or(2 * n as u64);
        let mut forced = 0u64;
        let mut forced_jumps = 0.0;
        let mut cascades = Vec::with_capacity(roots.len());
        let mut generation = Vec::new();
        let mut next = Vec::new();
        let mut capped = false;
        for (r, &root) in roots.iter().enumerate() {
            if forced >= limit {
                if cap.is_none() {
                    return Err(Error::RunawayCascade(forced as usize));
                }
                // Hold the unprocessed roots at p_minus.
                for &f in &roots[r..] {
                    self.hold_at_floor(f);
                }
                break;
            }
            let mut rec = AvalancheRecord {
                size: 0,
                duration: 0,
                capped: false,
            };
            let mut offspring = 0u64;
            generation.clear();
            generation.push(root);
            while !generation.is_empty() {
                rec.duration += 1;
                next.clear();
                for &f in generation.iter() {
                    if forced >= limit {
                        rec.capped = true;
                        break;
                    }
                    let jump = self.reprice(f, rng);
                    forced += 1;
                    rec.size += 1;
                    forced_jumps += jump;
                    self.shift += jn * jump;
                    while let Some(t) = self.pop_crossed(self.shift) {
                        next.push(t);
                        offspring += 1;
                    }
                }
                if rec.capped {
                    for &f in generation.iter().chain(next.iter()) {
                        if self.price(f) < self.cfg.p_minus {
                            self.hold_at_floor(f);
                        }
                    }
                    capped = true;
                    break;
                }
                core::mem::swap(&mut generation, &mut next);
            }
            cascades.push(Cascade { record: rec, offspring });
            if capped {
                if cap.is_none() {
                    return Err(Error::RunawayCascade(forced as usize));
                }
                for &f in &roots[r + 1..] {
                    self.hold_at_floor(f);
                }
                break;
            }
        }

        self.time += self.cfg.dt;
        self.inflation = self.cfg.i0 + jn * (spont_jumps + forced_jumps) / self.cfg.dt;
        Ok(StepReport {
            inflation: self.inflation,
            spontaneous,
            forced,
            cascades,
        })
    }

    fn hold_at_floor(&mut self, f: usize) {
        self.key[f] = self.shift;
        self.version[f] = self.version[f].wrapping_add(1);
        self.heap.push(Entry {
            key: self.shift,
            firm: f as u32,
            version: self.version[f],
        });
    }
}

/// Single-step convenience wrapper: a step without a cascade cap.
pub fn step_abm(state: &mut RepricingState, rng: &mut RngStream) -> Result<StepReport> {
    state.step(rng, None)
}

#[derive(Clone, Debug, PartialEq)]
pub struct AbmRun {
    pub inflation: TimeSeries,
    /// `(t, cascade)` for every cascade after burn-in.
    pub cascades: Vec<(f64, Cascade)>,
    pub spontaneous: u64,
    pub forced: u64,
    pub final_prices: Vec<f64>,
}

impl AbmRun {
    pub fn mean_inflation(&self) -> f64 {
        let v = self.inflation.component_vec(0);
        v.iter().sum::<f64>() / v.len() as f64
    }

    /// Mean number of firms tipped per forced repricing.
    pub fn branching_ratio(&self) -> f64 {
        let off: u64 = self.cascades.iter().map(|(_, c)| c.offspring).sum();
        let size: u64 = self.cascades.iter().map(|(_, c)| c.record.size).sum();
        off as f64 / size.max(1) as f64
    }
}

/// Runs `burn_in + n_steps` steps from the stationary law and records the
/// last `n_steps`.
pub fn run_abm(
    cfg: &RepricingConfig,
    burn_in: usize,
    n_steps: usize,
    cap: Option<u64>,
    rng: &mut RngStream,
) -> Result<AbmRun> {
    let mut st = RepricingState::stationary(cfg, rng)?;
    let mut inflation = TimeSeries::with_capacity(cfg.dt, 1, n_steps)?;
    let mut cascades = Vec::new();
    let (mut spontaneous, mut forced) = (0, 0);
    for k in 0..burn_in + n_steps {
        let rep = st.step(rng, cap)?;
        if k < burn_in {
            continue;
        }
        inflation.push(&[rep.inflation]);
        spontaneous += rep.spontaneous;
        forced += rep.forced;
        let t = st.time();
        cascades.extend(rep.cascades.into_iter().map(|c| (t, c)));
    }
    Ok(AbmRun {
        inflation,
        cascades,
        spontaneous,
        forced,
        final_prices: st.prices(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SupercriticalRun {
    pub run: AbmRun,
    /// Lag (time units) of the highest autocorrelation peak of `I(t)` after
    /// its first zero crossing, if any.
    pub dominant_period: Option<f64>,
    /// Largest single cascade.
    pub max_cascade: u64,
}

/// Diagnostic run for `J > 1` with cascades capped at the population size.
pub fn supercritical_run(cfg: &RepricingConfig, t_max: f64, rng: &mut RngStream) -> Result<SupercriticalRun> {
    if !(cfg.j > 1.0) {
        return Err(invalid("J", "supercritical runs need J > 1"));
    }
    let n_steps = (t_max / cfg.dt).ceil() as usize;
    let run = run_abm(cfg, 0, n_steps, Some(cfg.n_firms as u64), rng)?;
    let max_cascade = run.cascades.iter().map(|(_, c)| c.record.size).max().unwrap_or(0);
    let dominant_period = dominant_period(&run.inflation);
    Ok(SupercriticalRun {
        run,
        dominant_period,
        max_cascade,
    })
}

fn dominant_period(series: &TimeSeries) -> Option<f64> {
    let xs = series.component_vec(0);
    let max_lag = xs.len() / 10;
    let acf = autocorrelation(&xs, max_lag).ok()?;
    let first_neg = acf.iter().position(|&r| r < 0.0)?;
    let (lag, &peak) = acf
        .iter()
        .enumerate()
        .skip(first_neg)
        .max_by(|a, b| a.1.total_cmp(b.1))?;
    (peak > 0.0).then(|| lag as f64 * series.dt())
}

/// Inverse of a count as the price flux each firm receives: used only to
/// keep the spontaneous-repricing draw testable.
#[cfg(test)]
fn bernoulli_count(n: usize, p: f64, rng: &mut RngStream) -> usize {
    use rand::Rng;
    (0..n).filter(|_| rng.random_bool(p)).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(j: f64) -> RepricingConfig {
        RepricingConfig {
            n_firms: 2000,
            p_minus: -1.0,
            p_plus: 1.0,
            gamma: 1e-3,
            j,
            i0: 0.01,
            dt: 0.1,
            slowness_spread: 0.1,
        }
    }

    #[test]
    fn stationary_inflation_closed_form() {
        let s = stationary_density(&cfg(0.0)).unwrap();
        assert_eq!(s.i_st, 0.01);
        let s = stationary_density(&cfg(0.9)).unwrap();
        assert!((s.i_st - 0.1).abs() < 1e-12, "{}", s.i_st);
        assert!(matches!(stationary_density(&cfg(1.0)), Err(Error::NoStationaryState(_))));
        let flat = stationary_density(&RepricingConfig { gamma: 1e-15, ..cfg(0.5) }).unwrap();
        assert!((flat.pdf(0.3) - 0.5).abs() < 1e-9);
    }

    #[test]
    fn density_integrates_to_one() {
        let s = stationary_density(&RepricingConfig { gamma: 0.05, ..cfg(0.3) }).unwrap();
        let trap = |lo: f64, hi: f64| {
            let m = 20_000;
            let h = (hi - lo) / m as f64;
            (0..m)
                .map(|k| 0.5 * h * (s.pdf(lo + k as f64 * h) + s.pdf(lo + (k + 1) as f64 * h)))
                .sum::<f64>()
        };
        let total = trap(-1.0, 1.0);
        assert!((total - 1.0).abs() < 1e-6, "{total}");
        assert!((s.cdf(0.2) - trap(-1.0, 0.2)).abs() < 1e-6);
    }

    #[test]
    fn no_coupling_no_cascades_beyond_single_crossings() {
        let mut r = RngStream::new(1, 0);
        let run = run_abm(&cfg(0.0), 0, 2000, None, &mut r).unwrap();
        assert!(run.cascades.iter().all(|(_, c)| c.record.size == 1 && c.offspring == 0));
        assert!(run.inflation.component_vec(0).iter().all(|&i| i == 0.01));
    }

    #[test]
    fn prices_stay_in_band() {
        let mut r = RngStream::new(2, 0);
        let mut st = RepricingState::stationary(&cfg(0.8), &mut r).unwrap();
        for _ in 0..500 {
            let rep = st.step(&mut r, None).unwrap();
            assert!(rep.inflation >= 0.01);
            assert!(st.prices().iter().all(|&p| (-1.0..=1.0).contains(&p)));
        }
    }

    #[test]
    fn capped_supercritical_keeps_band() {
        let c = RepricingConfig { j: 1.5, n_firms: 500, ..cfg(0.0) };
        let mut r = RngStream::new(3, 0);
        let run = supercritical_run(&c, 200.0, &mut r).unwrap();
        assert!(run.max_cascade <= 500);
        assert!(run.run.final_prices.iter().all(|&p| (-1.0..=1.0).contains(&p)));
    }

    #[test]
    fn geometric_gaps_match_bernoulli_rate() {
        let c = RepricingConfig { n_firms: 10_000, gamma: 0.05, dt: 1.0, ..cfg(0.0) };
        let mut r = RngStream::new(4, 0);
        let mut st = RepricingState::stationary(&c, &mut r).unwrap();
        let mut total = 0u64;
        for _ in 0..200 {
            total += st.step(&mut r, None).unwrap().spontaneous;
        }
        let p = 1.0 - (-0.05f64).exp();
        let expect = p * 10_000.0 * 200.0;
        assert!((total as f64 - expect).abs() < 4.0 * expect.sqrt());
        let direct = bernoulli_count(10_000, p, &mut r) as f64;
        assert!((direct - p * 10_000.0).abs() < 4.0 * (p * 10_000.0).sqrt());
    }
}
