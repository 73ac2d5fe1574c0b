//! Self-exciting volatility: ARCH(∞) returns and Hawkes point processes.
//!
//! Both are driven by a [`FeedbackKernel`] whose integral (or lag sum) is
//! the feedback parameter `g`; `g = 1` is the critical point.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::collections::VecDeque;
use alloc::vec::Vec;
use rand_distr::{Distribution, StandardNormal};

use crate::analysis::stats::batch_means;
use crate::error::{invalid, Error, Result};
use crate::rng::RngStream;

// Tail mass ignored when an untruncated power law has to be cut somewhere.
const TAIL_MASS: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum KernelKind {
    /// `Φ(τ) ∝ exp(-β τ)`.
    Exponential { beta: f64 },
    /// `Φ(τ) ∝ τ^(-1-θ)` on discrete lags, `(1+τ)^(-1-θ)` in continuous
    /// time, cut at `tau_max` when given.
    PowerLaw { theta: f64, tau_max: Option<f64> },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FeedbackKernel {
    pub kind: KernelKind,
    pub g: f64,
}

impl FeedbackKernel {
    pub fn exponential(g: f64, beta: f64) -> Result<Self> {
        let k = Self {
            kind: KernelKind::Exponential { beta },
            g,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn power_law(g: f64, theta: f64, tau_max: Option<f64>) -> Result<Self> {
        let k = Self {
            kind: KernelKind::PowerLaw { theta, tau_max },
            g,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.g >= 0.0) || !self.g.is_finite() {
            return Err(invalid("g", "must be finite and non-negative"));
        }
        match self.kind {
            KernelKind::Exponential { beta } => {
                if !(beta > 0.0) || !beta.is_finite() {
                    return Err(invalid("beta", "must be positive and finite"));
                }
            }
            KernelKind::PowerLaw { theta, tau_max } => {
                if !(theta > 0.0) || !theta.is_finite() {
                    return Err(invalid("theta", "must be positive and finite"));
                }
                match tau_max {
                    Some(t) if !(t >= 1.0) || !t.is_finite() => {
                        return Err(invalid("tau_max", "must be finite and at least 1"))
                    }
                    None if theta <= 1.0 => {
                        return Err(invalid("tau_max", "required when theta <= 1"))
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }

    /// Lag (or time) beyond which the kernel is treated as zero.
    pub fn memory(&self) -> f64 {
        match self.kind {
            KernelKind::Exponential { beta } => 1.0 / beta,
            KernelKind::PowerLaw { theta, tau_max } => {
                tau_max.unwrap_or_else(|| TAIL_MASS.powf(-1.0 / theta))
            }
        }
    }

    /// Discrete lag weights `Φ(1..=L)` summing to `g` (power law only).
    pub fn lag_weights(&self) -> Vec<f64> {
        match self.kind {
            KernelKind::Exponential { beta } => {
                let c = self.g * beta.exp_m1();
                let l = (40.0 / beta).ceil() as usize;
                (1..=l).map(|t| c * (-beta * t as f64).exp()).collect()
            }
            KernelKind::PowerLaw { theta, .. } => {
                let l = self.memory().floor().max(1.0) as usize;
                let raw: Vec<f64> = (1..=l).map(|t| (t as f64).powf(-1.0 - theta)).collect();
                let s: f64 = raw.iter().sum();
                raw.into_iter().map(|w| self.g * w / s).collect()
            }
        }
    }

    // Continuous-time density with integral g over [0, window].
    fn density(&self, tau: f64) -> f64 {
        match self.kind {
            KernelKind::Exponential { beta } => self.g * beta * (-beta * tau).exp(),
            KernelKind::PowerLaw { theta, .. } => {
                let w = self.window();
                if tau > w {
                    return 0.0;
                }
                let c = self.g * theta / (-(-theta * w.ln_1p()).exp_m1());
                c * (1.0 + tau).powf(-1.0 - theta)
            }
        }
    }

    // Horizon beyond which past events are dropped in continuous time.
    fn window(&self) -> f64 {
        match self.kind {
            KernelKind::Exponential { beta } => 40.0 / beta,
            KernelKind::PowerLaw { .. } => self.memory(),
        }
    }
}

/// Returns `r_t = σ_t ξ_t` with the conditional variances that produced
/// them.
#[derive(Clone, Debug, PartialEq)]
pub struct ReturnSeries {
    pub returns: Vec<f64>,
    pub sigma2: Vec<f64>,
}

impl ReturnSeries {
    /// Mean of `σ_t²` with a batch-means standard error.
    pub fn mean_sigma2(&self) -> (f64, f64) {
        batch_means(&self.sigma2, 50)
    }
}

/// `σ_t² = σ0² + Σ_{τ≥1} Φ(τ) r_{t-τ}²`, after a burn-in of ten kernel
/// memories.
pub fn simulate_arch(
    sigma0: f64,
    kernel: &FeedbackKernel,
    n_steps: usize,
    rng: &mut RngStream,
) -> Result<ReturnSeries> {
    kernel.validate()?;
    if !(sigma0 > 0.0) || !sigma0.is_finite() {
        return Err(invalid("sigma0", "must be positive and finite"));
    }
    if kernel.g >= 1.0 {
        return Err(Error::Nonstationary(kernel.g));
    }
    let s0 = sigma0 * sigma0;
    let burn = (10.0 * kernel.memory()).ceil() as usize;
    let mut out = ReturnSeries {
        returns: Vec::with_capacity(n_steps),
        sigma2: Vec::with_capacity(n_steps),
    };
    // Start the memory at its stationary level to shorten the transient.
    let s_inf = s0 / (1.0 - kernel.g);
    let mut emit = |t: usize, s2: f64, rng: &mut RngStream| {
        let xi: f64 = StandardNormal.sample(rng);
        let r = s2.sqrt() * xi;
        if t >= burn {
            out.returns.push(r);
            out.sigma2.push(s2);
        }
        r * r
    };
    match kernel.kind {
        KernelKind::Exponential { beta } => {
            let c = kernel.g * beta.exp_m1();
            let decay = (-beta).exp();
            let mut acc = s_inf / beta.exp_m1();
            for t in 0..burn + n_steps {
                let r2 = emit(t, s0 + c * acc, rng);
                acc = decay * (acc + r2);
            }
        }
        KernelKind::PowerLaw { .. } => {
            let w = kernel.lag_weights();
            let l = w.len();
            // Ring buffer; `hist[(head + k) % l]` is r² at lag k + 1.
            let mut hist = alloc::vec![s_inf; l];
            let mut head = 0usize;
            for t in 0..burn + n_steps {
                let mut s2 = s0;
                for (k, wk) in w.iter().enumerate() {
                    s2 += wk * hist[(head + k) % l];
                }
                let r2 = emit(t, s2, rng);
                head = (head + l - 1) % l;
                hist[head] = r2;
            }
        }
    }
    Ok(out)
}

/// Event times on `[0, t_max)` with their causal parents.
#[derive(Clone, Debug, PartialEq)]
pub struct EventSeries {
    pub times: Vec<f64>,
    pub t_max: f64,
    /// Index of the triggering event, `None` for immigrants. Empty when the
    /// series did not come from a simulation.
    pub parents: Vec<Option<usize>>,
}

impl EventSeries {
    pub fn new(times: Vec<f64>, t_max: f64) -> Result<Self> {
        if times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(invalid("times", "must be strictly increasing"));
        }
        if times.first().is_some_and(|t| *t < 0.0) || times.last().is_some_and(|t| *t > t_max) {
            return Err(invalid("times", "must lie in [0, t_max]"));
        }
        Ok(Self {
            times,
            t_max,
            parents: Vec::new(),
        })
    }

    pub fn rate(&self) -> f64 {
        self.times.len() as f64 / self.t_max
    }

    /// Mean number of direct children per event, from parent attribution.
    pub fn mean_offspring(&self) -> Option<f64> {
        if self.parents.is_empty() || self.times.is_empty() {
            return None;
        }
        let kids = self.parents.iter().filter(|p| p.is_some()).count();
        Some(kids as f64 / self.times.len() as f64)
    }

    /// Counts of events in consecutive windows of length `w`.
    pub fn window_counts(&self, w: f64) -> Vec<u64> {
        let n = (self.t_max / w).floor() as usize;
        let mut c = alloc::vec![0u64; n];
        for &t in &self.times {
            let k = (t / w) as usize;
            if k < n {
                c[k] += 1;
            }
        }
        c
    }
}

/// Ogata thinning with baseline `lambda0`. Every accepted event is
/// attributed to the baseline or to one earlier event, with probability
/// proportional to its contribution to the intensity.
pub fn simulate_hawkes(
    lambda0: f64,
    kernel: &FeedbackKernel,
    t_max: f64,
    rng: &mut RngStream,
) -> Result<EventSeries> {
    kernel.validate()?;
    if !(lambda0 > 0.0) || !lambda0.is_finite() || !(t_max > 0.0) || !t_max.is_finite() {
        return Err(invalid("lambda0", "baseline and horizon must be positive and finite"));
    }
    let critical_ok = matches!(kernel.kind, KernelKind::PowerLaw { .. });
    if kernel.g > 1.0 || (kernel.g == 1.0 && !critical_ok) {
        return Err(Error::Nonstationary(kernel.g));
    }
    let window = kernel.window();
    let mut times = Vec::new();
    let mut parents = Vec::new();
    // Indices of events still inside the kernel window.
    let mut live: VecDeque<usize> = VecDeque::new();
    let excitation = |t: f64, live: &VecDeque<usize>, times: &[f64]| -> f64 {
        live.iter().map(|&i| kernel.density(t - times[i])).sum()
    };
    let mut t = 0.0;
    // The kernels are non-increasing, so the intensity just after `t`
    // bounds it until the next event.
    let mut bound = lambda0;
    loop {
        t += -rng.open01().ln() / bound;
        if t >= t_max {
            break;
        }
        while live.front().is_some_and(|&i| t - times[i] > window) {
            live.pop_front();
        }
        let ex = excitation(t, &live, &times);
        let lam = lambda0 + ex;
        let u = rng.open01() * bound;
        if u <= lam {
            let parent = if u <= lambda0 {
                None
            } else {
                let mut v = u - lambda0;
                let mut pick = *live.back().expect("excitation implies live events");
                for &i in &live {
                    v -= kernel.density(t - times[i]);
                    if v <= 0.0 {
                        pick = i;
                        break;
                    }
                }
                Some(pick)
            };
            times.push(t);
            parents.push(parent);
            live.push_back(times.len() - 1);
            bound = lam + kernel.density(0.0);
        } else {
            bound = lam;
        }
    }
    Ok(EventSeries {
        times,
        t_max,
        parents,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum KernelFamily {
    Exponential,
    /// Power law with a known cutoff; the exponent is fitted.
    PowerLaw { tau_max: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BranchingFit {
    pub g: f64,
    pub lambda0: f64,
    pub kernel: FeedbackKernel,
    pub log_likelihood: f64,
}

/// Minimum sample size for [`estimate_branching_ratio`].
pub const MIN_EVENTS: usize = 10_000;

/// Exact Hawkes log-likelihood for the given baseline and kernel.
pub fn log_likelihood(events: &EventSeries, lambda0: f64, kernel: &FeedbackKernel) -> f64 {
    let ts = &events.times;
    let t_end = events.t_max;
    match kernel.kind {
        KernelKind::Exponential { beta } => {
            let mut a = 0.0;
            let mut ll = 0.0;
            let mut comp = lambda0 * t_end;
            for (i, &t) in ts.iter().enumerate() {
                if i > 0 {
                    a = (-beta * (t - ts[i - 1])).exp() * (1.0 + a);
                }
                ll += (lambda0 + kernel.g * beta * a).ln();
                comp += -kernel.g * (-beta * (t_end - t)).exp_m1();
            }
            ll - comp
        }
        KernelKind::PowerLaw { theta, .. } => {
            let w = kernel.window();
            let norm = -(-theta * w.ln_1p()).exp_m1();
            let mut ll = 0.0;
            let mut comp = lambda0 * t_end;
            let mut first = 0usize;
            for (i, &t) in ts.iter().enumerate() {
                while t - ts[first] > w {
                    first += 1;
                }
                let ex: f64 = ts[first..i].iter().map(|&s| kernel.density(t - s)).sum();
                ll += (lambda0 + ex).ln();
                let x = (t_end - t).min(w);
                comp += kernel.g * -(-theta * x.ln_1p()).exp_m1() / norm;
            }
            ll - comp
        }
    }
}

// Per-event excitation and total compensator of the unit-integral kernel
// with the given shape.
fn unit_terms(events: &EventSeries, family: KernelFamily, shape: f64) -> (Vec<f64>, f64) {
    let ts = &events.times;
    let t_end = events.t_max;
    let mut ex = Vec::with_capacity(ts.len());
    let mut comp = 0.0;
    match family {
        KernelFamily::Exponential => {
            let mut a = 0.0;
            for (i, &t) in ts.iter().enumerate() {
                if i > 0 {
                    a = (-shape * (t - ts[i - 1])).exp() * (1.0 + a);
                }
                ex.push(shape * a);
                comp -= (-shape * (t_end - t)).exp_m1();
            }
        }
        KernelFamily::PowerLaw { tau_max } => {
            let k = FeedbackKernel {
                kind: KernelKind::PowerLaw {
                    theta: shape,
                    tau_max: Some(tau_max),
                },
                g: 1.0,
            };
            let norm = -(-shape * tau_max.ln_1p()).exp_m1();
            let mut first = 0usize;
            for (i, &t) in ts.iter().enumerate() {
                while t - ts[first] > tau_max {
                    first += 1;
                }
                ex.push(ts[first..i].iter().map(|&s| k.density(t - s)).sum());
                let x = (t_end - t).min(tau_max);
                comp -= (-shape * x.ln_1p()).exp_m1() / norm;
            }
        }
    }
    (ex, comp)
}

// Maximizes sum ln(l0 + g e_i) - l0 T - g C over l0 > 0, g >= 0. The
// objective is concave, so projected Newton with backtracking converges.
fn profile_fit(ex: &[f64], comp: f64, t_end: f64) -> (f64, f64, f64) {
    let n = ex.len() as f64;
    let f = |a: f64, b: f64| -> f64 {
        ex.iter().map(|e| (a + b * e).ln()).sum::<f64>() - a * t_end - b * comp
    };
    let (mut a, mut b) = (0.5 * n / t_end, 0.5 * n / comp.max(1e-300));
    let mut val = f(a, b);
    for _ in 0..200 {
        let (mut ga, mut gb, mut haa, mut hab, mut hbb) = (-t_end, -comp, 0.0, 0.0, 0.0);
        for &e in ex {
            let il = 1.0 / (a + b * e);
            ga += il;
            gb += e * il;
            haa -= il * il;
            hab -= e * il * il;
            hbb -= e * e * il * il;
        }
        let det = haa * hbb - hab * hab;
        let (da, db) = if det > 0.0 {
            (-(hbb * ga - hab * gb) / det, -(haa * gb - hab * ga) / det)
        } else {
            (ga * a * a / n, gb * a * a / n)
        };
        let mut step = 1.0;
        let mut moved = false;
        for _ in 0..60 {
            let na = a + step * da;
            let nb = (b + step * db).max(0.0);
            if na > 0.0 {
                let nv = f(na, nb);
                if nv >= val {
                    moved = (na - a).abs() > 1e-13 * a || (nb - b).abs() > 1e-13 * b.max(1e-9);
                    a = na;
                    b = nb;
                    val = nv;
                    break;
                }
            }
            step *= 0.5;
        }
        if !moved {
            break;
        }
    }
    (a, b, val)
}

/// Maximum-likelihood branching ratio. For a fixed kernel shape (`β` or
/// `θ`) the intensity is linear in `(λ0, g)` and the log-likelihood is
/// concave there, so it is profiled out exactly; the shape is searched
/// on a log grid and refined by golden section, which copes with the
/// non-convexity in the shape.
pub fn estimate_branching_ratio(events: &EventSeries, family: KernelFamily) -> Result<BranchingFit> {
    let n = events.times.len();
    if n < MIN_EVENTS {
        return Err(Error::InsufficientData { got: n, need: MIN_EVENTS });
    }
    if let KernelFamily::PowerLaw { tau_max } = family {
        if !(tau_max >= 1.0) || !tau_max.is_finite() {
            return Err(invalid("tau_max", "must be finite and at least 1"));
        }
    }
    let rate = events.rate();
    let profile = |ln_shape: f64| {
        let (ex, comp) = unit_terms(events, family, ln_shape.exp());
        profile_fit(&ex, comp, events.t_max)
    };
    let (lo, hi, points) = match family {
        KernelFamily::Exponential => ((1e-3 * rate).ln(), (1e3 * rate).ln(), 25),
        KernelFamily::PowerLaw { .. } => (0.02f64.ln(), 5.0f64.ln(), 13),
    };
    let grid: Vec<f64> = (0..points)
        .map(|k| lo + (hi - lo) * k as f64 / (points - 1) as f64)
        .collect();
    let values: Vec<f64> = grid.iter().map(|&x| profile(x).2).collect();
    let k = (0..points)
        .filter(|&k| values[k].is_finite())
        .max_by(|&i, &j| values[i].total_cmp(&values[j]))
        .ok_or(Error::OptimizationFailed("non-finite likelihood"))?;
    let (mut l, mut r) = (grid[k.saturating_sub(1)], grid[(k + 1).min(points - 1)]);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut x1, mut x2) = (r - phi * (r - l), l + phi * (r - l));
    let (mut f1, mut f2) = (profile(x1).2, profile(x2).2);
    for _ in 0..40 {
        if f1 >= f2 {
            r = x2;
            x2 = x1;
            f2 = f1;
            x1 = r - phi * (r - l);
            f1 = profile(x1).2;
        } else {
            l = x1;
            x1 = x2;
            f1 = f2;
            x2 = l + phi * (r - l);
            f2 = profile(x2).2;
        }
    }
    let mut best = (0.5 * (l + r), profile(0.5 * (l + r)));
    if values[k] > best.1 .2 {
        best = (grid[k], profile(grid[k]));
    }
    let (ln_shape, (l0, g, ll)) = best;
    if !ll.is_finite() {
        return Err(Error::OptimizationFailed("non-finite likelihood"));
    }
    let shape = ln_shape.exp();
    let kernel = match family {
        KernelFamily::Exponential => FeedbackKernel::exponential(g, shape)?,
        KernelFamily::PowerLaw { tau_max } => FeedbackKernel::power_law(g, shape, Some(tau_max))?,
    };
    Ok(BranchingFit {
        g,
        lambda0: l0,
        kernel,
        log_likelihood: ll,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::stats::{ks_distance, mean, variance};
    use crate::special::hurwitz_zeta;

    #[test]
    fn kernel_validation() {
        assert!(FeedbackKernel::power_law(0.5, 0.8, None).is_err());
        assert!(FeedbackKernel::power_law(0.5, 0.8, Some(100.0)).is_ok());
        assert!(FeedbackKernel::power_law(0.5, 1.5, None).is_ok());
        assert!(FeedbackKernel::exponential(-0.1, 1.0).is_err());
        let w = FeedbackKernel::power_law(0.7, 0.5, Some(50.0)).unwrap().lag_weights();
        assert_eq!(w.len(), 50);
        assert!((w.iter().sum::<f64>() - 0.7).abs() < 1e-12);
        let w = FeedbackKernel::exponential(0.7, 0.2).unwrap().lag_weights();
        assert!((w.iter().sum::<f64>() - 0.7).abs() < 1e-6);
        // Untruncated power-law weights cover all but the ignored tail.
        let k = FeedbackKernel::power_law(1.0, 1.5, None).unwrap();
        let l = k.memory().floor();
        let tail = hurwitz_zeta(2.5, l + 1.0) / hurwitz_zeta(2.5, 1.0);
        assert!(tail < 2.0 * TAIL_MASS);
    }

    #[test]
    fn continuous_kernels_integrate_to_g() {
        for k in [
            FeedbackKernel::exponential(0.6, 2.0).unwrap(),
            FeedbackKernel::power_law(0.6, 0.5, Some(30.0)).unwrap(),
        ] {
            let h = 1e-3;
            let m = (k.window() / h) as usize;
            let s: f64 = (0..m).map(|i| h * k.density((i as f64 + 0.5) * h)).sum();
            assert!((s - 0.6).abs() < 1e-4, "{k:?} {s}");
        }
    }

    #[test]
    fn arch_without_feedback_is_iid() {
        let k = FeedbackKernel::exponential(0.0, 1.0).unwrap();
        let mut r = RngStream::new(1, 0);
        let s = simulate_arch(2.0, &k, 200_000, &mut r).unwrap();
        assert!(s.sigma2.iter().all(|&v| v == 4.0));
        assert!((variance(&s.returns) / 4.0 - 1.0).abs() < 0.02);
        assert!(matches!(
            simulate_arch(1.0, &FeedbackKernel::exponential(1.0, 1.0).unwrap(), 10, &mut r),
            Err(Error::Nonstationary(_))
        ));
    }

    #[test]
    fn arch_power_law_recursion_matches_direct_sum() {
        let k = FeedbackKernel::power_law(0.5, 0.7, Some(5.0)).unwrap();
        let w = k.lag_weights();
        let mut r = RngStream::new(2, 0);
        let s = simulate_arch(1.0, &k, 100, &mut r).unwrap();
        for t in 5..100 {
            let direct: f64 = 1.0 + (0..5).map(|j| w[j] * s.returns[t - 1 - j].powi(2)).sum::<f64>();
            assert!((direct - s.sigma2[t]).abs() < 1e-12);
        }
    }

    #[test]
    fn poisson_limit_and_rejections() {
        let k = FeedbackKernel::exponential(0.0, 1.0).unwrap();
        let mut r = RngStream::new(3, 0);
        let ev = simulate_hawkes(2.0, &k, 20_000.0, &mut r).unwrap();
        let gaps: Vec<f64> = ev.times.windows(2).map(|w| w[1] - w[0]).collect();
        assert!((mean(&gaps) - 0.5).abs() < 0.01);
        assert!(ks_distance(&gaps, |x| 1.0 - (-2.0 * x).exp()) < 0.01);
        assert!(simulate_hawkes(1.0, &FeedbackKernel::exponential(1.0, 1.0).unwrap(), 1.0, &mut r).is_err());
        assert!(simulate_hawkes(1.0, &FeedbackKernel::power_law(1.0, 0.5, Some(10.0)).unwrap(), 10.0, &mut r).is_ok());
        assert!(simulate_hawkes(1.0, &FeedbackKernel::power_law(1.2, 0.5, Some(10.0)).unwrap(), 1.0, &mut r).is_err());
    }

    #[test]
    fn likelihood_of_poisson_is_closed_form() {
        let ev = EventSeries::new(alloc::vec![0.5, 1.0, 2.5], 4.0).unwrap();
        let k = FeedbackKernel::exponential(0.0, 1.0).unwrap();
        let ll = log_likelihood(&ev, 0.75, &k);
        assert!((ll - (3.0 * 0.75f64.ln() - 3.0)).abs() < 1e-12);
        assert!(EventSeries::new(alloc::vec![1.0, 1.0], 2.0).is_err());
    }

    #[test]
    fn exponential_likelihood_matches_pairwise_sum() {
        let ev = EventSeries::new(alloc::vec![0.1, 0.4, 0.45, 1.7, 3.0], 4.0).unwrap();
        let k = FeedbackKernel::exponential(0.6, 1.3).unwrap();
        let mut direct = -0.8 * 4.0;
        for (i, &t) in ev.times.iter().enumerate() {
            let lam = 0.8 + ev.times[..i].iter().map(|s| 0.6 * 1.3 * (-1.3 * (t - s)).exp()).sum::<f64>();
            direct += lam.ln() - 0.6 * (1.0 - (-1.3 * (4.0 - t)).exp());
        }
        assert!((log_likelihood(&ev, 0.8, &k) - direct).abs() < 1e-12);
    }

    #[test]
    fn profile_matches_direct_likelihood() {
        let ev = EventSeries::new(alloc::vec![0.1, 0.4, 0.45, 1.7, 3.0, 3.2], 4.0).unwrap();
        for (fam, k) in [
            (KernelFamily::Exponential, FeedbackKernel::exponential(0.6, 1.3).unwrap()),
            (KernelFamily::PowerLaw { tau_max: 2.0 }, FeedbackKernel::power_law(0.6, 0.7, Some(2.0)).unwrap()),
        ] {
            let shape = match k.kind {
                KernelKind::Exponential { beta } => beta,
                KernelKind::PowerLaw { theta, .. } => theta,
            };
            let (ex, comp) = unit_terms(&ev, fam, shape);
            let via_terms: f64 = ex.iter().map(|e| (0.8 + 0.6 * e).ln()).sum::<f64>() - 0.8 * 4.0 - 0.6 * comp;
            assert!((via_terms - log_likelihood(&ev, 0.8, &k)).abs() < 1e-12);
            // The profiled optimum dominates any particular (l0, g).
            let (_, _, best) = profile_fit(&ex, comp, 4.0);
            assert!(best >= via_terms - 1e-12);
        }
    }
}
