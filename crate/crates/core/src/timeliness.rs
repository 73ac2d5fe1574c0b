//! Delay propagation through task networks with time buffers:
//! `tau_i(n+1) = [max_{j in pred(i)} tau_j(n) - B]^+ + eps_i(n+1)`.

use alloc::vec::Vec;
use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::analysis::stats::{linear_fit, quantile};
use crate::error::{invalid, Error, Result};
use crate::rng::RngStream;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NetworkKind {
    Chain,
    RandomRegular { k: usize },
    DagLayered { width: usize, k: usize },
    Custom,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TaskNetwork {
    preds: Vec<Vec<usize>>,
    kind: NetworkKind,
}

impl TaskNetwork {
    /// Network from per-node predecessor lists. Nodes with no predecessor
    /// are sources.
    pub fn from_predecessors(preds: Vec<Vec<usize>>, kind: NetworkKind) -> Result<Self> {
        let n = preds.len();
        if n == 0 {
            return Err(invalid("n", "network must have at least one node"));
        }
        for (i, p) in preds.iter().enumerate() {
            if p.iter().any(|&j| j >= n) {
                return Err(invalid("predecessors", "node index out of range"));
            }
            if p.contains(&i) {
                return Err(invalid("predecessors", "self-loops are not allowed"));
            }
        }
        Ok(Self { preds, kind })
    }

    /// Network from directed `src -> dst` edges; duplicates are merged.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut preds = alloc::vec![Vec::new(); n];
        for &(s, d) in edges {
            if s >= n || d >= n {
                return Err(invalid("edges", "node index out of range"));
            }
            if !preds[d].contains(&s) {
                preds[d].push(s);
            }
        }
        Self::from_predecessors(preds, NetworkKind::Custom)
    }

    /// Node 0 is the source; node `i` waits for node `i - 1`.
    pub fn chain(n: usize) -> Result<Self> {
        let preds = (0..n)
            .map(|i| if i == 0 { Vec::new() } else { alloc::vec![i - 1] })
            .collect();
        Self::from_predecessors(preds, NetworkKind::Chain)
    }

    /// Every node has exactly `k` distinct predecessors and `k` successors:
    /// the union of `k` random derangements with no repeated edge.
    pub fn random_regular(n: usize, k: usize, rng: &mut RngStream) -> Result<Self> {
        if k == 0 || k >= n {
            return Err(invalid("k", "need 1 <= k < n"));
        }
        'attempt: for _ in 0..1000 {
            let mut preds: Vec<Vec<usize>> = alloc::vec![Vec::with_capacity(k); n];
            for _ in 0..k {
                let mut perm: Vec<usize> = (0..n).collect();
                let mut ok = false;
                for _ in 0..100 {
                    for i in (1..n).rev() {
                        let j = rng.random_range(0..=i);
                        perm.swap(i, j);
                    }
                    if (0..n).all(|i| perm[i] != i && !preds[i].contains(&perm[i])) {
                        ok = true;
                        break;
                    }
                }
                if !ok {
                    continue 'attempt;
                }
                for i in 0..n {
                    preds[i].push(perm[i]);
                }
            }
            return Self::from_predecessors(preds, NetworkKind::RandomRegular { k });
        }
        Err(invalid("k", "could not build a simple regular network"))
    }

    /// `layers` layers of `width` nodes; each node past the first layer has
    /// `k` distinct predecessors drawn from the previous layer.
    pub fn dag_layered(layers: usize, width: usize, k: usize, rng: &mut RngStream) -> Result<Self> {
        if layers == 0 || width == 0 || k == 0 || k > width {
            return Err(invalid("k", "need layers, width >= 1 and 1 <= k <= width"));
        }
        let mut preds = Vec::with_capacity(layers * width);
        for l in 0..layers {
            for _ in 0..width {
                if l == 0 {
                    preds.push(Vec::new());
                    continue;
                }
                let base = (l - 1) * width;
                let mut p: Vec<usize> = Vec::with_capacity(k);
                while p.len() < k {
                    let j = base + rng.random_range(0..width);
                    if !p.contains(&j) {
                        p.push(j);
                    }
                }
                preds.push(p);
            }
        }
        Self::from_predecessors(preds, NetworkKind::DagLayered { width, k })
    }

    pub fn n(&self) -> usize {
        self.preds.len()
    }

    pub fn predecessors(&self, i: usize) -> &[usize] {
        &self.preds[i]
    }

    pub fn kind(&self) -> NetworkKind {
        self.kind
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.preds
            .iter()
            .enumerate()
            .flat_map(|(d, p)| p.iter().map(move |&s| (s, d)))
    }
}

/// Exponential noise with the given mean. Draws are `mean * E` with `E` a
/// unit exponential, so rescaling the mean rescales every draw exactly.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DelayNoise {
    mean: f64,
}

impl DelayNoise {
    pub fn exponential(mean: f64) -> Result<Self> {
        if !(mean > 0.0) || !mean.is_finite() {
            return Err(invalid("noise_mean", "must be positive and finite"));
        }
        Ok(Self { mean })
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        let e: f64 = Exp1.sample(rng);
        self.mean * e
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DelayField {
    pub tau: Vec<f64>,
    pub iteration: u64,
}

impl DelayField {
    pub fn zeros(n: usize) -> Self {
        Self {
            tau: alloc::vec![0.0; n],
            iteration: 0,
        }
    }

    pub fn mean(&self) -> f64 {
        self.tau.iter().sum::<f64>() / self.tau.len() as f64
    }
}

fn check_buffer(b: f64) -> Result<()> {
    if !(b >= 0.0) || !b.is_finite() {
        return Err(invalid("B", "buffer must be finite and non-negative"));
    }
    Ok(())
}

/// One synchronous update. Noise is drawn in node order from `rng`, so
/// cloning the stream replays the same noise for a different buffer.
pub fn step_delays(
    net: &TaskNetwork,
    field: &DelayField,
    b: f64,
    noise: &DelayNoise,
    rng: &mut RngStream,
) -> Result<DelayField> {
    check_buffer(b)?;
    if field.tau.len() != net.n() {
        return Err(invalid("tau", "length must match the network"));
    }
    let mut out = DelayField {
        tau: Vec::with_capacity(net.n()),
        iteration: field.iteration + 1,
    };
    step_into(net, &field.tau, &mut out.tau, b, noise, rng);
    Ok(out)
}

fn step_into(
    net: &TaskNetwork,
    tau: &[f64],
    next: &mut Vec<f64>,
    b: f64,
    noise: &DelayNoise,
    rng: &mut RngStream,
) {
    next.clear();
    for p in &net.preds {
        let inherited = p
            .iter()
            .map(|&j| tau[j])
            .fold(f64::NEG_INFINITY, f64::max);
        let carried = if p.is_empty() {
            0.0
        } else {
            (inherited - b).max(0.0)
        };
        next.push(carried + noise.sample(rng));
    }
}

/// Runs `n_steps` updates from `tau0`, calling `observe(n, tau)` after each.
pub fn run_delays(
    net: &TaskNetwork,
    b: f64,
    noise: &DelayNoise,
    tau0: &[f64],
    n_steps: usize,
    rng: &mut RngStream,
    mut observe: impl FnMut(u64, &[f64]),
) -> Result<Vec<f64>> {
    check_buffer(b)?;
    if tau0.len() != net.n() {
        return Err(invalid("tau0", "length must match the network"));
    }
    let mut tau = tau0.to_vec();
    let mut next = Vec::with_capacity(tau.len());
    for n in 1..=n_steps as u64 {
        step_into(net, &tau, &mut next, b, noise, rng);
        core::mem::swap(&mut tau, &mut next);
        observe(n, &tau);
    }
    Ok(tau)
}

/// Drift rate relative to the noise mean above which a run counts as
/// supercritical.
pub const DRIFT_THRESHOLD: f64 = 0.01;

/// Slope of the spatial-mean delay over the second half of an
/// `n_steps` run from zero delay, in delay units per step.
pub fn drift_statistic(
    net: &TaskNetwork,
    b: f64,
    noise: &DelayNoise,
    n_steps: usize,
    rng: &mut RngStream,
) -> Result<f64> {
    if n_steps < 20 {
        return Err(invalid("n_steps", "at least 20 steps required"));
    }
    let half = n_steps / 2;
    let mut t = Vec::with_capacity(n_steps - half);
    let mut m = Vec::with_capacity(n_steps - half);
    let n = net.n() as f64;
    run_delays(net, b, noise, &alloc::vec![0.0; net.n()], n_steps, rng, |i, tau| {
        if i as usize > half {
            t.push(i as f64);
            m.push(tau.iter().sum::<f64>() / n);
        }
    })?;
    Ok(linear_fit(&t, &m).slope)
}

pub fn is_supercritical(drift: f64, noise: &DelayNoise) -> bool {
    drift > DRIFT_THRESHOLD * noise.mean()
}

/// Critical buffer by bisection on the drift statistic. Every evaluation
/// replays the same noise (common random numbers), so the verdict is
/// monotone in `B`. Returns the midpoint of the final bracket, which is
/// narrower than `tol`.
pub fn find_critical_buffer(
    net: &TaskNetwork,
    noise: &DelayNoise,
    b_range: (f64, f64),
    n_steps: usize,
    tol: f64,
    rng: &RngStream,
) -> Result<f64> {
    let (mut lo, mut hi) = b_range;
    check_buffer(lo)?;
    check_buffer(hi)?;
    if !(lo < hi) || !(tol > 0.0) {
        return Err(invalid("B_range", "need lo < hi and tol > 0"));
    }
    let supercritical =
        |b: f64| -> Result<bool> { Ok(is_supercritical(drift_statistic(net, b, noise, n_steps, &mut rng.clone())?, noise)) };
    if !supercritical(lo)? || supercritical(hi)? {
        return Err(Error::Unbracketed { lo, hi });
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if supercritical(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// A connected space-time region of excess delay.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DelayEpisode {
    /// Iteration of the first active site.
    pub start: u64,
    /// Number of iterations spanned.
    pub duration: u64,
    /// Number of active (node, iteration) sites.
    pub sites: u64,
    /// Delay in excess of the threshold, summed over all sites.
    pub size: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeReport {
    pub threshold: f64,
    pub median: f64,
    pub episodes: Vec<DelayEpisode>,
}

struct Dsu {
    parent: Vec<u32>,
    acc: Vec<DelayEpisode>,
}

impl Dsu {
    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let p = self.parent[x as usize];
            self.parent[x as usize] = self.parent[p as usize];
            x = p;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        let (keep, drop) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.parent[drop as usize] = keep;
        let d = self.acc[drop as usize];
        let k = &mut self.acc[keep as usize];
        let end = (k.start + k.duration).max(d.start + d.duration);
        k.start = k.start.min(d.start);
        k.duration = end - k.start;
        k.sites += d.sites;
        k.size += d.size;
    }
}

/// Threshold episodes: site `(i, n)` is active when `tau_i(n)` exceeds `q`
/// times the median delay of the run. Active sites are linked to the same
/// node at the previous iteration and to active predecessors at the
/// previous iteration (the sites the delay was inherited from). The median
/// is taken over the second half of a first pass; the second pass replays
/// the same noise.
pub fn delay_avalanches(
    net: &TaskNetwork,
    b: f64,
    noise: &DelayNoise,
    t_max: usize,
    q: f64,
    rng: &RngStream,
) -> Result<EpisodeReport> {
    if !(q > 0.0) {
        return Err(invalid("q", "threshold factor must be positive"));
    }
    let n = net.n();
    let zeros = alloc::vec![0.0; n];
    // Median over a thinned sample of the second half.
    let stride = ((n * t_max / 2) / 1_000_000).max(1);
    let mut sample = Vec::new();
    let mut counter = 0usize;
    run_delays(net, b, noise, &zeros, t_max, &mut rng.clone(), |it, tau| {
        if it as usize > t_max / 2 {
            for &v in tau {
                if counter % stride == 0 {
                    sample.push(v);
                }
                counter += 1;
            }
        }
    })?;
    let median = quantile(&sample, 0.5);
    let threshold = q * median;

    let mut dsu = Dsu {
        parent: Vec::new(),
        acc: Vec::new(),
    };
    const NONE: u32 = u32::MAX;
    let mut prev = alloc::vec![NONE; n];
    let mut cur = alloc::vec![NONE; n];
    let mut overflow = false;
    run_delays(net, b, noise, &zeros, t_max, &mut rng.clone(), |it, tau| {
        for i in 0..n {
            cur[i] = NONE;
            if tau[i] <= threshold || overflow {
                continue;
            }
            if dsu.parent.len() >= NONE as usize - 1 {
                overflow = true;
                continue;
            }
            let id = dsu.parent.len() as u32;
            dsu.parent.push(id);
            dsu.acc.push(DelayEpisode {
                start: it,
                duration: 1,
                sites: 1,
                size: tau[i] - threshold,
            });
            cur[i] = id;
            if prev[i] != NONE {
                dsu.union(id, prev[i]);
            }
            for &j in &net.preds[i] {
                if prev[j] != NONE {
                    dsu.union(id, prev[j]);
                }
            }
        }
        core::mem::swap(&mut prev, &mut cur);
    })?;
    if overflow {
        return Err(invalid("t_max", "too many active sites for episode extraction"));
    }
    let mut episodes = Vec::new();
    for x in 0..dsu.parent.len() as u32 {
        if dsu.find(x) == x {
            episodes.push(dsu.acc[x as usize]);
        }
    }
    episodes.sort_by(|a, b| a.start.cmp(&b.start));
    Ok(EpisodeReport {
        threshold,
        median,
        episodes,
    })
}
