//! Ornstein-Uhlenbeck relaxation: `dx = -kappa x dt + sigma dW`, and its
//! multidimensional form `dx = -K x dt + sigma dW`.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use crate::analysis::decay_time;
use crate::error::{invalid, Error, Result};
use crate::linalg::{self, check_square_finite};
use crate::rng::RngStream;
use crate::series::TimeSeries;

/// Largest admissible `dt * rate` for the Euler-Maruyama step.
pub const MAX_STEP_RATE: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum NoiseKind {
    #[default]
    GaussianWhite,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseSpec {
    pub sigma: f64,
    pub kind: NoiseKind,
}

impl NoiseSpec {
    pub fn gaussian(sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(invalid("sigma", "must be finite and non-negative"));
        }
        Ok(Self {
            sigma,
            kind: NoiseKind::GaussianWhite,
        })
    }
}

/// Square matrix `K` of the linearized dynamics `dx/dt = -K x`; stability
/// requires its spectrum in the open right half-plane.
#[derive(Clone, Debug, PartialEq)]
pub struct StabilityMatrix(DMatrix<f64>);

impl StabilityMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        check_square_finite(&entries, "K")?;
        Ok(Self(entries))
    }

    pub fn diagonal(d: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_row_slice(d)))
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    /// Smallest real part of the spectrum, `kappa*`.
    pub fn kappa_star(&self) -> f64 {
        linalg::min_real_part(&self.0)
    }
}

fn check_dt(dt: f64) -> Result<()> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(invalid("dt", "must be positive and finite"));
    }
    Ok(())
}

/// Euler-Maruyama path of length `n_steps + 1`, starting at `x0`.
pub fn simulate_ou(
    kappa: f64,
    noise: NoiseSpec,
    x0: f64,
    dt: f64,
    n_steps: usize,
    rng: &mut RngStream,
) -> Result<TimeSeries> {
    check_dt(dt)?;
    if !(kappa >= 0.0) || !kappa.is_finite() {
        return Err(invalid("kappa", "must be finite and non-negative"));
    }
    if dt * kappa >= MAX_STEP_RATE {
        return Err(Error::DiscretizationTooCoarse(dt * kappa));
    }
    let decay = 1.0 - kappa * dt;
    let amp = noise.sigma * dt.sqrt();
    let mut xs = Vec::with_capacity(n_steps + 1);
    let mut x = x0;
    xs.push(x);
    for _ in 0..n_steps {
        let xi: f64 = if amp > 0.0 {
            StandardNormal.sample(rng)
        } else {
            0.0
        };
        x = decay * x + amp * xi;
        xs.push(x);
    }
    TimeSeries::from_scalar(dt, xs)
}

/// Euler-Maruyama path of `dx = -K x dt + sigma dW` from the origin, with
/// independent noise on every component.
pub fn simulate_multiou(
    k: &StabilityMatrix,
    noise: NoiseSpec,
    dt: f64,
    n_steps: usize,
    rng: &mut RngStream,
) -> Result<TimeSeries> {
    check_dt(dt)?;
    let eig = linalg::eigenvalues(k.entries());
    let min_re = eig.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
    if !(min_re > 0.0) {
        return Err(Error::Unstable(min_re));
    }
    let radius = eig.iter().map(|z| z.re.hypot(z.im)).fold(0.0, f64::max);
    if dt * radius >= MAX_STEP_RATE {
        return Err(Error::DiscretizationTooCoarse(dt * radius));
    }
    let n = k.dim();
    let step = DMatrix::identity(n, n) - k.entries() * dt;
    let amp = noise.sigma * dt.sqrt();
    let mut out = TimeSeries::with_capacity(dt, n, n_steps + 1)?;
    let mut x = DVector::zeros(n);
    let mut next = DVector::zeros(n);
    out.push(x.as_slice());
    for _ in 0..n_steps {
        step.mul_to(&x, &mut next);
        for v in next.iter_mut() {
            let xi: f64 = StandardNormal.sample(rng);
            *v += amp * xi;
        }
        core::mem::swap(&mut x, &mut next);
        out.push(x.as_slice());
    }
    Ok(out)
}

/// Relaxation time of the slowest component: the e-folding time of its
/// autocorrelation, fitted over lags where it exceeds 0.05.
pub fn relaxation_time(series: &TimeSeries) -> Result<f64> {
    let mut slowest: f64 = 0.0;
    for c in 0..series.dim() {
        let tau = decay_time(&series.component_vec(c), series.dt())?;
        slowest = slowest.max(tau);
    }
    Ok(slowest)
}
