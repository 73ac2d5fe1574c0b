//! Generalized Lotka-Volterra communities:
//! `dx_i/dt = x_i (mu_i + sum_j A_ij x_j)`.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::linalg::{self, principal_submatrix, SpectrumReport};
use crate::rng::RngStream;

/// Abundance above which integration is declared divergent.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

#[derive(Clone, Debug, PartialEq)]
pub struct Ecology {
    mu: Vec<f64>,
    a: DMatrix<f64>,
    symmetric: bool,
}

impl Ecology {
    pub fn new(mu: Vec<f64>, a: DMatrix<f64>, symmetric: bool) -> Result<Self> {
        linalg::check_square_finite(&a, "A")?;
        if a.nrows() != mu.len() || mu.is_empty() {
            return Err(invalid("mu", "length must match the size of A"));
        }
        if mu.iter().any(|m| !m.is_finite()) {
            return Err(invalid("mu", "entries must be finite"));
        }
        if symmetric && a != a.transpose() {
            return Err(invalid("A", "flagged symmetric but A != A^T"));
        }
        Ok(Self { mu, a, symmetric })
    }

    /// `A_ij = -delta_ij + N(0, sigma^2 / n)` off the diagonal, symmetrized
    /// when requested, with unit fitness.
    pub fn random(n: usize, sigma: f64, symmetric: bool, rng: &mut RngStream) -> Result<Self> {
        if n == 0 {
            return Err(invalid("n", "must be at least 1"));
        }
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(invalid("sigma", "must be finite and non-negative"));
        }
        let sd = sigma / (n as f64).sqrt();
        let mut a = DMatrix::from_diagonal_element(n, n, -1.0);
        for i in 0..n {
            for j in 0..n {
                if i == j || (symmetric && j < i) {
                    continue;
                }
                let g: f64 = StandardNormal.sample(rng);
                a[(i, j)] = sd * g;
                if symmetric {
                    a[(j, i)] = sd * g;
                }
            }
        }
        Self::new(alloc::vec![1.0; n], a, symmetric)
    }

    pub fn n(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn symmetric(&self) -> bool {
        self.symmetric
    }

    /// Per-capita growth rates `mu_i + (A x)_i`.
    pub fn growth_rates(&self, x: &[f64]) -> Vec<f64> {
        let ax = &self.a * DVector::from_column_slice(x);
        self.mu.iter().zip(ax.iter()).map(|(m, v)| m + v).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GlvOptions {
    pub dt: f64,
    pub t_max: f64,
    pub extinction_floor: f64,
    /// Survivor residual tolerance at which integration stops early,
    /// relative to `max(1, |mu_i|)`.
    pub tol: f64,
}

impl Default for GlvOptions {
    fn default() -> Self {
        Self {
            dt: 0.1,
            t_max: 1e5,
            extinction_floor: 1e-10,
            tol: 1e-12,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CommunityState {
    pub abundances: Vec<f64>,
    pub survivor_mask: Vec<bool>,
    /// `mu_i + (A x)_i` for every species; only survivors must vanish.
    pub residuals: Vec<f64>,
    pub converged: bool,
    pub time: f64,
}

impl CommunityState {
    pub fn survivors(&self) -> Vec<usize> {
        (0..self.abundances.len())
            .filter(|&i| self.survivor_mask[i])
            .collect()
    }

    pub fn max_survivor_residual(&self, mu: &[f64]) -> f64 {
        self.survivors()
            .iter()
            .map(|&i| self.residuals[i].abs() / mu[i].abs().max(1.0))
            .fold(0.0, f64::max)
    }
}

/// Explicit Euler on log-abundances, which keeps every abundance positive.
/// Species dropping below the extinction floor are set to exactly zero and
/// stay extinct. Stops when all survivor residuals are below `opts.tol` or
/// at `opts.t_max`, whichever comes first.
pub fn integrate_glv(eco: &Ecology, x0: &[f64], opts: &GlvOptions) -> Result<CommunityState> {
    let n = eco.n();
    if x0.len() != n {
        return Err(invalid("x0", "length must match the number of species"));
    }
    if !(opts.dt > 0.0) || !(opts.t_max > 0.0) {
        return Err(invalid("dt", "dt and t_max must be positive"));
    }
    if !(opts.extinction_floor > 0.0) {
        return Err(invalid("extinction_floor", "must be positive"));
    }
    let mut alive: Vec<bool> = x0.iter().map(|&v| v > 0.0).collect();
    if x0.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(invalid("x0", "abundances must be finite and non-negative"));
    }
    let mut x: Vec<f64> = x0.to_vec();
    let mut logx: Vec<f64> = x.iter().map(|&v| if v > 0.0 { v.ln() } else { 0.0 }).collect();
    let floor_log = opts.extinction_floor.ln();
    let steps = (opts.t_max / opts.dt).ceil() as usize;
    let mut rates = alloc::vec![0.0; n];
    let mut ax = DVector::zeros(n);
    let mut converged = false;
    let mut t = 0.0;

    for step in 0..=steps {
        eco.a.mul_to(&DVector::from_column_slice(&x), &mut ax);
        let mut worst = 0.0f64;
        for i in 0..n {
            rates[i] = eco.mu[i] + ax[i];
            if alive[i] {
                worst = worst.max(rates[i].abs() / eco.mu[i].abs().max(1.0));
            }
        }
        if worst < opts.tol {
            converged = true;
            break;
        }
        if step == steps {
            break;
        }
        for i in 0..n {
            if !alive[i] {
                continue;
            }
            logx[i] += opts.dt * rates[i];
            if logx[i] < floor_log {
                alive[i] = false;
                x[i] = 0.0;
            } else {
                x[i] = logx[i].exp();
                if x[i] > DIVERGENCE_LIMIT {
                    return Err(Error::Diverged(x[i]));
                }
            }
        }
        t += opts.dt;
    }
    if !converged {
        if let Some((px, palive, prates)) = polish(eco, &alive, opts.tol) {
            return Ok(CommunityState {
                residuals: prates,
                abundances: px,
                survivor_mask: palive,
                converged: true,
                time: t,
            });
        }
    }
    Ok(CommunityState {
        residuals: rates,
        abundances: x,
        survivor_mask: alive,
        converged,
        time: t,
    })
}

/// Species being excluded at a rate of ~1e-5 take far longer than any
/// sensible `t_max` to cross the extinction floor. Starting from the
/// integrated survivor set, solve `A_SS x_S = -mu_S` directly, dropping
/// species that come out non-positive, and accept the fixed point only if
/// it is feasible, uninvadable and locally stable.
fn polish(eco: &Ecology, alive: &[bool], tol: f64) -> Option<(Vec<f64>, Vec<bool>, Vec<f64>)> {
    let n = eco.n();
    let mut alive = alive.to_vec();
    loop {
        let s: Vec<usize> = (0..n).filter(|&i| alive[i]).collect();
        if s.is_empty() {
            return None;
        }
        let mu_s = DVector::from_iterator(s.len(), s.iter().map(|&i| eco.mu[i]));
        let xs = -linalg::solve(&principal_submatrix(&eco.a, &s), &mu_s).ok()?;
        let (k, min) = xs.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1))?;
        if *min <= 0.0 {
            alive[s[k]] = false;
            continue;
        }
        let mut out = alloc::vec![0.0; n];
        for (&i, v) in s.iter().zip(xs.iter()) {
            out[i] = *v;
        }
        let rates = eco.growth_rates(&out);
        let scale = |i: usize| eco.mu[i].abs().max(1.0);
        let settled = (0..n).all(|i| {
            if alive[i] {
                rates[i].abs() / scale(i) < tol.max(1e-10)
            } else {
                rates[i] / scale(i) < tol
            }
        });
        let a_ss = principal_submatrix(&eco.a, &s);
        let jac = DMatrix::from_fn(s.len(), s.len(), |i, j| -xs[i] * a_ss[(i, j)]);
        if !settled || !(linalg::min_real_part(&jac) > 0.0) {
            return None;
        }
        return Some((out, alive, rates));
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Equilibrium {
    pub x: Vec<f64>,
    pub feasible: bool,
}

/// Interior fixed point `x* = -A^{-1} mu`; feasible iff every entry is
/// strictly positive.
pub fn feasible_equilibrium(eco: &Ecology) -> Result<Equilibrium> {
    let mu = DVector::from_column_slice(&eco.mu);
    let x = -linalg::solve(&eco.a, &mu)?;
    let feasible = x.iter().all(|v| *v > 0.0);
    Ok(Equilibrium {
        x: x.iter().copied().collect(),
        feasible,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct GlvStability {
    /// Spectrum of `K_ij = -x_i A_ij` on the surviving block.
    pub spectrum: SpectrumReport,
    /// Smallest real part of the spectrum of `K`.
    pub kappa_star: f64,
    /// Largest eigenvalue (real part) of the sensitivity matrix
    /// `-(A_SS)^{-1}` on the surviving block.
    pub lambda_star: f64,
    pub survivors: Vec<usize>,
}

pub fn stability_report(eco: &Ecology, state: &CommunityState) -> Result<GlvStability> {
    let s = state.survivors();
    if s.is_empty() {
        return Err(invalid("state", "no surviving species"));
    }
    let a_ss = principal_submatrix(&eco.a, &s);
    let k = DMatrix::from_fn(s.len(), s.len(), |i, j| -state.abundances[s[i]] * a_ss[(i, j)]);
    let spectrum = SpectrumReport::of(&k);
    let sens = -linalg::inverse(&a_ss)?;
    let lambda_star = linalg::max_real_part(&sens);
    Ok(GlvStability {
        kappa_star: spectrum.min_real_part,
        spectrum,
        lambda_star,
        survivors: s,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitnessResponse {
    /// `(x'* - x*) / delta` for every species.
    pub response: Vec<f64>,
    /// The set of survivors changed, so the derivative is undefined.
    pub composition_changed: bool,
}

/// Finite-difference response of the community to `mu_j += delta`,
/// re-integrated from the current equilibrium.
pub fn perturb_fitness(
    eco: &Ecology,
    state: &CommunityState,
    j: usize,
    delta: f64,
    opts: &GlvOptions,
) -> Result<FitnessResponse> {
    if j >= eco.n() || !state.survivor_mask[j] {
        return Err(invalid("j", "must index a surviving species"));
    }
    let scale = eco.mu.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if delta == 0.0 || delta.abs() > 1e-4 * scale {
        return Err(invalid("delta", "must be non-zero and at most 1e-4 * max|mu|"));
    }
    let mut mu = eco.mu.clone();
    mu[j] += delta;
    let shifted = Ecology {
        mu,
        a: eco.a.clone(),
        symmetric: eco.symmetric,
    };
    let after = integrate_glv(&shifted, &state.abundances, opts)?;
    let invaded = (0..eco.n()).any(|i| !state.survivor_mask[i] && after.residuals[i] > opts.tol);
    let composition_changed = invaded || after.survivor_mask != state.survivor_mask;
    let response = after
        .abundances
        .iter()
        .zip(&state.abundances)
        .map(|(b, a)| (b - a) / delta)
        .collect();
    Ok(FitnessResponse {
        response,
        composition_changed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn diag(mu: Vec<f64>) -> Ecology {
        let n = mu.len();
        Ecology::new(mu, -DMatrix::identity(n, n), true).unwrap()
    }

    #[test]
    fn logistic_fixed_point() {
        let e = diag(vec![1.0]);
        let s = integrate_glv(&e, &[0.1], &GlvOptions::default()).unwrap();
        assert!(s.converged);
        assert!((s.abundances[0] - 1.0).abs() < 1e-9);
        let r = stability_report(&e, &s).unwrap();
        assert!((r.kappa_star - 1.0).abs() < 1e-9);
    }

    #[test]
    fn slow_exclusion_is_resolved() {
        // Species 1 is excluded at rate 1e-5, far too slowly to hit the floor.
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, -0.5 - 1e-5, -1.0]);
        let e = Ecology::new(vec![1.0, 0.5], a, false).unwrap();
        let opts = GlvOptions { t_max: 1e3, ..GlvOptions::default() };
        let s = integrate_glv(&e, &[0.5, 0.5], &opts).unwrap();
        assert!(s.converged);
        assert_eq!(s.survivors(), vec![0]);
        assert!((s.abundances[0] - 1.0).abs() < 1e-12 && s.abundances[1] == 0.0);
    }

    #[test]
    fn decoupled_pair() {
        let e = diag(vec![2.0, 3.0]);
        let s = integrate_glv(&e, &[1.0, 1.0], &GlvOptions::default()).unwrap();
        assert!((s.abundances[0] - 2.0).abs() < 1e-9 && (s.abundances[1] - 3.0).abs() < 1e-9);
        let eq = feasible_equilibrium(&e).unwrap();
        assert_eq!(eq.x, vec![2.0, 3.0]);
        let r = perturb_fitness(&e, &s, 1, 1e-4, &GlvOptions::default()).unwrap();
        assert!(!r.composition_changed);
        assert!((r.response[1] - 1.0).abs() < 1e-3 && r.response[0].abs() < 1e-5);
    }

    #[test]
    fn infeasible_is_a_verdict() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, -3.0, -3.0, -1.0]);
        let e = Ecology::new(vec![1.0, 5.0], a, true).unwrap();
        let eq = feasible_equilibrium(&e).unwrap();
        assert!(!eq.feasible);
        let sing = Ecology::new(vec![1.0, 1.0], DMatrix::from_element(2, 2, -1.0), true).unwrap();
        assert_eq!(feasible_equilibrium(&sing), Err(Error::Singular));
    }

    #[test]
    fn competitive_exclusion_clamps_to_zero() {
        // Species 1 cannot invade species 0's equilibrium.
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, -0.5, -2.0, -1.0]);
        let e = Ecology::new(vec![1.0, 1.0], a, false).unwrap();
        let s = integrate_glv(&e, &[0.5, 0.5], &GlvOptions::default()).unwrap();
        assert_eq!(s.survivor_mask, vec![true, false]);
        assert_eq!(s.abundances[1], 0.0);
        assert!(s.residuals[1] <= 0.0);
    }

    #[test]
    fn divergence_detected() {
        let a = DMatrix::from_row_slice(1, 1, &[0.5]);
        let e = Ecology::new(vec![1.0], a, true).unwrap();
        assert!(matches!(
            integrate_glv(&e, &[1.0], &GlvOptions::default()),
            Err(Error::Diverged(_))
        ));
    }

    #[test]
    fn asymmetric_flag_checked() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 0.1, 0.2, -1.0]);
        assert!(Ecology::new(vec![1.0, 1.0], a, true).is_err());
    }
}
