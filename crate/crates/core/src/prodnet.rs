//! CES production networks: equilibrium prices, M-matrix feasibility and
//! the entry / markup experiments.
//!
//! With `zeta = 1 / (1 + q)` and `u_i = p_i^zeta`, the price equations
//! `(z_i p_i)^zeta = sum_j a_ij^(q zeta) (J_ij p_j)^zeta + a_i0^(q zeta) (J_i0 w_i)^zeta`
//! are linear: `M u = b` with
//! `M_ij = z_i^zeta delta_ij - a_ij^(q zeta) J_ij^zeta`.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::linalg::{self, leading_minors_positive, SpectrumReport};
use crate::optimize::bisect;
use crate::rng::RngStream;
use crate::series::TimeSeries;

#[derive(Clone, Debug, PartialEq)]
pub struct FirmNetwork {
    pub q: f64,
    pub z: Vec<f64>,
    pub w: Vec<f64>,
    /// Input shares between firms; row `i` holds firm `i`'s purchases.
    pub a: DMatrix<f64>,
    /// Labor shares `a_i0`.
    pub a0: Vec<f64>,
    pub j: DMatrix<f64>,
    pub j0: Vec<f64>,
}

const SHARE_TOL: f64 = 1e-9;

impl FirmNetwork {
    pub fn validate(&self) -> Result<()> {
        let n = self.z.len();
        if n == 0 {
            return Err(invalid("n", "network must have at least one firm"));
        }
        if self.w.len() != n || self.a0.len() != n || self.j0.len() != n {
            return Err(invalid("n", "z, w, a0 and J0 must all have length n"));
        }
        if self.a.shape() != (n, n) || self.j.shape() != (n, n) {
            return Err(invalid("a", "a and J must be n x n"));
        }
        if !(self.q >= 0.0) || !self.q.is_finite() {
            return Err(invalid("q", "must be finite and non-negative"));
        }
        if self.z.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(invalid("z", "productivities must be positive"));
        }
        if self.w.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(invalid("w", "wages must be positive"));
        }
        if self.a0.iter().any(|v| !(*v > 0.0)) {
            return Err(invalid("a0", "labor shares must be positive"));
        }
        if self.a.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(invalid("a", "shares must be finite and non-negative"));
        }
        if self.j.iter().chain(&self.j0).any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(invalid("J", "technology coefficients must be non-negative"));
        }
        for i in 0..n {
            let s: f64 = self.a.row(i).sum() + self.a0[i];
            if (s - 1.0).abs() > SHARE_TOL {
                return Err(invalid("a", "each row of shares including labor must sum to 1"));
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.z.len()
    }

    pub fn zeta(&self) -> f64 {
        1.0 / (1.0 + self.q)
    }

    /// Same network with every wage multiplied by `c`.
    pub fn with_wages_scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.w.iter_mut().for_each(|w| *w *= c);
        out
    }

    /// Leontief network (`q = 0`) in which firm `i` buys `J_ij` from every
    /// supplier `j` with `J_ij > 0`. Shares are spread evenly over the
    /// suppliers, leaving `labor_share` for labor.
    pub fn leontief(z: Vec<f64>, j: DMatrix<f64>, labor_share: f64) -> Result<Self> {
        let n = z.len();
        let a = shares_for_support(&j, labor_share);
        let a0 = (0..n)
            .map(|i| 1.0 - a.row(i).sum())
            .collect();
        let net = Self {
            q: 0.0,
            z,
            w: alloc::vec![1.0; n],
            a,
            a0,
            j,
            j0: alloc::vec![1.0; n],
        };
        net.validate()?;
        Ok(net)
    }

    /// Random Leontief network: every firm buys from `k` distinct suppliers
    /// with coefficient `j_weight`, productivity `z`.
    pub fn random_leontief(n: usize, k: usize, z: f64, j_weight: f64, rng: &mut RngStream) -> Result<Self> {
        if k >= n {
            return Err(invalid("k", "need k < n"));
        }
        let mut j = DMatrix::zeros(n, n);
        for i in 0..n {
            let mut chosen = 0;
            while chosen < k {
                let s = rng.random_range(0..n);
                if s != i && j[(i, s)] == 0.0 {
                    j[(i, s)] = j_weight;
                    chosen += 1;
                }
            }
        }
        Self::leontief(alloc::vec![z; n], j, 0.5)
    }
}

fn shares_for_support(j: &DMatrix<f64>, labor_share: f64) -> DMatrix<f64> {
    let n = j.nrows();
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        let deg = j.row(i).iter().filter(|v| **v > 0.0).count();
        if deg == 0 {
            continue;
        }
        let s = (1.0 - labor_share) / deg as f64;
        for c in 0..n {
            if j[(i, c)] > 0.0 {
                a[(i, c)] = s;
            }
        }
    }
    a
}

// a^(q zeta) J^zeta, zero off the support of either factor.
fn input_term(a: f64, j: f64, qz: f64, zeta: f64) -> f64 {
    if a <= 0.0 || j <= 0.0 {
        0.0
    } else {
        a.powf(qz) * j.powf(zeta)
    }
}

pub fn build_m_matrix(net: &FirmNetwork) -> Result<DMatrix<f64>> {
    net.validate()?;
    let n = net.n();
    let zeta = net.zeta();
    let qz = net.q * zeta;
    Ok(DMatrix::from_fn(n, n, |i, k| {
        let own = if i == k { net.z[i].powf(zeta) } else { 0.0 };
        own - input_term(net.a[(i, k)], net.j[(i, k)], qz, zeta)
    }))
}

fn labor_rhs(net: &FirmNetwork) -> DVector<f64> {
    let zeta = net.zeta();
    let qz = net.q * zeta;
    DVector::from_fn(net.n(), |i, _| {
        net.a0[i].powf(qz) * (net.j0[i] * net.w[i]).powf(zeta)
    })
}

/// Equilibrium prices. Fails with `Infeasible` when some `u_i <= 0`.
pub fn solve_prices(net: &FirmNetwork) -> Result<Vec<f64>> {
    let m = build_m_matrix(net)?;
    let u = linalg::solve(&m, &labor_rhs(net))?;
    let bad = u.iter().filter(|v| !(**v > 0.0)).count();
    if bad > 0 {
        return Err(Error::Infeasible(bad));
    }
    let inv_zeta = 1.0 + net.q;
    Ok(u.iter().map(|v| v.powf(inv_zeta)).collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeasibilityReport {
    pub spectrum: SpectrumReport,
    /// Equilibrium prices when the network is feasible.
    pub prices: Option<Vec<f64>>,
    /// Smallest entry of `M^{-1}` when `M` is invertible.
    pub inverse_min: Option<f64>,
}

pub fn feasibility(net: &FirmNetwork) -> Result<FeasibilityReport> {
    let m = build_m_matrix(net)?;
    let spectrum = SpectrumReport::of(&m);
    let inverse_min = linalg::inverse(&m)
        .ok()
        .map(|inv| inv.iter().copied().fold(f64::INFINITY, f64::min));
    let prices = if spectrum.is_m_matrix {
        solve_prices(net).ok()
    } else {
        None
    };
    Ok(FeasibilityReport {
        spectrum,
        prices,
        inverse_min,
    })
}

/// Independent ways of deciding whether `M` is a nonsingular M-matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    /// Smallest real part of the dense spectrum is positive.
    Spectrum,
    /// All leading principal minors positive (Z-matrices only).
    Minors,
    /// The price system has a strictly positive solution.
    Prices,
}

pub fn is_feasible(net: &FirmNetwork, route: Verdict) -> Result<bool> {
    let m = build_m_matrix(net)?;
    Ok(match route {
        Verdict::Spectrum => linalg::min_real_part(&m) > 0.0,
        Verdict::Minors => leading_minors_positive(&m),
        Verdict::Prices => solve_prices(net).is_ok(),
    })
}

/// Productivity of firm `i` at which the network stops being feasible,
/// located by bisection on the chosen verdict over `(0, z_i]`.
pub fn critical_productivity(net: &FirmNetwork, i: usize, route: Verdict, tol: f64) -> Result<f64> {
    if i >= net.n() {
        return Err(invalid("i", "firm index out of range"));
    }
    let at = |zi: f64| -> Result<bool> {
        let mut trial = net.clone();
        trial.z[i] = zi;
        is_feasible(&trial, route)
    };
    let (mut lo, mut hi) = (0.0, net.z[i]);
    if !at(hi)? {
        return Err(Error::Unbracketed { lo, hi });
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if at(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Productivity of firm `i` at which the smallest real part of the
/// spectrum crosses zero, by root-finding on the real part itself.
pub fn spectral_zero_crossing(net: &FirmNetwork, i: usize, tol: f64) -> Result<f64> {
    let mut trial = net.clone();
    let zeta = net.zeta();
    let m0 = build_m_matrix(net)?;
    bisect(
        |zi| {
            trial.z[i] = zi;
            let mut m = m0.clone();
            m[(i, i)] += zi.powf(zeta) - net.z[i].powf(zeta);
            linalg::min_real_part(&m)
        },
        1e-300,
        net.z[i],
        tol,
    )
}

/// Cobb-Douglas limit (`q -> infinity`): to first order in `zeta`,
/// `M ~ I - A`, and log-prices solve
/// `(I - A) ln p = -ln z + sum_j a_ij ln(J_ij / a_ij) + a_i0 ln(J_i0 w_i / a_i0)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CobbDouglasReport {
    pub spectrum: SpectrumReport,
    pub log_prices: Vec<f64>,
}

pub fn cobb_douglas(net: &FirmNetwork) -> Result<CobbDouglasReport> {
    net.validate()?;
    let n = net.n();
    let m = DMatrix::identity(n, n) - &net.a;
    let mut rhs = DVector::zeros(n);
    for i in 0..n {
        let mut r = -net.z[i].ln();
        for k in 0..n {
            let a = net.a[(i, k)];
            if a > 0.0 {
                if !(net.j[(i, k)] > 0.0) {
                    return Err(invalid("J", "every purchased input needs J_ij > 0"));
                }
                r += a * (net.j[(i, k)] / a).ln();
            }
        }
        if !(net.j0[i] > 0.0) {
            return Err(invalid("J0", "labor coefficients must be positive"));
        }
        r += net.a0[i] * (net.j0[i] * net.w[i] / net.a0[i]).ln();
        rhs[i] = r;
    }
    let log_prices = linalg::solve(&m, &rhs)?.iter().copied().collect();
    Ok(CobbDouglasReport {
        spectrum: SpectrumReport::of(&m),
        log_prices,
    })
}

/// How entrants attach to the existing network.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EntrantSpec {
    /// Mean productivity of entrants.
    pub z_mean: f64,
    /// Entrant productivity is uniform on `z_mean * [1 - spread, 1 + spread]`.
    pub z_spread: f64,
    pub suppliers: usize,
    pub customers: usize,
    /// Technology coefficient on every new link.
    pub j_weight: f64,
    /// Share of a customer's labor share redirected to the entrant.
    pub customer_share: f64,
    /// Choose partners proportionally to (number of customers + 1)
    /// instead of uniformly.
    pub preferential: bool,
}

impl EntrantSpec {
    fn validate(&self) -> Result<()> {
        if !(self.z_mean > 0.0) || !(0.0..1.0).contains(&self.z_spread) {
            return Err(invalid("z_mean", "need z_mean > 0 and 0 <= z_spread < 1"));
        }
        if !(self.j_weight >= 0.0) || !(self.customer_share > 0.0 && self.customer_share < 1.0) {
            return Err(invalid("customer_share", "need j_weight >= 0 and 0 < customer_share < 1"));
        }
        Ok(())
    }
}

fn pick_distinct(weights: &[f64], k: usize, rng: &mut RngStream) -> Vec<usize> {
    let k = k.min(weights.len());
    let mut w = weights.to_vec();
    let mut out = Vec::with_capacity(k);
    for _ in 0..k {
        let total: f64 = w.iter().sum();
        let mut x = rng.open01() * total;
        let mut pick = w.len() - 1;
        for (i, &wi) in w.iter().enumerate() {
            if wi <= 0.0 {
                continue;
            }
            if x < wi {
                pick = i;
                break;
            }
            x -= wi;
        }
        out.push(pick);
        w[pick] = 0.0;
    }
    out
}

/// Adds one firm: it buys from `suppliers` existing firms and sells to
/// `customers` existing firms, each of which diverts part of its labor
/// share to the new input.
pub fn add_entrant(net: &FirmNetwork, spec: &EntrantSpec, rng: &mut RngStream) -> Result<FirmNetwork> {
    spec.validate()?;
    let n = net.n();
    let weights: Vec<f64> = if spec.preferential {
        (0..n)
            .map(|c| 1.0 + net.j.column(c).iter().filter(|v| **v > 0.0).count() as f64)
            .collect()
    } else {
        alloc::vec![1.0; n]
    };
    let suppliers = pick_distinct(&weights, spec.suppliers, rng);
    let customers = pick_distinct(&weights, spec.customers, rng);
    let z_e = spec.z_mean * (1.0 + spec.z_spread * (2.0 * rng.open01() - 1.0));

    let mut a = net.a.clone().resize(n + 1, n + 1, 0.0);
    let mut j = net.j.clone().resize(n + 1, n + 1, 0.0);
    let mut a0 = net.a0.clone();
    let labor_e = if suppliers.is_empty() { 1.0 } else { 0.5 };
    for &s in &suppliers {
        a[(n, s)] = (1.0 - labor_e) / suppliers.len() as f64;
        j[(n, s)] = spec.j_weight;
    }
    for &c in &customers {
        let moved = spec.customer_share * a0[c];
        a0[c] -= moved;
        a[(c, n)] = moved;
        j[(c, n)] = spec.j_weight;
    }
    a0.push(labor_e);
    let mut z = net.z.clone();
    z.push(z_e);
    let mut w = net.w.clone();
    w.push(1.0);
    let mut j0 = net.j0.clone();
    j0.push(1.0);
    let out = FirmNetwork {
        q: net.q,
        z,
        w,
        a,
        a0,
        j,
        j0,
    };
    out.validate()?;
    Ok(out)
}

/// Smallest real part of the spectrum of `M` before and after each of
/// `n_entries` sequential entries (`n_entries + 1` values, unit spacing).
pub fn firm_entry_experiment(
    net: &FirmNetwork,
    spec: &EntrantSpec,
    n_entries: usize,
    rng: &mut RngStream,
) -> Result<TimeSeries> {
    let mut cur = net.clone();
    let first = feasibility(&cur)?;
    if !first.spectrum.is_m_matrix {
        return Err(invalid("net", "starting network must be feasible"));
    }
    let mut values = Vec::with_capacity(n_entries + 1);
    values.push(first.spectrum.min_real_part);
    for _ in 0..n_entries {
        cur = add_entrant(&cur, spec, rng)?;
        values.push(linalg::min_real_part(&build_m_matrix(&cur)?));
    }
    TimeSeries::from_scalar(1.0, values)
}

/// Feasibility with profit shares `phi`: for Leontief networks a markup
/// acts as the productivity reduction `z_i -> z_i (1 - phi_i)`.
pub fn markup_experiment(net: &FirmNetwork, phi: &[f64]) -> Result<FeasibilityReport> {
    if net.q != 0.0 {
        return Err(invalid("q", "markup experiment requires q = 0"));
    }
    if phi.len() != net.n() {
        return Err(invalid("phi", "one profit share per firm"));
    }
    if phi.iter().any(|p| !(*p >= 0.0 && *p < 1.0)) {
        return Err(invalid("phi", "profit shares must lie in [0, 1)"));
    }
    let mut marked = net.clone();
    for (z, p) in marked.z.iter_mut().zip(phi) {
        *z *= 1.0 - p;
    }
    feasibility(&marked)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn single(z: f64, q: f64, a0: f64, j0: f64, w: f64) -> FirmNetwork {
        let mut a = DMatrix::zeros(1, 1);
        a[(0, 0)] = 1.0 - a0;
        FirmNetwork {
            q,
            z: vec![z],
            w: vec![w],
            a,
            a0: vec![a0],
            j: DMatrix::zeros(1, 1),
            j0: vec![j0],
        }
    }

    #[test]
    fn single_firm_labor_only() {
        let net = single(2.0, 0.5, 1.0, 3.0, 1.5);
        let m = build_m_matrix(&net).unwrap();
        assert!((m[(0, 0)] - 2f64.powf(1.0 / 1.5)).abs() < 1e-15);
        let p = solve_prices(&net).unwrap();
        // p = a0^q J0 w / z
        assert!((p[0] - 3.0 * 1.5 / 2.0).abs() < 1e-12);
    }

    #[test]
    fn two_firm_chain_leontief() {
        // Firm 1 buys J=0.5 from firm 0.
        let mut j = DMatrix::zeros(2, 2);
        j[(1, 0)] = 0.5;
        let net = FirmNetwork::leontief(vec![2.0, 3.0], j, 0.5).unwrap();
        let m = build_m_matrix(&net).unwrap();
        assert_eq!(m, DMatrix::from_row_slice(2, 2, &[2.0, 0.0, -0.5, 3.0]));
        let p = solve_prices(&net).unwrap();
        // (diag(z) - J) p = J0 w
        assert!((p[0] - 0.5).abs() < 1e-15);
        assert!((p[1] - (1.0 + 0.25) / 3.0).abs() < 1e-15);
    }

    #[test]
    fn wage_homogeneity() {
        let mut j = DMatrix::zeros(2, 2);
        j[(1, 0)] = 0.5;
        j[(0, 1)] = 0.2;
        let mut net = FirmNetwork::leontief(vec![2.0, 3.0], j, 0.5).unwrap();
        net.q = 1.0;
        let p = solve_prices(&net).unwrap();
        let p2 = solve_prices(&net.with_wages_scaled(4.0)).unwrap();
        for (a, b) in p.iter().zip(&p2) {
            assert!((b / a - 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn infeasible_network_rejected() {
        let j = DMatrix::from_row_slice(2, 2, &[0.0, 2.0, 2.0, 0.0]);
        let net = FirmNetwork::leontief(vec![1.0, 1.0], j, 0.5).unwrap();
        let rep = feasibility(&net).unwrap();
        assert!(!rep.spectrum.is_m_matrix && rep.prices.is_none());
        assert!(matches!(solve_prices(&net), Err(Error::Infeasible(_))));
    }

    #[test]
    fn markup_zero_is_identity_and_bounds_checked() {
        let j = DMatrix::from_row_slice(2, 2, &[0.0, 0.3, 0.4, 0.0]);
        let net = FirmNetwork::leontief(vec![1.0, 1.0], j, 0.5).unwrap();
        assert_eq!(markup_experiment(&net, &[0.0, 0.0]).unwrap(), feasibility(&net).unwrap());
        assert!(markup_experiment(&net, &[1.0, 0.0]).is_err());
        let mut ces = net.clone();
        ces.q = 1.0;
        assert!(markup_experiment(&ces, &[0.1, 0.1]).is_err());
    }

    #[test]
    fn isolated_entrant_keeps_spectrum_floor() {
        let j = DMatrix::from_row_slice(2, 2, &[0.0, 0.3, 0.4, 0.0]);
        let net = FirmNetwork::leontief(vec![1.0, 1.0], j, 0.5).unwrap();
        let spec = EntrantSpec {
            z_mean: 2.0,
            z_spread: 0.0,
            suppliers: 0,
            customers: 0,
            j_weight: 0.3,
            customer_share: 0.2,
            preferential: false,
        };
        let s = firm_entry_experiment(&net, &spec, 3, &mut RngStream::new(0, 0)).unwrap();
        let v = s.component_vec(0);
        assert!(v.iter().all(|x| (x - v[0]).abs() < 1e-12));
    }

    #[test]
    fn shares_must_sum_to_one() {
        let mut net = single(1.0, 0.0, 1.0, 1.0, 1.0);
        net.a0[0] = 0.9;
        net.a[(0, 0)] = 0.0;
        assert!(net.validate().is_err());
    }
}
