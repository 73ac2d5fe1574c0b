//! Seeded statistical checks of model invariants. Sample sizes are chosen
//! so that each check runs in seconds on one core.

use critlab_core::analysis::stats::{batch_means, fit_through_origin, ks_distance, ks_two_sample, mean, variance};
use critlab_core::analysis::{fit_discrete_window, fit_power_law, XMin};
use critlab_core::branching::{avalanche_ensemble, survival_probability, OffspringDistribution};
use critlab_core::glv::{integrate_glv, Ecology, GlvOptions};
use critlab_core::inflation::{run_abm, stationary_density, RepricingConfig};
use critlab_core::ou::{simulate_multiou, NoiseSpec, StabilityMatrix};
use critlab_core::prodnet::{critical_productivity, spectral_zero_crossing, FirmNetwork, Verdict};
use critlab_core::linalg::min_real_part;
use critlab_core::prodnet::build_m_matrix;
use critlab_core::timeliness::{run_delays, DelayNoise, TaskNetwork};
use critlab_core::volfeedback::{
    estimate_branching_ratio, simulate_arch, simulate_hawkes, FeedbackKernel, KernelFamily,
};
use critlab_core::RngStream;

#[test]
fn diagonal_multiou_factorizes() {
    let k = StabilityMatrix::diagonal(&[1.0, 4.0]).unwrap();
    let mut r = RngStream::new(1, 0);
    let path = simulate_multiou(&k, NoiseSpec::gaussian(1.0).unwrap(), 0.005, 400_000, &mut r).unwrap();
    let path = path.skip_rows(2000);
    let x = path.component_vec(0);
    let y = path.component_vec(1);
    for (v, kappa) in [(&x, 1.0), (&y, 4.0)] {
        let sq: Vec<f64> = v.iter().map(|a| a * a).collect();
        let (m, se) = batch_means(&sq, 40);
        assert!((m - 0.5 / kappa).abs() < 3.0 * se, "{m} {se}");
    }
    let cross: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a * b).collect();
    let (c, se) = batch_means(&cross, 40);
    assert!(c.abs() < 3.0 * se, "{c} {se}");
}

#[test]
fn capped_fraction_grows_with_r0() {
    let rng = RngStream::new(2, 0);
    let mut last = 0.0;
    for r0 in [0.9, 1.0, 1.05, 1.1, 1.2, 1.4] {
        let d = OffspringDistribution::poisson(r0).unwrap();
        let phi = survival_probability(&d, 20_000, 2000, &rng).unwrap();
        assert!(phi >= last, "{r0} {phi} {last}");
        last = phi;
    }
}

#[test]
fn finite_variance_laws_share_the_critical_exponent() {
    let rng = RngStream::new(3, 0);
    // Pair offspring only produce odd sizes 2m + 1; (S + 1) / 2 puts both
    // laws on the unit lattice the window correction assumes.
    let fit = |d: OffspringDistribution, lattice: u64| {
        let sizes: Vec<u64> = avalanche_ensemble(&d, 200_000, 100_000, &rng)
            .unwrap()
            .iter()
            .map(|a| (a.size + lattice - 1) / lattice)
            .collect();
        fit_discrete_window(&sizes, 10, 10_000).unwrap()
    };
    let p = fit(OffspringDistribution::poisson(1.0).unwrap(), 1);
    let b = fit(OffspringDistribution::bernoulli_pair(1.0).unwrap(), 2);
    let joint = (p.std_error.powi(2) + b.std_error.powi(2)).sqrt();
    assert!((p.exponent - b.exponent).abs() < 3.0 * joint, "{p:?} {b:?}");
    assert!((p.exponent - 1.5).abs() < 0.05);
}

#[test]
fn extinct_species_cannot_reinvade() {
    let mut r = RngStream::new(4, 0);
    for _ in 0..10 {
        let eco = Ecology::random(30, 0.4, true, &mut r).unwrap();
        let st = integrate_glv(&eco, &vec![1.0; 30], &GlvOptions::default()).unwrap();
        assert!(st.converged);
        assert!(st.max_survivor_residual(eco.mu()) < 1e-6);
        for i in 0..30 {
            if !st.survivor_mask[i] {
                assert!(st.residuals[i] <= 1e-6, "species {i}: {}", st.residuals[i]);
            }
        }
    }
}

#[test]
fn delays_are_stationary_above_critical_buffer() {
    let mut r = RngStream::new(5, 0);
    let net = TaskNetwork::random_regular(200, 3, &mut r).unwrap();
    let noise = DelayNoise::exponential(1.0).unwrap();
    let n_steps = 8000;
    let mut samples = Vec::new();
    run_delays(&net, 5.0, &noise, &vec![0.0; 200], n_steps, &mut r, |n, tau| {
        if n % 20 == 0 {
            samples.push((n, tau[(n as usize / 20) % 200]));
        }
    })
    .unwrap();
    let q = |lo: u64, hi: u64| -> Vec<f64> {
        samples.iter().filter(|(n, _)| *n > lo && *n <= hi).map(|s| s.1).collect()
    };
    let q3 = q(n_steps as u64 / 2, 3 * n_steps as u64 / 4);
    let q4 = q(3 * n_steps as u64 / 4, n_steps as u64);
    let (_, p) = ks_two_sample(&q3, &q4);
    assert!(p > 0.05, "{p}");
}

#[test]
fn min_real_part_is_continuous_in_productivity() {
    let mut r = RngStream::new(6, 0);
    let net = FirmNetwork::random_leontief(12, 2, 1.2, 0.5, &mut r).unwrap();
    let h = 1e-3;
    let mut prev = None;
    for k in 0..200 {
        let mut n = net.clone();
        n.z[0] = 0.5 + k as f64 * h;
        let v = min_real_part(&build_m_matrix(&n).unwrap());
        if let Some(p) = prev {
            // The spectrum moves by at most the perturbation norm.
            assert!((v - p as f64).abs() <= h * (1.0 + 1e-9), "{k}");
        }
        prev = Some(v);
    }
}

#[test]
fn feasibility_routes_agree_on_crossing() {
    let mut r = RngStream::new(7, 0);
    for _ in 0..5 {
        let net = FirmNetwork::random_leontief(10, 2, 2.0, 0.6, &mut r).unwrap();
        let spec = spectral_zero_crossing(&net, 3, 1e-10).unwrap();
        for route in [Verdict::Minors, Verdict::Prices, Verdict::Spectrum] {
            let z = critical_productivity(&net, 3, route, 1e-10).unwrap();
            assert!((z - spec).abs() < 1e-6, "{route:?} {z} {spec}");
        }
    }
}

/// Upwind transport of the price density with reinjection at `p_plus`,
/// run to stationarity. Independent of both the ABM and the closed form.
fn density_evolution(cfg: &RepricingConfig, cells: usize, t_end: f64) -> (f64, Vec<f64>) {
    let d = cfg.p_plus - cfg.p_minus;
    let h = d / cells as f64;
    let mut p = vec![1.0 / d; cells];
    let mut inflation = cfg.i0;
    let mut t = 0.0;
    while t < t_end {
        let mean_p: f64 = p
            .iter()
            .enumerate()
            .map(|(k, v)| v * h * (cfg.p_minus + (k as f64 + 0.5) * h))
            .sum();
        // I = I0 + J [gamma (p+ - mean) + I P(p-) D], solved for I.
        inflation = (cfg.i0 + cfg.j * cfg.gamma * (cfg.p_plus - mean_p)) / (1.0 - cfg.j * p[0] * d);
        let dt = 0.5 * h / inflation;
        let out_flux = inflation * p[0];
        let mut next = p.clone();
        for k in 0..cells {
            let inflow = if k + 1 < cells { inflation * p[k + 1] } else { 0.0 };
            next[k] += dt * ((inflow - inflation * p[k]) / h - cfg.gamma * p[k]);
        }
        next[cells - 1] += dt * (out_flux + cfg.gamma) / h;
        p = next;
        t += dt;
    }
    (inflation, p)
}

#[test]
fn closed_form_and_density_evolution_agree() {
    let cfg = RepricingConfig {
        n_firms: 20_000,
        p_minus: -1.0,
        p_plus: 1.0,
        gamma: 0.02,
        j: 0.5,
        i0: 0.01,
        dt: 0.25,
        slowness_spread: 0.1,
    };
    let law = stationary_density(&cfg).unwrap();
    let (i_pde, p) = density_evolution(&cfg, 400, 3000.0);
    assert!((i_pde / law.i_st - 1.0).abs() < 0.01, "{i_pde} {}", law.i_st);
    let h = 2.0 / 400.0;
    for k in (0..400).step_by(40) {
        let x = -1.0 + (k as f64 + 0.5) * h;
        assert!((p[k] / law.pdf(x) - 1.0).abs() < 0.03, "{k}");
    }

    // The ABM outside the flat regime.
    let mut r = RngStream::new(8, 0);
    let run = run_abm(&cfg, 2000, 8000, None, &mut r).unwrap();
    let (m, se) = batch_means(&run.inflation.component_vec(0), 20);
    assert!((m / law.i_st - 1.0).abs() < 0.03 + 3.0 * se / law.i_st, "{m} {}", law.i_st);
    assert!(ks_distance(&run.final_prices, |x| law.cdf(x)) < 0.03);
}

#[test]
fn repricing_flux_balance() {
    let cfg = RepricingConfig {
        n_firms: 50_000,
        p_minus: -1.0,
        p_plus: 1.0,
        gamma: 1e-3,
        j: 0.5,
        i0: 0.01,
        dt: 0.5,
        slowness_spread: 0.1,
    };
    let mut r = RngStream::new(9, 0);
    let n_steps = 4000;
    let run = run_abm(&cfg, 400, n_steps, None, &mut r).unwrap();
    let t = n_steps as f64 * cfg.dt;
    let n = cfg.n_firms as f64;
    // Every firm arriving at p_plus either repriced spontaneously or
    // crossed p_minus.
    let into_top = (run.spontaneous + run.forced) as f64 / (n * t);
    let law = stationary_density(&cfg).unwrap();
    let boundary = run.mean_inflation() * law.pdf(cfg.p_minus);
    let expected = (1.0 - (-cfg.gamma * cfg.dt).exp()) / cfg.dt + boundary;
    // Poisson error on the counts plus the batch error on I.
    let (_, se_i) = batch_means(&run.inflation.component_vec(0), 20);
    let se = (into_top / (n * t)).sqrt() + se_i * law.pdf(cfg.p_minus);
    assert!((into_top - expected).abs() < 3.0 * se + 1e-3 * expected, "{into_top} {expected} {se}");
}

#[test]
fn inflation_rises_with_coupling() {
    let mut last = 0.0;
    for j in [0.0, 0.25, 0.5, 0.75] {
        let cfg = RepricingConfig {
            n_firms: 20_000,
            p_minus: -1.0,
            p_plus: 1.0,
            gamma: 1e-4,
            j,
            i0: 0.01,
            dt: 0.5,
            slowness_spread: 0.1,
        };
        let mut r = RngStream::new(10, 0);
        let m = run_abm(&cfg, 200, 2000, None, &mut r).unwrap().mean_inflation();
        assert!(m >= last, "{j}");
        last = m;
    }
}

#[test]
fn arch_memory_lengthens_near_criticality() {
    let tau = |g: f64| {
        let k = FeedbackKernel::exponential(g, 0.2).unwrap();
        let s = simulate_arch(1.0, &k, 400_000, &mut RngStream::new(11, 0)).unwrap();
        critlab_core::analysis::decay_time(&s.sigma2, 1.0).unwrap()
    };
    let (slow, fast) = (tau(0.95), tau(0.5));
    assert!(slow > 3.0 * fast, "{slow} {fast}");
}

#[test]
fn hawkes_clusters_branch_at_g() {
    for g in [0.2, 0.5, 0.8] {
        let k = FeedbackKernel::exponential(g, 1.0).unwrap();
        let ev = simulate_hawkes(1.0, &k, 40_000.0, &mut RngStream::new(12, 0)).unwrap();
        let n = ev.times.len() as f64;
        let off = ev.mean_offspring().unwrap();
        // Children per event are Poisson(g) given the event.
        assert!((off - g).abs() < 3.0 * (g / n).sqrt() + 0.005, "{g} {off}");
        if g == 0.8 {
            let counts: Vec<f64> = ev.window_counts(50.0).iter().map(|c| *c as f64).collect();
            assert!(variance(&counts) / mean(&counts) > 5.0);
        }
    }
}

#[test]
fn misspecified_family_is_flagged_by_likelihood() {
    let truth = FeedbackKernel::power_law(0.9, 0.5, Some(20.0)).unwrap();
    let ev = simulate_hawkes(0.5, &truth, 2_600.0, &mut RngStream::new(13, 0)).unwrap();
    assert!(ev.times.len() >= 10_000);
    let exp = estimate_branching_ratio(&ev, KernelFamily::Exponential).unwrap();
    let pl = estimate_branching_ratio(&ev, KernelFamily::PowerLaw { tau_max: 20.0 }).unwrap();
    assert!(exp.g < 0.9, "{exp:?}");
    assert!(pl.log_likelihood > exp.log_likelihood);
    assert!((pl.g - 0.9).abs() < 0.1, "{pl:?}");
}

#[test]
fn pareto_estimator_is_unbiased() {
    for alpha in [1.5, 2.0, 2.5] {
        let mut biases = Vec::new();
        for seed in 0..5 {
            let mut r = RngStream::new(14, seed);
            let xs: Vec<f64> = (0..100_000).map(|_| r.open01().powf(-1.0 / (alpha - 1.0))).collect();
            biases.push(fit_power_law(&xs, XMin::Fixed(1.0)).exponent - alpha);
        }
        assert!(mean(&biases).abs() < 0.02, "{alpha} {biases:?}");
    }
}

#[test]
fn survival_onset_is_linear() {
    let rng = RngStream::new(15, 0);
    let deltas = [0.02, 0.04, 0.08];
    let phis: Vec<f64> = deltas
        .iter()
        .map(|d| survival_probability(&OffspringDistribution::poisson(1.0 + d).unwrap(), 40_000, 20_000, &rng).unwrap())
        .collect();
    let (_, r2) = fit_through_origin(&deltas, &phis);
    assert!(r2 > 0.95, "{phis:?}");
}
