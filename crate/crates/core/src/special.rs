#[allow(unused_imports)]
use num_traits::Float;

// B_2k / (2k)!
const BERNOULLI_OVER_FACT: [f64; 8] = [
    1.0 / 12.0,
    -1.0 / 720.0,
    1.0 / 30_240.0,
    -1.0 / 1_209_600.0,
    1.0 / 47_900_160.0,
    -691.0 / 1_307_674_368_000.0,
    1.0 / 74_724_249_600.0,
    -3617.0 / 10_670_622_842_880_000.0,
];

/// Hurwitz zeta `sum_{k>=0} (k + q)^-s` for `s > 1`, `q > 0`, by
/// Euler-Maclaurin summation after 12 explicit terms.
pub fn hurwitz_zeta(s: f64, q: f64) -> f64 {
    debug_assert!(s > 1.0 && q > 0.0);
    const N: usize = 12;
    let mut sum = 0.0;
    for k in 0..N {
        sum += (q + k as f64).powf(-s);
    }
    let a = q + N as f64;
    sum += a.powf(1.0 - s) / (s - 1.0) + 0.5 * a.powf(-s);
    // Rising factorial s (s+1) ... (s+2j-2) times a^(-s-2j+1).
    let mut fact = s;
    let mut pow = a.powf(-s - 1.0);
    for (j, b) in BERNOULLI_OVER_FACT.iter().enumerate() {
        sum += b * fact * pow;
        let m = 2.0 * j as f64;
        fact *= (s + m + 1.0) * (s + m + 2.0);
        pow /= a * a;
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn riemann_values() {
        let pi = core::f64::consts::PI;
        assert!((hurwitz_zeta(2.0, 1.0) - pi * pi / 6.0).abs() < 1e-13);
        assert!((hurwitz_zeta(4.0, 1.0) - pi.powi(4) / 90.0).abs() < 1e-13);
        // zeta(2, 1/2) = 3 zeta(2)
        assert!((hurwitz_zeta(2.0, 0.5) - pi * pi / 2.0).abs() < 1e-12);
    }

    #[test]
    fn shift_recurrence() {
        for &(s, q) in &[(1.5, 0.3), (2.5, 0.01), (1.1, 7.0)] {
            let lhs = hurwitz_zeta(s, q) - hurwitz_zeta(s, q + 1.0);
            assert!((lhs - q.powf(-s)).abs() < 1e-10 * q.powf(-s));
        }
    }
}
