//! Relativistic dispersion, the Pauli-to-Dirac spinor embedding, the
//! interaction weights of the error terms, and free Dirac projector identities.

use nalgebra::{Matrix4, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_domain, Result};

/// Largest admissible `κ = Z/c`, `2/(π/2 + 2/π)`.
pub const KAPPA_CRIT: f64 = 2.0 / (std::f64::consts::FRAC_PI_2 + 2.0 / std::f64::consts::PI);

/// Speed of light and coupling ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DispersionParams {
    c: f64,
    kappa: f64,
}

impl DispersionParams {
    pub fn new(c: f64, kappa: f64) -> Result<Self> {
        ensure_domain(c > 0.0 && c.is_finite(), "c", c, "positive and finite")?;
        ensure_domain(
            (0.0..KAPPA_CRIT).contains(&kappa),
            "kappa",
            kappa,
            "in [0, kappa_crit)",
        )?;
        Ok(Self { c, kappa })
    }

    /// `c = Z/κ` for a nucleus of charge `z`.
    pub fn for_atom(z: f64, kappa: f64) -> Result<Self> {
        ensure_domain(z > 0.0 && z.is_finite(), "Z", z, "positive")?;
        ensure_domain(
            kappa > 0.0 && kappa < KAPPA_CRIT,
            "kappa",
            kappa,
            "in (0, kappa_crit)",
        )?;
        Self::new(z / kappa, kappa)
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }
}

fn check_momentum(p: f64) -> Result<()> {
    ensure_domain(p >= 0.0 && !p.is_nan(), "p", p, "nonnegative")
}

/// Unchecked `E_c(p) = sqrt(c²p² + c⁴)`.
#[inline]
pub(crate) fn dispersion(p: f64, c: f64) -> f64 {
    c * (p * p + c * c).sqrt()
}

/// Unchecked `E_c(p) − c²`, free of cancellation for `p ≪ c`.
#[inline]
pub(crate) fn kinetic(p: f64, c: f64) -> f64 {
    let e = dispersion(p, c);
    c * c * p * p / (e + c * c)
}

pub fn energy_dispersion(p: f64, params: &DispersionParams) -> Result<f64> {
    check_momentum(p)?;
    Ok(dispersion(p, params.c))
}

/// `E_c(p) − c²`.
pub fn kinetic_energy(p: f64, params: &DispersionParams) -> Result<f64> {
    check_momentum(p)?;
    Ok(kinetic(p, params.c))
}

/// `N_c(p) = sqrt(2 E_c (E_c + c²))`.
pub fn normalization_factor(p: f64, params: &DispersionParams) -> Result<f64> {
    check_momentum(p)?;
    let e = dispersion(p, params.c);
    Ok((2.0 * e * (e + params.c * params.c)).sqrt())
}

/// Upper and lower multipliers of the embedding, `(m1, m2)`.
pub fn embedding_multipliers(p: f64, params: &DispersionParams) -> Result<(f64, f64)> {
    check_momentum(p)?;
    let c = params.c;
    let e = dispersion(p, c);
    let n = (2.0 * e * (e + c * c)).sqrt();
    Ok(((e + c * c) / n, c * p / n))
}

/// `p²/2 − (E_c(p) − c²)`, written as `p⁴/(2(E_c + c²)(…))` to stay exact
/// for small `p`.
pub fn kinetic_concavity_gap(p: f64, params: &DispersionParams) -> Result<f64> {
    check_momentum(p)?;
    let c = params.c;
    let e = dispersion(p, c);
    let s = e + c * c;
    // p²/2 − c²p²/s = p²(s − 2c²)/(2s) and s − 2c² = c²p²/s.
    Ok(p * p * (c * c * p * p / s) / (2.0 * s))
}

/// The `φ₁`-deviation and `φ₂` weights at a pair of momentum magnitudes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelWeights {
    pub w1: f64,
    pub w2: f64,
    #[serde(rename = "K")]
    pub total: f64,
    /// `(3c²ξξ′ + 2c³(ξ+ξ′))/(2c⁴)`, which dominates `w1`.
    pub w1_bound: f64,
}

/// `(1 − m1², m1)` with the first entry free of cancellation.
#[inline]
fn upper_split(p: f64, c: f64) -> (f64, f64) {
    let e = dispersion(p, c);
    let a = (e + c * c) / (2.0 * e);
    let one_minus_a = kinetic(p, c) / (2.0 * e);
    (one_minus_a, a.sqrt())
}

/// Unchecked `w1 = |1 − m1(ξ) m1(ξ′)|`.
#[inline]
pub(crate) fn w1_raw(xi: f64, xi_prime: f64, c: f64) -> f64 {
    let (d, m) = upper_split(xi, c);
    let (d2, m2) = upper_split(xi_prime, c);
    // 1 − a a′ = (1 − a) + a (1 − a′) with a = m1².
    let one_minus_prod_sq = d + (1.0 - d) * d2;
    one_minus_prod_sq / (1.0 + m * m2)
}

/// Unchecked `w2 = c²ξξ′/(N_c(ξ)N_c(ξ′))`.
#[inline]
pub(crate) fn w2_raw(xi: f64, xi_prime: f64, c: f64) -> f64 {
    let n = |p: f64| {
        let e = dispersion(p, c);
        (2.0 * e * (e + c * c)).sqrt()
    };
    (c * xi / n(xi)) * (c * xi_prime / n(xi_prime))
}

pub fn kernel_weights(xi: f64, xi_prime: f64, params: &DispersionParams) -> Result<KernelWeights> {
    check_momentum(xi)?;
    check_momentum(xi_prime)?;
    let c = params.c;
    let w1 = w1_raw(xi, xi_prime, c);
    let w2 = w2_raw(xi, xi_prime, c);
    let w1_bound = (3.0 * xi * xi_prime / (c * c) + 2.0 * (xi + xi_prime) / c) / 2.0;
    Ok(KernelWeights {
        w1,
        w2,
        total: w1 + w2,
        w1_bound,
    })
}

/// Outcome of the free Dirac projector identities at one momentum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectorCheck {
    pub holds: bool,
    pub max_deviation: f64,
    pub trace_positive: f64,
}

pub const PROJECTOR_TOLERANCE: f64 = 1e-12;

type M4 = Matrix4<Complex64>;

fn pauli() -> [[[Complex64; 2]; 2]; 3] {
    let z = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let i = Complex64::new(0.0, 1.0);
    [
        [[z, one], [one, z]],
        [[z, -i], [i, z]],
        [[one, z], [z, -one]],
    ]
}

/// `D₀(ξ) = c α·ξ + c² β` in the standard representation.
pub fn free_dirac_matrix(xi: &Vector3<f64>, c: f64) -> Matrix4<Complex64> {
    let sigma = pauli();
    let mut d = M4::zeros();
    for a in 0..2 {
        d[(a, a)] = Complex64::new(c * c, 0.0);
        d[(a + 2, a + 2)] = Complex64::new(-c * c, 0.0);
        for b in 0..2 {
            let s: Complex64 = (0..3).map(|k| sigma[k][a][b] * (c * xi[k])).sum();
            d[(a, b + 2)] += s;
            d[(a + 2, b)] += s;
        }
    }
    d
}

fn max_abs(m: &M4) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Verifies `U⁻¹D₀U = −D₀`, `Λ₋ = U⁻¹Λ₊U`, `Λ₊ + Λ₋ = 1`, `Λ±² = Λ±`,
/// `tr Λ₊ = 2` and `tr(Λ₊ a·1) = 2a`.
pub fn projector_identity_check(
    xi: &Vector3<f64>,
    params: &DispersionParams,
) -> Result<ProjectorCheck> {
    for k in 0..3 {
        ensure_domain(xi[k].is_finite(), "xi", xi[k], "finite")?;
    }
    let c = params.c;
    let d = free_dirac_matrix(xi, c);
    let energy = dispersion(xi.norm(), c);
    let id = M4::identity();
    let sign = d / Complex64::new(energy, 0.0);
    let half = Complex64::new(0.5, 0.0);
    let plus = (id + sign) * half;
    let minus = (id - sign) * half;

    let mut u = M4::zeros();
    for a in 0..2 {
        u[(a, a + 2)] = Complex64::new(1.0, 0.0);
        u[(a + 2, a)] = Complex64::new(-1.0, 0.0);
    }
    let u_inv = u.try_inverse().expect("U is orthogonal");

    let scale = energy.max(1.0);
    let a_value = 0.731;
    let trace_plus = plus.trace();
    let deviations = [
        max_abs(&(u_inv * d * u + d)) / scale,
        max_abs(&(u_inv * plus * u - minus)),
        max_abs(&(plus + minus - id)),
        max_abs(&(plus * plus - plus)),
        max_abs(&(minus * minus - minus)),
        (trace_plus - Complex64::new(2.0, 0.0)).norm(),
        ((plus * id * Complex64::new(a_value, 0.0)).trace() - Complex64::new(2.0 * a_value, 0.0))
            .norm(),
    ];
    let max_deviation = deviations.into_iter().fold(0.0, f64::max);
    Ok(ProjectorCheck {
        holds: max_deviation <= PROJECTOR_TOLERANCE,
        max_deviation,
        trace_positive: trace_plus.re,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn params(c: f64) -> DispersionParams {
        DispersionParams::new(c, 0.5).unwrap()
    }

    #[test]
    fn kappa_crit_value() {
        assert_relative_eq!(KAPPA_CRIT, 0.906_036_700_900_580_4, max_relative = 1e-12);
    }

    #[test]
    fn params_validation() {
        assert!(DispersionParams::new(-1.0, 0.5).is_err());
        assert!(DispersionParams::new(1.0, 0.95).is_err());
        assert!(DispersionParams::for_atom(10.0, 0.0).is_err());
        assert_relative_eq!(DispersionParams::for_atom(10.0, 0.5).unwrap().c(), 20.0);
    }

    #[test]
    fn dispersion_examples() {
        assert_eq!(energy_dispersion(0.0, &params(137.0)).unwrap(), 18769.0);
        assert_relative_eq!(
            energy_dispersion(5.0, &params(5.0)).unwrap(),
            2f64.sqrt() * 25.0,
            max_relative = 1e-15
        );
        assert_relative_eq!(energy_dispersion(3.0, &params(4.0)).unwrap(), 20.0);
        assert!(energy_dispersion(-1.0, &params(4.0)).is_err());
    }

    #[test]
    fn normalization_examples() {
        let p = params(3.0);
        assert_relative_eq!(normalization_factor(0.0, &p).unwrap(), 18.0);
        let c = 7.0;
        let big = 1e6 * c;
        let n = normalization_factor(big, &params(c)).unwrap();
        assert_relative_eq!(n / (2f64.sqrt() * c * big), 1.0, max_relative = 1e-5);
        assert!(normalization_factor(-0.1, &p).is_err());
    }

    #[test]
    fn multiplier_limits() {
        let p = params(2.0);
        assert_eq!(embedding_multipliers(0.0, &p).unwrap(), (1.0, 0.0));
        let (m1, m2) = embedding_multipliers(2.0e9, &p).unwrap();
        assert_relative_eq!(m1, std::f64::consts::FRAC_1_SQRT_2, max_relative = 1e-8);
        assert_relative_eq!(m2, std::f64::consts::FRAC_1_SQRT_2, max_relative = 1e-8);
    }

    #[test]
    fn concavity_gap_taylor_bound() {
        let gap = kinetic_concavity_gap(1.0, &params(10.0)).unwrap();
        assert!(gap > 0.0 && gap < 1.25e-3);
        // Leading Taylor term p⁴/(8c²) minus the next p⁶/(16c⁴).
        assert_relative_eq!(gap, 1.25e-3 - 6.25e-6, max_relative = 1e-4);
        assert_eq!(kinetic_concavity_gap(0.0, &params(10.0)).unwrap(), 0.0);
    }

    #[test]
    fn weights_vanish_at_rest() {
        let w = kernel_weights(0.0, 0.0, &params(3.0)).unwrap();
        assert_eq!((w.w1, w.w2, w.total), (0.0, 0.0, 0.0));
    }

    #[test]
    fn w1_matches_extended_precision_at_xi_equal_c() {
        // With ξ = ξ′ = c: E = √2c², m1² = (1 + 1/√2)/2, so w1 = 1 − m1² = (2 − √2)/4.
        let c = 11.0;
        let w = kernel_weights(c, c, &params(c)).unwrap();
        let exact = (2.0 - 2f64.sqrt()) / 4.0;
        assert!((w.w1 - exact).abs() < 1e-12, "{} vs {}", w.w1, exact);
        // m2² = c⁴/N² = 1/(4 + 2√2).
        assert!((w.w2 - 1.0 / (4.0 + 2.0 * 2f64.sqrt())).abs() < 1e-12);
    }

    #[test]
    fn nonrelativistic_limit_rates() {
        let (p, xi, xi2) = (1.3, 0.7, 1.9);
        let cs = [1e2, 1e3, 1e4];
        let gaps: Vec<f64> = cs
            .iter()
            .map(|&c| (p * p / 2.0 - kinetic_energy(p, &params(c)).unwrap()).abs())
            .collect();
        let w1s: Vec<f64> = cs
            .iter()
            .map(|&c| kernel_weights(xi, xi2, &params(c)).unwrap().w1)
            .collect();
        let w2s: Vec<f64> = cs
            .iter()
            .map(|&c| kernel_weights(xi, xi2, &params(c)).unwrap().w2)
            .collect();
        for series in [&gaps, &w1s, &w2s] {
            let slope = (series[2] / series[0]).log10() / 2.0;
            assert!(slope <= -1.0 + 1e-6, "slope {slope}");
        }
    }

    #[test]
    fn projector_at_rest_is_diagonal() {
        let check = projector_identity_check(&Vector3::zeros(), &params(5.0)).unwrap();
        assert!(check.holds);
        assert_eq!(check.max_deviation, 0.0);
        let d = free_dirac_matrix(&Vector3::zeros(), 5.0);
        assert_eq!(d[(0, 0)].re, 25.0);
        assert_eq!(d[(3, 3)].re, -25.0);
    }

    #[test]
    fn projector_identities_example() {
        let check = projector_identity_check(&Vector3::new(1.0, 2.0, 3.0), &params(5.0)).unwrap();
        assert!(check.holds, "deviation {}", check.max_deviation);
        // D₀² = E² 1 independently of the projector algebra.
        let d = free_dirac_matrix(&Vector3::new(1.0, 2.0, 3.0), 5.0);
        let e2 = 25.0 * (14.0 + 25.0);
        assert!(max_abs(&(d * d - M4::identity() * Complex64::new(e2, 0.0))) < 1e-9);
    }

    proptest! {
        #[test]
        fn unitarity_and_lower_bound(p in 0.0f64..1e4, c in 0.1f64..1e3) {
            let params = params(c);
            let (m1, m2) = embedding_multipliers(p, &params).unwrap();
            prop_assert!((m1 * m1 + m2 * m2 - 1.0).abs() < 4.0 * f64::EPSILON);
            let n = normalization_factor(p, &params).unwrap();
            prop_assert!(n >= 2f64.sqrt() * c * c * (1.0 - 1e-15));
            let e = energy_dispersion(p, &params).unwrap();
            let alt = ((e + c * c).powi(2) + c * c * p * p) / (n * n);
            prop_assert!((alt - 1.0).abs() < 1e-13);
        }

        #[test]
        fn concavity_gap_nonnegative(p in 0.0f64..1e5, c in 1e-2f64..1e4) {
            let gap = kinetic_concavity_gap(p, &params(c)).unwrap();
            prop_assert!(gap >= 0.0);
            let direct = p * p / 2.0 - kinetic_energy(p, &params(c)).unwrap();
            prop_assert!((gap - direct).abs() <= 1e-12 * (p * p).max(1.0));
        }

        #[test]
        fn dispersion_monotone(p in 0.0f64..1e3, dp in 1e-6f64..1e2, c in 0.1f64..1e3) {
            let params = params(c);
            prop_assert!(energy_dispersion(p + dp, &params).unwrap() >= energy_dispersion(p, &params).unwrap());
        }

        #[test]
        fn weights_bounded_and_dominated(xi in 0.0f64..1e5, xi2 in 0.0f64..1e5, c in 0.1f64..1e3) {
            let w = kernel_weights(xi, xi2, &params(c)).unwrap();
            prop_assert!(w.w1 >= 0.0 && w.w2 >= 0.0);
            prop_assert!(w.w2 <= 0.5 + 1e-15);
            let (_, a) = embedding_multipliers(xi, &params(c)).unwrap();
            let (_, b) = embedding_multipliers(xi2, &params(c)).unwrap();
            prop_assert!((w.w2 - a * b).abs() <= 1e-15);
            prop_assert!(w.w1 <= w.w1_bound * (1.0 + 1e-12) + 1e-300);
            prop_assert!((w.total - w.w1 - w.w2).abs() <= 1e-16);
            let (m1, _) = embedding_multipliers(xi, &params(c)).unwrap();
            let (m1b, _) = embedding_multipliers(xi2, &params(c)).unwrap();
            prop_assert!((w.w1 - (1.0 - m1 * m1b).abs()).abs() < 1e-14);
        }

        #[test]
        fn projector_identities_random(x in -50.0f64..50.0, y in -50.0f64..50.0, z in -50.0f64..50.0, c in 0.5f64..50.0) {
            let check = projector_identity_check(&Vector3::new(x, y, z), &params(c)).unwrap();
            prop_assert!(check.holds, "deviation {}", check.max_deviation);
            prop_assert!((check.trace_positive - 2.0).abs() < 1e-12);
        }
    }
}
