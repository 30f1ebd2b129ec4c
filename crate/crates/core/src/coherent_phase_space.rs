//! Localization profile, phase-space occupation of the Thomas-Fermi atom,
//! its momentum moments, and the coherent-state trial density.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_domain, Error, Result};
use crate::quadrature::{adaptive_scalar, gauss, Tolerance};
use crate::radial::{LogGrid, RadialFunction};
use crate::tf_atom::TfAtom;

/// The quartic bump `g(x) = c₀(1 − |x|²)²` on the unit ball, L²-normalized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapeFunction {
    amplitude: f64,
    norm_sq: f64,
    grad_norm_sq: f64,
}

/// `‖∇g‖²` of the quartic bump in closed form.
pub const QUARTIC_GRAD_NORM_SQ: f64 = 11.0;

impl ShapeFunction {
    /// The profile used throughout; normalization and gradient norm are
    /// evaluated by Gauss quadrature, which is exact for the polynomial.
    pub fn quartic() -> Self {
        let amplitude = (3465.0 / (512.0 * PI)).sqrt();
        let rule = gauss(16);
        let norm_sq = rule.integrate(0.0, 1.0, |r| {
            let g = amplitude * (1.0 - r * r).powi(2);
            4.0 * PI * r * r * g * g
        });
        let grad_norm_sq = rule.integrate(0.0, 1.0, |r| {
            let dg = -4.0 * amplitude * r * (1.0 - r * r);
            4.0 * PI * r * r * dg * dg
        });
        Self {
            amplitude,
            norm_sq,
            grad_norm_sq,
        }
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    /// `∫ g²`.
    pub fn norm_sq(&self) -> f64 {
        self.norm_sq
    }

    /// `‖∇g‖²` of the undilated profile.
    pub fn grad_norm_sq(&self) -> f64 {
        self.grad_norm_sq
    }

    /// `g(r)` for the undilated profile.
    pub fn profile(&self, r: f64) -> f64 {
        if r >= 1.0 {
            0.0
        } else {
            self.amplitude * (1.0 - r * r).powi(2)
        }
    }

    /// `g_R(r) = R^{-3/2} g(r/R)`.
    pub fn dilated(&self, r: f64, radius: f64) -> f64 {
        radius.powf(-1.5) * self.profile(r / radius)
    }

    /// Radial transform `ĝ(ξ) = (4π/ξ)∫₀¹ r sin(ξr) g(r) dr`, so `ĝ(0) = ∫g`.
    pub fn fourier(&self, xi: f64) -> f64 {
        let xi = xi.abs();
        let c = self.amplitude;
        if xi < 1.5 {
            // Power series of sin, integrated against r(1 − r²)² term by term.
            let mut sum = 0.0;
            let mut term = 1.0;
            let mut k = 0u32;
            loop {
                let m = (2 * k + 2) as f64;
                let moment = 1.0 / (m + 1.0) - 2.0 / (m + 3.0) + 1.0 / (m + 5.0);
                let contribution = term * moment;
                sum += contribution;
                if contribution.abs() < 1e-18 * sum.abs() || k > 40 {
                    break;
                }
                k += 1;
                term *= -xi * xi / ((2 * k) as f64 * (2 * k + 1) as f64);
            }
            4.0 * PI * c * sum
        } else {
            let (s, co) = xi.sin_cos();
            let x2 = xi * xi;
            let poly = xi * x2 * co - 6.0 * x2 * s - 15.0 * xi * co + 15.0 * s;
            4.0 * PI * c * 8.0 * poly / (x2 * x2 * x2 * xi)
        }
    }

    /// Unitary transform `(2π)^{-3/2} ĝ`, for which Plancherel holds.
    pub fn fourier_unitary(&self, xi: f64) -> f64 {
        self.fourier(xi) * (2.0 * PI).powf(-1.5)
    }

    /// `ĝ` tabulated on a momentum grid.
    pub fn fourier_table(&self, grid: &Arc<LogGrid>) -> RadialFunction {
        RadialFunction::from_fn(grid.clone(), |xi| self.fourier(xi))
    }

    /// `Q(a) = ∫₀^a u g_R(u)² du` for the dilated profile, without the
    /// `c₀²/(10R)` prefactor: `1 − (1 − a²/R²)₊⁵`.
    fn smearing_weight(&self, r: f64, s: f64, radius: f64) -> f64 {
        // Returns [Q(r+s) − Q(|r−s|)] / r scaled by 10R/c₀².
        let rr = radius * radius;
        let w = (r - s) * (r - s) / rr;
        let v = (r + s) * (r + s) / rr;
        if w >= 1.0 {
            return 0.0;
        }
        let a = 1.0 - w;
        if v <= 1.0 {
            let b = 1.0 - v;
            let sum = a.powi(4) + a.powi(3) * b + a * a * b * b + a * b.powi(3) + b.powi(4);
            4.0 * s / rr * sum
        } else {
            a.powi(5) / r
        }
    }

    /// Convolution `σ * g_R²` of a radial density with the squared dilated
    /// profile, sampled on `grid`. `σ` may diverge like `r^{-3/2}` at the
    /// origin.
    pub fn smear(
        &self,
        sigma: impl Fn(f64) -> f64 + Sync,
        grid: &Arc<LogGrid>,
        radius: f64,
    ) -> Result<RadialFunction> {
        if (self.norm_sq - 1.0).abs() > 1e-10 {
            return Err(Error::ShapeNotNormalized(self.norm_sq));
        }
        ensure_domain(radius > 0.0 && radius.is_finite(), "R", radius, "positive")?;
        let prefactor = 2.0 * PI * self.amplitude * self.amplitude / (10.0 * radius);
        let tol = Tolerance::rel(1e-11);
        let values = grid
            .nodes()
            .iter()
            .map(|&r| {
                let lo = (r - radius).max(0.0);
                let hi = r + radius;
                let integrand = |s: f64| s * sigma(s) * self.smearing_weight(r, s, radius);
                let value = if lo == 0.0 {
                    // s = u² removes the inverse square-root endpoint behaviour.
                    let mut breaks = vec![0.0];
                    if r < radius {
                        breaks.push((radius - r).sqrt());
                    }
                    breaks.push(hi.sqrt());
                    adaptive_scalar(|u| 2.0 * u * integrand(u * u), &breaks, tol)?
                } else {
                    adaptive_scalar(integrand, &[lo, r, hi], tol)?
                };
                Ok(prefactor * value)
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(RadialFunction::new(grid.clone(), values))
    }
}

impl Default for ShapeFunction {
    fn default() -> Self {
        Self::quartic()
    }
}

/// The default localization profile.
pub fn default_shape() -> ShapeFunction {
    ShapeFunction::quartic()
}

/// Indicator of the classically allowed region `{(p, q): p²/2 ≤ V_Z(q)}`.
#[derive(Debug, Clone, Copy)]
pub struct PhaseSpaceOccupation<'a> {
    atom: &'a TfAtom,
}

impl<'a> PhaseSpaceOccupation<'a> {
    pub fn new(atom: &'a TfAtom) -> Self {
        Self { atom }
    }

    pub fn atom(&self) -> &'a TfAtom {
        self.atom
    }

    /// Fermi momentum `sqrt(2 V_Z(q))`.
    pub fn fermi_momentum(&self, q: f64) -> f64 {
        (2.0 * self.atom.potential_at(q)).max(0.0).sqrt()
    }

    /// Occupation `A(p, q) ∈ {0, 1}`.
    pub fn occupation(&self, p: f64, q: f64) -> f64 {
        if 0.5 * p * p <= self.atom.potential_at(q) {
            1.0
        } else {
            0.0
        }
    }

    /// Spin-summed phase-space density of occupied states at `q`,
    /// `2(2π)^{-3}(4π/3) p_F(q)³`.
    pub fn spatial_density(&self, q: f64) -> f64 {
        let pf = self.fermi_momentum(q);
        2.0 * (2.0 * PI).powi(-3) * 4.0 * PI / 3.0 * pf * pf * pf
    }
}

/// `M_k = ∫dΩ A |p|^k = 2(2π)^{-3} 4π/(k+3) ∫ (2V_Z)^{(k+3)/2} d³q`.
pub fn phase_space_moment(occ: &PhaseSpaceOccupation, k: u32) -> Result<f64> {
    ensure_domain(k <= 3, "k", k as f64, "in 0..=3")?;
    let atom = occ.atom();
    let power = (k as f64 + 3.0) / 2.0;
    let prefactor = 2.0 * (2.0 * PI).powi(-3) * 4.0 * PI / (k as f64 + 3.0);
    let values: Vec<f64> = atom
        .potential()
        .values()
        .iter()
        .map(|&v| prefactor * (2.0 * v.max(0.0)).powf(power))
        .collect();
    Ok(atom.grid().volume_integral(&values))
}

/// Density of the coherent-state trial matrix, `ρ_TF * g_R²` with `ρ_TF`
/// reconstructed from the occupied phase-space volume.
pub fn trial_density(
    occ: &PhaseSpaceOccupation,
    shape: &ShapeFunction,
    delta: f64,
) -> Result<RadialFunction> {
    check_delta(delta)?;
    let atom = occ.atom();
    let radius = atom.z().powf(-delta);
    shape.smear(|q| occ.spatial_density(q), atom.grid(), radius)
}

/// `Z R^{-2} ‖∇g‖²` with `R = Z^{-δ}`.
pub fn kinetic_error_term(z: f64, shape: &ShapeFunction, delta: f64) -> Result<f64> {
    ensure_domain(z > 0.0, "Z", z, "positive")?;
    check_delta(delta)?;
    Ok(z * z.powf(2.0 * delta) * shape.grad_norm_sq())
}

pub(crate) fn check_delta(delta: f64) -> Result<()> {
    ensure_domain(
        delta > 1.0 / 3.0 && delta < 2.0 / 3.0,
        "delta",
        delta,
        "in (1/3, 2/3)",
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn quartic_normalization_and_gradient() {
        let g = default_shape();
        assert!((g.norm_sq() - 1.0).abs() < 1e-12);
        assert_relative_eq!(g.grad_norm_sq(), QUARTIC_GRAD_NORM_SQ, max_relative = 1e-12);
        assert_eq!(g.profile(1.0), 0.0);
        assert_eq!(g.profile(3.0), 0.0);
    }

    #[test]
    fn fourier_at_origin_matches_direct_integral() {
        let g = default_shape();
        let direct = gauss(16).integrate(0.0, 1.0, |r| 4.0 * PI * r * r * g.profile(r));
        assert_relative_eq!(g.fourier(0.0), direct, max_relative = 1e-12);
        // ∫g = 32πc₀/105 in closed form.
        assert_relative_eq!(
            direct,
            32.0 * PI * g.amplitude() / 105.0,
            max_relative = 1e-13
        );
    }

    #[test]
    fn fourier_matches_sine_transform_quadrature() {
        let g = default_shape();
        for &xi in &[1e-3, 0.1, 0.31, 1.0, 1.49, 1.51, 4.4, 17.0, 123.0] {
            let quad = adaptive_scalar(
                |r| 4.0 * PI / xi * r * (xi * r).sin() * g.profile(r),
                &[0.0, 0.5, 1.0],
                Tolerance::rel(1e-13),
            )
            .unwrap();
            let scale = g.fourier(0.0) * (1.0 + xi).powi(-4);
            // The additive floor covers cancellation in the oscillatory quadrature.
            assert!(
                (g.fourier(xi) - quad).abs() < 1e-11 * scale + 1e-17,
                "xi={xi}"
            );
        }
    }

    #[test]
    fn fourier_tail_is_quartic() {
        let g = default_shape();
        let bound = (100..10_000)
            .step_by(7)
            .map(|x| (g.fourier(x as f64) * (x as f64).powi(4)).abs())
            .fold(0.0, f64::max);
        // Leading tail coefficient 32πc₀.
        assert!(bound <= 32.0 * PI * g.amplitude() * 1.01, "{bound}");
        assert!(bound >= 32.0 * PI * g.amplitude() * 0.9);
    }

    #[test]
    fn plancherel_for_unitary_transform() {
        let g = default_shape();
        let total = adaptive_scalar(
            |xi| 4.0 * PI * xi * xi * g.fourier_unitary(xi).powi(2),
            &[0.0, 5.0, 20.0, 100.0, 2000.0],
            Tolerance::rel(1e-12),
        )
        .unwrap();
        assert_relative_eq!(total, 1.0, max_relative = 1e-9);
    }

    #[test]
    fn smearing_a_uniform_density_is_identity_deep_inside() {
        let g = default_shape();
        let grid = Arc::new(LogGrid::new(1e-4, 5.0, 200).unwrap());
        let smeared = g.smear(|_| 2.5, &grid, 0.3).unwrap();
        for (&r, &v) in grid.nodes().iter().zip(smeared.values()) {
            if r < 4.0 {
                assert_relative_eq!(v, 2.5, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn kinetic_error_examples() {
        let g = default_shape();
        assert_relative_eq!(
            kinetic_error_term(1.0, &g, 5.0 / 9.0).unwrap(),
            11.0,
            max_relative = 1e-12
        );
        let a = kinetic_error_term(10.0, &g, 5.0 / 9.0).unwrap();
        let b = kinetic_error_term(1e4, &g, 5.0 / 9.0).unwrap();
        assert_relative_eq!((b / a).log10() / 3.0, 19.0 / 9.0, max_relative = 1e-12);
        assert!(kinetic_error_term(10.0, &g, 0.2).is_err());
    }
}
