//! Spinless semiclassical phase-space energy of the smeared TF potential, the
//! assembled lower bound and the sandwich table around `E_TF`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bound_integrals::{check_z_grid, upper_bound_total, BoundContext, ScalingFit};
use crate::coherent_phase_space::{check_delta, ShapeFunction};
use crate::error::Result;
use crate::exchange_hole::smeared_hole_sup;
use crate::quadrature::{adaptive_scalar, gauss, Tolerance};
use crate::radial::RadialFunction;
use crate::relativistic_kernels::{kinetic, DispersionParams};
use crate::tf_atom::{smear_density, TfAtom};

/// Number of scan centers used to measure the correlation constant.
pub const CORRELATION_SCAN_POINTS: usize = 64;

/// `[t]_− = min(t, 0)`.
pub fn negative_part(t: f64) -> f64 {
    t.min(0.0)
}

/// Momentum where `E_c(ξ) − c² = v`; zero where `v ≤ 0`.
pub fn xi_max(v: f64, c: f64) -> f64 {
    if v <= 0.0 {
        0.0
    } else {
        (v * v + 2.0 * c * c * v).sqrt() / c
    }
}

/// Kinetic energy used in the phase-space integral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Dispersion {
    /// `E_c(ξ) − c²`.
    Relativistic { c: f64 },
    /// `ξ²/2`.
    NonRelativistic,
}

impl Dispersion {
    fn energy(self, xi: f64) -> f64 {
        match self {
            Self::Relativistic { c } => kinetic(xi, c),
            Self::NonRelativistic => 0.5 * xi * xi,
        }
    }

    fn fermi_momentum(self, v: f64) -> f64 {
        match self {
            Self::Relativistic { c } => xi_max(v, c),
            Self::NonRelativistic => (2.0 * v.max(0.0)).sqrt(),
        }
    }
}

/// `2 (2π)^{-3} ∫ 4πξ² [T(ξ) − v]_− dξ`, the spin-summed energy density at
/// potential `v`.
pub fn energy_density(v: f64, dispersion: Dispersion) -> f64 {
    let top = dispersion.fermi_momentum(v);
    if top == 0.0 {
        return 0.0;
    }
    let inner = gauss(32).integrate(0.0, top, |xi| {
        4.0 * PI * xi * xi * negative_part(dispersion.energy(xi) - v)
    });
    2.0 * inner / (2.0 * PI).powi(3)
}

/// `∫ e(V(q)) dq` over space. Inside `core_radius` the non-relativistic
/// density is used, since the relativistic one is not integrable against
/// an unscreened Coulomb singularity.
pub fn phase_space_energy(
    potential: &RadialFunction,
    dispersion: Dispersion,
    core_radius: f64,
) -> Result<f64> {
    let grid = potential.grid();
    let (lo, hi) = (grid.r_min(), grid.r_max());
    let split = core_radius.clamp(lo, hi);
    let tol = Tolerance::rel(1e-9);
    let piece = |a: f64, b: f64, dispersion: Dispersion| {
        if b <= a {
            return Ok(0.0);
        }
        adaptive_scalar(
            |t| {
                let q = t.exp();
                4.0 * PI * q.powi(3) * energy_density(potential.eval(q), dispersion)
            },
            &[a.ln(), b.ln()],
            tol,
        )
    };
    let core = piece(lo, split, Dispersion::NonRelativistic)?;
    let outer = piece(split, hi, dispersion)?;
    // Below the grid V ~ Z/q, so e ~ q^{-5/2} and ∫₀^a 4πq² e = 2·4πa³ e(a).
    let head = 2.0
        * 4.0
        * PI
        * lo.powi(3)
        * energy_density(potential.values()[0], Dispersion::NonRelativistic);
    Ok(head + core + outer)
}

/// Radius inside which the relativistic density is replaced.
pub fn core_radius(z: f64) -> f64 {
    1.0 / z
}

/// `2 tr[E_c − c² − V_δ]_−` evaluated on phase space.
pub fn semiclassical_energy(
    atom: &TfAtom,
    kappa: f64,
    delta: f64,
    shape: &ShapeFunction,
) -> Result<f64> {
    let params = DispersionParams::for_atom(atom.z(), kappa)?;
    let smeared = smear_density(atom, delta, shape)?;
    phase_space_energy(
        &smeared.potential(atom.z()),
        Dispersion::Relativistic { c: params.c() },
        core_radius(atom.z()),
    )
}

/// `‖L_{ρ_δ}‖∞ / Z` from a sup scan.
pub fn measured_correlation_constant(
    atom: &TfAtom,
    delta: f64,
    shape: &ShapeFunction,
) -> Result<f64> {
    Ok(smeared_hole_sup(atom, delta, shape, CORRELATION_SCAN_POINTS)?.sup / atom.z())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundReport {
    #[serde(rename = "Z")]
    pub z: f64,
    pub kappa: f64,
    pub delta: f64,
    pub e_semiclassical: f64,
    pub d_tf: f64,
    pub correlation_constant: f64,
    pub e_tf: f64,
    pub e_lower: f64,
    /// `e_lower / E_TF`.
    pub ratio: f64,
}

/// `semiclassical energy − D(ρ_TF, ρ_TF) − k Z²` with `N = Z`.
pub fn lower_bound_total(
    atom: &TfAtom,
    kappa: f64,
    delta: f64,
    shape: &ShapeFunction,
    correlation_constant: f64,
) -> Result<LowerBoundReport> {
    check_delta(delta)?;
    let z = atom.z();
    let e_semiclassical = semiclassical_energy(atom, kappa, delta, shape)?;
    let d_tf = atom.self_repulsion();
    let e_lower = e_semiclassical - d_tf - correlation_constant * z * z;
    let e_tf = atom.energies().total;
    Ok(LowerBoundReport {
        z,
        kappa,
        delta,
        e_semiclassical,
        d_tf,
        correlation_constant,
        e_tf,
        e_lower,
        ratio: e_lower / e_tf,
    })
}

/// One line of the sandwich table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SandwichRow {
    #[serde(rename = "Z")]
    pub z: f64,
    pub kappa: f64,
    pub delta: f64,
    #[serde(rename = "E_TF")]
    pub e_tf: f64,
    pub upper: f64,
    pub lower: f64,
    /// `(upper − E_TF) Z^{-7/3}`.
    pub upper_gap: f64,
    /// `(E_TF − lower) Z^{-7/3}`.
    pub lower_gap: f64,
    /// `k Z² · Z^{-7/3}`, the correlation part of the lower gap.
    pub correlation_gap: f64,
    /// `(E_TF + D − semiclassical energy) Z^{-7/3}`, the remaining part.
    pub semiclassical_gap: f64,
}

impl SandwichRow {
    pub fn ordered(&self) -> bool {
        self.lower <= self.e_tf && self.e_tf <= self.upper
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandwichTable {
    pub rows: Vec<SandwichRow>,
    pub upper_gap_fit: ScalingFit,
    pub lower_gap_fit: ScalingFit,
}

impl SandwichTable {
    /// Both normalized gaps positive and strictly decreasing along the grid.
    pub fn converging(&self) -> bool {
        let decreasing = |f: fn(&SandwichRow) -> f64| {
            self.rows.iter().all(|r| f(r) > 0.0)
                && self.rows.windows(2).all(|w| f(&w[1]) < f(&w[0]))
        };
        decreasing(|r| r.upper_gap) && decreasing(|r| r.lower_gap)
    }
}

/// Upper and lower bounds around `E_TF` on a Z grid spanning at least two
/// decades. Gap exponents are compared with `−1/9` (upper) and `−1/3`
/// (lower). This is a trend at accessible Z, not a certified rate.
pub fn convergence_study(
    ctx: &BoundContext,
    kappa: f64,
    delta: f64,
    z_grid: &[f64],
) -> Result<SandwichTable> {
    check_z_grid(z_grid, 2.0)?;
    check_delta(delta)?;
    let rows = z_grid
        .par_iter()
        .map(|&z| {
            let atom = ctx.atom(z)?;
            let upper = upper_bound_total(ctx, z, kappa, delta)?;
            let k = measured_correlation_constant(&atom, delta, ctx.shape())?;
            let lower = lower_bound_total(&atom, kappa, delta, ctx.shape(), k)?;
            let norm = z.powf(-7.0 / 3.0);
            Ok(SandwichRow {
                z,
                kappa,
                delta,
                e_tf: lower.e_tf,
                upper: upper.total,
                lower: lower.e_lower,
                upper_gap: (upper.total - lower.e_tf) * norm,
                lower_gap: (lower.e_tf - lower.e_lower) * norm,
                correlation_gap: k * z * z * norm,
                semiclassical_gap: (lower.e_tf + lower.d_tf - lower.e_semiclassical) * norm,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let zs = z_grid.to_vec();
    let upper_gap_fit = ScalingFit::new(
        "upper_gap",
        zs.clone(),
        rows.iter().map(|r| r.upper_gap).collect(),
        -1.0 / 9.0,
    )?;
    let lower_gap_fit = ScalingFit::new(
        "lower_gap",
        zs,
        rows.iter().map(|r| r.lower_gap).collect(),
        -1.0 / 3.0,
    )?;
    Ok(SandwichTable {
        rows,
        upper_gap_fit,
        lower_gap_fit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tf_atom::{build_atom, solve_universal_tf, TfUniversalSolution};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::sync::{Arc, OnceLock};

    fn universal() -> Arc<TfUniversalSolution> {
        static U: OnceLock<Arc<TfUniversalSolution>> = OnceLock::new();
        U.get_or_init(|| Arc::new(solve_universal_tf(1e-8).unwrap()))
            .clone()
    }

    proptest! {
        #[test]
        fn negative_part_splits(t in -1e6f64..1e6) {
            let neg = negative_part(t);
            prop_assert!(neg <= 0.0);
            prop_assert_eq!(neg + t.max(0.0), t);
        }

        #[test]
        fn xi_max_solves_dispersion(v in 1e-6f64..1e6, c in 0.1f64..1e4) {
            let top = xi_max(v, c);
            let residual = (kinetic(top, c) - v).abs() / v;
            prop_assert!(residual < 1e-10, "residual {residual}");
        }
    }

    #[test]
    fn xi_max_nonrelativistic_limit() {
        let v: f64 = 3.7;
        let c = 1e3 * v.sqrt();
        assert!((xi_max(v, c) / (2.0 * v).sqrt() - 1.0).abs() < 1e-3);
        assert_eq!(xi_max(-1.0, c), 0.0);
    }

    #[test]
    fn nonrelativistic_density_closed_form() {
        for v in [1e-3f64, 0.7, 40.0] {
            let expected = -(2.0 * v).powf(2.5) / (15.0 * PI * PI);
            assert_relative_eq!(
                energy_density(v, Dispersion::NonRelativistic),
                expected,
                max_relative = 1e-13
            );
        }
        assert_eq!(energy_density(-2.0, Dispersion::NonRelativistic), 0.0);
    }

    #[test]
    fn tf_potential_reproduces_functional_identity() {
        // min_ρ {(3/5)γ∫ρ^{5/3} − ∫V_TF ρ} = E_TF + D(ρ_TF, ρ_TF).
        let atom = build_atom(1e3, universal()).unwrap();
        let value = phase_space_energy(atom.potential(), Dispersion::NonRelativistic, 0.0).unwrap();
        let expected = atom.energies().total + atom.self_repulsion();
        assert_relative_eq!(value, expected, max_relative = 1e-5);
    }

    #[test]
    fn smeared_potential_nonrelativistic_limit() {
        let atom = build_atom(1e3, universal()).unwrap();
        let smeared = smear_density(&atom, 5.0 / 9.0, &ShapeFunction::quartic()).unwrap();
        let value =
            phase_space_energy(&smeared.potential(1e3), Dispersion::NonRelativistic, 0.0).unwrap();
        let expected = atom.energies().total + atom.self_repulsion();
        assert!((value / expected - 1.0).abs() < 0.02);
    }

    #[test]
    fn semiclassical_energy_decreases_with_kappa() {
        let atom = build_atom(1e3, universal()).unwrap();
        let shape = ShapeFunction::quartic();
        let values: Vec<f64> = [0.1, 0.5, 0.9]
            .iter()
            .map(|&k| semiclassical_energy(&atom, k, 5.0 / 9.0, &shape).unwrap())
            .collect();
        assert!(values.iter().all(|&v| v < 0.0));
        assert!(values.windows(2).all(|w| w[1] < w[0]), "{values:?}");
    }

    #[test]
    fn lower_bound_sits_below_tf() {
        let atom = build_atom(1e3, universal()).unwrap();
        let shape = ShapeFunction::quartic();
        let k = measured_correlation_constant(&atom, 5.0 / 9.0, &shape).unwrap();
        let report = lower_bound_total(&atom, 0.5, 5.0 / 9.0, &shape, k).unwrap();
        assert!(report.e_semiclassical < 0.0 && report.d_tf > 0.0);
        assert!(report.ratio > 1.0 && report.ratio < 1.5, "{report:?}");
    }

    #[test]
    fn correlation_term_exponent() {
        let ctx = BoundContext::new(universal()).unwrap();
        let points: Vec<(f64, f64)> = [1e2, 1e3, 1e4]
            .iter()
            .map(|&z| (z, z * z / ctx.tf_energy(z).abs()))
            .collect();
        let fit = crate::bound_integrals::fit_exponent(&points).unwrap();
        assert!((fit.exponent + 1.0 / 3.0).abs() < 0.02);
    }

    #[test]
    fn short_grids_are_rejected() {
        let ctx = BoundContext::new(universal()).unwrap();
        assert!(convergence_study(&ctx, 0.5, 5.0 / 9.0, &[1e3, 1e4]).is_err());
        assert!(convergence_study(&ctx, 0.5, 0.2, &[1e2, 1e3, 1e4]).is_err());
    }
}
