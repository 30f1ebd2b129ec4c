//! Exchange-hole radius and potential of radial densities, the auxiliary
//! function `f(t)`, the near/far split of the TF hole potential, sup-norm
//! scans and the pointwise correlation inequality.
//!
//! Off-center integrals use bipolar coordinates: the sphere of radius `u`
//! around a point at distance `s` from the origin meets the shells of a radial
//! density `σ` with weight `(2πu/s) ∫_{|s−u|}^{s+u} σ(r) r dr`.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bound_integrals::fit_exponent;
use crate::coherent_phase_space::{check_delta, ShapeFunction};
use crate::error::{ensure_domain, Error, Result};
use crate::quadrature::{adaptive_scalar, gauss, Tolerance};
use crate::radial::{coulomb_energy, LogGrid, RadialFunction, RadialSampler};
use crate::tf_atom::{gamma_tf, smear_density, TfAtom};

/// Mass enclosed by the exchange hole.
pub const HOLE_MASS: f64 = 0.5;

/// A spherically symmetric density with its first radial moment.
pub trait RadialDensity: Sync {
    fn density(&self, r: f64) -> f64;
    /// `P(a) = ∫₀^a σ(r) r dr`.
    fn first_moment(&self, a: f64) -> f64;
    /// `∫_{|y|<a} σ`.
    fn enclosed_mass(&self, a: f64) -> f64;
    fn total_mass(&self) -> f64;
    /// Typical length used to start the hole-radius bracket.
    fn length_scale(&self) -> f64;
    /// Radii where `σ` is not smooth.
    fn kinks(&self) -> Vec<f64> {
        Vec::new()
    }
}

/// Constant density on all of space.
#[derive(Debug, Clone, Copy)]
pub struct UniformDensity {
    pub rho0: f64,
}

impl RadialDensity for UniformDensity {
    fn density(&self, _r: f64) -> f64 {
        self.rho0
    }
    fn first_moment(&self, a: f64) -> f64 {
        0.5 * self.rho0 * a * a
    }
    fn enclosed_mass(&self, a: f64) -> f64 {
        4.0 * PI / 3.0 * self.rho0 * a.powi(3)
    }
    fn total_mass(&self) -> f64 {
        f64::INFINITY
    }
    fn length_scale(&self) -> f64 {
        self.rho0.powf(-1.0 / 3.0)
    }
}

/// Constant density inside a ball centred at the origin.
#[derive(Debug, Clone, Copy)]
pub struct UniformBall {
    pub rho0: f64,
    pub radius: f64,
}

impl RadialDensity for UniformBall {
    fn density(&self, r: f64) -> f64 {
        if r < self.radius {
            self.rho0
        } else {
            0.0
        }
    }
    fn first_moment(&self, a: f64) -> f64 {
        0.5 * self.rho0 * a.min(self.radius).powi(2)
    }
    fn enclosed_mass(&self, a: f64) -> f64 {
        4.0 * PI / 3.0 * self.rho0 * a.min(self.radius).powi(3)
    }
    fn total_mass(&self) -> f64 {
        self.enclosed_mass(self.radius)
    }
    fn length_scale(&self) -> f64 {
        self.radius
    }
    fn kinks(&self) -> Vec<f64> {
        vec![self.radius]
    }
}

/// A density sampled on a log grid, with `P` and the enclosed mass
/// tabulated on the same grid.
#[derive(Debug, Clone)]
pub struct TabulatedDensity {
    rho: RadialFunction,
    moment: RadialFunction,
    mass: RadialFunction,
    total: f64,
    scale: f64,
}

impl TabulatedDensity {
    pub fn new(rho: RadialFunction) -> Self {
        let grid = rho.grid().clone();
        let over_r: Vec<f64> = grid
            .nodes()
            .iter()
            .zip(rho.values())
            .map(|(&r, &v)| v / (4.0 * PI * r))
            .collect();
        let moment = RadialFunction::new(grid.clone(), grid.cumulative_volume(&over_r));
        let mass_values = rho.cumulative_mass();
        let total = *mass_values.last().expect("grid is non-empty");
        // Radius of half the total mass, as a starting length.
        let half = mass_values.partition_point(|&m| m < 0.5 * total);
        let scale = grid.nodes()[half.min(grid.len() - 1)];
        let mass = RadialFunction::new(grid, mass_values);
        Self {
            rho,
            moment,
            mass,
            total,
            scale,
        }
    }

    pub fn rho(&self) -> &RadialFunction {
        &self.rho
    }

    fn clamp_eval(table: &RadialFunction, a: f64) -> f64 {
        if a <= 0.0 {
            0.0
        } else if a >= table.grid().r_max() {
            *table.values().last().expect("grid is non-empty")
        } else {
            table.eval(a)
        }
    }
}

impl RadialDensity for TabulatedDensity {
    fn density(&self, r: f64) -> f64 {
        if r > self.rho.grid().r_max() {
            0.0
        } else {
            self.rho.eval(r.max(f64::MIN_POSITIVE))
        }
    }
    fn first_moment(&self, a: f64) -> f64 {
        Self::clamp_eval(&self.moment, a)
    }
    fn enclosed_mass(&self, a: f64) -> f64 {
        Self::clamp_eval(&self.mass, a)
    }
    fn total_mass(&self) -> f64 {
        self.total
    }
    fn length_scale(&self) -> f64 {
        self.scale
    }
}

/// `∫_a^b σ(r) r dr`; thin shells are integrated directly to avoid
/// cancellation in `P(b) − P(a)`.
fn shell_moment(sigma: &impl RadialDensity, a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    if a > 0.0 && b - a <= 0.25 * b {
        gauss(16).integrate(a, b, |r| sigma.density(r) * r)
    } else {
        sigma.first_moment(b) - sigma.first_moment(a)
    }
}

/// Relative accuracy of the bipolar integrals; `scale` estimates the result
/// so that near-cancelling integrands at tiny `s` still terminate.
fn ball_tolerance(scale: f64) -> Tolerance {
    Tolerance {
        abs: (1e-13 * scale).max(1e-300),
        rel: 1e-11,
        max_intervals: 4000,
    }
}

/// Breakpoints for integrands in `u` over `[lo, hi]`: the kink at `u = s` and
/// the images `|k − s|`, `k + s` of density kinks.
fn bipolar_breaks(sigma: &impl RadialDensity, s: f64, lo: f64, hi: f64) -> Vec<f64> {
    let mut breaks = vec![lo, hi, s];
    for k in sigma.kinks() {
        breaks.push((k - s).abs());
        breaks.push(k + s);
    }
    breaks.retain(|&b| b >= lo && b <= hi);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    breaks
}

/// Mass of `σ` inside the ball of radius `radius` centred at distance `s`
/// from the origin.
pub fn ball_mass(sigma: &impl RadialDensity, s: f64, radius: f64) -> Result<f64> {
    ensure_domain(s >= 0.0 && s.is_finite(), "s", s, "nonnegative")?;
    ensure_domain(
        radius >= 0.0 && radius.is_finite(),
        "R",
        radius,
        "nonnegative",
    )?;
    if radius == 0.0 {
        return Ok(0.0);
    }
    if s <= 1e-12 * radius {
        return Ok(sigma.enclosed_mass(radius));
    }
    let breaks = bipolar_breaks(sigma, s, 0.0, radius);
    let integral = adaptive_scalar(
        |u| u * shell_moment(sigma, (s - u).abs(), s + u),
        &breaks,
        ball_tolerance(s * sigma.enclosed_mass(radius)),
    )?;
    Ok(2.0 * PI / s * integral)
}

/// `∫_{inner<|x−y|<outer} σ(y)/|x−y| dy` for `|x| = s`.
pub fn shell_potential(sigma: &impl RadialDensity, s: f64, inner: f64, outer: f64) -> Result<f64> {
    ensure_domain(s >= 0.0 && s.is_finite(), "s", s, "nonnegative")?;
    ensure_domain(inner >= 0.0, "inner radius", inner, "nonnegative")?;
    if outer <= inner {
        return Ok(0.0);
    }
    if s <= 1e-12 * outer {
        return Ok(4.0 * PI * (sigma.first_moment(outer) - sigma.first_moment(inner)));
    }
    let breaks = bipolar_breaks(sigma, s, inner, outer);
    let integral = adaptive_scalar(
        |u| shell_moment(sigma, (s - u).abs(), s + u),
        &breaks,
        ball_tolerance(s * sigma.first_moment(outer + s)),
    )?;
    Ok(2.0 * PI / s * integral)
}

/// Convergence test for the hole radius: relative in `R`, absolute in mass.
struct HoleConvergency;

impl roots::Convergency<f64> for HoleConvergency {
    fn is_root_found(&mut self, y: f64) -> bool {
        y.abs() < 1e-14
    }
    fn is_converged(&mut self, x1: f64, x2: f64) -> bool {
        (x1 - x2).abs() <= 1e-12 * x1.abs().max(x2.abs())
    }
    fn is_iteration_limit_reached(&mut self, iter: usize) -> bool {
        iter >= 300
    }
}

/// Smallest `R` with `ball_mass(σ, s, R) = 1/2`.
pub fn hole_radius(sigma: &impl RadialDensity, s: f64) -> Result<f64> {
    ensure_domain(s >= 0.0 && s.is_finite(), "s", s, "nonnegative")?;
    let total = sigma.total_mass();
    if total < HOLE_MASS {
        return Err(Error::InsufficientMass { mass: total });
    }
    let local = sigma.density(s);
    let mut hi = if local > 0.0 && local.is_finite() {
        (3.0 * HOLE_MASS / (4.0 * PI * local)).cbrt()
    } else {
        sigma.length_scale()
    };
    let mut lo = 0.0;
    let mut mass = ball_mass(sigma, s, hi)?;
    let mut doublings = 0;
    while mass < HOLE_MASS {
        doublings += 1;
        if doublings > 200 {
            return Err(Error::InsufficientMass { mass });
        }
        lo = hi;
        hi *= 2.0;
        mass = ball_mass(sigma, s, hi)?;
    }
    let failure = RefCell::new(None);
    let root = roots::find_root_brent(
        lo,
        hi,
        |r| match ball_mass(sigma, s, r) {
            Ok(m) => m - HOLE_MASS,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        },
        &mut HoleConvergency,
    );
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    root.map_err(|e| Error::Root(format!("hole radius at s = {s}: {e:?}")))
}

/// Hole radius and hole potential at one center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolePoint {
    pub s: f64,
    pub radius: f64,
    pub potential: f64,
}

/// `L_σ(x) = ∫_{|x−y|<R_σ(x)} σ(y)/|x−y| dy` at `|x| = s`.
pub fn hole_potential(sigma: &impl RadialDensity, s: f64) -> Result<f64> {
    hole_point(sigma, s).map(|p| p.potential)
}

pub fn hole_point(sigma: &impl RadialDensity, s: f64) -> Result<HolePoint> {
    let radius = hole_radius(sigma, s)?;
    let potential = shell_potential(sigma, s, 0.0, radius)?;
    Ok(HolePoint {
        s,
        radius,
        potential,
    })
}

/// Hole radii and potentials of one density at several centers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoleProfile {
    pub centers: Vec<f64>,
    pub radii: Vec<f64>,
    pub potentials: Vec<f64>,
}

pub fn hole_profile(sigma: &impl RadialDensity, centers: &[f64]) -> Result<HoleProfile> {
    let points = centers
        .par_iter()
        .map(|&s| hole_point(sigma, s))
        .collect::<Result<Vec<_>>>()?;
    Ok(HoleProfile {
        centers: centers.to_vec(),
        radii: points.iter().map(|p| p.radius).collect(),
        potentials: points.iter().map(|p| p.potential).collect(),
    })
}

/// `F(T) = ∫₀^T [(1+u)^{1/2} − |1−u|^{1/2}] du`.
fn f_primitive(big_t: f64) -> f64 {
    if big_t <= 0.25 {
        // (4/3) Σ_{k≥1} binom(3/2, 2k) T^{2k}
        let t2 = big_t * big_t;
        let mut coeff = 1.0;
        let mut sum = 0.0;
        let mut power = 1.0;
        for k in 1..=12u32 {
            let j = 2 * k;
            let a = 1.5 - (j - 2) as f64;
            let b = 1.5 - (j - 1) as f64;
            coeff *= a * b / ((j - 1) as f64 * j as f64);
            power *= t2;
            sum += coeff * power;
        }
        return 4.0 / 3.0 * sum;
    }
    if big_t <= 1.0 {
        return 2.0 / 3.0 * ((1.0 + big_t).powf(1.5) + (1.0 - big_t).powf(1.5) - 2.0);
    }
    // (1+T)^{3/2} − (T−1)^{3/2} rationalized against cancellation at large T.
    let (up, down) = ((1.0 + big_t).powf(1.5), (big_t - 1.0).powf(1.5));
    let difference = (6.0 * big_t * big_t + 2.0) / (up + down);
    2.0 / 3.0 * (difference - 2.0)
}

/// `f(t) = √t ∫_{|y|<1/t} |y|^{-1} |y + e|^{-3/2} dy` for a unit vector `e`.
/// The angular integral is done in closed form, `f(t) = 4π √t F(1/t)`.
pub fn f_function(t: f64) -> Result<f64> {
    ensure_domain(t > 0.0 && t.is_finite(), "t", t, "positive and finite")?;
    Ok(4.0 * PI * t.sqrt() * f_primitive(1.0 / t))
}

/// Golden-section maximization of `g` on `[a, b]`.
fn golden_max(
    mut g: impl FnMut(f64) -> Result<f64>,
    mut a: f64,
    mut b: f64,
    iterations: usize,
) -> Result<(f64, f64)> {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - ratio * (b - a);
    let mut x2 = a + ratio * (b - a);
    let mut g1 = g(x1)?;
    let mut g2 = g(x2)?;
    for _ in 0..iterations {
        if g1 >= g2 {
            b = x2;
            x2 = x1;
            g2 = g1;
            x1 = b - ratio * (b - a);
            g1 = g(x1)?;
        } else {
            a = x1;
            x1 = x2;
            g1 = g2;
            x2 = a + ratio * (b - a);
            g2 = g(x2)?;
        }
    }
    Ok(if g1 >= g2 { (x1, g1) } else { (x2, g2) })
}

fn log_nodes(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let step = (hi / lo).ln() / (count - 1) as f64;
    (0..count).map(|i| lo * (i as f64 * step).exp()).collect()
}

/// Limit of `f(t)` as `t → 0`; `F(T) ~ 2√T` for large `T`.
pub const F_LIMIT_AT_ZERO: f64 = 8.0 * PI;

/// `‖f‖∞` over `t > 0`: a 161-point log scan of `[1e-4, 1e4]` refined by
/// golden section, compared with the limit at `t → 0`. Returns
/// `(argmax, max)`; an argmax of `0` means the sup is the limit.
pub fn f_sup_norm() -> Result<(f64, f64)> {
    let ts = log_nodes(1e-4, 1e4, 161);
    let values = ts
        .iter()
        .map(|&t| f_function(t))
        .collect::<Result<Vec<_>>>()?;
    let (i, _) = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("scan is non-empty");
    let lo = ts[i.saturating_sub(1)].ln();
    let hi = ts[(i + 1).min(ts.len() - 1)].ln();
    let (x, v) = golden_max(|x| f_function(x.exp()), lo, hi, 80)?;
    let interior = v.max(values[i]);
    Ok(if interior >= F_LIMIT_AT_ZERO {
        (x.exp(), interior)
    } else {
        (0.0, F_LIMIT_AT_ZERO)
    })
}

/// Near and far parts of the TF hole potential at `|x| = s` with their caps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HoleSplit {
    pub s: f64,
    pub hole_radius: f64,
    pub hole_potential: f64,
    /// `∫_{|y|≤1/Z} ρ(x+y)/|y|`.
    pub a1: f64,
    /// `∫_{1/Z≤|y|≤R_hole} ρ(x+y)/|y|`.
    pub a2: f64,
    /// `‖f‖∞ γ_TF^{-3/2} Z`.
    pub a1_cap: f64,
    /// `Z/2`.
    pub a2_cap: f64,
}

impl HoleSplit {
    pub fn caps_hold(&self) -> bool {
        self.a1 <= self.a1_cap && self.a2 <= self.a2_cap
    }

    /// `L ≤ A₁ + A₂` up to quadrature noise.
    pub fn split_holds(&self) -> bool {
        self.hole_potential <= (self.a1 + self.a2) * (1.0 + 1e-9)
    }
}

pub fn a1_a2_decomposition(
    atom: &TfAtom,
    density: &TabulatedDensity,
    f_sup: f64,
    s: f64,
) -> Result<HoleSplit> {
    let z = atom.z();
    let point = hole_point(density, s)?;
    let near = 1.0 / z;
    let a1 = shell_potential(density, s, 0.0, near)?;
    let a2 = shell_potential(density, s, near, point.radius)?;
    Ok(HoleSplit {
        s,
        hole_radius: point.radius,
        hole_potential: point.potential,
        a1,
        a2,
        a1_cap: f_sup * gamma_tf().powf(-1.5) * z,
        a2_cap: 0.5 * z,
    })
}

/// One node of a hole scan, laid out as the CSV columns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HoleScanRow {
    #[serde(rename = "Z")]
    pub z: f64,
    pub delta: Option<f64>,
    pub s: f64,
    #[serde(rename = "R_hole")]
    pub r_hole: f64,
    #[serde(rename = "L")]
    pub l: f64,
    #[serde(rename = "A1")]
    pub a1: Option<f64>,
    #[serde(rename = "A2")]
    pub a2: Option<f64>,
}

/// Sup of the hole potential over the scan centers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupScan {
    #[serde(rename = "Z")]
    pub z: f64,
    pub delta: Option<f64>,
    pub rows: Vec<HoleScanRow>,
    pub sup: f64,
    pub argmax: f64,
}

/// Scan centers: `s = 0` and 64 log-spaced points in `[1e-4, 1e2] Z^{-1/3}`.
pub fn scan_centers(z: f64, count: usize) -> Vec<f64> {
    let unit = z.powf(-1.0 / 3.0);
    let mut centers = vec![0.0];
    centers.extend(log_nodes(1e-4 * unit, 1e2 * unit, count));
    centers
}

fn refine_sup(sigma: &impl RadialDensity, centers: &[f64], values: &[f64]) -> Result<(f64, f64)> {
    let (i, &best) = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("scan is non-empty");
    // Interior maxima between positive centers are refined in ln s.
    if i >= 2 && i + 1 < centers.len() {
        let (x, v) = golden_max(
            |x| hole_potential(sigma, x.exp()),
            centers[i - 1].ln(),
            centers[i + 1].ln(),
            40,
        )?;
        if v > best {
            return Ok((x.exp(), v));
        }
    }
    Ok((centers[i], best))
}

/// Hole scan of `ρ_TF` with the near/far split at every node.
pub fn tf_hole_scan(atom: &TfAtom, count: usize) -> Result<SupScan> {
    let density = TabulatedDensity::new(atom.density().clone());
    let (_, f_sup) = f_sup_norm()?;
    let centers = scan_centers(atom.z(), count);
    let splits = centers
        .par_iter()
        .map(|&s| a1_a2_decomposition(atom, &density, f_sup, s))
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<HoleScanRow> = splits
        .iter()
        .map(|h| HoleScanRow {
            z: atom.z(),
            delta: None,
            s: h.s,
            r_hole: h.hole_radius,
            l: h.hole_potential,
            a1: Some(h.a1),
            a2: Some(h.a2),
        })
        .collect();
    let values: Vec<f64> = rows.iter().map(|r| r.l).collect();
    let (argmax, sup) = refine_sup(&density, &centers, &values)?;
    Ok(SupScan {
        z: atom.z(),
        delta: None,
        rows,
        sup,
        argmax,
    })
}

/// `‖L_{ρ_δ}‖∞` of the smeared density `ρ_TF * g²_{Z^{-δ}}`.
pub fn smeared_hole_sup(
    atom: &TfAtom,
    delta: f64,
    shape: &ShapeFunction,
    count: usize,
) -> Result<SupScan> {
    check_delta(delta)?;
    let smeared = smear_density(atom, delta, shape)?;
    let density = TabulatedDensity::new(smeared.rho_delta);
    let centers = scan_centers(atom.z(), count);
    let profile = hole_profile(&density, &centers)?;
    let rows = (0..centers.len())
        .map(|i| HoleScanRow {
            z: atom.z(),
            delta: Some(delta),
            s: centers[i],
            r_hole: profile.radii[i],
            l: profile.potentials[i],
            a1: None,
            a2: None,
        })
        .collect();
    let (argmax, sup) = refine_sup(&density, &centers, &profile.potentials)?;
    Ok(SupScan {
        z: atom.z(),
        delta: Some(delta),
        rows,
        sup,
        argmax,
    })
}

/// Z-exponent of a family of sup scans.
pub fn sup_exponent(scans: &[SupScan]) -> Result<f64> {
    let points: Vec<(f64, f64)> = scans.iter().map(|s| (s.z, s.sup)).collect();
    fit_exponent(&points).map(|f| f.exponent)
}

/// Tabulated ingredients of the correlation inequality at one `(Z, δ)`.
#[derive(Debug, Clone)]
pub struct CorrelationTables {
    z: f64,
    delta: f64,
    /// `ρ_δ * |·|^{-1}`.
    hartree: RadialFunction,
    /// `L_{ρ_δ}` on a log grid of centers.
    hole: RadialFunction,
    hole_at_origin: f64,
    d_tf: f64,
    d_smeared: f64,
}

pub fn correlation_tables(
    atom: &TfAtom,
    delta: f64,
    shape: &ShapeFunction,
) -> Result<CorrelationTables> {
    let smeared = smear_density(atom, delta, shape)?;
    let hartree = smeared.rho_delta.hartree();
    let d_smeared = coulomb_energy(&smeared.rho_delta, &smeared.rho_delta);
    let density = TabulatedDensity::new(smeared.rho_delta);
    let length = atom.length_scale();
    let grid = Arc::new(LogGrid::new(1e-6 * length, 1e4 * length, 600)?);
    let profile = hole_profile(&density, grid.nodes())?;
    Ok(CorrelationTables {
        z: atom.z(),
        delta,
        hartree,
        hole: RadialFunction::new(grid, profile.potentials),
        hole_at_origin: hole_potential(&density, 0.0)?,
        d_tf: atom.self_repulsion(),
        d_smeared,
    })
}

impl CorrelationTables {
    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn d_tf(&self) -> f64 {
        self.d_tf
    }

    pub fn d_smeared(&self) -> f64 {
        self.d_smeared
    }

    pub fn hole_potential_at(&self, s: f64) -> f64 {
        let grid = self.hole.grid();
        if s <= grid.r_min() {
            // L is continuous at the origin; interpolate linearly from s = 0.
            let t = s / grid.r_min();
            (1.0 - t) * self.hole_at_origin + t * self.hole.values()[0]
        } else {
            self.hole.eval(s)
        }
    }

    pub fn hartree_at(&self, s: f64) -> f64 {
        let grid = self.hartree.grid();
        if s <= grid.r_min() {
            self.hartree.values()[0]
        } else if s >= grid.r_max() {
            // Outside the grid the density has no mass left.
            let last = self.hartree.values().len() - 1;
            self.hartree.values()[last] * grid.r_max() / s
        } else {
            self.hartree.eval(s)
        }
    }
}

/// Both sides of the correlation inequality for one configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSample {
    pub lhs: f64,
    /// With `D(ρ_TF, ρ_TF)` in the last summand.
    pub rhs: f64,
    pub holds: bool,
    /// With `D(ρ_δ, ρ_δ)` in the last summand.
    pub rhs_all_smeared: f64,
    pub holds_all_smeared: bool,
}

fn holds_within(lhs: f64, rhs: f64) -> bool {
    lhs >= rhs - 1e-6 * (lhs.abs() + rhs.abs())
}

/// `Σ_{μ<ν} 1/|x_μ − x_ν| ≥ Σ_ν [(ρ_δ * |·|^{-1})(x_ν) − L_{ρ_δ}(x_ν)] − D`.
pub fn correlation_inequality_sample(
    positions: &[[f64; 3]],
    tables: &CorrelationTables,
) -> Result<CorrelationSample> {
    if positions.len() < 2 {
        return Err(Error::Invalid(format!(
            "the correlation inequality needs at least 2 positions, got {}",
            positions.len()
        )));
    }
    let mut lhs = 0.0;
    for (i, a) in positions.iter().enumerate() {
        for (j, b) in positions.iter().enumerate().skip(i + 1) {
            let d = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt();
            if d == 0.0 {
                return Err(Error::CoincidentPositions(i, j));
            }
            lhs += 1.0 / d;
        }
    }
    let one_body: f64 = positions
        .iter()
        .map(|x| {
            let s = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
            tables.hartree_at(s) - tables.hole_potential_at(s)
        })
        .sum();
    let rhs = one_body - tables.d_tf;
    let rhs_all_smeared = one_body - tables.d_smeared;
    Ok(CorrelationSample {
        lhs,
        rhs,
        holds: holds_within(lhs, rhs),
        rhs_all_smeared,
        holds_all_smeared: holds_within(lhs, rhs_all_smeared),
    })
}

/// Outcome of a random sweep over configurations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSweep {
    #[serde(rename = "Z")]
    pub z: f64,
    pub delta: f64,
    pub configurations: usize,
    pub max_particles: usize,
    pub violations: usize,
    pub violations_all_smeared: usize,
    /// Smallest `(lhs − rhs)/(|lhs| + |rhs|)` seen.
    pub min_margin: f64,
    pub min_margin_all_smeared: f64,
}

/// Draws `configurations` sets of `2..=max_particles` points independently
/// from `ρ_TF/Z` and checks the inequality on each. Configuration `k` uses
/// stream `k` of a ChaCha generator seeded with `seed`.
pub fn correlation_sweep(
    atom: &TfAtom,
    tables: &CorrelationTables,
    configurations: usize,
    max_particles: usize,
    seed: u64,
) -> Result<CorrelationSweep> {
    ensure_domain(
        max_particles >= 2,
        "max_particles",
        max_particles as f64,
        "at least 2",
    )?;
    let sampler = RadialSampler::new(atom.density());
    let samples = (0..configurations)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let n = rng.random_range(2..=max_particles);
            let positions: Vec<[f64; 3]> = (0..n)
                .map(|_| {
                    let r = sampler.sample(rng.random::<f64>());
                    let cos = 2.0 * rng.random::<f64>() - 1.0;
                    let sin = (1.0 - cos * cos).max(0.0).sqrt();
                    let phi = 2.0 * PI * rng.random::<f64>();
                    [r * sin * phi.cos(), r * sin * phi.sin(), r * cos]
                })
                .collect();
            correlation_inequality_sample(&positions, tables)
        })
        .collect::<Result<Vec<_>>>()?;
    let margin = |lhs: f64, rhs: f64| (lhs - rhs) / (lhs.abs() + rhs.abs());
    Ok(CorrelationSweep {
        z: atom.z(),
        delta: tables.delta,
        configurations,
        max_particles,
        violations: samples.iter().filter(|s| !s.holds).count(),
        violations_all_smeared: samples.iter().filter(|s| !s.holds_all_smeared).count(),
        min_margin: samples
            .iter()
            .map(|s| margin(s.lhs, s.rhs))
            .fold(f64::INFINITY, f64::min),
        min_margin_all_smeared: samples
            .iter()
            .map(|s| margin(s.lhs, s.rhs_all_smeared))
            .fold(f64::INFINITY, f64::min),
    })
}
