//! The neutral Thomas-Fermi atom: universal screening function, scaled
//! densities and potentials, energy decomposition, and smeared densities.

use std::f64::consts::PI;
use std::ops::ControlFlow;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::coherent_phase_space::{check_delta, ShapeFunction};
use crate::error::{ensure_domain, Error, Result};
use crate::ode::{Dopri5, GaussCollocation, State};
use crate::radial::{self, LogGrid, RadialFunction};

/// `γ_TF = (3π²)^{2/3}/2`.
pub fn gamma_tf() -> f64 {
    (3.0 * PI * PI).powf(2.0 / 3.0) / 2.0
}

/// Thomas-Fermi length at unit charge, `γ_TF (4π)^{-2/3}`; `r = b Z^{-1/3} x`.
pub fn tf_length_unit() -> f64 {
    gamma_tf() * (4.0 * PI).powf(-2.0 / 3.0)
}

/// Exponent of the first correction to the far field `144/x³`.
fn far_field_exponent() -> f64 {
    (73f64.sqrt() - 7.0) / 2.0
}

pub const CACHE_FORMAT_VERSION: u32 = 1;

/// Grid and solver settings for the universal screening function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniversalGridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub nodes: usize,
    pub tolerance: f64,
}

impl Default for UniversalGridSpec {
    fn default() -> Self {
        Self {
            x_min: 1e-8,
            x_max: 2e4,
            nodes: 4001,
            tolerance: 1e-8,
        }
    }
}

/// The dimensionless screening function `φ` with `φ'' = φ^{3/2}/√x`,
/// `φ(0) = 1`, `φ(∞) = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfUniversalSolution {
    pub version: u32,
    pub spec: UniversalGridSpec,
    pub grid: LogGrid,
    pub phi: Vec<f64>,
    /// `dφ/dx` on the grid.
    pub dphi: Vec<f64>,
    /// Initial slope from adaptive shooting.
    pub slope0: f64,
    /// Initial slope from shooting with the fixed-step collocation scheme.
    pub slope0_collocation: f64,
    /// Initial slope implied by the inward far-field family.
    pub slope0_far_field: f64,
    /// Scale relating the tabulated far-field member to the normalized one.
    pub family_scale: f64,
}

/// Right-hand side in `t = √x` for `(φ, dφ/dx)`.
fn tf_rhs(t: f64, y: &State) -> State {
    [2.0 * t * y[1], 2.0 * y[0].max(0.0).powf(1.5)]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Shot {
    /// φ crossed zero: the slope is too negative.
    Crossed,
    /// φ turned upward: the slope is not negative enough.
    Turned,
    Undecided,
}

fn classify(t: f64, y: &State) -> Option<Shot> {
    if y[0] < 0.0 {
        Some(Shot::Crossed)
    } else if y[1] > 0.0 {
        Some(Shot::Turned)
    } else if t > 1e3 {
        Some(Shot::Undecided)
    } else {
        None
    }
}

const SHOOT_T_MAX: f64 = 1.5e3;

fn shoot_adaptive(slope: f64) -> Result<Shot> {
    let method = Dopri5::default();
    let mut traj = method.start(&tf_rhs, 0.0, [1.0, slope], 1e-3);
    let mut outcome = Shot::Undecided;
    let _ = traj.advance(SHOOT_T_MAX, |t, y| match classify(t, y) {
        Some(s) => {
            outcome = s;
            ControlFlow::Break(())
        }
        None => ControlFlow::Continue(()),
    })?;
    Ok(outcome)
}

fn shoot_collocation(slope: f64) -> Shot {
    let scheme = GaussCollocation { step: 2e-3 };
    let mut outcome = Shot::Undecided;
    scheme.run(
        &tf_rhs,
        0.0,
        [1.0, slope],
        SHOOT_T_MAX,
        |t, y| match classify(t, y) {
            Some(s) => {
                outcome = s;
                ControlFlow::Break(())
            }
            None => ControlFlow::Continue(()),
        },
    );
    outcome
}

/// Bisection on the initial slope inside `[lo, hi]`.
fn bisect_slope(
    mut shoot: impl FnMut(f64) -> Result<Shot>,
    lo: f64,
    hi: f64,
    tolerance: f64,
) -> Result<f64> {
    if shoot(lo)? != Shot::Crossed || shoot(hi)? != Shot::Turned {
        return Err(Error::Bracket { lo, hi });
    }
    let (mut a, mut b) = (lo, hi);
    while b - a > 0.05 * tolerance {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        match shoot(mid)? {
            Shot::Crossed => a = mid,
            Shot::Turned => b = mid,
            Shot::Undecided => return Ok(mid),
        }
    }
    Ok(0.5 * (a + b))
}

pub const SLOPE_BRACKET: (f64, f64) = (-1.7, -1.5);

/// Start of the inward integration of the far-field family.
const FAR_X: f64 = 1e7;

fn far_field_state(x: f64) -> State {
    let lambda = far_field_exponent();
    let corr = x.powf(-lambda);
    let phi = 144.0 / x.powi(3) * (1.0 - corr);
    let dphi = -432.0 / x.powi(4) + 144.0 * (3.0 + lambda) * corr / x.powi(4);
    [phi, dphi]
}

/// Integrates the member `144/x³(1 − x^{-λ} + …)` inward and records it at
/// the descending abscissae `xs`. Returns values at `xs` and at the origin.
fn integrate_far_family(xs: &[f64]) -> Result<(Vec<State>, State)> {
    let method = Dopri5 {
        rtol: 1e-13,
        atol: 1e-300,
        min_step: 1e-15,
    };
    let t_far = FAR_X.sqrt();
    let mut traj = method.start(&tf_rhs, t_far, far_field_state(FAR_X), -1.0);
    let mut out = Vec::with_capacity(xs.len());
    for &x in xs {
        let _ = traj.advance(x.sqrt(), |_, _| ControlFlow::Continue(()))?;
        out.push(traj.y);
    }
    let _ = traj.advance(0.0, |_, _| ControlFlow::Continue(()))?;
    Ok((out, traj.y))
}

/// Solves for the universal screening function.
pub fn solve_universal_tf(tolerance: f64) -> Result<TfUniversalSolution> {
    solve_universal_with(UniversalGridSpec {
        tolerance,
        ..UniversalGridSpec::default()
    })
}

pub fn solve_universal_with(spec: UniversalGridSpec) -> Result<TfUniversalSolution> {
    let tolerance = spec.tolerance;
    ensure_domain(
        tolerance > 1e-12 && tolerance < 1e-3,
        "tolerance",
        tolerance,
        "in (1e-12, 1e-3)",
    )?;
    let (lo, hi) = SLOPE_BRACKET;
    let slope0 = bisect_slope(shoot_adaptive, lo, hi, tolerance)?;
    let slope0_collocation = bisect_slope(|s| Ok(shoot_collocation(s)), lo, hi, tolerance)?;

    // First pass: the value at the origin fixes the scale of the family.
    let (_, origin) = integrate_far_family(&[])?;
    let scale = origin[0].powf(-1.0 / 3.0);
    let slope0_far_field = scale.powi(4) * origin[1];

    let grid = LogGrid::new(spec.x_min, spec.x_max, spec.nodes)?;
    if scale * spec.x_max >= FAR_X {
        return Err(Error::GridExhausted {
            r: spec.x_max,
            r_min: spec.x_min,
            r_max: FAR_X / scale,
        });
    }
    let descending: Vec<f64> = grid.nodes().iter().rev().map(|&x| scale * x).collect();
    let (states, _) = integrate_far_family(&descending)?;
    let s3 = scale.powi(3);
    let s4 = scale.powi(4);
    let mut phi = vec![0.0; grid.len()];
    let mut dphi = vec![0.0; grid.len()];
    for (k, state) in states.iter().enumerate() {
        let i = grid.len() - 1 - k;
        phi[i] = s3 * state[0];
        dphi[i] = s4 * state[1];
    }
    Ok(TfUniversalSolution {
        version: CACHE_FORMAT_VERSION,
        spec,
        grid,
        phi,
        dphi,
        slope0,
        slope0_collocation,
        slope0_far_field,
        family_scale: scale,
    })
}

/// Invariant summary of a universal solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniversalChecks {
    pub integrators_agree: bool,
    pub slope_spread: f64,
    pub monotone_positive: bool,
    pub far_end_value: f64,
    pub far_field_ratio: f64,
    pub max_ode_residual: f64,
}

impl TfUniversalSolution {
    /// `φ(x)` by cubic Hermite interpolation, continued by the small-`x`
    /// expansion and the far-field power law outside the grid.
    pub fn phi_at(&self, x: f64) -> f64 {
        let g = &self.grid;
        let n = g.len();
        if x <= g.r_min() {
            return 1.0 + self.slope0 * x + 4.0 / 3.0 * x.powf(1.5);
        }
        if x >= g.r_max() {
            let lambda = far_field_exponent();
            let s = self.family_scale;
            let end = g.r_max();
            let shape = |y: f64| (1.0 - (s * y).powf(-lambda)) / y.powi(3);
            return self.phi[n - 1] * shape(x) / shape(end);
        }
        let pos = g.position(x);
        let i = (pos.floor() as usize).min(n - 2);
        let (x0, x1) = (g.nodes()[i], g.nodes()[i + 1]);
        let h = x1 - x0;
        let t = (x - x0) / h;
        let (h00, h10, h01, h11) = (
            (1.0 + 2.0 * t) * (1.0 - t) * (1.0 - t),
            t * (1.0 - t) * (1.0 - t),
            t * t * (3.0 - 2.0 * t),
            t * t * (t - 1.0),
        );
        h00 * self.phi[i]
            + h10 * h * self.dphi[i]
            + h01 * self.phi[i + 1]
            + h11 * h * self.dphi[i + 1]
    }

    /// `φ(x)·x³/144` at the last node.
    pub fn far_field_ratio(&self) -> f64 {
        let n = self.grid.len();
        self.phi[n - 1] * self.grid.r_max().powi(3) / 144.0
    }

    pub fn checks(&self) -> UniversalChecks {
        let spread = (self.slope0 - self.slope0_collocation)
            .abs()
            .max((self.slope0 - self.slope0_far_field).abs());
        let monotone_positive = self.phi.iter().all(|&p| p > 0.0)
            && self.phi.windows(2).all(|w| w[1] < w[0])
            && self.phi[0] < 1.0;
        // Fourth-order derivative of dφ/dx in ln x against φ^{3/2}/√x.
        let h = self.grid.step();
        let x = self.grid.nodes();
        let d = &self.dphi;
        let max_ode_residual = (2..x.len() - 2)
            .map(|i| {
                let second =
                    (-d[i + 2] + 8.0 * d[i + 1] - 8.0 * d[i - 1] + d[i - 2]) / (12.0 * h * x[i]);
                let rhs = self.phi[i].powf(1.5) / x[i].sqrt();
                (second - rhs).abs() / rhs
            })
            .fold(0.0, f64::max);
        UniversalChecks {
            integrators_agree: spread <= 10.0 * self.spec.tolerance,
            slope_spread: spread,
            monotone_positive,
            far_end_value: *self.phi.last().expect("grid is non-empty"),
            far_field_ratio: self.far_field_ratio(),
            max_ode_residual,
        }
    }
}

/// Kinetic, nuclear attraction and electron repulsion parts of the TF energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TfEnergies {
    pub kinetic: f64,
    pub attraction: f64,
    pub repulsion: f64,
    pub total: f64,
}

/// The Thomas-Fermi atom at charge `Z`.
#[derive(Debug, Clone, PartialEq)]
pub struct TfAtom {
    z: f64,
    length: f64,
    universal: Arc<TfUniversalSolution>,
    grid: Arc<LogGrid>,
    density: RadialFunction,
    potential: RadialFunction,
    hartree: RadialFunction,
    energies: TfEnergies,
}

/// Serializable snapshot of an atom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfAtomRecord {
    pub version: u32,
    pub z: f64,
    pub length_scale: f64,
    pub r: Vec<f64>,
    pub rho: Vec<f64>,
    pub potential: Vec<f64>,
    pub energies: TfEnergies,
}

/// Scales the universal solution to charge `z`.
pub fn build_atom(z: f64, universal: Arc<TfUniversalSolution>) -> Result<TfAtom> {
    ensure_domain(z > 0.0 && z.is_finite(), "Z", z, "positive and finite")?;
    let length = tf_length_unit() * z.powf(-1.0 / 3.0);
    let grid = Arc::new(universal.grid.scaled(length)?);
    if grid.r_min() < f64::MIN_POSITIVE.sqrt() || !grid.r_max().is_finite() {
        return Err(Error::GridExhausted {
            r: grid.r_min(),
            r_min: f64::MIN_POSITIVE.sqrt(),
            r_max: f64::MAX,
        });
    }
    let gamma = gamma_tf();
    let potential = RadialFunction::new(
        grid.clone(),
        grid.nodes()
            .iter()
            .zip(&universal.phi)
            .map(|(&r, &phi)| z * phi / r)
            .collect(),
    );
    let density = potential.map(|_, v| (v.max(0.0) / gamma).powf(1.5));
    let hartree = density.hartree();

    let kinetic = 0.6
        * gamma
        * grid.volume_integral(
            &density
                .values()
                .iter()
                .map(|&d| d.powf(5.0 / 3.0))
                .collect::<Vec<_>>(),
        );
    let attraction = -z
        * grid.volume_integral(
            &grid
                .nodes()
                .iter()
                .zip(density.values())
                .map(|(&r, &d)| d / r)
                .collect::<Vec<_>>(),
        );
    let repulsion = 0.5
        * grid.volume_integral(
            &density
                .values()
                .iter()
                .zip(hartree.values())
                .map(|(a, b)| a * b)
                .collect::<Vec<_>>(),
        );
    let energies = TfEnergies {
        kinetic,
        attraction,
        repulsion,
        total: kinetic + attraction + repulsion,
    };
    Ok(TfAtom {
        z,
        length,
        universal,
        grid,
        density,
        potential,
        hartree,
        energies,
    })
}

/// Invariant summary of an atom.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtomChecks {
    pub electron_count: f64,
    pub neutrality_error: f64,
    pub tf_relation_error: f64,
    pub density_bound_holds: bool,
    pub virial_error: f64,
    pub energy_sum_error: f64,
}

impl TfAtom {
    pub fn z(&self) -> f64 {
        self.z
    }

    /// `b Z^{-1/3}`.
    pub fn length_scale(&self) -> f64 {
        self.length
    }

    pub fn universal(&self) -> &Arc<TfUniversalSolution> {
        &self.universal
    }

    pub fn grid(&self) -> &Arc<LogGrid> {
        &self.grid
    }

    /// `ρ_TF` on the grid.
    pub fn density(&self) -> &RadialFunction {
        &self.density
    }

    /// `V_Z` on the grid.
    pub fn potential(&self) -> &RadialFunction {
        &self.potential
    }

    /// `ρ_TF * |·|^{-1}` on the grid.
    pub fn hartree(&self) -> &RadialFunction {
        &self.hartree
    }

    pub fn energies(&self) -> TfEnergies {
        self.energies
    }

    /// `V_Z(r) = (Z/r) φ(r/b)`.
    pub fn potential_at(&self, r: f64) -> f64 {
        self.z / r * self.universal.phi_at(r / self.length)
    }

    /// `ρ_TF(r) = (V_Z(r)/γ_TF)^{3/2}`.
    pub fn density_at(&self, r: f64) -> f64 {
        (self.potential_at(r).max(0.0) / gamma_tf()).powf(1.5)
    }

    /// `D(ρ_TF, ρ_TF)`.
    pub fn self_repulsion(&self) -> f64 {
        self.energies.repulsion
    }

    pub fn record(&self) -> TfAtomRecord {
        TfAtomRecord {
            version: CACHE_FORMAT_VERSION,
            z: self.z,
            length_scale: self.length,
            r: self.grid.nodes().to_vec(),
            rho: self.density.values().to_vec(),
            potential: self.potential.values().to_vec(),
            energies: self.energies,
        }
    }

    pub fn checks(&self) -> AtomChecks {
        let gamma = gamma_tf();
        let count = self.density.integral();
        let poisson = self.density.screened_potential(self.z);
        let x_limit = 1e2 * self.length;
        let tf_relation_error = self
            .grid
            .nodes()
            .iter()
            .zip(self.density.values().iter().zip(poisson.values()))
            .filter(|(&r, _)| r <= x_limit)
            .map(|(_, (&rho, &v))| (gamma * rho.powf(2.0 / 3.0) - v).abs() / v)
            .fold(0.0, f64::max);
        let cap = (self.z / gamma).powf(1.5);
        let density_bound_holds = self
            .grid
            .nodes()
            .iter()
            .zip(self.density.values())
            .all(|(&r, &rho)| rho <= cap * r.powf(-1.5) * (1.0 + 1e-12));
        let e = self.energies;
        AtomChecks {
            electron_count: count,
            neutrality_error: (count - self.z).abs() / self.z,
            tf_relation_error,
            density_bound_holds,
            virial_error: (e.kinetic + e.total).abs() / e.total.abs(),
            energy_sum_error: (e.kinetic + e.attraction + e.repulsion - e.total).abs(),
        }
    }
}

/// `D(a, b) = ½∬ a(x)b(y)/|x−y|` for radial densities on one grid.
pub fn coulomb_energy(rho_a: &RadialFunction, rho_b: &RadialFunction) -> f64 {
    radial::coulomb_energy(rho_a, rho_b)
}

/// Newton potential of a radial density.
pub fn hartree_potential(rho: &RadialFunction) -> RadialFunction {
    rho.hartree()
}

/// `ρ_δ = ρ_TF * g_R²` with `R = Z^{-δ}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SmearedDensity {
    pub delta: f64,
    pub radius: f64,
    pub rho_delta: RadialFunction,
}

pub fn smear_density(atom: &TfAtom, delta: f64, shape: &ShapeFunction) -> Result<SmearedDensity> {
    check_delta(delta)?;
    let radius = atom.z().powf(-delta);
    let rho_delta = shape.smear(|s| atom.density_at(s), atom.grid(), radius)?;
    Ok(SmearedDensity {
        delta,
        radius,
        rho_delta,
    })
}

impl SmearedDensity {
    /// `V_δ = Z/r − ρ_δ * |·|^{-1}` on the grid.
    pub fn potential(&self, z: f64) -> RadialFunction {
        self.rho_delta.screened_potential(z)
    }
}

/// Result of minimizing the discretized TF functional at unit charge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FunctionalMinimum {
    pub energy: f64,
    pub electrons: f64,
    pub iterations: usize,
    /// Largest `|r (V − 1/r + ρ * |·|^{-1})|` at convergence.
    pub residual: f64,
}

/// Second route to the unit-charge TF energy that never touches the
/// screening ODE: the functional `(3/5)γ∫ρ^{5/3} − ∫ρ/r + D(ρ, ρ)` is
/// discretized on a log grid with the grid's own Newton-potential operator,
/// and its Euler-Lagrange equation `γρ^{2/3} = 1/r − ρ * |·|^{-1}` is solved
/// for `w = rV` by damped Newton iteration.
pub fn minimize_tf_functional(grid: &LogGrid) -> Result<FunctionalMinimum> {
    use nalgebra::{DMatrix, DVector};

    let grid = Arc::new(grid.clone());
    let n = grid.len();
    let r = grid.nodes().to_vec();
    let gamma = gamma_tf();
    let mut hartree = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        let mut unit = vec![0.0; n];
        unit[k] = 1.0;
        let column = RadialFunction::new(grid.clone(), unit).hartree();
        hartree.set_column(k, &DVector::from_column_slice(column.values()));
    }
    let density = |w: &DVector<f64>| -> DVector<f64> {
        DVector::from_iterator(n, (0..n).map(|i| (w[i].max(0.0) / r[i] / gamma).powf(1.5)))
    };
    let residual = |w: &DVector<f64>| -> DVector<f64> {
        let h = &hartree * density(w);
        DVector::from_iterator(n, (0..n).map(|i| w[i] - 1.0 + r[i] * h[i]))
    };

    // Start from a screened Coulomb potential on the TF length scale.
    let length = tf_length_unit();
    let mut w = DVector::from_iterator(n, r.iter().map(|&x| 1.0 / (1.0 + x / length).powi(3)));
    let mut g = residual(&w);
    let mut norm = g.amax();
    let mut iterations = 0;
    while norm > 1e-12 {
        iterations += 1;
        if iterations > 200 {
            return Err(Error::Root(format!(
                "TF functional minimization stalled at residual {norm:e}"
            )));
        }
        // d(ρ_k)/d(w_k) = (3/2) γ^{-3/2} w_k^{1/2} r_k^{-3/2}.
        let slope: Vec<f64> = (0..n)
            .map(|k| 1.5 * gamma.powf(-1.5) * w[k].max(0.0).sqrt() * r[k].powf(-1.5))
            .collect();
        let mut jacobian = DMatrix::<f64>::identity(n, n);
        for i in 0..n {
            for k in 0..n {
                jacobian[(i, k)] += r[i] * hartree[(i, k)] * slope[k];
            }
        }
        let step = jacobian.lu().solve(&(-&g)).ok_or_else(|| {
            Error::Root("singular Newton matrix in TF functional minimization".into())
        })?;
        let mut t = 1.0;
        loop {
            let trial = &w + t * &step;
            let trial_g = residual(&trial);
            let trial_norm = trial_g.amax();
            if trial_norm < norm || t < 1e-6 {
                w = trial;
                g = trial_g;
                norm = trial_norm;
                break;
            }
            t *= 0.5;
        }
    }

    let rho = RadialFunction::new(grid.clone(), density(&w).iter().copied().collect());
    let kinetic = 0.6
        * gamma
        * grid.volume_integral(
            &rho.values()
                .iter()
                .map(|d| d.powf(5.0 / 3.0))
                .collect::<Vec<_>>(),
        );
    let attraction = -grid.volume_integral(
        &r.iter()
            .zip(rho.values())
            .map(|(x, d)| d / x)
            .collect::<Vec<_>>(),
    );
    let repulsion = radial::coulomb_energy(&rho, &rho);
    Ok(FunctionalMinimum {
        energy: kinetic + attraction + repulsion,
        electrons: rho.integral(),
        iterations,
        residual: norm,
    })
}
