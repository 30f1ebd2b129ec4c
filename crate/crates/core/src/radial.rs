//! Logarithmic radial grids and spherically symmetric functions sampled on them.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_domain, Result};
use crate::quadrature::{cumulative_uniform, power_law_head, power_law_tail};

const FOUR_PI: f64 = 4.0 * std::f64::consts::PI;

/// Nodes `r_i = r_min * exp(i h)` for `i = 0..len`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridSpec", into = "GridSpec")]
pub struct LogGrid {
    r_min: f64,
    r_max: f64,
    step: f64,
    nodes: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct GridSpec {
    r_min: f64,
    r_max: f64,
    len: usize,
}

impl TryFrom<GridSpec> for LogGrid {
    type Error = crate::Error;
    fn try_from(s: GridSpec) -> Result<Self> {
        LogGrid::new(s.r_min, s.r_max, s.len)
    }
}

impl From<LogGrid> for GridSpec {
    fn from(g: LogGrid) -> Self {
        GridSpec {
            r_min: g.r_min,
            r_max: g.r_max,
            len: g.len(),
        }
    }
}

impl LogGrid {
    pub fn new(r_min: f64, r_max: f64, len: usize) -> Result<Self> {
        ensure_domain(r_min > 0.0 && r_min.is_finite(), "r_min", r_min, "positive")?;
        ensure_domain(
            r_max > r_min && r_max.is_finite(),
            "r_max",
            r_max,
            "> r_min",
        )?;
        ensure_domain(len >= 8, "len", len as f64, "at least 8 nodes")?;
        let step = (r_max / r_min).ln() / (len - 1) as f64;
        let mut nodes: Vec<f64> = (0..len).map(|i| r_min * (i as f64 * step).exp()).collect();
        nodes[len - 1] = r_max;
        Ok(Self {
            r_min,
            r_max,
            step,
            nodes,
        })
    }

    /// The same grid with every node multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.r_min * factor, self.r_max * factor, self.len())
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn r_min(&self) -> f64 {
        self.r_min
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    /// Spacing in `ln r`.
    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Fractional index of `r` (not clamped).
    pub fn position(&self, r: f64) -> f64 {
        (r / self.r_min).ln() / self.step
    }

    /// `∫ F(r) 4πr² dr` from sampled values of `F`, including power-law
    /// estimates of the pieces below `r_min` and above `r_max`.
    pub fn volume_integral(&self, values: &[f64]) -> f64 {
        let weighted = self.radial_weighted(values);
        let n = weighted.len();
        let h = self.step;
        let body = *cumulative_uniform(&weighted, h).last().unwrap_or(&0.0);
        body + power_law_head(weighted[0], weighted[1], h)
            + power_law_tail(weighted[n - 2], weighted[n - 1], h)
    }

    /// Samples of `F(r) 4πr³`, the integrand in `d ln r`.
    fn radial_weighted(&self, values: &[f64]) -> Vec<f64> {
        assert_eq!(values.len(), self.len(), "values must match the grid");
        self.nodes
            .iter()
            .zip(values)
            .map(|(&r, &f)| FOUR_PI * r * r * r * f)
            .collect()
    }

    /// `∫_0^{r_i} F 4πs² ds` at every node.
    pub fn cumulative_volume(&self, values: &[f64]) -> Vec<f64> {
        let weighted = self.radial_weighted(values);
        let head = power_law_head(weighted[0], weighted[1], self.step);
        cumulative_uniform(&weighted, self.step)
            .into_iter()
            .map(|c| c + head)
            .collect()
    }

    /// `∫_{r_i}^∞ G(s) d ln s` at every node from samples of `G`.
    fn reverse_cumulative(&self, weighted: &[f64]) -> Vec<f64> {
        let n = weighted.len();
        let tail = power_law_tail(weighted[n - 2], weighted[n - 1], self.step);
        let reversed: Vec<f64> = weighted.iter().rev().copied().collect();
        let mut out: Vec<f64> = cumulative_uniform(&reversed, self.step)
            .into_iter()
            .map(|c| c + tail)
            .collect();
        out.reverse();
        out
    }
}

/// Four-point Lagrange interpolation at fractional offset `t` from node 1 of
/// the stencil `y[0..4]` (nodes at -1, 0, 1, 2).
fn lagrange4(y: [f64; 4], t: f64) -> f64 {
    let (a, b, c, d) = (t + 1.0, t, t - 1.0, t - 2.0);
    -b * c * d / 6.0 * y[0] + a * c * d / 2.0 * y[1] - a * b * d / 2.0 * y[2]
        + a * b * c / 6.0 * y[3]
}

/// A spherically symmetric function sampled on a [`LogGrid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialFunction {
    grid: Arc<LogGrid>,
    values: Vec<f64>,
}

impl RadialFunction {
    pub fn new(grid: Arc<LogGrid>, values: Vec<f64>) -> Self {
        assert_eq!(grid.len(), values.len(), "values must match the grid");
        Self { grid, values }
    }

    pub fn from_fn(grid: Arc<LogGrid>, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.nodes().iter().map(|&r| f(r)).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &Arc<LogGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn map(&self, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = self
            .grid
            .nodes()
            .iter()
            .zip(&self.values)
            .map(|(&r, &v)| f(r, v))
            .collect();
        Self::new(self.grid.clone(), values)
    }

    /// Cubic interpolation in `ln r`, on `ln f` where the stencil is positive.
    /// Outside the grid the end behaviour is continued as a power law.
    pub fn eval(&self, r: f64) -> f64 {
        let g = &self.grid;
        let n = g.len();
        let v = &self.values;
        let pos = g.position(r);
        if pos <= 0.0 {
            return extrapolate(v[0], v[1], pos);
        }
        if pos >= (n - 1) as f64 {
            return extrapolate(v[n - 1], v[n - 2], pos - (n - 1) as f64);
        }
        let i = (pos.floor() as usize).clamp(1, n - 3);
        let t = pos - i as f64;
        let stencil = [v[i - 1], v[i], v[i + 1], v[i + 2]];
        if stencil.iter().all(|&y| y > 0.0) {
            lagrange4(stencil.map(f64::ln), t).exp()
        } else {
            lagrange4(stencil, t)
        }
    }

    /// `∫ f d³r`.
    pub fn integral(&self) -> f64 {
        self.grid.volume_integral(&self.values)
    }

    /// Enclosed mass `∫_{|x|<r_i} f` at every node.
    pub fn cumulative_mass(&self) -> Vec<f64> {
        self.grid.cumulative_volume(&self.values)
    }

    /// `∫_{r_i}^∞ 4π s^{power} f(s) ds` at every node.
    pub fn tail_moment(&self, power: i32) -> Vec<f64> {
        let weighted: Vec<f64> = self
            .grid
            .nodes()
            .iter()
            .zip(&self.values)
            .map(|(&r, &f)| FOUR_PI * r.powi(power + 1) * f)
            .collect();
        self.grid.reverse_cumulative(&weighted)
    }

    /// Newton potential `(f * |·|^{-1})(r) = N(r)/r + ∫_r^∞ 4π s f(s) ds`.
    pub fn hartree(&self) -> RadialFunction {
        let inner = self.cumulative_mass();
        let outer = self.tail_moment(1);
        let values = self
            .grid
            .nodes()
            .iter()
            .zip(inner.iter().zip(&outer))
            .map(|(&r, (&n, &t))| n / r + t)
            .collect();
        Self::new(self.grid.clone(), values)
    }

    /// `charge/r − (f * |·|^{-1})(r)`, evaluated through the outer tails so
    /// that the far field keeps full relative precision.
    pub fn screened_potential(&self, charge: f64) -> RadialFunction {
        let total = self.integral();
        let outside_mass = self.tail_moment(2);
        let outer = self.tail_moment(1);
        let values = self
            .grid
            .nodes()
            .iter()
            .zip(outside_mass.iter().zip(&outer))
            .map(|(&r, (&m, &t))| (charge - total + m) / r - t)
            .collect();
        Self::new(self.grid.clone(), values)
    }
}

fn extrapolate(end: f64, next: f64, offset: f64) -> f64 {
    if end > 0.0 && next > 0.0 {
        end * (end / next).powf(offset.abs())
    } else if offset.abs() < 1e-12 {
        end
    } else {
        0.0
    }
}

/// `D(a, b) = ½ ∬ a(x) b(y) / |x − y|`, for functions on the same grid.
pub fn coulomb_energy(a: &RadialFunction, b: &RadialFunction) -> f64 {
    assert!(
        Arc::ptr_eq(a.grid(), b.grid()) || a.grid() == b.grid(),
        "densities must share a grid"
    );
    let potential = b.hartree();
    let product: Vec<f64> = a
        .values()
        .iter()
        .zip(potential.values())
        .map(|(x, y)| x * y)
        .collect();
    0.5 * a.grid().volume_integral(&product)
}

/// Inverse of the normalized enclosed mass of a radial density, for drawing
/// radii distributed like the density.
#[derive(Debug, Clone)]
pub struct RadialSampler {
    radii: Vec<f64>,
    cdf: Vec<f64>,
}

impl RadialSampler {
    pub fn new(density: &RadialFunction) -> Self {
        let mass = density.cumulative_mass();
        let total = *mass.last().expect("grid is non-empty");
        Self {
            radii: density.grid().nodes().to_vec(),
            cdf: mass.iter().map(|m| m / total).collect(),
        }
    }

    /// Radius at cumulative fraction `u ∈ [0, 1)`. Below the first node the
    /// enclosed mass is continued as `r^{3/2}`.
    pub fn sample(&self, u: f64) -> f64 {
        let i = self.cdf.partition_point(|&c| c < u);
        if i == 0 {
            return self.radii[0] * (u / self.cdf[0]).powf(2.0 / 3.0);
        }
        if i >= self.cdf.len() {
            return *self.radii.last().expect("grid is non-empty");
        }
        let (c0, c1) = (self.cdf[i - 1], self.cdf[i]);
        let t = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.0 };
        (self.radii[i - 1].ln() * (1.0 - t) + self.radii[i].ln() * t).exp()
    }
}
