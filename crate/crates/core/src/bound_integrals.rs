//! Error terms of the coherent-state upper bound: the three relativistic
//! correction terms in moment-bound and Monte-Carlo form, their assembly into
//! the total upper bound, and log-log exponent fits.

use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coherent_phase_space::{
    check_delta, kinetic_error_term, phase_space_moment, PhaseSpaceOccupation, ShapeFunction,
};
use crate::error::{ensure_domain, Error, Result};
use crate::quadrature::{adaptive, gauss, Tolerance};
use crate::radial::RadialSampler;
use crate::relativistic_kernels::{w1_raw, w2_raw, DispersionParams};
use crate::tf_atom::{build_atom, TfAtom, TfUniversalSolution};

/// `(f, |x|^{-1} f) = COULOMB_KERNEL ∬ f̂(ξ)* f̂(ξ′) |ξ − ξ′|^{-2}` for the
/// unitary Fourier transform.
pub const COULOMB_KERNEL: f64 = 1.0 / (2.0 * PI * PI);

/// Momentum cutoff for the reduced integrals; the neglected tail is
/// `O(Ξ^{-2} ln Ξ)`.
pub const MOMENTUM_CUTOFF: f64 = 1000.0;

/// Default constant in front of the non-relativistic remainder `Z^{5/2−δ/2}`.
/// Not derived here; reports flag it as a placeholder.
pub const DEFAULT_LIEB_CONSTANT: f64 = 1.0;

/// Default `K` of the envelope `remainder ≤ K Z^{20/9}`.
pub const DEFAULT_ENVELOPE_CONSTANT: f64 = 100.0;

/// `J_w = ∬ |ĝ(η)||ĝ(η′)| w(|η|, |η′|) / |η − η′|² dη dη′` for the weights
/// `1`, `|η| + |η′|` and `|η||η′|`, with `ĝ` the unitary transform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedIntegrals {
    pub one: f64,
    pub sum: f64,
    pub prod: f64,
    /// `J_sum` evaluated with the roles of `η` and `η′` exchanged.
    pub sum_transposed: f64,
    pub cutoff: f64,
}

/// Sign changes of `ĝ` on `(0, upto)`.
pub fn fourier_zeros(shape: &ShapeFunction, upto: f64) -> Result<Vec<f64>> {
    let step = 0.05;
    let mut zeros = Vec::new();
    let mut a = step;
    let mut fa = shape.fourier(a);
    while a < upto {
        let b = (a + step).min(upto);
        let fb = shape.fourier(b);
        if fa.signum() != fb.signum() {
            let mut conv = roots::SimpleConvergency {
                eps: 1e-14,
                max_iter: 200,
            };
            let root = roots::find_root_brent(a, b, |x| shape.fourier(x), &mut conv)
                .map_err(|e| Error::Root(format!("{e:?}")))?;
            zeros.push(root);
        }
        a = b;
        fa = fb;
    }
    Ok(zeros)
}

/// Evaluates the reduced integrals after the exact angular average
/// `∫dω dω′ |η − η′|^{-2} = 8π² ln((r + r′)/|r − r′|) / (r r′)`.
pub fn compute_reduced_integrals(shape: &ShapeFunction, cutoff: f64) -> Result<ReducedIntegrals> {
    ensure_domain(
        cutoff > 10.0 && cutoff.is_finite(),
        "cutoff",
        cutoff,
        "> 10",
    )?;
    let zeros = fourier_zeros(shape, cutoff)?;
    let mut panels = vec![0.0];
    panels.extend(zeros.iter().copied());
    panels.push(cutoff);
    let weight = |r: f64| r * shape.fourier_unitary(r).abs();

    // T_k(r) = ∫ a(r′) r′^k ln((r + r′)/|r − r′|) dr′ for k = 0, 1.
    let inner = |r: f64| -> Result<[f64; 2]> {
        let mut breaks = panels.clone();
        let at = breaks.partition_point(|&b| b < r);
        if breaks.get(at) != Some(&r) {
            breaks.insert(at, r);
        }
        let tol = Tolerance {
            abs: 1e-300,
            rel: 1e-10,
            max_intervals: 20_000,
        };
        let out = adaptive(
            |rp| {
                if rp == r {
                    return [0.0; 2];
                }
                let kernel = ((r + rp) / (r - rp).abs()).ln();
                let a = weight(rp) * kernel;
                [a, a * rp]
            },
            &breaks,
            tol,
        )?;
        Ok(out.value)
    };

    let rule = gauss(24);
    let nodes: Vec<(f64, f64)> = panels
        .windows(2)
        .flat_map(|w| rule.mapped(w[0], w[1]).collect::<Vec<_>>())
        .collect();
    let parts = nodes
        .par_iter()
        .map(|&(r, wq)| {
            let [t0, t1] = inner(r)?;
            let a = wq * weight(r);
            Ok([a * t0, a * (2.0 * r * t0), a * r * t1, a * (2.0 * t1)])
        })
        .collect::<Result<Vec<[f64; 4]>>>()?;
    let sums = parts.iter().fold([0.0; 4], |mut acc, p| {
        for (s, v) in acc.iter_mut().zip(p) {
            *s += v;
        }
        acc
    });
    let scale = 8.0 * PI * PI;
    // J_sum = 2∫a r T₀ = 2∫a T₁ by symmetry of the kernel; both routes are kept.
    let sum_transposed = scale * sums[3];
    Ok(ReducedIntegrals {
        one: scale * sums[0],
        sum: scale * sums[1],
        prod: scale * sums[2],
        sum_transposed,
        cutoff,
    })
}

/// Reduced integrals of the default profile, computed once per process.
pub fn reduced_integrals() -> Result<&'static ReducedIntegrals> {
    static CELL: OnceLock<Result<ReducedIntegrals>> = OnceLock::new();
    CELL.get_or_init(|| compute_reduced_integrals(&ShapeFunction::quartic(), MOMENTUM_CUTOFF))
        .as_ref()
        .map_err(Clone::clone)
}

/// Which error term a report or fit refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TermId {
    Lemma1,
    Lemma2,
    Lemma3,
    KineticError,
    HoleSup,
    TotalUpper,
}

impl TermId {
    pub fn as_str(&self) -> &'static str {
        match self {
            TermId::Lemma1 => "lemma1",
            TermId::Lemma2 => "lemma2",
            TermId::Lemma3 => "lemma3",
            TermId::KineticError => "kinetic_error",
            TermId::HoleSup => "hole_sup",
            TermId::TotalUpper => "total_upper",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    MomentBound,
    MonteCarlo,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::MomentBound => "moment_bound",
            Mode::MonteCarlo => "monte_carlo",
        }
    }
}

/// How a lemma term is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Evaluation {
    MomentBound,
    MonteCarlo { samples: u64, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundTermReport {
    pub term_id: TermId,
    #[serde(rename = "Z")]
    pub z: f64,
    pub delta: f64,
    pub kappa: f64,
    pub value: f64,
    pub mode: Mode,
    pub std_error: f64,
}

/// Shared inputs of the upper-bound terms: the universal TF solution, the
/// profile, its reduced integrals and the unit-charge phase-space moments.
#[derive(Debug, Clone)]
pub struct BoundContext {
    universal: Arc<TfUniversalSolution>,
    shape: ShapeFunction,
    reduced: ReducedIntegrals,
    unit_moments: [f64; 3],
    unit_energy: f64,
    lieb_constant: f64,
}

impl BoundContext {
    pub fn new(universal: Arc<TfUniversalSolution>) -> Result<Self> {
        let unit = build_atom(1.0, universal.clone())?;
        let occ = PhaseSpaceOccupation::new(&unit);
        let unit_moments = [
            phase_space_moment(&occ, 0)?,
            phase_space_moment(&occ, 1)?,
            phase_space_moment(&occ, 2)?,
        ];
        Ok(Self {
            universal,
            shape: ShapeFunction::quartic(),
            reduced: *reduced_integrals()?,
            unit_moments,
            unit_energy: unit.energies().total,
            lieb_constant: DEFAULT_LIEB_CONSTANT,
        })
    }

    pub fn with_lieb_constant(mut self, constant: f64) -> Self {
        self.lieb_constant = constant;
        self
    }

    pub fn universal(&self) -> &Arc<TfUniversalSolution> {
        &self.universal
    }

    pub fn shape(&self) -> &ShapeFunction {
        &self.shape
    }

    pub fn reduced(&self) -> &ReducedIntegrals {
        &self.reduced
    }

    pub fn lieb_constant(&self) -> f64 {
        self.lieb_constant
    }

    /// `M_k(Z) = M_k(1) Z^{(2k+3)/3}` for `k ∈ {0, 1, 2}`.
    pub fn moment(&self, k: usize, z: f64) -> f64 {
        self.unit_moments[k] * z.powf((2 * k + 3) as f64 / 3.0)
    }

    /// `E_TF(Z) = E_TF(1) Z^{7/3}`.
    pub fn tf_energy(&self, z: f64) -> f64 {
        self.unit_energy * z.powf(7.0 / 3.0)
    }

    pub fn atom(&self, z: f64) -> Result<TfAtom> {
        build_atom(z, self.universal.clone())
    }
}

fn check_parameters(z: f64, delta: f64, kappa: f64) -> Result<DispersionParams> {
    check_delta(delta)?;
    DispersionParams::for_atom(z, kappa)
}

/// Summands of the moment bounds, each already multiplied by `Z COULOMB_KERNEL`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentParts {
    /// `Z^{3δ}`, `Z^{2δ+2/3}`, `Z^{δ+4/3}` summands of the first term.
    pub lemma1: [f64; 3],
    /// `Z^{3δ}`, `Z^{2δ+2/3}`, `Z^{δ+4/3}`, `Z^{1+2δ}`, `Z^{δ+5/3}` summands of
    /// the second term.
    pub lemma2: [f64; 5],
}

/// Exponents of the five summands of the second term.
pub fn lemma2_part_exponents(delta: f64) -> [f64; 5] {
    [
        3.0 * delta,
        2.0 * delta + 2.0 / 3.0,
        delta + 4.0 / 3.0,
        1.0 + 2.0 * delta,
        delta + 5.0 / 3.0,
    ]
}

pub fn moment_parts(ctx: &BoundContext, z: f64, delta: f64, kappa: f64) -> Result<MomentParts> {
    let params = check_parameters(z, delta, kappa)?;
    let c = params.c();
    let radius = z.powf(-delta);
    let j = &ctx.reduced;
    let m = [ctx.moment(0, z), ctx.moment(1, z), ctx.moment(2, z)];
    let pre = z * COULOMB_KERNEL / (c * c * radius.powi(3));
    let base = [
        j.prod * m[0],
        radius * j.sum * m[1],
        radius * radius * j.one * m[2],
    ];
    Ok(MomentParts {
        lemma1: base.map(|b| 0.5 * pre * b),
        lemma2: [
            1.5 * pre * base[0],
            1.5 * pre * base[1],
            1.5 * pre * base[2],
            pre * c * radius * j.sum * m[0],
            pre * 2.0 * c * radius * radius * j.one * m[1],
        ],
    })
}

/// Sample mean and its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
}

/// Monte-Carlo estimates of `∫dΩ A ∬ w |F̂_α(ξ)||F̂_α(ξ′)| / |ξ − ξ′|²` for
/// `w = w1`, `w = w2` and their sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McReduced {
    pub w1: Estimate,
    pub w2: Estimate,
    pub combined: Estimate,
    pub samples: u64,
}

const MC_CHUNK: u64 = 1 << 14;
/// Scale of the half-Cauchy proposals for `|η|` and `|η′ − η|`.
const PROPOSAL_SCALE: f64 = 3.0;

fn half_cauchy(rng: &mut impl Rng) -> (f64, f64) {
    let a = PROPOSAL_SCALE;
    let x = a * (0.5 * PI * rng.random::<f64>()).tan();
    let pdf = 2.0 * a / (PI * (a * a + x * x));
    (x, pdf)
}

fn unit_vector(rng: &mut impl Rng) -> [f64; 3] {
    let cos = 2.0 * rng.random::<f64>() - 1.0;
    let sin = (1.0 - cos * cos).max(0.0).sqrt();
    let phi = 2.0 * PI * rng.random::<f64>();
    [sin * phi.cos(), sin * phi.sin(), cos]
}

fn norm(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

#[derive(Default, Clone, Copy)]
struct Moments {
    sum: [f64; 3],
    sum_sq: [f64; 3],
}

impl Moments {
    fn push(&mut self, x: [f64; 3]) {
        for ((sum, sum_sq), v) in self.sum.iter_mut().zip(&mut self.sum_sq).zip(x) {
            *sum += v;
            *sum_sq += v * v;
        }
    }

    fn merge(mut self, other: &Moments) -> Moments {
        for i in 0..3 {
            self.sum[i] += other.sum[i];
            self.sum_sq[i] += other.sum_sq[i];
        }
        self
    }

    fn estimate(&self, i: usize, n: u64, scale: f64) -> Estimate {
        let n = n as f64;
        let mean = self.sum[i] / n;
        let var = (self.sum_sq[i] / n - mean * mean).max(0.0);
        Estimate {
            mean: scale * mean,
            std_error: scale * (var / (n - 1.0).max(1.0)).sqrt(),
        }
    }
}

/// Samples `(q, p)` uniformly from the occupied phase space, `η` and the
/// offset `η′ − η` from half-Cauchy radial proposals with isotropic
/// directions. The `|η − η′|^{-2}` singularity cancels against the polar
/// volume element around `η`. Chunks use independent ChaCha streams and are
/// reduced in order, so the result depends only on `seed` and `samples`.
pub fn monte_carlo_reduced(
    ctx: &BoundContext,
    z: f64,
    delta: f64,
    kappa: f64,
    samples: u64,
    seed: u64,
) -> Result<McReduced> {
    let params = check_parameters(z, delta, kappa)?;
    ensure_domain(samples >= 2, "mc_samples", samples as f64, "at least 2")?;
    let c = params.c();
    let radius = z.powf(-delta);
    let atom = ctx.atom(z)?;
    let occ = PhaseSpaceOccupation::new(&atom);
    let sampler = RadialSampler::new(atom.density());
    let shape = ctx.shape;
    let chunks = samples.div_ceil(MC_CHUNK);

    let totals = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            rng.set_stream(chunk);
            let count = MC_CHUNK.min(samples - chunk * MC_CHUNK);
            let mut acc = Moments::default();
            for _ in 0..count {
                let q = sampler.sample(rng.random::<f64>());
                let p_len = occ.fermi_momentum(q) * rng.random::<f64>().cbrt();
                let p = unit_vector(&mut rng).map(|x| x * p_len);
                let (eta_len, eta_pdf) = half_cauchy(&mut rng);
                let eta = unit_vector(&mut rng).map(|x| x * eta_len);
                let eta_weight =
                    4.0 * PI * eta_len * eta_len * shape.fourier_unitary(eta_len).abs() / eta_pdf;
                let (offset, offset_pdf) = half_cauchy(&mut rng);
                let dir = unit_vector(&mut rng);
                let eta2 = [0, 1, 2].map(|i| eta[i] + offset * dir[i]);
                let offset_weight = 4.0 * PI * shape.fourier_unitary(norm(eta2)).abs() / offset_pdf;
                let xi = norm([0, 1, 2].map(|i| p[i] + eta[i] / radius));
                let xi2 = norm([0, 1, 2].map(|i| p[i] + eta2[i] / radius));
                let base = eta_weight * offset_weight / radius;
                let w1 = w1_raw(xi, xi2, c);
                let w2 = w2_raw(xi, xi2, c);
                acc.push([base * w1, base * w2, base * (w1 + w2)]);
            }
            acc
        })
        .collect::<Vec<_>>()
        .iter()
        .fold(Moments::default(), |a, b| a.merge(b));
    let m0 = ctx.moment(0, z);
    Ok(McReduced {
        w1: totals.estimate(0, samples, m0),
        w2: totals.estimate(1, samples, m0),
        combined: totals.estimate(2, samples, m0),
        samples,
    })
}

/// Inverse of the decreasing Fermi momentum, `q*(P)` with `p_F(q*) = P`,
/// interpolated log-log between grid nodes.
struct FermiRadius {
    ln_r: Vec<f64>,
    ln_pf: Vec<f64>,
}

impl FermiRadius {
    fn new(atom: &TfAtom) -> Self {
        let occ = PhaseSpaceOccupation::new(atom);
        let (ln_r, ln_pf) = atom
            .grid()
            .nodes()
            .iter()
            .map(|&r| (r.ln(), occ.fermi_momentum(r)))
            .take_while(|&(_, pf)| pf > 0.0)
            .map(|(lr, pf)| (lr, pf.ln()))
            .unzip();
        Self { ln_r, ln_pf }
    }

    fn radius(&self, p: f64) -> f64 {
        let lp = p.ln();
        let last = self.ln_pf.len() - 1;
        if lp >= self.ln_pf[0] {
            // p_F ∝ q^{-1/2} at the nucleus.
            return (self.ln_r[0] - 2.0 * (lp - self.ln_pf[0])).exp();
        }
        if lp <= self.ln_pf[last] {
            return self.ln_r[last].exp();
        }
        let i = self.ln_pf.partition_point(|&v| v > lp);
        let t = (self.ln_pf[i - 1] - lp) / (self.ln_pf[i - 1] - self.ln_pf[i]);
        (self.ln_r[i - 1] + t * (self.ln_r[i] - self.ln_r[i - 1])).exp()
    }
}

const HALTON_BASES: [u8; 6] = [2, 3, 5, 7, 11, 13];

/// Second route to [`monte_carlo_reduced`]: a randomized Halton rule in six
/// dimensions. `|p|` is drawn from its exact marginal on the occupied phase
/// space, `p` is fixed along the third axis and `η` in the plane of the first
/// and third axes; `|p|`, `|η|` and the offset `|η′ − η|` use rational maps
/// `a u/(1 − u)`. Each replicate applies an independent Cranley-Patterson
/// shift, and the spread over replicates gives the standard error.
pub fn quasi_monte_carlo_reduced(
    ctx: &BoundContext,
    z: f64,
    delta: f64,
    kappa: f64,
    points: usize,
    replicates: usize,
    seed: u64,
) -> Result<McReduced> {
    let params = check_parameters(z, delta, kappa)?;
    ensure_domain(points >= 1, "points", points as f64, "at least 1")?;
    ensure_domain(
        replicates >= 2,
        "replicates",
        replicates as f64,
        "at least 2",
    )?;
    let c = params.c();
    let radius = z.powf(-delta);
    let atom = ctx.atom(z)?;
    let fermi = FermiRadius::new(&atom);
    let shape = ctx.shape;
    let p_scale = z.powf(2.0 / 3.0);
    let eta_scale = 2.0;
    let phase_space = 2.0 * (2.0 * PI).powi(-3) * (4.0 * PI) * (4.0 * PI / 3.0);
    let rational = |u: f64, a: f64| (a * u / (1.0 - u), a / ((1.0 - u) * (1.0 - u)));

    let replicate_means: Vec<[f64; 3]> = (0..replicates)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let shift: [f64; 6] = std::array::from_fn(|_| rng.random::<f64>());
            let mut sum = [0.0; 3];
            for i in 1..=points {
                let u: [f64; 6] = std::array::from_fn(|d| {
                    (halton::number(HALTON_BASES[d], i) + shift[d]).fract()
                });
                let (p_len, jp) = rational(u[0], p_scale);
                let marginal = phase_space * p_len * p_len * fermi.radius(p_len).powi(3);
                let (eta_len, je) = rational(u[1], eta_scale);
                let cos_eta = 2.0 * u[2] - 1.0;
                let sin_eta = (1.0 - cos_eta * cos_eta).max(0.0).sqrt();
                let eta = [eta_len * sin_eta, 0.0, eta_len * cos_eta];
                let (offset, js) = rational(u[3], eta_scale);
                let cos_w = 2.0 * u[4] - 1.0;
                let sin_w = (1.0 - cos_w * cos_w).max(0.0).sqrt();
                let phi = 2.0 * PI * u[5];
                let eta2 = [
                    eta[0] + offset * sin_w * phi.cos(),
                    eta[1] + offset * sin_w * phi.sin(),
                    eta[2] + offset * cos_w,
                ];
                let weight = marginal
                    * jp
                    * (2.0 * PI * eta_len * eta_len * 2.0 * je)
                    * shape.fourier_unitary(eta_len).abs()
                    * (4.0 * PI * js)
                    * shape.fourier_unitary(norm(eta2)).abs()
                    / radius;
                if weight == 0.0 || !weight.is_finite() {
                    continue;
                }
                let xi = norm([eta[0] / radius, 0.0, p_len + eta[2] / radius]);
                let xi2 = norm([eta2[0] / radius, eta2[1] / radius, p_len + eta2[2] / radius]);
                let w1 = w1_raw(xi, xi2, c);
                let w2 = w2_raw(xi, xi2, c);
                sum[0] += weight * w1;
                sum[1] += weight * w2;
                sum[2] += weight * (w1 + w2);
            }
            sum.map(|s| s / points as f64)
        })
        .collect();
    let estimate = |j: usize| {
        let n = replicates as f64;
        let mean = replicate_means.iter().map(|m| m[j]).sum::<f64>() / n;
        let var = replicate_means
            .iter()
            .map(|m| (m[j] - mean).powi(2))
            .sum::<f64>()
            / (n - 1.0);
        Estimate {
            mean,
            std_error: (var / n).sqrt(),
        }
    };
    Ok(McReduced {
        w1: estimate(0),
        w2: estimate(1),
        combined: estimate(2),
        samples: (points * replicates) as u64,
    })
}

fn report(
    term_id: TermId,
    z: f64,
    delta: f64,
    kappa: f64,
    mode: Mode,
    value: f64,
    se: f64,
) -> BoundTermReport {
    BoundTermReport {
        term_id,
        z,
        delta,
        kappa,
        value,
        mode,
        std_error: se,
    }
}

/// Expectation of the small-component Coulomb part, `Z tr(φ₂γ)`.
pub fn lemma1_term(
    ctx: &BoundContext,
    z: f64,
    delta: f64,
    kappa: f64,
    evaluation: Evaluation,
) -> Result<BoundTermReport> {
    lemma_term(ctx, TermId::Lemma1, z, delta, kappa, evaluation)
}

/// Deviation of the large-component Coulomb part, `|Z tr[(|·|^{-1} − φ₁)γ]|`.
pub fn lemma2_term(
    ctx: &BoundContext,
    z: f64,
    delta: f64,
    kappa: f64,
    evaluation: Evaluation,
) -> Result<BoundTermReport> {
    lemma_term(ctx, TermId::Lemma2, z, delta, kappa, evaluation)
}

/// Change of the direct Coulomb energy under the spinor embedding.
pub fn lemma3_term(
    ctx: &BoundContext,
    z: f64,
    delta: f64,
    kappa: f64,
    evaluation: Evaluation,
) -> Result<BoundTermReport> {
    lemma_term(ctx, TermId::Lemma3, z, delta, kappa, evaluation)
}

/// `√(2/π) Z` from the Fourier bound on the potential of the summed
/// densities (total charge `2Z`), times the `(2π)^{-3/2}` of the unitary
/// convolution. Equal to `Z COULOMB_KERNEL`.
fn direct_term_prefactor(z: f64) -> f64 {
    (2.0 / PI).sqrt() * z * (2.0 * PI).powf(-1.5)
}

fn lemma_term(
    ctx: &BoundContext,
    term: TermId,
    z: f64,
    delta: f64,
    kappa: f64,
    evaluation: Evaluation,
) -> Result<BoundTermReport> {
    match evaluation {
        Evaluation::MomentBound => {
            let parts = moment_parts(ctx, z, delta, kappa)?;
            let l1: f64 = parts.lemma1.iter().sum();
            let l2: f64 = parts.lemma2.iter().sum();
            let value = match term {
                TermId::Lemma1 => l1,
                TermId::Lemma2 => l2,
                TermId::Lemma3 => direct_term_prefactor(z) * (l1 + l2) / (z * COULOMB_KERNEL),
                other => {
                    return Err(Error::Invalid(format!(
                        "{} is not a lemma term",
                        other.as_str()
                    )))
                }
            };
            Ok(report(term, z, delta, kappa, Mode::MomentBound, value, 0.0))
        }
        Evaluation::MonteCarlo { samples, seed } => {
            let mc = monte_carlo_reduced(ctx, z, delta, kappa, samples, seed)?;
            let (scale, est) = match term {
                TermId::Lemma1 => (z * COULOMB_KERNEL, mc.w2),
                TermId::Lemma2 => (z * COULOMB_KERNEL, mc.w1),
                TermId::Lemma3 => (direct_term_prefactor(z), mc.combined),
                other => {
                    return Err(Error::Invalid(format!(
                        "{} is not a lemma term",
                        other.as_str()
                    )))
                }
            };
            Ok(report(
                term,
                z,
                delta,
                kappa,
                Mode::MonteCarlo,
                scale * est.mean,
                scale * est.std_error,
            ))
        }
    }
}

/// All pieces of the assembled upper bound at one parameter point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpperBound {
    #[serde(rename = "Z")]
    pub z: f64,
    pub delta: f64,
    pub kappa: f64,
    pub e_tf: f64,
    pub kinetic_error: f64,
    pub lemma1: f64,
    pub lemma2: f64,
    pub lemma3: f64,
    /// `C Z^{5/2−δ/2}` with a placeholder constant `C`.
    pub lieb_remainder: f64,
    pub lieb_constant: f64,
    pub total: f64,
    /// `total − E_TF`.
    pub remainder: f64,
}

impl UpperBound {
    pub fn report(&self) -> BoundTermReport {
        report(
            TermId::TotalUpper,
            self.z,
            self.delta,
            self.kappa,
            Mode::MomentBound,
            self.total,
            0.0,
        )
    }

    /// `remainder / Z^{20/9}`.
    pub fn envelope_ratio(&self) -> f64 {
        self.remainder / self.z.powf(20.0 / 9.0)
    }

    pub fn within_envelope(&self, constant: f64) -> bool {
        self.envelope_ratio() <= constant
    }
}

/// `E_TF + kinetic error + three relativistic terms + C Z^{5/2−δ/2}`, all in
/// moment-bound form.
pub fn upper_bound_total(ctx: &BoundContext, z: f64, kappa: f64, delta: f64) -> Result<UpperBound> {
    let parts = moment_parts(ctx, z, delta, kappa)?;
    let lemma1: f64 = parts.lemma1.iter().sum();
    let lemma2: f64 = parts.lemma2.iter().sum();
    let lemma3 = direct_term_prefactor(z) * (lemma1 + lemma2) / (z * COULOMB_KERNEL);
    let kinetic_error = kinetic_error_term(z, &ctx.shape, delta)?;
    let lieb_remainder = ctx.lieb_constant * z.powf(2.5 - 0.5 * delta);
    let e_tf = ctx.tf_energy(z);
    let remainder = kinetic_error + lemma1 + lemma2 + lemma3 + lieb_remainder;
    Ok(UpperBound {
        z,
        delta,
        kappa,
        e_tf,
        kinetic_error,
        lemma1,
        lemma2,
        lemma3,
        lieb_remainder,
        lieb_constant: ctx.lieb_constant,
        total: e_tf + remainder,
        remainder,
    })
}

/// Least-squares line through `(ln x, ln y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub prefactor: f64,
    /// Largest `|ln y − fitted|`.
    pub max_residual: f64,
}

pub fn fit_exponent(points: &[(f64, f64)]) -> Result<PowerLawFit> {
    if points.len() < 3 {
        return Err(Error::Invalid(format!(
            "an exponent fit needs at least 3 points, got {}",
            points.len()
        )));
    }
    for &(x, y) in points {
        ensure_domain(x > 0.0 && x.is_finite(), "abscissa", x, "positive")?;
        ensure_domain(y > 0.0 && y.is_finite(), "value", y, "positive")?;
    }
    let n = points.len() as f64;
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    ensure_domain(sxx > 0.0, "abscissa spread", sxx, "positive")?;
    let exponent = sxy / sxx;
    let intercept = my - exponent * mx;
    let max_residual = logs
        .iter()
        .map(|p| (p.1 - intercept - exponent * p.0).abs())
        .fold(0.0, f64::max);
    Ok(PowerLawFit {
        exponent,
        prefactor: intercept.exp(),
        max_residual,
    })
}

/// A fitted scaling exponent next to the claimed one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub term_id: String,
    pub z_grid: Vec<f64>,
    pub values: Vec<f64>,
    pub fitted_exponent: f64,
    pub claimed_exponent: f64,
    pub max_residual: f64,
}

impl ScalingFit {
    /// Requires a strictly increasing grid of at least 3 points spanning at
    /// least two decades.
    pub fn new(
        term_id: impl Into<String>,
        z_grid: Vec<f64>,
        values: Vec<f64>,
        claimed_exponent: f64,
    ) -> Result<Self> {
        check_z_grid(&z_grid, 2.0)?;
        if z_grid.len() != values.len() {
            return Err(Error::Invalid("z_grid and values differ in length".into()));
        }
        let points: Vec<(f64, f64)> = z_grid.iter().copied().zip(values.iter().copied()).collect();
        let fit = fit_exponent(&points)?;
        Ok(Self {
            term_id: term_id.into(),
            z_grid,
            values,
            fitted_exponent: fit.exponent,
            claimed_exponent,
            max_residual: fit.max_residual,
        })
    }

    pub fn deviation(&self) -> f64 {
        (self.fitted_exponent - self.claimed_exponent).abs()
    }
}

pub(crate) fn check_z_grid(z_grid: &[f64], decades: f64) -> Result<()> {
    if z_grid.len() < 3 {
        return Err(Error::Invalid(format!(
            "Z grid needs at least 3 points, got {}",
            z_grid.len()
        )));
    }
    if z_grid.windows(2).any(|w| w[1] <= w[0]) || z_grid[0] <= 0.0 {
        return Err(Error::Invalid(
            "Z grid must be positive and strictly increasing".into(),
        ));
    }
    let span = (z_grid[z_grid.len() - 1] / z_grid[0]).log10();
    if span < decades - 1e-12 {
        return Err(Error::Invalid(format!(
            "Z grid spans {span:.3} decades, at least {decades} required"
        )));
    }
    Ok(())
}

/// Moment-bound fits of the three relativistic terms and the kinetic error.
pub fn lemma_scaling_fits(
    ctx: &BoundContext,
    z_grid: &[f64],
    delta: f64,
    kappa: f64,
) -> Result<Vec<ScalingFit>> {
    let reports = z_grid
        .iter()
        .map(|&z| {
            let parts = moment_parts(ctx, z, delta, kappa)?;
            let kinetic = kinetic_error_term(z, &ctx.shape, delta)?;
            Ok((parts, kinetic))
        })
        .collect::<Result<Vec<_>>>()?;
    let zs = z_grid.to_vec();
    let l1: Vec<f64> = reports.iter().map(|(p, _)| p.lemma1.iter().sum()).collect();
    let l2: Vec<f64> = reports.iter().map(|(p, _)| p.lemma2.iter().sum()).collect();
    let l3: Vec<f64> = zs
        .iter()
        .zip(l1.iter().zip(&l2))
        .map(|(&z, (a, b))| direct_term_prefactor(z) * (a + b) / (z * COULOMB_KERNEL))
        .collect();
    let kinetic: Vec<f64> = reports.iter().map(|(_, k)| *k).collect();
    let mut fits = vec![
        ScalingFit::new("lemma1", zs.clone(), l1, 4.0 / 3.0 + delta)?,
        ScalingFit::new("lemma2", zs.clone(), l2, 5.0 / 3.0 + delta)?,
        ScalingFit::new("lemma3", zs.clone(), l3, 5.0 / 3.0 + delta)?,
        ScalingFit::new("kinetic_error", zs.clone(), kinetic, 1.0 + 2.0 * delta)?,
    ];
    for (i, exponent) in lemma2_part_exponents(delta).iter().enumerate() {
        let values = reports.iter().map(|(p, _)| p.lemma2[i]).collect();
        fits.push(ScalingFit::new(
            format!("lemma2.part{}", i + 1),
            zs.clone(),
            values,
            *exponent,
        )?);
    }
    Ok(fits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tf_atom::solve_universal_tf;
    use approx::assert_relative_eq;

    fn context() -> &'static BoundContext {
        static CTX: OnceLock<BoundContext> = OnceLock::new();
        CTX.get_or_init(|| {
            let universal = Arc::new(solve_universal_tf(1e-8).unwrap());
            BoundContext::new(universal).unwrap()
        })
    }

    #[test]
    fn reduced_integrals_are_symmetric_and_positive() {
        let j = reduced_integrals().unwrap();
        assert!(j.one > 0.0 && j.sum > 0.0 && j.prod > 0.0);
        assert_relative_eq!(j.sum, j.sum_transposed, max_relative = 1e-6);
    }

    #[test]
    fn reduced_integrals_converge_in_cutoff() {
        let shape = ShapeFunction::quartic();
        let coarse = compute_reduced_integrals(&shape, 300.0).unwrap();
        let fine = reduced_integrals().unwrap();
        for (a, b) in [
            (coarse.one, fine.one),
            (coarse.sum, fine.sum),
            (coarse.prod, fine.prod),
        ] {
            assert_relative_eq!(a, b, max_relative = 1e-3);
        }
    }

    #[test]
    fn zeros_of_the_profile_transform() {
        let zeros = fourier_zeros(&ShapeFunction::quartic(), 60.0).unwrap();
        // Zeros approach the roots of tan ξ = ξ/6 + O(ξ^{-1}), one per period.
        assert!(zeros.len() >= 17 && zeros.len() <= 20, "{}", zeros.len());
        for w in zeros.windows(2) {
            assert!((w[1] - w[0] - PI).abs() < 1.0);
        }
    }

    #[test]
    fn lemma3_is_sum_of_kernel_parts() {
        let ctx = context();
        let (z, delta, kappa) = (100.0, 5.0 / 9.0, 0.5);
        let l1 = lemma1_term(ctx, z, delta, kappa, Evaluation::MomentBound)
            .unwrap()
            .value;
        let l2 = lemma2_term(ctx, z, delta, kappa, Evaluation::MomentBound)
            .unwrap()
            .value;
        let l3 = lemma3_term(ctx, z, delta, kappa, Evaluation::MomentBound)
            .unwrap()
            .value;
        let reduced = (l1 + l2) / (z * COULOMB_KERNEL) * (2.0 * PI).powf(-1.5);
        assert_relative_eq!(l3, (2.0 / PI).sqrt() * z * reduced, max_relative = 1e-14);
        assert_relative_eq!(l3, l1 + l2, max_relative = 1e-14);
    }

    #[test]
    fn moment_bounds_grow_with_kappa() {
        let ctx = context();
        let mut prev = [0.0; 2];
        for kappa in [0.1, 0.3, 0.5, 0.7, 0.9] {
            let a = lemma1_term(ctx, 1e3, 0.5, kappa, Evaluation::MomentBound)
                .unwrap()
                .value;
            let b = lemma2_term(ctx, 1e3, 0.5, kappa, Evaluation::MomentBound)
                .unwrap()
                .value;
            assert!(a > prev[0] && b > prev[1]);
            prev = [a, b];
        }
    }

    #[test]
    fn small_kappa_removes_the_relativistic_terms() {
        let ctx = context();
        let big = lemma2_term(ctx, 100.0, 0.5, 0.5, Evaluation::MomentBound)
            .unwrap()
            .value;
        let small = lemma2_term(ctx, 100.0, 0.5, 1e-6, Evaluation::MomentBound)
            .unwrap()
            .value;
        assert!(small < 1e-5 * big);
    }

    #[test]
    fn partial_exponents_are_exact() {
        let ctx = context();
        let fits = lemma_scaling_fits(ctx, &[10.0, 100.0, 1e3, 1e4], 5.0 / 9.0, 0.5).unwrap();
        for fit in fits.iter().filter(|f| f.term_id.starts_with("lemma2.part")) {
            assert!(fit.deviation() < 1e-9, "{fit:?}");
        }
        let kinetic = fits.iter().find(|f| f.term_id == "kinetic_error").unwrap();
        assert_relative_eq!(kinetic.fitted_exponent, 19.0 / 9.0, max_relative = 1e-12);
    }

    #[test]
    fn lemma1_is_small_against_tf_energy() {
        let ctx = context();
        let l1 = lemma1_term(ctx, 1e4, 5.0 / 9.0, 0.5, Evaluation::MomentBound)
            .unwrap()
            .value;
        assert!(l1 / ctx.tf_energy(1e4).abs() < 0.1);
        let l1_small = lemma1_term(ctx, 10.0, 5.0 / 9.0, 0.5, Evaluation::MomentBound)
            .unwrap()
            .value;
        assert!(l1 / ctx.tf_energy(1e4).abs() < l1_small / ctx.tf_energy(10.0).abs());
    }

    #[test]
    fn monte_carlo_is_dominated_by_moment_bound() {
        let ctx = context();
        for term in [TermId::Lemma1, TermId::Lemma2, TermId::Lemma3] {
            let bound =
                lemma_term(ctx, term, 10.0, 5.0 / 9.0, 0.5, Evaluation::MomentBound).unwrap();
            let mc = lemma_term(
                ctx,
                term,
                10.0,
                5.0 / 9.0,
                0.5,
                Evaluation::MonteCarlo {
                    samples: 100_000,
                    seed: 7,
                },
            )
            .unwrap();
            assert!(mc.value > 0.0);
            assert!(
                mc.value <= bound.value + 3.0 * mc.std_error,
                "{mc:?} vs {bound:?}"
            );
        }
    }

    #[test]
    fn monte_carlo_is_reproducible() {
        let ctx = context();
        let a = monte_carlo_reduced(ctx, 10.0, 0.5, 0.5, 40_000, 3).unwrap();
        let b = monte_carlo_reduced(ctx, 10.0, 0.5, 0.5, 40_000, 3).unwrap();
        assert_eq!(a, b);
        let c = monte_carlo_reduced(ctx, 10.0, 0.5, 0.5, 40_000, 4).unwrap();
        assert_ne!(a.w1.mean, c.w1.mean);
    }

    #[test]
    fn fit_exponent_examples() {
        let a = 1.7;
        let exact: Vec<(f64, f64)> = [10.0, 100.0, 1e3, 1e4]
            .iter()
            .map(|&x: &f64| (x, x.powf(a)))
            .collect();
        assert!((fit_exponent(&exact).unwrap().exponent - a).abs() < 1e-12);
        let quad: Vec<(f64, f64)> = [100.0, 1e3, 1e4]
            .iter()
            .map(|&x: &f64| (x, x * x + x))
            .collect();
        let slope = fit_exponent(&quad).unwrap().exponent;
        assert!(slope > 1.99 && slope < 2.0, "{slope}");
        let flat = [(1.0, 3.0), (10.0, 3.0), (100.0, 3.0)];
        assert!(fit_exponent(&flat).unwrap().exponent.abs() < 1e-15);
        assert!(fit_exponent(&[(1.0, 1.0), (2.0, -1.0), (3.0, 1.0)]).is_err());
        assert!(fit_exponent(&[(1.0, 1.0), (2.0, 1.0)]).is_err());
    }

    #[test]
    fn scaling_fit_grid_rules() {
        assert!(ScalingFit::new("x", vec![1.0, 10.0, 50.0], vec![1.0; 3], 0.0).is_err());
        assert!(ScalingFit::new("x", vec![1.0, 1.0, 100.0], vec![1.0; 3], 0.0).is_err());
        assert!(ScalingFit::new("x", vec![1.0, 10.0, 100.0], vec![1.0; 3], 0.0).is_ok());
    }

    #[test]
    fn upper_bound_assembly() {
        let ctx = context();
        let ub = upper_bound_total(ctx, 1.0, 0.5, 5.0 / 9.0).unwrap();
        assert!(ub.total.is_finite() && ub.e_tf < 0.0);
        let ub = upper_bound_total(ctx, 1e3, 0.5, 5.0 / 9.0).unwrap();
        let sum =
            ub.e_tf + ub.kinetic_error + ub.lemma1 + ub.lemma2 + ub.lemma3 + ub.lieb_remainder;
        assert_relative_eq!(ub.total, sum, max_relative = 1e-14);
        assert!(ub.within_envelope(DEFAULT_ENVELOPE_CONSTANT));
    }

    #[test]
    fn rejects_bad_parameters() {
        let ctx = context();
        assert!(lemma1_term(ctx, 10.0, 0.2, 0.5, Evaluation::MomentBound).is_err());
        assert!(lemma1_term(ctx, 10.0, 0.5, 0.95, Evaluation::MomentBound).is_err());
        assert!(lemma1_term(ctx, -1.0, 0.5, 0.5, Evaluation::MomentBound).is_err());
    }
}
