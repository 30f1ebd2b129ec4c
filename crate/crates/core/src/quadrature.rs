//! Quadrature building blocks: fixed Gauss-Legendre panels, adaptive
//! Gauss-Kronrod, and fourth-order rules on uniformly spaced samples.

use std::collections::BinaryHeap;
use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::legendre::GaussLegendre;

use crate::error::{Error, Result};

/// A Gauss-Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussRule {
    pairs: Vec<(f64, f64)>,
}

impl GaussRule {
    pub fn new(order: usize) -> Self {
        let order = NonZeroUsize::new(order.max(1)).expect("order is at least one");
        let mut pairs: Vec<(f64, f64)> = GaussLegendre::new(order).as_node_weight_pairs().to_vec();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        Self { pairs }
    }

    pub fn order(&self) -> usize {
        self.pairs.len()
    }

    /// Nodes and weights mapped onto [a, b].
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        self.pairs
            .iter()
            .map(move |&(x, w)| (mid + half * x, half * w))
    }

    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

/// Shared rules of common orders, built once.
pub fn gauss(order: usize) -> &'static GaussRule {
    static RULES: [OnceLock<GaussRule>; 4] = [
        OnceLock::new(),
        OnceLock::new(),
        OnceLock::new(),
        OnceLock::new(),
    ];
    let slot = match order {
        16 => 0,
        24 => 1,
        32 => 2,
        64 => 3,
        _ => panic!("no shared Gauss rule of order {order}; use GaussRule::new"),
    };
    RULES[slot].get_or_init(|| GaussRule::new(order))
}

const XGK: [f64; 11] = [
    0.995_657_163_025_808_1,
    0.973_906_528_517_171_7,
    0.930_157_491_355_708_2,
    0.865_063_366_688_984_5,
    0.780_817_726_586_416_9,
    0.679_409_568_299_024_4,
    0.562_757_134_668_604_7,
    0.433_395_394_129_247_2,
    0.294_392_862_701_460_2,
    0.148_874_338_981_631_2,
    0.0,
];
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874,
    0.032_558_162_307_964_73,
    0.054_755_896_574_352,
    0.075_039_674_810_919_95,
    0.093_125_454_583_697_6,
    0.109_387_158_802_297_64,
    0.123_491_976_262_065_85,
    0.134_709_217_311_473_33,
    0.142_775_938_577_060_08,
    0.147_739_104_901_338_5,
    0.149_445_554_002_916_9,
];
const WG: [f64; 5] = [
    0.066_671_344_308_688_14,
    0.149_451_349_150_580_6,
    0.219_086_362_515_982_04,
    0.269_266_719_309_996_35,
    0.295_524_224_714_752_87,
];

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral<const N: usize> {
    pub value: [f64; N],
    pub error: f64,
}

/// Tolerances and subdivision budget for [`adaptive`].
#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            abs: 1e-300,
            rel: 1e-10,
            max_intervals: 2000,
        }
    }
}

impl Tolerance {
    pub fn rel(rel: f64) -> Self {
        Self {
            rel,
            ..Self::default()
        }
    }
}

struct Segment<const N: usize> {
    a: f64,
    b: f64,
    value: [f64; N],
    error: f64,
}

impl<const N: usize> PartialEq for Segment<N> {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl<const N: usize> Eq for Segment<N> {}
impl<const N: usize> PartialOrd for Segment<N> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl<const N: usize> Ord for Segment<N> {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod<const N: usize>(f: &mut impl FnMut(f64) -> [f64; N], a: f64, b: f64) -> Segment<N> {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let center = f(mid);
    let mut k = center.map(|v| v * WGK[10]);
    let mut g = [0.0; N];
    for (j, (&x, &w)) in XGK[..10].iter().zip(&WGK[..10]).enumerate() {
        let lo = f(mid - half * x);
        let hi = f(mid + half * x);
        for i in 0..N {
            let pair = lo[i] + hi[i];
            k[i] += w * pair;
            if j % 2 == 1 {
                g[i] += WG[j / 2] * pair;
            }
        }
    }
    let value = k.map(|v| v * half);
    let error = (0..N)
        .map(|i| ((k[i] - g[i]) * half).abs())
        .fold(0.0, f64::max);
    Segment { a, b, value, error }
}

/// Globally adaptive 21-point Gauss-Kronrod integration of a vector-valued
/// integrand over the given breakpoints. The error criterion applies to the
/// largest component.
pub fn adaptive<const N: usize>(
    mut f: impl FnMut(f64) -> [f64; N],
    breakpoints: &[f64],
    tol: Tolerance,
) -> Result<Integral<N>> {
    let mut heap = BinaryHeap::new();
    for w in breakpoints.windows(2) {
        if w[1] > w[0] {
            heap.push(kronrod(&mut f, w[0], w[1]));
        }
    }
    let total = |heap: &BinaryHeap<Segment<N>>| {
        let mut value = [0.0; N];
        let mut error = 0.0;
        for s in heap.iter() {
            for (v, part) in value.iter_mut().zip(&s.value) {
                *v += part;
            }
            error += s.error;
        }
        (value, error)
    };
    let (mut value, mut error) = total(&heap);
    let mut refreshes = 0usize;
    loop {
        let scale = value.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if error <= tol.abs.max(tol.rel * scale) {
            return Ok(Integral { value, error });
        }
        if heap.len() >= tol.max_intervals {
            let (a, b) = heap
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
                    (lo.min(s.a), hi.max(s.b))
                });
            return Err(Error::Quadrature { a, b, error });
        }
        let worst = heap
            .pop()
            .expect("heap is non-empty while error is positive");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            return Err(Error::Quadrature {
                a: worst.a,
                b: worst.b,
                error,
            });
        }
        let left = kronrod(&mut f, worst.a, mid);
        let right = kronrod(&mut f, mid, worst.b);
        for (i, v) in value.iter_mut().enumerate() {
            *v += left.value[i] + right.value[i] - worst.value[i];
        }
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        refreshes += 1;
        if refreshes.is_multiple_of(64) {
            (value, error) = total(&heap);
        }
    }
}

/// Scalar convenience wrapper around [`adaptive`].
pub fn adaptive_scalar(
    mut f: impl FnMut(f64) -> f64,
    breakpoints: &[f64],
    tol: Tolerance,
) -> Result<f64> {
    adaptive(|x| [f(x)], breakpoints, tol).map(|r| r.value[0])
}

/// Running integral of uniformly spaced samples with spacing `h`,
/// fourth-order accurate; entry `i` holds the integral from sample 0 to `i`.
pub fn cumulative_uniform(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len();
    let mut out = vec![0.0; n];
    if n < 2 {
        return out;
    }
    if n < 4 {
        for i in 1..n {
            out[i] = out[i - 1] + 0.5 * h * (values[i - 1] + values[i]);
        }
        return out;
    }
    let f = values;
    for i in 0..n - 1 {
        let piece = if i == 0 {
            9.0 * f[0] + 19.0 * f[1] - 5.0 * f[2] + f[3]
        } else if i == n - 2 {
            f[n - 4] - 5.0 * f[n - 3] + 19.0 * f[n - 2] + 9.0 * f[n - 1]
        } else {
            -f[i - 1] + 13.0 * f[i] + 13.0 * f[i + 1] - f[i + 2]
        };
        out[i + 1] = out[i] + h * piece / 24.0;
    }
    out
}

/// Contribution beyond the first sample of an integrand behaving as a power
/// law `F ~ e^{alpha t}` in the uniform variable `t`, estimated from the first
/// two samples. Zero unless the integrand is clearly decaying outward.
pub fn power_law_head(f0: f64, f1: f64, h: f64) -> f64 {
    if f0 > 0.0 && f1 > 0.0 {
        let alpha = (f1 / f0).ln() / h;
        if alpha > 0.05 {
            return f0 / alpha;
        }
    }
    0.0
}

/// Mirror of [`power_law_head`] for the far end of the samples.
pub fn power_law_tail(f_prev: f64, f_last: f64, h: f64) -> f64 {
    power_law_head(f_last, f_prev, h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gauss_rule_is_exact_for_polynomials() {
        let rule = gauss(16);
        let v = rule.integrate(0.0, 2.0, |x| x.powi(31));
        assert_relative_eq!(v, 2f64.powi(32) / 32.0, max_relative = 1e-13);
    }

    #[test]
    fn adaptive_handles_sqrt_endpoint() {
        let v = adaptive_scalar(|x| x.sqrt(), &[0.0, 1.0], Tolerance::rel(1e-12)).unwrap();
        assert_relative_eq!(v, 2.0 / 3.0, max_relative = 1e-11);
    }

    #[test]
    fn adaptive_handles_log_singularity() {
        let v = adaptive_scalar(|x| x.ln(), &[0.0, 1.0], Tolerance::rel(1e-11)).unwrap();
        assert_relative_eq!(v, -1.0, max_relative = 1e-10);
    }

    #[test]
    fn adaptive_vector_components() {
        let r = adaptive(
            |x| [x.sin(), x.cos()],
            &[0.0, 1.0, 3.0],
            Tolerance::rel(1e-13),
        )
        .unwrap();
        assert_relative_eq!(r.value[0], 1.0 - 3f64.cos(), max_relative = 1e-13);
        assert_relative_eq!(r.value[1], 3f64.sin(), max_relative = 1e-13);
    }

    #[test]
    fn adaptive_reports_budget_exhaustion() {
        let tol = Tolerance {
            abs: 0.0,
            rel: 1e-15,
            max_intervals: 4,
        };
        let err = adaptive_scalar(|x| 1.0 / x.sqrt(), &[0.0, 1.0], tol).unwrap_err();
        assert!(matches!(err, Error::Quadrature { .. }));
    }

    #[test]
    fn cumulative_rule_is_fourth_order() {
        let errs: Vec<f64> = [50usize, 100]
            .iter()
            .map(|&n| {
                let h = 1.0 / n as f64;
                let vals: Vec<f64> = (0..=n).map(|i| (i as f64 * h).exp()).collect();
                let c = cumulative_uniform(&vals, h);
                (c[n] - (1f64.exp() - 1.0)).abs()
            })
            .collect();
        assert!(errs[0] / errs[1] > 14.0, "ratio {}", errs[0] / errs[1]);
    }

    #[test]
    fn power_law_head_recovers_missing_piece() {
        let h = 0.01;
        let alpha = 1.5;
        let f0 = (alpha * -3.0f64).exp();
        let f1 = (alpha * (-3.0 + h)).exp();
        assert_relative_eq!(power_law_head(f0, f1, h), f0 / alpha, max_relative = 1e-12);
        assert_eq!(power_law_head(1.0, 1.0, h), 0.0);
    }
}
