//! Two small integrators for planar first-order systems: an adaptive
//! Dormand-Prince 5(4) stepper and a fixed-step three-stage Gauss collocation
//! scheme.

use std::ops::ControlFlow;

use crate::error::{Error, Result};

pub type State = [f64; 2];

/// Adaptive Dormand-Prince 5(4) with mixed absolute/relative error control.
#[derive(Debug, Clone, Copy)]
pub struct Dopri5 {
    pub rtol: f64,
    pub atol: f64,
    pub min_step: f64,
}

impl Default for Dopri5 {
    fn default() -> Self {
        Self {
            rtol: 1e-12,
            atol: 1e-14,
            min_step: 1e-14,
        }
    }
}

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integration state that can be advanced repeatedly in one direction.
pub struct Trajectory<'a, F> {
    method: Dopri5,
    rhs: &'a F,
    pub t: f64,
    pub y: State,
    step: f64,
}

impl Dopri5 {
    pub fn start<'a, F: Fn(f64, &State) -> State>(
        &self,
        rhs: &'a F,
        t0: f64,
        y0: State,
        initial_step: f64,
    ) -> Trajectory<'a, F> {
        Trajectory {
            method: *self,
            rhs,
            t: t0,
            y: y0,
            step: initial_step,
        }
    }
}

impl<F: Fn(f64, &State) -> State> Trajectory<'_, F> {
    /// Advances to `target`, calling `observe` after each accepted step.
    /// Returns `Break` early if the observer asks to stop.
    pub fn advance(
        &mut self,
        target: f64,
        mut observe: impl FnMut(f64, &State) -> ControlFlow<()>,
    ) -> Result<ControlFlow<()>> {
        let dir = (target - self.t).signum();
        if dir == 0.0 {
            return Ok(ControlFlow::Continue(()));
        }
        let m = self.method;
        let f = self.rhs;
        let mut h = self.step.abs() * dir;
        loop {
            let remaining = target - self.t;
            if remaining * dir <= 0.0 {
                return Ok(ControlFlow::Continue(()));
            }
            let h_full = h;
            let last = h.abs() >= remaining.abs();
            if last {
                h = remaining;
            }
            let mut k = [[0.0; 2]; 7];
            k[0] = f(self.t, &self.y);
            for s in 1..7 {
                let mut ys = self.y;
                for (j, kj) in k.iter().enumerate().take(s) {
                    ys[0] += h * A[s][j] * kj[0];
                    ys[1] += h * A[s][j] * kj[1];
                }
                k[s] = f(self.t + C[s] * h, &ys);
            }
            let mut y_new = self.y;
            for (j, kj) in k.iter().enumerate().take(6) {
                y_new[0] += h * A[6][j] * kj[0];
                y_new[1] += h * A[6][j] * kj[1];
            }
            let mut err: f64 = 0.0;
            for i in 0..2 {
                let e: f64 = (0..7).map(|j| E[j] * k[j][i]).sum::<f64>() * h;
                let scale = m.atol + m.rtol * self.y[i].abs().max(y_new[i].abs());
                err = err.max(e.abs() / scale);
            }
            if !err.is_finite() {
                h *= 0.2;
            } else if err <= 1.0 {
                self.t = if last { target } else { self.t + h };
                self.y = y_new;
                let grow = if err == 0.0 {
                    5.0
                } else {
                    (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
                };
                h = if last { h_full } else { h * grow };
                self.step = h.abs();
                if observe(self.t, &self.y).is_break() {
                    return Ok(ControlFlow::Break(()));
                }
                continue;
            } else {
                h *= (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
            }
            if h.abs() < m.min_step * self.t.abs().max(1.0) {
                return Err(Error::StepUnderflow { t: self.t });
            }
        }
    }
}

/// Fixed-step Gauss-Legendre collocation of order six.
#[derive(Debug, Clone, Copy)]
pub struct GaussCollocation {
    pub step: f64,
}

const SQRT15: f64 = 3.872_983_346_207_417;

impl GaussCollocation {
    const NODES: [f64; 3] = [0.5 - SQRT15 / 10.0, 0.5, 0.5 + SQRT15 / 10.0];
    const WEIGHTS: [f64; 3] = [5.0 / 18.0, 4.0 / 9.0, 5.0 / 18.0];
    const MATRIX: [[f64; 3]; 3] = [
        [
            5.0 / 36.0,
            2.0 / 9.0 - SQRT15 / 15.0,
            5.0 / 36.0 - SQRT15 / 30.0,
        ],
        [
            5.0 / 36.0 + SQRT15 / 24.0,
            2.0 / 9.0,
            5.0 / 36.0 - SQRT15 / 24.0,
        ],
        [
            5.0 / 36.0 + SQRT15 / 30.0,
            2.0 / 9.0 + SQRT15 / 15.0,
            5.0 / 36.0,
        ],
    ];

    /// One step from `(t, y)`; the stage equations are solved by fixed-point
    /// iteration, which contracts for the small steps used here.
    pub fn step(&self, f: &impl Fn(f64, &State) -> State, t: f64, y: &State) -> State {
        let h = self.step;
        let mut k = [f(t, y); 3];
        for _ in 0..60 {
            let mut next = [[0.0; 2]; 3];
            for (i, row) in Self::MATRIX.iter().enumerate() {
                let mut ys = *y;
                for (j, a) in row.iter().enumerate() {
                    ys[0] += h * a * k[j][0];
                    ys[1] += h * a * k[j][1];
                }
                next[i] = f(t + Self::NODES[i] * h, &ys);
            }
            let change = (0..3)
                .flat_map(|i| (0..2).map(move |c| (i, c)))
                .map(|(i, c)| (next[i][c] - k[i][c]).abs() / (1e-300 + next[i][c].abs().max(1.0)))
                .fold(0.0, f64::max);
            k = next;
            if change < 1e-16 {
                break;
            }
        }
        let mut out = *y;
        for (w, kj) in Self::WEIGHTS.iter().zip(&k) {
            out[0] += h * w * kj[0];
            out[1] += h * w * kj[1];
        }
        out
    }

    /// Steps from `t0` until `observe` breaks or `t_end` is passed.
    pub fn run(
        &self,
        f: &impl Fn(f64, &State) -> State,
        t0: f64,
        y0: State,
        t_end: f64,
        mut observe: impl FnMut(f64, &State) -> ControlFlow<()>,
    ) -> (f64, State) {
        let mut t = t0;
        let mut y = y0;
        let mut steps = 0u64;
        while t < t_end {
            y = self.step(f, t, &y);
            steps += 1;
            t = t0 + steps as f64 * self.step;
            if observe(t, &y).is_break() {
                break;
            }
        }
        (t, y)
    }
}
