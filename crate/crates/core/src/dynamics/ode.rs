//! Adaptive Dormand-Prince 5(4) integrator with dense output.
//!
//! Fifth-order solution with an embedded fourth-order error estimate,
//! FSAL, and the standard quartic interpolant on every accepted step, so
//! trajectories can be sampled continuously after the fact.

use crate::error::{Error, Result};

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];

const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
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

/// Difference between the fifth- and fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Interpolant weights for the fifth-order dense output.
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

#[derive(Debug, Clone)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: Option<f64>,
    pub h_max: Option<f64>,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            rtol: 1e-9,
            atol: 1e-12,
            h_init: None,
            h_max: None,
            max_steps: 20_000_000,
        }
    }
}

/// Interpolant coefficients of one accepted step.
#[derive(Debug, Clone)]
pub struct DenseSegment {
    pub t0: f64,
    pub h: f64,
    /// Five stacked coefficient vectors of the state dimension.
    cont: Vec<f64>,
}

impl DenseSegment {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        let dim = out.len();
        let theta = ((t - self.t0) / self.h).clamp(0.0, 1.0);
        let om = 1.0 - theta;
        for i in 0..dim {
            let c0 = self.cont[i];
            let c1 = self.cont[dim + i];
            let c2 = self.cont[2 * dim + i];
            let c3 = self.cont[3 * dim + i];
            let c4 = self.cont[4 * dim + i];
            out[i] = c0 + theta * (c1 + om * (c2 + theta * (c3 + om * c4)));
        }
    }
}

#[derive(Debug, Clone)]
pub struct OdeSolution {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub segments: Vec<DenseSegment>,
    pub n_eval: usize,
    pub n_accepted: usize,
    pub n_rejected: usize,
}

impl OdeSolution {
    pub fn dim(&self) -> usize {
        self.states[0].len()
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("solution has at least one state")
    }

    /// Continuous evaluation anywhere inside the integration span.
    pub fn eval(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.eval_into(t, &mut out);
        out
    }

    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        if self.segments.is_empty() || t <= self.times[0] {
            out.copy_from_slice(&self.states[0]);
            return;
        }
        let idx = match self
            .segments
            .binary_search_by(|s| s.t0.partial_cmp(&t).expect("finite times"))
        {
            Ok(i) => i,
            Err(0) => 0,
            Err(i) => i - 1,
        };
        let seg = &self.segments[idx.min(self.segments.len() - 1)];
        if t >= seg.t1() {
            out.copy_from_slice(self.final_state());
            return;
        }
        seg.eval_into(t, out);
    }
}

fn error_norm(err: &[f64], y0: &[f64], y1: &[f64], rtol: f64, atol: f64) -> f64 {
    let n = err.len() as f64;
    let sum: f64 = err
        .iter()
        .zip(y0.iter().zip(y1))
        .map(|(&e, (&a, &b))| {
            let sk = atol + rtol * a.abs().max(b.abs());
            (e / sk) * (e / sk)
        })
        .sum();
    (sum / n).sqrt()
}

fn initial_step<F: FnMut(f64, &[f64], &mut [f64])>(
    f: &mut F,
    t0: f64,
    y0: &[f64],
    f0: &[f64],
    span: f64,
    rtol: f64,
    atol: f64,
) -> f64 {
    let dim = y0.len() as f64;
    let sk = |y: f64| atol + rtol * y.abs();
    let d0 = (y0.iter().map(|&v| (v / sk(v)).powi(2)).sum::<f64>() / dim).sqrt();
    let d1 = (y0
        .iter()
        .zip(f0)
        .map(|(&y, &fv)| (fv / sk(y)).powi(2))
        .sum::<f64>()
        / dim)
        .sqrt();
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    let h0 = h0.min(span);
    let y1: Vec<f64> = y0.iter().zip(f0).map(|(&y, &fv)| y + h0 * fv).collect();
    let mut f1 = vec![0.0; y0.len()];
    f(t0 + h0, &y1, &mut f1);
    let d2 = (f1
        .iter()
        .zip(f0.iter().zip(y0))
        .map(|(&b, (&a, &y))| ((b - a) / sk(y)).powi(2))
        .sum::<f64>()
        / dim)
        .sqrt()
        / h0;
    let d_max = d1.max(d2);
    let h1 = if d_max <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d_max).powf(0.2)
    };
    (100.0 * h0).min(h1).min(span)
}

/// Integrate `dy/dt = f(t, y)` from `t0` to `t_end > t0`, recording every
/// accepted step and its interpolant.
pub fn solve<F: FnMut(f64, &[f64], &mut [f64])>(
    mut f: F,
    t0: f64,
    t_end: f64,
    y0: &[f64],
    opts: &OdeOptions,
) -> Result<OdeSolution> {
    let dim = y0.len();
    let span = t_end - t0;
    let mut times = vec![t0];
    let mut states = vec![y0.to_vec()];
    let mut segments = Vec::new();
    let mut n_eval = 0usize;
    let mut n_accepted = 0usize;
    let mut n_rejected = 0usize;

    if span <= 0.0 {
        return Ok(OdeSolution { times, states, segments, n_eval, n_accepted, n_rejected });
    }

    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k1 = vec![0.0; dim];
    f(t, &y, &mut k1);
    n_eval += 1;

    let h_cap = opts.h_max.unwrap_or(span).min(span);
    let mut h = opts
        .h_init
        .unwrap_or_else(|| initial_step(&mut f, t, &y, &k1, span, opts.rtol, opts.atol))
        .min(h_cap);
    n_eval += usize::from(opts.h_init.is_none());

    let mut ks = vec![vec![0.0; dim]; 7];
    let mut y_stage = vec![0.0; dim];
    let mut y_next = vec![0.0; dim];
    let mut err = vec![0.0; dim];
    let mut facmax = 10.0;

    for _ in 0..opts.max_steps {
        if t >= t_end {
            break;
        }
        let h_min = 1e-14 * t.abs().max(1.0);
        if h < h_min {
            return Err(Error::StepSizeUnderflow { t, h });
        }
        if t + h > t_end {
            h = t_end - t;
        }

        ks[0].copy_from_slice(&k1);
        for s in 1..7 {
            for i in 0..dim {
                let mut acc = 0.0;
                for (j, kj) in ks.iter().enumerate().take(s) {
                    let a = A[s - 1][j];
                    if a != 0.0 {
                        acc += a * kj[i];
                    }
                }
                y_stage[i] = y[i] + h * acc;
            }
            let (head, tail) = ks.split_at_mut(s);
            let _ = head;
            f(t + C[s] * h, &y_stage, &mut tail[0]);
            n_eval += 1;
            if s == 6 {
                y_next.copy_from_slice(&y_stage);
            }
        }

        for i in 0..dim {
            let mut acc = 0.0;
            for (j, kj) in ks.iter().enumerate() {
                if E[j] != 0.0 {
                    acc += E[j] * kj[i];
                }
            }
            err[i] = h * acc;
        }
        let mut en = error_norm(&err, &y, &y_next, opts.rtol, opts.atol);
        if !en.is_finite() || y_next.iter().any(|v| !v.is_finite()) {
            en = f64::INFINITY;
        }

        if en <= 1.0 {
            // dense coefficients for this step
            let mut cont = vec![0.0; 5 * dim];
            for i in 0..dim {
                let delta = y_next[i] - y[i];
                let bspl = h * ks[0][i] - delta;
                cont[i] = y[i];
                cont[dim + i] = delta;
                cont[2 * dim + i] = bspl;
                cont[3 * dim + i] = delta - h * ks[6][i] - bspl;
                let mut acc = 0.0;
                for (j, kj) in ks.iter().enumerate() {
                    if D[j] != 0.0 {
                        acc += D[j] * kj[i];
                    }
                }
                cont[4 * dim + i] = h * acc;
            }
            segments.push(DenseSegment { t0: t, h, cont });

            t += h;
            y.copy_from_slice(&y_next);
            k1.copy_from_slice(&ks[6]); // FSAL
            times.push(t);
            states.push(y.clone());
            n_accepted += 1;

            let fac = if en == 0.0 {
                facmax
            } else {
                (0.9 * en.powf(-0.2)).clamp(0.2, facmax)
            };
            h = (h * fac).min(h_cap);
            facmax = 10.0;
        } else {
            n_rejected += 1;
            let fac = if en.is_finite() {
                (0.9 * en.powf(-0.2)).clamp(0.2, 1.0)
            } else {
                0.2
            };
            h *= fac;
            facmax = 1.0;
        }
    }

    if t < t_end {
        return Err(Error::StepSizeUnderflow { t, h });
    }
    Ok(OdeSolution { times, states, segments, n_eval, n_accepted, n_rejected })
}
