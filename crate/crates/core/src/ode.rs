//! Adaptive Dormand–Prince 5(4) integration for systems of matrix ODEs.

use crate::error::{Error, Result};
use crate::linalg::{c64, CMat};

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub atol: f64,
    pub rtol: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions { atol: 1e-10, rtol: 1e-8, max_steps: 2_000_000 }
    }
}

type State = Vec<CMat>;

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// fifth-order minus embedded fourth-order weights
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

fn combine(base: &State, h: f64, coeffs: &[f64], ks: &[State]) -> State {
    let mut out = base.clone();
    for (c, k) in coeffs.iter().zip(ks) {
        if *c == 0.0 {
            continue;
        }
        let s = c64(h * c, 0.0);
        for (o, ki) in out.iter_mut().zip(k) {
            *o += ki * s;
        }
    }
    out
}

fn scaled_error(y: &State, y_new: &State, err: &State, opts: &OdeOptions) -> f64 {
    let mut worst: f64 = 0.0;
    for ((a, b), e) in y.iter().zip(y_new).zip(err) {
        for ((ai, bi), ei) in a.iter().zip(b.iter()).zip(e.iter()) {
            let sc = opts.atol + opts.rtol * ai.norm().max(bi.norm());
            worst = worst.max(ei.norm() / sc);
        }
    }
    worst
}

/// Integrate `y' = rhs(t, y)` from `t = 0` and return the state at each
/// requested time (nondecreasing, nonnegative). `project` is applied to every
/// accepted state, e.g. to restore Hermiticity.
pub fn integrate<F, P>(rhs: F, project: P, y0: State, times: &[f64], opts: &OdeOptions) -> Result<Vec<State>>
where
    F: Fn(f64, &State) -> State,
    P: Fn(&mut State),
{
    if times.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(Error::InvalidArgument("sample times must be finite and nonnegative".into()));
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidArgument("sample times must be nondecreasing".into()));
    }
    let mut out = Vec::with_capacity(times.len());
    let mut t = 0.0;
    let mut y = y0;
    let mut k1 = rhs(t, &y);
    let mut h = initial_step(&y, &k1, opts);
    let mut steps = 0usize;

    for &target in times {
        while t < target {
            if steps >= opts.max_steps {
                return Err(Error::Integration { t, reason: format!("exceeded {} steps", opts.max_steps) });
            }
            let last = t + h >= target;
            let h_try = if last { target - t } else { h };
            let mut ks: Vec<State> = Vec::with_capacity(7);
            ks.push(k1.clone());
            for s in 1..7 {
                let ys = combine(&y, h_try, &A[s][..s], &ks);
                ks.push(rhs(t + C[s] * h_try, &ys));
            }
            let y_new = combine(&y, h_try, &A[6], &ks[..6]);
            let zero: State = y.iter().map(|m| m * c64(0.0, 0.0)).collect();
            let err = combine(&zero, h_try, &E, &ks);
            let en = scaled_error(&y, &y_new, &err, opts);
            steps += 1;
            if !en.is_finite() {
                return Err(Error::Integration { t, reason: "non-finite error estimate".into() });
            }
            if en <= 1.0 {
                t = if last { target } else { t + h_try };
                y = y_new;
                project(&mut y);
                k1 = rhs(t, &y);
            }
            let factor = if en == 0.0 { 5.0 } else { (0.9 * en.powf(-0.2)).clamp(0.2, 5.0) };
            let proposal = h_try * factor;
            // keep the natural step size when the last step was clipped to a sample time
            h = if last && en <= 1.0 { h.max(proposal) } else { proposal };
            if h < 1e-14 * t.max(1.0) {
                return Err(Error::Integration { t, reason: format!("step size underflow (h = {h:.3e})") });
            }
        }
        out.push(y.clone());
    }
    Ok(out)
}

fn initial_step(y: &State, f: &State, opts: &OdeOptions) -> f64 {
    let mut d0: f64 = 0.0;
    let mut d1: f64 = 0.0;
    for (a, b) in y.iter().zip(f) {
        for (ai, bi) in a.iter().zip(b.iter()) {
            let sc = opts.atol + opts.rtol * ai.norm();
            d0 = d0.max(ai.norm() / sc);
            d1 = d1.max(bi.norm() / sc);
        }
    }
    if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        (0.01 * d0 / d1).min(1.0)
    }
}
