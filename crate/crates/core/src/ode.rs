//! Embedded Dormand-Prince 5(4) integrator with continuous (dense) output,
//! step guards and terminal-event location. The right-hand side may fail
//! (admissibility boundaries); a failed stage evaluation rejects the step and
//! retries with a smaller one until the step size underflows.

use crate::error::Error;
use crate::Result;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = B1 - 5179.0 / 57600.0;
const E3: f64 = B3 - 7571.0 / 16695.0;
const E4: f64 = B4 - 393.0 / 640.0;
const E5: f64 = B5 + 92097.0 / 339200.0;
const E6: f64 = B6 - 187.0 / 2100.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step guess; auto-selected when absent.
    pub h0: Option<f64>,
    pub h_max: Option<f64>,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-12, h0: None, h_max: None, max_steps: 2_000_000 }
    }
}

/// Verdict of a per-step guard.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Guard {
    Accept,
    /// Reject the step and retry with half the size.
    Shrink,
}

/// One accepted step's interpolation data.
#[derive(Debug, Clone)]
pub struct DenseStep {
    pub s0: f64,
    pub h: f64,
    cont: [Vec<f64>; 5],
}

impl DenseStep {
    /// State at `s` inside this step.
    pub fn eval(&self, s: f64) -> Vec<f64> {
        let theta = (s - self.s0) / self.h;
        let th1 = 1.0 - theta;
        let n = self.cont[0].len();
        let mut out = vec![0.0; n];
        for i in 0..n {
            out[i] = self.cont[0][i]
                + theta
                    * (self.cont[1][i]
                        + th1 * (self.cont[2][i] + theta * (self.cont[3][i] + th1 * self.cont[4][i])));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Termination {
    /// Integrated through the full span.
    Reached,
    /// A terminal event fired at the reported parameter value.
    Event(f64),
}

/// Accepted nodes plus the dense-output data between them.
#[derive(Debug, Clone)]
pub struct OdeSolution {
    pub s: Vec<f64>,
    pub y: Vec<Vec<f64>>,
    pub dense: Vec<DenseStep>,
    pub n_accepted: usize,
    pub n_rejected: usize,
    pub termination: Termination,
}

impl OdeSolution {
    pub fn last(&self) -> (&f64, &[f64]) {
        (self.s.last().unwrap(), self.y.last().unwrap())
    }

    /// Interpolated state anywhere inside the integrated span.
    pub fn sample(&self, s: f64) -> Vec<f64> {
        let forward = self.s.last().unwrap() >= self.s.first().unwrap();
        if self.dense.is_empty() {
            return self.y[0].clone();
        }
        let idx = if forward {
            match self.s.binary_search_by(|v| v.total_cmp(&s)) {
                Ok(i) => i.min(self.dense.len() - 1).max(1) - 1,
                Err(i) => i.clamp(1, self.dense.len()) - 1,
            }
        } else {
            match self.s.binary_search_by(|v| s.total_cmp(v)) {
                Ok(i) => i.min(self.dense.len() - 1).max(1) - 1,
                Err(i) => i.clamp(1, self.dense.len()) - 1,
            }
        };
        self.dense[idx].eval(s)
    }
}

/// Integrate `dy/ds = f(s, y)` over `span`, optionally vetting accepted
/// steps (`guard`) and stopping at the root of `event` (terminal, any
/// crossing direction).
pub fn integrate<F>(
    mut rhs: F,
    y0: &[f64],
    span: (f64, f64),
    opts: &OdeOptions,
    mut guard: Option<&mut dyn FnMut(f64, &[f64], &[f64]) -> Guard>,
    event: Option<&dyn Fn(f64, &[f64]) -> f64>,
) -> Result<OdeSolution>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    let n = y0.len();
    let (s0, s_end) = span;
    let dir = (s_end - s0).signum();
    if dir == 0.0 {
        return Err(Error::InvalidArgument("empty integration span".into()));
    }
    let span_len = (s_end - s0).abs();
    let h_max = opts.h_max.unwrap_or(span_len).abs();

    let mut y = y0.to_vec();
    let mut s = s0;
    let mut k1 = vec![0.0; n];
    rhs(s, &y, &mut k1)?;

    let mut h = match opts.h0 {
        Some(h0) => h0.abs().min(h_max),
        None => {
            let ynorm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            let fnorm = k1.iter().map(|v| v * v).sum::<f64>().sqrt();
            let guess = if fnorm > 1e-12 {
                0.01 * (opts.atol + opts.rtol * ynorm.max(1.0)) / (opts.rtol.max(1e-14) * fnorm.max(1e-8))
            } else {
                1e-4 * span_len
            };
            guess.clamp(1e-10 * span_len.max(1.0), h_max).min(span_len)
        }
    };

    let mut sol = OdeSolution {
        s: vec![s0],
        y: vec![y.clone()],
        dense: Vec::new(),
        n_accepted: 0,
        n_rejected: 0,
        termination: Termination::Reached,
    };
    let mut ev_prev = event.map(|e| e(s, &y));

    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut k5 = vec![0.0; n];
    let mut k6 = vec![0.0; n];
    let mut k7 = vec![0.0; n];
    let mut ytmp = vec![0.0; n];
    let mut y_next = vec![0.0; n];
    let mut steps = 0usize;

    'outer: loop {
        if (s - s_end) * dir >= 0.0 {
            break;
        }
        steps += 1;
        if steps > opts.max_steps {
            return Err(Error::StepLimit(opts.max_steps));
        }
        let remaining = (s_end - s).abs();
        h = h.min(h_max).min(remaining);
        let hs = h * dir;
        if h < 1e-14 * span_len.max(s.abs()).max(1.0) {
            return Err(Error::StepUnderflow(s));
        }

        // Stage evaluations; a failing stage shrinks the step.
        let stage_result = (|| -> Result<()> {
            for i in 0..n {
                ytmp[i] = y[i] + hs * A21 * k1[i];
            }
            rhs(s + C2 * hs, &ytmp, &mut k2)?;
            for i in 0..n {
                ytmp[i] = y[i] + hs * (A31 * k1[i] + A32 * k2[i]);
            }
            rhs(s + C3 * hs, &ytmp, &mut k3)?;
            for i in 0..n {
                ytmp[i] = y[i] + hs * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
            }
            rhs(s + C4 * hs, &ytmp, &mut k4)?;
            for i in 0..n {
                ytmp[i] = y[i] + hs * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
            }
            rhs(s + C5 * hs, &ytmp, &mut k5)?;
            for i in 0..n {
                ytmp[i] =
                    y[i] + hs * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
            }
            rhs(s + hs, &ytmp, &mut k6)?;
            for i in 0..n {
                y_next[i] =
                    y[i] + hs * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i]);
            }
            rhs(s + hs, &y_next, &mut k7)?;
            Ok(())
        })();

        if let Err(e) = stage_result {
            sol.n_rejected += 1;
            h *= 0.5;
            if h < 1e-14 * span_len.max(1.0) {
                return Err(e);
            }
            continue;
        }

        // Embedded error estimate.
        let mut err = 0.0;
        for i in 0..n {
            let e = hs * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = opts.atol + opts.rtol * y[i].abs().max(y_next[i].abs());
            err += (e / sc) * (e / sc);
        }
        err = (err / n as f64).sqrt();

        if err <= 1.0 {
            if let Some(g) = guard.as_deref_mut() {
                if g(s, &y, &y_next) == Guard::Shrink {
                    sol.n_rejected += 1;
                    h *= 0.5;
                    continue;
                }
            }

            // Dense-output coefficients for this step.
            let mut cont = [
                vec![0.0; n],
                vec![0.0; n],
                vec![0.0; n],
                vec![0.0; n],
                vec![0.0; n],
            ];
            for i in 0..n {
                let ydiff = y_next[i] - y[i];
                let bspl = hs * k1[i] - ydiff;
                cont[0][i] = y[i];
                cont[1][i] = ydiff;
                cont[2][i] = bspl;
                cont[3][i] = ydiff - hs * k7[i] - bspl;
                cont[4][i] = hs
                    * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
            }
            let step = DenseStep { s0: s, h: hs, cont };

            let s_new = s + hs;
            if let (Some(e), Some(prev)) = (event, ev_prev) {
                let ev_new = e(s_new, &y_next);
                if prev == 0.0 || prev * ev_new < 0.0 {
                    // Locate the crossing inside the dense step by bisection.
                    let mut lo = s;
                    let mut hi = s_new;
                    let mut flo = prev;
                    for _ in 0..200 {
                        let mid = 0.5 * (lo + hi);
                        let fm = e(mid, &step.eval(mid));
                        if flo * fm <= 0.0 {
                            hi = mid;
                        } else {
                            lo = mid;
                            flo = fm;
                        }
                        if (hi - lo).abs() <= 1e-14 * s_new.abs().max(1.0) {
                            break;
                        }
                    }
                    let s_root = 0.5 * (lo + hi);
                    let y_root = step.eval(s_root);
                    sol.s.push(s_root);
                    sol.y.push(y_root);
                    sol.dense.push(step);
                    sol.n_accepted += 1;
                    sol.termination = Termination::Event(s_root);
                    break 'outer;
                }
                ev_prev = Some(ev_new);
            }

            s = s_new;
            std::mem::swap(&mut y, &mut y_next);
            std::mem::swap(&mut k1, &mut k7);
            sol.s.push(s);
            sol.y.push(y.clone());
            sol.dense.push(step);
            sol.n_accepted += 1;

            let fac = (0.9 * err.powf(-0.2)).clamp(0.2, 5.0);
            h = (h * fac).min(h_max);
        } else {
            sol.n_rejected += 1;
            let fac = (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
            h *= fac.min(0.9);
        }
    }

    Ok(sol)
}
