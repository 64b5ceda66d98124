//! Dormand–Prince 5(4) integrator with continuous (dense) output.

use crate::error::Result;

#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub initial_step: Option<f64>,
    pub max_step: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            rtol: 1e-9,
            atol: 1e-12,
            initial_step: None,
            max_step: f64::INFINITY,
            max_steps: 2_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepControl {
    Continue,
    Stop,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Termination {
    Completed,
    /// The step callback asked to stop.
    Stopped,
    StepSizeUnderflow { t: f64, step: f64 },
    TooManySteps { t: f64 },
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

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
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Piecewise quartic interpolant over the accepted steps.
#[derive(Debug, Clone)]
pub struct DenseSolution {
    dim: usize,
    starts: Vec<f64>,
    widths: Vec<f64>,
    // five coefficient blocks of length `dim` per step
    coeffs: Vec<f64>,
}

impl DenseSolution {
    fn new(dim: usize) -> Self {
        DenseSolution {
            dim,
            starts: Vec::new(),
            widths: Vec::new(),
            coeffs: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.starts.is_empty()
    }

    pub fn t_start(&self) -> f64 {
        self.starts.first().copied().unwrap_or(f64::NAN)
    }

    pub fn t_end(&self) -> f64 {
        match (self.starts.last(), self.widths.last()) {
            (Some(t), Some(h)) => t + h,
            _ => f64::NAN,
        }
    }

    /// Step boundaries: start of the first step followed by every step end.
    pub fn knots(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.starts.len() + 1);
        if let Some(&t0) = self.starts.first() {
            out.push(t0);
        }
        for (t, h) in self.starts.iter().zip(&self.widths) {
            out.push(t + h);
        }
        out
    }

    /// Writes the interpolated state at `t` into `out`; false outside the span.
    pub fn eval_into(&self, t: f64, out: &mut [f64]) -> bool {
        if self.is_empty() || !(t >= self.t_start() && t <= self.t_end()) {
            return false;
        }
        let k = match self.starts.binary_search_by(|x| x.total_cmp(&t)) {
            Ok(k) => k,
            Err(k) => k - 1,
        };
        let theta = (t - self.starts[k]) / self.widths[k];
        let theta1 = 1.0 - theta;
        let base = 5 * self.dim * k;
        let d = self.dim;
        for i in 0..d {
            let r = |j: usize| self.coeffs[base + j * d + i];
            out[i] = r(0) + theta * (r(1) + theta1 * (r(2) + theta * (r(3) + theta1 * r(4))));
        }
        true
    }

    pub fn eval(&self, t: f64) -> Option<Vec<f64>> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(t, &mut out).then_some(out)
    }
}

#[derive(Debug, Clone)]
pub struct OdeSolution {
    pub t: Vec<f64>,
    pub y: Vec<Vec<f64>>,
    pub dense: DenseSolution,
    pub termination: Termination,
}

impl OdeSolution {
    pub fn last_time(&self) -> f64 {
        *self.t.last().unwrap()
    }
}

fn error_norm(y0: &[f64], y1: &[f64], err: &[f64], opts: &OdeOptions) -> f64 {
    let mut acc = 0.0;
    for i in 0..y0.len() {
        let scale = opts.atol + opts.rtol * y0[i].abs().max(y1[i].abs());
        let r = err[i] / scale;
        acc += r * r;
    }
    let norm = (acc / y0.len().max(1) as f64).sqrt();
    if norm.is_finite() {
        norm
    } else {
        f64::INFINITY
    }
}

/// Integrates `y' = rhs(t, y)` from `t0` to `t_end > t0`.
///
/// `project` is applied to every accepted state (identity when `None`).
/// `on_step` sees each accepted `(t, y)` and may stop the integration.
/// Step-size underflow and the step limit end the run and are reported in
/// [`OdeSolution::termination`] together with everything computed so far.
pub fn integrate<F>(
    mut rhs: F,
    t0: f64,
    y0: &[f64],
    t_end: f64,
    opts: &OdeOptions,
    mut project: Option<&mut dyn FnMut(&mut [f64])>,
    mut on_step: Option<&mut dyn FnMut(f64, &[f64]) -> StepControl>,
) -> Result<OdeSolution>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    let dim = y0.len();
    let mut y = y0.to_vec();
    if let Some(p) = project.as_mut() {
        p(&mut y);
    }
    let mut sol = OdeSolution {
        t: vec![t0],
        y: vec![y.clone()],
        dense: DenseSolution::new(dim),
        termination: Termination::Completed,
    };
    if t_end <= t0 {
        return Ok(sol);
    }

    let mut k1 = vec![0.0; dim];
    let mut k2 = vec![0.0; dim];
    let mut k3 = vec![0.0; dim];
    let mut k4 = vec![0.0; dim];
    let mut k5 = vec![0.0; dim];
    let mut k6 = vec![0.0; dim];
    let mut k7 = vec![0.0; dim];
    let mut tmp = vec![0.0; dim];
    let mut y_new = vec![0.0; dim];
    let mut err = vec![0.0; dim];

    rhs(t0, &y, &mut k1)?;
    let span = t_end - t0;
    let mut h = match opts.initial_step {
        Some(h) => h,
        None => initial_step(&mut rhs, t0, &y, &k1, opts, &mut tmp, &mut k2)?,
    }
    .min(span)
    .min(opts.max_step);
    let mut t = t0;
    let mut steps = 0usize;
    let mut last_rejected = false;

    loop {
        if steps >= opts.max_steps {
            sol.termination = Termination::TooManySteps { t };
            return Ok(sol);
        }
        if h < 1e-14 * t.abs().max(1.0) {
            sol.termination = Termination::StepSizeUnderflow { t, step: h };
            return Ok(sol);
        }
        let last = t + h >= t_end;
        if last {
            h = t_end - t;
        }
        steps += 1;

        for i in 0..dim {
            tmp[i] = y[i] + h * A21 * k1[i];
        }
        rhs(t + C2 * h, &tmp, &mut k2)?;
        for i in 0..dim {
            tmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        rhs(t + C3 * h, &tmp, &mut k3)?;
        for i in 0..dim {
            tmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        rhs(t + C4 * h, &tmp, &mut k4)?;
        for i in 0..dim {
            tmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        rhs(t + C5 * h, &tmp, &mut k5)?;
        for i in 0..dim {
            tmp[i] = y[i]
                + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        let t_new = if last { t_end } else { t + h };
        rhs(t_new, &tmp, &mut k6)?;
        for i in 0..dim {
            y_new[i] = y[i]
                + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        rhs(t_new, &y_new, &mut k7)?;
        for i in 0..dim {
            err[i] = h
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        }
        let norm = error_norm(&y, &y_new, &err, opts);

        if norm <= 1.0 {
            // dense output coefficients before y is overwritten
            let base = sol.dense.coeffs.len();
            sol.dense.coeffs.resize(base + 5 * dim, 0.0);
            let c = &mut sol.dense.coeffs[base..];
            for i in 0..dim {
                let dy = y_new[i] - y[i];
                let bspl = h * k1[i] - dy;
                c[i] = y[i];
                c[dim + i] = dy;
                c[2 * dim + i] = bspl;
                c[3 * dim + i] = dy - h * k7[i] - bspl;
                c[4 * dim + i] = h
                    * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
            }
            sol.dense.starts.push(t);
            sol.dense.widths.push(h);

            t = t_new;
            y.copy_from_slice(&y_new);
            if let Some(p) = project.as_mut() {
                p(&mut y);
                rhs(t, &y, &mut k1)?;
            } else {
                k1.copy_from_slice(&k7);
            }
            sol.t.push(t);
            sol.y.push(y.clone());

            if let Some(cb) = on_step.as_mut() {
                if cb(t, &y) == StepControl::Stop {
                    sol.termination = Termination::Stopped;
                    return Ok(sol);
                }
            }
            if last {
                return Ok(sol);
            }
            let mut fac = 0.9 * norm.max(1e-10).powf(-0.2);
            fac = fac.clamp(0.2, 10.0);
            if last_rejected {
                fac = fac.min(1.0);
            }
            h = (h * fac).min(opts.max_step);
            last_rejected = false;
        } else {
            let fac = if norm.is_finite() {
                (0.9 * norm.powf(-0.2)).max(0.2)
            } else {
                0.1
            };
            h *= fac;
            last_rejected = true;
        }
    }
}

fn initial_step<F>(
    rhs: &mut F,
    t0: f64,
    y0: &[f64],
    f0: &[f64],
    opts: &OdeOptions,
    y1: &mut [f64],
    f1: &mut [f64],
) -> Result<f64>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    let dim = y0.len().max(1) as f64;
    let scale = |i: usize| opts.atol + opts.rtol * y0[i].abs();
    let rms = |v: &dyn Fn(usize) -> f64| {
        ((0..y0.len()).map(|i| v(i).powi(2)).sum::<f64>() / dim).sqrt()
    };
    let d0 = rms(&|i| y0[i] / scale(i));
    let d1 = rms(&|i| f0[i] / scale(i));
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    for i in 0..y0.len() {
        y1[i] = y0[i] + h0 * f0[i];
    }
    rhs(t0 + h0, y1, f1)?;
    let d2 = rms(&|i| (f1[i] - f0[i]) / scale(i)) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    Ok((100.0 * h0).min(h1))
}
