//! Simulation of the Hamiltonian system, its Riccati equations and the
//! correspondences between them, with zero and blow-up detection.

use std::io::Write;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::func::ScalarFn;
use crate::linalg::{self, CMat};
use crate::ode::{self, DenseSolution, OdeOptions, OdeSolution, StepControl, Termination};
use crate::quad::{Cumulative, QuadOptions};
use crate::reduction::ScalarSystem2x2;
use crate::system::SystemSpec;

/// Default blow-up threshold for Riccati solutions.
pub const DEFAULT_BLOWUP_NORM: f64 = 1e8;
/// Default zero floor relative to the median of `σ_min` on the window.
pub const DEFAULT_ZERO_FLOOR: f64 = 1e-7;
/// Local minima below this fraction of the median are reported as near events.
pub const NEAR_EVENT_FRACTION: f64 = 1e-3;
/// Sub-samples per accepted step when scanning dense output.
const SCAN_SUBDIVISIONS: usize = 8;
/// Uniform samples used for the reference median of `σ_min`.
const MEDIAN_SAMPLES: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZeroEvent {
    pub t: f64,
    pub sigma_min: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZeroScan {
    /// Refined minima of `σ_min(Φ)` below `floor`.
    pub zeros: Vec<ZeroEvent>,
    /// Refined minima above `floor` but small relative to the window median.
    pub near: Vec<ZeroEvent>,
    pub floor: f64,
}

/// Samples of a solution `(Φ, Ψ)` with derived traces.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub n: usize,
    pub t: Vec<f64>,
    pub phi: Vec<CMat>,
    pub psi: Vec<CMat>,
    pub sigma_min: Vec<f64>,
    pub conjoined_defect: Vec<f64>,
    /// Zero events over the whole span with the default floor.
    pub zeros: Vec<ZeroEvent>,
    pub near_events: Vec<ZeroEvent>,
    dense: DenseSolution,
}

impl Trajectory {
    fn from_solution(n: usize, sol: OdeSolution) -> Trajectory {
        let block = 2 * n * n;
        let mut traj = Trajectory {
            n,
            t: sol.t,
            phi: Vec::new(),
            psi: Vec::new(),
            sigma_min: Vec::new(),
            conjoined_defect: Vec::new(),
            zeros: Vec::new(),
            near_events: Vec::new(),
            dense: sol.dense,
        };
        for y in &sol.y {
            let phi = linalg::from_flat(n, &y[..block]);
            let psi = linalg::from_flat(n, &y[block..]);
            traj.sigma_min.push(linalg::sigma_min(&phi));
            traj.conjoined_defect.push(linalg::conjoined_defect(&phi, &psi));
            traj.phi.push(phi);
            traj.psi.push(psi);
        }
        if traj.t.len() > 1 {
            let scan = detect_zeros(&traj, traj.start(), traj.end(), None);
            traj.zeros = scan.zeros;
            traj.near_events = scan.near;
        }
        traj
    }

    pub fn start(&self) -> f64 {
        self.t[0]
    }

    pub fn end(&self) -> f64 {
        *self.t.last().unwrap()
    }

    /// `(Φ(t), Ψ(t))` from dense output.
    pub fn state_at(&self, t: f64) -> Option<(CMat, CMat)> {
        if self.t.len() == 1 {
            return (t == self.t[0]).then(|| (self.phi[0].clone(), self.psi[0].clone()));
        }
        let y = self.dense.eval(t)?;
        let block = 2 * self.n * self.n;
        Some((linalg::from_flat(self.n, &y[..block]), linalg::from_flat(self.n, &y[block..])))
    }

    pub fn sigma_min_at(&self, t: f64) -> Option<f64> {
        self.state_at(t).map(|(phi, _)| linalg::sigma_min(&phi))
    }

    /// `max_t ‖Φ*Ψ − Ψ*Φ‖_F / (1 + ‖Φ‖_F·‖Ψ‖_F)` over the samples.
    pub fn max_relative_defect(&self) -> f64 {
        self.conjoined_defect
            .iter()
            .zip(self.phi.iter().zip(&self.psi))
            .map(|(d, (phi, psi))| d / (1.0 + phi.norm() * psi.norm()))
            .fold(0.0, f64::max)
    }

    /// Writes one row per sample: `t`, real and imaginary parts of every
    /// `Φ` then `Ψ` entry (row-major), `sigma_min`, `conjoined_defect`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let n = self.n;
        let mut header = vec!["t".to_string()];
        for name in ["phi", "psi"] {
            for i in 1..=n {
                for j in 1..=n {
                    header.push(format!("{name}_{i}{j}_re"));
                    header.push(format!("{name}_{i}{j}_im"));
                }
            }
        }
        header.push("sigma_min".into());
        header.push("conjoined_defect".into());
        w.write_record(&header)?;
        for k in 0..self.t.len() {
            let mut row = vec![self.t[k].to_string()];
            for m in [&self.phi[k], &self.psi[k]] {
                for i in 0..n {
                    for j in 0..n {
                        row.push(m[(i, j)].re.to_string());
                        row.push(m[(i, j)].im.to_string());
                    }
                }
            }
            row.push(self.sigma_min[k].to_string());
            row.push(self.conjoined_defect[k].to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn check_termination(sol: &OdeSolution, limit: usize) -> Result<()> {
    match sol.termination {
        Termination::StepSizeUnderflow { t, step } => Err(Error::StepSizeUnderflow { t, step }),
        Termination::TooManySteps { t } => Err(Error::TooManySteps { t, limit }),
        Termination::Completed | Termination::Stopped => Ok(()),
    }
}

fn check_square(m: &CMat, n: usize, what: &str) -> Result<()> {
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::DimensionMismatch {
            what: what.into(),
            expected: n,
            found: m.nrows(),
        });
    }
    Ok(())
}

/// Integrates the Hamiltonian system from `(Φ₀, Ψ₀)` at `t_start` to `t_end`.
pub fn integrate_hamiltonian(
    sys: &SystemSpec,
    phi0: &CMat,
    psi0: &CMat,
    t_start: f64,
    t_end: f64,
    opts: &OdeOptions,
) -> Result<Trajectory> {
    let n = sys.n();
    check_square(phi0, n, "Φ₀")?;
    check_square(psi0, n, "Ψ₀")?;
    let mut y0 = Vec::with_capacity(4 * n * n);
    linalg::push_flat(phi0, &mut y0);
    linalg::push_flat(psi0, &mut y0);
    let block = 2 * n * n;
    let rhs = |t: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
        let (a, b, c) = sys.eval(t)?;
        let phi = linalg::from_flat(n, &y[..block]);
        let psi = linalg::from_flat(n, &y[block..]);
        let dphi = &a * &phi + &b * &psi;
        let dpsi = &c * &phi - a.adjoint() * &psi;
        linalg::write_flat(&dphi, &mut dy[..block]);
        linalg::write_flat(&dpsi, &mut dy[block..]);
        Ok(())
    };
    let sol = ode::integrate(rhs, t_start, &y0, t_end, opts, None, None)?;
    check_termination(&sol, opts.max_steps)?;
    Ok(Trajectory::from_solution(n, sol))
}

fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    }
}

/// Golden-section minimization of `f` on `[lo, hi]`.
fn golden_section(f: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> (f64, f64) {
    let inv_phi = 0.5 * (5f64.sqrt() - 1.0);
    let tol = 1e-13 * lo.abs().max(hi.abs()).max(1.0);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    let mut best = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
    for x in [lo, hi] {
        let fx = f(x);
        if fx < best.1 {
            best = (x, fx);
        }
    }
    best
}

/// Scan points: step boundaries inside `[a, b]` plus `a` and `b`, each
/// interval split into [`SCAN_SUBDIVISIONS`] pieces.
fn scan_points(knots: &[f64], a: f64, b: f64) -> Vec<f64> {
    let mut coarse = vec![a];
    coarse.extend(knots.iter().copied().filter(|&t| t > a && t < b));
    coarse.push(b);
    let mut out = Vec::with_capacity(coarse.len() * SCAN_SUBDIVISIONS);
    for w in coarse.windows(2) {
        for k in 0..SCAN_SUBDIVISIONS {
            out.push(w[0] + (w[1] - w[0]) * k as f64 / SCAN_SUBDIVISIONS as f64);
        }
    }
    out.push(b);
    out
}

/// Zero events of `det Φ` on `[a, b]`, detected as refined local minima of
/// `σ_min(Φ(t))` on dense output.
///
/// `sigma_floor` defaults to `1e-7 × median σ_min`, the median taken over
/// uniformly spaced times in the window.
pub fn detect_zeros(traj: &Trajectory, a: f64, b: f64, sigma_floor: Option<f64>) -> ZeroScan {
    let a = a.max(traj.start());
    let b = b.min(traj.end());
    let mut scan = ZeroScan {
        zeros: Vec::new(),
        near: Vec::new(),
        floor: sigma_floor.unwrap_or(0.0),
    };
    if !(a < b) || traj.t.len() < 2 {
        return scan;
    }
    let points = scan_points(&traj.dense.knots(), a, b);
    let sigma = |t: f64| traj.sigma_min_at(t.clamp(a, b)).unwrap_or(f64::INFINITY);
    let values: Vec<f64> = points.iter().map(|&t| sigma(t)).collect();
    // uniform in time, so step clustering near a dip does not bias the scale
    let mut uniform: Vec<f64> = (0..=MEDIAN_SAMPLES)
        .map(|k| sigma(a + (b - a) * k as f64 / MEDIAN_SAMPLES as f64))
        .collect();
    let med = median(&mut uniform);
    scan.floor = sigma_floor.unwrap_or(DEFAULT_ZERO_FLOOR * med);
    let near_level = NEAR_EVENT_FRACTION * med;

    let last = points.len() - 1;
    let mut events: Vec<ZeroEvent> = Vec::new();
    for i in 0..=last {
        let left = if i == 0 { f64::INFINITY } else { values[i - 1] };
        let right = if i == last { f64::INFINITY } else { values[i + 1] };
        if !(values[i] <= left && values[i] <= right) {
            continue;
        }
        let lo = points[i.saturating_sub(1)];
        let hi = points[(i + 1).min(last)];
        let (t, s) = golden_section(&sigma, lo, hi);
        let (t, s) = if values[i] < s { (points[i], values[i]) } else { (t, s) };
        events.push(ZeroEvent { t, sigma_min: s });
    }
    // plateaus and shared brackets yield duplicates
    events.sort_by(|x, y| x.t.total_cmp(&y.t));
    let resolution = 1e-9 * a.abs().max(b.abs()).max(1.0);
    let mut merged: Vec<ZeroEvent> = Vec::new();
    for e in events {
        match merged.last_mut() {
            Some(prev) if e.t - prev.t <= resolution => {
                if e.sigma_min < prev.sigma_min {
                    *prev = e;
                }
            }
            _ => merged.push(e),
        }
    }
    for e in merged {
        if e.sigma_min <= scan.floor {
            scan.zeros.push(e);
        } else if e.sigma_min <= near_level {
            scan.near.push(e);
        }
    }
    scan
}

/// Blow-up of a Riccati solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlowUp {
    pub t: f64,
    pub norm: f64,
}

type Evaluator<T> = Arc<dyn Fn(f64) -> Option<T> + Send + Sync>;

/// Samples of a Riccati solution with an evaluator for arbitrary `t`.
#[derive(Clone)]
pub struct RiccatiPath<T> {
    pub t: Vec<f64>,
    pub values: Vec<T>,
    pub blow_up: Option<BlowUp>,
    eval: Evaluator<T>,
}

impl<T: std::fmt::Debug> std::fmt::Debug for RiccatiPath<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RiccatiPath")
            .field("samples", &self.t.len())
            .field("start", &self.t.first())
            .field("end", &self.t.last())
            .field("blow_up", &self.blow_up)
            .finish()
    }
}

impl<T> RiccatiPath<T> {
    pub fn new(t: Vec<f64>, values: Vec<T>, blow_up: Option<BlowUp>, eval: impl Fn(f64) -> Option<T> + Send + Sync + 'static) -> Self {
        RiccatiPath {
            t,
            values,
            blow_up,
            eval: Arc::new(eval),
        }
    }

    pub fn start(&self) -> f64 {
        self.t[0]
    }

    /// Last time at which the solution is known.
    pub fn end(&self) -> f64 {
        *self.t.last().unwrap()
    }

    pub fn at(&self, t: f64) -> Option<T> {
        (self.eval)(t)
    }

    /// Like [`at`](Self::at), with an error outside the known span.
    pub fn try_at(&self, t: f64) -> Result<T> {
        self.at(t).ok_or(Error::OutOfDomain {
            t,
            step: 0.0,
            start: self.start(),
            end: self.end(),
        })
    }
}

impl RiccatiPath<CMat> {
    /// `Z = ΨΦ⁻¹` along `traj` on `[t1, t2]`; fails where `Φ` is singular.
    pub fn from_trajectory(traj: &Trajectory, t1: f64, t2: f64) -> Result<Self> {
        let mut ts = Vec::new();
        let mut values = Vec::new();
        for (k, &t) in traj.t.iter().enumerate() {
            if t < t1 || t > t2 {
                continue;
            }
            ts.push(t);
            values.push(quotient(&traj.phi[k], &traj.psi[k], t)?);
        }
        for t in [t1, t2] {
            if !ts.contains(&t) {
                let (phi, psi) = traj.state_at(t).ok_or(Error::OutOfDomain {
                    t,
                    step: 0.0,
                    start: traj.start(),
                    end: traj.end(),
                })?;
                let z = quotient(&phi, &psi, t)?;
                let k = ts.partition_point(|&s| s < t);
                ts.insert(k, t);
                values.insert(k, z);
            }
        }
        let traj = traj.clone();
        Ok(RiccatiPath::new(ts, values, None, move |t| {
            if t < t1 || t > t2 {
                return None;
            }
            let (phi, psi) = traj.state_at(t)?;
            Some(&psi * linalg::inverse(&phi)?)
        }))
    }
}

fn quotient(phi: &CMat, psi: &CMat, t: f64) -> Result<CMat> {
    if linalg::sigma_min(phi) <= 1e-12 * phi.norm() {
        return Err(Error::InvalidInput(format!("Φ is singular at t = {t}")));
    }
    linalg::inverse(phi)
        .map(|inv| psi * inv)
        .ok_or_else(|| Error::InvalidInput(format!("Φ is singular at t = {t}")))
}

/// Integrates `Z' = −ZBZ − A*Z − ZA + C` from a Hermitian `Z₀`.
///
/// The run stops with a [`BlowUp`] once `‖Z‖_F > blowup_norm` or the step
/// size underflows. `Z` is replaced by its Hermitian part after every step.
pub fn integrate_matrix_riccati(
    sys: &SystemSpec,
    z0: &CMat,
    t_start: f64,
    t_end: f64,
    blowup_norm: f64,
    opts: &OdeOptions,
) -> Result<RiccatiPath<CMat>> {
    let n = sys.n();
    check_square(z0, n, "Z₀")?;
    if !linalg::is_hermitian(z0, 1e-12) {
        return Err(Error::NotHermitian {
            defect: linalg::hermitian_defect(z0),
        });
    }
    let mut y0 = Vec::with_capacity(2 * n * n);
    linalg::push_flat(z0, &mut y0);
    let rhs = |t: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
        let (a, b, c) = sys.eval(t)?;
        let z = linalg::from_flat(n, y);
        let dz = -(&z * &b * &z) - a.adjoint() * &z - &z * &a + c;
        linalg::write_flat(&dz, dy);
        Ok(())
    };
    let mut symmetrize = |y: &mut [f64]| {
        let z = linalg::hermitian_part(&linalg::from_flat(n, y));
        linalg::write_flat(&z, y);
    };
    let mut stop = |_: f64, y: &[f64]| {
        let norm = y.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > blowup_norm || !norm.is_finite() {
            StepControl::Stop
        } else {
            StepControl::Continue
        }
    };
    let sol = ode::integrate(rhs, t_start, &y0, t_end, opts, Some(&mut symmetrize), Some(&mut stop))?;
    let values: Vec<CMat> = sol.y.iter().map(|y| linalg::from_flat(n, y)).collect();
    let blow_up = riccati_blow_up(&sol, opts)?.map(|t| BlowUp {
        t,
        norm: values.last().unwrap().norm(),
    });
    let dense = sol.dense;
    let (start, end) = (sol.t[0], *sol.t.last().unwrap());
    let single = values[0].clone();
    Ok(RiccatiPath::new(sol.t, values, blow_up, move |t| {
        if dense.is_empty() {
            return (t == start).then(|| single.clone());
        }
        if t < start || t > end {
            return None;
        }
        dense.eval(t).map(|y| linalg::from_flat(n, &y))
    }))
}

/// Time of blow-up, if the run ended early.
fn riccati_blow_up(sol: &OdeSolution, opts: &OdeOptions) -> Result<Option<f64>> {
    match sol.termination {
        Termination::Completed => Ok(None),
        Termination::Stopped => Ok(Some(sol.last_time())),
        Termination::StepSizeUnderflow { t, .. } => Ok(Some(t)),
        Termination::TooManySteps { t } => Err(Error::TooManySteps { t, limit: opts.max_steps }),
    }
}

/// Integrates `y' + f·y² + g·y + h = 0` from `y₀`, stopping when
/// `|y| > blowup_norm`.
#[allow(clippy::too_many_arguments)]
pub fn integrate_scalar_riccati(
    f: &ScalarFn,
    g: &ScalarFn,
    h: &ScalarFn,
    y0: f64,
    t_start: f64,
    t_end: f64,
    blowup_norm: f64,
    opts: &OdeOptions,
) -> Result<RiccatiPath<f64>> {
    let rhs = |t: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
        dy[0] = -(f.eval(t)? * y[0] * y[0] + g.eval(t)? * y[0] + h.eval(t)?);
        Ok(())
    };
    let mut stop = |_: f64, y: &[f64]| {
        if y[0].abs() > blowup_norm || !y[0].is_finite() {
            StepControl::Stop
        } else {
            StepControl::Continue
        }
    };
    let sol = ode::integrate(rhs, t_start, &[y0], t_end, opts, None, Some(&mut stop))?;
    let values: Vec<f64> = sol.y.iter().map(|y| y[0]).collect();
    let blow_up = riccati_blow_up(&sol, opts)?.map(|t| BlowUp {
        t,
        norm: values.last().unwrap().abs(),
    });
    let dense = sol.dense;
    let (start, end) = (sol.t[0], *sol.t.last().unwrap());
    Ok(RiccatiPath::new(sol.t, values, blow_up, move |t| {
        if dense.is_empty() {
            return (t == start).then_some(y0);
        }
        if t < start || t > end {
            return None;
        }
        dense.eval(t).map(|y| y[0])
    }))
}

/// `φ` reconstructed from a Riccati solution `y = φ'/φ`.
#[derive(Debug, Clone)]
pub struct SecondOrderTrace {
    pub t: Vec<f64>,
    pub phi: Vec<f64>,
    /// `φ` at any `t` inside the span of the Riccati path.
    pub eval: ScalarFn,
}

/// `φ(t) = φ₁·exp ∫_{t₁}^t y` for a solution `y` of `y' + y² + p·y + q = 0`;
/// `φ` then solves `φ'' + p·φ' + q·φ = 0`. The integral is evaluated by
/// cumulative adaptive quadrature.
pub fn riccati_to_second_order(y: &RiccatiPath<f64>, phi1: f64) -> Result<SecondOrderTrace> {
    if phi1 == 0.0 {
        return Err(Error::InvalidInput("φ(t₁) must be nonzero".into()));
    }
    let path = y.clone();
    let integrand = move |t: f64| path.try_at(t);
    let opts = QuadOptions {
        abs_tol: 1e-11,
        rel_tol: 1e-12,
        ..Default::default()
    };
    let cumulative = Arc::new(Cumulative::build(integrand, y.start(), y.end(), &opts)?);
    let c = cumulative.clone();
    let eval = ScalarFn::new(move |t| Ok(phi1 * c.eval(t)?.exp()));
    let phi = y
        .t
        .iter()
        .map(|&t| Ok(phi1 * cumulative.eval(t)?.exp()))
        .collect::<Result<Vec<_>>>()?;
    Ok(SecondOrderTrace {
        t: y.t.clone(),
        phi,
        eval,
    })
}

/// Solution of the Hamiltonian system from a Riccati solution `Z`:
/// `Φ' = (A + BZ)Φ` with `Φ(t₁) = Φ₁`, and `Ψ = ZΦ`.
///
/// `Ψ` is carried along the integration as `Ψ' = (C − A*Z)Φ`, which keeps
/// `Ψ = ZΦ` exactly when `Z` solves the Riccati equation; the stored
/// samples use `Ψ = ZΦ` directly.
pub fn riccati_to_hamiltonian(
    z: &RiccatiPath<CMat>,
    sys: &SystemSpec,
    phi1: &CMat,
    t1: f64,
    t2: f64,
    opts: &OdeOptions,
) -> Result<Trajectory> {
    let n = sys.n();
    check_square(phi1, n, "Φ₁")?;
    if linalg::inverse(phi1).is_none() {
        return Err(Error::InvalidInput("Φ₁ must be nonsingular".into()));
    }
    let psi1 = z.try_at(t1)? * phi1;
    let mut y0 = Vec::with_capacity(4 * n * n);
    linalg::push_flat(phi1, &mut y0);
    linalg::push_flat(&psi1, &mut y0);
    let block = 2 * n * n;
    let rhs = |t: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
        let (a, b, c) = sys.eval(t)?;
        let zt = z.try_at(t)?;
        let phi = linalg::from_flat(n, &y[..block]);
        let dphi = (&a + &b * &zt) * &phi;
        let dpsi = (c - a.adjoint() * &zt) * &phi;
        linalg::write_flat(&dphi, &mut dy[..block]);
        linalg::write_flat(&dpsi, &mut dy[block..]);
        Ok(())
    };
    let mut sol = ode::integrate(rhs, t1, &y0, t2, opts, None, None)?;
    check_termination(&sol, opts.max_steps)?;
    for (t, y) in sol.t.iter().zip(sol.y.iter_mut()) {
        let phi = linalg::from_flat(n, &y[..block]);
        let psi = z.try_at(*t)? * phi;
        linalg::write_flat(&psi, &mut y[block..]);
    }
    Ok(Trajectory::from_solution(n, sol))
}

/// Solution `(φ, ψ)` of a scalar 2×2 system with the zeros of `φ`.
#[derive(Debug, Clone)]
pub struct ScalarTrajectory {
    pub t: Vec<f64>,
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
    pub zeros: Vec<f64>,
    dense: DenseSolution,
}

impl ScalarTrajectory {
    pub fn state_at(&self, t: f64) -> Option<(f64, f64)> {
        if self.t.len() == 1 {
            return (t == self.t[0]).then(|| (self.phi[0], self.psi[0]));
        }
        self.dense.eval(t).map(|y| (y[0], y[1]))
    }
}

/// Integrates `φ' = p11·φ + p12·ψ`, `ψ' = p21·φ + p22·ψ` and locates the
/// sign changes of `φ`.
pub fn integrate_scalar_system(
    s: &ScalarSystem2x2,
    phi0: f64,
    psi0: f64,
    t_start: f64,
    t_end: f64,
    opts: &OdeOptions,
) -> Result<ScalarTrajectory> {
    let rhs = |t: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
        let [p11, p12, p21, p22] = s.eval(t)?;
        dy[0] = p11 * y[0] + p12 * y[1];
        dy[1] = p21 * y[0] + p22 * y[1];
        Ok(())
    };
    let sol = ode::integrate(rhs, t_start, &[phi0, psi0], t_end, opts, None, None)?;
    check_termination(&sol, opts.max_steps)?;
    let mut out = ScalarTrajectory {
        phi: sol.y.iter().map(|y| y[0]).collect(),
        psi: sol.y.iter().map(|y| y[1]).collect(),
        t: sol.t,
        zeros: Vec::new(),
        dense: sol.dense,
    };
    if out.t.len() > 1 {
        out.zeros = sign_changes(&out, t_start, *out.t.last().unwrap());
    }
    Ok(out)
}

fn sign_changes(traj: &ScalarTrajectory, a: f64, b: f64) -> Vec<f64> {
    let points = scan_points(&traj.dense.knots(), a, b);
    let phi = |t: f64| traj.state_at(t).map_or(f64::NAN, |s| s.0);
    let values: Vec<f64> = points.iter().map(|&t| phi(t)).collect();
    let mut zeros: Vec<f64> = Vec::new();
    for i in 0..points.len() {
        if values[i] == 0.0 {
            zeros.push(points[i]);
            continue;
        }
        if i + 1 < points.len() && values[i] * values[i + 1] < 0.0 {
            let (mut lo, mut hi) = (points[i], points[i + 1]);
            let mut f_lo = values[i];
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                let f_mid = phi(mid);
                if f_mid == 0.0 {
                    lo = mid;
                    hi = mid;
                    break;
                }
                if (f_mid < 0.0) == (f_lo < 0.0) {
                    lo = mid;
                    f_lo = f_mid;
                } else {
                    hi = mid;
                }
            }
            zeros.push(0.5 * (lo + hi));
        }
    }
    zeros.dedup();
    zeros
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::func::MatrixFn;
    use crate::linalg::{identity, real, real_diag, zeros};
    use std::f64::consts::{FRAC_PI_2, PI};

    fn harmonic(n: usize) -> SystemSpec {
        SystemSpec::constant(0.0, zeros(n), identity(n), -identity(n))
    }

    #[test]
    fn harmonic_solution_matches_closed_form() {
        let traj = integrate_hamiltonian(&harmonic(2), &identity(2), &zeros(2), 0.0, 10.0, &OdeOptions::default()).unwrap();
        for t in [0.5, 3.3, 9.9] {
            let (phi, psi) = traj.state_at(t).unwrap();
            assert!((phi - identity(2).scale(t.cos())).norm() < 1e-8);
            assert!((psi + identity(2).scale(t.sin())).norm() < 1e-8);
        }
    }

    #[test]
    fn zero_coefficients_keep_initial_data() {
        let sys = SystemSpec::constant(0.0, zeros(2), zeros(2), zeros(2));
        let phi0 = real(2, &[1.0, 2.0, 3.0, 4.0]);
        let psi0 = real(2, &[0.5, 0.0, 0.0, 0.5]);
        let traj = integrate_hamiltonian(&sys, &phi0, &psi0, 0.0, 5.0, &OdeOptions::default()).unwrap();
        let (phi, psi) = traj.state_at(5.0).unwrap();
        assert_eq!(phi, phi0);
        assert_eq!(psi, psi0);
    }

    #[test]
    fn scalar_growth_from_constant_a() {
        let alpha = 0.3;
        let sys = SystemSpec::constant(1.0, identity(2).scale(alpha), zeros(2), zeros(2));
        let traj = integrate_hamiltonian(&sys, &identity(2), &zeros(2), 1.0, 4.0, &OdeOptions::default()).unwrap();
        let (phi, _) = traj.state_at(4.0).unwrap();
        assert!((phi - identity(2).scale((alpha * 3.0f64).exp())).norm() < 1e-8);
    }

    #[test]
    fn harmonic_zeros_on_window() {
        let traj = integrate_hamiltonian(&harmonic(2), &identity(2), &zeros(2), 0.0, 7.0, &OdeOptions::default()).unwrap();
        let scan = detect_zeros(&traj, 0.0, 7.0, None);
        let times: Vec<f64> = scan.zeros.iter().map(|e| e.t).collect();
        assert_eq!(times.len(), 2, "{scan:?}");
        assert!((times[0] - FRAC_PI_2).abs() < 1e-6);
        assert!((times[1] - 3.0 * FRAC_PI_2).abs() < 1e-6);
        assert_eq!(traj.zeros.len(), 2);
    }

    #[test]
    fn constant_phi_has_no_zeros() {
        let sys = SystemSpec::constant(0.0, zeros(2), zeros(2), zeros(2));
        let traj = integrate_hamiltonian(&sys, &identity(2), &zeros(2), 0.0, 3.0, &OdeOptions::default()).unwrap();
        let scan = detect_zeros(&traj, 0.0, 3.0, None);
        assert!(scan.zeros.is_empty() && scan.near.is_empty());
    }

    #[test]
    fn linear_scalar_phi_has_single_zero() {
        // Φ' = Ψ, Ψ' = 0 with Φ(0) = −1, Ψ(0) = 1 gives Φ = t − 1
        let sys = SystemSpec::constant(0.0, zeros(1), identity(1), zeros(1));
        let traj = integrate_hamiltonian(&sys, &real(1, &[-1.0]), &identity(1), 0.0, 2.0, &OdeOptions::default()).unwrap();
        let scan = detect_zeros(&traj, 0.0, 2.0, None);
        assert_eq!(scan.zeros.len(), 1);
        assert!((scan.zeros[0].t - 1.0).abs() < 1e-9);
    }

    #[test]
    fn explicit_floor_and_partially_singular_b() {
        let sys = SystemSpec::constant(0.0, zeros(1), identity(1), -identity(1));
        let traj = integrate_hamiltonian(&sys, &identity(1), &zeros(1), 0.0, 3.0, &OdeOptions::default()).unwrap();
        let scan = detect_zeros(&traj, 0.0, 3.0, Some(1e-12));
        assert_eq!(scan.zeros.len(), 1);
        let lifted = SystemSpec::constant(0.0, zeros(2), real_diag(&[1.0, 0.0]), real_diag(&[-1.0, 0.0]));
        let traj = integrate_hamiltonian(&lifted, &identity(2), &zeros(2), 0.0, 3.0, &OdeOptions::default()).unwrap();
        assert_eq!(detect_zeros(&traj, 0.0, 3.0, None).zeros.len(), 1);
    }

    #[test]
    fn tangential_minimum_is_a_near_event() {
        // Φ = diag(1 + 1e-5 − sin t, 1) dips to 1e-5 at π/2 without vanishing
        let sys = SystemSpec::constant(0.0, zeros(2), zeros(2), zeros(2));
        let traj = integrate_hamiltonian(&sys, &identity(2), &zeros(2), 0.0, 1.0, &OdeOptions::default()).unwrap();
        assert!(detect_zeros(&traj, 0.0, 1.0, None).near.is_empty());
        let sys = SystemSpec::new(
            1,
            0.0,
            MatrixFn::new(|t| Ok(real(1, &[-t.cos() / (1.0 + 1e-5 - t.sin())]))),
            MatrixFn::constant(zeros(1)),
            MatrixFn::constant(zeros(1)),
        );
        let traj = integrate_hamiltonian(&sys, &real(1, &[1.0 + 1e-5]), &zeros(1), 0.0, 3.0, &OdeOptions::default()).unwrap();
        let scan = detect_zeros(&traj, 0.0, 3.0, None);
        assert!(scan.zeros.is_empty());
        assert_eq!(scan.near.len(), 1, "{scan:?}");
        assert!((scan.near[0].t - FRAC_PI_2).abs() < 1e-4);
    }

    #[test]
    fn conjoined_defect_is_conserved() {
        let sys = SystemSpec::new(
            2,
            0.0,
            MatrixFn::new(|t| Ok(real(2, &[0.1 * t.sin(), 0.3, -0.2, 0.0]))),
            MatrixFn::new(|t| Ok(real(2, &[1.0 + 0.5 * t.cos(), 0.2, 0.2, 1.0]))),
            MatrixFn::constant(real(2, &[-2.0, 0.5, 0.5, -1.0])),
        );
        let psi0 = real(2, &[0.3, -1.0, -1.0, 2.0]);
        let traj = integrate_hamiltonian(&sys, &identity(2), &psi0, 0.0, 30.0, &OdeOptions::default()).unwrap();
        assert!(traj.max_relative_defect() < 1e-8);
    }

    #[test]
    fn matrix_riccati_blows_up_like_tangent() {
        let path = integrate_matrix_riccati(&harmonic(1), &zeros(1), 0.0, 3.0, DEFAULT_BLOWUP_NORM, &OdeOptions::default()).unwrap();
        let blow = path.blow_up.unwrap();
        assert!((blow.t - FRAC_PI_2).abs() < 1e-3);
        let z = path.at(1.0).unwrap();
        assert!((z[(0, 0)].re + 1f64.tan()).abs() < 1e-8);
    }

    #[test]
    fn matrix_riccati_trivial_and_hermitian() {
        let sys = SystemSpec::constant(0.0, zeros(2), zeros(2), zeros(2));
        let z0 = real(2, &[1.0, 2.0, 2.0, 3.0]);
        let path = integrate_matrix_riccati(&sys, &z0, 0.0, 2.0, DEFAULT_BLOWUP_NORM, &OdeOptions::default()).unwrap();
        assert!(path.blow_up.is_none());
        assert_eq!(path.at(2.0).unwrap(), z0);
        assert!(integrate_matrix_riccati(&sys, &real(2, &[0.0, 1.0, 0.0, 0.0]), 0.0, 1.0, 1e8, &OdeOptions::default()).is_err());
        // complex Hermitian data stays Hermitian along a coupled run
        let sys = SystemSpec::constant(
            0.0,
            real(2, &[0.0, 1.0, -0.5, 0.2]),
            real(2, &[1.0, 0.3, 0.3, 0.5]),
            real(2, &[-1.0, 0.0, 0.0, -2.0]),
        );
        let mut z0 = real(2, &[0.5, 0.0, 0.0, -0.5]);
        z0[(0, 1)] = num_complex::Complex64::new(0.1, 0.4);
        z0[(1, 0)] = num_complex::Complex64::new(0.1, -0.4);
        let path = integrate_matrix_riccati(&sys, &z0, 0.0, 0.5, 1e8, &OdeOptions::default()).unwrap();
        for z in &path.values {
            assert!(linalg::hermitian_defect(z) <= 1e-8 * (1.0 + z.norm()));
        }
    }

    #[test]
    fn riccati_from_trajectory_satisfies_equation() {
        let sys = SystemSpec::constant(
            0.0,
            real(2, &[0.0, 0.4, 0.0, 0.1]),
            real(2, &[1.0, 0.2, 0.2, 2.0]),
            real(2, &[-1.0, 0.3, 0.3, -0.5]),
        );
        let traj = integrate_hamiltonian(&sys, &identity(2), &zeros(2), 0.0, 0.8, &OdeOptions::default()).unwrap();
        let z = RiccatiPath::from_trajectory(&traj, 0.0, 0.8).unwrap();
        let (a, b, c) = sys.eval(0.4).unwrap();
        let h = 1e-5;
        let dz = (z.at(0.4 + h).unwrap() - z.at(0.4 - h).unwrap()).unscale(2.0 * h);
        let zt = z.at(0.4).unwrap();
        let rhs = -(&zt * &b * &zt) - a.adjoint() * &zt - &zt * &a + c;
        assert!((dz - rhs).norm() < 1e-6);
    }

    #[test]
    fn scalar_riccati_cases() {
        let one = ScalarFn::constant(1.0);
        let zero = ScalarFn::constant(0.0);
        let y = integrate_scalar_riccati(&one, &zero, &one, 0.0, 0.0, 3.0, DEFAULT_BLOWUP_NORM, &OdeOptions::default()).unwrap();
        assert!((y.blow_up.unwrap().t - FRAC_PI_2).abs() < 1e-3);
        let y = integrate_scalar_riccati(&zero, &zero, &zero, 2.5, 0.0, 3.0, DEFAULT_BLOWUP_NORM, &OdeOptions::default()).unwrap();
        assert!(y.blow_up.is_none());
        assert_eq!(y.at(3.0), Some(2.5));
        // f = 0: ζ' + 2ζ + 1 = 0 has ζ = −1/2 + (ζ₀ + 1/2)·e^{−2t}
        let y = integrate_scalar_riccati(&zero, &ScalarFn::constant(2.0), &one, 1.0, 0.0, 2.0, DEFAULT_BLOWUP_NORM, &OdeOptions::default()).unwrap();
        let exact = -0.5 + 1.5 * (-4.0f64).exp();
        assert!((y.at(2.0).unwrap() - exact).abs() < 1e-9);
    }

    #[test]
    fn second_order_reconstruction() {
        let zero = ScalarFn::constant(0.0);
        let y = integrate_scalar_riccati(&zero, &zero, &zero, 0.0, 0.0, 1.0, DEFAULT_BLOWUP_NORM, &OdeOptions::default()).unwrap();
        let phi = riccati_to_second_order(&y, 2.0).unwrap();
        assert!(phi.phi.iter().all(|&v| (v - 2.0).abs() < 1e-14));
        // y = −tan t reconstructs φ = cos t
        let one = ScalarFn::constant(1.0);
        let y = integrate_scalar_riccati(&one, &zero, &one, 0.0, 0.0, 1.5, DEFAULT_BLOWUP_NORM, &OdeOptions::default()).unwrap();
        let phi = riccati_to_second_order(&y, 1.0).unwrap();
        for (t, v) in phi.t.iter().zip(&phi.phi) {
            assert!((v - t.cos()).abs() < 1e-6);
        }
        assert!(riccati_to_second_order(&y, 0.0).is_err());
    }

    #[test]
    fn reconstructed_phi_solves_second_order_equation() {
        // φ'' + p·φ' + q·φ = 0 with p = 0.5 + 0.2t, q = 2 + sin t
        let p = ScalarFn::new(|t| Ok(0.5 + 0.2 * t));
        let q = ScalarFn::new(|t| Ok(2.0 + t.sin()));
        let y = integrate_scalar_riccati(&ScalarFn::constant(1.0), &p, &q, 0.3, 0.0, 0.9, DEFAULT_BLOWUP_NORM, &OdeOptions::default()).unwrap();
        let rec = riccati_to_second_order(&y, 1.0).unwrap();
        let h = 1e-3;
        for t in [0.2, 0.45, 0.7] {
            let f = |s: f64| rec.eval.eval(s).unwrap();
            let d1 = (f(t + h) - f(t - h)) / (2.0 * h);
            let d2 = (f(t + h) - 2.0 * f(t) + f(t - h)) / (h * h);
            let residual = d2 + p.eval(t).unwrap() * d1 + q.eval(t).unwrap() * f(t);
            assert!(residual.abs() < 1e-5, "t = {t}: {residual}");
        }
    }

    #[test]
    fn hamiltonian_from_riccati() {
        let sys = SystemSpec::constant(0.0, zeros(2), zeros(2), zeros(2));
        let z = RiccatiPath::new(vec![0.0, 1.0], vec![zeros(2), zeros(2)], None, |t| (0.0..=1.0).contains(&t).then(|| zeros(2)));
        let phi1 = real(2, &[2.0, 1.0, 0.0, 1.0]);
        let traj = riccati_to_hamiltonian(&z, &sys, &phi1, 0.0, 1.0, &OdeOptions::default()).unwrap();
        let (phi, psi) = traj.state_at(1.0).unwrap();
        assert_eq!(phi, phi1);
        assert_eq!(psi, zeros(2));

        let sys = harmonic(2);
        let z = RiccatiPath::new(vec![0.0, 1.5], vec![zeros(2), identity(2).scale(-(1.5f64).tan())], None, |t: f64| {
            (0.0..=1.5).contains(&t).then(|| identity(2).scale(-t.tan()))
        });
        let traj = riccati_to_hamiltonian(&z, &sys, &identity(2), 0.0, 1.5, &OdeOptions::default()).unwrap();
        for t in [0.3, 1.0, 1.5] {
            let (phi, psi) = traj.state_at(t).unwrap();
            assert!((&phi - identity(2).scale(t.cos())).norm() < 1e-8);
            assert!((psi + identity(2).scale(t.sin())).norm() < 1e-7);
        }
    }

    #[test]
    fn scalar_system_zeros() {
        let s = ScalarSystem2x2::constant(0.0, 1.0, -1.0, 0.0);
        let traj = integrate_scalar_system(&s, 1.0, 0.0, 0.0, 10.0, &OdeOptions::default()).unwrap();
        assert_eq!(traj.zeros.len(), 3);
        for (k, z) in traj.zeros.iter().enumerate() {
            assert!((z - (FRAC_PI_2 + k as f64 * PI)).abs() < 1e-8);
        }
        let s = ScalarSystem2x2::constant(0.0, 0.0, 0.0, 0.0);
        let traj = integrate_scalar_system(&s, 1.0, 0.0, 0.0, 10.0, &OdeOptions::default()).unwrap();
        assert!(traj.zeros.is_empty());
        assert_eq!(traj.state_at(10.0), Some((1.0, 0.0)));
    }

    #[test]
    fn scalar_system_matches_matrix_exponential() {
        // p11 = p22 = 0.3, p12 = 2, p21 = −0.5: exp(tM) = e^{0.3t}·(cos ωt·I + sin ωt/ω·N)
        let s = ScalarSystem2x2::constant(0.3, 2.0, -0.5, 0.3);
        let traj = integrate_scalar_system(&s, 1.0, 0.5, 0.0, 4.0, &OdeOptions::default()).unwrap();
        let omega = 1.0f64;
        let t = 4.0f64;
        let e = (0.3 * t).exp();
        let (c, sn) = ((omega * t).cos(), (omega * t).sin() / omega);
        let phi = e * (c * 1.0 + sn * 2.0 * 0.5);
        let psi = e * (c * 0.5 + sn * -0.5 * 1.0);
        let (p, q) = traj.state_at(4.0).unwrap();
        assert!((p - phi).abs() < 1e-8 && (q - psi).abs() < 1e-8);
    }

    #[test]
    fn trajectory_csv_layout() {
        let traj = integrate_hamiltonian(&harmonic(1), &identity(1), &zeros(1), 0.0, 1.0, &OdeOptions::default()).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t,phi_11_re,phi_11_im,psi_11_re,psi_11_im,sigma_min,conjoined_defect");
        assert_eq!(lines.count(), traj.t.len());
    }
}
