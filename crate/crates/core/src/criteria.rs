//! Sufficient oscillation criteria and the pipelines that feed them.
//!
//! Window criteria compare an integral with `π` and may prove oscillation on
//! the window. Ray criteria need divergent integrals, which a computation can
//! only support with staged evidence; they never return
//! [`Verdict::ProvenOscillatory`]. No criterion ever asserts non-oscillation.

use std::f64::consts::PI;
use std::fmt;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg;
use crate::matfun::{eigen_path, solve_eq12, uniform_grid, DerivativeMethod, Eq12Solution};
use crate::quad::{integrate, Cumulative, QuadOptions};
use crate::reduction::{reduce_thm21, reduce_thm23, Continuity, GuardActivity, ScalarSystem2x2};
use crate::system::SystemSpec;

/// Nonnegativity slack for `p12` and `b_m` at quadrature nodes.
pub const SIGN_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CriterionId {
    Thm21,
    Thm22,
    Thm23,
    Thm24,
    Cor21,
    Cor22,
    Thm32,
    Thm33,
}

impl CriterionId {
    pub const ALL: [CriterionId; 8] = [
        CriterionId::Thm21,
        CriterionId::Thm22,
        CriterionId::Thm23,
        CriterionId::Thm24,
        CriterionId::Cor21,
        CriterionId::Cor22,
        CriterionId::Thm32,
        CriterionId::Thm33,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CriterionId::Thm21 => "thm2.1",
            CriterionId::Thm22 => "thm2.2",
            CriterionId::Thm23 => "thm2.3",
            CriterionId::Thm24 => "thm2.4",
            CriterionId::Cor21 => "cor2.1",
            CriterionId::Cor22 => "cor2.2",
            CriterionId::Thm32 => "thm3.2",
            CriterionId::Thm33 => "thm3.3",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        CriterionId::ALL.into_iter().find(|c| c.as_str() == s)
    }

    /// Whether the criterion works on a finite window (as opposed to a ray).
    pub fn is_window(self) -> bool {
        matches!(self, CriterionId::Thm22 | CriterionId::Thm24 | CriterionId::Cor22 | CriterionId::Thm33)
    }
}

impl fmt::Display for CriterionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for CriterionId {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    ProvenOscillatory,
    DivergenceEvidence,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Window {
    pub a: f64,
    pub b: f64,
}

impl Window {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::InvalidInput(format!("window [{a}, {b}] must satisfy a < b")));
        }
        Ok(Window { a, b })
    }

    pub fn len(&self) -> f64 {
        self.b - self.a
    }
}

/// Where a criterion is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Span {
    Window(Window),
    /// `[t₀, horizon]` standing in for `[t₀, ∞)`.
    Ray { horizon: f64 },
}

impl Span {
    /// Concrete interval for a system starting at `t0`.
    pub fn interval(&self, t0: f64) -> (f64, f64) {
        match *self {
            Span::Window(w) => (w.a, w.b),
            Span::Ray { horizon } => (t0, horizon),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriteriaOptions {
    /// Absolute tolerance of window integrals.
    pub abs_tol: f64,
    /// Relative tolerance of ray integrals.
    pub ray_rel_tol: f64,
    /// Grid samples per span for reductions.
    pub grid: usize,
    /// Checkpoints for staged divergence evidence.
    pub stages: usize,
    /// Both staged integrals must reach this value.
    pub divergence_threshold: f64,
    /// Bound on adjacent jumps of `χ_j` per unit grid step.
    pub continuity_factor: f64,
    pub derivative: DerivativeMethod,
}

impl Default for CriteriaOptions {
    fn default() -> Self {
        CriteriaOptions {
            abs_tol: 1e-9,
            ray_rel_tol: 1e-10,
            grid: 2048,
            stages: 8,
            divergence_threshold: 10.0,
            continuity_factor: crate::reduction::DEFAULT_CONTINUITY_FACTOR,
            derivative: DerivativeMethod::default(),
        }
    }
}

impl CriteriaOptions {
    fn window_quad(&self) -> QuadOptions {
        QuadOptions {
            abs_tol: self.abs_tol,
            rel_tol: 0.0,
            max_panels: 4000,
            initial_panels: 4,
        }
    }

    fn ray_quad(&self) -> QuadOptions {
        QuadOptions {
            abs_tol: self.abs_tol,
            rel_tol: self.ray_rel_tol,
            max_panels: 8000,
            initial_panels: 16,
        }
    }
}

/// Staged values of the two integrals at one checkpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stage {
    pub t: f64,
    pub i1: f64,
    pub i2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Eq12Diagnostics {
    pub samples: usize,
    pub solvable_samples: usize,
    pub max_residual: f64,
    pub first_unsolvable: Option<f64>,
    /// How `F` was chosen.
    pub f: &'static str,
}

impl Eq12Diagnostics {
    fn from(sol: &Eq12Solution) -> Self {
        Eq12Diagnostics {
            samples: sol.grid().len(),
            solvable_samples: sol.solvable_count(),
            max_residual: sol.max_residual(),
            first_unsolvable: sol.first_unsolvable().map(|(t, _)| t),
            f: "pseudoinverse of sqrt(B)",
        }
    }

    pub fn all_solvable(&self) -> bool {
        self.solvable_samples == self.samples
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub span: Option<Span>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub integral: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quadrature_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub stages: Vec<Stage>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_p12: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eq12: Option<Eq12Diagnostics>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub guard_activity: Vec<GuardActivity>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chi_continuity: Option<Continuity>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eigen_continuity_defect: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quadrature_converged: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionReport {
    pub criterion: CriterionId,
    pub j: Option<usize>,
    pub verdict: Verdict,
    /// Integral minus `π` for window criteria; smaller staged integral minus
    /// the divergence threshold for ray criteria.
    pub margin: Option<f64>,
    pub diagnostics: Diagnostics,
}

impl CriterionReport {
    fn inconclusive(criterion: CriterionId, j: Option<usize>, span: Span, reason: String) -> Self {
        CriterionReport {
            criterion,
            j,
            verdict: Verdict::Inconclusive,
            margin: None,
            diagnostics: Diagnostics {
                span: Some(span),
                reason: Some(reason),
                ..Default::default()
            },
        }
    }
}

/// Running minimum shared with evaluation closures.
#[derive(Clone)]
struct Minimum(Arc<Mutex<f64>>);

impl Minimum {
    fn new() -> Self {
        Minimum(Arc::new(Mutex::new(f64::INFINITY)))
    }

    fn record(&self, x: f64) {
        let mut m = self.0.lock().unwrap();
        if x < *m || x.is_nan() {
            *m = x;
        }
    }

    fn get(&self) -> f64 {
        *self.0.lock().unwrap()
    }
}

fn check_p12(min_p12: f64) -> Result<()> {
    if !(min_p12 >= -SIGN_TOLERANCE) {
        return Err(Error::PreconditionFailed(format!("p12 must be nonnegative, found {min_p12:e}")));
    }
    Ok(())
}

/// `∫_a^b min[p12·exp(−∫_a^t E), −p21·exp(∫_a^t E)] dt ≥ π` on a window.
///
/// The verdict is [`Verdict::ProvenOscillatory`] only when the integral
/// exceeds `π` by more than the quadrature error bound.
pub fn check_thm33(s: &ScalarSystem2x2, w: Window, opts: &CriteriaOptions) -> Result<CriterionReport> {
    let quad = opts.window_quad();
    let e_opts = QuadOptions {
        abs_tol: 1e-3 * opts.abs_tol,
        ..quad
    };
    let cum_e = Cumulative::build(|t| s.e(t), w.a, w.b, &e_opts)?;
    let min_p12 = Minimum::new();
    let integrand = |t: f64| -> Result<f64> {
        let [_, p12, p21, _] = s.eval(t)?;
        min_p12.record(p12);
        let ie = cum_e.eval(t)?;
        Ok((p12 * (-ie).exp()).min(-p21 * ie.exp()))
    };
    let q = integrate(integrand, w.a, w.b, &quad)?;
    check_p12(min_p12.get())?;
    // an error δ in ∫E perturbs the integrand by at most a factor e^δ
    let magnitude: f64 = q.panels.iter().map(|p| p.value.abs()).sum();
    let error = q.error + magnitude * cum_e.error().exp_m1();
    Ok(window_report(CriterionId::Thm33, None, w, q.value, error, q.converged, Some(min_p12.get())))
}

fn window_report(
    criterion: CriterionId,
    j: Option<usize>,
    w: Window,
    integral: f64,
    error: f64,
    converged: bool,
    min_p12: Option<f64>,
) -> CriterionReport {
    let margin = integral - PI;
    let verdict = if converged && margin > error {
        Verdict::ProvenOscillatory
    } else {
        Verdict::Inconclusive
    };
    let reason = match verdict {
        Verdict::ProvenOscillatory => None,
        _ if !converged => Some("quadrature did not reach its tolerance".to_string()),
        _ if margin > -error => Some(format!("integral within the error bound {error:.3e} of pi")),
        _ => Some("integral below pi".to_string()),
    };
    CriterionReport {
        criterion,
        j,
        verdict,
        margin: Some(margin),
        diagnostics: Diagnostics {
            span: Some(Span::Window(w)),
            integral: Some(integral),
            quadrature_error: Some(error),
            threshold: Some(PI),
            min_p12,
            reason,
            quadrature_converged: Some(converged),
            ..Default::default()
        },
    }
}

/// Checkpoints `T_k = t₀ + (T − t₀)/2^{stages−k}`, `k = 1..=stages`.
pub fn checkpoints(t0: f64, horizon: f64, stages: usize) -> Vec<f64> {
    let stages = stages.max(1);
    (1..=stages)
        .map(|k| {
            if k == stages {
                horizon
            } else {
                t0 + (horizon - t0) / 2f64.powi((stages - k) as i32)
            }
        })
        .collect()
}

/// Staged evidence that `∫ p12·exp(−∫E)` and `−∫ p21·exp(∫E)` both diverge
/// on `[t₀, horizon]`. Returns at most [`Verdict::DivergenceEvidence`].
pub fn check_thm32(s: &ScalarSystem2x2, t0: f64, horizon: f64, opts: &CriteriaOptions) -> Result<CriterionReport> {
    if !(horizon > t0) {
        return Err(Error::InvalidInput(format!("horizon {horizon} must exceed t0 = {t0}")));
    }
    let quad = opts.ray_quad();
    let e_opts = QuadOptions {
        abs_tol: 1e-3 * opts.abs_tol,
        ..quad
    };
    let cum_e = Arc::new(Cumulative::build(|t| s.e(t), t0, horizon, &e_opts)?);
    let min_p12 = Minimum::new();
    let (e1, m1) = (cum_e.clone(), min_p12.clone());
    let i1 = Cumulative::build(
        move |t: f64| -> Result<f64> {
            let p12 = s.p12(t)?;
            m1.record(p12);
            Ok(p12 * (-e1.eval(t)?).exp())
        },
        t0,
        horizon,
        &quad,
    )?;
    let e2 = cum_e.clone();
    let i2 = Cumulative::build(move |t: f64| -> Result<f64> { Ok(-s.p21(t)? * e2.eval(t)?.exp()) }, t0, horizon, &quad)?;
    check_p12(min_p12.get())?;

    let stages = checkpoints(t0, horizon, opts.stages)
        .into_iter()
        .map(|t| Ok(Stage { t, i1: i1.eval(t)?, i2: i2.eval(t)? }))
        .collect::<Result<Vec<_>>>()?;
    let error = i1.error().max(i2.error());
    let (evidence, reason) = divergence_evidence(&stages, opts.divergence_threshold, error);
    let last = stages.last().unwrap();
    Ok(CriterionReport {
        criterion: CriterionId::Thm32,
        j: None,
        verdict: if evidence {
            Verdict::DivergenceEvidence
        } else {
            Verdict::Inconclusive
        },
        margin: Some(last.i1.min(last.i2) - opts.divergence_threshold),
        diagnostics: Diagnostics {
            span: Some(Span::Ray { horizon }),
            integral: Some(last.i1.min(last.i2)),
            quadrature_error: Some(error),
            threshold: Some(opts.divergence_threshold),
            stages,
            min_p12: Some(min_p12.get()),
            reason,
            quadrature_converged: Some(i1.converged() && i2.converged()),
            ..Default::default()
        },
    })
}

fn divergence_evidence(stages: &[Stage], threshold: f64, error: f64) -> (bool, Option<String>) {
    for (name, seq) in [("first", stages.iter().map(|s| s.i1).collect::<Vec<_>>()), ("second", stages.iter().map(|s| s.i2).collect())] {
        if seq.windows(2).any(|w| w[1] < w[0] - error) {
            return (false, Some(format!("{name} staged integral decreases")));
        }
        let n = seq.len();
        if n >= 2 && !(seq[n - 1] - seq[n - 2] > error) {
            return (false, Some(format!("{name} staged integral stopped growing")));
        }
        if !(seq[n - 1] >= threshold) {
            return (false, Some(format!("{name} staged integral below {threshold}")));
        }
    }
    (true, None)
}

/// Records off-diagonal size and the smallest diagonal entry of `B`.
#[derive(Clone)]
struct DiagonalMonitor {
    min_b: Minimum,
    neg_offdiag: Minimum,
}

impl DiagonalMonitor {
    fn new() -> Self {
        DiagonalMonitor {
            min_b: Minimum::new(),
            neg_offdiag: Minimum::new(),
        }
    }

    fn record(&self, b: &linalg::CMat) {
        self.neg_offdiag.record(-linalg::off_diagonal_norm(b));
        for i in 0..b.nrows() {
            self.min_b.record(b[(i, i)].re);
        }
    }

    fn check(&self) -> Result<()> {
        let offdiag = -self.neg_offdiag.get();
        if offdiag > crate::system::DIAGONAL_TOLERANCE {
            return Err(Error::PreconditionFailed(format!("B is not diagonal (off-diagonal entry of size {offdiag:e})")));
        }
        let min_b = self.min_b.get();
        if !(min_b >= -SIGN_TOLERANCE) {
            return Err(Error::PreconditionFailed(format!("diagonal of B must be nonnegative, found {min_b:e}")));
        }
        Ok(())
    }
}

fn check_index(sys: &SystemSpec, j: usize) -> Result<()> {
    if j == 0 || j > sys.n() {
        return Err(Error::InvalidIndex { j, n: sys.n() });
    }
    Ok(())
}

/// `∫_a^b min[b_j, −c_jj] dt ≥ π` for diagonal `B`.
pub fn check_cor22(sys: &SystemSpec, j: usize, w: Window, opts: &CriteriaOptions) -> Result<CriterionReport> {
    check_index(sys, j)?;
    let monitor = DiagonalMonitor::new();
    let k = j - 1;
    let integrand = |t: f64| -> Result<f64> {
        let b = sys.b().eval(t)?;
        let c = sys.c().eval(t)?;
        monitor.record(&b);
        Ok(b[(k, k)].re.min(-c[(k, k)].re))
    };
    let q = integrate(integrand, w.a, w.b, &opts.window_quad())?;
    monitor.check()?;
    Ok(window_report(CriterionId::Cor22, Some(j), w, q.value, q.error, q.converged, None))
}

/// Staged divergence of `∫ b_j` and `−∫ c_jj` for diagonal `B`.
pub fn check_cor21(sys: &SystemSpec, j: usize, horizon: f64, opts: &CriteriaOptions) -> Result<CriterionReport> {
    check_index(sys, j)?;
    let monitor = DiagonalMonitor::new();
    let (m, b_fn, c_fn, k) = (monitor.clone(), sys.b().clone(), sys.c().clone(), j - 1);
    let s = ScalarSystem2x2::new(move |t| {
        let b = b_fn.eval(t)?;
        m.record(&b);
        Ok([0.0, b[(k, k)].re, c_fn.eval(t)?[(k, k)].re, 0.0])
    });
    let mut report = check_thm32(&s, sys.t0(), horizon, opts)?;
    monitor.check()?;
    report.criterion = CriterionId::Cor21;
    report.j = Some(j);
    Ok(report)
}

/// The scalar system of a one-dimensional Hamiltonian system,
/// `p11 = Re a`, `p12 = b`, `p21 = c`, `p22 = −Re a`. The imaginary part of
/// `a` only rotates `(Φ, Ψ)` by a common phase and does not move zeros.
pub fn direct_scalar_system(sys: &SystemSpec) -> Result<ScalarSystem2x2> {
    if sys.n() != 1 {
        return Err(Error::PreconditionFailed(format!("the direct scalar route needs n = 1, found n = {}", sys.n())));
    }
    let sys = sys.clone();
    Ok(ScalarSystem2x2::new(move |t| {
        let (a, b, c) = sys.eval(t)?;
        let ra = a[(0, 0)].re;
        Ok([ra, b[(0, 0)].re, c[(0, 0)].re, -ra])
    }))
}

fn span_grid(sys: &SystemSpec, span: &Span, opts: &CriteriaOptions) -> Result<Vec<f64>> {
    let (a, b) = span.interval(sys.t0());
    if !(a < b) {
        return Err(Error::InvalidInput(format!("empty span [{a}, {b}]")));
    }
    Ok(uniform_grid(a, b, opts.grid.max(2)))
}

fn run_scalar(s: &ScalarSystem2x2, sys: &SystemSpec, span: &Span, opts: &CriteriaOptions) -> Result<CriterionReport> {
    match *span {
        Span::Window(w) => check_thm33(s, w, opts),
        Span::Ray { horizon } => check_thm32(s, sys.t0(), horizon, opts),
    }
}

/// Route through a solution `F` of the range condition and the reduced
/// second-order equation for index `j`.
pub fn pipeline_thm21(sys: &SystemSpec, j: usize, span: &Span, opts: &CriteriaOptions) -> Result<CriterionReport> {
    check_index(sys, j)?;
    let id = match span {
        Span::Window(_) => CriterionId::Thm22,
        Span::Ray { .. } => CriterionId::Thm21,
    };
    let grid = span_grid(sys, span, opts)?;
    let eq12 = solve_eq12(sys.a(), sys.b(), &grid, opts.derivative)?;
    let eq12_diag = Eq12Diagnostics::from(&eq12);
    if let Some((t, residual)) = eq12.first_unsolvable() {
        let mut report = CriterionReport::inconclusive(
            id,
            Some(j),
            *span,
            format!("no solution F of the range condition at t = {t} (residual {residual:.3e})"),
        );
        report.diagnostics.eq12 = Some(eq12_diag);
        return Ok(report);
    }
    let reduction = reduce_thm21(sys, &eq12, j)?;
    let mut report = run_scalar(&reduction.as_scalar_system(), sys, span, opts)?;
    report.criterion = id;
    report.j = Some(j);
    report.diagnostics.eq12 = Some(eq12_diag);
    Ok(report)
}

/// Route through a continuous unitary diagonalization of `B` and the reduced
/// 2×2 system for index `j`.
pub fn pipeline_thm23(sys: &SystemSpec, j: usize, span: &Span, opts: &CriteriaOptions) -> Result<CriterionReport> {
    check_index(sys, j)?;
    let id = match span {
        Span::Window(_) => CriterionId::Thm24,
        Span::Ray { .. } => CriterionId::Thm23,
    };
    let grid = span_grid(sys, span, opts)?;
    let silent = |reason: String| Ok(CriterionReport::inconclusive(id, Some(j), *span, reason));
    let ep = match eigen_path(sys.b(), &grid) {
        Ok(ep) => ep,
        Err(e @ Error::GridTooCoarse { .. }) => return silent(e.to_string()),
        Err(e) => return Err(e),
    };
    let reduction = match reduce_thm23(sys, &ep, j, opts.continuity_factor) {
        Ok(r) => r,
        Err(e @ Error::NegativeEigenvalue { .. }) => return silent(e.to_string()),
        Err(e) => return Err(e),
    };
    let annotate = |report: &mut CriterionReport| {
        report.criterion = id;
        report.j = Some(j);
        report.diagnostics.guard_activity = reduction.guard_activity();
        report.diagnostics.chi_continuity = Some(reduction.continuity);
        report.diagnostics.eigen_continuity_defect = Some(ep.continuity_defect());
    };
    if !reduction.continuity.certifiable {
        let c = reduction.continuity;
        let mut report = CriterionReport::inconclusive(
            id,
            Some(j),
            *span,
            format!("chi_j jumps by {:.3e} near t = {} (bound {:.3e}); continuity not certified", c.max_jump, c.at, c.threshold),
        );
        annotate(&mut report);
        return Ok(report);
    }
    let mut report = match run_scalar(&reduction.as_scalar_system(), sys, span, opts) {
        Ok(r) => r,
        Err(e @ Error::NegativeEigenvalue { .. }) => CriterionReport::inconclusive(id, Some(j), *span, e.to_string()),
        Err(e) => return Err(e),
    };
    annotate(&mut report);
    Ok(report)
}

/// One criterion evaluation request.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Task {
    pub criterion: CriterionId,
    pub j: Option<usize>,
}

/// Evaluates one task.
pub fn run_task(sys: &SystemSpec, task: Task, span: &Span, opts: &CriteriaOptions) -> Result<CriterionReport> {
    let need_window = task.criterion.is_window();
    let (window, horizon) = match *span {
        Span::Window(w) if need_window => (Some(w), None),
        Span::Ray { horizon } if !need_window => (None, Some(horizon)),
        _ => {
            return Err(Error::InvalidInput(format!(
                "{} needs {}",
                task.criterion,
                if need_window { "a window" } else { "a horizon" }
            )))
        }
    };
    let j = task.j.unwrap_or(1);
    match task.criterion {
        CriterionId::Thm21 | CriterionId::Thm22 => pipeline_thm21(sys, j, span, opts),
        CriterionId::Thm23 | CriterionId::Thm24 => pipeline_thm23(sys, j, span, opts),
        CriterionId::Cor22 => check_cor22(sys, j, window.unwrap(), opts),
        CriterionId::Cor21 => check_cor21(sys, j, horizon.unwrap(), opts),
        CriterionId::Thm33 => check_thm33(&direct_scalar_system(sys)?, window.unwrap(), opts),
        CriterionId::Thm32 => check_thm32(&direct_scalar_system(sys)?, sys.t0(), horizon.unwrap(), opts),
    }
}

/// Criteria applicable by default: the two reduction routes, the diagonal
/// routes when `B` was detected diagonal, and the direct scalar route for
/// `n = 1`.
pub fn default_criteria(sys: &SystemSpec, span: &Span) -> Vec<CriterionId> {
    let window = matches!(span, Span::Window(_));
    let mut out = if window {
        vec![CriterionId::Thm22, CriterionId::Thm24]
    } else {
        vec![CriterionId::Thm21, CriterionId::Thm23]
    };
    if sys.diagonal_b() == Some(true) {
        out.push(if window { CriterionId::Cor22 } else { CriterionId::Cor21 });
    }
    if sys.n() == 1 {
        out.push(if window { CriterionId::Thm33 } else { CriterionId::Thm32 });
    }
    out
}

/// Evaluates `criteria` (default: [`default_criteria`]) for every `j` in
/// `js` (default: all). Tasks run concurrently; the result order is fixed
/// by criterion then `j`. Under the default set, range-condition routes
/// whose `F` does not exist are left out.
pub fn evaluate(
    sys: &SystemSpec,
    span: &Span,
    criteria: Option<&[CriterionId]>,
    js: Option<&[usize]>,
    opts: &CriteriaOptions,
) -> Result<Vec<CriterionReport>> {
    let explicit = criteria.is_some();
    let criteria = criteria.map(<[_]>::to_vec).unwrap_or_else(|| default_criteria(sys, span));
    let all_j: Vec<usize> = (1..=sys.n()).collect();
    let js = js.unwrap_or(&all_j);
    for &j in js {
        check_index(sys, j)?;
    }
    let mut tasks = Vec::new();
    for &criterion in &criteria {
        if matches!(criterion, CriterionId::Thm32 | CriterionId::Thm33) {
            tasks.push(Task { criterion, j: None });
        } else {
            tasks.extend(js.iter().map(|&j| Task { criterion, j: Some(j) }));
        }
    }
    let reports = tasks
        .par_iter()
        .map(|&task| run_task(sys, task, span, opts))
        .collect::<Result<Vec<_>>>()?;
    Ok(reports
        .into_iter()
        .filter(|r| explicit || r.diagnostics.eq12.as_ref().is_none_or(Eq12Diagnostics::all_solvable))
        .collect())
}
