//! Independent checks: the Riccati comparison condition, residuals of the
//! diagonal-entry Riccati identities along simulated paths, and a Monte-Carlo
//! oracle that samples conjoined solutions and looks for zeros of `det Φ`.
//!
//! The Monte-Carlo verdict is evidence only. It samples finitely many
//! conjoined solutions and never proves oscillation or its absence.

use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::Serialize;

use crate::criteria::Span;
use crate::dynamics::{detect_zeros, integrate_hamiltonian, integrate_scalar_riccati, RiccatiPath, Trajectory, DEFAULT_BLOWUP_NORM};
use crate::error::{Error, Result};
use crate::func::ScalarFn;
use crate::linalg::{self, identity, CMat};
use crate::matfun::{fd_step, uniform_grid};
use crate::ode::OdeOptions;
use crate::quad::{integrate, Cumulative, QuadOptions};
use crate::reduction::{ReductionThm21, ReductionThm23};
use crate::system::SystemSpec;

/// `|y₂|` beyond this ends the common span of a comparison.
pub const COMMON_SPAN_LIMIT: f64 = 1e4;
/// Slack for the sign hypotheses of the comparison theorem.
pub const HYPOTHESIS_TOLERANCE: f64 = 1e-12;

/// Two Riccati equations `y' + f_k·y² + g_k·y + h_k = 0` (`k = 1, 2`), a
/// solution `y₂` of the second, and the data of the comparison condition.
#[derive(Debug, Clone)]
pub struct ComparisonInput {
    pub f1: ScalarFn,
    pub g1: ScalarFn,
    pub h1: ScalarFn,
    pub f2: ScalarFn,
    pub g2: ScalarFn,
    pub h2: ScalarFn,
    /// Reference coefficients `(f, g, h)`; `None` means `(f₂, g₂, h₂)`.
    pub reference: Option<(ScalarFn, ScalarFn, ScalarFn)>,
    pub y2: RiccatiPath<f64>,
    pub eta1: ScalarFn,
    pub eta2: ScalarFn,
    /// Initial value of `y₁`; must satisfy `γ₀ ≥ y₂(t₀)`.
    pub gamma0: f64,
    pub t0: f64,
    pub tau0: f64,
}

impl ComparisonInput {
    /// Comparison of two equations with `η₁ = η₂ = y₂` and `γ₀ = y₂(t₀)`.
    pub fn new(first: [ScalarFn; 3], second: [ScalarFn; 3], y2: RiccatiPath<f64>, tau0: f64) -> Self {
        let [f1, g1, h1] = first;
        let [f2, g2, h2] = second;
        let t0 = y2.start();
        let gamma0 = y2.values[0];
        let eta = path_fn(&y2);
        ComparisonInput {
            f1,
            g1,
            h1,
            f2,
            g2,
            h2,
            reference: None,
            y2,
            eta1: eta.clone(),
            eta2: eta,
            gamma0,
            t0,
            tau0,
        }
    }

    /// Integrates the second equation from `y₂(t₀) = y20` on `[t0, tau0]`
    /// and builds the comparison from it.
    pub fn integrate(first: [ScalarFn; 3], second: [ScalarFn; 3], y20: f64, t0: f64, tau0: f64, opts: &OdeOptions) -> Result<Self> {
        let y2 = integrate_scalar_riccati(&second[0], &second[1], &second[2], y20, t0, tau0, DEFAULT_BLOWUP_NORM, opts)?;
        Ok(ComparisonInput::new(first, second, y2, tau0))
    }

    fn reference(&self) -> (ScalarFn, ScalarFn, ScalarFn) {
        self.reference
            .clone()
            .unwrap_or_else(|| (self.f2.clone(), self.g2.clone(), self.h2.clone()))
    }

    /// End of the span on which `y₂` is known and below [`COMMON_SPAN_LIMIT`].
    pub fn common_span_end(&self) -> f64 {
        let mut end = self.tau0.min(self.y2.end());
        if let Some(k) = self.y2.values.iter().position(|y| !(y.abs() <= COMMON_SPAN_LIMIT)) {
            end = end.min(self.y2.t[k.saturating_sub(1)]);
        }
        end
    }

    fn check_hypotheses(&self, grid: &[f64]) -> Result<()> {
        let y20 = self.y2.try_at(self.t0)?;
        for (name, eta) in [("eta1", &self.eta1), ("eta2", &self.eta2)] {
            let value = eta.eval(self.t0)?;
            if !(value >= y20 - HYPOTHESIS_TOLERANCE) {
                return Err(Error::HypothesisViolated(format!("{name}(t0) = {value} is below y2(t0) = {y20}")));
            }
        }
        if !(self.gamma0 >= y20 - HYPOTHESIS_TOLERANCE) {
            return Err(Error::HypothesisViolated(format!("gamma0 = {} is below y2(t0) = {y20}", self.gamma0)));
        }
        for &t in grid {
            let f1 = self.f1.eval(t)?;
            if !(f1 >= -HYPOTHESIS_TOLERANCE) {
                return Err(Error::HypothesisViolated(format!("f1({t}) = {f1} is negative")));
            }
        }
        Ok(())
    }
}

fn path_fn(path: &RiccatiPath<f64>) -> ScalarFn {
    let path = path.clone();
    ScalarFn::new(move |t| path.try_at(t))
}

/// `J(t)` on the grid points inside the common span.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonTrace {
    pub satisfied: bool,
    pub t: Vec<f64>,
    pub j: Vec<f64>,
    pub quadrature_error: f64,
    pub span_end: f64,
    pub min_margin: f64,
}

/// Evaluates
/// `J(t) = ∫_{t₀}^t exp{∫_{t₀}^τ [f(η₁+η₂) + g]} · [(f − f₁)y₂² + (g − g₁)y₂ + h − h₁](τ) dτ`
/// on `grid`. The condition holds when `J ≥ −error` at every grid point.
///
/// The bracket is oriented so that the first equation is the one whose
/// solution is guaranteed: with equal `f` and `g`, `h₁ ≤ h` makes it easier.
pub fn comparison_condition(c: &ComparisonInput, grid: &[f64]) -> Result<ComparisonTrace> {
    let end = c.common_span_end();
    let points: Vec<f64> = grid.iter().copied().filter(|&t| t >= c.t0 && t <= end).collect();
    c.check_hypotheses(&points)?;
    let (f, g, h) = c.reference();
    if !(end > c.t0) {
        return Ok(ComparisonTrace {
            satisfied: true,
            t: points.clone(),
            j: vec![0.0; points.len()],
            quadrature_error: 0.0,
            span_end: end,
            min_margin: 0.0,
        });
    }
    let opts = QuadOptions {
        abs_tol: 1e-10,
        rel_tol: 1e-10,
        max_panels: 4000,
        initial_panels: 8,
    };
    let weight = Cumulative::build(
        |s: f64| -> Result<f64> { Ok(f.eval(s)? * (c.eta1.eval(s)? + c.eta2.eval(s)?) + g.eval(s)?) },
        c.t0,
        end,
        &opts,
    )?;
    let integrand = |tau: f64| -> Result<f64> {
        let y2 = c.y2.try_at(tau)?;
        let bracket = (f.eval(tau)? - c.f1.eval(tau)?) * y2 * y2 + (g.eval(tau)? - c.g1.eval(tau)?) * y2 + h.eval(tau)? - c.h1.eval(tau)?;
        Ok(weight.eval(tau)?.exp() * bracket)
    };
    let magnitude = integrate(|tau| integrand(tau).map(f64::abs), c.t0, end, &opts)?;
    let outer = Cumulative::build(integrand, c.t0, end, &opts)?;
    let error = outer.error() + magnitude.value * weight.error().exp_m1();
    let j = points.iter().map(|&t| outer.eval(t)).collect::<Result<Vec<_>>>()?;
    let min_margin = j.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(ComparisonTrace {
        satisfied: j.iter().all(|&x| x >= -error),
        t: points,
        j,
        quadrature_error: error,
        span_end: end,
        min_margin,
    })
}

#[derive(Debug, Clone)]
pub struct ComparisonVerification {
    pub verified: bool,
    pub condition: ComparisonTrace,
    pub y1: RiccatiPath<f64>,
}

/// Checks the condition on `grid`, then integrates the first equation from
/// `y₁(t₀) = γ₀` across the closed common span. Verified when `y₁` does not
/// blow up before the span end.
pub fn comparison_predict_and_verify(c: &ComparisonInput, grid: &[f64], opts: &OdeOptions) -> Result<ComparisonVerification> {
    let condition = comparison_condition(c, grid)?;
    if !condition.satisfied {
        return Err(Error::PreconditionFailed(format!(
            "comparison condition fails: J reaches {:.6e} (error bound {:.3e})",
            condition.min_margin, condition.quadrature_error
        )));
    }
    let end = condition.span_end;
    let y1 = integrate_scalar_riccati(&c.f1, &c.g1, &c.h1, c.gamma0, c.t0, end, DEFAULT_BLOWUP_NORM, opts)?;
    let verified = y1.blow_up.is_none() && y1.end() >= end;
    Ok(ComparisonVerification { verified, condition, y1 })
}

/// Residual of the diagonal-entry identity along a transformed path.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualTrace {
    pub t: Vec<f64>,
    pub residual: Vec<f64>,
    pub max_abs: f64,
}

/// Which reduction the residual is measured against.
#[derive(Debug, Clone, Copy)]
pub enum ReductionRef<'a> {
    /// `V = √B·Z·√B`.
    Thm21(&'a ReductionThm21),
    /// `V = U_B·Z·U_B*`.
    Thm23(&'a ReductionThm23),
}

/// Residual of the scalar equation satisfied by `v_jj` when `Z` solves the
/// matrix Riccati equation. `Z'` is a central difference with the step of
/// [`fd_step`]; times whose stencil leaves the path are skipped.
///
/// Route via `F`:
/// `v_jj' + v_jj² + 2·Re a_Fjj·v_jj + Σ_{m≠j} |v_jm + conj a_Fmj|² − θ_Fj`.
///
/// Route via `U_B`:
/// `v_jj' + b_j·v_jj² + 2·Re a⁰_jj·v_jj + Σ_{m≠j} T_m − χ_j`, where
/// `T_m = b_m·|v_jm + conj a⁰_mj / b_m|²` and, where the guard is active,
/// `T_m = b_m·|v_jm|² + 2·Re(v_jm·a⁰_mj)`.
pub fn diagonal_riccati_residual(z: &RiccatiPath<CMat>, reduction: ReductionRef<'_>, times: &[f64]) -> Result<ResidualTrace> {
    let mut out = ResidualTrace {
        t: Vec::new(),
        residual: Vec::new(),
        max_abs: 0.0,
    };
    for &t in times {
        let h = fd_step(t);
        let (Some(zt), Some(zp), Some(zm)) = (z.at(t), z.at(t + h), z.at(t - h)) else {
            continue;
        };
        let z_dot = (zp - zm).unscale(2.0 * h);
        let r = match reduction {
            ReductionRef::Thm21(red) => residual_thm21(red, &zt, &z_dot, t)?,
            ReductionRef::Thm23(red) => residual_thm23(red, &zt, &z_dot, t)?,
        };
        out.max_abs = out.max_abs.max(r.abs());
        out.t.push(t);
        out.residual.push(r);
    }
    Ok(out)
}

fn residual_thm21(red: &ReductionThm21, z: &CMat, z_dot: &CMat, t: f64) -> Result<f64> {
    let terms = red.eq12().terms_at(t)?;
    let point = red.at(t)?;
    let s = &terms.sqrt_b;
    let v = s * z * s;
    let v_dot = &terms.sqrt_b_dot * z * s + s * z_dot * s + s * z * &terms.sqrt_b_dot;
    let k = red.j - 1;
    let vjj = v[(k, k)].re;
    let mut r = v_dot[(k, k)].re + vjj * vjj + 2.0 * point.a_f[(k, k)].re * vjj - point.theta;
    for m in (0..v.nrows()).filter(|&m| m != k) {
        r += (v[(k, m)] + point.a_f[(m, k)].conj()).norm_sqr();
    }
    Ok(r)
}

fn residual_thm23(red: &ReductionThm23, z: &CMat, z_dot: &CMat, t: f64) -> Result<f64> {
    let point = red.at(t)?;
    let u = &point.u;
    let u_adj_dot = red.u_star().derivative(t)?;
    let v = u * z * u.adjoint();
    let v_dot = u_adj_dot.adjoint() * z * u.adjoint() + u * z_dot * u.adjoint() + u * z * &u_adj_dot;
    let k = red.j - 1;
    let vjj = v[(k, k)].re;
    let a0 = &point.a0;
    let mut r = v_dot[(k, k)].re + point.b[k] * vjj * vjj + 2.0 * a0[(k, k)].re * vjj - point.chi;
    for m in (0..v.nrows()).filter(|&m| m != k) {
        let bm = point.b[m];
        r += if point.guard_active[m] {
            bm * v[(k, m)].norm_sqr() + 2.0 * (v[(k, m)] * a0[(m, k)]).re
        } else {
            bm * (v[(k, m)] + a0[(m, k)].conj() / bm).norm_sqr()
        };
    }
    Ok(r)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum OracleVerdict {
    AllZero,
    SomeNonZero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialKind {
    /// `(Φ₀, Ψ₀) = (I, 0)`.
    Identity,
    /// `Φ₀ = diag(1, …, 1, 10⁻³)`, `Ψ₀ = I`.
    NearSingular,
    /// `Φ₀ = I`, `Ψ₀` a seeded Gaussian Hermitian matrix.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialStatus {
    Zero,
    NoZero,
    /// Integration failed; counted as no zero.
    Indeterminate,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrialResult {
    pub index: usize,
    pub kind: TrialKind,
    pub status: TrialStatus,
    /// Zero events over the whole integration span.
    pub zeros: Vec<f64>,
    pub near_events: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(skip)]
    pub phi0: CMat,
    #[serde(skip)]
    pub psi0: CMat,
    #[serde(skip)]
    pub trajectory: Option<Trajectory>,
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleReport {
    pub verdict: OracleVerdict,
    pub seed: u64,
    /// Interval that was integrated.
    pub span: (f64, f64),
    /// Interval in which each trial needs a zero.
    pub decision_interval: (f64, f64),
    pub trials: Vec<TrialResult>,
}

impl OracleReport {
    /// One row per zero event: `trial,kind,status,t`. Trials without zeros
    /// get a single row with an empty `t`.
    pub fn write_events_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["trial", "kind", "status", "t"])?;
        for trial in &self.trials {
            let kind = serde_json::to_value(trial.kind)?;
            let status = serde_json::to_value(trial.status)?;
            let (kind, status) = (kind.as_str().unwrap_or_default().to_string(), status.as_str().unwrap_or_default().to_string());
            if trial.zeros.is_empty() {
                w.write_record([trial.index.to_string(), kind.clone(), status.clone(), String::new()])?;
            }
            for t in &trial.zeros {
                w.write_record([trial.index.to_string(), kind.clone(), status.clone(), format!("{t:?}")])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct OracleOptions {
    pub trials: usize,
    pub seed: u64,
    /// Standard deviation of the Gaussian entries of `Ψ₀`.
    pub psi_sigma: f64,
    /// `Ψ₀` is rescaled to this Frobenius norm when larger.
    pub psi_norm_cap: f64,
    pub sigma_floor: Option<f64>,
    pub keep_trajectories: bool,
    pub ode: OdeOptions,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            trials: 20,
            seed: 0,
            psi_sigma: 3.0,
            psi_norm_cap: 10.0,
            sigma_floor: None,
            keep_trajectories: false,
            ode: OdeOptions::default(),
        }
    }
}

/// Initial data of trial `index`; conjoined by construction.
pub fn trial_initial_data(n: usize, index: usize, opts: &OracleOptions) -> (TrialKind, CMat, CMat) {
    match index {
        0 => (TrialKind::Identity, identity(n), CMat::zeros(n, n)),
        1 => {
            let mut diag = vec![1.0; n];
            diag[n - 1] = 1e-3;
            (TrialKind::NearSingular, linalg::real_diag(&diag), identity(n))
        }
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(index as u64);
            let normal = Normal::new(0.0, opts.psi_sigma).expect("finite standard deviation");
            let mut psi = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
            for i in 0..n {
                psi[(i, i)] = Complex64::new(normal.sample(&mut rng), 0.0);
                for j in i + 1..n {
                    let z = Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng)) / 2f64.sqrt();
                    psi[(i, j)] = z;
                    psi[(j, i)] = z.conj();
                }
            }
            let norm = psi.norm();
            if norm > opts.psi_norm_cap {
                psi.unscale_mut(norm / opts.psi_norm_cap);
            }
            (TrialKind::Random, identity(n), psi)
        }
    }
}

/// Integration span and the interval in which a zero is required.
///
/// A window `[a, b]` is integrated from `a` and needs a zero in `[a, b]`. A
/// ray up to `T` is integrated from `t₀` and needs a zero in the second half
/// `[t₀ + (T − t₀)/2, T]`.
pub fn oracle_intervals(sys: &SystemSpec, span: &Span) -> Result<((f64, f64), (f64, f64))> {
    let (a, b) = span.interval(sys.t0());
    if !(a < b) {
        return Err(Error::InvalidInput(format!("empty span [{a}, {b}]")));
    }
    Ok(match span {
        Span::Window(_) => ((a, b), (a, b)),
        Span::Ray { .. } => ((a, b), (a + 0.5 * (b - a), b)),
    })
}

/// Samples conjoined solutions, integrates each and looks for zero events.
/// Trials run concurrently and are merged by index.
pub fn empirical_oracle(sys: &SystemSpec, span: &Span, opts: &OracleOptions) -> Result<OracleReport> {
    if opts.trials == 0 {
        return Err(Error::InvalidInput("at least one trial is required".into()));
    }
    let (integration, decision) = oracle_intervals(sys, span)?;
    let trials = (0..opts.trials)
        .into_par_iter()
        .map(|index| run_trial(sys, index, integration, decision, opts))
        .collect::<Result<Vec<_>>>()?;
    let verdict = if trials.iter().all(|t| t.status == TrialStatus::Zero) {
        OracleVerdict::AllZero
    } else {
        OracleVerdict::SomeNonZero
    };
    Ok(OracleReport {
        verdict,
        seed: opts.seed,
        span: integration,
        decision_interval: decision,
        trials,
    })
}

fn run_trial(sys: &SystemSpec, index: usize, (a, b): (f64, f64), (da, db): (f64, f64), opts: &OracleOptions) -> Result<TrialResult> {
    let (kind, phi0, psi0) = trial_initial_data(sys.n(), index, opts);
    let mut result = TrialResult {
        index,
        kind,
        status: TrialStatus::Indeterminate,
        zeros: Vec::new(),
        near_events: Vec::new(),
        reason: None,
        phi0,
        psi0,
        trajectory: None,
    };
    let traj = match integrate_hamiltonian(sys, &result.phi0, &result.psi0, a, b, &opts.ode) {
        Ok(traj) => traj,
        Err(e @ (Error::StepSizeUnderflow { .. } | Error::TooManySteps { .. })) => {
            result.reason = Some(e.to_string());
            return Ok(result);
        }
        Err(e) => return Err(e),
    };
    let scan = detect_zeros(&traj, a, b, opts.sigma_floor);
    result.zeros = scan.zeros.iter().map(|e| e.t).collect();
    result.near_events = scan.near.iter().map(|e| e.t).collect();
    result.status = if result.zeros.iter().any(|&t| t >= da && t <= db) {
        TrialStatus::Zero
    } else {
        TrialStatus::NoZero
    };
    if opts.keep_trajectories {
        result.trajectory = Some(traj);
    }
    Ok(result)
}

/// Convenience grid for [`comparison_condition`] on `[t0, end]`.
pub fn comparison_grid(t0: f64, end: f64, n: usize) -> Vec<f64> {
    uniform_grid(t0, end, n.max(2))
}
