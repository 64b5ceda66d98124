//! Reduction of the matrix system to scalar problems for a chosen index `j`.
//!
//! Two routes are provided. The first uses a solution `F` of the range
//! condition and yields the second-order equation
//! `φ'' + 2·Re a_Fjj·φ' − θ_Fj·φ = 0`; the second uses a continuous unitary
//! diagonalization of `B` and yields the first-order system
//! `φ' = 2·Re a⁰_jj·φ + b_j·ψ`, `ψ' = χ_j·φ`.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::func::{MatrixFn, ScalarFn};
use crate::linalg::{self, CMat};
use crate::matfun::{EigenPath, Eq12Solution, MatrixPath};
use crate::system::SystemSpec;

/// Eigenvalues of `B` above `−NEGATIVE_TOLERANCE·max(1, ‖B‖_F)` are clamped
/// to zero; anything lower is rejected.
pub const NEGATIVE_TOLERANCE: f64 = 1e-10;
/// `[x / b_m]₀` is zero whenever `|b_m| ≤ GUARD_TOLERANCE·max(1, ‖B‖_F)`.
pub const GUARD_TOLERANCE: f64 = 1e-12;
/// Default bound on adjacent jumps of `χ_j`, in units of the grid step.
pub const DEFAULT_CONTINUITY_FACTOR: f64 = 1e3;

type Coefficients = Arc<dyn Fn(f64) -> Result<[f64; 4]> + Send + Sync>;

/// `φ' = p11·φ + p12·ψ`, `ψ' = p21·φ + p22·ψ`.
///
/// All four coefficients come from one evaluator so reductions that share
/// work between them are computed once per time point.
#[derive(Clone)]
pub struct ScalarSystem2x2 {
    coefficients: Coefficients,
}

impl fmt::Debug for ScalarSystem2x2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ScalarSystem2x2(..)")
    }
}

impl ScalarSystem2x2 {
    /// `f(t) = [p11, p12, p21, p22]`.
    pub fn new(f: impl Fn(f64) -> Result<[f64; 4]> + Send + Sync + 'static) -> Self {
        ScalarSystem2x2 {
            coefficients: Arc::new(f),
        }
    }

    pub fn from_fns(p11: ScalarFn, p12: ScalarFn, p21: ScalarFn, p22: ScalarFn) -> Self {
        ScalarSystem2x2::new(move |t| Ok([p11.eval(t)?, p12.eval(t)?, p21.eval(t)?, p22.eval(t)?]))
    }

    pub fn constant(p11: f64, p12: f64, p21: f64, p22: f64) -> Self {
        ScalarSystem2x2::new(move |_| Ok([p11, p12, p21, p22]))
    }

    pub fn eval(&self, t: f64) -> Result<[f64; 4]> {
        (self.coefficients)(t)
    }

    pub fn p11(&self, t: f64) -> Result<f64> {
        Ok(self.eval(t)?[0])
    }

    pub fn p12(&self, t: f64) -> Result<f64> {
        Ok(self.eval(t)?[1])
    }

    pub fn p21(&self, t: f64) -> Result<f64> {
        Ok(self.eval(t)?[2])
    }

    pub fn p22(&self, t: f64) -> Result<f64> {
        Ok(self.eval(t)?[3])
    }

    /// `E = p11 − p22`.
    pub fn e(&self, t: f64) -> Result<f64> {
        let [p11, _, _, p22] = self.eval(t)?;
        Ok(p11 - p22)
    }

    /// Coefficients `(f, g, h)` of the associated Riccati equation
    /// `y' + f·y² + g·y + h = 0` for `y = ψ/φ`.
    pub fn riccati(&self) -> (ScalarFn, ScalarFn, ScalarFn) {
        let s1 = self.clone();
        let s2 = self.clone();
        let s3 = self.clone();
        (
            ScalarFn::new(move |t| s1.p12(t)),
            ScalarFn::new(move |t| s2.e(t)),
            ScalarFn::new(move |t| Ok(-s3.p21(t)?)),
        )
    }
}

/// `φ'' + p·φ' + q·φ = 0` written as `φ' = ψ`, `ψ' = −q·φ − p·ψ`.
pub fn second_order_as_system(p: ScalarFn, q: ScalarFn) -> ScalarSystem2x2 {
    ScalarSystem2x2::new(move |t| Ok([0.0, 1.0, -q.eval(t)?, -p.eval(t)?]))
}

fn check_index(j: usize, n: usize) -> Result<()> {
    if j == 0 || j > n {
        return Err(Error::InvalidIndex { j, n });
    }
    Ok(())
}

/// Reduction quantities at one time point, route via `F`.
#[derive(Debug, Clone)]
pub struct FPoint {
    /// `A_F = F·(A√B − (√B)')`.
    pub a_f: CMat,
    /// `C_B = √B·C·√B`.
    pub c_b: CMat,
    pub f: CMat,
    pub sqrt_b: CMat,
    /// `θ_Fj = c_Bjj + Σ_{m≠j} |a_Fmj|²`.
    pub theta: f64,
}

impl FPoint {
    pub fn re_a_fjj(&self, j: usize) -> f64 {
        self.a_f[(j - 1, j - 1)].re
    }
}

#[derive(Debug, Clone)]
pub struct ReductionThm21 {
    pub j: usize,
    pub grid: Vec<f64>,
    /// `Re a_Fjj` per sample.
    pub a_fjj: Vec<f64>,
    pub theta: Vec<f64>,
    pub a_f: Vec<CMat>,
    pub c_b: Vec<CMat>,
    eq12: Eq12Solution,
    c: MatrixFn,
}

impl ReductionThm21 {
    pub fn eq12(&self) -> &Eq12Solution {
        &self.eq12
    }

    /// Recomputes every quantity at `t`.
    pub fn at(&self, t: f64) -> Result<FPoint> {
        f_point(&self.eq12, &self.c, self.j, t)
    }

    /// `(p, q)` of `φ'' + p·φ' + q·φ = 0`: `p = 2·Re a_Fjj`, `q = −θ_Fj`.
    pub fn second_order(&self) -> (ScalarFn, ScalarFn) {
        let r1 = self.clone();
        let r2 = self.clone();
        let j = self.j;
        (
            ScalarFn::new(move |t| Ok(2.0 * r1.at(t)?.re_a_fjj(j))),
            ScalarFn::new(move |t| Ok(-r2.at(t)?.theta)),
        )
    }

    /// The reduced equation as `φ' = ψ`, `ψ' = θ·φ − 2·Re a_Fjj·ψ`.
    pub fn as_scalar_system(&self) -> ScalarSystem2x2 {
        let r = self.clone();
        let j = self.j;
        ScalarSystem2x2::new(move |t| {
            let point = r.at(t)?;
            Ok([0.0, 1.0, point.theta, -2.0 * point.re_a_fjj(j)])
        })
    }
}

fn f_point(eq12: &Eq12Solution, c: &MatrixFn, j: usize, t: f64) -> Result<FPoint> {
    let terms = eq12.terms_at(t)?;
    let a_f = &terms.f * &terms.m;
    let c_b = &terms.sqrt_b * c.eval(t)? * &terms.sqrt_b;
    let k = j - 1;
    let mut theta = c_b[(k, k)].re;
    for m in 0..a_f.nrows() {
        if m != k {
            theta += a_f[(m, k)].norm_sqr();
        }
    }
    Ok(FPoint {
        a_f,
        c_b,
        f: terms.f,
        sqrt_b: terms.sqrt_b,
        theta,
    })
}

/// Builds the `F`-route reduction on the grid of `eq12`.
pub fn reduce_thm21(sys: &SystemSpec, eq12: &Eq12Solution, j: usize) -> Result<ReductionThm21> {
    check_index(j, sys.n())?;
    if let Some((t, residual)) = eq12.first_unsolvable() {
        return Err(Error::UnsolvableEq12 { t, residual });
    }
    let mut out = ReductionThm21 {
        j,
        grid: eq12.grid().to_vec(),
        a_fjj: Vec::new(),
        theta: Vec::new(),
        a_f: Vec::new(),
        c_b: Vec::new(),
        eq12: eq12.clone(),
        c: sys.c().clone(),
    };
    for &t in eq12.grid() {
        let p = out.at(t)?;
        out.a_fjj.push(p.re_a_fjj(j));
        out.theta.push(p.theta);
        out.a_f.push(p.a_f);
        out.c_b.push(p.c_b);
    }
    Ok(out)
}

/// Reduction quantities at one time point, route via `U_B`.
#[derive(Debug, Clone)]
pub struct UPoint {
    /// `U_B` with `B = U_B*·diag(b)·U_B`.
    pub u: CMat,
    /// Eigenvalues in tracked order, clamped at zero.
    pub b: Vec<f64>,
    /// `A⁰ = U_B·(A·U_B* − (U_B*)')`.
    pub a0: CMat,
    /// `C⁰ = U_B·C·U_B*`.
    pub c0: CMat,
    /// Per `m`: whether `[·/b_m]₀` was set to zero.
    pub guard_active: Vec<bool>,
    pub chi: f64,
}

impl UPoint {
    pub fn re_ajj0(&self, j: usize) -> f64 {
        self.a0[(j - 1, j - 1)].re
    }
}

/// Where `[·/b_m]₀` was switched off for one `m`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GuardActivity {
    pub m: usize,
    pub active_samples: usize,
    pub samples: usize,
    pub first_active: Option<f64>,
    pub last_active: Option<f64>,
}

/// Largest jump of `χ_j` between adjacent samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Continuity {
    pub max_jump: f64,
    pub at: f64,
    pub threshold: f64,
    pub certifiable: bool,
}

#[derive(Debug, Clone)]
pub struct ReductionThm23 {
    pub j: usize,
    pub grid: Vec<f64>,
    pub ajj0: Vec<f64>,
    pub bj: Vec<f64>,
    pub chi: Vec<f64>,
    pub a0: Vec<CMat>,
    pub c0: Vec<CMat>,
    /// All tracked eigenvalues per sample.
    pub b: Vec<Vec<f64>>,
    /// Per sample, per `m`.
    pub guard_active: Vec<Vec<bool>>,
    pub continuity: Continuity,
    ep: EigenPath,
    u_star: MatrixPath,
    a: MatrixFn,
    b_fn: MatrixFn,
    c: MatrixFn,
}

impl ReductionThm23 {
    pub fn eigen_path(&self) -> &EigenPath {
        &self.ep
    }

    /// The path `U_B*` whose derivative enters `A⁰`.
    pub fn u_star(&self) -> &MatrixPath {
        &self.u_star
    }

    pub fn at(&self, t: f64) -> Result<UPoint> {
        u_point(&self.ep, &self.u_star, &self.a, &self.b_fn, &self.c, self.j, t)
    }

    /// Summary of guard activity for every `m ≠ j`.
    pub fn guard_activity(&self) -> Vec<GuardActivity> {
        let n = self.b.first().map_or(0, Vec::len);
        (0..n)
            .filter(|&m| m + 1 != self.j)
            .map(|m| {
                let active: Vec<f64> = self
                    .grid
                    .iter()
                    .zip(&self.guard_active)
                    .filter(|(_, g)| g[m])
                    .map(|(&t, _)| t)
                    .collect();
                GuardActivity {
                    m: m + 1,
                    active_samples: active.len(),
                    samples: self.grid.len(),
                    first_active: active.first().copied(),
                    last_active: active.last().copied(),
                }
            })
            .collect()
    }

    /// `p11 = 2·Re a⁰_jj`, `p12 = b_j`, `p21 = χ_j`, `p22 = 0`.
    pub fn as_scalar_system(&self) -> ScalarSystem2x2 {
        let r = self.clone();
        let j = self.j;
        ScalarSystem2x2::new(move |t| {
            let p = r.at(t)?;
            Ok([2.0 * p.re_ajj0(j), p.b[j - 1], p.chi, 0.0])
        })
    }
}

/// Free-function form of [`ReductionThm23::as_scalar_system`].
pub fn as_scalar_system(r: &ReductionThm23) -> ScalarSystem2x2 {
    r.as_scalar_system()
}

fn u_point(
    ep: &EigenPath,
    u_star: &MatrixPath,
    a: &MatrixFn,
    b_fn: &MatrixFn,
    c: &MatrixFn,
    j: usize,
    t: f64,
) -> Result<UPoint> {
    let (u, lambda) = ep.eval(t)?;
    let scale = linalg::frob(&b_fn.eval(t)?).max(1.0);
    let mut b = Vec::with_capacity(lambda.len());
    for (m, &value) in lambda.iter().enumerate() {
        if value < -NEGATIVE_TOLERANCE * scale {
            return Err(Error::NegativeEigenvalue { m: m + 1, t, value });
        }
        b.push(value.max(0.0));
    }
    let u_adj = u.adjoint();
    let u_star_dot = u_star.derivative(t)?;
    let a0 = &u * (a.eval(t)? * &u_adj - u_star_dot);
    let c0 = &u * c.eval(t)? * &u_adj;
    let k = j - 1;
    let mut chi = c0[(k, k)].re;
    let mut guard_active = vec![false; b.len()];
    for m in 0..b.len() {
        if m == k {
            continue;
        }
        if b[m].abs() <= GUARD_TOLERANCE * scale {
            guard_active[m] = true;
        } else {
            chi += a0[(m, k)].norm_sqr() / b[m];
        }
    }
    Ok(UPoint {
        u,
        b,
        a0,
        c0,
        guard_active,
        chi,
    })
}

/// Builds the `U_B`-route reduction on the grid of `ep`.
///
/// `continuity_factor` bounds the jump of `χ_j` between adjacent samples as
/// a multiple of the local grid step.
pub fn reduce_thm23(sys: &SystemSpec, ep: &EigenPath, j: usize, continuity_factor: f64) -> Result<ReductionThm23> {
    check_index(j, sys.n())?;
    let u_star = ep.adjoint_path()?;
    let mut out = ReductionThm23 {
        j,
        grid: ep.grid().to_vec(),
        ajj0: Vec::new(),
        bj: Vec::new(),
        chi: Vec::new(),
        a0: Vec::new(),
        c0: Vec::new(),
        b: Vec::new(),
        guard_active: Vec::new(),
        continuity: Continuity {
            max_jump: 0.0,
            at: ep.grid()[0],
            threshold: 0.0,
            certifiable: true,
        },
        ep: ep.clone(),
        u_star,
        a: sys.a().clone(),
        b_fn: sys.b().clone(),
        c: sys.c().clone(),
    };
    for &t in ep.grid() {
        let p = out.at(t)?;
        out.ajj0.push(p.re_ajj0(j));
        out.bj.push(p.b[j - 1]);
        out.chi.push(p.chi);
        out.a0.push(p.a0);
        out.c0.push(p.c0);
        out.b.push(p.b);
        out.guard_active.push(p.guard_active);
    }
    let grid = &out.grid;
    let mut worst = (0.0f64, grid[0], 0.0f64);
    let mut certifiable = true;
    for k in 1..grid.len() {
        let jump = (out.chi[k] - out.chi[k - 1]).abs();
        let threshold = continuity_factor * (grid[k] - grid[k - 1]);
        if !(jump <= threshold) {
            certifiable = false;
        }
        if jump > worst.0 || !jump.is_finite() {
            worst = (jump, grid[k], threshold);
        }
    }
    if worst.2 == 0.0 && grid.len() > 1 {
        worst.2 = continuity_factor * (grid[1] - grid[0]);
    }
    out.continuity = Continuity {
        max_jump: worst.0,
        at: worst.1,
        threshold: worst.2,
        certifiable,
    };
    Ok(out)
}
