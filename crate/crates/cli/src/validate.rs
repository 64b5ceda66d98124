//! Residual and invariant suite behind `hamosc validate`.

use hamosc::criteria::Span;
use hamosc::dynamics::{detect_zeros, integrate_hamiltonian, integrate_matrix_riccati, riccati_to_hamiltonian, RiccatiPath, DEFAULT_BLOWUP_NORM};
use hamosc::linalg::{identity, zeros, CMat};
use hamosc::matfun::{eigen_path, solve_eq12, uniform_grid, DerivativeMethod};
use hamosc::ode::OdeOptions;
use hamosc::oracle::{diagonal_riccati_residual, oracle_intervals, trial_initial_data, OracleOptions, ReductionRef};
use hamosc::reduction::{reduce_thm21, reduce_thm23, DEFAULT_CONTINUITY_FACTOR};
use hamosc::system::SystemSpec;
use hamosc::{Error, Result};
use serde::Serialize;

use crate::SystemInfo;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Thresholds {
    pub conjoined_defect: f64,
    pub riccati: f64,
    pub residual: f64,
}

pub const THRESHOLDS: Thresholds = Thresholds {
    conjoined_defect: 1e-8,
    riccati: 1e-6,
    residual: 1e-5,
};

const TRIALS: usize = 4;
const SAMPLES: usize = 33;
const GRID: usize = 256;

#[derive(Serialize)]
pub struct Config {
    pub system: SystemInfo,
    pub horizon: f64,
    pub seed: u64,
    pub thresholds: Thresholds,
}

#[derive(Serialize)]
pub struct Conjoined {
    pub trials: usize,
    pub max_relative_defect: f64,
    pub passed: bool,
}

#[derive(Serialize)]
pub struct Riccati {
    /// Span on which `Φ` stays nonsingular for `(Φ₀, Ψ₀) = (I, 0)`.
    pub span: (f64, f64),
    /// `ΨΦ⁻¹` against the directly integrated Riccati solution.
    pub z_difference: f64,
    /// `Φ` rebuilt from `Z` against the simulated `Φ`.
    pub roundtrip_error: f64,
    pub passed: bool,
}

#[derive(Serialize)]
pub struct Residual {
    pub route: &'static str,
    pub j: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_abs: Option<f64>,
    pub points: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skipped: Option<String>,
    pub passed: bool,
}

#[derive(Serialize)]
pub struct Suite {
    pub conjoined: Conjoined,
    pub riccati: Riccati,
    pub residuals: Vec<Residual>,
    pub all_passed: bool,
}

fn relative(a: &CMat, b: &CMat) -> f64 {
    (a - b).norm() / (1.0 + b.norm())
}

pub fn run(sys: &SystemSpec, horizon: f64, seed: u64) -> Result<Suite> {
    let n = sys.n();
    let ode = OdeOptions {
        rtol: 1e-11,
        atol: 1e-13,
        ..Default::default()
    };
    let ((a, b), _) = oracle_intervals(sys, &Span::Ray { horizon })?;

    let oracle = OracleOptions { seed, ..Default::default() };
    let mut defect = 0.0f64;
    for index in 0..TRIALS {
        let (_, phi0, psi0) = trial_initial_data(n, index, &oracle);
        let traj = integrate_hamiltonian(sys, &phi0, &psi0, a, b, &ode)?;
        defect = defect.max(traj.max_relative_defect());
    }
    let conjoined = Conjoined {
        trials: TRIALS,
        max_relative_defect: defect,
        passed: defect <= THRESHOLDS.conjoined_defect,
    };

    let traj = integrate_hamiltonian(sys, &identity(n), &zeros(n), a, b, &ode)?;
    let end = match detect_zeros(&traj, a, b, None).zeros.first() {
        Some(z) => a + 0.9 * (z.t - a),
        None => b,
    };
    let from_traj = RiccatiPath::from_trajectory(&traj, a, end)?;
    let direct = integrate_matrix_riccati(sys, &zeros(n), a, end, DEFAULT_BLOWUP_NORM, &ode)?;
    let rebuilt = riccati_to_hamiltonian(&from_traj, sys, &identity(n), a, end, &ode)?;
    let times = uniform_grid(a, end, SAMPLES);
    let (mut z_difference, mut roundtrip_error) = (0.0f64, 0.0f64);
    for &t in &times {
        let missing = || Error::InvalidInput(format!("no sample at t = {t}"));
        let z1 = from_traj.at(t).ok_or_else(missing)?;
        let z2 = direct.at(t).ok_or_else(missing)?;
        z_difference = z_difference.max(relative(&z2, &z1));
        let (phi, _) = traj.state_at(t).ok_or_else(missing)?;
        let (phi2, _) = rebuilt.state_at(t).ok_or_else(missing)?;
        roundtrip_error = roundtrip_error.max(relative(&phi2, &phi));
    }
    let riccati = Riccati {
        span: (a, end),
        z_difference,
        roundtrip_error,
        passed: z_difference <= THRESHOLDS.riccati && roundtrip_error <= THRESHOLDS.riccati,
    };

    let margin = 0.05 * (end - a);
    let inner = uniform_grid(a + margin, end - margin, SAMPLES);
    let grid = uniform_grid(a, end, GRID);
    let mut residuals = Vec::new();
    let eq12 = solve_eq12(sys.a(), sys.b(), &grid, DerivativeMethod::default())?;
    let ep = match eigen_path(sys.b(), &grid) {
        Ok(ep) => Ok(ep),
        Err(e @ Error::GridTooCoarse { .. }) => Err(e.to_string()),
        Err(e) => return Err(e),
    };
    for j in 1..=n {
        let f_route = if eq12.all_solvable() {
            let red = reduce_thm21(sys, &eq12, j)?;
            Ok(diagonal_riccati_residual(&direct, ReductionRef::Thm21(&red), &inner)?)
        } else {
            Err("the range condition has no solution F on this span".to_string())
        };
        residuals.push(residual_entry("F", j, f_route));

        let u_route = match &ep {
            Ok(ep) => match reduce_thm23(sys, ep, j, DEFAULT_CONTINUITY_FACTOR) {
                Ok(red) => Ok(diagonal_riccati_residual(&direct, ReductionRef::Thm23(&red), &inner)?),
                Err(e @ Error::NegativeEigenvalue { .. }) => Err(e.to_string()),
                Err(e) => return Err(e),
            },
            Err(reason) => Err(reason.clone()),
        };
        residuals.push(residual_entry("U", j, u_route));
    }

    let all_passed = conjoined.passed && riccati.passed && residuals.iter().all(|r| r.passed);
    Ok(Suite {
        conjoined,
        riccati,
        residuals,
        all_passed,
    })
}

fn residual_entry(route: &'static str, j: usize, trace: std::result::Result<hamosc::oracle::ResidualTrace, String>) -> Residual {
    match trace {
        Ok(trace) => Residual {
            route,
            j,
            max_abs: Some(trace.max_abs),
            points: trace.t.len(),
            skipped: None,
            passed: trace.max_abs <= THRESHOLDS.residual,
        },
        Err(reason) => Residual {
            route,
            j,
            max_abs: None,
            points: 0,
            skipped: Some(reason),
            passed: true,
        },
    }
}
