//! Coefficient matrices and the JSON system file.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, MatrixName, Result};
use crate::expr::{self, Expr};
use crate::func::MatrixFn;
use crate::linalg::{self, CMat};
use crate::matfun::uniform_grid;
use num_complex::Complex64;

/// Number of samples used when validating a system file.
pub const VALIDATION_SAMPLES: usize = 64;
/// Relative tolerance for the Hermitian check on loaded coefficients.
pub const VALIDATION_TOLERANCE: f64 = 1e-9;
/// Off-diagonal size below which `B` counts as diagonal.
pub const DIAGONAL_TOLERANCE: f64 = 1e-12;

/// One matrix entry in a system file: a real expression or a `[re, im]` pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EntrySource {
    Real(String),
    Complex([String; 2]),
}

impl From<&str> for EntrySource {
    fn from(s: &str) -> Self {
        EntrySource::Real(s.to_string())
    }
}

/// On-disk representation of a system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub n: usize,
    pub t0: f64,
    #[serde(rename = "A")]
    pub a: Vec<Vec<EntrySource>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<EntrySource>>,
    #[serde(rename = "C")]
    pub c: Vec<Vec<EntrySource>>,
}

impl SystemFile {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Convenience constructor for real systems given row-major strings.
    pub fn real(n: usize, t0: f64, a: &[&str], b: &[&str], c: &[&str]) -> Self {
        let rows = |m: &[&str]| -> Vec<Vec<EntrySource>> {
            m.chunks(n).map(|r| r.iter().map(|&s| s.into()).collect()).collect()
        };
        SystemFile {
            name: None,
            description: None,
            n,
            t0,
            a: rows(a),
            b: rows(b),
            c: rows(c),
        }
    }

    /// Parses every entry; does not evaluate anything.
    pub fn compile(&self) -> Result<SystemSpec> {
        if self.n == 0 {
            return Err(Error::InvalidInput("n must be at least 1".into()));
        }
        if !self.t0.is_finite() {
            return Err(Error::InvalidInput("t0 must be finite".into()));
        }
        let a = ExprMatrix::compile(MatrixName::A, self.n, &self.a)?;
        let b = ExprMatrix::compile(MatrixName::B, self.n, &self.b)?;
        let c = ExprMatrix::compile(MatrixName::C, self.n, &self.c)?;
        let mut spec = SystemSpec::new(self.n, self.t0, a.to_fn(), b.to_fn(), c.to_fn());
        spec.name = self.name.clone();
        spec.description = self.description.clone();
        spec.source = Some(self.clone());
        Ok(spec)
    }
}

#[derive(Debug, Clone)]
struct Entry {
    re: Expr,
    im: Option<Expr>,
}

/// An `n × n` matrix of parsed entry expressions.
#[derive(Debug, Clone)]
struct ExprMatrix {
    name: MatrixName,
    n: usize,
    entries: Vec<Entry>,
}

impl ExprMatrix {
    fn compile(name: MatrixName, n: usize, rows: &[Vec<EntrySource>]) -> Result<Self> {
        if rows.len() != n {
            return Err(Error::DimensionMismatch {
                what: format!("rows of {name}"),
                expected: n,
                found: rows.len(),
            });
        }
        let mut entries = Vec::with_capacity(n * n);
        for (row, r) in rows.iter().enumerate() {
            if r.len() != n {
                return Err(Error::DimensionMismatch {
                    what: format!("columns of {name} row {row}"),
                    expected: n,
                    found: r.len(),
                });
            }
            for (col, source) in r.iter().enumerate() {
                let parse = |part: &'static str, s: &str| {
                    expr::parse(s).map_err(|source| Error::EntryParse {
                        matrix: name,
                        row,
                        col,
                        part,
                        source,
                    })
                };
                let entry = match source {
                    EntrySource::Real(s) => Entry {
                        re: parse("re", s)?,
                        im: None,
                    },
                    EntrySource::Complex([re, im]) => {
                        let im = parse("im", im)?;
                        Entry {
                            re: parse("re", re)?,
                            im: (!im.is_zero_literal()).then_some(im),
                        }
                    }
                };
                entries.push(entry);
            }
        }
        Ok(ExprMatrix { name, n, entries })
    }

    fn eval(&self, t: f64) -> Result<CMat> {
        let n = self.n;
        let mut m = CMat::zeros(n, n);
        for (k, e) in self.entries.iter().enumerate() {
            let (row, col) = (k / n, k % n);
            let located = |source| Error::EntryEval {
                matrix: self.name,
                row,
                col,
                t,
                source,
            };
            let re = e.re.eval(t).map_err(located)?;
            let im = match &e.im {
                Some(x) => x.eval(t).map_err(located)?,
                None => 0.0,
            };
            m[(row, col)] = Complex64::new(re, im);
        }
        Ok(m)
    }

    fn to_fn(&self) -> MatrixFn {
        let this = self.clone();
        MatrixFn::new(move |t| this.eval(t))
    }
}

/// A linear matrix Hamiltonian system `Φ' = AΦ + BΨ`, `Ψ' = CΦ − A*Ψ`.
#[derive(Debug, Clone)]
pub struct SystemSpec {
    pub name: Option<String>,
    pub description: Option<String>,
    n: usize,
    t0: f64,
    a: MatrixFn,
    b: MatrixFn,
    c: MatrixFn,
    /// Set by [`SystemSpec::validate`].
    diagonal_b: Option<bool>,
    source: Option<SystemFile>,
}

/// Outcome of [`SystemSpec::validate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Validation {
    pub start: f64,
    pub end: f64,
    pub samples: usize,
    pub diagonal_b: bool,
    pub real: bool,
}

impl SystemSpec {
    pub fn new(n: usize, t0: f64, a: MatrixFn, b: MatrixFn, c: MatrixFn) -> Self {
        SystemSpec {
            name: None,
            description: None,
            n,
            t0,
            a,
            b,
            c,
            diagonal_b: None,
            source: None,
        }
    }

    /// System with constant coefficients.
    pub fn constant(t0: f64, a: CMat, b: CMat, c: CMat) -> Self {
        let n = a.nrows();
        SystemSpec::new(n, t0, MatrixFn::constant(a), MatrixFn::constant(b), MatrixFn::constant(c))
    }

    pub fn parse_json(text: &str) -> Result<Self> {
        SystemFile::from_json(text)?.compile()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn a(&self) -> &MatrixFn {
        &self.a
    }

    pub fn b(&self) -> &MatrixFn {
        &self.b
    }

    pub fn c(&self) -> &MatrixFn {
        &self.c
    }

    pub fn source(&self) -> Option<&SystemFile> {
        self.source.as_ref()
    }

    /// Result of the diagonal-`B` detection, if [`validate`](Self::validate) ran.
    pub fn diagonal_b(&self) -> Option<bool> {
        self.diagonal_b
    }

    pub fn eval(&self, t: f64) -> Result<(CMat, CMat, CMat)> {
        let a = self.a.eval(t)?;
        let b = self.b.eval(t)?;
        let c = self.c.eval(t)?;
        for (m, name) in [(&a, "A"), (&b, "B"), (&c, "C")] {
            if m.nrows() != self.n || m.ncols() != self.n {
                return Err(Error::DimensionMismatch {
                    what: format!("{name}(t)"),
                    expected: self.n,
                    found: m.nrows(),
                });
            }
            if !linalg::all_finite(m) {
                return Err(Error::NonFinite { t, what: name.into() });
            }
        }
        Ok((a, b, c))
    }

    /// Checks that `B` and `C` are Hermitian at [`VALIDATION_SAMPLES`] points
    /// of `[start, end]` and records whether `B` is diagonal there.
    pub fn validate(&mut self, start: f64, end: f64) -> Result<Validation> {
        if !(start.is_finite() && end.is_finite() && start <= end) {
            return Err(Error::InvalidInput(format!("invalid validation span [{start}, {end}]")));
        }
        let grid = if start == end {
            vec![start]
        } else {
            uniform_grid(start, end, VALIDATION_SAMPLES)
        };
        let mut diagonal = true;
        let mut real = true;
        for &t in &grid {
            let (a, b, c) = self.eval(t)?;
            check_hermitian(MatrixName::B, &b, t)?;
            check_hermitian(MatrixName::C, &c, t)?;
            diagonal &= linalg::off_diagonal_norm(&b) <= DIAGONAL_TOLERANCE;
            real &= [&a, &b, &c].iter().all(|m| m.iter().all(|z| z.im == 0.0));
        }
        self.diagonal_b = Some(diagonal);
        Ok(Validation {
            start,
            end,
            samples: grid.len(),
            diagonal_b: diagonal,
            real,
        })
    }
}

fn check_hermitian(name: MatrixName, m: &CMat, t: f64) -> Result<()> {
    let tol = VALIDATION_TOLERANCE * linalg::frob(m).max(1.0);
    let n = m.nrows();
    for row in 0..n {
        for col in row..n {
            let defect = (m[(row, col)] - m[(col, row)].conj()).norm();
            if defect > tol {
                return Err(Error::HermitianViolation {
                    matrix: name,
                    row,
                    col,
                    t,
                    defect,
                });
            }
        }
    }
    Ok(())
}

/// Reads, parses and validates a system file over `[t0, t0 + span]`, or over
/// `span_override` when given.
pub fn load_system(path: impl AsRef<Path>, span_override: Option<(f64, f64)>) -> Result<SystemSpec> {
    let text = std::fs::read_to_string(path)?;
    load_system_str(&text, span_override)
}

/// Default validation span length when none is requested.
pub const DEFAULT_VALIDATION_SPAN: f64 = 10.0;

pub fn load_system_str(text: &str, span_override: Option<(f64, f64)>) -> Result<SystemSpec> {
    let mut spec = SystemSpec::parse_json(text)?;
    let (start, end) = span_override.unwrap_or((spec.t0, spec.t0 + DEFAULT_VALIDATION_SPAN));
    spec.validate(start, end)?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    const HARMONIC: &str = r#"{
        "name": "harmonic",
        "n": 2, "t0": 0,
        "A": [["0", "0"], ["0", "0"]],
        "B": [["1", "0"], ["0", "1"]],
        "C": [["-1", "0"], ["0", "-1"]]
    }"#;

    #[test]
    fn harmonic_file_loads_with_diagonal_b() {
        let spec = load_system_str(HARMONIC, None).unwrap();
        assert_eq!(spec.n(), 2);
        assert_eq!(spec.diagonal_b(), Some(true));
        assert_eq!(spec.name.as_deref(), Some("harmonic"));
        let (_, _, c) = spec.eval(1.0).unwrap();
        assert_eq!(c, linalg::real_diag(&[-1.0, -1.0]));
    }

    #[test]
    fn non_hermitian_c_is_rejected_with_location() {
        let text = HARMONIC.replace(r#"[["-1", "0"], ["0", "-1"]]"#, r#"[["-1", "1"], ["0", "-1"]]"#);
        match load_system_str(&text, None) {
            Err(Error::HermitianViolation { matrix, row, col, .. }) => {
                assert_eq!((matrix, row, col), (MatrixName::C, 0, 1));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_entry_reports_coordinates() {
        let text = HARMONIC.replace(r#"[["1", "0"], ["0", "1"]]"#, r#"[["1", "0"], ["0", "2*+t"]]"#);
        match load_system_str(&text, None) {
            Err(Error::EntryParse { matrix, row, col, source, .. }) => {
                assert_eq!((matrix, row, col), (MatrixName::B, 1, 1));
                assert_eq!(source.offset, 2);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn dimension_mismatch() {
        let text = HARMONIC.replace(r#""A": [["0", "0"], ["0", "0"]]"#, r#""A": [["0", "0"], ["0"]]"#);
        assert!(matches!(load_system_str(&text, None), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn complex_entries_and_conjugate_symmetry() {
        let text = r#"{
            "n": 2, "t0": 0,
            "A": [["0", "0"], ["0", "0"]],
            "B": [["2", ["0", "t"]], [["0", "-t"], "2"]],
            "C": [["-1", "0"], ["0", "-1"]]
        }"#;
        let spec = load_system_str(text, Some((0.0, 1.0))).unwrap();
        assert_eq!(spec.diagonal_b(), Some(false));
        let (_, b, _) = spec.eval(0.5).unwrap();
        assert_eq!(b[(0, 1)], Complex64::new(0.0, 0.5));
    }

    #[test]
    fn evaluation_errors_carry_entry_and_time() {
        let text = HARMONIC.replace(r#"[["-1", "0"], ["0", "-1"]]"#, r#"[["-1", "0"], ["0", "1/(t-1)"]]"#);
        let spec = SystemSpec::parse_json(&text).unwrap();
        match spec.eval(1.0) {
            Err(Error::EntryEval { matrix, row, col, t, .. }) => {
                assert_eq!((matrix, row, col, t), (MatrixName::C, 1, 1, 1.0));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_fields_and_bad_json_are_rejected() {
        assert!(matches!(SystemSpec::parse_json("{"), Err(Error::Json(_))));
        let text = HARMONIC.replace(r#""n": 2"#, r#""n": 2, "extra": 1"#);
        assert!(matches!(SystemSpec::parse_json(&text), Err(Error::Json(_))));
    }
}
