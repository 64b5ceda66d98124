//! Hermitian matrix calculus along time grids.
//!
//! Square roots, pseudoinverses, derivatives of matrix paths, continuously
//! tracked unitary diagonalizations `B(t) = U*(t)·diag(b(t))·U(t)`, and the
//! range-condition solver for `√B·X·M = M` with `M = A√B − (√B)'`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::func::MatrixFn;
use crate::linalg::{self, CMat};

/// Relative band for accepting slightly negative eigenvalues as zero.
pub const PSD_TOLERANCE: f64 = 1e-10;
/// Singular values below this fraction of the largest are treated as zero.
pub const PINV_RCOND: f64 = 1e-12;
/// Relative residual bound for declaring the range condition satisfied.
pub const EQ12_TOLERANCE: f64 = 1e-9;
/// Continuity defect beyond which an eigen-path is rejected.
pub const MAX_CONTINUITY_DEFECT: f64 = 0.5;

/// A matrix equal to its conjugate transpose up to `1e-12·max(1, ‖M‖_F)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix(CMat);

impl HermitianMatrix {
    pub const TOLERANCE: f64 = 1e-12;

    pub fn new(m: CMat) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                what: "Hermitian matrix columns".into(),
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        let defect = linalg::hermitian_defect(&m);
        if defect > Self::TOLERANCE * linalg::frob(&m).max(1.0) {
            return Err(Error::NotHermitian { defect });
        }
        Ok(HermitianMatrix(m))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.0
    }

    pub fn into_matrix(self) -> CMat {
        self.0
    }
}

/// Positive semidefinite square root. Eigenvalues in `[-tol, 0)` with
/// `tol = 1e-10·‖B‖_F` are clamped to zero.
pub fn hermitian_sqrt(b: &HermitianMatrix) -> Result<HermitianMatrix> {
    let (values, vectors) = linalg::hermitian_eigen(b.matrix());
    let tolerance = PSD_TOLERANCE * linalg::frob(b.matrix());
    let mut roots = Vec::with_capacity(values.len());
    for &v in &values {
        if v < -tolerance {
            return Err(Error::NotPositiveSemidefinite {
                eigenvalue: v,
                tolerance,
            });
        }
        roots.push(v.max(0.0).sqrt());
    }
    Ok(HermitianMatrix(compose(&vectors, &roots)))
}

/// `V·diag(d)·V*`, symmetrized.
fn compose(vectors: &CMat, diag: &[f64]) -> CMat {
    let mut scaled = vectors.clone();
    for (j, &d) in diag.iter().enumerate() {
        scaled.column_mut(j).scale_mut(d);
    }
    linalg::hermitian_part(&(scaled * vectors.adjoint()))
}

/// Moore–Penrose pseudoinverse via SVD.
pub fn pseudoinverse(m: &CMat) -> CMat {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return CMat::zeros(cols, rows);
    }
    let svd = m.clone().svd(true, true);
    let (Some(u), Some(v_t)) = (svd.u, svd.v_t) else {
        unreachable!("SVD requested with both factors");
    };
    let sigma_max = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let cutoff = PINV_RCOND * sigma_max;
    let k = svd.singular_values.len();
    let mut inv_sigma = DMatrix::<Complex64>::zeros(k, k);
    for i in 0..k {
        let s = svd.singular_values[i];
        if s > cutoff && s > 0.0 {
            inv_sigma[(i, i)] = linalg::re(1.0 / s);
        }
    }
    v_t.adjoint() * inv_sigma * u.adjoint()
}

/// Central-difference step used for every numerical time derivative.
pub fn fd_step(t: f64) -> f64 {
    t.abs().max(1.0) * f64::EPSILON.cbrt()
}

/// Scalar functions with an analytic divided difference, for the
/// Daleckii–Krein derivative of `f(B(t))`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectralFunction {
    Sqrt,
}

impl SpectralFunction {
    /// `(f(x) − f(y)) / (x − y)`, continuous across `x = y`. `None` where the
    /// derivative is unbounded.
    fn divided_difference(self, x: f64, y: f64) -> Option<f64> {
        match self {
            SpectralFunction::Sqrt => {
                let s = x.max(0.0).sqrt() + y.max(0.0).sqrt();
                (s > 0.0).then(|| 1.0 / s)
            }
        }
    }
}

/// How [`MatrixPath::derivative`] differentiates.
#[derive(Debug, Clone)]
pub enum DerivativeRule {
    /// Central difference of the path evaluator.
    FiniteDifference,
    /// The path is `f(base(t))`; differentiate through the eigen-decomposition
    /// of `base` with divided differences of `f`.
    DaleckiiKrein {
        base: MatrixFn,
        function: SpectralFunction,
    },
    /// The path is `U*(t)` of an eigen-path; `t ± h` are aligned to the frame
    /// at `t` so the difference is taken within a single smooth gauge.
    EigenFrame(Box<EigenPath>),
}

/// Selects the derivative rule for square-root paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize)]
pub enum DerivativeMethod {
    #[default]
    FiniteDifference,
    DaleckiiKrein,
}

/// A matrix-valued function sampled on a strictly increasing grid.
#[derive(Debug, Clone)]
pub struct MatrixPath {
    grid: Vec<f64>,
    values: Vec<CMat>,
    evaluator: MatrixFn,
    interpolated: bool,
    rule: DerivativeRule,
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 2 {
        return Err(Error::InvalidInput("a grid needs at least two points".into()));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) || grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidInput("grid must be finite and strictly increasing".into()));
    }
    Ok(())
}

/// `n` equally spaced points covering `[a, b]`.
pub fn uniform_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    let n = n.max(2);
    let step = (b - a) / (n - 1) as f64;
    (0..n)
        .map(|k| if k + 1 == n { b } else { a + step * k as f64 })
        .collect()
}

impl MatrixPath {
    /// Samples an analytic rule on `grid`; off-grid values are recomputed.
    pub fn from_fn(grid: Vec<f64>, evaluator: MatrixFn) -> Result<Self> {
        check_grid(&grid)?;
        let values = grid
            .iter()
            .map(|&t| evaluator.eval(t))
            .collect::<Result<Vec<_>>>()?;
        let n = values[0].nrows();
        if let Some(bad) = values.iter().find(|v| v.nrows() != n || v.ncols() != n) {
            return Err(Error::DimensionMismatch {
                what: "path sample".into(),
                expected: n,
                found: bad.nrows(),
            });
        }
        Ok(MatrixPath {
            grid,
            values,
            evaluator,
            interpolated: false,
            rule: DerivativeRule::FiniteDifference,
        })
    }

    /// Path known only through samples; evaluated by piecewise cubic Hermite
    /// interpolation with three-point slopes.
    pub fn from_samples(grid: Vec<f64>, values: Vec<CMat>) -> Result<Self> {
        check_grid(&grid)?;
        if grid.len() != values.len() {
            return Err(Error::DimensionMismatch {
                what: "path samples".into(),
                expected: grid.len(),
                found: values.len(),
            });
        }
        let g = grid.clone();
        let v = values.clone();
        let evaluator = MatrixFn::new(move |t| Ok(cubic_hermite(&g, &v, t)));
        Ok(MatrixPath {
            grid,
            values,
            evaluator,
            interpolated: true,
            rule: DerivativeRule::FiniteDifference,
        })
    }

    /// `√B(t)` on `grid`.
    pub fn sqrt_of(b: &MatrixFn, grid: Vec<f64>, method: DerivativeMethod) -> Result<Self> {
        let base = b.clone();
        let evaluator = MatrixFn::new(move |t| {
            let bt = HermitianMatrix::new(linalg::hermitian_part(&base.eval(t)?))?;
            Ok(hermitian_sqrt(&bt)?.into_matrix())
        });
        let mut path = MatrixPath::from_fn(grid, evaluator)?;
        if method == DerivativeMethod::DaleckiiKrein {
            path.rule = DerivativeRule::DaleckiiKrein {
                base: b.clone(),
                function: SpectralFunction::Sqrt,
            };
        }
        Ok(path)
    }

    pub fn with_rule(mut self, rule: DerivativeRule) -> Self {
        self.rule = rule;
        self
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[CMat] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values[0].nrows()
    }

    pub fn is_interpolated(&self) -> bool {
        self.interpolated
    }

    pub fn rule(&self) -> &DerivativeRule {
        &self.rule
    }

    pub fn span(&self) -> (f64, f64) {
        (self.grid[0], *self.grid.last().unwrap())
    }

    pub fn evaluator(&self) -> &MatrixFn {
        &self.evaluator
    }

    pub fn eval(&self, t: f64) -> Result<CMat> {
        self.evaluator.eval(t)
    }

    /// Time derivative at an interior point `t` (see [`path_derivative`]).
    pub fn derivative(&self, t: f64) -> Result<CMat> {
        let h = fd_step(t);
        let (start, end) = self.span();
        if t - h < start || t + h > end {
            return Err(Error::OutOfDomain {
                t,
                step: h,
                start,
                end,
            });
        }
        match &self.rule {
            DerivativeRule::FiniteDifference => central_difference(&self.evaluator, t),
            DerivativeRule::DaleckiiKrein { base, function } => {
                let b = base.eval(t)?;
                let b_dot = central_difference(base, t)?;
                Ok(daleckii_krein(&b, &b_dot, *function))
            }
            DerivativeRule::EigenFrame(ep) => {
                let (u, _) = ep.eval(t)?;
                let frame = u.adjoint();
                let (_, plus) = ep.aligned(t + h, &frame)?;
                let (_, minus) = ep.aligned(t - h, &frame)?;
                Ok((plus - minus).unscale(2.0 * h))
            }
        }
    }
}

/// Derivative of a matrix path at `t`: central difference with step
/// `max(1, |t|)·ε^(1/3)`, or the Daleckii–Krein formula when the path is a
/// spectral function of another path.
pub fn path_derivative(path: &MatrixPath, t: f64) -> Result<CMat> {
    path.derivative(t)
}

pub fn central_difference(f: &MatrixFn, t: f64) -> Result<CMat> {
    let h = fd_step(t);
    let plus = f.eval(t + h)?;
    let minus = f.eval(t - h)?;
    Ok((plus - minus).unscale(2.0 * h))
}

/// `d/dt f(B) = V·(Δf ∘ (V*·B'·V))·V*` where `B = V·Λ·V*`.
fn daleckii_krein(b: &CMat, b_dot: &CMat, function: SpectralFunction) -> CMat {
    let (lambda, v) = linalg::hermitian_eigen(b);
    let mut w = v.adjoint() * b_dot * &v;
    let n = lambda.len();
    for i in 0..n {
        for j in 0..n {
            // an unbounded divided difference means f(B) is not differentiable
            // along this direction; the entry is dropped
            let dd = function.divided_difference(lambda[i], lambda[j]).unwrap_or(0.0);
            w[(i, j)] *= dd;
        }
    }
    &v * w * v.adjoint()
}

fn cubic_hermite(grid: &[f64], values: &[CMat], t: f64) -> CMat {
    let n = grid.len();
    let k = match grid.binary_search_by(|x| x.total_cmp(&t)) {
        Ok(k) => return values[k].clone(),
        Err(0) => 0,
        Err(k) if k >= n => n - 2,
        Err(k) => k - 1,
    };
    let slope = |i: usize| -> CMat {
        if i == 0 {
            (&values[1] - &values[0]).unscale(grid[1] - grid[0])
        } else if i == n - 1 {
            (&values[n - 1] - &values[n - 2]).unscale(grid[n - 1] - grid[n - 2])
        } else {
            // three-point derivative on a non-uniform grid
            let h0 = grid[i] - grid[i - 1];
            let h1 = grid[i + 1] - grid[i];
            let d0 = (&values[i] - &values[i - 1]).unscale(h0);
            let d1 = (&values[i + 1] - &values[i]).unscale(h1);
            (d0.scale(h1) + d1.scale(h0)).unscale(h0 + h1)
        }
    };
    let h = grid[k + 1] - grid[k];
    let s = (t - grid[k]) / h;
    let h00 = 2.0 * s.powi(3) - 3.0 * s * s + 1.0;
    let h10 = s.powi(3) - 2.0 * s * s + s;
    let h01 = -2.0 * s.powi(3) + 3.0 * s * s;
    let h11 = s.powi(3) - s * s;
    values[k].scale(h00) + slope(k).scale(h10 * h) + values[k + 1].scale(h01) + slope(k + 1).scale(h11 * h)
}

/// Continuously tracked diagonalization `B(t) = U*(t)·diag(b(t))·U(t)`.
#[derive(Debug, Clone)]
pub struct EigenPath {
    grid: Vec<f64>,
    unitary: Vec<CMat>,
    eigenvalues: Vec<Vec<f64>>,
    continuity_defect: f64,
    source: MatrixFn,
}

impl EigenPath {
    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    /// `U(t_k)` per grid sample.
    pub fn unitaries(&self) -> &[CMat] {
        &self.unitary
    }

    /// `(b_1(t_k), …, b_n(t_k))` per grid sample, in tracked order.
    pub fn eigenvalues(&self) -> &[Vec<f64>] {
        &self.eigenvalues
    }

    pub fn continuity_defect(&self) -> f64 {
        self.continuity_defect
    }

    pub fn dim(&self) -> usize {
        self.unitary[0].nrows()
    }

    /// Recomputes the decomposition at `t`, aligned to the nearest sample.
    pub fn eval(&self, t: f64) -> Result<(CMat, Vec<f64>)> {
        let k = nearest_index(&self.grid, t);
        let reference = self.unitary[k].adjoint();
        let (lambda, v) = self.aligned(t, &reference)?;
        Ok((v.adjoint(), lambda))
    }

    /// Eigenvalues and eigenvector columns at `t`, matched to `reference`.
    fn aligned(&self, t: f64, reference: &CMat) -> Result<(Vec<f64>, CMat)> {
        let b = self.source.eval(t)?;
        let (lambda, v) = linalg::hermitian_eigen(&b);
        Ok(align(reference, lambda, v))
    }

    /// The path `t ↦ U*(t)`, evaluated by re-computation and differentiated
    /// by central differences within the frame at `t`. Its domain extends
    /// [`domain_padding`] beyond the sample grid.
    pub fn adjoint_path(&self) -> Result<MatrixPath> {
        let this = self.clone();
        let evaluator = MatrixFn::new(move |t| Ok(this.eval(t)?.0.adjoint()));
        let grid = padded_grid(&self.grid);
        let mut values = Vec::with_capacity(grid.len());
        values.push(self.eval(grid[0])?.0.adjoint());
        values.extend(self.unitary.iter().map(|u| u.adjoint()));
        values.push(self.eval(*grid.last().unwrap())?.0.adjoint());
        Ok(MatrixPath {
            grid,
            values,
            evaluator,
            interpolated: false,
            rule: DerivativeRule::EigenFrame(Box::new(self.clone())),
        })
    }
}

fn nearest_index(grid: &[f64], t: f64) -> usize {
    match grid.binary_search_by(|x| x.total_cmp(&t)) {
        Ok(k) => k,
        Err(0) => 0,
        Err(k) if k >= grid.len() => grid.len() - 1,
        Err(k) => {
            if t - grid[k - 1] <= grid[k] - t {
                k - 1
            } else {
                k
            }
        }
    }
}

/// Eigen-decomposition of `b(t)` on `grid` with eigenvectors matched across
/// samples (greedy maximum overlap, then phase/subspace alignment).
pub fn eigen_path(b: &MatrixFn, grid: &[f64]) -> Result<EigenPath> {
    check_grid(grid)?;
    let mut unitary = Vec::with_capacity(grid.len());
    let mut eigenvalues = Vec::with_capacity(grid.len());
    let mut reference: Option<CMat> = None;
    let mut defect: f64 = 0.0;
    let mut worst_t = grid[0];
    for &t in grid {
        let bt = b.eval(t)?;
        let (lambda, mut v) = linalg::hermitian_eigen(&bt);
        let (lambda, v) = match &reference {
            Some(r) => align(r, lambda, v),
            None => {
                normalize_phases(&mut v);
                let id = linalg::identity(v.nrows());
                align(&id, lambda, v)
            }
        };
        if let Some(r) = &reference {
            let jump = (&v - r).norm();
            if jump > defect {
                defect = jump;
                worst_t = t;
            }
        }
        unitary.push(v.adjoint());
        eigenvalues.push(lambda);
        reference = Some(v);
    }
    if defect > MAX_CONTINUITY_DEFECT {
        return Err(Error::GridTooCoarse { defect, t: worst_t });
    }
    Ok(EigenPath {
        grid: grid.to_vec(),
        unitary,
        eigenvalues,
        continuity_defect: defect,
        source: b.clone(),
    })
}

/// Makes the first non-negligible component of each column real positive.
fn normalize_phases(v: &mut CMat) {
    for mut col in v.column_iter_mut() {
        if let Some(z) = col.iter().copied().find(|z| z.norm() > 1e-8) {
            let phase = z.conj() / z.norm();
            for x in col.iter_mut() {
                *x *= phase;
            }
        }
    }
}

/// Permutes and rotates the eigenvectors `v` (columns) so they best match
/// `reference`; eigenvalues follow their vectors.
fn align(reference: &CMat, lambda: Vec<f64>, v: CMat) -> (Vec<f64>, CMat) {
    let n = lambda.len();
    let overlap = reference.adjoint() * &v;
    let mut pairs: Vec<(usize, usize)> = (0..n).flat_map(|k| (0..n).map(move |l| (k, l))).collect();
    pairs.sort_by(|p, q| overlap[(q.0, q.1)].norm().total_cmp(&overlap[(p.0, p.1)].norm()));
    let mut slot_of = vec![usize::MAX; n];
    let mut taken = vec![false; n];
    for (k, l) in pairs {
        if slot_of[k] == usize::MAX && !taken[l] {
            slot_of[k] = l;
            taken[l] = true;
        }
    }
    let mut w = CMat::zeros(n, n);
    let mut values = vec![0.0; n];
    for k in 0..n {
        w.set_column(k, &v.column(slot_of[k]));
        values[k] = lambda[slot_of[k]];
    }

    // clusters of numerically equal eigenvalues are rotated as a block
    let scale = values.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let tol = 1e-12 * scale;
    let mut cluster = vec![usize::MAX; n];
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for k in 0..n {
        if cluster[k] != usize::MAX {
            continue;
        }
        let id = clusters.len();
        let mut members = vec![k];
        cluster[k] = id;
        let mut i = 0;
        while i < members.len() {
            let a = members[i];
            for b in 0..n {
                if cluster[b] == usize::MAX && (values[a] - values[b]).abs() <= tol {
                    cluster[b] = id;
                    members.push(b);
                }
            }
            i += 1;
        }
        members.sort_unstable();
        clusters.push(members);
    }

    for members in clusters {
        let m = members.len();
        let block = CMat::from_fn(m, m, |i, j| {
            w.column(members[i]).dotc(&reference.column(members[j]))
        });
        let rotation = if m == 1 {
            let z = block[(0, 0)];
            if z.norm() > 1e-300 {
                CMat::from_element(1, 1, z / z.norm())
            } else {
                CMat::identity(1, 1)
            }
        } else {
            polar_factor(&block)
        };
        let cols = CMat::from_fn(n, m, |r, j| w[(r, members[j])]);
        let rotated = cols * rotation;
        for (j, &k) in members.iter().enumerate() {
            w.set_column(k, &rotated.column(j));
        }
    }
    (values, w)
}

/// Unitary polar factor `P·Q*` of `M = P·Σ·Q*`.
fn polar_factor(m: &CMat) -> CMat {
    let svd = m.clone().svd(true, true);
    match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => u * v_t,
        _ => CMat::identity(m.nrows(), m.ncols()),
    }
}

/// Range-condition solution per time.
#[derive(Debug, Clone)]
pub struct Eq12Terms {
    pub sqrt_b: CMat,
    pub sqrt_b_dot: CMat,
    /// `M = A·√B − (√B)'`.
    pub m: CMat,
    /// `F = (√B)⁺`.
    pub f: CMat,
    /// `‖√B·F·M − M‖_F`.
    pub residual: f64,
    pub solvable: bool,
}

#[derive(Debug, Clone)]
pub struct Eq12Solution {
    grid: Vec<f64>,
    solvable: Vec<bool>,
    f_values: Vec<CMat>,
    residual: Vec<f64>,
    a: MatrixFn,
    sqrt_b: MatrixPath,
}

impl Eq12Solution {
    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn solvable(&self) -> &[bool] {
        &self.solvable
    }

    pub fn f_values(&self) -> &[CMat] {
        &self.f_values
    }

    pub fn residuals(&self) -> &[f64] {
        &self.residual
    }

    pub fn sqrt_b(&self) -> &MatrixPath {
        &self.sqrt_b
    }

    pub fn all_solvable(&self) -> bool {
        self.solvable.iter().all(|&s| s)
    }

    pub fn solvable_count(&self) -> usize {
        self.solvable.iter().filter(|&&s| s).count()
    }

    pub fn first_unsolvable(&self) -> Option<(f64, f64)> {
        self.solvable
            .iter()
            .position(|&s| !s)
            .map(|k| (self.grid[k], self.residual[k]))
    }

    pub fn max_residual(&self) -> f64 {
        self.residual.iter().copied().fold(0.0, f64::max)
    }

    /// All terms at an arbitrary `t` inside the grid span.
    pub fn terms_at(&self, t: f64) -> Result<Eq12Terms> {
        eq12_terms(&self.a, &self.sqrt_b, t)
    }
}

fn eq12_terms(a: &MatrixFn, sqrt_b: &MatrixPath, t: f64) -> Result<Eq12Terms> {
    let s = sqrt_b.eval(t)?;
    let s_dot = sqrt_b.derivative(t)?;
    let m = a.eval(t)? * &s - &s_dot;
    let f = pseudoinverse(&s);
    let residual = (&s * &f * &m - &m).norm();
    let solvable = residual <= EQ12_TOLERANCE * m.norm().max(1.0);
    Ok(Eq12Terms {
        sqrt_b: s,
        sqrt_b_dot: s_dot,
        m,
        f,
        residual,
        solvable,
    })
}

/// Solves `√B·X·M = M` on `grid` with the canonical choice `X = (√B)⁺`.
///
/// The derivative of `√B` is taken by central differences, so `A` and `B` are
/// also evaluated up to [`domain_padding`] beyond either end of the grid.
pub fn solve_eq12(a: &MatrixFn, b: &MatrixFn, grid: &[f64], method: DerivativeMethod) -> Result<Eq12Solution> {
    check_grid(grid)?;
    let sqrt_b = MatrixPath::sqrt_of(b, padded_grid(grid), method)?;
    let mut solvable = Vec::with_capacity(grid.len());
    let mut f_values = Vec::with_capacity(grid.len());
    let mut residual = Vec::with_capacity(grid.len());
    for &t in grid {
        let terms = eq12_terms(a, &sqrt_b, t)?;
        solvable.push(terms.solvable);
        f_values.push(terms.f);
        residual.push(terms.residual);
    }
    Ok(Eq12Solution {
        grid: grid.to_vec(),
        solvable,
        f_values,
        residual,
        a: a.clone(),
        sqrt_b,
    })
}

/// Distance beyond `[a, b]` needed to differentiate at the endpoints.
pub fn domain_padding(a: f64, b: f64) -> f64 {
    2.0 * fd_step(a.abs().max(b.abs()))
}

/// `grid` extended by one point of [`domain_padding`] on each side.
pub fn padded_grid(grid: &[f64]) -> Vec<f64> {
    let first = grid[0];
    let last = *grid.last().unwrap();
    let pad = domain_padding(first, last);
    let mut out = Vec::with_capacity(grid.len() + 2);
    out.push(first - pad);
    out.extend_from_slice(grid);
    out.push(last + pad);
    out
}
