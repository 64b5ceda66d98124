//! Adaptive Gauss–Kronrod quadrature with error estimates.
//!
//! Each panel is evaluated with the 15-point Kronrod rule; the embedded
//! 7-point Gauss rule supplies the error estimate `|K15 - G7|`, floored by a
//! round-off term. Panels are bisected largest-error-first until the summed
//! estimate meets the tolerance.

/// Kronrod abscissae on [-1, 1], nonnegative half.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];

/// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_panels: usize,
    /// Number of equal panels to start from.
    pub initial_panels: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions {
            abs_tol: 1e-9,
            rel_tol: 0.0,
            max_panels: 2000,
            initial_panels: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Panel {
    pub a: f64,
    pub b: f64,
    pub value: f64,
    pub error: f64,
}

#[derive(Debug, Clone)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
    pub converged: bool,
    pub evaluations: usize,
    /// Final panels, sorted by left end.
    pub panels: Vec<Panel>,
}

/// One 15-point Kronrod panel: `(value, error estimate)`.
pub fn gk15<E>(f: &mut impl FnMut(f64) -> Result<f64, E>, a: f64, b: f64) -> Result<(f64, f64), E> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center)?;
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    let mut abs_sum = WGK[7] * fc.abs();
    for i in 0..7 {
        let dx = half * XGK[i];
        let f1 = f(center - dx)?;
        let f2 = f(center + dx)?;
        kronrod += WGK[i] * (f1 + f2);
        abs_sum += WGK[i] * (f1.abs() + f2.abs());
        if i % 2 == 1 {
            gauss += WG[i / 2] * (f1 + f2);
        }
    }
    let value = kronrod * half;
    let resabs = abs_sum * half.abs();
    let error = ((kronrod - gauss) * half)
        .abs()
        .max(50.0 * f64::EPSILON * resabs);
    Ok((value, error))
}

/// Adaptive integration of `f` over `[a, b]`.
pub fn integrate<E>(
    mut f: impl FnMut(f64) -> Result<f64, E>,
    a: f64,
    b: f64,
    opts: &QuadOptions,
) -> Result<Quadrature, E> {
    if a == b {
        return Ok(Quadrature {
            value: 0.0,
            error: 0.0,
            converged: true,
            evaluations: 0,
            panels: vec![],
        });
    }
    let pieces = opts.initial_panels.max(1);
    let width = (b - a) / pieces as f64;
    let mut panels = Vec::with_capacity(pieces);
    let mut evaluations = 0;
    for k in 0..pieces {
        let lo = a + width * k as f64;
        let hi = if k + 1 == pieces { b } else { a + width * (k + 1) as f64 };
        let (value, error) = gk15(&mut f, lo, hi)?;
        evaluations += 15;
        panels.push(Panel { a: lo, b: hi, value, error });
    }
    // panels narrower than this cannot be usefully bisected
    let min_width = 64.0 * f64::EPSILON * a.abs().max(b.abs()).max(1.0);
    let mut frozen = vec![false; panels.len()];
    let mut converged = false;
    loop {
        let value: f64 = panels.iter().map(|p| p.value).sum();
        let error: f64 = panels.iter().map(|p| p.error).sum();
        if error <= opts.abs_tol.max(opts.rel_tol * value.abs()) {
            converged = true;
            break;
        }
        if panels.len() >= opts.max_panels {
            break;
        }
        let worst = panels
            .iter()
            .enumerate()
            .filter(|(i, _)| !frozen[*i])
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .map(|(i, _)| i);
        let Some(i) = worst else { break };
        let p = panels[i];
        if (p.b - p.a).abs() < min_width {
            frozen[i] = true;
            continue;
        }
        let mid = 0.5 * (p.a + p.b);
        let (v1, e1) = gk15(&mut f, p.a, mid)?;
        let (v2, e2) = gk15(&mut f, mid, p.b)?;
        evaluations += 30;
        panels[i] = Panel { a: p.a, b: mid, value: v1, error: e1 };
        panels.insert(i + 1, Panel { a: mid, b: p.b, value: v2, error: e2 });
        frozen.insert(i + 1, false);
    }
    let value = panels.iter().map(|p| p.value).sum();
    let error = panels.iter().map(|p| p.error).sum();
    Ok(Quadrature {
        value,
        error,
        converged,
        evaluations,
        panels,
    })
}

/// Running integral `t ↦ ∫_a^t f` backed by an adaptive panel set.
///
/// Values at panel breakpoints are prefix sums; interior points add one
/// Kronrod panel from the preceding breakpoint.
pub struct Cumulative<F> {
    f: F,
    breaks: Vec<f64>,
    prefix: Vec<f64>,
    error: f64,
    converged: bool,
}

impl<F, E> Cumulative<F>
where
    F: Fn(f64) -> Result<f64, E>,
{
    pub fn build(f: F, a: f64, b: f64, opts: &QuadOptions) -> Result<Self, E> {
        let quad = integrate(&f, a, b, opts)?;
        let mut breaks = vec![a];
        let mut prefix = vec![0.0];
        for p in &quad.panels {
            breaks.push(p.b);
            prefix.push(prefix.last().unwrap() + p.value);
        }
        Ok(Cumulative {
            f,
            breaks,
            prefix,
            error: quad.error,
            converged: quad.converged,
        })
    }

    pub fn start(&self) -> f64 {
        self.breaks[0]
    }

    pub fn end(&self) -> f64 {
        *self.breaks.last().unwrap()
    }

    pub fn total(&self) -> f64 {
        *self.prefix.last().unwrap()
    }

    pub fn error(&self) -> f64 {
        self.error
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    /// `∫_a^t f`, with `t` clamped into the build interval.
    pub fn eval(&self, t: f64) -> Result<f64, E> {
        let t = t.clamp(self.start(), self.end());
        let i = match self.breaks.binary_search_by(|x| x.total_cmp(&t)) {
            Ok(i) => return Ok(self.prefix[i]),
            Err(i) => i - 1,
        };
        let mut f = |x| (self.f)(x);
        let (tail, _) = gk15(&mut f, self.breaks[i], t)?;
        Ok(self.prefix[i] + tail)
    }
}

/// Cumulative trapezoid rule on samples; first entry is zero.
pub fn cumulative_trapezoid(ts: &[f64], ys: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(ts.len());
    let mut acc = 0.0;
    for i in 0..ts.len() {
        if i > 0 {
            acc += 0.5 * (ts[i] - ts[i - 1]) * (ys[i] + ys[i - 1]);
        }
        out.push(acc);
    }
    out
}
