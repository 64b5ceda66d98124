//! Shared-ownership callables of time.

use std::fmt;
use std::sync::Arc;

use crate::error::Result;
use crate::expr::{self, Expr};
use crate::linalg::CMat;

/// Real-valued function of `t`.
#[derive(Clone)]
pub struct ScalarFn(Arc<dyn Fn(f64) -> Result<f64> + Send + Sync>);

impl ScalarFn {
    pub fn new(f: impl Fn(f64) -> Result<f64> + Send + Sync + 'static) -> Self {
        ScalarFn(Arc::new(f))
    }

    pub fn constant(c: f64) -> Self {
        ScalarFn::new(move |_| Ok(c))
    }

    pub fn from_expr(expr: Expr) -> Self {
        ScalarFn::new(move |t| Ok(expr.eval(t)?))
    }

    /// Parses `source` in the coefficient expression language.
    pub fn parse(source: &str) -> Result<Self> {
        Ok(ScalarFn::from_expr(expr::parse(source)?))
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        (self.0)(t)
    }
}

impl fmt::Debug for ScalarFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ScalarFn(..)")
    }
}

/// Complex matrix-valued function of `t`.
#[derive(Clone)]
pub struct MatrixFn(Arc<dyn Fn(f64) -> Result<CMat> + Send + Sync>);

impl MatrixFn {
    pub fn new(f: impl Fn(f64) -> Result<CMat> + Send + Sync + 'static) -> Self {
        MatrixFn(Arc::new(f))
    }

    pub fn constant(m: CMat) -> Self {
        MatrixFn::new(move |_| Ok(m.clone()))
    }

    pub fn eval(&self, t: f64) -> Result<CMat> {
        (self.0)(t)
    }
}

impl fmt::Debug for MatrixFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("MatrixFn(..)")
    }
}
