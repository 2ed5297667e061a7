//! Sub-Finsler energies `F = L²` and their fundamental tensor
//! `g_ab = ½ ∂²F/∂v^a∂v^b`.

use crate::chart::{Chart, FiberPoint};
use crate::error::{Error, Result};
use crate::expr::{BinOp, Bindings, Expr, VarScope};
use crate::jets::{Coord, Jet, JetContext, Scalar};
use crate::linalg::{self, Matrix};

/// Euler-residual threshold for accepting a sample as 2-homogeneous.
pub const EULER_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct FinslerMetric {
    m: usize,
    energy: Expr,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricAtPoint {
    pub g_lower: Matrix<f64>,
    pub g_upper: Matrix<f64>,
    pub f_value: f64,
    pub f_grad_fiber: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleDiagnostic {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub euler_residual: f64,
    pub positive: bool,
    pub definite: bool,
    pub min_eigenvalue: f64,
    pub error: Option<String>,
}

impl SampleDiagnostic {
    pub fn passed(&self) -> bool {
        self.error.is_none() && self.positive && self.definite && self.euler_residual <= EULER_TOL
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricDiagnostics {
    pub samples: Vec<SampleDiagnostic>,
}

impl MetricDiagnostics {
    pub fn passed(&self) -> bool {
        !self.samples.is_empty() && self.samples.iter().all(SampleDiagnostic::passed)
    }

    pub fn max_euler_residual(&self) -> f64 {
        self.samples.iter().map(|s| s.euler_residual).fold(0.0, f64::max)
    }
}

impl FinslerMetric {
    pub fn new(m: usize, energy: Expr, label: impl Into<String>) -> Result<Self> {
        let n = 2 * m + 1;
        if let Some(bad) = energy.free_vars().into_iter().find(|c| match c {
            Coord::Base(i) => *i >= n,
            Coord::Fiber(a) => *a >= 2 * m,
            Coord::Param => true,
        }) {
            return Err(Error::InvalidInput(format!("energy mentions {bad}, outside x1..x{n}, v1..v{}", 2 * m)));
        }
        Ok(FinslerMetric { m, energy, label: label.into() })
    }

    /// Parses an energy; with `is_l` the text is the norm `L` and is squared.
    pub fn parse(m: usize, text: &str, label: impl Into<String>, is_l: bool) -> Result<Self> {
        let mut e = Expr::parse(text, &VarScope::total(m))?;
        if is_l {
            e = Expr::Bin(BinOp::Pow, Box::new(e), Box::new(Expr::Num(2.0)));
        }
        FinslerMetric::new(m, e, label)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn energy(&self) -> &Expr {
        &self.energy
    }

    pub fn eval<T: Scalar>(&self, x: &[T], v: &[T]) -> Result<T> {
        Ok(self.energy.evaluate(&Bindings::total(x, v))?)
    }

    fn check(&self, chart: &Chart, p: &FiberPoint) -> Result<()> {
        if chart.m() != self.m || p.m() != self.m {
            return Err(Error::ShapeMismatch(format!("metric m = {}, chart m = {}, point m = {}", self.m, chart.m(), p.m())));
        }
        Ok(())
    }

    /// Fundamental tensor, its inverse, F and ∂F/∂v at `p`.
    pub fn metric_at(&self, chart: &Chart, p: &FiberPoint) -> Result<MetricAtPoint> {
        self.check(chart, p)?;
        let dim = 2 * self.m;
        let ctx = JetContext::new((0..dim).map(Coord::Fiber).collect());
        let x: Vec<Jet<f64>> = p.x().iter().map(|&c| Jet::constant(c)).collect();
        let v = (0..dim).map(|a| Ok(Jet::seed(&ctx, a, p.v()[a], 2)?)).collect::<Result<Vec<_>>>()?;
        let f = self.eval(&x, &v)?;
        let f_value = f.value();
        let f_grad_fiber = (0..dim).map(|a| Ok(f.partial(&[a])?)).collect::<Result<Vec<f64>>>()?;
        let mut g_lower = vec![vec![0.0; dim]; dim];
        for a in 0..dim {
            for b in 0..dim {
                g_lower[a][b] = 0.5 * f.partial(&[a, b])?;
            }
        }
        if !f_value.is_finite() || g_lower.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite(format!("energy at x = {:?}, v = {:?}", p.x(), p.v())));
        }
        let degenerate = || Error::MetricDegenerate {
            x: p.x().to_vec(),
            v: p.v().to_vec(),
            min_eigenvalue: linalg::min_symmetric_eigenvalue(&g_lower),
        };
        if !linalg::is_positive_definite(&g_lower) {
            return Err(degenerate());
        }
        let g_upper = linalg::invert(&g_lower, 1e-14).map_err(|_| degenerate())?;
        Ok(MetricAtPoint { g_lower, g_upper, f_value, f_grad_fiber })
    }

    /// Checks 2-homogeneity, positivity and definiteness at each sample.
    pub fn validate_metric(&self, chart: &Chart, samples: &[FiberPoint]) -> MetricDiagnostics {
        let samples = samples
            .iter()
            .map(|p| match self.metric_at(chart, p) {
                Ok(at) => {
                    let euler: f64 = p.v().iter().zip(&at.f_grad_fiber).map(|(v, d)| v * d).sum();
                    SampleDiagnostic {
                        x: p.x().to_vec(),
                        v: p.v().to_vec(),
                        euler_residual: (euler - 2.0 * at.f_value).abs() / at.f_value.abs().max(1.0),
                        positive: at.f_value > 0.0,
                        definite: true,
                        min_eigenvalue: linalg::min_symmetric_eigenvalue(&at.g_lower),
                        error: None,
                    }
                }
                Err(e) => {
                    let min_eigenvalue = match &e {
                        Error::MetricDegenerate { min_eigenvalue, .. } => *min_eigenvalue,
                        _ => f64::NAN,
                    };
                    let degenerate = matches!(e, Error::MetricDegenerate { .. });
                    SampleDiagnostic {
                        x: p.x().to_vec(),
                        v: p.v().to_vec(),
                        euler_residual: self.euler_residual_plain(p).unwrap_or(f64::INFINITY),
                        positive: self.eval(p.x(), p.v()).is_ok_and(|f| f > 0.0),
                        definite: false,
                        min_eigenvalue,
                        error: (!degenerate).then(|| e.to_string()),
                    }
                }
            })
            .collect();
        MetricDiagnostics { samples }
    }

    fn euler_residual_plain(&self, p: &FiberPoint) -> Result<f64> {
        let dim = 2 * self.m;
        let ctx = JetContext::new((0..dim).map(Coord::Fiber).collect());
        let x: Vec<Jet<f64>> = p.x().iter().map(|&c| Jet::constant(c)).collect();
        let v = (0..dim).map(|a| Ok(Jet::seed(&ctx, a, p.v()[a], 1)?)).collect::<Result<Vec<_>>>()?;
        let f = self.eval(&x, &v)?;
        let euler: f64 = (0..dim).map(|a| Ok(p.v()[a] * f.partial(&[a])?)).sum::<Result<f64>>()?;
        Ok((euler - 2.0 * f.value()).abs() / f.value().abs().max(1.0))
    }
}
