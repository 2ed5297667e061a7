//! Parallel transport of fiber vectors along parametrized curves.
//!
//! Writing `ẋ = u^a e_a + Θ ∂_n` with `Θ = ẋ^n + Γ_a ẋ^a`, the transported
//! vector solves `v̇^b = −G^b_a(x, v) u^a − Θ G^b_n(x, v)`. Interior mode
//! drops the second term and requires `Θ = 0` along the curve.

use std::io::Write;

use crate::chart::Chart;
use crate::connection::{Connection, Depth};
use crate::error::{Error, Result};
use crate::expr::{Bindings, Expr, VarScope};
use crate::jets::{Coord, Jet, JetContext};

/// Largest admissibility defect tolerated in interior mode.
pub const ADMISSIBILITY_TOL: f64 = 1e-8;

/// Transport stops once `F` drops below this fraction of its initial value.
pub const COLLAPSE_RATIO: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransportMode {
    Interior,
    Extended,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    components: Vec<Expr>,
    t_span: [f64; 2],
    samples: usize,
}

impl Curve {
    pub fn new(components: Vec<Expr>, t_span: [f64; 2], samples: usize) -> Result<Self> {
        if components.len() % 2 != 1 || components.len() < 3 {
            return Err(Error::ShapeMismatch(format!("a curve needs 2m + 1 components, got {}", components.len())));
        }
        if !(t_span[0].is_finite() && t_span[1].is_finite() && t_span[1] > t_span[0]) {
            return Err(Error::InvalidInput(format!("t_span must be finite and increasing, got {t_span:?}")));
        }
        if samples == 0 {
            return Err(Error::InvalidInput("samples must be positive".into()));
        }
        Ok(Curve { components, t_span, samples })
    }

    pub fn parse(components: &[&str], t_span: [f64; 2], samples: usize) -> Result<Self> {
        let scope = VarScope::curve();
        let exprs = components.iter().map(|c| Expr::parse(c, &scope)).collect::<std::result::Result<Vec<_>, _>>()?;
        Curve::new(exprs, t_span, samples)
    }

    pub fn n(&self) -> usize {
        self.components.len()
    }

    pub fn t_span(&self) -> [f64; 2] {
        self.t_span
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn with_samples(&self, samples: usize) -> Result<Self> {
        Curve::new(self.components.clone(), self.t_span, samples)
    }

    /// `(x(t), ẋ(t))`.
    pub fn position_velocity(&self, t: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let ctx = JetContext::new(vec![Coord::Param]);
        let tj = Jet::seed(&ctx, 0, t, 1)?;
        let mut x = Vec::with_capacity(self.n());
        let mut xd = Vec::with_capacity(self.n());
        for c in &self.components {
            let j = c.evaluate(&Bindings::param(&tj))?;
            x.push(*j.real());
            xd.push(j.partial(&[0])?);
        }
        Ok((x, xd))
    }

    fn check(&self, chart: &Chart) -> Result<()> {
        if self.n() != chart.n() {
            return Err(Error::ShapeMismatch(format!("curve has {} components, chart needs {}", self.n(), chart.n())));
        }
        Ok(())
    }
}

/// `(u, Θ)` with `ẋ = u^a e_a + Θ ∂_n`.
fn split_velocity(chart: &Chart, x: &[f64], xd: &[f64]) -> Result<(Vec<f64>, f64)> {
    let dim = 2 * chart.m();
    let gamma = chart.gamma_at(x)?;
    let theta = xd[dim] + (0..dim).map(|a| gamma[a] * xd[a]).sum::<f64>();
    Ok((xd[..dim].to_vec(), theta))
}

/// `Θ(ẋ(t)) = ẋ^n + Γ_a(x(t)) ẋ^a`.
pub fn admissibility_defect(chart: &Chart, curve: &Curve, t: f64) -> Result<f64> {
    curve.check(chart)?;
    let [t0, t1] = curve.t_span;
    if !(t0..=t1).contains(&t) {
        return Err(Error::InvalidInput(format!("t = {t} outside [{t0}, {t1}]")));
    }
    let (x, xd) = curve.position_velocity(t)?;
    Ok(split_velocity(chart, &x, &xd)?.1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceSample {
    pub t: f64,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransportResult {
    pub mode: TransportMode,
    pub trace: Vec<TraceSample>,
    /// `max |F − F(t0)| / F(t0)` over the trace.
    pub f_drift: f64,
    /// Largest `|Θ|` seen at the integrator's nodes.
    pub max_admissibility_defect: f64,
}

impl TransportResult {
    pub fn final_v(&self) -> &[f64] {
        &self.trace.last().expect("trace is never empty").v
    }

    /// CSV with header `t,x1,..,xn,v1,..,v2m,F`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let first = &self.trace[0];
        let mut header = vec!["t".to_string()];
        header.extend((1..=first.x.len()).map(|i| format!("x{i}")));
        header.extend((1..=first.v.len()).map(|i| format!("v{i}")));
        header.push("F".into());
        writeln!(w, "{}", header.join(","))?;
        for s in &self.trace {
            let row: Vec<String> = std::iter::once(s.t).chain(s.x.iter().copied()).chain(s.v.iter().copied()).chain([s.energy]).map(format_f64).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// 17 significant digits in scientific notation.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

struct Node {
    x: Vec<f64>,
    u: Vec<f64>,
    theta: f64,
}

/// Transports `v0` along `curve` with `curve.samples()` classical RK4 steps.
pub fn transport(conn: &Connection, curve: &Curve, v0: &[f64], mode: TransportMode) -> Result<TransportResult> {
    let chart = conn.chart();
    curve.check(chart)?;
    let dim = conn.dim();
    if v0.len() != dim {
        return Err(Error::ShapeMismatch(format!("v0 needs {dim} components, got {}", v0.len())));
    }
    if v0.iter().all(|&c| c == 0.0) || v0.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidInput(format!("v0 must be finite and nonzero, got {v0:?}")));
    }
    let [t0, t1] = curve.t_span;
    let steps = curve.samples;
    let h = (t1 - t0) / steps as f64;
    let time = |k: usize, half: bool| if half { t0 + (k as f64 + 0.5) * h } else if k == steps { t1 } else { t0 + k as f64 * h };

    let mut max_defect: f64 = 0.0;
    let mut node = |t: f64| -> Result<Node> {
        let (x, xd) = curve.position_velocity(t)?;
        let (u, theta) = split_velocity(chart, &x, &xd)?;
        if !theta.is_finite() || u.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite(format!("curve velocity at t = {t}")));
        }
        max_defect = max_defect.max(theta.abs());
        if mode == TransportMode::Interior && theta.abs() > ADMISSIBILITY_TOL {
            return Err(Error::InadmissibleCurve { t, defect: theta });
        }
        Ok(Node { x, u, theta })
    };

    let rhs = |nd: &Node, v: &[f64], t: f64| -> Result<Vec<f64>> {
        let wrap = |e: Error| match e {
            Error::MetricDegenerate { .. } | Error::NonFinite(_) | Error::Jet(_) | Error::Eval(_) => Error::TransportBreakdown { t, reason: e.to_string() },
            other => other,
        };
        let (g, g_n) = match mode {
            TransportMode::Interior => (conn.fields(&nd.x, v, Depth::Interior).map_err(wrap)?.g, None),
            TransportMode::Extended => {
                let f = conn.fields(&nd.x, v, Depth::Full).map_err(wrap)?;
                (f.g, f.full.map(|full| full.g_n))
            }
        };
        Ok((0..dim)
            .map(|b| {
                let mut acc = -(0..dim).map(|a| g[b][a] * nd.u[a]).sum::<f64>();
                if let Some(g_n) = &g_n {
                    acc -= nd.theta * g_n[b];
                }
                acc
            })
            .collect())
    };

    let energy = |x: &[f64], v: &[f64], t: f64| -> Result<f64> {
        let f = conn.metric().eval(x, v).map_err(|e| Error::TransportBreakdown { t, reason: e.to_string() })?;
        if !f.is_finite() {
            return Err(Error::TransportBreakdown { t, reason: format!("F = {f}") });
        }
        Ok(f)
    };

    let mut start = node(t0)?;
    let mut v = v0.to_vec();
    let f0 = energy(&start.x, &v, t0)?;
    if f0 <= 0.0 {
        return Err(Error::InvalidInput(format!("F(x(t0), v0) = {f0} is not positive")));
    }
    let mut trace = Vec::with_capacity(steps + 1);
    trace.push(TraceSample { t: t0, x: start.x.clone(), v: v.clone(), energy: f0 });
    let mut drift: f64 = 0.0;
    let axpy = |v: &[f64], k: &[f64], s: f64| -> Vec<f64> { v.iter().zip(k).map(|(a, b)| a + s * b).collect() };

    for k in 0..steps {
        let (ta, tm, tb) = (time(k, false), time(k, true), time(k + 1, false));
        let mid = node(tm)?;
        let end = node(tb)?;
        let k1 = rhs(&start, &v, ta)?;
        let k2 = rhs(&mid, &axpy(&v, &k1, h / 2.0), tm)?;
        let k3 = rhs(&mid, &axpy(&v, &k2, h / 2.0), tm)?;
        let k4 = rhs(&end, &axpy(&v, &k3, h), tb)?;
        for i in 0..dim {
            v[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if v.iter().any(|c| !c.is_finite()) {
            return Err(Error::TransportBreakdown { t: tb, reason: "non-finite transported vector".into() });
        }
        let f = energy(&end.x, &v, tb)?;
        if f < COLLAPSE_RATIO * f0 {
            return Err(Error::TransportBreakdown { t: tb, reason: format!("F = {f} collapsed below {COLLAPSE_RATIO} F(t0)") });
        }
        drift = drift.max((f - f0).abs() / f0);
        trace.push(TraceSample { t: tb, x: end.x.clone(), v: v.clone(), energy: f });
        start = end;
    }
    Ok(TransportResult { mode, trace, f_drift: drift, max_admissibility_defect: max_defect })
}

/// Horizontal lift of the unit circle through the origin in the `(x1, x2)`
/// plane of the chart `Γ = (−x2, 0, −x4, 0)`, over `t ∈ [0, 2π]`.
pub fn heisenberg_circle(samples: usize) -> Result<Curve> {
    Curve::parse(&["cos(t) - 1", "sin(t)", "0", "0", "-(t/2 - sin(2*t)/4)"], [0.0, 2.0 * std::f64::consts::PI], samples)
}

/// Observed convergence order `log2(d(h) / d(h/2))`.
///
/// `None` when both drifts are zero, which happens for exactly conserved
/// transports.
pub fn observed_order(coarse: f64, fine: f64) -> Option<f64> {
    if coarse == 0.0 && fine == 0.0 {
        None
    } else {
        Some((coarse / fine).log2())
    }
}
