//! Wagner curvature of the extended connection.
//!
//! `R^c_{ab} = K^c_{ab} + ω_{ba} G^c_n` is the `∂_{y_c}` component of
//! `[ε_a, ε_b]` in the frame `(ε, U, ∂_y)` with `U = ∂_n − G^c_n ∂_{y_c}`,
//! and `R^c_{na} = P^c_a − ∇̃_a G^c_n + (∂_n Γ_a) G^c_n` is that of
//! `[ε_a, U]`, where `∇̃_a t^c = e_a t^c − G^b_a ∂_{v^b} t^c + G^c_{a·d} t^d`.
//!
//! `R_mixed` needs one more derivative than the jet pipeline carries, so the
//! pipeline is rerun on first-order jets whose coefficients are themselves
//! fourth-order jets.

use crate::chart::FiberPoint;
use crate::connection::{self, Connection, ConnectionEvaluation, Depth, Tensor3};
use crate::error::{Error, Result};
use crate::jets::{Coord, Jet, JetContext};
use crate::linalg::Matrix;

/// A structure is reported flat when every sampled component is at most this.
pub const FLATNESS_TOL: f64 = 1e-8;

/// Default step of the bracket oracle.
pub const DEFAULT_FD_STEP: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureEvaluation {
    pub connection: ConnectionEvaluation,
    /// `r_hor[c][a][b] = R^c_{ab}`.
    pub r_hor: Tensor3<f64>,
    /// `r_mixed[c][a] = R^c_{na}`.
    pub r_mixed: Matrix<f64>,
    /// `ω^{ab} K^c_{ab}`.
    pub k_trace: Vec<f64>,
    /// `K^c_{ab} + ω_{ba} ω^{ij} K^c_{ij}`, kept for comparison only.
    pub r_hor_trace_variant: Tensor3<f64>,
    /// `max_c |ω^{ab} R^c_{ab} − k_trace^c − (ω^{ab} ω_{ba}) G^c_n|`.
    pub trace_identity_residual: f64,
}

impl CurvatureEvaluation {
    pub fn max_abs_hor(&self) -> f64 {
        max_abs(self.r_hor.iter().flatten().flatten())
    }

    pub fn max_abs_mixed(&self) -> f64 {
        max_abs(self.r_mixed.iter().flatten())
    }
}

fn max_abs<'a>(it: impl Iterator<Item = &'a f64>) -> f64 {
    it.fold(0.0, |m, &c| m.max(c.abs()))
}

/// `R^c_{ab}` at `p`.
pub fn wagner_horizontal(conn: &Connection, p: &FiberPoint) -> Result<Tensor3<f64>> {
    Ok(horizontal(&conn.evaluate(p)?))
}

/// `R^c_{na}` at `p`.
pub fn wagner_mixed(conn: &Connection, p: &FiberPoint) -> Result<Matrix<f64>> {
    Ok(evaluate(conn, p)?.r_mixed)
}

fn horizontal(e: &ConnectionEvaluation) -> Tensor3<f64> {
    let dim = e.g.len();
    (0..dim)
        .map(|c| (0..dim).map(|a| (0..dim).map(|b| e.k[c][a][b] + e.omega_lower[b][a] * e.g_n[c]).collect()).collect())
        .collect()
}

/// Full curvature evaluation at `p`.
pub fn evaluate(conn: &Connection, p: &FiberPoint) -> Result<CurvatureEvaluation> {
    let n = conn.chart().n();
    let dim = conn.dim();
    if p.m() != conn.chart().m() {
        return Err(Error::ShapeMismatch(format!("point has m = {}, structure has m = {}", p.m(), conn.chart().m())));
    }
    let outer = JetContext::new((0..n).map(Coord::Base).chain((0..dim).map(Coord::Fiber)).collect());
    let xs = p.x().iter().enumerate().map(|(i, &c)| Jet::seed(&outer, i, c, 1)).collect::<std::result::Result<Vec<_>, _>>()?;
    let vs = p.v().iter().enumerate().map(|(a, &c)| Jet::seed(&outer, n + a, c, 1)).collect::<std::result::Result<Vec<_>, _>>()?;
    let nested = conn.fields(&xs, &vs, Depth::Full).map_err(|e| match e {
        Error::DegenerateContact { rank_required, .. } => Error::DegenerateContact { x: p.x().to_vec(), rank_required },
        Error::MetricDegenerate { min_eigenvalue, .. } => Error::MetricDegenerate { x: p.x().to_vec(), v: p.v().to_vec(), min_eigenvalue },
        other => other,
    })?;
    let plain = flatten_fields(&nested);
    let e = connection::evaluation_from_fields(&plain);
    let g_n_jets = &nested.full.as_ref().expect("full depth").g_n;

    let mut r_mixed = vec![vec![0.0; dim]; dim];
    for c in 0..dim {
        let t = &g_n_jets[c];
        for a in 0..dim {
            let mut nabla = t.partial(&[a])? - e.gamma[a] * t.partial(&[n - 1])?;
            for b in 0..dim {
                nabla -= e.g[b][a] * t.partial(&[n + b])?;
            }
            for d in 0..dim {
                nabla += e.g_vert[c][a][d] * e.g_n[d];
            }
            r_mixed[c][a] = e.p[c][a] - nabla + e.reeb_defect[a] * e.g_n[c];
        }
    }

    let r_hor = horizontal(&e);
    let k_trace: Vec<f64> = (0..dim)
        .map(|c| (0..dim).flat_map(|a| (0..dim).map(move |b| (a, b))).map(|(a, b)| e.omega_upper[a][b] * e.k[c][a][b]).sum())
        .collect();
    let omega_pairing: f64 = (0..dim).flat_map(|a| (0..dim).map(move |b| (a, b))).map(|(a, b)| e.omega_upper[a][b] * e.omega_lower[b][a]).sum();
    let r_hor_trace_variant = (0..dim)
        .map(|c| (0..dim).map(|a| (0..dim).map(|b| e.k[c][a][b] + e.omega_lower[b][a] * k_trace[c]).collect()).collect())
        .collect();
    let trace_identity_residual = (0..dim)
        .map(|c| {
            let lhs: f64 = (0..dim).flat_map(|a| (0..dim).map(move |b| (a, b))).map(|(a, b)| e.omega_upper[a][b] * r_hor[c][a][b]).sum();
            (lhs - k_trace[c] - omega_pairing * e.g_n[c]).abs()
        })
        .fold(0.0, f64::max);

    let out = CurvatureEvaluation { connection: e, r_hor, r_mixed, k_trace, r_hor_trace_variant, trace_identity_residual };
    if out.r_hor.iter().flatten().flatten().chain(out.r_mixed.iter().flatten()).any(|c| !c.is_finite()) {
        return Err(Error::NonFinite(format!("curvature at x = {:?}, v = {:?}", p.x(), p.v())));
    }
    Ok(out)
}

fn flatten_fields(f: &connection::Fields<Jet<f64>>) -> connection::Fields<f64> {
    let v = |t: &Jet<f64>| *t.real();
    let vec = |t: &[Jet<f64>]| t.iter().map(v).collect::<Vec<_>>();
    let mat = |t: &Matrix<Jet<f64>>| t.iter().map(|r| vec(r)).collect::<Vec<_>>();
    let ten = |t: &Tensor3<Jet<f64>>| t.iter().map(mat).collect::<Vec<_>>();
    connection::Fields {
        energy: v(&f.energy),
        energy_grad: vec(&f.energy_grad),
        dn_energy: v(&f.dn_energy),
        frame_energy: vec(&f.frame_energy),
        gamma: vec(&f.gamma),
        reeb_defect: vec(&f.reeb_defect),
        spray: vec(&f.spray),
        g: mat(&f.g),
        full: f.full.as_ref().map(|full| connection::FullFields {
            g_vert: ten(&full.g_vert),
            p: mat(&full.p),
            k: ten(&full.k),
            omega_lower: mat(&full.omega_lower),
            omega_upper: mat(&full.omega_upper),
            g_n: vec(&full.g_n),
        }),
    }
}

/// Which frame bracket the oracle evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BracketPair {
    /// `[ε_a, ε_b]`.
    Horizontal(usize, usize),
    /// `[ε_a, U]`.
    Mixed(usize),
}

/// A bracket decomposed in the frame `(ε_1..ε_{2m}, U, ∂_{y_1}..∂_{y_{2m}})`.
#[derive(Debug, Clone, PartialEq)]
pub struct BracketComponents {
    pub pair: BracketPair,
    pub epsilon: Vec<f64>,
    pub u: f64,
    pub vertical: Vec<f64>,
    /// `u` minus its expected value `ω_{ba}` or `∂_n Γ_a`.
    pub u_residual: f64,
}

/// Components of `ε_1..ε_{2m}, U` at `z = (x, y)` in the coordinates of
/// `R^{n + 2m}`.
fn frame_at(conn: &Connection, z: &[f64]) -> Result<Vec<Vec<f64>>> {
    let n = conn.chart().n();
    let dim = conn.dim();
    let f = conn.fields(&z[..n], &z[n..], Depth::Full)?;
    let g_n = &f.full.as_ref().expect("full depth").g_n;
    let mut out = Vec::with_capacity(dim + 1);
    for a in 0..dim {
        let mut w = vec![0.0; n + dim];
        w[a] = 1.0;
        w[n - 1] = -f.gamma[a];
        for b in 0..dim {
            w[n + b] = -f.g[b][a];
        }
        out.push(w);
    }
    let mut u = vec![0.0; n + dim];
    u[n - 1] = 1.0;
    for c in 0..dim {
        u[n + c] = -g_n[c];
    }
    out.push(u);
    Ok(out)
}

struct FrameDerivatives {
    base: Vec<Vec<f64>>,
    gamma: Vec<f64>,
    g: Matrix<f64>,
    g_n: Vec<f64>,
    omega_lower: Matrix<f64>,
    reeb_defect: Vec<f64>,
    /// `d[i][j] = D_{X_i} X_j` by central differences with one Richardson step.
    d: Vec<Vec<Vec<f64>>>,
}

fn frame_derivatives(conn: &Connection, p: &FiberPoint, h: f64, along: &[usize]) -> Result<FrameDerivatives> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::InvalidInput(format!("finite-difference step must be positive, got {h}")));
    }
    let z: Vec<f64> = p.x().iter().chain(p.v()).copied().collect();
    let base = frame_at(conn, &z)?;
    let at = conn.evaluate(p)?;
    let count = base.len();
    let mut d = vec![Vec::new(); count];
    for &i in along {
        let dir = &base[i];
        let central = |step: f64| -> Result<Vec<Vec<f64>>> {
            let plus: Vec<f64> = z.iter().zip(dir).map(|(a, b)| a + step * b).collect();
            let minus: Vec<f64> = z.iter().zip(dir).map(|(a, b)| a - step * b).collect();
            if plus == z || minus == z {
                return Err(Error::InvalidInput(format!("finite-difference step {step} underflows at the sample point")));
            }
            let fp = frame_at(conn, &plus)?;
            let fm = frame_at(conn, &minus)?;
            Ok(fp.iter().zip(&fm).map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y) / (2.0 * step)).collect()).collect())
        };
        let coarse = central(h)?;
        let fine = central(h / 2.0)?;
        d[i] = coarse
            .iter()
            .zip(&fine)
            .map(|(c, f)| c.iter().zip(f).map(|(c, f)| (4.0 * f - c) / 3.0).collect())
            .collect();
    }
    Ok(FrameDerivatives {
        base,
        gamma: at.gamma,
        g: at.g,
        g_n: at.g_n,
        omega_lower: at.omega_lower,
        reeb_defect: at.reeb_defect,
        d,
    })
}

impl FrameDerivatives {
    fn bracket(&self, pair: BracketPair) -> Result<BracketComponents> {
        let dim = self.g.len();
        let u_index = dim;
        let (i, j, expected) = match pair {
            BracketPair::Horizontal(a, b) => (a, b, self.omega_lower[b][a]),
            BracketPair::Mixed(a) => (a, u_index, self.reeb_defect[a]),
        };
        let n = self.base[0].len() - dim;
        let w: Vec<f64> = (0..n + dim).map(|k| self.d[i][j][k] - self.d[j][i][k]).collect();
        if w.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite(format!("bracket {pair:?}")));
        }
        let epsilon = w[..dim].to_vec();
        let u = w[n - 1] + (0..dim).map(|c| self.gamma[c] * w[c]).sum::<f64>();
        let vertical = (0..dim)
            .map(|c| w[n + c] + (0..dim).map(|d| w[d] * self.g[c][d]).sum::<f64>() + u * self.g_n[c])
            .collect();
        Ok(BracketComponents { pair, epsilon, u, vertical, u_residual: u - expected })
    }
}

fn check_pair(conn: &Connection, pair: BracketPair) -> Result<()> {
    let dim = conn.dim();
    let ok = match pair {
        BracketPair::Horizontal(a, b) => a < dim && b < dim,
        BracketPair::Mixed(a) => a < dim,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("bracket indices {pair:?} out of range for 2m = {dim}")))
    }
}

/// One frame bracket by finite differences of the frame fields.
pub fn lie_bracket_oracle(conn: &Connection, p: &FiberPoint, pair: BracketPair, h: f64) -> Result<BracketComponents> {
    check_pair(conn, pair)?;
    let (i, j) = match pair {
        BracketPair::Horizontal(a, b) => (a, b),
        BracketPair::Mixed(a) => (a, conn.dim()),
    };
    frame_derivatives(conn, p, h, &[i, j])?.bracket(pair)
}

/// Every bracket `[ε_a, ε_b]` with `a < b` and every `[ε_a, U]`.
pub fn bracket_table(conn: &Connection, p: &FiberPoint, h: f64) -> Result<Vec<BracketComponents>> {
    let dim = conn.dim();
    let along: Vec<usize> = (0..=dim).collect();
    let fd = frame_derivatives(conn, p, h, &along)?;
    let mut out = Vec::new();
    for a in 0..dim {
        for b in a + 1..dim {
            out.push(fd.bracket(BracketPair::Horizontal(a, b))?);
        }
    }
    for a in 0..dim {
        out.push(fd.bracket(BracketPair::Mixed(a))?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlatnessSample {
    pub max_abs_hor: f64,
    pub max_abs_mixed: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlatnessReport {
    pub samples: usize,
    pub max_abs_hor: f64,
    pub argmax_hor: Option<usize>,
    pub max_abs_mixed: f64,
    pub argmax_mixed: Option<usize>,
    pub flat: bool,
}

impl FlatnessReport {
    /// Reduces per-sample maxima, keeping the first index on ties.
    pub fn from_samples(samples: &[FlatnessSample]) -> Self {
        let mut report = FlatnessReport { samples: samples.len(), max_abs_hor: 0.0, argmax_hor: None, max_abs_mixed: 0.0, argmax_mixed: None, flat: true };
        for (i, s) in samples.iter().enumerate() {
            if report.argmax_hor.is_none() || s.max_abs_hor > report.max_abs_hor {
                report.max_abs_hor = s.max_abs_hor;
                report.argmax_hor = Some(i);
            }
            if report.argmax_mixed.is_none() || s.max_abs_mixed > report.max_abs_mixed {
                report.max_abs_mixed = s.max_abs_mixed;
                report.argmax_mixed = Some(i);
            }
        }
        report.flat = report.max_abs_hor <= FLATNESS_TOL && report.max_abs_mixed <= FLATNESS_TOL;
        report
    }
}

pub fn flatness_sample(conn: &Connection, p: &FiberPoint) -> Result<FlatnessSample> {
    let e = evaluate(conn, p)?;
    Ok(FlatnessSample { max_abs_hor: e.max_abs_hor(), max_abs_mixed: e.max_abs_mixed() })
}

/// Sequential scan; the first failing sample aborts it.
pub fn flatness_scan(conn: &Connection, samples: &[FiberPoint]) -> Result<FlatnessReport> {
    let per = samples.iter().map(|p| flatness_sample(conn, p)).collect::<Result<Vec<_>>>()?;
    Ok(FlatnessReport::from_samples(&per))
}
