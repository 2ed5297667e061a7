//! The symmetric metric truncated connection of a contact sub-Finsler
//! structure.
//!
//! With `S^c = ½ g^{bc} (v^a e_a F_{·b} − e_b F)` (the spray), the interior
//! coefficients are `G^c_d = ½ ∂S^c/∂v^d`. The Schouten tensors are
//! `P^b_a = ∂_n G^b_a` and the `∂_{n+c}` component `K^c_{ab}` of
//! `[ε_a, ε_b]`, where `ε_a = e_a − G^b_a ∂_{n+b}`. The extension
//! coefficients are `G^d_n = σ ω^{ba} K^d_{ab}`.
//!
//! Every quantity comes out of one jet pipeline ([`Connection::fields`]),
//! generic over the scalar type so that the curvature module can run it on
//! jets and differentiate the results once more.

use crate::chart::{self, Chart, FiberPoint};
use crate::error::{Error, Result};
use crate::finsler::FinslerMetric;
use crate::jets::{Coord, Jet, JetContext, Scalar};
use crate::linalg::{self, Matrix};

/// `t[i][j][k]`.
pub type Tensor3<T> = Vec<Vec<Vec<T>>>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConnectionOptions {
    /// Normalization σ of the extension contraction.
    pub eq22_sigma: f64,
    /// Use `ω^{ba} ω_{bc} = δ^a_c` instead of `ω^{ab} ω_{bc} = δ^a_c`.
    pub omega_inverse_transpose: bool,
}

impl Default for ConnectionOptions {
    fn default() -> Self {
        ConnectionOptions { eq22_sigma: 1.0, omega_inverse_transpose: false }
    }
}

/// How far down the pipeline to go.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Depth {
    /// Values of `G^c_d` only.
    Interior,
    /// Everything: vertical derivatives, Schouten tensors, extension.
    Full,
}

/// Pipeline output in the scalar type it was run with.
#[derive(Debug, Clone)]
pub struct Fields<T> {
    pub energy: T,
    pub energy_grad: Vec<T>,
    pub dn_energy: T,
    /// `e_a F`.
    pub frame_energy: Vec<T>,
    pub gamma: Vec<T>,
    /// `∂_n Γ_a`.
    pub reeb_defect: Vec<T>,
    pub spray: Vec<T>,
    /// `g[c][d] = G^c_d`.
    pub g: Matrix<T>,
    pub full: Option<FullFields<T>>,
}

#[derive(Debug, Clone)]
pub struct FullFields<T> {
    /// `g_vert[c][d][b] = ∂G^c_d/∂v^b`.
    pub g_vert: Tensor3<T>,
    /// `p[c][a] = ∂_n G^c_a`.
    pub p: Matrix<T>,
    /// `k[c][a][b] = K^c_{ab}`.
    pub k: Tensor3<T>,
    pub omega_lower: Matrix<T>,
    pub omega_upper: Matrix<T>,
    pub g_n: Vec<T>,
}

/// Connection data at one fiber point, upper index first throughout.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectionEvaluation {
    pub spray: Vec<f64>,
    pub g: Matrix<f64>,
    pub g_vert: Tensor3<f64>,
    pub g_n: Vec<f64>,
    pub p: Matrix<f64>,
    pub k: Tensor3<f64>,
    pub omega_lower: Matrix<f64>,
    pub omega_upper: Matrix<f64>,
    pub gamma: Vec<f64>,
    pub reeb_defect: Vec<f64>,
    /// `e_a F − G^c_a F_{·c}`.
    pub metrizability: Vec<f64>,
    /// `∂_n F − G^c_n F_{·c}`.
    pub reeb_metrizability: f64,
    pub energy: f64,
    pub energy_grad: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Connection {
    chart: Chart,
    metric: FinslerMetric,
    opts: ConnectionOptions,
}

impl Connection {
    pub fn new(chart: Chart, metric: FinslerMetric, opts: ConnectionOptions) -> Result<Self> {
        if chart.m() != metric.m() {
            return Err(Error::ShapeMismatch(format!("chart m = {} but metric m = {}", chart.m(), metric.m())));
        }
        if !(opts.eq22_sigma.is_finite() && opts.eq22_sigma > 0.0) {
            return Err(Error::InvalidInput(format!("eq22_sigma must be positive, got {}", opts.eq22_sigma)));
        }
        Ok(Connection { chart, metric, opts })
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn metric(&self) -> &FinslerMetric {
        &self.metric
    }

    pub fn options(&self) -> ConnectionOptions {
        self.opts
    }

    /// Fiber dimension `2m`.
    pub fn dim(&self) -> usize {
        2 * self.chart.m()
    }

    fn check(&self, p: &FiberPoint) -> Result<()> {
        if p.m() != self.chart.m() {
            return Err(Error::ShapeMismatch(format!("point has m = {}, structure has m = {}", p.m(), self.chart.m())));
        }
        Ok(())
    }

    /// Runs the jet pipeline at `(x, v)`.
    pub fn fields<T: Scalar>(&self, x: &[T], v: &[T], depth: Depth) -> Result<Fields<T>> {
        let n = self.chart.n();
        let dim = self.dim();
        let order = match depth {
            Depth::Interior => 3,
            Depth::Full => 4,
        };
        let dirs: Vec<Coord> = (0..n).map(Coord::Base).chain((0..dim).map(Coord::Fiber)).collect();
        let ctx = JetContext::new(dirs);
        let xs = chart::seed_base(&ctx, x, order)?;
        let vs = (0..dim).map(|a| Ok(Jet::seed(&ctx, n + a, v[a].clone(), order)?)).collect::<Result<Vec<_>>>()?;
        let nn = n - 1;

        let energy = self.metric.eval(&xs, &vs)?;
        let gamma = self.chart.gamma_at(&xs)?;
        let energy_grad: Vec<Jet<T>> = (0..dim).map(|b| energy.diff(n + b)).collect::<std::result::Result<_, _>>()?;

        let mut fund = vec![Vec::with_capacity(dim); dim];
        for a in 0..dim {
            for b in 0..dim {
                fund[a].push(energy_grad[b].diff(n + a)?.scale(0.5));
            }
        }
        let fund_values = linalg::values(&fund);
        let point = || (x.iter().map(Scalar::value).collect::<Vec<_>>(), v.iter().map(Scalar::value).collect::<Vec<_>>());
        if fund_values.iter().flatten().any(|c| !c.is_finite()) {
            let (px, pv) = point();
            return Err(Error::NonFinite(format!("fundamental tensor at x = {px:?}, v = {pv:?}")));
        }
        let degenerate = || {
            let (px, pv) = point();
            Error::MetricDegenerate { x: px, v: pv, min_eigenvalue: linalg::min_symmetric_eigenvalue(&fund_values) }
        };
        if !linalg::is_positive_definite(&fund_values) {
            return Err(degenerate());
        }
        let fund_inv = linalg::invert(&fund, 1e-14).map_err(|_| degenerate())?;

        let frame_energy: Vec<Jet<T>> = (0..dim).map(|b| chart::frame_apply(&energy, &gamma, b, nn)).collect::<Result<_>>()?;
        let mut rhs: Vec<Jet<T>> = Vec::with_capacity(dim);
        for b in 0..dim {
            let mut acc = -frame_energy[b].clone();
            for a in 0..dim {
                let e_fb = chart::frame_apply(&energy_grad[b], &gamma, a, nn)?;
                acc.add_mul_assign(&vs[a], &e_fb);
            }
            rhs.push(acc);
        }
        let spray: Vec<Jet<T>> = (0..dim)
            .map(|c| {
                let mut acc = Jet::constant(T::zero());
                for b in 0..dim {
                    acc.add_mul_assign(&fund_inv[b][c], &rhs[b]);
                }
                acc.scale(0.5)
            })
            .collect();

        let mut g_jets: Vec<Vec<Jet<T>>> = vec![Vec::with_capacity(dim); dim];
        for c in 0..dim {
            for d in 0..dim {
                g_jets[c].push(spray[c].diff(n + d)?.scale(0.5));
            }
        }
        let g: Matrix<T> = g_jets.iter().map(|row| row.iter().map(|j| j.real().clone()).collect()).collect();

        let full = match depth {
            Depth::Interior => None,
            Depth::Full => Some(self.full_fields(&g_jets, &g, &gamma, n)?),
        };

        let energy_grad_values: Vec<T> = energy_grad.iter().map(|j| j.real().clone()).collect();
        Ok(Fields {
            energy: energy.real().clone(),
            dn_energy: energy.partial(&[nn])?,
            energy_grad: energy_grad_values,
            frame_energy: frame_energy.iter().map(|j| j.real().clone()).collect(),
            reeb_defect: gamma.iter().map(|j| j.partial(&[nn])).collect::<std::result::Result<_, _>>()?,
            gamma: gamma.iter().map(|j| j.real().clone()).collect(),
            spray: spray.iter().map(|j| j.real().clone()).collect(),
            g,
            full,
        })
    }

    fn full_fields<T: Scalar>(&self, g_jets: &[Vec<Jet<T>>], g: &Matrix<T>, gamma: &[Jet<T>], n: usize) -> Result<FullFields<T>> {
        let dim = self.dim();
        let nn = n - 1;
        let mut g_vert: Tensor3<T> = vec![vec![Vec::with_capacity(dim); dim]; dim];
        let mut p: Matrix<T> = vec![Vec::with_capacity(dim); dim];
        // e_g[b][c][a] = e_b G^c_a
        let mut e_g: Tensor3<T> = vec![vec![Vec::with_capacity(dim); dim]; dim];
        for c in 0..dim {
            for d in 0..dim {
                let jet = &g_jets[c][d];
                for b in 0..dim {
                    g_vert[c][d].push(jet.partial(&[n + b])?);
                }
                p[c].push(jet.partial(&[nn])?);
            }
        }
        for b in 0..dim {
            for c in 0..dim {
                for a in 0..dim {
                    e_g[b][c].push(chart::frame_apply(&g_jets[c][a], gamma, b, nn)?.real().clone());
                }
            }
        }
        let mut k: Tensor3<T> = vec![vec![Vec::with_capacity(dim); dim]; dim];
        for c in 0..dim {
            for a in 0..dim {
                for b in 0..dim {
                    let mut acc = e_g[b][c][a].clone() - e_g[a][c][b].clone();
                    for d in 0..dim {
                        acc.add_mul_assign(&g[d][a], &g_vert[c][b][d]);
                        acc.add_mul_assign(&-g[d][b].clone(), &g_vert[c][a][d]);
                    }
                    k[c][a].push(acc);
                }
            }
        }

        let omega_lower = chart::omega_lower(gamma, nn)?;
        let omega_upper = chart::omega_upper(&omega_lower, self.opts.omega_inverse_transpose).map_err(|_| Error::DegenerateContact {
            x: gamma.iter().map(|_| f64::NAN).collect(),
            rank_required: dim,
        })?;
        let g_n = (0..dim)
            .map(|d| {
                let mut acc = T::zero();
                for a in 0..dim {
                    for b in 0..dim {
                        acc.add_mul_assign(&omega_upper[b][a], &k[d][a][b]);
                    }
                }
                acc.scale(self.opts.eq22_sigma)
            })
            .collect();
        Ok(FullFields { g_vert, p, k, omega_lower, omega_upper, g_n })
    }

    fn fields_at(&self, p: &FiberPoint, depth: Depth) -> Result<Fields<f64>> {
        self.check(p)?;
        self.fields(p.x(), p.v(), depth).map_err(|e| match e {
            Error::DegenerateContact { rank_required, .. } => Error::DegenerateContact { x: p.x().to_vec(), rank_required },
            other => other,
        })
    }

    /// All connection data at `p`.
    pub fn evaluate(&self, p: &FiberPoint) -> Result<ConnectionEvaluation> {
        let f = self.fields_at(p, Depth::Full)?;
        Ok(evaluation_from_fields(&f))
    }

    pub fn spray(&self, p: &FiberPoint) -> Result<Vec<f64>> {
        Ok(self.fields_at(p, Depth::Interior)?.spray)
    }

    /// `G^c_d` only; the cheapest pipeline depth.
    pub fn interior_matrix(&self, x: &[f64], v: &[f64]) -> Result<Matrix<f64>> {
        Ok(self.fields(x, v, Depth::Interior)?.g)
    }

    /// `(G, G_vert)` with `G[c][d] = G^c_d` and `G_vert[c][d][b] = G^c_{d·b}`.
    pub fn interior_coefficients(&self, p: &FiberPoint) -> Result<(Matrix<f64>, Tensor3<f64>)> {
        let e = self.evaluate(p)?;
        Ok((e.g, e.g_vert))
    }

    pub fn metrizability_residual(&self, p: &FiberPoint) -> Result<Vec<f64>> {
        let f = self.fields_at(p, Depth::Interior)?;
        Ok(metrizability(&f))
    }

    /// `(K, P)`: `K[c][a][b] = K^c_{ab}`, `P[c][a] = P^c_a`.
    pub fn schouten_tensors(&self, p: &FiberPoint) -> Result<(Tensor3<f64>, Matrix<f64>)> {
        let e = self.evaluate(p)?;
        Ok((e.k, e.p))
    }

    pub fn extension_coefficients(&self, p: &FiberPoint) -> Result<Vec<f64>> {
        Ok(self.evaluate(p)?.g_n)
    }

    pub fn reeb_metrizability_residual(&self, p: &FiberPoint) -> Result<f64> {
        Ok(self.evaluate(p)?.reeb_metrizability)
    }

    /// Frame Christoffel contraction `Γ^c_{ab} v^b` for quadratic energies,
    /// computed from `g_ab(x)` by polarization without the spray pipeline.
    ///
    /// Returns `out[c][a]`, comparable with `G^c_a`.
    pub fn riemannian_reduction_oracle(&self, p: &FiberPoint) -> Result<Matrix<f64>> {
        self.check(p)?;
        let n = self.chart.n();
        let dim = self.dim();
        let ctx = JetContext::new((0..n).map(Coord::Base).collect());
        let xs = chart::seed_base(&ctx, p.x(), 1)?;
        let gamma = self.chart.gamma_at(&xs)?;
        let energy = |w: &[f64]| -> Result<Jet<f64>> {
            let ws: Vec<Jet<f64>> = w.iter().map(|&c| Jet::constant(c)).collect();
            self.metric.eval(&xs, &ws)
        };
        let unit = |a: usize, s: f64, b: usize| -> Vec<f64> {
            let mut w = vec![0.0; dim];
            w[a] += 1.0;
            w[b] += s;
            w
        };
        let mut metric: Vec<Vec<Jet<f64>>> = vec![Vec::with_capacity(dim); dim];
        for a in 0..dim {
            for b in 0..dim {
                let plus = energy(&unit(a, 1.0, b))?;
                let minus = energy(&unit(a, -1.0, b))?;
                metric[a].push((plus - minus).scale(0.25));
            }
        }
        let g0: Matrix<f64> = linalg::values(&metric);

        let quad = |w: &[f64]| -> f64 { (0..dim).flat_map(|a| (0..dim).map(move |b| (a, b))).map(|(a, b)| g0[a][b] * w[a] * w[b]).sum() };
        let probes = [p.v().to_vec(), (0..dim).map(|i| 0.3 + 0.1 * i as f64).collect(), (0..dim).map(|i| if i % 2 == 0 { 1.0 } else { -0.5 }).collect()];
        for w in &probes {
            let f = energy(w)?.value();
            let q = quad(w);
            if (f - q).abs() > 1e-10 * f.abs().max(1.0) {
                return Err(Error::OracleInapplicable(format!("energy is not quadratic in v: F = {f}, g(v,v) = {q} at v = {w:?}")));
            }
        }
        if energy(&vec![0.0; dim])?.value().abs() > 1e-12 {
            return Err(Error::OracleInapplicable("energy does not vanish at v = 0".into()));
        }

        let inv = linalg::to_dmatrix(&g0)
            .try_inverse()
            .ok_or_else(|| Error::MetricDegenerate { x: p.x().to_vec(), v: p.v().to_vec(), min_eigenvalue: linalg::min_symmetric_eigenvalue(&g0) })?;
        // de[c][a][b] = e_c g_ab
        let mut de = vec![vec![vec![0.0; dim]; dim]; dim];
        for (c, plane) in de.iter_mut().enumerate() {
            for a in 0..dim {
                for b in 0..dim {
                    plane[a][b] = chart::frame_apply(&metric[a][b], &gamma, c, n - 1)?.value();
                }
            }
        }
        let mut out = vec![vec![0.0; dim]; dim];
        for c in 0..dim {
            for a in 0..dim {
                let mut acc = 0.0;
                for b in 0..dim {
                    for d in 0..dim {
                        let christoffel = 0.5 * inv[(c, d)] * (de[a][b][d] + de[b][a][d] - de[d][a][b]);
                        acc += christoffel * p.v()[b];
                    }
                }
                out[c][a] = acc;
            }
        }
        Ok(out)
    }
}

fn metrizability(f: &Fields<f64>) -> Vec<f64> {
    let dim = f.g.len();
    (0..dim).map(|a| f.frame_energy[a] - (0..dim).map(|c| f.g[c][a] * f.energy_grad[c]).sum::<f64>()).collect()
}

pub(crate) fn evaluation_from_fields(f: &Fields<f64>) -> ConnectionEvaluation {
    let full = f.full.as_ref().expect("full pipeline depth");
    let reeb_metrizability = f.dn_energy - full.g_n.iter().zip(&f.energy_grad).map(|(g, d)| g * d).sum::<f64>();
    ConnectionEvaluation {
        spray: f.spray.clone(),
        g: f.g.clone(),
        g_vert: full.g_vert.clone(),
        g_n: full.g_n.clone(),
        p: full.p.clone(),
        k: full.k.clone(),
        omega_lower: full.omega_lower.clone(),
        omega_upper: full.omega_upper.clone(),
        gamma: f.gamma.clone(),
        reeb_defect: f.reeb_defect.clone(),
        metrizability: metrizability(f),
        reeb_metrizability,
        energy: f.energy,
        energy_grad: f.energy_grad.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;
    use approx::assert_relative_eq;

    fn conn(metric: &str) -> Connection {
        Connection::new(presets::chart("HEIS5").unwrap(), presets::metric(metric).unwrap(), ConnectionOptions::default()).unwrap()
    }

    fn e1() -> FiberPoint {
        FiberPoint::new(vec![0.0; 5], vec![1.0, 0.0, 0.0, 0.0]).unwrap()
    }

    fn sample() -> FiberPoint {
        FiberPoint::new(vec![0.2, -0.3, 0.5, 0.1, -0.4], vec![0.7, -0.2, 0.4, 1.1]).unwrap()
    }

    #[test]
    fn euclidean_connection_vanishes() {
        let c = conn("F_EUC");
        let e = c.evaluate(&sample()).unwrap();
        assert!(e.spray.iter().all(|&s| s == 0.0));
        assert!(e.g.iter().flatten().all(|&s| s == 0.0));
        assert!(e.g_vert.iter().flatten().flatten().all(|&s| s == 0.0));
        assert!(e.k.iter().flatten().flatten().all(|&s| s == 0.0));
        assert!(e.p.iter().flatten().all(|&s| s == 0.0));
        assert_eq!(e.g_n, vec![0.0; 4]);
        assert_eq!(e.metrizability, vec![0.0; 4]);
        assert_eq!(e.reeb_metrizability, 0.0);
    }

    #[test]
    fn curv5_spray_and_coefficients() {
        let c = conn("CURV5");
        let s = c.spray(&e1()).unwrap();
        assert_eq!(s, vec![0.0, -1.0, 0.0, 0.0]);
        let (g, _) = c.interior_coefficients(&e1()).unwrap();
        let mut expect = vec![vec![0.0; 4]; 4];
        expect[0][1] = 1.0;
        expect[1][0] = -1.0;
        assert_eq!(g, expect);
    }

    #[test]
    fn curv5_spray_matches_difference_quotients() {
        // S^c = ½ g^{bc} (v^a e_a F_{·b} − e_b F) with every derivative taken
        // by central differences of the energy.
        let c = conn("CURV5");
        let p = sample();
        let f = |x: &[f64], v: &[f64]| c.metric().eval(x, v).unwrap();
        let h = 1e-4;
        let shift = |z: &[f64], i: usize, s: f64| {
            let mut w = z.to_vec();
            w[i] += s;
            w
        };
        let gamma = c.chart().gamma_at(p.x()).unwrap();
        let e_of = |a: usize, g: &dyn Fn(&[f64]) -> f64| {
            let d = |i: usize| (g(&shift(p.x(), i, h)) - g(&shift(p.x(), i, -h))) / (2.0 * h);
            d(a) - gamma[a] * d(4)
        };
        let dv = |b: usize, x: &[f64]| (f(x, &shift(p.v(), b, h)) - f(x, &shift(p.v(), b, -h))) / (2.0 * h);
        let at = c.metric().metric_at(c.chart(), &p).unwrap();
        let mut expect = [0.0; 4];
        for cc in 0..4 {
            for b in 0..4 {
                let mut term = -e_of(b, &|x| f(x, p.v()));
                for a in 0..4 {
                    term += p.v()[a] * e_of(a, &|x| dv(b, x));
                }
                expect[cc] += 0.5 * at.g_upper[b][cc] * term;
            }
        }
        let got = c.spray(&p).unwrap();
        for k in 0..4 {
            assert_relative_eq!(got[k], expect[k], epsilon = 1e-6);
        }
    }

    #[test]
    fn warp5_spray_and_coefficients() {
        let c = conn("WARP5");
        assert_eq!(c.spray(&e1()).unwrap(), vec![1.0, 0.0, 0.0, 0.0]);
        let (g, _) = c.interior_coefficients(&e1()).unwrap();
        let mut expect = vec![vec![0.0; 4]; 4];
        expect[0][0] = 1.0;
        assert_eq!(g, expect);
        let o = c.riemannian_reduction_oracle(&e1()).unwrap();
        assert_eq!(o, expect);
    }

    #[test]
    fn warp5_is_schouten_flat() {
        let c = conn("WARP5");
        let e = c.evaluate(&sample()).unwrap();
        assert!(e.k.iter().flatten().flatten().all(|&s| s == 0.0));
        assert!(e.p.iter().flatten().all(|&s| s == 0.0));
        assert_eq!(e.g_n, vec![0.0; 4]);
    }

    #[test]
    fn curv5_schouten_and_extension_at_origin() {
        let c = conn("CURV5");
        let (k, p) = c.schouten_tensors(&e1()).unwrap();
        assert_relative_eq!(k[1][0][1], -1.0, epsilon = 1e-14);
        assert_relative_eq!(k[1][1][0], 1.0, epsilon = 1e-14);
        for cc in 0..4 {
            for a in 0..4 {
                for b in 0..4 {
                    if (cc, a, b) != (1, 0, 1) && (cc, a, b) != (1, 1, 0) {
                        assert_eq!(k[cc][a][b], 0.0, "K^{cc}_{a}{b}");
                    }
                }
            }
        }
        assert!(p.iter().flatten().all(|&s| s == 0.0));
        let gn = c.extension_coefficients(&e1()).unwrap();
        assert_relative_eq!(gn[1], -2.0, epsilon = 1e-14);
        assert_eq!(gn[0], 0.0);

        let t = Connection::new(
            presets::chart("HEIS5").unwrap(),
            presets::metric("CURV5").unwrap(),
            ConnectionOptions { omega_inverse_transpose: true, ..Default::default() },
        )
        .unwrap();
        assert_relative_eq!(t.extension_coefficients(&e1()).unwrap()[1], 2.0, epsilon = 1e-14);
        let s = Connection::new(
            presets::chart("HEIS5").unwrap(),
            presets::metric("CURV5").unwrap(),
            ConnectionOptions { eq22_sigma: 0.125, ..Default::default() },
        )
        .unwrap();
        assert_relative_eq!(s.extension_coefficients(&e1()).unwrap()[1], -0.25, epsilon = 1e-14);
    }

    #[test]
    fn curv5_schouten_general_form() {
        // K^2_{12} = −e^{2 x2} v1 at any point.
        let c = conn("CURV5");
        let p = sample();
        let (k, _) = c.schouten_tensors(&p).unwrap();
        assert_relative_eq!(k[1][0][1], -(2.0 * p.x()[1]).exp() * p.v()[0], max_relative = 1e-12);
    }

    #[test]
    fn residuals_vanish() {
        for name in presets::METRIC_NAMES {
            let c = conn(name);
            let e = c.evaluate(&sample()).unwrap();
            for r in &e.metrizability {
                assert!(r.abs() <= 1e-12, "{name}: {r}");
            }
        }
    }

    #[test]
    fn oracle_rejects_randers() {
        assert!(matches!(conn("RAND5").riemannian_reduction_oracle(&sample()), Err(Error::OracleInapplicable(_))));
        assert_eq!(conn("F_EUC").riemannian_reduction_oracle(&sample()).unwrap(), vec![vec![0.0; 4]; 4]);
    }

    #[test]
    fn invalid_configurations() {
        let bad_sigma = Connection::new(
            presets::chart("HEIS5").unwrap(),
            presets::metric("F_EUC").unwrap(),
            ConnectionOptions { eq22_sigma: 0.0, ..Default::default() },
        );
        assert!(bad_sigma.is_err());
        let flat_chart = Chart::parse(2, &["0", "0", "0", "0"]).unwrap();
        let c = Connection::new(flat_chart, presets::metric("F_EUC").unwrap(), ConnectionOptions::default()).unwrap();
        assert!(matches!(c.evaluate(&e1()), Err(Error::DegenerateContact { .. })));
        let indefinite = FinslerMetric::parse(2, "v1^2 - v2^2 + v3^2 + v4^2", "bad", false).unwrap();
        let c = Connection::new(presets::chart("HEIS5").unwrap(), indefinite, ConnectionOptions::default()).unwrap();
        assert!(matches!(c.spray(&e1()), Err(Error::MetricDegenerate { .. })));
    }
}
