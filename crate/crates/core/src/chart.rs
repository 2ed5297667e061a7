//! Adapted charts of a contact structure.
//!
//! The contact form is `dx^n + Γ_a dx^a` (n = 2m+1). The adapted frame is
//! `e_a = ∂_a − Γ_a ∂_n`, and the fundamental 2-form is read off the frame
//! bracket `[e_a, e_b] = ω_ba ∂_n`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::expr::{Bindings, Expr, VarScope};
use crate::jets::{Coord, Jet, JetContext, Scalar};
use crate::linalg::{self, Matrix};

/// Relative pivot threshold below which ω counts as rank-deficient.
pub const OMEGA_RANK_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct DomainBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chart {
    m: usize,
    gamma: Vec<Expr>,
    pub domain_hint: Option<DomainBox>,
}

/// A point of the slit bundle: base point and nonzero admissible vector.
#[derive(Debug, Clone, PartialEq)]
pub struct FiberPoint {
    x: Vec<f64>,
    v: Vec<f64>,
}

impl FiberPoint {
    pub fn new(x: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if x.len() != v.len() + 1 || !v.len().is_multiple_of(2) || v.is_empty() {
            return Err(Error::ShapeMismatch(format!(
                "fiber point needs |x| = 2m+1 and |v| = 2m, got |x| = {}, |v| = {}",
                x.len(),
                v.len()
            )));
        }
        if v.iter().all(|&c| c == 0.0) {
            return Err(Error::InvalidInput("admissible vector v must be nonzero".into()));
        }
        if x.iter().chain(&v).any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("fiber point coordinates".into()));
        }
        Ok(FiberPoint { x, v })
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    pub fn m(&self) -> usize {
        self.v.len() / 2
    }

    /// Same base point, fiber vector scaled by `lambda`.
    pub fn scaled(&self, lambda: f64) -> Result<Self> {
        FiberPoint::new(self.x.clone(), self.v.iter().map(|c| c * lambda).collect())
    }
}

/// Lower and upper components of the fundamental 2-form at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct Omega {
    /// `lower[a][b] = ω_ab`.
    pub lower: Matrix<f64>,
    /// `upper[a][b] = ω^ab`.
    pub upper: Matrix<f64>,
}

impl Chart {
    /// Any `m ≥ 1` is accepted; front ends decide whether `m = 1` is allowed.
    pub fn new(m: usize, gamma: Vec<Expr>) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidInput("m must be positive".into()));
        }
        if gamma.len() != 2 * m {
            return Err(Error::ShapeMismatch(format!("chart with m = {m} needs {} coefficients, got {}", 2 * m, gamma.len())));
        }
        let n = 2 * m + 1;
        for (a, g) in gamma.iter().enumerate() {
            if let Some(bad) = g.free_vars().into_iter().find(|c| !matches!(c, Coord::Base(i) if *i < n)) {
                return Err(Error::InvalidInput(format!("coefficient {} mentions {bad}, only x1..x{n} allowed", a + 1)));
            }
        }
        Ok(Chart { m, gamma, domain_hint: None })
    }

    pub fn parse(m: usize, gamma: &[&str]) -> Result<Self> {
        let scope = VarScope::base(m);
        let exprs = gamma.iter().map(|g| Expr::parse(g, &scope)).collect::<std::result::Result<Vec<_>, _>>()?;
        Chart::new(m, exprs)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Base dimension `2m + 1`.
    pub fn n(&self) -> usize {
        2 * self.m + 1
    }

    pub fn gamma(&self) -> &[Expr] {
        &self.gamma
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n() {
            return Err(Error::ShapeMismatch(format!("base point needs {} coordinates, got {}", self.n(), x.len())));
        }
        Ok(())
    }

    /// Γ_a evaluated on base-point values of any scalar type.
    pub fn gamma_at<T: Scalar>(&self, x: &[T]) -> Result<Vec<T>> {
        self.gamma.iter().map(|g| Ok(g.evaluate(&Bindings::base(x))?)).collect()
    }

    /// `(e_a f)(x)` for an expression in base and (optionally) fiber variables.
    pub fn frame_derivative(&self, f: &Expr, a: usize, x: &[f64], v: Option<&[f64]>) -> Result<f64> {
        self.check_point(x)?;
        if a >= 2 * self.m {
            return Err(Error::InvalidInput(format!("frame index {} out of range 1..={}", a + 1, 2 * self.m)));
        }
        let n = self.n();
        let ctx = JetContext::new((0..n).map(Coord::Base).collect());
        let xs = seed_base(&ctx, x, 1)?;
        let vs: Vec<Jet<f64>> = v.unwrap_or(&[]).iter().map(|&c| Jet::constant(c)).collect();
        let fj = f.evaluate(&Bindings::total(&xs, &vs))?;
        let gamma = self.gamma_at(&xs)?;
        Ok(frame_apply(&fj, &gamma, a, n - 1)?.value())
    }

    /// Fundamental 2-form and its inverse at `x`.
    ///
    /// The inverse satisfies `ω^ab ω_bc = δ^a_c`, or its transpose when
    /// `transpose` is set.
    pub fn omega(&self, x: &[f64], transpose: bool) -> Result<Omega> {
        self.check_point(x)?;
        let n = self.n();
        let ctx = JetContext::new((0..n).map(Coord::Base).collect());
        let xs = seed_base(&ctx, x, 1)?;
        let gamma = self.gamma_at(&xs)?;
        let lower = omega_lower(&gamma, n - 1)?;
        let lower = linalg::values(&lower);
        let upper = omega_upper(&lower, transpose).map_err(|_| Error::DegenerateContact { x: x.to_vec(), rank_required: 2 * self.m })?;
        Ok(Omega { lower, upper })
    }

    /// `(∂_n Γ_a)(x)`; zero exactly when `∂_n` is the Reeb field at `x`.
    pub fn reeb_defect(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x)?;
        let n = self.n();
        let ctx = JetContext::new((0..n).map(Coord::Base).collect());
        let xs = seed_base(&ctx, x, 1)?;
        self.gamma_at(&xs)?.iter().map(|g| Ok(g.partial(&[n - 1])?)).collect()
    }
}

pub(crate) fn seed_base<T: Scalar>(ctx: &Arc<JetContext>, x: &[T], order: u8) -> Result<Vec<Jet<T>>> {
    x.iter()
        .enumerate()
        .map(|(i, c)| Ok(Jet::seed(ctx, ctx.position(Coord::Base(i))?, c.clone(), order)?))
        .collect()
}

/// `e_a f = ∂_a f − Γ_a ∂_n f`, with `n_pos` the jet position of `x^n`.
///
/// Base coordinate `i` must sit at jet position `i`.
pub fn frame_apply<T: Scalar>(f: &Jet<T>, gamma: &[Jet<T>], a: usize, n_pos: usize) -> Result<Jet<T>> {
    Ok(f.diff(a)? - gamma[a].clone() * f.diff(n_pos)?)
}

/// `ω_ab = e_a Γ_b − e_b Γ_a` from jets of the chart coefficients.
pub fn omega_lower<T: Scalar>(gamma: &[Jet<T>], n_pos: usize) -> Result<Matrix<T>> {
    let dim = gamma.len();
    let mut e_gamma: Matrix<T> = Vec::with_capacity(dim);
    for a in 0..dim {
        let row = (0..dim).map(|b| Ok(frame_apply(&gamma[b], gamma, a, n_pos)?.real().clone())).collect::<Result<Vec<T>>>()?;
        e_gamma.push(row);
    }
    Ok((0..dim).map(|a| (0..dim).map(|b| e_gamma[a][b].clone() - e_gamma[b][a].clone()).collect()).collect())
}

pub fn omega_upper<T: Scalar>(lower: &Matrix<T>, transpose: bool) -> std::result::Result<Matrix<T>, linalg::Singular> {
    let inv = linalg::invert(lower, OMEGA_RANK_TOL)?;
    if !transpose {
        return Ok(inv);
    }
    let dim = inv.len();
    Ok((0..dim).map(|a| (0..dim).map(|b| inv[b][a].clone()).collect()).collect())
}

/// Affine adapted change of coordinates `x^a ↦ A x + b`, `x^n ↦ x^n + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptedTransition {
    a: DMatrix<f64>,
    a_inv: DMatrix<f64>,
    b: DVector<f64>,
    c: f64,
}

impl AdaptedTransition {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>, c: f64) -> Result<Self> {
        if !a.is_square() || a.nrows() != b.len() {
            return Err(Error::ShapeMismatch(format!("transition needs square A matching b, got {}x{} and {}", a.nrows(), a.ncols(), b.len())));
        }
        let a_inv = a.clone().try_inverse().ok_or_else(|| Error::InvalidInput("transition matrix A is singular".into()))?;
        Ok(AdaptedTransition { a, a_inv, b, c })
    }

    pub fn identity(dim: usize) -> Self {
        AdaptedTransition::new(DMatrix::identity(dim, dim), DVector::zeros(dim), 0.0).expect("identity is invertible")
    }

    pub fn jacobian(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    /// Image of a base point.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let dim = self.dim();
        let base = &self.a * DVector::from_column_slice(&x[..dim]) + &self.b;
        base.iter().copied().chain(std::iter::once(x[dim] + self.c)).collect()
    }

    /// Preimage of a base point.
    pub fn invert_point<T: Scalar>(&self, y: &[T]) -> Vec<T> {
        let dim = self.dim();
        let mut out: Vec<T> = (0..dim)
            .map(|i| {
                let mut acc = T::zero();
                for j in 0..dim {
                    acc = acc + (y[j].clone() - T::from_f64(self.b[j])).scale(self.a_inv[(i, j)]);
                }
                acc
            })
            .collect();
        out.push(y[dim].clone() - T::from_f64(self.c));
        out
    }
}

/// Components of an admissible tensor of type (p, q) over the 2m frame
/// indices, row-major with contravariant slots first.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibleTensor {
    pub p: usize,
    pub q: usize,
    pub dim: usize,
    pub components: Vec<f64>,
}

impl AdmissibleTensor {
    pub fn new(p: usize, q: usize, dim: usize, components: Vec<f64>) -> Result<Self> {
        let expect = dim.pow((p + q) as u32);
        if components.len() != expect {
            return Err(Error::ShapeMismatch(format!("({p},{q}) tensor over {dim} indices needs {expect} components, got {}", components.len())));
        }
        Ok(AdmissibleTensor { p, q, dim, components })
    }
}

/// Transforms admissible tensor components under an adapted transition:
/// `A` on each contravariant slot, `A⁻¹` on each covariant slot.
pub fn pushforward_admissible(t: &AdmissibleTensor, x: &[f64], tr: &AdaptedTransition) -> Result<(AdmissibleTensor, Vec<f64>)> {
    if t.dim != tr.dim() {
        return Err(Error::ShapeMismatch(format!("tensor over {} indices, transition over {}", t.dim, tr.dim())));
    }
    if x.len() != tr.dim() + 1 {
        return Err(Error::ShapeMismatch(format!("base point needs {} coordinates, got {}", tr.dim() + 1, x.len())));
    }
    let dim = t.dim;
    let rank = t.p + t.q;
    let mut data = t.components.clone();
    for slot in 0..rank {
        let stride = dim.pow((rank - 1 - slot) as u32);
        let mut next = vec![0.0; data.len()];
        for (idx, out) in next.iter_mut().enumerate() {
            let digit = (idx / stride) % dim;
            let rest = idx - digit * stride;
            let mut acc = 0.0;
            for k in 0..dim {
                let w = if slot < t.p { tr.a[(digit, k)] } else { tr.a_inv[(k, digit)] };
                acc += w * data[rest + k * stride];
            }
            *out = acc;
        }
        data = next;
    }
    Ok((AdmissibleTensor { components: data, ..t.clone() }, tr.apply(x)))
}
