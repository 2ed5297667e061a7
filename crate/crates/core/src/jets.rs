//! Truncated multivariate Taylor jets for nested forward-mode differentiation.
//!
//! A [`Jet`] stores the Taylor coefficients of a scalar function around a
//! point, over a small set of *active directions* declared by a
//! [`JetContext`]. Coefficients are kept up to a total degree of at most
//! [`MAX_ORDER`]. Monomials are stored in graded order, so truncating a jet to
//! a lower order is a prefix slice.
//!
//! The coefficient type is generic over [`Scalar`], and `Jet<T>` is itself a
//! [`Scalar`]. Nesting `Jet<Jet<f64>>` therefore yields mixed partials whose
//! total order exceeds the per-level limit.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::{Arc, Mutex, OnceLock};

use thiserror::Error;

/// Highest total degree a single jet level carries.
pub const MAX_ORDER: u8 = 4;

/// Marker used for constant jets, which are exact at every order.
const UNBOUNDED: u8 = u8::MAX;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum JetError {
    #[error("jet order {0} outside the supported range 1..={MAX_ORDER}")]
    Configuration(u8),
    #[error("multi-index of order {requested} exceeds jet truncation order {available}")]
    OrderOverflow { requested: usize, available: u8 },
    #[error("direction {0:?} is not active in this jet context")]
    InactiveDirection(Coord),
    #[error("domain error: {0}")]
    Domain(String),
}

/// A differentiation direction, tagged by the kind of coordinate it belongs to.
///
/// Indices are zero-based: `Base(0)` is `x1`, `Fiber(0)` is `v1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Coord {
    Base(usize),
    Fiber(usize),
    Param,
}

impl fmt::Display for Coord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coord::Base(i) => write!(f, "x{}", i + 1),
            Coord::Fiber(a) => write!(f, "v{}", a + 1),
            Coord::Param => write!(f, "t"),
        }
    }
}

/// Real-like values that the evaluator and the geometry pipeline compute with.
///
/// Fallible operations return [`JetError::Domain`] instead of producing
/// non-finite values.
pub trait Scalar: Clone + fmt::Debug + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Neg<Output = Self> {
    fn from_f64(c: f64) -> Self;
    /// The underlying real value (the constant term, recursively).
    fn value(&self) -> f64;
    /// `self += a * b`.
    fn add_mul_assign(&mut self, a: &Self, b: &Self);
    fn scale(&self, c: f64) -> Self;
    fn exp(&self) -> Self;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn recip(&self) -> Result<Self, JetError>;
    fn ln(&self) -> Result<Self, JetError>;
    fn powf(&self, p: f64) -> Result<Self, JetError>;
    /// True only for an exact zero, including every derivative term.
    fn is_zero(&self) -> bool;

    fn zero() -> Self {
        Self::from_f64(0.0)
    }

    fn sqrt(&self) -> Result<Self, JetError> {
        self.powf(0.5)
    }

    fn powi(&self, n: i32) -> Result<Self, JetError> {
        if n < 0 {
            return self.recip()?.powi(-n);
        }
        let mut base = self.clone();
        let mut acc: Option<Self> = None;
        let mut k = n as u32;
        while k > 0 {
            if k & 1 == 1 {
                acc = Some(match acc {
                    Some(a) => a * base.clone(),
                    None => base.clone(),
                });
            }
            k >>= 1;
            if k > 0 {
                base = base.clone() * base;
            }
        }
        Ok(acc.unwrap_or_else(|| Self::from_f64(1.0)))
    }

    fn div(&self, other: &Self) -> Result<Self, JetError> {
        Ok(self.clone() * other.recip()?)
    }
}

impl Scalar for f64 {
    fn from_f64(c: f64) -> Self {
        c
    }
    fn value(&self) -> f64 {
        *self
    }
    fn add_mul_assign(&mut self, a: &Self, b: &Self) {
        *self += a * b;
    }
    fn scale(&self, c: f64) -> Self {
        self * c
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    fn exp(&self) -> Self {
        f64::exp(*self)
    }
    fn sin(&self) -> Self {
        f64::sin(*self)
    }
    fn cos(&self) -> Self {
        f64::cos(*self)
    }
    fn recip(&self) -> Result<Self, JetError> {
        if *self == 0.0 {
            return Err(JetError::Domain("division by zero".into()));
        }
        Ok(1.0 / self)
    }
    fn ln(&self) -> Result<Self, JetError> {
        if *self <= 0.0 {
            return Err(JetError::Domain(format!("log of non-positive value {self}")));
        }
        Ok(f64::ln(*self))
    }
    fn powf(&self, p: f64) -> Result<Self, JetError> {
        if *self < 0.0 || (*self == 0.0 && p < 0.0) {
            return Err(JetError::Domain(format!("{self} raised to non-integer power {p}")));
        }
        Ok(f64::powf(*self, p))
    }
}

/// Monomial bookkeeping for a fixed number of directions at [`MAX_ORDER`].
#[derive(Debug)]
pub struct JetSpace {
    dims: usize,
    monomials: Vec<Vec<u8>>,
    /// `counts[r]` = number of monomials of degree `<= r`.
    counts: [usize; MAX_ORDER as usize + 1],
    index: HashMap<Vec<u8>, usize>,
    /// CSR list of `(i, j)` factor pairs for each product monomial.
    pair_start: Vec<usize>,
    pairs: Vec<(u32, u32)>,
    /// `raise[d][k]` = index of monomial `k + e_d` (when its degree fits).
    raise: Vec<Vec<Option<usize>>>,
    factorials: Vec<f64>,
}

impl JetSpace {
    fn build(dims: usize) -> Self {
        let mut monomials: Vec<Vec<u8>> = vec![vec![0; dims]];
        let mut counts = [0usize; MAX_ORDER as usize + 1];
        counts[0] = 1;
        let mut frontier = vec![vec![0u8; dims]];
        for degree in 1..=MAX_ORDER as usize {
            // Non-decreasing first-changed-position extension enumerates each
            // monomial of the next degree exactly once.
            let mut next = Vec::new();
            for mono in &frontier {
                let last = mono.iter().rposition(|&e| e > 0).unwrap_or(0);
                for d in last..dims {
                    let mut m = mono.clone();
                    m[d] += 1;
                    next.push(m);
                }
            }
            next.sort_by(|a, b| b.cmp(a));
            monomials.extend(next.iter().cloned());
            counts[degree] = monomials.len();
            frontier = next;
        }
        let index: HashMap<Vec<u8>, usize> = monomials.iter().enumerate().map(|(i, m)| (m.clone(), i)).collect();

        let mut pair_start = Vec::with_capacity(monomials.len() + 1);
        let mut pairs = Vec::new();
        for target in &monomials {
            pair_start.push(pairs.len());
            for (i, left) in monomials.iter().enumerate() {
                if left.iter().zip(target).all(|(l, t)| l <= t) {
                    let right: Vec<u8> = target.iter().zip(left).map(|(t, l)| t - l).collect();
                    pairs.push((i as u32, index[&right] as u32));
                }
            }
        }
        pair_start.push(pairs.len());

        let raise = (0..dims)
            .map(|d| {
                monomials
                    .iter()
                    .map(|m| {
                        let mut up = m.clone();
                        up[d] += 1;
                        index.get(&up).copied()
                    })
                    .collect()
            })
            .collect();

        let factorials = monomials
            .iter()
            .map(|m| m.iter().map(|&e| (1..=e as u32).product::<u32>() as f64).product())
            .collect();

        JetSpace { dims, monomials, counts, index, pair_start, pairs, raise, factorials }
    }

    /// Shared space for `dims` directions, built once per process.
    pub fn get(dims: usize) -> Arc<JetSpace> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<JetSpace>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().expect("jet space cache poisoned");
        guard.entry(dims).or_insert_with(|| Arc::new(JetSpace::build(dims))).clone()
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    fn len(&self, order: u8) -> usize {
        self.counts[order as usize]
    }
}

/// The declared set of active directions for one evaluation.
#[derive(Debug)]
pub struct JetContext {
    dirs: Vec<Coord>,
    space: Arc<JetSpace>,
}

impl JetContext {
    pub fn new(dirs: Vec<Coord>) -> Arc<Self> {
        let space = JetSpace::get(dirs.len());
        Arc::new(JetContext { dirs, space })
    }

    pub fn directions(&self) -> &[Coord] {
        &self.dirs
    }

    pub fn position(&self, c: Coord) -> Result<usize, JetError> {
        self.dirs.iter().position(|&d| d == c).ok_or(JetError::InactiveDirection(c))
    }
}

/// Jet of the coordinate function `coord` at `value`, truncated at `order`.
pub fn seed_variable<T: Scalar>(ctx: &Arc<JetContext>, coord: Coord, value: T, order: u8) -> Result<Jet<T>, JetError> {
    let pos = ctx.position(coord)?;
    Jet::seed(ctx, pos, value, order)
}

/// Truncated Taylor expansion; see the module docs.
#[derive(Clone)]
pub struct Jet<T> {
    ctx: Option<Arc<JetContext>>,
    order: u8,
    coeffs: Vec<T>,
}

impl<T: fmt::Debug> fmt::Debug for Jet<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = f.debug_struct("Jet");
        if self.order == UNBOUNDED {
            s.field("order", &"const");
        } else {
            s.field("order", &self.order);
        }
        s.field("coeffs", &self.coeffs).finish()
    }
}

impl<T: Scalar> Jet<T> {
    pub fn constant(c: T) -> Self {
        Jet { ctx: None, order: UNBOUNDED, coeffs: vec![c] }
    }

    /// Jet of the `pos`-th active direction of `ctx` at `value`.
    pub fn seed(ctx: &Arc<JetContext>, pos: usize, value: T, order: u8) -> Result<Self, JetError> {
        if order == 0 || order > MAX_ORDER {
            return Err(JetError::Configuration(order));
        }
        let space = &ctx.space;
        let mut coeffs = vec![T::zero(); space.len(order)];
        coeffs[0] = value;
        let mut unit = vec![0u8; space.dims];
        unit[pos] = 1;
        coeffs[space.index[&unit]] = T::from_f64(1.0);
        Ok(Jet { ctx: Some(ctx.clone()), order, coeffs })
    }

    /// Truncation order; `None` for exact constants.
    pub fn order(&self) -> Option<u8> {
        (self.order != UNBOUNDED).then_some(self.order)
    }

    pub fn is_constant(&self) -> bool {
        self.ctx.is_none()
    }

    pub fn real(&self) -> &T {
        &self.coeffs[0]
    }

    /// Mixed partial derivative along the given positions (repeats allowed).
    pub fn partial(&self, positions: &[usize]) -> Result<T, JetError> {
        let Some(ctx) = &self.ctx else {
            return Ok(if positions.is_empty() { self.coeffs[0].clone() } else { T::zero() });
        };
        if positions.len() > self.order as usize {
            return Err(JetError::OrderOverflow { requested: positions.len(), available: self.order });
        }
        let space = &ctx.space;
        let mut mono = vec![0u8; space.dims];
        for &p in positions {
            mono[p] += 1;
        }
        let k = space.index[&mono];
        Ok(self.coeffs[k].scale(space.factorials[k]))
    }

    /// Mixed partial derivative along the named coordinates.
    pub fn extract(&self, idx: &[Coord]) -> Result<T, JetError> {
        match &self.ctx {
            None => Ok(if idx.is_empty() { self.coeffs[0].clone() } else { T::zero() }),
            Some(ctx) => {
                let positions = idx.iter().map(|&c| ctx.position(c)).collect::<Result<Vec<_>, _>>()?;
                self.partial(&positions)
            }
        }
    }

    /// First derivative along direction `pos`, truncated one order lower.
    pub fn diff(&self, pos: usize) -> Result<Self, JetError> {
        let Some(ctx) = &self.ctx else {
            return Ok(Jet::constant(T::zero()));
        };
        if self.order == 0 {
            return Err(JetError::OrderOverflow { requested: 1, available: 0 });
        }
        let space = &ctx.space;
        let order = self.order - 1;
        let raise = &space.raise[pos];
        let coeffs = (0..space.len(order))
            .map(|k| {
                let up = raise[k].expect("raised monomial within max order");
                let e = space.monomials[up][pos] as f64;
                self.coeffs[up].scale(e)
            })
            .collect();
        Ok(Jet { ctx: Some(ctx.clone()), order, coeffs })
    }

    fn zeroed_constant_term(&self) -> Self {
        let mut h = self.clone();
        h.coeffs[0] = T::zero();
        h
    }

    /// `sum_k c[k] * h^k` by Horner, with `h = self - self.real()`.
    fn compose(&self, taylor: Vec<T>) -> Self {
        if self.ctx.is_none() {
            return Jet::constant(taylor[0].clone());
        }
        let h = self.zeroed_constant_term();
        let top = taylor.len().min(self.order as usize + 1);
        let mut acc = Jet::constant(taylor[top - 1].clone());
        for k in (0..top - 1).rev() {
            acc = acc * h.clone();
            acc.coeffs[0] = acc.coeffs[0].clone() + taylor[k].clone();
        }
        acc
    }

    fn taylor_len(&self) -> usize {
        if self.ctx.is_none() {
            1
        } else {
            self.order as usize + 1
        }
    }

    fn require_positive(&self, what: &str) -> Result<(), JetError> {
        let v = self.value();
        if v > 0.0 {
            Ok(())
        } else {
            Err(JetError::Domain(format!("{what} of non-positive value {v}")))
        }
    }
}

fn same_ctx<T>(a: &Jet<T>, b: &Jet<T>) -> Arc<JetContext> {
    let ca = a.ctx.as_ref().expect("non-constant");
    debug_assert!(b.ctx.as_ref().is_none_or(|cb| Arc::ptr_eq(ca, cb)), "jets from different contexts");
    ca.clone()
}

impl<T: Scalar> Add for Jet<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        match (&self.ctx, &rhs.ctx) {
            (None, None) => Jet::constant(self.coeffs[0].clone() + rhs.coeffs[0].clone()),
            (Some(_), None) => {
                let mut out = self;
                out.coeffs[0] = out.coeffs[0].clone() + rhs.coeffs[0].clone();
                out
            }
            (None, Some(_)) => rhs + self,
            (Some(_), Some(_)) => {
                let ctx = same_ctx(&self, &rhs);
                let order = self.order.min(rhs.order);
                let n = ctx.space.len(order);
                let coeffs = self.coeffs[..n].iter().zip(&rhs.coeffs[..n]).map(|(a, b)| a.clone() + b.clone()).collect();
                Jet { ctx: Some(ctx), order, coeffs }
            }
        }
    }
}

impl<T: Scalar> Neg for Jet<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Jet { ctx: self.ctx, order: self.order, coeffs: self.coeffs.into_iter().map(|c| -c).collect() }
    }
}

impl<T: Scalar> Sub for Jet<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl<T: Scalar> Mul for Jet<T> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let mut out = Jet::constant(T::zero());
        out.add_mul_assign(&self, &rhs);
        out
    }
}

impl<T: Scalar> Scalar for Jet<T> {
    fn from_f64(c: f64) -> Self {
        Jet::constant(T::from_f64(c))
    }

    fn value(&self) -> f64 {
        self.coeffs[0].value()
    }

    fn add_mul_assign(&mut self, a: &Self, b: &Self) {
        match (&a.ctx, &b.ctx) {
            (None, None) => self.coeffs[0].add_mul_assign(&a.coeffs[0], &b.coeffs[0]),
            (Some(_), None) | (None, Some(_)) => {
                let (jet, k) = if a.ctx.is_some() { (a, &b.coeffs[0]) } else { (b, &a.coeffs[0]) };
                let ctx = jet.ctx.clone().unwrap();
                let order = self.order.min(jet.order);
                let n = ctx.space.len(order);
                self.widen(&ctx, order);
                for (acc, c) in self.coeffs[..n].iter_mut().zip(&jet.coeffs[..n]) {
                    acc.add_mul_assign(c, k);
                }
            }
            (Some(_), Some(_)) => {
                let ctx = same_ctx(a, b);
                let order = self.order.min(a.order).min(b.order);
                self.widen(&ctx, order);
                let space = &ctx.space;
                for k in 0..space.len(order) {
                    let acc = &mut self.coeffs[k];
                    for &(i, j) in &space.pairs[space.pair_start[k]..space.pair_start[k + 1]] {
                        acc.add_mul_assign(&a.coeffs[i as usize], &b.coeffs[j as usize]);
                    }
                }
            }
        }
    }

    fn is_zero(&self) -> bool {
        self.coeffs.iter().all(Scalar::is_zero)
    }

    fn scale(&self, c: f64) -> Self {
        Jet { ctx: self.ctx.clone(), order: self.order, coeffs: self.coeffs.iter().map(|x| x.scale(c)).collect() }
    }

    fn exp(&self) -> Self {
        let e = self.real().exp();
        let mut taylor = Vec::with_capacity(self.taylor_len());
        let mut fact = 1.0;
        for k in 0..self.taylor_len() {
            if k > 0 {
                fact *= k as f64;
            }
            taylor.push(e.scale(1.0 / fact));
        }
        self.compose(taylor)
    }

    fn sin(&self) -> Self {
        let (s, c) = (self.real().sin(), self.real().cos());
        let cycle = [s.clone(), c.clone(), -s, -c];
        self.compose(trig_taylor(&cycle, self.taylor_len()))
    }

    fn cos(&self) -> Self {
        let (s, c) = (self.real().sin(), self.real().cos());
        let cycle = [c.clone(), -s.clone(), -c, s];
        self.compose(trig_taylor(&cycle, self.taylor_len()))
    }

    fn recip(&self) -> Result<Self, JetError> {
        if self.value() == 0.0 {
            return Err(JetError::Domain("division by zero".into()));
        }
        let inv = self.real().recip()?;
        let mut taylor = Vec::with_capacity(self.taylor_len());
        let mut term = inv.clone();
        for k in 0..self.taylor_len() {
            taylor.push(if k % 2 == 0 { term.clone() } else { -term.clone() });
            term = term * inv.clone();
        }
        Ok(self.compose(taylor))
    }

    fn ln(&self) -> Result<Self, JetError> {
        self.require_positive("log")?;
        let inv = self.real().recip()?;
        let mut taylor = vec![self.real().ln()?];
        let mut term = inv.clone();
        for k in 1..self.taylor_len() {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            taylor.push(term.scale(sign / k as f64));
            term = term * inv.clone();
        }
        Ok(self.compose(taylor))
    }

    fn powf(&self, p: f64) -> Result<Self, JetError> {
        if self.ctx.is_none() {
            return Ok(Jet::constant(self.real().powf(p)?));
        }
        self.require_positive(if p == 0.5 { "sqrt" } else { "non-integer power" })?;
        let base = self.real().powf(p)?;
        let inv = self.real().recip()?;
        let mut taylor = Vec::with_capacity(self.taylor_len());
        let mut binom = 1.0;
        let mut term = base;
        for k in 0..self.taylor_len() {
            if k > 0 {
                binom *= (p - (k - 1) as f64) / k as f64;
                term = term * inv.clone();
            }
            taylor.push(term.scale(binom));
        }
        Ok(self.compose(taylor))
    }
}

impl<T: Scalar> Jet<T> {
    /// Grows `self` into a full-length jet of `ctx` at `order` (dropping
    /// higher coefficients if `self` was longer).
    fn widen(&mut self, ctx: &Arc<JetContext>, order: u8) {
        let n = ctx.space.len(order);
        if self.ctx.is_none() {
            let c = self.coeffs[0].clone();
            self.coeffs = vec![T::zero(); n];
            self.coeffs[0] = c;
            self.ctx = Some(ctx.clone());
        } else {
            self.coeffs.truncate(n);
        }
        self.order = self.order.min(order);
    }
}

fn trig_taylor<T: Scalar>(cycle: &[T; 4], len: usize) -> Vec<T> {
    let mut fact = 1.0;
    (0..len)
        .map(|k| {
            if k > 0 {
                fact *= k as f64;
            }
            cycle[k % 4].scale(1.0 / fact)
        })
        .collect()
}

/// Mixed partial of `jet` along the named coordinates, as a real.
pub fn extract(jet: &Jet<f64>, idx: &[Coord]) -> Result<f64, JetError> {
    jet.extract(idx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ctx(dirs: &[Coord]) -> Arc<JetContext> {
        JetContext::new(dirs.to_vec())
    }

    #[test]
    fn seed_has_unit_first_order_coefficient() {
        let c = ctx(&[Coord::Base(0), Coord::Base(1)]);
        let x = seed_variable(&c, Coord::Base(0), 2.0, 2).unwrap();
        assert_eq!(extract(&x, &[]).unwrap(), 2.0);
        assert_eq!(extract(&x, &[Coord::Base(0)]).unwrap(), 1.0);
        assert_eq!(extract(&x, &[Coord::Base(1)]).unwrap(), 0.0);
        assert_eq!(extract(&x, &[Coord::Base(0), Coord::Base(0)]).unwrap(), 0.0);
        assert_eq!(extract(&x, &[Coord::Base(0), Coord::Base(1)]).unwrap(), 0.0);

        let cv = ctx(&[Coord::Fiber(0)]);
        let v = seed_variable(&cv, Coord::Fiber(0), 0.0, 1).unwrap();
        assert_eq!(extract(&v, &[]).unwrap(), 0.0);
        assert_eq!(extract(&v, &[Coord::Fiber(0)]).unwrap(), 1.0);
    }

    #[test]
    fn seed_rejects_bad_order() {
        let c = ctx(&[Coord::Base(0)]);
        assert_eq!(seed_variable(&c, Coord::Base(0), 1.0, 0).unwrap_err(), JetError::Configuration(0));
        assert_eq!(seed_variable(&c, Coord::Base(0), 1.0, 5).unwrap_err(), JetError::Configuration(5));
        assert!(matches!(
            seed_variable(&c, Coord::Fiber(0), 1.0, 1),
            Err(JetError::InactiveDirection(Coord::Fiber(0)))
        ));
    }

    #[test]
    fn bilinear_mixed_partial() {
        let c = ctx(&[Coord::Base(0), Coord::Base(1)]);
        let x1 = seed_variable(&c, Coord::Base(0), 3.0, 2).unwrap();
        let x2 = seed_variable(&c, Coord::Base(1), 5.0, 2).unwrap();
        let p = x1 * x2;
        assert_eq!(p.value(), 15.0);
        assert_eq!(extract(&p, &[Coord::Base(0), Coord::Base(1)]).unwrap(), 1.0);
    }

    #[test]
    fn extract_normalizes_to_derivatives() {
        let c = ctx(&[Coord::Fiber(0)]);
        let v = seed_variable(&c, Coord::Fiber(0), 2.0, 3).unwrap();
        let cube = v.powi(3).unwrap();
        assert_eq!(extract(&cube, &[Coord::Fiber(0), Coord::Fiber(0)]).unwrap(), 12.0);
        assert_eq!(extract(&cube, &[Coord::Fiber(0); 3]).unwrap(), 6.0);

        let c = ctx(&[Coord::Base(0)]);
        let x = seed_variable(&c, Coord::Base(0), 0.0, 3).unwrap();
        let e = x.exp();
        assert_relative_eq!(extract(&e, &[Coord::Base(0); 3]).unwrap(), 1.0, epsilon = 1e-15);
        assert_eq!(extract(&e, &[]).unwrap(), e.value());
    }

    #[test]
    fn overflow_is_reported() {
        let c = ctx(&[Coord::Base(0)]);
        let x = seed_variable(&c, Coord::Base(0), 1.0, 2).unwrap();
        assert_eq!(
            extract(&x, &[Coord::Base(0); 3]).unwrap_err(),
            JetError::OrderOverflow { requested: 3, available: 2 }
        );
        let d = x.diff(0).unwrap().diff(0).unwrap();
        assert!(d.diff(0).is_err());
    }

    #[test]
    fn diff_lowers_order() {
        let c = ctx(&[Coord::Base(0), Coord::Fiber(0)]);
        let x = seed_variable(&c, Coord::Base(0), 0.3, 4).unwrap();
        let v = seed_variable(&c, Coord::Fiber(0), 1.7, 4).unwrap();
        let f = x.sin() * v.powi(3).unwrap();
        let fv = f.diff(1).unwrap();
        assert_eq!(fv.order(), Some(3));
        // d/dv d/dx (sin x v^3) = 3 cos x v^2
        let expect = 3.0 * 0.3f64.cos() * 1.7 * 1.7;
        assert_relative_eq!(fv.partial(&[0]).unwrap(), expect, epsilon = 1e-13);
        assert_relative_eq!(f.partial(&[0, 1]).unwrap(), expect, epsilon = 1e-13);
    }

    #[test]
    fn domain_errors_instead_of_nan() {
        let c = ctx(&[Coord::Base(0)]);
        let x = seed_variable(&c, Coord::Base(0), 0.0, 2).unwrap();
        assert!(matches!(x.recip(), Err(JetError::Domain(_))));
        assert!(matches!(x.sqrt(), Err(JetError::Domain(_))));
        assert!(matches!(x.ln(), Err(JetError::Domain(_))));
        let neg = seed_variable(&c, Coord::Base(0), -1.0, 2).unwrap();
        assert!(neg.powf(1.5).is_err());
        assert!(neg.powi(3).is_ok());
    }

    #[test]
    fn nested_jets_reach_fifth_order() {
        // f(x) = x^5 at x = 1: fifth derivative 120, split across two levels.
        let outer = JetContext::new(vec![Coord::Base(0)]);
        let inner = JetContext::new(vec![Coord::Base(0)]);
        let xo = Jet::seed(&outer, 0, 1.0, 1).unwrap();
        let x = Jet::seed(&inner, 0, xo, 4).unwrap();
        let f = x.powi(5).unwrap();
        let d4 = f.partial(&[0, 0, 0, 0]).unwrap();
        assert_relative_eq!(d4.value(), 120.0, epsilon = 1e-12);
        assert_relative_eq!(d4.partial(&[0]).unwrap(), 120.0, epsilon = 1e-12);
    }

    #[test]
    fn monomial_table_sizes() {
        let s = JetSpace::get(9);
        assert_eq!(s.len(4), 715);
        assert_eq!(s.len(3), 220);
        assert_eq!(s.len(0), 1);
        for (k, m) in s.monomials.iter().enumerate() {
            let deg: u8 = m.iter().sum();
            assert!(k < s.len(deg));
            if deg > 0 {
                assert!(k >= s.len(deg - 1));
            }
        }
    }
}
