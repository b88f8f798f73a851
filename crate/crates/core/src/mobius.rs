//! The matrix Möbius involution `F_v` of the unit ball and the
//! normalizations of ball maps built from it.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fockextract::BlackBoxMap;
use crate::matkernel::{self, condition_number, kron, opnorm, psd_sqrt, CMatrix};
use crate::pencil::{MatrixTuple, Pencil};

/// Maximal norm of a Möbius parameter.
pub const CONTRACTION_MARGIN: f64 = 1e-10;
/// `‖f(0)‖` at or above `1 − BOUNDARY_MARGIN` cannot be normalized.
pub const BOUNDARY_MARGIN: f64 = 1e-8;
/// Resolvents with a larger condition number are treated as singular.
pub const MAX_CONDITION: f64 = 1e12;

/// A strict contraction `v` (ℓ′×ℓ) with its defect operators.
#[derive(Debug, Clone)]
pub struct MobiusParams {
    v: CMatrix,
    left_defect: CMatrix,
    right_defect: CMatrix,
}

impl MobiusParams {
    pub fn new(v: CMatrix) -> Result<Self> {
        let norm = opnorm(&v);
        if norm > 1.0 - CONTRACTION_MARGIN || v.is_empty() {
            return Err(Error::NotContraction { norm });
        }
        let (lp, l) = v.shape();
        let left_defect = psd_sqrt(&(matkernel::identity(lp) - &v * v.adjoint()));
        let right_defect = psd_sqrt(&(matkernel::identity(l) - v.adjoint() * &v));
        Ok(Self { v, left_defect, right_defect })
    }

    pub fn v(&self) -> &CMatrix {
        &self.v
    }

    /// `F_v(u) = v − (I − vv*)^{1/2} u (I − v*u)^{−1} (I − v*v)^{1/2}` with
    /// `v` amplified to `v ⊗ I_k` to match `u` (kℓ′ × kℓ).
    pub fn apply(&self, u: &CMatrix) -> Result<CMatrix> {
        let (lp, l) = self.v.shape();
        let (rows, cols) = u.shape();
        if rows % lp != 0 || cols % l != 0 || rows / lp != cols / l || rows == 0 {
            return Err(Error::ShapeMismatch(format!(
                "input {rows}x{cols} is not an amplification of a {lp}x{l} parameter"
            )));
        }
        let k = rows / lp;
        let id = matkernel::identity(k);
        let v = kron(&self.v, &id);
        let resolvent = matkernel::identity(l * k) - v.adjoint() * u;
        let condition = condition_number(&resolvent);
        if !(condition <= MAX_CONDITION) {
            return Err(Error::SingularResolvent { condition });
        }
        let right = kron(&self.right_defect, &id);
        let solved = resolvent
            .lu()
            .solve(&right)
            .ok_or(Error::SingularResolvent { condition: f64::INFINITY })?;
        Ok(&v - kron(&self.left_defect, &id) * u * solved)
    }
}

/// `F_{f(0)} ∘ f`, a map vanishing at the origin. Applying the same
/// transform again recovers `f`.
pub fn normalize_ballmap(f: &BlackBoxMap) -> Result<BlackBoxMap> {
    let v = f.constant_term()?;
    let norm = opnorm(&v);
    if norm >= 1.0 - BOUNDARY_MARGIN {
        return Err(Error::BoundaryConstantTerm { norm });
    }
    compose_mobius(&MobiusParams::new(v)?, f)
}

/// `x ↦ F_v(f(x))`.
pub fn compose_mobius(params: &MobiusParams, f: &BlackBoxMap) -> Result<BlackBoxMap> {
    if params.v().shape() != (f.l_prime(), f.l()) {
        return Err(Error::ShapeMismatch("Möbius parameter does not match the map's output shape".into()));
    }
    let inner = f.clone();
    let p = params.clone();
    BlackBoxMap::new(f.g(), f.l_prime(), f.l(), move |x| p.apply(&inner.eval(x)?))
}

type TupleEvaluator = dyn Fn(&MatrixTuple) -> Result<MatrixTuple> + Send + Sync;

/// A map between matrix tuples, `(M_n)^g → (M_n)^h`.
#[derive(Clone)]
pub struct TupleMap {
    g: usize,
    h: usize,
    evaluator: Arc<TupleEvaluator>,
}

impl std::fmt::Debug for TupleMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TupleMap").field("g", &self.g).field("h", &self.h).finish_non_exhaustive()
    }
}

impl TupleMap {
    pub fn new(
        g: usize,
        h: usize,
        evaluator: impl Fn(&MatrixTuple) -> Result<MatrixTuple> + Send + Sync + 'static,
    ) -> Self {
        Self { g, h, evaluator: Arc::new(evaluator) }
    }

    pub fn identity(g: usize) -> Self {
        Self::new(g, g, |x| Ok(x.clone()))
    }

    /// `x ↦ (Σ_j c_{ij} x_j)_i` for an `h×g` scalar matrix `c`.
    pub fn linear(c: CMatrix) -> Self {
        let (h, g) = c.shape();
        Self::new(g, h, move |x| {
            let n = x.n();
            MatrixTuple::new(
                (0..h)
                    .map(|i| (0..g).fold(matkernel::zeros(n, n), |acc, j| acc + x.get(j) * c[(i, j)]))
                    .collect(),
            )
        })
    }

    pub fn g(&self) -> usize {
        self.g
    }

    pub fn h(&self) -> usize {
        self.h
    }

    pub fn eval(&self, x: &MatrixTuple) -> Result<MatrixTuple> {
        if x.g() != self.g {
            return Err(Error::ArityMismatch { expected: self.g, got: x.g() });
        }
        let out = (self.evaluator)(x)?;
        if out.g() != self.h || out.n() != x.n() {
            return Err(Error::ShapeMismatch(format!(
                "tuple map returned {} entries of size {}, expected {} of size {}",
                out.g(),
                out.n(),
                self.h,
                x.n()
            )));
        }
        Ok(out)
    }
}

/// `x ↦ L′(f(x))`.
pub fn compose_with_target_pencil(f: &TupleMap, lp: &Pencil) -> Result<BlackBoxMap> {
    if lp.g() != f.h() {
        return Err(Error::ShapeMismatch(format!(
            "target pencil has {} variables, map produces {}",
            lp.g(),
            f.h()
        )));
    }
    let inner = f.clone();
    let pencil = lp.clone();
    BlackBoxMap::new(f.g(), lp.d_prime(), lp.d(), move |x| pencil.eval(&inner.eval(x)?))
}
