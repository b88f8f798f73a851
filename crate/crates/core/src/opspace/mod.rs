//! Linear maps between matrix (sub)spaces and their complete positivity,
//! contractivity and isometry.
//!
//! A [`MatrixMap`] stores its action on the ambient space `M^{d′×d}` as a
//! `(ℓ′ℓ) × (d′d)` matrix acting on row-major vectorizations, extended by
//! zero off its domain.

mod certify;
mod feasibility;
mod recovery;

pub use certify::{
    certify_completely_contractive, certify_completely_isometric, is_completely_positive, CertOptions, CertResult,
    CertWitness, Verdict,
};
pub use feasibility::{extension_feasibility, FeasibilityOutcome};
pub use recovery::{recover_ci_decomposition, CiDecomposition};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::matkernel::{self, c64, column_space, inner, matrix_unit, numeric_rank, unvec_rows, vec_rows, CMatrix, RANK_TOL};
use crate::pencil::Pencil;

/// Orthonormality tolerance for subspace bases.
pub const BASIS_TOL: f64 = 1e-10;

/// A subspace `F ⊆ M^{d′×d}` with a Frobenius-orthonormal basis.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorSubspace {
    d_prime: usize,
    d: usize,
    basis: Vec<CMatrix>,
    full: bool,
}

impl OperatorSubspace {
    /// The whole space `M^{d′×d}` with the matrix-unit basis.
    pub fn full(d_prime: usize, d: usize) -> Self {
        let basis = (0..d_prime).flat_map(|i| (0..d).map(move |j| matrix_unit(d_prime, d, i, j))).collect();
        Self { d_prime, d, basis, full: true }
    }

    /// Block-diagonal matrices `⊕_j M^{d_j′×d_j}`; `blocks` lists `(d_j′, d_j)`.
    pub fn block_diagonal(blocks: &[(usize, usize)]) -> Self {
        let d_prime = blocks.iter().map(|b| b.0).sum();
        let d = blocks.iter().map(|b| b.1).sum();
        let mut basis = Vec::new();
        let (mut r0, mut c0) = (0, 0);
        for &(bp, b) in blocks {
            for a in 0..bp {
                for c in 0..b {
                    basis.push(matrix_unit(d_prime, d, r0 + a, c0 + c));
                }
            }
            r0 += bp;
            c0 += b;
        }
        let full = blocks.len() <= 1;
        Self { d_prime, d, basis, full }
    }

    /// Span of the given matrices, orthonormalized.
    pub fn span(d_prime: usize, d: usize, spanning: &[CMatrix], tol: f64) -> Result<Self> {
        if spanning.iter().any(|m| m.shape() != (d_prime, d)) {
            return Err(Error::ShapeMismatch("spanning set has inconsistent shapes".into()));
        }
        let cols: Vec<_> = spanning.iter().map(vec_rows).collect();
        let q = column_space(&CMatrix::from_columns(&cols), tol);
        if q.ncols() == 0 {
            return Err(Error::InvalidArgument("subspace must be nonzero".into()));
        }
        let basis: Vec<CMatrix> = (0..q.ncols())
            .map(|k| {
                let v: Vec<Complex64> = q.column(k).iter().copied().collect();
                crate::pencil::normalize_phase(unvec_rows(&v, d_prime, d))
            })
            .collect();
        let full = basis.len() == d_prime * d;
        Ok(Self { d_prime, d, basis, full })
    }

    /// Validates a caller-supplied orthonormal basis.
    pub fn from_orthonormal(d_prime: usize, d: usize, basis: Vec<CMatrix>) -> Result<Self> {
        if basis.is_empty() {
            return Err(Error::InvalidArgument("subspace must be nonzero".into()));
        }
        for (a, ea) in basis.iter().enumerate() {
            if ea.shape() != (d_prime, d) {
                return Err(Error::ShapeMismatch(format!("basis element {a} has shape {:?}", ea.shape())));
            }
            for (b, eb) in basis.iter().enumerate().skip(a) {
                let expected = if a == b { 1.0 } else { 0.0 };
                if (inner(ea, eb) - c64(expected, 0.0)).norm() > BASIS_TOL {
                    return Err(Error::InvalidArgument(format!("basis elements {a} and {b} are not orthonormal")));
                }
            }
        }
        let full = basis.len() == d_prime * d;
        Ok(Self { d_prime, d, basis, full })
    }

    /// Range `span{A_j}` of a pencil.
    pub fn pencil_range(l: &Pencil, tol: f64) -> Result<Self> {
        Self::span(l.d_prime(), l.d(), l.coeffs(), tol)
    }

    pub fn d_prime(&self) -> usize {
        self.d_prime
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn basis(&self) -> &[CMatrix] {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn is_full(&self) -> bool {
        self.full
    }

    /// Coordinates of `z ∈ F ⊗ M_n` (a `d′n × dn` matrix) as `n×n` blocks
    /// `Y_i` with `z ≈ Σ e_i ⊗ Y_i`, together with the distance of `z` from
    /// `F ⊗ M_n`.
    pub fn coordinates(&self, z: &CMatrix, n: usize) -> Result<(Vec<CMatrix>, f64)> {
        if z.shape() != (self.d_prime * n, self.d * n) {
            return Err(Error::ShapeMismatch(format!(
                "expected a {}x{} block matrix, got {:?}",
                self.d_prime * n,
                self.d * n,
                z.shape()
            )));
        }
        let ys: Vec<CMatrix> = self
            .basis
            .iter()
            .map(|e| {
                let mut y = matkernel::zeros(n, n);
                for r in 0..self.d_prime {
                    for s in 0..self.d {
                        let w = e[(r, s)].conj();
                        if w.norm() != 0.0 {
                            y += z.view((r * n, s * n), (n, n)) * w;
                        }
                    }
                }
                y
            })
            .collect();
        let mut rebuilt = matkernel::zeros(z.nrows(), z.ncols());
        for (e, y) in self.basis.iter().zip(&ys) {
            rebuilt += matkernel::kron(e, y);
        }
        let distance = matkernel::opnorm(&(z - rebuilt));
        Ok((ys, distance))
    }

    /// Orthogonal projection of an ambient block matrix onto `F ⊗ M_n`.
    pub fn project(&self, z: &CMatrix, n: usize) -> Result<CMatrix> {
        let (ys, _) = self.coordinates(z, n)?;
        let mut out = matkernel::zeros(z.nrows(), z.ncols());
        for (e, y) in self.basis.iter().zip(&ys) {
            out += matkernel::kron(e, y);
        }
        Ok(out)
    }

    pub fn contains(&self, x: &CMatrix, tol: f64) -> bool {
        x.shape() == (self.d_prime, self.d)
            && self.coordinates(x, 1).map(|(_, dist)| dist <= tol * matkernel::opnorm(x).max(1.0)).unwrap_or(false)
    }
}

/// A linear map `φ: F → M^{ℓ′×ℓ}`.
#[derive(Debug, Clone)]
pub struct MatrixMap {
    domain: OperatorSubspace,
    l_prime: usize,
    l: usize,
    action: CMatrix,
}

impl MatrixMap {
    /// Map given by the images of the domain's orthonormal basis.
    pub fn from_basis_images(domain: OperatorSubspace, l_prime: usize, l: usize, images: &[CMatrix]) -> Result<Self> {
        if images.len() != domain.dim() {
            return Err(Error::ShapeMismatch(format!(
                "{} images for a {}-dimensional domain",
                images.len(),
                domain.dim()
            )));
        }
        if images.iter().any(|m| m.shape() != (l_prime, l)) {
            return Err(Error::ShapeMismatch(format!("images must be {l_prime}x{l}")));
        }
        let mut action = matkernel::zeros(l_prime * l, domain.d_prime * domain.d);
        for (e, img) in domain.basis.iter().zip(images) {
            action += vec_rows(img) * vec_rows(e).adjoint();
        }
        Ok(Self { domain, l_prime, l, action })
    }

    /// Map defined by evaluating `f` on the domain basis.
    pub fn from_fn(domain: OperatorSubspace, l_prime: usize, l: usize, f: impl Fn(&CMatrix) -> CMatrix) -> Result<Self> {
        let images: Vec<CMatrix> = domain.basis.iter().map(&f).collect();
        Self::from_basis_images(domain, l_prime, l, &images)
    }

    /// The map `x_k ↦ y_k` on `span{x_k}` (e.g. pencil coefficients mapped
    /// to other coefficients). Linearly dependent `x_k` are allowed when the
    /// `y_k` satisfy the same relations; otherwise the map is not well
    /// defined and `DegeneratePencil` is returned.
    pub fn from_pairs(sources: &[CMatrix], targets: &[CMatrix], tol: f64) -> Result<Self> {
        let first = sources.first().ok_or_else(|| Error::InvalidArgument("no source matrices".into()))?;
        let tfirst = targets.first().ok_or_else(|| Error::InvalidArgument("no target matrices".into()))?;
        if sources.len() != targets.len() {
            return Err(Error::ShapeMismatch("sources and targets differ in count".into()));
        }
        let (d_prime, d) = first.shape();
        let (l_prime, l) = tfirst.shape();
        if targets.iter().any(|t| t.shape() != (l_prime, l)) {
            return Err(Error::ShapeMismatch("targets have inconsistent shapes".into()));
        }
        let src = CMatrix::from_columns(&sources.iter().map(vec_rows).collect::<Vec<_>>());
        let dst = CMatrix::from_columns(&targets.iter().map(vec_rows).collect::<Vec<_>>());
        let domain = OperatorSubspace::span(d_prime, d, sources, tol)?;
        let action = &dst * matkernel::pinv(&src, tol);
        if numeric_rank(&src, tol) != sources.len() {
            let scale = matkernel::opnorm(&dst).max(matkernel::opnorm(&src)).max(1.0);
            if matkernel::opnorm(&(&action * &src - &dst)) > 1e-9 * scale {
                return Err(Error::DegeneratePencil);
            }
        }
        Ok(Self { domain, l_prime, l, action })
    }

    /// `L(x) ↦ M(x)` on the range of a nondegenerate pencil `L`.
    pub fn between_pencils(l: &Pencil, m: &Pencil, tol: f64) -> Result<Self> {
        if l.g() != m.g() {
            return Err(Error::ArityMismatch { expected: l.g(), got: m.g() });
        }
        Self::from_pairs(l.coeffs(), m.coeffs(), tol)
    }

    pub fn identity(d_prime: usize, d: usize) -> Self {
        Self::from_fn(OperatorSubspace::full(d_prime, d), d_prime, d, |x| x.clone()).expect("shapes agree")
    }

    /// The inclusion of a subspace into its ambient space.
    pub fn inclusion(domain: OperatorSubspace) -> Self {
        let (dp, d) = (domain.d_prime, domain.d);
        Self::from_fn(domain, dp, d, |x| x.clone()).expect("shapes agree")
    }

    pub fn transpose(d: usize) -> Self {
        Self::from_fn(OperatorSubspace::full(d, d), d, d, |x| x.transpose()).expect("shapes agree")
    }

    pub fn domain(&self) -> &OperatorSubspace {
        &self.domain
    }

    pub fn l_prime(&self) -> usize {
        self.l_prime
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn action(&self) -> &CMatrix {
        &self.action
    }

    /// `φ(x)`; components of `x` off the domain are ignored.
    pub fn apply(&self, x: &CMatrix) -> Result<CMatrix> {
        if x.shape() != (self.domain.d_prime, self.domain.d) {
            return Err(Error::ShapeMismatch(format!(
                "map input must be {}x{}, got {:?}",
                self.domain.d_prime,
                self.domain.d,
                x.shape()
            )));
        }
        let out = &self.action * vec_rows(x);
        let v: Vec<Complex64> = out.iter().copied().collect();
        Ok(unvec_rows(&v, self.l_prime, self.l))
    }

    /// Images of the domain basis.
    pub fn basis_images(&self) -> Vec<CMatrix> {
        self.domain.basis.iter().map(|e| self.apply(e).expect("basis has domain shape")).collect()
    }

    /// `φ_n(Σ e_i ⊗ Y_i) = Σ φ(e_i) ⊗ Y_i`, rejecting inputs farther than
    /// `tol · max(1, ‖z‖)` from `F ⊗ M_n`.
    pub fn apply_amplified(&self, z: &CMatrix, n: usize, tol: f64) -> Result<CMatrix> {
        let (ys, distance) = self.domain.coordinates(z, n)?;
        if distance > tol * matkernel::opnorm(z).max(1.0) {
            return Err(Error::DomainViolation { distance });
        }
        let mut out = matkernel::zeros(self.l_prime * n, self.l * n);
        for (img, y) in self.basis_images().iter().zip(&ys) {
            out += matkernel::kron(img, y);
        }
        Ok(out)
    }

    /// The level-`n` amplification `φ_n` as a closure.
    pub fn amplify(&self, n: usize) -> impl Fn(&CMatrix) -> Result<CMatrix> + '_ {
        let images = self.basis_images();
        move |z: &CMatrix| {
            let (ys, distance) = self.domain.coordinates(z, n)?;
            if distance > BASIS_TOL * matkernel::opnorm(z).max(1.0) {
                return Err(Error::DomainViolation { distance });
            }
            let mut out = matkernel::zeros(self.l_prime * n, self.l * n);
            for (img, y) in images.iter().zip(&ys) {
                out += matkernel::kron(img, y);
            }
            Ok(out)
        }
    }

    /// Composition `self ∘ other` restricted to `other`'s domain.
    pub fn compose(&self, other: &MatrixMap) -> Result<MatrixMap> {
        if (other.l_prime, other.l) != (self.domain.d_prime, self.domain.d) {
            return Err(Error::ShapeMismatch("composition shapes do not match".into()));
        }
        let images: Vec<CMatrix> =
            other.basis_images().iter().map(|y| self.apply(y)).collect::<Result<_>>()?;
        MatrixMap::from_basis_images(other.domain.clone(), self.l_prime, self.l, &images)
    }

    /// The map `x ↦ a φ(x) b`.
    pub fn sandwich(&self, a: &CMatrix, b: &CMatrix) -> Result<MatrixMap> {
        if a.ncols() != self.l_prime || b.nrows() != self.l {
            return Err(Error::ShapeMismatch("sandwich factors do not match codomain".into()));
        }
        let images: Vec<CMatrix> = self.basis_images().iter().map(|y| a * y * b).collect();
        MatrixMap::from_basis_images(self.domain.clone(), a.nrows(), b.ncols(), &images)
    }

    pub fn scale(&self, t: f64) -> MatrixMap {
        MatrixMap { domain: self.domain.clone(), l_prime: self.l_prime, l: self.l, action: self.action.scale(t) }
    }

    /// True when the action vanishes on the orthocomplement of the domain.
    pub fn vanishes_off_domain(&self, tol: f64) -> bool {
        let cols: Vec<_> = self.domain.basis.iter().map(vec_rows).collect();
        let q = CMatrix::from_columns(&cols);
        let proj = &q * q.adjoint();
        let n = proj.nrows();
        let off = &self.action * (matkernel::identity(n) - proj);
        matkernel::opnorm(&off) <= tol * matkernel::opnorm(&self.action).max(1.0)
    }

    /// Choi matrix `Σ_{ij} E_ij ⊗ φ(E_ij)` of a map on the full square
    /// space `M_d`.
    pub fn choi_matrix(&self) -> Result<CMatrix> {
        let d = self.domain.d;
        if !self.domain.full || self.domain.d_prime != d {
            return Err(Error::NotSquareDomain);
        }
        let mut out = matkernel::zeros(d * self.l_prime, d * self.l);
        for i in 0..d {
            for j in 0..d {
                let img = self.apply(&matrix_unit(d, d, i, j))?;
                out.view_mut((i * self.l_prime, j * self.l), img.shape()).copy_from(&img);
            }
        }
        Ok(out)
    }
}

/// Places `a` (d′×d) in the lower-left corner of a `(d+d′)`-square matrix.
pub fn embed_corner(a: &CMatrix) -> CMatrix {
    let (dp, d) = a.shape();
    let mut out = matkernel::zeros(d + dp, d + dp);
    out.view_mut((d, 0), (dp, d)).copy_from(a);
    out
}

/// The lower-left `d′×d` block of a `(d+d′)`-square matrix.
pub fn corner(z: &CMatrix, d: usize, d_prime: usize) -> Result<CMatrix> {
    if z.shape() != (d + d_prime, d + d_prime) {
        return Err(Error::ShapeMismatch(format!(
            "corner needs a {0}x{0} matrix, got {1:?}",
            d + d_prime,
            z.shape()
        )));
    }
    Ok(z.view((d, 0), (d_prime, d)).into_owned())
}

/// Level-`n` corner of a block matrix in `M_{d+d′} ⊗ M_n`.
pub fn corner_amplified(z: &CMatrix, d: usize, d_prime: usize, n: usize) -> Result<CMatrix> {
    let s = d + d_prime;
    if z.shape() != (s * n, s * n) {
        return Err(Error::ShapeMismatch("amplified corner input has the wrong size".into()));
    }
    Ok(z.view((d * n, 0), (d_prime * n, d * n)).into_owned())
}

/// Element `(λ I_d, b*; a, η I_{d′})` of the operator system `S_F`.
#[derive(Debug, Clone)]
pub struct OperatorSystemElement {
    pub lambda: Complex64,
    pub eta: Complex64,
    pub a: CMatrix,
    pub b: CMatrix,
}

impl OperatorSystemElement {
    pub fn new(domain: &OperatorSubspace, lambda: Complex64, eta: Complex64, a: CMatrix, b: CMatrix) -> Result<Self> {
        for m in [&a, &b] {
            if !domain.contains(m, BASIS_TOL) {
                return Err(Error::DomainViolation { distance: domain.coordinates(m, 1).map(|r| r.1).unwrap_or(f64::NAN) });
            }
        }
        Ok(Self { lambda, eta, a, b })
    }

    pub fn to_matrix(&self) -> CMatrix {
        let (dp, d) = self.a.shape();
        let mut out = matkernel::zeros(d + dp, d + dp);
        for i in 0..d {
            out[(i, i)] = self.lambda;
        }
        for i in 0..dp {
            out[(d + i, d + i)] = self.eta;
        }
        out.view_mut((d, 0), (dp, d)).copy_from(&self.a);
        out.view_mut((0, d), (d, dp)).copy_from(&self.b.adjoint());
        out
    }
}

/// The unital self-adjoint map on `S_F` sending
/// `(λI, b*; a, ηI)` to `(λI, φ(b)*; φ(a), ηI)`.
pub fn embed_offdiagonal(phi: &MatrixMap) -> MatrixMap {
    let (dp, d) = (phi.domain.d_prime, phi.domain.d);
    let (lp, l) = (phi.l_prime, phi.l);
    let (s, t) = (d + dp, l + lp);
    let mut basis = Vec::new();
    let mut images = Vec::new();

    let block_identity = |size: usize, start: usize, len: usize, scale: f64| {
        let mut m = matkernel::zeros(size, size);
        for i in start..start + len {
            m[(i, i)] = c64(scale, 0.0);
        }
        m
    };
    if d > 0 {
        let w = 1.0 / (d as f64).sqrt();
        basis.push(block_identity(s, 0, d, w));
        images.push(block_identity(t, 0, l, w));
    }
    if dp > 0 {
        let w = 1.0 / (dp as f64).sqrt();
        basis.push(block_identity(s, d, dp, w));
        images.push(block_identity(t, l, lp, w));
    }
    for (e, img) in phi.domain.basis.iter().zip(phi.basis_images()) {
        basis.push(embed_corner(e));
        images.push(embed_corner_shape(&img, l, lp));
        basis.push(embed_corner(e).adjoint());
        images.push(embed_corner_shape(&img, l, lp).adjoint());
    }
    let domain = OperatorSubspace { d_prime: s, d: s, basis, full: false };
    MatrixMap::from_basis_images(domain, t, t, &images).expect("consistent shapes")
}

fn embed_corner_shape(a: &CMatrix, l: usize, lp: usize) -> CMatrix {
    let mut out = matkernel::zeros(l + lp, l + lp);
    out.view_mut((l, 0), (lp, l)).copy_from(a);
    out
}

#[allow(dead_code)]
pub(crate) fn default_rank_tol() -> f64 {
    RANK_TOL
}
