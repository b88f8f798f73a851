//! Dense complex matrix primitives.
//!
//! Everything here works on [`CMatrix`] (a dense `nalgebra` matrix of
//! `Complex64`). Index conventions follow the Kronecker layout used across
//! the crate: entry `(i * b.rows + k, j * b.cols + l)` of `kron(a, b)` is
//! `a[(i, j)] * b[(k, l)]`, and "vec" means row-major vectorization.
//!
//! Randomness is complex Ginibre: i.i.d. entries `(x + iy) / sqrt(2)` with
//! `x, y` standard normal, drawn from a `ChaCha8Rng` seeded with a `u64`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;
pub type Rng = ChaCha8Rng;

/// Default relative rank tolerance.
pub const RANK_TOL: f64 = 1e-9;

#[inline]
pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn seeded_rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn zeros(rows: usize, cols: usize) -> CMatrix {
    CMatrix::zeros(rows, cols)
}

/// Builds a matrix from real row-major data.
pub fn from_real_rows(rows: usize, cols: usize, data: &[f64]) -> CMatrix {
    assert_eq!(data.len(), rows * cols);
    CMatrix::from_fn(rows, cols, |i, j| c64(data[i * cols + j], 0.0))
}

pub fn diag_real(values: &[f64]) -> CMatrix {
    let n = values.len();
    CMatrix::from_fn(n, n, |i, j| if i == j { c64(values[i], 0.0) } else { c64(0.0, 0.0) })
}

/// Matrix unit `E_{ij}` of the given shape.
pub fn matrix_unit(rows: usize, cols: usize, i: usize, j: usize) -> CMatrix {
    let mut m = zeros(rows, cols);
    m[(i, j)] = c64(1.0, 0.0);
    m
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Block-diagonal direct sum `a ⊕ b`.
pub fn direct_sum(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let mut out = zeros(a.nrows() + b.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((a.nrows(), a.ncols()), b.shape()).copy_from(b);
    out
}

pub fn block_diag(blocks: &[CMatrix]) -> CMatrix {
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), b.shape()).copy_from(b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

/// Singular values in decreasing order.
pub fn singular_values(a: &CMatrix) -> Vec<f64> {
    if a.is_empty() {
        return Vec::new();
    }
    let mut s: Vec<f64> = a.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// Operator (spectral) norm: the largest singular value.
pub fn opnorm(a: &CMatrix) -> f64 {
    singular_values(a).first().copied().unwrap_or(0.0)
}

/// Number of singular values above `tol * sigma_max`.
pub fn numeric_rank(a: &CMatrix, tol: f64) -> usize {
    let s = singular_values(a);
    match s.first() {
        Some(&top) if top > 0.0 => s.iter().filter(|&&v| v > tol * top).count(),
        _ => 0,
    }
}

pub fn frobenius(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Row-major vectorization.
pub fn vec_rows(a: &CMatrix) -> CVector {
    CVector::from_iterator(a.len(), (0..a.nrows()).flat_map(|i| (0..a.ncols()).map(move |j| a[(i, j)])))
}

pub fn unvec_rows(v: &[Complex64], rows: usize, cols: usize) -> CMatrix {
    assert_eq!(v.len(), rows * cols);
    CMatrix::from_fn(rows, cols, |i, j| v[i * cols + j])
}

/// Frobenius inner product `<a, b> = tr(a* b)`.
pub fn inner(a: &CMatrix, b: &CMatrix) -> Complex64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

pub fn standard_complex_normal(rng: &mut Rng) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    c64(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Complex Ginibre matrix.
pub fn ginibre(rows: usize, cols: usize, rng: &mut Rng) -> CMatrix {
    // Column-major fill order is part of the reproducibility contract.
    CMatrix::from_fn(rows, cols, |_, _| standard_complex_normal(rng))
}

/// Random Hermitian matrix `(G + G*) / 2` with `G` Ginibre.
pub fn random_hermitian(n: usize, rng: &mut Rng) -> CMatrix {
    let g = ginibre(n, n, rng);
    (&g + g.adjoint()).scale(0.5)
}

/// Haar-distributed unitary: QR of a Ginibre matrix with the diagonal of `R`
/// normalized to positive reals.
pub fn random_unitary_with(n: usize, rng: &mut Rng) -> CMatrix {
    assert!(n >= 1, "unitary size must be positive");
    let g = ginibre(n, n, rng);
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { c64(1.0, 0.0) };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    q
}

pub fn random_unitary(n: usize, seed: u64) -> CMatrix {
    random_unitary_with(n, &mut seeded_rng(seed))
}

/// `‖u* u − I‖` in operator norm; `u` must be square.
pub fn unitarity_residual(u: &CMatrix) -> f64 {
    if !u.is_square() {
        return f64::INFINITY;
    }
    opnorm(&(u.adjoint() * u - identity(u.nrows())))
}

pub fn ensure_unitary(u: &CMatrix, tol: f64) -> Result<()> {
    let residual = unitarity_residual(u);
    if residual > tol {
        return Err(Error::NotUnitary { residual });
    }
    Ok(())
}

pub fn hermitian_asymmetry(h: &CMatrix) -> f64 {
    if !h.is_square() {
        return f64::INFINITY;
    }
    let scale = opnorm(h).max(1.0);
    opnorm(&(h - h.adjoint())) / scale
}

fn symmetrize(h: &CMatrix) -> CMatrix {
    (h + h.adjoint()).scale(0.5)
}

/// Eigendecomposition of a Hermitian matrix with eigenvalues ascending.
/// Columns of the returned matrix are the matching orthonormal eigenvectors.
pub fn hermitian_eigen(h: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = h.nrows();
    if n == 0 {
        return (Vec::new(), zeros(0, 0));
    }
    let eig = symmetrize(h).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = CMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    (values, vectors)
}

pub fn min_eigenvalue(h: &CMatrix) -> f64 {
    hermitian_eigen(h).0.first().copied().unwrap_or(0.0)
}

/// `V diag(f(λ)) V*` for Hermitian `h`.
pub fn hermitian_apply(h: &CMatrix, f: impl Fn(f64) -> f64) -> CMatrix {
    let (values, vectors) = hermitian_eigen(h);
    let n = values.len();
    let mut scaled = vectors.clone();
    for (j, &lam) in values.iter().enumerate() {
        let s = f(lam);
        for i in 0..n {
            scaled[(i, j)] *= s;
        }
    }
    scaled * vectors.adjoint()
}

/// Principal square root of a PSD matrix; small negative eigenvalues from
/// roundoff are clamped to zero.
pub fn psd_sqrt(h: &CMatrix) -> CMatrix {
    hermitian_apply(h, |lam| lam.max(0.0).sqrt())
}

/// Nearest PSD matrix in Frobenius norm (eigenvalue clipping).
pub fn psd_project(h: &CMatrix) -> Result<CMatrix> {
    let asymmetry = hermitian_asymmetry(h);
    if asymmetry > 1e-10 {
        return Err(Error::NotHermitian { asymmetry });
    }
    Ok(psd_project_unchecked(h))
}

pub(crate) fn psd_project_unchecked(h: &CMatrix) -> CMatrix {
    let out = hermitian_apply(h, |lam| lam.max(0.0));
    symmetrize(&out)
}

/// Orthonormal basis of the column space (rank decided at relative `tol`).
pub fn column_space(a: &CMatrix, tol: f64) -> CMatrix {
    if a.is_empty() {
        return zeros(a.nrows(), 0);
    }
    let rank = numeric_rank(a, tol);
    let svd = a.clone().svd(true, false);
    let u = svd.u.expect("requested U");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&x, &y| svd.singular_values[y].total_cmp(&svd.singular_values[x]));
    CMatrix::from_fn(a.nrows(), rank, |i, j| u[(i, order[j])])
}

/// Orthonormal basis of the orthogonal complement of the column space of an
/// isometry `w` (n×k with orthonormal columns).
pub fn orthogonal_complement(w: &CMatrix) -> CMatrix {
    let n = w.nrows();
    let k = w.ncols();
    if k == 0 {
        return identity(n);
    }
    let proj = identity(n) - w * w.adjoint();
    let (values, vectors) = hermitian_eigen(&proj);
    // Eigenvalues of a projector are 0 or 1; the top n-k span the complement.
    let cols: Vec<usize> = (0..n).rev().take(n - k).collect();
    let _ = values;
    CMatrix::from_fn(n, n - k, |i, j| vectors[(i, cols[n - k - 1 - j])])
}

/// Extends an isometry `w` (n×k) to a unitary `[w, w_perp]`.
pub fn complete_to_unitary(w: &CMatrix) -> CMatrix {
    let comp = orthogonal_complement(w);
    let mut out = zeros(w.nrows(), w.nrows());
    out.view_mut((0, 0), w.shape()).copy_from(w);
    out.view_mut((0, w.ncols()), comp.shape()).copy_from(&comp);
    out
}

/// Unitary factor of the polar decomposition (closest isometry).
pub fn polar_isometry(a: &CMatrix) -> CMatrix {
    if a.is_empty() {
        return a.clone();
    }
    let svd = a.clone().svd(true, true);
    let u = svd.u.expect("requested U");
    let vt = svd.v_t.expect("requested V^T");
    u * vt
}

/// Moore–Penrose pseudo-inverse with relative singular value cutoff `tol`.
pub fn pinv(a: &CMatrix, tol: f64) -> CMatrix {
    if a.is_empty() {
        return zeros(a.ncols(), a.nrows());
    }
    let svd = a.clone().svd(true, true);
    let u = svd.u.expect("requested U");
    let vt = svd.v_t.expect("requested V^T");
    let top = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let mut out = zeros(a.ncols(), a.nrows());
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if top > 0.0 && s > tol * top {
            let col = vt.row(k).adjoint();
            let row = u.column(k).adjoint();
            out += (col * row).scale(1.0 / s);
        }
    }
    out
}

pub fn all_finite(a: &CMatrix) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Condition number in the 2-norm (infinite for singular input).
pub fn condition_number(a: &CMatrix) -> f64 {
    let s = singular_values(a);
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        (Some(_), Some(_)) => f64::INFINITY,
        _ => 1.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: &CMatrix, b: &CMatrix, tol: f64) {
        assert_eq!(a.shape(), b.shape());
        let err = opnorm(&(a - b));
        assert!(err < tol, "difference {err:e} exceeds {tol:e}");
    }

    #[test]
    fn kron_identity_is_noop() {
        let mut rng = seeded_rng(1);
        let x = ginibre(3, 2, &mut rng);
        assert_close(&kron(&identity(1), &x), &x, 0.0 + 1e-15);
    }

    #[test]
    fn kron_places_blocks() {
        let n = from_real_rows(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let k = kron(&n, &identity(2));
        let mut expected = zeros(4, 4);
        expected[(0, 2)] = c64(1.0, 0.0);
        expected[(1, 3)] = c64(1.0, 0.0);
        assert_eq!(k, expected);
    }

    #[test]
    fn kron_index_convention() {
        let mut rng = seeded_rng(2);
        let a = ginibre(2, 3, &mut rng);
        let b = ginibre(3, 2, &mut rng);
        let k = kron(&a, &b);
        for i in 0..2 {
            for j in 0..3 {
                for p in 0..3 {
                    for q in 0..2 {
                        assert_eq!(k[(i * 3 + p, j * 2 + q)], a[(i, j)] * b[(p, q)]);
                    }
                }
            }
        }
    }

    #[test]
    fn kron_norm_is_multiplicative() {
        let mut rng = seeded_rng(3);
        let a = ginibre(3, 2, &mut rng);
        let b = ginibre(2, 4, &mut rng);
        let k = kron(&a, &b);
        // Oracle: the top singular value of the explicit product.
        let explicit = k.clone().svd(false, false).singular_values.max();
        let expected = opnorm(&a) * opnorm(&b);
        assert!((explicit - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn opnorm_basics() {
        assert_eq!(opnorm(&zeros(3, 3)), 0.0);
        assert!((opnorm(&diag_real(&[3.0, -1.0])) - 3.0).abs() < 1e-14);
    }

    #[test]
    fn opnorm_matches_gram_eigenvalue() {
        let mut rng = seeded_rng(4);
        let a = ginibre(5, 3, &mut rng);
        let gram = a.adjoint() * &a;
        let (values, _) = hermitian_eigen(&gram);
        let oracle = values.last().unwrap().sqrt();
        assert!((opnorm(&a) - oracle).abs() < 1e-12 * oracle);
    }

    #[test]
    fn rank_examples() {
        assert_eq!(numeric_rank(&identity(3), 1e-9), 3);
        let i2 = identity(2);
        let stacked = CMatrix::from_columns(&[vec_rows(&i2), vec_rows(&i2.scale(2.0))]);
        assert_eq!(numeric_rank(&stacked, 1e-9), 1);
        let mut rng = seeded_rng(5);
        let u1 = ginibre(4, 1, &mut rng);
        let v1 = ginibre(4, 1, &mut rng);
        let u2 = ginibre(4, 1, &mut rng);
        let v2 = ginibre(4, 1, &mut rng);
        let m = &u1 * v1.adjoint() + &u2 * v2.adjoint();
        assert_eq!(numeric_rank(&m, 1e-9), 2);
        assert_eq!(numeric_rank(&zeros(3, 3), 1e-9), 0);
    }

    #[test]
    fn random_unitary_properties() {
        let u1 = random_unitary(1, 7);
        assert!((u1[(0, 0)].norm() - 1.0).abs() < 1e-14);
        let u = random_unitary(6, 11);
        assert!(unitarity_residual(&u) < 1e-12);
        assert_eq!(random_unitary(6, 11), u);
    }

    #[test]
    fn psd_project_examples() {
        let p = psd_project(&identity(3)).unwrap();
        assert_close(&p, &identity(3), 1e-14);
        let p = psd_project(&diag_real(&[1.0, -2.0])).unwrap();
        assert_close(&p, &diag_real(&[1.0, 0.0]), 1e-14);
        let mut rng = seeded_rng(8);
        let h = random_hermitian(5, &mut rng);
        let once = psd_project(&h).unwrap();
        let twice = psd_project(&once).unwrap();
        assert_close(&once, &twice, 1e-12);
        assert!(min_eigenvalue(&once) >= -1e-12);
    }

    #[test]
    fn psd_project_rejects_non_hermitian() {
        let a = from_real_rows(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        assert!(matches!(psd_project(&a), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn complete_to_unitary_extends_isometry() {
        let u = random_unitary(5, 3);
        let w = u.columns(0, 2).into_owned();
        let full = complete_to_unitary(&w);
        assert!(unitarity_residual(&full) < 1e-12);
        assert_close(&full.columns(0, 2).into_owned(), &w, 1e-15);
    }

    #[test]
    fn pinv_inverts_full_rank() {
        let mut rng = seeded_rng(9);
        let a = ginibre(4, 3, &mut rng);
        let p = pinv(&a, 1e-12);
        assert_close(&(p * &a), &identity(3), 1e-10);
    }
}
