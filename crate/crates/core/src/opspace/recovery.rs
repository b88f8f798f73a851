use crate::error::{Error, Result};
use crate::matkernel::{self, complete_to_unitary, kron, matrix_unit, opnorm, polar_isometry, CMatrix};

use super::{MatrixMap, OperatorSubspace};

/// `Ψ(x) = U (x ⊕ ψ(x)) V*` on a block-diagonal domain.
#[derive(Debug, Clone)]
pub struct CiDecomposition {
    pub u: CMatrix,
    pub v: CMatrix,
    /// Residual map into the complementary `(n′−Σd_j′) × (n−Σd_j)` corner.
    pub psi: MatrixMap,
    pub blocks: Vec<(usize, usize)>,
    pub residual: f64,
}

impl CiDecomposition {
    /// `U (x ⊕ ψ(x)) V*`.
    pub fn reassemble(&self, x: &CMatrix) -> Result<CMatrix> {
        let rest = self.psi.apply(x)?;
        Ok(&self.u * matkernel::direct_sum(x, &rest) * self.v.adjoint())
    }
}

/// Isometries `(W′, W)` carrying one block: the top singular pair of
/// `Σ_ab Ψ(E_ab) ⊗ E_ab` factors as `(Σ_a W′e_a ⊗ e_a)(Σ_b We_b ⊗ e_b)*`.
fn block_isometries(psi: &MatrixMap, r0: usize, c0: usize, bp: usize, b: usize) -> Result<(CMatrix, CMatrix)> {
    let dom = psi.domain();
    let (np, n) = (psi.l_prime(), psi.l());
    let mut c = matkernel::zeros(np * bp, n * b);
    for a in 0..bp {
        for bb in 0..b {
            let img = psi.apply(&matrix_unit(dom.d_prime(), dom.d(), r0 + a, c0 + bb))?;
            c += kron(&img, &matrix_unit(bp, b, a, bb));
        }
    }
    let svd = c.svd(true, true);
    let u = svd.u.expect("requested U");
    let vt = svd.v_t.expect("requested V^T");
    let k = svd
        .singular_values
        .iter()
        .enumerate()
        .max_by(|x, y| x.1.total_cmp(y.1))
        .map(|(k, _)| k)
        .expect("nonempty");
    let left = u.column(k);
    let right = vt.row(k).adjoint();
    let w_out = CMatrix::from_fn(np, bp, |r, a| left[r * bp + a] * (bp as f64).sqrt());
    let w_in = CMatrix::from_fn(n, b, |s, bb| right[s * b + bb] * (b as f64).sqrt());
    Ok((w_out, w_in))
}

/// Recovers unitaries `U`, `V` and a residual map `ψ` with
/// `Ψ(x) = U (x ⊕ ψ(x)) V*` for a completely isometric `Ψ` defined on
/// `⊕_j M^{d_j′×d_j}` (block sizes `(d_j′, d_j)`).
pub fn recover_ci_decomposition(psi: &MatrixMap, blocks: &[(usize, usize)], tol: f64) -> Result<CiDecomposition> {
    let dom = psi.domain();
    let total_p: usize = blocks.iter().map(|b| b.0).sum();
    let total: usize = blocks.iter().map(|b| b.1).sum();
    if (total_p, total) != (dom.d_prime(), dom.d()) {
        return Err(Error::ShapeMismatch(format!(
            "blocks cover {total_p}x{total}, domain is {}x{}",
            dom.d_prime(),
            dom.d()
        )));
    }
    if total_p > psi.l_prime() || total > psi.l() {
        return Err(Error::ShapeMismatch("codomain is smaller than the domain blocks".into()));
    }
    let expected = OperatorSubspace::block_diagonal(blocks);
    if dom.dim() != expected.dim() || expected.basis().iter().any(|e| !dom.contains(e, 1e-10)) {
        return Err(Error::InvalidArgument("map domain is not the block-diagonal space".into()));
    }

    let mut outs = Vec::new();
    let mut ins = Vec::new();
    let (mut r0, mut c0) = (0, 0);
    for &(bp, b) in blocks {
        let (wo, wi) = block_isometries(psi, r0, c0, bp, b)?;
        outs.push(wo);
        ins.push(wi);
        r0 += bp;
        c0 += b;
    }
    let w_out = polar_isometry(&CMatrix::from_columns(
        &outs.iter().flat_map(|w| w.column_iter().map(|c| c.into_owned())).collect::<Vec<_>>(),
    ));
    let w_in = polar_isometry(&CMatrix::from_columns(
        &ins.iter().flat_map(|w| w.column_iter().map(|c| c.into_owned())).collect::<Vec<_>>(),
    ));
    let u = complete_to_unitary(&w_out);
    let v = complete_to_unitary(&w_in);
    let u0 = u.columns(total_p, psi.l_prime() - total_p).into_owned();
    let v0 = v.columns(total, psi.l() - total).into_owned();

    let images: Vec<CMatrix> = psi.basis_images().iter().map(|y| u0.adjoint() * y * &v0).collect();
    let rest = MatrixMap::from_basis_images(dom.clone(), u0.ncols(), v0.ncols(), &images)?;
    let mut decomposition = CiDecomposition { u, v, psi: rest, blocks: blocks.to_vec(), residual: 0.0 };
    let mut residual: f64 = 0.0;
    for (e, img) in dom.basis().iter().zip(psi.basis_images()) {
        residual = residual.max(opnorm(&(decomposition.reassemble(e)? - img)));
    }
    decomposition.residual = residual;
    if !(residual < tol) {
        return Err(Error::RecoveryFailed { residual });
    }
    Ok(decomposition)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matkernel::{c64, direct_sum, random_unitary};

    #[test]
    fn padding_into_larger_space() {
        let psi = MatrixMap::from_fn(OperatorSubspace::full(1, 1), 2, 2, |x| direct_sum(x, &matkernel::zeros(1, 1)))
            .unwrap();
        let dec = recover_ci_decomposition(&psi, &[(1, 1)], 1e-10).unwrap();
        assert!(dec.residual < 1e-10);
        assert!(opnorm(&dec.psi.apply(&matkernel::identity(1)).unwrap()) < 1e-12);
    }

    #[test]
    fn dominated_copy_is_recovered() {
        let u0 = random_unitary(4, 1);
        let v0 = random_unitary(4, 2);
        let psi = MatrixMap::from_fn(OperatorSubspace::full(2, 2), 4, 4, |x| {
            &u0 * direct_sum(x, &(x * c64(0.5, 0.0))) * v0.adjoint()
        })
        .unwrap();
        let dec = recover_ci_decomposition(&psi, &[(2, 2)], 1e-8).unwrap();
        // ψ(x) = ½ x up to unitaries: singular values of ψ(I) are ½
        let s = matkernel::singular_values(&dec.psi.apply(&matkernel::identity(2)).unwrap());
        assert!(s.iter().all(|v| (v - 0.5).abs() < 1e-8));
    }

    #[test]
    fn two_blocks_with_zero_padding() {
        let u0 = random_unitary(5, 3);
        let v0 = random_unitary(4, 4);
        let blocks = [(1, 2), (2, 1)];
        let psi = MatrixMap::from_fn(OperatorSubspace::block_diagonal(&blocks), 5, 4, |x| {
            &u0 * direct_sum(x, &matkernel::zeros(2, 1)) * v0.adjoint()
        })
        .unwrap();
        let dec = recover_ci_decomposition(&psi, &blocks, 1e-8).unwrap();
        assert!(dec.residual < 1e-8);
    }

    #[test]
    fn non_isometric_map_fails() {
        let psi = MatrixMap::identity(2, 2).scale(0.5);
        assert!(matches!(recover_ci_decomposition(&psi, &[(2, 2)], 1e-8), Err(Error::RecoveryFailed { .. })));
    }
}
