//! Existence of a unital completely positive extension of the off-diagonal
//! map, decided by Dykstra's alternating projections on its Choi matrix.
//!
//! An extension `Ψ: M_{d+d′} → M_{ℓ+ℓ′}` that is positive and agrees with
//! `I_d ⊕ 0 ↦ I_ℓ ⊕ 0` must send every `E_ii` (`i < d`) into the top-left
//! `ℓ×ℓ` corner, and likewise for the bottom blocks. The Choi rows indexed
//! by `(i < d, p ≥ ℓ)` and `(i ≥ d, p < ℓ)` therefore vanish, so the search
//! runs over the Hermitian matrix on the remaining `dℓ + d′ℓ′` indices.

use crate::matkernel::{self, c64, frobenius, hermitian_eigen, CMatrix};

use super::MatrixMap;

/// Result of the feasibility iteration.
#[derive(Debug, Clone)]
pub struct FeasibilityOutcome {
    pub feasible: bool,
    /// Frobenius norm of the negative part of the affine iterate.
    pub psd_residual: f64,
    /// Distance of the PSD iterate from the affine set.
    pub affine_residual: f64,
    pub iterations: usize,
    /// The reduced Choi matrix of the final affine iterate.
    pub choi: CMatrix,
}

impl FeasibilityOutcome {
    pub fn residual(&self) -> f64 {
        self.psd_residual.max(self.affine_residual)
    }
}

struct AffineSet {
    d: usize,
    d_prime: usize,
    l: usize,
    l_prime: usize,
    /// Domain basis (d′×d) paired with images (ℓ′×ℓ).
    pairs: Vec<(CMatrix, CMatrix)>,
}

impl AffineSet {
    fn size(&self) -> usize {
        self.d * self.l + self.d_prime * self.l_prime
    }

    fn offset(&self) -> usize {
        self.d * self.l
    }

    fn project(&self, x: &CMatrix) -> CMatrix {
        let mut x = (x + x.adjoint()) * c64(0.5, 0.0);
        let (d, dp, l, lp) = (self.d, self.d_prime, self.l, self.l_prime);
        let a = self.offset();

        // Σ_{i<d} Ψ(E_ii) = I_ℓ
        for p in 0..l {
            for q in 0..l {
                let target = if p == q { 1.0 } else { 0.0 };
                let sum: num_complex::Complex64 = (0..d).map(|i| x[(i * l + p, i * l + q)]).sum();
                let shift = (sum - c64(target, 0.0)) / d as f64;
                for i in 0..d {
                    x[(i * l + p, i * l + q)] -= shift;
                }
            }
        }
        // Σ_{i<d′} Ψ(E_{d+i,d+i}) restricted to the bottom block = I_ℓ′
        for p in 0..lp {
            for q in 0..lp {
                let target = if p == q { 1.0 } else { 0.0 };
                let sum: num_complex::Complex64 = (0..dp).map(|i| x[(a + i * lp + p, a + i * lp + q)]).sum();
                let shift = (sum - c64(target, 0.0)) / dp as f64;
                for i in 0..dp {
                    x[(a + i * lp + p, a + i * lp + q)] -= shift;
                }
            }
        }
        // corner agreement: Σ_{i′,j} e[i′,j] Ψ(E_{d+i′,j})[ℓ+p′,q] = φ(e)[p′,q]
        for pp in 0..lp {
            for q in 0..l {
                let mut m = matkernel::zeros(dp, d);
                for ip in 0..dp {
                    for j in 0..d {
                        m[(ip, j)] = x[(a + ip * lp + pp, j * l + q)];
                    }
                }
                for (e, img) in &self.pairs {
                    let current: num_complex::Complex64 = e.iter().zip(m.iter()).map(|(u, v)| u * v).sum();
                    let shift = current - img[(pp, q)];
                    m -= e.map(|z| z.conj()) * shift;
                }
                for ip in 0..dp {
                    for j in 0..d {
                        x[(a + ip * lp + pp, j * l + q)] = m[(ip, j)];
                        x[(j * l + q, a + ip * lp + pp)] = m[(ip, j)].conj();
                    }
                }
            }
        }
        x
    }

    /// Starting point: the block-diagonal trace-like map.
    fn center(&self) -> CMatrix {
        let n = self.size();
        let mut x = matkernel::zeros(n, n);
        for k in 0..self.offset() {
            x[(k, k)] = c64(1.0 / self.d as f64, 0.0);
        }
        for k in self.offset()..n {
            x[(k, k)] = c64(1.0 / self.d_prime as f64, 0.0);
        }
        x
    }
}

/// Projection onto `{Q Y Q* : Y ⪰ 0}` and the Frobenius distance moved.
fn face_project(x: &CMatrix, q: &CMatrix) -> (CMatrix, f64) {
    let inner = q.adjoint() * x * q;
    let inner = (&inner + inner.adjoint()) * c64(0.5, 0.0);
    let (vals, vecs) = hermitian_eigen(&inner);
    let r = inner.nrows();
    let mut pos = matkernel::zeros(r, r);
    for (k, &v) in vals.iter().enumerate() {
        if v > 0.0 {
            let col = vecs.column(k);
            pos += (&col * col.adjoint()) * c64(v, 0.0);
        }
    }
    let out = q * pos * q.adjoint();
    let moved = frobenius(&(x - &out));
    (out, moved)
}

const ATTAIN_TOL: f64 = 1e-9;
const KERNEL_TOL: f64 = 1e-8;
/// Constraint vectors shorter than this carry only rounding noise.
const NEGLIGIBLE: f64 = 1e-6;

impl AffineSet {
    /// Reduced Choi index of `(i, p)`, or `None` for a forced-zero row.
    fn index(&self, i: usize, p: usize) -> Option<usize> {
        match (i < self.d, p < self.l) {
            (true, true) => Some(i * self.l + p),
            (false, false) => Some(self.offset() + (i - self.d) * self.l_prime + (p - self.l)),
            _ => None,
        }
    }

    /// Vectors annihilated by every feasible Choi matrix, derived from a
    /// norm-attaining `Z ∈ F ⊗ M_n` with `‖Z‖ = ‖φ_n(Z)‖ = 1`.
    ///
    /// `s = (I, Z*; Z, I)` is positive and `ψ_n(s) = (I, W*; W, I)` has a
    /// kernel. For `r ∈ ran s` and `w ∈ ker ψ_n(s)` every Kraus operator of an
    /// extension satisfies `r*(V_k ⊗ I)w = 0`, so the Choi matrix kills
    /// `Σ_m conj(r_m) ⊗ w_m`.
    fn face_constraints(&self, z: &CMatrix, w: &CMatrix, n: usize) -> Vec<Vec<num_complex::Complex64>> {
        let s = offdiagonal_system(z);
        let t = offdiagonal_system(w);
        let (sv, svec) = hermitian_eigen(&s);
        let (tv, tvec) = hermitian_eigen(&t);
        let ranges: Vec<usize> = (0..sv.len()).filter(|&k| sv[k] > KERNEL_TOL).collect();
        let kernels: Vec<usize> = (0..tv.len()).filter(|&k| tv[k] < KERNEL_TOL).collect();
        let (sd, td) = (self.d + self.d_prime, self.l + self.l_prime);
        let mut out = Vec::new();
        for &kw in &kernels {
            let wv = tvec.column(kw);
            for &kr in &ranges {
                let rv = svec.column(kr);
                let mut g = vec![c64(0.0, 0.0); self.size()];
                for i in 0..sd {
                    for p in 0..td {
                        if let Some(idx) = self.index(i, p) {
                            g[idx] = (0..n).map(|m| rv[i * n + m].conj() * wv[p * n + m]).sum();
                        }
                    }
                }
                out.push(g);
            }
        }
        out
    }
}

/// `(I, z*; z, I)` for a `d′n × dn` block `z`.
fn offdiagonal_system(z: &CMatrix) -> CMatrix {
    let (rows, cols) = z.shape();
    let mut s = matkernel::identity(rows + cols);
    s.view_mut((cols, 0), (rows, cols)).copy_from(z);
    s.view_mut((0, cols), (cols, rows)).copy_from(&z.adjoint());
    s
}

/// Orthonormal basis of the common null space of the constraint vectors.
fn face_basis(size: usize, constraints: &[Vec<num_complex::Complex64>]) -> CMatrix {
    if constraints.is_empty() {
        return matkernel::identity(size);
    }
    let mut gram = matkernel::zeros(size, size);
    for g in constraints {
        let v = matkernel::CVector::from_column_slice(g);
        let norm = v.norm();
        if norm > NEGLIGIBLE {
            gram += (&v * v.adjoint()) / c64(norm * norm, 0.0);
        }
    }
    let (vals, vecs) = hermitian_eigen(&gram);
    let keep: Vec<usize> = (0..size).filter(|&k| vals[k] < KERNEL_TOL).collect();
    CMatrix::from_fn(size, keep.len(), |i, j| vecs[(i, keep[j])])
}

/// Decides whether `φ` (given on an orthonormal domain basis) admits a
/// unital completely positive extension of its off-diagonal embedding.
///
/// `attaining` lists inputs `(n, Z)` with `Z ∈ F ⊗ M_n`; those on which `φ_n`
/// preserves the norm restrict the search to a face of the PSD cone.
pub fn extension_feasibility(
    phi: &MatrixMap,
    attaining: &[(usize, CMatrix)],
    tol: f64,
    max_iter: usize,
) -> FeasibilityOutcome {
    let dom = phi.domain();
    let set = AffineSet {
        d: dom.d(),
        d_prime: dom.d_prime(),
        l: phi.l(),
        l_prime: phi.l_prime(),
        pairs: dom.basis().iter().cloned().zip(phi.basis_images()).collect(),
    };
    let n = set.size();
    let mut constraints = Vec::new();
    for (level, z) in attaining {
        let Ok(w) = phi.apply_amplified(z, *level, 1e-9) else { continue };
        let nz = matkernel::opnorm(z);
        if nz == 0.0 {
            continue;
        }
        let nw = matkernel::opnorm(&w);
        if (nw / nz - 1.0).abs() > ATTAIN_TOL {
            continue;
        }
        constraints.extend(set.face_constraints(&(z / c64(nz, 0.0)), &(w / c64(nz, 0.0)), *level));
    }
    let face = face_basis(n, &constraints);

    let mut x = set.project(&set.center());
    let mut outcome = FeasibilityOutcome {
        feasible: false,
        psd_residual: f64::INFINITY,
        affine_residual: f64::INFINITY,
        iterations: 0,
        choi: x.clone(),
    };
    if face.ncols() == 0 {
        return outcome;
    }
    let mut p = matkernel::zeros(n, n);
    let mut q = matkernel::zeros(n, n);
    let check_every = 10;
    for it in 1..=max_iter {
        let (y, _) = face_project(&(&x + &p), &face);
        p = &x + &p - &y;
        let next = set.project(&(&y + &q));
        q = &y + &q - &next;
        x = next;
        if it % check_every == 0 || it == max_iter {
            let (_, psd_residual) = face_project(&x, &face);
            let affine_residual = frobenius(&(set.project(&y) - &y));
            outcome.psd_residual = psd_residual;
            outcome.affine_residual = affine_residual;
            outcome.iterations = it;
            if psd_residual < tol && affine_residual < tol {
                outcome.feasible = true;
                break;
            }
        }
    }
    outcome.choi = x;
    outcome
}
