use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::matkernel::{self, c64, ginibre, kron, min_eigenvalue, numeric_rank, opnorm, seeded_rng, vec_rows, CMatrix};
use crate::pencil::sample_seed;

use super::feasibility::extension_feasibility;
use super::{MatrixMap, OperatorSubspace};

const ATTAIN_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Certified,
    Refuted,
    Inconclusive,
}

/// A level-`n` input exhibiting the failure, with its norm gap.
#[derive(Debug, Clone)]
pub struct CertWitness {
    pub level: usize,
    pub input: CMatrix,
    pub gap: f64,
}

#[derive(Debug, Clone)]
pub struct CertResult {
    pub verdict: Verdict,
    pub residual: f64,
    pub iterations: usize,
    pub witness: Option<CertWitness>,
}

impl CertResult {
    pub fn is_certified(&self) -> bool {
        self.verdict == Verdict::Certified
    }

    fn refuted(witness: CertWitness) -> Self {
        Self { verdict: Verdict::Refuted, residual: witness.gap, iterations: 0, witness: Some(witness) }
    }
}

#[derive(Debug, Clone)]
pub struct CertOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    /// Random starts per level in the refutation search.
    pub samples: usize,
    /// Norm-ascent steps from each random start.
    pub ascent_steps: usize,
}

impl Default for CertOptions {
    fn default() -> Self {
        Self { tol: 1e-7, max_iter: 20000, seed: 42, samples: 16, ascent_steps: 8 }
    }
}

/// Choi's criterion on a map with full square domain.
pub fn is_completely_positive(phi: &MatrixMap, tol: f64) -> Result<CertResult> {
    let choi = phi.choi_matrix()?;
    let herm = (&choi + choi.adjoint()) * c64(0.5, 0.0);
    let lambda = min_eigenvalue(&herm);
    if lambda >= -tol {
        return Ok(CertResult { verdict: Verdict::Certified, residual: (-lambda).max(0.0), iterations: 0, witness: None });
    }
    let d = phi.domain().d();
    let mut omega = matkernel::zeros(d * d, d * d);
    for i in 0..d {
        for j in 0..d {
            omega[(i * d + i, j * d + j)] = c64(1.0, 0.0);
        }
    }
    Ok(CertResult::refuted(CertWitness { level: d, input: omega, gap: -lambda }))
}

/// `φ_n^*(w)` projected to `F ⊗ M_n`, the direction of steepest norm ascent.
fn adjoint_amplified(domain: &OperatorSubspace, images: &[CMatrix], w: &CMatrix, n: usize) -> CMatrix {
    let mut z = matkernel::zeros(domain.d_prime() * n, domain.d() * n);
    for (e, img) in domain.basis().iter().zip(images) {
        let mut y = matkernel::zeros(n, n);
        for r in 0..img.nrows() {
            for s in 0..img.ncols() {
                let c = img[(r, s)].conj();
                if c.norm() != 0.0 {
                    y += w.view((r * n, s * n), (n, n)) * c;
                }
            }
        }
        z += kron(e, &y);
    }
    z
}

fn amplified(images: &[CMatrix], ys: &[CMatrix], l_prime: usize, l: usize, n: usize) -> CMatrix {
    let mut out = matkernel::zeros(l_prime * n, l * n);
    for (img, y) in images.iter().zip(ys) {
        out += kron(img, y);
    }
    out
}

fn norm_ratio(phi: &MatrixMap, images: &[CMatrix], z: &CMatrix, n: usize) -> Option<(f64, CMatrix)> {
    let nz = opnorm(z);
    if nz < 1e-300 {
        return None;
    }
    let (ys, _) = phi.domain().coordinates(z, n).ok()?;
    let out = amplified(images, &ys, phi.l_prime(), phi.l(), n);
    Some((opnorm(&out) / nz, out))
}

/// Outcome of the sampled norm search.
pub(crate) struct Search {
    pub witness: Option<CertWitness>,
    /// Inputs on which `φ_n` preserves the norm.
    pub attaining: Vec<(usize, CMatrix)>,
}

/// Sampled search for `‖φ_n(Z)‖ > ‖Z‖(1+tol)` at levels `1..=max_level`.
pub(crate) fn refutation_search(phi: &MatrixMap, opts: &CertOptions) -> Search {
    let dom = phi.domain();
    let images = phi.basis_images();
    let max_level = dom.d().min(dom.d_prime()).min(phi.l()).min(phi.l_prime()) + 1;
    let mut attaining = Vec::new();

    for n in 1..=max_level {
        let mut starts: Vec<CMatrix> = Vec::new();
        if n == 1 {
            starts.extend(dom.basis().iter().cloned());
        }
        for k in 0..opts.samples {
            let mut rng = seeded_rng(sample_seed(opts.seed, n, k));
            let ys: Vec<CMatrix> = (0..dom.dim())
                .map(|_| {
                    if k % 2 == 0 {
                        ginibre(n, n, &mut rng)
                    } else {
                        let u = ginibre(n, 1, &mut rng);
                        let v = ginibre(n, 1, &mut rng);
                        u * v.adjoint()
                    }
                })
                .collect();
            starts.push(amplified(dom.basis(), &ys, dom.d_prime(), dom.d(), n));
        }

        let mut best: Option<CertWitness> = None;
        for start in starts {
            let mut z = start;
            for step in 0..=opts.ascent_steps {
                let Some((ratio, out)) = norm_ratio(phi, &images, &z, n) else { break };
                let gap = ratio - 1.0;
                if gap > opts.tol && best.as_ref().map_or(true, |b| gap > b.gap) {
                    best = Some(CertWitness { level: n, input: z.clone(), gap });
                }
                if step == opts.ascent_steps {
                    if (ratio - 1.0).abs() <= ATTAIN_TOL {
                        attaining.push((n, z.clone()));
                    }
                    break;
                }
                let svd = out.svd(true, true);
                let (Some(u), Some(vt)) = (svd.u, svd.v_t) else { break };
                let w = u.column(0) * vt.row(0);
                let next = adjoint_amplified(dom, &images, &w, n);
                if opnorm(&next) < 1e-300 {
                    break;
                }
                z = next;
            }
        }
        if best.is_some() {
            return Search { witness: best, attaining };
        }
    }
    Search { witness: None, attaining }
}

/// Decides complete contractivity: sampled refutation first, then the
/// existence of a unital completely positive extension of the off-diagonal
/// map.
pub fn certify_completely_contractive(phi: &MatrixMap, opts: &CertOptions) -> CertResult {
    let search = refutation_search(phi, opts);
    if let Some(w) = search.witness {
        return CertResult::refuted(w);
    }
    let out = extension_feasibility(phi, &search.attaining, opts.tol, opts.max_iter);
    CertResult {
        verdict: if out.feasible { Verdict::Certified } else { Verdict::Inconclusive },
        residual: out.residual(),
        iterations: out.iterations,
        witness: None,
    }
}

/// Complete isometry: injective on the domain, and both `φ` and its inverse
/// on the image are completely contractive.
pub fn certify_completely_isometric(phi: &MatrixMap, opts: &CertOptions) -> CertResult {
    let dom = phi.domain();
    let images = phi.basis_images();
    let stacked = CMatrix::from_columns(&images.iter().map(vec_rows).collect::<Vec<_>>());
    if numeric_rank(&stacked, matkernel::RANK_TOL) < dom.dim() {
        let (_, vecs) = matkernel::hermitian_eigen(&(stacked.adjoint() * &stacked));
        let coeffs = vecs.column(0).into_owned();
        let z = dom.basis().iter().zip(coeffs.iter()).fold(matkernel::zeros(dom.d_prime(), dom.d()), |acc, (e, c)| {
            acc + e * *c
        });
        let image = phi.apply(&z).expect("domain-shaped input");
        let gap = (opnorm(&z) - opnorm(&image)) / opnorm(&z);
        return CertResult::refuted(CertWitness { level: 1, input: z, gap });
    }

    let forward = certify_completely_contractive(phi, opts);
    if forward.verdict == Verdict::Refuted {
        return forward;
    }
    let inverse = MatrixMap::from_pairs(&images, dom.basis(), matkernel::RANK_TOL)
        .expect("images are linearly independent");
    let backward = certify_completely_contractive(&inverse, opts);
    if backward.verdict == Verdict::Refuted {
        // report the witness in terms of the original domain
        let w = backward.witness.expect("refuted carries a witness");
        let (ys, _) = inverse.domain().coordinates(&w.input, w.level).expect("witness lies in the image");
        let pre = amplified(&inverse.basis_images(), &ys, dom.d_prime(), dom.d(), w.level);
        let gap = 1.0 - opnorm(&w.input) / opnorm(&pre);
        return CertResult::refuted(CertWitness { level: w.level, input: pre, gap });
    }
    let verdict = if forward.verdict == Verdict::Certified && backward.verdict == Verdict::Certified {
        Verdict::Certified
    } else {
        Verdict::Inconclusive
    };
    CertResult {
        verdict,
        residual: forward.residual.max(backward.residual),
        iterations: forward.iterations + backward.iterations,
        witness: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matkernel::{diag_real, identity, random_unitary, RANK_TOL};
    use crate::pencil::Pencil;

    #[test]
    fn cp_examples() {
        let id = is_completely_positive(&MatrixMap::identity(3, 3), 1e-10).unwrap();
        assert!(id.is_certified());
        let t = is_completely_positive(&MatrixMap::transpose(2), 1e-10).unwrap();
        assert_eq!(t.verdict, Verdict::Refuted);
        assert!((t.witness.unwrap().gap - 1.0).abs() < 1e-12);
        let mut rng = seeded_rng(11);
        let a = ginibre(2, 3, &mut rng);
        let conj = MatrixMap::from_fn(OperatorSubspace::full(3, 3), 2, 2, |x| &a * x * a.adjoint()).unwrap();
        assert!(is_completely_positive(&conj, 1e-10).unwrap().is_certified());
    }

    #[test]
    fn cc_identity_embedding() {
        let mut rng = seeded_rng(12);
        let l = Pencil::random(2, 2, 3, &mut rng);
        let phi = MatrixMap::inclusion(OperatorSubspace::pencil_range(&l, RANK_TOL).unwrap());
        let r = certify_completely_contractive(&phi, &CertOptions::default());
        assert!(r.is_certified(), "{r:?}");
    }

    #[test]
    fn cc_doubling_refuted() {
        let phi = MatrixMap::from_fn(OperatorSubspace::full(1, 1), 1, 1, |x| x * c64(2.0, 0.0)).unwrap();
        let r = certify_completely_contractive(&phi, &CertOptions::default());
        assert_eq!(r.verdict, Verdict::Refuted);
        let w = r.witness.unwrap();
        assert_eq!(w.level, 1);
        assert!((w.gap - 1.0).abs() < 1e-10);
    }

    #[test]
    fn ci_examples() {
        let opts = CertOptions::default();
        assert!(certify_completely_isometric(&MatrixMap::identity(2, 2), &opts).is_certified());
        let half = MatrixMap::identity(1, 1).scale(0.5);
        assert_eq!(certify_completely_isometric(&half, &opts).verdict, Verdict::Refuted);
        let phi = MatrixMap::from_pairs(&[diag_real(&[1.0, 0.5])], &[identity(1)], RANK_TOL).unwrap();
        let r = certify_completely_isometric(&phi, &opts);
        assert!(r.is_certified(), "{r:?}");
    }

    #[test]
    fn ci_rejects_non_injective() {
        let dom = OperatorSubspace::full(1, 2);
        let phi = MatrixMap::from_fn(dom, 1, 1, |x| x.columns(0, 1).into_owned()).unwrap();
        let r = certify_completely_isometric(&phi, &CertOptions::default());
        assert_eq!(r.verdict, Verdict::Refuted);
        assert!(phi.apply(&r.witness.unwrap().input).unwrap().norm() < 1e-12);
    }

    #[test]
    fn unitary_conjugation_is_ci() {
        let u = random_unitary(2, 3);
        let v = random_unitary(3, 4);
        let phi = MatrixMap::identity(2, 3).sandwich(&u, &v.adjoint()).unwrap();
        let r = certify_completely_isometric(&phi, &CertOptions::default());
        assert!(r.is_certified(), "{r:?}");
    }
}
