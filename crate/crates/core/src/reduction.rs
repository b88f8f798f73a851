//! Minimal defining pencils: `L = Q (L̃ ⊕ J) G*` with `J` completely
//! dominated by `L̃`.
//!
//! The finest common block structure of the coefficients comes from the
//! commutant of the pencil: pairs `(X′, X)` with `X′A_k = A_kX` and
//! `XA_k* = A_k*X′`. A random self-adjoint element of the commutant has
//! eigenspaces that are minimal reducing pairs. Blocks are then pruned when
//! they are completely dominated by the rest.

use num_complex::Complex64;
use crate::error::{Error, Result};
use crate::matkernel::{self, c64, hermitian_eigen, opnorm, seeded_rng, standard_complex_normal, CMatrix, RANK_TOL};
use crate::opspace::{certify_completely_contractive, CertOptions, CertResult, CertWitness, MatrixMap, Verdict};
use crate::pencil::Pencil;

/// Relative threshold for merging eigenvalues into one block.
pub const CLUSTER_TOL: f64 = 1e-7;
/// Off-block mass allowed after block diagonalization.
pub const BLOCK_TOL: f64 = 1e-8;
/// Random commutant elements tried per call.
const ROUNDS: usize = 3;

/// Pairs `(X′, X)` with `X′ A_k = B_k X` and `X A_k* = B_k* X′` for all `k`.
/// `X′` is `b.rows × a.rows`, `X` is `b.cols × a.cols`.
pub fn intertwiners(a: &[CMatrix], b: &[CMatrix], tol: f64) -> Vec<(CMatrix, CMatrix)> {
    let (ar, ac) = a[0].shape();
    let (br, bc) = b[0].shape();
    let n1 = br * ar;
    let n2 = bc * ac;
    let unknowns = n1 + n2;
    let mut rows: Vec<Vec<Complex64>> = Vec::new();
    for (ak, bk) in a.iter().zip(b) {
        // (X′A − BX)[r,c]
        for r in 0..br {
            for c in 0..ac {
                let mut row = vec![c64(0.0, 0.0); unknowns];
                for s in 0..ar {
                    row[r * ar + s] += ak[(s, c)];
                }
                for s in 0..bc {
                    row[n1 + s * ac + c] -= bk[(r, s)];
                }
                rows.push(row);
            }
        }
        // (XA* − B*X′)[r,c]
        for r in 0..bc {
            for c in 0..ar {
                let mut row = vec![c64(0.0, 0.0); unknowns];
                for s in 0..ac {
                    row[n1 + r * ac + s] += ak[(c, s)].conj();
                }
                for s in 0..br {
                    row[s * ar + c] -= bk[(s, r)].conj();
                }
                rows.push(row);
            }
        }
    }
    let height = rows.len().max(unknowns);
    let mut m = matkernel::zeros(height, unknowns);
    for (i, row) in rows.iter().enumerate() {
        for (j, z) in row.iter().enumerate() {
            m[(i, j)] = *z;
        }
    }
    let svd = m.svd(false, true);
    let vt = svd.v_t.expect("requested V^T");
    let top = svd.singular_values.iter().copied().fold(0.0, f64::max);
    (0..svd.singular_values.len())
        .filter(|&k| svd.singular_values[k] <= tol * top.max(1.0))
        .map(|k| {
            let v: Vec<Complex64> = vt.row(k).iter().map(|z| z.conj()).collect();
            (matkernel::unvec_rows(&v[..n1], br, ar), matkernel::unvec_rows(&v[n1..], bc, ac))
        })
        .collect()
}

/// A common block structure `P A_k R* = ⊕_j B_{jk}`.
#[derive(Debug, Clone)]
pub struct BlockStructure {
    /// d′×d′ unitary.
    pub p: CMatrix,
    /// d×d unitary.
    pub r: CMatrix,
    /// Block shapes `(d_j′, d_j)`; either may be zero.
    pub blocks: Vec<(usize, usize)>,
}

impl BlockStructure {
    /// The blocks as pencils (possibly zero or empty-shaped).
    pub fn block_pencils(&self, l: &Pencil) -> Vec<Vec<CMatrix>> {
        let rotated: Vec<CMatrix> = l.coeffs().iter().map(|a| &self.p * a * self.r.adjoint()).collect();
        let (mut r0, mut c0) = (0, 0);
        self.blocks
            .iter()
            .map(|&(bp, b)| {
                let out = rotated.iter().map(|a| a.view((r0, c0), (bp, b)).into_owned()).collect();
                r0 += bp;
                c0 += b;
                out
            })
            .collect()
    }

    /// Largest coefficient mass outside the diagonal blocks.
    pub fn off_block_mass(&self, l: &Pencil) -> f64 {
        let mut worst: f64 = 0.0;
        for a in l.coeffs() {
            let mut rot = &self.p * a * self.r.adjoint();
            let (mut r0, mut c0) = (0, 0);
            for &(bp, b) in &self.blocks {
                rot.view_mut((r0, c0), (bp, b)).fill(c64(0.0, 0.0));
                r0 += bp;
                c0 += b;
            }
            worst = worst.max(opnorm(&rot));
        }
        worst
    }
}

fn random_commutant_element(basis: &[(CMatrix, CMatrix)], rng: &mut matkernel::Rng) -> (CMatrix, CMatrix) {
    let (mut x1, mut x2) = (basis[0].0.scale(0.0), basis[0].1.scale(0.0));
    for (b1, b2) in basis {
        let c = standard_complex_normal(rng);
        x1 += b1 * c;
        x2 += b2 * c;
    }
    let h1 = (&x1 + x1.adjoint()) * c64(0.5, 0.0);
    let h2 = (&x2 + x2.adjoint()) * c64(0.5, 0.0);
    let scale = opnorm(&h1).max(opnorm(&h2)).max(1e-300);
    (h1 / c64(scale, 0.0), h2 / c64(scale, 0.0))
}

/// Groups the joint spectrum of `(h1, h2)` into clusters; returns the
/// structure with blocks ordered by eigenvalue.
fn split_by_spectrum(h1: &CMatrix, h2: &CMatrix) -> BlockStructure {
    let (v1, e1) = hermitian_eigen(h1);
    let (v2, e2) = hermitian_eigen(h2);
    let mut all: Vec<(f64, bool, usize)> = v1.iter().enumerate().map(|(i, &v)| (v, true, i)).collect();
    all.extend(v2.iter().enumerate().map(|(i, &v)| (v, false, i)));
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut clusters: Vec<Vec<(bool, usize)>> = Vec::new();
    let mut last = f64::NEG_INFINITY;
    for (v, side, i) in all {
        if clusters.is_empty() || v - last > CLUSTER_TOL {
            clusters.push(Vec::new());
        }
        clusters.last_mut().expect("nonempty").push((side, i));
        last = v;
    }
    let mut left_cols = Vec::new();
    let mut right_cols = Vec::new();
    let mut blocks = Vec::new();
    for cluster in clusters {
        let mut bp = 0;
        let mut b = 0;
        for (side, i) in cluster {
            if side {
                left_cols.push(e1.column(i).into_owned());
                bp += 1;
            } else {
                right_cols.push(e2.column(i).into_owned());
                b += 1;
            }
        }
        blocks.push((bp, b));
    }
    let w1 = CMatrix::from_columns(&left_cols);
    let w2 = CMatrix::from_columns(&right_cols);
    BlockStructure { p: w1.adjoint(), r: w2.adjoint(), blocks }
}

/// Finest common block diagonalization of the coefficients.
pub fn block_structure(l: &Pencil, tol: f64, seed: u64) -> Result<BlockStructure> {
    if !l.is_nondegenerate(tol) {
        return Err(Error::DegeneratePencil);
    }
    let basis = intertwiners(l.coeffs(), l.coeffs(), tol);
    let trivial = BlockStructure {
        p: matkernel::identity(l.d_prime()),
        r: matkernel::identity(l.d()),
        blocks: vec![(l.d_prime(), l.d())],
    };
    if basis.len() <= 1 {
        return Ok(trivial);
    }
    let mut rng = seeded_rng(seed);
    let scale = opnorm(&l.coefficient_matrix());
    let mut best: Option<BlockStructure> = None;
    for _ in 0..ROUNDS {
        let (h1, h2) = random_commutant_element(&basis, &mut rng);
        let candidate = split_by_spectrum(&h1, &h2);
        if candidate.off_block_mass(l) > BLOCK_TOL * scale {
            continue;
        }
        if best.as_ref().map_or(true, |b| candidate.blocks.len() > b.blocks.len()) {
            best = Some(candidate);
        }
    }
    Ok(best.unwrap_or(trivial))
}

/// `L = Q (L̃ ⊕ J) G*`.
#[derive(Debug, Clone)]
pub struct PencilDecomposition {
    pub q: CMatrix,
    pub g: CMatrix,
    pub ltilde: Pencil,
    /// `None` when the residual part is zero or has an empty shape.
    pub j: Option<Pencil>,
    /// Block shapes `(d_j, d_j′)` of `L̃`.
    pub block_sizes: Vec<(usize, usize)>,
    /// `(s, s′)`: column and row count of the residual part.
    pub residual_dims: (usize, usize),
    /// Certificate for `L̃(x) ↦ J(x)`; absent when `J` is zero.
    pub domination_cert: Option<CertResult>,
    /// Blocks dropped as unitary copies of kept blocks.
    pub merged_duplicates: usize,
    /// Blocks dropped by a domination certificate.
    pub dropped_dominated: usize,
    /// Some domination test was inconclusive, so minimality is not certified.
    pub inconclusive: bool,
    /// Domination tests that ended refuted (blocks that are needed).
    pub refuted_tests: usize,
}

impl PencilDecomposition {
    /// `Q (L̃ ⊕ J) G*` with zero padding for an empty residual.
    pub fn reconstruct(&self) -> Pencil {
        let (s, sp) = self.residual_dims;
        let coeffs = (0..self.ltilde.g())
            .map(|k| {
                let jk = match &self.j {
                    Some(j) => j.coeff(k).clone(),
                    None => matkernel::zeros(sp, s),
                };
                &self.q * matkernel::direct_sum(self.ltilde.coeff(k), &jk) * self.g.adjoint()
            })
            .collect();
        Pencil::with_zeros(coeffs).expect("consistent shapes")
    }

    pub fn reconstruction_residual(&self, l: &Pencil) -> f64 {
        self.reconstruct().coefficient_distance(l)
    }

    /// Certified minimal: nothing dropped and every domination test refuted.
    pub fn is_certified_minimal(&self) -> bool {
        self.merged_duplicates == 0 && self.dropped_dominated == 0 && !self.inconclusive && self.j.is_none()
    }
}

#[derive(Debug, Clone)]
pub struct ReduceOptions {
    pub tol: f64,
    pub seed: u64,
    pub cert: CertOptions,
}

impl Default for ReduceOptions {
    fn default() -> Self {
        Self { tol: RANK_TOL, seed: 42, cert: CertOptions::default() }
    }
}

struct Block {
    left: CMatrix,
    right: CMatrix,
    coeffs: Vec<CMatrix>,
}

impl Block {
    fn shape(&self) -> (usize, usize) {
        (self.left.ncols(), self.right.ncols())
    }

    fn is_zero(&self, scale: f64) -> bool {
        let (bp, b) = self.shape();
        bp == 0 || b == 0 || self.coeffs.iter().all(|c| opnorm(c) <= BLOCK_TOL * scale)
    }
}

/// Unitaries `(u, v)` with `b_k = u a_k v*` when the two irreducible blocks
/// are copies of each other.
fn unitary_copy(a: &[CMatrix], b: &[CMatrix], tol: f64) -> Option<(CMatrix, CMatrix)> {
    if a[0].shape() != b[0].shape() {
        return None;
    }
    let found = intertwiners(a, b, tol);
    if found.len() != 1 {
        return None;
    }
    let (x1, x2) = &found[0];
    let u = matkernel::polar_isometry(x1);
    let v = matkernel::polar_isometry(x2);
    let scale = a.iter().map(opnorm).fold(0.0, f64::max).max(1e-300);
    let ok = a.iter().zip(b).all(|(ak, bk)| opnorm(&(&u * ak * v.adjoint() - bk)) <= BLOCK_TOL * scale.max(1.0));
    ok.then_some((u, v))
}

fn stack_blocks(blocks: &[&Block], g: usize) -> Vec<CMatrix> {
    (0..g).map(|k| matkernel::block_diag(&blocks.iter().map(|b| b.coeffs[k].clone()).collect::<Vec<_>>())).collect()
}

/// Minimal-size equivalent pencil by block splitting, duplicate merging and
/// domination pruning.
pub fn minimize(l: &Pencil, opts: &ReduceOptions) -> Result<PencilDecomposition> {
    let structure = block_structure(l, opts.tol, opts.seed)?;
    let g = l.g();
    let scale = opnorm(&l.coefficient_matrix());
    let pieces = structure.block_pencils(l);
    let w_left = structure.p.adjoint();
    let w_right = structure.r.adjoint();
    let mut blocks = Vec::new();
    let (mut r0, mut c0) = (0, 0);
    for (coeffs, &(bp, b)) in pieces.into_iter().zip(&structure.blocks) {
        blocks.push(Block {
            left: w_left.columns(r0, bp).into_owned(),
            right: w_right.columns(c0, b).into_owned(),
            coeffs,
        });
        r0 += bp;
        c0 += b;
    }

    let (zero, mut kept): (Vec<Block>, Vec<Block>) = blocks.into_iter().partition(|b| b.is_zero(scale));
    let mut dropped: Vec<Block> = Vec::new();

    // duplicate merging
    let mut merged = 0;
    let mut i = 0;
    while i < kept.len() {
        let mut j = i + 1;
        while j < kept.len() {
            if unitary_copy(&kept[i].coeffs, &kept[j].coeffs, opts.tol).is_some() {
                dropped.push(kept.remove(j));
                merged += 1;
            } else {
                j += 1;
            }
        }
        i += 1;
    }

    // domination pruning, largest blocks first
    kept.sort_by_key(|b| std::cmp::Reverse(b.shape().0 * b.shape().1));
    let mut inconclusive = false;
    let mut dominated = 0;
    let mut refuted = 0;
    loop {
        let mut progress = false;
        let mut idx = 0;
        while idx < kept.len() && kept.len() > 1 {
            let rest: Vec<&Block> = kept.iter().enumerate().filter(|(k, _)| *k != idx).map(|(_, b)| b).collect();
            let d_coeffs = stack_blocks(&rest, g);
            let verdict = match MatrixMap::from_pairs(&d_coeffs, &kept[idx].coeffs, opts.tol) {
                Ok(map) => certify_completely_contractive(&map, &opts.cert).verdict,
                Err(_) => Verdict::Refuted,
            };
            match verdict {
                Verdict::Certified => {
                    dropped.push(kept.remove(idx));
                    dominated += 1;
                    progress = true;
                }
                Verdict::Refuted => {
                    refuted += 1;
                    idx += 1;
                }
                Verdict::Inconclusive => {
                    inconclusive = true;
                    idx += 1;
                }
            }
        }
        if !progress {
            break;
        }
    }
    kept.sort_by(|a, b| {
        let sa = a.shape();
        let sb = b.shape();
        (sb.0 * sb.1).cmp(&(sa.0 * sa.1))
    });

    let kept_refs: Vec<&Block> = kept.iter().collect();
    let ltilde = Pencil::new(stack_blocks(&kept_refs, g))?;
    let residual: Vec<&Block> = dropped.iter().chain(zero.iter()).collect();
    let s: usize = residual.iter().map(|b| b.shape().1).sum();
    let sp: usize = residual.iter().map(|b| b.shape().0).sum();
    let j = if s > 0 && sp > 0 {
        let coeffs = stack_blocks(&residual, g);
        if coeffs.iter().all(|c| opnorm(c) <= BLOCK_TOL * scale) {
            None
        } else {
            Some(Pencil::with_zeros(coeffs)?)
        }
    } else {
        None
    };

    let order: Vec<&Block> = kept.iter().chain(residual.iter().copied()).collect();
    let q = CMatrix::from_columns(
        &order.iter().flat_map(|b| b.left.column_iter().map(|c| c.into_owned())).collect::<Vec<_>>(),
    );
    let gu = CMatrix::from_columns(
        &order.iter().flat_map(|b| b.right.column_iter().map(|c| c.into_owned())).collect::<Vec<_>>(),
    );
    let domination_cert = match &j {
        Some(jp) => Some(match MatrixMap::from_pairs(ltilde.coeffs(), jp.coeffs(), opts.tol) {
            Ok(map) => certify_completely_contractive(&map, &opts.cert),
            Err(_) => CertResult { verdict: Verdict::Inconclusive, residual: f64::INFINITY, iterations: 0, witness: None },
        }),
        None => None,
    };
    if let Some(c) = &domination_cert {
        if c.verdict != Verdict::Certified {
            inconclusive = true;
        }
    }
    Ok(PencilDecomposition {
        q,
        g: gu,
        block_sizes: kept.iter().map(|b| (b.shape().1, b.shape().0)).collect(),
        ltilde,
        j,
        residual_dims: (s, sp),
        domination_cert,
        merged_duplicates: merged,
        dropped_dominated: dominated,
        inconclusive,
        refuted_tests: refuted,
    })
}

/// Minimality verdict: certified when nothing can be dropped, refuted when
/// a strictly smaller equivalent pencil was found. The refutation witness
/// carries the coefficient matrix of that smaller pencil and the fraction
/// of coefficient area it saves.
pub fn is_minimal(l: &Pencil, opts: &ReduceOptions) -> Result<CertResult> {
    let dec = minimize(l, opts)?;
    let area = l.d() * l.d_prime();
    let small = dec.ltilde.d() * dec.ltilde.d_prime();
    if small < area || dec.merged_duplicates > 0 || dec.dropped_dominated > 0 {
        let gap = 1.0 - small as f64 / area as f64;
        return Ok(CertResult {
            verdict: Verdict::Refuted,
            residual: gap,
            iterations: 0,
            witness: Some(CertWitness { level: 1, input: dec.ltilde.coefficient_matrix(), gap }),
        });
    }
    let verdict = if dec.inconclusive { Verdict::Inconclusive } else { Verdict::Certified };
    Ok(CertResult { verdict, residual: 0.0, iterations: 0, witness: None })
}
