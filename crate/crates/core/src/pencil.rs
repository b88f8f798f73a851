//! Homogeneous linear pencils `L(x) = Σ A_j x_j` and their evaluation on
//! matrix tuples, `L(X) = Σ A_j ⊗ X_j`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matkernel::{
    self, c64, column_space, ensure_unitary, ginibre, kron, numeric_rank, opnorm, unvec_rows, vec_rows, CMatrix,
};

/// Residual above which a matrix passed as a unitary is rejected.
pub const UNITARY_TOL: f64 = 1e-8;
/// Absolute tolerance on `‖L(X)‖ - 1` for boundary membership.
pub const BOUNDARY_TOL: f64 = 1e-8;

/// A `g`-tuple of square `n×n` matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixTuple {
    entries: Vec<CMatrix>,
}

impl MatrixTuple {
    pub fn new(entries: Vec<CMatrix>) -> Result<Self> {
        let first = entries
            .first()
            .ok_or_else(|| Error::InvalidArgument("matrix tuple needs at least one entry".into()))?;
        let n = first.nrows();
        if n == 0 {
            return Err(Error::ShapeMismatch("tuple entries must be at least 1x1".into()));
        }
        for (j, x) in entries.iter().enumerate() {
            if x.shape() != (n, n) {
                return Err(Error::ShapeMismatch(format!(
                    "tuple entry {j} has shape {:?}, expected ({n}, {n})",
                    x.shape()
                )));
            }
        }
        Ok(Self { entries })
    }

    pub fn zeros(g: usize, n: usize) -> Self {
        Self { entries: vec![matkernel::zeros(n, n); g] }
    }

    /// Tuple of Ginibre matrices.
    pub fn random(g: usize, n: usize, rng: &mut matkernel::Rng) -> Self {
        Self { entries: (0..g).map(|_| ginibre(n, n, rng)).collect() }
    }

    /// Scalar tuple (`n = 1`).
    pub fn scalars(values: &[Complex64]) -> Self {
        Self { entries: values.iter().map(|&z| CMatrix::from_element(1, 1, z)).collect() }
    }

    pub fn g(&self) -> usize {
        self.entries.len()
    }

    pub fn n(&self) -> usize {
        self.entries[0].nrows()
    }

    pub fn entries(&self) -> &[CMatrix] {
        &self.entries
    }

    pub fn get(&self, j: usize) -> &CMatrix {
        &self.entries[j]
    }

    pub fn into_entries(self) -> Vec<CMatrix> {
        self.entries
    }

    pub fn scale(&self, z: Complex64) -> Self {
        Self { entries: self.entries.iter().map(|x| x * z).collect() }
    }

    pub fn scale_real(&self, t: f64) -> Self {
        self.scale(c64(t, 0.0))
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: Complex64, other: &Self, b: Complex64) -> Result<Self> {
        if self.g() != other.g() || self.n() != other.n() {
            return Err(Error::ShapeMismatch("tuples differ in arity or size".into()));
        }
        let entries = self.entries.iter().zip(&other.entries).map(|(x, y)| x * a + y * b).collect();
        Ok(Self { entries })
    }

    /// Entrywise block-diagonal sum `X ⊕ Y`.
    pub fn direct_sum(&self, other: &Self) -> Result<Self> {
        if self.g() != other.g() {
            return Err(Error::ArityMismatch { expected: self.g(), got: other.g() });
        }
        let entries = self.entries.iter().zip(&other.entries).map(|(x, y)| matkernel::direct_sum(x, y)).collect();
        Ok(Self { entries })
    }

    /// Applies `f` to every entry.
    pub fn map(&self, f: impl Fn(&CMatrix) -> CMatrix) -> Result<Self> {
        Self::new(self.entries.iter().map(f).collect())
    }
}

/// Coarse position of a tuple relative to the pencil ball.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BallPosition {
    Inside,
    Boundary,
    Outside,
}

/// A homogeneous linear pencil with `g` coefficients of shape `d′×d`.
#[derive(Debug, Clone, PartialEq)]
pub struct Pencil {
    coeffs: Vec<CMatrix>,
}

impl Pencil {
    /// Builds a pencil, rejecting empty, ragged, non-finite or all-zero input.
    pub fn new(coeffs: Vec<CMatrix>) -> Result<Self> {
        let pencil = Self::with_zeros(coeffs)?;
        if pencil.coeffs.iter().all(|a| a.iter().all(|z| *z == c64(0.0, 0.0))) {
            return Err(Error::ZeroPencil);
        }
        Ok(pencil)
    }

    /// Like [`Pencil::new`] but allows the zero pencil and empty shapes.
    /// Used for residual parts of decompositions.
    pub(crate) fn with_zeros(coeffs: Vec<CMatrix>) -> Result<Self> {
        let first = coeffs
            .first()
            .ok_or_else(|| Error::InvalidArgument("pencil needs at least one coefficient".into()))?;
        let shape = first.shape();
        for (j, a) in coeffs.iter().enumerate() {
            if a.shape() != shape {
                return Err(Error::ShapeMismatch(format!(
                    "coefficient {j} has shape {:?}, expected {shape:?}",
                    a.shape()
                )));
            }
            if !matkernel::all_finite(a) {
                return Err(Error::InvalidArgument(format!("coefficient {j} has non-finite entries")));
            }
        }
        Ok(Self { coeffs })
    }

    /// Convenience constructor from real row-major data.
    pub fn from_real(d_prime: usize, d: usize, coeffs: &[&[f64]]) -> Result<Self> {
        Self::new(coeffs.iter().map(|c| matkernel::from_real_rows(d_prime, d, c)).collect())
    }

    /// Random pencil with Ginibre coefficients.
    pub fn random(g: usize, d_prime: usize, d: usize, rng: &mut matkernel::Rng) -> Self {
        Self { coeffs: (0..g).map(|_| ginibre(d_prime, d, rng)).collect() }
    }

    pub fn g(&self) -> usize {
        self.coeffs.len()
    }

    /// Row count `d′` of each coefficient.
    pub fn d_prime(&self) -> usize {
        self.coeffs[0].nrows()
    }

    /// Column count `d` of each coefficient.
    pub fn d(&self) -> usize {
        self.coeffs[0].ncols()
    }

    pub fn coeffs(&self) -> &[CMatrix] {
        &self.coeffs
    }

    pub fn coeff(&self, j: usize) -> &CMatrix {
        &self.coeffs[j]
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|a| a.iter().all(|z| z.norm() == 0.0))
    }

    fn check_arity(&self, g: usize) -> Result<()> {
        if g != self.g() {
            return Err(Error::ArityMismatch { expected: self.g(), got: g });
        }
        Ok(())
    }

    /// `L(X) = Σ A_j ⊗ X_j`, a `d′n × dn` matrix.
    pub fn eval(&self, x: &MatrixTuple) -> Result<CMatrix> {
        self.check_arity(x.g())?;
        let n = x.n();
        let mut out = matkernel::zeros(self.d_prime() * n, self.d() * n);
        for (a, xj) in self.coeffs.iter().zip(x.entries()) {
            out += kron(a, xj);
        }
        Ok(out)
    }

    /// Value at a scalar point `x ∈ C^g`.
    pub fn eval_scalars(&self, c: &[Complex64]) -> Result<CMatrix> {
        self.check_arity(c.len())?;
        let mut out = matkernel::zeros(self.d_prime(), self.d());
        for (a, &z) in self.coeffs.iter().zip(c) {
            out += a * z;
        }
        Ok(out)
    }

    pub fn in_ball(&self, x: &MatrixTuple, tol: f64) -> Result<BallPosition> {
        let norm = opnorm(&self.eval(x)?);
        Ok(if (norm - 1.0).abs() <= tol {
            BallPosition::Boundary
        } else if norm < 1.0 {
            BallPosition::Inside
        } else {
            BallPosition::Outside
        })
    }

    /// The `d′d × g` matrix whose columns are the row-major vectorized
    /// coefficients.
    pub fn coefficient_matrix(&self) -> CMatrix {
        let cols: Vec<_> = self.coeffs.iter().map(vec_rows).collect();
        CMatrix::from_columns(&cols)
    }

    /// True iff the coefficients are linearly independent at relative `tol`.
    pub fn is_nondegenerate(&self, tol: f64) -> bool {
        numeric_rank(&self.coefficient_matrix(), tol) == self.g()
    }

    /// Coefficientwise direct sum `A_j ⊕ B_j`.
    pub fn direct_sum(&self, other: &Pencil) -> Result<Pencil> {
        self.check_arity(other.g())?;
        Pencil::with_zeros(self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| matkernel::direct_sum(a, b)).collect())
    }

    /// `U A_j V*` with unitary `U` (d′×d′) and `V` (d×d).
    pub fn conjugate(&self, u: &CMatrix, v: &CMatrix) -> Result<Pencil> {
        if u.shape() != (self.d_prime(), self.d_prime()) || v.shape() != (self.d(), self.d()) {
            return Err(Error::ShapeMismatch(format!(
                "conjugating unitaries have shapes {:?} and {:?} for a {}x{} pencil",
                u.shape(),
                v.shape(),
                self.d_prime(),
                self.d()
            )));
        }
        ensure_unitary(u, UNITARY_TOL)?;
        ensure_unitary(v, UNITARY_TOL)?;
        Ok(self.transform(u, v))
    }

    /// `U A_j V*` without unitarity checks.
    pub(crate) fn transform(&self, u: &CMatrix, v: &CMatrix) -> Pencil {
        Pencil { coeffs: self.coeffs.iter().map(|a| u * a * v.adjoint()).collect() }
    }

    /// Orthonormal (Frobenius) basis of `span{A_j}`, each element phase
    /// normalized so that its first significant entry is real positive.
    pub fn range_basis(&self, tol: f64) -> Vec<CMatrix> {
        let cols = column_space(&self.coefficient_matrix(), tol);
        (0..cols.ncols())
            .map(|k| {
                let v: Vec<Complex64> = cols.column(k).iter().copied().collect();
                normalize_phase(unvec_rows(&v, self.d_prime(), self.d()))
            })
            .collect()
    }

    /// Coefficientwise maximum deviation `max_j ‖A_j − B_j‖`.
    pub fn coefficient_distance(&self, other: &Pencil) -> f64 {
        if self.g() != other.g() || self.coeffs[0].shape() != other.coeffs[0].shape() {
            return f64::INFINITY;
        }
        self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| opnorm(&(a - b))).fold(0.0, f64::max)
    }
}

pub(crate) fn normalize_phase(m: CMatrix) -> CMatrix {
    let top = m.iter().map(|z| z.norm()).fold(0.0, f64::max);
    match m.iter().find(|z| z.norm() > 1e-8 * top) {
        Some(&z) => {
            let phase = z.conj() / z.norm();
            m * phase
        }
        None => m,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EquivalenceVerdict {
    /// No sampled tuple separated the two norms. Not a proof.
    EquivalentOnSamples,
    Refuted,
}

#[derive(Debug, Clone)]
pub struct EquivalenceWitness {
    pub level: usize,
    pub sample_index: usize,
    pub tuple: MatrixTuple,
    pub gap: f64,
}

#[derive(Debug, Clone)]
pub struct EquivalenceReport {
    pub verdict: EquivalenceVerdict,
    pub witness: Option<EquivalenceWitness>,
    pub levels_tested: Vec<usize>,
    pub samples_per_level: usize,
    pub seed: u64,
    pub tol: f64,
}

/// Sampling parameters for [`equivalent`].
#[derive(Debug, Clone)]
pub struct EquivalenceOptions {
    pub levels: Vec<usize>,
    pub samples: usize,
    pub seed: u64,
    pub tol: f64,
}

impl Default for EquivalenceOptions {
    fn default() -> Self {
        Self { levels: vec![1, 2, 3, 4], samples: 64, seed: 42, tol: 1e-8 }
    }
}

/// Seed for sample `index` at `level`, independent of evaluation order.
pub(crate) fn sample_seed(seed: u64, level: usize, index: usize) -> u64 {
    // splitmix64 finalizer over a packed key
    let mut z = seed ^ ((level as u64) << 40) ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Compares `‖L(X)‖` and `‖M(X)‖` on seeded random tuples rescaled to the
/// boundary of `B_L`. The first refutation in `(level, sample)` order wins.
pub fn equivalent(l: &Pencil, m: &Pencil, opts: &EquivalenceOptions) -> Result<EquivalenceReport> {
    if l.g() != m.g() {
        return Err(Error::ArityMismatch { expected: l.g(), got: m.g() });
    }
    let jobs: Vec<(usize, usize)> =
        opts.levels.iter().flat_map(|&n| (0..opts.samples).map(move |k| (n, k))).collect();
    let witness = jobs
        .par_iter()
        .enumerate()
        .filter_map(|(order, &(level, index))| {
            let mut rng = matkernel::seeded_rng(sample_seed(opts.seed, level, index));
            let mut x = MatrixTuple::random(l.g(), level, &mut rng);
            let norm_l = opnorm(&l.eval(&x).ok()?);
            if norm_l > 0.0 {
                x = x.scale_real(1.0 / norm_l);
            }
            let a = opnorm(&l.eval(&x).ok()?);
            let b = opnorm(&m.eval(&x).ok()?);
            let gap = (a - b).abs();
            (gap > opts.tol * a.max(1.0)).then_some((order, EquivalenceWitness { level, sample_index: index, tuple: x, gap }))
        })
        .min_by_key(|(order, _)| *order)
        .map(|(_, w)| w);
    Ok(EquivalenceReport {
        verdict: if witness.is_some() { EquivalenceVerdict::Refuted } else { EquivalenceVerdict::EquivalentOnSamples },
        witness,
        levels_tested: opts.levels.clone(),
        samples_per_level: opts.samples,
        seed: opts.seed,
        tol: opts.tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matkernel::{diag_real, from_real_rows, identity, random_unitary, seeded_rng};

    fn x_pencil() -> Pencil {
        Pencil::from_real(1, 1, &[&[1.0]]).unwrap()
    }

    fn row_pencil() -> Pencil {
        Pencil::from_real(1, 2, &[&[1.0, 0.0], &[0.0, 1.0]]).unwrap()
    }

    #[test]
    fn eval_identity_pencil() {
        let n = from_real_rows(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let x = MatrixTuple::new(vec![n.clone()]).unwrap();
        assert_eq!(x_pencil().eval(&x).unwrap(), n);
    }

    #[test]
    fn eval_row_pencil() {
        let x = MatrixTuple::new(vec![identity(2).scale(0.5), matkernel::zeros(2, 2)]).unwrap();
        let value = row_pencil().eval(&x).unwrap();
        assert_eq!(value.shape(), (2, 4));
        let mut expected = matkernel::zeros(2, 4);
        expected[(0, 0)] = c64(0.5, 0.0);
        expected[(1, 1)] = c64(0.5, 0.0);
        assert_eq!(value, expected);
        assert!((opnorm(&value) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn eval_matches_explicit_kron_sum() {
        let mut rng = seeded_rng(21);
        let l = Pencil::random(3, 2, 3, &mut rng);
        let x = MatrixTuple::random(3, 2, &mut rng);
        let value = l.eval(&x).unwrap();
        // entrywise oracle
        for r in 0..4 {
            for c in 0..6 {
                let (i, k) = (r / 2, r % 2);
                let (j, m) = (c / 2, c % 2);
                let expected: Complex64 = (0..3).map(|t| l.coeff(t)[(i, j)] * x.get(t)[(k, m)]).sum();
                assert!((value[(r, c)] - expected).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn eval_rejects_arity_mismatch() {
        let x = MatrixTuple::zeros(1, 2);
        assert!(matches!(row_pencil().eval(&x), Err(Error::ArityMismatch { expected: 2, got: 1 })));
    }

    #[test]
    fn ball_membership() {
        let l = row_pencil();
        assert_eq!(l.in_ball(&MatrixTuple::zeros(2, 3), BOUNDARY_TOL).unwrap(), BallPosition::Inside);
        let x = MatrixTuple::new(vec![identity(2).scale(0.5), matkernel::zeros(2, 2)]).unwrap();
        assert_eq!(l.in_ball(&x, BOUNDARY_TOL).unwrap(), BallPosition::Inside);
        let mut rng = seeded_rng(3);
        let y = MatrixTuple::random(2, 3, &mut rng);
        let norm = opnorm(&l.eval(&y).unwrap());
        let on_boundary = y.scale_real(1.0 / norm);
        assert_eq!(l.in_ball(&on_boundary, BOUNDARY_TOL).unwrap(), BallPosition::Boundary);
        assert_eq!(l.in_ball(&y.scale_real(2.0 / norm), BOUNDARY_TOL).unwrap(), BallPosition::Outside);
    }

    #[test]
    fn nondegeneracy_examples() {
        assert!(row_pencil().is_nondegenerate(1e-9));
        let dep = Pencil::new(vec![identity(2), identity(2).scale(2.0)]).unwrap();
        assert!(!dep.is_nondegenerate(1e-9));
        let mut rng = seeded_rng(4);
        for _ in 0..10 {
            let base = Pencil::random(3, 2, 3, &mut rng);
            let c = [0.3, -1.2, 0.7];
            let combo = base.coeffs().iter().zip(c).fold(matkernel::zeros(2, 3), |acc, (a, t)| acc + a.scale(t));
            let mut coeffs = base.coeffs().to_vec();
            coeffs.push(combo);
            assert!(!Pencil::new(coeffs).unwrap().is_nondegenerate(1e-9));
        }
    }

    #[test]
    fn zero_pencil_rejected() {
        assert!(matches!(Pencil::new(vec![matkernel::zeros(2, 2)]), Err(Error::ZeroPencil)));
        assert!(Pencil::new(vec![]).is_err());
        assert!(matches!(
            Pencil::new(vec![identity(2), identity(3)]),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn equivalence_examples() {
        let opts = EquivalenceOptions { tol: 1e-10, ..Default::default() };
        let mut rng = seeded_rng(5);
        let l = Pencil::random(2, 2, 3, &mut rng);
        let m = l.conjugate(&random_unitary(2, 1), &random_unitary(3, 2)).unwrap();
        assert_eq!(equivalent(&l, &m, &opts).unwrap().verdict, EquivalenceVerdict::EquivalentOnSamples);

        let x = x_pencil();
        let xx = x.direct_sum(&x).unwrap();
        assert_eq!(equivalent(&x, &xx, &opts).unwrap().verdict, EquivalenceVerdict::EquivalentOnSamples);

        let two_x = Pencil::from_real(1, 1, &[&[2.0]]).unwrap();
        let report = equivalent(&x, &two_x, &opts).unwrap();
        assert_eq!(report.verdict, EquivalenceVerdict::Refuted);
        let w = report.witness.unwrap();
        assert_eq!((w.level, w.sample_index), (1, 0));
        assert!((w.gap - 1.0).abs() < 1e-12);
    }

    #[test]
    fn direct_sum_and_conjugate() {
        let x = x_pencil();
        let half = Pencil::from_real(1, 1, &[&[0.5]]).unwrap();
        let s = x.direct_sum(&half).unwrap();
        assert_eq!(s.coeff(0), &diag_real(&[1.0, 0.5]));
        let same = s.conjugate(&identity(2), &identity(2)).unwrap();
        assert_eq!(same, s);
        let bad = from_real_rows(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        assert!(matches!(s.conjugate(&bad, &identity(2)), Err(Error::NotUnitary { .. })));
    }

    #[test]
    fn direct_sum_eval_is_permuted_block_sum() {
        let mut rng = seeded_rng(6);
        let l = Pencil::random(2, 2, 1, &mut rng);
        let m = Pencil::random(2, 1, 2, &mut rng);
        let x = MatrixTuple::random(2, 2, &mut rng);
        let lhs = l.direct_sum(&m).unwrap().eval(&x).unwrap();
        let rhs = matkernel::direct_sum(&l.eval(&x).unwrap(), &m.eval(&x).unwrap());
        // Explicit permutation oracle: row (i, k) of the combined coefficient
        // space maps to the block-sum position.
        let n = 2;
        let perm = |i: usize, k: usize, split: usize, total_first: usize| -> usize {
            if i < split {
                i * n + k
            } else {
                total_first + (i - split) * n + k
            }
        };
        for i in 0..3 {
            for k in 0..n {
                for j in 0..3 {
                    for q in 0..n {
                        let r = perm(i, k, 2, 2 * n);
                        let c = perm(j, q, 1, n);
                        assert!((lhs[(i * n + k, j * n + q)] - rhs[(r, c)]).norm() < 1e-14);
                    }
                }
            }
        }
        assert!((opnorm(&lhs) - opnorm(&rhs)).abs() < 1e-12);
    }

    #[test]
    fn range_basis_examples() {
        let basis = row_pencil().range_basis(1e-9);
        assert_eq!(basis.len(), 2);
        let dep = Pencil::new(vec![identity(2), identity(2).scale(2.0)]).unwrap();
        let basis = dep.range_basis(1e-9);
        assert_eq!(basis.len(), 1);
        let expected = identity(2).scale(1.0 / 2f64.sqrt());
        assert!(opnorm(&(&basis[0] - expected)) < 1e-12);

        let mut rng = seeded_rng(7);
        let base = Pencil::random(2, 3, 3, &mut rng);
        let mut coeffs = base.coeffs().to_vec();
        coeffs.push(base.coeff(0).scale(2.0) - base.coeff(1));
        coeffs.push(base.coeff(1).scale(-0.5));
        let l = Pencil::new(coeffs).unwrap();
        let basis = l.range_basis(1e-9);
        assert_eq!(basis.len(), 2);
        for (a, ea) in basis.iter().enumerate() {
            for (b, eb) in basis.iter().enumerate() {
                let expected = if a == b { 1.0 } else { 0.0 };
                assert!((matkernel::inner(ea, eb) - c64(expected, 0.0)).norm() < 1e-12);
            }
        }
    }
}
