//! Coefficient isolation for black-box noncommutative maps.
//!
//! A map is only ever evaluated; its power-series coefficients are read off
//! from evaluations on nilpotent block matrices, either the superdiagonal
//! `(m+1)×(m+1)` construction (one evaluation per word) or the compression
//! of creation operators on the truncated word space (one evaluation per
//! variable for all words of a degree).

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matkernel::{self, c64, opnorm, seeded_rng, CMatrix};
use crate::ncseries::{NCPolynomial, Word};
use crate::pencil::{MatrixTuple, Pencil};

pub const DEFAULT_LAMBDA: f64 = 0.25;
/// Smallest admissible `λ^{m-1}`.
pub const UNDERFLOW_FLOOR: f64 = 1e-12;
/// Largest admissible `‖f(0)‖`.
pub const CONSTANT_TOL: f64 = 1e-10;
/// Block-consistency tolerance for the registration spot check.
pub const CONSISTENCY_TOL: f64 = 1e-8;
/// Extracted coefficients whose entries all fall below this are omitted.
pub const PRUNE_TOL: f64 = 1e-11;

type Evaluator = dyn Fn(&MatrixTuple) -> Result<CMatrix> + Send + Sync;

/// A noncommutative map known only through evaluations on matrix tuples.
#[derive(Clone)]
pub struct BlackBoxMap {
    g: usize,
    l_prime: usize,
    l: usize,
    degree_bound: Option<usize>,
    evaluator: Arc<Evaluator>,
}

impl fmt::Debug for BlackBoxMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BlackBoxMap")
            .field("g", &self.g)
            .field("l_prime", &self.l_prime)
            .field("l", &self.l)
            .field("degree_bound", &self.degree_bound)
            .finish_non_exhaustive()
    }
}

impl BlackBoxMap {
    /// Wraps an evaluator returning `ℓ′n × ℓn` matrices for `n×n` inputs.
    /// The evaluator is spot-checked for block consistency on one random
    /// pair of small inputs.
    pub fn new(
        g: usize,
        l_prime: usize,
        l: usize,
        evaluator: impl Fn(&MatrixTuple) -> Result<CMatrix> + Send + Sync + 'static,
    ) -> Result<Self> {
        if g == 0 || l_prime == 0 || l == 0 {
            return Err(Error::InvalidArgument("black box needs positive arity and shape".into()));
        }
        let map = Self { g, l_prime, l, degree_bound: None, evaluator: Arc::new(evaluator) };
        map.spot_check()?;
        Ok(map)
    }

    pub fn with_degree_bound(mut self, bound: Option<usize>) -> Self {
        self.degree_bound = bound;
        self
    }

    pub fn from_polynomial(p: NCPolynomial) -> Result<Self> {
        let degree = p.degree().unwrap_or(0);
        let (g, lp, l) = (p.g(), p.l_prime(), p.l());
        Ok(Self::new(g, lp, l, move |x| p.eval(x))?.with_degree_bound(Some(degree)))
    }

    pub fn from_pencil(l: &Pencil) -> Result<Self> {
        let pencil = l.clone();
        Ok(Self::new(l.g(), l.d_prime(), l.d(), move |x| pencil.eval(x))?.with_degree_bound(Some(1)))
    }

    pub fn g(&self) -> usize {
        self.g
    }

    pub fn l_prime(&self) -> usize {
        self.l_prime
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn degree_bound(&self) -> Option<usize> {
        self.degree_bound
    }

    pub fn eval(&self, x: &MatrixTuple) -> Result<CMatrix> {
        if x.g() != self.g {
            return Err(Error::ArityMismatch { expected: self.g, got: x.g() });
        }
        let out = (self.evaluator)(x)?;
        let n = x.n();
        if out.shape() != (self.l_prime * n, self.l * n) {
            return Err(Error::ShapeMismatch(format!(
                "black box returned {:?}, expected {}x{}",
                out.shape(),
                self.l_prime * n,
                self.l * n
            )));
        }
        Ok(out)
    }

    /// `f(0)` at level 1.
    pub fn constant_term(&self) -> Result<CMatrix> {
        self.eval(&MatrixTuple::zeros(self.g, 1))
    }

    /// Errors unless `‖f(0)‖ < 1e-10`.
    pub fn ensure_vanishes_at_zero(&self) -> Result<()> {
        let norm = opnorm(&self.constant_term()?);
        if norm >= CONSTANT_TOL {
            return Err(Error::NonzeroConstantTerm { norm });
        }
        Ok(())
    }

    /// `x ↦ a f(x) b` with `a`, `b` acting as `a ⊗ I`, `b ⊗ I`.
    pub fn sandwich(&self, a: &CMatrix, b: &CMatrix) -> Result<BlackBoxMap> {
        if a.ncols() != self.l_prime || b.nrows() != self.l {
            return Err(Error::ShapeMismatch("sandwich factors do not match the output shape".into()));
        }
        let inner = self.clone();
        let (a, b) = (a.clone(), b.clone());
        let (lp, l) = (a.nrows(), b.ncols());
        Ok(BlackBoxMap::new(self.g, lp, l, move |x| {
            let id = matkernel::identity(x.n());
            Ok(matkernel::kron(&a, &id) * inner.eval(x)? * matkernel::kron(&b, &id))
        })?
        .with_degree_bound(self.degree_bound))
    }

    fn spot_check(&self) -> Result<()> {
        let mut rng = seeded_rng(0x5eed_b10c);
        let shrink = |t: MatrixTuple| {
            let norm = t.entries().iter().map(opnorm).fold(0.0, f64::max).max(1e-300);
            t.scale_real(0.05 / norm)
        };
        let x = shrink(MatrixTuple::random(self.g, 1, &mut rng));
        let y = shrink(MatrixTuple::random(self.g, 2, &mut rng));
        let fx = self.eval(&x)?;
        let fy = self.eval(&y)?;
        let xy = MatrixTuple::new(
            x.entries().iter().zip(y.entries()).map(|(a, b)| matkernel::direct_sum(a, b)).collect(),
        )?;
        let fxy = self.eval(&xy)?;
        let (n1, n2) = (1, 2);
        let n = n1 + n2;
        let mut expected = matkernel::zeros(fxy.nrows(), fxy.ncols());
        for p in 0..self.l_prime {
            for q in 0..self.l {
                expected.view_mut((p * n, q * n), (n1, n1)).copy_from(&fx.view((p * n1, q * n1), (n1, n1)));
                expected.view_mut((p * n + n1, q * n + n1), (n2, n2)).copy_from(&fy.view((p * n2, q * n2), (n2, n2)));
            }
        }
        let gap = opnorm(&(fxy - expected));
        if !(gap <= CONSISTENCY_TOL) {
            return Err(Error::InconsistentEvaluator { gap });
        }
        Ok(())
    }
}

/// Tuple with `X_k = I_n` and all other entries zero.
fn unit_probe(g: usize, k: usize, n: usize) -> MatrixTuple {
    let mut entries = vec![matkernel::zeros(n, n); g];
    entries[k] = matkernel::identity(n);
    MatrixTuple::new(entries).expect("square entries")
}

fn scale_power(lambda: f64, power: usize) -> Result<f64> {
    let value = lambda.powi(power as i32);
    if !(value >= UNDERFLOW_FLOOR) {
        return Err(Error::NumericalUnderflow { power, value });
    }
    Ok(value)
}

/// The block upper-triangular tuple of size `(m+1)n`, `m = |v| + 1`, with
/// `λI` in block `(k, k+1)` of `T_{v_k}` and `X_i` in block `(m, m+1)` of
/// every `T_i` (blocks counted from 1).
pub fn build_t_superdiagonal(v: &Word, x: &MatrixTuple, lambda: f64) -> Result<MatrixTuple> {
    let g = x.g();
    if let Some(top) = v.max_letter() {
        if top >= g {
            return Err(Error::ArityMismatch { expected: g, got: top + 1 });
        }
    }
    let n = x.n();
    let m = v.len() + 1;
    let size = (m + 1) * n;
    let mut ts = vec![matkernel::zeros(size, size); g];
    for (k, &letter) in v.letters().iter().enumerate() {
        let block = matkernel::identity(n) * c64(lambda, 0.0);
        ts[letter].view_mut((k * n, (k + 1) * n), (n, n)).copy_from(&block);
    }
    for (t, xi) in ts.iter_mut().zip(x.entries()) {
        t.view_mut(((m - 1) * n, m * n), (n, n)).copy_from(xi);
    }
    MatrixTuple::new(ts)
}

/// Recovers `f_w` from one evaluation on the superdiagonal construction.
pub fn extract_coefficient(f: &BlackBoxMap, w: &Word, lambda: f64, n: usize) -> Result<CMatrix> {
    let (v, k) = w.split_last().ok_or_else(|| Error::InvalidArgument("word must be nonempty".into()))?;
    if k >= f.g() {
        return Err(Error::ArityMismatch { expected: f.g(), got: k + 1 });
    }
    f.ensure_vanishes_at_zero()?;
    let m = w.len();
    let scale = scale_power(lambda, m - 1)?;
    let t = build_t_superdiagonal(&v, &unit_probe(f.g(), k, n), lambda)?;
    let out = f.eval(&t)?;
    let big = (m + 1) * n;
    Ok(CMatrix::from_fn(f.l_prime(), f.l(), |p, q| out[(p * big, q * big + m * n)] / scale))
}

/// The truncated word space `K_m` (words of length `1..=m`) with its
/// creation operators.
#[derive(Debug, Clone)]
pub struct FockApparatus {
    g: usize,
    m: usize,
    lambda: f64,
    basis: Vec<Word>,
    index: HashMap<Word, usize>,
    creation: Vec<CMatrix>,
}

impl FockApparatus {
    pub fn new(g: usize, m: usize, lambda: f64) -> Result<Self> {
        if g == 0 || m == 0 {
            return Err(Error::InvalidArgument("apparatus needs g ≥ 1 and m ≥ 1".into()));
        }
        let basis = Word::all_between(g, 1, m);
        let index: HashMap<Word, usize> = basis.iter().cloned().enumerate().map(|(i, w)| (w, i)).collect();
        let dim = basis.len();
        let creation = (0..g)
            .map(|j| {
                let mut s = matkernel::zeros(dim, dim);
                for (col, u) in basis.iter().enumerate() {
                    if u.len() < m {
                        s[(index[&u.prepend(j)], col)] = c64(1.0, 0.0);
                    }
                }
                s
            })
            .collect();
        Ok(Self { g, m, lambda, basis, index, creation })
    }

    pub fn g(&self) -> usize {
        self.g
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn basis(&self) -> &[Word] {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn index_of(&self, w: &Word) -> Option<usize> {
        self.index.get(w).copied()
    }

    /// `S_j u = x_j u` for `|u| < m`, else 0.
    pub fn creation(&self, j: usize) -> &CMatrix {
        &self.creation[j]
    }
}

/// `T_j = (λS_j⊗I, λE_j, 0; 0, 0, X_j; 0, 0, 0)` on `(K_m⊗Cⁿ) ⊕ Cⁿ ⊕ Cⁿ`,
/// where `E_j y = x_j ⊗ y`.
pub fn build_fock_t(app: &FockApparatus, x: &MatrixTuple) -> Result<MatrixTuple> {
    if x.g() != app.g {
        return Err(Error::ArityMismatch { expected: app.g, got: x.g() });
    }
    let n = x.n();
    let k = app.dim() * n;
    let size = k + 2 * n;
    let lam = c64(app.lambda, 0.0);
    let id = matkernel::identity(n);
    let ts = (0..app.g)
        .map(|j| {
            let mut t = matkernel::zeros(size, size);
            t.view_mut((0, 0), (k, k)).copy_from(&(matkernel::kron(&app.creation[j], &id) * lam));
            let row = app.index[&Word::letter(j)] * n;
            t.view_mut((row, k), (n, n)).copy_from(&(&id * lam));
            t.view_mut((k, k + n), (n, n)).copy_from(x.get(j));
            t
        })
        .collect();
    MatrixTuple::new(ts)
}

fn prune(map: BTreeMap<Word, CMatrix>) -> BTreeMap<Word, CMatrix> {
    map.into_iter().filter(|(_, c)| c.iter().any(|z| z.norm() > PRUNE_TOL)).collect()
}

/// All coefficients of degree `m` from `g` evaluations on the creation
/// operator compression; near-zero coefficients are omitted.
pub fn extract_all_coefficients_at_degree(
    f: &BlackBoxMap,
    m: usize,
    lambda: f64,
    n: usize,
) -> Result<BTreeMap<Word, CMatrix>> {
    if m == 0 {
        return Err(Error::InvalidArgument("degree must be at least 1".into()));
    }
    f.ensure_vanishes_at_zero()?;
    let scale = scale_power(lambda, m - 1)?;
    let app = FockApparatus::new(f.g(), m, lambda)?;
    let prefixes = Word::all_of_length(f.g(), m - 1);
    let size = app.dim() * n + 2 * n;
    let col = app.dim() * n + n;
    let per_letter: Vec<Vec<(Word, CMatrix)>> = (0..f.g())
        .into_par_iter()
        .map(|k| {
            let t = build_fock_t(&app, &unit_probe(f.g(), k, n))?;
            let out = f.eval(&t)?;
            Ok(prefixes
                .iter()
                .map(|v| {
                    let row = if v.is_empty() { app.dim() * n } else { app.index[v] * n };
                    let c = CMatrix::from_fn(f.l_prime(), f.l(), |p, q| out[(p * size + row, q * size + col)] / scale);
                    (v.append(k), c)
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(prune(per_letter.into_iter().flatten().collect()))
}

/// Extraction options shared by the strategies.
#[derive(Debug, Clone, Copy)]
pub struct ExtractOptions {
    pub lambda: f64,
    pub probe_size: usize,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        Self { lambda: DEFAULT_LAMBDA, probe_size: 1 }
    }
}

/// A strategy for reading off all coefficients of one degree.
pub trait CoefficientExtractor: Send + Sync {
    fn name(&self) -> &'static str;

    fn extract_degree(&self, f: &BlackBoxMap, m: usize, opts: &ExtractOptions) -> Result<BTreeMap<Word, CMatrix>>;

    /// Coefficients of degrees `1..=max_degree` as a polynomial.
    fn extract_up_to(&self, f: &BlackBoxMap, max_degree: usize, opts: &ExtractOptions) -> Result<NCPolynomial> {
        let mut terms = Vec::new();
        for m in 1..=max_degree {
            terms.extend(self.extract_degree(f, m, opts)?);
        }
        NCPolynomial::new(f.g(), f.l_prime(), f.l(), terms)
    }
}

/// One superdiagonal evaluation per word.
#[derive(Debug, Clone, Copy, Default)]
pub struct Superdiagonal;

impl CoefficientExtractor for Superdiagonal {
    fn name(&self) -> &'static str {
        "superdiagonal"
    }

    fn extract_degree(&self, f: &BlackBoxMap, m: usize, opts: &ExtractOptions) -> Result<BTreeMap<Word, CMatrix>> {
        if m == 0 {
            return Err(Error::InvalidArgument("degree must be at least 1".into()));
        }
        let words = Word::all_of_length(f.g(), m);
        let coeffs: Vec<(Word, CMatrix)> = words
            .into_par_iter()
            .map(|w| extract_coefficient(f, &w, opts.lambda, opts.probe_size).map(|c| (w, c)))
            .collect::<Result<_>>()?;
        Ok(prune(coeffs.into_iter().collect()))
    }
}

/// One creation-operator evaluation per variable.
#[derive(Debug, Clone, Copy, Default)]
pub struct Fock;

impl CoefficientExtractor for Fock {
    fn name(&self) -> &'static str {
        "fock"
    }

    fn extract_degree(&self, f: &BlackBoxMap, m: usize, opts: &ExtractOptions) -> Result<BTreeMap<Word, CMatrix>> {
        extract_all_coefficients_at_degree(f, m, opts.lambda, opts.probe_size)
    }
}

static EXTRACTORS: [&dyn CoefficientExtractor; 2] = [&Superdiagonal, &Fock];

/// Registered extraction strategies by name.
pub fn extractor(name: &str) -> Option<&'static dyn CoefficientExtractor> {
    EXTRACTORS.iter().copied().find(|e| e.name() == name)
}

pub fn extractor_names() -> Vec<&'static str> {
    EXTRACTORS.iter().map(|e| e.name()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matkernel::{ginibre, identity};

    fn scalar_poly(g: usize, terms: &[(&[usize], f64)]) -> NCPolynomial {
        NCPolynomial::scalar(g, terms.iter().map(|(w, c)| (Word::new(w.to_vec()), c64(*c, 0.0)))).unwrap()
    }

    #[test]
    fn superdiagonal_layout() {
        let mut rng = seeded_rng(1);
        let x = MatrixTuple::random(2, 2, &mut rng);
        let v = Word::new(vec![0, 1, 0]);
        let t = build_t_superdiagonal(&v, &x, 0.3).unwrap();
        let n = 2;
        // T_2: λI at block (2,3), X_2 at block (4,5), nothing else
        let mut expected = matkernel::zeros(10, 10);
        expected.view_mut((n, 2 * n), (n, n)).copy_from(&(identity(n) * c64(0.3, 0.0)));
        expected.view_mut((3 * n, 4 * n), (n, n)).copy_from(x.get(1));
        assert_eq!(t.get(1), &expected);
        // T_1 carries λI twice
        let count = (0..4).filter(|&b| t.get(0)[(b * n, (b + 1) * n)].norm() > 0.0).count();
        assert_eq!(count, 3);
    }

    #[test]
    fn superdiagonal_product_selects_the_word() {
        let lambda = 0.4;
        let x = MatrixTuple::scalars(&[c64(0.0, 0.0), c64(0.0, 0.0)]);
        for m in 2..=4 {
            for v in Word::all_of_length(2, m - 1) {
                let t = build_t_superdiagonal(&v, &x, lambda).unwrap();
                for u in Word::all_of_length(2, m - 1) {
                    let prod = crate::ncseries::eval_word(&u, &t).unwrap();
                    let corner = prod[(0, m - 1)];
                    let expected = if u == v { lambda.powi(m as i32 - 1) } else { 0.0 };
                    assert!((corner - c64(expected, 0.0)).norm() < 1e-15);
                    // rest of the top row vanishes
                    for c in 0..=m {
                        if c != m - 1 {
                            assert_eq!(prod[(0, c)], c64(0.0, 0.0));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn extract_single_words() {
        let f = BlackBoxMap::from_polynomial(scalar_poly(2, &[(&[0, 1], 1.0)])).unwrap();
        for lambda in [0.1, 0.25, 0.5] {
            let c = extract_coefficient(&f, &Word::new(vec![0, 1]), lambda, 1).unwrap();
            assert!((c[(0, 0)] - c64(1.0, 0.0)).norm() < 1e-10);
            let c = extract_coefficient(&f, &Word::new(vec![1, 0]), lambda, 1).unwrap();
            assert!(c[(0, 0)].norm() < 1e-10);
        }
        let mut rng = seeded_rng(2);
        let l = Pencil::random(3, 2, 3, &mut rng);
        let f = BlackBoxMap::from_pencil(&l).unwrap();
        for j in 0..3 {
            let c = extract_coefficient(&f, &Word::letter(j), 0.25, 1).unwrap();
            assert_eq!(&c, l.coeff(j));
        }
    }

    #[test]
    fn extraction_errors() {
        let f = BlackBoxMap::from_polynomial(scalar_poly(1, &[(&[], 0.5), (&[0], 1.0)])).unwrap();
        assert!(matches!(extract_coefficient(&f, &Word::letter(0), 0.25, 1), Err(Error::NonzeroConstantTerm { .. })));
        let f = BlackBoxMap::from_polynomial(scalar_poly(1, &[(&[0], 1.0)])).unwrap();
        let long = Word::new(vec![0; 8]);
        assert!(matches!(extract_coefficient(&f, &long, 1e-2, 1), Err(Error::NumericalUnderflow { .. })));
    }

    #[test]
    fn inconsistent_evaluator_rejected() {
        // scaling by the trace does not respect direct sums
        let r = BlackBoxMap::new(1, 1, 1, |x| Ok(x.get(0) * x.get(0).trace()));
        assert!(matches!(r, Err(Error::InconsistentEvaluator { .. })));
    }

    #[test]
    fn fock_creation_identities() {
        let app = FockApparatus::new(2, 3, 0.25).unwrap();
        let dim = app.dim();
        assert_eq!(dim, 2 + 4 + 8);
        for i in 0..2 {
            for j in 0..2 {
                let prod = app.creation(i).adjoint() * app.creation(j);
                if i == j {
                    let mut proj = matkernel::zeros(dim, dim);
                    for (k, u) in app.basis().iter().enumerate() {
                        if u.len() < 3 {
                            proj[(k, k)] = c64(1.0, 0.0);
                        }
                    }
                    assert_eq!(prod, proj);
                } else {
                    assert!(prod.iter().all(|z| z.norm() == 0.0));
                }
            }
        }
    }

    #[test]
    fn fock_word_action() {
        // u = x1x2x3 acting on (w⊗y1) ⊕ y2 ⊕ y3
        let app = FockApparatus::new(3, 4, 0.5).unwrap();
        let mut rng = seeded_rng(3);
        let x = MatrixTuple::random(3, 2, &mut rng);
        let t = build_fock_t(&app, &x).unwrap();
        let u = Word::new(vec![0, 1, 2]);
        let ut = crate::ncseries::eval_word(&u, &t).unwrap();
        let n = 2;
        let k = app.dim() * n;
        let y1 = ginibre(k, 1, &mut rng);
        let y2 = ginibre(n, 1, &mut rng);
        let y3 = ginibre(n, 1, &mut rng);
        let mut input = matkernel::zeros(k + 2 * n, 1);
        input.view_mut((0, 0), (k, 1)).copy_from(&y1);
        input.view_mut((k, 0), (n, 1)).copy_from(&y2);
        input.view_mut((k + n, 0), (n, 1)).copy_from(&y3);
        let out = ut * input;
        let lam = c64(0.5, 0.0);
        let id = identity(n);
        let s = |j: usize| matkernel::kron(app.creation(j), &id);
        let e = |j: usize| {
            let mut m = matkernel::zeros(k, n);
            m.view_mut((app.index_of(&Word::letter(j)).unwrap() * n, 0), (n, n)).copy_from(&id);
            m
        };
        let expected_top = s(0) * s(1) * s(2) * &y1 * lam * lam * lam
            + s(0) * s(1) * e(2) * &y2 * lam * lam * lam
            + s(0) * e(1) * x.get(2) * &y3 * lam * lam;
        assert!(opnorm(&(out.view((0, 0), (k, 1)).into_owned() - expected_top)) < 1e-12);
        assert!(opnorm(&out.view((k, 0), (2 * n, 1)).into_owned()) < 1e-12);
    }

    #[test]
    fn long_words_leave_no_fock_component() {
        let app = FockApparatus::new(2, 2, 0.3).unwrap();
        let x = MatrixTuple::scalars(&[c64(0.7, 0.0), c64(-0.2, 0.1)]);
        let t = build_fock_t(&app, &x).unwrap();
        let k = app.dim();
        for w in Word::all_of_length(2, 4) {
            let wt = crate::ncseries::eval_word(&w, &t).unwrap();
            assert!(opnorm(&wt.view((0, 0), (k, k + 2)).into_owned()) < 1e-15);
        }
    }

    #[test]
    fn fock_degree_sweep() {
        let f = BlackBoxMap::from_polynomial(scalar_poly(2, &[(&[0, 1], 1.0), (&[1, 1], 2.0)])).unwrap();
        let got = extract_all_coefficients_at_degree(&f, 2, 0.25, 1).unwrap();
        assert_eq!(got.len(), 2);
        assert!((got[&Word::new(vec![0, 1])][(0, 0)] - c64(1.0, 0.0)).norm() < 1e-12);
        assert!((got[&Word::new(vec![1, 1])][(0, 0)] - c64(2.0, 0.0)).norm() < 1e-12);

        let mut rng = seeded_rng(4);
        let l = Pencil::random(2, 2, 2, &mut rng);
        let f = BlackBoxMap::from_pencil(&l).unwrap();
        assert!(extract_all_coefficients_at_degree(&f, 2, 0.25, 1).unwrap().is_empty());
    }

    #[test]
    fn strategies_agree_on_random_polynomial() {
        let mut rng = seeded_rng(5);
        let terms: Vec<(Word, CMatrix)> = Word::all_between(3, 1, 3).into_iter().map(|w| (w, ginibre(2, 2, &mut rng))).collect();
        let p = NCPolynomial::new(3, 2, 2, terms).unwrap();
        let f = BlackBoxMap::from_polynomial(p.clone()).unwrap();
        let opts = ExtractOptions::default();
        let a = extractor("superdiagonal").unwrap().extract_up_to(&f, 3, &opts).unwrap();
        let b = extractor("fock").unwrap().extract_up_to(&f, 3, &opts).unwrap();
        assert!(a.max_coefficient_error(&p) < 1e-8);
        assert!(a.max_coefficient_error(&b) < 1e-9);
        assert!(extractor("nope").is_none());
        assert_eq!(extractor_names(), vec!["superdiagonal", "fock"]);
    }

    #[test]
    fn probe_size_two() {
        let mut rng = seeded_rng(6);
        let p = NCPolynomial::new(2, 1, 2, vec![(Word::new(vec![1, 0]), ginibre(1, 2, &mut rng))]).unwrap();
        let f = BlackBoxMap::from_polynomial(p.clone()).unwrap();
        let c = extract_coefficient(&f, &Word::new(vec![1, 0]), 0.25, 2).unwrap();
        assert!(opnorm(&(c - p.coefficient_or_zero(&Word::new(vec![1, 0])))) < 1e-12);
        let all = extract_all_coefficients_at_degree(&f, 2, 0.25, 2).unwrap();
        assert_eq!(all.len(), 1);
    }
}
