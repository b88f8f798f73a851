//! Sampled verification of the block structure of pencil ball maps.
//!
//! A map `f` of the ball of `L` into the unit ball is expected to take the
//! form `U (L̃(x) ⊕ f̃(x)) V*` after normalizing `f(0) = 0`. The first-order
//! part is checked by a complete isometry certificate and an explicit
//! recovery of `U` and `V`; higher degrees are checked by measuring the
//! three blocks that must vanish; boundary behavior is sampled on a grid.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fockextract::{BlackBoxMap, CoefficientExtractor, ExtractOptions, Fock, CONSTANT_TOL};
use crate::matkernel::{self, c64, kron, opnorm, seeded_rng, CMatrix};
use crate::mobius::{normalize_ballmap, MobiusParams};
use crate::ncseries::Word;
use crate::opspace::{certify_completely_isometric, CertOptions, CertResult, MatrixMap, Verdict};
use crate::pencil::{MatrixTuple, Pencil};
use crate::reduction::{intertwiners, minimize, PencilDecomposition, ReduceOptions};

/// Null-space threshold used when recovering the unitaries.
const INTERTWINE_TOL: f64 = 1e-7;
/// Largest acceptable recovery residual.
pub const RECOVERY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReportVerdict {
    ConsistentWithTheorem,
    Violation,
    Inconclusive,
}

/// The three blocks of `U* f_w V` that must vanish in degrees ≥ 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ForbiddenBlock {
    #[serde(rename = "(1,1)")]
    TopLeft,
    #[serde(rename = "(1,2)")]
    TopRight,
    #[serde(rename = "(2,1)")]
    BottomLeft,
}

impl ForbiddenBlock {
    pub const ALL: [ForbiddenBlock; 3] = [Self::TopLeft, Self::TopRight, Self::BottomLeft];

    pub fn label(self) -> &'static str {
        match self {
            Self::TopLeft => "(1,1)",
            Self::TopRight => "(1,2)",
            Self::BottomLeft => "(2,1)",
        }
    }
}

impl fmt::Display for ForbiddenBlock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Outcome of the degree-one check.
#[derive(Debug, Clone)]
pub struct FirstOrder {
    pub cert: CertResult,
    pub decomposition: PencilDecomposition,
    /// Degree-one coefficients of `f`.
    pub coefficients: Vec<CMatrix>,
    pub recovered: Option<Recovered>,
}

/// `f^{(1)}_j = U (L̃_j ⊕ T_j) V*`.
#[derive(Debug, Clone)]
pub struct Recovered {
    pub u: CMatrix,
    pub v: CMatrix,
    /// Block shapes `(d_j, d_j′)` of `L̃`.
    pub block_sizes: Vec<(usize, usize)>,
    /// Size `(m′, m)` of `L̃`.
    pub leading: (usize, usize),
    pub tail: Vec<CMatrix>,
    pub residual: f64,
}

/// Forbidden-block norms of one degree.
#[derive(Debug, Clone)]
pub struct DegreeReport {
    pub degree: usize,
    /// Max over words, indexed like `ForbiddenBlock::ALL`.
    pub block_norms: [f64; 3],
    /// Word attaining the largest forbidden norm.
    pub worst_word: Option<Word>,
}

impl DegreeReport {
    pub fn max_norm(&self) -> f64 {
        self.block_norms.iter().copied().fold(0.0, f64::max)
    }

    pub fn worst_block(&self) -> ForbiddenBlock {
        let mut best = 0;
        for k in 1..3 {
            if self.block_norms[k] > self.block_norms[best] {
                best = k;
            }
        }
        ForbiddenBlock::ALL[best]
    }
}

#[derive(Debug, Clone)]
pub struct BoundarySample {
    pub x: MatrixTuple,
    pub t_grid: usize,
    /// `max_t |‖f(e^{it}X)‖ − 1|` over the grid.
    pub max_deviation: f64,
}

#[derive(Debug, Clone)]
pub enum Violation {
    FirstOrder(CertResult),
    Block { degree: usize, block: ForbiddenBlock, word: Option<Word>, norm: f64 },
    Boundary { sample: usize, deviation: f64 },
    Linearity { deviation: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::FirstOrder(c) => write!(f, "linear part is not completely isometric (residual {:.3e})", c.residual),
            Violation::Block { degree, block, norm, .. } => {
                write!(f, "degree {degree} block {block} has norm {norm:.3e}")
            }
            Violation::Boundary { sample, deviation } => {
                write!(f, "boundary sample {sample} leaves the unit sphere by {deviation:.3e}")
            }
            Violation::Linearity { deviation } => write!(f, "map differs from U L̃ V* by {deviation:.3e}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub tol: f64,
    pub max_degree: usize,
    pub boundary_samples: usize,
    pub t_grid: usize,
    /// Size of the boundary and linearity sample tuples.
    pub sample_size: usize,
    pub boundary_tol: f64,
    pub seed: u64,
    pub extract: ExtractOptions,
    pub cert: CertOptions,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            tol: 1e-7,
            max_degree: 4,
            boundary_samples: 8,
            t_grid: 32,
            sample_size: 2,
            boundary_tol: 1e-7,
            seed: 42,
            extract: ExtractOptions::default(),
            cert: CertOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BallMapReport {
    /// Constant term removed by a Möbius normalization, if any.
    pub normalized_from: Option<CMatrix>,
    pub first_order: FirstOrder,
    pub higher_order: Vec<DegreeReport>,
    /// Finite-grid surrogate for the almost-everywhere boundary condition.
    pub boundary_samples: Vec<BoundarySample>,
    /// Sampled distance from `U L̃ V*` when `L̃` fills the whole output.
    pub linearity_deviation: Option<f64>,
    pub violations: Vec<Violation>,
    pub verdict: ReportVerdict,
}

impl BallMapReport {
    /// The first violation found, in check order.
    pub fn witness(&self) -> Option<&Violation> {
        self.violations.first()
    }
}

fn degree_one(f: &BlackBoxMap, opts: &ExtractOptions) -> Result<Vec<CMatrix>> {
    let found = Fock.extract_degree(f, 1, opts)?;
    Ok((0..f.g())
        .map(|j| found.get(&Word::letter(j)).cloned().unwrap_or_else(|| matkernel::zeros(f.l_prime(), f.l())))
        .collect())
}

/// Certifies that `L̃(x) ↦ f^{(1)}(x)` is completely isometric and recovers
/// `U, V` with `f^{(1)} = U (L̃ ⊕ T) V*`.
pub fn check_first_order(f: &BlackBoxMap, l: &Pencil, opts: &VerifyOptions) -> Result<FirstOrder> {
    if f.g() != l.g() {
        return Err(Error::ArityMismatch { expected: l.g(), got: f.g() });
    }
    f.ensure_vanishes_at_zero()?;
    let decomposition = minimize(l, &ReduceOptions { seed: opts.seed, cert: opts.cert.clone(), ..Default::default() })?;
    let coefficients = degree_one(f, &opts.extract)?;
    let cert = match MatrixMap::from_pairs(decomposition.ltilde.coeffs(), &coefficients, matkernel::RANK_TOL) {
        Ok(map) => certify_completely_isometric(&map, &opts.cert),
        Err(_) => CertResult { verdict: Verdict::Refuted, residual: f64::INFINITY, iterations: 0, witness: None },
    };
    let recovered = if cert.is_certified() {
        Some(recover_unitaries(&decomposition, &coefficients)?)
    } else {
        None
    };
    Ok(FirstOrder { cert, decomposition, coefficients, recovered })
}

/// Each irreducible block of `L̃` sits inside `f^{(1)}` through a scaled
/// isometric intertwiner; distinct blocks land in orthogonal pieces.
fn recover_unitaries(dec: &PencilDecomposition, c: &[CMatrix]) -> Result<Recovered> {
    let lt = &dec.ltilde;
    let (lp, l) = c[0].shape();
    let mut left = Vec::new();
    let mut right = Vec::new();
    let (mut r0, mut c0) = (0, 0);
    for &(b, bp) in &dec.block_sizes {
        let block: Vec<CMatrix> = lt.coeffs().iter().map(|a| a.view((r0, c0), (bp, b)).into_owned()).collect();
        let found = intertwiners(&block, c, INTERTWINE_TOL);
        let (x1, x2) = found.into_iter().next().ok_or(Error::RecoveryFailed { residual: f64::INFINITY })?;
        left.extend(matkernel::polar_isometry(&x1).column_iter().map(|v| v.into_owned()));
        right.extend(matkernel::polar_isometry(&x2).column_iter().map(|v| v.into_owned()));
        r0 += bp;
        c0 += b;
    }
    let (mp, m) = (lt.d_prime(), lt.d());
    let u = matkernel::complete_to_unitary(&matkernel::polar_isometry(&CMatrix::from_columns(&left)));
    let v = matkernel::complete_to_unitary(&matkernel::polar_isometry(&CMatrix::from_columns(&right)));
    let mut residual: f64 = 0.0;
    let mut tail = Vec::new();
    for (a, cj) in lt.coeffs().iter().zip(c) {
        let r = u.adjoint() * cj * &v;
        residual = residual.max(opnorm(&(r.view((0, 0), (mp, m)) - a)));
        residual = residual.max(opnorm(&r.view((0, m), (mp, l - m)).into_owned()));
        residual = residual.max(opnorm(&r.view((mp, 0), (lp - mp, m)).into_owned()));
        tail.push(r.view((mp, m), (lp - mp, l - m)).into_owned());
    }
    if residual >= RECOVERY_TOL {
        return Err(Error::RecoveryFailed { residual });
    }
    Ok(Recovered { u, v, block_sizes: dec.block_sizes.clone(), leading: (mp, m), tail, residual })
}

/// Largest forbidden-block norm of `U* f_w V` per degree `2..=max_degree`.
pub fn check_higher_order(f: &BlackBoxMap, rec: &Recovered, max_degree: usize, opts: &ExtractOptions) -> Result<Vec<DegreeReport>> {
    let (mp, m) = rec.leading;
    let (lp, l) = (f.l_prime(), f.l());
    let mut out = Vec::new();
    for degree in 2..=max_degree {
        let coeffs = Fock.extract_degree(f, degree, opts)?;
        let mut block_norms = [0.0; 3];
        let mut worst = (0.0, None);
        for (w, c) in coeffs {
            let r = rec.u.adjoint() * c * &rec.v;
            let norms = [
                opnorm(&r.view((0, 0), (mp, m)).into_owned()),
                opnorm(&r.view((0, m), (mp, l - m)).into_owned()),
                opnorm(&r.view((mp, 0), (lp - mp, m)).into_owned()),
            ];
            for k in 0..3 {
                block_norms[k] = f64::max(block_norms[k], norms[k]);
                if norms[k] > worst.0 {
                    worst = (norms[k], Some(w.clone()));
                }
            }
        }
        out.push(DegreeReport { degree, block_norms, worst_word: worst.1 });
    }
    Ok(out)
}

fn scaled_sample(l: &Pencil, n: usize, radius: f64, rng: &mut matkernel::Rng) -> Result<MatrixTuple> {
    loop {
        let x = MatrixTuple::random(l.g(), n, rng);
        let norm = opnorm(&l.eval(&x)?);
        if norm > 1e-8 {
            return Ok(x.scale_real(radius / norm));
        }
    }
}

/// Draws tuples with `‖L(X)‖ = 1` and measures `‖f(e^{it}X)‖` on a uniform
/// grid of `t_grid` points.
pub fn sample_boundary_preservation(
    f: &BlackBoxMap,
    l: &Pencil,
    samples: usize,
    t_grid: usize,
    n: usize,
    seed: u64,
) -> Result<Vec<BoundarySample>> {
    let mut rng = seeded_rng(seed);
    let mut rows = Vec::with_capacity(samples);
    for _ in 0..samples {
        let x = scaled_sample(l, n, 1.0, &mut rng)?;
        let mut max_deviation: f64 = 0.0;
        for k in 0..t_grid {
            let t = 2.0 * PI * k as f64 / t_grid as f64;
            let y = f.eval(&x.scale(c64(t.cos(), t.sin())))?;
            max_deviation = max_deviation.max((opnorm(&y) - 1.0).abs());
        }
        rows.push(BoundarySample { x, t_grid, max_deviation });
    }
    Ok(rows)
}

fn linearity_deviation(f: &BlackBoxMap, l: &Pencil, rec: &Recovered, lt: &Pencil, opts: &VerifyOptions) -> Result<f64> {
    let mut rng = seeded_rng(opts.seed ^ 0x5eed);
    let n = opts.sample_size;
    let id = matkernel::identity(n);
    let (u, v) = (kron(&rec.u, &id), kron(&rec.v, &id));
    let mut worst: f64 = 0.0;
    for _ in 0..opts.boundary_samples.max(1) {
        let x = scaled_sample(l, n, 0.5, &mut rng)?;
        let expected = &u * lt.eval(&x)? * v.adjoint();
        worst = worst.max(opnorm(&(f.eval(&x)? - expected)));
    }
    Ok(worst)
}

/// Normalizes, then runs the first-order, higher-order, boundary and (for
/// full-size `L̃`) linearity checks.
pub fn verify_ballmap(f: &BlackBoxMap, l: &Pencil, opts: &VerifyOptions) -> Result<BallMapReport> {
    let constant = f.constant_term()?;
    let (phi, normalized_from) = if opnorm(&constant) > CONSTANT_TOL {
        (normalize_ballmap(f)?, Some(constant))
    } else {
        (f.clone(), None)
    };
    let first_order = check_first_order(&phi, l, opts)?;
    let mut violations = Vec::new();
    let mut inconclusive = false;
    let mut higher_order = Vec::new();
    let mut linearity = None;
    match first_order.cert.verdict {
        Verdict::Refuted => violations.push(Violation::FirstOrder(first_order.cert.clone())),
        Verdict::Inconclusive => inconclusive = true,
        Verdict::Certified => {}
    }
    if let Some(rec) = &first_order.recovered {
        higher_order = check_higher_order(&phi, rec, opts.max_degree, &opts.extract)?;
        if let Some(bad) = higher_order.iter().find(|d| d.max_norm() >= opts.tol) {
            let block = bad.worst_block();
            violations.push(Violation::Block {
                degree: bad.degree,
                block,
                word: bad.worst_word.clone(),
                norm: bad.block_norms[block as usize],
            });
        }
        let lt = &first_order.decomposition.ltilde;
        if (lt.d_prime(), lt.d()) == (phi.l_prime(), phi.l()) {
            let dev = linearity_deviation(&phi, l, rec, lt, opts)?;
            linearity = Some(dev);
            if dev >= opts.tol {
                violations.push(Violation::Linearity { deviation: dev });
            }
        }
    }
    let boundary_samples =
        sample_boundary_preservation(f, l, opts.boundary_samples, opts.t_grid, opts.sample_size, opts.seed)?;
    if let Some((i, s)) = boundary_samples
        .iter()
        .enumerate()
        .filter(|(_, s)| s.max_deviation >= opts.boundary_tol)
        .max_by(|a, b| a.1.max_deviation.total_cmp(&b.1.max_deviation))
    {
        violations.push(Violation::Boundary { sample: i, deviation: s.max_deviation });
    }
    let verdict = if !violations.is_empty() {
        ReportVerdict::Violation
    } else if inconclusive {
        ReportVerdict::Inconclusive
    } else {
        ReportVerdict::ConsistentWithTheorem
    };
    Ok(BallMapReport {
        normalized_from,
        first_order,
        higher_order,
        boundary_samples,
        linearity_deviation: linearity,
        violations,
        verdict,
    })
}

/// `x ↦ F_v(U (L(x) ⊕ T(x)) V*)` where `T` is any black box of the
/// complementary size. Used to build fixtures of the expected form.
pub fn assemble_ballmap(
    l: &Pencil,
    tail: Option<&BlackBoxMap>,
    u: &CMatrix,
    v: &CMatrix,
    mobius: Option<&MobiusParams>,
) -> Result<BlackBoxMap> {
    let (lp, ll) = (u.nrows(), v.nrows());
    let tail_shape = (lp - l.d_prime(), ll - l.d());
    if let Some(t) = tail {
        if (t.l_prime(), t.l()) != tail_shape || t.g() != l.g() {
            return Err(Error::ShapeMismatch("tail does not fill the complement".into()));
        }
    }
    let (l, tail, u, v, p) = (l.clone(), tail.cloned(), u.clone(), v.clone(), mobius.cloned());
    BlackBoxMap::new(l.g(), lp, ll, move |x| {
        let n = x.n();
        let lead = l.eval(x)?;
        let rest = match &tail {
            Some(t) => t.eval(x)?,
            None => matkernel::zeros(tail_shape.0 * n, tail_shape.1 * n),
        };
        let id = matkernel::identity(n);
        let inner = kron(&u, &id) * matkernel::direct_sum(&lead, &rest) * kron(&v, &id).adjoint();
        match &p {
            Some(p) => p.apply(&inner),
            None => Ok(inner),
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matkernel::random_unitary;
    use crate::ncseries::NCPolynomial;

    fn opts() -> VerifyOptions {
        VerifyOptions::default()
    }

    #[test]
    fn pencil_itself_is_consistent() {
        let l = Pencil::from_real(1, 2, &[&[1.0, 0.0], &[0.0, 1.0]]).unwrap();
        let f = BlackBoxMap::from_pencil(&l).unwrap();
        let r = verify_ballmap(&f, &l, &opts()).unwrap();
        assert_eq!(r.verdict, ReportVerdict::ConsistentWithTheorem, "{:?}", r.violations);
        assert!(r.linearity_deviation.unwrap() < 1e-10);
        assert!(r.boundary_samples.iter().all(|s| s.max_deviation < 1e-10));
    }

    #[test]
    fn half_copy_recovers_unitaries() {
        let mut rng = seeded_rng(3);
        let lt = Pencil::random(2, 2, 2, &mut rng);
        let half = Pencil::new(lt.coeffs().iter().map(|a| a * c64(0.5, 0.0)).collect()).unwrap();
        let (u0, v0) = (random_unitary(4, 1), random_unitary(4, 2));
        let f = assemble_ballmap(&lt, Some(&BlackBoxMap::from_pencil(&half).unwrap()), &u0, &v0, None).unwrap();
        let fo = check_first_order(&f, &lt, &opts()).unwrap();
        assert!(fo.cert.is_certified());
        let rec = fo.recovered.unwrap();
        assert!(rec.residual < 1e-8);
        for (a, t) in half.coeffs().iter().zip(&rec.tail) {
            assert!((opnorm(t) - opnorm(a)).abs() < 1e-8);
        }
    }

    #[test]
    fn quadratic_only_is_refuted() {
        let l = Pencil::from_real(1, 1, &[&[1.0]]).unwrap();
        let p = NCPolynomial::scalar(1, [(Word::new(vec![0, 0]), c64(0.5, 0.0))]).unwrap();
        let f = BlackBoxMap::from_polynomial(p).unwrap();
        let fo = check_first_order(&f, &l, &opts()).unwrap();
        assert_eq!(fo.cert.verdict, Verdict::Refuted);
        let r = verify_ballmap(&f, &l, &opts()).unwrap();
        assert_eq!(r.verdict, ReportVerdict::Violation);
        assert!(matches!(r.witness(), Some(Violation::FirstOrder(_))));
    }

    #[test]
    fn nonzero_constant_rejected_by_first_order() {
        let l = Pencil::from_real(1, 1, &[&[1.0]]).unwrap();
        let f = BlackBoxMap::new(1, 1, 1, |x| {
            let n = x.n();
            Ok(x.get(0) + matkernel::identity(n) * c64(0.3, 0.0))
        })
        .unwrap();
        assert!(matches!(check_first_order(&f, &l, &opts()), Err(Error::NonzeroConstantTerm { .. })));
    }

    #[test]
    fn half_pencil_leaves_sphere() {
        let l = Pencil::from_real(1, 2, &[&[1.0, 0.0], &[0.0, 1.0]]).unwrap();
        let half = Pencil::new(l.coeffs().iter().map(|a| a * c64(0.5, 0.0)).collect()).unwrap();
        let rows = sample_boundary_preservation(&BlackBoxMap::from_pencil(&half).unwrap(), &l, 4, 32, 2, 1).unwrap();
        assert!(rows.iter().all(|s| (s.max_deviation - 0.5).abs() < 1e-10));
    }

    #[test]
    fn mobius_of_pencil_preserves_boundary() {
        let l = Pencil::from_real(1, 2, &[&[1.0, 0.0], &[0.0, 1.0]]).unwrap();
        let w = MobiusParams::new(CMatrix::from_row_slice(1, 2, &[c64(0.3, 0.1), c64(-0.2, 0.0)])).unwrap();
        let f = assemble_ballmap(&l, None, &matkernel::identity(1), &matkernel::identity(2), Some(&w)).unwrap();
        let rows = sample_boundary_preservation(&f, &l, 6, 32, 2, 4).unwrap();
        assert!(rows.iter().all(|s| s.max_deviation < 1e-8));
        let r = verify_ballmap(&f, &l, &opts()).unwrap();
        assert!(r.normalized_from.is_some());
        assert_eq!(r.verdict, ReportVerdict::ConsistentWithTheorem, "{:?}", r.violations);
    }

    #[test]
    fn tail_with_quadratic_is_consistent() {
        // L̃ = x on one variable, tail ½x² in the lower block
        let l = Pencil::from_real(1, 1, &[&[1.0]]).unwrap();
        let tail = NCPolynomial::scalar(1, [(Word::new(vec![0, 0]), c64(0.5, 0.0))]).unwrap();
        let tail = BlackBoxMap::from_polynomial(tail).unwrap();
        let (u0, v0) = (random_unitary(2, 5), random_unitary(2, 6));
        let f = assemble_ballmap(&l, Some(&tail), &u0, &v0, None).unwrap();
        let r = verify_ballmap(&f, &l, &opts()).unwrap();
        assert_eq!(r.verdict, ReportVerdict::ConsistentWithTheorem, "{:?}", r.violations);
        assert!(r.higher_order.iter().all(|d| d.max_norm() < 1e-8));
    }

    #[test]
    fn forbidden_mass_is_located() {
        let l = Pencil::from_real(1, 1, &[&[1.0]]).unwrap();
        let lin = BlackBoxMap::from_pencil(&Pencil::from_real(2, 2, &[&[1.0, 0.0, 0.0, 0.0]]).unwrap()).unwrap();
        let bump = NCPolynomial::new(1, 2, 2, vec![(Word::new(vec![0, 0]), {
            let mut m = matkernel::zeros(2, 2);
            m[(0, 0)] = c64(0.1, 0.0);
            m
        })])
        .unwrap();
        let bump = BlackBoxMap::from_polynomial(bump).unwrap();
        let f = BlackBoxMap::new(1, 2, 2, move |x| Ok(lin.eval(x)? + bump.eval(x)?)).unwrap();
        let r = verify_ballmap(&f, &l, &opts()).unwrap();
        assert_eq!(r.verdict, ReportVerdict::Violation);
        match r.witness() {
            Some(Violation::Block { degree, block, norm, .. }) => {
                assert_eq!((*degree, *block), (2, ForbiddenBlock::TopLeft));
                assert!((norm - 0.1).abs() < 1e-8);
            }
            other => panic!("unexpected witness {other:?}"),
        }
    }
}
