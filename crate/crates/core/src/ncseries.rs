//! Words in noncommuting letters and polynomials with matrix coefficients,
//! evaluated on matrix tuples as `f(X) = Σ_w f_w ⊗ w(X)`.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::matkernel::{self, identity, kron, CMatrix};
use crate::pencil::{MatrixTuple, Pencil};

/// A word `x_{j_1} ⋯ x_{j_m}`; letters are zero-based variable indices.
/// The empty word is the unit `1`.
///
/// Words order by length first, then lexicographically.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Word(Vec<usize>);

impl Word {
    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn new(letters: Vec<usize>) -> Self {
        Word(letters)
    }

    pub fn letter(j: usize) -> Self {
        Word(vec![j])
    }

    pub fn letters(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `self · x_j`.
    pub fn append(&self, j: usize) -> Word {
        let mut v = self.0.clone();
        v.push(j);
        Word(v)
    }

    /// `x_j · self`.
    pub fn prepend(&self, j: usize) -> Word {
        let mut v = Vec::with_capacity(self.0.len() + 1);
        v.push(j);
        v.extend_from_slice(&self.0);
        Word(v)
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Word(v)
    }

    /// Splits off the last letter: `w = v · x_k`.
    pub fn split_last(&self) -> Option<(Word, usize)> {
        let (&k, rest) = self.0.split_last()?;
        Some((Word(rest.to_vec()), k))
    }

    pub fn max_letter(&self) -> Option<usize> {
        self.0.iter().copied().max()
    }

    /// All words of length exactly `m` over `g` letters, in order.
    pub fn all_of_length(g: usize, m: usize) -> Vec<Word> {
        let mut words = vec![Word::empty()];
        for _ in 0..m {
            words = words.iter().flat_map(|w| (0..g).map(move |j| w.append(j))).collect();
        }
        words
    }

    /// All words with `lo <= |w| <= hi`, in order.
    pub fn all_between(g: usize, lo: usize, hi: usize) -> Vec<Word> {
        (lo..=hi).flat_map(|m| Word::all_of_length(g, m)).collect()
    }
}

impl Ord for Word {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.len().cmp(&other.0.len()).then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Word {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "1");
        }
        for j in &self.0 {
            write!(f, "x{}", j + 1)?;
        }
        Ok(())
    }
}

/// `w(X) = X_{j_1} ⋯ X_{j_m}`; the empty word evaluates to `I_n`.
pub fn eval_word(w: &Word, x: &MatrixTuple) -> Result<CMatrix> {
    if let Some(j) = w.max_letter() {
        if j >= x.g() {
            return Err(Error::ArityMismatch { expected: j + 1, got: x.g() });
        }
    }
    Ok(w.letters().iter().fold(identity(x.n()), |acc, &j| acc * x.get(j)))
}

/// A noncommutative polynomial with `ℓ′×ℓ` matrix coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct NCPolynomial {
    g: usize,
    l_prime: usize,
    l: usize,
    terms: BTreeMap<Word, CMatrix>,
}

impl NCPolynomial {
    pub fn zero(g: usize, l_prime: usize, l: usize) -> Self {
        Self { g, l_prime, l, terms: BTreeMap::new() }
    }

    /// Builds a polynomial; exact-zero coefficients are dropped and repeated
    /// words are summed.
    pub fn new(g: usize, l_prime: usize, l: usize, terms: impl IntoIterator<Item = (Word, CMatrix)>) -> Result<Self> {
        if g == 0 {
            return Err(Error::InvalidArgument("polynomial needs at least one variable".into()));
        }
        let mut p = Self::zero(g, l_prime, l);
        for (w, c) in terms {
            p.add_term(w, c)?;
        }
        Ok(p)
    }

    /// Scalar-coefficient (1×1) polynomial.
    pub fn scalar(g: usize, terms: impl IntoIterator<Item = (Word, Complex64)>) -> Result<Self> {
        Self::new(g, 1, 1, terms.into_iter().map(|(w, z)| (w, CMatrix::from_element(1, 1, z))))
    }

    pub fn add_term(&mut self, w: Word, c: CMatrix) -> Result<()> {
        if c.shape() != (self.l_prime, self.l) {
            return Err(Error::ShapeMismatch(format!(
                "coefficient of {w} has shape {:?}, expected ({}, {})",
                c.shape(),
                self.l_prime,
                self.l
            )));
        }
        if let Some(j) = w.max_letter() {
            if j >= self.g {
                return Err(Error::ArityMismatch { expected: self.g, got: j + 1 });
            }
        }
        if !matkernel::all_finite(&c) {
            return Err(Error::InvalidArgument(format!("coefficient of {w} is not finite")));
        }
        let sum = match self.terms.remove(&w) {
            Some(prev) => prev + c,
            None => c,
        };
        if sum.iter().any(|z| z.norm() != 0.0) {
            self.terms.insert(w, sum);
        }
        Ok(())
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

    pub fn terms(&self) -> &BTreeMap<Word, CMatrix> {
        &self.terms
    }

    pub fn coefficient(&self, w: &Word) -> Option<&CMatrix> {
        self.terms.get(w)
    }

    /// Coefficient of `w`, zero when absent.
    pub fn coefficient_or_zero(&self, w: &Word) -> CMatrix {
        self.terms.get(w).cloned().unwrap_or_else(|| matkernel::zeros(self.l_prime, self.l))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Largest word length carrying a nonzero coefficient (`None` for zero).
    pub fn degree(&self) -> Option<usize> {
        self.terms.keys().map(Word::len).max()
    }

    /// `f(X) = Σ f_w ⊗ w(X)`, shape `ℓ′n × ℓn`.
    pub fn eval(&self, x: &MatrixTuple) -> Result<CMatrix> {
        if x.g() != self.g {
            return Err(Error::ArityMismatch { expected: self.g, got: x.g() });
        }
        let n = x.n();
        let mut out = matkernel::zeros(self.l_prime * n, self.l * n);
        // Words arrive in length-lex order, so every proper prefix that is
        // itself a term was cached before its extensions.
        let mut cache: HashMap<Word, CMatrix> = HashMap::new();
        for (w, c) in &self.terms {
            let value = match w.split_last() {
                None => identity(n),
                Some((prefix, k)) => match cache.get(&prefix) {
                    Some(p) => p * x.get(k),
                    None => eval_word(w, x)?,
                },
            };
            out += kron(c, &value);
            cache.insert(w.clone(), value);
        }
        Ok(out)
    }

    /// Terms with `|w| = m`.
    pub fn homogeneous_part(&self, m: usize) -> NCPolynomial {
        NCPolynomial {
            g: self.g,
            l_prime: self.l_prime,
            l: self.l,
            terms: self.terms.iter().filter(|(w, _)| w.len() == m).map(|(w, c)| (w.clone(), c.clone())).collect(),
        }
    }

    fn check_compatible(&self, other: &NCPolynomial) -> Result<()> {
        if self.g != other.g {
            return Err(Error::ArityMismatch { expected: self.g, got: other.g });
        }
        Ok(())
    }

    pub fn add(&self, other: &NCPolynomial) -> Result<NCPolynomial> {
        self.check_compatible(other)?;
        let mut out = self.clone();
        for (w, c) in &other.terms {
            out.add_term(w.clone(), c.clone())?;
        }
        Ok(out)
    }

    pub fn scale(&self, z: Complex64) -> NCPolynomial {
        let mut out = NCPolynomial::zero(self.g, self.l_prime, self.l);
        for (w, c) in &self.terms {
            out.add_term(w.clone(), c * z).expect("shape preserved");
        }
        out
    }

    /// `a · f · b` coefficientwise.
    pub fn sandwich(&self, a: &CMatrix, b: &CMatrix) -> Result<NCPolynomial> {
        if a.ncols() != self.l_prime || b.nrows() != self.l {
            return Err(Error::ShapeMismatch("sandwich factors do not match coefficient shape".into()));
        }
        NCPolynomial::new(self.g, a.nrows(), b.ncols(), self.terms.iter().map(|(w, c)| (w.clone(), a * c * b)))
    }

    /// Noncommutative product `f · h`, with coefficient `f_u h_v` on `uv`.
    pub fn mul(&self, other: &NCPolynomial) -> Result<NCPolynomial> {
        self.check_compatible(other)?;
        if self.l != other.l_prime {
            return Err(Error::ShapeMismatch(format!(
                "cannot multiply {}x{} by {}x{} coefficients",
                self.l_prime, self.l, other.l_prime, other.l
            )));
        }
        let mut out = NCPolynomial::zero(self.g, self.l_prime, other.l);
        for (u, a) in &self.terms {
            for (v, b) in &other.terms {
                out.add_term(u.concat(v), a * b)?;
            }
        }
        Ok(out)
    }

    /// Coefficientwise block-diagonal sum `f_w ⊕ h_w`.
    pub fn direct_sum(&self, other: &NCPolynomial) -> Result<NCPolynomial> {
        self.check_compatible(other)?;
        let mut words: Vec<&Word> = self.terms.keys().chain(other.terms.keys()).collect();
        words.sort();
        words.dedup();
        NCPolynomial::new(
            self.g,
            self.l_prime + other.l_prime,
            self.l + other.l,
            words
                .into_iter()
                .map(|w| (w.clone(), matkernel::direct_sum(&self.coefficient_or_zero(w), &other.coefficient_or_zero(w)))),
        )
    }

    /// Largest entrywise deviation between coefficients over all words.
    pub fn max_coefficient_error(&self, other: &NCPolynomial) -> f64 {
        let mut words: Vec<&Word> = self.terms.keys().chain(other.terms.keys()).collect();
        words.sort();
        words.dedup();
        words
            .into_iter()
            .map(|w| {
                let diff = self.coefficient_or_zero(w) - other.coefficient_or_zero(w);
                diff.iter().map(|z| z.norm()).fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }
}

/// The degree-one series `Σ A_j x_j` of a pencil.
pub fn series_of_pencil(l: &Pencil) -> NCPolynomial {
    NCPolynomial::new(
        l.g(),
        l.d_prime(),
        l.d(),
        l.coeffs().iter().enumerate().map(|(j, a)| (Word::letter(j), a.clone())),
    )
    .expect("pencil coefficients share a shape")
}
