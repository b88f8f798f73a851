//! Versioned JSON documents. Complex numbers are `[re, im]` pairs and
//! matrices are arrays of rows.
//!
//! Parsing has two stages: structural decoding, whose failures carry a JSON
//! pointer, and validation, whose failures are collected into one itemized
//! list.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matkernel::{c64, CMatrix};
use crate::ncseries::{NCPolynomial, Word};
use crate::opspace::{CertResult, Verdict};
use crate::pencil::{MatrixTuple, Pencil};
use crate::reduction::PencilDecomposition;

pub const FORMAT_VERSION: u32 = 1;

pub type Entry = [f64; 2];
pub type MatrixRows = Vec<Vec<Entry>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PencilFile {
    pub version: u32,
    pub g: usize,
    pub d: usize,
    pub d_prime: usize,
    pub coeffs: Vec<MatrixRows>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesTerm {
    pub word: Vec<usize>,
    pub coeff: MatrixRows,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesFile {
    pub version: u32,
    pub g: usize,
    pub l: usize,
    pub l_prime: usize,
    pub terms: Vec<SeriesTerm>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixFile {
    pub version: u32,
    pub rows: usize,
    pub cols: usize,
    pub entries: MatrixRows,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TupleFile {
    pub version: u32,
    pub g: usize,
    pub n: usize,
    pub entries: Vec<MatrixRows>,
}

/// The linear map `L(x) ↦ M(x)` determined by two pencils of equal arity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapFile {
    pub version: u32,
    pub source: PencilFile,
    pub target: PencilFile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WitnessDoc {
    pub level: usize,
    pub gap: f64,
    pub input: MatrixRows,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateDoc {
    pub verdict: Verdict,
    /// Absent when the residual is not finite.
    pub residual: Option<f64>,
    pub iterations: usize,
    pub witness: Option<WitnessDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReductionCertificates {
    pub domination: Option<CertificateDoc>,
    pub merged_duplicates: usize,
    pub dropped_dominated: usize,
    pub inconclusive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecompositionFile {
    pub version: u32,
    #[serde(rename = "Q")]
    pub q: MatrixRows,
    #[serde(rename = "G")]
    pub g: MatrixRows,
    #[serde(rename = "Ltilde")]
    pub ltilde: PencilFile,
    #[serde(rename = "J")]
    pub j: Option<PencilFile>,
    pub block_sizes: Vec<(usize, usize)>,
    pub residual_dims: (usize, usize),
    pub certificates: ReductionCertificates,
}

/// Everything needed to re-run a command: verdict, seeds, tolerances and
/// command-specific details.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportFile {
    pub version: u32,
    pub command: String,
    pub verdict: String,
    pub seed: u64,
    pub tol: f64,
    pub details: serde_json::Value,
}

fn pointer_of(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        match seg {
            Segment::Seq { index } => out.push_str(&format!("/{index}")),
            Segment::Map { key } => out.push_str(&format!("/{}", key.replace('~', "~0").replace('/', "~1"))),
            Segment::Enum { variant } => out.push_str(&format!("/{variant}")),
            Segment::Unknown => out.push_str("/?"),
        }
    }
    out
}

/// Structural decoding with a JSON pointer on failure.
pub fn decode<T: DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de)
        .map_err(|e| Error::Parse { pointer: pointer_of(e.path()), message: e.inner().to_string() })
}

fn is_flat(v: &serde_json::Value) -> bool {
    match v {
        serde_json::Value::Array(items) => items.iter().all(|x| !x.is_array() && !x.is_object()),
        serde_json::Value::Object(_) => false,
        _ => true,
    }
}

fn inline(v: &serde_json::Value) -> String {
    match v {
        serde_json::Value::Array(items) => {
            format!("[{}]", items.iter().map(inline).collect::<Vec<_>>().join(", "))
        }
        _ => serde_json::to_string(v).expect("json"),
    }
}

/// Two-space indentation with matrix rows kept on one line.
fn write_value(v: &serde_json::Value, indent: usize, out: &mut String) {
    use serde_json::Value;
    let pad = |n: usize| "  ".repeat(n);
    match v {
        Value::Array(items) if items.iter().all(is_flat) => {
            out.push_str(&inline(v));
        }
        Value::Array(items) => {
            out.push_str("[\n");
            for (i, x) in items.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                write_value(x, indent + 1, out);
                out.push_str(if i + 1 < items.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(indent));
            out.push(']');
        }
        Value::Object(map) if map.is_empty() => out.push_str("{}"),
        Value::Object(map) => {
            out.push_str("{\n");
            for (i, (k, x)) in map.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                out.push_str(&serde_json::to_string(k).expect("json"));
                out.push_str(": ");
                write_value(x, indent + 1, out);
                out.push_str(if i + 1 < map.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(indent));
            out.push('}');
        }
        _ => out.push_str(&serde_json::to_string(v).expect("json")),
    }
}

fn encode<T: Serialize>(doc: &T) -> String {
    let value = serde_json::to_value(doc).expect("documents serialize");
    let mut s = String::new();
    write_value(&value, 0, &mut s);
    s.push('\n');
    s
}

struct Issues(Vec<String>);

impl Issues {
    fn new() -> Self {
        Issues(Vec::new())
    }

    fn push(&mut self, pointer: &str, message: impl AsRef<str>) {
        self.0.push(format!("{pointer}: {}", message.as_ref()));
    }

    fn check_version(&mut self, pointer: &str, version: u32) {
        if version != FORMAT_VERSION {
            self.push(&format!("{pointer}/version"), format!("unsupported version {version}"));
        }
    }

    fn finish<T>(self, value: impl FnOnce() -> Result<T>) -> Result<T> {
        if self.0.is_empty() {
            value()
        } else {
            Err(Error::Validation(self.0))
        }
    }
}

pub fn matrix_rows(m: &CMatrix) -> MatrixRows {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect()
}

fn check_matrix(rows: &MatrixRows, r: usize, c: usize, pointer: &str, issues: &mut Issues) -> bool {
    let before = issues.0.len();
    if rows.len() != r {
        issues.push(pointer, format!("expected {r} rows, found {}", rows.len()));
    }
    for (i, row) in rows.iter().enumerate() {
        if row.len() != c {
            issues.push(&format!("{pointer}/{i}"), format!("expected {c} columns, found {}", row.len()));
        }
        for (j, z) in row.iter().enumerate() {
            if !(z[0].is_finite() && z[1].is_finite()) {
                issues.push(&format!("{pointer}/{i}/{j}"), "entry is not finite");
            }
        }
    }
    issues.0.len() == before
}

fn to_matrix(rows: &MatrixRows, r: usize, c: usize) -> CMatrix {
    CMatrix::from_fn(r, c, |i, j| c64(rows[i][j][0], rows[i][j][1]))
}

impl PencilFile {
    pub fn from_pencil(l: &Pencil) -> Self {
        Self {
            version: FORMAT_VERSION,
            g: l.g(),
            d: l.d(),
            d_prime: l.d_prime(),
            coeffs: l.coeffs().iter().map(matrix_rows).collect(),
        }
    }

    fn check(&self, pointer: &str, issues: &mut Issues) -> bool {
        let before = issues.0.len();
        issues.check_version(pointer, self.version);
        if self.g == 0 {
            issues.push(&format!("{pointer}/g"), "pencil needs at least one variable");
        }
        if self.coeffs.len() != self.g {
            issues.push(&format!("{pointer}/coeffs"), format!("expected {} coefficients, found {}", self.g, self.coeffs.len()));
        }
        for (k, c) in self.coeffs.iter().enumerate() {
            check_matrix(c, self.d_prime, self.d, &format!("{pointer}/coeffs/{k}"), issues);
        }
        issues.0.len() == before
    }

    fn build(&self) -> Result<Pencil> {
        Pencil::new(self.coeffs.iter().map(|c| to_matrix(c, self.d_prime, self.d)).collect())
    }

    pub fn to_pencil(&self) -> Result<Pencil> {
        let mut issues = Issues::new();
        self.check("", &mut issues);
        issues.finish(|| self.build())
    }
}

pub fn parse_pencil(text: &str) -> Result<Pencil> {
    decode::<PencilFile>(text)?.to_pencil()
}

pub fn emit_pencil(l: &Pencil) -> String {
    encode(&PencilFile::from_pencil(l))
}

impl SeriesFile {
    pub fn from_polynomial(p: &NCPolynomial) -> Self {
        Self {
            version: FORMAT_VERSION,
            g: p.g(),
            l: p.l(),
            l_prime: p.l_prime(),
            terms: p
                .terms()
                .iter()
                .filter(|(_, c)| c.iter().any(|z| z.norm() > 0.0))
                .map(|(w, c)| SeriesTerm { word: w.letters().to_vec(), coeff: matrix_rows(c) })
                .collect(),
        }
    }

    pub fn to_polynomial(&self) -> Result<NCPolynomial> {
        let mut issues = Issues::new();
        issues.check_version("", self.version);
        if self.g == 0 || self.l == 0 || self.l_prime == 0 {
            issues.push("", "arity and coefficient shape must be positive");
        }
        let mut seen = std::collections::BTreeSet::new();
        for (k, t) in self.terms.iter().enumerate() {
            if let Some(&bad) = t.word.iter().find(|&&j| j >= self.g) {
                issues.push(&format!("/terms/{k}/word"), format!("letter {bad} out of range for {} variables", self.g));
            }
            if !seen.insert(t.word.clone()) {
                issues.push(&format!("/terms/{k}/word"), "duplicate word");
            }
            check_matrix(&t.coeff, self.l_prime, self.l, &format!("/terms/{k}/coeff"), &mut issues);
        }
        issues.finish(|| {
            NCPolynomial::new(
                self.g,
                self.l_prime,
                self.l,
                self.terms.iter().map(|t| (Word::new(t.word.clone()), to_matrix(&t.coeff, self.l_prime, self.l))),
            )
        })
    }
}

pub fn parse_series(text: &str) -> Result<NCPolynomial> {
    decode::<SeriesFile>(text)?.to_polynomial()
}

pub fn emit_series(p: &NCPolynomial) -> String {
    encode(&SeriesFile::from_polynomial(p))
}

pub fn parse_matrix(text: &str) -> Result<CMatrix> {
    let doc: MatrixFile = decode(text)?;
    let mut issues = Issues::new();
    issues.check_version("", doc.version);
    check_matrix(&doc.entries, doc.rows, doc.cols, "/entries", &mut issues);
    issues.finish(|| Ok(to_matrix(&doc.entries, doc.rows, doc.cols)))
}

pub fn emit_matrix(m: &CMatrix) -> String {
    encode(&MatrixFile { version: FORMAT_VERSION, rows: m.nrows(), cols: m.ncols(), entries: matrix_rows(m) })
}

pub fn parse_tuple(text: &str) -> Result<MatrixTuple> {
    let doc: TupleFile = decode(text)?;
    let mut issues = Issues::new();
    issues.check_version("", doc.version);
    if doc.g == 0 {
        issues.push("/g", "tuple needs at least one entry");
    }
    if doc.entries.len() != doc.g {
        issues.push("/entries", format!("expected {} matrices, found {}", doc.g, doc.entries.len()));
    }
    for (k, e) in doc.entries.iter().enumerate() {
        check_matrix(e, doc.n, doc.n, &format!("/entries/{k}"), &mut issues);
    }
    issues.finish(|| MatrixTuple::new(doc.entries.iter().map(|e| to_matrix(e, doc.n, doc.n)).collect()))
}

pub fn emit_tuple(x: &MatrixTuple) -> String {
    encode(&TupleFile {
        version: FORMAT_VERSION,
        g: x.g(),
        n: x.n(),
        entries: x.entries().iter().map(matrix_rows).collect(),
    })
}

/// Source and target pencils of a map file.
pub fn parse_map(text: &str) -> Result<(Pencil, Pencil)> {
    let doc: MapFile = decode(text)?;
    let mut issues = Issues::new();
    issues.check_version("", doc.version);
    let ok = doc.source.check("/source", &mut issues) & doc.target.check("/target", &mut issues);
    if ok && doc.source.g != doc.target.g {
        issues.push("/target/g", format!("arity {} differs from source arity {}", doc.target.g, doc.source.g));
    }
    issues.finish(|| Ok((doc.source.build()?, Pencil::with_zeros(doc.target.coeffs.iter().map(|c| to_matrix(c, doc.target.d_prime, doc.target.d)).collect())?)))
}

pub fn emit_map(source: &Pencil, target: &Pencil) -> String {
    encode(&MapFile {
        version: FORMAT_VERSION,
        source: PencilFile::from_pencil(source),
        target: PencilFile::from_pencil(target),
    })
}

impl CertificateDoc {
    pub fn from_result(c: &CertResult) -> Self {
        Self {
            verdict: c.verdict,
            residual: c.residual.is_finite().then_some(c.residual),
            iterations: c.iterations,
            witness: c.witness.as_ref().map(|w| WitnessDoc { level: w.level, gap: w.gap, input: matrix_rows(&w.input) }),
        }
    }
}

impl DecompositionFile {
    pub fn from_decomposition(dec: &PencilDecomposition) -> Self {
        Self {
            version: FORMAT_VERSION,
            q: matrix_rows(&dec.q),
            g: matrix_rows(&dec.g),
            ltilde: PencilFile::from_pencil(&dec.ltilde),
            j: dec.j.as_ref().map(PencilFile::from_pencil),
            block_sizes: dec.block_sizes.clone(),
            residual_dims: dec.residual_dims,
            certificates: ReductionCertificates {
                domination: dec.domination_cert.as_ref().map(CertificateDoc::from_result),
                merged_duplicates: dec.merged_duplicates,
                dropped_dominated: dec.dropped_dominated,
                inconclusive: dec.inconclusive,
            },
        }
    }

    /// Checks shapes and that `Q (L̃ ⊕ J) G*` is assemblable.
    pub fn validate(&self) -> Result<()> {
        let mut issues = Issues::new();
        issues.check_version("", self.version);
        let ok = self.ltilde.check("/Ltilde", &mut issues);
        let (s, sp) = self.residual_dims;
        if let Some(j) = &self.j {
            if j.check("/J", &mut issues) && (j.d, j.d_prime) != (s, sp) {
                issues.push("/J", format!("shape {}x{} differs from residual_dims", j.d_prime, j.d));
            }
        }
        if ok {
            let rows = self.ltilde.d_prime + sp;
            let cols = self.ltilde.d + s;
            check_matrix(&self.q, rows, rows, "/Q", &mut issues);
            check_matrix(&self.g, cols, cols, "/G", &mut issues);
        }
        issues.finish(|| Ok(()))
    }
}

pub fn emit_decomposition(dec: &PencilDecomposition) -> String {
    encode(&DecompositionFile::from_decomposition(dec))
}

pub fn parse_decomposition(text: &str) -> Result<DecompositionFile> {
    let doc: DecompositionFile = decode(text)?;
    doc.validate()?;
    Ok(doc)
}

pub fn emit_report(report: &ReportFile) -> String {
    encode(report)
}

pub fn parse_report(text: &str) -> Result<ReportFile> {
    let doc: ReportFile = decode(text)?;
    let mut issues = Issues::new();
    issues.check_version("", doc.version);
    issues.finish(|| Ok(doc))
}

/// Re-emits a document of any supported kind in canonical form.
pub fn canonicalize(text: &str) -> Result<String> {
    let value: serde_json::Value = decode(text)?;
    let has = |k: &str| value.get(k).is_some();
    if has("Ltilde") {
        Ok(encode(&parse_decomposition(text)?))
    } else if has("command") {
        Ok(emit_report(&parse_report(text)?))
    } else if has("source") {
        let (a, b) = parse_map(text)?;
        Ok(emit_map(&a, &b))
    } else if has("terms") {
        Ok(emit_series(&parse_series(text)?))
    } else if has("coeffs") {
        Ok(emit_pencil(&parse_pencil(text)?))
    } else if has("rows") {
        Ok(emit_matrix(&parse_matrix(text)?))
    } else if has("n") {
        Ok(emit_tuple(&parse_tuple(text)?))
    } else {
        Err(Error::Parse { pointer: String::new(), message: "unrecognized document kind".into() })
    }
}
