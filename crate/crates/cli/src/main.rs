use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use pencilball::fixtures;
use pencilball::fockextract::{extractor, extractor_names, BlackBoxMap, ExtractOptions, DEFAULT_LAMBDA};
use pencilball::format::{self, matrix_rows, CertificateDoc, ReportFile, FORMAT_VERSION};
use pencilball::matkernel::{opnorm, seeded_rng, CMatrix, RANK_TOL};
use pencilball::mobius::{normalize_ballmap, MobiusParams};
use pencilball::ncseries::NCPolynomial;
use pencilball::opspace::{
    certify_completely_contractive, certify_completely_isometric, is_completely_positive, CertOptions, CertResult,
    MatrixMap, Verdict,
};
use pencilball::pencil::{equivalent, EquivalenceOptions, EquivalenceVerdict, MatrixTuple, Pencil};
use pencilball::reduction::{minimize, ReduceOptions};
use pencilball::verify::{verify_ballmap, ReportVerdict, VerifyOptions};
use pencilball::Error;

const SCHEMAS: &str = "\
File formats (JSON, version 1, complex numbers as [re, im]):
  pencil  {\"version\":1,\"g\":G,\"d\":D,\"d_prime\":D',\"coeffs\":[G x D' x D x [re,im]]}
  series  {\"version\":1,\"g\":G,\"l\":L,\"l_prime\":L',\"terms\":[{\"word\":[indices],\"coeff\":L' x L x [re,im]}]}
  map     {\"version\":1,\"source\":pencil,\"target\":pencil}   (the map source(x) -> target(x))
  matrix  {\"version\":1,\"rows\":R,\"cols\":C,\"entries\":R x C x [re,im]}
  tuple   {\"version\":1,\"g\":G,\"n\":N,\"entries\":[G x N x N x [re,im]]}
Inputs may also name a built-in fixture as builtin:NAME.

Exit status: 0 success/certified/consistent, 2 refuted/violation, 3 inconclusive, 1 usage or I/O error.";

#[derive(Parser, Debug)]
#[command(name = "pencilball", version, about = "Linear pencils, their matrix balls and the maps between them", after_help = SCHEMAS)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Tolerance; each command has its own default.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Matrix levels sampled by equivalence checks.
    #[arg(long, global = true, value_delimiter = ',', default_value = "1,2,3,4")]
    levels: Vec<usize>,
    /// Random samples per level.
    #[arg(long, global = true)]
    samples: Option<usize>,
    /// Write the output document here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate a pencil or series at a tuple.
    Eval {
        input: String,
        /// Tuple document; a random tuple of size --n is used otherwise.
        #[arg(long)]
        point: Option<String>,
        #[arg(long, default_value_t = 2)]
        n: usize,
    },
    /// Nondegeneracy of a pencil, or membership of a tuple in its ball.
    Check {
        pencil: String,
        #[arg(long)]
        nondegenerate: bool,
        #[arg(long)]
        point: Option<String>,
    },
    /// Sampled equality of the two balls.
    Equiv { first: String, second: String },
    /// Minimal defining pencil.
    Reduce { pencil: String },
    /// Complete positivity of a map on a full matrix algebra.
    Cpcheck {
        #[arg(long)]
        map: String,
    },
    /// Complete contractivity of a map.
    Cccheck {
        #[arg(long)]
        map: String,
    },
    /// Complete isometry of a map.
    Cicheck {
        #[arg(long)]
        map: String,
    },
    /// Power-series coefficients of a series treated as a black box.
    Extract {
        input: String,
        #[arg(long, default_value = "fock")]
        method: String,
        #[arg(long, default_value_t = 4)]
        max_degree: usize,
        #[arg(long, default_value_t = DEFAULT_LAMBDA)]
        lambda: f64,
    },
    /// Matrix linear fractional transformations.
    Mobius {
        #[command(subcommand)]
        action: MobiusAction,
    },
    /// Block-structure verification of a map of a pencil ball.
    VerifyBallmap {
        /// Built-in ball map.
        #[arg(long, conflicts_with_all = ["pencil", "series"])]
        fixture: Option<String>,
        #[arg(long, requires = "series")]
        pencil: Option<String>,
        #[arg(long, requires = "pencil")]
        series: Option<String>,
        #[arg(long, default_value_t = 4)]
        max_degree: usize,
    },
}

#[derive(Subcommand, Debug)]
enum MobiusAction {
    /// F_v(u); u may be an amplified (kℓ′ × kℓ) matrix.
    Apply {
        #[arg(long)]
        v: String,
        #[arg(long)]
        u: String,
    },
    /// Coefficients of F_{f(0)} ∘ f for a series f.
    Normalize {
        input: String,
        #[arg(long, default_value_t = 4)]
        max_degree: usize,
    },
}

struct Output {
    text: String,
    code: u8,
}

fn read_input(arg: &str) -> Result<String, Error> {
    Ok(std::fs::read_to_string(arg)?)
}

fn builtin(arg: &str) -> Option<&str> {
    arg.strip_prefix("builtin:")
}

fn load_pencil(arg: &str) -> Result<Pencil, Error> {
    match builtin(arg) {
        Some(name) => fixtures::pencil(name),
        None => format::parse_pencil(&read_input(arg)?),
    }
}

fn load_map(arg: &str) -> Result<(Pencil, Pencil), Error> {
    match builtin(arg) {
        Some(name) => fixtures::map(name),
        None => format::parse_map(&read_input(arg)?),
    }
}

fn load_series(arg: &str) -> Result<NCPolynomial, Error> {
    match builtin(arg) {
        Some(name) => Ok(pencilball::ncseries::series_of_pencil(&fixtures::pencil(name)?)),
        None => format::parse_series(&read_input(arg)?),
    }
}

fn load_tuple(arg: &str) -> Result<MatrixTuple, Error> {
    format::parse_tuple(&read_input(arg)?)
}

fn load_matrix(arg: &str) -> Result<CMatrix, Error> {
    format::parse_matrix(&read_input(arg)?)
}

enum Evaluable {
    Pencil(Pencil),
    Series(NCPolynomial),
}

fn load_evaluable(arg: &str) -> Result<Evaluable, Error> {
    if let Some(name) = builtin(arg) {
        return fixtures::pencil(name).map(Evaluable::Pencil);
    }
    let text = read_input(arg)?;
    let value: Value = format::decode(&text)?;
    if value.get("terms").is_some() {
        format::parse_series(&text).map(Evaluable::Series)
    } else {
        format::parse_pencil(&text).map(Evaluable::Pencil)
    }
}

fn verdict_code(v: Verdict) -> u8 {
    match v {
        Verdict::Certified => 0,
        Verdict::Refuted => 2,
        Verdict::Inconclusive => 3,
    }
}

fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::Certified => "certified",
        Verdict::Refuted => "refuted",
        Verdict::Inconclusive => "inconclusive",
    }
}

fn report(g: &Global, command: &str, verdict: &str, tol: f64, details: Value, code: u8) -> Output {
    let doc = ReportFile {
        version: FORMAT_VERSION,
        command: command.into(),
        verdict: verdict.into(),
        seed: g.seed,
        tol,
        details,
    };
    Output { text: format::emit_report(&doc), code }
}

fn cert_report(g: &Global, command: &str, tol: f64, c: &CertResult) -> Output {
    let details = serde_json::to_value(CertificateDoc::from_result(c)).expect("serializable");
    report(g, command, verdict_name(c.verdict), tol, details, verdict_code(c.verdict))
}

fn cert_options(g: &Global) -> CertOptions {
    let base = CertOptions::default();
    CertOptions { tol: g.tol.unwrap_or(base.tol), seed: g.seed, samples: g.samples.unwrap_or(base.samples), ..base }
}

fn run(cli: Cli) -> Result<Output, Error> {
    let g = &cli.global;
    match cli.command {
        Command::Eval { input, point, n } => {
            let target = load_evaluable(&input)?;
            let arity = match &target {
                Evaluable::Pencil(l) => l.g(),
                Evaluable::Series(p) => p.g(),
            };
            let x = match &point {
                Some(p) => load_tuple(p)?,
                None => MatrixTuple::random(arity, n, &mut seeded_rng(g.seed)),
            };
            let value = match &target {
                Evaluable::Pencil(l) => l.eval(&x)?,
                Evaluable::Series(p) => p.eval(&x)?,
            };
            let details = json!({
                "point": x.entries().iter().map(matrix_rows).collect::<Vec<_>>(),
                "value": matrix_rows(&value),
                "norm": opnorm(&value),
            });
            Ok(report(g, "eval", "ok", g.tol.unwrap_or(0.0), details, 0))
        }
        Command::Check { pencil, nondegenerate, point } => {
            let l = load_pencil(&pencil)?;
            let tol = g.tol.unwrap_or(RANK_TOL);
            let ok = l.is_nondegenerate(tol);
            if nondegenerate || point.is_none() || !ok {
                let rank = pencilball::matkernel::numeric_rank(&l.coefficient_matrix(), tol);
                let details = json!({"check": "nondegenerate", "rank": rank, "g": l.g()});
                let (verdict, code) = if ok { ("certified", 0) } else { ("refuted", 2) };
                if point.is_none() || !ok {
                    return Ok(report(g, "check", verdict, tol, details, code));
                }
            }
            let x = load_tuple(point.as_deref().expect("point present"))?;
            let norm = opnorm(&l.eval(&x)?);
            let details = json!({"check": "ball", "position": l.in_ball(&x, tol)?, "norm": norm});
            Ok(report(g, "check", "ok", tol, details, 0))
        }
        Command::Equiv { first, second } => {
            let (a, b) = (load_pencil(&first)?, load_pencil(&second)?);
            let base = EquivalenceOptions::default();
            let opts = EquivalenceOptions {
                levels: g.levels.clone(),
                samples: g.samples.unwrap_or(base.samples),
                seed: g.seed,
                tol: g.tol.unwrap_or(base.tol),
            };
            let r = equivalent(&a, &b, &opts)?;
            let witness = r.witness.as_ref().map(|w| {
                json!({
                    "level": w.level,
                    "sample_index": w.sample_index,
                    "gap": w.gap,
                    "tuple": w.tuple.entries().iter().map(matrix_rows).collect::<Vec<_>>(),
                })
            });
            let details = json!({
                "levels_tested": r.levels_tested,
                "samples_per_level": r.samples_per_level,
                "witness": witness,
            });
            let (verdict, code) = match r.verdict {
                EquivalenceVerdict::EquivalentOnSamples => ("equivalent-on-samples", 0),
                EquivalenceVerdict::Refuted => ("refuted", 2),
            };
            Ok(report(g, "equiv", verdict, opts.tol, details, code))
        }
        Command::Reduce { pencil } => {
            let l = load_pencil(&pencil)?;
            let opts = ReduceOptions { tol: RANK_TOL, seed: g.seed, cert: cert_options(g) };
            let dec = minimize(&l, &opts)?;
            let code = if dec.inconclusive { 3 } else { 0 };
            Ok(Output { text: format::emit_decomposition(&dec), code })
        }
        Command::Cpcheck { map } => {
            let (s, t) = load_map(&map)?;
            let phi = MatrixMap::between_pencils(&s, &t, RANK_TOL)?;
            if !phi.domain().is_full() || phi.domain().d() != phi.domain().d_prime() {
                return Err(Error::NotSquareDomain);
            }
            let tol = g.tol.unwrap_or(1e-9);
            let c = is_completely_positive(&phi, tol)?;
            Ok(cert_report(g, "cpcheck", tol, &c))
        }
        Command::Cccheck { map } => {
            let (s, t) = load_map(&map)?;
            let phi = MatrixMap::between_pencils(&s, &t, RANK_TOL)?;
            let opts = cert_options(g);
            Ok(cert_report(g, "cccheck", opts.tol, &certify_completely_contractive(&phi, &opts)))
        }
        Command::Cicheck { map } => {
            let (s, t) = load_map(&map)?;
            let phi = MatrixMap::between_pencils(&s, &t, RANK_TOL)?;
            let opts = cert_options(g);
            Ok(cert_report(g, "cicheck", opts.tol, &certify_completely_isometric(&phi, &opts)))
        }
        Command::Extract { input, method, max_degree, lambda } => {
            let strategy = extractor(&method).ok_or_else(|| {
                Error::InvalidArgument(format!("unknown method '{method}'; known: {}", extractor_names().join(", ")))
            })?;
            let f = BlackBoxMap::from_polynomial(load_series(&input)?)?;
            let p = strategy.extract_up_to(&f, max_degree, &ExtractOptions { lambda, probe_size: 1 })?;
            Ok(Output { text: format::emit_series(&p), code: 0 })
        }
        Command::Mobius { action: MobiusAction::Apply { v, u } } => {
            let p = MobiusParams::new(load_matrix(&v)?)?;
            let out = p.apply(&load_matrix(&u)?)?;
            Ok(Output { text: format::emit_matrix(&out), code: 0 })
        }
        Command::Mobius { action: MobiusAction::Normalize { input, max_degree } } => {
            let f = BlackBoxMap::from_polynomial(load_series(&input)?)?;
            let phi = normalize_ballmap(&f)?;
            let strategy = extractor("fock").expect("registered");
            let p = strategy.extract_up_to(&phi, max_degree, &ExtractOptions::default())?;
            Ok(Output { text: format::emit_series(&p), code: 0 })
        }
        Command::VerifyBallmap { fixture, pencil, series, max_degree } => {
            let (l, f) = match (fixture, pencil, series) {
                (Some(name), _, _) => fixtures::ballmap(&name)?,
                (None, Some(p), Some(s)) => (load_pencil(&p)?, BlackBoxMap::from_polynomial(load_series(&s)?)?),
                _ => return Err(Error::InvalidArgument("give --fixture or both --pencil and --series".into())),
            };
            let base = VerifyOptions::default();
            let opts = VerifyOptions {
                tol: g.tol.unwrap_or(base.tol),
                max_degree,
                seed: g.seed,
                cert: cert_options(g),
                boundary_samples: g.samples.unwrap_or(base.boundary_samples),
                ..base
            };
            let r = verify_ballmap(&f, &l, &opts)?;
            let (verdict, code) = match r.verdict {
                ReportVerdict::ConsistentWithTheorem => ("consistent-with-theorem", 0),
                ReportVerdict::Violation => ("violation", 2),
                ReportVerdict::Inconclusive => ("inconclusive", 3),
            };
            let rec = r.first_order.recovered.as_ref();
            let details = json!({
                "normalized_from": r.normalized_from.as_ref().map(matrix_rows),
                "first_order": {
                    "certificate": CertificateDoc::from_result(&r.first_order.cert),
                    "U": rec.map(|x| matrix_rows(&x.u)),
                    "V": rec.map(|x| matrix_rows(&x.v)),
                    "block_sizes": rec.map(|x| x.block_sizes.clone()),
                    "recovery_residual": rec.map(|x| x.residual),
                },
                "higher_order": r.higher_order.iter().map(|d| json!({
                    "degree": d.degree,
                    "(1,1)": d.block_norms[0],
                    "(1,2)": d.block_norms[1],
                    "(2,1)": d.block_norms[2],
                })).collect::<Vec<_>>(),
                "boundary_samples": r.boundary_samples.iter().map(|s| json!({
                    "x": s.x.entries().iter().map(matrix_rows).collect::<Vec<_>>(),
                    "t_grid": s.t_grid,
                    "max_deviation": s.max_deviation,
                })).collect::<Vec<_>>(),
                "boundary_note": "finite t-grid surrogate, not a proof",
                "linearity_deviation": r.linearity_deviation,
                "violations": r.violations.iter().map(|v| v.to_string()).collect::<Vec<_>>(),
            });
            Ok(report(g, "verify-ballmap", verdict, opts.tol, details, code))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let out = cli.global.out.clone();
    match run(cli) {
        Ok(o) => {
            let written = match &out {
                Some(path) => std::fs::write(path, &o.text),
                None => {
                    print!("{}", o.text);
                    Ok(())
                }
            };
            match written {
                Ok(()) => ExitCode::from(o.code),
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(1)
                }
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::Validation(items) = &e {
                for item in items {
                    eprintln!("  {item}");
                }
            }
            ExitCode::from(1)
        }
    }
}
