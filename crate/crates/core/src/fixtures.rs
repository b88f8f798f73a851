//! Named built-in examples shared by the command line and the tests.

use crate::error::{Error, Result};
use crate::fockextract::BlackBoxMap;
use crate::matkernel::{self, c64, matrix_unit, random_unitary, CMatrix};
use crate::mobius::MobiusParams;
use crate::ncseries::{NCPolynomial, Word};
use crate::pencil::Pencil;
use crate::verify::assemble_ballmap;

pub fn pencil_names() -> &'static [&'static str] {
    &["x", "x_half_x", "x_plus_x", "dependent", "row", "column"]
}

pub fn pencil(name: &str) -> Result<Pencil> {
    match name {
        "x" => Pencil::from_real(1, 1, &[&[1.0]]),
        "x_half_x" => Pencil::from_real(2, 2, &[&[1.0, 0.0, 0.0, 0.5]]),
        "x_plus_x" => Pencil::from_real(2, 2, &[&[1.0, 0.0, 0.0, 1.0]]),
        "dependent" => Pencil::from_real(1, 1, &[&[1.0], &[2.0]]),
        "row" => Pencil::from_real(1, 2, &[&[1.0, 0.0], &[0.0, 1.0]]),
        "column" => Pencil::from_real(2, 1, &[&[1.0, 0.0], &[0.0, 1.0]]),
        _ => Err(unknown("pencil", name, pencil_names())),
    }
}

pub fn map_names() -> &'static [&'static str] {
    &["identity2", "transpose2", "double", "x_half_x_to_x"]
}

fn matrix_units(d: usize) -> Vec<CMatrix> {
    (0..d).flat_map(|i| (0..d).map(move |j| matrix_unit(d, d, i, j))).collect()
}

/// A map as a (source, target) pencil pair: `L(x) ↦ M(x)`.
pub fn map(name: &str) -> Result<(Pencil, Pencil)> {
    match name {
        "identity2" => {
            let e = Pencil::new(matrix_units(2))?;
            Ok((e.clone(), e))
        }
        "transpose2" => {
            let e = matrix_units(2);
            let t = e.iter().map(|m| m.transpose()).collect();
            Ok((Pencil::new(e)?, Pencil::new(t)?))
        }
        "double" => Ok((pencil("x")?, Pencil::from_real(1, 1, &[&[2.0]])?)),
        "x_half_x_to_x" => Ok((pencil("x_half_x")?, pencil("x")?)),
        _ => Err(unknown("map", name, map_names())),
    }
}

pub fn ballmap_names() -> &'static [&'static str] {
    &["row", "mobius_row", "half_copy", "quadratic_tail", "corrupted_tail"]
}

/// A pencil and a black-box map of its ball.
pub fn ballmap(name: &str) -> Result<(Pencil, BlackBoxMap)> {
    match name {
        "row" => {
            let l = pencil("row")?;
            let f = BlackBoxMap::from_pencil(&l)?;
            Ok((l, f))
        }
        "mobius_row" => {
            let l = pencil("row")?;
            let w = MobiusParams::new(CMatrix::from_row_slice(1, 2, &[c64(0.3, 0.1), c64(-0.2, 0.0)]))?;
            let f = assemble_ballmap(&l, None, &matkernel::identity(1), &matkernel::identity(2), Some(&w))?;
            Ok((l, f))
        }
        "half_copy" => {
            let l = pencil("row")?;
            let half = Pencil::from_real(1, 2, &[&[0.5, 0.0], &[0.0, 0.5]])?;
            let f = assemble_ballmap(&l, Some(&BlackBoxMap::from_pencil(&half)?), &random_unitary(2, 1), &random_unitary(4, 2), None)?;
            Ok((l, f))
        }
        "quadratic_tail" | "corrupted_tail" => {
            let l = pencil("x")?;
            let tail = BlackBoxMap::from_polynomial(NCPolynomial::scalar(1, [(Word::new(vec![0, 0]), c64(0.5, 0.0))])?)?;
            let (u, v) = (random_unitary(2, 5), random_unitary(2, 6));
            let w = MobiusParams::new(CMatrix::from_row_slice(2, 2, &[c64(0.2, 0.0), c64(0.0, 0.1), c64(0.0, 0.0), c64(-0.1, 0.0)]))?;
            let good = assemble_ballmap(&l, Some(&tail), &u, &v, None)?;
            if name == "quadratic_tail" {
                return Ok((l, crate::mobius::compose_mobius(&w, &good)?));
            }
            // 0.1·x³ placed in the (1,2) block relative to U, V
            let mut bump = matkernel::zeros(2, 2);
            bump[(0, 1)] = c64(0.1, 0.0);
            let bump = NCPolynomial::new(1, 2, 2, [(Word::new(vec![0, 0, 0]), &u * bump * v.adjoint())])?;
            let bump = BlackBoxMap::from_polynomial(bump)?;
            let bad = BlackBoxMap::new(1, 2, 2, move |x| Ok(good.eval(x)? + bump.eval(x)?))?;
            Ok((l, crate::mobius::compose_mobius(&w, &bad)?))
        }
        _ => Err(unknown("ball map", name, ballmap_names())),
    }
}

fn unknown(kind: &str, name: &str, known: &[&str]) -> Error {
    Error::InvalidArgument(format!("unknown {kind} fixture '{name}'; known: {}", known.join(", ")))
}
