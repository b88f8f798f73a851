pub mod error;
pub mod fixtures;
pub mod fockextract;
pub mod format;
pub mod matkernel;
pub mod mobius;
pub mod ncseries;
pub mod opspace;
pub mod pencil;
pub mod reduction;
pub mod verify;

pub use error::{Error, Result};
