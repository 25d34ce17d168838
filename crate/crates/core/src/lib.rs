pub mod bench;
pub mod channel;
pub mod circuit;
pub mod error;
pub mod fock;
pub mod linalg;
pub mod measurement;
pub mod phase_space;

pub use error::{Error, Result};
