//! Exact, finite-stage computations with effective randomness tests on
//! Cantor space: open-set codes, Σ⁰₂ tests and covers, plain complexity,
//! supermartingales and Demuth tests.

pub mod bits;
pub mod cli;
pub mod complexity;
pub mod demuth;
pub mod error;
pub mod gen;
pub mod martingale;
pub mod opensets;
pub mod prefix;
pub mod rat;
pub mod sigma2;
pub mod verify;

pub use bits::BitStr;
pub use error::{Error, Result};
pub use opensets::{Capture, MLTestCode, Membership, OpenCode, SchnorrTestCode, UniformSeq, W2TestCode};
pub use prefix::PrefixSet;
pub use rat::Rat;
pub use sigma2::{Sigma2Code, Sigma2Test, TreeCode};
