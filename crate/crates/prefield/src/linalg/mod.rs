//! Linear-algebra kernels: banded Cholesky, block factorization with a
//! banded leading block, and small dense helpers.

pub mod band;
pub mod blockfactor;
pub mod dense;

pub use band::{BandCholesky, SymBandMatrix};
pub use blockfactor::{BlockCholesky, BlockSymMatrix};
