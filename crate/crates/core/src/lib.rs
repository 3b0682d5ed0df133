//! Fractional Laplacian and fractional p-Laplacian on mapped-Chebyshev grids.
//!
//! Samples live on nodes `x_j = L cot(xi_j)`. The second-order differentiation
//! matrix of each coordinate is diagonalized once, and fractional powers are
//! applied entrywise to eigenvalue sums.

pub mod eigen;
pub mod error;
pub mod evolution;
pub mod fraclap;
pub mod grid;
pub mod oracles;
pub mod plap;
pub mod special;
pub mod tensor;

pub use eigen::{condition_number, factorize, SpectralFactor};
pub use error::{Error, Result};
pub use evolution::{
    quad_mass, rk4_step, run_evolution, self_similar_params, EvolutionConfig, SelfSimilarParams,
    Snapshot,
};
pub use fraclap::FracLapOperator;
pub use grid::{build_diff_matrices, make_grid, DiffMatrices, ExtensionKind, Grid1D};
pub use plap::{constant_c, phi_p, FracPOperator};
pub use tensor::NdArray;
