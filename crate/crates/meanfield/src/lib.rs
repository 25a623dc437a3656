//! Mean field equations with singular weights on planar domains.
//!
//! The crate solves the Dirichlet problem for the mean field equation with a
//! power-law sink in the weight, classifies domains by the sign of the
//! associated concentration functional, and evaluates the thermodynamic
//! curves of the underlying point-vortex ensemble. Closed-form solutions on
//! the disk serve as oracles throughout the test suite.

pub mod asymptotics;
pub mod classify;
pub mod domain;
pub mod error;
pub mod fem;
pub mod geometry;
pub mod linalg;
pub mod oracle;
pub mod quad;
pub mod solver;
pub mod spectral;
pub mod thermo;
pub mod weights;

pub use asymptotics::{check_est_muk, check_im_ck, fit_blowup, BlowupFit};
pub use classify::{classify_domain, compute_d0_truncation, KindVerdict, Verdict};
pub use domain::Domain;
pub use error::{MfError, Result};
pub use fem::FemSpace;
pub use geometry::{make_disk_mesh, make_disk_mesh_graded, Mesh, Point2};
pub use oracle::DiskOracle;
pub use solver::{
    continue_in_amplitude, continue_in_amplitude_from, continue_in_rho, solve_gelfand,
    solve_mean_field, Branch, Problem,
    Solution, SolutionForm,
};
pub use spectral::{
    assemble_linearized, kernel_correlation, smallest_eigenvalues, SpectralReport,
};
pub use weights::{SinkConfig, WeightField};
