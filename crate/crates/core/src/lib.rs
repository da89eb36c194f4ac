//! Horizontal Brownian motion on step-two groups and their quotients, with
//! Monte Carlo estimators for entropy, horizontal energy and log-Sobolev
//! ratios.
//!
//! Groups: the Heisenberg group, SU(2), and finite products of either.
//! Quotients: real_line, grushin, nonisotropic, heis_like, compact_heis,
//! hopf, so3 and so4.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diffusion;
pub mod error;
pub mod functionals;
pub mod groups;
pub mod lie;
pub mod library;
pub mod quotients;
pub mod stats;
pub mod testfn;

pub use diffusion::{
    read_binary, simulate_group_endpoints, simulate_quotient_endpoints, simulate_refinement_ladder, CloudPoints,
    EndpointCloud, Provenance, QuotientMode, SimConfig, SpaceModel,
};
pub use error::{Error, Result};
pub use functionals::{
    estimate_energy, estimate_entropy, lift, lsi_ratio, verify_transfer, DerivativeMode, LsiReport, TransferReport,
};
pub use groups::{GroupKind, GroupModel, GroupPoint, HeisenbergPoint, Su2Point};
pub use lie::{AlgebraVector, HorizontalFrame, RankFlag, StructureConstants};
pub use quotients::{coset_equal, project, QuotientKind, QuotientModel, QuotientPoint};
pub use stats::{ks_two_sample, moment_ci, EstimateCI, TwoSampleResult};
pub use testfn::{Domain, TestFunction};
