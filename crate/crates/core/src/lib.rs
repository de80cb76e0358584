//! Exponential dichotomy analysis for non-autonomous linear discrete-time
//! systems `x_{n+1} = A(n) x_n`.
//!
//! The crate checks, estimates and falsifies four dichotomy concepts
//! (uniform, nonuniform, exponential and strong exponential) relative to a
//! compatible projection family, and evaluates the summation (Datko-type)
//! characterizations of each. Magnitudes are carried in log-domain
//! ([`LogScalar`]) so closed-form systems with super-exponential
//! coefficients can be scanned exactly.

pub mod checkers;
pub mod cli;
pub mod config;
pub mod datko;
pub mod error;
pub mod gallery;
pub mod logscalar;
mod linalg;
pub mod report;
mod serde_ext;
pub mod system;
pub mod witness;

pub use error::{Error, Result};
pub use logscalar::{Dd, ExactSum, LogScalar};
pub use system::{
    compatibility_defect, evolution, projected_evolution, restricted_extremes, Coefficients,
    CoordinateFn, EvolutionMatrix, EvolutionOperator, LogFactor, NormKind, Part, Projection,
    ProjectionFamily, RestrictedExtremes, SystemDescription,
};
pub use checkers::{
    estimate_ed, estimate_ued, minimal_ned_profile, optimal_n_for_alpha, scan_ed,
    verify_certificate, verify_triplet_form, DichotomyCertificate, DichotomyKind, EdEstimate,
    NedProfile, UedEstimate, Verdict, WindowSpec, Witness,
};
pub use witness::{falsify, AffineIndex, Trend, WitnessReport, WitnessSchedule};
pub use datko::{
    certificate_to_datko, datko_lhs, datko_round_trip, verify_datko_ed, verify_datko_ned,
    verify_datko_ued, DatkoConstants, DatkoReport, DatkoScan, DatkoVerdict,
};
pub use gallery::{make_example, GalleryEntry};
