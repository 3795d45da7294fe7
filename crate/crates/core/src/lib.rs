//! Desk-scale laboratory for local times of the continuous-time simple random
//! walk on the two-dimensional torus `Z_N^2`.
//!
//! The crate is organised bottom-up:
//!
//! * [`torus`]: lattice geometry (wrapped distance, discrete balls, boundaries).
//! * [`walker`]: the walk itself, with exponential holding times and the
//!   stopping rules used throughout (hitting times, inverse local time,
//!   cover time, fixed horizons).
//! * [`green`]: exact killed-walk Green's functions and hitting probabilities
//!   by direct linear solves, plus the closed forms built on top of them.
//! * [`excursion`]: concentric-annulus excursion counts, the "successful"
//!   predicate and the negative-binomial product `q_n`.
//! * [`gff`]: the pinned Gaussian free field and statistical checks of its
//!   couplings with the local-time field.
//! * [`experiments`]: censuses, exponent regression, config-driven sweeps and
//!   CSV/JSON persistence.

pub mod error;
pub mod excursion;
pub mod experiments;
pub mod gff;
pub mod green;
pub mod rng;
pub mod stats;
pub mod torus;
pub mod walker;

pub use error::{Error, Result};
pub use excursion::{ExcursionRecord, MultiscaleConfig, Radii, RadiiMode, TargetCounts, TraceHorizon};
pub use experiments::{PointCensus, Sign, ThickThinQuery};
pub use gff::{GffCovariance, GffSample};
pub use green::GreenMatrix;
pub use torus::{PointSet, Torus, TorusPoint};
pub use walker::{LocalTimeField, StopRule, WalkConfig};

/// Version string stamped into experiment summaries.
pub const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "+", env!("LTLAB_GIT_DESCRIBE"));
