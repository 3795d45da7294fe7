//! Censuses of thick, thin and late points, normalized extremes, successful
//! centers, exponent regression, and the config-driven sweep harness.

pub mod census;
pub mod config;
pub mod fit;
pub mod harness;
pub mod output;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use census::{
    census_many, census_thick_thin, count_thick_thin, extreme_normalized, late_point_census, successful_census, Extremes, LateCensus,
    SuccessfulCensus,
};
pub use config::{ExperimentConfig, ExponentKind, OutputFormat, Suite};
pub use fit::{exponent_fit, exponent_fit_pairs, late_exponent, thick_exponent, thin_exponent, ExponentFit};
pub use harness::{run_config_file, run_experiment, write_outputs, ExperimentOutput};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Thick,
    Thin,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThickThinQuery {
    pub theta: f64,
    pub eta: f64,
    pub sign: Sign,
}

impl ThickThinQuery {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0) || !(self.eta > 0.0) {
            return Err(Error::invalid(format!("need theta > 0 and eta > 0, got theta = {}, eta = {}", self.theta, self.eta)));
        }
        Ok(())
    }

    /// Predicted growth exponent of the census size, when nonvacuous.
    pub fn predicted_exponent(&self) -> Option<f64> {
        match self.sign {
            Sign::Thick => Some(thick_exponent(self.theta, self.eta)),
            Sign::Thin if self.theta > 1.0 => thin_exponent(self.theta, self.eta),
            Sign::Thin => None,
        }
    }
}

/// Size of one thick or thin set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCensus {
    pub side: usize,
    pub query: ThickThinQuery,
    pub count: usize,
    pub seed: u64,
    pub replica: u64,
    /// Wall-clock seconds of the run; not part of the CSV output.
    pub elapsed_wall: f64,
    /// `τ_{t_θ}` of the run.
    pub tau_value: f64,
}
