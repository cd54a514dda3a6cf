//! Construction of small isotopy paths: real eigenvalues, extreme moduli,
//! small stable/unstable angles, and the staged pipeline combining them.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::cocycle::PeriodicCocycle;
use crate::error::{Error, Result};
use crate::path::{path_radius, CocyclePath, PathRadiusReport, DEFAULT_RADIUS_SAMPLES};
use crate::verification::{verify_path, verify_path_measured, Certificate, Goals, DEFAULT_SAMPLES};

mod angle;
mod pipeline;
mod push;
mod realify;

pub use angle::{small_angle, small_angle_2d, small_angle_with};
pub use pipeline::{pipeline_small_angle, separate_moduli, PipelineFailure};
pub use push::{push_moduli, push_moduli_with};
pub use realify::{normalize_to_det_one, realify, realify_2d, realify_2d_seeded, realify_with, DetOneForm};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisBudget {
    pub epsilon: f64,
    #[serde(rename = "N_hint")]
    pub n_hint: usize,
    pub max_rounds: usize,
    pub seed: u64,
    /// sample times per certificate
    pub samples: usize,
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
}

impl SynthesisBudget {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidArgument(format!("epsilon must be positive, got {epsilon}")));
        }
        Ok(SynthesisBudget { epsilon, n_hint: 1, max_rounds: 8, seed: 0, samples: DEFAULT_SAMPLES, tolerances: BTreeMap::new() })
    }

    pub fn with_n(mut self, n: usize) -> Self {
        self.n_hint = n.max(1);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_samples(mut self, samples: usize) -> Self {
        self.samples = samples.max(2);
        self
    }

    pub fn tol(&self, name: &str, default: f64) -> f64 {
        self.tolerances.get(name).copied().unwrap_or(default)
    }

    fn check(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidArgument(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if self.max_rounds == 0 {
            return Err(Error::InvalidArgument("max_rounds must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisOutcome {
    pub path: CocyclePath,
    pub radius_report: PathRadiusReport,
    pub certificates: Vec<Certificate>,
    pub goals: Goals,
    #[serde(default)]
    pub notes: Vec<String>,
}

impl SynthesisOutcome {
    /// Measure the radius and run the certificates the goals ask for.
    pub fn assemble(path: CocyclePath, goals: Goals, samples: usize, notes: Vec<String>) -> Result<Self> {
        let radius_report = path_radius(&path, DEFAULT_RADIUS_SAMPLES)?;
        Self::assemble_measured(path, goals, samples, notes, radius_report)
    }

    /// `radius_report` must come from `path_radius` at the default sample count.
    pub fn assemble_measured(
        path: CocyclePath,
        mut goals: Goals,
        samples: usize,
        notes: Vec<String>,
        radius_report: PathRadiusReport,
    ) -> Result<Self> {
        goals.samples = Some(samples);
        let certificates = verify_path_measured(&path, &goals, Some(&radius_report))?;
        Ok(SynthesisOutcome { path, radius_report, certificates, goals, notes })
    }

    pub fn passed(&self) -> bool {
        self.certificates.iter().all(|c| c.passed)
    }

    pub fn end(&self) -> Result<PeriodicCocycle> {
        self.path.end()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("outcome serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Re-run the certificates for an outcome against (possibly different) goals.
pub fn verify_outcome(outcome: &SynthesisOutcome, goals: &Goals) -> Result<Vec<Certificate>> {
    verify_path(&outcome.path, goals)
}
