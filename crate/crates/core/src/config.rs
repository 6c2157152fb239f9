//! TOML experiment configuration and its canonical digest.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::coefficients::ModelSpec;
use crate::error::{Error, Result};
use crate::lab::fit::Axis;
use crate::lab::lemmas::LemmaSettings;
use crate::lab::meshing::MeshingPlan;
use crate::lab::moments::{HolderSettings, MomentPlan};
use crate::lab::plan::{ErrorNorm, ExperimentPlan, FixedPointSettings, InitialCondition, LadderPoint, NoiseChoice};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ConvergenceAxis {
    Spatial,
    Temporal,
    Combined,
    Epsilon,
}

impl ConvergenceAxis {
    pub fn fit_axis(self) -> Axis {
        match self {
            ConvergenceAxis::Spatial | ConvergenceAxis::Combined => Axis::N,
            ConvergenceAxis::Temporal => Axis::Tau,
            ConvergenceAxis::Epsilon => Axis::Eps,
        }
    }

    /// Rate and tolerance the fit is judged against, if the setting has one.
    pub fn expected(self, mu: f64, dim: usize) -> Option<Expectation> {
        match self {
            ConvergenceAxis::Spatial | ConvergenceAxis::Combined => Some(Expectation {
                rate: -mu / dim as f64,
                tolerance: 0.2,
            }),
            ConvergenceAxis::Temporal => (mu >= 2.0).then(|| Expectation {
                rate: (mu / 3.0 - 0.5).min(0.5),
                tolerance: 0.15,
            }),
            ConvergenceAxis::Epsilon => Some(Expectation {
                rate: -0.5,
                tolerance: 0.2,
            }),
        }
    }
}

impl fmt::Display for ConvergenceAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConvergenceAxis::Spatial => "spatial",
            ConvergenceAxis::Temporal => "temporal",
            ConvergenceAxis::Combined => "combined",
            ConvergenceAxis::Epsilon => "epsilon",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expectation {
    pub rate: f64,
    pub tolerance: f64,
}

/// Ladder given as parallel lists; a list of length one is broadcast.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LadderSpec {
    pub k_cut: Vec<usize>,
    pub steps: Vec<usize>,
}

impl LadderSpec {
    pub fn points(&self) -> Result<Vec<LadderPoint>> {
        let (a, b) = (self.k_cut.len(), self.steps.len());
        if a == 0 || b == 0 {
            return Err(Error::Config(
                "convergence.ladder: k_cut and steps must be non-empty".into(),
            ));
        }
        let n = a.max(b);
        if (a != n && a != 1) || (b != n && b != 1) {
            return Err(Error::Config(format!(
                "convergence.ladder: k_cut has {a} entries and steps has {b}; lengths must match or be 1"
            )));
        }
        Ok((0..n)
            .map(|i| LadderPoint {
                k_cut: self.k_cut[if a == 1 { 0 } else { i }],
                steps: self.steps[if b == 1 { 0 } else { i }],
            })
            .collect())
    }
}

fn default_p() -> f64 {
    2.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceSection {
    pub eps: Vec<f64>,
    pub t_end: f64,
    pub mu: f64,
    #[serde(default)]
    pub norm: ErrorNorm,
    #[serde(default = "default_p")]
    pub p_moment: f64,
    pub ladder: LadderSpec,
    pub reference: LadderPoint,
    /// Overrides the rate the axis would otherwise be judged against.
    #[serde(default)]
    pub expect: Option<Expectation>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentsSection {
    pub eps: Vec<f64>,
    pub t_end: f64,
    pub steps: usize,
    pub k_cut: usize,
    #[serde(default = "default_p")]
    pub p_moment: f64,
    #[serde(default)]
    pub mu: f64,
    #[serde(default)]
    pub holder: Option<HolderSettings>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshingSection {
    pub eps: f64,
    pub t_end: f64,
    pub mu: f64,
    #[serde(default)]
    pub delta: Option<f64>,
    pub target_k: usize,
    pub candidates: Vec<usize>,
    pub calibration: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabConfig {
    pub name: String,
    pub seed: u64,
    pub paths: usize,
    pub model: ModelSpec,
    pub noise: NoiseChoice,
    #[serde(default)]
    pub initial: InitialCondition,
    #[serde(default)]
    pub solver: FixedPointSettings,
    #[serde(default)]
    pub convergence: Option<ConvergenceSection>,
    #[serde(default)]
    pub moments: Option<MomentsSection>,
    #[serde(default)]
    pub meshing: Option<MeshingSection>,
    #[serde(default)]
    pub lemmas: Option<LemmaSettings>,
}

impl LabConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Configuration used when no file is given: lemma checks only.
    pub fn lemma_default() -> Self {
        LabConfig {
            name: "lemmas".into(),
            seed: 0,
            paths: 2,
            model: ModelSpec::free(),
            noise: NoiseChoice::Table { q: vec![] },
            initial: InitialCondition::Zero,
            solver: FixedPointSettings::default(),
            convergence: None,
            moments: None,
            meshing: None,
            lemmas: Some(LemmaSettings::default()),
        }
    }

    /// SHA-256 of the canonical JSON form (object keys sorted) of `self`
    /// together with `extra`, hex encoded.
    pub fn digest(&self, extra: &BTreeMap<String, String>) -> Result<String> {
        let mut value = serde_json::to_value(self).map_err(|e| Error::Config(e.to_string()))?;
        if let serde_json::Value::Object(map) = &mut value {
            for (k, v) in extra {
                map.insert(format!("@{k}"), serde_json::Value::String(v.clone()));
            }
        }
        let canonical = serde_json::to_string(&value).map_err(|e| Error::Config(e.to_string()))?;
        Ok(hex::encode(Sha256::digest(canonical.as_bytes())))
    }

    fn section<'a, T>(&self, s: &'a Option<T>, name: &str) -> Result<&'a T> {
        s.as_ref()
            .ok_or_else(|| Error::Config(format!("config '{}' has no [{name}] section", self.name)))
    }

    pub fn experiment_plan(&self) -> Result<ExperimentPlan> {
        let c = self.section(&self.convergence, "convergence")?;
        Ok(ExperimentPlan {
            name: self.name.clone(),
            model: self.model.clone(),
            noise: self.noise.clone(),
            initial: self.initial.clone(),
            eps: c.eps.clone(),
            t_end: c.t_end,
            ladder: c.ladder.points()?,
            reference: c.reference,
            paths: self.paths,
            seed: self.seed,
            p_moment: c.p_moment,
            mu: c.mu,
            norm: c.norm,
            fixed_point: self.solver,
        })
    }

    pub fn expectation(&self, axis: ConvergenceAxis) -> Result<Option<Expectation>> {
        let c = self.section(&self.convergence, "convergence")?;
        Ok(c.expect.or_else(|| axis.expected(c.mu, 1)))
    }

    pub fn moment_plan(&self) -> Result<MomentPlan> {
        let m = self.section(&self.moments, "moments")?;
        Ok(MomentPlan {
            name: self.name.clone(),
            model: self.model.clone(),
            noise: self.noise.clone(),
            initial: self.initial.clone(),
            eps: m.eps.clone(),
            t_end: m.t_end,
            steps: m.steps,
            k_cut: m.k_cut,
            paths: self.paths,
            seed: self.seed,
            p_moment: m.p_moment,
            mu: m.mu,
            holder: m.holder.clone(),
            fixed_point: self.solver,
        })
    }

    pub fn meshing_plan(&self) -> Result<MeshingPlan> {
        let m = self.section(&self.meshing, "meshing")?;
        Ok(MeshingPlan {
            name: self.name.clone(),
            model: self.model.clone(),
            noise: self.noise.clone(),
            eps: m.eps,
            t_end: m.t_end,
            mu: m.mu,
            delta: m.delta,
            target_k: m.target_k,
            candidates: m.candidates.clone(),
            calibration: m.calibration.clone(),
            paths: self.paths,
            seed: self.seed,
            fixed_point: self.solver,
        })
    }

    pub fn lemma_settings(&self) -> LemmaSettings {
        self.lemmas.unwrap_or_default()
    }
}
