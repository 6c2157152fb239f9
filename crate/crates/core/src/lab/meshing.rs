//! Admissible (N, τ) pairs for a target strong error δ.

use serde::{Deserialize, Serialize};

use crate::coefficients::ModelSpec;
use crate::error::{Error, Result};
use crate::lab::plan::{
    ErrorNorm, ExperimentPlan, FixedPointSettings, InitialCondition, LadderPoint, NoiseChoice, REF_MODE_FACTOR,
    REF_STEP_FACTOR,
};
use crate::lab::strong::{strong_error, ErrorRow, ErrorTable};

/// Step size paired with dimension `n`: `n^{-2μ/d}` for `μ ≥ 3` and
/// `n^{-6μ/(d(2μ-3))}` for `2 ≤ μ < 3`, which balances the temporal rate
/// `τ^{μ/3 - 1/2}` against the spatial rate `n^{-μ/d}`.
pub fn paired_step(n: usize, mu: f64, dim: usize) -> Result<f64> {
    if n == 0 || dim == 0 {
        return Err(Error::invalid("dimension and mode count must be positive"));
    }
    let d = dim as f64;
    let exponent = if mu >= 3.0 {
        2.0 * mu / d
    } else if mu >= 2.0 {
        6.0 * mu / (d * (2.0 * mu - 3.0))
    } else {
        return Err(Error::Unsupported(format!(
            "no admissible step pairing for mu = {mu} < 2: the temporal rate does not dominate"
        )));
    };
    Ok((n as f64).powf(-exponent))
}

/// Smallest power-of-two step count whose step size does not exceed `tau`.
pub fn steps_for(t_end: f64, tau: f64) -> usize {
    let m = (t_end / tau).ceil().max(1.0);
    (m as usize).next_power_of_two()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeshingPlan {
    pub name: String,
    pub model: ModelSpec,
    pub noise: NoiseChoice,
    pub eps: f64,
    pub t_end: f64,
    pub mu: f64,
    /// Target error; `None` derives it from `target_k`.
    pub delta: Option<f64>,
    /// Bandwidth the derived δ is meant to select.
    pub target_k: usize,
    /// Candidate bandwidths in increasing order.
    pub candidates: Vec<usize>,
    /// Bandwidths used to fit the constant.
    pub calibration: Vec<usize>,
    pub paths: usize,
    pub seed: u64,
    pub fixed_point: FixedPointSettings,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeshingCandidate {
    pub k_cut: usize,
    pub modes: usize,
    pub tau: f64,
    pub steps: usize,
    /// `N^{-2μ/d} / ε`.
    pub lhs: f64,
    /// `C δ²`.
    pub rhs: f64,
    pub admissible: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MeshingReport {
    pub calibration: ErrorTable,
    /// `C = 1 / A²` with `A = max ê N^{μ/d} √ε` over the calibration points.
    pub constant: f64,
    pub delta: f64,
    pub candidates: Vec<MeshingCandidate>,
    pub selected: Option<LadderPoint>,
    /// Mode count the admissibility inequality asks for.
    pub required_modes: f64,
    pub result: Option<ErrorRow>,
    pub notice: Option<String>,
}

impl MeshingReport {
    /// `ê ≤ 2δ` at the selected point; `false` when infeasible.
    pub fn pass(&self) -> bool {
        self.result.as_ref().is_some_and(|r| r.error <= 2.0 * self.delta)
    }
}

impl MeshingPlan {
    fn point(&self, k_cut: usize) -> Result<LadderPoint> {
        let tau = paired_step(2 * k_cut + 1, self.mu, 1)?;
        Ok(LadderPoint {
            k_cut,
            steps: steps_for(self.t_end, tau),
        })
    }

    fn experiment(&self, name: &str, ladder: Vec<LadderPoint>) -> ExperimentPlan {
        let k_ref = ladder.iter().map(|p| p.k_cut).max().unwrap_or(0) * REF_MODE_FACTOR;
        let m_ref = ladder.iter().map(|p| p.steps).max().unwrap_or(1) * REF_STEP_FACTOR;
        ExperimentPlan {
            name: format!("{}-{name}", self.name),
            model: self.model.clone(),
            noise: self.noise.clone(),
            initial: InitialCondition::Zero,
            eps: vec![self.eps],
            t_end: self.t_end,
            ladder,
            reference: LadderPoint {
                k_cut: k_ref,
                steps: m_ref,
            },
            paths: self.paths,
            seed: self.seed,
            p_moment: 2.0,
            mu: self.mu,
            norm: ErrorNorm::Terminal,
            fixed_point: self.fixed_point,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let cs = self.experiment("check", vec![]).coefficients()?;
        if !(cs.is_additive() && cs.linear_alpha().is_some_and(|a| a > 0.0)) {
            return Err(Error::Config(
                "meshing needs the linear damped model with additive noise".into(),
            ));
        }
        if self.calibration.len() < 2 || self.candidates.is_empty() {
            return Err(Error::Config(
                "meshing needs >= 2 calibration bandwidths and >= 1 candidate".into(),
            ));
        }
        if self.candidates.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("meshing candidates must be strictly increasing".into()));
        }
        if let Some(d) = self.delta {
            if !(d > 0.0) {
                return Err(Error::Config(format!("delta must be positive, got {d}")));
            }
        }
        paired_step(1, self.mu, 1).map_err(|e| Error::Config(e.to_string()))?;
        let ladder = self
            .calibration
            .iter()
            .map(|&k| self.point(k))
            .collect::<Result<Vec<_>>>()?;
        self.experiment("calibration", ladder).validate()?;
        for &k in &self.candidates {
            self.experiment("candidate", vec![self.point(k)?]).validate()?;
        }
        Ok(())
    }

    /// Fit the constant, pick the smallest admissible candidate and measure it.
    pub fn run(&self) -> Result<MeshingReport> {
        self.validate()?;
        let rate = self.mu;
        let ladder = self
            .calibration
            .iter()
            .map(|&k| self.point(k))
            .collect::<Result<Vec<_>>>()?;
        let calibration = strong_error(&self.experiment("calibration", ladder))?;
        let amplitude = calibration
            .rows
            .iter()
            .map(|r| r.error * (r.modes as f64).powf(rate) * self.eps.sqrt())
            .fold(0.0, f64::max);
        if !(amplitude > 0.0) {
            return Err(Error::invalid(
                "calibration errors vanish; the constant cannot be fitted",
            ));
        }
        let constant = 1.0 / (amplitude * amplitude);
        let delta = self.delta.unwrap_or_else(|| {
            let n = (2 * self.target_k + 1) as f64;
            1.05 * n.powf(-rate) / (constant * self.eps).sqrt()
        });
        let rhs = constant * delta * delta;
        let candidates: Vec<MeshingCandidate> = self
            .candidates
            .iter()
            .map(|&k| {
                let p = self.point(k)?;
                let modes = p.modes();
                let lhs = (modes as f64).powf(-2.0 * rate) / self.eps;
                Ok(MeshingCandidate {
                    k_cut: k,
                    modes,
                    tau: self.t_end / p.steps as f64,
                    steps: p.steps,
                    lhs,
                    rhs,
                    admissible: lhs <= rhs,
                })
            })
            .collect::<Result<_>>()?;
        let required_modes = (rhs * self.eps).powf(-1.0 / (2.0 * rate));
        let selected = candidates.iter().find(|c| c.admissible).map(|c| LadderPoint {
            k_cut: c.k_cut,
            steps: c.steps,
        });
        let (result, notice) = match selected {
            Some(p) => {
                let table = strong_error(&self.experiment("selected", vec![p]))?;
                (table.rows.into_iter().next(), None)
            }
            None => (
                None,
                Some(format!(
                    "infeasible at desk scale: admissibility needs N >= {required_modes:.1}, largest candidate N = {}",
                    candidates.last().map_or(0, |c| c.modes)
                )),
            ),
        };
        Ok(MeshingReport {
            calibration,
            constant,
            delta,
            candidates,
            selected,
            required_modes,
            result,
            notice,
        })
    }
}
