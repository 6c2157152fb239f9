use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::coefficients::{CoefficientSet, ModelSpec};
use crate::error::{Error, Result};
use crate::noise::NoiseSpec;
use crate::solver::SolverConfig;
use crate::spectral::{FourierGrid, SobolevIndex, SpectralField};

/// Minimum refinement of the reference over a compared point, per axis,
/// unless the axis is held equal to the reference.
pub const REF_MODE_FACTOR: usize = 4;
pub const REF_STEP_FACTOR: usize = 8;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialCondition {
    #[default]
    Zero,
    PlaneWave {
        k: i64,
        #[serde(default = "one")]
        amplitude: f64,
    },
    /// Deterministic coefficients `(1 + λ_k)^{-decay}` on every mode.
    Smooth { decay: f64 },
}

fn one() -> f64 {
    1.0
}

impl InitialCondition {
    pub fn field(&self, grid: &FourierGrid) -> Result<SpectralField> {
        match *self {
            InitialCondition::Zero => Ok(SpectralField::zeros(grid)),
            InitialCondition::PlaneWave { k, amplitude } => {
                Ok(SpectralField::unit_mode(grid, k)?.scaled(Complex64::new(amplitude, 0.0)))
            }
            InitialCondition::Smooth { decay } => {
                let lam = |k: i64| crate::spectral::FOUR_PI_SQ * (k * k) as f64;
                Ok(SpectralField::from_fn(grid, |k| {
                    Complex64::new((1.0 + lam(k)).powf(-decay), 0.0)
                }))
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, InitialCondition::Zero)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum NoiseChoice {
    /// `q = (1 + λ_k)^{-r}`.
    Power { r: f64 },
    /// Eigenvalues in dof order `[g_0, cos_1, sin_1, ...]`.
    Table { q: Vec<f64> },
}

impl NoiseChoice {
    pub fn spec(&self, grid: &FourierGrid) -> Result<NoiseSpec> {
        match self {
            NoiseChoice::Power { r } => NoiseSpec::power_family(grid, *r),
            NoiseChoice::Table { q } => NoiseSpec::from_table(grid, q),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorNorm {
    /// Error at the final time only.
    #[default]
    Terminal,
    /// Maximum over the coarse time grid.
    Sup,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LadderPoint {
    pub k_cut: usize,
    pub steps: usize,
}

impl LadderPoint {
    /// `N = 2K + 1`, the dimension of the truncated space in d = 1.
    pub fn modes(&self) -> usize {
        2 * self.k_cut + 1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedPointSettings {
    #[serde(default = "crate::solver::default_fp_tol")]
    pub tol: f64,
    #[serde(default = "crate::solver::default_fp_max_iter")]
    pub max_iter: usize,
}

impl Default for FixedPointSettings {
    fn default() -> Self {
        FixedPointSettings {
            tol: crate::solver::default_fp_tol(),
            max_iter: crate::solver::default_fp_max_iter(),
        }
    }
}

/// Everything needed to run one strong-error table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub name: String,
    pub model: ModelSpec,
    pub noise: NoiseChoice,
    pub initial: InitialCondition,
    pub eps: Vec<f64>,
    pub t_end: f64,
    pub ladder: Vec<LadderPoint>,
    pub reference: LadderPoint,
    pub paths: usize,
    pub seed: u64,
    pub p_moment: f64,
    /// Regularity the noise is meant to provide; sets expected rates.
    pub mu: f64,
    pub norm: ErrorNorm,
    pub fixed_point: FixedPointSettings,
}

impl ExperimentPlan {
    pub fn reference_grid(&self) -> FourierGrid {
        FourierGrid::one_dim(self.reference.k_cut)
    }

    pub fn noise_spec(&self) -> Result<NoiseSpec> {
        self.noise.spec(&self.reference_grid())
    }

    pub fn coefficients(&self) -> Result<CoefficientSet> {
        let mu = SobolevIndex::new(self.mu).map_err(|e| Error::Config(e.to_string()))?;
        CoefficientSet::new(self.model.clone(), &self.noise_spec()?, mu)
    }

    pub fn solver_config(&self, eps: f64, point: LadderPoint) -> SolverConfig {
        SolverConfig {
            eps,
            t_end: self.t_end,
            steps: point.steps,
            k_cut: point.k_cut,
            fp_tol: self.fixed_point.tol,
            fp_max_iter: self.fixed_point.max_iter,
            seed: self.seed,
            p_moment: self.p_moment,
        }
    }

    /// Every precondition checked before any path is drawn.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.paths < 2 {
            return bad(format!("paths must be >= 2, got {}", self.paths));
        }
        if self.eps.is_empty() {
            return bad("eps list is empty".into());
        }
        if self.ladder.is_empty() {
            return bad("ladder is empty".into());
        }
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return bad(format!("mu must be finite and >= 0, got {}", self.mu));
        }
        let r = self.reference;
        for p in &self.ladder {
            let k_ok = p.k_cut == r.k_cut || r.k_cut >= REF_MODE_FACTOR * p.k_cut;
            let m_ok = p.steps == r.steps
                || (p.steps > 0 && r.steps.is_multiple_of(p.steps) && r.steps >= REF_STEP_FACTOR * p.steps);
            if !k_ok {
                return bad(format!(
                    "reference K = {} must equal or be >= {REF_MODE_FACTOR}x ladder K = {}",
                    r.k_cut, p.k_cut
                ));
            }
            if !m_ok {
                return bad(format!(
                    "reference M = {} must equal or be a multiple >= {REF_STEP_FACTOR}x of ladder M = {}",
                    r.steps, p.steps
                ));
            }
        }
        let cs = self.coefficients()?;
        for &eps in &self.eps {
            for p in self.ladder.iter().chain(std::iter::once(&r)) {
                self.solver_config(eps, *p).validate(&cs)?;
            }
        }
        Ok(())
    }
}
