//! Drift and diffusion Nemytskii operators with declared Lipschitz/growth
//! constants, and a sampling check of those declarations.
//!
//! Constants follow the convention
//! `‖F(u) - F(v)‖ ≤ L1 ‖u - v‖`, `‖F(z)‖_μ ≤ L1 (1 + ‖z‖_μ)` and the same for
//! `G` with the operator measured in `‖· Q^{1/2}‖_HS` (weighted by `μ` for growth).

use std::f64::consts::{PI, SQRT_2};
use std::fmt;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::{HsNorm, NoiseSpec};
use crate::spectral::{random_field, Decay, FourierGrid, SobolevIndex, SpectralField};

/// Largest Lipschitz constant of `u ↦ 1/(1+|u|²)` on ℂ, attained at `|u|² = 1/3`.
const SATURATING_LIP: f64 = 0.649_519_052_838_329; // 3√3/8

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Drift {
    Zero,
    /// `F(u) = iαu`, which turns into damping at rate `α/ε`.
    LinearDamped {
        alpha: f64,
    },
    /// `f(x,u) = V(x) u` with `V(x) = Σ_j cos[j] cos(2πjx) + sin[j] sin(2πjx)`.
    Potential {
        #[serde(default)]
        cos: Vec<f64>,
        #[serde(default)]
        sin: Vec<f64>,
    },
    /// `f(u) = γu / (1 + |u|²)`.
    Saturated {
        gamma: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Diffusion {
    Zero,
    Identity,
    Constant {
        c: f64,
    },
    /// `g(u) = 1 / (1 + |u|²)`.
    Saturating,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub drift: Drift,
    pub diffusion: Diffusion,
}

impl ModelSpec {
    pub fn linear_damped(alpha: f64) -> Self {
        ModelSpec {
            drift: Drift::LinearDamped { alpha },
            diffusion: Diffusion::Identity,
        }
    }

    pub fn free() -> Self {
        ModelSpec {
            drift: Drift::Zero,
            diffusion: Diffusion::Zero,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("model.{name} must be finite, got {v}")))
            }
        };
        match &self.drift {
            Drift::Zero => {}
            Drift::LinearDamped { alpha } => {
                finite("drift.alpha", *alpha)?;
                if *alpha < 0.0 {
                    return Err(Error::Config(format!("model.drift.alpha must be >= 0, got {alpha}")));
                }
            }
            Drift::Potential { cos, sin } => {
                for v in cos.iter().chain(sin) {
                    finite("drift potential coefficient", *v)?;
                }
            }
            Drift::Saturated { gamma } => finite("drift.gamma", *gamma)?,
        }
        if let Diffusion::Constant { c } = self.diffusion {
            finite("diffusion.c", c)?;
        }
        Ok(())
    }
}

impl Drift {
    fn potential(cos: &[f64], sin: &[f64], x: f64) -> f64 {
        let c: f64 = cos
            .iter()
            .enumerate()
            .map(|(j, a)| a * (2.0 * PI * j as f64 * x).cos())
            .sum();
        let s: f64 = sin
            .iter()
            .enumerate()
            .map(|(j, b)| b * (2.0 * PI * j as f64 * x).sin())
            .sum();
        c + s
    }

    /// `f(x, u)`.
    pub fn eval(&self, x: f64, u: Complex64) -> Complex64 {
        match self {
            Drift::Zero => Complex64::new(0.0, 0.0),
            Drift::LinearDamped { alpha } => Complex64::new(0.0, *alpha) * u,
            Drift::Potential { cos, sin } => u * Self::potential(cos, sin, x),
            Drift::Saturated { gamma } => u * (*gamma / (1.0 + u.norm_sqr())),
        }
    }

    fn lipschitz(&self) -> f64 {
        match self {
            Drift::Zero => 0.0,
            Drift::LinearDamped { alpha } => *alpha,
            Drift::Potential { cos, sin } => {
                let weighted = |v: &[f64]| -> f64 {
                    v.iter()
                        .enumerate()
                        .map(|(j, a)| (1.0 + 2.0 * PI * j as f64) * a.abs())
                        .sum()
                };
                SQRT_2 * (weighted(cos) + weighted(sin))
            }
            Drift::Saturated { gamma } => 2.0 * gamma.abs(),
        }
    }

    fn mu_max(&self) -> f64 {
        match self {
            Drift::Zero | Drift::LinearDamped { .. } => f64::INFINITY,
            Drift::Potential { .. } | Drift::Saturated { .. } => 1.0,
        }
    }
}

impl Diffusion {
    /// `g(u)`.
    pub fn eval(&self, u: Complex64) -> Complex64 {
        match self {
            Diffusion::Zero => Complex64::new(0.0, 0.0),
            Diffusion::Identity => Complex64::new(1.0, 0.0),
            Diffusion::Constant { c } => Complex64::new(*c, 0.0),
            Diffusion::Saturating => Complex64::new(1.0 / (1.0 + u.norm_sqr()), 0.0),
        }
    }

    /// Scalar multiplier when `G` does not depend on `u`.
    pub fn additive_scale(&self) -> Option<f64> {
        match self {
            Diffusion::Zero => Some(0.0),
            Diffusion::Identity => Some(1.0),
            Diffusion::Constant { c } => Some(*c),
            Diffusion::Saturating => None,
        }
    }

    fn mu_max(&self) -> f64 {
        match self {
            Diffusion::Saturating => 1.0,
            _ => f64::INFINITY,
        }
    }
}

/// A model together with the constants it is declared to satisfy at `μ`.
#[derive(Clone, Debug)]
pub struct CoefficientSet {
    model: ModelSpec,
    noise: NoiseSpec,
    mu: SobolevIndex,
    l1: f64,
    l2: f64,
    hs: HsNorm,
}

impl CoefficientSet {
    pub fn new(model: ModelSpec, noise: &NoiseSpec, mu: SobolevIndex) -> Result<Self> {
        model.validate()?;
        let hs = noise.weighted_hs_norm(mu);
        let l1 = model.drift.lipschitz();
        let l2 = match model.diffusion {
            Diffusion::Zero => 0.0,
            Diffusion::Identity => hs.value,
            Diffusion::Constant { c } => {
                if c == 0.0 {
                    0.0
                } else {
                    c.abs() * hs.value
                }
            }
            Diffusion::Saturating => {
                let lip = SATURATING_LIP * (2.0 * noise.trace()).sqrt();
                let growth = (2.0
                    * noise
                        .eigenvalues()
                        .iter()
                        .enumerate()
                        .map(|(dof, q)| {
                            let k = dof.div_ceil(2) as f64;
                            q * (1.0 + 2.0 * PI * k).powi(2)
                        })
                        .sum::<f64>())
                .sqrt();
                lip.max(growth)
            }
        };
        Ok(CoefficientSet {
            model,
            noise: noise.clone(),
            mu,
            l1,
            l2,
            hs,
        })
    }

    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    pub fn noise(&self) -> &NoiseSpec {
        &self.noise
    }

    pub fn mu(&self) -> SobolevIndex {
        self.mu
    }

    pub fn l1(&self) -> f64 {
        self.l1
    }

    pub fn l2(&self) -> f64 {
        self.l2
    }

    pub fn hs_norm(&self) -> &HsNorm {
        &self.hs
    }

    /// Largest `μ` for which the growth bounds are certified.
    pub fn mu_max(&self) -> f64 {
        self.model.drift.mu_max().min(self.model.diffusion.mu_max())
    }

    /// `α` when `F(u) = iαu` (with `F = 0` read as `α = 0`).
    pub fn linear_alpha(&self) -> Option<f64> {
        match self.model.drift {
            Drift::Zero => Some(0.0),
            Drift::LinearDamped { alpha } => Some(alpha),
            _ => None,
        }
    }

    pub fn is_linear_drift(&self) -> bool {
        self.linear_alpha().is_some()
    }

    pub fn is_additive(&self) -> bool {
        self.model.diffusion.additive_scale().is_some()
    }
}

/// `F(u)`. Linear drift is applied coefficient-wise without a transform.
pub fn apply_drift(cs: &CoefficientSet, u: &SpectralField) -> SpectralField {
    match cs.linear_alpha() {
        Some(alpha) => u.scaled(Complex64::new(0.0, alpha)),
        None => apply_drift_pointwise(cs, u),
    }
}

/// `F(u)` evaluated on the collocation grid, whatever the model.
pub fn apply_drift_pointwise(cs: &CoefficientSet, u: &SpectralField) -> SpectralField {
    let grid = u.grid();
    let mut values = u.to_grid();
    for (v, x) in values.iter_mut().zip(grid.points()) {
        *v = cs.model.drift.eval(x, *v);
    }
    SpectralField::from_grid_buffer(grid, &mut values)
}

/// `G(u) dW`. Additive diffusion returns a scaled copy of `dW`.
pub fn apply_diffusion_increment(cs: &CoefficientSet, u: &SpectralField, dw: &SpectralField) -> Result<SpectralField> {
    u.check_same_grid(dw)?;
    Ok(match cs.model.diffusion.additive_scale() {
        Some(1.0) => dw.clone(),
        Some(c) => dw.scaled(Complex64::new(c, 0.0)),
        None => diffusion_pointwise(&cs.model.diffusion, u, dw),
    })
}

/// `G(u) dW` on the collocation grid, whatever the model.
pub fn apply_diffusion_pointwise(cs: &CoefficientSet, u: &SpectralField, dw: &SpectralField) -> Result<SpectralField> {
    u.check_same_grid(dw)?;
    Ok(diffusion_pointwise(&cs.model.diffusion, u, dw))
}

fn diffusion_pointwise(g: &Diffusion, u: &SpectralField, dw: &SpectralField) -> SpectralField {
    let mut values = u.to_grid();
    for (v, w) in values.iter_mut().zip(dw.to_grid()) {
        *v = g.eval(*v) * w;
    }
    SpectralField::from_grid_buffer(u.grid(), &mut values)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Check {
    DriftLipschitz,
    DriftGrowth,
    DiffusionLipschitz,
    DiffusionGrowth,
    NoiseRegularity,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Check::DriftLipschitz => "drift Lipschitz",
            Check::DriftGrowth => "drift growth",
            Check::DiffusionLipschitz => "diffusion Lipschitz",
            Check::DiffusionGrowth => "diffusion growth",
            Check::NoiseRegularity => "noise regularity",
        };
        f.write_str(s)
    }
}

/// A sampled input pair for which a declared bound fails.
#[derive(Clone, Debug)]
pub struct AssumptionViolation {
    pub check: Check,
    pub observed: f64,
    pub declared: f64,
    pub witness: Option<(SpectralField, SpectralField)>,
    pub diagnostic: String,
}

impl fmt::Display for AssumptionViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: observed {:.6e} exceeds declared {:.6e}",
            self.check, self.observed, self.declared
        )?;
        if !self.diagnostic.is_empty() {
            write!(f, " ({})", self.diagnostic)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport {
    pub samples: usize,
    pub drift_lipschitz: f64,
    pub drift_growth: f64,
    pub diffusion_lipschitz: f64,
    pub diffusion_growth: f64,
}

/// `(‖G(u) Q^{1/2}‖_{HS,μ})` evaluated on the collocation grid.
fn diffusion_hs(g: &Diffusion, noise: &NoiseSpec, u: &SpectralField, mu: SobolevIndex) -> f64 {
    let grid = u.grid();
    let gu: Vec<Complex64> = u.to_grid().iter().map(|v| g.eval(*v)).collect();
    hs_of_multiplier(&gu, noise, grid, mu)
}

fn hs_of_multiplier(m: &[Complex64], noise: &NoiseSpec, grid: &FourierGrid, mu: SobolevIndex) -> f64 {
    let q = noise.restrict(grid).expect("noise covers the validation grid");
    let unit = NoiseSpec::from_table(grid, &vec![1.0; q.dofs()]).expect("unit table");
    let mut beta = vec![0.0; q.dofs()];
    let mut total = 0.0;
    for (dof, &qj) in q.eigenvalues().iter().enumerate() {
        if qj == 0.0 {
            continue;
        }
        beta.iter_mut().for_each(|b| *b = 0.0);
        beta[dof] = 1.0;
        let basis = unit.assemble(&beta, grid).expect("matching dof count");
        let mut values = basis.to_grid();
        for (v, w) in values.iter_mut().zip(m) {
            *v *= w;
        }
        let prod = SpectralField::from_grid_buffer(grid, &mut values);
        total += qj * prod.sobolev_norm(mu).powi(2);
    }
    total.sqrt()
}

/// Sample `samples` random pairs on `grid` and compare the worst observed ratios
/// against the declared constants at the set's `μ`.
pub fn validate_assumption<R: Rng + ?Sized>(
    cs: &CoefficientSet,
    grid: &FourierGrid,
    samples: usize,
    rng: &mut R,
) -> Result<ValidationReport> {
    let mu = cs.mu;
    if mu.value() > cs.mu_max() {
        return Err(Error::Unsupported(format!(
            "growth bounds are certified up to mu = {}, requested {}",
            cs.mu_max(),
            mu.value()
        )));
    }
    if cs.model.diffusion != Diffusion::Zero && !cs.hs.convergent {
        return Err(Error::Assumption(Box::new(AssumptionViolation {
            check: Check::NoiseRegularity,
            observed: f64::INFINITY,
            declared: cs.l2,
            witness: None,
            diagnostic: cs.hs.diagnostic.clone().unwrap_or_default(),
        })));
    }
    let tol = 1.0 + 1e-9;
    let mut report = ValidationReport {
        samples,
        drift_lipschitz: 0.0,
        drift_growth: 0.0,
        diffusion_lipschitz: 0.0,
        diffusion_growth: 0.0,
    };
    let decay = Decay::Power(mu.value() + 1.0);
    for _ in 0..samples {
        let su = 10f64.powf(rng.random_range(-2.0..1.0));
        let sv = 10f64.powf(rng.random_range(-2.0..1.0));
        let u = random_field(rng, decay, grid).scaled(Complex64::new(su, 0.0));
        let v = random_field(rng, decay, grid).scaled(Complex64::new(sv, 0.0));
        let diff = u.distance(&v)?;

        let fu = apply_drift_pointwise(cs, &u);
        let fv = apply_drift_pointwise(cs, &v);
        let lip = if diff > 0.0 { fu.distance(&fv)? / diff } else { 0.0 };
        let growth = fu.sobolev_norm(mu) / (1.0 + u.sobolev_norm(mu));
        report.drift_lipschitz = report.drift_lipschitz.max(lip);
        report.drift_growth = report.drift_growth.max(growth);
        let violation = |check, observed, declared| {
            Error::Assumption(Box::new(AssumptionViolation {
                check,
                observed,
                declared,
                witness: Some((u.clone(), v.clone())),
                diagnostic: String::new(),
            }))
        };
        if lip > cs.l1 * tol {
            return Err(violation(Check::DriftLipschitz, lip, cs.l1));
        }
        if growth > cs.l1 * tol {
            return Err(violation(Check::DriftGrowth, growth, cs.l1));
        }

        let g = &cs.model.diffusion;
        let (dlip, dgrowth) = match g.additive_scale() {
            Some(c) => (0.0, c.abs() * cs.hs.value / (1.0 + u.sobolev_norm(mu))),
            None => {
                let gu: Vec<Complex64> = u.to_grid().iter().map(|z| g.eval(*z)).collect();
                let gv: Vec<Complex64> = v.to_grid().iter().map(|z| g.eval(*z)).collect();
                let delta: Vec<Complex64> = gu.iter().zip(&gv).map(|(a, b)| a - b).collect();
                let dl = if diff > 0.0 {
                    hs_of_multiplier(&delta, &cs.noise, grid, SobolevIndex::L2) / diff
                } else {
                    0.0
                };
                (dl, diffusion_hs(g, &cs.noise, &u, mu) / (1.0 + u.sobolev_norm(mu)))
            }
        };
        report.diffusion_lipschitz = report.diffusion_lipschitz.max(dlip);
        report.diffusion_growth = report.diffusion_growth.max(dgrowth);
        if dlip > cs.l2 * tol {
            return Err(violation(Check::DiffusionLipschitz, dlip, cs.l2));
        }
        if dgrowth > cs.l2 * tol {
            return Err(violation(Check::DiffusionGrowth, dgrowth, cs.l2));
        }
    }
    Ok(report)
}
