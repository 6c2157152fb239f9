//! Moment curves `m ↦ ‖u_m‖_{L^p_ω Ḣ^μ}` and dyadic Hölder increments.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coefficients::{CoefficientSet, ModelSpec};
use crate::error::{Error, Result};
use crate::lab::fit::{fit_points, Axis, ConvergenceReport};
use crate::lab::plan::{FixedPointSettings, InitialCondition, NoiseChoice};
use crate::noise::{sample_path, PathSeed};
use crate::solver::{SolverConfig, Stepper};
use crate::spectral::{FourierGrid, SobolevIndex, SpectralField};
use crate::stats::lp_moment;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HolderSettings {
    /// Index `s` of the anchor state; defaults to `M / 2`.
    #[serde(default)]
    pub anchor: Option<usize>,
    /// Lags `h = 2^j τ` for each listed `j`.
    pub levels: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentPlan {
    pub name: String,
    pub model: ModelSpec,
    pub noise: NoiseChoice,
    pub initial: InitialCondition,
    pub eps: Vec<f64>,
    pub t_end: f64,
    pub steps: usize,
    pub k_cut: usize,
    pub paths: usize,
    pub seed: u64,
    pub p_moment: f64,
    /// Sobolev index of the moment norm.
    pub mu: f64,
    pub holder: Option<HolderSettings>,
    pub fixed_point: FixedPointSettings,
}

impl MomentPlan {
    pub fn grid(&self) -> FourierGrid {
        FourierGrid::one_dim(self.k_cut)
    }

    pub fn coefficients(&self) -> Result<CoefficientSet> {
        let mu = SobolevIndex::new(self.mu).map_err(|e| Error::Config(e.to_string()))?;
        CoefficientSet::new(self.model.clone(), &self.noise.spec(&self.grid())?, mu)
    }

    pub fn solver_config(&self, eps: f64) -> SolverConfig {
        SolverConfig {
            eps,
            t_end: self.t_end,
            steps: self.steps,
            k_cut: self.k_cut,
            fp_tol: self.fixed_point.tol,
            fp_max_iter: self.fixed_point.max_iter,
            seed: self.seed,
            p_moment: self.p_moment,
        }
    }

    fn anchor(&self) -> usize {
        self.holder.as_ref().and_then(|h| h.anchor).unwrap_or(self.steps / 2)
    }

    pub fn validate(&self) -> Result<()> {
        if self.paths < 2 {
            return Err(Error::Config(format!("paths must be >= 2, got {}", self.paths)));
        }
        if self.eps.is_empty() {
            return Err(Error::Config("eps list is empty".into()));
        }
        if let Some(h) = &self.holder {
            let s = self.anchor();
            for &j in &h.levels {
                let lag = 1usize.checked_shl(j).unwrap_or(usize::MAX);
                if s.checked_add(lag).is_none_or(|end| end > self.steps) {
                    return Err(Error::Config(format!(
                        "Hölder lag 2^{j} from anchor {s} runs past the last step {}",
                        self.steps
                    )));
                }
            }
        }
        let cs = self.coefficients()?;
        for &eps in &self.eps {
            self.solver_config(eps).validate(&cs)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MomentRow {
    /// `moment` for `‖u_m‖` at step `m`, `holder` for `‖u_{s+h} - u_s‖` at lag `h`.
    pub kind: &'static str,
    pub eps: f64,
    pub step: usize,
    /// Time `t_m` for moments, lag `h` for increments.
    pub time: f64,
    pub value: f64,
    pub stderr: f64,
    pub paths: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MomentLevel {
    pub eps: f64,
    /// `sup_m` of the moment curve.
    pub level: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MomentReport {
    pub rows: Vec<MomentRow>,
    pub levels: Vec<MomentLevel>,
    /// Slope of `log level` against `log ε`, when at least three `ε` are given.
    pub level_fit: Option<ConvergenceReport>,
    /// Smallest `C` with `level_m ≤ e^{-α t_m / ε}‖u_0‖ + C (αε)^{-1/2}` on every
    /// `(ε, m)`, for damped additive models.
    pub min_constant: Option<f64>,
    pub holder_fits: Vec<(f64, ConvergenceReport)>,
}

impl MomentReport {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

struct PathSample {
    norms: Vec<f64>,
    increments: Vec<f64>,
}

fn simulate(
    plan: &MomentPlan,
    stepper: &Stepper,
    u0: &SpectralField,
    path: &crate::noise::NoisePath,
    mu: SobolevIndex,
) -> Result<PathSample> {
    let anchor = plan.anchor();
    let ends: Vec<usize> = plan
        .holder
        .as_ref()
        .map(|h| h.levels.iter().map(|j| anchor + (1 << j)).collect())
        .unwrap_or_default();
    let mut norms = Vec::with_capacity(plan.steps + 1);
    norms.push(u0.sobolev_norm(mu));
    let mut base = (anchor == 0).then(|| u0.clone());
    let mut increments = vec![0.0; ends.len()];
    stepper.integrate_with(u0, path, |step, u| {
        norms.push(u.sobolev_norm(mu));
        if step == anchor {
            base = Some(u.clone());
        }
        if let Some(b) = &base {
            for (slot, &end) in increments.iter_mut().zip(&ends) {
                if end == step {
                    *slot = b.distance(u).unwrap_or(f64::NAN);
                }
            }
        }
    })?;
    Ok(PathSample { norms, increments })
}

pub fn moment_diagnostic(plan: &MomentPlan) -> Result<MomentReport> {
    plan.validate()?;
    let cs = plan.coefficients()?;
    let mu = cs.mu();
    let grid = plan.grid();
    let u0 = plan.initial.field(&grid)?;
    let u0_norm = u0.sobolev_norm(mu);
    let tau = plan.t_end / plan.steps as f64;
    let levels_j: Vec<u32> = plan.holder.as_ref().map(|h| h.levels.clone()).unwrap_or_default();
    let damped_additive = cs.is_additive() && cs.linear_alpha().is_some_and(|a| a > 0.0);

    let mut rows = Vec::new();
    let mut levels = Vec::new();
    let mut holder_fits = Vec::new();
    let mut min_constant: Option<f64> = None;
    for &eps in &plan.eps {
        let stepper = Stepper::new(&plan.solver_config(eps), &cs)?;
        let samples: Vec<PathSample> = (0..plan.paths)
            .into_par_iter()
            .map(|p| {
                let path = sample_path(
                    cs.noise(),
                    PathSeed::derive(plan.seed, p as u64),
                    plan.steps,
                    plan.t_end,
                )?;
                simulate(plan, &stepper, &u0, &path, mu).map_err(|e| Error::Path {
                    path: p,
                    source: Box::new(e),
                })
            })
            .collect::<Result<Vec<_>>>()?;

        let mut best = MomentLevel {
            eps,
            level: f64::NEG_INFINITY,
            stderr: 0.0,
        };
        for m in 0..=plan.steps {
            let column: Vec<f64> = samples.iter().map(|s| s.norms[m]).collect();
            let est = lp_moment(&column, plan.p_moment);
            let t = m as f64 * tau;
            if est.value > best.level {
                best.level = est.value;
                best.stderr = est.stderr;
            }
            if damped_additive {
                let alpha = cs.linear_alpha().unwrap_or(0.0);
                let envelope = (-alpha * t / eps).exp() * u0_norm;
                let c = ((est.value - envelope) * (alpha * eps).sqrt()).max(0.0);
                min_constant = Some(min_constant.map_or(c, |prev| prev.max(c)));
            }
            rows.push(MomentRow {
                kind: "moment",
                eps,
                step: m,
                time: t,
                value: est.value,
                stderr: est.stderr,
                paths: plan.paths,
            });
        }
        levels.push(best);

        if !levels_j.is_empty() {
            let mut lags = Vec::with_capacity(levels_j.len());
            let mut values = Vec::with_capacity(levels_j.len());
            for (i, &j) in levels_j.iter().enumerate() {
                let column: Vec<f64> = samples.iter().map(|s| s.increments[i]).collect();
                let est = lp_moment(&column, plan.p_moment);
                let lag = (1usize << j) as f64 * tau;
                lags.push(lag);
                values.push(est.value);
                rows.push(MomentRow {
                    kind: "holder",
                    eps,
                    step: plan.anchor() + (1 << j),
                    time: lag,
                    value: est.value,
                    stderr: est.stderr,
                    paths: plan.paths,
                });
            }
            if lags.len() >= 3 {
                holder_fits.push((eps, fit_points(Axis::Lag, &lags, &values)?));
            }
        }
    }

    let level_fit = if plan.eps.len() >= 3 {
        let xs: Vec<f64> = levels.iter().map(|l| l.eps).collect();
        let ys: Vec<f64> = levels.iter().map(|l| l.level).collect();
        Some(fit_points(Axis::Eps, &xs, &ys)?)
    } else {
        None
    };
    Ok(MomentReport {
        rows,
        levels,
        level_fit,
        min_constant,
        holder_fits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn damped() -> MomentPlan {
        MomentPlan {
            name: "unit".into(),
            model: ModelSpec::linear_damped(1.0),
            noise: NoiseChoice::Power { r: 2.0 },
            initial: InitialCondition::Zero,
            eps: vec![1.0, 0.5, 0.25],
            t_end: 4.0,
            steps: 512,
            k_cut: 8,
            paths: 200,
            seed: 5,
            p_moment: 2.0,
            mu: 0.0,
            holder: Some(HolderSettings {
                anchor: None,
                levels: vec![0, 1, 2, 3, 4],
            }),
            fixed_point: FixedPointSettings::default(),
        }
    }

    #[test]
    fn free_flow_preserves_norm() {
        let plan = MomentPlan {
            model: ModelSpec::free(),
            noise: NoiseChoice::Table { q: vec![] },
            initial: InitialCondition::Smooth { decay: 0.5 },
            eps: vec![0.5],
            steps: 64,
            paths: 2,
            holder: None,
            ..damped()
        };
        let report = moment_diagnostic(&plan).unwrap();
        let u0 = plan.initial.field(&plan.grid()).unwrap().norm();
        for row in &report.rows {
            assert!((row.value - u0).abs() <= 1e-13 * u0, "{row:?}");
        }
        assert!((report.levels[0].level - u0).abs() <= 1e-13 * u0);
    }

    #[test]
    fn damped_level_scales_like_inverse_sqrt_eps() {
        let report = moment_diagnostic(&damped()).unwrap();
        let fit = report.level_fit.clone().unwrap().with_expectation(-0.5, 0.2);
        assert_eq!(fit.pass, Some(true), "slope {}", fit.slope);
        assert!(report.min_constant.unwrap() > 0.0);
        for (eps, f) in &report.holder_fits {
            let f = f.clone().with_expectation(0.5, 0.15);
            assert_eq!(f.pass, Some(true), "eps {eps}: slope {}", f.slope);
        }
    }

    #[test]
    fn lag_past_horizon_rejected() {
        let mut plan = damped();
        plan.holder = Some(HolderSettings {
            anchor: Some(500),
            levels: vec![4],
        });
        assert!(matches!(plan.validate(), Err(Error::Config(_))));
    }
}
