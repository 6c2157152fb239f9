//! Monte Carlo strong error with common-noise coupling.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lab::plan::{ErrorNorm, ExperimentPlan, LadderPoint};
use crate::noise::{sample_path, NoisePath, PathSeed};
use crate::solver::Stepper;
use crate::spectral::SpectralField;
use crate::stats::lp_moment;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ErrorRow {
    pub eps: f64,
    pub k_cut: usize,
    /// `N = 2K + 1`.
    pub modes: usize,
    pub steps: usize,
    pub tau: f64,
    pub error: f64,
    pub stderr: f64,
    pub paths: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ErrorTable {
    pub rows: Vec<ErrorRow>,
}

impl ErrorTable {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn for_eps(&self, eps: f64) -> Vec<ErrorRow> {
        self.rows.iter().filter(|r| r.eps == eps).cloned().collect()
    }
}

/// `‖embed(coarse) - fine‖` without materializing the padded field.
pub fn cross_distance(coarse: &SpectralField, fine: &SpectralField) -> Result<f64> {
    let (kc, kf) = (coarse.grid().half_bandwidth(), fine.grid().half_bandwidth());
    if kc > kf {
        return Err(Error::invalid(format!(
            "coarse bandwidth {kc} exceeds reference bandwidth {kf}"
        )));
    }
    let offset = kf - kc;
    let f = fine.coeffs();
    let mut sum: f64 = f[..offset]
        .iter()
        .chain(&f[f.len() - offset..])
        .map(|c| c.norm_sqr())
        .sum();
    sum += coarse
        .coeffs()
        .iter()
        .zip(&f[offset..f.len() - offset])
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>();
    Ok(sum.sqrt())
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Coarse sums of every ladder refinement reproduce the fine total bitwise.
pub fn check_coupling(path: &NoisePath, ladder: &[LadderPoint]) -> Result<()> {
    let mut fine = vec![0.0; path.spec().dofs()];
    for i in 0..path.fine_steps() {
        for (t, v) in fine.iter_mut().zip(path.fine_increment(i)?) {
            *t += v;
        }
    }
    for p in ladder {
        let r = path.fine_steps() / p.steps;
        let mut total = vec![0.0; fine.len()];
        for m in 0..p.steps {
            for (t, v) in total.iter_mut().zip(path.coarse_brownian(m, r)?) {
                *t += v;
            }
        }
        if total != fine {
            return Err(Error::invalid(format!(
                "coarse increments for M = {} do not telescope onto the fine path",
                p.steps
            )));
        }
    }
    Ok(())
}

struct EpsSolvers {
    reference: Stepper,
    ladder: Vec<Stepper>,
}

/// Error of every ladder point against the reference, for every `ε`, along one path.
fn path_errors(
    plan: &ExperimentPlan,
    solvers: &[EpsSolvers],
    u0_ref: &SpectralField,
    u0_ladder: &[SpectralField],
    path: &NoisePath,
) -> Result<Vec<f64>> {
    let m_ref = plan.reference.steps;
    let stride = plan.ladder.iter().map(|p| m_ref / p.steps).fold(0, gcd).max(1);
    let mut out = Vec::with_capacity(solvers.len() * plan.ladder.len());
    for s in solvers {
        let mut history: Vec<SpectralField> = Vec::new();
        let record = plan.norm == ErrorNorm::Sup;
        if record {
            history.push(u0_ref.clone());
        }
        let (reference, _) = s.reference.integrate_with(u0_ref, path, |step, u| {
            if record && step % stride == 0 {
                history.push(u.clone());
            }
        })?;
        for ((stepper, point), u0) in s.ladder.iter().zip(&plan.ladder).zip(u0_ladder) {
            let err = match plan.norm {
                ErrorNorm::Terminal => {
                    let (u, _) = stepper.integrate_with(u0, path, |_, _| {})?;
                    cross_distance(&u, &reference)?
                }
                ErrorNorm::Sup => {
                    let ratio = (m_ref / point.steps) / stride;
                    let mut worst = cross_distance(u0, &history[0])?;
                    let mut failure = None;
                    stepper.integrate_with(u0, path, |step, u| match cross_distance(u, &history[step * ratio]) {
                        Ok(d) => worst = worst.max(d),
                        Err(e) => failure = Some(e),
                    })?;
                    if let Some(e) = failure {
                        return Err(e);
                    }
                    worst
                }
            };
            out.push(err);
        }
    }
    Ok(out)
}

/// Strong error table for `plan`. Per-path results are gathered in path order
/// and reduced sequentially, so the table does not depend on the thread count.
pub fn strong_error(plan: &ExperimentPlan) -> Result<ErrorTable> {
    plan.validate()?;
    let cs = plan.coefficients()?;
    let noise = cs.noise().clone();
    let ref_grid = plan.reference_grid();
    let u0_ref = plan.initial.field(&ref_grid)?;
    let mut solvers = Vec::with_capacity(plan.eps.len());
    for &eps in &plan.eps {
        let reference = Stepper::new(&plan.solver_config(eps, plan.reference), &cs)?;
        let ladder = plan
            .ladder
            .iter()
            .map(|p| Stepper::new(&plan.solver_config(eps, *p), &cs))
            .collect::<Result<Vec<_>>>()?;
        solvers.push(EpsSolvers { reference, ladder });
    }
    let u0_ladder = solvers[0]
        .ladder
        .iter()
        .map(|s| u0_ref.restrict(s.grid()))
        .collect::<Result<Vec<_>>>()?;

    let draw = |p: usize| {
        sample_path(
            &noise,
            PathSeed::derive(plan.seed, p as u64),
            plan.reference.steps,
            plan.t_end,
        )
    };
    check_coupling(&draw(0)?, &plan.ladder)?;

    let per_path: Vec<Vec<f64>> = (0..plan.paths)
        .into_par_iter()
        .map(|p| {
            let path = draw(p)?;
            path_errors(plan, &solvers, &u0_ref, &u0_ladder, &path).map_err(|e| Error::Path {
                path: p,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::with_capacity(per_path[0].len());
    let mut column = 0;
    for &eps in &plan.eps {
        for point in &plan.ladder {
            let samples: Vec<f64> = per_path.iter().map(|v| v[column]).collect();
            let est = lp_moment(&samples, plan.p_moment);
            rows.push(ErrorRow {
                eps,
                k_cut: point.k_cut,
                modes: point.modes(),
                steps: point.steps,
                tau: plan.t_end / point.steps as f64,
                error: est.value,
                stderr: est.stderr,
                paths: plan.paths,
            });
            column += 1;
        }
    }
    Ok(ErrorTable { rows })
}
