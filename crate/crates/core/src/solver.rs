//! Implicit midpoint / spectral Galerkin time stepping.
//!
//! One step solves
//! `u⁺ = S_τ u + iτε⁻¹ T_τ F((u + u⁺)/2) - iε⁻¹ T_τ G(u) δW`
//! on the truncated space. Linear drift `F = iαu` with additive noise has the
//! closed form `u⁺_k = (1 + z_k/2)/(1 - z_k/2) u_k - iε⁻¹ (1 - z_k/2)⁻¹ δW_k`,
//! `z_k = τ(-iελ_k/2 - α/ε)`, which is used directly. Everything else goes
//! through Picard iteration started at `u`.

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::coefficients::{apply_diffusion_increment, apply_drift, CoefficientSet};
use crate::error::{Error, Result};
use crate::noise::NoisePath;
use crate::semigroup::CayleyParams;
use crate::spectral::{FourierGrid, SpectralField};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub eps: f64,
    pub t_end: f64,
    pub steps: usize,
    pub k_cut: usize,
    #[serde(default = "default_fp_tol")]
    pub fp_tol: f64,
    #[serde(default = "default_fp_max_iter")]
    pub fp_max_iter: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_p_moment")]
    pub p_moment: f64,
}

pub(crate) fn default_fp_tol() -> f64 {
    1e-13
}

pub(crate) fn default_fp_max_iter() -> usize {
    100
}

pub(crate) fn default_p_moment() -> f64 {
    2.0
}

impl SolverConfig {
    pub fn new(eps: f64, t_end: f64, steps: usize, k_cut: usize) -> Self {
        SolverConfig {
            eps,
            t_end,
            steps,
            k_cut,
            fp_tol: default_fp_tol(),
            fp_max_iter: default_fp_max_iter(),
            seed: 0,
            p_moment: default_p_moment(),
        }
    }

    pub fn tau(&self) -> f64 {
        self.t_end / self.steps as f64
    }

    /// Check every precondition that can be checked before stepping.
    pub fn validate(&self, cs: &CoefficientSet) -> Result<()> {
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::Config(format!("eps must be positive, got {}", self.eps)));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::Config(format!("horizon must be positive, got {}", self.t_end)));
        }
        if self.steps == 0 {
            return Err(Error::Config("step count must be >= 1".into()));
        }
        let tau = self.tau();
        if !(tau > 0.0 && tau < 1.0) {
            return Err(Error::Config(format!("step size T/M = {tau} must lie in (0, 1)")));
        }
        if !(self.fp_tol > 0.0) || self.fp_max_iter == 0 {
            return Err(Error::Config(
                "fixed-point tolerance and iteration cap must be positive".into(),
            ));
        }
        if !(self.p_moment >= 2.0 && self.p_moment.is_finite()) {
            return Err(Error::Config(format!(
                "moment order must be >= 2, got {}",
                self.p_moment
            )));
        }
        if !cs.is_linear_drift() {
            let limit = self.eps * (1.0f64).min(1.0 / cs.l1());
            if tau >= limit {
                return Err(Error::Config(format!(
                    "step size {tau} violates the contraction gate tau < eps * min(1, 1/L1) = {limit} \
                     (tau L1 / (2 eps) = {:.3})",
                    tau * cs.l1() / (2.0 * self.eps)
                )));
            }
        }
        Ok(())
    }
}

/// Outcome of a converged fixed-point iteration.
#[derive(Clone, Debug)]
pub struct FixedPoint {
    pub value: SpectralField,
    pub iterations: usize,
    pub residuals: Vec<f64>,
}

/// Picard iteration `x ← map(x)` until `‖map(x) - x‖ ≤ tol (1 + ‖x‖)`.
/// The returned point is the last `x`, which satisfies that inequality.
pub fn fixed_point_solve(
    mut map: impl FnMut(&SpectralField) -> SpectralField,
    initial: SpectralField,
    tol: f64,
    max_iter: usize,
) -> Result<FixedPoint> {
    let mut x = initial;
    let mut residuals = Vec::new();
    for updates in 0..=max_iter {
        let y = map(&x);
        let r = y.distance(&x)?;
        residuals.push(r);
        if r <= tol * (1.0 + x.norm()) {
            return Ok(FixedPoint {
                value: x,
                iterations: updates,
                residuals,
            });
        }
        if !r.is_finite() {
            break;
        }
        x = y;
    }
    Err(Error::FixedPoint {
        iterations: residuals.len().saturating_sub(1),
        last_residual: residuals.last().copied().unwrap_or(f64::NAN),
        history: residuals,
    })
}

struct FastPath {
    factor: Vec<Complex64>,
    noise: Vec<Complex64>,
}

impl FastPath {
    #[inline]
    fn apply(&self, u: &mut [Complex64], dw: &[Complex64]) {
        for (((v, w), f), n) in u.iter_mut().zip(dw).zip(&self.factor).zip(&self.noise) {
            *v = f * *v + n * w;
        }
    }
}

/// Precomputed one-step operators on the truncated grid.
pub struct Stepper {
    cfg: SolverConfig,
    cs: CoefficientSet,
    grid: FourierGrid,
    cayley: Vec<Complex64>,
    resolvent: Vec<Complex64>,
    fast: Option<FastPath>,
}

impl Stepper {
    /// Uses the closed form whenever the model allows it.
    pub fn new(cfg: &SolverConfig, cs: &CoefficientSet) -> Result<Self> {
        let mut s = Self::generic(cfg, cs)?;
        if let (Some(alpha), Some(scale)) = (cs.linear_alpha(), cs.model().diffusion.additive_scale()) {
            let (eps, tau) = (cfg.eps, cfg.tau());
            let (factor, noise) = s
                .grid
                .eigenvalues()
                .iter()
                .map(|&lam| {
                    let half_z = Complex64::new(-alpha / eps, -0.5 * eps * lam) * (0.5 * tau);
                    let denom = Complex64::new(1.0, 0.0) - half_z;
                    let f = (Complex64::new(1.0, 0.0) + half_z) / denom;
                    let n = Complex64::new(0.0, -scale / eps) / denom;
                    (f, n)
                })
                .unzip();
            s.fast = Some(FastPath { factor, noise });
        }
        Ok(s)
    }

    /// Always goes through the fixed-point map and grid-free operator algebra.
    pub fn generic(cfg: &SolverConfig, cs: &CoefficientSet) -> Result<Self> {
        cfg.validate(cs)?;
        if cfg.k_cut > cs.noise().grid().half_bandwidth() {
            return Err(Error::Config(format!(
                "truncation K = {} exceeds the noise bandwidth {}",
                cfg.k_cut,
                cs.noise().grid().half_bandwidth()
            )));
        }
        let grid = FourierGrid::new(cs.noise().grid().dim(), cfg.k_cut)?;
        let c = CayleyParams::new(cfg.eps, cfg.tau(), 1)?;
        let cayley = grid.eigenvalues().iter().map(|&l| c.step_factor(l)).collect();
        let resolvent = grid.eigenvalues().iter().map(|&l| c.resolvent_factor(l)).collect();
        Ok(Stepper {
            cfg: cfg.clone(),
            cs: cs.clone(),
            grid,
            cayley,
            resolvent,
            fast: None,
        })
    }

    pub fn grid(&self) -> &FourierGrid {
        &self.grid
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn is_fast(&self) -> bool {
        self.fast.is_some()
    }

    /// One step; returns `u_{m+1}` and the number of Picard updates (0 on the fast path).
    pub fn step(&self, u: &SpectralField, dw: &SpectralField) -> Result<(SpectralField, usize)> {
        if u.grid() != &self.grid {
            return Err(Error::invalid("state is not on the solver grid"));
        }
        u.check_same_grid(dw)?;
        if let Some(fast) = &self.fast {
            let mut next = u.clone();
            fast.apply(next.coeffs_mut(), dw.coeffs());
            return Ok((next, 0));
        }
        let eps = self.cfg.eps;
        let tau = self.cfg.tau();
        let noise = apply_diffusion_increment(&self.cs, u, dw)?;
        let mut base = u.clone();
        for (((b, g), s), t) in base
            .coeffs_mut()
            .iter_mut()
            .zip(noise.coeffs())
            .zip(&self.cayley)
            .zip(&self.resolvent)
        {
            *b = s * *b - Complex64::new(0.0, 1.0 / eps) * t * g;
        }
        let drift_scale = Complex64::new(0.0, tau / eps);
        let map = |x: &SpectralField| {
            let mut mid = u.clone();
            for (m, xv) in mid.coeffs_mut().iter_mut().zip(x.coeffs()) {
                *m = 0.5 * (*m + xv);
            }
            let f = apply_drift(&self.cs, &mid);
            let mut out = base.clone();
            for ((o, fv), t) in out.coeffs_mut().iter_mut().zip(f.coeffs()).zip(&self.resolvent) {
                *o += drift_scale * t * fv;
            }
            out
        };
        let fp = fixed_point_solve(map, u.clone(), self.cfg.fp_tol, self.cfg.fp_max_iter)?;
        Ok((fp.value, fp.iterations))
    }

    /// Integrate from `u0` over the coarse grid `M = cfg.steps`, drawing
    /// `δ_m W` from `path` with `refinement = M_fine / M`. The observer sees the
    /// state after every step (index `m + 1`).
    pub fn integrate_with(
        &self,
        u0: &SpectralField,
        path: &NoisePath,
        mut observer: impl FnMut(usize, &SpectralField),
    ) -> Result<(SpectralField, Vec<usize>)> {
        let m = self.cfg.steps;
        if !path.fine_steps().is_multiple_of(m) {
            return Err(Error::invalid(format!(
                "{m} coarse steps do not divide the {} fine noise steps",
                path.fine_steps()
            )));
        }
        let horizon = path.horizon();
        if (horizon - self.cfg.t_end).abs() > 1e-12 * self.cfg.t_end {
            return Err(Error::invalid(format!(
                "noise horizon {horizon} differs from solver horizon {}",
                self.cfg.t_end
            )));
        }
        if u0.grid() != &self.grid {
            return Err(Error::invalid(format!(
                "initial datum has bandwidth {}, solver uses {}",
                u0.grid().half_bandwidth(),
                self.grid.half_bandwidth()
            )));
        }
        let refinement = path.fine_steps() / m;
        let dofs = path.spec().dofs();
        let mut beta = vec![0.0; dofs];
        let mut scratch = vec![0.0; dofs];
        let mut dw = SpectralField::zeros(&self.grid);
        let mut u = u0.clone();
        let mut iterations = Vec::with_capacity(m);
        for step in 0..m {
            path.coarse_brownian_into(step, refinement, &mut beta, &mut scratch);
            path.spec().assemble_into(&beta, &self.grid, dw.coeffs_mut());
            let it = match &self.fast {
                Some(fast) => {
                    fast.apply(u.coeffs_mut(), dw.coeffs());
                    0
                }
                None => {
                    let (next, it) = self.step(&u, &dw).map_err(|e| Error::Step {
                        step,
                        source: Box::new(e),
                    })?;
                    u = next;
                    it
                }
            };
            iterations.push(it);
            observer(step + 1, &u);
        }
        Ok((u, iterations))
    }

    /// Integrate and keep snapshots at `t = 0`, every `every` steps, and at `T`.
    pub fn integrate(&self, u0: &SpectralField, path: &NoisePath, every: usize) -> Result<Trajectory> {
        let tau = self.cfg.tau();
        let m = self.cfg.steps;
        let mut times = vec![0.0];
        let mut snapshots = vec![u0.clone()];
        let (_, iterations) = self.integrate_with(u0, path, |step, u| {
            if (every > 0 && step % every == 0) || step == m {
                times.push(step as f64 * tau);
                snapshots.push(u.clone());
            }
        })?;
        Ok(Trajectory {
            times,
            snapshots,
            iterations,
        })
    }
}

/// Terminal state on the reference resolution of `cfg_ref`.
pub fn reference_solve(
    u0: &SpectralField,
    path: &NoisePath,
    cfg_ref: &SolverConfig,
    cs: &CoefficientSet,
) -> Result<SpectralField> {
    let stepper = Stepper::new(cfg_ref, cs)?;
    let start = u0.restrict(stepper.grid()).or_else(|_| u0.embed(stepper.grid()))?;
    Ok(stepper.integrate_with(&start, path, |_, _| {})?.0)
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub snapshots: Vec<SpectralField>,
    pub iterations: Vec<usize>,
}

impl Trajectory {
    pub fn terminal(&self) -> &SpectralField {
        self.snapshots
            .last()
            .expect("trajectory holds at least the initial state")
    }

    /// `t,k,re,im` rows.
    pub fn write_modes_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["t", "k", "re", "im"])?;
        for (t, u) in self.times.iter().zip(&self.snapshots) {
            for (s, c) in u.coeffs().iter().enumerate() {
                w.write_record([
                    t.to_string(),
                    u.grid().wavenumber(s).to_string(),
                    c.re.to_string(),
                    c.im.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// `t,x,density` rows with `density = |u(x)|²` on the collocation grid.
    pub fn write_density_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["t", "x", "density"])?;
        for (t, u) in self.times.iter().zip(&self.snapshots) {
            for (x, v) in u.grid().points().iter().zip(u.to_grid()) {
                w.write_record([t.to_string(), x.to_string(), v.norm_sqr().to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{Diffusion, Drift, ModelSpec};
    use crate::noise::{sample_path, NoiseSpec, PathSeed};
    use crate::semigroup::apply_cayley;
    use crate::spectral::{random_field, Decay, SobolevIndex};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn coefficient_set(model: ModelSpec, k: usize, r: f64) -> CoefficientSet {
        let noise = NoiseSpec::power_family(&FourierGrid::one_dim(k), r).unwrap();
        CoefficientSet::new(model, &noise, SobolevIndex::L2).unwrap()
    }

    fn zero_noise_set(model: ModelSpec, k: usize) -> CoefficientSet {
        let noise = NoiseSpec::zero(&FourierGrid::one_dim(k));
        CoefficientSet::new(model, &noise, SobolevIndex::L2).unwrap()
    }

    #[test]
    fn constant_map_returns_in_one_update() {
        let grid = FourierGrid::one_dim(2);
        let c = SpectralField::unit_mode(&grid, 1)
            .unwrap()
            .scaled(Complex64::new(3.0, -1.0));
        let fp = fixed_point_solve(|_| c.clone(), SpectralField::zeros(&grid), 1e-14, 10).unwrap();
        assert_eq!(fp.value, c);
        assert_eq!(fp.iterations, 1);
    }

    #[test]
    fn linear_contraction_halves_error() {
        let grid = FourierGrid::one_dim(2);
        let b = SpectralField::unit_mode(&grid, 0).unwrap();
        let map = |x: &SpectralField| x.scaled(Complex64::new(0.5, 0.0)).add(&b).unwrap();
        let fp = fixed_point_solve(map, SpectralField::zeros(&grid), 1e-12, 100).unwrap();
        let target = b.scaled(Complex64::new(2.0, 0.0));
        assert!(fp.value.distance(&target).unwrap() < 1e-11);
        for w in fp.residuals.windows(2) {
            assert!((w[1] / w[0] - 0.5).abs() < 1e-9);
        }
    }

    #[test]
    fn divergent_map_reports_history() {
        let grid = FourierGrid::one_dim(1);
        let b = SpectralField::unit_mode(&grid, 0).unwrap();
        let map = |x: &SpectralField| x.scaled(Complex64::new(2.0, 0.0)).add(&b).unwrap();
        match fixed_point_solve(map, SpectralField::zeros(&grid), 1e-12, 5) {
            Err(Error::FixedPoint {
                iterations, history, ..
            }) => {
                assert_eq!(iterations, 5);
                assert_eq!(history.len(), 6);
            }
            other => panic!("expected failure, got {other:?}"),
        }
    }

    #[test]
    fn free_evolution_is_the_cayley_step() {
        let cs = zero_noise_set(ModelSpec::free(), 8);
        let cfg = SolverConfig::new(0.5, 1.0, 1000, 8);
        let stepper = Stepper::generic(&cfg, &cs).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u0 = random_field(&mut rng, Decay::Power(0.5), stepper.grid());
        let zero = SpectralField::zeros(stepper.grid());
        let (u1, _) = stepper.step(&u0, &zero).unwrap();
        let c = CayleyParams::new(0.5, 1e-3, 1).unwrap();
        assert_eq!(u1, apply_cayley(&u0, &c));
        let mut u = u0.clone();
        let mass0 = u0.norm();
        for _ in 0..1000 {
            let prev = u.norm();
            u = stepper.step(&u, &zero).unwrap().0;
            assert!((u.norm() - prev).abs() <= 1e-13 * mass0);
        }
    }

    #[test]
    fn linear_fast_path_matches_scalar_relation() {
        let (eps, alpha, tau) = (0.5, 1.0, 0.01);
        let cs = zero_noise_set(ModelSpec::linear_damped(alpha), 6);
        let cfg = SolverConfig::new(eps, 1.0, 100, 6);
        let stepper = Stepper::new(&cfg, &cs).unwrap();
        assert!(stepper.is_fast());
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let u = random_field(&mut rng, Decay::Power(0.5), stepper.grid());
        let (next, _) = stepper.step(&u, &SpectralField::zeros(stepper.grid())).unwrap();
        for s in 0..stepper.grid().len() {
            let lam = stepper.grid().eigenvalues()[s];
            let z = Complex64::new(-alpha / eps, -eps * lam / 2.0) * tau;
            let expected = (1.0 + z / 2.0) / (1.0 - z / 2.0) * u.coeffs()[s];
            assert!((next.coeffs()[s] - expected).norm() <= 1e-14 * (1.0 + expected.norm()));
        }
    }

    #[test]
    fn origin_is_fixed_for_vanishing_models() {
        for drift in [
            Drift::Zero,
            Drift::Saturated { gamma: 1.0 },
            Drift::LinearDamped { alpha: 2.0 },
        ] {
            let cs = coefficient_set(
                ModelSpec {
                    drift,
                    diffusion: Diffusion::Saturating,
                },
                4,
                2.0,
            );
            let cfg = SolverConfig::new(1.0, 1.0, 10, 4);
            let stepper = Stepper::new(&cfg, &cs).unwrap();
            let zero = SpectralField::zeros(stepper.grid());
            let (next, _) = stepper.step(&zero, &zero).unwrap();
            assert_eq!(next.norm(), 0.0);
        }
    }

    #[test]
    fn fast_and_generic_paths_agree() {
        let cs = coefficient_set(ModelSpec::linear_damped(1.0), 16, 1.5);
        let cfg = SolverConfig::new(0.5, 1.0, 200, 16);
        let path = sample_path(cs.noise(), PathSeed::derive(3, 0), 200, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let grid = FourierGrid::one_dim(16);
        let u0 = random_field(&mut rng, Decay::Power(1.0), &grid);
        let fast = Stepper::new(&cfg, &cs).unwrap().integrate(&u0, &path, 0).unwrap();
        let generic = Stepper::generic(&cfg, &cs).unwrap().integrate(&u0, &path, 0).unwrap();
        let gap = fast.terminal().distance(generic.terminal()).unwrap();
        assert!(gap < 1e-11, "gap {gap}");
    }

    #[test]
    fn damped_additive_matches_modewise_recursion() {
        let (eps, alpha) = (0.5, 1.0);
        let cs = coefficient_set(ModelSpec::linear_damped(alpha), 8, 1.5);
        let m = 1000;
        let cfg = SolverConfig::new(eps, 1.0, m, 8);
        let path = sample_path(cs.noise(), PathSeed::derive(5, 0), 2 * m, 1.0).unwrap();
        let grid = FourierGrid::one_dim(8);
        let u0 = SpectralField::unit_mode(&grid, 1).unwrap();
        let (u, _) = Stepper::new(&cfg, &cs)
            .unwrap()
            .integrate_with(&u0, &path, |_, _| {})
            .unwrap();

        let tau = 1.0 / m as f64;
        let mut oracle: Vec<Complex64> = u0.coeffs().to_vec();
        for step in 0..m {
            let dw = path.coarse_increment_on(step, 2, &grid).unwrap();
            for (s, v) in oracle.iter_mut().enumerate() {
                let lam = grid.eigenvalues()[s];
                let x = eps * tau * lam / 4.0;
                let t = 1.0 / Complex64::new(1.0 + alpha * tau / (2.0 * eps), x);
                let factor = Complex64::new(1.0 - alpha * tau / (2.0 * eps), -x) * t;
                *v = factor * *v - Complex64::new(0.0, 1.0 / eps) * t * dw.coeffs()[s];
            }
        }
        let oracle = SpectralField::from_coeffs(&grid, oracle).unwrap();
        assert!(u.distance(&oracle).unwrap() < 1e-10);
    }

    #[test]
    fn saturated_midpoint_converges_quickly() {
        let eps = 0.5;
        let cs = coefficient_set(
            ModelSpec {
                drift: Drift::Saturated { gamma: 1.0 },
                diffusion: Diffusion::Saturating,
            },
            8,
            1.5,
        );
        let mut cfg = SolverConfig::new(eps, 0.5, 10, 8);
        assert!((cfg.tau() - eps / 10.0).abs() < 1e-15);
        cfg.fp_tol = 1e-12;
        cfg.fp_max_iter = 25;
        let path = sample_path(cs.noise(), PathSeed::derive(8, 1), 10, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let u0 = random_field(&mut rng, Decay::Power(1.0), &FourierGrid::one_dim(8));
        let traj = Stepper::new(&cfg, &cs).unwrap().integrate(&u0, &path, 1).unwrap();
        assert!(traj.iterations.iter().all(|&it| (1..=25).contains(&it)));
        assert_eq!(traj.snapshots.len(), 11);
    }

    #[test]
    fn contraction_gate_rejects_large_steps() {
        let cs = coefficient_set(
            ModelSpec {
                drift: Drift::Saturated { gamma: 1.0 },
                diffusion: Diffusion::Zero,
            },
            4,
            2.0,
        );
        let cfg = SolverConfig::new(0.1, 1.0, 10, 4);
        assert!(matches!(Stepper::new(&cfg, &cs), Err(Error::Config(_))));
        let ok = SolverConfig::new(0.1, 1.0, 40, 4);
        assert!(Stepper::new(&ok, &cs).is_ok());
        let big_tau = SolverConfig::new(0.1, 2.0, 1, 4);
        assert!(big_tau.validate(&coefficient_set(ModelSpec::free(), 4, 2.0)).is_err());
    }

    #[test]
    fn single_step_integration_is_one_step() {
        let cs = coefficient_set(ModelSpec::linear_damped(1.0), 4, 2.0);
        let cfg = SolverConfig::new(0.5, 0.5, 1, 4);
        let path = sample_path(cs.noise(), PathSeed::derive(9, 9), 4, 0.5).unwrap();
        let stepper = Stepper::new(&cfg, &cs).unwrap();
        let u0 = SpectralField::unit_mode(stepper.grid(), 2).unwrap();
        let traj = stepper.integrate(&u0, &path, 0).unwrap();
        let dw = path.coarse_increment_on(0, 4, stepper.grid()).unwrap();
        assert_eq!(traj.terminal(), &stepper.step(&u0, &dw).unwrap().0);
        assert_eq!(traj.times, vec![0.0, 0.5]);
    }

    #[test]
    fn refinement_gap_shrinks_along_ladder() {
        let cs = coefficient_set(ModelSpec::linear_damped(1.0), 8, 2.0);
        let path = sample_path(cs.noise(), PathSeed::derive(10, 0), 64, 1.0).unwrap();
        let grid = FourierGrid::one_dim(8);
        let u0 = SpectralField::unit_mode(&grid, 1).unwrap();
        let run = |m: usize| {
            let cfg = SolverConfig::new(0.5, 1.0, m, 8);
            Stepper::new(&cfg, &cs)
                .unwrap()
                .integrate_with(&u0, &path, |_, _| {})
                .unwrap()
                .0
        };
        let gaps: Vec<f64> = [4, 8, 16]
            .iter()
            .map(|&m| run(m).distance(&run(2 * m)).unwrap())
            .collect();
        assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2], "{gaps:?}");
    }

    #[test]
    fn reference_compared_with_itself_is_exact() {
        let cs = coefficient_set(ModelSpec::linear_damped(1.0), 8, 2.0);
        let cfg = SolverConfig::new(0.5, 1.0, 16, 8);
        let path = sample_path(cs.noise(), PathSeed::derive(1, 1), 16, 1.0).unwrap();
        let u0 = SpectralField::unit_mode(&FourierGrid::one_dim(8), 0).unwrap();
        let a = reference_solve(&u0, &path, &cfg, &cs).unwrap();
        let b = reference_solve(&u0, &path, &cfg, &cs).unwrap();
        assert_eq!(a.distance(&b).unwrap(), 0.0);
    }

    #[test]
    fn trajectory_csv_has_expected_rows() {
        let cs = zero_noise_set(ModelSpec::free(), 2);
        let cfg = SolverConfig::new(1.0, 0.5, 2, 2);
        let path = sample_path(cs.noise(), PathSeed::derive(0, 0), 2, 0.5).unwrap();
        let stepper = Stepper::new(&cfg, &cs).unwrap();
        let u0 = SpectralField::unit_mode(stepper.grid(), 0).unwrap();
        let traj = stepper.integrate(&u0, &path, 1).unwrap();
        let mut modes = Vec::new();
        traj.write_modes_csv(&mut modes).unwrap();
        assert_eq!(String::from_utf8(modes).unwrap().lines().count(), 1 + 3 * 5);
        let mut density = Vec::new();
        traj.write_density_csv(&mut density).unwrap();
        let text = String::from_utf8(density).unwrap();
        assert_eq!(text.lines().count(), 1 + 3 * 5);
        assert!(text.lines().nth(1).unwrap().ends_with(",1"));
    }
}
