//! Q-Wiener noise: covariance spectrum, Hilbert–Schmidt checks and sampled
//! increment lattices with exact coarse/fine coupling.
//!
//! The real orthonormal basis is `{1, √2 cos(2πkx), √2 sin(2πkx)}`. Real degrees
//! of freedom are stored as `[g_0, cos_1, sin_1, cos_2, sin_2, ...]`, so a spec on
//! a grid of half-bandwidth `K` has exactly `2K + 1` of them, one per grid point.
//!
//! Increments are quantized to a power-of-two lattice. Sums of lattice values are
//! exact in binary floating point, which makes coarse increments telescope
//! bitwise onto the fine ones regardless of summation order.

use std::f64::consts::FRAC_1_SQRT_2;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::spectral::{norm_weight, FourierGrid, SobolevIndex, SpectralField};

/// Paths whose full increment lattice stays below this many reals are cached.
const CACHE_LIMIT: usize = 1 << 22;

/// Extra binary digits kept below `√τ` when quantizing increments.
const QUANT_BITS: i32 = 40;

/// Diagonal covariance `Q` in the real Fourier basis.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseSpec {
    grid: FourierGrid,
    q: Vec<f64>,
    decay: Option<f64>,
}

impl NoiseSpec {
    /// `q = (1 + λ_k)^{-r}` on every real basis function (so `q_0 = 1`).
    pub fn power_family(grid: &FourierGrid, r: f64) -> Result<Self> {
        if !r.is_finite() || r < 0.0 {
            return Err(Error::invalid(format!("noise decay must be finite and >= 0, got {r}")));
        }
        let q = (0..grid.len())
            .map(|dof| (1.0 + dof_eigenvalue(dof)).powf(-r))
            .collect();
        Ok(NoiseSpec {
            grid: grid.clone(),
            q,
            decay: Some(r),
        })
    }

    /// Arbitrary eigenvalue table in dof order; missing entries are zero.
    pub fn from_table(grid: &FourierGrid, table: &[f64]) -> Result<Self> {
        if table.len() > grid.len() {
            return Err(Error::invalid(format!(
                "noise table has {} entries but the grid carries {} real modes",
                table.len(),
                grid.len()
            )));
        }
        if let Some(pos) = table.iter().position(|q| !(q.is_finite() && *q >= 0.0)) {
            return Err(Error::invalid(format!(
                "noise eigenvalue {pos} must be finite and >= 0, got {}",
                table[pos]
            )));
        }
        let mut q = table.to_vec();
        q.resize(grid.len(), 0.0);
        Ok(NoiseSpec {
            grid: grid.clone(),
            q,
            decay: None,
        })
    }

    pub fn zero(grid: &FourierGrid) -> Self {
        NoiseSpec {
            grid: grid.clone(),
            q: vec![0.0; grid.len()],
            decay: None,
        }
    }

    pub fn grid(&self) -> &FourierGrid {
        &self.grid
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.q
    }

    pub fn decay(&self) -> Option<f64> {
        self.decay
    }

    pub fn dofs(&self) -> usize {
        self.q.len()
    }

    pub fn trace(&self) -> f64 {
        self.q.iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.q.iter().all(|&q| q == 0.0)
    }

    /// Per-dof terms `κ_j^μ q_j` of the squared weighted HS norm.
    pub fn hs_contributions(&self, mu: SobolevIndex) -> Vec<f64> {
        self.q
            .iter()
            .enumerate()
            .map(|(dof, &q)| norm_weight(dof_eigenvalue(dof), mu.value()) * q)
            .collect()
    }

    /// `‖(-Δ)^{μ/2} Q^{1/2}‖_HS` over the represented modes, with a tail verdict.
    pub fn weighted_hs_norm(&self, mu: SobolevIndex) -> HsNorm {
        let truncated = self.hs_contributions(mu).iter().sum::<f64>().sqrt();
        match self.decay {
            Some(r) => {
                let margin = 2.0 * (r - mu.value());
                if margin > 1.0 {
                    HsNorm {
                        value: truncated,
                        truncated,
                        convergent: true,
                        diagnostic: None,
                    }
                } else {
                    HsNorm {
                        value: f64::INFINITY,
                        truncated,
                        convergent: false,
                        diagnostic: Some(format!(
                            "power family r = {r} has a divergent tail at mu = {}: 2(r - mu) = {margin} <= 1",
                            mu.value()
                        )),
                    }
                }
            }
            None => HsNorm {
                value: truncated,
                truncated,
                convergent: true,
                diagnostic: None,
            },
        }
    }

    /// Restrict the spectrum to a coarser grid.
    pub fn restrict(&self, grid: &FourierGrid) -> Result<NoiseSpec> {
        if grid.half_bandwidth() > self.grid.half_bandwidth() {
            return Err(Error::invalid(format!(
                "cannot restrict noise of bandwidth {} to bandwidth {}",
                self.grid.half_bandwidth(),
                grid.half_bandwidth()
            )));
        }
        Ok(NoiseSpec {
            grid: grid.clone(),
            q: self.q[..grid.len()].to_vec(),
            decay: self.decay,
        })
    }

    /// Assemble `Σ_j √q_j g_j b_j` as Fourier coefficients on `target`.
    /// Modes beyond either bandwidth are dropped.
    pub fn assemble(&self, beta: &[f64], target: &FourierGrid) -> Result<SpectralField> {
        if beta.len() != self.dofs() {
            return Err(Error::invalid(format!(
                "expected {} real increments, got {}",
                self.dofs(),
                beta.len()
            )));
        }
        let mut coeffs = vec![Complex64::new(0.0, 0.0); target.len()];
        self.assemble_into(beta, target, &mut coeffs);
        SpectralField::from_coeffs(target, coeffs)
    }

    pub(crate) fn assemble_into(&self, beta: &[f64], target: &FourierGrid, out: &mut [Complex64]) {
        let kmax = self.grid.half_bandwidth().min(target.half_bandwidth());
        let centre = target.half_bandwidth();
        out.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
        out[centre] = Complex64::new(self.q[0].sqrt() * beta[0], 0.0);
        for k in 1..=kmax {
            let (c, s) = (2 * k - 1, 2 * k);
            let a = self.q[c].sqrt() * beta[c] * FRAC_1_SQRT_2;
            let b = self.q[s].sqrt() * beta[s] * FRAC_1_SQRT_2;
            out[centre + k] = Complex64::new(a, -b);
            out[centre - k] = Complex64::new(a, b);
        }
    }
}

/// Eigenvalue of `-Δ` carried by a real dof.
#[inline]
fn dof_eigenvalue(dof: usize) -> f64 {
    let k = dof.div_ceil(2) as f64;
    crate::spectral::FOUR_PI_SQ * k * k
}

#[derive(Clone, Debug, PartialEq)]
pub struct HsNorm {
    /// Truncated norm when the tail converges, `∞` otherwise.
    pub value: f64,
    pub truncated: f64,
    pub convergent: bool,
    pub diagnostic: Option<String>,
}

/// 32-byte ChaCha key for one Monte Carlo path.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PathSeed([u8; 32]);

impl PathSeed {
    /// Key for path `index` under `master`; independent of the order paths are drawn in.
    pub fn derive(master: u64, index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master);
        rng.set_stream(index);
        let mut key = [0u8; 32];
        rng.fill_bytes(&mut key);
        PathSeed(key)
    }

    pub fn from_bytes(key: [u8; 32]) -> Self {
        PathSeed(key)
    }
}

/// Brownian increments of every real dof on a uniform fine time grid.
#[derive(Clone, Debug)]
pub struct NoisePath {
    spec: NoiseSpec,
    seed: PathSeed,
    m_fine: usize,
    tau_fine: f64,
    sqrt_tau: f64,
    quantum: f64,
    cache: Option<Arc<[f64]>>,
}

/// Draw the increment lattice of one path. Small lattices are materialized,
/// large ones are regenerated step by step on demand; both give identical values.
pub fn sample_path(spec: &NoiseSpec, seed: PathSeed, m_fine: usize, t_end: f64) -> Result<NoisePath> {
    if m_fine == 0 {
        return Err(Error::invalid("fine step count must be >= 1"));
    }
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::invalid(format!("horizon must be positive, got {t_end}")));
    }
    let tau_fine = t_end / m_fine as f64;
    let sqrt_tau = tau_fine.sqrt();
    let quantum = 2f64.powi(sqrt_tau.log2().floor() as i32 - QUANT_BITS);
    let mut path = NoisePath {
        spec: spec.clone(),
        seed,
        m_fine,
        tau_fine,
        sqrt_tau,
        quantum,
        cache: None,
    };
    let n = spec.dofs();
    if m_fine.saturating_mul(n) <= CACHE_LIMIT {
        let mut all = vec![0.0; m_fine * n];
        for (i, chunk) in all.chunks_mut(n).enumerate() {
            path.generate(i, chunk);
        }
        path.cache = Some(all.into());
    }
    Ok(path)
}

impl NoisePath {
    pub fn spec(&self) -> &NoiseSpec {
        &self.spec
    }

    pub fn fine_steps(&self) -> usize {
        self.m_fine
    }

    pub fn fine_step(&self) -> f64 {
        self.tau_fine
    }

    pub fn horizon(&self) -> f64 {
        self.tau_fine * self.m_fine as f64
    }

    pub fn is_cached(&self) -> bool {
        self.cache.is_some()
    }

    fn generate(&self, step: usize, out: &mut [f64]) {
        let mut rng = ChaCha8Rng::from_seed(self.seed.0);
        rng.set_stream(step as u64);
        for v in out.iter_mut() {
            let xi: f64 = rng.sample(StandardNormal);
            *v = (self.sqrt_tau * xi / self.quantum).round() * self.quantum;
        }
    }

    fn fill_fine(&self, step: usize, out: &mut [f64]) {
        let n = self.spec.dofs();
        match &self.cache {
            Some(all) => out.copy_from_slice(&all[step * n..(step + 1) * n]),
            None => self.generate(step, out),
        }
    }

    /// Unscaled Brownian increments `δβ_j` of fine step `step`.
    pub fn fine_increment(&self, step: usize) -> Result<Vec<f64>> {
        if step >= self.m_fine {
            return Err(Error::invalid(format!(
                "fine step {step} out of range (path has {})",
                self.m_fine
            )));
        }
        let mut out = vec![0.0; self.spec.dofs()];
        self.fill_fine(step, &mut out);
        Ok(out)
    }

    fn check_coarse(&self, m: usize, refinement: usize) -> Result<()> {
        if refinement == 0 || !self.m_fine.is_multiple_of(refinement) {
            return Err(Error::invalid(format!(
                "refinement {refinement} does not divide the {} fine steps",
                self.m_fine
            )));
        }
        if m >= self.m_fine / refinement {
            return Err(Error::invalid(format!(
                "coarse step {m} out of range (coarse grid has {})",
                self.m_fine / refinement
            )));
        }
        Ok(())
    }

    /// Brownian increments over coarse step `m`, the sum of `refinement` fine ones.
    pub fn coarse_brownian(&self, m: usize, refinement: usize) -> Result<Vec<f64>> {
        self.check_coarse(m, refinement)?;
        let mut out = vec![0.0; self.spec.dofs()];
        let mut scratch = vec![0.0; self.spec.dofs()];
        self.coarse_brownian_into(m, refinement, &mut out, &mut scratch);
        Ok(out)
    }

    pub(crate) fn coarse_brownian_into(&self, m: usize, refinement: usize, out: &mut [f64], scratch: &mut [f64]) {
        let n = self.spec.dofs();
        match &self.cache {
            Some(all) => {
                out.copy_from_slice(&all[m * refinement * n..(m * refinement + 1) * n]);
                for i in 1..refinement {
                    let start = (m * refinement + i) * n;
                    for (o, v) in out.iter_mut().zip(&all[start..start + n]) {
                        *o += v;
                    }
                }
            }
            None => {
                self.generate(m * refinement, out);
                for i in 1..refinement {
                    self.generate(m * refinement + i, scratch);
                    for (o, v) in out.iter_mut().zip(scratch.iter()) {
                        *o += v;
                    }
                }
            }
        }
    }

    /// `δ_m W` over coarse step `m` of size `refinement · τ_fine`, on the noise grid.
    pub fn coarse_increment(&self, m: usize, refinement: usize) -> Result<SpectralField> {
        self.coarse_increment_on(m, refinement, self.spec.grid())
    }

    /// As [`coarse_increment`](Self::coarse_increment), projected onto `target`.
    pub fn coarse_increment_on(&self, m: usize, refinement: usize, target: &FourierGrid) -> Result<SpectralField> {
        let beta = self.coarse_brownian(m, refinement)?;
        self.spec.assemble(&beta, target)
    }
}
