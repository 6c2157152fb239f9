//! Fourier representation of fields on the unit torus.
//!
//! A field is stored by its coefficients against the orthonormal exponential
//! basis `e_k(x) = exp(2πi k·x)`, so the L² norm is the Euclidean norm of the
//! coefficient vector. Grids are odd-sized (`n = 2K + 1` points per axis), which
//! gives the symmetric mode set `{-K..K}` with no unpaired Nyquist mode.
//!
//! Only the one-dimensional kernels are implemented; the types carry the
//! dimension so callers can be written against `d`.

use std::f64::consts::PI;
use std::fmt;
use std::io::{Read, Write};
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

pub const FOUR_PI_SQ: f64 = 4.0 * PI * PI;

const BINARY_MAGIC: &[u8; 8] = b"SNLSFLD1";

/// Signed Fourier wavenumber, one component per spatial axis.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ModeIndex(Vec<i64>);

impl ModeIndex {
    pub fn new(components: Vec<i64>) -> Self {
        ModeIndex(components)
    }

    pub fn d1(k: i64) -> Self {
        ModeIndex(vec![k])
    }

    pub fn components(&self) -> &[i64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// `max_i |k_i|`, the quantity the projection truncates on.
    pub fn max_abs(&self) -> u64 {
        self.0.iter().map(|k| k.unsigned_abs()).max().unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&k| k == 0)
    }
}

impl fmt::Display for ModeIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|k| k.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// Eigenvalue of `-Δ` on `[0,1]^d` for the mode `k`: `4π² |k|²`.
pub fn eigenvalue(k: &ModeIndex) -> f64 {
    FOUR_PI_SQ * k.0.iter().map(|&c| (c * c) as f64).sum::<f64>()
}

/// Weight of a mode in the fractional norm `‖·‖_μ`. The zero mode carries
/// weight 1 so that the seminorm becomes a norm.
#[inline]
pub fn norm_weight(lambda: f64, mu: f64) -> f64 {
    if lambda == 0.0 {
        1.0
    } else {
        lambda.powf(mu)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct SobolevIndex(f64);

impl SobolevIndex {
    pub const L2: SobolevIndex = SobolevIndex(0.0);

    pub fn new(mu: f64) -> Result<Self> {
        if mu.is_finite() && mu >= 0.0 {
            Ok(SobolevIndex(mu))
        } else {
            Err(Error::invalid(format!(
                "Sobolev index must be finite and >= 0, got {mu}"
            )))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Odd collocation grid with half-bandwidth `K` together with cached FFT plans.
#[derive(Clone)]
pub struct FourierGrid {
    dim: usize,
    half: usize,
    eigenvalues: Arc<[f64]>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for FourierGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FourierGrid")
            .field("dim", &self.dim)
            .field("half_bandwidth", &self.half)
            .finish()
    }
}

impl PartialEq for FourierGrid {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.half == other.half
    }
}

impl Eq for FourierGrid {}

impl FourierGrid {
    pub fn new(dim: usize, half_bandwidth: usize) -> Result<Self> {
        if dim != 1 {
            return Err(Error::Unsupported(format!(
                "only d = 1 transforms are implemented (requested d = {dim})"
            )));
        }
        let n = 2 * half_bandwidth + 1;
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let eigenvalues: Arc<[f64]> = (0..n)
            .map(|s| {
                let k = s as i64 - half_bandwidth as i64;
                FOUR_PI_SQ * (k * k) as f64
            })
            .collect();
        Ok(FourierGrid {
            dim,
            half: half_bandwidth,
            eigenvalues,
            forward,
            inverse,
        })
    }

    pub fn one_dim(half_bandwidth: usize) -> Self {
        Self::new(1, half_bandwidth).expect("d = 1 is always supported")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_bandwidth(&self) -> usize {
        self.half
    }

    /// Points per axis, `2K + 1`.
    pub fn points_per_axis(&self) -> usize {
        2 * self.half + 1
    }

    /// Number of modes, equal to the number of collocation points: `(2K+1)^d`.
    pub fn len(&self) -> usize {
        self.points_per_axis().pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Eigenvalue of `-Δ` for every storage slot.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Wavenumber stored in `slot` (d = 1 storage runs from `-K` to `K`).
    #[inline]
    pub fn wavenumber(&self, slot: usize) -> i64 {
        slot as i64 - self.half as i64
    }

    pub fn mode(&self, slot: usize) -> ModeIndex {
        ModeIndex::d1(self.wavenumber(slot))
    }

    pub fn slot(&self, k: &ModeIndex) -> Option<usize> {
        if k.dim() != self.dim || k.max_abs() > self.half as u64 {
            return None;
        }
        Some((k.components()[0] + self.half as i64) as usize)
    }

    #[inline]
    pub fn slot_of(&self, k: i64) -> Option<usize> {
        if k.unsigned_abs() > self.half as u64 {
            None
        } else {
            Some((k + self.half as i64) as usize)
        }
    }

    pub fn modes(&self) -> impl Iterator<Item = ModeIndex> + '_ {
        (0..self.len()).map(move |s| self.mode(s))
    }

    /// Collocation points `x_j = j / n`.
    pub fn points(&self) -> Vec<f64> {
        let n = self.points_per_axis();
        (0..n).map(|j| j as f64 / n as f64).collect()
    }

    #[inline]
    fn fft_index(&self, slot: usize) -> usize {
        let n = self.points_per_axis() as i64;
        self.wavenumber(slot).rem_euclid(n) as usize
    }
}

/// Fourier coefficients of a complex field on a [`FourierGrid`].
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    grid: FourierGrid,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(grid: &FourierGrid) -> Self {
        SpectralField {
            grid: grid.clone(),
            coeffs: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn from_coeffs(grid: &FourierGrid, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::invalid(format!(
                "coefficient count {} does not match grid size {}",
                coeffs.len(),
                grid.len()
            )));
        }
        if let Some(pos) = coeffs.iter().position(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::invalid(format!("non-finite coefficient at slot {pos}")));
        }
        Ok(SpectralField {
            grid: grid.clone(),
            coeffs,
        })
    }

    /// Unit mass on the single mode `k`.
    pub fn unit_mode(grid: &FourierGrid, k: i64) -> Result<Self> {
        let slot = grid
            .slot_of(k)
            .ok_or_else(|| Error::invalid(format!("mode {k} outside bandwidth {}", grid.half)))?;
        let mut f = SpectralField::zeros(grid);
        f.coeffs[slot] = Complex64::new(1.0, 0.0);
        Ok(f)
    }

    /// Build a field coefficient-by-coefficient from its wavenumber.
    pub fn from_fn(grid: &FourierGrid, mut f: impl FnMut(i64) -> Complex64) -> Self {
        let coeffs = (0..grid.len()).map(|s| f(grid.wavenumber(s))).collect();
        SpectralField {
            grid: grid.clone(),
            coeffs,
        }
    }

    pub fn grid(&self) -> &FourierGrid {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    pub fn coeff(&self, k: i64) -> Option<Complex64> {
        self.grid.slot_of(k).map(|s| self.coeffs[s])
    }

    /// L² norm; by Parseval the Euclidean norm of the coefficients.
    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `sqrt(|v_0|² + Σ_{k≠0} λ_k^μ |v_k|²)`.
    pub fn sobolev_norm(&self, mu: SobolevIndex) -> f64 {
        let mu = mu.value();
        if mu == 0.0 {
            return self.norm();
        }
        self.coeffs
            .iter()
            .zip(self.grid.eigenvalues.iter())
            .map(|(c, &lam)| norm_weight(lam, mu) * c.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn distance(&self, other: &SpectralField) -> Result<f64> {
        self.check_same_grid(other)?;
        Ok(self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt())
    }

    /// Zero every coefficient with `max_i |k_i| > k_cut`.
    pub fn project(&self, k_cut: usize) -> Result<SpectralField> {
        if k_cut > self.grid.half {
            return Err(Error::invalid(format!(
                "projection cut {k_cut} exceeds grid bandwidth {}",
                self.grid.half
            )));
        }
        let mut out = self.clone();
        for (s, c) in out.coeffs.iter_mut().enumerate() {
            if self.grid.wavenumber(s).unsigned_abs() > k_cut as u64 {
                *c = Complex64::new(0.0, 0.0);
            }
        }
        Ok(out)
    }

    /// Copy the modes shared with `target`; missing modes are zero.
    fn transfer(&self, target: &FourierGrid) -> SpectralField {
        let mut out = SpectralField::zeros(target);
        let k = self.grid.half.min(target.half) as i64;
        for w in -k..=k {
            let src = self.grid.slot_of(w).expect("mode within source bandwidth");
            let dst = target.slot_of(w).expect("mode within target bandwidth");
            out.coeffs[dst] = self.coeffs[src];
        }
        out
    }

    /// Zero-pad onto a grid with at least the same bandwidth (adjoint of projection).
    pub fn embed(&self, target: &FourierGrid) -> Result<SpectralField> {
        if target.dim != self.grid.dim || target.half < self.grid.half {
            return Err(Error::invalid(format!(
                "cannot embed bandwidth {} into bandwidth {}",
                self.grid.half, target.half
            )));
        }
        Ok(self.transfer(target))
    }

    /// Truncate onto a grid with at most the same bandwidth.
    pub fn restrict(&self, target: &FourierGrid) -> Result<SpectralField> {
        if target.dim != self.grid.dim || target.half > self.grid.half {
            return Err(Error::invalid(format!(
                "cannot restrict bandwidth {} to bandwidth {}",
                self.grid.half, target.half
            )));
        }
        Ok(self.transfer(target))
    }

    /// Values at the collocation points, `u(x_j) = Σ_k v_k e^{2πi k x_j}`.
    pub fn to_grid(&self) -> Vec<Complex64> {
        let mut buf = vec![Complex64::new(0.0, 0.0); self.grid.len()];
        self.to_grid_into(&mut buf);
        buf
    }

    pub(crate) fn to_grid_into(&self, buf: &mut [Complex64]) {
        for (s, c) in self.coeffs.iter().enumerate() {
            buf[self.grid.fft_index(s)] = *c;
        }
        self.grid.inverse.process(buf);
    }

    pub fn from_grid(grid: &FourierGrid, values: &[Complex64]) -> Result<SpectralField> {
        if values.len() != grid.len() {
            return Err(Error::invalid(format!(
                "grid value count {} does not match grid size {}",
                values.len(),
                grid.len()
            )));
        }
        let mut buf = values.to_vec();
        Ok(Self::from_grid_buffer(grid, &mut buf))
    }

    /// Forward transform consuming a scratch buffer holding grid values.
    pub(crate) fn from_grid_buffer(grid: &FourierGrid, buf: &mut [Complex64]) -> SpectralField {
        grid.forward.process(buf);
        let scale = 1.0 / grid.len() as f64;
        let coeffs = (0..grid.len()).map(|s| buf[grid.fft_index(s)] * scale).collect();
        SpectralField {
            grid: grid.clone(),
            coeffs,
        }
    }

    /// Evaluate the trigonometric interpolant at an arbitrary point (d = 1).
    pub fn evaluate_at(&self, x: f64) -> Complex64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(s, c)| c * Complex64::from_polar(1.0, 2.0 * PI * self.grid.wavenumber(s) as f64 * x))
            .sum()
    }

    pub fn scaled(&self, factor: Complex64) -> SpectralField {
        SpectralField {
            grid: self.grid.clone(),
            coeffs: self.coeffs.iter().map(|c| c * factor).collect(),
        }
    }

    pub fn add(&self, other: &SpectralField) -> Result<SpectralField> {
        self.check_same_grid(other)?;
        Ok(SpectralField {
            grid: self.grid.clone(),
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn sub(&self, other: &SpectralField) -> Result<SpectralField> {
        self.check_same_grid(other)?;
        Ok(SpectralField {
            grid: self.grid.clone(),
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a - b).collect(),
        })
    }

    pub(crate) fn check_same_grid(&self, other: &SpectralField) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::invalid(format!(
                "grid mismatch: bandwidth {} vs {}",
                self.grid.half, other.grid.half
            )));
        }
        Ok(())
    }

    /// Write `k,re,im` rows. Floats use the shortest round-trip representation,
    /// so reading the file back reproduces the field exactly.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["k", "re", "im"])?;
        for (s, c) in self.coeffs.iter().enumerate() {
            w.write_record([self.grid.wavenumber(s).to_string(), c.re.to_string(), c.im.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<SpectralField> {
        let mut r = csv::Reader::from_reader(reader);
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let parse_err = |what: &str| Error::invalid(format!("bad {what} in field CSV row {rec:?}"));
            let k: i64 = rec.get(0).and_then(|s| s.parse().ok()).ok_or_else(|| parse_err("k"))?;
            let re: f64 = rec.get(1).and_then(|s| s.parse().ok()).ok_or_else(|| parse_err("re"))?;
            let im: f64 = rec.get(2).and_then(|s| s.parse().ok()).ok_or_else(|| parse_err("im"))?;
            rows.push((k, Complex64::new(re, im)));
        }
        if rows.is_empty() || rows.len() % 2 == 0 {
            return Err(Error::invalid(format!(
                "field CSV must hold an odd, nonzero number of modes (got {})",
                rows.len()
            )));
        }
        let grid = FourierGrid::one_dim(rows.len() / 2);
        let mut seen = vec![false; grid.len()];
        let mut coeffs = vec![Complex64::new(0.0, 0.0); grid.len()];
        for (k, c) in rows {
            let slot = grid
                .slot_of(k)
                .ok_or_else(|| Error::invalid(format!("mode {k} outside inferred bandwidth")))?;
            if std::mem::replace(&mut seen[slot], true) {
                return Err(Error::invalid(format!("duplicate mode {k}")));
            }
            coeffs[slot] = c;
        }
        SpectralField::from_coeffs(&grid, coeffs)
    }

    /// Little-endian binary: magic, `d`, `K` (u32 each), then `re, im` per slot.
    pub fn write_binary<W: Write>(&self, mut writer: W) -> Result<()> {
        writer.write_all(BINARY_MAGIC)?;
        writer.write_all(&(self.grid.dim as u32).to_le_bytes())?;
        writer.write_all(&(self.grid.half as u32).to_le_bytes())?;
        for c in &self.coeffs {
            writer.write_all(&c.re.to_le_bytes())?;
            writer.write_all(&c.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut reader: R) -> Result<SpectralField> {
        let mut magic = [0u8; 8];
        reader.read_exact(&mut magic)?;
        if &magic != BINARY_MAGIC {
            return Err(Error::invalid("not a spectral field file"));
        }
        let mut word = [0u8; 4];
        reader.read_exact(&mut word)?;
        let dim = u32::from_le_bytes(word) as usize;
        reader.read_exact(&mut word)?;
        let half = u32::from_le_bytes(word) as usize;
        let grid = FourierGrid::new(dim, half)?;
        let mut coeffs = Vec::with_capacity(grid.len());
        let mut b = [0u8; 8];
        for _ in 0..grid.len() {
            reader.read_exact(&mut b)?;
            let re = f64::from_le_bytes(b);
            reader.read_exact(&mut b)?;
            let im = f64::from_le_bytes(b);
            coeffs.push(Complex64::new(re, im));
        }
        SpectralField::from_coeffs(&grid, coeffs)
    }
}

/// Spectral decay of a random test field.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Decay {
    /// Coefficients scaled by `(1 + λ_k)^{-r}`.
    Power(f64),
    /// Only the zero mode is populated (the `r = ∞` limit).
    Delta,
}

impl Decay {
    pub fn from_exponent(r: f64) -> Self {
        if r == f64::INFINITY {
            Decay::Delta
        } else {
            Decay::Power(r)
        }
    }

    pub fn amplitude(self, lambda: f64) -> f64 {
        match self {
            Decay::Power(r) => (1.0 + lambda).powf(-r),
            Decay::Delta => {
                if lambda == 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Random field with coefficients `(1+λ_k)^{-r} ξ_k`, `ξ_k` standard complex
/// Gaussian (`E|ξ_k|² = 1`). Draws are consumed in slot order.
pub fn random_field<R: Rng + ?Sized>(rng: &mut R, decay: Decay, grid: &FourierGrid) -> SpectralField {
    let half = std::f64::consts::FRAC_1_SQRT_2;
    let coeffs = grid
        .eigenvalues()
        .iter()
        .map(|&lam| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re, im) * (half * decay.amplitude(lam))
        })
        .collect();
    SpectralField {
        grid: grid.clone(),
        coeffs,
    }
}
