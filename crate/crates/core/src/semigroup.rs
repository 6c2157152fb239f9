//! Exact and discrete Schrödinger propagators, all diagonal in the Fourier basis.
//!
//! With `Δ e_k = -λ_k e_k`, the damped group `S_t^{α,ε}` multiplies mode `k` by
//! `exp((-iελ_k/2 - α/ε) t)`, the Cayley map `S_τ` by
//! `(1 - iετλ_k/4) / (1 + iετλ_k/4)` and the resolvent `T_τ` by
//! `(1 + iετλ_k/4)^{-1}`. The defect functionals below evaluate the quantities
//! bounded by the semigroup error estimates, together with explicit-constant bounds.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::{FourierGrid, SobolevIndex, SpectralField};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SemigroupParams {
    eps: f64,
    alpha: f64,
    t: f64,
}

impl SemigroupParams {
    pub fn new(eps: f64, alpha: f64, t: f64) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::invalid(format!("eps must be positive, got {eps}")));
        }
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::invalid(format!("alpha must be >= 0, got {alpha}")));
        }
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::invalid(format!("t must be >= 0, got {t}")));
        }
        Ok(SemigroupParams { eps, alpha, t })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    /// `e^{-αt/ε}`, the modulus of every mode factor.
    pub fn decay(&self) -> f64 {
        (-self.alpha * self.t / self.eps).exp()
    }

    pub fn factor(&self, lambda: f64) -> Complex64 {
        Complex64::new(-self.alpha / self.eps, -0.5 * self.eps * lambda)
            .scale(self.t)
            .exp()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CayleyParams {
    eps: f64,
    tau: f64,
    power: u64,
}

impl CayleyParams {
    pub fn new(eps: f64, tau: f64, power: u64) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::invalid(format!("eps must be positive, got {eps}")));
        }
        if !(tau > 0.0 && tau < 1.0) {
            return Err(Error::invalid(format!("step size must lie in (0, 1), got {tau}")));
        }
        Ok(CayleyParams { eps, tau, power })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn power(&self) -> u64 {
        self.power
    }

    pub fn with_power(self, power: u64) -> Self {
        CayleyParams { power, ..self }
    }

    /// The dimensionless `ετλ/4`.
    #[inline]
    pub fn reduced(&self, lambda: f64) -> f64 {
        0.25 * self.eps * self.tau * lambda
    }

    /// One-step Cayley factor `(1 - ix)/(1 + ix)`.
    pub fn step_factor(&self, lambda: f64) -> Complex64 {
        let x = self.reduced(lambda);
        Complex64::new(1.0, -x) / Complex64::new(1.0, x)
    }

    pub fn resolvent_factor(&self, lambda: f64) -> Complex64 {
        Complex64::new(1.0, self.reduced(lambda)).inv()
    }
}

/// `S_t^{α,ε} v`.
pub fn apply_exact(v: &SpectralField, p: &SemigroupParams) -> SpectralField {
    map_modes(v, |lam| p.factor(lam))
}

/// `S_τ^m v`, applied as `m` successive one-step multiplications so that the
/// result is bitwise identical to composing single steps.
pub fn apply_cayley(v: &SpectralField, c: &CayleyParams) -> SpectralField {
    let mut out = v.clone();
    let grid = v.grid().clone();
    for (coef, &lam) in out.coeffs_mut().iter_mut().zip(grid.eigenvalues()) {
        let f = c.step_factor(lam);
        for _ in 0..c.power {
            *coef *= f;
        }
    }
    out
}

/// `T_τ v`.
pub fn apply_resolvent(v: &SpectralField, c: &CayleyParams) -> SpectralField {
    map_modes(v, |lam| c.resolvent_factor(lam))
}

fn map_modes(v: &SpectralField, factor: impl Fn(f64) -> Complex64) -> SpectralField {
    let mut out = v.clone();
    let grid: FourierGrid = v.grid().clone();
    for (coef, &lam) in out.coeffs_mut().iter_mut().zip(grid.eigenvalues()) {
        *coef *= factor(lam);
    }
    out
}

/// A measured defect next to the explicit-constant bound it must respect.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Defect {
    pub defect: f64,
    pub bound: f64,
}

impl Defect {
    pub fn holds(&self, rel_slack: f64) -> bool {
        self.defect <= self.bound * (1.0 + rel_slack) + f64::MIN_POSITIVE
    }
}

/// `‖(S_t^{α,ε} - Id) v‖`, bounded by
/// `2 (εt/2)^ρ e^{-αt/ε} ‖v‖_{2ρ} + |1 - e^{-αt/ε}| ‖v‖`.
pub fn smoothing_defect(v: &SpectralField, p: &SemigroupParams, rho: f64) -> Result<Defect> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::invalid(format!("rho must lie in [0, 1], got {rho}")));
    }
    let one = Complex64::new(1.0, 0.0);
    let defect = v
        .coeffs()
        .iter()
        .zip(v.grid().eigenvalues())
        .map(|(c, &lam)| ((p.factor(lam) - one) * c).norm_sqr())
        .sum::<f64>()
        .sqrt();
    let decay = p.decay();
    let smooth = 2.0 * (0.5 * p.eps * p.t).powf(rho) * decay * v.sobolev_norm(SobolevIndex::new(2.0 * rho)?);
    let bound = smooth + (1.0 - decay).abs() * v.norm();
    Ok(Defect { defect, bound })
}

/// Defect of the spectral projection applied after the damped group.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProjectionDefect {
    pub defect: f64,
    /// `e^{-αt/ε} λ_{K+1}^{-μ/2} ‖v‖_μ`, using the first excluded eigenvalue.
    pub bound: f64,
    /// `e^{-αt/ε} λ_K^{-μ/2} ‖v‖_μ`, the looser form indexed by the last kept
    /// eigenvalue (infinite when `K = 0` and `μ > 0`).
    pub bound_last_kept: f64,
}

/// `‖(S_t^{α,ε} - P_N S_t^{α,ε}) v‖ = e^{-αt/ε} ‖(Id - P_N) v‖`.
pub fn projection_defect(
    v: &SpectralField,
    p: &SemigroupParams,
    k_cut: usize,
    mu: SobolevIndex,
) -> Result<ProjectionDefect> {
    let evolved = apply_exact(v, p);
    let defect = evolved.sub(&evolved.project(k_cut)?)?.norm();
    let lam_next = crate::spectral::FOUR_PI_SQ * ((k_cut + 1) as f64).powi(2);
    let lam_kept = crate::spectral::FOUR_PI_SQ * (k_cut as f64).powi(2);
    let mu = mu.value();
    let scale = p.decay() * v.sobolev_norm(SobolevIndex::new(mu)?);
    let bound_last_kept = if lam_kept == 0.0 {
        if mu == 0.0 {
            scale
        } else {
            f64::INFINITY
        }
    } else {
        lam_kept.powf(-0.5 * mu) * scale
    };
    Ok(ProjectionDefect {
        defect,
        bound: lam_next.powf(-0.5 * mu) * scale,
        bound_last_kept,
    })
}

/// `x - arctan x`, evaluated by its Taylor series near zero to avoid cancellation.
pub fn x_minus_arctan(x: f64) -> f64 {
    if x.abs() < 1e-2 {
        let x2 = x * x;
        // x³/3 - x⁵/5 + x⁷/7 - x⁹/9; the next term is below 1e-22 relative
        x * x2 * (1.0 / 3.0 - x2 * (1.0 / 5.0 - x2 * (1.0 / 7.0 - x2 / 9.0)))
    } else {
        x - x.atan()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CayleyDefect {
    /// `|e^{iετmλ/2} - e^{2im·arctan(ετλ/4)}|`.
    pub defect: f64,
    /// `min(2, 2 (2m)^β |x - arctan x|^β)`.
    pub bound: f64,
    /// `2 (2m)^β (x³/3)^β`, the cubic form of the same bound.
    pub bound_cubic: f64,
}

/// Phase defect between `m` exact steps and `m` Cayley steps on one eigenvalue.
pub fn cayley_defect(eps: f64, tau: f64, m: u64, lambda: f64, beta: f64) -> Result<CayleyDefect> {
    if m == 0 {
        return Err(Error::invalid("cayley defect needs m >= 1"));
    }
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::invalid(format!("beta must lie in [0, 1], got {beta}")));
    }
    if !(lambda >= 0.0) {
        return Err(Error::invalid(format!("eigenvalue must be >= 0, got {lambda}")));
    }
    let x = 0.25 * eps * tau * lambda;
    let gap = x_minus_arctan(x);
    let mf = m as f64;
    // |e^{ia} - e^{ib}| = 2 |sin((a - b)/2)| with (a - b)/2 = m (x - arctan x)
    let defect = 2.0 * (mf * gap).sin().abs();
    let bound = (2.0 * (2.0 * mf).powf(beta) * gap.powf(beta)).min(2.0);
    let bound_cubic = 2.0 * (2.0 * mf).powf(beta) * (x.powi(3) / 3.0).powf(beta);
    Ok(CayleyDefect {
        defect,
        bound,
        bound_cubic,
    })
}

/// `|1 - (1 + ix)^{-1}| = x / sqrt(1 + x²)`, bounded by `x = ετλ/4`.
pub fn resolvent_defect(c: &CayleyParams, lambda: f64) -> Defect {
    let defect = (Complex64::new(1.0, 0.0) - c.resolvent_factor(lambda)).norm();
    Defect {
        defect,
        bound: c.reduced(lambda),
    }
}

/// Per-mode defect of `S_{-r} - S_τ^{-j} T_τ` for `r ∈ [t_{j-1}, t_j]`, against the
/// three-term split: exact-group continuity, Cayley phase, resolvent.
pub fn backward_resolvent_defect(eps: f64, tau: f64, j: u64, r: f64, lambda: f64) -> Result<Defect> {
    if j == 0 {
        return Err(Error::invalid("j must be >= 1"));
    }
    let tj = j as f64 * tau;
    if !(r >= tj - tau - 1e-15 && r <= tj + 1e-15) {
        return Err(Error::invalid(format!("r = {r} outside [t_(j-1), t_j]")));
    }
    let c = CayleyParams::new(eps, tau, j)?;
    let x = c.reduced(lambda);
    let exact = Complex64::from_polar(1.0, 0.5 * eps * lambda * r);
    let discrete = Complex64::from_polar(1.0, 2.0 * j as f64 * x.atan()) * c.resolvent_factor(lambda);
    let defect = (exact - discrete).norm();
    let continuity = (0.5 * eps * lambda * (r - tj).abs()).min(2.0);
    let phase = (2.0 * j as f64 * x_minus_arctan(x)).min(2.0);
    let bound = continuity + phase + resolvent_defect(&c, lambda).defect;
    Ok(Defect { defect, bound })
}
