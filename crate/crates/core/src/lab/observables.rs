//! Physical observables on the collocation grid.

use num_complex::Complex64;

use crate::spectral::SpectralField;

#[derive(Clone, Debug, PartialEq)]
pub struct Observables {
    /// `‖u‖²`.
    pub mass: f64,
    pub points: Vec<f64>,
    /// `|u(x)|²`.
    pub density: Vec<f64>,
    /// `ε Im(conj(u) ∂ₓu)`.
    pub current: Vec<f64>,
}

impl Observables {
    /// Trapezoidal integral of the density over the unit torus. By discrete
    /// Parseval this equals the mass up to rounding.
    pub fn integrated_density(&self) -> f64 {
        self.density.iter().sum::<f64>() / self.density.len() as f64
    }
}

pub fn observables(u: &SpectralField, eps: f64) -> Observables {
    let grid = u.grid();
    let values = u.to_grid();
    let du = SpectralField::from_fn(grid, |k| {
        let c = u.coeff(k).unwrap_or_default();
        c * Complex64::new(0.0, 2.0 * std::f64::consts::PI * k as f64)
    })
    .to_grid();
    Observables {
        mass: u.norm().powi(2),
        points: grid.points(),
        density: values.iter().map(|v| v.norm_sqr()).collect(),
        current: values.iter().zip(&du).map(|(v, d)| eps * (v.conj() * d).im).collect(),
    }
}
