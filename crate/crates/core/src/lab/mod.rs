//! Convergence laboratory: strong errors, rate fits, moments, meshing and lemma checks.

pub mod fit;
pub mod lemmas;
pub mod meshing;
pub mod moments;
pub mod observables;
pub mod plan;
pub mod strong;
