//! Randomized verification of the semigroup estimates, one CSV row per check.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::semigroup::{
    apply_cayley, apply_exact, cayley_defect, projection_defect, smoothing_defect, CayleyParams, SemigroupParams,
};
use crate::spectral::{random_field, Decay, FourierGrid, SobolevIndex, SpectralField};

/// Relative slack granted to inequality checks for rounding in the bound itself.
const ROUNDING_SLACK: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LemmaSettings {
    #[serde(default = "default_tuples")]
    pub tuples: usize,
    #[serde(default = "default_half_bandwidth")]
    pub k: usize,
    #[serde(default = "default_max_power")]
    pub max_power: u64,
}

fn default_tuples() -> usize {
    1000
}

fn default_half_bandwidth() -> usize {
    32
}

fn default_max_power() -> u64 {
    10_000
}

impl Default for LemmaSettings {
    fn default() -> Self {
        LemmaSettings {
            tuples: default_tuples(),
            k: default_half_bandwidth(),
            max_power: default_max_power(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LemmaRow {
    pub lemma: &'static str,
    pub tuple: usize,
    pub params: String,
    pub defect: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LemmaReport {
    pub rows: Vec<LemmaRow>,
}

impl LemmaReport {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &LemmaRow> {
        self.rows.iter().filter(|r| !r.pass)
    }

    pub fn count(&self, lemma: &str) -> usize {
        self.rows.iter().filter(|r| r.lemma == lemma).count()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn log_uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo.ln()..hi.ln())).exp()
}

fn le(defect: f64, bound: f64) -> bool {
    defect <= bound * (1.0 + ROUNDING_SLACK) + f64::MIN_POSITIVE
}

/// Run `settings.tuples` random parameter tuples through every check.
pub fn run_lemma_suite(settings: &LemmaSettings, seed: u64) -> Result<LemmaReport> {
    let grid = FourierGrid::one_dim(settings.k);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    for tuple in 0..settings.tuples {
        let eps = log_uniform(&mut rng, 0.05, 2.0);
        let t = rng.random_range(0.0..2.0);
        let alpha = rng.random_range(0.0..2.0);
        let rho: f64 = rng.random_range(0.0..=1.0);
        let mu: f64 = rng.random_range(0.0..4.0);
        let tau = log_uniform(&mut rng, 1e-6, 0.999);
        let m = rng.random_range(1..=settings.max_power);
        let beta: f64 = rng.random_range(0.0..=1.0);
        let k_cut = rng.random_range(0..settings.k);
        let v = random_field(&mut rng, Decay::Power(0.5 * mu + 1.0), &grid);
        let mu_ix = SobolevIndex::new(mu)?;
        let params = format!(
            "eps={eps:.6e};t={t:.6e};alpha={alpha:.6e};rho={rho:.6};mu={mu:.6};tau={tau:.6e};m={m};beta={beta:.6};k_cut={k_cut}"
        );
        let mut push = |lemma, defect: f64, bound: f64, pass: bool| {
            rows.push(LemmaRow {
                lemma,
                tuple,
                params: params.clone(),
                defect,
                bound,
                pass,
            })
        };

        let p = SemigroupParams::new(eps, alpha, t)?;
        let lhs = apply_exact(&v, &p).sobolev_norm(mu_ix);
        let rhs = p.decay() * v.sobolev_norm(mu_ix);
        let gap = (lhs - rhs).abs();
        push("isometry", gap, 1e-12 * rhs, gap <= 1e-12 * rhs);

        let c = CayleyParams::new(eps, tau, m.min(64))?;
        let lhs = apply_cayley(&v, &c).sobolev_norm(mu_ix);
        let rhs = v.sobolev_norm(mu_ix);
        let gap = (lhs - rhs).abs();
        push("cayley-isometry", gap, 1e-12 * rhs, gap <= 1e-12 * rhs);

        let free = SemigroupParams::new(eps, 0.0, t)?;
        let d = smoothing_defect(&v, &free, rho)?;
        push("smoothing", d.defect, d.bound, le(d.defect, d.bound));
        let d = smoothing_defect(&v, &p, rho)?;
        push("smoothing-damped", d.defect, d.bound, le(d.defect, d.bound));

        let d = projection_defect(&v, &p, k_cut, mu_ix)?;
        push(
            "projection",
            d.defect,
            d.bound_last_kept,
            le(d.defect, d.bound_last_kept),
        );
        push("projection-sharp", d.defect, d.bound, le(d.defect, d.bound));
        let amp = rng.random_range(0.1..10.0);
        let tail = SpectralField::unit_mode(&grid, k_cut as i64 + 1)?.scaled(amp.into());
        let d = projection_defect(&tail, &p, k_cut, mu_ix)?;
        let gap = (d.defect - d.bound).abs();
        push("projection-tight", gap, 1e-12 * d.bound, gap <= 1e-12 * d.bound);

        let (mut worst, mut worst_bound, mut ok) = (0.0f64, 0.0f64, true);
        let (mut worst_mu6, mut ok_mu6) = (0.0f64, true);
        let mu6_bound = (2.0 / 3.0) * (m as f64 * tau) * tau * tau * eps.powi(3) / 64.0;
        for &lam in grid.eigenvalues() {
            let d = cayley_defect(eps, tau, m, lam, beta)?;
            ok &= le(d.defect, d.bound) && le(d.bound, d.bound_cubic.max(d.bound.min(2.0)));
            ok &= le(d.defect, d.bound_cubic);
            if d.bound > 0.0 && d.defect / d.bound >= worst / worst_bound.max(f64::MIN_POSITIVE) {
                worst = d.defect;
                worst_bound = d.bound;
            }
            if lam > 0.0 {
                let full = cayley_defect(eps, tau, m, lam, 1.0)?;
                let scaled = full.defect * lam.powi(-3);
                worst_mu6 = worst_mu6.max(scaled);
                ok_mu6 &= le(scaled, mu6_bound);
            }
        }
        push("cayley", worst, worst_bound, ok);
        push("cayley-mu6", worst_mu6, mu6_bound, ok_mu6);
    }
    Ok(LemmaReport { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_suite_passes_and_covers_every_check() {
        let settings = LemmaSettings {
            tuples: 40,
            k: 16,
            max_power: 10_000,
        };
        let report = run_lemma_suite(&settings, 7).unwrap();
        let failures: Vec<_> = report.failures().collect();
        assert!(failures.is_empty(), "{failures:?}");
        for lemma in [
            "isometry",
            "cayley-isometry",
            "smoothing",
            "smoothing-damped",
            "projection",
            "projection-sharp",
            "projection-tight",
            "cayley",
            "cayley-mu6",
        ] {
            assert_eq!(report.count(lemma), 40, "{lemma}");
        }
    }

    #[test]
    fn suite_is_deterministic() {
        let s = LemmaSettings {
            tuples: 5,
            ..LemmaSettings::default()
        };
        assert_eq!(run_lemma_suite(&s, 1).unwrap(), run_lemma_suite(&s, 1).unwrap());
    }
}
