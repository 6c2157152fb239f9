//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
//!
//! Tolerances are fixed here and do not come from the shipped configs, which
//! only supply the scenarios.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use snls_core::cli;
use snls_core::coefficients::{CoefficientSet, ModelSpec};
use snls_core::config::LabConfig;
use snls_core::lab::fit::{fit_points, fit_rate, Axis};
use snls_core::lab::lemmas::{run_lemma_suite, LemmaSettings};
use snls_core::lab::moments::moment_diagnostic;
use snls_core::lab::plan::LadderPoint;
use snls_core::lab::strong::{check_coupling, strong_error};
use snls_core::noise::{sample_path, NoiseSpec, PathSeed};
use snls_core::solver::{SolverConfig, Stepper};
use snls_core::spectral::{random_field, Decay, FourierGrid, SobolevIndex, SpectralField};

const LEMMA_TUPLES: usize = 1000;
const LEMMA_MAX_POWER: u64 = 10_000;
const MASS_TOL_PER_STEP: f64 = 1e-13;
const RECURSION_TOL: f64 = 1e-10;
const SPATIAL_TOL: f64 = 0.2;
const TEMPORAL_RATE: f64 = 0.5;
const TEMPORAL_TOL: f64 = 0.15;
const EPS_RATE: f64 = -0.5;
const EPS_TOL: f64 = 0.2;
const MOMENT_RATE: f64 = -0.5;
const MOMENT_TOL: f64 = 0.2;
const HOLDER_RATE: f64 = 0.5;
const HOLDER_TOL: f64 = 0.15;
const MESHING_TARGET_K: usize = 16;
const PLANTED_TOL: f64 = 1e-12;

type Criterion = (&'static str, fn() -> Verdict);

struct Verdict {
    pass: bool,
    detail: String,
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn load(name: &str) -> LabConfig {
    LabConfig::load(&configs().join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn lemma_suite() -> Verdict {
    let settings = LemmaSettings {
        tuples: LEMMA_TUPLES,
        k: 32,
        max_power: LEMMA_MAX_POWER,
    };
    let report = run_lemma_suite(&settings, 2024).expect("lemma suite");
    let kinds = [
        "isometry",
        "smoothing",
        "smoothing-damped",
        "projection",
        "projection-tight",
        "cayley",
    ];
    let covered = kinds.iter().all(|k| report.count(k) == LEMMA_TUPLES);
    let failed = report.failures().count();
    let mut worst = String::new();
    if let Some(r) = report.failures().next() {
        worst = format!(
            "; first violation {} defect {:e} bound {:e}",
            r.lemma, r.defect, r.bound
        );
    }
    Verdict {
        pass: covered && failed == 0,
        detail: format!(
            "{} checks over {LEMMA_TUPLES} tuples, {failed} violated{worst}",
            report.rows.len()
        ),
    }
}

fn unitarity_and_oracle() -> Verdict {
    // Free flow: relative mass change per step.
    let grid = FourierGrid::one_dim(16);
    let free = CoefficientSet::new(ModelSpec::free(), &NoiseSpec::zero(&grid), SobolevIndex::L2).unwrap();
    let m = 1000;
    let cfg = SolverConfig::new(0.5, 1.0, m, 16);
    let path = sample_path(free.noise(), PathSeed::derive(1, 0), m, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let u0 = random_field(&mut rng, Decay::Power(1.0), &grid);
    let mut worst_mass = 0.0f64;
    for stepper in [
        Stepper::new(&cfg, &free).unwrap(),
        Stepper::generic(&cfg, &free).unwrap(),
    ] {
        let mut prev = u0.norm().powi(2);
        stepper
            .integrate_with(&u0, &path, |_, u| {
                let mass = u.norm().powi(2);
                worst_mass = worst_mass.max((mass - prev).abs() / prev);
                prev = mass;
            })
            .unwrap();
    }

    // Damped additive: solve (1 - z/2) u⁺ = (1 + z/2) u - iε⁻¹ δW mode by mode.
    let (eps, alpha, k) = (0.5, 1.0, 16);
    let grid = FourierGrid::one_dim(k);
    let noise = NoiseSpec::power_family(&grid, 1.55).unwrap();
    let cs = CoefficientSet::new(ModelSpec::linear_damped(alpha), &noise, SobolevIndex::L2).unwrap();
    let cfg = SolverConfig::new(eps, 1.0, m, k);
    let path = sample_path(&noise, PathSeed::derive(2, 0), m, 1.0).unwrap();
    let u0 = random_field(&mut rng, Decay::Power(1.0), &grid);
    let tau = 1.0 / m as f64;
    let mut oracle: Vec<Complex64> = u0.coeffs().to_vec();
    for step in 0..m {
        let dw = path.coarse_increment(step, 1).unwrap();
        for (s, v) in oracle.iter_mut().enumerate() {
            let kk = grid.wavenumber(s) as f64;
            let lam = 4.0 * std::f64::consts::PI.powi(2) * kk * kk;
            let z = Complex64::new(-alpha / eps, -eps * lam / 2.0) * tau;
            let rhs = (1.0 + z / 2.0) * *v - Complex64::new(0.0, 1.0 / eps) * dw.coeff(kk as i64).unwrap();
            *v = rhs / (1.0 - z / 2.0);
        }
    }
    let oracle = SpectralField::from_coeffs(&grid, oracle).unwrap();
    let mut worst_gap = 0.0f64;
    for stepper in [Stepper::new(&cfg, &cs).unwrap(), Stepper::generic(&cfg, &cs).unwrap()] {
        let (u, _) = stepper.integrate_with(&u0, &path, |_, _| {}).unwrap();
        worst_gap = worst_gap.max(u.distance(&oracle).unwrap());
    }
    Verdict {
        pass: worst_mass <= MASS_TOL_PER_STEP && worst_gap <= RECURSION_TOL,
        detail: format!(
            "max relative mass change per step {worst_mass:.2e} (tol {MASS_TOL_PER_STEP:e}); \
             recursion gap {worst_gap:.2e} (tol {RECURSION_TOL:e})"
        ),
    }
}

fn spatial(file: &str, mu: f64) -> Verdict {
    let plan = load(file).experiment_plan().unwrap();
    assert_eq!(plan.mu, mu, "{file} targets a different regularity");
    let table = strong_error(&plan).expect("strong error");
    let fit = fit_rate(&table.rows, Axis::N).expect("fit");
    Verdict {
        pass: (fit.slope + mu).abs() <= SPATIAL_TOL,
        detail: format!(
            "slope vs N {:.4} ± {:.4} (target {:.1} ± {SPATIAL_TOL}), P = {}",
            fit.slope, fit.ci95, -mu, plan.paths
        ),
    }
}

fn temporal() -> Verdict {
    let plan = load("temporal-mu4.toml").experiment_plan().unwrap();
    let table = strong_error(&plan).expect("strong error");
    let fit = fit_rate(&table.rows, Axis::Tau).expect("fit");
    Verdict {
        pass: (fit.slope - TEMPORAL_RATE).abs() <= TEMPORAL_TOL,
        detail: format!(
            "slope vs tau {:.4} ± {:.4} (target {TEMPORAL_RATE} ± {TEMPORAL_TOL}), mu = {}, P = {}",
            fit.slope, fit.ci95, plan.mu, plan.paths
        ),
    }
}

fn epsilon_scaling() -> Verdict {
    let plan = load("epsilon.toml").experiment_plan().unwrap();
    let table = strong_error(&plan).expect("strong error");
    let fit = fit_rate(&table.rows, Axis::Eps).expect("fit");
    Verdict {
        pass: (fit.slope - EPS_RATE).abs() <= EPS_TOL,
        detail: format!(
            "slope vs eps {:.4} ± {:.4} (target {EPS_RATE} ± {EPS_TOL}) at K = {}, M = {}",
            fit.slope, fit.ci95, plan.ladder[0].k_cut, plan.ladder[0].steps
        ),
    }
}

fn moments() -> Verdict {
    let plan = load("moments.toml").moment_plan().unwrap();
    let report = moment_diagnostic(&plan).expect("moments");
    let level = report.level_fit.as_ref().expect("level fit");
    let level_ok = (level.slope - MOMENT_RATE).abs() <= MOMENT_TOL;
    let holder: Vec<String> = report
        .holder_fits
        .iter()
        .map(|(eps, f)| format!("eps={eps}: {:.4}", f.slope))
        .collect();
    let holder_ok = !report.holder_fits.is_empty()
        && report
            .holder_fits
            .iter()
            .all(|(_, f)| (f.slope - HOLDER_RATE).abs() <= HOLDER_TOL);
    Verdict {
        pass: level_ok && holder_ok,
        detail: format!(
            "moment level slope {:.4} (target {MOMENT_RATE} ± {MOMENT_TOL}); Hölder slopes [{}] (target {HOLDER_RATE} ± {HOLDER_TOL}), P = {}",
            level.slope,
            holder.join(", "),
            plan.paths
        ),
    }
}

fn meshing() -> Verdict {
    let plan = load("meshing.toml").meshing_plan().unwrap();
    assert_eq!(plan.target_k, MESHING_TARGET_K);
    let report = plan.run().expect("meshing");
    let selected = report.selected.map(|p| p.k_cut);
    let error = report.result.as_ref().map_or(f64::NAN, |r| r.error);
    Verdict {
        pass: selected == Some(MESHING_TARGET_K) && error <= 2.0 * report.delta,
        detail: format!(
            "selected K = {selected:?}, error {error:.4e} vs 2 delta = {:.4e}",
            2.0 * report.delta
        ),
    }
}

fn read_dir_files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for run in fs::read_dir(dir).unwrap() {
        let run = run.unwrap().path();
        for f in fs::read_dir(&run).unwrap() {
            let f = f.unwrap().path();
            let name = format!(
                "{}/{}",
                run.file_name().unwrap().to_string_lossy(),
                f.file_name().unwrap().to_string_lossy()
            );
            let mut bytes = fs::read(&f).unwrap();
            if name.ends_with("manifest.json") {
                let mut v: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
                v.as_object_mut().unwrap().remove("timestamp");
                bytes = serde_json::to_vec(&v).unwrap();
            }
            out.insert(name, bytes);
        }
    }
    out
}

fn infrastructure() -> Verdict {
    let mut notes = Vec::new();
    let mut ok = true;

    // Every subcommand, twice with different thread counts, small path counts.
    let runs: [(&[&str], &str, &str); 7] = [
        (&["run-convergence", "--axis", "spatial"], "spatial-mu1.toml", "6"),
        (&["run-convergence", "--axis", "temporal"], "temporal-mu4.toml", "6"),
        (&["run-convergence", "--axis", "combined"], "combined-mu2.toml", "4"),
        (&["run-convergence", "--axis", "epsilon"], "epsilon.toml", "6"),
        (&["run-moments"], "moments.toml", "6"),
        (&["run-meshing"], "meshing.toml", "4"),
        (&["run-lemma-tests"], "lemmas.toml", "2"),
    ];
    let dirs: Vec<tempfile::TempDir> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
    for (dir, threads) in dirs.iter().zip(["1", "3", "1"]) {
        for (args, cfg, paths) in &runs {
            let cfg = configs().join(cfg);
            let mut argv = vec!["snls-lab".to_string()];
            argv.extend(args.iter().map(|s| s.to_string()));
            argv.extend([
                "--config".into(),
                cfg.to_string_lossy().into_owned(),
                "--paths".into(),
                paths.to_string(),
                "--threads".into(),
                threads.into(),
                "--quiet".into(),
                "--out".into(),
                dir.path().to_string_lossy().into_owned(),
            ]);
            let code = cli::run(argv);
            if code == cli::EXIT_USAGE {
                ok = false;
                notes.push(format!("{args:?} rejected its config"));
            }
        }
    }
    let contents: Vec<_> = dirs.iter().map(|d| read_dir_files(d.path())).collect();
    let csvs = contents[0].keys().filter(|k| k.ends_with(".csv")).count();
    let identical = contents[0] == contents[1] && contents[0] == contents[2];
    ok &= identical && csvs >= 10;
    notes.push(format!(
        "{csvs} CSV files {} across threads 1/3 and a repeat",
        if identical { "identical" } else { "DIFFER" }
    ));

    // Telescoping of coarse increments onto the fine path.
    let noise = NoiseSpec::power_family(&FourierGrid::one_dim(16), 2.0).unwrap();
    let path = sample_path(&noise, PathSeed::derive(9, 4), 1 << 10, 1.0).unwrap();
    let ladder: Vec<LadderPoint> = [1, 2, 8, 64, 1024]
        .iter()
        .map(|&steps| LadderPoint { k_cut: 4, steps })
        .collect();
    let telescopes = check_coupling(&path, &ladder).is_ok();
    ok &= telescopes;
    notes.push(format!("telescoping {}", if telescopes { "exact" } else { "BROKEN" }));

    // Planted power laws.
    let mut worst = 0.0f64;
    for (rate, c) in [(-2.0, 3.0), (0.5, 0.7), (-0.5, 1.3), (1.0, 0.01)] {
        let xs: Vec<f64> = [5.0, 9.0, 17.0, 33.0, 65.0].to_vec();
        let ys: Vec<f64> = xs.iter().map(|x: &f64| c * x.powf(rate)).collect();
        let fit = fit_points(Axis::N, &xs, &ys).unwrap();
        worst = worst.max((fit.slope - rate).abs());
    }
    ok &= worst <= PLANTED_TOL;
    notes.push(format!("planted slopes recovered to {worst:.1e}"));

    Verdict {
        pass: ok,
        detail: notes.join("; "),
    }
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("1 semigroup lemma suite", lemma_suite),
        ("2 unitarity and closed-form recursion", unitarity_and_oracle),
        ("3 spatial rate, mu = 1", || spatial("spatial-mu1.toml", 1.0)),
        ("3 spatial rate, mu = 2", || spatial("spatial-mu2.toml", 2.0)),
        ("4 temporal rate", temporal),
        ("5 eps scaling", epsilon_scaling),
        ("6 moments and Hölder", moments),
        ("7 meshing strategy", meshing),
        ("8 infrastructure", infrastructure),
    ];
    let mut failures = 0;
    for (name, run) in criteria {
        let start = Instant::now();
        let v = run();
        let verdict = if v.pass { "PASS" } else { "FAIL" };
        if !v.pass {
            failures += 1;
        }
        println!(
            "criterion {name}: {verdict} [{:.1} s] {}",
            start.elapsed().as_secs_f64(),
            v.detail
        );
    }
    println!("acceptance: {} of 9 checks passed", 9 - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
