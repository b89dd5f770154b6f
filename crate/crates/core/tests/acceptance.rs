//! End-to-end acceptance checks. Run with `--nocapture` to see the report.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use rand::Rng;
use sampent_core::entropy::{exhaustive_min_cover, greedy_cover, measurement_lower_bound, theorem_bound_check};
use sampent_core::experiment::{
    run_entropy_scan, run_experiment, run_jl_check, run_tailfit, Artifacts, EntropyScanConfig, ExperimentConfig,
    ExperimentRun, JlCheckConfig, TailfitConfig,
};
use sampent_core::rng::{domain, stream};

fn config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

struct Verdict {
    id: usize,
    pass: bool,
    detail: String,
}

/// Every reconstruction run of the suite, for the bookkeeping criteria.
#[derive(Default)]
struct Ledger {
    runs: Vec<ExperimentRun>,
}

impl Ledger {
    fn record(&mut self, run: ExperimentRun) -> &ExperimentRun {
        self.runs.push(run);
        self.runs.last().unwrap()
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed())
}

fn jl_distortion() -> (Verdict, Artifacts) {
    let cfg = JlCheckConfig::load(&config("jl_check.toml")).unwrap();
    let (art, took) = timed(|| run_jl_check(&cfg).unwrap());
    let v: serde_json::Value = serde_json::from_str(art.file("summary.json").unwrap()).unwrap();
    let frac = v["success_fraction"].as_f64().unwrap();
    let n = v["n"].as_u64().unwrap();
    let pass = n == 167 && frac >= 0.5 && took < Duration::from_secs(60);
    (Verdict { id: 1, pass, detail: format!("n={n}, success fraction {frac:.3}, {took:.1?}") }, art)
}

fn reconstruction(ledger: &mut Ledger) -> (Verdict, Vec<f64>) {
    let mut parts = Vec::new();
    let mut pass = true;
    let mut rates = Vec::new();
    let (_, took) = timed(|| {
        for file in ["experiment_fixed_x.toml", "experiment_fixed_w.toml"] {
            let cfg = ExperimentConfig::load(&config(file)).unwrap();
            let s = &ledger.record(run_experiment(&cfg).unwrap()).summary;
            pass &= s.trials == 100 && s.success_rate >= 0.5 && s.success_interval.0 >= 0.4;
            rates.push(s.success_rate);
            parts.push(format!("{:?}: {}/{} (lower {:.3})", s.mode, s.successes, s.trials, s.success_interval.0));
        }
    });
    pass &= took < Duration::from_secs(180);
    (Verdict { id: 2, pass, detail: format!("{}, {took:.1?}", parts.join(", ")) }, rates)
}

fn noise_robustness(ledger: &mut Ledger, baseline: &[f64]) -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for (file, base) in ["experiment_fixed_x.toml", "experiment_fixed_w.toml"].iter().zip(baseline) {
        let mut cfg = ExperimentConfig::load(&config(file)).unwrap();
        let d = ledger.runs[0].summary.d as f64;
        cfg.delta = cfg.eps / (4.0 * d.sqrt());
        let s = &ledger.record(run_experiment(&cfg).unwrap()).summary;
        let drop = base - s.success_rate;
        pass &= drop <= 0.10;
        parts.push(format!("{:?}: {:.2} -> {:.2} (delta {:.5})", s.mode, base, s.success_rate, s.delta));
    }
    Verdict { id: 7, pass, detail: parts.join(", ") }
}

fn extra_runs(ledger: &mut Ledger) {
    let base = "class = \"smooth(order=2,amplitude=1)\"\neps = 1.5\np = 0.5\ntrials = 100\nmode = \"fixed_w\"\n";
    // clamped dense decoding with a fitted model
    let cfg = ExperimentConfig::from_toml(&format!("{base}seed = 3\ntail_samples = 500\n")).unwrap();
    ledger.record(run_experiment(&cfg).unwrap());
    // an explicit model that forces d above n
    let cfg =
        ExperimentConfig::from_toml(&format!("{base}seed = 4\ntail_c = 3.0\ntail_beta = 0.5\ntail_r = 1.0\n")).unwrap();
    let run = ledger.record(run_experiment(&cfg).unwrap());
    assert!(!run.summary.clamped);
    // a second signal stream for the single-jump class
    let mut cfg = ExperimentConfig::load(&config("experiment_fixed_w.toml")).unwrap();
    cfg.seed = 2;
    cfg.trials = 200;
    ledger.record(run_experiment(&cfg).unwrap());
}

fn implication(ledger: &Ledger) -> Verdict {
    let trials: usize = ledger.runs.iter().map(|r| r.summary.trials).sum();
    let premises: usize = ledger.runs.iter().map(|r| r.summary.implication.premise_trials).sum();
    let violations: usize = ledger.runs.iter().map(|r| r.summary.implication.violations).sum();
    Verdict {
        id: 3,
        pass: trials >= 500 && violations == 0,
        detail: format!("{trials} trials, {premises} with all premises, {violations} violations"),
    }
}

fn bookkeeping(ledger: &Ledger) -> Verdict {
    let mut bad = 0;
    let mut noisy = 0;
    for r in &ledger.runs {
        let s = &r.summary;
        if !theorem_bound_check(s.n, s.p, s.log2_m) || !s.theorem_bound.ok {
            bad += 1;
        }
        if s.delta > 0.0 {
            noisy += 1;
            let lb = measurement_lower_bound(s.lower_bound.entropy, s.delta).unwrap();
            if (s.n as f64) < lb || !s.lower_bound.ok {
                bad += 1;
            }
        }
    }
    let unit = theorem_bound_check(84, 0.5, 10.0) && !theorem_bound_check(442, 0.5, 10.0);
    Verdict {
        id: 4,
        pass: bad == 0 && noisy > 0 && unit,
        detail: format!("{} preprocess runs, {noisy} noisy, {bad} failures", ledger.runs.len()),
    }
}

fn tail_fit() -> (Verdict, Artifacts) {
    let cfg = TailfitConfig::load(&config("tailfit_pc1.toml")).unwrap();
    let (report, art) = run_tailfit(&cfg).unwrap();
    let pass = (0.4..=0.6).contains(&report.model.beta)
        && report.validation.samples == 100
        && report.validation.bound_violations == 0
        && report.nominal_beta == Some(1.0)
        && report.beta_discrepancy.is_some();
    let detail = format!(
        "beta={:.3} (nominal {:?}), {} violations on {} samples",
        report.model.beta, report.nominal_beta, report.validation.bound_violations, report.validation.samples
    );
    (Verdict { id: 5, pass, detail }, art)
}

fn entropy_rates() -> (Verdict, Vec<Artifacts>) {
    let mut pass = true;
    let mut parts = Vec::new();
    let mut arts = Vec::new();
    let (_, took) = timed(|| {
        for (file, target) in [("entropy_smooth_k1.toml", Some(1.0)), ("entropy_smooth_k2.toml", Some(0.5)), ("entropy_analytic.toml", None)] {
            let cfg = EntropyScanConfig::load(&config(file)).unwrap();
            let art = run_entropy_scan(&cfg).unwrap();
            let v: serde_json::Value = serde_json::from_str(art.file("summary.json").unwrap()).unwrap();
            let r2 = v["r_squared"].as_f64().unwrap();
            match target {
                Some(t) => {
                    let m = v["exponent"].as_f64().unwrap();
                    pass &= (m - t).abs() <= 0.2 * t;
                    parts.push(format!("exponent {m:.3} vs {t}"));
                }
                None => {
                    pass &= r2 >= 0.95;
                    parts.push(format!("logsquare R^2 {r2:.4}"));
                }
            }
            arts.push(art);
        }
    });
    pass &= took < Duration::from_secs(120);
    (Verdict { id: 6, pass, detail: format!("{}, {took:.1?}", parts.join(", ")) }, arts)
}

fn cover_oracles() -> Verdict {
    let mut violations = 0;
    let mut planar_over = 0;
    for set in 0..50u64 {
        let mut rng = stream(8, domain::POINTS, set);
        let size = rng.gen_range(1..=15);
        let eps = rng.gen_range(0.05..0.5);
        let line: Vec<Vec<f64>> = (0..size).map(|_| vec![rng.gen::<f64>()]).collect();
        let exact = exhaustive_min_cover(&line, eps).unwrap();
        let greedy = greedy_cover(&line, eps).unwrap();
        if !(exact <= greedy && greedy <= 2 * exact) {
            violations += 1;
        }
        let plane: Vec<Vec<f64>> = (0..size).map(|_| vec![rng.gen::<f64>(), rng.gen::<f64>()]).collect();
        let exact = exhaustive_min_cover(&plane, eps).unwrap();
        let greedy = greedy_cover(&plane, eps).unwrap();
        if exact > greedy {
            violations += 1;
        }
        if greedy > 2 * exact {
            planar_over += 1;
        }
    }
    Verdict {
        id: 8,
        pass: violations == 0,
        detail: format!("50 sets on a line, {violations} violations; planar sets above 2x: {planar_over} (informational)"),
    }
}

fn determinism(first: &[Artifacts], ledger: &Ledger) -> Verdict {
    let mut again = vec![jl_distortion().1, tail_fit().1];
    again.extend(entropy_rates().1);
    let mut same = again.iter().zip(first).all(|(a, b)| a.files == b.files);
    for (i, file) in ["experiment_fixed_x.toml", "experiment_fixed_w.toml"].iter().enumerate() {
        let cfg = ExperimentConfig::load(&config(file)).unwrap();
        let rerun = run_experiment(&cfg).unwrap().artifacts().unwrap();
        same &= rerun.files == ledger.runs[i].artifacts().unwrap().files;
    }
    let dir = tempfile::tempdir().unwrap();
    first[0].write_to(dir.path()).unwrap();
    let on_disk = std::fs::read_to_string(dir.path().join("summary.json")).unwrap();
    same &= on_disk == first[0].file("summary.json").unwrap();
    Verdict { id: 9, pass: same, detail: format!("{} outputs compared byte for byte", again.len() + 2) }
}

#[test]
fn acceptance_criteria() {
    let mut ledger = Ledger::default();
    let mut verdicts = Vec::new();
    let (v1, jl_art) = jl_distortion();
    verdicts.push(v1);
    let (v2, baseline) = reconstruction(&mut ledger);
    verdicts.push(v2);
    let v7 = noise_robustness(&mut ledger, &baseline);
    extra_runs(&mut ledger);
    verdicts.push(implication(&ledger));
    verdicts.push(bookkeeping(&ledger));
    let (v5, tail_art) = tail_fit();
    verdicts.push(v5);
    let (v6, scan_arts) = entropy_rates();
    verdicts.push(v6);
    verdicts.push(v7);
    verdicts.push(cover_oracles());
    let mut first = vec![jl_art, tail_art];
    first.extend(scan_arts);
    verdicts.push(determinism(&first, &ledger));
    for v in &verdicts {
        println!("criterion {}: {} ({})", v.id, if v.pass { "PASS" } else { "FAIL" }, v.detail);
    }
    let failed: Vec<usize> = verdicts.iter().filter(|v| !v.pass).map(|v| v.id).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
