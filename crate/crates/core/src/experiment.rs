//! Configuration files, seeded trial drivers and their CSV/JSON outputs.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classes::{ClassMember, ClassSpec};
use crate::entropy::{measurement_lower_bound, scan_class, theorem_bound_check, GrowthModel};
use crate::error::{Error, Result};
use crate::hilbert::BasisSpec;
use crate::jl::{random_subspace, required_measurements, DEFAULT_JL_CONSTANT};
use crate::net::{build_net, format_log, EpsilonNet, NetOptions, DEFAULT_JUMP_SHARE, DEFAULT_M_MAX};
use crate::reconstruct::{preprocess, PreparedSampler, PreprocessOptions};
use crate::rng::{derive_seed, domain, stream};
use crate::tail::{default_dims, fit_tail_model, validate_tail_model, TailDecayModel};

const DEFAULT_AMBIENT: usize = 4096;
const DEFAULT_TAIL_SAMPLES: usize = 2000;
/// 97.5% standard normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

fn default_ambient() -> usize {
    DEFAULT_AMBIENT
}
fn default_jl() -> f64 {
    DEFAULT_JL_CONSTANT
}
fn default_m_max() -> u64 {
    DEFAULT_M_MAX
}
fn default_share() -> f64 {
    DEFAULT_JUMP_SHARE
}
fn default_tail_samples() -> usize {
    DEFAULT_TAIL_SAMPLES
}
fn default_validation() -> usize {
    100
}
fn default_centers_limit() -> u64 {
    10_000
}

fn parse_toml<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    toml::from_str(text).map_err(|e| Error::parse(format!("config: {}", e.message())))
}

fn read_config(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::usage(format!("cannot read config '{}': {e}", path.display())))
}

fn parse_class(s: &str, basis: BasisSpec) -> Result<ClassSpec> {
    let spec = ClassSpec::from_str(s)?;
    spec.validate_for(basis)?;
    Ok(spec)
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value)
        .map(|mut s| {
            s.push('\n');
            s
        })
        .map_err(|e| Error::Internal(format!("json: {e}")))
}

fn csv_text(header: &[&str], rows: Vec<Vec<String>>) -> Result<String> {
    let err = |e: csv::Error| Error::Internal(format!("csv: {e}"));
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(&r).map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Internal(format!("csv: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::Internal(e.to_string()))
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

/// Files produced by one driver plus a one-line console summary.
#[derive(Clone, Debug, PartialEq)]
pub struct Artifacts {
    pub files: Vec<(String, String)>,
    pub summary_line: String,
}

impl Artifacts {
    pub fn file(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, c)| c.as_str())
    }

    pub fn write_to(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        for (name, content) in &self.files {
            fs::write(dir.join(name), content)?;
        }
        Ok(())
    }
}

/// Wilson score interval at 95%.
pub fn wilson_interval(successes: usize, trials: usize) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0).min(p), (center + half).min(1.0).max(p))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialMode {
    /// One signal, a fresh operator per trial.
    FixedX,
    /// One operator, a fresh signal per trial.
    FixedW,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub class: String,
    pub eps: f64,
    pub p: f64,
    #[serde(default)]
    pub delta: f64,
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    pub mode: TrialMode,
    #[serde(default = "default_jl")]
    pub jl_constant: f64,
    #[serde(default = "default_ambient")]
    pub ambient_dim: usize,
    #[serde(default = "default_m_max")]
    pub m_max: u64,
    #[serde(default = "default_share")]
    pub jump_share: f64,
    #[serde(default = "default_tail_samples")]
    pub tail_samples: usize,
    #[serde(default)]
    pub tail_dims: Option<Vec<usize>>,
    /// Fixed tail model; all three or none.
    #[serde(default)]
    pub tail_c: Option<f64>,
    #[serde(default)]
    pub tail_beta: Option<f64>,
    #[serde(default)]
    pub tail_r: Option<f64>,
    /// Use this net center as the signal instead of a class sample.
    #[serde(default)]
    pub center: Option<u64>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = parse_toml(text)?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&read_config(path)?)
    }

    pub fn basis(&self) -> Result<BasisSpec> {
        BasisSpec::trig(self.ambient_dim)
    }

    pub fn spec(&self) -> Result<ClassSpec> {
        parse_class(&self.class, self.basis()?)
    }

    fn check(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::usage("trials must be >= 1"));
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::usage(format!("eps must be positive, got {}", self.eps)));
        }
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(Error::usage(format!("p must lie in (0, 1), got {}", self.p)));
        }
        if !(self.delta >= 0.0 && self.delta < 1.0) {
            return Err(Error::usage(format!("delta must lie in [0, 1), got {}", self.delta)));
        }
        if !(self.jump_share > 0.0 && self.jump_share < 1.0) {
            return Err(Error::usage(format!("jump_share must lie in (0, 1), got {}", self.jump_share)));
        }
        let fixed = [self.tail_c, self.tail_beta, self.tail_r];
        if fixed.iter().any(Option::is_some) && !fixed.iter().all(Option::is_some) {
            return Err(Error::usage("tail_c, tail_beta and tail_r must be given together"));
        }
        self.spec().map(|_| ())
    }

    fn net_options(&self) -> NetOptions {
        NetOptions { m_max: self.m_max, jump_share: self.jump_share }
    }
}

/// One row of `trials.csv`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub index: u64,
    pub projected_distance: f64,
    pub within_ball: bool,
    pub ambient_error: f64,
    pub guarantee_met: bool,
    pub distortion_ok: bool,
    pub tails_ok: bool,
    pub coverage_ok: bool,
}

impl TrialRecord {
    /// Distortion, exact measurements and tail bounds all hold.
    pub fn premises_hold(&self, exact: bool) -> bool {
        self.distortion_ok && exact && self.tails_ok
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UpperBoundCheck {
    pub n_used: usize,
    pub entropy: f64,
    pub bound: f64,
    pub ok: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LowerBoundCheck {
    /// Entropy of the net at radius `eps`.
    pub entropy: f64,
    /// `None` for exact measurements.
    pub bound: Option<f64>,
    pub ok: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ImplicationCounts {
    pub premise_trials: usize,
    pub violations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentSummary {
    pub class: String,
    pub mode: TrialMode,
    pub eps: f64,
    pub p: f64,
    pub delta: f64,
    pub trials: usize,
    pub seed: u64,
    pub d: usize,
    pub n: usize,
    pub required_n: usize,
    #[serde(rename = "M")]
    pub m: u64,
    pub log2_m: f64,
    pub clamped: bool,
    pub decoder: String,
    pub tail_model: TailDecayModel,
    pub successes: usize,
    pub success_rate: f64,
    pub success_interval: (f64, f64),
    pub within_ball: usize,
    pub mean_error: f64,
    pub max_error: f64,
    pub distortion_failures: usize,
    pub distortion_scope: String,
    pub coverage_failures: usize,
    pub theorem_bound: UpperBoundCheck,
    pub lower_bound: LowerBoundCheck,
    pub implication: ImplicationCounts,
}

#[derive(Clone, Debug)]
pub struct ExperimentRun {
    pub summary: ExperimentSummary,
    pub records: Vec<TrialRecord>,
}

impl ExperimentRun {
    pub fn trials_csv(&self) -> Result<String> {
        let s = &self.summary;
        let rows = self
            .records
            .iter()
            .map(|r| {
                vec![
                    r.trial.to_string(),
                    r.seed.to_string(),
                    s.class.clone(),
                    s.eps.to_string(),
                    s.p.to_string(),
                    s.d.to_string(),
                    s.n.to_string(),
                    s.m.to_string(),
                    s.clamped.to_string(),
                    s.delta.to_string(),
                    r.projected_distance.to_string(),
                    r.within_ball.to_string(),
                    r.ambient_error.to_string(),
                    r.guarantee_met.to_string(),
                    r.distortion_ok.to_string(),
                ]
            })
            .collect();
        csv_text(
            &[
                "trial",
                "seed",
                "class",
                "eps",
                "p",
                "d",
                "n",
                "M",
                "clamped",
                "delta",
                "projected_distance",
                "within_ball",
                "ambient_error",
                "guarantee_met",
                "distortion_ok",
            ],
            rows,
        )
    }

    pub fn artifacts(&self) -> Result<Artifacts> {
        let s = &self.summary;
        Ok(Artifacts {
            files: vec![("trials.csv".into(), self.trials_csv()?), ("summary.json".into(), to_json(s)?)],
            summary_line: format!(
                "success {}/{} = {:.3} (95% CI {:.3}..{:.3}), d={} n={} M={} clamped={}",
                s.successes, s.trials, s.success_rate, s.success_interval.0, s.success_interval.1, s.d, s.n, s.m, s.clamped
            ),
        })
    }
}

/// Tail model from the config, fitted when not given explicitly.
pub fn experiment_tail_model(cfg: &ExperimentConfig) -> Result<TailDecayModel> {
    if let (Some(c), Some(beta), Some(r)) = (cfg.tail_c, cfg.tail_beta, cfg.tail_r) {
        return TailDecayModel::new(c, beta, r);
    }
    let basis = cfg.basis()?;
    let dims = cfg.tail_dims.clone().unwrap_or_else(|| default_dims(basis));
    Ok(fit_tail_model(&cfg.spec()?, basis, cfg.tail_samples, &dims, cfg.seed)?.model)
}

/// Preprocesses once, then runs the trials in parallel.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentRun> {
    let basis = cfg.basis()?;
    let spec = cfg.spec()?;
    let model = experiment_tail_model(cfg)?;
    let opts = PreprocessOptions {
        jl_constant: cfg.jl_constant,
        net: cfg.net_options(),
        operator_seed: derive_seed(cfg.seed, domain::OPERATOR, 0),
    };
    let sampler = preprocess(&spec, basis, cfg.eps, cfg.p, model, opts)?;
    let m = sampler.net_size();
    if let Some(c) = cfg.center {
        if c >= m {
            return Err(Error::usage(format!("center {c} is out of range for a net of {m} centers")));
        }
    }
    let signal_for = |index: u64| -> Result<ClassMember> {
        match cfg.center {
            Some(c) => sampler.net().center(c),
            None => spec.sample(basis, &mut stream(cfg.seed, domain::SIGNAL, index)),
        }
    };
    let fixed_x = match cfg.mode {
        TrialMode::FixedX => Some(signal_for(0)?),
        TrialMode::FixedW => None,
    };
    let records: Vec<TrialRecord> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| match &fixed_x {
            Some(x) => {
                let seed = derive_seed(cfg.seed, domain::OPERATOR, t as u64 + 1);
                run_trial(&sampler.with_operator_seed(seed)?, t, seed, x, cfg.delta)
            }
            None => {
                let seed = derive_seed(cfg.seed, domain::SIGNAL, t as u64);
                run_trial(&sampler, t, seed, &signal_for(t as u64)?, cfg.delta)
            }
        })
        .collect::<Result<_>>()?;
    let summary = summarize(cfg, &spec, &sampler, &records)?;
    Ok(ExperimentRun { summary, records })
}

fn run_trial(
    s: &PreparedSampler,
    trial: usize,
    seed: u64,
    member: &ClassMember,
    delta: f64,
) -> Result<TrialRecord> {
    let y = s.measure(&member.signal, delta, &mut stream(seed, domain::NOISE, trial as u64))?;
    let mut out = s.reconstruct(&y, delta)?;
    s.score(&member.signal, &mut out)?;
    let premises = s.premises(member, &out)?;
    let distortion_ok = match s.full_distortion(&member.signal)? {
        Some(full) => full.ok,
        None => premises.pair_distortion.ok,
    };
    Ok(TrialRecord {
        trial,
        seed,
        index: out.index.unwrap_or(0),
        projected_distance: out.projected_distance,
        within_ball: out.within_ball,
        ambient_error: out.ambient_error.unwrap_or(f64::NAN),
        guarantee_met: out.guarantee_met.unwrap_or(false),
        distortion_ok,
        tails_ok: premises.tails_ok,
        coverage_ok: premises.coverage_ok,
    })
}

fn summarize(
    cfg: &ExperimentConfig,
    spec: &ClassSpec,
    s: &PreparedSampler,
    records: &[TrialRecord],
) -> Result<ExperimentSummary> {
    let log = s.log();
    let trials = records.len();
    let successes = records.iter().filter(|r| r.guarantee_met).count();
    let errors: Vec<f64> = records.iter().map(|r| r.ambient_error).collect();
    let exact = cfg.delta == 0.0;
    let premise: Vec<&TrialRecord> = records.iter().filter(|r| r.premises_hold(exact)).collect();
    let entropy = log.log2_m;
    let k = 20.0 / (1.0 - cfg.p);
    let theorem_bound = UpperBoundCheck {
        n_used: log.n,
        entropy,
        bound: k * entropy + k + 1.0,
        ok: theorem_bound_check(log.n, cfg.p, entropy),
    };
    let h_eps = EpsilonNet::plan(spec, s.net().basis(), cfg.eps, cfg.net_options())?.log2_size();
    let lower = if exact { None } else { Some(measurement_lower_bound(h_eps, cfg.delta)?) };
    Ok(ExperimentSummary {
        class: spec.canonical(),
        mode: cfg.mode,
        eps: cfg.eps,
        p: cfg.p,
        delta: cfg.delta,
        trials,
        seed: cfg.seed,
        d: log.d,
        n: log.n,
        required_n: log.required_n,
        m: log.m,
        log2_m: log.log2_m,
        clamped: log.clamped,
        decoder: log.decoder.to_string(),
        tail_model: *s.tail_model(),
        successes,
        success_rate: successes as f64 / trials as f64,
        success_interval: wilson_interval(successes, trials),
        within_ball: records.iter().filter(|r| r.within_ball).count(),
        mean_error: errors.iter().sum::<f64>() / trials as f64,
        max_error: errors.iter().copied().fold(0.0, f64::max),
        distortion_failures: records.iter().filter(|r| !r.distortion_ok).count(),
        distortion_scope: if s.checks_all_centers() { "all_centers" } else { "proof_points" }.into(),
        coverage_failures: records.iter().filter(|r| !r.coverage_ok).count(),
        theorem_bound,
        lower_bound: LowerBoundCheck { entropy: h_eps, bound: lower, ok: lower.is_none_or(|b| log.n as f64 >= b) },
        implication: ImplicationCounts {
            premise_trials: premise.len(),
            violations: premise.iter().filter(|r| !r.guarantee_met).count(),
        },
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JlCheckConfig {
    pub d: usize,
    pub m: usize,
    pub p: f64,
    /// Number of independent operator draws.
    pub seeds: usize,
    #[serde(default = "default_jl")]
    pub jl_constant: f64,
    #[serde(default)]
    pub seed: u64,
}

impl JlCheckConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = parse_toml(text)?;
        if cfg.seeds == 0 {
            return Err(Error::usage("seeds must be >= 1"));
        }
        if cfg.d == 0 {
            return Err(Error::usage("d must be >= 1"));
        }
        required_measurements(cfg.p, cfg.m as u64, cfg.jl_constant)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&read_config(path)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct JlCheckSummary {
    pub d: usize,
    pub m: usize,
    pub n: usize,
    pub clamped: bool,
    pub p: f64,
    pub seeds: usize,
    pub seed: u64,
    pub successes: usize,
    pub success_fraction: f64,
    pub success_interval: (f64, f64),
    pub min_ratio: Option<f64>,
    pub max_ratio: Option<f64>,
}

/// `m` random unit vectors in `R^d`, drawn from `seed`.
pub fn random_unit_vectors(d: usize, m: usize, seed: u64) -> Vec<Vec<f64>> {
    (0..m as u64)
        .map(|i| {
            let mut rng = stream(seed, domain::POINTS, i);
            let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let norm = crate::hilbert::norm(&v);
            v.into_iter().map(|x| x / norm).collect()
        })
        .collect()
}

/// Fraction of operator draws that keep every pair of a fixed point set
/// inside the distortion band.
pub fn run_jl_check(cfg: &JlCheckConfig) -> Result<Artifacts> {
    let n = required_measurements(cfg.p, cfg.m as u64, cfg.jl_constant)?.min(cfg.d);
    let points = random_unit_vectors(cfg.d, cfg.m, cfg.seed);
    let draws: Vec<(u64, crate::jl::DistortionReport)> = (0..cfg.seeds as u64)
        .into_par_iter()
        .map(|i| {
            let seed = derive_seed(cfg.seed, domain::OPERATOR, i);
            Ok((seed, random_subspace(cfg.d, n, seed)?.distortion_ok(&points)?))
        })
        .collect::<Result<_>>()?;
    let successes = draws.iter().filter(|d| d.1.ok).count();
    let summary = JlCheckSummary {
        d: cfg.d,
        m: cfg.m,
        n,
        clamped: n == cfg.d,
        p: cfg.p,
        seeds: cfg.seeds,
        seed: cfg.seed,
        successes,
        success_fraction: successes as f64 / cfg.seeds as f64,
        success_interval: wilson_interval(successes, cfg.seeds),
        min_ratio: draws.iter().filter_map(|d| d.1.min_ratio).reduce(f64::min),
        max_ratio: draws.iter().filter_map(|d| d.1.max_ratio).reduce(f64::max),
    };
    let rows = draws
        .iter()
        .enumerate()
        .map(|(i, (seed, r))| {
            vec![i.to_string(), seed.to_string(), r.ok.to_string(), opt(r.min_ratio), opt(r.max_ratio)]
        })
        .collect();
    Ok(Artifacts {
        files: vec![
            ("draws.csv".into(), csv_text(&["draw", "seed", "ok", "min_ratio", "max_ratio"], rows)?),
            ("summary.json".into(), to_json(&summary)?),
        ],
        summary_line: format!(
            "all-pairs distortion success {}/{} = {:.3} (d={} m={} n={})",
            successes, cfg.seeds, summary.success_fraction, cfg.d, cfg.m, n
        ),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntropyScanConfig {
    pub class: String,
    /// Net radii, strictly decreasing.
    pub eps: Vec<f64>,
    pub model: String,
    #[serde(default = "default_ambient")]
    pub ambient_dim: usize,
    #[serde(default = "default_share")]
    pub jump_share: f64,
    /// Accepted for a uniform command line; the scan is deterministic.
    #[serde(default)]
    pub seed: u64,
}

impl EntropyScanConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = parse_toml(text)?;
        cfg.model.parse::<GrowthModel>()?;
        parse_class(&cfg.class, BasisSpec::trig(cfg.ambient_dim)?)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&read_config(path)?)
    }
}

pub fn run_entropy_scan(cfg: &EntropyScanConfig) -> Result<Artifacts> {
    let basis = BasisSpec::trig(cfg.ambient_dim)?;
    let spec = parse_class(&cfg.class, basis)?;
    let model: GrowthModel = cfg.model.parse()?;
    let opts = NetOptions { m_max: u64::MAX, jump_share: cfg.jump_share };
    let scan = scan_class(&spec, basis, &cfg.eps, model, opts)?;
    let line = match scan.exponent() {
        Some(m) => format!("{}: power exponent {m:.4}, R^2 {:.4}", spec, scan.r_squared),
        None => format!(
            "{}: logsquare coefficients {:?}, R^2 {:.4}",
            spec, scan.params, scan.r_squared
        ),
    };
    #[derive(Serialize)]
    struct Summary<'a> {
        class: String,
        #[serde(flatten)]
        scan: &'a crate::entropy::EntropyScan,
        exponent: Option<f64>,
    }
    let summary = Summary { class: spec.canonical(), scan: &scan, exponent: scan.exponent() };
    Ok(Artifacts {
        files: vec![("scan.csv".into(), scan.to_csv()?), ("summary.json".into(), to_json(&summary)?)],
        summary_line: line,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailfitConfig {
    pub class: String,
    #[serde(default = "default_tail_samples")]
    pub samples: usize,
    #[serde(default = "default_validation")]
    pub validation_samples: usize,
    #[serde(default)]
    pub dims: Option<Vec<usize>>,
    #[serde(default = "default_ambient")]
    pub ambient_dim: usize,
    /// Exponent to compare against; defaults to 1 for piecewise classes.
    #[serde(default)]
    pub nominal_beta: Option<f64>,
    #[serde(default)]
    pub seed: u64,
}

impl TailfitConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = parse_toml(text)?;
        parse_class(&cfg.class, BasisSpec::trig(cfg.ambient_dim)?)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&read_config(path)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TailfitReport {
    pub class: String,
    pub seed: u64,
    pub model: TailDecayModel,
    pub r_squared: f64,
    pub points: usize,
    pub samples: usize,
    pub dims: Vec<usize>,
    pub validation: crate::tail::TailValidation,
    pub nominal_beta: Option<f64>,
    /// Fitted minus nominal exponent.
    pub beta_discrepancy: Option<f64>,
    pub note: Option<String>,
}

pub fn run_tailfit(cfg: &TailfitConfig) -> Result<(TailfitReport, Artifacts)> {
    let basis = BasisSpec::trig(cfg.ambient_dim)?;
    let spec = parse_class(&cfg.class, basis)?;
    let dims = cfg.dims.clone().unwrap_or_else(|| default_dims(basis));
    let fit = fit_tail_model(&spec, basis, cfg.samples, &dims, cfg.seed)?;
    let validation = validate_tail_model(&fit.model, &spec, basis, cfg.validation_samples, &dims, cfg.seed)?;
    let piecewise = matches!(spec, ClassSpec::PiecewiseCk { .. } | ClassSpec::PiecewiseAnalytic { .. });
    let nominal = cfg.nominal_beta.or(piecewise.then_some(1.0));
    let discrepancy = nominal.map(|b| fit.model.beta - b);
    let note = discrepancy.filter(|d| d.abs() > 0.1).map(|_| {
        "fitted exponent differs from the nominal one; a jump gives coefficients of order 1/j, \
         so the l2 tail beyond d decays like d^(-1/2)"
            .to_string()
    });
    let report = TailfitReport {
        class: spec.canonical(),
        seed: cfg.seed,
        model: fit.model,
        r_squared: fit.r_squared,
        points: fit.points,
        samples: fit.samples,
        dims: fit.dims,
        validation,
        nominal_beta: nominal,
        beta_discrepancy: discrepancy,
        note,
    };
    let line = format!(
        "{}: C={:.4} beta={:.4} R={:.4} R^2={:.3}, {} bound violations on {} validation samples",
        report.class,
        report.model.c,
        report.model.beta,
        report.model.r,
        report.r_squared,
        report.validation.bound_violations,
        report.validation.samples
    );
    let artifacts = Artifacts { files: vec![("tailfit.json".into(), to_json(&report)?)], summary_line: line };
    Ok((report, artifacts))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetBuildConfig {
    pub class: String,
    /// Net radius.
    pub eps1: f64,
    #[serde(default = "default_ambient")]
    pub ambient_dim: usize,
    #[serde(default = "default_m_max")]
    pub m_max: u64,
    #[serde(default = "default_share")]
    pub jump_share: f64,
    /// Centers are written only for nets at most this large.
    #[serde(default = "default_centers_limit")]
    pub centers_limit: u64,
    #[serde(default)]
    pub seed: u64,
}

impl NetBuildConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = parse_toml(text)?;
        parse_class(&cfg.class, BasisSpec::trig(cfg.ambient_dim)?)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&read_config(path)?)
    }
}

pub fn run_net_build(cfg: &NetBuildConfig) -> Result<Artifacts> {
    let basis = BasisSpec::trig(cfg.ambient_dim)?;
    let spec = parse_class(&cfg.class, basis)?;
    let net = build_net(&spec, basis, cfg.eps1, NetOptions { m_max: cfg.m_max, jump_share: cfg.jump_share })?;
    let mut files = vec![
        ("net_log.json".into(), to_json(&net.log_json())?),
        ("net_log.txt".into(), format_log(&net)),
    ];
    let m = net.size().expect("budget-checked nets are indexable");
    if m <= cfg.centers_limit {
        files.push(("centers.txt".into(), net.to_text()?));
    }
    Ok(Artifacts {
        files,
        summary_line: format!("{}: M={} log2 M={:.4} at eps1={}", spec, m, net.log2_size(), cfg.eps1),
    })
}
