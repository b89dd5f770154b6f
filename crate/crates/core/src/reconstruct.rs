//! Preprocessing (truncation dimension, net, operator, projected net) and
//! nearest-projected-center decoding.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::classes::{ClassMember, ClassSpec};
use crate::error::{Error, Result};
use crate::hilbert::{distance, dot, BasisSpec, Signal};
use crate::jl::{measurements_for_ln, random_subspace, DistortionReport, MeasurementOperator, DEFAULT_JL_CONSTANT};
use crate::net::{build_net, EpsilonNet, NetOptions, SingleJumpGeometry};
use crate::tail::TailDecayModel;

/// Dense projected nets are limited to this many stored values (`M · n`).
pub const DENSE_VALUE_LIMIT: u64 = 1 << 25;
/// Largest `M + 1` for which distortion is checked over every center.
pub const FULL_Z_LIMIT: u64 = 2048;

const CHUNK: u64 = 1024;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PreprocessOptions {
    pub jl_constant: f64,
    pub net: NetOptions,
    pub operator_seed: u64,
}

impl Default for PreprocessOptions {
    fn default() -> Self {
        Self { jl_constant: DEFAULT_JL_CONSTANT, net: NetOptions::default(), operator_seed: 0 }
    }
}

/// Summary of a preprocessing run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PreprocessLog {
    pub d: usize,
    pub n: usize,
    /// Measurement count before clamping to `d`.
    pub required_n: usize,
    #[serde(rename = "M")]
    pub m: u64,
    pub log2_m: f64,
    pub clamped: bool,
    pub decoder: &'static str,
}

#[derive(Clone, Debug)]
enum ProjectedNet {
    /// Row-major `M × n`.
    Dense { rows: Vec<f64> },
    SingleJump(Arc<JumpProjection>),
}

#[derive(Clone, Debug)]
struct JumpProjection {
    geometry: SingleJumpGeometry,
    /// Row-major `configs × n`: images of the indicator of `[−π, p_r)`.
    left: Vec<f64>,
    /// Image of the constant function 1.
    whole: Vec<f64>,
    left_sq: Vec<f64>,
    left_whole: Vec<f64>,
    whole_sq: f64,
}

/// Everything fixed before measuring.
#[derive(Clone, Debug)]
pub struct PreparedSampler {
    eps: f64,
    eps1: f64,
    p: f64,
    tail_model: TailDecayModel,
    d: usize,
    net: EpsilonNet,
    operator: MeasurementOperator,
    projected: ProjectedNet,
    required_n: usize,
    clamped: bool,
    /// First `d` coefficients of every center, kept for small nets.
    center_prefixes: Option<Arc<Vec<Vec<f64>>>>,
    center_distortion: Option<DistortionReport>,
}

/// Decoder output for one measurement vector.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ReconstructionOutcome {
    pub index: Option<u64>,
    pub projected_distance: f64,
    pub within_ball: bool,
    pub ambient_error: Option<f64>,
    pub guarantee_met: Option<bool>,
}

/// The three triangle terms bounding the ambient error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GuaranteeReport {
    /// `|x − P_d x|`, budget `ε₁`.
    pub signal_tail: f64,
    /// `|P_d x − P_d x_{j₁}|`, budget `4ε₁`.
    pub projected_gap: f64,
    /// `|P_d x_{j₁} − x_{j₁}|`, budget `ε₁`.
    pub center_tail: f64,
    pub signal_tail_ok: bool,
    pub projected_gap_ok: bool,
    pub center_tail_ok: bool,
    pub ambient_error: f64,
    pub guarantee_met: bool,
}

/// Hypotheses of the error chain, checked against ground truth.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ProofPremises {
    /// Covering center of the signal.
    pub covering_index: u64,
    pub coverage_distance: f64,
    pub coverage_ok: bool,
    pub tails_ok: bool,
    /// Distortion over `{P_d x, P_d x_{j₀}, P_d x_{j₁}}`.
    pub pair_distortion: DistortionReport,
}

pub fn preprocess(
    spec: &ClassSpec,
    basis: BasisSpec,
    eps: f64,
    p: f64,
    tail_model: TailDecayModel,
    opts: PreprocessOptions,
) -> Result<PreparedSampler> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::usage(format!("eps must be positive, got {eps}")));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::usage(format!("p must lie in (0, 1), got {p}")));
    }
    let eps1 = eps / 6.0;
    let required_d = tail_model.required_dimension(eps1);
    if required_d > basis.ambient_dim() as u64 {
        return Err(Error::AmbientTooSmall { required: required_d, available: basis.ambient_dim() });
    }
    let d = required_d as usize;
    let net = build_net(spec, basis, eps1, opts.net)?;
    let m = net.size().expect("budget-checked nets are indexable");
    let required_n = measurements_for_ln(p, ((m as f64) + 1.0).ln(), opts.jl_constant)?;
    let n = required_n.min(d);
    let operator = random_subspace(d, n, opts.operator_seed)?;
    PreparedSampler::assemble(eps, p, tail_model, net, operator, required_n)
}

impl PreparedSampler {
    fn assemble(
        eps: f64,
        p: f64,
        tail_model: TailDecayModel,
        net: EpsilonNet,
        operator: MeasurementOperator,
        required_n: usize,
    ) -> Result<Self> {
        let d = operator.d();
        let n = operator.n();
        let m = net.size().expect("indexable net");
        let center_prefixes = if m < FULL_Z_LIMIT {
            let all = net.centers()?;
            Some(Arc::new(all.into_iter().map(|c| c.coeffs()[..d].to_vec()).collect::<Vec<_>>()))
        } else {
            None
        };
        let projected = match net.single_jump_geometry() {
            Some(g) => ProjectedNet::SingleJump(Arc::new(JumpProjection::build(g, &operator))),
            None => {
                if m.saturating_mul(n as u64) > DENSE_VALUE_LIMIT {
                    return Err(Error::usage(format!(
                        "projected net with M = {m} and n = {n} is too large for dense decoding"
                    )));
                }
                ProjectedNet::Dense { rows: dense_rows(&net, &operator, center_prefixes.as_deref())? }
            }
        };
        let center_distortion = match (&center_prefixes, &projected) {
            (Some(prefixes), ProjectedNet::Dense { rows }) => Some(operator.distortion_projected(prefixes, rows)),
            _ => None,
        };
        Ok(Self {
            eps,
            eps1: eps / 6.0,
            p,
            tail_model,
            d,
            net,
            clamped: required_n >= d,
            required_n,
            operator,
            projected,
            center_prefixes,
            center_distortion,
        })
    }

    /// Same net and truncation with a freshly drawn operator.
    pub fn with_operator_seed(&self, seed: u64) -> Result<Self> {
        let operator = random_subspace(self.d, self.operator.n(), seed)?;
        Self::assemble(self.eps, self.p, self.tail_model, self.net.clone(), operator, self.required_n)
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn eps1(&self) -> f64 {
        self.eps1
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.operator.n()
    }

    pub fn clamped(&self) -> bool {
        self.clamped
    }

    pub fn net(&self) -> &EpsilonNet {
        &self.net
    }

    pub fn operator(&self) -> &MeasurementOperator {
        &self.operator
    }

    pub fn tail_model(&self) -> &TailDecayModel {
        &self.tail_model
    }

    pub fn net_size(&self) -> u64 {
        self.net.size().expect("indexable net")
    }

    /// True when distortion is checked over the whole projected net.
    pub fn checks_all_centers(&self) -> bool {
        self.center_prefixes.is_some()
    }

    pub fn log(&self) -> PreprocessLog {
        PreprocessLog {
            d: self.d,
            n: self.n(),
            required_n: self.required_n,
            m: self.net_size(),
            log2_m: self.net.log2_size(),
            clamped: self.clamped,
            decoder: match self.projected {
                ProjectedNet::Dense { .. } => "dense",
                ProjectedNet::SingleJump(_) => "single_jump",
            },
        }
    }

    /// `y_j` for one center.
    pub fn projected_center(&self, j: u64) -> Result<Vec<f64>> {
        let n = self.n();
        match &self.projected {
            ProjectedNet::Dense { rows } => {
                if j >= self.net_size() {
                    return Err(Error::usage(format!("center index {j} out of range")));
                }
                Ok(rows[j as usize * n..(j as usize + 1) * n].to_vec())
            }
            ProjectedNet::SingleJump(jp) => jp.center(j, n),
        }
    }

    /// Measurements of `x`, with independent uniform noise of half-width
    /// `delta · scale` per coordinate when `delta > 0`.
    pub fn measure<R: Rng + ?Sized>(&self, x: &Signal, delta: f64, rng: &mut R) -> Result<Vec<f64>> {
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(Error::usage(format!("delta must be finite and non-negative, got {delta}")));
        }
        let mut y = self.operator.apply_signal(x)?;
        if delta > 0.0 {
            let half = delta * self.operator.scale();
            y.iter_mut().for_each(|v| *v += rng.gen_range(-half..=half));
        }
        Ok(y)
    }

    /// Extra acceptance radius for noisy measurements.
    pub fn noise_slack(&self, delta: f64) -> f64 {
        (self.n() as f64).sqrt() * delta * self.operator.scale()
    }

    /// Nearest projected center (ties go to the lower index).
    pub fn reconstruct(&self, y: &[f64], delta: f64) -> Result<ReconstructionOutcome> {
        let n = self.n();
        if y.len() != n {
            return Err(Error::usage(format!("measurement vector has length {}, expected {n}", y.len())));
        }
        let (index, _) = match &self.projected {
            ProjectedNet::Dense { rows } => nearest_dense(rows, n, y),
            ProjectedNet::SingleJump(jp) => jp.nearest(y, n),
        }
        .ok_or_else(|| Error::Internal("empty projected net".into()))?;
        let projected_distance = distance(y, &self.projected_center(index)?);
        Ok(ReconstructionOutcome {
            index: Some(index),
            projected_distance,
            within_ball: projected_distance <= 2.0 * self.eps1 + self.noise_slack(delta),
            ambient_error: None,
            guarantee_met: None,
        })
    }

    /// Fills the ground-truth fields of an outcome.
    pub fn score(&self, x: &Signal, outcome: &mut ReconstructionOutcome) -> Result<()> {
        let j = outcome.index.ok_or_else(|| Error::Internal("outcome without index".into()))?;
        let center = self.net.center(j)?.signal;
        let err = x.distance(&center)?;
        outcome.ambient_error = Some(err);
        outcome.guarantee_met = Some(err <= self.eps);
        Ok(())
    }

    /// Splits the ambient error into the three triangle terms.
    pub fn verify_guarantee(&self, x: &Signal, outcome: &ReconstructionOutcome) -> Result<GuaranteeReport> {
        let j = outcome.index.ok_or_else(|| Error::Internal("outcome without index".into()))?;
        let center = self.net.center(j)?.signal;
        let xt = x.project_prefix(self.d)?;
        let ct = center.project_prefix(self.d)?;
        let signal_tail = x.distance(&xt)?;
        let projected_gap = xt.distance(&ct)?;
        let center_tail = ct.distance(&center)?;
        let ambient_error = x.distance(&center)?;
        Ok(GuaranteeReport {
            signal_tail,
            projected_gap,
            center_tail,
            signal_tail_ok: signal_tail <= self.eps1,
            projected_gap_ok: projected_gap <= 4.0 * self.eps1,
            center_tail_ok: center_tail <= self.eps1,
            ambient_error,
            guarantee_met: ambient_error <= self.eps,
        })
    }

    /// Checks the hypotheses of the error chain for a known class member.
    pub fn premises(&self, member: &ClassMember, outcome: &ReconstructionOutcome) -> Result<ProofPremises> {
        let j1 = outcome.index.ok_or_else(|| Error::Internal("outcome without index".into()))?;
        let j0 = self.net.quantize(&member.params)?;
        let c0 = self.net.center(j0)?.signal;
        let c1 = self.net.center(j1)?.signal;
        let coverage_distance = member.signal.distance(&c0)?;
        let d = self.d;
        let tails_ok = member.signal.tail_norm(d)? <= self.eps1 && c1.tail_norm(d)? <= self.eps1;
        let pts = vec![
            member.signal.coeffs()[..d].to_vec(),
            c0.coeffs()[..d].to_vec(),
            c1.coeffs()[..d].to_vec(),
        ];
        let pair_distortion = self.operator.distortion_ok(&pts)?;
        Ok(ProofPremises {
            covering_index: j0,
            coverage_distance,
            coverage_ok: coverage_distance <= self.eps1,
            tails_ok,
            pair_distortion,
        })
    }

    /// Distortion over `{P_d x} ∪ {P_d x_j}` when the net is small enough,
    /// otherwise `None`.
    pub fn full_distortion(&self, x: &Signal) -> Result<Option<DistortionReport>> {
        let (Some(prefixes), Some(base), ProjectedNet::Dense { rows }) =
            (&self.center_prefixes, &self.center_distortion, &self.projected)
        else {
            return Ok(None);
        };
        let n = self.n();
        let xt = x.coeffs()[..self.d].to_vec();
        let yx = self.operator.apply(&xt)?;
        let (mut lo, mut hi, mut pairs) = (f64::INFINITY, f64::NEG_INFINITY, base.pairs);
        for (j, c) in prefixes.iter().enumerate() {
            let dist = distance(&xt, c);
            if dist == 0.0 {
                continue;
            }
            let ratio = distance(&yx, &rows[j * n..(j + 1) * n]) / dist;
            lo = lo.min(ratio);
            hi = hi.max(ratio);
            pairs += 1;
        }
        if let (Some(a), Some(b)) = (base.min_ratio, base.max_ratio) {
            lo = lo.min(a);
            hi = hi.max(b);
        }
        if pairs == 0 {
            return Ok(Some(DistortionReport { ok: true, min_ratio: None, max_ratio: None, pairs }));
        }
        let ok = lo >= crate::jl::BAND.0 && hi <= crate::jl::BAND.1;
        Ok(Some(DistortionReport { ok, min_ratio: Some(lo), max_ratio: Some(hi), pairs }))
    }
}

fn dense_rows(net: &EpsilonNet, op: &MeasurementOperator, prefixes: Option<&Vec<Vec<f64>>>) -> Result<Vec<f64>> {
    let m = net.size().expect("indexable net");
    let d = op.d();
    let chunks: Vec<u64> = (0..m.div_ceil(CHUNK)).collect();
    let parts: Vec<Vec<f64>> = chunks
        .par_iter()
        .map(|&c| {
            let range = c * CHUNK..((c + 1) * CHUNK).min(m);
            let mut packed = Vec::with_capacity((range.end - range.start) as usize * d);
            for j in range {
                match prefixes {
                    Some(p) => packed.extend_from_slice(&p[j as usize]),
                    None => packed.extend_from_slice(&net.center(j)?.signal.coeffs()[..d]),
                }
            }
            op.apply_rows(&packed, d)
        })
        .collect::<Result<_>>()?;
    Ok(parts.concat())
}

/// `(squared distance, index)` ordering with ties to the lower index.
fn better(a: (f64, u64), b: (f64, u64)) -> bool {
    a.0 < b.0 || (a.0 == b.0 && a.1 < b.1)
}

fn nearest_dense(rows: &[f64], n: usize, y: &[f64]) -> Option<(u64, f64)> {
    let m = (rows.len() / n) as u64;
    (0..m.div_ceil(CHUNK))
        .into_par_iter()
        .filter_map(|c| {
            let mut best: Option<(f64, u64)> = None;
            for j in c * CHUNK..((c + 1) * CHUNK).min(m) {
                let row = &rows[j as usize * n..(j as usize + 1) * n];
                let d2: f64 = y.iter().zip(row).map(|(a, b)| (a - b) * (a - b)).sum();
                if best.is_none_or(|b| better((d2, j), b)) {
                    best = Some((d2, j));
                }
            }
            best
        })
        .reduce_with(|a, b| if better(b, a) { b } else { a })
        .map(|(d2, j)| (j, d2.sqrt()))
}

impl JumpProjection {
    fn build(geometry: SingleJumpGeometry, op: &MeasurementOperator) -> Self {
        let n = op.n();
        let d = op.d();
        let p = geometry.points as usize;
        let configs = (geometry.hi - geometry.lo + 1) as usize;
        let scale = op.scale();
        let sqrt_2pi = (2.0 * PI).sqrt();
        let sqrt_pi = PI.sqrt();
        let fft = FftPlanner::new().plan_fft_inverse(p);
        let columns: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let row = op.row(i);
                let mut buf = vec![Complex::new(0.0, 0.0); p];
                let mut offset = 0.0;
                let max_freq = d / 2;
                for j in 1..=max_freq {
                    let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                    let jf = j as f64;
                    let fc = if 2 * j - 1 < d { row[2 * j - 1] } else { 0.0 };
                    let fs = if 2 * j < d { row[2 * j] } else { 0.0 };
                    buf[j % p] += Complex::new(-sign * fs / jf, -sign * fc / jf);
                    offset += sign * fs / jf;
                }
                fft.process(&mut buf);
                (geometry.lo..=geometry.hi)
                    .map(|r| {
                        let pos = r as f64 * geometry.step;
                        scale * (row[0] * pos / sqrt_2pi + (buf[r as usize % p].re + offset) / sqrt_pi)
                    })
                    .collect()
            })
            .collect();
        let mut left = vec![0.0; configs * n];
        for (i, col) in columns.iter().enumerate() {
            for (c, v) in col.iter().enumerate() {
                left[c * n + i] = *v;
            }
        }
        let whole: Vec<f64> = (0..n).map(|i| scale * op.row(i)[0] * sqrt_2pi).collect();
        let left_sq = left.chunks(n).map(|u| dot(u, u)).collect();
        let left_whole = left.chunks(n).map(|u| dot(u, &whole)).collect();
        let whole_sq = dot(&whole, &whole);
        Self { geometry, left, whole, left_sq, left_whole, whole_sq }
    }

    fn levels(&self) -> &[f64] {
        &self.geometry.levels
    }

    fn center(&self, j: u64, n: usize) -> Result<Vec<f64>> {
        let g = self.levels().len() as u64;
        let configs = self.geometry.hi - self.geometry.lo + 1;
        if j >= configs * g * g {
            return Err(Error::usage(format!("center index {j} out of range")));
        }
        let (c, a, b) = (j / (g * g), (j / g) % g, j % g);
        let (a, b) = (self.levels()[a as usize], self.levels()[b as usize]);
        let u = &self.left[c as usize * n..(c as usize + 1) * n];
        Ok(u.iter().zip(&self.whole).map(|(u, w)| a * u + b * (w - u)).collect())
    }

    fn nearest(&self, y: &[f64], n: usize) -> Option<(u64, f64)> {
        let levels = self.levels();
        let g = levels.len() as u64;
        let spacing = if levels.len() > 1 { levels[1] - levels[0] } else { 1.0 };
        let lo_level = levels[0] - 0.5 * spacing;
        let yy = dot(y, y);
        let yw = dot(y, &self.whole);
        let ww = self.whole_sq;
        let configs = self.left_sq.len() as u64;
        (0..configs.div_ceil(64))
            .into_par_iter()
            .filter_map(|chunk| {
                let mut best: Option<(f64, u64)> = None;
                for c in chunk * 64..((chunk + 1) * 64).min(configs) {
                    let u = &self.left[c as usize * n..(c as usize + 1) * n];
                    let yu = dot(y, u);
                    let uu = self.left_sq[c as usize];
                    let uw = self.left_whole[c as usize];
                    let yv = yw - yu;
                    let uv = uw - uu;
                    let vv = ww - 2.0 * uw + uu;
                    for (ia, &a) in levels.iter().enumerate() {
                        let base = yy - 2.0 * a * yu + a * a * uu;
                        let lin = yv - a * uv;
                        let eval = |b: f64| base - 2.0 * b * lin + b * b * vv;
                        let candidates = if vv > 0.0 && levels.len() > 1 {
                            let t = ((lin / vv - lo_level) / spacing - 0.5).floor();
                            let i0 = t.clamp(0.0, (g - 1) as f64) as u64;
                            [i0, (i0 + 1).min(g - 1)]
                        } else {
                            [0, 0]
                        };
                        for ib in candidates {
                            let d2 = eval(levels[ib as usize]);
                            let idx = (c * g + ia as u64) * g + ib;
                            if best.is_none_or(|bst| better((d2, idx), bst)) {
                                best = Some((d2, idx));
                            }
                        }
                    }
                }
                best
            })
            .reduce_with(|a, b| if better(b, a) { b } else { a })
            .map(|(d2, j)| (j, d2.max(0.0).sqrt()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{domain, stream};

    fn model() -> TailDecayModel {
        TailDecayModel::new(1.0, 0.5, 1.0).unwrap()
    }

    #[test]
    fn truncation_dimension_example() {
        // R·C = 1, β = 1/2, eps = 0.6 → eps1 = 0.1, d = 100
        let basis = BasisSpec::trig(256).unwrap();
        let spec = ClassSpec::piecewise_ck(0, 0, 1.0, 1.0, 1.0);
        let s = preprocess(&spec, basis, 0.6, 0.5, model(), PreprocessOptions::default()).unwrap();
        assert_eq!(s.d(), 100);
        assert!((s.eps1() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn clamping_example() {
        // M = 100 at p = 0.5 needs ⌈40 ln 101⌉ = 185 > d = 100
        assert_eq!(crate::jl::required_measurements(0.5, 101, 20.0).unwrap(), 185);
        let basis = BasisSpec::trig(256).unwrap();
        // smooth order 3, amplitude chosen so the net has 100 centers is
        // awkward; use a one-jump-free class with 10 levels per piece instead
        let spec = ClassSpec::piecewise_ck(1, 0, 10.0, 1.0, 1.0);
        let s = preprocess(&spec, basis, 0.6, 0.5, model(), PreprocessOptions::default()).unwrap();
        assert!(s.net_size() >= 2);
        let want = crate::jl::required_measurements(0.5, s.net_size() + 1, 20.0).unwrap();
        assert_eq!(s.log().required_n, want);
        assert_eq!(s.n(), want.min(100));
        assert_eq!(s.clamped(), want >= 100);
    }

    #[test]
    fn large_radius_gives_unit_dimension() {
        let basis = BasisSpec::trig(64).unwrap();
        let spec = ClassSpec::piecewise_ck(0, 0, 1.0, 1.0, 1.0);
        let s = preprocess(&spec, basis, 12.0, 0.5, model(), PreprocessOptions::default()).unwrap();
        assert_eq!(s.d(), 1);
        assert_eq!(s.n(), 1);
    }

    #[test]
    fn ambient_too_small_is_reported() {
        let basis = BasisSpec::trig(64).unwrap();
        let spec = ClassSpec::piecewise_ck(0, 0, 1.0, 1.0, 1.0);
        let err = preprocess(&spec, basis, 0.6, 0.5, model(), PreprocessOptions::default()).unwrap_err();
        assert!(matches!(err, Error::AmbientTooSmall { required: 100, available: 64 }));
    }

    fn jump_sampler(seed: u64) -> PreparedSampler {
        let basis = BasisSpec::trig(128).unwrap();
        let spec = ClassSpec::piecewise_ck(0, 1, 1.0, 1.0, 1.0);
        let tm = TailDecayModel::new(5.0, 0.5, 1.0).unwrap();
        let opts = PreprocessOptions { operator_seed: seed, ..Default::default() };
        preprocess(&spec, basis, 3.0, 0.5, tm, opts).unwrap()
    }

    #[test]
    fn structured_projection_matches_direct_application() {
        let s = jump_sampler(1);
        let m = s.net_size();
        for j in [0, 1, m / 3, m / 2, m - 1] {
            let direct = s.operator().apply_signal(&s.net().center(j).unwrap().signal).unwrap();
            let fast = s.projected_center(j).unwrap();
            assert!(distance(&direct, &fast) <= 1e-10 * (1.0 + crate::hilbert::norm(&direct)), "center {j}");
        }
    }

    #[test]
    fn structured_decoder_matches_brute_force() {
        let s = jump_sampler(2);
        let m = s.net_size();
        let rows: Vec<f64> = (0..m).flat_map(|j| s.projected_center(j).unwrap()).collect();
        let n = s.n();
        for i in 0..30 {
            let x = s.net().spec().sample(s.net().basis(), &mut stream(8, domain::SIGNAL, i)).unwrap();
            let y = s.measure(&x.signal, 0.0, &mut stream(8, domain::NOISE, i)).unwrap();
            let out = s.reconstruct(&y, 0.0).unwrap();
            let (bj, bd) = nearest_dense(&rows, n, &y).unwrap();
            assert!((out.projected_distance - bd).abs() < 1e-9, "trial {i}");
            if out.index != Some(bj) {
                // only acceptable when the two are tied to rounding
                let alt = distance(&y, &s.projected_center(out.index.unwrap()).unwrap());
                assert!((alt - bd).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn exact_center_decodes_to_itself() {
        let s = jump_sampler(3);
        let j = s.net_size() / 2 + 1;
        let x = s.net().center(j).unwrap().signal;
        let y = s.measure(&x, 0.0, &mut stream(0, domain::NOISE, 0)).unwrap();
        let mut out = s.reconstruct(&y, 0.0).unwrap();
        assert!(out.projected_distance < 1e-9);
        assert!(out.within_ball);
        s.score(&x, &mut out).unwrap();
        assert_eq!(out.guarantee_met, Some(true));
    }

    #[test]
    fn ties_go_to_lower_index() {
        let rows = vec![1.0, 0.0, -1.0, 0.0, 1.0, 0.0];
        let (j, d) = nearest_dense(&rows, 2, &[0.0, 0.0]).unwrap();
        assert_eq!(j, 0);
        assert_eq!(d, 1.0);
    }

    #[test]
    fn zero_signal_is_recovered() {
        let basis = BasisSpec::trig(64).unwrap();
        let spec = ClassSpec::smooth(2, 1.0);
        let tm = TailDecayModel::new(1.0, 2.0, 1.0).unwrap();
        let s = preprocess(&spec, basis, 6.0, 0.5, tm, PreprocessOptions::default()).unwrap();
        let x = Signal::zeros(basis);
        let y = s.measure(&x, 0.0, &mut stream(0, domain::NOISE, 0)).unwrap();
        let mut out = s.reconstruct(&y, 0.0).unwrap();
        s.score(&x, &mut out).unwrap();
        assert_eq!(out.guarantee_met, Some(true));
    }

    #[test]
    fn noise_respects_half_width() {
        let s = jump_sampler(4);
        let x = s.net().center(5).unwrap().signal;
        let exact = s.measure(&x, 0.0, &mut stream(1, domain::NOISE, 0)).unwrap();
        let delta = 0.01;
        let noisy = s.measure(&x, delta, &mut stream(1, domain::NOISE, 0)).unwrap();
        let half = delta * s.operator().scale();
        assert!(exact.iter().zip(&noisy).all(|(a, b)| (a - b).abs() <= half));
        assert!(exact != noisy);
        assert!(s.measure(&x, -1.0, &mut stream(1, domain::NOISE, 0)).is_err());
    }

    #[test]
    fn guarantee_terms_for_center_signal() {
        let s = jump_sampler(5);
        let x = s.net().center(17).unwrap();
        let y = s.measure(&x.signal, 0.0, &mut stream(0, domain::NOISE, 0)).unwrap();
        let out = s.reconstruct(&y, 0.0).unwrap();
        let rep = s.verify_guarantee(&x.signal, &out).unwrap();
        assert!(rep.guarantee_met && rep.ambient_error < 1e-9);
        assert!(rep.projected_gap < 1e-9);
        assert!(rep.ambient_error <= rep.signal_tail + rep.projected_gap + rep.center_tail + 1e-12);
    }

    #[test]
    fn clamped_projection_is_isometric() {
        let basis = BasisSpec::trig(64).unwrap();
        let spec = ClassSpec::piecewise_ck(0, 0, 1.0, 1.0, 1.0);
        let tm = TailDecayModel::new(0.3, 0.5, 1.0).unwrap();
        let s = preprocess(&spec, basis, 0.6, 0.5, tm, PreprocessOptions::default()).unwrap();
        assert!(s.clamped());
        let x = spec.sample(basis, &mut stream(1, domain::SIGNAL, 0)).unwrap();
        let rep = s.full_distortion(&x.signal).unwrap().unwrap();
        assert!((rep.min_ratio.unwrap() - 1.0).abs() < 1e-10);
        assert!((rep.max_ratio.unwrap() - 1.0).abs() < 1e-10);
    }
}
