//! Explicit ε-nets for the function classes.
//!
//! A net is a product of grids (the construction log). Centers are never
//! stored: center `j` is decoded from its mixed-radix digits on demand, and
//! `quantize` maps a class member to the index of a center within the net
//! radius. Jump configurations are ranked combinatorially, so a factor can
//! hold millions of configurations without enumeration.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::classes::{analytic_envelope, smooth_envelope, ClassMember, ClassSpec, MemberParams, Relaxation};
use crate::error::{Error, Result};
use crate::hilbert::{parse_real, signals_from_text, signals_to_text, BasisSpec, Signal};

pub const DEFAULT_M_MAX: u64 = 1_000_000;
/// Fraction of the net radius spent on breakpoint placement.
pub const DEFAULT_JUMP_SHARE: f64 = 0.5;

const GRID_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NetOptions {
    pub m_max: u64,
    pub jump_share: f64,
}

impl Default for NetOptions {
    fn default() -> Self {
        Self { m_max: DEFAULT_M_MAX, jump_share: DEFAULT_JUMP_SHARE }
    }
}

/// One factor of the product construction.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridFactor {
    pub label: String,
    /// Exact size when it fits in 64 bits.
    pub size: Option<u64>,
    pub log2_size: f64,
    /// Grid spacing in the factor's own units.
    pub step: f64,
}

/// Midpoint grid of `count` cells on `[lo, lo + count · spacing]`.
#[derive(Clone, Copy, Debug, PartialEq)]
struct CoefGrid {
    lo: f64,
    count: u64,
    spacing: f64,
}

impl CoefGrid {
    /// Grid on `[lo, hi]` with spacing at most `step`.
    fn covering(lo: f64, hi: f64, step: f64) -> Self {
        let width = hi - lo;
        let count = ((width / step) * (1.0 - 1e-12)).ceil().max(1.0) as u64;
        Self { lo, count, spacing: width / count as f64 }
    }

    fn symmetric(bound: f64, step: f64) -> Self {
        Self::covering(-bound, bound, step)
    }

    fn value(&self, i: u64) -> f64 {
        self.lo + (i as f64 + 0.5) * self.spacing
    }

    fn round(&self, x: f64) -> u64 {
        let cell = ((x - self.lo) / self.spacing).floor();
        if cell.is_nan() || cell < 0.0 {
            0
        } else {
            (cell as u64).min(self.count - 1)
        }
    }

    fn factor(&self, label: String) -> GridFactor {
        GridFactor { label, size: Some(self.count), log2_size: (self.count as f64).log2(), step: self.spacing }
    }
}

/// `C(n, k)` saturating at `u128::MAX`.
fn binom(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for j in 1..=k as u128 {
        let Some(num) = acc.checked_mul(n as u128 - k as u128 + j) else {
            return u128::MAX;
        };
        acc = num / j;
    }
    acc
}

/// Sorted tuples `r_0 < … < r_{s−1}` of grid indices in `[lo, hi]` with
/// consecutive differences at least `min_sep` (`0` allows repeats).
#[derive(Clone, Copy, Debug, PartialEq)]
struct JumpGrid {
    jumps: usize,
    step: f64,
    lo: u64,
    hi: u64,
    min_sep: u64,
}

impl JumpGrid {
    /// Number of free slots after removing the forced separation.
    fn slots(&self) -> i64 {
        let s = self.jumps as i64;
        self.hi as i64 - self.lo as i64 + 1 - (s - 1) * (self.min_sep as i64 - 1)
    }

    fn count(&self) -> u128 {
        let n = self.slots();
        if n < self.jumps as i64 {
            0
        } else {
            binom(n as u64, self.jumps as u64)
        }
    }

    fn log2_count(&self) -> f64 {
        let n = self.slots() as f64;
        (0..self.jumps).map(|i| ((n - i as f64) / (i as f64 + 1.0)).log2()).sum()
    }

    fn shifted(&self, r: &[u64]) -> Vec<u64> {
        r.iter()
            .enumerate()
            .map(|(i, &x)| (x as i64 - self.lo as i64 - i as i64 * (self.min_sep as i64 - 1)) as u64)
            .collect()
    }

    fn rank(&self, r: &[u64]) -> u64 {
        self.shifted(r).iter().enumerate().map(|(i, &x)| binom(x, i as u64 + 1) as u64).sum()
    }

    fn unrank(&self, mut idx: u64) -> Vec<u64> {
        let s = self.jumps;
        let n = self.slots() as u64;
        let mut shifted = vec![0u64; s];
        for i in (0..s).rev() {
            let k = i as u64 + 1;
            // largest x with C(x, k) ≤ idx
            let (mut a, mut b) = (i as u64, n - 1);
            while a < b {
                let mid = a + (b - a).div_ceil(2);
                if binom(mid, k) <= idx as u128 {
                    a = mid;
                } else {
                    b = mid - 1;
                }
            }
            shifted[i] = a;
            idx -= binom(a, k) as u64;
        }
        shifted
            .iter()
            .enumerate()
            .map(|(i, &x)| (x as i64 + self.lo as i64 + i as i64 * (self.min_sep as i64 - 1)) as u64)
            .collect()
    }

    fn position(&self, r: u64) -> f64 {
        -PI + r as f64 * self.step
    }

    fn round(&self, breakpoints: &[f64]) -> Vec<u64> {
        let mut r: Vec<u64> = breakpoints
            .iter()
            .map(|b| {
                let x = ((b + PI) / self.step).round().max(0.0) as u64;
                x.clamp(self.lo, self.hi)
            })
            .collect();
        for i in 1..r.len() {
            r[i] = r[i].max(r[i - 1] + self.min_sep);
        }
        for i in (0..r.len().saturating_sub(1)).rev() {
            r[i] = r[i].min(r[i + 1].saturating_sub(self.min_sep));
        }
        r
    }

    fn factor(&self) -> GridFactor {
        let c = self.count();
        GridFactor {
            label: "jump_configurations".into(),
            size: u64::try_from(c).ok().filter(|_| c != u128::MAX),
            log2_size: self.log2_count(),
            step: self.step,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Layout {
    Smooth {
        grids: Vec<CoefGrid>,
    },
    Piecewise {
        jumps: Option<JumpGrid>,
        pieces: usize,
        grids: Vec<CoefGrid>,
        analytic: bool,
    },
    Warped {
        tau: CoefGrid,
        params: usize,
        base: Box<EpsilonNet>,
    },
    Additive {
        weights: CoefGrid,
        count: usize,
        base: Box<EpsilonNet>,
    },
}

impl Layout {
    fn digit_count(&self) -> usize {
        match self {
            Layout::Smooth { grids } => grids.len(),
            Layout::Piecewise { jumps, pieces, grids, .. } => jumps.is_some() as usize + pieces * grids.len(),
            Layout::Warped { params, base, .. } => params + base.layout.digit_count(),
            Layout::Additive { count, base, .. } => count + base.layout.digit_count(),
        }
    }

    fn params(&self, digits: &[u64]) -> MemberParams {
        match self {
            Layout::Smooth { grids } => MemberParams::Smooth {
                coeffs: grids.iter().zip(digits).map(|(g, &d)| g.value(d)).collect(),
            },
            Layout::Piecewise { jumps, pieces, grids, analytic } => {
                let (breakpoints, rest) = match jumps {
                    Some(j) => (j.unrank(digits[0]).into_iter().map(|r| j.position(r)).collect(), &digits[1..]),
                    None => (Vec::new(), digits),
                };
                let pieces: Vec<Vec<f64>> = (0..*pieces)
                    .map(|p| {
                        let d = &rest[p * grids.len()..(p + 1) * grids.len()];
                        grids.iter().zip(d).map(|(g, &x)| g.value(x)).collect()
                    })
                    .collect();
                if *analytic {
                    MemberParams::Analytic { breakpoints, pieces }
                } else {
                    MemberParams::Piecewise { breakpoints, pieces }
                }
            }
            Layout::Warped { tau, params, base } => MemberParams::Warped {
                tau: digits[..*params].iter().map(|&d| tau.value(d)).collect(),
                base: Box::new(base.layout.params(&digits[*params..])),
            },
            Layout::Additive { weights, count, base } => {
                let split = digits.len() - count;
                MemberParams::Additive {
                    base: Box::new(base.layout.params(&digits[..split])),
                    weights: digits[split..].iter().map(|&d| weights.value(d)).collect(),
                }
            }
        }
    }

    fn digits(&self, params: &MemberParams, out: &mut Vec<u64>) -> Result<()> {
        match (self, params) {
            (Layout::Smooth { grids }, MemberParams::Smooth { coeffs }) => {
                for (i, g) in grids.iter().enumerate() {
                    out.push(g.round(coeffs.get(i).copied().unwrap_or(0.0)));
                }
            }
            (Layout::Piecewise { jumps, pieces, grids, analytic }, p) => {
                let (bps, ps) = match (p, analytic) {
                    (MemberParams::Piecewise { breakpoints, pieces }, false)
                    | (MemberParams::Analytic { breakpoints, pieces }, true) => (breakpoints, pieces),
                    _ => return Err(Error::usage("member parameters do not match the net")),
                };
                if ps.len() != *pieces {
                    return Err(Error::usage(format!("member has {} pieces, net expects {pieces}", ps.len())));
                }
                if let Some(j) = jumps {
                    if bps.len() != j.jumps {
                        return Err(Error::usage(format!("member has {} jumps, net expects {}", bps.len(), j.jumps)));
                    }
                    out.push(j.rank(&j.round(bps)));
                }
                for piece in ps {
                    for (i, g) in grids.iter().enumerate() {
                        out.push(g.round(piece.get(i).copied().unwrap_or(0.0)));
                    }
                }
            }
            (Layout::Warped { tau: grid, params: s, base }, MemberParams::Warped { base: bp, tau }) => {
                if tau.len() != *s {
                    return Err(Error::usage("warp parameter count does not match the net"));
                }
                out.extend(tau.iter().map(|&t| grid.round(t)));
                base.layout.digits(bp, out)?;
            }
            (Layout::Additive { weights: grid, count, base }, MemberParams::Additive { base: bp, weights }) => {
                if weights.len() != *count {
                    return Err(Error::usage("weight count does not match the net"));
                }
                base.layout.digits(bp, out)?;
                out.extend(weights.iter().map(|&w| grid.round(w)));
            }
            _ => return Err(Error::usage("member parameters do not match the net")),
        }
        Ok(())
    }

    fn max_half_spacing(&self) -> f64 {
        let half = |gs: &[CoefGrid]| gs.iter().map(|g| 0.5 * g.spacing).fold(0.0, f64::max);
        match self {
            Layout::Smooth { grids } | Layout::Piecewise { grids, .. } => half(grids),
            Layout::Warped { tau, base, .. } => (0.5 * tau.spacing).max(base.layout.max_half_spacing()),
            Layout::Additive { weights, base, .. } => (0.5 * weights.spacing).max(base.layout.max_half_spacing()),
        }
    }

    fn position_step(&self) -> f64 {
        match self {
            Layout::Piecewise { jumps: Some(j), .. } => j.step,
            Layout::Warped { base, .. } | Layout::Additive { base, .. } => base.layout.position_step(),
            _ => 0.0,
        }
    }
}

/// A product-structured ε₁-cover of a class.
#[derive(Clone, Debug, PartialEq)]
pub struct EpsilonNet {
    spec: ClassSpec,
    basis: BasisSpec,
    radius: f64,
    factors: Vec<GridFactor>,
    radices: Vec<u64>,
    layout: Layout,
}

/// Plans and budget-checks a net.
pub fn build_net(spec: &ClassSpec, basis: BasisSpec, eps1: f64, opts: NetOptions) -> Result<EpsilonNet> {
    let net = EpsilonNet::plan(spec, basis, eps1, opts)?;
    match net.size() {
        Some(m) if m <= opts.m_max => Ok(net),
        _ => Err(Error::BudgetExceeded { log2_m: net.log2_size(), m_max: opts.m_max }),
    }
}

impl EpsilonNet {
    /// Computes the construction without enforcing the size budget. Useful
    /// for entropy bookkeeping of nets too large to index.
    pub fn plan(spec: &ClassSpec, basis: BasisSpec, eps1: f64, opts: NetOptions) -> Result<Self> {
        if !(eps1.is_finite() && eps1 > 0.0) {
            return Err(Error::usage(format!("net radius must be positive, got {eps1}")));
        }
        if !(opts.jump_share > 0.0 && opts.jump_share < 1.0) {
            return Err(Error::usage(format!("jump_share must lie in (0, 1), got {}", opts.jump_share)));
        }
        spec.validate_for(basis)?;
        let dim = basis.ambient_dim();
        let jump_budget = eps1 * opts.jump_share;
        let level_budget = eps1 * (1.0 - opts.jump_share);
        let (factors, layout) = match spec {
            ClassSpec::SmoothSurrogate { order, amplitude } => {
                let half = 0.5 * eps1;
                let env: Vec<f64> = (0..dim).map(|i| smooth_envelope(*order, *amplitude, i)).collect();
                let keep = retained_count(&env, half);
                let step = if keep == 0 { 0.0 } else { eps1 / (keep as f64).sqrt() };
                let grids: Vec<CoefGrid> = env[..keep].iter().map(|&b| CoefGrid::symmetric(b, step)).collect();
                let factors = grids.iter().enumerate().map(|(i, g)| g.factor(format!("coefficient_{}", i + 1))).collect();
                (factors, Layout::Smooth { grids })
            }
            ClassSpec::PiecewiseCk { order, jumps, min_gap, level_bound, .. } => {
                let s = *jumps;
                let jump_grid = (s > 0).then(|| {
                    let h_pos = jump_budget.powi(2) / (s as f64 * (2.0 * level_bound).powi(2));
                    let points = ((2.0 * PI / h_pos) * (1.0 - 1e-12)).ceil() as u64;
                    let step = 2.0 * PI / points as f64;
                    let ratio = min_gap / step;
                    let lo = (ratio - 0.5 - GRID_TOL).ceil().max(0.0) as u64;
                    let hi = ((points as f64 - ratio + 0.5 + GRID_TOL).floor() as u64).min(points - 1);
                    let min_sep = ((ratio - 1.0 - GRID_TOL).ceil() as u64).max(1);
                    JumpGrid { jumps: s, step, lo, hi, min_sep }
                });
                let terms = *order as usize + 1;
                let step = 2.0 * level_budget / ((2.0 * PI).sqrt() * terms as f64);
                let grids = vec![CoefGrid::symmetric(*level_bound, step); terms];
                piecewise_layout(jump_grid, s + 1, grids, false, |i| format!("legendre_{i}"))
            }
            ClassSpec::PiecewiseAnalytic { max_jumps, strip, bound } => {
                let s = *max_jumps;
                let pieces = s + 1;
                let jump_grid = (s > 0).then(|| {
                    let a_eff = analytic_sup_bound(*strip, *bound);
                    let h_pos = jump_budget.powi(2) / (s as f64 * (2.0 * a_eff).powi(2));
                    let points = ((2.0 * PI / h_pos) * (1.0 - 1e-12)).ceil() as u64;
                    JumpGrid { jumps: s, step: 2.0 * PI / points as f64, lo: 0, hi: points - 1, min_sep: 0 }
                });
                let q = (-2.0 * strip).exp();
                let target = level_budget.powi(2) / (2.0 * pieces as f64);
                let mut keep = 0usize;
                while keep < dim && bound.powi(2) * q.powi(keep as i32 + 1) / (1.0 - q) > target {
                    keep += 1;
                }
                let step = if keep == 0 { 0.0 } else { level_budget * 2f64.sqrt() / ((pieces * keep) as f64).sqrt() };
                let grids = (0..keep).map(|i| CoefGrid::symmetric(analytic_envelope(*strip, *bound, i), step)).collect();
                piecewise_layout(jump_grid, pieces, grids, true, |i| format!("series_{}", i + 1))
            }
            ClassSpec::Warped { base, params, lipschitz } => {
                let base_net = EpsilonNet::plan(base, basis, 0.5 * eps1, opts)?;
                let step = eps1 / (2.0 * lipschitz * (2.0 * PI * *params as f64).sqrt());
                let tau = CoefGrid::covering(0.0, 1.0, step);
                let mut factors: Vec<GridFactor> = (0..*params).map(|i| tau.factor(format!("warp_{}", i + 1))).collect();
                factors.extend(base_net.factors.iter().map(prefixed));
                (factors, Layout::Warped { tau, params: *params, base: Box::new(base_net) })
            }
            ClassSpec::AdditiveSpan { base, span, coef_bound } => {
                let base_net = EpsilonNet::plan(base, basis, 0.5 * eps1, opts)?;
                let signals: Vec<Signal> = span.iter().map(|g| g.signal(basis)).collect::<Result<_>>()?;
                let gram_bound = gershgorin_bound(&signals)?;
                let step = eps1 / (2.0 * (span.len() as f64 * gram_bound).sqrt());
                let weights = CoefGrid::symmetric(*coef_bound, step);
                let mut factors: Vec<GridFactor> = base_net.factors.iter().map(prefixed).collect();
                factors.extend((0..span.len()).map(|i| weights.factor(format!("weight_{}", i + 1))));
                (factors, Layout::Additive { weights, count: span.len(), base: Box::new(base_net) })
            }
        };
        let radices = factors.iter().map(|f| f.size.unwrap_or(u64::MAX)).collect();
        let net = EpsilonNet { spec: spec.clone(), basis, radius: eps1, factors, radices, layout };
        if net.factors.iter().any(|f| f.size == Some(0)) {
            return Err(Error::usage(format!("class {spec} admits no jump configuration on the position grid")));
        }
        debug_assert_eq!(net.layout.digit_count(), net.factors.len());
        Ok(net)
    }

    pub fn spec(&self) -> &ClassSpec {
        &self.spec
    }

    pub fn basis(&self) -> BasisSpec {
        self.basis
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn construction_log(&self) -> &[GridFactor] {
        &self.factors
    }

    /// `log₂ M` as the sum of the factor logs.
    pub fn log2_size(&self) -> f64 {
        self.factors.iter().map(|f| f.log2_size).sum()
    }

    /// Exact `M` when it fits in 64 bits.
    pub fn size(&self) -> Option<u64> {
        self.factors.iter().try_fold(1u64, |acc, f| acc.checked_mul(f.size?))
    }

    fn indexed_size(&self) -> Result<u64> {
        self.size()
            .ok_or_else(|| Error::usage(format!("net with log2 M = {:.2} is too large to index", self.log2_size())))
    }

    /// Slack under which quantized centers pass the membership check.
    pub fn relaxation(&self) -> Relaxation {
        Relaxation { coeff: self.layout.max_half_spacing(), position: self.layout.position_step() }
    }

    fn digits_of(&self, mut index: u64) -> Vec<u64> {
        let mut digits = vec![0u64; self.radices.len()];
        for (d, r) in digits.iter_mut().zip(&self.radices).rev() {
            *d = index % r;
            index /= r;
        }
        digits
    }

    pub fn center_params(&self, index: u64) -> Result<MemberParams> {
        let m = self.indexed_size()?;
        if index >= m {
            return Err(Error::usage(format!("center index {index} out of range for M = {m}")));
        }
        Ok(self.layout.params(&self.digits_of(index)))
    }

    pub fn center(&self, index: u64) -> Result<ClassMember> {
        let params = self.center_params(index)?;
        let signal = self.spec.synthesize(&params, self.basis)?;
        Ok(ClassMember { params, signal })
    }

    /// Materializes every center in index order.
    pub fn centers(&self) -> Result<Vec<Signal>> {
        let m = self.indexed_size()?;
        (0..m).into_par_iter().map(|j| Ok(self.center(j)?.signal)).collect()
    }

    /// Index of the covering center for a class member.
    pub fn quantize(&self, params: &MemberParams) -> Result<u64> {
        self.indexed_size()?;
        let mut digits = Vec::with_capacity(self.radices.len());
        self.layout.digits(params, &mut digits)?;
        Ok(digits.iter().zip(&self.radices).fold(0u64, |acc, (d, r)| acc * r + d))
    }

    /// Header line of the net file.
    pub fn header(&self) -> Result<String> {
        Ok(format!("eps1={} M={} spec={}", self.radius, self.indexed_size()?, self.spec))
    }

    pub fn to_text(&self) -> Result<String> {
        let mut out = self.header()?;
        out.push('\n');
        out.push_str(&signals_to_text(&self.centers()?));
        Ok(out)
    }

    /// JSON-ready construction summary.
    pub fn log_json(&self) -> serde_json::Value {
        serde_json::json!({
            "spec": self.spec.to_string(),
            "eps1": self.radius,
            "ambient_dim": self.basis.ambient_dim(),
            "M": self.size(),
            "log2_M": self.log2_size(),
            "factors": self.factors,
        })
    }
}

/// Grid data of a net over piecewise-constant functions with one jump.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct SingleJumpGeometry {
    /// Number of position grid points on the circle.
    pub points: u64,
    pub step: f64,
    pub lo: u64,
    pub hi: u64,
    pub levels: Vec<f64>,
}

impl EpsilonNet {
    /// Present when center `((r − lo)·G + a)·G + b` is the function equal to
    /// `levels[a]` left of position `r` and `levels[b]` right of it.
    pub(crate) fn single_jump_geometry(&self) -> Option<SingleJumpGeometry> {
        match (&self.spec, &self.layout) {
            (
                ClassSpec::PiecewiseCk { order: 0, jumps: 1, .. },
                Layout::Piecewise { jumps: Some(j), pieces: 2, grids, analytic: false },
            ) if grids.len() == 1 => Some(SingleJumpGeometry {
                points: (2.0 * PI / j.step).round() as u64,
                step: j.step,
                lo: j.lo,
                hi: j.hi,
                levels: (0..grids[0].count).map(|i| grids[0].value(i)).collect(),
            }),
            _ => None,
        }
    }
}

/// Contents of a net file.
#[derive(Clone, Debug, PartialEq)]
pub struct NetFile {
    pub radius: f64,
    pub size: u64,
    pub spec: ClassSpec,
    pub centers: Vec<Signal>,
}

impl NetFile {
    pub fn parse(text: &str) -> Result<Self> {
        let (header, body) = text.split_once('\n').unwrap_or((text, ""));
        let mut radius = None;
        let mut size = None;
        let mut spec = None;
        let mut rest = header.trim();
        for key in ["eps1=", "M="] {
            let tail = rest
                .strip_prefix(key)
                .ok_or_else(|| Error::parse(format!("net header missing '{key}'")))?;
            let (value, after) = tail.split_once(' ').ok_or_else(|| Error::parse("truncated net header"))?;
            if key == "eps1=" {
                radius = Some(parse_real(value)?);
            } else {
                size = Some(value.parse::<u64>().map_err(|_| Error::parse(format!("bad M '{value}'")))?);
            }
            rest = after.trim_start();
        }
        if let Some(s) = rest.strip_prefix("spec=") {
            spec = Some(s.parse::<ClassSpec>()?);
        }
        let spec = spec.ok_or_else(|| Error::parse("net header missing 'spec='"))?;
        let centers = if body.trim().is_empty() { Vec::new() } else { signals_from_text(body)? };
        let size = size.expect("parsed above");
        if centers.len() as u64 != size {
            return Err(Error::parse(format!("net header says M = {size} but file holds {} centers", centers.len())));
        }
        Ok(Self { radius: radius.expect("parsed above"), size, spec, centers })
    }
}

fn prefixed(f: &GridFactor) -> GridFactor {
    GridFactor { label: format!("base.{}", f.label), ..f.clone() }
}

fn piecewise_layout(
    jumps: Option<JumpGrid>,
    pieces: usize,
    grids: Vec<CoefGrid>,
    analytic: bool,
    name: impl Fn(usize) -> String,
) -> (Vec<GridFactor>, Layout) {
    let mut factors = Vec::new();
    if let Some(j) = &jumps {
        factors.push(j.factor());
    }
    for p in 0..pieces {
        for (i, g) in grids.iter().enumerate() {
            factors.push(g.factor(format!("piece_{}.{}", p + 1, name(i))));
        }
    }
    (factors, Layout::Piecewise { jumps, pieces, grids, analytic })
}

/// Smallest `J` with `Σ_{i ≥ J} env_i² ≤ budget²`.
fn retained_count(env: &[f64], budget: f64) -> usize {
    let target = budget * budget;
    let mut tail = 0.0;
    for j in (0..env.len()).rev() {
        tail += env[j] * env[j];
        if tail > target {
            return j + 1;
        }
    }
    0
}

/// Sup-norm bound for a series with envelope `bound · e^{−strip·i}`.
fn analytic_sup_bound(strip: f64, bound: f64) -> f64 {
    let q = (-strip).exp();
    bound * (q / (2.0 * PI).sqrt() + q * q / ((1.0 - q) * PI.sqrt()))
}

/// Gershgorin bound on the largest eigenvalue of the Gram matrix.
fn gershgorin_bound(signals: &[Signal]) -> Result<f64> {
    let mut best: f64 = 0.0;
    for a in signals {
        let mut row = 0.0;
        for b in signals {
            row += a.inner(b)?.abs();
        }
        best = best.max(row);
    }
    if best <= 0.0 {
        return Err(Error::usage("span functions vanish in the ambient basis"));
    }
    Ok(best)
}

/// Writes a multi-line construction log table.
pub fn format_log(net: &EpsilonNet) -> String {
    let mut out = String::new();
    for f in net.construction_log() {
        let size = f.size.map_or_else(|| format!("2^{:.3}", f.log2_size), |s| s.to_string());
        let _ = writeln!(out, "{:<32} size={size:<12} step={:.6e}", f.label, f.step);
    }
    let _ = writeln!(out, "log2 M = {:.6}", net.log2_size());
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classes::SpanFunction;
    use crate::rng::{domain, stream};

    fn basis() -> BasisSpec {
        BasisSpec::trig(256).unwrap()
    }

    #[test]
    fn single_jump_constant_pieces_example() {
        let spec = ClassSpec::piecewise_ck(0, 1, 1.0, 0.1, 1.0);
        let net = EpsilonNet::plan(&spec, basis(), 0.5, NetOptions::default()).unwrap();
        let log = net.construction_log();
        assert_eq!(log.len(), 3);
        // h_pos = 0.25² / 4 = 0.015625, ⌈2π / h_pos⌉ = 403 grid positions
        let step = 2.0 * PI / 403.0;
        assert!((log[0].step - step).abs() < 1e-15);
        let ratio = 0.1 / step;
        let lo = (ratio - 0.5).ceil() as u64;
        let hi = (403.0 - ratio + 0.5).floor() as u64;
        assert_eq!(log[0].size, Some(hi - lo + 1));
        // level step 2·0.25/√(2π) on [−1, 1]
        let levels = (2.0 / (0.5 / (2.0 * PI).sqrt())).ceil() as u64;
        assert_eq!(log[1].size, Some(levels));
        assert_eq!(net.size(), Some((hi - lo + 1) * levels * levels));
    }

    #[test]
    fn degenerate_net_has_one_center() {
        let spec = ClassSpec::piecewise_ck(0, 0, 1.0, 1.0, 1.0);
        let net = build_net(&spec, basis(), 6.0, NetOptions::default()).unwrap();
        assert_eq!(net.size(), Some(1));
        let c = net.center(0).unwrap();
        assert_eq!(c.signal.norm(), 0.0);
    }

    #[test]
    fn budget_is_enforced() {
        let spec = ClassSpec::piecewise_ck(1, 2, 1.0, 0.5, 1.0);
        let err = build_net(&spec, basis(), 0.05, NetOptions::default()).unwrap_err();
        assert!(matches!(err, Error::BudgetExceeded { .. }));
    }

    #[test]
    fn jump_ranking_round_trips() {
        for (jumps, lo, hi, min_sep) in [(1, 3, 40, 1), (2, 3, 40, 5), (3, 0, 30, 0), (3, 2, 50, 7)] {
            let g = JumpGrid { jumps, step: 0.1, lo, hi, min_sep };
            let count = g.count() as u64;
            let mut seen = std::collections::BTreeSet::new();
            for idx in 0..count {
                let r = g.unrank(idx);
                assert!(r.iter().all(|&x| (lo..=hi).contains(&x)));
                assert!(r.windows(2).all(|w| w[1] >= w[0] + min_sep));
                assert_eq!(g.rank(&r), idx);
                seen.insert(r);
            }
            assert_eq!(seen.len() as u64, count);
            // brute-force count of admissible tuples
            let brute = brute_count(jumps, lo, hi, min_sep);
            assert_eq!(brute, count);
            assert!((g.log2_count() - (count as f64).log2()).abs() < 1e-9);
        }
    }

    fn brute_count(jumps: usize, lo: u64, hi: u64, sep: u64) -> u64 {
        fn rec(left: usize, from: u64, hi: u64, sep: u64) -> u64 {
            if left == 0 {
                return 1;
            }
            (from..=hi).map(|x| rec(left - 1, x + sep, hi, sep)).sum()
        }
        rec(jumps, lo, hi, sep)
    }

    fn check_coverage(spec: &ClassSpec, eps1: f64, samples: u64) {
        let b = basis();
        let net = build_net(spec, b, eps1, NetOptions { m_max: u64::MAX, ..NetOptions::default() }).unwrap();
        let relax = net.relaxation();
        for i in 0..samples {
            let m = spec.sample(b, &mut stream(11, domain::SIGNAL, i)).unwrap();
            let j = net.quantize(&m.params).unwrap();
            let c = net.center(j).unwrap();
            let dist = m.signal.distance(&c.signal).unwrap();
            assert!(dist <= eps1, "{spec}: sample {i} at distance {dist} > {eps1}");
            assert_eq!(spec.membership_violation(&c.params, relax), None, "{spec}");
        }
    }

    #[test]
    fn piecewise_nets_cover() {
        check_coverage(&ClassSpec::piecewise_ck(0, 1, 1.0, 1.0, 1.0), 0.5, 1000);
        check_coverage(&ClassSpec::piecewise_ck(1, 2, 1.0, 0.5, 1.0), 1.2, 300);
    }

    #[test]
    fn smooth_and_analytic_nets_cover() {
        check_coverage(&ClassSpec::smooth(2, 1.0), 0.2, 300);
        check_coverage(&ClassSpec::piecewise_analytic(1, 0.5, 1.0), 1.0, 300);
    }

    #[test]
    fn composite_nets_cover() {
        let b = BasisSpec::trig(64).unwrap();
        let base = ClassSpec::smooth(2, 0.5);
        let l = crate::classes::warp_lipschitz_needed(&base, 1, b).unwrap();
        let warped = ClassSpec::warped(base, 1, l);
        let additive = ClassSpec::additive_span(ClassSpec::smooth(2, 0.5), vec![SpanFunction::Ramp, SpanFunction::Cos(1)], 0.5);
        for spec in [warped, additive] {
            let net = build_net(&spec, b, 0.8, NetOptions::default()).unwrap();
            for i in 0..40 {
                let m = spec.sample(b, &mut stream(4, domain::SIGNAL, i)).unwrap();
                let c = net.center(net.quantize(&m.params).unwrap()).unwrap();
                assert!(m.signal.distance(&c.signal).unwrap() <= 0.8, "{spec}");
            }
        }
    }

    #[test]
    fn warped_overhead_matches_log() {
        let b = BasisSpec::trig(64).unwrap();
        let base = ClassSpec::smooth(2, 1.0);
        let l = crate::classes::warp_lipschitz_needed(&base, 2, b).unwrap();
        let warped = ClassSpec::warped(base.clone(), 2, l);
        let opts = NetOptions::default();
        let w = EpsilonNet::plan(&warped, b, 0.4, opts).unwrap();
        let bn = EpsilonNet::plan(&base, b, 0.2, opts).unwrap();
        let tau = w.construction_log()[0].size.unwrap() as f64;
        assert!((w.log2_size() - bn.log2_size() - 2.0 * tau.log2()).abs() < 1e-9);
    }

    #[test]
    fn size_is_product_of_factors() {
        let spec = ClassSpec::piecewise_ck(1, 1, 1.0, 1.0, 1.0);
        let net = EpsilonNet::plan(&spec, basis(), 0.8, NetOptions::default()).unwrap();
        let product = net.construction_log().iter().map(|f| f.size.unwrap()).product::<u64>();
        assert_eq!(net.size(), Some(product));
        let logs: f64 = net.construction_log().iter().map(|f| (f.size.unwrap() as f64).log2()).sum();
        assert!((net.log2_size() - logs).abs() < 1e-9);
    }

    #[test]
    fn size_is_monotone_in_radius() {
        let specs = [
            ClassSpec::smooth(1, 1.0),
            ClassSpec::piecewise_ck(0, 1, 1.0, 1.0, 1.0),
            ClassSpec::piecewise_analytic(1, 0.5, 1.0),
        ];
        for spec in specs {
            let mut last = f64::INFINITY;
            for eps in [0.05, 0.1, 0.2, 0.4] {
                let h = EpsilonNet::plan(&spec, BasisSpec::trig(4096).unwrap(), eps, NetOptions::default())
                    .unwrap()
                    .log2_size();
                assert!(h <= last + 1e-12, "{spec} at {eps}");
                last = h;
            }
        }
    }

    #[test]
    fn net_file_round_trips() {
        let b = BasisSpec::trig(16).unwrap();
        let spec = ClassSpec::piecewise_ck(0, 0, 1.0, 1.0, 1.0);
        let net = build_net(&spec, b, 0.5, NetOptions::default()).unwrap();
        let text = net.to_text().unwrap();
        assert!(text.starts_with(&format!("eps1=0.5 M={} spec=", net.size().unwrap())));
        let parsed = NetFile::parse(&text).unwrap();
        assert_eq!(parsed.spec, spec);
        assert_eq!(parsed.centers, net.centers().unwrap());
    }

    #[test]
    fn index_range_is_checked() {
        let spec = ClassSpec::piecewise_ck(0, 0, 1.0, 1.0, 1.0);
        let net = build_net(&spec, basis(), 0.5, NetOptions::default()).unwrap();
        assert!(net.center(net.size().unwrap()).is_err());
    }
}
