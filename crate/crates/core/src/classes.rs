//! Function classes: specifications, samplers, synthesis and membership.
//!
//! A class member is carried as its structured parameters (`MemberParams`)
//! together with the synthesized `Signal`; nets quantize the parameters.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::hilbert::{basis_sup, frequency, BasisSpec, Signal};
use crate::piecewise::{
    analyze_piecewise, legendre_derivative_at_one, legendre_series_to_monomials, min_circular_gap,
    PiecewiseDescription, PiecewiseSeries, MAX_DEGREE,
};
use crate::warp::WarpFamily;

/// Geometric envelopes below this relative size are treated as zero when
/// sampling analytic pieces.
const ANALYTIC_CUTOFF_LOG: f64 = 40.0;

/// A fixed function in the span of an additive class.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpanFunction {
    /// `t/π`
    Ramp,
    /// `1 − |t|/π`
    Tent,
    Cos(usize),
    Sin(usize),
}

impl SpanFunction {
    pub fn signal(&self, basis: BasisSpec) -> Result<Signal> {
        match *self {
            SpanFunction::Ramp => {
                let desc = PiecewiseDescription::polynomial(vec![0.0, 1.0 / PI])?;
                Ok(analyze_piecewise(&desc, basis))
            }
            SpanFunction::Tent => {
                let desc = PiecewiseDescription::new(vec![0.0], vec![vec![1.0, 1.0 / PI], vec![1.0, -1.0 / PI]], false)?;
                Ok(analyze_piecewise(&desc, basis))
            }
            SpanFunction::Cos(j) | SpanFunction::Sin(j) => {
                let index = if matches!(self, SpanFunction::Cos(_)) { 2 * j - 1 } else { 2 * j };
                if j == 0 || index >= basis.ambient_dim() {
                    return Err(Error::usage(format!("span function {self} is outside the ambient basis")));
                }
                Ok(Signal::basis_vector(basis, index)?.scaled(PI.sqrt()))
            }
        }
    }
}

impl fmt::Display for SpanFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpanFunction::Ramp => write!(f, "ramp"),
            SpanFunction::Tent => write!(f, "tent"),
            SpanFunction::Cos(j) => write!(f, "cos{j}"),
            SpanFunction::Sin(j) => write!(f, "sin{j}"),
        }
    }
}

impl FromStr for SpanFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "ramp" => return Ok(SpanFunction::Ramp),
            "tent" => return Ok(SpanFunction::Tent),
            _ => {}
        }
        let freq = |rest: &str| -> Result<usize> {
            let j: usize = rest.parse().map_err(|_| Error::parse(format!("bad span function '{s}'")))?;
            if j == 0 {
                return Err(Error::parse(format!("span frequency must be positive in '{s}'")));
            }
            Ok(j)
        };
        if let Some(rest) = s.strip_prefix("cos") {
            Ok(SpanFunction::Cos(freq(rest)?))
        } else if let Some(rest) = s.strip_prefix("sin") {
            Ok(SpanFunction::Sin(freq(rest)?))
        } else {
            Err(Error::parse(format!("unknown span function '{s}'")))
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ClassSpec {
    /// Coefficient body `|c_i| ≤ amplitude · i^{−(order + 1/2)}`, `i` the
    /// 1-based basis index.
    SmoothSurrogate { order: u32, amplitude: f64 },
    /// Up to `jumps` discontinuities at least `min_gap` apart (the point ±π
    /// counts as one), pieces `Σ_r c_r P_r(t/π)` of degree ≤ `order`.
    PiecewiseCk { order: u32, jumps: usize, derivative_bound: f64, min_gap: f64, level_bound: f64 },
    /// Up to `max_jumps` discontinuities, pieces with coefficient envelope
    /// `bound · e^{−strip · i}`.
    PiecewiseAnalytic { max_jumps: usize, strip: f64, bound: f64 },
    Warped { base: Box<ClassSpec>, params: usize, lipschitz: f64 },
    AdditiveSpan { base: Box<ClassSpec>, span: Vec<SpanFunction>, coef_bound: f64 },
}

/// Structured description of one class member.
#[derive(Clone, Debug, PartialEq)]
pub enum MemberParams {
    Smooth { coeffs: Vec<f64> },
    /// Pieces hold Legendre coefficients.
    Piecewise { breakpoints: Vec<f64>, pieces: Vec<Vec<f64>> },
    /// Pieces hold trigonometric series coefficients.
    Analytic { breakpoints: Vec<f64>, pieces: Vec<Vec<f64>> },
    Warped { base: Box<MemberParams>, tau: Vec<f64> },
    Additive { base: Box<MemberParams>, weights: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassMember {
    pub params: MemberParams,
    pub signal: Signal,
}

/// Additive slack for membership checks of quantized centers.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Relaxation {
    /// Per-coefficient slack.
    pub coeff: f64,
    /// Slack on breakpoint positions.
    pub position: f64,
}

impl Relaxation {
    pub const EXACT: Relaxation = Relaxation { coeff: 0.0, position: 0.0 };
}

const TOL: f64 = 1e-12;

impl ClassSpec {
    pub fn smooth(order: u32, amplitude: f64) -> Self {
        ClassSpec::SmoothSurrogate { order, amplitude }
    }

    pub fn piecewise_ck(order: u32, jumps: usize, derivative_bound: f64, min_gap: f64, level_bound: f64) -> Self {
        ClassSpec::PiecewiseCk { order, jumps, derivative_bound, min_gap, level_bound }
    }

    pub fn piecewise_analytic(max_jumps: usize, strip: f64, bound: f64) -> Self {
        ClassSpec::PiecewiseAnalytic { max_jumps, strip, bound }
    }

    pub fn warped(base: ClassSpec, params: usize, lipschitz: f64) -> Self {
        ClassSpec::Warped { base: Box::new(base), params, lipschitz }
    }

    pub fn additive_span(base: ClassSpec, span: Vec<SpanFunction>, coef_bound: f64) -> Self {
        ClassSpec::AdditiveSpan { base: Box::new(base), span, coef_bound }
    }

    /// Short variant tag.
    pub fn kind(&self) -> &'static str {
        match self {
            ClassSpec::SmoothSurrogate { .. } => "smooth",
            ClassSpec::PiecewiseCk { .. } => "piecewise_ck",
            ClassSpec::PiecewiseAnalytic { .. } => "piecewise_analytic",
            ClassSpec::Warped { .. } => "warped",
            ClassSpec::AdditiveSpan { .. } => "additive_span",
        }
    }

    pub fn canonical(&self) -> String {
        self.to_string()
    }

    /// Checks parameters that do not depend on the ambient basis.
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::usage(format!("{name} must be positive and finite, got {v}")))
            }
        };
        match self {
            ClassSpec::SmoothSurrogate { order, amplitude } => {
                if *order == 0 {
                    return Err(Error::usage("smooth class needs order >= 1"));
                }
                positive("amplitude", *amplitude)
            }
            ClassSpec::PiecewiseCk { order, jumps, derivative_bound, min_gap, level_bound } => {
                if *order as usize > MAX_DEGREE {
                    return Err(Error::usage(format!("piece degree {order} above the supported maximum {MAX_DEGREE}")));
                }
                positive("derivative_bound", *derivative_bound)?;
                positive("min_gap", *min_gap)?;
                positive("level_bound", *level_bound)?;
                if (*jumps as f64 + 1.0) * min_gap >= 2.0 * PI {
                    return Err(Error::usage(format!(
                        "{jumps} jumps with min_gap {min_gap} do not fit on the circle: (jumps + 1) * min_gap must be < 2pi"
                    )));
                }
                Ok(())
            }
            ClassSpec::PiecewiseAnalytic { strip, bound, .. } => {
                positive("strip", *strip)?;
                positive("bound", *bound)
            }
            ClassSpec::Warped { base, params, lipschitz } => {
                if !matches!(**base, ClassSpec::SmoothSurrogate { .. }) {
                    return Err(Error::usage("warped classes need a smooth base class"));
                }
                if *params == 0 {
                    return Err(Error::usage("warped class needs at least one warp parameter"));
                }
                positive("lipschitz", *lipschitz)?;
                base.validate()
            }
            ClassSpec::AdditiveSpan { base, span, coef_bound } => {
                if span.is_empty() {
                    return Err(Error::usage("additive class needs at least one span function"));
                }
                positive("coef_bound", *coef_bound)?;
                base.validate()
            }
        }
    }

    /// Full validation against an ambient basis.
    pub fn validate_for(&self, basis: BasisSpec) -> Result<()> {
        self.validate()?;
        match self {
            ClassSpec::Warped { base, params, lipschitz } => {
                let needed = warp_lipschitz_needed(base, *params, basis)?;
                if *lipschitz < needed * (1.0 - 1e-12) {
                    return Err(Error::usage(format!(
                        "lipschitz {lipschitz} is below the constant {needed:.6} the base class needs for this warp family"
                    )));
                }
                base.validate_for(basis)
            }
            ClassSpec::AdditiveSpan { base, span, .. } => {
                for g in span {
                    g.signal(basis)?;
                }
                base.validate_for(basis)
            }
            _ => Ok(()),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, basis: BasisSpec, rng: &mut R) -> Result<ClassMember> {
        self.validate_for(basis)?;
        let params = self.sample_params(basis, rng)?;
        let signal = self.synthesize(&params, basis)?;
        Ok(ClassMember { params, signal })
    }

    fn sample_params<R: Rng + ?Sized>(&self, basis: BasisSpec, rng: &mut R) -> Result<MemberParams> {
        let dim = basis.ambient_dim();
        Ok(match self {
            ClassSpec::SmoothSurrogate { order, amplitude } => MemberParams::Smooth {
                coeffs: (0..dim)
                    .map(|i| smooth_envelope(*order, *amplitude, i) * rng.gen_range(-1.0..=1.0))
                    .collect(),
            },
            ClassSpec::PiecewiseCk { order, jumps, derivative_bound, min_gap, level_bound } => {
                let slack = 2.0 * PI - (*jumps as f64 + 1.0) * min_gap;
                let mut offsets: Vec<f64> = (0..*jumps).map(|_| rng.gen_range(0.0..=slack)).collect();
                offsets.sort_by(f64::total_cmp);
                let breakpoints = offsets
                    .iter()
                    .enumerate()
                    .map(|(i, u)| -PI + (i as f64 + 1.0) * min_gap + u)
                    .collect();
                let pieces = (0..=*jumps)
                    .map(|_| {
                        let mut c: Vec<f64> =
                            (0..=*order).map(|_| level_bound * rng.gen_range(-1.0..=1.0)).collect();
                        let factor = legendre_fit_factor(&c, *level_bound, *derivative_bound);
                        c.iter_mut().for_each(|x| *x *= factor);
                        c
                    })
                    .collect();
                MemberParams::Piecewise { breakpoints, pieces }
            }
            ClassSpec::PiecewiseAnalytic { max_jumps, strip, bound } => {
                let mut breakpoints: Vec<f64> = (0..*max_jumps).map(|_| rng.gen_range(-PI..PI)).collect();
                breakpoints.sort_by(f64::total_cmp);
                let len = analytic_sample_len(*strip, dim);
                let pieces = (0..=*max_jumps)
                    .map(|_| (0..len).map(|i| analytic_envelope(*strip, *bound, i) * rng.gen_range(-1.0..=1.0)).collect())
                    .collect();
                MemberParams::Analytic { breakpoints, pieces }
            }
            ClassSpec::Warped { base, params, .. } => {
                let base = base.sample_params(basis, rng)?;
                let tau = (0..*params).map(|_| rng.gen_range(0.0..=1.0)).collect();
                MemberParams::Warped { base: Box::new(base), tau }
            }
            ClassSpec::AdditiveSpan { base, span, coef_bound } => {
                let base = base.sample_params(basis, rng)?;
                let weights = span.iter().map(|_| coef_bound * rng.gen_range(-1.0..=1.0)).collect();
                MemberParams::Additive { base: Box::new(base), weights }
            }
        })
    }

    /// Builds the signal described by `params`.
    pub fn synthesize(&self, params: &MemberParams, basis: BasisSpec) -> Result<Signal> {
        match (self, params) {
            (ClassSpec::SmoothSurrogate { .. }, MemberParams::Smooth { coeffs }) => {
                let mut c = coeffs.clone();
                c.resize(basis.ambient_dim(), 0.0);
                Signal::new(basis, c)
            }
            (ClassSpec::PiecewiseCk { .. }, MemberParams::Piecewise { breakpoints, pieces }) => {
                let mono = pieces.iter().map(|p| legendre_series_to_monomials(p)).collect();
                let desc = PiecewiseDescription::new(breakpoints.clone(), mono, false)?;
                Ok(analyze_piecewise(&desc, basis))
            }
            (ClassSpec::PiecewiseAnalytic { .. }, MemberParams::Analytic { breakpoints, pieces }) => {
                PiecewiseSeries::new(breakpoints.clone(), pieces.clone(), false)?.analyze(basis)
            }
            (ClassSpec::Warped { base, params: s, .. }, MemberParams::Warped { base: bp, tau }) => {
                let f = base.synthesize(bp, basis)?;
                WarpFamily::new(*s)?.compose(&f, tau)
            }
            (ClassSpec::AdditiveSpan { base, span, .. }, MemberParams::Additive { base: bp, weights }) => {
                if weights.len() != span.len() {
                    return Err(Error::usage("weight count does not match the span"));
                }
                let mut out = base.synthesize(bp, basis)?;
                for (g, w) in span.iter().zip(weights) {
                    out = out.add_scaled(&g.signal(basis)?, *w)?;
                }
                Ok(out)
            }
            _ => Err(Error::usage(format!("member parameters do not match class {}", self.kind()))),
        }
    }

    /// Returns a description of the first violated constraint, if any.
    pub fn membership_violation(&self, params: &MemberParams, relax: Relaxation) -> Option<String> {
        match (self, params) {
            (ClassSpec::SmoothSurrogate { order, amplitude }, MemberParams::Smooth { coeffs }) => {
                coeffs.iter().enumerate().find_map(|(i, c)| {
                    let bound = smooth_envelope(*order, *amplitude, i) + relax.coeff;
                    (c.abs() > bound * (1.0 + TOL)).then(|| format!("coefficient {i} = {c} exceeds {bound}"))
                })
            }
            (
                ClassSpec::PiecewiseCk { order, jumps, derivative_bound, min_gap, level_bound },
                MemberParams::Piecewise { breakpoints, pieces },
            ) => {
                if breakpoints.len() > *jumps {
                    return Some(format!("{} jumps exceed the limit {jumps}", breakpoints.len()));
                }
                if let Some(msg) = sorted_in_range(breakpoints) {
                    return Some(msg);
                }
                if !breakpoints.is_empty() {
                    let gap = min_circular_gap(breakpoints, true);
                    if gap < min_gap - relax.position - TOL {
                        return Some(format!("jump gap {gap} below {min_gap}"));
                    }
                }
                if pieces.len() != breakpoints.len() + 1 {
                    return Some("piece count does not match jump count".into());
                }
                for (i, c) in pieces.iter().enumerate() {
                    if c.len() > *order as usize + 1 {
                        return Some(format!("piece {i} has degree above {order}"));
                    }
                    let level: f64 = c.iter().map(|x| x.abs()).sum();
                    let bound = level_bound + relax.coeff * c.len() as f64;
                    if level > bound * (1.0 + TOL) {
                        return Some(format!("piece {i} level {level} exceeds {bound}"));
                    }
                    for q in 1..=*order as usize {
                        let d = legendre_derivative_bound(c, q);
                        let slack: f64 = (0..c.len()).map(|r| legendre_derivative_at_one(r, q)).sum::<f64>()
                            * relax.coeff
                            / PI.powi(q as i32);
                        let bound = derivative_bound + slack;
                        if d > bound * (1.0 + TOL) {
                            return Some(format!("piece {i} derivative {q} bound {d} exceeds {bound}"));
                        }
                    }
                }
                None
            }
            (ClassSpec::PiecewiseAnalytic { max_jumps, strip, bound }, MemberParams::Analytic { breakpoints, pieces }) => {
                if breakpoints.len() > *max_jumps {
                    return Some(format!("{} jumps exceed the limit {max_jumps}", breakpoints.len()));
                }
                if let Some(msg) = sorted_in_range(breakpoints) {
                    return Some(msg);
                }
                if pieces.len() != breakpoints.len() + 1 {
                    return Some("piece count does not match jump count".into());
                }
                for (p, c) in pieces.iter().enumerate() {
                    for (i, x) in c.iter().enumerate() {
                        let b = analytic_envelope(*strip, *bound, i) + relax.coeff;
                        if x.abs() > b * (1.0 + TOL) {
                            return Some(format!("piece {p} coefficient {i} = {x} exceeds {b}"));
                        }
                    }
                }
                None
            }
            (ClassSpec::Warped { base, params: s, .. }, MemberParams::Warped { base: bp, tau }) => {
                if tau.len() != *s {
                    return Some(format!("expected {s} warp parameters, got {}", tau.len()));
                }
                if tau.iter().any(|t| !(0.0..=1.0).contains(t)) {
                    return Some("warp parameter outside [0, 1]".into());
                }
                base.membership_violation(bp, relax)
            }
            (ClassSpec::AdditiveSpan { base, span, coef_bound }, MemberParams::Additive { base: bp, weights }) => {
                if weights.len() != span.len() {
                    return Some("weight count does not match the span".into());
                }
                let bound = coef_bound + relax.coeff;
                if let Some(w) = weights.iter().find(|w| w.abs() > bound * (1.0 + TOL)) {
                    return Some(format!("weight {w} exceeds {bound}"));
                }
                base.membership_violation(bp, relax)
            }
            _ => Some(format!("member parameters do not match class {}", self.kind())),
        }
    }

    pub fn is_member(&self, params: &MemberParams, relax: Relaxation) -> bool {
        self.membership_violation(params, relax).is_none()
    }
}

fn sorted_in_range(breakpoints: &[f64]) -> Option<String> {
    if breakpoints.iter().any(|b| !(-PI..=PI).contains(b)) {
        return Some("breakpoint outside [-pi, pi]".into());
    }
    if breakpoints.windows(2).any(|w| w[1] < w[0]) {
        return Some("breakpoints not sorted".into());
    }
    None
}

/// Envelope `amplitude · (index + 1)^{−(order + 1/2)}`.
pub fn smooth_envelope(order: u32, amplitude: f64, index: usize) -> f64 {
    amplitude * ((index + 1) as f64).powf(-(order as f64 + 0.5))
}

/// Envelope `bound · e^{−strip · (index + 1)}`.
pub fn analytic_envelope(strip: f64, bound: f64, index: usize) -> f64 {
    bound * (-strip * (index + 1) as f64).exp()
}

fn analytic_sample_len(strip: f64, dim: usize) -> usize {
    ((ANALYTIC_CUTOFF_LOG / strip).ceil() as usize + 1).min(dim)
}

/// `sup_{[−π,π]} |d^q/dt^q Σ_r c_r P_r(t/π)|` bounded by the triangle
/// inequality at `t = π`.
pub fn legendre_derivative_bound(coeffs: &[f64], q: usize) -> f64 {
    coeffs
        .iter()
        .enumerate()
        .map(|(r, c)| c.abs() * legendre_derivative_at_one(r, q))
        .sum::<f64>()
        / PI.powi(q as i32)
}

fn legendre_fit_factor(coeffs: &[f64], level_bound: f64, derivative_bound: f64) -> f64 {
    let mut factor: f64 = 1.0;
    let level: f64 = coeffs.iter().map(|x| x.abs()).sum();
    if level > level_bound {
        factor = factor.min(level_bound / level);
    }
    for q in 1..coeffs.len() {
        let d = legendre_derivative_bound(coeffs, q);
        if d > derivative_bound {
            factor = factor.min(derivative_bound / d);
        }
    }
    factor
}

/// Lipschitz constant of `τ ↦ f∘Ψ_τ` (sup norm) guaranteed for every member
/// of a smooth base class.
pub fn warp_lipschitz_needed(base: &ClassSpec, params: usize, basis: BasisSpec) -> Result<f64> {
    let ClassSpec::SmoothSurrogate { order, amplitude } = base else {
        return Err(Error::usage("warped classes need a smooth base class"));
    };
    let slope: f64 = (1..basis.ambient_dim())
        .map(|i| smooth_envelope(*order, *amplitude, i) * frequency(i) as f64 * basis_sup(i))
        .sum();
    Ok(slope * WarpFamily::new(params)?.parameter_lipschitz())
}

impl fmt::Display for ClassSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClassSpec::SmoothSurrogate { order, amplitude } => write!(f, "smooth(order={order},amplitude={amplitude})"),
            ClassSpec::PiecewiseCk { order, jumps, derivative_bound, min_gap, level_bound } => write!(
                f,
                "piecewise_ck(order={order},jumps={jumps},derivative_bound={derivative_bound},min_gap={min_gap},level_bound={level_bound})"
            ),
            ClassSpec::PiecewiseAnalytic { max_jumps, strip, bound } => {
                write!(f, "piecewise_analytic(max_jumps={max_jumps},strip={strip},bound={bound})")
            }
            ClassSpec::Warped { base, params, lipschitz } => {
                write!(f, "warped(base={base},params={params},lipschitz={lipschitz})")
            }
            ClassSpec::AdditiveSpan { base, span, coef_bound } => {
                let items: Vec<String> = span.iter().map(|g| g.to_string()).collect();
                write!(f, "additive_span(base={base},span=[{}],coef_bound={coef_bound})", items.join(";"))
            }
        }
    }
}

impl FromStr for ClassSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let mut p = SpecParser { src: compact.as_bytes(), pos: 0 };
        let spec = p.spec()?;
        if p.pos != p.src.len() {
            return Err(Error::parse(format!("trailing input in class spec at byte {}", p.pos)));
        }
        spec.validate()?;
        Ok(spec)
    }
}

enum Value {
    Atom(String),
    Spec(ClassSpec),
    List(Vec<String>),
}

struct SpecParser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl SpecParser<'_> {
    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn expect(&mut self, b: u8) -> Result<()> {
        if self.peek() == Some(b) {
            self.pos += 1;
            Ok(())
        } else {
            Err(Error::parse(format!("expected '{}' at byte {} of class spec", b as char, self.pos)))
        }
    }

    fn ident(&mut self) -> String {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == b'_' || c == b'.' || c == b'-' || c == b'+') {
            self.pos += 1;
        }
        String::from_utf8_lossy(&self.src[start..self.pos]).into_owned()
    }

    fn spec(&mut self) -> Result<ClassSpec> {
        let name = self.ident();
        if name.is_empty() {
            return Err(Error::parse("empty class name"));
        }
        self.expect(b'(')?;
        let mut fields: Vec<(String, Value)> = Vec::new();
        if self.peek() != Some(b')') {
            loop {
                let key = self.ident();
                self.expect(b'=')?;
                let value = self.value()?;
                if fields.iter().any(|(k, _)| *k == key) {
                    return Err(Error::parse(format!("duplicate key '{key}' in {name}")));
                }
                fields.push((key, value));
                if self.peek() == Some(b',') {
                    self.pos += 1;
                } else {
                    break;
                }
            }
        }
        self.expect(b')')?;
        let mut f = Fields { class: name.clone(), fields };
        let spec = match name.as_str() {
            "smooth" => ClassSpec::SmoothSurrogate { order: f.num("order")?, amplitude: f.num("amplitude")? },
            "piecewise_ck" => ClassSpec::PiecewiseCk {
                order: f.num("order")?,
                jumps: f.num("jumps")?,
                derivative_bound: f.num("derivative_bound")?,
                min_gap: f.num("min_gap")?,
                level_bound: f.num("level_bound")?,
            },
            "piecewise_analytic" => ClassSpec::PiecewiseAnalytic {
                max_jumps: f.num("max_jumps")?,
                strip: f.num("strip")?,
                bound: f.num("bound")?,
            },
            "warped" => ClassSpec::Warped {
                base: Box::new(f.spec("base")?),
                params: f.num("params")?,
                lipschitz: f.num("lipschitz")?,
            },
            "additive_span" => ClassSpec::AdditiveSpan {
                base: Box::new(f.spec("base")?),
                span: f.list("span")?.iter().map(|s| s.parse()).collect::<Result<_>>()?,
                coef_bound: f.num("coef_bound")?,
            },
            other => return Err(Error::parse(format!("unknown class '{other}'"))),
        };
        f.finish()?;
        Ok(spec)
    }

    fn value(&mut self) -> Result<Value> {
        if self.peek() == Some(b'[') {
            self.pos += 1;
            let mut items = Vec::new();
            if self.peek() != Some(b']') {
                loop {
                    items.push(self.ident());
                    if self.peek() == Some(b';') {
                        self.pos += 1;
                    } else {
                        break;
                    }
                }
            }
            self.expect(b']')?;
            return Ok(Value::List(items));
        }
        let start = self.pos;
        let atom = self.ident();
        if self.peek() == Some(b'(') {
            self.pos = start;
            return Ok(Value::Spec(self.spec()?));
        }
        Ok(Value::Atom(atom))
    }
}

struct Fields {
    class: String,
    fields: Vec<(String, Value)>,
}

impl Fields {
    fn take(&mut self, key: &str) -> Result<Value> {
        let idx = self
            .fields
            .iter()
            .position(|(k, _)| k == key)
            .ok_or_else(|| Error::parse(format!("{} is missing key '{key}'", self.class)))?;
        Ok(self.fields.remove(idx).1)
    }

    fn num<T: FromStr>(&mut self, key: &str) -> Result<T> {
        match self.take(key)? {
            Value::Atom(a) => a
                .parse()
                .map_err(|_| Error::parse(format!("bad value '{a}' for {key} in {}", self.class))),
            _ => Err(Error::parse(format!("{key} in {} must be a number", self.class))),
        }
    }

    fn spec(&mut self, key: &str) -> Result<ClassSpec> {
        match self.take(key)? {
            Value::Spec(s) => Ok(s),
            _ => Err(Error::parse(format!("{key} in {} must be a class", self.class))),
        }
    }

    fn list(&mut self, key: &str) -> Result<Vec<String>> {
        match self.take(key)? {
            Value::List(l) => Ok(l),
            _ => Err(Error::parse(format!("{key} in {} must be a [a;b] list", self.class))),
        }
    }

    fn finish(self) -> Result<()> {
        match self.fields.first() {
            Some((k, _)) => Err(Error::parse(format!("unknown key '{k}' in {}", self.class))),
            None => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{domain, stream};

    fn basis() -> BasisSpec {
        BasisSpec::trig(256).unwrap()
    }

    #[test]
    fn canonical_strings_round_trip() {
        let specs = [
            ClassSpec::smooth(2, 10.0),
            ClassSpec::piecewise_ck(1, 2, 1.0, 0.5, 1.0),
            ClassSpec::piecewise_analytic(1, 0.5, 1.0),
            ClassSpec::warped(ClassSpec::smooth(2, 1.0), 2, 3.5),
            ClassSpec::additive_span(ClassSpec::piecewise_ck(0, 1, 1.0, 1.0, 1.0), vec![SpanFunction::Ramp, SpanFunction::Cos(3)], 0.5),
        ];
        for s in specs {
            let text = s.canonical();
            let back: ClassSpec = text.parse().unwrap();
            assert_eq!(back, s, "{text}");
        }
        let spaced: ClassSpec = " smooth( order = 1 , amplitude = 2.5 ) ".parse().unwrap();
        assert_eq!(spaced, ClassSpec::smooth(1, 2.5));
    }

    #[test]
    fn parser_rejects_bad_input() {
        for bad in [
            "smooth(order=1)",
            "smooth(order=1,amplitude=1,extra=2)",
            "smooth(order=1,amplitude=-1)",
            "blob(order=1)",
            "piecewise_ck(order=0,jumps=6,derivative_bound=1,min_gap=1,level_bound=1)",
            "smooth(order=1,amplitude=1)x",
            "additive_span(base=smooth(order=1,amplitude=1),span=[wave],coef_bound=1)",
        ] {
            assert!(bad.parse::<ClassSpec>().is_err(), "{bad}");
        }
    }

    #[test]
    fn zero_jumps_gives_single_piece() {
        let spec = ClassSpec::piecewise_ck(2, 0, 1.0, 1.0, 1.0);
        let m = spec.sample(basis(), &mut stream(1, domain::SIGNAL, 0)).unwrap();
        match m.params {
            MemberParams::Piecewise { breakpoints, pieces } => {
                assert!(breakpoints.is_empty());
                assert_eq!(pieces.len(), 1);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let spec = ClassSpec::piecewise_ck(1, 2, 1.0, 0.5, 1.0);
        let a = spec.sample(basis(), &mut stream(9, domain::SIGNAL, 4)).unwrap();
        let b = spec.sample(basis(), &mut stream(9, domain::SIGNAL, 4)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn infeasible_spec_is_a_usage_error() {
        let spec = ClassSpec::piecewise_ck(0, 3, 1.0, 2.0, 1.0);
        let err = spec.sample(basis(), &mut stream(1, domain::SIGNAL, 0)).unwrap_err();
        assert!(matches!(err, Error::Usage(_)));
    }

    #[test]
    fn piecewise_samples_are_members() {
        let spec = ClassSpec::piecewise_ck(1, 2, 1.0, 0.5, 1.0);
        for i in 0..1000 {
            let m = spec.sample(basis(), &mut stream(3, domain::SIGNAL, i)).unwrap();
            assert_eq!(spec.membership_violation(&m.params, Relaxation::EXACT), None);
        }
    }

    #[test]
    fn piecewise_member_values_respect_level_bound() {
        let spec = ClassSpec::piecewise_ck(3, 1, 0.7, 1.0, 1.0);
        for i in 0..50 {
            let m = spec.sample(basis(), &mut stream(5, domain::SIGNAL, i)).unwrap();
            let MemberParams::Piecewise { breakpoints, pieces } = &m.params else { unreachable!() };
            let mono = pieces.iter().map(|p| legendre_series_to_monomials(p)).collect();
            let desc = PiecewiseDescription::new(breakpoints.clone(), mono, false).unwrap();
            for k in 0..400 {
                let t = -PI + 2.0 * PI * k as f64 / 400.0;
                assert!(desc.evaluate(t).abs() <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn other_classes_sample_members() {
        let b = BasisSpec::trig(64).unwrap();
        let warped_base = ClassSpec::smooth(2, 1.0);
        let needed = warp_lipschitz_needed(&warped_base, 2, b).unwrap();
        let specs = [
            ClassSpec::smooth(1, 1.0),
            ClassSpec::piecewise_analytic(2, 0.5, 1.0),
            ClassSpec::warped(warped_base, 2, needed),
            ClassSpec::additive_span(ClassSpec::smooth(2, 1.0), vec![SpanFunction::Tent, SpanFunction::Sin(2)], 1.0),
        ];
        for spec in specs {
            for i in 0..20 {
                let m = spec.sample(b, &mut stream(2, domain::SIGNAL, i)).unwrap();
                assert!(spec.is_member(&m.params, Relaxation::EXACT), "{spec}");
                assert_eq!(m.signal.dim(), 64);
            }
        }
    }

    #[test]
    fn warped_lipschitz_is_checked() {
        let b = BasisSpec::trig(64).unwrap();
        let spec = ClassSpec::warped(ClassSpec::smooth(2, 1.0), 1, 1e-3);
        assert!(matches!(spec.validate_for(b), Err(Error::Usage(_))));
    }

    #[test]
    fn span_functions_match_closed_forms() {
        let b = BasisSpec::trig(512).unwrap();
        let ramp = SpanFunction::Ramp.signal(b).unwrap();
        // |t/π|² integrates to 2π/3
        assert!((ramp.norm().powi(2) - 2.0 * PI / 3.0).abs() < 1e-2);
        let tent = SpanFunction::Tent.signal(b).unwrap();
        assert!((tent.norm().powi(2) - 2.0 * PI / 3.0).abs() < 1e-6);
        let c = SpanFunction::Cos(2).signal(b).unwrap();
        assert!((c.evaluate(0.3) - (0.6f64).cos()).abs() < 1e-12);
        assert!(SpanFunction::Sin(300).signal(b).is_err());
    }

    #[test]
    fn mismatched_params_are_rejected() {
        let spec = ClassSpec::smooth(1, 1.0);
        let params = MemberParams::Piecewise { breakpoints: vec![], pieces: vec![vec![0.0]] };
        assert!(spec.synthesize(&params, basis()).is_err());
        assert!(!spec.is_member(&params, Relaxation::EXACT));
    }
}
