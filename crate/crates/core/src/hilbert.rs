//! Finite model of L²([−π, π]) in the real trigonometric basis.
//!
//! Basis index 0 is the constant `1/√(2π)`; for frequency `j ≥ 1` index
//! `2j − 1` is `cos(jt)/√π` and index `2j` is `sin(jt)/√π`. A prefix of
//! length `d` is therefore a low-pass truncation.

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_AMBIENT_DIM: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisKind {
    Trig,
}

impl BasisKind {
    pub fn tag(self) -> &'static str {
        match self {
            BasisKind::Trig => "trig",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BasisSpec {
    kind: BasisKind,
    ambient_dim: usize,
}

impl BasisSpec {
    pub fn trig(ambient_dim: usize) -> Result<Self> {
        if ambient_dim < 2 {
            return Err(Error::usage(format!("ambient_dim must be >= 2, got {ambient_dim}")));
        }
        Ok(Self { kind: BasisKind::Trig, ambient_dim })
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    /// Highest frequency present in the basis.
    pub fn max_frequency(&self) -> usize {
        self.ambient_dim / 2
    }

    /// Evaluates basis function `index` at `t`.
    pub fn eval(&self, index: usize, t: f64) -> f64 {
        match basis_role(index) {
            BasisRole::Constant => 1.0 / (2.0 * PI).sqrt(),
            BasisRole::Cos(j) => (j as f64 * t).cos() / PI.sqrt(),
            BasisRole::Sin(j) => (j as f64 * t).sin() / PI.sqrt(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BasisRole {
    Constant,
    Cos(usize),
    Sin(usize),
}

pub fn basis_role(index: usize) -> BasisRole {
    if index == 0 {
        BasisRole::Constant
    } else if index % 2 == 1 {
        BasisRole::Cos(index.div_ceil(2))
    } else {
        BasisRole::Sin(index / 2)
    }
}

/// Frequency of basis function `index` (0 for the constant).
pub fn frequency(index: usize) -> usize {
    index.div_ceil(2)
}

/// Sup norm of basis function `index` on the circle.
pub fn basis_sup(index: usize) -> f64 {
    if index == 0 {
        1.0 / (2.0 * PI).sqrt()
    } else {
        1.0 / PI.sqrt()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Signal {
    basis: BasisSpec,
    coeffs: Vec<f64>,
}

impl Signal {
    pub fn new(basis: BasisSpec, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != basis.ambient_dim {
            return Err(Error::usage(format!(
                "signal has {} coefficients, basis expects {}",
                coeffs.len(),
                basis.ambient_dim
            )));
        }
        if let Some(i) = coeffs.iter().position(|c| !c.is_finite()) {
            return Err(Error::usage(format!("coefficient {i} is not finite")));
        }
        Ok(Self { basis, coeffs })
    }

    pub fn zeros(basis: BasisSpec) -> Self {
        Self { basis, coeffs: vec![0.0; basis.ambient_dim] }
    }

    /// Unit vector along basis function `index`.
    pub fn basis_vector(basis: BasisSpec, index: usize) -> Result<Self> {
        if index >= basis.ambient_dim {
            return Err(Error::usage(format!(
                "basis index {index} outside ambient dimension {}",
                basis.ambient_dim
            )));
        }
        let mut s = Self::zeros(basis);
        s.coeffs[index] = 1.0;
        Ok(s)
    }

    pub fn basis(&self) -> BasisSpec {
        self.basis
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    fn check_same_basis(&self, other: &Signal) -> Result<()> {
        if self.basis != other.basis {
            return Err(Error::usage(format!(
                "basis mismatch: {:?} vs {:?}",
                self.basis, other.basis
            )));
        }
        Ok(())
    }

    pub fn inner(&self, other: &Signal) -> Result<f64> {
        self.check_same_basis(other)?;
        Ok(dot(&self.coeffs, &other.coeffs))
    }

    pub fn norm(&self) -> f64 {
        norm(&self.coeffs)
    }

    pub fn distance(&self, other: &Signal) -> Result<f64> {
        self.check_same_basis(other)?;
        Ok(distance(&self.coeffs, &other.coeffs))
    }

    fn check_prefix(&self, d: usize) -> Result<()> {
        if d == 0 || d > self.coeffs.len() {
            return Err(Error::usage(format!(
                "prefix dimension {d} outside [1, {}]",
                self.coeffs.len()
            )));
        }
        Ok(())
    }

    /// Orthogonal projection onto the span of the first `d` basis functions.
    pub fn project_prefix(&self, d: usize) -> Result<Signal> {
        self.check_prefix(d)?;
        let mut coeffs = self.coeffs.clone();
        coeffs[d..].iter_mut().for_each(|c| *c = 0.0);
        Ok(Signal { basis: self.basis, coeffs })
    }

    /// Norm of the component orthogonal to the first `d` basis functions.
    pub fn tail_norm(&self, d: usize) -> Result<f64> {
        self.check_prefix(d)?;
        Ok(norm(&self.coeffs[d..]))
    }

    /// Tail norms for every prefix length `1..=D`, computed in one pass.
    pub fn tail_profile(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.coeffs.len()];
        let mut acc = 0.0;
        for d in (1..self.coeffs.len()).rev() {
            acc += self.coeffs[d] * self.coeffs[d];
            out[d - 1] = acc.sqrt();
        }
        out
    }

    pub fn scaled(&self, factor: f64) -> Signal {
        Signal { basis: self.basis, coeffs: self.coeffs.iter().map(|c| c * factor).collect() }
    }

    /// `self + factor * other`.
    pub fn add_scaled(&self, other: &Signal, factor: f64) -> Result<Signal> {
        self.check_same_basis(other)?;
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + factor * b).collect();
        Ok(Signal { basis: self.basis, coeffs })
    }

    /// Pointwise value of the synthesized function at `t`.
    pub fn evaluate(&self, t: f64) -> f64 {
        let (s1, c1) = t.sin_cos();
        let (mut s, mut c) = (0.0f64, 1.0f64);
        let mut acc = self.coeffs[0] / (2.0 * PI).sqrt();
        let inv = 1.0 / PI.sqrt();
        let mut idx = 1;
        while idx < self.coeffs.len() {
            let (ns, nc) = (s * c1 + c * s1, c * c1 - s * s1);
            s = ns;
            c = nc;
            acc += self.coeffs[idx] * c * inv;
            if idx + 1 < self.coeffs.len() {
                acc += self.coeffs[idx + 1] * s * inv;
            }
            idx += 2;
        }
        acc
    }

    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(26 * (self.coeffs.len() + 1));
        let _ = writeln!(out, "basis={} ambient_dim={}", self.basis.kind.tag(), self.basis.ambient_dim);
        for c in &self.coeffs {
            let _ = writeln!(out, "{}", format_real(*c));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Signal> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::parse("empty signal text"))?;
        let mut kind = None;
        let mut dim = None;
        for field in header.split_whitespace() {
            match field.split_once('=') {
                Some(("basis", "trig")) => kind = Some(BasisKind::Trig),
                Some(("basis", other)) => {
                    return Err(Error::parse(format!("unsupported basis '{other}'")))
                }
                Some(("ambient_dim", v)) => {
                    dim = Some(v.parse::<usize>().map_err(|e| Error::parse(format!("ambient_dim: {e}")))?)
                }
                _ => return Err(Error::parse(format!("unexpected header field '{field}'"))),
            }
        }
        let (Some(BasisKind::Trig), Some(dim)) = (kind, dim) else {
            return Err(Error::parse("signal header needs basis and ambient_dim"));
        };
        let basis = BasisSpec::trig(dim)?;
        let coeffs = lines
            .map(|l| parse_real(l.trim()))
            .collect::<Result<Vec<_>>>()?;
        Signal::new(basis, coeffs)
    }
}

/// Fixed-width scientific notation with 18 significant digits; parses back to
/// the identical `f64`.
pub fn format_real(x: f64) -> String {
    format!("{x:.17e}")
}

pub fn parse_real(s: &str) -> Result<f64> {
    s.parse::<f64>().map_err(|e| Error::parse(format!("'{s}': {e}")))
}

/// Writes signals separated by `---` lines.
pub fn signals_to_text(signals: &[Signal]) -> String {
    let mut out = String::new();
    for (i, s) in signals.iter().enumerate() {
        if i > 0 {
            out.push_str("---\n");
        }
        out.push_str(&s.to_text());
    }
    out
}

pub fn signals_from_text(text: &str) -> Result<Vec<Signal>> {
    let mut out = Vec::new();
    let mut block = String::new();
    for line in text.lines() {
        if line.trim() == "---" {
            out.push(Signal::from_text(&block)?);
            block.clear();
        } else {
            block.push_str(line);
            block.push('\n');
        }
    }
    if !block.trim().is_empty() {
        out.push(Signal::from_text(&block)?);
    }
    Ok(out)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}
