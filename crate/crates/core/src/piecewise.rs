//! Piecewise functions on [−π, π] and their exact trigonometric coefficients.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{BasisSpec, Signal};

/// Highest polynomial degree `analyze_piecewise` accepts.
pub const MAX_DEGREE: usize = 8;

/// Splits [−π, π] (or the circle) at `breakpoints` into piece intervals.
///
/// Non-periodic layouts give `s + 1` intervals. Periodic layouts give `s`
/// arcs for `s ≥ 1`, the last one running from the final breakpoint to the
/// first breakpoint plus 2π. With no breakpoints both layouts give one piece.
pub fn piece_intervals(breakpoints: &[f64], periodic: bool) -> Vec<(f64, f64)> {
    let s = breakpoints.len();
    if s == 0 {
        return vec![(-PI, PI)];
    }
    if periodic {
        let mut out: Vec<(f64, f64)> = breakpoints.windows(2).map(|w| (w[0], w[1])).collect();
        out.push((breakpoints[s - 1], breakpoints[0] + 2.0 * PI));
        out
    } else {
        let mut edges = Vec::with_capacity(s + 2);
        edges.push(-PI);
        edges.extend_from_slice(breakpoints);
        edges.push(PI);
        edges.windows(2).map(|w| (w[0], w[1])).collect()
    }
}

pub fn piece_count(breakpoints: usize, periodic: bool) -> usize {
    match (breakpoints, periodic) {
        (0, _) => 1,
        (s, true) => s,
        (s, false) => s + 1,
    }
}

fn validate_breakpoints(breakpoints: &[f64]) -> Result<()> {
    if breakpoints.iter().any(|b| !b.is_finite() || *b < -PI || *b > PI) {
        return Err(Error::usage("breakpoints must lie in [-pi, pi]"));
    }
    if breakpoints.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::usage("breakpoints must be sorted"));
    }
    Ok(())
}

/// Smallest circular distance between consecutive breakpoints. When
/// `seam` is set the point ±π counts as an extra breakpoint.
pub fn min_circular_gap(breakpoints: &[f64], seam: bool) -> f64 {
    let mut pts: Vec<f64> = breakpoints.to_vec();
    if seam {
        pts.insert(0, -PI);
    }
    if pts.len() < 2 {
        return if seam && !breakpoints.is_empty() { 2.0 * PI } else { f64::INFINITY };
    }
    let mut gap = pts[0] + 2.0 * PI - pts[pts.len() - 1];
    for w in pts.windows(2) {
        gap = gap.min(w[1] - w[0]);
    }
    gap
}

/// Piecewise polynomial, each piece given by monomial coefficients in the
/// global variable `t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseDescription {
    breakpoints: Vec<f64>,
    pieces: Vec<Vec<f64>>,
    periodic: bool,
}

impl PiecewiseDescription {
    pub fn new(breakpoints: Vec<f64>, pieces: Vec<Vec<f64>>, periodic: bool) -> Result<Self> {
        validate_breakpoints(&breakpoints)?;
        let want = piece_count(breakpoints.len(), periodic);
        if pieces.len() != want {
            return Err(Error::usage(format!(
                "{} breakpoints need {want} pieces, got {}",
                breakpoints.len(),
                pieces.len()
            )));
        }
        for (i, p) in pieces.iter().enumerate() {
            if p.len() > MAX_DEGREE + 1 {
                return Err(Error::usage(format!(
                    "piece {i} has degree {} above the supported maximum {MAX_DEGREE}",
                    p.len() - 1
                )));
            }
            if p.iter().any(|c| !c.is_finite()) {
                return Err(Error::usage(format!("piece {i} has a non-finite coefficient")));
            }
        }
        Ok(Self { breakpoints, pieces, periodic })
    }

    /// A single global polynomial.
    pub fn polynomial(coeffs: Vec<f64>) -> Result<Self> {
        Self::new(Vec::new(), vec![coeffs], false)
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn pieces(&self) -> &[Vec<f64>] {
        &self.pieces
    }

    pub fn periodic(&self) -> bool {
        self.periodic
    }

    pub fn intervals(&self) -> Vec<(f64, f64)> {
        piece_intervals(&self.breakpoints, self.periodic)
    }

    /// Pointwise value at `t ∈ [−π, π)`.
    pub fn evaluate(&self, t: f64) -> f64 {
        for ((a, b), p) in self.intervals().into_iter().zip(&self.pieces) {
            for tt in [t, t + 2.0 * PI] {
                if tt >= a && tt < b {
                    return horner(p, tt);
                }
            }
        }
        // t = π exactly in the non-periodic layout
        horner(self.pieces.last().expect("at least one piece"), t)
    }
}

pub(crate) fn horner(coeffs: &[f64], t: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c)
}

/// Coefficients of `p(u + c)` given those of `p(t)`.
fn taylor_shift(coeffs: &[f64], c: f64) -> Vec<f64> {
    let mut q = coeffs.to_vec();
    let n = q.len();
    for i in 0..n {
        for k in (i..n.saturating_sub(1)).rev() {
            q[k] += c * q[k + 1];
        }
    }
    q
}

/// Exact coefficients of a piecewise polynomial in the trigonometric basis.
///
/// Each piece is re-centred on its midpoint and integrated against
/// `cos(jt)`, `sin(jt)` by the integration-by-parts recurrence for
/// `∫ u^m cos(ju) du`, `∫ u^m sin(ju) du` over a symmetric interval.
pub fn analyze_piecewise(desc: &PiecewiseDescription, basis: BasisSpec) -> Signal {
    let dim = basis.ambient_dim();
    let max_freq = basis.max_frequency();
    let mut coeffs = vec![0.0; dim];
    let inv_sqrt_pi = 1.0 / PI.sqrt();
    let mut cm = [0.0f64; MAX_DEGREE + 1];
    let mut sm = [0.0f64; MAX_DEGREE + 1];

    for ((a, b), poly) in desc.intervals().into_iter().zip(&desc.pieces) {
        let h = 0.5 * (b - a);
        if h <= 0.0 || poly.is_empty() {
            continue;
        }
        let c = 0.5 * (a + b);
        let q = taylor_shift(poly, c);
        let deg = q.len() - 1;

        // constant
        let mut integral = 0.0;
        for (m, qm) in q.iter().enumerate().step_by(2) {
            integral += qm * 2.0 * h.powi(m as i32 + 1) / (m as f64 + 1.0);
        }
        coeffs[0] += integral / (2.0 * PI).sqrt();

        for j in 1..=max_freq {
            let jf = j as f64;
            let (sh, ch) = (jf * h).sin_cos();
            cm[0] = 2.0 * sh / jf;
            sm[0] = 0.0;
            let mut hm = 1.0;
            for m in 1..=deg {
                hm *= h;
                let mf = m as f64;
                if m % 2 == 0 {
                    cm[m] = 2.0 * hm * sh / jf - mf / jf * sm[m - 1];
                    sm[m] = mf / jf * cm[m - 1];
                } else {
                    cm[m] = -mf / jf * sm[m - 1];
                    sm[m] = -2.0 * hm * ch / jf + mf / jf * cm[m - 1];
                }
            }
            let (mut ic, mut is) = (0.0, 0.0);
            for m in 0..=deg {
                ic += q[m] * cm[m];
                is += q[m] * sm[m];
            }
            let (sc, cc) = (jf * c).sin_cos();
            let ci = 2 * j - 1;
            coeffs[ci] += (cc * ic - sc * is) * inv_sqrt_pi;
            if ci + 1 < dim {
                coeffs[ci + 1] += (sc * ic + cc * is) * inv_sqrt_pi;
            }
        }
    }
    Signal::new(basis, coeffs).expect("closed-form coefficients are finite")
}

/// Piecewise function whose pieces are restrictions of trigonometric series
/// (coefficient vectors in the same basis, possibly shorter than the ambient
/// dimension).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseSeries {
    breakpoints: Vec<f64>,
    pieces: Vec<Vec<f64>>,
    periodic: bool,
}

impl PiecewiseSeries {
    pub fn new(breakpoints: Vec<f64>, pieces: Vec<Vec<f64>>, periodic: bool) -> Result<Self> {
        validate_breakpoints(&breakpoints)?;
        let want = piece_count(breakpoints.len(), periodic);
        if pieces.len() != want {
            return Err(Error::usage(format!(
                "{} breakpoints need {want} pieces, got {}",
                breakpoints.len(),
                pieces.len()
            )));
        }
        Ok(Self { breakpoints, pieces, periodic })
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn pieces(&self) -> &[Vec<f64>] {
        &self.pieces
    }

    pub fn evaluate(&self, basis: BasisSpec, t: f64) -> f64 {
        let intervals = piece_intervals(&self.breakpoints, self.periodic);
        let idx = intervals
            .iter()
            .position(|&(a, b)| (t >= a && t < b) || (t + 2.0 * PI >= a && t + 2.0 * PI < b))
            .unwrap_or(intervals.len() - 1);
        self.pieces[idx].iter().enumerate().map(|(i, c)| c * basis.eval(i, t)).sum()
    }

    /// Exact coefficients via product-to-sum identities on each piece.
    pub fn analyze(&self, basis: BasisSpec) -> Result<Signal> {
        let dim = basis.ambient_dim();
        let mut out = vec![0.0; dim];
        for ((a, b), piece) in piece_intervals(&self.breakpoints, self.periodic).into_iter().zip(&self.pieces) {
            if b <= a {
                continue;
            }
            if piece.len() > dim {
                return Err(Error::usage("piece series longer than the ambient dimension"));
            }
            let last = piece.iter().rposition(|c| *c != 0.0);
            let Some(last) = last else { continue };
            let max_omega = basis.max_frequency() + crate::hilbert::frequency(last) + 1;
            let (ec, es) = trig_moments(a, b, max_omega);
            let cos_int = |w: i64| ec[w.unsigned_abs() as usize];
            let sin_int = |w: i64| if w < 0 { -es[(-w) as usize] } else { es[w as usize] };
            for (src, &c) in piece.iter().enumerate().take(last + 1) {
                if c == 0.0 {
                    continue;
                }
                let (src_kind, fs) = role(src);
                let ns = norm_factor(src);
                for (dst, o) in out.iter_mut().enumerate() {
                    let (dst_kind, fd) = role(dst);
                    let (p, m) = (fs + fd, fs - fd);
                    let v = match (src_kind, dst_kind) {
                        (Kind::Cos, Kind::Cos) => 0.5 * (cos_int(m) + cos_int(p)),
                        (Kind::Sin, Kind::Sin) => 0.5 * (cos_int(m) - cos_int(p)),
                        (Kind::Sin, Kind::Cos) => 0.5 * (sin_int(p) + sin_int(m)),
                        (Kind::Cos, Kind::Sin) => 0.5 * (sin_int(p) - sin_int(m)),
                    };
                    *o += c * ns * norm_factor(dst) * v;
                }
            }
        }
        Signal::new(basis, out)
    }
}

#[derive(Clone, Copy)]
enum Kind {
    Cos,
    Sin,
}

// The constant is treated as cos(0·t).
fn role(index: usize) -> (Kind, i64) {
    match crate::hilbert::basis_role(index) {
        crate::hilbert::BasisRole::Constant => (Kind::Cos, 0),
        crate::hilbert::BasisRole::Cos(j) => (Kind::Cos, j as i64),
        crate::hilbert::BasisRole::Sin(j) => (Kind::Sin, j as i64),
    }
}

fn norm_factor(index: usize) -> f64 {
    crate::hilbert::basis_sup(index)
}

/// `(∫_a^b cos(ωt) dt, ∫_a^b sin(ωt) dt)` for ω = 0..=max_omega.
fn trig_moments(a: f64, b: f64, max_omega: usize) -> (Vec<f64>, Vec<f64>) {
    let mut ec = Vec::with_capacity(max_omega + 1);
    let mut es = Vec::with_capacity(max_omega + 1);
    ec.push(b - a);
    es.push(0.0);
    for w in 1..=max_omega {
        let wf = w as f64;
        let (sa, ca) = (wf * a).sin_cos();
        let (sb, cb) = (wf * b).sin_cos();
        ec.push((sb - sa) / wf);
        es.push((ca - cb) / wf);
    }
    (ec, es)
}

/// Monomial coefficients (in `x`) of the Legendre polynomials `P_0..=P_n`.
pub fn legendre_monomials(n: usize) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = vec![vec![1.0]];
    if n >= 1 {
        out.push(vec![0.0, 1.0]);
    }
    for r in 1..n {
        let rf = r as f64;
        let mut next = vec![0.0; r + 2];
        for (m, c) in out[r].iter().enumerate() {
            next[m + 1] += (2.0 * rf + 1.0) * c / (rf + 1.0);
        }
        for (m, c) in out[r - 1].iter().enumerate() {
            next[m] -= rf * c / (rf + 1.0);
        }
        out.push(next);
    }
    out
}

/// Monomial coefficients in `t` of `Σ_r c_r P_r(t/π)`.
pub fn legendre_series_to_monomials(coeffs: &[f64]) -> Vec<f64> {
    if coeffs.is_empty() {
        return Vec::new();
    }
    let leg = legendre_monomials(coeffs.len() - 1);
    let mut out = vec![0.0; coeffs.len()];
    for (r, c) in coeffs.iter().enumerate() {
        for (m, a) in leg[r].iter().enumerate() {
            out[m] += c * a / PI.powi(m as i32);
        }
    }
    out
}

/// `max_{|x|≤1} |P_r^{(q)}(x)| = P_r^{(q)}(1) = (r+q)! / ((r−q)! 2^q q!)`.
pub fn legendre_derivative_at_one(r: usize, q: usize) -> f64 {
    if q > r {
        return 0.0;
    }
    let mut num = 1.0;
    for i in (r - q + 1)..=(r + q) {
        num *= i as f64;
    }
    let mut den = 2f64.powi(q as i32);
    for i in 1..=q {
        den *= i as f64;
    }
    num / den
}
