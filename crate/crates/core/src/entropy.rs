//! Covering numbers, entropy growth fits and measurement-count diagnostics.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::classes::ClassSpec;
use crate::error::{Error, Result};
use crate::hilbert::{distance, BasisSpec};
use crate::net::{EpsilonNet, NetOptions};

/// Largest point set accepted by [`exhaustive_min_cover`].
pub const EXHAUSTIVE_LIMIT: usize = 15;

/// Size of the farthest-point cover of `points` at radius `eps`.
///
/// The traversal order does not depend on `eps`, so the result is monotone
/// in the radius.
pub fn greedy_cover(points: &[Vec<f64>], eps: f64) -> Result<usize> {
    check_cover_input(points, eps)?;
    let mut nearest: Vec<f64> = points.iter().map(|p| distance(p, &points[0])).collect();
    let mut count = 1;
    loop {
        let (far, radius) = nearest
            .iter()
            .enumerate()
            .fold((0, 0.0), |best, (i, &d)| if d > best.1 { (i, d) } else { best });
        if radius <= eps {
            return Ok(count);
        }
        count += 1;
        for (slot, p) in nearest.iter_mut().zip(points) {
            *slot = slot.min(distance(p, &points[far]));
        }
    }
}

/// Exact minimum number of `eps`-balls centered at input points that cover
/// all of them.
pub fn exhaustive_min_cover(points: &[Vec<f64>], eps: f64) -> Result<usize> {
    check_cover_input(points, eps)?;
    let n = points.len();
    if n > EXHAUSTIVE_LIMIT {
        return Err(Error::usage(format!("exhaustive cover takes at most {EXHAUSTIVE_LIMIT} points, got {n}")));
    }
    let reach: Vec<u32> = points
        .iter()
        .map(|c| points.iter().enumerate().filter(|(_, p)| distance(c, p) <= eps).fold(0, |m, (i, _)| m | 1 << i))
        .collect();
    let full = (1u32 << n) - 1;
    let best = (1u32..=full)
        .into_par_iter()
        .filter(|set| {
            (0..n).filter(|i| set & (1 << i) != 0).fold(0, |m, i| m | reach[i]) == full
        })
        .map(|set| set.count_ones() as usize)
        .min();
    best.ok_or_else(|| Error::Internal("no subset covers the points".into()))
}

fn check_cover_input(points: &[Vec<f64>], eps: f64) -> Result<()> {
    if points.is_empty() {
        return Err(Error::usage("cover needs at least one point"));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::usage(format!("cover radius must be positive, got {eps}")));
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim) {
        return Err(Error::usage("cover points must share one dimension"));
    }
    Ok(())
}

/// `H / log₂(1/δ)`: fewest measurements that can carry `H` bits at
/// precision `δ`.
pub fn measurement_lower_bound(h: f64, delta: f64) -> Result<f64> {
    if !(h >= 0.0) {
        return Err(Error::usage(format!("entropy must be non-negative, got {h}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::usage(format!("delta must lie in (0, 1), got {delta}")));
    }
    Ok(h / (1.0 / delta).log2())
}

/// `n ≤ 20/(1−p)·H + 20/(1−p) + 1`, with `H` the entropy at the net radius.
pub fn theorem_bound_check(n_used: usize, p: f64, h: f64) -> bool {
    let k = 20.0 / (1.0 - p);
    n_used as f64 <= k * h + k + 1.0
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GrowthModel {
    /// `H ≈ a·(1/ε)^m`; parameters `[a, m]`.
    Power,
    /// `H ≈ a·ln²(1/ε) + b·ln(1/ε) + c`; parameters `[a, b, c]`.
    LogSquare,
}

impl fmt::Display for GrowthModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GrowthModel::Power => "power",
            GrowthModel::LogSquare => "logsquare",
        })
    }
}

impl FromStr for GrowthModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "power" => Ok(GrowthModel::Power),
            "logsquare" => Ok(GrowthModel::LogSquare),
            _ => Err(Error::parse(format!("unknown growth model '{s}' (expected power or logsquare)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EntropyScan {
    /// Strictly decreasing radii.
    pub eps_values: Vec<f64>,
    pub h_values: Vec<f64>,
    /// Net sizes when they fit in 64 bits.
    pub m_values: Vec<Option<u64>>,
    pub model: GrowthModel,
    pub params: Vec<f64>,
    /// In the linearizing coordinates of the model.
    pub residuals: Vec<f64>,
    pub r_squared: f64,
    /// Set when `H` decreases somewhere as `ε` shrinks.
    pub non_monotone: bool,
}

impl EntropyScan {
    /// Growth exponent of a power fit.
    pub fn exponent(&self) -> Option<f64> {
        (self.model == GrowthModel::Power).then(|| self.params[1])
    }

    /// One row per radius: `eps,M,H,model,params,r_squared`, with the
    /// parameters joined by `;`.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| Error::Internal(format!("csv: {e}"));
        w.write_record(["eps", "M", "H", "model", "params", "r_squared"]).map_err(csv_err)?;
        let params = self.params.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(";");
        for ((e, h), m) in self.eps_values.iter().zip(&self.h_values).zip(&self.m_values) {
            let m = m.map_or_else(|| "overflow".to_string(), |m| m.to_string());
            w.write_record([
                e.to_string(),
                m,
                h.to_string(),
                self.model.to_string(),
                params.clone(),
                self.r_squared.to_string(),
            ])
            .map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Internal(format!("csv: {e}")))?;
        String::from_utf8(bytes).map_err(|e| Error::Internal(e.to_string()))
    }
}

/// Least-squares growth fit of `H` against `1/ε`.
pub fn fit_growth(eps_values: &[f64], h_values: &[f64], model: GrowthModel) -> Result<EntropyScan> {
    fit_with_sizes(eps_values, h_values, vec![None; h_values.len()], model)
}

fn fit_with_sizes(eps: &[f64], h: &[f64], m_values: Vec<Option<u64>>, model: GrowthModel) -> Result<EntropyScan> {
    if eps.len() != h.len() {
        return Err(Error::usage("eps and H sequences differ in length"));
    }
    if eps.len() < 4 {
        return Err(Error::usage(format!("growth fit needs at least 4 radii, got {}", eps.len())));
    }
    if eps.iter().any(|e| !(*e > 0.0 && e.is_finite())) || eps.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::usage("radii must be positive and strictly decreasing"));
    }
    if eps[0] / eps[eps.len() - 1] < 2.0 {
        return Err(Error::usage("radii must span at least one octave"));
    }
    let non_monotone = h.windows(2).any(|w| w[1] < w[0]);
    let x: Vec<f64> = eps.iter().map(|e| (1.0 / e).ln()).collect();
    let (params, residuals, r_squared) = match model {
        GrowthModel::Power => {
            if h.iter().any(|v| !(*v > 0.0)) {
                return Err(Error::Degenerate("power fit needs positive entropies".into()));
            }
            let y: Vec<f64> = h.iter().map(|v| v.ln()).collect();
            let (coef, res, r2) = least_squares(&x, &y, 2)?;
            (vec![coef[0].exp(), coef[1]], res, r2)
        }
        GrowthModel::LogSquare => {
            let (coef, res, r2) = least_squares(&x, h, 3)?;
            (vec![coef[2], coef[1], coef[0]], res, r2)
        }
    };
    Ok(EntropyScan {
        eps_values: eps.to_vec(),
        h_values: h.to_vec(),
        m_values,
        model,
        params,
        residuals,
        r_squared,
        non_monotone,
    })
}

/// Polynomial least squares of degree `terms − 1`, solved by Householder
/// QR. Returns ascending coefficients, residuals and R².
fn least_squares(x: &[f64], y: &[f64], terms: usize) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let rows = x.len();
    // center x to keep the Vandermonde system well conditioned
    let shift = x.iter().sum::<f64>() / rows as f64;
    let mut a: Vec<Vec<f64>> = (0..terms).map(|k| x.iter().map(|v| (v - shift).powi(k as i32)).collect()).collect();
    let mut b = y.to_vec();
    for k in 0..terms {
        let norm = a[k][k..].iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::Degenerate("growth fit design matrix is singular".into()));
        }
        let alpha = if a[k][k] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = a[k][k..].to_vec();
        v[0] -= alpha;
        let vv: f64 = v.iter().map(|t| t * t).sum();
        if vv > 0.0 {
            for col in a.iter_mut().skip(k).chain(std::iter::once(&mut b)) {
                let proj = v.iter().zip(&col[k..]).map(|(p, q)| p * q).sum::<f64>() * 2.0 / vv;
                col[k..].iter_mut().zip(&v).for_each(|(c, vi)| *c -= proj * vi);
            }
        }
    }
    let mut c = vec![0.0; terms];
    for k in (0..terms).rev() {
        let s: f64 = (k + 1..terms).map(|j| a[j][k] * c[j]).sum();
        c[k] = (b[k] - s) / a[k][k];
    }
    // back to powers of x
    let mut coef = vec![0.0; terms];
    for (k, ck) in c.iter().enumerate() {
        let mut binom = 1.0;
        for (j, slot) in coef.iter_mut().enumerate().take(k + 1) {
            *slot += ck * binom * (-shift).powi((k - j) as i32);
            binom = binom * (k - j) as f64 / (j + 1) as f64;
        }
    }
    let residuals: Vec<f64> = x
        .iter()
        .zip(y)
        .map(|(xi, yi)| yi - c.iter().enumerate().map(|(k, ck)| ck * (xi - shift).powi(k as i32)).sum::<f64>())
        .collect();
    let mean = y.iter().sum::<f64>() / rows as f64;
    let ss_tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let ss_res: f64 = residuals.iter().map(|r| r * r).sum();
    let r2 = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok((coef, residuals, r2))
}

/// Entropy of constructed nets at each radius, then a growth fit.
pub fn scan_class(
    spec: &ClassSpec,
    basis: BasisSpec,
    eps_values: &[f64],
    model: GrowthModel,
    opts: NetOptions,
) -> Result<EntropyScan> {
    let nets: Vec<(f64, Option<u64>)> = eps_values
        .par_iter()
        .map(|&e| EpsilonNet::plan(spec, basis, e, opts).map(|n| (n.log2_size(), n.size())))
        .collect::<Result<_>>()?;
    let h: Vec<f64> = nets.iter().map(|n| n.0).collect();
    let m: Vec<Option<u64>> = nets.iter().map(|n| n.1).collect();
    fit_with_sizes(eps_values, &h, m, model)
}
