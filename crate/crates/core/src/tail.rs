//! Empirical tail-decay models `|z − P_d z| ≤ C d^{−β} |z|`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classes::ClassSpec;
use crate::error::{Error, Result};
use crate::hilbert::{BasisSpec, Signal};
use crate::rng::{domain, stream};

/// Relative slack when comparing a tail against the fitted bound.
pub const BOUND_TOL: f64 = 1e-9;
/// Safety factor applied to the largest sample norm.
pub const RADIUS_FACTOR: f64 = 1.1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailDecayModel {
    pub c: f64,
    /// `f64::INFINITY` when every fitted tail vanished.
    pub beta: f64,
    /// Bound on the norm of class members.
    pub r: f64,
}

impl TailDecayModel {
    pub fn new(c: f64, beta: f64, r: f64) -> Result<Self> {
        if !(c >= 0.0 && c.is_finite()) || !(beta > 0.0) || !(r > 0.0 && r.is_finite()) {
            return Err(Error::usage(format!("invalid tail model C={c} beta={beta} R={r}")));
        }
        Ok(Self { c, beta, r })
    }

    /// `C · d^{−β}`.
    pub fn bound(&self, d: usize) -> f64 {
        if self.beta.is_infinite() {
            return 0.0;
        }
        self.c * (d as f64).powf(-self.beta)
    }

    /// Smallest `d ≥ 1` with `R · C · d^{−β} ≤ eps1`, before any ambient clamp.
    pub fn required_dimension(&self, eps1: f64) -> u64 {
        if self.beta.is_infinite() || self.r * self.c <= eps1 {
            return 1;
        }
        let x = (self.r * self.c / eps1).powf(1.0 / self.beta);
        if !x.is_finite() || x >= u64::MAX as f64 {
            return u64::MAX;
        }
        // absorb rounding noise such as 100.00000000000004
        let rounded = x.round();
        if (x - rounded).abs() <= 1e-9 * rounded.max(1.0) {
            rounded.max(1.0) as u64
        } else {
            x.ceil().max(1.0) as u64
        }
    }

    /// True when the tail of `z` beyond `d` respects the bound.
    pub fn holds_for(&self, z: &Signal, d: usize) -> Result<bool> {
        let tail = z.tail_norm(d)?;
        Ok(tail <= self.bound(d) * z.norm() * (1.0 + BOUND_TOL) + f64::MIN_POSITIVE)
    }
}

/// Fitted model plus regression diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TailFit {
    pub model: TailDecayModel,
    /// Number of `(sample, d)` pairs with a nonzero tail.
    pub points: usize,
    pub r_squared: f64,
    pub samples: usize,
    pub dims: Vec<usize>,
}

/// Default probe dimensions: powers of two from 8 to `D/8`.
pub fn default_dims(basis: BasisSpec) -> Vec<usize> {
    let top = (basis.ambient_dim() / 8).max(8);
    let mut dims = Vec::new();
    let mut d = 8;
    while d <= top && d <= basis.ambient_dim() {
        dims.push(d);
        d *= 2;
    }
    dims
}

fn check_dims(dims: &[usize], basis: BasisSpec) -> Result<()> {
    if dims.is_empty() {
        return Err(Error::usage("at least one probe dimension is required"));
    }
    if dims.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::usage("probe dimensions must be strictly increasing"));
    }
    if dims[0] < 1 || *dims.last().unwrap() > basis.ambient_dim() {
        return Err(Error::usage(format!("probe dimensions must lie in [1, {}]", basis.ambient_dim())));
    }
    Ok(())
}

fn draw(spec: &ClassSpec, basis: BasisSpec, n: usize, seed: u64, dom: u64) -> Result<Vec<Signal>> {
    (0..n as u64)
        .into_par_iter()
        .map(|i| Ok(spec.sample(basis, &mut stream(seed, dom, i))?.signal))
        .collect()
}

/// Fits `(C, β, R)` on `n_samples` class members drawn from `seed`.
pub fn fit_tail_model(spec: &ClassSpec, basis: BasisSpec, n_samples: usize, dims: &[usize], seed: u64) -> Result<TailFit> {
    if n_samples < 10 {
        return Err(Error::usage(format!("tail fit needs at least 10 samples, got {n_samples}")));
    }
    check_dims(dims, basis)?;
    let samples = draw(spec, basis, n_samples, seed, domain::TAIL_FIT)?;
    fit_signals(&samples, dims).map(|(model, points, r_squared)| TailFit {
        model,
        points,
        r_squared,
        samples: n_samples,
        dims: dims.to_vec(),
    })
}

/// Fits a model to given signals; returns the model, the number of
/// regression points and the regression R².
pub fn fit_signals(samples: &[Signal], dims: &[usize]) -> Result<(TailDecayModel, usize, f64)> {
    let max_norm = samples.iter().map(Signal::norm).fold(0.0, f64::max);
    if max_norm == 0.0 {
        return Err(Error::Degenerate("all tail-fit samples are zero".into()));
    }
    let mut pts: Vec<(f64, f64)> = Vec::new();
    for z in samples {
        let n = z.norm();
        if n == 0.0 {
            continue;
        }
        let profile = z.tail_profile();
        for &d in dims {
            let ratio = profile[d - 1] / n;
            if ratio > 0.0 {
                pts.push(((d as f64).ln(), ratio.ln()));
            }
        }
    }
    let r = RADIUS_FACTOR * max_norm;
    if pts.is_empty() {
        return Ok((TailDecayModel { c: 0.0, beta: f64::INFINITY, r }, 0, 1.0));
    }
    let (slope, r2) = line_fit(&pts);
    let beta = -slope;
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::Degenerate(format!("tails do not decay: fitted exponent {beta}")));
    }
    let c = pts.iter().map(|(x, y)| (y + beta * x).exp()).fold(0.0, f64::max);
    Ok((TailDecayModel { c, beta, r }, pts.len(), r2))
}

/// Least-squares slope and R² of `y` against `x`.
fn line_fit(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return (0.0, 0.0);
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    (slope, r2)
}

/// Outcome of checking a model on fresh samples.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TailValidation {
    pub samples: usize,
    pub bound_violations: usize,
    pub radius_violations: usize,
}

/// Counts bound and radius violations on fresh samples (a separate stream
/// domain from the fit).
pub fn validate_tail_model(
    model: &TailDecayModel,
    spec: &ClassSpec,
    basis: BasisSpec,
    n_samples: usize,
    dims: &[usize],
    seed: u64,
) -> Result<TailValidation> {
    check_dims(dims, basis)?;
    let samples = draw(spec, basis, n_samples, seed, domain::TAIL_CHECK)?;
    let mut bound_violations = 0;
    let mut radius_violations = 0;
    for z in &samples {
        for &d in dims {
            if !model.holds_for(z, d)? {
                bound_violations += 1;
            }
        }
        if z.norm() > model.r {
            radius_violations += 1;
        }
    }
    Ok(TailValidation { samples: n_samples, bound_violations, radius_violations })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn required_dimension_examples() {
        let m = TailDecayModel::new(1.0, 0.5, 1.0).unwrap();
        assert_eq!(m.required_dimension(0.6 / 6.0), 100);
        assert_eq!(m.required_dimension(1.0), 1);
        assert_eq!(m.required_dimension(2.0), 1);
        let m = TailDecayModel::new(2.0, 1.0, 1.5).unwrap();
        assert_eq!(m.required_dimension(0.7), 5);
    }

    #[test]
    fn bandlimited_class_gives_infinite_exponent() {
        let b = BasisSpec::trig(64).unwrap();
        let sigs: Vec<Signal> = (0..20)
            .map(|i| {
                let mut c = vec![0.0; 64];
                c[1] = 1.0 + i as f64;
                c[4] = -0.5;
                Signal::new(b, c).unwrap()
            })
            .collect();
        let (m, points, _) = fit_signals(&sigs, &[8, 16, 32]).unwrap();
        assert_eq!(points, 0);
        assert!(m.beta.is_infinite());
        assert_eq!(m.c, 0.0);
        assert_eq!(m.bound(8), 0.0);
    }

    #[test]
    fn zero_samples_are_degenerate() {
        let b = BasisSpec::trig(16).unwrap();
        let sigs = vec![Signal::zeros(b); 12];
        assert!(matches!(fit_signals(&sigs, &[2, 4]), Err(Error::Degenerate(_))));
    }

    #[test]
    fn exact_power_tails_are_recovered() {
        // coefficients making tail(d)² = d^{-1} exactly at dyadic d
        let b = BasisSpec::trig(1024).unwrap();
        let mut c = vec![0.0; 1024];
        let mut d = 4;
        while d < 1024 {
            c[d] = (1.0 / d as f64 - 1.0 / (2 * d) as f64).sqrt();
            d *= 2;
        }
        c[0] = 1.0;
        let z = Signal::new(b, c).unwrap();
        let sigs = vec![z.clone(); 10];
        let (m, _, r2) = fit_signals(&sigs, &[4, 8, 16, 32, 64]).unwrap();
        assert!(r2 > 0.99);
        assert!((m.beta - 0.5).abs() < 0.05, "{}", m.beta);
        for d in [4, 8, 16, 32, 64] {
            assert!(m.holds_for(&z, d).unwrap());
        }
    }

    #[test]
    fn fitting_set_has_no_violations() {
        let b = BasisSpec::trig(512).unwrap();
        let spec = ClassSpec::piecewise_ck(1, 2, 1.0, 0.5, 1.0);
        let dims = default_dims(b);
        let fit = fit_tail_model(&spec, b, 200, &dims, 5).unwrap();
        let samples = draw(&spec, b, 200, 5, domain::TAIL_FIT).unwrap();
        for z in &samples {
            assert!(z.norm() <= fit.model.r);
            for &d in &dims {
                assert!(fit.model.holds_for(z, d).unwrap());
            }
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let b = BasisSpec::trig(64).unwrap();
        let spec = ClassSpec::smooth(1, 1.0);
        assert!(fit_tail_model(&spec, b, 5, &[8], 1).is_err());
        assert!(fit_tail_model(&spec, b, 20, &[8, 8], 1).is_err());
        assert!(fit_tail_model(&spec, b, 20, &[8, 128], 1).is_err());
    }
}
