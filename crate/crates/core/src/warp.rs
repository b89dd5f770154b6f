//! Finite-dimensional warp family and composition `f ∘ Ψ_τ`.
//!
//! `Ψ_τ(x) = x + Σ_i τ_i a_i sin(i(x + π))` with `a_i = 1/(2 i s)`, so
//! `Σ |a_i| i = 1/2` and `Ψ_τ' ≥ 1/2` for every `τ ∈ [0,1]^s`: each `Ψ_τ` is
//! a homeomorphism of [−π, π] fixing both endpoints.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::hilbert::{BasisSpec, Signal};

/// Lower bound on `Ψ_τ'` over the family.
pub const MIN_DERIVATIVE: f64 = 0.5;

#[derive(Clone, Debug, PartialEq)]
pub struct WarpFamily {
    amplitudes: Vec<f64>,
}

impl WarpFamily {
    pub fn new(params: usize) -> Result<Self> {
        if params == 0 {
            return Err(Error::usage("warp family needs at least one parameter"));
        }
        let s = params as f64;
        Ok(Self { amplitudes: (1..=params).map(|i| 1.0 / (2.0 * i as f64 * s)).collect() })
    }

    pub fn params(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    /// Euclidean norm of `∂Ψ/∂τ` bounded uniformly in `x`.
    pub fn parameter_lipschitz(&self) -> f64 {
        self.amplitudes.iter().map(|a| a * a).sum::<f64>().sqrt()
    }

    pub fn apply(&self, tau: &[f64], x: f64) -> f64 {
        let shift: f64 = tau
            .iter()
            .zip(&self.amplitudes)
            .enumerate()
            .map(|(i, (t, a))| t * a * ((i + 1) as f64 * (x + PI)).sin())
            .sum();
        x + shift
    }

    pub fn derivative(&self, tau: &[f64], x: f64) -> f64 {
        let d: f64 = tau
            .iter()
            .zip(&self.amplitudes)
            .enumerate()
            .map(|(i, (t, a))| {
                let w = (i + 1) as f64;
                t * a * w * (w * (x + PI)).cos()
            })
            .sum();
        1.0 + d
    }

    /// Coefficients of `f ∘ Ψ_τ` by periodic trapezoid quadrature on a grid
    /// of at least four samples per ambient coefficient.
    pub fn compose(&self, f: &Signal, tau: &[f64]) -> Result<Signal> {
        if tau.len() != self.params() {
            return Err(Error::usage(format!(
                "warp expects {} parameters, got {}",
                self.params(),
                tau.len()
            )));
        }
        if tau.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(Error::usage("warp parameters must lie in [0, 1]"));
        }
        let basis = f.basis();
        let dim = basis.ambient_dim();
        let n = (4 * dim).next_power_of_two();
        let h = 2.0 * PI / n as f64;
        let mut buf: Vec<Complex<f64>> = (0..n)
            .map(|i| {
                let t = -PI + i as f64 * h;
                Complex::new(f.evaluate(self.apply(tau, t)), 0.0)
            })
            .collect();
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        Signal::new(basis, fourier_from_dft(&buf, basis))
    }
}

/// Converts a forward DFT of samples at `t_n = −π + 2πn/N` into trig-basis
/// coefficients.
pub(crate) fn fourier_from_dft(dft: &[Complex<f64>], basis: BasisSpec) -> Vec<f64> {
    let n = dft.len();
    let h = 2.0 * PI / n as f64;
    let dim = basis.ambient_dim();
    let mut out = vec![0.0; dim];
    out[0] = dft[0].re * h / (2.0 * PI).sqrt();
    let inv = h / PI.sqrt();
    for j in 1..=basis.max_frequency() {
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        let z = dft[j % n];
        out[2 * j - 1] = sign * z.re * inv;
        if 2 * j < dim {
            out[2 * j] = -sign * z.im * inv;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn family_is_monotone_and_fixes_endpoints() {
        let fam = WarpFamily::new(3).unwrap();
        let tau = [1.0, 1.0, 1.0];
        assert!((fam.apply(&tau, -PI) + PI).abs() < 1e-12);
        assert!((fam.apply(&tau, PI) - PI).abs() < 1e-12);
        for i in 0..1000 {
            let x = -PI + 2.0 * PI * i as f64 / 1000.0;
            assert!(fam.derivative(&tau, x) >= MIN_DERIVATIVE - 1e-12);
        }
        let sum: f64 = fam.amplitudes().iter().enumerate().map(|(i, a)| a * (i + 1) as f64).sum();
        assert!((sum - 0.5).abs() < 1e-15);
    }

    #[test]
    fn identity_warp_reproduces_signal() {
        let basis = BasisSpec::trig(33).unwrap();
        let coeffs: Vec<f64> = (0..33).map(|i| 1.0 / (1.0 + i as f64)).collect();
        let f = Signal::new(basis, coeffs).unwrap();
        let fam = WarpFamily::new(2).unwrap();
        let g = fam.compose(&f, &[0.0, 0.0]).unwrap();
        assert!(f.distance(&g).unwrap() < 1e-12);
    }

    #[test]
    fn composition_matches_pointwise_values() {
        let basis = BasisSpec::trig(17).unwrap();
        let coeffs: Vec<f64> = (0..17).map(|i| (0.3 * i as f64).sin() / (1.0 + i as f64)).collect();
        let f = Signal::new(basis, coeffs).unwrap();
        let fam = WarpFamily::new(1).unwrap();
        let g = fam.compose(&f, &[0.7]).unwrap();
        // f∘Ψ has content above the ambient band; compare in L² against a
        // finely sampled reference instead of pointwise
        let n = 1 << 14;
        let h = 2.0 * PI / n as f64;
        let err2: f64 = (0..n)
            .map(|i| {
                let t = -PI + i as f64 * h;
                (g.evaluate(t) - f.evaluate(fam.apply(&[0.7], t))).powi(2)
            })
            .sum::<f64>()
            * h;
        let total: f64 = (0..n).map(|i| f.evaluate(fam.apply(&[0.7], -PI + i as f64 * h)).powi(2)).sum::<f64>() * h;
        // the truncation loses some energy but the kept part is exact
        assert!(err2.sqrt() < 0.2 * total.sqrt(), "{} vs {}", err2.sqrt(), total.sqrt());
        assert!(g.norm() <= total.sqrt() + 1e-9);
    }

    #[test]
    fn rejects_bad_parameters() {
        let basis = BasisSpec::trig(8).unwrap();
        let fam = WarpFamily::new(2).unwrap();
        let f = Signal::zeros(basis);
        assert!(fam.compose(&f, &[0.5]).is_err());
        assert!(fam.compose(&f, &[0.5, 1.5]).is_err());
        assert!(WarpFamily::new(0).is_err());
    }
}
