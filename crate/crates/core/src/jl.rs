//! Random orthonormal frames and the scaled projection `√(d/n) · π_W`.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hilbert::{format_real, parse_real, Signal};
use crate::rng::{self, domain};

pub const DEFAULT_JL_CONSTANT: f64 = 20.0;
/// Lower and upper ratio of the distortion band.
pub const BAND: (f64, f64) = (0.5, 2.0);

const MAX_RETRIES: u64 = 3;
const BLOCK: usize = 64;
/// A row whose norm drops below this fraction during orthogonalization is
/// treated as rank deficient.
const RANK_TOL: f64 = 1e-8;

/// `⌈c/(1−p) · ln m⌉`.
pub fn required_measurements(p: f64, m: u64, jl_constant: f64) -> Result<usize> {
    if m < 2 {
        return Err(Error::usage(format!("point count m must be >= 2, got {m}")));
    }
    measurements_for_ln(p, (m as f64).ln(), jl_constant)
}

/// Same as [`required_measurements`] with `ln m` supplied directly, for
/// point counts beyond 64 bits.
pub fn measurements_for_ln(p: f64, ln_m: f64, jl_constant: f64) -> Result<usize> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::usage(format!("probability p must lie in (0, 1), got {p}")));
    }
    if !(jl_constant >= 0.0 && jl_constant.is_finite()) {
        return Err(Error::usage(format!("jl_constant must be finite and non-negative, got {jl_constant}")));
    }
    if !(ln_m >= 2f64.ln() * (1.0 - 1e-15)) {
        return Err(Error::usage("point count m must be >= 2"));
    }
    let n = (jl_constant / (1.0 - p) * ln_m).ceil();
    if n < 1.0 {
        return Err(Error::usage(format!(
            "jl_constant {jl_constant} gives {n} measurements; at least one is required"
        )));
    }
    if n > usize::MAX as f64 {
        return Err(Error::usage("measurement count overflows"));
    }
    Ok(n as usize)
}

/// An orthonormal `n`-frame in `R^d` with the scale `√(d/n)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementOperator {
    d: usize,
    n: usize,
    /// Row-major `n × d`.
    frame: Vec<f64>,
    scale: f64,
    seed: u64,
}

/// Draws a uniformly distributed frame by orthonormalizing Gaussian rows.
pub fn random_subspace(d: usize, n: usize, seed: u64) -> Result<MeasurementOperator> {
    if n == 0 || n > d {
        return Err(Error::usage(format!("need 1 <= n <= d, got n = {n}, d = {d}")));
    }
    let mut attempt = 0;
    loop {
        let mut rng = if attempt == 0 { rng::from_seed(seed) } else { rng::stream(seed, domain::RETRY, attempt) };
        let mut frame: Vec<f64> = (0..n * d).map(|_| rng.sample(StandardNormal)).collect();
        if orthonormalize_rows(&mut frame, n, d) {
            return Ok(MeasurementOperator { d, n, frame, scale: (d as f64 / n as f64).sqrt(), seed });
        }
        attempt += 1;
        if attempt > MAX_RETRIES {
            return Err(Error::Internal(format!(
                "orthonormalization of a {n} x {d} Gaussian frame failed {} times",
                MAX_RETRIES + 1
            )));
        }
    }
}

/// `C ← α · A · B + β · C` for row-major dense matrices, with `B` optionally
/// transposed.
#[allow(clippy::too_many_arguments)]
fn gemm(m: usize, k: usize, n: usize, alpha: f64, a: &[f64], b: &[f64], b_transposed: bool, beta: f64, c: &mut [f64]) {
    if m == 0 || n == 0 {
        return;
    }
    let (rsb, csb) = if b_transposed { (1, k as isize) } else { (n as isize, 1) };
    debug_assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    // SAFETY: slices hold at least the addressed extents checked above.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            k as isize,
            1,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Block classical Gram–Schmidt with one re-orthogonalization pass. Returns
/// false on rank deficiency.
fn orthonormalize_rows(a: &mut [f64], n: usize, d: usize) -> bool {
    let mut start = 0;
    while start < n {
        let end = (start + BLOCK).min(n);
        let bs = end - start;
        let norms0: Vec<f64> = (start..end).map(|r| crate::hilbert::norm(&a[r * d..(r + 1) * d])).collect();
        if start > 0 {
            let (done, rest) = a.split_at_mut(start * d);
            let block = &mut rest[..bs * d];
            let mut coef = vec![0.0; bs * start];
            for _ in 0..2 {
                gemm(bs, d, start, 1.0, block, done, true, 0.0, &mut coef);
                gemm(bs, start, d, -1.0, &coef, done, false, 1.0, block);
            }
        }
        for r in start..end {
            for _ in 0..2 {
                for q in start..r {
                    let (head, tail) = a.split_at_mut(r * d);
                    let qrow = &head[q * d..(q + 1) * d];
                    let row = &mut tail[..d];
                    let c = crate::hilbert::dot(qrow, row);
                    row.iter_mut().zip(qrow).for_each(|(x, y)| *x -= c * y);
                }
            }
            let row = &mut a[r * d..(r + 1) * d];
            let nr = crate::hilbert::norm(row);
            if !(nr > RANK_TOL * norms0[r - start]) || !nr.is_finite() {
                return false;
            }
            row.iter_mut().for_each(|x| *x /= nr);
        }
        start = end;
    }
    true
}

/// Result of a pairwise distortion check.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DistortionReport {
    pub ok: bool,
    /// Smallest and largest `scale·|π_W(x−y)| / |x−y|`; `None` without pairs.
    pub min_ratio: Option<f64>,
    pub max_ratio: Option<f64>,
    pub pairs: usize,
}

impl MeasurementOperator {
    /// Rebuilds an operator from explicit rows.
    pub fn from_rows(d: usize, n: usize, frame: Vec<f64>, seed: u64) -> Result<Self> {
        if n == 0 || n > d || frame.len() != n * d {
            return Err(Error::usage(format!("frame of {} values does not match n = {n}, d = {d}", frame.len())));
        }
        if frame.iter().any(|x| !x.is_finite()) {
            return Err(Error::usage("frame has non-finite entries"));
        }
        Ok(Self { d, n, frame, scale: (d as f64 / n as f64).sqrt(), seed })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.frame[i * self.d..(i + 1) * self.d]
    }

    pub fn frame(&self) -> &[f64] {
        &self.frame
    }

    /// Largest `|⟨e_i, e_j⟩ − δ_ij|`.
    pub fn orthonormality_residual(&self) -> f64 {
        let mut g = vec![0.0; self.n * self.n];
        gemm(self.n, self.d, self.n, 1.0, &self.frame, &self.frame, true, 0.0, &mut g);
        g.iter()
            .enumerate()
            .map(|(k, v)| (v - if k / self.n == k % self.n { 1.0 } else { 0.0 }).abs())
            .fold(0.0, f64::max)
    }

    /// `scale · F x` for a length-`d` vector.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.d {
            return Err(Error::usage(format!("vector of length {} does not match d = {}", x.len(), self.d)));
        }
        Ok(self.apply_prefix(x))
    }

    /// Applies to the first `d` coefficients of a signal.
    pub fn apply_signal(&self, x: &Signal) -> Result<Vec<f64>> {
        if x.dim() < self.d {
            return Err(Error::usage(format!("signal of dimension {} is shorter than d = {}", x.dim(), self.d)));
        }
        Ok(self.apply_prefix(&x.coeffs()[..self.d]))
    }

    fn apply_prefix(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        gemm(1, self.d, self.n, self.scale, x, &self.frame, true, 0.0, &mut out);
        out
    }

    /// Applies to many vectors given as rows of a `count × stride` matrix,
    /// using the first `d` entries of each row.
    pub fn apply_rows(&self, rows: &[f64], stride: usize) -> Result<Vec<f64>> {
        if stride < self.d || !rows.len().is_multiple_of(stride) {
            return Err(Error::usage("row matrix does not match the operator"));
        }
        let count = rows.len() / stride;
        let mut out = vec![0.0; count * self.n];
        if stride == self.d {
            gemm(count, self.d, self.n, self.scale, rows, &self.frame, true, 0.0, &mut out);
        } else {
            let packed: Vec<f64> = rows.chunks(stride).flat_map(|r| r[..self.d].iter().copied()).collect();
            gemm(count, self.d, self.n, self.scale, &packed, &self.frame, true, 0.0, &mut out);
        }
        Ok(out)
    }

    /// Inverse on the range: `F^T y / scale`.
    pub fn adjoint(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.n {
            return Err(Error::usage("measurement vector does not match n"));
        }
        let mut out = vec![0.0; self.d];
        gemm(1, self.n, self.d, 1.0 / self.scale, y, &self.frame, false, 0.0, &mut out);
        Ok(out)
    }

    /// Checks `½|x−y| ≤ scale·|π_W(x−y)| ≤ 2|x−y|` over all pairs of `points`
    /// (length-`d` vectors). Zero-distance pairs are skipped.
    pub fn distortion_ok(&self, points: &[Vec<f64>]) -> Result<DistortionReport> {
        let flat: Vec<f64> = points.iter().flat_map(|p| p.iter().copied()).collect();
        if points.iter().any(|p| p.len() != self.d) {
            return Err(Error::usage("distortion points must have length d"));
        }
        let projected = self.apply_rows(&flat, self.d)?;
        Ok(self.distortion_projected(points, &projected))
    }

    /// Distortion check with precomputed projections (rows of length `n`).
    pub fn distortion_projected(&self, points: &[Vec<f64>], projected: &[f64]) -> DistortionReport {
        let n = self.n;
        let per_row: Vec<(f64, f64, usize)> = (0..points.len())
            .into_par_iter()
            .map(|i| {
                let (mut lo, mut hi, mut pairs) = (f64::INFINITY, f64::NEG_INFINITY, 0usize);
                for j in (i + 1)..points.len() {
                    let dist = crate::hilbert::distance(&points[i], &points[j]);
                    if dist == 0.0 {
                        continue;
                    }
                    let pd = crate::hilbert::distance(&projected[i * n..(i + 1) * n], &projected[j * n..(j + 1) * n]);
                    let ratio = pd / dist;
                    lo = lo.min(ratio);
                    hi = hi.max(ratio);
                    pairs += 1;
                }
                (lo, hi, pairs)
            })
            .collect();
        let (lo, hi, pairs) = per_row
            .into_iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY, 0), |a, b| (a.0.min(b.0), a.1.max(b.1), a.2 + b.2));
        if pairs == 0 {
            return DistortionReport { ok: true, min_ratio: None, max_ratio: None, pairs };
        }
        DistortionReport { ok: lo >= BAND.0 && hi <= BAND.1, min_ratio: Some(lo), max_ratio: Some(hi), pairs }
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("d={} n={} seed={}\n", self.d, self.n, self.seed);
        for i in 0..self.n {
            if i > 0 {
                out.push_str("---\n");
            }
            out.push_str(&format!("basis=trig ambient_dim={}\n", self.d));
            for x in self.row(i) {
                out.push_str(&format_real(*x));
                out.push('\n');
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::parse("empty operator file"))?;
        let mut fields = [None; 3];
        for tok in header.split_whitespace() {
            let (k, v) = tok.split_once('=').ok_or_else(|| Error::parse(format!("bad header token '{tok}'")))?;
            let slot = match k {
                "d" => 0,
                "n" => 1,
                "seed" => 2,
                _ => return Err(Error::parse(format!("unknown header key '{k}'"))),
            };
            fields[slot] = Some(v.parse::<u64>().map_err(|_| Error::parse(format!("bad value '{v}' for {k}")))?);
        }
        let [Some(d), Some(n), Some(seed)] = fields else {
            return Err(Error::parse("operator header needs d, n and seed"));
        };
        let (d, n) = (d as usize, n as usize);
        let mut frame = Vec::with_capacity(n * d);
        let mut rows = 0;
        let mut expect_header = true;
        for line in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if line == "---" {
                expect_header = true;
                continue;
            }
            if expect_header {
                if line != format!("basis=trig ambient_dim={d}") {
                    return Err(Error::parse(format!("bad row header '{line}'")));
                }
                rows += 1;
                expect_header = false;
                continue;
            }
            frame.push(parse_real(line)?);
        }
        if rows != n {
            return Err(Error::parse(format!("operator header says n = {n} but file holds {rows} rows")));
        }
        Self::from_rows(d, n, frame, seed)
    }
}
