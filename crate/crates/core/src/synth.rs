//! Exact synthesis of the stationary Gaussian input X, subordination, and
//! K-fold discrete integration producing Y with Delta^K Y = G(X).
//!
//! Synthesis is exact in law via circulant embedding of the autocovariance:
//! the covariance sequence is extended to a nonnegative-definite circulant,
//! whose eigenvalues come from one FFT; each replicate then costs one batch of
//! normals and one more FFT. Randomness is counter-based: a (seed, replicate)
//! pair selects an independent ChaCha stream, so replicates are reproducible
//! and order-independent under any parallel schedule.

use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::hermite::Filter;
use crate::spectra::{fractional_kernel_cov, FStar, MemoryModel};

/// Relative tolerance on negative embedding eigenvalues before enlargement.
pub const EMBED_EIG_TOL: f64 = 1e-8;
/// The circulant is enlarged by doubling up to this multiple of the series length.
pub const EMBED_MAX_FACTOR: usize = 32;

/// Independent RNG stream for one replicate of one experiment.
pub fn replicate_rng(seed: u64, replicate: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(replicate);
    rng
}

/// Precomputed circulant embedding of a stationary covariance, shared across
/// replicates.
pub struct CirculantEmbedding {
    n: usize,
    size: usize,
    /// sqrt(lambda_k / size) for the sampling step.
    scale: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    /// True when tiny negative eigenvalues were clipped to zero.
    pub clipped: bool,
}

impl CirculantEmbedding {
    /// Build the embedding for series length n under the given model.
    ///
    /// r(0..m) is embedded into a circulant of size 2m, starting at m = 2n and
    /// doubling until the spectrum is nonnegative (within tolerance) or the
    /// enlargement cap is reached.
    pub fn new(model: &MemoryModel, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Precondition("series length must be >= 2".into()));
        }
        let mut planner = FftPlanner::new();
        let mut m = 2 * n;
        loop {
            let r = embedding_autocov(model, m);
            let size = 2 * m;
            let mut buf: Vec<Complex64> = Vec::with_capacity(size);
            for item in r.iter().take(m + 1) {
                buf.push(Complex64::new(*item, 0.0));
            }
            for k in (1..m).rev() {
                buf.push(Complex64::new(r[k], 0.0));
            }
            debug_assert_eq!(buf.len(), size);
            let fft = planner.plan_fft_forward(size);
            fft.process(&mut buf);
            let eig: Vec<f64> = buf.iter().map(|z| z.re).collect();
            let max = eig.iter().cloned().fold(f64::MIN, f64::max);
            let min = eig.iter().cloned().fold(f64::MAX, f64::min);
            if min >= -EMBED_EIG_TOL * max {
                let clipped = min < 0.0;
                let scale: Vec<f64> = eig
                    .iter()
                    .map(|&l| (l.max(0.0) / size as f64).sqrt())
                    .collect();
                return Ok(CirculantEmbedding {
                    n,
                    size,
                    scale,
                    fft,
                    clipped,
                });
            }
            if m >= EMBED_MAX_FACTOR * n {
                return Err(Error::Synthesis(format!(
                    "embedding spectrum stays negative after maximal enlargement \
                     (min eigenvalue {min:.3e} vs max {max:.3e})"
                )));
            }
            m *= 2;
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn embedding_size(&self) -> usize {
        self.size
    }

    /// Draw one exact sample of length n; fully determined by (seed, replicate).
    pub fn sample(&self, seed: u64, replicate: u64) -> Vec<f64> {
        let mut rng = replicate_rng(seed, replicate);
        let mut buf: Vec<Complex64> = self
            .scale
            .iter()
            .map(|&s| {
                let a: f64 = rng.sample(StandardNormal);
                let b: f64 = rng.sample(StandardNormal);
                Complex64::new(s * a, s * b)
            })
            .collect();
        self.fft.process(&mut buf);
        buf.iter().take(self.n).map(|z| z.re).collect()
    }
}

/// Autocovariance for the embedding: closed form for constant fstar, otherwise
/// the exact fractional kernel plus an FFT of the bounded remainder.
fn embedding_autocov(model: &MemoryModel, m: usize) -> Vec<f64> {
    let d = model.d();
    match model.fstar() {
        FStar::Const(c) => {
            let c = *c;
            fractional_kernel_cov(d, m)
                .into_iter()
                .map(|k| c * k)
                .collect()
        }
        FStar::Custom(_) => {
            let c0 = model.fstar_zero();
            let base = fractional_kernel_cov(d, m);
            // remainder |1-e^{-i lambda}|^{-2d} (fstar - fstar(0)) is o(|lambda|^{-2d})
            // near zero; plain trapezoid on a grid well above the lag count
            let mut n_grid = model.n_grid();
            while n_grid < 8 * (m + 1) {
                n_grid *= 2;
            }
            let step = 2.0 * std::f64::consts::PI / n_grid as f64;
            let half = n_grid / 2;
            let mut buf: Vec<Complex64> = (0..n_grid)
                .map(|i| {
                    if i == half {
                        return Complex64::new(0.0, 0.0);
                    }
                    let lam = -std::f64::consts::PI + step * i as f64;
                    let kernel = (2.0 * (0.5 * lam).sin().abs()).powf(-2.0 * d);
                    Complex64::new(kernel * (model.fstar_at(lam) - c0), 0.0)
                })
                .collect();
            let mut planner = FftPlanner::new();
            planner.plan_fft_forward(n_grid).process(&mut buf);
            (0..=m)
                .map(|lag| {
                    let sign = if lag % 2 == 0 { 1.0 } else { -1.0 };
                    base[lag] * c0 + step * sign * buf[lag].re
                })
                .collect()
        }
    }
}

/// One-shot synthesis of a stationary Gaussian path with the model covariance.
pub fn synth_gaussian(model: &MemoryModel, n: usize, seed: u64, replicate: u64) -> Result<Vec<f64>> {
    Ok(CirculantEmbedding::new(model, n)?.sample(seed, replicate))
}

/// K-fold cumulative summation with zero initial conditions (compensated).
pub fn integrate_k(series: &[f64], k: u32) -> Vec<f64> {
    let mut out = series.to_vec();
    for _ in 0..k {
        let mut acc = 0.0f64;
        let mut comp = 0.0f64;
        for v in out.iter_mut() {
            let y = *v - comp;
            let t = acc + y;
            comp = (t - acc) - y;
            acc = t;
            *v = acc;
        }
    }
    out
}

/// K-fold forward difference, the inverse of [`integrate_k`] under zero initial
/// conditions.
pub fn difference_k(series: &[f64], k: u32) -> Vec<f64> {
    let mut out = series.to_vec();
    for _ in 0..k {
        for i in (1..out.len()).rev() {
            out[i] -= out[i - 1];
        }
        // out[0] keeps series[0] - 0, matching the zero initial condition
    }
    out
}

/// Full sampling configuration for one path.
#[derive(Debug, Clone)]
pub struct PathConfig {
    pub model: MemoryModel,
    pub filter: Filter,
    pub k: u32,
    pub n: usize,
    pub seed: u64,
    pub replicate: u64,
}

impl PathConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Precondition("series length must be >= 2".into()));
        }
        Ok(())
    }
}

/// Sample (X, Y): X Gaussian with the model covariance and Y the K-fold
/// integral of G(X).
pub fn sample_path(cfg: &PathConfig) -> Result<(Vec<f64>, Vec<f64>)> {
    cfg.validate()?;
    let x = synth_gaussian(&cfg.model, cfg.n, cfg.seed, cfg.replicate)?;
    let g = cfg.filter.apply(&x);
    let y = integrate_k(&g, cfg.k);
    Ok((x, y))
}
