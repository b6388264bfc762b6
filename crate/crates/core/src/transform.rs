//! Wavelet coefficients W_{j,k} = sum_l h_j(gamma_j k - l) Y_l by both
//! equivalent routes, with strict interior-support bookkeeping: only shifts k
//! whose filter support lies entirely inside the sample are retained, so no
//! boundary extension ever biases the variance estimates.

use std::io::Write;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::filters::{factor_k, FilterBank};

/// Above this support * count product a level switches to FFT convolution.
const FFT_THRESHOLD: usize = 1 << 24;

/// Coefficients of one scale.
#[derive(Debug, Clone)]
pub struct CoeffLevel {
    pub j: u32,
    pub gamma: f64,
    /// First retained shift index k.
    pub k_first: i64,
    pub values: Vec<f64>,
}

impl CoeffLevel {
    pub fn count(&self) -> usize {
        self.values.len()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.count().max(1) as f64
    }

    /// Centered sample variance.
    pub fn var(&self) -> f64 {
        let m = self.mean();
        self.values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / self.count().max(1) as f64
    }

    /// Raw second moment, the natural estimator of E[W^2] (coefficients are
    /// exactly centered by the vanishing moments).
    pub fn second_moment(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>() / self.count().max(1) as f64
    }
}

/// Per-level summary for the JSON exchange format.
#[derive(Debug, Clone, Serialize)]
pub struct LevelSummary {
    pub j: u32,
    pub gamma: f64,
    pub count: usize,
    pub mean: f64,
    pub var: f64,
}

/// Wavelet coefficients over a range of scales.
#[derive(Debug, Clone, Default)]
pub struct CoeffMatrix {
    pub levels: Vec<CoeffLevel>,
    pub warnings: Vec<String>,
}

impl CoeffMatrix {
    pub fn level(&self, j: u32) -> Option<&CoeffLevel> {
        self.levels.iter().find(|l| l.j == j)
    }

    pub fn summaries(&self) -> Vec<LevelSummary> {
        self.levels
            .iter()
            .map(|l| LevelSummary {
                j: l.j,
                gamma: l.gamma,
                count: l.count(),
                mean: l.mean(),
                var: l.var(),
            })
            .collect()
    }

    /// CSV rows `j,k,w`.
    pub fn to_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "j,k,w")?;
        for lvl in &self.levels {
            for (i, v) in lvl.values.iter().enumerate() {
                writeln!(w, "{},{},{}", lvl.j, lvl.k_first + i as i64, v)?;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
#[cfg_attr(not(test), allow(dead_code))] // forced paths are exercised by tests
enum ConvPath {
    Auto,
    Direct,
    Fft,
}

fn level_coefficients(
    taps: &[f64],
    offset: i64,
    gamma: usize,
    series: &[f64],
    path: ConvPath,
) -> Option<(i64, Vec<f64>)> {
    let n = series.len() as i64;
    let s = taps.len() as i64;
    if s > n {
        return None;
    }
    let g = gamma as i64;
    // gamma k - tau in [0, n) for tau in [offset, offset + s)
    let k_first = (offset + s - 1).div_euclid(g) + i64::from((offset + s - 1).rem_euclid(g) != 0);
    let k_last = (n - 1 + offset).div_euclid(g);
    if k_last < k_first {
        return None;
    }
    let count = (k_last - k_first + 1) as usize;

    let use_fft = match path {
        ConvPath::Auto => taps.len() * count >= FFT_THRESHOLD,
        ConvPath::Direct => false,
        ConvPath::Fft => true,
    };

    let values: Vec<f64> = if use_fft {
        let conv = fft_convolve(taps, series);
        (0..count)
            .map(|i| {
                let k = k_first + i as i64;
                conv[(g * k - offset) as usize]
            })
            .collect()
    } else {
        (0..count)
            .map(|i| {
                let k = k_first + i as i64;
                let base = g * k - offset;
                let mut acc = 0.0;
                for (t, &h) in taps.iter().enumerate() {
                    acc += h * series[(base - t as i64) as usize];
                }
                acc
            })
            .collect()
    };
    Some((k_first, values))
}

/// Full linear convolution c[t] = sum_tau h(tau) y[t - tau] for t = 0..n+s-1.
fn fft_convolve(taps: &[f64], series: &[f64]) -> Vec<f64> {
    let out_len = series.len() + taps.len();
    let size = out_len.next_power_of_two();
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(size);
    let ifft = planner.plan_fft_inverse(size);
    let mut a: Vec<Complex64> = series
        .iter()
        .map(|&v| Complex64::new(v, 0.0))
        .chain(std::iter::repeat(Complex64::new(0.0, 0.0)))
        .take(size)
        .collect();
    let mut b: Vec<Complex64> = taps
        .iter()
        .map(|&v| Complex64::new(v, 0.0))
        .chain(std::iter::repeat(Complex64::new(0.0, 0.0)))
        .take(size)
        .collect();
    fft.process(&mut a);
    fft.process(&mut b);
    for (x, y) in a.iter_mut().zip(&b) {
        *x *= y;
    }
    ifft.process(&mut a);
    let inv = 1.0 / size as f64;
    a.iter().take(out_len).map(|z| z.re * inv).collect()
}

fn compute_matrix(
    bank: &FilterBank,
    series: &[f64],
    j_range: (u32, u32),
    k_factor: Option<u32>,
    path: ConvPath,
) -> Result<CoeffMatrix> {
    let (j_lo, j_hi) = j_range;
    if j_lo < 1 || j_hi > bank.j_max() || j_lo > j_hi {
        return Err(Error::Precondition(format!(
            "scale range {j_lo}..={j_hi} outside the bank's 1..={}",
            bank.j_max()
        )));
    }
    let mut matrix = CoeffMatrix::default();
    for j in j_lo..=j_hi {
        let lvl = bank.level(j)?;
        let (taps, offset) = match k_factor {
            Some(k) => factor_k(&lvl.taps, lvl.offset, k)?,
            None => (lvl.taps.clone(), lvl.offset),
        };
        let gamma = bank.gamma(j) as usize;
        match level_coefficients(&taps, offset, gamma, series, path) {
            Some((k_first, values)) => matrix.levels.push(CoeffLevel {
                j,
                gamma: gamma as f64,
                k_first,
                values,
            }),
            None => matrix.warnings.push(format!(
                "level {j} omitted: no coefficient with full support in {} samples",
                series.len()
            )),
        }
    }
    if matrix.levels.is_empty() {
        return Err(Error::InsufficientData(
            "no scale admits a full-support coefficient".into(),
        ));
    }
    Ok(matrix)
}

/// Coefficients of the (possibly integrated) path Y via the plain filters h_j.
pub fn coeffs_from_path(bank: &FilterBank, y: &[f64], j_range: (u32, u32)) -> Result<CoeffMatrix> {
    compute_matrix(bank, y, j_range, None, ConvPath::Auto)
}

/// Coefficients from the stationary series G(X) via the factored filters
/// h_j^{(K)}, using the bank's difference order K.
pub fn coeffs_from_stationary(
    bank: &FilterBank,
    g_series: &[f64],
    j_range: (u32, u32),
) -> Result<CoeffMatrix> {
    compute_matrix(bank, g_series, j_range, Some(bank.k), ConvPath::Auto)
}
