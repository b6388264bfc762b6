//! Wavelet filter banks {h_j, gamma_j} with gamma_j = 2^j: construction from a
//! conjugate-mirror pair, vanishing-moment counting, the (1 - e^{-i lambda})^K
//! factorization, the uniform smoothness bound, and the rescaled limit
//! transfer function.
//!
//! Level-j transfer functions follow the non-decimated cascade
//! h^_j(lambda) = h^(2^{j-1} lambda) prod_{l=0}^{j-2} g^(2^l lambda); taps are
//! extracted by an inverse transform on a frequency grid exceeding the support
//! bound (2^j - 1)(L - 1) + 1.

use std::io::{BufRead, Write};

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Frequency grid floor for tap extraction.
const CASCADE_GRID_MIN: usize = 1 << 18;
/// Taps below this fraction of the largest one are trimmed.
const TAP_TRIM: f64 = 1e-12;
/// Number of factors kept in the truncated infinite cascade product.
const CASCADE_FACTORS: u32 = 25;
/// Relative threshold for a vanishing moment.
const MOMENT_TOL: f64 = 1e-6;
/// Disagreement between the two limit-transfer routes that triggers a warning.
pub const LIMIT_AGREEMENT_WARN: f64 = 1e-2;

/// Built-in conjugate-mirror families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// 2-tap Haar pair, M = 1, Fourier tail exponent alpha = 1.
    Haar,
    /// 4-tap Daubechies-type pair, M = 2.
    Db2,
    /// 8-tap Daubechies-type pair, M = 4.
    Db4,
}

impl Family {
    pub fn lowpass(&self) -> Vec<f64> {
        match self {
            Family::Haar => vec![
                std::f64::consts::FRAC_1_SQRT_2,
                std::f64::consts::FRAC_1_SQRT_2,
            ],
            Family::Db2 => vec![
                0.482962913144534,
                0.836516303737808,
                0.224143868042013,
                -0.129409522551260,
            ],
            Family::Db4 => vec![
                0.230377813308855,
                0.714846570552542,
                0.630880767929590,
                -0.027983769416984,
                -0.187034811717090,
                0.030841381835987,
                0.032883011666983,
                -0.010597401784997,
            ],
        }
    }

    /// Declared Fourier tail exponent, validated a posteriori by
    /// [`FilterBank::check_uniform_smoothness`].
    pub fn alpha(&self) -> f64 {
        match self {
            Family::Haar => 1.0,
            Family::Db2 => 1.3,
            Family::Db4 => 1.9,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Family::Haar => "haar",
            Family::Db2 => "db2",
            Family::Db4 => "db4",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "haar" | "db1" => Ok(Family::Haar),
            "db2" => Ok(Family::Db2),
            "db4" => Ok(Family::Db4),
            other => Err(Error::Domain(format!(
                "unknown filter family '{other}' (expected haar, db2 or db4)"
            ))),
        }
    }
}

/// Taps of one scale, supported on offset..offset+len.
#[derive(Debug, Clone)]
pub struct FilterLevel {
    pub j: u32,
    pub taps: Vec<f64>,
    pub offset: i64,
}

impl FilterLevel {
    /// Discrete Fourier transform of the taps at a real frequency.
    pub fn transfer(&self, lambda: f64) -> Complex64 {
        dft_filter(&self.taps, self.offset, lambda)
    }

    pub fn support(&self) -> usize {
        self.taps.len()
    }
}

/// A filter bank over scales j = 1..=J with gamma_j = 2^j.
#[derive(Debug, Clone)]
pub struct FilterBank {
    pub levels: Vec<FilterLevel>,
    /// Vanishing moments of the generating high-pass filter.
    pub m: u32,
    /// Declared Fourier tail exponent.
    pub alpha: f64,
    /// Difference order for the h^{(K)} routes; must satisfy k <= m.
    pub k: u32,
    /// Conjugate mirror pair (lowpass, highpass) when built from a cascade.
    mra_pair: Option<(Vec<f64>, Vec<f64>)>,
}

/// Exact finite sum sum_tau h(tau) e^{-i lambda tau}.
pub fn dft_filter(taps: &[f64], offset: i64, lambda: f64) -> Complex64 {
    let rot = Complex64::from_polar(1.0, -lambda);
    let mut phase = Complex64::from_polar(1.0, -lambda * offset as f64);
    let mut acc = Complex64::new(0.0, 0.0);
    for &t in taps {
        acc += t * phase;
        phase *= rot;
    }
    acc
}

/// Largest M such that the moments sum h(l) l^m vanish for m = 0..M-1, under
/// the relative threshold 1e-6. Moments are taken about the support center to
/// keep the sums conditioned.
pub fn vanishing_moments(taps: &[f64], offset: i64) -> Result<u32> {
    let max_tap = taps.iter().fold(0.0f64, |m, t| m.max(t.abs()));
    if taps.is_empty() || max_tap == 0.0 {
        return Err(Error::DegenerateInput("all taps are zero".into()));
    }
    let center = offset as f64 + (taps.len() as f64 - 1.0) / 2.0;
    let mut m = 0u32;
    while m < 24 {
        let mut signed = 0.0f64;
        let mut abssum = 0.0f64;
        for (i, &t) in taps.iter().enumerate() {
            let l = offset as f64 + i as f64 - center;
            let lm = if m == 0 { 1.0 } else { l.powi(m as i32) };
            signed += t * lm;
            abssum += (t * lm).abs();
        }
        if signed.abs() >= MOMENT_TOL * abssum.max(f64::MIN_POSITIVE) {
            break;
        }
        m += 1;
    }
    Ok(m)
}

/// Time-domain factor h^{(K)} with h^(lambda) = (1-e^{-i lambda})^K h^{(K)}^(lambda),
/// obtained by K iterated cumulative summations. Requires at least K vanishing
/// moments; the support shrinks by one tap per summation.
pub fn factor_k(taps: &[f64], offset: i64, k: u32) -> Result<(Vec<f64>, i64)> {
    let m = vanishing_moments(taps, offset)?;
    if k > m {
        return Err(Error::Precondition(format!(
            "difference order K = {k} exceeds the vanishing moments M = {m}"
        )));
    }
    let mut cur = taps.to_vec();
    for _ in 0..k {
        let mut acc = 0.0f64;
        for v in cur.iter_mut() {
            acc += *v;
            *v = acc;
        }
        let max = cur.iter().fold(0.0f64, |mm, t| mm.max(t.abs()));
        let last = *cur.last().unwrap();
        if last.abs() > 1e-10 * max {
            return Err(Error::Precondition(format!(
                "cumulative sum does not terminate: trailing value {last:.3e}"
            )));
        }
        cur.pop();
    }
    Ok((cur, offset))
}

impl FilterBank {
    /// Build a bank from a low-pass scaling filter via its quadrature mirror,
    /// with J levels. The low-pass taps must satisfy g^(0) = sqrt(2).
    pub fn build_mra(lowpass: &[f64], j_levels: u32) -> Result<Self> {
        Self::build_mra_with_alpha(lowpass, j_levels, 1.0)
    }

    pub fn build_mra_with_alpha(lowpass: &[f64], j_levels: u32, alpha: f64) -> Result<Self> {
        if lowpass.len() < 2 {
            return Err(Error::FilterConstruction(
                "low-pass filter needs at least two taps".into(),
            ));
        }
        if j_levels < 1 {
            return Err(Error::FilterConstruction("need at least one level".into()));
        }
        let sum: f64 = lowpass.iter().sum();
        if (sum - std::f64::consts::SQRT_2).abs() > 1e-8 {
            return Err(Error::FilterConstruction(format!(
                "low-pass normalization g^(0) = {sum}, expected sqrt(2)"
            )));
        }
        let l = lowpass.len();
        let highpass: Vec<f64> = (0..l)
            .map(|i| {
                let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                sign * lowpass[l - 1 - i]
            })
            .collect();

        // frequency grid comfortably above the largest support bound
        let support_bound = ((1usize << j_levels) - 1) * (l - 1) + 1;
        let mut n_grid = CASCADE_GRID_MIN;
        while n_grid < 2 * support_bound {
            n_grid *= 2;
        }
        let mut planner = FftPlanner::new();
        let ifft = planner.plan_fft_inverse(n_grid);

        let mut levels = Vec::with_capacity(j_levels as usize);
        // running product P_j(lambda) = prod_{l<j} g^(2^l lambda)
        let mut product = vec![Complex64::new(1.0, 0.0); n_grid];
        for j in 1..=j_levels {
            let scale = (1u64 << (j - 1)) as f64;
            let mut spec: Vec<Complex64> = (0..n_grid)
                .map(|kk| {
                    let lam = 2.0 * std::f64::consts::PI * kk as f64 / n_grid as f64;
                    dft_filter(&highpass, 0, scale * lam) * product[kk]
                })
                .collect();
            ifft.process(&mut spec);
            let inv_n = 1.0 / n_grid as f64;
            let bound = ((1usize << j) - 1) * (l - 1) + 1;
            let mut taps: Vec<f64> = spec[..bound.min(n_grid)]
                .iter()
                .map(|z| z.re * inv_n)
                .collect();
            let max = taps.iter().fold(0.0f64, |m, t| m.max(t.abs()));
            while let Some(&last) = taps.last() {
                if last.abs() < TAP_TRIM * max && taps.len() > 1 {
                    taps.pop();
                } else {
                    break;
                }
            }
            // grid extraction leaves ~1e-13 residue in the moment sums, which
            // iterated cumulative summation would amplify; project it out
            let moments = vanishing_moments(&highpass, 0)?;
            zero_moments(&mut taps, moments);
            levels.push(FilterLevel { j, taps, offset: 0 });

            if j < j_levels {
                for (kk, p) in product.iter_mut().enumerate() {
                    let lam = 2.0 * std::f64::consts::PI * kk as f64 / n_grid as f64;
                    *p *= dft_filter(lowpass, 0, scale * lam);
                }
            }
        }

        let m = vanishing_moments(&levels[0].taps, 0)?;
        Ok(FilterBank {
            levels,
            m,
            alpha,
            k: 0,
            mra_pair: Some((lowpass.to_vec(), highpass)),
        })
    }

    /// Built-in family with its declared alpha.
    pub fn builtin(family: Family, j_levels: u32) -> Result<Self> {
        Self::build_mra_with_alpha(&family.lowpass(), j_levels, family.alpha())
    }

    /// Bank from explicit per-level taps (no cascade structure assumed).
    pub fn from_levels(levels: Vec<FilterLevel>, m: u32, alpha: f64, k: u32) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::FilterConstruction("no levels".into()));
        }
        let bank = FilterBank {
            levels,
            m,
            alpha,
            k,
            mra_pair: None,
        };
        bank.validate_k(k)?;
        Ok(bank)
    }

    /// Set the difference order K used by the h^{(K)} coefficient route.
    pub fn with_k(mut self, k: u32) -> Result<Self> {
        self.validate_k(k)?;
        for lvl in &self.levels {
            factor_k(&lvl.taps, lvl.offset, k)?;
        }
        self.k = k;
        Ok(self)
    }

    fn validate_k(&self, k: u32) -> Result<()> {
        if k > self.m {
            return Err(Error::Precondition(format!(
                "K = {k} exceeds the bank's vanishing moments M = {} (M >= K required)",
                self.m
            )));
        }
        Ok(())
    }

    pub fn j_max(&self) -> u32 {
        self.levels.last().map(|l| l.j).unwrap_or(0)
    }

    pub fn gamma(&self, j: u32) -> f64 {
        (1u64 << j) as f64
    }

    pub fn level(&self, j: u32) -> Result<&FilterLevel> {
        self.levels
            .iter()
            .find(|l| l.j == j)
            .ok_or_else(|| Error::Precondition(format!("level {j} not in bank")))
    }

    pub fn is_mra(&self) -> bool {
        self.mra_pair.is_some()
    }

    /// Rescaled top-level transfer: gamma_J^{-1/2} h^_J(lambda / gamma_J).
    pub fn limit_transfer(&self, lambda: f64) -> Complex64 {
        let top = self.levels.last().expect("bank has levels");
        let gamma = self.gamma(top.j);
        top.transfer(lambda / gamma) / gamma.sqrt()
    }

    /// Closed-form limit transfer via the truncated infinite cascade product,
    /// available for cascade-built banks.
    pub fn cascade_limit_transfer(&self, lambda: f64) -> Option<Complex64> {
        self.mra_pair
            .as_ref()
            .map(|(g, h)| cascade_psi_hat(g, h, lambda))
    }

    /// Evaluator for h^_infinity handed to the limit-covariance machinery.
    pub fn hinf(&self) -> HinfEvaluator {
        match &self.mra_pair {
            Some((g, h)) => {
                let (factored, _) =
                    factor_k(h, 0, self.m).expect("mirror filter factors by construction");
                HinfEvaluator::Cascade {
                    lowpass: g.clone(),
                    factored,
                    m: self.m,
                }
            }
            None => {
                let top = self.levels.last().expect("bank has levels");
                let (factored, offset) = factor_k(&top.taps, top.offset, self.m)
                    .expect("bank levels carry M vanishing moments");
                HinfEvaluator::Rescaled {
                    factored,
                    offset,
                    m: self.m,
                    gamma: self.gamma(top.j),
                }
            }
        }
    }

    /// Sup over j <= J and a frequency grid of
    /// |h^_j(lambda)| (1 + gamma_j |lambda|)^{M+alpha} / (gamma_j^{1/2} |gamma_j lambda|^M).
    pub fn check_uniform_smoothness(&self) -> f64 {
        let grid = smoothness_grid();
        self.smoothness_constant_on(&grid, self.levels.len())
    }

    fn smoothness_constant_on(&self, grid: &[f64], levels: usize) -> f64 {
        let mut c_hat = 0.0f64;
        for lvl in self.levels.iter().take(levels) {
            let gamma = self.gamma(lvl.j);
            for &lam in grid {
                let h = lvl.transfer(lam).norm();
                let gl = gamma * lam;
                let ratio = h * (1.0 + gl).powf(self.m as f64 + self.alpha)
                    / (gamma.sqrt() * gl.powi(self.m as i32));
                c_hat = c_hat.max(ratio);
            }
        }
        c_hat
    }

    /// Growth of the smoothness constant from J-1 to J levels; a stable bound
    /// means the declared alpha is adequate.
    pub fn smoothness_growth(&self) -> (f64, f64) {
        let grid = smoothness_grid();
        let with_all = self.smoothness_constant_on(&grid, self.levels.len());
        let without_top = self.smoothness_constant_on(&grid, self.levels.len() - 1);
        (with_all, with_all / without_top)
    }

    /// Sup difference between the rescaled top level and the truncated cascade
    /// product over |lambda| <= 32, with a convergence warning above 1e-2.
    pub fn limit_transfer_agreement(&self) -> Option<(f64, bool)> {
        self.mra_pair.as_ref()?;
        let mut sup = 0.0f64;
        let mut lam = -32.0f64;
        while lam <= 32.0 {
            if lam.abs() > 1e-9 {
                let a = self.limit_transfer(lam);
                let b = self.cascade_limit_transfer(lam).unwrap();
                sup = sup.max((a - b).norm());
            }
            lam += 0.11;
        }
        Some((sup, sup > LIMIT_AGREEMENT_WARN))
    }

    /// Plain-text bank format: `K M alpha J` header, `gamma_rule=pow2`, then
    /// one `j offset tap tap ...` line per level.
    pub fn write_text<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "{} {} {} {}",
            self.k,
            self.m,
            self.alpha,
            self.levels.len()
        )?;
        writeln!(w, "gamma_rule=pow2")?;
        for lvl in &self.levels {
            write!(w, "{} {}", lvl.j, lvl.offset)?;
            for t in &lvl.taps {
                write!(w, " {t}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::FilterConstruction("empty filter file".into()))??;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(Error::FilterConstruction(
                "header must be `K M alpha J`".into(),
            ));
        }
        let k: u32 = parse_field(fields[0], "K")?;
        let m: u32 = parse_field(fields[1], "M")?;
        let alpha: f64 = parse_field(fields[2], "alpha")?;
        let j_levels: usize = parse_field(fields[3], "J")?;
        let rule = lines
            .next()
            .ok_or_else(|| Error::FilterConstruction("missing gamma rule line".into()))??;
        if rule.trim() != "gamma_rule=pow2" {
            return Err(Error::FilterConstruction(format!(
                "unsupported gamma rule '{rule}'"
            )));
        }
        let mut levels = Vec::with_capacity(j_levels);
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut it = line.split_whitespace();
            let j: u32 = parse_field(it.next().unwrap_or(""), "level index")?;
            let offset: i64 = parse_field(it.next().unwrap_or(""), "offset")?;
            let taps: Vec<f64> = it
                .map(|t| parse_field(t, "tap"))
                .collect::<Result<Vec<f64>>>()?;
            if taps.is_empty() {
                return Err(Error::FilterConstruction(format!("level {j} has no taps")));
            }
            levels.push(FilterLevel { j, taps, offset });
        }
        if levels.len() != j_levels {
            return Err(Error::FilterConstruction(format!(
                "header declares {j_levels} levels, file has {}",
                levels.len()
            )));
        }
        FilterBank::from_levels(levels, m, alpha, k)
    }

    /// CSV of |h^_j| on a frequency grid, rows `j,lambda,abs_h`.
    pub fn transfer_csv<W: Write>(&self, points: usize, mut w: W) -> std::io::Result<()> {
        writeln!(w, "j,lambda,abs_h")?;
        for lvl in &self.levels {
            for i in 0..points {
                let lam = std::f64::consts::PI * (i as f64 + 0.5) / points as f64;
                writeln!(w, "{},{},{}", lvl.j, lam, lvl.transfer(lam).norm())?;
            }
        }
        Ok(())
    }
}

fn parse_field<T: std::str::FromStr>(s: &str, what: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::FilterConstruction(format!("cannot parse {what} from '{s}'")))
}

/// Minimally perturb the taps so that the moments 0..m vanish exactly,
/// spreading the correction over m anchor positions. Skipped when the
/// required perturbation is not tiny (taps genuinely lack the moments).
fn zero_moments(taps: &mut [f64], m: u32) {
    let m = m as usize;
    let n = taps.len();
    if m == 0 || n <= m {
        return;
    }
    let center = (n as f64 - 1.0) / 2.0;
    let scale = center.max(1.0);
    let coord = |i: usize| (i as f64 - center) / scale;

    let mut mu = vec![0.0f64; m];
    for (i, &t) in taps.iter().enumerate() {
        let mut p = 1.0;
        for item in mu.iter_mut() {
            *item += t * p;
            p *= coord(i);
        }
    }
    let positions: Vec<usize> = (0..m)
        .map(|k| if m == 1 { 0 } else { k * (n - 1) / (m - 1) })
        .collect();
    // solve V c = mu with V[r][k] = coord(pos_k)^r by Gaussian elimination
    let mut a = vec![vec![0.0f64; m + 1]; m];
    for (r, row) in a.iter_mut().enumerate() {
        for (k, &pos) in positions.iter().enumerate() {
            row[k] = coord(pos).powi(r as i32);
        }
        row[m] = mu[r];
    }
    for col in 0..m {
        let pivot = (col..m).max_by(|&x, &y| {
            a[x][col].abs().partial_cmp(&a[y][col].abs()).unwrap()
        });
        let pivot = pivot.unwrap();
        a.swap(col, pivot);
        if a[col][col].abs() < 1e-300 {
            return;
        }
        let pivot_row = a[col].clone();
        for (r, row) in a.iter_mut().enumerate() {
            if r != col {
                let f = row[col] / pivot_row[col];
                for (c, &pv) in pivot_row.iter().enumerate().skip(col) {
                    row[c] -= f * pv;
                }
            }
        }
    }
    let max_tap = taps.iter().fold(0.0f64, |mm, t| mm.max(t.abs()));
    let corrections: Vec<f64> = (0..m).map(|k| a[k][m] / a[k][k]).collect();
    if corrections.iter().any(|c| c.abs() > 1e-6 * max_tap) {
        return;
    }
    for (k, &pos) in positions.iter().enumerate() {
        taps[pos] -= corrections[k];
    }
}

fn smoothness_grid() -> Vec<f64> {
    let mut grid = Vec::with_capacity(460);
    // logarithmic sweep into the origin plus a linear sweep to pi
    for i in 0..260 {
        grid.push(1e-6 * (std::f64::consts::PI / 1e-6).powf(i as f64 / 259.0));
    }
    for i in 1..200 {
        grid.push(std::f64::consts::PI * i as f64 / 200.0);
    }
    grid
}

/// psi^(lambda) = [h^(lambda/2)/sqrt(2)] prod_{m=2}^{25} [g^(lambda/2^m)/sqrt(2)],
/// the infinite-product limit of the rescaled cascade.
pub fn cascade_psi_hat(lowpass: &[f64], highpass: &[f64], lambda: f64) -> Complex64 {
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    let mut acc = dft_filter(highpass, 0, 0.5 * lambda) * inv_sqrt2;
    let mut scale = 0.25 * lambda;
    for _ in 2..=CASCADE_FACTORS {
        acc *= dft_filter(lowpass, 0, scale) * inv_sqrt2;
        scale *= 0.5;
    }
    acc
}

/// 1 - e^{-i mu} without cancellation: 2 sin^2(mu/2) + i sin(mu).
fn one_minus_exp(mu: f64) -> Complex64 {
    let s = (0.5 * mu).sin();
    Complex64::new(2.0 * s * s, mu.sin())
}

/// Evaluator for the limit transfer function h^_infinity.
///
/// The high-pass transfer is kept in the factored form
/// (1 - e^{-i mu})^M h^{(M)}^(mu): the plain tap sum cancels catastrophically
/// near the origin, where the singular quadrature weights would amplify the
/// noise floor.
#[derive(Debug, Clone)]
pub enum HinfEvaluator {
    /// Truncated infinite product of a conjugate-mirror cascade.
    Cascade {
        lowpass: Vec<f64>,
        /// h^{(M)} taps of the generating high-pass filter.
        factored: Vec<f64>,
        m: u32,
    },
    /// Rescaled top level of an arbitrary bank.
    Rescaled {
        /// h_J^{(M)} taps of the top level.
        factored: Vec<f64>,
        offset: i64,
        m: u32,
        gamma: f64,
    },
}

impl HinfEvaluator {
    pub fn eval(&self, lambda: f64) -> Complex64 {
        match self {
            HinfEvaluator::Cascade {
                lowpass,
                factored,
                m,
            } => {
                let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
                let mu = 0.5 * lambda;
                let mut acc = one_minus_exp(mu).powi(*m as i32)
                    * dft_filter(factored, 0, mu)
                    * inv_sqrt2;
                let mut scale = 0.25 * lambda;
                for _ in 2..=CASCADE_FACTORS {
                    acc *= dft_filter(lowpass, 0, scale) * inv_sqrt2;
                    scale *= 0.5;
                }
                acc
            }
            HinfEvaluator::Rescaled {
                factored,
                offset,
                m,
                gamma,
            } => {
                let mu = lambda / gamma;
                one_minus_exp(mu).powi(*m as i32) * dft_filter(factored, *offset, mu)
                    / gamma.sqrt()
            }
        }
    }

    /// Bound on the effective time support, used to size oscillation-resolving
    /// quadrature panels.
    pub fn time_extent(&self) -> f64 {
        match self {
            HinfEvaluator::Cascade { lowpass, .. } => lowpass.len() as f64,
            HinfEvaluator::Rescaled {
                factored, gamma, m, ..
            } => (factored.len() as f64 + *m as f64) / gamma + 1.0,
        }
    }
}
