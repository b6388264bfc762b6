//! Spectral densities of the Gaussian input and its Hermite transforms:
//! evaluation, autocovariance, periodic self-convolution, and the
//! long/short-memory classification.
//!
//! The input density is f(lambda) = |1 - e^{-i lambda}|^{-2d} fstar(lambda) on
//! (-pi, pi], with memory parameter d and a bounded factor fstar that is
//! continuous and positive at the origin. The Hermite transform of order q has
//! density q! f^{(*q)} (q-fold periodic self-convolution), long-memory with
//! parameter d(q) = qd + (1-q)/2 when q <= q_c and short-memory above the
//! critical order q_c = max{q : q < 1/(1-2d)}.

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::FftPlanner;
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::quad::gauss_legendre;

/// Default uniform grid size for convolutions.
pub const DEFAULT_GRID: usize = 1 << 16;
/// The pole window is +-POLE_STEPS grid steps around lambda = 0.
pub const POLE_STEPS: usize = 10;
/// Grid cells within this many steps of the origin are reported via the fitted
/// power law rather than the raw discrete convolution.
pub const REPAIR_STEPS: usize = 4;
/// Tolerance on |r(0) - 1| before a model is flagged as non-normalized.
pub const NORMALIZATION_TOL: f64 = 1e-4;

/// The short-memory factor fstar of the spectral density.
#[derive(Clone)]
pub enum FStar {
    /// Constant value (FARIMA(0,d,0)-type models).
    Const(f64),
    /// Arbitrary bounded evaluator on (-pi, pi].
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl FStar {
    pub fn eval(&self, lambda: f64) -> f64 {
        match self {
            FStar::Const(c) => *c,
            FStar::Custom(f) => f(lambda),
        }
    }
}

impl fmt::Debug for FStar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FStar::Const(c) => write!(f, "FStar::Const({c})"),
            FStar::Custom(_) => write!(f, "FStar::Custom(..)"),
        }
    }
}

/// Memory model: the memory parameter d and the short-memory factor fstar.
#[derive(Debug, Clone)]
pub struct MemoryModel {
    d: f64,
    fstar: FStar,
    fstar_zero: f64,
    n_grid: usize,
}

/// Autocovariance sequence with a normalization diagnostic.
#[derive(Debug, Clone)]
pub struct Autocovariance {
    /// r(0), r(1), ..., r(n_max).
    pub r: Vec<f64>,
    /// False when |r(0) - 1| exceeds the tolerance; values are still valid.
    pub normalized: bool,
}

impl MemoryModel {
    /// Build a model, validating the invariants numerically.
    ///
    /// d = 0 is admitted as the degenerate white-noise edge even though the
    /// long-memory statements require d > 0; the chaos-order operations reject
    /// d = 0 themselves.
    pub fn new(d: f64, fstar: FStar, n_grid: usize) -> Result<Self> {
        if !(0.0..0.5).contains(&d) {
            return Err(Error::Domain(format!(
                "memory parameter must satisfy 0 <= d < 1/2, got {d}"
            )));
        }
        if !n_grid.is_power_of_two() || n_grid < (1 << 10) {
            return Err(Error::Domain(format!(
                "grid size must be a power of two >= 2^10, got {n_grid}"
            )));
        }
        let fstar_zero = fstar.eval(0.0);
        if !fstar_zero.is_finite() || fstar_zero <= 0.0 {
            return Err(Error::Domain(format!(
                "fstar must be positive and finite at 0, got {fstar_zero}"
            )));
        }
        // continuity at 0 on a refinement sequence, and boundedness/non-negativity
        for k in 1..=20 {
            let lam = PI * 0.5f64.powi(k);
            let v = fstar.eval(lam);
            let vm = fstar.eval(-lam);
            if !v.is_finite() || !vm.is_finite() || v < 0.0 || vm < 0.0 {
                return Err(Error::Domain(
                    "fstar must be finite and non-negative near 0".into(),
                ));
            }
            if k >= 18
                && ((v - fstar_zero).abs() > 1e-3 * fstar_zero.abs().max(1e-300)
                    || (vm - fstar_zero).abs() > 1e-3 * fstar_zero.abs().max(1e-300))
            {
                return Err(Error::Domain(
                    "fstar does not approach fstar(0) on the refinement sequence".into(),
                ));
            }
        }
        let step = 2.0 * PI / n_grid as f64;
        for i in 0..n_grid {
            let lam = -PI + step * i as f64;
            let v = fstar.eval(lam);
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Domain(format!(
                    "fstar must be bounded and non-negative on the grid; offending lambda = {lam}"
                )));
            }
        }
        Ok(MemoryModel {
            d,
            fstar,
            fstar_zero,
            n_grid,
        })
    }

    /// FARIMA(0,d,0)-type model with constant fstar fixed so that r(0) = 1.
    ///
    /// With fstar = 1/(2 pi) the lag-0 covariance is Gamma(1-2d)/Gamma(1-d)^2,
    /// so the normalizing constant is Gamma(1-d)^2 / (2 pi Gamma(1-2d)).
    pub fn farima(d: f64) -> Result<Self> {
        if !(0.0..0.5).contains(&d) {
            return Err(Error::Domain(format!(
                "memory parameter must satisfy 0 <= d < 1/2, got {d}"
            )));
        }
        let c = if d == 0.0 {
            1.0 / (2.0 * PI)
        } else {
            gamma(1.0 - d).powi(2) / (2.0 * PI * gamma(1.0 - 2.0 * d))
        };
        Self::new(d, FStar::Const(c), DEFAULT_GRID)
    }

    /// White noise: d = 0 and fstar = 1/(2 pi).
    pub fn white() -> Self {
        Self::farima(0.0).expect("white noise model is always valid")
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn fstar_at(&self, lambda: f64) -> f64 {
        self.fstar.eval(lambda)
    }

    pub fn fstar_zero(&self) -> f64 {
        self.fstar_zero
    }

    pub fn n_grid(&self) -> usize {
        self.n_grid
    }

    pub fn fstar(&self) -> &FStar {
        &self.fstar
    }

    /// Spectral density f(lambda) = |1 - e^{-i lambda}|^{-2d} fstar(lambda),
    /// extended 2 pi-periodically. The pole at lambda = 0 is a domain error.
    pub fn eval_f(&self, lambda: f64) -> Result<f64> {
        let lam = wrap_to_pi(lambda);
        if lam == 0.0 {
            return Err(Error::Domain(
                "spectral density has a pole at lambda = 0".into(),
            ));
        }
        Ok(self.eval_f_unchecked(lam))
    }

    /// Integral of f over (-pi, pi] by the pole-split quadrature.
    pub fn normalization_integral(&self) -> f64 {
        let auto = self.autocovariance(0);
        auto.r[0]
    }

    /// True when the model integrates to 1 within tolerance.
    pub fn is_normalized(&self) -> bool {
        (self.normalization_integral() - 1.0).abs() <= NORMALIZATION_TOL
    }

    /// Autocovariance r(n) = integral over (-pi,pi] of e^{i n lambda} f(lambda)
    /// for n = 0..=n_max, by singularity-aware quadrature: the window
    /// (-eps, eps), eps = 10 grid steps, is integrated analytically against the
    /// local power law fstar(0) |lambda|^{-2d}; the rest by trapezoid on the
    /// grid, all lags at once through one FFT.
    pub fn autocovariance(&self, n_max: usize) -> Autocovariance {
        // enlarge the grid so that requested lags stay far from Nyquist
        let mut n = self.n_grid;
        while n < 16 * (n_max + 1) {
            n *= 2;
        }
        let step = 2.0 * PI / n as f64;
        let eps = POLE_STEPS as f64 * step;
        let half = n / 2;

        // windowed trapezoid via FFT
        let mut buf: Vec<Complex64> = (0..n)
            .map(|i| {
                let dist = (i as isize - half as isize).unsigned_abs();
                if dist < POLE_STEPS {
                    Complex64::new(0.0, 0.0)
                } else {
                    let lam = -PI + step * i as f64;
                    let w = if dist == POLE_STEPS { 0.5 } else { 1.0 };
                    Complex64::new(w * self.eval_f_unchecked(lam), 0.0)
                }
            })
            .collect();
        let mut planner = FftPlanner::new();
        planner.plan_fft_forward(n).process(&mut buf);

        // Euler-Maclaurin boundary terms at the window edges +-eps; without them
        // the trapezoid loses ~1e-5 for d near 1/2.
        let f_eps = self.eval_f_unchecked(eps);
        let df_eps = (self.eval_f_unchecked(eps + 0.25 * step)
            - self.eval_f_unchecked(eps - 0.25 * step))
            / (0.5 * step);

        let c0 = self.fstar_zero;
        let r: Vec<f64> = (0..=n_max)
            .map(|lag| {
                let sign = if lag % 2 == 0 { 1.0 } else { -1.0 };
                let trap = step * sign * buf[lag].re;
                let nf = lag as f64;
                let edge = step * step / 12.0
                    * (2.0 * df_eps * (nf * eps).cos() - 2.0 * nf * f_eps * (nf * eps).sin());
                let pole = 2.0 * c0 * pole_cos_integral(self.d, eps, nf);
                trap + edge + pole
            })
            .collect();
        let normalized = (r[0] - 1.0).abs() <= NORMALIZATION_TOL;
        Autocovariance { r, normalized }
    }

    fn eval_f_unchecked(&self, lambda: f64) -> f64 {
        let modulus = 2.0 * (0.5 * lambda).sin().abs();
        modulus.powf(-2.0 * self.d) * self.fstar.eval(lambda)
    }

    /// Sample f on the uniform grid, with cells inside the repair window
    /// replaced by cell averages of the local power law fstar(0)|lambda|^{-2d}
    /// so that discrete convolutions carry the correct singular mass.
    pub fn f_grid(&self) -> PeriodicGrid {
        self.f_grid_sized(self.n_grid)
    }

    pub fn f_grid_sized(&self, n: usize) -> PeriodicGrid {
        let step = 2.0 * PI / n as f64;
        let half = n / 2;
        let beta = 2.0 * self.d;
        let values: Vec<f64> = (0..n)
            .map(|i| {
                let dist = (i as isize - half as isize).unsigned_abs();
                if dist < REPAIR_STEPS && beta > 0.0 {
                    let lam_c = -PI + step * i as f64;
                    self.fstar_zero * power_law_cell_average(lam_c, step, beta)
                } else if dist == 0 {
                    // d = 0: no pole
                    self.fstar_zero
                } else {
                    let lam = -PI + step * i as f64;
                    self.eval_f_unchecked(lam)
                }
            })
            .collect();
        PeriodicGrid {
            values,
            singular_exponent: if beta > 0.0 { Some(beta) } else { None },
        }
    }

    /// q-fold self-convolution f^{(*q)} (without the q! factor), with the
    /// singular layer refreshed after every convolution from the fitted power
    /// law of exponent max(2 d(k), 0).
    pub fn self_convolve(&self, q: usize) -> Result<PeriodicGrid> {
        if q < 1 {
            return Err(Error::Precondition(
                "self-convolution order must be >= 1".into(),
            ));
        }
        let base = self.f_grid();
        let mut acc = base.clone();
        for k in 2..=q {
            acc = periodic_convolve(&acc, &base)?;
            let beta = (2.0 * memory_param(self.d, k as u32)).max(0.0);
            repair_singular_layer(&mut acc, beta);
            acc.singular_exponent = if beta > 0.0 { Some(beta) } else { None };
        }
        Ok(acc)
    }
}

fn wrap_to_pi(lambda: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut lam = lambda % two_pi;
    if lam > PI {
        lam -= two_pi;
    } else if lam <= -PI {
        lam += two_pi;
    }
    lam
}

/// integral over the cell [lam_c - step/2, lam_c + step/2] of |lambda|^{-beta},
/// divided by the cell width.
fn power_law_cell_average(lam_c: f64, step: f64, beta: f64) -> f64 {
    let h = 0.5 * step;
    let one_m = 1.0 - beta;
    let anti = |x: f64| x.abs().powf(one_m) / one_m * x.signum();
    (anti(lam_c + h) - anti(lam_c - h)) / step
}

/// integral of lambda^{-2d} cos(n lambda) over [0, eps].
///
/// The alternating series in (n eps)^2 is used while it is well conditioned;
/// beyond that the oscillatory remainder is integrated by short Gauss panels.
fn pole_cos_integral(d: f64, eps: f64, n: f64) -> f64 {
    let beta = 2.0 * d;
    if beta == 0.0 {
        return if n == 0.0 { eps } else { (n * eps).sin() / n };
    }
    let x = n * eps;
    if x <= 12.0 {
        pole_series(beta, eps, n)
    } else {
        let s0 = 12.0 / n;
        let head = pole_series(beta, s0, n);
        // [s0, eps] with panels resolving the cosine
        let rule = gauss_legendre(8);
        let panels = ((eps - s0) * n / 3.0).ceil() as usize;
        let width = (eps - s0) / panels as f64;
        let mut tail = 0.0;
        for i in 0..panels {
            let a = s0 + i as f64 * width;
            let b = a + width;
            let mid = 0.5 * (a + b);
            let hw = 0.5 * (b - a);
            for (&t, &w) in rule.nodes.iter().zip(&rule.weights) {
                let lam: f64 = mid + hw * t;
                tail += w * hw * lam.powf(-beta) * (n * lam).cos();
            }
        }
        head + tail
    }
}

fn pole_series(beta: f64, eps: f64, n: f64) -> f64 {
    let x2 = (n * eps) * (n * eps);
    let mut term = 1.0f64; // (n eps)^{2k} / (2k)!
    let mut sum = term / (1.0 - beta);
    for k in 1..200 {
        let two_k = 2.0 * k as f64;
        term *= -x2 / ((two_k - 1.0) * two_k);
        let contrib = term / (two_k + 1.0 - beta);
        sum += contrib;
        if contrib.abs() < 1e-18 * sum.abs().max(1e-300) {
            break;
        }
    }
    eps.powf(1.0 - beta) * sum
}

/// Uniform sampling of a (2 pi)-periodic function at lambda_i = -pi + 2 pi i / n.
#[derive(Debug, Clone)]
pub struct PeriodicGrid {
    /// Values at lambda_i for i = 0..n, i.e. on [-pi, pi).
    pub values: Vec<f64>,
    /// Known |lambda|^{-beta} singularity at the origin, when present.
    pub singular_exponent: Option<f64>,
}

impl PeriodicGrid {
    pub fn new(values: Vec<f64>, singular_exponent: Option<f64>) -> Result<Self> {
        if values.len() < 2 || !values.len().is_multiple_of(2) {
            return Err(Error::Domain(format!(
                "grid length must be even and >= 2, got {}",
                values.len()
            )));
        }
        Ok(PeriodicGrid {
            values,
            singular_exponent,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn step(&self) -> f64 {
        2.0 * PI / self.len() as f64
    }

    /// Grid abscissa of index i (internal storage covers [-pi, pi)).
    pub fn lambda(&self, i: usize) -> f64 {
        -PI + self.step() * i as f64
    }

    /// Value at the grid point nearest to lambda.
    pub fn value_at(&self, lambda: f64) -> f64 {
        let n = self.len();
        let lam = wrap_to_pi(lambda);
        let i = ((lam + PI) / self.step()).round() as usize % n;
        self.values[i]
    }

    /// CSV serialization with header `lambda,value`, rows ordered over (-pi, pi];
    /// the sample stored at -pi is emitted as lambda = pi.
    pub fn to_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "lambda,value")?;
        let n = self.len();
        for i in 1..n {
            writeln!(w, "{},{}", self.lambda(i), self.values[i])?;
        }
        writeln!(w, "{},{}", PI, self.values[0])?;
        Ok(())
    }
}

/// Periodic convolution (g1 * g2)(lambda) = integral of g1(u) g2(lambda - u) du
/// over (-pi, pi], computed as the discrete circular convolution scaled by the
/// grid step.
pub fn periodic_convolve(g1: &PeriodicGrid, g2: &PeriodicGrid) -> Result<PeriodicGrid> {
    let n = g1.len();
    if g2.len() != n {
        return Err(Error::GridMismatch {
            left: n,
            right: g2.len(),
        });
    }
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(n);
    let ifft = planner.plan_fft_inverse(n);

    let mut a: Vec<Complex64> = g1.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    // rotate g2 by half a period so index arithmetic matches the [-pi, pi) layout
    let half = n / 2;
    let mut b: Vec<Complex64> = (0..n)
        .map(|i| Complex64::new(g2.values[(i + half) % n], 0.0))
        .collect();
    fft.process(&mut a);
    fft.process(&mut b);
    for (x, y) in a.iter_mut().zip(&b) {
        *x *= y;
    }
    ifft.process(&mut a);
    let scale = 2.0 * PI / (n as f64 * n as f64);
    let values: Vec<f64> = a.iter().map(|z| z.re * scale).collect();
    Ok(PeriodicGrid {
        values,
        singular_exponent: None,
    })
}

/// Overwrite the cells within REPAIR_STEPS of the origin with cell averages of
/// the power law fitted on the ring 4..=64 steps out.
fn repair_singular_layer(grid: &mut PeriodicGrid, beta: f64) {
    let n = grid.len();
    let half = n / 2;
    let step = grid.step();

    // fit the constant in c |lambda|^{-beta} on the ring
    let mut c_sum = 0.0;
    let mut count = 0usize;
    for k in REPAIR_STEPS..=(16 * REPAIR_STEPS) {
        for idx in [half + k, half - k] {
            let lam = -PI + step * idx as f64;
            c_sum += grid.values[idx] * lam.abs().powf(beta);
            count += 1;
        }
    }
    let c = c_sum / count as f64;

    for k in 0..REPAIR_STEPS {
        for idx in [half + k, half - k] {
            let lam_c = -PI + step * idx as f64;
            grid.values[idx] = if beta > 0.0 {
                c * power_law_cell_average(lam_c, step, beta)
            } else {
                c
            };
        }
    }
}

/// Critical order q_c = max{q in N : q < 1/(1-2d)}; chaos orders q <= q_c keep
/// long memory, orders above it are short-memory.
pub fn critical_order(d: f64) -> Result<u32> {
    if !(0.0 < d && d < 0.5) {
        return Err(Error::Domain(format!(
            "critical order requires 0 < d < 1/2, got {d}"
        )));
    }
    let x = 1.0 / (1.0 - 2.0 * d);
    let rounded = x.round();
    let qc = if (x - rounded).abs() < 1e-9 {
        // boundary: the inequality is strict
        rounded as u32 - 1
    } else {
        x.floor() as u32
    };
    Ok(qc.max(1))
}

/// Memory parameter of the q-th Hermite transform: d(q) = q d + (1-q)/2.
pub fn memory_param(d: f64, q: u32) -> f64 {
    q as f64 * d + (1.0 - q as f64) / 2.0
}

/// FARIMA(0,d,0) autocorrelations rho(0..=n_max):
/// rho(k) = rho(k-1) (k-1+d)/(k-d), rho(0) = 1.
pub fn farima_rho(d: f64, n_max: usize) -> Vec<f64> {
    let mut rho = Vec::with_capacity(n_max + 1);
    rho.push(1.0);
    for k in 1..=n_max {
        let kf = k as f64;
        let prev = rho[k - 1];
        rho.push(prev * (kf - 1.0 + d) / (kf - d));
    }
    rho
}

/// integral over (-pi, pi] of e^{i n lambda} |1 - e^{-i lambda}|^{-2d} d lambda,
/// in closed form: 2 pi Gamma(1-2d)/Gamma(1-d)^2 rho_d(n).
pub fn fractional_kernel_cov(d: f64, n_max: usize) -> Vec<f64> {
    if d == 0.0 {
        let mut v = vec![0.0; n_max + 1];
        v[0] = 2.0 * PI;
        return v;
    }
    let r0 = 2.0 * PI * gamma(1.0 - 2.0 * d) / gamma(1.0 - d).powi(2);
    farima_rho(d, n_max).into_iter().map(|x| r0 * x).collect()
}
