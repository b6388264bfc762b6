//! Hermite polynomial algebra: chaos coefficients of a nonlinear filter,
//! Hermite rank detection, and subordination of series.
//!
//! Probabilists' convention throughout: H_0 = 1, H_1 = x, H_2 = x^2 - 1, with
//! the recurrence H_{q+1}(x) = x H_q(x) - q H_{q-1}(x) and orthogonality
//! E[H_q(X) H_q'(X)] = q! delta_{q,q'} under the standard normal law.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::quad::gauss_hermite_prob;

/// Default number of Gauss-Hermite nodes for coefficient extraction.
pub const DEFAULT_NODES: usize = 200;
/// Default truncation order of chaos expansions.
pub const DEFAULT_ORDER: usize = 25;
/// Coefficients below this fraction of the largest one are snapped to zero
/// when determining the rank.
pub const RANK_SNAP: f64 = 1e-10;

/// Evaluate the probabilists' Hermite polynomial H_q at x.
pub fn hermite_eval(q: usize, x: f64) -> f64 {
    match q {
        0 => 1.0,
        1 => x,
        _ => {
            let mut prev = 1.0; // H_0
            let mut cur = x; // H_1
            for k in 1..q {
                let next = x * cur - k as f64 * prev;
                prev = cur;
                cur = next;
            }
            cur
        }
    }
}

fn factorial(q: usize) -> f64 {
    (1..=q).map(|k| k as f64).product()
}

/// Chaos expansion of a centered square-integrable filter G:
/// G(X) = sum_{q >= 1} (c_q / q!) H_q(X).
#[derive(Debug, Clone, Serialize)]
pub struct HermiteExpansion {
    /// Hermite rank: smallest q >= 1 with c_q != 0.
    pub rank: usize,
    /// Coefficients c_1 .. c_Q.
    pub coeffs: Vec<f64>,
    /// Sum of c_q^2 / q!, the L2 norm of G under the expansion.
    pub l2: f64,
    /// Mass c_Q^2 / Q! of the last retained term, reported for truncation control.
    #[serde(skip)]
    pub tail_mass: f64,
}

impl HermiteExpansion {
    /// Build an expansion from explicit coefficients c_1..c_Q.
    pub fn from_coeffs(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::DegenerateInput("empty coefficient list".into()));
        }
        let max = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        if max == 0.0 {
            return Err(Error::DegenerateInput("all chaos coefficients vanish".into()));
        }
        let rank = coeffs
            .iter()
            .position(|c| c.abs() > RANK_SNAP * max)
            .map(|i| i + 1)
            .unwrap();
        let big_q = coeffs.len();
        let l2 = coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c * c / factorial(i + 1))
            .sum();
        let tail_mass = coeffs[big_q - 1].powi(2) / factorial(big_q);
        Ok(HermiteExpansion {
            rank,
            coeffs,
            l2,
            tail_mass,
        })
    }

    /// c_q for 1 <= q <= Q (zero beyond the truncation).
    pub fn coeff(&self, q: usize) -> f64 {
        if q >= 1 && q <= self.coeffs.len() {
            self.coeffs[q - 1]
        } else {
            0.0
        }
    }

    /// Evaluate the truncated chaos sum sum_{q<=Q} (c_q/q!) H_q(x).
    pub fn eval(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        let mut fact = 1.0;
        let mut h_prev = 1.0; // H_0
        let mut h_cur = x; // H_1
        for (i, &c) in self.coeffs.iter().enumerate() {
            let q = i + 1;
            fact *= q as f64;
            acc += c / fact * h_cur;
            let h_next = x * h_cur - q as f64 * h_prev;
            h_prev = h_cur;
            h_cur = h_next;
        }
        acc
    }

    /// JSON document per the exchange format: {"rank", "coeffs", "l2"}.
    pub fn to_json(&self) -> String {
        serde_json::json!({
            "rank": self.rank,
            "coeffs": self.coeffs,
            "l2": self.l2,
        })
        .to_string()
    }
}

/// Compute chaos coefficients c_q = E[G(X) H_q(X)] for q = 1..=order by
/// Gauss-Hermite quadrature with the given number of nodes.
///
/// Fails if the filter is not centered (|c_0| beyond tolerance), reporting the
/// measured mean.
pub fn hermite_coeffs<G>(g: G, order: usize, nodes: usize) -> Result<HermiteExpansion>
where
    G: Fn(f64) -> f64,
{
    if order < 1 {
        return Err(Error::Precondition("expansion order must be >= 1".into()));
    }
    let rule = gauss_hermite_prob(nodes);
    let g_vals: Vec<f64> = rule.nodes.iter().map(|&x| g(x)).collect();

    let mut coeffs = Vec::with_capacity(order);
    let mut c0 = 0.0;
    let mut scale = 0.0f64;
    // evaluate all orders in one sweep of the recurrence per node
    let mut h_prev: Vec<f64> = vec![1.0; rule.nodes.len()];
    let mut h_cur: Vec<f64> = rule.nodes.clone();
    for (i, (&w, &gv)) in rule.weights.iter().zip(&g_vals).enumerate() {
        c0 += w * gv;
        scale = scale.max((w * gv).abs());
        let _ = i;
    }
    for q in 1..=order {
        let mut cq = 0.0;
        for ((&w, &gv), &h) in rule.weights.iter().zip(&g_vals).zip(&h_cur) {
            cq += w * gv * h;
        }
        coeffs.push(cq);
        for (j, &x) in rule.nodes.iter().enumerate() {
            let next = x * h_cur[j] - q as f64 * h_prev[j];
            h_prev[j] = h_cur[j];
            h_cur[j] = next;
        }
    }

    let max = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let tol = 1e-8 * max.max(1e-300);
    if c0.abs() > tol.max(1e-10) {
        return Err(Error::NotCentered {
            offset: c0,
            tol: tol.max(1e-10),
        });
    }
    let snapped: Vec<f64> = coeffs
        .iter()
        .map(|&c| if c.abs() < RANK_SNAP * max { 0.0 } else { c })
        .collect();
    HermiteExpansion::from_coeffs(snapped)
}

/// Built-in nonlinear filters G with E[G(X)] = 0 under the standard normal law.
#[derive(Debug, Clone)]
pub enum Filter {
    /// G(x) = x  (rank 1)
    Identity,
    /// G = H_q  (rank q)
    Hermite(usize),
    /// G(x) = x^3 = H_3 + 3 H_1  (rank 1)
    Cube,
    /// G(x) = e^x - e^{1/2}  (rank 1, c_q = e^{1/2} for all q)
    CenteredExp,
    /// Truncated chaos expansion.
    Expansion(HermiteExpansion),
}

impl Filter {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Filter::Identity => x,
            Filter::Hermite(q) => hermite_eval(*q, x),
            Filter::Cube => x * x * x,
            Filter::CenteredExp => x.exp() - 0.5f64.exp(),
            Filter::Expansion(e) => e.eval(x),
        }
    }

    /// Apply pointwise to a series.
    pub fn apply(&self, xs: &[f64]) -> Vec<f64> {
        xs.iter().map(|&x| self.eval(x)).collect()
    }

    /// Hermite rank of the filter.
    pub fn rank(&self) -> usize {
        match self {
            Filter::Identity | Filter::Cube | Filter::CenteredExp => 1,
            Filter::Hermite(q) => *q,
            Filter::Expansion(e) => e.rank,
        }
    }

    /// Chaos coefficient c_q of the filter.
    pub fn coeff(&self, q: usize) -> f64 {
        match self {
            Filter::Identity => {
                if q == 1 {
                    1.0
                } else {
                    0.0
                }
            }
            Filter::Hermite(q0) => {
                if q == *q0 {
                    factorial(*q0)
                } else {
                    0.0
                }
            }
            Filter::Cube => match q {
                1 => 3.0,
                3 => 6.0,
                _ => 0.0,
            },
            Filter::CenteredExp => {
                if q >= 1 {
                    0.5f64.exp()
                } else {
                    0.0
                }
            }
            Filter::Expansion(e) => e.coeff(q),
        }
    }
}

/// Subordinate a series: pointwise G(X_n).
pub fn subordinate(filter: &Filter, xs: &[f64]) -> Vec<f64> {
    filter.apply(xs)
}
