//! Long-range jump law `p(d) = β(d) / ‖d‖^{n+α}`.
//!
//! The default orientation is totally asymmetric: `β(d) = 1(d > 0)` where
//! `d > 0` means every coordinate is nonnegative and `d ≠ 0`. The half-space
//! family `β(d) = Σ_i [b_i⁺ 1(d_i ≥ 0) + b_i⁻ 1(d_i ≤ 0)] 1(d ≠ 0)` covers
//! symmetric and partially asymmetric variants.
//!
//! Displacements are enumerated up to Euclidean radius `d_max` and are NOT
//! renormalized; the dropped mass is reported through a rigorous
//! integral-comparison bound.

use rand::Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Orientation {
    #[default]
    TotallyAsymmetric,
    HalfSpaces { plus: Vec<f64>, minus: Vec<f64> },
}

impl Orientation {
    /// `β(d)` for a nonzero displacement.
    pub fn beta(&self, d: &[i32]) -> f64 {
        match self {
            Orientation::TotallyAsymmetric => d.iter().all(|&c| c >= 0) as u8 as f64,
            Orientation::HalfSpaces { plus, minus } => d
                .iter()
                .enumerate()
                .map(|(i, &c)| {
                    let mut b = 0.0;
                    if c >= 0 {
                        b += plus[i];
                    }
                    if c <= 0 {
                        b += minus[i];
                    }
                    b
                })
                .sum(),
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        if let Orientation::HalfSpaces { plus, minus } = self {
            if plus.len() != dim || minus.len() != dim {
                return Err(Error::domain("orientation weights need one entry per axis"));
            }
            if plus.iter().chain(minus).any(|&b| !(b >= 0.0) || !b.is_finite()) {
                return Err(Error::domain("orientation weights must be finite and nonnegative"));
            }
            if plus.iter().chain(minus).all(|&b| b == 0.0) {
                return Err(Error::domain("orientation weights are all zero"));
            }
        }
        Ok(())
    }
}

/// Truncated total jump rate with a bound on what the truncation dropped.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TotalRate {
    pub truncated: f64,
    pub tail_bound: f64,
}

#[derive(Clone, Debug)]
pub struct JumpKernel {
    dim: usize,
    alpha: f64,
    orientation: Orientation,
    d_max: u32,
    offsets: Vec<i32>,
    weights: Vec<f64>,
    alias: WeightedAliasIndex<f64>,
    truncated_total: f64,
    tail_bound: f64,
}

impl JumpKernel {
    pub fn new(dim: usize, alpha: f64, d_max: u32) -> Result<Self> {
        Self::with_orientation(dim, alpha, d_max, Orientation::TotallyAsymmetric)
    }

    pub fn with_orientation(
        dim: usize,
        alpha: f64,
        d_max: u32,
        orientation: Orientation,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::domain("dimension must be positive"));
        }
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::domain(format!("alpha = {alpha} must be positive")));
        }
        if d_max == 0 {
            return Err(Error::domain("d_max must be at least 1"));
        }
        orientation.validate(dim)?;
        let exponent = dim as f64 + alpha;
        let lo = match orientation {
            Orientation::TotallyAsymmetric => 0,
            Orientation::HalfSpaces { .. } => -(d_max as i32),
        };
        let r2_max = d_max as i64 * d_max as i64;
        let mut offsets = Vec::new();
        let mut weights = Vec::new();
        let mut d = vec![lo; dim];
        loop {
            let r2: i64 = d.iter().map(|&c| c as i64 * c as i64).sum();
            if r2 > 0 && r2 <= r2_max {
                let beta = orientation.beta(&d);
                if beta > 0.0 {
                    offsets.extend_from_slice(&d);
                    weights.push(beta * (r2 as f64).powf(-0.5 * exponent));
                }
            }
            // lexicographic odometer
            let mut axis = dim;
            loop {
                if axis == 0 {
                    break;
                }
                axis -= 1;
                if d[axis] < d_max as i32 {
                    d[axis] += 1;
                    for c in d.iter_mut().skip(axis + 1) {
                        *c = lo;
                    }
                    break;
                }
                if axis == 0 {
                    axis = usize::MAX;
                    break;
                }
            }
            if axis == usize::MAX {
                break;
            }
        }
        let truncated_total = weights.iter().sum();
        let alias = WeightedAliasIndex::new(weights.clone())
            .map_err(|e| Error::domain(format!("cannot build displacement sampler: {e}")))?;
        let beta_max = match &orientation {
            Orientation::TotallyAsymmetric => None,
            Orientation::HalfSpaces { plus, minus } => {
                Some(plus.iter().zip(minus).map(|(p, m)| p + m).sum::<f64>())
            }
        };
        let tail_bound = tail_bound(dim, exponent, d_max, beta_max);
        Ok(JumpKernel {
            dim,
            alpha,
            orientation,
            d_max,
            offsets,
            weights,
            alias,
            truncated_total,
            tail_bound,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn d_max(&self) -> u32 {
        self.d_max
    }

    pub fn orientation(&self) -> &Orientation {
        &self.orientation
    }

    /// Number of enumerated displacements.
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    #[inline]
    pub fn offset(&self, idx: usize) -> &[i32] {
        &self.offsets[idx * self.dim..(idx + 1) * self.dim]
    }

    #[inline]
    pub fn weight(&self, idx: usize) -> f64 {
        self.weights[idx]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `p(d)` for any displacement, enumerated or not.
    pub fn jump_rate(&self, d: &[i32]) -> Result<f64> {
        if d.len() != self.dim {
            return Err(Error::domain("displacement has the wrong dimension"));
        }
        let r2: i64 = d.iter().map(|&c| c as i64 * c as i64).sum();
        if r2 == 0 {
            return Err(Error::domain("p(0) is undefined"));
        }
        let beta = self.orientation.beta(d);
        if beta == 0.0 {
            return Ok(0.0);
        }
        Ok(beta * (r2 as f64).powf(-0.5 * (self.dim as f64 + self.alpha)))
    }

    /// `W = Σ_{‖d‖ ≤ d_max} p(d)` with a bound on `Σ_{‖d‖ > d_max} p(d)`.
    pub fn total_rate(&self) -> TotalRate {
        TotalRate {
            truncated: self.truncated_total,
            tail_bound: self.tail_bound,
        }
    }

    /// `Σ_{d>0} d₁/‖d‖^{n+α}`: the enumerated sum plus an integral tail
    /// correction (Euler–Maclaurin through the `f′` term when `n = 1`).
    pub fn gamma_alpha(&self) -> Result<f64> {
        if self.alpha <= 1.0 {
            return Err(Error::domain(format!(
                "gamma_alpha diverges for alpha = {} <= 1",
                self.alpha
            )));
        }
        Ok(self.drift()?[0])
    }

    /// Mean displacement `Σ_d d p(d)` including the tail correction; needs
    /// `α > 1`.
    pub fn drift(&self) -> Result<Vec<f64>> {
        if self.alpha <= 1.0 {
            return Err(Error::domain(format!(
                "the kernel has no mean for alpha = {} <= 1",
                self.alpha
            )));
        }
        let mut drift = self.mean_displacement();
        let tail = self.drift_tail();
        let (plus, minus): (Vec<f64>, Vec<f64>) = match &self.orientation {
            Orientation::TotallyAsymmetric => (vec![1.0; self.dim], vec![0.0; self.dim]),
            Orientation::HalfSpaces { plus, minus } => (plus.clone(), minus.clone()),
        };
        for (i, v) in drift.iter_mut().enumerate() {
            *v += (plus[i] - minus[i]) * tail;
        }
        Ok(drift)
    }

    /// Per-axis drift carried by `‖d‖ > d_max` for unit orientation weight.
    fn drift_tail(&self) -> f64 {
        let a = self.alpha;
        let big_d = self.d_max as f64;
        if self.dim == 1 {
            // Σ_{d > D} d^{-α} = ∫_D^∞ − f(D)/2 − f'(D)/12 + O(f''')
            big_d.powf(1.0 - a) / (a - 1.0) - 0.5 * big_d.powf(-a) + a * big_d.powf(-a - 1.0) / 12.0
        } else {
            let n = self.dim as f64;
            let weight = match self.orientation {
                // ∫ over the orthant part of the unit sphere of ω₁
                Orientation::TotallyAsymmetric => {
                    std::f64::consts::PI.powf(0.5 * (n - 1.0)) / gamma_fn(0.5 * (n + 1.0))
                        / 2f64.powf(n - 1.0)
                }
                // ∫ over the half sphere ω₁ > 0
                Orientation::HalfSpaces { .. } => {
                    std::f64::consts::PI.powf(0.5 * (n - 1.0)) / gamma_fn(0.5 * (n + 1.0))
                }
            };
            weight * big_d.powf(1.0 - a) / (a - 1.0)
        }
    }

    /// `Σ d p(d)` over the enumerated support only.
    pub fn mean_displacement(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for (idx, w) in self.weights.iter().enumerate() {
            for (axis, &c) in self.offset(idx).iter().enumerate() {
                m[axis] += c as f64 * w;
            }
        }
        m
    }

    /// Index of a displacement drawn with probability `p(d)/W`.
    #[inline]
    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.alias.sample(rng)
    }

    pub fn sample_displacement<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<i32> {
        self.offset(self.sample_index(rng)).to_vec()
    }
}

/// Time-scale factor: `N^α` for `α < 1`, `N / ln N` at `α = 1`, `N` above.
pub fn gamma_n_scale(alpha: f64, big_n: u64) -> f64 {
    let n = big_n as f64;
    if alpha < 1.0 {
        n.powf(alpha)
    } else if alpha == 1.0 {
        n / n.ln()
    } else {
        n
    }
}

/// Surface area of the unit sphere in `R^k` restricted to the first orthant.
pub fn orthant_sphere_area(k: usize) -> f64 {
    let k = k as f64;
    2.0 * std::f64::consts::PI.powf(0.5 * k) / gamma_fn(0.5 * k) / 2f64.powf(k)
}

/// Gamma function at positive half-integers and integers.
pub(crate) fn gamma_fn(x: f64) -> f64 {
    let twice = (2.0 * x).round() as i64;
    assert!(twice >= 1 && (2.0 * x - twice as f64).abs() < 1e-12);
    let (mut value, mut at) = if twice % 2 == 0 {
        (1.0, 1.0)
    } else {
        (std::f64::consts::PI.sqrt(), 0.5)
    };
    while at < x - 0.25 {
        value *= at;
        at += 1.0;
    }
    value
}

/// Bound on `Σ_{d ∈ Z^k_{>0}, ‖d‖ > big_d} ‖d‖^{-s}` for `s > k`.
fn positive_orthant_tail(k: usize, s: f64, big_d: u32) -> f64 {
    if k == 1 {
        // Σ_{d ≥ D+1} d^{-s} ≤ ∫_D^∞ x^{-s} dx
        return (big_d as f64).powf(1.0 - s) / (s - 1.0);
    }
    // unit cells [d−1, d] lie in {‖x‖ ≥ ‖d‖ − √k}; count small radii exactly
    let root_k = (k as f64).sqrt();
    let r1 = big_d.max(root_k.ceil() as u32 + 1);
    let mut explicit = 0.0;
    if r1 > big_d {
        let mut d = vec![1i64; k];
        let lim = r1 as i64;
        loop {
            let r2: i64 = d.iter().map(|c| c * c).sum();
            if r2 > (big_d as i64).pow(2) && r2 <= lim * lim {
                explicit += (r2 as f64).powf(-0.5 * s);
            }
            let mut axis = k;
            let mut done = true;
            while axis > 0 {
                axis -= 1;
                if d[axis] < lim {
                    d[axis] += 1;
                    for c in d.iter_mut().skip(axis + 1) {
                        *c = 1;
                    }
                    done = false;
                    break;
                }
            }
            if done {
                break;
            }
        }
    }
    explicit
        + orthant_sphere_area(k) * (r1 as f64 - root_k).powf(k as f64 - s) / (s - k as f64)
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn tail_bound(dim: usize, s: f64, d_max: u32, beta_max: Option<f64>) -> f64 {
    match beta_max {
        None => (1..=dim)
            .map(|k| binomial(dim, k) * positive_orthant_tail(k, s, d_max))
            .sum(),
        Some(b) => {
            b * (1..=dim)
                .map(|k| binomial(dim, k) * 2f64.powi(k as i32) * positive_orthant_tail(k, s, d_max))
                .sum::<f64>()
        }
    }
}
