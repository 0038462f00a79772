//! Named macroscopic initial profiles `ρ₀(u)`.
//!
//! In `n ≥ 2` dimensions steps vary along the flow direction
//! `s = (u₁ + … + u_n)/√n` and bumps are radial about `center·(1,…,1)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum Profile {
    Constant {
        rho: f64,
    },
    /// `ρ* + A·exp(1 − 1/(1 − r²))` for `r = |u − c|/w < 1`, else `ρ*`.
    Bump {
        rho_star: f64,
        amplitude: f64,
        #[serde(default)]
        center: f64,
        width: f64,
    },
    /// Sharp jump from `left` to `right` at `s = at`; right-continuous.
    Step {
        left: f64,
        right: f64,
        #[serde(default)]
        at: f64,
    },
    /// `C¹` transition from `left` to `right` over `|s − center| < width`.
    SmoothStep {
        left: f64,
        right: f64,
        #[serde(default)]
        center: f64,
        width: f64,
    },
}

impl Profile {
    /// Riemann data `ρL 1(u < 0) + ρR 1(u ≥ 0)`.
    pub fn riemann(left: f64, right: f64) -> Self {
        Profile::Step {
            left,
            right,
            at: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |v: f64, what: &str| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("profile {what} must be finite")))
            }
        };
        match *self {
            Profile::Constant { rho } => finite(rho, "rho"),
            Profile::Bump {
                rho_star,
                amplitude,
                center,
                width,
            } => {
                finite(rho_star, "rho_star")?;
                finite(amplitude, "amplitude")?;
                finite(center, "center")?;
                if !(width > 0.0) || !width.is_finite() {
                    return Err(Error::Config("bump width must be positive".into()));
                }
                Ok(())
            }
            Profile::Step { left, right, at } => {
                finite(left, "left")?;
                finite(right, "right")?;
                finite(at, "at")
            }
            Profile::SmoothStep {
                left,
                right,
                center,
                width,
            } => {
                finite(left, "left")?;
                finite(right, "right")?;
                finite(center, "center")?;
                if !(width > 0.0) || !width.is_finite() {
                    return Err(Error::Config("smooth step width must be positive".into()));
                }
                Ok(())
            }
        }
    }

    /// Value at a one-dimensional macroscopic point.
    pub fn eval1(&self, u: f64) -> f64 {
        self.eval(&[u])
    }

    pub fn eval(&self, u: &[f64]) -> f64 {
        let s = u.iter().sum::<f64>() / (u.len() as f64).sqrt();
        match *self {
            Profile::Constant { rho } => rho,
            Profile::Bump {
                rho_star,
                amplitude,
                center,
                width,
            } => {
                let r2 = u.iter().map(|&x| (x - center) * (x - center)).sum::<f64>() / (width * width);
                if r2 < 1.0 {
                    rho_star + amplitude * (1.0 - 1.0 / (1.0 - r2)).exp()
                } else {
                    rho_star
                }
            }
            Profile::Step { left, right, at } => {
                if s < at {
                    left
                } else {
                    right
                }
            }
            Profile::SmoothStep {
                left,
                right,
                center,
                width,
            } => left + (right - left) * smoothstep(0.5 * ((s - center) / width + 1.0)),
        }
    }

    /// Limits `(ρ(−∞), ρ(+∞))` along the flow direction.
    pub fn far_field(&self) -> (f64, f64) {
        match *self {
            Profile::Constant { rho } => (rho, rho),
            Profile::Bump { rho_star, .. } => (rho_star, rho_star),
            Profile::Step { left, right, .. } | Profile::SmoothStep { left, right, .. } => {
                (left, right)
            }
        }
    }

    /// Closed range of values taken.
    pub fn range(&self) -> (f64, f64) {
        match *self {
            Profile::Constant { rho } => (rho, rho),
            Profile::Bump {
                rho_star, amplitude, ..
            } => {
                let peak = rho_star + amplitude;
                (rho_star.min(peak), rho_star.max(peak))
            }
            Profile::Step { left, right, .. } | Profile::SmoothStep { left, right, .. } => {
                (left.min(right), left.max(right))
            }
        }
    }
}

/// `3t² − 2t³` clamped to `[0, 1]`.
pub fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

/// Blend `value` toward `rho_star` over the outer 10% of a cube of the given
/// half-width, so a torus of that size sees the constant at its seam.
pub fn flatten_near_seam(value: f64, u: &[f64], half_width: f64, rho_star: f64) -> f64 {
    let r = u.iter().fold(0.0f64, |m, &x| m.max(x.abs())) / half_width;
    let t = smoothstep((r - 0.9) / 0.1);
    (1.0 - t) * value + t * rho_star
}
