//! Exact entropy solution of the Riemann problem for `∂_t ρ + γ∂_u F(ρ) = 0`
//! by the convex-hull construction: for `ρ_L < ρ_R` the solution follows the
//! lower convex envelope of `F` on `[ρ_L, ρ_R]`, for `ρ_L > ρ_R` the upper
//! concave envelope. Envelope segments are shocks, curved parts rarefactions.

use super::flux::FluxModel;
use super::grid::GridField;
use crate::error::{Error, Result};

const PATH_POINTS: usize = 20_000;
const MAX_INFLECTIONS: usize = 64;

#[derive(Clone, Debug)]
pub struct RiemannSolution {
    left: f64,
    right: f64,
    gamma: f64,
    /// Envelope vertices from `ρ_L` to `ρ_R`.
    vertices: Vec<f64>,
    /// `slopes[k]` joins `vertices[k]` and `vertices[k+1]`; strictly increasing.
    slopes: Vec<f64>,
    flux: FluxModel,
    step: f64,
}

pub fn riemann_exact(flux: &FluxModel, left: f64, right: f64) -> Result<RiemannSolution> {
    let hi = flux.rho_max();
    if !(0.0..=hi).contains(&left) || !(0.0..=hi).contains(&right) {
        return Err(Error::domain(format!(
            "Riemann states {left}, {right} outside [0, {hi}]"
        )));
    }
    let path: Vec<(f64, f64)> = (0..=PATH_POINTS)
        .map(|k| {
            let r = left + (right - left) * k as f64 / PATH_POINTS as f64;
            (r, flux.f(r))
        })
        .collect();
    if path.iter().any(|p| !p.1.is_finite()) {
        return Err(Error::UnsupportedFlux("flux is not finite on the Riemann path".into()));
    }
    if inflections(flux, left, right) > MAX_INFLECTIONS {
        return Err(Error::UnsupportedFlux(format!(
            "flux has more than {MAX_INFLECTIONS} inflection points between {left} and {right}"
        )));
    }
    let slope = |a: (f64, f64), b: (f64, f64)| (b.1 - a.1) / (b.0 - a.0);
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(PATH_POINTS);
    for &p in &path {
        while hull.len() >= 2 && slope(hull[hull.len() - 2], hull[hull.len() - 1]) >= slope(hull[hull.len() - 1], p) {
            hull.pop();
        }
        hull.push(p);
    }
    let slopes = hull.windows(2).map(|w| slope(w[0], w[1])).collect();
    Ok(RiemannSolution {
        left,
        right,
        gamma: flux.axis_gamma() * (flux.dim() as f64).sqrt(),
        vertices: hull.iter().map(|p| p.0).collect(),
        slopes,
        flux: flux.clone(),
        step: (right - left).abs() / PATH_POINTS as f64,
    })
}

/// Sign changes of `F″` on 256 samples, ignoring values near zero.
fn inflections(flux: &FluxModel, a: f64, b: f64) -> usize {
    let m = 256;
    let h = (b - a) / m as f64;
    if h == 0.0 {
        return 0;
    }
    let d2: Vec<f64> = (1..m)
        .map(|k| {
            let r = a + k as f64 * h;
            (flux.f(r + h) - 2.0 * flux.f(r) + flux.f(r - h)) / (h * h)
        })
        .collect();
    let scale = d2.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut last = 0.0;
    let mut count = 0;
    for v in d2 {
        if v.abs() <= 1e-6 * scale {
            continue;
        }
        if last != 0.0 && v.signum() != last {
            count += 1;
        }
        last = v.signum();
    }
    count
}

impl RiemannSolution {
    pub fn left(&self) -> f64 {
        self.left
    }

    pub fn right(&self) -> f64 {
        self.right
    }

    /// `ρ` at similarity variable `ξ = u / (γ t)`.
    pub fn at_speed(&self, xi: f64) -> f64 {
        if self.slopes.is_empty() {
            return self.left;
        }
        // first segment whose speed exceeds ξ
        let k = self.slopes.partition_point(|&s| s <= xi);
        if k == 0 {
            return self.left;
        }
        if k == self.slopes.len() {
            return self.right;
        }
        let v = self.vertices[k];
        let (a, b) = (self.vertices[k - 1], self.vertices[k + 1]);
        let fine = |x: f64, y: f64| (x - y).abs() <= 1.5 * self.step;
        if fine(a, v) && fine(v, b) {
            // rarefaction: solve F′(ρ) = ξ between the neighbours
            let g = |r: f64| self.flux.df(r) - xi;
            let (mut lo, mut hi) = (a, b);
            if g(lo) * g(hi) < 0.0 {
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if g(mid) * g(lo) > 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                return 0.5 * (lo + hi);
            }
        }
        v
    }

    /// `ρ(u, t)` for a jump at `u = 0` at time 0.
    pub fn eval(&self, u: f64, t: f64) -> f64 {
        if t <= 0.0 {
            return if u < 0.0 { self.left } else { self.right };
        }
        self.at_speed(u / (self.gamma * t))
    }

    /// Cell averages at time `t` on a one-dimensional grid like `like`.
    pub fn sample(&self, like: &GridField, t: f64, sub: usize) -> Vec<f64> {
        let sub = sub.max(1);
        (0..like.cells)
            .map(|i| {
                let a = like.lo + i as f64 * like.du;
                (0..sub)
                    .map(|k| self.eval(a + (k as f64 + 0.5) * like.du / sub as f64, t))
                    .sum::<f64>()
                    / sub as f64
            })
            .collect()
    }

    /// Shock speeds `γ·[F]/[ρ]` of envelope segments longer than the path
    /// resolution.
    pub fn shocks(&self) -> Vec<f64> {
        self.vertices
            .windows(2)
            .zip(&self.slopes)
            .filter(|(w, _)| (w[1] - w[0]).abs() > 1.5 * self.step)
            .map(|(_, s)| self.gamma * s)
            .collect()
    }
}
