//! Weak-form residuals of a time-resolved field against a compactly
//! supported test function, and Kruzkov entropy margins. One dimension only.

use serde::{Deserialize, Serialize};

use super::flux::FluxModel;
use super::grid::GridField;
use super::nonlocal::{nonlocal_rhs, NonlocalSpec};
use super::quad::gauss_legendre;
use crate::equilibrium::PhiPsiTable;
use crate::error::{Error, Result};

/// `G(s, u) = (1 − s/T)³₊ (1 − x²)⁴₊` with `x = (u − c)/w`; `C²` in both
/// variables and nonnegative.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestBump {
    pub horizon: f64,
    pub center: f64,
    pub width: f64,
}

impl TestBump {
    fn time(&self, s: f64) -> (f64, f64) {
        let a = (1.0 - s / self.horizon).max(0.0);
        (a * a * a, -3.0 * a * a / self.horizon)
    }

    fn space(&self, u: f64) -> (f64, f64) {
        let x = (u - self.center) / self.width;
        let b = (1.0 - x * x).max(0.0);
        (b.powi(4), -8.0 * x * b.powi(3) / self.width)
    }

    pub fn value(&self, s: f64, u: f64) -> f64 {
        self.time(s).0 * self.space(u).0
    }

    pub fn ds(&self, s: f64, u: f64) -> f64 {
        self.time(s).1 * self.space(u).0
    }

    pub fn du(&self, s: f64, u: f64) -> f64 {
        self.time(s).0 * self.space(u).1
    }

    /// `max` of `|G|` and its first and second partials, from the closed
    /// forms of the factors.
    pub fn c2_norm(&self) -> f64 {
        let (t, w) = (self.horizon, self.width);
        // time factor a³: sup |·|, |·′|, |·″| = 1, 3/T, 6/T²
        let time = [1.0, 3.0 / t, 6.0 / (t * t)];
        // space factor (1−x²)⁴ in x: sup |·′| ≈ 1.7, |·″| = 8 at x = 0
        let mut d1 = 0.0f64;
        let mut d2 = 0.0f64;
        for k in 0..=2000 {
            let x = -1.0 + k as f64 / 1000.0;
            let b = 1.0 - x * x;
            d1 = d1.max((8.0 * x * b.powi(3)).abs());
            d2 = d2.max((-8.0 * b.powi(3) + 48.0 * x * x * b * b).abs());
        }
        let space = [1.0, d1 / w, d2 / (w * w)];
        let mut best = 0.0f64;
        for (i, a) in time.iter().enumerate() {
            for (j, b) in space.iter().enumerate() {
                if i + j <= 2 {
                    best = best.max(a * b);
                }
            }
        }
        best
    }
}

/// Snapshots of a one-dimensional field, increasing in time, the first at
/// `t = 0`. Between snapshots the density is linear in time.
#[derive(Clone, Debug, Default)]
pub struct FieldHistory {
    pub fields: Vec<GridField>,
}

impl FieldHistory {
    pub fn new(fields: Vec<GridField>) -> Result<Self> {
        let h = FieldHistory { fields };
        h.validate()?;
        Ok(h)
    }

    fn validate(&self) -> Result<()> {
        let first = self
            .fields
            .first()
            .ok_or_else(|| Error::domain("field history is empty"))?;
        if first.t != 0.0 {
            return Err(Error::domain("field history must start at t = 0"));
        }
        if first.dim != 1 {
            return Err(Error::domain("weak residuals are implemented in one dimension"));
        }
        for w in self.fields.windows(2) {
            if !(w[1].t > w[0].t) || w[1].cells != w[0].cells || w[1].du != w[0].du || w[1].lo != w[0].lo {
                return Err(Error::domain("field history snapshots must share a grid and increase in time"));
            }
        }
        Ok(())
    }

    pub fn end(&self) -> f64 {
        self.fields.last().map_or(0.0, |f| f.t)
    }

    fn check_support(&self, g: &TestBump) -> Result<()> {
        let f = &self.fields[0];
        if g.horizon > self.end() + 1e-12 {
            return Err(Error::domain(format!(
                "test function horizon {} exceeds the history end {}",
                g.horizon,
                self.end()
            )));
        }
        if g.center - g.width < f.lo || g.center + g.width > f.lo + f.width() {
            return Err(Error::domain("test function support leaves the window"));
        }
        Ok(())
    }

    /// `∫_0^T Σ_i q(s, ρ(s)) ds` by 4-point Gauss–Legendre on each snapshot
    /// interval.
    fn integrate_time(&self, horizon: f64, mut q: impl FnMut(f64, &GridField) -> Result<f64>) -> Result<f64> {
        let rule = gauss_legendre(4);
        let mut acc = 0.0;
        let mut scratch = self.fields[0].clone();
        for w in self.fields.windows(2) {
            let (a, b) = (w[0].t, w[1].t.min(horizon));
            if b <= a {
                break;
            }
            let (m, r) = (0.5 * (a + b), 0.5 * (b - a));
            for (x, wt) in rule.0.iter().zip(&rule.1) {
                let s = m + r * x;
                let theta = (s - w[0].t) / (w[1].t - w[0].t);
                for (v, (p0, p1)) in scratch.values.iter_mut().zip(w[0].values.iter().zip(&w[1].values)) {
                    *v = (1.0 - theta) * p0 + theta * p1;
                }
                scratch.t = s;
                acc += wt * r * q(s, &scratch)?;
            }
        }
        Ok(acc)
    }
}

/// `∫ρ₀G(0) + ∫∫ [ρ ∂_sG + γF(ρ) ∂_uG]`, zero for weak solutions of the
/// conservation law.
pub fn weak_residual_conservation(history: &FieldHistory, flux: &FluxModel, g: &TestBump) -> Result<f64> {
    history.validate()?;
    history.check_support(g)?;
    let f0 = &history.fields[0];
    let us = f0.centers();
    let du = f0.du;
    let gamma = flux.gamma();
    let initial: f64 = f0.values.iter().zip(&us).map(|(r, &u)| r * g.value(0.0, u)).sum::<f64>() * du;
    let body = history.integrate_time(g.horizon, |s, f| {
        Ok(f.values
            .iter()
            .zip(&us)
            .map(|(&r, &u)| r * g.ds(s, u) + gamma * flux.f(r) * g.du(s, u))
            .sum::<f64>()
            * du)
    })?;
    Ok(initial + body)
}

/// `∫ρ₀G(0) + ∫∫ ρ ∂_sG + ∫∫∫ Φ(ρ(u))Ψ(ρ(u+v))[G(u+v) − G(u)] v^{-1-α}`.
/// The triple integral is `∫ G 𝓛ρ` with the discrete operator, its exact
/// discrete adjoint.
pub fn weak_residual_nonlocal(
    history: &FieldHistory,
    table: &PhiPsiTable,
    spec: &NonlocalSpec,
    g: &TestBump,
) -> Result<f64> {
    history.validate()?;
    history.check_support(g)?;
    let f0 = &history.fields[0];
    let us = f0.centers();
    let du = f0.du;
    let initial: f64 = f0.values.iter().zip(&us).map(|(r, &u)| r * g.value(0.0, u)).sum::<f64>() * du;
    let body = history.integrate_time(g.horizon, |s, f| {
        let rhs = nonlocal_rhs(f, table, spec)?;
        Ok(f.values
            .iter()
            .zip(&rhs)
            .zip(&us)
            .map(|((&r, &l), &u)| r * g.ds(s, u) + l * g.value(s, u))
            .sum::<f64>()
            * du)
    })?;
    Ok(initial + body)
}

#[derive(Clone, Debug, Serialize)]
pub struct KruzkovMargin {
    pub c: f64,
    pub test: usize,
    pub margin: f64,
}

/// `∫∫ |ρ−c| ∂_sG + γ sgn(ρ−c)(F(ρ)−F(c)) ∂_uG + ∫|ρ₀−c| G(0)` for every
/// `c` and test function; entropy solutions give nonnegative margins.
pub fn kruzkov_check(
    history: &FieldHistory,
    flux: &FluxModel,
    levels: &[f64],
    tests: &[TestBump],
) -> Result<Vec<KruzkovMargin>> {
    history.validate()?;
    let f0 = &history.fields[0];
    let us = f0.centers();
    let du = f0.du;
    let gamma = flux.gamma();
    let mut out = Vec::with_capacity(levels.len() * tests.len());
    for (k, g) in tests.iter().enumerate() {
        history.check_support(g)?;
        for &c in levels {
            let fc = flux.f(c);
            let initial: f64 = f0
                .values
                .iter()
                .zip(&us)
                .map(|(r, &u)| (r - c).abs() * g.value(0.0, u))
                .sum::<f64>()
                * du;
            let body = history.integrate_time(g.horizon, |s, f| {
                Ok(f.values
                    .iter()
                    .zip(&us)
                    .map(|(&r, &u)| {
                        let sign = if r > c {
                            1.0
                        } else if r < c {
                            -1.0
                        } else {
                            0.0
                        };
                        (r - c).abs() * g.ds(s, u) + gamma * sign * (flux.f(r) - fc) * g.du(s, u)
                    })
                    .sum::<f64>()
                    * du)
            })?;
            out.push(KruzkovMargin {
                c,
                test: k,
                margin: initial + body,
            });
        }
    }
    Ok(out)
}
