use crate::equilibrium::PhiPsiTable;
use crate::error::{Error, Result};
use crate::interp::Pchip;
use crate::model::{RateKind, RateModel};

#[derive(Clone, Debug)]
enum Shape {
    /// `ρ(1 − ρ)`
    Exclusion,
    /// `s·ρ`
    Linear { slope: f64 },
    /// Monotone cubic through `Φ_kΨ_k` on the table's density nodes.
    Table(Pchip),
}

/// Macroscopic flux `F = ΦΨ` with the drift constant `γ` and the split into
/// increasing and decreasing parts used by the Engquist–Osher flux.
#[derive(Clone, Debug)]
pub struct FluxModel {
    shape: Shape,
    gamma: f64,
    dim: usize,
    rho_max: f64,
    /// Ends of the monotone pieces of `F`, including `0` and `rho_max`.
    breaks: Vec<f64>,
    /// `∫_0^{b_k} max(F′, 0)` at each break.
    plus_at: Vec<f64>,
    lip: f64,
}

impl FluxModel {
    pub fn exclusion(gamma: f64) -> Self {
        Self::build(Shape::Exclusion, gamma, 1.0, vec![0.0, 0.5, 1.0], 1.0)
    }

    pub fn linear(slope: f64, gamma: f64, rho_max: f64) -> Self {
        Self::build(Shape::Linear { slope }, gamma, rho_max, vec![0.0, rho_max], slope.abs())
    }

    pub fn from_table(table: &PhiPsiTable, gamma: f64) -> Result<Self> {
        let f: Vec<f64> = table
            .phi
            .ys()
            .iter()
            .zip(table.psi.ys())
            .map(|(a, b)| a * b)
            .collect();
        if f.iter().any(|v| !v.is_finite()) {
            return Err(Error::UnsupportedFlux("flux table has non-finite entries".into()));
        }
        let x = table.rho.clone();
        let mut breaks = vec![x[0]];
        for k in 1..x.len() - 1 {
            let left = f[k] - f[k - 1];
            let right = f[k + 1] - f[k];
            if left * right < 0.0 || (left != 0.0 && right == 0.0) || (left == 0.0 && right != 0.0) {
                breaks.push(x[k]);
            }
        }
        breaks.push(x[x.len() - 1]);
        let pchip = Pchip::new(x, f);
        let lip = pchip.max_abs_derivative();
        let rho_max = table.rho_max();
        Ok(Self::build(Shape::Table(pchip), gamma, rho_max, breaks, lip))
    }

    /// Closed forms for exclusion and uncapped zero-range, the table otherwise.
    pub fn from_model(model: &RateModel, table: &PhiPsiTable, gamma: f64) -> Result<Self> {
        match model.kind() {
            RateKind::Exclusion => Ok(Self::exclusion(gamma)),
            RateKind::ZeroRange => Ok(Self::linear(1.0, gamma, table.rho_max())),
            _ => Self::from_table(table, gamma),
        }
    }

    fn build(shape: Shape, gamma: f64, rho_max: f64, breaks: Vec<f64>, lip: f64) -> Self {
        let mut model = FluxModel {
            shape,
            gamma,
            dim: 1,
            rho_max,
            breaks,
            plus_at: Vec::new(),
            lip,
        };
        let mut acc = 0.0;
        let mut plus_at = vec![0.0];
        for w in model.breaks.windows(2) {
            acc += (model.f(w[1]) - model.f(w[0])).max(0.0);
            plus_at.push(acc);
        }
        model.plus_at = plus_at;
        model
    }

    /// Flux along the direction `(1,…,1)/√n`: each axis carries `γ/√n · F`.
    pub fn directional(mut self, dim: usize) -> Self {
        self.dim = dim;
        self
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rho_max(&self) -> f64 {
        self.rho_max
    }

    /// Per-axis speed factor `γ/√n`.
    pub fn axis_gamma(&self) -> f64 {
        self.gamma / (self.dim as f64).sqrt()
    }

    /// Upper bound on `|F′|` over `[0, rho_max]`.
    pub fn lipschitz(&self) -> f64 {
        self.lip
    }

    /// Interior extrema of `F`.
    pub fn extrema(&self) -> &[f64] {
        &self.breaks[1..self.breaks.len() - 1]
    }

    #[inline]
    pub fn f(&self, rho: f64) -> f64 {
        match &self.shape {
            Shape::Exclusion => rho * (1.0 - rho),
            Shape::Linear { slope } => slope * rho,
            Shape::Table(p) => p.eval(rho),
        }
    }

    pub fn df(&self, rho: f64) -> f64 {
        match &self.shape {
            Shape::Exclusion => 1.0 - 2.0 * rho,
            Shape::Linear { slope } => *slope,
            Shape::Table(p) => p.derivative(rho),
        }
    }

    /// `∫_0^u max(F′, 0)`.
    fn plus(&self, u: f64) -> f64 {
        let u = u.clamp(self.breaks[0], self.breaks[self.breaks.len() - 1]);
        let k = self.breaks.partition_point(|&b| b <= u).clamp(1, self.breaks.len() - 1) - 1;
        self.plus_at[k] + (self.f(u) - self.f(self.breaks[k])).max(0.0)
    }

    /// Engquist–Osher flux `F⁺(a) + F⁻(b)` without the `γ` factor.
    #[inline]
    pub fn eo(&self, a: f64, b: f64) -> f64 {
        let f0 = self.f(0.0);
        let plus_a = self.plus(a);
        let minus_b = self.f(b) - f0 - self.plus(b);
        f0 + plus_a + minus_b
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::EquilibriumTable;

    /// Oracle: `½(F(a)+F(b)) − ½∫_a^b |F′|` by a fine midpoint rule.
    fn eo_oracle(m: &FluxModel, a: f64, b: f64) -> f64 {
        let n = 20_000;
        let h = (b - a) / n as f64;
        let var: f64 = (0..n).map(|i| m.df(a + (i as f64 + 0.5) * h).abs() * h).sum();
        0.5 * (m.f(a) + m.f(b)) - 0.5 * var
    }

    #[test]
    fn exclusion_engquist_osher() {
        let m = FluxModel::exclusion(1.0);
        for (a, b) in [(0.0, 1.0), (1.0, 0.0), (0.2, 0.7), (0.8, 0.6), (0.3, 0.3)] {
            assert!((m.eo(a, b) - eo_oracle(&m, a, b)).abs() < 1e-8, "{a} {b}");
        }
        assert_eq!(m.eo(1.0, 0.0), 0.25);
        assert_eq!(m.eo(0.0, 1.0), -0.25);
        assert_eq!(m.extrema(), &[0.5]);
    }

    #[test]
    fn table_flux_matches_exclusion() {
        let table = EquilibriumTable::new(RateModel::exclusion())
            .unwrap()
            .phi_psi_table(1.0)
            .unwrap();
        let m = FluxModel::from_table(&table, 1.0).unwrap();
        for i in 0..=100 {
            let r = i as f64 / 100.0;
            assert!((m.f(r) - r * (1.0 - r)).abs() < 1e-6);
        }
        for (a, b) in [(0.0, 1.0), (1.0, 0.0), (0.25, 0.9)] {
            assert!((m.eo(a, b) - FluxModel::exclusion(1.0).eo(a, b)).abs() < 1e-6);
        }
        assert!((m.lipschitz() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn monotone_flux_has_no_interior_extrema() {
        let table = EquilibriumTable::new(RateModel::zero_range_capped(3).unwrap())
            .unwrap()
            .phi_psi_table(4.0)
            .unwrap();
        let m = FluxModel::from_table(&table, 1.0).unwrap();
        assert!(m.extrema().is_empty());
        assert_eq!(m.eo(1.0, 3.0), m.f(1.0));
    }

    #[test]
    fn directional_speed() {
        let m = FluxModel::exclusion(2.0).directional(2);
        assert!((m.axis_gamma() - 2f64.sqrt()).abs() < 1e-15);
    }
}
