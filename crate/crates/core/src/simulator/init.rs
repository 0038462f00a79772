use std::collections::HashMap;

use rand::Rng;

use super::torus::Torus;
use crate::equilibrium::{inverse_cdf, EquilibriumTable};
use crate::error::{Error, Result};
use crate::profile::{flatten_near_seam, Profile};

/// Product law `⊗_x Θ_{ρ(x)}` with per-site cumulative tables shared between
/// sites of equal density.
#[derive(Clone, Debug)]
pub struct InitialLaw {
    densities: Vec<f64>,
    site_cdf: Vec<u32>,
    cdfs: Vec<Vec<f64>>,
}

impl InitialLaw {
    pub fn from_densities(table: &EquilibriumTable, densities: Vec<f64>) -> Result<Self> {
        let mut lookup: HashMap<u64, u32> = HashMap::new();
        let mut cdfs = Vec::new();
        let mut site_cdf = Vec::with_capacity(densities.len());
        for &rho in &densities {
            if !table.admits_density(rho) {
                return Err(Error::domain(format!(
                    "initial density {rho} is outside [0, {}]",
                    table.rho_c()
                )));
            }
            let slot = match lookup.get(&rho.to_bits()) {
                Some(&s) => s,
                None => {
                    let s = cdfs.len() as u32;
                    cdfs.push(table.cdf_at_density(rho)?);
                    lookup.insert(rho.to_bits(), s);
                    s
                }
            };
            site_cdf.push(slot);
        }
        Ok(InitialLaw {
            densities,
            site_cdf,
            cdfs,
        })
    }

    /// Densities `ρ₀(x/N)` on every site, optionally blended to `rho_star`
    /// near the seam.
    pub fn from_profile(
        table: &EquilibriumTable,
        profile: &Profile,
        torus: &Torus,
        scale_n: u64,
        seam_value: Option<f64>,
    ) -> Result<Self> {
        profile.validate()?;
        let half_width = torus.side() as f64 / (2.0 * scale_n as f64);
        let densities = (0..torus.sites())
            .map(|i| {
                let u = torus.macro_position(i, scale_n);
                let v = profile.eval(&u);
                match seam_value {
                    Some(star) => flatten_near_seam(v, &u, half_width, star),
                    None => v,
                }
            })
            .collect();
        Self::from_densities(table, densities)
    }

    pub fn sites(&self) -> usize {
        self.densities.len()
    }

    pub fn density(&self, i: usize) -> f64 {
        self.densities[i]
    }

    pub fn densities(&self) -> &[f64] {
        &self.densities
    }

    pub fn cdf(&self, i: usize) -> &[f64] {
        &self.cdfs[self.site_cdf[i] as usize]
    }

    /// Number of distinct site marginals.
    pub fn distinct(&self) -> usize {
        self.cdfs.len()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<u32> {
        (0..self.sites())
            .map(|i| inverse_cdf(self.cdf(i), rng.random::<f64>()))
            .collect()
    }

    /// Occupancies from caller-supplied uniforms, one per site.
    pub fn quantiles(&self, uniforms: &[f64]) -> Vec<u32> {
        assert_eq!(uniforms.len(), self.sites());
        uniforms
            .iter()
            .enumerate()
            .map(|(i, &u)| inverse_cdf(self.cdf(i), u))
            .collect()
    }
}
