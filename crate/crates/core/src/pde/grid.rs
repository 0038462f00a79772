use serde::Serialize;

use crate::error::{Error, Result};
use crate::profile::Profile;

/// Cell-centred values on the cube `[lo, lo + cells·du)^dim`. Outside the
/// window the density is the far field: `far_left` before the first cell
/// along an axis and `far_right` after the last one.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridField {
    pub dim: usize,
    pub cells: usize,
    pub du: f64,
    pub lo: f64,
    pub values: Vec<f64>,
    pub far_left: f64,
    pub far_right: f64,
    pub t: f64,
}

impl GridField {
    /// A field on the centred window `[−width/2, width/2)^dim`.
    pub fn new(dim: usize, cells: usize, width: f64, values: Vec<f64>, far: (f64, f64)) -> Result<Self> {
        if dim == 0 || dim > 2 {
            return Err(Error::domain(format!("grid dimension {dim} is not 1 or 2")));
        }
        if cells < 2 || !(width > 0.0) {
            return Err(Error::domain("grid needs at least two cells and a positive width"));
        }
        if values.len() != cells.pow(dim as u32) {
            return Err(Error::domain("grid values have the wrong length"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("grid values must be finite"));
        }
        Ok(GridField {
            dim,
            cells,
            du: width / cells as f64,
            lo: -0.5 * width,
            values,
            far_left: far.0,
            far_right: far.1,
            t: 0.0,
        })
    }

    /// Samples a profile at cell centres.
    pub fn from_profile(profile: &Profile, dim: usize, cells: usize, width: f64) -> Result<Self> {
        profile.validate()?;
        let du = width / cells as f64;
        let lo = -0.5 * width;
        let values = (0..cells.pow(dim as u32))
            .map(|i| {
                let u: Vec<f64> = (0..dim)
                    .map(|k| lo + ((i / cells.pow(k as u32)) % cells) as f64 * du + 0.5 * du)
                    .collect();
                profile.eval(&u)
            })
            .collect();
        Self::new(dim, cells, width, values, profile.far_field())
    }

    pub fn width(&self) -> f64 {
        self.cells as f64 * self.du
    }

    /// Centre of cell `i` along one axis.
    pub fn center(&self, i: usize) -> f64 {
        self.lo + (i as f64 + 0.5) * self.du
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.cells).map(|i| self.center(i)).collect()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `Σ_i ρ_i du^n`.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.du.powi(self.dim as i32)
    }

    /// `∫ |ρ − other|` over cells whose centres satisfy `|u|_∞ < radius`.
    pub fn l1_within(&self, other: &[f64], radius: f64) -> f64 {
        assert_eq!(other.len(), self.values.len());
        let vol = self.du.powi(self.dim as i32);
        self.values
            .iter()
            .zip(other)
            .enumerate()
            .filter(|(i, _)| self.inside(*i, radius))
            .map(|(_, (a, b))| (a - b).abs() * vol)
            .sum()
    }

    pub fn l1(&self, other: &[f64]) -> f64 {
        self.l1_within(other, f64::INFINITY)
    }

    fn inside(&self, i: usize, radius: f64) -> bool {
        (0..self.dim).all(|k| self.center((i / self.cells.pow(k as u32)) % self.cells).abs() < radius)
    }

    /// Block means down to `cells` per axis.
    pub fn coarse(&self, cells: usize) -> Result<GridField> {
        if cells == 0 || self.cells % cells != 0 {
            return Err(Error::domain(format!(
                "{} cells do not split into {cells}",
                self.cells
            )));
        }
        let values = crate::simulator::coarse_grain(&self.values, self.dim, self.cells, cells);
        let mut out = GridField::new(self.dim, cells, self.width(), values, (self.far_left, self.far_right))?;
        out.lo = self.lo;
        out.t = self.t;
        Ok(out)
    }
}
