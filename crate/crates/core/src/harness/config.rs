use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{RateKind, RateModel};
use crate::profile::Profile;

/// Time-scale branch: `γ_N = N^α`, `N / ln N` or `N`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleBranch {
    Anomalous,
    Log,
    Euler,
}

impl ScaleBranch {
    pub fn of_alpha(alpha: f64) -> Self {
        if alpha < 1.0 {
            ScaleBranch::Anomalous
        } else if alpha == 1.0 {
            ScaleBranch::Log
        } else {
            ScaleBranch::Euler
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelName {
    ZeroRange,
    ZeroRangeCapped,
    Exclusion,
    Tabulated,
}

/// A compactly supported weak-form test function `G(s, u)`, horizon taken
/// from the last snapshot time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeakTest {
    pub center: f64,
    pub width: f64,
}

fn default_dim() -> usize {
    1
}
fn default_replicas() -> u64 {
    100
}
fn default_block_fraction() -> f64 {
    0.05
}
fn default_snapshots() -> Vec<f64> {
    vec![0.0, 0.25, 0.5, 1.0]
}
fn default_solver_cells() -> usize {
    4096
}
fn default_window() -> f64 {
    4.0
}
fn default_true() -> bool {
    true
}
fn default_cfl() -> f64 {
    0.9
}
fn default_safety() -> f64 {
    0.5
}
fn default_budget() -> u64 {
    1_000_000_000
}
fn default_table_points() -> usize {
    1001
}
fn default_region() -> f64 {
    0.5
}
fn default_d_list() -> Vec<Vec<i32>> {
    vec![vec![1]]
}
fn default_out() -> PathBuf {
    PathBuf::from("out")
}

/// Flat key-value experiment description, read from TOML. Unknown keys are
/// errors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<Vec<f64>>,
    pub alpha: f64,
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub branch: Option<ScaleBranch>,
    #[serde(default)]
    pub n_list: Vec<u64>,
    #[serde(default = "default_replicas")]
    pub replicas: u64,
    /// `l = max(1, ⌊block_fraction · N⌋)`.
    #[serde(default = "default_block_fraction")]
    pub block_fraction: f64,
    pub profile: Profile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_star: Option<f64>,
    #[serde(default = "default_snapshots")]
    pub t_snapshots: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_solver_cells")]
    pub solver_cells: usize,
    /// Macroscopic window width; the torus has `window_factor · N` sites per
    /// axis.
    #[serde(default = "default_window")]
    pub window_factor: f64,
    #[serde(default)]
    pub no_wrap: bool,
    /// Blend the initial profile to its far field near the torus seam.
    #[serde(default = "default_true")]
    pub flatten_seam: bool,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default = "default_safety")]
    pub safety: f64,
    /// Proposals per replica per snapshot interval.
    #[serde(default = "default_budget")]
    pub budget: u64,
    /// Worker threads; 0 uses every core.
    #[serde(default)]
    pub workers: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_max: Option<f64>,
    /// Half-space jump weights in one dimension; absent means the orthant
    /// kernel.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plus: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub minus: Option<f64>,
    #[serde(default)]
    pub weak_tests: Vec<WeakTest>,
    #[serde(default = "default_table_points")]
    pub table_points: usize,
    /// Constant density of the second configuration in the ordering
    /// experiment.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default = "default_region")]
    pub region_radius: f64,
    #[serde(default = "default_d_list")]
    pub d_list: Vec<Vec<i32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling_t: Option<f64>,
    #[serde(default = "default_out")]
    pub out: PathBuf,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| bad(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn branch(&self) -> ScaleBranch {
        ScaleBranch::of_alpha(self.alpha)
    }

    pub fn rate_model(&self) -> Result<RateModel> {
        let kind = match self.model {
            ModelName::ZeroRange => RateKind::ZeroRange,
            ModelName::ZeroRangeCapped => RateKind::ZeroRangeCapped {
                cap: self.cap.ok_or_else(|| bad("zero_range_capped needs `cap`"))?,
            },
            ModelName::Exclusion => RateKind::Exclusion,
            ModelName::Tabulated => RateKind::Tabulated {
                g: self.g.clone().ok_or_else(|| bad("tabulated model needs `g`"))?,
                h: self.h.clone().ok_or_else(|| bad("tabulated model needs `h`"))?,
            },
        };
        RateModel::from_kind(kind).map_err(|e| bad(e.to_string()))
    }

    /// Cells per axis of the common comparison grid: one per site of the
    /// smallest system.
    pub fn comparison_cells(&self) -> usize {
        let n_min = self.n_list.first().copied().unwrap_or(1);
        (self.window_factor * n_min as f64).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(bad(format!("alpha must be positive, got {}", self.alpha)));
        }
        if let Some(b) = self.branch {
            if b != self.branch() {
                return Err(bad(format!(
                    "branch {b:?} is inconsistent with alpha = {} ({:?})",
                    self.alpha,
                    self.branch()
                )));
            }
        }
        if !(1..=3).contains(&self.dim) {
            return Err(bad(format!("dim must be 1, 2 or 3, got {}", self.dim)));
        }
        let needs_cap = self.model == ModelName::ZeroRangeCapped;
        if self.cap.is_some() != needs_cap {
            return Err(bad("`cap` is used by zero_range_capped only"));
        }
        let needs_tables = self.model == ModelName::Tabulated;
        if (self.g.is_some() || self.h.is_some()) != needs_tables {
            return Err(bad("`g` and `h` are used by the tabulated model only"));
        }
        self.rate_model()?;
        self.profile.validate().map_err(|e| bad(e.to_string()))?;
        if let Some(star) = self.rho_star {
            let (l, r) = self.profile.far_field();
            if l != star || r != star {
                return Err(bad(format!(
                    "profile far field ({l}, {r}) differs from rho_star = {star}"
                )));
            }
        }
        if self.n_list.windows(2).any(|w| w[1] <= w[0]) {
            return Err(bad("n_list must be strictly increasing"));
        }
        if self.n_list.iter().any(|&n| n < 2) {
            return Err(bad("every N must be at least 2"));
        }
        if self.t_snapshots.is_empty()
            || self.t_snapshots.iter().any(|t| !(*t >= 0.0 && t.is_finite()))
            || self.t_snapshots.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(bad("t_snapshots must be nonnegative and strictly increasing"));
        }
        if self.replicas == 0 {
            return Err(bad("replicas must be positive"));
        }
        if !(self.block_fraction > 0.0 && self.block_fraction < 0.5) {
            return Err(bad("block_fraction must lie in (0, 0.5)"));
        }
        if !(self.window_factor >= 1.0 && self.window_factor.is_finite()) {
            return Err(bad("window_factor must be at least 1"));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) || !(self.safety > 0.0 && self.safety <= 1.0) {
            return Err(bad("cfl and safety must lie in (0, 1]"));
        }
        if self.budget == 0 {
            return Err(bad("budget must be positive"));
        }
        if self.plus.is_some() != self.minus.is_some() {
            return Err(bad("give both `plus` and `minus` or neither"));
        }
        if let (Some(p), Some(m)) = (self.plus, self.minus) {
            if self.dim != 1 || !(p >= 0.0 && m >= 0.0) || p + m == 0.0 {
                return Err(bad("half-space weights need dim = 1 and nonnegative, not both zero"));
            }
        }
        if let Some(first) = self.n_list.first() {
            let cells = self.comparison_cells();
            for &n in &self.n_list {
                let side = self.window_factor * n as f64;
                if side.fract() != 0.0 || (side as usize) % 2 != 0 || (side as usize) % cells != 0 {
                    return Err(bad(format!(
                        "window_factor·N = {side} must be an even integer divisible by the {cells} comparison cells of N = {first}"
                    )));
                }
            }
            if self.solver_cells % cells != 0 {
                return Err(bad(format!(
                    "solver_cells = {} is not a multiple of the {cells} comparison cells",
                    self.solver_cells
                )));
            }
        }
        for w in &self.weak_tests {
            if !(w.width > 0.0) || (w.center.abs() + w.width) > 0.5 * self.window_factor {
                return Err(bad("weak test functions must have positive width and fit in the window"));
            }
        }
        if let Some(c) = self.c {
            if !(c >= 0.0 && c.is_finite()) {
                return Err(bad("c must be a nonnegative density"));
            }
        }
        if self.d_list.iter().any(|d| d.len() != self.dim || d.iter().all(|&x| x == 0)) {
            return Err(bad("every entry of d_list needs dim nonzero coordinates"));
        }
        if self.table_points < 2 {
            return Err(bad("table_points must be at least 2"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
model = "exclusion"
alpha = 2.0
n_list = [64, 128]
profile = { shape = "bump", rho_star = 0.2, amplitude = 0.3, width = 0.5 }
"#;

    #[test]
    fn defaults_and_roundtrip() {
        let cfg = ExperimentConfig::from_toml(BASE).unwrap();
        assert_eq!(cfg.replicas, 100);
        assert_eq!(cfg.t_snapshots, vec![0.0, 0.25, 0.5, 1.0]);
        assert_eq!(cfg.comparison_cells(), 256);
        assert_eq!(cfg.branch(), ScaleBranch::Euler);
        let again = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn unknown_keys_are_errors() {
        let err = ExperimentConfig::from_toml(&format!("{BASE}\nreplicass = 3\n")).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn inconsistencies_are_errors() {
        for extra in [
            "branch = \"anomalous\"",
            "rho_star = 0.3",
            "cap = 3",
            "solver_cells = 1000",
            "plus = 1.0",
            "t_snapshots = [0.5, 0.25]",
        ] {
            assert!(ExperimentConfig::from_toml(&format!("{BASE}\n{extra}\n")).is_err(), "{extra}");
        }
        let unsorted = BASE.replace("[64, 128]", "[128, 64]");
        assert!(ExperimentConfig::from_toml(&unsorted).is_err());
        let capped = BASE.replace("\"exclusion\"", "\"zero_range_capped\"");
        assert!(ExperimentConfig::from_toml(&capped).is_err());
        assert!(ExperimentConfig::from_toml(&format!("{capped}\ncap = 3\n")).is_ok());
    }
}
