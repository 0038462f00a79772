//! Experiment orchestration: particle ensembles against the matching
//! macroscopic solution on a common grid, ordering experiments, and
//! deterministic file output.

mod config;
mod report;

use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

pub use config::{ExperimentConfig, ModelName, ScaleBranch, WeakTest};
pub use report::{
    convergence_report_to_files, write_equilibrium, write_ordering, write_solution, EquilibriumRow,
};

use crate::coupling::{ordering_experiment, OrderingRow, OrderingSetup};
use crate::equilibrium::{EquilibriumTable, PhiPsiTable};
use crate::error::{Error, Result};
use crate::kernel::{gamma_fn, gamma_n_scale, JumpKernel, Orientation};
use crate::model::RateModel;
use crate::pde::{
    entropy_solve, evolve_nonlocal, weak_residual_conservation, weak_residual_nonlocal, FieldHistory,
    FluxModel, GridField, NonlocalSpec, TestBump,
};
use crate::profile::flatten_near_seam;
use crate::simulator::{replica_rng, torus_side, Configuration, InitialLaw, Torus};

/// Ensemble statistics of `η^l` at one `(N, t)`.
#[derive(Clone, Debug)]
pub struct Snapshot {
    pub n: u64,
    pub t: f64,
    pub l: usize,
    pub side: usize,
    pub dim: usize,
    pub site_mean: Vec<f64>,
    pub site_stderr: Vec<f64>,
    /// Per replica, block means on the comparison grid.
    pub coarse: Vec<Vec<f64>>,
}

impl Snapshot {
    pub fn coarse_mean(&self) -> Vec<f64> {
        mean_rows(&self.coarse)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EventTotals {
    #[serde(rename = "N")]
    pub n: u64,
    pub proposals: u64,
    pub accepted: u64,
}

#[derive(Clone, Debug)]
pub struct Ensemble {
    pub snapshots: Vec<Snapshot>,
    pub events: Vec<EventTotals>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SolverStats {
    pub kind: String,
    pub cells: usize,
    pub steps: usize,
    pub dt: f64,
    pub clamps: u64,
    pub conservation_drift: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Clone, Debug)]
pub struct Solution {
    /// Solver fields at each snapshot time.
    pub fields: Vec<GridField>,
    pub stats: SolverStats,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct L1Row {
    #[serde(rename = "N")]
    pub n: u64,
    pub t: f64,
    pub l1: f64,
    pub l1_stderr: f64,
}

/// Weak-form residual of the ensemble mean (`source = N`) or of the solver
/// field (`source = 0`) at the comparison resolution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WeakRow {
    pub source: u64,
    pub test: usize,
    pub residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GammaEntry {
    #[serde(rename = "N")]
    pub n: u64,
    pub gamma_n: f64,
    pub block: usize,
    pub sites_per_axis: usize,
}

/// Everything needed to reproduce a run; byte-stable for a given config.
#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub program: String,
    pub version: String,
    pub command: String,
    pub config: ExperimentConfig,
    pub branch: ScaleBranch,
    pub scales: Vec<GammaEntry>,
    pub pde_gamma: Option<f64>,
    pub comparison_cells: usize,
    pub window_measure: f64,
    pub table_rho_max: f64,
    pub events: Vec<EventTotals>,
    pub solver: Option<SolverStats>,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Timing {
    pub ensemble_seconds: f64,
    pub solver_seconds: f64,
}

#[derive(Clone, Debug)]
pub struct ConvergenceReport {
    pub rows: Vec<L1Row>,
    pub weak: Vec<WeakRow>,
    pub manifest: Manifest,
    pub timing: Timing,
    pub ensemble: Option<Ensemble>,
    pub solution: Option<Solution>,
}

impl ConvergenceReport {
    pub fn empty(manifest: Manifest) -> Self {
        ConvergenceReport {
            rows: Vec::new(),
            weak: Vec::new(),
            manifest,
            timing: Timing::default(),
            ensemble: None,
            solution: None,
        }
    }
}

/// A validated configuration with its equilibrium tables.
pub struct Experiment {
    pub cfg: ExperimentConfig,
    pub model: Arc<RateModel>,
    pub equilibrium: EquilibriumTable,
    pub table: PhiPsiTable,
}

impl Experiment {
    pub fn new(cfg: ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let model = cfg.rate_model()?;
        let equilibrium = EquilibriumTable::new(model.clone())?;
        let (lo, hi) = cfg.profile.range();
        let densities = [lo, hi].into_iter().chain(cfg.c);
        for rho in densities {
            if !equilibrium.admits_density(rho) {
                return Err(Error::Config(format!(
                    "density {rho} is outside the admissible range of {}",
                    model.name()
                )));
            }
        }
        let rho_max = match cfg.rho_max {
            Some(r) => r,
            None => default_rho_max(&equilibrium, hi.max(cfg.c.unwrap_or(0.0))),
        };
        let table = equilibrium
            .phi_psi_table_with(rho_max, cfg.table_points - 1)
            .map_err(|e| Error::Config(format!("equilibrium table up to {rho_max}: {e}")))?;
        Ok(Experiment {
            cfg,
            model: Arc::new(model),
            equilibrium,
            table,
        })
    }

    pub fn block_size(&self, n: u64) -> usize {
        ((self.cfg.block_fraction * n as f64).floor() as usize).max(1)
    }

    fn orientation(&self) -> Orientation {
        match (self.cfg.plus, self.cfg.minus) {
            (Some(plus), Some(minus)) => Orientation::HalfSpaces {
                plus: vec![plus],
                minus: vec![minus],
            },
            _ => Orientation::TotallyAsymmetric,
        }
    }

    pub fn kernel(&self, d_max: u32) -> Result<JumpKernel> {
        JumpKernel::with_orientation(self.cfg.dim, self.cfg.alpha, d_max, self.orientation())
    }

    /// Drift coefficient `γ` of the conservation law along `(1,…,1)/√n`:
    /// `√n` times the per-axis mean displacement, or its logarithmic
    /// analogue when `α = 1`.
    pub fn pde_gamma(&self) -> Result<f64> {
        let n = self.cfg.dim as f64;
        let axis = match self.cfg.branch() {
            ScaleBranch::Euler => self.kernel(64)?.drift()?[0],
            ScaleBranch::Log => match self.orientation() {
                Orientation::HalfSpaces { plus, minus } => plus[0] - minus[0],
                // ∫ over the orthant of the unit sphere of θ₁ = |B^{n−1}| / 2^{n−1}
                Orientation::TotallyAsymmetric => {
                    let k = n - 1.0;
                    std::f64::consts::PI.powf(0.5 * k) / gamma_fn(0.5 * k + 1.0) / 2f64.powf(k)
                }
            },
            ScaleBranch::Anomalous => {
                return Err(Error::domain("the anomalous branch has no drift coefficient"))
            }
        };
        Ok(axis * n.sqrt())
    }

    pub fn nonlocal_spec(&self) -> NonlocalSpec {
        let (plus, minus) = (self.cfg.plus.unwrap_or(1.0), self.cfg.minus.unwrap_or(0.0));
        let spec = NonlocalSpec::new(self.cfg.alpha)
            .with_cutoff(0.5 * self.cfg.window_factor)
            .with_orientation(plus, minus);
        if self.cfg.no_wrap {
            spec
        } else {
            spec.periodic()
        }
    }

    pub fn flux(&self) -> Result<FluxModel> {
        Ok(FluxModel::from_model(&self.model, &self.table, self.pde_gamma()?)?.directional(self.cfg.dim))
    }

    fn seam_value(&self) -> Option<f64> {
        if self.cfg.flatten_seam && !self.cfg.no_wrap {
            let (l, r) = self.cfg.profile.far_field();
            Some(0.5 * (l + r))
        } else {
            None
        }
    }

    /// Measure of the comparison region `|u|_∞ < W/4`.
    pub fn window_measure(&self) -> f64 {
        (0.5 * self.cfg.window_factor).powi(self.cfg.dim as i32)
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.cfg.workers)
            .build()
            .map_err(|e| Error::Config(format!("worker pool: {e}")))
    }

    /// Replicas of the particle system sampled at every snapshot time.
    pub fn run_ensemble(&self) -> Result<Ensemble> {
        let cfg = &self.cfg;
        let cells = cfg.comparison_cells();
        let pool = self.pool()?;
        let mut snapshots = Vec::new();
        let mut events = Vec::new();
        for &n in &cfg.n_list {
            let side = torus_side(n, cfg.window_factor)?;
            let torus = Torus::new(cfg.dim, side, cfg.no_wrap)?;
            let kernel = Arc::new(self.kernel((side / 2) as u32)?);
            let law = InitialLaw::from_profile(&self.equilibrium, &cfg.profile, &torus, n, self.seam_value())?;
            let l = self.block_size(n);
            let sites = torus.sites();
            let times = cfg.t_snapshots.len();
            let mut sum = vec![vec![0.0; sites]; times];
            let mut sum_sq = vec![vec![0.0; sites]; times];
            let mut coarse = vec![Vec::with_capacity(cfg.replicas as usize); times];
            let mut totals = EventTotals {
                n,
                proposals: 0,
                accepted: 0,
            };
            let chunk = (4 * pool.current_num_threads()).max(8) as u64;
            let mut start = 0;
            while start < cfg.replicas {
                let end = (start + chunk).min(cfg.replicas);
                let outs: Vec<Result<ReplicaOut>> = pool.install(|| {
                    (start..end)
                        .into_par_iter()
                        .map(|r| self.replica(n, r, &torus, &kernel, &law, l, cells))
                        .collect()
                });
                for out in outs {
                    let out = out?;
                    for (k, field) in out.fields.iter().enumerate() {
                        for (s, v) in field.iter().enumerate() {
                            sum[k][s] += v;
                            sum_sq[k][s] += v * v;
                        }
                    }
                    for (k, c) in out.coarse.into_iter().enumerate() {
                        coarse[k].push(c);
                    }
                    totals.proposals += out.proposals;
                    totals.accepted += out.accepted;
                }
                start = end;
            }
            let r = cfg.replicas as f64;
            for (k, &t) in cfg.t_snapshots.iter().enumerate() {
                let mean: Vec<f64> = sum[k].iter().map(|s| s / r).collect();
                let stderr = sum_sq[k]
                    .iter()
                    .zip(&mean)
                    .map(|(sq, m)| {
                        if cfg.replicas < 2 {
                            0.0
                        } else {
                            ((sq - r * m * m).max(0.0) / (r - 1.0) / r).sqrt()
                        }
                    })
                    .collect();
                snapshots.push(Snapshot {
                    n,
                    t,
                    l,
                    side,
                    dim: cfg.dim,
                    site_mean: mean,
                    site_stderr: stderr,
                    coarse: std::mem::take(&mut coarse[k]),
                });
            }
            events.push(totals);
        }
        Ok(Ensemble { snapshots, events })
    }

    #[allow(clippy::too_many_arguments)]
    fn replica(
        &self,
        n: u64,
        r: u64,
        torus: &Torus,
        kernel: &Arc<JumpKernel>,
        law: &InitialLaw,
        l: usize,
        cells: usize,
    ) -> Result<ReplicaOut> {
        let mut rng = replica_rng(self.cfg.seed, n, r);
        let occupancy = law.sample(&mut rng);
        let mut conf = Configuration::new(torus.clone(), self.model.clone(), kernel.clone(), occupancy, n)?;
        let mut fields = Vec::with_capacity(self.cfg.t_snapshots.len());
        let mut coarse = Vec::with_capacity(self.cfg.t_snapshots.len());
        for &t in &self.cfg.t_snapshots {
            conf.run_until(t, self.cfg.budget, &mut rng, &mut ())?;
            let field = conf.block_average(l);
            coarse.push(field.coarse(cells));
            fields.push(field.values);
        }
        let stats = conf.stats();
        Ok(ReplicaOut {
            fields,
            coarse,
            proposals: stats.proposals,
            accepted: stats.accepted,
        })
    }

    /// Initial data for the solver: the profile at cell centres, blended at
    /// the seam exactly as the particle system's initial law.
    pub fn initial_grid(&self) -> Result<GridField> {
        let cfg = &self.cfg;
        let mut grid = GridField::from_profile(&cfg.profile, cfg.dim, cfg.solver_cells, cfg.window_factor)?;
        if let Some(star) = self.seam_value() {
            let half = 0.5 * cfg.window_factor;
            let n = cfg.solver_cells;
            for (i, v) in grid.values.iter_mut().enumerate() {
                let u: Vec<f64> = (0..cfg.dim)
                    .map(|k| grid.lo + ((i / n.pow(k as u32)) % n) as f64 * grid.du + 0.5 * grid.du)
                    .collect();
                *v = flatten_near_seam(*v, &u, half, star);
            }
        }
        Ok(grid)
    }

    /// The macroscopic solution at every snapshot time.
    pub fn solve(&self) -> Result<Solution> {
        let cfg = &self.cfg;
        let mut current = self.initial_grid()?;
        let mut fields = Vec::with_capacity(cfg.t_snapshots.len());
        let mut stats = SolverStats {
            cells: cfg.solver_cells,
            ..SolverStats::default()
        };
        match cfg.branch() {
            ScaleBranch::Anomalous => {
                stats.kind = "nonlocal".into();
                let spec = self.nonlocal_spec();
                let mass0 = current.mass();
                for &t in &cfg.t_snapshots {
                    let run = evolve_nonlocal(&current, &self.table, &spec, t, cfg.safety)?;
                    stats.steps += run.steps;
                    stats.dt = run.dt;
                    stats.clamps += run.clamps;
                    current = run.field;
                    fields.push(current.clone());
                }
                if spec.periodic {
                    stats.conservation_drift = (current.mass() - mass0).abs();
                }
            }
            ScaleBranch::Euler | ScaleBranch::Log => {
                stats.kind = "entropy".into();
                let flux = self.flux()?;
                for &t in &cfg.t_snapshots {
                    let run = entropy_solve(&current, &flux, t, cfg.cfl)?;
                    stats.steps += run.steps;
                    stats.dt = run.dt;
                    stats.conservation_drift += run.conservation_drift;
                    current = run.field;
                    fields.push(current.clone());
                }
            }
        }
        stats.min = fields.iter().map(|f| f.min()).fold(f64::INFINITY, f64::min);
        stats.max = fields.iter().map(|f| f.max()).fold(f64::NEG_INFINITY, f64::max);
        Ok(Solution { fields, stats })
    }

    pub fn manifest(&self, command: &str) -> Manifest {
        let cfg = &self.cfg;
        Manifest {
            program: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config: cfg.clone(),
            branch: cfg.branch(),
            scales: cfg
                .n_list
                .iter()
                .map(|&n| GammaEntry {
                    n,
                    gamma_n: gamma_n_scale(cfg.alpha, n),
                    block: self.block_size(n),
                    sites_per_axis: torus_side(n, cfg.window_factor).unwrap_or(0),
                })
                .collect(),
            pde_gamma: self.pde_gamma().ok(),
            comparison_cells: cfg.comparison_cells(),
            window_measure: self.window_measure(),
            table_rho_max: self.table.rho_max(),
            events: Vec::new(),
            solver: None,
        }
    }

    /// Ensemble, solver, and their `L1` distances over the central half of
    /// the window at every `(N, t)`, with jackknife standard errors.
    pub fn compare(&self) -> Result<ConvergenceReport> {
        let cfg = &self.cfg;
        if cfg.n_list.is_empty() {
            return Err(Error::Config("compare needs a nonempty n_list".into()));
        }
        let clock = Instant::now();
        let solution = self.solve()?;
        let solver_seconds = clock.elapsed().as_secs_f64();
        let clock = Instant::now();
        let ensemble = self.run_ensemble()?;
        let ensemble_seconds = clock.elapsed().as_secs_f64();
        let cells = cfg.comparison_cells();
        let reference: Vec<GridField> = solution
            .fields
            .iter()
            .map(|f| f.coarse(cells))
            .collect::<Result<_>>()?;
        let radius = 0.25 * cfg.window_factor;
        let mut rows = Vec::new();
        for snap in &ensemble.snapshots {
            let k = cfg.t_snapshots.iter().position(|&t| t == snap.t).expect("snapshot time");
            let target = &reference[k];
            let l1_of = |values: &[f64]| target.l1_within(values, radius);
            let mean = snap.coarse_mean();
            let l1 = l1_of(&mean);
            let l1_stderr = jackknife(&snap.coarse, &l1_of);
            rows.push(L1Row {
                n: snap.n,
                t: snap.t,
                l1,
                l1_stderr,
            });
        }
        let weak = self.weak_rows(&ensemble, &reference)?;
        let mut manifest = self.manifest("compare");
        manifest.events = ensemble.events.clone();
        manifest.solver = Some(solution.stats.clone());
        Ok(ConvergenceReport {
            rows,
            weak,
            manifest,
            timing: Timing {
                ensemble_seconds,
                solver_seconds,
            },
            ensemble: Some(ensemble),
            solution: Some(solution),
        })
    }

    pub fn weak_tests(&self) -> Vec<TestBump> {
        let horizon = *self.cfg.t_snapshots.last().expect("snapshots");
        self.cfg
            .weak_tests
            .iter()
            .map(|w| TestBump {
                horizon,
                center: w.center,
                width: w.width,
            })
            .collect()
    }

    /// Weak residuals of each ensemble mean and of the solver, all on the
    /// comparison grid and snapshot times.
    fn weak_rows(&self, ensemble: &Ensemble, reference: &[GridField]) -> Result<Vec<WeakRow>> {
        let cfg = &self.cfg;
        let tests = self.weak_tests();
        if tests.is_empty() {
            return Ok(Vec::new());
        }
        if cfg.dim != 1 || cfg.t_snapshots[0] != 0.0 {
            return Err(Error::Config("weak tests need dim = 1 and a snapshot at t = 0".into()));
        }
        let residual = |history: &FieldHistory, g: &TestBump| -> Result<f64> {
            match cfg.branch() {
                ScaleBranch::Anomalous => weak_residual_nonlocal(history, &self.table, &self.nonlocal_spec(), g),
                _ => weak_residual_conservation(history, &self.flux()?, g),
            }
        };
        let mut rows = Vec::new();
        let solver = FieldHistory::new(reference.to_vec())?;
        for (k, g) in tests.iter().enumerate() {
            rows.push(WeakRow {
                source: 0,
                test: k,
                residual: residual(&solver, g)?,
            });
        }
        for &n in &cfg.n_list {
            let fields = ensemble
                .snapshots
                .iter()
                .filter(|s| s.n == n)
                .zip(reference)
                .map(|(s, r)| {
                    let mut f = r.clone();
                    f.values = s.coarse_mean();
                    f
                })
                .collect();
            let history = FieldHistory::new(fields)?;
            for (k, g) in tests.iter().enumerate() {
                rows.push(WeakRow {
                    source: n,
                    test: k,
                    residual: residual(&history, g)?,
                });
            }
        }
        Ok(rows)
    }

    /// Unordered-pair time integrals for the pair started from the profile
    /// and the constant `c`.
    pub fn ordering(&self) -> Result<Vec<OrderingRow>> {
        let cfg = &self.cfg;
        let c = cfg.c.ok_or_else(|| Error::Config("the ordering experiment needs `c`".into()))?;
        if cfg.n_list.is_empty() {
            return Err(Error::Config("the ordering experiment needs a nonempty n_list".into()));
        }
        let setup = OrderingSetup {
            dim: cfg.dim,
            alpha: cfg.alpha,
            window_factor: cfg.window_factor,
            region_radius: cfg.region_radius,
            d_list: cfg.d_list.clone(),
            t: cfg.coupling_t.unwrap_or(*cfg.t_snapshots.last().expect("snapshots")),
            replicas: cfg.replicas,
            seed: cfg.seed,
            seam_value: self.seam_value(),
            budget: cfg.budget,
        };
        self.pool()?
            .install(|| ordering_experiment(&self.model, &self.equilibrium, &cfg.profile, c, &cfg.n_list, &setup))
    }

    /// `(ρ, λ, Φ, Ψ, ΦΨ)` on `table_points` nodes of `[0, rho_max]`.
    pub fn equilibrium_rows(&self) -> Vec<EquilibriumRow> {
        let t = &self.table;
        t.rho
            .iter()
            .zip(&t.lambda)
            .zip(t.phi.ys().iter().zip(t.psi.ys()))
            .map(|((&rho, &lambda), (&phi, &psi))| EquilibriumRow {
                rho,
                lambda,
                phi,
                psi,
                flux: phi * psi,
            })
            .collect()
    }
}

struct ReplicaOut {
    fields: Vec<Vec<f64>>,
    coarse: Vec<Vec<f64>>,
    proposals: u64,
    accepted: u64,
}

fn default_rho_max(eq: &EquilibriumTable, hi: f64) -> f64 {
    if let Some(m0) = eq.model().m0() {
        return m0 as f64;
    }
    let rho_c = eq.rho_c();
    if rho_c.is_finite() {
        hi + 0.5 * (rho_c - hi)
    } else {
        (2.0 * hi).max(hi + 1.0)
    }
}

fn mean_rows(rows: &[Vec<f64>]) -> Vec<f64> {
    let mut out = vec![0.0; rows.first().map_or(0, |r| r.len())];
    for r in rows {
        for (o, v) in out.iter_mut().zip(r) {
            *o += v;
        }
    }
    let n = rows.len().max(1) as f64;
    out.iter_mut().for_each(|o| *o /= n);
    out
}

/// Jackknife standard error of `stat(mean of rows)`.
pub fn jackknife(rows: &[Vec<f64>], stat: &dyn Fn(&[f64]) -> f64) -> f64 {
    let r = rows.len();
    if r < 2 {
        return 0.0;
    }
    let total: Vec<f64> = {
        let m = mean_rows(rows);
        m.iter().map(|v| v * r as f64).collect()
    };
    let loo: Vec<f64> = rows
        .iter()
        .map(|row| {
            let m: Vec<f64> = total.iter().zip(row).map(|(s, v)| (s - v) / (r - 1) as f64).collect();
            stat(&m)
        })
        .collect();
    let mean = loo.iter().sum::<f64>() / r as f64;
    let var = loo.iter().map(|v| (v - mean).powi(2)).sum::<f64>() * (r - 1) as f64 / r as f64;
    var.sqrt()
}

/// Runs the full comparison for a configuration.
pub fn run_hydro_experiment(cfg: ExperimentConfig) -> Result<ConvergenceReport> {
    Experiment::new(cfg)?.compare()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(extra: &str) -> ExperimentConfig {
        ExperimentConfig::from_toml(&format!(
            r#"
model = "exclusion"
alpha = 2.0
n_list = [8, 16]
replicas = 4
solver_cells = 256
t_snapshots = [0.0, 0.1]
profile = {{ shape = "bump", rho_star = 0.2, amplitude = 0.4, width = 0.8 }}
{extra}
"#
        ))
        .unwrap()
    }

    #[test]
    fn jackknife_of_the_mean_is_the_standard_error() {
        let rows: Vec<Vec<f64>> = [1.0, 2.0, 4.0, 7.0].iter().map(|&v| vec![v]).collect();
        let se = jackknife(&rows, &|m| m[0]);
        let values = [1.0, 2.0, 4.0, 7.0];
        let mean = 3.5;
        let var = values.iter().map(|v: &f64| (v - mean).powi(2)).sum::<f64>() / 3.0;
        assert!((se - (var / 4.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn comparison_is_deterministic_and_aligned() {
        let exp = Experiment::new(small("")).unwrap();
        let a = exp.compare().unwrap();
        let b = exp.compare().unwrap();
        assert_eq!(a.rows, b.rows);
        assert_eq!(a.rows.len(), 4);
        assert!(a.rows.iter().all(|r| r.l1 >= 0.0 && r.l1_stderr >= 0.0));
        assert_eq!(a.manifest.events, b.manifest.events);
        let snap = &a.ensemble.as_ref().unwrap().snapshots[0];
        assert_eq!(snap.coarse[0].len(), 32);
        assert_eq!(snap.site_mean.len(), 32);
    }

    #[test]
    fn pde_gamma_branches() {
        let euler = Experiment::new(small("")).unwrap();
        assert!((euler.pde_gamma().unwrap() - std::f64::consts::PI.powi(2) / 6.0).abs() < 1e-9);
        let log = Experiment::new(small("").clone()).map(|mut e| {
            e.cfg.alpha = 1.0;
            e
        });
        assert!((log.unwrap().pde_gamma().unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn default_table_range() {
        let exp = Experiment::new(small("")).unwrap();
        assert_eq!(exp.table.rho_max(), 1.0);
        let mut cfg = small("");
        cfg.model = ModelName::ZeroRange;
        assert_eq!(Experiment::new(cfg).unwrap().table.rho_max(), 1.6);
    }
}
