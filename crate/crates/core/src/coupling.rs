//! Basic coupling of two misanthrope configurations on one torus.
//!
//! A site is proposed with weight `max(ĝ(η(x)), ĝ(ξ(x)))`, a displacement is
//! drawn from the kernel, and a single uniform `U` on `[0, ĝ_max h_sup)` is
//! routed through the three generator branches: `U < min(r_η, r_ξ)` moves
//! both, `U < max(r_η, r_ξ)` moves the faster one alone, otherwise nothing
//! moves. Here `r = g(occupancy at x) · h(occupancy at x+d)`.

use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::Serialize;

use crate::equilibrium::EquilibriumTable;
use crate::error::{Error, Result};
use crate::kernel::{gamma_n_scale, JumpKernel};
use crate::model::RateModel;
use crate::profile::Profile;
use crate::simulator::{replica_rng, torus_side, Fenwick, InitialLaw, SiteWeight, Torus};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Branch {
    Joint,
    EtaOnly,
    XiOnly,
    Rejected,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CoupledEvent {
    pub origin: usize,
    pub displacement: usize,
    pub target: Option<usize>,
    pub branch: Branch,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct CoupledStats {
    pub proposals: u64,
    pub joint: u64,
    pub eta_only: u64,
    pub xi_only: u64,
}

/// Hooks for [`CoupledConfiguration::run_until`].
pub trait CoupledObserver {
    fn hold(&mut self, _cc: &CoupledConfiguration, _dt: f64) {}
    fn before_move(&mut self, _cc: &CoupledConfiguration, _from: usize, _to: usize) {}
    fn after_move(&mut self, _cc: &CoupledConfiguration, _from: usize, _to: usize) {}
}

impl CoupledObserver for () {}

#[derive(Clone, Debug)]
pub struct CoupledConfiguration {
    torus: Torus,
    model: Arc<RateModel>,
    kernel: Arc<JumpKernel>,
    eta: Vec<u32>,
    xi: Vec<u32>,
    index: Fenwick,
    weight: SiteWeight,
    unit_rate: f64,
    scale_n: u64,
    gamma_n: f64,
    micro_time: f64,
    /// Sites with `η > ξ` and with `η < ξ`.
    above: u64,
    below: u64,
    stats: CoupledStats,
}

impl CoupledConfiguration {
    pub fn new(
        torus: Torus,
        model: Arc<RateModel>,
        kernel: Arc<JumpKernel>,
        eta: Vec<u32>,
        xi: Vec<u32>,
        scale_n: u64,
    ) -> Result<Self> {
        if eta.len() != torus.sites() || xi.len() != torus.sites() {
            return Err(Error::domain("occupancy length does not match the torus"));
        }
        if kernel.dim() != torus.dim() {
            return Err(Error::domain("kernel and torus dimensions differ"));
        }
        if scale_n < 2 {
            return Err(Error::domain("scaling parameter N must be at least 2"));
        }
        if let Some(m0) = model.m0() {
            if eta.iter().chain(&xi).any(|&k| k > m0) {
                return Err(Error::domain(format!("occupancy exceeds M0 = {m0}")));
            }
        }
        let particles = eta
            .iter()
            .map(|&k| k as u64)
            .sum::<u64>()
            .max(xi.iter().map(|&k| k as u64).sum());
        let weight = SiteWeight::new(&model, particles, torus.sites());
        let weights: Vec<u64> = eta
            .iter()
            .zip(&xi)
            .map(|(&a, &b)| weight.weight(&model, a.max(b)))
            .collect();
        let above = eta.iter().zip(&xi).filter(|(a, b)| a > b).count() as u64;
        let below = eta.iter().zip(&xi).filter(|(a, b)| a < b).count() as u64;
        Ok(CoupledConfiguration {
            unit_rate: model.h_sup() * kernel.total_rate().truncated / weight.scale(),
            gamma_n: gamma_n_scale(kernel.alpha(), scale_n),
            index: Fenwick::from_weights(&weights),
            torus,
            model,
            kernel,
            eta,
            xi,
            weight,
            scale_n,
            micro_time: 0.0,
            above,
            below,
            stats: CoupledStats::default(),
        })
    }

    pub fn torus(&self) -> &Torus {
        &self.torus
    }

    pub fn eta(&self) -> &[u32] {
        &self.eta
    }

    pub fn xi(&self) -> &[u32] {
        &self.xi
    }

    pub fn scale_n(&self) -> u64 {
        self.scale_n
    }

    pub fn gamma_n(&self) -> f64 {
        self.gamma_n
    }

    pub fn micro_time(&self) -> f64 {
        self.micro_time
    }

    pub fn macro_time(&self) -> f64 {
        self.micro_time / self.gamma_n
    }

    pub fn stats(&self) -> CoupledStats {
        self.stats
    }

    /// `η ≥ ξ` or `ξ ≥ η` on the whole torus.
    pub fn is_ordered(&self) -> bool {
        self.above == 0 || self.below == 0
    }

    /// `Σ_x |η(x) − ξ(x)|`.
    pub fn discrepancy(&self) -> u64 {
        self.eta
            .iter()
            .zip(&self.xi)
            .map(|(&a, &b)| a.abs_diff(b) as u64)
            .sum()
    }

    pub fn proposal_rate(&self) -> f64 {
        self.index.total() as f64 * self.unit_rate
    }

    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Option<CoupledEvent> {
        let rate = self.proposal_rate();
        if rate == 0.0 {
            self.micro_time = f64::INFINITY;
            return None;
        }
        let wait: f64 = Exp1.sample(rng);
        self.micro_time += wait / rate;
        Some(self.propose(rng, &mut ()))
    }

    fn propose<R: Rng + ?Sized, O: CoupledObserver + ?Sized>(
        &mut self,
        rng: &mut R,
        obs: &mut O,
    ) -> CoupledEvent {
        let x = self.index.find(rng.random_range(0..self.index.total()));
        let di = self.kernel.sample_index(rng);
        self.stats.proposals += 1;
        let target = self.torus.target(x, self.kernel.offset(di));
        let branch = match target {
            None => Branch::Rejected,
            Some(y) => {
                let m = &self.model;
                let r_eta = m.g(self.eta[x]) * m.h(self.eta[y]);
                let r_xi = m.g(self.xi[x]) * m.h(self.xi[y]);
                let g_hat = self.index.get(x) as f64 / self.weight.scale();
                let u = rng.random::<f64>() * g_hat * m.h_sup();
                if u < r_eta.min(r_xi) {
                    Branch::Joint
                } else if u < r_eta.max(r_xi) {
                    if r_eta > r_xi {
                        Branch::EtaOnly
                    } else {
                        Branch::XiOnly
                    }
                } else {
                    Branch::Rejected
                }
            }
        };
        if let (Some(y), true) = (target, branch != Branch::Rejected) {
            let was_ordered = self.is_ordered();
            obs.before_move(self, x, y);
            self.apply(x, y, branch);
            obs.after_move(self, x, y);
            if was_ordered && self.model.is_attractive() {
                assert!(self.is_ordered(), "attractive coupling lost its order at {x} -> {y}");
            }
        }
        CoupledEvent {
            origin: x,
            displacement: di,
            target,
            branch,
        }
    }

    fn apply(&mut self, x: usize, y: usize, branch: Branch) {
        for s in [x, y] {
            self.untally(s);
        }
        if matches!(branch, Branch::Joint | Branch::EtaOnly) {
            self.eta[x] -= 1;
            self.eta[y] += 1;
        }
        if matches!(branch, Branch::Joint | Branch::XiOnly) {
            self.xi[x] -= 1;
            self.xi[y] += 1;
        }
        match branch {
            Branch::Joint => self.stats.joint += 1,
            Branch::EtaOnly => self.stats.eta_only += 1,
            Branch::XiOnly => self.stats.xi_only += 1,
            Branch::Rejected => {}
        }
        if let Some(m0) = self.model.m0() {
            assert!(self.eta[y] <= m0 && self.xi[y] <= m0, "occupancy exceeded M0 = {m0}");
        }
        for s in [x, y] {
            self.tally(s);
            let w = self.weight.weight(&self.model, self.eta[s].max(self.xi[s]));
            self.index.set(s, w);
        }
    }

    fn untally(&mut self, s: usize) {
        match self.eta[s].cmp(&self.xi[s]) {
            std::cmp::Ordering::Greater => self.above -= 1,
            std::cmp::Ordering::Less => self.below -= 1,
            std::cmp::Ordering::Equal => {}
        }
    }

    fn tally(&mut self, s: usize) {
        match self.eta[s].cmp(&self.xi[s]) {
            std::cmp::Ordering::Greater => self.above += 1,
            std::cmp::Ordering::Less => self.below += 1,
            std::cmp::Ordering::Equal => {}
        }
    }

    pub fn run_until<R: Rng + ?Sized, O: CoupledObserver + ?Sized>(
        &mut self,
        t_macro: f64,
        budget: u64,
        rng: &mut R,
        obs: &mut O,
    ) -> Result<CoupledStats> {
        let end = t_macro * self.gamma_n;
        let before = self.stats;
        let mut used = 0u64;
        while self.micro_time < end {
            let rate = self.proposal_rate();
            let dt = if rate == 0.0 {
                f64::INFINITY
            } else {
                { let w: f64 = Exp1.sample(rng); w / rate }
            };
            if self.micro_time + dt >= end {
                obs.hold(self, end - self.micro_time);
                self.micro_time = end;
                break;
            }
            if used == budget {
                return Err(Error::Budget {
                    budget,
                    micro_time: self.micro_time,
                });
            }
            obs.hold(self, dt);
            self.micro_time += dt;
            self.propose(rng, obs);
            used += 1;
        }
        Ok(CoupledStats {
            proposals: self.stats.proposals - before.proposals,
            joint: self.stats.joint - before.joint,
            eta_only: self.stats.eta_only - before.eta_only,
            xi_only: self.stats.xi_only - before.xi_only,
        })
    }
}

/// Comonotone pair: one uniform per site through both inverse cdfs, so each
/// site is ordered in the direction of its two means.
#[allow(clippy::too_many_arguments)]
pub fn init_ordered_pair<R: Rng + ?Sized>(
    model: Arc<RateModel>,
    kernel: Arc<JumpKernel>,
    table: &EquilibriumTable,
    profile: &Profile,
    c: f64,
    torus: Torus,
    scale_n: u64,
    seam_value: Option<f64>,
    rng: &mut R,
) -> Result<CoupledConfiguration> {
    let eta_law = InitialLaw::from_profile(table, profile, &torus, scale_n, seam_value)?;
    let xi_law = InitialLaw::from_densities(table, vec![c; torus.sites()])?;
    let uniforms: Vec<f64> = (0..torus.sites()).map(|_| rng.random::<f64>()).collect();
    let eta = eta_law.quantiles(&uniforms);
    let xi = xi_law.quantiles(&uniforms);
    CoupledConfiguration::new(torus, model, kernel, eta, xi, scale_n)
}

/// `U_{x,d}` and `O_{x,d}` evaluated on one pair of sites.
pub fn pair_status(eta: &[u32], xi: &[u32], x: usize, y: usize) -> (bool, i8) {
    let above = (eta[x] > xi[x]) as u8 + (eta[y] > xi[y]) as u8;
    let below = (eta[x] < xi[x]) as u8 + (eta[y] < xi[y]) as u8;
    if above > 0 && below > 0 {
        (true, 0)
    } else if above > 0 {
        (false, 1)
    } else if below > 0 {
        (false, -1)
    } else {
        (false, 0)
    }
}

/// Lattice box `|x|_∞ ≤ half_width` in lattice units, not wrapping.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Region {
    pub half_width: i64,
}

impl Region {
    /// `|x/N|_∞ ≤ radius`.
    pub fn macroscopic(radius: f64, scale_n: u64) -> Self {
        Region {
            half_width: (radius * scale_n as f64).floor() as i64,
        }
    }

    fn contains(&self, torus: &Torus, i: usize) -> bool {
        let x = torus.point(i);
        x[..torus.dim()].iter().all(|v| v.abs() <= self.half_width)
    }

    /// Origin and partner sites of every pair `(x, x+d)` inside the region.
    fn pair_sites(&self, torus: &Torus, x: usize, d: &[i32]) -> Option<usize> {
        if !self.contains(torus, x) {
            return None;
        }
        let p = torus.point(x);
        let mut q = [0i64; crate::simulator::MAX_DIM];
        for k in 0..torus.dim() {
            q[k] = p[k] + d[k] as i64;
            if q[k].abs() > self.half_width {
                return None;
            }
        }
        Some(torus.site_of_point(&q[..torus.dim()]))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct UnorderedCounts {
    pub d: Vec<i32>,
    /// `Σ U_{x,d}` over pairs inside the region.
    pub unordered: u64,
    /// `Σ O_{x,d}` over the same pairs.
    pub ordered_sum: i64,
}

pub fn unordered_statistics(
    cc: &CoupledConfiguration,
    d_list: &[Vec<i32>],
    region: Region,
) -> Vec<UnorderedCounts> {
    let torus = cc.torus();
    d_list
        .iter()
        .map(|d| {
            let mut unordered = 0;
            let mut ordered_sum = 0;
            for x in 0..torus.sites() {
                if let Some(y) = region.pair_sites(torus, x, d) {
                    let (u, o) = pair_status(cc.eta(), cc.xi(), x, y);
                    unordered += u as u64;
                    ordered_sum += o as i64;
                }
            }
            UnorderedCounts {
                d: d.clone(),
                unordered,
                ordered_sum,
            }
        })
        .collect()
}

/// Accumulates `∫ N^{-n} Σ_{x ∈ region} U_{x,d} ds` in macroscopic time,
/// updating the running counts only around the sites an event touches.
struct UnorderedIntegral {
    d_list: Vec<Vec<i32>>,
    region: Region,
    counts: Vec<u64>,
    integrals: Vec<f64>,
    norm: f64,
    touched: Vec<(usize, usize, usize)>,
}

impl UnorderedIntegral {
    fn new(cc: &CoupledConfiguration, d_list: &[Vec<i32>], region: Region) -> Self {
        let counts = unordered_statistics(cc, d_list, region)
            .iter()
            .map(|c| c.unordered)
            .collect();
        let n = cc.torus().dim() as i32;
        UnorderedIntegral {
            d_list: d_list.to_vec(),
            region,
            counts,
            integrals: vec![0.0; d_list.len()],
            norm: 1.0 / (cc.gamma_n() * (cc.scale_n() as f64).powi(n)),
            touched: Vec::new(),
        }
    }

    /// Pairs `(k, origin, partner)` with an endpoint at `a` or `b`.
    fn collect(&mut self, torus: &Torus, a: usize, b: usize) {
        self.touched.clear();
        for (k, d) in self.d_list.iter().enumerate() {
            let neg: Vec<i32> = d.iter().map(|&v| -v).collect();
            for s in [a, b] {
                if let Some(y) = self.region.pair_sites(torus, s, d) {
                    self.touched.push((k, s, y));
                }
                // s as the partner of s − d
                if let Some(origin) = self.region.pair_sites(torus, s, &neg) {
                    if self.region.pair_sites(torus, origin, d) == Some(s) {
                        self.touched.push((k, origin, s));
                    }
                }
            }
        }
        self.touched.sort_unstable();
        self.touched.dedup();
    }
}

impl CoupledObserver for UnorderedIntegral {
    fn hold(&mut self, _cc: &CoupledConfiguration, dt: f64) {
        for (acc, &c) in self.integrals.iter_mut().zip(&self.counts) {
            *acc += c as f64 * dt * self.norm;
        }
    }

    fn before_move(&mut self, cc: &CoupledConfiguration, from: usize, to: usize) {
        self.collect(cc.torus(), from, to);
        for &(k, x, y) in &self.touched {
            self.counts[k] -= pair_status(cc.eta(), cc.xi(), x, y).0 as u64;
        }
    }

    fn after_move(&mut self, cc: &CoupledConfiguration, _from: usize, _to: usize) {
        for &(k, x, y) in &self.touched {
            self.counts[k] += pair_status(cc.eta(), cc.xi(), x, y).0 as u64;
        }
    }
}

#[derive(Clone, Debug)]
pub struct OrderingSetup {
    pub dim: usize,
    pub alpha: f64,
    pub window_factor: f64,
    /// Macroscopic half-width of the counting region.
    pub region_radius: f64,
    pub d_list: Vec<Vec<i32>>,
    pub t: f64,
    pub replicas: u64,
    pub seed: u64,
    pub seam_value: Option<f64>,
    pub budget: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OrderingRow {
    #[serde(rename = "N")]
    pub n: u64,
    pub d: Vec<i32>,
    pub unordered_time_integral: f64,
    pub stderr: f64,
}

/// Replica means of `∫₀ᵗ N^{-n} Σ_{x ∈ region} U_{x,d}(η_s, ξ_s) ds` for each
/// `N` and each displacement, with standard errors over replicas.
pub fn ordering_experiment(
    model: &RateModel,
    table: &EquilibriumTable,
    profile: &Profile,
    c: f64,
    n_list: &[u64],
    setup: &OrderingSetup,
) -> Result<Vec<OrderingRow>> {
    let model = Arc::new(model.clone());
    let mut rows = Vec::new();
    for &n in n_list {
        let side = torus_side(n, setup.window_factor)?;
        let torus = Torus::new(setup.dim, side, false)?;
        let kernel = Arc::new(JumpKernel::new(setup.dim, setup.alpha, (side / 2) as u32)?);
        let eta_law = InitialLaw::from_profile(table, profile, &torus, n, setup.seam_value)?;
        let xi_law = InitialLaw::from_densities(table, vec![c; torus.sites()])?;
        let region = Region::macroscopic(setup.region_radius, n);
        let per_replica: Vec<Result<Vec<f64>>> = (0..setup.replicas)
            .into_par_iter()
            .map(|r| {
                let mut rng = replica_rng(setup.seed, n, r);
                let uniforms: Vec<f64> = (0..torus.sites()).map(|_| rng.random::<f64>()).collect();
                let mut cc = CoupledConfiguration::new(
                    torus.clone(),
                    model.clone(),
                    kernel.clone(),
                    eta_law.quantiles(&uniforms),
                    xi_law.quantiles(&uniforms),
                    n,
                )?;
                let mut obs = UnorderedIntegral::new(&cc, &setup.d_list, region);
                cc.run_until(setup.t, setup.budget, &mut rng, &mut obs)?;
                Ok(obs.integrals)
            })
            .collect();
        let per_replica: Vec<Vec<f64>> = per_replica.into_iter().collect::<Result<_>>()?;
        for (k, d) in setup.d_list.iter().enumerate() {
            let values: Vec<f64> = per_replica.iter().map(|v| v[k]).collect();
            let (mean, stderr) = mean_and_stderr(&values);
            rows.push(OrderingRow {
                n,
                d: d.clone(),
                unordered_time_integral: mean,
                stderr,
            });
        }
    }
    Ok(rows)
}

/// Sample mean and standard error of the mean.
pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let m = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / m;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1.0);
    (mean, (var / m).sqrt())
}
