//! Event-driven Monte Carlo of the decomposable misanthrope process on a
//! finite torus.
//!
//! Proposals are generated by thinning: a global exponential clock at rate
//! `h_sup · W · Σ_x ĝ(η(x))`, a site chosen with probability `∝ ĝ(η(x))`, a
//! displacement drawn from the truncated kernel, and acceptance with
//! probability `g(η(x)) h(η(y)) / (ĝ(η(x)) h_sup)`. Here `ĝ ≥ g` is the
//! fixed-point weight held in the prefix-sum index; `ĝ = g` whenever `g` is
//! integer valued.

mod fenwick;
mod field;
mod init;
mod torus;

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::Serialize;

pub use fenwick::Fenwick;
pub use field::{block_average, coarse_grain, young_histogram, EmpiricalField, YoungHistogram};
pub use init::InitialLaw;
pub use torus::{Torus, MAX_DIM};

use crate::equilibrium::EquilibriumTable;
use crate::error::{Error, Result};
use crate::kernel::{gamma_n_scale, JumpKernel};
use crate::model::RateModel;
use crate::profile::Profile;

/// Fixed-point site weights `ĝ(k) = ⌈g(k)·scale⌉ / scale`.
#[derive(Clone, Debug)]
pub(crate) struct SiteWeight {
    scale: f64,
    exact: bool,
    cache: Vec<u64>,
}

impl SiteWeight {
    /// Chooses a scale so that the weights of `particles` particles on
    /// `sites` sites sum below `2^62`.
    pub(crate) fn new(model: &RateModel, particles: u64, sites: usize) -> Self {
        let k_max = particles.min(u32::MAX as u64) as u32;
        let cached = (k_max as usize).min(1 << 16) + 1;
        if model.g_is_integral(k_max) {
            let cache = (0..cached as u32).map(|k| model.g(k) as u64).collect();
            return SiteWeight {
                scale: 1.0,
                exact: true,
                cache,
            };
        }
        let bound = model.kappa() * particles as f64 + sites as f64;
        let exp = (2f64.powi(60) / bound.max(1.0)).log2().floor().clamp(0.0, 40.0);
        let scale = 2f64.powf(exp);
        let cache = (0..cached as u32)
            .map(|k| (model.g(k) * scale).ceil() as u64)
            .collect();
        SiteWeight {
            scale,
            exact: false,
            cache,
        }
    }

    #[inline]
    pub(crate) fn weight(&self, model: &RateModel, k: u32) -> u64 {
        match self.cache.get(k as usize) {
            Some(&w) => w,
            None if self.exact => model.g(k) as u64,
            None => (model.g(k) * self.scale).ceil() as u64,
        }
    }

    pub(crate) fn scale(&self) -> f64 {
        self.scale
    }

    pub(crate) fn exact(&self) -> bool {
        self.exact
    }
}

/// One proposal of the thinned dynamics.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Event {
    pub origin: usize,
    /// Index into the kernel's displacement table.
    pub displacement: usize,
    /// `None` when the jump left the window in `no_wrap` mode.
    pub target: Option<usize>,
    pub accepted: bool,
}

/// Hooks called during [`Configuration::run_until`]; used for incremental
/// time integrals.
pub trait Observer {
    /// The configuration is held unchanged for `dt` micro time units.
    fn hold(&mut self, _config: &Configuration, _dt: f64) {}
    fn before_move(&mut self, _config: &Configuration, _from: usize, _to: usize) {}
    fn after_move(&mut self, _config: &Configuration, _from: usize, _to: usize) {}
}

impl Observer for () {}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct RunStats {
    pub proposals: u64,
    pub accepted: u64,
}

impl RunStats {
    pub fn acceptance_ratio(&self) -> f64 {
        if self.proposals == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposals as f64
        }
    }
}

#[derive(Clone, Debug)]
pub struct Configuration {
    torus: Torus,
    model: Arc<RateModel>,
    kernel: Arc<JumpKernel>,
    occupancy: Vec<u32>,
    index: Fenwick,
    weight: SiteWeight,
    /// `h_sup · W_trunc / scale`: clock rate per unit of index weight.
    unit_rate: f64,
    particles: u64,
    scale_n: u64,
    gamma_n: f64,
    micro_time: f64,
    stats: RunStats,
}

impl Configuration {
    pub fn new(
        torus: Torus,
        model: Arc<RateModel>,
        kernel: Arc<JumpKernel>,
        occupancy: Vec<u32>,
        scale_n: u64,
    ) -> Result<Self> {
        if occupancy.len() != torus.sites() {
            return Err(Error::domain("occupancy length does not match the torus"));
        }
        if kernel.dim() != torus.dim() {
            return Err(Error::domain("kernel and torus dimensions differ"));
        }
        if scale_n < 2 {
            return Err(Error::domain("scaling parameter N must be at least 2"));
        }
        if let Some(m0) = model.m0() {
            if let Some(k) = occupancy.iter().find(|&&k| k > m0) {
                return Err(Error::domain(format!("occupancy {k} exceeds M0 = {m0}")));
            }
        }
        let particles: u64 = occupancy.iter().map(|&k| k as u64).sum();
        let weight = SiteWeight::new(&model, particles, torus.sites());
        let weights: Vec<u64> = occupancy.iter().map(|&k| weight.weight(&model, k)).collect();
        let unit_rate = model.h_sup() * kernel.total_rate().truncated / weight.scale();
        Ok(Configuration {
            gamma_n: gamma_n_scale(kernel.alpha(), scale_n),
            torus,
            index: Fenwick::from_weights(&weights),
            model,
            kernel,
            occupancy,
            weight,
            unit_rate,
            particles,
            scale_n,
            micro_time: 0.0,
            stats: RunStats::default(),
        })
    }

    pub fn torus(&self) -> &Torus {
        &self.torus
    }

    pub fn model(&self) -> &RateModel {
        &self.model
    }

    pub fn kernel(&self) -> &JumpKernel {
        &self.kernel
    }

    pub fn occupancy(&self) -> &[u32] {
        &self.occupancy
    }

    pub fn particles(&self) -> u64 {
        self.particles
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

    pub fn stats(&self) -> RunStats {
        self.stats
    }

    /// Sum of `ĝ(η(x))` in index units, as maintained incrementally.
    pub fn index_total(&self) -> u64 {
        self.index.total()
    }

    /// The same sum recomputed from the occupancies.
    pub fn recomputed_total(&self) -> u64 {
        self.occupancy
            .iter()
            .map(|&k| self.weight.weight(&self.model, k))
            .sum()
    }

    /// Total proposal rate `h_sup · W · Σ ĝ(η(x))`.
    pub fn proposal_rate(&self) -> f64 {
        self.index.total() as f64 * self.unit_rate
    }

    pub fn block_average(&self, l: usize) -> EmpiricalField {
        block_average(&self.torus, &self.occupancy, l)
    }

    /// One clock ring: advances time and applies a proposal. A frozen
    /// configuration moves its clock to `+∞` and returns `None`.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Option<Event> {
        let rate = self.proposal_rate();
        if rate == 0.0 {
            self.micro_time = f64::INFINITY;
            return None;
        }
        let wait: f64 = Exp1.sample(rng);
        self.micro_time += wait / rate;
        Some(self.propose(rng, &mut ()))
    }

    fn propose<R: Rng + ?Sized, O: Observer + ?Sized>(&mut self, rng: &mut R, obs: &mut O) -> Event {
        let x = self.index.find(rng.random_range(0..self.index.total()));
        let di = self.kernel.sample_index(rng);
        self.stats.proposals += 1;
        let target = self.torus.target(x, self.kernel.offset(di));
        let accepted = match target {
            Some(y) if self.accept(x, y, rng) => {
                obs.before_move(self, x, y);
                self.apply_move(x, y);
                self.stats.accepted += 1;
                obs.after_move(self, x, y);
                true
            }
            _ => false,
        };
        Event {
            origin: x,
            displacement: di,
            target,
            accepted,
        }
    }

    #[inline]
    fn accept<R: Rng + ?Sized>(&self, x: usize, y: usize, rng: &mut R) -> bool {
        let h = self.model.h(self.occupancy[y]);
        if h <= 0.0 {
            return false;
        }
        let h_sup = self.model.h_sup();
        if self.weight.exact() && h >= h_sup {
            return true;
        }
        let k = self.occupancy[x];
        let g_hat = self.weight.weight(&self.model, k) as f64 / self.weight.scale();
        let u: f64 = rng.random();
        u * h_sup * g_hat < self.model.g(k) * h
    }

    fn apply_move(&mut self, x: usize, y: usize) {
        debug_assert!(self.occupancy[x] > 0);
        self.occupancy[x] -= 1;
        self.occupancy[y] += 1;
        if let Some(m0) = self.model.m0() {
            assert!(self.occupancy[y] <= m0, "occupancy exceeded M0 = {m0} at site {y}");
        }
        let wx = self.weight.weight(&self.model, self.occupancy[x]);
        let wy = self.weight.weight(&self.model, self.occupancy[y]);
        self.index.set(x, wx);
        self.index.set(y, wy);
    }

    /// Runs until macroscopic time `t_macro` (micro time `t_macro · γ_N`).
    /// Fails with a budget error after `budget` proposals in this call,
    /// leaving the partial state in place.
    pub fn run_until<R: Rng + ?Sized, O: Observer + ?Sized>(
        &mut self,
        t_macro: f64,
        budget: u64,
        rng: &mut R,
        obs: &mut O,
    ) -> Result<RunStats> {
        let end = t_macro * self.gamma_n;
        let before = self.stats;
        let mut used = 0u64;
        while self.micro_time < end {
            let rate = self.proposal_rate();
            if rate == 0.0 {
                obs.hold(self, end - self.micro_time);
                self.micro_time = end;
                break;
            }
            let wait: f64 = Exp1.sample(rng);
            let dt = wait / rate;
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
        Ok(RunStats {
            proposals: self.stats.proposals - before.proposals,
            accepted: self.stats.accepted - before.accepted,
        })
    }
}

/// Builds a configuration drawn from the product law of a profile on a torus
/// of side `window_factor · N`, with the kernel truncated at `side/2`.
#[allow(clippy::too_many_arguments)]
pub fn init_from_profile<R: Rng + ?Sized>(
    model: Arc<RateModel>,
    table: &EquilibriumTable,
    profile: &Profile,
    dim: usize,
    alpha: f64,
    scale_n: u64,
    window_factor: f64,
    no_wrap: bool,
    seam_value: Option<f64>,
    rng: &mut R,
) -> Result<Configuration> {
    let side = torus_side(scale_n, window_factor)?;
    let torus = Torus::new(dim, side, no_wrap)?;
    let kernel = Arc::new(JumpKernel::new(dim, alpha, (side / 2) as u32)?);
    let seam = if no_wrap { None } else { seam_value };
    let law = InitialLaw::from_profile(table, profile, &torus, scale_n, seam)?;
    let occupancy = law.sample(rng);
    Configuration::new(torus, model, kernel, occupancy, scale_n)
}

/// Independent deterministic stream for one replica of one experiment cell;
/// `tag` separates cells such as different `N`.
pub fn replica_rng(seed: u64, tag: u64, replica: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(replica);
    rng
}

/// `round(window_factor · N)`, rounded up to an even number.
pub fn torus_side(scale_n: u64, window_factor: f64) -> Result<usize> {
    if !(window_factor >= 1.0) || !window_factor.is_finite() {
        return Err(Error::domain("window factor must be at least 1"));
    }
    let side = (window_factor * scale_n as f64).round() as usize;
    Ok(side + side % 2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(side: usize, alpha: f64, model: RateModel, occ: Vec<u32>, no_wrap: bool) -> Configuration {
        let torus = Torus::new(1, side, no_wrap).unwrap();
        let kernel = JumpKernel::new(1, alpha, (side / 2) as u32).unwrap();
        Configuration::new(torus, Arc::new(model), Arc::new(kernel), occ, 16).unwrap()
    }

    #[test]
    fn mass_conservation_and_index_consistency() {
        let occ: Vec<u32> = (0..64).map(|i| (i % 4) as u32).collect();
        let mut c = line(64, 0.7, RateModel::zero_range(), occ, false);
        let total = c.particles();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100_000 {
            c.step(&mut rng);
        }
        assert_eq!(c.occupancy().iter().map(|&k| k as u64).sum::<u64>(), total);
        assert_eq!(c.index_total(), c.recomputed_total());
        assert!(c.stats().accepted == c.stats().proposals);
    }

    #[test]
    fn fractional_rates_keep_the_index_consistent() {
        let g = vec![0.0, 0.7, 1.1, 1.3];
        let h = vec![1.0, 0.6, 0.5, 0.5];
        let model = RateModel::tabulated(g, h).unwrap();
        let occ: Vec<u32> = (0..32).map(|i| (i % 3) as u32).collect();
        let mut c = line(32, 1.5, model, occ, false);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50_000 {
            c.step(&mut rng);
        }
        assert_eq!(c.index_total(), c.recomputed_total());
        assert!(c.stats().acceptance_ratio() < 1.0);
    }

    #[test]
    fn exclusion_respects_the_ceiling() {
        let occ: Vec<u32> = (0..50).map(|i| (i % 2) as u32).collect();
        let mut c = line(50, 1.2, RateModel::exclusion(), occ, false);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100_000 {
            c.step(&mut rng);
            assert!(c.occupancy().iter().all(|&k| k <= 1));
        }
        assert_eq!(c.particles(), 25);
    }

    #[test]
    fn frozen_configuration() {
        let mut c = line(16, 0.5, RateModel::zero_range(), vec![0; 16], false);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let stats = c.run_until(3.0, 10, &mut rng, &mut ()).unwrap();
        assert_eq!(stats, RunStats::default());
        assert!((c.macro_time() - 3.0).abs() < 1e-12);
        assert!(c.step(&mut rng).is_none());
    }

    #[test]
    fn no_time_no_events() {
        let occ: Vec<u32> = (0..16).map(|i| (i % 2) as u32).collect();
        let mut c = line(16, 0.5, RateModel::zero_range(), occ.clone(), false);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = c.run_until(0.0, 0, &mut rng, &mut ()).unwrap();
        assert_eq!(s.proposals, 0);
        assert_eq!(c.occupancy(), &occ[..]);
    }

    #[test]
    fn budget_error_keeps_partial_state() {
        let occ = vec![1u32; 32];
        let mut c = line(32, 0.5, RateModel::zero_range(), occ, false);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        match c.run_until(100.0, 500, &mut rng, &mut ()) {
            Err(Error::Budget { budget, micro_time }) => {
                assert_eq!(budget, 500);
                assert!(micro_time > 0.0 && micro_time == c.micro_time());
            }
            other => panic!("expected a budget error, got {other:?}"),
        }
        assert_eq!(c.stats().proposals, 500);
    }

    #[test]
    fn seeds_determine_trajectories() {
        let run = |seed| {
            let occ: Vec<u32> = (0..40).map(|i| (i % 3 == 0) as u32).collect();
            let mut c = line(40, 1.5, RateModel::exclusion(), occ, false);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            c.run_until(2.0, u64::MAX, &mut rng, &mut ()).unwrap();
            c.occupancy().to_vec()
        };
        assert_eq!(run(9), run(9));
        assert_ne!(run(9), run(10));
    }

    #[test]
    fn packed_block_is_frozen_without_wrap() {
        let occ: Vec<u32> = (0..64).map(|i| (i >= 32) as u32).collect();
        let mut c = line(64, 0.5, RateModel::exclusion(), occ.clone(), true);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let s = c.run_until(1.0, u64::MAX, &mut rng, &mut ()).unwrap();
        assert!(s.proposals > 0);
        assert_eq!(s.accepted, 0);
        assert_eq!(c.occupancy(), &occ[..]);
    }

    #[test]
    fn single_particle_moves_like_the_kernel() {
        let mut occ = vec![0u32; 64];
        occ[10] = 1;
        let mut c = line(64, 0.8, RateModel::zero_range(), occ, false);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..1000 {
            let e = c.step(&mut rng).unwrap();
            assert!(e.accepted);
        }
    }
}
