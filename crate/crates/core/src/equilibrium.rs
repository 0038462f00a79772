//! Product invariant measures `ν_ρ = ⊗ Θ_ρ` of the misanthrope process.
//!
//! The single-site marginal at fugacity `λ` is
//! `Θ̄_λ(k) ∝ λ^k Π_{j<k} h(j) / Π_{j≤k} g(j)`, and `Θ_ρ = Θ̄_{λ(ρ)}` where
//! `λ(ρ)` inverts the (strictly increasing) mean `ρ(λ)`.
//!
//! Series are summed in log space and truncated adaptively at the smallest
//! `K` whose tail mass is below `eps_tail`. When `M₀ < ∞` the density
//! `ρ = M₀` is admitted as the `λ → ∞` limit, a point mass at `M₀`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::interp::Pchip;
use crate::model::{RateKind, RateModel};

pub const DEFAULT_EPS_TAIL: f64 = 1e-12;
const MAX_TERMS: usize = 1 << 22;
/// Past this many terms a non-decaying ratio is treated as divergence.
const DIVERGENCE_PROBE: usize = 1 << 16;
const BISECTION_MAX_ITERS: usize = 200;
pub const INVERSION_TOL: f64 = 1e-10;

/// Truncated, normalized single-site law at a fixed fugacity.
#[derive(Clone, Debug)]
pub struct Marginal {
    pub lambda: f64,
    /// `ln Z(λ)`, including the estimated tail beyond the truncation.
    pub log_z: f64,
    /// Probabilities over occupancies `0..=K`; sums to one.
    pub pmf: Vec<f64>,
    /// Estimated mass dropped beyond `K`.
    pub tail: f64,
}

impl Marginal {
    pub fn truncation(&self) -> usize {
        self.pmf.len() - 1
    }

    pub fn mean(&self) -> f64 {
        self.pmf.iter().enumerate().map(|(k, p)| k as f64 * p).sum()
    }

    pub fn expect(&self, f: impl Fn(u32) -> f64) -> f64 {
        self.pmf.iter().enumerate().map(|(k, p)| p * f(k as u32)).sum()
    }

    pub fn cdf(&self) -> Vec<f64> {
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = self
            .pmf
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        if let Some(last) = cdf.last_mut() {
            *last = 1.0;
        }
        cdf
    }
}

/// Inverse-cdf draw from a cumulative table.
#[inline]
pub fn sample_from_cdf<R: Rng + ?Sized>(cdf: &[f64], rng: &mut R) -> u32 {
    let u: f64 = rng.random();
    inverse_cdf(cdf, u)
}

#[inline]
pub fn inverse_cdf(cdf: &[f64], u: f64) -> u32 {
    cdf.partition_point(|&c| c <= u).min(cdf.len() - 1) as u32
}

#[derive(Clone, Debug)]
pub struct EquilibriumTable {
    model: RateModel,
    lambda_c: f64,
    lambda_c_estimated: bool,
    rho_c: f64,
    eps_tail: f64,
    /// `(λ, ln Z(λ), ρ(λ))` on a geometric grid, increasing in both λ and ρ.
    cache: Vec<(f64, f64, f64)>,
}

impl EquilibriumTable {
    pub fn new(model: RateModel) -> Result<Self> {
        Self::with_tail(model, DEFAULT_EPS_TAIL)
    }

    pub fn with_tail(model: RateModel, eps_tail: f64) -> Result<Self> {
        let (lambda_c, estimated) = critical_fugacity(&model);
        let rho_c = match model.m0() {
            Some(m0) => m0 as f64,
            None => f64::INFINITY,
        };
        let mut table = EquilibriumTable {
            model,
            lambda_c,
            lambda_c_estimated: estimated,
            rho_c,
            eps_tail,
            cache: Vec::new(),
        };
        table.cache = table.build_cache()?;
        Ok(table)
    }

    fn build_cache(&self) -> Result<Vec<(f64, f64, f64)>> {
        let grid: Vec<f64> = if self.lambda_c.is_finite() {
            let lc = self.lambda_c;
            let mut g: Vec<f64> = (1..=24).rev().map(|k| lc * 2f64.powi(-k)).collect();
            g.extend((2..=40).map(|k| lc * (1.0 - 2f64.powi(-k))));
            g
        } else {
            (-24..=12).map(|k| 2f64.powi(k)).collect()
        };
        let mut cache = vec![(0.0, 0.0, 0.0)];
        for lambda in grid {
            match self.marginal(lambda) {
                Ok(m) => cache.push((lambda, m.log_z, m.mean())),
                // near-critical points may exceed the term budget
                Err(Error::Convergence(_)) => break,
                Err(e) => return Err(e),
            }
        }
        Ok(cache)
    }

    pub fn model(&self) -> &RateModel {
        &self.model
    }

    /// Radius of convergence of `Z`; infinite when `M₀ < ∞`.
    pub fn lambda_c(&self) -> f64 {
        self.lambda_c
    }

    /// Whether `lambda_c` was estimated from a finite table.
    pub fn lambda_c_is_estimate(&self) -> bool {
        self.lambda_c_estimated
    }

    pub fn rho_c(&self) -> f64 {
        self.rho_c
    }

    pub fn eps_tail(&self) -> f64 {
        self.eps_tail
    }

    /// Largest admissible density: `M₀` when finite, otherwise unbounded.
    pub fn admits_density(&self, rho: f64) -> bool {
        rho >= 0.0 && (rho < self.rho_c || (self.model.m0().is_some() && rho == self.rho_c))
    }

    /// `Θ̄_λ` truncated at the smallest `K` with tail below `eps_tail`.
    pub fn marginal(&self, lambda: f64) -> Result<Marginal> {
        if lambda.is_nan() || lambda < 0.0 {
            return Err(Error::domain(format!("fugacity {lambda} must be nonnegative")));
        }
        if lambda.is_infinite() {
            return match self.model.m0() {
                Some(m0) => {
                    let mut pmf = vec![0.0; m0 as usize + 1];
                    pmf[m0 as usize] = 1.0;
                    Ok(Marginal {
                        lambda,
                        log_z: f64::INFINITY,
                        pmf,
                        tail: 0.0,
                    })
                }
                None => Err(Error::domain("infinite fugacity needs a finite M0")),
            };
        }
        if lambda >= self.lambda_c {
            let kind = if self.lambda_c_estimated { "estimated " } else { "" };
            return Err(Error::domain(format!(
                "fugacity {lambda} is not below the {kind}lambda_c = {}",
                self.lambda_c
            )));
        }
        series(&self.model, lambda, self.eps_tail)
    }

    pub fn marginal_pmf(&self, lambda: f64) -> Result<Vec<f64>> {
        Ok(self.marginal(lambda)?.pmf)
    }

    pub fn density_of_lambda(&self, lambda: f64) -> Result<f64> {
        Ok(self.marginal(lambda)?.mean())
    }

    /// Inverse of the density map by bisection, run until the bracket
    /// collapses; the result satisfies `|ρ(λ) − ρ| ≤ 1e−10`.
    pub fn lambda_of_density(&self, rho: f64) -> Result<f64> {
        if !self.admits_density(rho) {
            return Err(Error::domain(format!(
                "density {rho} outside [0, rho_c = {})",
                self.rho_c
            )));
        }
        if rho == 0.0 {
            return Ok(0.0);
        }
        if self.model.m0().is_some() && rho == self.rho_c {
            return Ok(f64::INFINITY);
        }
        let (mut lo, mut hi) = self.bracket(rho)?;
        let mut rho_lo = self.density_of_lambda(lo)?;
        let mut rho_hi = self.density_of_lambda(hi)?;
        for _ in 0..BISECTION_MAX_ITERS {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let r = self.density_of_lambda(mid)?;
            if r < rho {
                lo = mid;
                rho_lo = r;
            } else {
                hi = mid;
                rho_hi = r;
            }
        }
        let (lambda, err) = if (rho - rho_lo).abs() <= (rho_hi - rho).abs() {
            (lo, (rho - rho_lo).abs())
        } else {
            (hi, (rho_hi - rho).abs())
        };
        if err > INVERSION_TOL {
            return Err(Error::Convergence(format!(
                "density inversion at rho = {rho} stalled with error {err:e}"
            )));
        }
        Ok(lambda)
    }

    fn bracket(&self, rho: f64) -> Result<(f64, f64)> {
        let idx = self.cache.partition_point(|&(_, _, r)| r < rho);
        if idx == 0 {
            return Ok((0.0, 0.0));
        }
        if idx < self.cache.len() {
            return Ok((self.cache[idx - 1].0, self.cache[idx].0));
        }
        // past the cache: extend geometrically toward lambda_c
        let mut lo = self.cache[idx - 1].0;
        for _ in 0..2048 {
            let hi = if self.lambda_c.is_finite() {
                0.5 * (lo + self.lambda_c)
            } else {
                2.0 * lo.max(1.0)
            };
            if hi <= lo {
                break;
            }
            if self.density_of_lambda(hi)? >= rho {
                return Ok((lo, hi));
            }
            lo = hi;
        }
        Err(Error::Convergence(format!(
            "could not bracket density {rho} below lambda_c = {}",
            self.lambda_c
        )))
    }

    /// `Θ_ρ` as a probability vector.
    pub fn marginal_at_density(&self, rho: f64) -> Result<Marginal> {
        let lambda = self.lambda_of_density(rho)?;
        self.marginal(lambda)
    }

    /// `Φ(ρ) = E_{ν_ρ}[g(η(0))]`.
    pub fn phi(&self, rho: f64) -> Result<f64> {
        let m = self.marginal_at_density(rho)?;
        Ok(m.expect(|k| self.model.g(k)))
    }

    /// `Ψ(ρ) = E_{ν_ρ}[h(η(0))]`.
    pub fn psi(&self, rho: f64) -> Result<f64> {
        let m = self.marginal_at_density(rho)?;
        Ok(m.expect(|k| self.model.h(k)))
    }

    /// Cumulative table of `Θ_ρ` for inverse-cdf sampling.
    pub fn cdf_at_density(&self, rho: f64) -> Result<Vec<f64>> {
        Ok(self.marginal_at_density(rho)?.cdf())
    }

    pub fn sample_occupation<R: Rng + ?Sized>(&self, rho: f64, rng: &mut R) -> Result<u32> {
        let cdf = self.cdf_at_density(rho)?;
        Ok(sample_from_cdf(&cdf, rng))
    }

    /// Numerical check of `E[e^{γη}] = Z(λe^γ)/Z(λ) < ∞`. Necessary, not
    /// sufficient: a finite budget cannot prove convergence of an
    /// arbitrary series.
    pub fn fem_check(&self, gamma: f64, lambda: f64) -> FemCheck {
        if gamma < 0.0 || lambda < 0.0 {
            return FemCheck { holds: false, moment: None };
        }
        if lambda == 0.0 {
            return FemCheck { holds: true, moment: Some(1.0) };
        }
        let base = match self.marginal(lambda) {
            Ok(m) => m,
            Err(_) => return FemCheck { holds: false, moment: None },
        };
        let tilted = lambda * gamma.exp();
        if tilted >= self.lambda_c && !self.lambda_c_estimated {
            return FemCheck { holds: false, moment: None };
        }
        match series(&self.model, tilted, self.eps_tail) {
            Ok(m) => FemCheck {
                holds: true,
                moment: Some((m.log_z - base.log_z).exp()),
            },
            Err(_) => FemCheck { holds: false, moment: None },
        }
    }

    /// Dense `Φ`, `Ψ` tables on `[0, rho_max]` with step `1e−3·rho_max`.
    pub fn phi_psi_table(&self, rho_max: f64) -> Result<PhiPsiTable> {
        self.phi_psi_table_with(rho_max, 1000)
    }

    pub fn phi_psi_table_with(&self, rho_max: f64, intervals: usize) -> Result<PhiPsiTable> {
        if !(rho_max > 0.0) || !self.admits_density(rho_max) {
            return Err(Error::domain(format!(
                "table range [0, {rho_max}] leaves [0, rho_c = {}]",
                self.rho_c
            )));
        }
        let mut rho = Vec::with_capacity(intervals + 1);
        let mut lambda = Vec::with_capacity(intervals + 1);
        let mut phi = Vec::with_capacity(intervals + 1);
        let mut psi = Vec::with_capacity(intervals + 1);
        for i in 0..=intervals {
            let r = if i == intervals {
                rho_max
            } else {
                rho_max * i as f64 / intervals as f64
            };
            let lam = self.lambda_of_density(r)?;
            let m = self.marginal(lam)?;
            rho.push(r);
            lambda.push(lam);
            phi.push(m.expect(|k| self.model.g(k)));
            psi.push(m.expect(|k| self.model.h(k)));
        }
        Ok(PhiPsiTable {
            phi: Pchip::new(rho.clone(), phi),
            psi: Pchip::new(rho.clone(), psi),
            rho,
            lambda,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FemCheck {
    pub holds: bool,
    pub moment: Option<f64>,
}

/// `Φ`, `Ψ` sampled on a uniform density grid with monotone cubic
/// interpolation between nodes.
#[derive(Clone, Debug)]
pub struct PhiPsiTable {
    pub rho: Vec<f64>,
    pub lambda: Vec<f64>,
    pub phi: Pchip,
    pub psi: Pchip,
}

impl PhiPsiTable {
    pub fn rho_max(&self) -> f64 {
        *self.rho.last().expect("nonempty")
    }

    pub fn flux(&self, rho: f64) -> f64 {
        self.phi.eval(rho) * self.psi.eval(rho)
    }
}

fn critical_fugacity(model: &RateModel) -> (f64, bool) {
    if model.m0().is_some() {
        return (f64::INFINITY, false);
    }
    match model.kind() {
        RateKind::ZeroRange => (f64::INFINITY, false),
        RateKind::ZeroRangeCapped { cap } => (*cap as f64, false),
        RateKind::Exclusion => (f64::INFINITY, false),
        RateKind::Tabulated { g, .. } => {
            let k_max = g.len() - 1;
            let est = (k_max / 2..=k_max)
                .filter(|&k| k >= 1)
                .map(|k| model.g(k as u32) / model.h(k as u32))
                .fold(f64::INFINITY, f64::min);
            (est, true)
        }
    }
}

/// Sums `Θ̄_λ` in log space with doubling truncation.
fn series(model: &RateModel, lambda: f64, eps_tail: f64) -> Result<Marginal> {
    if lambda == 0.0 {
        return Ok(Marginal {
            lambda,
            log_z: 0.0,
            pmf: vec![1.0],
            tail: 0.0,
        });
    }
    let ln_lambda = lambda.ln();
    let mut logw: Vec<f64> = vec![0.0];
    let mut finite_support = false;
    let mut check_at = 16usize;
    let mut tail_rel = 0.0; // tail mass relative to exp(max logw)
    loop {
        let k = logw.len();
        let h_prev = model.h(k as u32 - 1);
        if h_prev == 0.0 {
            finite_support = true;
        } else {
            let g_k = model.g(k as u32);
            if g_k <= 0.0 {
                return Err(Error::domain(format!("g({k}) must be positive")));
            }
            logw.push(logw[k - 1] + ln_lambda + h_prev.ln() - g_k.ln());
        }
        if finite_support {
            break;
        }
        if logw.len() - 1 == check_at {
            let top = check_at;
            let r_max = (top / 2..top)
                .map(|j| (logw[j + 1] - logw[j]).exp())
                .fold(0.0, f64::max);
            let peak = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if r_max < 1.0 {
                let rel = (logw[top] - peak).exp() * r_max / (1.0 - r_max);
                // Z ≥ exp(peak), so rel bounds the normalized tail
                if rel < 0.5 * eps_tail {
                    tail_rel = rel;
                    break;
                }
            } else if top >= DIVERGENCE_PROBE && logw[top] >= logw[top / 2] {
                return Err(Error::Convergence(format!(
                    "partition function diverges at lambda = {lambda}"
                )));
            }
            if top >= MAX_TERMS {
                return Err(Error::Convergence(format!(
                    "partition function at lambda = {lambda} needs more than {MAX_TERMS} terms"
                )));
            }
            check_at *= 2;
        }
    }
    let peak = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = logw.iter().map(|l| (l - peak).exp()).collect();
    let total: f64 = weights.iter().sum::<f64>() + tail_rel;
    let log_z = peak + total.ln();
    // smallest K whose dropped mass stays below eps_tail
    let mut dropped = tail_rel / total;
    let mut keep = weights.len();
    while keep > 1 {
        let next = dropped + weights[keep - 1] / total;
        if next >= eps_tail {
            break;
        }
        dropped = next;
        keep -= 1;
    }
    let kept: f64 = weights[..keep].iter().sum();
    let pmf = weights[..keep].iter().map(|w| w / kept).collect();
    Ok(Marginal {
        lambda,
        log_z,
        pmf,
        tail: dropped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ln_factorial(k: usize) -> f64 {
        (1..=k).map(|j| (j as f64).ln()).sum()
    }

    #[test]
    fn poisson_marginal_for_zero_range() {
        let t = EquilibriumTable::new(RateModel::zero_range()).unwrap();
        let pmf = t.marginal_pmf(2.0).unwrap();
        for (k, p) in pmf.iter().enumerate() {
            let exact = (k as f64 * 2f64.ln() - 2.0 - ln_factorial(k)).exp();
            // renormalizing the truncated series moves each entry by < ε_tail
            assert!((p - exact).abs() <= 1e-12 * exact.max(1e-300), "k={k}: {p} vs {exact}");
        }
    }

    #[test]
    fn exclusion_marginal_is_two_point() {
        let t = EquilibriumTable::new(RateModel::exclusion()).unwrap();
        assert_eq!(t.marginal_pmf(1.0).unwrap(), vec![0.5, 0.5]);
        assert!((t.density_of_lambda(1.0).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_fugacity_is_point_mass() {
        for m in [RateModel::zero_range(), RateModel::exclusion()] {
            let t = EquilibriumTable::new(m).unwrap();
            assert_eq!(t.marginal_pmf(0.0).unwrap(), vec![1.0]);
            assert_eq!(t.density_of_lambda(0.0).unwrap(), 0.0);
            assert_eq!(t.lambda_of_density(0.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn density_map_examples() {
        let zr = EquilibriumTable::new(RateModel::zero_range()).unwrap();
        assert!((zr.density_of_lambda(3.0).unwrap() - 3.0).abs() < 1e-11);
        assert!((zr.lambda_of_density(2.0).unwrap() - 2.0).abs() < 1e-10);
        let ex = EquilibriumTable::new(RateModel::exclusion()).unwrap();
        assert!((ex.lambda_of_density(0.25).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(ex.lambda_of_density(1.0).unwrap(), f64::INFINITY);
        assert!(ex.lambda_of_density(1.1).is_err());
    }

    #[test]
    fn phi_psi_examples() {
        let zr = EquilibriumTable::new(RateModel::zero_range()).unwrap();
        assert!((zr.phi(2.0).unwrap() - 2.0).abs() < 1e-10);
        assert!((zr.psi(2.0).unwrap() - 1.0).abs() < 1e-14);
        let ex = EquilibriumTable::new(RateModel::exclusion()).unwrap();
        assert!((ex.phi(0.3).unwrap() - 0.3).abs() < 1e-14);
        assert!((ex.psi(0.3).unwrap() - 0.7).abs() < 1e-14);
        assert_eq!(ex.phi(0.0).unwrap(), 0.0);
        assert_eq!(ex.psi(1.0).unwrap(), 0.0);
        assert!(zr.phi(-0.1).is_err());
    }

    #[test]
    fn lambda_beyond_critical_is_domain_error() {
        let t = EquilibriumTable::new(RateModel::zero_range_capped(3).unwrap()).unwrap();
        assert_eq!(t.lambda_c(), 3.0);
        assert!(matches!(t.marginal(3.0), Err(Error::Domain(_))));
        // near-critical densities are still invertible
        let lam = t.lambda_of_density(20.0).unwrap();
        assert!(lam < 3.0);
        assert!((t.density_of_lambda(lam).unwrap() - 20.0).abs() < 1e-9);
    }

    #[test]
    fn truncation_tail_is_small() {
        let t = EquilibriumTable::new(RateModel::zero_range()).unwrap();
        let m = t.marginal(5.0).unwrap();
        assert!(m.tail < 1e-12);
        let sum: f64 = m.pmf.iter().sum();
        assert!((sum - 1.0).abs() < 1e-14);
        // the next Poisson term is already below the tolerance
        let k = m.truncation() + 1;
        let next = (k as f64 * 5f64.ln() - 5.0 - ln_factorial(k)).exp();
        assert!(next < 1e-12);
    }

    #[test]
    fn fem_examples() {
        let ex = EquilibriumTable::new(RateModel::exclusion()).unwrap();
        for gamma in [0.0, 1.0, 50.0] {
            assert!(ex.fem_check(gamma, 0.7).holds);
        }
        let zr = EquilibriumTable::new(RateModel::zero_range()).unwrap();
        let fem = zr.fem_check(1.0, 1.0);
        assert!(fem.holds);
        let expected = (std::f64::consts::E - 1.0).exp();
        assert!((fem.moment.unwrap() - expected).abs() < 1e-10);
        assert!((expected - 5.5749).abs() < 1e-4);
        // geometric marginal: the mgf diverges once λe^γ ≥ 1
        let geo = EquilibriumTable::new(RateModel::zero_range_capped(1).unwrap()).unwrap();
        assert!(geo.fem_check(0.5, 0.5).holds);
        assert!(!geo.fem_check(5.0, 0.5).holds);
    }

    #[test]
    fn fem_with_estimated_lambda_c() {
        // the table extrapolates g linearly, lambda_c comes from the table only
        let m = RateModel::tabulated(vec![0.0, 1.0], vec![1.0]).unwrap();
        let t = EquilibriumTable::new(m).unwrap();
        assert!(t.lambda_c_is_estimate());
        assert!(t.fem_check(0.1, 0.5).holds);
    }

    #[test]
    fn sampling_is_deterministic_and_unbiased() {
        let ex = EquilibriumTable::new(RateModel::exclusion()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 100_000;
        let mean = (0..n).map(|_| ex.sample_occupation(0.5, &mut rng).unwrap() as f64).sum::<f64>()
            / n as f64;
        assert!((mean - 0.5).abs() < 0.005);

        let zr = EquilibriumTable::new(RateModel::zero_range()).unwrap();
        let cdf = zr.cdf_at_density(2.0).unwrap();
        let mut a = ChaCha8Rng::seed_from_u64(11);
        let mut b = ChaCha8Rng::seed_from_u64(11);
        let xs: Vec<u32> = (0..n).map(|_| sample_from_cdf(&cdf, &mut a)).collect();
        let ys: Vec<u32> = (0..n).map(|_| sample_from_cdf(&cdf, &mut b)).collect();
        assert_eq!(xs, ys);
        let mean = xs.iter().map(|&k| k as f64).sum::<f64>() / n as f64;
        assert!((mean - 2.0).abs() < 0.014);

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!((0..100).all(|_| ex.sample_occupation(0.0, &mut rng).unwrap() == 0));
    }

    #[test]
    fn dense_table_matches_direct_evaluation() {
        let t = EquilibriumTable::new(RateModel::zero_range_capped(3).unwrap()).unwrap();
        let tab = t.phi_psi_table(4.0).unwrap();
        assert_eq!(tab.rho.len(), 1001);
        for rho in [0.0, 0.123, 1.0, 2.5, 3.99] {
            let direct = t.phi(rho).unwrap();
            assert!((tab.phi.eval(rho) - direct).abs() < 1e-6, "rho={rho}");
            assert!((tab.psi.eval(rho) - 1.0).abs() < 1e-12);
        }
    }
}
