//! The anomalous-scale operator
//! `𝓛ρ(u) = ∫_{[0,∞)^n} [Φ(ρ(u−v))Ψ(ρ(u)) − Φ(ρ(u))Ψ(ρ(u+v))] ‖v‖^{-n-α} dv`
//! and its explicit time stepping.
//!
//! In one dimension the integrand is split as
//! `Ψ(ρ(u))[Φ(ρ(u−v)) − Φ(ρ(u))] + Φ(ρ(u))[Ψ(ρ(u)) − Ψ(ρ(u+v))]`; both pieces
//! vanish at `v = 0`, and each is integrated as the piecewise-linear
//! interpolant on `v = jΔu` against the exact weight `v^{-1-α}` (product
//! trapezoid rule, error `O(Δu^{2−α})`). Every term is a difference of
//! values, so constant fields give exactly zero.

use serde::{Deserialize, Serialize};

use super::grid::GridField;
use super::quad::{gauss_legendre, integrate};
use crate::equilibrium::PhiPsiTable;
use crate::error::{Error, Result};

/// Operator parameters. `plus`/`minus` weight jumps in the positive and
/// negative direction (1D only); `cutoff` truncates `|v|`, `None` integrates
/// over the whole half-line with the far field beyond the window. A periodic
/// window wraps jumps around, as on the simulator's torus, and needs a cutoff
/// of at most half the width.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NonlocalSpec {
    pub alpha: f64,
    pub cutoff: Option<f64>,
    pub plus: f64,
    pub minus: f64,
    #[serde(default)]
    pub periodic: bool,
}

impl NonlocalSpec {
    pub fn new(alpha: f64) -> Self {
        NonlocalSpec {
            alpha,
            cutoff: None,
            plus: 1.0,
            minus: 0.0,
            periodic: false,
        }
    }

    pub fn periodic(mut self) -> Self {
        self.periodic = true;
        self
    }

    pub fn with_cutoff(mut self, cutoff: f64) -> Self {
        self.cutoff = Some(cutoff);
        self
    }

    pub fn with_orientation(mut self, plus: f64, minus: f64) -> Self {
        self.plus = plus;
        self.minus = minus;
        self
    }

    fn validate(&self, field: &GridField) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::domain(format!(
                "the nonlocal operator needs 0 < alpha < 1, got {}",
                self.alpha
            )));
        }
        if let Some(c) = self.cutoff {
            if !(c >= field.du) {
                return Err(Error::domain("kernel cutoff must be at least one cell"));
            }
        }
        if self.periodic && !self.cutoff.is_some_and(|c| c <= 0.5 * field.width() + 1e-12) {
            return Err(Error::domain("a periodic window needs a cutoff of at most half its width"));
        }
        if !(self.plus >= 0.0 && self.minus >= 0.0) || self.plus + self.minus == 0.0 {
            return Err(Error::domain("orientation weights must be nonnegative, not both zero"));
        }
        if field.dim == 2 && self.minus != 0.0 {
            return Err(Error::domain("two-dimensional operator is totally asymmetric only"));
        }
        Ok(())
    }
}

/// Product-trapezoid weights `ω_j`, `j = 1..=J`, and tail sums
/// `T_k = Σ_{j ≥ k} ω_j` (`T_{J+1} = 0`).
#[derive(Clone, Debug)]
pub(crate) struct Weights {
    pub omega: Vec<f64>,
    pub tail: Vec<f64>,
}

impl Weights {
    pub(crate) fn new(alpha: f64, du: f64, j_max: usize, infinite: bool) -> Self {
        let rule = gauss_legendre(16);
        let p = -1.0 - alpha;
        let mut omega = Vec::with_capacity(j_max);
        for j in 1..=j_max {
            let jf = j as f64;
            // rising half on [j−1, j]
            let rising = if j == 1 {
                1.0 / (1.0 - alpha)
            } else {
                integrate(|x| (x - jf + 1.0) * x.powf(p), jf - 1.0, jf, &rule)
            };
            let falling = if j < j_max {
                integrate(|x| (jf + 1.0 - x) * x.powf(p), jf, jf + 1.0, &rule)
            } else if infinite {
                jf.powf(-alpha) / alpha
            } else {
                0.0
            };
            omega.push((rising + falling) * du.powf(-alpha));
        }
        let mut tail = vec![0.0; j_max + 2];
        for j in (1..=j_max).rev() {
            tail[j] = tail[j + 1] + omega[j - 1];
        }
        Weights { omega, tail }
    }

    #[inline]
    pub(crate) fn t(&self, k: usize) -> f64 {
        self.tail.get(k).copied().unwrap_or(0.0)
    }

    pub(crate) fn j_max(&self) -> usize {
        self.omega.len()
    }

    pub(crate) fn for_field(spec: &NonlocalSpec, field: &GridField) -> Self {
        match spec.cutoff {
            Some(c) => Weights::new(spec.alpha, field.du, (c / field.du).round() as usize, false),
            None => Weights::new(spec.alpha, field.du, field.cells, true),
        }
    }
}

/// `𝓛ρ` on every cell.
pub fn nonlocal_rhs(field: &GridField, table: &PhiPsiTable, spec: &NonlocalSpec) -> Result<Vec<f64>> {
    spec.validate(field)?;
    let op = Operator::new(field, table, spec);
    Ok(op.apply(&field.values))
}

struct Operator<'a> {
    table: &'a PhiPsiTable,
    spec: &'a NonlocalSpec,
    weights: Weights,
    lattice: Option<Lattice2d>,
    cells: usize,
    far_left: f64,
    far_right: f64,
    periodic: bool,
}

/// Orthant weights for two dimensions: `Δu^{-α} |k|^{-2-α}` on lattice
/// points, halved on the axes, plus the exact integral beyond radius `J`.
struct Lattice2d {
    points: Vec<(usize, usize, f64)>,
    tail: f64,
}

impl<'a> Operator<'a> {
    fn new(field: &GridField, table: &'a PhiPsiTable, spec: &'a NonlocalSpec) -> Self {
        let weights = Weights::for_field(spec, field);
        let lattice = (field.dim == 2).then(|| {
            let j_max = match spec.cutoff {
                Some(c) => (c / field.du).round() as usize,
                None => field.cells,
            };
            let mut points = Vec::new();
            for a in 0..=j_max {
                for b in 0..=j_max {
                    let r2 = (a * a + b * b) as f64;
                    if r2 == 0.0 || r2 > (j_max * j_max) as f64 {
                        continue;
                    }
                    let axis = if a == 0 || b == 0 { 0.5 } else { 1.0 };
                    points.push((a, b, axis * r2.powf(-0.5 * (2.0 + spec.alpha)) * field.du.powf(-spec.alpha)));
                }
            }
            let tail = if spec.cutoff.is_none() {
                0.5 * std::f64::consts::PI * (j_max as f64 * field.du).powf(-spec.alpha) / spec.alpha
            } else {
                0.0
            };
            Lattice2d { points, tail }
        });
        Operator {
            table,
            spec,
            weights,
            lattice,
            cells: field.cells,
            far_left: field.far_left,
            far_right: field.far_right,
            periodic: spec.periodic,
        }
    }

    fn apply(&self, values: &[f64]) -> Vec<f64> {
        let phi: Vec<f64> = values.iter().map(|&r| self.table.phi.eval(r)).collect();
        let psi: Vec<f64> = values.iter().map(|&r| self.table.psi.eval(r)).collect();
        let far = (
            (self.table.phi.eval(self.far_left), self.table.psi.eval(self.far_left)),
            (self.table.phi.eval(self.far_right), self.table.psi.eval(self.far_right)),
        );
        if let Some(lattice) = &self.lattice {
            return self.apply_2d(lattice, &phi, &psi, far.0);
        }
        let mut out = vec![0.0; values.len()];
        if self.periodic {
            return periodic_1d(&self.weights, &phi, &psi, self.spec.plus, self.spec.minus);
        }
        if self.spec.plus != 0.0 {
            let r = one_sided(&self.weights, &phi, &psi, far.0 .0, far.1 .1);
            out.iter_mut().zip(r).for_each(|(o, v)| *o += self.spec.plus * v);
        }
        if self.spec.minus != 0.0 {
            let rev = |v: &[f64]| v.iter().rev().copied().collect::<Vec<_>>();
            let r = one_sided(&self.weights, &rev(&phi), &rev(&psi), far.1 .0, far.0 .1);
            out.iter_mut().zip(r.iter().rev()).for_each(|(o, v)| *o += self.spec.minus * v);
        }
        out
    }

    fn apply_2d(&self, lattice: &Lattice2d, phi: &[f64], psi: &[f64], far: (f64, f64)) -> Vec<f64> {
        let n = self.cells as i64;
        let (phi_far, psi_far) = far;
        let mut out = vec![0.0; phi.len()];
        for (i, o) in out.iter_mut().enumerate() {
            let (x, y) = ((i as i64) % n, (i as i64) / n);
            let mut acc = 0.0;
            for &(a, b, w) in &lattice.points {
                let (a, b) = (a as i64, b as i64);
                let (mut xm, mut ym) = (x - a, y - b);
                let (mut xp, mut yp) = (x + a, y + b);
                if self.periodic {
                    (xm, ym, xp, yp) = (xm.rem_euclid(n), ym.rem_euclid(n), xp % n, yp % n);
                }
                let phi_back = if xm >= 0 && ym >= 0 {
                    phi[(ym * n + xm) as usize]
                } else {
                    phi_far
                };
                let psi_ahead = if xp < n && yp < n {
                    psi[(yp * n + xp) as usize]
                } else {
                    psi_far
                };
                acc += w * (psi[i] * (phi_back - phi[i]) + phi[i] * (psi[i] - psi_ahead));
            }
            acc += lattice.tail * (psi[i] * (phi_far - phi[i]) + phi[i] * (psi[i] - psi_far));
            *o = acc;
        }
        out
    }
}

/// Both directions on a periodic line; no far field.
fn periodic_1d(w: &Weights, phi: &[f64], psi: &[f64], plus: f64, minus: f64) -> Vec<f64> {
    let n = phi.len();
    (0..n)
        .map(|i| {
            let mut acc = 0.0;
            for j in 1..=w.j_max() {
                let (b, a) = ((i + n - j % n) % n, (i + j) % n);
                let fwd = psi[i] * (phi[b] - phi[i]) + phi[i] * (psi[i] - psi[a]);
                let bwd = psi[i] * (phi[a] - phi[i]) + phi[i] * (psi[i] - psi[b]);
                acc += w.omega[j - 1] * (plus * fwd + minus * bwd);
            }
            acc
        })
        .collect()
}

/// Jumps toward increasing index only.
fn one_sided(w: &Weights, phi: &[f64], psi: &[f64], phi_left: f64, psi_right: f64) -> Vec<f64> {
    let n = phi.len();
    let j_max = w.j_max();
    (0..n)
        .map(|i| {
            let mut back = 0.0;
            for j in 1..=i.min(j_max) {
                back += w.omega[j - 1] * (phi[i - j] - phi[i]);
            }
            back += w.t(i + 1) * (phi_left - phi[i]);
            let mut ahead = 0.0;
            for j in 1..=(n - 1 - i).min(j_max) {
                ahead += w.omega[j - 1] * (psi[i] - psi[i + j]);
            }
            ahead += w.t(n - i) * (psi[i] - psi_right);
            psi[i] * back + phi[i] * ahead
        })
        .collect()
}

/// Bound on `|∂(ΦΨ-differences)/∂ρ|`: `max (Ψ|Φ′| + Φ|Ψ′|)` over the table.
pub fn transport_lipschitz(table: &PhiPsiTable) -> f64 {
    table
        .rho
        .windows(2)
        .flat_map(|w| [w[0], 0.5 * (w[0] + w[1]), w[1]])
        .map(|r| {
            table.psi.eval(r) * table.phi.derivative(r).abs()
                + table.phi.eval(r) * table.psi.derivative(r).abs()
        })
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug, Serialize)]
pub struct NonlocalRun {
    #[serde(skip)]
    pub field: GridField,
    pub steps: usize,
    pub dt: f64,
    pub clamps: u64,
    pub initial_max: f64,
    pub final_max: f64,
    pub final_min: f64,
}

/// Explicit midpoint (two-stage) stepping to `t_end` with
/// `Δt = safety / (L · S)`, where `S` is the total kernel weight and `L` the
/// transport Lipschitz constant. Values are clamped into the table's range
/// after each stage.
pub fn evolve_nonlocal(
    field: &GridField,
    table: &PhiPsiTable,
    spec: &NonlocalSpec,
    t_end: f64,
    safety: f64,
) -> Result<NonlocalRun> {
    spec.validate(field)?;
    if !(safety > 0.0 && safety <= 1.0) {
        return Err(Error::domain("safety factor must lie in (0, 1]"));
    }
    if t_end < field.t {
        return Err(Error::domain("cannot evolve backwards in time"));
    }
    let op = Operator::new(field, table, spec);
    let total_weight = match &op.lattice {
        Some(l) => l.points.iter().map(|p| p.2).sum::<f64>() + l.tail,
        None => op.weights.t(1) * (spec.plus + spec.minus),
    };
    let lip = transport_lipschitz(table).max(1e-300);
    let dt_nominal = safety / (lip * total_weight);
    let upper = table.rho_max();
    let initial_max = field.max();
    let limit = initial_max + 1e-5;
    let mut out = field.clone();
    let mut clamps = 0u64;
    let mut steps = 0usize;
    let clamp = |v: &mut [f64], clamps: &mut u64| {
        for x in v.iter_mut() {
            if *x < 0.0 || *x > upper {
                *x = x.clamp(0.0, upper);
                *clamps += 1;
            }
        }
    };
    let check = |v: &[f64], t: f64| -> Result<()> {
        for &x in v {
            if !x.is_finite() || x > limit {
                return Err(Error::Stability(format!(
                    "nonlocal solution reached {x} > {limit} at t = {t}"
                )));
            }
        }
        Ok(())
    };
    while t_end - out.t > 1e-14 * t_end.max(1.0) {
        let dt = dt_nominal.min(t_end - out.t);
        let k1 = op.apply(&out.values);
        let mut mid: Vec<f64> = out.values.iter().zip(&k1).map(|(r, k)| r + 0.5 * dt * k).collect();
        check(&mid, out.t)?;
        clamp(&mut mid, &mut clamps);
        let k2 = op.apply(&mid);
        let mut next: Vec<f64> = out.values.iter().zip(&k2).map(|(r, k)| r + dt * k).collect();
        check(&next, out.t + dt)?;
        clamp(&mut next, &mut clamps);
        out.values = next;
        out.t += dt;
        steps += 1;
    }
    out.t = t_end.max(out.t);
    Ok(NonlocalRun {
        final_max: out.max(),
        final_min: out.min(),
        field: out,
        steps,
        dt: dt_nominal,
        clamps,
        initial_max,
    })
}
