//! Rate functions of the decomposable misanthrope process.
//!
//! A particle at `x` jumps to `x + d` at rate `p(d) g(η(x)) h(η(x+d))`. The
//! pair `(g, h)` is described by a [`RateModel`], either one of the named
//! special cases or a user table.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Occupancies below this bound are served from a lookup table.
const CACHE_LEN: usize = 1024;

/// Range scanned when deriving constants for the closed-form builtins.
const BUILTIN_SCAN: usize = 64;

const REL_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum RateKind {
    /// `g(k) = k`, `h ≡ 1`.
    ZeroRange,
    /// `g(k) = min(k, cap)`, `h ≡ 1`.
    ZeroRangeCapped { cap: u32 },
    /// `g(k) = 1(k ≥ 1)`, `h(m) = 1(m = 0)`.
    Exclusion,
    /// Tables `g[0..]`, `h[0..]`. Beyond the table `g` continues linearly with
    /// slope `kappa` and `h` keeps its last value.
    Tabulated { g: Vec<f64>, h: Vec<f64> },
}

#[derive(Clone, Debug)]
pub struct RateModel {
    kind: RateKind,
    kappa: f64,
    h_sup: f64,
    m0: Option<u32>,
    attractive: bool,
    g_cache: Vec<f64>,
    h_cache: Vec<f64>,
}

impl RateModel {
    pub fn zero_range() -> Self {
        Self::build(RateKind::ZeroRange).expect("builtin model is well formed")
    }

    pub fn zero_range_capped(cap: u32) -> Result<Self> {
        if cap == 0 {
            return Err(Error::domain("zero-range cap must be at least 1"));
        }
        Self::build(RateKind::ZeroRangeCapped { cap })
    }

    pub fn exclusion() -> Self {
        Self::build(RateKind::Exclusion).expect("builtin model is well formed")
    }

    pub fn tabulated(g: Vec<f64>, h: Vec<f64>) -> Result<Self> {
        if g.len() < 2 || h.is_empty() {
            return Err(Error::domain("rate tables need at least g[0], g[1] and h[0]"));
        }
        if g.iter().chain(h.iter()).any(|v| !v.is_finite()) {
            return Err(Error::domain("rate tables must be finite"));
        }
        Self::build(RateKind::Tabulated { g, h })
    }

    pub fn from_kind(kind: RateKind) -> Result<Self> {
        match kind {
            RateKind::ZeroRange => Ok(Self::zero_range()),
            RateKind::ZeroRangeCapped { cap } => Self::zero_range_capped(cap),
            RateKind::Exclusion => Ok(Self::exclusion()),
            RateKind::Tabulated { g, h } => Self::tabulated(g, h),
        }
    }

    fn build(kind: RateKind) -> Result<Self> {
        let scan = match &kind {
            RateKind::Tabulated { g, h } => g.len().max(h.len()),
            _ => BUILTIN_SCAN,
        };
        let m0 = match &kind {
            RateKind::Exclusion => Some(1),
            RateKind::ZeroRange | RateKind::ZeroRangeCapped { .. } => None,
            RateKind::Tabulated { h, .. } => h.iter().position(|&v| v == 0.0).map(|m| m as u32),
        };
        // kappa is needed for extrapolation, so derive it from the raw table first.
        let raw_g = |k: usize| -> f64 {
            match &kind {
                RateKind::ZeroRange => k as f64,
                RateKind::ZeroRangeCapped { cap } => k.min(*cap as usize) as f64,
                RateKind::Exclusion => (k >= 1) as u8 as f64,
                RateKind::Tabulated { g, .. } => g[k.min(g.len() - 1)],
            }
        };
        let g_len = match &kind {
            RateKind::Tabulated { g, .. } => g.len(),
            _ => scan + 1,
        };
        let kappa = (0..g_len - 1)
            .map(|k| (raw_g(k + 1) - raw_g(k)).abs())
            .fold(0.0, f64::max);
        let mut model = RateModel {
            kind,
            kappa,
            h_sup: 0.0,
            m0,
            attractive: false,
            g_cache: Vec::new(),
            h_cache: Vec::new(),
        };
        model.g_cache = (0..CACHE_LEN).map(|k| model.g_uncached(k as u32)).collect();
        model.h_cache = (0..CACHE_LEN).map(|k| model.h_uncached(k as u32)).collect();
        model.h_sup = (0..=scan).map(|m| model.h(m as u32)).fold(0.0, f64::max);
        model.attractive = model.check_attractive(scan.max(2) as u32);
        Ok(model)
    }

    fn g_uncached(&self, k: u32) -> f64 {
        match &self.kind {
            RateKind::ZeroRange => k as f64,
            RateKind::ZeroRangeCapped { cap } => k.min(*cap) as f64,
            RateKind::Exclusion => (k >= 1) as u8 as f64,
            RateKind::Tabulated { g, .. } => {
                let k = k as usize;
                if k < g.len() {
                    g[k]
                } else {
                    let last = g.len() - 1;
                    g[last] + self.kappa * (k - last) as f64
                }
            }
        }
    }

    fn h_uncached(&self, m: u32) -> f64 {
        match &self.kind {
            RateKind::ZeroRange | RateKind::ZeroRangeCapped { .. } => 1.0,
            RateKind::Exclusion => (m == 0) as u8 as f64,
            RateKind::Tabulated { h, .. } => h[(m as usize).min(h.len() - 1)],
        }
    }

    #[inline]
    pub fn g(&self, k: u32) -> f64 {
        match self.g_cache.get(k as usize) {
            Some(&v) => v,
            None => self.g_uncached(k),
        }
    }

    #[inline]
    pub fn h(&self, m: u32) -> f64 {
        match self.h_cache.get(m as usize) {
            Some(&v) => v,
            None => self.h_uncached(m),
        }
    }

    /// Jump modulation `b(l, m) = g(l) h(m)`.
    #[inline]
    pub fn b(&self, l: u32, m: u32) -> f64 {
        self.g(l) * self.h(m)
    }

    pub fn kind(&self) -> &RateKind {
        &self.kind
    }

    pub fn name(&self) -> String {
        match &self.kind {
            RateKind::ZeroRange => "zero_range".into(),
            RateKind::ZeroRangeCapped { cap } => format!("zero_range_capped({cap})"),
            RateKind::Exclusion => "exclusion".into(),
            RateKind::Tabulated { .. } => "tabulated".into(),
        }
    }

    /// Lipschitz constant of `g`.
    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// `‖h‖∞`.
    pub fn h_sup(&self) -> f64 {
        self.h_sup
    }

    /// Lipschitz constant of `h`, `κ₁ = 2‖h‖∞`.
    pub fn kappa1(&self) -> f64 {
        2.0 * self.h_sup
    }

    /// First root of `h`; `None` when `h` never vanishes.
    pub fn m0(&self) -> Option<u32> {
        self.m0
    }

    pub fn is_attractive(&self) -> bool {
        self.attractive
    }

    /// True when every `g(k)` with `k ≤ k_max` is an integer.
    pub fn g_is_integral(&self, k_max: u32) -> bool {
        (0..=k_max).all(|k| self.g(k).fract() == 0.0)
    }

    /// `g` nondecreasing and `h` nonincreasing on `[0, k_max]`.
    pub fn check_attractive(&self, k_max: u32) -> bool {
        (0..k_max).all(|k| self.g(k + 1) >= self.g(k) && self.h(k + 1) <= self.h(k))
    }

    /// Checks the structural assumptions on `(g, h)` against `self`'s
    /// constants, up to occupancy `k_max`.
    pub fn validate_rates(&self, k_max: u32) -> ValidationReport {
        validate_with(self, k_max.max(2), self.kappa, self.h_sup)
    }

    /// Like [`validate_rates`](Self::validate_rates) but against externally
    /// declared constants, e.g. from a config file.
    pub fn validate_declared(&self, k_max: u32, kappa: f64, h_sup: f64) -> ValidationReport {
        validate_with(self, k_max.max(2), kappa, h_sup)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "violation", rename_all = "snake_case")]
pub enum Violation {
    GAtZero { value: f64 },
    GNotPositive { k: u32 },
    HAtZeroNotPositive { value: f64 },
    HNegative { m: u32 },
    HSupport { m: u32 },
    Lipschitz { k: u32, step: f64 },
    LinearGrowth { k: u32 },
    HBound { m: u32 },
    Compatibility { i: u32, j: u32, lhs: f64, rhs: f64 },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    /// Assumptions that hold by convention but cannot be verified from a
    /// finite table.
    pub flags: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= REL_TOL * (1.0 + a.abs().max(b.abs()))
}

fn validate_with(model: &RateModel, k_max: u32, kappa: f64, h_sup: f64) -> ValidationReport {
    let k_eff = match model.m0 {
        Some(m0) => k_max.min(m0 + 1),
        None => k_max,
    };
    let g = |k| model.g(k);
    let h = |m| model.h(m);
    let mut report = ValidationReport::default();
    let mut push_first = |v: Option<Violation>| {
        if let Some(v) = v {
            report.violations.push(v);
        }
    };

    push_first((g(0) != 0.0).then(|| Violation::GAtZero { value: g(0) }));
    let g_top = model.m0.map_or(k_eff, |m0| m0.min(k_eff));
    push_first((1..=g_top).find(|&k| g(k) <= 0.0).map(|k| Violation::GNotPositive { k }));
    push_first((h(0) <= 0.0).then(|| Violation::HAtZeroNotPositive { value: h(0) }));
    push_first((0..=k_eff).find(|&m| h(m) < 0.0).map(|m| Violation::HNegative { m }));
    if let Some(m0) = model.m0 {
        push_first(
            (m0..=k_eff.max(m0))
                .find(|&m| h(m) != 0.0)
                .map(|m| Violation::HSupport { m }),
        );
    }
    push_first((0..k_eff).find_map(|k| {
        let step = (g(k + 1) - g(k)).abs();
        (step > kappa * (1.0 + REL_TOL)).then_some(Violation::Lipschitz { k, step })
    }));
    push_first(
        (0..=k_eff)
            .find(|&k| g(k) > kappa * k as f64 * (1.0 + REL_TOL) + REL_TOL)
            .map(|k| Violation::LinearGrowth { k }),
    );
    push_first(
        (0..=k_eff)
            .find(|&m| h(m) > h_sup * (1.0 + REL_TOL))
            .map(|m| Violation::HBound { m }),
    );

    // The identity is antisymmetric in (i, j), so j < i suffices.
    let top = model.m0.map_or(k_eff, |m0| m0.min(k_eff));
    let h0 = h(0);
    let compat = (1..=top).find_map(|i| {
        (0..i).find_map(|j| {
            let lhs = g(i) * h(j) - g(j) * h(i);
            let rhs = h0 * (g(i) - g(j));
            (!close(lhs, rhs)).then_some(Violation::Compatibility { i, j, lhs, rhs })
        })
    });
    push_first(compat);

    if model.m0.is_none() && matches!(model.kind, RateKind::Tabulated { .. }) {
        report
            .flags
            .push("h has no zero in the table; rho_c = infinity is assumed, not verified".into());
    }
    report
}
