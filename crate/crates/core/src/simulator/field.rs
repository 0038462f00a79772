use serde::Serialize;

use super::torus::Torus;

/// Block averages `η^l(x) = (2l+1)^{-n} Σ_{|y|_∞ ≤ l} η(x+y)` on every site.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EmpiricalField {
    pub l: usize,
    pub dim: usize,
    pub side: usize,
    pub values: Vec<f64>,
}

/// Exact box sums over the torus, one axis at a time in integers.
pub fn block_average(torus: &Torus, occupancy: &[u32], l: usize) -> EmpiricalField {
    let side = torus.side();
    let dim = torus.dim();
    assert!(2 * l < side, "block half-width must be below side/2");
    let mut sums: Vec<u64> = occupancy.iter().map(|&k| k as u64).collect();
    let mut line = vec![0u64; side];
    let mut out = vec![0u64; side];
    for axis in 0..dim {
        let stride = side.pow(axis as u32);
        for base in 0..sums.len() {
            // visit each line once: its first element has coordinate 0 on `axis`
            if (base / stride) % side != 0 {
                continue;
            }
            for (c, slot) in line.iter_mut().enumerate() {
                *slot = sums[base + c * stride];
            }
            let mut acc: u64 = (0..=l).map(|c| line[c]).sum::<u64>()
                + (1..=l).map(|c| line[side - c]).sum::<u64>();
            for c in 0..side {
                out[c] = acc;
                acc += line[(c + l + 1) % side];
                acc -= line[(c + side - l) % side];
            }
            for (c, &v) in out.iter().enumerate() {
                sums[base + c * stride] = v;
            }
        }
    }
    let denom = ((2 * l + 1) as f64).powi(dim as i32);
    EmpiricalField {
        l,
        dim,
        side,
        values: sums.iter().map(|&s| s as f64 / denom).collect(),
    }
}

impl EmpiricalField {
    /// Means over `cells` equal blocks per axis; `side` must be a multiple.
    pub fn coarse(&self, cells: usize) -> Vec<f64> {
        coarse_grain(&self.values, self.dim, self.side, cells)
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

/// Block means of a field on `side^dim` sites down to `cells^dim` cells.
pub fn coarse_grain(values: &[f64], dim: usize, side: usize, cells: usize) -> Vec<f64> {
    assert!(cells > 0 && side % cells == 0, "{side} sites do not split into {cells} cells");
    let factor = side / cells;
    let mut out = vec![0.0; cells.pow(dim as u32)];
    for (i, &v) in values.iter().enumerate() {
        let mut rest = i;
        let mut cell = 0;
        let mut mult = 1;
        for _ in 0..dim {
            cell += (rest % side) / factor * mult;
            rest /= side;
            mult *= cells;
        }
        out[cell] += v;
    }
    let per = (factor as f64).powi(dim as i32);
    out.iter_mut().for_each(|v| *v /= per);
    out
}

/// Per-coarse-cell distribution of block averages over fixed bins.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct YoungHistogram {
    pub edges: Vec<f64>,
    /// `cells[c][b]`: fraction of sites in coarse cell `c` with value in bin `b`.
    pub cells: Vec<Vec<f64>>,
}

impl YoungHistogram {
    /// Sum of all entries; equals the number of coarse cells.
    pub fn total_mass(&self) -> f64 {
        self.cells.iter().flatten().sum()
    }
}

/// Values outside the edges are clamped into the first or last bin; the last
/// bin is closed on the right.
pub fn young_histogram(field: &EmpiricalField, cells: usize, edges: &[f64]) -> YoungHistogram {
    assert!(edges.len() >= 2 && edges.windows(2).all(|w| w[1] > w[0]), "invalid bin edges");
    let bins = edges.len() - 1;
    let side = field.side;
    assert!(side % cells == 0, "{side} sites do not split into {cells} cells");
    let factor = side / cells;
    let n_cells = cells.pow(field.dim as u32);
    let mut counts = vec![vec![0u64; bins]; n_cells];
    for (i, &v) in field.values.iter().enumerate() {
        let mut rest = i;
        let mut cell = 0;
        let mut mult = 1;
        for _ in 0..field.dim {
            cell += (rest % side) / factor * mult;
            rest /= side;
            mult *= cells;
        }
        let b = edges.partition_point(|&e| e <= v).clamp(1, bins) - 1;
        counts[cell][b] += 1;
    }
    let per = factor.pow(field.dim as u32) as f64;
    YoungHistogram {
        edges: edges.to_vec(),
        cells: counts
            .into_iter()
            .map(|c| c.into_iter().map(|k| k as f64 / per).collect())
            .collect(),
    }
}
