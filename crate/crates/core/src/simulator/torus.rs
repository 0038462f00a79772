use crate::error::{Error, Result};

pub const MAX_DIM: usize = 3;

/// The lattice `(Z/LZ)^n` with axis 0 varying fastest. Site coordinate `c`
/// on an axis corresponds to the lattice point `x = c − L/2`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Torus {
    dim: usize,
    side: usize,
    sites: usize,
    no_wrap: bool,
}

impl Torus {
    pub fn new(dim: usize, side: usize, no_wrap: bool) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::domain(format!("dimension {dim} is not in 1..={MAX_DIM}")));
        }
        if side < 2 {
            return Err(Error::domain("torus side must be at least 2"));
        }
        let sites = side
            .checked_pow(dim as u32)
            .filter(|&s| s <= u32::MAX as usize)
            .ok_or_else(|| Error::domain("torus has too many sites"))?;
        Ok(Torus {
            dim,
            side,
            sites,
            no_wrap,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn no_wrap(&self) -> bool {
        self.no_wrap
    }

    #[inline]
    pub fn coords(&self, i: usize) -> [usize; MAX_DIM] {
        let mut c = [0; MAX_DIM];
        let mut rest = i;
        for slot in c.iter_mut().take(self.dim) {
            *slot = rest % self.side;
            rest /= self.side;
        }
        c
    }

    pub fn index(&self, coords: &[usize]) -> usize {
        coords
            .iter()
            .rev()
            .fold(0, |acc, &c| acc * self.side + c)
    }

    /// Lattice point `x = c − L/2` of a site.
    pub fn point(&self, i: usize) -> [i64; MAX_DIM] {
        let c = self.coords(i);
        let half = (self.side / 2) as i64;
        let mut x = [0; MAX_DIM];
        for k in 0..self.dim {
            x[k] = c[k] as i64 - half;
        }
        x
    }

    /// Site holding lattice point `x`, wrapping modulo the side.
    pub fn site_of_point(&self, x: &[i64]) -> usize {
        let half = (self.side / 2) as i64;
        let l = self.side as i64;
        let c: Vec<usize> = x.iter().map(|&v| (v + half).rem_euclid(l) as usize).collect();
        self.index(&c)
    }

    /// Macroscopic position `x/N`.
    pub fn macro_position(&self, i: usize, scale_n: u64) -> Vec<f64> {
        let x = self.point(i);
        (0..self.dim).map(|k| x[k] as f64 / scale_n as f64).collect()
    }

    /// Site reached from `i` by displacement `d`; `None` when `no_wrap` is set
    /// and the jump leaves the window.
    #[inline]
    pub fn target(&self, i: usize, d: &[i32]) -> Option<usize> {
        let l = self.side as i64;
        if self.dim == 1 {
            let t = i as i64 + d[0] as i64;
            if (0..l).contains(&t) {
                return Some(t as usize);
            }
            if self.no_wrap {
                return None;
            }
            return Some(t.rem_euclid(l) as usize);
        }
        let c = self.coords(i);
        let mut out = 0usize;
        for k in (0..self.dim).rev() {
            let mut t = c[k] as i64 + d[k] as i64;
            if !(0..l).contains(&t) {
                if self.no_wrap {
                    return None;
                }
                t = t.rem_euclid(l);
            }
            out = out * self.side + t as usize;
        }
        Some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_round_trip() {
        let t = Torus::new(2, 6, false).unwrap();
        for i in 0..t.sites() {
            let c = t.coords(i);
            assert_eq!(t.index(&c[..2]), i);
            let x = t.point(i);
            assert_eq!(t.site_of_point(&x[..2]), i);
        }
        assert_eq!(t.point(0)[..2], [-3, -3]);
    }

    #[test]
    fn wrapping_and_no_wrap() {
        let t = Torus::new(1, 8, false).unwrap();
        assert_eq!(t.target(6, &[3]), Some(1));
        assert_eq!(t.target(1, &[-3]), Some(6));
        let t = Torus::new(1, 8, true).unwrap();
        assert_eq!(t.target(6, &[3]), None);
        assert_eq!(t.target(6, &[1]), Some(7));
        let t2 = Torus::new(2, 4, false).unwrap();
        assert_eq!(t2.target(t2.index(&[3, 1]), &[1, 2]), Some(t2.index(&[0, 3])));
        let t2 = Torus::new(2, 4, true).unwrap();
        assert_eq!(t2.target(t2.index(&[3, 1]), &[1, 2]), None);
    }
}
