/// Binary indexed tree over `u64` weights; exact integer prefix sums.
#[derive(Clone, Debug)]
pub struct Fenwick {
    tree: Vec<u64>,
    leaves: Vec<u64>,
    total: u64,
    top: usize,
}

impl Fenwick {
    pub fn from_weights(weights: &[u64]) -> Self {
        let n = weights.len();
        let mut tree = vec![0u64; n + 1];
        for (i, &w) in weights.iter().enumerate() {
            tree[i + 1] += w;
            let parent = (i + 1) + ((i + 1) & (i + 1).wrapping_neg());
            if parent <= n {
                tree[parent] += tree[i + 1];
            }
        }
        let top = if n == 0 { 0 } else { 1 << (usize::BITS - 1 - n.leading_zeros()) };
        Fenwick {
            tree,
            leaves: weights.to_vec(),
            total: weights.iter().sum(),
            top,
        }
    }

    pub fn len(&self) -> usize {
        self.leaves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.leaves.is_empty()
    }

    #[inline]
    pub fn total(&self) -> u64 {
        self.total
    }

    #[inline]
    pub fn get(&self, i: usize) -> u64 {
        self.leaves[i]
    }

    pub fn set(&mut self, i: usize, w: u64) {
        let old = self.leaves[i];
        if old == w {
            return;
        }
        self.leaves[i] = w;
        self.total = self.total - old + w;
        let mut k = i + 1;
        if w > old {
            let delta = w - old;
            while k < self.tree.len() {
                self.tree[k] += delta;
                k += k & k.wrapping_neg();
            }
        } else {
            let delta = old - w;
            while k < self.tree.len() {
                self.tree[k] -= delta;
                k += k & k.wrapping_neg();
            }
        }
    }

    /// Sum of the first `i` leaves.
    pub fn prefix(&self, i: usize) -> u64 {
        let mut k = i;
        let mut s = 0;
        while k > 0 {
            s += self.tree[k];
            k &= k - 1;
        }
        s
    }

    /// Smallest `i` with `prefix(i + 1) > target`; needs `target < total`.
    #[inline]
    pub fn find(&self, mut target: u64) -> usize {
        debug_assert!(target < self.total);
        let mut pos = 0;
        let mut step = self.top;
        while step > 0 {
            let next = pos + step;
            if next < self.tree.len() && self.tree[next] <= target {
                target -= self.tree[next];
                pos = next;
            }
            step >>= 1;
        }
        pos
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prefix_sums_and_search() {
        let w = [3u64, 0, 5, 1, 0, 0, 7];
        let mut f = Fenwick::from_weights(&w);
        assert_eq!(f.total(), 16);
        for i in 0..=w.len() {
            assert_eq!(f.prefix(i), w[..i].iter().sum::<u64>());
        }
        let expected: Vec<usize> = w
            .iter()
            .enumerate()
            .flat_map(|(i, &k)| std::iter::repeat_n(i, k as usize))
            .collect();
        for (t, &e) in expected.iter().enumerate() {
            assert_eq!(f.find(t as u64), e);
        }
        f.set(2, 0);
        f.set(5, 2);
        assert_eq!(f.total(), 13);
        assert_eq!(f.find(3), 3);
        assert_eq!(f.find(4), 5);
        assert_eq!(f.find(6), 6);
    }
}
