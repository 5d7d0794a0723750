//! Fenwick tree over integer weights, used to draw an index with probability
//! proportional to its weight while weights change one step at a time.

#[derive(Debug, Clone)]
pub struct PrefixSumTree {
    // 1-based Fenwick layout; tree[0] is unused.
    tree: Vec<u64>,
    weights: Vec<u64>,
    total: u64,
}

#[inline]
fn lowbit(i: usize) -> usize {
    i & i.wrapping_neg()
}

impl PrefixSumTree {
    pub fn new(weights: &[u64]) -> Self {
        let len = weights.len();
        let mut tree = vec![0u64; len + 1];
        tree[1..].copy_from_slice(weights);
        for i in 1..=len {
            let parent = i + lowbit(i);
            if parent <= len {
                tree[parent] += tree[i];
            }
        }
        Self {
            tree,
            weights: weights.to_vec(),
            total: weights.iter().sum(),
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn weight(&self, index: usize) -> u64 {
        self.weights[index]
    }

    pub fn weights(&self) -> &[u64] {
        &self.weights
    }

    /// Sum of the weights at indices `0..=index`.
    pub fn prefix_sum(&self, index: usize) -> u64 {
        let mut i = index + 1;
        let mut sum = 0;
        while i > 0 {
            sum += self.tree[i];
            i -= lowbit(i);
        }
        sum
    }

    pub fn add(&mut self, index: usize, delta: i64) {
        let w = self.weights[index] as i64 + delta;
        assert!(w >= 0, "weight at {index} would become negative");
        self.weights[index] = w as u64;
        self.total = (self.total as i64 + delta) as u64;
        let mut i = index + 1;
        while i < self.tree.len() {
            self.tree[i] = (self.tree[i] as i64 + delta) as u64;
            i += lowbit(i);
        }
    }

    pub fn set(&mut self, index: usize, weight: u64) {
        let delta = weight as i64 - self.weights[index] as i64;
        if delta != 0 {
            self.add(index, delta);
        }
    }

    /// The index `i` with `prefix_sum(i - 1) <= target < prefix_sum(i)`.
    ///
    /// Drawing `target` uniformly from `0..total()` selects `i` with
    /// probability `weight(i) / total()`.
    pub fn find(&self, target: u64) -> usize {
        debug_assert!(target < self.total);
        let len = self.weights.len();
        let mut pos = 0usize;
        let mut rem = target;
        let mut step = if len == 0 {
            0
        } else {
            1usize << (usize::BITS - 1 - len.leading_zeros())
        };
        while step > 0 {
            let next = pos + step;
            if next <= len && self.tree[next] <= rem {
                rem -= self.tree[next];
                pos = next;
            }
            step >>= 1;
        }
        pos
    }
}
