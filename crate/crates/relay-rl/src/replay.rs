//! Prioritized experience replay: ring storage under a sum tree, proportional
//! stratified sampling and importance-sampling weights.
//!
//! Leaves store `p^alpha` where `p = |td| + eps` is the raw priority, so a
//! plain proportional descent over the tree realizes the `p^alpha / sum p^alpha`
//! sampling law. With `alpha = 0` every occupied leaf has mass 1 and the
//! buffer degrades to uniform replay, which is what the value-based baseline
//! uses.

use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ReplayError {
    #[error("buffer holds {have} units, {need} requested")]
    InsufficientUnits { have: usize, need: usize },
    #[error("batch size must be positive")]
    EmptyBatch,
    #[error("index {index} does not refer to a stored unit (len {len})")]
    InvalidIndex { index: usize, len: usize },
    #[error("{indices} indices but {values} TD errors")]
    LengthMismatch { indices: usize, values: usize },
    #[error("TD error at position {position} is not finite")]
    NonFiniteTdError { position: usize },
    #[error("sum tree node {node} off by {deviation} relative")]
    TreeInconsistent { node: usize, deviation: f64 },
}

/// One stored interaction. The action is whatever vector the acting agent fed
/// its critic: the post-noise continuous output for the policy-gradient agent,
/// a single discrete index for the value-based baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperienceUnit {
    pub state_features: Vec<f64>,
    pub action_raw: Vec<f64>,
    pub reward: u8,
    pub next_state_features: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SampledBatch {
    pub units: Vec<ExperienceUnit>,
    /// Leaf indices for priority write-back.
    pub indices: Vec<usize>,
    /// Importance-sampling weights, max-normalized to (0, 1].
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct PrioritizedBuffer {
    capacity: usize,
    /// Complete binary tree in array form; `capacity - 1` internal nodes
    /// followed by `capacity` leaves holding `p^alpha`.
    tree: Vec<f64>,
    units: Vec<ExperienceUnit>,
    write_pos: usize,
    len: usize,
    max_priority_seen: f64,
    alpha: f64,
    is_exponent: f64,
    priority_floor: f64,
}

impl PrioritizedBuffer {
    /// `alpha` shapes the sampling law, `is_exponent` (kappa) the weight
    /// correction, `priority_floor` (eps) keeps zero-TD units sampleable.
    pub fn new(capacity: usize, alpha: f64, is_exponent: f64, priority_floor: f64) -> Self {
        assert!(capacity >= 1, "capacity must be positive");
        assert!((0.0..=1.0).contains(&alpha), "alpha must lie in [0, 1]");
        assert!(
            (0.0..=1.0).contains(&is_exponent),
            "is_exponent must lie in [0, 1]"
        );
        assert!(priority_floor > 0.0, "priority floor must be positive");
        Self {
            capacity,
            tree: vec![0.0; 2 * capacity - 1],
            units: Vec::new(),
            write_pos: 0,
            len: 0,
            max_priority_seen: 1.0,
            alpha,
            is_exponent,
            priority_floor,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn total_mass(&self) -> f64 {
        self.tree[0]
    }

    pub fn max_priority_seen(&self) -> f64 {
        self.max_priority_seen
    }

    /// Sampling mass (`p^alpha`) currently stored at leaf `index`.
    pub fn leaf_mass(&self, index: usize) -> f64 {
        self.tree[index + self.capacity - 1]
    }

    pub fn unit(&self, index: usize) -> Option<&ExperienceUnit> {
        self.units.get(index)
    }

    /// Stores a unit with the maximum priority seen so far (1.0 while nothing
    /// has been updated yet), overwriting the oldest entry when full.
    /// Returns the leaf index the unit landed on.
    pub fn push(&mut self, unit: ExperienceUnit) -> usize {
        let index = self.write_pos;
        if self.len < self.capacity {
            self.units.push(unit);
            self.len += 1;
        } else {
            self.units[index] = unit;
        }
        self.set_leaf(index, self.max_priority_seen.powf(self.alpha));
        self.write_pos = (self.write_pos + 1) % self.capacity;
        index
    }

    /// Draws `batch_size` units, one per equal-mass segment of the total
    /// priority, and computes max-normalized importance weights
    /// `w_i = (N * P(i))^-kappa / max_j w_j`.
    pub fn sample<R: Rng>(
        &self,
        batch_size: usize,
        rng: &mut R,
    ) -> Result<SampledBatch, ReplayError> {
        if batch_size == 0 {
            return Err(ReplayError::EmptyBatch);
        }
        if self.len < batch_size {
            return Err(ReplayError::InsufficientUnits {
                have: self.len,
                need: batch_size,
            });
        }
        let total = self.total_mass();
        debug_assert!(total > 0.0);
        let segment = total / batch_size as f64;
        let mut units = Vec::with_capacity(batch_size);
        let mut indices = Vec::with_capacity(batch_size);
        let mut weights = Vec::with_capacity(batch_size);
        let n = self.len as f64;
        for s in 0..batch_size {
            let target = (s as f64 + rng.random::<f64>()) * segment;
            let index = self.retrieve(target);
            let probability = self.leaf_mass(index) / total;
            weights.push((n * probability).powf(-self.is_exponent));
            units.push(self.units[index].clone());
            indices.push(index);
        }
        let max_w = weights.iter().cloned().fold(f64::MIN, f64::max);
        for w in &mut weights {
            *w /= max_w;
        }
        Ok(SampledBatch {
            units,
            indices,
            weights,
        })
    }

    /// Writes back `p = |td| + eps` for each sampled unit. The whole call is
    /// rejected before any mutation if an index or TD error is invalid.
    pub fn update_priorities(
        &mut self,
        indices: &[usize],
        td_errors: &[f64],
    ) -> Result<(), ReplayError> {
        if indices.len() != td_errors.len() {
            return Err(ReplayError::LengthMismatch {
                indices: indices.len(),
                values: td_errors.len(),
            });
        }
        for &index in indices {
            if index >= self.len {
                return Err(ReplayError::InvalidIndex {
                    index,
                    len: self.len,
                });
            }
        }
        for (position, td) in td_errors.iter().enumerate() {
            if !td.is_finite() {
                return Err(ReplayError::NonFiniteTdError { position });
            }
        }
        for (&index, &td) in indices.iter().zip(td_errors) {
            let priority = td.abs() + self.priority_floor;
            self.set_leaf(index, priority.powf(self.alpha));
            if priority > self.max_priority_seen {
                self.max_priority_seen = priority;
            }
        }
        Ok(())
    }

    /// Verifies that every internal node equals the sum of its children within
    /// `rel_tol` relative deviation (scaled by the total mass).
    pub fn check_tree_consistency(&self, rel_tol: f64) -> Result<(), ReplayError> {
        let scale = self.total_mass().max(1.0);
        for node in 0..self.capacity - 1 {
            let expected = self.tree[2 * node + 1] + self.tree[2 * node + 2];
            let deviation = (self.tree[node] - expected).abs() / scale;
            if deviation > rel_tol {
                return Err(ReplayError::TreeInconsistent { node, deviation });
            }
        }
        Ok(())
    }

    /// Root-versus-leaf-sum deviation relative to the total mass.
    pub fn root_deviation(&self) -> f64 {
        let leaf_sum: f64 = (0..self.capacity).map(|i| self.leaf_mass(i)).sum();
        (self.total_mass() - leaf_sum).abs() / leaf_sum.max(1.0)
    }

    fn set_leaf(&mut self, index: usize, mass: f64) {
        let mut node = index + self.capacity - 1;
        let change = mass - self.tree[node];
        self.tree[node] = mass;
        while node > 0 {
            node = (node - 1) / 2;
            self.tree[node] += change;
        }
    }

    /// Descends from the root towards the leaf whose cumulative mass interval
    /// contains `target`. Zero-mass subtrees are never entered while the
    /// invariant `target < subtree total` holds, and the right-empty guard
    /// keeps boundary rounding from falling off the occupied region.
    fn retrieve(&self, mut target: f64) -> usize {
        let mut node = 0usize;
        loop {
            let left = 2 * node + 1;
            if left >= self.tree.len() {
                return node + 1 - self.capacity;
            }
            let right = left + 1;
            if target < self.tree[left] || self.tree[right] <= 0.0 {
                node = left;
            } else {
                target -= self.tree[left];
                node = right;
            }
        }
    }
}
