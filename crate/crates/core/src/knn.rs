//! Distance-weighted k-nearest-neighbor regression with a neighborhood
//! spread estimate.
//!
//! For a query `q`, the `k` stored points with the smallest Euclidean
//! distance `d_i` (ties to the lower stored index) give
//!
//! ```text
//! r_hat     = sum(w_i * y_i) / sum(w_i),   w_i = 1 / (d_i + eps)
//! sigma_hat = population std of the k neighbor targets (unweighted)
//! ```
//!
//! Every stored point carries a rule one-hot, and a query for rule `h`
//! differs from its siblings for other rules only in that block. The squared
//! distance is therefore split into a state part, computed once per stored
//! point, plus a 7x7 table of one-hot distances, which lets all seven rules be
//! scored in one pass over the training set.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::features::{state_features, FeatureVector, Normalizer, NUM_FEATURES, NUM_STATE_FEATURES, ONE_HOT_OFFSET};
use crate::labeler::{LabelKind, LabeledSample};
use crate::rng::fnv1a;
use crate::rules::{RuleId, NUM_RULES};
use crate::schedule::ScheduleState;

pub const DEFAULT_K: usize = 7;
pub const DEFAULT_EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub r_hat: f64,
    pub sigma_hat: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectorModel {
    normalizer: Normalizer,
    /// Normalized training vectors.
    points: Vec<FeatureVector>,
    targets: Vec<f64>,
    /// Candidate rule of each stored point.
    rules: Vec<RuleId>,
    k: usize,
    epsilon: f64,
    label_kind: LabelKind,
    default_rule: RuleId,
    // derived: squared normalized distance between one-hot blocks
    one_hot_sq: [[f64; NUM_RULES]; NUM_RULES],
}

impl SelectorModel {
    /// Fits the normalizer on every sample and stores the normalized points.
    pub fn fit(
        dataset: &[LabeledSample],
        k: usize,
        epsilon: f64,
        label_kind: LabelKind,
        default_rule: RuleId,
    ) -> Result<Self> {
        if k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if dataset.len() < k {
            return Err(Error::DatasetTooSmall { have: dataset.len(), k });
        }
        let normalizer = Normalizer::fit(dataset.iter().map(|s| &s.features))?;
        let points = dataset.iter().map(|s| normalizer.normalize(&s.features)).collect();
        let targets = dataset.iter().map(|s| s.target).collect();
        let rules = dataset.iter().map(|s| s.rule).collect();
        Self::from_parts(normalizer, points, targets, rules, k, epsilon, label_kind, default_rule)
    }

    /// Assembles a model from stored parts, e.g. after loading from disk.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        normalizer: Normalizer,
        points: Vec<FeatureVector>,
        targets: Vec<f64>,
        rules: Vec<RuleId>,
        k: usize,
        epsilon: f64,
        label_kind: LabelKind,
        default_rule: RuleId,
    ) -> Result<Self> {
        if k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if points.len() != targets.len() || points.len() != rules.len() {
            return Err(Error::Config("points, targets and rules differ in length".into()));
        }
        if points.len() < k {
            return Err(Error::DatasetTooSmall { have: points.len(), k });
        }
        if !(epsilon > 0.0) {
            return Err(Error::Config("epsilon must be positive".into()));
        }
        let one_hot_sq = one_hot_table(&normalizer);
        Ok(SelectorModel { normalizer, points, targets, rules, k, epsilon, label_kind, default_rule, one_hot_sq })
    }

    pub fn normalizer(&self) -> &Normalizer {
        &self.normalizer
    }

    pub fn points(&self) -> &[FeatureVector] {
        &self.points
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn rules(&self) -> &[RuleId] {
        &self.rules
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn label_kind(&self) -> LabelKind {
        self.label_kind
    }

    pub fn default_rule(&self) -> RuleId {
        self.default_rule
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Prediction for one candidate rule at `state`.
    pub fn predict(&self, state: &ScheduleState<'_>, rule: RuleId) -> Result<Prediction> {
        let all = self.predict_all(state)?;
        Ok(all[rule.code()])
    }

    /// Predictions for all seven rules, indexed by rule code. State features
    /// are extracted and normalized once.
    pub fn predict_all(&self, state: &ScheduleState<'_>) -> Result<[Prediction; NUM_RULES]> {
        let raw = state_features(state)?;
        let mut query = [0.0; NUM_STATE_FEATURES];
        for (d, q) in query.iter_mut().enumerate() {
            *q = self.normalizer.normalize_dim(d, raw[d]);
        }
        Ok(self.predict_normalized_state(&query))
    }

    /// Predictions for all rules from an already-normalized state part.
    pub fn predict_normalized_state(&self, query: &[f64; NUM_STATE_FEATURES]) -> [Prediction; NUM_RULES] {
        let mut best: [Neighbors; NUM_RULES] = core::array::from_fn(|_| Neighbors::new(self.k));
        for (i, (p, &r)) in self.points.iter().zip(&self.rules).enumerate() {
            let mut state_sq = 0.0;
            for d in 0..NUM_STATE_FEATURES {
                let diff = query[d] - p.0[d];
                state_sq += diff * diff;
            }
            for (h, nb) in best.iter_mut().enumerate() {
                let dist = libm::sqrt(state_sq + self.one_hot_sq[h][r.code()]);
                nb.offer(dist, i);
            }
        }
        core::array::from_fn(|h| self.aggregate(&best[h]))
    }

    fn aggregate(&self, nb: &Neighbors) -> Prediction {
        weighted_prediction(nb.items.iter().map(|&(d, i)| (d, self.targets[i])), self.epsilon)
    }

    /// Stable 64-bit digest of every stored parameter.
    pub fn fingerprint(&self) -> u64 {
        let mut bytes = Vec::with_capacity(64 + self.points.len() * (NUM_FEATURES + 2) * 8);
        bytes.extend_from_slice(&(self.k as u64).to_le_bytes());
        bytes.extend_from_slice(&self.epsilon.to_bits().to_le_bytes());
        bytes.push(self.label_kind.code());
        bytes.push(self.default_rule.code() as u8);
        for x in self.normalizer.mean.iter().chain(&self.normalizer.std) {
            bytes.extend_from_slice(&x.to_bits().to_le_bytes());
        }
        bytes.extend_from_slice(&self.normalizer.epsilon.to_bits().to_le_bytes());
        for ((p, y), r) in self.points.iter().zip(&self.targets).zip(&self.rules) {
            for x in p.0.iter().chain(core::iter::once(y)) {
                bytes.extend_from_slice(&x.to_bits().to_le_bytes());
            }
            bytes.push(r.code() as u8);
        }
        fnv1a(&bytes)
    }
}

/// `r_hat` and `sigma_hat` from `(distance, target)` neighbor pairs.
pub fn weighted_prediction(neighbors: impl Iterator<Item = (f64, f64)> + Clone, epsilon: f64) -> Prediction {
    let mut wsum = 0.0;
    let mut wy = 0.0;
    let mut n = 0usize;
    let mut ysum = 0.0;
    for (d, y) in neighbors.clone() {
        let w = 1.0 / (d + epsilon);
        wsum += w;
        wy += w * y;
        ysum += y;
        n += 1;
    }
    let mean = ysum / n as f64;
    let var = neighbors.map(|(_, y)| (y - mean) * (y - mean)).sum::<f64>() / n as f64;
    Prediction { r_hat: wy / wsum, sigma_hat: libm::sqrt(var) }
}

fn one_hot_table(norm: &Normalizer) -> [[f64; NUM_RULES]; NUM_RULES] {
    let encode = |rule: usize| -> [f64; NUM_RULES] {
        core::array::from_fn(|c| norm.normalize_dim(ONE_HOT_OFFSET + c, if c == rule { 1.0 } else { 0.0 }))
    };
    let codes: [[f64; NUM_RULES]; NUM_RULES] = core::array::from_fn(encode);
    core::array::from_fn(|a| {
        core::array::from_fn(|b| {
            let mut s = 0.0;
            for c in 0..NUM_RULES {
                let diff = codes[a][c] - codes[b][c];
                s += diff * diff;
            }
            s
        })
    })
}

/// The k best `(distance, index)` pairs seen so far, sorted ascending.
struct Neighbors {
    k: usize,
    items: Vec<(f64, usize)>,
}

impl Neighbors {
    fn new(k: usize) -> Self {
        Neighbors { k, items: Vec::with_capacity(k + 1) }
    }

    // Indices arrive in increasing order, so a candidate equal in distance to
    // a kept item ranks after it.
    #[inline]
    fn offer(&mut self, dist: f64, index: usize) {
        if self.items.len() == self.k {
            if dist >= self.items[self.k - 1].0 {
                return;
            }
            self.items.pop();
        }
        let pos = self.items.partition_point(|&(d, _)| d <= dist);
        self.items.insert(pos, (dist, index));
    }
}
