//! Multi-criteria density-based clustering: DBSCAN whose neighborhood
//! predicate conjoins spatial, directional, and color thresholds, with a
//! KD-tree prefilter on the spatial criterion.

use crate::error::Result;
use crate::kdtree::SpatialIndex;
use crate::splat::{principal_direction, ActivatedSplat};

pub const NOISE: i32 = -1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterParams {
    /// Spatial radius in scene units.
    pub eps_spatial: f64,
    /// Directional threshold in [0, 1].
    pub eps_direction: f64,
    /// RGB Euclidean distance threshold.
    pub eps_color: f64,
    /// Minimum neighbor count (excluding the point itself) for a core point.
    pub min_samples: usize,
}

impl Default for ClusterParams {
    fn default() -> Self {
        // eps_spatial is scene-relative; callers usually derive it from the
        // bbox diagonal (see `ClusterParams::scaled`).
        ClusterParams {
            eps_spatial: 0.005,
            eps_direction: 0.1,
            eps_color: 0.1,
            min_samples: 8,
        }
    }
}

impl ClusterParams {
    /// Default parameters with the spatial radius scaled to the scene:
    /// eps_spatial = 0.005 * bbox diagonal.
    pub fn scaled(bbox_diagonal: f64) -> Self {
        ClusterParams {
            eps_spatial: 0.005 * bbox_diagonal,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Core,
    Border,
    Noise,
}

/// Per-splat cluster assignment. `label[i] == NOISE` iff `role[i] == Noise`.
#[derive(Debug, Clone)]
pub struct Labeling {
    pub label: Vec<i32>,
    pub role: Vec<Role>,
    pub cluster_count: usize,
}

impl Labeling {
    /// Member index lists per cluster id, ascending within each cluster.
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.cluster_count];
        for (i, &l) in self.label.iter().enumerate() {
            if l >= 0 {
                out[l as usize].push(i);
            }
        }
        out
    }

    pub fn noise_indices(&self) -> Vec<usize> {
        self.label
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == NOISE)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Precomputed per-splat features consumed by the neighborhood predicate.
#[derive(Debug, Clone)]
pub struct SplatFeatures {
    pub positions: Vec<[f64; 3]>,
    pub directions: Vec<[f64; 3]>,
    pub colors: Vec<[f64; 3]>,
}

impl SplatFeatures {
    pub fn from_activated(splats: &[ActivatedSplat]) -> Self {
        SplatFeatures {
            positions: splats.iter().map(|s| s.position).collect(),
            directions: splats.iter().map(principal_direction).collect(),
            colors: splats.iter().map(|s| s.rgb).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// d_direction(i,j) = 1 - (cos(n_i, n_j) + 1) / 2, in [0, 1].
pub fn direction_distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dot: f64 = (0..3).map(|k| a[k] * b[k]).sum();
    let cos = dot.clamp(-1.0, 1.0);
    1.0 - (cos + 1.0) / 2.0
}

fn color_distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (0..3)
        .map(|k| (a[k] - b[k]) * (a[k] - b[k]))
        .sum::<f64>()
        .sqrt()
}

/// Neighbors of splat `i`: spatially filtered through the index first,
/// then the directional and color constraints on the candidates. All three
/// thresholds are inclusive; `i` itself is excluded.
pub fn multi_criteria_neighbors(
    i: usize,
    features: &SplatFeatures,
    index: &SpatialIndex,
    params: &ClusterParams,
) -> Vec<usize> {
    let mut candidates = Vec::new();
    index.query_into(&features.positions[i], params.eps_spatial, &mut candidates);
    candidates
        .into_iter()
        .filter(|&j| {
            j != i
                && direction_distance(&features.directions[i], &features.directions[j])
                    <= params.eps_direction
                && color_distance(&features.colors[i], &features.colors[j]) <= params.eps_color
        })
        .collect()
}

/// DBSCAN over the conjunctive predicate. Cluster ids are assigned in
/// ascending order of the lowest splat index touched; the BFS expands by
/// ascending index, so the full labeling is deterministic.
pub fn dbscan(features: &SplatFeatures, params: &ClusterParams) -> Result<Labeling> {
    let n = features.len();
    let index = SpatialIndex::build(&features.positions)?;

    let neighbors: Vec<Vec<usize>> = (0..n)
        .map(|i| multi_criteria_neighbors(i, features, &index, params))
        .collect();

    let mut label = vec![NOISE; n];
    let mut role = vec![Role::Noise; n];
    let mut cluster_count = 0usize;

    for seed in 0..n {
        if label[seed] != NOISE || neighbors[seed].len() < params.min_samples {
            continue;
        }
        let id = cluster_count as i32;
        cluster_count += 1;
        label[seed] = id;
        role[seed] = Role::Core;
        let mut queue: std::collections::VecDeque<usize> = neighbors[seed].iter().copied().collect();
        while let Some(j) = queue.pop_front() {
            if label[j] == NOISE {
                label[j] = id;
                if neighbors[j].len() >= params.min_samples {
                    role[j] = Role::Core;
                    queue.extend(neighbors[j].iter().copied());
                } else {
                    role[j] = Role::Border;
                }
            }
        }
    }

    Ok(Labeling {
        label,
        role,
        cluster_count,
    })
}
