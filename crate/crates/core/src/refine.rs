//! Quality-driven cluster refinement: residual-feature K-means splitting,
//! worklist recursion with depth and size gates, IQR scale-outlier
//! reclassification, and the final Sketch/Patch categorization.

use crate::cluster::{dbscan, ClusterParams, SplatFeatures};
use crate::error::{Error, Result};
use crate::kmeans::{kmeans, partitions};
use crate::polyfit::{
    extract_attributes, grid_search_fit, member_positions, normalization_bounds,
    normalize_positions, predict_attributes, ClusterModel, ATTR_TOTAL_DIM,
};
use crate::splat::{activate, ActivatedSplat, Scene};
use std::collections::VecDeque;

const IQR_MULTIPLIER: f64 = 1.5;
const KMEANS_MAX_ITERS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefineParams {
    /// Combined-MSE acceptance threshold.
    pub tau_max: f64,
    /// Residual/spatial fusion weight in [0, 1].
    pub beta: f64,
    /// Minimum accepted cluster size.
    pub s_min: usize,
    /// Maximum split depth.
    pub t_max: usize,
    pub kmeans_seed: u64,
}

impl Default for RefineParams {
    fn default() -> Self {
        RefineParams {
            tau_max: 0.01,
            beta: 0.5,
            s_min: 50,
            t_max: 5,
            kmeans_seed: 0,
        }
    }
}

/// Final scene partition: accepted Sketch clusters and everything else.
#[derive(Debug, Clone)]
pub struct Categorization {
    pub sketch_clusters: Vec<ClusterModel>,
    /// Ascending splat indices not covered by any sketch cluster.
    pub patch_indices: Vec<usize>,
}

impl Categorization {
    pub fn sketch_count(&self) -> usize {
        self.sketch_clusters.iter().map(|c| c.member_indices.len()).sum()
    }
}

/// Per-splat absolute attribute residuals, each column min-max normalized to
/// [0, 1] across the cluster; 3+4+1+48 = 56 columns.
pub fn residual_features(
    activated: &[ActivatedSplat],
    model: &ClusterModel,
) -> nalgebra::DMatrix<f64> {
    let members = &model.member_indices;
    let n = members.len();
    let positions = member_positions(activated, members);
    let actual = extract_attributes(activated, members);
    let pred = predict_attributes(&model.models, &positions);

    let mut resid = nalgebra::DMatrix::zeros(n, ATTR_TOTAL_DIM);
    for row in 0..n {
        let mut col = 0;
        for a in 0..3 {
            resid[(row, col + a)] = (pred.scale[row][a] - actual[0][(row, a)]).abs();
        }
        col += 3;
        for a in 0..4 {
            resid[(row, col + a)] = (pred.rot_unit[row][a] - actual[1][(row, a)]).abs();
        }
        col += 4;
        resid[(row, col)] = (pred.opacity[row] - actual[2][(row, 0)]).abs();
        col += 1;
        for a in 0..48 {
            resid[(row, col + a)] = (pred.color[row][a] - actual[3][(row, a)]).abs();
        }
    }
    for col in 0..ATTR_TOTAL_DIM {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for row in 0..n {
            lo = lo.min(resid[(row, col)]);
            hi = hi.max(resid[(row, col)]);
        }
        // spans at numerical-noise scale would amplify round-off into
        // full-range features, so treat them as degenerate
        let span = hi - lo;
        for row in 0..n {
            resid[(row, col)] = if span > 1e-12 {
                (resid[(row, col)] - lo) / span
            } else {
                0.0
            };
        }
    }
    resid
}

/// Split severity rule: k = clamp(ceil(mse/tau) + 1, 2, 4).
pub fn split_k(mse_combined: f64, tau_max: f64) -> usize {
    (((mse_combined / tau_max).ceil() as i64 + 1).clamp(2, 4)) as usize
}

/// Partitions a poorly modeled cluster by K-means over fused
/// residual/position features. Returns `None` when the cluster is too small
/// to split (size < 2 * s_min); the caller keeps it whole.
pub fn split_cluster(
    activated: &[ActivatedSplat],
    model: &ClusterModel,
    params: &RefineParams,
) -> Option<Vec<Vec<usize>>> {
    let members = &model.member_indices;
    let n = members.len();
    if n < 2 * params.s_min {
        return None;
    }
    let resid = residual_features(activated, model);
    let positions = member_positions(activated, members);
    let (lo, hi) = normalization_bounds(&positions);
    let x_norm = normalize_positions(&positions, &lo, &hi);

    let dim = ATTR_TOTAL_DIM + 3;
    let mut fused = vec![0.0f64; n * dim];
    for row in 0..n {
        for c in 0..ATTR_TOTAL_DIM {
            fused[row * dim + c] = params.beta * resid[(row, c)];
        }
        for a in 0..3 {
            fused[row * dim + ATTR_TOTAL_DIM + a] = (1.0 - params.beta) * x_norm[(row, a)];
        }
    }

    let k = split_k(model.mse_combined, params.tau_max);
    let result = kmeans(&fused, dim, k, params.kmeans_seed, KMEANS_MAX_ITERS);
    let parts = partitions(&result, k);
    Some(
        parts
            .into_iter()
            .map(|p| p.into_iter().map(|r| members[r]).collect())
            .collect(),
    )
}

/// Worklist recursion over initial clusters: accept clusters meeting the
/// quality and size gates, split the rest, and reject what cannot improve.
pub fn refine_partition(
    initial: Vec<Vec<usize>>,
    activated: &[ActivatedSplat],
    params: &RefineParams,
) -> Result<(Vec<ClusterModel>, Vec<usize>)> {
    let mut accepted = Vec::new();
    let mut rejected: Vec<usize> = Vec::new();
    let mut worklist: VecDeque<(Vec<usize>, usize)> =
        initial.into_iter().map(|c| (c, 0usize)).collect();

    while let Some((members, depth)) = worklist.pop_front() {
        if members.is_empty() {
            continue;
        }
        if members.len() < params.s_min {
            rejected.extend(members);
            continue;
        }
        let positions = member_positions(activated, &members);
        let attrs = extract_attributes(activated, &members);
        let model = grid_search_fit(&positions, &attrs, members)?;

        if model.mse_combined <= params.tau_max {
            accepted.push(model);
            continue;
        }
        if depth >= params.t_max {
            rejected.extend(model.member_indices);
            continue;
        }
        match split_cluster(activated, &model, params) {
            Some(children) => {
                for child in children {
                    worklist.push_back((child, depth + 1));
                }
            }
            None => rejected.extend(model.member_indices),
        }
    }
    Ok((accepted, rejected))
}

/// Linear-interpolation quantile of an unsorted sample.
fn quantile(values: &mut [f64], q: f64) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n == 1 {
        return values[0];
    }
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    values[lo] * (1.0 - frac) + values[hi] * frac
}

/// Tukey-fence outlier removal on decoded per-axis scales. Members outside
/// the fences are reclassified; clusters that shrink below s_min are dropped
/// wholesale; survivors are refit once and must still pass the MSE gate.
pub fn iqr_scale_filter(
    models: Vec<ClusterModel>,
    activated: &[ActivatedSplat],
    params: &RefineParams,
) -> Result<(Vec<ClusterModel>, Vec<usize>)> {
    let mut kept = Vec::new();
    let mut reclassified: Vec<usize> = Vec::new();

    for model in models {
        let members = &model.member_indices;
        let n = members.len();
        let positions = member_positions(activated, members);
        let decoded = predict_attributes(&model.models, &positions);

        let mut fences = [[0.0f64; 2]; 3];
        for axis in 0..3 {
            let mut vals: Vec<f64> = (0..n).map(|r| decoded.scale[r][axis]).collect();
            let q1 = quantile(&mut vals.clone(), 0.25);
            let q3 = quantile(&mut vals, 0.75);
            let iqr = q3 - q1;
            fences[axis] = [q1 - IQR_MULTIPLIER * iqr, q3 + IQR_MULTIPLIER * iqr];
        }
        let mut survivors = Vec::with_capacity(n);
        let mut outliers = Vec::new();
        for row in 0..n {
            let out = (0..3).any(|axis| {
                decoded.scale[row][axis] < fences[axis][0]
                    || decoded.scale[row][axis] > fences[axis][1]
            });
            if out {
                outliers.push(members[row]);
            } else {
                survivors.push(members[row]);
            }
        }

        if survivors.len() < params.s_min {
            reclassified.extend(model.member_indices);
            continue;
        }
        if outliers.is_empty() {
            kept.push(model);
            continue;
        }
        reclassified.extend(outliers);
        let positions = member_positions(activated, &survivors);
        let attrs = extract_attributes(activated, &survivors);
        let refit = grid_search_fit(&positions, &attrs, survivors)?;
        if refit.mse_combined <= params.tau_max {
            kept.push(refit);
        } else {
            reclassified.extend(refit.member_indices);
        }
    }
    Ok((kept, reclassified))
}

/// Full categorization pipeline: activate, cluster, refine, IQR-filter.
/// Noise, rejected, and reclassified splats become the Patch set.
pub fn categorize(
    scene: &Scene,
    cluster_params: &ClusterParams,
    refine_params: &RefineParams,
) -> Result<Categorization> {
    if scene.is_empty() {
        return Err(Error::Input("categorize: empty scene".into()));
    }
    let activated: Vec<ActivatedSplat> = scene
        .splats
        .iter()
        .enumerate()
        .map(|(i, s)| activate(s).map_err(|e| Error::Data(format!("splat {i}: {e}"))))
        .collect::<Result<_>>()?;
    let features = SplatFeatures::from_activated(&activated);
    let labeling = dbscan(&features, cluster_params)?;

    let mut patch: Vec<usize> = labeling.noise_indices();
    let (accepted, rejected) = refine_partition(labeling.clusters(), &activated, refine_params)?;
    patch.extend(rejected);
    let (kept, reclassified) = iqr_scale_filter(accepted, &activated, refine_params)?;
    patch.extend(reclassified);
    patch.sort_unstable();

    let cat = Categorization {
        sketch_clusters: kept,
        patch_indices: patch,
    };
    debug_assert!(partition_holds(&cat, scene.len()));
    if !partition_holds(&cat, scene.len()) {
        return Err(Error::Input("categorization is not a partition".into()));
    }
    Ok(cat)
}

/// Sketch member sets and the patch set partition the scene.
pub fn partition_holds(cat: &Categorization, scene_len: usize) -> bool {
    let mut seen = vec![false; scene_len];
    for c in &cat.sketch_clusters {
        for &i in &c.member_indices {
            if i >= scene_len || seen[i] {
                return false;
            }
            seen[i] = true;
        }
    }
    for &i in &cat.patch_indices {
        if i >= scene_len || seen[i] {
            return false;
        }
        seen[i] = true;
    }
    seen.iter().all(|&s| s)
}
