//! Gaussian splat data model: raw PLY-side records, activated (physical)
//! splats, and per-subset structural statistics.

use crate::error::{Error, Result};

/// SH DC-to-RGB factor (degree-0 spherical harmonic basis constant).
pub const SH_C0: f64 = 0.28209479177;

/// One 3D Gaussian as stored in a 3DGS PLY file (pre-activation).
#[derive(Debug, Clone, PartialEq)]
pub struct SplatRecord {
    pub position: [f32; 3],
    /// Stored log-scale; physical scale is `exp` of this.
    pub log_scale: [f32; 3],
    /// Quaternion as stored: (w, x, y, z), not necessarily unit.
    pub rot: [f32; 4],
    pub opacity_logit: f32,
    /// Degree-0 SH color coefficients.
    pub sh_dc: [f32; 3],
    /// Higher-order SH coefficients, 15 per channel, channel-major.
    pub sh_rest: [f32; 45],
}

impl SplatRecord {
    pub fn is_finite(&self) -> bool {
        self.position.iter().all(|v| v.is_finite())
            && self.log_scale.iter().all(|v| v.is_finite())
            && self.rot.iter().all(|v| v.is_finite())
            && self.opacity_logit.is_finite()
            && self.sh_dc.iter().all(|v| v.is_finite())
            && self.sh_rest.iter().all(|v| v.is_finite())
    }
}

/// A splat with activations applied: positive scales, unit quaternion,
/// opacity in (0,1), DC color mapped to RGB.
#[derive(Debug, Clone)]
pub struct ActivatedSplat {
    pub position: [f64; 3],
    pub scale: [f64; 3],
    /// Unit quaternion (w, x, y, z).
    pub rot_unit: [f64; 4],
    pub opacity: f64,
    /// 0.5 + SH_C0 * sh_dc, unclamped.
    pub rgb: [f64; 3],
    pub sh_dc: [f64; 3],
    pub sh_rest: [f64; 45],
}

/// An ordered splat collection with its axis-aligned bounding box.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub splats: Vec<SplatRecord>,
    pub bbox_min: [f32; 3],
    pub bbox_max: [f32; 3],
}

impl Scene {
    /// Builds a scene from records, computing the bounding box.
    pub fn new(splats: Vec<SplatRecord>) -> Self {
        let mut bbox_min = [f32::INFINITY; 3];
        let mut bbox_max = [f32::NEG_INFINITY; 3];
        for s in &splats {
            for a in 0..3 {
                bbox_min[a] = bbox_min[a].min(s.position[a]);
                bbox_max[a] = bbox_max[a].max(s.position[a]);
            }
        }
        if splats.is_empty() {
            bbox_min = [0.0; 3];
            bbox_max = [0.0; 3];
        }
        Scene {
            splats,
            bbox_min,
            bbox_max,
        }
    }

    pub fn len(&self) -> usize {
        self.splats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.splats.is_empty()
    }

    pub fn bbox_diagonal(&self) -> f64 {
        let mut d2 = 0.0f64;
        for a in 0..3 {
            let e = (self.bbox_max[a] - self.bbox_min[a]) as f64;
            d2 += e * e;
        }
        d2.sqrt()
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Applies the standard 3DGS activations to a stored record.
pub fn activate(record: &SplatRecord) -> Result<ActivatedSplat> {
    let rot: [f64; 4] = [
        record.rot[0] as f64,
        record.rot[1] as f64,
        record.rot[2] as f64,
        record.rot[3] as f64,
    ];
    let norm = rot.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::Data("zero-norm quaternion".into()));
    }
    let rot_unit = [rot[0] / norm, rot[1] / norm, rot[2] / norm, rot[3] / norm];
    let sh_dc = [
        record.sh_dc[0] as f64,
        record.sh_dc[1] as f64,
        record.sh_dc[2] as f64,
    ];
    let mut sh_rest = [0.0f64; 45];
    for (dst, src) in sh_rest.iter_mut().zip(record.sh_rest.iter()) {
        *dst = *src as f64;
    }
    Ok(ActivatedSplat {
        position: [
            record.position[0] as f64,
            record.position[1] as f64,
            record.position[2] as f64,
        ],
        scale: [
            (record.log_scale[0] as f64).exp(),
            (record.log_scale[1] as f64).exp(),
            (record.log_scale[2] as f64).exp(),
        ],
        rot_unit,
        opacity: sigmoid(record.opacity_logit as f64),
        rgb: [
            0.5 + SH_C0 * sh_dc[0],
            0.5 + SH_C0 * sh_dc[1],
            0.5 + SH_C0 * sh_dc[2],
        ],
        sh_dc,
        sh_rest,
    })
}

/// Rotation matrix columns for a unit quaternion (w, x, y, z).
fn rotation_columns(q: &[f64; 4]) -> [[f64; 3]; 3] {
    let (w, x, y, z) = (q[0], q[1], q[2], q[3]);
    [
        [
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y + w * z),
            2.0 * (x * z - w * y),
        ],
        [
            2.0 * (x * y - w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z + w * x),
        ],
        [
            2.0 * (x * z + w * y),
            2.0 * (y * z - w * x),
            1.0 - 2.0 * (x * x + y * y),
        ],
    ]
}

/// Unit direction of the splat's longest axis, sign-canonicalized so the
/// first nonzero component is positive. Scale ties break to the lowest axis.
pub fn principal_direction(splat: &ActivatedSplat) -> [f64; 3] {
    let mut axis = 0;
    for a in 1..3 {
        if splat.scale[a] > splat.scale[axis] {
            axis = a;
        }
    }
    let cols = rotation_columns(&splat.rot_unit);
    let mut dir = cols[axis];
    let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
    for v in dir.iter_mut() {
        *v /= norm;
    }
    for v in dir {
        if v != 0.0 {
            if v < 0.0 {
                for c in dir.iter_mut() {
                    *c = -*c;
                }
            }
            break;
        }
    }
    dir
}

/// Structural statistics of a splat subset.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetStats {
    pub count: usize,
    /// Splats per unit volume of the subset's bounding box.
    pub density: f64,
    /// PCA variance ratio of the top two principal components.
    pub elongation: f64,
    /// Axis-aligned bounding-box volume.
    pub spatial_volume: f64,
}

const VOLUME_FLOOR: f64 = 1e-12;
const EIGEN_FLOOR: f64 = 1e-12;

/// Count, density, elongation, and bbox volume of the indexed subset.
pub fn subset_stats(scene: &Scene, indices: &[usize]) -> Result<SubsetStats> {
    if indices.is_empty() {
        return Err(Error::Input("subset_stats: empty index set".into()));
    }
    for &i in indices {
        if i >= scene.len() {
            return Err(Error::Input(format!("subset_stats: index {i} out of range")));
        }
    }
    let n = indices.len();
    let mut bbox_min = [f64::INFINITY; 3];
    let mut bbox_max = [f64::NEG_INFINITY; 3];
    let mut mean = [0.0f64; 3];
    for &i in indices {
        for a in 0..3 {
            let p = scene.splats[i].position[a] as f64;
            bbox_min[a] = bbox_min[a].min(p);
            bbox_max[a] = bbox_max[a].max(p);
            mean[a] += p;
        }
    }
    for m in mean.iter_mut() {
        *m /= n as f64;
    }
    let spatial_volume = (0..3).map(|a| bbox_max[a] - bbox_min[a]).product::<f64>();
    let density = n as f64 / spatial_volume.max(VOLUME_FLOOR);

    // Position covariance, then its eigenvalues via symmetric eigen.
    let mut cov = nalgebra::Matrix3::<f64>::zeros();
    for &i in indices {
        let d = nalgebra::Vector3::new(
            scene.splats[i].position[0] as f64 - mean[0],
            scene.splats[i].position[1] as f64 - mean[1],
            scene.splats[i].position[2] as f64 - mean[2],
        );
        cov += d * d.transpose();
    }
    cov /= n as f64;
    let mut eigen: Vec<f64> = cov.symmetric_eigenvalues().iter().copied().collect();
    eigen.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let elongation = (eigen[0] / eigen[1].max(EIGEN_FLOOR)).max(1.0);

    Ok(SubsetStats {
        count: n,
        density,
        elongation,
        spatial_volume,
    })
}
