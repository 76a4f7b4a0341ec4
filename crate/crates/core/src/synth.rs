//! Seeded synthetic scene generator: spatially separated splat clusters
//! whose attributes follow smooth low-degree polynomial laws of position,
//! plus unstructured noise splats. Used by tests and benchmarks as ground
//! truth with known structure.

use crate::polyfit::monomial_exponents;
use crate::splat::{Scene, SplatRecord};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::ops::Range;

/// Scene domain: positions live in [0, DOMAIN]^3.
pub const DOMAIN: f64 = 10.0;
const LAW_DEGREE: usize = 2;

#[derive(Debug, Clone)]
pub struct SynthParams {
    pub clusters: usize,
    pub splats_per_cluster: usize,
    pub noise_splats: usize,
    /// Half-width of the uniform attribute noise (opacity, rotation, color).
    pub noise_amplitude: f64,
    /// Half-width of the uniform scale noise (kept small so the principal
    /// axis never flips).
    pub scale_noise_amplitude: f64,
    /// Half side length of each cluster's cube. Smaller cubes raise the
    /// local point density (and hence DBSCAN neighbor counts).
    pub cluster_half_extent: f64,
    /// Spread of the rotation law's imaginary parts. Normalization makes
    /// the quaternion only approximately polynomial, so this is kept small.
    pub rot_law_spread: f64,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            clusters: 2,
            splats_per_cluster: 2000,
            noise_splats: 1000,
            noise_amplitude: 0.0173,
            scale_noise_amplitude: 0.005,
            cluster_half_extent: 0.75,
            rot_law_spread: 0.02,
            seed: 0,
        }
    }
}

/// Noiseless attribute values of a law at one position.
#[derive(Debug, Clone)]
pub struct LawValues {
    pub scale: [f64; 3],
    /// Canonical unit quaternion (w, x, y, z).
    pub rot_unit: [f64; 4],
    pub opacity: f64,
    /// sh_dc followed by sh_rest (48 raw coefficients).
    pub color: [f64; 48],
}

/// One cluster's polynomial attribute law over its local unit cube.
#[derive(Debug, Clone)]
pub struct ClusterLaw {
    pub center: [f64; 3],
    pub half_extent: f64,
    /// Degree-2 monomial coefficients (graded-lex, 10 per component) for
    /// scale (3), raw rotation (4), opacity (1), and color (48).
    coeffs: Vec<[f64; 10]>,
}

impl ClusterLaw {
    fn local(&self, p: &[f64; 3]) -> [f64; 3] {
        let mut u = [0.0; 3];
        for a in 0..3 {
            u[a] = (p[a] - (self.center[a] - self.half_extent)) / (2.0 * self.half_extent);
        }
        u
    }

    pub fn contains(&self, p: &[f64; 3]) -> bool {
        let u = self.local(p);
        u.iter().all(|&v| (-0.01..=1.01).contains(&v))
    }

    fn features(&self, p: &[f64; 3]) -> [f64; 10] {
        let u = self.local(p);
        let mut phi = [0.0; 10];
        for (i, e) in monomial_exponents(LAW_DEGREE).iter().enumerate() {
            phi[i] = u[0].powi(e[0] as i32) * u[1].powi(e[1] as i32) * u[2].powi(e[2] as i32);
        }
        phi
    }

    fn component(&self, idx: usize, phi: &[f64; 10]) -> f64 {
        self.coeffs[idx].iter().zip(phi).map(|(c, f)| c * f).sum()
    }

    /// Raw (unnormalized) law quaternion at a position.
    pub fn raw_rotation(&self, p: &[f64; 3]) -> [f64; 4] {
        let phi = self.features(p);
        [
            self.component(3, &phi),
            self.component(4, &phi),
            self.component(5, &phi),
            self.component(6, &phi),
        ]
    }

    pub fn eval(&self, p: &[f64; 3]) -> LawValues {
        let phi = self.features(p);
        let scale = [
            self.component(0, &phi),
            self.component(1, &phi),
            self.component(2, &phi),
        ];
        let mut q = self.raw_rotation(p);
        let norm = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        for v in q.iter_mut() {
            *v /= norm;
        }
        let opacity = self.component(7, &phi);
        let mut color = [0.0; 48];
        for (a, c) in color.iter_mut().enumerate() {
            *c = self.component(8 + a, &phi);
        }
        LawValues {
            scale,
            rot_unit: q,
            opacity,
            color,
        }
    }
}

/// A generated scene with its ground truth.
#[derive(Debug, Clone)]
pub struct SynthScene {
    pub scene: Scene,
    /// Splat index ranges of the planted clusters, in law order.
    pub cluster_ranges: Vec<Range<usize>>,
    pub laws: Vec<ClusterLaw>,
    /// Splat index range of the unstructured noise splats (scene tail).
    pub noise_range: Range<usize>,
}

impl SynthScene {
    /// The law governing a position, if any (clusters are spatially
    /// disjoint, so at most one matches).
    pub fn law_for_position(&self, p: &[f64; 3]) -> Option<&ClusterLaw> {
        self.laws.iter().find(|law| law.contains(p))
    }
}

fn uniform(rng: &mut impl Rng, half_width: f64) -> f64 {
    (rng.gen::<f64>() * 2.0 - 1.0) * half_width
}

fn coeff_row(rng: &mut impl Rng, base: f64, spread: f64) -> [f64; 10] {
    let mut c = [0.0; 10];
    c[0] = base;
    for v in c.iter_mut().skip(1) {
        *v = uniform(rng, spread);
    }
    c
}

fn make_law(
    rng: &mut impl Rng,
    center: [f64; 3],
    half_extent: f64,
    rot_spread: f64,
) -> ClusterLaw {
    let mut coeffs: Vec<[f64; 10]> = Vec::with_capacity(56);
    // scale: a clearly dominant first axis so the principal direction is
    // stable under the planted variation and noise
    coeffs.push(coeff_row(rng, 0.12, 0.01));
    coeffs.push(coeff_row(rng, 0.05, 0.008));
    coeffs.push(coeff_row(rng, 0.03, 0.008));
    // rotation: near identity, smooth small imaginary parts
    coeffs.push(coeff_row(rng, 1.0, 0.0));
    for _ in 0..3 {
        coeffs.push(coeff_row(rng, 0.0, rot_spread));
    }
    // opacity comfortably inside (0, 1)
    coeffs.push(coeff_row(rng, 0.5, 0.1));
    // sh_dc then sh_rest
    for _ in 0..3 {
        let base = uniform(rng, 0.2);
        coeffs.push(coeff_row(rng, base, 0.15));
    }
    for _ in 0..45 {
        let base = uniform(rng, 0.1);
        coeffs.push(coeff_row(rng, base, 0.08));
    }
    ClusterLaw {
        center,
        half_extent,
        coeffs,
    }
}

fn logit(o: f64) -> f64 {
    (o / (1.0 - o)).ln()
}

/// Grid of well-separated cluster centers inside the domain.
fn cluster_centers(count: usize) -> Vec<[f64; 3]> {
    let per_axis = (count as f64).cbrt().ceil() as usize;
    let step = DOMAIN / per_axis as f64;
    let mut centers = Vec::with_capacity(count);
    'outer: for x in 0..per_axis {
        for y in 0..per_axis {
            for z in 0..per_axis {
                centers.push([
                    (x as f64 + 0.5) * step,
                    (y as f64 + 0.5) * step,
                    (z as f64 + 0.5) * step,
                ]);
                if centers.len() == count {
                    break 'outer;
                }
            }
        }
    }
    centers
}

/// Generates a scene: `clusters` planted polynomial-law clusters followed by
/// `noise_splats` unstructured splats.
pub fn planted_scene(params: &SynthParams) -> SynthScene {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let centers = cluster_centers(params.clusters.max(1));
    // never let cluster cubes touch: cap at 60% of half the grid step
    let step = DOMAIN / (params.clusters.max(1) as f64).cbrt().ceil();
    let half_extent = params.cluster_half_extent.min(step * 0.3);

    let mut records = Vec::with_capacity(
        params.clusters * params.splats_per_cluster + params.noise_splats,
    );
    let mut laws = Vec::with_capacity(params.clusters);
    let mut cluster_ranges = Vec::with_capacity(params.clusters);

    for c in 0..params.clusters {
        let law = make_law(&mut rng, centers[c], half_extent, params.rot_law_spread);
        let start = records.len();
        for _ in 0..params.splats_per_cluster {
            let p = [
                law.center[0] + uniform(&mut rng, law.half_extent),
                law.center[1] + uniform(&mut rng, law.half_extent),
                law.center[2] + uniform(&mut rng, law.half_extent),
            ];
            let values = law.eval(&p);
            let raw_q = law.raw_rotation(&p);
            let mut scale = [0.0f64; 3];
            for a in 0..3 {
                scale[a] =
                    (values.scale[a] + uniform(&mut rng, params.scale_noise_amplitude)).max(1e-3);
            }
            let opacity = (values.opacity + uniform(&mut rng, params.noise_amplitude))
                .clamp(0.05, 0.95);
            let mut rot = [0.0f32; 4];
            for a in 0..4 {
                rot[a] = (raw_q[a] + uniform(&mut rng, params.noise_amplitude)) as f32;
            }
            let mut sh_dc = [0.0f32; 3];
            let mut sh_rest = [0.0f32; 45];
            for a in 0..3 {
                sh_dc[a] =
                    (values.color[a] + uniform(&mut rng, params.noise_amplitude)) as f32;
            }
            for a in 0..45 {
                sh_rest[a] =
                    (values.color[3 + a] + uniform(&mut rng, params.noise_amplitude)) as f32;
            }
            records.push(SplatRecord {
                position: [p[0] as f32, p[1] as f32, p[2] as f32],
                log_scale: [
                    scale[0].ln() as f32,
                    scale[1].ln() as f32,
                    scale[2].ln() as f32,
                ],
                rot,
                opacity_logit: logit(opacity) as f32,
                sh_dc,
                sh_rest,
            });
        }
        cluster_ranges.push(start..records.len());
        laws.push(law);
    }

    let noise_start = records.len();
    for _ in 0..params.noise_splats {
        let mut sh_rest = [0.0f32; 45];
        for v in sh_rest.iter_mut() {
            *v = uniform(&mut rng, 0.5) as f32;
        }
        let q = [
            rng.gen::<f64>() + 0.1,
            uniform(&mut rng, 1.0),
            uniform(&mut rng, 1.0),
            uniform(&mut rng, 1.0),
        ];
        records.push(SplatRecord {
            position: [
                (rng.gen::<f64>() * DOMAIN) as f32,
                (rng.gen::<f64>() * DOMAIN) as f32,
                (rng.gen::<f64>() * DOMAIN) as f32,
            ],
            log_scale: [
                uniform(&mut rng, 2.0) as f32 - 2.0,
                uniform(&mut rng, 2.0) as f32 - 2.0,
                uniform(&mut rng, 2.0) as f32 - 2.0,
            ],
            rot: [q[0] as f32, q[1] as f32, q[2] as f32, q[3] as f32],
            opacity_logit: uniform(&mut rng, 3.0) as f32,
            sh_dc: [
                uniform(&mut rng, 1.0) as f32,
                uniform(&mut rng, 1.0) as f32,
                uniform(&mut rng, 1.0) as f32,
            ],
            sh_rest,
        });
    }

    SynthScene {
        scene: Scene::new(records),
        cluster_ranges,
        laws,
        noise_range: noise_start..noise_start + params.noise_splats,
    }
}
