//! Sketch cluster codec: half-precision polynomial models plus a
//! quantize/Morton-sort/delta/DEFLATE position compressor.

use crate::error::{Error, Result};
use crate::half16::{from_half, to_half_f64};
use crate::polyfit::{
    polynomial_feature_count, predict_attributes, AttributeKind, ClusterModel, PolyModel,
};
use crate::splat::{Scene, SplatRecord};
use crate::stream::{put_varint, unzigzag, zigzag, ByteReader};
use flate2::read::DeflateDecoder;
use flate2::write::DeflateEncoder;
use flate2::Compression;
use nalgebra::DMatrix;
use std::io::{Read, Write};

const GRID_BITS: u32 = 16;
const GRID_CELLS: u32 = 1 << GRID_BITS;

/// One encoded Sketch cluster: per-attribute degrees and half-precision
/// coefficient blocks plus the shared normalization bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedCluster {
    pub member_count: u64,
    pub degrees: [u8; 4],
    pub norm_min: [u16; 3],
    pub norm_max: [u16; 3],
    /// Half-precision coefficient bits per attribute group, row-major
    /// (feature_count(degree) x dim).
    pub coeffs: [Vec<u16>; 4],
}

/// Encoded Sketch section: cluster models and the compressed position
/// stream (global-grid quantized, cluster-ordered).
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedSketch {
    pub clusters: Vec<EncodedCluster>,
    pub positions_blob: Vec<u8>,
}

pub fn deflate(bytes: &[u8]) -> Vec<u8> {
    let mut enc = DeflateEncoder::new(Vec::new(), Compression::default());
    enc.write_all(bytes).expect("in-memory deflate");
    enc.finish().expect("in-memory deflate")
}

pub fn inflate(bytes: &[u8]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    DeflateDecoder::new(bytes)
        .read_to_end(&mut out)
        .map_err(|e| Error::format(0, format!("deflate stream corrupt: {e}")))?;
    Ok(out)
}

fn morton3(q: [u16; 3]) -> u64 {
    fn spread(v: u16) -> u64 {
        let mut x = v as u64;
        x = (x | (x << 32)) & 0x0000_ffff_0000_ffff;
        x = (x | (x << 16)) & 0x0000_ffff_0000_ffff; // no-op for 16-bit input
        x = (x | (x << 8)) & 0x00ff_00ff_00ff_00ff;
        x = (x | (x << 4)) & 0x0f0f_0f0f_0f0f_0f0f;
        x = (x | (x << 2)) & 0x3333_3333_3333_3333;
        x = (x | (x << 1)) & 0x5555_5555_5555_5555;
        x
    }
    spread(q[0]) | (spread(q[1]) << 1) | (spread(q[2]) << 2)
}

fn grid_extent(bbox_min: &[f32; 3], bbox_max: &[f32; 3]) -> [f64; 3] {
    let mut extent = [0.0f64; 3];
    for a in 0..3 {
        // degenerate axes widened so quantization stays well defined
        extent[a] = ((bbox_max[a] - bbox_min[a]) as f64).max(1e-9);
    }
    extent
}

pub fn quantize_position(p: &[f64; 3], bbox_min: &[f32; 3], extent: &[f64; 3]) -> [u16; 3] {
    let mut q = [0u16; 3];
    for a in 0..3 {
        let t = ((p[a] - bbox_min[a] as f64) / extent[a]).clamp(0.0, 1.0);
        q[a] = ((t * GRID_CELLS as f64).floor() as u32).min(GRID_CELLS - 1) as u16;
    }
    q
}

pub fn dequantize_position(q: &[u16; 3], bbox_min: &[f32; 3], extent: &[f64; 3]) -> [f64; 3] {
    let mut p = [0.0f64; 3];
    for a in 0..3 {
        // cell centers minimize worst-case error
        p[a] = bbox_min[a] as f64 + (q[a] as f64 + 0.5) / GRID_CELLS as f64 * extent[a];
    }
    p
}

/// Compresses cluster-grouped positions: 16-bit global-grid quantization,
/// Morton sort within each cluster, componentwise zig-zag delta varints,
/// one DEFLATE pass over the concatenated streams.
pub fn compress_positions(
    positions: &[[f64; 3]],
    cluster_counts: &[usize],
    bbox_min: &[f32; 3],
    bbox_max: &[f32; 3],
) -> Result<Vec<u8>> {
    if cluster_counts.iter().sum::<usize>() != positions.len() {
        return Err(Error::Input(
            "cluster counts do not sum to position count".into(),
        ));
    }
    let extent = grid_extent(bbox_min, bbox_max);
    let mut raw = Vec::new();
    for v in bbox_min.iter().chain(bbox_max.iter()) {
        raw.extend_from_slice(&v.to_le_bytes());
    }
    put_varint(&mut raw, cluster_counts.len() as u64);

    let mut offset = 0usize;
    for &count in cluster_counts {
        put_varint(&mut raw, count as u64);
        let mut quantized: Vec<[u16; 3]> = positions[offset..offset + count]
            .iter()
            .map(|p| quantize_position(p, bbox_min, &extent))
            .collect();
        quantized.sort_by_key(|q| morton3(*q));
        let mut prev = [0i64; 3];
        for q in &quantized {
            for a in 0..3 {
                let cur = q[a] as i64;
                put_varint(&mut raw, zigzag(cur - prev[a]));
                prev[a] = cur;
            }
        }
        offset += count;
    }
    Ok(deflate(&raw))
}

/// Inverse of [`compress_positions`]; positions come back at grid-cell
/// centers in per-cluster Morton order.
pub fn decompress_positions(blob: &[u8]) -> Result<(Vec<[f64; 3]>, Vec<usize>)> {
    let raw = inflate(blob)?;
    let mut r = ByteReader::new(&raw);
    let mut bbox_min = [0.0f32; 3];
    let mut bbox_max = [0.0f32; 3];
    for v in bbox_min.iter_mut() {
        *v = r.f32()?;
    }
    for v in bbox_max.iter_mut() {
        *v = r.f32()?;
    }
    let extent = grid_extent(&bbox_min, &bbox_max);
    let cluster_count = r.varint()? as usize;
    let mut counts = Vec::with_capacity(cluster_count);
    let mut positions = Vec::new();
    for _ in 0..cluster_count {
        let count = r.varint()? as usize;
        counts.push(count);
        let mut prev = [0i64; 3];
        for _ in 0..count {
            let mut q = [0u16; 3];
            for a in 0..3 {
                let cur = prev[a] + unzigzag(r.varint()?);
                if !(0..GRID_CELLS as i64).contains(&cur) {
                    return Err(Error::format(r.offset(), "quantized coordinate out of range"));
                }
                q[a] = cur as u16;
                prev[a] = cur;
            }
            positions.push(dequantize_position(&q, &bbox_min, &extent));
        }
    }
    if !r.done() {
        return Err(Error::format(r.offset(), "trailing bytes in position stream"));
    }
    Ok((positions, counts))
}

/// Encodes accepted clusters: degrees, half coefficients, half norm bounds,
/// and the compressed member-position stream.
pub fn encode_sketch(clusters: &[ClusterModel], scene: &Scene) -> Result<EncodedSketch> {
    let mut encoded = Vec::with_capacity(clusters.len());
    let mut positions = Vec::new();
    let mut counts = Vec::with_capacity(clusters.len());
    for cluster in clusters {
        counts.push(cluster.member_indices.len());
        for &i in &cluster.member_indices {
            let p = scene.splats[i].position;
            positions.push([p[0] as f64, p[1] as f64, p[2] as f64]);
        }
        let mut norm_min = [0u16; 3];
        let mut norm_max = [0u16; 3];
        for a in 0..3 {
            norm_min[a] = to_half_f64(cluster.models[0].norm_min[a])?;
            norm_max[a] = to_half_f64(cluster.models[0].norm_max[a])?;
        }
        let mut degrees = [0u8; 4];
        let mut coeffs: [Vec<u16>; 4] = Default::default();
        for (k, model) in cluster.models.iter().enumerate() {
            degrees[k] = model.degree as u8;
            let mut bits = Vec::with_capacity(model.coeffs.len());
            for row in 0..model.coeffs.nrows() {
                for col in 0..model.coeffs.ncols() {
                    bits.push(to_half_f64(model.coeffs[(row, col)])?);
                }
            }
            coeffs[k] = bits;
        }
        encoded.push(EncodedCluster {
            member_count: cluster.member_indices.len() as u64,
            degrees,
            norm_min,
            norm_max,
            coeffs,
        });
    }
    let positions_blob =
        compress_positions(&positions, &counts, &scene.bbox_min, &scene.bbox_max)?;
    Ok(EncodedSketch {
        clusters: encoded,
        positions_blob,
    })
}

fn sigmoid_inverse(o: f64) -> f64 {
    (o / (1.0 - o)).ln()
}

fn rebuild_models(cluster: &EncodedCluster) -> Result<[PolyModel; 4]> {
    let mut norm_min = [0.0f64; 3];
    let mut norm_max = [0.0f64; 3];
    for a in 0..3 {
        norm_min[a] = from_half(cluster.norm_min[a]) as f64;
        norm_max[a] = from_half(cluster.norm_max[a]) as f64;
        if norm_max[a] - norm_min[a] <= 0.0 {
            // bounds collapsed in half precision
            norm_max[a] = norm_min[a] + 1e-9;
        }
    }
    let mut models = Vec::with_capacity(4);
    for (k, kind) in AttributeKind::ALL.iter().enumerate() {
        let degree = cluster.degrees[k] as usize;
        let rows = polynomial_feature_count(degree);
        let dim = kind.dim();
        if cluster.coeffs[k].len() != rows * dim {
            return Err(Error::format(
                0,
                format!(
                    "coefficient block length {} != {}x{}",
                    cluster.coeffs[k].len(),
                    rows,
                    dim
                ),
            ));
        }
        let coeffs = DMatrix::from_fn(rows, dim, |r, c| {
            from_half(cluster.coeffs[k][r * dim + c]) as f64
        });
        models.push(PolyModel {
            degree,
            coeffs,
            norm_min,
            norm_max,
        });
    }
    Ok(models.try_into().unwrap())
}

/// Decodes an encoded sketch back to splat records: decompress positions,
/// evaluate the models at them, and invert the activations to storage form.
pub fn decode_sketch(encoded: &EncodedSketch) -> Result<Vec<SplatRecord>> {
    let (positions, counts) = decompress_positions(&encoded.positions_blob)?;
    if counts.len() != encoded.clusters.len() {
        return Err(Error::format(0, "cluster count mismatch in sketch section"));
    }
    let mut out = Vec::with_capacity(positions.len());
    let mut offset = 0usize;
    for (cluster, &count) in encoded.clusters.iter().zip(&counts) {
        if cluster.member_count as usize != count {
            return Err(Error::format(0, "member count mismatch in sketch section"));
        }
        let models = rebuild_models(cluster)?;
        let cluster_positions = &positions[offset..offset + count];
        let pred = predict_attributes(&models, cluster_positions);
        for (row, p) in cluster_positions.iter().enumerate() {
            let mut sh_rest = [0.0f32; 45];
            for a in 0..45 {
                sh_rest[a] = pred.color[row][3 + a] as f32;
            }
            out.push(SplatRecord {
                position: [p[0] as f32, p[1] as f32, p[2] as f32],
                log_scale: [
                    pred.scale[row][0].ln() as f32,
                    pred.scale[row][1].ln() as f32,
                    pred.scale[row][2].ln() as f32,
                ],
                rot: [
                    pred.rot_unit[row][0] as f32,
                    pred.rot_unit[row][1] as f32,
                    pred.rot_unit[row][2] as f32,
                    pred.rot_unit[row][3] as f32,
                ],
                opacity_logit: sigmoid_inverse(pred.opacity[row]) as f32,
                sh_dc: [
                    pred.color[row][0] as f32,
                    pred.color[row][1] as f32,
                    pred.color[row][2] as f32,
                ],
                sh_rest,
            });
        }
        offset += count;
    }
    Ok(out)
}

// --- byte layout for the container ---

impl EncodedSketch {
    /// Serialized section: DEFLATEd coefficient stream, then positions blob,
    /// both length-prefixed.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut coeff_raw = Vec::new();
        put_varint(&mut coeff_raw, self.clusters.len() as u64);
        for c in &self.clusters {
            put_varint(&mut coeff_raw, c.member_count);
            coeff_raw.extend_from_slice(&c.degrees);
            for v in c.norm_min.iter().chain(c.norm_max.iter()) {
                coeff_raw.extend_from_slice(&v.to_le_bytes());
            }
            for block in &c.coeffs {
                for bits in block {
                    coeff_raw.extend_from_slice(&bits.to_le_bytes());
                }
            }
        }
        let coeff_deflated = deflate(&coeff_raw);
        let mut out = Vec::new();
        out.extend_from_slice(&(coeff_deflated.len() as u64).to_le_bytes());
        out.extend_from_slice(&coeff_deflated);
        out.extend_from_slice(&(self.positions_blob.len() as u64).to_le_bytes());
        out.extend_from_slice(&self.positions_blob);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes);
        let coeff_len = r.u64()? as usize;
        let coeff_raw = inflate(r.take(coeff_len)?)?;
        let pos_len = r.u64()? as usize;
        let positions_blob = r.take(pos_len)?.to_vec();
        if !r.done() {
            return Err(Error::format(r.offset(), "trailing bytes in sketch section"));
        }

        let mut cr = ByteReader::new(&coeff_raw);
        let n_clusters = cr.varint()? as usize;
        let mut clusters = Vec::with_capacity(n_clusters);
        for _ in 0..n_clusters {
            let member_count = cr.varint()?;
            let degrees: [u8; 4] = cr.take(4)?.try_into().unwrap();
            for &d in &degrees {
                if d == 0 || d as usize > crate::polyfit::MAX_DEGREE {
                    return Err(Error::format(cr.offset(), format!("invalid degree {d}")));
                }
            }
            let mut norm_min = [0u16; 3];
            let mut norm_max = [0u16; 3];
            for v in norm_min.iter_mut() {
                *v = cr.u16()?;
            }
            for v in norm_max.iter_mut() {
                *v = cr.u16()?;
            }
            let mut coeffs: [Vec<u16>; 4] = Default::default();
            for (k, kind) in AttributeKind::ALL.iter().enumerate() {
                let len = polynomial_feature_count(degrees[k] as usize) * kind.dim();
                let mut block = Vec::with_capacity(len);
                for _ in 0..len {
                    block.push(cr.u16()?);
                }
                coeffs[k] = block;
            }
            clusters.push(EncodedCluster {
                member_count,
                degrees,
                norm_min,
                norm_max,
                coeffs,
            });
        }
        if !cr.done() {
            return Err(Error::format(cr.offset(), "trailing bytes in coefficient stream"));
        }
        Ok(EncodedSketch {
            clusters,
            positions_blob,
        })
    }

    pub fn splat_count(&self) -> u64 {
        self.clusters.iter().map(|c| c.member_count).sum()
    }
}
