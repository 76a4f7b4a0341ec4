//! GSSP layered container: a plain preamble, a CRC-protected deflated
//! header, and per-layer independent DEFLATE members so byte prefixes
//! decode without the tail.

use crate::error::{Error, Result};
use crate::patch::{dequantize_patch, quantize_patch, PatchPayload};
use crate::sketch::{decode_sketch, deflate, inflate, EncodedSketch};
use crate::splat::{activate, Scene, SplatRecord};
use crate::stream::ByteReader;
use std::f64::consts::PI;

pub const MAGIC: [u8; 8] = *b"GSSP0002";
pub const VERSION: u16 = 2;
/// Bytes before the header block: magic plus the body length.
const PREAMBLE_LEN: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    Sketch,
    Patch,
}

/// One entry of the header layer table. Offsets are relative to the first
/// byte after the header block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerEntry {
    pub kind: LayerKind,
    pub byte_offset: u64,
    pub byte_length: u64,
    pub splat_count: u64,
    /// CRC32 of the layer's compressed bytes.
    pub crc32: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContainerHeader {
    pub version: u16,
    pub bbox_min: [f32; 3],
    pub bbox_max: [f32; 3],
    /// Opaque provenance blob (encoder configuration).
    pub extension: Vec<u8>,
    pub layers: Vec<LayerEntry>,
}

/// Progressive-delivery plan: ascending cumulative patch fractions, the last
/// being 1.0. Patch splats are ranked by opacity times ellipsoid volume.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerPlan {
    pub fractions: Vec<f64>,
}

impl Default for LayerPlan {
    fn default() -> Self {
        LayerPlan {
            fractions: vec![0.25, 0.5, 0.75, 1.0],
        }
    }
}

impl LayerPlan {
    pub fn validate(&self) -> Result<()> {
        if self.fractions.is_empty() {
            return Err(Error::Input("layer plan needs at least one fraction".into()));
        }
        let mut prev = 0.0;
        for &f in &self.fractions {
            if !(f > prev && f <= 1.0) {
                return Err(Error::Input(format!(
                    "layer fractions must be strictly increasing in (0, 1]: {:?}",
                    self.fractions
                )));
            }
            prev = f;
        }
        if *self.fractions.last().unwrap() != 1.0 {
            return Err(Error::Input("last layer fraction must be 1.0".into()));
        }
        Ok(())
    }
}

pub fn crc32(bytes: &[u8]) -> u32 {
    let mut crc = flate2::Crc::new();
    crc.update(bytes);
    crc.sum()
}

/// Importance score used for layer assignment: opacity times ellipsoid
/// volume 4/3 pi s1 s2 s3.
pub fn importance_score(record: &SplatRecord) -> Result<f64> {
    let a = activate(record)?;
    Ok(a.opacity * (4.0 / 3.0) * PI * a.scale[0] * a.scale[1] * a.scale[2])
}

/// Patch splats in descending importance order, ties by original index.
fn rank_patch(patch_splats: &[SplatRecord]) -> Result<Vec<usize>> {
    let mut scored: Vec<(usize, f64)> = Vec::with_capacity(patch_splats.len());
    for (i, s) in patch_splats.iter().enumerate() {
        scored.push((i, importance_score(s)?));
    }
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    Ok(scored.into_iter().map(|(i, _)| i).collect())
}

fn encode_header(header: &ContainerHeader) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&header.version.to_le_bytes());
    for v in header.bbox_min.iter().chain(header.bbox_max.iter()) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&(header.extension.len() as u32).to_le_bytes());
    out.extend_from_slice(&header.extension);
    out.extend_from_slice(&(header.layers.len() as u16).to_le_bytes());
    for l in &header.layers {
        out.push(match l.kind {
            LayerKind::Sketch => 0,
            LayerKind::Patch => 1,
        });
        out.extend_from_slice(&l.byte_offset.to_le_bytes());
        out.extend_from_slice(&l.byte_length.to_le_bytes());
        out.extend_from_slice(&l.splat_count.to_le_bytes());
        out.extend_from_slice(&l.crc32.to_le_bytes());
    }
    out
}

fn decode_header(bytes: &[u8]) -> Result<ContainerHeader> {
    let mut r = ByteReader::new(bytes);
    let version = r.u16()?;
    if version != VERSION {
        return Err(Error::Version(version));
    }
    let mut bbox_min = [0.0f32; 3];
    let mut bbox_max = [0.0f32; 3];
    for v in bbox_min.iter_mut() {
        *v = r.f32()?;
    }
    for v in bbox_max.iter_mut() {
        *v = r.f32()?;
    }
    let ext_len = u32::from_le_bytes(r.take(4)?.try_into().unwrap()) as usize;
    let extension = r.take(ext_len)?.to_vec();
    let layer_count = r.u16()? as usize;
    let mut layers = Vec::with_capacity(layer_count);
    for i in 0..layer_count {
        let kind = match r.u8()? {
            0 => LayerKind::Sketch,
            1 => LayerKind::Patch,
            k => return Err(Error::format(r.offset(), format!("unknown layer kind {k}"))),
        };
        let expected = if i == 0 {
            LayerKind::Sketch
        } else {
            LayerKind::Patch
        };
        if kind != expected {
            return Err(Error::format(r.offset(), format!("layer {i} has wrong kind")));
        }
        let byte_offset = r.u64()?;
        let byte_length = r.u64()?;
        let splat_count = r.u64()?;
        let crc = u32::from_le_bytes(r.take(4)?.try_into().unwrap());
        layers.push(LayerEntry {
            kind,
            byte_offset,
            byte_length,
            splat_count,
            crc32: crc,
        });
    }
    if layers.is_empty() {
        return Err(Error::format(0, "container has no layers"));
    }
    // offsets strictly increasing and non-overlapping
    let mut end = 0u64;
    for l in &layers {
        if l.byte_offset < end {
            return Err(Error::format(0, "overlapping layer sections"));
        }
        end = l.byte_offset + l.byte_length;
    }
    if !r.done() {
        return Err(Error::format(r.offset(), "trailing bytes in header"));
    }
    Ok(ContainerHeader {
        version,
        bbox_min,
        bbox_max,
        extension,
        layers,
    })
}

/// Packs an encoded sketch plus raw (pruned) patch splats into a container.
/// Each patch layer is quantized independently so any prefix of layers is
/// decodable on its own.
pub fn pack(
    sketch: &EncodedSketch,
    patch_splats: &[SplatRecord],
    plan: &LayerPlan,
    bbox_min: [f32; 3],
    bbox_max: [f32; 3],
    codebook_seed: u64,
    extension: &[u8],
) -> Result<Vec<u8>> {
    plan.validate()?;
    let n = patch_splats.len();
    let ranking = rank_patch(patch_splats)?;

    // Sections in layer order: sketch first, then one patch slice per
    // fraction (skipped entirely when there are no patch splats).
    let mut sections: Vec<(LayerKind, u64, Vec<u8>)> = Vec::new();
    sections.push((
        LayerKind::Sketch,
        sketch.splat_count(),
        sketch.to_bytes(),
    ));
    if n > 0 {
        let mut start = 0usize;
        for &f in &plan.fractions {
            let end = ((f * n as f64).floor() as usize).min(n);
            let slice: Vec<SplatRecord> = ranking[start..end.max(start)]
                .iter()
                .map(|&i| patch_splats[i].clone())
                .collect();
            let payload = quantize_patch(&slice, codebook_seed)?;
            sections.push((LayerKind::Patch, slice.len() as u64, payload.to_bytes()));
            start = end.max(start);
        }
    }

    let mut layer_region = Vec::new();
    let mut layers = Vec::with_capacity(sections.len());
    for (kind, splat_count, plain) in &sections {
        let member = deflate(plain);
        layers.push(LayerEntry {
            kind: *kind,
            byte_offset: layer_region.len() as u64,
            byte_length: member.len() as u64,
            splat_count: *splat_count,
            crc32: crc32(&member),
        });
        layer_region.extend_from_slice(&member);
    }

    let header = ContainerHeader {
        version: VERSION,
        bbox_min,
        bbox_max,
        extension: extension.to_vec(),
        layers,
    };
    let header_comp = deflate(&encode_header(&header));

    let mut out = Vec::with_capacity(PREAMBLE_LEN + 12 + header_comp.len() + layer_region.len());
    out.extend_from_slice(&MAGIC);
    let body_len = 4 + 8 + header_comp.len() + layer_region.len();
    out.extend_from_slice(&(body_len as u64).to_le_bytes());
    out.extend_from_slice(&crc32(&header_comp).to_le_bytes());
    out.extend_from_slice(&(header_comp.len() as u64).to_le_bytes());
    out.extend_from_slice(&header_comp);
    out.extend_from_slice(&layer_region);
    Ok(out)
}

struct Parsed {
    header: ContainerHeader,
    /// Absolute byte position where the layer region begins.
    region_start: usize,
}

/// Parses preamble and header. `strict` additionally demands the declared
/// body length matches the buffer exactly (unpack); prefix readers pass
/// false and length-check per layer instead.
fn parse_front(bytes: &[u8], strict: bool) -> Result<Parsed> {
    if bytes.len() < PREAMBLE_LEN {
        return Err(if strict {
            Error::format(0, "not a GSSP container: too short")
        } else {
            Error::Incomplete {
                needed: PREAMBLE_LEN as u64,
                have: bytes.len() as u64,
            }
        });
    }
    if bytes[0..8] != MAGIC {
        return Err(Error::format(0, "not a GSSP container"));
    }
    let body_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let declared_total = PREAMBLE_LEN as u64 + body_len;
    if strict && bytes.len() as u64 != declared_total {
        return Err(Error::format(
            8,
            format!("container length mismatch: expected {declared_total} bytes, have {}", bytes.len()),
        ));
    }
    let mut r = ByteReader::new(&bytes[PREAMBLE_LEN..]);
    let parse = (|| -> Result<Parsed> {
        let header_crc = u32::from_le_bytes(r.take(4)?.try_into().unwrap());
        let header_comp_len = r.u64()? as usize;
        let header_comp = r.take(header_comp_len)?;
        if crc32(header_comp) != header_crc {
            return Err(Error::format(PREAMBLE_LEN, "header checksum mismatch"));
        }
        let header = decode_header(&inflate(header_comp)?)?;
        Ok(Parsed {
            header,
            region_start: PREAMBLE_LEN + 12 + header_comp_len,
        })
    })();
    match parse {
        Err(Error::Format { offset, msg }) if !strict => {
            // A truncated prefix can cut into the header itself.
            if PREAMBLE_LEN + r.offset() >= bytes.len() {
                Err(Error::Incomplete {
                    needed: declared_total,
                    have: bytes.len() as u64,
                })
            } else {
                Err(Error::Format { offset, msg })
            }
        }
        other => other,
    }
}

fn read_layer(bytes: &[u8], region_start: usize, entry: &LayerEntry) -> Result<Vec<u8>> {
    let start = region_start + entry.byte_offset as usize;
    let end = start + entry.byte_length as usize;
    if end > bytes.len() {
        return Err(Error::format(
            start,
            format!("layer section truncated: need {end} bytes, have {}", bytes.len()),
        ));
    }
    let member = &bytes[start..end];
    if crc32(member) != entry.crc32 {
        return Err(Error::format(start, "layer checksum mismatch"));
    }
    inflate(member)
}

/// Full inverse of [`pack`]: every layer is validated and decoded.
pub fn unpack(bytes: &[u8]) -> Result<(EncodedSketch, Vec<PatchPayload>, ContainerHeader)> {
    let parsed = parse_front(bytes, true)?;
    let region_end = parsed.region_start as u64
        + parsed
            .header
            .layers
            .last()
            .map(|l| l.byte_offset + l.byte_length)
            .unwrap_or(0);
    if region_end != bytes.len() as u64 {
        return Err(Error::format(
            parsed.region_start,
            format!("layer table mismatch: expected {region_end} bytes, have {}", bytes.len()),
        ));
    }
    let sketch_plain = read_layer(bytes, parsed.region_start, &parsed.header.layers[0])?;
    let sketch = EncodedSketch::from_bytes(&sketch_plain)?;
    if sketch.splat_count() != parsed.header.layers[0].splat_count {
        return Err(Error::format(0, "sketch splat count disagrees with header"));
    }
    let mut patches = Vec::new();
    for entry in &parsed.header.layers[1..] {
        let plain = read_layer(bytes, parsed.region_start, entry)?;
        let payload = PatchPayload::from_bytes(&plain)?;
        if payload.splat_count() as u64 != entry.splat_count {
            return Err(Error::format(0, "patch splat count disagrees with header"));
        }
        patches.push(payload);
    }
    Ok((sketch, patches, parsed.header))
}

/// Reads only the header (for stats and layer listings).
pub fn read_header(bytes: &[u8]) -> Result<ContainerHeader> {
    Ok(parse_front(bytes, true)?.header)
}

/// Like [`read_header`], but tolerates a truncated layer region so prefix
/// readers can discover the layer table; truncation inside the header
/// itself reports how many bytes are needed.
pub fn read_header_prefix(bytes: &[u8]) -> Result<ContainerHeader> {
    Ok(parse_front(bytes, false)?.header)
}

/// Decodes layers 0..=upto_layer from a (possibly truncated) byte prefix
/// into a concatenated scene.
pub fn assemble_prefix(bytes: &[u8], upto_layer: usize) -> Result<Scene> {
    let parsed = parse_front(bytes, false)?;
    if upto_layer >= parsed.header.layers.len() {
        return Err(Error::Input(format!(
            "layer {upto_layer} out of range ({} layers)",
            parsed.header.layers.len()
        )));
    }
    let mut records = Vec::new();
    for (i, entry) in parsed.header.layers[..=upto_layer].iter().enumerate() {
        let layer_end =
            parsed.region_start as u64 + entry.byte_offset + entry.byte_length;
        if (bytes.len() as u64) < layer_end {
            return Err(Error::Incomplete {
                needed: layer_end,
                have: bytes.len() as u64,
            });
        }
        let plain = read_layer(bytes, parsed.region_start, entry)?;
        if i == 0 {
            records.extend(decode_sketch(&EncodedSketch::from_bytes(&plain)?)?);
        } else {
            records.extend(dequantize_patch(&PatchPayload::from_bytes(&plain)?)?);
        }
    }
    Ok(Scene::new(records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polyfit::{extract_attributes, grid_search_fit, member_positions};
    use crate::sketch::encode_sketch;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn smooth_record(p: [f64; 3]) -> SplatRecord {
        SplatRecord {
            position: [p[0] as f32, p[1] as f32, p[2] as f32],
            log_scale: [(0.1 * p[0]) as f32, 0.0, -0.5],
            rot: [1.0, 0.0, 0.0, 0.0],
            opacity_logit: (0.3 * p[1]) as f32,
            sh_dc: [0.2, (0.1 * p[2]) as f32, 0.0],
            sh_rest: [0.01; 45],
        }
    }

    fn build_inputs(
        n_sketch: usize,
        n_patch: usize,
        seed: u64,
    ) -> (EncodedSketch, Vec<SplatRecord>, Scene) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut records: Vec<SplatRecord> = (0..n_sketch)
            .map(|_| smooth_record([rng.gen(), rng.gen(), rng.gen()]))
            .collect();
        let mut patch = Vec::with_capacity(n_patch);
        for _ in 0..n_patch {
            let mut r = smooth_record([rng.gen(), rng.gen(), rng.gen()]);
            r.opacity_logit = rng.gen::<f32>() * 4.0 - 2.0;
            r.log_scale = [rng.gen::<f32>() - 1.0, -0.3, -0.7];
            patch.push(r);
        }
        records.extend(patch.iter().cloned());
        let scene = Scene::new(records);
        let sketch = if n_sketch > 0 {
            let indices: Vec<usize> = (0..n_sketch).collect();
            let activated: Vec<_> = scene.splats[..n_sketch]
                .iter()
                .map(|s| activate(s).unwrap())
                .collect();
            let act_all: Vec<_> = scene.splats.iter().map(|s| activate(s).unwrap()).collect();
            let _ = activated;
            let positions = member_positions(&act_all, &indices);
            let attrs = extract_attributes(&act_all, &indices);
            let model = grid_search_fit(&positions, &attrs, indices).unwrap();
            encode_sketch(&[model], &scene).unwrap()
        } else {
            encode_sketch(&[], &scene).unwrap()
        };
        (sketch, patch, scene)
    }

    #[test]
    fn round_trip_bit_exact() {
        let (sketch, patch, scene) = build_inputs(200, 80, 1);
        let plan = LayerPlan::default();
        let packed = pack(
            &sketch,
            &patch,
            &plan,
            scene.bbox_min,
            scene.bbox_max,
            7,
            b"config",
        )
        .unwrap();
        let (sketch2, patches, header) = unpack(&packed).unwrap();
        assert_eq!(sketch2, sketch);
        assert_eq!(header.layers.len(), 5);
        assert_eq!(header.extension, b"config");
        assert_eq!(
            patches.iter().map(|p| p.splat_count()).sum::<usize>(),
            patch.len()
        );
        // packing again is byte-identical
        let packed2 = pack(
            &sketch,
            &patch,
            &plan,
            scene.bbox_min,
            scene.bbox_max,
            7,
            b"config",
        )
        .unwrap();
        assert_eq!(packed, packed2);
    }

    #[test]
    fn single_fraction_gives_two_layers() {
        let (sketch, patch, scene) = build_inputs(100, 30, 2);
        let plan = LayerPlan {
            fractions: vec![1.0],
        };
        let packed = pack(&sketch, &patch, &plan, scene.bbox_min, scene.bbox_max, 0, &[])
            .unwrap();
        let header = read_header(&packed).unwrap();
        assert_eq!(header.layers.len(), 2);
        assert_eq!(header.layers[0].kind, LayerKind::Sketch);
        assert_eq!(header.layers[1].kind, LayerKind::Patch);
        assert_eq!(header.layers[1].splat_count, 30);
    }

    #[test]
    fn empty_patch_is_single_layer() {
        let (sketch, _, scene) = build_inputs(100, 0, 3);
        let packed = pack(
            &sketch,
            &[],
            &LayerPlan::default(),
            scene.bbox_min,
            scene.bbox_max,
            0,
            &[],
        )
        .unwrap();
        let (_, patches, header) = unpack(&packed).unwrap();
        assert_eq!(header.layers.len(), 1);
        assert!(patches.is_empty());
        let scene0 = assemble_prefix(&packed, 0).unwrap();
        assert_eq!(scene0.len(), 100);
    }

    #[test]
    fn bad_magic_rejected() {
        let (sketch, patch, scene) = build_inputs(60, 20, 4);
        let mut packed = pack(
            &sketch,
            &patch,
            &LayerPlan::default(),
            scene.bbox_min,
            scene.bbox_max,
            0,
            &[],
        )
        .unwrap();
        packed[3] ^= 0xff;
        let err = unpack(&packed).unwrap_err();
        assert!(matches!(err, Error::Format { .. }));
        assert!(err.to_string().contains("not a GSSP container"));
    }

    #[test]
    fn truncation_rejected_with_lengths() {
        let (sketch, patch, scene) = build_inputs(60, 20, 5);
        let packed = pack(
            &sketch,
            &patch,
            &LayerPlan::default(),
            scene.bbox_min,
            scene.bbox_max,
            0,
            &[],
        )
        .unwrap();
        let err = unpack(&packed[..packed.len() - 10]).unwrap_err();
        match err {
            Error::Format { msg, .. } => {
                assert!(msg.contains(&format!("{}", packed.len())), "{msg}");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn unknown_version_rejected() {
        let (sketch, patch, scene) = build_inputs(60, 20, 6);
        let packed = pack(
            &sketch,
            &patch,
            &LayerPlan::default(),
            scene.bbox_min,
            scene.bbox_max,
            0,
            &[],
        )
        .unwrap();
        // rebuild with a patched version inside the deflated header
        let header_comp_len =
            u64::from_le_bytes(packed[20..28].try_into().unwrap()) as usize;
        let mut header_plain = inflate(&packed[28..28 + header_comp_len]).unwrap();
        header_plain[0] = 9;
        let header_comp = deflate(&header_plain);
        let mut rebuilt = Vec::new();
        rebuilt.extend_from_slice(&MAGIC);
        let tail = &packed[28 + header_comp_len..];
        let body_len = 12 + header_comp.len() + tail.len();
        rebuilt.extend_from_slice(&(body_len as u64).to_le_bytes());
        rebuilt.extend_from_slice(&crc32(&header_comp).to_le_bytes());
        rebuilt.extend_from_slice(&(header_comp.len() as u64).to_le_bytes());
        rebuilt.extend_from_slice(&header_comp);
        rebuilt.extend_from_slice(tail);
        assert!(matches!(unpack(&rebuilt), Err(Error::Version(9))));
    }

    #[test]
    fn corruption_fuzz_never_silent() {
        let (sketch, patch, scene) = build_inputs(150, 60, 7);
        let packed = pack(
            &sketch,
            &patch,
            &LayerPlan::default(),
            scene.bbox_min,
            scene.bbox_max,
            3,
            b"cfg",
        )
        .unwrap();
        let baseline = unpack(&packed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..200 {
            let mut corrupted = packed.clone();
            let pos = rng.gen_range(0..corrupted.len());
            let bit = 1u8 << rng.gen_range(0..8);
            corrupted[pos] ^= bit;
            match unpack(&corrupted) {
                Err(_) => {}
                Ok(result) => {
                    // a flip confined to ignored padding cannot occur; any
                    // accepted stream must decode to the identical components
                    assert_eq!(result.0, baseline.0, "silent sketch change at byte {pos}");
                    assert_eq!(result.1, baseline.1, "silent patch change at byte {pos}");
                    panic!("corruption at byte {pos} bit {bit} accepted");
                }
            }
        }
    }

    #[test]
    fn prefix_scenes_nested_and_additive() {
        let (sketch, patch, scene) = build_inputs(200, 100, 8);
        let plan = LayerPlan::default();
        let packed = pack(&sketch, &patch, &plan, scene.bbox_min, scene.bbox_max, 1, &[])
            .unwrap();
        let header = read_header(&packed).unwrap();
        let mut prev_len = 0usize;
        let mut cumulative = 0u64;
        for k in 0..header.layers.len() {
            let prefix_scene = assemble_prefix(&packed, k).unwrap();
            cumulative += header.layers[k].splat_count;
            assert_eq!(prefix_scene.len() as u64, cumulative);
            assert!(prefix_scene.len() >= prev_len);
            prev_len = prefix_scene.len();
        }
        assert_eq!(cumulative, 200 + 100);
        // full prefix equals full decode
        let full = assemble_prefix(&packed, header.layers.len() - 1).unwrap();
        assert_eq!(full.len(), 300);
    }

    #[test]
    fn prefix_is_decodable_from_truncated_bytes() {
        let (sketch, patch, scene) = build_inputs(150, 80, 9);
        let packed = pack(
            &sketch,
            &patch,
            &LayerPlan::default(),
            scene.bbox_min,
            scene.bbox_max,
            1,
            &[],
        )
        .unwrap();
        let header = read_header(&packed).unwrap();
        // keep exactly through layer 1
        let region_start = packed.len()
            - header
                .layers
                .last()
                .map(|l| (l.byte_offset + l.byte_length) as usize)
                .unwrap();
        let keep = region_start
            + (header.layers[1].byte_offset + header.layers[1].byte_length) as usize;
        let prefix = &packed[..keep];
        let s1 = assemble_prefix(prefix, 1).unwrap();
        assert_eq!(
            s1.len() as u64,
            header.layers[0].splat_count + header.layers[1].splat_count
        );
        let err = assemble_prefix(prefix, 2).unwrap_err();
        match err {
            Error::Incomplete { needed, have } => {
                assert_eq!(have as usize, keep);
                assert!(needed > have);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn layer_importance_ordering() {
        // the strongest splats land in the first patch layer
        let mut patch = Vec::new();
        for i in 0..40 {
            let mut r = smooth_record([0.5, 0.5, 0.5]);
            r.opacity_logit = if i < 10 { 6.0 } else { -6.0 };
            r.position = [i as f32 * 0.01, 0.0, 0.0];
            patch.push(r);
        }
        let scene = Scene::new(patch.clone());
        let sketch = encode_sketch(&[], &scene).unwrap();
        let packed = pack(
            &sketch,
            &patch,
            &LayerPlan::default(),
            scene.bbox_min,
            scene.bbox_max,
            0,
            &[],
        )
        .unwrap();
        let (_, patches, _) = unpack(&packed).unwrap();
        assert_eq!(patches[0].splat_count(), 10);
        let first_layer = dequantize_patch(&patches[0]).unwrap();
        for s in &first_layer {
            assert!(s.opacity_logit > 0.0);
        }
    }

    #[test]
    fn framing_overhead_bounded() {
        let (sketch, patch, scene) = build_inputs(200, 120, 10);
        let plan = LayerPlan::default();
        let packed = pack(&sketch, &patch, &plan, scene.bbox_min, scene.bbox_max, 2, &[])
            .unwrap();
        let (sketch2, patches, header) = unpack(&packed).unwrap();
        let plain_total = sketch2.to_bytes().len()
            + patches.iter().map(|p| p.to_bytes().len()).sum::<usize>();
        let region_len = header
            .layers
            .iter()
            .map(|l| l.byte_length as usize)
            .sum::<usize>();
        assert!(
            region_len <= plain_total + 64,
            "deflate pass enlarged sections: {region_len} vs {plain_total}"
        );
        // repeated-index payloads actually shrink
        assert!(region_len < plain_total);
    }

    #[test]
    fn invalid_layer_plans_rejected() {
        for fractions in [
            vec![],
            vec![0.5],
            vec![0.5, 0.5, 1.0],
            vec![0.75, 0.5, 1.0],
            vec![0.0, 1.0],
            vec![0.5, 1.5],
        ] {
            let plan = LayerPlan { fractions };
            assert!(plan.validate().is_err(), "{plan:?}");
        }
        assert!(LayerPlan::default().validate().is_ok());
    }
}
