//! Command implementations. Each command prints machine-readable JSON lines
//! to stdout and a short human summary to stderr.

use crate::config::Config;
use gssp_core::container::{read_header, read_header_prefix, LayerKind};
use gssp_core::half16::from_half;
use gssp_core::patch::{dequantize_patch, prune_uniform};
use gssp_core::sketch::{decode_sketch, encode_sketch};
use gssp_core::splat::{subset_stats, Scene, SplatRecord, SubsetStats};
use gssp_core::{
    assemble_prefix, categorize, load_ply, pack, save_ply, unpack, Error, Result,
};
use serde_json::json;
use std::fs;
use std::path::Path;

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn emit(value: serde_json::Value) {
    println!("{value}");
}

fn kind_name(kind: LayerKind) -> &'static str {
    match kind {
        LayerKind::Sketch => "sketch",
        LayerKind::Patch => "patch",
    }
}

pub fn cmd_encode(input: &Path, output: &Path, config: &Config) -> Result<()> {
    let ply_bytes = read_file(input)?;
    let scene = load_ply(&ply_bytes)?;
    let cluster_params = config.cluster_params(scene.bbox_diagonal());
    let cat = categorize(&scene, &cluster_params, &config.refine_params())?;

    let sketch = encode_sketch(&cat.sketch_clusters, &scene)?;
    let retained: Vec<SplatRecord> = prune_uniform(&cat.patch_indices, &config.prune_spec())
        .into_iter()
        .map(|i| scene.splats[i].clone())
        .collect();
    let packed = pack(
        &sketch,
        &retained,
        &config.layer_plan(),
        scene.bbox_min,
        scene.bbox_max,
        config.codebook_seed(),
        config.to_provenance_text().as_bytes(),
    )?;
    write_file(output, &packed)?;

    emit(json!({
        "event": "categorize",
        "total_splats": scene.len(),
        "sketch_splats": cat.sketch_count(),
        "sketch_clusters": cat.sketch_clusters.len(),
        "patch_splats": cat.patch_indices.len(),
        "patch_retained": retained.len(),
        "mse_combined_sum": cat.sketch_clusters.iter().map(|c| c.mse_combined).sum::<f64>(),
    }));
    let header = read_header(&packed)?;
    for (i, layer) in header.layers.iter().enumerate() {
        emit(json!({
            "event": "layer",
            "index": i,
            "kind": kind_name(layer.kind),
            "bytes": layer.byte_length,
            "splats": layer.splat_count,
        }));
    }
    let sketch_bytes = sketch.to_bytes();
    emit(json!({
        "event": "sections",
        "sketch_coefficient_bytes": sketch_bytes.len() - 8 - sketch.positions_blob.len(),
        "sketch_position_bytes": sketch.positions_blob.len(),
    }));
    let ratio = ply_bytes.len() as f64 / packed.len() as f64;
    emit(json!({
        "event": "summary",
        "input_bytes": ply_bytes.len(),
        "output_bytes": packed.len(),
        "compression_ratio": ratio,
    }));
    eprintln!(
        "encoded {} splats ({} sketch in {} clusters, {} patch retained) \
         into {} bytes, {:.1}x",
        scene.len(),
        cat.sketch_count(),
        cat.sketch_clusters.len(),
        retained.len(),
        packed.len(),
        ratio
    );
    Ok(())
}

pub fn cmd_decode(input: &Path, output: &Path, layer: Option<usize>) -> Result<()> {
    let bytes = read_file(input)?;
    let header = read_header_prefix(&bytes)?;
    let upto = match layer {
        Some(k) if k >= header.layers.len() => {
            return Err(Error::Input(format!(
                "layer {k} out of range (container has {} layers)",
                header.layers.len()
            )))
        }
        Some(k) => k,
        None => header.layers.len() - 1,
    };
    let scene = assemble_prefix(&bytes, upto)?;
    write_file(output, &save_ply(&scene))?;
    emit(json!({
        "event": "decode",
        "layers_used": upto + 1,
        "layers_total": header.layers.len(),
        "splats": scene.len(),
    }));
    eprintln!(
        "decoded {} splats from layers 0..={upto} of {}",
        scene.len(),
        header.layers.len()
    );
    Ok(())
}

fn stats_json(name: &str, s: &SubsetStats) -> serde_json::Value {
    json!({
        "event": "category",
        "name": name,
        "count": s.count,
        "density": s.density,
        "elongation": s.elongation,
        "spatial_volume": s.spatial_volume,
    })
}

fn category_stats(name: &str, splats: Vec<SplatRecord>) -> Result<()> {
    if splats.is_empty() {
        emit(json!({
            "event": "category",
            "name": name,
            "count": 0,
            "density": 0.0,
            "elongation": 0.0,
            "spatial_volume": 0.0,
        }));
        return Ok(());
    }
    let scene = Scene::new(splats);
    let indices: Vec<usize> = (0..scene.len()).collect();
    emit(stats_json(name, &subset_stats(&scene, &indices)?));
    Ok(())
}

pub fn cmd_stats(input: &Path) -> Result<()> {
    let bytes = read_file(input)?;
    if bytes.starts_with(b"ply") {
        let scene = load_ply(&bytes)?;
        category_stats("scene", scene.splats)?;
        eprintln!("plain scene statistics for {}", input.display());
        return Ok(());
    }

    let (sketch, patches, header) = unpack(&bytes)?;
    let sketch_records = decode_sketch(&sketch)?;
    let sketch_count = sketch_records.len();
    category_stats("sketch", sketch_records)?;
    let mut patch_records = Vec::new();
    for payload in &patches {
        patch_records.extend(dequantize_patch(payload)?);
    }
    let patch_count = patch_records.len();
    category_stats("patch", patch_records)?;

    let sketch_bytes = sketch.to_bytes();
    let layer_bytes: u64 = header.layers.iter().map(|l| l.byte_length).sum();
    emit(json!({
        "event": "sections",
        "total_bytes": bytes.len(),
        "framing_bytes": bytes.len() as u64 - layer_bytes,
        "sketch_coefficient_bytes": sketch_bytes.len() - 8 - sketch.positions_blob.len(),
        "sketch_position_bytes": sketch.positions_blob.len(),
    }));
    for (i, layer) in header.layers.iter().enumerate() {
        emit(json!({
            "event": "layer",
            "index": i,
            "kind": kind_name(layer.kind),
            "bytes": layer.byte_length,
            "splats": layer.splat_count,
        }));
    }
    eprintln!(
        "container with {} sketch and {} patch splats in {} layers",
        sketch_count,
        patch_count,
        header.layers.len()
    );
    Ok(())
}

pub fn cmd_layers(input: &Path) -> Result<()> {
    let bytes = read_file(input)?;
    let header = read_header(&bytes)?;
    for (i, layer) in header.layers.iter().enumerate() {
        emit(json!({
            "event": "layer",
            "index": i,
            "kind": kind_name(layer.kind),
            "offset": layer.byte_offset,
            "bytes": layer.byte_length,
            "splats": layer.splat_count,
            "crc32": layer.crc32,
        }));
        eprintln!(
            "layer {i}: {:>6} {:>10} bytes {:>9} splats",
            kind_name(layer.kind),
            layer.byte_length,
            layer.splat_count
        );
    }
    Ok(())
}

pub fn cmd_inspect(input: &Path, cluster: usize) -> Result<()> {
    let bytes = read_file(input)?;
    let (sketch, _, _) = unpack(&bytes)?;
    let Some(c) = sketch.clusters.get(cluster) else {
        return Err(Error::Input(format!(
            "cluster {cluster} out of range (sketch has {} clusters)",
            sketch.clusters.len()
        )));
    };
    let group_names = ["scaling", "rotation", "opacity", "color"];
    let mut groups = Vec::new();
    for (g, name) in group_names.iter().enumerate() {
        let coeffs: Vec<f32> = c.coeffs[g].iter().map(|&b| from_half(b)).collect();
        groups.push(json!({
            "group": name,
            "degree": c.degrees[g],
            "coefficients": coeffs,
        }));
    }
    emit(json!({
        "event": "cluster",
        "index": cluster,
        "member_count": c.member_count,
        "norm_min": c.norm_min.map(from_half),
        "norm_max": c.norm_max.map(from_half),
        "models": groups,
    }));
    eprintln!(
        "cluster {cluster}: {} members, degrees {:?}",
        c.member_count, c.degrees
    );
    Ok(())
}
