//! Binary little-endian PLY reader/writer for the 62-property 3DGS vertex
//! layout used by the reference exporter.

use crate::error::{Error, Result};
use crate::splat::{Scene, SplatRecord};

/// Property names in file order. Normals are read and discarded, and
/// written back as zeros.
fn expected_properties() -> Vec<String> {
    let mut props = vec![
        "x".to_string(),
        "y".to_string(),
        "z".to_string(),
        "nx".to_string(),
        "ny".to_string(),
        "nz".to_string(),
    ];
    for i in 0..3 {
        props.push(format!("f_dc_{i}"));
    }
    for i in 0..45 {
        props.push(format!("f_rest_{i}"));
    }
    props.push("opacity".to_string());
    for i in 0..3 {
        props.push(format!("scale_{i}"));
    }
    for i in 0..4 {
        props.push(format!("rot_{i}"));
    }
    props
}

const PROPERTY_COUNT: usize = 62;
const VERTEX_BYTES: usize = PROPERTY_COUNT * 4;

/// Parses a 3DGS PLY file into a [`Scene`], preserving vertex order.
pub fn load_ply(bytes: &[u8]) -> Result<Scene> {
    let header_end = find_header_end(bytes)?;
    let header = std::str::from_utf8(&bytes[..header_end])
        .map_err(|_| Error::Parse("header is not valid UTF-8".into()))?;

    let mut lines = header.lines();
    if lines.next().map(str::trim) != Some("ply") {
        return Err(Error::Parse("missing 'ply' magic line".into()));
    }

    let mut vertex_count: Option<usize> = None;
    let mut format_seen = false;
    let mut properties: Vec<String> = Vec::new();
    let mut in_vertex_element = false;

    for line in lines {
        let line = line.trim();
        if line.is_empty() || line.starts_with("comment") {
            continue;
        }
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("format") => {
                let kind = tok.next().unwrap_or("");
                if kind != "binary_little_endian" {
                    return Err(Error::Parse(format!("unsupported format '{kind}'")));
                }
                format_seen = true;
            }
            Some("element") => {
                let name = tok.next().unwrap_or("");
                if name == "vertex" {
                    let count: usize = tok
                        .next()
                        .and_then(|c| c.parse().ok())
                        .ok_or_else(|| Error::Parse("bad vertex count".into()))?;
                    vertex_count = Some(count);
                    in_vertex_element = true;
                } else {
                    in_vertex_element = false;
                }
            }
            Some("property") => {
                if in_vertex_element {
                    let ty = tok.next().unwrap_or("");
                    if ty != "float" {
                        return Err(Error::Schema(format!("non-float property type '{ty}'")));
                    }
                    properties.push(tok.next().unwrap_or("").to_string());
                }
            }
            Some("end_header") => break,
            Some(other) => return Err(Error::Parse(format!("unexpected header line '{other}'"))),
            None => {}
        }
    }

    if !format_seen {
        return Err(Error::Parse("missing format line".into()));
    }
    let vertex_count = vertex_count.ok_or_else(|| Error::Parse("missing vertex element".into()))?;
    let expected = expected_properties();
    if properties != expected {
        for p in &expected {
            if !properties.contains(p) {
                return Err(Error::Schema(format!("missing required property '{p}'")));
            }
        }
        return Err(Error::Schema("vertex properties out of order".into()));
    }

    let data = &bytes[header_end..];
    let need = vertex_count * VERTEX_BYTES;
    if data.len() < need {
        return Err(Error::Parse(format!(
            "payload truncated: need {need} bytes, have {}",
            data.len()
        )));
    }

    let mut splats = Vec::with_capacity(vertex_count);
    for v in 0..vertex_count {
        let base = v * VERTEX_BYTES;
        let mut fields = [0.0f32; PROPERTY_COUNT];
        for (k, f) in fields.iter_mut().enumerate() {
            let o = base + k * 4;
            *f = f32::from_le_bytes(data[o..o + 4].try_into().unwrap());
        }
        let rec = SplatRecord {
            position: [fields[0], fields[1], fields[2]],
            // fields 3..6 are normals, discarded
            sh_dc: [fields[6], fields[7], fields[8]],
            sh_rest: fields[9..54].try_into().unwrap(),
            opacity_logit: fields[54],
            log_scale: [fields[55], fields[56], fields[57]],
            rot: [fields[58], fields[59], fields[60], fields[61]],
        };
        if !rec.is_finite() {
            return Err(Error::Data(format!("non-finite field at vertex {v}")));
        }
        splats.push(rec);
    }
    Ok(Scene::new(splats))
}

fn find_header_end(bytes: &[u8]) -> Result<usize> {
    let needle = b"end_header\n";
    bytes
        .windows(needle.len())
        .position(|w| w == needle)
        .map(|p| p + needle.len())
        .ok_or_else(|| Error::Parse("missing end_header".into()))
}

/// Serializes a [`Scene`] back to the 62-property binary PLY layout.
pub fn save_ply(scene: &Scene) -> Vec<u8> {
    let mut out = Vec::with_capacity(512 + scene.len() * VERTEX_BYTES);
    out.extend_from_slice(b"ply\nformat binary_little_endian 1.0\n");
    out.extend_from_slice(format!("element vertex {}\n", scene.len()).as_bytes());
    for p in expected_properties() {
        out.extend_from_slice(format!("property float {p}\n").as_bytes());
    }
    out.extend_from_slice(b"end_header\n");
    for s in &scene.splats {
        for v in s.position {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&[0u8; 12]); // zero-filled normals
        for v in s.sh_dc {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for v in s.sh_rest {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&s.opacity_logit.to_le_bytes());
        for v in s.log_scale {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for v in s.rot {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}
