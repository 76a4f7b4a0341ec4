//! Structure-aware codec for 3D Gaussian splatting scenes.
//!
//! The pipeline separates a scene into two components: *sketch* clusters
//! whose attributes are well explained by low-degree polynomial laws of
//! position (stored as half-precision coefficients plus quantized
//! positions), and residual *patch* splats (stored via uniform pruning and
//! codebook vector quantization). Both are serialized into a layered
//! container that supports progressive prefix decoding.

pub mod cluster;
pub mod container;
pub mod error;
pub mod half16;
pub mod kdtree;
pub mod kmeans;
pub mod patch;
pub mod ply;
pub mod polyfit;
pub mod refine;
pub mod sketch;
pub mod splat;
pub mod stream;
pub mod synth;

pub use cluster::{dbscan, ClusterParams, Labeling, SplatFeatures};
pub use container::{assemble_prefix, pack, read_header, unpack, ContainerHeader, LayerPlan};
pub use error::{Error, Result};
pub use patch::{
    dequantize_patch, import_retrained_patch, prune_uniform, quantize_patch, PatchPayload,
    PruneSpec,
};
pub use ply::{load_ply, save_ply};
pub use polyfit::{grid_search_fit, ClusterModel};
pub use refine::{categorize, Categorization, RefineParams};
pub use sketch::{decode_sketch, encode_sketch, EncodedSketch};
pub use splat::{activate, subset_stats, ActivatedSplat, Scene, SplatRecord, SubsetStats};
