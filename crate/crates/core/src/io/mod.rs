//! File formats and dataset plumbing.

pub mod config;
pub mod export;
pub mod pnm;
pub mod seeds;
pub mod subsample;
pub mod text;

pub use config::{parse_config, read_config};
pub use export::{contour_polylines, format_contour, write_contour};
pub use pnm::{encode_pnm, load_image, parse_pnm, read_pnm, write_pnm, Image};
pub use seeds::{image_to_mask, mask_to_image, read_mask, read_trimap, write_mask, Trimap};
pub use subsample::{pixel_spacing, subsample_to_graph, SampleMode, SampledGraph};
pub use text::{
    format_graph, format_polygons, format_snapshot, parse_graph, parse_polygons, parse_snapshot, read_graph, read_polygons,
    read_snapshot, write_graph, write_snapshot, write_snapshots, GraphFile,
};
