//! Topology conditioning images: distance-based node colours and
//! gradient-coloured edges over the anatomical graph.

mod graph;
mod raster;

pub use graph::{
    color_nodes, graph_distances, mix_colors, MixedColors, NodeColoring, Rgb, TopologyGraph,
};
pub use raster::{
    gradient_edge, png_dimensions, quantize, raster_position, rasterize, rasterize_batch,
    rasterize_with, RasterStyle, TopologyImage, MIN_RASTER_SIZE,
};
pub(crate) use raster::encode_png;
