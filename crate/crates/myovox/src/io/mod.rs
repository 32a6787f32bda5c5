//! File formats: TetGen meshes, curve networks, field buffers, surfaces,
//! images, fibers, cameras and color tables.

mod curves;
mod fibers;
mod fields;
mod image;
mod surface;
mod tetgen;
mod view;

use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result, WithPath};

pub use curves::{curves_to_json, parse_curves, read_curves, CurveFile, CurveJson};
pub use fibers::{fibers_csv, fibers_json};
pub use fields::{field_buffer_f32, parse_field_buffer_f32, read_fields, fields_bin, fields_json, parse_fields_bin, parse_fields_json};
pub use image::{encode_png, encode_ppm};
pub use surface::{write_obj, write_off};
pub use tetgen::{load_tetmesh, mesh_from_text, parse_ele, parse_node, write_ele, write_node, TagsFile};
pub use view::{parse_camera, parse_colors, read_camera, read_colors, CameraJson};

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).at(path)
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_str(&read_text(path)?).map_err(|e| Error::json(path, e))
}

/// Write a file, creating parent directories.
pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).at(dir)?;
    }
    std::fs::write(path, bytes).at(path)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
