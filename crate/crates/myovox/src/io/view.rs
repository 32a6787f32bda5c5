use std::collections::BTreeMap;
use std::path::Path;

use myovox_core::render::Camera;
use myovox_core::Vec3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraJson {
    pub eye: [f64; 3],
    pub look_at: [f64; 3],
    pub up: [f64; 3],
    /// Vertical field of view in degrees.
    pub fov: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraJson {
    pub fn to_camera(&self) -> std::result::Result<Camera, myovox_core::Error> {
        let v = |a: [f64; 3]| Vec3::new(a[0], a[1], a[2]);
        let cam = Camera {
            eye: v(self.eye),
            look_at: v(self.look_at),
            up: v(self.up),
            vertical_fov: self.fov,
            width: self.width,
            height: self.height,
        };
        cam.validate()?;
        Ok(cam)
    }
}

pub fn parse_camera(text: &str) -> std::result::Result<Camera, String> {
    let c: CameraJson = serde_json::from_str(text).map_err(|e| e.to_string())?;
    c.to_camera().map_err(|e| e.to_string())
}

pub fn read_camera(path: &Path) -> Result<Camera> {
    parse_camera(&super::read_text(path)?).map_err(|message| Error::Json { path: path.to_path_buf(), message })
}

/// Color table: tissue id (as a JSON key) to RGB.
pub fn parse_colors(text: &str) -> std::result::Result<BTreeMap<u32, [u8; 3]>, String> {
    let raw: BTreeMap<String, [u8; 3]> = serde_json::from_str(text).map_err(|e| e.to_string())?;
    raw.into_iter()
        .map(|(k, v)| k.trim().parse::<u32>().map(|id| (id, v)).map_err(|_| format!("bad tissue id '{k}'")))
        .collect()
}

pub fn read_colors(path: &Path) -> Result<BTreeMap<u32, [u8; 3]>> {
    parse_colors(&super::read_text(path)?).map_err(|message| Error::Json { path: path.to_path_buf(), message })
}
