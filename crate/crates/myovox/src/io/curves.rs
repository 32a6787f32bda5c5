use std::path::Path;

use myovox_core::curves::MuscleCurve;
use myovox_core::Vec3;
use serde::{Deserialize, Serialize};

use super::read_text;
use crate::error::{Error, Result};

fn one() -> [f64; 3] {
    [1.0; 3]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveJson {
    pub id: u32,
    pub control_points: Vec<[f64; 3]>,
    pub tissue_values: Vec<f64>,
    #[serde(default)]
    pub twist_angle: f64,
    #[serde(default = "one")]
    pub eigenvalues: [f64; 3],
}

impl From<&CurveJson> for MuscleCurve {
    fn from(c: &CurveJson) -> Self {
        MuscleCurve {
            id: c.id,
            control_points: c.control_points.iter().map(|p| Vec3::new(p[0], p[1], p[2])).collect(),
            tissue_values: c.tissue_values.clone(),
            twist_angle: c.twist_angle,
            eigenvalues: c.eigenvalues,
        }
    }
}

impl From<&MuscleCurve> for CurveJson {
    fn from(c: &MuscleCurve) -> Self {
        CurveJson {
            id: c.id,
            control_points: c.control_points.iter().map(|p| [p.x(), p.y(), p.z()]).collect(),
            tissue_values: c.tissue_values.clone(),
            twist_angle: c.twist_angle,
            eigenvalues: c.eigenvalues,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveFile {
    pub curves: Vec<CurveJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_fat: Option<f64>,
}

/// Curves (validated) and the optional fat value of a curve network.
pub fn parse_curves(text: &str) -> std::result::Result<(Vec<MuscleCurve>, Option<f64>), String> {
    let file: CurveFile = serde_json::from_str(text).map_err(|e| e.to_string())?;
    let mut curves = Vec::with_capacity(file.curves.len());
    for c in &file.curves {
        let curve = MuscleCurve::from(c);
        curve.validate().map_err(|e| format!("curve {}: {e}", c.id))?;
        curves.push(curve);
    }
    Ok((curves, file.d_fat))
}

pub fn read_curves(path: &Path) -> Result<(Vec<MuscleCurve>, Option<f64>)> {
    parse_curves(&read_text(path)?).map_err(|message| Error::Json { path: path.to_path_buf(), message })
}

pub fn curves_to_json(curves: &[MuscleCurve], d_fat: Option<f64>) -> String {
    crate::json::to_string(&CurveFile { curves: curves.iter().map(CurveJson::from).collect(), d_fat })
}
