//! Run manifest: what was written, with content hashes, plus the volume and
//! split summary of the extracted meshes.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use myovox_core::envelope::{LabeledTetMesh, TissueLabel};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::io::{sha256_hex, write_file};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TissueSummary {
    /// Tissue id, or `"bone"`.
    pub label: String,
    pub tets: usize,
    pub volume: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSummary {
    pub input_tets: usize,
    pub output_tets: usize,
    /// Entry `n` counts input tets whose pieces carry `n` distinct labels.
    pub histogram: Vec<usize>,
    pub single_tissue_fraction: f64,
    pub rounds: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Manifest {
    pub scene: String,
    pub tissue_ids: Vec<u32>,
    pub vertices: usize,
    pub tets: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<SplitSummary>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tissues: Vec<TissueSummary>,
    /// File name to sha256.
    pub files: BTreeMap<String, String>,
}

pub fn label_name(label: TissueLabel) -> String {
    match label {
        TissueLabel::Tissue(id) => id.to_string(),
        TissueLabel::Bone => "bone".into(),
    }
}

impl Manifest {
    pub fn record_diagram(&mut self, labeled: &LabeledTetMesh) {
        let s = &labeled.stats;
        self.split = Some(SplitSummary {
            input_tets: s.original_tets,
            output_tets: s.output_tets,
            histogram: s.histogram.clone(),
            single_tissue_fraction: s.single_tissue_fraction(),
            rounds: s.rounds,
        });
        let mut counts: BTreeMap<TissueLabel, usize> = BTreeMap::new();
        for &l in &labeled.labels {
            *counts.entry(l).or_default() += 1;
        }
        self.tissues = labeled
            .label_volumes()
            .into_iter()
            .map(|(l, volume)| TissueSummary { label: label_name(l), tets: counts[&l], volume })
            .collect();
    }

    pub fn to_json(&self) -> String {
        crate::json::to_string(self)
    }
}

/// Writes files into one directory and remembers their hashes.
#[derive(Debug)]
pub struct OutputDir {
    dir: PathBuf,
    files: BTreeMap<String, String>,
}

impl OutputDir {
    pub fn new(dir: &Path) -> Self {
        OutputDir { dir: dir.to_path_buf(), files: BTreeMap::new() }
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        write_file(&self.dir.join(name), bytes)?;
        self.files.insert(name.to_string(), sha256_hex(bytes));
        Ok(())
    }

    /// Write `<scene>_manifest.json` listing everything written so far.
    pub fn finish(self, mut manifest: Manifest) -> Result<Manifest> {
        manifest.files = self.files;
        let name = format!("{}_manifest.json", manifest.scene);
        write_file(&self.dir.join(name), manifest.to_json().as_bytes())?;
        Ok(manifest)
    }
}
