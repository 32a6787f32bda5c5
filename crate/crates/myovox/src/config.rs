//! Scene configuration for the batch pipeline. Relative paths resolve
//! against the directory holding the config file.

use std::path::{Path, PathBuf};

use myovox_core::envelope::DEFAULT_EPS;
use myovox_core::fibers::DEFAULT_FIBER_ALPHA;
use myovox_core::render::DEFAULT_MARCH_STEP;
use myovox_core::solver::DEFAULT_ALPHA;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::CameraJson;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshPaths {
    pub node: PathBuf,
    pub ele: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tags: Option<PathBuf>,
}

fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}

fn default_samples() -> usize {
    myovox_core::curves::DEFAULT_SAMPLES_PER_SPAN
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Falls back to the curve file's value, then to the default fraction
    /// of the mean tissue value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_fat: Option<f64>,
    #[serde(default)]
    pub exclude_open_boundary: bool,
    #[serde(default = "default_samples")]
    pub samples_per_span: usize,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig { alpha: DEFAULT_ALPHA, d_fat: None, exclude_open_boundary: false, samples_per_span: default_samples() }
    }
}

fn default_eps() -> f64 {
    DEFAULT_EPS
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvelopeConfig {
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "yes")]
    pub prune: bool,
}

impl Default for EnvelopeConfig {
    fn default() -> Self {
        EnvelopeConfig { eps: DEFAULT_EPS, prune: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TableFormat {
    #[default]
    Csv,
    Json,
}

fn default_fiber_alpha() -> f64 {
    DEFAULT_FIBER_ALPHA
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiberConfig {
    #[serde(default = "default_fiber_alpha")]
    pub alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint_radius: Option<f64>,
    #[serde(default)]
    pub format: TableFormat,
}

impl Default for FiberConfig {
    fn default() -> Self {
        FiberConfig { alpha: DEFAULT_FIBER_ALPHA, endpoint_radius: None, format: TableFormat::Csv }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CameraSource {
    File(PathBuf),
    Inline(CameraJson),
}

fn default_march() -> f64 {
    DEFAULT_MARCH_STEP
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RenderConfig {
    #[serde(default)]
    pub cameras: Vec<CameraSource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub colors: Option<PathBuf>,
    #[serde(default = "default_march")]
    pub march_step: f64,
    #[serde(default = "yes")]
    pub png: bool,
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig { cameras: Vec::new(), colors: None, march_step: DEFAULT_MARCH_STEP, png: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldFormat {
    #[default]
    Bin,
    Json,
}

fn default_addr() -> String {
    "127.0.0.1:8750".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServeConfig {
    #[serde(default = "default_addr")]
    pub addr: String,
    /// Directory for session journals and finalize outputs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub journal: Option<PathBuf>,
}

impl Default for ServeConfig {
    fn default() -> Self {
        ServeConfig { addr: default_addr(), journal: None }
    }
}

fn default_scene() -> String {
    "scene".into()
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    /// Prefix of every output file.
    #[serde(default = "default_scene")]
    pub scene: String,
    pub mesh: MeshPaths,
    pub curves: PathBuf,
    #[serde(default)]
    pub solve: SolveConfig,
    #[serde(default)]
    pub envelope: EnvelopeConfig,
    #[serde(default)]
    pub fibers: FiberConfig,
    #[serde(default)]
    pub render: RenderConfig,
    #[serde(default)]
    pub fields_format: FieldFormat,
    #[serde(default = "default_out")]
    pub output: PathBuf,
    #[serde(default)]
    pub serve: ServeConfig,
}

/// Command-line overrides shared by all subcommands.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub alpha: Option<f64>,
    pub d_fat: Option<f64>,
    pub eps: Option<f64>,
    pub out: Option<PathBuf>,
}

impl SceneConfig {
    /// A config for the given inputs with every other setting at its default.
    pub fn new(scene: &str, mesh: MeshPaths, curves: PathBuf, output: PathBuf) -> Self {
        SceneConfig {
            scene: scene.into(),
            mesh,
            curves,
            solve: SolveConfig::default(),
            envelope: EnvelopeConfig::default(),
            fibers: FiberConfig::default(),
            render: RenderConfig::default(),
            fields_format: FieldFormat::Bin,
            output,
            serve: ServeConfig::default(),
        }
    }

    pub fn parse(text: &str, base: &Path) -> std::result::Result<Self, String> {
        let mut cfg: SceneConfig = serde_json::from_str(text).map_err(|e| e.to_string())?;
        cfg.resolve(base);
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = crate::io::read_text(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        SceneConfig::parse(&text, base).map_err(|message| Error::Json { path: path.to_path_buf(), message })
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.mesh.node);
        fix(&mut self.mesh.ele);
        if let Some(t) = &mut self.mesh.tags {
            fix(t);
        }
        fix(&mut self.curves);
        fix(&mut self.output);
        if let Some(c) = &mut self.render.colors {
            fix(c);
        }
        for cam in &mut self.render.cameras {
            if let CameraSource::File(p) = cam {
                fix(p);
            }
        }
        if let Some(j) = &mut self.serve.journal {
            fix(j);
        }
    }

    fn check(&self) -> std::result::Result<(), String> {
        if self.scene.is_empty() || self.scene.contains(['/', '\\']) {
            return Err(format!("scene name '{}' must be a plain file prefix", self.scene));
        }
        Ok(())
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(a) = o.alpha {
            self.solve.alpha = a;
        }
        if let Some(d) = o.d_fat {
            self.solve.d_fat = Some(d);
        }
        if let Some(e) = o.eps {
            self.envelope.eps = e;
        }
        if let Some(out) = &o.out {
            self.output = out.clone();
        }
    }
}
