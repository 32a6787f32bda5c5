//! Batch stages shared by the CLI and the session service: solve, extract,
//! fibers and render. Every artifact is a pure function of its inputs, so
//! repeated runs write identical bytes. Timings only go to the log.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use myovox_core::curves::{bone_surface, check_endpoints_on_bone, MuscleCurve};
use myovox_core::envelope::{
    extract_boundary_surface, extract_tissue_mesh, maximization_diagram_with_bone, EnvelopeOptions, LabeledTetMesh,
    TissueLabel,
};
use myovox_core::fibers::{solve_fiber_field, FiberField, FiberOptions};
use myovox_core::render::{Camera, Image, RenderOptions, Renderer};
use myovox_core::solver::{default_d_fat, FieldProblem, SolveParams, TissueFieldSet, FAT_ID};
use myovox_core::tetmesh::{BoneRemoval, TetMesh};
use myovox_core::Vec3;
use rayon::prelude::*;

use crate::config::{CameraSource, FieldFormat, SceneConfig, TableFormat};
use crate::error::{Error, Result, WithPath};
use crate::io;
use crate::manifest::{Manifest, OutputDir};

/// Environment variable capping worker threads.
pub const THREADS_ENV: &str = "MYOVOX_THREADS";

/// Run `f` on a pool sized by `MYOVOX_THREADS` (all cores when unset).
pub fn with_threads<R: Send>(f: impl FnOnce() -> R + Send) -> Result<R> {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(s) => s
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::Config(format!("{THREADS_ENV} must be a positive integer, got '{s}'")))?,
        Err(_) => 0,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// A loaded scene: the input mesh, its bone-free domain, and the curves.
#[derive(Debug, Clone)]
pub struct Model {
    pub scene: String,
    pub original: TetMesh,
    pub removal: BoneRemoval,
    pub curves: Vec<MuscleCurve>,
    pub params: SolveParams,
}

impl Model {
    /// Validate curves against the mesh. `d_fat` falls back to the default
    /// fraction of the mean tissue value.
    pub fn new(
        scene: &str,
        original: TetMesh,
        curves: Vec<MuscleCurve>,
        d_fat: Option<f64>,
        mut params: SolveParams,
    ) -> Result<Self> {
        let removal = original.remove_bone_tets()?;
        check_curves(&original, &curves)?;
        params.d_fat = d_fat.unwrap_or_else(|| default_d_fat(&curves));
        params.validate()?;
        Ok(Model { scene: scene.into(), original, removal, curves, params })
    }

    pub fn from_config(cfg: &SceneConfig) -> Result<Self> {
        let mesh = io::load_tetmesh(&cfg.mesh.node, &cfg.mesh.ele, cfg.mesh.tags.as_deref())?;
        let (curves, file_d_fat) = io::read_curves(&cfg.curves)?;
        let params = SolveParams {
            alpha: cfg.solve.alpha,
            d_fat: 0.0,
            exclude_open_boundary: cfg.solve.exclude_open_boundary,
            samples_per_span: cfg.solve.samples_per_span,
        };
        Model::new(&cfg.scene, mesh, curves, cfg.solve.d_fat.or(file_d_fat), params)
            .map_err(|e| in_file(e, &cfg.curves))
    }

    pub fn problem(&self) -> Result<FieldProblem> {
        Ok(FieldProblem::new(&self.removal.mesh, &self.curves, &self.params)?)
    }

    pub fn curve(&self, id: u32) -> Option<&MuscleCurve> {
        self.curves.iter().find(|c| c.id == id)
    }
}

/// Curve ids must be unique and both ends must sit on bone when the mesh
/// has any.
pub fn check_curves(original: &TetMesh, curves: &[MuscleCurve]) -> Result<()> {
    let mut seen = std::collections::BTreeSet::new();
    for c in curves {
        c.validate()?;
        if !seen.insert(c.id) {
            return Err(myovox_core::Error::InvalidInput(format!("duplicate curve id {}", c.id)).into());
        }
    }
    if original.bone_tet_ids().is_empty() {
        return Ok(());
    }
    let surface = bone_surface(original);
    for c in curves {
        check_endpoints_on_bone(original, &surface, c)?;
    }
    Ok(())
}

fn in_file(e: Error, path: &Path) -> Error {
    match e {
        Error::Core(source) if source.kind() == myovox_core::ErrorKind::Input => {
            Error::InFile { path: path.to_path_buf(), source }
        }
        other => other,
    }
}

/// Solve every tissue in parallel. Each tissue is an independent pure
/// solve, so the result does not depend on scheduling.
pub fn solve_fields(problem: &FieldProblem) -> Result<TissueFieldSet> {
    let fields: Vec<Vec<f64>> = (0..problem.num_tissues()).into_par_iter().map(|k| problem.solve_tissue(k)).collect();
    Ok(TissueFieldSet::new(problem.tissue_ids(), fields)?)
}

/// Settings for the artifact-writing stages.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputSettings {
    pub fields_format: FieldFormat,
    pub envelope: EnvelopeOptions,
    pub fibers: FiberOptions,
    pub fiber_format: TableFormat,
}

impl Default for OutputSettings {
    fn default() -> Self {
        OutputSettings {
            fields_format: FieldFormat::Bin,
            envelope: EnvelopeOptions::default(),
            fibers: FiberOptions::default(),
            fiber_format: TableFormat::Csv,
        }
    }
}

impl OutputSettings {
    pub fn from_config(cfg: &SceneConfig) -> Self {
        OutputSettings {
            fields_format: cfg.fields_format,
            envelope: EnvelopeOptions { eps: cfg.envelope.eps, prune: cfg.envelope.prune },
            fibers: FiberOptions {
                alpha: cfg.fibers.alpha,
                endpoint_radius: cfg.fibers.endpoint_radius,
                samples_per_span: cfg.solve.samples_per_span,
            },
            fiber_format: cfg.fibers.format,
        }
    }
}

/// Fields on the domain mesh, written in input-vertex numbering. Vertices
/// that only touch bone carry zero.
pub fn write_fields(out: &mut OutputDir, model: &Model, fields: &TissueFieldSet, format: FieldFormat) -> Result<()> {
    let lifted = fields.lift(&model.removal, 0.0);
    match format {
        FieldFormat::Bin => out.write(&format!("{}_fields.bin", model.scene), &io::fields_bin(&lifted)),
        FieldFormat::Json => out.write(&format!("{}_fields.json", model.scene), io::fields_json(&lifted).as_bytes()),
    }
}

pub fn extract(model: &Model, fields: &TissueFieldSet, opts: &EnvelopeOptions) -> Result<LabeledTetMesh> {
    let t = Instant::now();
    let labeled = maximization_diagram_with_bone(&model.original, &model.removal, fields, opts)?;
    log::info!(
        "envelope: {} -> {} tets, {} rounds, {:.3}s",
        labeled.stats.original_tets,
        labeled.stats.output_tets,
        labeled.stats.rounds,
        t.elapsed().as_secs_f64()
    );
    Ok(labeled)
}

/// Soft-tissue labels present in the diagram, in ascending id order.
pub fn tissue_labels(labeled: &LabeledTetMesh) -> Vec<u32> {
    labeled
        .label_set()
        .into_iter()
        .filter_map(|l| match l {
            TissueLabel::Tissue(id) => Some(id),
            TissueLabel::Bone => None,
        })
        .collect()
}

/// Per-tissue `.node/.ele/.obj/.off`.
pub fn write_meshes(out: &mut OutputDir, scene: &str, labeled: &LabeledTetMesh) -> Result<()> {
    for id in tissue_labels(labeled) {
        let tm = extract_tissue_mesh(labeled, TissueLabel::Tissue(id));
        let surface = extract_boundary_surface(&tm.vertices, &tm.tets)?;
        let stem = format!("{scene}_{id}");
        out.write(&format!("{stem}.node"), io::write_node(&tm.vertices).as_bytes())?;
        out.write(&format!("{stem}.ele"), io::write_ele(&tm.tets).as_bytes())?;
        out.write(&format!("{stem}.obj"), io::write_obj(&surface).as_bytes())?;
        out.write(&format!("{stem}.off"), io::write_off(&surface).as_bytes())?;
    }
    Ok(())
}

/// Fiber field of one muscle, with the tet centroids it is reported at.
#[derive(Debug, Clone)]
pub struct MuscleFibers {
    pub id: u32,
    pub centroids: Vec<Vec3>,
    pub field: FiberField,
}

/// Fiber fields for every muscle present in the diagram, solved in
/// parallel.
pub fn compute_fibers(model: &Model, labeled: &LabeledTetMesh, opts: &FiberOptions) -> Result<Vec<MuscleFibers>> {
    let ids: Vec<u32> = tissue_labels(labeled).into_iter().filter(|&id| id != FAT_ID).collect();
    ids.into_par_iter()
        .map(|id| {
            let curve = model
                .curve(id)
                .ok_or_else(|| Error::Core(myovox_core::Error::Internal(format!("no curve for tissue {id}"))))?;
            let mesh = extract_tissue_mesh(labeled, TissueLabel::Tissue(id)).to_tet_mesh()?;
            let field = solve_fiber_field(&mesh, curve, opts)?;
            if !field.filled.is_empty() {
                log::warn!("muscle {id}: {} tets took a neighbor's fiber direction", field.filled.len());
            }
            let centroids = (0..mesh.num_tets()).map(|t| mesh.tet_centroid(t)).collect();
            Ok(MuscleFibers { id, centroids, field })
        })
        .collect()
}

pub fn write_fibers(out: &mut OutputDir, scene: &str, fibers: &[MuscleFibers], format: TableFormat) -> Result<()> {
    for f in fibers {
        match format {
            TableFormat::Csv => out.write(
                &format!("{scene}_{}_fibers.csv", f.id),
                io::fibers_csv(&f.centroids, &f.field.directions).as_bytes(),
            )?,
            TableFormat::Json => out.write(
                &format!("{scene}_{}_fibers.json", f.id),
                io::fibers_json(&f.centroids, &f.field.directions).as_bytes(),
            )?,
        }
    }
    Ok(())
}

fn base_manifest(model: &Model, fields: &TissueFieldSet) -> Manifest {
    Manifest {
        scene: model.scene.clone(),
        tissue_ids: fields.tissue_ids().to_vec(),
        vertices: model.original.num_vertices(),
        tets: model.original.num_tets(),
        ..Manifest::default()
    }
}

/// Fields, per-tissue meshes, fibers and the manifest: the full set of
/// deliverables for a scene. Shared by `fibers` and session finalize.
pub fn finalize_artifacts(
    model: &Model,
    fields: &TissueFieldSet,
    settings: &OutputSettings,
    dir: &Path,
) -> Result<Manifest> {
    let mut out = OutputDir::new(dir);
    write_fields(&mut out, model, fields, settings.fields_format)?;
    let labeled = extract(model, fields, &settings.envelope)?;
    write_meshes(&mut out, &model.scene, &labeled)?;
    let fibers = compute_fibers(model, &labeled, &settings.fibers)?;
    write_fibers(&mut out, &model.scene, &fibers, settings.fiber_format)?;
    let mut manifest = base_manifest(model, fields);
    manifest.record_diagram(&labeled);
    out.finish(manifest)
}

fn timed_solve(model: &Model) -> Result<TissueFieldSet> {
    let t = Instant::now();
    let problem = model.problem()?;
    let fields = solve_fields(&problem)?;
    log::info!(
        "solve: {} tissues on {} vertices, {:.3}s",
        fields.num_tissues(),
        fields.num_vertices(),
        t.elapsed().as_secs_f64()
    );
    Ok(fields)
}

pub fn cmd_solve(cfg: &SceneConfig) -> Result<Manifest> {
    with_threads(|| {
        let model = Model::from_config(cfg)?;
        let fields = timed_solve(&model)?;
        let mut out = OutputDir::new(&cfg.output);
        write_fields(&mut out, &model, &fields, cfg.fields_format)?;
        out.finish(base_manifest(&model, &fields))
    })?
}

pub fn cmd_extract(cfg: &SceneConfig) -> Result<Manifest> {
    with_threads(|| {
        let model = Model::from_config(cfg)?;
        let settings = OutputSettings::from_config(cfg);
        let fields = timed_solve(&model)?;
        let mut out = OutputDir::new(&cfg.output);
        write_fields(&mut out, &model, &fields, settings.fields_format)?;
        let labeled = extract(&model, &fields, &settings.envelope)?;
        write_meshes(&mut out, &model.scene, &labeled)?;
        let mut manifest = base_manifest(&model, &fields);
        manifest.record_diagram(&labeled);
        out.finish(manifest)
    })?
}

pub fn cmd_fibers(cfg: &SceneConfig) -> Result<Manifest> {
    with_threads(|| {
        let model = Model::from_config(cfg)?;
        let fields = timed_solve(&model)?;
        finalize_artifacts(&model, &fields, &OutputSettings::from_config(cfg), &cfg.output)
    })?
}

/// Render options for a field set: palette colors, overridden per tissue id
/// by the optional color table.
pub fn render_options(fields: &TissueFieldSet, colors: &BTreeMap<u32, [u8; 3]>, march_step: f64) -> RenderOptions {
    let mut opts = RenderOptions::for_tissues(fields.num_tissues());
    for (k, id) in fields.tissue_ids().iter().enumerate() {
        if let Some(&c) = colors.get(id) {
            opts.colors[k] = c;
        }
    }
    opts.march_step = march_step;
    opts
}

/// Render with rows spread over the thread pool. Rows are independent, so
/// the image does not depend on the thread count.
pub fn render_parallel(renderer: &Renderer<'_>, camera: &Camera) -> Image {
    let chunks: Vec<(Vec<u8>, Vec<_>)> =
        (0..camera.height).into_par_iter().map(|y| renderer.render_rows(camera, y, y + 1)).collect();
    let mut rgba = Vec::with_capacity(camera.width as usize * camera.height as usize * 4);
    let mut hits = Vec::with_capacity(camera.width as usize * camera.height as usize);
    for (c, h) in chunks {
        rgba.extend(c);
        hits.extend(h);
    }
    Image { width: camera.width, height: camera.height, rgba, hits }
}

fn load_camera(src: &CameraSource) -> Result<Camera> {
    match src {
        CameraSource::File(p) => io::read_camera(p),
        CameraSource::Inline(c) => Ok(c.to_camera()?),
    }
}

pub fn cmd_render(cfg: &SceneConfig) -> Result<Manifest> {
    if cfg.render.cameras.is_empty() {
        return Err(Error::Config("render needs at least one camera".into()));
    }
    let cameras = cfg.render.cameras.iter().map(load_camera).collect::<Result<Vec<_>>>()?;
    let colors = match &cfg.render.colors {
        Some(p) => io::read_colors(p)?,
        None => BTreeMap::new(),
    };
    with_threads(|| {
        let model = Model::from_config(cfg)?;
        let fields = timed_solve(&model)?;
        let mut out = OutputDir::new(&cfg.output);
        write_fields(&mut out, &model, &fields, cfg.fields_format)?;
        let lifted = fields.lift(&model.removal, 0.0);
        let renderer = Renderer::new(&model.original, &lifted, render_options(&fields, &colors, cfg.render.march_step))?;
        for (i, cam) in cameras.iter().enumerate() {
            let t = Instant::now();
            let img = render_parallel(&renderer, cam);
            log::info!("view {i}: {}x{} in {:.3}s", img.width, img.height, t.elapsed().as_secs_f64());
            out.write(&format!("{}_view{i}.ppm", model.scene), &io::encode_ppm(&img))?;
            if cfg.render.png {
                out.write(&format!("{}_view{i}.png", model.scene), &io::encode_png(&img))?;
            }
        }
        out.finish(base_manifest(&model, &fields))
    })?
}

/// Write a scene's mesh, curves and config into `dir` so the batch tools
/// can run on it. Returns the config path.
pub fn write_scene(dir: &Path, scene: &str, mesh: &TetMesh, curves: &[MuscleCurve], d_fat: Option<f64>) -> Result<std::path::PathBuf> {
    std::fs::create_dir_all(dir).at(dir)?;
    let node = dir.join(format!("{scene}.node"));
    let ele = dir.join(format!("{scene}.ele"));
    let tags = dir.join(format!("{scene}_tags.json"));
    let curves_path = dir.join(format!("{scene}_curves.json"));
    io::write_file(&node, io::write_node(mesh.vertices()).as_bytes())?;
    io::write_file(&ele, io::write_ele(mesh.tets()).as_bytes())?;
    let tf = io::TagsFile::from(mesh.mesh_tags());
    io::write_file(&tags, crate::json::to_string(&tf).as_bytes())?;
    io::write_file(&curves_path, io::curves_to_json(curves, d_fat).as_bytes())?;
    let cfg = SceneConfig::new(
        scene,
        crate::config::MeshPaths {
            node: format!("{scene}.node").into(),
            ele: format!("{scene}.ele").into(),
            tags: Some(format!("{scene}_tags.json").into()),
        },
        format!("{scene}_curves.json").into(),
        "out".into(),
    );
    let path = dir.join(format!("{scene}.json"));
    io::write_file(&path, crate::json::to_string(&cfg).as_bytes())?;
    Ok(path)
}
