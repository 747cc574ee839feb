//! End-to-end restoration tasks: synthesize (or load) a degraded
//! observation, run the ADMM solver and write the artifacts.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::ValueEnum;

use crate::admm::{restore_with, AdmmConfig, TraceRecord, DEFAULT_GRAD_STEPS, DEFAULT_TOL};
use crate::degradation::{
    adaptive_median_filter, add_gaussian_noise, add_salt_pepper, load_mask, make_random_mask, parse_kernel_spec,
    BlockCsOperator, BlurOperator, DegradationOp, MaskOperator, DEFAULT_CS_BLOCK,
};
use crate::denoiser::DEFAULT_INNER_ITERS;
use crate::error::{RestoreError, Result};
use crate::imaging::{load_image, psnr, save_image, Image, Manifest};
use crate::params::{canonical_p, ParamTables, TableKey};
use crate::patch_groups::GroupGeometry;
use crate::shrinkage::{RelaxationSpec, DEFAULT_EPSILON};

pub const DEFAULT_GROUP_SIZE: usize = 60;
pub const DEFAULT_SEARCH_WINDOW: usize = 20;
pub const DEFAULT_AMF_WINDOW: usize = 39;
pub const DEFAULT_BLUR_SIGMA: f64 = std::f64::consts::SQRT_2;
pub const DEFAULT_DENOISE_SIGMA: f64 = 20.0;
pub const DEFAULT_TEXT_MASK: &str = "text_mask";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, ValueEnum)]
pub enum TaskKind {
    /// Block compressive sensing reconstruction.
    Cs,
    /// Random missing-pixel inpainting.
    Inpaint,
    /// Inpainting under a text overlay mask.
    #[value(name = "textremove")]
    TextRemove,
    /// Deblurring with additive Gaussian noise.
    Deblur,
    /// Salt-and-pepper noise removal.
    Spn,
    /// Gaussian denoising.
    Denoise,
}

impl TaskKind {
    pub const ALL: [TaskKind; 6] = [
        TaskKind::Cs,
        TaskKind::Inpaint,
        TaskKind::TextRemove,
        TaskKind::Deblur,
        TaskKind::Spn,
        TaskKind::Denoise,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Cs => "cs",
            Self::Inpaint => "inpaint",
            Self::TextRemove => "textremove",
            Self::Deblur => "deblur",
            Self::Spn => "spn",
            Self::Denoise => "denoise",
        }
    }

    pub fn default_patch_side(self) -> usize {
        match self {
            Self::Cs => 6,
            Self::TextRemove => 10,
            _ => 8,
        }
    }

    pub fn default_max_iters(self) -> usize {
        match self {
            Self::Inpaint | Self::TextRemove | Self::Spn => 200,
            Self::Cs | Self::Deblur | Self::Denoise => 100,
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Everything a task run needs. `None` fields take the task defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskConfig {
    pub task: TaskKind,
    /// Clean image: a file path or a manifest name. Used as the PSNR
    /// reference; optional when `degraded` is given.
    pub input: Option<String>,
    pub degraded: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub trace: Option<PathBuf>,
    pub report: Option<PathBuf>,
    /// Where to write the degraded baseline image.
    pub save_degraded: Option<PathBuf>,
    pub p: f64,
    pub subrate: Option<f64>,
    pub missing: Option<f64>,
    pub mask: Option<String>,
    pub kernel: Option<String>,
    pub density: Option<f64>,
    pub sigma: Option<f64>,
    pub mu: Option<f64>,
    pub lambda: Option<f64>,
    pub group_size: Option<usize>,
    pub patch_side: Option<usize>,
    pub stride: Option<usize>,
    pub search_window: Option<usize>,
    pub iters: Option<usize>,
    pub inner_iters: Option<usize>,
    pub grad_steps: Option<usize>,
    pub tol: Option<f64>,
    pub seed: u64,
    pub threads: Option<usize>,
}

impl TaskConfig {
    pub fn new(task: TaskKind, input: impl Into<String>) -> Self {
        Self {
            task,
            input: Some(input.into()),
            degraded: None,
            output: None,
            trace: None,
            report: None,
            save_degraded: None,
            p: 0.5,
            subrate: None,
            missing: None,
            mask: None,
            kernel: None,
            density: None,
            sigma: None,
            mu: None,
            lambda: None,
            group_size: None,
            patch_side: None,
            stride: None,
            search_window: None,
            iters: None,
            inner_iters: None,
            grad_steps: None,
            tol: None,
            seed: 0,
            threads: None,
        }
    }
}

/// A degraded observation ready for the solver.
#[derive(Debug, Clone)]
pub struct PreparedTask {
    pub reference: Option<Image>,
    pub observation: Image,
    pub op: DegradationOp,
    /// The naive estimate the restoration is compared against.
    pub baseline: Image,
    pub config: AdmmConfig,
    /// Human-readable task parameter, e.g. `density=0.3`.
    pub param_label: String,
    pub used_nearest_defaults: bool,
}

#[derive(Debug, Clone)]
pub struct TaskReport {
    pub task: TaskKind,
    pub p: f64,
    pub param_label: String,
    pub mu: f64,
    pub lambda: f64,
    pub tau: f64,
    pub psnr_in: Option<f64>,
    pub psnr_out: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub seconds: f64,
    pub trace: Vec<TraceRecord>,
    pub restored: Image,
    pub baseline: Image,
}

impl TaskReport {
    /// `task, p, param, psnr_in, psnr_out, iters, seconds`
    pub fn summary_line(&self) -> String {
        format!(
            "{}, {}, {}, {}, {}, {}, {:.1}",
            self.task,
            format_p(self.p),
            self.param_label,
            format_psnr(self.psnr_in),
            format_psnr(self.psnr_out),
            self.iterations,
            self.seconds
        )
    }
}

fn format_p(p: f64) -> String {
    if p == 2.0 / 3.0 {
        "0.6667".into()
    } else {
        format!("{}", p)
    }
}

fn format_psnr(v: Option<f64>) -> String {
    match v {
        Some(v) if v.is_infinite() => "inf".into(),
        Some(v) => format!("{:.2}", v),
        None => "-".into(),
    }
}

/// Resolve a path or a manifest name to an image.
pub fn resolve_image(spec: &str) -> Result<Image> {
    let path = Path::new(spec);
    if path.exists() {
        return load_image(path);
    }
    Manifest::load_default()?.load_image(spec)
}

fn resolve_mask(spec: &str) -> Result<ndarray::Array2<bool>> {
    let path = Path::new(spec);
    if path.exists() {
        return load_mask(path);
    }
    let manifest = Manifest::load_default()?;
    let entry = manifest
        .entry(spec)
        .ok_or_else(|| RestoreError::Manifest(format!("no mask file or manifest entry '{}'", spec)))?;
    load_mask(&manifest.path_of(entry))
}

fn relaxation_for(p: f64) -> Result<RelaxationSpec> {
    let p = canonical_p(p);
    if p == 1.0 {
        Ok(RelaxationSpec::nuclear())
    } else {
        RelaxationSpec::schatten(p)
    }
}

fn kernel_family(spec: &str) -> String {
    spec.trim()
        .to_ascii_lowercase()
        .chars()
        .take_while(|c| c.is_ascii_alphabetic())
        .collect()
}

fn check_fraction(name: &str, v: f64, lo_inclusive: bool) -> Result<()> {
    let ok = v.is_finite() && v < 1.0 + f64::EPSILON && if lo_inclusive { v >= 0.0 } else { v > 0.0 };
    if ok {
        Ok(())
    } else {
        Err(RestoreError::InvalidParameter(format!("{} = {} is out of range", name, v)))
    }
}

/// Build the observation, operator and solver settings for a task.
pub fn prepare_task(cfg: &TaskConfig) -> Result<PreparedTask> {
    let task = cfg.task;
    let mut reference = cfg.input.as_deref().map(resolve_image).transpose()?;
    if task == TaskKind::Cs {
        reference = reference.map(|r| r.to_gray());
    }
    let degraded = cfg.degraded.as_deref().map(load_image).transpose()?;
    if reference.is_none() && degraded.is_none() {
        return Err(RestoreError::InvalidParameter("either an input or a degraded image is required".into()));
    }
    let shape_src = reference.as_ref().or(degraded.as_ref()).expect("one image present");
    let (h, w) = (shape_src.height(), shape_src.width());
    if let (Some(r), Some(d)) = (&reference, &degraded) {
        r.check_same_shape(d)?;
    }
    let clean = || {
        reference
            .clone()
            .ok_or_else(|| RestoreError::InvalidParameter("this task needs the clean input to synthesize a degradation".into()))
    };

    let (key, param_label, observation, op, baseline) = match task {
        TaskKind::Cs => {
            if degraded.is_some() {
                return Err(RestoreError::InvalidParameter(
                    "block CS measurements cannot be loaded from an image; omit --degraded".into(),
                ));
            }
            let subrate = cfg.subrate.unwrap_or(0.3);
            check_fraction("subrate", subrate, false)?;
            let cs = BlockCsOperator::new(h, w, DEFAULT_CS_BLOCK, subrate, cfg.seed)?;
            let op = DegradationOp::BlockCs(cs);
            let b = op.apply(&clean()?)?;
            let baseline = op.adjoint(&b)?;
            (TableKey::Value(subrate), format!("subrate={}", subrate), b, op, baseline)
        }
        TaskKind::Inpaint | TaskKind::TextRemove => {
            let (mask, key, label) = if task == TaskKind::Inpaint && cfg.mask.is_none() {
                let missing = cfg.missing.unwrap_or(0.5);
                check_fraction("missing fraction", missing, true)?;
                (
                    make_random_mask(h, w, missing, cfg.seed)?,
                    TableKey::Value(missing),
                    format!("missing={}", missing),
                )
            } else {
                let spec = cfg.mask.as_deref().unwrap_or(DEFAULT_TEXT_MASK);
                let mask = resolve_mask(spec)?;
                let missing = mask.iter().filter(|&&m| !m).count() as f64 / mask.len() as f64;
                let key = if task == TaskKind::TextRemove {
                    TableKey::Name("text".into())
                } else {
                    TableKey::Value(missing)
                };
                (mask, key, format!("mask={}", spec))
            };
            if mask.dim() != (h, w) {
                return Err(RestoreError::ShapeMismatch {
                    expected: (h, w, 1),
                    actual: (mask.nrows(), mask.ncols(), 1),
                });
            }
            let op = DegradationOp::Mask(MaskOperator::new(mask));
            let b = match &degraded {
                Some(d) => op.apply(d)?,
                None => op.apply(&clean()?)?,
            };
            (key, label, b.clone(), op, b)
        }
        TaskKind::Deblur => {
            let kernel_spec = cfg.kernel.clone().unwrap_or_else(|| "uniform9".into());
            let kernel = parse_kernel_spec(&kernel_spec)?;
            let op = DegradationOp::Blur(BlurOperator::new(kernel, h, w)?);
            let sigma = cfg.sigma.unwrap_or(DEFAULT_BLUR_SIGMA);
            let b = match &degraded {
                Some(d) => d.clone(),
                None => add_gaussian_noise(&op.apply(&clean()?)?, sigma, cfg.seed)?,
            };
            let family = kernel_family(&kernel_spec);
            let family = if family == "box" { "uniform".to_string() } else { family };
            (TableKey::Name(family), format!("kernel={}", kernel_spec), b.clone(), op, b)
        }
        TaskKind::Spn => {
            let density = cfg.density.unwrap_or(0.3);
            check_fraction("density", density, true)?;
            let noisy = match &degraded {
                Some(d) => d.clone(),
                None => add_salt_pepper(&clean()?, density, cfg.seed)?,
            };
            let (filtered, masks) = adaptive_median_filter(&noisy, DEFAULT_AMF_WINDOW)?;
            let op = DegradationOp::Mask(MaskOperator::per_channel(masks)?);
            let b = op.apply(&noisy)?;
            (TableKey::Value(density), format!("density={}", density), b, op, filtered)
        }
        TaskKind::Denoise => {
            let sigma = cfg.sigma.unwrap_or(DEFAULT_DENOISE_SIGMA);
            let op = DegradationOp::Mask(MaskOperator::new(ndarray::Array2::from_elem((h, w), true)));
            let b = match &degraded {
                Some(d) => d.clone(),
                None => add_gaussian_noise(&clean()?, sigma, cfg.seed)?,
            };
            (TableKey::Name("gaussian".into()), format!("sigma={}", sigma), b.clone(), op, b)
        }
    };

    let defaults = ParamTables::builtin().lookup(task, &key, cfg.p)?;
    let patch_side = cfg.patch_side.unwrap_or(task.default_patch_side());
    let geom = GroupGeometry::new(
        patch_side,
        cfg.group_size.unwrap_or(DEFAULT_GROUP_SIZE),
        cfg.search_window.unwrap_or(DEFAULT_SEARCH_WINDOW),
        cfg.stride.unwrap_or(GroupGeometry::default_stride(patch_side)),
    )?;
    let mut spec = relaxation_for(cfg.p)?;
    spec.epsilon = DEFAULT_EPSILON;
    let mut config = AdmmConfig::new(
        cfg.mu.unwrap_or(defaults.mu),
        cfg.lambda.unwrap_or(defaults.lambda),
        cfg.iters.unwrap_or(task.default_max_iters()),
        geom,
        spec,
    );
    config.tol = cfg.tol.unwrap_or(DEFAULT_TOL);
    config.inner_iters = cfg.inner_iters.unwrap_or(DEFAULT_INNER_ITERS);
    config.grad_steps_per_outer = cfg.grad_steps.unwrap_or(DEFAULT_GRAD_STEPS);
    config.validate()?;

    Ok(PreparedTask {
        reference,
        observation,
        op,
        baseline: baseline.clamped(),
        config,
        param_label,
        used_nearest_defaults: defaults.nearest,
    })
}

/// Run the solver on a prepared task. `on_iteration` sees every trace
/// record as it is produced.
pub fn execute_task<F>(task: TaskKind, p: f64, prepared: &PreparedTask, on_iteration: F) -> Result<TaskReport>
where
    F: FnMut(&TraceRecord),
{
    let start = Instant::now();
    let reference = prepared.reference.as_ref();
    let out = restore_with(&prepared.observation, &prepared.op, &prepared.config, reference, on_iteration)?;
    let seconds = start.elapsed().as_secs_f64();
    let (h, w) = prepared.op.image_dim();
    let tau = prepared.config.denoiser_params(h, w)?.tau;
    let psnr_in = reference.map(|r| psnr(&prepared.baseline.quantized(), r)).transpose()?;
    let psnr_out = reference.map(|r| psnr(&out.image.quantized(), r)).transpose()?;
    Ok(TaskReport {
        task,
        p: canonical_p(p),
        param_label: prepared.param_label.clone(),
        mu: prepared.config.mu,
        lambda: prepared.config.lambda,
        tau,
        psnr_in,
        psnr_out,
        iterations: out.iterations,
        converged: out.converged,
        seconds,
        trace: out.trace,
        restored: out.image,
        baseline: prepared.baseline.clone(),
    })
}

/// Tab-separated trace: one row per outer iteration.
pub fn format_trace(trace: &[TraceRecord]) -> String {
    let mut s = String::from("iteration\trelative_change\tobjective\tpsnr\n");
    for t in trace {
        let psnr = t.psnr.map_or_else(|| "-".to_string(), |v| format!("{:.6}", v));
        s.push_str(&format!("{}\t{:.9e}\t{:.9e}\t{}\n", t.iteration, t.relative_change, t.objective, psnr));
    }
    s
}

/// Tab-separated `key value` run report.
pub fn format_report(report: &TaskReport, prepared: &PreparedTask) -> String {
    let c = &prepared.config;
    let rows: Vec<(&str, String)> = vec![
        ("task", report.task.to_string()),
        ("p", format_p(report.p)),
        ("param", report.param_label.clone()),
        ("mu", format!("{}", report.mu)),
        ("lambda", format!("{}", report.lambda)),
        ("tau", format!("{}", report.tau)),
        ("patch_side", c.geom.patch_side.to_string()),
        ("group_size", c.geom.group_size.to_string()),
        ("search_window", c.geom.search_window.to_string()),
        ("stride", c.geom.stride.to_string()),
        ("max_iters", c.max_outer_iters.to_string()),
        ("tol", format!("{}", c.tol)),
        ("iterations", report.iterations.to_string()),
        ("converged", report.converged.to_string()),
        ("psnr_in", format_psnr(report.psnr_in)),
        ("psnr_out", format_psnr(report.psnr_out)),
        ("seconds", format!("{:.3}", report.seconds)),
    ];
    rows.into_iter().map(|(k, v)| format!("{}\t{}\n", k, v)).collect()
}

fn default_stem(cfg: &TaskConfig) -> String {
    let base = cfg
        .input
        .as_deref()
        .map(PathBuf::from)
        .or_else(|| cfg.degraded.clone())
        .and_then(|p| p.file_stem().map(|s| s.to_string_lossy().into_owned()))
        .unwrap_or_else(|| "image".into());
    format!("{}_{}", base, cfg.task)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(text.as_bytes())?;
    Ok(())
}

/// Full task: prepare, restore, write the restored image, trace and
/// report. Paths default to `<input>_<task>.png`, `.trace.tsv` and
/// `.report.tsv` in the working directory.
pub fn run_task(cfg: &TaskConfig) -> Result<TaskReport> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads.unwrap_or(0))
        .build()
        .map_err(|e| RestoreError::InvalidParameter(e.to_string()))?;
    pool.install(|| {
        let prepared = prepare_task(cfg)?;
        if let Some(path) = &cfg.save_degraded {
            save_image(&prepared.baseline, path)?;
        }
        let report = execute_task(cfg.task, cfg.p, &prepared, |_| {})?;
        let stem = default_stem(cfg);
        let output = cfg.output.clone().unwrap_or_else(|| PathBuf::from(format!("{}.png", stem)));
        save_image(&report.restored, &output)?;
        let trace = cfg
            .trace
            .clone()
            .unwrap_or_else(|| output.with_extension("trace.tsv"));
        write_text(&trace, &format_trace(&report.trace))?;
        let report_path = cfg
            .report
            .clone()
            .unwrap_or_else(|| output.with_extension("report.tsv"));
        write_text(&report_path, &format_report(&report, &prepared))?;
        Ok(report)
    })
}
