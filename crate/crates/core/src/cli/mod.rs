//! File-level harness behind the `turbo-amp` binary.
//!
//! * `synth`: image -> Gaussian measurements -> reconstructions, images, metrics;
//! * `reconstruct`: a stored measurement file -> reconstruction;
//! * `benchmark`: every PGM in a directory, one metrics row per image and method
//!   plus a mean row per method.
//!
//! The metrics CSV columns are `image_id,m,model,nmse_db,turbo_iters,
//! total_amp_iters,wall_time_s,seed`, with NMSE in dB to two decimals (empty
//! when no ground truth is known).

pub mod config;
pub mod pgm;

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::{info, warn};
use ndarray::{Array1, ArrayView2};
use rayon::prelude::*;
use serde::Serialize;

use crate::denoiser::SignalModel;
use crate::error::{Error, Result};
use crate::measurement::{MeasurementOperator, Observation, OperatorHeader};
use crate::turbo::{reconstruct, reconstruct_flat_bg, ReconstructionReport, TurboConfig};
use crate::wavelet::{build_tree_index, QuadTreeIndex};
use config::{model_name, ConfigFile};

/// Reconstruction method selectable from the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Turbo(SignalModel),
    /// Flat-prior BG-AMP baseline.
    FlatBg,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Turbo(m) => model_name(m),
            Method::FlatBg => "bg-amp",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "bg-amp" => Ok(Method::FlatBg),
            other => config::parse_model(other).map(Method::Turbo),
        }
    }
}

/// Everything a command needs, already validated by the caller's parser.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub input: PathBuf,
    pub m: usize,
    pub sigma2: f64,
    pub methods: Vec<Method>,
    pub seed: u64,
    pub config: ConfigFile,
    pub out: PathBuf,
    pub crop: bool,
    pub max_turbo: Option<usize>,
    pub max_amp: Option<usize>,
    pub trace: bool,
    /// Benchmark images in parallel.
    pub parallel: bool,
    /// Ground-truth image for `reconstruct`.
    pub truth: Option<PathBuf>,
}

impl ExperimentSpec {
    pub fn new(input: impl Into<PathBuf>, m: usize) -> Self {
        Self {
            input: input.into(),
            m,
            sigma2: 0.0,
            methods: vec![
                Method::Turbo(SignalModel::BernoulliGaussian),
                Method::Turbo(SignalModel::GaussianMixture),
            ],
            seed: 0,
            config: ConfigFile::default(),
            out: PathBuf::from("out"),
            crop: false,
            max_turbo: None,
            max_amp: None,
            trace: false,
            parallel: false,
            truth: None,
        }
    }

    fn turbo_config(&self, tree: &QuadTreeIndex, method: Method) -> Result<TurboConfig> {
        let mut cfg = self.config.turbo_config(tree)?;
        if let Method::Turbo(model) = method {
            cfg.model = model;
        }
        if let Some(t) = self.max_turbo {
            cfg.max_turbo = t;
        }
        if let Some(a) = self.max_amp {
            cfg.max_amp = a;
        }
        cfg.seed = self.seed;
        cfg.validate()?;
        Ok(cfg)
    }

    fn noise_seed(&self) -> u64 {
        self.seed ^ 0x6a09_e667_f3bc_c908
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsRow {
    pub image_id: String,
    pub m: usize,
    pub model: String,
    pub nmse_db: String,
    pub turbo_iters: usize,
    pub total_amp_iters: usize,
    pub wall_time_s: String,
    pub seed: u64,
}

impl MetricsRow {
    pub fn from_report(image_id: &str, m: usize, method: Method, seed: u64, r: &ReconstructionReport) -> Self {
        Self {
            image_id: image_id.to_string(),
            m,
            model: method.name().to_string(),
            nmse_db: r.nmse_db.map_or(String::new(), |v| format!("{v:.2}")),
            turbo_iters: r.turbo_iters,
            total_amp_iters: r.total_amp_iters(),
            wall_time_s: format!("{:.3}", r.wall_time_s),
            seed,
        }
    }
}

pub fn write_metrics(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct TraceRow {
    round: usize,
    amp_iters: usize,
    delta_mu: f64,
    c: f64,
    nmse_db: String,
    sigma2: f64,
    pi_root: f64,
    pi_approx: f64,
    pi11: String,
    pi00: String,
    level_variances: String,
    small_variances: String,
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(";")
}

pub fn write_trace(path: &Path, report: &ReconstructionReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for t in &report.trace {
        let p = &t.params;
        w.serialize(TraceRow {
            round: t.round,
            amp_iters: t.amp_iters,
            delta_mu: t.delta_mu,
            c: t.c,
            nmse_db: t.nmse_db.map_or(String::new(), |v| format!("{v:.4}")),
            sigma2: p.sigma2,
            pi_root: p.hmt.pi_root,
            pi_approx: p.hmt.pi_approx,
            pi11: join(&p.hmt.pi11),
            pi00: join(&p.hmt.pi00),
            level_variances: join(&p.level_variances),
            small_variances: join(&p.small_variances),
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Measurements with the information needed to regenerate the operator.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementFile {
    pub header: OperatorHeader,
    pub side: usize,
    pub observation: Observation,
}

impl MeasurementFile {
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut s = format!(
            "{}sigma2={}\nside={}\ny\n",
            self.header, self.observation.sigma2, self.side
        );
        for v in &self.observation.y {
            s.push_str(&format!("{v}\n"));
        }
        fs::write(path, s)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let bad = |reason: &str| Error::Config(format!("{}: {reason}", path.display()));
        let (head, body) = text.split_once("\ny\n").ok_or_else(|| bad("missing `y` section"))?;
        let mut op_lines = String::new();
        let (mut sigma2, mut side) = (None, None);
        for line in head.lines() {
            match line.split_once('=') {
                Some(("sigma2", v)) => sigma2 = v.trim().parse().ok(),
                Some(("side", v)) => side = v.trim().parse().ok(),
                _ => {
                    op_lines.push_str(line);
                    op_lines.push('\n');
                }
            }
        }
        let header: OperatorHeader = op_lines.parse()?;
        let y = body
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| l.trim().parse::<f64>().map_err(|_| bad("bad measurement value")))
            .collect::<Result<Vec<_>>>()?;
        if y.len() != header.m {
            return Err(bad("measurement count differs from header"));
        }
        Ok(Self {
            header,
            side: side.ok_or_else(|| bad("missing side"))?,
            observation: Observation {
                y: Array1::from(y),
                sigma2: sigma2.ok_or_else(|| bad("missing sigma2"))?,
            },
        })
    }
}

fn image_id(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| "image".into(), |s| s.to_string_lossy().into_owned())
}

fn run_method(
    obs: &Observation,
    op: &MeasurementOperator,
    tree: &QuadTreeIndex,
    spec: &ExperimentSpec,
    method: Method,
    truth: Option<ArrayView2<f64>>,
) -> Result<ReconstructionReport> {
    let cfg = spec.turbo_config(tree, method)?;
    match method {
        Method::Turbo(_) => reconstruct(obs, op, tree, &cfg, truth),
        Method::FlatBg => reconstruct_flat_bg(obs, op, tree, &cfg, truth),
    }
}

fn check_m(m: usize, n: usize) -> Result<()> {
    if m == 0 || m > n {
        return Err(Error::InvalidParameter(format!(
            "--m must be between 1 and the pixel count {n}, got {m}"
        )));
    }
    Ok(())
}

fn tree_for(side: usize, spec: &ExperimentSpec) -> Result<QuadTreeIndex> {
    let levels = spec.config.levels()?;
    build_tree_index(side, levels).map_err(|e| {
        Error::InvalidParameter(format!("{e}; choose fewer levels in the config (`levels = ...`)"))
    })
}

/// Reconstructs one image with every requested method using a shared operator.
fn run_image(
    image: ArrayView2<f64>,
    id: &str,
    op: &MeasurementOperator,
    spec: &ExperimentSpec,
    write_outputs: bool,
) -> Result<Vec<MetricsRow>> {
    let tree = tree_for(image.nrows(), spec)?;
    let obs = op.measure(image, spec.sigma2, spec.noise_seed())?;
    if write_outputs {
        MeasurementFile {
            header: op.header().expect("seeded operator"),
            side: image.nrows(),
            observation: obs.clone(),
        }
        .save(&spec.out.join(format!("{id}.meas")))?;
    }
    let mut rows = Vec::new();
    for &method in &spec.methods {
        let rep = run_method(&obs, op, &tree, spec, method, Some(image))?;
        info!("{id} [{method}]: NMSE {:.2} dB in {} rounds", rep.nmse_db.unwrap_or(f64::NAN), rep.turbo_iters);
        if write_outputs {
            pgm::save_image(rep.image_hat.view(), &spec.out.join(format!("{id}_{method}.pgm")))?;
            if spec.trace {
                write_trace(&spec.out.join(format!("{id}_{method}_trace.csv")), &rep)?;
            }
        }
        rows.push(MetricsRow::from_report(id, spec.m, method, spec.seed, &rep));
    }
    Ok(rows)
}

/// Measures one image and reconstructs it with each requested method, writing
/// `<id>.meas`, `<id>_<method>.pgm`, optional traces and `metrics.csv` to `out`.
pub fn cmd_synth(spec: &ExperimentSpec) -> Result<Vec<MetricsRow>> {
    let image = pgm::load_image(&spec.input, spec.crop)?;
    check_m(spec.m, image.len())?;
    fs::create_dir_all(&spec.out)?;
    let op = MeasurementOperator::gaussian(spec.m, image.len(), spec.seed)?;
    let rows = run_image(image.view(), &image_id(&spec.input), &op, spec, true)?;
    write_metrics(&spec.out.join("metrics.csv"), &rows)?;
    Ok(rows)
}

/// Reconstructs from a `.meas` file written by [`cmd_synth`].
pub fn cmd_reconstruct(spec: &ExperimentSpec) -> Result<Vec<MetricsRow>> {
    let meas = MeasurementFile::load(&spec.input)?;
    let op = meas.header.regenerate()?;
    if op.n() != meas.side * meas.side {
        return Err(Error::Config("operator size does not match image side".into()));
    }
    let truth = match &spec.truth {
        Some(p) => Some(pgm::load_image(p, spec.crop)?),
        None => None,
    };
    let tree = tree_for(meas.side, spec)?;
    fs::create_dir_all(&spec.out)?;
    let id = image_id(&spec.input);
    let mut rows = Vec::new();
    for &method in &spec.methods {
        let rep = run_method(&meas.observation, &op, &tree, spec, method, truth.as_ref().map(|t| t.view()))?;
        pgm::save_image(rep.image_hat.view(), &spec.out.join(format!("{id}_{method}.pgm")))?;
        if spec.trace {
            write_trace(&spec.out.join(format!("{id}_{method}_trace.csv")), &rep)?;
        }
        rows.push(MetricsRow::from_report(&id, meas.header.m, method, meas.header.seed, &rep));
    }
    write_metrics(&spec.out.join("metrics.csv"), &rows)?;
    Ok(rows)
}

/// Runs every `.pgm` in `spec.input` (sorted by name) and writes
/// `benchmark.csv`: per-image rows grouped by method, each group followed by a
/// `mean` row.
pub fn cmd_benchmark(spec: &ExperimentSpec) -> Result<Vec<MetricsRow>> {
    let mut files: Vec<PathBuf> = fs::read_dir(&spec.input)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("pgm")))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "no .pgm images in {}",
            spec.input.display()
        )));
    }
    let images: Vec<(String, ndarray::Array2<f64>)> = files
        .iter()
        .filter_map(|p| match pgm::load_image(p, spec.crop) {
            Ok(img) => Some((image_id(p), img)),
            Err(e) => {
                warn!("skipping {}: {e}", p.display());
                None
            }
        })
        .collect();
    if images.is_empty() {
        return Err(Error::InvalidParameter("no readable images".into()));
    }

    // one operator per image size, shared across images
    let mut ops = BTreeMap::new();
    for (_, img) in &images {
        let n = img.len();
        if let std::collections::btree_map::Entry::Vacant(e) = ops.entry(n) {
            check_m(spec.m, n)?;
            e.insert(MeasurementOperator::gaussian(spec.m, n, spec.seed)?);
        }
    }
    let run = |(id, img): &(String, ndarray::Array2<f64>)| {
        run_image(img.view(), id, &ops[&img.len()], spec, false).map_err(|e| {
            warn!("{id} failed: {e}");
            e
        })
    };
    let results: Vec<Result<Vec<MetricsRow>>> = if spec.parallel {
        images.par_iter().map(run).collect()
    } else {
        images.iter().map(run).collect()
    };
    let ok: Vec<Vec<MetricsRow>> = results.into_iter().filter_map(|r| r.ok()).collect();
    if ok.is_empty() {
        return Err(Error::InvalidParameter("every image failed".into()));
    }

    let mut rows = Vec::new();
    for (k, &method) in spec.methods.iter().enumerate() {
        let group: Vec<MetricsRow> = ok.iter().map(|r| r[k].clone()).collect();
        let summary = summary_row(&group, spec, method);
        rows.extend(group);
        rows.push(summary);
    }
    fs::create_dir_all(&spec.out)?;
    write_metrics(&spec.out.join("benchmark.csv"), &rows)?;
    Ok(rows)
}

fn summary_row(group: &[MetricsRow], spec: &ExperimentSpec, method: Method) -> MetricsRow {
    let count = group.len() as f64;
    let mean = |f: &dyn Fn(&MetricsRow) -> f64| group.iter().map(f).sum::<f64>() / count;
    let nmse = mean(&|r| r.nmse_db.parse().unwrap_or(f64::NAN));
    MetricsRow {
        image_id: "mean".into(),
        m: spec.m,
        model: method.name().into(),
        nmse_db: format!("{nmse:.2}"),
        turbo_iters: (mean(&|r| r.turbo_iters as f64)).round() as usize,
        total_amp_iters: (mean(&|r| r.total_amp_iters as f64)).round() as usize,
        wall_time_s: format!("{:.3}", mean(&|r| r.wall_time_s.parse().unwrap_or(0.0))),
        seed: spec.seed,
    }
}
