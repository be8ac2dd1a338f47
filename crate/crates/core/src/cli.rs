//! Run configuration and the pipelines behind the command-line tool.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::basis::{build_samplet_basis_with, BasisOptions, SampletBasis};
use crate::cluster_tree::{build_cluster_tree, PointCloud};
use crate::compression::container::write_compressed;
use crate::compression::{compress_assemble, compression_error_report, CompressedKernelMatrix};
use crate::error::{Error, Result};
use crate::io::{read_coefficients, read_points, write_coefficients, write_points, write_table, Format};
use crate::kernel::KernelSpec;
use crate::moments::default_leaf_size;
use crate::signal::{coarsen_tree, compression_report, energies, entropy_subsample, CoarsenedTree};
use crate::solvers::{solve_interpolation, solve_pursuit, InterpolationProblem, LinearOperator, PursuitProblem};
use crate::transform::{forward_transform, inverse_transform, CoefficientVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Transform,
    Inverse,
    Compress,
    Coarsen,
    Subsample,
    Assemble,
    Interpolate,
    Pursue,
    Report,
}

fn default_q() -> usize {
    3
}
fn default_eta() -> f64 {
    1.25
}
fn default_interp_degree() -> usize {
    6
}
fn default_mu() -> f64 {
    1e-8
}
fn default_epsilon() -> f64 {
    1e-2
}
fn default_thresholds() -> Vec<f64> {
    vec![1e-2, 1e-3, 1e-4, 1e-5]
}
fn default_qs() -> Vec<usize> {
    vec![1, 2, 3]
}
fn default_weight() -> f64 {
    1e-6
}

/// Everything one pipeline run needs. Loaded from TOML or built from
/// command-line flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub command: Command,
    /// Point file, or the coefficient file for `inverse`.
    pub input: PathBuf,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Point file for `inverse`.
    #[serde(default)]
    pub points: Option<PathBuf>,
    /// Report CSV for commands whose main output is data.
    #[serde(default)]
    pub report: Option<PathBuf>,
    /// Index list written by `subsample`.
    #[serde(default)]
    pub indices: Option<PathBuf>,
    #[serde(default)]
    pub format: Option<Format>,
    #[serde(default = "default_q")]
    pub q: usize,
    #[serde(default)]
    pub leaf_size: Option<usize>,
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default = "default_interp_degree")]
    pub interp_degree: usize,
    #[serde(default = "default_mu")]
    pub mu: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_thresholds")]
    pub thresholds: Vec<f64>,
    #[serde(default = "default_qs")]
    pub qs: Vec<usize>,
    #[serde(default)]
    pub kernels: Vec<String>,
    /// Uniform l1 weight for `pursue`.
    #[serde(default = "default_weight")]
    pub weight: f64,
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub max_iter: Option<usize>,
    /// Number of points drawn by `subsample`.
    #[serde(default)]
    pub samples: Option<usize>,
    /// Use the tree truncated at this level instead of energy coarsening.
    #[serde(default)]
    pub level: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub rescale_unit_box: bool,
}

impl RunSpec {
    pub fn new(command: Command, input: impl Into<PathBuf>) -> Self {
        Self {
            command,
            input: input.into(),
            output: None,
            points: None,
            report: None,
            indices: None,
            format: None,
            q: default_q(),
            leaf_size: None,
            eta: default_eta(),
            interp_degree: default_interp_degree(),
            mu: default_mu(),
            epsilon: default_epsilon(),
            thresholds: default_thresholds(),
            qs: default_qs(),
            kernels: Vec::new(),
            weight: default_weight(),
            gamma: None,
            tol: None,
            max_iter: None,
            samples: None,
            level: None,
            seed: 0,
            threads: None,
            rescale_unit_box: false,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidParameter(format!("config: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.q > 12 {
            return bad(format!("q = {} is out of range 0..=12", self.q));
        }
        if self.leaf_size == Some(0) {
            return bad("leaf_size must be at least 1".into());
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return bad(format!("eta must be positive, got {}", self.eta));
        }
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return bad(format!("mu must be nonnegative, got {}", self.mu));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return bad(format!("epsilon must lie in (0, 1), got {}", self.epsilon));
        }
        if self.thresholds.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
            return bad("thresholds must be nonnegative".into());
        }
        if !(self.weight >= 0.0 && self.weight.is_finite()) {
            return bad(format!("weight must be nonnegative, got {}", self.weight));
        }
        if let Some(g) = self.gamma {
            if !(g > 0.0) {
                return bad(format!("gamma must be positive, got {g}"));
            }
        }
        if let Some(t) = self.tol {
            if !(t > 0.0) {
                return bad(format!("tol must be positive, got {t}"));
            }
        }
        if self.samples == Some(0) {
            return bad("samples must be positive".into());
        }
        if self.threads == Some(0) {
            return bad("threads must be positive".into());
        }
        if self.qs.iter().any(|q| *q > 12) {
            return bad("qs entries must lie in 0..=12".into());
        }
        for k in &self.kernels {
            k.parse::<KernelSpec>()?;
        }
        let needs_kernel = matches!(
            self.command,
            Command::Assemble | Command::Interpolate | Command::Pursue | Command::Report
        );
        if needs_kernel && self.kernels.is_empty() {
            return bad(format!("{:?} needs a kernel", self.command));
        }
        if needs_kernel && self.command != Command::Pursue && self.kernels.len() != 1 {
            return bad(format!("{:?} takes exactly one kernel", self.command));
        }
        let needs_output = matches!(
            self.command,
            Command::Transform | Command::Inverse | Command::Subsample | Command::Assemble
        );
        if needs_output && self.output.is_none() {
            return bad(format!("{:?} needs an output path", self.command));
        }
        if self.command == Command::Inverse && self.points.is_none() {
            return bad("inverse needs the point file".into());
        }
        if self.command == Command::Subsample && self.samples.is_none() {
            return bad("subsample needs the number of samples".into());
        }
        Ok(())
    }
}

/// Exit status for a finished run.
pub fn exit_code(result: &Result<()>) -> i32 {
    match result {
        Ok(()) => 0,
        Err(Error::NotConverged { .. }) => 3,
        Err(_) => 2,
    }
}

/// Translation and uniform scale mapping the bounding box into `[0, 1]^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineMap {
    pub offset: Vec<f64>,
    pub scale: f64,
}

impl AffineMap {
    pub fn unit_box(cloud: &PointCloud) -> Self {
        let bbox = cloud.bounding_box();
        let extent = (0..cloud.dim()).map(|a| bbox.extent(a)).fold(0.0, f64::max);
        Self {
            offset: bbox.min.clone(),
            scale: if extent > 0.0 { 1.0 / extent } else { 1.0 },
        }
    }

    pub fn apply(&self, cloud: &PointCloud) -> Result<PointCloud> {
        let d = cloud.dim();
        let coords = cloud
            .coords()
            .iter()
            .enumerate()
            .map(|(i, x)| (x - self.offset[i % d]) * self.scale)
            .collect();
        let out = PointCloud::new(d, coords)?;
        match cloud.values() {
            Some(v) => out.with_values(v.to_vec()),
            None => Ok(out),
        }
    }
}

/// Runs one pipeline on a dedicated thread pool.
pub fn run(spec: &RunSpec) -> Result<()> {
    spec.validate()?;
    log::info!("run spec: {}", serde_json::to_string(spec).unwrap_or_default());
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = spec.threads {
        builder = builder.num_threads(t);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    pool.install(|| execute(spec))
}

fn execute(spec: &RunSpec) -> Result<()> {
    let start = Instant::now();
    let result = match spec.command {
        Command::Transform => transform(spec),
        Command::Inverse => inverse(spec),
        Command::Compress => compress(spec),
        Command::Coarsen => coarsen(spec),
        Command::Subsample => subsample(spec),
        Command::Assemble => assemble(spec),
        Command::Interpolate => interpolate(spec),
        Command::Pursue => pursue(spec),
        Command::Report => report(spec),
    };
    log::info!("{:?} finished in {:.3?}", spec.command, start.elapsed());
    result
}

fn format_of(spec: &RunSpec, path: &Path) -> Format {
    spec.format.unwrap_or_else(|| Format::from_path(path))
}

fn load_cloud(spec: &RunSpec, path: &Path) -> Result<PointCloud> {
    let cloud = read_points(path, format_of(spec, path))?;
    log::info!(
        "read {} points in dimension {} from {}",
        cloud.len(),
        cloud.dim(),
        path.display()
    );
    if !spec.rescale_unit_box {
        return Ok(cloud);
    }
    let map = AffineMap::unit_box(&cloud);
    log::info!(
        "rescaling to the unit box: offset {:?}, scale {}",
        map.offset,
        map.scale
    );
    if let Some(out) = &spec.output {
        let mut p = out.as_os_str().to_owned();
        p.push(".rescale.json");
        let text = serde_json::to_string_pretty(&map).map_err(|e| Error::Format(e.to_string()))?;
        let p = PathBuf::from(p);
        std::fs::write(&p, text).map_err(|e| Error::file(&p, e))?;
    }
    map.apply(&cloud)
}

fn require_values(cloud: &PointCloud) -> Result<&[f64]> {
    cloud
        .values()
        .ok_or_else(|| Error::InvalidParameter("the point file has no value column".into()))
}

fn basis_for(spec: &RunSpec, cloud: &PointCloud) -> Result<SampletBasis> {
    let leaf = spec.leaf_size.unwrap_or_else(|| default_leaf_size(cloud.dim(), spec.q));
    let tree = build_cluster_tree(cloud, leaf)?;
    log::info!("cluster tree: {} clusters, depth {}", tree.num_clusters(), tree.depth());
    Ok(build_samplet_basis_with(tree, BasisOptions::new(spec.q)))
}

fn kernels(spec: &RunSpec) -> Result<Vec<KernelSpec>> {
    spec.kernels.iter().map(|k| k.parse()).collect()
}

fn assemble_matrix(spec: &RunSpec, basis: &SampletBasis, kernel: &KernelSpec) -> Result<CompressedKernelMatrix> {
    let start = Instant::now();
    let m = compress_assemble(basis, kernel, spec.eta, spec.interp_degree)?;
    log::info!(
        "compressed {kernel}: {} blocks, {} nonzeros in {:.3?}",
        m.blocks().len(),
        m.nnz(),
        start.elapsed()
    );
    Ok(m)
}

/// Writes a table to `path`, or to stdout when no path is given.
fn emit_table(path: Option<&Path>, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    match path {
        Some(p) => write_table(
            std::io::BufWriter::new(std::fs::File::create(p).map_err(|e| Error::file(p, e))?),
            header,
            rows,
        ),
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            write_table(&mut lock, header, rows)?;
            lock.flush()?;
            Ok(())
        }
    }
}

fn output(spec: &RunSpec) -> &Path {
    spec.output.as_deref().expect("validated")
}

fn transform(spec: &RunSpec) -> Result<()> {
    let cloud = load_cloud(spec, &spec.input)?;
    let values = require_values(&cloud)?;
    let basis = basis_for(spec, &cloud)?;
    let coeffs = forward_transform(&basis, values)?;
    write_coefficients(output(spec), &basis, &coeffs)
}

fn inverse(spec: &RunSpec) -> Result<()> {
    let (values, side) = read_coefficients(&spec.input)?;
    let points = spec.points.as_deref().expect("validated");
    let cloud = load_cloud(spec, points)?;
    let tree = build_cluster_tree(&cloud, side.leaf_size)?;
    let opts = BasisOptions {
        q: side.q,
        q_hat: (side.q_hat != side.q).then_some(side.q_hat),
    };
    let basis = build_samplet_basis_with(tree, opts);
    if !side.matches(&basis) {
        return Err(Error::BasisMismatch);
    }
    let coeffs = CoefficientVector::new(&basis, values)?;
    let f = inverse_transform(&basis, &coeffs)?;
    let out = PointCloud::new(cloud.dim(), cloud.coords().to_vec())?.with_values(f)?;
    write_points(output(spec), &out, format_of(spec, output(spec)))
}

fn compress(spec: &RunSpec) -> Result<()> {
    let cloud = load_cloud(spec, &spec.input)?;
    let values = require_values(&cloud)?;
    let basis = basis_for(spec, &cloud)?;
    let rows: Vec<Vec<String>> = compression_report(&basis, values, &spec.thresholds)?
        .iter()
        .map(|r| {
            vec![
                r.relative_threshold.to_string(),
                r.threshold.to_string(),
                r.nnz.to_string(),
                r.saving.to_string(),
                r.relative_error.to_string(),
                r.dropped_ratio.to_string(),
            ]
        })
        .collect();
    emit_table(
        spec.output.as_deref(),
        &[
            "relative_threshold",
            "threshold",
            "nnz",
            "saving",
            "relative_error",
            "dropped_ratio",
        ],
        &rows,
    )
}

fn coarsen(spec: &RunSpec) -> Result<()> {
    let cloud = load_cloud(spec, &spec.input)?;
    let values = require_values(&cloud)?;
    let basis = basis_for(spec, &cloud)?;
    let coeffs = forward_transform(&basis, values)?;
    let tree_w = coarsen_tree(&basis, &coeffs, spec.epsilon)?;
    let e = energies(&basis, &coeffs)?;
    log::info!(
        "coarsened tree: {} clusters, threshold {}",
        tree_w.len(),
        tree_w.threshold()
    );
    let rows: Vec<Vec<String>> = tree_w
        .leaves()
        .into_iter()
        .map(|c| {
            let cl = basis.tree().cluster(c);
            vec![
                c.to_string(),
                cl.level.to_string(),
                cl.len().to_string(),
                e.energy[c].to_string(),
                e.modified[c].to_string(),
            ]
        })
        .collect();
    emit_table(
        spec.output.as_deref(),
        &["cluster", "level", "points", "energy", "modified_energy"],
        &rows,
    )
}

fn subsample(spec: &RunSpec) -> Result<()> {
    let cloud = load_cloud(spec, &spec.input)?;
    let basis = basis_for(spec, &cloud)?;
    let n = spec.samples.expect("validated");
    let chosen = match spec.level {
        Some(level) => entropy_subsample(&CoarsenedTree::truncated(basis.tree(), level), n, spec.seed)?,
        None => {
            let coeffs = forward_transform(&basis, require_values(&cloud)?)?;
            entropy_subsample(&coarsen_tree(&basis, &coeffs, spec.epsilon)?, n, spec.seed)?
        }
    };
    let d = cloud.dim();
    let coords: Vec<f64> = chosen.iter().flat_map(|&i| cloud.point(i).to_vec()).collect();
    let mut out = PointCloud::new(d, coords)?;
    if let Some(v) = cloud.values() {
        out = out.with_values(chosen.iter().map(|&i| v[i]).collect())?;
    }
    write_points(output(spec), &out, format_of(spec, output(spec)))?;
    if let Some(path) = &spec.indices {
        let rows: Vec<Vec<String>> = chosen.iter().map(|i| vec![i.to_string()]).collect();
        emit_table(Some(path), &["index"], &rows)?;
    }
    Ok(())
}

fn assemble(spec: &RunSpec) -> Result<()> {
    let cloud = load_cloud(spec, &spec.input)?;
    let basis = basis_for(spec, &cloud)?;
    let kernel = &kernels(spec)?[0];
    let m = assemble_matrix(spec, &basis, kernel)?;
    let file = std::fs::File::create(output(spec)).map_err(|e| Error::file(output(spec), e))?;
    write_compressed(&m, std::io::BufWriter::new(file))?;
    let n = basis.len() as f64;
    let near = m.blocks().iter().filter(|b| b.near).count();
    let row = vec![
        basis.len().to_string(),
        spec.q.to_string(),
        spec.eta.to_string(),
        spec.interp_degree.to_string(),
        m.blocks().len().to_string(),
        near.to_string(),
        m.nnz().to_string(),
        (m.nnz() as f64 / (n * n.log2().max(1.0))).to_string(),
    ];
    emit_table(
        spec.report.as_deref(),
        &[
            "n",
            "q",
            "eta",
            "interp_degree",
            "blocks",
            "near_blocks",
            "nnz",
            "nnz_per_nlogn",
        ],
        &[row],
    )
}

fn interpolate(spec: &RunSpec) -> Result<()> {
    let cloud = load_cloud(spec, &spec.input)?;
    let values = require_values(&cloud)?;
    let basis = basis_for(spec, &cloud)?;
    let m = assemble_matrix(spec, &basis, &kernels(spec)?[0])?;
    let h = forward_transform(&basis, values)?;
    let mut problem = InterpolationProblem::new(&m, &h, spec.mu);
    if let Some(t) = spec.tol {
        problem.tol = t;
    }
    if let Some(it) = spec.max_iter {
        problem.max_iter = it;
    }
    let outcome = solve_interpolation(&problem);
    let (iterations, residual, converged) = match &outcome {
        Ok(s) => (s.iterations, s.residual, true),
        Err(Error::NotConverged {
            iterations, residual, ..
        }) => (*iterations, *residual, false),
        Err(_) => (0, f64::NAN, false),
    };
    if matches!(outcome, Ok(_) | Err(Error::NotConverged { .. })) {
        let row = vec![
            basis.len().to_string(),
            spec.q.to_string(),
            spec.eta.to_string(),
            spec.interp_degree.to_string(),
            spec.mu.to_string(),
            iterations.to_string(),
            residual.to_string(),
            converged.to_string(),
        ];
        emit_table(
            spec.report.as_deref(),
            &[
                "n",
                "q",
                "eta",
                "interp_degree",
                "mu",
                "iterations",
                "residual",
                "converged",
            ],
            &[row],
        )?;
    }
    let solution = outcome?;
    if let Some(out) = &spec.output {
        let alpha = inverse_transform(&basis, &solution.beta)?;
        let pts = PointCloud::new(cloud.dim(), cloud.coords().to_vec())?.with_values(alpha)?;
        write_points(out, &pts, format_of(spec, out))?;
    }
    Ok(())
}

fn pursue(spec: &RunSpec) -> Result<()> {
    let cloud = load_cloud(spec, &spec.input)?;
    let values = require_values(&cloud)?;
    let basis = basis_for(spec, &cloud)?;
    let matrices = kernels(spec)?
        .iter()
        .map(|k| assemble_matrix(spec, &basis, k))
        .collect::<Result<Vec<_>>>()?;
    let h = forward_transform(&basis, values)?;
    let dictionary: Vec<&dyn LinearOperator> = matrices.iter().map(|m| m as &dyn LinearOperator).collect();
    let mut problem = PursuitProblem::uniform(dictionary, spec.weight, &h);
    problem.gamma = spec.gamma;
    problem.tol = spec.tol;
    if let Some(it) = spec.max_iter {
        problem.max_iter = it;
    }
    let s = match solve_pursuit(&problem) {
        Ok(s) => s,
        Err(e @ Error::NotConverged { .. }) => {
            if let Error::NotConverged {
                iterations, residual, ..
            } = &e
            {
                let row = vec![
                    basis.len().to_string(),
                    matrices.len().to_string(),
                    spec.weight.to_string(),
                    String::new(),
                    iterations.to_string(),
                    String::new(),
                    String::new(),
                    residual.to_string(),
                    String::new(),
                    String::new(),
                    "false".into(),
                ];
                emit_table(spec.report.as_deref(), PURSUIT_HEADER, &[row])?;
            }
            return Err(e);
        }
        Err(e) => return Err(e),
    };
    let row = vec![
        basis.len().to_string(),
        matrices.len().to_string(),
        spec.weight.to_string(),
        s.gamma.to_string(),
        s.iterations.to_string(),
        s.newton_steps.to_string(),
        s.fixed_point_steps.to_string(),
        s.residual.to_string(),
        s.objective.to_string(),
        s.nnz.to_string(),
        "true".into(),
    ];
    emit_table(spec.report.as_deref(), PURSUIT_HEADER, &[row])?;
    if let Some(out) = &spec.output {
        let mut header = vec!["slot".to_string()];
        header.extend((1..=matrices.len()).map(|l| format!("beta_{l}")));
        let rows: Vec<Vec<String>> = (0..basis.len())
            .map(|i| {
                let mut r = vec![i.to_string()];
                r.extend(s.coefficients.iter().map(|c| c.as_slice()[i].to_string()));
                r
            })
            .collect();
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        emit_table(Some(out), &header, &rows)?;
    }
    Ok(())
}

const PURSUIT_HEADER: &[&str] = &[
    "n",
    "kernels",
    "weight",
    "gamma",
    "iterations",
    "newton_steps",
    "fixed_point_steps",
    "residual",
    "objective",
    "nnz",
    "converged",
];

fn report(spec: &RunSpec) -> Result<()> {
    let cloud = load_cloud(spec, &spec.input)?;
    let kernel = &kernels(spec)?[0];
    let rows: Vec<Vec<String>> = compression_error_report(&cloud, kernel, spec.eta, spec.interp_degree, &spec.qs)?
        .iter()
        .map(|r| {
            vec![
                r.q.to_string(),
                r.n.to_string(),
                r.nnz.to_string(),
                r.nnz_per_nlogn.to_string(),
                r.relative_error.to_string(),
            ]
        })
        .collect();
    emit_table(
        spec.output.as_deref(),
        &["q", "n", "nnz", "nnz_per_nlogn", "relative_error"],
        &rows,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_config() {
        let spec = RunSpec::from_toml(
            r#"
            command = "compress"
            input = "points.csv"
            thresholds = [1e-2, 1e-3]
            q = 2
            "#,
        )
        .unwrap();
        assert_eq!(spec.command, Command::Compress);
        assert_eq!(spec.thresholds, vec![1e-2, 1e-3]);
        assert_eq!(spec.eta, 1.25);
        assert!(spec.validate().is_ok());

        assert!(RunSpec::from_toml("command = \"compress\"\ninput = \"a\"\nbogus = 1\n").is_err());
        assert!(RunSpec::from_toml("command = \"explode\"\ninput = \"a\"\n").is_err());
    }

    #[test]
    fn validation_ranges() {
        let mut s = RunSpec::new(Command::Assemble, "p.csv");
        s.output = Some("m.bin".into());
        assert!(s.validate().is_err());
        s.kernels = vec!["gauss(l=0.1)".into()];
        assert!(s.validate().is_ok());
        s.eta = 0.0;
        assert!(s.validate().is_err());
        s.eta = 1.0;
        s.kernels = vec!["gauss(l=-1)".into()];
        assert!(s.validate().is_err());

        let mut c = RunSpec::new(Command::Coarsen, "p.csv");
        c.epsilon = 1.5;
        assert!(c.validate().is_err());
        assert_eq!(exit_code(&Err(Error::EmptyInput)), 2);
        assert_eq!(
            exit_code(&Err(Error::NotConverged {
                iterations: 1,
                residual: 1.0,
                trace: vec![]
            })),
            3
        );
        assert_eq!(exit_code(&Ok(())), 0);
    }

    #[test]
    fn unit_box_map() {
        let cloud = PointCloud::new(2, vec![1.0, 2.0, 3.0, 2.5]).unwrap();
        let map = AffineMap::unit_box(&cloud);
        let out = map.apply(&cloud).unwrap();
        assert_eq!(out.coords(), &[0.0, 0.0, 1.0, 0.25]);
    }
}
