//! Run configuration and end-to-end drivers: mesh, assemble, solve, sample
//! the scattered field and compare with the series solution.

use crate::assembly::{
    assemble_rhs, contrast_table, AssemblyError, AssemblyOptions, Operator, SystemMatrices,
};
use crate::em::{self, EmError, IncidentWave, Material, WaveParams};
use crate::fields::{self, FieldError, FieldEvaluator, FieldSample};
use crate::linalg::C64;
use crate::mesh::{self, extract_rwg_edges, Mesh, MeshError};
use crate::mie::{self, LayeredCylinder, MieError, MieSolution};
use crate::quadrature;
use crate::solver::{self, GmresOptions, SolveError, SolveReport};
use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Mie(#[from] MieError),
    #[error(transparent)]
    Em(#[from] EmError),
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Geometry {
    /// Layered disk centred at the origin; mutually exclusive with `mesh_file`.
    pub radii: Option<Vec<f64>>,
    pub mesh_file: Option<PathBuf>,
    /// One material per region.
    pub materials: Vec<Material>,
}

impl Default for Geometry {
    fn default() -> Self {
        Geometry {
            radii: Some(vec![0.05, 0.1]),
            mesh_file: None,
            materials: vec![
                Material {
                    eps_r: 2.0,
                    sigma: 0.0,
                },
                Material {
                    eps_r: 8.0,
                    sigma: 0.0,
                },
            ],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Incidence {
    /// Propagation direction from the x axis (degrees).
    pub angle_deg: f64,
    /// Electric field amplitude (V/m).
    pub e0: f64,
}

impl Default for Incidence {
    fn default() -> Self {
        Incidence {
            angle_deg: 0.0,
            e0: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Quadrature {
    pub tri_points: usize,
    pub edge_points: usize,
}

impl Default for Quadrature {
    fn default() -> Self {
        Quadrature {
            tri_points: 1,
            edge_points: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverMode {
    Iterative,
    Direct,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub mode: SolverMode,
    pub tol: f64,
    pub max_iter: usize,
    pub restart: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let g = GmresOptions::default();
        SolverConfig {
            mode: SolverMode::Iterative,
            tol: g.tol,
            max_iter: g.max_iter,
            restart: g.restart,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Observation {
    pub radius: f64,
    pub count: usize,
}

impl Default for Observation {
    fn default() -> Self {
        Observation {
            radius: 0.15,
            count: 360,
        }
    }
}

/// Everything a run needs. Missing keys take the two-layer cylinder defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub geometry: Geometry,
    /// Hz.
    pub frequency: f64,
    pub incidence: Incidence,
    /// Target mean edge length (m).
    pub h_target: f64,
    pub quadrature: Quadrature,
    pub solver: SolverConfig,
    pub observation: Observation,
    /// Mesh levels for `sweep-h` (m, descending).
    pub h_list: Vec<f64>,
    /// Conductivities for `sweep-sigma` (S/m).
    pub sigma_list: Vec<f64>,
    /// Region whose conductivity `sweep-sigma` varies.
    pub sigma_region: usize,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            geometry: Geometry::default(),
            frequency: 1e9,
            incidence: Incidence::default(),
            h_target: 0.007,
            quadrature: Quadrature::default(),
            solver: SolverConfig::default(),
            observation: Observation::default(),
            h_list: vec![0.1414, 0.0707, 0.0354, 0.0177, 0.0088, 0.0044, 0.0035],
            sigma_list: vec![1.0, 10.0, 100.0, 1000.0, 10000.0],
            sigma_region: 0,
            output_dir: PathBuf::from("out"),
        }
    }
}

fn positive(name: &str, v: f64) -> Result<(), RunError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(RunError::Config(format!(
            "{name} must be positive, got {v}"
        )))
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<RunConfig, RunError> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| RunError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), RunError> {
        let g = &self.geometry;
        match (&g.radii, &g.mesh_file) {
            (Some(_), Some(_)) => {
                return Err(RunError::Config(
                    "geometry: give either radii or mesh_file, not both".into(),
                ))
            }
            (None, None) => {
                return Err(RunError::Config(
                    "geometry: radii or mesh_file is required".into(),
                ))
            }
            (Some(r), None) => {
                if r.is_empty() {
                    return Err(RunError::Config("geometry.radii: empty".into()));
                }
                for (i, &x) in r.iter().enumerate() {
                    positive(&format!("geometry.radii[{i}]"), x)?;
                    if i > 0 && x <= r[i - 1] {
                        return Err(RunError::Config(format!(
                            "geometry.radii[{i}]: radii must increase ({} <= {})",
                            x,
                            r[i - 1]
                        )));
                    }
                }
                if g.materials.len() != r.len() {
                    return Err(RunError::Config(format!(
                        "geometry.materials: {} entries for {} layers",
                        g.materials.len(),
                        r.len()
                    )));
                }
            }
            (None, Some(_)) => {}
        }
        for (i, m) in g.materials.iter().enumerate() {
            m.validate()
                .map_err(|e| RunError::Config(format!("geometry.materials[{i}]: {e}")))?;
        }
        positive("frequency", self.frequency)?;
        if !self.incidence.angle_deg.is_finite() {
            return Err(RunError::Config(
                "incidence.angle_deg must be finite".into(),
            ));
        }
        if !(self.incidence.e0 >= 0.0 && self.incidence.e0.is_finite()) {
            return Err(RunError::Config(format!(
                "incidence.e0 must be >= 0, got {}",
                self.incidence.e0
            )));
        }
        positive("h_target", self.h_target)?;
        quadrature::triangle_rule(self.quadrature.tri_points)
            .map_err(|e| RunError::Config(format!("quadrature.tri_points: {e}")))?;
        quadrature::edge_rule(self.quadrature.edge_points)
            .map_err(|e| RunError::Config(format!("quadrature.edge_points: {e}")))?;
        positive("solver.tol", self.solver.tol)?;
        if self.solver.max_iter == 0 || self.solver.restart == 0 {
            return Err(RunError::Config(
                "solver.max_iter and solver.restart must be >= 1".into(),
            ));
        }
        positive("observation.radius", self.observation.radius)?;
        if self.observation.count == 0 {
            return Err(RunError::Config("observation.count must be >= 1".into()));
        }
        for (i, &h) in self.h_list.iter().enumerate() {
            positive(&format!("h_list[{i}]"), h)?;
        }
        for (i, &s) in self.sigma_list.iter().enumerate() {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(RunError::Config(format!(
                    "sigma_list[{i}] must be >= 0, got {s}"
                )));
            }
        }
        if self.sigma_region >= g.materials.len() {
            return Err(RunError::Config(format!(
                "sigma_region {} out of range for {} materials",
                self.sigma_region,
                g.materials.len()
            )));
        }
        Ok(())
    }

    pub fn wave(&self) -> Result<WaveParams, RunError> {
        Ok(WaveParams::new(self.frequency)?)
    }

    pub fn incident(&self, wp: &WaveParams) -> IncidentWave {
        IncidentWave::new(self.incidence.e0, self.incidence.angle_deg.to_radians(), wp)
    }

    pub fn assembly_options(&self) -> AssemblyOptions {
        AssemblyOptions {
            tri_points: self.quadrature.tri_points,
            edge_points: self.quadrature.edge_points,
            ..AssemblyOptions::default()
        }
    }

    pub fn gmres_options(&self) -> GmresOptions {
        GmresOptions {
            tol: self.solver.tol,
            restart: self.solver.restart,
            max_iter: self.solver.max_iter,
        }
    }

    /// The layered cylinder, when the geometry is one.
    pub fn cylinder(&self) -> Option<LayeredCylinder> {
        self.geometry.radii.as_ref().map(|r| LayeredCylinder {
            center: [0.0, 0.0],
            radii: r.clone(),
            materials: self.geometry.materials.clone(),
        })
    }

    /// Generated or loaded mesh at mesh size `h`.
    pub fn mesh(&self, h: f64) -> Result<Mesh, RunError> {
        match (&self.geometry.radii, &self.geometry.mesh_file) {
            (Some(r), _) => Ok(mesh::build_layered_disk_mesh(r, h)?),
            (None, Some(path)) => {
                let text = std::fs::read_to_string(path).map_err(|source| RunError::Io {
                    path: path.clone(),
                    source,
                })?;
                let m = mesh::read_mesh(&text)?;
                if m.region_count() > self.geometry.materials.len() {
                    return Err(RunError::Config(format!(
                        "mesh has {} regions but {} materials are given",
                        m.region_count(),
                        self.geometry.materials.len()
                    )));
                }
                Ok(m)
            }
            (None, None) => Err(RunError::Config(
                "geometry: radii or mesh_file is required".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Timings {
    pub mesh: f64,
    pub assembly: f64,
    pub solve: f64,
    pub fields: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub n_rwg: usize,
    pub n_triangles: usize,
    pub report: SolveReport,
    pub numeric: Vec<FieldSample>,
    pub analytic: Option<Vec<FieldSample>>,
    /// `None` when no series solution exists or it is identically zero.
    pub relative_error: Option<f64>,
    /// Largest `|E^s|` on the observation circle.
    pub max_scattered: f64,
    pub timings: Timings,
}

/// Contrast-independent state for repeated solves on one mesh.
pub struct Prepared {
    pub mesh: Mesh,
    pub rwgs: Vec<mesh::RwgEdge>,
    pub op: Arc<Operator>,
    pub wave: WaveParams,
    pub mesh_seconds: f64,
    pub assembly_seconds: f64,
}

pub fn prepare(cfg: &RunConfig, h: f64) -> Result<Prepared, RunError> {
    let wave = cfg.wave()?;
    let t = Instant::now();
    let mesh = cfg.mesh(h)?;
    let rwgs = extract_rwg_edges(&mesh);
    let mesh_seconds = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let op = Arc::new(Operator::new(
        &mesh,
        &rwgs,
        wave.k0,
        cfg.assembly_options(),
    )?);
    Ok(Prepared {
        mesh,
        rwgs,
        op,
        wave,
        mesh_seconds,
        assembly_seconds: t.elapsed().as_secs_f64(),
    })
}

fn analytic_samples(sol: &MieSolution, points: &[[f64; 2]]) -> Result<Vec<FieldSample>, RunError> {
    points
        .iter()
        .map(|&p| {
            let (er, ep) = mie::mie_scattered_field(sol, p)?;
            let d = geom_dir(p, sol.cylinder.center);
            let cart = [er * d[0] - ep * d[1], er * d[1] + ep * d[0]];
            Ok(FieldSample {
                position: p,
                cartesian: cart,
                cylindrical: (er, ep),
            })
        })
        .collect()
}

fn geom_dir(p: [f64; 2], c: [f64; 2]) -> [f64; 2] {
    let d = crate::geom::sub(p, c);
    crate::geom::scale(d, 1.0 / crate::geom::norm(d))
}

/// Series solution and samples on the observation circle.
pub fn run_mie(cfg: &RunConfig) -> Result<(MieSolution, Vec<FieldSample>), RunError> {
    let cyl = cfg
        .cylinder()
        .ok_or_else(|| RunError::Config("the series solution needs geometry.radii".into()))?;
    if cfg.observation.radius <= cyl.outer_radius() {
        return Err(RunError::Config(format!(
            "observation.radius {} must exceed the outer radius {}",
            cfg.observation.radius,
            cyl.outer_radius()
        )));
    }
    let wp = cfg.wave()?;
    let sol = mie::solve_mie(&cyl, &cfg.incident(&wp), &wp)?;
    let pts = fields::observation_circle(cyl.center, cfg.observation.radius, cfg.observation.count);
    let samples = analytic_samples(&sol, &pts)?;
    Ok((sol, samples))
}

/// Solves with region materials `materials` on a prepared mesh.
pub fn solve_prepared(
    cfg: &RunConfig,
    prep: &Prepared,
    materials: &[Material],
) -> Result<RunOutcome, RunError> {
    let wp = prep.wave;
    let inc = cfg.incident(&wp);
    let region_chi: Vec<C64> = materials.iter().map(|m| em::contrast(m, &wp)).collect();
    let chi = contrast_table(&prep.mesh, &region_chi);
    let t = Instant::now();
    let sys = SystemMatrices::new(prep.op.clone(), &prep.mesh, chi.clone())?;
    let rule = quadrature::triangle_rule(cfg.quadrature.tri_points).expect("validated");
    let rhs = assemble_rhs(&prep.mesh, &prep.rwgs, &inc, &wp, &rule);
    let mut assembly = prep.assembly_seconds + t.elapsed().as_secs_f64();
    let report = match cfg.solver.mode {
        SolverMode::Iterative => solver::gmres(&sys, &rhs, &cfg.gmres_options())?,
        SolverMode::Direct => {
            if prep.rwgs.len() > solver::DIRECT_SOLVE_LIMIT {
                return Err(SolveError::TooLarge(prep.rwgs.len()).into());
            }
            let t = Instant::now();
            let dense = sys.dense();
            assembly += t.elapsed().as_secs_f64();
            solver::solve_direct(&dense, &rhs)?
        }
    };
    let solve_seconds = report.seconds;
    let t = Instant::now();
    let center = [0.0, 0.0];
    let pts = fields::observation_circle(center, cfg.observation.radius, cfg.observation.count);
    let ev = FieldEvaluator::new(
        &prep.mesh,
        &prep.rwgs,
        &chi,
        &report.solution,
        wp.k0,
        cfg.quadrature.tri_points,
        cfg.quadrature.edge_points,
    )?;
    let numeric = ev.sample_scattered(&pts, center)?;
    let max_scattered = numeric
        .iter()
        .map(|s| (s.cartesian[0].norm_sqr() + s.cartesian[1].norm_sqr()).sqrt())
        .fold(0.0, f64::max);
    let analytic = match cfg.cylinder() {
        Some(mut cyl) => {
            cyl.materials = materials.to_vec();
            let sol = mie::solve_mie(&cyl, &inc, &wp)?;
            Some(analytic_samples(&sol, &pts)?)
        }
        None => None,
    };
    let relative_error = match &analytic {
        Some(a) => match fields::relative_error(&numeric, a) {
            Ok(e) => Some(e),
            Err(FieldError::ZeroReference) => None,
            Err(e) => return Err(e.into()),
        },
        None => None,
    };
    Ok(RunOutcome {
        n_rwg: prep.rwgs.len(),
        n_triangles: prep.mesh.triangles().len(),
        report,
        numeric,
        analytic,
        relative_error,
        max_scattered,
        timings: Timings {
            mesh: prep.mesh_seconds,
            assembly,
            solve: solve_seconds,
            fields: t.elapsed().as_secs_f64(),
        },
    })
}

/// One full run at the configured `h_target`.
pub fn run_solve(cfg: &RunConfig) -> Result<RunOutcome, RunError> {
    cfg.validate()?;
    if let Some(cyl) = cfg.cylinder() {
        if cfg.observation.radius <= cyl.outer_radius() {
            return Err(RunError::Config(format!(
                "observation.radius {} must exceed the outer radius {}",
                cfg.observation.radius,
                cyl.outer_radius()
            )));
        }
    }
    let prep = prepare(cfg, cfg.h_target)?;
    solve_prepared(cfg, &prep, &cfg.geometry.materials)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    /// `h` for mesh sweeps, `σ` for conductivity sweeps.
    pub parameter: f64,
    pub n_rwg: usize,
    pub relative_error: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Set when this level failed; the sweep continues.
    pub failure: Option<String>,
}

fn row(parameter: f64, r: Result<RunOutcome, RunError>) -> SweepRow {
    match r {
        Ok(o) => SweepRow {
            parameter,
            n_rwg: o.n_rwg,
            relative_error: o.relative_error,
            iterations: o.report.iterations,
            converged: o.report.converged,
            failure: None,
        },
        Err(e) => SweepRow {
            parameter,
            n_rwg: 0,
            relative_error: None,
            iterations: 0,
            converged: false,
            failure: Some(e.to_string()),
        },
    }
}

/// Mesh refinement study over `hs`.
pub fn sweep_h(cfg: &RunConfig, hs: &[f64]) -> Result<Vec<SweepRow>, RunError> {
    cfg.validate()?;
    Ok(hs
        .iter()
        .map(|&h| {
            row(
                h,
                prepare(cfg, h).and_then(|p| solve_prepared(cfg, &p, &cfg.geometry.materials)),
            )
        })
        .collect())
}

/// Conductivity study: region `cfg.sigma_region` takes each `σ` in turn, on
/// one mesh and one geometric operator.
pub fn sweep_sigma(cfg: &RunConfig, sigmas: &[f64]) -> Result<Vec<SweepRow>, RunError> {
    cfg.validate()?;
    let prep = prepare(cfg, cfg.h_target)?;
    Ok(sigmas
        .iter()
        .map(|&s| {
            let mut mats = cfg.geometry.materials.clone();
            mats[cfg.sigma_region].sigma = s;
            row(s, solve_prepared(cfg, &prep, &mats))
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeshStats {
    pub n_vertices: usize,
    pub n_triangles: usize,
    pub n_rwg: usize,
    pub mean_edge: f64,
    pub min_edge: f64,
    pub max_edge: f64,
}

pub fn mesh_stats(m: &Mesh) -> MeshStats {
    let (mean_edge, min_edge, max_edge) = mesh::edge_length_stats(m);
    MeshStats {
        n_vertices: m.vertices().len(),
        n_triangles: m.triangles().len(),
        n_rwg: m.interior_edge_count(),
        mean_edge,
        min_edge,
        max_edge,
    }
}
