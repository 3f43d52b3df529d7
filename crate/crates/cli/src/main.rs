mod output;
mod plot;

use clap::{Args, Parser, Subcommand, ValueEnum};
use output::{num, opt, OutputDir, OutputError};
use plot::{Plot, Series};
use std::path::PathBuf;
use std::process::ExitCode;
use tevie::em::EmError;
use tevie::experiment::{self, RunConfig, RunError, RunOutcome, SolverMode, SweepRow};
use tevie::fields::FieldSample;
use tevie::mesh::write_mesh;
use tevie::mie::MieError;
use tevie::solver::SolveError;

#[derive(Parser)]
#[command(
    name = "tevie",
    version,
    about = "2D TE domain integral equation scattering solver"
)]
struct Cli {
    /// JSON run configuration; defaults apply to missing keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output_dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Omit the timestamp line and wall-clock columns so reruns are byte-identical.
    #[arg(long, global = true)]
    no_timestamp: bool,
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Overrides {
    /// Mean edge length target (m).
    #[arg(long, global = true)]
    h_target: Option<f64>,
    /// Frequency (Hz).
    #[arg(long, global = true)]
    frequency: Option<f64>,
    /// Incidence direction (degrees from the x axis).
    #[arg(long, global = true)]
    angle_deg: Option<f64>,
    #[arg(long, global = true, value_enum)]
    mode: Option<Mode>,
    /// GMRES relative residual target.
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[arg(long, global = true)]
    max_iter: Option<usize>,
    /// Triangle quadrature points (1, 3, 6 or 12).
    #[arg(long, global = true)]
    tri_points: Option<usize>,
    #[arg(long, global = true)]
    obs_radius: Option<f64>,
    #[arg(long, global = true)]
    obs_count: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Iterative,
    Direct,
}

#[derive(Subcommand)]
enum Command {
    /// Solve once and compare with the series solution when the geometry is a layered disk.
    Solve,
    /// Mesh refinement study.
    SweepH {
        /// Comma-separated mesh sizes (m), overriding `h_list`.
        #[arg(long, value_delimiter = ',')]
        h: Option<Vec<f64>>,
    },
    /// Conductivity study on one mesh.
    SweepSigma {
        /// Comma-separated conductivities (S/m), overriding `sigma_list`.
        #[arg(long, value_delimiter = ',')]
        sigma: Option<Vec<f64>>,
        /// Region whose conductivity varies, overriding `sigma_region`.
        #[arg(long)]
        region: Option<usize>,
    },
    /// Series solution alone on the observation circle.
    Mie,
    /// Generate the mesh and its statistics.
    Mesh,
}

enum Failure {
    Config(String),
    NotConverged(String),
    Numerical(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::NotConverged(_) => 3,
            Failure::Numerical(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::NotConverged(m) | Failure::Numerical(m) => m,
        }
    }
}

/// Bad input maps to 2; anything the numerics reject maps to 4.
fn is_input_error(e: &RunError) -> bool {
    matches!(
        e,
        RunError::Config(_)
            | RunError::Io { .. }
            | RunError::Mesh(_)
            | RunError::Solve(SolveError::TooLarge(_))
            | RunError::Mie(
                MieError::InvalidCylinder(_)
                    | MieError::InteriorPoint { .. }
                    | MieError::Material(EmError::InvalidParameter(_))
            )
            | RunError::Em(EmError::InvalidParameter(_))
    )
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        if is_input_error(&e) {
            Failure::Config(e.to_string())
        } else {
            Failure::Numerical(e.to_string())
        }
    }
}

impl From<OutputError> for Failure {
    fn from(e: OutputError) -> Self {
        Failure::Numerical(e.to_string())
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Config(format!("reading {}: {e}", path.display())))?;
            RunConfig::from_json(&text)
                .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?
        }
        None => RunConfig::default(),
    };
    let o = &cli.overrides;
    if let Some(v) = o.h_target {
        cfg.h_target = v;
    }
    if let Some(v) = o.frequency {
        cfg.frequency = v;
    }
    if let Some(v) = o.angle_deg {
        cfg.incidence.angle_deg = v;
    }
    if let Some(m) = o.mode {
        cfg.solver.mode = match m {
            Mode::Iterative => SolverMode::Iterative,
            Mode::Direct => SolverMode::Direct,
        };
    }
    if let Some(v) = o.tol {
        cfg.solver.tol = v;
    }
    if let Some(v) = o.max_iter {
        cfg.solver.max_iter = v;
    }
    if let Some(v) = o.tri_points {
        cfg.quadrature.tri_points = v;
    }
    if let Some(v) = o.obs_radius {
        cfg.observation.radius = v;
    }
    if let Some(v) = o.obs_count {
        cfg.observation.count = v;
    }
    if let Some(v) = &cli.out {
        cfg.output_dir = v.clone();
    }
    match &cli.command {
        Command::SweepH { h: Some(h) } => cfg.h_list = h.clone(),
        Command::SweepSigma { sigma, region } => {
            if let Some(s) = sigma {
                cfg.sigma_list = s.clone();
            }
            if let Some(r) = region {
                cfg.sigma_region = *r;
            }
        }
        _ => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Rounded to 1e-9 degrees so sample angles print cleanly.
fn phi_deg(s: &FieldSample) -> f64 {
    let d = s.position[1]
        .atan2(s.position[0])
        .to_degrees()
        .rem_euclid(360.0);
    (d * 1e9).round() / 1e9
}

fn field_columns(s: &FieldSample) -> [String; 4] {
    let (er, ep) = s.cylindrical;
    [num(er.re), num(er.im), num(ep.re), num(ep.im)]
}

fn magnitude_series(samples: &[FieldSample], tag: &str, dashed: bool) -> [Series; 2] {
    let pick = |f: fn(&FieldSample) -> f64, name: &str, color| Series {
        label: format!("|{name}| {tag}"),
        points: samples.iter().map(|s| (phi_deg(s), f(s))).collect(),
        dashed,
        markers: false,
        color,
    };
    [
        pick(|s| s.cylindrical.0.norm(), "Eρ", 0),
        pick(|s| s.cylindrical.1.norm(), "Eφ", 1),
    ]
}

fn write_config(out: &OutputDir, cfg: &RunConfig) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(cfg).expect("config serialises");
    out.write_bytes("config.json", format!("{text}\n").as_bytes())?;
    Ok(())
}

fn cmd_solve(cfg: &RunConfig, out: &OutputDir) -> Result<(), Failure> {
    eprintln!("solving at h = {} m", cfg.h_target);
    let o: RunOutcome = experiment::run_solve(cfg)?;
    let rep = &o.report;
    eprintln!(
        "N = {}, {} iterations, residual {:.3e}",
        o.n_rwg, rep.iterations, rep.relative_residual
    );

    let mut header = vec!["phi_deg", "Erho_re", "Erho_im", "Ephi_re", "Ephi_im"];
    if o.analytic.is_some() {
        header.extend(["mie_Erho_re", "mie_Erho_im", "mie_Ephi_re", "mie_Ephi_im"]);
    }
    let rows: Vec<Vec<String>> = o
        .numeric
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let mut r = vec![num(phi_deg(s))];
            r.extend(field_columns(s));
            if let Some(a) = &o.analytic {
                r.extend(field_columns(&a[i]));
            }
            r
        })
        .collect();
    out.write_csv("fields.csv", &header, &rows, &[])?;

    let mut series = Vec::from(magnitude_series(&o.numeric, "numerical", false));
    if let Some(a) = &o.analytic {
        series.extend(magnitude_series(a, "series", true));
    }
    let svg = Plot {
        title: format!("Scattered field on r = {} m", cfg.observation.radius),
        xlabel: "φ (degrees)".into(),
        ylabel: "|E| (V/m)".into(),
        log_x: false,
        log_y: false,
        series,
    }
    .render();
    out.write_bytes("fields.svg", svg.as_bytes())?;

    let times = |v: f64| {
        if out.timestamped() {
            num(v)
        } else {
            String::new()
        }
    };
    let t = &o.timings;
    let row = vec![
        o.n_rwg.to_string(),
        o.n_triangles.to_string(),
        rep.iterations.to_string(),
        num(rep.relative_residual),
        rep.converged.to_string(),
        opt(o.relative_error),
        num(o.max_scattered),
        times(t.mesh),
        times(t.assembly),
        times(t.solve),
        times(t.fields),
    ];
    let mut trailer = Vec::new();
    if !rep.converged {
        trailer.push(format!(
            "warning: solver stopped after {} iterations at relative residual {:e} (target {:e})",
            rep.iterations, rep.relative_residual, cfg.solver.tol
        ));
    }
    if o.analytic.is_some() && o.relative_error.is_none() {
        trailer.push(format!(
            "reference field is zero; largest scattered field magnitude {:e}",
            o.max_scattered
        ));
    }
    out.write_csv(
        "summary.csv",
        &[
            "N",
            "triangles",
            "iterations",
            "residual",
            "converged",
            "relative_error",
            "max_scattered",
            "t_mesh_s",
            "t_assembly_s",
            "t_solve_s",
            "t_fields_s",
        ],
        &[row],
        &trailer,
    )?;
    write_config(out, cfg)?;

    match o.relative_error {
        Some(e) => println!("relative error {e:.4e} (N = {})", o.n_rwg),
        None => println!(
            "max scattered field {:e} V/m (N = {})",
            o.max_scattered, o.n_rwg
        ),
    }
    if rep.converged {
        Ok(())
    } else {
        Err(Failure::NotConverged(trailer[0].clone()))
    }
}

fn sweep_rows(rows: &[SweepRow], with_n: bool) -> Vec<Vec<String>> {
    rows.iter()
        .map(|r| {
            let mut v = vec![num(r.parameter)];
            if with_n {
                v.push(r.n_rwg.to_string());
            }
            v.extend([
                opt(r.relative_error),
                r.iterations.to_string(),
                r.converged.to_string(),
                r.failure.clone().unwrap_or_default(),
            ]);
            v
        })
        .collect()
}

/// Numerical failures outrank non-convergence.
fn sweep_status(rows: &[SweepRow], what: &str) -> Result<(), Failure> {
    if let Some(r) = rows.iter().find(|r| r.failure.is_some()) {
        return Err(Failure::Numerical(format!(
            "{what} = {}: {}",
            r.parameter,
            r.failure.as_deref().unwrap_or_default()
        )));
    }
    let stalled: Vec<String> = rows
        .iter()
        .filter(|r| !r.converged)
        .map(|r| r.parameter.to_string())
        .collect();
    if stalled.is_empty() {
        Ok(())
    } else {
        Err(Failure::NotConverged(format!(
            "solver did not converge at {what} = {}",
            stalled.join(", ")
        )))
    }
}

fn sweep_trailer(rows: &[SweepRow], what: &str) -> Vec<String> {
    rows.iter()
        .filter(|r| !r.converged && r.failure.is_none())
        .map(|r| format!("warning: {what} = {} did not converge", r.parameter))
        .collect()
}

fn sweep_plots(
    out: &OutputDir,
    stem: &str,
    rows: &[SweepRow],
    xlabel: &str,
    log_x: bool,
) -> Result<(), Failure> {
    let ok: Vec<&SweepRow> = rows.iter().filter(|r| r.failure.is_none()).collect();
    let err = Plot {
        title: "Relative error".into(),
        xlabel: xlabel.into(),
        ylabel: "relative L2 error".into(),
        log_x,
        log_y: true,
        series: vec![Series {
            label: "error".into(),
            points: ok
                .iter()
                .filter_map(|r| Some((r.parameter, r.relative_error?)))
                .collect(),
            dashed: false,
            markers: true,
            color: 0,
        }],
    };
    out.write_bytes(&format!("{stem}.svg"), err.render().as_bytes())?;
    let it = Plot {
        title: "Solver iterations".into(),
        xlabel: xlabel.into(),
        ylabel: "iterations".into(),
        log_x,
        log_y: false,
        series: vec![Series {
            label: "iterations".into(),
            points: ok
                .iter()
                .map(|r| (r.parameter, r.iterations as f64))
                .collect(),
            dashed: false,
            markers: true,
            color: 0,
        }],
    };
    out.write_bytes(&format!("{stem}_iterations.svg"), it.render().as_bytes())?;
    Ok(())
}

fn log_rows(rows: &[SweepRow], what: &str) {
    for r in rows {
        match &r.failure {
            Some(f) => eprintln!("{what} = {}: failed: {f}", r.parameter),
            None => eprintln!(
                "{what} = {}: N = {}, error {}, {} iterations{}",
                r.parameter,
                r.n_rwg,
                r.relative_error
                    .map(|e| format!("{e:.4e}"))
                    .unwrap_or_else(|| "n/a".into()),
                r.iterations,
                if r.converged { "" } else { " (not converged)" }
            ),
        }
    }
}

fn cmd_sweep_h(cfg: &RunConfig, out: &OutputDir) -> Result<(), Failure> {
    if cfg.h_list.is_empty() {
        return Err(Failure::Config("h_list is empty".into()));
    }
    if cfg.h_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Failure::Config("h_list must be strictly descending".into()));
    }
    let rows = experiment::sweep_h(cfg, &cfg.h_list)?;
    log_rows(&rows, "h");
    out.write_csv(
        "sweep_h.csv",
        &[
            "h",
            "N",
            "relative_error",
            "iterations",
            "converged",
            "failure",
        ],
        &sweep_rows(&rows, true),
        &sweep_trailer(&rows, "h"),
    )?;
    sweep_plots(out, "sweep_h", &rows, "h (m)", true)?;
    write_config(out, cfg)?;
    sweep_status(&rows, "h")
}

fn cmd_sweep_sigma(cfg: &RunConfig, out: &OutputDir) -> Result<(), Failure> {
    if cfg.sigma_list.is_empty() {
        return Err(Failure::Config("sigma_list is empty".into()));
    }
    let rows = experiment::sweep_sigma(cfg, &cfg.sigma_list)?;
    log_rows(&rows, "sigma");
    out.write_csv(
        "sweep_sigma.csv",
        &[
            "sigma",
            "N",
            "relative_error",
            "iterations",
            "converged",
            "failure",
        ],
        &sweep_rows(&rows, true),
        &sweep_trailer(&rows, "sigma"),
    )?;
    let log_x = cfg.sigma_list.iter().all(|&s| s > 0.0);
    sweep_plots(out, "sweep_sigma", &rows, "σ (S/m)", log_x)?;
    write_config(out, cfg)?;
    sweep_status(&rows, "sigma")
}

fn cmd_mie(cfg: &RunConfig, out: &OutputDir) -> Result<(), Failure> {
    let (sol, samples) = experiment::run_mie(cfg)?;
    let certificate = format!(
        "series truncated at |n| <= {}, tail ratio {:e}, max interface residual {:e}",
        sol.n_max,
        sol.tail_ratio(),
        sol.max_residual
    );
    eprintln!("{certificate}");
    let rows: Vec<Vec<String>> = samples
        .iter()
        .map(|s| {
            let mut r = vec![num(phi_deg(s))];
            r.extend(field_columns(s));
            r
        })
        .collect();
    out.write_csv(
        "mie.csv",
        &["phi_deg", "Erho_re", "Erho_im", "Ephi_re", "Ephi_im"],
        &rows,
        &[certificate],
    )?;
    write_config(out, cfg)?;
    Ok(())
}

fn cmd_mesh(cfg: &RunConfig, out: &OutputDir) -> Result<(), Failure> {
    let mesh = cfg.mesh(cfg.h_target)?;
    let st = experiment::mesh_stats(&mesh);
    out.write_bytes("mesh.txt", write_mesh(&mesh).as_bytes())?;
    out.write_csv(
        "mesh_stats.csv",
        &[
            "h_target",
            "n_vertices",
            "n_triangles",
            "n_rwg",
            "mean_edge",
            "min_edge",
            "max_edge",
        ],
        &[vec![
            num(cfg.h_target),
            st.n_vertices.to_string(),
            st.n_triangles.to_string(),
            st.n_rwg.to_string(),
            num(st.mean_edge),
            num(st.min_edge),
            num(st.max_edge),
        ]],
        &[],
    )?;
    println!(
        "{} vertices, {} triangles, {} RWG functions, mean edge {:.4e} m",
        st.n_vertices, st.n_triangles, st.n_rwg, st.mean_edge
    );
    Ok(())
}

fn run(cli: &Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Config(format!("--threads {n}: {e}")))?;
    }
    let cfg = load_config(cli)?;
    let out = OutputDir::create(&cfg.output_dir, !cli.no_timestamp)?;
    match cli.command {
        Command::Solve => cmd_solve(&cfg, &out),
        Command::SweepH { .. } => cmd_sweep_h(&cfg, &out),
        Command::SweepSigma { .. } => cmd_sweep_sigma(&cfg, &out),
        Command::Mie => cmd_mie(&cfg, &out),
        Command::Mesh => cmd_mesh(&cfg, &out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads == Some(0) {
        eprintln!("error: --threads must be at least 1");
        return ExitCode::from(2);
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let kind = match f {
                Failure::Config(_) => "error",
                Failure::NotConverged(_) => "warning",
                Failure::Numerical(_) => "numerical failure",
            };
            eprintln!("{kind}: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
