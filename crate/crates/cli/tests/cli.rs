use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use tempfile::TempDir;

fn tevie(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tevie"))
        .args(args)
        .arg("--out")
        .arg(out)
        .arg("--threads")
        .arg("1")
        .output()
        .expect("binary runs")
}

fn config(dir: &TempDir, json: &str) -> PathBuf {
    let p = dir.path().join("run.json");
    fs::write(&p, json).unwrap();
    p
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Rows without comment lines, header first.
fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect()
}

fn column(rows: &[Vec<String>], name: &str) -> Vec<String> {
    let i = rows[0].iter().position(|h| h == name).expect(name);
    rows[1..].iter().map(|r| r[i].clone()).collect()
}

const COARSE: [&str; 2] = ["--h-target", "0.02"];

fn solve_args(extra: &[&'static str]) -> Vec<&'static str> {
    let mut v = vec!["solve"];
    v.extend(COARSE);
    v.extend(extra);
    v
}

#[test]
fn negative_radius_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, r#"{"geometry": {"radii": [-0.05, 0.1]}}"#);
    let o = tevie(
        &["solve", "--config", cfg.to_str().unwrap()],
        &dir.path().join("out"),
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("geometry.radii[0]"), "{}", stderr(&o));
}

#[test]
fn unknown_keys_and_missing_files_are_config_errors() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, r#"{"frequncy": 1e9}"#);
    let out = dir.path().join("out");
    let o = tevie(&["solve", "--config", cfg.to_str().unwrap()], &out);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("frequncy"));
    let o = tevie(&["mesh", "--config", "/nonexistent/run.json"], &out);
    assert_eq!(o.status.code(), Some(2));
    let o = tevie(&["solve", "--tol=-1"], &out);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("solver.tol"));
}

#[test]
fn flags_override_the_file() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, r#"{"h_target": -1.0}"#);
    let out = dir.path().join("out");
    let o = tevie(&["mesh", "--config", cfg.to_str().unwrap()], &out);
    assert_eq!(o.status.code(), Some(2));

    let cfg = config(&dir, r#"{"h_target": 0.05}"#);
    let o = tevie(
        &[
            "mesh",
            "--config",
            cfg.to_str().unwrap(),
            "--h-target",
            "0.02",
        ],
        &out,
    );
    assert!(o.status.success());
    let rows = csv_rows(&out.join("mesh_stats.csv"));
    assert_eq!(column(&rows, "h_target"), ["2e-2"]);
}

#[test]
fn mesh_stats_match_the_written_mesh() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let o = tevie(&["mesh"], &out);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = csv_rows(&out.join("mesh_stats.csv"));
    let get = |n: &str| column(&rows, n)[0].parse::<f64>().unwrap();
    let n_rwg = get("n_rwg");
    assert!((n_rwg - 4104.0).abs() <= 0.15 * 4104.0, "{n_rwg}");
    assert!((get("mean_edge") - 0.007).abs() <= 0.25 * 0.007);
    assert!(get("min_edge") <= get("mean_edge") && get("mean_edge") <= get("max_edge"));

    let mesh = tevie::mesh::read_mesh(&fs::read_to_string(out.join("mesh.txt")).unwrap()).unwrap();
    assert_eq!(mesh.vertices().len() as f64, get("n_vertices"));
    assert_eq!(mesh.triangles().len() as f64, get("n_triangles"));
    assert_eq!(tevie::mesh::extract_rwg_edges(&mesh).len() as f64, n_rwg);
}

#[test]
fn tiny_disk_mesh_is_consistent() {
    let dir = TempDir::new().unwrap();
    let cfg = config(
        &dir,
        r#"{"geometry": {"radii": [0.01], "materials": [{"eps_r": 4.0, "sigma": 0.0}]},
            "sigma_region": 0, "h_target": 0.01}"#,
    );
    let out = dir.path().join("out");
    let o = tevie(&["mesh", "--config", cfg.to_str().unwrap()], &out);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = csv_rows(&out.join("mesh_stats.csv"));
    let get = |n: &str| column(&rows, n)[0].parse::<usize>().unwrap();
    let (v, t, e) = (get("n_vertices"), get("n_triangles"), get("n_rwg"));
    // Euler on a disk: V - E + T = 1 with E = interior + boundary edges.
    let boundary = 3 * t - 2 * e;
    assert_eq!(v + t, 1 + e + boundary);
}

#[test]
fn coarse_solve_writes_every_artifact() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let o = tevie(&solve_args(&[]), &out);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["fields.csv", "fields.svg", "summary.csv", "config.json"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let text = fs::read_to_string(out.join("fields.csv")).unwrap();
    assert!(text.starts_with("# tevie "));
    let rows = csv_rows(&out.join("fields.csv"));
    assert_eq!(rows.len(), 361);
    assert_eq!(rows[0].len(), 9);
    assert_eq!(rows[0][0], "phi_deg");
    for r in &rows[1..] {
        assert!(r.iter().all(|v| v.parse::<f64>().unwrap().is_finite()));
    }
    let s = csv_rows(&out.join("summary.csv"));
    let err: f64 = column(&s, "relative_error")[0].parse().unwrap();
    assert!(err > 0.0 && err < 0.5, "{err}");
    assert_eq!(column(&s, "converged"), ["true"]);
    let svg = fs::read_to_string(out.join("fields.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 4);

    // No stray temp files once the renames are done.
    let names: Vec<String> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert_eq!(names.len(), 4, "{names:?}");
}

#[test]
fn reruns_are_byte_identical_without_timestamps() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = tevie(&solve_args(&["--no-timestamp"]), out);
        assert!(o.status.success());
    }
    for f in ["fields.csv", "summary.csv", "fields.svg"] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
    assert!(fs::read_to_string(a.join("summary.csv"))
        .unwrap()
        .starts_with("N,"));
}

#[test]
fn non_convergence_exits_3_and_still_writes() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let o = tevie(&solve_args(&["--max-iter", "3"]), &out);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let text = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert!(text.contains("# warning: solver stopped after 3 iterations"));
    assert_eq!(
        column(&csv_rows(&out.join("summary.csv")), "converged"),
        ["false"]
    );
    assert!(out.join("fields.csv").is_file());
}

#[test]
fn vacuum_solve_reports_exact_zero() {
    let dir = TempDir::new().unwrap();
    let cfg = config(
        &dir,
        r#"{"geometry": {"radii": [0.05, 0.1], "materials": [
            {"eps_r": 1.0, "sigma": 0.0}, {"eps_r": 1.0, "sigma": 0.0}]}, "h_target": 0.02}"#,
    );
    let out = dir.path().join("out");
    let o = tevie(&["solve", "--config", cfg.to_str().unwrap()], &out);
    assert!(o.status.success(), "{}", stderr(&o));
    let s = csv_rows(&out.join("summary.csv"));
    assert_eq!(column(&s, "relative_error"), [""]);
    assert_eq!(column(&s, "max_scattered"), ["0e0"]);
    assert!(fs::read_to_string(out.join("summary.csv"))
        .unwrap()
        .contains("reference field is zero"));
}

#[test]
fn single_level_sweeps_equal_the_solve() {
    let dir = TempDir::new().unwrap();
    let solve = dir.path().join("solve");
    assert!(tevie(&solve_args(&[]), &solve).status.success());
    let want = column(&csv_rows(&solve.join("summary.csv")), "relative_error");

    let sh = dir.path().join("sh");
    let o = tevie(&["sweep-h", "--h", "0.02"], &sh);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = csv_rows(&sh.join("sweep_h.csv"));
    assert_eq!(rows.len(), 2);
    assert_eq!(column(&rows, "relative_error"), want);
    assert!(sh.join("sweep_h.svg").is_file() && sh.join("sweep_h_iterations.svg").is_file());

    let ss = dir.path().join("ss");
    let mut args = vec!["sweep-sigma", "--sigma", "0,10"];
    args.extend(COARSE);
    let o = tevie(&args, &ss);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = csv_rows(&ss.join("sweep_sigma.csv"));
    assert_eq!(column(&rows, "sigma"), ["0e0", "1e1"]);
    assert_eq!(column(&rows, "relative_error")[0], want[0]);
    let it = column(&rows, "iterations");
    assert!(it[1].parse::<usize>().unwrap() > it[0].parse::<usize>().unwrap());
}

#[test]
fn sweep_levels_must_descend() {
    let dir = TempDir::new().unwrap();
    let o = tevie(&["sweep-h", "--h", "0.02,0.05"], &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    let o = tevie(&["sweep-sigma", "--sigma", "1,-1"], &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn mie_vacuum_rows_are_zero() {
    let dir = TempDir::new().unwrap();
    let cfg = config(
        &dir,
        r#"{"geometry": {"radii": [0.05, 0.1], "materials": [
            {"eps_r": 1.0, "sigma": 0.0}, {"eps_r": 1.0, "sigma": 0.0}]}}"#,
    );
    let out = dir.path().join("out");
    let o = tevie(&["mie", "--config", cfg.to_str().unwrap()], &out);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = csv_rows(&out.join("mie.csv"));
    assert_eq!(rows.len(), 361);
    for r in &rows[1..] {
        assert!(
            r[1..].iter().all(|v| v.parse::<f64>().unwrap() == 0.0),
            "{r:?}"
        );
    }
}

#[test]
fn mie_default_is_finite_with_certificate() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let o = tevie(&["mie", "--obs-count", "72"], &out);
    assert!(o.status.success());
    assert!(stderr(&o).contains("tail ratio"));
    let text = fs::read_to_string(out.join("mie.csv")).unwrap();
    assert!(text
        .lines()
        .last()
        .unwrap()
        .starts_with("# series truncated"));
    let rows = csv_rows(&out.join("mie.csv"));
    assert_eq!(rows.len(), 73);
    let mut largest = 0.0f64;
    for r in &rows[1..] {
        for v in &r[1..] {
            let x: f64 = v.parse().unwrap();
            assert!(x.is_finite());
            largest = largest.max(x.abs());
        }
    }
    assert!(largest > 0.1);
}

#[test]
fn mie_rejects_interior_observation() {
    let dir = TempDir::new().unwrap();
    let o = tevie(&["mie", "--obs-radius", "0.05"], &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("observation.radius"));
}

#[test]
fn series_beyond_supported_order_is_a_numerical_failure() {
    let dir = TempDir::new().unwrap();
    let o = tevie(&["mie", "--frequency", "1e11"], &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}

#[test]
fn zero_threads_is_rejected() {
    let dir = TempDir::new().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_tevie"))
        .args(["mesh", "--threads", "0", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn shipped_configs_are_valid() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.extension().is_some_and(|x| x == "json") {
            tevie::experiment::RunConfig::from_json(&fs::read_to_string(&p).unwrap())
                .unwrap_or_else(|err| panic!("{}: {err}", p.display()));
            n += 1;
        }
    }
    assert!(n >= 3);
}
