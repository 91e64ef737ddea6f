use std::path::Path;
use std::process::{Command, Output};

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lv-optctl")).args(args).output().unwrap()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

#[test]
fn run_preset_a_converges() {
    let out = cli(&["run", "--preset", "A", "--n", "6"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("(converged)"), "{text}");
    assert!(text.contains("VI residual"));
}

#[test]
fn study_csv_is_ordered_and_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    for path in [&a, &b] {
        let out = cli(&["study", "--preset", "E1", "--meshes", "6,3,4", "--out", path.to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let (header, rows) = read_csv(&a);
    assert_eq!(header, ["n", "h", "intervals", "dist_y1", "dist_y2", "J", "iterations", "termination", "error"]);
    let h: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    assert_eq!(h.len(), 3);
    assert!(h.windows(2).all(|w| w[0] > w[1]));
    for r in &rows {
        let (d1, d2, j): (f64, f64, f64) = (r[3].parse().unwrap(), r[4].parse().unwrap(), r[5].parse().unwrap());
        assert!(d1 >= 0.0 && d2 >= 0.0 && j >= 0.0);
        assert_eq!(r[7], "converged");
    }
}

#[test]
fn dynamics_report_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = cli(&["dynamics", "--control", "0,0", "--control", "2,2", "--t-end", "20", "--out-dir", d]);
    assert!(out.status.success());
    let (_, fps) = read_csv(&dir.path().join("fixed_points.csv"));
    let at = |g: &str, y1: f64, y2: f64| {
        fps.iter().find(|r| {
            r[0] == g && (r[2].parse::<f64>().unwrap() - y1).abs() < 1e-2 && (r[3].parse::<f64>().unwrap() - y2).abs() < 1e-2
        })
    };
    assert_eq!(at("0", 33.043, 19.583).unwrap()[7], "center-borderline");
    assert_eq!(at("0", 0.0, 0.0).unwrap()[7], "saddle");
    assert_eq!(at("2", 29.168, 22.440).unwrap()[7], "stable-spiral");
    let (_, traj) = read_csv(&dir.path().join("trajectories.csv"));
    assert_eq!(traj.len(), 2 * 201);
    assert_eq!(&traj[0][3..], ["16.1250000000", "24.0000000000"]);

    // no controls: only the uncontrolled kinetics
    let out = cli(&["dynamics", "--t-end", "1", "--out-dir", d]);
    assert!(out.status.success());
    let (_, fps) = read_csv(&dir.path().join("fixed_points.csv"));
    assert!(fps.iter().all(|r| r[0] == "0" && r[1] == "0"));
}

/// Minimal legacy-VTK reader: point and cell counts, cell connectivity and
/// named point scalars.
struct Vtk {
    points: Vec<[f64; 3]>,
    cells: Vec<Vec<usize>>,
    cell_types: Vec<u32>,
    scalars: Vec<(String, Vec<f64>)>,
}

fn parse_vtk(text: &str) -> Vtk {
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# vtk DataFile Version"));
    lines.next();
    assert_eq!(lines.next().unwrap(), "ASCII");
    assert_eq!(lines.next().unwrap(), "DATASET UNSTRUCTURED_GRID");
    let mut tokens = lines.flat_map(str::split_whitespace).peekable();
    let mut next = |expect: Option<&str>| {
        let t = tokens.next().expect("truncated file");
        if let Some(e) = expect {
            assert_eq!(t, e);
        }
        t
    };
    let num = |t: &str| t.parse::<f64>().unwrap();
    let int = |t: &str| t.parse::<usize>().unwrap();

    next(Some("POINTS"));
    let np = int(next(None));
    next(Some("double"));
    let points = (0..np).map(|_| [num(next(None)), num(next(None)), num(next(None))]).collect();
    next(Some("CELLS"));
    let nc = int(next(None));
    let size = int(next(None));
    let mut cells: Vec<Vec<usize>> = Vec::with_capacity(nc);
    for _ in 0..nc {
        let k = int(next(None));
        cells.push((0..k).map(|_| int(next(None))).collect());
    }
    assert_eq!(cells.iter().map(|c| c.len() + 1).sum::<usize>(), size);
    next(Some("CELL_TYPES"));
    assert_eq!(int(next(None)), nc);
    let cell_types = (0..nc).map(|_| int(next(None)) as u32).collect();
    next(Some("POINT_DATA"));
    assert_eq!(int(next(None)), np);
    let mut scalars = Vec::new();
    drop(next);
    while let Some(kw) = tokens.next() {
        assert_eq!(kw, "SCALARS");
        let name = tokens.next().unwrap().to_string();
        assert_eq!(tokens.next(), Some("double"));
        assert_eq!(tokens.next(), Some("1"));
        assert_eq!(tokens.next(), Some("LOOKUP_TABLE"));
        tokens.next();
        let values = (0..np).map(|_| num(tokens.next().unwrap())).collect();
        scalars.push((name, values));
    }
    Vtk {
        points,
        cells,
        cell_types,
        scalars,
    }
}

#[test]
fn export_snapshots_and_vtk() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = cli(&["export", "--preset", "A", "--n", "6", "--times", "0,0.1", "--vtk", "--out-dir", d]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = read_csv(&dir.path().join("y1_0000.csv"));
    assert_eq!(header, ["x1", "x2", "value"]);
    let corner = rows.iter().find(|r| r[0] == "1.00000000" && r[1] == "1.00000000").unwrap();
    assert_eq!(corner[2].parse::<f64>().unwrap(), 16.5);

    let text = std::fs::read_to_string(dir.path().join("fields_0001.vtk")).unwrap();
    let vtk = parse_vtk(&text);
    assert_eq!(vtk.cells.len(), 2 * 6 * 6);
    assert_eq!(vtk.points.len(), 7 * 7);
    assert!(vtk.cell_types.iter().all(|&t| t == 5));
    assert!(vtk.cells.iter().flatten().all(|&i| i < vtk.points.len()));
    let names: Vec<&str> = vtk.scalars.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(names, ["y1", "y2", "mu1", "mu2", "g1", "g2"]);
    // Dirichlet states vanish on the boundary after the first step
    let y1 = &vtk.scalars[0].1;
    for (p, v) in vtk.points.iter().zip(y1) {
        if p[0] == 0.0 || p[1] == 1.0 {
            assert_eq!(*v, 0.0);
        }
    }
}

#[test]
fn export_rough_initial_data() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = cli(&["export", "--preset", "D", "--n", "8", "--times", "0", "--no-optimize", "--out-dir", d]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (_, rows) = read_csv(&dir.path().join("y1_0000.csv"));
    let mut inside = 0;
    for r in &rows {
        let (x, y, v): (f64, f64, f64) = (r[0].parse().unwrap(), r[1].parse().unwrap(), r[2].parse().unwrap());
        let r2 = (x - 0.5).powi(2) + (y - 0.5).powi(2);
        if r2 < 1.0 / 16.0 {
            assert_eq!(v, 10.0);
            inside += 1;
        } else if r2 > 1.0 / 16.0 {
            assert_eq!(v, 1.0);
        }
    }
    assert!(inside > 0);
    // Robin controls live on the boundary nodes only
    let (_, g) = read_csv(&dir.path().join("g1_0000.csv"));
    assert_eq!(g.len(), 4 * 8);
}

#[test]
fn self_checks_pass() {
    for cmd in ["gradient-check", "second-order-check"] {
        let out = cli(&[cmd, "--seed", "3"]);
        let text = String::from_utf8(out.stdout).unwrap();
        assert!(out.status.success(), "{text}");
        assert_eq!(text.matches("PASS").count(), 2, "{text}");
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[model]\ncontrol = \"neumann\"\n").unwrap();
    let out = cli(&["run", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let out = cli(&["run", "--config", dir.path().join("missing.toml").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    // the diagonal adjoint fails the strict gradient check
    let out = cli(&["gradient-check", "--kind", "robin", "--adjoint", "diagonal"]);
    assert_eq!(out.status.code(), Some(1));
    let blowup = dir.path().join("blowup.toml");
    std::fs::write(&blowup, "[model]\na = 300.0\nb = 0.0\nforcing = false\n[discretization]\nmeshes = [2]\ntau_divisor = 100.0\n").unwrap();
    let out = cli(&["run", "--config", blowup.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
}
