use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn ofpc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ofpc")).args(args).output().expect("binary runs")
}

fn core_file(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core").join(rel)
}

fn demo_source() -> String {
    core_file("dsl/wave_advance.fk").display().to_string()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.display().to_string()
}

fn path(p: PathBuf) -> String {
    p.display().to_string()
}

#[test]
fn check_accepts_the_demo_silently() {
    let o = ofpc(&["check", &demo_source()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(stdout(&o), "");
}

#[test]
fn check_reports_inout() {
    let tmp = TempDir::new().unwrap();
    let src = fs::read_to_string(demo_source())
        .unwrap()
        .replace("intent(out) :: oH,oU,oV", "intent(inout) :: oH\n  intent(out) :: oU,oV");
    assert!(src.contains("intent(inout)"));
    let file = write_config(tmp.path(), "bad.fk", &src);
    let o = ofpc(&["check", &file]);
    assert_eq!(code(&o), 1);
    let lines: Vec<String> = stdout(&o).lines().map(str::to_string).collect();
    assert_eq!(lines.len(), 1, "{lines:?}");
    assert!(lines[0].contains("error R1"), "{}", lines[0]);
}

#[test]
fn check_missing_file_is_an_io_error() {
    assert_eq!(code(&ofpc(&["check", "/nonexistent/kernel.fk"])), 2);
}

#[test]
fn emit_matches_golden_and_is_stable() {
    let tmp = TempDir::new().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let o = ofpc(&["emit", &demo_source(), "--group", "16x8", "-o", &path(dir.clone())]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    let first = fs::read(a.join("wave_advance.cl")).unwrap();
    assert_eq!(first, fs::read(b.join("wave_advance.cl")).unwrap());
    assert_eq!(first, fs::read(core_file("tests/golden/wave_advance_16x8_f32.cl")).unwrap());
}

#[test]
fn emit_rejects_empty_group() {
    let tmp = TempDir::new().unwrap();
    let o = ofpc(&["emit", &demo_source(), "--group", "0x8", "-o", &path(tmp.path().into())]);
    assert_eq!(code(&o), 2);
}

fn read_dir_file(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn zero_steps_leave_the_initial_state() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "cfg.txt", "nx = 16\nny = 16\nsteps = 0\n");
    let out = tmp.path().join("run");
    let o = ofpc(&["run", &cfg, "--engine", "ref", "-o", &path(out.clone())]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for f in ["h", "u", "v"] {
        assert_eq!(read_dir_file(&out, &format!("{f}.csv")), read_dir_file(&out, &format!("{f}_initial.csv")));
    }
    assert_eq!(read_dir_file(&out, "diagnostics.csv").lines().count(), 2);
    assert!(stdout(&o).contains("mean step"));
}

#[test]
fn sim_and_ref_runs_write_identical_fields_and_compare_clean() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "cfg.txt", "# standard case\nnx = 64\nny = 64\nsteps = 20\ngroup = 16x8\n");
    let (a, b) = (tmp.path().join("sim"), tmp.path().join("ref"));
    for (engine, dir) in [("sim", &a), ("ref", &b)] {
        let o = ofpc(&["run", &cfg, "--engine", engine, "--checked", "-o", &path(dir.clone())]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    for f in ["h.csv", "u.csv", "v.csv"] {
        assert_eq!(read_dir_file(&a, f), read_dir_file(&b, f));
    }
    assert_eq!(code(&ofpc(&["compare", &path(a.clone()), &path(b), "--rtol", "0"])), 0);
    assert_eq!(code(&ofpc(&["compare", &path(a.clone()), &path(a)])), 0);
}

#[test]
fn indivisible_interior_is_a_domain_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "cfg.txt", "nx = 30\nny = 30\ngroup = 16x8\nsteps = 1\n");
    let o = ofpc(&["run", &cfg, "--engine", "sim", "-o", &path(tmp.path().join("out"))]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("not divisible by work-group 16x8"), "{}", stderr(&o));
}

#[test]
fn compare_reports_a_perturbed_cell() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "cfg.txt", "nx = 16\nny = 16\nsteps = 3\n");
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_eq!(code(&ofpc(&["run", &cfg, "--engine", "native", "-o", &path(a.clone())])), 0);
    fs::create_dir_all(&b).unwrap();
    for f in ["h.csv", "u.csv", "v.csv"] {
        fs::copy(a.join(f), b.join(f)).unwrap();
    }
    // row y = 5 is line 6 after the header; bump cell x = 7
    let text = read_dir_file(&b, "h.csv");
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    let mut cells: Vec<f64> = lines[6].split(',').map(|v| v.parse().unwrap()).collect();
    cells[7] += 1e-3;
    lines[6] = cells.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(",");
    fs::write(b.join("h.csv"), lines.join("\n") + "\n").unwrap();

    let o = ofpc(&["compare", &path(a), &path(b), "--rtol", "1e-6"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("h at (7,5)"), "{}", stderr(&o));
}

#[test]
fn compare_shape_mismatch_is_a_usage_error() {
    let tmp = TempDir::new().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let small = write_config(tmp.path(), "s.txt", "nx = 8\nny = 8\nsteps = 0\n");
    let large = write_config(tmp.path(), "l.txt", "nx = 16\nny = 8\nsteps = 0\n");
    assert_eq!(code(&ofpc(&["run", &small, "--engine", "native", "-o", &path(a.clone())])), 0);
    assert_eq!(code(&ofpc(&["run", &large, "--engine", "native", "-o", &path(b.clone())])), 0);
    assert_eq!(code(&ofpc(&["compare", &path(a), &path(b)])), 2);
}

#[test]
fn single_precision_sim_tracks_double_native() {
    let tmp = TempDir::new().unwrap();
    let f32_cfg = write_config(tmp.path(), "f32.txt", "nx = 64\nny = 64\nsteps = 10\nprecision = f32\n");
    let f64_cfg = write_config(tmp.path(), "f64.txt", "nx = 64\nny = 64\nsteps = 10\n");
    let (a, b) = (tmp.path().join("sim32"), tmp.path().join("native"));
    assert_eq!(code(&ofpc(&["run", &f32_cfg, "--engine", "sim", "-o", &path(a.clone())])), 0);
    assert_eq!(code(&ofpc(&["run", &f64_cfg, "--engine", "native", "-o", &path(b.clone())])), 0);
    let o = ofpc(&["compare", &path(a), &path(b), "--rtol", "1e-4"]);
    assert_eq!(code(&o), 0, "{}{}", stdout(&o), stderr(&o));
}

fn bench_rows(o: &Output) -> Vec<(usize, String, f64)> {
    let out = stdout(o);
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("size,engine,mean_step_ms"));
    lines
        .map(|l| {
            let p: Vec<&str> = l.split(',').collect();
            (p[0].parse().unwrap(), p[1].to_string(), p[2].parse().unwrap())
        })
        .collect()
}

#[test]
fn bench_prints_one_row_per_size_and_engine() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "cfg.txt", "steps = 2\n");
    let o = ofpc(&["bench", &cfg, "--sizes", "16,32,64", "--engines", "ref,sim", "--repeats", "1"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = bench_rows(&o);
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().all(|r| r.2.is_finite() && r.2 > 0.0));
}

#[test]
fn sim_step_time_grows_with_size() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "cfg.txt", "steps = 2\n");
    let o = ofpc(&["bench", &cfg, "--sizes", "64,128,256", "--engines", "sim", "--repeats", "5"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let t: Vec<f64> = bench_rows(&o).iter().map(|r| r.2).collect();
    assert!(t[0] < t[1] && t[1] < t[2], "{t:?}");
}
