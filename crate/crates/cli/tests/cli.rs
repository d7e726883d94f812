use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn koopman(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_koopman")).args(args).env("RUST_LOG", "warn").output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("run.conf");
    fs::write(&path, text).unwrap();
    path
}

fn run(sub: &str, cfg: &Path, out: &Path) -> Output {
    koopman(&[sub, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
}

fn presets() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

const TRANSLATION: &str = "\
[flow]
name = translation
[partition]
dims = 64
[spectral]
tau = 0.125
observable = obs_fourier
quad_points = 2
alpha = 0.1
bands = -1:1, 5:7
";

#[test]
fn density_writes_spectrum_and_density() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TRANSLATION);
    let out = dir.path().join("out");
    let o = run("density", &cfg, &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let spectrum = fs::read_to_string(out.join("spectrum.csv")).unwrap();
    assert!(spectrum.starts_with("omega,weight,cycle_len,harmonic\n"));
    let total: f64 = spectrum.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse::<f64>().unwrap()).sum();
    // Two-point midpoint average of e^{2 pi i x} over a cell of width 1/64.
    let h = std::f64::consts::PI / 64.0;
    let norm = (h.sin() / (2.0 * (h / 2.0).sin())).powi(2);
    assert!((total - norm).abs() < 1e-10, "total weight {total}, expected {norm}");
    assert!(fs::read_to_string(out.join("density.csv")).unwrap().starts_with("omega,rho\n"));
}

#[test]
fn project_writes_one_file_per_band() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TRANSLATION);
    let out = dir.path().join("out");
    let o = run("project", &cfg, &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let written = String::from_utf8(o.stdout).unwrap().lines().filter(|l| l.starts_with("wrote")).count();
    assert_eq!(written, 2);
    for k in 0..2 {
        assert!(out.join(format!("projection_{k}.csv")).exists());
    }
}

#[test]
fn upwind_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[upwind]\nr = 2\nw = 2\ngamma = 0.75, 1.25\nn = 3\n");
    let out = dir.path().join("out");
    let o = run("upwind", &cfg, &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let eigs = fs::read_to_string(out.join("eigenvalues.csv")).unwrap();
    assert!(eigs.starts_with("j,kappa,re_lambda,im_lambda,gamma,n\n"));
    assert_eq!(eigs.lines().count(), 1 + 2 * 8);
}

#[test]
fn cache_then_reuse() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "flow.name = abc\npartition.dims = 8x8x8\nspectral.tau = 0.1\n");
    let out = dir.path().join("out");
    assert_eq!(run("cache", &cfg, &out).status.code(), Some(0));
    let first = fs::read(out.join("perm.kpax")).unwrap();
    assert_eq!(run("cache", &cfg, &out).status.code(), Some(0));
    assert_eq!(fs::read(out.join("perm.kpax")).unwrap(), first);
}

#[test]
fn corrupt_cache_exits_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "flow.name = abc\npartition.dims = 4x4x4\nspectral.tau = 0.1\n");
    let out = dir.path().join("out");
    fs::create_dir_all(&out).unwrap();
    fs::write(out.join("perm.kpax"), b"KPAX garbage").unwrap();
    assert_eq!(run("cache", &cfg, &out).status.code(), Some(3));
}

#[test]
fn config_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let unknown = write_config(dir.path(), "flow.name = translation\nspectral.tua = 0.1\n");
    assert_eq!(run("density", &unknown, &out).status.code(), Some(2));
    // Band beyond the resolvable bandwidth pi/tau.
    let band = write_config(dir.path(), "spectral.tau = 1\nspectral.bands = 0:4\n");
    assert_eq!(run("project", &band, &out).status.code(), Some(2));
    let chain = write_config(dir.path(), "convergence.levels = 16@0.2, 16@0.1\n");
    assert_eq!(run("convergence", &chain, &out).status.code(), Some(2));
}

#[test]
fn bad_arguments_are_rejected() {
    assert_eq!(koopman(&["density"]).status.code(), Some(2));
    assert_eq!(koopman(&["nonsense"]).status.code(), Some(2));
}

#[test]
fn same_seed_reproduces_matching() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "flow.name = abc\npartition.dims = 4x4x4\npartition.method = matching\nspectral.tau = 0.1\n",
    );
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let args = |o: &Path, seed: &'static str| {
        koopman(&["cache", "--config", cfg.to_str().unwrap(), "--out", o.to_str().unwrap(), "--seed", seed, "--workers", "2"])
    };
    assert_eq!(args(&a, "11").status.code(), Some(0));
    assert_eq!(args(&b, "11").status.code(), Some(0));
    assert_eq!(fs::read(a.join("perm.kpax")).unwrap(), fs::read(b.join("perm.kpax")).unwrap());
}

#[test]
fn presets_parse() {
    for entry in fs::read_dir(presets()).unwrap() {
        let path = entry.unwrap().path();
        let text = fs::read_to_string(&path).unwrap();
        koopman_core::io::RunConfig::parse(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    }
}
