use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn hopflax(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hopflax")).args(args).output().unwrap()
}

fn sample(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("problems").join(name)
}

fn write(dir: &Path, body: &str) -> String {
    let p = dir.join("p.toml");
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn sample_problems_run() {
    for (file, cmd) in [
        ("concave_kink.toml", "solve"),
        ("concave_kink.toml", "characteristics"),
        ("convex_kink.toml", "verify"),
        ("cosine.toml", "regularity"),
        ("cosine.toml", "conjugate"),
        ("terminal_kink.toml", "roundtrip"),
    ] {
        let out = hopflax(&[cmd, "--problem", sample(file).to_str().unwrap()]);
        assert!(out.status.success(), "{cmd} {file}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(!out.stdout.is_empty());
    }
}

#[test]
fn writes_to_out_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("u.csv");
    let status = hopflax(&[
        "solve",
        "--problem",
        sample("concave_kink.toml").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(status.status.success());
    let text = std::fs::read_to_string(out).unwrap();
    assert!(text.starts_with("t,x,u,u_t,u_x,singleton,status\n"));
    assert!(text.contains("1.0000000000000000e0,0.0000000000000000e0,-5.0000000000000000e-1,,,false,kink"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let base = "sigma = \"-abs(x)\"\nhorizon = 1.0\n";
    let cases = [
        (format!("hamiltonian = \"sin(p)\"\n{base}"), 2),
        (format!("hamiltonian = \"0.5*p^\"\n{base}"), 1),
        ("hamiltonian = \"0.5*p^2\"\nsigma = \"-abs(x)\"\nhorizon = 0.0\n".to_string(), 1),
        ("hamiltonian = \"0.5*p^2\"\nsigma = \"-0.5*x^2\"\nhorizon = 1.0\n[queries]\npoints = [[1.0, 0.5]]\n".to_string(), 3),
    ];
    for (body, code) in cases {
        let p = write(dir.path(), &body);
        let out = hopflax(&["solve", "--problem", &p]);
        assert_eq!(out.status.code(), Some(code), "{body}: {}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(hopflax(&["solve", "--bogus"]).status.code(), Some(1));
    assert_eq!(hopflax(&["solve", "--problem", "/nonexistent.toml"]).status.code(), Some(1));
}

#[test]
fn empty_point_list_gives_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(
        dir.path(),
        "hamiltonian = \"0.5*p^2\"\nsigma = \"abs(x)\"\nhorizon = 1.0\n[queries]\npoints = []\n",
    );
    let out = hopflax(&["solve", "--problem", &p]);
    assert_eq!(out.stdout, b"t,x,u,u_t,u_x,singleton,status\n");
}
