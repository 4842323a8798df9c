use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_bergmann2d"));
    c.env_remove("BERGMANN2D_LOG");
    c
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().unwrap()
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

fn column(header: &[String], rows: &[Vec<String>], name: &str) -> Vec<f64> {
    let i = header.iter().position(|h| h == name).unwrap();
    rows.iter().map(|r| r[i].parse().unwrap()).collect()
}

fn error_report(out: &Output) -> serde_json::Value {
    serde_json::from_slice(out.stderr.trim_ascii()).unwrap()
}

#[test]
fn figure4_first_order_at_one_tenth() {
    let dir = tempfile::tempdir().unwrap();
    ok(&run_in(
        dir.path(),
        &["figures", "--which", "4", "--out-dir", "f"],
    ));
    let (h, rows) = read_csv(&dir.path().join("f/fig4.csv"));
    let kl = column(&h, &rows, "kl");
    let re = column(&h, &rows, "re_tau0m_o1");
    let i = kl.iter().position(|v| (v - 0.1).abs() < 1e-12).unwrap();
    assert!((re[i] - 0.748).abs() < 5e-4, "{}", re[i]);
    assert!(dir.path().join("f/fig4.svg").exists());
    assert!(!dir.path().join("f/fig3.csv").exists());
}

#[test]
fn all_figures_written() {
    let dir = tempfile::tempdir().unwrap();
    ok(&run_in(
        dir.path(),
        &["figures", "--out-dir", "f", "--samples", "40"],
    ));
    for n in [3, 4, 5, 7] {
        for ext in ["csv", "svg"] {
            let p = dir.path().join(format!("f/fig{n}.{ext}"));
            assert!(
                std::fs::metadata(&p).unwrap().len() > 100,
                "{}",
                p.display()
            );
        }
    }
    let (h, rows) = read_csv(&dir.path().join("f/fig7.csv"));
    for name in ["re_eps_minus", "re_eps_plus"] {
        assert!(column(&h, &rows, name)
            .iter()
            .all(|v| (v - 0.87).abs() < 0.005));
    }
    assert!(column(&h, &rows, "im_eps_plus").iter().all(|v| *v < 0.0));
    assert!(column(&h, &rows, "im_eps_minus").iter().all(|v| *v > 0.0));
}

#[test]
fn vacuum_amplitude_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let medium = configs().join("vacuum_medium.json");
    ok(&run_in(
        dir.path(),
        &[
            "amplitude",
            "--medium",
            medium.to_str().unwrap(),
            "--k",
            "0.3",
            "--theta0-deg",
            "-40",
            "--order",
            "2",
            "--out",
            "a.csv",
        ],
    ));
    for name in ["a.csv", "a_dirac.csv"] {
        let (_, rows) = read_csv(&dir.path().join(name));
        for row in &rows {
            assert!(row[1..].iter().all(|v| v.parse::<f64>().unwrap() == 0.0));
        }
    }
    let (_, rows) = read_csv(&dir.path().join("a.csv"));
    assert_eq!(rows.len(), 37);
}

#[test]
fn oracle_agrees_with_amplitude() {
    let dir = tempfile::tempdir().unwrap();
    let medium = configs().join("gaussian_medium.json");
    let m = medium.to_str().unwrap();
    let common = [
        "--medium",
        m,
        "--k",
        "0.1",
        "--theta0-deg",
        "30",
        "--order",
        "2",
        "--theta-grid",
        "9",
    ];
    let summary = ok(&run_in(
        dir.path(),
        &[&["oracle", "--nodes", "24", "--out", "o.csv"][..], &common].concat(),
    ));
    let rel: f64 = summary.split_whitespace().last().unwrap().parse().unwrap();
    assert!(rel < 1e-6, "{summary}");

    // The side-by-side table matches the amplitude subcommand's own output.
    ok(&run_in(
        dir.path(),
        &[&["amplitude", "--out", "a.csv"][..], &common].concat(),
    ));
    let (ho, ro) = read_csv(&dir.path().join("o.csv"));
    let (ha, ra) = read_csv(&dir.path().join("a.csv"));
    assert_eq!(column(&ho, &ro, "re_lowfreq"), column(&ha, &ra, "re_f"));
    let (re, im) = (column(&ho, &ro, "re_oracle"), column(&ho, &ro, "im_oracle"));
    let (fr, fi) = (column(&ha, &ra, "re_f"), column(&ha, &ra, "im_f"));
    let peak = fr
        .iter()
        .zip(&fi)
        .map(|(a, b)| a.hypot(*b))
        .fold(0.0, f64::max);
    for i in 0..re.len() {
        assert!((re[i] - fr[i]).hypot(im[i] - fi[i]) < 1e-6 * peak);
    }
}

#[test]
fn oracle_tolerance_override_is_enforced() {
    let dir = tempfile::tempdir().unwrap();
    let medium = configs().join("gaussian_medium.json");
    let out = run_in(
        dir.path(),
        &[
            "--tol-oracle",
            "1e-30",
            "oracle",
            "--medium",
            medium.to_str().unwrap(),
            "--k",
            "0.1",
            "--theta0-deg",
            "30",
            "--nodes",
            "16",
            "--theta-grid",
            "5",
            "--out",
            "o.csv",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    let report = error_report(&out);
    assert_eq!(report["error"], "ModuleError");
    assert_eq!(report["module_error"], "RouteMismatch");
    assert!(dir.path().join("o.csv").exists());
}

#[test]
fn brewster_channels() {
    let out = ok(&run_in(
        &configs(),
        &["grating", "--k", "2.5", "--brewster"],
    ));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.csv");
    std::fs::write(&path, &out).unwrap();
    let (h, rows) = read_csv(&path);
    let side = h.iter().position(|c| c == "side").unwrap();
    let j = column(&h, &rows, "j");
    let (t1, t2) = (column(&h, &rows, "re_tau1"), column(&h, &rows, "im_tau2"));
    let i = (0..rows.len())
        .find(|&i| j[i] == 0.0 && rows[i][side] == "-")
        .unwrap();
    assert!((t1[i] - 7.48).abs() < 0.005 && (t2[i] - 11.15).abs() < 0.005);
    let p = (0..rows.len())
        .find(|&i| j[i] == 0.0 && rows[i][side] == "+")
        .unwrap();
    assert!(t1[p].abs() < 1e-12 && t2[p].abs() < 1e-12);
}

#[test]
fn cloak_builtin_design() {
    let out = ok(&run_in(&configs(), &["--config", "cloak.json"]));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.csv");
    std::fs::write(&path, &out).unwrap();
    let (h, rows) = read_csv(&path);
    assert_eq!(rows.len(), 41);
    assert!(column(&h, &rows, "re_eps_minus")
        .iter()
        .all(|v| (v - 0.87).abs() < 0.005));
    assert!(column(&h, &rows, "feasible").iter().all(|v| *v == 1.0));
    for r in ["residual_1", "residual_2"] {
        assert!(column(&h, &rows, r).iter().all(|v| *v < 1e-8));
    }
    let y = column(&h, &rows, "y");
    assert_eq!((y[0], y[40]), (-30.0, 30.0));
}

#[test]
fn cloak_from_json_layers() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("slab.json"),
        r#"{"ell_star":0.5,"profile":{"kind":"uniform","eps":[0.6,0.0],"L":2}}"#,
    )
    .unwrap();
    std::fs::write(
        dir.path().join("layers.json"),
        r#"{"kind":"constant","minus":0.3,"plus":0.3}"#,
    )
    .unwrap();
    let out = ok(&run_in(
        dir.path(),
        &[
            "cloak",
            "--slab",
            "slab.json",
            "--layers",
            "layers.json",
            "--sigma",
            "+",
            "--y-samples",
            "3",
        ],
    ));
    assert_eq!(out.lines().count(), 4);
}

#[test]
fn byte_identical_reruns() {
    let medium = configs().join("gaussian_medium.json");
    let args = [
        "amplitude",
        "--medium",
        medium.to_str().unwrap(),
        "--k",
        "0.2",
        "--theta0-deg",
        "15",
        "--order",
        "2",
    ];
    let a = ok(&run_in(&configs(), &args));
    let b = ok(&run_in(
        &configs(),
        &[&["--threads", "1"][..], &args].concat(),
    ));
    assert_eq!(a, b);
    let f = ["grating", "--figure", "5", "--samples", "60"];
    assert_eq!(ok(&run_in(&configs(), &f)), ok(&run_in(&configs(), &f)));
}

#[test]
fn every_example_config_round_trips() {
    let mut seen = 0;
    for entry in std::fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        let text = std::fs::read_to_string(&path).unwrap();
        if !text.contains("\"command\"") {
            continue;
        }
        let first = ok(&run_in(
            &configs(),
            &["--config", path.to_str().unwrap(), "--print-config"],
        ));
        let dir = tempfile::tempdir().unwrap();
        let copy = dir.path().join("c.json");
        std::fs::write(&copy, &first).unwrap();
        let second = ok(&run_in(
            &configs(),
            &["--config", copy.to_str().unwrap(), "--print-config"],
        ));
        assert_eq!(first, second, "{}", path.display());
        seen += 1;
    }
    assert_eq!(seen, 6);
}

#[test]
fn flags_and_config_agree() {
    let from_flags = ok(&run_in(
        &configs(),
        &["--print-config", "grating", "--k", "2.5", "--brewster"],
    ));
    let from_file = ok(&run_in(
        &configs(),
        &["--config", "grating_brewster.json", "--print-config"],
    ));
    assert_eq!(from_flags, from_file);
}

#[test]
fn failures_emit_json_reports() {
    let out = run_in(
        &configs(),
        &[
            "amplitude",
            "--medium",
            "missing.json",
            "--k",
            "1",
            "--theta0-deg",
            "0",
        ],
    );
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(error_report(&out)["error"], "IoError");

    let out = run_in(&configs(), &["amplitude", "--k", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_report(&out)["error"], "ConfigInvalid");

    let out = run_in(&configs(), &["--tol-quad", "-1", "selftest"]);
    assert_eq!(out.status.code(), Some(2));

    let out = run_in(&configs(), &["grating", "--z0", "3+0.5i", "--figure", "4"]);
    assert_eq!(out.status.code(), Some(1));
    let report = error_report(&out);
    assert_eq!(report["module_error"], "NonRealZ0");
}

#[test]
fn selftest_passes() {
    let out = ok(&run_in(
        &configs(),
        &["--seed", "11", "selftest", "--cases", "6"],
    ));
    assert_eq!(out.matches("PASS").count(), 4, "{out}");
}
