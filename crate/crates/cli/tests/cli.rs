use std::path::PathBuf;
use std::process::{Command, Output};

fn horndeski(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_horndeski")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).expect("valid JSON report")
}

fn golden_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

/// Compare against a stored report; `UPDATE_GOLDENS=1` rewrites it.
fn check_golden(name: &str, actual: &str) {
    let path = golden_path(name);
    if std::env::var_os("UPDATE_GOLDENS").is_some() {
        std::fs::write(&path, actual).unwrap();
        return;
    }
    let expected = std::fs::read_to_string(&path).unwrap_or_else(|_| panic!("missing golden {}", path.display()));
    assert_eq!(actual, expected, "report differs from {}", path.display());
}

fn temp_file(name: &str, contents: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("horndeski-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let p = dir.join(name);
    std::fs::write(&p, contents).unwrap();
    p
}

#[test]
fn derive_golden_and_vanishing_scalar_second_momenta() {
    let o = horndeski(&["derive", "--g2", "0", "--g3", "0", "--points", "1", "--seed", "7"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = json(&o);
    assert_eq!(r["schema"], "horndeski-report/1");
    let table = r["sections"]["legendre"]["pphi_second"].as_array().unwrap();
    assert_eq!(table.len(), 10);
    assert!(table.iter().all(|e| e["text"] == "0"));
    assert_eq!(r["sections"]["projectability"]["projects"], true);
    check_golden("derive_0_0.json", &stdout(&o));
}

#[test]
fn x_dependent_g3_warns_about_projectability() {
    let o = horndeski(&["derive", "--g3", "X", "--points", "1", "--emit", "text"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("Projects to J1: false"), "{text}");
    assert!(text.contains("warning: G3 depends on X"), "{text}");
}

#[test]
fn same_seed_gives_identical_reports() {
    let args = ["derive", "--g2", "X*phi", "--g3", "phi^2", "--points", "2", "--seed", "42"];
    let (a, b) = (horndeski(&args), horndeski(&args));
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let c = horndeski(&["derive", "--g2", "X*phi", "--g3", "phi^2", "--points", "2", "--seed", "43"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn constraint_census() {
    let o = horndeski(&["constraints"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = json(&o);
    assert_eq!(r["sections"]["ladder"]["census"], serde_json::json!([110, 44, 11, 44]));
    let stages = r["sections"]["ladder"]["stages"].as_array().unwrap();
    assert_eq!(stages[2]["momentum_free"], true);
    assert!(stages[2]["max_order"].as_u64().unwrap() <= 2);
    assert!(stages[3]["max_order"].as_u64().unwrap() <= 3);
}

#[test]
fn particular_case_refuses_x_dependent_g3() {
    let o = horndeski(&["hamiltonian", "--g3", "X", "--case", "particular"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("projectability obstruction"), "{}", stderr(&o));
    assert!(o.stdout.is_empty());
}

#[test]
fn singular_inversion_is_inapplicable() {
    let o = horndeski(&["hamiltonian", "--g2=-X", "--g3", "0"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn verify_defaults_pass_with_tiny_residual() {
    let o = horndeski(&["verify"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = json(&o);
    let v = &r["sections"]["verification"];
    assert_eq!(v["passed"], true);
    assert!(v["max_residual"].as_f64().unwrap() < 1e-10);
    check_golden("verify_default.txt", &stdout(&horndeski(&["verify", "--emit", "text", "--points", "1"])));
}

#[test]
fn verify_failure_exits_4() {
    let o = horndeski(&["verify", "--tol", "1e-300", "--background", "minkowski+wave"]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    assert_eq!(json(&o)["sections"]["verification"]["passed"], false);
}

#[test]
fn parse_and_config_errors_exit_2() {
    assert_eq!(horndeski(&["derive", "--g2", "X +* phi"]).status.code(), Some(2));
    assert_eq!(horndeski(&["derive", "--g2", "Y"]).status.code(), Some(2));
    assert_eq!(horndeski(&["derive", "--kappa", "abc"]).status.code(), Some(2));
    assert_eq!(horndeski(&["derive", "--chart", "polar"]).status.code(), Some(2));
    assert_eq!(horndeski(&["verify", "--background", "desitter"]).status.code(), Some(2));
    let bad = temp_file("bad.cfg", "[run]\ncolour = red\n");
    let o = horndeski(&["derive", "--config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unknown key"));
}

#[test]
fn config_file_with_flag_override() {
    let cfg = temp_file("ok.cfg", "[lagrangian]\ng2 = \"X*phi\"\ng3 = phi\nkappa = 1/2\n\n[run]\nseed = 5\npoints = 1\nemit = text\n");
    let out = temp_file("report.json", "");
    let o = horndeski(&["derive", "--config", cfg.to_str().unwrap(), "--emit", "json", "--seed", "9", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(o.stdout.is_empty());
    let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(r["spec"]["g2"], "X*phi");
    assert_eq!(r["spec"]["kappa"], "1/2");
    assert_eq!(r["spec"]["seed"], 9);
    assert_eq!(r["spec"]["points"], 1);
}

#[test]
fn partial_chart_and_latex_emit() {
    let o = horndeski(&["derive", "--chart", "partial", "--emit", "latex", "--points", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let s = stdout(&o);
    assert!(s.contains("\\begin{align*}"));
    // First covariant and partial scalar derivatives coincide; higher ones must not appear.
    let higher = s.match_indices("phi_{;").any(|(i, _)| s[i + 6..].chars().take(2).all(|c| c.is_ascii_digit()));
    assert!(!higher, "partial chart leaked second covariant derivatives");
    assert!(!s.contains("p_\\\\phi"), "double escaped symbol");
}
