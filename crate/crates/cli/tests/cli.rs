use serde_json::Value;
use std::path::Path;
use std::process::{Command, Output};

fn kiteflow(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kiteflow"))
        .current_dir(dir)
        .env_remove("KITEFLOW_SEED")
        .args(args)
        .output()
        .unwrap()
}

fn read(dir: &Path, name: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join(name)).unwrap()).unwrap()
}

fn error_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stderr).expect("stderr is JSON")
}

/// SG graph plus a boundary file with a smooth non-constant boundary.
fn setup(dir: &Path, n: usize) -> usize {
    let nn = n.to_string();
    let out = kiteflow(dir, &["gen", "sg", "--n", &nn, "--m", &nn, "-o", "g.json"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let nw = read(dir, "g.json")["white"].as_array().unwrap().len();
    let r: Vec<f64> = (0..nw).map(|v| 1.0 + 0.2 * (v as f64).sin()).collect();
    std::fs::write(dir.join("b.json"), serde_json::json!({ "r": r }).to_string()).unwrap();
    nw
}

#[test]
fn gen_writes_a_graph_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = kiteflow(dir.path(), &["gen", "sg", "--n", "2", "--m", "2", "--alpha", "1.2", "-o", "g.json"]);
    assert_eq!(out.status.code(), Some(0));
    let g = read(dir.path(), "g.json");
    assert_eq!(g["quads"].as_array().unwrap().len(), 4);
    assert!(g["alpha"].as_array().unwrap().iter().all(|a| a.as_f64() == Some(1.2)));
}

#[test]
fn missing_input_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = kiteflow(dir.path(), &["solve", "-g", "absent.json", "-b", "b.json", "-o", "r.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_json(&out)["error"], "IOError");
    assert!(!dir.path().join("r.json").exists());
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(kiteflow(dir.path(), &["solve", "--bogus"]).status.code(), Some(2));
    assert_eq!(kiteflow(dir.path(), &["nonsense"]).status.code(), Some(2));
    assert_eq!(kiteflow(dir.path(), &["gen", "sg", "--n", "x", "--m", "2", "-o", "g.json"]).status.code(), Some(2));
}

#[test]
fn domain_errors_are_reported_as_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = kiteflow(dir.path(), &["gen", "sg", "--n", "2", "--m", "2", "--alpha", "4", "-o", "g.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_json(&out)["error"], "AngleOutOfRange");

    std::fs::write(dir.path().join("bad.json"), "{not json").unwrap();
    let out = kiteflow(dir.path(), &["layout", "-g", "bad.json", "-r", "bad.json", "-o", "p.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_json(&out)["error"], "ParseError");
}

#[test]
fn solve_layout_map_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let nw = setup(d, 6);
    let out = kiteflow(d, &["solve", "-g", "g.json", "-b", "b.json", "-o", "r.json", "--tol", "1e-12"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = read(d, "r.json");
    assert_eq!(r["r"].as_array().unwrap().len(), nw);

    let out = kiteflow(d, &["layout", "-g", "g.json", "-r", "r.json", "-o", "p.json", "--svg", "p.svg"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let p = read(d, "p.json");
    assert_eq!(p["radius"], r["r"]);
    assert!(std::fs::read_to_string(d.join("p.svg")).unwrap().contains("<svg"));

    let c0 = &p["center"][0];
    let pts = serde_json::json!([[c0[0], c0[1]]]);
    std::fs::write(d.join("pts.json"), pts.to_string()).unwrap();
    let out =
        kiteflow(d, &["map", "-s", "p.json", "-t", "p.json", "--eval", "pts.json", "--dilatation", "-o", "m.json"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let m = read(d, "m.json");
    assert_eq!(m["images"][0], pts[0]);
    assert!((m["dilatation"]["max"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn boundary_radii_survive_bit_for_bit() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    setup(d, 4);
    assert_eq!(kiteflow(d, &["solve", "-g", "g.json", "-b", "b.json", "-o", "r.json"]).status.code(), Some(0));
    let given = read(d, "b.json");
    let solved = read(d, "r.json");
    let (graph, _) = kiteflow::bquad::load_bquad(&d.join("g.json")).unwrap();
    let g = graph.white_graph();
    for v in 0..g.n {
        if g.boundary[v] {
            assert_eq!(solved["r"][v].as_f64().unwrap().to_bits(), given["r"][v].as_f64().unwrap().to_bits());
        }
    }
}

#[test]
fn network_queries() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let nw = setup(d, 6);
    assert_eq!(kiteflow(d, &["solve", "-g", "g.json", "-b", "b.json", "-o", "r.json"]).status.code(), Some(0));
    std::fs::write(d.join("a.json"), "[0]").unwrap();
    std::fs::write(d.join("z.json"), format!("[{}]", nw - 1)).unwrap();

    let out = kiteflow(d, &["net", "-g", "g.json", "-r", "r.json", "--reff", "a.json", "z.json"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["reff"].as_f64().unwrap() > 0.0);

    let out = kiteflow(d, &["net", "-g", "g.json", "--vel", "a.json", "z.json", "-o", "vel.json"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = read(d, "vel.json");
    assert!(v["min_path_length"].as_f64().unwrap() >= 1.0 - 1e-6);

    // without conductances only the path modulus is available
    let out = kiteflow(d, &["net", "-g", "g.json", "--reff", "a.json", "z.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_json(&out)["error"], "InvalidInput");
}

#[test]
fn constants_and_tau() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = kiteflow(d, &["constants", "--alpha0", "1.5707963267948966", "--n", "1", "--c1", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let c: Value = serde_json::from_slice(&out.stdout).unwrap();
    let c2 = 1.0 / (48.0 + 16.0 * std::f64::consts::PI.powi(2));
    assert!((c["c2"].as_f64().unwrap() - c2).abs() <= 1e-15);

    setup(d, 4);
    assert_eq!(kiteflow(d, &["solve", "-g", "g.json", "-b", "b.json", "-o", "r.json"]).status.code(), Some(0));
    assert_eq!(kiteflow(d, &["layout", "-g", "g.json", "-r", "r.json", "-o", "p.json"]).status.code(), Some(0));
    let out = kiteflow(d, &["tau", "-g", "g.json", "-p", "p.json", "--origin", "-100,-100"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let t: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(t["tau"].as_array().unwrap().iter().all(|x| x.as_f64().unwrap() < 0.1));
}

#[test]
fn hyperbolic_solve() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let nw = setup(d, 4);
    std::fs::write(d.join("h.json"), serde_json::json!({ "rho": vec![-0.5; nw] }).to_string()).unwrap();
    let out = kiteflow(d, &["hsolve", "-g", "g.json", "-b", "h.json", "-o", "ho.json"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let h = read(d, "ho.json");
    let kinds = h["kind"].as_array().unwrap();
    for (v, k) in kinds.iter().enumerate() {
        let rho = h["rho"][v].as_f64().unwrap();
        if k == "bnd" {
            assert_eq!(rho, -0.5);
        } else {
            assert!(rho < -0.5, "interior rho {rho}");
        }
    }
}

#[test]
fn seed_override_is_applied() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let args = ["rigidity", "--sizes", "4,6", "--replicates", "1", "--tgrid", "0,1", "-o"];
    let run = |out: &str, seed: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_kiteflow"));
        cmd.current_dir(d).env_remove("KITEFLOW_SEED").args(args).arg(out);
        if let Some(s) = seed {
            cmd.env("KITEFLOW_SEED", s);
        }
        assert_eq!(cmd.output().unwrap().status.code(), Some(0));
        read(d, out)
    };
    let base = run("a.json", None);
    let same = run("b.json", Some("7"));
    let other = run("c.json", Some("8"));
    assert_eq!(base["spec"]["seed"], 7);
    assert_eq!(base, same);
    assert_eq!(other["spec"]["seed"], 8);
    assert_ne!(base["rows"], other["rows"]);
}

#[test]
fn convergence_report_and_svg_dump() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::create_dir(d.join("svg")).unwrap();
    let out = kiteflow(
        d,
        &[
            "converge",
            "--domain",
            "disc",
            "--map",
            "moebius:0.3",
            "--levels",
            "4,8",
            "--sample-step",
            "0.1",
            "-o",
            "rep.json",
            "--svg-dir",
            "svg",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rep = read(d, "rep.json");
    assert_eq!(rep["rows"].as_array().unwrap().len(), 2);
    assert_eq!(rep["spec"]["map"], "moebius:0.3");
    for name in ["source_4.svg", "target_4.svg", "source_8.svg", "target_8.svg"] {
        assert!(d.join("svg").join(name).is_file());
    }
    let out = kiteflow(d, &["converge", "--map", "warp:1", "-o", "x.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_json(&out)["error"], "ParseError");
}
