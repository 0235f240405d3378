use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn splint(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_splint")).args(args).output().expect("binary runs")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn bundled_fixtures_are_current() {
    for (name, text) in splint::fixtures::bundled_files().unwrap() {
        let on_disk = std::fs::read_to_string(fixture(name)).unwrap();
        assert_eq!(on_disk, text, "fixtures/{name} is stale; run the make_fixtures example");
    }
}

#[test]
fn intersect_two_lines() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let p = fixture("two_lines.json");
    let o = splint(&["intersect", "--patches", p.to_str().unwrap(), "--line", "0,1,0 1,0,0", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&out);
    assert_eq!(r["schema"], 1);
    let recs = r["records"].as_array().unwrap();
    assert_eq!(recs.len(), 1);
    assert!((recs[0]["xi"].as_f64().unwrap() - 2.0 / 3.0).abs() < 1e-9);
    assert!((recs[0]["theta"][0].as_f64().unwrap() - 2.0 / 3.0).abs() < 1e-9);
    for key in ["point", "patch_id", "multiplicity_hint", "self_intersection", "query"] {
        assert!(recs[0].get(key).is_some(), "missing {key}");
    }
}

#[test]
fn intersect_sphere_both_methods() {
    let p = fixture("sphere.json");
    let mut xis = Vec::new();
    for method in ["mrep", "subdivision"] {
        let o = splint(&["intersect", "--patches", p.to_str().unwrap(), "--line", "0.5,0.5,0 0.5,0.5,1", "--method", method]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let r: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
        let v: Vec<f64> = r["records"].as_array().unwrap().iter().map(|x| x["xi"].as_f64().unwrap()).collect();
        assert_eq!(v.len(), 2, "{method}");
        xis.push(v);
    }
    for (a, b) in xis[0].iter().zip(&xis[1]) {
        assert!((a - b).abs() < 1e-6);
    }
    let q = splint(&["intersect", "--patches", p.to_str().unwrap(), "--quadratic", "0.5,0.5,0 0.5,0.5,0.5 0.5,0.5,1"]);
    assert!(q.status.success());
    let r: serde_json::Value = serde_json::from_slice(&q.stdout).unwrap();
    assert_eq!(r["records"].as_array().unwrap().len(), 2);
}

#[test]
fn lattice_gen_and_solve() {
    let dir = tempfile::tempdir().unwrap();
    let truss = dir.path().join("truss.json");
    let stats = dir.path().join("stats.csv");
    let o = splint(&[
        "--threads",
        "2",
        "lattice-gen",
        "--patches",
        fixture("sphere.json").to_str().unwrap(),
        "--lattice",
        fixture("sphere_lattice.json").to_str().unwrap(),
        "--cell-type",
        "bcc",
        "--out",
        truss.to_str().unwrap(),
        "--report",
        stats.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut rdr = csv::Reader::from_path(&stats).unwrap();
    let headers = rdr.headers().unwrap().clone();
    let kind = headers.iter().position(|h| h == "kind").unwrap();
    let parity = headers.iter().position(|h| h == "parity").unwrap();
    let mut lines = 0;
    for rec in rdr.records() {
        let rec = rec.unwrap();
        if &rec[kind] == "line" {
            lines += 1;
            assert_eq!(&rec[parity], "even");
        }
    }
    assert_eq!(lines, 3 * 49);
    let t = json(&truss);
    assert_eq!(t["schema"], 1);
    assert!(t["joints"].as_array().unwrap().iter().any(|j| j["on_surface"] == true));
    assert_eq!(t["struts"][0].as_array().unwrap().len(), 3);

    // Same output with a different thread count.
    let truss1 = dir.path().join("truss1.json");
    let o = splint(&[
        "--threads",
        "1",
        "lattice-gen",
        "--patches",
        fixture("sphere.json").to_str().unwrap(),
        "--lattice",
        fixture("sphere_lattice.json").to_str().unwrap(),
        "--out",
        truss1.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert_eq!(std::fs::read(&truss).unwrap(), std::fs::read(&truss1).unwrap());

    let sol = dir.path().join("solution.json");
    let o = splint(&[
        "solve-truss",
        "--truss",
        fixture("bcc_cell.json").to_str().unwrap(),
        "--bc",
        fixture("bcc_cell_bc.json").to_str().unwrap(),
        "--out",
        sol.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = json(&sol);
    assert_eq!(s["schema"], 1);
    assert!(s["compliance"].as_f64().unwrap() > 0.0);
    assert_eq!(s["displacements"].as_array().unwrap().len(), 9);
}

#[test]
fn bvh_stats_csv() {
    let o = splint(&["bvh-stats", "--patches", fixture("sphere.json").to_str().unwrap()]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("schema,metric,value"));
    assert!(text.contains("1,patches,54"));
}

#[test]
fn bench_row_contract_and_seed() {
    let run = |seed: &str| {
        let o = splint(&["--seed", seed, "bench", "--cases", "random100", "--ftol", "1e-6,1e-9"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let mut rdr = csv::Reader::from_reader(o.stdout.as_slice());
        rdr.records()
            .map(|r| {
                let r = r.unwrap();
                (r[1].to_string(), r[2].to_string(), r[3].to_string(), r[6].to_string())
            })
            .collect::<Vec<_>>()
    };
    let a = run("42");
    assert_eq!(a.len(), 100 * 3);
    for case in 0..100 {
        let rows: Vec<_> = a.iter().filter(|r| r.0 == case.to_string()).collect();
        assert!(rows.iter().any(|r| r.1 == "mrep") && rows.iter().any(|r| r.1 == "subdivision"));
    }
    assert_eq!(a, run("42"));
}

#[test]
fn exit_codes() {
    let o = splint(&["intersect", "--bogus"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!o.stderr.is_empty());
    let o = splint(&["intersect", "--patches", "/nonexistent.json", "--line", "0,0,0 1,1,1"]);
    assert_eq!(o.status.code(), Some(1));
    // A single strut loaded across its axis has no stiffness.
    let dir = tempfile::tempdir().unwrap();
    let t = dir.path().join("t.json");
    let bc = dir.path().join("bc.json");
    std::fs::write(&t, r#"{"schema":1,"joints":[{"x":[0,0,0],"on_surface":false,"theta":null,"patch":null},{"x":[1,0,0],"on_surface":false,"theta":null,"patch":null}],"struts":[[0,1,1.0]]}"#).unwrap();
    std::fs::write(&bc, r#"{"schema":1,"youngs_modulus":1.0,"fixed_joints":[0],"loads":[{"joint":1,"force":[0,1,0]}]}"#).unwrap();
    let o = splint(&["solve-truss", "--truss", t.to_str().unwrap(), "--bc", bc.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}
