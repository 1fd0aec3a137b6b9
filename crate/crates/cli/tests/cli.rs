use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;

use plmin::catalog::{catalog_list, instantiate, settle};
use plmin::energy::CLOSED_FORM_TOL;
use plmin::io::{import_obj, mesh_to_string, MeshFormat};
use plmin::solver::{solve, Method};
use plmin::verify::flat_star_normal;
use plmin::{Vec3, VertexKind};
use plmin_cli::{run, Outcome};
use serde_json::Value;

fn cli(args: &[&str]) -> Outcome {
    run(std::iter::once("plmin").chain(args.iter().copied()))
}

fn params(v: &[(&str, f64)]) -> BTreeMap<String, f64> {
    v.iter().map(|(k, x)| (k.to_string(), *x)).collect()
}

fn floats(v: &Value) -> BTreeMap<String, f64> {
    v.as_object()
        .unwrap()
        .iter()
        .map(|(k, x)| (k.clone(), x.as_f64().unwrap()))
        .collect()
}

#[test]
fn list_shows_counts_and_ranges() {
    let o = cli(&["list"]);
    assert_eq!(o.code, 0);
    let line = o.stdout.lines().find(|l| l.starts_with("superman_3 ")).unwrap();
    assert!(
        line.contains("4 triangles") && line.contains("a in (0.0, 1.0) free"),
        "{line}"
    );

    let o = cli(&["list", "--format", "json"]);
    assert_eq!(o.code, 0);
    let rows: Vec<Value> = serde_json::from_str(&o.stdout).unwrap();
    let lib = catalog_list();
    assert_eq!(rows.len(), lib.len());
    for (r, d) in rows.iter().zip(&lib) {
        assert_eq!(r["id"], d.id.as_str());
        assert_eq!(r["fundamental_triangles"], d.fundamental_triangles);
    }
}

#[test]
fn generate_exports_the_seed() {
    let dir = tempfile::tempdir().unwrap();
    let p1 = dir.path().join("p1.obj");
    let o = cli(&["generate", "schwarzP_1", "-o", p1.to_str().unwrap()]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    let text = std::fs::read_to_string(&p1).unwrap();
    assert_eq!(import_obj(&text).unwrap().num_vertices(), 7);
    let lib = instantiate("schwarzP_1", &BTreeMap::new()).unwrap().seed;
    assert_eq!(text, mesh_to_string(&lib, MeshFormat::Obj));

    let o = cli(&["generate", "superman_1", "--param", "x=0.5", "--format", "json"]);
    assert_eq!(o.code, 0);
    let v: Value = serde_json::from_str(&o.stdout).unwrap();
    let p9 = &v["vertices"][8];
    assert_eq!(
        (p9[0].as_f64(), p9[1].as_f64(), p9[2].as_f64()),
        (Some(0.5), Some(0.5), Some(0.25))
    );

    // no -o: the mesh itself on standard output
    let o = cli(&["generate", "superman_1", "--param", "x=1/2", "--mesh-format", "off"]);
    assert!(o.stdout.starts_with("OFF\n9 8 0\n"));

    // an example without a closed form is solved first
    let o = cli(&["generate", "superman_4", "--param", "z=3", "--format", "json"]);
    let v: Value = serde_json::from_str(&o.stdout).unwrap();
    assert_eq!(v["solved"], true);
    let fixed = params(&[("z", 3.0)]);
    let (inst, _) = settle(instantiate("superman_4", &fixed).unwrap(), &fixed, CLOSED_FORM_TOL, 100).unwrap();
    assert_eq!(v["parameters"]["b"].as_f64().unwrap(), inst.env["b"]);
}

/// Free parameters reported by `solve`, and the library's answer.
fn solve_both(id: &str, fixed: &[(&str, f64)], args: &[&str]) -> (BTreeMap<String, f64>, BTreeMap<String, f64>) {
    let mut a = vec!["solve", id, "--format", "json"];
    a.extend_from_slice(args);
    let o = cli(&a);
    assert_eq!(o.code, 0, "{id}: {}", o.stdout);
    let v: Value = serde_json::from_str(&o.stdout).unwrap();
    assert_eq!(v["report"]["converged"], true);
    let inst = instantiate(id, &params(fixed)).unwrap();
    let rep = solve(&inst.problem().unwrap(), Method::NewtonFdJacobian, 1e-12, 100).unwrap();
    (floats(&v["report"]["final_parameters"]), rep.final_parameters)
}

#[test]
fn solve_matches_the_library() {
    let (got, lib) = solve_both("superman_3", &[("z", 1.0)], &["--param", "z=1"]);
    assert_eq!(got, lib);
    assert!((got["a"] - 0.7928932).abs() < 1e-7);
    assert!((got["b"] - 0.5).abs() < 1e-12);

    let (got, lib) = solve_both("ht", &[("b", 1.0)], &["--param", "b=1"]);
    assert_eq!(got, lib);
    assert!((got["a"] - 0.8535534).abs() < 1e-7);
    assert!((got["s"] - 0.8535534).abs() < 1e-7);
    assert!((got["c"] - 0.75).abs() < 1e-12);

    let (got, lib) = solve_both("fischer_koch", &[("a", 1.0)], &["--param", "a=1"]);
    assert_eq!(got, lib);
    assert!(got["b"] > 0.0 && got["b"] < 1.0);

    let o = cli(&["solve", "superman_3", "--param", "z=1"]);
    assert!(o.stdout.contains("a = 0.7928932"), "{}", o.stdout);
}

#[test]
fn solve_from_a_spec_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s3.spec");
    std::fs::write(
        &path,
        plmin::io::serialize_domain_spec(&plmin::catalog::spec("superman_3").unwrap()),
    )
    .unwrap();
    let o = cli(&["solve", path.to_str().unwrap(), "--param", "z=1", "--format", "json"]);
    assert_eq!(o.code, 0);
    let v: Value = serde_json::from_str(&o.stdout).unwrap();
    assert_eq!(v["id"], "superman_3");
    assert!((v["report"]["final_parameters"]["a"].as_f64().unwrap() - (3.0 - 2f64.sqrt()) / 2.0).abs() < 1e-12);
}

#[test]
fn tile_reports_periods_and_minimality() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("p.obj");
    let o = cli(&[
        "tile",
        "schwarzP_1",
        "--window",
        "-6:12",
        "-o",
        out.to_str().unwrap(),
        "--format",
        "json",
    ]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    let v: Value = serde_json::from_str(&o.stdout).unwrap();
    let periods: Vec<[f64; 3]> = serde_json::from_value(v["periods"].clone()).unwrap();
    assert_eq!(periods, vec![[12.0, 0.0, 0.0], [0.0, 12.0, 0.0], [0.0, 0.0, 12.0]]);
    assert_eq!(v["minimality"]["pass"], true);

    let mut inst = instantiate("schwarzP_1", &BTreeMap::new()).unwrap();
    inst.window = plmin::symmetry::Aabb::cube(-6.0, 12.0).unwrap();
    let ext = inst.extend(plmin::symmetry::DEFAULT_MAX_COPIES).unwrap();
    assert_eq!(
        std::fs::read_to_string(&out).unwrap(),
        mesh_to_string(&ext.surface, MeshFormat::Obj)
    );
    assert_eq!(v["minimality"]["vertices"], inst.window_vertices(&ext).len());

    let o = cli(&["tile", "superman_1", "--param", "x=1", "--window", "-1:2"]);
    assert_eq!(o.code, 0);
    assert!(o.stdout.contains("minimality: pass"), "{}", o.stdout);
    assert!(o.stdout.contains("period (2, 0, 0)"));
}

fn tiled_superman_3(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("s3.obj");
    let o = cli(&["tile", "superman_3", "-o", path.to_str().unwrap()]);
    assert_eq!(o.code, 0);
    path
}

#[test]
fn verify_examples_and_meshes() {
    let o = cli(&["verify", "schwarzP_3"]);
    assert_eq!(o.code, 0, "{}", o.stdout);
    assert!(o.stdout.contains("printed equations: pass"));

    let o = cli(&["verify", "clp", "--param", "x=0.6", "y=0.9", "--format", "json"]);
    assert_eq!(o.code, 0);
    let v: Value = serde_json::from_str(&o.stdout).unwrap();
    assert_eq!(v["solved"], true);
    let fixed = params(&[("x", 0.6), ("y", 0.9)]);
    let (inst, _) = settle(instantiate("clp", &fixed).unwrap(), &fixed, CLOSED_FORM_TOL, 100).unwrap();
    assert_eq!(v["parameters"]["a"].as_f64().unwrap(), inst.env["a"]);
    assert_eq!(v["parameters"]["b"].as_f64().unwrap(), inst.env["b"]);

    let dir = tempfile::tempdir().unwrap();
    let path = tiled_superman_3(dir.path());
    let o = cli(&["verify", "--mesh", path.to_str().unwrap()]);
    assert_eq!(o.code, 0, "{}", o.stdout);

    // move one interior vertex by 1e-3, off its star's plane if it has one
    let s = import_obj(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let kinds = s.classify_vertices();
    let v = (0..s.num_vertices())
        .find(|&v| kinds[v] == VertexKind::Interior)
        .unwrap();
    let d = flat_star_normal(&s, v, 1e-12).unwrap_or(Vec3::new(0.6, 0.48, 0.64));
    let mut x = s.positions().to_vec();
    x[v] += d * 1e-3;
    let moved = dir.path().join("perturbed.obj");
    std::fs::write(&moved, mesh_to_string(&s.with_positions(x), MeshFormat::Obj)).unwrap();
    let o = cli(&["verify", "--mesh", moved.to_str().unwrap()]);
    assert_eq!(o.code, 1, "{}", o.stdout);
    assert!(o.stdout.contains("minimality: FAIL"));
}

#[test]
fn report_file_and_json_agree() {
    let dir = tempfile::tempdir().unwrap();
    let r = dir.path().join("r.json");
    let o = cli(&[
        "verify",
        "superman_3",
        "--format",
        "json",
        "--report",
        r.to_str().unwrap(),
    ]);
    assert_eq!(o.code, 0);
    let a: Value = serde_json::from_str(&o.stdout).unwrap();
    let b: Value = serde_json::from_str(&std::fs::read_to_string(&r).unwrap()).unwrap();
    assert_eq!(a, b);
    assert_eq!(Some(a), o.report);
}

/// Exit codes of the installed binary over success and failure scenarios.
#[test]
fn exit_code_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let mesh = tiled_superman_3(dir.path());
    let mesh = mesh.to_str().unwrap();
    let out = format!("{d}/x.obj");
    let missing = format!("{d}/missing/x.obj");
    let nomesh = format!("{d}/none.obj");
    let matrix: &[(&[&str], i32)] = &[
        (&["list"], 0),
        (&["--help"], 0),
        (&["generate", "superman_1", "-o", &out], 0),
        (&["solve", "superman_3", "--param", "z=1"], 0),
        (&["tile", "superman_1", "--window", "-1:2"], 0),
        (&["verify", "schwarzP_3"], 0),
        (&["verify", "--mesh", mesh], 0),
        // did not converge in one iteration
        (&["solve", "superman_4", "--param", "z=3", "--max-iter", "1"], 1),
        (&[], 2),
        (&["frobnicate"], 2),
        (&["generate", "nosuch"], 2),
        (&["generate", "superman_1", "--param", "x=-1"], 2),
        (&["generate", "superman_1", "--param", "y=1"], 2),
        (&["generate", "superman_1", "--param", "x"], 2),
        (&["solve", "superman_3", "--tol", "abc"], 2),
        (&["tile", "superman_1", "--window", "1:"], 2),
        (&["tile", "superman_1", "--window", "2:1"], 2),
        (&["verify"], 2),
        (&["verify", "clp", "--mesh", mesh], 2),
        (&["generate", "superman_1", "-o", &out, "--mesh-format", "stl"], 2),
        (&["tile", "schwarzP_1", "--depth", "5"], 3),
        (&["generate", "superman_1", "-o", &missing], 3),
        (&["verify", "--mesh", &nomesh], 3),
    ];
    for (args, want) in matrix {
        let o = Command::new(env!("CARGO_BIN_EXE_plmin")).args(*args).output().unwrap();
        assert_eq!(
            o.status.code(),
            Some(*want),
            "{args:?}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        assert_eq!(cli(args).code, *want, "{args:?} in-process");
    }
}
