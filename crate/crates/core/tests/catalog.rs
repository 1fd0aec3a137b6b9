mod common;

use std::collections::{BTreeMap, BTreeSet};

use plmin::catalog::*;
use plmin::domain::{segment_intersection, Provenance};
use plmin::energy::{gradient_field, minimality_residual_at};
use plmin::io::{parse_domain_spec, serialize_domain_spec};
use plmin::mesh::VertexKind;
use plmin::symmetry::{detect_periods, extend, Aabb, PointIndex, RigidMotion};
use plmin::verify::iwp_b_equation_as_printed;
use plmin::{Error, Point3, Vec3};

use common::params;

fn p(x: f64, y: f64, z: f64) -> Point3 {
    Point3::new(x, y, z)
}

#[test]
fn list_examples() {
    let list = catalog_list();
    assert!(!list.is_empty());
    let count = |id: &str| list.iter().find(|d| d.id == id).map(|d| d.fundamental_triangles);
    assert_eq!(count("fischer_koch"), Some(8));
    assert_eq!(count("iwp"), Some(5));
    for id in [
        "superman_1",
        "superman_2",
        "superman_3",
        "superman_4",
        "schwarzP_1",
        "schwarzP_2",
        "schwarzP_3",
        "catenoid_PH_family",
        "clp",
        "clp_method2_superman",
        "clp_method2_P",
        "iwp",
        "frd",
        "ht",
        "fischer_koch",
    ] {
        assert!(count(id).is_some(), "{id}");
    }
}

#[test]
fn fundamental_counts() {
    let want = [
        ("superman_1", 8),
        ("superman_2", 6),
        ("superman_3", 4),
        ("superman_4", 5),
        ("schwarzP_1", 6),
        ("schwarzP_2", 12),
        ("schwarzP_3", 32),
        ("clp", 6),
        ("iwp", 5),
        ("frd", 3),
        ("ht", 6),
        ("fischer_koch", 8),
    ];
    for (id, n) in want {
        assert_eq!(spec(id).unwrap().fundamental_triangles, n, "{id}");
    }
    for n in 1..=3 {
        let s = spec_with("catenoid_PH_family", &params(&[("n", n as f64)])).unwrap();
        assert_eq!(s.fundamental_triangles, 2 * n);
    }
}

#[test]
fn instantiate_examples() {
    let s = instantiate("superman_1", &params(&[("x", 1.0)])).unwrap().seed;
    assert_eq!((s.num_vertices(), s.num_triangles()), (9, 8));
    assert_eq!(s.position(8), p(0.5, 0.5, 0.5));
    let s = instantiate("superman_1", &params(&[("x", 0.5)])).unwrap().seed;
    assert_eq!(s.position(8), p(0.5, 0.5, 0.25));

    let s = instantiate("schwarzP_1", &BTreeMap::new()).unwrap().seed;
    assert_eq!((s.num_vertices(), s.num_triangles()), (7, 6));
    assert!(s.positions().contains(&p(3.0, 3.0, 3.0)));

    let s = instantiate("ht", &params(&[("b", 1.0)])).unwrap().seed;
    let x = s.positions();
    assert_eq!(x.len(), 7);
    let n = (x[1] - x[0]).cross(&(x[2] - x[0])).normalize();
    for q in x {
        assert!((q - x[0]).dot(&n).abs() <= 1e-12);
    }
}

#[test]
fn instantiate_errors() {
    let bad = [
        ("superman_1", params(&[("x", -1.0)])),
        ("fischer_koch", params(&[("a", 1.0), ("b", 1.5)])),
        ("ht", params(&[("b", 1.0), ("c", 1.2)])),
        ("ht", params(&[("a", 1.2)])),
        ("clp", params(&[("a", 0.0)])),
    ];
    for (id, v) in bad {
        assert!(
            matches!(instantiate(id, &v), Err(Error::InvalidArgument(_))),
            "{id} {v:?}"
        );
    }
    assert!(matches!(
        instantiate("nosuch", &BTreeMap::new()),
        Err(Error::InvalidArgument(_))
    ));
}

#[test]
fn iwp_p6_is_a_segment_intersection() {
    let inst = instantiate("iwp", &BTreeMap::new()).unwrap();
    let (x, gaps) = inst.spec.positions_with_gaps(&inst.env).unwrap();
    assert!(!gaps.is_empty());
    assert!(gaps.iter().all(|(_, g)| *g <= 1e-12));
    let (q, gap) = segment_intersection(&x[0], &x[3], &x[2], &x[4]).unwrap();
    assert!(gap <= 1e-12 && (q - x[5]).norm() <= 1e-12);
    // skew segments
    let e = segment_intersection(&p(0., 0., 0.), &p(1., 0., 0.), &p(0., 1., 1.), &p(0., 2., 1.));
    assert!(matches!(e, Err(Error::Degenerate(_))));
}

#[test]
fn meridian_examples() {
    let a = catenoid_a(1.0, 1.0, 4);
    assert!((a - 2f64.acosh()).abs() <= 1e-15);
    assert!((a - 1.3169579).abs() <= 1e-7);
    let m = catenoid_meridian(0.7, 0.3, 5, 0.0, -3, 3).unwrap();
    assert_eq!(m.len(), 7);
    assert_eq!(m[3], p(0.7, 0.0, 0.0));
    for j in 0..3 {
        assert_eq!(m[j].x, m[6 - j].x);
        assert_eq!(m[j].z, -m[6 - j].z);
    }
    assert!(m.iter().all(|q| q.y == 0.0));
    for (r, d, k, j0, j1) in [
        (0.0, 1.0, 4, -1, 1),
        (1.0, -1.0, 4, -1, 1),
        (1.0, 1.0, 2, -1, 1),
        (1.0, 1.0, 4, 1, 1),
    ] {
        assert!(matches!(
            catenoid_meridian(r, d, k, 0.0, j0, j1),
            Err(Error::InvalidArgument(_))
        ));
    }
}

fn ring(k: usize, r: f64, delta: f64, z0: f64, j0: i32, j1: i32) -> plmin::SimplicialSurface {
    catenoid_ring(&catenoid_meridian(r, delta, k, z0, j0, j1).unwrap(), k).unwrap()
}

#[test]
fn ring_examples() {
    let s = ring(4, 1.0, 0.5, 0.0, -2, 2);
    assert_eq!((s.num_vertices(), s.num_triangles()), (20, 32));
    s.validate().unwrap();
    let kinds = s.classify_vertices();
    let inner: Vec<usize> = (0..20).filter(|&v| kinds[v] == VertexKind::Interior).collect();
    assert_eq!(inner.len(), 12);
    assert!(minimality_residual_at(&s, &inner, 1e-10).unwrap().pass);
    // invariant under the k-fold rotation
    let rot = RigidMotion::rotation_about_axis(&p(0., 0., 0.), &Vec3::z(), std::f64::consts::FRAC_PI_2).unwrap();
    let turned = rot.apply(&s);
    let index = PointIndex::new(s.positions(), 1.0);
    let map: Vec<usize> = turned
        .positions()
        .iter()
        .map(|q| index.find(q, 1e-12).unwrap())
        .collect();
    let key = |t: [usize; 3]| {
        let mut k = t;
        k.sort_unstable();
        k
    };
    let mine: BTreeSet<[usize; 3]> = s.triangles().iter().map(|t| key(*t)).collect();
    let theirs: BTreeSet<[usize; 3]> = turned.triangles().iter().map(|t| key(t.map(|v| map[v]))).collect();
    assert_eq!(mine, theirs);
}

#[test]
fn ring_gradient_vanishes_across_the_family() {
    for k in [3, 4] {
        for r in [0.5, 1.0, 2.0] {
            for delta in [0.5, 1.0] {
                for (z0, j0, j1) in [(0.0, -2, 2), (delta / 2.0, -2, 1)] {
                    let s = ring(k, r, delta, z0, j0, j1);
                    let g = gradient_field(&s).unwrap();
                    let kinds = s.classify_vertices();
                    for v in 0..s.num_vertices() {
                        if kinds[v] == VertexKind::Interior {
                            assert!(
                                g[v].norm() <= 1e-10,
                                "k={k} r={r} delta={delta} z0={z0}: {:e}",
                                g[v].norm()
                            );
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn extension_modes() {
    let s4 = ring(4, 1.0, 0.5, 0.0, -2, 2);
    let s3 = ring(3, 1.0, 0.5, 0.25, -2, 1);
    assert!(matches!(
        catenoid_extensions(&s4, 4, CatenoidMode::SchwarzHRotations),
        Err(Error::InvalidArgument(_))
    ));
    assert!(matches!(
        catenoid_extensions(&s3, 3, CatenoidMode::SchwarzPRotations),
        Err(Error::InvalidArgument(_))
    ));
    assert!(matches!(
        catenoid_extensions(&s4, 4, CatenoidMode::HexagonalTranslations),
        Err(Error::InvalidArgument(_))
    ));

    for (s, k, mode) in [
        (&s4, 4, CatenoidMode::SchwarzPRotations),
        (&s3, 3, CatenoidMode::SchwarzHRotations),
        (&s3, 3, CatenoidMode::HexagonalTranslations),
    ] {
        let g = catenoid_extensions(s, k, mode).unwrap();
        let b = Aabb::of_points(s.positions()).unwrap();
        let w = b.expanded(b.diagonal());
        let e = extend(s, &g, &w.expanded(2.0 * s.longest_edge()), 20_000).unwrap();
        let kinds = e.surface.classify_vertices();
        let inner: Vec<usize> = (0..e.surface.num_vertices())
            .filter(|&v| kinds[v] == VertexKind::Interior && w.contains(&e.surface.position(v)))
            .collect();
        assert!(inner.len() > s.num_vertices(), "{mode:?}");
        assert!(
            minimality_residual_at(&e.surface, &inner, 1e-10).unwrap().pass,
            "{mode:?}"
        );
        assert!(e.translation_periods().len() >= 3, "{mode:?}");
    }
}

#[test]
fn hexagonal_translations_have_the_vertical_period() {
    for delta in [0.5, 1.0] {
        let (z0, j0, j1) = (delta / 2.0, -2, 1);
        let s = ring(3, 1.0, delta, z0, j0, j1);
        let g = catenoid_extensions(&s, 3, CatenoidMode::HexagonalTranslations).unwrap();
        let b = Aabb::of_points(s.positions()).unwrap();
        let e = extend(&s, &g, &b.expanded(b.diagonal()), 20_000).unwrap();
        let h = 2.0 * delta * (j1 - j0) as f64;
        let found = detect_periods(&e.surface, &[Vec3::new(0., 0., h), Vec3::new(0., 0., h / 2.0)]);
        assert_eq!(found, vec![Vec3::new(0., 0., h)]);
    }
}

#[test]
fn closed_form_examples() {
    let (prov, v) = closed_form("superman_3", &params(&[("z", 1.0)])).unwrap().unwrap();
    assert_eq!(prov, Provenance::Paper);
    assert!((v["a"] - (3.0 - 2f64.sqrt()) / 2.0).abs() <= 1e-15);
    assert_eq!((v["b"], v["c"]), (0.5, 0.5));

    let (prov, v) = closed_form("iwp", &BTreeMap::new()).unwrap().unwrap();
    assert_eq!(prov, Provenance::Derived);
    let b = v["b"];
    assert!(b > 0.5 && b < 1.0);
    let a = 0.5 * (2.0 * b - 1.0 + (-3.0 + 8.0 * b - 4.0 * b * b).sqrt());
    assert!((v["a"] - a).abs() <= 1e-12);

    let (prov, v) = closed_form("fischer_koch", &params(&[("a", 1.0)])).unwrap().unwrap();
    assert_eq!(prov, Provenance::Derived);
    assert!(v["b"] > 0.0 && v["b"] < 1.0);

    let (prov, v) = closed_form("ht", &params(&[("b", 1.0)])).unwrap().unwrap();
    assert_eq!(prov, Provenance::Paper);
    assert!((v["a"] - (2.0 + 2f64.sqrt()) / 4.0).abs() <= 1e-15 && v["c"] == 0.75);

    assert!(matches!(
        closed_form("nosuch", &BTreeMap::new()),
        Err(Error::InvalidArgument(_))
    ));
}

#[test]
fn iwp_printed_reduction_has_no_root() {
    // the b-equation as printed keeps one sign over (1/2, 1); the recorded
    // root comes from the reduction that keeps the factor b
    let v: Vec<f64> = (1..200)
        .map(|i| iwp_b_equation_as_printed(0.5 + 0.0025 * i as f64))
        .collect();
    assert!(v.iter().all(|x| *x < 0.0) || v.iter().all(|x| *x > 0.0));
}

#[test]
fn specs_roundtrip_through_text() {
    for id in ids() {
        let s = spec(id).unwrap();
        let back = parse_domain_spec(&serialize_domain_spec(&s)).unwrap();
        assert_eq!(back, s, "{id}");
    }
}

#[test]
fn superman_2_loop_lies_on_the_surface() {
    for (x, y) in [(1.0, 1.0), (0.7, 1.3)] {
        let d = common::superman_2_loop_distance(x, y);
        assert!(d <= 1e-9, "x={x} y={y}: {d:e}");
    }
}

#[test]
fn ht_blocks_build_the_same_surface() {
    let (n, same, d) = common::ht_blocks_agree();
    assert!(n > 50 && same);
    assert!(d <= 1e-9);
}

#[test]
fn catenoid_remark_matches_schwarz_p1() {
    let d = common::remark_trace_distance();
    assert!(d <= 1e-9, "{d:e}");
}
