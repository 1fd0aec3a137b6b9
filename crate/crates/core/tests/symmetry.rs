mod common;

use std::collections::{BTreeMap, BTreeSet};

use plmin::catalog::instantiate;
use plmin::energy::{minimality_residual_at, surface_area, SOLVER_TOL};
use plmin::mesh::{weld, WELD_TOLERANCE};
use plmin::symmetry::*;
use plmin::{Point3, SimplicialSurface, Vec3};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn p(x: f64, y: f64, z: f64) -> Point3 {
    Point3::new(x, y, z)
}

#[test]
fn half_turn_examples() {
    let h = RigidMotion::half_turn_about_edge(&p(0., 0., 0.), &p(1., 0., 0.)).unwrap();
    assert!((h.apply_point(&p(0., 1., 0.)) - p(0., -1., 0.)).norm() <= 1e-15);
    let s = instantiate("superman_1", &BTreeMap::new()).unwrap().seed;
    let x = s.positions();
    let h = RigidMotion::half_turn_about_edge(&x[0], &x[1]).unwrap();
    // the axis is the line x = 1, z = 0
    assert!((h.apply_point(&x[8]) - p(1.5, 0.5, -0.5)).norm() <= 1e-15);
    assert_eq!(h.kind, MotionKind::HalfTurn);
    assert!((h.linear.trace() + 1.0).abs() < 1e-12 && (h.det() - 1.0).abs() < 1e-12);
    assert!(RigidMotion::half_turn_about_edge(&x[0], &x[0]).is_err());
}

#[test]
fn reflection_examples() {
    let r = RigidMotion::reflection_across_plane(&p(0., 0., 0.), &Vec3::z()).unwrap();
    assert_eq!(r.apply_point(&p(1., 2., 3.)), p(1., 2., -3.));
    let r6 = RigidMotion::reflection_across_plane(&p(0., 0., 6.), &Vec3::z()).unwrap();
    assert_eq!(r6.apply_point(&p(3., 3., 3.)), p(3., 3., 9.));
    assert_eq!(r6.kind, MotionKind::Reflection);
    let t = r6.compose(&r);
    assert_eq!(t.kind, MotionKind::Translation);
    assert!((t.translation - Vec3::new(0., 0., 12.)).norm() <= 1e-12);
}

proptest! {
    #[test]
    fn involutions(a in prop::array::uniform3(-3.0f64..3.0), d in prop::array::uniform3(-1.0f64..1.0)) {
        let a = p(a[0], a[1], a[2]);
        let d = Vec3::new(d[0], d[1], d[2]);
        prop_assume!(d.norm() > 1e-3);
        let h = RigidMotion::half_turn_about_line(&a, &d).unwrap();
        let r = RigidMotion::reflection_across_plane(&a, &d).unwrap();
        prop_assert!(h.is_orthogonal(1e-12) && r.is_orthogonal(1e-12));
        prop_assert!(h.compose(&h).distance(&RigidMotion::identity()) <= 1e-12);
        prop_assert!(r.compose(&r).distance(&RigidMotion::identity()) <= 1e-12);
        prop_assert!((r.det() + 1.0).abs() <= 1e-12);
        prop_assert!((r.apply_point(&a) - a).norm() <= 1e-12);
        prop_assert!((h.apply_point(&(a + d)) - (a + d)).norm() <= 1e-12);
    }
}

#[test]
fn apply_examples() {
    let s = instantiate("superman_1", &BTreeMap::new()).unwrap().seed;
    assert_eq!(RigidMotion::identity().apply(&s), s);
    let x = s.positions();
    let h = RigidMotion::half_turn_about_edge(&x[0], &x[1]).unwrap();
    let image = h.apply(&s);
    assert!((surface_area(&image) - surface_area(&s)).abs() <= 1e-12 * surface_area(&s));
    let w = weld(&SimplicialSurface::concat(&[s.clone(), image]), WELD_TOLERANCE).unwrap();
    // edges with one face from each piece
    let a: BTreeSet<[u64; 3]> = s
        .positions()
        .iter()
        .map(|q| [q.x.to_bits(), q.y.to_bits(), q.z.to_bits()])
        .collect();
    let is_a = |t: &[usize; 3]| {
        t.iter().all(|&v| {
            let q = w.position(v);
            a.contains(&[q.x.to_bits(), q.y.to_bits(), q.z.to_bits()])
        })
    };
    let shared: Vec<_> = w
        .edge_faces()
        .into_iter()
        .filter(|(_, f)| f.len() == 2 && is_a(&w.triangles()[f[0]]) != is_a(&w.triangles()[f[1]]))
        .collect();
    assert_eq!(shared.len(), 1);
    let (e, _) = shared[0];
    let ends: BTreeSet<[u64; 3]> = [e.0, e.1]
        .iter()
        .map(|&v| w.position(v))
        .map(|q| [q.x.to_bits(), q.y.to_bits(), q.z.to_bits()])
        .collect();
    let want: BTreeSet<[u64; 3]> = [x[0], x[1]]
        .iter()
        .map(|q| [q.x.to_bits(), q.y.to_bits(), q.z.to_bits()])
        .collect();
    assert_eq!(ends, want);
    // reflections reverse the stored orientation
    let r = RigidMotion::reflection_across_plane(&p(0., 0., 0.), &Vec3::x()).unwrap();
    let m = r.apply(&s);
    assert_eq!(m.triangles()[0], [0, 2, 1].map(|k| s.triangles()[0][k]));
}

#[test]
fn extend_examples() {
    let seed = SimplicialSurface::new(vec![p(0., 0., 0.), p(1., 0., 0.), p(0., 1., 0.)], vec![[0, 1, 2]]).unwrap();
    let e = extend(&seed, &GeneratorSet::new(), &Aabb::cube(-1.0, 2.0).unwrap(), 10).unwrap();
    assert_eq!(e.surface, weld(&seed, WELD_TOLERANCE).unwrap());

    let inst = instantiate("superman_1", &BTreeMap::new()).unwrap();
    let gens = GeneratorSet::boundary_half_turns(&inst.seed).unwrap();
    assert!(gens.check_annotations(1e-10));
    let e = extend(&inst.seed, &gens, &Aabb::cube(-1.0, 2.0).unwrap(), 10_000).unwrap();
    let inner = e.window_interior_vertices();
    assert!(!inner.is_empty());
    assert!(minimality_residual_at(&e.surface, &inner, 1e-10).unwrap().pass);
    assert!(matches!(
        extend(&inst.seed, &gens, &Aabb::cube(-1.0, 2.0).unwrap(), 0),
        Err(plmin::Error::InvalidArgument(_))
    ));
}

fn schwarz_p1_window() -> Extension {
    let inst = instantiate("schwarzP_1", &BTreeMap::new()).unwrap();
    extend(&inst.seed, &inst.generators, &Aabb::cube(-6.0, 12.0).unwrap(), 10_000).unwrap()
}

#[test]
fn schwarz_p1_extension_is_periodic() {
    let e = schwarz_p1_window();
    let x = e.surface.positions();
    let index = PointIndex::new(x, 1.0);
    // set comparison on the overlap of the window with its translate
    for t in [Vec3::new(12., 0., 0.), Vec3::new(0., 12., 0.), Vec3::new(0., 0., 12.)] {
        let overlap = Aabb::new([-6.0 + t.x, -6.0 + t.y, -6.0 + t.z], [12.0, 12.0, 12.0]).unwrap();
        let mut n = 0;
        for q in x.iter().filter(|q| overlap.contains(q)) {
            assert!(index.find(&(q - t), 1e-9).is_some());
            n += 1;
        }
        assert!(n > 10);
    }
    let cands = [
        Vec3::new(12., 0., 0.),
        Vec3::new(0., 12., 0.),
        Vec3::new(0., 0., 12.),
        Vec3::new(1., 0., 0.),
        Vec3::new(6., 0., 0.),
    ];
    let found = detect_periods(&e.surface, &cands);
    assert_eq!(found, cands[..3].to_vec());
    assert!(detect_periods(&e.surface, &[]).is_empty());
}

#[test]
fn motion_is_symmetry_examples() {
    let e = schwarz_p1_window();
    let w = Aabb::cube(-6.0, 12.0).unwrap();
    assert!(motion_is_symmetry(&e.surface, &RigidMotion::identity(), &w));

    let inst = instantiate("schwarzP_3", &BTreeMap::new()).unwrap();
    let e = inst.extend(10_000).unwrap();
    let q = RigidMotion::rotation_about_axis(&p(0., 0., 0.), &Vec3::z(), std::f64::consts::FRAC_PI_2).unwrap();
    assert!(motion_is_symmetry(&e.surface, &q, &e.window));

    let inst = instantiate("superman_2", &BTreeMap::new()).unwrap();
    let e = inst.extend(10_000).unwrap();
    let mirror = RigidMotion::reflection_across_plane(&inst.seed.position(6), &Vec3::new(1.0, 2.0, 3.0)).unwrap();
    assert!(!motion_is_symmetry(&e.surface, &mirror, &e.window));
    // while the generating half-turns are symmetries
    for m in inst.generators.motions() {
        assert!(motion_is_symmetry(&e.surface, &m, &e.window));
    }
}

/// Vertex and triangle sets agree up to the weld tolerance.
fn same_surface(a: &SimplicialSurface, b: &SimplicialSurface) -> bool {
    if a.num_vertices() != b.num_vertices() || a.num_triangles() != b.num_triangles() {
        return false;
    }
    let index = PointIndex::new(b.positions(), 1.0);
    let map: Option<Vec<usize>> = a.positions().iter().map(|q| index.find(q, WELD_TOLERANCE)).collect();
    let Some(map) = map else { return false };
    let key = |t: [usize; 3]| {
        let mut k = t;
        k.sort_unstable();
        k
    };
    let tb: BTreeSet<[usize; 3]> = b.triangles().iter().map(|t| key(*t)).collect();
    a.triangles().iter().all(|t| tb.contains(&key(t.map(|v| map[v]))))
}

#[test]
fn extension_ignores_generator_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for id in ["superman_1", "schwarzP_1", "clp", "ht", "iwp", "catenoid_H"] {
        let inst = instantiate(id, &BTreeMap::new()).unwrap();
        let w = inst.window;
        let a = extend(&inst.seed, &inst.generators, &w, 20_000).unwrap();
        for _ in 0..3 {
            let mut motions = inst.generators.motions();
            motions.shuffle(&mut rng);
            let mut g = GeneratorSet::new();
            for m in motions {
                g.push(m, None);
            }
            let b = extend(&inst.seed, &g, &w, 20_000).unwrap();
            assert!(same_surface(&a.surface, &b.surface), "{id}");
        }
    }
}

#[test]
fn minimality_transports_from_seed_to_window() {
    for d in plmin::catalog::catalog_list() {
        let inst = common::minimal_instance(&d.id, &BTreeMap::new());
        let e = inst.extend(40_000).unwrap();
        // seed vertices whose stars close in the window
        let seed_side: Vec<usize> = (0..e.surface.num_vertices())
            .filter(|&v| e.vertex_source[v].0 == 0 && e.surface.star_is_closed_fan(v))
            .collect();
        let seed_ok = minimality_residual_at(&e.surface, &seed_side, SOLVER_TOL).unwrap().pass;
        assert!(seed_ok, "{}", d.id);
        let all = inst.window_vertices(&e);
        let rep = minimality_residual_at(&e.surface, &all, SOLVER_TOL).unwrap();
        assert!(rep.pass, "{}: worst {:e}", d.id, rep.worst);
    }
}
