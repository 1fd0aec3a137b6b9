#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use plmin::catalog::{
    catenoid_spec, ht_hexagonal_block, instantiate, instantiate_spec, schwarz_p1_catenoid, settle, Instance,
};
use plmin::energy::{area_gradient, minimality_residual_at, SOLVER_TOL};
use plmin::symmetry::{extend, Aabb, GeneratorSet, PointIndex, RigidMotion};
use plmin::verify::{polyline_distance, trace_distance};
use plmin::{Point3, SimplicialSurface, Vec3, VertexKind};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn params(v: &[(&str, f64)]) -> BTreeMap<String, f64> {
    v.iter().map(|(k, x)| (k.to_string(), *x)).collect()
}

fn p(x: f64, y: f64, z: f64) -> Point3 {
    Point3::new(x, y, z)
}

/// Instance at a minimal configuration: the recorded closed form when one
/// matches, otherwise the solver's answer from the defaults.
pub fn minimal_instance(id: &str, fixed: &BTreeMap<String, f64>) -> Instance {
    let (inst, rep) = settle(instantiate(id, fixed).unwrap(), fixed, 1e-10, 100).unwrap();
    if let Some(rep) = rep {
        assert!(rep.converged, "{id}: {}", rep.message);
    }
    inst
}

/// A closed fan of 3 to 9 triangles around a centre vertex.
pub fn one_ring(rng: &mut ChaCha8Rng) -> SimplicialSurface {
    let n = rng.gen_range(3..10);
    let mut pos = vec![p(
        rng.gen_range(-0.3..0.3),
        rng.gen_range(-0.3..0.3),
        rng.gen_range(-0.5..0.5),
    )];
    let mut angles: Vec<f64> = (0..n)
        .map(|k| (k as f64 + rng.gen_range(0.1..0.9)) * std::f64::consts::TAU / n as f64)
        .collect();
    angles.sort_by(f64::total_cmp);
    for t in angles {
        let r = rng.gen_range(0.7..1.5);
        pos.push(p(r * t.cos(), r * t.sin(), rng.gen_range(-0.8..0.8)));
    }
    let tris = (0..n).map(|k| [0, 1 + k, 1 + (k + 1) % n]).collect();
    SimplicialSurface::new(pos, tris).unwrap()
}

pub fn random_motion(rng: &mut ChaCha8Rng) -> RigidMotion {
    let axis = Vec3::new(
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
        rng.gen_range(0.1..1.0),
    );
    let at = p(
        rng.gen_range(-2.0..2.0),
        rng.gen_range(-2.0..2.0),
        rng.gen_range(-2.0..2.0),
    );
    let rot = RigidMotion::rotation_about_axis(&at, &axis, rng.gen_range(0.0..6.2)).unwrap();
    if rng.gen_bool(0.5) {
        let n = Vec3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(0.1..1.0),
            rng.gen_range(-1.0..1.0),
        );
        RigidMotion::reflection_across_plane(&at, &n).unwrap().compose(&rot)
    } else {
        rot
    }
}

#[derive(Debug)]
pub struct Retriangulation {
    /// Window-interior vertices the two triangulations share.
    pub shared: usize,
    pub both_pass: bool,
    /// Vertices whose pass/fail differs after the shear.
    pub disagree: usize,
    /// Vertices failing after the shear.
    pub failing: usize,
}

impl Retriangulation {
    pub fn ok(&self) -> bool {
        self.shared > 10 && self.both_pass && self.disagree == 0 && self.failing > 0
    }
}

/// Pass/fail of the window vertices common to two triangulations of the
/// same trace, before and after the same shear.
pub fn compare_triangulations(a: &SimplicialSurface, b: &SimplicialSurface, window: &Aabb) -> Retriangulation {
    let ib = PointIndex::new(b.positions(), 1.0);
    let ka = a.classify_vertices();
    let kb = b.classify_vertices();
    let shared: Vec<(usize, usize)> = (0..a.num_vertices())
        .filter(|&v| window.contains(&a.position(v)) && ka[v] == VertexKind::Interior)
        .filter_map(|v| ib.find(&a.position(v), 1e-9).map(|w| (v, w)))
        .filter(|&(_, w)| kb[w] == VertexKind::Interior)
        .collect();
    let ra = minimality_residual_at(a, &shared.iter().map(|s| s.0).collect::<Vec<_>>(), SOLVER_TOL).unwrap();
    let rb = minimality_residual_at(b, &shared.iter().map(|s| s.1).collect::<Vec<_>>(), SOLVER_TOL).unwrap();

    // a shear keeps every planar region planar but breaks criticality
    let shear = |q: &Point3| p(q.x + 0.3 * q.z, 1.2 * q.y, q.z);
    let a2 = a.with_positions(a.positions().iter().map(shear).collect());
    let b2 = b.with_positions(b.positions().iter().map(shear).collect());
    let (mut disagree, mut failing) = (0, 0);
    for &(x, y) in &shared {
        let fa = area_gradient(&a2, x).unwrap().norm() <= SOLVER_TOL;
        let fb = area_gradient(&b2, y).unwrap().norm() <= SOLVER_TOL;
        disagree += usize::from(fa != fb);
        failing += usize::from(!fa);
    }
    Retriangulation {
        shared: shared.len(),
        both_pass: ra.pass && rb.pass,
        disagree,
        failing,
    }
}

/// schwarzP_1 against the k = 4 catenoid ring with the same trace, whose
/// trapezoids are split the other way.
pub fn schwarz_p1_retriangulation() -> Retriangulation {
    let p1 = instantiate("schwarzP_1", &BTreeMap::new()).unwrap();
    let (o, shift) = schwarz_p1_catenoid().unwrap();
    let cat = instantiate_spec(catenoid_spec("remark", &o).unwrap(), &BTreeMap::new()).unwrap();
    let t = RigidMotion::translation(&shift);
    let mut g = GeneratorSet::new();
    for m in cat.generators.motions() {
        g.push(t.compose(&m).compose(&t.inverse()), None);
    }
    let window = Aabb::cube(0.0, 12.0).unwrap();
    let big = window.expanded(7.0);
    let a = extend(&p1.seed, &p1.generators, &big, 10_000).unwrap().surface;
    let b = extend(&t.apply(&cat.seed), &g, &big, 10_000).unwrap().surface;
    assert_ne!(a.num_triangles(), b.num_triangles());
    compare_triangulations(&a, &b, &window)
}

/// ht(b = 1), whose piece is a planar hexagon, with the fan about p7
/// against a fan from p1.
pub fn ht_retriangulation() -> Retriangulation {
    let inst = instantiate("ht", &params(&[("b", 1.0)])).unwrap();
    let x = inst.seed.positions();
    let n = (x[1] - x[0]).cross(&(x[2] - x[0])).normalize();
    assert!(x.iter().all(|q| (q - x[0]).dot(&n).abs() < 1e-12));
    let hex = SimplicialSurface::new(x[..6].to_vec(), vec![[0, 1, 2], [0, 2, 3], [0, 3, 4], [0, 4, 5]]).unwrap();
    let window = Aabb::new([-3.0, -3.0, -1.0], [5.0, 3.0, 1.0]).unwrap();
    let big = window.expanded(4.0);
    let a = extend(&inst.seed, &inst.generators, &big, 10_000).unwrap().surface;
    let b = extend(&hex, &inst.generators, &big, 10_000).unwrap().surface;
    compare_triangulations(&a, &b, &window)
}

/// Up to 500 triangles of an example's extension nearest its seed.
pub fn catalog_patch(id: &str) -> SimplicialSurface {
    let inst = minimal_instance(id, &BTreeMap::new());
    let e = inst.extend(40_000).unwrap();
    let (lo, hi) = inst.seed.bbox().unwrap();
    let c = (lo + hi) / 2.0;
    let s = &e.surface;
    let mut order: Vec<usize> = (0..s.num_triangles()).collect();
    let dist = |t: usize| (s.position(s.triangles()[t][0]) - c).norm();
    order.sort_by(|a, b| dist(*a).total_cmp(&dist(*b)));
    order.truncate(500);
    s.subsurface(&order)
}

/// Largest distance from the eight-segment loop to the extended
/// superman_2 surface.
pub fn superman_2_loop_distance(x: f64, y: f64) -> f64 {
    let inst = instantiate("superman_2", &params(&[("x", x), ("y", y)])).unwrap();
    let e = inst.extend(20_000).unwrap();
    let corners = [
        p(0., 0., -0.5),
        p(x, -y, -0.5),
        p(x, -y, 0.5),
        p(2. * x, 0., 0.5),
        p(2. * x, 0., -0.5),
        p(x, y, -0.5),
        p(x, y, 0.5),
        p(0., 0., 0.5),
    ];
    polyline_distance(&e.surface, &corners, 50, 1.0)
}

/// Triangles of a surface whose centroids fall in `w`, as sorted triples
/// of positions rounded to 1e-8.
fn triangles_in(s: &SimplicialSurface, w: &Aabb) -> BTreeSet<[[i64; 3]; 3]> {
    let q = |p: &Point3| [p.x, p.y, p.z].map(|c| (c * 1e8).round() as i64);
    s.triangles()
        .iter()
        .filter(|t| w.contains(&((s.position(t[0]) + s.position(t[1]) + s.position(t[2])) / 3.0)))
        .map(|t| {
            let mut k = t.map(|v| q(&s.position(v)));
            k.sort_unstable();
            k
        })
        .collect()
}

/// Triangle count in the overlap window and whether the trigonal and
/// hexagonal H-T blocks give the same triangles there, plus their trace
/// distance.
pub fn ht_blocks_agree() -> (usize, bool, f64) {
    let fixed = params(&[("b", 1.0)]);
    let inst = instantiate("ht", &fixed).unwrap();
    let (block, gens) = ht_hexagonal_block(&fixed).unwrap();
    let overlap = Aabb::new([-2.0, -3.0, -1.0], [6.0, 3.0, 1.0]).unwrap();
    let w = overlap.expanded(4.0);
    let trig = extend(&inst.seed, &inst.generators, &w, 40_000).unwrap().surface;
    let hex = extend(&block, &gens, &w, 40_000).unwrap().surface;
    let (a, b) = (triangles_in(&trig, &overlap), triangles_in(&hex, &overlap));
    (
        a.len(),
        a == b,
        trace_distance(&trig, &hex, |q| overlap.contains(q), 1.0),
    )
}

/// Trace distance between the k = 4, n = 1 catenoid ring extension and
/// schwarzP_1 over one period cube.
pub fn remark_trace_distance() -> f64 {
    use plmin::catalog::{catenoid_extensions, catenoid_meridian, catenoid_ring, CatenoidMode};
    let (o, shift) = schwarz_p1_catenoid().unwrap();
    assert_eq!((o.k, o.n), (4, 1));
    let s = catenoid_ring(&catenoid_meridian(o.r, o.delta, 4, 0.0, -1, 1).unwrap(), 4).unwrap();
    let s = RigidMotion::translation(&shift).apply(&s);
    let g = catenoid_extensions(&s, 4, CatenoidMode::SchwarzPRotations).unwrap();
    let w = Aabb::cube(0.0, 12.0).unwrap();
    let cat = extend(&s, &g, &w.expanded(6.0), 20_000).unwrap().surface;
    let p1 = instantiate("schwarzP_1", &BTreeMap::new()).unwrap();
    let sp = extend(&p1.seed, &p1.generators, &w.expanded(6.0), 20_000)
        .unwrap()
        .surface;
    trace_distance(&cat, &sp, |q| w.contains(q), 1.0)
}
