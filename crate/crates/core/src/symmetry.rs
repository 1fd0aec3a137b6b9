//! Rigid motions and bounded orbit expansion.

use std::collections::{HashMap, HashSet, VecDeque};

use nalgebra::Matrix3;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mesh::{weld_with_map, Point3, SimplicialSurface, Vec3, VertexId, WELD_TOLERANCE};

pub const MOTION_QUANTUM: f64 = 1e-9;
pub const DEFAULT_MAX_COPIES: usize = 10_000;
const EPS: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MotionKind {
    Identity,
    Reflection,
    HalfTurn,
    Rotation,
    Translation,
    Screw,
    General,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RigidMotion {
    pub linear: Matrix3<f64>,
    pub translation: Vec3,
    pub kind: MotionKind,
}

fn unit(v: &Vec3, what: &str) -> Result<Vec3> {
    let n = v.norm();
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::InvalidArgument(format!("{what} must be non-zero")));
    }
    Ok(v / n)
}

impl RigidMotion {
    pub fn identity() -> Self {
        RigidMotion {
            linear: Matrix3::identity(),
            translation: Vec3::zeros(),
            kind: MotionKind::Identity,
        }
    }

    /// x -> L x + t, kind inferred.
    pub fn from_parts(linear: Matrix3<f64>, translation: Vec3) -> Self {
        let mut m = RigidMotion {
            linear,
            translation,
            kind: MotionKind::General,
        };
        m.kind = m.classify();
        m
    }

    fn about_point(linear: Matrix3<f64>, point: &Point3, kind: MotionKind) -> Self {
        RigidMotion {
            translation: point - linear * point,
            linear,
            kind,
        }
    }

    pub fn half_turn_about_line(point: &Point3, direction: &Vec3) -> Result<Self> {
        let u = unit(direction, "axis direction")?;
        let l = 2.0 * u * u.transpose() - Matrix3::identity();
        Ok(Self::about_point(l, point, MotionKind::HalfTurn))
    }

    pub fn half_turn_about_edge(p: &Point3, q: &Point3) -> Result<Self> {
        if p == q {
            return Err(Error::InvalidArgument("edge endpoints coincide".into()));
        }
        Self::half_turn_about_line(p, &(q - p))
    }

    pub fn reflection_across_plane(point: &Point3, normal: &Vec3) -> Result<Self> {
        let n = unit(normal, "plane normal")?;
        let l = Matrix3::identity() - 2.0 * n * n.transpose();
        Ok(Self::about_point(l, point, MotionKind::Reflection))
    }

    /// Right-handed rotation by `angle` radians about the oriented axis.
    pub fn rotation_about_axis(point: &Point3, direction: &Vec3, angle: f64) -> Result<Self> {
        let u = unit(direction, "axis direction")?;
        let k = u.cross_matrix();
        let l = Matrix3::identity() + angle.sin() * k + (1.0 - angle.cos()) * k * k;
        let mut m = Self::about_point(l, point, MotionKind::Rotation);
        m.kind = m.classify();
        Ok(m)
    }

    pub fn translation(v: &Vec3) -> Self {
        Self::from_parts(Matrix3::identity(), *v)
    }

    pub fn det(&self) -> f64 {
        self.linear.determinant()
    }

    pub fn is_orthogonal(&self, tol: f64) -> bool {
        (self.linear.transpose() * self.linear - Matrix3::identity()).amax() <= tol
    }

    pub fn apply_point(&self, p: &Point3) -> Point3 {
        self.linear * p + self.translation
    }

    pub fn apply_vector(&self, v: &Vec3) -> Vec3 {
        self.linear * v
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &RigidMotion) -> RigidMotion {
        Self::from_parts(
            self.linear * other.linear,
            self.linear * other.translation + self.translation,
        )
    }

    pub fn inverse(&self) -> RigidMotion {
        let lt = self.linear.transpose();
        Self::from_parts(lt, -(lt * self.translation))
    }

    /// Matrix distance to another motion (max abs entry).
    pub fn distance(&self, other: &RigidMotion) -> f64 {
        (self.linear - other.linear)
            .amax()
            .max((self.translation - other.translation).amax())
    }

    /// Quantized defining reals, used to deduplicate group elements.
    pub fn key(&self) -> [i64; 12] {
        let mut k = [0i64; 12];
        for (i, v) in self.linear.iter().chain(self.translation.iter()).enumerate() {
            k[i] = (v / MOTION_QUANTUM).round() as i64;
        }
        k
    }

    fn classify(&self) -> MotionKind {
        let l = &self.linear;
        let t = &self.translation;
        let tr = l.trace();
        if self.det() < 0.0 {
            // reflection: symmetric with trace 1, translation along the normal
            if (tr - 1.0).abs() < EPS && (l - l.transpose()).amax() < EPS {
                let p = (Matrix3::identity() - l) * 0.5;
                if ((Matrix3::identity() - p) * t).amax() < EPS {
                    return MotionKind::Reflection;
                }
            }
            return MotionKind::General;
        }
        if (l - Matrix3::identity()).amax() < EPS {
            return if t.amax() < EPS {
                MotionKind::Identity
            } else {
                MotionKind::Translation
            };
        }
        let axis = Vec3::new(l[(2, 1)] - l[(1, 2)], l[(0, 2)] - l[(2, 0)], l[(1, 0)] - l[(0, 1)]);
        let axis = if axis.norm() > 1e-8 {
            axis.normalize()
        } else {
            // angle π: axis from L + I
            let m = l + Matrix3::identity();
            let c = (0..3)
                .map(|j| m.column(j).into_owned())
                .max_by(|a, b| a.norm().total_cmp(&b.norm()))
                .unwrap();
            c.normalize()
        };
        let along = axis.dot(t).abs() < EPS;
        match ((tr + 1.0).abs() < EPS, along) {
            (true, true) => MotionKind::HalfTurn,
            (false, true) => MotionKind::Rotation,
            _ => MotionKind::Screw,
        }
    }

    /// Image of a surface; orientation reversed iff the motion does.
    pub fn apply(&self, surface: &SimplicialSurface) -> SimplicialSurface {
        let pos = surface.positions().iter().map(|p| self.apply_point(p)).collect();
        let tris = if self.det() < 0.0 {
            surface.triangles().iter().map(|t| [t[0], t[2], t[1]]).collect()
        } else {
            surface.triangles().to_vec()
        };
        SimplicialSurface::from_parts_unchecked(pos, tris)
    }
}

/// Closed axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Aabb {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
}

impl Aabb {
    pub fn new(lo: [f64; 3], hi: [f64; 3]) -> Result<Self> {
        if (0..3).any(|i| !(lo[i] < hi[i])) {
            return Err(Error::InvalidArgument(format!("empty window {lo:?}..{hi:?}")));
        }
        Ok(Aabb { lo, hi })
    }

    pub fn cube(lo: f64, hi: f64) -> Result<Self> {
        Self::new([lo; 3], [hi; 3])
    }

    pub fn of_points(points: &[Point3]) -> Option<Self> {
        let first = points.first()?;
        let mut b = Aabb {
            lo: [first.x, first.y, first.z],
            hi: [first.x, first.y, first.z],
        };
        for p in points {
            for i in 0..3 {
                b.lo[i] = b.lo[i].min(p[i]);
                b.hi[i] = b.hi[i].max(p[i]);
            }
        }
        Some(b)
    }

    pub fn expanded(&self, m: f64) -> Aabb {
        Aabb {
            lo: self.lo.map(|v| v - m),
            hi: self.hi.map(|v| v + m),
        }
    }

    pub fn intersects(&self, other: &Aabb, tol: f64) -> bool {
        (0..3).all(|i| self.lo[i] <= other.hi[i] + tol && other.lo[i] <= self.hi[i] + tol)
    }

    pub fn contains(&self, p: &Point3) -> bool {
        (0..3).all(|i| self.lo[i] <= p[i] && p[i] <= self.hi[i])
    }

    /// Signed distance from `p` to the nearest face, positive inside.
    pub fn depth(&self, p: &Point3) -> f64 {
        (0..3)
            .map(|i| (p[i] - self.lo[i]).min(self.hi[i] - p[i]))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn diagonal(&self) -> f64 {
        (0..3).map(|i| (self.hi[i] - self.lo[i]).powi(2)).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Fixes {
    Edge(Point3, Point3),
    Line(Point3, Vec3),
    Plane(Point3, Vec3),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    pub motion: RigidMotion,
    pub fixes: Option<Fixes>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GeneratorSet {
    pub generators: Vec<Generator>,
}

impl GeneratorSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, motion: RigidMotion, fixes: Option<Fixes>) {
        self.generators.push(Generator { motion, fixes });
    }

    pub fn half_turn(&mut self, p: &Point3, q: &Point3) -> Result<()> {
        let m = RigidMotion::half_turn_about_edge(p, q)?;
        self.push(m, Some(Fixes::Edge(*p, *q)));
        Ok(())
    }

    pub fn reflection(&mut self, point: &Point3, normal: &Vec3) -> Result<()> {
        let m = RigidMotion::reflection_across_plane(point, normal)?;
        self.push(m, Some(Fixes::Plane(*point, *normal)));
        Ok(())
    }

    /// Half-turns about every boundary edge of `surface`.
    pub fn boundary_half_turns(surface: &SimplicialSurface) -> Result<Self> {
        let mut g = GeneratorSet::new();
        let x = surface.positions();
        for (a, b) in surface.boundary() {
            g.half_turn(&x[a], &x[b])?;
        }
        Ok(g)
    }

    pub fn motions(&self) -> Vec<RigidMotion> {
        self.generators.iter().map(|g| g.motion.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }

    /// Every annotated generator fixes its edge, line or plane.
    pub fn check_annotations(&self, tol: f64) -> bool {
        self.generators.iter().all(|g| {
            let m = &g.motion;
            let fixed = |p: &Point3| (m.apply_point(p) - p).norm() <= tol;
            match &g.fixes {
                None => true,
                Some(Fixes::Edge(p, q)) => fixed(p) && fixed(q),
                Some(Fixes::Line(p, d)) => fixed(p) && fixed(&(p + d)),
                Some(Fixes::Plane(p, n)) => {
                    let n = n.normalize();
                    let a = if n.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
                    let u = n.cross(&a).normalize();
                    let v = n.cross(&u);
                    fixed(p) && fixed(&(p + u)) && fixed(&(p + v))
                }
            }
        })
    }
}

/// A welded window of the orbit of a seed surface.
#[derive(Debug, Clone)]
pub struct Extension {
    pub surface: SimplicialSurface,
    /// Group element of each kept copy; the first is the identity.
    pub copies: Vec<RigidMotion>,
    /// For each output vertex, one (copy, seed vertex) that realizes it.
    pub vertex_source: Vec<(usize, VertexId)>,
    pub window: Aabb,
}

fn point_key(p: &Point3, q: f64) -> [i64; 3] {
    [
        (p.x / q).round() as i64,
        (p.y / q).round() as i64,
        (p.z / q).round() as i64,
    ]
}

/// Breadth-first orbit of `seed`, keeping copies whose bounding box meets
/// `window`, welded into one surface.
pub fn extend(
    seed: &SimplicialSurface,
    generators: &GeneratorSet,
    window: &Aabb,
    max_copies: usize,
) -> Result<Extension> {
    if max_copies < 1 {
        return Err(Error::InvalidArgument("max_copies must be at least 1".into()));
    }
    let seed_box = Aabb::of_points(seed.positions()).ok_or_else(|| Error::InvalidArgument("empty seed".into()))?;
    // copies outside the window may still connect copies inside it
    let search = window.expanded(seed_box.diagonal());
    let gens = generators.motions();
    let explore_limit = max_copies.saturating_mul(64).max(1024);

    let mut seen_elements: HashSet<[i64; 12]> = HashSet::new();
    let mut seen_copies: HashSet<Vec<[i64; 3]>> = HashSet::new();
    let mut kept: Vec<RigidMotion> = Vec::new();
    let mut queue = VecDeque::new();
    let id = RigidMotion::identity();
    seen_elements.insert(id.key());
    queue.push_back(id);
    let mut explored = 0usize;

    while let Some(g) = queue.pop_front() {
        explored += 1;
        if explored > explore_limit {
            return Err(Error::BudgetExceeded {
                placed: kept.len(),
                limit: max_copies,
            });
        }
        let pts: Vec<Point3> = seed.positions().iter().map(|p| g.apply_point(p)).collect();
        let b = Aabb::of_points(&pts).unwrap();
        if !b.intersects(&search, 1e-9) {
            continue;
        }
        if b.intersects(window, 1e-9) {
            let mut key: Vec<[i64; 3]> = pts.iter().map(|p| point_key(p, 1e-7)).collect();
            key.sort_unstable();
            if seen_copies.insert(key) {
                if kept.len() == max_copies {
                    return Err(Error::BudgetExceeded {
                        placed: kept.len(),
                        limit: max_copies,
                    });
                }
                kept.push(g.clone());
            }
        }
        for s in &gens {
            let h = g.compose(s);
            if seen_elements.insert(h.key()) {
                queue.push_back(h);
            }
        }
    }

    let parts: Vec<SimplicialSurface> = kept.iter().map(|g| g.apply(seed)).collect();
    let all = SimplicialSurface::concat(&parts);
    let (surface, map) = weld_with_map(&all, WELD_TOLERANCE)?;
    let nv = seed.num_vertices();
    let mut vertex_source = vec![(usize::MAX, 0); surface.num_vertices()];
    for (i, &w) in map.iter().enumerate() {
        if vertex_source[w].0 == usize::MAX {
            vertex_source[w] = (i / nv, i % nv);
        }
    }
    Ok(Extension {
        surface,
        copies: kept,
        vertex_source,
        window: *window,
    })
}

impl Extension {
    /// Interior vertices farther than one longest edge from the window
    /// boundary; only these have complete stars.
    pub fn window_interior_vertices(&self) -> Vec<VertexId> {
        window_interior_vertices(&self.surface, &self.window)
    }

    /// Shortest independent translations among the kept copies, at most three.
    pub fn translation_periods(&self) -> Vec<Vec3> {
        let mut t: Vec<Vec3> = self
            .copies
            .iter()
            .filter(|g| (g.linear - Matrix3::identity()).amax() < 1e-9 && g.translation.norm() > 1e-9)
            .map(|g| g.translation.map(|c| if c.abs() < 1e-12 { 0.0 } else { c }))
            .collect();
        t.sort_by(|a, b| a.norm().partial_cmp(&b.norm()).unwrap());
        let mut basis: Vec<Vec3> = Vec::new();
        for v in t {
            let independent = match basis.len() {
                0 => true,
                1 => basis[0].cross(&v).norm() > 1e-9 * v.norm() * basis[0].norm(),
                2 => basis[0].cross(&basis[1]).dot(&v).abs() > 1e-9 * v.norm().powi(3),
                _ => false,
            };
            if independent {
                basis.push(v);
            }
        }
        basis
    }
}

pub fn window_interior_vertices(surface: &SimplicialSurface, window: &Aabb) -> Vec<VertexId> {
    let margin = surface.longest_edge();
    let kinds = surface.classify_vertices();
    surface
        .positions()
        .iter()
        .enumerate()
        .filter(|(i, p)| window.depth(p) > margin && kinds[*i] == crate::mesh::VertexKind::Interior)
        .map(|(i, _)| i)
        .collect()
}

/// Window-interior vertices that lie on the boundary of the extension.
/// Non-empty means the orbit did not close up inside the window.
pub fn window_holes(surface: &SimplicialSurface, window: &Aabb) -> Vec<VertexId> {
    let margin = surface.longest_edge();
    let kinds = surface.classify_vertices();
    surface
        .positions()
        .iter()
        .enumerate()
        .filter(|(i, p)| window.depth(p) > margin && kinds[*i] == crate::mesh::VertexKind::Boundary)
        .map(|(i, _)| i)
        .collect()
}

/// Hash lookup of vertices by position.
pub struct PointIndex {
    cell: f64,
    map: HashMap<[i64; 3], Vec<usize>>,
    points: Vec<Point3>,
}

impl PointIndex {
    pub fn new(points: &[Point3], cell: f64) -> Self {
        let mut map: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            map.entry(Self::cell_of(p, cell)).or_default().push(i);
        }
        PointIndex {
            cell,
            map,
            points: points.to_vec(),
        }
    }

    fn cell_of(p: &Point3, cell: f64) -> [i64; 3] {
        [
            (p.x / cell).floor() as i64,
            (p.y / cell).floor() as i64,
            (p.z / cell).floor() as i64,
        ]
    }

    /// Nearest indexed point within `tol` (requires `tol <= cell`).
    pub fn find(&self, p: &Point3, tol: f64) -> Option<usize> {
        let c = Self::cell_of(p, self.cell);
        let mut best: Option<(f64, usize)> = None;
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(list) = self.map.get(&[c[0] + dx, c[1] + dy, c[2] + dz]) {
                        for &i in list {
                            let d = (self.points[i] - p).norm();
                            if d <= tol && best.map_or(true, |(bd, _)| d < bd) {
                                best = Some((d, i));
                            }
                        }
                    }
                }
            }
        }
        best.map(|(_, i)| i)
    }
}

const MATCH_TOL: f64 = 1e-7;

/// True iff `motion` maps the part of `surface` well inside `window` onto
/// vertices and triangles of `surface`.
pub fn motion_is_symmetry(surface: &SimplicialSurface, motion: &RigidMotion, window: &Aabb) -> bool {
    maps_into_itself(surface, |p| motion.apply_point(p), window).unwrap_or(false)
}

/// Candidate translations under which the surface is invariant.
pub fn detect_periods(surface: &SimplicialSurface, candidates: &[Vec3]) -> Vec<Vec3> {
    let Some(window) = Aabb::of_points(surface.positions()) else {
        return Vec::new();
    };
    candidates
        .iter()
        .filter(|t| maps_into_itself(surface, |p| p + *t, &window).unwrap_or(false))
        .copied()
        .collect()
}

/// `None` when nothing was testable (no vertex and its image both well
/// inside the window).
fn maps_into_itself(surface: &SimplicialSurface, f: impl Fn(&Point3) -> Point3, window: &Aabb) -> Option<bool> {
    let margin = surface.longest_edge();
    let x = surface.positions();
    let index = PointIndex::new(x, 1e-6);
    let inside = |p: &Point3| window.depth(p) > margin;
    let mut image = vec![None; x.len()];
    let mut tested = 0;
    for (i, p) in x.iter().enumerate() {
        let q = f(p);
        if inside(p) && inside(&q) {
            tested += 1;
            match index.find(&q, MATCH_TOL) {
                Some(j) => image[i] = Some(j),
                None => return Some(false),
            }
        }
    }
    if tested == 0 {
        return None;
    }
    let tris: HashSet<[usize; 3]> = surface
        .triangles()
        .iter()
        .map(|t| {
            let mut k = *t;
            k.sort_unstable();
            k
        })
        .collect();
    for t in surface.triangles() {
        if let (Some(a), Some(b), Some(c)) = (image[t[0]], image[t[1]], image[t[2]]) {
            let mut k = [a, b, c];
            k.sort_unstable();
            if !tris.contains(&k) {
                return Some(false);
            }
        }
    }
    Some(true)
}
