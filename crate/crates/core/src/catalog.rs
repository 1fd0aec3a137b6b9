//! Built-in examples.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::domain::{DomainSpec, ExprVec, GeneratorDecl, ParamDecl, Provenance, VertexDecl};
use crate::error::{Error, Result};
use crate::expr::{Env, Expr};
use crate::io::parse_domain_spec;
use crate::mesh::{Point3, SimplicialSurface, Vec3, VertexId, VertexKind};
use crate::solver::{solve, Method, SolveProblem, SolveReport};
use crate::symmetry::{extend, Aabb, Extension, GeneratorSet, DEFAULT_MAX_COPIES};

const SPECS: &[(&str, &str)] = &[
    ("superman_1", include_str!("../specs/superman_1.spec")),
    ("superman_2", include_str!("../specs/superman_2.spec")),
    ("superman_3", include_str!("../specs/superman_3.spec")),
    ("superman_4", include_str!("../specs/superman_4.spec")),
    ("schwarzP_1", include_str!("../specs/schwarzP_1.spec")),
    ("schwarzP_2", include_str!("../specs/schwarzP_2.spec")),
    ("clp", include_str!("../specs/clp.spec")),
    (
        "clp_method2_superman",
        include_str!("../specs/clp_method2_superman.spec"),
    ),
    ("clp_method2_P", include_str!("../specs/clp_method2_P.spec")),
    ("iwp", include_str!("../specs/iwp.spec")),
    ("frd", include_str!("../specs/frd.spec")),
    ("ht", include_str!("../specs/ht.spec")),
    ("fischer_koch", include_str!("../specs/fischer_koch.spec")),
];

/// Catenoid-based ids and the (k, mode) they stand for.
const CATENOIDS: &[(&str, usize, CatenoidMode)] = &[
    ("catenoid_PH_family", 4, CatenoidMode::SchwarzPRotations),
    ("catenoid_H", 3, CatenoidMode::SchwarzHRotations),
    ("catenoid_H_hex", 3, CatenoidMode::HexagonalTranslations),
    ("catenoid_P_method2", 4, CatenoidMode::Method2Reflections),
];

#[derive(Debug, Clone, Serialize)]
pub struct Descriptor {
    pub id: String,
    pub title: String,
    pub family: String,
    pub fundamental_triangles: usize,
    pub free_parameters: Vec<String>,
    pub fixed_parameters: Vec<String>,
    pub closed_form: Option<Provenance>,
}

pub fn ids() -> Vec<&'static str> {
    let mut v: Vec<&str> = SPECS.iter().map(|(id, _)| *id).collect();
    v.insert(6, "schwarzP_3");
    v.extend(CATENOIDS.iter().map(|(id, _, _)| *id));
    v
}

pub fn catalog_list() -> Vec<Descriptor> {
    ids()
        .into_iter()
        .map(|id| {
            let s = spec(id).expect("built-in spec");
            Descriptor {
                id: id.to_string(),
                title: s.meta("title").unwrap_or("").to_string(),
                family: s.meta("family").unwrap_or("").to_string(),
                fundamental_triangles: s.fundamental_triangles,
                free_parameters: s.free_parameters(),
                fixed_parameters: s
                    .parameters
                    .iter()
                    .filter(|p| !p.free)
                    .map(|p| p.name.clone())
                    .collect(),
                closed_form: s.closed_forms.first().map(|c| c.provenance),
            }
        })
        .collect()
}

fn unknown(id: &str) -> Error {
    Error::InvalidArgument(format!("unknown example `{id}`"))
}

/// The domain spec of a built-in example at its default structure.
pub fn spec(id: &str) -> Result<DomainSpec> {
    if let Some((_, text)) = SPECS.iter().find(|(k, _)| *k == id) {
        return parse_domain_spec(text);
    }
    if id == "schwarzP_3" {
        return Ok(schwarz_p32_spec());
    }
    if let Some((_, k, mode)) = CATENOIDS.iter().find(|(k, _, _)| *k == id) {
        return catenoid_spec(id, &CatenoidOptions::standard(*k, *mode));
    }
    Err(unknown(id))
}

/// The spec of `id`, honouring structural overrides (`n` for catenoids).
pub fn spec_with(id: &str, overrides: &BTreeMap<String, f64>) -> Result<DomainSpec> {
    if let Some((_, k, mode)) = CATENOIDS.iter().find(|(k, _, _)| *k == id) {
        let mut o = CatenoidOptions::standard(*k, *mode);
        if let Some(&n) = overrides.get("n") {
            if !(n >= 1.0 && n.fract() == 0.0 && n <= 50.0) {
                return Err(Error::InvalidArgument("n must be an integer in 1..=50".into()));
            }
            o.n = n as i32;
        }
        return catenoid_spec(id, &o);
    }
    spec(id)
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub spec: DomainSpec,
    pub env: Env,
    pub seed: SimplicialSurface,
    pub generators: GeneratorSet,
    pub window: Aabb,
    pub periods: Vec<Vec3>,
}

impl Instance {
    pub fn problem(&self) -> Result<SolveProblem> {
        self.spec.problem(&self.env, false)
    }

    /// Every interior vertex free in all coordinates.
    pub fn full_free_problem(&self) -> Result<SolveProblem> {
        self.spec.problem(&self.env, true)
    }

    /// Orbit of the seed over the window plus a margin of two edge lengths,
    /// so that every vertex inside the window has its full star.
    pub fn extend(&self, max_copies: usize) -> Result<Extension> {
        let margin = 2.0 * self.seed.longest_edge();
        let mut ext = extend(&self.seed, &self.generators, &self.window.expanded(margin), max_copies)?;
        ext.window = self.window.expanded(margin);
        Ok(ext)
    }

    /// Interior vertices of an extension that lie inside the window.
    pub fn window_vertices(&self, ext: &Extension) -> Vec<VertexId> {
        let kinds = ext.surface.classify_vertices();
        ext.surface
            .positions()
            .iter()
            .enumerate()
            .filter(|(i, p)| self.window.contains(p) && kinds[*i] == VertexKind::Interior)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Realizes an example. Free parameters not overridden take the matching
/// closed form, else their defaults.
pub fn instantiate(id: &str, overrides: &BTreeMap<String, f64>) -> Result<Instance> {
    let spec = spec_with(id, overrides)?;
    let mut params = overrides.clone();
    params.remove("n");
    instantiate_spec(spec, &params)
}

pub fn instantiate_spec(spec: DomainSpec, overrides: &BTreeMap<String, f64>) -> Result<Instance> {
    let env = spec.resolve(overrides)?;
    let seed = spec.seed(&env)?;
    let generators = spec.generators(&env)?;
    let mut periods = spec.periods(&env)?;
    if periods.is_empty() {
        let b = Aabb::of_points(seed.positions()).unwrap();
        periods =
            extend(&seed, &generators, &b.expanded(1.5 * b.diagonal()), DEFAULT_MAX_COPIES)?.translation_periods();
    }
    let window = match spec.window(&env)? {
        Some(w) => w,
        None => period_window(&seed, &periods)?,
    };
    Ok(Instance {
        spec,
        env,
        seed,
        generators,
        window,
        periods,
    })
}

/// The instance at a minimal configuration: as given when its residual is
/// already below `tol`, otherwise re-instantiated at the solver's answer.
/// The solve report is returned whenever the solver ran.
pub fn settle(
    inst: Instance,
    overrides: &BTreeMap<String, f64>,
    tol: f64,
    max_iter: usize,
) -> Result<(Instance, Option<SolveReport>)> {
    let problem = inst.problem()?;
    if problem.parameters.is_empty() || problem.residual(&problem.initial())?.norm() <= tol {
        return Ok((inst, None));
    }
    let rep = solve(&problem, Method::NewtonFdJacobian, tol, max_iter)?;
    if !rep.converged {
        return Ok((inst, Some(rep)));
    }
    let mut all = overrides.clone();
    all.remove("n");
    all.extend(rep.final_parameters.clone());
    Ok((instantiate_spec(inst.spec, &all)?, Some(rep)))
}

/// Box around the seed wide enough for two steps along every period.
pub fn period_window(seed: &SimplicialSurface, periods: &[Vec3]) -> Result<Aabb> {
    let b = Aabb::of_points(seed.positions()).ok_or_else(|| Error::InvalidArgument("empty seed".into()))?;
    let c = [0, 1, 2].map(|i| (b.lo[i] + b.hi[i]) / 2.0);
    let mut half = [0.0; 3];
    for p in periods {
        for i in 0..3 {
            half[i] += p[i].abs();
        }
    }
    for i in 0..3 {
        // a missing period direction still gets the seed's own extent
        half[i] = half[i].max(b.hi[i] - b.lo[i]);
    }
    Aabb::new([0, 1, 2].map(|i| c[i] - half[i]), [0, 1, 2].map(|i| c[i] + half[i]))
}

pub fn closed_form(id: &str, overrides: &BTreeMap<String, f64>) -> Result<Option<(Provenance, BTreeMap<String, f64>)>> {
    let spec = spec_with(id, overrides)?;
    let mut params = overrides.clone();
    params.remove("n");
    // only fixed parameters select a closed form
    params.retain(|k, _| spec.param(k).map_or(false, |p| !p.free));
    let env = spec.resolve(&params)?;
    Ok(spec.closed_form_values(&env))
}

/// The H-T surface cut to the hexagonal prism of circumradius 2√3 over the
/// tiling vertex (2, 0), between the mirrors z = ±b, together with the
/// mirrors in its eight faces. Extending it rebuilds the same surface as
/// the trigonal block.
pub fn ht_hexagonal_block(overrides: &BTreeMap<String, f64>) -> Result<(SimplicialSurface, GeneratorSet)> {
    let inst = instantiate("ht", overrides)?;
    let b = inst.env["b"];
    let centre = Vec3::new(2.0, 0.0, 0.0);
    let apothem = 3.0;
    let normals: Vec<Vec3> = (0..6)
        .map(|i| {
            let t = std::f64::consts::PI / 3.0 * i as f64;
            Vec3::new(t.cos(), t.sin(), 0.0)
        })
        .collect();
    let reach = 2.0 * 3f64.sqrt() + 1.0;
    let window = Aabb::new([centre.x - reach, -reach, -b - 1.0], [centre.x + reach, reach, b + 1.0])?;
    let ext = extend(&inst.seed, &inst.generators, &window, DEFAULT_MAX_COPIES)?;
    let x = ext.surface.positions();
    let inside = |c: &Point3| c.z.abs() <= b + 1e-9 && normals.iter().all(|n| (c - centre).dot(n) <= apothem + 1e-9);
    let faces: Vec<usize> = ext
        .surface
        .triangles()
        .iter()
        .enumerate()
        .filter(|(_, t)| inside(&((x[t[0]] + x[t[1]] + x[t[2]]) / 3.0)))
        .map(|(i, _)| i)
        .collect();
    let block = ext.surface.subsurface(&faces);
    block.validate()?;
    let mut g = GeneratorSet::new();
    for n in &normals {
        g.reflection(&(centre + apothem * n), n)?;
    }
    g.reflection(&Point3::new(0.0, 0.0, b), &Vec3::z())?;
    g.reflection(&Point3::new(0.0, 0.0, -b), &Vec3::z())?;
    Ok((block, g))
}

// ---------------------------------------------------------------------------
// the 32-triangle Schwarz P piece

fn n(v: f64) -> Expr {
    Expr::num(v)
}

fn neg(e: Expr) -> Expr {
    Expr::Neg(Box::new(e))
}

fn schwarz_p32_spec() -> DomainSpec {
    let a = || Expr::var("a");
    let sign = |s: i32, e: Expr| if s < 0 { neg(e) } else { e };
    let mut hat: Vec<[Expr; 3]> = Vec::new();
    for j in 1..=2 {
        let pj = if j % 2 == 0 { 1 } else { -1 };
        hat.push([a(), sign(pj, a()), n(1.0)]);
    }
    for j in 1..=2 {
        let pj = if j % 2 == 0 { -1 } else { 1 };
        hat.push([a(), n(1.0), sign(pj, a())]);
    }
    for j in 1..=2 {
        let pj = if j % 2 == 0 { -1 } else { 1 };
        hat.push([a(), sign(pj, a()), n(-1.0)]);
    }
    for j in 1..=2 {
        let pj = if j % 2 == 0 { 1 } else { -1 };
        hat.push([n(1.0), sign(pj, a()), a()]);
    }
    for j in 1..=2 {
        let pj = if j % 2 == 0 { -1 } else { 1 };
        hat.push([n(1.0), sign(pj, a()), neg(a())]);
    }
    // order: p1 p2 | p3 p4 | p5 p6 | p7 p8 | p9 p10
    let hat_tris = [
        [1, 2, 7],
        [2, 8, 7],
        [2, 3, 8],
        [3, 4, 8],
        [4, 9, 8],
        [4, 5, 9],
        [5, 6, 9],
        [6, 10, 9],
    ];
    // quarter turns about the z-axis act on expressions as (x, y) -> (-y, x)
    let turn = |v: &[Expr; 3]| -> [Expr; 3] { [neg(v[1].clone()), v[0].clone(), v[2].clone()] };
    let probe = |v: &[Expr; 3]| -> [i64; 3] {
        let mut env = Env::new();
        env.insert("a".into(), 0.37);
        [0, 1, 2].map(|i| (v[i].eval(&env).unwrap() * 1e6).round() as i64)
    };
    let mut vertices: Vec<[Expr; 3]> = Vec::new();
    let mut keys: Vec<[i64; 3]> = Vec::new();
    let mut triangles = Vec::new();
    let mut cur = hat.clone();
    for _ in 0..4 {
        let mut map = Vec::new();
        for v in &cur {
            let key = probe(v);
            let id = match keys.iter().position(|k| *k == key) {
                Some(i) => i,
                None => {
                    keys.push(key);
                    vertices.push(simplify(v));
                    vertices.len() - 1
                }
            };
            map.push(id);
        }
        for t in &hat_tris {
            triangles.push([map[t[0] - 1], map[t[1] - 1], map[t[2] - 1]]);
        }
        cur = cur.iter().map(turn).collect();
    }
    let reflect = |axis: usize, at: f64| {
        let mut p = [n(0.0), n(0.0), n(0.0)];
        let mut nv = [n(0.0), n(0.0), n(0.0)];
        p[axis] = n(at);
        nv[axis] = n(1.0);
        GeneratorDecl::Reflect { point: p, normal: nv }
    };
    let closed = Expr::parse("(3*sqrt(2) - sqrt(3))/(6*sqrt(2) - sqrt(3))").unwrap();
    DomainSpec {
        name: "schwarzP_3".into(),
        meta: vec![
            ("title".into(), "Schwarz P surface, 32-triangle piece".into()),
            ("family".into(), "schwarz_p".into()),
        ],
        parameters: vec![ParamDecl {
            name: "a".into(),
            default: n(0.35),
            lo: n(0.0),
            hi: n(1.0),
            lo_open: true,
            hi_open: true,
            free: true,
        }],
        lets: vec![],
        vertices: vertices.into_iter().map(VertexDecl::Coords).collect(),
        triangles,
        constraints: vec![],
        generators: vec![
            reflect(0, 1.0),
            reflect(0, -1.0),
            reflect(1, 1.0),
            reflect(1, -1.0),
            reflect(2, 1.0),
            reflect(2, -1.0),
        ],
        periods: vec![
            [n(4.0), n(0.0), n(0.0)],
            [n(0.0), n(4.0), n(0.0)],
            [n(0.0), n(0.0), n(4.0)],
        ],
        window: None,
        fundamental_triangles: 32,
        closed_forms: vec![crate::domain::ClosedForm {
            provenance: Provenance::Paper,
            when: vec![],
            values: vec![("a".into(), closed)],
        }],
    }
}

/// Removes double negation so generated specs print cleanly.
fn simplify(v: &[Expr; 3]) -> [Expr; 3] {
    fn s(e: &Expr) -> Expr {
        match e {
            Expr::Neg(inner) => match inner.as_ref() {
                Expr::Neg(x) => s(x),
                Expr::Num(v) => Expr::Num(-v),
                other => neg(s(other)),
            },
            other => other.clone(),
        }
    }
    [s(&v[0]), s(&v[1]), s(&v[2])]
}

// ---------------------------------------------------------------------------
// catenoid-based examples

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CatenoidMode {
    SchwarzPRotations,
    SchwarzHRotations,
    HexagonalTranslations,
    Method2Reflections,
}

impl CatenoidMode {
    pub fn from_name(s: &str) -> Option<CatenoidMode> {
        match s {
            "schwarz_P_rotations" | "p" => Some(CatenoidMode::SchwarzPRotations),
            "schwarz_H_rotations" | "h" => Some(CatenoidMode::SchwarzHRotations),
            "hexagonal_translations" | "hex" => Some(CatenoidMode::HexagonalTranslations),
            "method2_reflections" | "method2" => Some(CatenoidMode::Method2Reflections),
            _ => None,
        }
    }
}

/// Which of the two symmetric placements of the meridian vertices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CatenoidOffset {
    /// z0 = 0, j0 = -n, j1 = n.
    Centered,
    /// z0 = delta/2, j0 = -n - 1, j1 = n.
    HalfStep,
}

#[derive(Debug, Clone)]
pub struct CatenoidOptions {
    pub k: usize,
    pub n: i32,
    pub offset: CatenoidOffset,
    pub mode: CatenoidMode,
    pub r: f64,
    pub delta: f64,
}

impl CatenoidOptions {
    pub fn standard(k: usize, mode: CatenoidMode) -> CatenoidOptions {
        let (n, offset) = if k == 4 {
            (2, CatenoidOffset::Centered)
        } else {
            (1, CatenoidOffset::HalfStep)
        };
        CatenoidOptions {
            k,
            n,
            offset,
            mode,
            r: 1.0,
            delta: 0.5,
        }
    }

    pub fn j_range(&self) -> (i32, i32) {
        match self.offset {
            CatenoidOffset::Centered => (-self.n, self.n),
            CatenoidOffset::HalfStep => (-self.n - 1, self.n),
        }
    }

    pub fn z0(&self) -> f64 {
        match self.offset {
            CatenoidOffset::Centered => 0.0,
            CatenoidOffset::HalfStep => self.delta / 2.0,
        }
    }

    /// Trapezoids per meridian strip.
    pub fn strip_len(&self) -> usize {
        let (j0, j1) = self.j_range();
        (j1 - j0) as usize
    }
}

/// Scale of the meridian in the vertical direction.
pub fn catenoid_a(r: f64, delta: f64, k: usize) -> f64 {
    let theta = 2.0 * std::f64::consts::PI / k as f64;
    (r / delta) * (1.0 + delta * delta / (r * r * (1.0 + theta.cos()))).acosh()
}

/// Meridian vertices in the plane y = 0, for j = j0..=j1.
pub fn catenoid_meridian(r: f64, delta: f64, k: usize, z0: f64, j0: i32, j1: i32) -> Result<Vec<Point3>> {
    if !(r > 0.0 && delta > 0.0) || j0 >= j1 || k < 3 {
        return Err(Error::InvalidArgument(
            "meridian needs r > 0, delta > 0, j0 < j1 and k >= 3".into(),
        ));
    }
    let a = catenoid_a(r, delta, k);
    Ok((j0..=j1)
        .map(|j| {
            let z = z0 + j as f64 * delta;
            Point3::new(r * (a * z / r).cosh(), 0.0, z)
        })
        .collect())
}

fn ring_triangles(k: usize, len: usize) -> Vec<[usize; 3]> {
    let mut t = Vec::new();
    for m in 0..k {
        let m2 = (m + 1) % k;
        for j in 0..len - 1 {
            let (a, b, c, d) = (m * len + j, m2 * len + j, m * len + j + 1, m2 * len + j + 1);
            t.push([a, b, d]);
            t.push([a, d, c]);
        }
    }
    t
}

/// Rotated copies of the meridian joined by diagonal-split trapezoids.
pub fn catenoid_ring(meridian: &[Point3], k: usize) -> Result<SimplicialSurface> {
    if k < 3 || meridian.len() < 2 {
        return Err(Error::InvalidArgument(
            "ring needs k >= 3 and two meridian vertices".into(),
        ));
    }
    let mut pos = Vec::with_capacity(k * meridian.len());
    for m in 0..k {
        let phi = 2.0 * std::f64::consts::PI * m as f64 / k as f64;
        let (s, c) = phi.sin_cos();
        for p in meridian {
            pos.push(Point3::new(c * p.x - s * p.y, s * p.x + c * p.y, p.z));
        }
    }
    SimplicialSurface::new(pos, ring_triangles(k, meridian.len()))
}

/// Generator set extending a ring (as built by `catenoid_ring`, `len`
/// vertices per meridian) to a periodic surface.
pub fn catenoid_extensions(ring: &SimplicialSurface, k: usize, mode: CatenoidMode) -> Result<GeneratorSet> {
    check_mode(k, mode)?;
    let len = ring.num_vertices() / k;
    let x = ring.positions();
    let bottom = |m: usize| (m * len, ((m + 1) % k) * len);
    let top = |m: usize| (m * len + len - 1, ((m + 1) % k) * len + len - 1);
    let mut g = GeneratorSet::new();
    match mode {
        CatenoidMode::SchwarzPRotations | CatenoidMode::SchwarzHRotations => {
            for m in 0..k {
                let (a, b) = top(m);
                g.half_turn(&x[a], &x[b])?;
                let (a, b) = bottom(m);
                g.half_turn(&x[a], &x[b])?;
            }
        }
        CatenoidMode::HexagonalTranslations => {
            let (a, b) = top(0);
            g.half_turn(&x[a], &x[b])?;
            let t = |m: usize| x[m * len + len - 1];
            g.push(crate::symmetry::RigidMotion::translation(&(t(1) - t(0))), None);
            g.push(crate::symmetry::RigidMotion::translation(&(t(2) - t(1))), None);
            let h = x[len - 1].z - x[0].z;
            g.push(
                crate::symmetry::RigidMotion::translation(&Vec3::new(0.0, 0.0, 2.0 * h)),
                None,
            );
        }
        CatenoidMode::Method2Reflections => {
            let (a, b) = top(0);
            let normal = (x[b] - x[a]).cross(&Vec3::z());
            g.reflection(&x[a], &normal)?;
            for m in 1..k {
                let (a, b) = top(m);
                g.half_turn(&x[a], &x[b])?;
                let (a, b) = bottom(m);
                g.half_turn(&x[a], &x[b])?;
            }
        }
    }
    Ok(g)
}

fn check_mode(k: usize, mode: CatenoidMode) -> Result<()> {
    let ok = match mode {
        CatenoidMode::SchwarzPRotations => k == 4,
        CatenoidMode::SchwarzHRotations | CatenoidMode::HexagonalTranslations => k == 3,
        // with k = 3 the mirrored rings overlap along their necks
        CatenoidMode::Method2Reflections => k == 4,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "mode {mode:?} is incompatible with k = {k}"
        )))
    }
}

/// Symbolic version of the ring and its generators, in `r` and `delta`.
pub fn catenoid_spec(id: &str, o: &CatenoidOptions) -> Result<DomainSpec> {
    check_mode(o.k, o.mode)?;
    if o.n < 1 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    let p = |s: &str| Expr::parse(s).unwrap();
    let k = o.k;
    let (j0, j1) = o.j_range();
    let len = (j1 - j0 + 1) as usize;
    let z0 = match o.offset {
        CatenoidOffset::Centered => "0".to_string(),
        CatenoidOffset::HalfStep => "delta/2".to_string(),
    };
    let lets = vec![(
        "A".to_string(),
        p(&format!("r/delta*arccosh(1 + delta*delta/(r*r*(1 + cos(2*pi/{k}))))")),
    )];
    let mut vertices = Vec::new();
    for m in 0..k {
        for j in j0..=j1 {
            let z = format!("({z0} + {j}*delta)");
            let xr = format!("r*cosh(A*{z}/r)");
            let v: ExprVec = if m == 0 {
                [p(&xr), n(0.0), p(&z)]
            } else {
                [
                    p(&format!("{xr}*cos(2*pi*{m}/{k})")),
                    p(&format!("{xr}*sin(2*pi*{m}/{k})")),
                    p(&z),
                ]
            };
            vertices.push(VertexDecl::Coords(v));
        }
    }
    let top = |m: usize| (m * len + len - 1, ((m + 1) % k) * len + len - 1);
    let bottom = |m: usize| (m * len, ((m + 1) % k) * len);
    let mut generators = Vec::new();
    let zt = format!("({z0} + {j1}*delta)");
    let rt = format!("r*cosh(A*{zt}/r)");
    let height = format!("{}*delta", j1 - j0);
    match o.mode {
        CatenoidMode::SchwarzPRotations | CatenoidMode::SchwarzHRotations => {
            for m in 0..k {
                let (a, b) = top(m);
                generators.push(GeneratorDecl::HalfTurn(a, b));
                let (a, b) = bottom(m);
                generators.push(GeneratorDecl::HalfTurn(a, b));
            }
        }
        CatenoidMode::HexagonalTranslations => {
            let (a, b) = top(0);
            generators.push(GeneratorDecl::HalfTurn(a, b));
            let c = |m: usize| (format!("{rt}*cos(2*pi*{m}/{k})"), format!("{rt}*sin(2*pi*{m}/{k})"));
            for m in 0..2 {
                let (x0, y0) = c(m);
                let (x1, y1) = c(m + 1);
                generators.push(GeneratorDecl::Translate([
                    p(&format!("{x1} - {x0}")),
                    p(&format!("{y1} - {y0}")),
                    n(0.0),
                ]));
            }
            generators.push(GeneratorDecl::Translate([n(0.0), n(0.0), p(&format!("2*{height}"))]));
        }
        CatenoidMode::Method2Reflections => {
            // the mirror holds the top edge between meridians 0 and 1
            generators.push(GeneratorDecl::Reflect {
                point: [p(&rt), n(0.0), n(0.0)],
                normal: [p(&format!("sin(2*pi/{k})")), p(&format!("1 - cos(2*pi/{k})")), n(0.0)],
            });
            for m in 1..k {
                let (a, b) = top(m);
                generators.push(GeneratorDecl::HalfTurn(a, b));
                let (a, b) = bottom(m);
                generators.push(GeneratorDecl::HalfTurn(a, b));
            }
        }
    }
    let mode_name = match o.mode {
        CatenoidMode::SchwarzPRotations => "Schwarz P by half-turns",
        CatenoidMode::SchwarzHRotations => "Schwarz H by half-turns",
        CatenoidMode::HexagonalTranslations => "Schwarz H by hexagonal translations",
        CatenoidMode::Method2Reflections => "mirror through one side, then half-turns",
    };
    // horizontal periods have no short closed form; they are detected
    let periods = vec![];
    let spec = DomainSpec {
        name: id.to_string(),
        meta: vec![
            (
                "title".into(),
                format!("Discrete catenoid ring with k = {k}, {mode_name}"),
            ),
            ("family".into(), "catenoid".into()),
            ("k".into(), k.to_string()),
            ("j0".into(), j0.to_string()),
            ("j1".into(), j1.to_string()),
        ],
        parameters: vec![
            ParamDecl {
                name: "r".into(),
                default: n(o.r),
                lo: n(0.0),
                hi: n(f64::INFINITY),
                lo_open: true,
                hi_open: true,
                free: false,
            },
            ParamDecl {
                name: "delta".into(),
                default: n(o.delta),
                lo: n(0.0),
                hi: n(f64::INFINITY),
                lo_open: true,
                hi_open: true,
                free: false,
            },
        ],
        lets,
        vertices,
        triangles: ring_triangles(k, len),
        constraints: vec![],
        generators,
        periods,
        window: None,
        // centred rings: the n trapezoids of one strip below z = 0
        fundamental_triangles: match o.offset {
            CatenoidOffset::Centered => (j1 - j0) as usize,
            CatenoidOffset::HalfStep => 2 * (len - 1),
        },
        closed_forms: vec![],
    };
    spec.validate()?;
    Ok(spec)
}

/// The k = 4, n = 1 ring whose extension has the same trace as
/// schwarzP_1, with the translation placing its axis on the cube edge
/// x = y = 6. Radius and spacing are read off the schwarzP_1 vertices and
/// the outer radius the meridian formula predicts is checked against them.
pub fn schwarz_p1_catenoid() -> Result<(CatenoidOptions, Vec3)> {
    let inst = instantiate("schwarzP_1", &BTreeMap::new())?;
    let x = inst.seed.positions();
    let (_, hi) = inst.seed.bbox().unwrap();
    let axis = Vec3::new(hi.x, hi.y, 0.0);
    let radius = |p: &Point3| ((p.x - axis.x).powi(2) + (p.y - axis.y).powi(2)).sqrt();
    // meridian vertices lie in the planes x = 6 and y = 6
    let x: Vec<Point3> = x
        .iter()
        .copied()
        .filter(|p| (p.x - axis.x).abs() < 1e-9 || (p.y - axis.y).abs() < 1e-9)
        .collect();
    let z_lo = x.iter().map(|p| p.z).fold(f64::INFINITY, f64::min);
    let waist: Vec<&Point3> = x.iter().filter(|p| p.z - z_lo < 1e-9).collect();
    let r = radius(waist[0]);
    let z_next = x
        .iter()
        .map(|p| p.z)
        .filter(|&z| z - z_lo > 1e-9)
        .fold(f64::INFINITY, f64::min);
    let delta = z_next - z_lo;
    let rim: Vec<&Point3> = x.iter().filter(|p| (p.z - z_next).abs() < 1e-9).collect();
    if waist.iter().any(|p| (radius(p) - r).abs() > 1e-9) || rim.is_empty() {
        return Err(Error::Degenerate(
            "schwarzP_1 is not a catenoid ring about x = y = 6".into(),
        ));
    }
    let mut o = CatenoidOptions::standard(4, CatenoidMode::SchwarzPRotations);
    o.n = 1;
    o.r = r;
    o.delta = delta;
    let m = catenoid_meridian(r, delta, 4, 0.0, -1, 1)?;
    if rim.iter().any(|p| (radius(p) - m[2].x).abs() > 1e-9) {
        return Err(Error::Degenerate(format!(
            "meridian rim radius {} does not meet schwarzP_1 at {}",
            m[2].x,
            radius(rim[0])
        )));
    }
    Ok((o, Vec3::new(axis.x, axis.y, z_lo)))
}
