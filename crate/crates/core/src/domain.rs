//! Parameterized fundamental pieces.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::expr::{Env, Expr};
use crate::mesh::{Point3, SimplicialSurface, Triangle, Vec3};
use crate::solver::{Parameter, SolveProblem, VertexConstraint};
use crate::symmetry::{Aabb, Fixes, GeneratorSet, RigidMotion};

pub type ExprVec = [Expr; 3];

#[derive(Debug, Clone, PartialEq)]
pub struct ParamDecl {
    pub name: String,
    pub default: Expr,
    pub lo: Expr,
    pub hi: Expr,
    pub lo_open: bool,
    pub hi_open: bool,
    pub free: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum VertexDecl {
    Coords(ExprVec),
    /// Intersection of segments p_i p_j and p_k p_l (0-based).
    Intersect([usize; 4]),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConstraintDecl {
    Fixed,
    Free,
    OnPlane { point: ExprVec, normal: ExprVec },
    OnLine { point: ExprVec, direction: ExprVec },
}

#[derive(Debug, Clone, PartialEq)]
pub enum GeneratorDecl {
    /// Half-turn about the edge through two seed vertices (0-based).
    HalfTurn(usize, usize),
    HalfTurnLine {
        point: ExprVec,
        direction: ExprVec,
    },
    Reflect {
        point: ExprVec,
        normal: ExprVec,
    },
    Rotate {
        point: ExprVec,
        axis: ExprVec,
        angle: Expr,
    },
    Translate(ExprVec),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Paper,
    Derived,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosedForm {
    pub provenance: Provenance,
    /// Fixed-parameter values at which this solution applies.
    pub when: Vec<(String, Expr)>,
    pub values: Vec<(String, Expr)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomainSpec {
    pub name: String,
    pub meta: Vec<(String, String)>,
    pub parameters: Vec<ParamDecl>,
    /// Derived scalars, evaluated in order after the parameters.
    pub lets: Vec<(String, Expr)>,
    pub vertices: Vec<VertexDecl>,
    pub triangles: Vec<Triangle>,
    pub constraints: Vec<(usize, ConstraintDecl)>,
    pub generators: Vec<GeneratorDecl>,
    pub periods: Vec<ExprVec>,
    pub window: Option<(ExprVec, ExprVec)>,
    pub fundamental_triangles: usize,
    pub closed_forms: Vec<ClosedForm>,
}

fn ev3(e: &ExprVec, env: &Env) -> Result<Vec3> {
    Ok(Vec3::new(e[0].eval(env)?, e[1].eval(env)?, e[2].eval(env)?))
}

const MATCH: f64 = 1e-12;

/// Intersection of segments ab and cd. Returns the midpoint of the closest
/// pair and their distance.
pub fn segment_intersection(a: &Point3, b: &Point3, c: &Point3, d: &Point3) -> Result<(Point3, f64)> {
    let u = b - a;
    let v = d - c;
    let w = a - c;
    let (uu, uv, vv) = (u.dot(&u), u.dot(&v), v.dot(&v));
    let den = uu * vv - uv * uv;
    if !(den > 1e-14 * uu * vv) {
        return Err(Error::Degenerate("segments are parallel".into()));
    }
    let s = (uv * v.dot(&w) - vv * u.dot(&w)) / den;
    let t = (uu * v.dot(&w) - uv * u.dot(&w)) / den;
    let tol = 1e-9;
    if s < -tol || s > 1.0 + tol || t < -tol || t > 1.0 + tol {
        return Err(Error::Degenerate("segments do not meet within their extent".into()));
    }
    let p = a + s * u;
    let q = c + t * v;
    Ok(((p + q) / 2.0, (p - q).norm()))
}

impl DomainSpec {
    pub fn param(&self, name: &str) -> Option<&ParamDecl> {
        self.parameters.iter().find(|p| p.name == name)
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn free_parameters(&self) -> Vec<String> {
        self.parameters
            .iter()
            .filter(|p| p.free)
            .map(|p| p.name.clone())
            .collect()
    }

    /// Structural checks: index ranges, names, and expression references.
    pub fn validate(&self) -> Result<()> {
        let n = self.vertices.len();
        let mut known: Vec<String> = Vec::new();
        let check = |e: &Expr, known: &[String]| -> Result<()> {
            for v in e.variables() {
                if !known.contains(&v) {
                    return Err(Error::InvalidArgument(format!("unknown identifier `{v}`")));
                }
            }
            Ok(())
        };
        for p in &self.parameters {
            check(&p.default, &known)?;
            check(&p.lo, &known)?;
            check(&p.hi, &known)?;
            if known.contains(&p.name) {
                return Err(Error::InvalidArgument(format!("duplicate parameter `{}`", p.name)));
            }
            known.push(p.name.clone());
        }
        for (name, e) in &self.lets {
            check(e, &known)?;
            known.push(name.clone());
        }
        for (i, v) in self.vertices.iter().enumerate() {
            match v {
                VertexDecl::Coords(c) => c.iter().try_for_each(|e| check(e, &known))?,
                VertexDecl::Intersect(ix) => {
                    if ix.iter().any(|&j| j >= n || j == i) {
                        return Err(Error::InvalidArgument(format!(
                            "vertex {} intersects bad indices",
                            i + 1
                        )));
                    }
                }
            }
        }
        for t in &self.triangles {
            if t.iter().any(|&v| v >= n) {
                return Err(Error::InvalidArgument(format!(
                    "triangle {} {} {} exceeds vertex count {n}",
                    t[0] + 1,
                    t[1] + 1,
                    t[2] + 1
                )));
            }
        }
        for (v, c) in &self.constraints {
            if *v >= n {
                return Err(Error::InvalidArgument(format!(
                    "constraint on missing vertex {}",
                    v + 1
                )));
            }
            match c {
                ConstraintDecl::OnPlane { point, normal: d } | ConstraintDecl::OnLine { point, direction: d } => {
                    point.iter().chain(d.iter()).try_for_each(|e| check(e, &known))?
                }
                _ => {}
            }
        }
        for g in &self.generators {
            let exprs: Vec<&Expr> = match g {
                GeneratorDecl::HalfTurn(a, b) => {
                    if *a >= n || *b >= n || a == b {
                        return Err(Error::InvalidArgument("half-turn edge index out of range".into()));
                    }
                    vec![]
                }
                GeneratorDecl::HalfTurnLine { point, direction } => point.iter().chain(direction).collect(),
                GeneratorDecl::Reflect { point, normal } => point.iter().chain(normal).collect(),
                GeneratorDecl::Rotate { point, axis, angle } => {
                    point.iter().chain(axis).chain(std::iter::once(angle)).collect()
                }
                GeneratorDecl::Translate(v) => v.iter().collect(),
            };
            exprs.into_iter().try_for_each(|e| check(e, &known))?;
        }
        for p in &self.periods {
            p.iter().try_for_each(|e| check(e, &known))?;
        }
        if let Some((lo, hi)) = &self.window {
            lo.iter().chain(hi).try_for_each(|e| check(e, &known))?;
        }
        let params: Vec<String> = self.parameters.iter().map(|p| p.name.clone()).collect();
        for cf in &self.closed_forms {
            for (name, e) in cf.when.iter().chain(&cf.values) {
                if !params.contains(name) {
                    return Err(Error::InvalidArgument(format!("closed form sets unknown `{name}`")));
                }
                check(e, &known)?;
            }
        }
        Ok(())
    }

    /// The closed form whose conditions hold for the given fixed values.
    pub fn matching_closed_form(&self, fixed: &Env) -> Option<&ClosedForm> {
        self.closed_forms.iter().find(|cf| {
            cf.when.iter().all(|(n, e)| match (fixed.get(n), e.eval(fixed)) {
                (Some(v), Ok(w)) => (v - w).abs() <= MATCH * w.abs().max(1.0),
                _ => false,
            })
        })
    }

    /// Parameter values: overrides, else a matching closed form for free
    /// parameters, else defaults. Range-checked; lets included.
    pub fn resolve(&self, overrides: &BTreeMap<String, f64>) -> Result<Env> {
        for k in overrides.keys() {
            if self.param(k).is_none() {
                return Err(Error::InvalidArgument(format!(
                    "`{}` has no parameter `{k}`",
                    self.name
                )));
            }
        }
        let mut env = Env::new();
        for p in self.parameters.iter().filter(|p| !p.free) {
            let v = match overrides.get(&p.name) {
                Some(v) => *v,
                None => p.default.eval(&env)?,
            };
            env.insert(p.name.clone(), v);
        }
        let cf = self.matching_closed_form(&env).cloned();
        let mut full = Env::new();
        for p in &self.parameters {
            let v = if let Some(v) = overrides.get(&p.name) {
                *v
            } else if !p.free {
                env[&p.name]
            } else if let Some((_, e)) = cf.as_ref().and_then(|cf| cf.values.iter().find(|(n, _)| n == &p.name)) {
                e.eval(&full)?
            } else {
                p.default.eval(&full)?
            };
            let (lo, hi) = (p.lo.eval(&full)?, p.hi.eval(&full)?);
            let ok_lo = if p.lo_open { v > lo } else { v >= lo };
            let ok_hi = if p.hi_open { v < hi } else { v <= hi };
            if !(ok_lo && ok_hi) {
                return Err(Error::InvalidArgument(format!(
                    "{} = {v} outside {}{lo}, {hi}{}",
                    p.name,
                    if p.lo_open { "(" } else { "[" },
                    if p.hi_open { ")" } else { "]" }
                )));
            }
            full.insert(p.name.clone(), v);
        }
        self.apply_lets(&mut full)?;
        Ok(full)
    }

    pub fn apply_lets(&self, env: &mut Env) -> Result<()> {
        for (n, e) in &self.lets {
            let v = e.eval(env)?;
            env.insert(n.clone(), v);
        }
        Ok(())
    }

    /// Closed-form values (with provenance) for the given fixed values.
    pub fn closed_form_values(&self, env: &Env) -> Option<(Provenance, BTreeMap<String, f64>)> {
        let cf = self.matching_closed_form(env)?;
        let mut e = env.clone();
        let mut out = BTreeMap::new();
        for (n, x) in &cf.values {
            let v = x.eval(&e).ok()?;
            e.insert(n.clone(), v);
            out.insert(n.clone(), v);
        }
        Some((cf.provenance, out))
    }

    pub fn positions(&self, env: &Env) -> Result<Vec<Point3>> {
        Ok(self.positions_with_gaps(env)?.0)
    }

    /// Positions plus the closest-approach distance of every intersection vertex.
    pub fn positions_with_gaps(&self, env: &Env) -> Result<(Vec<Point3>, Vec<(usize, f64)>)> {
        let mut pos = vec![Point3::zeros(); self.vertices.len()];
        for (i, v) in self.vertices.iter().enumerate() {
            if let VertexDecl::Coords(c) = v {
                pos[i] = ev3(c, env)?;
            }
        }
        let mut gaps = Vec::new();
        for (i, v) in self.vertices.iter().enumerate() {
            if let VertexDecl::Intersect([a, b, c, d]) = v {
                let (p, gap) = segment_intersection(&pos[*a], &pos[*b], &pos[*c], &pos[*d])?;
                if gap > 1e-9 {
                    return Err(Error::Degenerate(format!(
                        "segments for vertex {} miss by {gap:e}",
                        i + 1
                    )));
                }
                pos[i] = p;
                gaps.push((i, gap));
            }
        }
        Ok((pos, gaps))
    }

    pub fn seed(&self, env: &Env) -> Result<SimplicialSurface> {
        SimplicialSurface::new(self.positions(env)?, self.triangles.clone())
    }

    pub fn generators(&self, env: &Env) -> Result<GeneratorSet> {
        let pos = self.positions(env)?;
        let mut g = GeneratorSet::new();
        for d in &self.generators {
            match d {
                GeneratorDecl::HalfTurn(a, b) => g.half_turn(&pos[*a], &pos[*b])?,
                GeneratorDecl::HalfTurnLine { point, direction } => {
                    let (p, v) = (ev3(point, env)?, ev3(direction, env)?);
                    g.push(RigidMotion::half_turn_about_line(&p, &v)?, Some(Fixes::Line(p, v)));
                }
                GeneratorDecl::Reflect { point, normal } => g.reflection(&ev3(point, env)?, &ev3(normal, env)?)?,
                GeneratorDecl::Rotate { point, axis, angle } => {
                    let (p, v) = (ev3(point, env)?, ev3(axis, env)?);
                    g.push(
                        RigidMotion::rotation_about_axis(&p, &v, angle.eval(env)?)?,
                        Some(Fixes::Line(p, v)),
                    );
                }
                GeneratorDecl::Translate(v) => g.push(RigidMotion::translation(&ev3(v, env)?), None),
            }
        }
        Ok(g)
    }

    pub fn periods(&self, env: &Env) -> Result<Vec<Vec3>> {
        self.periods.iter().map(|p| ev3(p, env)).collect()
    }

    pub fn window(&self, env: &Env) -> Result<Option<Aabb>> {
        match &self.window {
            None => Ok(None),
            Some((lo, hi)) => {
                let (l, h) = (ev3(lo, env)?, ev3(hi, env)?);
                Aabb::new([l.x, l.y, l.z], [h.x, h.y, h.z]).map(Some)
            }
        }
    }

    /// Solve problem over the free parameters. With `full_free`, every
    /// interior vertex of the seed becomes three free coordinates and only
    /// parameters still referenced elsewhere remain unknowns.
    pub fn problem(&self, env: &Env, full_free: bool) -> Result<SolveProblem> {
        let seed = self.seed(env)?;
        let pos = seed.positions().to_vec();
        let interior = seed.interior_vertices();
        let mut constraints = Vec::with_capacity(pos.len());
        for (i, v) in self.vertices.iter().enumerate() {
            let decl = self.constraints.iter().find(|(j, _)| *j == i).map(|(_, c)| c);
            let c = if full_free && interior.contains(&i) {
                VertexConstraint::Free(pos[i])
            } else {
                match decl {
                    Some(ConstraintDecl::Fixed) => VertexConstraint::Fixed(pos[i]),
                    Some(ConstraintDecl::Free) => VertexConstraint::Free(pos[i]),
                    Some(ConstraintDecl::OnPlane { point, normal }) => VertexConstraint::OnPlane {
                        point: ev3(point, env)?,
                        normal: ev3(normal, env)?,
                        start: pos[i],
                    },
                    Some(ConstraintDecl::OnLine { point, direction }) => VertexConstraint::OnLine {
                        point: ev3(point, env)?,
                        direction: ev3(direction, env)?,
                        start: pos[i],
                    },
                    None => match v {
                        VertexDecl::Coords(c) => VertexConstraint::Parametric(self.inline_lets(c)),
                        VertexDecl::Intersect(ix) => VertexConstraint::Intersection(*ix),
                    },
                }
            };
            constraints.push(c);
        }
        // parameters that still drive some vertex
        let mut used: Vec<String> = Vec::new();
        for c in &constraints {
            if let VertexConstraint::Parametric(e) = c {
                for x in e {
                    used.extend(x.variables());
                }
            }
        }
        let mut fixed = Env::new();
        let mut parameters = Vec::new();
        for p in &self.parameters {
            if p.free && used.contains(&p.name) {
                let (lo, hi) = (p.lo.eval(env)?, p.hi.eval(env)?);
                parameters.push(Parameter {
                    name: p.name.clone(),
                    value: env[&p.name],
                    lo,
                    hi,
                });
            } else {
                fixed.insert(p.name.clone(), env[&p.name]);
            }
        }
        SolveProblem::new(
            self.triangles.clone(),
            constraints,
            fixed,
            parameters,
            &self.generators(env)?,
        )
    }

    /// Substitutes let-bound names so vertex expressions depend on parameters only.
    fn inline_lets(&self, c: &ExprVec) -> ExprVec {
        let mut out = c.clone();
        for (name, e) in self.lets.iter().rev() {
            for x in out.iter_mut() {
                *x = substitute(x, name, e);
            }
        }
        out
    }
}

fn substitute(e: &Expr, name: &str, by: &Expr) -> Expr {
    match e {
        Expr::Var(n) if n == name => by.clone(),
        Expr::Neg(a) => Expr::Neg(Box::new(substitute(a, name, by))),
        Expr::Call(f, a) => Expr::Call(*f, Box::new(substitute(a, name, by))),
        Expr::Bin(op, a, b) => Expr::Bin(
            *op,
            Box::new(substitute(a, name, by)),
            Box::new(substitute(b, name, by)),
        ),
        other => other.clone(),
    }
}
