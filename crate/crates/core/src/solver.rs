//! Zeroing the area gradient over a small set of unknowns.
//!
//! Unknowns are free named parameters followed by per-vertex degrees of
//! freedom. Residuals are gradients of a local patch (the seed plus the
//! neighbouring symmetry copies) so that boundary vertices of the seed see
//! their full stars.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::domain::segment_intersection;
use crate::energy::{corner_gradient, CLOSED_FORM_TOL};
use crate::error::{Error, Result};
use crate::expr::{Env, Expr};
use crate::mesh::{is_degenerate, Point3, SimplicialSurface, Triangle, Vec3, VertexId};
use crate::symmetry::{extend, Aabb, GeneratorSet, RigidMotion};

pub const JACOBIAN_STEP: f64 = 1e-7;
/// Relative singular-value cutoff in the least-squares step.
pub const RANK_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub enum VertexConstraint {
    Fixed(Point3),
    /// Three unknown coordinates, starting at the given position.
    Free(Point3),
    OnPlane {
        point: Point3,
        normal: Vec3,
        start: Point3,
    },
    OnLine {
        point: Point3,
        direction: Vec3,
        start: Point3,
    },
    Parametric([Expr; 3]),
    /// Meeting point of segments p_i p_j and p_k p_l (0-based).
    Intersection([usize; 4]),
}

impl VertexConstraint {
    fn dofs(&self) -> usize {
        match self {
            VertexConstraint::Free(_) => 3,
            VertexConstraint::OnPlane { .. } => 2,
            VertexConstraint::OnLine { .. } => 1,
            _ => 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            VertexConstraint::OnPlane { normal: d, .. } | VertexConstraint::OnLine { direction: d, .. }
                if !(d.norm() > 0.0) =>
            {
                Err(Error::InvalidArgument("constraint direction must be non-zero".into()))
            }
            _ => Ok(()),
        }
    }
}

fn plane_basis(n: &Vec3) -> (Vec3, Vec3) {
    let n = n.normalize();
    let a = if n.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let u = n.cross(&a).normalize();
    (u, n.cross(&u))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Parameter {
    pub name: String,
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone)]
pub struct Patch {
    pub surface: SimplicialSurface,
    pub copies: Vec<RigidMotion>,
    pub source: Vec<(usize, VertexId)>,
    /// Star of each residual vertex, rotated to start at it.
    pub stars: Vec<Vec<Triangle>>,
    /// Patch vertices touched by those stars.
    pub needed: Vec<VertexId>,
}

#[derive(Debug, Clone)]
pub struct SolveProblem {
    pub triangles: Vec<Triangle>,
    pub constraints: Vec<VertexConstraint>,
    pub fixed: Env,
    pub parameters: Vec<Parameter>,
    pub patch: Patch,
    /// Patch vertices whose gradients must vanish.
    pub residual_vertices: Vec<VertexId>,
}

impl SolveProblem {
    /// Builds the local patch at the initial unknowns. Motions must not
    /// depend on the free parameters.
    pub fn new(
        triangles: Vec<Triangle>,
        constraints: Vec<VertexConstraint>,
        fixed: Env,
        parameters: Vec<Parameter>,
        generators: &GeneratorSet,
    ) -> Result<Self> {
        for c in &constraints {
            c.validate()?;
        }
        let mut p = SolveProblem {
            triangles,
            constraints,
            fixed,
            parameters,
            patch: Patch {
                surface: SimplicialSurface::from_parts_unchecked(vec![], vec![]),
                copies: vec![],
                source: vec![],
                stars: vec![],
                needed: vec![],
            },
            residual_vertices: vec![],
        };
        let x0 = p.initial();
        if p.parameters.len() > 3 * p.constraints.len().max(1) {
            return Err(Error::InvalidArgument("more parameters than vertex coordinates".into()));
        }
        let seed = SimplicialSurface::new(p.seed_positions(&x0)?, p.triangles.clone())?;
        let b = Aabb::of_points(seed.positions()).unwrap();
        let window = b.expanded(seed.longest_edge() * 1.5);
        let ext = extend(&seed, generators, &window, crate::symmetry::DEFAULT_MAX_COPIES)?;
        let patch = ext.surface;
        // seed vertices whose star closes up inside the patch
        let residual_vertices: Vec<VertexId> = (0..patch.num_vertices())
            .filter(|&w| ext.vertex_source[w].0 == 0 && patch.star_is_closed_fan(w))
            .collect();
        let stars: Vec<Vec<Triangle>> = residual_vertices
            .iter()
            .map(|&v| patch.star(v))
            .collect::<Result<_>>()?;
        let mut needed: Vec<VertexId> = stars.iter().flatten().flatten().copied().collect();
        needed.sort_unstable();
        needed.dedup();
        p.patch = Patch {
            surface: patch,
            copies: ext.copies,
            source: ext.vertex_source,
            stars,
            needed,
        };
        p.residual_vertices = residual_vertices;
        Ok(p)
    }

    pub fn unknown_names(&self) -> Vec<String> {
        let mut v: Vec<String> = self.parameters.iter().map(|p| p.name.clone()).collect();
        for (i, c) in self.constraints.iter().enumerate() {
            for k in 0..c.dofs() {
                v.push(format!("p{}.{}", i + 1, ["u", "v", "w"][k]));
            }
        }
        v
    }

    pub fn initial(&self) -> Vec<f64> {
        let mut x: Vec<f64> = self.parameters.iter().map(|p| p.value).collect();
        for c in &self.constraints {
            match c {
                VertexConstraint::Free(p) => x.extend_from_slice(&[p.x, p.y, p.z]),
                VertexConstraint::OnPlane { point, normal, start } => {
                    let (u, v) = plane_basis(normal);
                    x.push((start - point).dot(&u));
                    x.push((start - point).dot(&v));
                }
                VertexConstraint::OnLine {
                    point,
                    direction,
                    start,
                } => {
                    x.push((start - point).dot(&direction.normalize()));
                }
                _ => {}
            }
        }
        x
    }

    fn bounds(&self) -> Vec<(f64, f64)> {
        let mut b: Vec<(f64, f64)> = self.parameters.iter().map(|p| (p.lo, p.hi)).collect();
        let n: usize = self.constraints.iter().map(|c| c.dofs()).sum();
        b.extend(std::iter::repeat((f64::NEG_INFINITY, f64::INFINITY)).take(n));
        b
    }

    pub fn env(&self, x: &[f64]) -> Env {
        let mut env = self.fixed.clone();
        for (p, v) in self.parameters.iter().zip(x) {
            env.insert(p.name.clone(), *v);
        }
        env
    }

    pub fn seed_positions(&self, x: &[f64]) -> Result<Vec<Point3>> {
        let env = self.env(x);
        let mut k = self.parameters.len();
        let mut out = Vec::with_capacity(self.constraints.len());
        for c in &self.constraints {
            let p = match c {
                VertexConstraint::Fixed(p) => *p,
                VertexConstraint::Free(_) => {
                    k += 3;
                    Point3::new(x[k - 3], x[k - 2], x[k - 1])
                }
                VertexConstraint::OnPlane { point, normal, .. } => {
                    let (u, v) = plane_basis(normal);
                    k += 2;
                    point + x[k - 2] * u + x[k - 1] * v
                }
                VertexConstraint::OnLine { point, direction, .. } => {
                    k += 1;
                    point + x[k - 1] * direction.normalize()
                }
                VertexConstraint::Parametric(e) => Point3::new(e[0].eval(&env)?, e[1].eval(&env)?, e[2].eval(&env)?),
                VertexConstraint::Intersection(_) => Point3::zeros(),
            };
            out.push(p);
        }
        for (i, c) in self.constraints.iter().enumerate() {
            if let VertexConstraint::Intersection([a, b, c, d]) = c {
                out[i] = segment_intersection(&out[*a], &out[*b], &out[*c], &out[*d])?.0;
            }
        }
        Ok(out)
    }

    pub fn seed_surface(&self, x: &[f64]) -> Result<SimplicialSurface> {
        Ok(SimplicialSurface::from_parts_unchecked(
            self.seed_positions(x)?,
            self.triangles.clone(),
        ))
    }

    pub fn patch_surface(&self, x: &[f64]) -> Result<SimplicialSurface> {
        let seed = self.seed_positions(x)?;
        let pos = self
            .patch
            .source
            .iter()
            .map(|&(c, v)| self.patch.copies[c].apply_point(&seed[v]))
            .collect();
        Ok(self.patch.surface.with_positions(pos))
    }

    /// Stacked gradients at the residual vertices.
    pub fn residual(&self, x: &[f64]) -> Result<DVector<f64>> {
        let b = self.bounds();
        if x.iter().zip(&b).any(|(v, (lo, hi))| !(v >= lo && v <= hi)) {
            return Err(Error::InvalidArgument("parameters out of bounds".into()));
        }
        let seed = self.seed_positions(x)?;
        let mut pos = vec![Point3::zeros(); self.patch.source.len()];
        for &v in &self.patch.needed {
            let (c, w) = self.patch.source[v];
            pos[v] = self.patch.copies[c].apply_point(&seed[w]);
        }
        let mut r = DVector::zeros(3 * self.residual_vertices.len());
        for (i, star) in self.patch.stars.iter().enumerate() {
            let mut g = Vec3::zeros();
            for t in star {
                let (a, b, c) = (&pos[t[0]], &pos[t[1]], &pos[t[2]]);
                if is_degenerate(a, b, c) {
                    return Err(Error::Degenerate(format!("triangle {t:?} in the patch")));
                }
                g += corner_gradient(a, b, c);
            }
            r.fixed_rows_mut::<3>(3 * i).copy_from(&g);
        }
        Ok(r)
    }

    pub fn per_vertex_norms(&self, x: &[f64]) -> Result<BTreeMap<VertexId, f64>> {
        let r = self.residual(x)?;
        Ok(self
            .residual_vertices
            .iter()
            .enumerate()
            .map(|(i, &v)| (v, r.fixed_rows::<3>(3 * i).norm()))
            .collect())
    }

    /// Central-difference Jacobian of the residual.
    pub fn jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let m = 3 * self.residual_vertices.len();
        let mut j = DMatrix::zeros(m, x.len());
        let b = self.bounds();
        for k in 0..x.len() {
            let h = JACOBIAN_STEP * x[k].abs().max(1.0);
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[k] = (x[k] + h).min(b[k].1);
            xm[k] = (x[k] - h).max(b[k].0);
            let rp = self.residual(&xp)?;
            let rm = self.residual(&xm)?;
            j.set_column(k, &((rp - rm) / (xp[k] - xm[k])));
        }
        Ok(j)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    NewtonFdJacobian,
    DampedGradientDescent,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub converged: bool,
    pub iterations: usize,
    pub final_parameters: BTreeMap<String, f64>,
    pub unknowns: Vec<f64>,
    pub residual_norm: f64,
    pub history: Vec<f64>,
    pub per_vertex_gradient_norms: BTreeMap<VertexId, f64>,
    pub jacobian_condition: Option<f64>,
    pub message: String,
}

fn project(x: &mut [f64], b: &[(f64, f64)]) {
    for (v, (lo, hi)) in x.iter_mut().zip(b) {
        // stay strictly inside open ranges
        let pad = 1e-12 * (hi - lo).abs().min(1.0);
        if *v <= *lo {
            *v = lo + pad;
        }
        if *v >= *hi {
            *v = hi - pad;
        }
    }
}

fn try_step(
    problem: &SolveProblem,
    x: &[f64],
    d: &DVector<f64>,
    alpha: f64,
    b: &[(f64, f64)],
) -> Option<(Vec<f64>, f64)> {
    let mut y: Vec<f64> = x.iter().zip(d.iter()).map(|(a, s)| a + alpha * s).collect();
    project(&mut y, b);
    let r = problem.residual(&y).ok()?;
    let n = r.norm();
    n.is_finite().then_some((y, n))
}

fn line_search(
    problem: &SolveProblem,
    x: &[f64],
    d: &DVector<f64>,
    f0: f64,
    b: &[(f64, f64)],
) -> Option<(Vec<f64>, f64)> {
    let mut alpha = 1.0;
    for _ in 0..40 {
        if let Some((y, n)) = try_step(problem, x, d, alpha, b) {
            if n < f0 {
                return Some((y, n));
            }
        }
        alpha *= 0.5;
    }
    None
}

fn condition(j: &DMatrix<f64>) -> Option<f64> {
    if j.ncols() == 0 {
        return None;
    }
    let s = j.clone().svd(false, false).singular_values;
    let max = s.max();
    let min = s.min();
    Some(if min > 0.0 { max / min } else { f64::INFINITY })
}

/// Damped Gauss-Newton with a finite-difference Jacobian, falling back to
/// gradient descent on ½|F|² when the Newton direction does not decrease
/// the residual. Non-convergence is reported, not returned as an error.
pub fn solve(problem: &SolveProblem, method: Method, tol: f64, max_iter: usize) -> Result<SolveReport> {
    solve_from(problem, &problem.initial(), method, tol, max_iter)
}

pub fn solve_from(
    problem: &SolveProblem,
    start: &[f64],
    method: Method,
    tol: f64,
    max_iter: usize,
) -> Result<SolveReport> {
    let b = problem.bounds();
    if start.len() != b.len() {
        return Err(Error::InvalidArgument("wrong number of unknowns".into()));
    }
    let mut x = start.to_vec();
    let mut f = problem.residual(&x)?.norm();
    let mut history = vec![f];
    let mut iterations = 0;
    let mut message = String::from("max iterations reached");
    let mut converged = f <= tol;
    let mut polish = 0;
    while iterations < max_iter && !x.is_empty() {
        if converged {
            // a few extra steps tighten the parameters well below tol
            if polish == 3 || f == 0.0 {
                break;
            }
            polish += 1;
        }
        iterations += 1;
        let r = problem.residual(&x)?;
        let j = problem.jacobian(&x)?;
        let grad = j.transpose() * &r;
        let mut step = None;
        if method == Method::NewtonFdJacobian {
            let svd = j.clone().svd(true, true);
            // singular values below the finite-difference noise are null directions
            let eps = RANK_TOL * svd.singular_values.max();
            if let Ok(d) = svd.solve(&(-&r), eps) {
                step = line_search(problem, &x, &d, f, &b);
            }
        }
        if step.is_none() {
            let gn = grad.norm();
            if gn > 0.0 {
                // scale so the first trial moves about as far as a Newton step would
                let d = -&grad * (f / gn.powi(2)).min(1.0 / gn);
                step = line_search(problem, &x, &d, f, &b);
            }
        }
        match step {
            Some((y, n)) => {
                x = y;
                f = n;
                history.push(f);
                if f <= tol {
                    converged = true;
                }
            }
            None => {
                message = if converged {
                    "converged".into()
                } else {
                    "step underflow: no decrease along Newton or gradient direction".into()
                };
                break;
            }
        }
    }
    if converged {
        message = "converged".into();
    }
    let env = problem.env(&x);
    let final_parameters = problem
        .parameters
        .iter()
        .map(|p| (p.name.clone(), env[&p.name]))
        .chain(
            problem
                .unknown_names()
                .into_iter()
                .zip(x.iter())
                .skip(problem.parameters.len())
                .map(|(n, v)| (n, *v)),
        )
        .collect();
    Ok(SolveReport {
        converged,
        iterations,
        final_parameters,
        residual_norm: f,
        history,
        per_vertex_gradient_norms: problem.per_vertex_norms(&x)?,
        jacobian_condition: condition(&problem.jacobian(&x)?),
        unknowns: x,
        message,
    })
}
#[derive(Debug, Clone, Serialize)]
pub struct ClosedFormCheck {
    pub id: String,
    /// No free parameters: the piece is fixed by symmetry alone.
    pub vacuous: bool,
    pub closed_form: BTreeMap<String, f64>,
    pub residual: f64,
    /// Largest parameter error after solving from each perturbed start.
    pub recovery_error: f64,
    pub max_iterations: usize,
    pub pass: bool,
}

pub const CLOSED_FORM_PERTURBATION: f64 = 0.1;

/// Residual at the recorded closed form, and recovery of it by Newton from
/// starts with every parameter scaled by 1 ± 10%.
pub fn verify_closed_form(id: &str, fixed: &BTreeMap<String, f64>) -> Result<ClosedFormCheck> {
    let inst = crate::catalog::instantiate(id, fixed)?;
    let problem = inst.problem()?;
    let mut check = ClosedFormCheck {
        id: id.to_string(),
        vacuous: problem.parameters.is_empty(),
        closed_form: BTreeMap::new(),
        residual: problem.residual(&problem.initial())?.norm(),
        recovery_error: 0.0,
        max_iterations: 0,
        pass: false,
    };
    if check.vacuous {
        check.pass = check.residual <= CLOSED_FORM_TOL;
        return Ok(check);
    }
    let Some((_, cf)) = crate::catalog::closed_form(id, fixed)? else {
        return Err(Error::InvalidArgument(format!(
            "`{id}` has no closed form at these parameters"
        )));
    };
    let x0 = problem.initial();
    let bounds = problem.bounds();
    for sign in [1.0, -1.0] {
        let mut start = x0.clone();
        for (k, v) in start.iter_mut().enumerate().take(problem.parameters.len()) {
            *v *= 1.0 + sign * CLOSED_FORM_PERTURBATION;
            project(std::slice::from_mut(v), &bounds[k..k + 1]);
        }
        let rep = solve_from(&problem, &start, Method::NewtonFdJacobian, 1e-13, 50)?;
        check.max_iterations = check.max_iterations.max(rep.iterations);
        let err = problem
            .parameters
            .iter()
            .map(|p| (rep.final_parameters[&p.name] - cf[&p.name]).abs())
            .fold(if rep.converged { 0.0 } else { f64::INFINITY }, f64::max);
        check.recovery_error = check.recovery_error.max(err);
    }
    check.closed_form = cf;
    check.pass = check.residual <= CLOSED_FORM_TOL && check.recovery_error <= 1e-8;
    Ok(check)
}
