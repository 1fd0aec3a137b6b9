//! Discrete area and its vertex gradient.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mesh::{is_degenerate, Point3, SimplicialSurface, Vec3, VertexId};

pub const CLOSED_FORM_TOL: f64 = 1e-10;
pub const SOLVER_TOL: f64 = 1e-8;
pub const FD_STEP: f64 = 1e-6;

pub type GradientField = Vec<Vec3>;

pub fn triangle_area(p: &Point3, q: &Point3, r: &Point3) -> f64 {
    0.5 * (r - p).cross(&(q - p)).norm()
}

pub fn surface_area(surface: &SimplicialSurface) -> f64 {
    let x = surface.positions();
    surface
        .triangles()
        .iter()
        .map(|t| triangle_area(&x[t[0]], &x[t[1]], &x[t[2]]))
        .sum()
}

/// Contribution of the oriented triangle (p, q, r) to the gradient at p:
/// half the opposite edge rotated a quarter turn in the triangle's plane.
pub fn corner_gradient(p: &Point3, q: &Point3, r: &Point3) -> Vec3 {
    let n = (q - p).cross(&(r - p));
    0.5 * (n / n.norm()).cross(&(r - q))
}

pub fn area_gradient(surface: &SimplicialSurface, p: VertexId) -> Result<Vec3> {
    let x = surface.positions();
    let mut g = Vec3::zeros();
    for t in surface.star(p)? {
        let (a, b, c) = (&x[t[0]], &x[t[1]], &x[t[2]]);
        if is_degenerate(a, b, c) {
            return Err(Error::Degenerate(format!("triangle {t:?} in star of {p}")));
        }
        g += corner_gradient(a, b, c);
    }
    Ok(g)
}

/// Gradient at every vertex in one pass over the triangles.
pub fn gradient_field(surface: &SimplicialSurface) -> Result<GradientField> {
    let x = surface.positions();
    let mut g = vec![Vec3::zeros(); x.len()];
    for t in surface.triangles() {
        let (a, b, c) = (&x[t[0]], &x[t[1]], &x[t[2]]);
        if is_degenerate(a, b, c) {
            return Err(Error::Degenerate(format!("triangle {t:?}")));
        }
        g[t[0]] += corner_gradient(a, b, c);
        g[t[1]] += corner_gradient(b, c, a);
        g[t[2]] += corner_gradient(c, a, b);
    }
    Ok(g)
}

/// Central differences of the total area in each coordinate of `p`.
pub fn finite_difference_gradient(surface: &SimplicialSurface, p: VertexId, h: f64) -> Result<Vec3> {
    if !(h > 0.0) {
        return Err(Error::InvalidArgument("step must be positive".into()));
    }
    if p >= surface.num_vertices() {
        return Err(Error::InvalidArgument(format!("unknown vertex {p}")));
    }
    // only the star changes, so difference the star's area
    let star = surface.star(p)?;
    let x = surface.positions();
    let local = |q: Point3| -> f64 { star.iter().map(|t| triangle_area(&q, &x[t[1]], &x[t[2]])).sum() };
    let mut g = Vec3::zeros();
    for i in 0..3 {
        let mut plus = x[p];
        let mut minus = x[p];
        plus[i] += h;
        minus[i] -= h;
        g[i] = (local(plus) - local(minus)) / (2.0 * h);
    }
    Ok(g)
}

#[derive(Debug, Clone, Serialize)]
pub struct MinimalityReport {
    pub norms: BTreeMap<VertexId, f64>,
    pub worst: f64,
    pub worst_vertex: Option<VertexId>,
    pub tol: f64,
    pub pass: bool,
}

/// Gradient norms at all interior vertices.
pub fn minimality_residual(surface: &SimplicialSurface, tol: f64) -> Result<MinimalityReport> {
    minimality_residual_at(surface, &surface.interior_vertices(), tol)
}

/// Gradient norms at a chosen vertex subset (e.g. the interior of a window).
pub fn minimality_residual_at(
    surface: &SimplicialSurface,
    vertices: &[VertexId],
    tol: f64,
) -> Result<MinimalityReport> {
    let g = gradient_field(surface)?;
    let mut norms = BTreeMap::new();
    let mut worst = 0.0;
    let mut worst_vertex = None;
    for &v in vertices {
        let n = g[v].norm();
        norms.insert(v, n);
        if !(n <= worst) {
            worst = n;
            worst_vertex = Some(v);
        }
    }
    Ok(MinimalityReport {
        pass: worst <= tol,
        norms,
        worst,
        worst_vertex,
        tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: f64, y: f64, z: f64) -> Point3 {
        Point3::new(x, y, z)
    }

    #[test]
    fn areas() {
        assert_eq!(triangle_area(&p(0., 0., 0.), &p(1., 0., 0.), &p(0., 1., 0.)), 0.5);
        assert_eq!(triangle_area(&p(0., 0., 0.), &p(2., 0., 0.), &p(0., 0., 3.)), 3.0);
        // isosceles: base 1, legs sqrt(3)/2, so height sqrt(1/2)
        let a = triangle_area(&p(1., 0., 0.), &p(1., 1., 0.), &p(0.5, 0.5, 0.5));
        let (b, l) = (1.0f64, 3f64.sqrt() / 2.0);
        let heron = 0.5 * b * (l * l - b * b / 4.0).sqrt();
        assert!((a - heron).abs() < 1e-15);
        assert!((a - 2f64.sqrt() / 4.0).abs() < 1e-15);
    }

    fn hexagon_fan(lift: f64) -> SimplicialSurface {
        let mut pos = vec![p(0., 0., lift)];
        for k in 0..6 {
            let t = k as f64 * std::f64::consts::PI / 3.0;
            pos.push(p(t.cos(), t.sin(), 0.0));
        }
        let tris = (0..6).map(|k| [0, 1 + k, 1 + (k + 1) % 6]).collect();
        SimplicialSurface::new(pos, tris).unwrap()
    }

    #[test]
    fn flat_fan_is_critical() {
        let s = hexagon_fan(0.0);
        assert!(area_gradient(&s, 0).unwrap().norm() <= 1e-12);
        assert!(finite_difference_gradient(&s, 0, FD_STEP).unwrap().norm() <= 1e-6);
        let r = minimality_residual(&s, CLOSED_FORM_TOL).unwrap();
        assert!(r.pass);
        assert_eq!(r.norms.len(), 1);
    }

    #[test]
    fn lifted_fan_points_up() {
        // pulling the centre up increases area
        let g = area_gradient(&hexagon_fan(0.3), 0).unwrap();
        assert!(g.z > 0.0 && g.x.abs() < 1e-12 && g.y.abs() < 1e-12);
        let f = finite_difference_gradient(&hexagon_fan(0.3), 0, FD_STEP).unwrap();
        assert!((g - f).amax() < 1e-6);
    }

    #[test]
    fn single_triangle_is_vacuous() {
        let s = SimplicialSurface::new(vec![p(0., 0., 0.), p(1., 0., 0.), p(0., 1., 0.)], vec![[0, 1, 2]]).unwrap();
        assert!(minimality_residual(&s, 0.0).unwrap().pass);
        // boundary gradient still defined: moving a corner outward grows area
        let g = area_gradient(&s, 0).unwrap();
        assert!(g.x < 0.0 && g.y < 0.0);
    }
}
