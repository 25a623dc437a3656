//! Domain geometry and Green functions for the Dirichlet Laplacian.
//!
//! Disks use the closed-form Green function via the Möbius reflection; other
//! domains are represented by a mesh and use the discrete harmonic extension
//! of the fundamental-solution boundary trace, memoized per source point.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use crate::error::{MfError, Result};
use crate::fem::FemSpace;
use crate::geometry::{Mesh, Point2};

const INV_2PI: f64 = 1.0 / (2.0 * std::f64::consts::PI);

/// A planar domain with an evaluable Dirichlet Green function.
pub enum Domain {
    /// Disk with known center and radius; Green function is exact.
    Disk { center: Point2, radius: f64 },
    /// General meshed domain; Green function is computed by FEM.
    Meshed(MeshDomain),
}

impl Domain {
    pub fn unit_disk() -> Domain {
        Domain::Disk {
            center: Point2::new(0.0, 0.0),
            radius: 1.0,
        }
    }

    pub fn disk(center: Point2, radius: f64) -> Domain {
        Domain::Disk { center, radius }
    }

    pub fn meshed(fem: Arc<FemSpace>) -> Domain {
        Domain::Meshed(MeshDomain::new(fem))
    }

    /// Green function G(x, y) of -Delta with Dirichlet boundary conditions,
    /// normalized so G = -(1/2 pi) log |x - y| + R(x, y).
    pub fn green(&self, x: Point2, y: Point2) -> Result<f64> {
        let d = x.dist(y);
        if d == 0.0 {
            return Err(MfError::invalid("green function evaluated on the diagonal"));
        }
        Ok(-INV_2PI * d.ln() + self.regular_part(x, y)?)
    }

    /// Regular part R(x, y) of the Green function.
    pub fn regular_part(&self, x: Point2, y: Point2) -> Result<f64> {
        match self {
            Domain::Disk { center, radius } => {
                let xx = x.sub(*center).scale(1.0 / radius);
                let yy = y.sub(*center).scale(1.0 / radius);
                // |1 - conj(Y) X| in complex notation
                let re = 1.0 - xx.dot(yy);
                let im = yy.x * xx.y - yy.y * xx.x;
                let m = re.hypot(im);
                if m <= 0.0 {
                    return Err(MfError::invalid("degenerate reflection distance"));
                }
                Ok(INV_2PI * (m.ln() + radius.ln()))
            }
            Domain::Meshed(md) => md.regular_part(x, y),
        }
    }

    /// Robin function R(x, x).
    pub fn robin(&self, x: Point2) -> Result<f64> {
        match self {
            Domain::Disk { center, radius } => {
                let r2 = x.sub(*center).norm() / radius;
                let v = 1.0 - r2 * r2;
                if v <= 0.0 {
                    return Err(MfError::invalid("robin function outside the disk"));
                }
                Ok(INV_2PI * (v.ln() + radius.ln()))
            }
            Domain::Meshed(md) => md.regular_part(x, x),
        }
    }

    /// Gradient of G(., y) at x (away from the diagonal). Exact on disks;
    /// meshed domains use a centered difference of the regular part.
    pub fn green_grad_x(&self, x: Point2, y: Point2) -> Result<Point2> {
        let d = x.sub(y);
        let d2 = d.dot(d);
        if d2 == 0.0 {
            return Err(MfError::invalid("green gradient on the diagonal"));
        }
        let sing = d.scale(-INV_2PI / d2);
        match self {
            Domain::Disk { center, radius } => {
                // grad_x log |1 - conj(Y) X| with X = (x - c)/a: the complex
                // derivative of log(1 - conj(Y) Z) is -conj(Y)/(1 - conj(Y) Z),
                // and grad = conj of that, scaled by 1/a.
                let a = *radius;
                let xx = x.sub(*center).scale(1.0 / a);
                let yy = y.sub(*center).scale(1.0 / a);
                let fre = 1.0 - xx.dot(yy);
                let fim = yy.x * xx.y - yy.y * xx.x;
                let f2 = fre * fre + fim * fim;
                // -conj(Y)/f = (-Yx + i Yy) * conj(f) / |f|^2
                let gre = (-yy.x * fre - yy.y * fim) / f2;
                let gim = (yy.y * fre - yy.x * fim) / f2;
                // grad of Re log f(Z) = (Re f'/f, -Im f'/f) as a real vector
                let reg = Point2::new(gre, -gim).scale(INV_2PI / a);
                Ok(sing.add(reg))
            }
            Domain::Meshed(_) => {
                let h = 1e-6 * (1.0 + x.norm());
                let rx = (self.regular_part(Point2::new(x.x + h, x.y), y)?
                    - self.regular_part(Point2::new(x.x - h, x.y), y)?)
                    / (2.0 * h);
                let ry = (self.regular_part(Point2::new(x.x, x.y + h), y)?
                    - self.regular_part(Point2::new(x.x, x.y - h), y)?)
                    / (2.0 * h);
                Ok(sing.add(Point2::new(rx, ry)))
            }
        }
    }

    /// Distance from `origin` along direction `theta` to the domain boundary.
    pub fn ray_boundary_distance(&self, origin: Point2, theta: f64) -> Result<f64> {
        let dir = Point2::new(theta.cos(), theta.sin());
        match self {
            Domain::Disk { center, radius } => {
                let o = origin.sub(*center);
                // |o + t d| = radius: t^2 + 2 t o.d + |o|^2 - radius^2 = 0
                let b = o.dot(dir);
                let c = o.dot(o) - radius * radius;
                let disc = b * b - c;
                if disc < 0.0 || c >= 0.0 {
                    return Err(MfError::invalid("ray origin outside the disk"));
                }
                Ok(-b + disc.sqrt())
            }
            Domain::Meshed(md) => md.ray_boundary_distance(origin, dir),
        }
    }

    /// Whether `p` lies strictly inside the domain.
    pub fn contains(&self, p: Point2) -> bool {
        match self {
            Domain::Disk { center, radius } => p.dist(*center) < *radius,
            Domain::Meshed(md) => md.fem.locate(p).is_some(),
        }
    }

    pub fn mesh(&self) -> Option<&Arc<FemSpace>> {
        match self {
            Domain::Disk { .. } => None,
            Domain::Meshed(md) => Some(&md.fem),
        }
    }
}

/// Meshed domain with a memoized FEM Green function.
pub struct MeshDomain {
    pub fem: Arc<FemSpace>,
    /// source point (bit pattern) -> nodal field of R(., y)
    cache: Mutex<HashMap<(u64, u64), Arc<Vec<f64>>>>,
    boundary_segments: Vec<(Point2, Point2)>,
}

impl MeshDomain {
    pub fn new(fem: Arc<FemSpace>) -> MeshDomain {
        let mesh: &Mesh = &fem.mesh;
        let mut segments = Vec::new();
        for (&(a, b), tris) in &mesh.edge_adjacency() {
            if tris.len() == 1 {
                segments.push((mesh.nodes[a], mesh.nodes[b]));
            }
        }
        MeshDomain {
            fem,
            cache: Mutex::new(HashMap::new()),
            boundary_segments: segments,
        }
    }

    fn regular_field(&self, y: Point2) -> Result<Arc<Vec<f64>>> {
        let key = (y.x.to_bits(), y.y.to_bits());
        if let Some(f) = self.cache.lock().unwrap().get(&key) {
            return Ok(f.clone());
        }
        let mesh = &self.fem.mesh;
        let mut g = vec![0.0; mesh.num_nodes()];
        for i in 0..mesh.num_nodes() {
            if mesh.is_boundary[i] {
                let d = mesh.nodes[i].dist(y);
                if d <= 0.0 {
                    return Err(MfError::invalid("green source on the boundary"));
                }
                g[i] = INV_2PI * d.ln();
            }
        }
        let field = Arc::new(self.fem.harmonic_extension(&g)?);
        self.cache.lock().unwrap().insert(key, field.clone());
        Ok(field)
    }

    fn regular_part(&self, x: Point2, y: Point2) -> Result<f64> {
        let field = self.regular_field(y)?;
        self.fem.eval(&field, x)
    }

    fn ray_boundary_distance(&self, origin: Point2, dir: Point2) -> Result<f64> {
        let mut best: Option<f64> = None;
        for &(a, b) in &self.boundary_segments {
            // origin + t dir = a + s (b - a), s in [0, 1], t > 0
            let e = b.sub(a);
            let denom = dir.cross(e);
            if denom.abs() < 1e-300 {
                continue;
            }
            let ao = a.sub(origin);
            let t = ao.cross(e) / denom;
            let s = ao.cross(dir) / denom;
            if t > 0.0 && (-1e-12..=1.0 + 1e-12).contains(&s) {
                best = Some(best.map_or(t, |cur: f64| cur.min(t)));
            }
        }
        best.ok_or_else(|| MfError::invalid("ray does not meet the boundary"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::make_disk_mesh;

    #[test]
    fn unit_disk_green_closed_form() {
        let dom = Domain::unit_disk();
        // robin at the center of the unit disk vanishes
        assert!(dom.robin(Point2::new(0.0, 0.0)).unwrap().abs() < 1e-15);
        // G(x, 0) = -(1/2pi) log |x|
        let x = Point2::new(0.3, 0.4);
        let g = dom.green(x, Point2::new(0.0, 0.0)).unwrap();
        assert!((g - (-INV_2PI * 0.5f64.ln())).abs() < 1e-14);
        // vanishes on the boundary
        let b = Point2::new(1.0, 0.0);
        let g = dom.green(b, Point2::new(0.2, 0.1)).unwrap();
        assert!(g.abs() < 1e-14);
    }

    #[test]
    fn disk_green_symmetry_and_scaling() {
        let dom = Domain::disk(Point2::new(0.5, -0.2), 2.0);
        let x = Point2::new(0.9, 0.3);
        let y = Point2::new(-0.4, -1.0);
        let gxy = dom.green(x, y).unwrap();
        let gyx = dom.green(y, x).unwrap();
        assert!((gxy - gyx).abs() < 1e-14);
        // robin at the center is (1/2pi) log radius
        let r = dom.robin(Point2::new(0.5, -0.2)).unwrap();
        assert!((r - INV_2PI * 2.0f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn disk_green_gradient_matches_finite_difference() {
        let dom = Domain::disk(Point2::new(0.1, 0.0), 1.5);
        let x = Point2::new(0.6, 0.4);
        let y = Point2::new(-0.2, -0.3);
        let g = dom.green_grad_x(x, y).unwrap();
        let h = 1e-6;
        let fx = (dom.green(Point2::new(x.x + h, x.y), y).unwrap()
            - dom.green(Point2::new(x.x - h, x.y), y).unwrap())
            / (2.0 * h);
        let fy = (dom.green(Point2::new(x.x, x.y + h), y).unwrap()
            - dom.green(Point2::new(x.x, x.y - h), y).unwrap())
            / (2.0 * h);
        assert!((g.x - fx).abs() < 1e-8);
        assert!((g.y - fy).abs() < 1e-8);
    }

    #[test]
    fn mesh_green_approximates_disk_green() {
        let mesh = Arc::new(make_disk_mesh(1.0, 4, None).unwrap());
        let fem = Arc::new(FemSpace::new(mesh).unwrap());
        let meshed = Domain::meshed(fem);
        let exact = Domain::unit_disk();
        let y = Point2::new(0.25, 0.1);
        for &(px, py) in &[(0.0, 0.0), (-0.5, 0.2), (0.6, -0.3)] {
            let x = Point2::new(px, py);
            let got = meshed.regular_part(x, y).unwrap();
            let want = exact.regular_part(x, y).unwrap();
            assert!((got - want).abs() < 2e-3, "at ({px}, {py}): {got} vs {want}");
        }
    }

    #[test]
    fn ray_distance_on_disk_and_mesh() {
        let dom = Domain::disk(Point2::new(0.0, 0.0), 1.0);
        let d = dom
            .ray_boundary_distance(Point2::new(0.5, 0.0), std::f64::consts::PI)
            .unwrap();
        assert!((d - 1.5).abs() < 1e-14);
        let mesh = Arc::new(make_disk_mesh(1.0, 5, None).unwrap());
        let fem = Arc::new(FemSpace::new(mesh).unwrap());
        let meshed = Domain::meshed(fem);
        let d = meshed
            .ray_boundary_distance(Point2::new(0.5, 0.0), std::f64::consts::PI)
            .unwrap();
        assert!((d - 1.5).abs() < 1e-3, "mesh ray distance {d}");
    }
}
